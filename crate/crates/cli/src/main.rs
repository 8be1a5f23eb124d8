use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};

use vulnidx::cluster::Init;
use vulnidx::pca::RetentionRule;
use vulnidx::pipeline::{self, RunConfig, RunManifest, Step};

#[derive(Parser, Debug)]
#[command(name = "vulnidx", version, about = "Regional vulnerability indices from a region-by-variable table")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Full pipeline: ingest, select, pca, elbow (when --k is absent), cluster, stability, profile.
    Run(Opts),
    /// Load and validate the input tables.
    Ingest(Opts),
    /// Omit unpopulated regions, impute, screen skewness and correlation.
    Select(Opts),
    /// Fit the correlation-matrix PCA and score regions.
    Pca(Opts),
    /// Scan k = 1..k-max and suggest an elbow.
    Elbow(Opts),
    /// K-means on the index scores.
    Cluster(Opts),
    /// Pairwise ARI of k-means partitions across seeds.
    Stability(Opts),
    /// Centroid table, cross-tabs and map output.
    Profile(Opts),
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum Retention {
    Kaiser,
    FirstOnly,
    CumulativeVariance,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum InitArg {
    Forgy,
    Kmeanspp,
}

/// Flags mirror the fields of the JSON run config and override it.
#[derive(Args, Debug)]
struct Opts {
    /// Run config as JSON; flags given on the command line take precedence.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    output_dir: PathBuf,
    /// Worker threads for parallel k-means restarts (outputs do not depend on it).
    #[arg(long)]
    threads: Option<usize>,

    #[arg(long)]
    values: Option<PathBuf>,
    #[arg(long)]
    regions: Option<PathBuf>,
    #[arg(long)]
    variables: Option<PathBuf>,
    /// Adjacency list CSV (`region_id,neighbor_id`).
    #[arg(long)]
    adjacency: Option<PathBuf>,
    /// GeoJSON boundaries; used for contiguity when no adjacency list is given, and for the atlas.
    #[arg(long)]
    boundaries: Option<PathBuf>,
    #[arg(long)]
    snap_tolerance: Option<f64>,

    #[arg(long)]
    erp_variable: Option<String>,
    #[arg(long)]
    skew_threshold: Option<f64>,
    #[arg(long)]
    corr_threshold: Option<f64>,
    #[arg(long)]
    screen_fraction: Option<f64>,
    #[arg(long, value_delimiter = ',')]
    drop_variables: Option<Vec<String>>,

    #[arg(long, value_enum)]
    retention: Option<Retention>,
    /// Eigenvalue threshold for kaiser, or variance fraction for cumulative-variance.
    #[arg(long)]
    retention_param: Option<f64>,
    #[arg(long)]
    loading_threshold: Option<f64>,

    #[arg(long)]
    k: Option<usize>,
    #[arg(long)]
    k_max: Option<usize>,
    #[arg(long, value_delimiter = ',')]
    seeds: Option<Vec<u64>>,
    #[arg(long, value_enum)]
    init: Option<InitArg>,
    #[arg(long)]
    restarts: Option<usize>,
    #[arg(long)]
    max_iter: Option<usize>,
    #[arg(long)]
    tol: Option<f64>,
    #[arg(long)]
    record_timestamps: bool,
}

fn retention_rule(kind: Retention, param: Option<f64>) -> Result<RetentionRule> {
    Ok(match kind {
        Retention::Kaiser => RetentionRule::Kaiser {
            threshold: param.unwrap_or(vulnidx::pca::DEFAULT_KAISER_THRESHOLD),
        },
        Retention::FirstOnly => RetentionRule::FirstOnly,
        Retention::CumulativeVariance => match param {
            Some(fraction) => RetentionRule::CumulativeVariance { fraction },
            None => bail!("cumulative-variance retention needs --retention-param <fraction>"),
        },
    })
}

impl Opts {
    fn into_config(self) -> Result<(RunConfig, Option<usize>)> {
        let mut c = match &self.config {
            Some(path) => RunConfig::from_json_file(path)?,
            None => {
                let (Some(v), Some(r), Some(m)) = (&self.values, &self.regions, &self.variables) else {
                    bail!("--values, --regions and --variables are required without --config");
                };
                RunConfig::new(v, r, m)
            }
        };
        macro_rules! set {
            ($($field:ident),*) => {
                $(if let Some(v) = self.$field { c.$field = v; })*
            };
        }
        set!(values, regions, variables, snap_tolerance, erp_variable, skew_threshold);
        set!(corr_threshold, screen_fraction, drop_variables, loading_threshold, k_max, seeds);
        set!(restarts, max_iter, tol);
        if self.adjacency.is_some() {
            c.adjacency = self.adjacency;
        }
        if self.boundaries.is_some() {
            c.boundaries = self.boundaries;
        }
        if self.k.is_some() {
            c.k = self.k;
        }
        match (self.retention, self.retention_param) {
            (Some(kind), p) => c.retention = retention_rule(kind, p)?,
            (None, Some(p)) => {
                c.retention = match c.retention {
                    RetentionRule::Kaiser { .. } => RetentionRule::Kaiser { threshold: p },
                    RetentionRule::CumulativeVariance { .. } => RetentionRule::CumulativeVariance { fraction: p },
                    RetentionRule::FirstOnly => bail!("--retention-param has no effect with first-only"),
                }
            }
            (None, None) => {}
        }
        if let Some(init) = self.init {
            c.init = match init {
                InitArg::Forgy => Init::Forgy,
                InitArg::Kmeanspp => Init::KMeansPlusPlus,
            };
        }
        c.record_timestamps |= self.record_timestamps;
        c.output_dir = Some(self.output_dir);
        if self.threads == Some(0) {
            bail!("--threads must be positive");
        }
        Ok((c, self.threads))
    }
}

fn summarize(m: &RunManifest) {
    for s in &m.steps {
        println!("{:<10} {} outputs", s.step.name(), s.outputs.len());
        for note in &s.notes {
            println!("           note: {note}");
        }
    }
    if let Some(k) = m.suggested_k {
        println!("elbow suggests k = {k}");
    }
    if let Some(k) = m.chosen_k {
        println!("clustered with k = {k}");
    }
}

fn execute(cli: Cli) -> Result<()> {
    let (step, opts) = match cli.command {
        Command::Run(o) => (None, o),
        Command::Ingest(o) => (Some(Step::Ingest), o),
        Command::Select(o) => (Some(Step::Select), o),
        Command::Pca(o) => (Some(Step::Pca), o),
        Command::Elbow(o) => (Some(Step::Elbow), o),
        Command::Cluster(o) => (Some(Step::Cluster), o),
        Command::Stability(o) => (Some(Step::Stability), o),
        Command::Profile(o) => (Some(Step::Profile), o),
    };
    let (config, threads) = opts.into_config()?;
    let manifest = match step {
        None => pipeline::run(&config, threads).context("run failed")?,
        Some(s) => pipeline::run_step(s, &config, threads)?,
    };
    summarize(&manifest);
    Ok(())
}

fn main() -> ExitCode {
    match execute(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
