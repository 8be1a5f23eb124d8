//! Run configuration, per-step execution over serialized intermediates, and
//! the run manifest.
//!
//! Every step reads its inputs from files and writes its outputs into the
//! output directory, so any step can be re-run on its own. The manifest
//! records SHA-256 hashes of each step's inputs and outputs.

use std::collections::BTreeMap;
use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::cluster::{
    elbow_scan, kmeans, stability_analysis, ElbowScan, Init, KMeansConfig, DEFAULT_MAX_ITER,
    DEFAULT_RESTARTS, DEFAULT_SEEDS, DEFAULT_TOL,
};
use crate::error::{Error, Result};
use crate::ingest::{load_dataset, validate_dataset, write_string, Dataset, DEFAULT_SCREEN_FRACTION};
use crate::pca::{
    fit_pca, index_skewness_report, retain_components, score, standardize, substantive_loadings,
    IndexScores, PcaModel, RetentionRule, DEFAULT_LOADING_THRESHOLD,
};
use crate::profile::{atlas_geojson, centroid_table, characterize, crosstab, Axis};
use crate::select::{run_selection, SelectionConfig, DEFAULT_CORR_THRESHOLD, DEFAULT_SKEW_THRESHOLD};
use crate::spatial::{build_adjacency_from_polygons, load_adjacency_list, load_boundaries, AdjacencyGraph};
use crate::cluster::ClusterModel;

pub const TOOL_NAME: &str = "vulnidx";
pub const TOOL_VERSION: &str = env!("CARGO_PKG_VERSION");
pub const DEFAULT_K_MAX: usize = 10;
pub const DEFAULT_ERP_VARIABLE: &str = "ERP";

/// Intermediate and output file names inside the output directory.
pub mod files {
    pub const INGEST_VALUES: &str = "ingest_values.csv";
    pub const INGEST_REGIONS: &str = "ingest_regions.csv";
    pub const INGEST_VARIABLES: &str = "ingest_variables.csv";
    pub const INGEST_VALIDATION: &str = "ingest_validation.json";
    pub const OMISSION_LOG: &str = "omission_log.csv";
    pub const VALIDATION: &str = "validation.json";
    pub const IMPUTATION_LOG: &str = "imputation_log.csv";
    pub const SELECTION_REPORT: &str = "selection_report.json";
    pub const SELECTED_VALUES: &str = "selected_values.csv";
    pub const SELECTED_REGIONS: &str = "selected_regions.csv";
    pub const SELECTED_VARIABLES: &str = "selected_variables.csv";
    pub const PCA_MODEL: &str = "pca_model.json";
    pub const SCORES: &str = "scores.csv";
    pub const INDEX_SKEWNESS: &str = "index_skewness.json";
    pub const LOADINGS: &str = "substantive_loadings.json";
    pub const ELBOW_CSV: &str = "elbow.csv";
    pub const ELBOW_JSON: &str = "elbow.json";
    pub const ASSIGNMENTS: &str = "assignments.csv";
    pub const CLUSTER_MODEL: &str = "cluster_model.json";
    pub const STABILITY: &str = "stability.json";
    pub const PROFILE: &str = "profile.json";
    pub const CROSSTAB_REMOTENESS: &str = "crosstab_remoteness.csv";
    pub const CROSSTAB_STATE: &str = "crosstab_state.csv";
    pub const ATLAS: &str = "atlas.geojson";
    pub const MANIFEST: &str = "manifest.json";
}

fn default_erp() -> String {
    DEFAULT_ERP_VARIABLE.to_string()
}
fn default_skew() -> f64 {
    DEFAULT_SKEW_THRESHOLD
}
fn default_corr() -> f64 {
    DEFAULT_CORR_THRESHOLD
}
fn default_screen() -> f64 {
    DEFAULT_SCREEN_FRACTION
}
fn default_loading() -> f64 {
    DEFAULT_LOADING_THRESHOLD
}
fn default_k_max() -> usize {
    DEFAULT_K_MAX
}
fn default_seeds() -> Vec<u64> {
    DEFAULT_SEEDS.to_vec()
}
fn default_restarts() -> usize {
    DEFAULT_RESTARTS
}
fn default_max_iter() -> usize {
    DEFAULT_MAX_ITER
}
fn default_tol() -> f64 {
    DEFAULT_TOL
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub values: PathBuf,
    pub regions: PathBuf,
    pub variables: PathBuf,
    #[serde(default)]
    pub adjacency: Option<PathBuf>,
    #[serde(default)]
    pub boundaries: Option<PathBuf>,
    #[serde(default)]
    pub snap_tolerance: f64,
    #[serde(default = "default_erp")]
    pub erp_variable: String,
    #[serde(default = "default_skew")]
    pub skew_threshold: f64,
    #[serde(default = "default_corr")]
    pub corr_threshold: f64,
    #[serde(default = "default_screen")]
    pub screen_fraction: f64,
    #[serde(default)]
    pub drop_variables: Vec<String>,
    #[serde(default)]
    pub retention: RetentionRule,
    #[serde(default = "default_loading")]
    pub loading_threshold: f64,
    /// Cluster count; chosen by the elbow scan when absent.
    #[serde(default)]
    pub k: Option<usize>,
    #[serde(default = "default_k_max")]
    pub k_max: usize,
    #[serde(default = "default_seeds")]
    pub seeds: Vec<u64>,
    #[serde(default)]
    pub init: Init,
    #[serde(default = "default_restarts")]
    pub restarts: usize,
    #[serde(default = "default_max_iter")]
    pub max_iter: usize,
    #[serde(default = "default_tol")]
    pub tol: f64,
    /// Wall-clock timestamps in the manifest. Off by default so repeated
    /// runs are byte-identical.
    #[serde(default)]
    pub record_timestamps: bool,
    /// Not echoed into the manifest, so identical runs into different
    /// directories produce identical files.
    #[serde(default, skip_serializing)]
    pub output_dir: Option<PathBuf>,
}

impl RunConfig {
    pub fn new(values: impl Into<PathBuf>, regions: impl Into<PathBuf>, variables: impl Into<PathBuf>) -> Self {
        RunConfig {
            values: values.into(),
            regions: regions.into(),
            variables: variables.into(),
            adjacency: None,
            boundaries: None,
            snap_tolerance: 0.0,
            erp_variable: default_erp(),
            skew_threshold: DEFAULT_SKEW_THRESHOLD,
            corr_threshold: DEFAULT_CORR_THRESHOLD,
            screen_fraction: DEFAULT_SCREEN_FRACTION,
            drop_variables: Vec::new(),
            retention: RetentionRule::default(),
            loading_threshold: DEFAULT_LOADING_THRESHOLD,
            k: None,
            k_max: DEFAULT_K_MAX,
            seeds: default_seeds(),
            init: Init::Forgy,
            restarts: DEFAULT_RESTARTS,
            max_iter: DEFAULT_MAX_ITER,
            tol: DEFAULT_TOL,
            record_timestamps: false,
            output_dir: None,
        }
    }

    pub fn from_json_file(path: &Path) -> Result<RunConfig> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        serde_json::from_str(&text).map_err(|e| Error::json(path, e))
    }

    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("skew_threshold", self.skew_threshold),
            ("corr_threshold", self.corr_threshold),
            ("screen_fraction", self.screen_fraction),
            ("loading_threshold", self.loading_threshold),
            ("tol", self.tol),
        ];
        for (name, v) in positive {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::InvalidArgument(format!("{name} must be positive, got {v}")));
            }
        }
        match self.retention {
            RetentionRule::Kaiser { threshold } if threshold.is_nan() || threshold <= 0.0 => {
                return Err(Error::InvalidArgument("kaiser threshold must be positive".into()))
            }
            RetentionRule::CumulativeVariance { fraction } if !(fraction > 0.0 && fraction <= 1.0) => {
                return Err(Error::InvalidArgument("cumulative fraction must be in (0, 1]".into()))
            }
            _ => {}
        }
        if self.seeds.is_empty() {
            return Err(Error::InvalidArgument("at least one seed is required".into()));
        }
        if self.restarts == 0 || self.max_iter == 0 {
            return Err(Error::InvalidArgument("restarts and max_iter must be positive".into()));
        }
        if self.k == Some(0) {
            return Err(Error::InvalidArgument("k must be positive".into()));
        }
        Ok(())
    }

    fn kmeans_config(&self, k: usize) -> KMeansConfig {
        KMeansConfig {
            k,
            seed: self.seeds[0],
            init: self.init,
            restarts: self.restarts,
            max_iter: self.max_iter,
            tol: self.tol,
        }
    }

    pub fn hash(&self) -> String {
        sha256_hex(serde_json::to_string(self).expect("config serializes").as_bytes())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Step {
    Ingest,
    Select,
    Pca,
    Elbow,
    Cluster,
    Stability,
    Profile,
}

impl Step {
    pub const ALL: [Step; 7] = [
        Step::Ingest,
        Step::Select,
        Step::Pca,
        Step::Elbow,
        Step::Cluster,
        Step::Stability,
        Step::Profile,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Step::Ingest => "ingest",
            Step::Select => "select",
            Step::Pca => "pca",
            Step::Elbow => "elbow",
            Step::Cluster => "cluster",
            Step::Stability => "stability",
            Step::Profile => "profile",
        }
    }
}

impl fmt::Display for Step {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Step {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        Step::ALL
            .into_iter()
            .find(|st| st.name() == s)
            .ok_or_else(|| format!("unknown step `{s}`"))
    }
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

pub fn hash_file(path: &Path) -> Result<String> {
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    Ok(sha256_hex(&bytes))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FileHash {
    pub path: String,
    pub sha256: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StepRecord {
    pub step: Step,
    pub inputs: Vec<FileHash>,
    pub outputs: Vec<FileHash>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub notes: Vec<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub finished_unix: Option<u64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub tool: String,
    pub version: String,
    pub config: RunConfig,
    pub config_hash: String,
    pub selection_order: Vec<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub suggested_k: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub chosen_k: Option<usize>,
    pub steps: Vec<StepRecord>,
}

impl RunManifest {
    fn new(config: &RunConfig) -> Self {
        RunManifest {
            tool: TOOL_NAME.to_string(),
            version: TOOL_VERSION.to_string(),
            config: config.clone(),
            config_hash: config.hash(),
            selection_order: crate::select::SELECTION_STEPS.iter().map(|s| s.to_string()).collect(),
            suggested_k: None,
            chosen_k: None,
            steps: Vec::new(),
        }
    }

    pub fn load(path: &Path) -> Result<RunManifest> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        serde_json::from_str(&text).map_err(|e| Error::json(path, e))
    }

    pub fn step(&self, step: Step) -> Option<&StepRecord> {
        self.steps.iter().find(|s| s.step == step)
    }

    fn record(&mut self, rec: StepRecord) {
        self.steps.retain(|s| s.step != rec.step);
        self.steps.push(rec);
        self.steps.sort_by_key(|s| s.step);
    }
}

/// Working context of one step: output directory, config and the files the
/// step touched.
struct StepCtx<'a> {
    out: &'a Path,
    config: &'a RunConfig,
    inputs: Vec<PathBuf>,
    outputs: Vec<String>,
    notes: Vec<String>,
}

impl<'a> StepCtx<'a> {
    fn new(out: &'a Path, config: &'a RunConfig) -> Self {
        StepCtx {
            out,
            config,
            inputs: Vec::new(),
            outputs: Vec::new(),
            notes: Vec::new(),
        }
    }

    /// Path of an intermediate produced by `producer`, failing if absent.
    fn intermediate(&mut self, name: &str, producer: Step) -> Result<PathBuf> {
        let p = self.out.join(name);
        if !p.is_file() {
            return Err(Error::MissingIntermediate {
                path: p,
                needed_step: producer.name().to_string(),
            });
        }
        self.inputs.push(p.clone());
        Ok(p)
    }

    fn external(&mut self, p: &Path) -> PathBuf {
        self.inputs.push(p.to_path_buf());
        p.to_path_buf()
    }

    fn write(&mut self, name: &str, contents: &str) -> Result<()> {
        write_string(&self.out.join(name), contents)?;
        self.outputs.push(name.to_string());
        Ok(())
    }

    fn write_json<T: Serialize>(&mut self, name: &str, value: &T) -> Result<()> {
        let mut s = serde_json::to_string_pretty(value).expect("serializable");
        s.push('\n');
        self.write(name, &s)
    }

    fn finish(self, step: Step) -> Result<StepRecord> {
        let display = |p: &Path| -> String {
            p.strip_prefix(self.out)
                .map(|r| r.display().to_string())
                .unwrap_or_else(|_| p.display().to_string())
        };
        let inputs = self
            .inputs
            .iter()
            .map(|p| Ok(FileHash { path: display(p), sha256: hash_file(p)? }))
            .collect::<Result<Vec<_>>>()?;
        let outputs = self
            .outputs
            .iter()
            .map(|n| Ok(FileHash { path: n.clone(), sha256: hash_file(&self.out.join(n))? }))
            .collect::<Result<Vec<_>>>()?;
        let finished_unix = self.config.record_timestamps.then(|| {
            std::time::SystemTime::now()
                .duration_since(std::time::UNIX_EPOCH)
                .map(|d| d.as_secs())
                .unwrap_or(0)
        });
        Ok(StepRecord {
            step,
            inputs,
            outputs,
            notes: self.notes,
            finished_unix,
        })
    }
}

fn load_selected(ctx: &mut StepCtx) -> Result<Dataset> {
    let v = ctx.intermediate(files::SELECTED_VALUES, Step::Select)?;
    let r = ctx.intermediate(files::SELECTED_REGIONS, Step::Select)?;
    let m = ctx.intermediate(files::SELECTED_VARIABLES, Step::Select)?;
    load_dataset(&v, &r, &m)
}

fn load_scores(ctx: &mut StepCtx) -> Result<IndexScores> {
    let p = ctx.intermediate(files::SCORES, Step::Pca)?;
    IndexScores::load(&p)
}

fn read_json<T: for<'de> Deserialize<'de>>(p: &Path) -> Result<T> {
    let text = std::fs::read_to_string(p).map_err(|e| Error::io(p, e))?;
    serde_json::from_str(&text).map_err(|e| Error::json(p, e))
}

/// k from the config, else the elbow scan's suggestion.
fn resolve_k(ctx: &mut StepCtx) -> Result<usize> {
    if let Some(k) = ctx.config.k {
        return Ok(k);
    }
    let p = ctx.intermediate(files::ELBOW_JSON, Step::Elbow)?;
    let scan: ElbowScan = read_json(&p)?;
    scan.suggested_k.ok_or_else(|| {
        Error::InvalidArgument("elbow scan has no interior point; set k explicitly".into())
    })
}

fn step_ingest(ctx: &mut StepCtx) -> Result<()> {
    let cfg = ctx.config;
    let (v, r, m) = (
        ctx.external(&cfg.values),
        ctx.external(&cfg.regions),
        ctx.external(&cfg.variables),
    );
    let d = load_dataset(&v, &r, &m)?;
    if d.variable_index(&cfg.erp_variable).is_none() {
        return Err(Error::UnknownVariable(cfg.erp_variable.clone()));
    }
    ctx.write(files::INGEST_VALUES, &d.values_csv())?;
    ctx.write(files::INGEST_REGIONS, &d.regions_csv())?;
    ctx.write(files::INGEST_VARIABLES, &d.variables_csv())?;
    ctx.write_json(files::INGEST_VALIDATION, &validate_dataset(&d, cfg.screen_fraction))
}

fn load_graph(ctx: &mut StepCtx, region_ids: &[String]) -> Result<Option<AdjacencyGraph>> {
    let cfg = ctx.config;
    if let Some(path) = &cfg.adjacency {
        let p = ctx.external(path);
        return load_adjacency_list(&p, region_ids).map(Some);
    }
    if let Some(path) = &cfg.boundaries {
        let p = ctx.external(path);
        let b = load_boundaries(&p)?;
        let poly = build_adjacency_from_polygons(&b, cfg.snap_tolerance)?;
        // regions without a boundary (non-spatial rows) join as isolated nodes
        let mut g = AdjacencyGraph::new(region_ids.to_vec())?;
        for (i, id) in poly.region_ids().iter().enumerate() {
            if g.index_of(id).is_none() {
                continue;
            }
            for &j in poly.neighbors(i) {
                let other = &poly.region_ids()[j];
                if g.index_of(other).is_some() {
                    g.add_edge_by_id(id, other)?;
                }
            }
        }
        return Ok(Some(g));
    }
    ctx.notes.push("no adjacency supplied: missing cells filled with column means".into());
    Ok(None)
}

fn step_select(ctx: &mut StepCtx) -> Result<()> {
    let v = ctx.intermediate(files::INGEST_VALUES, Step::Ingest)?;
    let r = ctx.intermediate(files::INGEST_REGIONS, Step::Ingest)?;
    let m = ctx.intermediate(files::INGEST_VARIABLES, Step::Ingest)?;
    let d = load_dataset(&v, &r, &m)?;
    let graph = load_graph(ctx, &d.region_ids())?;
    let cfg = ctx.config;
    let sel_cfg = SelectionConfig {
        erp_variable: cfg.erp_variable.clone(),
        skew_threshold: cfg.skew_threshold,
        corr_threshold: cfg.corr_threshold,
        screen_fraction: cfg.screen_fraction,
        drop_variables: cfg.drop_variables.clone(),
    };
    let out = run_selection(&d, graph.as_ref(), &sel_cfg)?;
    ctx.write(files::OMISSION_LOG, &out.omission.to_csv())?;
    ctx.write_json(files::VALIDATION, &out.validation)?;
    ctx.write(files::IMPUTATION_LOG, &out.imputation.to_csv())?;
    ctx.write_json(files::SELECTION_REPORT, &out.report)?;
    ctx.write(files::SELECTED_VALUES, &out.dataset.values_csv())?;
    ctx.write(files::SELECTED_REGIONS, &out.dataset.regions_csv())?;
    ctx.write(files::SELECTED_VARIABLES, &out.dataset.variables_csv())
}

fn step_pca(ctx: &mut StepCtx) -> Result<()> {
    let d = load_selected(ctx)?;
    let s = standardize(&d)?;
    let model = retain_components(&fit_pca(&s)?, ctx.config.retention)?;
    let scores = score(&model, &s.z, d.region_ids())?;
    ctx.write_json(files::PCA_MODEL, &model)?;
    ctx.write(files::SCORES, &scores.to_csv())?;
    ctx.write_json(files::INDEX_SKEWNESS, &index_skewness_report(&scores))?;
    ctx.write_json(files::LOADINGS, &substantive_loadings(&model, ctx.config.loading_threshold))
}

fn step_elbow(ctx: &mut StepCtx) -> Result<Option<usize>> {
    let scores = load_scores(ctx)?;
    let k_max = ctx.config.k_max.min(scores.n());
    let scan = elbow_scan(&scores, k_max, &ctx.config.kmeans_config(1))?;
    ctx.write(files::ELBOW_CSV, &scan.to_csv())?;
    ctx.write_json(files::ELBOW_JSON, &scan)?;
    Ok(scan.suggested_k)
}

fn step_cluster(ctx: &mut StepCtx) -> Result<usize> {
    let scores = load_scores(ctx)?;
    let k = resolve_k(ctx)?;
    let model = kmeans(&scores, &ctx.config.kmeans_config(k))?;
    if !model.converged {
        ctx.notes.push(format!("k-means stopped at max_iter = {}", ctx.config.max_iter));
    }
    ctx.write(files::ASSIGNMENTS, &model.assignments_csv(&scores.region_ids))?;
    ctx.write_json(files::CLUSTER_MODEL, &model)?;
    Ok(k)
}

fn step_stability(ctx: &mut StepCtx) -> Result<()> {
    let scores = load_scores(ctx)?;
    let k = resolve_k(ctx)?;
    let report = stability_analysis(&scores, &ctx.config.seeds, &ctx.config.kmeans_config(k))?;
    ctx.write_json(files::STABILITY, &report)
}

#[derive(Serialize)]
struct ProfileDoc<'a> {
    k: usize,
    n: usize,
    centroids: &'a crate::profile::ClusterProfile,
    characterization: &'a crate::profile::Characterization,
    crosstabs: BTreeMap<&'static str, &'a crate::profile::CrossTab>,
}

fn step_profile(ctx: &mut StepCtx) -> Result<()> {
    let scores = load_scores(ctx)?;
    let cm_path = ctx.intermediate(files::CLUSTER_MODEL, Step::Cluster)?;
    let model: ClusterModel = read_json(&cm_path)?;
    let pca_path = ctx.intermediate(files::PCA_MODEL, Step::Pca)?;
    let pca = PcaModel::load(&pca_path)?;
    let regions_path = ctx.intermediate(files::SELECTED_REGIONS, Step::Select)?;
    let regions = crate::ingest::load_regions(&regions_path)?;
    if regions.iter().map(|r| &r.region_id).ne(scores.region_ids.iter()) {
        return Err(Error::Dimension("scores and selected regions are not aligned".into()));
    }

    let table = centroid_table(&model, &scores)?;
    let character = characterize(&model.centroids, &pca, ctx.config.loading_threshold)?;
    let mut tabs = Vec::new();
    for (axis, name) in [
        (Axis::Remoteness, files::CROSSTAB_REMOTENESS),
        (Axis::State, files::CROSSTAB_STATE),
    ] {
        match crosstab(&model.assignments, model.k, &regions, axis) {
            Ok(t) => tabs.push((axis, name, t)),
            Err(e) => ctx.notes.push(format!("{} cross-tab skipped: {e}", axis.as_str())),
        }
    }
    for (_, name, t) in &tabs {
        ctx.write(name, &t.to_csv())?;
    }
    let doc = ProfileDoc {
        k: model.k,
        n: scores.n(),
        centroids: &table,
        characterization: &character,
        crosstabs: tabs.iter().map(|(a, _, t)| (a.as_str(), t)).collect(),
    };
    ctx.write_json(files::PROFILE, &doc)?;

    if let Some(path) = ctx.config.boundaries.clone() {
        let p = ctx.external(&path);
        let b = load_boundaries(&p)?;
        ctx.write_json(files::ATLAS, &atlas_geojson(&b, &scores, Some(&model.assignments)))?;
    }
    Ok(())
}

fn output_dir(config: &RunConfig) -> Result<&Path> {
    config
        .output_dir
        .as_deref()
        .ok_or_else(|| Error::InvalidArgument("output directory is required".into()))
}

fn load_or_new_manifest(out: &Path, config: &RunConfig) -> RunManifest {
    match RunManifest::load(&out.join(files::MANIFEST)) {
        Ok(m) if m.config_hash == config.hash() => m,
        _ => RunManifest::new(config),
    }
}

fn write_manifest(out: &Path, m: &RunManifest) -> Result<()> {
    let mut s = serde_json::to_string_pretty(m).expect("manifest serializes");
    s.push('\n');
    write_string(&out.join(files::MANIFEST), &s)
}

fn execute(step: Step, config: &RunConfig, manifest: &mut RunManifest) -> Result<()> {
    let out = output_dir(config)?;
    let mut ctx = StepCtx::new(out, config);
    let result = match step {
        Step::Ingest => step_ingest(&mut ctx),
        Step::Select => step_select(&mut ctx),
        Step::Pca => step_pca(&mut ctx),
        Step::Elbow => step_elbow(&mut ctx).map(|k| manifest.suggested_k = k),
        Step::Cluster => step_cluster(&mut ctx).map(|k| manifest.chosen_k = Some(k)),
        Step::Stability => step_stability(&mut ctx),
        Step::Profile => step_profile(&mut ctx),
    };
    result.map_err(|e| e.in_step(step.name()))?;
    let rec = ctx.finish(step).map_err(|e| e.in_step(step.name()))?;
    manifest.record(rec);
    Ok(())
}

fn with_threads<T: Send>(threads: Option<usize>, f: impl FnOnce() -> T + Send) -> Result<T> {
    match threads {
        None => Ok(f()),
        Some(t) => {
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(t)
                .build()
                .map_err(|e| Error::InvalidArgument(format!("thread pool: {e}")))?;
            Ok(pool.install(f))
        }
    }
}

/// Runs a single step against the intermediates already in the output
/// directory and updates the manifest.
pub fn run_step(step: Step, config: &RunConfig, threads: Option<usize>) -> Result<RunManifest> {
    config.validate()?;
    let out = output_dir(config)?;
    std::fs::create_dir_all(out).map_err(|e| Error::io(out, e))?;
    let mut manifest = load_or_new_manifest(out, config);
    with_threads(threads, || execute(step, config, &mut manifest))??;
    write_manifest(out, &manifest)?;
    Ok(manifest)
}

/// Full pipeline: ingest, select, pca, elbow (only when k is unset),
/// cluster, stability, profile.
pub fn run(config: &RunConfig, threads: Option<usize>) -> Result<RunManifest> {
    config.validate()?;
    if config.seeds.len() < 2 {
        return Err(Error::InvalidArgument(
            "stability analysis needs at least 2 seeds".into(),
        ));
    }
    let out = output_dir(config)?;
    std::fs::create_dir_all(out).map_err(|e| Error::io(out, e))?;
    let mut manifest = RunManifest::new(config);
    let steps: Vec<Step> = Step::ALL
        .into_iter()
        .filter(|s| *s != Step::Elbow || config.k.is_none())
        .collect();
    let result = with_threads(threads, || {
        for step in steps {
            execute(step, config, &mut manifest)?;
        }
        Ok::<(), Error>(())
    })?;
    // the manifest is written even after a failure, covering finished steps
    write_manifest(out, &manifest)?;
    result?;
    Ok(manifest)
}
