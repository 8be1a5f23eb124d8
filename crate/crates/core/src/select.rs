//! Variable selection: skewness screen with log transforms, then pruning
//! of highly correlated pairs.

use std::collections::HashSet;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ingest::{
    omit_unpopulated_regions, validate_dataset, Dataset, OmissionLog, Transform, ValidationReport,
    DEFAULT_SCREEN_FRACTION,
};
use crate::linalg::Matrix;
use crate::spatial::{impute_neighbor_mean, AdjacencyGraph, ImputationLog};

pub const DEFAULT_SKEW_THRESHOLD: f64 = 2.0;
pub const DEFAULT_CORR_THRESHOLD: f64 = 0.90;

/// Slack under which two correlations (or mean absolute correlations) are
/// treated as tied and resolved by name.
const TIE_EPS: f64 = 1e-12;

/// Moment coefficient of skewness `m3 / m2^(3/2)` with `m_k` the k-th
/// central moment using divisor `n`.
pub fn compute_skewness(x: &[f64]) -> Result<f64> {
    skewness_in(x, "skewness")
}

fn skewness_in(x: &[f64], context: &str) -> Result<f64> {
    if x.len() < 3 {
        return Err(Error::TooShort {
            context: context.to_string(),
            needed: 3,
            got: x.len(),
        });
    }
    if x.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite(context.to_string()));
    }
    let degenerate = || Error::Degenerate {
        context: context.to_string(),
    };
    if x.iter().all(|v| *v == x[0]) {
        return Err(degenerate());
    }
    let n = x.len() as f64;
    let mean = x.iter().sum::<f64>() / n;
    let (mut m2, mut m3) = (0.0, 0.0);
    for v in x {
        let d = v - mean;
        m2 += d * d;
        m3 += d * d * d;
    }
    m2 /= n;
    m3 /= n;
    if m2 == 0.0 {
        return Err(degenerate());
    }
    Ok(m3 / m2.powf(1.5))
}

/// Elementwise `ln(1 + x)`.
pub fn log_transform(x: &[f64]) -> Result<Vec<f64>> {
    log_transform_in(x, "log transform")
}

fn log_transform_in(x: &[f64], context: &str) -> Result<Vec<f64>> {
    if let Some(v) = x.iter().find(|v| **v < 0.0) {
        return Err(Error::NegativeLog {
            context: context.to_string(),
            value: *v,
        });
    }
    Ok(x.iter().map(|v| v.ln_1p()).collect())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Decision {
    Kept,
    KeptLogged,
    RemovedSkew,
    RemovedCorr,
    RemovedManual,
}

impl Decision {
    pub fn is_kept(self) -> bool {
        matches!(self, Decision::Kept | Decision::KeptLogged)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VariableDecision {
    pub short_form: String,
    pub raw_skewness: Option<f64>,
    pub transformed_skewness: Option<f64>,
    pub decision: Decision,
}

/// Skewness screen: `|g1| < threshold` passes untouched; otherwise the
/// column is replaced by `ln(1 + x)` and re-tested, and removed if it
/// still fails.
pub fn screen_skewness(d: &Dataset, threshold: f64) -> Result<(Dataset, Vec<VariableDecision>)> {
    let mut out = d.clone();
    let mut decisions = Vec::with_capacity(d.n_variables());
    let mut keep = Vec::with_capacity(d.n_variables());
    for j in 0..d.n_variables() {
        let name = &d.variables()[j].short_form;
        let col = d.complete_column(j)?;
        let raw = skewness_in(&col, name)?;
        let (transformed, decision) = if raw.abs() < threshold {
            (None, Decision::Kept)
        } else {
            let logged = log_transform_in(&col, name)?;
            let g = skewness_in(&logged, &format!("{name} after log1p"))?;
            if g.abs() < threshold {
                for (i, v) in logged.iter().enumerate() {
                    out.set(i, j, Some(*v));
                }
                out.set_transform(j, Transform::Log1p);
                (Some(g), Decision::KeptLogged)
            } else {
                (Some(g), Decision::RemovedSkew)
            }
        };
        if decision.is_kept() {
            keep.push(j);
        }
        decisions.push(VariableDecision {
            short_form: name.clone(),
            raw_skewness: Some(raw),
            transformed_skewness: transformed,
            decision,
        });
    }
    Ok((out.keep_variables(&keep), decisions))
}

pub fn pearson(a: &[f64], b: &[f64]) -> f64 {
    let n = a.len() as f64;
    let (ma, mb) = (a.iter().sum::<f64>() / n, b.iter().sum::<f64>() / n);
    let (mut sab, mut saa, mut sbb) = (0.0, 0.0, 0.0);
    for (x, y) in a.iter().zip(b) {
        let (dx, dy) = (x - ma, y - mb);
        sab += dx * dy;
        saa += dx * dx;
        sbb += dy * dy;
    }
    (sab / (saa.sqrt() * sbb.sqrt())).clamp(-1.0, 1.0)
}

/// Pearson correlation of complete columns; fails on a zero-variance column.
pub fn correlation_of_columns(columns: &[Vec<f64>], names: &[String]) -> Result<Matrix> {
    for (c, name) in columns.iter().zip(names) {
        if c.len() < 2 {
            return Err(Error::TooShort {
                context: name.clone(),
                needed: 2,
                got: c.len(),
            });
        }
        if c.iter().all(|v| *v == c[0]) {
            return Err(Error::Degenerate {
                context: name.clone(),
            });
        }
    }
    let p = columns.len();
    let mut r = Matrix::identity(p);
    for i in 0..p {
        for j in (i + 1)..p {
            let v = pearson(&columns[i], &columns[j]);
            r[(i, j)] = v;
            r[(j, i)] = v;
        }
    }
    Ok(r)
}

pub fn pearson_correlation_matrix(d: &Dataset) -> Result<Matrix> {
    correlation_of_columns(&d.complete_columns()?, &d.short_forms())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorrelationPair {
    pub a: String,
    pub b: String,
    pub r: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorrelationRemoval {
    pub removed: String,
    pub partner: String,
    pub r: f64,
    pub removed_mean_abs_r: f64,
    pub partner_mean_abs_r: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PruneOutcome {
    /// Pairs at or above the threshold before any removal.
    pub pairs: Vec<CorrelationPair>,
    /// Removals in the order they were made.
    pub removals: Vec<CorrelationRemoval>,
}

/// Repeatedly resolves the strongest pair with `|r| >= threshold`:
/// the member with the larger mean absolute correlation to the other
/// remaining variables is dropped. Ties on `|r|` pick the
/// lexicographically first pair of names; ties on mean absolute
/// correlation drop the lexicographically later name.
pub fn prune_correlated(d: &Dataset, threshold: f64) -> Result<(Dataset, PruneOutcome)> {
    let r = pearson_correlation_matrix(d)?;
    let names = d.short_forms();
    let p = names.len();

    let ordered = |i: usize, j: usize| -> (usize, usize) {
        if names[i] <= names[j] {
            (i, j)
        } else {
            (j, i)
        }
    };

    let mut pairs = Vec::new();
    for i in 0..p {
        for j in (i + 1)..p {
            if r[(i, j)].abs() >= threshold {
                pairs.push(CorrelationPair {
                    a: names[i].clone(),
                    b: names[j].clone(),
                    r: r[(i, j)],
                });
            }
        }
    }

    let mut active: Vec<usize> = (0..p).collect();
    let mut removals = Vec::new();
    loop {
        let mut best: Option<(f64, (usize, usize))> = None;
        for (x, &i) in active.iter().enumerate() {
            for &j in &active[x + 1..] {
                let v = r[(i, j)].abs();
                if v < threshold {
                    continue;
                }
                let cand = ordered(i, j);
                best = match best {
                    None => Some((v, cand)),
                    Some((bv, bp)) => {
                        let tied = (v - bv).abs() <= TIE_EPS;
                        let key = |(a, b): (usize, usize)| (&names[a], &names[b]);
                        if (!tied && v > bv) || (tied && key(cand) < key(bp)) {
                            Some((v, cand))
                        } else {
                            Some((bv, bp))
                        }
                    }
                };
            }
        }
        let Some((_, (a, b))) = best else { break };

        let mean_abs = |i: usize| -> f64 {
            let others: Vec<f64> = active
                .iter()
                .filter(|&&k| k != i)
                .map(|&k| r[(i, k)].abs())
                .collect();
            others.iter().sum::<f64>() / others.len() as f64
        };
        let (ma, mb) = (mean_abs(a), mean_abs(b));
        // a sorts before b, so a tie drops b
        let (drop, keep, md, mk) = if (ma - mb).abs() <= TIE_EPS || mb > ma {
            (b, a, mb, ma)
        } else {
            (a, b, ma, mb)
        };
        removals.push(CorrelationRemoval {
            removed: names[drop].clone(),
            partner: names[keep].clone(),
            r: r[(a, b)],
            removed_mean_abs_r: md,
            partner_mean_abs_r: mk,
        });
        active.retain(|&k| k != drop);
    }

    Ok((d.keep_variables(&active), PruneOutcome { pairs, removals }))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SelectionConfig {
    pub erp_variable: String,
    pub skew_threshold: f64,
    pub corr_threshold: f64,
    pub screen_fraction: f64,
    /// Variables removed by explicit request before imputation.
    pub drop_variables: Vec<String>,
}

impl SelectionConfig {
    pub fn new(erp_variable: impl Into<String>) -> Self {
        SelectionConfig {
            erp_variable: erp_variable.into(),
            skew_threshold: DEFAULT_SKEW_THRESHOLD,
            corr_threshold: DEFAULT_CORR_THRESHOLD,
            screen_fraction: DEFAULT_SCREEN_FRACTION,
            drop_variables: Vec::new(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SelectionReport {
    pub skew_threshold: f64,
    pub corr_threshold: f64,
    /// One entry per input variable, in input order.
    pub variables: Vec<VariableDecision>,
    pub correlation_pairs: Vec<CorrelationPair>,
    pub correlation_removals: Vec<CorrelationRemoval>,
    pub final_variables: Vec<String>,
    /// Step order applied, recorded for provenance.
    pub steps: Vec<String>,
}

impl SelectionReport {
    pub fn decision(&self, short_form: &str) -> Option<Decision> {
        self.variables
            .iter()
            .find(|v| v.short_form == short_form)
            .map(|v| v.decision)
    }

    pub fn count(&self, decision: Decision) -> usize {
        self.variables.iter().filter(|v| v.decision == decision).count()
    }
}

#[derive(Debug, Clone)]
pub struct SelectionOutcome {
    pub dataset: Dataset,
    pub report: SelectionReport,
    pub omission: OmissionLog,
    pub validation: ValidationReport,
    pub imputation: ImputationLog,
}

pub const SELECTION_STEPS: [&str; 5] = [
    "omit_unpopulated_regions",
    "drop_manual",
    "impute_neighbor_mean",
    "screen_skewness",
    "prune_correlated",
];

/// Full selection: omit unpopulated regions, drop manually listed
/// variables, impute, screen skewness, prune correlations. Without a
/// graph every region is treated as isolated (column-mean fill).
pub fn run_selection(
    d: &Dataset,
    graph: Option<&AdjacencyGraph>,
    config: &SelectionConfig,
) -> Result<SelectionOutcome> {
    for (name, t) in [
        ("skew_threshold", config.skew_threshold),
        ("corr_threshold", config.corr_threshold),
        ("screen_fraction", config.screen_fraction),
    ] {
        if !(t > 0.0 && t.is_finite()) {
            return Err(Error::InvalidArgument(format!("{name} must be positive, got {t}")));
        }
    }
    let (d, omission) = omit_unpopulated_regions(d, &config.erp_variable)?;
    let validation = validate_dataset(&d, config.screen_fraction);

    let manual: HashSet<&str> = config.drop_variables.iter().map(String::as_str).collect();
    for m in &manual {
        if d.variable_index(m).is_none() {
            return Err(Error::UnknownVariable(m.to_string()));
        }
    }
    let keep: Vec<usize> = (0..d.n_variables())
        .filter(|&j| !manual.contains(d.variables()[j].short_form.as_str()))
        .collect();
    let all_names = d.short_forms();
    let d = d.keep_variables(&keep);

    let owned_graph;
    let graph = match graph {
        Some(g) => g,
        None => {
            owned_graph = AdjacencyGraph::new(d.region_ids())?;
            &owned_graph
        }
    };
    let (d, imputation) = impute_neighbor_mean(&d, graph)?;
    let (d, skew_decisions) = screen_skewness(&d, config.skew_threshold)?;
    let (d, pruned) = prune_correlated(&d, config.corr_threshold)?;

    let removed_corr: HashSet<&str> = pruned.removals.iter().map(|r| r.removed.as_str()).collect();
    let variables = all_names
        .iter()
        .map(|name| {
            if manual.contains(name.as_str()) {
                return VariableDecision {
                    short_form: name.clone(),
                    raw_skewness: None,
                    transformed_skewness: None,
                    decision: Decision::RemovedManual,
                };
            }
            let mut v = skew_decisions
                .iter()
                .find(|s| &s.short_form == name)
                .cloned()
                .expect("every non-manual variable is screened");
            if removed_corr.contains(name.as_str()) {
                v.decision = Decision::RemovedCorr;
            }
            v
        })
        .collect();

    let report = SelectionReport {
        skew_threshold: config.skew_threshold,
        corr_threshold: config.corr_threshold,
        variables,
        correlation_pairs: pruned.pairs,
        correlation_removals: pruned.removals,
        final_variables: d.short_forms(),
        steps: SELECTION_STEPS.iter().map(|s| s.to_string()).collect(),
    };
    Ok(SelectionOutcome {
        dataset: d,
        report,
        omission,
        validation,
        imputation,
    })
}
