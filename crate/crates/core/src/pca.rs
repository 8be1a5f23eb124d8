//! Correlation-matrix PCA: standardization, Jacobi eigendecomposition,
//! component retention and scoring of regions into vulnerability indices.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ingest::{csv_field, format_f64, read_csv, Dataset};
use crate::linalg::{mean, sample_sd, symmetric_eigen, Matrix, JACOBI_MAX_SWEEPS, JACOBI_REL_TOL};
use crate::select::compute_skewness;

pub const DEFAULT_KAISER_THRESHOLD: f64 = 1.0;
pub const DEFAULT_LOADING_THRESHOLD: f64 = 0.20;

/// Negative eigenvalues down to this magnitude are rounding noise and are
/// clamped to zero.
const NEGATIVE_EIGEN_CLAMP: f64 = 1e-10;

/// Column-standardized data (mean 0, sample sd 1).
#[derive(Debug, Clone, PartialEq)]
pub struct Standardized {
    pub variable_order: Vec<String>,
    pub z: Matrix,
    pub means: Vec<f64>,
    pub sds: Vec<f64>,
}

pub fn standardize_columns(columns: &[Vec<f64>], names: &[String]) -> Result<Standardized> {
    if columns.len() != names.len() {
        return Err(Error::Dimension("one name per column required".into()));
    }
    let n = columns.first().map_or(0, Vec::len);
    if n < 2 {
        return Err(Error::TooShort {
            context: "standardize".into(),
            needed: 2,
            got: n,
        });
    }
    let mut means = Vec::with_capacity(columns.len());
    let mut sds = Vec::with_capacity(columns.len());
    let mut z_cols = Vec::with_capacity(columns.len());
    for (c, name) in columns.iter().zip(names) {
        if c.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite(name.clone()));
        }
        if c.iter().all(|v| *v == c[0]) {
            return Err(Error::Degenerate {
                context: name.clone(),
            });
        }
        let m = mean(c);
        let s = sample_sd(c);
        if s == 0.0 {
            return Err(Error::Degenerate {
                context: name.clone(),
            });
        }
        z_cols.push(c.iter().map(|v| (v - m) / s).collect::<Vec<f64>>());
        means.push(m);
        sds.push(s);
    }
    Ok(Standardized {
        variable_order: names.to_vec(),
        z: Matrix::from_columns(&z_cols)?,
        means,
        sds,
    })
}

pub fn standardize(d: &Dataset) -> Result<Standardized> {
    standardize_columns(&d.complete_columns()?, &d.short_forms())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "strategy", rename_all = "snake_case")]
pub enum RetentionRule {
    /// Keep components with eigenvalue `>= threshold`.
    Kaiser { threshold: f64 },
    FirstOnly,
    /// Keep the fewest leading components whose cumulative variance
    /// fraction reaches `fraction`.
    CumulativeVariance { fraction: f64 },
}

impl Default for RetentionRule {
    fn default() -> Self {
        RetentionRule::Kaiser {
            threshold: DEFAULT_KAISER_THRESHOLD,
        }
    }
}

/// Number of leading components kept by `rule` for descending
/// `eigenvalues` of a `p x p` correlation matrix (`p = eigenvalues.len()`).
pub fn retained_count(eigenvalues: &[f64], rule: RetentionRule) -> Result<usize> {
    let p = eigenvalues.len() as f64;
    let k = match rule {
        RetentionRule::Kaiser { threshold } => {
            eigenvalues.iter().take_while(|l| **l >= threshold).count()
        }
        RetentionRule::FirstOnly => eigenvalues.len().min(1),
        RetentionRule::CumulativeVariance { fraction } => {
            let mut cum = 0.0;
            let mut k = 0;
            for l in eigenvalues {
                cum += l / p;
                k += 1;
                if cum >= fraction {
                    break;
                }
            }
            if cum < fraction {
                0
            } else {
                k
            }
        }
    };
    if k == 0 {
        return Err(Error::NothingRetained(format!(
            "{rule:?}; leading eigenvalue {:?}",
            eigenvalues.first()
        )));
    }
    Ok(k)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PcaModel {
    pub variable_order: Vec<String>,
    pub means: Vec<f64>,
    pub sds: Vec<f64>,
    /// `p x p`, columns are components, rows follow `variable_order`.
    pub loadings: Matrix,
    pub eigenvalues: Vec<f64>,
    pub variance_fraction: Vec<f64>,
    pub retained: usize,
    pub retention: Option<RetentionRule>,
    pub sweeps: usize,
}

impl PcaModel {
    pub fn p(&self) -> usize {
        self.variable_order.len()
    }

    pub fn cumulative_variance(&self) -> Vec<f64> {
        self.variance_fraction
            .iter()
            .scan(0.0, |acc, v| {
                *acc += v;
                Some(*acc)
            })
            .collect()
    }

    pub fn component(&self, j: usize) -> Vec<f64> {
        self.loadings.column(j)
    }

    pub fn index_names(&self) -> Vec<String> {
        index_names(self.retained)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("model serializes")
    }

    pub fn load(path: &Path) -> Result<PcaModel> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        serde_json::from_str(&text).map_err(|e| Error::json(path, e))
    }
}

pub fn index_names(k: usize) -> Vec<String> {
    (1..=k).map(|j| format!("VI{j}")).collect()
}

/// Eigendecomposition of `R = Z'Z / (n - 1)`. All components are retained
/// until [`retain_components`] is applied.
pub fn fit_pca(s: &Standardized) -> Result<PcaModel> {
    let z = &s.z;
    let (n, p) = (z.rows(), z.cols());
    if n < 2 {
        return Err(Error::TooShort {
            context: "fit_pca".into(),
            needed: 2,
            got: n,
        });
    }
    if p == 0 {
        return Err(Error::Dimension("no variables to fit".into()));
    }
    let mut r = z.transpose().matmul(z)?;
    let scale = 1.0 / (n as f64 - 1.0);
    for i in 0..p {
        for j in 0..p {
            r[(i, j)] *= scale;
        }
    }
    // exact symmetry before the solver
    for i in 0..p {
        for j in (i + 1)..p {
            let v = 0.5 * (r[(i, j)] + r[(j, i)]);
            r[(i, j)] = v;
            r[(j, i)] = v;
        }
    }
    let eig = symmetric_eigen(&r, JACOBI_MAX_SWEEPS, JACOBI_REL_TOL)?;
    let eigenvalues: Vec<f64> = eig
        .values
        .iter()
        .map(|&l| if (-NEGATIVE_EIGEN_CLAMP..0.0).contains(&l) { 0.0 } else { l })
        .collect();
    let variance_fraction = eigenvalues.iter().map(|l| l / p as f64).collect();
    Ok(PcaModel {
        variable_order: s.variable_order.clone(),
        means: s.means.clone(),
        sds: s.sds.clone(),
        loadings: eig.vectors,
        eigenvalues,
        variance_fraction,
        retained: p,
        retention: None,
        sweeps: eig.sweeps,
    })
}

pub fn retain_components(m: &PcaModel, rule: RetentionRule) -> Result<PcaModel> {
    let retained = retained_count(&m.eigenvalues, rule)?;
    Ok(PcaModel {
        retained,
        retention: Some(rule),
        ..m.clone()
    })
}

/// Region-by-index score matrix, columns `VI1..VIk`.
#[derive(Debug, Clone, PartialEq)]
pub struct IndexScores {
    pub region_ids: Vec<String>,
    pub scores: Matrix,
}

impl IndexScores {
    pub fn n(&self) -> usize {
        self.scores.rows()
    }

    pub fn k(&self) -> usize {
        self.scores.cols()
    }

    pub fn index_names(&self) -> Vec<String> {
        index_names(self.k())
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("region_id");
        for name in self.index_names() {
            out.push(',');
            out.push_str(&name);
        }
        out.push('\n');
        for (i, id) in self.region_ids.iter().enumerate() {
            out.push_str(&csv_field(id));
            for v in self.scores.row(i) {
                out.push(',');
                out.push_str(&format_f64(*v));
            }
            out.push('\n');
        }
        out
    }

    pub fn load(path: &Path) -> Result<IndexScores> {
        let (header, rows) = read_csv(path)?;
        let file = path.display().to_string();
        if header.first().map(String::as_str) != Some("region_id") {
            return Err(Error::schema(file, "first column must be `region_id`"));
        }
        let k = header.len() - 1;
        if header[1..] != index_names(k)[..] {
            return Err(Error::schema(file, "index columns must be VI1..VIk"));
        }
        let mut ids = Vec::with_capacity(rows.len());
        let mut data = Vec::with_capacity(rows.len() * k);
        for (line, row) in rows {
            ids.push(row[0].clone());
            for (cell, col) in row[1..].iter().zip(&header[1..]) {
                match crate::ingest::parse_cell(cell) {
                    Ok(Some(v)) => data.push(v),
                    _ => {
                        return Err(Error::BadCell {
                            file: file.clone(),
                            line,
                            column: col.clone(),
                            cell: cell.clone(),
                        })
                    }
                }
            }
        }
        Ok(IndexScores {
            scores: Matrix::from_row_major(ids.len(), k, data)?,
            region_ids: ids,
        })
    }
}

/// `Z W_k` over the retained components.
pub fn score(m: &PcaModel, z: &Matrix, region_ids: Vec<String>) -> Result<IndexScores> {
    if z.cols() != m.p() {
        return Err(Error::Dimension(format!(
            "model has {} variables, data has {} columns",
            m.p(),
            z.cols()
        )));
    }
    if z.rows() != region_ids.len() {
        return Err(Error::Dimension(format!(
            "{} region ids for {} rows",
            region_ids.len(),
            z.rows()
        )));
    }
    let scores = z.matmul(&m.loadings.leading_columns(m.retained))?;
    Ok(IndexScores { region_ids, scores })
}

/// Standardizes `d` with the model's own means and sds, then scores it.
/// Columns of `d` must follow the model's variable order.
pub fn project(m: &PcaModel, d: &Dataset) -> Result<IndexScores> {
    if d.short_forms() != m.variable_order {
        return Err(Error::Dimension(
            "dataset columns do not follow the model's variable order".into(),
        ));
    }
    let cols = d.complete_columns()?;
    let z_cols: Vec<Vec<f64>> = cols
        .iter()
        .enumerate()
        .map(|(j, c)| c.iter().map(|v| (v - m.means[j]) / m.sds[j]).collect())
        .collect();
    score(m, &Matrix::from_columns(&z_cols)?, d.region_ids())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Sign {
    Positive,
    Negative,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SubstantiveLoading {
    pub short_form: String,
    pub weight: f64,
    pub sign: Sign,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComponentLoadings {
    pub index: String,
    pub variables: Vec<SubstantiveLoading>,
}

/// Variables with `|weight| >= threshold` per retained component, by
/// descending `|weight|` (variable order on ties).
pub fn substantive_loadings(m: &PcaModel, threshold: f64) -> Vec<ComponentLoadings> {
    (0..m.retained)
        .map(|j| {
            let mut vars: Vec<SubstantiveLoading> = m
                .variable_order
                .iter()
                .enumerate()
                .filter_map(|(i, name)| {
                    let w = m.loadings[(i, j)];
                    (w.abs() >= threshold).then(|| SubstantiveLoading {
                        short_form: name.clone(),
                        weight: w,
                        sign: if w < 0.0 { Sign::Negative } else { Sign::Positive },
                    })
                })
                .collect();
            vars.sort_by(|a, b| b.weight.abs().total_cmp(&a.weight.abs()));
            ComponentLoadings {
                index: format!("VI{}", j + 1),
                variables: vars,
            }
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SkewBand {
    /// `|g1| <= 1`
    Low,
    /// `1 < |g1| <= 2`
    Medium,
    /// `|g1| > 2`
    High,
    Undefined,
}

impl SkewBand {
    pub fn of(g1: f64) -> SkewBand {
        let a = g1.abs();
        if a <= 1.0 {
            SkewBand::Low
        } else if a <= 2.0 {
            SkewBand::Medium
        } else {
            SkewBand::High
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IndexSkewness {
    pub index: String,
    pub skewness: Option<f64>,
    pub band: SkewBand,
    /// `|g1| < 2`
    pub acceptable: bool,
}

pub fn index_skewness_report(s: &IndexScores) -> Vec<IndexSkewness> {
    s.index_names()
        .into_iter()
        .enumerate()
        .map(|(j, index)| match compute_skewness(&s.scores.column(j)) {
            Ok(g) => IndexSkewness {
                index,
                skewness: Some(g),
                band: SkewBand::of(g),
                acceptable: g.abs() < 2.0,
            },
            Err(_) => IndexSkewness {
                index,
                skewness: None,
                band: SkewBand::Undefined,
                acceptable: false,
            },
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn names(p: usize) -> Vec<String> {
        (0..p).map(|j| format!("X{j}")).collect()
    }

    #[test]
    fn standardize_examples() {
        let s = standardize_columns(&[vec![1.0, 2.0, 3.0]], &names(1)).unwrap();
        assert_eq!(s.z.column(0), vec![-1.0, 0.0, 1.0]);
        assert!(matches!(
            standardize_columns(&[vec![3.0, 3.0, 3.0]], &names(1)),
            Err(Error::Degenerate { .. })
        ));
        let s = standardize_columns(&[vec![0.1, 7.3, -2.2, 9.9, 1e3]], &names(1)).unwrap();
        assert!(mean(&s.z.column(0)).abs() < 1e-12);
    }

    #[test]
    fn two_variable_fit() {
        let a = vec![1.0, 2.0, 3.0, 4.0, 5.0];
        let b = vec![2.0, 1.0, 4.0, 3.0, 6.0];
        let s = standardize_columns(&[a.clone(), b.clone()], &names(2)).unwrap();
        let m = fit_pca(&s).unwrap();
        let r = crate::select::pearson(&a, &b);
        assert!((m.eigenvalues[0] - (1.0 + r.abs())).abs() < 1e-12);
        assert!((m.eigenvalues[1] - (1.0 - r.abs())).abs() < 1e-12);
        let h = std::f64::consts::FRAC_1_SQRT_2;
        assert!((m.loadings[(0, 0)].abs() - h).abs() < 1e-12);
        assert!((m.loadings[(1, 0)].abs() - h).abs() < 1e-12);
    }

    #[test]
    fn uncorrelated_columns_give_unit_eigenvalues() {
        let a = vec![1.0, -1.0, 1.0, -1.0];
        let b = vec![1.0, 1.0, -1.0, -1.0];
        let m = fit_pca(&standardize_columns(&[a, b], &names(2)).unwrap()).unwrap();
        assert_eq!(m.eigenvalues, vec![1.0, 1.0]);
        let k = retain_components(&m, RetentionRule::default()).unwrap();
        assert_eq!(k.retained, 2);
    }

    const TABLE7: [f64; 26] = [
        11.19, 3.28, 2.74, 1.43, 1.10, 0.89, 0.82, 0.69, 0.63, 0.59, 0.49, 0.45, 0.35, 0.30, 0.23,
        0.20, 0.17, 0.11, 0.10, 0.07, 0.05, 0.04, 0.04, 0.02, 0.02, 0.00,
    ];

    #[test]
    fn retention_rules_on_a_26_variable_spectrum() {
        assert_eq!(retained_count(&TABLE7, RetentionRule::default()).unwrap(), 5);
        assert_eq!(
            retained_count(&TABLE7, RetentionRule::CumulativeVariance { fraction: 0.50 }).unwrap(),
            2
        );
        assert_eq!(retained_count(&TABLE7, RetentionRule::FirstOnly).unwrap(), 1);
        assert!(matches!(
            retained_count(&TABLE7, RetentionRule::Kaiser { threshold: 20.0 }),
            Err(Error::NothingRetained(_))
        ));
        // variance fraction of the leading component
        assert!((TABLE7[0] / 26.0 * 100.0 - 43.05).abs() < 0.02);
    }

    #[test]
    fn single_variable_scores_equal_standardized() {
        let s = standardize_columns(&[vec![2.0, 4.0, 9.0, 1.0]], &names(1)).unwrap();
        let m = retain_components(&fit_pca(&s).unwrap(), RetentionRule::default()).unwrap();
        let sc = score(&m, &s.z, names(4)).unwrap();
        assert_eq!(sc.scores.column(0), s.z.column(0));
    }

    #[test]
    fn score_dimension_mismatch() {
        let s = standardize_columns(&[vec![2.0, 4.0, 9.0], vec![1.0, 0.0, 2.0]], &names(2)).unwrap();
        let m = fit_pca(&s).unwrap();
        assert!(matches!(
            score(&m, &Matrix::zeros(3, 3), names(3)),
            Err(Error::Dimension(_))
        ));
    }

    fn model_with_loadings(rows: &[(&str, [f64; 5])]) -> PcaModel {
        let p = rows.len();
        let mut loadings = Matrix::zeros(p, p);
        for (i, (_, w)) in rows.iter().enumerate() {
            for (j, v) in w.iter().enumerate() {
                loadings[(i, j)] = *v;
            }
        }
        PcaModel {
            variable_order: rows.iter().map(|(n, _)| n.to_string()).collect(),
            means: vec![0.0; p],
            sds: vec![1.0; p],
            loadings,
            eigenvalues: vec![1.0; p],
            variance_fraction: vec![1.0 / p as f64; p],
            retained: 5,
            retention: None,
            sweeps: 0,
        }
    }

    #[test]
    fn substantive_threshold_bounds() {
        let m = model_with_loadings(&[
            ("A", [0.5, 0.1, 0.0, 0.0, 0.0]),
            ("B", [-0.6, 0.1, 0.0, 0.0, 0.0]),
            ("C", [0.2, 0.1, 0.0, 0.0, 0.0]),
            ("D", [0.19, 0.1, 0.0, 0.0, 0.0]),
            ("E", [0.0, 0.1, 0.0, 0.0, 0.0]),
        ]);
        let s = substantive_loadings(&m, 0.20);
        let vi1: Vec<&str> = s[0].variables.iter().map(|v| v.short_form.as_str()).collect();
        assert_eq!(vi1, vec!["B", "A", "C"]);
        assert_eq!(s[0].variables[0].sign, Sign::Negative);
        assert!(substantive_loadings(&m, 1.1).iter().all(|c| c.variables.is_empty()));
    }

    #[test]
    fn skew_bands() {
        assert_eq!(SkewBand::of(0.0), SkewBand::Low);
        assert_eq!(SkewBand::of(-0.68), SkewBand::Low);
        assert_eq!(SkewBand::of(-1.42), SkewBand::Medium);
        assert_eq!(SkewBand::of(2.0), SkewBand::Medium);
        assert_eq!(SkewBand::of(2.5), SkewBand::High);
    }

    #[test]
    fn index_skewness_flags() {
        let sym = vec![-2.0, -1.0, 0.0, 1.0, 2.0];
        let mut spike = vec![0.0; 40];
        spike[0] = 10.0;
        let scores = Matrix::from_columns(&[sym, spike[..5].to_vec()]).unwrap();
        let s = IndexScores {
            region_ids: names(5),
            scores,
        };
        let r = index_skewness_report(&s);
        assert_eq!(r[0].skewness, Some(0.0));
        assert_eq!(r[0].band, SkewBand::Low);
        assert!(r[0].acceptable);
        // one spike in five: g1 = 1.5, medium
        assert_eq!(r[1].band, SkewBand::Medium);
        let long = IndexScores {
            region_ids: names(40),
            scores: Matrix::from_columns(&[spike]).unwrap(),
        };
        let r = index_skewness_report(&long);
        assert!(r[0].skewness.unwrap() > 2.0);
        assert!(!r[0].acceptable);
        assert_eq!(r[0].band, SkewBand::High);
    }

    #[test]
    fn scores_csv_round_trip() {
        let s = IndexScores {
            region_ids: vec!["A".into(), "B".into()],
            scores: Matrix::from_rows(&[vec![0.1 + 0.2, -1e-9], vec![1.0 / 3.0, 12345.678]]).unwrap(),
        };
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("scores.csv");
        std::fs::write(&p, s.to_csv()).unwrap();
        assert_eq!(IndexScores::load(&p).unwrap(), s);
    }
}
