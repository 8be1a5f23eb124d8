//! Cluster descriptions: centroid tables, category cross-tabs, loading-based
//! characterizations and the joinable map layer.

use std::collections::HashMap;

use serde::{Deserialize, Serialize};
use serde_json::{json, Map, Value};

use crate::cluster::ClusterModel;
use crate::error::{Error, Result};
use crate::ingest::{csv_field, RegionRecord, Remoteness, State};
use crate::linalg::Matrix;
use crate::pca::{index_names, substantive_loadings, IndexScores, PcaModel};
use crate::spatial::Boundaries;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClusterSummary {
    pub cluster: usize,
    pub size: usize,
    pub means: Vec<f64>,
    /// Sample sd (divisor size - 1); 0 for singleton clusters.
    pub sds: Vec<f64>,
    pub singleton: bool,
    /// Index names by descending `|mean|`.
    pub dominant_indices: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClusterProfile {
    pub indices: Vec<String>,
    pub clusters: Vec<ClusterSummary>,
}

fn rank_by_abs(values: &[f64]) -> Vec<usize> {
    let mut order: Vec<usize> = (0..values.len()).collect();
    order.sort_by(|&a, &b| values[b].abs().total_cmp(&values[a].abs()).then(a.cmp(&b)));
    order
}

pub fn centroid_table(c: &ClusterModel, s: &IndexScores) -> Result<ClusterProfile> {
    if c.assignments.len() != s.n() {
        return Err(Error::Dimension(format!(
            "{} assignments for {} scored regions",
            c.assignments.len(),
            s.n()
        )));
    }
    let names = s.index_names();
    let d = s.k();
    let mut members: Vec<Vec<usize>> = vec![Vec::new(); c.k];
    for (i, &l) in c.assignments.iter().enumerate() {
        members[l - 1].push(i);
    }
    let clusters = members
        .iter()
        .enumerate()
        .map(|(ci, rows)| {
            let size = rows.len();
            let mut means = vec![0.0; d];
            let mut sds = vec![0.0; d];
            for j in 0..d {
                let col: Vec<f64> = rows.iter().map(|&i| s.scores[(i, j)]).collect();
                if size > 0 {
                    means[j] = col.iter().sum::<f64>() / size as f64;
                }
                if size > 1 {
                    let m = means[j];
                    sds[j] = (col.iter().map(|v| (v - m) * (v - m)).sum::<f64>() / (size as f64 - 1.0)).sqrt();
                }
            }
            ClusterSummary {
                cluster: ci + 1,
                size,
                dominant_indices: rank_by_abs(&means).into_iter().map(|j| names[j].clone()).collect(),
                means,
                sds,
                singleton: size == 1,
            }
        })
        .collect();
    Ok(ClusterProfile {
        indices: names,
        clusters,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Axis {
    Remoteness,
    State,
}

impl Axis {
    pub fn as_str(self) -> &'static str {
        match self {
            Axis::Remoteness => "remoteness",
            Axis::State => "state",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CrossTab {
    pub axis: Axis,
    pub rows: Vec<String>,
    /// `rows x k` counts.
    pub counts: Vec<Vec<usize>>,
    pub row_totals: Vec<usize>,
    pub col_totals: Vec<usize>,
    pub total: usize,
}

impl CrossTab {
    pub fn to_csv(&self) -> String {
        let k = self.col_totals.len();
        let mut out = String::from("category");
        for c in 1..=k {
            out.push_str(&format!(",C{c}"));
        }
        out.push_str(",Total\n");
        for (label, (row, t)) in self.rows.iter().zip(self.counts.iter().zip(&self.row_totals)) {
            out.push_str(&csv_field(label));
            for v in row {
                out.push_str(&format!(",{v}"));
            }
            out.push_str(&format!(",{t}\n"));
        }
        out.push_str("Total");
        for v in &self.col_totals {
            out.push_str(&format!(",{v}"));
        }
        out.push_str(&format!(",{}\n", self.total));
        out
    }
}

/// Category-by-cluster counts with marginals. Every category of the axis
/// is listed, in code order, even when empty.
pub fn crosstab(assignments: &[usize], k: usize, regions: &[RegionRecord], axis: Axis) -> Result<CrossTab> {
    if assignments.len() != regions.len() {
        return Err(Error::Dimension(format!(
            "{} assignments for {} regions",
            assignments.len(),
            regions.len()
        )));
    }
    let rows: Vec<String> = match axis {
        Axis::Remoteness => Remoteness::ALL.iter().map(|r| r.label().to_string()).collect(),
        Axis::State => State::ALL.iter().map(|s| s.code().to_string()).collect(),
    };
    let mut counts = vec![vec![0usize; k]; rows.len()];
    for (r, &l) in regions.iter().zip(assignments) {
        let row = match axis {
            Axis::Remoteness => r.remoteness.map(|x| x.code() as usize - 1),
            Axis::State => r.state.and_then(|s| State::ALL.iter().position(|x| *x == s)),
        }
        .ok_or_else(|| {
            Error::InvalidArgument(format!("region `{}` has no {} attribute", r.region_id, axis.as_str()))
        })?;
        if l == 0 || l > k {
            return Err(Error::InvalidArgument(format!("cluster label {l} outside 1..={k}")));
        }
        counts[row][l - 1] += 1;
    }
    let row_totals: Vec<usize> = counts.iter().map(|r| r.iter().sum()).collect();
    let col_totals: Vec<usize> = (0..k).map(|c| counts.iter().map(|r| r[c]).sum()).collect();
    Ok(CrossTab {
        axis,
        rows,
        counts,
        total: row_totals.iter().sum(),
        row_totals,
        col_totals,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Effect {
    Elevated,
    Reduced,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VariableEffect {
    pub short_form: String,
    pub weight: f64,
    pub effect: Effect,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IndexCharacter {
    pub index: String,
    pub centroid: f64,
    pub variables: Vec<VariableEffect>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClusterCharacter {
    pub cluster: usize,
    /// Indices by descending `|centroid|`.
    pub indices: Vec<IndexCharacter>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Characterization {
    pub loading_threshold: f64,
    pub clusters: Vec<ClusterCharacter>,
}

/// Direction of each substantive variable per cluster:
/// `sign(centroid) * sign(loading)`. A zero centroid gives no flags.
pub fn characterize(centroids: &Matrix, m: &PcaModel, threshold: f64) -> Result<Characterization> {
    if centroids.cols() != m.retained {
        return Err(Error::Dimension(format!(
            "centroids have {} indices, model retains {}",
            centroids.cols(),
            m.retained
        )));
    }
    let loadings = substantive_loadings(m, threshold);
    let clusters = (0..centroids.rows())
        .map(|c| {
            let row = centroids.row(c);
            let indices = rank_by_abs(row)
                .into_iter()
                .map(|j| {
                    let centroid = row[j];
                    let variables = if centroid == 0.0 {
                        Vec::new()
                    } else {
                        loadings[j]
                            .variables
                            .iter()
                            .map(|v| VariableEffect {
                                short_form: v.short_form.clone(),
                                weight: v.weight,
                                effect: if (centroid > 0.0) == (v.weight > 0.0) {
                                    Effect::Elevated
                                } else {
                                    Effect::Reduced
                                },
                            })
                            .collect()
                    };
                    IndexCharacter {
                        index: loadings[j].index.clone(),
                        centroid,
                        variables,
                    }
                })
                .collect();
            ClusterCharacter { cluster: c + 1, indices }
        })
        .collect();
    Ok(Characterization {
        loading_threshold: threshold,
        clusters,
    })
}

/// FeatureCollection carrying `VI1..VIk` and `cluster` per region.
/// Features for regions without scores (omitted regions) get nulls.
pub fn atlas_geojson(boundaries: &Boundaries, scores: &IndexScores, assignments: Option<&[usize]>) -> Value {
    let row_of: HashMap<&str, usize> = scores
        .region_ids
        .iter()
        .enumerate()
        .map(|(i, id)| (id.as_str(), i))
        .collect();
    let names = index_names(scores.k());
    let features: Vec<Value> = boundaries
        .features
        .iter()
        .map(|f| {
            let row = row_of.get(f.region_id.as_str()).copied();
            let mut props = Map::new();
            props.insert("region_id".into(), Value::String(f.region_id.clone()));
            for (j, name) in names.iter().enumerate() {
                props.insert(name.clone(), row.map_or(Value::Null, |i| json!(scores.scores[(i, j)])));
            }
            let cluster = match (row, assignments) {
                (Some(i), Some(a)) => json!(a[i]),
                _ => Value::Null,
            };
            props.insert("cluster".into(), cluster);
            json!({"type": "Feature", "properties": props, "geometry": f.geometry})
        })
        .collect();
    json!({"type": "FeatureCollection", "features": features})
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cluster::Init;
    use crate::pca::PcaModel;

    fn model(assignments: Vec<usize>, centroids: Matrix) -> ClusterModel {
        ClusterModel {
            k: centroids.rows(),
            assignments,
            centroids,
            wcss: 0.0,
            iterations: 0,
            converged: true,
            wcss_trace: vec![],
            seed: 0,
            init: Init::Forgy,
            restarts: 1,
            best_restart: 0,
        }
    }

    #[test]
    fn singleton_cluster_has_zero_sd() {
        let scores = IndexScores {
            region_ids: vec!["A".into(), "B".into(), "C".into()],
            scores: Matrix::from_rows(&[vec![1.0, 2.0], vec![3.0, 4.0], vec![9.0, -9.0]]).unwrap(),
        };
        let c = model(vec![1, 1, 2], Matrix::zeros(2, 2));
        let p = centroid_table(&c, &scores).unwrap();
        assert_eq!(p.clusters[1].means, vec![9.0, -9.0]);
        assert_eq!(p.clusters[1].sds, vec![0.0, 0.0]);
        assert!(p.clusters[1].singleton);
        assert_eq!(p.clusters[0].means, vec![2.0, 3.0]);
        assert!((p.clusters[0].sds[0] - 2f64.sqrt()).abs() < 1e-15);
        assert_eq!(p.clusters[0].dominant_indices, vec!["VI2", "VI1"]);
    }

    fn region(r: Option<Remoteness>) -> RegionRecord {
        RegionRecord {
            region_id: "x".into(),
            name: String::new(),
            state: Some(State::Qld),
            remoteness: r,
            is_spatial: true,
        }
    }

    #[test]
    fn single_cell_crosstab() {
        let regions = vec![region(Some(Remoteness::Remote)); 4];
        let t = crosstab(&[1, 1, 1, 1], 1, &regions, Axis::Remoteness).unwrap();
        assert_eq!(t.counts[3], vec![4]);
        assert_eq!(t.total, 4);
        assert_eq!(t.col_totals, vec![4]);
        let t = crosstab(&[1, 1, 1, 1], 1, &regions, Axis::State).unwrap();
        assert_eq!(t.counts[2], vec![4]);
        assert!(t.to_csv().ends_with("Total,4,4\n"));
    }

    #[test]
    fn crosstab_missing_attribute() {
        let regions = vec![region(None)];
        assert!(matches!(
            crosstab(&[1], 1, &regions, Axis::Remoteness),
            Err(Error::InvalidArgument(_))
        ));
    }

    fn pca_with(rows: &[(&str, f64)]) -> PcaModel {
        let p = rows.len();
        let mut loadings = Matrix::zeros(p, p);
        for (i, (_, w)) in rows.iter().enumerate() {
            loadings[(i, 0)] = *w;
        }
        PcaModel {
            variable_order: rows.iter().map(|(n, _)| n.to_string()).collect(),
            means: vec![0.0; p],
            sds: vec![1.0; p],
            loadings,
            eigenvalues: vec![1.0; p],
            variance_fraction: vec![1.0 / p as f64; p],
            retained: 1,
            retention: None,
            sweeps: 0,
        }
    }

    #[test]
    fn effect_directions() {
        let m = pca_with(&[("SMO", 0.27), ("ERP", -0.18), ("CC", -0.3)]);
        let centroids = Matrix::from_rows(&[vec![10.07], vec![-3.39], vec![0.0]]).unwrap();
        let ch = characterize(&centroids, &m, 0.20).unwrap();
        let effects = |c: usize| -> Vec<(String, Effect)> {
            ch.clusters[c].indices[0]
                .variables
                .iter()
                .map(|v| (v.short_form.clone(), v.effect))
                .collect()
        };
        assert_eq!(
            effects(0),
            vec![("CC".into(), Effect::Reduced), ("SMO".into(), Effect::Elevated)]
        );
        assert_eq!(
            effects(1),
            vec![("CC".into(), Effect::Elevated), ("SMO".into(), Effect::Reduced)]
        );
        assert!(effects(2).is_empty());
    }
}
