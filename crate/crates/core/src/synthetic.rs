//! Deterministic synthetic inputs shaped like a national small-area table:
//! 358 regions (340 on a square grid, 18 without boundaries), 5 of them
//! with zero population, and 41 candidate variables of which 15 are built
//! to fail the skewness or correlation screens.
//!
//! Regions kept after omission carry the state and remoteness mix of the
//! reference geography (335 regions) and belong to four planted groups
//! whose remoteness profile matches the reference cluster table.

use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_xoshiro::Xoshiro256PlusPlus;
use serde_json::{json, Value};

use crate::error::Result;
use crate::linalg::sample_sd;
use crate::ingest::{write_string, Dataset, RegionRecord, Remoteness, State, VariableMeta};
use crate::spatial::{build_adjacency_from_polygons, parse_boundaries, AdjacencyGraph, Boundaries};

pub const GRID_COLS: usize = 20;
pub const GRID_ROWS: usize = 17;
pub const N_SPATIAL: usize = GRID_COLS * GRID_ROWS;
pub const N_NON_SPATIAL: usize = 18;
/// Grid cells whose population is zero.
pub const ZERO_ERP_CELLS: [usize; 5] = [17, 88, 150, 233, 301];

/// Regions per state (rows) and remoteness class (columns 1..=5).
pub const STATE_REMOTENESS: [(State, [usize; 5]); 9] = [
    (State::Nsw, [52, 25, 10, 2, 1]),
    (State::Qld, [49, 17, 12, 2, 1]),
    (State::Vic, [40, 20, 6, 0, 0]),
    (State::Wa, [21, 2, 4, 4, 3]),
    (State::Sa, [18, 3, 5, 1, 0]),
    (State::Tas, [0, 7, 7, 1, 0]),
    (State::Act, [9, 1, 0, 0, 0]),
    (State::Nt, [0, 0, 4, 2, 2]),
    (State::Other, [0, 1, 0, 0, 3]),
];

/// Regions per remoteness class (rows) and planted group (columns).
pub const REMOTENESS_GROUP: [[usize; 4]; 5] = [
    [37, 0, 86, 66],
    [40, 0, 1, 35],
    [39, 1, 1, 7],
    [6, 4, 0, 2],
    [1, 4, 0, 5],
];

const GROUP_MEANS: [[f64; 5]; 4] = [
    [1.0, -0.3, 0.0, -0.5, 0.3],
    [4.0, 2.5, 1.0, 1.5, 0.0],
    [-1.8, 1.2, 0.3, 0.4, -0.4],
    [-0.5, -1.2, -0.2, 0.6, -0.8],
];
const GROUP_SPREAD: f64 = 0.5;

/// (name, factor, log-normal) for the 26 variables meant to survive.
const KEPT: [(&str, usize, bool); 26] = [
    ("DVH", 0, false),
    ("DVE", 0, false),
    ("DVS", 0, false),
    ("DVL", 0, false),
    ("DVR", 0, false),
    ("DVI", 0, false),
    ("SMO", 0, false),
    ("M15", 0, false),
    ("M20", 0, false),
    ("ERP", 1, true),
    ("PRIM", 1, true),
    ("CC", 1, true),
    ("SML", 1, false),
    ("MRT2", 1, false),
    ("CORE", 1, false),
    ("A14", 2, false),
    ("A19", 2, false),
    ("A20", 2, false),
    ("ANT", 2, false),
    ("BRTH", 2, false),
    ("HCC2", 3, false),
    ("ATT", 3, false),
    ("DVG", 3, false),
    ("IMM", 4, false),
    ("FRT", 4, false),
    ("DVC", 4, false),
];

/// Near-copies of kept variables: fail the correlation screen.
const DUPLICATES: [(&str, &str); 8] = [
    ("DVH2", "DVH"),
    ("DVL2", "DVL"),
    ("SMO2", "SMO"),
    ("M152", "M15"),
    ("SML2", "SML"),
    ("A142", "A14"),
    ("HCC3", "HCC2"),
    ("IMM2", "IMM"),
];

/// Mostly-zero spikes: fail the skewness screen even after log1p.
const SPIKES: [&str; 7] = ["SPK1", "SPK2", "SPK3", "SPK4", "SPK5", "SPK6", "SPK7"];

pub const MISSING_RATE: f64 = 0.01;

/// Seed of the fixture bundled under `fixtures/synthetic`.
pub const FIXTURE_SEED: u64 = 7;

#[derive(Debug, Clone)]
pub struct SyntheticFixture {
    pub dataset: Dataset,
    pub boundaries: Value,
    /// Planted group (0-based) of every region; `None` for omitted ones.
    pub groups: Vec<Option<usize>>,
}

fn normal(rng: &mut Xoshiro256PlusPlus) -> f64 {
    // Box-Muller
    let u1: f64 = 1.0 - rng.random::<f64>();
    let u2: f64 = rng.random::<f64>();
    (-2.0 * u1.ln()).sqrt() * (2.0 * std::f64::consts::PI * u2).cos()
}

fn standardized(x: &[f64]) -> Vec<f64> {
    let n = x.len() as f64;
    let m = x.iter().sum::<f64>() / n;
    let sd = (x.iter().map(|v| (v - m) * (v - m)).sum::<f64>() / (n - 1.0)).sqrt();
    x.iter().map(|v| (v - m) / sd).collect()
}

fn region_id(i: usize) -> String {
    format!("{}", 10101 + i)
}

/// Remoteness and state for the regions that survive omission, in
/// region order, plus the planted group for each.
fn survivor_attributes() -> Vec<(State, Remoteness, usize)> {
    let mut group_queue: Vec<Vec<usize>> = REMOTENESS_GROUP
        .iter()
        .map(|row| {
            row.iter()
                .enumerate()
                .flat_map(|(g, &c)| std::iter::repeat_n(g, c))
                .collect()
        })
        .collect();
    // interleave groups within each remoteness class
    for q in &mut group_queue {
        let len = q.len();
        let mut spread = vec![0; len];
        for (t, slot) in spread.iter_mut().enumerate() {
            *slot = q[(t * 37) % len];
        }
        // (t * 37) mod len is a permutation whenever gcd(37, len) = 1
        if gcd(37, len) == 1 {
            *q = spread;
        }
    }
    let mut out = Vec::new();
    for (state, counts) in STATE_REMOTENESS {
        for (r, &c) in counts.iter().enumerate() {
            for _ in 0..c {
                let g = group_queue[r].pop().expect("group table matches remoteness totals");
                out.push((state, Remoteness::ALL[r], g));
            }
        }
    }
    out
}

fn gcd(a: usize, b: usize) -> usize {
    if b == 0 {
        a
    } else {
        gcd(b, a % b)
    }
}

fn square(col: usize, row: usize) -> Value {
    let (x, y) = (140.0 + 0.5 * col as f64, -40.0 + 0.5 * row as f64);
    json!([[[x, y], [x + 0.5, y], [x + 0.5, y + 0.5], [x, y + 0.5], [x, y]]])
}

impl SyntheticFixture {
    pub fn generate(seed: u64) -> SyntheticFixture {
        let mut rng = Xoshiro256PlusPlus::seed_from_u64(seed);
        let n = N_SPATIAL + N_NON_SPATIAL;

        let attrs = survivor_attributes();
        let mut attr_iter = attrs.into_iter();
        let mut regions = Vec::with_capacity(n);
        let mut groups = Vec::with_capacity(n);
        for i in 0..n {
            let spatial = i < N_SPATIAL;
            let omitted = !spatial || ZERO_ERP_CELLS.contains(&i);
            let (state, remoteness, group) = if omitted {
                (State::Other, Remoteness::VeryRemote, None)
            } else {
                let (s, r, g) = attr_iter.next().expect("335 survivors");
                (s, r, Some(g))
            };
            regions.push(RegionRecord {
                region_id: region_id(i),
                name: if spatial {
                    format!("Synthetic Area {}", i + 1)
                } else {
                    format!("Migratory - Offshore - Shipping {}", i + 1 - N_SPATIAL)
                },
                state: Some(state),
                remoteness: Some(remoteness),
                is_spatial: spatial,
            });
            groups.push(group);
        }

        let factors: Vec<[f64; 5]> = groups
            .iter()
            .map(|g| {
                let mean = g.map_or([0.0; 5], |g| GROUP_MEANS[g]);
                let mut f = [0.0; 5];
                for (d, v) in f.iter_mut().enumerate() {
                    *v = mean[d] + GROUP_SPREAD * normal(&mut rng);
                }
                f
            })
            .collect();
        let factor_sd: Vec<f64> = (0..5)
            .map(|d| {
                let col: Vec<f64> = factors.iter().map(|f| f[d]).collect();
                let m = col.iter().sum::<f64>() / n as f64;
                (col.iter().map(|v| (v - m) * (v - m)).sum::<f64>() / (n as f64 - 1.0)).sqrt()
            })
            .collect();

        let mut columns: Vec<(String, Vec<f64>)> = Vec::with_capacity(41);
        for (name, factor, lognormal) in KEPT {
            let raw: Vec<f64> = factors
                .iter()
                .map(|f| f[factor] + 0.6 * factor_sd[factor] * normal(&mut rng))
                .collect();
            let z = standardized(&raw);
            let col = if lognormal {
                z.iter().map(|v| (7.0 + v).exp()).collect()
            } else {
                let scale = 1.0 + rng.random::<f64>() * 9.0;
                let shift = 20.0 + rng.random::<f64>() * 30.0;
                z.iter().map(|v| shift + scale * v).collect()
            };
            columns.push((name.to_string(), col));
        }
        for (name, source) in DUPLICATES {
            let base = columns.iter().find(|(n, _)| n == source).unwrap().1.clone();
            let sd = sample_sd(&base);
            let col = base.iter().map(|v| v + 0.05 * sd * normal(&mut rng)).collect();
            columns.push((name.to_string(), col));
        }
        for (s, name) in SPIKES.iter().enumerate() {
            let col = (0..n)
                .map(|i| {
                    if (i * 7 + s * 3) % 25 == 0 {
                        50.0 + 450.0 * rng.random::<f64>()
                    } else {
                        0.0
                    }
                })
                .collect();
            columns.push((name.to_string(), col));
        }

        // interleave so the surviving columns are not simply the first 26
        let order: Vec<usize> = (0..columns.len()).map(|t| (t * 17) % columns.len()).collect();
        let columns: Vec<(String, Vec<f64>)> = order.iter().map(|&j| columns[j].clone()).collect();

        let variables: Vec<VariableMeta> = columns
            .iter()
            .map(|(name, _)| VariableMeta::new(name.clone(), format!("Synthetic indicator {name}")))
            .collect();
        let erp_col = columns.iter().position(|(n, _)| n == "ERP").unwrap();
        let spike_cols: Vec<usize> = columns
            .iter()
            .enumerate()
            .filter(|(_, (n, _))| n.starts_with("SPK"))
            .map(|(j, _)| j)
            .collect();

        let p = columns.len();
        let mut values = Vec::with_capacity(n * p);
        for i in 0..n {
            for (j, (_, col)) in columns.iter().enumerate() {
                let v = if j == erp_col {
                    if i >= N_SPATIAL {
                        None
                    } else if ZERO_ERP_CELLS.contains(&i) {
                        Some(0.0)
                    } else {
                        Some(col[i].round())
                    }
                } else if !spike_cols.contains(&j) && rng.random::<f64>() < MISSING_RATE {
                    None
                } else {
                    Some(col[i])
                };
                values.push(v);
            }
        }

        let features: Vec<Value> = (0..N_SPATIAL)
            .map(|i| {
                json!({
                    "type": "Feature",
                    "properties": {"region_id": region_id(i)},
                    "geometry": {"type": "Polygon", "coordinates": square(i % GRID_COLS, i / GRID_COLS)}
                })
            })
            .collect();

        SyntheticFixture {
            dataset: Dataset::new(regions, variables, values).expect("fixture is well-formed"),
            boundaries: json!({"type": "FeatureCollection", "features": features}),
            groups,
        }
    }

    pub fn parsed_boundaries(&self) -> Boundaries {
        parse_boundaries(&self.boundaries).expect("fixture boundaries are valid")
    }

    /// Queen graph of the grid cells, extended with isolated entries for
    /// the regions that have no boundary.
    pub fn adjacency(&self) -> AdjacencyGraph {
        let grid = build_adjacency_from_polygons(&self.parsed_boundaries(), 0.0).expect("grid");
        let mut g = AdjacencyGraph::new(self.dataset.region_ids()).expect("unique ids");
        for (i, id) in grid.region_ids().iter().enumerate() {
            for &j in grid.neighbors(i) {
                g.add_edge_by_id(id, &grid.region_ids()[j]).expect("known ids");
            }
        }
        g
    }

    /// Writes `values.csv`, `regions.csv`, `variables.csv`, `adjacency.csv`
    /// and `boundaries.geojson` into `dir`.
    pub fn write(&self, dir: &Path) -> Result<()> {
        self.dataset.write_csv_set(
            &dir.join("values.csv"),
            &dir.join("regions.csv"),
            &dir.join("variables.csv"),
        )?;
        write_string(&dir.join("adjacency.csv"), &self.adjacency().to_csv())?;
        let mut geo = serde_json::to_string_pretty(&self.boundaries).expect("json");
        geo.push('\n');
        write_string(&dir.join("boundaries.geojson"), &geo)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn shape_and_marginals() {
        let f = SyntheticFixture::generate(7);
        assert_eq!(f.dataset.n_regions(), 358);
        assert_eq!(f.dataset.n_variables(), 41);
        let survivors = f.groups.iter().filter(|g| g.is_some()).count();
        assert_eq!(survivors, 335);
        let mut sizes = [0; 4];
        for g in f.groups.iter().flatten() {
            sizes[*g] += 1;
        }
        assert_eq!(sizes, [123, 9, 88, 115]);
    }

    #[test]
    fn deterministic() {
        let a = SyntheticFixture::generate(11);
        let b = SyntheticFixture::generate(11);
        assert_eq!(a.dataset, b.dataset);
    }
}
