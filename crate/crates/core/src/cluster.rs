//! K-means over index scores (Lloyd iterations, best of seeded restarts),
//! elbow scans, the adjusted Rand index and seed-stability analysis.
//!
//! Randomness comes only from xoshiro256++ seeded through SplitMix64
//! (`Xoshiro256PlusPlus::seed_from_u64`). Restart `r` of a run with seed
//! `s` uses the base stream for `s` advanced by `r` jumps of 2^128 steps,
//! so restarts draw from non-overlapping streams and can run in any order.

use std::collections::HashMap;
use std::hash::Hash;

use rand::seq::index::sample;
use rand::{Rng, SeedableRng};
use rand_xoshiro::Xoshiro256PlusPlus;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ingest::csv_field;
use crate::ingest::format_f64;
use crate::linalg::Matrix;
use crate::pca::IndexScores;

pub const DEFAULT_RESTARTS: usize = 25;
pub const DEFAULT_MAX_ITER: usize = 200;
pub const DEFAULT_TOL: f64 = 1e-9;
pub const DEFAULT_SEEDS: [u64; 5] = [123, 1767, 7462, 944, 3401];
/// Pairs of seeds whose partitions agree below this ARI are flagged.
pub const ARI_CUTOFF: f64 = 0.65;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Init {
    #[default]
    Forgy,
    #[serde(rename = "kmeanspp")]
    KMeansPlusPlus,
}

impl std::str::FromStr for Init {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "forgy" => Ok(Init::Forgy),
            "kmeanspp" | "kmeans++" => Ok(Init::KMeansPlusPlus),
            _ => Err(format!("unknown init `{s}` (forgy | kmeanspp)")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KMeansConfig {
    pub k: usize,
    pub seed: u64,
    pub init: Init,
    pub restarts: usize,
    pub max_iter: usize,
    pub tol: f64,
}

impl KMeansConfig {
    pub fn new(k: usize, seed: u64) -> Self {
        KMeansConfig {
            k,
            seed,
            init: Init::Forgy,
            restarts: DEFAULT_RESTARTS,
            max_iter: DEFAULT_MAX_ITER,
            tol: DEFAULT_TOL,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClusterModel {
    pub k: usize,
    /// Labels `1..=k`, numbered by descending cluster size, ties by the
    /// first member's position.
    pub assignments: Vec<usize>,
    /// `k x d`, row `c - 1` is the centroid of cluster `c`.
    pub centroids: Matrix,
    pub wcss: f64,
    pub iterations: usize,
    pub converged: bool,
    /// wcss after every centroid update of the selected restart.
    pub wcss_trace: Vec<f64>,
    pub seed: u64,
    pub init: Init,
    pub restarts: usize,
    pub best_restart: usize,
}

impl ClusterModel {
    pub fn sizes(&self) -> Vec<usize> {
        let mut s = vec![0; self.k];
        for &l in &self.assignments {
            s[l - 1] += 1;
        }
        s
    }

    pub fn assignments_csv(&self, region_ids: &[String]) -> String {
        let mut out = String::from("region_id,cluster\n");
        for (id, c) in region_ids.iter().zip(&self.assignments) {
            out.push_str(&format!("{},{}\n", csv_field(id), c));
        }
        out
    }
}

pub(crate) fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

/// Index of the nearest centroid; the lowest index wins ties.
fn nearest(x: &[f64], centroids: &Matrix) -> (usize, f64) {
    let mut best = (0, f64::INFINITY);
    for c in 0..centroids.rows() {
        let d = sq_dist(x, centroids.row(c));
        if d < best.1 {
            best = (c, d);
        }
    }
    best
}

fn assign(points: &Matrix, centroids: &Matrix) -> Vec<usize> {
    (0..points.rows())
        .map(|i| nearest(points.row(i), centroids).0)
        .collect()
}

fn update(points: &Matrix, labels: &[usize], k: usize) -> Matrix {
    let d = points.cols();
    let mut sums = Matrix::zeros(k, d);
    let mut counts = vec![0usize; k];
    for (i, &l) in labels.iter().enumerate() {
        counts[l] += 1;
        for (j, v) in points.row(i).iter().enumerate() {
            sums[(l, j)] += v;
        }
    }
    for c in 0..k {
        for j in 0..d {
            sums[(c, j)] /= counts[c] as f64;
        }
    }
    sums
}

pub fn wcss(points: &Matrix, labels: &[usize], centroids: &Matrix) -> f64 {
    labels
        .iter()
        .enumerate()
        .map(|(i, &l)| sq_dist(points.row(i), centroids.row(l)))
        .sum()
}

/// Each empty cluster takes the point farthest from its current centroid
/// among clusters that can spare one (lowest index on ties).
fn repair_empty(points: &Matrix, labels: &mut [usize], centroids: &Matrix, k: usize) {
    let mut counts = vec![0usize; k];
    for &l in labels.iter() {
        counts[l] += 1;
    }
    let mut dist: Vec<f64> = labels
        .iter()
        .enumerate()
        .map(|(i, &l)| sq_dist(points.row(i), centroids.row(l)))
        .collect();
    for c in 0..k {
        if counts[c] > 0 {
            continue;
        }
        let mut pick: Option<usize> = None;
        for i in 0..labels.len() {
            if counts[labels[i]] > 1 && pick.is_none_or(|p| dist[i] > dist[p]) {
                pick = Some(i);
            }
        }
        let i = pick.expect("k <= n leaves a cluster with a spare point");
        counts[labels[i]] -= 1;
        labels[i] = c;
        counts[c] = 1;
        dist[i] = 0.0;
    }
}

#[derive(Debug, Clone)]
struct LloydRun {
    labels: Vec<usize>,
    centroids: Matrix,
    wcss: f64,
    iterations: usize,
    converged: bool,
    trace: Vec<f64>,
}

fn lloyd(points: &Matrix, init: Matrix, max_iter: usize, tol: f64) -> LloydRun {
    let k = init.rows();
    let mut centroids = init;
    let mut labels: Vec<usize> = vec![usize::MAX; points.rows()];
    let mut trace = Vec::new();
    let mut iterations = 0;
    let mut converged = false;
    while iterations < max_iter {
        let next = assign(points, &centroids);
        if next == labels {
            converged = true;
            break;
        }
        labels = next;
        repair_empty(points, &mut labels, &centroids, k);
        let updated = update(points, &labels, k);
        let movement = (0..k)
            .map(|c| sq_dist(centroids.row(c), updated.row(c)).sqrt())
            .fold(0.0, f64::max);
        centroids = updated;
        iterations += 1;
        trace.push(wcss(points, &labels, &centroids));
        if movement < tol && assign(points, &centroids) == labels {
            converged = true;
            break;
        }
    }
    LloydRun {
        wcss: wcss(points, &labels, &centroids),
        labels,
        centroids,
        iterations,
        converged,
        trace,
    }
}

fn rows_of(points: &Matrix, idx: &[usize]) -> Matrix {
    let d = points.cols();
    let mut m = Matrix::zeros(idx.len(), d);
    for (r, &i) in idx.iter().enumerate() {
        for j in 0..d {
            m[(r, j)] = points[(i, j)];
        }
    }
    m
}

fn init_forgy(points: &Matrix, k: usize, rng: &mut Xoshiro256PlusPlus) -> Matrix {
    let idx = sample(rng, points.rows(), k).into_vec();
    rows_of(points, &idx)
}

fn init_plus_plus(points: &Matrix, k: usize, rng: &mut Xoshiro256PlusPlus) -> Matrix {
    let n = points.rows();
    let mut chosen = vec![rng.random_range(0..n)];
    let mut d2: Vec<f64> = (0..n)
        .map(|i| sq_dist(points.row(i), points.row(chosen[0])))
        .collect();
    while chosen.len() < k {
        let total: f64 = d2.iter().sum();
        let next = if total > 0.0 {
            let target = rng.random::<f64>() * total;
            let mut acc = 0.0;
            let mut pick = None;
            for (i, w) in d2.iter().enumerate() {
                acc += w;
                if *w > 0.0 && acc > target {
                    pick = Some(i);
                    break;
                }
            }
            // rounding can leave target at the very end of the range
            pick.unwrap_or_else(|| d2.iter().rposition(|w| *w > 0.0).unwrap())
        } else {
            // every point coincides with a center: take an unused index
            let free: Vec<usize> = (0..n).filter(|i| !chosen.contains(i)).collect();
            free[rng.random_range(0..free.len())]
        };
        chosen.push(next);
        for (i, d) in d2.iter_mut().enumerate() {
            *d = d.min(sq_dist(points.row(i), points.row(next)));
        }
    }
    rows_of(points, &chosen)
}

/// Independent generator for each restart of a run seeded with `seed`.
pub fn restart_streams(seed: u64, restarts: usize) -> Vec<Xoshiro256PlusPlus> {
    let mut base = Xoshiro256PlusPlus::seed_from_u64(seed);
    let mut out = Vec::with_capacity(restarts);
    for _ in 0..restarts {
        out.push(base.clone());
        base.jump();
    }
    out
}

fn validate_points(points: &Matrix, k: usize) -> Result<()> {
    let n = points.rows();
    if k == 0 || k > n {
        return Err(Error::InvalidK { k, n });
    }
    if points.as_slice().iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("cluster input scores".into()));
    }
    Ok(())
}

/// Best-of-restarts Lloyd k-means on the rows of `points`.
///
/// Restarts are evaluated in parallel; the winner is the lowest wcss with
/// the restart index breaking ties, so the result does not depend on the
/// thread count.
pub fn kmeans_points(points: &Matrix, cfg: &KMeansConfig) -> Result<ClusterModel> {
    validate_points(points, cfg.k)?;
    if cfg.restarts == 0 {
        return Err(Error::InvalidArgument("restarts must be at least 1".into()));
    }
    let runs: Vec<LloydRun> = restart_streams(cfg.seed, cfg.restarts)
        .into_par_iter()
        .map(|mut rng| {
            let init = match cfg.init {
                Init::Forgy => init_forgy(points, cfg.k, &mut rng),
                Init::KMeansPlusPlus => init_plus_plus(points, cfg.k, &mut rng),
            };
            lloyd(points, init, cfg.max_iter, cfg.tol)
        })
        .collect();
    let (best_restart, best) = runs
        .into_iter()
        .enumerate()
        .min_by(|(ia, a), (ib, b)| a.wcss.total_cmp(&b.wcss).then(ia.cmp(ib)))
        .expect("at least one restart");

    // canonical numbering: size descending, then first member
    let k = cfg.k;
    let mut sizes = vec![0usize; k];
    let mut first = vec![usize::MAX; k];
    for (i, &l) in best.labels.iter().enumerate() {
        sizes[l] += 1;
        first[l] = first[l].min(i);
    }
    let mut order: Vec<usize> = (0..k).collect();
    order.sort_by(|&a, &b| sizes[b].cmp(&sizes[a]).then(first[a].cmp(&first[b])));
    let mut relabel = vec![0; k];
    for (new, &old) in order.iter().enumerate() {
        relabel[old] = new;
    }
    let assignments = best.labels.iter().map(|&l| relabel[l] + 1).collect();
    let centroids = rows_of(&best.centroids, &order);

    Ok(ClusterModel {
        k,
        assignments,
        centroids,
        wcss: best.wcss,
        iterations: best.iterations,
        converged: best.converged,
        wcss_trace: best.trace,
        seed: cfg.seed,
        init: cfg.init,
        restarts: cfg.restarts,
        best_restart,
    })
}

pub fn kmeans(s: &IndexScores, cfg: &KMeansConfig) -> Result<ClusterModel> {
    kmeans_points(&s.scores, cfg)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ElbowScan {
    pub k_values: Vec<usize>,
    pub wcss_per_k: Vec<f64>,
    /// Interior k with the largest second difference of the curve; advisory.
    pub suggested_k: Option<usize>,
}

impl ElbowScan {
    pub fn to_csv(&self) -> String {
        let mut out = String::from("k,wcss\n");
        for (k, w) in self.k_values.iter().zip(&self.wcss_per_k) {
            out.push_str(&format!("{k},{}\n", format_f64(*w)));
        }
        out
    }
}

/// Index of the interior point with the largest second difference
/// `w[k-1] - 2 w[k] + w[k+1]`, smallest k on ties.
pub fn elbow_of(k_values: &[usize], wcss: &[f64]) -> Option<usize> {
    let mut best: Option<(usize, f64)> = None;
    for i in 1..wcss.len().saturating_sub(1) {
        let second = wcss[i - 1] - 2.0 * wcss[i] + wcss[i + 1];
        if best.is_none_or(|(_, b)| second > b) {
            best = Some((k_values[i], second));
        }
    }
    best.map(|(k, _)| k)
}

pub fn elbow_scan_points(points: &Matrix, k_max: usize, base: &KMeansConfig) -> Result<ElbowScan> {
    if k_max < 2 {
        return Err(Error::InvalidArgument(format!("k_max must be at least 2, got {k_max}")));
    }
    validate_points(points, k_max)?;
    let k_values: Vec<usize> = (1..=k_max).collect();
    let wcss_per_k = k_values
        .iter()
        .map(|&k| kmeans_points(points, &KMeansConfig { k, ..*base }).map(|m| m.wcss))
        .collect::<Result<Vec<f64>>>()?;
    Ok(ElbowScan {
        suggested_k: elbow_of(&k_values, &wcss_per_k),
        k_values,
        wcss_per_k,
    })
}

pub fn elbow_scan(s: &IndexScores, k_max: usize, base: &KMeansConfig) -> Result<ElbowScan> {
    elbow_scan_points(&s.scores, k_max, base)
}

fn pairs2(x: u64) -> i128 {
    (x as i128) * (x as i128 - 1) / 2
}

/// Hubert-Arabie adjusted Rand index between two labelings.
///
/// Evaluated in exact integer arithmetic up to one final division. When
/// the expected and maximum index coincide (both labelings all singletons
/// or both a single cluster) the partitions are equal and 1 is returned.
pub fn adjusted_rand_index<A, B>(a: &[A], b: &[B]) -> Result<f64>
where
    A: Eq + Hash,
    B: Eq + Hash,
{
    if a.len() != b.len() {
        return Err(Error::Dimension(format!(
            "labelings have lengths {} and {}",
            a.len(),
            b.len()
        )));
    }
    if a.len() < 2 {
        return Err(Error::TooShort {
            context: "adjusted_rand_index".into(),
            needed: 2,
            got: a.len(),
        });
    }
    let mut ids_a: HashMap<&A, usize> = HashMap::new();
    let mut ids_b: HashMap<&B, usize> = HashMap::new();
    let mut cells: HashMap<(usize, usize), u64> = HashMap::new();
    for (x, y) in a.iter().zip(b) {
        let na = ids_a.len();
        let ia = *ids_a.entry(x).or_insert(na);
        let nb = ids_b.len();
        let ib = *ids_b.entry(y).or_insert(nb);
        *cells.entry((ia, ib)).or_insert(0) += 1;
    }
    let mut rows = vec![0u64; ids_a.len()];
    let mut cols = vec![0u64; ids_b.len()];
    for (&(i, j), &c) in &cells {
        rows[i] += c;
        cols[j] += c;
    }
    let index: i128 = cells.values().map(|&c| pairs2(c)).sum();
    let sa: i128 = rows.iter().map(|&c| pairs2(c)).sum();
    let sb: i128 = cols.iter().map(|&c| pairs2(c)).sum();
    let total = pairs2(a.len() as u64);
    // (index - sa*sb/total) / ((sa+sb)/2 - sa*sb/total), scaled by 2*total
    let num = 2 * (index * total - sa * sb);
    let den = (sa + sb) * total - 2 * sa * sb;
    if den == 0 {
        return Ok(1.0);
    }
    Ok(num as f64 / den as f64)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SeedRun {
    pub seed: u64,
    pub wcss: f64,
    pub sizes: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FlaggedPair {
    pub seed_a: u64,
    pub seed_b: u64,
    pub ari: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StabilityReport {
    pub k: usize,
    pub init: Init,
    pub restarts: usize,
    pub seeds: Vec<u64>,
    pub runs: Vec<SeedRun>,
    /// Symmetric seed-by-seed ARI matrix.
    pub ari: Vec<Vec<f64>>,
    pub cutoff: f64,
    pub flagged_pairs: Vec<FlaggedPair>,
}

/// One k-means per seed, then pairwise ARI of the resulting partitions.
pub fn stability_analysis_points(points: &Matrix, seeds: &[u64], base: &KMeansConfig) -> Result<StabilityReport> {
    if seeds.len() < 2 {
        return Err(Error::InvalidArgument(format!(
            "stability analysis needs at least 2 seeds, got {}",
            seeds.len()
        )));
    }
    let models = seeds
        .iter()
        .map(|&seed| kmeans_points(points, &KMeansConfig { seed, ..*base }))
        .collect::<Result<Vec<ClusterModel>>>()?;
    let m = seeds.len();
    let mut ari = vec![vec![1.0; m]; m];
    let mut flagged_pairs = Vec::new();
    for i in 0..m {
        for j in (i + 1)..m {
            let v = adjusted_rand_index(&models[i].assignments, &models[j].assignments)?;
            ari[i][j] = v;
            ari[j][i] = v;
            if v < ARI_CUTOFF {
                flagged_pairs.push(FlaggedPair {
                    seed_a: seeds[i],
                    seed_b: seeds[j],
                    ari: v,
                });
            }
        }
    }
    Ok(StabilityReport {
        k: base.k,
        init: base.init,
        restarts: base.restarts,
        seeds: seeds.to_vec(),
        runs: models
            .iter()
            .map(|c| SeedRun {
                seed: c.seed,
                wcss: c.wcss,
                sizes: c.sizes(),
            })
            .collect(),
        ari,
        cutoff: ARI_CUTOFF,
        flagged_pairs,
    })
}

pub fn stability_analysis(s: &IndexScores, seeds: &[u64], base: &KMeansConfig) -> Result<StabilityReport> {
    stability_analysis_points(&s.scores, seeds, base)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn pts(rows: &[[f64; 2]]) -> Matrix {
        Matrix::from_rows(&rows.iter().map(|r| r.to_vec()).collect::<Vec<_>>()).unwrap()
    }

    #[test]
    fn k_one_is_column_mean() {
        let p = pts(&[[0.0, 0.0], [2.0, 0.0], [4.0, 3.0]]);
        let m = kmeans_points(&p, &KMeansConfig::new(1, 7)).unwrap();
        assert_eq!(m.centroids.row(0), &[2.0, 1.0]);
        assert!((m.wcss - (4.0 + 0.0 + 4.0 + 1.0 + 1.0 + 4.0)).abs() < 1e-12);
        assert_eq!(m.assignments, vec![1, 1, 1]);
    }

    #[test]
    fn two_pairs() {
        let p = pts(&[[0.0, 0.0], [0.0, 1.0], [10.0, 10.0], [10.0, 11.0]]);
        let m = kmeans_points(&p, &KMeansConfig::new(2, 123)).unwrap();
        assert_eq!(m.assignments[0], m.assignments[1]);
        assert_eq!(m.assignments[2], m.assignments[3]);
        assert_ne!(m.assignments[0], m.assignments[2]);
        assert!((m.wcss - 1.0).abs() < 1e-12);
        // equal sizes: the cluster holding point 0 is numbered first
        assert_eq!(m.assignments, vec![1, 1, 2, 2]);
    }

    #[test]
    fn k_equals_n() {
        let p = pts(&[[0.0, 0.0], [1.0, 5.0], [3.0, 3.0], [9.0, 1.0]]);
        for init in [Init::Forgy, Init::KMeansPlusPlus] {
            let m = kmeans_points(&p, &KMeansConfig { init, ..KMeansConfig::new(4, 1) }).unwrap();
            assert_eq!(m.wcss, 0.0);
            assert_eq!(m.sizes(), vec![1, 1, 1, 1]);
        }
    }

    #[test]
    fn duplicate_points_k_equals_n() {
        let p = pts(&[[1.0, 1.0], [1.0, 1.0], [1.0, 1.0]]);
        for init in [Init::Forgy, Init::KMeansPlusPlus] {
            let m = kmeans_points(&p, &KMeansConfig { init, ..KMeansConfig::new(3, 5) }).unwrap();
            assert_eq!(m.sizes(), vec![1, 1, 1]);
            assert_eq!(m.wcss, 0.0);
        }
    }

    #[test]
    fn invalid_k_and_non_finite() {
        let p = pts(&[[0.0, 0.0], [1.0, 1.0]]);
        assert!(matches!(kmeans_points(&p, &KMeansConfig::new(3, 1)), Err(Error::InvalidK { .. })));
        assert!(matches!(kmeans_points(&p, &KMeansConfig::new(0, 1)), Err(Error::InvalidK { .. })));
        let bad = pts(&[[0.0, f64::NAN], [1.0, 1.0]]);
        assert!(matches!(kmeans_points(&bad, &KMeansConfig::new(1, 1)), Err(Error::NonFinite(_))));
    }

    #[test]
    fn deterministic_for_fixed_seed() {
        let p = pts(&[[0.0, 0.3], [1.0, 2.0], [2.0, 0.1], [5.0, 5.0], [4.0, 6.1], [9.0, 0.0], [8.5, 1.0]]);
        let cfg = KMeansConfig { init: Init::KMeansPlusPlus, ..KMeansConfig::new(3, 99) };
        assert_eq!(kmeans_points(&p, &cfg).unwrap(), kmeans_points(&p, &cfg).unwrap());
    }

    #[test]
    fn repair_moves_farthest_point() {
        let p = pts(&[[0.0, 0.0], [1.0, 0.0], [10.0, 0.0]]);
        let centroids = pts(&[[0.0, 0.0], [100.0, 100.0]]);
        let mut labels = vec![0, 0, 0];
        repair_empty(&p, &mut labels, &centroids, 2);
        assert_eq!(labels, vec![0, 0, 1]);
    }

    #[test]
    fn ari_examples() {
        assert_eq!(adjusted_rand_index(&[1, 1, 2, 2], &[1, 1, 2, 2]).unwrap(), 1.0);
        assert_eq!(adjusted_rand_index(&[1, 1, 2, 2], &[7, 7, 3, 3]).unwrap(), 1.0);
        let v = adjusted_rand_index(&[1, 1, 2, 2], &[1, 2, 1, 2]).unwrap();
        assert!((v + 0.5).abs() < 1e-12);
        assert_eq!(adjusted_rand_index(&[1, 2, 3], &[4, 5, 6]).unwrap(), 1.0);
        assert_eq!(adjusted_rand_index(&[1, 1, 1], &[2, 2, 2]).unwrap(), 1.0);
        assert_eq!(adjusted_rand_index(&[1, 1, 1], &[1, 2, 3]).unwrap(), 0.0);
        assert!(matches!(adjusted_rand_index(&[1, 2], &[1]), Err(Error::Dimension(_))));
        assert!(matches!(adjusted_rand_index(&[1], &[1]), Err(Error::TooShort { .. })));
    }

    #[test]
    fn elbow_second_difference() {
        assert_eq!(elbow_of(&[1, 2, 3, 4], &[100.0, 40.0, 30.0, 25.0]), Some(2));
        assert_eq!(elbow_of(&[1, 2], &[10.0, 1.0]), None);
        let p = pts(&[[0.0, 0.0], [0.0, 1.0], [9.0, 9.0]]);
        let scan = elbow_scan_points(&p, 2, &KMeansConfig::new(1, 3)).unwrap();
        assert_eq!(scan.k_values, vec![1, 2]);
        assert_eq!(scan.suggested_k, None);
        assert!(matches!(
            elbow_scan_points(&p, 1, &KMeansConfig::new(1, 3)),
            Err(Error::InvalidArgument(_))
        ));
    }

    #[test]
    fn elbow_finds_four_simplex_blobs() {
        // four tight blobs on the vertices of a regular simplex
        let mut rows = Vec::new();
        for c in 0..4 {
            for t in 0..10 {
                let mut r = vec![0.0; 4];
                r[c] = 10.0;
                r[(c + 1) % 4] += 0.05 * (t as f64 - 4.5);
                rows.push(r);
            }
        }
        let x = Matrix::from_rows(&rows).unwrap();
        let scan = elbow_scan_points(&x, 8, &KMeansConfig::new(1, 123)).unwrap();
        assert_eq!(scan.suggested_k, Some(4));
        assert!(scan.wcss_per_k.windows(2).all(|w| w[1] <= w[0]));
    }

    #[test]
    fn stability_needs_two_seeds() {
        let p = pts(&[[0.0, 0.0], [0.0, 1.0], [9.0, 9.0]]);
        assert!(matches!(
            stability_analysis_points(&p, &[1], &KMeansConfig::new(2, 0)),
            Err(Error::InvalidArgument(_))
        ));
        let r = stability_analysis_points(&p, &[1, 2], &KMeansConfig::new(2, 0)).unwrap();
        assert_eq!(r.ari, vec![vec![1.0, 1.0], vec![1.0, 1.0]]);
        assert!(r.flagged_pairs.is_empty());
    }

    #[test]
    fn restart_streams_are_distinct() {
        let mut s = restart_streams(123, 3);
        let a: u64 = s[0].random();
        let b: u64 = s[1].random();
        let c: u64 = s[2].random();
        assert!(a != b && b != c && a != c);
        let mut again = restart_streams(123, 3);
        assert_eq!(again[1].random::<u64>(), b);
    }
}
