//! Lloyd k-means with k-means++ seeding, in Euclidean space or on the
//! Poincaré disc. On the disc, distances are geodesic and centroids are
//! Fréchet means, which keeps each Lloyd step non-increasing in inertia.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{dist_disc_raw, dist_sq, frechet_mean, norm_sq, GeometryConfig, HPoint};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Metric {
    Euclidean,
    PoincareDisc,
}

impl Metric {
    #[inline]
    pub fn distance(self, a: &[f64], b: &[f64]) -> f64 {
        match self {
            Metric::Euclidean => dist_sq(a, b).sqrt(),
            Metric::PoincareDisc => dist_disc_raw(a, b),
        }
    }

    #[inline]
    pub fn distance_sq(self, a: &[f64], b: &[f64]) -> f64 {
        match self {
            Metric::Euclidean => dist_sq(a, b),
            Metric::PoincareDisc => {
                let d = dist_disc_raw(a, b);
                d * d
            }
        }
    }

    pub(crate) fn check_points(self, points: &[Vec<f64>]) -> Result<usize> {
        let dim = points.first().map(Vec::len).unwrap_or(0);
        for (i, p) in points.iter().enumerate() {
            if p.len() != dim || p.is_empty() {
                return Err(Error::invalid(format!("point {i} has dimension {} (expected {dim})", p.len())));
            }
            if p.iter().any(|c| !c.is_finite()) {
                return Err(Error::invalid(format!("point {i} has a non-finite coordinate")));
            }
            if self == Metric::PoincareDisc && norm_sq(p) >= 1.0 {
                return Err(Error::Domain(format!("point {i} is not inside the unit ball")));
            }
        }
        Ok(dim)
    }

    /// Weighted centroid: arithmetic mean, or Fréchet mean on the disc.
    pub fn centroid(self, points: &[&[f64]], geometry: &GeometryConfig) -> Result<Vec<f64>> {
        if points.is_empty() {
            return Err(Error::invalid("centroid of an empty set"));
        }
        match self {
            Metric::Euclidean => {
                let mut c = vec![0.0; points[0].len()];
                for p in points {
                    c.iter_mut().zip(p.iter()).for_each(|(a, b)| *a += b);
                }
                let n = points.len() as f64;
                c.iter_mut().for_each(|a| *a /= n);
                Ok(c)
            }
            Metric::PoincareDisc => {
                let hp = points
                    .iter()
                    .map(|p| HPoint::new(p.to_vec()))
                    .collect::<Result<Vec<_>>>()?;
                let w = vec![1.0; hp.len()];
                Ok(frechet_mean(&hp, &w, geometry)?.into_coords())
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KMeansConfig {
    pub k: usize,
    pub n_init: usize,
    pub max_iter: usize,
    pub tol: f64,
    pub seed: u64,
    pub metric: Metric,
}

impl KMeansConfig {
    pub fn new(k: usize, metric: Metric, seed: u64) -> Self {
        KMeansConfig { k, n_init: 10, max_iter: 300, tol: 1e-6, seed, metric }
    }

    pub fn validate(&self) -> Result<()> {
        if self.k == 0 || self.n_init == 0 || self.max_iter == 0 {
            return Err(Error::invalid("k, n_init and max_iter must be positive"));
        }
        if !(self.tol > 0.0) {
            return Err(Error::invalid("tol must be positive"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Clustering {
    pub labels: Vec<usize>,
    pub centroids: Vec<Vec<f64>>,
    /// Sum of squared metric distances to the assigned centroid.
    pub inertia: f64,
    pub iterations_run: usize,
    /// Inertia after each assignment step of the winning restart.
    pub inertia_trace: Vec<f64>,
}

/// SplitMix64 finalizer; derives independent child seeds from a master seed.
pub fn split_seed(master: u64, stream: u64) -> u64 {
    let mut z = master ^ stream.wrapping_add(1).wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// k-means++ seeding: first centroid uniform, then each next one drawn with
/// probability proportional to the squared distance to the nearest chosen one.
pub fn kmeans_pp_seed<R: Rng>(points: &[Vec<f64>], k: usize, metric: Metric, rng: &mut R) -> Result<Vec<Vec<f64>>> {
    let n = points.len();
    if k == 0 || n < k {
        return Err(Error::invalid(format!("cannot seed {k} centroids from {n} points")));
    }
    let mut centers = Vec::with_capacity(k);
    centers.push(points[rng.random_range(0..n)].clone());
    let mut nearest: Vec<f64> = points.iter().map(|p| metric.distance_sq(p, &centers[0])).collect();
    while centers.len() < k {
        let total: f64 = nearest.iter().sum();
        let idx = if total > 0.0 && total.is_finite() {
            let target = rng.random::<f64>() * total;
            let mut acc = 0.0;
            let mut pick = n - 1;
            for (i, d) in nearest.iter().enumerate() {
                acc += d;
                if acc > target {
                    pick = i;
                    break;
                }
            }
            // rounding can leave target just past the last positive weight
            while nearest[pick] == 0.0 && pick > 0 {
                pick -= 1;
            }
            pick
        } else {
            rng.random_range(0..n)
        };
        let c = points[idx].clone();
        for (p, d) in points.iter().zip(nearest.iter_mut()) {
            let nd = metric.distance_sq(p, &c);
            if nd < *d {
                *d = nd;
            }
        }
        centers.push(c);
    }
    Ok(centers)
}

fn assign(points: &[Vec<f64>], centroids: &[Vec<f64>], metric: Metric) -> (Vec<usize>, Vec<f64>) {
    points
        .iter()
        .map(|p| {
            let mut best = (0, f64::INFINITY);
            for (j, c) in centroids.iter().enumerate() {
                let d = metric.distance_sq(p, c);
                if d < best.1 {
                    best = (j, d);
                }
            }
            best
        })
        .unzip()
}

/// Refills empty clusters with the points farthest from their centroids.
/// Returns true if any centroid moved.
fn refill_empty(
    points: &[Vec<f64>],
    centroids: &mut [Vec<f64>],
    labels: &mut [usize],
    costs: &mut [f64],
    metric: Metric,
) -> bool {
    let k = centroids.len();
    let mut counts = vec![0usize; k];
    labels.iter().for_each(|&l| counts[l] += 1);
    let mut changed = false;
    for j in 0..k {
        if counts[j] > 0 {
            continue;
        }
        // farthest point among clusters that can spare one
        let far = (0..points.len())
            .filter(|&i| counts[labels[i]] > 1)
            .max_by(|&a, &b| costs[a].total_cmp(&costs[b]).then(b.cmp(&a)));
        let Some(i) = far else { break };
        centroids[j] = points[i].clone();
        counts[labels[i]] -= 1;
        counts[j] += 1;
        labels[i] = j;
        costs[i] = 0.0;
        changed = true;
    }
    if changed {
        let (l, c) = assign(points, centroids, metric);
        labels.copy_from_slice(&l);
        costs.copy_from_slice(&c);
    }
    changed
}

fn lloyd(points: &[Vec<f64>], cfg: &KMeansConfig, seed: u64, geometry: &GeometryConfig) -> Result<Clustering> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut centroids = kmeans_pp_seed(points, cfg.k, cfg.metric, &mut rng)?;
    let mut trace = Vec::new();
    let mut iterations = 0;
    for _ in 0..cfg.max_iter {
        iterations += 1;
        let (mut labels, mut costs) = assign(points, &centroids, cfg.metric);
        refill_empty(points, &mut centroids, &mut labels, &mut costs, cfg.metric);
        trace.push(costs.iter().sum());

        let mut members: Vec<Vec<&[f64]>> = vec![Vec::new(); cfg.k];
        for (p, &l) in points.iter().zip(&labels) {
            members[l].push(p.as_slice());
        }
        let mut movement: f64 = 0.0;
        for (j, m) in members.iter().enumerate() {
            if m.is_empty() {
                continue;
            }
            let next = cfg.metric.centroid(m, geometry)?;
            movement = movement.max(cfg.metric.distance(&centroids[j], &next));
            centroids[j] = next;
        }
        if movement < cfg.tol {
            break;
        }
    }
    let (mut labels, mut costs) = assign(points, &centroids, cfg.metric);
    refill_empty(points, &mut centroids, &mut labels, &mut costs, cfg.metric);
    let inertia = costs.iter().sum();
    trace.push(inertia);
    Ok(Clustering { labels, centroids, inertia, iterations_run: iterations, inertia_trace: trace })
}

/// Best-of-`n_init` Lloyd k-means. Restart `r` seeds its RNG with
/// `split_seed(cfg.seed, r)`; the lowest inertia wins, ties to the lower `r`.
pub fn kmeans(points: &[Vec<f64>], cfg: &KMeansConfig) -> Result<Clustering> {
    kmeans_with_geometry(points, cfg, &GeometryConfig::default())
}

pub fn kmeans_with_geometry(points: &[Vec<f64>], cfg: &KMeansConfig, geometry: &GeometryConfig) -> Result<Clustering> {
    cfg.validate()?;
    if points.len() < cfg.k {
        return Err(Error::invalid(format!("k = {} exceeds the {} points", cfg.k, points.len())));
    }
    cfg.metric.check_points(points)?;
    let runs: Vec<Result<Clustering>> = (0..cfg.n_init as u64)
        .into_par_iter()
        .map(|r| lloyd(points, cfg, split_seed(cfg.seed, r), geometry))
        .collect();
    let mut best: Option<Clustering> = None;
    for run in runs {
        let run = run?;
        if best.as_ref().is_none_or(|b| run.inertia < b.inertia) {
            best = Some(run);
        }
    }
    Ok(best.expect("n_init >= 1"))
}
