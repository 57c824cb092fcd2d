//! Extrinsic (ARI, NMI) and intrinsic (silhouette, Davies-Bouldin,
//! Calinski-Harabasz) clustering scores.
//!
//! Intrinsic scores take a [`Space`]: Euclidean distances and arithmetic
//! means, or geodesic distances and Fréchet means on the Poincaré disc.

use std::collections::BTreeMap;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::clustering::Metric;
use crate::error::{Error, Result};
use crate::geometry::GeometryConfig;

/// Geometry used by the intrinsic scores.
pub type Space = Metric;

/// Maps arbitrary labels to `0..k` in order of first appearance.
fn compact(labels: &[usize]) -> (Vec<usize>, usize) {
    let mut map = BTreeMap::new();
    let out = labels
        .iter()
        .map(|l| {
            let next = map.len();
            *map.entry(*l).or_insert(next)
        })
        .collect();
    (out, map.len())
}

struct Contingency {
    table: Vec<Vec<f64>>,
    rows: Vec<f64>,
    cols: Vec<f64>,
    n: f64,
}

fn contingency(a: &[usize], b: &[usize]) -> Result<Contingency> {
    if a.len() != b.len() {
        return Err(Error::invalid(format!("label vectors differ in length: {} vs {}", a.len(), b.len())));
    }
    if a.len() < 2 {
        return Err(Error::invalid("need at least 2 labels"));
    }
    let (a, ka) = compact(a);
    let (b, kb) = compact(b);
    let mut table = vec![vec![0.0; kb]; ka];
    for (x, y) in a.iter().zip(&b) {
        table[*x][*y] += 1.0;
    }
    let rows = table.iter().map(|r| r.iter().sum()).collect();
    let cols = (0..kb).map(|j| table.iter().map(|r| r[j]).sum()).collect();
    Ok(Contingency { table, rows, cols, n: a.len() as f64 })
}

fn pairs(x: f64) -> f64 {
    x * (x - 1.0) / 2.0
}

/// Adjusted Rand index. Returns 1 when both partitions are trivial in the
/// same way (the index is 0/0 there).
pub fn ari(labels_a: &[usize], labels_b: &[usize]) -> Result<f64> {
    let c = contingency(labels_a, labels_b)?;
    let index: f64 = c.table.iter().flatten().map(|&v| pairs(v)).sum();
    let sa: f64 = c.rows.iter().map(|&v| pairs(v)).sum();
    let sb: f64 = c.cols.iter().map(|&v| pairs(v)).sum();
    let expected = sa * sb / pairs(c.n);
    let max = 0.5 * (sa + sb);
    if max == expected {
        return Ok(1.0);
    }
    Ok((index - expected) / (max - expected))
}

fn entropy(counts: &[f64], n: f64) -> f64 {
    counts
        .iter()
        .filter(|&&c| c > 0.0)
        .map(|&c| {
            let p = c / n;
            -p * p.ln()
        })
        .sum()
}

/// Normalized mutual information, arithmetic-mean normalization. Zero when
/// either side has a single cluster.
pub fn nmi(labels_a: &[usize], labels_b: &[usize]) -> Result<f64> {
    let c = contingency(labels_a, labels_b)?;
    let ha = entropy(&c.rows, c.n);
    let hb = entropy(&c.cols, c.n);
    if ha == 0.0 || hb == 0.0 {
        return Ok(0.0);
    }
    let mut mi = 0.0;
    for (i, row) in c.table.iter().enumerate() {
        for (j, &v) in row.iter().enumerate() {
            if v > 0.0 {
                mi += v / c.n * (c.n * v / (c.rows[i] * c.cols[j])).ln();
            }
        }
    }
    Ok((mi / (0.5 * (ha + hb))).clamp(0.0, 1.0))
}

struct Groups {
    labels: Vec<usize>,
    members: Vec<Vec<usize>>,
}

fn groups(points: &[Vec<f64>], labels: &[usize], space: Space) -> Result<Groups> {
    if points.len() != labels.len() {
        return Err(Error::invalid(format!("{} points but {} labels", points.len(), labels.len())));
    }
    space.check_points(points)?;
    let (labels, k) = compact(labels);
    if k < 2 {
        return Err(Error::invalid(format!("intrinsic scores need at least 2 clusters, got {k}")));
    }
    let mut members = vec![Vec::new(); k];
    for (i, l) in labels.iter().enumerate() {
        members[*l].push(i);
    }
    Ok(Groups { labels, members })
}

fn centroids(points: &[Vec<f64>], g: &Groups, space: Space, geometry: &GeometryConfig) -> Result<Vec<Vec<f64>>> {
    g.members
        .par_iter()
        .map(|m| {
            let refs: Vec<&[f64]> = m.iter().map(|&i| points[i].as_slice()).collect();
            space.centroid(&refs, geometry)
        })
        .collect()
}

/// Mean silhouette. Members of singleton clusters contribute 0.
pub fn silhouette(points: &[Vec<f64>], labels: &[usize], space: Space) -> Result<f64> {
    let g = groups(points, labels, space)?;
    let k = g.members.len();
    let total: f64 = (0..points.len())
        .into_par_iter()
        .map(|i| {
            let own = g.labels[i];
            if g.members[own].len() == 1 {
                return 0.0;
            }
            let mut sums = vec![0.0; k];
            for (j, p) in points.iter().enumerate() {
                if j != i {
                    sums[g.labels[j]] += space.distance(&points[i], p);
                }
            }
            let a = sums[own] / (g.members[own].len() - 1) as f64;
            let b = (0..k)
                .filter(|&c| c != own)
                .map(|c| sums[c] / g.members[c].len() as f64)
                .fold(f64::INFINITY, f64::min);
            let m = a.max(b);
            if m > 0.0 {
                (b - a) / m
            } else {
                0.0
            }
        })
        .collect::<Vec<_>>()
        .iter()
        .sum();
    Ok(total / points.len() as f64)
}

/// Davies-Bouldin index: mean over clusters of the worst `(sᵢ+sⱼ)/d(cᵢ,cⱼ)`.
pub fn davies_bouldin(points: &[Vec<f64>], labels: &[usize], space: Space) -> Result<f64> {
    davies_bouldin_with(points, labels, space, &GeometryConfig::default())
}

pub fn davies_bouldin_with(points: &[Vec<f64>], labels: &[usize], space: Space, geometry: &GeometryConfig) -> Result<f64> {
    let g = groups(points, labels, space)?;
    let c = centroids(points, &g, space, geometry)?;
    let k = c.len();
    let s: Vec<f64> = g
        .members
        .iter()
        .zip(&c)
        .map(|(m, ci)| m.iter().map(|&i| space.distance(&points[i], ci)).sum::<f64>() / m.len() as f64)
        .collect();
    let mut total = 0.0;
    for i in 0..k {
        let mut worst = 0.0f64;
        for j in 0..k {
            if i == j {
                continue;
            }
            let d = space.distance(&c[i], &c[j]);
            if d <= 0.0 {
                return Err(Error::Degenerate(format!("clusters {i} and {j} have coincident centroids")));
            }
            worst = worst.max((s[i] + s[j]) / d);
        }
        total += worst;
    }
    Ok(total / k as f64)
}

/// Calinski-Harabasz index. Returns `+∞` when every cluster has zero
/// within-dispersion.
pub fn calinski_harabasz(points: &[Vec<f64>], labels: &[usize], space: Space) -> Result<f64> {
    calinski_harabasz_with(points, labels, space, &GeometryConfig::default())
}

pub fn calinski_harabasz_with(points: &[Vec<f64>], labels: &[usize], space: Space, geometry: &GeometryConfig) -> Result<f64> {
    let g = groups(points, labels, space)?;
    let n = points.len();
    let k = g.members.len();
    if n <= k {
        return Err(Error::invalid(format!("need more points ({n}) than clusters ({k})")));
    }
    let c = centroids(points, &g, space, geometry)?;
    let all: Vec<&[f64]> = points.iter().map(Vec::as_slice).collect();
    let global = space.centroid(&all, geometry)?;
    let between: f64 = g
        .members
        .iter()
        .zip(&c)
        .map(|(m, ci)| m.len() as f64 * space.distance_sq(ci, &global))
        .sum();
    let within: f64 = points.iter().zip(&g.labels).map(|(p, l)| space.distance_sq(p, &c[*l])).sum();
    if within == 0.0 {
        return Ok(f64::INFINITY);
    }
    Ok((between / (k - 1) as f64) / (within / (n - k) as f64))
}

/// All scores for one labeling. Missing scores are `None` (JSON `null`).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvaluationReport {
    pub ari: Option<f64>,
    pub nmi: Option<f64>,
    pub silhouette: Option<f64>,
    pub davies_bouldin: Option<f64>,
    /// `None` with the `calinski_harabasz_infinite` flag when within-dispersion is 0.
    pub calinski_harabasz: Option<f64>,
    pub space: Space,
    pub n_clusters: usize,
    pub flags: Vec<String>,
}

/// Scores `labels` against `points` and, when given, against `truth`.
/// Intrinsic scores that cannot be computed (one cluster, coincident
/// centroids) are left missing with a flag naming the reason.
pub fn evaluate(points: &[Vec<f64>], labels: &[usize], truth: Option<&[usize]>, space: Space) -> Result<EvaluationReport> {
    if points.len() != labels.len() {
        return Err(Error::invalid(format!("{} points but {} labels", points.len(), labels.len())));
    }
    let (ari_v, nmi_v) = match truth {
        Some(t) => (Some(ari(labels, t)?), Some(nmi(labels, t)?)),
        None => (None, None),
    };
    let n_clusters = compact(labels).1;
    let mut flags = Vec::new();
    let mut intrinsic = |name: &str, r: Result<f64>| -> Result<Option<f64>> {
        match r {
            Ok(v) if v.is_finite() => Ok(Some(v)),
            Ok(_) => {
                flags.push(format!("{name}_infinite"));
                Ok(None)
            }
            Err(e @ (Error::InvalidInput(_) | Error::Degenerate(_))) => {
                flags.push(format!("{name}_unavailable: {e}"));
                Ok(None)
            }
            Err(e) => Err(e),
        }
    };
    let silhouette_v = intrinsic("silhouette", silhouette(points, labels, space))?;
    let db = intrinsic("davies_bouldin", davies_bouldin(points, labels, space))?;
    let ch = intrinsic("calinski_harabasz", calinski_harabasz(points, labels, space))?;
    Ok(EvaluationReport {
        ari: ari_v,
        nmi: nmi_v,
        silhouette: silhouette_v,
        davies_bouldin: db,
        calinski_harabasz: ch,
        space,
        n_clusters,
        flags,
    })
}
