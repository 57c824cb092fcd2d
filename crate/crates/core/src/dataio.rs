//! Datasets: CSV ingestion, synthetic generators, and result persistence.

use std::collections::HashMap;
use std::fs::File;
use std::io::{BufRead, BufReader, Write};
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Raw points (`N × d`, row order significant) with optional ground truth.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EuclideanDataset {
    pub points: Vec<Vec<f64>>,
    pub labels: Option<Vec<usize>>,
    pub name: String,
    pub feature_names: Option<Vec<String>>,
    /// Parent of each leaf cluster, for generated hierarchies.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub hierarchy: Option<Vec<Vec<usize>>>,
}

impl EuclideanDataset {
    pub fn new(name: impl Into<String>, points: Vec<Vec<f64>>, labels: Option<Vec<usize>>) -> Result<Self> {
        let ds = EuclideanDataset {
            points,
            labels,
            name: name.into(),
            feature_names: None,
            hierarchy: None,
        };
        ds.validate()?;
        Ok(ds)
    }

    pub fn validate(&self) -> Result<()> {
        let d = self.dim();
        for (i, p) in self.points.iter().enumerate() {
            if p.len() != d {
                return Err(Error::invalid(format!("row {i} has {} features, expected {d}", p.len())));
            }
            if p.iter().any(|v| !v.is_finite()) {
                return Err(Error::invalid(format!("row {i} has a non-finite value")));
            }
        }
        if let Some(l) = &self.labels {
            if l.len() != self.points.len() {
                return Err(Error::invalid(format!("{} labels for {} rows", l.len(), self.points.len())));
            }
        }
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.points.first().map(Vec::len).unwrap_or(0)
    }

    /// Number of distinct ground-truth labels.
    pub fn k_true(&self) -> Option<usize> {
        self.labels.as_ref().map(|l| {
            let mut v = l.clone();
            v.sort_unstable();
            v.dedup();
            v.len()
        })
    }

    /// Per-feature z-scores; constant features become 0.
    pub fn standardized(&self) -> Self {
        let n = self.len() as f64;
        let d = self.dim();
        let mut out = self.clone();
        for j in 0..d {
            let mean = self.points.iter().map(|p| p[j]).sum::<f64>() / n;
            let var = self.points.iter().map(|p| (p[j] - mean).powi(2)).sum::<f64>() / n;
            let sd = var.sqrt();
            for p in out.points.iter_mut() {
                p[j] = if sd > 0.0 { (p[j] - mean) / sd } else { 0.0 };
            }
        }
        out
    }

    /// Uniform random subset of `size` rows (reservoir sampling), original order kept.
    pub fn subsample(&self, size: usize, seed: u64) -> Self {
        if size >= self.len() {
            return self.clone();
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut reservoir: Vec<usize> = (0..size).collect();
        for i in size..self.len() {
            let j = rng.random_range(0..=i);
            if j < size {
                reservoir[j] = i;
            }
        }
        reservoir.sort_unstable();
        let mut out = self.clone();
        out.points = reservoir.iter().map(|&i| self.points[i].clone()).collect();
        out.labels = self.labels.as_ref().map(|l| reservoir.iter().map(|&i| l[i]).collect());
        out.name = format!("{}-sub{size}", self.name);
        out
    }
}

fn is_missing(cell: &str) -> bool {
    matches!(cell.trim(), "" | "?" | "NA" | "NaN" | "nan" | "null")
}

/// Reads a headed, comma-separated file. Numeric columns become features; the
/// label column (`label_column`, else a column named `label`) becomes labels.
/// Integer labels are kept; other label strings are numbered by first
/// appearance. Rows with a missing feature are dropped and counted in the log.
pub fn load_csv(path: impl AsRef<Path>, label_column: Option<&str>) -> Result<EuclideanDataset> {
    let path = path.as_ref();
    let mut reader = csv::ReaderBuilder::new().has_headers(true).trim(csv::Trim::All).from_path(path)?;
    let headers: Vec<String> = reader.headers()?.iter().map(str::to_string).collect();
    let label_idx = match label_column {
        Some(name) => Some(
            headers
                .iter()
                .position(|h| h == name)
                .ok_or_else(|| Error::invalid(format!("label column `{name}` not found in {}", path.display())))?,
        ),
        None => headers.iter().position(|h| h == "label"),
    };
    let feature_idx: Vec<usize> = (0..headers.len()).filter(|i| Some(*i) != label_idx).collect();

    let mut points = Vec::new();
    let mut raw_labels = Vec::new();
    let mut dropped = 0usize;
    for (r, rec) in reader.records().enumerate() {
        let rec = rec?;
        let row = r + 2; // 1-based, after the header
        if feature_idx.iter().any(|&j| is_missing(rec.get(j).unwrap_or(""))) {
            dropped += 1;
            continue;
        }
        let mut p = Vec::with_capacity(feature_idx.len());
        for &j in &feature_idx {
            let cell = rec.get(j).unwrap_or("");
            let v: f64 = cell.parse().map_err(|_| Error::Parse {
                row,
                column: headers[j].clone(),
                message: format!("`{cell}` is not a number"),
            })?;
            if !v.is_finite() {
                return Err(Error::Parse { row, column: headers[j].clone(), message: "non-finite value".into() });
            }
            p.push(v);
        }
        points.push(p);
        if let Some(li) = label_idx {
            raw_labels.push(rec.get(li).unwrap_or("").to_string());
        }
    }
    if dropped > 0 {
        log::warn!("{}: dropped {dropped} rows with missing features", path.display());
    }

    let labels = label_idx.map(|_| encode_labels(&raw_labels));
    let name = path.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
    let mut ds = EuclideanDataset::new(name, points, labels)?;
    ds.feature_names = Some(feature_idx.iter().map(|&j| headers[j].clone()).collect());
    Ok(ds)
}

fn encode_labels(raw: &[String]) -> Vec<usize> {
    if let Ok(ints) = raw.iter().map(|s| s.parse::<usize>()).collect::<std::result::Result<Vec<_>, _>>() {
        return ints;
    }
    let mut codes: HashMap<&str, usize> = HashMap::new();
    raw.iter()
        .map(|s| {
            let next = codes.len();
            *codes.entry(s.as_str()).or_insert(next)
        })
        .collect()
}

/// Writes points (and labels, when present) as a headed CSV that [`load_csv`] reads back.
pub fn save_csv(path: impl AsRef<Path>, ds: &EuclideanDataset) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    let mut header: Vec<String> = match &ds.feature_names {
        Some(f) => f.clone(),
        None => (0..ds.dim()).map(|j| format!("x{j}")).collect(),
    };
    if ds.labels.is_some() {
        header.push("label".into());
    }
    w.write_record(&header)?;
    for (i, p) in ds.points.iter().enumerate() {
        let mut row: Vec<String> = p.iter().map(|v| format!("{v:?}")).collect();
        if let Some(l) = &ds.labels {
            row.push(l[i].to_string());
        }
        w.write_record(&row)?;
    }
    w.flush()?;
    Ok(())
}

/// Single-column CSV with header `label`.
pub fn save_labels(path: impl AsRef<Path>, labels: &[usize]) -> Result<()> {
    let mut f = std::io::BufWriter::new(File::create(path)?);
    writeln!(f, "label")?;
    for l in labels {
        writeln!(f, "{l}")?;
    }
    f.flush()?;
    Ok(())
}

pub fn load_labels(path: impl AsRef<Path>) -> Result<Vec<usize>> {
    let f = BufReader::new(File::open(path)?);
    let mut out = Vec::new();
    for (i, line) in f.lines().enumerate() {
        let line = line?;
        let cell = line.trim();
        if i == 0 && cell.parse::<usize>().is_err() {
            continue; // header
        }
        if cell.is_empty() {
            continue;
        }
        out.push(cell.parse().map_err(|_| Error::Parse {
            row: i + 1,
            column: "label".into(),
            message: format!("`{cell}` is not a non-negative integer"),
        })?);
    }
    Ok(out)
}

/// Pretty-printed JSON with a trailing newline.
pub fn save_report<T: Serialize>(path: impl AsRef<Path>, report: &T) -> Result<()> {
    let mut s = serde_json::to_string_pretty(report)?;
    s.push('\n');
    std::fs::write(path, s)?;
    Ok(())
}

/// Isotropic Gaussian blobs, `n_per_cluster` points around each center.
pub fn generate_blobs(n_per_cluster: usize, centers: &[Vec<f64>], spread: f64, seed: u64) -> Result<EuclideanDataset> {
    if centers.is_empty() || n_per_cluster == 0 {
        return Err(Error::invalid("need at least one center and one point per cluster"));
    }
    if !(spread >= 0.0) {
        return Err(Error::invalid("spread must be nonnegative"));
    }
    let d = centers[0].len();
    if d == 0 || centers.iter().any(|c| c.len() != d) {
        return Err(Error::invalid("centers must share a positive dimension"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let normal = Normal::new(0.0, spread).map_err(|e| Error::invalid(e.to_string()))?;
    let mut points = Vec::with_capacity(n_per_cluster * centers.len());
    let mut labels = Vec::with_capacity(points.capacity());
    for (l, c) in centers.iter().enumerate() {
        for _ in 0..n_per_cluster {
            points.push(c.iter().map(|x| x + normal.sample(&mut rng)).collect());
            labels.push(l);
        }
    }
    EuclideanDataset::new("blobs", points, Some(labels))
}

/// Blobs centered on the leaves of a random tree.
///
/// The root sits at the origin; a node at depth `t` places its `branching`
/// children at random directions and distance `scale_decay^t` from itself.
/// Leaves (depth `depth`) become cluster centers with `n_leaf` points each,
/// spread `0.1 · scale_decay^depth`. Sibling leaves therefore sit closer to
/// each other than to cousins. `hierarchy[l]` lists leaf `l`'s ancestors from
/// the root down.
pub fn generate_tree_blobs(
    depth: usize,
    branching: usize,
    scale_decay: f64,
    n_leaf: usize,
    seed: u64,
) -> Result<EuclideanDataset> {
    generate_tree_blobs_in(2, depth, branching, scale_decay, n_leaf, seed)
}

pub fn generate_tree_blobs_in(
    dim: usize,
    depth: usize,
    branching: usize,
    scale_decay: f64,
    n_leaf: usize,
    seed: u64,
) -> Result<EuclideanDataset> {
    if depth == 0 || branching == 0 || n_leaf == 0 || dim == 0 {
        return Err(Error::invalid("depth, branching, n_leaf and dim must be positive"));
    }
    if !(scale_decay > 0.0 && scale_decay < 1.0) {
        return Err(Error::invalid("scale_decay must be in (0,1)"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let std_normal = Normal::new(0.0, 1.0).expect("valid");
    // (position, ancestor ids)
    let mut level: Vec<(Vec<f64>, Vec<usize>)> = vec![(vec![0.0; dim], vec![0])];
    let mut next_id = 1usize;
    for t in 0..depth {
        let step = scale_decay.powi(t as i32);
        let mut children = Vec::with_capacity(level.len() * branching);
        for (pos, anc) in &level {
            let offset = rng.random_range(0.0..std::f64::consts::TAU);
            for b in 0..branching {
                let dir: Vec<f64> = if dim == 2 {
                    let a = offset + std::f64::consts::TAU * b as f64 / branching as f64;
                    vec![a.cos(), a.sin()]
                } else {
                    let v: Vec<f64> = (0..dim).map(|_| std_normal.sample(&mut rng)).collect();
                    let n = v.iter().map(|x| x * x).sum::<f64>().sqrt().max(1e-12);
                    v.into_iter().map(|x| x / n).collect()
                };
                let child: Vec<f64> = pos.iter().zip(&dir).map(|(p, d)| p + step * d).collect();
                let mut a = anc.clone();
                a.push(next_id);
                next_id += 1;
                children.push((child, a));
            }
        }
        level = children;
    }
    let spread = 0.1 * scale_decay.powi(depth as i32);
    let noise = Normal::new(0.0, spread).expect("valid");
    let mut points = Vec::with_capacity(level.len() * n_leaf);
    let mut labels = Vec::with_capacity(points.capacity());
    for (l, (c, _)) in level.iter().enumerate() {
        for _ in 0..n_leaf {
            points.push(c.iter().map(|x| x + noise.sample(&mut rng)).collect());
            labels.push(l);
        }
    }
    let mut ds = EuclideanDataset::new("tree_blobs", points, Some(labels))?;
    ds.hierarchy = Some(level.into_iter().map(|(_, a)| a).collect());
    Ok(ds)
}

/// Leaf-cluster centers of a generated dataset (mean of each label's points).
pub fn label_means(ds: &EuclideanDataset) -> Vec<Vec<f64>> {
    let labels = ds.labels.as_deref().unwrap_or(&[]);
    let k = labels.iter().max().map(|m| m + 1).unwrap_or(0);
    let mut sums = vec![vec![0.0; ds.dim()]; k];
    let mut counts = vec![0usize; k];
    for (p, &l) in ds.points.iter().zip(labels) {
        sums[l].iter_mut().zip(p).for_each(|(s, v)| *s += v);
        counts[l] += 1;
    }
    sums.into_iter()
        .zip(counts)
        .map(|(s, c)| s.into_iter().map(|v| v / c.max(1) as f64).collect())
        .collect()
}
