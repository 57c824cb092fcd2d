//! Kernels and the similarity matrices built from them: the affinity `W`,
//! the row-re-kernelized `W'`, and the landmark matrices `V` and `F = ZᵀZ`.

use std::fmt;
use std::str::FromStr;

use nalgebra::DMatrix;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{dist_disc_raw, dist_sq, norm_sq, HPoint};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum KernelKind {
    GaussianHyperbolic,
    PoissonHyperbolic,
    GaussianEuclidean,
    PoissonEuclidean,
}

impl KernelKind {
    pub fn is_hyperbolic(self) -> bool {
        matches!(self, KernelKind::GaussianHyperbolic | KernelKind::PoissonHyperbolic)
    }

    pub fn is_gaussian(self) -> bool {
        matches!(self, KernelKind::GaussianHyperbolic | KernelKind::GaussianEuclidean)
    }

    /// Same profile (Gaussian or Poisson) in the other geometry.
    pub fn with_geometry(self, hyperbolic: bool) -> Self {
        match (self.is_gaussian(), hyperbolic) {
            (true, true) => KernelKind::GaussianHyperbolic,
            (true, false) => KernelKind::GaussianEuclidean,
            (false, true) => KernelKind::PoissonHyperbolic,
            (false, false) => KernelKind::PoissonEuclidean,
        }
    }

    /// Short profile name: `gaussian` or `poisson`.
    pub fn profile(self) -> &'static str {
        if self.is_gaussian() {
            "gaussian"
        } else {
            "poisson"
        }
    }
}

impl fmt::Display for KernelKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            KernelKind::GaussianHyperbolic => "gaussian_hyperbolic",
            KernelKind::PoissonHyperbolic => "poisson_hyperbolic",
            KernelKind::GaussianEuclidean => "gaussian_euclidean",
            KernelKind::PoissonEuclidean => "poisson_euclidean",
        };
        f.write_str(s)
    }
}

impl FromStr for KernelKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "gaussian_hyperbolic" => Ok(KernelKind::GaussianHyperbolic),
            "poisson_hyperbolic" => Ok(KernelKind::PoissonHyperbolic),
            "gaussian_euclidean" => Ok(KernelKind::GaussianEuclidean),
            "poisson_euclidean" => Ok(KernelKind::PoissonEuclidean),
            other => Err(Error::invalid(format!("unknown kernel kind `{other}`"))),
        }
    }
}

/// A kernel profile, its bandwidth `sigma`, and the geodesic cutoff `epsilon`
/// beyond which similarities are zero.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KernelSpec {
    pub kind: KernelKind,
    pub sigma: f64,
    /// `f64::INFINITY` disables the cutoff.
    #[serde(with = "crate::serde_inf")]
    pub epsilon: f64,
}

impl KernelSpec {
    pub fn new(kind: KernelKind, sigma: f64, epsilon: f64) -> Result<Self> {
        let spec = KernelSpec { kind, sigma, epsilon };
        spec.validate()?;
        Ok(spec)
    }

    /// No cutoff.
    pub fn dense(kind: KernelKind, sigma: f64) -> Result<Self> {
        Self::new(kind, sigma, f64::INFINITY)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.sigma > 0.0) || !self.sigma.is_finite() {
            return Err(Error::invalid(format!("sigma must be positive, got {}", self.sigma)));
        }
        if !(self.epsilon > 0.0) {
            return Err(Error::invalid(format!(
                "epsilon must be positive, got {}",
                self.epsilon
            )));
        }
        Ok(())
    }

    /// Exponent scale: `1/σ²` (Gaussian) or `1/(2σ)` (Poisson).
    pub fn a(&self) -> f64 {
        if self.kind.is_gaussian() {
            1.0 / (self.sigma * self.sigma)
        } else {
            1.0 / (2.0 * self.sigma)
        }
    }

    /// Builds the kernel whose exponent scale equals `a`.
    pub fn from_a(kind: KernelKind, a: f64, epsilon: f64) -> Result<Self> {
        if !(a > 0.0) {
            return Err(Error::invalid(format!("kernel scale must be positive, got {a}")));
        }
        let sigma = if kind.is_gaussian() {
            1.0 / a.sqrt()
        } else {
            1.0 / (2.0 * a)
        };
        Self::new(kind, sigma, epsilon)
    }

    /// Kernel profile applied to a distance, cutoff included.
    #[inline]
    pub fn profile(&self, d: f64) -> f64 {
        if d > self.epsilon {
            return 0.0;
        }
        if self.kind.is_gaussian() {
            (-d * d * self.a()).exp()
        } else {
            (-d * self.a()).exp()
        }
    }

    /// The distance this kernel uses, on raw coordinates already validated for the kind.
    #[inline]
    pub(crate) fn distance_raw(&self, x: &[f64], y: &[f64]) -> f64 {
        if self.kind.is_hyperbolic() {
            dist_disc_raw(x, y)
        } else {
            dist_sq(x, y).sqrt()
        }
    }
}

impl AsRef<[f64]> for HPoint {
    fn as_ref(&self) -> &[f64] {
        self.coords()
    }
}

fn check_points<P: AsRef<[f64]>>(spec: &KernelSpec, points: &[P]) -> Result<usize> {
    let dim = points.first().map(|p| p.as_ref().len()).unwrap_or(0);
    for (i, p) in points.iter().enumerate() {
        let p = p.as_ref();
        if p.len() != dim {
            return Err(Error::invalid(format!("point {i} has dimension {} (expected {dim})", p.len())));
        }
        if p.iter().any(|c| !c.is_finite()) {
            return Err(Error::invalid(format!("point {i} has a non-finite coordinate")));
        }
        if spec.kind.is_hyperbolic() && norm_sq(p) >= 1.0 {
            return Err(Error::Domain(format!(
                "point {i} is not inside the unit ball (norm {})",
                norm_sq(p).sqrt()
            )));
        }
    }
    Ok(dim)
}

/// Kernel similarity between two points in the kernel's native space.
pub fn kernel_value(spec: &KernelSpec, x: &[f64], y: &[f64]) -> Result<f64> {
    if x.len() != y.len() {
        return Err(Error::invalid("dimension mismatch"));
    }
    check_points(spec, &[x, y])?;
    Ok(spec.profile(spec.distance_raw(x, y)))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum AffinityRole {
    /// Kernel affinity between data points.
    W,
    /// Re-kernelized rows of `W`.
    Wprime,
    /// Landmark product `ZᵀZ`.
    F,
}

/// Symmetric nonnegative similarity matrix tagged with its role.
#[derive(Debug, Clone, PartialEq)]
pub struct AffinityMatrix {
    entries: DMatrix<f64>,
    role: AffinityRole,
}

impl AffinityMatrix {
    /// Wraps a matrix after checking shape, symmetry (1e-12) and nonnegativity.
    pub fn new(entries: DMatrix<f64>, role: AffinityRole) -> Result<Self> {
        if entries.nrows() != entries.ncols() {
            return Err(Error::invalid("affinity matrix must be square"));
        }
        let n = entries.nrows();
        for i in 0..n {
            for j in 0..n {
                let v = entries[(i, j)];
                if !v.is_finite() || v < 0.0 {
                    return Err(Error::invalid(format!("entry ({i},{j}) = {v} is not a nonnegative number")));
                }
                if j > i && (v - entries[(j, i)]).abs() > 1e-12 * v.abs().max(1.0) {
                    return Err(Error::invalid(format!("affinity not symmetric at ({i},{j})")));
                }
            }
        }
        Ok(AffinityMatrix { entries, role })
    }

    pub fn entries(&self) -> &DMatrix<f64> {
        &self.entries
    }

    pub fn into_entries(self) -> DMatrix<f64> {
        self.entries
    }

    pub fn role(&self) -> AffinityRole {
        self.role
    }

    pub fn n(&self) -> usize {
        self.entries.nrows()
    }
}

/// Fills the upper triangle with `f(i, j)` (rows in parallel when asked) and mirrors it.
fn symmetric_fill<F>(n: usize, diag: f64, parallel: bool, f: F) -> DMatrix<f64>
where
    F: Fn(usize, usize) -> f64 + Sync,
{
    let row = |i: usize| -> Vec<f64> { ((i + 1)..n).map(|j| f(i, j)).collect() };
    let upper: Vec<Vec<f64>> = if parallel {
        (0..n).into_par_iter().map(row).collect()
    } else {
        (0..n).map(row).collect()
    };
    let mut m = DMatrix::from_element(n, n, 0.0);
    for (i, r) in upper.iter().enumerate() {
        m[(i, i)] = diag;
        for (off, v) in r.iter().enumerate() {
            let j = i + 1 + off;
            m[(i, j)] = *v;
            m[(j, i)] = *v;
        }
    }
    m
}

pub(crate) fn build_affinity_impl<P: AsRef<[f64]> + Sync>(
    points: &[P],
    spec: &KernelSpec,
    parallel: bool,
) -> Result<AffinityMatrix> {
    spec.validate()?;
    if points.len() < 2 {
        return Err(Error::invalid(format!("affinity needs at least 2 points, got {}", points.len())));
    }
    check_points(spec, points)?;
    let m = symmetric_fill(points.len(), 1.0, parallel, |i, j| {
        spec.profile(spec.distance_raw(points[i].as_ref(), points[j].as_ref()))
    });
    Ok(AffinityMatrix { entries: m, role: AffinityRole::W })
}

/// Kernel affinity `W(i,j) = K(xᵢ, xⱼ)` over all pairs; diagonal 1.
pub fn build_affinity<P: AsRef<[f64]> + Sync>(points: &[P], spec: &KernelSpec) -> Result<AffinityMatrix> {
    build_affinity_impl(points, spec, true)
}

/// `W'(i,j) = exp(-|wᵢ - wⱼ|² / sigma2²)` where `wᵢ` is row `i` of `W`.
pub fn build_modified_affinity(w: &AffinityMatrix, sigma2: f64) -> Result<AffinityMatrix> {
    if !(sigma2 > 0.0) || !sigma2.is_finite() {
        return Err(Error::invalid(format!("sigma2 must be positive, got {sigma2}")));
    }
    let n = w.n();
    let entries = w.entries();
    let gram = entries * entries.transpose();
    let inv = 1.0 / (sigma2 * sigma2);
    let m = symmetric_fill(n, 1.0, true, |i, j| {
        let sq = (gram[(i, i)] + gram[(j, j)] - 2.0 * gram[(i, j)]).max(0.0);
        (-sq * inv).exp()
    });
    Ok(AffinityMatrix { entries: m, role: AffinityRole::Wprime })
}

/// `V(i,j) = K(landmarkᵢ, pointⱼ)`, an `m × N` matrix.
pub fn build_landmark_affinity<L, P>(landmarks: &[L], points: &[P], spec: &KernelSpec) -> Result<DMatrix<f64>>
where
    L: AsRef<[f64]> + Sync,
    P: AsRef<[f64]> + Sync,
{
    spec.validate()?;
    if landmarks.is_empty() {
        return Err(Error::invalid("no landmarks"));
    }
    if points.len() < 2 {
        return Err(Error::invalid("landmark affinity needs at least 2 points"));
    }
    let d = check_points(spec, points)?;
    let dl = check_points(spec, landmarks)?;
    if d != dl {
        return Err(Error::invalid(format!("landmarks have dimension {dl}, points {d}")));
    }
    let rows: Vec<Vec<f64>> = landmarks
        .par_iter()
        .map(|l| {
            points
                .iter()
                .map(|p| spec.profile(spec.distance_raw(l.as_ref(), p.as_ref())))
                .collect()
        })
        .collect();
    Ok(DMatrix::from_fn(landmarks.len(), points.len(), |i, j| rows[i][j]))
}

/// Landmark scaling: column-normalize `V` into `E`, then scale row `i` by
/// `(Σⱼ E(i,j))^{-1/2}` to get `Z`.
///
/// Landmarks whose row of `E` sums to zero carry no mass; their rows stay zero.
pub fn landmark_z(v: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let (m, n) = v.shape();
    if m == 0 || n == 0 {
        return Err(Error::invalid("empty landmark matrix"));
    }
    if v.iter().any(|x| !x.is_finite() || *x < 0.0) {
        return Err(Error::invalid("landmark matrix must be finite and nonnegative"));
    }
    let col_sums: Vec<f64> = (0..n).map(|j| v.column(j).sum()).collect();
    let isolated: Vec<usize> = col_sums
        .iter()
        .enumerate()
        .filter(|(_, s)| **s <= 0.0)
        .map(|(j, _)| j)
        .collect();
    if !isolated.is_empty() {
        return Err(Error::IsolatedPoints { indices: isolated });
    }
    let mut z = DMatrix::from_fn(m, n, |i, j| v[(i, j)] / col_sums[j]);
    for i in 0..m {
        let s: f64 = z.row(i).sum();
        let scale = if s > 0.0 { 1.0 / s.sqrt() } else { 0.0 };
        z.row_mut(i).iter_mut().for_each(|x| *x *= scale);
    }
    Ok(z)
}

/// `F = ZᵀZ` with `Z` from [`landmark_z`].
pub fn landmark_normalize(v: &DMatrix<f64>) -> Result<AffinityMatrix> {
    let z = landmark_z(v)?;
    let n = z.ncols();
    let f = z.transpose() * &z;
    // exact symmetry; the product is symmetric only up to rounding
    let f = DMatrix::from_fn(n, n, |i, j| if i <= j { f[(i, j)] } else { f[(j, i)] });
    Ok(AffinityMatrix { entries: f, role: AffinityRole::F })
}
