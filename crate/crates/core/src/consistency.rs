//! Numerical checks of the hyperbolic kernels' consistency properties:
//! domination by the Euclidean kernel, integrability over the truncated disc,
//! radial Fourier transform with exponential decay, and the `n^{-1/2}`
//! convergence of the normalized affinity spectrum.
//!
//! Every check is a pure function of its parameters and seed.

use std::collections::BTreeMap;
use std::f64::consts::PI;

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use rustfft::num_complex::Complex64;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};

use crate::affinity::KernelKind;
use crate::clustering::split_seed;
use crate::error::{Error, Result};
use crate::geometry::{dist_disc_raw, dist_sq, embed_to_disc, norm_sq, GeometryConfig};
use crate::spectral::lanczos_largest;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConsistencyReport {
    pub check_name: String,
    pub samples: u64,
    pub violations: u64,
    pub statistics: BTreeMap<String, f64>,
    pub passed: bool,
    pub seed: u64,
}

impl ConsistencyReport {
    fn new(name: &str, seed: u64) -> Self {
        ConsistencyReport {
            check_name: name.to_string(),
            samples: 0,
            violations: 0,
            statistics: BTreeMap::new(),
            passed: false,
            seed,
        }
    }

    fn stat(&mut self, key: impl Into<String>, v: f64) {
        self.statistics.insert(key.into(), v);
    }
}

/// Uniform point in the ball of radius `radius`.
pub fn sample_ball<R: Rng>(rng: &mut R, dim: usize, radius: f64) -> Vec<f64> {
    let mut v: Vec<f64> = (0..dim).map(|_| rng.sample(StandardNormal)).collect();
    let n = norm_sq(&v).sqrt();
    if n == 0.0 {
        return vec![0.0; dim];
    }
    let r = radius * rng.random::<f64>().powf(1.0 / dim as f64);
    v.iter_mut().for_each(|c| *c *= r / n);
    v
}

/// Uniform point of the truncated disc `|x| <= 1 - delta`.
pub fn sample_h<R: Rng>(rng: &mut R, dim: usize, delta: f64) -> Vec<f64> {
    sample_ball(rng, dim, 1.0 - delta)
}

const CHUNK: u64 = 10_000;

/// Runs `f` over `n` samples in fixed chunks with per-chunk RNG streams, so
/// results do not depend on thread scheduling.
fn chunked<T, F>(n: u64, seed: u64, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(&mut ChaCha8Rng, u64) -> T + Sync,
{
    let chunks = n.div_ceil(CHUNK);
    (0..chunks)
        .into_par_iter()
        .map(|c| {
            let mut rng = ChaCha8Rng::seed_from_u64(split_seed(seed, c));
            let len = CHUNK.min(n - c * CHUNK);
            f(&mut rng, len)
        })
        .collect()
}

/// Which side of the domination inequality each kernel sits on.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Side {
    HyperbolicBelow,
    /// Negative control: claims the Euclidean kernel is below the hyperbolic one.
    Swapped,
}

/// Gaussian: `exp(-a·d(x,y)²) <= exp(-a|x-y|²)` on every pair.
/// Poisson: `exp(-a·d(x,y)) <= exp(-(a/2)|x-y|²)` on pairs with `|x-y| <= 1`.
/// Pairs are uniform on the disc truncated at `1 - 1e-4`.
pub fn check_kernel_domination(dim: usize, n_pairs: u64, a: f64, kind: KernelKind, seed: u64) -> Result<ConsistencyReport> {
    domination(dim, n_pairs, a, kind, seed, Side::HyperbolicBelow)
}

/// The same sampling with the inequality reversed. It must find violations.
pub fn check_kernel_domination_swapped(dim: usize, n_pairs: u64, a: f64, kind: KernelKind, seed: u64) -> Result<ConsistencyReport> {
    domination(dim, n_pairs, a, kind, seed, Side::Swapped)
}

/// `(hyperbolic, euclidean)` kernel values of one pair, or `None` when the
/// Poisson comparison does not apply (`|x-y| > 1`).
pub fn domination_pair(x: &[f64], y: &[f64], a: f64, kind: KernelKind) -> Option<(f64, f64)> {
    let e2 = dist_sq(x, y);
    let d = dist_disc_raw(x, y);
    if kind.is_gaussian() {
        Some(((-a * d * d).exp(), (-a * e2).exp()))
    } else if e2 <= 1.0 {
        Some(((-a * d).exp(), (-0.5 * a * e2).exp()))
    } else {
        None
    }
}

fn domination(dim: usize, n_pairs: u64, a: f64, kind: KernelKind, seed: u64, side: Side) -> Result<ConsistencyReport> {
    if dim == 0 || n_pairs == 0 || !(a > 0.0) {
        return Err(Error::invalid("need dim >= 1, n_pairs >= 1 and a > 0"));
    }
    let delta = GeometryConfig::SAMPLING_DELTA;
    let parts = chunked(n_pairs, seed, |rng, len| {
        let (mut checked, mut bad, mut worst) = (0u64, 0u64, f64::NEG_INFINITY);
        for _ in 0..len {
            let x = sample_h(rng, dim, delta);
            let y = sample_h(rng, dim, delta);
            if let Some((h, e)) = domination_pair(&x, &y, a, kind) {
                let (lo, hi) = match side {
                    Side::HyperbolicBelow => (h, e),
                    Side::Swapped => (e, h),
                };
                checked += 1;
                worst = worst.max(lo - hi);
                if lo > hi {
                    bad += 1;
                }
            }
        }
        (checked, bad, worst)
    });
    let name = match side {
        Side::HyperbolicBelow => "kernel_domination",
        Side::Swapped => "kernel_domination_swapped",
    };
    let mut r = ConsistencyReport::new(name, seed);
    r.samples = parts.iter().map(|p| p.0).sum();
    r.violations = parts.iter().map(|p| p.1).sum();
    r.stat("dim", dim as f64);
    r.stat("a", a);
    r.stat("pairs_drawn", n_pairs as f64);
    r.stat("max_excess", parts.iter().map(|p| p.2).fold(f64::NEG_INFINITY, f64::max));
    r.stat("gaussian", f64::from(u8::from(kind.is_gaussian())));
    r.passed = r.violations == 0;
    Ok(r)
}

/// Volume of the unit ball in `dim` dimensions.
pub fn unit_ball_volume(dim: usize) -> f64 {
    // V_d = 2π/d · V_{d-2}
    match dim {
        0 => 1.0,
        1 => 2.0,
        d => 2.0 * PI / d as f64 * unit_ball_volume(d - 2),
    }
}

/// Monte Carlo estimate of `∫_H exp(-a·d(x,0)²) dx` against the Gaussian
/// integral `(π/a)^{dim/2}`; passes when estimate + 3 standard errors is below it.
pub fn check_l1_bound(dim: usize, n_samples: u64, a: f64, seed: u64) -> Result<ConsistencyReport> {
    if !(1..=10).contains(&dim) || n_samples < 2 || !(a > 0.0) {
        return Err(Error::invalid("need 1 <= dim <= 10, n_samples >= 2 and a > 0"));
    }
    let delta = GeometryConfig::SAMPLING_DELTA;
    let origin = vec![0.0; dim];
    let parts = chunked(n_samples, seed, |rng, len| {
        let (mut s, mut s2) = (0.0, 0.0);
        for _ in 0..len {
            let x = sample_h(rng, dim, delta);
            let d = dist_disc_raw(&x, &origin);
            let f = (-a * d * d).exp();
            s += f;
            s2 += f * f;
        }
        (s, s2)
    });
    let n = n_samples as f64;
    let (s, s2) = parts.iter().fold((0.0, 0.0), |acc, p| (acc.0 + p.0, acc.1 + p.1));
    let mean = s / n;
    let var = ((s2 / n - mean * mean) * n / (n - 1.0)).max(0.0);
    let volume = unit_ball_volume(dim) * (1.0 - delta).powi(dim as i32);
    let estimate = volume * mean;
    let se = volume * (var / n).sqrt();
    let bound = (PI / a).powf(dim as f64 / 2.0);
    let mut r = ConsistencyReport::new("l1_bound", seed);
    r.samples = n_samples;
    r.violations = u64::from(estimate + 3.0 * se > bound);
    r.stat("estimate", estimate);
    r.stat("std_error", se);
    r.stat("bound", bound);
    r.stat("dim", dim as f64);
    r.stat("a", a);
    r.passed = r.violations == 0;
    Ok(r)
}

/// Function sampled on the Fourier grid.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum FtInput {
    /// `exp(-a·d(x,0)²)` on the truncated disc, zero outside.
    HyperbolicGaussian { a: f64 },
    /// `exp(-a|x|²)` over the whole grid (control).
    EuclideanGaussian { a: f64 },
    /// 1 everywhere (control with no decay band).
    Constant,
}

impl FtInput {
    fn eval(self, x: f64, y: f64) -> f64 {
        match self {
            FtInput::HyperbolicGaussian { a } => {
                let r2 = x * x + y * y;
                if r2.sqrt() > 1.0 - GeometryConfig::SAMPLING_DELTA {
                    return 0.0;
                }
                let d = dist_disc_raw(&[x, y], &[0.0, 0.0]);
                (-a * d * d).exp()
            }
            FtInput::EuclideanGaussian { a } => (-a * (x * x + y * y)).exp(),
            FtInput::Constant => 1.0,
        }
    }
}

fn grid_coords(grid_size: usize, extent: f64) -> (Vec<f64>, f64) {
    let h = 2.0 * extent / grid_size as f64;
    ((0..grid_size).map(|i| -extent + i as f64 * h).collect(), h)
}

fn check_grid(grid_size: usize, extent: f64) -> Result<()> {
    if grid_size < 64 {
        return Err(Error::invalid(format!("grid_size must be at least 64, got {grid_size}")));
    }
    if !(extent >= 1.0) {
        return Err(Error::invalid(format!("extent must cover the unit disc, got {extent}")));
    }
    Ok(())
}

/// `|f̂(w)|` by direct summation over the grid, `w` in radians per unit length.
pub fn ft_magnitude(input: FtInput, grid_size: usize, extent: f64, w: [f64; 2]) -> f64 {
    let (xs, h) = grid_coords(grid_size, extent);
    let (mut re, mut im) = (0.0, 0.0);
    for &x in &xs {
        for &y in &xs {
            let f = input.eval(x, y);
            if f != 0.0 {
                let phase = w[0] * x + w[1] * y;
                re += f * phase.cos();
                im -= f * phase.sin();
            }
        }
    }
    h * h * (re * re + im * im).sqrt()
}

/// Radiality of the transform: for `n_rotations` seeded moduli and angle
/// pairs (plus a fixed axis-versus-diagonal pair) compares `|f̂|` at equal
/// modulus. Moduli are drawn below the frequency where `|f̂|` falls to
/// 1e-4 of its peak. Passes when the worst relative discrepancy is ≤ 1e-2.
pub fn check_radial_ft(grid_size: usize, extent: f64, a: f64, n_rotations: usize, seed: u64) -> Result<ConsistencyReport> {
    check_grid(grid_size, extent)?;
    if !(a > 0.0) || n_rotations == 0 {
        return Err(Error::invalid("need a > 0 and n_rotations >= 1"));
    }
    let input = FtInput::HyperbolicGaussian { a };
    let peak = ft_magnitude(input, grid_size, extent, [0.0, 0.0]);
    let nyquist = PI * grid_size as f64 / (2.0 * extent);
    let step = PI / extent;
    let mut band = step;
    while band + step < nyquist && ft_magnitude(input, grid_size, extent, [band + step, 0.0]) >= 1e-4 * peak {
        band += step;
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut pairs: Vec<(f64, f64, f64)> = vec![(0.5 * band, 0.0, PI / 4.0)];
    for _ in 0..n_rotations {
        let rho = band * rng.random::<f64>();
        pairs.push((rho, rng.random_range(0.0..2.0 * PI), rng.random_range(0.0..2.0 * PI)));
    }
    let worst: Vec<f64> = pairs
        .par_iter()
        .map(|&(rho, t1, t2)| {
            let m1 = ft_magnitude(input, grid_size, extent, [rho * t1.cos(), rho * t1.sin()]);
            let m2 = ft_magnitude(input, grid_size, extent, [rho * t2.cos(), rho * t2.sin()]);
            (m1 - m2).abs() / m1.max(m2).max(1e-300)
        })
        .collect();
    let max = worst.iter().copied().fold(0.0, f64::max);
    let mut r = ConsistencyReport::new("radial_ft", seed);
    r.samples = pairs.len() as u64;
    r.violations = worst.iter().filter(|&&d| d > 1e-2).count() as u64;
    r.stat("max_discrepancy", max);
    r.stat("axis_diagonal_discrepancy", worst[0]);
    r.stat("band", band);
    r.stat("grid_size", grid_size as f64);
    r.stat("extent", extent);
    r.stat("a", a);
    r.passed = max <= 1e-2;
    Ok(r)
}

/// 2-D FFT magnitudes of `input` on the grid, times the cell area.
pub fn fft_magnitudes(input: FtInput, grid_size: usize, extent: f64) -> DMatrix<f64> {
    let n = grid_size;
    let (xs, h) = grid_coords(n, extent);
    let mut data: Vec<Complex64> = (0..n * n).map(|idx| Complex64::new(input.eval(xs[idx / n], xs[idx % n]), 0.0)).collect();
    let fft = FftPlanner::new().plan_fft_forward(n);
    fft.process(&mut data); // rows
    let mut t = vec![Complex64::new(0.0, 0.0); n * n];
    for i in 0..n {
        for j in 0..n {
            t[j * n + i] = data[i * n + j];
        }
    }
    fft.process(&mut t); // columns
    DMatrix::from_fn(n, n, |i, j| h * h * t[j * n + i].norm())
}

/// Mean `|f̂|` in integer rings `|k| ∈ [b - 0.5, b + 0.5)`, `b = 0..n/2`.
fn radial_profile(mag: &DMatrix<f64>) -> Vec<f64> {
    let n = mag.nrows();
    let half = n / 2;
    let mut sum = vec![0.0; half + 1];
    let mut count = vec![0usize; half + 1];
    for i in 0..n {
        for j in 0..n {
            let ki = if i <= half { i as f64 } else { i as f64 - n as f64 };
            let kj = if j <= half { j as f64 } else { j as f64 - n as f64 };
            let b = (ki * ki + kj * kj).sqrt().round() as usize;
            if b <= half {
                sum[b] += mag[(i, j)];
                count[b] += 1;
            }
        }
    }
    sum.iter().zip(&count).map(|(s, c)| s / (*c).max(1) as f64).collect()
}

/// Least-squares line `y = intercept + slope·x`, with R².
pub fn linear_fit(x: &[f64], y: &[f64]) -> (f64, f64, f64) {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let sxx: f64 = x.iter().map(|v| (v - mx).powi(2)).sum();
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let syy: f64 = y.iter().map(|v| (v - my).powi(2)).sum();
    let slope = if sxx > 0.0 { sxy / sxx } else { 0.0 };
    let r2 = if sxx > 0.0 && syy > 0.0 { sxy * sxy / (sxx * syy) } else { 0.0 };
    (my - slope * mx, slope, r2)
}

/// Exponential decay of the transform: fits `log|f̂| = log C - l·|w|` over
/// the rings from 1 up to the last ring above 1e-10 of the peak. Passes when
/// `l > 0` and `R² >= 0.9`.
pub fn check_ft_decay(grid_size: usize, extent: f64, a: f64, seed: u64) -> Result<ConsistencyReport> {
    if !(a > 0.0) {
        return Err(Error::invalid("need a > 0"));
    }
    check_ft_decay_of(FtInput::HyperbolicGaussian { a }, grid_size, extent, seed)
}

pub fn check_ft_decay_of(input: FtInput, grid_size: usize, extent: f64, seed: u64) -> Result<ConsistencyReport> {
    check_grid(grid_size, extent)?;
    let profile = radial_profile(&fft_magnitudes(input, grid_size, extent));
    let peak = profile[0];
    let floor = 1e-10 * peak;
    let band: Vec<usize> = (1..profile.len()).take_while(|&b| profile[b] > floor).collect();
    let w: Vec<f64> = band.iter().map(|&b| PI * b as f64 / extent).collect();
    let logm: Vec<f64> = band.iter().map(|&b| profile[b].ln()).collect();
    let (intercept, slope, r2) = if band.len() >= 3 { linear_fit(&w, &logm) } else { (peak.max(1e-300).ln(), 0.0, 0.0) };
    let l = -slope;
    let mut r = ConsistencyReport::new("ft_decay", seed);
    r.samples = band.len() as u64;
    r.violations = u64::from(!(l > 0.0 && r2 >= 0.9));
    r.stat("l", l);
    r.stat("C", intercept.exp());
    r.stat("r2", r2);
    r.stat("band_rings", band.len() as f64);
    r.stat("grid_size", grid_size as f64);
    r.stat("extent", extent);
    r.passed = r.violations == 0;
    Ok(r)
}

/// Sampling law on the disc for the convergence-rate check.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SamplingDistribution {
    /// Uniform on the disc truncated at `1 - 1e-4`.
    UniformH,
    /// Three Gaussian blobs (centers at radius 1.5, spread 0.5) mapped by
    /// `x / (|x| + 1)`, so they sit around radius 0.6.
    BlobMixture,
}

impl SamplingDistribution {
    fn sample<R: Rng>(self, rng: &mut R) -> Vec<f64> {
        match self {
            SamplingDistribution::UniformH => sample_h(rng, 2, GeometryConfig::SAMPLING_DELTA),
            SamplingDistribution::BlobMixture => {
                let c = rng.random_range(0..3usize);
                let t = 2.0 * PI * c as f64 / 3.0;
                let x: Vec<f64> = [1.5 * t.cos(), 1.5 * t.sin()]
                    .iter()
                    .map(|m| m + 0.5 * <StandardNormal as Distribution<f64>>::sample(&StandardNormal, rng))
                    .collect();
                embed_to_disc(&x, 1.0).expect("finite draw").into_coords()
            }
        }
    }
}

/// Packed upper triangle of `W(i,j) = exp(-d(xᵢ,xⱼ)²)` with degree scaling,
/// applied as `D^{-1/2} W D^{-1/2}`.
struct NormalizedKernel {
    n: usize,
    packed: Vec<f64>,
    inv_sqrt_deg: Vec<f64>,
}

impl NormalizedKernel {
    fn new(points: &[Vec<f64>]) -> Self {
        let n = points.len();
        let rows: Vec<Vec<f64>> = (0..n)
            .into_par_iter()
            .map(|i| {
                (i..n)
                    .map(|j| {
                        let d = dist_disc_raw(&points[i], &points[j]);
                        (-d * d).exp()
                    })
                    .collect()
            })
            .collect();
        let mut deg = vec![0.0; n];
        for (i, r) in rows.iter().enumerate() {
            for (off, v) in r.iter().enumerate() {
                deg[i] += v;
                if off > 0 {
                    deg[i + off] += v;
                }
            }
        }
        let packed = rows.into_iter().flatten().collect();
        NormalizedKernel { n, packed, inv_sqrt_deg: deg.iter().map(|d| 1.0 / d.sqrt()).collect() }
    }

    fn apply(&self, x: &[f64], y: &mut [f64]) {
        let n = self.n;
        let s: Vec<f64> = x.iter().zip(&self.inv_sqrt_deg).map(|(a, b)| a * b).collect();
        let mut acc = vec![0.0; n];
        let mut start = 0;
        for i in 0..n {
            let row = &self.packed[start..start + n - i];
            let mut own = row[0] * s[i];
            for (off, w) in row[1..].iter().enumerate() {
                let j = i + 1 + off;
                own += w * s[j];
                acc[j] += w * s[i];
            }
            acc[i] += own;
            start += n - i;
        }
        for i in 0..n {
            y[i] = acc[i] * self.inv_sqrt_deg[i];
        }
    }

    fn top(&self, k: usize) -> Result<Vec<f64>> {
        lanczos_largest(self.n, k, |x, y| self.apply(x, y))
    }
}

/// Eigenvalues compared by the convergence-rate check.
pub const RATE_TOP_K: usize = 4;

fn sample_points(dist: SamplingDistribution, n: usize, seed: u64) -> Vec<Vec<f64>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n).map(|_| dist.sample(&mut rng)).collect()
}

/// Top eigenvalues of `D^{-1/2} W D^{-1/2}` for `n` draws.
pub fn normalized_top_eigenvalues(dist: SamplingDistribution, n: usize, k: usize, seed: u64) -> Result<Vec<f64>> {
    NormalizedKernel::new(&sample_points(dist, n, seed)).top(k)
}

/// Empirical rate of spectral convergence. For each `n` in `ns`, draws
/// `trials` samples, takes the top `RATE_TOP_K` eigenvalues of the
/// normalized affinity (Gaussian kernel of geodesic distance, a = 1), and
/// measures the largest deviation from a reference built on `8·max(ns)`
/// draws. Fits `log(mean deviation)` against `log n`; passes when the slope
/// is at most -0.35.
pub fn check_convergence_rate(ns: &[usize], trials: usize, dist: SamplingDistribution, seed: u64) -> Result<ConsistencyReport> {
    if ns.len() < 4 {
        return Err(Error::invalid(format!("need at least 4 sample sizes, got {}", ns.len())));
    }
    if ns.windows(2).any(|w| w[0] >= w[1]) || ns[0] <= RATE_TOP_K {
        return Err(Error::invalid(format!("sample sizes must ascend and exceed {RATE_TOP_K}")));
    }
    if trials < 5 {
        return Err(Error::invalid(format!("need at least 5 trials, got {trials}")));
    }
    let n_ref = 8 * ns[ns.len() - 1];
    let reference = normalized_top_eigenvalues(dist, n_ref, RATE_TOP_K, split_seed(seed, u64::MAX))?;
    let cells: Vec<(usize, usize)> = (0..ns.len()).flat_map(|i| (0..trials).map(move |t| (i, t))).collect();
    let devs: Vec<f64> = cells
        .par_iter()
        .map(|&(i, t)| {
            let cell_seed = split_seed(seed, (i * trials + t) as u64);
            let top = normalized_top_eigenvalues(dist, ns[i], RATE_TOP_K, cell_seed)?;
            Ok(top.iter().zip(&reference).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max))
        })
        .collect::<Result<_>>()?;
    let means: Vec<f64> = (0..ns.len())
        .map(|i| devs[i * trials..(i + 1) * trials].iter().sum::<f64>() / trials as f64)
        .collect();
    let lx: Vec<f64> = ns.iter().map(|&n| (n as f64).ln()).collect();
    let ly: Vec<f64> = means.iter().map(|m| m.max(1e-300).ln()).collect();
    let (intercept, slope, r2) = linear_fit(&lx, &ly);
    let mut r = ConsistencyReport::new("convergence_rate", seed);
    r.samples = (ns.len() * trials) as u64;
    r.violations = u64::from(!(slope <= -0.35));
    for (n, m) in ns.iter().zip(&means) {
        r.stat(format!("deviation_n{n}"), *m);
    }
    for (j, v) in reference.iter().enumerate() {
        r.stat(format!("reference_lambda{}", j + 1), *v);
    }
    r.stat("reference_n", n_ref as f64);
    r.stat("slope", slope);
    r.stat("intercept", intercept);
    r.stat("r2", r2);
    r.stat("trials", trials as f64);
    r.passed = r.violations == 0;
    Ok(r)
}
