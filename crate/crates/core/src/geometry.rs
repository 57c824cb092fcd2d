//! Closed-form hyperbolic geometry.
//!
//! The Poincaré disc (unit ball, curvature -1) is the working model: the
//! clustering pipelines embed data there and every kernel is evaluated with
//! its geodesic distance. The half-space, Beltrami-Klein and hyperboloid
//! models carry their own distance formulas for completeness and cross-checks.
//!
//! Gyrovector operations follow Ungar's unit-disc convention
//! (`u ⊕ v = ((1 + 2<u,v> + |v|²) u + (1 - |u|²) v) / (1 + 2<u,v> + |u|²|v|²)`),
//! which keeps the disc closed under addition.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Norms at or beyond this are treated as having hit the ideal boundary.
pub const BOUNDARY_TRIGGER: f64 = 1.0 - 1e-12;
/// Norm that boundary hits are pulled back to.
pub const BOUNDARY_CLAMP: f64 = 1.0 - 1e-9;

#[inline]
pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

#[inline]
pub(crate) fn norm_sq(a: &[f64]) -> f64 {
    dot(a, a)
}

#[inline]
pub(crate) fn dist_sq(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

fn check_same_dim(a: &[f64], b: &[f64]) -> Result<()> {
    if a.len() != b.len() {
        return Err(Error::invalid(format!(
            "dimension mismatch: {} vs {}",
            a.len(),
            b.len()
        )));
    }
    Ok(())
}

/// A point strictly inside the unit ball of the Poincaré model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct HPoint(Vec<f64>);

impl HPoint {
    /// Validates finiteness and `|coords| < 1`.
    pub fn new(coords: Vec<f64>) -> Result<Self> {
        if coords.is_empty() {
            return Err(Error::invalid("a point needs at least one coordinate"));
        }
        if coords.iter().any(|c| !c.is_finite()) {
            return Err(Error::invalid("non-finite coordinate"));
        }
        let n = norm_sq(&coords).sqrt();
        if n >= 1.0 {
            return Err(Error::Domain(format!(
                "point of norm {n} is not inside the unit ball"
            )));
        }
        Ok(HPoint(coords))
    }

    /// Builds a point, pulling it back to norm `BOUNDARY_CLAMP` if it reached
    /// `BOUNDARY_TRIGGER`. The flag reports whether that happened.
    pub fn clamped(mut coords: Vec<f64>) -> Result<(Self, bool)> {
        if coords.iter().any(|c| !c.is_finite()) {
            return Err(Error::Degenerate("non-finite coordinate".into()));
        }
        let n = norm_sq(&coords).sqrt();
        let hit = n >= BOUNDARY_TRIGGER;
        if hit {
            let s = BOUNDARY_CLAMP / n;
            coords.iter_mut().for_each(|c| *c *= s);
        }
        Ok((HPoint(coords), hit))
    }

    pub fn origin(dim: usize) -> Self {
        HPoint(vec![0.0; dim.max(1)])
    }

    pub fn coords(&self) -> &[f64] {
        &self.0
    }

    pub fn into_coords(self) -> Vec<f64> {
        self.0
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn norm(&self) -> f64 {
        norm_sq(&self.0).sqrt()
    }

    pub fn neg(&self) -> Self {
        HPoint(self.0.iter().map(|c| -c).collect())
    }

    /// Conformal factor `2 / (1 - |x|²)` of the disc metric at this point.
    pub fn conformal_factor(&self) -> f64 {
        2.0 / (1.0 - norm_sq(&self.0))
    }
}

/// Points of the upper half-space model; the last coordinate is the height.
#[derive(Debug, Clone, PartialEq)]
pub struct HalfSpacePoint(Vec<f64>);

impl HalfSpacePoint {
    pub fn new(coords: Vec<f64>) -> Result<Self> {
        match coords.last() {
            None => Err(Error::invalid("a point needs at least one coordinate")),
            Some(h) if !(*h > 0.0) || !h.is_finite() => Err(Error::Domain(format!(
                "half-space height must be positive, got {h}"
            ))),
            Some(_) if coords.iter().any(|c| !c.is_finite()) => {
                Err(Error::invalid("non-finite coordinate"))
            }
            Some(_) => Ok(HalfSpacePoint(coords)),
        }
    }

    pub fn coords(&self) -> &[f64] {
        &self.0
    }

    fn height(&self) -> f64 {
        *self.0.last().expect("validated non-empty")
    }
}

/// Points of the Beltrami-Klein model (open unit ball, geodesics are chords).
#[derive(Debug, Clone, PartialEq)]
pub struct KleinPoint(Vec<f64>);

impl KleinPoint {
    pub fn new(coords: Vec<f64>) -> Result<Self> {
        if coords.is_empty() || coords.iter().any(|c| !c.is_finite()) {
            return Err(Error::invalid("Klein point needs finite coordinates"));
        }
        let n = norm_sq(&coords).sqrt();
        if n >= 1.0 {
            return Err(Error::Domain(format!(
                "Klein point of norm {n} is not inside the unit ball"
            )));
        }
        Ok(KleinPoint(coords))
    }

    pub fn coords(&self) -> &[f64] {
        &self.0
    }
}

/// Minkowski bilinear form `-x0 y0 + Σ xi yi`.
pub fn minkowski_dot(u: &[f64], v: &[f64]) -> f64 {
    -u[0] * v[0] + dot(&u[1..], &v[1..])
}

/// Points of the forward sheet `B(u,u) = -1, u0 ≥ 1`.
#[derive(Debug, Clone, PartialEq)]
pub struct HyperboloidPoint(Vec<f64>);

impl HyperboloidPoint {
    pub fn new(coords: Vec<f64>) -> Result<Self> {
        if coords.len() < 2 || coords.iter().any(|c| !c.is_finite()) {
            return Err(Error::invalid(
                "hyperboloid point needs at least two finite coordinates",
            ));
        }
        let b = minkowski_dot(&coords, &coords);
        // relative tolerance: far out on the sheet B is a difference of huge terms
        let scale = coords[0] * coords[0];
        if (b + 1.0).abs() > 1e-9 * scale.max(1.0) || coords[0] < 1.0 {
            return Err(Error::Domain(format!(
                "not on the forward sheet: B(u,u) = {b}, u0 = {}",
                coords[0]
            )));
        }
        Ok(HyperboloidPoint(coords))
    }

    /// Image of a disc point under the standard isometry.
    pub fn from_disc(x: &HPoint) -> Self {
        let s = norm_sq(x.coords());
        let f = 1.0 / (1.0 - s);
        let mut c = Vec::with_capacity(x.dim() + 1);
        c.push((1.0 + s) * f);
        c.extend(x.coords().iter().map(|xi| 2.0 * xi * f));
        HyperboloidPoint(c)
    }

    pub fn coords(&self) -> &[f64] {
        &self.0
    }
}

/// Margins and Fréchet-mean controls.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GeometryConfig {
    pub delta: f64,
    pub frechet_tol: f64,
    pub frechet_max_iter: usize,
}

impl GeometryConfig {
    /// Margin used when embedding data (`x / (|x| + delta)`).
    pub const EMBED_DELTA: f64 = 1e-2;
    /// Margin used when sampling the truncated domain for the consistency checks.
    pub const SAMPLING_DELTA: f64 = 1e-4;

    pub fn validate(&self) -> Result<()> {
        if !(self.delta > 0.0 && self.delta < 1.0) {
            return Err(Error::invalid(format!("delta must be in (0,1), got {}", self.delta)));
        }
        if !(self.frechet_tol > 0.0) || self.frechet_max_iter == 0 {
            return Err(Error::invalid("frechet_tol and frechet_max_iter must be positive"));
        }
        Ok(())
    }
}

impl Default for GeometryConfig {
    fn default() -> Self {
        GeometryConfig {
            delta: Self::EMBED_DELTA,
            frechet_tol: 1e-9,
            frechet_max_iter: 100,
        }
    }
}

/// Maps a Euclidean point into the disc: `x / (|x| + delta)`.
pub fn embed_to_disc(x: &[f64], delta: f64) -> Result<HPoint> {
    if !(delta > 0.0) {
        return Err(Error::invalid(format!("delta must be positive, got {delta}")));
    }
    if x.is_empty() || x.iter().any(|c| !c.is_finite()) {
        return Err(Error::invalid("embedding needs finite, non-empty coordinates"));
    }
    let scale = 1.0 / (norm_sq(x).sqrt() + delta);
    Ok(HPoint(x.iter().map(|c| c * scale).collect()))
}

/// `2|x - y|² / ((1 - |x|²)(1 - |y|²))`.
pub fn conformal_ratio(x: &HPoint, y: &HPoint) -> f64 {
    debug_assert_eq!(x.dim(), y.dim());
    2.0 * dist_sq(&x.0, &y.0) / ((1.0 - norm_sq(&x.0)) * (1.0 - norm_sq(&y.0)))
}

/// Geodesic distance on the disc, `2 asinh(sqrt(δ(x,y)/2))`.
///
/// Algebraically equal to `acosh(1 + δ(x,y))` but without the cancellation
/// that form suffers for nearby points.
pub fn dist_disc(x: &HPoint, y: &HPoint) -> f64 {
    2.0 * (0.5 * conformal_ratio(x, y)).sqrt().asinh()
}

/// The `acosh(1 + δ)` form of [`dist_disc`].
pub fn dist_disc_acosh(x: &HPoint, y: &HPoint) -> f64 {
    (1.0 + conformal_ratio(x, y)).acosh()
}

/// Disc distance on raw coordinates; callers guarantee `|x|, |y| < 1`.
#[inline]
pub(crate) fn dist_disc_raw(x: &[f64], y: &[f64]) -> f64 {
    let r = 2.0 * dist_sq(x, y) / ((1.0 - norm_sq(x)) * (1.0 - norm_sq(y)));
    2.0 * (0.5 * r).sqrt().asinh()
}

/// Half-space distance `2 asinh(|p2 - p1| / (2 sqrt(x_n y_n)))`.
pub fn dist_half_space(p1: &HalfSpacePoint, p2: &HalfSpacePoint) -> Result<f64> {
    check_same_dim(&p1.0, &p2.0)?;
    let num = dist_sq(&p1.0, &p2.0).sqrt();
    Ok(2.0 * (num / (2.0 * (p1.height() * p2.height()).sqrt())).asinh())
}

/// Reflection form `2 log((|p2 - p1| + |p2 - p̃1|) / (2 sqrt(x_n y_n)))`,
/// where `p̃1` mirrors `p1` through the boundary plane.
pub fn dist_half_space_log(p1: &HalfSpacePoint, p2: &HalfSpacePoint) -> Result<f64> {
    check_same_dim(&p1.0, &p2.0)?;
    let mut mirrored = p1.0.clone();
    *mirrored.last_mut().expect("non-empty") *= -1.0;
    let direct = dist_sq(&p1.0, &p2.0).sqrt();
    let reflected = dist_sq(&mirrored, &p2.0).sqrt();
    Ok(2.0 * ((direct + reflected) / (2.0 * (p1.height() * p2.height()).sqrt())).ln())
}

/// Klein distance from the cross-ratio of `u`, `v` and the chord's ideal endpoints.
pub fn dist_klein(u: &KleinPoint, v: &KleinPoint) -> Result<f64> {
    check_same_dim(&u.0, &v.0)?;
    if u == v {
        return Ok(0.0);
    }
    // chord u + t (v - u), |.| = 1  =>  |w|² t² + 2<u,w> t + |u|² - 1 = 0
    let w: Vec<f64> = v.0.iter().zip(&u.0).map(|(a, b)| a - b).collect();
    let a = norm_sq(&w);
    let b = dot(&u.0, &w);
    let c = norm_sq(&u.0) - 1.0;
    let disc = (b * b - a * c).sqrt();
    // stable roots of a t² + 2 b t + c = 0
    let q = -(b + b.signum() * disc);
    let (r1, r2) = if q != 0.0 { (q / a, c / q) } else { (disc / a, -disc / a) };
    let (t_near_u, t_near_v) = if r1 < r2 { (r1, r2) } else { (r2, r1) };
    // |aq| = (1 - ta)L, |ap| = -ta L, |pb| = tb L, |qb| = (tb - 1)L
    let ratio = ((1.0 - t_near_u) * t_near_v) / ((-t_near_u) * (t_near_v - 1.0));
    Ok(0.5 * ratio.ln().max(0.0))
}

/// Hyperboloid distance `acosh(-B(u,v))`.
///
/// For nearby points `acosh` near 1 loses half the digits; there the
/// equivalent `2 asinh(√B(u-v,u-v) / 2)` is used instead.
pub fn dist_hyperboloid(u: &HyperboloidPoint, v: &HyperboloidPoint) -> Result<f64> {
    check_same_dim(&u.0, &v.0)?;
    let arg = -minkowski_dot(&u.0, &v.0);
    if arg < 1.0 - 1e-12 {
        return Err(Error::Degenerate(format!(
            "-B(u,v) = {arg} < 1 for points on the sheet"
        )));
    }
    if arg < 2.0 {
        let diff: Vec<f64> = u.0.iter().zip(&v.0).map(|(a, b)| a - b).collect();
        let q = minkowski_dot(&diff, &diff).max(0.0);
        return Ok(2.0 * (0.5 * q.sqrt()).asinh());
    }
    Ok(arg.acosh())
}

/// Möbius addition on the unit disc.
pub fn mobius_add(u: &HPoint, v: &HPoint) -> Result<HPoint> {
    check_same_dim(&u.0, &v.0)?;
    Ok(mobius_add_raw(&u.0, &v.0)?.0)
}

fn mobius_add_raw(u: &[f64], v: &[f64]) -> Result<(HPoint, bool)> {
    let uv = dot(u, v);
    let uu = norm_sq(u);
    let vv = norm_sq(v);
    let denom = 1.0 + 2.0 * uv + uu * vv;
    if denom.abs() < 1e-15 {
        return Err(Error::Degenerate("Möbius addition denominator vanished".into()));
    }
    let cu = (1.0 + 2.0 * uv + vv) / denom;
    let cv = (1.0 - uu) / denom;
    HPoint::clamped(u.iter().zip(v).map(|(a, b)| cu * a + cv * b).collect())
}

/// Möbius scalar multiplication `tanh(r artanh|u|) u/|u|`.
pub fn mobius_scalar(r: f64, u: &HPoint) -> HPoint {
    let n = u.norm();
    if n == 0.0 || r == 0.0 {
        return HPoint::origin(u.dim());
    }
    let s = (r * n.atanh()).tanh() / n;
    // |s u| <= 1 - 1e-16 in exact arithmetic; rounding can still touch 1
    HPoint::clamped(u.0.iter().map(|c| c * s).collect())
        .expect("finite by construction")
        .0
}

/// Exponential map at `p`: follows the geodesic with initial velocity `v`.
pub fn exp_map(p: &HPoint, v: &[f64]) -> Result<HPoint> {
    check_same_dim(&p.0, v)?;
    let vn = norm_sq(v).sqrt();
    if vn == 0.0 {
        return Ok(p.clone());
    }
    let s = (0.5 * p.conformal_factor() * vn).tanh() / vn;
    let step: Vec<f64> = v.iter().map(|c| c * s).collect();
    Ok(mobius_add_raw(&p.0, &step)?.0)
}

/// Logarithm map at `p`; inverse of [`exp_map`]. The returned vector has
/// Riemannian length `dist_disc(p, y)`.
pub fn log_map(p: &HPoint, y: &HPoint) -> Result<Vec<f64>> {
    check_same_dim(&p.0, &y.0)?;
    let (w, _) = mobius_add_raw(&p.neg().0, &y.0)?;
    let wn = w.norm();
    if wn == 0.0 {
        return Ok(vec![0.0; p.dim()]);
    }
    let s = 2.0 / p.conformal_factor() * wn.atanh() / wn;
    Ok(w.0.into_iter().map(|c| c * s).collect())
}

/// Weighted Fréchet (Karcher) mean on the disc.
///
/// Starts from the Euclidean weighted mean (pulled to norm ≤ 1 - 1e-6) and
/// iterates `c ← exp_c(g / h)` with `g = Σ wᵢ log_c(xᵢ) / Σ wᵢ` until the
/// step is shorter than `cfg.frechet_tol` in geodesic length or
/// `cfg.frechet_max_iter` is reached. `h = Σ wᵢ dᵢ coth(dᵢ) / Σ wᵢ` bounds the
/// Hessian of the objective along the step, so the damped iteration does not
/// overshoot when the points are far apart (plain `exp_c(g)` oscillates there).
pub fn frechet_mean(points: &[HPoint], weights: &[f64], cfg: &GeometryConfig) -> Result<HPoint> {
    if points.is_empty() {
        return Err(Error::invalid("Fréchet mean of an empty set"));
    }
    if weights.len() != points.len() {
        return Err(Error::invalid("one weight per point is required"));
    }
    if weights.iter().any(|w| !(*w >= 0.0) || !w.is_finite()) {
        return Err(Error::invalid("weights must be finite and nonnegative"));
    }
    let total: f64 = weights.iter().sum();
    if !(total > 0.0) {
        return Err(Error::invalid("weights must have a positive sum"));
    }
    let dim = points[0].dim();
    if points.iter().any(|p| p.dim() != dim) {
        return Err(Error::invalid("points of mixed dimension"));
    }

    let mut start = vec![0.0; dim];
    for (p, w) in points.iter().zip(weights) {
        for (s, c) in start.iter_mut().zip(p.coords()) {
            *s += w * c / total;
        }
    }
    let n = norm_sq(&start).sqrt();
    if n > 1.0 - 1e-6 {
        start.iter_mut().for_each(|c| *c *= (1.0 - 1e-6) / n);
    }
    let mut center = HPoint(start);

    for _ in 0..cfg.frechet_max_iter {
        let (mut step, curvature) = damped_tangent_mean(&center, points, weights, total)?;
        step.iter_mut().for_each(|v| *v /= curvature);
        let next = exp_map(&center, &step)?;
        let moved = dist_disc(&center, &next);
        center = next;
        if moved < cfg.frechet_tol {
            break;
        }
    }
    let (center, _) = HPoint::clamped(center.0)?;
    Ok(center)
}

fn damped_tangent_mean(
    center: &HPoint,
    points: &[HPoint],
    weights: &[f64],
    total: f64,
) -> Result<(Vec<f64>, f64)> {
    let lambda = center.conformal_factor();
    let mut acc = vec![0.0; center.dim()];
    let mut h = 0.0;
    for (p, w) in points.iter().zip(weights) {
        if *w == 0.0 {
            continue;
        }
        let v = log_map(center, p)?;
        let d = lambda * norm_sq(&v).sqrt();
        h += w / total * if d < 1e-8 { 1.0 } else { d / d.tanh() };
        for (a, b) in acc.iter_mut().zip(&v) {
            *a += w * b / total;
        }
    }
    Ok((acc, h.max(1.0)))
}

fn tangent_mean(center: &HPoint, points: &[HPoint], weights: &[f64], total: f64) -> Result<Vec<f64>> {
    let mut acc = vec![0.0; center.dim()];
    for (p, w) in points.iter().zip(weights) {
        if *w == 0.0 {
            continue;
        }
        let v = log_map(center, p)?;
        for (a, b) in acc.iter_mut().zip(&v) {
            *a += w * b / total;
        }
    }
    Ok(acc)
}

/// Riemannian gradient norm of `c ↦ Σ wᵢ d(c, xᵢ)² / Σ wᵢ` at `c`.
pub fn frechet_gradient_norm(c: &HPoint, points: &[HPoint], weights: &[f64]) -> Result<f64> {
    let total: f64 = weights.iter().sum();
    let g = tangent_mean(c, points, weights, total)?;
    Ok(2.0 * c.conformal_factor() * norm_sq(&g).sqrt())
}
