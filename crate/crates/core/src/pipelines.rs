//! End-to-end clustering: HSCA and its landmark (HLSC-K) and fast (FHSC)
//! variants, plus their Euclidean mirrors ESCA, ELSC-K and FESC.
//!
//! Every pipeline returns labels in input row order. Stage failures come back
//! wrapped in [`Error::Stage`] naming the stage.

use std::fmt;
use std::str::FromStr;
use std::time::Instant;

use nalgebra::{DMatrix, SymmetricEigen};
use serde::{Deserialize, Serialize};

use crate::affinity::{
    build_affinity, build_landmark_affinity, build_modified_affinity, landmark_normalize, landmark_z, AffinityMatrix, KernelKind,
    KernelSpec,
};
use crate::clustering::{kmeans_with_geometry, split_seed, Clustering, KMeansConfig, Metric};
use crate::dataio::EuclideanDataset;
use crate::error::{Error, Result, StageExt};
use crate::geometry::{embed_to_disc, GeometryConfig, HPoint, BOUNDARY_TRIGGER};
use crate::spectral::{build_laplacian, fix_sign, smallest_eigenpairs, SpectralEmbedding};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Algorithm {
    #[serde(rename = "hsca")]
    Hsca,
    #[serde(rename = "esca")]
    Esca,
    #[serde(rename = "hlsc-k")]
    Hlsck,
    #[serde(rename = "elsc-k")]
    Elsck,
    #[serde(rename = "fhsc")]
    Fhsc,
    #[serde(rename = "fesc")]
    Fesc,
}

impl Algorithm {
    pub const ALL: [Algorithm; 6] = [
        Algorithm::Hsca,
        Algorithm::Esca,
        Algorithm::Hlsck,
        Algorithm::Elsck,
        Algorithm::Fhsc,
        Algorithm::Fesc,
    ];

    pub fn is_hyperbolic(self) -> bool {
        matches!(self, Algorithm::Hsca | Algorithm::Hlsck | Algorithm::Fhsc)
    }

    /// Whether the algorithm uses `m` landmarks or pre-clusters.
    pub fn uses_m(self) -> bool {
        !matches!(self, Algorithm::Hsca | Algorithm::Esca)
    }

    pub fn name(self) -> &'static str {
        match self {
            Algorithm::Hsca => "hsca",
            Algorithm::Esca => "esca",
            Algorithm::Hlsck => "hlsc-k",
            Algorithm::Elsck => "elsc-k",
            Algorithm::Fhsc => "fhsc",
            Algorithm::Fesc => "fesc",
        }
    }

    /// Table-style name, e.g. `HSCA`, `HLSC-K`.
    pub fn display_name(self) -> String {
        self.name().to_uppercase()
    }
}

impl fmt::Display for Algorithm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Algorithm {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let key = s.to_ascii_lowercase().replace('_', "-");
        Algorithm::ALL
            .into_iter()
            .find(|a| a.name() == key || a.name().replace('-', "") == key)
            .ok_or_else(|| Error::invalid(format!("unknown algorithm `{s}`")))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PipelineConfig {
    pub algorithm: Algorithm,
    /// Kernel profile and bandwidth. The geometry (hyperbolic or Euclidean)
    /// is taken from the algorithm, so only the Gaussian/Poisson choice matters.
    pub kernel: KernelSpec,
    pub k: usize,
    /// Landmarks or pre-clusters; `None` means `min(N, max(10k, 100))`.
    pub m: Option<usize>,
    /// Margin of the disc embedding.
    pub delta: f64,
    /// Bandwidth of the modified affinity; `None` reuses `kernel.sigma`.
    pub sigma2: Option<f64>,
    /// Restart count, iteration cap and tolerance for every k-means stage.
    /// Its `k`, `metric` and `seed` are set per stage.
    pub kmeans: KMeansConfig,
    pub geometry: GeometryConfig,
    pub seed: u64,
    /// HLSC-K/ELSC-K only: embed with the top-k right singular vectors of `Z`
    /// instead of running steps 3-9 on the `N × N` matrix `F`.
    pub fast_landmarks: bool,
}

impl PipelineConfig {
    pub fn new(algorithm: Algorithm, profile: KernelKind, sigma: f64, k: usize) -> Result<Self> {
        let kernel = KernelSpec::dense(profile.with_geometry(algorithm.is_hyperbolic()), sigma)?;
        Ok(PipelineConfig {
            algorithm,
            kernel,
            k,
            m: None,
            delta: GeometryConfig::EMBED_DELTA,
            sigma2: None,
            kmeans: KMeansConfig::new(k, Metric::Euclidean, 0),
            geometry: GeometryConfig::default(),
            seed: 42,
            fast_landmarks: false,
        })
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn with_m(mut self, m: usize) -> Self {
        self.m = Some(m);
        self
    }

    pub fn with_epsilon(mut self, epsilon: f64) -> Self {
        self.kernel.epsilon = epsilon;
        self
    }

    /// Kernel with the geometry forced to match the algorithm.
    pub fn effective_kernel(&self) -> KernelSpec {
        KernelSpec {
            kind: self.kernel.kind.with_geometry(self.algorithm.is_hyperbolic()),
            ..self.kernel
        }
    }

    pub fn effective_sigma2(&self) -> f64 {
        self.sigma2.unwrap_or(self.kernel.sigma)
    }

    pub fn effective_m(&self, n: usize) -> usize {
        self.m.unwrap_or_else(|| n.min((10 * self.k).max(100)))
    }

    pub fn validate(&self, n: usize) -> Result<()> {
        self.kernel.validate()?;
        if self.k == 0 {
            return Err(Error::invalid("k must be positive"));
        }
        if self.k > n {
            return Err(Error::invalid(format!("k = {} exceeds the {n} points", self.k)));
        }
        if !(self.delta > 0.0 && self.delta < 1.0) {
            return Err(Error::invalid(format!("delta must be in (0,1), got {}", self.delta)));
        }
        if !(self.effective_sigma2() > 0.0) {
            return Err(Error::invalid("sigma2 must be positive"));
        }
        if self.algorithm.uses_m() {
            let m = self.effective_m(n);
            if m < self.k || m > n {
                return Err(Error::invalid(format!("need k <= m <= N, got k = {}, m = {m}, N = {n}", self.k)));
            }
        }
        self.geometry.validate()?;
        KMeansConfig { k: self.k, ..self.kmeans }.validate()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StageTiming {
    pub stage: String,
    /// Shape of the stage's output.
    pub rows: usize,
    pub cols: usize,
    pub millis: f64,
}

#[derive(Debug, Clone)]
pub struct PipelineResult {
    pub algorithm: Algorithm,
    pub clustering: Clustering,
    pub embedding: SpectralEmbedding,
    /// Disc images of the inputs (hyperbolic algorithms only).
    pub embedded_points: Option<Vec<HPoint>>,
    pub timings: Vec<StageTiming>,
    pub flags: Vec<String>,
    /// Landmarks or pre-clusters used, when applicable.
    pub m: Option<usize>,
}

impl PipelineResult {
    pub fn labels(&self) -> &[usize] {
        &self.clustering.labels
    }
}

struct Run {
    timings: Vec<StageTiming>,
    flags: Vec<String>,
}

impl Run {
    fn new() -> Self {
        Run { timings: Vec::new(), flags: Vec::new() }
    }

    /// Runs `f` as the named stage: times it and tags its error.
    fn stage<T>(&mut self, name: &'static str, f: impl FnOnce() -> Result<T>, shape: impl Fn(&T) -> (usize, usize)) -> Result<T> {
        let start = Instant::now();
        let out = f().stage(name)?;
        let (rows, cols) = shape(&out);
        self.timings.push(StageTiming {
            stage: name.to_string(),
            rows,
            cols,
            millis: start.elapsed().as_secs_f64() * 1e3,
        });
        Ok(out)
    }
}

fn square(a: &AffinityMatrix) -> (usize, usize) {
    (a.n(), a.n())
}

fn check_data(data: &EuclideanDataset, cfg: &PipelineConfig) -> Result<()> {
    data.validate().stage("input")?;
    if data.is_empty() {
        return Err(Error::invalid("empty dataset").in_stage("input"));
    }
    cfg.validate(data.len()).stage("config")
}

/// Step 1: `x ↦ x / (|x| + δ)`, clamping anything numerically on the boundary.
fn embed(points: &[Vec<f64>], delta: f64, flags: &mut Vec<String>) -> Result<Vec<HPoint>> {
    let mut clamped = Vec::new();
    let out = points
        .iter()
        .enumerate()
        .map(|(i, x)| {
            let p = embed_to_disc(x, delta)?;
            if p.norm() >= BOUNDARY_TRIGGER {
                clamped.push(i);
                return Ok(HPoint::clamped(p.into_coords())?.0);
            }
            Ok(p)
        })
        .collect::<Result<Vec<_>>>()?;
    if !clamped.is_empty() {
        flags.push(format!("boundary_clamp: {clamped:?}"));
    }
    Ok(out)
}

fn as_rows(points: &[HPoint]) -> Vec<Vec<f64>> {
    points.iter().map(|p| p.coords().to_vec()).collect()
}

/// Steps 3-9 on an affinity matrix: modified affinity, Laplacian, bottom-k
/// eigenvectors, row normalization and k-means on the rows.
fn spectral_tail(w: &AffinityMatrix, cfg: &PipelineConfig, run: &mut Run) -> Result<(SpectralEmbedding, Clustering)> {
    let wp = run.stage("modified_affinity", || build_modified_affinity(w, cfg.effective_sigma2()), square)?;
    let lap = run.stage("laplacian", || build_laplacian(&wp), |l| l.normalized.shape())?;
    let (values, vectors) = run.stage("eigen", || smallest_eigenpairs(&lap.normalized, cfg.k), |(_, v)| v.shape())?;
    embed_and_cluster(values, vectors, cfg, run)
}

fn embed_and_cluster(
    values: Vec<f64>,
    vectors: DMatrix<f64>,
    cfg: &PipelineConfig,
    run: &mut Run,
) -> Result<(SpectralEmbedding, Clustering)> {
    let embedding = run.stage("normalize", || Ok(SpectralEmbedding::from_eigenpairs(values, vectors)), |e| e.normalized.shape())?;
    if !embedding.zero_rows.is_empty() {
        run.flags.push(format!("zero_rows: {:?}", embedding.zero_rows));
    }
    let rows = embedding.rows();
    let km = KMeansConfig { k: cfg.k, metric: Metric::Euclidean, seed: split_seed(cfg.seed, 1), ..cfg.kmeans };
    let clustering = run.stage("kmeans", || kmeans_with_geometry(&rows, &km, &cfg.geometry), |c| (c.labels.len(), cfg.k))?;
    Ok((embedding, clustering))
}

/// Points in the algorithm's space: disc images or the raw coordinates.
fn prepare(data: &EuclideanDataset, cfg: &PipelineConfig, run: &mut Run) -> Result<(Vec<Vec<f64>>, Option<Vec<HPoint>>)> {
    if cfg.algorithm.is_hyperbolic() {
        let mut flags = Vec::new();
        let hp = run.stage("embed", || embed(&data.points, cfg.delta, &mut flags), |p| (p.len(), data.dim()))?;
        run.flags.extend(flags);
        Ok((as_rows(&hp), Some(hp)))
    } else {
        Ok((data.points.clone(), None))
    }
}

fn metric_of(cfg: &PipelineConfig) -> Metric {
    if cfg.algorithm.is_hyperbolic() {
        Metric::PoincareDisc
    } else {
        Metric::Euclidean
    }
}

fn full_spectral(data: &EuclideanDataset, cfg: &PipelineConfig) -> Result<PipelineResult> {
    check_data(data, cfg)?;
    let mut run = Run::new();
    let (points, embedded) = prepare(data, cfg, &mut run)?;
    let spec = cfg.effective_kernel();
    let (embedding, clustering) = if points.len() == 1 {
        single_point(cfg)
    } else {
        let w = run.stage("affinity", || build_affinity(&points, &spec), square)?;
        spectral_tail(&w, cfg, &mut run)?
    };
    Ok(PipelineResult {
        algorithm: cfg.algorithm,
        clustering,
        embedding,
        embedded_points: embedded,
        timings: run.timings,
        flags: run.flags,
        m: None,
    })
}

/// N = k = 1: nothing to decompose.
fn single_point(cfg: &PipelineConfig) -> (SpectralEmbedding, Clustering) {
    let embedding = SpectralEmbedding::from_eigenpairs(vec![0.0], DMatrix::from_element(1, 1, 1.0));
    let clustering = Clustering {
        labels: vec![0],
        centroids: vec![vec![1.0]],
        inertia: 0.0,
        iterations_run: 0,
        inertia_trace: vec![0.0],
    };
    debug_assert_eq!(cfg.k, 1);
    (embedding, clustering)
}

/// Hyperbolic spectral clustering: disc embedding, hyperbolic kernel
/// affinity, modified affinity, normalized Laplacian, bottom-k eigenvectors,
/// row normalization, k-means.
pub fn run_hsca(data: &EuclideanDataset, cfg: &PipelineConfig) -> Result<PipelineResult> {
    full_spectral(data, &with_algorithm(cfg, Algorithm::Hsca))
}

/// Normalized Euclidean spectral clustering: HSCA without the embedding and
/// with Euclidean kernel distances.
pub fn run_esca(data: &EuclideanDataset, cfg: &PipelineConfig) -> Result<PipelineResult> {
    full_spectral(data, &with_algorithm(cfg, Algorithm::Esca))
}

fn with_algorithm(cfg: &PipelineConfig, algorithm: Algorithm) -> PipelineConfig {
    PipelineConfig { algorithm, ..cfg.clone() }
}

/// Pre-clustering into `m` groups in the algorithm's geometry.
fn precluster(points: &[Vec<f64>], m: usize, cfg: &PipelineConfig, run: &mut Run, stage: &'static str) -> Result<Clustering> {
    let km = KMeansConfig { k: m, metric: metric_of(cfg), seed: split_seed(cfg.seed, 0), ..cfg.kmeans };
    run.stage(stage, || kmeans_with_geometry(points, &km, &cfg.geometry), |c| (c.centroids.len(), points[0].len()))
}

fn landmark(data: &EuclideanDataset, cfg: &PipelineConfig) -> Result<PipelineResult> {
    check_data(data, cfg)?;
    let mut run = Run::new();
    let n = data.len();
    let m = cfg.effective_m(n);
    if m == cfg.k {
        run.flags.push(format!("m_equals_k: {m}"));
    }
    let (points, embedded) = prepare(data, cfg, &mut run)?;
    let spec = cfg.effective_kernel();
    let pre = precluster(&points, m, cfg, &mut run, "landmarks")?;
    let v = run.stage("landmark_affinity", || build_landmark_affinity(&pre.centroids, &points, &spec), |v| v.shape())?;
    let (embedding, clustering) = if cfg.fast_landmarks {
        let (values, vectors) = run.stage("svd", || right_singular_vectors(&v, cfg.k), |(_, u)| u.shape())?;
        embed_and_cluster(values, vectors, cfg, &mut run)?
    } else {
        let f = run.stage("landmark_normalize", || landmark_normalize(&v), square)?;
        spectral_tail(&f, cfg, &mut run)?
    };
    Ok(PipelineResult {
        algorithm: cfg.algorithm,
        clustering,
        embedding,
        embedded_points: embedded,
        timings: run.timings,
        flags: run.flags,
        m: Some(m),
    })
}

/// Top-k right singular vectors of `Z` (from the `m × m` Gram `ZZᵀ`).
/// Returned values are `1 - s²/s₁²` so that they ascend like Laplacian
/// eigenvalues.
fn right_singular_vectors(v: &DMatrix<f64>, k: usize) -> Result<(Vec<f64>, DMatrix<f64>)> {
    let z = landmark_z(v)?;
    let (m, n) = z.shape();
    if k > m.min(n) {
        return Err(Error::invalid(format!("fast mode needs k <= m, got k = {k}, m = {m}")));
    }
    let gram = &z * z.transpose();
    let eig = SymmetricEigen::new(gram);
    let mut order: Vec<usize> = (0..m).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]).then(a.cmp(&b)));
    let top = eig.eigenvalues[order[0]].max(f64::MIN_POSITIVE);
    let mut values = Vec::with_capacity(k);
    let mut vectors = DMatrix::zeros(n, k);
    for (c, &i) in order[..k].iter().enumerate() {
        let s2 = eig.eigenvalues[i];
        if s2 <= 1e-14 * top {
            return Err(Error::Degenerate(format!("Z has rank below k = {k}")));
        }
        let col = z.transpose() * eig.eigenvectors.column(i) / s2.sqrt();
        vectors.set_column(c, &col);
        fix_sign(vectors.column_mut(c));
        values.push(1.0 - s2 / top);
    }
    Ok((values, vectors))
}

/// Landmark hyperbolic spectral clustering: Poincaré k-means picks `m`
/// landmarks; the landmark affinity `V` is normalized into `F = ZᵀZ`, whose
/// rows then go through the HSCA tail.
pub fn run_hlsck(data: &EuclideanDataset, cfg: &PipelineConfig) -> Result<PipelineResult> {
    landmark(data, &with_algorithm(cfg, Algorithm::Hlsck))
}

/// Euclidean mirror of [`run_hlsck`].
pub fn run_elsck(data: &EuclideanDataset, cfg: &PipelineConfig) -> Result<PipelineResult> {
    landmark(data, &with_algorithm(cfg, Algorithm::Elsck))
}

fn fast(data: &EuclideanDataset, cfg: &PipelineConfig) -> Result<PipelineResult> {
    check_data(data, cfg)?;
    let mut run = Run::new();
    let m = cfg.effective_m(data.len());
    if m == cfg.k {
        run.flags.push(format!("m_equals_k: {m}"));
    }
    let (points, embedded) = prepare(data, cfg, &mut run)?;
    let pre = precluster(&points, m, cfg, &mut run, "precluster")?;
    let spec = cfg.effective_kernel();
    let (embedding, centroid_clustering) = if m == 1 {
        single_point(cfg)
    } else {
        let w = run.stage("affinity", || build_affinity(&pre.centroids, &spec), square)?;
        spectral_tail(&w, cfg, &mut run)?
    };
    // Each point takes its pre-cluster's label.
    let labels: Vec<usize> = pre.labels.iter().map(|&g| centroid_clustering.labels[g]).collect();
    let centroids = spectral_centroids(&points, &labels, cfg, metric_of(cfg))?;
    let clustering = Clustering { labels, centroids, ..centroid_clustering };
    Ok(PipelineResult {
        algorithm: cfg.algorithm,
        clustering,
        embedding,
        embedded_points: embedded,
        timings: run.timings,
        flags: run.flags,
        m: Some(m),
    })
}

/// Per-cluster centers of the broadcast labels, in the data's geometry.
fn spectral_centroids(points: &[Vec<f64>], labels: &[usize], cfg: &PipelineConfig, metric: Metric) -> Result<Vec<Vec<f64>>> {
    (0..cfg.k)
        .map(|c| {
            let members: Vec<&[f64]> = points
                .iter()
                .zip(labels)
                .filter(|(_, l)| **l == c)
                .map(|(p, _)| p.as_slice())
                .collect();
            if members.is_empty() {
                Ok(Vec::new())
            } else {
                metric.centroid(&members, &cfg.geometry)
            }
        })
        .collect()
}

/// Fast hyperbolic spectral clustering: Poincaré k-means into `m`
/// pre-clusters, HSCA steps 2-9 on their centroids, and each point inherits
/// its pre-cluster's label.
pub fn run_fhsc(data: &EuclideanDataset, cfg: &PipelineConfig) -> Result<PipelineResult> {
    fast(data, &with_algorithm(cfg, Algorithm::Fhsc))
}

/// Euclidean mirror of [`run_fhsc`].
pub fn run_fesc(data: &EuclideanDataset, cfg: &PipelineConfig) -> Result<PipelineResult> {
    fast(data, &with_algorithm(cfg, Algorithm::Fesc))
}

/// Dispatches on `cfg.algorithm`.
pub fn run(data: &EuclideanDataset, cfg: &PipelineConfig) -> Result<PipelineResult> {
    match cfg.algorithm {
        Algorithm::Hsca => run_hsca(data, cfg),
        Algorithm::Esca => run_esca(data, cfg),
        Algorithm::Hlsck => run_hlsck(data, cfg),
        Algorithm::Elsck => run_elsck(data, cfg),
        Algorithm::Fhsc => run_fhsc(data, cfg),
        Algorithm::Fesc => run_fesc(data, cfg),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataio::generate_blobs;
    use crate::metrics::ari;

    /// σ = 3 suits both geometries here: disc images of these blobs sit near
    /// radius 0.98, where within-blob geodesic gaps are about 2.6.
    fn cfg(alg: Algorithm, k: usize) -> PipelineConfig {
        PipelineConfig::new(alg, KernelKind::GaussianHyperbolic, 3.0, k).unwrap()
    }

    /// 30 points, two blobs of radius 0.1 whose centers are 1.0 apart.
    fn two_blobs() -> EuclideanDataset {
        generate_blobs(15, &[vec![-0.5, 0.2], vec![0.5, -0.2]], 0.1 / 3.0, 11).unwrap()
    }

    /// Construction-aware oracle: nearest blob center.
    fn nearest_center(ds: &EuclideanDataset) -> Vec<usize> {
        ds.points
            .iter()
            .map(|p| {
                let d0 = (p[0] + 0.5).powi(2) + (p[1] - 0.2).powi(2);
                let d1 = (p[0] - 0.5).powi(2) + (p[1] + 0.2).powi(2);
                usize::from(d1 < d0)
            })
            .collect()
    }

    #[test]
    fn coincident_groups() {
        let mut pts = vec![vec![0.6, 0.0]; 5];
        pts.extend(vec![vec![-0.6, 0.0]; 5]);
        let truth: Vec<usize> = (0..10).map(|i| i / 5).collect();
        let ds = EuclideanDataset::new("c", pts, Some(truth.clone())).unwrap();
        for alg in [Algorithm::Hsca, Algorithm::Esca] {
            let r = run(&ds, &cfg(alg, 2)).unwrap();
            assert_eq!(ari(r.labels(), &truth).unwrap(), 1.0, "{alg}");
        }
    }

    #[test]
    fn n_equals_k() {
        let ds = EuclideanDataset::new("n", vec![vec![0.1, 0.0], vec![0.0, 0.5], vec![-0.4, -0.3]], None).unwrap();
        for alg in [Algorithm::Hsca, Algorithm::Esca] {
            let mut l = run(&ds, &cfg(alg, 3)).unwrap().clustering.labels;
            l.sort();
            assert_eq!(l, vec![0, 1, 2]);
        }
    }

    #[test]
    fn two_blobs_match_nearest_center() {
        let ds = two_blobs();
        let oracle = nearest_center(&ds);
        assert_eq!(ds.labels.as_ref().unwrap(), &oracle);
        for alg in Algorithm::ALL {
            let mut c = cfg(alg, 2);
            if alg.uses_m() {
                c.m = Some(10);
            }
            let r = run(&ds, &c).unwrap();
            assert_eq!(ari(r.labels(), &oracle).unwrap(), 1.0, "{alg}");
        }
    }

    #[test]
    fn landmark_paired_with_full() {
        let ds = two_blobs();
        let truth = ds.labels.clone().unwrap();
        for (lm, full) in [(Algorithm::Hlsck, Algorithm::Hsca), (Algorithm::Elsck, Algorithm::Esca)] {
            let a = ari(run(&ds, &cfg(full, 2)).unwrap().labels(), &truth).unwrap();
            let r = run(&ds, &cfg(lm, 2).with_m(30)).unwrap();
            let b = ari(r.labels(), &truth).unwrap();
            assert!((a - b).abs() <= 0.1, "{lm}: {b} vs {a}");
            // m = k: landmarks sit on the blob centers
            let r = run(&ds, &cfg(lm, 2).with_m(2)).unwrap();
            assert_eq!(ari(r.labels(), &truth).unwrap(), 1.0);
            assert!(r.flags.iter().any(|f| f.starts_with("m_equals_k")));
        }
    }

    #[test]
    fn landmark_f_is_psd() {
        let ds = generate_blobs(20, &[vec![0.0, 0.0], vec![1.0, 1.0], vec![-1.0, 1.0]], 0.3, 5).unwrap();
        let c = cfg(Algorithm::Hlsck, 3).with_m(12);
        let hp: Vec<Vec<f64>> = ds.points.iter().map(|p| embed_to_disc(p, 0.01).unwrap().into_coords()).collect();
        let mut run_ = Run::new();
        let pre = precluster(&hp, 12, &c, &mut run_, "landmarks").unwrap();
        let v = build_landmark_affinity(&pre.centroids, &hp, &c.effective_kernel()).unwrap();
        let f = landmark_normalize(&v).unwrap();
        let eig = SymmetricEigen::new(f.entries().clone());
        assert!(eig.eigenvalues.iter().all(|&l| l >= -1e-10));
    }

    #[test]
    fn fast_variants_reduce_to_full() {
        let ds = two_blobs();
        for (fast_alg, full) in [(Algorithm::Fhsc, Algorithm::Hsca), (Algorithm::Fesc, Algorithm::Esca)] {
            let a = run(&ds, &cfg(full, 2)).unwrap();
            let b = run(&ds, &cfg(fast_alg, 2).with_m(30)).unwrap();
            assert_eq!(ari(a.labels(), b.labels()).unwrap(), 1.0, "{fast_alg}");
            let eig = b.timings.iter().find(|t| t.stage == "eigen").unwrap();
            assert_eq!(eig.rows, 30);
            let small = run(&ds, &cfg(fast_alg, 2).with_m(6)).unwrap();
            let aff = small.timings.iter().find(|t| t.stage == "affinity").unwrap();
            assert_eq!((aff.rows, aff.cols), (6, 6));
            let two = run(&ds, &cfg(fast_alg, 2).with_m(2)).unwrap();
            assert_eq!(ari(two.labels(), ds.labels.as_ref().unwrap()).unwrap(), 1.0);
        }
    }

    #[test]
    fn fast_landmark_mode() {
        let ds = two_blobs();
        for alg in [Algorithm::Hlsck, Algorithm::Elsck] {
            let mut c = cfg(alg, 2).with_m(8);
            c.fast_landmarks = true;
            let r = run(&ds, &c).unwrap();
            assert!(r.timings.iter().any(|t| t.stage == "svd"));
            assert_eq!(ari(r.labels(), ds.labels.as_ref().unwrap()).unwrap(), 1.0);
        }
    }

    #[test]
    fn stages_are_recorded_in_order() {
        let ds = two_blobs();
        let names = |alg| -> Vec<String> {
            let mut c = cfg(alg, 2);
            c.m = Some(10);
            run(&ds, &c).unwrap().timings.into_iter().map(|t| t.stage).collect()
        };
        let s = |v: &[&str]| v.iter().map(|x| x.to_string()).collect::<Vec<_>>();
        let tail = ["modified_affinity", "laplacian", "eigen", "normalize", "kmeans"];
        assert_eq!(names(Algorithm::Hsca), s(&[&["embed", "affinity"][..], &tail].concat()));
        assert_eq!(names(Algorithm::Esca), s(&[&["affinity"][..], &tail].concat()));
        assert_eq!(
            names(Algorithm::Hlsck),
            s(&[&["embed", "landmarks", "landmark_affinity", "landmark_normalize"][..], &tail].concat())
        );
        assert_eq!(names(Algorithm::Fesc), s(&[&["precluster", "affinity"][..], &tail].concat()));
    }

    #[test]
    fn permutation_equivariance() {
        // Blobs away from the origin: the embedding is radial, so a blob
        // around 0 would be scattered over every direction of the disc.
        let ds = generate_blobs(10, &[vec![2.0, 1.0], vec![3.0, -2.0], vec![-1.0, 3.0]], 0.2, 3).unwrap();
        let n = ds.len();
        let perm: Vec<usize> = (0..n).map(|i| (i * 7 + 3) % n).collect();
        let mut pds = ds.clone();
        pds.points = perm.iter().map(|&i| ds.points[i].clone()).collect();
        for alg in Algorithm::ALL {
            let c = PipelineConfig { kernel: KernelSpec { sigma: 10.0, ..cfg(alg, 3).kernel }, ..cfg(alg, 3) }.with_m(9);
            let a = run(&ds, &c).unwrap().clustering.labels;
            let b = run(&pds, &c).unwrap().clustering.labels;
            let a_perm: Vec<usize> = perm.iter().map(|&i| a[i]).collect();
            assert_eq!(ari(&a_perm, &b).unwrap(), 1.0, "{alg}");
        }
    }

    #[test]
    fn scale_robustness() {
        // Scaling moves disc images radially and adds about 2·ln(s) to every
        // large geodesic distance; a wide enough kernel keeps the labels.
        let ds = two_blobs();
        let c = PipelineConfig::new(Algorithm::Hsca, KernelKind::GaussianHyperbolic, 10.0, 2).unwrap();
        let base = run(&ds, &c).unwrap();
        let base_norms: Vec<f64> = base.embedded_points.as_ref().unwrap().iter().map(HPoint::norm).collect();
        for s in [0.05, 0.5, 2.0, 10.0, 100.0] {
            let mut scaled = ds.clone();
            scaled.points.iter_mut().flatten().for_each(|v| *v *= s);
            let r = run(&scaled, &c).unwrap();
            assert_eq!(ari(r.labels(), base.labels()).unwrap(), 1.0, "scale {s}");
            let norms = r.embedded_points.as_ref().unwrap().iter().map(HPoint::norm);
            assert!(norms.zip(&base_norms).all(|(a, b)| (a > *b) == (s > 1.0)));
        }
    }

    #[test]
    fn components_recovered_exactly() {
        // Three groups whose mutual gaps exceed epsilon (in each geometry's
        // units), so W has three blocks.
        let ds = generate_blobs(8, &[vec![0.4, 0.0], vec![-0.4, 0.3], vec![0.0, -0.45]], 0.01, 4).unwrap();
        for (alg, eps) in [(Algorithm::Hsca, 5.0), (Algorithm::Esca, 0.3)] {
            let c = cfg(alg, 3).with_epsilon(eps);
            let hp: Vec<Vec<f64>> = if alg.is_hyperbolic() {
                ds.points.iter().map(|p| embed_to_disc(p, 0.01).unwrap().into_coords()).collect()
            } else {
                ds.points.clone()
            };
            let w = build_affinity(&hp, &c.effective_kernel()).unwrap();
            let labels = ds.labels.as_ref().unwrap();
            for i in 0..ds.len() {
                for j in 0..ds.len() {
                    assert_eq!(w.entries()[(i, j)] > 0.0, labels[i] == labels[j], "{alg} ({i},{j})");
                }
            }
            let r = run(&ds, &c).unwrap();
            assert_eq!(ari(r.labels(), labels).unwrap(), 1.0, "{alg}");
        }
    }

    #[test]
    fn config_errors_name_the_stage() {
        let ds = two_blobs();
        let e = run(&ds, &cfg(Algorithm::Hsca, 31)).unwrap_err();
        assert_eq!(e.stage(), Some("config"));
        let e = run(&ds, &cfg(Algorithm::Fhsc, 3).with_m(2)).unwrap_err();
        assert!(matches!(e.root(), Error::InvalidInput(_)));
    }

    #[test]
    fn isolated_points_surface_from_landmarks() {
        // Two landmarks for three far-apart groups: one landmark lands between
        // groups, leaving points beyond the cutoff of both.
        let mut pts: Vec<Vec<f64>> = (0..10).map(|i| vec![0.01 * i as f64, 0.0]).collect();
        pts.push(vec![-50.0, 0.0]);
        pts.push(vec![50.0, 0.0]);
        let ds = EuclideanDataset::new("iso", pts, None).unwrap();
        let c = cfg(Algorithm::Elsck, 2).with_m(2).with_epsilon(0.05);
        match run(&ds, &c) {
            Err(e) => {
                assert!(e.is_numerical(), "{e}");
                assert_eq!(e.stage(), Some("landmark_normalize"));
            }
            Ok(r) => panic!("expected isolated points, got {:?}", r.labels()),
        }
    }

    #[test]
    fn deterministic() {
        let ds = two_blobs();
        for alg in Algorithm::ALL {
            let mut c = cfg(alg, 2);
            c.m = Some(10);
            assert_eq!(run(&ds, &c).unwrap().clustering, run(&ds, &c).unwrap().clustering);
        }
    }

    #[test]
    fn algorithm_names_parse() {
        for a in Algorithm::ALL {
            assert_eq!(a.name().parse::<Algorithm>().unwrap(), a);
            assert_eq!(serde_json::to_string(&a).unwrap(), format!("\"{}\"", a.name()));
        }
        assert_eq!("HLSCK".parse::<Algorithm>().unwrap(), Algorithm::Hlsck);
        assert!("kmeans".parse::<Algorithm>().is_err());
    }
}
