//! The `hsc` batch tool. [`run`] parses arguments, executes one subcommand
//! and returns the process exit code; output streams are injected so the
//! commands can be driven in-process.
//!
//! Exit codes: 0 success, 1 consistency check failed, 2 invalid flags,
//! 3 data errors, 4 numerical degeneracy.

use std::ffi::OsString;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use rayon::prelude::*;
use serde::Serialize;

use crate::affinity::{KernelKind, KernelSpec};
use crate::clustering::Metric;
use crate::consistency::{self, ConsistencyReport, SamplingDistribution};
use crate::dataio::{self, EuclideanDataset};
use crate::error::Error;
use crate::geometry::embed_to_disc;
use crate::metrics::{self, EvaluationReport};
use crate::pipelines::{self, Algorithm, PipelineConfig, PipelineResult};
use crate::plot;

pub const SCHEMA_VERSION: u32 = 1;
pub const EXIT_OK: i32 = 0;
pub const EXIT_CHECK_FAILED: i32 = 1;
pub const EXIT_USAGE: i32 = 2;
pub const EXIT_DATA: i32 = 3;
pub const EXIT_NUMERICAL: i32 = 4;

/// Grid of kernel hyperparameters `h` (`1/σ²` Gaussian, `1/(2σ)` Poisson)
/// swept by the ablation suite.
pub const ABLATION_GRID: [f64; 10] = [0.001, 0.01, 0.05, 0.1, 0.5, 1.0, 5.0, 10.0, 50.0, 100.0];

#[derive(Debug, Parser)]
#[command(name = "hsc", version, about = "Hyperbolic spectral clustering toolkit")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Cluster a CSV dataset and write labels and a run report.
    Cluster(ClusterArgs),
    /// Score a labeling with extrinsic and intrinsic metrics.
    Evaluate(EvaluateArgs),
    /// Run a benchmark suite over every CSV in a directory.
    Bench(BenchArgs),
    /// Run one numerical consistency check.
    Consistency(ConsistencyArgs),
    /// Write a synthetic dataset.
    Generate(GenerateArgs),
    /// Draw a labeled scatter plot as SVG.
    Plot(PlotArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Profile {
    Gaussian,
    Poisson,
}

impl Profile {
    fn kind(self) -> KernelKind {
        match self {
            Profile::Gaussian => KernelKind::GaussianHyperbolic,
            Profile::Poisson => KernelKind::PoissonHyperbolic,
        }
    }
}

fn parse_algorithm(s: &str) -> Result<Algorithm, String> {
    s.parse().map_err(|e: Error| e.to_string())
}

#[derive(Debug, Args)]
struct ClusterArgs {
    #[arg(long)]
    input: PathBuf,
    #[arg(long, value_parser = parse_algorithm)]
    algo: Algorithm,
    #[arg(long, value_enum)]
    kernel: Profile,
    #[arg(long)]
    k: usize,
    #[arg(long, default_value_t = 0.1)]
    sigma: f64,
    /// Bandwidth of the modified affinity; defaults to --sigma.
    #[arg(long)]
    sigma2: Option<f64>,
    #[arg(long, default_value_t = f64::INFINITY)]
    epsilon: f64,
    #[arg(long, default_value_t = 0.01)]
    delta: f64,
    #[arg(long)]
    m: Option<usize>,
    #[arg(long, default_value_t = 42)]
    seed: u64,
    #[arg(long)]
    labels_out: Option<PathBuf>,
    /// Where to write the report; printed to stdout when absent.
    #[arg(long)]
    report_out: Option<PathBuf>,
    /// Name of the ground-truth column, if not `label`.
    #[arg(long)]
    label_column: Option<String>,
    /// Z-score every feature before clustering.
    #[arg(long)]
    zscore: bool,
    /// Landmark variants only: embed with singular vectors of Z.
    #[arg(long)]
    fast_landmarks: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum SpaceArg {
    Euclidean,
    Hyperbolic,
}

#[derive(Debug, Args)]
struct EvaluateArgs {
    #[arg(long)]
    points: PathBuf,
    #[arg(long)]
    labels: PathBuf,
    #[arg(long)]
    truth: Option<PathBuf>,
    #[arg(long, value_enum, default_value = "euclidean")]
    space: SpaceArg,
    /// Margin of the disc embedding used for `--space hyperbolic`.
    #[arg(long, default_value_t = 0.01)]
    delta: f64,
    /// Points are already disc coordinates; skip the embedding.
    #[arg(long)]
    embedded: bool,
    #[arg(long)]
    report_out: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Suite {
    Extrinsic,
    Intrinsic,
    Ablation,
}

#[derive(Debug, Args)]
struct BenchArgs {
    #[arg(long)]
    datasets_dir: PathBuf,
    #[arg(long, value_enum)]
    suite: Suite,
    #[arg(long, default_value = "bench-out")]
    out_dir: PathBuf,
    /// Dataset file stems to include; all CSVs when absent.
    #[arg(long, value_delimiter = ',')]
    datasets: Vec<String>,
    #[arg(long, value_delimiter = ',', value_parser = parse_algorithm)]
    algos: Vec<Algorithm>,
    #[arg(long, value_delimiter = ',', value_enum)]
    kernels: Vec<Profile>,
    #[arg(long, default_value_t = 0.1)]
    sigma: f64,
    #[arg(long, default_value_t = 42)]
    seed: u64,
    /// Number of clusters for datasets without ground truth.
    #[arg(long)]
    k: Option<usize>,
    #[arg(long)]
    m: Option<usize>,
    /// Random subsample size applied to larger datasets.
    #[arg(long)]
    subsample: Option<usize>,
    #[arg(long)]
    zscore: bool,
    /// Ablation grid of `h`; defaults to the standard ten values.
    #[arg(long, value_delimiter = ',')]
    grid: Vec<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Check {
    Lemma51,
    Lemma52,
    Lemma53,
    Lemma54,
    Rate,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum DistArg {
    BlobMixture,
    UniformH,
}

#[derive(Debug, Args)]
struct ConsistencyArgs {
    #[arg(long, value_enum)]
    check: Check,
    #[arg(long, default_value_t = 42)]
    seed: u64,
    #[arg(long, default_value_t = 2)]
    dim: usize,
    /// Kernel rate `a`.
    #[arg(long, default_value_t = 1.0)]
    a: f64,
    #[arg(long, value_enum, default_value = "gaussian")]
    kernel: Profile,
    /// Monte Carlo draws (pairs for lemma51).
    #[arg(long)]
    samples: Option<u64>,
    #[arg(long, default_value_t = 256)]
    grid_size: usize,
    /// Half-width of the square sampling grid for the Fourier checks.
    #[arg(long, default_value_t = 1.2)]
    extent: f64,
    #[arg(long, default_value_t = 16)]
    rotations: usize,
    #[arg(long, value_delimiter = ',', default_values_t = [100usize, 200, 400, 800, 1600])]
    ns: Vec<usize>,
    #[arg(long, default_value_t = 10)]
    trials: usize,
    #[arg(long, value_enum, default_value = "blob-mixture")]
    distribution: DistArg,
    #[arg(long)]
    report_out: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct GenerateArgs {
    #[command(subcommand)]
    kind: GenerateKind,
}

#[derive(Debug, Subcommand)]
enum GenerateKind {
    /// Isotropic Gaussian blobs.
    Blobs {
        #[arg(long)]
        output: PathBuf,
        #[arg(long, default_value_t = 100)]
        n_per_cluster: usize,
        /// Centers as `x,y;x,y;...`.
        #[arg(long, default_value = "2,1;3,-2;-1,3")]
        centers: String,
        #[arg(long, default_value_t = 0.3)]
        spread: f64,
        #[arg(long, default_value_t = 42)]
        seed: u64,
    },
    /// Blobs at the leaves of a random tree, with geometrically shrinking steps.
    Tree {
        #[arg(long)]
        output: PathBuf,
        #[arg(long, default_value_t = 3)]
        depth: usize,
        #[arg(long, default_value_t = 2)]
        branching: usize,
        #[arg(long, default_value_t = 0.3)]
        scale_decay: f64,
        #[arg(long, default_value_t = 30)]
        n_leaf: usize,
        #[arg(long, default_value_t = 2)]
        dim: usize,
        #[arg(long, default_value_t = 42)]
        seed: u64,
    },
}

#[derive(Debug, Args)]
struct PlotArgs {
    #[arg(long)]
    points: PathBuf,
    #[arg(long)]
    labels: PathBuf,
    #[arg(long)]
    output: PathBuf,
    #[arg(long)]
    title: Option<String>,
}

/// A failed command: exit code plus the structured stderr message.
#[derive(Debug, Clone, PartialEq)]
pub struct CliError {
    pub code: i32,
    pub message: String,
    pub stage: Option<String>,
    pub index: Option<usize>,
    pub remedy: Option<String>,
}

impl CliError {
    fn usage(message: impl Into<String>) -> Self {
        CliError { code: EXIT_USAGE, message: message.into(), stage: None, index: None, remedy: Some("see `hsc <command> --help`".into()) }
    }

    fn data(message: impl Into<String>) -> Self {
        CliError { code: EXIT_DATA, message: message.into(), stage: None, index: None, remedy: None }
    }

    fn render(&self) -> String {
        let mut s = format!("error: {}\n", self.message);
        if let Some(stage) = &self.stage {
            s += &format!("  stage: {stage}\n");
        }
        if let Some(i) = self.index {
            s += &format!("  index: {i}\n");
        }
        if let Some(r) = &self.remedy {
            s += &format!("  remedy: {r}\n");
        }
        s
    }
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        let stage = e.stage();
        let root = e.root();
        let (index, remedy) = match root {
            Error::IsolatedVertex { index, .. } => (Some(*index), Some("increase --sigma or --epsilon so every point has a neighbor")),
            Error::IsolatedPoints { indices } => (indices.first().copied(), Some("increase --epsilon or --m")),
            Error::Degenerate(_) => (None, Some("remove duplicate points or try another --sigma")),
            Error::Parse { row, .. } => (Some(*row), Some("fix or remove the offending cell")),
            _ => (None, None),
        };
        let code = match (root, stage) {
            (_, Some("config")) => EXIT_USAGE,
            (Error::Io(_) | Error::Csv(_) | Error::Parse { .. } | Error::Json(_), _) => EXIT_DATA,
            (_, Some("input")) => EXIT_DATA,
            _ if e.is_numerical() => EXIT_NUMERICAL,
            (_, Some(_)) => EXIT_NUMERICAL,
            _ => EXIT_DATA,
        };
        let remedy = match (code, remedy) {
            (_, Some(r)) => Some(r.to_string()),
            (EXIT_USAGE, None) => Some("see `hsc <command> --help`".into()),
            _ => None,
        };
        CliError { code, message: root.to_string(), stage: stage.map(str::to_string), index, remedy }
    }
}

type CliResult<T> = std::result::Result<T, CliError>;

/// One pipeline stage in a report. Wall-clock time is not recorded so that
/// reports are byte-identical across reruns.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ReportTiming {
    pub stage: String,
    pub rows: usize,
    pub cols: usize,
    pub millis: Option<f64>,
}

/// How the bench ablation suite picked `sigma`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SigmaSearch {
    pub criterion: String,
    pub grid_h: Vec<f64>,
    pub chosen_h: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunReport {
    pub schema_version: u32,
    pub tool_version: String,
    pub dataset: String,
    pub n: usize,
    pub d: usize,
    pub algorithm: Algorithm,
    pub kernel: KernelKind,
    pub sigma: f64,
    pub sigma2: f64,
    /// `null` for an infinite cutoff.
    pub epsilon: Option<f64>,
    pub k: usize,
    pub m: Option<usize>,
    pub delta: f64,
    pub seed: u64,
    pub zscore: bool,
    pub sigma_search: Option<SigmaSearch>,
    pub metrics: Option<EvaluationReport>,
    pub timings: Vec<ReportTiming>,
    pub eigenvalues: Vec<f64>,
    pub flags: Vec<String>,
    pub error: Option<String>,
}

impl RunReport {
    fn skeleton(data: &EuclideanDataset, cfg: &PipelineConfig, zscore: bool) -> Self {
        let kernel = cfg.effective_kernel();
        RunReport {
            schema_version: SCHEMA_VERSION,
            tool_version: env!("CARGO_PKG_VERSION").to_string(),
            dataset: data.name.clone(),
            n: data.len(),
            d: data.dim(),
            algorithm: cfg.algorithm,
            kernel: kernel.kind,
            sigma: kernel.sigma,
            sigma2: cfg.effective_sigma2(),
            epsilon: kernel.epsilon.is_finite().then_some(kernel.epsilon),
            k: cfg.k,
            m: cfg.algorithm.uses_m().then(|| cfg.effective_m(data.len())),
            delta: cfg.delta,
            seed: cfg.seed,
            zscore,
            sigma_search: None,
            metrics: None,
            timings: Vec::new(),
            eigenvalues: Vec::new(),
            flags: Vec::new(),
            error: None,
        }
    }
}

/// Scores a pipeline result. Hyperbolic algorithms are scored in the disc on
/// their embedded points, Euclidean ones on the raw points.
pub fn evaluate_result(data: &EuclideanDataset, result: &PipelineResult) -> crate::Result<EvaluationReport> {
    match &result.embedded_points {
        Some(e) => {
            let pts: Vec<Vec<f64>> = e.iter().map(|p| p.coords().to_vec()).collect();
            metrics::evaluate(&pts, result.labels(), data.labels.as_deref(), Metric::PoincareDisc)
        }
        None => metrics::evaluate(&data.points, result.labels(), data.labels.as_deref(), Metric::Euclidean),
    }
}

/// Runs one pipeline and packages the outcome. Pipeline failures are
/// returned as errors; metric failures cannot occur past validation.
pub fn cluster_dataset(data: &EuclideanDataset, cfg: &PipelineConfig, zscore: bool) -> crate::Result<(RunReport, PipelineResult)> {
    let result = pipelines::run(data, cfg)?;
    let mut report = RunReport::skeleton(data, cfg, zscore);
    report.metrics = Some(evaluate_result(data, &result)?);
    report.timings = result
        .timings
        .iter()
        .map(|t| ReportTiming { stage: t.stage.clone(), rows: t.rows, cols: t.cols, millis: None })
        .collect();
    report.eigenvalues = result.embedding.eigenvalues.to_vec();
    report.flags = result.flags.clone();
    Ok((report, result))
}

fn to_json<T: Serialize>(v: &T) -> String {
    let mut s = serde_json::to_string_pretty(v).expect("reports serialize");
    s.push('\n');
    s
}

fn ensure_parent(path: &Path) -> CliResult<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(|e| CliError::data(format!("{}: {e}", dir.display())))?;
    }
    Ok(())
}

fn write_file(path: &Path, contents: &str) -> CliResult<()> {
    ensure_parent(path)?;
    fs::write(path, contents).map_err(|e| CliError::data(format!("{}: {e}", path.display())))
}

fn cmd_cluster(a: &ClusterArgs, out: &mut dyn Write, err: &mut dyn Write) -> CliResult<i32> {
    let mut cfg = PipelineConfig::new(a.algo, a.kernel.kind(), a.sigma, a.k)
        .and_then(|c| {
            let mut c = c.with_seed(a.seed);
            c.kernel = KernelSpec::new(c.kernel.kind, a.sigma, a.epsilon)?;
            Ok(c)
        })
        .map_err(|e| CliError::usage(e.to_string()))?;
    if !(a.delta > 0.0 && a.delta.is_finite()) {
        return Err(CliError::usage(format!("--delta must be positive and finite, got {}", a.delta)));
    }
    if let Some(s2) = a.sigma2 {
        if !(s2 > 0.0 && s2.is_finite()) {
            return Err(CliError::usage(format!("--sigma2 must be positive and finite, got {s2}")));
        }
    }
    cfg.delta = a.delta;
    cfg.sigma2 = a.sigma2;
    cfg.m = a.m;
    cfg.fast_landmarks = a.fast_landmarks;

    let mut data = dataio::load_csv(&a.input, a.label_column.as_deref())?;
    if a.zscore {
        data = data.standardized();
    }
    let (report, result) = cluster_dataset(&data, &cfg, a.zscore)?;
    for t in &result.timings {
        let _ = writeln!(err, "timing: stage={} rows={} cols={} ms={:.3}", t.stage, t.rows, t.cols, t.millis);
    }
    if let Some(p) = &a.labels_out {
        ensure_parent(p)?;
        dataio::save_labels(p, result.labels())?;
    }
    let json = to_json(&report);
    match &a.report_out {
        Some(p) => write_file(p, &json)?,
        None => out.write_all(json.as_bytes()).map_err(|e| CliError::data(e.to_string()))?,
    }
    Ok(EXIT_OK)
}

#[derive(Serialize)]
struct EvaluationOutput<'a> {
    schema_version: u32,
    #[serde(flatten)]
    report: &'a EvaluationReport,
}

fn cmd_evaluate(a: &EvaluateArgs, out: &mut dyn Write) -> CliResult<i32> {
    let data = dataio::load_csv(&a.points, None)?;
    let labels = dataio::load_labels(&a.labels)?;
    let truth = a.truth.as_ref().map(dataio::load_labels).transpose()?;
    if labels.len() != data.len() {
        return Err(CliError::data(format!("{} points but {} labels", data.len(), labels.len())));
    }
    if let Some(t) = &truth {
        if t.len() != data.len() {
            return Err(CliError::data(format!("{} points but {} truth labels", data.len(), t.len())));
        }
    }
    let (points, space) = match a.space {
        SpaceArg::Euclidean => (data.points, Metric::Euclidean),
        SpaceArg::Hyperbolic if a.embedded => (data.points, Metric::PoincareDisc),
        SpaceArg::Hyperbolic => {
            if !(a.delta > 0.0 && a.delta.is_finite()) {
                return Err(CliError::usage(format!("--delta must be positive and finite, got {}", a.delta)));
            }
            let pts = data
                .points
                .iter()
                .map(|p| embed_to_disc(p, a.delta).map(|h| h.into_coords()))
                .collect::<crate::Result<Vec<_>>>()?;
            (pts, Metric::PoincareDisc)
        }
    };
    let report = metrics::evaluate(&points, &labels, truth.as_deref(), space)?;
    let json = to_json(&EvaluationOutput { schema_version: SCHEMA_VERSION, report: &report });
    out.write_all(json.as_bytes()).map_err(|e| CliError::data(e.to_string()))?;
    if let Some(p) = &a.report_out {
        write_file(p, &json)?;
    }
    Ok(EXIT_OK)
}

#[derive(Serialize)]
struct ConsistencyOutput<'a> {
    schema_version: u32,
    #[serde(flatten)]
    report: &'a ConsistencyReport,
}

fn cmd_consistency(a: &ConsistencyArgs, out: &mut dyn Write) -> CliResult<i32> {
    let result = match a.check {
        Check::Lemma51 => consistency::check_kernel_domination(a.dim, a.samples.unwrap_or(1_000_000), a.a, a.kernel.kind(), a.seed),
        Check::Lemma52 => consistency::check_l1_bound(a.dim, a.samples.unwrap_or(1_000_000), a.a, a.seed),
        Check::Lemma53 => consistency::check_radial_ft(a.grid_size, a.extent, a.a, a.rotations, a.seed),
        Check::Lemma54 => consistency::check_ft_decay(a.grid_size, a.extent, a.a, a.seed),
        Check::Rate => {
            let dist = match a.distribution {
                DistArg::BlobMixture => SamplingDistribution::BlobMixture,
                DistArg::UniformH => SamplingDistribution::UniformH,
            };
            consistency::check_convergence_rate(&a.ns, a.trials, dist, a.seed)
        }
    };
    let report = result.map_err(|e| match e.root() {
        Error::InvalidInput(m) => CliError::usage(m.clone()),
        _ => CliError::from(e),
    })?;
    let json = to_json(&ConsistencyOutput { schema_version: SCHEMA_VERSION, report: &report });
    out.write_all(json.as_bytes()).map_err(|e| CliError::data(e.to_string()))?;
    if let Some(p) = &a.report_out {
        write_file(p, &json)?;
    }
    Ok(if report.passed { EXIT_OK } else { EXIT_CHECK_FAILED })
}

fn parse_centers(s: &str) -> CliResult<Vec<Vec<f64>>> {
    s.split(';')
        .map(|c| {
            c.split(',')
                .map(|v| v.trim().parse::<f64>().map_err(|_| CliError::usage(format!("bad center coordinate `{v}`"))))
                .collect()
        })
        .collect()
}

fn cmd_generate(a: &GenerateArgs) -> CliResult<i32> {
    let usage = |e: Error| CliError::usage(e.to_string());
    match &a.kind {
        GenerateKind::Blobs { output, n_per_cluster, centers, spread, seed } => {
            let ds = dataio::generate_blobs(*n_per_cluster, &parse_centers(centers)?, *spread, *seed).map_err(usage)?;
            ensure_parent(output)?;
            dataio::save_csv(output, &ds)?;
        }
        GenerateKind::Tree { output, depth, branching, scale_decay, n_leaf, dim, seed } => {
            let ds = dataio::generate_tree_blobs_in(*dim, *depth, *branching, *scale_decay, *n_leaf, *seed).map_err(usage)?;
            ensure_parent(output)?;
            dataio::save_csv(output, &ds)?;
        }
    }
    Ok(EXIT_OK)
}

fn cmd_plot(a: &PlotArgs) -> CliResult<i32> {
    let data = dataio::load_csv(&a.points, None)?;
    let labels = dataio::load_labels(&a.labels)?;
    let title = a.title.clone().unwrap_or_else(|| data.name.clone());
    let svg = plot::scatter_svg(&data.points, &labels, &title).map_err(|e| CliError::data(e.to_string()))?;
    write_file(&a.output, &svg)?;
    Ok(EXIT_OK)
}

/// Row name in benchmark-table style, e.g. `HSCA(G)`.
pub fn cell_name(algo: Algorithm, kernel: KernelKind) -> String {
    format!("{}({})", algo.display_name(), if kernel.is_gaussian() { "G" } else { "P" })
}

/// Bandwidth with kernel hyperparameter `h`: `σ = 1/√h` (Gaussian) or `1/(2h)` (Poisson).
pub fn sigma_for_h(kernel: KernelKind, h: f64) -> crate::Result<f64> {
    Ok(KernelSpec::from_a(kernel, h, f64::INFINITY)?.sigma)
}

/// One point of an ablation curve.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CurvePoint {
    pub h: f64,
    pub sigma: f64,
    pub ari: Option<f64>,
    pub nmi: Option<f64>,
    pub silhouette: Option<f64>,
    pub error: Option<String>,
}

/// Sweeps `h` over `grid` and returns the curve plus the report of the best
/// run (highest ARI, or highest silhouette without ground truth; ties go to
/// the smaller `h`).
pub fn grid_search(
    data: &EuclideanDataset,
    base: &PipelineConfig,
    grid: &[f64],
    zscore: bool,
) -> crate::Result<(Vec<CurvePoint>, Option<RunReport>)> {
    let criterion = if data.labels.is_some() { "ari" } else { "silhouette" };
    let mut curve = Vec::with_capacity(grid.len());
    let mut best: Option<(f64, f64, RunReport)> = None;
    for &h in grid {
        let sigma = sigma_for_h(base.kernel.kind, h)?;
        let mut cfg = base.clone();
        cfg.kernel = KernelSpec::new(base.kernel.kind, sigma, base.kernel.epsilon)?;
        match cluster_dataset(data, &cfg, zscore) {
            Ok((report, _)) => {
                let m = report.metrics.as_ref().expect("set on success");
                let score = if criterion == "ari" { m.ari } else { m.silhouette };
                curve.push(CurvePoint { h, sigma, ari: m.ari, nmi: m.nmi, silhouette: m.silhouette, error: None });
                if let Some(s) = score {
                    if best.as_ref().is_none_or(|(b, _, _)| s > *b) {
                        best = Some((s, h, report));
                    }
                }
            }
            Err(e) => curve.push(CurvePoint { h, sigma, ari: None, nmi: None, silhouette: None, error: Some(e.to_string()) }),
        }
    }
    let best = best.map(|(_, chosen_h, mut r)| {
        r.sigma_search = Some(SigmaSearch { criterion: criterion.into(), grid_h: grid.to_vec(), chosen_h });
        r
    });
    Ok((curve, best))
}

struct Cell {
    dataset: String,
    algo: Algorithm,
    kernel: KernelKind,
    report: RunReport,
    curve: Vec<CurvePoint>,
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map(|x| format!("{x:.4}")).unwrap_or_else(|| "NA".into())
}

fn run_cell(data: &EuclideanDataset, algo: Algorithm, profile: Profile, a: &BenchArgs, k: usize, grid: &[f64]) -> Cell {
    let mut cfg = PipelineConfig::new(algo, profile.kind(), a.sigma, k).expect("flags validated").with_seed(a.seed);
    cfg.m = a.m;
    let kernel = cfg.kernel.kind;
    let mut failed = RunReport::skeleton(data, &cfg, a.zscore);
    let (report, curve) = if a.suite == Suite::Ablation {
        match grid_search(data, &cfg, grid, a.zscore) {
            Ok((curve, Some(r))) => (r, curve),
            Ok((curve, None)) => {
                failed.error = Some("no grid point produced a score".into());
                (failed, curve)
            }
            Err(e) => {
                failed.error = Some(e.to_string());
                (failed, Vec::new())
            }
        }
    } else {
        match cluster_dataset(data, &cfg, a.zscore) {
            Ok((r, _)) => (r, Vec::new()),
            Err(e) => {
                failed.error = Some(e.to_string());
                (failed, Vec::new())
            }
        }
    };
    Cell { dataset: data.name.clone(), algo, kernel, report, curve }
}

/// Benchmark table order: each Euclidean method above its
/// hyperbolic counterpart, Gaussian before Poisson.
fn row_order(algos: &[Algorithm], kernels: &[Profile]) -> Vec<(Algorithm, Profile)> {
    let pairs = [(Algorithm::Esca, Algorithm::Hsca), (Algorithm::Elsck, Algorithm::Hlsck), (Algorithm::Fesc, Algorithm::Fhsc)];
    let mut rows = Vec::new();
    for (e, h) in pairs {
        for p in [Profile::Gaussian, Profile::Poisson] {
            for alg in [e, h] {
                if algos.contains(&alg) && kernels.contains(&p) {
                    rows.push((alg, p));
                }
            }
        }
    }
    rows
}

fn cmd_bench(a: &BenchArgs, out: &mut dyn Write) -> CliResult<i32> {
    if !(a.sigma > 0.0 && a.sigma.is_finite()) {
        return Err(CliError::usage(format!("--sigma must be positive and finite, got {}", a.sigma)));
    }
    let grid: Vec<f64> = if a.grid.is_empty() { ABLATION_GRID.to_vec() } else { a.grid.clone() };
    if grid.iter().any(|h| !(*h > 0.0 && h.is_finite())) {
        return Err(CliError::usage("--grid values must be positive and finite"));
    }
    let algos: Vec<Algorithm> = if a.algos.is_empty() { Algorithm::ALL.to_vec() } else { a.algos.clone() };
    let kernels: Vec<Profile> = if a.kernels.is_empty() { vec![Profile::Gaussian, Profile::Poisson] } else { a.kernels.clone() };

    let entries = fs::read_dir(&a.datasets_dir).map_err(|e| CliError::data(format!("{}: {e}", a.datasets_dir.display())))?;
    let mut files: Vec<PathBuf> = entries
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|x| x == "csv"))
        .filter(|p| a.datasets.is_empty() || p.file_stem().is_some_and(|s| a.datasets.iter().any(|d| d.as_str() == s)))
        .collect();
    files.sort();
    if files.is_empty() {
        return Err(CliError::data(format!("no matching CSV files in {}", a.datasets_dir.display())));
    }
    let mut datasets = Vec::new();
    for f in &files {
        let mut ds = dataio::load_csv(f, None)?;
        if let Some(s) = a.subsample.filter(|s| *s < ds.len()) {
            ds = ds.subsample(s, a.seed);
        }
        if a.zscore {
            ds = ds.standardized();
        }
        let k = match (a.k, ds.k_true()) {
            (Some(k), _) | (None, Some(k)) => k,
            (None, None) => return Err(CliError::usage(format!("{} has no labels; pass --k", ds.name))),
        };
        datasets.push((ds, k));
    }

    let rows = row_order(&algos, &kernels);
    let jobs: Vec<(usize, Algorithm, Profile)> =
        (0..datasets.len()).flat_map(|d| rows.iter().map(move |&(alg, p)| (d, alg, p))).collect();
    let cells: Vec<Cell> = jobs
        .par_iter()
        .map(|&(d, alg, p)| run_cell(&datasets[d].0, alg, p, a, datasets[d].1, &grid))
        .collect();

    let reports_dir = a.out_dir.join("reports");
    for c in &cells {
        let file = format!("{}__{}__{}.json", c.dataset, c.algo.name(), c.kernel.profile());
        write_file(&reports_dir.join(file), &to_json(&c.report))?;
    }

    // summary table: one row per method, metric columns per dataset
    let names: Vec<&str> = datasets.iter().map(|(d, _)| d.name.as_str()).collect();
    let cols: &[&str] = match a.suite {
        Suite::Extrinsic => &["ARI", "NMI"],
        Suite::Intrinsic => &["Silhouette", "DB", "CH"],
        Suite::Ablation => &["ARI", "NMI", "h"],
    };
    let mut summary = String::from("method");
    for n in &names {
        for c in cols {
            summary += &format!(",{n} {c}");
        }
    }
    summary.push('\n');
    for &(alg, p) in &rows {
        summary += &cell_name(alg, p.kind());
        for n in &names {
            let cell = cells.iter().find(|c| c.dataset == *n && c.algo == alg && c.kernel.is_gaussian() == (p == Profile::Gaussian));
            let m = cell.and_then(|c| c.report.metrics.as_ref());
            for c in cols {
                let v = match *c {
                    "ARI" => m.and_then(|m| m.ari),
                    "NMI" => m.and_then(|m| m.nmi),
                    "Silhouette" => m.and_then(|m| m.silhouette),
                    "DB" => m.and_then(|m| m.davies_bouldin),
                    "CH" => m.and_then(|m| m.calinski_harabasz),
                    _ => cell.and_then(|c| c.report.sigma_search.as_ref()).map(|s| s.chosen_h),
                };
                summary += &format!(",{}", fmt_opt(v));
            }
        }
        summary.push('\n');
    }
    write_file(&a.out_dir.join("summary.csv"), &summary)?;

    if a.suite == Suite::Ablation {
        let mut curves = String::from("dataset,method,h,sigma,ari,nmi,silhouette,error\n");
        for c in &cells {
            for p in &c.curve {
                let e = p.error.as_deref().unwrap_or("").replace([',', '\n'], ";");
                curves += &format!(
                    "{},{},{},{},{},{},{},{}\n",
                    c.dataset,
                    cell_name(c.algo, c.kernel),
                    p.h,
                    p.sigma,
                    fmt_opt(p.ari),
                    fmt_opt(p.nmi),
                    fmt_opt(p.silhouette),
                    e
                );
            }
        }
        write_file(&a.out_dir.join("curves.csv"), &curves)?;
    }
    out.write_all(summary.as_bytes()).map_err(|e| CliError::data(e.to_string()))?;
    Ok(EXIT_OK)
}

/// Parses `args` (program name first), runs the command and returns the exit code.
pub fn run<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let text = e.render().to_string();
            return if e.use_stderr() {
                let _ = err.write_all(text.as_bytes());
                EXIT_USAGE
            } else {
                let _ = out.write_all(text.as_bytes());
                EXIT_OK
            };
        }
    };
    let result = match &cli.command {
        Command::Cluster(a) => cmd_cluster(a, out, err),
        Command::Evaluate(a) => cmd_evaluate(a, out),
        Command::Bench(a) => cmd_bench(a, out),
        Command::Consistency(a) => cmd_consistency(a, out),
        Command::Generate(a) => cmd_generate(a),
        Command::Plot(a) => cmd_plot(a),
    };
    match result {
        Ok(code) => code,
        Err(e) => {
            let _ = err.write_all(e.render().as_bytes());
            e.code
        }
    }
}

/// Entry point for the binary.
pub fn main() -> i32 {
    let stdout = std::io::stdout();
    let stderr = std::io::stderr();
    run(std::env::args_os(), &mut stdout.lock(), &mut stderr.lock())
}
