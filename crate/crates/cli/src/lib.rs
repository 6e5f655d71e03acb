//! Experiment orchestration behind the `rough-tails` binary: configuration,
//! the `simulate`, `functionals` and `report` commands, and their outputs.

use std::fs;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use rough_tails::functionals::{greedy_partition, KeyLemmaReport, PathAnalysis, SandwichReport, Window};
use rough_tails::simulate::{markov_group_euler_with, replicate_rng, sample_sigma_set};
use rough_tails::tails::{
    brownian_count_bound, brownian_laplace_check, fit_svg, small_time_exponent, survival_csv,
    tauberian_compare, CoshReport, CountBoundRow, FitSection, SmallTimeFit, TauberianReport,
    TheoremConfig, WindowPolicy,
};
use rough_tails::{
    AlgebraShape, DiffusionField, DiffusionSpec, DiscretePath, NormKind, NormSpec, SampleSet,
    SimConfig, TailReport,
};
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Process exit codes.
pub mod exit {
    pub const OK: i32 = 0;
    pub const CONFIG: i32 = 2;
    pub const ACCEPTANCE: i32 = 3;
    pub const IO: i32 = 4;
}

#[derive(Debug, Error)]
pub enum CliError {
    /// Invalid configuration, arguments or input data.
    #[error("{0}")]
    Config(String),
    #[error("{context}: {source}")]
    Io {
        context: String,
        #[source]
        source: std::io::Error,
    },
    /// A hard acceptance predicate failed; the report was still written.
    #[error("acceptance failure: {}", .failed.join(", "))]
    Acceptance { failed: Vec<String> },
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            Self::Config(_) => exit::CONFIG,
            Self::Io { .. } => exit::IO,
            Self::Acceptance { .. } => exit::ACCEPTANCE,
        }
    }

    /// Machine-readable form printed on stderr.
    pub fn to_json(&self) -> serde_json::Value {
        let kind = match self {
            Self::Config(_) => "config",
            Self::Io { .. } => "io",
            Self::Acceptance { .. } => "acceptance",
        };
        let mut v = serde_json::json!({
            "error": kind,
            "exit_code": self.exit_code(),
            "message": self.to_string(),
        });
        if let Self::Acceptance { failed } = self {
            v["failed"] = serde_json::json!(failed);
        }
        v
    }
}

fn config_err(e: impl std::fmt::Display) -> CliError {
    CliError::Config(e.to_string())
}

fn io_err(context: impl Into<String>) -> impl FnOnce(std::io::Error) -> CliError {
    let context = context.into();
    move |source| CliError::Io { context, source }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DiffusionSection {
    #[serde(default)]
    pub field: DiffusionField,
    #[serde(default = "one")]
    pub lambda: f64,
    #[serde(default)]
    pub label: String,
}

impl Default for DiffusionSection {
    fn default() -> Self {
        Self {
            field: DiffusionField::Identity,
            lambda: 1.0,
            label: String::new(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimulationSection {
    pub horizon: f64,
    pub n_steps: usize,
    #[serde(default)]
    pub x0: Vec<f64>,
}

/// Replicate counts; zero disables the corresponding study.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SampleCounts {
    /// Path CSVs written by `simulate`.
    #[serde(default)]
    pub paths: usize,
    /// Hitting times of the ball of radius `count_radius`.
    #[serde(default)]
    pub sigma: usize,
    /// Paths carrying a greedy count.
    #[serde(default)]
    pub count: usize,
    /// Paths carrying `M`, the sandwich and the key bound.
    #[serde(default)]
    pub m: usize,
    /// Paths of the report-only exact Heisenberg metric rerun.
    #[serde(default)]
    pub metric_swap: usize,
    /// One-dimensional hitting times for the closed-form Laplace check.
    #[serde(default)]
    pub cosh: usize,
    /// One-dimensional Brownian counts for the explicit count bound.
    #[serde(default)]
    pub count_1d: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub seed: u64,
    #[serde(default = "default_output_dir")]
    pub output_dir: PathBuf,
    pub shape: AlgebraShape,
    #[serde(default)]
    pub diffusion: DiffusionSection,
    pub simulation: SimulationSection,
    #[serde(default = "default_metric")]
    pub metric: NormKind,
    pub p: f64,
    /// Radius of the greedy count and of the hitting time.
    #[serde(default = "one")]
    pub count_radius: f64,
    /// Radii of the key bound on `M`.
    #[serde(default = "default_radii")]
    pub radii: Vec<f64>,
    #[serde(default)]
    pub lambda_grid: Vec<f64>,
    #[serde(default)]
    pub t_grid: Vec<f64>,
    #[serde(default = "default_cosh_lambdas")]
    pub cosh_lambdas: Vec<f64>,
    #[serde(default)]
    pub samples: SampleCounts,
    #[serde(default)]
    pub window: WindowPolicy,
}

fn one() -> f64 {
    1.0
}
fn default_output_dir() -> PathBuf {
    PathBuf::from("out")
}
fn default_metric() -> NormKind {
    NormKind::HomSym
}
fn default_radii() -> Vec<f64> {
    vec![0.5, 1.0, 2.0]
}
fn default_cosh_lambdas() -> Vec<f64> {
    vec![0.5, 1.0, 2.0, 5.0]
}

fn positive_increasing(name: &str, v: &[f64]) -> Result<(), CliError> {
    if v.iter().any(|x| !(*x > 0.0) || !x.is_finite()) || v.windows(2).any(|w| !(w[1] > w[0])) {
        return Err(CliError::Config(format!(
            "{name} must be positive and strictly increasing"
        )));
    }
    Ok(())
}

impl ExperimentConfig {
    pub fn from_toml_str(s: &str) -> Result<Self, CliError> {
        let cfg: Self = toml::from_str(s).map_err(config_err)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = fs::read_to_string(path).map_err(io_err(format!("reading {}", path.display())))?;
        Self::from_toml_str(&text)
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    pub fn validate(&self) -> Result<(), CliError> {
        NormSpec::new(self.metric, self.shape).map_err(config_err)?;
        self.diffusion_spec().validate().map_err(config_err)?;
        self.sim_config().validate().map_err(config_err)?;
        self.sim_config().start(self.shape).map_err(config_err)?;
        if !(self.p >= 1.0) || !self.p.is_finite() {
            return Err(CliError::Config(format!("p must be >= 1, got {}", self.p)));
        }
        if !(self.count_radius > 0.0) || !self.count_radius.is_finite() {
            return Err(CliError::Config("count_radius must be positive".into()));
        }
        if self.radii.iter().any(|r| !(*r > 0.0) || !r.is_finite()) {
            return Err(CliError::Config("radii must be positive".into()));
        }
        positive_increasing("lambda_grid", &self.lambda_grid)?;
        positive_increasing("t_grid", &self.t_grid)?;
        positive_increasing("cosh_lambdas", &self.cosh_lambdas)?;
        let w = self.window;
        if !(0.0 < w.q_lo && w.q_lo < w.q_hi && w.q_hi < 1.0) {
            return Err(CliError::Config(format!(
                "window must satisfy 0 < q_lo < q_hi < 1, got [{}, {}]",
                w.q_lo, w.q_hi
            )));
        }
        if self.output_dir.as_os_str().is_empty() {
            return Err(CliError::Config("output_dir must not be empty".into()));
        }
        Ok(())
    }

    pub fn diffusion_spec(&self) -> DiffusionSpec {
        DiffusionSpec {
            shape: self.shape,
            field: self.diffusion.field.clone(),
            lambda: self.diffusion.lambda,
            label: self.diffusion.label.clone(),
        }
    }

    pub fn sim_config(&self) -> SimConfig {
        SimConfig {
            x0: self.simulation.x0.clone(),
            ..SimConfig::new(self.simulation.horizon, self.simulation.n_steps, self.seed)
        }
    }

    pub fn metric_spec(&self) -> NormSpec {
        NormSpec::new(self.metric, self.shape).expect("validated")
    }

    pub fn theorem_config(&self) -> TheoremConfig {
        TheoremConfig {
            shape: self.shape,
            field: self.diffusion.field.clone(),
            lambda: self.diffusion.lambda,
            metric: self.metric,
            p: self.p,
            r: self.count_radius,
            key_radii: self.radii.clone(),
            horizon: self.simulation.horizon,
            n_steps: self.simulation.n_steps,
            seed: self.seed,
            count_samples: self.samples.count,
            m_samples: self.samples.m,
            metric_swap_samples: self.samples.metric_swap,
            window: self.window,
        }
    }
}

/// Runs `f` on a pool of `workers` threads, or on the global pool.
pub fn with_workers<T: Send>(
    workers: Option<usize>,
    f: impl FnOnce() -> T + Send,
) -> Result<T, CliError> {
    match workers {
        None => Ok(f()),
        Some(0) => Err(CliError::Config("--workers must be at least 1".into())),
        Some(n) => {
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(n)
                .build()
                .map_err(config_err)?;
            Ok(pool.install(f))
        }
    }
}

fn create_dir(dir: &Path) -> Result<(), CliError> {
    fs::create_dir_all(dir).map_err(io_err(format!("creating {}", dir.display())))
}

fn write_file(path: &Path, contents: &[u8]) -> Result<(), CliError> {
    fs::write(path, contents).map_err(io_err(format!("writing {}", path.display())))
}

fn write_json(path: &Path, value: &impl Serialize) -> Result<(), CliError> {
    let mut text = serde_json::to_string_pretty(value).expect("serializable");
    text.push('\n');
    write_file(path, text.as_bytes())
}

fn write_samples(dir: &Path, name: &str, set: &SampleSet) -> Result<(), CliError> {
    let csv_path = dir.join(format!("{name}.csv"));
    let file = fs::File::create(&csv_path).map_err(io_err(format!("creating {}", csv_path.display())))?;
    set.write_csv(BufWriter::new(file)).map_err(|e| CliError::Io {
        context: format!("writing {}", csv_path.display()),
        source: std::io::Error::other(e.to_string()),
    })?;
    let n = set.values.len() as f64;
    let mean = if n > 0.0 { set.values.iter().sum::<f64>() / n } else { f64::NAN };
    let sidecar = serde_json::json!({
        "meta": set.meta,
        "observed": set.values.len(),
        "censored": set.censored,
        "censor_value": set.censor_value,
        "mean": mean,
    });
    write_json(&dir.join(format!("{name}.json")), &sidecar)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SimulateSummary {
    pub paths: Vec<PathBuf>,
    pub sample_sets: Vec<PathBuf>,
}

/// Writes path CSVs and sample sets with JSON sidecars under the output
/// directory.
pub fn cmd_simulate(cfg: &ExperimentConfig) -> Result<SimulateSummary, CliError> {
    cfg.validate()?;
    let spec = cfg.diffusion_spec();
    let sim = cfg.sim_config();
    let metric = cfg.metric_spec();
    let mut summary = SimulateSummary {
        paths: Vec::new(),
        sample_sets: Vec::new(),
    };
    if cfg.samples.paths > 0 {
        let dir = cfg.output_dir.join("paths");
        create_dir(&dir)?;
        let paths: Vec<DiscretePath> = (0..cfg.samples.paths as u64)
            .into_par_iter()
            .map(|i| markov_group_euler_with(&spec, &sim, &mut replicate_rng(cfg.seed, i)))
            .collect::<Result<_, _>>()
            .map_err(config_err)?;
        for (i, path) in paths.iter().enumerate() {
            let file = dir.join(format!("path_{i:04}.csv"));
            let mut buf = Vec::new();
            path.write_csv(&mut buf).map_err(config_err)?;
            write_file(&file, &buf)?;
            summary.paths.push(file);
        }
    }
    let dir = cfg.output_dir.join("samples");
    if cfg.samples.sigma > 0 {
        create_dir(&dir)?;
        let set = sample_sigma_set(&spec, cfg.count_radius, &metric, &sim, cfg.samples.sigma, 0)
            .map_err(config_err)?;
        write_samples(&dir, "sigma", &set)?;
        summary.sample_sets.push(dir.join("sigma.csv"));
    }
    if cfg.samples.count > 0 {
        create_dir(&dir)?;
        let theorem = cfg.theorem_config();
        let values: Vec<f64> = (0..cfg.samples.count)
            .into_par_iter()
            .map(|i| {
                let path = theorem.simulate(i).map_err(config_err)?;
                let g = greedy_partition(&path, cfg.count_radius, &metric).map_err(config_err)?;
                Ok(g.count as f64)
            })
            .collect::<Result<_, CliError>>()?;
        let set = SampleSet {
            meta: serde_json::json!({
                "quantity": "greedy_count",
                "radius": cfg.count_radius,
                "metric": cfg.metric,
                "spec": spec,
                "config": sim,
                "seed": cfg.seed,
                "replicates": cfg.samples.count,
            }),
            ..SampleSet::new(values)
        };
        write_samples(&dir, "count", &set)?;
        summary.sample_sets.push(dir.join("count.csv"));
    }
    Ok(summary)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FunctionalBundle {
    pub samples: usize,
    pub shape: AlgebraShape,
    pub metric: NormKind,
    pub p: f64,
    pub r: f64,
    pub holder_alpha: f64,
    pub pvar: f64,
    pub holder: f64,
    #[serde(rename = "N0r")]
    pub n0r: usize,
    #[serde(rename = "Npvar")]
    pub npvar: usize,
    #[serde(rename = "M")]
    pub m: f64,
    pub sandwich: SandwichReport,
    pub key_lemma: KeyLemmaReport,
}

/// Evaluates the functional bundle of a path read from CSV. The Holder
/// exponent defaults to `1/p`.
pub fn cmd_functionals(
    path_csv: &Path,
    p: f64,
    r: f64,
    metric: NormKind,
    holder_alpha: Option<f64>,
) -> Result<FunctionalBundle, CliError> {
    let file = fs::File::open(path_csv).map_err(io_err(format!("opening {}", path_csv.display())))?;
    let path = DiscretePath::read_csv(std::io::BufReader::new(file))
        .map_err(|e| CliError::Config(format!("{}: {e}", path_csv.display())))?;
    functionals_bundle(&path, p, r, metric, holder_alpha)
}

pub fn functionals_bundle(
    path: &DiscretePath,
    p: f64,
    r: f64,
    metric: NormKind,
    holder_alpha: Option<f64>,
) -> Result<FunctionalBundle, CliError> {
    let spec = NormSpec::new(metric, path.shape()).map_err(config_err)?;
    let analysis = PathAnalysis::new(path, p, &spec).map_err(config_err)?;
    let alpha = holder_alpha.unwrap_or(1.0 / p);
    let full = Window::full(path);
    let sandwich = analysis.sandwich().map_err(config_err)?;
    let key_lemma = analysis.key_lemma_with(r, sandwich.m).map_err(config_err)?;
    Ok(FunctionalBundle {
        samples: path.len(),
        shape: path.shape(),
        metric,
        p,
        r,
        holder_alpha: alpha,
        pvar: analysis.p_variation(full).map_err(config_err)?,
        holder: rough_tails::functionals::holder_norm(path, alpha, full, &spec).map_err(config_err)?,
        n0r: analysis.greedy_partition(r).map_err(config_err)?.count,
        npvar: sandwich.n_pvar,
        m: sandwich.m,
        sandwich,
        key_lemma,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TauberianSection {
    pub samples: usize,
    pub censored: usize,
    pub small_time: SmallTimeFit,
    pub comparison: TauberianReport,
}

/// Everything `report` writes to `report.json`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FullReport {
    pub version: String,
    pub config: ExperimentConfig,
    pub scheme_approximate: bool,
    pub tails: TailReport,
    pub cosh: Option<CoshReport>,
    pub count_bound: Vec<CountBoundRow>,
    pub tauberian: Option<TauberianSection>,
    pub passed: bool,
}

impl FullReport {
    pub fn failed(&self) -> Vec<String> {
        let mut out: Vec<String> = self.tails.failed_checks().map(|c| c.name.clone()).collect();
        if self.cosh.as_ref().is_some_and(|c| !c.passed) {
            out.push("cosh".into());
        }
        out.extend(
            self.count_bound
                .iter()
                .filter(|r| !r.passed)
                .map(|r| format!("count_bound n={}", r.n)),
        );
        out
    }
}

/// Tail study plus the one-dimensional closed-form checks, written as
/// `report.json`, survival CSVs and log-log SVG plots.
pub fn build_report(cfg: &ExperimentConfig) -> Result<FullReport, CliError> {
    cfg.validate()?;
    let theorem = cfg.theorem_config();
    let tails = rough_tails::tails::theorem_checks(&theorem).map_err(config_err)?;
    let cosh = (cfg.samples.cosh > 0)
        .then(|| brownian_laplace_check(&cfg.cosh_lambdas, cfg.samples.cosh, cfg.seed))
        .transpose()
        .map_err(config_err)?;
    let count_bound = if cfg.samples.count_1d > 0 {
        brownian_count_bound(&[2, 3, 4, 5], cfg.samples.count_1d, cfg.seed)
    } else {
        Vec::new()
    };
    let tauberian = if cfg.samples.sigma > 0 && !cfg.lambda_grid.is_empty() && !cfg.t_grid.is_empty() {
        let set = sample_sigma_set(
            &cfg.diffusion_spec(),
            cfg.count_radius,
            &cfg.metric_spec(),
            &cfg.sim_config(),
            cfg.samples.sigma,
            0,
        )
        .map_err(config_err)?;
        // report-only: a failed fit is recorded as absent
        small_time_exponent(&set, &cfg.t_grid).ok().and_then(|st| {
            tauberian_compare(&set, &cfg.lambda_grid, st.c2_hat, 0.1)
                .ok()
                .map(|comparison| TauberianSection {
                    samples: set.total(),
                    censored: set.censored,
                    small_time: st,
                    comparison,
                })
        })
    } else {
        None
    };
    let mut report = FullReport {
        version: env!("CARGO_PKG_VERSION").into(),
        config: cfg.clone(),
        scheme_approximate: cfg.diffusion.field != DiffusionField::Identity,
        tails,
        cosh,
        count_bound,
        tauberian,
        passed: false,
    };
    report.passed = report.failed().is_empty();
    Ok(report)
}

fn write_section(dir: &Path, stem: &str, title: &str, section: &FitSection) -> Result<(), CliError> {
    write_file(
        &dir.join(format!("{stem}_survival.csv")),
        survival_csv(&section.curve).as_bytes(),
    )?;
    write_file(&dir.join(format!("{stem}_fit.svg")), fit_svg(title, section).as_bytes())
}

pub fn write_report(dir: &Path, report: &FullReport) -> Result<(), CliError> {
    create_dir(dir)?;
    write_json(&dir.join("report.json"), report)?;
    write_section(dir, "count", "greedy count tail", &report.tails.count)?;
    write_section(dir, "m", "accumulated local p-variation tail", &report.tails.m)?;
    if let Some(swap) = &report.tails.metric_swap {
        write_section(dir, "m_cc", "accumulated local p-variation tail (CC metric)", swap)?;
    }
    Ok(())
}

/// Builds and writes the report; a failed hard predicate becomes
/// [`CliError::Acceptance`] after the files are written.
pub fn cmd_report(cfg: &ExperimentConfig) -> Result<FullReport, CliError> {
    let report = build_report(cfg)?;
    write_report(&cfg.output_dir, &report)?;
    let failed = report.failed();
    if failed.is_empty() {
        Ok(report)
    } else {
        Err(CliError::Acceptance { failed })
    }
}

/// Writes a JSON value followed by a newline to `out`.
pub fn print_json(out: &mut impl Write, value: &impl Serialize) -> std::io::Result<()> {
    serde_json::to_writer_pretty(&mut *out, value)?;
    writeln!(out)
}
