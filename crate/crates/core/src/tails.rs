//! Tail estimation on Monte Carlo samples: survival functions with DKW bands,
//! Laplace transforms of hitting times, small-time exponents, the Tauberian
//! comparison between them, Weibull-type tail fits, and the end-to-end tail
//! study for greedy counts and the accumulated local p-variation.

use std::fmt::Write as _;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::algebra::AlgebraShape;
use crate::functionals::{greedy_partition, FunctionalError, PathAnalysis};
use crate::norms::{NormError, NormKind, NormSpec};
use crate::simulate::{
    brownian_count_1d, brownian_lift_with, markov_group_euler_with, replicate_rng,
    sample_sigma_set, DiffusionField, DiffusionSpec, SimConfig, SimError,
};

/// Confidence level of every reported DKW band.
pub const DKW_CONFIDENCE: f64 = 0.99;
/// Default quantile window of the tail fits.
pub const DEFAULT_WINDOW: (f64, f64) = (0.90, 0.999);
/// Minimum number of samples inside the fit window.
pub const MIN_TAIL_SAMPLES: usize = 20;
/// Regression points used for continuous data at most.
const MAX_FIT_POINTS: usize = 200;
/// Lower bound asserted on the fitted exponent of the greedy count.
pub const COUNT_ALPHA_MIN: f64 = 1.6;
/// Slack below `2 (1 - 1/p)` allowed for the fitted exponent of `M`.
pub const M_ALPHA_SLACK: f64 = 0.25;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum TailError {
    #[error("sample set is empty")]
    Empty,
    #[error("sample values must be finite and nonnegative (index {0})")]
    BadValue(usize),
    #[error("lambda must be positive, got {0}")]
    Lambda(f64),
    #[error("grid must be increasing")]
    Grid,
    #[error("quantile window [{0}, {1}] invalid")]
    Window(f64, f64),
    #[error("only {found} usable points, need {needed}")]
    TooFewPoints { found: usize, needed: usize },
    #[error("only {found} samples in the tail window, need {needed}")]
    InsufficientTail { found: usize, needed: usize },
    #[error("survival is not monotone across the fit window")]
    NonMonotone,
    #[error("p must exceed 2, got {0}")]
    Exponent(f64),
    #[error(transparent)]
    Sim(#[from] SimError),
    #[error(transparent)]
    Functional(#[from] FunctionalError),
    #[error(transparent)]
    Norm(#[from] NormError),
}

/// I.i.d. replicates of a nonnegative statistic.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SampleSet {
    pub values: Vec<f64>,
    /// Replicates that never produced a value, e.g. hitting times beyond the
    /// simulated horizon.
    #[serde(default)]
    pub censored: usize,
    /// Lower bound known for every censored replicate.
    #[serde(default)]
    pub censor_value: Option<f64>,
    #[serde(default)]
    pub meta: serde_json::Value,
}

impl SampleSet {
    pub fn new(values: Vec<f64>) -> Self {
        Self {
            values,
            censored: 0,
            censor_value: None,
            meta: serde_json::Value::Null,
        }
    }

    pub fn validate(&self) -> Result<(), TailError> {
        if self.total() == 0 {
            return Err(TailError::Empty);
        }
        match self.values.iter().position(|v| !(v.is_finite() && *v >= 0.0)) {
            Some(i) => Err(TailError::BadValue(i)),
            None => Ok(()),
        }
    }

    /// Observed plus censored replicates.
    pub fn total(&self) -> usize {
        self.values.len() + self.censored
    }

    fn sorted(&self) -> Vec<f64> {
        let mut v = self.values.clone();
        v.sort_by(f64::total_cmp);
        v
    }

    fn is_integer_valued(&self) -> bool {
        self.values.iter().all(|v| v.fract() == 0.0)
    }

    /// `replicate,value` rows in replicate order; censored replicates are
    /// not listed.
    pub fn write_csv<W: std::io::Write>(&self, out: W) -> csv::Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["replicate", "value"])?;
        for (i, v) in self.values.iter().enumerate() {
            w.write_record([i.to_string(), v.to_string()])?;
        }
        w.flush()?;
        Ok(())
    }
}

/// `sqrt(ln(2 / (1 - confidence)) / (2 n))`.
pub fn dkw_epsilon(n: usize, confidence: f64) -> f64 {
    ((2.0 / (1.0 - confidence)).ln() / (2.0 * n as f64)).sqrt()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SurvivalPoint {
    pub x: f64,
    pub p_hat: f64,
    pub band_lo: f64,
    pub band_hi: f64,
}

/// Fraction of replicates strictly above `x`, with the 99% DKW band.
/// Censored replicates count as exceeding `x` when `x` is below their bound.
pub fn empirical_survival(s: &SampleSet, x: f64) -> Result<SurvivalPoint, TailError> {
    s.validate()?;
    let n = s.total();
    let mut above = s.values.iter().filter(|&&v| v > x).count();
    if s.censor_value.is_some_and(|c| c > x) {
        above += s.censored;
    }
    Ok(survival_point(x, above, n))
}

fn survival_point(x: f64, above: usize, n: usize) -> SurvivalPoint {
    let p_hat = above as f64 / n as f64;
    let eps = dkw_epsilon(n, DKW_CONFIDENCE);
    SurvivalPoint {
        x,
        p_hat,
        band_lo: (p_hat - eps).max(0.0),
        band_hi: (p_hat + eps).min(1.0),
    }
}

pub fn survival_curve(s: &SampleSet, xs: &[f64]) -> Result<Vec<SurvivalPoint>, TailError> {
    xs.iter().map(|&x| empirical_survival(s, x)).collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LaplaceEstimate {
    pub lambda: f64,
    pub m_hat: f64,
    pub stderr: f64,
    /// Share of `m_hat` contributed by censored replicates at their bound;
    /// the true value is at most `m_hat`.
    pub censored_contribution: f64,
}

/// Sample mean and standard error of `exp(-lambda sigma)`.
pub fn laplace_estimate(s: &SampleSet, lambda: f64) -> Result<LaplaceEstimate, TailError> {
    s.validate()?;
    if !(lambda > 0.0) || !lambda.is_finite() {
        return Err(TailError::Lambda(lambda));
    }
    let cap_term = s.censor_value.map_or(0.0, |c| (-lambda * c).exp());
    let n = s.total() as f64;
    let (mut sum, mut sum_sq) = (0.0, 0.0);
    for v in &s.values {
        let e = (-lambda * v).exp();
        sum += e;
        sum_sq += e * e;
    }
    let censored_sum = s.censored as f64 * cap_term;
    sum += censored_sum;
    sum_sq += s.censored as f64 * cap_term * cap_term;
    let mean = sum / n;
    let var = if n > 1.0 {
        ((sum_sq - n * mean * mean) / (n - 1.0)).max(0.0)
    } else {
        0.0
    };
    Ok(LaplaceEstimate {
        lambda,
        m_hat: mean,
        stderr: (var / n).sqrt(),
        censored_contribution: censored_sum / n,
    })
}

/// Ordinary least squares fit `y = intercept + slope x`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LinearFit {
    pub slope: f64,
    pub intercept: f64,
    pub r2: f64,
    pub stderr_slope: f64,
    pub points: usize,
}

pub fn least_squares(pts: &[(f64, f64)]) -> Option<LinearFit> {
    let n = pts.len();
    if n < 2 {
        return None;
    }
    let nf = n as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / nf;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / nf;
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let syy: f64 = pts.iter().map(|p| (p.1 - my).powi(2)).sum();
    if sxx == 0.0 {
        return None;
    }
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let sse: f64 = pts
        .iter()
        .map(|p| (p.1 - intercept - slope * p.0).powi(2))
        .sum();
    let r2 = if syy > 0.0 { 1.0 - sse / syy } else { 1.0 };
    let stderr_slope = if n > 2 {
        (sse / (nf - 2.0) / sxx).sqrt()
    } else {
        f64::NAN
    };
    Some(LinearFit {
        slope,
        intercept,
        r2,
        stderr_slope,
        points: n,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SmallTimeFit {
    pub c2_hat: f64,
    pub r2: f64,
    pub stderr: f64,
    pub t_used: Vec<f64>,
    pub log_p: Vec<f64>,
}

/// Fits `log P(sigma <= t) ~ const - c2 / t` over `t_grid`.
pub fn small_time_exponent(s: &SampleSet, t_grid: &[f64]) -> Result<SmallTimeFit, TailError> {
    s.validate()?;
    check_increasing(t_grid)?;
    let sorted = s.sorted();
    let n = s.total() as f64;
    let mut t_used = Vec::new();
    let mut log_p = Vec::new();
    for &t in t_grid {
        let below = sorted.partition_point(|&v| v <= t);
        if below > 0 && (below as f64) < n {
            t_used.push(t);
            log_p.push((below as f64 / n).ln());
        }
    }
    if t_used.len() < 3 {
        return Err(TailError::TooFewPoints {
            found: t_used.len(),
            needed: 3,
        });
    }
    let pts: Vec<(f64, f64)> = t_used.iter().zip(&log_p).map(|(t, l)| (1.0 / t, *l)).collect();
    let fit = least_squares(&pts).expect("three distinct points");
    Ok(SmallTimeFit {
        c2_hat: -fit.slope,
        r2: fit.r2,
        stderr: fit.stderr_slope,
        t_used,
        log_p,
    })
}

fn check_increasing(grid: &[f64]) -> Result<(), TailError> {
    if grid.windows(2).any(|w| !(w[1] > w[0])) {
        return Err(TailError::Grid);
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TauberianReport {
    pub laplace: Vec<LaplaceEstimate>,
    /// `-log m_hat(lambda) / sqrt(lambda)` per grid point.
    pub normalized: Vec<f64>,
    /// Least-squares slope of `-log m_hat` against `sqrt(lambda)`.
    pub plateau: f64,
    /// `2 sqrt(c2)` implied by the small-time exponent.
    pub implied: f64,
    pub ratio: f64,
    pub tolerance: f64,
    /// `ratio >= 1 - tolerance`: the Laplace transform decays at least as
    /// fast as the small-time exponent implies.
    pub consistent: bool,
}

/// Compares the Laplace decay rate with `2 sqrt(c2)`.
///
/// The plateau is taken as a slope rather than a ratio so that the constant
/// prefactor of the Laplace transform drops out; on λ grids reachable by
/// Monte Carlo that prefactor still dominates `-log m / sqrt(λ)`.
pub fn tauberian_compare(
    s: &SampleSet,
    lambda_grid: &[f64],
    c2_hat: f64,
    tolerance: f64,
) -> Result<TauberianReport, TailError> {
    check_increasing(lambda_grid)?;
    let laplace: Vec<LaplaceEstimate> = lambda_grid
        .iter()
        .map(|&l| laplace_estimate(s, l))
        .collect::<Result<_, _>>()?;
    let normalized: Vec<f64> = laplace
        .iter()
        .map(|e| -e.m_hat.ln() / e.lambda.sqrt())
        .collect();
    let pts: Vec<(f64, f64)> = laplace
        .iter()
        .filter(|e| e.m_hat > 0.0)
        .map(|e| (e.lambda.sqrt(), -e.m_hat.ln()))
        .collect();
    let fit = least_squares(&pts).ok_or(TailError::TooFewPoints {
        found: pts.len(),
        needed: 2,
    })?;
    let implied = 2.0 * c2_hat.max(0.0).sqrt();
    let ratio = fit.slope / implied;
    Ok(TauberianReport {
        laplace,
        normalized,
        plateau: fit.slope,
        implied,
        ratio,
        tolerance,
        consistent: ratio >= 1.0 - tolerance,
    })
}

/// Tail window given as exceedance quantiles.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WindowPolicy {
    pub q_lo: f64,
    pub q_hi: f64,
}

impl Default for WindowPolicy {
    fn default() -> Self {
        Self {
            q_lo: DEFAULT_WINDOW.0,
            q_hi: DEFAULT_WINDOW.1,
        }
    }
}

/// Fitted `P(X > x) ~ exp(-c x^alpha)` over a tail window.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TailFit {
    pub c: f64,
    pub alpha: f64,
    pub stderr_alpha: f64,
    /// Range of `x` covered by the regression points.
    pub window: [f64; 2],
    pub policy: WindowPolicy,
    /// Samples falling inside the window.
    pub n_tail: usize,
    pub r2: f64,
    /// `(x, P_hat)` pairs fed to the regression.
    pub points: Vec<(f64, f64)>,
    pub integer_valued: bool,
    /// Integer data only: the same fit with `P_hat(X >= x)` in place of
    /// `P_hat(X > x)`. Reported to expose the sensitivity of short integer
    /// windows to the evaluation convention.
    pub alpha_left_limit: Option<f64>,
}

impl TailFit {
    pub fn survival(&self, x: f64) -> f64 {
        (-self.c * x.powf(self.alpha)).exp()
    }
}

/// Regresses `log(-log P_hat(X > x))` on `log x` for evaluation points `x`
/// between the empirical `q_lo` and `q_hi` quantiles.
///
/// Integer-valued samples are evaluated at the integers of the window;
/// continuous samples at (at most 200 evenly strided) order statistics.
/// Points with `P_hat` of 0 or 1 are dropped.
pub fn weibull_fit(s: &SampleSet, policy: WindowPolicy) -> Result<TailFit, TailError> {
    s.validate()?;
    if !(0.0 < policy.q_lo && policy.q_lo < policy.q_hi && policy.q_hi < 1.0) {
        return Err(TailError::Window(policy.q_lo, policy.q_hi));
    }
    let sorted = s.sorted();
    if sorted.is_empty() {
        return Err(TailError::InsufficientTail {
            found: 0,
            needed: MIN_TAIL_SAMPLES,
        });
    }
    let n = s.total();
    let nf = n as f64;
    let quantile = |q: f64| {
        let i = ((q * nf).ceil() as usize).clamp(1, sorted.len()) - 1;
        sorted[i]
    };
    let (q_lo, q_hi) = (quantile(policy.q_lo), quantile(policy.q_hi));
    let above = |x: f64| (n - sorted.partition_point(|&v| v <= x)) as f64 / nf;
    let at_least = |x: f64| (n - sorted.partition_point(|&v| v < x)) as f64 / nf;
    let integer_valued = s.is_integer_valued();
    let candidates: Vec<f64> = if integer_valued {
        (q_lo as i64..=q_hi as i64).map(|k| k as f64).collect()
    } else {
        let i_lo = sorted.partition_point(|&v| v < q_lo);
        let i_hi = sorted.partition_point(|&v| v <= q_hi);
        let stride = (i_hi - i_lo).div_ceil(MAX_FIT_POINTS).max(1);
        let mut xs: Vec<f64> = sorted[i_lo..i_hi].iter().step_by(stride).copied().collect();
        xs.dedup();
        xs
    };
    let points: Vec<(f64, f64)> = candidates
        .into_iter()
        .map(|x| (x, above(x)))
        .filter(|&(x, p)| x > 0.0 && p > 0.0 && p < 1.0)
        .collect();
    let n_tail = sorted.iter().filter(|&&v| v >= q_lo).count();
    if n_tail < MIN_TAIL_SAMPLES {
        return Err(TailError::InsufficientTail {
            found: n_tail,
            needed: MIN_TAIL_SAMPLES,
        });
    }
    if points.len() < 2 {
        return Err(TailError::TooFewPoints {
            found: points.len(),
            needed: 2,
        });
    }
    if points.windows(2).any(|w| w[1].1 > w[0].1) {
        return Err(TailError::NonMonotone);
    }
    let loglog = |pts: &[(f64, f64)]| {
        let reg: Vec<(f64, f64)> = pts.iter().map(|&(x, p)| (x.ln(), (-p.ln()).ln())).collect();
        least_squares(&reg)
    };
    let fit = loglog(&points).ok_or(TailError::TooFewPoints { found: 1, needed: 2 })?;
    let alpha_left_limit = if integer_valued {
        let left: Vec<(f64, f64)> = points
            .iter()
            .map(|&(x, _)| (x, at_least(x)))
            .filter(|&(_, p)| p < 1.0)
            .collect();
        loglog(&left).map(|f| f.slope)
    } else {
        None
    };
    Ok(TailFit {
        c: fit.intercept.exp(),
        alpha: fit.slope,
        stderr_alpha: fit.stderr_slope,
        window: [points[0].0, points[points.len() - 1].0],
        policy,
        n_tail,
        r2: fit.r2,
        points,
        integer_valued,
        alpha_left_limit,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KsResult {
    pub statistic: f64,
    /// Asymptotic 1% critical value `1.6276 sqrt((n + m) / (n m))`.
    pub critical: f64,
    pub n: usize,
    pub m: usize,
    pub passes: bool,
}

/// Two-sample Kolmogorov-Smirnov statistic against the 1% critical value.
pub fn ks_two_sample(a: &[f64], b: &[f64]) -> KsResult {
    let mut x = a.to_vec();
    let mut y = b.to_vec();
    x.sort_by(f64::total_cmp);
    y.sort_by(f64::total_cmp);
    let (n, m) = (x.len(), y.len());
    let (mut i, mut j) = (0, 0);
    let mut d = 0.0_f64;
    while i < n && j < m {
        let v = x[i].min(y[j]);
        while i < n && x[i] <= v {
            i += 1;
        }
        while j < m && y[j] <= v {
            j += 1;
        }
        d = d.max((i as f64 / n as f64 - j as f64 / m as f64).abs());
    }
    let critical = if n == 0 || m == 0 {
        f64::NAN
    } else {
        1.6276 * ((n + m) as f64 / (n as f64 * m as f64)).sqrt()
    };
    KsResult {
        statistic: d,
        critical,
        n,
        m,
        passes: d < critical,
    }
}

/// Settings of the end-to-end tail study.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TheoremConfig {
    pub shape: AlgebraShape,
    /// Diffusion matrix field; anything but the identity runs the geometric
    /// Euler chain and its fits are scheme-approximate.
    #[serde(default)]
    pub field: DiffusionField,
    #[serde(default = "unit_lambda")]
    pub lambda: f64,
    pub metric: NormKind,
    pub p: f64,
    /// Radius of the greedy count.
    pub r: f64,
    /// Radii at which the bound on `M` by greedy counts is checked.
    pub key_radii: Vec<f64>,
    pub horizon: f64,
    pub n_steps: usize,
    pub seed: u64,
    /// Paths used for the count tail.
    pub count_samples: usize,
    /// Leading paths on which `M`, the sandwich and the key bound are
    /// evaluated.
    pub m_samples: usize,
    /// Paths for the rerun of the `M` tail under the exact
    /// Heisenberg metric; 0 disables it.
    #[serde(default)]
    pub metric_swap_samples: usize,
    #[serde(default)]
    pub window: WindowPolicy,
}

fn unit_lambda() -> f64 {
    1.0
}

impl TheoremConfig {
    pub fn flagship(seed: u64) -> Self {
        Self {
            shape: AlgebraShape::new(2, 2).expect("valid"),
            field: DiffusionField::Identity,
            lambda: 1.0,
            metric: NormKind::HomSym,
            p: 2.5,
            r: 1.0,
            key_radii: vec![0.5, 1.0, 2.0],
            horizon: 1.0,
            n_steps: 1024,
            seed,
            count_samples: 100_000,
            m_samples: 10_000,
            metric_swap_samples: 0,
            window: WindowPolicy::default(),
        }
    }

    pub fn diffusion(&self) -> DiffusionSpec {
        DiffusionSpec {
            shape: self.shape,
            field: self.field.clone(),
            lambda: self.lambda,
            label: String::new(),
        }
    }

    /// Path of replicate `i`.
    pub fn simulate(&self, i: usize) -> Result<crate::path::DiscretePath, SimError> {
        let sim = SimConfig::new(self.horizon, self.n_steps, self.seed);
        let mut rng = replicate_rng(self.seed, i as u64);
        match self.field {
            DiffusionField::Identity => brownian_lift_with(self.shape, &sim, &mut rng),
            _ => markov_group_euler_with(&self.diffusion(), &sim, &mut rng),
        }
    }

    pub fn m_alpha_threshold(&self) -> f64 {
        2.0 * (1.0 - 1.0 / self.p) - M_ALPHA_SLACK
    }
}

/// One hard or report-only predicate of a study.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Check {
    pub name: String,
    pub value: f64,
    pub threshold: f64,
    pub passed: bool,
    pub hard: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Violation {
    pub replicate: usize,
    pub kind: String,
    pub lhs: f64,
    pub rhs: f64,
}

/// A fitted tail with its survival curve.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitSection {
    pub quantity: String,
    pub samples: usize,
    pub fit: Option<TailFit>,
    pub error: Option<String>,
    #[serde(skip)]
    pub curve: Vec<SurvivalPoint>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TailReport {
    pub config: TheoremConfig,
    pub count: FitSection,
    pub m: FitSection,
    pub metric_swap: Option<FitSection>,
    pub sandwich_pass_rate: f64,
    pub key_lemma_pass_rate: f64,
    pub violations: Vec<Violation>,
    pub checks: Vec<Check>,
    pub passed: bool,
}

impl TailReport {
    pub fn failed_checks(&self) -> impl Iterator<Item = &Check> {
        self.checks.iter().filter(|c| c.hard && !c.passed)
    }
}

struct PathOutcome {
    count: usize,
    m: Option<MOutcome>,
}

struct MOutcome {
    m: f64,
    sandwich: Option<Violation>,
    key: Vec<Violation>,
}

fn evaluate_m(
    path: &crate::path::DiscretePath,
    p: f64,
    metric: &NormSpec,
    radii: &[f64],
    replicate: usize,
) -> Result<MOutcome, TailError> {
    let a = PathAnalysis::new(path, p, metric)?;
    let s = a.sandwich()?;
    let sandwich = (!s.holds).then(|| Violation {
        replicate,
        kind: "sandwich".into(),
        lhs: s.m,
        rhs: s.n_pvar as f64,
    });
    let mut key = Vec::new();
    for &r in radii {
        let k = a.key_lemma_with(r, s.m)?;
        if !k.holds {
            key.push(Violation {
                replicate,
                kind: format!("key_lemma r={r}"),
                lhs: k.m,
                rhs: k.rhs,
            });
        }
    }
    Ok(MOutcome {
        m: s.m,
        sandwich,
        key,
    })
}

fn fit_section(quantity: &str, s: &SampleSet, policy: WindowPolicy) -> FitSection {
    let fit = weibull_fit(s, policy);
    let curve = survival_grid(s).unwrap_or_default();
    FitSection {
        quantity: quantity.into(),
        samples: s.total(),
        error: fit.as_ref().err().map(|e| e.to_string()),
        fit: fit.ok(),
        curve,
    }
}

/// Survival curve on integer points for counts, otherwise on 100 points up
/// to the largest sample.
pub fn survival_grid(s: &SampleSet) -> Result<Vec<SurvivalPoint>, TailError> {
    s.validate()?;
    let max = s.values.iter().copied().fold(0.0, f64::max);
    if s.is_integer_valued() {
        let n = s.total();
        let sorted = s.sorted();
        Ok((0..=max as usize)
            .map(|k| {
                let at_least = n - sorted.partition_point(|&v| v < k as f64);
                survival_point(k as f64, at_least, n)
            })
            .collect())
    } else {
        let xs: Vec<f64> = (0..=100).map(|i| max * i as f64 / 100.0).collect();
        survival_curve(s, &xs)
    }
}

/// Simulates Brownian rough paths, evaluates the greedy count on all of them
/// and `M`, the sandwich and the key bound on the leading `m_samples`, then
/// fits both tails.
pub fn theorem_checks(cfg: &TheoremConfig) -> Result<TailReport, TailError> {
    if !(cfg.p > 2.0) {
        return Err(TailError::Exponent(cfg.p));
    }
    let metric = NormSpec::new(cfg.metric, cfg.shape)?;
    SimConfig::new(cfg.horizon, cfg.n_steps, cfg.seed).validate()?;
    cfg.diffusion().validate()?;
    let outcomes: Vec<PathOutcome> = (0..cfg.count_samples.max(cfg.m_samples))
        .into_par_iter()
        .map(|i| {
            let path = cfg.simulate(i)?;
            let count = greedy_partition(&path, cfg.r, &metric)?.count;
            let m = if i < cfg.m_samples {
                Some(evaluate_m(&path, cfg.p, &metric, &cfg.key_radii, i)?)
            } else {
                None
            };
            Ok(PathOutcome { count, m })
        })
        .collect::<Result<_, TailError>>()?;

    let meta = |quantity: &str, n: usize| {
        serde_json::json!({ "quantity": quantity, "seed": cfg.seed, "replicates": n })
    };
    let counts = SampleSet {
        meta: meta("greedy_count", cfg.count_samples),
        ..SampleSet::new(
            outcomes[..cfg.count_samples]
                .iter()
                .map(|o| o.count as f64)
                .collect(),
        )
    };
    let m_outcomes: Vec<&MOutcome> = outcomes.iter().filter_map(|o| o.m.as_ref()).collect();
    let ms = SampleSet {
        meta: meta("accumulated_local_pvar", cfg.m_samples),
        ..SampleSet::new(m_outcomes.iter().map(|o| o.m).collect())
    };
    let mut violations = Vec::new();
    let mut sandwich_bad = 0;
    let mut key_bad = 0;
    for o in &m_outcomes {
        if let Some(v) = &o.sandwich {
            sandwich_bad += 1;
            violations.push(v.clone());
        }
        key_bad += o.key.len();
        violations.extend(o.key.iter().cloned());
    }
    let n_m = m_outcomes.len().max(1) as f64;
    let sandwich_pass_rate = 1.0 - sandwich_bad as f64 / n_m;
    let key_lemma_pass_rate = 1.0 - key_bad as f64 / (n_m * cfg.key_radii.len().max(1) as f64);

    let count = fit_section("greedy_count", &counts, cfg.window);
    let m = fit_section("accumulated_local_pvar", &ms, cfg.window);
    let metric_swap = if cfg.metric_swap_samples > 0 && cfg.shape.dim() == 2 && cfg.shape.depth() == 2 {
        let cc = NormSpec::new(NormKind::CcHeisenberg, cfg.shape)?;
        let values: Vec<f64> = (0..cfg.metric_swap_samples)
            .into_par_iter()
            .map(|i| {
                let path = cfg.simulate(i)?;
                Ok(PathAnalysis::new(&path, cfg.p, &cc)?.accumulated_local_pvar()?)
            })
            .collect::<Result<_, TailError>>()?;
        Some(fit_section(
            "accumulated_local_pvar_cc",
            &SampleSet::new(values),
            cfg.window,
        ))
    } else {
        None
    };

    let alpha = |s: &FitSection| s.fit.as_ref().map_or(f64::NAN, |f| f.alpha);
    let mut checks = vec![
        Check {
            name: "count_alpha".into(),
            value: alpha(&count),
            threshold: COUNT_ALPHA_MIN,
            passed: alpha(&count) >= COUNT_ALPHA_MIN,
            hard: true,
        },
        Check {
            name: "m_alpha".into(),
            value: alpha(&m),
            threshold: cfg.m_alpha_threshold(),
            passed: alpha(&m) >= cfg.m_alpha_threshold(),
            hard: true,
        },
        Check {
            name: "sandwich_pass_rate".into(),
            value: sandwich_pass_rate,
            threshold: 1.0,
            passed: sandwich_bad == 0,
            hard: true,
        },
        Check {
            name: "key_lemma_pass_rate".into(),
            value: key_lemma_pass_rate,
            threshold: 1.0,
            passed: key_bad == 0,
            hard: true,
        },
    ];
    if let Some(swap) = &metric_swap {
        checks.push(Check {
            name: "m_alpha_cc".into(),
            value: alpha(swap),
            threshold: cfg.m_alpha_threshold(),
            passed: alpha(swap) >= cfg.m_alpha_threshold(),
            hard: true,
        });
    }
    let passed = checks.iter().all(|c| c.passed || !c.hard);
    Ok(TailReport {
        config: cfg.clone(),
        count,
        m,
        metric_swap,
        sandwich_pass_rate,
        key_lemma_pass_rate,
        violations,
        checks,
        passed,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoshRow {
    pub lambda: f64,
    pub m_hat: f64,
    pub stderr: f64,
    pub exact: f64,
    /// `|m_hat - exact| / stderr`.
    pub z: f64,
    pub passed: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoshReport {
    pub samples: usize,
    pub censored: usize,
    pub rows: Vec<CoshRow>,
    pub passed: bool,
}

/// Laplace transform of the exit time of a 1-D Brownian motion from
/// `(-1, 1)` against `1 / cosh(sqrt(2 lambda))`, within 3 standard errors.
pub fn brownian_laplace_check(
    lambdas: &[f64],
    samples: usize,
    seed: u64,
) -> Result<CoshReport, TailError> {
    let shape = AlgebraShape::new(1, 1).expect("valid");
    let spec = DiffusionSpec::brownian(shape);
    let metric = NormSpec::new(NormKind::HomSym, shape)?;
    let sigma = sample_sigma_set(&spec, 1.0, &metric, &SimConfig::new(1.0, 100, seed), samples, 0)?;
    let rows: Vec<CoshRow> = lambdas
        .iter()
        .map(|&l| {
            let e = laplace_estimate(&sigma, l)?;
            let exact = 1.0 / (2.0 * l).sqrt().cosh();
            let z = (e.m_hat - exact).abs() / e.stderr;
            Ok(CoshRow {
                lambda: l,
                m_hat: e.m_hat,
                stderr: e.stderr,
                exact,
                z,
                passed: z < 3.0,
            })
        })
        .collect::<Result<_, TailError>>()?;
    Ok(CoshReport {
        samples,
        censored: sigma.censored,
        passed: rows.iter().all(|r| r.passed),
        rows,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CountBoundRow {
    pub n: usize,
    pub p_hat: f64,
    pub bound: f64,
    pub dkw: f64,
    pub passed: bool,
}

/// `P_hat(N_0(B, [0, 1]) >= n)` for 1-D Brownian motion against
/// `2^n exp(-n^2 / 2)` plus the DKW margin.
pub fn brownian_count_bound(ns: &[usize], samples: usize, seed: u64) -> Vec<CountBoundRow> {
    let counts: Vec<usize> = (0..samples as u64)
        .into_par_iter()
        .map(|i| brownian_count_1d(1.0, 1.0, 1e-2, &mut replicate_rng(seed, i)))
        .collect();
    let eps = dkw_epsilon(samples, DKW_CONFIDENCE);
    ns.iter()
        .map(|&n| {
            let p_hat = counts.iter().filter(|&&c| c >= n).count() as f64 / samples as f64;
            let bound = 2f64.powi(n as i32) * (-((n * n) as f64) / 2.0).exp();
            CountBoundRow {
                n,
                p_hat,
                bound,
                dkw: eps,
                passed: p_hat <= bound + eps,
            }
        })
        .collect()
}

/// `x,p_hat,band_lo,band_hi` rows.
pub fn survival_csv(points: &[SurvivalPoint]) -> String {
    let mut out = String::from("x,p_hat,band_lo,band_hi\n");
    for p in points {
        let _ = writeln!(out, "{},{},{},{}", p.x, p.p_hat, p.band_lo, p.band_hi);
    }
    out
}

/// Plot of `log(-log P_hat)` against `log x` with the fitted line.
pub fn fit_svg(title: &str, section: &FitSection) -> String {
    let (w, h, pad) = (480.0, 360.0, 48.0);
    let pts: Vec<(f64, f64)> = section
        .curve
        .iter()
        .filter(|p| p.x > 0.0 && p.p_hat > 0.0 && p.p_hat < 1.0)
        .map(|p| (p.x.ln(), (-p.p_hat.ln()).ln()))
        .collect();
    let mut svg = String::new();
    let _ = writeln!(
        svg,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{w}" height="{h}" viewBox="0 0 {w} {h}" font-family="sans-serif" font-size="12">"#
    );
    let _ = writeln!(svg, r#"<rect width="{w}" height="{h}" fill="white"/>"#);
    let _ = writeln!(svg, r#"<text x="{pad}" y="20">{}</text>"#, escape(title));
    if pts.len() >= 2 {
        let (x0, x1) = bounds(pts.iter().map(|p| p.0));
        let (y0, y1) = bounds(pts.iter().map(|p| p.1));
        let sx = |x: f64| pad + (x - x0) / (x1 - x0) * (w - 2.0 * pad);
        let sy = |y: f64| h - pad - (y - y0) / (y1 - y0) * (h - 2.0 * pad);
        let _ = writeln!(
            svg,
            r##"<rect x="{pad}" y="{pad}" width="{}" height="{}" fill="none" stroke="#999"/>"##,
            w - 2.0 * pad,
            h - 2.0 * pad
        );
        for (x, y) in &pts {
            let _ = writeln!(
                svg,
                r##"<circle cx="{:.2}" cy="{:.2}" r="2.5" fill="#3465a4"/>"##,
                sx(*x),
                sy(*y)
            );
        }
        if let Some(f) = &section.fit {
            let (a, b) = (f.window[0].ln(), f.window[1].ln());
            let line = |x: f64| f.c.ln() + f.alpha * x;
            let _ = writeln!(
                svg,
                r##"<line x1="{:.2}" y1="{:.2}" x2="{:.2}" y2="{:.2}" stroke="#cc0000" stroke-width="1.5"/>"##,
                sx(a),
                sy(line(a)),
                sx(b),
                sy(line(b))
            );
            let _ = writeln!(
                svg,
                r#"<text x="{pad}" y="{}">alpha = {:.3} +/- {:.3}, c = {:.3}</text>"#,
                h - 12.0,
                f.alpha,
                f.stderr_alpha,
                f.c
            );
        }
        let _ = writeln!(
            svg,
            r#"<text x="{}" y="{}" text-anchor="end">log x</text>"#,
            w - pad,
            h - pad + 16.0
        );
        let _ = writeln!(
            svg,
            r#"<text x="12" y="{pad}" transform="rotate(-90 12 {pad})" text-anchor="end">log(-log P)</text>"#
        );
    }
    svg.push_str("</svg>\n");
    svg
}

fn bounds(it: impl Iterator<Item = f64>) -> (f64, f64) {
    let (lo, hi) = it.fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), v| (a.min(v), b.max(v)));
    if hi > lo {
        (lo, hi)
    } else {
        (lo - 1.0, hi + 1.0)
    }
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}
