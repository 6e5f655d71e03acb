//! Samplers for lifted Brownian motion, group-valued Markov chains with a
//! variable diffusion matrix, and hitting times of metric balls.
//!
//! Every sampler is a pure function of its configuration and an explicit
//! random stream. Batches draw replicate `i` from [`replicate_rng`]`(seed, i)`
//! and collect in replicate order, so results do not depend on how many
//! threads run them.

use std::fmt;
use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::algebra::{AlgebraError, AlgebraShape, LieElement};
use crate::norms::NormSpec;
use crate::path::DiscretePath;
use crate::tails::{ks_two_sample, KsResult, SampleSet};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SimError {
    #[error("horizon must be positive and finite, got {0}")]
    Horizon(f64),
    #[error("n_steps must be at least 1")]
    Steps,
    #[error("radius must be positive and finite, got {0}")]
    Radius(f64),
    #[error("ellipticity constant must be >= 1, got {0}")]
    Lambda(f64),
    #[error("diffusion matrix at step {step} is outside the ellipticity class (Lambda = {lambda})")]
    Ellipticity { step: usize, lambda: f64 },
    #[error("diffusion matrix has {found} entries, expected {expected}")]
    MatrixSize { expected: usize, found: usize },
    #[error("metric is defined on {metric} but the diffusion lives in {spec}")]
    MetricShape {
        metric: AlgebraShape,
        spec: AlgebraShape,
    },
    #[error("field parameters invalid: {0}")]
    Field(String),
    #[error(transparent)]
    Algebra(#[from] AlgebraError),
}

/// Random stream of replicate `index` under a master seed.
pub fn replicate_rng(seed: u64, index: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index);
    rng
}

pub type FieldFn = dyn Fn(&LieElement) -> Vec<f64> + Send + Sync;

/// Diffusion matrix field `x -> a(x)`, symmetric `d x d`, row-major.
#[derive(Clone, Default, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum DiffusionField {
    #[default]
    Identity,
    Scalar {
        c: f64,
    },
    /// `diag(low, high, low, ..)` on cells of side `cell` in the level-1
    /// coordinates with even index sum and `diag(high, low, ..)` on odd ones.
    Checkerboard {
        low: f64,
        high: f64,
        cell: f64,
    },
    #[serde(skip)]
    Custom(Arc<FieldFn>),
}

impl fmt::Debug for DiffusionField {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::Identity => write!(f, "Identity"),
            Self::Scalar { c } => write!(f, "Scalar {{ c: {c} }}"),
            Self::Checkerboard { low, high, cell } => {
                write!(f, "Checkerboard {{ low: {low}, high: {high}, cell: {cell} }}")
            }
            Self::Custom(_) => write!(f, "Custom(..)"),
        }
    }
}

impl PartialEq for DiffusionField {
    fn eq(&self, other: &Self) -> bool {
        match (self, other) {
            (Self::Identity, Self::Identity) => true,
            (Self::Scalar { c: a }, Self::Scalar { c: b }) => a == b,
            (
                Self::Checkerboard { low, high, cell },
                Self::Checkerboard {
                    low: l2,
                    high: h2,
                    cell: c2,
                },
            ) => low == l2 && high == h2 && cell == c2,
            (Self::Custom(a), Self::Custom(b)) => Arc::ptr_eq(a, b),
            _ => false,
        }
    }
}

impl DiffusionField {
    fn evaluate(&self, x: &LieElement, out: &mut [f64]) {
        let d = x.shape().dim();
        match self {
            Self::Identity => diagonal(out, d, |_| 1.0),
            Self::Scalar { c } => diagonal(out, d, |_| *c),
            Self::Checkerboard { low, high, cell } => {
                let parity = x
                    .level(1)
                    .iter()
                    .map(|v| (v / cell).floor() as i64)
                    .sum::<i64>()
                    .rem_euclid(2);
                diagonal(out, d, |i| if (i as i64 + parity) % 2 == 0 { *low } else { *high });
            }
            Self::Custom(f) => {
                let a = f(x);
                out.copy_from_slice(&a[..out.len()]);
            }
        }
    }
}

fn diagonal(out: &mut [f64], d: usize, f: impl Fn(usize) -> f64) {
    out.fill(0.0);
    for i in 0..d {
        out[i * d + i] = f(i);
    }
}

/// Diffusion in the step-`N` group driven by the field `a`.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DiffusionSpec {
    pub shape: AlgebraShape,
    pub field: DiffusionField,
    pub lambda: f64,
    #[serde(default)]
    pub label: String,
}

impl DiffusionSpec {
    pub fn brownian(shape: AlgebraShape) -> Self {
        Self {
            shape,
            field: DiffusionField::Identity,
            lambda: 1.0,
            label: "brownian".into(),
        }
    }

    pub fn validate(&self) -> Result<(), SimError> {
        if !(self.lambda >= 1.0) || !self.lambda.is_finite() {
            return Err(SimError::Lambda(self.lambda));
        }
        let inside = |v: f64| v.is_finite() && v * self.lambda >= 1.0 - 1e-12 && v <= self.lambda * (1.0 + 1e-12);
        match &self.field {
            DiffusionField::Scalar { c } if !inside(*c) => {
                Err(SimError::Field(format!("c = {c} outside [1/Lambda, Lambda]")))
            }
            DiffusionField::Checkerboard { low, high, cell } => {
                if !inside(*low) || !inside(*high) {
                    Err(SimError::Field(format!(
                        "checkerboard values {low}, {high} outside [1/Lambda, Lambda]"
                    )))
                } else if !(*cell > 0.0) || !cell.is_finite() {
                    Err(SimError::Field(format!("cell size {cell} must be positive")))
                } else {
                    Ok(())
                }
            }
            _ => Ok(()),
        }
    }

    /// Field `a^r(x) = a(delta_{1/r} x)` of the rescaled process.
    pub fn rescaled(&self, r: f64) -> Self {
        let field = match &self.field {
            DiffusionField::Checkerboard { low, high, cell } => DiffusionField::Checkerboard {
                low: *low,
                high: *high,
                cell: cell * r,
            },
            DiffusionField::Custom(f) => {
                let f = Arc::clone(f);
                DiffusionField::Custom(Arc::new(move |x: &LieElement| f(&x.dilate(1.0 / r))))
            }
            other => other.clone(),
        };
        Self {
            field,
            label: format!("{} (rescaled by {r})", self.label),
            ..self.clone()
        }
    }

    fn is_constant_scalar(&self) -> Option<f64> {
        match self.field {
            DiffusionField::Identity => Some(1.0),
            DiffusionField::Scalar { c } => Some(c),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Scheme {
    #[default]
    GroupEuler,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimConfig {
    pub horizon: f64,
    pub n_steps: usize,
    /// Graded log coordinates of the start point; empty means the identity.
    #[serde(default)]
    pub x0: Vec<f64>,
    pub seed: u64,
    #[serde(default)]
    pub scheme: Scheme,
}

impl SimConfig {
    pub fn new(horizon: f64, n_steps: usize, seed: u64) -> Self {
        Self {
            horizon,
            n_steps,
            x0: Vec::new(),
            seed,
            scheme: Scheme::GroupEuler,
        }
    }

    pub fn validate(&self) -> Result<(), SimError> {
        if !(self.horizon > 0.0) || !self.horizon.is_finite() {
            return Err(SimError::Horizon(self.horizon));
        }
        if self.n_steps == 0 {
            return Err(SimError::Steps);
        }
        Ok(())
    }

    pub fn dt(&self) -> f64 {
        self.horizon / self.n_steps as f64
    }

    pub fn start(&self, shape: AlgebraShape) -> Result<LieElement, SimError> {
        if self.x0.is_empty() {
            Ok(LieElement::zero(shape))
        } else {
            Ok(LieElement::from_graded(shape, &self.x0)?)
        }
    }
}

/// Lower-triangular Cholesky factor of a symmetric positive definite matrix.
fn cholesky(a: &[f64], d: usize, out: &mut [f64]) -> bool {
    out.fill(0.0);
    for j in 0..d {
        let mut s = a[j * d + j];
        for k in 0..j {
            s -= out[j * d + k] * out[j * d + k];
        }
        if !(s > 0.0) {
            return false;
        }
        let l = s.sqrt();
        out[j * d + j] = l;
        for i in j + 1..d {
            let mut s = a[i * d + j];
            for k in 0..j {
                s -= out[i * d + k] * out[j * d + k];
            }
            out[i * d + j] = s / l;
        }
    }
    true
}

/// Whether `Lambda^-1 |y|^2 <= y^T a y <= Lambda |y|^2` for all `y`.
pub fn in_ellipticity_class(a: &[f64], d: usize, lambda: f64) -> bool {
    let slack = 1e-12;
    let mut shifted = a.to_vec();
    let mut scratch = vec![0.0; d * d];
    for i in 0..d {
        shifted[i * d + i] -= 1.0 / lambda - slack;
    }
    if !cholesky(&shifted, d, &mut scratch) {
        return false;
    }
    for v in shifted.iter_mut().zip(a) {
        *v.0 = -*v.1;
    }
    for i in 0..d {
        shifted[i * d + i] += lambda + slack;
    }
    cholesky(&shifted, d, &mut scratch)
}

/// Left-invariant Euler stepper `x <- x * (sigma(x) dW)` with
/// `sigma sigma^T = a(x)`.
struct Walker<'a> {
    spec: &'a DiffusionSpec,
    x: LieElement,
    sqrt_dt: f64,
    noise: Vec<f64>,
    inc: Vec<f64>,
    a: Vec<f64>,
    chol: Vec<f64>,
    steps: usize,
}

impl<'a> Walker<'a> {
    fn new(spec: &'a DiffusionSpec, x0: LieElement, dt: f64) -> Self {
        let d = spec.shape.dim();
        Self {
            spec,
            x: x0,
            sqrt_dt: dt.sqrt(),
            noise: vec![0.0; d],
            inc: vec![0.0; d],
            a: vec![0.0; d * d],
            chol: vec![0.0; d * d],
            steps: 0,
        }
    }

    fn step<R: Rng + ?Sized>(&mut self, rng: &mut R) -> Result<(), SimError> {
        let d = self.spec.shape.dim();
        for z in self.noise.iter_mut() {
            let n: f64 = rng.sample(StandardNormal);
            *z = n * self.sqrt_dt;
        }
        self.spec.field.evaluate(&self.x, &mut self.a);
        if !in_ellipticity_class(&self.a, d, self.spec.lambda)
            || !cholesky(&self.a, d, &mut self.chol)
        {
            return Err(SimError::Ellipticity {
                step: self.steps,
                lambda: self.spec.lambda,
            });
        }
        for i in 0..d {
            let row = &self.chol[i * d..i * d + i + 1];
            self.inc[i] = row.iter().zip(&self.noise).map(|(l, z)| l * z).sum();
        }
        self.x.push_level1(&self.inc);
        self.steps += 1;
        Ok(())
    }

    /// Plain Brownian increment, no field evaluation.
    fn brownian_step<R: Rng + ?Sized>(&mut self, rng: &mut R) {
        for z in self.noise.iter_mut() {
            let n: f64 = rng.sample(StandardNormal);
            *z = n * self.sqrt_dt;
        }
        self.x.push_level1(&self.noise);
        self.steps += 1;
    }
}

/// Chen lift of a piecewise-linear Brownian path, seeded by `config.seed`.
pub fn brownian_lift(shape: AlgebraShape, config: &SimConfig) -> Result<DiscretePath, SimError> {
    brownian_lift_with(shape, config, &mut ChaCha8Rng::seed_from_u64(config.seed))
}

pub fn brownian_lift_with<R: Rng + ?Sized>(
    shape: AlgebraShape,
    config: &SimConfig,
    rng: &mut R,
) -> Result<DiscretePath, SimError> {
    config.validate()?;
    let spec = DiffusionSpec::brownian(shape);
    let dt = config.dt();
    let mut w = Walker::new(&spec, config.start(shape)?, dt);
    let mut path = DiscretePath::starting_at(0.0, &w.x, config.n_steps);
    for k in 1..=config.n_steps {
        w.brownian_step(rng);
        path.push_unchecked(k as f64 * dt, &w.x);
    }
    Ok(path)
}

/// Geometric Euler chain for the diffusion `spec`, seeded by `config.seed`.
pub fn markov_group_euler(spec: &DiffusionSpec, config: &SimConfig) -> Result<DiscretePath, SimError> {
    markov_group_euler_with(spec, config, &mut ChaCha8Rng::seed_from_u64(config.seed))
}

pub fn markov_group_euler_with<R: Rng + ?Sized>(
    spec: &DiffusionSpec,
    config: &SimConfig,
    rng: &mut R,
) -> Result<DiscretePath, SimError> {
    config.validate()?;
    spec.validate()?;
    let dt = config.dt();
    let mut w = Walker::new(spec, config.start(spec.shape)?, dt);
    let mut path = DiscretePath::starting_at(0.0, &w.x, config.n_steps);
    for k in 1..=config.n_steps {
        w.step(rng)?;
        path.push_unchecked(k as f64 * dt, &w.x);
    }
    Ok(path)
}

/// Blocks of length `horizon` simulated before a hitting time is censored.
pub const MAX_HORIZON_BLOCKS: usize = 64;

/// Hitting time of the ball of radius `r` around the start, or `None` when
/// the path stays inside for [`MAX_HORIZON_BLOCKS`] horizons.
///
/// In dimension one at depth one with a constant field the crossing is
/// located exactly up to a tiny dyadic resolution using Brownian-bridge
/// crossing probabilities; otherwise the first grid time with
/// `d(x_0, x_t) >= r` is returned.
pub fn sample_sigma<R: Rng + ?Sized>(
    spec: &DiffusionSpec,
    r: f64,
    metric: &NormSpec,
    config: &SimConfig,
    rng: &mut R,
) -> Result<Option<f64>, SimError> {
    config.validate()?;
    spec.validate()?;
    if !(r > 0.0) || !r.is_finite() {
        return Err(SimError::Radius(r));
    }
    if metric.shape() != spec.shape {
        return Err(SimError::MetricShape {
            metric: metric.shape(),
            spec: spec.shape,
        });
    }
    let cap = config.horizon * MAX_HORIZON_BLOCKS as f64;
    if spec.shape.dim() == 1 && spec.shape.depth() == 1 {
        if let Some(c) = spec.is_constant_scalar() {
            return Ok(bridge_exit_time(r / c.sqrt(), config.dt(), cap, rng));
        }
    }
    let x0 = config.start(spec.shape)?;
    let dt = config.dt();
    let fast = matches!(spec.field, DiffusionField::Identity);
    let mut w = Walker::new(spec, x0.clone(), dt);
    let total = config.n_steps * MAX_HORIZON_BLOCKS;
    for k in 1..=total {
        if fast {
            w.brownian_step(rng);
        } else {
            w.step(rng)?;
        }
        if metric.distance_coeffs(x0.coeffs(), w.x.coeffs()) >= r {
            return Ok(Some(k as f64 * dt));
        }
    }
    Ok(None)
}

/// Maximum bisection depth when locating a bridge crossing.
const BRIDGE_DEPTH: u32 = 20;
/// Intervals whose crossing probability is below this are not refined.
const BRIDGE_SKIP: f64 = 1e-10;

/// Exit time of a standard Brownian motion from `(-u, u)`.
fn bridge_exit_time<R: Rng + ?Sized>(u: f64, dt: f64, cap: f64, rng: &mut R) -> Option<f64> {
    let h = dt.min(u * u * 1e-2);
    let sqrt_h = h.sqrt();
    let mut x = 0.0_f64;
    let mut t = 0.0_f64;
    while t < cap {
        let z: f64 = rng.sample(StandardNormal);
        let y = x + sqrt_h * z;
        if let Some(hit) = bridge_first_hit(u, t, x, y, h, 0, rng) {
            return Some(hit);
        }
        x = y;
        t += h;
    }
    None
}

/// First exit time in `[t, t + h]` of a Brownian bridge from `x` to `y`, if
/// any, by recursive midpoint sampling.
fn bridge_first_hit<R: Rng + ?Sized>(
    u: f64,
    t: f64,
    x: f64,
    y: f64,
    h: f64,
    depth: u32,
    rng: &mut R,
) -> Option<f64> {
    let outside = y.abs() >= u;
    if !outside {
        let p = (-2.0 * (u - x) * (u - y) / h).exp() + (-2.0 * (u + x) * (u + y) / h).exp();
        if p < BRIDGE_SKIP {
            return None;
        }
        if depth == BRIDGE_DEPTH {
            let v: f64 = rng.random();
            return (v < p).then_some(t + 0.5 * h);
        }
    } else if depth == BRIDGE_DEPTH {
        return Some(t + 0.5 * h);
    }
    let z: f64 = rng.sample(StandardNormal);
    let m = 0.5 * (x + y) + 0.5 * h.sqrt() * z;
    bridge_first_hit(u, t, x, m, 0.5 * h, depth + 1, rng)
        .or_else(|| bridge_first_hit(u, t + 0.5 * h, m, y, 0.5 * h, depth + 1, rng))
}

/// Greedy count `N_0^r` of a one-dimensional Brownian motion on `[0, t]`,
/// built from successive exact exit times of intervals of half-width `r`.
pub fn brownian_count_1d<R: Rng + ?Sized>(r: f64, t: f64, dt: f64, rng: &mut R) -> usize {
    let mut elapsed = 0.0;
    let mut count = 0;
    loop {
        match bridge_exit_time(r, dt, t - elapsed, rng) {
            Some(s) if elapsed + s < t => {
                elapsed += s;
                count += 1;
            }
            _ => return count,
        }
    }
}

/// `n` independent hitting times; replicate `i` uses stream `offset + i`.
pub fn sample_sigma_set(
    spec: &DiffusionSpec,
    r: f64,
    metric: &NormSpec,
    config: &SimConfig,
    n: usize,
    offset: u64,
) -> Result<SampleSet, SimError> {
    let draws: Vec<Option<f64>> = (0..n as u64)
        .into_par_iter()
        .map(|i| {
            let mut rng = replicate_rng(config.seed, offset + i);
            sample_sigma(spec, r, metric, config, &mut rng)
        })
        .collect::<Result<_, _>>()?;
    let censored = draws.iter().filter(|d| d.is_none()).count();
    let values = draws.into_iter().flatten().collect();
    let meta = serde_json::json!({
        "quantity": "sigma",
        "radius": r,
        "metric": metric.kind(),
        "spec": spec,
        "config": config,
        "replicates": n,
        "stream_offset": offset,
    });
    Ok(SampleSet {
        values,
        censored,
        censor_value: Some(config.horizon * MAX_HORIZON_BLOCKS as f64),
        meta,
    })
}

/// `t -> r^2 t` and `x -> delta_r x`.
pub fn scaling_transform(path: &DiscretePath, r: f64) -> DiscretePath {
    path.map_points(|x| x.dilate(r))
        .map_times(|t| r * r * t)
        .expect("positive rescaling keeps times increasing")
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScalingReport {
    pub r: f64,
    pub samples: usize,
    pub censored_scaled: usize,
    pub censored_reference: usize,
    pub ks: KsResult,
    pub median_scaled: f64,
    pub median_reference: f64,
}

/// Compares the hitting time of radius `r` for the field `a^r` with `r^2`
/// times the hitting time of radius 1 for `a` started at `delta_{1/r} x_0`.
/// The reference side runs on the step `dt / r^2`, so both sides see the
/// same grid after rescaling.
pub fn scaling_check(
    spec: &DiffusionSpec,
    r: f64,
    metric: &NormSpec,
    config: &SimConfig,
    n: usize,
) -> Result<ScalingReport, SimError> {
    if !(r > 0.0) || !r.is_finite() {
        return Err(SimError::Radius(r));
    }
    let scaled = sample_sigma_set(&spec.rescaled(r), r, metric, config, n, 0)?;
    let start = config.start(spec.shape)?.dilate(1.0 / r);
    let reference_config = SimConfig {
        horizon: config.horizon / (r * r),
        x0: start.graded().to_vec(),
        ..config.clone()
    };
    let reference = sample_sigma_set(spec, 1.0, metric, &reference_config, n, n as u64)?;
    let stretched: Vec<f64> = reference.values.iter().map(|s| r * r * s).collect();
    let ks = ks_two_sample(&scaled.values, &stretched);
    Ok(ScalingReport {
        r,
        samples: n,
        censored_scaled: scaled.censored,
        censored_reference: reference.censored,
        ks,
        median_scaled: median(&scaled.values),
        median_reference: median(&stretched),
    })
}

fn median(v: &[f64]) -> f64 {
    if v.is_empty() {
        return f64::NAN;
    }
    let mut s = v.to_vec();
    s.sort_by(f64::total_cmp);
    s[s.len() / 2]
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HeatKernelProfile {
    pub t: f64,
    pub radii: Vec<f64>,
    pub exceedance: Vec<f64>,
    /// Least-squares slope of `log P(d(x_0, X_t) >= R)` against `R^2`.
    pub gaussian_rate: f64,
    /// Whether the exceedance curve decays at least like the fitted Gaussian
    /// over the tested radii.
    pub gaussian_like: bool,
}

/// Empirical exceedance probabilities of `d(x_0, X_t)` at a fixed time.
/// Recorded for inspection only.
pub fn heat_kernel_profile(
    spec: &DiffusionSpec,
    metric: &NormSpec,
    config: &SimConfig,
    radii: &[f64],
    n: usize,
) -> Result<HeatKernelProfile, SimError> {
    let x0 = config.start(spec.shape)?;
    let dists: Vec<f64> = (0..n as u64)
        .into_par_iter()
        .map(|i| {
            let mut rng = replicate_rng(config.seed, i);
            let p = markov_group_euler_with(spec, config, &mut rng)?;
            Ok(metric.distance_coeffs(x0.coeffs(), p.coeffs_at(p.last_index())))
        })
        .collect::<Result<_, SimError>>()?;
    let exceedance: Vec<f64> = radii
        .iter()
        .map(|&r| dists.iter().filter(|&&d| d >= r).count() as f64 / n as f64)
        .collect();
    let pts: Vec<(f64, f64)> = radii
        .iter()
        .zip(&exceedance)
        .filter(|(_, &p)| p > 0.0)
        .map(|(&r, &p)| (r * r, p.ln()))
        .collect();
    let gaussian_rate = crate::tails::least_squares(&pts).map_or(f64::NAN, |f| f.slope);
    // the log-exceedance must fall below its chord through the first and
    // last usable radii, i.e. be concave in R^2 or better
    let gaussian_like = match (pts.first(), pts.last()) {
        (Some(a), Some(b)) if pts.len() >= 3 => pts.iter().all(|q| {
            let chord = a.1 + (b.1 - a.1) * (q.0 - a.0) / (b.0 - a.0);
            q.1 <= chord + 0.25
        }),
        _ => false,
    };
    Ok(HeatKernelProfile {
        t: config.horizon,
        radii: radii.to_vec(),
        exceedance,
        gaussian_rate,
        gaussian_like,
    })
}
