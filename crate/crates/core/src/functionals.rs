//! Rough path functionals on sampled paths.
//!
//! All suprema and infima range over the sample grid. The central object is
//! the control `omega(i, j) = |x|^p_{p-var; [t_i, t_j]}`, computed by a
//! longest-path dynamic program over grid indices with edge weights
//! `d(x_k, x_l)^p`. [`PathAnalysis`] caches those edge weights so that
//! p-variation windows, control tables, greedy partitions and the
//! accumulated local p-variation share one `O(n^2)` distance sweep.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::algebra::{group_inv, group_mul, AlgebraError, LieElement};
use crate::norms::{NormError, NormKind, NormSpec};
use crate::path::DiscretePath;

/// Slack allowed when asserting the sandwich and key-lemma inequalities on floats.
pub const INEQUALITY_TOL: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum FunctionalError {
    #[error("p-variation exponent must be >= 1, got {0}")]
    InvalidExponent(f64),
    #[error("parameter {name} must be positive and finite, got {value}")]
    NonPositive { name: &'static str, value: f64 },
    #[error("Holder exponent must lie in (0, 1], got {0}")]
    InvalidHolderExponent(f64),
    #[error("index window [{start}, {end}] invalid for a path of {len} samples")]
    Window { start: usize, end: usize, len: usize },
    #[error("inadmissible grid: omega({index}, {next}) = {omega} > 1; refine the sample grid", next = index + 1)]
    InadmissibleGrid { index: usize, omega: f64 },
    #[error("metric is defined on {metric} but the path lives in {path}")]
    MetricShape {
        metric: crate::algebra::AlgebraShape,
        path: crate::algebra::AlgebraShape,
    },
    #[error(transparent)]
    Norm(#[from] NormError),
    #[error(transparent)]
    Algebra(#[from] AlgebraError),
}

/// Inclusive range of grid indices.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Window {
    pub start: usize,
    pub end: usize,
}

impl Window {
    pub fn new(start: usize, end: usize) -> Self {
        Self { start, end }
    }

    pub fn full(path: &DiscretePath) -> Self {
        Self {
            start: 0,
            end: path.last_index(),
        }
    }

    fn validate(&self, path: &DiscretePath) -> Result<(), FunctionalError> {
        if self.start > self.end || self.end >= path.len() {
            return Err(FunctionalError::Window {
                start: self.start,
                end: self.end,
                len: path.len(),
            });
        }
        Ok(())
    }
}

/// Cached values `omega(i, j)` for grid index pairs `i <= j`.
///
/// Row `i` holds `omega(i, i), omega(i, i + 1), ...`. A full table has every
/// row running to the last index; a capped table stops each row at the first
/// entry exceeding the cap (that entry included), which by monotonicity in
/// the window is enough to decide every `omega(i, j) <= cap` query.
#[derive(Debug, Clone, PartialEq)]
pub struct ControlTable {
    p: f64,
    n_points: usize,
    rows: Vec<Vec<f64>>,
}

impl ControlTable {
    pub fn p(&self) -> f64 {
        self.p
    }

    pub fn n_points(&self) -> usize {
        self.n_points
    }

    /// `omega(i, j)` if the row reaches `j`.
    pub fn get(&self, i: usize, j: usize) -> Option<f64> {
        if j < i {
            return None;
        }
        self.rows.get(i)?.get(j - i).copied()
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.rows[i]
    }

    pub fn is_full(&self) -> bool {
        self.rows
            .iter()
            .enumerate()
            .all(|(i, r)| r.len() == self.n_points - i)
    }
}

/// Stopping indices of a greedy partition and the resulting count.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GreedyPartition {
    /// Radius `r` (metric partition) or p-variation threshold.
    pub radius: f64,
    pub metric: NormKind,
    /// `sigma[0] = 0` followed by every recorded hit; the last hit may be the
    /// final grid index.
    pub sigma: Vec<usize>,
    /// Number of hits strictly before the final sample.
    pub count: usize,
}

impl GreedyPartition {
    fn from_hits(radius: f64, metric: NormKind, sigma: Vec<usize>, last: usize) -> Self {
        let count = sigma.iter().skip(1).filter(|&&s| s < last).count();
        Self {
            radius,
            metric,
            sigma,
            count,
        }
    }

    /// Partition points `sigma_0 < .. < sigma_count` followed by the final
    /// index.
    pub fn blocks(&self, last: usize) -> Vec<(usize, usize)> {
        let mut pts: Vec<usize> = self.sigma[..=self.count].to_vec();
        pts.push(last);
        pts.windows(2)
            .filter(|w| w[0] < w[1])
            .map(|w| (w[0], w[1]))
            .collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SandwichReport {
    pub n_pvar: usize,
    pub m: f64,
    pub holds: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KeyLemmaReport {
    pub r: f64,
    pub count: usize,
    pub m: f64,
    pub rhs: f64,
    pub holds: bool,
}

/// Edge weights `d(x_k, x_j)^p` for all `k < j`, stored column by column.
#[derive(Debug, Clone)]
struct PairCosts {
    n: usize,
    data: Vec<f64>,
}

impl PairCosts {
    fn new(path: &DiscretePath, p: f64, metric: &NormSpec) -> Self {
        let n = path.len();
        let mut data = Vec::with_capacity(n * n.saturating_sub(1) / 2);
        for j in 1..n {
            let xj = path.coeffs_at(j);
            for k in 0..j {
                data.push(metric.distance_pow_coeffs(path.coeffs_at(k), xj, p));
            }
        }
        Self { n, data }
    }

    /// Costs `d(x_k, x_j)^p` for `k = 0..j`.
    #[inline]
    fn column(&self, j: usize) -> &[f64] {
        let off = j * (j - 1) / 2;
        &self.data[off..off + j]
    }

    #[inline]
    fn get(&self, k: usize, j: usize) -> f64 {
        self.column(j)[k]
    }

    /// `omega(start, j)` for `j = start..`, stopping after `end` or after the
    /// first value for which `stop` returns true.
    fn omega_row(&self, start: usize, end: usize, stop: impl Fn(f64) -> bool) -> Vec<f64> {
        let mut row = vec![0.0];
        for j in start + 1..=end.min(self.n - 1) {
            let col = &self.column(j)[start..j];
            let best = max_sum(&row, col);
            row.push(best);
            if stop(best) {
                break;
            }
        }
        row
    }
}

/// `max_k a[k] + b[k]`, written with independent lanes so it vectorizes.
#[inline]
fn max_sum(a: &[f64], b: &[f64]) -> f64 {
    const LANES: usize = 8;
    let mut acc = [f64::NEG_INFINITY; LANES];
    let mut ca = a.chunks_exact(LANES);
    let mut cb = b.chunks_exact(LANES);
    for (x, y) in (&mut ca).zip(&mut cb) {
        for l in 0..LANES {
            let v = x[l] + y[l];
            acc[l] = if v > acc[l] { v } else { acc[l] };
        }
    }
    let mut best = acc.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    for (x, y) in ca.remainder().iter().zip(cb.remainder()) {
        let v = x + y;
        if v > best {
            best = v;
        }
    }
    best
}

/// Functionals of one path for a fixed exponent `p` and metric, sharing the
/// pairwise distance sweep.
#[derive(Debug, Clone)]
pub struct PathAnalysis<'a> {
    path: &'a DiscretePath,
    p: f64,
    metric: NormSpec,
    costs: PairCosts,
}

impl<'a> PathAnalysis<'a> {
    pub fn new(path: &'a DiscretePath, p: f64, metric: &NormSpec) -> Result<Self, FunctionalError> {
        check_p(p)?;
        check_metric(path, metric)?;
        Ok(Self {
            path,
            p,
            metric: *metric,
            costs: PairCosts::new(path, p, metric),
        })
    }

    pub fn path(&self) -> &DiscretePath {
        self.path
    }

    pub fn p(&self) -> f64 {
        self.p
    }

    fn last(&self) -> usize {
        self.path.last_index()
    }

    pub fn distance(&self, i: usize, j: usize) -> f64 {
        self.metric
            .distance_coeffs(self.path.coeffs_at(i), self.path.coeffs_at(j))
    }

    /// `omega(i, j)`, recomputed from the cached edge weights.
    pub fn omega(&self, i: usize, j: usize) -> f64 {
        if i >= j {
            return 0.0;
        }
        *self.costs.omega_row(i, j, |_| false).last().expect("row")
    }

    pub fn p_variation(&self, window: Window) -> Result<f64, FunctionalError> {
        window.validate(self.path)?;
        Ok(self.omega(window.start, window.end).powf(1.0 / self.p))
    }

    pub fn control_table(&self) -> ControlTable {
        let n = self.path.len();
        let rows = (0..n)
            .map(|i| self.costs.omega_row(i, n - 1, |_| false))
            .collect();
        ControlTable {
            p: self.p,
            n_points: n,
            rows,
        }
    }

    /// Control table whose rows stop once `omega` exceeds `cap`.
    pub fn capped_control_table(&self, cap: f64) -> ControlTable {
        let n = self.path.len();
        let rows = (0..n)
            .map(|i| self.costs.omega_row(i, n - 1, |w| w > cap))
            .collect();
        ControlTable {
            p: self.p,
            n_points: n,
            rows,
        }
    }

    fn check_admissible(&self) -> Result<(), FunctionalError> {
        for i in 0..self.last() {
            let omega = self.costs.get(i, i + 1);
            if omega > 1.0 {
                return Err(FunctionalError::InadmissibleGrid { index: i, omega });
            }
        }
        Ok(())
    }

    /// Accumulated local p-variation: the largest `sum omega(t_i, t_{i+1})`
    /// over grid partitions whose blocks all satisfy `omega <= 1`.
    pub fn accumulated_local_pvar(&self) -> Result<f64, FunctionalError> {
        self.check_admissible()?;
        let table = self.capped_control_table(1.0);
        Ok(accumulate_admissible(&table))
    }

    /// Greedy partition under the metric: `sigma_k` is the first grid index
    /// after `sigma_{k-1}` at distance `>= r` from `x_{sigma_{k-1}}`.
    pub fn greedy_partition(&self, r: f64) -> Result<GreedyPartition, FunctionalError> {
        greedy_partition(self.path, r, &self.metric)
    }

    /// Greedy partition under p-variation: `tau_{k+1}` is the first grid index
    /// with `|x|_{p-var; [tau_k, tau_{k+1}]} >= threshold`.
    pub fn n_pvar_partition(&self, threshold: f64) -> Result<GreedyPartition, FunctionalError> {
        check_positive("threshold", threshold)?;
        let last = self.last();
        let target = threshold.powf(self.p);
        let mut sigma = vec![0];
        let mut start = 0;
        while start < last {
            let row = self.costs.omega_row(start, last, |w| w >= target);
            let reached = *row.last().expect("row");
            if reached < target {
                break;
            }
            start += row.len() - 1;
            sigma.push(start);
        }
        Ok(GreedyPartition::from_hits(
            threshold,
            self.metric.kind(),
            sigma,
            last,
        ))
    }

    pub fn sandwich(&self) -> Result<SandwichReport, FunctionalError> {
        let m = self.accumulated_local_pvar()?;
        let n_pvar = self.n_pvar_partition(1.0)?.count;
        let n = n_pvar as f64;
        let holds = n <= m + INEQUALITY_TOL && m <= 2.0 * n + 1.0 + INEQUALITY_TOL;
        Ok(SandwichReport { n_pvar, m, holds })
    }

    /// Right-hand side `N + sum_j omega(sigma_{j-1}, sigma_j) + omega(sigma_N, T)`
    /// of the bound on the accumulated local p-variation, together with `M`.
    pub fn key_lemma(&self, r: f64) -> Result<KeyLemmaReport, FunctionalError> {
        let m = self.accumulated_local_pvar()?;
        self.key_lemma_with(r, m)
    }

    pub fn key_lemma_with(&self, r: f64, m: f64) -> Result<KeyLemmaReport, FunctionalError> {
        let part = self.greedy_partition(r)?;
        let rhs = part.count as f64
            + part
                .blocks(self.last())
                .iter()
                .map(|&(a, b)| self.omega(a, b))
                .sum::<f64>();
        Ok(KeyLemmaReport {
            r,
            count: part.count,
            m,
            rhs,
            holds: m <= rhs + INEQUALITY_TOL,
        })
    }
}

/// `M[j] = max_{i < j, omega(i,j) <= 1} M[i] + omega(i, j)` over a table whose
/// rows cover at least every admissible pair.
pub fn accumulate_admissible(table: &ControlTable) -> f64 {
    let n = table.n_points();
    if n <= 1 {
        return 0.0;
    }
    let mut best = vec![f64::NEG_INFINITY; n];
    best[0] = 0.0;
    for i in 0..n - 1 {
        let base = best[i];
        if base == f64::NEG_INFINITY {
            continue;
        }
        for (m, &w) in table.row(i).iter().enumerate().skip(1) {
            if w > 1.0 {
                break;
            }
            let j = i + m;
            let cand = base + w;
            if cand > best[j] {
                best[j] = cand;
            }
        }
    }
    best[n - 1]
}

fn check_p(p: f64) -> Result<(), FunctionalError> {
    if !(p >= 1.0) || !p.is_finite() {
        return Err(FunctionalError::InvalidExponent(p));
    }
    Ok(())
}

fn check_positive(name: &'static str, value: f64) -> Result<(), FunctionalError> {
    if !(value > 0.0) || !value.is_finite() {
        return Err(FunctionalError::NonPositive { name, value });
    }
    Ok(())
}

fn check_metric(path: &DiscretePath, metric: &NormSpec) -> Result<(), FunctionalError> {
    if metric.shape() != path.shape() {
        return Err(FunctionalError::MetricShape {
            metric: metric.shape(),
            path: path.shape(),
        });
    }
    Ok(())
}

/// Path increment `x_i^-1 * x_j`.
pub fn increment(path: &DiscretePath, i: usize, j: usize) -> Result<LieElement, FunctionalError> {
    Window::new(i, j).validate(path)?;
    Ok(group_mul(&group_inv(&path.point(i)), &path.point(j))?)
}

pub fn p_variation(
    path: &DiscretePath,
    p: f64,
    window: Window,
    metric: &NormSpec,
) -> Result<f64, FunctionalError> {
    window.validate(path)?;
    let sub = path.slice(window.start, window.end);
    PathAnalysis::new(&sub, p, metric)?.p_variation(Window::full(&sub))
}

pub fn build_control(
    path: &DiscretePath,
    p: f64,
    metric: &NormSpec,
) -> Result<ControlTable, FunctionalError> {
    Ok(PathAnalysis::new(path, p, metric)?.control_table())
}

/// `max_{i < j} d(x_i, x_j) / (t_j - t_i)^alpha` over the window.
pub fn holder_norm(
    path: &DiscretePath,
    alpha: f64,
    window: Window,
    metric: &NormSpec,
) -> Result<f64, FunctionalError> {
    if !(alpha > 0.0 && alpha <= 1.0) {
        return Err(FunctionalError::InvalidHolderExponent(alpha));
    }
    window.validate(path)?;
    check_metric(path, metric)?;
    let t = path.times();
    let mut best = 0.0_f64;
    for i in window.start..window.end {
        let xi = path.coeffs_at(i);
        for j in i + 1..=window.end {
            let d = metric.distance_coeffs(xi, path.coeffs_at(j));
            best = best.max(d / (t[j] - t[i]).powf(alpha));
        }
    }
    Ok(best)
}

pub fn greedy_partition(
    path: &DiscretePath,
    r: f64,
    metric: &NormSpec,
) -> Result<GreedyPartition, FunctionalError> {
    check_positive("r", r)?;
    check_metric(path, metric)?;
    let last = path.last_index();
    let mut sigma = vec![0];
    let mut anchor = 0;
    for j in 1..=last {
        if metric.distance_coeffs(path.coeffs_at(anchor), path.coeffs_at(j)) >= r {
            sigma.push(j);
            anchor = j;
        }
    }
    Ok(GreedyPartition::from_hits(r, metric.kind(), sigma, last))
}

pub fn n_pvar_partition(
    path: &DiscretePath,
    p: f64,
    threshold: f64,
    metric: &NormSpec,
) -> Result<GreedyPartition, FunctionalError> {
    PathAnalysis::new(path, p, metric)?.n_pvar_partition(threshold)
}

pub fn local_pvar_m(path: &DiscretePath, p: f64, metric: &NormSpec) -> Result<f64, FunctionalError> {
    PathAnalysis::new(path, p, metric)?.accumulated_local_pvar()
}

pub fn sandwich_check(
    path: &DiscretePath,
    p: f64,
    metric: &NormSpec,
) -> Result<SandwichReport, FunctionalError> {
    PathAnalysis::new(path, p, metric)?.sandwich()
}

pub fn key_lemma_bound(
    path: &DiscretePath,
    p: f64,
    r: f64,
    metric: &NormSpec,
) -> Result<KeyLemmaReport, FunctionalError> {
    PathAnalysis::new(path, p, metric)?.key_lemma(r)
}
