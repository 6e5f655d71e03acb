//! Browser bindings: a simulated Brownian rough path with its greedy
//! partition, Heisenberg geodesics, and the empirical tail of the greedy
//! count.

use rough_tails::functionals::{greedy_partition, local_pvar_m};
use rough_tails::norms::{heisenberg_geodesic, heisenberg_length, levy_area};
use rough_tails::simulate::{brownian_lift_with, replicate_rng};
use rough_tails::tails::weibull_fit;
use rough_tails::{AlgebraShape, NormKind, NormSpec, SampleSet, SimConfig};
use wasm_bindgen::prelude::*;

const MAX_STEPS: usize = 1 << 14;
const MAX_SAMPLES: usize = 200_000;
const P: f64 = 2.5;

fn heisenberg() -> AlgebraShape {
    AlgebraShape::new(2, 2).expect("valid shape")
}

fn check_steps(n_steps: usize) -> Result<(), String> {
    if n_steps == 0 || n_steps > MAX_STEPS {
        return Err(format!("steps must be in 1..={MAX_STEPS}"));
    }
    Ok(())
}

/// A simulated path with its greedy partition.
#[wasm_bindgen]
pub struct PathView {
    xs: Vec<f64>,
    ys: Vec<f64>,
    hits: Vec<u32>,
    count: usize,
    area: f64,
    m: f64,
}

#[wasm_bindgen]
impl PathView {
    /// First level-1 coordinate at every grid point.
    pub fn xs(&self) -> Vec<f64> {
        self.xs.clone()
    }

    pub fn ys(&self) -> Vec<f64> {
        self.ys.clone()
    }

    /// Grid indices of the greedy stopping times, starting with 0.
    pub fn hits(&self) -> Vec<u32> {
        self.hits.clone()
    }

    pub fn count(&self) -> usize {
        self.count
    }

    /// Levy area of the whole path.
    pub fn area(&self) -> f64 {
        self.area
    }

    /// Accumulated local 2.5-variation, NaN if the grid is too coarse.
    pub fn m(&self) -> f64 {
        self.m
    }
}

pub fn path_view(seed: u32, n_steps: usize, radius: f64) -> Result<PathView, String> {
    check_steps(n_steps)?;
    let shape = heisenberg();
    let cfg = SimConfig::new(1.0, n_steps, seed as u64);
    let path = brownian_lift_with(shape, &cfg, &mut replicate_rng(seed as u64, 0)).map_err(|e| e.to_string())?;
    let metric = NormSpec::new(NormKind::HomSym, shape).map_err(|e| e.to_string())?;
    let greedy = greedy_partition(&path, radius, &metric).map_err(|e| e.to_string())?;
    let (xs, ys) = path.points().map(|x| (x.level(1)[0], x.level(1)[1])).unzip();
    Ok(PathView {
        xs,
        ys,
        hits: greedy.sigma.iter().map(|&s| s as u32).collect(),
        count: greedy.count,
        area: levy_area(&path.point(path.last_index())),
        m: local_pvar_m(&path, P, &metric).unwrap_or(f64::NAN),
    })
}

/// A Heisenberg geodesic with its length.
#[wasm_bindgen]
pub struct Geodesic {
    points: Vec<f64>,
    length: f64,
}

#[wasm_bindgen]
impl Geodesic {
    /// Interleaved `x0, y0, x1, y1, ..`.
    pub fn points(&self) -> Vec<f64> {
        self.points.clone()
    }

    pub fn length(&self) -> f64 {
        self.length
    }
}

pub fn geodesic_of(x: f64, y: f64, area: f64, samples: usize) -> Result<Geodesic, String> {
    if ![x, y, area].iter().all(|v| v.is_finite()) {
        return Err("endpoint and area must be finite".into());
    }
    let pts = heisenberg_geodesic([x, y], area, samples.clamp(1, 4096)).map_err(|e| e.to_string())?;
    Ok(Geodesic {
        points: pts.into_iter().flatten().collect(),
        length: heisenberg_length(x.hypot(y), area).map_err(|e| e.to_string())?,
    })
}

/// Empirical tail of the greedy count over many paths.
#[wasm_bindgen]
pub struct Survival {
    tail: Vec<f64>,
    alpha: f64,
}

#[wasm_bindgen]
impl Survival {
    /// `P(N >= k)` for `k = 0, 1, ..`.
    pub fn tail(&self) -> Vec<f64> {
        self.tail.clone()
    }

    /// Fitted Weibull exponent, NaN when the tail is too thin to fit.
    pub fn alpha(&self) -> f64 {
        self.alpha
    }
}

pub fn count_survival(seed: u32, samples: usize, n_steps: usize, radius: f64) -> Result<Survival, String> {
    check_steps(n_steps)?;
    if samples == 0 || samples > MAX_SAMPLES {
        return Err(format!("samples must be in 1..={MAX_SAMPLES}"));
    }
    let shape = heisenberg();
    let metric = NormSpec::new(NormKind::HomSym, shape).map_err(|e| e.to_string())?;
    let cfg = SimConfig::new(1.0, n_steps, seed as u64);
    let mut counts = Vec::with_capacity(samples);
    for i in 0..samples as u64 {
        let path = brownian_lift_with(shape, &cfg, &mut replicate_rng(seed as u64, i)).map_err(|e| e.to_string())?;
        counts.push(greedy_partition(&path, radius, &metric).map_err(|e| e.to_string())?.count);
    }
    let max = counts.iter().copied().max().unwrap_or(0);
    let mut at_least = vec![0usize; max + 2];
    for &c in &counts {
        at_least[c] += 1;
    }
    for k in (0..=max).rev() {
        at_least[k] += at_least[k + 1];
    }
    let n = samples as f64;
    let set = SampleSet::new(counts.iter().map(|&c| c as f64).collect());
    Ok(Survival {
        tail: at_least[..=max].iter().map(|&a| a as f64 / n).collect(),
        alpha: weibull_fit(&set, Default::default()).map_or(f64::NAN, |f| f.alpha),
    })
}

#[wasm_bindgen]
pub fn simulate_path(seed: u32, n_steps: usize, radius: f64) -> Result<PathView, JsError> {
    path_view(seed, n_steps, radius).map_err(|e| JsError::new(&e))
}

#[wasm_bindgen]
pub fn geodesic(x: f64, y: f64, area: f64, samples: usize) -> Result<Geodesic, JsError> {
    geodesic_of(x, y, area, samples).map_err(|e| JsError::new(&e))
}

#[wasm_bindgen]
pub fn survival(seed: u32, samples: usize, n_steps: usize, radius: f64) -> Result<Survival, JsError> {
    count_survival(seed, samples, n_steps, radius).map_err(|e| JsError::new(&e))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn path_view_is_consistent() {
        let v = path_view(3, 256, 0.5).unwrap();
        assert_eq!(v.xs.len(), 257);
        assert_eq!((v.xs[0], v.ys[0]), (0.0, 0.0));
        assert_eq!(v.hits[0], 0);
        assert!(v.hits.windows(2).all(|w| w[0] < w[1]));
        assert!(v.count + 1 == v.hits.len() || v.count + 2 == v.hits.len());
        assert!(v.m.is_finite() && v.m >= 0.0);
        assert_eq!(path_view(3, 256, 0.5).unwrap().xs, v.xs);
    }

    #[test]
    fn bad_inputs_are_errors() {
        assert!(path_view(1, 0, 1.0).is_err());
        assert!(path_view(1, 16, -1.0).is_err());
        assert!(geodesic_of(f64::NAN, 0.0, 1.0, 10).is_err());
        assert!(count_survival(1, 0, 16, 1.0).is_err());
    }

    #[test]
    fn geodesic_ends_at_the_target() {
        let g = geodesic_of(0.6, -0.2, 0.4, 100).unwrap();
        let n = g.points.len();
        assert_eq!(n, 202);
        assert!((g.points[n - 2] - 0.6).abs() < 1e-12 && (g.points[n - 1] + 0.2).abs() < 1e-12);
        assert!(g.length > 0.6f64.hypot(0.2));
    }

    #[test]
    fn survival_is_a_tail() {
        let s = count_survival(2, 400, 128, 1.0).unwrap();
        assert_eq!(s.tail[0], 1.0);
        assert!(s.tail.windows(2).all(|w| w[1] <= w[0]));
        assert!(*s.tail.last().unwrap() > 0.0);
    }
}
