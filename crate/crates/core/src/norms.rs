//! Homogeneous norms and the left-invariant distances built from them.
//!
//! Three kinds are provided:
//!
//! * [`NormKind::HomMax`]: `max_k |g^k|^(1/k)` over the tensor-coordinate
//!   levels of `g = exp(A)`, each level measured in the Euclidean norm.
//! * [`NormKind::HomSym`]: `max(HomMax(g), HomMax(g^-1))`, symmetric and the
//!   default metric for greedy partitions.
//! * [`NormKind::CcHeisenberg`]: the exact Carnot-Caratheodory norm for
//!   `d = N = 2`, the length of the shortest horizontal curve, which is a
//!   circular arc whose chord is the level-1 part and whose enclosed signed
//!   area is the Levy-area coefficient.

use serde::{Deserialize, Serialize};
use std::f64::consts::{FRAC_PI_2, PI};
use thiserror::Error;

use crate::algebra::{group_inv, group_mul, AlgebraError, AlgebraShape, GroupElement, LieElement};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum NormError {
    #[error("norm {kind:?} is not defined on {shape}")]
    IncompatibleShape { kind: NormKind, shape: AlgebraShape },
    #[error("geodesic angle solve did not converge (target ratio {target})")]
    NoConvergence { target: f64 },
    #[error(transparent)]
    Algebra(#[from] AlgebraError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NormKind {
    HomMax,
    HomSym,
    CcHeisenberg,
}

impl std::str::FromStr for NormKind {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().replace('-', "_").as_str() {
            "hom_max" => Ok(NormKind::HomMax),
            "hom_sym" => Ok(NormKind::HomSym),
            "cc_heisenberg" | "cc" => Ok(NormKind::CcHeisenberg),
            other => Err(format!("unknown metric '{other}' (expected hom_max, hom_sym or cc_heisenberg)")),
        }
    }
}

/// A norm kind bound to the algebra shape it measures.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct NormSpec {
    kind: NormKind,
    shape: AlgebraShape,
}

impl NormSpec {
    pub fn new(kind: NormKind, shape: AlgebraShape) -> Result<Self, NormError> {
        if kind == NormKind::CcHeisenberg && (shape.dim() != 2 || shape.depth() != 2) {
            return Err(NormError::IncompatibleShape { kind, shape });
        }
        Ok(Self { kind, shape })
    }

    pub fn kind(&self) -> NormKind {
        self.kind
    }

    pub fn shape(&self) -> AlgebraShape {
        self.shape
    }

    /// Whether `d(g, h) = d(h, g)` holds for this kind.
    pub fn is_symmetric(&self) -> bool {
        !matches!(self.kind, NormKind::HomMax) || self.shape.depth() == 1
    }

    fn check(&self, shape: AlgebraShape) -> Result<(), NormError> {
        if shape != self.shape {
            return Err(NormError::Algebra(AlgebraError::ShapeMismatch {
                left: self.shape,
                right: shape,
            }));
        }
        Ok(())
    }

    /// Norm of a group element given in log coordinates.
    pub fn norm(&self, a: &LieElement) -> Result<f64, NormError> {
        self.check(a.shape())?;
        match self.kind {
            NormKind::HomMax => Ok(hom_max_group(&a.exp())),
            NormKind::HomSym => Ok(hom_max_group(&a.exp()).max(hom_max_group(&a.neg().exp()))),
            NormKind::CcHeisenberg => cc_norm_heisenberg(a),
        }
    }

    /// Norm of a group element given in tensor coordinates.
    pub fn norm_group(&self, g: &GroupElement) -> Result<f64, NormError> {
        self.check(g.shape())?;
        match self.kind {
            NormKind::HomMax => Ok(hom_max_group(g)),
            NormKind::HomSym => Ok(hom_max_group(g).max(hom_max_group(&g.inverse()))),
            NormKind::CcHeisenberg => cc_norm_heisenberg(&g.log()),
        }
    }

    /// `d(a, b) = |a^-1 * b|`.
    pub fn distance(&self, a: &LieElement, b: &LieElement) -> Result<f64, NormError> {
        self.check(a.shape())?;
        self.check(b.shape())?;
        Ok(self.distance_coeffs(a.coeffs(), b.coeffs()))
    }

    /// Distance between two points given as full coefficient slices (scalar
    /// part included). Shapes are the caller's responsibility.
    pub(crate) fn distance_coeffs(&self, a: &[f64], b: &[f64]) -> f64 {
        let d = self.shape.dim();
        match self.shape.depth() {
            1 => a[1..=d]
                .iter()
                .zip(&b[1..=d])
                .map(|(x, y)| (y - x) * (y - x))
                .sum::<f64>()
                .sqrt(),
            2 => self.distance_step2(a, b),
            _ => {
                let la = LieElement::from_graded(self.shape, &a[1..]).expect("shape");
                let lb = LieElement::from_graded(self.shape, &b[1..]).expect("shape");
                let inc = group_mul(&group_inv(&la), &lb).expect("shape");
                self.norm(&inc).expect("validated spec")
            }
        }
    }

    /// `distance_coeffs(a, b)^p`, avoiding the root-then-power round trip
    /// for the homogeneous kinds.
    pub(crate) fn distance_pow_coeffs(&self, a: &[f64], b: &[f64], p: f64) -> f64 {
        if self.shape.depth() == 2 && self.kind != NormKind::CcHeisenberg {
            pow_quarter(self.hom_step2_sq(a, b), 0.5 * p)
        } else {
            pow_quarter(self.distance_coeffs(a, b), p)
        }
    }

    /// Squared homogeneous distance at depth 2.
    fn hom_step2_sq(&self, a: &[f64], b: &[f64]) -> f64 {
        let d = self.shape.dim();
        let (a1, a2) = a[1..].split_at(d);
        let (b1, b2) = b[1..].split_at(d);
        let mut h1_sq = 0.0;
        let mut plus = 0.0;
        let mut minus = 0.0;
        for i in 0..d {
            let hi = b1[i] - a1[i];
            h1_sq += hi * hi;
            for j in 0..d {
                let hj = b1[j] - a1[j];
                let h2 = b2[i * d + j] - a2[i * d + j] - 0.5 * (a1[i] * b1[j] - b1[i] * a1[j]);
                let sym = 0.5 * hi * hj;
                plus += (h2 + sym) * (h2 + sym);
                minus += (sym - h2) * (sym - h2);
            }
        }
        let l2 = if self.kind == NormKind::HomSym {
            plus.max(minus)
        } else {
            plus
        };
        h1_sq.max(l2.sqrt())
    }

    fn distance_step2(&self, a: &[f64], b: &[f64]) -> f64 {
        let d = self.shape.dim();
        let (a1, a2) = a[1..].split_at(d);
        let (b1, b2) = b[1..].split_at(d);
        // increment h = (-a) * b in log coordinates
        match self.kind {
            NormKind::CcHeisenberg => {
                let h1 = [b1[0] - a1[0], b1[1] - a1[1]];
                let h2_12 = b2[1] - a2[1] - 0.5 * (a1[0] * b1[1] - b1[0] * a1[1]);
                let h2_21 = b2[2] - a2[2] - 0.5 * (a1[1] * b1[0] - b1[1] * a1[0]);
                let area = 0.5 * (h2_12 - h2_21);
                heisenberg_length(h1[0].hypot(h1[1]), area).unwrap_or(f64::NAN)
            }
            // tensor coordinates of exp(h) and exp(-h) at level 2
            _ => self.hom_step2_sq(a, b).sqrt(),
        }
    }
}

/// `x^q` with cheap roots when `4 q` is an integer.
#[inline]
pub(crate) fn pow_quarter(x: f64, q: f64) -> f64 {
    let quarters = 4.0 * q;
    if quarters.fract() != 0.0 || quarters > 64.0 {
        return x.powf(q);
    }
    let quarters = quarters as u32;
    let mut out = x.powi((quarters / 4) as i32);
    match quarters % 4 {
        1 => out *= x.sqrt().sqrt(),
        2 => out *= x.sqrt(),
        3 => {
            let s = x.sqrt();
            out *= s * s.sqrt();
        }
        _ => {}
    }
    out
}

fn hom_max_group(g: &GroupElement) -> f64 {
    let depth = g.shape().depth();
    (1..=depth)
        .map(|k| {
            let e = g.level(k).iter().map(|c| c * c).sum::<f64>().sqrt();
            e.powf(1.0 / k as f64)
        })
        .fold(0.0, f64::max)
}

/// Homogeneous norm of an element in log coordinates.
pub fn hom_norm(a: &LieElement, spec: &NormSpec) -> Result<f64, NormError> {
    spec.norm(a)
}

/// Left-invariant distance `|g^-1 * h|` under `spec`.
pub fn cc_dist(g: &LieElement, h: &LieElement, spec: &NormSpec) -> Result<f64, NormError> {
    spec.distance(g, h)
}

/// Signed area coefficient `a` of a step-2, `d = 2` Lie element, where the
/// level-2 block is `a (e1 (x) e2 - e2 (x) e1)` plus a symmetric remainder.
pub fn levy_area(a: &LieElement) -> f64 {
    let l2 = a.level(2);
    0.5 * (l2[1] - l2[2])
}

/// Exact Carnot-Caratheodory norm on the Heisenberg group (`d = N = 2`).
pub fn cc_norm_heisenberg(a: &LieElement) -> Result<f64, NormError> {
    let shape = a.shape();
    if shape.dim() != 2 || shape.depth() != 2 {
        return Err(NormError::IncompatibleShape {
            kind: NormKind::CcHeisenberg,
            shape,
        });
    }
    let z = a.level(1);
    heisenberg_length(z[0].hypot(z[1]), levy_area(a))
}

/// Length of the shortest planar curve from 0 to a point at distance
/// `chord` that encloses signed area `area` with the chord.
///
/// With half-angle `phi` the arc has radius `rho = c / (2 sin phi)`, encloses
/// `rho^2 (2 phi - sin 2 phi) / 2` and has length `2 rho phi`; the area ratio
/// `|a| / c^2 = (2 phi - sin 2 phi) / (8 sin^2 phi)` is increasing on `(0, pi)`.
pub fn heisenberg_length(chord: f64, area: f64) -> Result<f64, NormError> {
    let area = area.abs();
    if area == 0.0 {
        return Ok(chord);
    }
    if chord == 0.0 {
        return Ok(2.0 * (PI * area).sqrt());
    }
    let target = area / (chord * chord);
    let phi = solve_half_angle(target)?;
    Ok(chord * phi / phi.sin())
}

/// `samples + 1` points of a Heisenberg geodesic from the origin to the
/// level-1 point `end`, enclosing signed Levy `area`: a circular arc, a full
/// circle when `end` is the origin, or the chord when `area` is zero.
pub fn heisenberg_geodesic(end: [f64; 2], area: f64, samples: usize) -> Result<Vec<[f64; 2]>, NormError> {
    let samples = samples.max(1);
    let chord = end[0].hypot(end[1]);
    let steps = (0..=samples).map(|k| k as f64 / samples as f64);
    if area == 0.0 {
        return Ok(steps.map(|s| [s * end[0], s * end[1]]).collect());
    }
    let sign = area.signum();
    if chord == 0.0 {
        let rho = (area.abs() / PI).sqrt();
        return Ok(steps
            .map(|s| {
                let theta = -FRAC_PI_2 + sign * 2.0 * PI * s;
                [rho * theta.cos(), rho + rho * theta.sin()]
            })
            .collect());
    }
    let phi = solve_half_angle(area.abs() / (chord * chord))?;
    let rho = chord / (2.0 * phi.sin());
    let (cos_r, sin_r) = (end[0] / chord, end[1] / chord);
    // chord along the first axis; positive area bulges to the right so the
    // loop closed by the chord runs counterclockwise
    Ok(steps
        .map(|s| {
            let theta = -FRAC_PI_2 - phi + 2.0 * phi * s;
            let u = 0.5 * chord + rho * theta.cos();
            let v = sign * (rho * phi.cos() + rho * theta.sin());
            [u * cos_r - v * sin_r, u * sin_r + v * cos_r]
        })
        .collect())
}

fn area_ratio(phi: f64) -> f64 {
    let s = phi.sin();
    if phi < 1e-3 {
        // 2phi - sin 2phi = (2phi)^3/6 - (2phi)^5/120 + (2phi)^7/5040
        let x = 2.0 * phi;
        let x2 = x * x;
        let num = x * x2 / 6.0 * (1.0 - x2 / 20.0 + x2 * x2 / 840.0);
        num / (8.0 * s * s)
    } else {
        (2.0 * phi - (2.0 * phi).sin()) / (8.0 * s * s)
    }
}

fn area_ratio_derivative(phi: f64) -> f64 {
    let s = phi.sin();
    let u = 2.0 * phi - (2.0 * phi).sin();
    let s2 = s * s;
    0.5 - u * (2.0 * phi).sin() / (8.0 * s2 * s2)
}

const ANGLE_TOL: f64 = 1e-10;

fn solve_half_angle(target: f64) -> Result<f64, NormError> {
    let (mut lo, mut hi) = (0.0_f64, PI);
    // asymptotic starting points at both ends of the bracket
    let mut phi = if target < 0.3 {
        3.0 * target
    } else {
        (PI - (PI / (4.0 * target)).sqrt()).max(0.5)
    };
    if !(phi > lo && phi < hi) {
        phi = 0.5 * (lo + hi);
    }
    for _ in 0..200 {
        let g = area_ratio(phi) - target;
        if g > 0.0 {
            hi = phi;
        } else {
            lo = phi;
        }
        let scale = target.max(1.0);
        if g.abs() <= 1e-14 * scale || hi - lo <= ANGLE_TOL * 1e-3 {
            return Ok(phi);
        }
        let dg = area_ratio_derivative(phi);
        let mut next = phi - g / dg;
        if !(dg > 0.0) || !(next > lo && next < hi) {
            next = 0.5 * (lo + hi);
        }
        if (next - phi).abs() <= ANGLE_TOL * 1e-3 * phi.max(1e-300) {
            return Ok(next);
        }
        phi = next;
    }
    if hi - lo <= ANGLE_TOL {
        Ok(0.5 * (lo + hi))
    } else {
        Err(NormError::NoConvergence { target })
    }
}
