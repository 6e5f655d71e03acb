//! Truncated tensor algebra `T^N(R^d)` and the step-`N` free nilpotent group.
//!
//! Elements are stored densely: level `k` is a row-major block of `d^k`
//! coefficients and all levels are concatenated into one `Vec<f64>`, level 0
//! first. Group elements carry a unit scalar part, Lie elements a zero one.
//! Paths are kept in log coordinates ([`LieElement`]) and multiplied with
//! [`group_mul`], which uses the closed-form step-2 product when `N <= 2` and
//! `log(exp(a) exp(b))` otherwise.

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Largest truncation depth supported by the dense representation.
pub const MAX_DEPTH: usize = 4;

const UNIT_TOL: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum AlgebraError {
    #[error("invalid algebra shape: dimension {dim}, depth {depth} (need dim >= 1, 1 <= depth <= {MAX_DEPTH})")]
    InvalidShape { dim: usize, depth: usize },
    #[error("shape mismatch: {left} vs {right}")]
    ShapeMismatch {
        left: AlgebraShape,
        right: AlgebraShape,
    },
    #[error("level-0 coefficient must be {expected}, found {found}")]
    LevelZero { expected: f64, found: f64 },
    #[error("expected {expected} coefficients, found {found}")]
    Length { expected: usize, found: usize },
    #[error("segment list is empty")]
    NoSegments,
}

/// Ambient dimension `d` and truncation depth `N`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "RawShape", into = "RawShape")]
pub struct AlgebraShape {
    dim: usize,
    depth: usize,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawShape {
    dim: usize,
    depth: usize,
}

impl TryFrom<RawShape> for AlgebraShape {
    type Error = AlgebraError;
    fn try_from(raw: RawShape) -> Result<Self, Self::Error> {
        AlgebraShape::new(raw.dim, raw.depth)
    }
}

impl From<AlgebraShape> for RawShape {
    fn from(s: AlgebraShape) -> Self {
        RawShape {
            dim: s.dim,
            depth: s.depth,
        }
    }
}

impl std::fmt::Display for AlgebraShape {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "T^{}(R^{})", self.depth, self.dim)
    }
}

impl AlgebraShape {
    pub fn new(dim: usize, depth: usize) -> Result<Self, AlgebraError> {
        if dim == 0 || depth == 0 || depth > MAX_DEPTH {
            return Err(AlgebraError::InvalidShape { dim, depth });
        }
        Ok(Self { dim, depth })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn depth(&self) -> usize {
        self.depth
    }

    /// Number of coefficients in level `k`, i.e. `d^k`.
    pub fn level_len(&self, k: usize) -> usize {
        self.dim.pow(k as u32)
    }

    /// Offset of level `k` in the flat coefficient vector.
    pub fn level_offset(&self, k: usize) -> usize {
        (0..k).map(|i| self.level_len(i)).sum()
    }

    /// Total number of coefficients, levels 0 through `N`.
    pub fn len(&self) -> usize {
        self.level_offset(self.depth + 1)
    }

    fn check(&self, other: &AlgebraShape) -> Result<(), AlgebraError> {
        if self != other {
            return Err(AlgebraError::ShapeMismatch {
                left: *self,
                right: *other,
            });
        }
        Ok(())
    }
}

/// A general element of the truncated tensor algebra.
#[derive(Debug, Clone, PartialEq)]
pub struct TensorElement {
    shape: AlgebraShape,
    coeffs: Vec<f64>,
}

impl TensorElement {
    pub fn zero(shape: AlgebraShape) -> Self {
        Self {
            shape,
            coeffs: vec![0.0; shape.len()],
        }
    }

    pub fn unit(shape: AlgebraShape) -> Self {
        let mut t = Self::zero(shape);
        t.coeffs[0] = 1.0;
        t
    }

    pub fn from_coeffs(shape: AlgebraShape, coeffs: Vec<f64>) -> Result<Self, AlgebraError> {
        if coeffs.len() != shape.len() {
            return Err(AlgebraError::Length {
                expected: shape.len(),
                found: coeffs.len(),
            });
        }
        Ok(Self { shape, coeffs })
    }

    /// Builds an element from one block per level, `levels[k]` of size `d^k`.
    pub fn from_levels(shape: AlgebraShape, levels: &[Vec<f64>]) -> Result<Self, AlgebraError> {
        if levels.len() != shape.depth + 1 {
            return Err(AlgebraError::Length {
                expected: shape.depth + 1,
                found: levels.len(),
            });
        }
        let mut coeffs = Vec::with_capacity(shape.len());
        for (k, block) in levels.iter().enumerate() {
            if block.len() != shape.level_len(k) {
                return Err(AlgebraError::Length {
                    expected: shape.level_len(k),
                    found: block.len(),
                });
            }
            coeffs.extend_from_slice(block);
        }
        Ok(Self { shape, coeffs })
    }

    pub fn shape(&self) -> AlgebraShape {
        self.shape
    }

    pub fn coeffs(&self) -> &[f64] {
        &self.coeffs
    }

    pub fn into_coeffs(self) -> Vec<f64> {
        self.coeffs
    }

    pub fn scalar(&self) -> f64 {
        self.coeffs[0]
    }

    pub fn level(&self, k: usize) -> &[f64] {
        let off = self.shape.level_offset(k);
        &self.coeffs[off..off + self.shape.level_len(k)]
    }

    pub fn level_mut(&mut self, k: usize) -> &mut [f64] {
        let off = self.shape.level_offset(k);
        let len = self.shape.level_len(k);
        &mut self.coeffs[off..off + len]
    }

    pub fn add(&self, other: &Self) -> Result<Self, AlgebraError> {
        self.shape.check(&other.shape)?;
        let coeffs = self
            .coeffs
            .iter()
            .zip(&other.coeffs)
            .map(|(a, b)| a + b)
            .collect();
        Ok(Self {
            shape: self.shape,
            coeffs,
        })
    }

    pub fn sub(&self, other: &Self) -> Result<Self, AlgebraError> {
        self.shape.check(&other.shape)?;
        let coeffs = self
            .coeffs
            .iter()
            .zip(&other.coeffs)
            .map(|(a, b)| a - b)
            .collect();
        Ok(Self {
            shape: self.shape,
            coeffs,
        })
    }

    pub fn scale(&self, s: f64) -> Self {
        Self {
            shape: self.shape,
            coeffs: self.coeffs.iter().map(|c| c * s).collect(),
        }
    }

    /// Scales level `k` by `r^k` (the dilation, applied to every level).
    pub fn dilate(&self, r: f64) -> Self {
        let mut out = self.clone();
        let mut factor = 1.0;
        for k in 0..=self.shape.depth {
            for c in out.level_mut(k) {
                *c *= factor;
            }
            factor *= r;
        }
        out
    }

    /// Truncated tensor product: `(ab)^k = sum_{i+j=k} a^i (x) b^j`.
    pub fn mul(&self, other: &Self) -> Result<Self, AlgebraError> {
        self.shape.check(&other.shape)?;
        let shape = self.shape;
        let mut out = Self::zero(shape);
        for k in 0..=shape.depth {
            let off = shape.level_offset(k);
            for i in 0..=k {
                let j = k - i;
                let a = self.level(i);
                let b = other.level(j);
                let nb = b.len();
                for (ia, &av) in a.iter().enumerate() {
                    if av == 0.0 {
                        continue;
                    }
                    let dst = &mut out.coeffs[off + ia * nb..off + (ia + 1) * nb];
                    for (d, &bv) in dst.iter_mut().zip(b) {
                        *d += av * bv;
                    }
                }
            }
        }
        Ok(out)
    }

    /// Largest coefficient-wise absolute difference.
    pub fn max_abs_diff(&self, other: &Self) -> f64 {
        self.coeffs
            .iter()
            .zip(&other.coeffs)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
    }
}

/// Point of the step-`N` group in tensor coordinates (unit scalar part).
#[derive(Debug, Clone, PartialEq)]
pub struct GroupElement(TensorElement);

/// Element of the truncated Lie algebra (zero scalar part); the log chart
/// of the group.
#[derive(Debug, Clone, PartialEq)]
pub struct LieElement(TensorElement);

impl GroupElement {
    pub fn identity(shape: AlgebraShape) -> Self {
        Self(TensorElement::unit(shape))
    }

    pub fn from_tensor(t: TensorElement) -> Result<Self, AlgebraError> {
        if (t.scalar() - 1.0).abs() > UNIT_TOL {
            return Err(AlgebraError::LevelZero {
                expected: 1.0,
                found: t.scalar(),
            });
        }
        Ok(Self(t))
    }

    pub fn tensor(&self) -> &TensorElement {
        &self.0
    }

    pub fn into_tensor(self) -> TensorElement {
        self.0
    }

    pub fn shape(&self) -> AlgebraShape {
        self.0.shape
    }

    pub fn level(&self, k: usize) -> &[f64] {
        self.0.level(k)
    }

    pub fn mul(&self, other: &Self) -> Result<Self, AlgebraError> {
        Ok(Self(self.0.mul(&other.0)?))
    }

    pub fn log(&self) -> LieElement {
        let shape = self.shape();
        let mut x = self.0.clone();
        x.coeffs[0] = 0.0;
        let mut power = x.clone();
        let mut acc = x.clone();
        for k in 2..=shape.depth {
            power = power.mul(&x).expect("same shape");
            let sign = if k % 2 == 0 { -1.0 } else { 1.0 };
            let c = sign / k as f64;
            for (a, p) in acc.coeffs.iter_mut().zip(&power.coeffs) {
                *a += c * p;
            }
        }
        acc.coeffs[0] = 0.0;
        LieElement(acc)
    }

    /// Inverse in the tensor group, computed as `exp(-log g)`.
    pub fn inverse(&self) -> Self {
        self.log().neg().exp()
    }

    pub fn dilate(&self, r: f64) -> Self {
        Self(self.0.dilate(r))
    }
}

impl LieElement {
    pub fn zero(shape: AlgebraShape) -> Self {
        Self(TensorElement::zero(shape))
    }

    pub fn from_tensor(t: TensorElement) -> Result<Self, AlgebraError> {
        if t.scalar().abs() > UNIT_TOL {
            return Err(AlgebraError::LevelZero {
                expected: 0.0,
                found: t.scalar(),
            });
        }
        Ok(Self(t))
    }

    /// Lie element with only a level-1 component.
    pub fn from_level1(shape: AlgebraShape, v: &[f64]) -> Result<Self, AlgebraError> {
        if v.len() != shape.dim {
            return Err(AlgebraError::Length {
                expected: shape.dim,
                found: v.len(),
            });
        }
        let mut t = TensorElement::zero(shape);
        t.level_mut(1).copy_from_slice(v);
        Ok(Self(t))
    }

    /// Builds from the flat coefficient vector that omits the scalar part.
    pub fn from_graded(shape: AlgebraShape, graded: &[f64]) -> Result<Self, AlgebraError> {
        if graded.len() != shape.len() - 1 {
            return Err(AlgebraError::Length {
                expected: shape.len() - 1,
                found: graded.len(),
            });
        }
        let mut coeffs = Vec::with_capacity(shape.len());
        coeffs.push(0.0);
        coeffs.extend_from_slice(graded);
        Ok(Self(TensorElement { shape, coeffs }))
    }

    pub fn tensor(&self) -> &TensorElement {
        &self.0
    }

    pub fn into_tensor(self) -> TensorElement {
        self.0
    }

    pub fn shape(&self) -> AlgebraShape {
        self.0.shape
    }

    pub fn coeffs(&self) -> &[f64] {
        &self.0.coeffs
    }

    /// Coefficients of levels `1..=N`, without the zero scalar part.
    pub fn graded(&self) -> &[f64] {
        &self.0.coeffs[1..]
    }

    pub fn level(&self, k: usize) -> &[f64] {
        self.0.level(k)
    }

    pub fn exp(&self) -> GroupElement {
        let shape = self.shape();
        let mut acc = TensorElement::unit(shape);
        let mut power = TensorElement::unit(shape);
        for k in 1..=shape.depth {
            power = power.mul(&self.0).expect("same shape").scale(1.0 / k as f64);
            for (a, p) in acc.coeffs.iter_mut().zip(&power.coeffs) {
                *a += p;
            }
        }
        GroupElement(acc)
    }

    pub fn neg(&self) -> Self {
        Self(self.0.scale(-1.0))
    }

    pub fn dilate(&self, r: f64) -> Self {
        Self(self.0.dilate(r))
    }

    pub fn max_abs_diff(&self, other: &Self) -> f64 {
        self.0.max_abs_diff(&other.0)
    }

    /// Right-multiplies in place by the pure level-1 element `(0, v, 0, ..)`,
    /// i.e. `self <- self * v`. This is the update of a lifted random walk.
    pub fn push_level1(&mut self, v: &[f64]) {
        let shape = self.shape();
        debug_assert_eq!(v.len(), shape.dim);
        if shape.depth <= 2 {
            let d = shape.dim;
            if shape.depth == 2 {
                let (lvl1, lvl2) = self.0.coeffs[1..].split_at_mut(d);
                for i in 0..d {
                    for j in 0..d {
                        lvl2[i * d + j] += 0.5 * (lvl1[i] * v[j] - v[i] * lvl1[j]);
                    }
                }
            }
            for (x, dv) in self.0.coeffs[1..=d].iter_mut().zip(v) {
                *x += dv;
            }
        } else {
            let step = LieElement::from_level1(shape, v).expect("dimension checked");
            *self = group_mul(self, &step).expect("same shape");
        }
    }
}

/// Truncated tensor product of two algebra elements.
pub fn truncated_mul(a: &TensorElement, b: &TensorElement) -> Result<TensorElement, AlgebraError> {
    a.mul(b)
}

pub fn tensor_exp(a: &LieElement) -> GroupElement {
    a.exp()
}

pub fn tensor_log(g: &GroupElement) -> LieElement {
    g.log()
}

/// Group product in log coordinates, `a * b = log(exp(a) exp(b))`.
///
/// For `N <= 2` the closed form `(a1 + b1, a2 + b2 + [a1, b1] / 2)` is used;
/// [`group_mul_generic`] is the reference route.
pub fn group_mul(a: &LieElement, b: &LieElement) -> Result<LieElement, AlgebraError> {
    a.shape().check(&b.shape())?;
    if a.shape().depth <= 2 {
        Ok(bch_step2(a, b))
    } else {
        group_mul_generic(a, b)
    }
}

pub fn group_mul_generic(a: &LieElement, b: &LieElement) -> Result<LieElement, AlgebraError> {
    Ok(a.exp().mul(&b.exp())?.log())
}

fn bch_step2(a: &LieElement, b: &LieElement) -> LieElement {
    let shape = a.shape();
    let mut out = a.0.add(&b.0).expect("same shape");
    if shape.depth == 2 {
        let d = shape.dim;
        let a1 = a.level(1);
        let b1 = b.level(1);
        let lvl2 = out.level_mut(2);
        for i in 0..d {
            for j in 0..d {
                lvl2[i * d + j] += 0.5 * (a1[i] * b1[j] - b1[i] * a1[j]);
            }
        }
    }
    LieElement(out)
}

/// Inverse in log coordinates is negation.
pub fn group_inv(a: &LieElement) -> LieElement {
    a.neg()
}

/// Commutator `ab - ba` in the truncated algebra.
pub fn lie_bracket(a: &LieElement, b: &LieElement) -> Result<LieElement, AlgebraError> {
    let ab = a.0.mul(&b.0)?;
    let ba = b.0.mul(&a.0)?;
    Ok(LieElement(ab.sub(&ba)?))
}

/// Chen signature of the piecewise-linear path with the given increments:
/// `exp(dx_1) exp(dx_2) ... exp(dx_m)`.
pub fn signature_of_segments(
    shape: AlgebraShape,
    increments: &[Vec<f64>],
) -> Result<GroupElement, AlgebraError> {
    if increments.is_empty() {
        return Err(AlgebraError::NoSegments);
    }
    let mut sig = GroupElement::identity(shape);
    for inc in increments {
        let seg = LieElement::from_level1(shape, inc)?.exp();
        sig = sig.mul(&seg)?;
    }
    Ok(sig)
}
