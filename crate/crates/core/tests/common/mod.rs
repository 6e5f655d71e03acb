//! Reference implementations kept deliberately naive: tensors as per-level
//! vectors, series by repeated products, and suprema by enumerating every
//! subset of grid points.

#![allow(dead_code)]

use proptest::prelude::*;
use rough_tails::{AlgebraShape, DiscretePath, LieElement, NormKind};

pub type Levels = Vec<Vec<f64>>;

pub fn to_levels(shape: AlgebraShape, coeffs: &[f64]) -> Levels {
    (0..=shape.depth())
        .map(|k| {
            let off = shape.level_offset(k);
            coeffs[off..off + shape.level_len(k)].to_vec()
        })
        .collect()
}

pub fn tmul(d: usize, a: &Levels, b: &Levels) -> Levels {
    let depth = a.len() - 1;
    (0..=depth)
        .map(|k| {
            let mut out = vec![0.0; d.pow(k as u32)];
            for i in 0..=k {
                let (x, y) = (&a[i], &b[k - i]);
                for (ix, xv) in x.iter().enumerate() {
                    for (iy, yv) in y.iter().enumerate() {
                        out[ix * y.len() + iy] += xv * yv;
                    }
                }
            }
            out
        })
        .collect()
}

fn unit(d: usize, depth: usize) -> Levels {
    let mut u: Levels = (0..=depth).map(|k| vec![0.0; d.pow(k as u32)]).collect();
    u[0][0] = 1.0;
    u
}

fn axpy(acc: &mut Levels, s: f64, x: &Levels) {
    for (a, b) in acc.iter_mut().zip(x) {
        for (p, q) in a.iter_mut().zip(b) {
            *p += s * q;
        }
    }
}

/// `exp` of an element with zero scalar part.
pub fn texp(d: usize, x: &Levels) -> Levels {
    let depth = x.len() - 1;
    let mut acc = unit(d, depth);
    let mut power = unit(d, depth);
    let mut fact = 1.0;
    for n in 1..=depth {
        power = tmul(d, &power, x);
        fact *= n as f64;
        axpy(&mut acc, 1.0 / fact, &power);
    }
    acc
}

/// Inverse of a group-like element via `g^{-1} = sum_n (1 - g)^n`.
pub fn tinv(d: usize, g: &Levels) -> Levels {
    let depth = g.len() - 1;
    let mut y = g.clone();
    y[0][0] = 0.0;
    for lvl in y.iter_mut() {
        lvl.iter_mut().for_each(|v| *v = -*v);
    }
    let mut acc = unit(d, depth);
    let mut power = unit(d, depth);
    for _ in 1..=depth {
        power = tmul(d, &power, &y);
        axpy(&mut acc, 1.0, &power);
    }
    acc
}

fn hom_max(g: &Levels) -> f64 {
    g.iter()
        .enumerate()
        .skip(1)
        .map(|(k, lvl)| lvl.iter().map(|v| v * v).sum::<f64>().sqrt().powf(1.0 / k as f64))
        .fold(0.0, f64::max)
}

/// Homogeneous distance between two log-coordinate points.
pub fn dist(shape: AlgebraShape, kind: NormKind, a: &[f64], b: &[f64]) -> f64 {
    let d = shape.dim();
    let ga = texp(d, &to_levels(shape, a));
    let gb = texp(d, &to_levels(shape, b));
    let inc = tmul(d, &tinv(d, &ga), &gb);
    match kind {
        NormKind::HomMax => hom_max(&inc),
        NormKind::HomSym => hom_max(&inc).max(hom_max(&tinv(d, &inc))),
        NormKind::CcHeisenberg => panic!("no reference implementation"),
    }
}

pub fn dist_table(path: &DiscretePath, kind: NormKind) -> Vec<Vec<f64>> {
    let n = path.len();
    (0..n)
        .map(|i| {
            (0..n)
                .map(|j| dist(path.shape(), kind, path.coeffs_at(i), path.coeffs_at(j)))
                .collect()
        })
        .collect()
}

/// Every increasing index chain from `i` to `j`.
pub fn chains(i: usize, j: usize) -> Vec<Vec<usize>> {
    if i == j {
        return vec![vec![i]];
    }
    let inner: Vec<usize> = (i + 1..j).collect();
    (0u64..1 << inner.len())
        .map(|mask| {
            let mut c = vec![i];
            c.extend(inner.iter().enumerate().filter(|(b, _)| mask >> b & 1 == 1).map(|(_, &k)| k));
            c.push(j);
            c
        })
        .collect()
}

/// `omega(i, j)` by enumeration, for every pair.
pub fn brute_omega(dt: &[Vec<f64>], p: f64) -> Vec<Vec<f64>> {
    let n = dt.len();
    let mut om = vec![vec![0.0; n]; n];
    for i in 0..n {
        for j in i + 1..n {
            om[i][j] = chains(i, j)
                .iter()
                .map(|c| c.windows(2).map(|w| dt[w[0]][w[1]].powf(p)).sum::<f64>())
                .fold(0.0, f64::max);
        }
    }
    om
}

/// Largest sum of `omega` over partitions whose blocks all have `omega <= 1`.
pub fn brute_m(om: &[Vec<f64>]) -> Option<f64> {
    let last = om.len() - 1;
    chains(0, last)
        .iter()
        .filter_map(|c| {
            let blocks: Vec<f64> = c.windows(2).map(|w| om[w[0]][w[1]]).collect();
            blocks.iter().all(|&w| w <= 1.0).then(|| blocks.iter().sum())
        })
        .reduce(f64::max)
}

pub fn shapes() -> impl Strategy<Value = AlgebraShape> {
    prop_oneof![Just((2, 2)), Just((3, 2)), Just((2, 3)), Just((1, 2))]
        .prop_map(|(d, n)| AlgebraShape::new(d, n).unwrap())
}

pub fn lie(shape: AlgebraShape, scale: f64) -> impl Strategy<Value = LieElement> {
    prop::collection::vec(-scale..scale, shape.len() - 1)
        .prop_map(move |g| antisymmetrize(shape, LieElement::from_graded(shape, &g).unwrap()))
}

/// Projects onto the Lie algebra by keeping level 1 and one bracket term per
/// higher level.
fn antisymmetrize(shape: AlgebraShape, x: LieElement) -> LieElement {
    let d = shape.dim();
    let mut out = LieElement::from_level1(shape, x.level(1)).unwrap();
    if shape.depth() >= 2 {
        let raw = x.level(2);
        let mut area = LieElement::zero(shape).into_tensor();
        let lvl = area.level_mut(2);
        for i in 0..d {
            for j in 0..d {
                lvl[i * d + j] = 0.5 * (raw[i * d + j] - raw[j * d + i]);
            }
        }
        let area = LieElement::from_tensor(area).unwrap();
        out = LieElement::from_tensor(out.tensor().add(area.tensor()).unwrap()).unwrap();
    }
    out
}

/// Piecewise-linear lift through a random walk of `n` points with steps of
/// size at most `step`.
pub fn polyline(shape: AlgebraShape, n: std::ops::RangeInclusive<usize>, step: f64) -> impl Strategy<Value = DiscretePath> {
    let d = shape.dim();
    prop::collection::vec(prop::collection::vec(-step..step, d), n).prop_map(move |incs| {
        let mut values = vec![vec![0.0; d]];
        for inc in &incs[1..] {
            let prev = values.last().unwrap();
            values.push(prev.iter().zip(inc).map(|(a, b)| a + b).collect());
        }
        let times = (0..values.len()).map(|i| i as f64 / values.len() as f64).collect();
        DiscretePath::lift_polyline(shape, times, &values).unwrap()
    })
}
