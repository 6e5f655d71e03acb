//! Sampled group-valued paths and their CSV representation.
//!
//! The CSV layout is one row per sample with header
//! `t,A_1,..,A_d,A2_11,..,A2_dd` (log coordinates, level 2 row-major,
//! 1-based indices). Deeper levels continue the pattern as `A3_111` etc.

use std::io::{Read, Write};

use thiserror::Error;

use crate::algebra::{AlgebraError, AlgebraShape, LieElement};

#[derive(Debug, Error)]
pub enum PathError {
    #[error("path has no samples")]
    Empty,
    #[error("{times} times but {points} points")]
    LengthMismatch { times: usize, points: usize },
    #[error("times must be strictly increasing (index {index})")]
    NotIncreasing { index: usize },
    #[error("time at index {index} is not finite")]
    NonFinite { index: usize },
    #[error("malformed CSV header: {0}")]
    Header(String),
    #[error("malformed CSV row {row}: {message}")]
    Row { row: usize, message: String },
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Algebra(#[from] AlgebraError),
}

/// A strictly increasing time grid paired with group elements in log
/// coordinates. Points are stored contiguously with stride `shape.len()`.
#[derive(Debug, Clone, PartialEq)]
pub struct DiscretePath {
    shape: AlgebraShape,
    times: Vec<f64>,
    coeffs: Vec<f64>,
}

impl DiscretePath {
    pub fn new(times: Vec<f64>, points: &[LieElement]) -> Result<Self, PathError> {
        if points.is_empty() {
            return Err(PathError::Empty);
        }
        if times.len() != points.len() {
            return Err(PathError::LengthMismatch {
                times: times.len(),
                points: points.len(),
            });
        }
        let shape = points[0].shape();
        let mut coeffs = Vec::with_capacity(shape.len() * points.len());
        for p in points {
            if p.shape() != shape {
                return Err(AlgebraError::ShapeMismatch {
                    left: shape,
                    right: p.shape(),
                }
                .into());
            }
            coeffs.extend_from_slice(p.coeffs());
        }
        check_times(&times)?;
        Ok(Self { shape, times, coeffs })
    }

    /// Path starting at `x0` with capacity for `n` further samples.
    pub(crate) fn starting_at(t0: f64, x0: &LieElement, n: usize) -> Self {
        let shape = x0.shape();
        let mut times = Vec::with_capacity(n + 1);
        times.push(t0);
        let mut coeffs = Vec::with_capacity(shape.len() * (n + 1));
        coeffs.extend_from_slice(x0.coeffs());
        Self { shape, times, coeffs }
    }

    pub(crate) fn push_unchecked(&mut self, t: f64, x: &LieElement) {
        self.times.push(t);
        self.coeffs.extend_from_slice(x.coeffs());
    }

    /// One-dimensional, depth-1 path through the given values.
    pub fn from_values_1d(times: Vec<f64>, values: &[f64]) -> Result<Self, PathError> {
        let shape = AlgebraShape::new(1, 1)?;
        let points: Vec<LieElement> = values
            .iter()
            .map(|&v| LieElement::from_level1(shape, &[v]))
            .collect::<Result<_, _>>()?;
        Self::new(times, &points)
    }

    /// Depth-`N` lift of the piecewise-linear path through `values` (each a
    /// point of `R^d`), sampled on `times`.
    pub fn lift_polyline(
        shape: AlgebraShape,
        times: Vec<f64>,
        values: &[Vec<f64>],
    ) -> Result<Self, PathError> {
        if values.is_empty() {
            return Err(PathError::Empty);
        }
        let mut x = LieElement::from_level1(shape, &values[0])?;
        let mut points = vec![x.clone()];
        for w in values.windows(2) {
            let inc: Vec<f64> = w[1].iter().zip(&w[0]).map(|(b, a)| b - a).collect();
            if inc.len() != shape.dim() {
                return Err(AlgebraError::Length {
                    expected: shape.dim(),
                    found: inc.len(),
                }
                .into());
            }
            x.push_level1(&inc);
            points.push(x.clone());
        }
        Self::new(times, &points)
    }

    pub fn shape(&self) -> AlgebraShape {
        self.shape
    }

    /// Number of samples.
    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn last_index(&self) -> usize {
        self.times.len() - 1
    }

    pub fn times(&self) -> &[f64] {
        &self.times
    }

    /// Full coefficient slice (scalar part included) of sample `i`.
    pub fn coeffs_at(&self, i: usize) -> &[f64] {
        let stride = self.shape.len();
        &self.coeffs[i * stride..(i + 1) * stride]
    }

    pub fn point(&self, i: usize) -> LieElement {
        LieElement::from_graded(self.shape, &self.coeffs_at(i)[1..]).expect("stored shape")
    }

    pub fn points(&self) -> impl Iterator<Item = LieElement> + '_ {
        (0..self.len()).map(|i| self.point(i))
    }

    pub fn map_points(&self, mut f: impl FnMut(&LieElement) -> LieElement) -> Self {
        let points: Vec<LieElement> = self.points().map(|p| f(&p)).collect();
        let mut out = self.clone();
        out.coeffs.clear();
        for p in &points {
            out.coeffs.extend_from_slice(p.coeffs());
        }
        out.shape = points[0].shape();
        out
    }

    pub fn map_times(&self, f: impl Fn(f64) -> f64) -> Result<Self, PathError> {
        let times: Vec<f64> = self.times.iter().map(|&t| f(t)).collect();
        check_times(&times)?;
        Ok(Self {
            shape: self.shape,
            times,
            coeffs: self.coeffs.clone(),
        })
    }

    /// Sub-path on the inclusive index range `[start, end]`.
    pub fn slice(&self, start: usize, end: usize) -> Self {
        let stride = self.shape.len();
        Self {
            shape: self.shape,
            times: self.times[start..=end].to_vec(),
            coeffs: self.coeffs[start * stride..(end + 1) * stride].to_vec(),
        }
    }

    pub fn csv_header(shape: AlgebraShape) -> Vec<String> {
        let mut header = vec!["t".to_string()];
        for k in 1..=shape.depth() {
            for flat in 0..shape.level_len(k) {
                let mut digits = String::new();
                let mut rem = flat;
                let mut idx = vec![0; k];
                for slot in idx.iter_mut().rev() {
                    *slot = rem % shape.dim() + 1;
                    rem /= shape.dim();
                }
                for i in idx {
                    digits.push_str(&i.to_string());
                }
                if k == 1 {
                    header.push(format!("A_{digits}"));
                } else {
                    header.push(format!("A{k}_{digits}"));
                }
            }
        }
        header
    }

    pub fn write_csv<W: Write>(&self, out: W) -> Result<(), PathError> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(Self::csv_header(self.shape))?;
        let mut record = Vec::with_capacity(self.shape.len());
        for i in 0..self.len() {
            record.clear();
            record.push(self.times[i].to_string());
            record.extend(self.coeffs_at(i)[1..].iter().map(|c| c.to_string()));
            w.write_record(&record)?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn read_csv<R: Read>(input: R) -> Result<Self, PathError> {
        let mut r = csv::ReaderBuilder::new()
            .trim(csv::Trim::All)
            .from_reader(input);
        let header: Vec<String> = r.headers()?.iter().map(str::to_string).collect();
        let shape = shape_from_header(&header)?;
        let mut times = Vec::new();
        let mut coeffs = Vec::new();
        for (row, rec) in r.records().enumerate() {
            let rec = rec?;
            if rec.len() != header.len() {
                return Err(PathError::Row {
                    row,
                    message: format!("expected {} fields, found {}", header.len(), rec.len()),
                });
            }
            let mut values = rec.iter().map(|f| {
                f.parse::<f64>().map_err(|e| PathError::Row {
                    row,
                    message: format!("'{f}': {e}"),
                })
            });
            times.push(values.next().expect("non-empty record")?);
            coeffs.push(0.0);
            for v in values {
                let v = v?;
                if !v.is_finite() {
                    return Err(PathError::Row {
                        row,
                        message: "non-finite coefficient".into(),
                    });
                }
                coeffs.push(v);
            }
        }
        if times.is_empty() {
            return Err(PathError::Empty);
        }
        check_times(&times)?;
        Ok(Self { shape, times, coeffs })
    }
}

fn check_times(times: &[f64]) -> Result<(), PathError> {
    for (i, t) in times.iter().enumerate() {
        if !t.is_finite() {
            return Err(PathError::NonFinite { index: i });
        }
    }
    for (i, w) in times.windows(2).enumerate() {
        if !(w[1] > w[0]) {
            return Err(PathError::NotIncreasing { index: i + 1 });
        }
    }
    Ok(())
}

fn shape_from_header(header: &[String]) -> Result<AlgebraShape, PathError> {
    if header.first().map(String::as_str) != Some("t") {
        return Err(PathError::Header("first column must be 't'".into()));
    }
    let dim = header.iter().filter(|h| h.starts_with("A_")).count();
    if dim == 0 {
        return Err(PathError::Header("no level-1 columns".into()));
    }
    let coeff_cols = header.len() - 1;
    let mut depth = 0;
    let mut total = 0;
    while total < coeff_cols {
        depth += 1;
        total += dim.pow(depth as u32);
    }
    if total != coeff_cols {
        return Err(PathError::Header(format!(
            "{coeff_cols} coefficient columns do not match any depth for dimension {dim}"
        )));
    }
    let shape = AlgebraShape::new(dim, depth as usize)?;
    let expected = DiscretePath::csv_header(shape);
    if expected != header {
        return Err(PathError::Header(format!(
            "expected columns {}",
            expected.join(",")
        )));
    }
    Ok(shape)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn header_layout() {
        let h = DiscretePath::csv_header(AlgebraShape::new(2, 2).unwrap());
        assert_eq!(h, ["t", "A_1", "A_2", "A2_11", "A2_12", "A2_21", "A2_22"]);
        let h1 = DiscretePath::csv_header(AlgebraShape::new(1, 1).unwrap());
        assert_eq!(h1, ["t", "A_1"]);
    }

    #[test]
    fn csv_round_trip_is_exact() {
        let shape = AlgebraShape::new(2, 2).unwrap();
        let values = vec![vec![0.0, 0.0], vec![0.1, -0.3], vec![1.0 / 3.0, 0.7]];
        let p = DiscretePath::lift_polyline(shape, vec![0.0, 0.5, 1.0], &values).unwrap();
        let mut buf = Vec::new();
        p.write_csv(&mut buf).unwrap();
        let q = DiscretePath::read_csv(buf.as_slice()).unwrap();
        assert_eq!(p, q);
    }

    #[test]
    fn header_with_spaces_is_accepted() {
        let text = "t, A_1\n0, 0\n1, 2.5\n";
        let p = DiscretePath::read_csv(text.as_bytes()).unwrap();
        assert_eq!(p.shape(), AlgebraShape::new(1, 1).unwrap());
        assert_eq!(p.point(1).level(1), &[2.5]);
    }

    #[test]
    fn malformed_inputs() {
        assert!(matches!(
            DiscretePath::read_csv("x,A_1\n0,0\n".as_bytes()),
            Err(PathError::Header(_))
        ));
        assert!(matches!(
            DiscretePath::read_csv("t,A_1,A_2,A2_11\n0,0,0,0\n".as_bytes()),
            Err(PathError::Header(_))
        ));
        assert!(matches!(
            DiscretePath::read_csv("t,A_1\n0,0\n0,1\n".as_bytes()),
            Err(PathError::NotIncreasing { index: 1 })
        ));
        assert!(matches!(
            DiscretePath::read_csv("t,A_1\n0,abc\n".as_bytes()),
            Err(PathError::Row { .. })
        ));
        assert!(matches!(DiscretePath::read_csv("t,A_1\n".as_bytes()), Err(PathError::Empty)));
        assert!(DiscretePath::from_values_1d(vec![0.0], &[1.0, 2.0]).is_err());
    }
}
