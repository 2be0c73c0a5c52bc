//! Dense `f64` vectors and row-major matrices.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Dense vector.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct Tensor1 {
    pub data: Vec<f64>,
}

impl Tensor1 {
    pub fn new(data: Vec<f64>) -> Self {
        Self { data }
    }

    pub fn zeros(len: usize) -> Self {
        Self {
            data: vec![0.0; len],
        }
    }

    pub fn filled(len: usize, value: f64) -> Self {
        Self {
            data: vec![value; len],
        }
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn iter(&self) -> std::slice::Iter<'_, f64> {
        self.data.iter()
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Tensor1 {
        Tensor1::new(self.data.iter().map(|&v| f(v)).collect())
    }

    fn zip_with(&self, other: &Tensor1, op: &'static str, f: impl Fn(f64, f64) -> f64) -> Result<Tensor1> {
        if self.len() != other.len() {
            return Err(Error::shape(op, self.len(), other.len()));
        }
        Ok(Tensor1::new(
            self.data
                .iter()
                .zip(&other.data)
                .map(|(&a, &b)| f(a, b))
                .collect(),
        ))
    }

    pub fn add(&self, other: &Tensor1) -> Result<Tensor1> {
        self.zip_with(other, "add", |a, b| a + b)
    }

    pub fn sub(&self, other: &Tensor1) -> Result<Tensor1> {
        self.zip_with(other, "sub", |a, b| a - b)
    }

    /// Elementwise (Hadamard) product.
    pub fn mul(&self, other: &Tensor1) -> Result<Tensor1> {
        self.zip_with(other, "mul", |a, b| a * b)
    }

    pub fn div(&self, other: &Tensor1) -> Result<Tensor1> {
        self.zip_with(other, "div", |a, b| a / b)
    }

    pub fn scale(&self, c: f64) -> Tensor1 {
        self.map(|v| c * v)
    }

    /// `self + c * other`
    pub fn axpy(&self, c: f64, other: &Tensor1) -> Result<Tensor1> {
        self.zip_with(other, "axpy", |a, b| a + c * b)
    }

    /// `[self, other]`
    pub fn concat(&self, other: &Tensor1) -> Tensor1 {
        let mut data = Vec::with_capacity(self.len() + other.len());
        data.extend_from_slice(&self.data);
        data.extend_from_slice(&other.data);
        Tensor1::new(data)
    }

    pub fn norm_inf(&self) -> f64 {
        self.data.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    pub fn all_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }
}

impl From<Vec<f64>> for Tensor1 {
    fn from(data: Vec<f64>) -> Self {
        Tensor1::new(data)
    }
}

/// Row-major matrix.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Tensor2 {
    pub rows: usize,
    pub cols: usize,
    pub data: Vec<f64>,
}

impl Tensor2 {
    pub fn new(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != rows * cols {
            return Err(Error::shape(
                "Tensor2::new",
                format!("{rows}x{cols} = {} entries", rows * cols),
                data.len(),
            ));
        }
        Ok(Self { rows, cols, data })
    }

    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            data: vec![0.0; rows * cols],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m.data[i * n + i] = 1.0;
        }
        m
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let cols = rows.first().map_or(0, Vec::len);
        let mut data = Vec::with_capacity(rows.len() * cols);
        for row in rows {
            if row.len() != cols {
                return Err(Error::shape("Tensor2::from_rows", cols, row.len()));
            }
            data.extend_from_slice(row);
        }
        Ok(Self {
            rows: rows.len(),
            cols,
            data,
        })
    }

    #[inline]
    pub fn get(&self, r: usize, c: usize) -> f64 {
        self.data[r * self.cols + c]
    }

    #[inline]
    pub fn set(&mut self, r: usize, c: usize, v: f64) {
        self.data[r * self.cols + c] = v;
    }

    pub fn row(&self, r: usize) -> &[f64] {
        &self.data[r * self.cols..(r + 1) * self.cols]
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.rows, self.cols)
    }

    /// Elementwise product with a same-shape matrix (used for wiring masks).
    pub fn hadamard(&self, other: &Tensor2) -> Result<Tensor2> {
        if self.shape() != other.shape() {
            return Err(Error::shape(
                "hadamard",
                format!("{:?}", self.shape()),
                format!("{:?}", other.shape()),
            ));
        }
        Ok(Tensor2 {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().zip(&other.data).map(|(a, b)| a * b).collect(),
        })
    }
}

/// Matrix-vector product `m · v`.
pub fn matvec(m: &Tensor2, v: &Tensor1) -> Result<Tensor1> {
    if m.cols != v.len() {
        return Err(Error::shape("matvec", m.cols, v.len()));
    }
    let mut out = vec![0.0; m.rows];
    matvec_into(&m.data, m.rows, m.cols, &v.data, &mut out);
    Ok(Tensor1::new(out))
}

/// Raw kernel shared with the tape: `out = m · v` for a `rows x cols` row-major slice.
#[inline]
pub(crate) fn matvec_into(m: &[f64], rows: usize, cols: usize, v: &[f64], out: &mut [f64]) {
    debug_assert_eq!(m.len(), rows * cols);
    debug_assert_eq!(v.len(), cols);
    for (r, o) in out.iter_mut().enumerate().take(rows) {
        let row = &m[r * cols..(r + 1) * cols];
        *o = row.iter().zip(v).map(|(a, b)| a * b).sum();
    }
}

/// `m · v + b`
pub fn affine(m: &Tensor2, v: &Tensor1, b: &Tensor1) -> Result<Tensor1> {
    matvec(m, v)?.add(b)
}

#[inline]
pub fn sigmoid_scalar(x: f64) -> f64 {
    // Split on sign so exp never overflows.
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

#[inline]
pub fn softplus_scalar(x: f64) -> f64 {
    if x > 30.0 {
        x + (-x).exp()
    } else {
        x.exp().ln_1p()
    }
}

pub fn sigmoid(v: &Tensor1) -> Tensor1 {
    v.map(sigmoid_scalar)
}

pub fn tanh_ew(v: &Tensor1) -> Tensor1 {
    v.map(f64::tanh)
}

pub fn softplus(v: &Tensor1) -> Tensor1 {
    v.map(softplus_scalar)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::rng::Rng;

    fn random_vec(rng: &mut Rng, n: usize) -> Tensor1 {
        Tensor1::new((0..n).map(|_| rng.uniform_range(-2.0, 2.0)).collect())
    }

    #[test]
    fn identity_and_zero_matvec() {
        let v = Tensor1::new(vec![1.5, -2.0, 0.25]);
        assert_eq!(matvec(&Tensor2::identity(3), &v).unwrap(), v);
        assert_eq!(matvec(&Tensor2::zeros(3, 3), &v).unwrap(), Tensor1::zeros(3));
    }

    #[test]
    fn matvec_matches_double_loop() {
        let mut rng = Rng::new(11, 0);
        let m = Tensor2::new(5, 4, (0..20).map(|_| rng.uniform_range(-1.0, 1.0)).collect()).unwrap();
        let v = random_vec(&mut rng, 4);
        let got = matvec(&m, &v).unwrap();
        for i in 0..5 {
            let mut acc = 0.0;
            for j in 0..4 {
                acc += m.get(i, j) * v.data[j];
            }
            assert!((got.data[i] - acc).abs() < 1e-15);
        }
    }

    #[test]
    fn matvec_rejects_bad_shape() {
        let err = matvec(&Tensor2::zeros(2, 3), &Tensor1::zeros(2)).unwrap_err();
        assert!(matches!(err, Error::Shape { .. }));
    }

    #[test]
    fn activation_identities() {
        assert_eq!(sigmoid_scalar(0.0), 0.5);
        assert_eq!(0.0f64.tanh(), 0.0);
        assert!((sigmoid_scalar(3.0f64.ln()) - 0.75).abs() < 1e-15);
        // saturates without NaN
        assert_eq!(sigmoid_scalar(-1000.0), 0.0);
        assert_eq!(sigmoid_scalar(1000.0), 1.0);
        assert!(softplus_scalar(800.0).is_finite());
    }

    #[test]
    fn symmetry_over_random_points() {
        let mut rng = Rng::new(5, 3);
        for _ in 0..10_000 {
            let x = rng.uniform_range(-40.0, 40.0);
            assert!((sigmoid_scalar(x) + sigmoid_scalar(-x) - 1.0).abs() < 1e-12);
            assert!((x.tanh() + (-x).tanh()).abs() < 1e-12);
        }
    }

    #[test]
    fn matvec_distributes_over_addition() {
        let mut rng = Rng::new(77, 1);
        for _ in 0..100 {
            let m = Tensor2::new(6, 7, (0..42).map(|_| rng.uniform_range(-1.0, 1.0)).collect()).unwrap();
            let a = random_vec(&mut rng, 7);
            let b = random_vec(&mut rng, 7);
            let lhs = matvec(&m, &a.add(&b).unwrap()).unwrap();
            let rhs = matvec(&m, &a).unwrap().add(&matvec(&m, &b).unwrap()).unwrap();
            for (x, y) in lhs.iter().zip(rhs.iter()) {
                assert!((x - y).abs() < 1e-12);
            }
        }
    }
}
