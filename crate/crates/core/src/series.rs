//! Truncated matrix-valued Laurent series in the spectral variable.
//!
//! A series stores dense coefficients for every order in
//! `min_order..=trunc_order`. Orders below `min_order` are zero; orders above
//! `trunc_order` are unknown (truncated), which is why products only report
//! the coefficients that are fully determined by their inputs.

use nalgebra::DMatrix;
use num_complex::Complex64;

use crate::error::{Error, Result};

pub type ComplexMatrix = DMatrix<Complex64>;

/// Max absolute entry. Used for every residual in the crate.
pub fn max_norm(m: &ComplexMatrix) -> f64 {
    m.iter().fold(0.0, |acc, z| acc.max(z.norm()))
}

pub fn commutator(a: &ComplexMatrix, b: &ComplexMatrix) -> ComplexMatrix {
    a * b - b * a
}

pub fn identity(dim: usize) -> ComplexMatrix {
    ComplexMatrix::identity(dim, dim)
}

pub fn zeros(dim: usize) -> ComplexMatrix {
    ComplexMatrix::zeros(dim, dim)
}

#[derive(Debug, Clone, PartialEq)]
pub struct LaurentMatrixSeries {
    dim: usize,
    min_order: i32,
    coeffs: Vec<ComplexMatrix>,
}

impl LaurentMatrixSeries {
    /// Builds a series from consecutive coefficients starting at `min_order`.
    pub fn new(min_order: i32, coeffs: Vec<ComplexMatrix>) -> Result<Self> {
        let first = coeffs
            .first()
            .ok_or_else(|| Error::InvalidModel("series needs at least one coefficient".into()))?;
        let dim = first.nrows();
        for c in &coeffs {
            if c.nrows() != dim || c.ncols() != dim {
                return Err(Error::DimensionMismatch(dim, c.nrows().max(c.ncols())));
            }
            if c.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
                return Err(Error::InvalidModel("non-finite series coefficient".into()));
            }
        }
        Ok(Self { dim, min_order, coeffs })
    }

    pub fn zero(dim: usize, min_order: i32, trunc_order: i32) -> Self {
        assert!(trunc_order >= min_order);
        let len = (trunc_order - min_order + 1) as usize;
        Self { dim, min_order, coeffs: vec![zeros(dim); len] }
    }

    pub fn constant(m: ComplexMatrix) -> Self {
        let dim = m.nrows();
        Self { dim, min_order: 0, coeffs: vec![m] }
    }

    /// Series from sparse `(order, coefficient)` terms; gaps are filled with
    /// zeros and the truncation order is the highest listed order.
    pub fn from_terms(dim: usize, terms: &[(i32, ComplexMatrix)]) -> Result<Self> {
        let lo = terms.iter().map(|t| t.0).min().unwrap_or(0);
        let hi = terms.iter().map(|t| t.0).max().unwrap_or(0);
        let mut out = Self::zero(dim, lo, hi);
        for (k, m) in terms {
            if m.nrows() != dim || m.ncols() != dim {
                return Err(Error::DimensionMismatch(dim, m.nrows()));
            }
            out.coeffs[(k - lo) as usize] += m;
        }
        Ok(out)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn min_order(&self) -> i32 {
        self.min_order
    }

    pub fn trunc_order(&self) -> i32 {
        self.min_order + self.coeffs.len() as i32 - 1
    }

    pub fn coeffs(&self) -> &[ComplexMatrix] {
        &self.coeffs
    }

    /// Coefficient of `lambda^order`, `None` outside the retained range.
    pub fn coeff(&self, order: i32) -> Option<&ComplexMatrix> {
        if order < self.min_order {
            return None;
        }
        self.coeffs.get((order - self.min_order) as usize)
    }

    /// Coefficient with the model convention that unretained orders vanish.
    pub fn coeff_or_zero(&self, order: i32) -> ComplexMatrix {
        self.coeff(order).cloned().unwrap_or_else(|| zeros(self.dim))
    }

    pub fn orders(&self) -> impl Iterator<Item = i32> {
        self.min_order..=self.trunc_order()
    }

    pub fn scale(&self, s: Complex64) -> Self {
        Self {
            dim: self.dim,
            min_order: self.min_order,
            coeffs: self.coeffs.iter().map(|c| c * s).collect(),
        }
    }

    pub fn neg(&self) -> Self {
        self.scale(Complex64::new(-1.0, 0.0))
    }

    /// Drops orders above `order`.
    pub fn truncate(&self, order: i32) -> Self {
        let trunc = order.max(self.min_order).min(self.trunc_order());
        let len = (trunc - self.min_order + 1) as usize;
        Self { dim: self.dim, min_order: self.min_order, coeffs: self.coeffs[..len].to_vec() }
    }

    fn check_dim(&self, other: &Self) -> Result<()> {
        if self.dim != other.dim {
            return Err(Error::DimensionMismatch(self.dim, other.dim));
        }
        Ok(())
    }

    pub fn add(&self, other: &Self) -> Result<Self> {
        self.check_dim(other)?;
        let lo = self.min_order.min(other.min_order);
        let hi = self.trunc_order().min(other.trunc_order());
        let mut out = Self::zero(self.dim, lo, hi);
        for k in lo..=hi {
            let slot = &mut out.coeffs[(k - lo) as usize];
            if let Some(a) = self.coeff(k) {
                *slot += a;
            }
            if let Some(b) = other.coeff(k) {
                *slot += b;
            }
        }
        Ok(out)
    }

    pub fn sub(&self, other: &Self) -> Result<Self> {
        self.add(&other.neg())
    }

    /// Truncated Cauchy product keeping only exactly determined orders.
    pub fn mul(&self, other: &Self) -> Result<Self> {
        self.check_dim(other)?;
        let lo = self.min_order + other.min_order;
        let hi = (self.trunc_order() + other.min_order).min(other.trunc_order() + self.min_order);
        let mut out = Self::zero(self.dim, lo, hi);
        for (ia, a) in self.coeffs.iter().enumerate() {
            let ka = self.min_order + ia as i32;
            for (ib, b) in other.coeffs.iter().enumerate() {
                let k = ka + other.min_order + ib as i32;
                if k > hi {
                    break;
                }
                out.coeffs[(k - lo) as usize] += a * b;
            }
        }
        Ok(out)
    }

    pub fn commutator(&self, other: &Self) -> Result<Self> {
        self.mul(other)?.sub(&other.mul(self)?)
    }

    /// Sums `lambda^i A_i` over the retained orders, smallest terms first.
    pub fn eval(&self, lambda: Complex64) -> Result<ComplexMatrix> {
        if lambda == Complex64::new(0.0, 0.0) {
            if self.min_order < 0 {
                return Err(Error::EvalAtPole);
            }
            return Ok(self.coeff_or_zero(0));
        }
        let mut terms: Vec<(f64, ComplexMatrix)> = self
            .coeffs
            .iter()
            .enumerate()
            .map(|(i, c)| {
                let t = c * lambda.powi(self.min_order + i as i32);
                (max_norm(&t), t)
            })
            .collect();
        terms.sort_by(|a, b| a.0.total_cmp(&b.0));
        Ok(terms.into_iter().fold(zeros(self.dim), |acc, (_, t)| acc + t))
    }

    /// Re-expands the polynomial around `lambda = mu + shift`, returning the
    /// coefficients in `mu`.
    pub fn recenter(&self, shift: Complex64) -> Result<Self> {
        if self.min_order < 0 {
            return Err(Error::NegativeOrderRecenter(self.min_order));
        }
        let hi = self.trunc_order() as usize;
        let mut out = Self::zero(self.dim, 0, hi as i32);
        // binomial[i][k] = C(i, k)
        let mut binom = vec![vec![0.0f64; hi + 1]; hi + 1];
        for i in 0..=hi {
            binom[i][0] = 1.0;
            for k in 1..=i {
                binom[i][k] = binom[i - 1][k - 1] + if k < i { binom[i - 1][k] } else { 0.0 };
            }
        }
        for i in (self.min_order as usize)..=hi {
            let a = &self.coeffs[i - self.min_order as usize];
            for k in 0..=i {
                let w = shift.powi((i - k) as i32) * binom[i][k];
                out.coeffs[k] += a * w;
            }
        }
        Ok(out)
    }

    /// Maps a Q-equation coefficient at `lambda = infinity` to the origin:
    /// returns `-mu^-2 A(1/mu)`, so order `i` moves to order `-i-2`.
    pub fn transform_to_origin(&self) -> Self {
        let lo = -self.trunc_order() - 2;
        let coeffs = self.coeffs.iter().rev().map(|c| -c).collect();
        Self { dim: self.dim, min_order: lo, coeffs }
    }

    pub fn max_norm(&self) -> f64 {
        self.coeffs.iter().map(max_norm).fold(0.0, f64::max)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64) -> Complex64 {
        Complex64::new(re, 0.0)
    }

    fn scalar(lo: i32, vals: &[f64]) -> LaurentMatrixSeries {
        LaurentMatrixSeries::new(lo, vals.iter().map(|&v| ComplexMatrix::from_element(1, 1, c(v))).collect())
            .unwrap()
    }

    fn m2(a: [[f64; 2]; 2]) -> ComplexMatrix {
        ComplexMatrix::from_fn(2, 2, |i, j| c(a[i][j]))
    }

    #[test]
    fn add_identity_and_inverse() {
        let a = LaurentMatrixSeries::new(-1, vec![m2([[1., 2.], [3., 4.]]), m2([[0., 1.], [1., 0.]])]).unwrap();
        let z = LaurentMatrixSeries::zero(2, -1, 0);
        assert_eq!(a.add(&z).unwrap(), a);
        assert_eq!(a.add(&a.neg()).unwrap().max_norm(), 0.0);
    }

    #[test]
    fn add_disjoint_orders() {
        let b = LaurentMatrixSeries::from_terms(2, &[(1, identity(2))]).unwrap();
        // `a` must retain order 1 (as zero) or the sum truncates at -1.
        let a = LaurentMatrixSeries::from_terms(2, &[(-1, identity(2)), (1, zeros(2))]).unwrap();
        let s = a.add(&b).unwrap();
        assert_eq!(s.min_order(), -1);
        assert_eq!(s.coeff(-1).unwrap(), &identity(2));
        assert_eq!(s.coeff(0).unwrap(), &zeros(2));
        assert_eq!(s.coeff(1).unwrap(), &identity(2));
    }

    #[test]
    fn mul_identity_and_shift() {
        let b = LaurentMatrixSeries::new(0, vec![m2([[1., 2.], [3., 4.]]), m2([[5., 6.], [7., 8.]])]).unwrap();
        let id = LaurentMatrixSeries::new(0, vec![identity(2), zeros(2)]).unwrap();
        assert_eq!(id.mul(&b).unwrap(), b);

        let a0 = m2([[1., 2.], [0., 1.]]);
        let b0 = m2([[0., 1.], [1., 1.]]);
        let a = LaurentMatrixSeries::from_terms(2, &[(-1, a0.clone())]).unwrap();
        let bb = LaurentMatrixSeries::from_terms(2, &[(1, b0.clone())]).unwrap();
        let p = a.mul(&bb).unwrap();
        assert_eq!((p.min_order(), p.trunc_order()), (0, 0));
        assert_eq!(p.coeff(0).unwrap(), &(a0 * b0));
    }

    #[test]
    fn mul_scalar_polynomials() {
        // (1 + l)(1 - l + l^2) = 1 + l^3: orders 0..2 are 1, 0, 0.
        let p = scalar(0, &[1., 1., 0.]).mul(&scalar(0, &[1., -1., 1.])).unwrap();
        assert_eq!(p.trunc_order(), 2);
        let got: Vec<f64> = p.coeffs().iter().map(|m| m[(0, 0)].re).collect();
        assert_eq!(got, vec![1., 0., 0.]);
    }

    #[test]
    fn mul_reports_only_exact_orders() {
        let a = scalar(-1, &[1., 1., 1.]); // orders -1..1
        let b = scalar(0, &[1., 1., 1., 1.]); // orders 0..3
        let p = a.mul(&b).unwrap();
        assert_eq!(p.min_order(), -1);
        assert_eq!(p.trunc_order(), 1);
    }

    #[test]
    fn commutator_cases() {
        let a = LaurentMatrixSeries::constant(m2([[0., 1.], [0., 0.]]));
        let b = LaurentMatrixSeries::constant(m2([[1., 0.], [0., -1.]]));
        assert_eq!(a.commutator(&a).unwrap().max_norm(), 0.0);
        assert_eq!(a.commutator(&LaurentMatrixSeries::constant(identity(2))).unwrap().max_norm(), 0.0);
        assert_eq!(a.commutator(&b).unwrap().coeff(0).unwrap(), &m2([[0., -2.], [0., 0.]]));
    }

    #[test]
    fn eval_cases() {
        let a0 = m2([[1., 2.], [3., 4.]]);
        assert_eq!(LaurentMatrixSeries::constant(a0.clone()).eval(c(0.5)).unwrap(), a0);
        assert_eq!(scalar(-1, &[1., 2.]).eval(c(2.0)).unwrap()[(0, 0)], c(2.5));
        assert_eq!(scalar(-1, &[1., 2.]).eval(c(0.0)), Err(Error::EvalAtPole));

        let mut fact = 1.0;
        let vals: Vec<f64> = (0..=8)
            .map(|k| {
                if k > 0 {
                    fact *= k as f64;
                }
                1.0 / fact
            })
            .collect();
        let e = scalar(0, &vals).eval(c(0.1)).unwrap()[(0, 0)];
        assert!((e.re - 0.1f64.exp()).abs() < 1e-12);
    }

    #[test]
    fn recenter_cases() {
        let a = scalar(0, &[1., -2., 3.]);
        assert_eq!(a.recenter(c(0.0)).unwrap(), a);
        let sq = scalar(0, &[0., 0., 1.]).recenter(c(1.0)).unwrap();
        let got: Vec<f64> = sq.coeffs().iter().map(|m| m[(0, 0)].re).collect();
        assert_eq!(got, vec![1., 2., 1.]);
        assert_eq!(scalar(-1, &[1., 1.]).recenter(c(1.0)), Err(Error::NegativeOrderRecenter(-1)));
    }

    #[test]
    fn transform_to_origin_cases() {
        let a0 = m2([[1., 2.], [3., 4.]]);
        let t = LaurentMatrixSeries::constant(a0.clone()).transform_to_origin();
        assert_eq!((t.min_order(), t.trunc_order()), (-2, -2));
        assert_eq!(t.coeff(-2).unwrap(), &(-&a0));

        let t = LaurentMatrixSeries::from_terms(2, &[(1, a0.clone())]).unwrap().transform_to_origin();
        assert_eq!(t.coeff(-3).unwrap(), &(-a0));
    }
}
