//! Parametrized P-Q pairs.
//!
//! The x-dependence of the coefficients enters through a finite state
//! vector `u(x)` with `du/dx = G(u, x)`. A pair is valid when the
//! compatibility condition `Q_x - P_lambda + [Q, P] = 0` holds order by order
//! along solutions of that vector field; `compatibility_residual` measures
//! exactly that, with `Q_x` formed symbolically by the chain rule.

use std::collections::{BTreeMap, BTreeSet};

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::expr::Expr;
use crate::series::{max_norm, ComplexMatrix, LaurentMatrixSeries};

/// Row-major `N x N` matrix of expressions.
pub type ExprMatrix = Vec<Expr>;

/// Unvalidated model content, as read from a document or built in code.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelSpec {
    pub name: Option<String>,
    pub description: Option<String>,
    pub dim: usize,
    pub m: i32,
    pub n: i32,
    pub state_names: Vec<String>,
    pub vector_field: Vec<Expr>,
    pub x0: f64,
    pub u0: Vec<Complex64>,
    pub p: BTreeMap<i32, ExprMatrix>,
    pub q: BTreeMap<i32, ExprMatrix>,
}

#[derive(Debug, Clone)]
pub struct PQPairModel {
    spec: ModelSpec,
    deg_p: i32,
    deg_q: i32,
    /// Total x-derivative of every Q entry along the vector field.
    q_total: BTreeMap<i32, ExprMatrix>,
}

impl PartialEq for PQPairModel {
    fn eq(&self, other: &Self) -> bool {
        self.spec == other.spec
    }
}

fn is_identifier(s: &str) -> bool {
    let mut chars = s.chars();
    matches!(chars.next(), Some(c) if c.is_alphabetic() || c == '_')
        && chars.all(|c| c.is_alphanumeric() || c == '_')
}

impl PQPairModel {
    pub fn new(spec: ModelSpec) -> Result<Self> {
        let bad = |msg: String| Err(Error::InvalidModel(msg));
        if spec.dim == 0 {
            return bad("dimension must be positive".into());
        }
        if spec.m > 0 {
            return bad(format!("m must be <= 0, got {}", spec.m));
        }
        if spec.n >= 0 {
            return bad(format!("n must be < 0, got {}", spec.n));
        }
        if !spec.x0.is_finite() {
            return bad("x0 must be finite".into());
        }
        let d = spec.state_names.len();
        if spec.vector_field.len() != d || spec.u0.len() != d {
            return bad(format!(
                "state has {d} names but {} vector field entries and {} initial values",
                spec.vector_field.len(),
                spec.u0.len()
            ));
        }
        let mut declared = BTreeSet::new();
        declared.insert("x".to_string());
        for name in &spec.state_names {
            if !is_identifier(name) || name == "i" || name == "x" {
                return bad(format!("invalid state name `{name}`"));
            }
            if !declared.insert(name.clone()) {
                return bad(format!("duplicate state name `{name}`"));
            }
        }
        let check_symbols = |e: &Expr| -> Result<()> {
            match e.symbols().into_iter().find(|s| !declared.contains(s)) {
                Some(s) => Err(Error::UnknownSymbol(s)),
                None => Ok(()),
            }
        };
        for e in &spec.vector_field {
            check_symbols(e)?;
        }
        for (label, map, lo) in [("P", &spec.p, spec.m), ("Q", &spec.q, spec.n)] {
            for (order, mat) in map {
                if *order < lo {
                    return bad(format!("{label} has order {order} below its minimum {lo}"));
                }
                if mat.len() != spec.dim * spec.dim {
                    return bad(format!("{label}^({order}) is not {0}x{0}", spec.dim));
                }
                for e in mat {
                    check_symbols(e)?;
                }
            }
        }
        let deg_p = spec.p.keys().next_back().copied().unwrap_or(spec.m).max(spec.m);
        let deg_q = spec.q.keys().next_back().copied().unwrap_or(spec.n).max(spec.n);
        let q_total = spec
            .q
            .iter()
            .map(|(k, mat)| (*k, mat.iter().map(|e| total_derivative(e, &spec)).collect()))
            .collect();
        Ok(Self { spec, deg_p, deg_q, q_total })
    }

    pub fn spec(&self) -> &ModelSpec {
        &self.spec
    }

    pub fn name(&self) -> Option<&str> {
        self.spec.name.as_deref()
    }

    pub fn dim(&self) -> usize {
        self.spec.dim
    }

    pub fn m(&self) -> i32 {
        self.spec.m
    }

    pub fn n(&self) -> i32 {
        self.spec.n
    }

    pub fn deg_p(&self) -> i32 {
        self.deg_p
    }

    pub fn deg_q(&self) -> i32 {
        self.deg_q
    }

    pub fn x0(&self) -> f64 {
        self.spec.x0
    }

    pub fn u0(&self) -> &[Complex64] {
        &self.spec.u0
    }

    pub fn state_names(&self) -> &[String] {
        &self.spec.state_names
    }

    pub fn state_dim(&self) -> usize {
        self.spec.state_names.len()
    }

    fn lookup<'a>(&'a self, u: &'a [Complex64], x: f64) -> impl Fn(&str) -> Option<Complex64> + 'a {
        move |s: &str| {
            if s == "x" {
                return Some(Complex64::new(x, 0.0));
            }
            self.spec.state_names.iter().position(|n| n == s).map(|k| u[k])
        }
    }

    fn eval_matrix(&self, mat: &ExprMatrix, u: &[Complex64], x: f64) -> Result<ComplexMatrix> {
        let look = self.lookup(u, x);
        let n = self.spec.dim;
        let vals = mat.iter().map(|e| e.eval_with(&look)).collect::<Result<Vec<_>>>()?;
        Ok(ComplexMatrix::from_row_slice(n, n, &vals))
    }

    fn eval_family(
        &self,
        map: &BTreeMap<i32, ExprMatrix>,
        lo: i32,
        hi: i32,
        u: &[Complex64],
        x: f64,
    ) -> Result<LaurentMatrixSeries> {
        let mut terms = vec![(lo, ComplexMatrix::zeros(self.spec.dim, self.spec.dim))];
        terms.push((hi, ComplexMatrix::zeros(self.spec.dim, self.spec.dim)));
        for (k, mat) in map {
            terms.push((*k, self.eval_matrix(mat, u, x)?));
        }
        LaurentMatrixSeries::from_terms(self.spec.dim, &terms)
    }

    pub fn vector_field_at(&self, u: &[Complex64], x: f64) -> Result<Vec<Complex64>> {
        let look = self.lookup(u, x);
        self.spec.vector_field.iter().map(|e| e.eval_with(&look)).collect()
    }

    /// Numeric P and Q with min orders `m` and `n`.
    pub fn pair_coeffs_at(&self, u: &[Complex64], x: f64) -> Result<(LaurentMatrixSeries, LaurentMatrixSeries)> {
        if u.len() != self.state_dim() {
            return Err(Error::DimensionMismatch(self.state_dim(), u.len()));
        }
        let p = self.eval_family(&self.spec.p, self.spec.m, self.deg_p, u, x)?;
        let q = self.eval_family(&self.spec.q, self.spec.n, self.deg_q, u, x)?;
        Ok((p, q))
    }

    pub fn p_at(&self, u: &[Complex64], x: f64) -> Result<LaurentMatrixSeries> {
        if u.len() != self.state_dim() {
            return Err(Error::DimensionMismatch(self.state_dim(), u.len()));
        }
        self.eval_family(&self.spec.p, self.spec.m, self.deg_p, u, x)
    }

    pub fn q_at(&self, u: &[Complex64], x: f64) -> Result<LaurentMatrixSeries> {
        if u.len() != self.state_dim() {
            return Err(Error::DimensionMismatch(self.state_dim(), u.len()));
        }
        self.eval_family(&self.spec.q, self.spec.n, self.deg_q, u, x)
    }

    /// Total derivative `dQ/dx` along the vector field, orders `n..=deg_q`.
    pub fn q_x_at(&self, u: &[Complex64], x: f64) -> Result<LaurentMatrixSeries> {
        self.eval_family(&self.q_total, self.spec.n, self.deg_q, u, x)
    }

    /// Norm of the compatibility defect
    /// `Q_x^(i) - (i+1) P^(i+1) + sum_j [Q^(j), P^(i-j)]` for every order
    /// that can be nonzero.
    pub fn compatibility_residual(&self, u: &[Complex64], x: f64) -> Result<CompatResidual> {
        let (p, q) = self.pair_coeffs_at(u, x)?;
        let qx = self.q_x_at(u, x)?;
        let (m, n) = (self.spec.m, self.spec.n);
        let lo = m + n;
        let hi = self.deg_q.max(self.deg_p - 1).max(self.deg_p + self.deg_q);
        let mut orders = Vec::new();
        let mut norms = Vec::new();
        for i in lo..=hi {
            let mut r = qx.coeff_or_zero(i) - p.coeff_or_zero(i + 1) * Complex64::new((i + 1) as f64, 0.0);
            for j in n..=self.deg_q {
                let k = i - j;
                if k < m || k > self.deg_p {
                    continue;
                }
                let (qj, pk) = (q.coeff(j).unwrap(), p.coeff(k).unwrap());
                r += qj * pk - pk * qj;
            }
            orders.push(i);
            norms.push(max_norm(&r));
        }
        Ok(CompatResidual { orders, norms })
    }
}

fn total_derivative(e: &Expr, spec: &ModelSpec) -> Expr {
    let mut acc = e.differentiate("x");
    for (name, g) in spec.state_names.iter().zip(&spec.vector_field) {
        let d = e.differentiate(name);
        if d == Expr::lit(0.0) {
            continue;
        }
        let term = Expr::Mul(Box::new(d), Box::new(g.clone()));
        acc = if acc == Expr::lit(0.0) { term } else { Expr::Add(Box::new(acc), Box::new(term)) };
    }
    acc
}

#[derive(Debug, Clone, PartialEq)]
pub struct CompatResidual {
    pub orders: Vec<i32>,
    pub norms: Vec<f64>,
}

impl CompatResidual {
    pub fn max(&self) -> f64 {
        self.norms.iter().cloned().fold(0.0, f64::max)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::expr::parse_expression;

    fn e(s: &str) -> Expr {
        parse_expression(s).unwrap()
    }

    fn scalar_spec(p: &[(i32, &str)], q: &[(i32, &str)], state: &[(&str, &str, f64)]) -> ModelSpec {
        ModelSpec {
            name: None,
            description: None,
            dim: 1,
            m: p.iter().map(|t| t.0).min().unwrap_or(0).min(0),
            n: q.iter().map(|t| t.0).min().unwrap_or(-1),
            state_names: state.iter().map(|s| s.0.to_string()).collect(),
            vector_field: state.iter().map(|s| e(s.1)).collect(),
            x0: 0.0,
            u0: state.iter().map(|s| Complex64::new(s.2, 0.0)).collect(),
            p: p.iter().map(|(k, s)| (*k, vec![e(s)])).collect(),
            q: q.iter().map(|(k, s)| (*k, vec![e(s)])).collect(),
        }
    }

    #[test]
    fn zero_model_has_zero_coeffs_and_residual() {
        let m = PQPairModel::new(scalar_spec(&[(0, "0")], &[(-1, "0")], &[])).unwrap();
        let (p, q) = m.pair_coeffs_at(&[], 0.0).unwrap();
        assert_eq!(p.max_norm() + q.max_norm(), 0.0);
        assert_eq!(m.compatibility_residual(&[], 0.3).unwrap().max(), 0.0);
    }

    #[test]
    fn scalar_pair_coeffs() {
        let m = PQPairModel::new(scalar_spec(&[(0, "u")], &[(-1, "u")], &[("u", "0", 3.0)])).unwrap();
        let (_, q) = m.pair_coeffs_at(&[Complex64::new(3.0, 0.0)], 0.0).unwrap();
        assert_eq!(q.min_order(), -1);
        assert_eq!(q.coeff(-1).unwrap()[(0, 0)], Complex64::new(3.0, 0.0));
    }

    #[test]
    fn scalar_residual_terms_vanish() {
        let m = PQPairModel::new(scalar_spec(&[(0, "u")], &[(-1, "2")], &[("u", "0", 1.0)])).unwrap();
        let r = m.compatibility_residual(&[Complex64::new(1.0, 0.0)], 0.0).unwrap();
        assert_eq!(r.orders[0], -1);
        assert_eq!(r.max(), 0.0);
    }

    #[test]
    fn residual_detects_incompatible_pair() {
        // Q^(0) = x needs P^(1) = 1; with P^(1) = 0 the order-0 residual is 1.
        let m = PQPairModel::new(scalar_spec(&[(0, "0")], &[(-1, "1"), (0, "x")], &[])).unwrap();
        let r = m.compatibility_residual(&[], 0.5).unwrap();
        let at0 = r.orders.iter().position(|&o| o == 0).unwrap();
        assert_eq!(r.norms[at0], 1.0);
    }

    #[test]
    fn chain_rule_uses_vector_field() {
        // Q^(0) = u^2 with u' = 3: Q_x = 6u, balanced by P^(1) = 6u.
        let m = PQPairModel::new(scalar_spec(&[(0, "0"), (1, "6*u")], &[(-1, "1"), (0, "u^2")], &[("u", "3", 0.0)]))
            .unwrap();
        let r = m.compatibility_residual(&[Complex64::new(0.7, 0.2)], 0.0).unwrap();
        assert!(r.max() < 1e-15);
    }

    #[test]
    fn validation_errors() {
        let mut s = scalar_spec(&[(0, "y")], &[(-1, "1")], &[]);
        assert_eq!(PQPairModel::new(s.clone()), Err(Error::UnknownSymbol("y".into())));
        s.p.clear();
        s.n = 0;
        assert!(matches!(PQPairModel::new(s.clone()), Err(Error::InvalidModel(_))));
        s.n = -1;
        s.m = 1;
        assert!(matches!(PQPairModel::new(s.clone()), Err(Error::InvalidModel(_))));
        s.m = 0;
        s.q.insert(-3, vec![e("1")]);
        assert!(matches!(PQPairModel::new(s), Err(Error::InvalidModel(_))));
        let s = scalar_spec(&[], &[(-1, "1")], &[("x", "1", 0.0)]);
        assert!(matches!(PQPairModel::new(s), Err(Error::InvalidModel(_))));
    }
}
