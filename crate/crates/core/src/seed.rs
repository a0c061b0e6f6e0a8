//! Frozen-x coefficient equations.
//!
//! Irregular point (pole of order `K = -n >= 2` in Q): find `C^(1..=M)` and
//! `Omega^(n..=-1)` with
//!
//! ```text
//! F^(i) = (i+1) C^(i+1) + sum_{j=n}^{-1} C^(i-j) Omega^(j) - sum_{j>=n} Q^(j) C^(i-j) = 0
//! ```
//!
//! for `n <= i <= M-1`, `C^(0) = E`. Omega is eliminated by its recurrence,
//! which makes the negative orders vanish identically.
//!
//! Regular point (`n = -1`): coefficients `C^(i,j)` of `lambda^i (ln lambda)^j`
//! are solved order by order from a stacked linear system whose diagonal
//! blocks are `X -> (i+1) X + [X, Q^(-1)]`.
//!
//! Coefficient lists are indexed from order zero: `c[k]` is `C^(k)` and
//! `c[0]` is the identity.

use nalgebra::DVector;
use num_complex::Complex64;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::linalg::{eigen_decompose, inverse, lstsq_min_norm, min_gap};
use crate::series::{identity, max_norm, zeros, ComplexMatrix, LaurentMatrixSeries};
use crate::tolerances::{GAP_REL_TOL, LSTSQ_REL_TOL, MAX_NEWTON_STEPS, SEED_TOL};

fn cx(v: f64) -> Complex64 {
    Complex64::new(v, 0.0)
}

fn c_at(c: &[ComplexMatrix], k: i32) -> Option<&ComplexMatrix> {
    if k < 0 {
        None
    } else {
        c.get(k as usize)
    }
}

/// `Omega^(i)` for `n <= i <= -1`, where `n = q.min_order()`.
pub fn omega_recurrence(c: &[ComplexMatrix], q: &LaurentMatrixSeries) -> Result<Vec<ComplexMatrix>> {
    let n = q.min_order();
    if n >= 0 {
        return Err(Error::InvalidModel(format!("Q must have a pole, min order is {n}")));
    }
    if (c.len() as i32) < -n {
        return Err(Error::InsufficientTruncation(format!(
            "Omega recurrence needs C^(1..={}), have {}",
            -1 - n,
            c.len() as i32 - 1
        )));
    }
    let mut omega: Vec<ComplexMatrix> = Vec::with_capacity((-n) as usize);
    for i in n..0 {
        let mut w = q.coeff_or_zero(i);
        for j in n..i {
            let ck = &c[(i - j) as usize];
            let qj = q.coeff_or_zero(j);
            w += &qj * ck - ck * &omega[(j - n) as usize];
        }
        omega.push(w);
    }
    Ok(omega)
}

/// `Phi^(i)` for `m <= i <= 0`, where `m = p.min_order() <= 0`.
pub fn phi_recurrence(c: &[ComplexMatrix], p: &LaurentMatrixSeries) -> Result<Vec<ComplexMatrix>> {
    let m = p.min_order().min(0);
    if (c.len() as i32) <= -m {
        return Err(Error::InsufficientTruncation(format!(
            "Phi recurrence needs C^(1..={}), have {}",
            -m,
            c.len() as i32 - 1
        )));
    }
    let mut phi: Vec<ComplexMatrix> = Vec::with_capacity((1 - m) as usize);
    for i in m..=0 {
        let mut f = p.coeff_or_zero(i);
        for j in m..i {
            let ck = &c[(i - j) as usize];
            let pj = p.coeff_or_zero(j);
            f += &pj * ck - ck * &phi[(j - m) as usize];
        }
        phi.push(f);
    }
    Ok(phi)
}

/// `F^(i)` for `n <= i <= M-1` with `M = c.len() - 1`. Out-of-range `C` and
/// `Omega` count as zero; Q orders past its truncation count as zero.
pub fn residual_f(c: &[ComplexMatrix], omega: &[ComplexMatrix], q: &LaurentMatrixSeries) -> Vec<ComplexMatrix> {
    let n = q.min_order();
    let top = c.len() as i32 - 2;
    let dim = q.dim();
    (n..=top)
        .map(|i| {
            let mut f = match c_at(c, i + 1) {
                Some(ci) => ci * cx((i + 1) as f64),
                None => zeros(dim),
            };
            for (idx, w) in omega.iter().enumerate() {
                let j = n + idx as i32;
                if let Some(ck) = c_at(c, i - j) {
                    f += ck * w;
                }
            }
            for j in n..=i.min(q.trunc_order()) {
                if let (Some(ck), Some(qj)) = (c_at(c, i - j), q.coeff(j)) {
                    f -= qj * ck;
                }
            }
            f
        })
        .collect()
}

/// Directional derivative of `residual_f` (with Omega from the recurrence)
/// at `c` in direction `dc`, orders `0..=M-1`.
fn residual_f_linearized(
    c: &[ComplexMatrix],
    omega: &[ComplexMatrix],
    dc: &[ComplexMatrix],
    q: &LaurentMatrixSeries,
) -> Vec<ComplexMatrix> {
    let n = q.min_order();
    let dim = q.dim();
    let mut domega: Vec<ComplexMatrix> = Vec::with_capacity(omega.len());
    for i in n..0 {
        let mut d = zeros(dim);
        for j in n..i {
            let k = (i - j) as usize;
            let qj = q.coeff_or_zero(j);
            d += &qj * &dc[k] - &dc[k] * &omega[(j - n) as usize] - &c[k] * &domega[(j - n) as usize];
        }
        domega.push(d);
    }
    let top = c.len() as i32 - 2;
    (0..=top)
        .map(|i| {
            let mut f = &dc[(i + 1) as usize] * cx((i + 1) as f64);
            for j in n..0 {
                if let Some(k) = Some(i - j).filter(|k| (*k as usize) < c.len()) {
                    let jj = (j - n) as usize;
                    f += &dc[k as usize] * &omega[jj] + &c[k as usize] * &domega[jj];
                }
            }
            for j in n..=i.min(q.trunc_order()) {
                if let (Some(dk), Some(qj)) = (c_at(dc, i - j), q.coeff(j)) {
                    f -= qj * dk;
                }
            }
            f
        })
        .collect()
}

#[derive(Debug, Clone, Copy)]
pub struct SeedOptions {
    pub tol: f64,
    pub max_newton: usize,
    pub max_sweeps: usize,
}

impl Default for SeedOptions {
    fn default() -> Self {
        Self { tol: SEED_TOL, max_newton: MAX_NEWTON_STEPS, max_sweeps: 200 }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct IrregularSolveReport {
    pub sweeps: usize,
    pub newton_steps: usize,
    /// Max off-diagonal entry of Omega in the eigenbasis of `Q^(n)`.
    pub omega_offdiag: f64,
    /// Diagonal gauge of the seed: the initializer starts from zero
    /// corrections, which fixes the constant diagonal freedom.
    pub gauge: &'static str,
}

#[derive(Debug, Clone)]
pub struct IrregularSeed {
    pub x0: f64,
    pub n: i32,
    /// `C^(0..=M)`, `c[0] = E`.
    pub c: Vec<ComplexMatrix>,
    /// `Omega^(n..=-1)` in the original basis.
    pub omega: Vec<ComplexMatrix>,
    /// Max entry of `F^(i)` for `n <= i <= M-1`, recomputed with `residual_f`.
    pub residuals: Vec<f64>,
    pub eigenvalues: Vec<Complex64>,
    /// Columns are eigenvectors of `Q^(n)`.
    pub eigenbasis: ComplexMatrix,
    pub report: IrregularSolveReport,
}

impl IrregularSeed {
    pub fn order(&self) -> usize {
        self.c.len() - 1
    }

    pub fn max_residual(&self) -> f64 {
        self.residuals.iter().cloned().fold(0.0, f64::max)
    }
}

fn offdiag_max(m: &ComplexMatrix) -> f64 {
    let mut acc = 0.0f64;
    for i in 0..m.nrows() {
        for j in 0..m.ncols() {
            if i != j {
                acc = acc.max(m[(i, j)].norm());
            }
        }
    }
    acc
}

fn stacked_norm(fs: &[ComplexMatrix]) -> f64 {
    fs.iter().map(max_norm).fold(0.0, f64::max)
}

/// Solves the frozen-x equations at an irregular (or, with `n = -1`,
/// non-resonant regular) point for `C^(1..=order)` and `Omega`.
pub fn solve_irregular_seed(
    q: &LaurentMatrixSeries,
    order: usize,
    x0: f64,
    opts: &SeedOptions,
) -> Result<IrregularSeed> {
    let n = q.min_order();
    let dim = q.dim();
    if n >= 0 {
        return Err(Error::InvalidModel(format!("Q must have a pole, min order is {n}")));
    }
    let k_pole = (-n) as usize;
    if order < 1 || order + 1 < k_pole {
        return Err(Error::InsufficientTruncation(format!(
            "order {order} too small for a pole of order {k_pole}"
        )));
    }
    let lead = q.coeff_or_zero(n);
    let (eigs, v) = if dim == 1 {
        (vec![lead[(0, 0)]], identity(1))
    } else {
        let eigs = crate::linalg::eigenvalues(&lead)?;
        let scale = eigs.iter().map(|z| z.norm()).fold(1.0, f64::max);
        let gap = min_gap(&eigs);
        let tol = GAP_REL_TOL * scale;
        if gap < tol {
            return Err(Error::DegenerateLeadingEigenvalues { gap, tol });
        }
        eigen_decompose(&lead)?
    };
    let vinv = inverse(&v)?;
    let qh_coeffs: Vec<ComplexMatrix> = q.coeffs().iter().map(|m| &vinv * m * &v).collect();
    let qh = LaurentMatrixSeries::new(n, qh_coeffs)?;

    let mut c = vec![zeros(dim); order + 1];
    c[0] = identity(dim);

    // Fixed-point initializer with Omega constrained diagonal.
    let sweep_residual = |c: &[ComplexMatrix]| -> Result<(Vec<ComplexMatrix>, Vec<ComplexMatrix>)> {
        let mut omega = omega_recurrence(c, &qh)?;
        for w in omega.iter_mut() {
            for i in 0..dim {
                for j in 0..dim {
                    if i != j {
                        w[(i, j)] = Complex64::new(0.0, 0.0);
                    }
                }
            }
        }
        let f = residual_f(c, &omega, &qh);
        Ok((omega, f))
    };
    let (_, f0) = sweep_residual(&c)?;
    let mut best = (stacked_norm(&f0), c.clone());
    let start_norm = best.0;
    let mut sweeps = 0;
    for _ in 0..opts.max_sweeps {
        let (omega, f) = sweep_residual(&c)?;
        let norm = stacked_norm(&f);
        if !norm.is_finite() || norm > 1e6 * start_norm.max(1.0) {
            break;
        }
        if norm < best.0 {
            best = (norm, c.clone());
        }
        if norm < 0.1 * opts.tol {
            break;
        }
        sweeps += 1;
        let shift = |p: usize| -> Complex64 {
            if k_pole >= 2 {
                omega[k_pole - 1][(p, p)] - qh.coeff_or_zero(-1)[(p, p)]
            } else {
                Complex64::new(0.0, 0.0)
            }
        };
        for (idx, fi) in f.iter().enumerate() {
            let i = n + idx as i32;
            for p in 0..dim {
                for r in 0..dim {
                    let (target, den) = if k_pole == 1 {
                        if i < 0 {
                            continue;
                        }
                        ((i + 1) as usize, cx((i + 1) as f64) + eigs[r] - eigs[p])
                    } else if p == r {
                        if i < 0 {
                            continue;
                        }
                        ((i + 1) as usize, cx((i + 1) as f64) + shift(p))
                    } else {
                        let t = i + k_pole as i32;
                        if t < 1 || t as usize > order {
                            continue;
                        }
                        (t as usize, eigs[r] - eigs[p])
                    };
                    if den.norm() > 1e-300 {
                        c[target][(p, r)] -= fi[(p, r)] / den;
                    }
                }
            }
        }
    }
    c = best.1;

    // Newton polish on the square system F^(0..M-1)(C^(1..=M)) = 0.
    let unknowns = order * dim * dim;
    let full_residual = |c: &[ComplexMatrix]| -> Result<(Vec<ComplexMatrix>, Vec<ComplexMatrix>)> {
        let omega = omega_recurrence(c, &qh)?;
        let f = residual_f(c, &omega, &qh);
        Ok((omega, f[k_pole..].to_vec()))
    };
    let flatten = |fs: &[ComplexMatrix]| -> DVector<Complex64> {
        DVector::from_iterator(unknowns, fs.iter().flat_map(|m| m.transpose().iter().cloned().collect::<Vec<_>>()))
    };
    let (mut omega, mut f) = full_residual(&c)?;
    let mut norm = stacked_norm(&f);
    let mut newton_steps = 0;
    while norm >= 1e-3 * opts.tol && newton_steps < opts.max_newton {
        let mut jac = ComplexMatrix::zeros(unknowns, unknowns);
        let mut dc = vec![zeros(dim); order + 1];
        for col in 0..unknowns {
            let k = 1 + col / (dim * dim);
            let (p, r) = ((col % (dim * dim)) / dim, col % dim);
            dc[k][(p, r)] = cx(1.0);
            let df = residual_f_linearized(&c, &omega, &dc, &qh);
            jac.set_column(col, &flatten(&df));
            dc[k][(p, r)] = cx(0.0);
        }
        let rhs = -flatten(&f);
        let step = lstsq_min_norm(&jac, &rhs, 1e-13)?;
        let mut scale = 1.0;
        let mut improved = false;
        for _ in 0..12 {
            let mut trial = c.clone();
            for col in 0..unknowns {
                let k = 1 + col / (dim * dim);
                let (p, r) = ((col % (dim * dim)) / dim, col % dim);
                trial[k][(p, r)] += step[col] * scale;
            }
            let (tw, tf) = full_residual(&trial)?;
            let tn = stacked_norm(&tf);
            if tn < norm {
                c = trial;
                omega = tw;
                f = tf;
                norm = tn;
                improved = true;
                break;
            }
            scale *= 0.5;
        }
        newton_steps += 1;
        if !improved {
            break;
        }
    }

    // Back to the original basis; residuals are recomputed from scratch.
    let c_orig: Vec<ComplexMatrix> = c.iter().map(|m| &v * m * &vinv).collect();
    let omega_orig = omega_recurrence(&c_orig, q)?;
    let fs = residual_f(&c_orig, &omega_orig, q);
    let residuals: Vec<f64> = fs.iter().map(max_norm).collect();
    let worst = residuals.iter().cloned().fold(0.0, f64::max);
    if !(worst < opts.tol) {
        return Err(Error::NotConverged { residual: worst, iterations: newton_steps });
    }
    let omega_offdiag = omega_orig
        .iter()
        .map(|w| offdiag_max(&(&vinv * w * &v)))
        .fold(0.0, f64::max);
    Ok(IrregularSeed {
        x0,
        n,
        c: c_orig,
        omega: omega_orig,
        residuals,
        eigenvalues: eigs,
        eigenbasis: v,
        report: IrregularSolveReport {
            sweeps,
            newton_steps,
            omega_offdiag,
            gauge: "zero initial diagonal corrections",
        },
    })
}

#[derive(Debug, Clone)]
pub struct RegularSeed {
    pub x0: f64,
    /// `c[i][j]` is `C^(i,j)`, `0 <= i <= M`, `0 <= j < N`.
    pub c: Vec<Vec<ComplexMatrix>>,
    /// Max entry of the stacked residual per order `i+1 = 1..=M`, from the
    /// linear solve.
    pub stacked_residuals: Vec<f64>,
    /// Max entry of `F^(i,j)` over `j`, for `-1 <= i <= M-1`, recomputed
    /// from the coefficient equations.
    pub residuals: Vec<f64>,
}

impl RegularSeed {
    pub fn order(&self) -> usize {
        self.c.len() - 1
    }

    pub fn max_residual(&self) -> f64 {
        self.residuals.iter().cloned().fold(0.0, f64::max)
    }

    /// Max entry over `C^(i,j)` with `j >= 1`.
    pub fn max_log_coeff(&self) -> f64 {
        self.c.iter().flat_map(|row| row.iter().skip(1)).map(max_norm).fold(0.0, f64::max)
    }
}

/// `F^(i,j) = (i+1) C^(i+1,j) + [C^(i+1,j), Q^(-1)] + (j+1) C^(i+1,j+1)
///            - sum_{k>=0} Q^(k) C^(i-k,j)` for `-1 <= i <= M-1`.
pub fn residual_f_regular(c: &[Vec<ComplexMatrix>], q: &LaurentMatrixSeries) -> Vec<Vec<ComplexMatrix>> {
    let dim = q.dim();
    let levels = dim;
    let res = q.coeff_or_zero(-1);
    let top = c.len() as i32 - 2;
    (-1..=top)
        .map(|i| {
            (0..levels)
                .map(|j| {
                    let next = &c[(i + 1) as usize][j];
                    let mut f = next * cx((i + 1) as f64) + next * &res - &res * next;
                    if j + 1 < levels {
                        f += &c[(i + 1) as usize][j + 1] * cx((j + 1) as f64);
                    }
                    for k in 0..=i.min(q.trunc_order()) {
                        if let Some(qk) = q.coeff(k) {
                            f -= qk * &c[(i - k) as usize][j];
                        }
                    }
                    f
                })
                .collect()
        })
        .collect()
}

/// Solves for `C^(i,j)` order by order. Kernel directions of the stacked
/// system (resonances) are fixed by the minimum-norm solution.
pub fn solve_regular_seed(
    q: &LaurentMatrixSeries,
    order: usize,
    x0: f64,
    opts: &SeedOptions,
) -> Result<RegularSeed> {
    if q.min_order() != -1 {
        return Err(Error::InvalidModel(format!(
            "regular seed needs a simple pole, Q has min order {}",
            q.min_order()
        )));
    }
    if order < 1 {
        return Err(Error::InsufficientTruncation("order must be at least 1".into()));
    }
    let dim = q.dim();
    let levels = dim;
    let block = dim * dim;
    let res = q.coeff_or_zero(-1);
    let mut c = vec![vec![zeros(dim); levels]; order + 1];
    c[0][0] = identity(dim);
    let mut stacked_residuals = Vec::with_capacity(order);

    for ord in 1..=order {
        let i = ord as i32 - 1;
        let size = levels * block;
        let mut a = ComplexMatrix::zeros(size, size);
        let mut b = DVector::zeros(size);
        let idx = |j: usize, p: usize, r: usize| j * block + p * dim + r;
        for j in 0..levels {
            let mut rhs = zeros(dim);
            for k in 0..=i.min(q.trunc_order()) {
                if let Some(qk) = q.coeff(k) {
                    rhs += qk * &c[(i - k) as usize][j];
                }
            }
            for p in 0..dim {
                for r in 0..dim {
                    let row = idx(j, p, r);
                    b[row] = rhs[(p, r)];
                    // (ord X + X R - R X)_pr
                    a[(row, idx(j, p, r))] += cx(ord as f64);
                    for l in 0..dim {
                        a[(row, idx(j, p, l))] += res[(l, r)];
                        a[(row, idx(j, l, r))] -= res[(p, l)];
                    }
                    if j + 1 < levels {
                        a[(row, idx(j + 1, p, r))] += cx((j + 1) as f64);
                    }
                }
            }
        }
        let sol = lstsq_min_norm(&a, &b, LSTSQ_REL_TOL)?;
        let resid = (&a * &sol - &b).iter().fold(0.0f64, |acc, z| acc.max(z.norm()));
        if !(resid < opts.tol) {
            return Err(Error::ResidualTooLarge { order: ord, residual: resid });
        }
        stacked_residuals.push(resid);
        for j in 0..levels {
            c[ord][j] = ComplexMatrix::from_fn(dim, dim, |p, r| sol[idx(j, p, r)]);
        }
    }
    let residuals = residual_f_regular(&c, q)
        .iter()
        .map(|row| row.iter().map(max_norm).fold(0.0, f64::max))
        .collect();
    Ok(RegularSeed { x0, c, stacked_residuals, residuals })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    fn m2(a: [[f64; 2]; 2]) -> ComplexMatrix {
        ComplexMatrix::from_fn(2, 2, |i, j| c(a[i][j], 0.0))
    }

    fn s1(v: f64) -> ComplexMatrix {
        ComplexMatrix::from_element(1, 1, c(v, 0.0))
    }

    fn series(dim: usize, terms: Vec<(i32, ComplexMatrix)>) -> LaurentMatrixSeries {
        LaurentMatrixSeries::from_terms(dim, &terms).unwrap()
    }

    #[test]
    fn omega_first_steps() {
        let q1 = m2([[1., 2.], [3., 4.]]);
        let q = series(2, vec![(-1, q1.clone())]);
        let w = omega_recurrence(&[identity(2)], &q).unwrap();
        assert_eq!(w, vec![q1.clone()]);

        let q2 = m2([[1., 0.], [0., -1.]]);
        let q = series(2, vec![(-2, q2.clone()), (-1, q1.clone())]);
        let w = omega_recurrence(&[identity(2), zeros(2)], &q).unwrap();
        assert_eq!(w, vec![q2.clone(), q1.clone()]);

        let x = m2([[0.5, -1.], [2., 0.]]);
        let w = omega_recurrence(&[identity(2), x.clone()], &q).unwrap();
        assert_eq!(w[1], &q1 + &q2 * &x - &x * &q2);

        assert!(matches!(omega_recurrence(&[identity(2)], &q), Err(Error::InsufficientTruncation(_))));
    }

    #[test]
    fn phi_first_steps() {
        let p0 = m2([[1., 2.], [3., 4.]]);
        let p = series(2, vec![(0, p0.clone())]);
        assert_eq!(phi_recurrence(&[identity(2)], &p).unwrap(), vec![p0.clone()]);

        let pm = m2([[0., 1.], [1., 0.]]);
        let p = series(2, vec![(-1, pm.clone()), (0, p0.clone())]);
        assert_eq!(phi_recurrence(&[identity(2), zeros(2)], &p).unwrap(), vec![pm.clone(), p0.clone()]);
        let x = m2([[0.5, -1.], [2., 0.]]);
        let phi = phi_recurrence(&[identity(2), x.clone()], &p).unwrap();
        assert_eq!(phi[1], &p0 + &pm * &x - &x * &pm);
    }

    #[test]
    fn scalar_f0() {
        // Omega^(-1) = b, Q = {-1: b, 0: cc}: F^(0) = C^(1) - cc.
        let (b, cc, c1) = (0.7, 1.3, 0.4);
        let q = series(1, vec![(-1, s1(b)), (0, s1(cc))]);
        let f = residual_f(&[s1(1.0), s1(c1)], &[s1(b)], &q);
        assert_eq!(f.len(), 2);
        assert_eq!(f[0][(0, 0)], c(0.0, 0.0));
        assert!((f[1][(0, 0)] - c(c1 - cc, 0.0)).norm() < 1e-15);
    }

    #[test]
    fn scalar_seed_is_exponential() {
        let q = series(1, vec![(-2, s1(2.0)), (-1, s1(0.5)), (0, s1(1.0)), (1, s1(0.0))]);
        let seed = solve_irregular_seed(&q, 6, 0.0, &SeedOptions::default()).unwrap();
        assert_eq!(seed.omega[0][(0, 0)], c(2.0, 0.0));
        assert_eq!(seed.omega[1][(0, 0)], c(0.5, 0.0));
        for (k, want) in [(1, 1.0), (2, 0.5), (3, 1.0 / 6.0)] {
            assert!((seed.c[k][(0, 0)] - c(want, 0.0)).norm() < 1e-14, "C^({k})");
        }
    }

    #[test]
    fn diagonal_q_decouples() {
        let d = |a: f64, b: f64| m2([[a, 0.], [0., b]]);
        let q = series(
            2,
            vec![(-2, d(1.0, -1.5)), (-1, d(0.5, -0.25)), (0, d(1.0, 0.3)), (1, d(0.5, -0.2))],
        );
        let seed = solve_irregular_seed(&q, 8, 0.0, &SeedOptions::default()).unwrap();
        assert_eq!(seed.omega[0], d(1.0, -1.5));
        assert!(max_norm(&(&seed.omega[1] - d(0.5, -0.25))) < 1e-15);
        for p in 0..2 {
            let qs = series(
                1,
                (-2..=1).map(|k| (k, s1(q.coeff(k).unwrap()[(p, p)].re))).collect(),
            );
            let scalar = solve_irregular_seed(&qs, 8, 0.0, &SeedOptions::default()).unwrap();
            for k in 0..=8 {
                assert!(seed.c[k][(0, 1)].norm() < 1e-15 && seed.c[k][(1, 0)].norm() < 1e-15);
                assert!((seed.c[k][(p, p)] - scalar.c[k][(0, 0)]).norm() < 1e-14);
            }
        }
    }

    #[test]
    fn repeated_leading_eigenvalue_is_rejected() {
        let q = series(2, vec![(-2, m2([[1., 1.], [0., 1.]])), (-1, identity(2))]);
        assert!(matches!(
            solve_irregular_seed(&q, 4, 0.0, &SeedOptions::default()),
            Err(Error::DegenerateLeadingEigenvalues { .. })
        ));
    }

    #[test]
    fn general_irregular_seed_converges() {
        let q = series(
            2,
            vec![
                (-3, m2([[1., 0.5], [0.2, -0.5]])),
                (-2, m2([[0.3, -0.1], [0.4, 0.2]])),
                (-1, m2([[0.5, 0.2], [-0.3, 0.1]])),
                (0, m2([[0.1, 0.05], [0.02, -0.1]])),
            ],
        );
        let seed = solve_irregular_seed(&q, 8, 0.0, &SeedOptions::default()).unwrap();
        assert!(seed.max_residual() < SEED_TOL);
        assert_eq!(seed.residuals.len(), 3 + 8);
    }

    #[test]
    fn block_diagonal_stays_block_diagonal() {
        let mut terms = Vec::new();
        let blocks = [
            ([[1.0, 0.3], [0.2, -1.0]], 2.0),
            ([[0.5, -0.2], [0.1, 0.3]], -0.4),
            ([[0.2, 0.1], [0.0, -0.1]], 0.25),
        ];
        for (k, (b, s)) in (-2..=0).zip(blocks) {
            let mut m = ComplexMatrix::zeros(3, 3);
            for i in 0..2 {
                for j in 0..2 {
                    m[(i, j)] = c(b[i][j], 0.0);
                }
            }
            m[(2, 2)] = c(s, 0.0);
            terms.push((k, m));
        }
        let q = series(3, terms);
        let seed = solve_irregular_seed(&q, 8, 0.0, &SeedOptions::default()).unwrap();
        let cross = |m: &ComplexMatrix| (0..2).map(|i| m[(i, 2)].norm().max(m[(2, i)].norm())).fold(0.0, f64::max);
        for m in seed.c.iter().chain(seed.omega.iter()) {
            assert!(cross(m) < 1e-13, "{m}");
        }
    }

    #[test]
    fn regular_scalar_frobenius() {
        let q = series(1, vec![(-1, s1(0.3)), (0, s1(1.0))]);
        let seed = solve_regular_seed(&q, 4, 0.0, &SeedOptions::default()).unwrap();
        assert!((seed.c[1][0][(0, 0)] - c(1.0, 0.0)).norm() < 1e-14);
        assert!((seed.c[2][0][(0, 0)] - c(0.5, 0.0)).norm() < 1e-14);
        assert_eq!(seed.max_log_coeff(), 0.0);
    }

    #[test]
    fn regular_nonresonant_homogeneous_is_trivial() {
        let q = series(2, vec![(-1, m2([[0.3, 0.], [0., -0.4]])), (0, zeros(2))]);
        let seed = solve_regular_seed(&q, 5, 0.0, &SeedOptions::default()).unwrap();
        for row in &seed.c[1..] {
            for m in row {
                assert_eq!(max_norm(m), 0.0);
            }
        }
    }

    #[test]
    fn resonance_in_upper_entry_forces_logarithm() {
        // Residue diag(1, 0): the order-1 operator X -> X + [X, R] vanishes
        // on the (1,2) entry. Hand solution of the 8-unknown system: the
        // (1,2) equation of level 0 reads 0*X0_12 + X1_12 = 1, level 1 forces
        // X1 into the kernel; minimum norm sets X0_12 = 0.
        let q = series(2, vec![(-1, m2([[1., 0.], [0., 0.]])), (0, m2([[0., 1.], [0., 0.]]))]);
        let seed = solve_regular_seed(&q, 1, 0.0, &SeedOptions::default()).unwrap();
        assert!(max_norm(&(&seed.c[1][1] - m2([[0., 1.], [0., 0.]]))) < 1e-14);
        assert!(max_norm(&seed.c[1][0]) < 1e-14);
        assert!(seed.stacked_residuals[0] < 1e-12);
    }

    #[test]
    fn lower_entry_coupling_needs_no_logarithm() {
        // Same residue with the coupling in the (2,1) entry: that entry of the
        // operator is 1 + 1 - 0 = 2, so C^(1,0) = [[0, 0], [1/2, 0]], no logs.
        let q = series(2, vec![(-1, m2([[1., 0.], [0., 0.]])), (0, m2([[0., 0.], [1., 0.]]))]);
        let seed = solve_regular_seed(&q, 1, 0.0, &SeedOptions::default()).unwrap();
        assert!(max_norm(&(&seed.c[1][0] - m2([[0., 0.], [0.5, 0.]]))) < 1e-14);
        assert!(seed.max_log_coeff() < 1e-14);
    }

    #[test]
    fn regular_seed_rejects_higher_poles() {
        let q = series(1, vec![(-2, s1(1.0))]);
        assert!(solve_regular_seed(&q, 2, 0.0, &SeedOptions::default()).is_err());
    }

    fn cmat(dim: usize) -> impl Strategy<Value = ComplexMatrix> {
        prop::collection::vec((-1.0f64..1.0, -1.0f64..1.0), dim * dim)
            .prop_map(move |v| ComplexMatrix::from_iterator(dim, dim, v.into_iter().map(|(a, b)| c(a, b))))
    }

    proptest! {
        #[test]
        fn omega_recurrence_zeroes_negative_orders(
            dim in 1usize..=3,
            k in 1i32..=3,
            seed in any::<u64>(),
        ) {
            use rand::{Rng, SeedableRng};
            let mut rng = rand::rngs::StdRng::seed_from_u64(seed);
            let mut rm = |d: usize| ComplexMatrix::from_fn(d, d, |_, _| c(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)));
            let n = -k;
            let q = series(dim, (n..=2).map(|j| (j, rm(dim))).collect());
            let mut cs = vec![identity(dim)];
            for _ in 0..4 { cs.push(rm(dim)); }
            let w = omega_recurrence(&cs, &q).unwrap();
            let f = residual_f(&cs, &w, &q);
            for fi in &f[..k as usize] {
                prop_assert!(max_norm(fi) <= 1e-14);
            }
        }

        #[test]
        fn linearization_matches_difference(m in cmat(2), d in cmat(2)) {
            let q = series(2, vec![(-2, m2([[1., 0.2], [0., -1.]])), (-1, m.clone()), (0, m2([[0.1, 0.], [0.3, 0.2]]))]);
            let cs = vec![identity(2), m.clone(), d.clone(), m.clone() * d.clone()];
            let dc = vec![zeros(2), d.clone(), m.clone(), d.clone()];
            let w = omega_recurrence(&cs, &q).unwrap();
            let lin = residual_f_linearized(&cs, &w, &dc, &q);
            let h = 1e-6;
            let shifted = |s: f64| {
                let cc: Vec<_> = cs.iter().zip(&dc).map(|(a, b)| a + b * c(s, 0.0)).collect();
                let ww = omega_recurrence(&cc, &q).unwrap();
                residual_f(&cc, &ww, &q)
            };
            let (fp, fm) = (shifted(h), shifted(-h));
            for i in 0..lin.len() {
                let fd = (&fp[i + 2] - &fm[i + 2]) / c(2.0 * h, 0.0);
                prop_assert!(max_norm(&(&fd - &lin[i])) < 1e-6);
            }
        }
    }
}
