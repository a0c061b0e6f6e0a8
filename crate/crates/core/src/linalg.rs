//! Small dense complex linear algebra on top of nalgebra: eigenbasis,
//! matrix exponential and minimum-norm least squares.

use nalgebra::{DVector, Schur};
use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::series::{identity, ComplexMatrix};

pub fn inverse(m: &ComplexMatrix) -> Result<ComplexMatrix> {
    m.clone()
        .try_inverse()
        .ok_or_else(|| Error::Linalg("singular matrix".into()))
}

pub fn eigenvalues(m: &ComplexMatrix) -> Result<Vec<Complex64>> {
    let schur = Schur::try_new(m.clone(), f64::EPSILON, 10_000)
        .ok_or_else(|| Error::Linalg("Schur iteration did not converge".into()))?;
    let (_, t) = schur.unpack();
    Ok((0..t.nrows()).map(|i| t[(i, i)]).collect())
}

/// Smallest pairwise distance between eigenvalues; `inf` for 1x1.
pub fn min_gap(eigs: &[Complex64]) -> f64 {
    let mut gap = f64::INFINITY;
    for i in 0..eigs.len() {
        for j in i + 1..eigs.len() {
            gap = gap.min((eigs[i] - eigs[j]).norm());
        }
    }
    gap
}

/// Eigenvalues and a matrix whose columns are unit eigenvectors.
/// Assumes pairwise distinct eigenvalues; callers check the gap first.
pub fn eigen_decompose(m: &ComplexMatrix) -> Result<(Vec<Complex64>, ComplexMatrix)> {
    let n = m.nrows();
    let schur = Schur::try_new(m.clone(), f64::EPSILON, 10_000)
        .ok_or_else(|| Error::Linalg("Schur iteration did not converge".into()))?;
    let (q, t) = schur.unpack();
    let eigs: Vec<Complex64> = (0..n).map(|i| t[(i, i)]).collect();
    let mut y = ComplexMatrix::zeros(n, n);
    for k in 0..n {
        y[(k, k)] = Complex64::new(1.0, 0.0);
        for j in (0..k).rev() {
            let mut acc = Complex64::new(0.0, 0.0);
            for l in j + 1..=k {
                acc += t[(j, l)] * y[(l, k)];
            }
            let d = t[(j, j)] - t[(k, k)];
            if d.norm() == 0.0 {
                return Err(Error::Linalg("repeated eigenvalue in eigen_decompose".into()));
            }
            y[(j, k)] = -acc / d;
        }
    }
    let mut v = q * y;
    for k in 0..n {
        let norm = v.column(k).norm();
        v.column_mut(k).unscale_mut(norm);
    }
    Ok((eigs, v))
}

fn one_norm(m: &ComplexMatrix) -> f64 {
    (0..m.ncols())
        .map(|j| m.column(j).iter().map(|z| z.norm()).sum::<f64>())
        .fold(0.0, f64::max)
}

const PADE13: [f64; 14] = [
    64764752532480000.0,
    32382376266240000.0,
    7771770303897600.0,
    1187353796428800.0,
    129060195264000.0,
    10559470521600.0,
    670442572800.0,
    33522128640.0,
    1323241920.0,
    40840800.0,
    960960.0,
    16380.0,
    182.0,
    1.0,
];
const THETA13: f64 = 5.371920351148152;

/// Matrix exponential by scaling and squaring with the degree-13 Padé
/// approximant.
pub fn expm(a: &ComplexMatrix) -> Result<ComplexMatrix> {
    let n = a.nrows();
    if n == 0 {
        return Ok(a.clone());
    }
    let norm = one_norm(a);
    if !norm.is_finite() {
        return Err(Error::Linalg("non-finite matrix in expm".into()));
    }
    let s = if norm > THETA13 { (norm / THETA13).log2().ceil() as i32 } else { 0 };
    let a = a * Complex64::new(0.5f64.powi(s), 0.0);
    let b = |k: usize| Complex64::new(PADE13[k], 0.0);
    let id = identity(n);
    let a2 = &a * &a;
    let a4 = &a2 * &a2;
    let a6 = &a4 * &a2;
    let u_inner = &a6 * (&a6 * b(13) + &a4 * b(11) + &a2 * b(9))
        + &a6 * b(7)
        + &a4 * b(5)
        + &a2 * b(3)
        + &id * b(1);
    let u = &a * u_inner;
    let v = &a6 * (&a6 * b(12) + &a4 * b(10) + &a2 * b(8))
        + &a6 * b(6)
        + &a4 * b(4)
        + &a2 * b(2)
        + &id * b(0);
    let denom = &v - &u;
    let mut r = denom
        .lu()
        .solve(&(&v + &u))
        .ok_or_else(|| Error::Linalg("singular Padé denominator".into()))?;
    for _ in 0..s {
        r = &r * &r;
    }
    Ok(r)
}

/// Minimum-norm least-squares solution of `a x = b`; singular values below
/// `rel_tol * sigma_max` are treated as zero.
pub fn lstsq_min_norm(a: &ComplexMatrix, b: &DVector<Complex64>, rel_tol: f64) -> Result<DVector<Complex64>> {
    let svd = a.clone().svd(true, true);
    let smax = svd.singular_values.iter().cloned().fold(0.0, f64::max);
    if smax == 0.0 {
        return Ok(DVector::zeros(a.ncols()));
    }
    svd.solve(b, rel_tol * smax).map_err(|e| Error::Linalg(e.to_string()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::series::max_norm;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    fn taylor_exp(a: &ComplexMatrix) -> ComplexMatrix {
        // Oracle: scale by 2^-10, 30 Taylor terms, square back.
        let s = 10;
        let a = a * c(0.5f64.powi(s), 0.0);
        let mut term = identity(a.nrows());
        let mut sum = term.clone();
        for k in 1..30 {
            term = &term * &a * c(1.0 / k as f64, 0.0);
            sum += &term;
        }
        for _ in 0..s {
            sum = &sum * &sum;
        }
        sum
    }

    #[test]
    fn expm_nilpotent_and_diagonal() {
        let n = ComplexMatrix::from_row_slice(2, 2, &[c(0., 0.), c(1., 0.), c(0., 0.), c(0., 0.)]);
        let e = expm(&n).unwrap();
        let want = ComplexMatrix::from_row_slice(2, 2, &[c(1., 0.), c(1., 0.), c(0., 0.), c(1., 0.)]);
        assert!(max_norm(&(e - want)) < 1e-15);

        let d = ComplexMatrix::from_diagonal(&DVector::from_vec(vec![c(2.0, 1.0), c(-7.5, 0.3)]));
        let e = expm(&d).unwrap();
        assert!((e[(0, 0)] - c(2.0, 1.0).exp()).norm() < 1e-12 * c(2.0, 1.0).exp().norm());
        assert!((e[(1, 1)] - c(-7.5, 0.3).exp()).norm() < 1e-15);
        assert_eq!(e[(0, 1)], c(0., 0.));
    }

    #[test]
    fn expm_matches_taylor_oracle() {
        let a = ComplexMatrix::from_row_slice(
            3,
            3,
            &[
                c(0.3, 1.0), c(-2.0, 0.5), c(1.0, 0.0),
                c(0.7, -0.2), c(1.5, 2.0), c(-0.4, 0.1),
                c(2.0, 0.0), c(0.0, -3.0), c(-1.0, 0.5),
            ],
        );
        let e = expm(&a).unwrap();
        let t = taylor_exp(&a);
        assert!(max_norm(&(&e - &t)) < 1e-11 * max_norm(&t));
    }

    #[test]
    fn eigen_decompose_reconstructs() {
        let a = ComplexMatrix::from_row_slice(2, 2, &[c(1., 0.), c(-2., 0.), c(0.5, 0.), c(-1., 1.)]);
        let (eigs, v) = eigen_decompose(&a).unwrap();
        for k in 0..2 {
            let col = v.column(k).into_owned();
            let r = &a * &col - &col * eigs[k];
            assert!(r.norm() < 1e-13);
        }
    }

    #[test]
    fn lstsq_picks_min_norm() {
        // x + y = 2 has min-norm solution (1, 1).
        let a = ComplexMatrix::from_row_slice(2, 2, &[c(1., 0.), c(1., 0.), c(0., 0.), c(0., 0.)]);
        let b = DVector::from_vec(vec![c(2., 0.), c(0., 0.)]);
        let x = lstsq_min_norm(&a, &b, 1e-12).unwrap();
        assert!((x[0] - c(1., 0.)).norm() < 1e-14);
        assert!((x[1] - c(1., 0.)).norm() < 1e-14);
    }
}
