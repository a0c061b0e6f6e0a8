//! Fixed-step classical Runge-Kutta with a step-halving error estimate.
//!
//! Every step is taken once with the full step and once as two half steps.
//! The half-step result is kept; `|fine - coarse| / 15` is the local error
//! estimate of the coarse step and serves as a bound for the fine one.

use num_complex::Complex64;

use crate::error::{Error, Result};

#[derive(Debug, Clone)]
pub struct Integration {
    /// `x0 + k h` for `k = 0..=steps`.
    pub grid: Vec<f64>,
    pub states: Vec<Vec<Complex64>>,
    /// Local error estimate of each step (length `steps`).
    pub step_estimates: Vec<f64>,
    /// Sum of the local estimates.
    pub global_estimate: f64,
}

fn axpy(y: &[Complex64], a: f64, k: &[Complex64]) -> Vec<Complex64> {
    y.iter().zip(k).map(|(yi, ki)| yi + ki * a).collect()
}

fn rk4_step<F>(f: &mut F, x: f64, y: &[Complex64], h: f64) -> Result<Vec<Complex64>>
where
    F: FnMut(f64, &[Complex64]) -> Result<Vec<Complex64>>,
{
    let k1 = f(x, y)?;
    let k2 = f(x + 0.5 * h, &axpy(y, 0.5 * h, &k1))?;
    let k3 = f(x + 0.5 * h, &axpy(y, 0.5 * h, &k2))?;
    let k4 = f(x + h, &axpy(y, h, &k3))?;
    if [&k1, &k2, &k3, &k4].iter().any(|k| k.len() != y.len()) {
        return Err(Error::DimensionMismatch(y.len(), k1.len()));
    }
    Ok((0..y.len())
        .map(|i| y[i] + (k1[i] + (k2[i] + k3[i]) * 2.0 + k4[i]) * (h / 6.0))
        .collect())
}

/// Integrates `y' = f(x, y)` from `x0` to `x_end` in `steps` equal steps.
///
/// Fails with `StepFailure` when a local error estimate exceeds `tol`, and
/// with `DivisionByZero` when the right-hand side produces a non-finite value.
pub fn integrate<F>(mut f: F, x0: f64, y0: &[Complex64], x_end: f64, steps: usize, tol: f64) -> Result<Integration>
where
    F: FnMut(f64, &[Complex64]) -> Result<Vec<Complex64>>,
{
    if steps == 0 {
        return Err(Error::InvalidModel("number of steps must be positive".into()));
    }
    if !(x0.is_finite() && x_end.is_finite()) {
        return Err(Error::InvalidModel("integration bounds must be finite".into()));
    }
    let h = (x_end - x0) / steps as f64;
    let mut grid = Vec::with_capacity(steps + 1);
    let mut states = Vec::with_capacity(steps + 1);
    let mut step_estimates = Vec::with_capacity(steps);
    grid.push(x0);
    states.push(y0.to_vec());
    let mut y = y0.to_vec();
    for k in 0..steps {
        let x = x0 + k as f64 * h;
        let coarse = rk4_step(&mut f, x, &y, h)?;
        let mid = rk4_step(&mut f, x, &y, 0.5 * h)?;
        let fine = rk4_step(&mut f, x + 0.5 * h, &mid, 0.5 * h)?;
        if fine.iter().any(|v| !v.re.is_finite() || !v.im.is_finite()) {
            return Err(Error::DivisionByZero);
        }
        let est = fine.iter().zip(&coarse).map(|(a, b)| (a - b).norm()).fold(0.0, f64::max) / 15.0;
        if !(est <= tol) {
            return Err(Error::StepFailure { x, estimate: est, tol });
        }
        step_estimates.push(est);
        y = fine;
        grid.push(if k + 1 == steps { x_end } else { x0 + (k + 1) as f64 * h });
        states.push(y.clone());
    }
    let global_estimate = step_estimates.iter().sum();
    Ok(Integration { grid, states, step_estimates, global_estimate })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(v: f64) -> Complex64 {
        Complex64::new(v, 0.0)
    }

    #[test]
    fn zero_field_keeps_initial_value() {
        let r = integrate(|_, y| Ok(vec![c(0.0); y.len()]), 0.0, &[c(1.5), c(-2.0)], 3.0, 7, 1e-6).unwrap();
        assert!(r.states.iter().all(|s| s == &vec![c(1.5), c(-2.0)]));
        assert_eq!(r.grid.len(), 8);
        assert_eq!(*r.grid.last().unwrap(), 3.0);
    }

    #[test]
    fn exponential_oracle() {
        let r = integrate(|_, y| Ok(y.to_vec()), 0.0, &[c(1.0)], 1.0, 1000, 1e-6).unwrap();
        let last = r.states.last().unwrap()[0];
        assert!((last - c(std::f64::consts::E)).norm() < 1e-10);
    }

    #[test]
    fn polynomial_field_is_exact() {
        let r = integrate(|x, _| Ok(vec![c(x)]), 0.0, &[c(0.0)], 1.0, 3, 1e-6).unwrap();
        assert!((r.states[3][0] - c(0.5)).norm() < 1e-15);
        let r = integrate(|x, _| Ok(vec![c(x * x * x)]), 0.0, &[c(0.0)], 1.0, 4, 1e-6).unwrap();
        assert!((r.states[4][0] - c(0.25)).norm() < 1e-15);
    }

    #[test]
    fn estimate_decays_at_fourth_order() {
        let est = |n| integrate(|_, y| Ok(y.to_vec()), 0.0, &[c(1.0)], 1.0, n, 1e-6).unwrap().global_estimate;
        assert!(est(20) / est(40) >= 8.0);
    }

    #[test]
    fn large_error_is_a_step_failure() {
        let r = integrate(|_, y| Ok(vec![y[0] * 40.0]), 0.0, &[c(1.0)], 1.0, 2, 1e-6);
        assert!(matches!(r, Err(Error::StepFailure { .. })));
    }

    #[test]
    fn blow_up_is_reported() {
        let r = integrate(|_, y| Ok(vec![c(1.0) / (y[0] - c(1.0))]), 0.0, &[c(1.0)], 1.0, 2, 1e-6);
        assert!(r.is_err());
    }
}
