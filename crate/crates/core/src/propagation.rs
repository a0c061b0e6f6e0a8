//! Propagation of seed expansions in `x`.
//!
//! The state `u`, the coefficients, `Psi0` and `int tr Phi^(0) dx` are
//! integrated as one coupled system. Each coefficient obeys
//!
//! ```text
//! C_x^(i) = sum_{j=m}^{i} P^(j) C^(i-j) - sum_{j=m}^{0} C^(i-j) Phi^(j),   0 <= i <= M,
//! ```
//!
//! with `Phi` recomputed from its recurrence at every evaluation and terms
//! needing `C^(M+1..)` dropped. In the logarithmic case every slice
//! `C^(.,j)` obeys the same system with `m = 0`, so `Phi^(0) = P^(0)`.
//! `Psi0` solves `Psi0_x = Phi^(0) Psi0` with `Psi0(x0) = E`.

use num_complex::Complex64;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::integrate::integrate;
use crate::linalg::{eigenvalues, expm, inverse};
use crate::model::PQPairModel;
use crate::seed::{omega_recurrence, phi_recurrence, residual_f, residual_f_regular, IrregularSeed, RegularSeed};
use crate::series::{identity, max_norm, zeros, ComplexMatrix, LaurentMatrixSeries};
use crate::tolerances::{DET_TOL, ODE_TOL};

/// Sampled solution of `du/dx = G(u, x)`.
#[derive(Debug, Clone)]
pub struct StateTrajectory {
    pub grid: Vec<f64>,
    pub u: Vec<Vec<Complex64>>,
    pub error_estimate: f64,
}

pub fn evolve_state(model: &PQPairModel, x_end: f64, steps: usize) -> Result<StateTrajectory> {
    check_interval(model.x0(), x_end)?;
    let run = integrate(|x, u| model.vector_field_at(u, x), model.x0(), model.u0(), x_end, steps, ODE_TOL)?;
    Ok(StateTrajectory { grid: run.grid, u: run.states, error_estimate: run.global_estimate })
}

fn check_interval(x0: f64, x_end: f64) -> Result<()> {
    if x_end > x0 {
        Ok(())
    } else {
        Err(Error::InvalidModel(format!("x_end = {x_end} must exceed x0 = {x0}")))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum ExpansionKind {
    Irregular,
    Regular,
}

#[derive(Debug, Clone)]
pub struct Trajectory {
    pub kind: ExpansionKind,
    pub dim: usize,
    pub m: i32,
    pub n: i32,
    /// Truncation order `M`.
    pub order: usize,
    pub grid: Vec<f64>,
    pub u: Vec<Vec<Complex64>>,
    /// `c[s][i][j]` is `C^(i,j)` at sample `s`; the irregular case has only
    /// `j = 0`.
    pub c: Vec<Vec<Vec<ComplexMatrix>>>,
    /// Orders of `omega`: `n..=-1`, or `[-1]` (holding `Q^(-1)`) in the
    /// logarithmic case.
    pub omega_orders: Vec<i32>,
    pub omega: Vec<Vec<ComplexMatrix>>,
    /// `Phi^(m..=0)`.
    pub phi: Vec<Vec<ComplexMatrix>>,
    pub psi0: Vec<ComplexMatrix>,
    pub det_psi0: Vec<Complex64>,
    /// `|det Psi0 - exp(int tr Phi^(0))| / |exp(int tr Phi^(0))|`.
    pub abel_error: Vec<f64>,
    pub f_orders: Vec<i32>,
    pub f_norms: Vec<Vec<f64>>,
    /// Orders `m+n..=-1`.
    pub h_orders: Vec<i32>,
    /// NaN at the two samples next to each end of the grid.
    pub h_norms: Vec<Vec<f64>>,
    pub compat_norms: Vec<f64>,
    /// Max entry of `C^(0) - E` (and of `C^(0,j)`, `j >= 1`).
    pub c0_deviation: Vec<f64>,
    pub integration_error: f64,
}

fn fmax<'a>(it: impl IntoIterator<Item = &'a f64>) -> f64 {
    it.into_iter().filter(|v| !v.is_nan()).cloned().fold(0.0, f64::max)
}

impl Trajectory {
    pub fn len(&self) -> usize {
        self.grid.len()
    }

    pub fn is_empty(&self) -> bool {
        self.grid.is_empty()
    }

    pub fn max_f(&self) -> f64 {
        fmax(self.f_norms.iter().flatten())
    }

    /// Max over interior samples; zero when the grid is too short.
    pub fn max_h(&self) -> f64 {
        fmax(self.h_norms.iter().flatten())
    }

    pub fn max_compat(&self) -> f64 {
        fmax(&self.compat_norms)
    }

    pub fn max_c0_deviation(&self) -> f64 {
        fmax(&self.c0_deviation)
    }

    pub fn max_abel_error(&self) -> f64 {
        fmax(&self.abel_error)
    }

    /// Max entry of `C^(i,j)` with `j >= 1` over the run.
    pub fn max_log_coeff(&self) -> f64 {
        self.c
            .iter()
            .flat_map(|s| s.iter().flat_map(|row| row.iter().skip(1)))
            .map(max_norm)
            .fold(0.0, f64::max)
    }
}

/// Offsets inside the packed integration vector:
/// `[u | C^(0,0) C^(0,1) .. C^(M,logs-1) | Psi0 | int tr]`.
struct Layout {
    d: usize,
    dim: usize,
    order: usize,
    logs: usize,
}

impl Layout {
    fn nn(&self) -> usize {
        self.dim * self.dim
    }

    fn c_offset(&self, i: usize, j: usize) -> usize {
        self.d + (i * self.logs + j) * self.nn()
    }

    fn psi_offset(&self) -> usize {
        self.c_offset(self.order + 1, 0)
    }

    fn trace_offset(&self) -> usize {
        self.psi_offset() + self.nn()
    }

    fn len(&self) -> usize {
        self.trace_offset() + 1
    }

    fn mat(&self, y: &[Complex64], off: usize) -> ComplexMatrix {
        ComplexMatrix::from_column_slice(self.dim, self.dim, &y[off..off + self.nn()])
    }

    fn put(&self, y: &mut [Complex64], off: usize, m: &ComplexMatrix) {
        y[off..off + self.nn()].copy_from_slice(m.as_slice());
    }

    fn coeffs(&self, y: &[Complex64]) -> Vec<Vec<ComplexMatrix>> {
        (0..=self.order)
            .map(|i| (0..self.logs).map(|j| self.mat(y, self.c_offset(i, j))).collect())
            .collect()
    }

    fn slice(c: &[Vec<ComplexMatrix>], j: usize) -> Vec<ComplexMatrix> {
        c.iter().map(|row| row[j].clone()).collect()
    }

    fn pack(&self, u: &[Complex64], c: &[Vec<ComplexMatrix>]) -> Vec<Complex64> {
        let mut y = vec![Complex64::new(0.0, 0.0); self.len()];
        y[..self.d].copy_from_slice(u);
        for (i, row) in c.iter().enumerate() {
            for (j, m) in row.iter().enumerate() {
                self.put(&mut y, self.c_offset(i, j), m);
            }
        }
        self.put(&mut y, self.psi_offset(), &identity(self.dim));
        y
    }
}

/// Right-hand side of the coefficient system for one slice.
fn coefficient_rhs(c: &[ComplexMatrix], p: &LaurentMatrixSeries, phi: &[ComplexMatrix], m: i32) -> Vec<ComplexMatrix> {
    let top = c.len() as i32 - 1;
    let dim = c[0].nrows();
    (0..=top)
        .map(|i| {
            let mut acc = zeros(dim);
            for j in m..=i.min(p.trunc_order()) {
                let k = i - j;
                if k > top {
                    continue;
                }
                acc += p.coeff_or_zero(j) * &c[k as usize];
            }
            for (jj, ph) in phi.iter().enumerate() {
                let k = i - (m + jj as i32);
                if k > top {
                    continue;
                }
                acc -= &c[k as usize] * ph;
            }
            acc
        })
        .collect()
}

/// Phi list and derivatives of every slice; `phi.last()` is `Phi^(0)`.
fn slice_rates(
    kind: ExpansionKind,
    c: &[Vec<ComplexMatrix>],
    p: &LaurentMatrixSeries,
    m: i32,
) -> Result<(Vec<ComplexMatrix>, Vec<Vec<ComplexMatrix>>)> {
    let logs = c[0].len();
    match kind {
        ExpansionKind::Irregular => {
            let c0 = Layout::slice(c, 0);
            let phi = phi_recurrence(&c0, p)?;
            Ok((phi.clone(), vec![coefficient_rhs(&c0, p, &phi, m)]))
        }
        ExpansionKind::Regular => {
            let phi = vec![p.coeff_or_zero(0)];
            let rates = (0..logs).map(|j| coefficient_rhs(&Layout::slice(c, j), p, &phi, 0)).collect();
            Ok((phi, rates))
        }
    }
}

fn coupled_rhs(
    model: &PQPairModel,
    layout: &Layout,
    kind: ExpansionKind,
    x: f64,
    y: &[Complex64],
) -> Result<Vec<Complex64>> {
    let u = &y[..layout.d];
    let p = model.p_at(u, x)?;
    let c = layout.coeffs(y);
    let (phi, rates) = slice_rates(kind, &c, &p, model.m())?;
    let mut out = vec![Complex64::new(0.0, 0.0); layout.len()];
    out[..layout.d].copy_from_slice(&model.vector_field_at(u, x)?);
    for (j, slice) in rates.iter().enumerate() {
        for (i, m) in slice.iter().enumerate() {
            layout.put(&mut out, layout.c_offset(i, j), m);
        }
    }
    let phi0 = phi.last().expect("Phi^(0) present");
    let psi = layout.mat(y, layout.psi_offset());
    layout.put(&mut out, layout.psi_offset(), &(phi0 * psi));
    out[layout.trace_offset()] = phi0.trace();
    Ok(out)
}

fn run(
    model: &PQPairModel,
    kind: ExpansionKind,
    c0: Vec<Vec<ComplexMatrix>>,
    x_end: f64,
    steps: usize,
) -> Result<Trajectory> {
    check_interval(model.x0(), x_end)?;
    let dim = model.dim();
    let (m, n) = (model.m(), model.n());
    let layout = Layout { d: model.state_dim(), dim, order: c0.len() - 1, logs: c0[0].len() };
    let y0 = layout.pack(model.u0(), &c0);
    let integ = integrate(|x, y| coupled_rhs(model, &layout, kind, x, y), model.x0(), &y0, x_end, steps, ODE_TOL)?;

    let omega_orders: Vec<i32> = match kind {
        ExpansionKind::Irregular => (n..0).collect(),
        ExpansionKind::Regular => vec![-1],
    };
    let f_orders: Vec<i32> = (match kind {
        ExpansionKind::Irregular => n,
        ExpansionKind::Regular => -1,
    }..layout.order as i32)
        .collect();
    let mut traj = Trajectory {
        kind,
        dim,
        m,
        n,
        order: layout.order,
        grid: integ.grid.clone(),
        u: Vec::new(),
        c: Vec::new(),
        omega_orders,
        omega: Vec::new(),
        phi: Vec::new(),
        psi0: Vec::new(),
        det_psi0: Vec::new(),
        abel_error: Vec::new(),
        f_orders,
        f_norms: Vec::new(),
        h_orders: ((m + n)..0).collect(),
        h_norms: Vec::new(),
        compat_norms: Vec::new(),
        c0_deviation: Vec::new(),
        integration_error: integ.global_estimate,
    };

    for (x, y) in integ.grid.iter().zip(&integ.states) {
        let x = *x;
        let u = y[..layout.d].to_vec();
        let c = layout.coeffs(y);
        let (p, q) = model.pair_coeffs_at(&u, x)?;
        let (phi, _) = slice_rates(kind, &c, &p, m)?;
        let (omega, f_norms) = match kind {
            ExpansionKind::Irregular => {
                let c_irr = Layout::slice(&c, 0);
                let omega = omega_recurrence(&c_irr, &q)?;
                let f = residual_f(&c_irr, &omega, &q);
                (omega, f.iter().map(max_norm).collect())
            }
            ExpansionKind::Regular => {
                let f = residual_f_regular(&c, &q);
                let norms = f.iter().map(|row| row.iter().map(max_norm).fold(0.0, f64::max)).collect();
                (vec![q.coeff_or_zero(-1)], norms)
            }
        };
        let psi = layout.mat(y, layout.psi_offset());
        let det = psi.determinant();
        if det.norm() < DET_TOL {
            return Err(Error::DegeneratePsi0 { x, det: det.norm() });
        }
        let abel = y[layout.trace_offset()].exp();
        let c0_dev = c[0]
            .iter()
            .enumerate()
            .map(|(j, cj)| if j == 0 { max_norm(&(cj - identity(dim))) } else { max_norm(cj) })
            .fold(0.0, f64::max);

        traj.compat_norms.push(model.compatibility_residual(&u, x)?.max());
        traj.u.push(u);
        traj.c.push(c);
        traj.omega.push(omega);
        traj.phi.push(phi);
        traj.psi0.push(psi);
        traj.det_psi0.push(det);
        traj.abel_error.push((det - abel).norm() / abel.norm());
        traj.f_norms.push(f_norms);
        traj.c0_deviation.push(c0_dev);
    }
    traj.h_norms = match residual_h(&traj) {
        Ok(h) => h,
        Err(Error::GridTooCoarse(_)) => vec![vec![f64::NAN; traj.h_orders.len()]; traj.len()],
        Err(e) => return Err(e),
    };
    Ok(traj)
}

/// Propagates an irregular seed (computed at `model.x0()`) to `x_end`.
pub fn evolve_expansion(seed: &IrregularSeed, model: &PQPairModel, x_end: f64, steps: usize) -> Result<Trajectory> {
    if seed.n != model.n() {
        return Err(Error::InvalidModel(format!("seed has n = {}, model has n = {}", seed.n, model.n())));
    }
    if seed.c[0].nrows() != model.dim() {
        return Err(Error::DimensionMismatch(model.dim(), seed.c[0].nrows()));
    }
    if seed.x0 != model.x0() {
        return Err(Error::InvalidModel(format!("seed computed at x = {}, model starts at {}", seed.x0, model.x0())));
    }
    if seed.order() < (-model.m()) as usize {
        return Err(Error::InsufficientTruncation(format!(
            "Phi needs C^(1..={}), seed has order {}",
            -model.m(),
            seed.order()
        )));
    }
    let c0 = seed.c.iter().map(|m| vec![m.clone()]).collect();
    run(model, ExpansionKind::Irregular, c0, x_end, steps)
}

/// Propagates a logarithmic seed; only pairs with `m = 0` are covered.
pub fn evolve_expansion_regular(seed: &RegularSeed, model: &PQPairModel, x_end: f64, steps: usize) -> Result<Trajectory> {
    if model.m() != 0 {
        return Err(Error::ModelNotTheorem2(model.m()));
    }
    if model.n() != -1 {
        return Err(Error::InvalidModel(format!("logarithmic expansion needs n = -1, model has n = {}", model.n())));
    }
    if seed.c[0][0].nrows() != model.dim() {
        return Err(Error::DimensionMismatch(model.dim(), seed.c[0][0].nrows()));
    }
    if seed.x0 != model.x0() {
        return Err(Error::InvalidModel(format!("seed computed at x = {}, model starts at {}", seed.x0, model.x0())));
    }
    run(model, ExpansionKind::Regular, seed.c.clone(), x_end, steps)
}

/// Samples of `Psi0_x = P^(0) Psi0`, `Psi0(x0) = E`, with the Abel check.
#[derive(Debug, Clone)]
pub struct Psi0Samples {
    pub grid: Vec<f64>,
    pub psi0: Vec<ComplexMatrix>,
    pub det: Vec<Complex64>,
    /// `exp(int tr P^(0) dx)`.
    pub abel: Vec<Complex64>,
}

/// Integrates `Psi0` alongside the state. Models with `m < 0` drive `Psi0`
/// by `Phi^(0)`, which depends on the coefficients; use the trajectory of
/// [`evolve_expansion`] for those.
pub fn evolve_psi0(model: &PQPairModel, x_end: f64, steps: usize) -> Result<Psi0Samples> {
    if model.m() != 0 {
        return Err(Error::InvalidModel(
            "Psi0 for m < 0 is driven by Phi^(0); it is part of the expansion trajectory".into(),
        ));
    }
    check_interval(model.x0(), x_end)?;
    let seed = vec![vec![identity(model.dim())]];
    let layout = Layout { d: model.state_dim(), dim: model.dim(), order: 0, logs: 1 };
    let y0 = layout.pack(model.u0(), &seed);
    let integ = integrate(
        |x, y| coupled_rhs(model, &layout, ExpansionKind::Regular, x, y),
        model.x0(),
        &y0,
        x_end,
        steps,
        ODE_TOL,
    )?;
    let mut out = Psi0Samples { grid: integ.grid.clone(), psi0: vec![], det: vec![], abel: vec![] };
    for (x, y) in integ.grid.iter().zip(&integ.states) {
        let psi = layout.mat(y, layout.psi_offset());
        let det = psi.determinant();
        if det.norm() < DET_TOL {
            return Err(Error::DegeneratePsi0 { x: *x, det: det.norm() });
        }
        out.psi0.push(psi);
        out.det.push(det);
        out.abel.push(y[layout.trace_offset()].exp());
    }
    Ok(out)
}

/// Norms of `H^(i) = Omega_x^(i) - (i+1) Phi^(i+1) + sum_j [Omega^(j), Phi^(i-j)]`
/// for `m+n <= i < 0`. `Omega_x` is a centered difference on the uniform grid
/// with one Richardson level, so only samples `2..len-2` get values; the
/// others are NaN.
pub fn residual_h(traj: &Trajectory) -> Result<Vec<Vec<f64>>> {
    let len = traj.len();
    if len < 5 {
        return Err(Error::GridTooCoarse(len));
    }
    let h = (traj.grid[len - 1] - traj.grid[0]) / (len - 1) as f64;
    let lo_omega = traj.omega_orders[0];
    let dim = traj.dim;
    let omega_at = |s: usize, i: i32| -> ComplexMatrix {
        if i < lo_omega || i >= 0 {
            zeros(dim)
        } else {
            traj.omega[s][(i - lo_omega) as usize].clone()
        }
    };
    let phi_at = |s: usize, i: i32| -> ComplexMatrix {
        if i < traj.m || i > 0 {
            zeros(dim)
        } else {
            traj.phi[s][(i - traj.m) as usize].clone()
        }
    };
    let mut out = vec![vec![f64::NAN; traj.h_orders.len()]; len];
    for s in 2..len - 2 {
        for (slot, &i) in traj.h_orders.iter().enumerate() {
            let d1 = (omega_at(s + 1, i) - omega_at(s - 1, i)) / Complex64::new(2.0 * h, 0.0);
            let d2 = (omega_at(s + 2, i) - omega_at(s - 2, i)) / Complex64::new(4.0 * h, 0.0);
            let mut acc = (d1 * Complex64::new(4.0, 0.0) - d2) / Complex64::new(3.0, 0.0);
            acc -= phi_at(s, i + 1) * Complex64::new((i + 1) as f64, 0.0);
            for j in lo_omega..0 {
                let (w, f) = (omega_at(s, j), phi_at(s, i - j));
                acc += &w * &f - &f * &w;
            }
            out[s][slot] = max_norm(&acc);
        }
    }
    Ok(out)
}

/// Conservation laws along a trajectory.
#[derive(Debug, Clone)]
pub struct ConservationLaws {
    /// Order of the Omega coefficient behind each law (`-1` for
    /// `Psi0^-1 Q^(-1) Psi0` in the logarithmic case).
    pub orders: Vec<i32>,
    /// `j[s][l]`: law `l` at sample `s`.
    pub j: Vec<Vec<ComplexMatrix>>,
    /// `max_x |J(x) - J(x0)| / (1 + |J(x0)|)` per law, max-entry norm.
    pub drift: Vec<f64>,
    /// Same normalization for nearest-neighbour matched eigenvalues.
    pub eigen_drift: Vec<f64>,
}

impl ConservationLaws {
    pub fn max_drift(&self) -> f64 {
        fmax(&self.drift)
    }

    pub fn max_eigen_drift(&self) -> f64 {
        fmax(&self.eigen_drift)
    }
}

fn eigen_mismatch(reference: &[Complex64], current: &[Complex64]) -> f64 {
    let mut pool: Vec<Complex64> = current.to_vec();
    let mut worst = 0.0f64;
    for r in reference {
        let (k, d) = pool
            .iter()
            .enumerate()
            .map(|(k, c)| (k, (c - r).norm()))
            .fold((0, f64::INFINITY), |a, b| if b.1 < a.1 { b } else { a });
        worst = worst.max(d);
        pool.swap_remove(k);
    }
    worst
}

/// `J^(i) = Psi0^-1 Omega^(i) Psi0` for `n <= i < 0` when `m = 0`; only
/// `J^(-1)` when `m < 0`; `Psi0^-1 Q^(-1) Psi0` in the logarithmic case.
pub fn conservation_laws(traj: &Trajectory) -> Result<ConservationLaws> {
    let orders: Vec<i32> = if traj.m == 0 { traj.omega_orders.clone() } else { vec![-1] };
    let lo = traj.omega_orders[0];
    let mut j = Vec::with_capacity(traj.len());
    for (s, psi) in traj.psi0.iter().enumerate() {
        let det = psi.determinant().norm();
        if det < DET_TOL {
            return Err(Error::DegeneratePsi0 { x: traj.grid[s], det });
        }
        let inv = inverse(psi)?;
        j.push(orders.iter().map(|&i| &inv * &traj.omega[s][(i - lo) as usize] * psi).collect::<Vec<_>>());
    }
    let mut drift = vec![0.0; orders.len()];
    let mut eigen_drift = vec![0.0; orders.len()];
    for l in 0..orders.len() {
        let j0 = &j[0][l];
        let scale = 1.0 + max_norm(j0);
        let ev0 = eigenvalues(j0)?;
        for sample in &j {
            drift[l] = f64::max(drift[l], max_norm(&(&sample[l] - j0)) / scale);
            eigen_drift[l] = f64::max(eigen_drift[l], eigen_mismatch(&ev0, &eigenvalues(&sample[l])?) / scale);
        }
    }
    Ok(ConservationLaws { orders, j, drift, eigen_drift })
}

/// `Lambda = Psi0 exp(J ln lambda)`, principal branch of the logarithm.
pub fn eval_lambda_regular(psi0: &ComplexMatrix, j: &ComplexMatrix, lambda: Complex64) -> Result<ComplexMatrix> {
    if lambda == Complex64::new(0.0, 0.0) {
        return Err(Error::EvalAtPole);
    }
    if psi0.shape() != j.shape() {
        return Err(Error::DimensionMismatch(psi0.nrows(), j.nrows()));
    }
    Ok(psi0 * expm(&(j * lambda.ln()))?)
}

/// Truncated solution `Psi = S Lambda`, `S = sum lambda^i (ln lambda)^j C^(i,j)`.
///
/// Residuals are reported after right-division by `Lambda`:
/// `(Psi_lambda - Q Psi) Lambda^-1 = S_lambda + S Q^(-1) / lambda - Q S` and
/// `(Psi_x - P Psi) Lambda^-1 = S_x + S P^(0) - P S`, max-entry norm.
#[derive(Debug, Clone)]
pub struct Recomposition {
    pub lambda: Complex64,
    pub psi: ComplexMatrix,
    pub lambda_residual: f64,
    pub x_residual: f64,
}

/// Recomposes from logarithmic coefficients `c[i][j]` at state `u`, point `x`.
pub fn recompose_regular(
    model: &PQPairModel,
    c: &[Vec<ComplexMatrix>],
    u: &[Complex64],
    x: f64,
    psi0: &ComplexMatrix,
    lambda: Complex64,
) -> Result<Recomposition> {
    if model.n() != -1 || model.m() != 0 {
        return Err(Error::UnsupportedLambdaEvaluation);
    }
    if lambda == Complex64::new(0.0, 0.0) {
        return Err(Error::EvalAtPole);
    }
    let dim = model.dim();
    let (p, q) = model.pair_coeffs_at(u, x)?;
    let (_, rates) = slice_rates(ExpansionKind::Regular, c, &p, 0)?;
    let ln = lambda.ln();
    let mut s = zeros(dim);
    let mut s_lambda = zeros(dim);
    let mut s_x = zeros(dim);
    for (i, row) in c.iter().enumerate() {
        for (j, cij) in row.iter().enumerate() {
            let w = lambda.powi(i as i32) * ln.powi(j as i32);
            s += cij * w;
            s_x += &rates[j][i] * w;
            let mut dw = Complex64::new(0.0, 0.0);
            if i > 0 {
                dw += lambda.powi(i as i32 - 1) * ln.powi(j as i32) * i as f64;
            }
            if j > 0 {
                dw += lambda.powi(i as i32 - 1) * ln.powi(j as i32 - 1) * j as f64;
            }
            s_lambda += cij * dw;
        }
    }
    let residue = q.coeff_or_zero(-1);
    let p0 = p.coeff_or_zero(0);
    let q_val = q.eval(lambda)?;
    let p_val = p.eval(lambda)?;
    let r_lambda = &s_lambda + &s * &residue / lambda - &q_val * &s;
    let r_x = &s_x + &s * &p0 - &p_val * &s;
    let inv = inverse(psi0)?;
    let lam = eval_lambda_regular(psi0, &(&inv * &residue * psi0), lambda)?;
    Ok(Recomposition { lambda, psi: &s * lam, lambda_residual: max_norm(&r_lambda), x_residual: max_norm(&r_x) })
}

/// Recomposition at the seed point, with `Psi0 = E`.
pub fn recompose_seed(seed: &RegularSeed, model: &PQPairModel, lambda: Complex64) -> Result<Recomposition> {
    recompose_regular(model, &seed.c, model.u0(), seed.x0, &identity(model.dim()), lambda)
}

/// Recomposition at sample `s` of a trajectory; irregular trajectories have
/// no closed-form `Lambda`.
pub fn recompose_sample(traj: &Trajectory, model: &PQPairModel, s: usize, lambda: Complex64) -> Result<Recomposition> {
    if traj.kind == ExpansionKind::Irregular {
        return Err(Error::UnsupportedLambdaEvaluation);
    }
    recompose_regular(model, &traj.c[s], &traj.u[s], traj.grid[s], &traj.psi0[s], lambda)
}
