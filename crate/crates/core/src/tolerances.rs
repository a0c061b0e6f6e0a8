//! Default thresholds shared by the solvers, the monitors and the CLI.

/// Frozen-x seed residual (max entry of every F matrix).
pub const SEED_TOL: f64 = 1e-11;

/// Relative eigenvalue gap below which a leading matrix counts as degenerate;
/// scaled by `max(max |eigenvalue|, 1)`.
pub const GAP_REL_TOL: f64 = 1e-8;

pub const MAX_NEWTON_STEPS: usize = 50;

/// Singular values below this fraction of the largest are treated as zero in
/// minimum-norm solves.
pub const LSTSQ_REL_TOL: f64 = 1e-10;

/// Max F norm along a propagated trajectory.
pub const F_DRIFT_TOL: f64 = 1e-8;

/// Max H norm; limited by the finite-difference derivative of Omega.
pub const H_TOL: f64 = 1e-6;

/// Relative drift of conservation laws and of their eigenvalues.
pub const J_DRIFT_TOL: f64 = 1e-8;

/// Compatibility residual of a valid pair.
pub const COMPAT_TOL: f64 = 1e-10;

/// Relative error of `det Psi0` against `exp(int tr coefficient)`.
pub const ABEL_TOL: f64 = 1e-8;

/// Deviation of the propagated `C^(0)` from the identity.
pub const GAUGE_TOL: f64 = 1e-13;

/// `|det Psi0|` below this is treated as degenerate.
pub const DET_TOL: f64 = 1e-12;

/// Cap on the per-step error estimate of the integrator.
pub const ODE_TOL: f64 = 1e-6;

/// Default evaluation annulus for recomposition checks.
pub const LAMBDA_MIN: f64 = 0.01;
pub const LAMBDA_MAX: f64 = 0.5;

/// Thresholds applied by run summaries; every field defaults to the constant
/// of the same name above.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize)]
pub struct Tolerances {
    pub seed: f64,
    pub f_drift: f64,
    pub h: f64,
    pub j_drift: f64,
    pub compat: f64,
    pub gauge: f64,
    pub abel: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Self {
            seed: SEED_TOL,
            f_drift: F_DRIFT_TOL,
            h: H_TOL,
            j_drift: J_DRIFT_TOL,
            compat: COMPAT_TOL,
            gauge: GAUGE_TOL,
            abel: ABEL_TOL,
        }
    }
}
