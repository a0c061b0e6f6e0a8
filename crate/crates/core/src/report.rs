//! End-to-end runs (seed, propagation, monitors) and their reports.
//!
//! CSV layout, one row per grid sample:
//!
//! ```text
//! x, <state>_re, <state>_im ..., F[i] ..., H[i] ..., compat,
//! J[i]_<r><c>_re, J[i]_<r><c>_im ..., det_psi0_re, det_psi0_im, c0_dev, abel_err
//! ```
//!
//! `F[i]`, `H[i]` are max-entry norms per order, `J[i]` the conservation law
//! built from `Omega^(i)` (from `Q^(-1)` for logarithmic runs) with 1-based
//! row/column digits. Values are written with 17 significant digits, `NaN`
//! where `H` is not defined (two samples at each end). Lines end with LF.

use std::io::Write;

use num_complex::Complex64;
use serde::Serialize;
use serde_json::{json, Map, Value};
use sha2::{Digest, Sha256};

use crate::document::serialize_model;
use crate::error::{Error, Result};
use crate::expr::format_complex;
use crate::model::PQPairModel;
use crate::propagation::{
    conservation_laws, evolve_expansion, evolve_expansion_regular, ConservationLaws, ExpansionKind, Trajectory,
};
use crate::seed::{solve_irregular_seed, solve_regular_seed, IrregularSeed, RegularSeed, SeedOptions};
use crate::series::ComplexMatrix;
use crate::tolerances::Tolerances;

#[derive(Debug, Clone)]
pub enum Seed {
    Irregular(IrregularSeed),
    Regular(RegularSeed),
}

impl Seed {
    pub fn kind(&self) -> ExpansionKind {
        match self {
            Seed::Irregular(_) => ExpansionKind::Irregular,
            Seed::Regular(_) => ExpansionKind::Regular,
        }
    }

    pub fn max_residual(&self) -> f64 {
        match self {
            Seed::Irregular(s) => s.max_residual(),
            Seed::Regular(s) => s.max_residual(),
        }
    }

    pub fn max_log_coeff(&self) -> f64 {
        match self {
            Seed::Irregular(_) => 0.0,
            Seed::Regular(s) => s.max_log_coeff(),
        }
    }
}

/// Logarithmic expansion when the pole is simple and `m = 0`, the
/// `Omega`-based expansion otherwise. `force_regular` selects the former.
pub fn choose_kind(model: &PQPairModel, force_regular: bool) -> ExpansionKind {
    if force_regular || (model.n() == -1 && model.m() == 0) {
        ExpansionKind::Regular
    } else {
        ExpansionKind::Irregular
    }
}

pub fn compute_seed(model: &PQPairModel, kind: ExpansionKind, order: usize, tol: f64) -> Result<Seed> {
    let (_, q) = model.pair_coeffs_at(model.u0(), model.x0())?;
    let opts = SeedOptions { tol, ..SeedOptions::default() };
    Ok(match kind {
        ExpansionKind::Irregular => Seed::Irregular(solve_irregular_seed(&q, order, model.x0(), &opts)?),
        ExpansionKind::Regular => Seed::Regular(solve_regular_seed(&q, order, model.x0(), &opts)?),
    })
}

fn matrix_value(m: &ComplexMatrix) -> Value {
    Value::Array(
        (0..m.nrows())
            .map(|r| Value::Array((0..m.ncols()).map(|c| Value::String(format_complex(m[(r, c)]))).collect()))
            .collect(),
    )
}

fn finite(v: f64) -> Value {
    if v.is_finite() {
        json!(v)
    } else {
        Value::Null
    }
}

/// JSON description of a seed: coefficients, residual per order and
/// whether the max residual is below `tol`.
pub fn seed_report(model: &PQPairModel, seed: &Seed, tol: f64) -> Value {
    let mut obj = Map::new();
    obj.insert("model".into(), json!(model.name()));
    obj.insert("kind".into(), json!(seed.kind()));
    obj.insert("x0".into(), json!(model.x0()));
    match seed {
        Seed::Irregular(s) => {
            obj.insert("order".into(), json!(s.order()));
            let mut res = Map::new();
            for (k, r) in s.residuals.iter().enumerate() {
                res.insert((s.n + k as i32).to_string(), finite(*r));
            }
            obj.insert("residuals".into(), Value::Object(res));
            obj.insert("max_residual".into(), finite(s.max_residual()));
            let mut c = Map::new();
            for (k, m) in s.c.iter().enumerate() {
                c.insert(k.to_string(), matrix_value(m));
            }
            obj.insert("C".into(), Value::Object(c));
            let mut w = Map::new();
            for (k, m) in s.omega.iter().enumerate() {
                w.insert((s.n + k as i32).to_string(), matrix_value(m));
            }
            obj.insert("Omega".into(), Value::Object(w));
            obj.insert(
                "leading_eigenvalues".into(),
                json!(s.eigenvalues.iter().map(|z| format_complex(*z)).collect::<Vec<_>>()),
            );
            obj.insert("eigenbasis".into(), matrix_value(&s.eigenbasis));
            obj.insert("solver".into(), serde_json::to_value(&s.report).expect("plain struct"));
        }
        Seed::Regular(s) => {
            obj.insert("order".into(), json!(s.order()));
            let mut res = Map::new();
            for (k, r) in s.residuals.iter().enumerate() {
                res.insert((k as i32 - 1).to_string(), finite(*r));
            }
            obj.insert("residuals".into(), Value::Object(res));
            obj.insert("stacked_residuals".into(), json!(s.stacked_residuals));
            obj.insert("max_residual".into(), finite(s.max_residual()));
            obj.insert("max_log_coeff".into(), finite(s.max_log_coeff()));
            let mut c = Map::new();
            for (i, row) in s.c.iter().enumerate() {
                for (j, m) in row.iter().enumerate() {
                    c.insert(format!("{i},{j}"), matrix_value(m));
                }
            }
            obj.insert("C".into(), Value::Object(c));
        }
    }
    obj.insert("tolerance".into(), json!(tol));
    obj.insert("pass".into(), json!(seed.max_residual() < tol));
    Value::Object(obj)
}

#[derive(Debug, Clone, Copy)]
pub struct RunConfig {
    pub kind: ExpansionKind,
    pub order: usize,
    pub x_end: f64,
    pub steps: usize,
    pub tolerances: Tolerances,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Checks {
    pub seed: bool,
    pub f_drift: bool,
    pub h: bool,
    pub compat: bool,
    pub j_drift: bool,
    pub j_eigen_drift: bool,
    pub gauge: bool,
    pub abel: bool,
}

impl Checks {
    pub fn all(&self) -> bool {
        self.seed
            && self.f_drift
            && self.h
            && self.compat
            && self.j_drift
            && self.j_eigen_drift
            && self.gauge
            && self.abel
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct Summary {
    pub model: Option<String>,
    /// SHA-256 of the canonical model document.
    pub model_hash: String,
    pub kind: ExpansionKind,
    pub dim: usize,
    pub m: i32,
    pub n: i32,
    pub order: usize,
    pub x0: f64,
    pub x_end: f64,
    pub steps: usize,
    pub tolerances: Tolerances,
    pub seed_max_residual: f64,
    pub max_f: f64,
    pub max_h: f64,
    pub max_compat: f64,
    pub max_j_drift: f64,
    pub max_j_eigen_drift: f64,
    pub max_c0_deviation: f64,
    pub max_abel_error: f64,
    /// Max entry of `C^(i,j)`, `j >= 1`, over the run (zero for `Omega` runs).
    pub max_log_coeff: f64,
    pub integration_error: f64,
    pub checks: Checks,
    pub pass: bool,
}

impl Summary {
    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("summary serializes");
        s.push('\n');
        s
    }
}

#[derive(Debug, Clone)]
pub struct Analysis {
    pub seed: Seed,
    pub trajectory: Trajectory,
    pub laws: ConservationLaws,
    pub summary: Summary,
}

pub fn model_hash(model: &PQPairModel) -> String {
    format!("{:x}", Sha256::digest(serialize_model(model).as_bytes()))
}

/// Seed at `x0`, propagation to `x_end`, monitors and pass flags.
pub fn analyze(model: &PQPairModel, config: &RunConfig) -> Result<Analysis> {
    let tol = &config.tolerances;
    let seed = compute_seed(model, config.kind, config.order, tol.seed)?;
    let trajectory = match &seed {
        Seed::Irregular(s) => evolve_expansion(s, model, config.x_end, config.steps)?,
        Seed::Regular(s) => evolve_expansion_regular(s, model, config.x_end, config.steps)?,
    };
    let laws = conservation_laws(&trajectory)?;
    let t = &trajectory;
    let below = |v: f64, limit: f64| v.is_finite() && v < limit;
    let checks = Checks {
        seed: below(seed.max_residual(), tol.seed),
        f_drift: below(t.max_f(), tol.f_drift),
        h: below(t.max_h(), tol.h),
        compat: below(t.max_compat(), tol.compat),
        j_drift: below(laws.max_drift(), tol.j_drift),
        j_eigen_drift: below(laws.max_eigen_drift(), tol.j_drift),
        gauge: below(t.max_c0_deviation(), tol.gauge),
        abel: below(t.max_abel_error(), tol.abel),
    };
    let summary = Summary {
        model: model.name().map(str::to_string),
        model_hash: model_hash(model),
        kind: config.kind,
        dim: model.dim(),
        m: model.m(),
        n: model.n(),
        order: config.order,
        x0: model.x0(),
        x_end: config.x_end,
        steps: config.steps,
        tolerances: *tol,
        seed_max_residual: seed.max_residual(),
        max_f: t.max_f(),
        max_h: t.max_h(),
        max_compat: t.max_compat(),
        max_j_drift: laws.max_drift(),
        max_j_eigen_drift: laws.max_eigen_drift(),
        max_c0_deviation: t.max_c0_deviation(),
        max_abel_error: t.max_abel_error(),
        max_log_coeff: t.max_log_coeff(),
        integration_error: t.integration_error,
        pass: checks.all(),
        checks,
    };
    Ok(Analysis { seed, trajectory, laws, summary })
}

fn num(v: f64) -> String {
    format!("{v:.16e}")
}

pub fn csv_header(traj: &Trajectory, laws: &ConservationLaws, state_names: &[String]) -> Vec<String> {
    let mut h = vec!["x".to_string()];
    for s in state_names {
        h.push(format!("{s}_re"));
        h.push(format!("{s}_im"));
    }
    h.extend(traj.f_orders.iter().map(|i| format!("F[{i}]")));
    h.extend(traj.h_orders.iter().map(|i| format!("H[{i}]")));
    h.push("compat".into());
    for i in &laws.orders {
        for r in 1..=traj.dim {
            for c in 1..=traj.dim {
                h.push(format!("J[{i}]_{r}{c}_re"));
                h.push(format!("J[{i}]_{r}{c}_im"));
            }
        }
    }
    h.extend(["det_psi0_re", "det_psi0_im", "c0_dev", "abel_err"].map(String::from));
    h
}

fn push_complex(row: &mut Vec<String>, z: Complex64) {
    row.push(num(z.re));
    row.push(num(z.im));
}

/// Writes the per-sample table.
pub fn write_csv<W: Write>(
    out: W,
    traj: &Trajectory,
    laws: &ConservationLaws,
    state_names: &[String],
) -> Result<()> {
    let mut w = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(out);
    let io = |e: csv::Error| Error::Io(e.to_string());
    w.write_record(csv_header(traj, laws, state_names)).map_err(io)?;
    for s in 0..traj.len() {
        let mut row = vec![num(traj.grid[s])];
        for z in &traj.u[s] {
            push_complex(&mut row, *z);
        }
        row.extend(traj.f_norms[s].iter().map(|v| num(*v)));
        row.extend(traj.h_norms[s].iter().map(|v| num(*v)));
        row.push(num(traj.compat_norms[s]));
        for j in &laws.j[s] {
            for r in 0..traj.dim {
                for c in 0..traj.dim {
                    push_complex(&mut row, j[(r, c)]);
                }
            }
        }
        push_complex(&mut row, traj.det_psi0[s]);
        row.push(num(traj.c0_deviation[s]));
        row.push(num(traj.abel_error[s]));
        w.write_record(&row).map_err(io)?;
    }
    w.flush()?;
    Ok(())
}

pub fn csv_string(traj: &Trajectory, laws: &ConservationLaws, state_names: &[String]) -> Result<String> {
    let mut buf = Vec::new();
    write_csv(&mut buf, traj, laws, state_names)?;
    String::from_utf8(buf).map_err(|e| Error::Io(e.to_string()))
}

/// Parses a table written by [`write_csv`] back into its header and values.
pub fn read_csv(text: &str) -> Result<(Vec<String>, Vec<Vec<f64>>)> {
    let mut r = csv::Reader::from_reader(text.as_bytes());
    let io = |e: csv::Error| Error::Io(e.to_string());
    let header = r.headers().map_err(io)?.iter().map(str::to_string).collect();
    let mut rows = Vec::new();
    for rec in r.records() {
        let rec = rec.map_err(io)?;
        let row = rec
            .iter()
            .map(|f| f.parse::<f64>().map_err(|e| Error::Io(format!("bad number `{f}`: {e}"))))
            .collect::<Result<Vec<_>>>()?;
        rows.push(row);
    }
    Ok((header, rows))
}

/// Writes `trajectory.csv` and `summary.json` into `dir`.
pub fn emit_report(analysis: &Analysis, model: &PQPairModel, dir: &std::path::Path) -> Result<()> {
    std::fs::create_dir_all(dir)?;
    let file = std::fs::File::create(dir.join("trajectory.csv"))?;
    write_csv(std::io::BufWriter::new(file), &analysis.trajectory, &analysis.laws, model.state_names())?;
    std::fs::write(dir.join("summary.json"), analysis.summary.to_json())?;
    Ok(())
}
