use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use num_complex::Complex64;
use serde_json::{json, Map, Value};

use pqpair::catalog::{catalog_get, catalog_names, CatalogEntry};
use pqpair::document::parse_model;
use pqpair::expr::{format_complex, parse_complex};
use pqpair::linalg::eigenvalues;
use pqpair::propagation::{evolve_state, recompose_sample, recompose_seed, ExpansionKind, Recomposition};
use pqpair::report::{analyze, choose_kind, compute_seed, emit_report, model_hash, seed_report, write_csv, RunConfig, Seed};
use pqpair::tolerances::{Tolerances, ABEL_TOL, COMPAT_TOL, F_DRIFT_TOL, GAUGE_TOL, H_TOL, J_DRIFT_TOL, SEED_TOL};
use pqpair::{Error, PQPairModel};

/// Local series expansions of P-Q pair solutions near lambda = 0.
///
/// Exit status: 0 when every check is under tolerance, 1 when a check fails
/// (or a numerical solve breaks down), 2 on usage or input errors.
#[derive(Parser)]
#[command(name = "pqpair", version)]
struct Cli {
    #[command(flatten)]
    tol: TolFlags,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct TolFlags {
    /// Max entry of every seed residual.
    #[arg(long, global = true, default_value_t = SEED_TOL)]
    seed_tol: f64,
    /// Max F norm along a trajectory.
    #[arg(long, global = true, default_value_t = F_DRIFT_TOL)]
    f_tol: f64,
    /// Max H norm along a trajectory.
    #[arg(long, global = true, default_value_t = H_TOL)]
    h_tol: f64,
    /// Relative drift of conservation laws and their eigenvalues.
    #[arg(long, global = true, default_value_t = J_DRIFT_TOL)]
    j_tol: f64,
    /// Compatibility residual.
    #[arg(long, global = true, default_value_t = COMPAT_TOL)]
    compat_tol: f64,
    /// Deviation of C^(0) from the identity.
    #[arg(long, global = true, default_value_t = GAUGE_TOL)]
    gauge_tol: f64,
    /// Relative error of det Psi0 against exp(int tr).
    #[arg(long, global = true, default_value_t = ABEL_TOL)]
    abel_tol: f64,
}

impl TolFlags {
    fn tolerances(&self) -> Tolerances {
        Tolerances {
            seed: self.seed_tol,
            f_drift: self.f_tol,
            h: self.h_tol,
            j_drift: self.j_tol,
            compat: self.compat_tol,
            gauge: self.gauge_tol,
            abel: self.abel_tol,
        }
    }
}

#[derive(Args)]
struct ModelArg {
    /// Model document path, or the name of a catalog entry.
    #[arg(long)]
    model: String,
}

#[derive(Args)]
struct RunArgs {
    /// Truncation order M (default: the entry's recommendation, else 8).
    #[arg(long)]
    order: Option<usize>,
    /// End of the x-interval (default: x0 + 1).
    #[arg(long)]
    x_end: Option<f64>,
    /// Number of integration steps (default 1000).
    #[arg(long)]
    steps: Option<usize>,
    /// Use the logarithmic expansion even where the Omega expansion applies.
    #[arg(long)]
    regular: bool,
}

#[derive(Subcommand)]
enum Command {
    /// Solve the frozen-x coefficient equations at x0 and print them as JSON.
    Seed {
        #[command(flatten)]
        model: ModelArg,
        /// Truncation order M (default: the entry's recommendation, else 8).
        #[arg(long)]
        order: Option<usize>,
        /// Solve the logarithmic expansion instead of the Omega expansion.
        #[arg(long)]
        regular: bool,
        /// Write the JSON here instead of standard output.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Propagate the seed in x and report residual monitors.
    Evolve {
        #[command(flatten)]
        model: ModelArg,
        #[command(flatten)]
        run: RunArgs,
        /// Directory receiving trajectory.csv and summary.json.
        #[arg(long)]
        out_dir: Option<PathBuf>,
    },
    /// Compatibility residual along the state trajectory.
    Verify {
        #[command(flatten)]
        model: ModelArg,
        /// End of the x-interval (default: x0 + 1).
        #[arg(long)]
        x_end: Option<f64>,
        /// Number of integration steps (default 1000).
        #[arg(long)]
        steps: Option<usize>,
        /// Number of intervals between reported points.
        #[arg(long, default_value_t = 20)]
        points: usize,
        /// Also write the table as CSV.
        #[arg(long)]
        csv: Option<PathBuf>,
    },
    /// Conservation laws and their drift.
    Conserve {
        #[command(flatten)]
        model: ModelArg,
        #[command(flatten)]
        run: RunArgs,
        /// Also write the per-sample table as CSV.
        #[arg(long)]
        csv: Option<PathBuf>,
    },
    /// Residuals of the recomposed solution at lambda and lambda/2 (regular points).
    Recompose {
        #[command(flatten)]
        model: ModelArg,
        /// Complex evaluation point, e.g. 0.1 or 0.05+0.05i.
        #[arg(long, allow_hyphen_values = true)]
        lambda: String,
        /// Truncation order M (default: the entry's recommendation, else 8).
        #[arg(long)]
        order: Option<usize>,
        /// Also evaluate at the end of a trajectory reaching this x.
        #[arg(long)]
        x_end: Option<f64>,
        /// Number of integration steps (default 1000).
        #[arg(long)]
        steps: Option<usize>,
    },
    /// List or export catalog entries.
    Catalog {
        /// Print the entry names, one per line.
        #[arg(long, conflicts_with = "export")]
        list: bool,
        /// Print the model document of an entry.
        #[arg(long)]
        export: Option<String>,
        /// Write the exported document here instead of standard output.
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

struct Loaded {
    model: PQPairModel,
    entry: Option<CatalogEntry>,
}

impl Loaded {
    fn order(&self, requested: Option<usize>) -> usize {
        requested.or(self.entry.as_ref().map(|e| e.recommended.order)).unwrap_or(8)
    }

    fn x_end(&self, requested: Option<f64>) -> f64 {
        requested.unwrap_or_else(|| {
            self.model.x0() + self.entry.as_ref().map(|e| e.recommended.x_end).unwrap_or(1.0)
        })
    }

    fn steps(&self, requested: Option<usize>) -> usize {
        requested.or(self.entry.as_ref().map(|e| e.recommended.steps)).unwrap_or(1000)
    }

    fn run_config(&self, run: &RunArgs, tolerances: Tolerances) -> RunConfig {
        RunConfig {
            kind: choose_kind(&self.model, run.regular),
            order: self.order(run.order),
            x_end: self.x_end(run.x_end),
            steps: self.steps(run.steps),
            tolerances,
        }
    }
}

fn load(arg: &ModelArg) -> Result<Loaded, Error> {
    let path = Path::new(&arg.model);
    if path.is_file() {
        let text = std::fs::read_to_string(path)?;
        return Ok(Loaded { model: parse_model(&text)?, entry: None });
    }
    if catalog_names().contains(&arg.model.as_str()) {
        let entry = catalog_get(&arg.model)?;
        return Ok(Loaded { model: entry.model.clone(), entry: Some(entry) });
    }
    Err(Error::Io(format!("`{}` is neither a readable file nor a catalog entry", arg.model)))
}

fn emit(text: &str, out: Option<&Path>) -> Result<(), Error> {
    match out {
        Some(p) => std::fs::write(p, text)?,
        None => print!("{text}"),
    }
    Ok(())
}

fn pretty(v: &Value) -> String {
    let mut s = serde_json::to_string_pretty(v).expect("JSON values serialize");
    s.push('\n');
    s
}

fn status(pass: bool, what: &str) -> ExitCode {
    if pass {
        eprintln!("PASS {what}");
        ExitCode::SUCCESS
    } else {
        eprintln!("FAIL {what}");
        ExitCode::from(1)
    }
}

fn recomposition_value(r: &Recomposition, half: &Recomposition, order: usize) -> (Value, bool) {
    let slope = (r.lambda_residual / half.lambda_residual).log2();
    let pass = r.lambda_residual == 0.0 || slope >= order as f64 - 0.5;
    let v = json!({
        "lambda": format_complex(r.lambda),
        "lambda_residual": r.lambda_residual,
        "x_residual": r.x_residual,
        "half_lambda_residual": half.lambda_residual,
        "half_x_residual": half.x_residual,
        "decay_slope": if slope.is_finite() { json!(slope) } else { Value::Null },
        "required_slope": order as f64 - 0.5,
        "pass": pass,
    });
    (v, pass)
}

fn run(cli: Cli) -> Result<ExitCode, Error> {
    let tolerances = cli.tol.tolerances();
    match cli.command {
        Command::Seed { model, order, regular, out } => {
            let loaded = load(&model)?;
            let kind = choose_kind(&loaded.model, regular);
            let seed = compute_seed(&loaded.model, kind, loaded.order(order), tolerances.seed)?;
            let report = seed_report(&loaded.model, &seed, tolerances.seed);
            emit(&pretty(&report), out.as_deref())?;
            Ok(status(seed.max_residual() < tolerances.seed, &format!("seed residual {:e}", seed.max_residual())))
        }
        Command::Evolve { model, run, out_dir } => {
            let loaded = load(&model)?;
            let analysis = analyze(&loaded.model, &loaded.run_config(&run, tolerances))?;
            if let Some(dir) = out_dir {
                emit_report(&analysis, &loaded.model, &dir)?;
            }
            print!("{}", analysis.summary.to_json());
            let s = &analysis.summary;
            Ok(status(s.pass, &format!("max F {:e}, max H {:e}, J drift {:e}", s.max_f, s.max_h, s.max_j_drift)))
        }
        Command::Verify { model, x_end, steps, points, csv } => {
            let loaded = load(&model)?;
            let x_end = loaded.x_end(x_end);
            let steps = loaded.steps(steps);
            let states = evolve_state(&loaded.model, x_end, steps)?;
            let stride = (steps / points.max(1)).max(1);
            let mut rows = Vec::new();
            let mut table = String::new();
            let mut worst = 0.0f64;
            for s in (0..states.grid.len()).step_by(stride) {
                let x = states.grid[s];
                let res = loaded.model.compatibility_residual(&states.u[s], x)?;
                if table.is_empty() {
                    let cols: Vec<String> = res.orders.iter().map(|i| format!("compat[{i}]")).collect();
                    table = format!("x,max,{}\n", cols.join(","));
                }
                let vals: Vec<String> = res.norms.iter().map(|v| format!("{v:.16e}")).collect();
                table.push_str(&format!("{x:.16e},{:.16e},{}\n", res.max(), vals.join(",")));
                let mut by_order = Map::new();
                for (i, v) in res.orders.iter().zip(&res.norms) {
                    by_order.insert(i.to_string(), json!(v));
                }
                worst = worst.max(res.max());
                rows.push(json!({"x": x, "max": res.max(), "orders": by_order}));
            }
            if let Some(p) = csv {
                std::fs::write(p, &table)?;
            }
            let pass = worst < tolerances.compat;
            let v = json!({
                "model": loaded.model.name(),
                "model_hash": model_hash(&loaded.model),
                "x0": loaded.model.x0(),
                "x_end": x_end,
                "steps": steps,
                "points": rows,
                "max_residual": worst,
                "tolerance": tolerances.compat,
                "pass": pass,
            });
            print!("{}", pretty(&v));
            Ok(status(pass, &format!("max compatibility residual {worst:e}")))
        }
        Command::Conserve { model, run, csv } => {
            let loaded = load(&model)?;
            let analysis = analyze(&loaded.model, &loaded.run_config(&run, tolerances))?;
            if let Some(p) = csv {
                let file = std::fs::File::create(p)?;
                write_csv(file, &analysis.trajectory, &analysis.laws, loaded.model.state_names())?;
            }
            let laws = &analysis.laws;
            let mut items = Vec::new();
            for (l, order) in laws.orders.iter().enumerate() {
                let j0 = &laws.j[0][l];
                let ev: Vec<String> = eigenvalues(j0)?.into_iter().map(format_complex).collect();
                let j0v: Vec<Vec<String>> =
                    (0..j0.nrows()).map(|r| (0..j0.ncols()).map(|c| format_complex(j0[(r, c)])).collect()).collect();
                items.push(json!({
                    "order": order,
                    "drift": laws.drift[l],
                    "eigen_drift": laws.eigen_drift[l],
                    "J_x0": j0v,
                    "eigenvalues_x0": ev,
                }));
            }
            let s = &analysis.summary;
            let pass = s.checks.j_drift && s.checks.j_eigen_drift && s.checks.abel;
            let v = json!({
                "model": loaded.model.name(),
                "kind": s.kind,
                "x0": s.x0,
                "x_end": s.x_end,
                "steps": s.steps,
                "laws": items,
                "max_drift": s.max_j_drift,
                "max_eigen_drift": s.max_j_eigen_drift,
                "max_abel_error": s.max_abel_error,
                "tolerance": tolerances.j_drift,
                "pass": pass,
            });
            print!("{}", pretty(&v));
            Ok(status(pass, &format!("J drift {:e}", s.max_j_drift)))
        }
        Command::Recompose { model, lambda, order, x_end, steps } => {
            let loaded = load(&model)?;
            let lambda: Complex64 =
                parse_complex(&lambda).map_err(|e| Error::Schema { path: "--lambda".into(), msg: e.to_string() })?;
            if choose_kind(&loaded.model, false) != ExpansionKind::Regular {
                return Err(Error::UnsupportedLambdaEvaluation);
            }
            let order = loaded.order(order);
            let Seed::Regular(seed) = compute_seed(&loaded.model, ExpansionKind::Regular, order, tolerances.seed)? else {
                unreachable!("regular kind yields a regular seed")
            };
            let at_seed = recompose_seed(&seed, &loaded.model, lambda)?;
            let half = recompose_seed(&seed, &loaded.model, lambda / 2.0)?;
            let (seed_v, mut pass) = recomposition_value(&at_seed, &half, order);
            let mut v = json!({"model": loaded.model.name(), "order": order, "x0": loaded.model.x0(), "at_x0": seed_v});
            if let Some(x_end) = x_end {
                let config = RunConfig {
                    kind: ExpansionKind::Regular,
                    order,
                    x_end,
                    steps: loaded.steps(steps),
                    tolerances,
                };
                let analysis = analyze(&loaded.model, &config)?;
                let last = analysis.trajectory.len() - 1;
                let r = recompose_sample(&analysis.trajectory, &loaded.model, last, lambda)?;
                let h = recompose_sample(&analysis.trajectory, &loaded.model, last, lambda / 2.0)?;
                let (end_v, end_pass) = recomposition_value(&r, &h, order);
                pass &= end_pass;
                v["x_end"] = json!(x_end);
                v["at_x_end"] = end_v;
            }
            v["pass"] = json!(pass);
            print!("{}", pretty(&v));
            Ok(status(pass, &format!("lambda residual {:e}", at_seed.lambda_residual)))
        }
        Command::Catalog { list, export, out } => {
            if let Some(name) = export {
                let entry = catalog_get(&name)?;
                emit(entry.document, out.as_deref())?;
            } else if list {
                for name in catalog_names() {
                    println!("{name}");
                }
            } else {
                return Err(Error::Schema { path: "catalog".into(), msg: "pass --list or --export NAME".into() });
            }
            Ok(ExitCode::SUCCESS)
        }
    }
}

/// Input and usage problems exit with 2, numerical breakdowns with 1.
fn exit_code(e: &Error) -> u8 {
    match e {
        Error::Syntax { .. }
        | Error::UnknownSymbol(_)
        | Error::InvalidModel(_)
        | Error::Schema { .. }
        | Error::UnknownEntry(_)
        | Error::UnsupportedLambdaEvaluation
        | Error::ModelNotTheorem2(_)
        | Error::InsufficientTruncation(_)
        | Error::DimensionMismatch(..)
        | Error::Io(_) => 2,
        _ => 1,
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}
