//! `neflab`: command-line front end.
//!
//! Every command prints one JSON document `{command, seed, result}` on
//! stdout (or a CSV projection with `--format csv`). Exit codes: 0 success,
//! 1 invalid input, 2 numerical failure, 3 disagreement in `battery`.

use std::path::Path;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use rayon::prelude::*;
use serde::Serialize;
use serde_json::{json, Value};

use neflab::battery::{default_battery, run_entry, summarize};
use neflab::catalog::{self, Params};
use neflab::cubic::{cubic_family, inverse_family, CubicConstructionParams};
use neflab::descriptor::{parse_descriptor, to_json};
use neflab::legendre::{invert_mean_map, NewtonConfig};
use neflab::ode::{integrate_numeric, match_cubic_to_ode, ode_residual, rebase, solve_closed_form, OdeParams, RK4_STEPS};
use neflab::priors::{
    log_density, normalizer, omega_contains, param_map, pushforward_mass, MapDirection, OmegaParams, PriorFamily,
    PriorSpec, QuadratureConfig,
};
use neflab::verifier::{classify, BetaChoice, PropertyOutcome, PropertySet, Tolerances, VerifyConfig};
use neflab::{Covector, FamilyDescriptor, NefError, Poly64, Vector};

const SCHEMA: &str = include_str!("schema.json");

#[derive(Parser)]
#[command(name = "neflab", version, about = "Natural exponential families with cubic variance functions")]
struct Cli {
    /// Print the JSON schema of every output and exit.
    #[arg(long)]
    schema: bool,

    /// Seed for randomized sampling; echoed in every report.
    #[arg(long, global = true, default_value_t = 0)]
    seed: u64,

    #[arg(long, global = true, value_enum, default_value_t = Format::Json)]
    format: Format,

    #[command(subcommand)]
    command: Option<Command>,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Format {
    Json,
    Csv,
}

#[derive(Subcommand)]
enum Command {
    /// List or describe the catalog families.
    #[command(subcommand)]
    Catalog(CatalogCmd),
    /// Evaluate k, k' and k'' at canonical parameters, or ψ and V at means.
    Eval(EvalArgs),
    /// Apply the cubic construction (or its inverse) and print the descriptor.
    Transform(TransformArgs),
    /// Check the three characterizations and report a verdict.
    Verify(VerifyArgs),
    /// Prior log-densities on a grid with normalizing constants.
    Priors(PriorsArgs),
    /// The one-dimensional cubic variance equation.
    #[command(subcommand)]
    Ode(OdeCmd),
    /// Classify the twelve-family battery and print the agreement matrix.
    Battery(BatteryArgs),
}

#[derive(Subcommand)]
enum CatalogCmd {
    List,
    Show {
        id: String,
        /// Parameter override as key=value.
        #[arg(long = "param", value_parser = parse_kv)]
        params: Vec<(String, f64)>,
    },
}

#[derive(Args)]
struct FamilyArgs {
    /// Catalog id, battery id, or path to a descriptor JSON file.
    #[arg(long)]
    family: String,
    /// Catalog parameter as key=value (repeatable).
    #[arg(long = "param", value_parser = parse_kv)]
    params: Vec<(String, f64)>,
}

#[derive(Args)]
#[command(allow_negative_numbers = true)]
struct EvalArgs {
    #[command(flatten)]
    family: FamilyArgs,
    /// Canonical parameter, comma separated (repeatable).
    #[arg(long, allow_hyphen_values = true)]
    theta: Vec<String>,
    /// Mean, comma separated (repeatable).
    #[arg(long, allow_hyphen_values = true)]
    mean: Vec<String>,
}

#[derive(Args)]
#[command(allow_negative_numbers = true)]
struct TransformArgs {
    #[command(flatten)]
    family: FamilyArgs,
    /// Covector β, comma separated.
    #[arg(long, allow_hyphen_values = true)]
    beta: String,
    /// Apply the inverse construction.
    #[arg(long)]
    inverse: bool,
    #[arg(long, default_value_t = 0.0)]
    k0: f64,
    /// Shift λ0, comma separated; zero by default.
    #[arg(long, allow_hyphen_values = true)]
    lambda0: Option<String>,
}

#[derive(Args)]
#[command(allow_negative_numbers = true)]
struct VerifyArgs {
    #[command(flatten)]
    family: FamilyArgs,
    /// `auto`, or covectors separated by `;` with comma-separated entries.
    #[arg(long, default_value = "auto", allow_hyphen_values = true)]
    beta: String,
    /// Subset of 1,2,3.
    #[arg(long, default_value = "1,2,3")]
    properties: String,
    #[arg(long, default_value_t = 1e-6)]
    tol_p1: f64,
    #[arg(long, default_value_t = 1e-6)]
    tol_p2: f64,
    #[arg(long, default_value_t = 1e-4)]
    tol_p3: f64,
    /// Grid points per axis.
    #[arg(long, default_value_t = 25)]
    grid: usize,
    /// Hyperparameter samples for P3.
    #[arg(long, default_value_t = 5)]
    samples: usize,
}

#[derive(Clone, Copy, ValueEnum)]
enum Tag {
    Pi,
    PiStar,
    PiTilde,
}

#[derive(Args)]
#[command(allow_negative_numbers = true)]
struct PriorsArgs {
    #[command(flatten)]
    family: FamilyArgs,
    #[arg(long, value_enum)]
    family_tag: Tag,
    #[arg(long)]
    t: f64,
    /// Prior location m0, comma separated.
    #[arg(long, allow_hyphen_values = true)]
    m0: String,
    /// β for Π̃, comma separated.
    #[arg(long, allow_hyphen_values = true)]
    beta: Option<String>,
    /// Constant a of (a, b, c), comma separated; enables the Ω report.
    #[arg(long, allow_hyphen_values = true)]
    a: Option<String>,
    #[arg(long)]
    b: Option<f64>,
    /// Grid points per axis for the density table.
    #[arg(long, default_value_t = 25)]
    grid: usize,
    #[arg(long, default_value_t = 1e-9)]
    rel_tol: f64,
    /// Gauss-Legendre nodes per panel (n >= 2).
    #[arg(long, default_value_t = 8)]
    points: usize,
}

#[derive(Subcommand)]
enum OdeCmd {
    /// Closed-form solution for (β, a, b, λ).
    #[command(allow_negative_numbers = true)]
    Solve {
        #[arg(long)]
        beta: f64,
        #[arg(long)]
        a: f64,
        #[arg(long)]
        b: f64,
        #[arg(long)]
        lambda: f64,
    },
    /// Whether a cubic solves the equation for β.
    #[command(allow_negative_numbers = true)]
    Match {
        /// Coefficients c0,c1,c2,c3 in increasing degree.
        #[arg(long, allow_hyphen_values = true)]
        poly: String,
        #[arg(long)]
        beta: f64,
    },
    /// RK4 from (m0, v0) over [m0, m0 + span].
    #[command(allow_negative_numbers = true)]
    Integrate {
        #[arg(long)]
        beta: f64,
        #[arg(long)]
        a: f64,
        #[arg(long)]
        b: f64,
        #[arg(long)]
        v0: f64,
        #[arg(long)]
        m0: f64,
        #[arg(long)]
        span: f64,
    },
}

#[derive(Args)]
#[command(allow_negative_numbers = true)]
struct BatteryArgs {
    #[arg(long, default_value_t = 25)]
    grid: usize,
    #[arg(long, default_value_t = 1e-6)]
    tol_p1: f64,
    #[arg(long, default_value_t = 1e-6)]
    tol_p2: f64,
    #[arg(long, default_value_t = 1e-4)]
    tol_p3: f64,
}

/// A command's result: the JSON payload, its CSV projection, and the exit
/// code to use on success.
struct Outcome {
    command: &'static str,
    result: Value,
    csv: Table,
    code: u8,
}

struct Table {
    header: Vec<String>,
    rows: Vec<Vec<String>>,
}

impl Table {
    fn new(header: &[&str]) -> Self {
        Table {
            header: header.iter().map(|s| s.to_string()).collect(),
            rows: Vec::new(),
        }
    }
}

fn parse_kv(s: &str) -> Result<(String, f64), String> {
    let (k, v) = s.split_once('=').ok_or_else(|| format!("expected key=value, got `{s}`"))?;
    let v: f64 = v.trim().parse().map_err(|_| format!("`{v}` is not a number"))?;
    Ok((k.trim().to_string(), v))
}

fn parse_list(s: &str, what: &str) -> Result<Vec<f64>, NefError> {
    s.split(',')
        .map(|x| {
            x.trim()
                .parse::<f64>()
                .ok()
                .filter(|v| v.is_finite())
                .ok_or_else(|| NefError::InvalidArgument(format!("{what}: `{x}` is not a finite number")))
        })
        .collect()
}

fn to_value<T: Serialize>(v: &T) -> Result<Value, NefError> {
    serde_json::to_value(v).map_err(|e| NefError::Internal(e.to_string()))
}

fn num(x: f64) -> String {
    // folds -0 into 0
    format!("{}", x + 0.0)
}

fn resolve_family(args: &FamilyArgs) -> Result<FamilyDescriptor, NefError> {
    let params: Params = args.params.iter().cloned().collect();
    if catalog::entry(&args.family).is_ok() {
        return catalog::build(&args.family, &params);
    }
    let path = Path::new(&args.family);
    if path.is_file() {
        if !params.is_empty() {
            return Err(NefError::InvalidArgument("--param applies to catalog families only".into()));
        }
        let text = std::fs::read_to_string(path)
            .map_err(|e| NefError::InvalidArgument(format!("cannot read {}: {e}", path.display())))?;
        // a saved `transform` envelope is accepted as well as a bare descriptor
        if let Ok(doc) = serde_json::from_str::<Value>(&text) {
            if doc["command"] == "transform" {
                return parse_descriptor(&doc["result"]["descriptor"].to_string());
            }
        }
        return parse_descriptor(&text);
    }
    if params.is_empty() {
        if let Some(e) = default_battery()?.into_iter().find(|e| e.id == args.family) {
            return Ok(e.family);
        }
    }
    Err(NefError::NotFound(format!(
        "`{}` is neither a catalog id ({}), a battery id, nor a descriptor file",
        args.family,
        catalog::ids().join(", ")
    )))
}

fn catalog_cmd(cmd: &CatalogCmd) -> Result<Outcome, NefError> {
    match cmd {
        CatalogCmd::List => {
            let mut csv = Table::new(&["id", "parameter", "default", "summary"]);
            let families: Vec<Value> = catalog::ENTRIES
                .iter()
                .map(|e| {
                    csv.rows.push(vec![
                        e.id.to_string(),
                        e.param.unwrap_or("").to_string(),
                        num(e.default),
                        e.summary.to_string(),
                    ]);
                    json!({"id": e.id, "parameter": e.param, "default": e.default, "summary": e.summary})
                })
                .collect();
            Ok(Outcome {
                command: "catalog-list",
                result: json!({ "families": families }),
                csv,
                code: 0,
            })
        }
        CatalogCmd::Show { id, params } => {
            let e = catalog::entry(id)?;
            let fam = catalog::build(id, &params.iter().cloned().collect())?;
            let desc = to_json(&fam)?;
            let mut csv = Table::new(&["degree", "coefficient"]);
            if let Some(p) = fam.variance().and_then(|v| v.polynomial_matrix()) {
                for (d, c) in p.get(0, 0).univariate_coeffs().iter().enumerate() {
                    csv.rows.push(vec![d.to_string(), num(*c)]);
                }
            }
            Ok(Outcome {
                command: "catalog-show",
                result: json!({
                    "id": e.id,
                    "parameter": e.param,
                    "default": e.default,
                    "summary": e.summary,
                    "descriptor": to_value(&desc)?,
                }),
                csv,
                code: 0,
            })
        }
    }
}

fn matrix_rows(m: &neflab::nalgebra::DMatrix<f64>) -> Vec<Vec<f64>> {
    (0..m.nrows()).map(|i| m.row(i).iter().copied().collect()).collect()
}

fn eval_cmd(args: &EvalArgs) -> Result<Outcome, NefError> {
    let fam = resolve_family(&args.family)?;
    let n = fam.dim();
    if args.theta.is_empty() && args.mean.is_empty() {
        return Err(NefError::InvalidArgument("give at least one --theta or --mean".into()));
    }
    let mut csv = Table::new(&["kind", "point", "k", "gradient_or_theta", "hessian_or_variance"]);
    let join = |v: &[f64]| v.iter().map(|x| num(*x)).collect::<Vec<_>>().join(" ");
    let mut points = Vec::new();
    for t in &args.theta {
        let theta = parse_list(t, "--theta")?;
        if theta.len() != n {
            return Err(NefError::InvalidArgument(format!("--theta needs {n} entries")));
        }
        let ev = fam.require_cumulant()?.eval(&theta)?;
        let hess = matrix_rows(&ev.hessian);
        csv.rows.push(vec![
            "theta".into(),
            join(&theta),
            num(ev.value),
            join(ev.gradient.as_slice()),
            join(&hess.concat()),
        ]);
        points.push(json!({
            "kind": "theta",
            "theta": theta,
            "k": ev.value,
            "gradient": ev.gradient.as_slice(),
            "hessian": hess,
        }));
    }
    for m in &args.mean {
        let mean = Vector::new(parse_list(m, "--mean")?)?;
        if mean.dim() != n {
            return Err(NefError::InvalidArgument(format!("--mean needs {n} entries")));
        }
        let (theta, k, variance) = match fam.cumulant() {
            Some(k) => {
                let th = invert_mean_map(&fam, &mean, &NewtonConfig::default())?;
                let ev = k.eval(&th)?;
                (Some(th.to_vec()), Some(ev.value), ev.hessian)
            }
            None => {
                if !fam.mean_domain().contains(&mean) {
                    return Err(NefError::InvalidArgument("mean is outside the mean domain".into()));
                }
                (None, None, fam.require_variance()?.eval(&mean)?)
            }
        };
        let var = matrix_rows(&variance);
        csv.rows.push(vec![
            "mean".into(),
            join(&mean),
            k.map(num).unwrap_or_default(),
            theta.as_deref().map(join).unwrap_or_default(),
            join(&var.concat()),
        ]);
        points.push(json!({
            "kind": "mean",
            "mean": mean.as_slice(),
            "theta": theta,
            "k": k,
            "variance": var,
        }));
    }
    Ok(Outcome {
        command: "eval",
        result: json!({"family": fam.name, "dimension": n, "points": points}),
        csv,
        code: 0,
    })
}

fn transform_cmd(args: &TransformArgs) -> Result<Outcome, NefError> {
    let fam = resolve_family(&args.family)?;
    let beta = Covector::new(parse_list(&args.beta, "--beta")?)?;
    let lambda0 = match &args.lambda0 {
        Some(s) => Vector::new(parse_list(s, "--lambda0")?)?,
        None => Vector::zeros(beta.dim()),
    };
    let params = CubicConstructionParams::new(beta, args.k0, lambda0)?;
    let out = if args.inverse {
        inverse_family(&fam, &params)?
    } else {
        cubic_family(&fam, &params)?
    };
    let desc = to_json(&out)?;
    let mut csv = Table::new(&["row", "col", "exponents", "coefficient"]);
    if let Some(v) = &desc.variance {
        for e in &v.entries {
            for t in &e.terms {
                let ex = t.exponents.iter().map(|x| x.to_string()).collect::<Vec<_>>().join(" ");
                csv.rows.push(vec![e.row.to_string(), e.col.to_string(), ex, num(t.coeff)]);
            }
        }
    }
    Ok(Outcome {
        command: "transform",
        result: json!({
            "inverse": args.inverse,
            "descriptor": to_value(&desc)?,
        }),
        csv,
        code: 0,
    })
}

fn parse_betas(s: &str) -> Result<BetaChoice, NefError> {
    if s.trim() == "auto" {
        return Ok(BetaChoice::Auto);
    }
    let list = s
        .split(';')
        .map(|b| Covector::new(parse_list(b, "--beta")?))
        .collect::<Result<Vec<_>, _>>()?;
    Ok(BetaChoice::Given(list))
}

fn parse_properties(s: &str) -> Result<PropertySet, NefError> {
    let mut set = PropertySet {
        p1: false,
        p2: false,
        p3: false,
    };
    for p in s.split(',') {
        match p.trim() {
            "1" => set.p1 = true,
            "2" => set.p2 = true,
            "3" => set.p3 = true,
            other => return Err(NefError::InvalidArgument(format!("unknown property `{other}`"))),
        }
    }
    Ok(set)
}

fn verify_cmd(args: &VerifyArgs, seed: u64) -> Result<Outcome, NefError> {
    let cfg = VerifyConfig {
        tolerances: Tolerances {
            p1: args.tol_p1,
            p2: args.tol_p2,
            p3: args.tol_p3,
        },
        grid_points: args.grid,
        betas: parse_betas(&args.beta)?,
        properties: parse_properties(&args.properties)?,
        samples: args.samples,
        seed,
        ..VerifyConfig::default()
    };
    cfg.validate()?;
    let fam = resolve_family(&args.family)?;
    let report = classify(&fam, &cfg)?;
    let mut csv = Table::new(&["attempt", "beta", "property", "point", "residual"]);
    for (i, a) in report.attempts.iter().enumerate() {
        let beta = match &a.beta {
            neflab::verifier::BetaUsed::Mode(m) => m.clone(),
            neflab::verifier::BetaUsed::Beta(b) => b.iter().map(|x| num(*x)).collect::<Vec<_>>().join(" "),
        };
        for (name, p) in [("P1", &a.p1), ("P2", &a.p2), ("P3", &a.p3)] {
            if let PropertyOutcome::Evaluated(fit) = p {
                for (pt, r) in &fit.point_residuals {
                    let pt = pt.iter().map(|x| num(*x)).collect::<Vec<_>>().join(" ");
                    csv.rows.push(vec![i.to_string(), beta.clone(), name.into(), pt, num(*r)]);
                }
            }
        }
    }
    Ok(Outcome {
        command: "verify",
        result: to_value(&report)?,
        csv,
        code: 0,
    })
}

fn priors_cmd(args: &PriorsArgs, _seed: u64) -> Result<Outcome, NefError> {
    let fam = resolve_family(&args.family)?;
    let n = fam.dim();
    let quad = QuadratureConfig {
        points_per_axis: args.points,
        rel_tol: args.rel_tol,
        ..QuadratureConfig::default()
    };
    quad.validate()?;
    if args.grid < 2 {
        return Err(NefError::InvalidArgument("--grid must be at least 2".into()));
    }
    let family = match args.family_tag {
        Tag::Pi => PriorFamily::Pi,
        Tag::PiStar => PriorFamily::PiStar,
        Tag::PiTilde => {
            let b = args
                .beta
                .as_deref()
                .ok_or_else(|| NefError::InvalidArgument("pi-tilde needs --beta".into()))?;
            PriorFamily::PiTilde {
                beta: Covector::new(parse_list(b, "--beta")?)?,
            }
        }
    };
    let m0 = Vector::new(parse_list(&args.m0, "--m0")?)?;
    let spec = PriorSpec::new(family, args.t, m0.clone(), &fam)?;
    let domain = match spec.family {
        PriorFamily::Pi => fam.require_cumulant()?.theta_domain().clone(),
        _ => fam.mean_domain().clone(),
    };
    let mut header: Vec<String> = (0..n).map(|i| format!("x{i}")).collect();
    header.push("log_density".into());
    let mut csv = Table { header, rows: Vec::new() };
    for x in domain.grid(args.grid, 0.05) {
        let ld = log_density(&spec, &fam, &x)?;
        let mut row: Vec<String> = x.iter().map(|v| num(*v)).collect();
        row.push(num(ld));
        csv.rows.push(row);
    }
    let status = |r: Result<neflab::priors::NormalizerReport, NefError>| -> Result<Value, NefError> {
        match r {
            Ok(rep) => {
                let mut v = to_value(&rep)?;
                v["status"] = json!("ok");
                Ok(v)
            }
            Err(e @ (NefError::NonNormalizable(_) | NefError::Convergence { .. })) => {
                Ok(json!({"status": "non-normalizable", "message": e.to_string()}))
            }
            Err(e) => Err(e),
        }
    };
    let norm = status(normalizer(&spec, &fam, &quad))?;
    let mass_check = if fam.cumulant().is_some() {
        let pi = PriorSpec::new(PriorFamily::Pi, args.t, m0.clone(), &fam)?;
        let a = normalizer(&pi, &fam, &quad);
        let b = pushforward_mass(&fam, args.t, &m0, &quad);
        match (a, b) {
            (Ok(a), Ok(b)) => {
                let rel = ((a.log_mass - b.log_mass).exp() - 1.0).abs();
                json!({
                    "status": "ok",
                    "pi_log_mass": a.log_mass,
                    "pushforward_log_mass": b.log_mass,
                    "relative_difference": rel,
                    "within_tolerance": rel <= 2.0 * quad.rel_tol,
                })
            }
            (a, b) => {
                let msg = a.err().or(b.err()).map(|e| e.to_string()).unwrap_or_default();
                json!({"status": "non-normalizable", "message": msg})
            }
        }
    } else {
        Value::Null
    };
    let omega = match (&args.a, args.b) {
        (Some(a), Some(b)) => {
            let p = OmegaParams::new(Vector::new(parse_list(a, "--a")?)?, b, 0.0)?;
            let mapped = match param_map(MapDirection::KprimeSide, args.t, &m0, &p) {
                Ok((t1, m1)) => json!({"t1": t1, "m1": m1}),
                Err(e) => json!({"error": e.to_string()}),
            };
            json!({
                "a": p.a,
                "b": p.b,
                "contains": omega_contains(&p, args.t, &m0, fam.mean_domain()),
                "kprime_side": mapped,
            })
        }
        (None, None) => Value::Null,
        _ => return Err(NefError::InvalidArgument("--a and --b go together".into())),
    };
    Ok(Outcome {
        command: "priors",
        result: json!({
            "family": fam.name,
            "spec": to_value(&spec)?,
            "quadrature": {"scheme": quad.scheme(n), "points_per_axis": quad.points_per_axis, "rel_tol": quad.rel_tol},
            "grid_size": csv.rows.len(),
            "normalizer": norm,
            "mass_check": mass_check,
            "omega": omega,
        }),
        csv,
        code: 0,
    })
}

fn coeff_table(c: &[f64]) -> Table {
    let mut t = Table::new(&["degree", "coefficient"]);
    for (d, x) in c.iter().enumerate() {
        t.rows.push(vec![d.to_string(), num(*x)]);
    }
    t
}

fn ode_cmd(cmd: &OdeCmd) -> Result<Outcome, NefError> {
    match *cmd {
        OdeCmd::Solve { beta, a, b, lambda } => {
            let p = OdeParams::new(beta, a, b, lambda)?;
            let sol = solve_closed_form(&p)?;
            let coeffs = sol.poly.univariate_coeffs();
            let residual = ode_residual(&sol.poly, &beta, &a, &b).max_abs_coeff();
            Ok(Outcome {
                command: "ode-solve",
                result: json!({
                    "params": p,
                    "coefficients": coeffs,
                    "nonvariance": sol.nonvariance,
                    "residual": residual,
                }),
                csv: coeff_table(&coeffs),
                code: 0,
            })
        }
        OdeCmd::Match { ref poly, beta } => {
            let c = parse_list(poly, "--poly")?;
            let v = Poly64::univariate(&c);
            let params = match_cubic_to_ode(&v, &beta)?;
            let rebased = rebase(&v, &beta)?;
            let mut csv = Table::new(&["beta", "a", "b", "lambda", "matches"]);
            match &params {
                Some(p) => csv.rows.push(vec![num(p.beta), num(p.a), num(p.b), num(p.lam), "true".into()]),
                None => csv.rows.push(vec![num(beta), String::new(), String::new(), String::new(), "false".into()]),
            }
            Ok(Outcome {
                command: "ode-match",
                result: json!({
                    "beta": beta,
                    "polynomial": c,
                    "rebased": rebased,
                    "params": params,
                }),
                csv,
                code: 0,
            })
        }
        OdeCmd::Integrate { beta, a, b, v0, m0, span } => {
            let traj = integrate_numeric(beta, a, b, m0, v0, m0 + span)?;
            let mut csv = Table::new(&["m", "v"]);
            for (m, v) in &traj.points {
                csv.rows.push(vec![num(*m), num(*v)]);
            }
            Ok(Outcome {
                command: "ode-integrate",
                result: json!({
                    "beta": beta,
                    "a": a,
                    "b": b,
                    "m0": m0,
                    "v0": v0,
                    "m_end": m0 + span,
                    "steps": RK4_STEPS,
                    "lambda": traj.lam,
                    "max_error": traj.max_error,
                    "points": traj.points,
                }),
                csv,
                code: 0,
            })
        }
    }
}

fn battery_cmd(args: &BatteryArgs, seed: u64) -> Result<Outcome, NefError> {
    let cfg = VerifyConfig {
        tolerances: Tolerances {
            p1: args.tol_p1,
            p2: args.tol_p2,
            p3: args.tol_p3,
        },
        grid_points: args.grid,
        seed,
        ..VerifyConfig::default()
    };
    cfg.validate()?;
    let entries = default_battery()?;
    let rows: Vec<_> = entries.par_iter().map(|e| run_entry(e, &cfg).0).collect();
    let report = summarize(seed, rows);
    let mut csv = Table::new(&["id", "kind", "dimension", "pass", "expected_pass", "agreement", "beta_used"]);
    for r in &report.rows {
        let beta = match &r.beta_used {
            None => String::new(),
            Some(neflab::verifier::BetaUsed::Mode(m)) => m.clone(),
            Some(neflab::verifier::BetaUsed::Beta(b)) => b.iter().map(|x| num(*x)).collect::<Vec<_>>().join(" "),
        };
        let kind = to_value(&r.kind)?.as_str().unwrap_or_default().to_string();
        csv.rows.push(vec![
            r.id.clone(),
            kind,
            r.dimension.to_string(),
            r.pass.to_string(),
            r.expected_pass.to_string(),
            r.agreement.to_string(),
            beta,
        ]);
    }
    let code = if report.all_agree { 0 } else { 3 };
    Ok(Outcome {
        command: "battery",
        result: to_value(&report)?,
        csv,
        code,
    })
}

fn exit_code(e: &NefError) -> u8 {
    match e {
        NefError::Convergence { .. }
        | NefError::DomainEscape { .. }
        | NefError::Singularity { .. }
        | NefError::NonNormalizable(_)
        | NefError::Internal(_) => 2,
        _ => 1,
    }
}

fn configure_threads() -> Result<(), NefError> {
    let Ok(raw) = std::env::var("NEFLAB_THREADS") else {
        return Ok(());
    };
    let threads: usize = raw
        .trim()
        .parse()
        .ok()
        .filter(|t| *t >= 1)
        .ok_or_else(|| NefError::InvalidArgument(format!("NEFLAB_THREADS must be a positive integer, got `{raw}`")))?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build_global()
        .map_err(|e| NefError::Internal(e.to_string()))
}

fn write_csv(t: &Table) -> Result<String, NefError> {
    let mut w = csv::Writer::from_writer(Vec::new());
    let err = |e: csv::Error| NefError::Internal(e.to_string());
    w.write_record(&t.header).map_err(err)?;
    for r in &t.rows {
        w.write_record(r).map_err(err)?;
    }
    String::from_utf8(w.into_inner().map_err(|e| NefError::Internal(e.to_string()))?)
        .map_err(|e| NefError::Internal(e.to_string()))
}

fn run(cli: &Cli) -> Result<(String, u8), NefError> {
    configure_threads()?;
    let Some(command) = &cli.command else {
        return Err(NefError::InvalidArgument("no subcommand given (try --help)".into()));
    };
    let out = match command {
        Command::Catalog(c) => catalog_cmd(c),
        Command::Eval(a) => eval_cmd(a),
        Command::Transform(a) => transform_cmd(a),
        Command::Verify(a) => verify_cmd(a, cli.seed),
        Command::Priors(a) => priors_cmd(a, cli.seed),
        Command::Ode(c) => ode_cmd(c),
        Command::Battery(a) => battery_cmd(a, cli.seed),
    }?;
    let text = match cli.format {
        Format::Json => {
            let doc = json!({"command": out.command, "seed": cli.seed, "result": out.result});
            let mut s = serde_json::to_string_pretty(&doc).map_err(|e| NefError::Internal(e.to_string()))?;
            s.push('\n');
            s
        }
        Format::Csv => write_csv(&out.csv)?,
    };
    Ok((text, out.code))
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    if cli.schema {
        print!("{SCHEMA}");
        return ExitCode::SUCCESS;
    }
    match run(&cli) {
        Ok((text, code)) => {
            print!("{text}");
            ExitCode::from(code)
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}
