use serde::{Deserialize, Serialize};
use serde_json::json;

use heatctl_core::constants::{DoubleExpBound, DEFAULT_K1};
use heatctl_core::control::{
    observability_ratio, seeded_initial_datum, solve_hum, TimeIntegration, DEFAULT_EPSILON, DEFAULT_TIME_STEPS,
};
use heatctl_core::counterexample::{divergence_demo, NonThickFamily};
use heatctl_core::geometry::{is_thick, thickness_gamma, ThicknessMode, ThicknessOptions, DEFAULT_RASTER_RESOLUTION};
use heatctl_core::lsineq::{adversarial_search, builtin_corpus, verify_ls, LsInstance, LsInstanceFile, SearchMethod};
use heatctl_core::spectral::MassQuadrature;
use heatctl_core::sweep::{to_csv_string, SweepSpec};
use heatctl_core::{
    AxisBox, BoxUnionSet, ControlProblem, CostCertificate, CostParameters, Error, ModeVector, SpectralBasis,
};

use crate::input::{emit_report, emit_text, read_json, write_csv, CliError, SetRef};
use crate::{
    ConstantsArgs, CounterexampleArgs, GlobalArgs, HumArgs, LsSearchArgs, LsVerifyArgs, MethodArg, ModeArg,
    ObservabilityArgs, SweepArgs, ThicknessArgs,
};

fn config(command: &str, g: &GlobalArgs, args: impl Serialize, input: impl Serialize) -> serde_json::Value {
    json!({ "command": command, "global": g, "args": args, "input": input })
}

fn num(v: f64) -> String {
    format!("{v:?}")
}

fn k1(g: &GlobalArgs) -> f64 {
    g.k1.unwrap_or(DEFAULT_K1)
}

/// One value stands for all `d` axes.
fn broadcast(v: &[f64], d: usize) -> Result<Vec<f64>, CliError> {
    match v.len() {
        1 => Ok(vec![v[0]; d]),
        n if n == d => Ok(v.to_vec()),
        n => Err(Error::InvalidArgument(format!("expected 1 or {d} side values, got {n}")).into()),
    }
}

fn bound_json(b: &DoubleExpBound, t: f64) -> Result<serde_json::Value, CliError> {
    let ln = b.ln_at(t)?;
    Ok(json!({
        "T": t,
        "ln": ln,
        "ln_ln": b.ln_ln_at(t)?,
        "value": heatctl_core::LogValue::from_ln(ln).value,
    }))
}

/// Thickness of `omega` for `a`, as cost parameters of the basis domain.
fn cost_params(omega: &BoxUnionSet, basis: &SpectralBasis, a: &[f64], k1: f64) -> Result<CostParameters, CliError> {
    let a = broadcast(a, basis.d)?;
    let gamma = thickness_gamma(omega, &a, &ThicknessOptions::default())?.gamma_lower();
    if gamma <= 0.0 {
        return Err(Error::HypothesisViolation(format!("control set is not thick for a = {a:?}")).into());
    }
    Ok(CostParameters::new(basis.d, gamma, a, k1, basis.bc.domain_kind(), Some(basis.l))?)
}

pub fn thickness(g: &GlobalArgs, args: &ThicknessArgs) -> Result<(), CliError> {
    let set: BoxUnionSet = read_json(&args.set)?;
    let a = broadcast(&args.a, set.dim())?;
    let mode = match args.mode {
        ModeArg::Auto => ThicknessMode::Auto,
        ModeArg::Exact => ThicknessMode::Exact,
        ModeArg::Raster => ThicknessMode::Raster { resolution: g.resolution.unwrap_or(DEFAULT_RASTER_RESOLUTION) },
    };
    let window = match (&args.window_lo, &args.window_hi) {
        (Some(lo), Some(hi)) => Some(AxisBox::from_bounds(lo.clone(), hi.clone())?),
        (None, None) => None,
        _ => return Err(CliError::Usage("--window-lo and --window-hi go together".into())),
    };
    let opts = ThicknessOptions { mode, window };
    let cert = thickness_gamma(&set, &a, &opts)?;
    let thick = match args.gamma {
        Some(gamma) => Some(is_thick(&set, gamma, &a, &opts)?.0),
        None => None,
    };
    let result = json!({ "certificate": cert, "gamma_lower": cert.gamma_lower(), "is_thick": thick });
    emit_report(g.output.as_deref(), config("thickness", g, args, json!({ "set": set, "a": a })), result)
}

pub fn constants(g: &GlobalArgs, args: &ConstantsArgs) -> Result<(), CliError> {
    let mut params: CostParameters = match &args.params {
        Some(p) => read_json(p)?,
        None => {
            let missing = |name: &str| CliError::Usage(format!("--{name} is required without --params"));
            let d = args.d.ok_or_else(|| missing("d"))?;
            let a = args.a.as_deref().ok_or_else(|| missing("a"))?;
            CostParameters {
                d,
                gamma: args.gamma.ok_or_else(|| missing("gamma"))?,
                a: broadcast(a, d)?,
                k1: DEFAULT_K1,
                domain_kind: args.domain.ok_or_else(|| missing("domain"))?,
                l: args.l,
            }
        }
    };
    if let Some(k) = g.k1 {
        params.k1 = k;
    }
    params.validate()?;
    let cert = CostCertificate::new(params.clone())?;
    let cost = cert.cost_bound();
    let obs = cert.observability_bound();
    let bounds = args
        .t
        .iter()
        .map(|&t| Ok(json!({ "T": t, "cost": bound_json(&cost, t)?, "observability": bound_json(&obs, t)? })))
        .collect::<Result<Vec<_>, CliError>>()?;
    let result = json!({ "certificate": cert, "bounds": bounds });
    emit_report(g.output.as_deref(), config("constants", g, args, &params), result)
}

pub fn ls_verify(g: &GlobalArgs, args: &LsVerifyArgs) -> Result<(), CliError> {
    let k1 = k1(g);
    match &args.instance {
        Some(path) => {
            let file: LsInstanceFile = read_json(path)?;
            let inst = LsInstance::from_file(file.clone())?;
            let report = verify_ls(&inst, k1, g.resolution)?;
            emit_report(g.output.as_deref(), config("ls-verify", g, args, &file), report)
        }
        None => {
            let corpus = builtin_corpus()?;
            let reports = corpus.iter().map(|inst| verify_ls(inst, k1, g.resolution)).collect::<Result<Vec<_>, _>>()?;
            let passed = reports.iter().filter(|r| r.pass).count();
            let min_margin = reports.iter().map(|r| r.margin).fold(f64::INFINITY, f64::min);
            let result = json!({
                "count": reports.len(),
                "passed": passed,
                "all_pass": passed == reports.len(),
                "min_margin": min_margin,
                "reports": reports,
            });
            emit_report(g.output.as_deref(), config("ls-verify", g, args, "builtin corpus"), result)
        }
    }
}

pub fn ls_search(g: &GlobalArgs, args: &LsSearchArgs) -> Result<(), CliError> {
    let set: BoxUnionSet = read_json(&args.set)?;
    let basis = SpectralBasis::new(set.dim(), args.l, args.bc)?;
    let modes = basis.modes_below(args.e_max);
    if modes.is_empty() {
        return Err(Error::InvalidTruncation(format!("no modes below E_max = {}", args.e_max)).into());
    }
    let method = match args.method {
        MethodArg::Auto => SearchMethod::Auto,
        MethodArg::Eigensolve => SearchMethod::Eigensolve,
        MethodArg::CoordinateAscent => SearchMethod::CoordinateAscent,
    };
    let report = adversarial_search(&set, &basis, &modes, args.trials, args.steps, g.seed, method)?;
    let ln_max = report.max_ratio.ln();
    let bound = match &args.a {
        Some(a) => {
            let inst = LsInstance::new(report.worst.clone(), set.clone(), broadcast(a, basis.d)?)?;
            let ln_bound = inst.ln_bound(k1(g))?;
            Some(json!({ "gamma": inst.gamma, "ln_bound": ln_bound, "margin": ln_bound - ln_max }))
        }
        None => None,
    };
    let result = json!({ "search": report, "ln_max_ratio": ln_max, "bound": bound });
    emit_report(g.output.as_deref(), config("ls-search", g, args, json!({ "set": set })), result)
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct HumFile {
    omega: SetRef,
    #[serde(rename = "T")]
    t: f64,
    #[serde(rename = "E_max")]
    e_max: f64,
    /// Initial datum; a seeded random datum over `basis` when absent.
    #[serde(default)]
    u0: Option<ModeVector>,
    #[serde(default)]
    basis: Option<SpectralBasis>,
    #[serde(default)]
    epsilon: Option<f64>,
    #[serde(default)]
    time_steps: Option<usize>,
    #[serde(default)]
    quadrature: Option<MassQuadrature>,
    /// Box sides for the bound comparison.
    #[serde(default)]
    a: Option<Vec<f64>>,
}

fn quadrature(q: Option<MassQuadrature>, g: &GlobalArgs) -> MassQuadrature {
    match (q.unwrap_or_default(), g.resolution) {
        (MassQuadrature::Midpoint { .. }, Some(r)) => MassQuadrature::Midpoint { resolution: r },
        (q, _) => q,
    }
}

pub fn hum(g: &GlobalArgs, args: &HumArgs) -> Result<(), CliError> {
    let file: HumFile = read_json(&args.problem)?;
    let omega = file.omega.resolve(&args.problem)?;
    let u0 = match (&file.u0, &file.basis) {
        (Some(u0), _) => u0.clone(),
        (None, Some(basis)) => seeded_initial_datum(g.seed, *basis, file.e_max)?,
        (None, None) => return Err(Error::InvalidArgument("problem needs either u0 or basis".into()).into()),
    };
    let basis = *u0.basis();
    let problem = ControlProblem::new(basis, omega.clone(), file.t, u0.clone(), file.e_max)?
        .with_epsilon(file.epsilon.unwrap_or(DEFAULT_EPSILON))?
        .with_time_steps(file.time_steps.unwrap_or(DEFAULT_TIME_STEPS))?
        .with_quadrature(quadrature(file.quadrature, g));
    let sol = solve_hum(&problem)?;
    let bound = match &file.a {
        Some(a) => {
            let cert = CostCertificate::new(cost_params(&omega, &basis, a, k1(g))?)?;
            let b = cert.cost_bound();
            let ln_cost = sol.cost_ratio.ln();
            Some(json!({
                "gamma": cert.params.gamma,
                "ln_C": cert.bound_c.ln,
                "cost_bound": bound_json(&b, file.t)?,
                "ln_cost_ratio": ln_cost,
                "within_bound": b.admits(ln_cost, file.t)?,
            }))
        }
        None => None,
    };
    if let Some(path) = &args.trajectory {
        let rows = sol.trajectory.iter().map(|r| vec![num(r.t), num(r.u_norm), num(r.v_norm)]);
        write_csv(path, &["t", "u_norm", "v_norm"], rows)?;
    }
    let result = json!({ "solution": sol.summary(), "bound": bound });
    let input = json!({ "problem": file, "omega": omega, "u0": u0 });
    emit_report(g.output.as_deref(), config("hum", g, args, input), result)
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ObservabilityFile {
    f: ModeVector,
    omega: SetRef,
    #[serde(rename = "T")]
    t: f64,
    #[serde(default)]
    quadrature: Option<MassQuadrature>,
    /// Midpoint rule in time with this many steps; exact integration otherwise.
    #[serde(default)]
    time_steps: Option<usize>,
    #[serde(default)]
    a: Option<Vec<f64>>,
}

pub fn observability(g: &GlobalArgs, args: &ObservabilityArgs) -> Result<(), CliError> {
    let file: ObservabilityFile = read_json(&args.problem)?;
    let omega = file.omega.resolve(&args.problem)?;
    let time = match file.time_steps {
        Some(steps) => TimeIntegration::Midpoint { steps },
        None => TimeIntegration::Exact,
    };
    let report = observability_ratio(&file.f, &omega, file.t, quadrature(file.quadrature, g), time)?;
    let bound = match &file.a {
        Some(a) => {
            let cert = CostCertificate::new(cost_params(&omega, file.f.basis(), a, k1(g))?)?;
            let b = cert.observability_bound();
            Some(json!({
                "gamma": cert.params.gamma,
                "ln_C3": cert.observability.c3.ln,
                "bound": bound_json(&b, file.t)?,
                "within_bound": b.admits(report.ln_ratio, file.t)?,
            }))
        }
        None => None,
    };
    let result = json!({ "report": report, "bound": bound });
    let input = json!({ "problem": file, "omega": omega });
    emit_report(g.output.as_deref(), config("observability", g, args, input), result)
}

pub fn counterexample(g: &GlobalArgs, args: &CounterexampleArgs) -> Result<(), CliError> {
    let family: NonThickFamily = match &args.family {
        Some(p) => read_json(p)?,
        None => NonThickFamily::builtin(),
    };
    let rows = divergence_demo(&family, &args.k, args.t, args.panels)?;
    let increasing = rows.windows(2).all(|w| w[1].ratio > w[0].ratio);
    if let Some(path) = &args.table {
        let header =
            ["k", "terminal_norm_sq", "observed_energy", "ratio", "tail_bound", "hole_measure", "null_sequence_bound", "error_bound"];
        let records = rows.iter().map(|r| {
            vec![
                r.k.to_string(),
                num(r.terminal_norm_sq),
                num(r.observed_energy),
                num(r.ratio),
                num(r.tail_bound),
                num(r.hole_measure),
                num(r.null_sequence_bound),
                num(r.error_bound),
            ]
        });
        write_csv(path, &header, records)?;
    }
    let result = json!({ "rows": rows, "ratio_increasing": increasing });
    emit_report(g.output.as_deref(), config("counterexample", g, args, &family), result)
}

pub fn sweep(g: &GlobalArgs, args: &SweepArgs) -> Result<(), CliError> {
    let spec: SweepSpec = read_json(&args.spec)?;
    let rows = heatctl_core::sweep::sweep(&spec)?;
    emit_text(g.output.as_deref(), &to_csv_string(&rows)?)
}
