//! Parameter sweeps of the control cost over `(γ, a, T, L, bc)` grids.
//!
//! Each grid point builds a `(γ, a)`-thick lattice control set, a smooth
//! initial profile centred in the cell, solves the HUM problem and records
//! the empirical cost next to the analytic bound. Rows come back in grid
//! order whatever the scheduling.

use std::f64::consts::PI;
use std::io::Write;

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::constants::{CostCertificate, CostParameters, DEFAULT_K1};
use crate::control::{solve_hum, ControlProblem, DEFAULT_EPSILON, DEFAULT_TIME_STEPS};
use crate::error::{Error, Result};
use crate::geometry::{AxisBox, BoxUnionSet};
use crate::spectral::{BoundaryCondition, MassQuadrature, ModeVector, MultiIndex, SpectralBasis};

/// Environment variable overriding the worker count.
pub const WORKERS_ENV: &str = "HEATCTL_WORKERS";

pub const CSV_HEADER: [&str; 12] = [
    "gamma",
    "a",
    "T",
    "L",
    "bc",
    "c1",
    "ln_C",
    "ln_cost_bound",
    "lnln_cost_bound",
    "cost_ratio",
    "terminal_ratio",
    "status",
];

/// Panels per unit length for projecting the initial profile.
const PROFILE_PANELS_PER_UNIT: f64 = 64.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Profile {
    /// `∏ exp(-(x_j - πL)² / 2σ²)`
    Gaussian,
    /// `(x_1 - πL) / σ` times the Gaussian.
    Dipole,
}

fn default_d() -> usize {
    1
}
fn default_e_max() -> f64 {
    16.0
}
fn default_epsilon() -> f64 {
    DEFAULT_EPSILON
}
fn default_width() -> f64 {
    1.0
}
fn default_profile() -> Profile {
    Profile::Gaussian
}
fn default_k1() -> f64 {
    DEFAULT_K1
}
fn default_time_steps() -> usize {
    DEFAULT_TIME_STEPS
}

/// Settings shared by every grid point.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PointTemplate {
    #[serde(default = "default_d")]
    pub d: usize,
    #[serde(default = "default_e_max")]
    pub e_max: f64,
    #[serde(default = "default_epsilon")]
    pub epsilon: f64,
    #[serde(default = "default_profile")]
    pub profile: Profile,
    /// Profile width `σ`.
    #[serde(default = "default_width")]
    pub width: f64,
    #[serde(default = "default_k1", rename = "K1")]
    pub k1: f64,
    #[serde(default = "default_time_steps")]
    pub time_steps: usize,
}

impl Default for PointTemplate {
    fn default() -> Self {
        PointTemplate {
            d: default_d(),
            e_max: default_e_max(),
            epsilon: default_epsilon(),
            profile: default_profile(),
            width: default_width(),
            k1: default_k1(),
            time_steps: default_time_steps(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepSpec {
    #[serde(default)]
    pub gamma: Vec<f64>,
    /// Box sides; each entry has `d` components.
    #[serde(default)]
    pub a: Vec<Vec<f64>>,
    #[serde(default, rename = "T")]
    pub t: Vec<f64>,
    #[serde(default, rename = "L")]
    pub l: Vec<f64>,
    #[serde(default)]
    pub bc: Vec<BoundaryCondition>,
    #[serde(default)]
    pub template: PointTemplate,
    /// Worker threads; `None` uses the rayon default.
    #[serde(default)]
    pub workers: Option<usize>,
}

impl SweepSpec {
    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::UnsupportedInput(format!("sweep spec: {e}")))
    }

    pub fn validate(&self) -> Result<()> {
        let tpl = &self.template;
        if tpl.d == 0 {
            return Err(Error::invalid("dimension must be positive"));
        }
        if let Some(a) = self.a.iter().find(|a| a.len() != tpl.d) {
            return Err(Error::invalid(format!("side vector {a:?} does not have {} components", tpl.d)));
        }
        if !(tpl.e_max >= 0.0 && tpl.e_max.is_finite()) {
            return Err(Error::invalid(format!("E_max must be finite and non-negative, got {}", tpl.e_max)));
        }
        if !(tpl.width > 0.0 && tpl.width.is_finite()) {
            return Err(Error::invalid(format!("profile width must be positive, got {}", tpl.width)));
        }
        if self.workers == Some(0) {
            return Err(Error::invalid("workers must be positive"));
        }
        Ok(())
    }

    /// Grid points, `gamma` outermost and `bc` innermost.
    pub fn points(&self) -> Vec<SweepPoint> {
        let mut out = Vec::new();
        for &gamma in &self.gamma {
            for a in &self.a {
                for &t in &self.t {
                    for &l in &self.l {
                        for &bc in &self.bc {
                            out.push(SweepPoint { gamma, a: a.clone(), t, l, bc });
                        }
                    }
                }
            }
        }
        out
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepPoint {
    pub gamma: f64,
    pub a: Vec<f64>,
    #[serde(rename = "T")]
    pub t: f64,
    #[serde(rename = "L")]
    pub l: f64,
    pub bc: BoundaryCondition,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    #[serde(flatten)]
    pub point: SweepPoint,
    pub c1: f64,
    #[serde(rename = "ln_C")]
    pub ln_c: f64,
    pub ln_cost_bound: f64,
    pub lnln_cost_bound: f64,
    pub cost_ratio: f64,
    pub terminal_ratio: f64,
    /// `ok`, or the error kind and message of the failed stage.
    pub status: String,
}

impl SweepRow {
    pub fn is_ok(&self) -> bool {
        self.status == "ok"
    }

    fn record(&self) -> Vec<String> {
        let p = &self.point;
        let a: Vec<String> = p.a.iter().map(|v| num(*v)).collect();
        vec![
            num(p.gamma),
            a.join(" "),
            num(p.t),
            num(p.l),
            p.bc.as_str().to_string(),
            num(self.c1),
            num(self.ln_c),
            num(self.ln_cost_bound),
            num(self.lnln_cost_bound),
            num(self.cost_ratio),
            num(self.terminal_ratio),
            self.status.clone(),
        ]
    }
}

/// Shortest round-trip form, switching to exponent notation for tiny and huge values.
fn num(v: f64) -> String {
    format!("{v:?}")
}

/// Periodic lattice of cubes with period `a` and sides `γ^{1/d} a_j`, one
/// cube centred at `center`. Every `a`-box meets it in exactly `γ ∏ a_j`.
pub fn thick_lattice(gamma: f64, a: &[f64], center: &[f64]) -> Result<BoxUnionSet> {
    let d = a.len();
    if !(gamma > 0.0 && gamma <= 1.0) {
        return Err(Error::invalid(format!("gamma must lie in (0, 1], got {gamma}")));
    }
    if center.len() != d {
        return Err(Error::invalid("center and sides differ in dimension"));
    }
    let frac = gamma.powf(1.0 / d as f64);
    let sides: Vec<f64> = a.iter().map(|aj| frac * aj).collect();
    let corner: Vec<f64> = center.iter().zip(&sides).map(|(c, s)| c - 0.5 * s).collect();
    BoxUnionSet::new(d, vec![AxisBox::new(corner, sides)?], Some(a.to_vec()))
}

fn profile_1d(profile: Profile, axis: usize, width: f64, center: f64, x: f64) -> f64 {
    let z = (x - center) / width;
    let g = (-0.5 * z * z).exp();
    match profile {
        Profile::Dipole if axis == 0 => z * g,
        _ => g,
    }
}

/// `ψ_j = ∫_0^{2πL} p_j(x) conj(φ_k(x)) dx` by composite Simpson.
fn axis_coefficients(basis: &SpectralBasis, profile: Profile, axis: usize, width: f64, ks: &[i64]) -> Vec<Complex64> {
    let side = basis.side();
    let center = 0.5 * side;
    let mut n = (PROFILE_PANELS_PER_UNIT * side / width.min(1.0)).ceil() as usize;
    n += n % 2;
    let h = side / n as f64;
    let samples: Vec<(f64, f64)> = (0..=n)
        .map(|i| {
            let w = if i == 0 || i == n {
                1.0
            } else if i % 2 == 1 {
                4.0
            } else {
                2.0
            };
            let x = i as f64 * h;
            (x, w * profile_1d(profile, axis, width, center, x))
        })
        .collect();
    ks.iter()
        .map(|&k| samples.iter().map(|&(x, fx)| fx * basis.factor(k, x).conj()).sum::<Complex64>() * (h / 3.0))
        .collect()
}

/// Projection of the separable profile onto the modes with `λ_k <= e_max`,
/// normalised to unit norm.
pub fn profile_datum(basis: SpectralBasis, profile: Profile, width: f64, e_max: f64) -> Result<ModeVector> {
    let modes = basis.modes_below(e_max);
    if modes.is_empty() {
        return Err(Error::InvalidTruncation(format!("no modes below E_max = {e_max}")));
    }
    let lo = modes.iter().flatten().copied().min().unwrap_or(0);
    let hi = modes.iter().flatten().copied().max().unwrap_or(0);
    let ks: Vec<i64> = (lo..=hi).collect();
    let tables: Vec<Vec<Complex64>> =
        (0..basis.d).map(|j| axis_coefficients(&basis, profile, j, width, &ks)).collect();
    let coeffs: Vec<(MultiIndex, Complex64)> = modes
        .into_iter()
        .map(|k| {
            let c = k.iter().enumerate().map(|(j, &kj)| tables[j][(kj - lo) as usize]).product();
            (k, c)
        })
        .collect();
    let v = ModeVector::new(basis, coeffs)?;
    let norm = v.norm();
    if !(norm > 0.0) {
        return Err(Error::InvalidTruncation("profile has no component below E_max".into()));
    }
    Ok(v.scaled(Complex64::new(1.0 / norm, 0.0)))
}

fn failed(point: SweepPoint, e: &Error) -> SweepRow {
    SweepRow {
        point,
        c1: f64::NAN,
        ln_c: f64::NAN,
        ln_cost_bound: f64::NAN,
        lnln_cost_bound: f64::NAN,
        cost_ratio: f64::NAN,
        terminal_ratio: f64::NAN,
        status: format!("{}: {e}", e.kind()),
    }
}

/// Evaluates one grid point. Failures end up in `status`; the bound
/// columns are kept when only the control solve failed.
pub fn run_point(point: &SweepPoint, tpl: &PointTemplate) -> SweepRow {
    let params = match CostParameters::new(tpl.d, point.gamma, point.a.clone(), tpl.k1, point.bc.domain_kind(), Some(point.l))
    {
        Ok(p) => p,
        Err(e) => return failed(point.clone(), &e),
    };
    let cert = match CostCertificate::new(params) {
        Ok(c) => c,
        Err(e) => return failed(point.clone(), &e),
    };
    let bound = cert.cost_bound();
    let (ln_b, lnln_b) = match (bound.ln_at(point.t), bound.ln_ln_at(point.t)) {
        (Ok(x), Ok(y)) => (x, y),
        (Err(e), _) | (_, Err(e)) => return failed(point.clone(), &e),
    };
    let mut row = SweepRow {
        point: point.clone(),
        c1: cert.c1(),
        ln_c: cert.bound_c.ln,
        ln_cost_bound: ln_b,
        lnln_cost_bound: lnln_b,
        cost_ratio: f64::NAN,
        terminal_ratio: f64::NAN,
        status: "ok".into(),
    };
    match solve_point(point, tpl) {
        Ok((cost, terminal)) => {
            row.cost_ratio = cost;
            row.terminal_ratio = terminal;
        }
        Err(e) => row.status = format!("{}: {e}", e.kind()),
    }
    row
}

fn solve_point(point: &SweepPoint, tpl: &PointTemplate) -> Result<(f64, f64)> {
    let basis = SpectralBasis::new(tpl.d, point.l, point.bc)?;
    let center = vec![PI * point.l; tpl.d];
    let omega = thick_lattice(point.gamma, &point.a, &center)?;
    let u0 = profile_datum(basis.clone(), tpl.profile, tpl.width, tpl.e_max)?;
    let problem = ControlProblem::new(basis, omega, point.t, u0, tpl.e_max)?
        .with_epsilon(tpl.epsilon)?
        .with_time_steps(tpl.time_steps)?
        .with_quadrature(MassQuadrature::Exact);
    let sol = solve_hum(&problem)?;
    Ok((sol.cost_ratio, sol.terminal_ratio()))
}

fn worker_count(spec: &SweepSpec) -> Result<Option<usize>> {
    match std::env::var(WORKERS_ENV) {
        Ok(v) => {
            let n: usize = v
                .trim()
                .parse()
                .map_err(|_| Error::invalid(format!("{WORKERS_ENV} must be a positive integer, got {v:?}")))?;
            if n == 0 {
                return Err(Error::invalid(format!("{WORKERS_ENV} must be positive")));
            }
            Ok(Some(n))
        }
        Err(_) => Ok(spec.workers),
    }
}

/// Runs every grid point; rows are returned in [`SweepSpec::points`] order.
pub fn sweep(spec: &SweepSpec) -> Result<Vec<SweepRow>> {
    spec.validate()?;
    let points = spec.points();
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Some(n) = worker_count(spec)? {
        builder = builder.num_threads(n);
    }
    let pool = builder.build().map_err(|e| Error::invalid(format!("worker pool: {e}")))?;
    Ok(pool.install(|| points.par_iter().map(|p| run_point(p, &spec.template)).collect()))
}

/// Writes the header and one record per row.
pub fn write_csv<W: Write>(rows: &[SweepRow], out: W) -> Result<()> {
    let io = |e: csv::Error| Error::Io(e.to_string());
    let mut w = csv::WriterBuilder::new().has_headers(false).from_writer(out);
    w.write_record(CSV_HEADER).map_err(io)?;
    for row in rows {
        w.write_record(row.record()).map_err(io)?;
    }
    w.flush().map_err(|e| Error::Io(e.to_string()))
}

pub fn to_csv_string(rows: &[SweepRow]) -> Result<String> {
    let mut buf = Vec::new();
    write_csv(rows, &mut buf)?;
    String::from_utf8(buf).map_err(|e| Error::Io(e.to_string()))
}

/// Length of each grid axis, in [`SweepSpec::points`] nesting order.
pub fn grid_shape(spec: &SweepSpec) -> [usize; 5] {
    [spec.gamma.len(), spec.a.len(), spec.t.len(), spec.l.len(), spec.bc.len()]
}
