//! The explicit constant chain behind the control-cost estimates.
//!
//! Starting from the spectral-inequality exponent `c1`, the observability
//! constant is `C3 = max(144 c1², exp(6√2 c1))`, and the cost of null control
//! in time `T` is bounded by `C^{1/2} exp(C / 2T)` with
//! `C = (K^d / γ)^{K (d + |a|_1)}`, `K = 12√2 K1` on `R^d` and `K = 24√2 K1`
//! on cubes. These numbers overflow `f64` almost immediately, so everything
//! is carried as natural logarithms.

use std::f64::consts::{E, SQRT_2};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Largest `x` with `exp(x)` finite in `f64`.
const LN_MAX: f64 = 709.782_712_893_384;

/// Default universal Logvinenko–Sereda constant.
pub const DEFAULT_K1: f64 = 3.5;

/// Smallest `c1` for which `exp(6√2 c1) >= 144 c1²` holds from then on.
pub const C3_CROSSOVER: f64 = 0.3086;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DomainKind {
    FullSpace,
    CubePeriodic,
    CubeDirichlet,
    CubeNeumann,
}

impl DomainKind {
    pub fn is_cube(self) -> bool {
        !matches!(self, DomainKind::FullSpace)
    }

    pub fn as_str(self) -> &'static str {
        match self {
            DomainKind::FullSpace => "full_space",
            DomainKind::CubePeriodic => "cube_periodic",
            DomainKind::CubeDirichlet => "cube_dirichlet",
            DomainKind::CubeNeumann => "cube_neumann",
        }
    }
}

impl std::str::FromStr for DomainKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "full_space" => Ok(DomainKind::FullSpace),
            "cube_periodic" => Ok(DomainKind::CubePeriodic),
            "cube_dirichlet" => Ok(DomainKind::CubeDirichlet),
            "cube_neumann" => Ok(DomainKind::CubeNeumann),
            other => Err(Error::invalid(format!("unknown domain kind {other:?}"))),
        }
    }
}

/// A positive quantity stored as its natural logarithm, with the linear
/// value alongside whenever it fits in `f64`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LogValue {
    pub ln: f64,
    pub value: Option<f64>,
}

impl LogValue {
    pub fn from_ln(ln: f64) -> Self {
        LogValue { ln, value: (ln < LN_MAX).then(|| ln.exp()) }
    }

    /// The linear value, when it is finite in `f64`.
    pub fn linear(self) -> Option<f64> {
        (self.ln < LN_MAX).then(|| self.ln.exp())
    }
}

/// `T ↦ C^power · exp(C / (divisor · T))` for `C = exp(ln_c) >= 1`.
///
/// With `power = 1/2, divisor = 2` this is the control-cost bound, with
/// `power = 1, divisor = 1` the observability constant `C exp(C/T)`. Its
/// logarithm overflows as soon as `ln_c` exceeds ~709, so comparisons go
/// through `ln ln`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DoubleExpBound {
    pub ln_c: f64,
    pub power: f64,
    pub divisor: f64,
}

impl DoubleExpBound {
    pub fn cost(ln_c: f64) -> Self {
        DoubleExpBound { ln_c, power: 0.5, divisor: 2.0 }
    }

    pub fn observability(ln_c: f64) -> Self {
        DoubleExpBound { ln_c, power: 1.0, divisor: 1.0 }
    }

    fn check_t(t: f64) -> Result<()> {
        if !(t > 0.0) {
            return Err(Error::invalid(format!("time horizon must be positive, got {t}")));
        }
        Ok(())
    }

    /// `ln` of the bound; `+inf` once it leaves the `f64` range.
    pub fn ln_at(&self, t: f64) -> Result<f64> {
        Self::check_t(t)?;
        Ok(self.power * self.ln_c + (self.ln_c - (self.divisor * t).ln()).exp())
    }

    /// `ln ln` of the bound, finite for every representable `ln_c >= 0`.
    pub fn ln_ln_at(&self, t: f64) -> Result<f64> {
        Self::check_t(t)?;
        let first = (self.power * self.ln_c).ln();
        let second = self.ln_c - (self.divisor * t).ln();
        Ok(log_add_exp(first, second))
    }

    /// Whether a quantity with logarithm `ln_x` is below the bound.
    pub fn admits(&self, ln_x: f64, t: f64) -> Result<bool> {
        if ln_x.is_nan() {
            return Err(Error::invalid("NaN compared against bound"));
        }
        if ln_x <= 0.0 {
            // the bound is at least 1
            return Ok(self.ln_c >= 0.0 || ln_x <= self.ln_at(t)?);
        }
        Ok(ln_x.ln() <= self.ln_ln_at(t)?)
    }
}

fn log_add_exp(a: f64, b: f64) -> f64 {
    if a == f64::NEG_INFINITY {
        return b;
    }
    if b == f64::NEG_INFINITY {
        return a;
    }
    let m = a.max(b);
    m + ((a - m).exp() + (b - m).exp()).ln()
}

/// Inputs of the constant chain.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CostParameters {
    pub d: usize,
    pub gamma: f64,
    pub a: Vec<f64>,
    #[serde(rename = "K1", default = "default_k1")]
    pub k1: f64,
    pub domain_kind: DomainKind,
    #[serde(rename = "L", default)]
    pub l: Option<f64>,
}

fn default_k1() -> f64 {
    DEFAULT_K1
}

impl CostParameters {
    pub fn new(d: usize, gamma: f64, a: Vec<f64>, k1: f64, domain_kind: DomainKind, l: Option<f64>) -> Result<Self> {
        let p = CostParameters { d, gamma, a, k1, domain_kind, l };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        if self.d == 0 {
            return Err(Error::invalid("dimension must be positive"));
        }
        if !(self.gamma > 0.0 && self.gamma <= 1.0) {
            return Err(Error::invalid(format!("gamma must lie in (0, 1], got {}", self.gamma)));
        }
        if self.a.len() != self.d || self.a.iter().any(|&v| !(v > 0.0 && v.is_finite())) {
            return Err(Error::invalid(format!("a must hold {} positive values, got {:?}", self.d, self.a)));
        }
        if !(self.k1 >= E) {
            return Err(Error::invalid(format!("K1 must be at least e, got {}", self.k1)));
        }
        if self.domain_kind.is_cube() {
            let l = self
                .l
                .ok_or_else(|| Error::invalid("cube domains need the side parameter L"))?;
            if !(l > 0.0 && l.is_finite()) {
                return Err(Error::invalid(format!("L must be positive, got {l}")));
            }
            let side = 2.0 * std::f64::consts::PI * l;
            if let Some(aj) = self.a.iter().find(|&&aj| aj > side) {
                return Err(Error::HypothesisViolation(format!("a_j = {aj} exceeds 2πL = {side}")));
            }
        }
        Ok(())
    }

    pub fn a_l1(&self) -> f64 {
        self.a.iter().sum()
    }

    /// Whether `K1 >= 7/2`, needed to fold the torus inequality into the
    /// full-space form.
    pub fn k1_meets_torus_requirement(&self) -> bool {
        self.k1 >= 3.5
    }

    /// Lower bound on `c1` guaranteed for this domain kind.
    pub fn c1_lower_bound(&self) -> f64 {
        let d = self.d as f64;
        match self.domain_kind {
            DomainKind::FullSpace | DomainKind::CubePeriodic => 2.0 * d * d * E,
            DomainKind::CubeDirichlet | DomainKind::CubeNeumann => 4.0 * d * d * E,
        }
    }
}

/// `c1 = 2 K1 (d + |a|_1) ln(K1^d / γ)`.
pub fn c1_full_space(p: &CostParameters) -> Result<f64> {
    p.validate()?;
    if matches!(p.domain_kind, DomainKind::CubeDirichlet | DomainKind::CubeNeumann) {
        return Err(Error::invalid("full-space c1 applies to full_space or cube_periodic"));
    }
    let d = p.d as f64;
    Ok(2.0 * p.k1 * (d + p.a_l1()) * (d * p.k1.ln() - p.gamma.ln()))
}

/// Spectral-inequality exponent on the cube `(0, 2πL)^d`.
pub fn c1_cube(p: &CostParameters) -> Result<f64> {
    p.validate()?;
    let d = p.d as f64;
    match p.domain_kind {
        DomainKind::FullSpace => Err(Error::invalid("cube c1 needs a cube domain kind")),
        DomainKind::CubePeriodic => c1_full_space(p),
        DomainKind::CubeDirichlet | DomainKind::CubeNeumann => {
            Ok(4.0 * p.k1 * (d + p.a_l1()) * (d * (2.0 * p.k1).ln() - p.gamma.ln()))
        }
    }
}

/// `c1` for whatever domain `p` describes.
pub fn c1(p: &CostParameters) -> Result<f64> {
    match p.domain_kind {
        DomainKind::FullSpace => c1_full_space(p),
        _ => c1_cube(p),
    }
}

/// `M, τ0, τ1, C4, C5, C3` as functions of `c1`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ObservabilityConstants {
    pub c1: f64,
    #[serde(rename = "M")]
    pub m: f64,
    pub tau0: f64,
    pub tau1: f64,
    #[serde(rename = "C4")]
    pub c4: f64,
    #[serde(rename = "C5")]
    pub c5: LogValue,
    #[serde(rename = "C3")]
    pub c3: LogValue,
    /// `C3` is attained by `C5`.
    pub c3_is_c5: bool,
}

pub fn c3_from_c1(c1: f64) -> Result<ObservabilityConstants> {
    if !(c1 > 0.0 && c1.is_finite()) {
        return Err(Error::invalid(format!("c1 must be positive, got {c1}")));
    }
    let c4 = 144.0 * c1 * c1;
    let ln_c5 = 6.0 * SQRT_2 * c1;
    let ln_c4 = c4.ln();
    let c3_is_c5 = ln_c5 >= ln_c4;
    Ok(ObservabilityConstants {
        c1,
        m: 8.0 * (3.0 * c1).powi(2),
        tau0: 2f64.powf(2.5) * 3.0 * c1,
        tau1: 8.0 * 3.0 * c1 * c1,
        c4,
        c5: LogValue::from_ln(ln_c5),
        c3: LogValue::from_ln(ln_c5.max(ln_c4)),
        c3_is_c5,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TauCheck {
    pub tau: f64,
    /// `τ < τ0`.
    pub in_range: bool,
    /// `(3 c1)² 2⁵ / τ² > 1`.
    pub cond1: bool,
    /// `τ⁻¹ exp(-2³ 3 c1² / τ) <= 1/4`.
    pub cond2: bool,
    /// `τ⁻¹ exp(2⁴ (3 c1)² / τ) >= 1`.
    pub cond3: bool,
    pub ln_cond2_value: f64,
    pub ln_cond3_value: f64,
}

impl TauCheck {
    pub fn all(&self) -> bool {
        self.cond1 && self.cond2 && self.cond3
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConditionReport {
    pub c1: f64,
    pub tau0: f64,
    pub tau1: f64,
    pub checks: Vec<TauCheck>,
    /// Value of condition (2) at its maximiser `τ1`, `1 / (2³ 3 c1² e)`.
    pub cond2_at_tau1: f64,
    /// `1/(2³ 3 c1² e) <= 1/(96 e³) < 1/4`, which needs `c1 >= 2e`.
    pub chain_holds: bool,
    /// Every in-range sample passes all three conditions.
    pub all_in_range_pass: bool,
}

/// `n` log-spaced samples in `(0, τ0)`, from `10⁻⁶ τ0` upwards.
pub fn default_tau_samples(c1: f64, n: usize) -> Vec<f64> {
    let tau0 = 2f64.powf(2.5) * 3.0 * c1;
    (0..n).map(|i| tau0 * 10f64.powf(-6.0 * (n - i) as f64 / n as f64)).collect()
}

pub fn verify_appendix_conditions(c1: f64, taus: &[f64]) -> Result<ConditionReport> {
    let k = c3_from_c1(c1)?;
    let checks: Vec<TauCheck> = taus
        .iter()
        .map(|&tau| {
            let ln_cond2 = -tau.ln() - 24.0 * c1 * c1 / tau;
            let ln_cond3 = -tau.ln() + 144.0 * c1 * c1 / tau;
            TauCheck {
                tau,
                in_range: tau > 0.0 && tau < k.tau0,
                cond1: (3.0 * c1).powi(2) * 32.0 / (tau * tau) > 1.0,
                cond2: ln_cond2 <= 0.25f64.ln(),
                cond3: ln_cond3 >= 0.0,
                ln_cond2_value: ln_cond2,
                ln_cond3_value: ln_cond3,
            }
        })
        .collect();
    let cond2_at_tau1 = 1.0 / (24.0 * c1 * c1 * E);
    let chain_holds = cond2_at_tau1 <= 1.0 / (96.0 * E.powi(3)) && 1.0 / (96.0 * E.powi(3)) < 0.25;
    let all_in_range_pass = checks.iter().filter(|c| c.in_range).all(TauCheck::all);
    Ok(ConditionReport { c1, tau0: k.tau0, tau1: k.tau1, checks, cond2_at_tau1, chain_holds, all_in_range_pass })
}

/// `√C exp(C / 2T)` in linear space.
pub fn control_cost_bound(c: f64, t: f64) -> Result<f64> {
    if !(c >= 1.0) {
        return Err(Error::invalid(format!("C must be at least 1, got {c}")));
    }
    if !(t > 0.0) {
        return Err(Error::invalid(format!("T must be positive, got {t}")));
    }
    Ok(c.sqrt() * (c / (2.0 * t)).exp())
}

/// `K = 12√2 K1` on `R^d`, `24√2 K1` on cubes.
pub fn k_constant(p: &CostParameters) -> f64 {
    if p.domain_kind.is_cube() {
        24.0 * SQRT_2 * p.k1
    } else {
        12.0 * SQRT_2 * p.k1
    }
}

/// `C1` or `C2 = (K^d / γ)^{K (d + |a|_1)}`, as a logarithm.
pub fn bound_constant(p: &CostParameters) -> Result<LogValue> {
    p.validate()?;
    let k = k_constant(p);
    let d = p.d as f64;
    Ok(LogValue::from_ln(k * (d + p.a_l1()) * (d * k.ln() - p.gamma.ln())))
}

/// Logvinenko–Sereda constants for a given thickness and spectrum box.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LsBound {
    /// `(K1^d / γ)^{K1 (a·b + d)}`, valid on `R^d` and, for `K1 >= max(K2, 7/2)`, on tori.
    pub unified: LogValue,
    /// `(K2^d / γ)^{K2 a·b + (6d+1)/2}` for tori.
    pub torus_raw: Option<LogValue>,
}

pub fn ls_bound(gamma: f64, a: &[f64], b: &[f64], k1: f64, k2: f64, kind: DomainKind) -> Result<LsBound> {
    if a.len() != b.len() || a.is_empty() {
        return Err(Error::invalid("a and b must have the same positive length"));
    }
    if !(gamma > 0.0 && gamma <= 1.0) {
        return Err(Error::invalid(format!("gamma must lie in (0, 1], got {gamma}")));
    }
    let d = a.len() as f64;
    let ab: f64 = a.iter().zip(b).map(|(x, y)| x * y).sum();
    let unified = LogValue::from_ln(k1 * (ab + d) * (d * k1.ln() - gamma.ln()));
    let torus_raw = kind
        .is_cube()
        .then(|| LogValue::from_ln((k2 * ab + (6.0 * d + 1.0) / 2.0) * (d * k2.ln() - gamma.ln())));
    Ok(LsBound { unified, torus_raw })
}

/// The whole chain for one parameter set.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CostCertificate {
    pub params: CostParameters,
    pub c1_lower_bound: f64,
    #[serde(flatten)]
    pub observability: ObservabilityConstants,
    #[serde(rename = "K")]
    pub k: f64,
    /// `C1` (full space) or `C2` (cube).
    #[serde(rename = "bound_C")]
    pub bound_c: LogValue,
    pub k1_meets_torus_requirement: bool,
}

impl CostCertificate {
    pub fn new(params: CostParameters) -> Result<Self> {
        let c1 = c1(&params)?;
        let observability = c3_from_c1(c1)?;
        let bound_c = bound_constant(&params)?;
        Ok(CostCertificate {
            c1_lower_bound: params.c1_lower_bound(),
            observability,
            k: k_constant(&params),
            bound_c,
            k1_meets_torus_requirement: params.k1_meets_torus_requirement(),
            params,
        })
    }

    pub fn c1(&self) -> f64 {
        self.observability.c1
    }

    /// `T ↦ C^{1/2} exp(C / 2T)`.
    pub fn cost_bound(&self) -> DoubleExpBound {
        DoubleExpBound::cost(self.bound_c.ln)
    }

    /// `T ↦ C3 exp(C3 / T)`.
    pub fn observability_bound(&self) -> DoubleExpBound {
        DoubleExpBound::observability(self.observability.c3.ln)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn params(d: usize, gamma: f64, a: f64, k1: f64, kind: DomainKind) -> CostParameters {
        CostParameters::new(d, gamma, vec![a; d], k1, kind, kind.is_cube().then_some(1.0)).unwrap()
    }

    #[test]
    fn c1_examples() {
        let p = params(1, 1.0, 1.0, E, DomainKind::FullSpace);
        assert!((c1_full_space(&p).unwrap() - 4.0 * E).abs() < 1e-12);
        let p = params(1, 0.5, 1.0, E, DomainKind::FullSpace);
        let v = c1_full_space(&p).unwrap();
        assert!((v - 4.0 * E * (1.0 + 2f64.ln())).abs() < 1e-12);
        assert!((v - 18.41).abs() < 1e-2);
        let per = params(1, 0.5, 1.0, E, DomainKind::CubePeriodic);
        assert_eq!(c1_cube(&per).unwrap(), v);
        let dir = params(1, 1.0, 1.0, E, DomainKind::CubeDirichlet);
        let v = c1_cube(&dir).unwrap();
        assert!((v - 8.0 * E * (1.0 + 2f64.ln())).abs() < 1e-12);
        assert!((v - 36.82).abs() < 1e-2);
    }

    #[test]
    fn cube_hypothesis_is_enforced() {
        let err = CostParameters::new(1, 0.5, vec![7.0], 3.5, DomainKind::CubePeriodic, Some(1.0)).unwrap_err();
        assert!(matches!(err, Error::HypothesisViolation(_)));
        assert!(CostParameters::new(1, 1.5, vec![1.0], 3.5, DomainKind::FullSpace, None).is_err());
        assert!(CostParameters::new(1, 0.5, vec![1.0], 2.0, DomainKind::FullSpace, None).is_err());
    }

    #[test]
    fn c3_examples() {
        let k = c3_from_c1(C3_CROSSOVER).unwrap();
        let c5 = k.c5.linear().unwrap();
        assert!((c5 - k.c4).abs() / k.c4 < 1e-2);
        let k = c3_from_c1(2.0 * E).unwrap();
        assert!((k.c4 - 4256.1).abs() < 0.1);
        assert!((k.c5.ln - 12.0 * SQRT_2 * E).abs() < 1e-12);
        assert!((k.c5.ln - 46.13).abs() < 1e-2);
        assert!(k.c3_is_c5);
        let tiny = c3_from_c1(1e-9).unwrap();
        assert!(tiny.c3_is_c5);
        assert!((tiny.c3.linear().unwrap() - 1.0).abs() < 1e-6);
    }

    #[test]
    fn c3_equals_c5_above_crossover() {
        for i in 0..200 {
            let c1 = C3_CROSSOVER * 10f64.powf(i as f64 * 0.02);
            let k = c3_from_c1(c1).unwrap();
            assert!(k.c3_is_c5, "c1 = {c1}");
            assert_eq!(k.c3, k.c5);
        }
        // Just below the crossover C4 wins.
        assert!(!c3_from_c1(0.30).unwrap().c3_is_c5);
    }

    #[test]
    fn condition_examples() {
        let c1 = 2.0 * E;
        let k = c3_from_c1(c1).unwrap();
        let r = verify_appendix_conditions(c1, &[k.tau0 / 2.0, k.tau0 * 1.01, k.tau1]).unwrap();
        assert!(r.checks[0].in_range && r.checks[0].all());
        assert!(!r.checks[1].in_range && !r.checks[1].cond1);
        assert!(r.checks[2].cond2);
        assert!((r.cond2_at_tau1 - 1.0 / (24.0 * c1 * c1 * E)).abs() < 1e-18);
        assert!(r.chain_holds && r.cond2_at_tau1 < 0.25);
        assert!(r.all_in_range_pass);
    }

    #[test]
    fn cond2_is_maximal_at_tau1() {
        for &c1 in &[2.0 * E, 10.0, 50.0] {
            let k = c3_from_c1(c1).unwrap();
            let f = |tau: f64| -tau.ln() - 24.0 * c1 * c1 / tau;
            let peak = f(k.tau1);
            for i in 1..100 {
                let tau = k.tau1 * (0.5 + i as f64 / 100.0);
                assert!(f(tau) <= peak + 1e-15);
            }
            assert!((peak.exp() - 1.0 / (24.0 * c1 * c1 * E)).abs() / peak.exp() < 1e-12);
        }
    }

    #[test]
    fn cost_bound_examples() {
        assert!((control_cost_bound(1.0, 0.7).unwrap() - (1.0f64 / 1.4).exp()).abs() < 1e-15);
        assert!((control_cost_bound(4.0, 2.0).unwrap() - 2.0 * E).abs() < 1e-14);
        assert!((control_cost_bound(9.0, 1e12).unwrap() - 3.0).abs() < 1e-9);
        assert!(control_cost_bound(4.0, 0.0).is_err());
    }

    #[test]
    fn double_exp_matches_linear_when_small() {
        let b = DoubleExpBound::cost(4f64.ln());
        let ln = b.ln_at(2.0).unwrap();
        assert!((ln - (2.0 * E).ln()).abs() < 1e-14);
        assert!((b.ln_ln_at(2.0).unwrap() - ln.ln()).abs() < 1e-14);
        let huge = DoubleExpBound::cost(1300.0);
        assert!(huge.ln_at(1.0).unwrap().is_infinite());
        assert!((huge.ln_ln_at(1.0).unwrap() - (1300.0 - 2f64.ln())).abs() < 1e-9);
        assert!(huge.admits(1e300, 1.0).unwrap());
        assert!(!DoubleExpBound::cost(0.0).admits(10.0, 1.0).unwrap());
    }

    #[test]
    fn bound_constant_examples() {
        let p = params(1, 1.0, 1.0, E, DomainKind::FullSpace);
        let k = 12.0 * SQRT_2 * E;
        assert!((bound_constant(&p).unwrap().ln - k * 2.0 * k.ln()).abs() < 1e-9);
        let cube = params(1, 1.0, 1.0, E, DomainKind::CubePeriodic);
        assert!((k_constant(&cube) - 2.0 * k_constant(&p)).abs() < 1e-12);
    }

    #[test]
    fn ls_bound_examples() {
        let b = ls_bound(1.0, &[1.0, 2.0], &[0.0, 0.0], 3.5, E, DomainKind::FullSpace).unwrap();
        assert!((b.unified.ln - 3.5 * 2.0 * 2.0 * 3.5f64.ln()).abs() < 1e-12);
        assert!(b.torus_raw.is_none());
        let b = ls_bound(0.5, &[1.0], &[1.0], E, E, DomainKind::FullSpace).unwrap();
        assert!((b.unified.ln - E * 2.0 * (1.0 + 2f64.ln())).abs() < 1e-12);
        assert!((b.unified.ln - 9.2).abs() < 0.01);
    }

    proptest! {
        #[test]
        fn c5_below_bound_constant(
            d in 1usize..4, gamma in 0.01f64..1.0, a in 0.1f64..5.0, k1 in 3.5f64..10.0,
            kind in prop::sample::select(vec![DomainKind::FullSpace, DomainKind::CubePeriodic,
                                             DomainKind::CubeDirichlet, DomainKind::CubeNeumann]),
        ) {
            let p = params(d, gamma, a, k1, kind);
            let cert = CostCertificate::new(p.clone()).unwrap();
            prop_assert!(cert.observability.c5.ln <= cert.bound_c.ln * (1.0 + 1e-12));
            prop_assert!(cert.c1() >= cert.c1_lower_bound);
        }

        #[test]
        fn torus_unified_dominates_raw(
            d in 1usize..4, gamma in 0.01f64..1.0, a in 0.0f64..5.0, b in 0.0f64..50.0, k2 in 2.72f64..6.0,
        ) {
            let k1 = k2.max(3.5);
            let lb = ls_bound(gamma, &vec![a; d], &vec![b; d], k1, k2, DomainKind::CubePeriodic).unwrap();
            prop_assert!(lb.unified.ln >= lb.torus_raw.unwrap().ln - 1e-9);
        }

        #[test]
        fn bound_constant_monotone(gamma in 0.05f64..0.9, a in 0.1f64..3.0, k1 in 3.5f64..8.0) {
            let base = bound_constant(&params(2, gamma, a, k1, DomainKind::FullSpace)).unwrap().ln;
            prop_assert!(bound_constant(&params(2, gamma * 1.05, a, k1, DomainKind::FullSpace)).unwrap().ln < base);
            prop_assert!(bound_constant(&params(2, gamma, a * 1.05, k1, DomainKind::FullSpace)).unwrap().ln > base);
            prop_assert!(bound_constant(&params(2, gamma, a, k1 * 1.05, DomainKind::FullSpace)).unwrap().ln > base);
        }

        #[test]
        fn cost_bound_monotone(ln_c in 0.0f64..50.0, t in 0.01f64..10.0) {
            let b = DoubleExpBound::cost(ln_c);
            prop_assert!(b.ln_ln_at(t * 1.1).unwrap() < b.ln_ln_at(t).unwrap());
            prop_assert!(DoubleExpBound::cost(ln_c + 0.1).ln_ln_at(t).unwrap() > b.ln_ln_at(t).unwrap());
        }
    }
}
