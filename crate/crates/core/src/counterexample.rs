//! Gaussian witnesses against observability from non-thick sets.
//!
//! `g_k(t, x) = (2t+1)^{-d/2} exp(-‖x - x_k‖² / (2(2t+1)))` solves the heat
//! equation on `R^d` with a `k`-independent norm. When `S` misses most of the
//! ball `B(x_k, k)`, the energy `∫_0^T ‖g_k(t)‖²_{L²(S)} dt` is at most
//! `T |B(x_k,k) ∩ S| + T ∫_{‖y‖>k} e^{-‖y‖²/(2T+1)} dy`, so the ratio of
//! terminal to observed energy blows up along the sequence.

use std::collections::BTreeMap;
use std::f64::consts::PI;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{AxisBox, BoxUnionSet};

/// Window half-width in units of `sqrt(2T+1)`.
pub const WINDOW_RADIUS: f64 = 8.0;
pub const DEFAULT_TIME_PANELS: usize = 256;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GaussianWitness {
    pub k: u32,
    pub x_k: Vec<f64>,
    #[serde(rename = "T")]
    pub t: f64,
}

impl GaussianWitness {
    pub fn new(k: u32, x_k: Vec<f64>, t: f64) -> Result<Self> {
        if k == 0 || x_k.is_empty() {
            return Err(Error::invalid("witness needs k >= 1 and a centre"));
        }
        if !(t > 0.0) {
            return Err(Error::invalid(format!("T must be positive, got {t}")));
        }
        Ok(GaussianWitness { k, x_k, t })
    }

    pub fn dim(&self) -> usize {
        self.x_k.len()
    }

    /// Cube `x_k + [-k, k]^d`, which contains the ball `B(x_k, k)`.
    pub fn hole_cube(&self) -> AxisBox {
        let k = self.k as f64;
        AxisBox::from_bounds(self.x_k.iter().map(|c| c - k).collect(), self.x_k.iter().map(|c| c + k).collect())
            .expect("k >= 1")
    }

    /// Upper bound on `|S ∩ B(x_k, k)|` (exact in one dimension).
    pub fn hole_measure(&self, s: &BoxUnionSet) -> f64 {
        s.boxes_in_window(&self.hole_cube()).iter().fold(0.0, |acc, b| acc + b.volume())
    }

    /// Whether `|S ∩ B(x_k, k)| < 1/k` is certified.
    pub fn check_hole(&self, s: &BoxUnionSet) -> bool {
        self.hole_measure(s) < 1.0 / self.k as f64
    }
}

pub fn gaussian_solution(w: &GaussianWitness, t: f64, x: &[f64]) -> Result<f64> {
    if !(t >= 0.0) {
        return Err(Error::invalid(format!("t must be non-negative, got {t}")));
    }
    if x.len() != w.dim() {
        return Err(Error::invalid("point has wrong dimension"));
    }
    let s = 2.0 * t + 1.0;
    let r2: f64 = x.iter().zip(&w.x_k).map(|(a, b)| (a - b).powi(2)).sum();
    Ok(s.powf(-(w.dim() as f64) / 2.0) * (-r2 / (2.0 * s)).exp())
}

/// `‖g_k(t)‖²_{L²(R^d)} = π^{d/2} (2t+1)^{-d/2}`.
pub fn full_norm_sq(t: f64, d: usize) -> f64 {
    PI.powf(d as f64 / 2.0) * (2.0 * t + 1.0).powf(-(d as f64) / 2.0)
}

/// `∫_0^T full_norm_sq(t, d) dt` in closed form.
pub fn full_energy(t: f64, d: usize) -> f64 {
    let s = 2.0 * t + 1.0;
    let h = d as f64 / 2.0;
    if d == 2 {
        PI * s.ln() / 2.0
    } else {
        PI.powf(h) * (s.powf(1.0 - h) - 1.0) / (2.0 * (1.0 - h))
    }
}

fn gamma_half(d: usize) -> f64 {
    // Γ(d/2) by the recursion Γ(x+1) = xΓ(x)
    let (mut g, mut x) = if d % 2 == 0 { (1.0, 1.0) } else { (PI.sqrt(), 0.5) };
    while x < d as f64 / 2.0 - 1e-12 {
        g *= x;
        x += 1.0;
    }
    g
}

fn adaptive_simpson(f: &impl Fn(f64) -> f64, a: f64, b: f64, tol: f64) -> f64 {
    fn step(f: &impl Fn(f64) -> f64, a: f64, b: f64, fa: f64, fm: f64, fb: f64, whole: f64, tol: f64, depth: u32) -> f64 {
        let m = 0.5 * (a + b);
        let (lm, rm) = (0.5 * (a + m), 0.5 * (m + b));
        let (flm, frm) = (f(lm), f(rm));
        let left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
        let right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
        let delta = left + right - whole;
        if depth == 0 || delta.abs() <= 15.0 * tol {
            return left + right + delta / 15.0;
        }
        step(f, a, m, fa, flm, fm, left, tol / 2.0, depth - 1) + step(f, m, b, fm, frm, fb, right, tol / 2.0, depth - 1)
    }
    let (fa, fb, fm) = (f(a), f(b), f(0.5 * (a + b)));
    let whole = (b - a) / 6.0 * (fa + 4.0 * fm + fb);
    step(f, a, b, fa, fm, fb, whole, tol, 30)
}

/// `∫_{‖y‖>k} e^{-‖y‖²/(2T+1)} dy` through the radial integral.
pub fn gaussian_tail(k: f64, t: f64, d: usize) -> f64 {
    let s = 2.0 * t + 1.0;
    let k = k.max(0.0);
    let surface = 2.0 * PI.powf(d as f64 / 2.0) / gamma_half(d);
    let radial = |r: f64| r.powi(d as i32 - 1) * (-r * r / s).exp();
    // e^{-r²/s} < 1e-300 beyond this radius
    let upper = (k * k + 700.0 * s).sqrt() + (d as f64) * s.sqrt();
    // split the range so the adaptive rule sees the peak of the integrand
    let peak = (((d as f64 - 1.0) * s / 2.0).sqrt()).max(k);
    let mut cuts = vec![k];
    for b in [peak, peak + 4.0 * s.sqrt(), upper] {
        if b > *cuts.last().expect("non-empty") {
            cuts.push(b);
        }
    }
    // a crude composite estimate fixes the relative tolerance
    let crude: f64 = cuts
        .windows(2)
        .map(|w| {
            let n = 64;
            let h = (w[1] - w[0]) / n as f64;
            (0..n).map(|i| radial(w[0] + (i as f64 + 0.5) * h) * h).sum::<f64>()
        })
        .sum();
    if crude == 0.0 {
        return 0.0;
    }
    let tol = 1e-13 * crude;
    surface * cuts.windows(2).map(|w| adaptive_simpson(&radial, w[0], w[1], tol)).sum::<f64>()
}

/// `∫_lo^hi e^{-(x-c)²/s} dx` without cancellation in the tails.
fn gaussian_segment(lo: f64, hi: f64, c: f64, s: f64) -> f64 {
    let r = s.sqrt();
    let (u, v) = ((lo - c) / r, (hi - c) / r);
    let half = 0.5 * (PI * s).sqrt();
    if u >= 0.0 {
        half * (libm::erfc(u) - libm::erfc(v))
    } else if v <= 0.0 {
        half * (libm::erfc(-v) - libm::erfc(-u))
    } else {
        half * (libm::erf(v) - libm::erf(u))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EnergyEstimate {
    pub value: f64,
    /// Window truncation plus time-quadrature error estimate.
    pub error_bound: f64,
}

/// `∫_0^T ‖g_k(t)‖²_{L²(S)} dt`. Space is integrated exactly over the boxes
/// of `S` inside the window `x_k + [-R, R]^d`, `R = 8 sqrt(2T+1)`; time uses
/// composite Simpson with `panels` panels.
pub fn observed_energy(s: &BoxUnionSet, w: &GaussianWitness, panels: usize) -> Result<EnergyEstimate> {
    if s.dim() != w.dim() {
        return Err(Error::invalid("set and witness dimensions differ"));
    }
    let panels = panels.max(2).next_multiple_of(2);
    let d = w.dim();
    let radius = WINDOW_RADIUS * (2.0 * w.t + 1.0).sqrt();
    let window = AxisBox::from_bounds(
        w.x_k.iter().map(|c| c - radius).collect(),
        w.x_k.iter().map(|c| c + radius).collect(),
    )?;
    let boxes = s.boxes_in_window(&window);
    let spatial = |t: f64| -> f64 {
        let st = 2.0 * t + 1.0;
        let sum: f64 = boxes
            .iter()
            .map(|b| (0..d).map(|j| gaussian_segment(b.lo()[j], b.hi()[j], w.x_k[j], st)).product::<f64>())
            .sum();
        st.powf(-(d as f64)) * sum
    };
    let simpson = |n: usize| -> f64 {
        let h = w.t / n as f64;
        let inner: f64 = (1..n).map(|i| spatial(i as f64 * h) * if i % 2 == 1 { 4.0 } else { 2.0 }).sum();
        h / 3.0 * (spatial(0.0) + inner + spatial(w.t))
    };
    let fine = simpson(panels);
    let coarse = simpson(panels / 2);
    let richardson = (fine - coarse).abs() / 15.0;
    let truncation = w.t * gaussian_tail(radius, w.t, d);
    Ok(EnergyEstimate { value: fine, error_bound: truncation + richardson })
}

/// A set with explicit hole centres `x_k`, one for each `k`.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NonThickFamily {
    pub set: BoxUnionSet,
    pub centers: BTreeMap<u32, Vec<f64>>,
}

impl NonThickFamily {
    /// `base` with the cubes `x_k + [-k, k]^d` removed.
    pub fn with_holes(base: &BoxUnionSet, centers: BTreeMap<u32, Vec<f64>>) -> Result<Self> {
        let holes: Vec<AxisBox> = centers
            .iter()
            .map(|(&k, c)| GaussianWitness::new(k, c.clone(), 1.0).map(|w| w.hole_cube()))
            .collect::<Result<_>>()?;
        Ok(NonThickFamily { set: base.without(&holes)?, centers })
    }

    /// `d = 1`: a long interval with holes `[4^k - k, 4^k + k]`, `k = 1..6`.
    pub fn builtin() -> Self {
        let centers: BTreeMap<u32, Vec<f64>> = (1..=6).map(|k| (k, vec![4f64.powi(k as i32)])).collect();
        let base = BoxUnionSet::new(1, vec![AxisBox::from_bounds(vec![-256.0], vec![4352.0]).expect("interval")], None)
            .expect("valid interval");
        Self::with_holes(&base, centers).expect("holes are valid")
    }

    pub fn witness(&self, k: u32, t: f64) -> Result<GaussianWitness> {
        let c = self
            .centers
            .get(&k)
            .ok_or_else(|| Error::InvalidFamily(format!("no hole centre for k = {k}")))?;
        if c.len() != self.set.dim() {
            return Err(Error::InvalidFamily(format!("centre for k = {k} has wrong dimension")));
        }
        GaussianWitness::new(k, c.clone(), t)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DivergenceRow {
    pub k: u32,
    pub terminal_norm_sq: f64,
    pub observed_energy: f64,
    pub ratio: f64,
    pub tail_bound: f64,
    pub hole_measure: f64,
    /// `T |B(x_k,k) ∩ S| + T tail(k, T)`.
    pub null_sequence_bound: f64,
    pub error_bound: f64,
}

/// Rows `(k, ‖g_k(T)‖², observed energy, ratio, ...)` for each `k`. Every
/// `k` must carry a certified hole.
pub fn divergence_demo(family: &NonThickFamily, ks: &[u32], t: f64, panels: usize) -> Result<Vec<DivergenceRow>> {
    ks.par_iter()
        .map(|&k| {
            let w = family.witness(k, t)?;
            let hole = w.hole_measure(&family.set);
            if hole >= 1.0 / k as f64 {
                return Err(Error::InvalidFamily(format!("|S ∩ B(x_k, k)| = {hole} is not below 1/{k}")));
            }
            divergence_row(&family.set, &w, panels)
        })
        .collect()
}

/// One table row without the hole requirement, e.g. for thick contrasts.
pub fn divergence_row(s: &BoxUnionSet, w: &GaussianWitness, panels: usize) -> Result<DivergenceRow> {
    let d = w.dim();
    let energy = observed_energy(s, w, panels)?;
    if !(energy.value > 0.0) {
        return Err(Error::IndeterminateRatio(format!("observed energy vanishes for k = {}", w.k)));
    }
    let terminal = full_norm_sq(w.t, d);
    let tail = gaussian_tail(w.k as f64, w.t, d);
    let hole = w.hole_measure(s);
    Ok(DivergenceRow {
        k: w.k,
        terminal_norm_sq: terminal,
        observed_energy: energy.value,
        ratio: terminal / energy.value,
        tail_bound: tail,
        hole_measure: hole,
        null_sequence_bound: w.t * hole + w.t * tail,
        error_bound: energy.error_bound,
    })
}
