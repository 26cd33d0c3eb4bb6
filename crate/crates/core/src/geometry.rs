//! Finite unions of closed axis-aligned boxes in `R^d`, optionally repeated
//! over a rectangular lattice, together with the thickness machinery built on
//! top of them.
//!
//! A periodic set stores its boxes reduced into the fundamental cell
//! `[0,p_1] x ... x [0,p_d]` and disjoint up to boundaries, so all measures
//! are plain sums of box volumes.

use std::f64::consts::PI;

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Default number of translate samples per axis and period in raster mode.
pub const DEFAULT_RASTER_RESOLUTION: usize = 256;

/// Closed axis-aligned box `[lo_1,hi_1] x ... x [lo_d,hi_d]` with `hi > lo`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawBox", into = "RawBox")]
pub struct AxisBox {
    lo: Vec<f64>,
    hi: Vec<f64>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawBox {
    corner: Vec<f64>,
    sides: Vec<f64>,
}

impl TryFrom<RawBox> for AxisBox {
    type Error = Error;

    fn try_from(raw: RawBox) -> Result<Self> {
        AxisBox::new(raw.corner, raw.sides)
    }
}

impl From<AxisBox> for RawBox {
    fn from(b: AxisBox) -> Self {
        let sides = b.sides();
        RawBox { corner: b.lo, sides }
    }
}

impl AxisBox {
    /// Box with lower corner `corner` and side lengths `sides`.
    pub fn new(corner: Vec<f64>, sides: Vec<f64>) -> Result<Self> {
        if corner.len() != sides.len() || corner.is_empty() {
            return Err(Error::invalid("box corner and sides must have the same positive length"));
        }
        if corner.iter().any(|c| !c.is_finite()) {
            return Err(Error::invalid("box corner must be finite"));
        }
        if sides.iter().any(|&s| !(s > 0.0 && s.is_finite())) {
            return Err(Error::invalid(format!("box sides must be positive and finite, got {sides:?}")));
        }
        let hi = corner.iter().zip(&sides).map(|(c, s)| c + s).collect();
        Ok(AxisBox { lo: corner, hi })
    }

    /// Box from its two extreme corners.
    pub fn from_bounds(lo: Vec<f64>, hi: Vec<f64>) -> Result<Self> {
        if lo.len() != hi.len() || lo.is_empty() {
            return Err(Error::invalid("box bounds must have the same positive length"));
        }
        if lo.iter().zip(&hi).any(|(l, h)| !(h > l) || !l.is_finite() || !h.is_finite()) {
            return Err(Error::invalid(format!("degenerate box bounds {lo:?} .. {hi:?}")));
        }
        Ok(AxisBox { lo, hi })
    }

    /// The cube `[0, side]^d`.
    pub fn cube(d: usize, side: f64) -> Result<Self> {
        AxisBox::new(vec![0.0; d], vec![side; d])
    }

    pub fn dim(&self) -> usize {
        self.lo.len()
    }

    pub fn lo(&self) -> &[f64] {
        &self.lo
    }

    pub fn hi(&self) -> &[f64] {
        &self.hi
    }

    pub fn sides(&self) -> Vec<f64> {
        self.lo.iter().zip(&self.hi).map(|(l, h)| h - l).collect()
    }

    pub fn volume(&self) -> f64 {
        self.lo.iter().zip(&self.hi).map(|(l, h)| h - l).product()
    }

    /// Total `(d-1)`-measure of the faces.
    pub fn surface(&self) -> f64 {
        let sides = self.sides();
        (0..sides.len())
            .map(|j| 2.0 * sides.iter().enumerate().filter(|&(i, _)| i != j).map(|(_, s)| s).product::<f64>())
            .sum()
    }

    pub fn contains(&self, p: &[f64]) -> bool {
        p.iter().zip(self.lo.iter().zip(&self.hi)).all(|(x, (l, h))| l <= x && x <= h)
    }

    /// Intersection with positive volume, if any.
    pub fn intersect(&self, other: &AxisBox) -> Option<AxisBox> {
        let mut lo = Vec::with_capacity(self.dim());
        let mut hi = Vec::with_capacity(self.dim());
        for j in 0..self.dim() {
            let l = self.lo[j].max(other.lo[j]);
            let h = self.hi[j].min(other.hi[j]);
            if !(h > l) {
                return None;
            }
            lo.push(l);
            hi.push(h);
        }
        Some(AxisBox { lo, hi })
    }

    pub fn translated(&self, v: &[f64]) -> AxisBox {
        AxisBox {
            lo: self.lo.iter().zip(v).map(|(l, s)| l + s).collect(),
            hi: self.hi.iter().zip(v).map(|(h, s)| h + s).collect(),
        }
    }

    /// Mirror image under `x_axis -> -x_axis`.
    pub fn reflected(&self, axis: usize) -> AxisBox {
        let mut b = self.clone();
        b.lo[axis] = -self.hi[axis];
        b.hi[axis] = -self.lo[axis];
        b
    }

    /// `self \ other` as at most `2d` disjoint boxes.
    pub fn subtract(&self, other: &AxisBox) -> Vec<AxisBox> {
        if self.intersect(other).is_none() {
            return vec![self.clone()];
        }
        let mut rest = self.clone();
        let mut out = Vec::new();
        for j in 0..self.dim() {
            if rest.lo[j] < other.lo[j] {
                let mut piece = rest.clone();
                piece.hi[j] = other.lo[j];
                out.push(piece);
                rest.lo[j] = other.lo[j];
            }
            if rest.hi[j] > other.hi[j] {
                let mut piece = rest.clone();
                piece.lo[j] = other.hi[j];
                out.push(piece);
                rest.hi[j] = other.hi[j];
            }
        }
        out
    }
}

fn overlap_1d(lo: f64, hi: f64, wlo: f64, whi: f64) -> f64 {
    (hi.min(whi) - lo.max(wlo)).max(0.0)
}

/// `sum_n |[lo + n p, hi + n p] ∩ [wlo, whi]|`.
fn periodic_overlap_1d(lo: f64, hi: f64, p: f64, wlo: f64, whi: f64) -> f64 {
    let n0 = ((wlo - hi) / p).floor() as i64;
    let n1 = ((whi - lo) / p).ceil() as i64;
    (n0..=n1)
        .map(|n| {
            let s = n as f64 * p;
            overlap_1d(lo + s, hi + s, wlo, whi)
        })
        .sum()
}

/// Reduces `[lo, lo + side]` into `[0, p]`, splitting at the cell boundary.
fn reduce_interval(lo: f64, hi: f64, p: f64) -> Vec<(f64, f64)> {
    let side = hi - lo;
    if side >= p {
        return vec![(0.0, p)];
    }
    let mut l = lo.rem_euclid(p);
    if l >= p {
        l -= p;
    }
    let h = l + side;
    if h <= p {
        vec![(l, h)]
    } else {
        let mut v = vec![(l, p)];
        if h - p > 0.0 {
            v.push((0.0, h - p));
        }
        v.retain(|(a, b)| b > a);
        v
    }
}

/// `H(y) = G(y + a) - G(y)` at every `y`, where `G(y) = ∫_0^y Σ w 1_[lo,hi]`
/// and the intervals repeat with `period` when given (they then lie in
/// `[0, period]`).
fn window_profile(intervals: &[(f64, f64, f64)], period: Option<f64>, ys: &[f64], a: f64) -> Vec<f64> {
    let mut events: Vec<(f64, f64)> = Vec::with_capacity(2 * intervals.len());
    let mut total = 0.0;
    for &(lo, hi, w) in intervals {
        events.push((lo, w));
        events.push((hi, -w));
        total += w * (hi - lo);
    }
    events.sort_by(|p, q| p.0.total_cmp(&q.0));
    // query positions reduced into one period, with the whole periods split off
    let mut queries: Vec<(f64, f64, usize)> = Vec::with_capacity(2 * ys.len());
    for (i, &y) in ys.iter().enumerate() {
        for (slot, v) in [(2 * i, y), (2 * i + 1, y + a)] {
            match period {
                Some(p) => {
                    let n = (v / p).floor();
                    queries.push((v - n * p, n * total, slot));
                }
                None => queries.push((v, 0.0, slot)),
            }
        }
    }
    queries.sort_by(|p, q| p.0.total_cmp(&q.0));
    let mut g = vec![0.0; 2 * ys.len()];
    let (mut pos, mut value, mut slope) = (f64::NEG_INFINITY, 0.0, 0.0);
    let mut e = 0;
    for &(r, base, slot) in &queries {
        while e < events.len() && events[e].0 <= r {
            if pos.is_finite() {
                value += slope * (events[e].0 - pos);
            }
            pos = events[e].0;
            slope += events[e].1;
            e += 1;
        }
        let at = if pos.is_finite() { value + slope * (r - pos) } else { 0.0 };
        g[slot] = base + at;
    }
    (0..ys.len()).map(|i| (g[2 * i + 1] - g[2 * i]).max(0.0)).collect()
}

fn disjointify(boxes: Vec<AxisBox>) -> Vec<AxisBox> {
    let mut out: Vec<AxisBox> = Vec::with_capacity(boxes.len());
    for b in boxes {
        let mut pieces = vec![b];
        for existing in &out {
            pieces = pieces.iter().flat_map(|p| p.subtract(existing)).collect();
            if pieces.is_empty() {
                break;
            }
        }
        out.extend(pieces);
    }
    out
}

/// A measurable set given as a finite union of closed boxes, optionally
/// repeated with period `p` along every axis.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "SetFile", into = "SetFile")]
pub struct BoxUnionSet {
    d: usize,
    boxes: Vec<AxisBox>,
    period: Option<Vec<f64>>,
}

/// On-disk set description.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SetFile {
    pub d: usize,
    #[serde(default)]
    pub period: Option<Vec<f64>>,
    pub boxes: Vec<AxisBox>,
}

impl TryFrom<SetFile> for BoxUnionSet {
    type Error = Error;

    fn try_from(f: SetFile) -> Result<Self> {
        BoxUnionSet::new(f.d, f.boxes, f.period)
    }
}

impl From<BoxUnionSet> for SetFile {
    fn from(s: BoxUnionSet) -> Self {
        SetFile { d: s.d, period: s.period, boxes: s.boxes }
    }
}

impl BoxUnionSet {
    pub fn new(d: usize, boxes: Vec<AxisBox>, period: Option<Vec<f64>>) -> Result<Self> {
        if d == 0 {
            return Err(Error::invalid("dimension must be positive"));
        }
        if let Some(b) = boxes.iter().find(|b| b.dim() != d) {
            return Err(Error::invalid(format!("box of dimension {} in a {d}-dimensional set", b.dim())));
        }
        let boxes = match &period {
            None => boxes,
            Some(p) => {
                if p.len() != d || p.iter().any(|&v| !(v > 0.0 && v.is_finite())) {
                    return Err(Error::invalid(format!("period must be {d} positive finite values, got {p:?}")));
                }
                let mut reduced = Vec::new();
                for b in &boxes {
                    let per_axis: Vec<Vec<(f64, f64)>> =
                        (0..d).map(|j| reduce_interval(b.lo[j], b.hi[j], p[j])).collect();
                    let shape: Vec<usize> = per_axis.iter().map(Vec::len).collect();
                    crate::tensor::for_each_index(&shape, |idx| {
                        let lo = idx.iter().enumerate().map(|(j, &i)| per_axis[j][i].0).collect();
                        let hi = idx.iter().enumerate().map(|(j, &i)| per_axis[j][i].1).collect();
                        reduced.push(AxisBox { lo, hi });
                    });
                }
                reduced
            }
        };
        Ok(BoxUnionSet { d, boxes: disjointify(boxes), period })
    }

    pub fn empty(d: usize) -> Self {
        BoxUnionSet { d, boxes: Vec::new(), period: None }
    }

    /// The whole space, as the periodic set covering its fundamental cell.
    pub fn full(period: Vec<f64>) -> Result<Self> {
        let d = period.len();
        let cell = AxisBox::new(vec![0.0; d], period.clone())?;
        BoxUnionSet::new(d, vec![cell], Some(period))
    }

    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::invalid(format!("set description: {e}")))
    }

    pub fn dim(&self) -> usize {
        self.d
    }

    /// Disjoint boxes; for periodic sets these lie in the fundamental cell.
    pub fn boxes(&self) -> &[AxisBox] {
        &self.boxes
    }

    pub fn period(&self) -> Option<&[f64]> {
        self.period.as_deref()
    }

    pub fn is_empty(&self) -> bool {
        self.boxes.is_empty()
    }

    /// Lebesgue measure (per fundamental cell when periodic).
    pub fn measure(&self) -> f64 {
        self.boxes.iter().map(AxisBox::volume).sum()
    }

    /// Total surface of the stored boxes; an upper bound for the perimeter.
    pub fn boundary_measure(&self) -> f64 {
        self.boxes.iter().map(AxisBox::surface).sum()
    }

    pub fn contains(&self, x: &[f64]) -> bool {
        match &self.period {
            None => self.boxes.iter().any(|b| b.contains(x)),
            Some(p) => {
                let r: Vec<f64> = x.iter().zip(p).map(|(v, p)| v.rem_euclid(*p)).collect();
                self.boxes.iter().any(|b| {
                    (0..self.d).all(|j| {
                        let (lo, hi) = (b.lo[j], b.hi[j]);
                        (lo <= r[j] && r[j] <= hi) || (lo <= r[j] + p[j] && r[j] + p[j] <= hi)
                    })
                })
            }
        }
    }

    fn check_window(&self, x: &[f64], a: &[f64]) -> Result<()> {
        if x.len() != self.d || a.len() != self.d {
            return Err(Error::invalid(format!("expected {}-dimensional translate and sides", self.d)));
        }
        if a.iter().any(|&v| !(v > 0.0 && v.is_finite())) {
            return Err(Error::invalid(format!("window sides must be positive, got {a:?}")));
        }
        Ok(())
    }

    /// `|S ∩ (x + [0,a_1] x ... x [0,a_d])|`.
    pub fn intersection_measure(&self, x: &[f64], a: &[f64]) -> Result<f64> {
        self.check_window(x, a)?;
        Ok(self.window_measure(x, a))
    }

    fn window_measure(&self, x: &[f64], a: &[f64]) -> f64 {
        match &self.period {
            None => self
                .boxes
                .iter()
                .map(|b| (0..self.d).map(|j| overlap_1d(b.lo[j], b.hi[j], x[j], x[j] + a[j])).product::<f64>())
                .sum(),
            // The lattice sum factorises per axis for each box.
            Some(p) => self
                .boxes
                .iter()
                .map(|b| {
                    (0..self.d)
                        .map(|j| periodic_overlap_1d(b.lo[j], b.hi[j], p[j], x[j], x[j] + a[j]))
                        .product::<f64>()
                })
                .sum(),
        }
    }

    /// Disjoint boxes covering `S ∩ window`, expanding periodic images.
    pub fn boxes_in_window(&self, window: &AxisBox) -> Vec<AxisBox> {
        match &self.period {
            None => self.boxes.iter().filter_map(|b| b.intersect(window)).collect(),
            Some(p) => {
                let mut out = Vec::new();
                for b in &self.boxes {
                    let ranges: Vec<(i64, i64)> = (0..self.d)
                        .map(|j| {
                            (
                                ((window.lo[j] - b.hi[j]) / p[j]).floor() as i64,
                                ((window.hi[j] - b.lo[j]) / p[j]).ceil() as i64,
                            )
                        })
                        .collect();
                    let shape: Vec<usize> = ranges.iter().map(|(a, b)| (b - a + 1) as usize).collect();
                    crate::tensor::for_each_index(&shape, |idx| {
                        let shift: Vec<f64> =
                            (0..self.d).map(|j| (ranges[j].0 + idx[j] as i64) as f64 * p[j]).collect();
                        if let Some(c) = b.translated(&shift).intersect(window) {
                            out.push(c);
                        }
                    });
                }
                out
            }
        }
    }

    /// Non-periodic set `S ∩ window`.
    pub fn clip(&self, window: &AxisBox) -> BoxUnionSet {
        BoxUnionSet { d: self.d, boxes: self.boxes_in_window(window), period: None }
    }

    pub fn translate(&self, v: &[f64]) -> Result<BoxUnionSet> {
        if v.len() != self.d {
            return Err(Error::invalid("translation has wrong dimension"));
        }
        let boxes = self.boxes.iter().map(|b| b.translated(v)).collect();
        BoxUnionSet::new(self.d, boxes, self.period.clone())
    }

    /// Union with extra boxes (interpreted in the same periodic frame).
    pub fn with_boxes(&self, extra: impl IntoIterator<Item = AxisBox>) -> Result<BoxUnionSet> {
        let boxes = self.boxes.iter().cloned().chain(extra).collect();
        BoxUnionSet::new(self.d, boxes, self.period.clone())
    }

    /// Non-periodic `S \ holes`.
    pub fn without(&self, holes: &[AxisBox]) -> Result<BoxUnionSet> {
        if self.period.is_some() {
            return Err(Error::UnsupportedInput("hole removal requires a non-periodic set".into()));
        }
        let mut boxes = self.boxes.clone();
        for h in holes {
            boxes = boxes.iter().flat_map(|b| b.subtract(h)).collect();
        }
        Ok(BoxUnionSet { d: self.d, boxes, period: None })
    }

    fn bounding_box(&self) -> Option<AxisBox> {
        let first = self.boxes.first()?;
        let mut lo = first.lo.clone();
        let mut hi = first.hi.clone();
        for b in &self.boxes[1..] {
            for j in 0..self.d {
                lo[j] = lo[j].min(b.lo[j]);
                hi[j] = hi[j].max(b.hi[j]);
            }
        }
        Some(AxisBox { lo, hi })
    }
}

/// How the infimum over translates is computed.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ThicknessMode {
    /// Exact breakpoint sweep for `d <= 2`, raster scan otherwise.
    Auto,
    Exact,
    Raster { resolution: usize },
}

#[derive(Debug, Clone)]
pub struct ThicknessOptions {
    pub mode: ThicknessMode,
    /// Translates scanned for non-periodic sets.
    pub window: Option<AxisBox>,
}

impl Default for ThicknessOptions {
    fn default() -> Self {
        ThicknessOptions { mode: ThicknessMode::Auto, window: None }
    }
}

/// `(γ, a)` together with the translate attaining the smallest intersection.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ThicknessCertificate {
    pub gamma: f64,
    pub a: Vec<f64>,
    pub witness_x: Vec<f64>,
    pub inf_measure: f64,
    pub exact: bool,
    /// Worst-case overestimate of `inf_measure` (zero in exact mode).
    pub error_bound: f64,
}

impl ThicknessCertificate {
    pub fn cell_volume(&self) -> f64 {
        self.a.iter().product()
    }

    /// Certified lower bound on `γ`.
    pub fn gamma_lower(&self) -> f64 {
        ((self.inf_measure - self.error_bound) / self.cell_volume()).max(0.0)
    }
}

fn sorted_unique(mut v: Vec<f64>) -> Vec<f64> {
    v.sort_by(f64::total_cmp);
    v.dedup();
    v
}

/// Translate domain: either one period cell or an explicit window.
fn translate_domain(s: &BoxUnionSet, window: Option<&AxisBox>) -> Result<(Vec<f64>, Vec<f64>, bool)> {
    match (s.period(), window) {
        (Some(p), _) => Ok((vec![0.0; s.d], p.to_vec(), true)),
        (None, Some(w)) => {
            if w.dim() != s.d {
                return Err(Error::invalid("window has wrong dimension"));
            }
            Ok((w.lo.clone(), w.hi.clone(), false))
        }
        (None, None) => Err(Error::UnsupportedInput(
            "thickness of a non-periodic set needs a window of translates".into(),
        )),
    }
}

/// `γ = inf_x |S ∩ (x + A)| / ∏ a_j` with the minimising translate.
///
/// Exact mode evaluates the measure on the grid of breakpoints
/// `{lo, hi, lo - a, hi - a}` of every box along every axis: between
/// breakpoints the measure is multilinear in `x`, so its minimum over each
/// grid cell sits at a vertex. Raster mode scans a uniform grid of translates
/// and reports the Lipschitz bound `Σ_j (h_j / 2) ∏_{i≠j} a_i` as its error.
pub fn thickness_gamma(s: &BoxUnionSet, a: &[f64], opts: &ThicknessOptions) -> Result<ThicknessCertificate> {
    s.check_window(&vec![0.0; s.d], a)?;
    let (dom_lo, dom_hi, periodic) = translate_domain(s, opts.window.as_ref())?;
    let vol: f64 = a.iter().product();
    if s.is_empty() {
        return Ok(ThicknessCertificate {
            gamma: 0.0,
            a: a.to_vec(),
            witness_x: dom_lo,
            inf_measure: 0.0,
            exact: true,
            error_bound: 0.0,
        });
    }
    let mode = match opts.mode {
        ThicknessMode::Auto if s.d <= 2 => ThicknessMode::Exact,
        ThicknessMode::Auto => ThicknessMode::Raster { resolution: DEFAULT_RASTER_RESOLUTION },
        m => m,
    };
    let axes: Vec<Vec<f64>> = match mode {
        ThicknessMode::Exact => (0..s.d)
            .map(|j| {
                let mut pts = vec![dom_lo[j], dom_hi[j]];
                for b in s.boxes() {
                    for v in [b.lo[j], b.hi[j], b.lo[j] - a[j], b.hi[j] - a[j]] {
                        if periodic {
                            pts.push(v.rem_euclid(dom_hi[j]));
                        } else if v > dom_lo[j] && v < dom_hi[j] {
                            pts.push(v);
                        }
                    }
                }
                sorted_unique(pts)
            })
            .collect(),
        ThicknessMode::Raster { resolution } => {
            if resolution == 0 {
                return Err(Error::invalid("raster resolution must be positive"));
            }
            (0..s.d)
                .map(|j| {
                    let span = dom_hi[j] - dom_lo[j];
                    // Periodic scans skip the last node, which repeats the first.
                    let n = if periodic { resolution } else { resolution + 1 };
                    (0..n).map(|i| dom_lo[j] + span * i as f64 / resolution as f64).collect()
                })
                .collect()
        }
        ThicknessMode::Auto => unreachable!(),
    };
    let shape: Vec<usize> = axes.iter().map(Vec::len).collect();
    let last = s.d - 1;
    let outer: usize = shape[..last].iter().product();
    let ys = &axes[last];
    let period_last = s.period().map(|p| p[last]);
    // Outer axes are enumerated; along the last axis the measure is a
    // difference of one piecewise-linear primitive, evaluated in one pass.
    let (_, best) = (0..outer)
        .into_par_iter()
        .map(|o| {
            let mut rem = o;
            let mut x = vec![0.0; last];
            for j in (0..last).rev() {
                x[j] = axes[j][rem % shape[j]];
                rem /= shape[j];
            }
            let weighted: Vec<(f64, f64, f64)> = s
                .boxes()
                .iter()
                .filter_map(|b| {
                    let w: f64 = (0..last)
                        .map(|j| match s.period() {
                            Some(p) => periodic_overlap_1d(b.lo[j], b.hi[j], p[j], x[j], x[j] + a[j]),
                            None => overlap_1d(b.lo[j], b.hi[j], x[j], x[j] + a[j]),
                        })
                        .product();
                    (w > 0.0).then_some((b.lo[last], b.hi[last], w))
                })
                .collect();
            let h = window_profile(&weighted, period_last, ys, a[last]);
            let (i, v) = h.iter().enumerate().fold((0, f64::INFINITY), |acc, (i, &v)| if v < acc.1 { (i, v) } else { acc });
            (v, o * ys.len() + i)
        })
        .reduce(
            || (f64::INFINITY, usize::MAX),
            |p, q| match p.0.total_cmp(&q.0) {
                std::cmp::Ordering::Less => p,
                std::cmp::Ordering::Greater => q,
                std::cmp::Ordering::Equal => {
                    if p.1 <= q.1 {
                        p
                    } else {
                        q
                    }
                }
            },
        );
    let mut rem = best;
    let mut witness = vec![0.0; s.d];
    for j in (0..s.d).rev() {
        witness[j] = axes[j][rem % shape[j]];
        rem /= shape[j];
    }
    let inf_measure = s.window_measure(&witness, a);
    let (exact, error_bound) = match mode {
        ThicknessMode::Raster { resolution } => {
            let bound = (0..s.d)
                .map(|j| {
                    let h = (dom_hi[j] - dom_lo[j]) / resolution as f64;
                    let face: f64 = a.iter().enumerate().filter(|&(i, _)| i != j).map(|(_, v)| v).product();
                    0.5 * h * face
                })
                .sum();
            (false, bound)
        }
        _ => (true, 0.0),
    };
    Ok(ThicknessCertificate {
        gamma: (inf_measure / vol).min(1.0),
        a: a.to_vec(),
        witness_x: witness,
        inf_measure,
        exact,
        error_bound,
    })
}

/// Whether `S` is `(γ, a)`-thick. Raster certificates are judged by their
/// certified lower bound, so a `true` answer is never an artefact of the scan.
pub fn is_thick(
    s: &BoxUnionSet,
    gamma: f64,
    a: &[f64],
    opts: &ThicknessOptions,
) -> Result<(bool, ThicknessCertificate)> {
    if !(gamma > 0.0 && gamma <= 1.0) {
        return Err(Error::invalid(format!("gamma must lie in (0, 1], got {gamma}")));
    }
    let cert = thickness_gamma(s, a, opts)?;
    let tol = 1e-12 * gamma.max(1.0);
    Ok((cert.gamma_lower() >= gamma - tol, cert))
}

/// Clips `S` to `[0, 2πL]^d`, adds the mirror image in each coordinate in
/// turn, and repeats the result with period `4πL`.
pub fn reflect_and_periodize(s: &BoxUnionSet, l: f64) -> Result<BoxUnionSet> {
    if !(l > 0.0 && l.is_finite()) {
        return Err(Error::invalid(format!("L must be positive, got {l}")));
    }
    let side = 2.0 * PI * l;
    let cell = AxisBox::cube(s.d, side)?;
    let mut boxes = s.boxes_in_window(&cell);
    for j in 0..s.d {
        let mirrored: Vec<AxisBox> = boxes.iter().map(|b| b.reflected(j)).collect();
        boxes.extend(mirrored);
    }
    BoxUnionSet::new(s.d, boxes, Some(vec![2.0 * side; s.d]))
}

/// Cell-centred indicator samples of a set over a window.
#[derive(Debug, Clone)]
pub struct Raster {
    pub window: AxisBox,
    pub shape: Vec<usize>,
    /// Row-major, last axis fastest.
    pub cells: Vec<bool>,
}

impl Raster {
    pub fn steps(&self) -> Vec<f64> {
        self.window.sides().iter().zip(&self.shape).map(|(s, &n)| s / n as f64).collect()
    }

    pub fn cell_volume(&self) -> f64 {
        self.steps().iter().product()
    }

    pub fn count(&self) -> usize {
        self.cells.iter().filter(|&&c| c).count()
    }

    pub fn measure(&self) -> f64 {
        self.count() as f64 * self.cell_volume()
    }

    /// Centres of the cells along `axis`.
    pub fn centers(&self, axis: usize) -> Vec<f64> {
        let h = self.window.sides()[axis] / self.shape[axis] as f64;
        (0..self.shape[axis]).map(|i| self.window.lo[axis] + (i as f64 + 0.5) * h).collect()
    }

    /// Bound `2 d · perimeter · h` on `|measure - |S ∩ window||`.
    pub fn error_bound(&self, set: &BoxUnionSet) -> f64 {
        let h = self.steps().into_iter().fold(0.0, f64::max);
        let perimeter = set.clip(&self.window).boundary_measure();
        2.0 * set.dim() as f64 * perimeter * h
    }
}

/// Samples `S` at cell centres. Without a window the period cell (periodic)
/// or the bounding box (non-periodic) is used.
pub fn rasterize(s: &BoxUnionSet, window: Option<&AxisBox>, resolution: &[usize]) -> Result<Raster> {
    if resolution.len() != s.d || resolution.contains(&0) {
        return Err(Error::invalid(format!("need {} positive resolutions, got {resolution:?}", s.d)));
    }
    let window = match (window, s.period()) {
        (Some(w), _) => w.clone(),
        (None, Some(p)) => AxisBox::new(vec![0.0; s.d], p.to_vec())?,
        (None, None) => s
            .bounding_box()
            .ok_or_else(|| Error::UnsupportedInput("cannot rasterize an empty set without a window".into()))?,
    };
    if window.dim() != s.d {
        return Err(Error::invalid("window has wrong dimension"));
    }
    let mut raster = Raster { window, shape: resolution.to_vec(), cells: Vec::new() };
    let centers: Vec<Vec<f64>> = (0..s.d).map(|j| raster.centers(j)).collect();
    let total: usize = resolution.iter().product();
    raster.cells = (0..total)
        .into_par_iter()
        .map(|flat| {
            let mut rem = flat;
            let mut x = vec![0.0; s.d];
            for j in (0..s.d).rev() {
                x[j] = centers[j][rem % resolution[j]];
                rem /= resolution[j];
            }
            s.contains(&x)
        })
        .collect();
    Ok(raster)
}

/// Random periodic union of up to `max_boxes` boxes with the given period.
pub fn random_periodic_set<R: Rng + ?Sized>(rng: &mut R, period: &[f64], max_boxes: usize) -> BoxUnionSet {
    let d = period.len();
    let n = rng.random_range(1..=max_boxes.max(1));
    let boxes = (0..n)
        .map(|_| {
            let corner = period.iter().map(|p| rng.random_range(0.0..*p)).collect();
            let sides = period.iter().map(|p| rng.random_range(0.05..0.8) * p).collect();
            AxisBox::new(corner, sides).expect("positive sides")
        })
        .collect();
    BoxUnionSet::new(d, boxes, Some(period.to_vec())).expect("valid random set")
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn half_cells() -> BoxUnionSet {
        BoxUnionSet::new(1, vec![AxisBox::new(vec![0.0], vec![0.5]).unwrap()], Some(vec![1.0])).unwrap()
    }

    fn unit_square() -> BoxUnionSet {
        BoxUnionSet::new(2, vec![AxisBox::new(vec![0.0, 0.0], vec![1.0, 1.0]).unwrap()], None).unwrap()
    }

    #[test]
    fn intersection_measure_examples() {
        let sq = unit_square();
        assert_eq!(sq.intersection_measure(&[0.0, 0.0], &[1.0, 1.0]).unwrap(), 1.0);
        assert_eq!(sq.intersection_measure(&[2.0, 2.0], &[1.0, 1.0]).unwrap(), 0.0);
        let hc = half_cells();
        // [0.3, 1.3] meets [0.3, 0.5] and [1.0, 1.3].
        let m = hc.intersection_measure(&[0.3], &[1.0]).unwrap();
        assert!((m - 0.5).abs() < 1e-15);
        assert!(matches!(sq.intersection_measure(&[0.0, 0.0], &[1.0, 0.0]), Err(Error::InvalidArgument(_))));
    }

    #[test]
    fn periodic_reduction_splits_straddling_boxes() {
        let s = BoxUnionSet::new(1, vec![AxisBox::new(vec![0.75], vec![0.5]).unwrap()], Some(vec![1.0])).unwrap();
        assert_eq!(s.boxes().len(), 2);
        assert!((s.measure() - 0.5).abs() < 1e-15);
        assert!(s.contains(&[0.1]) && s.contains(&[0.9]) && !s.contains(&[0.5]));
        assert!(s.contains(&[17.1]));
    }

    #[test]
    fn overlapping_boxes_are_deduplicated() {
        let s = BoxUnionSet::new(
            2,
            vec![
                AxisBox::new(vec![0.0, 0.0], vec![2.0, 2.0]).unwrap(),
                AxisBox::new(vec![1.0, 1.0], vec![2.0, 2.0]).unwrap(),
            ],
            None,
        )
        .unwrap();
        assert!((s.measure() - 7.0).abs() < 1e-12);
    }

    #[test]
    fn gamma_of_half_cells() {
        let cert = thickness_gamma(&half_cells(), &[1.0], &ThicknessOptions::default()).unwrap();
        assert!(cert.exact);
        assert!((cert.gamma - 0.5).abs() < 1e-14);
    }

    #[test]
    fn gamma_of_full_cell_is_one() {
        let s = BoxUnionSet::full(vec![1.0, 2.0]).unwrap();
        let cert = thickness_gamma(&s, &[0.3, 0.7], &ThicknessOptions::default()).unwrap();
        assert!((cert.gamma - 1.0).abs() < 1e-14);
    }

    #[test]
    fn figure_one_parameters() {
        let s = BoxUnionSet::new(2, vec![AxisBox::new(vec![0.0, 0.0], vec![0.5, 0.25]).unwrap()], Some(vec![1.0, 1.0]))
            .unwrap();
        let cert = thickness_gamma(&s, &[2.0, 2.0], &ThicknessOptions::default()).unwrap();
        assert_eq!(cert.gamma, 0.125);
        assert_eq!(cert.inf_measure, 0.5);
    }

    #[test]
    fn brute_force_scan_agrees_on_half_cells() {
        // x ∈ [0,1) at step 1e-4
        let hc = half_cells();
        let brute = (0..10_000)
            .map(|i| hc.intersection_measure(&[i as f64 * 1e-4], &[1.0]).unwrap())
            .fold(f64::INFINITY, f64::min);
        assert!((brute - 0.5).abs() < 1e-12);
    }

    #[test]
    fn is_thick_examples() {
        let hc = half_cells();
        let opts = ThicknessOptions::default();
        assert!(is_thick(&hc, 0.5, &[1.0], &opts).unwrap().0);
        assert!(!is_thick(&hc, 0.6, &[1.0], &opts).unwrap().0);
        let empty = BoxUnionSet::new(1, vec![], Some(vec![1.0])).unwrap();
        assert!(!is_thick(&empty, 1e-9, &[1.0], &opts).unwrap().0);
        assert!(is_thick(&hc, 0.0, &[1.0], &opts).is_err());
    }

    #[test]
    fn non_periodic_needs_window() {
        let err = thickness_gamma(&unit_square(), &[1.0, 1.0], &ThicknessOptions::default()).unwrap_err();
        assert!(matches!(err, Error::UnsupportedInput(_)));
        let opts = ThicknessOptions {
            mode: ThicknessMode::Exact,
            window: Some(AxisBox::new(vec![0.0, 0.0], vec![0.5, 0.5]).unwrap()),
        };
        let cert = thickness_gamma(&unit_square(), &[0.5, 0.5], &opts).unwrap();
        assert!((cert.gamma - 1.0).abs() < 1e-14);
    }

    #[test]
    fn reflection_of_one_interval() {
        let l = 1.0 / (2.0 * PI);
        let s = BoxUnionSet::new(1, vec![AxisBox::new(vec![0.0], vec![0.5]).unwrap()], None).unwrap();
        let t = reflect_and_periodize(&s, l).unwrap();
        assert!((t.period().unwrap()[0] - 2.0).abs() < 1e-15);
        assert!((t.measure() - 1.0).abs() < 1e-12);
        // ∪ (2n + [-1/2, 1/2])
        for &(x, inside) in &[(0.0, true), (0.4, true), (0.6, false), (1.4, false), (1.6, true), (-3.7, true)] {
            assert_eq!(t.contains(&[x]), inside, "x = {x}");
        }
    }

    #[test]
    fn reflection_of_full_cell_is_everything() {
        let l = 0.3;
        let s = BoxUnionSet::full(vec![2.0 * PI * l; 2]).unwrap();
        let t = reflect_and_periodize(&s, l).unwrap();
        let p = 4.0 * PI * l;
        assert!((t.measure() - p * p).abs() < 1e-9);
    }

    #[test]
    fn reflection_of_interior_box_gives_four_boxes() {
        let s = BoxUnionSet::new(2, vec![AxisBox::new(vec![1.0, 2.0], vec![0.5, 0.5]).unwrap()], None).unwrap();
        let t = reflect_and_periodize(&s, 1.0).unwrap();
        assert_eq!(t.boxes().len(), 4);
        assert!(matches!(reflect_and_periodize(&s, 0.0), Err(Error::InvalidArgument(_))));
    }

    #[test]
    fn raster_examples() {
        let sq = unit_square();
        let r = rasterize(&sq, None, &[4, 4]).unwrap();
        assert_eq!(r.count(), 16);
        let half = BoxUnionSet::new(2, vec![AxisBox::new(vec![0.0, 0.0], vec![0.5, 1.0]).unwrap()], None).unwrap();
        let w = AxisBox::cube(2, 1.0).unwrap();
        assert_eq!(rasterize(&half, Some(&w), &[4, 4]).unwrap().count(), 8);
        assert!(rasterize(&half, Some(&w), &[4, 0]).is_err());
    }

    #[test]
    fn raster_measure_within_perimeter_bound() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..20 {
            let s = random_periodic_set(&mut rng, &[1.0, 1.5], 4);
            for n in [16, 64, 256] {
                let r = rasterize(&s, None, &[n, n]).unwrap();
                assert!((r.measure() - s.measure()).abs() <= r.error_bound(&s));
            }
        }
    }

    #[test]
    fn exact_and_raster_gamma_agree() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..10 {
            let s = random_periodic_set(&mut rng, &[1.0, 1.0], 3);
            let a = [0.7, 1.3];
            let exact = thickness_gamma(&s, &a, &ThicknessOptions::default()).unwrap();
            let raster = thickness_gamma(
                &s,
                &a,
                &ThicknessOptions { mode: ThicknessMode::Raster { resolution: 64 }, window: None },
            )
            .unwrap();
            assert!(raster.inf_measure >= exact.inf_measure - 1e-12);
            assert!(raster.inf_measure - exact.inf_measure <= raster.error_bound + 1e-12);
        }
    }

    #[test]
    fn serde_round_trip_keeps_set() {
        let json = r#"{"d": 1, "period": [1.0], "boxes": [{"corner": [0.0], "sides": [0.5]}]}"#;
        let s = BoxUnionSet::from_json(json).unwrap();
        assert_eq!(s, half_cells());
        let back = BoxUnionSet::from_json(&serde_json::to_string(&s).unwrap()).unwrap();
        assert_eq!(back, s);
        assert!(BoxUnionSet::from_json(r#"{"d": 1, "boxes": [], "extra": 1}"#).is_err());
        assert!(BoxUnionSet::from_json(r#"{"d": 1, "boxes": [{"corner": [0.0], "sides": [-1.0]}]}"#).is_err());
    }

    #[test]
    fn profile_sweep_matches_direct_overlaps() {
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        for periodic in [true, false] {
            for _ in 0..20 {
                let p = rng.random_range(0.5..3.0);
                let intervals: Vec<(f64, f64, f64)> = (0..rng.random_range(1..6))
                    .map(|_| {
                        let lo = rng.random_range(0.0..p);
                        (lo, rng.random_range(lo..=p), rng.random_range(0.1..2.0))
                    })
                    .collect();
                let a = rng.random_range(0.1..2.0 * p);
                let ys: Vec<f64> = (0..50).map(|_| rng.random_range(-p..2.0 * p)).collect();
                let fast = window_profile(&intervals, periodic.then_some(p), &ys, a);
                for (y, f) in ys.iter().zip(&fast) {
                    let direct: f64 = intervals
                        .iter()
                        .map(|&(lo, hi, w)| {
                            w * if periodic { periodic_overlap_1d(lo, hi, p, *y, y + a) } else { overlap_1d(lo, hi, *y, y + a) }
                        })
                        .sum();
                    assert!((f - direct).abs() < 1e-12, "{f} vs {direct}");
                }
            }
        }
    }
}
