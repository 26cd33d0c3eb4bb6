//! Laplacian eigenbases on the cell `(0, 2πL)^d`, finite mode expansions, the
//! heat semigroup, spectral projectors and the double-torus extension.
//!
//! One-dimensional factors, with `θ = x / 2L`:
//!
//! | bc        | index      | factor                                   | eigenvalue  |
//! |-----------|------------|------------------------------------------|-------------|
//! | periodic  | `k ∈ Z`    | `(2πL)^{-1/2} e^{ikx/L}`                 | `k²/L²`     |
//! | dirichlet | `k >= 1`   | `(πL)^{-1/2} sin(kθ)`                    | `k²/(2L)²`  |
//! | neumann   | `k >= 0`   | `(πL)^{-1/2} cos(kθ)`, `(2πL)^{-1/2}` at 0 | `k²/(2L)²` |
//!
//! Multi-dimensional eigenfunctions are tensor products.

use std::collections::{BTreeMap, BTreeSet};
use std::f64::consts::PI;

use nalgebra::DMatrix;
use num_complex::Complex64;
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{rasterize, AxisBox, BoxUnionSet};
use crate::tensor::{for_each_index, Tensor};

pub type MultiIndex = Vec<i64>;

const ZERO: Complex64 = Complex64 { re: 0.0, im: 0.0 };

/// Grid points per axis used by quadrature when nothing else is requested.
pub fn default_resolution(d: usize) -> usize {
    if d <= 2 {
        256
    } else {
        64
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BoundaryCondition {
    Periodic,
    Dirichlet,
    Neumann,
}

impl BoundaryCondition {
    pub fn as_str(self) -> &'static str {
        match self {
            BoundaryCondition::Periodic => "periodic",
            BoundaryCondition::Dirichlet => "dirichlet",
            BoundaryCondition::Neumann => "neumann",
        }
    }

    pub fn domain_kind(self) -> crate::constants::DomainKind {
        use crate::constants::DomainKind;
        match self {
            BoundaryCondition::Periodic => DomainKind::CubePeriodic,
            BoundaryCondition::Dirichlet => DomainKind::CubeDirichlet,
            BoundaryCondition::Neumann => DomainKind::CubeNeumann,
        }
    }
}

impl std::str::FromStr for BoundaryCondition {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "periodic" => Ok(BoundaryCondition::Periodic),
            "dirichlet" => Ok(BoundaryCondition::Dirichlet),
            "neumann" => Ok(BoundaryCondition::Neumann),
            other => Err(Error::invalid(format!("unknown boundary condition {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SpectralBasis {
    pub d: usize,
    #[serde(rename = "L")]
    pub l: f64,
    pub bc: BoundaryCondition,
}

impl SpectralBasis {
    pub fn new(d: usize, l: f64, bc: BoundaryCondition) -> Result<Self> {
        if d == 0 {
            return Err(Error::invalid("dimension must be positive"));
        }
        if !(l > 0.0 && l.is_finite()) {
            return Err(Error::invalid(format!("L must be positive, got {l}")));
        }
        Ok(SpectralBasis { d, l, bc })
    }

    /// Side length `2πL` of the cell.
    pub fn side(&self) -> f64 {
        2.0 * PI * self.l
    }

    pub fn cell(&self) -> AxisBox {
        AxisBox::cube(self.d, self.side()).expect("positive side")
    }

    fn min_index(&self) -> i64 {
        match self.bc {
            BoundaryCondition::Dirichlet => 1,
            _ => 0,
        }
    }

    pub fn check_index(&self, k: &[i64]) -> Result<()> {
        if k.len() != self.d {
            return Err(Error::InvalidIndex { index: k.to_vec(), reason: format!("expected {} components", self.d) });
        }
        match self.bc {
            BoundaryCondition::Periodic => Ok(()),
            _ if k.iter().all(|&kj| kj >= self.min_index()) => Ok(()),
            BoundaryCondition::Dirichlet => {
                Err(Error::InvalidIndex { index: k.to_vec(), reason: "dirichlet indices must be >= 1".into() })
            }
            BoundaryCondition::Neumann => {
                Err(Error::InvalidIndex { index: k.to_vec(), reason: "neumann indices must be >= 0".into() })
            }
        }
    }

    fn eigenvalue_unchecked(&self, k: &[i64]) -> f64 {
        let n2: f64 = k.iter().map(|&kj| (kj * kj) as f64).sum();
        match self.bc {
            BoundaryCondition::Periodic => n2 / (self.l * self.l),
            _ => n2 / (4.0 * self.l * self.l),
        }
    }

    pub fn eigenvalue(&self, k: &[i64]) -> Result<f64> {
        self.check_index(k)?;
        Ok(self.eigenvalue_unchecked(k))
    }

    /// Normalised one-dimensional factor `k` at `x`.
    pub fn factor(&self, k: i64, x: f64) -> Complex64 {
        let l = self.l;
        match self.bc {
            BoundaryCondition::Periodic => Complex64::from_polar(1.0, k as f64 * x / l) / (2.0 * PI * l).sqrt(),
            BoundaryCondition::Dirichlet => Complex64::new((k as f64 * x / (2.0 * l)).sin() / (PI * l).sqrt(), 0.0),
            BoundaryCondition::Neumann if k == 0 => Complex64::new(1.0 / (2.0 * PI * l).sqrt(), 0.0),
            BoundaryCondition::Neumann => Complex64::new((k as f64 * x / (2.0 * l)).cos() / (PI * l).sqrt(), 0.0),
        }
    }

    pub fn eigenfunction(&self, k: &[i64], x: &[f64]) -> Result<Complex64> {
        self.check_index(k)?;
        if x.len() != self.d {
            return Err(Error::invalid("point has wrong dimension"));
        }
        Ok(k.iter().zip(x).map(|(&kj, &xj)| self.factor(kj, xj)).product())
    }

    /// All indices with `λ_k <= E`, in lexicographic order.
    pub fn modes_below(&self, e: f64) -> Vec<MultiIndex> {
        if !(e >= 0.0) {
            return Vec::new();
        }
        let scale = match self.bc {
            BoundaryCondition::Periodic => self.l,
            _ => 2.0 * self.l,
        };
        let kmax = (scale * e.sqrt() * (1.0 + 1e-12)).floor() as i64;
        let lo = match self.bc {
            BoundaryCondition::Periodic => -kmax,
            _ => self.min_index(),
        };
        if kmax < lo {
            return Vec::new();
        }
        let width = (kmax - lo + 1) as usize;
        let tol = e * (1.0 + 1e-12);
        let mut out = Vec::new();
        for_each_index(&vec![width; self.d], |idx| {
            let k: MultiIndex = idx.iter().map(|&i| lo + i as i64).collect();
            if self.eigenvalue_unchecked(&k) <= tol {
                out.push(k);
            }
        });
        out
    }
}

/// A finite expansion `Σ c_k φ_k` in one of the bases.
#[derive(Debug, Clone, PartialEq)]
pub struct ModeVector {
    basis: SpectralBasis,
    coeffs: BTreeMap<MultiIndex, Complex64>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct CoeffEntry {
    k: MultiIndex,
    re: f64,
    #[serde(default)]
    im: f64,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ModeFile {
    bc: BoundaryCondition,
    d: usize,
    #[serde(rename = "L")]
    l: f64,
    coeffs: Vec<CoeffEntry>,
}

impl Serialize for ModeVector {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        ModeFile {
            bc: self.basis.bc,
            d: self.basis.d,
            l: self.basis.l,
            coeffs: self.coeffs.iter().map(|(k, c)| CoeffEntry { k: k.clone(), re: c.re, im: c.im }).collect(),
        }
        .serialize(s)
    }
}

impl<'de> Deserialize<'de> for ModeVector {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let f = ModeFile::deserialize(d)?;
        let basis = SpectralBasis::new(f.d, f.l, f.bc).map_err(serde::de::Error::custom)?;
        ModeVector::new(basis, f.coeffs.into_iter().map(|e| (e.k, Complex64::new(e.re, e.im))))
            .map_err(serde::de::Error::custom)
    }
}

impl ModeVector {
    /// Repeated indices are summed.
    pub fn new(basis: SpectralBasis, coeffs: impl IntoIterator<Item = (MultiIndex, Complex64)>) -> Result<Self> {
        let mut map = BTreeMap::new();
        for (k, c) in coeffs {
            basis.check_index(&k)?;
            if !(c.re.is_finite() && c.im.is_finite()) {
                return Err(Error::invalid(format!("non-finite coefficient at {k:?}")));
            }
            *map.entry(k).or_insert(ZERO) += c;
        }
        Ok(ModeVector { basis, coeffs: map })
    }

    pub fn real(basis: SpectralBasis, coeffs: impl IntoIterator<Item = (MultiIndex, f64)>) -> Result<Self> {
        ModeVector::new(basis, coeffs.into_iter().map(|(k, c)| (k, Complex64::new(c, 0.0))))
    }

    pub fn zero(basis: SpectralBasis) -> Self {
        ModeVector { basis, coeffs: BTreeMap::new() }
    }

    /// Coefficients listed against `modes`, zero where absent.
    pub fn from_dense(basis: SpectralBasis, modes: &[MultiIndex], values: &[Complex64]) -> Result<Self> {
        if modes.len() != values.len() {
            return Err(Error::invalid("mode list and values differ in length"));
        }
        ModeVector::new(basis, modes.iter().cloned().zip(values.iter().copied()))
    }

    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::invalid(format!("mode vector: {e}")))
    }

    pub fn basis(&self) -> &SpectralBasis {
        &self.basis
    }

    pub fn coeffs(&self) -> &BTreeMap<MultiIndex, Complex64> {
        &self.coeffs
    }

    pub fn coeff(&self, k: &[i64]) -> Complex64 {
        self.coeffs.get(k).copied().unwrap_or(ZERO)
    }

    pub fn len(&self) -> usize {
        self.coeffs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.coeffs.is_empty()
    }

    /// Coefficients listed against `modes`.
    pub fn to_dense(&self, modes: &[MultiIndex]) -> Vec<Complex64> {
        modes.iter().map(|k| self.coeff(k)).collect()
    }

    /// Indices with a nonzero coefficient.
    pub fn support(&self) -> Vec<MultiIndex> {
        self.coeffs.iter().filter(|(_, c)| c.norm_sqr() > 0.0).map(|(k, _)| k.clone()).collect()
    }

    pub fn norm_sq(&self) -> f64 {
        self.coeffs.values().map(Complex64::norm_sqr).sum()
    }

    /// `L²` norm over the cell, by orthonormality.
    pub fn norm(&self) -> f64 {
        self.norm_sq().sqrt()
    }

    /// `⟨self, other⟩`, antilinear in `self`.
    pub fn inner(&self, other: &ModeVector) -> Result<Complex64> {
        self.same_basis(other)?;
        Ok(self.coeffs.iter().map(|(k, c)| c.conj() * other.coeff(k)).sum())
    }

    fn same_basis(&self, other: &ModeVector) -> Result<()> {
        if self.basis != other.basis {
            return Err(Error::invalid("mode vectors live in different bases"));
        }
        Ok(())
    }

    pub fn scaled(&self, s: Complex64) -> ModeVector {
        self.map(|_, c| c * s)
    }

    pub fn add(&self, other: &ModeVector) -> Result<ModeVector> {
        self.same_basis(other)?;
        let mut coeffs = self.coeffs.clone();
        for (k, c) in &other.coeffs {
            *coeffs.entry(k.clone()).or_insert(ZERO) += c;
        }
        Ok(ModeVector { basis: self.basis, coeffs })
    }

    fn map(&self, f: impl Fn(&[i64], Complex64) -> Complex64) -> ModeVector {
        let coeffs = self.coeffs.iter().map(|(k, &c)| (k.clone(), f(k, c))).collect();
        ModeVector { basis: self.basis, coeffs }
    }

    pub fn eigenvalue(&self, k: &[i64]) -> f64 {
        self.basis.eigenvalue_unchecked(k)
    }

    /// Pointwise values at arbitrary points of the closed cell.
    pub fn evaluate(&self, points: &[Vec<f64>]) -> Result<Vec<Complex64>> {
        if let Some(p) = points.iter().find(|p| p.len() != self.basis.d) {
            return Err(Error::invalid(format!("point {p:?} has wrong dimension")));
        }
        Ok(points
            .par_iter()
            .map(|x| {
                self.coeffs
                    .iter()
                    .map(|(k, c)| c * k.iter().zip(x).map(|(&kj, &xj)| self.basis.factor(kj, xj)).product::<Complex64>())
                    .sum()
            })
            .collect())
    }

    /// Values on the tensor grid `axes[0] × ... × axes[d-1]`, row-major.
    pub fn evaluate_grid(&self, axes: &[Vec<f64>]) -> Result<Vec<Complex64>> {
        Ok(self.grid_tensor(axes)?.data)
    }

    pub(crate) fn grid_tensor(&self, axes: &[Vec<f64>]) -> Result<Tensor> {
        let d = self.basis.d;
        if axes.len() != d {
            return Err(Error::invalid("grid has wrong dimension"));
        }
        let shape: Vec<usize> = axes.iter().map(Vec::len).collect();
        if self.coeffs.is_empty() {
            return Ok(Tensor::zeros(shape));
        }
        // Coefficients as a dense tensor over the per-axis index values.
        let values: Vec<Vec<i64>> = (0..d)
            .map(|j| self.coeffs.keys().map(|k| k[j]).collect::<BTreeSet<_>>().into_iter().collect())
            .collect();
        let mut t = Tensor::zeros(values.iter().map(Vec::len).collect());
        for (k, c) in &self.coeffs {
            let pos: Vec<usize> = (0..d).map(|j| values[j].binary_search(&k[j]).expect("present")).collect();
            let i = t.flat_index(&pos);
            t.data[i] += c;
        }
        for j in 0..d {
            let mat: Vec<Complex64> = axes[j]
                .iter()
                .flat_map(|&x| values[j].iter().map(move |&kj| (kj, x)))
                .map(|(kj, x)| self.basis.factor(kj, x))
                .collect();
            t = t.contract_axis(j, &mat, axes[j].len());
        }
        Ok(t)
    }

    /// `π_E f`: keeps the modes with `λ_k <= E`.
    pub fn project_below(&self, e: f64) -> ModeVector {
        let coeffs = self
            .coeffs
            .iter()
            .filter(|(k, _)| self.eigenvalue(k) <= e)
            .map(|(k, &c)| (k.clone(), c))
            .collect();
        ModeVector { basis: self.basis, coeffs }
    }

    /// `(1 - π_E) f`.
    pub fn project_above(&self, e: f64) -> ModeVector {
        let coeffs = self
            .coeffs
            .iter()
            .filter(|(k, _)| self.eigenvalue(k) > e)
            .map(|(k, &c)| (k.clone(), c))
            .collect();
        ModeVector { basis: self.basis, coeffs }
    }

    /// `e^{tΔ} f`.
    pub fn heat(&self, t: f64) -> Result<ModeVector> {
        if !(t >= 0.0) {
            return Err(Error::invalid(format!("heat semigroup needs t >= 0, got {t}")));
        }
        Ok(self.map(|k, c| c * (-self.basis.eigenvalue_unchecked(k) * t).exp()))
    }

    /// `‖f‖_{L²(S ∩ cell)}` by the midpoint rule on an `n^d` grid.
    pub fn restricted_norm(&self, s: &BoxUnionSet, resolution: Option<usize>) -> Result<f64> {
        let d = self.basis.d;
        if s.dim() != d {
            return Err(Error::invalid("set and basis dimensions differ"));
        }
        let n = resolution.unwrap_or_else(|| default_resolution(d));
        let cell = self.basis.cell();
        let raster = rasterize(s, Some(&cell), &vec![n; d])?;
        if raster.count() == 0 {
            return Ok(0.0);
        }
        let axes: Vec<Vec<f64>> = (0..d).map(|j| raster.centers(j)).collect();
        let values = self.grid_tensor(&axes)?.data;
        let sum: f64 = values.iter().zip(&raster.cells).filter(|(_, &inside)| inside).map(|(v, _)| v.norm_sqr()).sum();
        Ok((sum * raster.cell_volume()).sqrt())
    }

    /// Odd (Dirichlet) or even (Neumann) reflection to the periodic basis on
    /// `(0, 4πL)^d`. The result satisfies `‖f̃‖² = 2^d ‖f‖²` and agrees with
    /// `f` on the original cell.
    pub fn extend_to_double_torus(&self) -> Result<ModeVector> {
        let bc = self.basis.bc;
        if bc == BoundaryCondition::Periodic {
            return Err(Error::invalid("periodic functions need no extension"));
        }
        let d = self.basis.d;
        let target = SpectralBasis::new(d, 2.0 * self.basis.l, BoundaryCondition::Periodic)?;
        let mut out = BTreeMap::new();
        for (k, &c) in &self.coeffs {
            // every sign pattern of the nonzero components
            let nz: Vec<usize> = (0..d).filter(|&j| k[j] != 0).collect();
            let z = d - nz.len();
            for mask in 0u32..(1 << nz.len()) {
                let mut kt = k.clone();
                let mut negatives = 0;
                for (bit, &j) in nz.iter().enumerate() {
                    if mask >> bit & 1 == 1 {
                        kt[j] = -kt[j];
                        negatives += 1;
                    }
                }
                let factor = match bc {
                    // (-i)^d ∏ sgn(k̃_j)
                    BoundaryCondition::Dirichlet => {
                        let sign = if negatives % 2 == 0 { 1.0 } else { -1.0 };
                        Complex64::new(0.0, -1.0).powu(d as u32) * sign
                    }
                    _ => Complex64::new(2f64.powf(z as f64 / 2.0), 0.0),
                };
                *out.entry(kt).or_insert(ZERO) += c * factor;
            }
        }
        Ok(ModeVector { basis: target, coeffs: out })
    }

    /// Compares `‖(1-π_E) e^{tΔ} f‖ / ‖f‖` with `e^{-tE}`.
    pub fn dissipation_check(&self, e: f64, t: f64) -> Result<DissipationReport> {
        if !(t > 0.0) || !(e >= 0.0) {
            return Err(Error::invalid(format!("dissipation check needs t > 0 and E >= 0, got t={t}, E={e}")));
        }
        let norm = self.norm();
        if norm == 0.0 {
            return Err(Error::invalid("dissipation check of the zero function"));
        }
        let lhs = self.heat(t)?.project_above(e).norm() / norm;
        let rhs = (-t * e).exp();
        Ok(DissipationReport { e, t, lhs, rhs, holds: lhs <= rhs * (1.0 + 1e-14) })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DissipationReport {
    #[serde(rename = "E")]
    pub e: f64,
    pub t: f64,
    pub lhs: f64,
    pub rhs: f64,
    pub holds: bool,
}

/// Random vector over the modes with `λ_k <= e`, each coefficient present
/// with probability `density`. Dirichlet and Neumann coefficients are real.
pub fn random_mode_vector<R: Rng + ?Sized>(rng: &mut R, basis: SpectralBasis, e: f64, density: f64) -> ModeVector {
    let modes = basis.modes_below(e);
    let mut coeffs = BTreeMap::new();
    for k in modes {
        if rng.random::<f64>() < density {
            let re = rng.random_range(-1.0..1.0);
            let im = if basis.bc == BoundaryCondition::Periodic { rng.random_range(-1.0..1.0) } else { 0.0 };
            coeffs.insert(k, Complex64::new(re, im));
        }
    }
    if coeffs.is_empty() {
        let k = vec![if basis.bc == BoundaryCondition::Dirichlet { 1 } else { 0 }; basis.d];
        coeffs.insert(k, Complex64::new(1.0, 0.0));
    }
    ModeVector { basis, coeffs }
}

/// How `∫_ω` is evaluated in [`mass_matrix`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum MassQuadrature {
    /// Closed-form integrals over the boxes of `ω`.
    Exact,
    /// Midpoint rule on the rasterised indicator.
    Midpoint { resolution: usize },
}

impl Default for MassQuadrature {
    fn default() -> Self {
        MassQuadrature::Exact
    }
}

/// One-dimensional product `conj(φ_a) φ_b` as a combination of at most two
/// base functions `g_m`.
fn pair_terms(basis: &SpectralBasis, a: i64, b: i64) -> [(f64, i64); 2] {
    let l = basis.l;
    match basis.bc {
        BoundaryCondition::Periodic => [(1.0 / (2.0 * PI * l), b - a), (0.0, 0)],
        BoundaryCondition::Dirichlet => {
            let c = 1.0 / (2.0 * PI * l);
            [(c, (a - b).abs()), (-c, a + b)]
        }
        BoundaryCondition::Neumann => {
            let n = |k: i64| if k == 0 { 1.0 / (2.0 * PI * l).sqrt() } else { 1.0 / (PI * l).sqrt() };
            let c = 0.5 * n(a) * n(b);
            [(c, (a - b).abs()), (c, a + b)]
        }
    }
}

/// Base function `g_m` on one axis.
fn base_function(basis: &SpectralBasis, m: i64, x: f64) -> Complex64 {
    match basis.bc {
        BoundaryCondition::Periodic => Complex64::from_polar(1.0, m as f64 * x / basis.l),
        _ => Complex64::new((m as f64 * x / (2.0 * basis.l)).cos(), 0.0),
    }
}

/// `∫_lo^hi g_m`.
fn base_integral(basis: &SpectralBasis, m: i64, lo: f64, hi: f64) -> Complex64 {
    if m == 0 {
        return Complex64::new(hi - lo, 0.0);
    }
    let l = basis.l;
    match basis.bc {
        BoundaryCondition::Periodic => {
            let w = m as f64 / l;
            (Complex64::from_polar(1.0, w * hi) - Complex64::from_polar(1.0, w * lo)) / Complex64::new(0.0, w)
        }
        _ => {
            let w = m as f64 / (2.0 * l);
            Complex64::new(((w * hi).sin() - (w * lo).sin()) / w, 0.0)
        }
    }
}

/// `B_kl = ⟨φ_k, χ_ω φ_l⟩` over `ω = S ∩ cell`, for the listed modes.
pub fn mass_matrix(
    basis: &SpectralBasis,
    modes: &[MultiIndex],
    s: &BoxUnionSet,
    quad: MassQuadrature,
) -> Result<DMatrix<Complex64>> {
    let d = basis.d;
    if modes.is_empty() {
        return Err(Error::InvalidTruncation("no modes below the truncation threshold".into()));
    }
    if s.dim() != d {
        return Err(Error::invalid("set and basis dimensions differ"));
    }
    for k in modes {
        basis.check_index(k)?;
    }
    let kmax: Vec<i64> = (0..d).map(|j| modes.iter().map(|k| k[j].abs()).max().unwrap_or(0)).collect();
    let periodic = basis.bc == BoundaryCondition::Periodic;
    // m ranges over -2K..=2K (periodic) or 0..=2K
    let offset: Vec<i64> = kmax.iter().map(|&k| if periodic { 2 * k } else { 0 }).collect();
    let m_values: Vec<Vec<i64>> = (0..d).map(|j| (-offset[j]..=2 * kmax[j]).collect()).collect();
    let shape: Vec<usize> = m_values.iter().map(Vec::len).collect();

    let cell = basis.cell();
    let weights = match quad {
        MassQuadrature::Exact => {
            let boxes = s.boxes_in_window(&cell);
            let mut w = Tensor::zeros(shape.clone());
            for b in &boxes {
                let per_axis: Vec<Vec<Complex64>> = (0..d)
                    .map(|j| m_values[j].iter().map(|&m| base_integral(basis, m, b.lo()[j], b.hi()[j])).collect())
                    .collect();
                let mut flat = 0;
                for_each_index(&shape, |idx| {
                    w.data[flat] += idx.iter().enumerate().map(|(j, &i)| per_axis[j][i]).product::<Complex64>();
                    flat += 1;
                });
            }
            w
        }
        MassQuadrature::Midpoint { resolution } => {
            let raster = rasterize(s, Some(&cell), &vec![resolution; d])?;
            let mut t = Tensor::from_real(
                raster.shape.clone(),
                raster.cells.iter().map(|&c| if c { raster.cell_volume() } else { 0.0 }),
            );
            for j in 0..d {
                let centers = raster.centers(j);
                let mat: Vec<Complex64> = m_values[j]
                    .iter()
                    .flat_map(|&m| centers.iter().map(move |&x| (m, x)))
                    .map(|(m, x)| base_function(basis, m, x))
                    .collect();
                t = t.contract_axis(j, &mat, m_values[j].len());
            }
            t
        }
    };

    let n = modes.len();
    let rows: Vec<Vec<Complex64>> = (0..n)
        .into_par_iter()
        .map(|r| {
            let mut row = vec![ZERO; n];
            let mut pos = vec![0usize; d];
            let terms_per_axis: usize = if periodic { 1 } else { 2 };
            for (c, l) in modes.iter().enumerate() {
                let terms: Vec<[(f64, i64); 2]> = (0..d).map(|j| pair_terms(basis, modes[r][j], l[j])).collect();
                let mut acc = ZERO;
                for mask in 0usize..(terms_per_axis.pow(d as u32)) {
                    let mut coef = 1.0;
                    let mut m = mask;
                    for j in 0..d {
                        let (cj, mj) = terms[j][m % terms_per_axis];
                        m /= terms_per_axis;
                        coef *= cj;
                        pos[j] = (mj + offset[j]) as usize;
                    }
                    acc += weights.data[weights.flat_index(&pos)] * coef;
                }
                row[c] = acc;
            }
            row
        })
        .collect();
    let b = DMatrix::from_fn(n, n, |i, j| rows[i][j]);
    // remove rounding asymmetry
    Ok((&b + b.adjoint()) * Complex64::new(0.5, 0.0))
}
