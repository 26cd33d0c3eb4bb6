//! Numerical Logvinenko–Sereda checks on the cell `(0, 2πL)^d`.
//!
//! For a bandlimited `f` and a `(γ, a)`-thick `S` the ratio
//! `‖f‖ / ‖f‖_{L²(S ∩ cell)}` is compared with `(K1^d / γ)^{K1 (a·b + d)}`,
//! where `b` holds the side lengths of the smallest frequency box containing
//! the spectrum. Dirichlet and Neumann data are measured through their
//! reflection to the doubled torus, which is `(γ / 2^d, 2a)`-thick and has
//! spectrum in `[-max k / 2L, max k / 2L]`.

use nalgebra::DMatrix;
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::constants::{ls_bound, DEFAULT_K1};
use crate::error::{Error, Result};
use crate::geometry::{thickness_gamma, AxisBox, BoxUnionSet, ThicknessOptions};
use crate::spectral::{
    default_resolution, mass_matrix, BoundaryCondition, MassQuadrature, ModeVector, MultiIndex, SpectralBasis,
};

/// Seed of the built-in verification corpus.
pub const CORPUS_SEED: u64 = 0x4c53_2d31;
pub const CORPUS_SIZE: usize = 200;
/// Largest `|J|` handled by a direct eigensolve in [`adversarial_search`].
pub const EIGENSOLVE_LIMIT: usize = 512;
const MAX_DOUBLINGS: usize = 3;

#[derive(Debug, Clone)]
pub struct LsInstance {
    pub f: ModeVector,
    pub set: BoxUnionSet,
    pub gamma: f64,
    pub a: Vec<f64>,
}

/// On-disk instance; `gamma` is computed from the set when omitted.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LsInstanceFile {
    pub f: ModeVector,
    pub set: BoxUnionSet,
    pub a: Vec<f64>,
    #[serde(default)]
    pub gamma: Option<f64>,
}

impl LsInstance {
    /// Checks the hypotheses and certifies `γ` for the given `a`.
    pub fn new(f: ModeVector, set: BoxUnionSet, a: Vec<f64>) -> Result<Self> {
        let cert = thickness_gamma(&set, &a, &ThicknessOptions::default())?;
        Self::with_gamma(f, set, a, cert.gamma_lower())
    }

    pub fn with_gamma(f: ModeVector, set: BoxUnionSet, a: Vec<f64>, gamma: f64) -> Result<Self> {
        let basis = f.basis();
        if set.dim() != basis.d || a.len() != basis.d {
            return Err(Error::invalid("instance dimensions disagree"));
        }
        if !(gamma > 0.0 && gamma <= 1.0 + 1e-12) {
            return Err(Error::HypothesisViolation(format!("set is not thick: gamma = {gamma}")));
        }
        if let Some(aj) = a.iter().find(|&&aj| aj > basis.side() * (1.0 + 1e-12)) {
            return Err(Error::HypothesisViolation(format!("a_j = {aj} exceeds 2πL = {}", basis.side())));
        }
        if f.norm() == 0.0 {
            return Err(Error::invalid("zero function"));
        }
        Ok(LsInstance { f, set, gamma: gamma.min(1.0), a })
    }

    pub fn from_file(file: LsInstanceFile) -> Result<Self> {
        match file.gamma {
            Some(g) => Self::with_gamma(file.f, file.set, file.a, g),
            None => Self::new(file.f, file.set, file.a),
        }
    }

    /// Side lengths of the smallest frequency box around the spectrum.
    pub fn b(&self) -> Vec<f64> {
        spectrum_box(self.f.basis(), &self.f.support())
    }

    /// `(γ, a, b)` entering the bound, after reflection for Dirichlet and
    /// Neumann data.
    pub fn bound_parameters(&self) -> (f64, Vec<f64>) {
        let d = self.f.basis().d as i32;
        match self.f.basis().bc {
            BoundaryCondition::Periodic => (self.gamma, self.a.clone()),
            _ => (self.gamma / 2f64.powi(d), self.a.iter().map(|v| 2.0 * v).collect()),
        }
    }

    /// `ln` of the unified bound `(K1^d / γ)^{K1 (a·b + d)}`.
    pub fn ln_bound(&self, k1: f64) -> Result<f64> {
        let (gamma, a) = self.bound_parameters();
        Ok(ls_bound(gamma, &a, &self.b(), k1, std::f64::consts::E, self.f.basis().bc.domain_kind())?.unified.ln)
    }
}

/// Frequency box side lengths for a list of modes.
pub fn spectrum_box(basis: &SpectralBasis, modes: &[MultiIndex]) -> Vec<f64> {
    (0..basis.d)
        .map(|j| {
            let ks = modes.iter().map(|k| k[j]);
            let (lo, hi) = ks.fold((i64::MAX, i64::MIN), |(lo, hi), v| (lo.min(v), hi.max(v)));
            if lo > hi {
                return 0.0;
            }
            match basis.bc {
                BoundaryCondition::Periodic => (hi - lo) as f64 / basis.l,
                // spectrum of the reflection is [-hi, hi] / 2L
                _ => hi as f64 / basis.l,
            }
        })
        .collect()
}

/// `‖f‖ / ‖f‖_{L²(S ∩ cell)}` with the restricted norm on an `n^d` grid.
pub fn ls_ratio(inst: &LsInstance, resolution: Option<usize>) -> Result<f64> {
    let restricted = inst.f.restricted_norm(&inst.set, resolution)?;
    if !(restricted > 0.0) {
        return Err(Error::IndeterminateRatio(format!(
            "restricted norm vanishes at resolution {}",
            resolution.unwrap_or_else(|| default_resolution(inst.f.basis().d))
        )));
    }
    Ok(inst.f.norm() / restricted)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LsReport {
    pub ratio: f64,
    pub ln_ratio: f64,
    pub ln_bound: f64,
    pub margin: f64,
    pub pass: bool,
    pub resolution: usize,
    pub gamma: f64,
    pub a: Vec<f64>,
    pub b: Vec<f64>,
    #[serde(rename = "K1")]
    pub k1: f64,
}

/// Compares `ln ratio` with the log bound. A failure is re-examined at up to
/// three successively doubled resolutions before it is reported.
pub fn verify_ls(inst: &LsInstance, k1: f64, resolution: Option<usize>) -> Result<LsReport> {
    let ln_bound = inst.ln_bound(k1)?;
    let mut n = resolution.unwrap_or_else(|| default_resolution(inst.f.basis().d));
    let mut attempt = 0;
    loop {
        let ratio = ls_ratio(inst, Some(n))?;
        let ln_ratio = ratio.ln();
        let margin = ln_bound - ln_ratio;
        let pass = margin >= 0.0;
        if pass || attempt == MAX_DOUBLINGS {
            let (gamma, a) = inst.bound_parameters();
            return Ok(LsReport { ratio, ln_ratio, ln_bound, margin, pass, resolution: n, gamma, a, b: inst.b(), k1 });
        }
        attempt += 1;
        n *= 2;
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SearchMethod {
    /// Eigensolve up to [`EIGENSOLVE_LIMIT`] modes, coordinate ascent above.
    Auto,
    Eigensolve,
    CoordinateAscent,
}

#[derive(Debug, Clone, Serialize)]
pub struct SearchReport {
    pub max_ratio: f64,
    pub worst: ModeVector,
    pub restart_ratios: Vec<f64>,
    pub method: SearchMethod,
    pub modes: usize,
}

/// Empirical lower bound on the best constant over functions with spectrum
/// in `modes`: `max_c ‖c‖ / sqrt(c^H B c)` with `B` the mass matrix of
/// `S ∩ cell`.
pub fn adversarial_search(
    set: &BoxUnionSet,
    basis: &SpectralBasis,
    modes: &[MultiIndex],
    trials: usize,
    steps: usize,
    seed: u64,
    method: SearchMethod,
) -> Result<SearchReport> {
    if trials == 0 || steps == 0 {
        return Err(Error::invalid("trials and steps must be at least 1"));
    }
    let b = mass_matrix(basis, modes, set, MassQuadrature::Exact)?;
    let n = modes.len();
    let method = match method {
        SearchMethod::Auto if n <= EIGENSOLVE_LIMIT => SearchMethod::Eigensolve,
        SearchMethod::Auto => SearchMethod::CoordinateAscent,
        m => m,
    };
    let starts: Vec<Vec<Complex64>> = {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let real = basis.bc != BoundaryCondition::Periodic;
        (0..trials)
            .map(|_| {
                (0..n)
                    .map(|_| {
                        let im = if real { 0.0 } else { rng.random_range(-1.0..1.0) };
                        Complex64::new(rng.random_range(-1.0..1.0), im)
                    })
                    .collect()
            })
            .collect()
    };
    let restart_ratios: Vec<f64> = starts.iter().map(|c| rayleigh(&b, c).map(ratio_of)).collect::<Result<_>>()?;

    let (best_q, best_c) = match method {
        SearchMethod::Eigensolve => {
            let eig = b.clone().symmetric_eigen();
            let (i, &q) = eig
                .eigenvalues
                .iter()
                .enumerate()
                .min_by(|x, y| x.1.total_cmp(y.1))
                .expect("non-empty");
            (q, eig.eigenvectors.column(i).iter().copied().collect::<Vec<_>>())
        }
        _ => {
            let results: Vec<(f64, Vec<Complex64>)> =
                starts.into_par_iter().map(|c| coordinate_descent(&b, c, steps)).collect::<Result<_>>()?;
            results.into_iter().min_by(|x, y| x.0.total_cmp(&y.0)).expect("trials >= 1")
        }
    };
    if !(best_q > 0.0) {
        return Err(Error::IndeterminateRatio(format!("restricted mass has eigenvalue {best_q:e}")));
    }
    let max_ratio = restart_ratios.iter().cloned().fold(ratio_of(best_q), f64::max);
    Ok(SearchReport {
        max_ratio,
        worst: ModeVector::from_dense(*basis, modes, &best_c)?,
        restart_ratios,
        method,
        modes: n,
    })
}

fn ratio_of(q: f64) -> f64 {
    if q > 0.0 {
        q.powf(-0.5)
    } else {
        f64::INFINITY
    }
}

/// `c^H B c / c^H c`.
fn rayleigh(b: &DMatrix<Complex64>, c: &[Complex64]) -> Result<f64> {
    let v = nalgebra::DVector::from_column_slice(c);
    let den = v.norm_squared();
    if den == 0.0 {
        return Err(Error::invalid("zero start vector"));
    }
    Ok(v.dotc(&(b * &v)).re / den)
}

/// Minimises the Rayleigh quotient by exact minimisation over
/// `span{c, e_i}` for each coordinate in turn.
fn coordinate_descent(b: &DMatrix<Complex64>, c: Vec<Complex64>, sweeps: usize) -> Result<(f64, Vec<Complex64>)> {
    let n = c.len();
    let mut c = nalgebra::DVector::from_vec(c);
    c /= Complex64::new(c.norm(), 0.0);
    let mut bc = b * &c;
    for _ in 0..sweeps {
        for i in 0..n {
            let b11 = c.dotc(&bc).re;
            let b12 = bc[i].conj();
            let b22 = b[(i, i)].re;
            let g11 = 1.0;
            let g12 = c[i].conj();
            let det_g = g11 - g12.norm_sqr();
            if det_g <= 1e-12 {
                continue;
            }
            // det(B2 - μ G2) = 0
            let qa = det_g;
            let qb = -(b11 + b22 * g11) + 2.0 * (b12 * g12.conj()).re;
            let qc = b11 * b22 - b12.norm_sqr();
            let disc = (qb * qb - 4.0 * qa * qc).max(0.0).sqrt();
            let mu = if qb > 0.0 { (-qb - disc) / (2.0 * qa) } else { 2.0 * qc / (-qb + disc) };
            if !(mu < b11) {
                continue;
            }
            let r1 = (Complex64::new(b11 - mu * g11, 0.0), b12 - g12 * mu);
            let (x0, x1) = if r1.0.norm() + r1.1.norm() > 0.0 {
                (-r1.1, r1.0)
            } else {
                let r2 = (b12.conj() - g12.conj() * mu, Complex64::new(b22 - mu, 0.0));
                (r2.1, -r2.0)
            };
            let mut next = &c * x0;
            next[i] += x1;
            let nn = next.norm();
            if !(nn > 0.0) {
                continue;
            }
            let mut next_bc = &bc * x0 + b.column(i) * x1;
            next /= Complex64::new(nn, 0.0);
            next_bc /= Complex64::new(nn, 0.0);
            if next.dotc(&next_bc).re <= b11 {
                c = next;
                bc = next_bc;
            }
        }
    }
    let q = c.dotc(&bc).re;
    Ok((q, c.iter().copied().collect()))
}

/// Periodic set of period `a` holding one box covering a fraction `γ` of
/// each period cell, hence exactly `(γ, a)`-thick.
pub fn fraction_set<R: Rng + ?Sized>(rng: &mut R, gamma: f64, a: &[f64]) -> Result<BoxUnionSet> {
    let d = a.len();
    let mut fractions = vec![1.0; d];
    let mut remaining = gamma;
    for j in 0..d {
        fractions[j] = if j + 1 == d { remaining } else { rng.random_range(remaining..=1.0) };
        remaining /= fractions[j];
    }
    let corner: Vec<f64> = a.iter().map(|&p| rng.random_range(0.0..p)).collect();
    let sides: Vec<f64> = a.iter().zip(&fractions).map(|(p, f)| p * f).collect();
    BoxUnionSet::new(d, vec![AxisBox::new(corner, sides)?], Some(a.to_vec()))
}

/// Seeded instances over `d ∈ {1, 2}`, `γ ∈ {1/8, 1/4, 1/2}`, all boundary
/// conditions and spectra of `1` up to `33^d` modes.
pub fn builtin_corpus() -> Result<Vec<LsInstance>> {
    let mut rng = ChaCha8Rng::seed_from_u64(CORPUS_SEED);
    let gammas = [0.125, 0.25, 0.5];
    let bcs = [BoundaryCondition::Periodic, BoundaryCondition::Dirichlet, BoundaryCondition::Neumann];
    let ls = [0.5, 1.0, 2.0];
    (0..CORPUS_SIZE)
        .map(|i| {
            let d = 1 + i % 2;
            let gamma = gammas[(i / 2) % 3];
            let bc = bcs[(i / 6) % 3];
            let l = ls[rng.random_range(0..3)];
            let basis = SpectralBasis::new(d, l, bc)?;
            let a: Vec<f64> = (0..d).map(|_| rng.random_range(0.5..=basis.side())).collect();
            let set = fraction_set(&mut rng, gamma, &a)?;
            // a few instances use the full 33^d box
            let count = if i % 40 == 39 { 33 } else { rng.random_range(1..=if d == 1 { 33 } else { 9 }) };
            let offsets: Vec<i64> = (0..d)
                .map(|_| match bc {
                    BoundaryCondition::Periodic => rng.random_range(-16..=16 - (count as i64 - 1).min(32)),
                    BoundaryCondition::Dirichlet => rng.random_range(1..=4),
                    BoundaryCondition::Neumann => rng.random_range(0..=4),
                })
                .collect();
            let mut coeffs = Vec::new();
            crate::tensor::for_each_index(&vec![count; d], |idx| {
                let k: MultiIndex = idx.iter().zip(&offsets).map(|(&i, &o)| o + i as i64).collect();
                let im = if bc == BoundaryCondition::Periodic { rng.random_range(-1.0..1.0) } else { 0.0 };
                coeffs.push((k, Complex64::new(rng.random_range(-1.0..1.0), im)));
            });
            let f = ModeVector::new(basis, coeffs)?;
            LsInstance::with_gamma(f, set, a, gamma)
        })
        .collect()
}

/// Runs [`verify_ls`] over the corpus with the default `K1`.
pub fn verify_corpus(corpus: &[LsInstance], k1: Option<f64>) -> Result<Vec<LsReport>> {
    let k1 = k1.unwrap_or(DEFAULT_K1);
    corpus.par_iter().map(|inst| verify_ls(inst, k1, None)).collect()
}
