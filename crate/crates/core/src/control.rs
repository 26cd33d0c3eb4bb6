//! Minimal-norm null controls through the observability Gramian.
//!
//! With modes `k` below `E_max`, eigenvalues `λ_k` and control mass matrix
//! `B_kl = ⟨φ_k, χ_ω φ_l⟩`, the Gramian is
//! `Λ_kl = B_kl (1 - e^{-(λ_k+λ_l)T}) / (λ_k+λ_l)`. The adjoint seed solves
//! `(Λ + εI) φ_T = -e^{-TΛ} u0` and the control is `v(s) = χ_ω e^{-(T-s)Λ} φ_T`.

use nalgebra::{Cholesky, DMatrix, DVector};
use num_complex::Complex64;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::BoxUnionSet;
use crate::spectral::{mass_matrix, BoundaryCondition, MassQuadrature, ModeVector, MultiIndex, SpectralBasis};

pub const DEFAULT_EPSILON: f64 = 1e-8;
pub const DEFAULT_TIME_STEPS: usize = 256;
/// Above this many modes the regularised system is solved iteratively.
pub const DIRECT_SOLVE_LIMIT: usize = 2048;

type CMatrix = DMatrix<Complex64>;
type CVector = DVector<Complex64>;

fn cplx(re: f64) -> Complex64 {
    Complex64::new(re, 0.0)
}

/// `(1 - e^{-sT}) / s`, equal to `T` at `s = 0`.
fn phi1(s: f64, t: f64) -> f64 {
    if s == 0.0 {
        t
    } else {
        -(-s * t).exp_m1() / s
    }
}

/// Control mass matrix over the modes with `λ_k <= E_max`.
pub fn mixing_matrix(
    basis: &SpectralBasis,
    omega: &BoxUnionSet,
    e_max: f64,
    quad: MassQuadrature,
) -> Result<(Vec<MultiIndex>, CMatrix)> {
    let modes = basis.modes_below(e_max);
    if modes.is_empty() {
        return Err(Error::InvalidTruncation(format!("no modes with eigenvalue <= {e_max}")));
    }
    let b = mass_matrix(basis, &modes, omega, quad)?;
    Ok((modes, b))
}

/// `Λ_kl = B_kl (1 - e^{-(λ_k+λ_l)T}) / (λ_k+λ_l)`.
pub fn gramian(b: &CMatrix, eigenvalues: &[f64], t: f64) -> Result<CMatrix> {
    let n = eigenvalues.len();
    if b.nrows() != n || b.ncols() != n {
        return Err(Error::invalid(format!(
            "mass matrix is {}x{} but {} eigenvalues were given",
            b.nrows(),
            b.ncols(),
            n
        )));
    }
    if !(t >= 0.0) {
        return Err(Error::invalid(format!("time must be non-negative, got {t}")));
    }
    Ok(CMatrix::from_fn(n, n, |i, j| b[(i, j)] * phi1(eigenvalues[i] + eigenvalues[j], t)))
}

#[derive(Debug, Clone)]
pub struct ControlProblem {
    pub basis: SpectralBasis,
    pub omega: BoxUnionSet,
    pub t: f64,
    pub u0: ModeVector,
    pub e_max: f64,
    pub epsilon: f64,
    pub time_steps: usize,
    pub quadrature: MassQuadrature,
}

impl ControlProblem {
    pub fn new(basis: SpectralBasis, omega: BoxUnionSet, t: f64, u0: ModeVector, e_max: f64) -> Result<Self> {
        let p = ControlProblem {
            basis,
            omega,
            t,
            u0,
            e_max,
            epsilon: DEFAULT_EPSILON,
            time_steps: DEFAULT_TIME_STEPS,
            quadrature: MassQuadrature::Exact,
        };
        p.validate()?;
        Ok(p)
    }

    pub fn with_epsilon(mut self, epsilon: f64) -> Result<Self> {
        self.epsilon = epsilon;
        self.validate()?;
        Ok(self)
    }

    pub fn with_time_steps(mut self, n: usize) -> Result<Self> {
        self.time_steps = n;
        self.validate()?;
        Ok(self)
    }

    pub fn with_quadrature(mut self, quad: MassQuadrature) -> Self {
        self.quadrature = quad;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.t > 0.0 && self.t.is_finite()) {
            return Err(Error::invalid(format!("T must be positive, got {}", self.t)));
        }
        if !(self.epsilon > 0.0) {
            return Err(Error::invalid(format!("epsilon must be positive, got {}", self.epsilon)));
        }
        if self.time_steps == 0 {
            return Err(Error::invalid("time_steps must be positive"));
        }
        if *self.u0.basis() != self.basis {
            return Err(Error::invalid("initial datum is expressed in a different basis"));
        }
        if self.omega.dim() != self.basis.d {
            return Err(Error::invalid("control set and basis dimensions differ"));
        }
        if let Some(k) = self.u0.support().into_iter().find(|k| self.u0.eigenvalue(k) > self.e_max) {
            return Err(Error::InvalidTruncation(format!(
                "initial datum has mode {k:?} above E_max = {}",
                self.e_max
            )));
        }
        let cell = self.basis.cell();
        let inside: f64 = self.omega.boxes_in_window(&cell).iter().map(|b| b.volume()).sum();
        if !(inside > 0.0) {
            return Err(Error::invalid("control set has zero measure in the cell"));
        }
        Ok(())
    }

    pub fn times(&self) -> Vec<f64> {
        let n = self.time_steps;
        (0..=n).map(|i| self.t * i as f64 / n as f64).collect()
    }

    fn assemble(&self) -> Result<Assembled> {
        self.validate()?;
        let (modes, b) = mixing_matrix(&self.basis, &self.omega, self.e_max, self.quadrature)?;
        let lambdas: Vec<f64> = modes.iter().map(|k| self.basis.eigenvalue(k)).collect::<Result<_>>()?;
        Ok(Assembled { modes, lambdas, b })
    }
}

struct Assembled {
    modes: Vec<MultiIndex>,
    lambdas: Vec<f64>,
    b: CMatrix,
}

impl Assembled {
    fn decay(&self, v: &CVector, t: f64) -> CVector {
        CVector::from_iterator(v.len(), v.iter().zip(&self.lambdas).map(|(c, l)| c * (-l * t).exp()))
    }

    fn omega_norm(&self, v: &CVector) -> f64 {
        (v.dotc(&(&self.b * v))).re.max(0.0).sqrt()
    }

    fn to_mode(&self, basis: SpectralBasis, v: &CVector) -> Result<ModeVector> {
        ModeVector::from_dense(basis, &self.modes, v.as_slice())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrajectoryRow {
    pub t: f64,
    pub u_norm: f64,
    /// `‖v(t)‖_{L²(ω)}`.
    pub v_norm: f64,
}

#[derive(Debug, Clone)]
pub struct Trajectory {
    pub rows: Vec<TrajectoryRow>,
    pub terminal: ModeVector,
    pub terminal_norm: f64,
}

#[derive(Debug, Clone)]
pub struct ControlSolution {
    pub phi_t: ModeVector,
    /// Adjoint states `e^{-(T-t_i)Λ} φ_T` at `t_i = iT/n`; the control is
    /// their restriction to `ω`.
    pub control: Vec<ModeVector>,
    pub times: Vec<f64>,
    /// `‖v‖_{L²([0,T]×ω)}`, integrated exactly in time.
    pub control_norm: f64,
    /// Same norm by the composite midpoint rule on the output grid.
    pub control_norm_midpoint: f64,
    pub terminal_norm: f64,
    pub terminal: ModeVector,
    pub initial_norm: f64,
    pub cost_ratio: f64,
    /// `‖(Λ + εI) φ_T + e^{-TΛ} u0‖`.
    pub residual: f64,
    pub condition_estimate: f64,
    pub modes: usize,
    pub solver: SolverKind,
    pub trajectory: Vec<TrajectoryRow>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SolverKind {
    Cholesky,
    ConjugateGradient,
}

/// Compact summary of a [`ControlSolution`] for reports.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ControlSummary {
    pub modes: usize,
    pub solver: SolverKind,
    pub control_norm: f64,
    pub control_norm_midpoint: f64,
    pub terminal_norm: f64,
    pub initial_norm: f64,
    pub cost_ratio: f64,
    pub terminal_ratio: f64,
    pub residual: f64,
    pub condition_estimate: f64,
    pub phi_t: ModeVector,
}

impl ControlSolution {
    pub fn summary(&self) -> ControlSummary {
        ControlSummary {
            modes: self.modes,
            solver: self.solver,
            control_norm: self.control_norm,
            control_norm_midpoint: self.control_norm_midpoint,
            terminal_norm: self.terminal_norm,
            initial_norm: self.initial_norm,
            cost_ratio: self.cost_ratio,
            terminal_ratio: self.terminal_ratio(),
            residual: self.residual,
            condition_estimate: self.condition_estimate,
            phi_t: self.phi_t.clone(),
        }
    }

    /// `‖u(T)‖ / ‖u0‖`, zero for zero data.
    pub fn terminal_ratio(&self) -> f64 {
        if self.initial_norm == 0.0 {
            0.0
        } else {
            self.terminal_norm / self.initial_norm
        }
    }
}

pub fn solve_hum(problem: &ControlProblem) -> Result<ControlSolution> {
    let asm = problem.assemble()?;
    let n = asm.modes.len();
    let u0 = CVector::from_vec(problem.u0.to_dense(&asm.modes));
    let g = gramian(&asm.b, &asm.lambdas, problem.t)?;
    let rhs = -asm.decay(&u0, problem.t);

    let mut a = g.clone();
    for i in 0..n {
        a[(i, i)] += cplx(problem.epsilon);
    }
    let (phi, condition_estimate, solver) = if n <= DIRECT_SOLVE_LIMIT {
        let (phi, cond) = cholesky_solve(a.clone(), &rhs, problem.epsilon)?;
        (phi, cond, SolverKind::Cholesky)
    } else {
        let diag: Vec<f64> = (0..n).map(|i| a[(i, i)].re).collect();
        let cond = diag.iter().cloned().fold(0.0, f64::max) / problem.epsilon;
        let phi = pcg(|x| &a * x, &diag, &rhs, 1e-13, 20 * n).map_err(|message| Error::NumericalFailure {
            message,
            condition: cond,
        })?;
        (phi, cond, SolverKind::ConjugateGradient)
    };
    let residual = (&a * &phi - &rhs).norm();

    let times = problem.times();
    let control: Vec<ModeVector> = times
        .iter()
        .map(|&s| asm.to_mode(problem.basis, &asm.decay(&phi, problem.t - s)))
        .collect::<Result<_>>()?;

    let control_norm = phi.dotc(&(&g * &phi)).re.max(0.0).sqrt();
    let h = problem.t / problem.time_steps as f64;
    let midpoint_sq: f64 = (0..problem.time_steps)
        .map(|i| {
            let s = (i as f64 + 0.5) * h;
            asm.omega_norm(&asm.decay(&phi, problem.t - s)).powi(2) * h
        })
        .sum();

    let traj = simulate(&asm, problem, &control)?;
    let initial_norm = problem.u0.norm();
    let cost_ratio = if initial_norm == 0.0 { 0.0 } else { control_norm / initial_norm };
    Ok(ControlSolution {
        phi_t: asm.to_mode(problem.basis, &phi)?,
        control,
        times,
        control_norm,
        control_norm_midpoint: midpoint_sq.sqrt(),
        terminal_norm: traj.terminal_norm,
        terminal: traj.terminal,
        initial_norm,
        cost_ratio,
        residual,
        condition_estimate,
        modes: n,
        solver,
        trajectory: traj.rows,
    })
}

fn cholesky_solve(a: CMatrix, rhs: &CVector, epsilon: f64) -> Result<(CVector, f64)> {
    let scale = a.diagonal().iter().map(|c| c.re).fold(0.0, f64::max);
    match Cholesky::new(a) {
        Some(ch) => {
            let l = ch.l_dirty();
            let piv: Vec<f64> = (0..l.nrows()).map(|i| l[(i, i)].re).collect();
            let max = piv.iter().cloned().fold(0.0, f64::max);
            let min = piv.iter().cloned().fold(f64::INFINITY, f64::min);
            let cond = (max / min).powi(2);
            Ok((ch.solve(rhs), cond))
        }
        None => Err(Error::NumericalFailure {
            message: "regularised Gramian is not numerically positive definite".into(),
            condition: scale / epsilon,
        }),
    }
}

/// Preconditioned conjugate gradients for a Hermitian positive definite
/// operator with a diagonal preconditioner.
pub fn pcg(
    apply: impl Fn(&CVector) -> CVector,
    diag: &[f64],
    rhs: &CVector,
    tol: f64,
    max_iter: usize,
) -> std::result::Result<CVector, String> {
    let n = rhs.len();
    let bnorm = rhs.norm();
    let mut x = CVector::zeros(n);
    if bnorm == 0.0 {
        return Ok(x);
    }
    let precond = |r: &CVector| CVector::from_iterator(n, r.iter().zip(diag).map(|(v, d)| v / *d));
    let mut r = rhs.clone();
    let mut z = precond(&r);
    let mut p = z.clone();
    let mut rz = r.dotc(&z);
    for _ in 0..max_iter {
        let ap = apply(&p);
        let alpha = rz / p.dotc(&ap);
        x += &p * alpha;
        r -= &ap * alpha;
        if r.norm() <= tol * bnorm {
            return Ok(x);
        }
        z = precond(&r);
        let rz_new = r.dotc(&z);
        p = &z + &p * (rz_new / rz);
        rz = rz_new;
    }
    Err(format!("conjugate gradients did not reach relative residual {tol} in {max_iter} iterations"))
}

/// Integrates `u' = Δu + χ_ω v` in coefficient space. On each step the
/// control is held as `v(s) = e^{-(t_{i+1}-s)Λ} v_{i+1}`, which is exact for
/// controls produced by [`solve_hum`].
pub fn simulate_controlled(problem: &ControlProblem, control: &[ModeVector]) -> Result<Trajectory> {
    let asm = problem.assemble()?;
    simulate(&asm, problem, control)
}

fn simulate(asm: &Assembled, problem: &ControlProblem, control: &[ModeVector]) -> Result<Trajectory> {
    let n = problem.time_steps;
    if control.len() != n + 1 {
        return Err(Error::invalid(format!("control has {} samples, time grid has {}", control.len(), n + 1)));
    }
    if control.iter().any(|v| *v.basis() != problem.basis) {
        return Err(Error::invalid("control is expressed in a different basis"));
    }
    let h = problem.t / n as f64;
    let gh = gramian(&asm.b, &asm.lambdas, h)?;
    let mut u = CVector::from_vec(problem.u0.to_dense(&asm.modes));
    let times = problem.times();
    let dense: Vec<CVector> = control.iter().map(|v| CVector::from_vec(v.to_dense(&asm.modes))).collect();
    let mut rows = Vec::with_capacity(n + 1);
    rows.push(TrajectoryRow { t: 0.0, u_norm: u.norm(), v_norm: asm.omega_norm(&dense[0]) });
    for i in 0..n {
        u = asm.decay(&u, h) + &gh * &dense[i + 1];
        rows.push(TrajectoryRow { t: times[i + 1], u_norm: u.norm(), v_norm: asm.omega_norm(&dense[i + 1]) });
    }
    let terminal_norm = u.norm();
    Ok(Trajectory { rows, terminal: asm.to_mode(problem.basis, &u)?, terminal_norm })
}

/// How `∫_0^T ‖e^{tΔ} f‖²_{L²(ω)} dt` is evaluated.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum TimeIntegration {
    /// Closed form through the Gramian.
    Exact,
    /// Composite midpoint rule.
    Midpoint { steps: usize },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ObservabilityReport {
    pub terminal_sq: f64,
    pub observed: f64,
    pub ratio: f64,
    pub ln_ratio: f64,
}

/// `‖e^{TΔ} f‖² / ∫_0^T ‖e^{tΔ} f‖²_{L²(ω)} dt`.
pub fn observability_ratio(
    f: &ModeVector,
    omega: &BoxUnionSet,
    t: f64,
    quad: MassQuadrature,
    time: TimeIntegration,
) -> Result<ObservabilityReport> {
    if !(t > 0.0) {
        return Err(Error::invalid(format!("T must be positive, got {t}")));
    }
    let modes = f.support();
    if modes.is_empty() {
        return Err(Error::invalid("observability ratio of the zero function"));
    }
    let basis = *f.basis();
    let b = mass_matrix(&basis, &modes, omega, quad)?;
    let lambdas: Vec<f64> = modes.iter().map(|k| f.eigenvalue(k)).collect();
    let c = CVector::from_vec(f.to_dense(&modes));
    let terminal_sq: f64 = f.heat(t)?.norm_sq();
    let observed = match time {
        TimeIntegration::Exact => c.dotc(&(gramian(&b, &lambdas, t)? * &c)).re,
        TimeIntegration::Midpoint { steps } => {
            if steps == 0 {
                return Err(Error::invalid("midpoint rule needs at least one step"));
            }
            let h = t / steps as f64;
            (0..steps)
                .map(|i| {
                    let s = (i as f64 + 0.5) * h;
                    let w = CVector::from_iterator(c.len(), c.iter().zip(&lambdas).map(|(v, l)| v * (-l * s).exp()));
                    w.dotc(&(&b * &w)).re * h
                })
                .sum()
        }
    };
    if !(observed > 0.0) {
        return Err(Error::IndeterminateRatio(format!("observed energy is {observed:e}")));
    }
    let ratio = terminal_sq / observed;
    Ok(ObservabilityReport { terminal_sq, observed, ratio, ln_ratio: ratio.ln() })
}

/// Random real-valued datum over the modes below `e_max`. Periodic
/// coefficients satisfy `c_{-k} = conj(c_k)`.
pub fn random_initial_datum<R: Rng + ?Sized>(rng: &mut R, basis: SpectralBasis, e_max: f64) -> Result<ModeVector> {
    let modes = basis.modes_below(e_max);
    let mut coeffs: Vec<(MultiIndex, Complex64)> = Vec::with_capacity(modes.len());
    match basis.bc {
        BoundaryCondition::Periodic => {
            for k in &modes {
                let neg: MultiIndex = k.iter().map(|v| -v).collect();
                if *k < neg {
                    let c = Complex64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0));
                    coeffs.push((k.clone(), c));
                    coeffs.push((neg, c.conj()));
                } else if *k == neg {
                    coeffs.push((k.clone(), cplx(rng.random_range(-1.0..1.0))));
                }
            }
        }
        _ => {
            for k in &modes {
                coeffs.push((k.clone(), cplx(rng.random_range(-1.0..1.0))));
            }
        }
    }
    ModeVector::new(basis, coeffs)
}

/// [`random_initial_datum`] on a ChaCha8 stream seeded with `seed`.
pub fn seeded_initial_datum(seed: u64, basis: SpectralBasis, e_max: f64) -> Result<ModeVector> {
    use rand::SeedableRng;
    random_initial_datum(&mut rand_chacha::ChaCha8Rng::seed_from_u64(seed), basis, e_max)
}
