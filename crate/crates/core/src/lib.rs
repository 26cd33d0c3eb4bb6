//! Numerical toolkit for null-controllability of the heat equation from thick
//! control sets.
//!
//! The crate is organised by subsystem:
//!
//! * [`geometry`]: box-union sets, intersection measures, thickness
//!   certificates and the reflection/periodization construction.
//! * [`constants`]: the explicit control-cost constant chain (`c1`, `C3`,
//!   `C1`/`C2`) evaluated in log space.
//! * [`spectral`]: Laplacian eigenbases on `(0, 2πL)^d`, spectral projectors,
//!   the heat semigroup and the double-torus extension.
//! * [`lsineq`]: numerical Logvinenko–Sereda checks and adversarial search.
//! * [`control`]: Gramian (HUM) null controls in a truncated eigenbasis.
//! * [`counterexample`]: the Gaussian witness sequence for non-thick sets.
//! * [`sweep`]: deterministic parameter sweeps over `(γ, a, T, L, bc)`.

pub mod constants;
pub mod control;
pub mod counterexample;
mod error;
pub mod geometry;
pub mod lsineq;
pub mod spectral;
pub mod sweep;
mod tensor;

pub use constants::{CostCertificate, CostParameters, DomainKind, DoubleExpBound, LogValue};
pub use control::{ControlProblem, ControlSolution};
pub use error::{Error, Result};
pub use geometry::{AxisBox, BoxUnionSet, ThicknessCertificate};
pub use spectral::{BoundaryCondition, ModeVector, MultiIndex, SpectralBasis};
