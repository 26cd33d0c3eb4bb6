//! Shared fixtures for the kernel benchmarks.

use heatctl_core::control::seeded_initial_datum;
use heatctl_core::geometry::{random_periodic_set, reflect_and_periodize};
use heatctl_core::sweep::thick_lattice;
use heatctl_core::{BoundaryCondition, BoxUnionSet, ControlProblem, MultiIndex, SpectralBasis};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub const SEED: u64 = 20;

/// Random periodic set on the unit cell with up to `max_boxes` boxes.
pub fn random_set(d: usize, max_boxes: usize) -> BoxUnionSet {
    let mut rng = ChaCha8Rng::seed_from_u64(SEED);
    random_periodic_set(&mut rng, &vec![1.0; d], max_boxes)
}

/// Reflected and periodized copy of a random set on `(0, 2πL)^2`.
pub fn reflected_set(l: f64, max_boxes: usize) -> BoxUnionSet {
    let mut rng = ChaCha8Rng::seed_from_u64(SEED);
    let side = 2.0 * std::f64::consts::PI * l;
    let s = random_periodic_set(&mut rng, &[side, side], max_boxes);
    let clipped = BoxUnionSet::new(2, s.boxes().to_vec(), None).expect("boxes are valid");
    reflect_and_periodize(&clipped, l).expect("reflection succeeds")
}

pub fn lattice(d: usize) -> BoxUnionSet {
    thick_lattice(0.5, &vec![1.0; d], &vec![std::f64::consts::PI; d]).expect("valid lattice")
}

pub fn modes(d: usize, bc: BoundaryCondition, e_max: f64) -> (SpectralBasis, Vec<MultiIndex>) {
    let basis = SpectralBasis::new(d, 1.0, bc).expect("valid basis");
    let modes = basis.modes_below(e_max);
    (basis, modes)
}

/// HUM problem on `(0, 2π)^d` with a seeded datum below `e_max`.
pub fn hum_problem(d: usize, e_max: f64) -> ControlProblem {
    let basis = SpectralBasis::new(d, 1.0, BoundaryCondition::Periodic).expect("valid basis");
    let u0 = seeded_initial_datum(SEED, basis, e_max).expect("datum");
    ControlProblem::new(basis, lattice(d), 1.0, u0, e_max).expect("valid problem")
}
