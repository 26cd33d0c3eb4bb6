use heatctl_core::constants::{c1, control_cost_bound};
use heatctl_core::control::{observability_ratio, seeded_initial_datum, solve_hum, TimeIntegration};
use heatctl_core::geometry::{random_periodic_set, thickness_gamma, ThicknessMode, ThicknessOptions};
use heatctl_core::spectral::{random_mode_vector, MassQuadrature};
use heatctl_core::sweep::{run_point, thick_lattice, PointTemplate, SweepPoint};
use heatctl_core::{
    AxisBox, BoundaryCondition, BoxUnionSet, ControlProblem, CostCertificate, CostParameters, DomainKind,
    SpectralBasis,
};
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn exact() -> ThicknessOptions {
    ThicknessOptions { mode: ThicknessMode::Exact, window: None }
}

fn random_set(seed: u64, d: usize) -> BoxUnionSet {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    random_periodic_set(&mut rng, &vec![1.0; d], 4)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn adding_boxes_never_lowers_thickness(seed in any::<u64>(), lo in 0.0..0.9f64, w in 0.01..0.1f64, a in 0.2..1.0f64) {
        let s = random_set(seed, 1);
        let bigger = s.with_boxes([AxisBox::new(vec![lo], vec![w]).unwrap()]).unwrap();
        let g0 = thickness_gamma(&s, &[a], &exact()).unwrap().gamma;
        let g1 = thickness_gamma(&bigger, &[a], &exact()).unwrap().gamma;
        prop_assert!(g1 >= g0 - 1e-12);
    }

    #[test]
    fn thickness_is_translation_invariant(seed in any::<u64>(), v in prop::collection::vec(-2.0..2.0f64, 2), a in 0.3..1.0f64) {
        let s = random_set(seed, 2);
        let g0 = thickness_gamma(&s, &[a, a], &exact()).unwrap().gamma;
        let g1 = thickness_gamma(&s.translate(&v).unwrap(), &[a, a], &exact()).unwrap().gamma;
        prop_assert!((g0 - g1).abs() < 1e-9);
    }

    #[test]
    fn raster_brackets_exact(seed in any::<u64>(), a in 0.2..1.0f64) {
        let s = random_set(seed, 2);
        let ex = thickness_gamma(&s, &[a, a], &exact()).unwrap();
        let opts = ThicknessOptions { mode: ThicknessMode::Raster { resolution: 64 }, window: None };
        let r = thickness_gamma(&s, &[a, a], &opts).unwrap();
        prop_assert!(r.inf_measure >= ex.inf_measure - 1e-12);
        prop_assert!(r.inf_measure - r.error_bound <= ex.inf_measure + 1e-12);
        prop_assert!(r.gamma_lower() <= ex.gamma + 1e-12);
    }

    #[test]
    fn witness_translate_attains_infimum(seed in any::<u64>(), a in 0.2..1.0f64) {
        let s = random_set(seed, 2);
        let c = thickness_gamma(&s, &[a, a], &exact()).unwrap();
        let m = s.intersection_measure(&c.witness_x, &[a, a]).unwrap();
        prop_assert!((m - c.inf_measure).abs() < 1e-12);
    }

    #[test]
    fn c1_grows_as_gamma_shrinks(g in 0.01..0.99f64, a in 0.1..5.0f64) {
        let p = |gamma| CostParameters::new(1, gamma, vec![a], 3.5, DomainKind::FullSpace, None).unwrap();
        prop_assert!(c1(&p(g * 0.5)).unwrap() > c1(&p(g)).unwrap());
    }

    #[test]
    fn cost_bound_decreases_in_time(g in 0.05..1.0f64, t in 0.01..10.0f64) {
        let cert = CostCertificate::new(
            CostParameters::new(2, g, vec![1.0, 2.0], 3.5, DomainKind::CubePeriodic, Some(1.0)).unwrap(),
        )
        .unwrap();
        let b = cert.cost_bound();
        let (l1, l2) = (b.ln_at(t).unwrap(), b.ln_at(2.0 * t).unwrap());
        prop_assert!(l1 > l2 || (l1 == f64::INFINITY && l1 >= l2));
        prop_assert!(b.ln_ln_at(t).unwrap() > b.ln_ln_at(2.0 * t).unwrap());
    }

    #[test]
    fn heat_flow_contracts_and_projections_split(seed in any::<u64>(), t in 0.0..2.0f64, e in 0.0..20.0f64) {
        let basis = SpectralBasis::new(2, 1.0, BoundaryCondition::Neumann).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let f = random_mode_vector(&mut rng, basis, 25.0, 0.7);
        prop_assert!(f.heat(t).unwrap().norm() <= f.norm() * (1.0 + 1e-12));
        let sum = f.project_below(e).add(&f.project_above(e)).unwrap();
        prop_assert!((sum.norm_sq() - f.norm_sq()).abs() <= 1e-12 * f.norm_sq().max(1.0));
        prop_assert!(f.project_below(e).project_above(e).norm() == 0.0);
    }

    #[test]
    fn observability_ratio_scale_free(seed in any::<u64>(), s in 0.1..10.0f64) {
        let basis = SpectralBasis::new(1, 1.0, BoundaryCondition::Periodic).unwrap();
        let f = seeded_initial_datum(seed, basis, 9.0).unwrap();
        let omega = thick_lattice(0.5, &[1.0], &[std::f64::consts::PI]).unwrap();
        let r1 = observability_ratio(&f, &omega, 1.0, MassQuadrature::Exact, TimeIntegration::Exact).unwrap();
        let r2 = observability_ratio(&f.scaled(s.into()), &omega, 1.0, MassQuadrature::Exact, TimeIntegration::Exact).unwrap();
        prop_assert!((r1.ratio - r2.ratio).abs() <= 1e-9 * r1.ratio);
    }
}

#[test]
fn regularisation_path_drives_terminal_state_down() {
    let basis = SpectralBasis::new(1, 1.0, BoundaryCondition::Dirichlet).unwrap();
    let omega = thick_lattice(0.4, &[1.0], &[std::f64::consts::PI]).unwrap();
    let u0 = seeded_initial_datum(3, basis, 36.0).unwrap();
    let mut last = f64::INFINITY;
    let mut last_cost = 0.0;
    for eps in [1e-2, 1e-4, 1e-6, 1e-8] {
        let p = ControlProblem::new(basis, omega.clone(), 1.0, u0.clone(), 36.0).unwrap().with_epsilon(eps).unwrap();
        let sol = solve_hum(&p).unwrap();
        assert!(sol.terminal_ratio() < last, "eps {eps}: {} !< {last}", sol.terminal_ratio());
        assert!(sol.control_norm >= last_cost * (1.0 - 1e-9));
        last = sol.terminal_ratio();
        last_cost = sol.control_norm;
    }
    assert!(last < 1e-5);
}

#[test]
fn exact_and_midpoint_control_norms_agree() {
    let basis = SpectralBasis::new(1, 1.0, BoundaryCondition::Periodic).unwrap();
    let omega = thick_lattice(0.5, &[1.0], &[std::f64::consts::PI]).unwrap();
    let u0 = seeded_initial_datum(11, basis, 16.0).unwrap();
    let p = ControlProblem::new(basis, omega, 1.0, u0, 16.0).unwrap().with_time_steps(2048).unwrap();
    let sol = solve_hum(&p).unwrap();
    let rel = (sol.control_norm - sol.control_norm_midpoint).abs() / sol.control_norm;
    assert!(rel < 1e-3, "relative gap {rel}");
}

#[test]
fn hum_cost_respects_certified_bound_across_horizons() {
    let basis = SpectralBasis::new(1, 1.0, BoundaryCondition::Periodic).unwrap();
    let omega = thick_lattice(0.5, &[1.0], &[std::f64::consts::PI]).unwrap();
    let u0 = seeded_initial_datum(5, basis, 25.0).unwrap();
    let cert = CostCertificate::new(
        CostParameters::new(1, 0.5, vec![1.0], 3.5, DomainKind::CubePeriodic, Some(1.0)).unwrap(),
    )
    .unwrap();
    let mut costs = Vec::new();
    for t in [0.25, 0.5, 1.0, 2.0] {
        let sol = solve_hum(&ControlProblem::new(basis, omega.clone(), t, u0.clone(), 25.0).unwrap()).unwrap();
        assert!(cert.cost_bound().admits(sol.cost_ratio.ln(), t).unwrap());
        costs.push(sol.cost_ratio);
    }
    assert!(costs.windows(2).all(|w| w[1] < w[0]), "{costs:?}");
}

#[test]
fn cost_bound_matches_closed_form() {
    let c: f64 = 40.0;
    for t in [0.5, 1.0, 4.0] {
        let direct = control_cost_bound(c, t).unwrap();
        let expect = c.sqrt() * (c / (2.0 * t)).exp();
        assert!((direct - expect).abs() <= 1e-12 * expect);
    }
}

#[test]
fn sweep_rows_follow_time_grid() {
    let tpl = PointTemplate::default();
    let rows: Vec<_> = [0.5, 1.0, 2.0]
        .into_iter()
        .map(|t| {
            run_point(&SweepPoint { gamma: 0.5, a: vec![1.0], t, l: 1.0, bc: BoundaryCondition::Neumann }, &tpl)
        })
        .collect();
    assert!(rows.iter().all(|r| r.is_ok()), "{:?}", rows.iter().map(|r| &r.status).collect::<Vec<_>>());
    for w in rows.windows(2) {
        assert!(w[1].lnln_cost_bound < w[0].lnln_cost_bound);
        assert!(w[1].cost_ratio < w[0].cost_ratio);
    }
}

#[test]
fn lattice_has_requested_thickness() {
    for (g, d) in [(0.1, 1), (0.5, 2), (0.9, 2), (1.0, 1)] {
        let a = vec![1.0; d];
        let s = thick_lattice(g, &a, &vec![0.3; d]).unwrap();
        let c = thickness_gamma(&s, &a, &exact()).unwrap();
        assert!((c.gamma - g).abs() < 1e-12, "{g} {d}: {}", c.gamma);
    }
}
