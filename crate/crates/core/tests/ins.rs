use halfspace::besov::{besov_norm, BesovIndex};
use halfspace::data::{bump, cell_velocity, divfree_velocity, rng};
use halfspace::ins::*;
use halfspace::quadrature::lp_half;
use halfspace::stokes::{solve_stokes, StokesInput};
use halfspace::{Error, ExtMode, Parity, SpectralField, SpectralGrid, VectorField};
use proptest::prelude::*;
use std::f64::consts::PI;

fn grid(n: usize) -> SpectralGrid {
    SpectralGrid::new(2, n, n, 2.0 * PI, PI).unwrap()
}

fn density(g: &SpectralGrid, amp: f64, center: f64) -> Vec<f64> {
    let nzh = g.nz_half();
    (0..g.half_len())
        .map(|i| {
            let x = g.x_h(i / nzh);
            amp * x[0].cos() * bump(g.z(i % nzh), center, 0.6)
        })
        .collect()
}

/// Desk-scale small data: single convection cell plus a 1% density bump.
fn small_problem(n: usize, amp: f64) -> InsProblem {
    let g = grid(n);
    InsProblem {
        a0: density(&g, 0.01, 1.0),
        u0: cell_velocity(&g, 1, PI / 6.0, amp),
        mu: 1.0,
        times: (0..=n / 2).map(|i| 2.0 * i as f64 / n as f64).collect(),
    }
}

const R: f64 = 2.0;

fn p() -> f64 {
    critical_p(2, R)
}

fn max_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).fold(0.0, |m, (x, y)| m.max((x - y).abs()))
}

#[test]
fn smallness_of_zero_data_is_zero() {
    let g = grid(16);
    let rep = smallness(&vec![0.0; g.half_len()], &VectorField::zeros(g), 1.0, p(), R, 0.05, 1.0).unwrap();
    assert_eq!(rep.eta0, 0.0);
    assert!(rep.verdict);
}

#[test]
fn smallness_without_vertical_velocity_has_unit_factor() {
    let g = grid(16);
    let f = SpectralField::from_fn(g, Parity::Odd, |x, z| x[0].sin() * bump(z, 1.5, 0.4));
    let u0 = VectorField::new(vec![f.clone(), SpectralField::zeros(g)]);
    let a0 = density(&g, 0.02, 1.0);
    let mu = 0.7;
    let rep = smallness(&a0, &u0, mu, p(), R, 0.05, 1.0).unwrap();
    assert_eq!(rep.exp_factor, 1.0);
    // oracle: the whole-box norm of the odd extension and the sampled maximum
    let idx = BesovIndex::new(-1.0 + 2.0 / p(), p(), R).unwrap();
    let uh = besov_norm(&f.extend(ExtMode::Antisym), idx);
    let amax = a0.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    assert!((rep.eta0 - (mu * amax + uh)).abs() <= 1e-12 * rep.eta0);
    assert_eq!(rep.verdict, rep.eta0 <= 0.05 * mu);
}

#[test]
fn smallness_rejects_noncritical_exponents() {
    let g = grid(16);
    let z = vec![0.0; g.half_len()];
    let u = VectorField::zeros(g);
    assert!(matches!(smallness(&z, &u, 1.0, 1.5, R, 0.05, 1.0), Err(Error::Exponent { .. })));
    assert!(matches!(smallness(&z, &u, 1.0, 2.0, 1.0, 0.05, 1.0), Err(Error::Exponent { .. })));
    // d = 3, r = 2 gives p = 3/2
    assert!((critical_p(3, 2.0) - 1.5).abs() < 1e-15);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]
    #[test]
    fn smallness_is_monotone_under_scaling(seed in 0u64..1000, s in 1.0f64..3.0) {
        let g = grid(16);
        let u0 = divfree_velocity(&g, 2, 2, &mut rng(seed)).scale(1e-3);
        let a0 = density(&g, 0.01, 1.0);
        let e1 = smallness(&a0, &u0, 1.0, p(), R, 0.05, 1.0).unwrap().eta0;
        let e2 = smallness(&a0, &u0.scale(2.0 * s), 1.0, p(), R, 0.05, 1.0).unwrap().eta0;
        prop_assert!(e2 >= e1);
    }

    #[test]
    fn transport_obeys_the_maximum_principle(seed in 0u64..1000, amp in 0.01f64..3.0, dt in 0.01f64..0.5) {
        let g = SpectralGrid::new(2, 16, 16, 2.0, 1.0).unwrap();
        let u0 = divfree_velocity(&g, 2, 2, &mut rng(seed)).scale(amp);
        let u1 = divfree_velocity(&g, 2, 2, &mut rng(seed + 1)).scale(amp);
        let a = divfree_velocity(&g, 3, 3, &mut rng(seed + 2)).comps[0].samples();
        let out = advect_density(&g, &a, &u0, &u1, dt).unwrap();
        let (lo, hi) = a.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(l, h), &v| (l.min(v), h.max(v)));
        prop_assert!(out.iter().all(|&v| v >= lo && v <= hi));
        prop_assert!(lp_half(&g, &out, f64::INFINITY) <= lp_half(&g, &a, f64::INFINITY));
    }
}

#[test]
fn zero_velocity_leaves_density_unchanged() {
    let g = grid(16);
    let a = density(&g, 0.3, 1.2);
    let z = VectorField::zeros(g);
    let out = advect_density(&g, &a, &z, &z, 0.3).unwrap();
    assert!(out.iter().zip(&a).all(|(x, y)| x.to_bits() == y.to_bits()));
}

/// Uniform translation `u = (c, 0)`: the exact solution is `a(x - c dt)`. The departure point
/// sits a fixed fraction of a cell from a node, so the interpolation error is `O(h^2)`.
#[test]
fn uniform_translation_is_second_order() {
    let err = |n: usize| {
        let g = SpectralGrid::new(2, n, 8, 1.0, 1.0).unwrap();
        let c = 0.8;
        let dt = 0.3 * g.dx() / c;
        let u = VectorField::new(vec![SpectralField::from_fn(g, Parity::Even, |_, _| c), SpectralField::zeros(g)]);
        let prof = |x: f64, z: f64| (2.0 * PI * x).sin() * (1.0 + z);
        let a = SpectralField::from_fn(g, Parity::Raw, |x, z| prof(x[0], z)).samples();
        let exact = SpectralField::from_fn(g, Parity::Raw, |x, z| prof(x[0] - c * dt, z)).samples();
        max_diff(&advect_density(&g, &a, &u, &u, dt).unwrap(), &exact)
    };
    let (e1, e2) = (err(32), err(64));
    let expect = 0.3 * 0.7 / 2.0 * (2.0 * PI / 32.0).powi(2) * 2.0; // theta(1-theta) h^2 |a''| / 2
    assert!(e1 < 1.1 * expect, "{e1} vs {expect}");
    assert!(e1 / e2 > 3.8 && e1 / e2 < 4.2, "ratio {}", e1 / e2);
}

#[test]
fn first_step_from_zero_is_the_stokes_solve() {
    let pr = InsProblem { a0: vec![0.0; grid(16).half_len()], ..small_problem(16, 1e-3) };
    let (next, rep) = picard_step(&Trajectory::zero(&pr), &pr, &InsOptions::default()).unwrap();
    let sol = solve_stokes(&StokesInput::new(pr.mu, pr.u0.clone(), pr.times.clone())).unwrap();
    assert_eq!(rep.inner_passes, 1);
    for (a, b) in next.u.iter().zip(&sol.u) {
        for (x, y) in a.samples().iter().zip(&b.samples()) {
            assert!(x.iter().zip(y).all(|(p, q)| p.to_bits() == q.to_bits()));
        }
    }
}

#[test]
fn standard_family_contracts_and_conserves_density() {
    let pr = small_problem(32, 1e-3);
    let run = run_ins(&pr, p(), R, &InsOptions::default()).unwrap();
    assert!(run.smallness.verdict, "{:?}", run.smallness);
    assert!(run.converged);
    let a0 = lp_half(pr.grid(), &pr.a0, f64::INFINITY);
    for h in &run.history {
        if h.n >= 2 {
            let ratio = h.ratio.unwrap();
            assert!(ratio < 0.5, "n = {}: ratio {ratio}", h.n);
        }
        assert!((h.step.a_linf - a0).abs() <= 1e-3 * a0 && (h.step.a_linf_min - a0).abs() <= 1e-3 * a0);
        assert!(h.step.div_linf < 1e-8, "n = {}: div {:e}", h.n, h.step.div_linf);
        assert!(h.norms.anisotropic);
        let hl = &h.h_lambda;
        for w in [&hl.single, &hl.intersection] {
            assert_eq!(w[0], 1.0);
            assert!(w.iter().all(|&x| x > 0.0));
            assert!(w.windows(2).all(|p| p[1] <= p[0]));
        }
    }
}

#[test]
fn zero_data_converges_in_one_iteration() {
    let pr = InsProblem { a0: vec![0.0; grid(16).half_len()], u0: VectorField::zeros(grid(16)), ..small_problem(16, 0.0) };
    let run = run_ins(&pr, p(), R, &InsOptions::default()).unwrap();
    assert_eq!(run.history.len(), 1);
    assert!(run.trajectory.u.iter().all(|u| u.samples().iter().flatten().all(|&x| x == 0.0)));
    assert!(run.ledger.rows.iter().all(|r| r.value == 0.0));
}

#[test]
fn constant_density_iteration_stays_bounded() {
    let pr = InsProblem { a0: vec![0.0; grid(16).half_len()], ..small_problem(16, 1e-3) };
    let run = run_ins(&pr, p(), R, &InsOptions::default()).unwrap();
    let first = &run.history[0].ledger;
    for h in &run.history {
        for row in &h.ledger.rows {
            let base = first.find(&row.quantity).unwrap().value;
            assert!(row.value <= 1.5 * base + 1e-14, "{}: {} vs {}", row.quantity, row.value, base);
        }
    }
}

#[test]
fn doubling_the_velocity_never_decreases_ledger_norms() {
    let opts = InsOptions::default();
    let small = run_ins_for(&small_problem(16, 5e-4), p(), R, &opts, 3).unwrap();
    let big = run_ins_for(&small_problem(16, 1e-3), p(), R, &opts, 3).unwrap();
    assert!(big.smallness.verdict);
    for row in &small.ledger.rows {
        let other = big.ledger.find(&row.quantity).unwrap().value;
        assert!(other >= row.value, "{}: {} < {}", row.quantity, other, row.value);
    }
}

#[test]
fn iteration_budget_is_enforced() {
    let opts = InsOptions { outer_max: 1, ..InsOptions::default() };
    assert!(matches!(run_ins(&small_problem(16, 1e-3), p(), R, &opts), Err(Error::Iteration(_))));
}

#[test]
fn large_data_aborts_the_inner_fixed_point() {
    let pr = small_problem(16, 150.0);
    let res = run_ins_for(&pr, p(), R, &InsOptions::default(), 3);
    match res {
        Err(Error::Iteration(msg)) => assert!(msg.contains("not contracting"), "{msg}"),
        other => panic!("expected a contraction failure, got {:?}", other.map(|r| r.history.len())),
    }
}

#[test]
fn weak_residuals_vanish_for_the_zero_solution() {
    let pr = InsProblem { a0: vec![0.0; grid(16).half_len()], u0: VectorField::zeros(grid(16)), ..small_problem(16, 0.0) };
    let traj = Trajectory::zero(&pr);
    let res = weak_residual(&traj, &pr.a0, &pr.u0, &standard_tests(2, 1.0, 2.0)).unwrap();
    assert_eq!((res.transport, res.divergence, res.momentum), (0.0, 0.0, 0.0));
}

#[test]
fn test_functions_away_from_the_support_see_nothing() {
    // a0 supported in z < 0.8, no flow: the density never moves
    let g = grid(32);
    let nzh = g.nz_half();
    let a0 = (0..g.half_len()).map(|i| 0.5 * g.x_h(i / nzh)[0].cos() * (1.0 - g.z(i % nzh) / 0.8).max(0.0).powi(2)).collect();
    let pr = InsProblem { a0, u0: VectorField::zeros(g), ..small_problem(32, 0.0) };
    let run = run_ins(&pr, p(), R, &InsOptions::default()).unwrap();
    let mode = |k: [i64; 2]| TestMode { k, phase: 0.4, t_cut: 1.0, z_lo: 1.5, z_hi: 2.8 };
    let tests = vec![WeakTest { phi: mode([1, 0]), big_phi: vec![mode([1, 0]), mode([2, 0])] }];
    let res = weak_residual(&run.trajectory, &pr.a0, &pr.u0, &tests).unwrap();
    assert!(res.transport < 1e-15, "{res:?}");
    assert!(res.momentum < 1e-15 && res.divergence < 1e-15, "{res:?}");
}

#[test]
fn weak_residuals_decrease_under_refinement() {
    let res = |n: usize| {
        let pr = small_problem(n, 1e-3);
        let run = run_ins(&pr, p(), R, &InsOptions::default()).unwrap();
        weak_residual(&run.trajectory, &pr.a0, &pr.u0, &standard_tests(2, 1.0, 2.0)).unwrap()
    };
    let (c, f) = (res(16), res(32));
    assert!(f.transport < 0.5 * c.transport, "{c:?} -> {f:?}");
    assert!(f.momentum < 0.5 * c.momentum, "{c:?} -> {f:?}");
    assert!(f.divergence < 1e-12);
}
