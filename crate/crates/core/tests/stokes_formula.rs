use halfspace::data::{divfree_velocity, rng};
use halfspace::quadrature::lp_half_vec;
use halfspace::stokes::mms::manufactured;
use halfspace::stokes::*;
use halfspace::ukai::{apply_g, apply_m};
use halfspace::{SpectralField, SpectralGrid, VectorField};

fn grid() -> SpectralGrid {
    SpectralGrid::new(2, 32, 64, 1.0, 4.0).unwrap()
}

fn times(t: f64, n: usize) -> Vec<f64> {
    (0..=n).map(|i| t * i as f64 / n as f64).collect()
}

fn rel_vec(a: &VectorField, b: &VectorField) -> f64 {
    let g = *a.grid();
    let d = a.sub(b).unwrap();
    lp_half_vec(&g, &d.samples(), 2.0) / lp_half_vec(&g, &b.samples(), 2.0).max(1e-300)
}

fn max_err(sol: &[VectorField], exact: &[VectorField]) -> f64 {
    sol.iter().zip(exact).map(|(a, b)| rel_vec(a, b)).fold(0.0, f64::max)
}

#[test]
fn zero_data_gives_zero() {
    let g = grid();
    let input = StokesInput::new(1.0, VectorField::zeros(g), times(0.1, 4));
    let sol = solve_stokes(&input).unwrap();
    for (u, p) in sol.u.iter().zip(&sol.grad_pi) {
        assert_eq!(lp_half_vec(&g, &u.samples(), f64::INFINITY), 0.0);
        assert_eq!(lp_half_vec(&g, &p.samples(), f64::INFINITY), 0.0);
    }
    let rep = residual(&input, &sol).unwrap();
    assert_eq!(rep.momentum_l2 + rep.divergence_l2 + rep.trace_l2 + rep.initial_l2, 0.0);
}

#[test]
fn free_evolution_keeps_divergence_and_trace() {
    for d in [2, 3] {
        let g = if d == 2 { grid() } else { SpectralGrid::new(3, 16, 64, 1.0, 4.0).unwrap() };
        let u0 = divfree_velocity(&g, 3, 3, &mut rng(1));
        let input = StokesInput::new(0.7, u0, times(0.3, 6));
        let sol = solve_stokes(&input).unwrap();
        let rep = residual(&input, &sol).unwrap();
        assert!(rep.divergence_linf < 1e-9, "{rep:?}");
        assert!(rep.trace_linf < 1e-8, "{rep:?}");
        assert!(rep.initial_linf < 1e-12, "{rep:?}");
    }
}

#[test]
fn manufactured_solution_second_order() {
    let g = grid();
    let mut errs = Vec::new();
    for n in [64, 128] {
        let m = manufactured(&g, 1.0, &times(0.5, n), 3, false);
        let sol = solve_stokes(&m.input).unwrap();
        errs.push((max_err(&sol.u, &m.u), max_err(&sol.grad_pi, &m.grad_pi)));
    }
    println!("{errs:?}");
    assert!(errs[0].0 / errs[1].0 > 3.5);
    assert!(errs[1].0 < 1e-4);
}

#[test]
fn manufactured_solution_with_divergence() {
    let g = grid();
    let mut errs = Vec::new();
    for n in [16, 32] {
        let m = manufactured(&g, 0.8, &times(0.5, n), 5, true);
        let sol = solve_stokes(&m.input).unwrap();
        errs.push((max_err(&sol.u, &m.u), max_err(&sol.grad_pi, &m.grad_pi)));
    }
    println!("{errs:?}");
    assert!(errs[0].0 / errs[1].0 > 3.5);
}

#[test]
fn free_horizontal_matches_formula() {
    let g = grid();
    let u0 = divfree_velocity(&g, 3, 3, &mut rng(9));
    let ts = times(0.4, 4);
    let input = StokesInput::new(1.3, u0.clone(), ts.clone());
    let sol = solve_stokes(&input).unwrap();
    let alt = free_horizontal(&u0, 1.3, &ts, 1e-8).unwrap();
    for (i, a) in alt.iter().enumerate() {
        let e = rel_vec(&VectorField::new(a.clone()), &VectorField::new(sol.u[i].horizontal().to_vec()));
        assert!(e < 1e-8, "t={} e={e:e}", ts[i]);
    }
    let e0 = rel_vec(&VectorField::new(alt[0].clone()), &VectorField::new(u0.horizontal().to_vec()));
    assert!(e0 < 1e-10);
}

fn pressure_cross_check(input: &StokesInput, sol: &StokesSolution) -> f64 {
    // grad_h Pi = S(-d_d Pi + M e_a(div f) - G k), with k = d_t Q - grad g (mu = 1)
    let g = *input.grid();
    let mut worst = 0.0f64;
    for i in 0..sol.times.len() {
        let k = if input.q.is_empty() {
            VectorField::zeros(g)
        } else {
            time_derivative_vec(&input.times, &input.q, i).sub(&VectorField::grad(&input.q[i].div())).unwrap()
        };
        let mut rhs = sol.grad_pi[i].vertical().neg();
        rhs.axpy(1.0, &apply_m(&input.forcing(i).div())).unwrap();
        rhs.axpy(-1.0, &apply_g(&k)).unwrap();
        for m in 0..g.d - 1 {
            let lhs = &sol.grad_pi[i].comps[m];
            let e = rel_vec(&VectorField::new(vec![lhs.clone()]), &VectorField::new(vec![rhs.s(m)]));
            worst = worst.max(e);
        }
    }
    worst
}

#[test]
fn pressure_consistency() {
    let g = grid();
    for with_q in [false, true] {
        let m = manufactured(&g, 1.0, &times(0.3, 12), 4, with_q);
        let sol = solve_stokes(&m.input).unwrap();
        let e = pressure_cross_check(&m.input, &sol);
        assert!(e < 1e-9, "with_q={with_q}: {e:e}");
    }
}

#[test]
fn linearity() {
    let g = grid();
    let ts = times(0.2, 6);
    let a = manufactured(&g, 1.0, &ts, 6, true).input;
    let mut b = StokesInput::new(1.0, divfree_velocity(&g, 2, 2, &mut rng(17)), ts.clone());
    b.f = a.f.iter().map(|f| f.scale(-0.3)).collect();
    let mut sum = a.clone();
    sum.u0 = a.u0.add(&b.u0).unwrap();
    sum.f = a.f.iter().zip(&b.f).map(|(x, y)| x.add(y).unwrap()).collect();
    let (sa, sb, ss) = (solve_stokes(&a).unwrap(), solve_stokes(&b).unwrap(), solve_stokes(&sum).unwrap());
    for i in 0..ts.len() {
        let u = sa.u[i].add(&sb.u[i]).unwrap();
        let p = sa.grad_pi[i].add(&sb.grad_pi[i]).unwrap();
        assert!(rel_vec(&ss.u[i], &u) < 1e-12);
        assert!(rel_vec(&ss.grad_pi[i], &p) < 1e-12);
    }
}

#[test]
fn viscosity_rescaling() {
    let g = grid();
    let mu = 2.5;
    let ts = times(0.2, 8);
    let old = manufactured(&g, mu, &ts, 8, true).input;
    let mut new = old.clone();
    new.mu = 1.0;
    new.times = ts.iter().map(|t| mu * t).collect();
    new.u0 = old.u0.scale(mu);
    new.q = old.q.iter().map(|q| q.scale(mu)).collect();
    let (so, sn) = (solve_stokes(&old).unwrap(), solve_stokes(&new).unwrap());
    for i in 0..ts.len() {
        assert!(rel_vec(&sn.u[i], &so.u[i].scale(mu)) < 1e-12);
        assert!(rel_vec(&sn.grad_pi[i], &so.grad_pi[i]) < 1e-12);
    }
}

#[test]
fn compatibility_violations_are_rejected() {
    let g = grid();
    let bad = SpectralField::from_fn(g, halfspace::Parity::Raw, |x, z| (6.28 * x[0]).cos() * (-z).exp());
    let u0 = VectorField::new(vec![SpectralField::zeros(g), bad.clone()]);
    assert!(solve_stokes(&StokesInput::new(1.0, u0, times(0.1, 3))).is_err());
    let mut input = StokesInput::new(1.0, VectorField::zeros(g), times(0.1, 3));
    input.q = (0..4).map(|i| VectorField::new(vec![bad.scale(1.0 + i as f64), SpectralField::zeros(g)])).collect();
    assert!(matches!(solve_stokes(&input), Err(halfspace::Error::Compatibility(_))));
    let input = StokesInput::new(1.0, VectorField::zeros(g), vec![0.0, 0.2, 0.1]);
    assert!(solve_stokes(&input).is_err());
}
