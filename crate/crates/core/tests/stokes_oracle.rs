use halfspace::quadrature::lp_half_vec;
use halfspace::stokes::mms::manufactured;
use halfspace::stokes::*;
use halfspace::{Parity, SpectralField, SpectralGrid, VectorField};
use std::f64::consts::PI;

fn times(t: f64, n: usize) -> Vec<f64> {
    (0..=n).map(|i| t * i as f64 / n as f64).collect()
}

fn rel_vec(a: &VectorField, b: &VectorField) -> f64 {
    let g = *a.grid();
    let d = a.sub(b).unwrap();
    lp_half_vec(&g, &d.samples(), 2.0) / lp_half_vec(&g, &b.samples(), 2.0).max(1e-300)
}

#[test]
fn zero_data_gives_zero() {
    let g = SpectralGrid::new(2, 16, 16, 1.0, 1.0).unwrap();
    let input = StokesInput::new(1.0, VectorField::zeros(g), times(0.1, 4));
    let sol = oracle_solve(&input, OracleOptions::default()).unwrap();
    for u in &sol.u {
        assert_eq!(lp_half_vec(&g, &u.samples(), f64::INFINITY), 0.0);
    }
}

#[test]
fn shear_mode_decays_at_the_dirichlet_rate() {
    let lz = 1.0;
    let g = SpectralGrid::new(2, 64, 64, 1.0, lz).unwrap();
    let mu = 0.8;
    let u0 = VectorField::new(vec![
        SpectralField::from_fn(g, Parity::Raw, |_, z| (PI * z / lz).sin()),
        SpectralField::zeros(g),
    ]);
    let t = 0.1;
    let input = StokesInput::new(mu, u0.clone(), times(t, 25));
    let sol = oracle_solve(&input, OracleOptions { substeps: 4 }).unwrap();
    let expected = u0.scale((-mu * (PI / lz).powi(2) * t).exp());
    let err = rel_vec(sol.u.last().unwrap(), &expected);
    assert!(err < 0.01, "relative error {err}");
}

#[test]
fn oracle_rejects_boundary_data() {
    let g = SpectralGrid::new(2, 16, 16, 1.0, 4.0).unwrap();
    let m = manufactured(&g, 1.0, &times(0.1, 4), 1, true);
    assert!(oracle_solve(&m.input, OracleOptions::default()).is_err());
}

fn formula_vs_oracle(n: usize, steps: usize) -> f64 {
    let g = SpectralGrid::new(2, n, n, 1.0, 4.0).unwrap();
    let m = manufactured(&g, 1.0, &times(0.5, steps), 7, false);
    let f = solve_stokes(&m.input).unwrap();
    let o = oracle_solve(&m.input, OracleOptions { substeps: 2 }).unwrap();
    let e = rel_vec(o.u.last().unwrap(), f.u.last().unwrap());
    eprintln!("n={n} steps={steps} oracle-vs-formula {e:.3e} formula-vs-exact {:.3e}", rel_vec(f.u.last().unwrap(), m.u.last().unwrap()));
    e
}

#[test]
fn oracle_agrees_with_formula_and_converges() {
    let coarse = formula_vs_oracle(32, 32);
    let fine = formula_vs_oracle(64, 64);
    assert!(coarse < 0.05 && fine < coarse, "{coarse} {fine}");
}
