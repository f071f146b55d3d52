use halfspace::besov::TimeQuadrature;
use halfspace::data::{divfree_velocity, random_forcing, rng, single_mode};
use halfspace::harness::*;
use halfspace::stokes::{solve_stokes, StokesInput};
use halfspace::{Parity, SpectralField, SpectralGrid, VectorField, WholeField};
use statrs::function::gamma::{gamma, gamma_lr};
use std::f64::consts::PI;

fn uniform(t: f64, n: usize) -> Vec<f64> {
    (0..=n).map(|i| t * i as f64 / n as f64).collect()
}

fn box_volume(g: &SpectralGrid) -> f64 {
    g.l_h.powi(g.d as i32 - 1) * 2.0 * g.l_z
}

/// `||cos||_{L^p}` over a region of volume `vol`.
fn cos_lp(vol: f64, p: f64) -> f64 {
    (vol * gamma((p + 1.0) / 2.0) / (PI.sqrt() * gamma(p / 2.0 + 1.0))).powf(1.0 / p)
}

fn cos_mode(g: SpectralGrid, a: i64, c: i64) -> WholeField {
    WholeField::from_fn(g, Parity::Raw, |x, z| (2.0 * PI * a as f64 * x[0] / g.l_h + PI * c as f64 * z / g.l_z).cos())
}

fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs()
}

#[test]
fn constant_series_closed_forms() {
    let g = SpectralGrid::new(2, 8, 8, 1.5, 0.7).unwrap();
    let c = -2.5;
    let times = vec![0.0, 0.1, 0.15, 0.4, 0.9, 1.3];
    let frames: Vec<Vec<SpectralField>> = times.iter().map(|_| vec![SpectralField::from_fn(g, Parity::Raw, |_, _| c)]).collect();
    let z = TimeSeriesField::from_half(times.clone(), &frames, Quantity::U).unwrap();
    let vol = g.l_h * g.l_z;
    for (r, p, t) in [(2.0f64, 2.0f64, 1.3f64), (1.5, 3.0, 0.7), (4.0, 1.0, 1.0)] {
        let expect = c.abs() * vol.powf(1.0 / p) * t.powf(1.0 / r);
        assert!(rel(mixed_norm(&z, r, p, t).unwrap(), expect) < 1e-12);
        for alpha in [0.25, 0.6] {
            let k = alpha * r;
            let expect = c.abs() * vol.powf(1.0 / p) * (t.powf(k + 1.0) / (k + 1.0)).powf(1.0 / r);
            assert!(rel(weighted_mixed_norm(&z, alpha, r, p, t).unwrap(), expect) < 1e-10);
        }
    }
    assert!(mixed_norm(&z, 2.0, 2.0, 2.0).is_err());
    assert!(weighted_mixed_norm(&z, -0.1, 2.0, 2.0, 1.0).is_err());
}

#[test]
fn heat_mode_weighted_norm_matches_incomplete_gamma() {
    let g = SpectralGrid::new(2, 8, 8, 4.0, 2.0).unwrap();
    let f = cos_mode(g, 1, 0);
    let lam = (2.0 * PI / g.l_h).powi(2);
    let t_end = 2.0;
    let times = uniform(t_end, 8000);
    let frames: Vec<Vec<WholeField>> = times.iter().map(|&t| vec![f.heat(1.0, t)]).collect();
    let z = TimeSeriesField::from_whole(times, &frames, Quantity::U).unwrap();
    for (alpha, r, p) in [(0.3, 2.0, 2.0), (0.0, 3.0, 4.0), (0.5, 1.0, 2.0)] {
        let k: f64 = alpha * r;
        let integral = gamma_lr(k + 1.0, r * lam * t_end) * gamma(k + 1.0) / (r * lam).powf(k + 1.0);
        let expect = cos_lp(box_volume(&g), p) * integral.powf(1.0 / r);
        let got = weighted_mixed_norm(&z, alpha, r, p, t_end).unwrap();
        assert!(rel(got, expect) < 1e-6, "{alpha} {r} {p}: {got} vs {expect}");
    }
}

#[test]
fn ledger_records_the_solution_norm() {
    let g = SpectralGrid::new(2, 16, 16, 1.0, 1.0).unwrap();
    let input = StokesInput::new(1.0, VectorField::zeros(g), uniform(0.2, 4));
    let sol = solve_stokes(&input).unwrap();
    let rep = xpr_norm(&sol, 2.0, 2.0, 0.2).unwrap();
    assert_eq!(rep.total, 0.0);
    let mut ledger = NormLedger::default();
    rep.record(&mut ledger, 2.0, 2.0, 0.2);
    assert_eq!(ledger.rows.len(), 4);
    let x = ledger.find("(u, grad pi)").unwrap().value;
    let parts: f64 = ledger.rows.iter().take(3).map(|r| r.value).sum();
    assert_eq!(x, parts);
}

/// Zero-trace divergence-free velocity resolved at every grid used here.
fn smooth_velocity(g: &SpectralGrid) -> VectorField {
    let w = g.l_z / 5.0;
    let psi = single_mode(g, [1, 0], Parity::Raw, |z| (z / w).powi(2) * (-(z - 1.5 * w).powi(2) / (w * w)).exp());
    VectorField::new(vec![psi.d_z(), psi.d_h(0).neg()])
}

#[test]
fn solution_norm_transforms_under_viscosity_rescaling() {
    let g = SpectralGrid::new(2, 32, 32, 1.0, 2.0).unwrap();
    let u0 = smooth_velocity(&g);
    let (p, r) = (3.0, 4.0);
    let t_old = uniform(0.2, 40);
    let base = xpr_norm(&solve_stokes(&StokesInput::new(1.0, u0.clone(), t_old.clone())).unwrap(), p, r, 0.2).unwrap();
    for mu in [0.5, 2.0] {
        let old = xpr_norm(&solve_stokes(&StokesInput::new(mu, u0.clone(), t_old.iter().map(|t| t / mu).collect())).unwrap(), p, r, 0.2 / mu).unwrap();
        let new_times: Vec<f64> = t_old.clone();
        let new = xpr_norm(&solve_stokes(&StokesInput::new(1.0, u0.scale(mu), new_times)).unwrap(), p, r, 0.2).unwrap();
        let f = mu.powf(1.0 / r);
        assert!(rel(new.besov_part, f * old.besov_part) < 1e-9);
        assert!(rel(new.evolution_part, f * old.evolution_part) < 1e-9);
        assert!(rel(new.pressure_part, f * old.pressure_part) < 1e-9);
        assert!(rel(new.total, mu * base.total) < 1e-9);
    }
}

#[test]
fn free_evolution_solution_norm_is_grid_stable() {
    let times = uniform(0.1, 20);
    let vals: Vec<f64> = [32, 128]
        .iter()
        .map(|&n| {
            let g = SpectralGrid::new(2, n, n, 1.0, 1.0).unwrap();
            let sol = solve_stokes(&StokesInput::new(1.0, smooth_velocity(&g), times.clone())).unwrap();
            xpr_norm(&sol, 2.0, 2.0, 0.1).unwrap().total
        })
        .collect();
    assert!(vals[0].is_finite() && vals[0] > 0.0);
    assert!(rel(vals[0], vals[1]) < 0.1, "{vals:?}");
}

fn closed_form_maxreg(lam: f64, t: f64) -> f64 {
    // r = 2: (int_0^T (1 - e^{-lam s})^2 ds / T)^{1/2}
    let i = t - 2.0 * (1.0 - (-lam * t).exp()) / lam + (1.0 - (-2.0 * lam * t).exp()) / (2.0 * lam);
    (i / t).sqrt()
}

#[test]
fn maxreg_single_mode_closed_form() {
    let g = SpectralGrid::new(2, 8, 8, 1.0, 1.0).unwrap();
    let f = cos_mode(g, 1, 0);
    let mu = 0.5;
    let times = uniform(1.0, 2000);
    let fs: Vec<WholeField> = times.iter().map(|_| f.clone()).collect();
    let rep = maxreg_ratio(&times, &fs, mu, 2.0, 2.0, 1.0, None).unwrap();
    let expect = closed_form_maxreg(mu * (2.0 * PI).powi(2), 1.0);
    assert!(rel(rep.ratio, expect) < 1e-8, "{} vs {expect}", rep.ratio);
    let zero: Vec<WholeField> = times.iter().map(|_| WholeField::zeros(g, Parity::Raw)).collect();
    assert_eq!(maxreg_ratio(&times, &zero, mu, 2.0, 2.0, 1.0, None).unwrap().ratio, 0.0);
}

#[test]
fn maxreg_bounded_and_refinement_stable() {
    let times = uniform(1.0, 200);
    let mut worst = 0.0f64;
    for seed in 0..20 {
        let mut ratios = Vec::new();
        for n in [32, 128] {
            let g = SpectralGrid::new(2, n, n / 2, 1.0, 0.5).unwrap();
            let f = random_forcing(&g, &times, 6, 4, &mut rng(seed));
            ratios.push(maxreg_ratio(&times, &f, 1.0, 2.0, 2.0, 1.0, None).unwrap().ratio);
        }
        assert!(ratios[0] < 5.0 && ratios[0] > 0.0);
        assert!(rel(ratios[1], ratios[0]) < 0.1, "{ratios:?}");
        worst = worst.max(ratios[0]);
    }
    // Plancherel bound for p = r = 2
    assert!(worst <= 1.0 + 1e-9);
}

#[test]
fn weighted_maxreg_finite_in_admissible_range() {
    let g = SpectralGrid::new(2, 32, 16, 1.0, 0.5).unwrap();
    let times = uniform(1.0, 200);
    let f = random_forcing(&g, &times, 6, 4, &mut rng(3));
    for alpha in [0.0, 0.2, 0.4] {
        let rep = maxreg_ratio(&times, &f, 1.0, 2.0, 2.0, 1.0, Some(alpha)).unwrap();
        assert!(rep.ratio.is_finite() && rep.ratio > 0.0 && rep.ratio < 5.0, "{alpha}: {}", rep.ratio);
    }
    assert!(maxreg_ratio(&times, &f, 1.0, 2.0, 2.0, 1.0, Some(0.5)).is_err());
    assert!(maxreg_ratio(&times, &f, 1.0, 1.0, 2.0, 1.0, None).is_err());
}

#[test]
fn maxreg_is_viscosity_invariant() {
    let g = SpectralGrid::new(2, 16, 8, 1.0, 0.5).unwrap();
    let times = uniform(1.0, 100);
    let f = random_forcing(&g, &times, 4, 3, &mut rng(5));
    let base = maxreg_ratio(&times, &f, 1.0, 2.0, 3.0, 1.0, Some(0.3)).unwrap().ratio;
    for mu in [0.25, 4.0] {
        let ts: Vec<f64> = times.iter().map(|t| t / mu).collect();
        let r = maxreg_ratio(&ts, &f, mu, 2.0, 3.0, 1.0 / mu, Some(0.3)).unwrap().ratio;
        assert!(rel(r, base) < 1e-6, "{mu}: {r} vs {base}");
    }
}

#[test]
fn heat_decay_at_equal_exponents_is_the_mode_factor() {
    let g = SpectralGrid::new(2, 16, 8, 1.0, 0.5).unwrap();
    let f = cos_mode(g, 2, 1);
    let lam = (4.0 * PI).powi(2) + (PI / 0.5).powi(2);
    let mu = 0.7;
    let times: Vec<f64> = (0..30).map(|i| 1e-4 * 1.5f64.powi(i)).collect();
    let rep = lplq_check(&f, 3.0, 3.0, mu, &times, false).unwrap();
    for (t, v) in &rep.series {
        assert!((v - (-mu * lam * t).exp()).abs() < 1e-12);
        assert!(*v <= 1.0);
    }
    let rep = lplq_check(&f, 2.0, 4.0, mu, &times, true).unwrap();
    assert!(rep.ratio.is_finite() && !rep.decade_max.is_empty());
    assert!(lplq_check(&f, 4.0, 2.0, mu, &times, false).is_err());
}

#[test]
fn free_decay_single_band_matches_gamma_oracle() {
    // |xi| = 1 = 2^0
    let g = SpectralGrid::new(2, 16, 8, 2.0 * PI, 2.0).unwrap();
    let f = cos_mode(g, 1, 0);
    let vol = box_volume(&g);
    for (which, s, p, r) in [
        (FreeDecay::D1, 0.5, 2.0, 2.0),
        (FreeDecay::D1, -1.0, 4.0, 1.0),
        (FreeDecay::D2, 0.0, 2.0, 3.0),
        (FreeDecay::D3, -0.5, 2.0, 2.0),
    ] {
        let (_, w) = which.exponents(s, r).unwrap();
        let a = w + 1.0 / r;
        // ||D^m e^{t Delta} cos|| = e^{-t} ||cos||: |xi| = 1 and the derivative is a unit factor
        let lhs = cos_lp(vol, p) * (gamma(a * r) / r.powf(a * r)).powf(1.0 / r);
        let expect = lhs / cos_lp(vol, p);
        let rep = free_decay_check(which, &f, s, p, r, 1.0, TimeQuadrature::adapted(&g, 1.0)).unwrap();
        assert!(rel(rep.ratio, expect) < 1e-6, "{which:?} {s}: {} vs {expect}", rep.ratio);
        assert_eq!(rep.unimodal, Some(true));
        let rep4 = free_decay_check(which, &f, s, p, r, 4.0, TimeQuadrature::adapted(&g, 4.0)).unwrap();
        assert!(rel(rep4.ratio, rep.ratio) < 1e-6);
    }
    assert!(FreeDecay::D1.exponents(2.0, 2.0).is_err());
    assert!(FreeDecay::D2.exponents(1.0, 2.0).is_err());
    assert!(FreeDecay::D3.exponents(0.0, 2.0).is_err());
}

/// `int_0^t e^{-lam (t - tau)} hat(tau) dtau` by composite Simpson on each linear piece.
fn hat_response(t: f64, lam: f64, a: f64, b: f64, c: f64) -> f64 {
    let piece = |lo: f64, hi: f64, h: &dyn Fn(f64) -> f64| -> f64 {
        let hi = hi.min(t);
        if hi <= lo {
            return 0.0;
        }
        let n = 2000;
        let dx = (hi - lo) / n as f64;
        let g = |x: f64| (-lam * (t - x)).exp() * h(x);
        let mut s = g(lo) + g(hi);
        for i in 1..n {
            s += g(lo + i as f64 * dx) * if i % 2 == 1 { 4.0 } else { 2.0 };
        }
        s * dx / 3.0
    };
    piece(a, b, &|x| (x - a) / (b - a)) + piece(b, c, &|x| (c - x) / (c - b))
}

#[test]
fn duhamel_gradient_matches_direct_kernel_quadrature() {
    let g = SpectralGrid::new(2, 16, 8, 1.0, 0.5).unwrap();
    let f1 = cos_mode(g, 1, 0);
    let xi = 2.0 * PI;
    let mu = 0.3;
    let lam = mu * xi * xi;
    let times = uniform(1.0, 40);
    let j = 10;
    let f: Vec<WholeField> = (0..times.len()).map(|i| if i == j { f1.clone() } else { WholeField::zeros(g, Parity::Raw) }).collect();
    let e = DuhamelExponents { p: 2.0, q: 4.0, r: 2.0, s: 2.0, alpha: 0.2, variant: 1 };
    let rep = duhamel_check(DuhamelOp::B, &e, &times, &f, mu, 1.0).unwrap();
    let beta = rep.exponents[1].1;
    let vol = box_volume(&g);
    for &(t, v) in rep.series.iter().skip(j + 1) {
        let oracle = t.powf(beta) * xi * hat_response(t, lam, times[j - 1], times[j], times[j + 1]) * cos_lp(vol, 4.0);
        assert!(rel(v, oracle) < 1e-6, "t={t}: {v} vs {oracle}");
    }
    // C: the field itself
    let e = DuhamelExponents { p: 2.0, q: 2.0, r: 2.0, s: f64::INFINITY, alpha: 0.0, variant: 2 };
    let rep = duhamel_check(DuhamelOp::C, &e, &times, &f, mu, 1.0).unwrap();
    let gamma_w = rep.exponents[1].1;
    for &(t, v) in rep.series.iter().skip(j + 1) {
        let oracle = t.powf(gamma_w) * hat_response(t, lam, times[j - 1], times[j], times[j + 1]) * cos_lp(vol, 2.0);
        assert!(rel(v, oracle) < 1e-6);
    }
}

#[test]
fn duhamel_relations_are_enforced() {
    let g = SpectralGrid::new(2, 8, 8, 1.0, 1.0).unwrap();
    let times = uniform(1.0, 10);
    let f = random_forcing(&g, &times, 2, 2, &mut rng(1));
    let ok = DuhamelExponents { p: 2.0, q: 4.0, r: 3.0, s: 3.0, alpha: 0.3, variant: 1 };
    let beta = duhamel_weight(DuhamelOp::B, &ok, 2).unwrap();
    assert!((beta - (0.3 + 0.5 * (0.5 - 0.25) * 2.0 - 0.5)).abs() < 1e-15);
    let gam = duhamel_weight(DuhamelOp::C, &DuhamelExponents { variant: 3, s: 6.0, ..ok }, 2).unwrap();
    assert!((gam - (0.3 + 0.25 - 1.0 + 1.0 / 3.0 - 1.0 / 6.0)).abs() < 1e-15);
    let bad = [
        (DuhamelOp::B, DuhamelExponents { p: 4.0, q: 2.0, ..ok }, "B1"),
        (DuhamelOp::B, DuhamelExponents { alpha: 0.7, ..ok }, "B1"),
        (DuhamelOp::B, DuhamelExponents { q: 100.0, p: 1.5, ..ok }, "B1"),
        (DuhamelOp::B, DuhamelExponents { variant: 2, s: f64::INFINITY, q: 3.0, ..ok }, "B2"),
        (DuhamelOp::C, DuhamelExponents { variant: 2, s: f64::INFINITY, p: 1.1, q: 50.0, ..ok }, "C2"),
        (DuhamelOp::C, DuhamelExponents { variant: 3, s: 2.0, ..ok }, "C3"),
    ];
    for (op, e, name) in bad {
        match duhamel_check(op, &e, &times, &f, 1.0, 1.0) {
            Err(halfspace::Error::Exponent { relation, .. }) => assert_eq!(relation, name),
            other => panic!("{e:?} accepted: {other:?}"),
        }
    }
}

#[test]
fn duhamel_ratio_is_viscosity_invariant() {
    let g = SpectralGrid::new(2, 16, 8, 1.0, 0.5).unwrap();
    let times = uniform(1.0, 50);
    let f = random_forcing(&g, &times, 3, 3, &mut rng(8));
    let e = DuhamelExponents { p: 2.0, q: 3.0, r: 3.0, s: 6.0, alpha: 0.2, variant: 3 };
    for op in [DuhamelOp::B, DuhamelOp::C] {
        let base = duhamel_check(op, &e, &times, &f, 1.0, 1.0).unwrap().ratio;
        let ts: Vec<f64> = times.iter().map(|t| t / 3.0).collect();
        let r = duhamel_check(op, &e, &ts, &f, 3.0, 1.0 / 3.0).unwrap().ratio;
        assert!(rel(r, base) < 1e-6, "{op:?}");
    }
}

#[test]
fn interpolation_single_mode_closed_forms() {
    // |xi| = 4 with xi_h = 2.4 and xi_z = 3.2; z = cos(xi_h x) sin(xi_z x_d) is odd in x_d
    let g = SpectralGrid::new(2, 16, 16, 2.0 * PI / 2.4, PI / 3.2).unwrap();
    let z = single_mode(&g, [1, 0], Parity::Odd, |x| (3.2 * x).sin());
    let vol = box_volume(&g);
    let l2 = (vol / 4.0).sqrt();
    // m = p = 2, theta = 1/2, r = 1: both sides equal |xi| ||z||
    let r = gn_ratio(&z, GnInequality::Whole { m: 2.0, p: 2.0, theta: 0.5, r: 1.0 }).unwrap();
    assert!((r - 1.0).abs() < 1e-10, "{r}");
    // p = r = 2, theta = 1: ||z||_inf / (2^{k} ||z||_2) with k = 2
    let r = gn_ratio(&z, GnInequality::HalfSup { p: 2.0, r: 2.0 }).unwrap();
    assert!(rel(r, 1.0 / (4.0 * l2)) < 1e-10, "{r}");
    assert_eq!(gn_ratio(&SpectralField::zeros(g), GnInequality::HalfSup { p: 2.0, r: 2.0 }).unwrap(), 0.0);
}

#[test]
fn interpolation_relations_are_enforced() {
    assert!(GnInequality::Whole { m: 2.0, p: 2.0, theta: 0.5, r: 2.0 }.theta(2).is_err());
    assert!(GnInequality::Whole { m: 1.0, p: 2.0, theta: 0.5, r: 1.0 }.theta(2).is_err());
    assert!(GnInequality::HalfSup { p: 1.0, r: 2.0 }.theta(2).is_err());
    assert!(GnInequality::HalfGrad { p: 1.5, p2: 4.0 }.theta(2).is_err());
    assert!(GnInequality::HalfGrad { p: 3.0, p2: 2.5 }.theta(2).is_err());
    let t = GnInequality::HalfGrad { p: 3.0, p2: 6.0 }.theta(2).unwrap();
    assert!((t - (1.0 + 2.0 / 3.0 - 1.0 / 3.0) / (2.0 - 1.0 / 3.0)).abs() < 1e-15);
    // nonzero trace is rejected
    let g = SpectralGrid::new(2, 16, 16, 1.0, 1.0).unwrap();
    let z = SpectralField::from_fn(g, Parity::Raw, |x, _| (2.0 * PI * x[0]).cos());
    assert!(gn_ratio(&z, GnInequality::HalfSup { p: 2.0, r: 2.0 }).is_err());
}

/// Zero-trace scalar: random horizontal modes times `(x_d/w)^2 exp(-((x_d - c)/w)^2)`.
fn smooth_scalar(g: &SpectralGrid, seed: u64) -> SpectralField {
    use rand::Rng;
    let mut r = rng(seed);
    let mut out = SpectralField::zeros(*g);
    for _ in 0..3 {
        let k = [r.random_range(-3i64..=3), 0];
        let w = g.l_z / 6.0;
        let c = g.l_z * r.random_range(0.3..0.5);
        let amp = r.random_range(-1.0..1.0);
        let m = single_mode(g, k, Parity::Raw, |z| (z / w).powi(2) * (-((z - c) / w).powi(2)).exp());
        out = out.add(&m.scale(amp)).unwrap();
    }
    out
}

#[test]
fn interpolation_ratios_bounded_and_refinement_stable() {
    let ineqs = [
        GnInequality::Whole { m: 8.0, p: 2.0, theta: 0.75, r: 2.0 },
        GnInequality::HalfSup { p: 2.0, r: 1.5 },
        GnInequality::HalfGrad { p: 3.0, p2: 6.0 },
    ];
    for ineq in ineqs {
        for seed in 0..50 {
            let mut vals = Vec::new();
            for n in [32, 128] {
                let g = SpectralGrid::new(2, n, n, 1.0, 1.0).unwrap();
                let z = smooth_scalar(&g, seed);
                vals.push(gn_ratio(&z, ineq).unwrap());
            }
            assert!(vals[0] > 0.0 && vals[0] < 10.0, "{ineq:?} seed {seed}: {vals:?}");
            if seed < 10 {
                assert!(rel(vals[1], vals[0]) < 0.1, "{ineq:?} seed {seed}: {vals:?}");
            }
        }
    }
}

#[test]
fn divfree_data_feeds_the_solution_norm() {
    let g = SpectralGrid::new(2, 16, 32, 1.0, 2.0).unwrap();
    let u0 = divfree_velocity(&g, 2, 2, &mut rng(4));
    let sol = solve_stokes(&StokesInput::new(1.0, u0, uniform(0.05, 10))).unwrap();
    let rep = xpr_norm(&sol, 2.0, 2.0, 0.05).unwrap();
    assert!(rep.total.is_finite() && rep.besov_part > 0.0 && rep.evolution_part > 0.0);
}
