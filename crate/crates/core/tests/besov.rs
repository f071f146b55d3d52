use halfspace::besov::*;
use halfspace::data::{interior_scalar, rng};
use halfspace::quadrature::lp_whole;
use halfspace::{ExtMode, Parity, SpectralGrid, WholeField};
use proptest::prelude::*;
use rand::Rng;
use statrs::function::gamma::gamma;
use std::f64::consts::PI;

fn grid(n: usize) -> SpectralGrid {
    SpectralGrid::new(2, n, n / 2, 1.0, 0.5).unwrap()
}

/// Mean-free sum of cosines with lattice wavevectors of the doubled box.
fn random_whole(g: SpectralGrid, kmax: i64, count: usize, seed: u64) -> WholeField {
    let mut r = rng(seed);
    let mut modes = Vec::new();
    while modes.len() < count {
        let a = r.random_range(-kmax..=kmax);
        let b = r.random_range(-kmax..=kmax);
        if a == 0 && b == 0 {
            continue;
        }
        modes.push((a, b, r.random_range(-1.0..1.0), r.random_range(0.0..2.0 * PI)));
    }
    WholeField::from_fn(g, Parity::Raw, |x, z| {
        modes
            .iter()
            .map(|&(a, b, amp, ph)| amp * (2.0 * PI * a as f64 * x[0] / g.l_h + PI * b as f64 * z / g.l_z + ph).cos())
            .sum()
    })
}

fn cos_mode(g: SpectralGrid, a: i64, b: i64) -> WholeField {
    WholeField::from_fn(g, Parity::Raw, |x, z| (2.0 * PI * a as f64 * x[0] / g.l_h + PI * b as f64 * z / g.l_z).cos())
}

/// `||cos||_{L^p}` over a box of volume `vol`.
fn cos_lp(vol: f64, p: f64) -> f64 {
    (vol * gamma((p + 1.0) / 2.0) / (PI.sqrt() * gamma(p / 2.0 + 1.0))).powf(1.0 / p)
}

#[test]
fn profile_is_a_partition() {
    for i in 1..4000 {
        let rho = 0.001 * i as f64;
        let sum: f64 = (-12..12).map(|k| phi((-(k as f64)).exp2() * rho)).sum();
        assert!((sum - 1.0).abs() < 1e-12, "{rho}");
        assert!(phi(rho) >= 0.0);
        if !(0.5..=2.0).contains(&rho) {
            assert_eq!(phi(rho), 0.0);
        }
    }
    assert_eq!(chi(0.5), 1.0);
    assert_eq!(chi(1.0), 0.0);
    assert_eq!(profile_hash().len(), 64);
}

#[test]
fn unit_frequency_lives_in_two_bands() {
    // |xi| = 1: L_h = 2 pi, a = 1
    let g = SpectralGrid::new(2, 32, 16, 2.0 * PI, 2.0).unwrap();
    let f = cos_mode(g, 1, 0);
    // sampling round-off spreads energy of order eps^2 over all bands
    let e0 = lp_block(&f, 0).energy();
    assert!((e0 - f.energy()).abs() < 1e-14);
    for k in LpBands::for_grid(&g).iter() {
        let e = lp_block(&f, k).energy();
        if k != 0 {
            assert!(e < 1e-28 * f.energy(), "band {k}");
        }
    }
    // |xi| = 1.5 sits in the overlap of bands 0 and 1
    let g = SpectralGrid::new(2, 32, 16, 2.0 * PI, 2.0 * PI / 1.5 / 2.0).unwrap();
    let f = cos_mode(g, 0, 1);
    for k in LpBands::for_grid(&g).iter() {
        let e = lp_block(&f, k).energy();
        assert_eq!(e > 1e-20 * f.energy(), k == 0 || k == 1, "band {k}");
    }
}

#[test]
fn blocks_sum_back_and_are_almost_orthogonal() {
    let g = grid(32);
    let f = random_whole(g, 12, 10, 4);
    let bands = LpBands::for_grid(&g);
    let mut sum = WholeField::zeros(g, Parity::Raw);
    for k in bands.iter() {
        sum.axpy(1.0, &lp_block(&f, k)).unwrap();
    }
    let diff = sum.add(&f.scale(-1.0)).unwrap();
    assert!(diff.energy().sqrt() < 1e-10 * f.energy().sqrt());
    assert!(leakage(&f, bands) < 1e-12);
    for k in bands.iter() {
        for j in bands.iter().filter(|j| (j - k).abs() >= 2) {
            assert_eq!(lp_block(&lp_block(&f, k), j).energy(), 0.0);
        }
    }
    assert_eq!(lp_block(&f, bands.k_max + 1).energy(), 0.0);
}

#[test]
fn zero_field_has_zero_norms() {
    let g = grid(16);
    let z = WholeField::zeros(g, Parity::Raw);
    let idx = BesovIndex::new(-1.0, 2.0, 2.0).unwrap();
    assert_eq!(besov_norm(&z, idx), 0.0);
    assert_eq!(heat_char_norm(&z, idx, 1.0, TimeQuadrature::default()).unwrap().value, 0.0);
    assert_eq!(halfspace_besov_norm(&halfspace::SpectralField::zeros(g), idx), 0.0);
}

#[test]
fn single_ring_norm_matches_closed_form() {
    // |xi| = 2^3 exactly: one band, phi = 1 there
    let g = SpectralGrid::new(2, 32, 16, 2.0 * PI / 8.0 * 2.0, 1.0).unwrap();
    let f = cos_mode(g, 2, 0);
    let vol = g.l_h * 2.0 * g.l_z;
    for (s, p, r) in [(0.5, 2.0, 1.0), (-1.0, 4.0, 2.0), (0.2, 6.0, f64::INFINITY), (0.0, 4.0, 2.0)] {
        let idx = BesovIndex::new(s, p, r).unwrap();
        let expect = (3.0 * s).exp2() * cos_lp(vol, p);
        let got = besov_norm(&f, idx);
        assert!((got / expect - 1.0).abs() < 1e-10, "{s} {p} {r}: {got} vs {expect}");
    }
}

#[test]
fn narrow_band_norm_within_two_percent() {
    // |xi| = 8 * 1.06: still inside the flat part of one annulus up to smooth bleed
    let g = SpectralGrid::new(2, 32, 16, 2.0 * PI / (8.0 * 1.06) * 2.0, 1.0).unwrap();
    let f = cos_mode(g, 2, 0);
    let vol = g.l_h * 2.0 * g.l_z;
    let idx = BesovIndex::new(0.5, 2.0, 2.0).unwrap();
    let expect = (3.0 * 0.5f64).exp2() * cos_lp(vol, 2.0);
    assert!((besov_norm(&f, idx) / expect - 1.0).abs() < 0.02);
}

#[test]
fn dyadic_rescaling_law() {
    let g = grid(32);
    let f = random_whole(g, 10, 8, 9);
    for (s, p, r) in [(0.3, 2.0, 2.0), (-0.5, 3.0, 1.0), (-1.0 + 2.0 / 4.0, 4.0, 1.0)] {
        let idx = BesovIndex::new(s, p, r).unwrap();
        let a = besov_norm(&f, idx);
        for j in [1, 2, -1] {
            let fl = dyadic_rescale(&f, j).unwrap();
            let b = besov_norm(&fl, idx);
            let expect = ((s - 2.0 / p) * j as f64).exp2() * a;
            assert!((b / expect - 1.0).abs() < 1e-6, "j={j}: {b} vs {expect}");
        }
    }
    // the critical index is scale invariant for lambda u0(lambda x)
    let idx = BesovIndex::critical(2, 3.0, 1.0).unwrap();
    let a = besov_norm(&f, idx);
    let b = besov_norm(&dyadic_rescale(&f, 1).unwrap().scale(2.0), idx);
    assert!((b / a - 1.0).abs() < 1e-6);
}

#[test]
fn heat_char_single_mode_matches_gamma_oracle() {
    let g = grid(16);
    let f = cos_mode(g, 1, 1);
    let xi2 = (2.0 * PI / g.l_h).powi(2) + (PI / g.l_z).powi(2);
    let vol = g.l_h * 2.0 * g.l_z;
    for (s, p, r, mu) in [(-1.0, 2.0, 2.0, 1.0), (-0.5, 4.0, 1.0, 0.3), (-2.0, 6.0, 4.0, 2.0)] {
        let idx = BesovIndex::new(s, p, r).unwrap();
        let a = -s / 2.0;
        let expect = cos_lp(vol, p) * (gamma(a * r) / (r * mu * xi2).powf(a * r)).powf(1.0 / r);
        let rep = heat_char_norm(&f, idx, mu, TimeQuadrature::adapted(&g, mu)).unwrap();
        assert!((rep.value / expect - 1.0).abs() < 1e-6, "{s} {p} {r}: {} vs {expect}", rep.value);
        assert!(rep.tail < 1e-3);
    }
}

#[test]
fn heat_char_viscosity_scaling() {
    let g = grid(32);
    let f = random_whole(g, 10, 8, 2);
    let idx = BesovIndex::new(-1.0, 2.0, 2.0).unwrap();
    let vals: Vec<f64> = [0.25, 1.0, 4.0]
        .iter()
        .map(|&mu| heat_char_norm(&f, idx, mu, TimeQuadrature::adapted(&g, mu)).unwrap().value * mu.powf(-idx.s / 2.0))
        .collect();
    for v in &vals {
        assert!((v / vals[1] - 1.0).abs() < 0.01, "{vals:?}");
    }
}

#[test]
fn semigroup_bracket_is_bounded_and_resolution_stable() {
    let mut ratios = Vec::new();
    for seed in 0..20 {
        let f = random_whole(grid(32), 8, 6, 100 + seed);
        let b = semigroup_bracket(&f, 2.0, 2.0, 1.0, TimeQuadrature::adapted(f.grid(), 1.0)).unwrap();
        assert!((0.1..=10.0).contains(&b), "seed {seed}: {b}");
        ratios.push(b);
    }
    let f128 = random_whole(grid(128), 8, 6, 100);
    let b128 = semigroup_bracket(&f128, 2.0, 2.0, 1.0, TimeQuadrature::adapted(f128.grid(), 1.0)).unwrap();
    assert!((b128 / ratios[0] - 1.0).abs() < 0.1);
}

#[test]
fn extension_choices_are_comparable() {
    let g = SpectralGrid::new(2, 32, 32, 1.0, 1.0).unwrap();
    for seed in 0..5 {
        let f = interior_scalar(&g, 3, 3, &mut rng(seed));
        for (s, p) in [(0.25, 2.0), (0.1, 3.0), (0.5, 1.5)] {
            let idx = BesovIndex::new(s, p, 2.0).unwrap();
            let a = halfspace_besov_norm(&f, idx);
            let b = besov_norm(&f.extend_quiet(ExtMode::Sym), idx);
            let q = (a / b).max(b / a);
            assert!((1.0..=4.0).contains(&q), "{q}");
        }
    }
}

#[test]
fn heat_char_rejects_nonnegative_s() {
    let g = grid(16);
    let idx = BesovIndex::new(0.0, 2.0, 2.0).unwrap();
    assert!(heat_char_norm(&cos_mode(g, 1, 0), idx, 1.0, TimeQuadrature::default()).is_err());
    assert!(BesovIndex::new(0.0, 0.5, 2.0).is_err());
}

#[test]
fn whole_lp_of_cosine() {
    let g = grid(32);
    let f = cos_mode(g, 3, 2);
    let vol = g.l_h * 2.0 * g.l_z;
    // even integer powers of a trigonometric polynomial are integrated exactly
    for p in [2.0, 4.0, 6.0] {
        assert!((lp_whole(&f, p) / cos_lp(vol, p) - 1.0).abs() < 1e-12);
    }
    for p in [1.0, 3.0] {
        assert!((lp_whole(&f, p) / cos_lp(vol, p) - 1.0).abs() < 1e-2);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn dropping_the_top_band_never_increases(seed in 0u64..1000, s in -1.0f64..1.0, p in 1.0f64..4.0, r in 1.0f64..4.0) {
        let g = grid(16);
        let f = random_whole(g, 8, 5, seed);
        let idx = BesovIndex::new(s, p, r).unwrap();
        let bands = LpBands::for_grid(&g);
        let full = besov_report(&f, idx, bands).value;
        let cut = besov_report(&f, idx, bands.without_top()).value;
        prop_assert!(cut <= full * (1.0 + 1e-14));
    }

    #[test]
    fn besov_norm_is_homogeneous_and_subadditive(seed in 0u64..1000, c in -3.0f64..3.0) {
        let g = grid(16);
        let f = random_whole(g, 6, 4, seed);
        let h = random_whole(g, 6, 4, seed + 7);
        let idx = BesovIndex::new(0.4, 2.0, 1.0).unwrap();
        let nf = besov_norm(&f, idx);
        prop_assert!((besov_norm(&f.scale(c), idx) - c.abs() * nf).abs() <= 1e-12 * nf.max(1.0));
        prop_assert!(besov_norm(&f.add(&h).unwrap(), idx) <= (nf + besov_norm(&h, idx)) * (1.0 + 1e-12));
    }
}
