//! Seeded test-data generators.

use crate::error::{Error, Result};
use crate::field::{BoundaryFunction, Parity, SpectralField, VectorField, WholeField};
use crate::grid::SpectralGrid;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Random horizontal Fourier content: a few integer wavevectors with `1 <= |k|_inf <= k_max`.
#[derive(Clone, Debug)]
pub struct HorizontalModes {
    pub modes: Vec<([i64; 2], f64, f64)>,
}

impl HorizontalModes {
    pub fn random(d: usize, k_max: usize, count: usize, rng: &mut impl Rng) -> Self {
        let k = k_max as i64;
        let modes = (0..count)
            .map(|_| loop {
                let k0 = rng.random_range(-k..=k);
                let k1 = if d == 3 { rng.random_range(-k..=k) } else { 0 };
                if k0 != 0 || k1 != 0 {
                    let amp: f64 = StandardNormal.sample(rng);
                    let phase = rng.random_range(0.0..2.0 * PI);
                    break ([k0, k1], amp, phase);
                }
            })
            .collect();
        HorizontalModes { modes }
    }

    pub fn single(k: [i64; 2]) -> Self {
        HorizontalModes { modes: vec![(k, 1.0, 0.0)] }
    }

    pub fn eval(&self, l_h: f64, x: [f64; 2]) -> f64 {
        self.modes
            .iter()
            .map(|(k, a, ph)| a * (2.0 * PI / l_h * (k[0] as f64 * x[0] + k[1] as f64 * x[1]) + ph).cos())
            .sum()
    }
}

/// Gaussian bump `exp(-((z - c)/w)^2)`.
pub fn bump(z: f64, center: f64, width: f64) -> f64 {
    let s = (z - center) / width;
    (-s * s).exp()
}

/// Vertical placement of interior bumps: negligible at both `z = 0` and `z = L_z`.
fn interior_profile(grid: &SpectralGrid, rng: &mut impl Rng) -> (f64, f64) {
    let w = grid.l_z / 16.0;
    let c = grid.l_z * rng.random_range(0.35..0.65);
    (c, w)
}

/// Mean-free field supported away from both ends of the vertical interval.
pub fn interior_scalar(grid: &SpectralGrid, k_max: usize, count: usize, rng: &mut impl Rng) -> SpectralField {
    let parts: Vec<(HorizontalModes, f64, f64)> = (0..count)
        .map(|_| {
            let (c, w) = interior_profile(grid, rng);
            (HorizontalModes::random(grid.d, k_max, 1, rng), c, w)
        })
        .collect();
    let l_h = grid.l_h;
    SpectralField::from_fn(*grid, Parity::Odd, |x, z| parts.iter().map(|(m, c, w)| m.eval(l_h, x) * bump(z, *c, *w)).sum())
}

/// Mean-free field with a nonzero trace and normal derivative: interior bumps plus
/// boundary-hugging Gaussians (even in `z`, so their even extension is smooth) plus a
/// harmonic lift of a random boundary function.
pub fn boundary_scalar(grid: &SpectralGrid, k_max: usize, count: usize, rng: &mut impl Rng) -> SpectralField {
    let interior = interior_scalar(grid, k_max, count, rng);
    let modes = HorizontalModes::random(grid.d, k_max, count, rng);
    let w = grid.l_z / 10.0;
    let l_h = grid.l_h;
    let near = SpectralField::from_fn(*grid, Parity::Raw, |x, z| modes.eval(l_h, x) * bump(z, 0.0, w));
    let hb = random_boundary(grid, k_max, count, rng).harmonic_extend();
    interior.add(&near).and_then(|f| f.add(&hb)).expect("same grid").with_parity(Parity::Raw)
}

pub fn random_boundary(grid: &SpectralGrid, k_max: usize, count: usize, rng: &mut impl Rng) -> BoundaryFunction {
    let modes = HorizontalModes::random(grid.d, k_max, count, rng);
    let l_h = grid.l_h;
    BoundaryFunction::from_fn(*grid, |x| modes.eval(l_h, x))
}

/// Divergence-free velocity with zero trace from interior stream functions.
///
/// `d = 2`: `u = (d_2 psi, -d_1 psi)`; `d = 3`: `u = (d_3 a, d_3 b, -d_1 a - d_2 b)`.
/// Derivatives are spectral, so the discrete divergence vanishes to rounding.
pub fn divfree_velocity(grid: &SpectralGrid, k_max: usize, count: usize, rng: &mut impl Rng) -> VectorField {
    if grid.d == 2 {
        let psi = interior_scalar(grid, k_max, count, rng);
        VectorField::new(vec![psi.d_z(), psi.d_h(0).neg()])
    } else {
        let a = interior_scalar(grid, k_max, count, rng);
        let b = interior_scalar(grid, k_max, count, rng);
        let w = a.d_h(0).add(&b.d_h(1)).expect("same grid").neg();
        VectorField::new(vec![a.d_z(), b.d_z(), w])
    }
}

/// Single-mode convection cell from `psi = amp cos(2 pi k x_1 / L_h) (z/l)^2 e^{-(z/l)^2}`:
/// `u^1 = d_z psi`, `u^d = -d_1 psi`, other components zero. The profile is even in `z`, so
/// the symmetric extension is smooth; the trace vanishes and so does the discrete divergence.
pub fn cell_velocity(grid: &SpectralGrid, k: i64, ell: f64, amp: f64) -> VectorField {
    let psi = single_mode(grid, [k, 0], Parity::Even, |z| {
        let s = (z / ell).powi(2);
        amp * s * (-s).exp()
    });
    let mut comps = vec![psi.d_z()];
    if grid.d == 3 {
        comps.push(SpectralField::zeros(*grid));
    }
    comps.push(psi.d_h(0).neg());
    VectorField::new(comps)
}

/// `cos(2 pi k.x / L_h)` times a profile in `z`.
pub fn single_mode(grid: &SpectralGrid, k: [i64; 2], parity: Parity, profile: impl Fn(f64) -> f64) -> SpectralField {
    let m = HorizontalModes::single(k);
    let l_h = grid.l_h;
    SpectralField::from_fn(*grid, parity, |x, z| m.eval(l_h, x) * profile(z))
}

/// Smoothing of rough data: symmetric extension, convolution with the rescaled bump
/// `n^d chi(n x)`, restriction. Convolution weights are nonnegative and sum to one, so
/// `||a_n||_inf <= ||a||_inf` exactly up to rounding.
pub fn mollify(grid: &SpectralGrid, samples: &[f64], n: f64) -> Result<Vec<f64>> {
    if samples.len() != grid.half_len() {
        return Err(Error::Shape { expected: grid.half_len(), got: samples.len() });
    }
    if !(n > 0.0) {
        return Err(Error::InvalidArgument("mollifier parameter must be positive".into()));
    }
    let nzh = grid.nz_half();
    let (dx, dz) = (grid.dx(), grid.dz());
    let radius = 1.0 / n;
    let rx = (radius / dx).floor() as i64;
    let rz = (radius / dz).floor() as i64;
    let ry = if grid.d == 3 { rx } else { 0 };
    let chi = |r: f64| if r < 1.0 { (-1.0 / (1.0 - r * r)).exp() } else { 0.0 };
    let mut stencil = Vec::new();
    for a in -rx..=rx {
        for b in -ry..=ry {
            for c in -rz..=rz {
                let r = ((a as f64 * dx).powi(2) + (b as f64 * dx).powi(2) + (c as f64 * dz).powi(2)).sqrt() * n;
                let w = chi(r);
                if w > 0.0 {
                    stencil.push((a, b, c, w));
                }
            }
        }
    }
    if stencil.is_empty() {
        return Ok(samples.to_vec());
    }
    let nh = grid.n_h as i64;
    let nz = grid.n_z as i64;
    let mut out = vec![0.0; samples.len()];
    for h in 0..grid.n_hmodes() {
        let idx = grid.h_multi(h);
        for j in 0..nzh {
            let (mut acc, mut wsum) = (0.0, 0.0);
            for &(a, b, c, w) in &stencil {
                let i0 = (idx[0] as i64 + a).rem_euclid(nh) as usize;
                let i1 = (idx[1] as i64 + b).rem_euclid(nh) as usize;
                // symmetric reflection at z = 0, clamp at the far end
                let jj = (j as i64 + c).abs().min(nz) as usize;
                let hh = grid.h_index([i0, i1]);
                acc += w * samples[hh * nzh + jj];
                wsum += w;
            }
            out[h * nzh + j] = acc / wsum;
        }
    }
    Ok(out)
}

/// Plane waves of the doubled box: wavevector `(2 pi a / L_h, [2 pi b / L_h,] pi c / L_z)`.
#[derive(Clone, Debug)]
pub struct BoxModes {
    pub modes: Vec<([i64; 3], f64, f64)>,
}

impl BoxModes {
    /// `count` random nonzero lattice wavevectors with `|k|_inf <= k_max`.
    pub fn random(d: usize, k_max: usize, count: usize, rng: &mut impl Rng) -> Self {
        let k = k_max as i64;
        let modes = (0..count)
            .map(|_| loop {
                let a = rng.random_range(-k..=k);
                let b = if d == 3 { rng.random_range(-k..=k) } else { 0 };
                let c = rng.random_range(-k..=k);
                if a != 0 || b != 0 || c != 0 {
                    let amp: f64 = StandardNormal.sample(rng);
                    break ([a, b, c], amp, rng.random_range(0.0..2.0 * PI));
                }
            })
            .collect();
        BoxModes { modes }
    }

    pub fn eval(&self, grid: &SpectralGrid, x: [f64; 2], z: f64) -> f64 {
        let kh = 2.0 * PI / grid.l_h;
        let kz = PI / grid.l_z;
        self.modes
            .iter()
            .map(|(k, a, ph)| a * (kh * (k[0] as f64 * x[0] + k[1] as f64 * x[1]) + kz * k[2] as f64 * z + ph).cos())
            .sum()
    }

    pub fn field(&self, grid: &SpectralGrid) -> WholeField {
        WholeField::from_fn(*grid, Parity::Raw, |x, z| self.eval(grid, x, z))
    }
}

/// Mean-free band-limited field on the doubled box.
pub fn random_whole(grid: &SpectralGrid, k_max: usize, count: usize, rng: &mut impl Rng) -> WholeField {
    BoxModes::random(grid.d, k_max, count, rng).field(grid)
}

/// Band-limited forcing samples `sum_k a_k(t) e_k(x)` with random smooth time profiles
/// `a_k(t) = sin(omega_k t + psi_k)`.
pub fn random_forcing(grid: &SpectralGrid, times: &[f64], k_max: usize, count: usize, rng: &mut impl Rng) -> Vec<WholeField> {
    let modes: Vec<BoxModes> = (0..count).map(|_| BoxModes::random(grid.d, k_max, 1, rng)).collect();
    let shapes: Vec<WholeField> = modes.iter().map(|m| m.field(grid)).collect();
    let profiles: Vec<(f64, f64)> = (0..count).map(|_| (rng.random_range(0.5..8.0), rng.random_range(0.0..2.0 * PI))).collect();
    times
        .iter()
        .map(|&t| {
            let mut f = WholeField::zeros(*grid, Parity::Raw);
            for (shape, (om, ps)) in shapes.iter().zip(&profiles) {
                f.axpy((om * t + ps).sin(), shape).expect("same grid");
            }
            f
        })
        .collect()
}

/// Declarative generator description used by configuration files.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub enum Generator {
    BandLimitedRandom { k_max: usize, count: usize },
    SingleMode { k: [i64; 2] },
    GaussianBump { center: f64, width: f64 },
    Smoothing { n: f64 },
}
