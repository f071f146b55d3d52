//! Multilinear interpolation of half-space samples at arbitrary points, and pointwise
//! evaluation of spectral fields.
//!
//! Points are `(x_1, x_2, z)`; `x_2` is ignored when `d = 2`.

use crate::field::SpectralField;
use crate::grid::SpectralGrid;
use num_complex::Complex64 as C64;
use rayon::prelude::*;

/// Cell coordinate `x / h`, snapped to the node when rounding put it a hair off, so that
/// grid-aligned points get exact unit weights.
fn cell_coord(x: f64, h: f64) -> f64 {
    let s = x / h;
    let r = s.round();
    if (s - r).abs() < 1e-9 {
        r
    } else {
        s
    }
}

/// Multilinear interpolation stencil at `pos = (x_1, x_2, z)`: periodic horizontally,
/// `z` reflected at 0 and clamped at `L_z`. Weights are nonnegative and sum to one.
pub fn stencil(g: &SpectralGrid, pos: [f64; 3]) -> ([usize; 8], [f64; 8], usize) {
    let nzh = g.nz_half();
    let axis = |x: f64| {
        let s = cell_coord(x, g.dx()).rem_euclid(g.n_h as f64);
        let i = (s.floor() as usize).min(g.n_h - 1);
        (i, (i + 1) % g.n_h, s - i as f64)
    };
    let mut z = pos[2].abs();
    z = z.min(g.l_z);
    let sz = cell_coord(z, g.dz());
    let j = (sz.floor() as usize).min(g.n_z - 1);
    let fz = (sz - j as f64).clamp(0.0, 1.0);
    let (i0, i0n, f0) = axis(pos[0]);
    let hs: Vec<(usize, f64)> = if g.d == 2 {
        vec![(g.h_index([i0, 0]), 1.0 - f0), (g.h_index([i0n, 0]), f0)]
    } else {
        let (i1, i1n, f1) = axis(pos[1]);
        vec![
            (g.h_index([i0, i1]), (1.0 - f0) * (1.0 - f1)),
            (g.h_index([i0n, i1]), f0 * (1.0 - f1)),
            (g.h_index([i0, i1n]), (1.0 - f0) * f1),
            (g.h_index([i0n, i1n]), f0 * f1),
        ]
    };
    let mut idx = [0; 8];
    let mut w = [0.0; 8];
    let mut n = 0;
    for (h, wh) in hs {
        for (jj, wz) in [(j, 1.0 - fz), (j + 1, fz)] {
            idx[n] = h * nzh + jj;
            w[n] = wh * wz;
            n += 1;
        }
    }
    (idx, w, n)
}

pub fn interp(g: &SpectralGrid, data: &[f64], pos: [f64; 3]) -> f64 {
    let (idx, w, n) = stencil(g, pos);
    (0..n).map(|k| w[k] * data[idx[k]]).sum()
}

fn catmull_rom(t: f64) -> [f64; 4] {
    let (t2, t3) = (t * t, t * t * t);
    [(-t3 + 2.0 * t2 - t) / 2.0, (3.0 * t3 - 5.0 * t2 + 2.0) / 2.0, (-3.0 * t3 + 4.0 * t2 + t) / 2.0, (t3 - t2) / 2.0]
}

/// Vertical cubic weights as `(j, w)` pairs; the missing node past either end is replaced
/// by its quadratic extrapolation from the three nearest samples.
fn cubic_z(g: &SpectralGrid, z: f64) -> Vec<(usize, f64)> {
    let z = z.abs().min(g.l_z);
    let sz = cell_coord(z, g.dz());
    let j = (sz.floor() as usize).min(g.n_z - 1);
    let w = catmull_rom((sz - j as f64).clamp(0.0, 1.0));
    let mut out = Vec::with_capacity(6);
    for (k, wk) in w.iter().enumerate() {
        let jj = j as isize + k as isize - 1;
        if jj < 0 {
            out.extend([(0, 3.0 * wk), (1, -3.0 * wk), (2, *wk)]);
        } else if jj as usize > g.n_z {
            let n = g.n_z;
            out.extend([(n, 3.0 * wk), (n - 1, -3.0 * wk), (n - 2, *wk)]);
        } else {
            out.push((jj as usize, *wk));
        }
    }
    out
}

/// Tensor Catmull-Rom interpolation (continuously differentiable, third order): periodic
/// horizontally, `z` reflected at 0 and clamped at `L_z` as in [`stencil`].
pub fn cubic_interp(g: &SpectralGrid, data: &[f64], pos: [f64; 3]) -> f64 {
    let nzh = g.nz_half();
    let axis = |x: f64| {
        let s = cell_coord(x, g.dx()).rem_euclid(g.n_h as f64);
        let i = (s.floor() as usize).min(g.n_h - 1);
        let w = catmull_rom(s - i as f64);
        let n = g.n_h as isize;
        let mut out = [(0usize, 0.0); 4];
        for k in 0..4 {
            out[k] = ((i as isize + k as isize - 1).rem_euclid(n) as usize, w[k]);
        }
        out
    };
    let zw = cubic_z(g, pos[2]);
    let a0 = axis(pos[0]);
    let a1 = if g.d == 3 { axis(pos[1]) } else { [(0, 1.0), (0, 0.0), (0, 0.0), (0, 0.0)] };
    let mut acc = 0.0;
    for &(i0, w0) in &a0 {
        for &(i1, w1) in &a1 {
            if w1 == 0.0 {
                continue;
            }
            let base = g.h_index([i0, i1]) * nzh;
            let col: f64 = zw.iter().map(|&(j, wz)| wz * data[base + j]).sum();
            acc += w0 * w1 * col;
        }
    }
    acc
}

/// [`velocity_at`] with [`cubic_interp`].
pub fn cubic_velocity_at(g: &SpectralGrid, u: &[Vec<f64>], pos: [f64; 3]) -> [f64; 3] {
    if g.d == 2 {
        [cubic_interp(g, &u[0], pos), 0.0, cubic_interp(g, &u[1], pos)]
    } else {
        [cubic_interp(g, &u[0], pos), cubic_interp(g, &u[1], pos), cubic_interp(g, &u[2], pos)]
    }
}

/// Node position `(x_1, x_2, z)` of half-space sample `i`.
pub fn node(g: &SpectralGrid, i: usize) -> [f64; 3] {
    let nzh = g.nz_half();
    let x = g.x_h(i / nzh);
    [x[0], x[1], g.z(i % nzh)]
}

/// Velocity at `pos` as `(v_1, v_2, v_z)` from per-component samples.
pub fn velocity_at(g: &SpectralGrid, u: &[Vec<f64>], pos: [f64; 3]) -> [f64; 3] {
    let (idx, w, n) = stencil(g, pos);
    let comp = |c: &Vec<f64>| (0..n).map(|k| w[k] * c[idx[k]]).sum::<f64>();
    if g.d == 2 {
        [comp(&u[0]), 0.0, comp(&u[1])]
    } else {
        [comp(&u[0]), comp(&u[1]), comp(&u[2])]
    }
}

/// Exact values of the trigonometric interpolant (carrier plus layers) at arbitrary points.
/// Horizontal Nyquist modes enter through the real part of the sum.
pub fn eval_points(f: &SpectralField, pts: &[[f64; 3]]) -> Vec<f64> {
    let g = *f.grid();
    let zs: Vec<f64> = pts.iter().map(|p| p[2].clamp(0.0, g.l_z)).collect();
    let cols = f.columns_at(&zs);
    let n = pts.len();
    (0..n)
        .into_par_iter()
        .map(|i| {
            let mut acc = C64::new(0.0, 0.0);
            for h in 0..g.n_hmodes() {
                let xi = g.xi_h(h);
                let ph = xi[0] * pts[i][0] + xi[1] * pts[i][1];
                acc += cols[h * n + i] * C64::new(ph.cos(), ph.sin());
            }
            acc.re
        })
        .collect()
}
