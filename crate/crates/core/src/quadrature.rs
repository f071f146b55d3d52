//! Grid quadrature for `L^p` norms on the truncated half-space and on periodic boxes.

use crate::field::{SpectralField, WholeField};
use crate::grid::SpectralGrid;

/// Quadrature weight of half-space node `(h, j)`: rectangle rule horizontally, trapezoid
/// vertically.
pub fn half_weight(grid: &SpectralGrid, j: usize) -> f64 {
    let wh = grid.dx().powi(grid.d as i32 - 1);
    let wz = if j == 0 || j == grid.n_z { 0.5 * grid.dz() } else { grid.dz() };
    wh * wz
}

/// `L^p` norm of half-space samples; `p = inf` gives the max norm.
pub fn lp_half(grid: &SpectralGrid, samples: &[f64], p: f64) -> f64 {
    lp_half_with(grid, samples.len(), |i| samples[i].abs(), p)
}

/// `L^p` norm of the pointwise Euclidean norm of several components.
pub fn lp_half_vec(grid: &SpectralGrid, comps: &[Vec<f64>], p: f64) -> f64 {
    let n = comps.first().map_or(0, |c| c.len());
    lp_half_with(grid, n, |i| comps.iter().map(|c| c[i] * c[i]).sum::<f64>().sqrt(), p)
}

fn lp_half_with(grid: &SpectralGrid, n: usize, val: impl Fn(usize) -> f64, p: f64) -> f64 {
    assert!(p >= 1.0, "Lebesgue exponent must be at least 1");
    let nzh = grid.nz_half();
    if p.is_infinite() {
        return (0..n).map(&val).fold(0.0, f64::max);
    }
    let mut acc = 0.0;
    for i in 0..n {
        let v = val(i);
        if v != 0.0 {
            acc += half_weight(grid, i % nzh) * v.powf(p);
        }
    }
    acc.powf(1.0 / p)
}

/// Integral of half-space samples with the weights of [`half_weight`].
pub fn integrate_half(grid: &SpectralGrid, samples: &[f64]) -> f64 {
    let nzh = grid.nz_half();
    samples.iter().enumerate().map(|(i, v)| half_weight(grid, i % nzh) * v).sum()
}

pub fn lp_norm(f: &SpectralField, p: f64) -> f64 {
    lp_half(f.grid(), &f.samples(), p)
}

pub fn lp_norm_vec(f: &[SpectralField], p: f64) -> f64 {
    let comps: Vec<Vec<f64>> = f.iter().map(|c| c.samples()).collect();
    lp_half_vec(f[0].grid(), &comps, p)
}

/// Relative `L^2` distance `||a - b|| / ||b||` of half-space samples (absolute if `b = 0`).
pub fn rel_l2(grid: &SpectralGrid, a: &[f64], b: &[f64]) -> f64 {
    let diff: Vec<f64> = a.iter().zip(b).map(|(x, y)| x - y).collect();
    let num = lp_half(grid, &diff, 2.0);
    let den = lp_half(grid, b, 2.0);
    if den == 0.0 {
        num
    } else {
        num / den
    }
}

/// Rectangle-rule `L^p` norm on a periodic box with cell measure `cell`.
pub fn lp_periodic(samples: &[f64], cell: f64, p: f64) -> f64 {
    assert!(p >= 1.0, "Lebesgue exponent must be at least 1");
    if p.is_infinite() {
        return samples.iter().fold(0.0, |m, v| m.max(v.abs()));
    }
    let s: f64 = samples.iter().map(|v| v.abs().powf(p)).sum();
    (s * cell).powf(1.0 / p)
}

/// `L^p` norm of a whole-space field over the doubled box.
pub fn lp_whole(w: &WholeField, p: f64) -> f64 {
    let g = w.grid();
    lp_periodic(&w.samples(), g.dx().powi(g.d as i32 - 1) * g.dz(), p)
}

/// `L^p` norm over the doubled box of the pointwise Euclidean norm of several fields.
pub fn lp_whole_vec(ws: &[WholeField], p: f64) -> f64 {
    if ws.len() == 1 {
        return lp_whole(&ws[0], p);
    }
    let g = ws[0].grid();
    let samples: Vec<Vec<f64>> = ws.iter().map(|w| w.samples()).collect();
    let n = samples[0].len();
    let mag: Vec<f64> = (0..n).map(|i| samples.iter().map(|s| s[i] * s[i]).sum::<f64>().sqrt()).collect();
    lp_periodic(&mag, g.dx().powi(g.d as i32 - 1) * g.dz(), p)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::field::Parity;
    use std::f64::consts::PI;

    #[test]
    fn constant_field_norm() {
        let g = SpectralGrid::new(2, 8, 8, 2.0, 3.0).unwrap();
        let f = SpectralField::from_fn(g, Parity::Even, |_, _| -1.5);
        for p in [1.0, 2.0, 3.5] {
            assert!((lp_norm(&f, p) - 1.5 * g.volume().powf(1.0 / p)).abs() < 1e-12);
        }
        assert!((lp_norm(&f, f64::INFINITY) - 1.5).abs() < 1e-14);
    }

    #[test]
    fn sine_l2_norm() {
        let g = SpectralGrid::new(3, 16, 16, 1.0, 2.0).unwrap();
        let f = SpectralField::from_fn(g, Parity::Raw, |x, _| (2.0 * PI * x[0]).sin());
        assert!((lp_norm(&f, 2.0) - (g.volume() / 2.0).sqrt()).abs() < 1e-10);
        assert!((lp_norm(&f, f64::INFINITY) - 1.0).abs() < 1e-14);
    }
}
