//! Manufactured solutions with interior support.

use super::StokesInput;
use crate::data::{bump, divfree_velocity, interior_scalar, rng};
use crate::field::{Parity, SpectralField, VectorField};
use crate::grid::SpectralGrid;

pub struct Manufactured {
    pub input: StokesInput,
    pub u: Vec<VectorField>,
    pub grad_pi: Vec<VectorField>,
}

fn theta(t: f64) -> (f64, f64) {
    (1.0 + 0.5 * (3.0 * t).sin(), 1.5 * (3.0 * t).cos())
}

fn theta2(t: f64) -> (f64, f64) {
    ((2.0 * t).sin(), 2.0 * (2.0 * t).cos())
}

/// `u* = theta(t) u_s (+ theta2(t) w_s)`, `Pi* = theta(t) pi_s`, with `u_s` divergence free
/// and every profile supported away from the boundary; `f = d_t u* - mu Delta u* + grad Pi*`.
/// With `with_q`, `Q = theta2 w_s` so that `g = div u*` is nonzero with `g(0) = 0`.
pub fn manufactured(grid: &SpectralGrid, mu: f64, times: &[f64], seed: u64, with_q: bool) -> Manufactured {
    let mut r = rng(seed);
    let us = divfree_velocity(grid, 2, 2, &mut r);
    let pis = interior_scalar(grid, 2, 2, &mut r).with_parity(Parity::Raw);
    let ws = if with_q {
        let l_h = grid.l_h;
        let c = grid.l_z * 0.5;
        let w = grid.l_z / 14.0;
        VectorField::new(
            (0..grid.d)
                .map(|j| {
                    SpectralField::from_fn(*grid, Parity::Raw, |x, z| {
                        (2.0 * std::f64::consts::PI * (x[0] + 0.5 * x[1] * (j as f64 + 1.0)) / l_h).sin() * bump(z, c, w)
                    })
                })
                .collect(),
        )
    } else {
        VectorField::zeros(*grid)
    };
    let lap_us = VectorField::new(us.comps.iter().map(|c| c.laplacian()).collect());
    let lap_ws = VectorField::new(ws.comps.iter().map(|c| c.laplacian()).collect());
    let gp = VectorField::grad(&pis);
    let mut input = StokesInput::new(mu, us.scale(theta(0.0).0), times.to_vec());
    let (mut u, mut grad_pi) = (Vec::new(), Vec::new());
    for &t in times {
        let (th, dth) = theta(t);
        let (th2, dth2) = theta2(t);
        let mut f = us.scale(dth);
        f.axpy(-mu * th, &lap_us).expect("same grid");
        f.axpy(th, &gp).expect("same grid");
        f.axpy(dth2, &ws).expect("same grid");
        f.axpy(-mu * th2, &lap_ws).expect("same grid");
        input.f.push(f);
        if with_q {
            input.q.push(ws.scale(th2));
        }
        let mut ut = us.scale(th);
        ut.axpy(th2, &ws).expect("same grid");
        u.push(ut);
        grad_pi.push(gp.scale(th));
    }
    Manufactured { input, u, grad_pi }
}
