//! Lagrangian coordinates: the flow map `dX/dt = u(t, X)`, `X(0, y) = y`, its Jacobian
//! `D_y X` and inverse `A`, transfer of fields between Eulerian nodes and particles, and
//! residuals of the Lagrangian form of the system.
//!
//! Particles start at the Eulerian grid nodes. Matrices are indexed in component order
//! (horizontal components first, vertical last); `(D_y X)_{ij} = d_j X^i`.

use crate::error::{Error, Result};
use crate::field::{SpectralField, VectorField};
use crate::grid::SpectralGrid;
use crate::ins::{courant_number, COURANT_SAFETY};
use crate::interp::{cubic_velocity_at, eval_points, interp, node, velocity_at};
use crate::io::FieldFile;
use crate::quadrature::{lp_half, lp_half_vec};
use crate::stokes::derivative_weights;
use crate::Parity;
use log::warn;
use rayon::prelude::*;
use serde::Serialize;

pub type Mat = [[f64; 3]; 3];

pub fn identity() -> Mat {
    [[1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]]
}

fn mat_mul(a: &Mat, b: &Mat) -> Mat {
    let mut c = [[0.0; 3]; 3];
    for i in 0..3 {
        for j in 0..3 {
            c[i][j] = (0..3).map(|k| a[i][k] * b[k][j]).sum();
        }
    }
    c
}

fn mat_sub(a: &Mat, b: &Mat) -> Mat {
    let mut c = *a;
    for i in 0..3 {
        for j in 0..3 {
            c[i][j] -= b[i][j];
        }
    }
    c
}

pub fn det(a: &Mat) -> f64 {
    a[0][0] * (a[1][1] * a[2][2] - a[1][2] * a[2][1]) - a[0][1] * (a[1][0] * a[2][2] - a[1][2] * a[2][0])
        + a[0][2] * (a[1][0] * a[2][1] - a[1][1] * a[2][0])
}

/// Inverse by the adjugate; `|det| < 1e-10` is an error.
pub fn inverse(a: &Mat) -> Result<Mat> {
    let dt = det(a);
    if !(dt.abs() >= 1e-10) {
        return Err(Error::Singular(dt));
    }
    let mut inv = [[0.0; 3]; 3];
    for i in 0..3 {
        for j in 0..3 {
            let (i1, i2) = ((j + 1) % 3, (j + 2) % 3);
            let (j1, j2) = ((i + 1) % 3, (i + 2) % 3);
            inv[i][j] = (a[i1][j1] * a[i2][j2] - a[i1][j2] * a[i2][j1]) / dt;
        }
    }
    Ok(inv)
}

/// Induced max-row-sum norm of the leading `d x d` block.
pub fn norm_inf(a: &Mat, d: usize) -> f64 {
    (0..d).map(|i| (0..d).map(|j| a[i][j].abs()).sum::<f64>()).fold(0.0, f64::max)
}

/// Position slot (`x_1, x_2, z`) of component `c`.
fn slot(d: usize, c: usize) -> usize {
    if c == d - 1 {
        2
    } else {
        c
    }
}

/// Derivatives `d_{y_c}` of a particle scalar, component order. Centered differences,
/// periodic horizontally, second-order one-sided at the bottom and top rows.
pub fn particle_gradient(g: &SpectralGrid, f: &[f64]) -> Vec<[f64; 3]> {
    let d = g.d;
    let nzh = g.nz_half();
    let (dx, dz) = (g.dx(), g.dz());
    (0..f.len())
        .into_par_iter()
        .map(|i| {
            let (h, j) = (i / nzh, i % nzh);
            let m = g.h_multi(h);
            let mut out = [0.0; 3];
            for c in 0..d - 1 {
                let mut up = m;
                let mut dn = m;
                up[c] = (m[c] + 1) % g.n_h;
                dn[c] = (m[c] + g.n_h - 1) % g.n_h;
                out[c] = (f[g.h_index(up) * nzh + j] - f[g.h_index(dn) * nzh + j]) / (2.0 * dx);
            }
            let at = |jj: usize| f[h * nzh + jj];
            out[d - 1] = if j == 0 {
                (-3.0 * at(0) + 4.0 * at(1) - at(2)) / (2.0 * dz)
            } else if j == g.n_z {
                (3.0 * at(j) - 4.0 * at(j - 1) + at(j - 2)) / (2.0 * dz)
            } else {
                (at(j + 1) - at(j - 1)) / (2.0 * dz)
            };
            out
        })
        .collect()
}

/// `D_y` of a particle vector field given by components: `[c][e] = d_{y_e} w^c`, padded with
/// the identity's zero pattern outside the `d x d` block.
fn particle_jacobian(g: &SpectralGrid, w: &[Vec<f64>]) -> Vec<Mat> {
    let d = g.d;
    let grads: Vec<Vec<[f64; 3]>> = w.iter().map(|c| particle_gradient(g, c)).collect();
    (0..g.half_len())
        .map(|i| {
            let mut m = [[0.0; 3]; 3];
            for c in 0..d {
                for e in 0..d {
                    m[c][e] = grads[c][i][e];
                }
            }
            m
        })
        .collect()
}

// ---------------------------------------------------------------------------
// Flow map
// ---------------------------------------------------------------------------

#[derive(Clone, Debug)]
pub struct FlowMap {
    pub grid: SpectralGrid,
    pub times: Vec<f64>,
    /// Positions `(x_1, x_2, z)` per sample time and particle. Horizontal coordinates are not
    /// wrapped, so `X - y` is periodic in `y`.
    pub x: Vec<Vec<[f64; 3]>>,
    /// Particles whose vertical position had to be clamped into `[0, L_z]`.
    pub clamped: usize,
    /// Bottom particles were held at `z = 0` because the vertical velocity has zero trace.
    pub pinned_boundary: bool,
    pub scheme: SpaceInterp,
}

impl FlowMap {
    pub fn identity(grid: SpectralGrid, times: Vec<f64>) -> Self {
        let y: Vec<[f64; 3]> = (0..grid.half_len()).map(|i| node(&grid, i)).collect();
        FlowMap { grid, x: vec![y; times.len()], times, clamped: 0, pinned_boundary: true, scheme: SpaceInterp::default() }
    }

    /// Positions with the horizontal coordinates wrapped into `[0, L_h)`.
    pub fn wrapped(&self, k: usize) -> Vec<[f64; 3]> {
        let l = self.grid.l_h;
        self.x[k].iter().map(|p| [p[0].rem_euclid(l), p[1].rem_euclid(l), p[2]]).collect()
    }

    /// Displacement `X^c - y^c` at sample `k`, component order.
    pub fn displacement(&self, k: usize) -> Vec<Vec<f64>> {
        let g = &self.grid;
        (0..g.d)
            .map(|c| {
                let s = slot(g.d, c);
                self.x[k].iter().enumerate().map(|(i, p)| p[s] - node(g, i)[s]).collect()
            })
            .collect()
    }

    /// Wrapped positions as a `d`-component field file over the particle grid.
    pub fn snapshot(&self, k: usize) -> FieldFile {
        let w = self.wrapped(k);
        let d = self.grid.d;
        FieldFile {
            grid: self.grid,
            parity: Parity::Raw,
            components: (0..d).map(|c| w.iter().map(|p| p[slot(d, c)]).collect()).collect(),
        }
    }
}

/// Spatial interpolation of the sampled velocity inside the flow integrator.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize)]
pub enum SpaceInterp {
    #[default]
    Multilinear,
    /// Catmull-Rom; its gradient is continuous across cells, which removes the first-order
    /// volume error multilinear interpolation leaves in slowly moving particles.
    Cubic,
}

/// Classical RK4 for every particle through the sampled velocity, linear in time between
/// samples and interpolated in space by `scheme`. Each sample interval is split into substeps of at most
/// `dt`. Bottom particles keep `z = 0` exactly when the vertical velocity has zero trace; they
/// still slide with any horizontal trace.
pub fn integrate_flow(times: &[f64], u: &[VectorField], dt: f64, scheme: SpaceInterp) -> Result<FlowMap> {
    if times.len() != u.len() || times.is_empty() {
        return Err(Error::Shape { expected: times.len(), got: u.len() });
    }
    if times.windows(2).any(|w| !(w[1] > w[0])) {
        return Err(Error::InvalidArgument("times must be strictly increasing".into()));
    }
    if !(dt > 0.0) {
        return Err(Error::InvalidArgument("time step must be positive".into()));
    }
    let g = *u[0].grid();
    if u.iter().any(|v| v.grid() != &g || v.dim() != g.d) {
        return Err(Error::GridMismatch);
    }
    let us: Vec<Vec<Vec<f64>>> = u.par_iter().map(|v| v.samples()).collect();
    let umax = us.iter().flatten().flatten().fold(0.0f64, |m, v| m.max(v.abs()));
    let trace = u.iter().map(|v| v.comps[g.d - 1].trace().max_abs()).fold(0.0f64, f64::max);
    let pinned_boundary = trace <= 1e-10 * umax || umax == 0.0;
    for k in 0..times.len() - 1 {
        let n = ((times[k + 1] - times[k]) / dt).ceil();
        let c = courant_number(&g, &us[k], (times[k + 1] - times[k]) / n);
        if c > COURANT_SAFETY {
            warn!("flow map: Courant number {c:.3} on interval {k} exceeds {COURANT_SAFETY}");
        }
    }
    let nzh = g.nz_half();
    let paths: Vec<(Vec<[f64; 3]>, bool)> = (0..g.half_len())
        .into_par_iter()
        .map(|i| {
            let y = node(&g, i);
            if umax == 0.0 {
                return (vec![y; times.len()], false);
            }
            let pinned = pinned_boundary && i % nzh == 0;
            let mut p = y;
            let mut out = vec![y];
            let mut clamped = false;
            for k in 0..times.len() - 1 {
                let span = times[k + 1] - times[k];
                let n = (span / dt).ceil().max(1.0) as usize;
                let h = span / n as f64;
                let vel = |s: f64, q: [f64; 3]| {
                    let a = (s / span).clamp(0.0, 1.0);
                    let at = |w: &[Vec<f64>]| match scheme {
                        SpaceInterp::Multilinear => velocity_at(&g, w, q),
                        SpaceInterp::Cubic => cubic_velocity_at(&g, w, q),
                    };
                    let (mut v0, mut v1) = (at(&us[k]), at(&us[k + 1]));
                    if pinned {
                        v0[2] = 0.0;
                        v1[2] = 0.0;
                    }
                    [(1.0 - a) * v0[0] + a * v1[0], (1.0 - a) * v0[1] + a * v1[1], (1.0 - a) * v0[2] + a * v1[2]]
                };
                let add = |q: [f64; 3], v: [f64; 3], c: f64| [q[0] + c * v[0], q[1] + c * v[1], q[2] + c * v[2]];
                for s in 0..n {
                    let t0 = s as f64 * h;
                    let k1 = vel(t0, p);
                    let k2 = vel(t0 + 0.5 * h, add(p, k1, 0.5 * h));
                    let k3 = vel(t0 + 0.5 * h, add(p, k2, 0.5 * h));
                    let k4 = vel(t0 + h, add(p, k3, h));
                    for c in 0..3 {
                        p[c] += h / 6.0 * (k1[c] + 2.0 * k2[c] + 2.0 * k3[c] + k4[c]);
                    }
                    if p[2] < 0.0 || p[2] > g.l_z {
                        p[2] = p[2].clamp(0.0, g.l_z);
                        clamped = true;
                    }
                }
                out.push(p);
            }
            (out, clamped)
        })
        .collect();
    let clamped = paths.iter().filter(|p| p.1).count();
    if clamped as f64 > 1e-3 * g.half_len() as f64 {
        warn!("flow map: {clamped} of {} particles clamped to the vertical range", g.half_len());
    }
    let x = (0..times.len()).map(|k| paths.iter().map(|p| p.0[k]).collect()).collect();
    Ok(FlowMap { grid: g, times: times.to_vec(), x, clamped, pinned_boundary, scheme })
}

// ---------------------------------------------------------------------------
// Jacobians
// ---------------------------------------------------------------------------

#[derive(Clone, Debug)]
pub struct JacobianField {
    /// `D_y X` per particle.
    pub dx: Vec<Mat>,
    /// `A = (D_y X)^{-1}`.
    pub a: Vec<Mat>,
    pub det: Vec<f64>,
}

impl JacobianField {
    pub fn max_det_error(&self) -> f64 {
        self.det.iter().fold(0.0, |m, v| m.max((v - 1.0).abs()))
    }
}

/// `D_y X` at sample `k` by differencing the displacement, inverted per particle.
pub fn jacobian(flow: &FlowMap, k: usize) -> Result<JacobianField> {
    let mut dx = particle_jacobian(&flow.grid, &flow.displacement(k));
    let id = identity();
    for m in dx.iter_mut() {
        for i in 0..3 {
            m[i][i] += id[i][i];
        }
    }
    let a = dx.par_iter().map(inverse).collect::<Result<Vec<Mat>>>()?;
    let det = dx.iter().map(det).collect();
    Ok(JacobianField { dx, a, det })
}

#[derive(Clone, Debug)]
pub struct SeriesJacobian {
    /// Partial sum `sum_{k <= K} (-M)^k`.
    pub a: Vec<Mat>,
    /// `M = int_0^t D_y v`.
    pub m: Vec<Mat>,
    /// `gamma_L = int_0^T ||D_y v||_inf` over the whole flow horizon.
    pub gamma_l: f64,
    /// Highest power with a non-negligible term (`<= 1e-14`); the series terminates there.
    pub last_term: usize,
}

impl SeriesJacobian {
    /// `(Id + M)^{-1}`, the limit of the series.
    pub fn limit(&self) -> Result<Vec<Mat>> {
        self.m
            .iter()
            .map(|m| {
                let mut b = *m;
                for i in 0..3 {
                    b[i][i] += 1.0;
                }
                inverse(&b)
            })
            .collect()
    }

    /// `sup_y ||A_series - B||_inf`.
    pub fn distance(&self, b: &[Mat], d: usize) -> f64 {
        self.a.iter().zip(b).map(|(x, y)| norm_inf(&mat_sub(x, y), d)).fold(0.0, f64::max)
    }
}

/// Lagrangian velocity `v = u(t, X(t, y))` at every sample, composed with the same
/// interpolant that advected the particles.
pub fn pull_back(flow: &FlowMap, u: &[VectorField]) -> Vec<Vec<Vec<f64>>> {
    let g = flow.grid;
    (0..flow.times.len())
        .map(|k| {
            let w = u[k].samples();
            let v: Vec<[f64; 3]> = flow.x[k]
                .par_iter()
                .map(|&p| match flow.scheme {
                    SpaceInterp::Multilinear => velocity_at(&g, &w, p),
                    SpaceInterp::Cubic => cubic_velocity_at(&g, &w, p),
                })
                .collect();
            (0..g.d).map(|c| v.iter().map(|p| p[slot(g.d, c)]).collect()).collect()
        })
        .collect()
}

/// [`pull_back`] with exact evaluation of the spectral fields at the particle positions.
pub fn pull_back_spectral(flow: &FlowMap, u: &[VectorField]) -> Vec<Vec<Vec<f64>>> {
    (0..flow.times.len()).map(|k| u[k].comps.iter().map(|c| to_lagrangian_spectral(c, flow, k)).collect()).collect()
}

/// `A(t_k) ~ sum_{j <= K} (-1)^j (int_0^{t_k} D_y v)^j`, time integral by the trapezoid rule
/// over the samples. Rejected unless `gamma_L < 1`.
pub fn jacobian_inverse_series(flow: &FlowMap, v: &[Vec<Vec<f64>>], k: usize, terms: usize) -> Result<SeriesJacobian> {
    let g = &flow.grid;
    let d = g.d;
    if v.len() != flow.times.len() || k >= v.len() {
        return Err(Error::Shape { expected: flow.times.len(), got: v.len() });
    }
    let dv: Vec<Vec<Mat>> = v.iter().map(|w| particle_jacobian(g, w)).collect();
    let sup: Vec<f64> = dv.iter().map(|m| m.iter().map(|x| norm_inf(x, d)).fold(0.0, f64::max)).collect();
    let t = &flow.times;
    let gamma_l: f64 = (1..t.len()).map(|i| 0.5 * (t[i] - t[i - 1]) * (sup[i] + sup[i - 1])).sum();
    if !(gamma_l < 1.0) {
        return Err(Error::SeriesGate(gamma_l));
    }
    let n = g.half_len();
    let mut m = vec![[[0.0; 3]; 3]; n];
    for i in 1..=k {
        let w = 0.5 * (t[i] - t[i - 1]);
        for p in 0..n {
            for a in 0..3 {
                for b in 0..3 {
                    m[p][a][b] += w * (dv[i][p][a][b] + dv[i - 1][p][a][b]);
                }
            }
        }
    }
    let neg: Vec<Mat> = m.iter().map(|x| mat_sub(&[[0.0; 3]; 3], x)).collect();
    let mut a = vec![identity(); n];
    let mut power = vec![identity(); n];
    let mut last_term = 0;
    for j in 1..=terms {
        power = power.iter().zip(&neg).map(|(p, q)| mat_mul(p, q)).collect();
        let size = power.iter().map(|x| norm_inf(x, d)).fold(0.0, f64::max);
        if size <= 1e-14 {
            break;
        }
        last_term = j;
        for (x, p) in a.iter_mut().zip(&power) {
            for r in 0..3 {
                for c in 0..3 {
                    x[r][c] += p[r][c];
                }
            }
        }
    }
    Ok(SeriesJacobian { a, m, gamma_l, last_term })
}

// ---------------------------------------------------------------------------
// Field transfer
// ---------------------------------------------------------------------------

/// `f(X(t_k, y))` by multilinear interpolation of Eulerian node samples.
pub fn to_lagrangian(f: &[f64], flow: &FlowMap, k: usize) -> Vec<f64> {
    flow.x[k].par_iter().map(|&p| interp(&flow.grid, f, p)).collect()
}

/// `f(X(t_k, y))` by exact evaluation of the spectral field.
pub fn to_lagrangian_spectral(f: &SpectralField, flow: &FlowMap, k: usize) -> Vec<f64> {
    eval_points(f, &flow.x[k])
}

#[derive(Clone, Debug)]
pub struct EulerianTransfer {
    pub values: Vec<f64>,
    /// Nodes that lie outside every particle simplex; their values are extrapolated from
    /// the nearest one.
    pub extrapolated: Vec<usize>,
}

/// Simplices of the unit cell as corner offsets `(a_1, a_2, a_z)`.
fn cell_simplices(d: usize) -> Vec<Vec<[usize; 3]>> {
    if d == 2 {
        vec![vec![[0, 0, 0], [1, 0, 0], [1, 0, 1]], vec![[0, 0, 0], [1, 0, 1], [0, 0, 1]]]
    } else {
        let perms = [[0, 1, 2], [0, 2, 1], [1, 0, 2], [1, 2, 0], [2, 0, 1], [2, 1, 0]];
        perms
            .iter()
            .map(|pi| {
                let mut v = [0usize; 3];
                let mut out = vec![v];
                for &ax in pi {
                    v[ax] = 1;
                    out.push(v);
                }
                out
            })
            .collect()
    }
}

/// Values at the Eulerian nodes from particle values at `X(t_k)`: each node is located in a
/// simplex of the deformed particle lattice and interpolated barycentrically.
pub fn to_eulerian(values: &[f64], flow: &FlowMap, k: usize) -> Result<EulerianTransfer> {
    let g = flow.grid;
    let d = g.d;
    if values.len() != g.half_len() {
        return Err(Error::Shape { expected: g.half_len(), got: values.len() });
    }
    let nzh = g.nz_half();
    let disp = flow.displacement(k);
    let pos = &flow.x[k];
    let simplices = cell_simplices(d);
    let n_h = g.n_h as i64;
    // position of lattice corner (i_1, i_2, j) with unwrapped horizontal indices
    let corner = |c: [i64; 3]| -> ([f64; 3], usize) {
        let i0 = c[0].rem_euclid(n_h) as usize;
        let i1 = if d == 3 { c[1].rem_euclid(n_h) as usize } else { 0 };
        let p = g.h_index([i0, i1]) * nzh + c[2] as usize;
        let mut x = pos[p];
        x[0] += c[0].div_euclid(n_h) as f64 * g.l_h;
        if d == 3 {
            x[1] += c[1].div_euclid(n_h) as f64 * g.l_h;
        }
        (x, p)
    };
    let res: Vec<(f64, bool)> = (0..g.half_len())
        .into_par_iter()
        .map(|i| {
            let x = node(&g, i);
            // Lagrangian pre-image by fixed-point iteration on the displacement
            let mut y = x;
            for _ in 0..50 {
                let mut next = x;
                for c in 0..d {
                    next[slot(d, c)] -= interp(&g, &disp[c], y);
                }
                let change = (0..3).map(|a| (next[a] - y[a]).abs()).fold(0.0, f64::max);
                y = next;
                if change < 1e-13 * g.l_h.max(g.l_z) {
                    break;
                }
            }
            let base = [(y[0] / g.dx()).floor() as i64, if d == 3 { (y[1] / g.dx()).floor() as i64 } else { 0 }, ((y[2] / g.dz()).floor() as i64).clamp(0, g.n_z as i64 - 1)];
            let mut best = (f64::NEG_INFINITY, 0.0);
            let span = |dim: bool| if dim { -1..=1 } else { 0..=0 };
            for o0 in -1..=1i64 {
                for o1 in span(d == 3) {
                    for oz in -1..=1i64 {
                        let cz = base[2] + oz;
                        if cz < 0 || cz >= g.n_z as i64 {
                            continue;
                        }
                        let cell = [base[0] + o0, base[1] + o1, cz];
                        for s in &simplices {
                            let vs: Vec<([f64; 3], usize)> = s.iter().map(|o| corner([cell[0] + o[0] as i64, cell[1] + o[1] as i64, cell[2] + o[2] as i64])).collect();
                            let mut t = identity();
                            for c in 0..d {
                                for e in 0..d {
                                    t[c][e] = vs[e + 1].0[slot(d, c)] - vs[0].0[slot(d, c)];
                                }
                            }
                            let Ok(ti) = inverse(&t) else { continue };
                            let mut lam = [0.0; 4];
                            let mut sum = 0.0;
                            for e in 0..d {
                                lam[e + 1] = (0..d).map(|c| ti[e][c] * (x[slot(d, c)] - vs[0].0[slot(d, c)])).sum();
                                sum += lam[e + 1];
                            }
                            lam[0] = 1.0 - sum;
                            let worst = lam[..=d].iter().cloned().fold(f64::INFINITY, f64::min);
                            if worst > best.0 {
                                let val = (0..=d).map(|e| lam[e] * values[vs[e].1]).sum();
                                best = (worst, val);
                            }
                        }
                    }
                }
            }
            (best.1, best.0 < -1e-10)
        })
        .collect();
    let extrapolated: Vec<usize> = res.iter().enumerate().filter(|(_, r)| r.1).map(|(i, _)| i).collect();
    if !extrapolated.is_empty() {
        warn!("to_eulerian: {} nodes outside the particle hull", extrapolated.len());
    }
    Ok(EulerianTransfer { values: res.into_iter().map(|r| r.0).collect(), extrapolated })
}

// ---------------------------------------------------------------------------
// Identities and residuals
// ---------------------------------------------------------------------------

#[derive(Clone, Debug, Default, Serialize)]
pub struct ChainRuleReport {
    /// `||grad_x u o X - tA grad_y v|| / ||grad_x u o X||`.
    pub gradient: f64,
    /// `||div_x u o X - div_y(A v)|| / ||grad_x u o X||`.
    pub divergence: f64,
    /// `||div_y(A v) - Tr(D_y v A)|| / ||grad_x u o X||`.
    pub trace: f64,
    /// `||div_x u o X|| / ||grad_x u o X||`, for reference.
    pub div_x: f64,
    pub div_y: f64,
}

/// `div_y(A w)` for a particle vector field `w` (components).
fn div_a(g: &SpectralGrid, a: &[Mat], w: &[Vec<f64>]) -> Vec<f64> {
    let d = g.d;
    let aw: Vec<Vec<f64>> = (0..d).map(|i| (0..a.len()).map(|p| (0..d).map(|j| a[p][i][j] * w[j][p]).sum()).collect()).collect();
    let grads: Vec<Vec<[f64; 3]>> = aw.iter().map(|c| particle_gradient(g, c)).collect();
    (0..a.len()).map(|p| (0..d).map(|i| grads[i][p][i]).sum()).collect()
}

/// `tA grad_y f`: `(i) -> sum_k A_{ki} d_k f`.
fn grad_a(a: &[Mat], gf: &[[f64; 3]], d: usize) -> Vec<Vec<f64>> {
    (0..d).map(|i| (0..a.len()).map(|p| (0..d).map(|k| a[p][k][i] * gf[p][k]).sum()).collect()).collect()
}

/// Residuals of `grad_x u = tA grad_y v`, `div_x u = div_y(A v)` and
/// `div_y(A v) = Tr(D_y v A)` at sample `k`, with `v` the exact composition `u o X` and
/// particle derivatives by centered differences.
pub fn verify_chain_rules(u: &VectorField, flow: &FlowMap, k: usize, jac: &JacobianField) -> ChainRuleReport {
    let g = flow.grid;
    let d = g.d;
    let v: Vec<Vec<f64>> = u.comps.iter().map(|c| to_lagrangian_spectral(c, flow, k)).collect();
    // grad_x u o X as [i][j] = d_i u^j
    let mut gx: Vec<Vec<f64>> = Vec::with_capacity(d * d);
    for i in 0..d {
        for j in 0..d {
            let der = if i == d - 1 { u.comps[j].d_z() } else { u.comps[j].d_h(i) };
            gx.push(to_lagrangian_spectral(&der, flow, k));
        }
    }
    let mut lhs_rhs = Vec::with_capacity(d * d);
    for j in 0..d {
        let gv = particle_gradient(&g, &v[j]);
        let ga = grad_a(&jac.a, &gv, d);
        for i in 0..d {
            lhs_rhs.push((i * d + j, ga[i].clone()));
        }
    }
    lhs_rhs.sort_by_key(|x| x.0);
    let gerr: Vec<Vec<f64>> = lhs_rhs.iter().map(|(ij, r)| gx[*ij].iter().zip(r).map(|(a, b)| a - b).collect()).collect();
    let gsize = lp_half_vec(&g, &gx, 2.0).max(1e-300);
    let div_x: Vec<f64> = (0..g.half_len()).map(|p| (0..d).map(|i| gx[i * d + i][p]).sum()).collect();
    let div_y = div_a(&g, &jac.a, &v);
    let dvs: Vec<Vec<[f64; 3]>> = v.iter().map(|c| particle_gradient(&g, c)).collect();
    // Tr(D_y v A) = sum_{i,k} d_k v^i A_{ki}
    let tr: Vec<f64> = (0..g.half_len()).map(|p| (0..d).map(|i| (0..d).map(|kk| dvs[i][p][kk] * jac.a[p][kk][i]).sum::<f64>()).sum()).collect();
    let diff = |a: &[f64], b: &[f64]| -> Vec<f64> { a.iter().zip(b).map(|(x, y)| x - y).collect() };
    ChainRuleReport {
        gradient: lp_half_vec(&g, &gerr, 2.0) / gsize,
        divergence: lp_half(&g, &diff(&div_x, &div_y), 2.0) / gsize,
        trace: lp_half(&g, &diff(&div_y, &tr), 2.0) / gsize,
        div_x: lp_half(&g, &div_x, 2.0) / gsize,
        div_y: lp_half(&g, &div_y, 2.0) / gsize,
    }
}

/// Lagrangian unknowns on the particle grid at every sample time.
#[derive(Clone, Debug)]
pub struct LagrangianFields {
    pub times: Vec<f64>,
    /// `b[k]`; the Lagrangian density is `a0` at every time, but a pulled-back Eulerian
    /// density can be supplied to measure how well it was transported.
    pub b: Vec<Vec<f64>>,
    /// `v[k][c]`.
    pub v: Vec<Vec<Vec<f64>>>,
    /// `grad_u P = (grad Pi) o X`; only the pressure gradient is available, and the chain rule
    /// makes its composition equal to `tA grad_y P`.
    pub grad_p: Vec<Vec<Vec<f64>>>,
    pub a: Vec<Vec<Mat>>,
}

impl LagrangianFields {
    /// Transport of an Eulerian trajectory: flow map, Jacobian inverses and exact
    /// compositions. `b` is the stored `a0`.
    pub fn from_eulerian(a0: &[f64], u: &[VectorField], grad_pi: &[VectorField], times: &[f64], dt: f64) -> Result<(Self, FlowMap)> {
        let flow = integrate_flow(times, u, dt, SpaceInterp::Cubic)?;
        let a = (0..times.len()).map(|k| jacobian(&flow, k).map(|j| j.a)).collect::<Result<Vec<_>>>()?;
        let v = pull_back_spectral(&flow, u);
        let grad_p = pull_back_spectral(&flow, grad_pi);
        let b = vec![a0.to_vec(); times.len()];
        Ok((LagrangianFields { times: times.to_vec(), b, v, grad_p, a }, flow))
    }

    /// Replace the stored density by `a(t_k, X(t_k, y))`.
    pub fn with_density(mut self, a: &[Vec<f64>], flow: &FlowMap) -> Self {
        self.b = a.iter().enumerate().map(|(k, ak)| to_lagrangian(ak, flow, k)).collect();
        self
    }
}

#[derive(Clone, Debug, Default, Serialize)]
pub struct LagrangianResidual {
    /// `max_t ||d_t b||_2`.
    pub transport: f64,
    /// `max_t ||d_t v - (1 + b)(mu Delta_u v - grad_u P)||_2`.
    pub momentum: f64,
    /// `max_t ||(1 + b)(mu Delta_u v - grad_u P)||_2`, the size the momentum residual compares to.
    pub momentum_scale: f64,
    /// `max_t ||div_u v||_2`.
    pub divergence: f64,
    /// `max_t max |v|` on the bottom particles.
    pub boundary: f64,
    /// Momentum residual per sample time.
    pub momentum_by_time: Vec<f64>,
}

/// Residuals of `b_t = 0`, `v_t - (1 + b)(mu Delta_u v - grad_u P) = 0`, `div_u v = 0` and `v = 0`
/// on the boundary, with `grad_u = tA grad_y`, `div_u = div_y(A .)`, `Delta_u = div_u grad_u`.
/// Space derivatives are centered differences on the particle grid, time derivatives the
/// three-point weights of the sample times.
pub fn lagrangian_residual(g: &SpectralGrid, f: &LagrangianFields, mu: f64) -> Result<LagrangianResidual> {
    let n_t = f.times.len();
    if n_t < 3 {
        return Err(Error::InvalidArgument("Lagrangian residuals need at least three samples".into()));
    }
    if f.v.len() != n_t || f.grad_p.len() != n_t || f.a.len() != n_t || f.b.len() != n_t {
        return Err(Error::Shape { expected: n_t, got: f.v.len().min(f.grad_p.len()).min(f.a.len()).min(f.b.len()) });
    }
    let d = g.d;
    let nzh = g.nz_half();
    let per_time: Vec<[f64; 5]> = (0..n_t)
        .into_par_iter()
        .map(|k| {
            let w = derivative_weights(&f.times, k);
            let a = &f.a[k];
            let b = &f.b[k];
            let mut mom = Vec::with_capacity(d);
            let mut rhs = Vec::with_capacity(d);
            for j in 0..d {
                let gv = particle_gradient(g, &f.v[k][j]);
                let lap = div_a(g, a, &grad_a(a, &gv, d));
                let r: Vec<f64> = (0..g.half_len()).map(|p| (1.0 + b[p]) * (mu * lap[p] - f.grad_p[k][j][p])).collect();
                mom.push((0..g.half_len()).map(|p| w.iter().map(|(i, c)| c * (f.v[*i][j][p] - f.v[k][j][p])).sum::<f64>() - r[p]).collect::<Vec<f64>>());
                rhs.push(r);
            }
            // differences against the current sample make a constant series exactly stationary
            let bt: Vec<f64> = (0..g.half_len()).map(|p| w.iter().map(|(i, c)| c * (f.b[*i][p] - b[p])).sum()).collect();
            let div = div_a(g, a, &f.v[k]);
            let bnd = (0..g.n_hmodes()).flat_map(|h| (0..d).map(move |c| (h, c))).fold(0.0f64, |m, (h, c)| m.max(f.v[k][c][h * nzh].abs()));
            [lp_half(g, &bt, 2.0), lp_half_vec(g, &mom, 2.0), lp_half_vec(g, &rhs, 2.0), lp_half(g, &div, 2.0), bnd]
        })
        .collect();
    let max = |i: usize| per_time.iter().map(|r| r[i]).fold(0.0, f64::max);
    Ok(LagrangianResidual {
        transport: max(0),
        momentum: max(1),
        momentum_scale: max(2),
        divergence: max(3),
        boundary: max(4),
        momentum_by_time: per_time.iter().map(|r| r[1]).collect(),
    })
}
