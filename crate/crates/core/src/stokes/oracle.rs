//! Independent finite-difference solver: staggered (MAC) grid, Crank–Nicolson diffusion,
//! incremental pressure projection, no-slip walls at `x_d = 0` and `x_d = L_z`.
//!
//! Horizontal periodicity diagonalizes the discrete operators, so each horizontal Fourier
//! mode is advanced independently with tridiagonal solves in the vertical. Horizontal
//! differences use the staggered symbol `2i sin(xi dx / 2)/dx`.

use super::{Provenance, StokesInput, StokesSolution};
use crate::error::{Error, Result};
use crate::field::{Parity, SpectralField, VectorField};
use num_complex::Complex64 as C64;
use rayon::prelude::*;

const Z: C64 = C64 { re: 0.0, im: 0.0 };

#[derive(Clone, Copy, Debug)]
pub struct OracleOptions {
    /// Crank–Nicolson steps per interval of the input time grid.
    pub substeps: usize,
}

impl Default for OracleOptions {
    fn default() -> Self {
        OracleOptions { substeps: 4 }
    }
}

/// Tridiagonal solve (Thomas algorithm); `lower[0]` and `upper[n-1]` are ignored.
pub fn thomas(lower: &[C64], diag: &[C64], upper: &[C64], rhs: &[C64]) -> Result<Vec<C64>> {
    let n = diag.len();
    let mut c = vec![Z; n];
    let mut d = vec![Z; n];
    let mut beta = diag[0];
    if beta.norm() < 1e-300 {
        return Err(Error::Singular(beta.norm()));
    }
    c[0] = upper[0] / beta;
    d[0] = rhs[0] / beta;
    for i in 1..n {
        beta = diag[i] - lower[i] * c[i - 1];
        if beta.norm() < 1e-300 {
            return Err(Error::Singular(beta.norm()));
        }
        c[i] = if i + 1 < n { upper[i] / beta } else { Z };
        d[i] = (rhs[i] - lower[i] * d[i - 1]) / beta;
    }
    for i in (0..n - 1).rev() {
        let next = d[i + 1];
        d[i] -= c[i] * next;
    }
    Ok(d)
}

/// Per-mode operators.
struct ModeOps {
    n: usize,
    dz: f64,
    /// Staggered horizontal difference symbols.
    delta: Vec<C64>,
    /// Horizontal Laplacian symbol.
    lap_h: f64,
}

impl ModeOps {
    /// Vertical Laplacian of cell-centred values with odd ghost reflection at both walls.
    fn lap_centres(&self, u: &[C64]) -> Vec<C64> {
        let n = self.n;
        let h2 = self.dz * self.dz;
        (0..n)
            .map(|c| {
                let lo = if c == 0 { -u[0] } else { u[c - 1] };
                let hi = if c == n - 1 { -u[n - 1] } else { u[c + 1] };
                (lo - u[c] * 2.0 + hi) / h2 + u[c] * self.lap_h
            })
            .collect()
    }

    /// Vertical Laplacian at interior nodes, zero at the walls.
    fn lap_nodes(&self, w: &[C64]) -> Vec<C64> {
        let h2 = self.dz * self.dz;
        let mut out = vec![Z; self.n + 1];
        for k in 1..self.n {
            out[k] = (w[k - 1] - w[k] * 2.0 + w[k + 1]) / h2 + w[k] * self.lap_h;
        }
        out
    }

    /// Solve `(I - a L) x = r` for centred values.
    fn helmholtz_centres(&self, a: f64, r: &[C64]) -> Result<Vec<C64>> {
        let n = self.n;
        let h2 = self.dz * self.dz;
        let off = C64::new(-a / h2, 0.0);
        let mut diag = vec![C64::new(1.0 + 2.0 * a / h2 - a * self.lap_h, 0.0); n];
        diag[0] += a / h2;
        diag[n - 1] += a / h2;
        thomas(&vec![off; n], &diag, &vec![off; n], r)
    }

    /// Solve `(I - a L) x = r` at interior nodes; walls stay zero.
    fn helmholtz_nodes(&self, a: f64, r: &[C64]) -> Result<Vec<C64>> {
        let m = self.n - 1;
        let h2 = self.dz * self.dz;
        let off = C64::new(-a / h2, 0.0);
        let diag = vec![C64::new(1.0 + 2.0 * a / h2 - a * self.lap_h, 0.0); m];
        let x = thomas(&vec![off; m], &diag, &vec![off; m], &r[1..self.n])?;
        let mut out = vec![Z; self.n + 1];
        out[1..self.n].copy_from_slice(&x);
        Ok(out)
    }

    fn divergence(&self, u: &[Vec<C64>], w: &[C64]) -> Vec<C64> {
        (0..self.n)
            .map(|c| {
                let mut s = (w[c + 1] - w[c]) / self.dz;
                for (j, uj) in u.iter().enumerate() {
                    s += self.delta[j] * uj[c];
                }
                s
            })
            .collect()
    }

    /// Neumann Poisson problem `D G phi = r`; on a singular mode one value is pinned.
    fn poisson(&self, r: &[C64]) -> Result<Vec<C64>> {
        let n = self.n;
        let h2 = self.dz * self.dz;
        let dd: f64 = self.delta.iter().map(|d| d.norm_sqr()).sum();
        let mut lower = vec![C64::new(1.0 / h2, 0.0); n];
        let mut upper = vec![C64::new(1.0 / h2, 0.0); n];
        let mut diag = vec![C64::new(-2.0 / h2 - dd, 0.0); n];
        diag[0] += 1.0 / h2;
        diag[n - 1] += 1.0 / h2;
        let mut rhs = r.to_vec();
        if dd == 0.0 {
            diag[0] = C64::new(1.0, 0.0);
            upper[0] = Z;
            rhs[0] = Z;
            lower[1] = Z;
            // equation 1 lost its coupling to phi_0 = 0, which is consistent
        }
        thomas(&lower, &diag, &upper, &rhs)
    }

    fn grad_z(&self, p: &[C64]) -> Vec<C64> {
        let mut out = vec![Z; self.n + 1];
        for k in 1..self.n {
            out[k] = (p[k] - p[k - 1]) / self.dz;
        }
        out
    }
}

/// Solve with the finite-difference scheme; only `g = 0` is supported.
pub fn oracle_solve(input: &StokesInput, opts: OracleOptions) -> Result<StokesSolution> {
    input.validate()?;
    if !input.q.is_empty() {
        return Err(Error::InvalidArgument("the finite-difference oracle supports only g = 0".into()));
    }
    if opts.substeps == 0 {
        return Err(Error::InvalidArgument("substeps must be positive".into()));
    }
    let g = *input.grid();
    let d = g.d;
    let n = g.n_z;
    let dz = g.dz();
    let dx = g.dx();
    let nu = input.mu;
    let nt = input.times.len();
    let zc: Vec<f64> = (0..n).map(|c| (c as f64 + 0.5) * dz).collect();
    let zn: Vec<f64> = (0..=n).map(|k| k as f64 * dz).collect();

    // data at the staggered heights, per horizontal mode
    let sample = |f: &VectorField| -> (Vec<Vec<C64>>, Vec<C64>) {
        let h: Vec<Vec<C64>> = f.horizontal().iter().map(|c| c.columns_at(&zc)).collect();
        let v = f.vertical().columns_at(&zn);
        (h, v)
    };
    let u0 = sample(&input.u0);
    let forcing: Vec<(Vec<Vec<C64>>, Vec<C64>)> = if input.f.is_empty() {
        vec![]
    } else {
        input.f.par_iter().map(|f| sample(f)).collect()
    };

    type ModeOut = Vec<(Vec<Vec<C64>>, Vec<C64>, Vec<Vec<C64>>, Vec<C64>)>;
    let per_mode: Vec<Result<ModeOut>> = (0..g.n_hmodes())
        .into_par_iter()
        .map(|h| {
            let xi = g.dxi_h(h);
            let xf = g.xi_h(h);
            let delta: Vec<C64> = (0..d - 1).map(|j| C64::new(0.0, 2.0 * (xi[j] * dx / 2.0).sin() / dx)).collect();
            let lap_h = -(0..d - 1).map(|j| (2.0 * (xf[j] * dx / 2.0).sin() / dx).powi(2)).sum::<f64>();
            let ops = ModeOps { n, dz, delta, lap_h };
            let col_c = |v: &[C64]| v[h * n..(h + 1) * n].to_vec();
            let col_n = |v: &[C64]| v[h * (n + 1)..(h + 1) * (n + 1)].to_vec();
            let force_at = |i: usize| -> (Vec<Vec<C64>>, Vec<C64>) {
                if forcing.is_empty() {
                    (vec![vec![Z; n]; d - 1], vec![Z; n + 1])
                } else {
                    (forcing[i].0.iter().map(|c| col_c(c)).collect(), col_n(&forcing[i].1))
                }
            };
            let mut u: Vec<Vec<C64>> = u0.0.iter().map(|c| col_c(c)).collect();
            let mut w = col_n(&u0.1);
            w[0] = Z;
            w[n] = Z;
            // initial pressure from D G p = D (f + nu L u)
            let (f0h, f0v) = force_at(0);
            let acc_h: Vec<Vec<C64>> =
                (0..d - 1).map(|j| ops.lap_centres(&u[j]).iter().zip(&f0h[j]).map(|(l, f)| l * nu + f).collect()).collect();
            let mut acc_v: Vec<C64> = ops.lap_nodes(&w).iter().zip(&f0v).map(|(l, f)| l * nu + f).collect();
            acc_v[0] = Z;
            acc_v[n] = Z;
            let mut p = ops.poisson(&ops.divergence(&acc_h, &acc_v))?;
            let mut out: ModeOut = Vec::with_capacity(nt);
            let snapshot = |u: &Vec<Vec<C64>>, w: &Vec<C64>, p: &Vec<C64>, ops: &ModeOps| {
                let gh: Vec<Vec<C64>> = (0..d - 1).map(|j| p.iter().map(|x| x * ops.delta[j]).collect()).collect();
                (u.clone(), w.clone(), gh, ops.grad_z(p))
            };
            out.push(snapshot(&u, &w, &p, &ops));
            for i in 0..nt - 1 {
                let dt = (input.times[i + 1] - input.times[i]) / opts.substeps as f64;
                let (fa_h, fa_v) = force_at(i);
                let (fb_h, fb_v) = force_at(i + 1);
                for sstep in 0..opts.substeps {
                    // forcing at the half step, linear in time between samples
                    let th = (sstep as f64 + 0.5) / opts.substeps as f64;
                    let a = 0.5 * nu * dt;
                    let mut us = Vec::with_capacity(d - 1);
                    for j in 0..d - 1 {
                        let l = ops.lap_centres(&u[j]);
                        let r: Vec<C64> = (0..n)
                            .map(|c| {
                                let f = fa_h[j][c] * (1.0 - th) + fb_h[j][c] * th;
                                u[j][c] + l[c] * a - ops.delta[j] * p[c] * dt + f * dt
                            })
                            .collect();
                        us.push(ops.helmholtz_centres(a, &r)?);
                    }
                    let l = ops.lap_nodes(&w);
                    let gz = ops.grad_z(&p);
                    let r: Vec<C64> = (0..=n)
                        .map(|k| {
                            let f = fa_v[k] * (1.0 - th) + fb_v[k] * th;
                            w[k] + l[k] * a - gz[k] * dt + f * dt
                        })
                        .collect();
                    let ws = ops.helmholtz_nodes(a, &r)?;
                    let div: Vec<C64> = ops.divergence(&us, &ws).into_iter().map(|x| x / dt).collect();
                    let phi = ops.poisson(&div)?;
                    for j in 0..d - 1 {
                        for c in 0..n {
                            us[j][c] -= ops.delta[j] * phi[c] * dt;
                        }
                    }
                    let gphi = ops.grad_z(&phi);
                    let mut wn = ws;
                    for k in 1..n {
                        wn[k] -= gphi[k] * dt;
                    }
                    u = us;
                    w = wn;
                    for c in 0..n {
                        p[c] += phi[c];
                    }
                }
                out.push(snapshot(&u, &w, &p, &ops));
            }
            Ok(out)
        })
        .collect();
    let per_mode: Vec<ModeOut> = per_mode.into_iter().collect::<Result<_>>()?;

    // back to node values: centred quantities averaged, walls from the ghost reflection
    let nzh = g.nz_half();
    let centre_to_nodes = |vals: &dyn Fn(usize) -> Vec<C64>, extrapolate: bool| -> Vec<C64> {
        let mut cols = vec![Z; g.half_len()];
        for h in 0..g.n_hmodes() {
            let v = vals(h);
            for k in 1..n {
                cols[h * nzh + k] = (v[k - 1] + v[k]) * 0.5;
            }
            if extrapolate {
                cols[h * nzh] = v[0] * 1.5 - v[1] * 0.5;
                cols[h * nzh + n] = v[n - 1] * 1.5 - v[n - 2] * 0.5;
            }
        }
        cols
    };
    let nodes = |vals: &dyn Fn(usize) -> Vec<C64>, extrapolate: bool| -> Vec<C64> {
        let mut cols = vec![Z; g.half_len()];
        for h in 0..g.n_hmodes() {
            let v = vals(h);
            cols[h * nzh..(h + 1) * nzh].copy_from_slice(&v);
            if extrapolate {
                cols[h * nzh] = v[1] * 2.0 - v[2];
                cols[h * nzh + n] = v[n - 1] * 2.0 - v[n - 2];
            }
        }
        cols
    };
    let build = |cols: Vec<C64>| SpectralField::from_half_columns(g, &cols, Parity::Raw).expect("shape");
    let mut u_out = Vec::with_capacity(nt);
    let mut gp_out = Vec::with_capacity(nt);
    for i in 0..nt {
        let mut uc = Vec::with_capacity(d);
        let mut gc = Vec::with_capacity(d);
        for j in 0..d - 1 {
            uc.push(build(centre_to_nodes(&|h| per_mode[h][i].0[j].clone(), false)));
            gc.push(build(centre_to_nodes(&|h| per_mode[h][i].2[j].clone(), true)));
        }
        uc.push(build(nodes(&|h| per_mode[h][i].1.clone(), false)));
        gc.push(build(nodes(&|h| per_mode[h][i].3.clone(), true)));
        u_out.push(VectorField::new(uc));
        gp_out.push(VectorField::new(gc));
    }
    Ok(StokesSolution { times: input.times.clone(), u: u_out, grad_pi: gp_out, mu: nu, provenance: Provenance::Oracle })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn thomas_solves_tridiagonal() {
        let n = 6;
        let lower = vec![C64::new(1.0, 0.5); n];
        let upper = vec![C64::new(-0.5, 0.2); n];
        let diag = vec![C64::new(4.0, -1.0); n];
        let x: Vec<C64> = (0..n).map(|i| C64::new(i as f64, 1.0 - i as f64)).collect();
        let mut r = vec![Z; n];
        for i in 0..n {
            r[i] = diag[i] * x[i];
            if i > 0 {
                r[i] += lower[i] * x[i - 1];
            }
            if i + 1 < n {
                r[i] += upper[i] * x[i + 1];
            }
        }
        let y = thomas(&lower, &diag, &upper, &r).unwrap();
        for (a, b) in x.iter().zip(&y) {
            assert!((a - b).norm() < 1e-13);
        }
    }
}
