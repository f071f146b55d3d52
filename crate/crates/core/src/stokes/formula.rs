//! Evaluation of the explicit solution formula.

use super::{time_derivative, time_derivative_vec, Provenance, StokesInput, StokesSolution};
use crate::error::{Error, Result};
use crate::field::{ExtMode, Parity, SpectralField, VectorField, WholeField};
use crate::quadrature::{lp_half, lp_half_vec};
use crate::ukai::{apply_g, apply_mtilde, apply_ntilde, apply_p, apply_u, apply_vd, apply_vh, h_gamma};
use num_complex::Complex64 as C64;
use rayon::prelude::*;

const Z: C64 = C64 { re: 0.0, im: 0.0 };
const I: C64 = C64 { re: 0.0, im: 1.0 };

/// `phi_1(x) = (e^x - 1)/x` and `phi_2(x) = (e^x - 1 - x)/x^2`, by series near zero.
pub(crate) fn phi12(x: f64) -> (f64, f64) {
    if x.abs() < 0.1 {
        // phi_k(x) = sum_j x^j / (j + k)!
        let (mut p1, mut p2) = (0.0, 0.0);
        let mut xj = 1.0;
        let mut f1 = 1.0; // (j+1)!
        let mut f2 = 2.0; // (j+2)!
        for j in 0..12 {
            p1 += xj / f1;
            p2 += xj / f2;
            xj *= x;
            f1 *= (j + 2) as f64;
            f2 *= (j + 3) as f64;
        }
        (p1, p2)
    } else {
        let e = x.exp();
        ((e - 1.0) / x, (e - 1.0 - x) / (x * x))
    }
}

/// `C(s_i)` with `C' = Delta C + F`, `C(0) = init`, for `F` interpolated linearly in time
/// between samples; exact per Fourier mode.
pub(crate) fn heat_duhamel(s: &[f64], init: &WholeField, src: &[WholeField]) -> Vec<WholeField> {
    let g = *init.grid();
    let nzf = g.nz_full();
    let parity = init.parity();
    let mut out = vec![init.clone()];
    for i in 0..s.len() - 1 {
        let h = s[i + 1] - s[i];
        let prev = out[i].coefficients();
        let (fa, fb) = (src[i].coefficients(), src[i + 1].coefficients());
        let mut next = vec![Z; g.full_len()];
        next.par_chunks_mut(nzf).enumerate().for_each(|(hm, col)| {
            let k2 = g.kappa(hm).powi(2);
            for (m, c) in col.iter_mut().enumerate() {
                let lam = k2 + g.xi_z(m).powi(2);
                let x = -lam * h;
                let (p1, p2) = phi12(x);
                let b = h * p2;
                let a = h * p1 - b;
                let idx = hm * nzf + m;
                *c = prev[idx] * x.exp() + fa[idx] * a + fb[idx] * b;
            }
        });
        out.push(WholeField::from_coefficients(g, parity, next).expect("shape"));
    }
    out
}

fn warn_trace(name: &str, fields: &[SpectralField]) {
    let g = *fields[0].grid();
    let (mut tr, mut all) = (0.0f64, 0.0f64);
    for f in fields {
        tr = tr.max(f.trace().max_abs());
        all = all.max(lp_half(&g, &f.samples(), f64::INFINITY));
    }
    if tr > 1e-8 * all.max(1e-300) {
        warn_once!("{name}: antisymmetric extension of a source with trace {tr:e} (relative {:e})", tr / all);
    }
}

/// First term of `grad_h Pi`, component `m`:
/// `r R_h.S (S_m R_d + R_m)(S.e_a(f^h) + e_s(f^d))`.
fn pressure_first_term(f: &VectorField, m: usize) -> SpectralField {
    let mut sf = SpectralField::zeros(*f.grid());
    for (j, fj) in f.horizontal().iter().enumerate() {
        sf.axpy(1.0, &fj.s(j)).expect("same grid");
    }
    let sym = move |md: &crate::field::Mode| [-md.ixi(m) * md.kappa, -md.ixi(m), Z];
    sf.ext_mult(ExtMode::Antisym, sym).add(&f.vertical().ext_mult(ExtMode::Sym, sym)).expect("same grid")
}

/// Evaluate `(u, grad Pi)` at every sample time by the explicit formula.
///
/// The viscosity is scaled out first (`s = mu t`, `u' = mu u`, `Q' = mu Q`), the `mu = 1`
/// formula is evaluated, and the result is transformed back. Time convolutions are exact
/// per mode for the piecewise-linear interpolant of the sources.
pub fn solve_stokes(input: &StokesInput) -> Result<StokesSolution> {
    input.validate()?;
    let mu = input.mu;
    let g = *input.grid();
    let d = g.d;
    let n = input.times.len();
    let s: Vec<f64> = input.times.iter().map(|t| mu * t).collect();
    let has_q = !input.q.is_empty();
    if has_q && n < 3 {
        return Err(Error::InvalidArgument("d_t Q needs at least three time samples".into()));
    }
    let u0 = input.u0.scale(mu);
    let f: Vec<VectorField> = (0..n).map(|i| input.forcing(i)).collect();
    let q: Vec<VectorField> = (0..n).map(|i| input.q_at(i).scale(mu)).collect();
    let gdiv: Vec<SpectralField> = q.par_iter().map(|q| q.div()).collect();
    let k: Vec<VectorField> = (0..n)
        .into_par_iter()
        .map(|i| {
            if has_q {
                time_derivative_vec(&s, &q, i).sub(&VectorField::grad(&gdiv[i])).expect("same grid")
            } else {
                VectorField::zeros(g)
            }
        })
        .collect();

    // sources of the two heat problems
    struct Src {
        nt: SpectralField,
        gk: SpectralField,
        sd: SpectralField,
        sh: Vec<SpectralField>,
    }
    let src: Vec<Src> = (0..n)
        .into_par_iter()
        .map(|i| {
            let nt = apply_ntilde(&f[i]);
            let gk = apply_g(&k[i]);
            let mt = apply_mtilde(&f[i]);
            let sd = nt.add(&gk).expect("same grid");
            let sh = mt.iter().enumerate().map(|(j, m)| m.add(&gk.s(j)).expect("same grid")).collect();
            Src { nt, gk, sd, sh }
        })
        .collect();
    warn_trace("N~f + Gk", &src.iter().map(|x| x.sd.clone()).collect::<Vec<_>>());

    let sd_ext: Vec<WholeField> = src.par_iter().map(|x| x.sd.extend_quiet(ExtMode::Antisym)).collect();
    let vd0 = apply_vd(&u0);
    let vh0 = apply_vh(&u0);
    let phi = heat_duhamel(&s, &vd0.extend(ExtMode::Antisym), &sd_ext);
    let psi: Vec<Vec<WholeField>> = (0..d - 1)
        .map(|j| {
            let ext: Vec<WholeField> = src.par_iter().map(|x| x.sh[j].extend_quiet(ExtMode::Antisym)).collect();
            heat_duhamel(&s, &vh0[j].extend(ExtMode::Antisym), &ext)
        })
        .collect();

    // W = S.U Q^h + (I - U) Q^d - H gamma Q^d, whose time derivative enters the pressure
    let w: Vec<SpectralField> = if has_q {
        q.par_iter()
            .map(|qi| {
                let qd = qi.vertical();
                let mut w = qd.sub(&apply_u(qd)).expect("same grid").sub(&h_gamma(qd)).expect("same grid");
                for (j, qj) in qi.horizontal().iter().enumerate() {
                    w.axpy(1.0, &apply_u(qj).s(j)).expect("same grid");
                }
                w
            })
            .collect()
    } else {
        vec![]
    };

    let results: Vec<(VectorField, VectorField)> = (0..n)
        .into_par_iter()
        .map(|i| {
            let rphi = SpectralField::restrict(&phi[i]);
            let u_phi = apply_u(&rphi);
            let pg = apply_p(&gdiv[i]);
            let ud = pg.add(&u_phi).expect("same grid");
            let mut comps: Vec<SpectralField> = (0..d - 1)
                .map(|j| {
                    SpectralField::restrict(&psi[j][i])
                        .sub(&pg.s(j))
                        .and_then(|x| x.sub(&u_phi.s(j)))
                        .expect("same grid")
                })
                .collect();
            comps.push(ud);
            let u = VectorField::new(comps).scale(1.0 / mu);

            // pressure gradient
            let lap_phi = SpectralField::restrict(&phi[i].map_symbol(Parity::Even, |md, m| {
                C64::new(-(md.kappa * md.kappa + g.xi_z(m).powi(2)), 0.0)
            }));
            let u_lap = apply_u(&lap_phi);
            let u_nt = apply_u(&src[i].nt);
            let gk = &src[i].gk;
            let dw = if has_q { time_derivative(&s, &w, i) } else { SpectralField::zeros(g) };
            let gi = &gdiv[i];
            let mut grad = Vec::with_capacity(d);
            for m in 0..d - 1 {
                let mut p = pressure_first_term(&f[i], m);
                p.axpy(1.0, &apply_u(gk).sub(gk).expect("same grid").s(m)).expect("same grid");
                p.axpy(1.0, &gi.d_h(m).sub(&gi.d_z().s(m)).expect("same grid")).expect("same grid");
                p.axpy(1.0, &dw.s(m)).expect("same grid");
                p.axpy(1.0, &u_nt.s(m)).expect("same grid");
                let t = phi[i].map_symbol(Parity::Raw, |md, iz| (C64::new(md.kappa, 0.0) - I * g.dxi_z(iz)) * md.ixi(m));
                p.axpy(1.0, &SpectralField::restrict(&t)).expect("same grid");
                p.axpy(1.0, &u_lap.s(m)).expect("same grid");
                grad.push(p);
            }
            let mut pd = f[i].vertical().clone();
            pd.axpy(1.0, &gi.d_z().sub(&gi.dh_abs()).expect("same grid")).expect("same grid");
            pd.axpy(-1.0, &dw).expect("same grid");
            pd.axpy(-1.0, &apply_u(&src[i].sd)).expect("same grid");
            let t = phi[i].map_symbol(Parity::Raw, |md, iz| (C64::new(md.kappa, 0.0) - I * g.dxi_z(iz)) * md.kappa);
            pd.axpy(-1.0, &SpectralField::restrict(&t)).expect("same grid");
            pd.axpy(-1.0, &u_lap).expect("same grid");
            grad.push(pd);
            (u, VectorField::new(grad))
        })
        .collect();
    let (u, grad_pi) = results.into_iter().unzip();
    Ok(StokesSolution { times: input.times.clone(), u, grad_pi, mu, provenance: Provenance::Formula })
}

/// Horizontal velocity of the free solution through `u0^h` only:
/// `(r + S U S.) e^{mu t Delta} e_a(u0^h) + r S (R_d R_h e_s + R_h.S R_h e_a) . e^{mu t Delta} e_s(u0^h)`.
pub fn free_horizontal(u0: &VectorField, mu: f64, times: &[f64], tol: f64) -> Result<Vec<Vec<SpectralField>>> {
    let g = *u0.grid();
    let scale = lp_half_vec(&g, &u0.samples(), f64::INFINITY).max(1e-300);
    let div = lp_half(&g, &u0.div().samples(), f64::INFINITY);
    if div > tol * scale.max(1.0) {
        return Err(Error::Compatibility(format!("u0 is not divergence free ({div:e})")));
    }
    let tr = u0.vertical().trace().max_abs();
    if tr > tol * scale.max(1.0) {
        return Err(Error::Compatibility(format!("trace of u0^d is {tr:e}")));
    }
    let uh = u0.horizontal();
    let ea: Vec<WholeField> = uh.iter().map(|c| c.extend(ExtMode::Antisym)).collect();
    let es: Vec<WholeField> = uh.iter().map(|c| c.extend(ExtMode::Sym)).collect();
    Ok(times
        .par_iter()
        .map(|&t| {
            let a: Vec<SpectralField> = ea.iter().map(|w| SpectralField::restrict(&w.heat(mu, t))).collect();
            let b: Vec<SpectralField> = es.iter().map(|w| SpectralField::restrict(&w.heat(mu, t))).collect();
            let mut sa = SpectralField::zeros(g);
            let mut second = SpectralField::zeros(g);
            for (j, (aj, bj)) in a.iter().zip(&b).enumerate() {
                sa.axpy(1.0, &aj.s(j)).expect("same grid");
                second.axpy(1.0, &bj.ext_mult(ExtMode::Sym, |md| [Z, md.ixi(j), Z])).expect("same grid");
                second.axpy(1.0, &bj.ext_mult(ExtMode::Antisym, |md| [-md.ixi(j) * md.kappa, Z, Z])).expect("same grid");
            }
            let usa = apply_u(&sa);
            a.iter()
                .enumerate()
                .map(|(m, am)| am.add(&usa.s(m)).and_then(|x| x.add(&second.s(m))).expect("same grid"))
                .collect()
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::phi12;

    #[test]
    fn phi_functions_continuous_at_switch() {
        for x in [-0.1 - 1e-12, -0.1 + 1e-12, 0.0999999] {
            let (a, b) = phi12(x);
            let e = x.exp();
            assert!((a - (e - 1.0) / x).abs() < 1e-13);
            assert!((b - (e - 1.0 - x) / (x * x)).abs() < 1e-10);
        }
        assert_eq!(phi12(0.0), (1.0, 0.5));
    }
}
