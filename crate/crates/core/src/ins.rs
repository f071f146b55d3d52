//! Inhomogeneous incompressible Navier-Stokes with `a = 1/rho - 1`:
//! `d_t a + u.grad a = 0`, `d_t u + u.grad u + (1 + a)(grad Pi - mu Delta u) = 0`, `div u = 0`,
//! `u = 0` on the boundary.
//!
//! Solutions are built by the linearized iteration starting from `(a, u, grad Pi) = 0`: the
//! density is transported along the previous velocity, then a Stokes system with the
//! previous iterate's sources and partially linearized convection is solved. The
//! convection terms are lagged in an inner fixed point that calls the Stokes solver on each
//! pass.

use crate::besov::{halfspace_besov_norm_vec, BesovIndex};
use crate::error::{Error, Result};
use crate::field::{Parity, SpectralField, VectorField};
use crate::grid::SpectralGrid;
use crate::harness::{mixed_norm, xpr_norm, NormLedger, NormSpec, Quantity, TimeSeriesField, XprReport};
use crate::interp::{interp, node, velocity_at};
use crate::quadrature::{integrate_half, lp_half, lp_half_vec};
use crate::stokes::{solve_stokes, StokesInput, StokesSolution};
use log::{debug, info, warn};
use rayon::prelude::*;
use serde::Serialize;
use std::f64::consts::PI;

/// Largest Courant number (displacement per step in cells) accepted without a warning.
pub const COURANT_SAFETY: f64 = 1.0;

/// `p = dr/(3r - 2)`, the Lebesgue exponent for which `B^{-1+d/p}_{p,r}` data give
/// `Delta u` in `L^r L^p`.
pub fn critical_p(d: usize, r: f64) -> f64 {
    d as f64 * r / (3.0 * r - 2.0)
}

fn check_pr(d: usize, p: f64, r: f64) -> Result<()> {
    if !(r > 1.0) || !r.is_finite() {
        return Err(Error::Exponent { relation: "1 < r < inf", detail: format!("r = {r}") });
    }
    let pc = critical_p(d, r);
    if !((p - pc).abs() <= 1e-12 * pc) {
        return Err(Error::Exponent { relation: "p = dr/(3r-2)", detail: format!("p = {p}, expected {pc} for d = {d}, r = {r}") });
    }
    Ok(())
}

/// Empirical knobs. None of the constants is a value from the analysis, which leaves them
/// unspecified.
#[derive(Clone, Debug, Serialize)]
pub struct InsOptions {
    pub c0: f64,
    pub c1: f64,
    /// Weight exponent in `h_lambda`.
    pub lambda: f64,
    /// Second Lebesgue exponent `p~ in (d, dr/(r-1)]`; defaults to the midpoint.
    pub p_tilde: Option<f64>,
    pub inner_tol: f64,
    pub inner_max: usize,
    /// Relative tolerance on `||u^{n+1} - u^n||_{X^{p,r}_T}`.
    pub outer_tol: f64,
    pub outer_max: usize,
}

impl Default for InsOptions {
    fn default() -> Self {
        InsOptions { c0: 0.05, c1: 1.0, lambda: 1.0, p_tilde: None, inner_tol: 1e-8, inner_max: 50, outer_tol: 1e-6, outer_max: 30 }
    }
}

impl InsOptions {
    pub fn p_tilde(&self, d: usize, r: f64) -> f64 {
        self.p_tilde.unwrap_or_else(|| 0.5 * (d as f64 + d as f64 * r / (r - 1.0)))
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct SmallnessReport {
    pub eta0: f64,
    pub a0_linf: f64,
    pub uh_norm: f64,
    pub ud_norm: f64,
    /// `exp(c1 mu^{-2r} ||u0^d||^{2r})`.
    pub exp_factor: f64,
    pub mu: f64,
    pub p: f64,
    pub r: f64,
    pub c0: f64,
    pub c1: f64,
    /// `eta0 <= c0 mu`.
    pub verdict: bool,
}

/// `eta0 = (mu ||a0||_inf + ||u0^h||) exp(c1 mu^{-2r} ||u0^d||^{2r})` with the velocity norms in
/// `B^{-1+d/p}_{p,r}` of the half-space.
pub fn smallness(a0: &[f64], u0: &VectorField, mu: f64, p: f64, r: f64, c0: f64, c1: f64) -> Result<SmallnessReport> {
    let g = *u0.grid();
    check_pr(g.d, p, r)?;
    if a0.len() != g.half_len() {
        return Err(Error::Shape { expected: g.half_len(), got: a0.len() });
    }
    if !(mu > 0.0) {
        return Err(Error::InvalidArgument("viscosity must be positive".into()));
    }
    let idx = BesovIndex::critical(g.d, p, r)?;
    let a0_linf = lp_half(&g, a0, f64::INFINITY);
    let uh_norm = halfspace_besov_norm_vec(u0.horizontal(), idx);
    let ud_norm = halfspace_besov_norm_vec(std::slice::from_ref(u0.vertical()), idx);
    let exp_factor = (c1 * mu.powf(-2.0 * r) * ud_norm.powf(2.0 * r)).exp();
    let eta0 = (mu * a0_linf + uh_norm) * exp_factor;
    Ok(SmallnessReport { eta0, a0_linf, uh_norm, ud_norm, exp_factor, mu, p, r, c0, c1, verdict: eta0 <= c0 * mu })
}

// ---------------------------------------------------------------------------
// Density transport
// ---------------------------------------------------------------------------

/// Largest displacement per step in grid cells.
pub fn courant_number(g: &SpectralGrid, u: &[Vec<f64>], dt: f64) -> f64 {
    let d = g.d;
    let mut c = 0.0f64;
    for (k, comp) in u.iter().enumerate() {
        let h = if k == d - 1 { g.dz() } else { g.dx() };
        let m = comp.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        c = c.max(m * dt / h);
    }
    c
}

/// One semi-Lagrangian step of `d_t a + u.grad a = 0` over `[t, t + dt]`, with the
/// velocity given at both ends. Departure points come from a two-stage midpoint
/// backtrace; values from multilinear interpolation, so `a_new` stays within the range of
/// `a_old`.
pub fn advect_density(g: &SpectralGrid, a: &[f64], u_old: &VectorField, u_new: &VectorField, dt: f64) -> Result<Vec<f64>> {
    if a.len() != g.half_len() {
        return Err(Error::Shape { expected: g.half_len(), got: a.len() });
    }
    if u_old.grid() != g || u_new.grid() != g {
        return Err(Error::GridMismatch);
    }
    let un = u_new.samples();
    let uo = u_old.samples();
    if un.iter().chain(&uo).all(|c| c.iter().all(|&v| v == 0.0)) {
        return Ok(a.to_vec());
    }
    let courant = courant_number(g, &un, dt).max(courant_number(g, &uo, dt));
    if courant > COURANT_SAFETY {
        warn!("density transport: Courant number {courant:.3} exceeds {COURANT_SAFETY}");
    }
    let um: Vec<Vec<f64>> = un.iter().zip(&uo).map(|(a, b)| a.iter().zip(b).map(|(x, y)| 0.5 * (x + y)).collect()).collect();
    let out = (0..a.len())
        .into_par_iter()
        .map(|i| {
            let x = node(g, i);
            let v = velocity_at(g, &un, x);
            let mid = [x[0] - 0.5 * dt * v[0], x[1] - 0.5 * dt * v[1], x[2] - 0.5 * dt * v[2]];
            let w = velocity_at(g, &um, mid);
            interp(g, a, [x[0] - dt * w[0], x[1] - dt * w[1], x[2] - dt * w[2]])
        })
        .collect();
    Ok(out)
}

// ---------------------------------------------------------------------------
// Iteration
// ---------------------------------------------------------------------------

#[derive(Clone, Debug)]
pub struct InsProblem {
    /// Half-space samples of `a0`.
    pub a0: Vec<f64>,
    pub u0: VectorField,
    pub mu: f64,
    pub times: Vec<f64>,
}

impl InsProblem {
    pub fn grid(&self) -> &SpectralGrid {
        self.u0.grid()
    }
    pub fn t_end(&self) -> f64 {
        *self.times.last().expect("nonempty time grid")
    }
}

/// One iterate `(a^n, u^n, grad Pi^n)` at every sample time.
#[derive(Clone, Debug)]
pub struct Trajectory {
    pub times: Vec<f64>,
    pub mu: f64,
    pub a: Vec<Vec<f64>>,
    pub u: Vec<VectorField>,
    pub grad_pi: Vec<VectorField>,
}

impl Trajectory {
    pub fn zero(problem: &InsProblem) -> Self {
        let g = *problem.grid();
        let n = problem.times.len();
        Trajectory {
            times: problem.times.clone(),
            mu: problem.mu,
            a: vec![vec![0.0; g.half_len()]; n],
            u: vec![VectorField::zeros(g); n],
            grad_pi: vec![VectorField::zeros(g); n],
        }
    }

    pub fn grid(&self) -> &SpectralGrid {
        self.u[0].grid()
    }

    pub fn stokes(&self) -> StokesSolution {
        StokesSolution {
            times: self.times.clone(),
            u: self.u.clone(),
            grad_pi: self.grad_pi.clone(),
            mu: self.mu,
            provenance: crate::stokes::Provenance::Formula,
        }
    }

    fn is_zero(&self) -> bool {
        self.u.iter().all(|v| v.comps.iter().all(|c| c.samples().iter().all(|&x| x == 0.0)))
    }
}

fn mul(a: &[f64], b: &[f64]) -> Vec<f64> {
    a.iter().zip(b).map(|(x, y)| x * y).collect()
}

fn raw(g: &SpectralGrid, s: &[f64]) -> SpectralField {
    SpectralField::from_samples(*g, s, Parity::Raw).expect("half-grid samples")
}

/// First derivatives `[d_1, .., d_{d-1}, d_z]` as samples.
fn grad_samples(f: &SpectralField) -> Vec<Vec<f64>> {
    let d = f.grid().d;
    let mut out: Vec<Vec<f64>> = (0..d - 1).map(|j| f.d_h(j).samples()).collect();
    out.push(f.d_z().samples());
    out
}

/// `F^n` at one time: `F^h = a^{n+1}(mu Delta u^{h,n} - grad_h Pi^n) - u^{h,n}.grad_h u^{h,n}`,
/// `F^d = a^{n+1}(mu Delta u^{d,n} - d_d Pi^n)`.
fn source(a_next: &[f64], u: &VectorField, gp: &VectorField, mu: f64) -> VectorField {
    let g = *u.grid();
    let d = g.d;
    let us: Vec<Vec<f64>> = u.samples();
    let comps = (0..d)
        .map(|c| {
            let lap = u.comps[c].laplacian().samples();
            let gpc = gp.comps[c].samples();
            let mut s: Vec<f64> = (0..g.half_len()).map(|i| a_next[i] * (mu * lap[i] - gpc[i])).collect();
            if c < d - 1 {
                let gr = grad_samples(&u.comps[c]);
                for j in 0..d - 1 {
                    for i in 0..s.len() {
                        s[i] -= us[j][i] * gr[j][i];
                    }
                }
            }
            raw(&g, &s)
        })
        .collect();
    VectorField::new(comps)
}

/// Lagged convection `L(w; v)`: `L^h = v^d d_d w^h`,
/// `L^d = w^h.grad_h v^d - v^d div_h w^h`.
fn convection(w: &VectorField, v: &VectorField) -> VectorField {
    let g = *w.grid();
    let d = g.d;
    let vd = v.vertical().samples();
    let gvd = grad_samples(v.vertical());
    let mut comps: Vec<SpectralField> = (0..d - 1).map(|c| raw(&g, &mul(&vd, &w.comps[c].d_z().samples()))).collect();
    let mut s = vec![0.0; g.half_len()];
    for j in 0..d - 1 {
        let wj = w.comps[j].samples();
        let dj = w.comps[j].d_h(j).samples();
        for i in 0..s.len() {
            s[i] += wj[i] * gvd[j][i] - vd[i] * dj[i];
        }
    }
    comps.push(raw(&g, &s));
    VectorField::new(comps)
}

/// Space-time `l^2` size of a velocity trajectory.
fn traj_size(g: &SpectralGrid, u: &[VectorField]) -> f64 {
    u.iter().map(|v| lp_half_vec(g, &v.samples(), 2.0).powi(2)).sum::<f64>().sqrt()
}

fn traj_diff(g: &SpectralGrid, a: &[VectorField], b: &[VectorField]) -> f64 {
    a.iter().zip(b).map(|(x, y)| lp_half_vec(g, &x.sub(y).expect("same grid").samples(), 2.0).powi(2)).sum::<f64>().sqrt()
}


#[derive(Clone, Debug, Serialize)]
pub struct StepReport {
    pub inner_passes: usize,
    /// Change of each inner pass relative to the size of the first pass.
    pub inner_changes: Vec<f64>,
    /// `max_t ||a^{n+1}(t)||_inf`.
    pub a_linf: f64,
    /// `min_t ||a^{n+1}(t)||_inf`.
    pub a_linf_min: f64,
    /// `max_t ||div u^{n+1}(t)||_inf`.
    pub div_linf: f64,
}

/// Transport of `a0` along a velocity trajectory, one semi-Lagrangian step per interval.
pub fn transport(problem: &InsProblem, u: &[VectorField]) -> Result<Vec<Vec<f64>>> {
    let g = *problem.grid();
    let mut a = vec![problem.a0.clone()];
    for k in 0..problem.times.len() - 1 {
        let dt = problem.times[k + 1] - problem.times[k];
        let next = advect_density(&g, &a[k], &u[k], &u[k + 1], dt)?;
        a.push(next);
    }
    Ok(a)
}

/// `(a^n, u^n, grad Pi^n) -> (a^{n+1}, u^{n+1}, grad Pi^{n+1})`.
pub fn picard_step(prev: &Trajectory, problem: &InsProblem, opts: &InsOptions) -> Result<(Trajectory, StepReport)> {
    let g = *problem.grid();
    let mu = problem.mu;
    let n_t = problem.times.len();
    let a = transport(problem, &prev.u)?;
    let f: Vec<VectorField> = (0..n_t).into_par_iter().map(|k| source(&a[k], &prev.u[k], &prev.grad_pi[k], mu)).collect();
    let frozen = prev.is_zero();
    let mut w = prev.u.clone();
    let mut changes: Vec<f64> = Vec::new();
    let mut rising = 0;
    let mut reference: Option<f64> = None;
    let mut sol;
    loop {
        let rhs: Vec<VectorField> = if frozen {
            f.clone()
        } else {
            (0..n_t).into_par_iter().map(|k| f[k].sub(&convection(&w[k], &prev.u[k])).expect("same grid")).collect()
        };
        let mut input = StokesInput::new(mu, problem.u0.clone(), problem.times.clone());
        input.f = rhs;
        sol = solve_stokes(&input)?;
        // measured against the first pass, so that geometric growth shows as an increase
        let diff = traj_diff(&g, &sol.u, &w);
        let scale = *reference.get_or_insert_with(|| traj_size(&g, &sol.u));
        let change = if diff == 0.0 { 0.0 } else { diff / scale.max(1e-300) };
        w = sol.u.clone();
        if !change.is_finite() {
            return Err(Error::Iteration(format!("inner fixed point produced a non-finite update after {} passes", changes.len() + 1)));
        }
        if let Some(&last) = changes.last() {
            rising = if change > last { rising + 1 } else { 0 };
        }
        changes.push(change);
        debug!("inner pass {}: relative change {change:e}", changes.len());
        // without convection the first pass is already the solution
        if frozen || change < opts.inner_tol {
            break;
        }
        if rising >= 5 {
            return Err(Error::Iteration(format!("inner fixed point is not contracting; relative changes {changes:?}")));
        }
        if changes.len() >= opts.inner_max {
            warn!("inner fixed point stopped after {} passes at relative change {change:e}", changes.len());
            break;
        }
    }
    let a_norms: Vec<f64> = a.iter().map(|x| lp_half(&g, x, f64::INFINITY)).collect();
    let div_linf = sol.u.iter().map(|v| lp_half(&g, &v.div().samples(), f64::INFINITY)).fold(0.0, f64::max);
    let report = StepReport {
        inner_passes: changes.len(),
        inner_changes: changes,
        a_linf: a_norms.iter().cloned().fold(0.0, f64::max),
        a_linf_min: a_norms.iter().cloned().fold(f64::INFINITY, f64::min),
        div_linf,
    };
    Ok((Trajectory { times: problem.times.clone(), mu, a, u: sol.u, grad_pi: sol.grad_pi }, report))
}

// ---------------------------------------------------------------------------
// Norms and diagnostics
// ---------------------------------------------------------------------------

/// `h_lambda(t) = exp(-lambda mu^{1-2r} int_0^t ||grad u^d||^{2r})` for the two weightings:
/// `L^{dr/(2r-1)}` alone, and the sum of the `L^{dr/(2r-1)}` and `L^alpha` norms with
/// `1/p~ = 1/alpha + (r-1)/(dr)`.
#[derive(Clone, Debug, Serialize)]
pub struct HLambda {
    pub lambda: f64,
    pub alpha: f64,
    pub single: Vec<f64>,
    pub intersection: Vec<f64>,
}

pub fn h_lambda(traj: &Trajectory, r: f64, lambda: f64, p_tilde: f64) -> HLambda {
    let g = *traj.grid();
    let d = g.d as f64;
    let q = d * r / (2.0 * r - 1.0);
    let inv_alpha = 1.0 / p_tilde - (r - 1.0) / (d * r);
    let alpha = if inv_alpha > 0.0 { 1.0 / inv_alpha } else { f64::INFINITY };
    let norms: Vec<(f64, f64)> = traj
        .u
        .par_iter()
        .map(|u| {
            let gr = grad_samples(u.vertical());
            let a = lp_half_vec(&g, &gr, q);
            (a, a + lp_half_vec(&g, &gr, alpha.max(1.0)))
        })
        .collect();
    let weight = |pick: fn(&(f64, f64)) -> f64| {
        let mut acc = 0.0;
        let mut out = vec![1.0];
        for k in 1..traj.times.len() {
            let dt = traj.times[k] - traj.times[k - 1];
            acc += 0.5 * dt * (pick(&norms[k - 1]).powf(2.0 * r) + pick(&norms[k]).powf(2.0 * r));
            out.push((-lambda * traj.mu.powf(1.0 - 2.0 * r) * acc).exp());
        }
        out
    };
    HLambda { lambda, alpha, single: weight(|x| x.0), intersection: weight(|x| x.1) }
}

/// Norms of one iterate appearing in the a priori estimates.
#[derive(Clone, Debug, Serialize)]
pub struct IterateNorms {
    /// `||u^h||_{frak X^{p,r}_T}`.
    pub uh_frak: f64,
    pub full: XprReport,
    /// `mu^{1-1/(2r)} ||grad u^h||_{L^{2r} L^{dr/(2r-1)}}`.
    pub grad_uh: f64,
    pub grad_u: f64,
    /// The horizontal left-hand side is below the full one.
    pub anisotropic: bool,
}

fn grad_series(traj: &Trajectory, comps: std::ops::Range<usize>) -> Result<TimeSeriesField> {
    let frames: Vec<Vec<SpectralField>> = traj
        .u
        .iter()
        .map(|u| {
            let mut fr = Vec::new();
            for c in comps.clone() {
                let f = &u.comps[c];
                fr.extend((0..f.grid().d - 1).map(|j| f.d_h(j)));
                fr.push(f.d_z());
            }
            fr
        })
        .collect();
    TimeSeriesField::from_half(traj.times.clone(), &frames, Quantity::GradU)
}

pub fn iterate_norms(traj: &Trajectory, p: f64, r: f64) -> Result<IterateNorms> {
    let g = *traj.grid();
    let d = g.d;
    let t_end = *traj.times.last().expect("nonempty");
    let full = xpr_norm(&traj.stokes(), p, r, t_end)?;
    let horiz = StokesSolution {
        u: traj.u.iter().map(|u| VectorField::new(u.horizontal().to_vec())).collect(),
        grad_pi: vec![VectorField::new(vec![SpectralField::zeros(g); d - 1]); traj.times.len()],
        ..traj.stokes()
    };
    let h = xpr_norm(&horiz, p, r, t_end)?;
    let q = d as f64 * r / (2.0 * r - 1.0);
    let scale = traj.mu.powf(1.0 - 0.5 / r);
    let grad_uh = scale * mixed_norm(&grad_series(traj, 0..d - 1)?, 2.0 * r, q, t_end)?;
    let grad_u = scale * mixed_norm(&grad_series(traj, 0..d)?, 2.0 * r, q, t_end)?;
    let uh_frak = h.besov_part + h.evolution_part;
    let anisotropic = uh_frak + grad_uh <= full.total + grad_u;
    Ok(IterateNorms { uh_frak, full, grad_uh, grad_u, anisotropic })
}

impl IterateNorms {
    pub fn record(&self, ledger: &mut NormLedger, p: f64, r: f64, d: usize, t: f64) {
        let q = d as f64 * r / (2.0 * r - 1.0);
        ledger.push("u^h", NormSpec::Xpr { p, r }, self.uh_frak, t);
        self.full.record(ledger, p, r, t);
        ledger.push("grad u^h", NormSpec::LrLp { r: 2.0 * r, p: q }, self.grad_uh, t);
        ledger.push("grad u", NormSpec::LrLp { r: 2.0 * r, p: q }, self.grad_u, t);
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct IterationRecord {
    pub n: usize,
    /// `||u^n - u^{n-1}||_{X^{p,r}_T}` (velocity and pressure gradient).
    pub diff: f64,
    /// `diff_n / diff_{n-1}`.
    pub ratio: Option<f64>,
    pub step: StepReport,
    pub norms: IterateNorms,
    pub ledger: NormLedger,
    pub h_lambda: HLambda,
}

#[derive(Clone, Debug, Serialize)]
pub struct InsRun {
    pub smallness: SmallnessReport,
    pub history: Vec<IterationRecord>,
    /// Ledger of the final iterate.
    pub ledger: NormLedger,
    pub converged: bool,
    #[serde(skip)]
    pub trajectory: Trajectory,
}

fn difference(a: &Trajectory, b: &Trajectory) -> StokesSolution {
    StokesSolution {
        u: a.u.iter().zip(&b.u).map(|(x, y)| x.sub(y).expect("same grid")).collect(),
        grad_pi: a.grad_pi.iter().zip(&b.grad_pi).map(|(x, y)| x.sub(y).expect("same grid")).collect(),
        ..a.stokes()
    }
}

/// Iterate [`picard_step`] from zero until the relative `X^{p,r}_T` change drops below
/// `outer_tol`. Errors out when the budget runs out.
pub fn run_ins(problem: &InsProblem, p: f64, r: f64, opts: &InsOptions) -> Result<InsRun> {
    let run = run_ins_for(problem, p, r, opts, opts.outer_max)?;
    if !run.converged {
        let last = run.history.last().map_or(f64::NAN, |h| h.diff);
        return Err(Error::Iteration(format!("no convergence in {} iterations; last X^(p,r) change {last:e}", opts.outer_max)));
    }
    Ok(run)
}

/// [`run_ins`] with a fixed iteration cap and no error on non-convergence.
pub fn run_ins_for(problem: &InsProblem, p: f64, r: f64, opts: &InsOptions, max_iter: usize) -> Result<InsRun> {
    let g = *problem.grid();
    if problem.times.len() < 3 {
        return Err(Error::InvalidArgument("the iteration needs at least three time samples".into()));
    }
    let small = smallness(&problem.a0, &problem.u0, problem.mu, p, r, opts.c0, opts.c1)?;
    info!("smallness: eta0 = {:e}, c0 mu = {:e}, verdict {}", small.eta0, small.c0 * small.mu, small.verdict);
    if !small.verdict {
        warn!("smallness condition fails; the iteration may not contract");
    }
    let p_tilde = opts.p_tilde(g.d, r);
    let t_end = problem.t_end();
    let mut cur = Trajectory::zero(problem);
    let mut history: Vec<IterationRecord> = Vec::new();
    let mut converged = false;
    for n in 1..=max_iter {
        let (next, step) = picard_step(&cur, problem, opts)?;
        let diff = xpr_norm(&difference(&next, &cur), p, r, t_end)?.total;
        let norms = iterate_norms(&next, p, r)?;
        let mut ledger = NormLedger::default();
        norms.record(&mut ledger, p, r, g.d, t_end);
        ledger.push("a", NormSpec::LrLp { r: f64::INFINITY, p: f64::INFINITY }, step.a_linf, t_end);
        let ratio = history.last().map(|h| diff / h.diff);
        let hl = h_lambda(&next, r, opts.lambda, p_tilde);
        info!("iteration {n}: X change {diff:e}, ratio {ratio:?}, inner passes {}", step.inner_passes);
        let size = norms.full.total;
        history.push(IterationRecord { n, diff, ratio, step, norms, ledger, h_lambda: hl });
        cur = next;
        if diff <= opts.outer_tol * size {
            converged = true;
            break;
        }
    }
    let ledger = history.last().map(|h| h.ledger.clone()).unwrap_or_default();
    Ok(InsRun { smallness: small, history, ledger, converged, trajectory: cur })
}

// ---------------------------------------------------------------------------
// Weak formulation
// ---------------------------------------------------------------------------

/// Separable test function `theta(t) cos(2 pi k.x / L_h + phase) psi(z)` with
/// `theta(t) = (1 - (t/t_cut)^2)^4` on `[0, t_cut)` and `psi` the same quartic bump on
/// `(z_lo, z_hi)`. Both factors are `C^3`, with vanishing derivative at `t = 0`.
#[derive(Clone, Copy, Debug, Serialize)]
pub struct TestMode {
    pub k: [i64; 2],
    pub phase: f64,
    pub t_cut: f64,
    pub z_lo: f64,
    pub z_hi: f64,
}

fn bump4(s: f64) -> (f64, f64) {
    if s.abs() >= 1.0 {
        (0.0, 0.0)
    } else {
        let b = 1.0 - s * s;
        (b.powi(4), -8.0 * s * b.powi(3))
    }
}

impl TestMode {
    pub fn theta(&self, t: f64) -> (f64, f64) {
        let (v, dv) = bump4(t / self.t_cut);
        (v, dv / self.t_cut)
    }

    /// Value and gradient `[d_1, d_2, d_z]` at a point.
    pub fn eval(&self, l_h: f64, x: [f64; 2], z: f64) -> (f64, [f64; 3]) {
        let kk = [2.0 * PI * self.k[0] as f64 / l_h, 2.0 * PI * self.k[1] as f64 / l_h];
        let arg = kk[0] * x[0] + kk[1] * x[1] + self.phase;
        let half = 0.5 * (self.z_hi - self.z_lo);
        let (ps, dps) = bump4((z - 0.5 * (self.z_lo + self.z_hi)) / half);
        let dps = dps / half;
        let (c, s) = (arg.cos(), arg.sin());
        (c * ps, [-kk[0] * s * ps, -kk[1] * s * ps, c * dps])
    }

    fn sample(&self, g: &SpectralGrid) -> (Vec<f64>, [Vec<f64>; 3]) {
        let n = g.half_len();
        let mut v = vec![0.0; n];
        let mut gr = [vec![0.0; n], vec![0.0; n], vec![0.0; n]];
        for i in 0..n {
            let x = node(g, i);
            let (a, b) = self.eval(g.l_h, [x[0], x[1]], x[2]);
            v[i] = a;
            for c in 0..3 {
                gr[c][i] = b[c];
            }
        }
        (v, gr)
    }
}

/// Scalar test function `phi` and vector test function `Phi` (one mode per component).
#[derive(Clone, Debug, Serialize)]
pub struct WeakTest {
    pub phi: TestMode,
    pub big_phi: Vec<TestMode>,
}

#[derive(Clone, Debug, Default, Serialize)]
pub struct WeakResidual {
    /// `int int a (d_t phi + u.grad phi) + int phi(0) a0`.
    pub transport: f64,
    /// `int int phi div u`.
    pub divergence: f64,
    /// `int int u.d_t Phi + u (x) u : grad Phi + (1 + a)(mu Delta u - grad Pi).Phi + int u0.Phi(0)`.
    pub momentum: f64,
}

/// Both integral identities of the weak formulation by trapezoid quadrature in time and
/// the half-space node rule in space. Absolute residuals, summed over the test set.
pub fn weak_residual(traj: &Trajectory, a0: &[f64], u0: &VectorField, tests: &[WeakTest]) -> Result<WeakResidual> {
    let g = *traj.grid();
    let d = g.d;
    let n_t = traj.times.len();
    if tests.iter().any(|t| t.big_phi.len() != d) {
        return Err(Error::InvalidArgument(format!("vector test functions need {d} components")));
    }
    let ax = |j: usize| if j == d - 1 { 2 } else { j };
    // per-time fields shared by all tests
    struct Frame {
        u: Vec<Vec<f64>>,
        div: Vec<f64>,
        force: Vec<Vec<f64>>,
    }
    let frames: Vec<Frame> = (0..n_t)
        .into_par_iter()
        .map(|k| {
            let u = &traj.u[k];
            let us = u.samples();
            let a = &traj.a[k];
            let force = (0..d)
                .map(|c| {
                    let lap = u.comps[c].laplacian().samples();
                    let gp = traj.grad_pi[k].comps[c].samples();
                    (0..g.half_len()).map(|i| (1.0 + a[i]) * (traj.mu * lap[i] - gp[i])).collect()
                })
                .collect();
            Frame { u: us, div: u.div().samples(), force }
        })
        .collect();
    let u0s = u0.samples();
    let mut res = WeakResidual::default();
    for test in tests {
        let (phi, gphi) = test.phi.sample(&g);
        let vecs: Vec<(Vec<f64>, [Vec<f64>; 3])> = test.big_phi.iter().map(|m| m.sample(&g)).collect();
        let mut tr = Vec::with_capacity(n_t);
        let mut dv = Vec::with_capacity(n_t);
        let mut mo = Vec::with_capacity(n_t);
        for k in 0..n_t {
            let t = traj.times[k];
            let fr = &frames[k];
            let a = &traj.a[k];
            let (th, dth) = test.phi.theta(t);
            let n = g.half_len();
            let mut s = vec![0.0; n];
            for i in 0..n {
                let adv: f64 = (0..d).map(|j| fr.u[j][i] * gphi[ax(j)][i]).sum();
                s[i] = a[i] * (dth * phi[i] + th * adv);
            }
            tr.push(integrate_half(&g, &s));
            dv.push(th * integrate_half(&g, &mul(&phi, &fr.div)));
            let mut m = vec![0.0; n];
            for (c, (pv, pg)) in vecs.iter().enumerate() {
                let (thc, dthc) = test.big_phi[c].theta(t);
                for i in 0..n {
                    // (u (x) u) : grad Phi = sum_j u_j u_c d_j Phi_c
                    let conv: f64 = (0..d).map(|j| fr.u[j][i] * pg[ax(j)][i]).sum::<f64>() * fr.u[c][i];
                    m[i] += fr.u[c][i] * dthc * pv[i] + thc * (conv + fr.force[c][i] * pv[i]);
                }
            }
            mo.push(integrate_half(&g, &m));
        }
        let trap = |v: &[f64]| (1..n_t).map(|k| 0.5 * (traj.times[k] - traj.times[k - 1]) * (v[k] + v[k - 1])).sum::<f64>();
        let (th0, _) = test.phi.theta(0.0);
        let init_a = th0 * integrate_half(&g, &mul(&phi, a0));
        let init_u: f64 = vecs.iter().enumerate().map(|(c, (pv, _))| test.big_phi[c].theta(0.0).0 * integrate_half(&g, &mul(pv, &u0s[c]))).sum();
        res.transport += (trap(&tr) + init_a).abs();
        res.divergence += trap(&dv).abs();
        res.momentum += (trap(&mo) + init_u).abs();
    }
    Ok(res)
}

/// A small fixed family of test functions supported in `[0, t_cut) x {z < z_cut}`.
pub fn standard_tests(d: usize, t_cut: f64, z_cut: f64) -> Vec<WeakTest> {
    let mode = |k: [i64; 2], phase: f64| TestMode { k, phase, t_cut, z_lo: -z_cut, z_hi: z_cut };
    let k2 = if d == 3 { 1 } else { 0 };
    vec![
        WeakTest { phi: mode([1, 0], 0.3), big_phi: (0..d).map(|c| mode([1, k2], 0.7 * c as f64)).collect() },
        WeakTest { phi: mode([2, k2], 1.1), big_phi: (0..d).map(|c| mode([0, 1.min(k2)], 0.2 + c as f64)).collect() },
        WeakTest { phi: mode([0, 0], 0.0), big_phi: (0..d).map(|c| mode([1, 0], 1.3 * c as f64)).collect() },
    ]
}
