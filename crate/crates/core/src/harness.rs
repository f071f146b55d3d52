//! Space-time norms and measured constants for the maximal-regularity, smoothing and
//! interpolation estimates.
//!
//! The analytical constants are existential, so every check reports a ratio `LHS / RHS`
//! (dimensionless in the viscosity) instead of a pass/fail against a constant.

use crate::besov::{besov_norm, besov_norm_vec, semigroup_norm, BesovIndex, TimeQuadrature};
use crate::error::{Error, Result};
use crate::field::{ExtMode, SpectralField, VectorField, WholeField};
use crate::grid::SpectralGrid;
use crate::quadrature::{lp_half_vec, lp_periodic, lp_whole_vec};
use crate::stokes::{heat_duhamel, time_derivative_vec, StokesSolution};
use rayon::prelude::*;
use serde::Serialize;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum Quantity {
    U,
    GradU,
    Hessian,
    Dt,
    GradPi,
    Forcing,
    Other,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum Domain {
    /// Truncated half-space, trapezoid rule vertically.
    Half,
    /// Doubled periodic box.
    Whole,
}

/// Samples of a (possibly vector- or tensor-valued) quantity on a time grid.
#[derive(Clone, Debug)]
pub struct TimeSeriesField {
    pub times: Vec<f64>,
    pub quantity: Quantity,
    domain: Domain,
    grid: SpectralGrid,
    /// `frames[i][c]` holds the samples of component `c` at `times[i]`.
    frames: Vec<Vec<Vec<f64>>>,
}

fn check_times(times: &[f64], n: usize) -> Result<()> {
    if times.len() != n || n == 0 {
        return Err(Error::Shape { expected: times.len(), got: n });
    }
    if times.windows(2).any(|w| !(w[1] > w[0])) {
        return Err(Error::InvalidArgument("times must be strictly increasing".into()));
    }
    if times[0] < 0.0 {
        return Err(Error::InvalidArgument("times must be nonnegative".into()));
    }
    Ok(())
}

impl TimeSeriesField {
    pub fn from_half(times: Vec<f64>, frames: &[Vec<SpectralField>], quantity: Quantity) -> Result<Self> {
        check_times(&times, frames.len())?;
        let grid = *frames[0][0].grid();
        if frames.iter().flatten().any(|f| *f.grid() != grid) {
            return Err(Error::GridMismatch);
        }
        let frames = frames.par_iter().map(|fs| fs.iter().map(|f| f.samples()).collect()).collect();
        Ok(TimeSeriesField { times, quantity, domain: Domain::Half, grid, frames })
    }

    pub fn from_vector(times: Vec<f64>, frames: &[VectorField], quantity: Quantity) -> Result<Self> {
        let comps: Vec<Vec<SpectralField>> = frames.iter().map(|v| v.comps.clone()).collect();
        Self::from_half(times, &comps, quantity)
    }

    pub fn from_whole(times: Vec<f64>, frames: &[Vec<WholeField>], quantity: Quantity) -> Result<Self> {
        check_times(&times, frames.len())?;
        let grid = *frames[0][0].grid();
        if frames.iter().flatten().any(|f| *f.grid() != grid) {
            return Err(Error::GridMismatch);
        }
        let frames = frames.par_iter().map(|fs| fs.iter().map(|f| f.samples()).collect()).collect();
        Ok(TimeSeriesField { times, quantity, domain: Domain::Whole, grid, frames })
    }

    pub fn grid(&self) -> &SpectralGrid {
        &self.grid
    }
    pub fn domain(&self) -> Domain {
        self.domain
    }

    /// `||z(t_i)||_{L^p}` of the pointwise Euclidean norm, per sample.
    pub fn spatial_norms(&self, p: f64) -> Vec<f64> {
        let g = self.grid;
        self.frames
            .par_iter()
            .map(|comps| match self.domain {
                Domain::Half => lp_half_vec(&g, comps, p),
                Domain::Whole => {
                    let n = comps[0].len();
                    let mag: Vec<f64> =
                        (0..n).map(|i| comps.iter().map(|c| c[i] * c[i]).sum::<f64>().sqrt()).collect();
                    lp_periodic(&mag, g.dx().powi(g.d as i32 - 1) * g.dz(), p)
                }
            })
            .collect()
    }
}

/// `|| t^alpha N ||_{L^r(t_0, T)}` for samples `N(t_i)`.
///
/// `N^r` is interpolated linearly on each cell and multiplied by the exact weight `t^{alpha r}`
/// (product trapezoid rule), so constant data and power weights are integrated exactly. Data
/// vanishing at `t = 0` are modelled as linear in `t` on the first cell.
/// `r = inf` takes the maximum over the nodes up to `T`.
pub fn time_lr(times: &[f64], norms: &[f64], alpha: f64, r: f64, t_end: f64) -> Result<f64> {
    check_times(times, norms.len())?;
    if t_end < times[0] || t_end > *times.last().unwrap() * (1.0 + 1e-12) {
        return Err(Error::InvalidArgument(format!("T = {t_end} outside the time grid")));
    }
    if r.is_infinite() {
        let mut m = 0.0f64;
        for (&t, &n) in times.iter().zip(norms) {
            if t > t_end * (1.0 + 1e-12) {
                break;
            }
            if n != 0.0 {
                m = m.max(t.powf(alpha) * n);
            }
        }
        return Ok(m);
    }
    if !(r >= 1.0) {
        return Err(Error::InvalidArgument(format!("time exponent must be at least 1, got {r}")));
    }
    let k = alpha * r;
    // data vanishing at t = 0 are taken to vanish linearly on the first cell
    let vanishing_start = times[0] == 0.0 && norms[0] == 0.0;
    if (vanishing_start && k + r <= -1.0) || (!vanishing_start && k <= -1.0) {
        return Err(Error::InvalidArgument(format!("weight t^{alpha} is not r-integrable at 0")));
    }
    let moments = |a: f64, b: f64| -> (f64, f64) {
        // int_a^b t^k (b - t) dt and int_a^b t^k (t - a) dt
        if k == 0.0 {
            let h = b - a;
            (0.5 * h * h, 0.5 * h * h)
        } else {
            let m0 = (b.powf(k + 1.0) - a.powf(k + 1.0)) / (k + 1.0);
            let m1 = (b.powf(k + 2.0) - a.powf(k + 2.0)) / (k + 2.0);
            (b * m0 - m1, m1 - a * m0)
        }
    };
    let mut acc = 0.0;
    for i in 0..times.len() - 1 {
        let (a, mut b) = (times[i], times[i + 1]);
        if a >= t_end {
            break;
        }
        let ga = norms[i].powf(r);
        let mut gb = norms[i + 1].powf(r);
        if b > t_end {
            gb = ga + (gb - ga) * (t_end - a) / (b - a);
            b = t_end;
        }
        if i == 0 && vanishing_start {
            // int_0^b t^k (N_b t / b)^r dt
            acc += norms[1].powf(r) * (b / times[1]).powf(r) * b.powf(k + 1.0) / (k + r + 1.0);
            continue;
        }
        let (wa, wb) = moments(a, b);
        acc += (ga * wa + gb * wb) / (b - a);
    }
    Ok(acc.powf(1.0 / r))
}

/// `|| z ||_{L^r(0, T; L^p)}`.
pub fn mixed_norm(z: &TimeSeriesField, r: f64, p: f64, t_end: f64) -> Result<f64> {
    time_lr(&z.times, &z.spatial_norms(p), 0.0, r, t_end)
}

/// `|| t^alpha z ||_{L^r(0, T; L^p)}`.
pub fn weighted_mixed_norm(z: &TimeSeriesField, alpha: f64, r: f64, p: f64, t_end: f64) -> Result<f64> {
    if alpha < 0.0 {
        return Err(Error::InvalidArgument(format!("weight exponent must be nonnegative, got {alpha}")));
    }
    time_lr(&z.times, &z.spatial_norms(p), alpha, r, t_end)
}

// ---------------------------------------------------------------------------
// Ledger and the solution-space norm
// ---------------------------------------------------------------------------

#[derive(Clone, Debug, Serialize)]
#[serde(tag = "kind")]
pub enum NormSpec {
    LrLp { r: f64, p: f64 },
    LinfBesov { s: f64, p: f64, r: f64 },
    WeightedLrLp { alpha: f64, r: f64, p: f64 },
    Xpr { p: f64, r: f64 },
}

#[derive(Clone, Debug, Serialize)]
pub struct NormRow {
    pub quantity: String,
    pub spec: NormSpec,
    pub value: f64,
    pub t: f64,
}

#[derive(Clone, Debug, Default, Serialize)]
pub struct NormLedger {
    pub rows: Vec<NormRow>,
}

impl NormLedger {
    pub fn push(&mut self, quantity: impl Into<String>, spec: NormSpec, value: f64, t: f64) {
        debug_assert!(value >= 0.0);
        self.rows.push(NormRow { quantity: quantity.into(), spec, value, t });
    }
    pub fn find(&self, quantity: &str) -> Option<&NormRow> {
        self.rows.iter().find(|r| r.quantity == quantity)
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct XprReport {
    /// `mu^{1-1/r} sup_t ||u||_{B^{2-2/r}_{p,r}}`.
    pub besov_part: f64,
    /// `||(d_t u, mu grad^2 u)||_{L^r_T L^p}`.
    pub evolution_part: f64,
    /// `||grad Pi||_{L^r_T L^p}`.
    pub pressure_part: f64,
    pub total: f64,
}

impl XprReport {
    pub fn record(&self, ledger: &mut NormLedger, p: f64, r: f64, t: f64) {
        let s = 2.0 - 2.0 / r;
        ledger.push("u", NormSpec::LinfBesov { s, p, r }, self.besov_part, t);
        ledger.push("(dt u, mu grad^2 u)", NormSpec::LrLp { r, p }, self.evolution_part, t);
        ledger.push("grad pi", NormSpec::LrLp { r, p }, self.pressure_part, t);
        ledger.push("(u, grad pi)", NormSpec::Xpr { p, r }, self.total, t);
    }
}

/// All second derivatives of a half-space field.
pub fn hessian_half(f: &SpectralField) -> Vec<SpectralField> {
    let d = f.grid().d;
    let mut first: Vec<SpectralField> = (0..d - 1).map(|j| f.d_h(j)).collect();
    first.push(f.d_z());
    let mut out = Vec::with_capacity(d * d);
    for a in 0..d {
        for b in 0..d {
            out.push(if b < d - 1 { first[a].d_h(b) } else if a == d - 1 { f.d_zz() } else { first[a].d_z() });
        }
    }
    out
}

/// The solution-space norm on `[0, T]`; the Besov part uses the antisymmetric extension of `u`.
pub fn xpr_norm(sol: &StokesSolution, p: f64, r: f64, t_end: f64) -> Result<XprReport> {
    if sol.times.len() < 3 {
        return Err(Error::InvalidArgument("at least three samples are needed for time derivatives".into()));
    }
    let mu = sol.mu;
    let idx = BesovIndex::new(2.0 - 2.0 / r, p, r)?;
    let n_used = sol.times.iter().take_while(|&&t| t <= t_end * (1.0 + 1e-12)).count();
    let besov = (0..n_used)
        .into_par_iter()
        .map(|i| {
            let ext: Vec<WholeField> = sol.u[i].comps.iter().map(|c| c.extend(ExtMode::Antisym)).collect();
            besov_norm_vec(&ext, idx)
        })
        .reduce(|| 0.0, f64::max);
    let evo: Vec<Vec<SpectralField>> = (0..sol.times.len())
        .into_par_iter()
        .map(|i| {
            let mut comps = time_derivative_vec(&sol.times, &sol.u, i).comps;
            for c in &sol.u[i].comps {
                comps.extend(hessian_half(c).into_iter().map(|h| h.scale(mu)));
            }
            comps
        })
        .collect();
    let evo = TimeSeriesField::from_half(sol.times.clone(), &evo, Quantity::Other)?;
    let gp = TimeSeriesField::from_vector(sol.times.clone(), &sol.grad_pi, Quantity::GradPi)?;
    let besov_part = mu.powf(1.0 - 1.0 / r) * besov;
    let evolution_part = mixed_norm(&evo, r, p, t_end)?;
    let pressure_part = mixed_norm(&gp, r, p, t_end)?;
    Ok(XprReport { besov_part, evolution_part, pressure_part, total: besov_part + evolution_part + pressure_part })
}

// ---------------------------------------------------------------------------
// Duhamel operators
// ---------------------------------------------------------------------------

/// `v(t_i) = int_0^{t_i} e^{mu (t_i - tau) Delta} f(tau) dtau`, exact per Fourier mode for `f`
/// linear in time between samples. Requires `times[0] = 0`.
pub fn duhamel(times: &[f64], f: &[WholeField], mu: f64) -> Result<Vec<WholeField>> {
    check_times(times, f.len())?;
    if times[0] != 0.0 {
        return Err(Error::InvalidArgument("the time grid must start at 0".into()));
    }
    if !(mu > 0.0) {
        return Err(Error::InvalidArgument("viscosity must be positive".into()));
    }
    let s: Vec<f64> = times.iter().map(|t| mu * t).collect();
    let init = WholeField::zeros(*f[0].grid(), f[0].parity());
    Ok(heat_duhamel(&s, &init, f).into_iter().map(|v| v.scale(1.0 / mu)).collect())
}

fn lp_conj(r: f64) -> f64 {
    if r.is_infinite() {
        1.0
    } else {
        r / (r - 1.0)
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct MaxRegReport {
    pub ratio: f64,
    pub lhs: f64,
    pub rhs: f64,
    pub alpha: f64,
    pub r: f64,
    pub p: f64,
    pub mu: f64,
    pub t: f64,
}

/// `mu ||t^alpha A f||_{L^r_T L^p} / ||t^alpha f||_{L^r_T L^p}` with `A f = grad^2 v` the
/// Hessian of the Duhamel integral. `alpha = None` is the unweighted operator.
pub fn maxreg_ratio(
    times: &[f64],
    f: &[WholeField],
    mu: f64,
    r: f64,
    p: f64,
    t_end: f64,
    alpha: Option<f64>,
) -> Result<MaxRegReport> {
    if !(r > 1.0 && r.is_finite() && p > 1.0 && p.is_finite()) {
        return Err(Error::InvalidArgument(format!("maximal regularity needs 1 < p, r < inf, got p = {p}, r = {r}")));
    }
    let a = alpha.unwrap_or(0.0);
    if a < 0.0 || a * lp_conj(r) >= 1.0 {
        return Err(Error::Exponent { relation: "weighted maximal regularity", detail: format!("need 0 <= alpha < 1 - 1/r, got alpha = {a}") });
    }
    let v = duhamel(times, f, mu)?;
    let hess: Vec<Vec<WholeField>> = v.par_iter().map(|w| w.hessian()).collect();
    let lhs_series = TimeSeriesField::from_whole(times.to_vec(), &hess, Quantity::Hessian)?;
    let rhs_series = TimeSeriesField::from_whole(times.to_vec(), &f.iter().map(|x| vec![x.clone()]).collect::<Vec<_>>(), Quantity::Forcing)?;
    let lhs = mu * time_lr(times, &lhs_series.spatial_norms(p), a, r, t_end)?;
    let rhs = time_lr(times, &rhs_series.spatial_norms(p), a, r, t_end)?;
    let ratio = if rhs == 0.0 { 0.0 } else { lhs / rhs };
    Ok(MaxRegReport { ratio, lhs, rhs, alpha: a, r, p, mu, t: t_end })
}

// ---------------------------------------------------------------------------
// Smoothing and decay lemmas
// ---------------------------------------------------------------------------

#[derive(Clone, Debug, Serialize)]
pub struct SmoothingReport {
    pub check: String,
    /// Exponents set by the relations, e.g. `beta`.
    pub exponents: Vec<(String, f64)>,
    pub lhs: f64,
    pub rhs: f64,
    /// `LHS / RHS`, made dimensionless in `mu`.
    pub ratio: f64,
    /// Per-time ratios (heat decay checks) or the weighted integrand profile (free decay).
    pub series: Vec<(f64, f64)>,
    /// Largest ratio in each decade of `t` (heat decay checks).
    pub decade_max: Vec<(i32, f64)>,
    /// Whether the free-decay integrand has exactly one interior maximum in `log t`.
    pub unimodal: Option<bool>,
}

fn decade_max(series: &[(f64, f64)]) -> Vec<(i32, f64)> {
    let mut out: Vec<(i32, f64)> = Vec::new();
    for &(t, v) in series {
        let k = t.log10().floor() as i32;
        match out.last_mut() {
            Some(last) if last.0 == k => last.1 = last.1.max(v),
            _ => out.push((k, v)),
        }
    }
    out
}

/// `(mu t)^delta ||D^m e^{mu t Delta} f||_{L^q} / ||f||_{L^p}` at each `t`, with
/// `delta = d/2 (1/p - 1/q) + m/2` and `m = 0` (heat decay) or `m = 1` (gradient decay).
pub fn lplq_check(f: &WholeField, p: f64, q: f64, mu: f64, times: &[f64], gradient: bool) -> Result<SmoothingReport> {
    if !(p >= 1.0 && p <= q && q.is_finite()) {
        return Err(Error::Exponent { relation: if gradient { "gradient decay" } else { "heat decay" }, detail: format!("need 1 <= p <= q < inf, got p = {p}, q = {q}") });
    }
    if times.iter().any(|&t| !(t > 0.0)) || !(mu > 0.0) {
        return Err(Error::InvalidArgument("times and viscosity must be positive".into()));
    }
    let d = f.grid().d as f64;
    let m = if gradient { 1.0 } else { 0.0 };
    let delta = d / 2.0 * (1.0 / p - 1.0 / q) + m / 2.0;
    let rhs = lp_whole_vec(std::slice::from_ref(f), p);
    let base = if gradient { f.gradient() } else { vec![f.clone()] };
    let series: Vec<(f64, f64)> = times
        .par_iter()
        .map(|&t| {
            let ev: Vec<WholeField> = base.iter().map(|b| b.heat(mu, t)).collect();
            let v = if rhs == 0.0 { 0.0 } else { (mu * t).powf(delta) * lp_whole_vec(&ev, q) / rhs };
            (t, v)
        })
        .collect();
    let ratio = series.iter().map(|s| s.1).fold(0.0, f64::max);
    Ok(SmoothingReport {
        check: if gradient { "gradient decay".into() } else { "heat decay".into() },
        exponents: vec![("delta".into(), delta)],
        lhs: ratio * rhs,
        rhs,
        ratio,
        decade_max: decade_max(&series),
        series,
        unimodal: None,
    })
}

/// Which Duhamel operator: `B f = grad v` or `C f = v`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum DuhamelOp {
    B,
    C,
}

/// Exponents of a Duhamel-operator estimate.
#[derive(Clone, Copy, Debug, Serialize)]
pub struct DuhamelExponents {
    pub p: f64,
    pub q: f64,
    pub r: f64,
    /// Output time exponent; `r` for variant 1, `inf` for variant 2, any `s >= r` for variant 3.
    pub s: f64,
    pub alpha: f64,
    pub variant: u8,
}

/// Check the hypotheses of the `B`/`C` estimates and return the output weight (`beta` or
/// `gamma`) set by the relation.
pub fn duhamel_weight(op: DuhamelOp, e: &DuhamelExponents, d: usize) -> Result<f64> {
    let name = |v: u8| -> &'static str {
        match (op, v) {
            (DuhamelOp::B, 1) => "B1",
            (DuhamelOp::B, 2) => "B2",
            (DuhamelOp::B, _) => "B3",
            (DuhamelOp::C, 1) => "C1",
            (DuhamelOp::C, 2) => "C2",
            (DuhamelOp::C, _) => "C3",
        }
    };
    let rel = name(e.variant);
    let fail = |detail: String| Err(Error::Exponent { relation: rel, detail });
    if !(e.p > 1.0 && e.q.is_finite() && e.r > 1.0 && e.r.is_finite()) {
        return fail(format!("need 1 < p, q, r < inf, got p = {}, q = {}, r = {}", e.p, e.q, e.r));
    }
    if e.p > e.q {
        return fail(format!("need p <= q, got p = {}, q = {}", e.p, e.q));
    }
    if e.alpha * lp_conj(e.r) >= 1.0 {
        return fail(format!("need alpha r' < 1, got {}", e.alpha * lp_conj(e.r)));
    }
    let d = d as f64;
    let gap = d / e.p - d / e.q;
    let order = if op == DuhamelOp::B { 1.0 } else { 2.0 };
    let delta = d / 2.0 * (1.0 / e.p - 1.0 / e.q);
    let shift = if op == DuhamelOp::B { 0.5 } else { 1.0 };
    match e.variant {
        1 => {
            if e.s != e.r {
                return fail(format!("variant 1 measures the output in L^r, got s = {}", e.s));
            }
            if gap > order {
                return fail(format!("need d/p - d/q <= {order}, got {gap}"));
            }
            Ok(e.alpha + delta - shift)
        }
        2 => {
            if !e.s.is_infinite() {
                return fail(format!("variant 2 measures the output in L^inf, got s = {}", e.s));
            }
            if gap >= order - 2.0 / e.r {
                return fail(format!("need d/p - d/q < {} - 2/r, got {gap}", order));
            }
            Ok(e.alpha + delta - shift + 1.0 / e.r)
        }
        3 => {
            if !(e.s >= e.r) {
                return fail(format!("need s >= r, got s = {}", e.s));
            }
            let inv_s = if e.s.is_infinite() { 0.0 } else { 1.0 / e.s };
            if gap >= order - 2.0 / e.r + 2.0 * inv_s {
                return fail(format!("need d/p - d/q < {order} - 2/r + 2/s, got {gap}"));
            }
            Ok(e.alpha + delta - shift + 1.0 / e.r - inv_s)
        }
        v => Err(Error::InvalidArgument(format!("unknown variant {v}"))),
    }
}

/// Both sides of a `B` or `C` estimate on forcing samples `f(t_i)` (`times[0] = 0`):
/// `||t^w K f||_{L^s_T L^q}` against `||t^alpha f||_{L^r_T L^p}`.
pub fn duhamel_check(op: DuhamelOp, e: &DuhamelExponents, times: &[f64], f: &[WholeField], mu: f64, t_end: f64) -> Result<SmoothingReport> {
    let d = f[0].grid().d;
    let w = duhamel_weight(op, e, d)?;
    let v = duhamel(times, f, mu)?;
    let out: Vec<Vec<WholeField>> = v.par_iter().map(|x| if op == DuhamelOp::B { x.gradient() } else { vec![x.clone()] }).collect();
    let out = TimeSeriesField::from_whole(times.to_vec(), &out, Quantity::Other)?;
    let inp = TimeSeriesField::from_whole(times.to_vec(), &f.iter().map(|x| vec![x.clone()]).collect::<Vec<_>>(), Quantity::Forcing)?;
    let out_norms = out.spatial_norms(e.q);
    let lhs = time_lr(times, &out_norms, w, e.s, t_end)?;
    let rhs = time_lr(times, &inp.spatial_norms(e.p), e.alpha, e.r, t_end)?;
    let inv_s = if e.s.is_infinite() { 0.0 } else { 1.0 / e.s };
    let scale = mu.powf(1.0 + w + inv_s - e.alpha - 1.0 / e.r);
    let ratio = if rhs == 0.0 { 0.0 } else { scale * lhs / rhs };
    let wname = if op == DuhamelOp::B { "beta" } else { "gamma" };
    let series: Vec<(f64, f64)> = times.iter().zip(&out_norms).map(|(&t, &n)| (t, if n == 0.0 { 0.0 } else { t.powf(w) * n })).collect();
    Ok(SmoothingReport {
        check: format!("{:?}{}", op, e.variant),
        exponents: vec![("alpha".into(), e.alpha), (wname.into(), w)],
        lhs,
        rhs,
        ratio,
        decade_max: vec![],
        series,
        unimodal: None,
    })
}

/// Which free-decay estimate: Hessian, gradient or the field itself.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum FreeDecay {
    D1,
    D2,
    D3,
}

impl FreeDecay {
    /// Derivative order and time weight for regularity `s` and time exponent `r`.
    pub fn exponents(self, s: f64, r: f64) -> Result<(usize, f64)> {
        let inv_r = if r.is_infinite() { 0.0 } else { 1.0 / r };
        let (m, bound, w) = match self {
            FreeDecay::D1 => (2, 2.0, 1.0 - s / 2.0 - inv_r),
            FreeDecay::D2 => (1, 1.0, 0.5 - s / 2.0 - inv_r),
            FreeDecay::D3 => (0, 0.0, -s / 2.0 - inv_r),
        };
        if !(s < bound) {
            return Err(Error::Exponent { relation: self.name(), detail: format!("need s < {bound}, got s = {s}") });
        }
        Ok((m, w))
    }
    pub fn name(self) -> &'static str {
        match self {
            FreeDecay::D1 => "D1",
            FreeDecay::D2 => "D2",
            FreeDecay::D3 => "D3",
        }
    }
}

fn interior_maxima(vals: &[f64]) -> usize {
    let peak = vals.iter().cloned().fold(0.0, f64::max);
    // ignore ripples at round-off level
    let tol = 1e-12 * peak;
    let mut count = 0;
    let mut rising = true;
    for w in vals.windows(2) {
        if w[1] > w[0] + tol {
            rising = true;
        } else if w[1] < w[0] - tol {
            if rising {
                count += 1;
            }
            rising = false;
        }
    }
    count
}

/// `mu^{w + 1/r} ||t^w D^m e^{mu t Delta} u0||_{L^r(R_+; L^p)} / ||u0||_{B^s_{p,r}}`.
pub fn free_decay_check(which: FreeDecay, u0: &WholeField, s: f64, p: f64, r: f64, mu: f64, quad: TimeQuadrature) -> Result<SmoothingReport> {
    let (m, w) = which.exponents(s, r)?;
    let idx = BesovIndex::new(s, p, r)?;
    let inv_r = if r.is_infinite() { 0.0 } else { 1.0 / r };
    let rep = semigroup_norm(u0, m, w + inv_r, p, r, mu, quad)?;
    let lhs = rep.value * mu.powf(w + inv_r);
    let rhs = besov_norm(u0, idx);
    let (ts, vals) = rep.profile;
    let interior = interior_maxima(&vals);
    let peak = vals.iter().cloned().fold(0.0, f64::max);
    let edges_low = vals.len() > 2 && vals[0] < peak && vals[vals.len() - 1] < peak;
    Ok(SmoothingReport {
        check: which.name().into(),
        exponents: vec![("weight".into(), w)],
        lhs,
        rhs,
        ratio: if rhs == 0.0 { 0.0 } else { lhs / rhs },
        decade_max: vec![],
        series: ts.into_iter().zip(vals).collect(),
        unimodal: Some(interior == 1 && edges_low),
    })
}

// ---------------------------------------------------------------------------
// Interpolation inequalities
// ---------------------------------------------------------------------------

#[derive(Clone, Copy, Debug, Serialize)]
pub enum GnInequality {
    /// `||grad z||_{L^m} <= C ||z||_{B^{2-2/r}_{p,r}}^{1-theta} ||grad^2 z||_{L^p}^theta` on the
    /// whole space, applied to the antisymmetric extension.
    Whole { m: f64, p: f64, theta: f64, r: f64 },
    /// `||z||_{L^inf_+} <= C ||z||_{B^{2-2/r}_{p,r}}^theta ||grad^2 z||_{L^p_+}^{1-theta}`,
    /// `theta = (p - d/2) r / p`.
    HalfSup { p: f64, r: f64 },
    /// `||grad z||_{L^inf_+} <= C ||grad^2 z||_{L^p_+}^theta ||z||_{L^{p3}_+}^{1-theta}` with
    /// `1/p3 = 1/p - 1/p2` and `theta = (1 + d/p - d/p2) / (2 - d/p2)`.
    HalfGrad { p: f64, p2: f64 },
}

impl GnInequality {
    /// Validate the exponent relations; returns `theta`.
    pub fn theta(&self, d: usize) -> Result<f64> {
        let d = d as f64;
        match *self {
            GnInequality::Whole { m, p, theta, r } => {
                let fail = |detail: String| Err(Error::Exponent { relation: "GN", detail });
                if !(theta > 0.0 && theta <= 1.0) {
                    return fail(format!("need theta in (0, 1], got {theta}"));
                }
                if !(p >= 1.0 && r >= 1.0 && m >= p) {
                    return fail(format!("need m >= p >= 1 and r >= 1, got m = {m}, p = {p}, r = {r}"));
                }
                let inv_r = if r.is_infinite() { 0.0 } else { 1.0 / r };
                let e = 1.0 - 2.0 * inv_r + 2.0 * theta * inv_r;
                if !(e >= -1e-12 && e <= d / p + 1e-12) {
                    return fail(format!("need 0 <= 1 - 2/r + 2 theta/r <= d/p, got {e}"));
                }
                let inv_m = if m.is_infinite() { 0.0 } else { 1.0 / m };
                let want = d / p - 1.0 + 2.0 * inv_r - 2.0 * theta * inv_r;
                if (d * inv_m - want).abs() > 1e-10 {
                    return fail(format!("need d/m = d/p - 1 + 2/r - 2 theta/r = {want}, got d/m = {}", d * inv_m));
                }
                Ok(theta)
            }
            GnInequality::HalfSup { p, r } => {
                let theta = (p - d / 2.0) * r / p;
                if !(theta > 0.0 && theta <= 1.0) {
                    return Err(Error::Exponent { relation: "GN2", detail: format!("need theta = (p - d/2) r/p in (0, 1], got {theta}") });
                }
                Ok(theta)
            }
            GnInequality::HalfGrad { p, p2 } => {
                let fail = |detail: String| Err(Error::Exponent { relation: "GN3", detail });
                if !(p > d) {
                    return fail(format!("need p > d, got {p}"));
                }
                if !(p2 > p) {
                    return fail(format!("need p2 > p so that 1/p3 = 1/p - 1/p2 > 0, got p2 = {p2}"));
                }
                let theta = (1.0 + d / p - d / p2) / (2.0 - d / p2);
                if !(theta > 0.0 && theta <= 1.0) {
                    return fail(format!("need theta in (0, 1], got {theta}"));
                }
                Ok(theta)
            }
        }
    }
}

/// `LHS / RHS` of an interpolation inequality with `C = 1`. `z` must have zero trace.
pub fn gn_ratio(z: &SpectralField, ineq: GnInequality) -> Result<f64> {
    let g = *z.grid();
    let theta = ineq.theta(g.d)?;
    let w = z.extend_quiet(ExtMode::Antisym);
    let sup = lp_whole_vec(std::slice::from_ref(&w), f64::INFINITY);
    if sup == 0.0 {
        return Ok(0.0);
    }
    let tr = z.trace().max_abs();
    if tr > 1e-8 * sup {
        return Err(Error::InvalidArgument(format!("interpolation inequalities need zero trace, got {tr:e}")));
    }
    // |D^k e_a z| is even in x_d, so half-space norms are whole-box norms times 2^{-1/p}
    let half = |v: f64, p: f64| if p.is_infinite() { v } else { v * 0.5f64.powf(1.0 / p) };
    let (lhs, rhs) = match ineq {
        GnInequality::Whole { m, p, r, .. } => {
            let lhs = lp_whole_vec(&w.gradient(), m);
            let b = besov_norm(&w, BesovIndex::new(2.0 - 2.0 / r, p, r)?);
            (lhs, b.powf(1.0 - theta) * lp_whole_vec(&w.hessian(), p).powf(theta))
        }
        GnInequality::HalfSup { p, r } => {
            let b = besov_norm(&w, BesovIndex::new(2.0 - 2.0 / r, p, r)?);
            (sup, b.powf(theta) * half(lp_whole_vec(&w.hessian(), p), p).powf(1.0 - theta))
        }
        GnInequality::HalfGrad { p, p2 } => {
            let p3 = 1.0 / (1.0 / p - 1.0 / p2);
            let lhs = lp_whole_vec(&w.gradient(), f64::INFINITY);
            let a = half(lp_whole_vec(&w.hessian(), p), p);
            let b = half(lp_whole_vec(std::slice::from_ref(&w), p3), p3);
            (lhs, a.powf(theta) * b.powf(1.0 - theta))
        }
    };
    Ok(if rhs == 0.0 { 0.0 } else { lhs / rhs })
}
