//! Homogeneous Littlewood–Paley decomposition, Besov norms and the heat-semigroup
//! characterization of negative-regularity Besov norms.

use crate::error::{Error, Result};
use crate::field::{ExtMode, SpectralField, WholeField};
use crate::grid::SpectralGrid;
use crate::quadrature::lp_whole_vec;
use log::warn;
use num_complex::Complex64 as C64;
use rayon::prelude::*;
use serde::Serialize;
use sha2::{Digest, Sha256};
use std::sync::OnceLock;

/// Relative spectral mass outside the band range above which a warning is logged.
pub const LEAKAGE_TOL: f64 = 1e-10;

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct BesovIndex {
    pub s: f64,
    pub p: f64,
    pub r: f64,
}

impl BesovIndex {
    pub fn new(s: f64, p: f64, r: f64) -> Result<Self> {
        if !(p >= 1.0) || !(r >= 1.0) || !s.is_finite() {
            return Err(Error::InvalidArgument(format!("Besov index needs p, r in [1, inf] and finite s, got ({s}, {p}, {r})")));
        }
        Ok(BesovIndex { s, p, r })
    }

    /// Critical index `s = -1 + d/p` for the velocity.
    pub fn critical(d: usize, p: f64, r: f64) -> Result<Self> {
        Self::new(-1.0 + d as f64 / p, p, r)
    }
}

fn psi(x: f64) -> f64 {
    if x <= 0.0 {
        0.0
    } else {
        (-1.0 / x).exp()
    }
}

/// Smooth radial cutoff: 1 on `[0, 1/2]`, 0 on `[1, inf)`, built from `exp(-1/x)`.
pub fn chi(rho: f64) -> f64 {
    if rho <= 0.5 {
        1.0
    } else if rho >= 1.0 {
        0.0
    } else {
        let t = 2.0 - 2.0 * rho;
        psi(t) / (psi(t) + psi(1.0 - t))
    }
}

/// Annulus profile `phi(rho) = chi(rho/2) - chi(rho)`, supported in `[1/2, 2]`.
pub fn phi(rho: f64) -> f64 {
    chi(0.5 * rho) - chi(rho)
}

/// SHA-256 of the cutoff sampled at 4097 equispaced points of `[0, 1]` (little-endian f64).
pub fn profile_hash() -> &'static str {
    static HASH: OnceLock<String> = OnceLock::new();
    HASH.get_or_init(|| {
        let mut h = Sha256::new();
        for i in 0..=4096 {
            h.update(chi(i as f64 / 4096.0).to_le_bytes());
        }
        h.finalize().iter().map(|b| format!("{b:02x}")).collect()
    })
}

/// Dyadic band range covering every nonzero frequency of a grid.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub struct LpBands {
    pub k_min: i32,
    pub k_max: i32,
}

impl LpBands {
    pub fn for_grid(grid: &SpectralGrid) -> Self {
        let (lo, hi) = frequency_span(grid);
        LpBands { k_min: lo.log2().floor() as i32, k_max: hi.log2().ceil() as i32 }
    }
    pub fn contains(&self, k: i32) -> bool {
        (self.k_min..=self.k_max).contains(&k)
    }
    pub fn iter(&self) -> impl Iterator<Item = i32> {
        self.k_min..=self.k_max
    }
    /// Drop the top band.
    pub fn without_top(&self) -> Self {
        LpBands { k_min: self.k_min, k_max: self.k_max - 1 }
    }
}

/// Smallest nonzero and largest `|xi|` on the doubled box.
fn frequency_span(grid: &SpectralGrid) -> (f64, f64) {
    let kh = 2.0 * std::f64::consts::PI / grid.l_h;
    let kz = std::f64::consts::PI / grid.l_z;
    let lo = if grid.d > 1 { kh.min(kz) } else { kz };
    let hmax = kh * (grid.n_h / 2) as f64;
    let zmax = kz * grid.n_z as f64;
    let hi = ((grid.d - 1) as f64 * hmax * hmax + zmax * zmax).sqrt();
    (lo, hi)
}

fn radial(grid: &SpectralGrid) -> impl Fn(&crate::field::Mode, usize) -> f64 + Sync + '_ {
    move |mode, m| {
        let xz = grid.xi_z(m);
        (mode.kappa * mode.kappa + xz * xz).sqrt()
    }
}

/// `Delta_k F = phi(2^{-k} D) F`. Bands outside the grid's range give zero with a warning.
pub fn lp_block(f: &WholeField, k: i32) -> WholeField {
    let g = *f.grid();
    if !LpBands::for_grid(&g).contains(k) {
        warn!("band {k} is outside the representable range; returning zero");
        return WholeField::zeros(g, f.parity());
    }
    let scale = (-(k as f64)).exp2();
    let rad = radial(&g);
    f.map_symbol(f.parity(), move |mode, m| C64::new(phi(scale * rad(mode, m)), 0.0))
}

/// `L^2` mass fraction not captured by the sum of the given bands (includes the zero mode).
pub fn leakage(f: &WholeField, bands: LpBands) -> f64 {
    let g = *f.grid();
    let rad = radial(&g);
    let total = f.energy();
    if total == 0.0 {
        return 0.0;
    }
    let miss = f.map_symbol(f.parity(), move |mode, m| {
        let x = rad(mode, m);
        let covered: f64 = bands.iter().map(|k| phi((-(k as f64)).exp2() * x)).sum();
        C64::new(1.0 - covered, 0.0)
    });
    (miss.energy() / total).sqrt()
}

#[derive(Clone, Debug, Serialize)]
pub struct BesovReport {
    pub index: (f64, f64, f64),
    pub value: f64,
    pub leakage: f64,
    pub bands_used: (i32, i32),
    /// `2^{sk} ||Delta_k F||_p` per band.
    pub band_norms: Vec<(i32, f64)>,
    pub profile: String,
}

fn lr_sum(vals: impl Iterator<Item = f64>, r: f64) -> f64 {
    if r.is_infinite() {
        vals.fold(0.0, f64::max)
    } else {
        vals.map(|v| v.powf(r)).sum::<f64>().powf(1.0 / r)
    }
}

/// `|| 2^{sk} ||Delta_k F||_{L^p} ||_{l^r}` over the grid's band range.
pub fn besov_norm(f: &WholeField, idx: BesovIndex) -> f64 {
    besov_report(f, idx, LpBands::for_grid(f.grid())).value
}

/// Besov norm over an explicit band range, with leakage diagnostics.
pub fn besov_report(f: &WholeField, idx: BesovIndex, bands: LpBands) -> BesovReport {
    besov_report_vec(std::slice::from_ref(f), idx, bands)
}

/// Vector version: band blocks measured in the pointwise Euclidean norm.
pub fn besov_norm_vec(fs: &[WholeField], idx: BesovIndex) -> f64 {
    besov_report_vec(fs, idx, LpBands::for_grid(fs[0].grid())).value
}

pub fn besov_report_vec(fs: &[WholeField], idx: BesovIndex, bands: LpBands) -> BesovReport {
    let g = *fs[0].grid();
    let full = LpBands::for_grid(&g);
    let ks: Vec<i32> = bands.iter().filter(|k| full.contains(*k)).collect();
    let band_norms: Vec<(i32, f64)> = ks
        .par_iter()
        .map(|&k| {
            let blocks: Vec<WholeField> = fs.iter().map(|f| lp_block(f, k)).collect();
            (k, (idx.s * k as f64).exp2() * lp_whole_vec(&blocks, idx.p))
        })
        .collect();
    let leak = fs.iter().map(|f| leakage(f, bands)).fold(0.0, f64::max);
    if leak > LEAKAGE_TOL {
        warn_once!("spectral leakage outside bands {}..={}: relative L2 mass {leak:.3e}", bands.k_min, bands.k_max);
    }
    BesovReport {
        index: (idx.s, idx.p, idx.r),
        value: lr_sum(band_norms.iter().map(|b| b.1), idx.r),
        leakage: leak,
        bands_used: (bands.k_min, bands.k_max),
        band_norms,
        profile: profile_hash().to_string(),
    }
}

/// Half-space norm through the antisymmetric extension (an upper bound for the infimum over
/// extensions).
pub fn halfspace_besov_norm(f: &SpectralField, idx: BesovIndex) -> f64 {
    if idx.s >= f.grid().d as f64 / idx.p {
        warn!("half-space norms are meant for s < d/p; got s = {}", idx.s);
    }
    besov_norm(&f.extend(ExtMode::Antisym), idx)
}

/// Vector version of [`halfspace_besov_norm`]: pointwise Euclidean norm of the blocks.
pub fn halfspace_besov_norm_vec(fs: &[SpectralField], idx: BesovIndex) -> f64 {
    let ext: Vec<WholeField> = fs.iter().map(|f| f.extend(ExtMode::Antisym)).collect();
    besov_norm_vec(&ext, idx)
}

/// Geometric time grid for the `dt/t` measure.
#[derive(Clone, Copy, Debug, Serialize)]
pub struct TimeQuadrature {
    pub t_min: f64,
    pub t_max: f64,
    pub per_decade: usize,
}

impl Default for TimeQuadrature {
    fn default() -> Self {
        TimeQuadrature { t_min: 1e-4, t_max: 1e2, per_decade: 64 }
    }
}

impl TimeQuadrature {
    /// Widen the default range so that `(0, t_min)` and `(t_max, inf)` are negligible for
    /// every frequency on the grid at viscosity `mu`.
    pub fn adapted(grid: &SpectralGrid, mu: f64) -> Self {
        let (lo, hi) = frequency_span(grid);
        let d = Self::default();
        TimeQuadrature {
            t_min: d.t_min.min(1e-6 / (mu * hi * hi)),
            t_max: d.t_max.max(40.0 / (mu * lo * lo)),
            per_decade: d.per_decade,
        }
    }

    pub fn nodes(&self) -> Vec<f64> {
        let decades = (self.t_max / self.t_min).log10();
        let n = (decades * self.per_decade as f64).round().max(1.0) as usize;
        (0..=n).map(|i| self.t_min * (self.t_max / self.t_min).powf(i as f64 / n as f64)).collect()
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct HeatCharReport {
    pub value: f64,
    /// Estimated relative error from `(0, t_min)` and `(t_max, inf)`.
    pub tail: f64,
    /// Sample times and integrand `t^a ||...||_p`.
    #[serde(skip)]
    pub profile: (Vec<f64>, Vec<f64>),
}

/// `|| t^{-s/2} ||e^{mu t Delta} F||_{L^p} ||_{L^r(dt/t)}` for `s < 0`.
pub fn heat_char_norm(f: &WholeField, idx: BesovIndex, mu: f64, quad: TimeQuadrature) -> Result<HeatCharReport> {
    if !(idx.s < 0.0) {
        return Err(Error::InvalidArgument(format!("heat characterization needs s < 0, got {}", idx.s)));
    }
    semigroup_norm(f, 0, -idx.s / 2.0, idx.p, idx.r, mu, quad)
}

/// `|| t^a ||D^m e^{mu t Delta} F||_{L^p} ||_{L^r(R_+, dt/t)}` with `D^m` the gradient (`m = 1`)
/// or the Hessian (`m = 2`), measured pointwise in the Euclidean/Frobenius norm. Needs `a > 0`.
///
/// The integrand is sampled on a geometric grid (trapezoid in `log t`). On `(0, t_min)` the norm
/// is frozen at its `t_min` value and `t^{ar}` is integrated exactly.
pub fn semigroup_norm(f: &WholeField, m: usize, a: f64, p: f64, r: f64, mu: f64, quad: TimeQuadrature) -> Result<HeatCharReport> {
    if !(a > 0.0) {
        return Err(Error::InvalidArgument(format!("time weight exponent must be positive, got {a}")));
    }
    if !(mu > 0.0) {
        return Err(Error::InvalidArgument("viscosity must be positive".into()));
    }
    if m > 2 {
        return Err(Error::InvalidArgument("derivative order must be 0, 1 or 2".into()));
    }
    let g = *f.grid();
    let base: Vec<WholeField> = match m {
        0 => vec![f.clone()],
        1 => f.gradient(),
        _ => f.hessian(),
    };
    let ts = quad.nodes();
    let norms: Vec<f64> = ts
        .par_iter()
        .map(|&t| {
            let ev: Vec<WholeField> = base.iter().map(|b| b.heat(mu, t)).collect();
            lp_whole_vec(&ev, p)
        })
        .collect();
    let vals: Vec<f64> = ts.iter().zip(&norms).map(|(t, n)| t.powf(a) * n).collect();
    let lo_norm = lp_whole_vec(&base, p);
    let (lo, _) = frequency_span(&g);
    if r.is_infinite() {
        let value = vals.iter().cloned().fold(0.0, f64::max);
        let edge = vals[0].max(*vals.last().unwrap());
        let tail = if value > 0.0 { edge / value } else { 0.0 };
        return Ok(HeatCharReport { value, tail, profile: (ts, vals) });
    }
    // trapezoid in log t: the dt/t weight of each cell is exactly its log length
    let mut acc = 0.0;
    for i in 0..ts.len() - 1 {
        let w = (ts[i + 1] / ts[i]).ln();
        acc += 0.5 * w * (vals[i].powf(r) + vals[i + 1].powf(r));
    }
    let head = quad.t_min.powf(a * r) / (a * r);
    acc += head * norms[0].powf(r);
    let tail_lo = head * (lo_norm.powf(r) - norms[0].powf(r)).abs();
    // large times decay at least like exp(-mu xi_min^2 t)
    let b = r * mu * lo * lo * quad.t_max - a * r;
    let tail_hi = if b > 0.0 { vals.last().unwrap().powf(r) / b } else { f64::INFINITY };
    let value = acc.powf(1.0 / r);
    let tail = if acc > 0.0 { (tail_lo + tail_hi) / acc } else { 0.0 };
    if tail > 1e-3 {
        warn!("time range [{:.1e}, {:.1e}] misses an estimated fraction {tail:.2e} of the integral", quad.t_min, quad.t_max);
    }
    Ok(HeatCharReport { value, tail, profile: (ts, vals) })
}

/// `mu^{1/r} ||e^{mu t Delta} F||_{L^r(R_+; L^p)} / ||F||_{B^{-2/r}_{p,r}}`.
pub fn semigroup_bracket(f: &WholeField, p: f64, r: f64, mu: f64, quad: TimeQuadrature) -> Result<f64> {
    let idx = BesovIndex::new(-2.0 / r, p, r)?;
    let num = heat_char_norm(f, idx, mu, quad)?.value * mu.powf(1.0 / r);
    let den = besov_norm(f, idx);
    if den == 0.0 {
        return Err(Error::InvalidArgument("zero field has no bracket".into()));
    }
    Ok(num / den)
}

/// The same samples on a box scaled by `2^{-j}`: realizes `F(2^j x)`.
pub fn dyadic_rescale(f: &WholeField, j: i32) -> Result<WholeField> {
    let g = *f.grid();
    let s = (-(j as f64)).exp2();
    let g2 = SpectralGrid::new(g.d, g.n_h, g.n_z, g.l_h * s, g.l_z * s)?;
    WholeField::from_coefficients(g2, f.parity(), f.coefficients().to_vec())
}
