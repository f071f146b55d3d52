//! Fields on the truncated half-space and on the doubled (whole-space) box.
//!
//! A [`SpectralField`] is stored as a smooth *carrier* on the doubled box whose restriction
//! gives the field, plus boundary layers `z^k e^{-|xi_h| z} B_k(xi_h)` kept in closed
//! form. Operators of the form `r m(D) e(f)` with `m` rational in `xi_d` are evaluated by
//! solving the vertical two-point problem exactly per horizontal mode, so that fields with
//! nonzero traces or normal derivatives never pass through a discontinuous extension.

use crate::error::{Error, Result};
use crate::fft;
use crate::grid::SpectralGrid;
use num_complex::Complex64 as C64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

const I: C64 = C64 { re: 0.0, im: 1.0 };
const ZERO: C64 = C64 { re: 0.0, im: 0.0 };

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Parity {
    Odd,
    Even,
    Raw,
}

impl Parity {
    pub fn flip(self) -> Self {
        match self {
            Parity::Odd => Parity::Even,
            Parity::Even => Parity::Odd,
            Parity::Raw => Parity::Raw,
        }
    }
    pub fn name(self) -> &'static str {
        match self {
            Parity::Odd => "odd",
            Parity::Even => "even",
            Parity::Raw => "raw",
        }
    }
    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "odd" => Some(Parity::Odd),
            "even" => Some(Parity::Even),
            "raw" => Some(Parity::Raw),
            _ => None,
        }
    }
}

/// Extension across the boundary plane: `e_0`, `e_a`, `e_s`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum ExtMode {
    Zero,
    Antisym,
    Sym,
}

impl ExtMode {
    pub fn parity(self) -> Parity {
        match self {
            ExtMode::Zero => Parity::Raw,
            ExtMode::Antisym => Parity::Odd,
            ExtMode::Sym => Parity::Even,
        }
    }
}

/// What happens when an inverse multiplier meets energy in a mode it annihilates.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Default)]
pub enum ZeroModePolicy {
    #[default]
    Project,
    Strict,
}

/// Horizontal mode data handed to symbol closures.
#[derive(Clone, Copy, Debug)]
pub struct Mode {
    pub h: usize,
    /// `|xi_h|` computed from the full wavenumber.
    pub kappa: f64,
    /// Wavenumbers for odd symbols (Nyquist zeroed).
    pub xi: [f64; 2],
}

impl Mode {
    pub fn new(grid: &SpectralGrid, h: usize) -> Self {
        Mode { h, kappa: grid.kappa(h), xi: grid.dxi_h(h) }
    }
    /// Symbol `i xi_j` of `d_j`, `j < d-1`.
    pub fn ixi(&self, j: usize) -> C64 {
        I * self.xi[j]
    }
    /// Symbol of `S_j = d_j |D_h|^{-1}`; zero on the annihilated mode.
    pub fn s(&self, j: usize) -> C64 {
        if self.kappa == 0.0 {
            ZERO
        } else {
            I * (self.xi[j] / self.kappa)
        }
    }
}

fn check_grid(a: &SpectralGrid, b: &SpectralGrid) -> Result<()> {
    if a == b {
        Ok(())
    } else {
        Err(Error::GridMismatch)
    }
}

// ---------------------------------------------------------------------------
// Whole-space field on the doubled box
// ---------------------------------------------------------------------------

/// Periodic field on `[0, L_h)^{d-1} x [-L_z, L_z)`, stored by Fourier coefficients.
#[derive(Clone, Debug)]
pub struct WholeField {
    grid: SpectralGrid,
    parity: Parity,
    coef: Vec<C64>,
}

impl WholeField {
    pub fn zeros(grid: SpectralGrid, parity: Parity) -> Self {
        WholeField { grid, parity, coef: vec![ZERO; grid.full_len()] }
    }

    pub fn from_coefficients(grid: SpectralGrid, parity: Parity, coef: Vec<C64>) -> Result<Self> {
        if coef.len() != grid.full_len() {
            return Err(Error::Shape { expected: grid.full_len(), got: coef.len() });
        }
        Ok(WholeField { grid, parity, coef })
    }

    /// Samples on the doubled box in FFT order along the vertical axis.
    pub fn from_samples(grid: SpectralGrid, samples: &[f64], parity: Parity) -> Result<Self> {
        if samples.len() != grid.full_len() {
            return Err(Error::Shape { expected: grid.full_len(), got: samples.len() });
        }
        Ok(WholeField { grid, parity, coef: fft::forward_real(samples, &grid.full_shape()) })
    }

    /// Samples `f(x_h, z)` with `z` in `[-L_z, L_z)`.
    pub fn from_fn(grid: SpectralGrid, parity: Parity, f: impl Fn([f64; 2], f64) -> f64) -> Self {
        let nzf = grid.nz_full();
        let mut s = vec![0.0; grid.full_len()];
        for h in 0..grid.n_hmodes() {
            let x = grid.x_h(h);
            for m in 0..nzf {
                s[h * nzf + m] = f(x, grid.z_full(m));
            }
        }
        Self::from_samples(grid, &s, parity).expect("shape is consistent by construction")
    }

    pub fn grid(&self) -> &SpectralGrid {
        &self.grid
    }
    pub fn parity(&self) -> Parity {
        self.parity
    }
    pub fn with_parity(mut self, parity: Parity) -> Self {
        self.parity = parity;
        self
    }
    pub fn coefficients(&self) -> &[C64] {
        &self.coef
    }
    pub fn samples(&self) -> Vec<f64> {
        fft::inverse_real(&self.coef, &self.grid.full_shape())
    }

    /// Multiply every coefficient by `symbol(mode, m)`.
    pub fn map_symbol(&self, parity: Parity, symbol: impl Fn(&Mode, usize) -> C64 + Sync) -> Self {
        let g = self.grid;
        let nzf = g.nz_full();
        let mut coef = self.coef.clone();
        coef.par_chunks_mut(nzf).enumerate().for_each(|(h, col)| {
            let mode = Mode::new(&g, h);
            for (m, c) in col.iter_mut().enumerate() {
                *c *= symbol(&mode, m);
            }
        });
        WholeField { grid: g, parity, coef }
    }

    /// Heat semigroup `e^{mu t Delta}`.
    pub fn heat(&self, mu: f64, t: f64) -> Self {
        let g = self.grid;
        self.map_symbol(self.parity, move |mode, m| {
            let xz = g.xi_z(m);
            C64::new((-mu * t * (mode.kappa * mode.kappa + xz * xz)).exp(), 0.0)
        })
    }

    pub fn add(&self, other: &WholeField) -> Result<Self> {
        check_grid(&self.grid, &other.grid)?;
        let parity = if self.parity == other.parity { self.parity } else { Parity::Raw };
        let coef = self.coef.iter().zip(&other.coef).map(|(a, b)| a + b).collect();
        Ok(WholeField { grid: self.grid, parity, coef })
    }
    pub fn scale(&self, s: f64) -> Self {
        WholeField { grid: self.grid, parity: self.parity, coef: self.coef.iter().map(|c| c * s).collect() }
    }
    pub fn axpy(&mut self, a: f64, x: &WholeField) -> Result<()> {
        check_grid(&self.grid, &x.grid)?;
        for (c, d) in self.coef.iter_mut().zip(&x.coef) {
            *c += d * a;
        }
        if self.parity != x.parity {
            self.parity = Parity::Raw;
        }
        Ok(())
    }

    /// Partial derivative along `axes` (horizontal axes first, the vertical axis last).
    /// Repeated axes use the full wavenumber; single ones drop the Nyquist entry.
    pub fn deriv(&self, axes: &[usize]) -> Self {
        let g = self.grid;
        let d = g.d;
        let mut count = [0usize; 3];
        for &a in axes {
            assert!(a < d, "axis {a} out of range");
            count[a] += 1;
        }
        let parity = if count[d - 1] % 2 == 1 { self.parity.flip() } else { self.parity };
        self.map_symbol(parity, move |mode, m| {
            let mut s = C64::new(1.0, 0.0);
            for (a, &c) in count.iter().enumerate().take(d) {
                if c == 0 {
                    continue;
                }
                let (full, odd) = if a == d - 1 {
                    (g.xi_z(m), g.dxi_z(m))
                } else {
                    (g.xi_h(mode.h)[a], mode.xi[a])
                };
                let x = if c % 2 == 0 { full } else { odd };
                s *= (I * x).powu(c as u32);
            }
            s
        })
    }

    /// First derivatives `[d_0, ..., d_{d-1}]`.
    pub fn gradient(&self) -> Vec<Self> {
        (0..self.grid.d).map(|a| self.deriv(&[a])).collect()
    }

    /// All second derivatives `d_a d_b` (row-major, `d^2` entries).
    pub fn hessian(&self) -> Vec<Self> {
        let d = self.grid.d;
        (0..d * d).map(|k| self.deriv(&[k / d, k % d])).collect()
    }

    /// Odd and even parts under `z -> -z`.
    pub fn split_parity(&self) -> (WholeField, WholeField) {
        let nzf = self.grid.nz_full();
        let mut odd = self.coef.clone();
        let mut even = self.coef.clone();
        for h in 0..self.grid.n_hmodes() {
            for m in 0..nzf {
                let mr = (nzf - m) % nzf;
                let a = self.coef[h * nzf + m];
                let b = self.coef[h * nzf + mr];
                odd[h * nzf + m] = (a - b) * 0.5;
                even[h * nzf + m] = (a + b) * 0.5;
            }
        }
        (
            WholeField { grid: self.grid, parity: Parity::Odd, coef: odd },
            WholeField { grid: self.grid, parity: Parity::Even, coef: even },
        )
    }

    /// Sum of squared coefficient moduli (Parseval, normalized by the box measure).
    pub fn energy(&self) -> f64 {
        self.coef.iter().map(|c| c.norm_sqr()).sum()
    }
}

// ---------------------------------------------------------------------------
// Boundary functions
// ---------------------------------------------------------------------------

/// Function on the boundary plane, stored by horizontal Fourier coefficients.
#[derive(Clone, Debug)]
pub struct BoundaryFunction {
    grid: SpectralGrid,
    coef: Vec<C64>,
}

impl BoundaryFunction {
    pub fn zeros(grid: SpectralGrid) -> Self {
        BoundaryFunction { grid, coef: vec![ZERO; grid.n_hmodes()] }
    }
    pub fn from_samples(grid: SpectralGrid, samples: &[f64]) -> Result<Self> {
        if samples.len() != grid.n_hmodes() {
            return Err(Error::Shape { expected: grid.n_hmodes(), got: samples.len() });
        }
        Ok(BoundaryFunction { grid, coef: fft::forward_real(samples, &grid.h_shape()) })
    }
    pub fn from_fn(grid: SpectralGrid, f: impl Fn([f64; 2]) -> f64) -> Self {
        let s: Vec<f64> = (0..grid.n_hmodes()).map(|h| f(grid.x_h(h))).collect();
        Self::from_samples(grid, &s).expect("shape is consistent by construction")
    }
    pub fn from_coefficients(grid: SpectralGrid, coef: Vec<C64>) -> Result<Self> {
        if coef.len() != grid.n_hmodes() {
            return Err(Error::Shape { expected: grid.n_hmodes(), got: coef.len() });
        }
        Ok(BoundaryFunction { grid, coef })
    }
    pub fn grid(&self) -> &SpectralGrid {
        &self.grid
    }
    pub fn coefficients(&self) -> &[C64] {
        &self.coef
    }
    pub fn samples(&self) -> Vec<f64> {
        fft::inverse_real(&self.coef, &self.grid.h_shape())
    }
    pub fn horizontal(&self, symbol: impl Fn(&Mode) -> C64) -> Self {
        let coef = self
            .coef
            .iter()
            .enumerate()
            .map(|(h, c)| c * symbol(&Mode::new(&self.grid, h)))
            .collect();
        BoundaryFunction { grid: self.grid, coef }
    }
    /// L2 norm over the periodic boundary plane.
    pub fn l2(&self) -> f64 {
        let e: f64 = self.coef.iter().map(|c| c.norm_sqr()).sum();
        (e * self.grid.l_h.powi(self.grid.d as i32 - 1)).sqrt()
    }
    pub fn max_abs(&self) -> f64 {
        self.samples().iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    /// Harmonic extension `F_h(Hb)(xi_h, z) = e^{-|xi_h| z} F_h b(xi_h)`.
    ///
    /// The horizontal mean has no decaying extension; it is extended as a constant and a
    /// warning is logged when it is not negligible.
    pub fn harmonic_extend(&self) -> SpectralField {
        let g = self.grid;
        let mut f = SpectralField::zeros(g);
        f.nl = 1;
        f.layers = vec![ZERO; g.n_hmodes()];
        let scale = self.coef.iter().fold(0.0f64, |m, c| m.max(c.norm()));
        for h in 0..g.n_hmodes() {
            if g.kappa(h) == 0.0 {
                let c = self.coef[h];
                if c.norm() > 1e-13 * scale.max(1e-300) {
                    log::warn!("harmonic extension: horizontal mean {:e} extended as a constant", c.norm());
                }
                f.carrier[h * g.nz_full()] = c;
            } else {
                f.layers[h] = self.coef[h];
            }
        }
        f
    }
}

// ---------------------------------------------------------------------------
// Half-space field
// ---------------------------------------------------------------------------

/// Scalar field on the truncated half-space.
#[derive(Clone, Debug)]
pub struct SpectralField {
    grid: SpectralGrid,
    parity: Parity,
    /// Doubled-box Fourier coefficients, `[h][m]`.
    carrier: Vec<C64>,
    /// Number of boundary-layer degrees stored per horizontal mode.
    nl: usize,
    /// Layer coefficients, `[h][k]` for `z^k e^{-kappa z}`.
    layers: Vec<C64>,
}

/// Values of one vertical column at the half-space nodes.
fn layer_value(layers: &[C64], kappa: f64, z: f64) -> C64 {
    let mut acc = ZERO;
    let mut zk = 1.0;
    for b in layers {
        acc += b * zk;
        zk *= z;
    }
    acc * (-kappa * z).exp()
}

impl SpectralField {
    pub fn zeros(grid: SpectralGrid) -> Self {
        SpectralField { grid, parity: Parity::Raw, carrier: vec![ZERO; grid.full_len()], nl: 0, layers: vec![] }
    }

    /// Build from half-space samples (`n_h^{d-1} x (n_z + 1)`, vertical fastest).
    ///
    /// The carrier is the odd extension for `Odd` and the even extension otherwise (the
    /// continuous choice for data with a nonzero trace).
    pub fn from_samples(grid: SpectralGrid, samples: &[f64], parity: Parity) -> Result<Self> {
        if samples.len() != grid.half_len() {
            return Err(Error::Shape { expected: grid.half_len(), got: samples.len() });
        }
        let mut cols: Vec<C64> = samples.iter().map(|&x| C64::new(x, 0.0)).collect();
        let hs = grid.half_shape();
        let axes: Vec<usize> = (0..grid.d - 1).collect();
        fft::forward(&mut cols, &hs, &axes);
        let mode = if parity == Parity::Odd { ExtMode::Antisym } else { ExtMode::Sym };
        let carrier = extend_columns(&grid, &cols, mode);
        Ok(SpectralField { grid, parity, carrier, nl: 0, layers: vec![] })
    }

    pub fn from_fn(grid: SpectralGrid, parity: Parity, f: impl Fn([f64; 2], f64) -> f64) -> Self {
        let nzh = grid.nz_half();
        let mut s = vec![0.0; grid.half_len()];
        for h in 0..grid.n_hmodes() {
            let x = grid.x_h(h);
            for j in 0..nzh {
                s[h * nzh + j] = f(x, grid.z(j));
            }
        }
        Self::from_samples(grid, &s, parity).expect("shape is consistent by construction")
    }

    /// Restriction `r F` of a whole-space field.
    pub fn restrict(w: &WholeField) -> Self {
        SpectralField { grid: w.grid, parity: w.parity, carrier: w.coef.clone(), nl: 0, layers: vec![] }
    }

    pub fn grid(&self) -> &SpectralGrid {
        &self.grid
    }
    pub fn parity(&self) -> Parity {
        self.parity
    }
    pub fn with_parity(mut self, parity: Parity) -> Self {
        self.parity = parity;
        self
    }
    pub fn carrier(&self) -> &[C64] {
        &self.carrier
    }
    /// Highest boundary-layer polynomial degree plus one (0 when there are no layers).
    pub fn layer_count(&self) -> usize {
        self.nl
    }
    pub fn layer(&self, h: usize) -> &[C64] {
        &self.layers[h * self.nl..(h + 1) * self.nl]
    }

    /// Horizontal-spectral values at the half-space nodes, `[h][j]`.
    pub fn half_columns(&self) -> Vec<C64> {
        let g = self.grid;
        let (nzf, nzh) = (g.nz_full(), g.nz_half());
        let mut c = self.carrier.clone();
        fft::inverse(&mut c, &g.full_shape(), &[g.d - 1]);
        let mut out = vec![ZERO; g.half_len()];
        out.par_chunks_mut(nzh).enumerate().for_each(|(h, col)| {
            let kappa = g.kappa(h);
            let lay = &self.layers[h * self.nl..(h + 1) * self.nl];
            for (j, v) in col.iter_mut().enumerate() {
                *v = c[h * nzf + j];
                if self.nl > 0 {
                    *v += layer_value(lay, kappa, g.z(j));
                }
            }
        });
        out
    }

    /// Horizontal-spectral values at arbitrary heights `zs` in `[0, L_z]`, `[h][i]`, by direct
    /// summation of the carrier series plus the layers.
    pub fn columns_at(&self, zs: &[f64]) -> Vec<C64> {
        let g = self.grid;
        let nzf = g.nz_full();
        let nz = zs.len();
        let mut out = vec![ZERO; g.n_hmodes() * nz];
        // vertical phases are shared by every horizontal mode; tabulate them in blocks
        const BLOCK: usize = 2048;
        for start in (0..nz).step_by(BLOCK) {
            let zb = &zs[start..(start + BLOCK).min(nz)];
            let phases: Vec<C64> = zb
                .par_iter()
                .flat_map_iter(|&z| {
                    (0..nzf).map(move |m| {
                        // the Nyquist term is real on the grid; use its cosine between nodes
                        if m == g.n_z {
                            C64::new((g.xi_z(m) * z).cos(), 0.0)
                        } else {
                            (I * g.xi_z(m) * z).exp()
                        }
                    })
                })
                .collect();
            out.par_chunks_mut(nz).enumerate().for_each(|(h, col)| {
                let kappa = g.kappa(h);
                let car = &self.carrier[h * nzf..(h + 1) * nzf];
                let lay = &self.layers[h * self.nl..(h + 1) * self.nl];
                for (i, &z) in zb.iter().enumerate() {
                    let ph = &phases[i * nzf..(i + 1) * nzf];
                    let mut acc: C64 = car.iter().zip(ph).map(|(c, e)| c * e).sum();
                    if self.nl > 0 {
                        acc += layer_value(lay, kappa, z);
                    }
                    col[start + i] = acc;
                }
            });
        }
        out
    }

    /// Build from horizontal-spectral half columns `[h][j]` (values at the nodes).
    pub fn from_half_columns(grid: SpectralGrid, cols: &[C64], parity: Parity) -> Result<Self> {
        if cols.len() != grid.half_len() {
            return Err(Error::Shape { expected: grid.half_len(), got: cols.len() });
        }
        let mode = if parity == Parity::Odd { ExtMode::Antisym } else { ExtMode::Sym };
        let carrier = extend_columns(&grid, cols, mode);
        Ok(SpectralField { grid, parity, carrier, nl: 0, layers: vec![] })
    }

    /// Physical samples at the half-space nodes.
    pub fn samples(&self) -> Vec<f64> {
        let g = self.grid;
        let mut cols = self.half_columns();
        let axes: Vec<usize> = (0..g.d - 1).collect();
        fft::inverse(&mut cols, &g.half_shape(), &axes);
        cols.into_iter().map(|z| z.re).collect()
    }

    /// Extension to the doubled box built from the half-space samples.
    ///
    /// The samples at `z = 0` and `z = L_z` are kept as given, so `restrict(extend(f)) = f`
    /// exactly for every mode. An antisymmetric extension of a field with a trace above
    /// `1e-8` relative logs a warning.
    pub fn extend(&self, mode: ExtMode) -> WholeField {
        self.extend_impl(mode, true)
    }

    /// [`extend`](Self::extend) without the trace warning, for callers that report it once.
    pub fn extend_quiet(&self, mode: ExtMode) -> WholeField {
        self.extend_impl(mode, false)
    }

    fn extend_impl(&self, mode: ExtMode, warn: bool) -> WholeField {
        let cols = self.half_columns();
        if warn && mode == ExtMode::Antisym {
            let g = self.grid;
            let nzh = g.nz_half();
            let tr: f64 = (0..g.n_hmodes()).map(|h| cols[h * nzh].norm_sqr()).sum::<f64>().sqrt();
            let all: f64 = cols.iter().map(|c| c.norm_sqr()).sum::<f64>().sqrt() / (nzh as f64).sqrt();
            if tr > 1e-8 * all.max(1e-300) {
                warn_once!("antisymmetric extension of a field with trace {:e} (relative {:e})", tr, tr / all);
            }
        }
        let coef = extend_columns(&self.grid, &cols, mode);
        WholeField { grid: self.grid, parity: mode.parity(), coef }
    }

    /// Trace on the boundary plane.
    pub fn trace(&self) -> BoundaryFunction {
        let g = self.grid;
        let nzf = g.nz_full();
        let coef = (0..g.n_hmodes())
            .map(|h| {
                let mut s: C64 = self.carrier[h * nzf..(h + 1) * nzf].iter().sum();
                if self.nl > 0 {
                    s += self.layers[h * self.nl];
                }
                s
            })
            .collect();
        BoundaryFunction { grid: g, coef }
    }

    /// Apply a horizontal Fourier multiplier.
    pub fn horizontal(&self, symbol: impl Fn(&Mode) -> C64 + Sync) -> Self {
        let g = self.grid;
        let nzf = g.nz_full();
        let mut out = self.clone();
        out.carrier.par_chunks_mut(nzf).enumerate().for_each(|(h, col)| {
            let s = symbol(&Mode::new(&g, h));
            col.iter_mut().for_each(|c| *c *= s);
        });
        if self.nl > 0 {
            out.layers.chunks_mut(self.nl).enumerate().for_each(|(h, col)| {
                let s = symbol(&Mode::new(&g, h));
                col.iter_mut().for_each(|c| *c *= s);
            });
        }
        out
    }

    /// `d_j` for a horizontal direction `j < d-1`.
    pub fn d_h(&self, j: usize) -> Self {
        self.horizontal(|m| m.ixi(j))
    }
    /// `S_j = d_j |D_h|^{-1}`.
    pub fn s(&self, j: usize) -> Self {
        self.horizontal(|m| m.s(j))
    }
    /// `|D_h|`.
    pub fn dh_abs(&self) -> Self {
        self.horizontal(|m| C64::new(m.kappa, 0.0))
    }

    /// Vertical derivative `d_d`; parity flips.
    pub fn d_z(&self) -> Self {
        let g = self.grid;
        let nzf = g.nz_full();
        let mut out = self.clone();
        out.parity = self.parity.flip();
        out.carrier.par_chunks_mut(nzf).for_each(|col| {
            for (m, c) in col.iter_mut().enumerate() {
                *c *= I * g.dxi_z(m);
            }
        });
        if self.nl > 0 {
            for h in 0..g.n_hmodes() {
                let kappa = g.kappa(h);
                let src = &self.layers[h * self.nl..(h + 1) * self.nl];
                let dst = &mut out.layers[h * self.nl..(h + 1) * self.nl];
                for k in 0..self.nl {
                    let next = if k + 1 < self.nl { src[k + 1] * (k + 1) as f64 } else { ZERO };
                    dst[k] = next - src[k] * kappa;
                }
            }
        }
        out
    }

    /// Second vertical derivative, with the exact symbol `-xi_d^2` on the carrier.
    pub fn d_zz(&self) -> Self {
        let g = self.grid;
        let nzf = g.nz_full();
        let mut out = if self.nl > 0 { self.d_z().d_z() } else { self.clone() };
        out.parity = self.parity;
        out.carrier = self.carrier.clone();
        out.carrier.par_chunks_mut(nzf).for_each(|col| {
            for (m, c) in col.iter_mut().enumerate() {
                let x = g.xi_z(m);
                *c *= -x * x;
            }
        });
        out
    }

    /// Laplacian.
    pub fn laplacian(&self) -> Self {
        let hor = self.horizontal(|m| C64::new(-m.kappa * m.kappa, 0.0));
        hor.add(&self.d_zz()).expect("same grid")
    }

    pub fn add(&self, other: &SpectralField) -> Result<Self> {
        let mut out = self.clone();
        out.axpy(1.0, other)?;
        Ok(out)
    }
    pub fn sub(&self, other: &SpectralField) -> Result<Self> {
        let mut out = self.clone();
        out.axpy(-1.0, other)?;
        Ok(out)
    }
    pub fn scale(&self, s: f64) -> Self {
        let mut out = self.clone();
        out.carrier.iter_mut().for_each(|c| *c *= s);
        out.layers.iter_mut().for_each(|c| *c *= s);
        out
    }
    pub fn neg(&self) -> Self {
        self.scale(-1.0)
    }

    /// `self += a x`.
    pub fn axpy(&mut self, a: f64, x: &SpectralField) -> Result<()> {
        check_grid(&self.grid, &x.grid)?;
        for (c, d) in self.carrier.iter_mut().zip(&x.carrier) {
            *c += d * a;
        }
        if x.nl > 0 {
            self.grow_layers(x.nl);
            for h in 0..self.grid.n_hmodes() {
                for k in 0..x.nl {
                    self.layers[h * self.nl + k] += x.layers[h * x.nl + k] * a;
                }
            }
        }
        if self.parity != x.parity {
            self.parity = Parity::Raw;
        }
        Ok(())
    }

    fn grow_layers(&mut self, nl: usize) {
        if nl <= self.nl {
            return;
        }
        let n = self.grid.n_hmodes();
        let mut layers = vec![ZERO; n * nl];
        for h in 0..n {
            for k in 0..self.nl {
                layers[h * nl + k] = self.layers[h * self.nl + k];
            }
        }
        self.layers = layers;
        self.nl = nl;
    }

    /// Column-wise map over horizontal modes: `f(mode, carrier_column, layer_column)`
    /// returns the new carrier column and layer coefficients.
    pub fn map_columns(
        &self,
        parity: Parity,
        f: impl Fn(&Mode, &[C64], &[C64]) -> (Vec<C64>, Vec<C64>) + Sync,
    ) -> Self {
        let g = self.grid;
        let nzf = g.nz_full();
        let cols: Vec<(Vec<C64>, Vec<C64>)> = (0..g.n_hmodes())
            .into_par_iter()
            .map(|h| {
                let mode = Mode::new(&g, h);
                f(&mode, &self.carrier[h * nzf..(h + 1) * nzf], &self.layers[h * self.nl..(h + 1) * self.nl])
            })
            .collect();
        let nl = cols.iter().map(|c| c.1.len()).max().unwrap_or(0);
        let mut carrier = Vec::with_capacity(g.full_len());
        let mut layers = vec![ZERO; g.n_hmodes() * nl];
        for (h, (c, l)) in cols.into_iter().enumerate() {
            carrier.extend_from_slice(&c);
            layers[h * nl..h * nl + l.len()].copy_from_slice(&l);
        }
        let mut out = SpectralField { grid: g, parity, carrier, nl, layers };
        out.trim_layers();
        out
    }

    fn trim_layers(&mut self) {
        while self.nl > 0 {
            let k = self.nl - 1;
            let n = self.grid.n_hmodes();
            if (0..n).all(|h| self.layers[h * self.nl + k] == ZERO) {
                let nl = self.nl - 1;
                let mut layers = vec![ZERO; n * nl];
                for h in 0..n {
                    layers[h * nl..(h + 1) * nl].copy_from_slice(&self.layers[h * self.nl..h * self.nl + nl]);
                }
                self.layers = layers;
                self.nl = nl;
            } else {
                break;
            }
        }
    }

    /// `r [(n0 + n1 D + n2 D^2) / |xi|^2] e(f)` with `D = d_d`, where `symbol(mode)` returns
    /// `[n0, n1, n2]` (they may depend on the horizontal mode).
    ///
    /// For `|xi_h| > 0` the result is the decaying solution of the vertical two-point
    /// problem selected by the extension (Dirichlet for `e_a`, Neumann for `e_s`, matching
    /// to the exterior decaying solution for `e_0`), obtained from the carrier by a
    /// homogeneous `e^{-|xi_h| z}` correction. On the horizontal mean the symbol must reduce
    /// to the local multiplier `-n2`; otherwise the periodic pseudo-inverse of the sampled
    /// extension is used and a warning is logged.
    pub fn ext_mult(&self, mode: ExtMode, symbol: impl Fn(&Mode) -> [C64; 3] + Sync) -> Self {
        let g = self.grid;
        self.map_columns(Parity::Raw, |m, carrier, layers| {
            let sym = symbol(m);
            if m.kappa == 0.0 {
                if sym[0] == ZERO && sym[1] == ZERO {
                    let s = -sym[2];
                    return (carrier.iter().map(|c| c * s).collect(), layers.iter().map(|c| c * s).collect());
                }
                log::warn!("rational multiplier is singular on the horizontal mean; using the periodic pseudo-inverse");
                return (literal_column(&g, m.kappa, carrier, layers, mode, sym), vec![]);
            }
            lifted_column(&g, m.kappa, carrier, layers, mode, sym)
        })
    }

    /// Same operator as [`ext_mult`](Self::ext_mult) evaluated literally: sampled extension,
    /// periodic multiplier on the doubled box, restriction.
    pub fn ext_mult_literal(&self, mode: ExtMode, symbol: impl Fn(&Mode) -> [C64; 3] + Sync) -> Self {
        let g = self.grid;
        let w = self.extend(mode);
        let out = w.map_symbol(Parity::Raw, |m, iz| {
            let sym = symbol(m);
            let xz = g.xi_z(iz);
            let den = m.kappa * m.kappa + xz * xz;
            if den == 0.0 {
                return ZERO;
            }
            (sym[0] + sym[1] * I * g.dxi_z(iz) - sym[2] * xz * xz) / den
        });
        SpectralField::restrict(&out)
    }

    /// Vertical antiderivative `int_0^z f` evaluated at the half-space nodes, term by term:
    /// Fourier modes of the carrier, the vertical-mean mode (a linear function), and the
    /// boundary layers in closed form. Returns horizontal-spectral columns `[h][j]`.
    pub fn antiderivative_columns(&self) -> Vec<C64> {
        let g = self.grid;
        let (nzf, nzh) = (g.nz_full(), g.nz_half());
        let mut out = vec![ZERO; g.half_len()];
        out.par_chunks_mut(nzh).enumerate().for_each(|(h, col)| {
            let kappa = g.kappa(h);
            let car = &self.carrier[h * nzf..(h + 1) * nzf];
            let lay = &self.layers[h * self.nl..(h + 1) * self.nl];
            for (j, v) in col.iter_mut().enumerate() {
                let z = g.z(j);
                let mut acc = car[0] * z;
                for (m, c) in car.iter().enumerate().skip(1) {
                    let xi = g.dxi_z(m);
                    if xi == 0.0 {
                        continue;
                    }
                    acc += c * ((I * xi * z).exp() - 1.0) / (I * xi);
                }
                for (k, b) in lay.iter().enumerate() {
                    acc += b * int_monomial_exp(k, kappa, z);
                }
                *v = acc;
            }
        });
        out
    }

    /// Physical samples from horizontal-spectral columns.
    pub fn columns_to_samples(grid: &SpectralGrid, cols: &[C64]) -> Vec<f64> {
        let mut c = cols.to_vec();
        let axes: Vec<usize> = (0..grid.d - 1).collect();
        fft::inverse(&mut c, &grid.half_shape(), &axes);
        c.into_iter().map(|z| z.re).collect()
    }

    /// Relative size of `|f|` near `z = L_z` (the last sixteenth of the nodes) compared
    /// with `max |f|`: the truncation admissibility measure.
    pub fn truncation_defect(&self) -> f64 {
        let g = self.grid;
        let s = self.samples();
        let nzh = g.nz_half();
        let j0 = nzh - (g.n_z / 16).max(1) - 1;
        let mut top = 0.0f64;
        let mut all = 0.0f64;
        for h in 0..g.n_hmodes() {
            for j in 0..nzh {
                let v = s[h * nzh + j].abs();
                all = all.max(v);
                if j >= j0 {
                    top = top.max(v);
                }
            }
        }
        if all == 0.0 {
            0.0
        } else {
            top / all
        }
    }

    /// Largest coefficient magnitude of the horizontal-mean column (carrier and layers).
    pub fn horizontal_mean_size(&self) -> f64 {
        let nzf = self.grid.nz_full();
        let c = self.carrier[..nzf].iter().fold(0.0f64, |m, c| m.max(c.norm()));
        let l = self.layers[..self.nl].iter().fold(0.0f64, |m, c| m.max(c.norm()));
        c.max(l)
    }
}

/// `int_0^z y^k e^{-kappa y} dy`.
fn int_monomial_exp(k: usize, kappa: f64, z: f64) -> f64 {
    if kappa == 0.0 {
        return z.powi(k as i32 + 1) / (k + 1) as f64;
    }
    // k!/kappa^{k+1} (1 - e^{-kappa z} sum_{j<=k} (kappa z)^j / j!)
    let x = kappa * z;
    let mut term = 1.0;
    let mut sum = 1.0;
    for j in 1..=k {
        term *= x / j as f64;
        sum += term;
    }
    let mut fact = 1.0;
    for j in 1..=k {
        fact *= j as f64;
    }
    if x < 0.5 {
        // sum_{j>k} x^j / j! * k!/kappa^{k+1}, avoids cancellation near the boundary
        let mut t = term * x / (k + 1) as f64;
        let mut tail = 0.0f64;
        let mut j = k + 1;
        while t.abs() > 1e-18 * tail.abs().max(1e-300) {
            tail += t;
            j += 1;
            t *= x / j as f64;
        }
        fact / kappa.powi(k as i32 + 1) * (-x).exp() * tail
    } else {
        fact / kappa.powi(k as i32 + 1) * (1.0 - (-x).exp() * sum)
    }
}

/// Extend horizontal-spectral half columns `[h][j]` to doubled-box coefficients.
fn extend_columns(grid: &SpectralGrid, cols: &[C64], mode: ExtMode) -> Vec<C64> {
    let (nzf, nzh, nz) = (grid.nz_full(), grid.nz_half(), grid.n_z);
    let mut out = vec![ZERO; grid.full_len()];
    out.par_chunks_mut(nzf).enumerate().for_each(|(h, dst)| {
        let src = &cols[h * nzh..(h + 1) * nzh];
        fill_extension(src, dst, nz, mode);
    });
    fft::forward(&mut out, &grid.full_shape(), &[grid.d - 1]);
    out
}

fn fill_extension(src: &[C64], dst: &mut [C64], nz: usize, mode: ExtMode) {
    dst[..=nz].copy_from_slice(src);
    for m in nz + 1..2 * nz {
        let v = src[2 * nz - m];
        dst[m] = match mode {
            ExtMode::Zero => ZERO,
            ExtMode::Antisym => -v,
            ExtMode::Sym => v,
        };
    }
}

fn column_values(grid: &SpectralGrid, kappa: f64, carrier: &[C64], layers: &[C64]) -> Vec<C64> {
    let mut c = carrier.to_vec();
    fft::inverse(&mut c, &[grid.nz_full()], &[0]);
    (0..grid.nz_half())
        .map(|j| {
            let mut v = c[j];
            if !layers.is_empty() {
                v += layer_value(layers, kappa, grid.z(j));
            }
            v
        })
        .collect()
}

fn literal_column(grid: &SpectralGrid, kappa: f64, carrier: &[C64], layers: &[C64], mode: ExtMode, sym: [C64; 3]) -> Vec<C64> {
    let vals = column_values(grid, kappa, carrier, layers);
    let mut ext = vec![ZERO; grid.nz_full()];
    fill_extension(&vals, &mut ext, grid.n_z, mode);
    fft::forward(&mut ext, &[grid.nz_full()], &[0]);
    for (m, c) in ext.iter_mut().enumerate() {
        let xz = grid.xi_z(m);
        let den = kappa * kappa + xz * xz;
        *c = if den == 0.0 { ZERO } else { *c * (sym[0] + sym[1] * I * grid.dxi_z(m) - sym[2] * xz * xz) / den };
    }
    ext
}

/// Coefficients (in `z^j`) of `Q` with `e^{-kappa z} Q(z)` the decaying solution of
/// `(kappa^2 - d^2) phi = z^k e^{-kappa z}` under the boundary condition of `mode`.
fn layer_response(k: usize, kappa: f64, mode: ExtMode) -> Vec<f64> {
    // q' = p with 2 kappa p - p' = z^k; q(0) = 0.
    let mut p = vec![0.0; k + 1];
    p[k] = 1.0 / (2.0 * kappa);
    for j in (0..k).rev() {
        p[j] = (j + 1) as f64 * p[j + 1] / (2.0 * kappa);
    }
    let mut q = vec![0.0; k + 2];
    for j in 0..=k {
        q[j + 1] = p[j] / (j + 1) as f64;
    }
    q[0] = match mode {
        ExtMode::Antisym => 0.0,
        ExtMode::Sym => p[0] / kappa,
        ExtMode::Zero => p[0] / (2.0 * kappa),
    };
    q
}

/// Apply `n0 + n1 d + n2 d^2` to `e^{-kappa z} Q(z)`; returns the new polynomial.
fn apply_poly_operator(q: &[C64], kappa: f64, sym: [C64; 3]) -> Vec<C64> {
    let deriv = |a: &[C64]| -> Vec<C64> {
        // (e^{-kz} a)' = e^{-kz} (a' - k a)
        let mut out = vec![ZERO; a.len()];
        for j in 0..a.len() {
            let next = if j + 1 < a.len() { a[j + 1] * (j + 1) as f64 } else { ZERO };
            out[j] = next - a[j] * kappa;
        }
        out
    };
    let d1 = deriv(q);
    let d2 = deriv(&d1);
    (0..q.len()).map(|j| sym[0] * q[j] + sym[1] * d1[j] + sym[2] * d2[j]).collect()
}

fn lifted_column(grid: &SpectralGrid, kappa: f64, carrier: &[C64], layers: &[C64], mode: ExtMode, sym: [C64; 3]) -> (Vec<C64>, Vec<C64>) {
    let k2 = kappa * kappa;
    let mut out = vec![ZERO; carrier.len()];
    let mut phi0 = ZERO;
    let mut dphi0 = ZERO;
    for (m, (o, c)) in out.iter_mut().zip(carrier).enumerate() {
        let xz = grid.xi_z(m);
        let dxz = grid.dxi_z(m);
        let q = c / (k2 + xz * xz);
        phi0 += q;
        dphi0 += q * I * dxz;
        *o = (sym[0] + sym[1] * I * dxz - sym[2] * xz * xz) * q;
    }
    // homogeneous correction A e^{-kappa z} restoring the boundary condition
    let a = match mode {
        ExtMode::Antisym => -phi0,
        ExtMode::Sym => dphi0 / kappa,
        ExtMode::Zero => (dphi0 - phi0 * kappa) / (2.0 * kappa),
    };
    let mut lay = vec![ZERO; layers.len() + 1];
    lay[0] = a * (sym[0] - sym[1] * kappa + sym[2] * k2);
    for (k, b) in layers.iter().enumerate() {
        if *b == ZERO {
            continue;
        }
        let q: Vec<C64> = layer_response(k, kappa, mode).into_iter().map(|x| C64::new(x, 0.0)).collect();
        let r = apply_poly_operator(&q, kappa, sym);
        for (j, v) in r.into_iter().enumerate() {
            lay[j] += b * v;
        }
    }
    (out, lay)
}

// ---------------------------------------------------------------------------
// Vector fields
// ---------------------------------------------------------------------------

/// A `d`-component field; the last component is the vertical one.
#[derive(Clone, Debug)]
pub struct VectorField {
    pub comps: Vec<SpectralField>,
}

impl VectorField {
    pub fn new(comps: Vec<SpectralField>) -> Self {
        VectorField { comps }
    }
    pub fn zeros(grid: SpectralGrid) -> Self {
        VectorField { comps: (0..grid.d).map(|_| SpectralField::zeros(grid)).collect() }
    }
    pub fn grid(&self) -> &SpectralGrid {
        self.comps[0].grid()
    }
    pub fn dim(&self) -> usize {
        self.comps.len()
    }
    pub fn horizontal(&self) -> &[SpectralField] {
        &self.comps[..self.comps.len() - 1]
    }
    pub fn vertical(&self) -> &SpectralField {
        &self.comps[self.comps.len() - 1]
    }
    pub fn add(&self, other: &VectorField) -> Result<Self> {
        let comps = self.comps.iter().zip(&other.comps).map(|(a, b)| a.add(b)).collect::<Result<_>>()?;
        Ok(VectorField { comps })
    }
    pub fn sub(&self, other: &VectorField) -> Result<Self> {
        let comps = self.comps.iter().zip(&other.comps).map(|(a, b)| a.sub(b)).collect::<Result<_>>()?;
        Ok(VectorField { comps })
    }
    pub fn scale(&self, s: f64) -> Self {
        VectorField { comps: self.comps.iter().map(|c| c.scale(s)).collect() }
    }
    pub fn axpy(&mut self, a: f64, x: &VectorField) -> Result<()> {
        for (c, d) in self.comps.iter_mut().zip(&x.comps) {
            c.axpy(a, d)?;
        }
        Ok(())
    }
    /// `div u = div_h u^h + d_d u^d`.
    pub fn div(&self) -> SpectralField {
        let n = self.comps.len();
        let mut acc = self.comps[n - 1].d_z();
        for j in 0..n - 1 {
            acc.axpy(1.0, &self.comps[j].d_h(j)).expect("same grid");
        }
        acc
    }
    /// Gradient of a scalar.
    pub fn grad(f: &SpectralField) -> Self {
        let d = f.grid().d;
        let mut comps: Vec<SpectralField> = (0..d - 1).map(|j| f.d_h(j)).collect();
        comps.push(f.d_z());
        VectorField { comps }
    }
    pub fn samples(&self) -> Vec<Vec<f64>> {
        self.comps.iter().map(|c| c.samples()).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    fn grid2() -> SpectralGrid {
        SpectralGrid::new(2, 16, 32, 1.0, 4.0).unwrap()
    }

    #[test]
    fn round_trip_samples() {
        let g = grid2();
        let f = SpectralField::from_fn(g, Parity::Raw, |x, z| (2.0 * PI * x[0]).sin() * (-z).exp() + 0.3 * z);
        let s = SpectralField::from_fn(g, Parity::Raw, |x, z| (2.0 * PI * x[0]).sin() * (-z).exp() + 0.3 * z).samples();
        let s2 = SpectralField::from_samples(g, &s, Parity::Raw).unwrap().samples();
        for (a, b) in f.samples().iter().zip(&s2) {
            assert!((a - b).abs() < 1e-13);
        }
    }

    #[test]
    fn layer_derivative_matches_closed_form() {
        let g = grid2();
        let b = BoundaryFunction::from_fn(g, |x| (2.0 * PI * x[0]).cos());
        let hb = b.harmonic_extend();
        let dz = hb.d_z().samples();
        let nzh = g.nz_half();
        for h in 0..g.n_hmodes() {
            for j in 0..nzh {
                let x = g.x_h(h)[0];
                let z = g.z(j);
                let exact = -2.0 * PI * (-2.0 * PI * z).exp() * (2.0 * PI * x).cos();
                assert!((dz[h * nzh + j] - exact).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn integral_of_monomial_exp() {
        // int_0^z y^2 e^{-2y} dy against a fine Simpson rule
        let (k, kappa, z) = (2usize, 2.0, 1.3);
        let n = 2000;
        let hstep = z / n as f64;
        let f = |y: f64| y * y * (-kappa * y).exp();
        let mut s = f(0.0) + f(z);
        for i in 1..n {
            s += f(i as f64 * hstep) * if i % 2 == 1 { 4.0 } else { 2.0 };
        }
        s *= hstep / 3.0;
        assert!((int_monomial_exp(k, kappa, z) - s).abs() < 1e-12);
        assert!((int_monomial_exp(k, kappa, 0.1) - int_small(k, kappa, 0.1)).abs() < 1e-15);
    }

    fn int_small(k: usize, kappa: f64, z: f64) -> f64 {
        let n = 4000;
        let h = z / n as f64;
        let f = |y: f64| y.powi(k as i32) * (-kappa * y).exp();
        let mut s = f(0.0) + f(z);
        for i in 1..n {
            s += f(i as f64 * h) * if i % 2 == 1 { 4.0 } else { 2.0 };
        }
        s * h / 3.0
    }
}
