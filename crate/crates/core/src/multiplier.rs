//! Diagonal Fourier multipliers: `|D_h|^{+-1}`, `|D|^{+-1}`, Riesz transforms, heat.

use crate::error::{Error, Result};
use crate::field::{ExtMode, Mode, Parity, SpectralField, WholeField, ZeroModePolicy};
use num_complex::Complex64 as C64;
use serde::{Deserialize, Serialize};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub enum Symbol {
    /// `|D_h|`
    DhAbs,
    /// `|D_h|^{-1}`
    DhAbsInv,
    /// `|D|`
    DAbs,
    /// `|D|^{-1}`
    DAbsInv,
    /// `R_j = d_j |D|^{-1}`, `j` zero-based with `j = d-1` the vertical direction.
    Riesz(usize),
    /// `S_j = d_j |D_h|^{-1}`, `j < d-1`.
    HRiesz(usize),
    /// `d_j`.
    Deriv(usize),
    /// `e^{mu t Delta}`.
    Heat { mu: f64, t: f64 },
}

impl Symbol {
    /// True when the symbol depends on the vertical frequency.
    pub fn is_whole_space(&self) -> bool {
        !matches!(self, Symbol::DhAbs | Symbol::DhAbsInv | Symbol::HRiesz(_))
    }

    fn flips_parity(&self, d: usize) -> bool {
        matches!(self, Symbol::Riesz(j) | Symbol::Deriv(j) if *j == d - 1)
    }

    /// Whether the symbol vanishes or is undefined on the horizontal mean (resp. global mean).
    fn annihilates(&self, kappa: f64, xi2: f64) -> bool {
        match self {
            Symbol::DhAbsInv | Symbol::HRiesz(_) => kappa == 0.0,
            Symbol::DAbsInv | Symbol::Riesz(_) => xi2 == 0.0,
            _ => false,
        }
    }

    /// Symbol value at horizontal mode `mode` and vertical wavenumbers `(xi_z, dxi_z)`.
    pub fn value(&self, d: usize, mode: &Mode, xz: f64, dxz: f64) -> C64 {
        let k = mode.kappa;
        let xi2 = k * k + xz * xz;
        let i = C64::new(0.0, 1.0);
        match *self {
            Symbol::DhAbs => C64::new(k, 0.0),
            Symbol::DhAbsInv => C64::new(if k == 0.0 { 0.0 } else { 1.0 / k }, 0.0),
            Symbol::DAbs => C64::new(xi2.sqrt(), 0.0),
            Symbol::DAbsInv => C64::new(if xi2 == 0.0 { 0.0 } else { 1.0 / xi2.sqrt() }, 0.0),
            Symbol::Riesz(j) => {
                if xi2 == 0.0 {
                    return C64::new(0.0, 0.0);
                }
                let x = if j == d - 1 { dxz } else { mode.xi[j] };
                i * (x / xi2.sqrt())
            }
            Symbol::HRiesz(j) => mode.s(j),
            Symbol::Deriv(j) => {
                if j == d - 1 {
                    i * dxz
                } else {
                    mode.ixi(j)
                }
            }
            Symbol::Heat { mu, t } => C64::new((-mu * t * xi2).exp(), 0.0),
        }
    }

    fn validate(&self, d: usize) -> Result<()> {
        match *self {
            Symbol::Riesz(j) | Symbol::Deriv(j) if j >= d => Err(Error::InvalidArgument(format!("direction {j} out of range"))),
            Symbol::HRiesz(j) if j + 1 >= d => Err(Error::InvalidArgument(format!("S_{j} needs a horizontal direction"))),
            Symbol::Heat { mu, t } if !(mu > 0.0) || t < 0.0 => Err(Error::InvalidArgument("heat needs mu > 0, t >= 0".into())),
            _ => Ok(()),
        }
    }
}

fn zero_mode_check(size: f64, scale: f64, policy: ZeroModePolicy) -> Result<()> {
    if size > 1e-12 * scale.max(1e-300) {
        if policy == ZeroModePolicy::Strict {
            return Err(Error::ZeroMode(size));
        }
        log::warn!("annihilated mode of size {size:e} projected out");
    }
    Ok(())
}

/// Apply a multiplier to a whole-space field; the parity tag is updated.
pub fn apply_whole(w: &WholeField, sym: Symbol, policy: ZeroModePolicy) -> Result<WholeField> {
    let g = *w.grid();
    sym.validate(g.d)?;
    let nzf = g.nz_full();
    let coef = w.coefficients();
    let mut killed = 0.0f64;
    for h in 0..g.n_hmodes() {
        let k = g.kappa(h);
        for m in 0..nzf {
            let xz = g.xi_z(m);
            if sym.annihilates(k, k * k + xz * xz) {
                killed = killed.max(coef[h * nzf + m].norm());
            }
        }
    }
    let scale = coef.iter().fold(0.0f64, |a, c| a.max(c.norm()));
    zero_mode_check(killed, scale, policy)?;
    let parity = if sym.flips_parity(g.d) { w.parity().flip() } else { w.parity() };
    Ok(w.map_symbol(parity, |mode, m| sym.value(g.d, mode, g.xi_z(m), g.dxi_z(m))))
}

/// Apply a multiplier to a half-space field.
///
/// Horizontal symbols act directly. Symbols involving the vertical frequency act on the
/// extension selected by the parity tag (`Odd -> e_a`, `Even -> e_s`, `Raw -> e_0`), and the
/// result is restricted back.
pub fn apply_multiplier(f: &SpectralField, sym: Symbol, policy: ZeroModePolicy) -> Result<SpectralField> {
    let g = *f.grid();
    sym.validate(g.d)?;
    if let Symbol::Deriv(j) = sym {
        return Ok(if j == g.d - 1 { f.d_z() } else { f.d_h(j) });
    }
    if !sym.is_whole_space() {
        if matches!(sym, Symbol::DhAbsInv | Symbol::HRiesz(_)) {
            let scale = f.horizontal_mean_size();
            let all = f.carrier().iter().fold(0.0f64, |a, c| a.max(c.norm()));
            zero_mode_check(scale, all, policy)?;
        }
        return Ok(f.horizontal(|m| sym.value(g.d, m, 0.0, 0.0)));
    }
    let mode = match f.parity() {
        Parity::Odd => ExtMode::Antisym,
        Parity::Even => ExtMode::Sym,
        Parity::Raw => ExtMode::Zero,
    };
    let w = apply_whole(&f.extend(mode), sym, policy)?;
    Ok(SpectralField::restrict(&w))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::SpectralGrid;
    use std::f64::consts::PI;

    #[test]
    fn riesz_single_mode() {
        let g = SpectralGrid::new(2, 16, 16, 1.0, 1.0).unwrap();
        let w = WholeField::from_fn(g, Parity::Raw, |x, z| (2.0 * PI * x[0]).sin() * (3.0 * PI * z).cos());
        let r = apply_whole(&w, Symbol::Riesz(0), ZeroModePolicy::Strict).unwrap();
        let xi = (4.0f64 * PI * PI + 9.0 * PI * PI).sqrt();
        let expect = WholeField::from_fn(g, Parity::Raw, |x, z| 2.0 * PI / xi * (2.0 * PI * x[0]).cos() * (3.0 * PI * z).cos());
        for (a, b) in r.samples().iter().zip(expect.samples()) {
            assert!((a - b).abs() < 1e-13);
        }
    }

    #[test]
    fn strict_policy_rejects_mean() {
        let g = SpectralGrid::new(2, 8, 8, 1.0, 1.0).unwrap();
        let w = WholeField::from_fn(g, Parity::Even, |_, _| 1.0);
        assert!(apply_whole(&w, Symbol::DAbsInv, ZeroModePolicy::Strict).is_err());
        assert!(apply_whole(&w, Symbol::DAbsInv, ZeroModePolicy::Project).is_ok());
    }
}
