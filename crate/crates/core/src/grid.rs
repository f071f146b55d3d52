use crate::error::{Error, Result};
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

/// Discretization of the truncated half-space `[0, L_h)^{d-1} x [0, L_z]`.
///
/// Vertical nodes are `z_j = j L_z / n_z` for `j = 0..=n_z`. Extensions across the
/// boundary plane live on the doubled box `[-L_z, L_z)` with `2 n_z` nodes, stored in
/// FFT order (node `m` sits at `m dz` for `m <= n_z` and at `(m - 2 n_z) dz` above).
///
/// Arrays are row-major with the horizontal axes first and the vertical axis fastest.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SpectralGrid {
    pub d: usize,
    pub n_h: usize,
    pub n_z: usize,
    pub l_h: f64,
    pub l_z: f64,
}

fn signed(k: usize, n: usize) -> i64 {
    if k < n / 2 {
        k as i64
    } else {
        k as i64 - n as i64
    }
}

impl SpectralGrid {
    pub fn new(d: usize, n_h: usize, n_z: usize, l_h: f64, l_z: f64) -> Result<Self> {
        if d != 2 && d != 3 {
            return Err(Error::InvalidGrid(format!("dimension {d} not in {{2, 3}}")));
        }
        for (name, n) in [("n_h", n_h), ("n_z", n_z)] {
            if n < 4 || !n.is_power_of_two() {
                return Err(Error::InvalidGrid(format!("{name} = {n} must be a power of two >= 4")));
            }
        }
        if !(l_h > 0.0 && l_h.is_finite() && l_z > 0.0 && l_z.is_finite()) {
            return Err(Error::InvalidGrid(format!("extents must be positive, got L_h = {l_h}, L_z = {l_z}")));
        }
        Ok(Self { d, n_h, n_z, l_h, l_z })
    }

    /// Same extents, different resolution.
    pub fn refined(&self, n_h: usize, n_z: usize) -> Result<Self> {
        Self::new(self.d, n_h, n_z, self.l_h, self.l_z)
    }

    /// Number of horizontal modes (or horizontal nodes), `n_h^{d-1}`.
    pub fn n_hmodes(&self) -> usize {
        self.n_h.pow((self.d - 1) as u32)
    }
    pub fn nz_half(&self) -> usize {
        self.n_z + 1
    }
    pub fn nz_full(&self) -> usize {
        2 * self.n_z
    }
    pub fn half_len(&self) -> usize {
        self.n_hmodes() * self.nz_half()
    }
    pub fn full_len(&self) -> usize {
        self.n_hmodes() * self.nz_full()
    }
    pub fn dx(&self) -> f64 {
        self.l_h / self.n_h as f64
    }
    pub fn dz(&self) -> f64 {
        self.l_z / self.n_z as f64
    }
    /// Measure of the truncated half-space box.
    pub fn volume(&self) -> f64 {
        self.l_h.powi(self.d as i32 - 1) * self.l_z
    }
    pub fn h_shape(&self) -> Vec<usize> {
        vec![self.n_h; self.d - 1]
    }
    pub fn half_shape(&self) -> Vec<usize> {
        let mut s = self.h_shape();
        s.push(self.nz_half());
        s
    }
    pub fn full_shape(&self) -> Vec<usize> {
        let mut s = self.h_shape();
        s.push(self.nz_full());
        s
    }

    pub fn z(&self, j: usize) -> f64 {
        j as f64 * self.dz()
    }
    /// Vertical coordinate of node `m` of the doubled box.
    pub fn z_full(&self, m: usize) -> f64 {
        signed_full(m, self.nz_full()) as f64 * self.dz()
    }

    /// Multi-index `(i_1, i_2)` of horizontal node/mode `h` (`i_2 = 0` when `d = 2`).
    pub fn h_multi(&self, h: usize) -> [usize; 2] {
        if self.d == 2 {
            [h, 0]
        } else {
            [h / self.n_h, h % self.n_h]
        }
    }
    pub fn h_index(&self, i: [usize; 2]) -> usize {
        if self.d == 2 {
            i[0]
        } else {
            i[0] * self.n_h + i[1]
        }
    }
    pub fn x_h(&self, h: usize) -> [f64; 2] {
        let i = self.h_multi(h);
        [i[0] as f64 * self.dx(), i[1] as f64 * self.dx()]
    }

    /// Horizontal wavenumber vector of mode `h` (Nyquist taken negative).
    pub fn xi_h(&self, h: usize) -> [f64; 2] {
        let i = self.h_multi(h);
        let c = 2.0 * PI / self.l_h;
        let mut xi = [c * signed(i[0], self.n_h) as f64, 0.0];
        if self.d == 3 {
            xi[1] = c * signed(i[1], self.n_h) as f64;
        }
        xi
    }
    /// Wavenumbers used for odd symbols such as `i xi_j`; the Nyquist entry is zeroed
    /// so that real fields stay real.
    pub fn dxi_h(&self, h: usize) -> [f64; 2] {
        let i = self.h_multi(h);
        let mut xi = self.xi_h(h);
        for a in 0..self.d - 1 {
            if i[a] == self.n_h / 2 {
                xi[a] = 0.0;
            }
        }
        xi
    }
    pub fn kappa(&self, h: usize) -> f64 {
        let xi = self.xi_h(h);
        (xi[0] * xi[0] + xi[1] * xi[1]).sqrt()
    }
    /// Vertical wavenumber of mode `m` on the doubled box (period `2 L_z`).
    pub fn xi_z(&self, m: usize) -> f64 {
        PI / self.l_z * signed(m, self.nz_full()) as f64
    }
    pub fn dxi_z(&self, m: usize) -> f64 {
        if m == self.n_z {
            0.0
        } else {
            self.xi_z(m)
        }
    }
}

fn signed_full(m: usize, n: usize) -> i64 {
    if m <= n / 2 {
        m as i64
    } else {
        m as i64 - n as i64
    }
}
