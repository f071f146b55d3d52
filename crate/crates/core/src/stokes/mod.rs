//! The evolutionary Stokes system in the half-space:
//! `d_t u - mu Delta u + grad Pi = f`, `div u = g = div Q`, `u = 0` on the boundary.

mod formula;
pub mod mms;
pub mod oracle;

pub use formula::{free_horizontal, solve_stokes};
pub(crate) use formula::heat_duhamel;
pub use oracle::{oracle_solve, OracleOptions};

use crate::error::{Error, Result};
use crate::field::{SpectralField, VectorField};
use crate::grid::SpectralGrid;
use crate::quadrature::{lp_half, lp_half_vec};
use serde::{Deserialize, Serialize};

#[derive(Clone, Debug)]
pub struct StokesInput {
    pub mu: f64,
    pub u0: VectorField,
    /// Forcing at every sample time; empty means `f = 0`.
    pub f: Vec<VectorField>,
    /// `Q` at every sample time (`g = div Q`); empty means `Q = 0`.
    pub q: Vec<VectorField>,
    pub times: Vec<f64>,
    /// Tolerance for the compatibility conditions, relative to the data size.
    pub tol: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Provenance {
    Formula,
    Oracle,
}

#[derive(Clone, Debug)]
pub struct StokesSolution {
    pub times: Vec<f64>,
    pub u: Vec<VectorField>,
    pub grad_pi: Vec<VectorField>,
    pub mu: f64,
    pub provenance: Provenance,
}

impl StokesInput {
    pub fn new(mu: f64, u0: VectorField, times: Vec<f64>) -> Self {
        StokesInput { mu, u0, f: vec![], q: vec![], times, tol: 1e-8 }
    }

    pub fn grid(&self) -> &SpectralGrid {
        self.u0.grid()
    }

    pub fn forcing(&self, i: usize) -> VectorField {
        self.f.get(i).cloned().unwrap_or_else(|| VectorField::zeros(*self.grid()))
    }

    pub fn q_at(&self, i: usize) -> VectorField {
        self.q.get(i).cloned().unwrap_or_else(|| VectorField::zeros(*self.grid()))
    }

    /// Structural checks plus the compatibility conditions
    /// `gamma u0^d = 0`, `g(0) = 0`, `d_t gamma Q^d = 0`.
    pub fn validate(&self) -> Result<()> {
        let g = *self.grid();
        if !(self.mu > 0.0) {
            return Err(Error::InvalidArgument("viscosity must be positive".into()));
        }
        if self.u0.dim() != g.d {
            return Err(Error::InvalidArgument(format!("u0 has {} components, expected {}", self.u0.dim(), g.d)));
        }
        if self.times.is_empty() || self.times[0] != 0.0 {
            return Err(Error::InvalidArgument("time grid must start at 0".into()));
        }
        if self.times.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::InvalidArgument("time grid must be strictly increasing".into()));
        }
        for (name, s) in [("f", &self.f), ("Q", &self.q)] {
            if !s.is_empty() && s.len() != self.times.len() {
                return Err(Error::InvalidArgument(format!("{name} has {} samples for {} times", s.len(), self.times.len())));
            }
            for v in s.iter() {
                if v.grid() != &g || v.dim() != g.d {
                    return Err(Error::GridMismatch);
                }
            }
        }
        if self.u0.comps.iter().any(|c| c.grid() != &g) {
            return Err(Error::GridMismatch);
        }
        let scale = lp_half_vec(&g, &self.u0.samples(), f64::INFINITY).max(1.0);
        let tr = self.u0.vertical().trace().max_abs();
        if tr > self.tol * scale {
            return Err(Error::Compatibility(format!("trace of u0^d is {tr:e}")));
        }
        if !self.q.is_empty() {
            let qscale = self.q.iter().map(|q| lp_half_vec(&g, &q.samples(), f64::INFINITY)).fold(1.0, f64::max);
            let g0 = lp_half(&g, &self.q[0].div().samples(), f64::INFINITY);
            if g0 > self.tol * qscale {
                return Err(Error::Compatibility(format!("g(0) = div Q(0) has size {g0:e}")));
            }
            let tr0 = self.q[0].vertical().trace().samples();
            for q in &self.q[1..] {
                let tr = q.vertical().trace().samples();
                let dev = tr.iter().zip(&tr0).fold(0.0f64, |m, (a, b)| m.max((a - b).abs()));
                if dev > self.tol * qscale {
                    return Err(Error::Compatibility(format!("trace of Q^d changes in time by {dev:e}")));
                }
            }
        }
        Ok(())
    }
}

/// Weights of the second-order three-point derivative at sample `i` of a nonuniform grid.
/// One-sided at the endpoints.
pub fn derivative_weights(t: &[f64], i: usize) -> [(usize, f64); 3] {
    let n = t.len();
    assert!(n >= 3, "need at least three samples");
    let (a, b, c) = if i == 0 {
        (0, 1, 2)
    } else if i == n - 1 {
        (n - 3, n - 2, n - 1)
    } else {
        (i - 1, i, i + 1)
    };
    let x = t[i];
    // derivative of the Lagrange basis at x
    let l = |p: usize, q: usize, r: usize| ((x - t[q]) + (x - t[r])) / ((t[p] - t[q]) * (t[p] - t[r]));
    [(a, l(a, b, c)), (b, l(b, a, c)), (c, l(c, a, b))]
}

/// Time derivative of a sampled scalar series.
pub fn time_derivative(t: &[f64], s: &[SpectralField], i: usize) -> SpectralField {
    let w = derivative_weights(t, i);
    let mut out = s[w[0].0].scale(w[0].1);
    out.axpy(w[1].1, &s[w[1].0]).expect("same grid");
    out.axpy(w[2].1, &s[w[2].0]).expect("same grid");
    out
}

pub fn time_derivative_vec(t: &[f64], s: &[VectorField], i: usize) -> VectorField {
    let d = s[0].dim();
    VectorField::new(
        (0..d)
            .map(|c| {
                let w = derivative_weights(t, i);
                let mut out = s[w[0].0].comps[c].scale(w[0].1);
                out.axpy(w[1].1, &s[w[1].0].comps[c]).expect("same grid");
                out.axpy(w[2].1, &s[w[2].0].comps[c]).expect("same grid");
                out
            })
            .collect(),
    )
}

/// Residual norms of a solution against the system, maximized over sample times.
#[derive(Clone, Debug, Default, Serialize, Deserialize)]
pub struct ResidualReport {
    pub momentum_l2: f64,
    pub momentum_linf: f64,
    pub divergence_l2: f64,
    pub divergence_linf: f64,
    pub trace_l2: f64,
    pub trace_linf: f64,
    pub initial_l2: f64,
    pub initial_linf: f64,
}

pub fn residual(input: &StokesInput, sol: &StokesSolution) -> Result<ResidualReport> {
    if sol.times.len() < 3 {
        return Err(Error::InvalidArgument("residual needs at least three time samples".into()));
    }
    let g = *input.grid();
    let mut rep = ResidualReport::default();
    for i in 0..sol.times.len() {
        let dt = time_derivative_vec(&sol.times, &sol.u, i);
        let f = input.forcing(i);
        let u = &sol.u[i];
        let comps: Vec<Vec<f64>> = (0..g.d)
            .map(|c| {
                let mut r = dt.comps[c].clone();
                r.axpy(-sol.mu, &u.comps[c].laplacian()).expect("same grid");
                r.axpy(1.0, &sol.grad_pi[i].comps[c]).expect("same grid");
                r.axpy(-1.0, &f.comps[c]).expect("same grid");
                r.samples()
            })
            .collect();
        rep.momentum_l2 = rep.momentum_l2.max(lp_half_vec(&g, &comps, 2.0));
        rep.momentum_linf = rep.momentum_linf.max(lp_half_vec(&g, &comps, f64::INFINITY));
        let div = u.div().sub(&input.q_at(i).div()).expect("same grid").samples();
        rep.divergence_l2 = rep.divergence_l2.max(lp_half(&g, &div, 2.0));
        rep.divergence_linf = rep.divergence_linf.max(lp_half(&g, &div, f64::INFINITY));
        let traces: Vec<Vec<f64>> = u.comps.iter().map(|c| c.trace().samples()).collect();
        let n = g.n_hmodes();
        let cell = g.dx().powi(g.d as i32 - 1);
        let tr2 = (0..n).map(|h| traces.iter().map(|t| t[h] * t[h]).sum::<f64>()).sum::<f64>() * cell;
        let trinf = (0..n).map(|h| traces.iter().map(|t| t[h] * t[h]).sum::<f64>().sqrt()).fold(0.0, f64::max);
        rep.trace_l2 = rep.trace_l2.max(tr2.sqrt());
        rep.trace_linf = rep.trace_linf.max(trinf);
    }
    let d0: Vec<Vec<f64>> = sol.u[0].sub(&input.u0)?.samples();
    rep.initial_l2 = lp_half_vec(&g, &d0, 2.0);
    rep.initial_linf = lp_half_vec(&g, &d0, f64::INFINITY);
    Ok(rep)
}

/// JSON manifest accompanying exported solution files.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct SolutionManifest {
    pub times: Vec<f64>,
    pub mu: f64,
    pub grid: SpectralGrid,
    pub provenance: Provenance,
    pub residual: Option<ResidualReport>,
    pub files: Vec<String>,
}

/// Write every time sample as `u_<i>` and `gradpi_<i>` field files plus `manifest.json`.
pub fn export(dir: &std::path::Path, sol: &StokesSolution, residual: Option<ResidualReport>) -> Result<SolutionManifest> {
    use crate::io::{write_field, FieldFile};
    std::fs::create_dir_all(dir)?;
    let mut files = Vec::new();
    for i in 0..sol.times.len() {
        for (name, v) in [("u", &sol.u[i]), ("gradpi", &sol.grad_pi[i])] {
            let stem = format!("{name}_{i:04}");
            write_field(&dir.join(&stem), &FieldFile::from_vector(v))?;
            files.push(stem);
        }
    }
    let m = SolutionManifest {
        times: sol.times.clone(),
        mu: sol.mu,
        grid: *sol.u[0].grid(),
        provenance: sol.provenance,
        residual,
        files,
    };
    let text = serde_json_string(&m)?;
    std::fs::write(dir.join("manifest.json"), text)?;
    Ok(m)
}

fn serde_json_string<T: Serialize>(v: &T) -> Result<String> {
    serde_json::to_string_pretty(v).map_err(|e| Error::Format(e.to_string()))
}
