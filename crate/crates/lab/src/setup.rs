//! Grid and time sections shared by all experiments.

use crate::config::Config;
use crate::error::{config_err, Context, Result};
use crate::output::Table;
use halfspace::harness::{NormLedger, NormSpec};
use halfspace::quadrature::lp_half_vec;
use halfspace::{SpectralGrid, VectorField};
use serde::Serialize;

#[derive(Clone, Copy, Debug, Serialize)]
pub struct GridSpec {
    pub d: usize,
    pub n_h: usize,
    pub n_z: usize,
    pub l_h: f64,
    pub l_z: f64,
}

impl GridSpec {
    /// Reads `[grid]` with the experiment's defaults.
    pub fn read(cfg: &Config, default: GridSpec) -> Result<Self> {
        let spec = GridSpec {
            d: cfg.get("grid.d", default.d)?,
            n_h: cfg.get("grid.n_h", default.n_h)?,
            n_z: cfg.get("grid.n_z", default.n_z)?,
            l_h: cfg.real("grid.l_h", default.l_h)?,
            l_z: cfg.real("grid.l_z", default.l_z)?,
        };
        // surface grid errors at validation time
        spec.build()?;
        Ok(spec)
    }

    pub fn build(&self) -> Result<SpectralGrid> {
        SpectralGrid::new(self.d, self.n_h, self.n_z, self.l_h, self.l_z).context("grid")
    }

    /// Same box with every point count multiplied by `factor`.
    pub fn scaled(&self, factor: usize) -> GridSpec {
        GridSpec { n_h: self.n_h * factor, n_z: self.n_z * factor, ..*self }
    }
}

#[derive(Clone, Copy, Debug, Serialize)]
pub struct TimeSpec {
    pub t_end: f64,
    pub steps: usize,
}

impl TimeSpec {
    pub fn read(cfg: &Config, default: TimeSpec) -> Result<Self> {
        let spec = TimeSpec { t_end: cfg.real("time.t_end", default.t_end)?, steps: cfg.get("time.steps", default.steps)? };
        if !(spec.t_end > 0.0) || spec.steps == 0 {
            return config_err("time.t_end must be positive and time.steps at least 1");
        }
        Ok(spec)
    }

    pub fn times(&self) -> Vec<f64> {
        uniform(self.t_end, self.steps)
    }

    pub fn scaled(&self, factor: usize) -> TimeSpec {
        TimeSpec { steps: self.steps * factor, ..*self }
    }
}

pub fn uniform(t_end: f64, steps: usize) -> Vec<f64> {
    (0..=steps).map(|i| t_end * i as f64 / steps as f64).collect()
}

/// Relative change `|b - a| / |a|`.
pub fn drift(a: f64, b: f64) -> f64 {
    (b - a).abs() / a.abs()
}

/// Relative L^2 distance `||a - b|| / ||b||`; zero when both vanish.
pub fn rel_vec(a: &VectorField, b: &VectorField) -> f64 {
    let g = *a.grid();
    let num = lp_half_vec(&g, &a.sub(b).expect("same grid").samples(), 2.0);
    let den = lp_half_vec(&g, &b.samples(), 2.0);
    if num == 0.0 {
        0.0
    } else {
        num / den
    }
}

pub fn norm_label(spec: &NormSpec) -> String {
    match *spec {
        NormSpec::LrLp { r, p } => format!("L^{r}_t L^{p}_x"),
        NormSpec::LinfBesov { s, p, r } => format!("L^inf_t B^{s}_{{{p},{r}}}"),
        NormSpec::WeightedLrLp { alpha, r, p } => format!("t^{alpha} L^{r}_t L^{p}_x"),
        NormSpec::Xpr { p, r } => format!("X^{{{p},{r}}}"),
    }
}

/// One row per (quantity, norm, T).
pub fn ledger_table(name: &str, ledger: &NormLedger) -> Table {
    let mut t = Table::new(name, &["quantity", "norm", "T", "value"]);
    for row in &ledger.rows {
        t.push(vec![row.quantity.clone().into(), norm_label(&row.spec).into(), row.t.into(), row.value.into()]);
    }
    t
}
