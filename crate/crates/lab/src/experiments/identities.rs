//! Operator identities on seeded fields, plus harmonic-extension residuals.

use crate::config::Config;
use crate::error::Result;
use crate::output::{Artifacts, Check, Plot, Table};
use crate::setup::GridSpec;
use halfspace::data::{boundary_scalar, random_boundary, rng};
use halfspace::quadrature::lp_norm;
use halfspace::ukai::{identity_residuals, IDENTITY_NAMES};
use rayon::prelude::*;
use serde::Serialize;

#[derive(Clone, Debug, Serialize)]
pub struct Params {
    pub grid: GridSpec,
    pub seed: u64,
    pub fields: usize,
    pub k_max: usize,
    pub modes: usize,
    pub harmonic_fields: usize,
    pub identity_max: f64,
    pub harmonic_max: f64,
}

impl Params {
    pub fn read(cfg: &Config) -> Result<Self> {
        Ok(Params {
            grid: GridSpec::read(cfg, GridSpec { d: 2, n_h: 64, n_z: 64, l_h: 1.0, l_z: 4.0 })?,
            seed: cfg.get("data.seed", 0)?,
            fields: cfg.get("data.count", 20)?,
            k_max: cfg.get("data.k_max", 4)?,
            modes: cfg.get("data.modes", 3)?,
            harmonic_fields: cfg.get("data.harmonic_count", 10)?,
            identity_max: cfg.real("check.identity_max", 1e-9)?,
            harmonic_max: cfg.real("check.harmonic_max", 1e-10)?,
        })
    }

    pub fn run(&self) -> Result<Artifacts> {
        let g = self.grid.build()?;
        let mut art = Artifacts::default();

        // fields with a nonzero trace and normal derivative exercise every identity
        let residuals: Vec<[f64; 6]> = (0..self.fields as u64)
            .into_par_iter()
            .map(|i| identity_residuals(&boundary_scalar(&g, self.k_max, self.modes, &mut rng(self.seed + i))))
            .collect();
        let mut cols = vec!["seed"];
        cols.extend(IDENTITY_NAMES);
        let mut table = Table::new("identities", &cols);
        let mut worst = [0.0f64; 6];
        for (i, r) in residuals.iter().enumerate() {
            let mut row = vec![(self.seed + i as u64).into()];
            row.extend(r.iter().map(|&v| v.into()));
            table.push(row);
            for k in 0..6 {
                worst[k] = worst[k].max(r[k]);
            }
        }
        for (name, w) in IDENTITY_NAMES.iter().zip(worst) {
            art.checks.push(Check::below(format!("identity {name}"), w, self.identity_max));
        }
        art.plots.push(Plot::new(
            "identity_worst",
            "seed",
            "max_residual",
            residuals.iter().enumerate().map(|(i, r)| ((self.seed + i as u64) as f64, r.iter().cloned().fold(0.0, f64::max))).collect(),
        ));
        art.tables.push(table);

        let harmonic: Vec<(f64, f64)> = (0..self.harmonic_fields as u64)
            .into_par_iter()
            .map(|i| {
                let hb = random_boundary(&g, self.k_max, self.modes + 2, &mut rng(self.seed + 1000 + i)).harmonic_extend();
                let n = lp_norm(&hb, 2.0);
                let first = lp_norm(&hb.d_z().add(&hb.dh_abs()).expect("same grid"), 2.0) / n;
                let lap = lp_norm(&hb.laplacian(), 2.0) / n;
                (first, lap)
            })
            .collect();
        let mut table = Table::new("harmonic_extension", &["seed", "first_order", "laplacian"]);
        for (i, (a, b)) in harmonic.iter().enumerate() {
            table.push(vec![(self.seed + 1000 + i as u64).into(), (*a).into(), (*b).into()]);
        }
        art.tables.push(table);
        let first = harmonic.iter().map(|h| h.0).fold(0.0, f64::max);
        let lap = harmonic.iter().map(|h| h.1).fold(0.0, f64::max);
        art.checks.push(Check::below("harmonic (d_d + |D_h|) Hb", first, self.harmonic_max));
        art.checks.push(Check::below("harmonic Delta Hb", lap, self.harmonic_max));

        art.result("params", self)?;
        art.result("worst", IDENTITY_NAMES.iter().zip(worst).map(|(n, w)| (n.to_string(), w)).collect::<Vec<_>>())?;
        Ok(art)
    }
}
