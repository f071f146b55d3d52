//! Besov norms: dyadic scaling, viscosity scaling of the heat characterization, and the
//! semigroup bracket across seeds and resolutions.

use crate::config::Config;
use crate::error::{config_err, Context, Result};
use crate::output::{Artifacts, Check, Plot, Table};
use crate::setup::{drift, GridSpec};
use halfspace::besov::{besov_norm, besov_report, dyadic_rescale, heat_char_norm, semigroup_bracket, BesovIndex, LpBands, TimeQuadrature};
use halfspace::data::{random_whole, rng};
use halfspace::SpectralGrid;
use rayon::prelude::*;
use serde::Serialize;

#[derive(Clone, Debug, Serialize)]
pub struct Params {
    pub grid: GridSpec,
    pub refine_factor: usize,
    pub seed: u64,
    pub count: usize,
    pub k_max: usize,
    pub modes: usize,
    pub rescale_j: Vec<i32>,
    pub mus: Vec<f64>,
    pub p: f64,
    pub r: f64,
    pub drift_seeds: usize,
    pub rescale_max: f64,
    pub mu_flat_max: f64,
    pub bracket_lo: f64,
    pub bracket_hi: f64,
    pub drift_max: f64,
}

impl Params {
    pub fn read(cfg: &Config) -> Result<Self> {
        let p = Params {
            grid: GridSpec::read(cfg, GridSpec { d: 2, n_h: 32, n_z: 16, l_h: 1.0, l_z: 0.5 })?,
            refine_factor: cfg.get("besov.refine_factor", 4)?,
            seed: cfg.get("data.seed", 100)?,
            count: cfg.get("data.count", 20)?,
            k_max: cfg.get("data.k_max", 8)?,
            modes: cfg.get("data.modes", 6)?,
            rescale_j: cfg.list("besov.rescale_j", &[1, 2, -1])?,
            mus: cfg.reals("besov.mu", &[1.0, 0.25, 4.0])?,
            p: cfg.real("besov.p", 2.0)?,
            r: cfg.real("besov.r", 2.0)?,
            drift_seeds: cfg.get("besov.drift_seeds", 3)?,
            rescale_max: cfg.real("check.rescale_max", 1e-6)?,
            mu_flat_max: cfg.real("check.mu_flat_max", 0.01)?,
            bracket_lo: cfg.real("check.bracket_lo", 0.1)?,
            bracket_hi: cfg.real("check.bracket_hi", 10.0)?,
            drift_max: cfg.real("check.drift_max", 0.1)?,
        };
        if p.count == 0 || p.mus.is_empty() || p.refine_factor == 0 {
            return config_err("besov needs at least one seed, one viscosity and a positive refine factor");
        }
        BesovIndex::new(-2.0 / p.r, p.p, p.r).context("besov.p / besov.r")?;
        Ok(p)
    }

    fn field(&self, g: &SpectralGrid, seed: u64) -> halfspace::WholeField {
        random_whole(g, self.k_max, self.modes, &mut rng(seed))
    }

    pub fn run(&self) -> Result<Artifacts> {
        let g = self.grid.build()?;
        let mut art = Artifacts::default();
        let f = self.field(&g, self.seed);

        // dyadic rescaling: ||F(2^j .)|| = 2^{(s - d/p) j} ||F||
        let d = g.d as f64;
        let mut idxs = vec![BesovIndex::new(0.3, 2.0, 2.0), BesovIndex::new(-0.5, 3.0, 1.0), BesovIndex::critical(g.d, 4.0, 1.0)];
        idxs.push(BesovIndex::critical(g.d, 3.0, 2.0));
        let idxs: Vec<BesovIndex> = idxs.into_iter().collect::<halfspace::Result<_>>().context("index")?;
        let mut table = Table::new("dyadic_rescaling", &["s", "p", "r", "j", "norm", "expected", "relative_error"]);
        let mut worst = 0.0f64;
        for idx in &idxs {
            let a = besov_norm(&f, *idx);
            for &j in &self.rescale_j {
                let b = besov_norm(&dyadic_rescale(&f, j).context("rescale")?, *idx);
                let expect = ((idx.s - d / idx.p) * j as f64).exp2() * a;
                let e = (b / expect - 1.0).abs();
                worst = worst.max(e);
                table.push(vec![idx.s.into(), idx.p.into(), idx.r.into(), j.into(), b.into(), expect.into(), e.into()]);
            }
        }
        // the critical index is invariant under lambda F(lambda x) with lambda = 2
        let crit = BesovIndex::critical(g.d, 3.0, 1.0).context("index")?;
        let inv = (besov_norm(&dyadic_rescale(&f, 1).context("rescale")?.scale(2.0), crit) / besov_norm(&f, crit) - 1.0).abs();
        worst = worst.max(inv);
        art.checks.push(Check::below("dyadic rescaling law", worst, self.rescale_max));
        art.tables.push(table);

        // viscosity scaling of the heat characterization
        let idx = BesovIndex::new(-1.0, 2.0, 2.0).context("index")?;
        let mut table = Table::new("viscosity_scaling", &["mu", "heat_norm", "scaled", "tail"]);
        let mut scaled = vec![];
        for &mu in &self.mus {
            let rep = heat_char_norm(&f, idx, mu, TimeQuadrature::adapted(&g, mu)).context("heat characterization")?;
            let v = rep.value * mu.powf(-idx.s / 2.0);
            table.push(vec![mu.into(), rep.value.into(), v.into(), rep.tail.into()]);
            scaled.push(v);
        }
        let flat = scaled.iter().map(|v| (v / scaled[0] - 1.0).abs()).fold(0.0, f64::max);
        art.checks.push(Check::below("heat characterization mu-scaling", flat, self.mu_flat_max));
        art.tables.push(table);

        // semigroup bracket across seeds and one refinement
        let (p, r) = (self.p, self.r);
        let coarse: Vec<f64> = (0..self.count as u64)
            .into_par_iter()
            .map(|i| {
                let f = self.field(&g, self.seed + i);
                semigroup_bracket(&f, p, r, 1.0, TimeQuadrature::adapted(&g, 1.0))
            })
            .collect::<halfspace::Result<_>>()
            .context("semigroup bracket")?;
        let gf = self.grid.scaled(self.refine_factor).build()?;
        let fine: Vec<f64> = (0..self.drift_seeds.min(self.count) as u64)
            .map(|i| semigroup_bracket(&self.field(&gf, self.seed + i), p, r, 1.0, TimeQuadrature::adapted(&gf, 1.0)))
            .collect::<halfspace::Result<_>>()
            .context("semigroup bracket (refined)")?;
        let mut table = Table::new("semigroup_bracket", &["seed", "n_h", "bracket"]);
        for (i, b) in coarse.iter().enumerate() {
            table.push(vec![(self.seed + i as u64).into(), g.n_h.into(), (*b).into()]);
        }
        for (i, b) in fine.iter().enumerate() {
            table.push(vec![(self.seed + i as u64).into(), gf.n_h.into(), (*b).into()]);
        }
        art.tables.push(table);
        let lo = coarse.iter().chain(&fine).cloned().fold(f64::INFINITY, f64::min);
        let hi = coarse.iter().chain(&fine).cloned().fold(0.0, f64::max);
        art.checks.push(Check::within("semigroup bracket (smallest)", lo, Some(self.bracket_lo), Some(self.bracket_hi)));
        art.checks.push(Check::within("semigroup bracket (largest)", hi, Some(self.bracket_lo), Some(self.bracket_hi)));
        let worst_drift = fine.iter().zip(&coarse).map(|(b, a)| drift(*a, *b)).fold(0.0, f64::max);
        art.checks.push(Check::below(format!("semigroup bracket drift {} -> {}", g.n_h, gf.n_h), worst_drift, self.drift_max));

        let rep = besov_report(&f, crit, LpBands::for_grid(&g));
        art.plots.push(Plot::new("band_norms", "k", "block_lp_norm", rep.band_norms.iter().map(|&(k, v)| (k as f64, v)).collect()));
        art.result("params", self)?;
        art.result("critical_norm", &rep)?;
        Ok(art)
    }
}
