//! Maximal-regularity sweeps and the smoothing/decay checks against per-mode oracles.

use crate::config::Config;
use crate::error::{config_err, Context, Result};
use crate::output::{Artifacts, Check, Plot, Table};
use crate::setup::{drift, uniform, GridSpec};
use halfspace::besov::TimeQuadrature;
use halfspace::data::{random_forcing, rng};
use halfspace::harness::{free_decay_check, lplq_check, maxreg_ratio, FreeDecay};
use halfspace::{Parity, SpectralGrid, WholeField};
use rayon::prelude::*;
use serde::Serialize;
use statrs::function::gamma::gamma;
use std::f64::consts::PI;

/// `||cos||_{L^p}` over a region of volume `vol` (full periods in every direction).
pub fn cos_lp(vol: f64, p: f64) -> f64 {
    (vol * gamma((p + 1.0) / 2.0) / (PI.sqrt() * gamma(p / 2.0 + 1.0))).powf(1.0 / p)
}

fn box_volume(g: &SpectralGrid) -> f64 {
    g.l_h.powi(g.d as i32 - 1) * 2.0 * g.l_z
}

fn cos_mode(g: &SpectralGrid, a: i64, c: i64) -> WholeField {
    let (lh, lz) = (g.l_h, g.l_z);
    WholeField::from_fn(*g, Parity::Raw, |x, z| (2.0 * PI * a as f64 * x[0] / lh + PI * c as f64 * z / lz).cos())
}

/// `(int_0^T (1 - e^{-lam s})^2 ds / T)^{1/2}`: the r = 2 ratio of a steady single mode.
fn closed_form_maxreg(lam: f64, t: f64) -> f64 {
    let i = t - 2.0 * (1.0 - (-lam * t).exp()) / lam + (1.0 - (-2.0 * lam * t).exp()) / (2.0 * lam);
    (i / t).sqrt()
}

#[derive(Clone, Debug, Serialize)]
pub struct Params {
    pub grid: GridSpec,
    pub refine_factor: usize,
    pub t_end: f64,
    pub steps: usize,
    pub seed: u64,
    pub count: usize,
    pub k_max: usize,
    pub modes: usize,
    pub p: f64,
    pub r: f64,
    pub alphas: Vec<f64>,
    pub smoothing_n: Vec<usize>,
    pub maxreg_max: f64,
    pub drift_max: f64,
    pub closed_form_max: f64,
    pub oracle_max: f64,
}

impl Params {
    pub fn read(cfg: &Config) -> Result<Self> {
        let p = Params {
            grid: GridSpec::read(cfg, GridSpec { d: 2, n_h: 32, n_z: 16, l_h: 1.0, l_z: 0.5 })?,
            refine_factor: cfg.get("maxreg.refine_factor", 4)?,
            t_end: cfg.real("time.t_end", 1.0)?,
            steps: cfg.get("time.steps", 200)?,
            seed: cfg.get("data.seed", 0)?,
            count: cfg.get("data.count", 20)?,
            k_max: cfg.get("data.k_max", 6)?,
            modes: cfg.get("data.modes", 4)?,
            p: cfg.real("maxreg.p", 2.0)?,
            r: cfg.real("maxreg.r", 2.0)?,
            alphas: cfg.reals("maxreg.alpha", &[0.0, 0.2, 0.4])?,
            smoothing_n: cfg.list("smoothing.n_h", &[16, 32])?,
            maxreg_max: cfg.real("check.maxreg_max", 5.0)?,
            drift_max: cfg.real("check.drift_max", 0.1)?,
            closed_form_max: cfg.real("check.closed_form_max", 1e-8)?,
            oracle_max: cfg.real("check.oracle_max", 1e-6)?,
        };
        if p.count == 0 || p.steps < 2 || p.smoothing_n.is_empty() || p.smoothing_n.iter().any(|&n| n < 8 || n % 2 != 0) {
            return config_err("harness needs seeds, at least two time steps and even smoothing grids of size >= 8");
        }
        Ok(p)
    }

    pub fn run(&self) -> Result<Artifacts> {
        let mut art = Artifacts::default();
        self.maxreg(&mut art)?;
        self.smoothing(&mut art)?;
        art.result("params", self)?;
        Ok(art)
    }

    fn maxreg(&self, art: &mut Artifacts) -> Result<()> {
        let times = uniform(self.t_end, self.steps);
        let g = self.grid.build()?;
        let gf = self.grid.scaled(self.refine_factor).build()?;
        let ratio = |g: &SpectralGrid, seed: u64, alpha: Option<f64>| -> halfspace::Result<f64> {
            let f = random_forcing(g, &times, self.k_max, self.modes, &mut rng(seed));
            Ok(maxreg_ratio(&times, &f, 1.0, self.p, self.r, self.t_end, alpha)?.ratio)
        };
        let pairs: Vec<(f64, f64)> = (0..self.count as u64)
            .into_par_iter()
            .map(|i| Ok((ratio(&g, self.seed + i, None)?, ratio(&gf, self.seed + i, None)?)))
            .collect::<halfspace::Result<_>>()
            .context("maximal regularity")?;
        let mut table = Table::new("maxreg", &["seed", "ratio_coarse", "ratio_fine", "drift"]);
        for (i, (a, b)) in pairs.iter().enumerate() {
            table.push(vec![(self.seed + i as u64).into(), (*a).into(), (*b).into(), drift(*a, *b).into()]);
        }
        art.tables.push(table);
        let worst = pairs.iter().map(|p| p.0.max(p.1)).fold(0.0, f64::max);
        let worst_drift = pairs.iter().map(|p| drift(p.0, p.1)).fold(0.0, f64::max);
        art.checks.push(Check::below("maximal regularity ratio", worst, self.maxreg_max));
        art.checks.push(Check::below(format!("maximal regularity drift {} -> {}", g.n_h, gf.n_h), worst_drift, self.drift_max));

        let mut table = Table::new("weighted_maxreg", &["alpha", "ratio"]);
        for &alpha in &self.alphas {
            let v = ratio(&g, self.seed, Some(alpha)).context("weighted maximal regularity")?;
            table.push(vec![alpha.into(), v.into()]);
            art.checks.push(Check::within(format!("weighted ratio finite (alpha = {alpha})"), v, Some(0.0), None));
        }
        art.tables.push(table);

        // steady single mode, r = 2
        let g1 = SpectralGrid::new(2, 8, 8, 1.0, 1.0).context("grid")?;
        let mu = 0.5;
        let ts = uniform(1.0, 2000);
        let f = cos_mode(&g1, 1, 0);
        let fs: Vec<WholeField> = ts.iter().map(|_| f.clone()).collect();
        let got = maxreg_ratio(&ts, &fs, mu, 2.0, 2.0, 1.0, None).context("single mode")?.ratio;
        let expect = closed_form_maxreg(mu * (2.0 * PI).powi(2), 1.0);
        art.checks.push(Check::below("single-mode maximal regularity vs closed form", (got / expect - 1.0).abs(), self.closed_form_max));
        art.result("single_mode", (got, expect))?;
        Ok(())
    }

    /// One band: `cos x_1` on a box of horizontal period `2 pi`, so `|xi| = 1`.
    fn smoothing(&self, art: &mut Artifacts) -> Result<()> {
        let mut table = Table::new("smoothing", &["check", "n_h", "parameters", "ratio", "oracle", "relative_error"]);
        let mut worst = std::collections::BTreeMap::<String, f64>::new();
        let mu = 0.7;
        let times: Vec<f64> = (0..30).map(|i| 1e-4 * 1.5f64.powi(i)).collect();
        for &n in &self.smoothing_n {
            let g = SpectralGrid::new(2, n, n / 2, 2.0 * PI, 2.0).context("grid")?;
            let f = cos_mode(&g, 1, 0);
            let vol = box_volume(&g);
            for (gradient, name) in [(false, "lplq"), (true, "lplqgrad")] {
                let (p, q) = (2.0, 4.0);
                let rep = lplq_check(&f, p, q, mu, &times, gradient).context(name)?;
                let delta = rep.exponents[0].1;
                // e^{mu t Delta} cos = e^{-mu t} cos; the gradient has pointwise size |sin|
                let oracle = |t: f64| (mu * t).powf(delta) * (-mu * t).exp() * cos_lp(vol, q) / cos_lp(vol, p);
                let err = rep.series.iter().map(|&(t, v)| (v / oracle(t) - 1.0).abs()).fold(0.0, f64::max);
                let peak = times.iter().map(|&t| oracle(t)).fold(0.0, f64::max);
                table.push(vec![name.into(), n.into(), format!("p={p} q={q} mu={mu}").into(), rep.ratio.into(), peak.into(), err.into()]);
                let w = worst.entry(name.to_string()).or_default();
                *w = w.max(err);
                if n == self.smoothing_n[0] {
                    art.plots.push(Plot::new(name, "t", "ratio", rep.series.clone()));
                }
            }
            for (which, s, p, r) in [(FreeDecay::D1, 0.5, 2.0, 2.0), (FreeDecay::D1, -1.0, 4.0, 1.0), (FreeDecay::D2, 0.0, 2.0, 3.0), (FreeDecay::D3, -0.5, 2.0, 2.0)] {
                let (_, w) = which.exponents(s, r).context(which.name())?;
                // mu^{a} ||t^w e^{-mu t}||_{L^r} = (Gamma(a r) / r^{a r})^{1/r} with a = w + 1/r
                let a = w + 1.0 / r;
                let oracle = (gamma(a * r) / r.powf(a * r)).powf(1.0 / r);
                let rep = free_decay_check(which, &f, s, p, r, 1.0, TimeQuadrature::adapted(&g, 1.0)).context(which.name())?;
                let err = (rep.ratio / oracle - 1.0).abs();
                table.push(vec![which.name().into(), n.into(), format!("s={s} p={p} r={r}").into(), rep.ratio.into(), oracle.into(), err.into()]);
                let e = worst.entry(which.name().to_string()).or_default();
                *e = e.max(err);
            }
        }
        for (name, err) in &worst {
            art.checks.push(Check::below(format!("{name} vs per-mode oracle"), *err, self.oracle_max));
        }
        art.tables.push(table);
        Ok(())
    }
}
