//! Nonlinear iteration: contraction, density bounds, weak residuals, and the twin-solve
//! probe comparing the same data at several resolutions.

use crate::config::Config;
use crate::error::{config_err, Context, Result};
use crate::generate::{generate, Constraints, DataSpec, FieldKind, Recipe};
use crate::output::{Artifacts, Check, Plot, Table};
use crate::setup::{ledger_table, GridSpec, TimeSpec};
use halfspace::ins::{critical_p, run_ins, standard_tests, weak_residual, InsOptions, InsProblem, InsRun, WeakResidual};
use halfspace::io::FieldFile;
use halfspace::quadrature::{lp_half, lp_half_vec};
use halfspace::SpectralGrid;
use serde::Serialize;
use std::f64::consts::PI;

#[derive(Clone, Debug, Serialize)]
pub struct InsSetup {
    pub grid: GridSpec,
    pub time: TimeSpec,
    pub mu: f64,
    pub r: f64,
    pub options: InsOptions,
    pub velocity: DataSpec,
    pub density: DataSpec,
}

impl InsSetup {
    pub fn read(cfg: &Config, default_n: usize) -> Result<Self> {
        let grid = GridSpec::read(cfg, GridSpec { d: 2, n_h: default_n, n_z: default_n, l_h: 2.0 * PI, l_z: PI })?;
        let g = grid.build()?;
        let seed: u64 = cfg.get("data.seed", 0)?;
        let velocity = DataSpec {
            field: FieldKind::Velocity,
            seed,
            amplitude: 1e-3,
            recipe: Recipe::SingleMode { k: [1, 0], center: 0.0, width: PI / 6.0 },
            constraints: Constraints { divergence_free: true, zero_trace: true, mean_free: false },
        };
        let density = DataSpec {
            field: FieldKind::Scalar,
            seed: seed + 1,
            amplitude: 0.01,
            recipe: Recipe::SingleMode { k: [1, 0], center: 1.0, width: 0.6 },
            constraints: Constraints::default(),
        };
        let d = InsOptions::default();
        let options = InsOptions {
            c0: cfg.real("ins.c0", d.c0)?,
            c1: cfg.real("ins.c1", d.c1)?,
            lambda: cfg.real("ins.lambda", d.lambda)?,
            p_tilde: cfg.opt::<String>("ins.p_tilde")?.map(|s| crate::config::parse_real(&s).ok_or_else(|| crate::error::LabError::Config("`ins.p_tilde`: not a number".into()))).transpose()?,
            inner_tol: cfg.real("ins.inner_tol", d.inner_tol)?,
            inner_max: cfg.get("ins.inner_max", d.inner_max)?,
            outer_tol: cfg.real("ins.outer_tol", d.outer_tol)?,
            outer_max: cfg.get("ins.outer_max", d.outer_max)?,
        };
        let setup = InsSetup {
            grid,
            time: TimeSpec::read(cfg, TimeSpec { t_end: 0.5, steps: (default_n / 4).max(2) })?,
            mu: cfg.real("ins.mu", 1.0)?,
            r: cfg.real("ins.r", 2.0)?,
            options,
            velocity: DataSpec::read(cfg, "data", Some(FieldKind::Velocity), &velocity, &g)?,
            density: DataSpec::read(cfg, "density", Some(FieldKind::Scalar), &density, &g)?,
        };
        if setup.time.steps < 2 || !(setup.r > 1.0) {
            return config_err("the iteration needs time.steps >= 2 and ins.r > 1");
        }
        Ok(setup)
    }

    pub fn p(&self) -> f64 {
        critical_p(self.grid.d, self.r)
    }

    /// The same data sampled on a grid and time step refined by `factor`.
    pub fn problem(&self, factor: usize) -> Result<InsProblem> {
        let g = self.grid.scaled(factor).build()?;
        Ok(InsProblem {
            a0: generate(&g, &self.density)?.scalar().samples(),
            u0: generate(&g, &self.velocity)?.velocity(),
            mu: self.mu,
            times: self.time.scaled(factor).times(),
        })
    }

    pub fn solve(&self, factor: usize) -> Result<(InsProblem, InsRun)> {
        let pr = self.problem(factor)?;
        let run = run_ins(&pr, self.p(), self.r, &self.options).context(&format!("iteration at refinement x{factor}"))?;
        Ok((pr, run))
    }
}

/// Largest Picard ratio for `n >= 2` and largest relative density drift over all iterates.
fn contraction_and_bounds(pr: &InsProblem, run: &InsRun) -> (f64, f64) {
    let a0 = lp_half(pr.grid(), &pr.a0, f64::INFINITY);
    let ratio = run.history.iter().filter(|h| h.n >= 2).filter_map(|h| h.ratio).fold(0.0, f64::max);
    let drift = if a0 == 0.0 {
        run.history.iter().map(|h| h.step.a_linf).fold(0.0, f64::max)
    } else {
        run.history.iter().map(|h| ((h.step.a_linf - a0).abs()).max((h.step.a_linf_min - a0).abs()) / a0).fold(0.0, f64::max)
    };
    (ratio, drift)
}

fn history_table(name: &str, run: &InsRun) -> Table {
    let mut t = Table::new(name, &["n", "diff", "ratio", "inner_passes", "a_linf", "a_linf_min", "div_linf"]);
    for h in &run.history {
        t.push(vec![h.n.into(), h.diff.into(), h.ratio.unwrap_or(f64::NAN).into(), h.step.inner_passes.into(), h.step.a_linf.into(), h.step.a_linf_min.into(), h.step.div_linf.into()]);
    }
    t
}

/// `fine / coarse`, or zero when both sit at rounding level.
fn decrease(coarse: f64, fine: f64, floor: f64) -> f64 {
    if coarse <= floor && fine <= floor {
        0.0
    } else {
        fine / coarse
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct Params {
    pub setup: InsSetup,
    pub refine_factor: usize,
    pub weak_t_cut: f64,
    pub weak_z_cut: f64,
    pub write_fields: bool,
    pub contraction_max: f64,
    pub density_drift_max: f64,
    pub weak_ratio_max: f64,
}

impl Params {
    pub fn read(cfg: &Config) -> Result<Self> {
        let setup = InsSetup::read(cfg, 32)?;
        let t_end = setup.time.t_end;
        Ok(Params {
            refine_factor: cfg.get("ins.refine_factor", 2)?,
            weak_t_cut: cfg.real("ins.weak_t_cut", t_end)?,
            weak_z_cut: cfg.real("ins.weak_z_cut", 2.0)?,
            write_fields: cfg.get("output.fields", false)?,
            contraction_max: cfg.real("check.contraction_max", 0.5)?,
            density_drift_max: cfg.real("check.density_drift_max", 1e-3)?,
            weak_ratio_max: cfg.real("check.weak_ratio_max", 1.0)?,
            setup,
        })
    }

    pub fn run(&self) -> Result<Artifacts> {
        let mut art = Artifacts::default();
        let s = &self.setup;
        let tests = standard_tests(s.grid.d, self.weak_t_cut, self.weak_z_cut);
        let mut weak: Vec<WeakResidual> = vec![];
        for (level, factor) in [1, self.refine_factor].into_iter().enumerate() {
            let (pr, run) = s.solve(factor)?;
            let n = s.grid.scaled(factor).n_h;
            if level == 0 {
                art.checks.push(Check::holds("smallness verdict", run.smallness.verdict));
            }
            art.checks.push(Check::holds(format!("iteration converged (n = {n})"), run.converged));
            let (ratio, drift) = contraction_and_bounds(&pr, &run);
            art.checks.push(Check::below(format!("Picard ratio for n >= 2 (n_h = {n})"), ratio, self.contraction_max));
            art.checks.push(Check::below(format!("density L^inf drift (n_h = {n})"), drift, self.density_drift_max));
            art.tables.push(history_table(&format!("history_n{n}"), &run));
            weak.push(weak_residual(&run.trajectory, &pr.a0, &pr.u0, &tests).context("weak residual")?);
            if level == 0 {
                let g = *pr.grid();
                let tr = &run.trajectory;
                art.tables.push(ledger_table("ledger", &run.ledger));
                art.plots.push(Plot::new("picard_diff", "n", "x_norm_change", run.history.iter().map(|h| (h.n as f64, h.diff)).collect()));
                art.plots.push(Plot::new("density_linf", "t", "a_linf", tr.times.iter().zip(&tr.a).map(|(&t, a)| (t, lp_half(&g, a, f64::INFINITY))).collect()));
                art.plots.push(Plot::new("velocity_l2", "t", "u_l2", tr.times.iter().zip(&tr.u).map(|(&t, u)| (t, lp_half_vec(&g, &u.samples(), 2.0))).collect()));
                if let Some(last) = run.history.last() {
                    let hl = &last.h_lambda;
                    art.plots.push(Plot::new("h_lambda", "t", "weight", tr.times.iter().cloned().zip(hl.single.iter().cloned()).collect()));
                }
                if self.write_fields {
                    art.fields.push(("u_final".into(), FieldFile::from_vector(tr.u.last().expect("nonempty"))));
                    art.fields.push(("a_final".into(), FieldFile { grid: g, parity: halfspace::Parity::Raw, components: vec![tr.a.last().expect("nonempty").clone()] }));
                }
                art.result("smallness", &run.smallness)?;
                art.result("history", &run.history)?;
            }
        }
        let mut table = Table::new("weak_residuals", &["n_h", "transport", "divergence", "momentum"]);
        for (w, f) in weak.iter().zip([1, self.refine_factor]) {
            table.push(vec![s.grid.scaled(f).n_h.into(), w.transport.into(), w.divergence.into(), w.momentum.into()]);
        }
        art.tables.push(table);
        let (c, f) = (&weak[0], &weak[1]);
        art.checks.push(Check::below("weak transport residual ratio under refinement", decrease(c.transport, f.transport, 1e-14), self.weak_ratio_max));
        art.checks.push(Check::below("weak momentum residual ratio under refinement", decrease(c.momentum, f.momentum, 1e-14), self.weak_ratio_max));
        art.checks.push(Check::below("weak divergence residual ratio under refinement", decrease(c.divergence, f.divergence, 1e-12), self.weak_ratio_max));
        art.result("params", self)?;
        art.result("weak", &weak)?;
        Ok(art)
    }
}

// ---------------------------------------------------------------------------

/// Samples of a fine-grid field at the nodes of a coarser grid on the same box.
pub fn restrict(fine: &[f64], gf: &SpectralGrid, gc: &SpectralGrid) -> Vec<f64> {
    let (fh, fz) = (gf.n_h / gc.n_h, gf.n_z / gc.n_z);
    let (nzf, nzc) = (gf.nz_half(), gc.nz_half());
    let mut out = Vec::with_capacity(gc.half_len());
    for h in 0..gc.half_len() / nzc {
        let [i0, i1] = gc.h_multi(h);
        let hf = gf.h_index([i0 * fh, i1 * fh]);
        for j in 0..nzc {
            out.push(fine[hf * nzf + j * fz]);
        }
    }
    out
}

#[derive(Clone, Debug, Serialize)]
pub struct TwinParams {
    pub setup: InsSetup,
    pub levels: usize,
    pub ratio_max: f64,
}

impl TwinParams {
    pub fn read(cfg: &Config) -> Result<Self> {
        let p = TwinParams { setup: InsSetup::read(cfg, 16)?, levels: cfg.get("twin.levels", 3)?, ratio_max: cfg.real("check.distance_ratio_max", 1.0)? };
        if p.levels < 3 {
            return config_err("twin.levels must be at least 3 to see a trend");
        }
        Ok(p)
    }

    pub fn run(&self) -> Result<Artifacts> {
        let s = &self.setup;
        let mut art = Artifacts::default();
        let gc = s.grid.build()?;
        let base_times = s.time.times();
        // velocity and density at the coarse nodes and coarse times
        let mut sols: Vec<(Vec<Vec<Vec<f64>>>, Vec<Vec<f64>>)> = vec![];
        for level in 0..self.levels {
            let factor = 1 << level;
            let (pr, run) = s.solve(factor)?;
            let gf = *pr.grid();
            let tr = &run.trajectory;
            let u: Vec<Vec<Vec<f64>>> = (0..base_times.len()).map(|k| tr.u[k * factor].samples().iter().map(|c| restrict(c, &gf, &gc)).collect()).collect();
            let a: Vec<Vec<f64>> = (0..base_times.len()).map(|k| restrict(&tr.a[k * factor], &gf, &gc)).collect();
            art.checks.push(Check::holds(format!("iteration converged (n_h = {})", gf.n_h), run.converged));
            sols.push((u, a));
        }
        let mut table = Table::new("twin_distance", &["n_h_coarse", "n_h_fine", "velocity_distance", "density_distance"]);
        let mut dists = vec![];
        for w in sols.windows(2) {
            let (u0, a0) = &w[0];
            let (u1, a1) = &w[1];
            let mut du = 0.0f64;
            let mut da = 0.0f64;
            for k in 0..base_times.len() {
                let diff: Vec<Vec<f64>> = u0[k].iter().zip(&u1[k]).map(|(x, y)| x.iter().zip(y).map(|(p, q)| p - q).collect()).collect();
                let size = lp_half_vec(&gc, &u1[k], 2.0);
                if size > 0.0 {
                    du = du.max(lp_half_vec(&gc, &diff, 2.0) / size);
                }
                let diff: Vec<f64> = a0[k].iter().zip(&a1[k]).map(|(p, q)| p - q).collect();
                let size = lp_half(&gc, &a1[k], 2.0);
                if size > 0.0 {
                    da = da.max(lp_half(&gc, &diff, 2.0) / size);
                }
            }
            dists.push((du, da));
        }
        for (i, (du, da)) in dists.iter().enumerate() {
            table.push(vec![(s.grid.n_h << i).into(), (s.grid.n_h << (i + 1)).into(), (*du).into(), (*da).into()]);
        }
        art.tables.push(table);
        for w in dists.windows(2) {
            let v = decrease(w[0].0, w[1].0, 0.0);
            art.checks.push(Check::below("velocity distance ratio between successive pairs", v, self.ratio_max));
            let a = decrease(w[0].1, w[1].1, 0.0);
            art.checks.push(Check::below("density distance ratio between successive pairs", a, self.ratio_max));
        }
        art.plots.push(Plot::new("twin_velocity_distance", "n_h", "distance", dists.iter().enumerate().map(|(i, d)| ((s.grid.n_h << (i + 1)) as f64, d.0)).collect()));
        art.result("params", self)?;
        art.result("distances", &dists)?;
        Ok(art)
    }
}
