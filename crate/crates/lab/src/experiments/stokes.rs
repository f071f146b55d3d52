//! Stokes solves: manufactured-solution convergence, free evolution residuals, the
//! anisotropic free-solution route, and the cross-check against the projection oracle.

use crate::config::Config;
use crate::error::{Context, Result};
use crate::generate::{generate, Constraints, DataSpec, FieldKind, Recipe};
use crate::output::{Artifacts, Check, Plot, Table};
use crate::setup::{ledger_table, rel_vec, GridSpec, TimeSpec};
use halfspace::harness::{xpr_norm, NormLedger};
use halfspace::io::FieldFile;
use halfspace::quadrature::lp_half_vec;
use halfspace::stokes::mms::manufactured;
use halfspace::stokes::{free_horizontal, oracle_solve, residual, solve_stokes, OracleOptions, StokesInput};
use halfspace::{SpectralGrid, VectorField};
use serde::Serialize;

fn default_velocity() -> DataSpec {
    DataSpec {
        field: FieldKind::Velocity,
        seed: 1,
        amplitude: 1.0,
        recipe: Recipe::BandLimitedRandom { k_max: 3, count: 3 },
        constraints: Constraints { divergence_free: true, zero_trace: true, mean_free: false },
    }
}

fn max_rel(a: &[VectorField], b: &[VectorField]) -> f64 {
    a.iter().zip(b).map(|(x, y)| rel_vec(x, y)).fold(0.0, f64::max)
}

#[derive(Clone, Debug, Serialize)]
pub struct Params {
    pub grid: GridSpec,
    pub time: TimeSpec,
    pub mu: f64,
    pub mms_seed: u64,
    pub with_q: bool,
    pub data: DataSpec,
    pub p: f64,
    pub r: f64,
    pub write_fields: bool,
    pub order_min: f64,
    pub div_max: f64,
    pub trace_max: f64,
    pub free_max: f64,
}

impl Params {
    pub fn read(cfg: &Config) -> Result<Self> {
        let grid = GridSpec::read(cfg, GridSpec { d: 2, n_h: 64, n_z: 64, l_h: 1.0, l_z: 4.0 })?;
        let g = grid.build()?;
        Ok(Params {
            grid,
            time: TimeSpec::read(cfg, TimeSpec { t_end: 0.5, steps: 64 })?,
            mu: cfg.real("stokes.mu", 1.0)?,
            mms_seed: cfg.get("stokes.mms_seed", 3)?,
            with_q: cfg.get("stokes.with_q", false)?,
            data: DataSpec::read(cfg, "data", Some(FieldKind::Velocity), &default_velocity(), &g)?,
            p: cfg.real("norms.p", 2.0)?,
            r: cfg.real("norms.r", 2.0)?,
            write_fields: cfg.get("output.fields", false)?,
            order_min: cfg.real("check.order_min", 3.5)?,
            div_max: cfg.real("check.div_max", 1e-8)?,
            trace_max: cfg.real("check.trace_max", 1e-8)?,
            free_max: cfg.real("check.free_max", 1e-8)?,
        })
    }

    pub fn run(&self) -> Result<Artifacts> {
        let g = self.grid.build()?;
        let mut art = Artifacts::default();

        // manufactured solution at two step sizes
        let mut mms = Table::new("mms", &["steps", "dt", "u_error", "grad_pi_error"]);
        let mut errs = vec![];
        let mut fine_profile = vec![];
        for factor in [1, 2] {
            let ts = self.time.scaled(factor);
            let m = manufactured(&g, self.mu, &ts.times(), self.mms_seed, self.with_q);
            let sol = solve_stokes(&m.input).context("manufactured solve")?;
            let eu = max_rel(&sol.u, &m.u);
            let ep = max_rel(&sol.grad_pi, &m.grad_pi);
            mms.push(vec![ts.steps.into(), (ts.t_end / ts.steps as f64).into(), eu.into(), ep.into()]);
            errs.push(eu);
            fine_profile = sol.times.iter().zip(sol.u.iter().zip(&m.u)).map(|(&t, (a, b))| (t, rel_vec(a, b))).collect();
        }
        let order = errs[0] / errs[1];
        art.checks.push(Check::above("manufactured error ratio under dt/2", order, self.order_min));
        art.tables.push(mms);
        art.plots.push(Plot::new("mms_error", "t", "relative_l2_error", fine_profile));

        // free evolution: f = 0, g = 0, admissible u0
        let u0 = generate(&g, &self.data)?.velocity();
        let times = self.time.times();
        let input = StokesInput::new(self.mu, u0.clone(), times.clone());
        let sol = solve_stokes(&input).context("free evolution")?;
        let res = residual(&input, &sol).context("residual")?;
        art.checks.push(Check::below("free evolution divergence (L^inf)", res.divergence_linf, self.div_max));
        art.checks.push(Check::below("free evolution trace (L^inf)", res.trace_linf, self.trace_max));
        let alt = free_horizontal(&u0, self.mu, &times, 1e-8).context("anisotropic free solution")?;
        let mut free = Table::new("free_horizontal", &["t", "relative_l2_distance"]);
        let mut worst = 0.0f64;
        for (i, a) in alt.iter().enumerate() {
            let e = rel_vec(&VectorField::new(a.clone()), &VectorField::new(sol.u[i].horizontal().to_vec()));
            free.push(vec![times[i].into(), e.into()]);
            worst = worst.max(e);
        }
        art.checks.push(Check::below("anisotropic free solution vs formula", worst, self.free_max));
        art.tables.push(free);
        art.plots.push(Plot::new(
            "free_energy",
            "t",
            "l2_norm",
            sol.times.iter().zip(&sol.u).map(|(&t, u)| (t, lp_half_vec(&g, &u.samples(), 2.0))).collect(),
        ));

        let mut ledger = NormLedger::default();
        xpr_norm(&sol, self.p, self.r, self.time.t_end).context("solution norm")?.record(&mut ledger, self.p, self.r, self.time.t_end);
        art.tables.push(ledger_table("ledger", &ledger));
        if self.write_fields {
            art.fields.push(("u0".into(), FieldFile::from_vector(&u0)));
            art.fields.push(("u_final".into(), FieldFile::from_vector(sol.u.last().expect("nonempty"))));
        }
        art.result("params", self)?;
        art.result("mms_errors", &errs)?;
        art.result("residual", &res)?;
        art.result("ledger", &ledger)?;
        Ok(art)
    }
}

// ---------------------------------------------------------------------------

#[derive(Clone, Debug, Serialize)]
pub enum OracleData {
    Manufactured { seed: u64 },
    Generated(DataSpec),
}

#[derive(Clone, Debug, Serialize)]
pub struct OracleParams {
    pub grid: GridSpec,
    pub time: TimeSpec,
    pub mu: f64,
    pub substeps: usize,
    pub refine: bool,
    pub data: OracleData,
    pub distance_max: f64,
}

impl OracleParams {
    pub fn read(cfg: &Config) -> Result<Self> {
        let grid = GridSpec::read(cfg, GridSpec { d: 2, n_h: 64, n_z: 64, l_h: 1.0, l_z: 4.0 })?;
        let g = grid.build()?;
        let data = if cfg.string("data.generator", "manufactured")? == "manufactured" {
            OracleData::Manufactured { seed: cfg.get("data.seed", 7)? }
        } else {
            OracleData::Generated(DataSpec::read(cfg, "data", Some(FieldKind::Velocity), &default_velocity(), &g)?)
        };
        Ok(OracleParams {
            grid,
            time: TimeSpec::read(cfg, TimeSpec { t_end: 0.5, steps: 64 })?,
            mu: cfg.real("stokes.mu", 1.0)?,
            substeps: cfg.get("oracle.substeps", 2)?,
            refine: cfg.get("oracle.refine", true)?,
            data,
            distance_max: cfg.real("check.distance_max", 0.02)?,
        })
    }

    fn input(&self, g: &SpectralGrid, ts: &TimeSpec) -> Result<StokesInput> {
        Ok(match &self.data {
            OracleData::Manufactured { seed } => manufactured(g, self.mu, &ts.times(), *seed, false).input,
            OracleData::Generated(spec) => StokesInput::new(self.mu, generate(g, spec)?.velocity(), ts.times()),
        })
    }

    /// Formula-vs-oracle relative distance at the final time.
    fn distance(&self, factor: usize) -> Result<(f64, Vec<(f64, f64)>)> {
        let g = self.grid.scaled(factor).build()?;
        let ts = self.time.scaled(factor);
        let input = self.input(&g, &ts)?;
        let f = solve_stokes(&input).context("formula solve")?;
        let o = oracle_solve(&input, OracleOptions { substeps: self.substeps }).context("oracle solve")?;
        let profile: Vec<(f64, f64)> = f.times.iter().zip(f.u.iter().zip(&o.u)).map(|(&t, (a, b))| (t, rel_vec(b, a))).collect();
        Ok((profile.last().expect("nonempty").1, profile))
    }

    pub fn run(&self) -> Result<Artifacts> {
        let mut art = Artifacts::default();
        let mut table = Table::new("oracle_distance", &["n_h", "n_z", "steps", "relative_l2_distance"]);
        let levels: &[usize] = if self.refine { &[1, 2] } else { &[1] };
        let mut dists = vec![];
        for &f in levels {
            let (d, profile) = self.distance(f)?;
            let gs = self.grid.scaled(f);
            table.push(vec![gs.n_h.into(), gs.n_z.into(), self.time.scaled(f).steps.into(), d.into()]);
            art.plots.push(Plot::new(&format!("oracle_distance_n{}", gs.n_h), "t", "relative_l2_distance", profile));
            dists.push(d);
        }
        art.checks.push(Check::below("formula vs oracle (final time)", dists[0], self.distance_max));
        if self.refine {
            // identically zero data stays at zero distance
            let ratio = if dists[1] == 0.0 { 0.0 } else { dists[1] / dists[0] };
            art.checks.push(Check::below("oracle distance ratio under refinement", ratio, 1.0));
        }
        art.tables.push(table);
        art.result("params", self)?;
        art.result("distances", &dists)?;
        Ok(art)
    }
}
