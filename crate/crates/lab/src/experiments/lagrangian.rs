//! Flow-map checks: exact termination of the Jacobian series on a nilpotent shear, the
//! geometric tail on a cell flow, volume preservation, and chain-rule convergence.

use crate::config::Config;
use crate::error::{config_err, Context, LabError, Result};
use crate::generate::{generate, Constraints, DataSpec, FieldKind, Recipe};
use crate::output::{Artifacts, Check, Plot, Table};
use crate::setup::{uniform, GridSpec};
use halfspace::data::single_mode;
use halfspace::interp::node;
use halfspace::lagrangian::{integrate_flow, jacobian, jacobian_inverse_series, pull_back, verify_chain_rules, ChainRuleReport, FlowMap, SpaceInterp};
use halfspace::{Parity, SpectralGrid, VectorField};
use serde::Serialize;
use std::f64::consts::PI;

/// `X(t, y) = y + t sigma y_d e_1`: `D_yX - I` is nilpotent.
pub fn shear_flow(g: SpectralGrid, sigma: f64) -> FlowMap {
    let mut flow = FlowMap::identity(g, vec![0.0, 0.5, 1.0]);
    for k in 1..3 {
        let t = flow.times[k];
        for (i, p) in flow.x[k].iter_mut().enumerate() {
            p[0] += t * sigma * node(&g, i)[2];
        }
    }
    flow
}

fn probe_field(g: &SpectralGrid) -> VectorField {
    VectorField::new(vec![
        single_mode(g, [1, 0], Parity::Odd, |z| z.sin() * (-z * z).exp()),
        single_mode(g, [2, 0], Parity::Even, |z| (-z * z).exp()),
    ])
}

#[derive(Clone, Debug, Serialize)]
pub struct Params {
    pub grid: GridSpec,
    pub t_end: f64,
    pub samples: usize,
    pub dt: f64,
    pub velocity: DataSpec,
    pub gamma_target: Option<f64>,
    pub terms: Vec<usize>,
    pub det_n: Vec<usize>,
    pub chain_n: Vec<usize>,
    pub nilpotent_max: f64,
    pub det_max: f64,
    pub chain_ratio_lo: f64,
    pub chain_ratio_hi: f64,
    pub trace_max: f64,
}

impl Params {
    pub fn read(cfg: &Config) -> Result<Self> {
        let grid = GridSpec::read(cfg, GridSpec { d: 2, n_h: 256, n_z: 256, l_h: 2.0 * PI, l_z: PI })?;
        let g = grid.build()?;
        let velocity = DataSpec {
            field: FieldKind::Velocity,
            seed: 0,
            amplitude: 0.065,
            recipe: Recipe::SingleMode { k: [1, 0], center: 0.0, width: PI / 6.0 },
            constraints: Constraints { divergence_free: true, zero_trace: true, mean_free: false },
        };
        let target = cfg.string("lagrangian.gamma_target", "0.5")?;
        let p = Params {
            grid,
            t_end: cfg.real("time.t_end", 1.0)?,
            samples: cfg.get("time.steps", 40)?,
            dt: cfg.real("lagrangian.dt", 0.0125)?,
            velocity: DataSpec::read(cfg, "data", Some(FieldKind::Velocity), &velocity, &g)?,
            gamma_target: if target == "none" { None } else { Some(crate::config::parse_real(&target).ok_or_else(|| LabError::Config("`lagrangian.gamma_target`: number or `none`".into()))?) },
            terms: cfg.list("lagrangian.terms", &[4, 8, 12])?,
            det_n: cfg.list("lagrangian.det_n", &[32, 64, 128])?,
            chain_n: cfg.list("lagrangian.chain_n", &[16, 32, 64])?,
            nilpotent_max: cfg.real("check.nilpotent_max", 1e-12)?,
            det_max: cfg.real("check.det_max", 1e-4)?,
            chain_ratio_lo: cfg.real("check.chain_ratio_lo", 3.5)?,
            chain_ratio_hi: cfg.real("check.chain_ratio_hi", 4.5)?,
            trace_max: cfg.real("check.trace_max", 1e-12)?,
        };
        if p.samples < 1 || !(p.dt > 0.0) || p.chain_n.len() < 2 {
            return config_err("lagrangian needs time samples, a positive dt and two chain-rule grids");
        }
        if let Some(t) = p.gamma_target {
            if !(t > 0.0 && t < 1.0) {
                return config_err("lagrangian.gamma_target must lie in (0, 1)");
            }
        }
        Ok(p)
    }

    fn flow(&self, g: &SpectralGrid, amp_scale: f64) -> Result<(FlowMap, Vec<Vec<Vec<f64>>>)> {
        let times = uniform(self.t_end, self.samples);
        let u = generate(g, &self.velocity)?.velocity().scale(amp_scale);
        let us = vec![u; times.len()];
        let flow = integrate_flow(&times, &us, self.dt, SpaceInterp::Cubic).context("flow map")?;
        let v = pull_back(&flow, &us);
        Ok((flow, v))
    }

    fn gamma(&self, flow: &FlowMap, v: &[Vec<Vec<f64>>]) -> Result<f64> {
        Ok(jacobian_inverse_series(flow, v, self.samples, 1).context("series")?.gamma_l)
    }

    pub fn run(&self) -> Result<Artifacts> {
        let mut art = Artifacts::default();
        let g = self.grid.build()?;

        // nilpotent shear: the series stops after one term
        let gs = SpectralGrid::new(2, 16, 16, 2.0 * PI, PI).context("grid")?;
        let sigma = 0.8;
        let flow = shear_flow(gs, sigma);
        let v: Vec<Vec<Vec<f64>>> = (0..3).map(|_| vec![(0..gs.half_len()).map(|i| sigma * node(&gs, i)[2]).collect(), vec![0.0; gs.half_len()]]).collect();
        let direct = jacobian(&flow, 2).context("shear jacobian")?;
        let series = jacobian_inverse_series(&flow, &v, 2, 12).context("shear series")?;
        art.checks.push(Check::below("nilpotent shear series vs direct inverse", series.distance(&direct.a, 2), self.nilpotent_max));
        art.checks.push(Check::holds("nilpotent shear series stops after one term", series.last_term == 1));

        // cell flow scaled to the requested Lipschitz integral
        let mut scale = 1.0;
        let (mut flow, mut v) = self.flow(&g, scale)?;
        let mut gamma = self.gamma(&flow, &v)?;
        if let Some(target) = self.gamma_target {
            let mut it = 0;
            while (gamma - target).abs() >= 1e-4 {
                if gamma == 0.0 || it == 8 {
                    return Err(LabError::Config(format!("cannot scale the flow to gamma_L = {target} (reached {gamma})")));
                }
                scale *= target / gamma;
                (flow, v) = self.flow(&g, scale)?;
                gamma = self.gamma(&flow, &v)?;
                it += 1;
            }
        }
        let k_last = self.samples;
        let jac = jacobian(&flow, k_last).context("jacobian")?;
        let mut table = Table::new("series", &["K", "distance_direct", "distance_limit", "tail_bound"]);
        let mut plot = vec![];
        for &k in &self.terms {
            let s = jacobian_inverse_series(&flow, &v, k_last, k).context("series")?;
            let bound = gamma.powi(k as i32 + 1) / (1.0 - gamma);
            let dd = s.distance(&jac.a, g.d);
            let dl = s.distance(&s.limit().context("series limit")?, g.d);
            table.push(vec![k.into(), dd.into(), dl.into(), bound.into()]);
            art.checks.push(Check::below(format!("series tail K = {k} (gamma_L = {gamma:.4})"), dd / bound, 1.0));
            plot.push((k as f64, dd));
        }
        art.tables.push(table);
        art.plots.push(Plot::new("series_error", "K", "distance", plot));

        // volume preservation at the configured resolution, plus coarser levels for the trend
        let mut table = Table::new("det_error", &["n_h", "n_z", "max_det_error"]);
        let mut plot = vec![];
        for &n in &self.det_n {
            let gc = SpectralGrid::new(g.d, n, n * g.n_z / g.n_h, g.l_h, g.l_z).context("grid")?;
            let (fc, _) = self.flow(&gc, scale)?;
            let e = jacobian(&fc, k_last).context("jacobian")?.max_det_error();
            table.push(vec![gc.n_h.into(), gc.n_z.into(), e.into()]);
            plot.push((gc.n_h as f64, e));
        }
        let det = jac.max_det_error();
        table.push(vec![g.n_h.into(), g.n_z.into(), det.into()]);
        plot.push((g.n_h as f64, det));
        art.checks.push(Check::below(format!("max |det D_yX - 1| at {}x{}", g.n_h, g.n_z), det, self.det_max));
        art.tables.push(table);
        art.plots.push(Plot::new("det_error", "n_h", "max_det_error", plot));

        // chain rules under the shear, refined by two each time
        let reports: Vec<ChainRuleReport> = self
            .chain_n
            .iter()
            .map(|&n| {
                let gn = SpectralGrid::new(2, n, n, 2.0 * PI, PI).context("grid")?;
                let flow = shear_flow(gn, 0.3);
                let jac = jacobian(&flow, 2).context("shear jacobian")?;
                Ok(verify_chain_rules(&probe_field(&gn), &flow, 2, &jac))
            })
            .collect::<Result<_>>()?;
        let mut table = Table::new("chain_rules", &["n", "gradient", "divergence", "trace"]);
        for (n, r) in self.chain_n.iter().zip(&reports) {
            table.push(vec![(*n).into(), r.gradient.into(), r.divergence.into(), r.trace.into()]);
        }
        art.tables.push(table);
        for (i, w) in reports.windows(2).enumerate() {
            let (a, b) = (self.chain_n[i], self.chain_n[i + 1]);
            art.checks.push(Check::within(format!("chain rule gradient ratio {a} -> {b}"), w[0].gradient / w[1].gradient, Some(self.chain_ratio_lo), Some(self.chain_ratio_hi)));
            art.checks.push(Check::within(format!("chain rule divergence ratio {a} -> {b}"), w[0].divergence / w[1].divergence, Some(self.chain_ratio_lo), Some(self.chain_ratio_hi)));
        }
        let trace = reports.iter().map(|r| r.trace).fold(0.0, f64::max);
        art.checks.push(Check::below("trace identity", trace, self.trace_max));

        art.result("params", self)?;
        art.result("gamma_l", gamma)?;
        art.result("amplitude", self.velocity.amplitude * scale)?;
        art.result("clamped", flow.clamped)?;
        art.result("chain_rules", &reports)?;
        Ok(art)
    }
}
