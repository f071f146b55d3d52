//! Writes generated data to `fields/` with constraint diagnostics.

use crate::config::Config;
use crate::error::Result;
use crate::generate::{generate, Constraints, DataSpec, FieldKind, Recipe};
use crate::output::{Artifacts, Check, Table};
use crate::setup::GridSpec;
use halfspace::io::FieldFile;
use halfspace::quadrature::lp_half;
use halfspace::Parity;
use serde::Serialize;

#[derive(Clone, Debug, Serialize)]
pub struct Params {
    pub grid: GridSpec,
    pub data: DataSpec,
    pub constraint_max: f64,
}

impl Params {
    pub fn read(cfg: &Config) -> Result<Self> {
        // interior bumps have width l_z/16, which needs about 64 vertical nodes
        let grid = GridSpec::read(cfg, GridSpec { d: 2, n_h: 32, n_z: 64, l_h: 1.0, l_z: 1.0 })?;
        let default = DataSpec {
            field: FieldKind::Velocity,
            seed: 0,
            amplitude: 1.0,
            recipe: Recipe::BandLimitedRandom { k_max: 3, count: 3 },
            constraints: Constraints::default(),
        };
        Ok(Params {
            data: DataSpec::read(cfg, "data", None, &default, &grid.build()?)?,
            grid,
            constraint_max: cfg.real("check.constraint_max", 1e-10)?,
        })
    }

    pub fn run(&self) -> Result<Artifacts> {
        let g = self.grid.build()?;
        let mut art = Artifacts::default();
        let gen = generate(&g, &self.data)?;
        let diag = gen.diagnostics();
        // constraints are checked relative to the field size
        let size = diag.linf.max(f64::MIN_POSITIVE);
        let c = self.data.constraints;
        if c.divergence_free {
            art.checks.push(Check::below("divergence (relative L^inf)", diag.div_linf.unwrap_or(f64::NAN) / size, self.constraint_max));
        }
        if c.zero_trace {
            art.checks.push(Check::below("trace (relative L^inf)", diag.trace_linf / size, self.constraint_max));
        }
        if c.mean_free {
            let m = diag.mean.iter().map(|v| v.abs()).fold(0.0, f64::max);
            art.checks.push(Check::below("mean (relative)", m / size, self.constraint_max));
        }
        art.fields.push(("data".into(), gen.field_file()));
        if let Some(raw) = &gen.raw {
            let top = lp_half(&g, raw, f64::INFINITY);
            let mut table = Table::new("smoothing", &["n", "linf", "raw_linf", "l1_distance_to_raw"]);
            for (n, s) in &gen.smoothing {
                let linf = lp_half(&g, s, f64::INFINITY);
                let diff: Vec<f64> = s.iter().zip(raw).map(|(a, b)| a - b).collect();
                table.push(vec![(*n).into(), linf.into(), top.into(), lp_half(&g, &diff, 1.0).into()]);
                // a convex combination exceeds the maximum by rounding at most
                art.checks.push(Check::within(format!("smoothed maximum at n = {n}"), linf, None, Some(top * (1.0 + 1e-14))));
                art.fields.push((format!("smoothed_n{n}"), FieldFile { grid: g, parity: Parity::Raw, components: vec![s.clone()] }));
            }
            art.fields.push(("raw".into(), FieldFile { grid: g, parity: Parity::Raw, components: vec![raw.clone()] }));
            art.tables.push(table);
        }
        art.result("params", self)?;
        art.result("diagnostics", &diag)?;
        Ok(art)
    }
}
