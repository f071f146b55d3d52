//! Builtin data generators and their constraint bookkeeping.
//!
//! Velocities always come from stream functions with spectral derivatives, so they are
//! divergence-free to rounding and vanish on the wall. Scalars get zero trace from a
//! wall factor `1 - exp(-(z/w)^2)` and mean-freeness from horizontal oscillation or,
//! failing that, mean subtraction.

use crate::config::Config;
use crate::error::{config_err, Context, LabError, Result};
use halfspace::data::{bump, divfree_velocity, interior_scalar, mollify, rng, single_mode};
use halfspace::io::{read_field, FieldFile};
use halfspace::quadrature::{integrate_half, lp_half, lp_half_vec};
use halfspace::{Parity, SpectralField, SpectralGrid, VectorField};
use serde::Serialize;
use std::path::PathBuf;

pub const GENERATORS: [&str; 6] = ["band-limited-random", "single-mode", "gaussian-bump", "mollified-step", "zero", "file"];

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum FieldKind {
    Scalar,
    Velocity,
}

#[derive(Clone, Copy, Debug, Default, Serialize)]
pub struct Constraints {
    pub divergence_free: bool,
    pub zero_trace: bool,
    pub mean_free: bool,
}

#[derive(Clone, Debug, Serialize)]
pub enum Recipe {
    BandLimitedRandom { k_max: usize, count: usize },
    SingleMode { k: [i64; 2], center: f64, width: f64 },
    GaussianBump { center_h: f64, width_h: f64, center: f64, width: f64 },
    MollifiedStep { step_height: f64, n: Vec<f64> },
    Zero,
    File { path: PathBuf },
}

#[derive(Clone, Debug, Serialize)]
pub struct DataSpec {
    pub field: FieldKind,
    pub seed: u64,
    pub amplitude: f64,
    pub recipe: Recipe,
    pub constraints: Constraints,
}

impl DataSpec {
    /// Reads the generator keys under `prefix`; only keys the chosen generator uses are read.
    /// `field` fixes the field kind; `None` lets the config choose it.
    pub fn read(cfg: &Config, prefix: &str, field: Option<FieldKind>, default: &DataSpec, grid: &SpectralGrid) -> Result<Self> {
        let key = |k: &str| format!("{prefix}.{k}");
        let field = match field {
            Some(f) => f,
            None => match cfg.choice(&key("field"), if default.field == FieldKind::Scalar { "scalar" } else { "velocity" }, &["scalar", "velocity"])?.as_str() {
                "scalar" => FieldKind::Scalar,
                _ => FieldKind::Velocity,
            },
        };
        let default_name = recipe_name(&default.recipe);
        let name = cfg.choice(&key("generator"), default_name, &GENERATORS)?;
        let same = name == default_name;
        let seed = cfg.get(&key("seed"), default.seed)?;
        let amplitude = if name == "zero" || name == "file" { default.amplitude } else { cfg.real(&key("amplitude"), default.amplitude)? };
        let (l_h, l_z) = (grid.l_h, grid.l_z);
        let recipe = match name.as_str() {
            "band-limited-random" => {
                let (k0, c0) = match (&default.recipe, same) {
                    (Recipe::BandLimitedRandom { k_max, count }, true) => (*k_max, *count),
                    _ => (3, 3),
                };
                Recipe::BandLimitedRandom { k_max: cfg.get(&key("k_max"), k0)?, count: cfg.get(&key("count"), c0)? }
            }
            "single-mode" => {
                let (k0, c0, w0) = match (&default.recipe, same) {
                    (Recipe::SingleMode { k, center, width }, true) => (*k, *center, *width),
                    _ => ([1, 0], l_z / 2.0, l_z / 8.0),
                };
                let k: Vec<i64> = cfg.list(&key("k"), &k0)?;
                if k.len() != 2 {
                    return config_err(format!("`{}` needs two integers", key("k")));
                }
                let center = if field == FieldKind::Scalar { cfg.real(&key("center"), c0)? } else { c0 };
                Recipe::SingleMode { k: [k[0], k[1]], center, width: cfg.real(&key("width"), w0)? }
            }
            "gaussian-bump" => Recipe::GaussianBump {
                center_h: cfg.real(&key("center_h"), l_h / 2.0)?,
                width_h: cfg.real(&key("width_h"), l_h / 8.0)?,
                center: cfg.real(&key("center"), l_z / 2.0)?,
                width: cfg.real(&key("width"), l_z / 8.0)?,
            },
            "mollified-step" => Recipe::MollifiedStep { step_height: cfg.real(&key("step_height"), l_z / 2.0)?, n: cfg.reals(&key("n"), &[4.0])? },
            "zero" => Recipe::Zero,
            _ => match cfg.opt::<String>(&key("file"))? {
                Some(p) => Recipe::File { path: PathBuf::from(p) },
                None => return config_err(format!("generator `file` needs `{}`", key("file"))),
            },
        };
        let constraints = Constraints {
            divergence_free: cfg.get(&key("divergence_free"), default.constraints.divergence_free)?,
            zero_trace: cfg.get(&key("zero_trace"), default.constraints.zero_trace)?,
            mean_free: cfg.get(&key("mean_free"), default.constraints.mean_free)?,
        };
        let spec = DataSpec { field, seed, amplitude, recipe, constraints };
        spec.admissible()?;
        Ok(spec)
    }

    /// Rejects constraint combinations no recipe can meet.
    pub fn admissible(&self) -> Result<()> {
        let c = self.constraints;
        if self.field == FieldKind::Scalar && c.divergence_free {
            return config_err("divergence_free applies to velocities only");
        }
        match (&self.recipe, self.field) {
            (Recipe::MollifiedStep { n, .. }, _) => {
                if self.field == FieldKind::Velocity {
                    return config_err("mollified-step produces a scalar density");
                }
                if c.zero_trace || c.mean_free {
                    return config_err("a smoothed step is neither mean-free nor zero on the wall");
                }
                if n.is_empty() || n.iter().any(|&v| !(v > 0.0)) {
                    return config_err("smoothing scales must be positive");
                }
            }
            (Recipe::SingleMode { k, .. }, _) if *k == [0, 0] && c.mean_free && (c.zero_trace || self.field == FieldKind::Velocity) => {
                return config_err("a horizontally constant mode cannot be mean-free with a vanishing trace");
            }
            (Recipe::GaussianBump { .. }, FieldKind::Scalar) if c.mean_free && c.zero_trace => {
                return config_err("a positive bump cannot be made mean-free without changing its trace");
            }
            _ => {}
        }
        Ok(())
    }
}

fn recipe_name(r: &Recipe) -> &'static str {
    match r {
        Recipe::BandLimitedRandom { .. } => "band-limited-random",
        Recipe::SingleMode { .. } => "single-mode",
        Recipe::GaussianBump { .. } => "gaussian-bump",
        Recipe::MollifiedStep { .. } => "mollified-step",
        Recipe::Zero => "zero",
        Recipe::File { .. } => "file",
    }
}

#[derive(Clone, Debug)]
pub enum Data {
    Scalar(SpectralField),
    Velocity(VectorField),
}

#[derive(Clone, Debug, Serialize)]
pub struct Diagnostics {
    pub linf: f64,
    pub l2: f64,
    /// Half-space mean of each component.
    pub mean: Vec<f64>,
    pub trace_linf: f64,
    pub div_linf: Option<f64>,
}

#[derive(Clone, Debug)]
pub struct Generated {
    pub data: Data,
    /// Smoothing only: the raw step and the smoothed field at every requested scale.
    pub smoothing: Vec<(f64, Vec<f64>)>,
    pub raw: Option<Vec<f64>>,
}

impl Generated {
    pub fn velocity(self) -> VectorField {
        match self.data {
            Data::Velocity(u) => u,
            Data::Scalar(_) => unreachable!("field kind fixed at config time"),
        }
    }
    pub fn scalar(self) -> SpectralField {
        match self.data {
            Data::Scalar(f) => f,
            Data::Velocity(_) => unreachable!("field kind fixed at config time"),
        }
    }

    pub fn diagnostics(&self) -> Diagnostics {
        match &self.data {
            Data::Scalar(f) => scalar_diagnostics(f),
            Data::Velocity(u) => {
                let g = *u.grid();
                let s = u.samples();
                Diagnostics {
                    linf: lp_half_vec(&g, &s, f64::INFINITY),
                    l2: lp_half_vec(&g, &s, 2.0),
                    mean: s.iter().map(|c| integrate_half(&g, c) / g.volume()).collect(),
                    trace_linf: u.comps.iter().map(|c| c.trace().max_abs()).fold(0.0, f64::max),
                    div_linf: Some(lp_half(&g, &u.div().samples(), f64::INFINITY)),
                }
            }
        }
    }

    pub fn field_file(&self) -> FieldFile {
        match &self.data {
            Data::Scalar(f) => FieldFile::from_scalar(f),
            Data::Velocity(u) => FieldFile::from_vector(u),
        }
    }
}

fn scalar_diagnostics(f: &SpectralField) -> Diagnostics {
    let g = *f.grid();
    let s = f.samples();
    Diagnostics {
        linf: lp_half(&g, &s, f64::INFINITY),
        l2: lp_half(&g, &s, 2.0),
        mean: vec![integrate_half(&g, &s) / g.volume()],
        trace_linf: f.trace().max_abs(),
        div_linf: None,
    }
}

/// Periodic distance on `[0, l)`.
fn wrap(x: f64, l: f64) -> f64 {
    let r = x.rem_euclid(l);
    r.min(l - r)
}

fn wall_factor(z: f64, w: f64) -> f64 {
    1.0 - (-(z / w).powi(2)).exp()
}

/// `u = (d_z a, [0,] -d_1 a)`: divergence-free, and zero on the wall when `a` and `d_z a` are.
fn from_stream(a: &SpectralField) -> VectorField {
    let g = *a.grid();
    let mut comps = vec![a.d_z()];
    if g.d == 3 {
        comps.push(SpectralField::zeros(g));
    }
    comps.push(a.d_h(0).neg());
    VectorField::new(comps)
}

pub fn generate(grid: &SpectralGrid, spec: &DataSpec) -> Result<Generated> {
    let g = *grid;
    let amp = spec.amplitude;
    let c = spec.constraints;
    let mut smoothing = vec![];
    let mut raw = None;
    let data = match (&spec.recipe, spec.field) {
        (Recipe::Zero, FieldKind::Velocity) => Data::Velocity(VectorField::zeros(g)),
        (Recipe::Zero, FieldKind::Scalar) => Data::Scalar(SpectralField::zeros(g)),
        (Recipe::BandLimitedRandom { k_max, count }, FieldKind::Velocity) => Data::Velocity(divfree_velocity(&g, *k_max, *count, &mut rng(spec.seed)).scale(amp)),
        (Recipe::BandLimitedRandom { k_max, count }, FieldKind::Scalar) => Data::Scalar(interior_scalar(&g, *k_max, *count, &mut rng(spec.seed)).scale(amp)),
        (Recipe::SingleMode { k, width, .. }, FieldKind::Velocity) => {
            let w = *width;
            let a = single_mode(&g, *k, Parity::Even, |z| {
                let s = (z / w).powi(2);
                amp * s * (-s).exp()
            });
            Data::Velocity(from_stream(&a))
        }
        (Recipe::SingleMode { k, center, width }, FieldKind::Scalar) => {
            let (cz, w, zt) = (*center, *width, c.zero_trace);
            let f = single_mode(&g, *k, Parity::Raw, |z| amp * bump(z, cz, w) * if zt { wall_factor(z, w) } else { 1.0 });
            Data::Scalar(f)
        }
        (Recipe::GaussianBump { center_h, width_h, center, width }, kind) => {
            let (ch, wh, cz, w) = (*center_h, *width_h, *center, *width);
            let lh = g.l_h;
            let horiz = move |x: [f64; 2]| {
                let r2 = wrap(x[0] - ch, lh).powi(2) + if g.d == 3 { wrap(x[1] - ch, lh).powi(2) } else { 0.0 };
                (-r2 / (wh * wh)).exp()
            };
            if kind == FieldKind::Velocity {
                let a = SpectralField::from_fn(g, Parity::Even, |x, z| amp * horiz(x) * (z / w).powi(2) * bump(z, cz, w));
                Data::Velocity(from_stream(&a))
            } else {
                let zt = c.zero_trace;
                Data::Scalar(SpectralField::from_fn(g, Parity::Raw, |x, z| amp * horiz(x) * bump(z, cz, w) * if zt { wall_factor(z, w) } else { 1.0 }))
            }
        }
        (Recipe::MollifiedStep { step_height, n }, _) => {
            let nzh = g.nz_half();
            let step: Vec<f64> = (0..g.half_len())
                .map(|i| {
                    let x = g.x_h(i / nzh);
                    if x[0] < g.l_h / 2.0 && g.z(i % nzh) < *step_height {
                        amp
                    } else {
                        0.0
                    }
                })
                .collect();
            for &s in n {
                smoothing.push((s, mollify(&g, &step, s).context("smoothing")?));
            }
            let last = smoothing.last().expect("scales checked at config time").1.clone();
            raw = Some(step);
            Data::Scalar(SpectralField::from_samples(g, &last, Parity::Raw).context("smoothing")?)
        }
        (Recipe::File { path }, kind) => {
            let file = read_field(path).context(&format!("reading {}", path.display()))?;
            if file.grid != g {
                return Err(LabError::Config(format!("{}: grid differs from [grid]", path.display())));
            }
            let mut comps = file.to_fields().context("field file")?;
            match (kind, comps.len()) {
                (FieldKind::Scalar, 1) => Data::Scalar(comps.remove(0)),
                (FieldKind::Velocity, n) if n == g.d => Data::Velocity(VectorField::new(comps)),
                (_, n) => return Err(LabError::Config(format!("{}: {n} components do not match the requested field", path.display()))),
            }
        }
    };
    let data = match data {
        Data::Scalar(f) if c.mean_free => {
            let mean = scalar_diagnostics(&f).mean[0];
            let shifted: Vec<f64> = f.samples().iter().map(|v| v - mean).collect();
            Data::Scalar(SpectralField::from_samples(g, &shifted, f.parity()).context("mean subtraction")?)
        }
        other => other,
    };
    Ok(Generated { data, smoothing, raw })
}
