//! Acceptance suite: one PASS/FAIL line per criterion, using the default brackets of each
//! experiment. Exits nonzero when any criterion fails.

use halfspace_lab::config::Config;
use halfspace_lab::experiments::Plan;
use halfspace_lab::output::{Artifacts, Check};
use halfspace_lab::Kind;
use std::fs;
use std::path::Path;
use std::process::{exit, Command};
use std::time::Instant;

fn experiment(kind: Kind, text: &str) -> Result<Artifacts, String> {
    let cfg = Config::parse(text).map_err(|e| e.to_string())?;
    let plan = Plan::read(kind, &cfg).map_err(|e| e.to_string())?;
    cfg.finish().map_err(|e| e.to_string())?;
    plan.run().map_err(|e| e.to_string())
}

fn pick(art: &Result<Artifacts, String>, keep: impl Fn(&str) -> bool) -> Result<Vec<Check>, String> {
    match art {
        Ok(a) => Ok(a.checks.iter().filter(|c| keep(&c.name)).cloned().collect()),
        Err(e) => Err(e.clone()),
    }
}

struct Suite {
    failed: usize,
}

impl Suite {
    fn report(&mut self, id: u32, title: &str, checks: Result<Vec<Check>, String>, secs: f64) {
        let (pass, detail) = match checks {
            Err(e) => (false, format!("error: {e}")),
            Ok(cs) if cs.is_empty() => (false, "no checks produced".into()),
            Ok(cs) => {
                let bad: Vec<String> = cs.iter().filter(|c| !c.pass).map(|c| format!("{} = {:e}", c.name, c.value)).collect();
                if bad.is_empty() {
                    (true, format!("{} check{}", cs.len(), if cs.len() == 1 { "" } else { "s" }))
                } else {
                    (false, format!("failed: {}", bad.join("; ")))
                }
            }
        };
        if !pass {
            self.failed += 1;
        }
        println!("{} criterion {id:2} {title}: {detail} ({secs:.1} s)", if pass { "PASS" } else { "FAIL" });
    }
}

fn files(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let mut out = vec![];
    let mut stack = vec![dir.to_path_buf()];
    while let Some(d) = stack.pop() {
        for e in fs::read_dir(&d).unwrap() {
            let p = e.unwrap().path();
            if p.is_dir() {
                stack.push(p);
            } else {
                out.push((p.strip_prefix(dir).unwrap().display().to_string(), fs::read(&p).unwrap()));
            }
        }
    }
    out.sort();
    out
}

/// Runs the binary twice per config and compares every output byte.
fn determinism() -> Result<Vec<Check>, String> {
    let tmp = tempfile::tempdir().map_err(|e| e.to_string())?;
    let cases = [
        ("identities", "[grid]\nn_h = 32\nn_z = 32\n[data]\ncount = 4\nharmonic_count = 2\n"),
        ("generate", "[data]\nfield = velocity\ngenerator = band-limited-random\nzero_trace = true\nseed = 11\n"),
        ("ins", "[ins]\nrefine_factor = 2\n[grid]\nn_h = 16\nn_z = 16\n[time]\nsteps = 4\n[output]\nfields = true\n"),
    ];
    let mut checks = vec![];
    for (kind, text) in cases {
        let cfg = tmp.path().join(format!("{kind}.ini"));
        fs::write(&cfg, text).map_err(|e| e.to_string())?;
        let mut outputs = vec![];
        for run in ["a", "b"] {
            let out = tmp.path().join(format!("{kind}-{run}"));
            let status = Command::new(env!("CARGO_BIN_EXE_hslab"))
                .args([kind, "--threads", "2", "--config"])
                .arg(&cfg)
                .arg("--out")
                .arg(&out)
                .output()
                .map_err(|e| e.to_string())?;
            if status.status.code() != Some(0) {
                return Err(format!("{kind}: {}{}", String::from_utf8_lossy(&status.stdout), String::from_utf8_lossy(&status.stderr)));
            }
            outputs.push(files(&out));
        }
        checks.push(Check::holds(format!("{kind}: {} files byte-identical", outputs[0].len()), outputs[0] == outputs[1]));
    }
    Ok(checks)
}

fn main() {
    let mut s = Suite { failed: 0 };

    let t = Instant::now();
    let id2 = experiment(Kind::Identities, "");
    let id3 = experiment(Kind::Identities, "[grid]\nd = 3\nn_h = 32\nn_z = 32\n");
    let both = |keep: fn(&str) -> bool| -> Result<Vec<Check>, String> {
        let mut v = pick(&id2, keep)?;
        v.extend(pick(&id3, keep)?);
        Ok(v)
    };
    s.report(1, "operator identities, 20 fields, d = 2 at 64x64 and d = 3 at 32^3", both(|n| n.starts_with("identity ")), t.elapsed().as_secs_f64());
    s.report(2, "harmonic extension, 10 boundary data", both(|n| n.starts_with("harmonic ")), t.elapsed().as_secs_f64());

    let t = Instant::now();
    let stokes = experiment(Kind::Stokes, "");
    let stokes_secs = t.elapsed().as_secs_f64();
    s.report(3, "Stokes manufactured order and free-evolution constraints", pick(&stokes, |n| n.starts_with("manufactured") || n.starts_with("free evolution")), stokes_secs);

    let t = Instant::now();
    s.report(4, "formula vs independent oracle at 64x64 and under refinement", pick(&experiment(Kind::StokesOracle, ""), |_| true), t.elapsed().as_secs_f64());
    s.report(5, "anisotropic free solution", pick(&stokes, |n| n.starts_with("anisotropic")), stokes_secs);

    let t = Instant::now();
    s.report(6, "Besov rescaling, heat characterization and semigroup bracket", pick(&experiment(Kind::Besov, ""), |_| true), t.elapsed().as_secs_f64());

    let t = Instant::now();
    let harness = experiment(Kind::Harness, "");
    s.report(7, "maximal regularity ratios, weights and single-mode closed form", pick(&harness, |n| !n.ends_with("per-mode oracle")), t.elapsed().as_secs_f64());
    s.report(8, "smoothing lemmas and free decay vs per-mode oracles", pick(&harness, |n| n.ends_with("per-mode oracle")), t.elapsed().as_secs_f64());

    let t = Instant::now();
    s.report(9, "flow map series, volume preservation and chain rules", pick(&experiment(Kind::Lagrangian, ""), |_| true), t.elapsed().as_secs_f64());

    let t = Instant::now();
    let ins = pick(&experiment(Kind::Ins, ""), |_| true).and_then(|mut v| {
        v.extend(pick(&experiment(Kind::TwinSolve, ""), |_| true)?);
        Ok(v)
    });
    s.report(10, "nonlinear solve: smallness, contraction, density, weak residuals", ins, t.elapsed().as_secs_f64());

    let t = Instant::now();
    s.report(11, "deterministic reports", determinism(), t.elapsed().as_secs_f64());

    println!("{} of 11 criteria failed", s.failed);
    if s.failed > 0 {
        exit(1);
    }
}
