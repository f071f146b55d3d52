use std::fs;
use clap::ValueEnum;
use halfspace_lab::config::Config;
use halfspace_lab::experiments::Plan;
use halfspace_lab::Kind;
use std::path::Path;
use std::process::{Command, Output};

fn hslab(kind: &str, config: &str, dir: &Path, extra: &[&str]) -> Output {
    let cfg = dir.join(format!("{kind}.ini"));
    fs::write(&cfg, config).unwrap();
    Command::new(env!("CARGO_BIN_EXE_hslab"))
        .arg(kind)
        .arg("--config")
        .arg(&cfg)
        .args(extra)
        .env_remove("HSLAB_THREADS")
        .output()
        .unwrap()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

#[test]
fn unknown_keys_fail_before_any_output() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("out");
    let o = hslab("besov", "kind = besov\n[grid]\nn_hh = 4\n", dir.path(), &["--out", out.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("grid.n_hh"), "{}", stderr(&o));
    assert!(!out.exists());
}

#[test]
fn keys_of_an_unused_generator_are_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let o = hslab("generate", "[data]\ngenerator = zero\nk_max = 3\n", dir.path(), &["--out", dir.path().join("o").to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("data.k_max"), "{}", stderr(&o));
}

#[test]
fn kind_mismatch_is_an_error() {
    let dir = tempfile::tempdir().unwrap();
    let o = hslab("besov", "kind = stokes\n", dir.path(), &["--out", dir.path().join("o").to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("stokes"));
}

#[test]
fn invalid_values_and_thread_counts_are_errors() {
    let dir = tempfile::tempdir().unwrap();
    let o = hslab("identities", "[grid]\nn_h = 0\n", dir.path(), &["--out", dir.path().join("a").to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
    let o = hslab("identities", "[data]\ncount = 1\n", dir.path(), &["--out", dir.path().join("b").to_str().unwrap(), "--threads", "0"]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn failed_bracket_exits_with_one() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = "[grid]\nn_h = 16\nn_z = 16\n[data]\ncount = 2\nharmonic_count = 1\n[check]\nidentity_max = 1e-300\n";
    let o = hslab("identities", cfg, dir.path(), &["--out", dir.path().join("o").to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(1));
    let stdout = String::from_utf8_lossy(&o.stdout);
    assert!(stdout.lines().any(|l| l.starts_with("FAIL identity")));
    let report: serde_json::Value = serde_json::from_str(&fs::read_to_string(dir.path().join("o/report.json")).unwrap()).unwrap();
    assert_eq!(report["passed"], false);
}

#[test]
fn zero_data_passes_the_oracle_comparison() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = "kind = stokes-oracle\n[grid]\nn_h = 16\nn_z = 16\n[time]\nsteps = 8\n[data]\ngenerator = zero\n";
    let o = hslab("stokes-oracle", cfg, dir.path(), &["--out", dir.path().join("o").to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
}

#[test]
fn generator_without_constraints_reports_no_checks() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("o");
    let o = hslab("generate", "[data]\nfield = scalar\ngenerator = zero\n", dir.path(), &["--out", out.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let report: serde_json::Value = serde_json::from_str(&fs::read_to_string(out.join("report.json")).unwrap()).unwrap();
    assert_eq!(report["checks"], serde_json::json!([]));
    assert!(out.join("fields/data.hdr").exists());
}

#[test]
fn fixed_seed_gives_identical_fields_and_seed_is_recorded() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = "[grid]\nn_h = 16\nn_z = 64\n[data]\nfield = velocity\ngenerator = band-limited-random\nzero_trace = true\n";
    let run = |name: &str, seed: &str| {
        let out = dir.path().join(name);
        let o = hslab("generate", cfg, dir.path(), &["--out", out.to_str().unwrap(), "--seed", seed]);
        assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
        out
    };
    let (a, b, c) = (run("a", "5"), run("b", "5"), run("c", "6"));
    let bytes = |p: &Path| fs::read(p.join("fields/data.bin")).unwrap();
    assert_eq!(bytes(&a), bytes(&b));
    assert_ne!(bytes(&a), bytes(&c));
    let report: serde_json::Value = serde_json::from_str(&fs::read_to_string(a.join("report.json")).unwrap()).unwrap();
    assert_eq!(report["seed"], 5);
    assert_eq!(report["config"]["data.seed"], "5");
}

#[test]
fn reports_are_byte_identical_across_runs() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = "[grid]\nn_h = 32\nn_z = 32\n[data]\ncount = 3\nharmonic_count = 2\n";
    let run = |name: &str, threads: &str| {
        let out = dir.path().join(name);
        let o = hslab("identities", cfg, dir.path(), &["--out", out.to_str().unwrap(), "--threads", threads]);
        assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
        out
    };
    let (a, b, c) = (run("a", "2"), run("b", "2"), run("c", "1"));
    for f in ["report.json", "tables/identities.csv", "tables/harmonic_extension.csv", "plots/identity_worst.dat"] {
        assert_eq!(fs::read(a.join(f)).unwrap(), fs::read(b.join(f)).unwrap(), "{f}");
    }
    // the thread count is part of the report, the numbers are not affected by it
    for f in ["tables/identities.csv", "tables/harmonic_extension.csv"] {
        assert_eq!(fs::read(a.join(f)).unwrap(), fs::read(c.join(f)).unwrap(), "{f}");
    }
}

#[test]
fn shipped_configs_validate() {
    let dir = Path::new(env!("CARGO_MANIFEST_DIR")).join("configs");
    let mut seen = 0;
    for e in fs::read_dir(&dir).unwrap() {
        let path = e.unwrap().path();
        let cfg = Config::load(&path).unwrap();
        let kind = Kind::from_str(&cfg.string("kind", "").unwrap(), false).unwrap();
        Plan::read(kind, &cfg).unwrap_or_else(|e| panic!("{}: {e}", path.display()));
        cfg.finish().unwrap_or_else(|e| panic!("{}: {e}", path.display()));
        seen += 1;
    }
    assert!(seen >= 9);
}

#[test]
fn mollified_step_never_raises_the_maximum() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = fs::read_to_string(Path::new(env!("CARGO_MANIFEST_DIR")).join("configs/mollified-step.ini")).unwrap();
    let out = dir.path().join("o");
    let o = hslab("generate", &cfg, dir.path(), &["--out", out.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let stdout = String::from_utf8_lossy(&o.stdout);
    assert_eq!(stdout.lines().filter(|l| l.starts_with("PASS smoothed maximum")).count(), 3, "{stdout}");
    assert!(out.join("fields/raw.hdr").exists() && out.join("tables/smoothing.csv").exists());
}
