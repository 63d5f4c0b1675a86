use fracheat_cli::commands::{self, Command, RunOptions};
use fracheat_cli::config::ConfigError;
use fracheat_cli::RunConfig;
use std::path::{Path, PathBuf};
use std::process::Command as Proc;

fn fixture(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("tests").join(name)
}

fn bin() -> Proc {
    Proc::new(env!("CARGO_BIN_EXE_fracheat"))
}

fn listing(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let mut out: Vec<(String, Vec<u8>)> = std::fs::read_dir(dir)
        .unwrap()
        .map(|e| {
            let e = e.unwrap();
            (e.file_name().to_string_lossy().into_owned(), std::fs::read(e.path()).unwrap())
        })
        .collect();
    out.sort();
    out
}

#[test]
fn kernel_matches_golden_file() {
    let tmp = tempfile::tempdir().unwrap();
    let status = bin()
        .args(["kernel", "--config"])
        .arg(fixture("fixtures/kernel_r1.toml"))
        .arg("--out")
        .arg(tmp.path())
        .status()
        .unwrap();
    assert!(status.success());
    let got = std::fs::read(tmp.path().join("kernel.csv")).unwrap();
    let want = std::fs::read(fixture("golden/kernel_r1.csv")).unwrap();
    assert!(got == want, "kernel.csv differs from the golden file");
}

#[test]
fn missing_alpha_exits_2_naming_the_key() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = tmp.path().join("c.toml");
    std::fs::write(&cfg, "[operator]\nradius = 2.0\n").unwrap();
    let out = bin().arg("kernel").arg("--config").arg(&cfg).arg("--out").arg(tmp.path().join("o")).output().unwrap();
    assert_eq!(out.status.code(), Some(2));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("alpha"), "{err}");
    assert!(!tmp.path().join("o").exists());
}

#[test]
fn config_validation() {
    let err = RunConfig::from_toml("[operator]\nalpha = 0.5\nbogus = 1\n").unwrap_err();
    assert!(err.to_string().contains("bogus"));
    let err = RunConfig::from_toml("[operator]\nalpha = 1.5\n").unwrap_err();
    assert!(matches!(err, ConfigError::Invalid { key: "operator.alpha", .. }));
    let err = RunConfig::from_toml("[operator]\nalpha = 0.5\n[capacity]\npoints = [[0.5, 1.0, 2.0]]\n").unwrap_err();
    assert!(matches!(err, ConfigError::Invalid { key: "capacity.points", .. }));
    let err = RunConfig::from_toml("[operator]\nalpha = 0.5\n[trace]\np = 2.0\nq = 2.0\n").unwrap_err();
    assert!(matches!(err, ConfigError::Invalid { key: "trace.q", .. }));
    let cfg = RunConfig::from_toml("seed = 4\n[operator]\nalpha = 0.3\n").unwrap();
    assert_eq!(cfg.seed, Some(4));
    assert_eq!(cfg.kernel.nt, 20);
}

#[test]
fn subcommands_are_deterministic() {
    for name in ["fixtures/small_r1.toml", "fixtures/small_h1.toml"] {
        let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
        for c in ["kernel", "bounds", "solve", "capacity", "trace", "dyadic"] {
            for dir in [a.path(), b.path()] {
                let st = bin().arg(c).arg("--config").arg(fixture(name)).arg("--out").arg(dir).status().unwrap();
                assert!(st.success(), "{name} {c}");
            }
        }
        let (la, lb) = (listing(a.path()), listing(b.path()));
        assert!(la.len() >= 8);
        assert!(la == lb, "{name}: outputs differ between runs");
    }
}

#[test]
fn seed_flag_overrides_config() {
    let cfg = RunConfig::load(&fixture("fixtures/small_r1.toml")).unwrap();
    let run = |seed| commands::run(Command::Capacity, &cfg, RunOptions { seed, refine: false }).unwrap().artifacts;
    assert_eq!(run(3), run(3));
    assert_ne!(run(3), run(4));
}

#[test]
fn writes_stay_inside_out_dir() {
    let work = tempfile::tempdir().unwrap();
    let st = bin()
        .current_dir(work.path())
        .arg("dyadic")
        .arg("--config")
        .arg(fixture("fixtures/small_r1.toml"))
        .args(["--out", "results"])
        .status()
        .unwrap();
    assert!(st.success());
    let top: Vec<String> =
        std::fs::read_dir(work.path()).unwrap().map(|e| e.unwrap().file_name().to_string_lossy().into_owned()).collect();
    assert_eq!(top, vec!["results".to_string()]);
    let names: Vec<String> = listing(&work.path().join("results")).into_iter().map(|(n, _)| n).collect();
    assert_eq!(names, vec!["christ.json", "potentials.csv", "tree.json"]);
}

#[test]
fn outputs_have_documented_columns() {
    let cfg = RunConfig::load(&fixture("fixtures/small_h1.toml")).unwrap();
    let opts = RunOptions { seed: 2, refine: false };
    let text = |c, file: &str| {
        let out = commands::run(c, &cfg, opts).unwrap();
        let a = out.artifacts.into_iter().find(|a| a.name == file).unwrap();
        String::from_utf8(a.bytes).unwrap()
    };
    assert!(text(Command::Kernel, "kernel.csv").starts_with("alpha,t,d,K,envelope,ratio\r\n"));
    assert!(text(Command::Capacity, "measure.csv").starts_with("t,x1,x2,x3,mass\r\n"));
    let cap: serde_json::Value = serde_json::from_str(&text(Command::Capacity, "capacity.json")).unwrap();
    for key in ["value", "gap", "iterations", "flags"] {
        assert!(cap.get(key).is_some(), "{key}");
    }
    let tree: serde_json::Value = serde_json::from_str(&text(Command::Dyadic, "tree.json")).unwrap();
    for key in ["scales", "centers", "parents"] {
        assert!(tree.get(key).is_some(), "{key}");
    }
    let bounds = text(Command::Bounds, "bounds.csv");
    assert!(bounds.starts_with("envelope_name,sup,inf,argmax_t,argmax_d,refine_delta\r\n"));
}

#[test]
fn refine_doubles_kernel_table() {
    let cfg = RunConfig::load(&fixture("fixtures/kernel_r1.toml")).unwrap();
    let rows = |refine| {
        let out = commands::run(Command::Kernel, &cfg, RunOptions { seed: 1, refine }).unwrap();
        String::from_utf8(out.artifacts[0].bytes.clone()).unwrap().lines().count() - 1
    };
    assert_eq!(rows(false), 200);
    assert_eq!(rows(true), 800);
}
