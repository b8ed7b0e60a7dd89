use std::collections::BTreeMap;
use std::path::Path;
use std::process::Command;

const BIN: &str = env!("CARGO_BIN_EXE_hcint");

fn small_config(dir: &Path) -> std::path::PathBuf {
    let mut c = hcint::harness::figure_config(4, 0).unwrap();
    c.physical.intervals = 20;
    if let Some(g) = c.grids.centers.as_mut() {
        g.par.count = 9;
        g.perp.count = 5;
    }
    c.grids.image.par.count = 31;
    c.grids.image.perp.count = 21;
    let path = dir.join("config.json");
    std::fs::write(&path, c.to_json().unwrap()).unwrap();
    path
}

fn hcint(args: &[String]) {
    let out = Command::new(BIN).args(args).output().unwrap();
    assert!(out.status.success(), "{args:?}: {}", String::from_utf8_lossy(&out.stderr));
}

fn pipeline(config: &Path, out: &Path, threads: &str) {
    let o = out.to_str().unwrap();
    let c = config.to_str().unwrap();
    let common = ["--seed", "7", "--threads", threads, "--out", o];
    let with = |cmd: &[&str]| -> Vec<String> { cmd.iter().chain(&common).map(|s| s.to_string()).collect() };
    hcint(&with(&["simulate", "--config", c]));
    let data = out.join("data");
    hcint(&with(&["image", "--config", c, "--data", data.to_str().unwrap()]));
    let field = out.join("hcint_field");
    hcint(&with(&["retrieve", "--config", c, "--hcint", field.to_str().unwrap(), "--iterations", "100", "--deflate-peak", "0.2"]));
    hcint(&with(&["stats", "--config", c, "--functional", "sar", "--realizations", "6"]));
}

fn snapshot(dir: &Path) -> BTreeMap<String, Vec<u8>> {
    std::fs::read_dir(dir)
        .unwrap()
        .map(|e| e.unwrap().path())
        .filter(|p| p.is_file())
        .map(|p| (p.file_name().unwrap().to_string_lossy().into_owned(), std::fs::read(&p).unwrap()))
        .collect()
}

#[test]
fn outputs_are_bit_identical_for_a_fixed_seed() {
    let tmp = tempfile::tempdir().unwrap();
    let config = small_config(tmp.path());
    let (a, b) = (tmp.path().join("a"), tmp.path().join("b"));
    pipeline(&config, &a, "1");
    pipeline(&config, &b, "8");
    let (sa, sb) = (snapshot(&a), snapshot(&b));
    for name in ["data.f64", "data.json", "sar.f64", "cint.f64", "two_point.f64", "hcint_field.f64", "spectrum.f64", "ensemble.json"] {
        assert!(sa.contains_key(name), "missing {name}");
    }
    assert_eq!(sa.keys().collect::<Vec<_>>(), sb.keys().collect::<Vec<_>>());
    for (name, bytes) in &sa {
        assert!(bytes == &sb[name], "{name} differs between runs");
    }
}

#[test]
fn bad_config_fails_with_message() {
    let tmp = tempfile::tempdir().unwrap();
    let path = tmp.path().join("bad.json");
    std::fs::write(&path, r#"{"physical": {"omega_o": 1.0}}"#).unwrap();
    let out = Command::new(BIN)
        .args(["simulate", "--config", path.to_str().unwrap(), "--out", tmp.path().to_str().unwrap()])
        .output()
        .unwrap();
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).starts_with("error:"));
}

#[test]
fn unknown_figure_is_rejected() {
    let out = Command::new(BIN).args(["reproduce-figure", "6"]).output().unwrap();
    assert!(!out.status.success());
}
