use std::fs;
use std::path::{Path, PathBuf};
use std::process::Command;

const DIRAC: &str = "kind = \"atomic\"\natoms = [{ location = 1.0, weight = 1.0 }]\n";

fn lab(args: &[&str]) -> std::process::Output {
    Command::new(env!("CARGO_BIN_EXE_renewal-lab")).args(args).output().unwrap()
}

fn setup(dir: &Path, measure: &str, config: &str) -> PathBuf {
    fs::write(dir.join("measure.toml"), measure).unwrap();
    let path = dir.join("run.toml");
    fs::write(&path, config).unwrap();
    path
}

fn artifacts(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let mut out: Vec<(String, Vec<u8>)> = fs::read_dir(dir)
        .unwrap()
        .map(|e| e.unwrap().path())
        .filter(|p| p.file_name().unwrap() != "manifest.json")
        .map(|p| (p.file_name().unwrap().to_string_lossy().into_owned(), fs::read(&p).unwrap()))
        .collect();
    out.sort();
    out
}

#[test]
fn reruns_are_byte_identical() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = setup(
        tmp.path(),
        DIRAC,
        "command = \"zeros\"\nmeasure = \"measure.toml\"\nseed = 5\n[zeros]\nim_max = 14.0\ncount_checks = 6\n",
    );
    let cfg = cfg.to_str().unwrap();
    let a = tmp.path().join("a");
    let b = tmp.path().join("b");
    for out in [&a, &b] {
        let o = lab(&["run", "--config", cfg, "--out", out.to_str().unwrap()]);
        assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    }
    let (fa, fb) = (artifacts(&a), artifacts(&b));
    assert!(fa.iter().any(|(n, _)| n == "zeros.csv"));
    assert_eq!(fa, fb);

    let manifest: serde_json::Value = serde_json::from_slice(&fs::read(a.join("manifest.json")).unwrap()).unwrap();
    assert_eq!(manifest["seed"], 5);
    assert_eq!(manifest["complete"], true);
    let other: serde_json::Value = serde_json::from_slice(&fs::read(b.join("manifest.json")).unwrap()).unwrap();
    assert_eq!(manifest["artifacts"], other["artifacts"]);

    // a different seed changes the random count checks only
    let c = tmp.path().join("c");
    let o = lab(&["zeros", "--config", cfg, "--out", c.to_str().unwrap(), "--seed", "6"]);
    assert!(o.status.success());
    let body = |p: PathBuf| -> String {
        fs::read_to_string(p).unwrap().lines().filter(|l| !l.starts_with("# seed")).collect::<Vec<_>>().join("\n")
    };
    assert_eq!(body(a.join("zeros.dat")), body(c.join("zeros.dat")));
    assert_ne!(fs::read(a.join("zeros.dat")).unwrap(), fs::read(c.join("zeros.dat")).unwrap());
}

#[test]
fn bad_config_exits_with_one() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = setup(tmp.path(), DIRAC, "command = \"zeros\"\nmeasure = \"measure.toml\"\n[zeros]\nim_maximum = 3.0\n");
    let o = lab(&["run", "--config", cfg.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&o.stderr).contains("im_maximum"));

    let cfg = setup(tmp.path(), DIRAC, "command = \"zeros\"\nmeasure = \"measure.toml\"\n[zeros]\nim_max = -3.0\n");
    assert_eq!(lab(&["run", "--config", cfg.to_str().unwrap()]).status.code(), Some(1));

    let cfg = setup(tmp.path(), "kind = \"atomic\"\natoms = []\n", "command = \"zeros\"\nmeasure = \"measure.toml\"\n");
    assert_eq!(lab(&["run", "--config", cfg.to_str().unwrap()]).status.code(), Some(1));

    let cfg = setup(tmp.path(), DIRAC, "command = \"zeros\"\nmeasure = \"measure.toml\"\n");
    let o = lab(&["renewal", "--config", cfg.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(1));
    assert_eq!(lab(&["zeros", "--config", "/nonexistent/run.toml"]).status.code(), Some(1));
}

#[test]
fn numerical_failure_exits_with_two() {
    let tmp = tempfile::tempdir().unwrap();
    // negative drift: the renewal function is not defined
    let cfg = setup(
        tmp.path(),
        "kind = \"atomic\"\natoms = [{ location = -1.0, weight = 1.0 }]\n",
        "command = \"renewal\"\nmeasure = \"measure.toml\"\nout = \"out\"\n",
    );
    let o = lab(&["run", "--config", cfg.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2), "{}", String::from_utf8_lossy(&o.stderr));
    let manifest: serde_json::Value =
        serde_json::from_slice(&fs::read(tmp.path().join("out/manifest.json")).unwrap()).unwrap();
    assert_eq!(manifest["complete"], false);
    assert!(manifest["error"].is_string());
}
