use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn crs(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_crs"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn write_config(dir: &Path, name: &str, body: &str) -> PathBuf {
    let path = dir.join(name);
    fs::write(&path, body).unwrap();
    path
}

fn body(path: &Path) -> String {
    fs::read_to_string(path).unwrap()
}

const SMALL: &str =
    "scenario = random\nn_t = 2\nsnr_db = 10\nseed = 7\nu2 = 0.5; 2\ntheta_grid = 0.5; 1\n";

#[test]
fn run_writes_regions_and_manifest() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(
        dir.path(),
        "small.cfg",
        &format!("{SMALL}schemes = crs; nrs; mu-lp\n"),
    );
    let out = dir.path().join("out");
    let res = crs(&[
        "run",
        "--config",
        cfg.to_str().unwrap(),
        "--out",
        out.to_str().unwrap(),
        "--jobs",
        "1",
    ]);
    assert!(
        res.status.success(),
        "{}",
        String::from_utf8_lossy(&res.stderr)
    );
    for scheme in ["crs", "nrs", "mu-lp"] {
        let text = body(&out.join(format!("{scheme}.csv")));
        let mut lines = text.lines();
        assert!(lines.next().unwrap().starts_with("# scenario="));
        assert_eq!(
            lines.next().unwrap(),
            "scheme,u2,theta,R1_tot,R2_tot,wsr,status"
        );
        assert_eq!(lines.count(), 2);
        assert!(out.join("hull").join(format!("{scheme}.csv")).exists());
    }
    let manifest = body(&out.join("manifest.txt"));
    for key in [
        "config_hash = ",
        "tool_version = ",
        "scenario = ",
        "seed = 7",
        "wall_clock_seconds = ",
    ] {
        assert!(manifest.contains(key), "{manifest}");
    }
    assert!(body(&out.join("dominance.csv")).starts_with("region,other,dominates"));
    assert!(body(&out.join("hypervolume.csv")).starts_with("scheme,hypervolume"));

    let again = dir.path().join("again");
    let res = crs(&[
        "run",
        "--config",
        cfg.to_str().unwrap(),
        "--out",
        again.to_str().unwrap(),
    ]);
    assert!(res.status.success());
    for file in [
        "crs.csv",
        "nrs.csv",
        "mu-lp.csv",
        "dominance.csv",
        "hypervolume.csv",
    ] {
        assert_eq!(body(&out.join(file)), body(&again.join(file)), "{file}");
    }
}

#[test]
fn nrs_equals_crs_without_time_split() {
    let dir = tempfile::tempdir().unwrap();
    let base = SMALL.replace("theta_grid = 0.5; 1", "theta_grid = 1");
    let crs_cfg = write_config(dir.path(), "crs.cfg", &format!("{base}schemes = crs\n"));
    let nrs_cfg = write_config(dir.path(), "nrs.cfg", &format!("{base}schemes = nrs\n"));
    let (a, b) = (dir.path().join("a"), dir.path().join("b"));
    assert!(crs(&[
        "run",
        "--config",
        crs_cfg.to_str().unwrap(),
        "--out",
        a.to_str().unwrap()
    ])
    .status
    .success());
    assert!(crs(&[
        "run",
        "--config",
        nrs_cfg.to_str().unwrap(),
        "--out",
        b.to_str().unwrap()
    ])
    .status
    .success());
    let strip = |text: String| -> Vec<String> {
        text.lines()
            .skip(2)
            .map(|l| l.split_once(',').unwrap().1.to_string())
            .collect()
    };
    assert_eq!(
        strip(body(&a.join("crs.csv"))),
        strip(body(&b.join("nrs.csv")))
    );
}

#[test]
fn compare_reports_dominance_and_rejects_mixed_scenarios() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "one.cfg", &format!("{SMALL}schemes = nrs\n"));
    let other = write_config(
        dir.path(),
        "two.cfg",
        &format!("{}schemes = nrs\n", SMALL.replace("seed = 7", "seed = 8")),
    );
    let (a, b) = (dir.path().join("a"), dir.path().join("b"));
    assert!(crs(&[
        "run",
        "--config",
        cfg.to_str().unwrap(),
        "--out",
        a.to_str().unwrap()
    ])
    .status
    .success());
    assert!(crs(&[
        "run",
        "--config",
        other.to_str().unwrap(),
        "--out",
        b.to_str().unwrap()
    ])
    .status
    .success());
    let region = a.join("nrs.csv");
    let res = crs(&[
        "compare",
        region.to_str().unwrap(),
        region.to_str().unwrap(),
    ]);
    assert!(res.status.success());
    let report = String::from_utf8(res.stdout).unwrap();
    assert!(report.contains("nrs,nrs,true"));
    assert!(report.contains("ratio"));
    assert!(
        report
            .lines()
            .any(|l| l.starts_with("nrs,") && l.ends_with(",1.0")),
        "{report}"
    );

    let res = crs(&[
        "compare",
        region.to_str().unwrap(),
        b.join("nrs.csv").to_str().unwrap(),
    ]);
    assert_eq!(res.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&res.stderr).contains("scenario"));
}

#[test]
fn infeasible_targets_give_failure_exit_code() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(
        dir.path(),
        "qos.cfg",
        &format!("{}r_tar = 50; 0\nschemes = nrs\n", SMALL),
    );
    let out = dir.path().join("out");
    let res = crs(&[
        "run",
        "--config",
        cfg.to_str().unwrap(),
        "--out",
        out.to_str().unwrap(),
    ]);
    assert_eq!(res.status.code(), Some(1));
    assert!(body(&out.join("nrs.csv")).contains("infeasible"));
}

#[test]
fn bad_inputs_are_errors() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(
        dir.path(),
        "bad.cfg",
        "scenario = parametric\nn_t = 4\nschemes = dpc\n",
    );
    let res = crs(&[
        "run",
        "--config",
        cfg.to_str().unwrap(),
        "--out",
        dir.path().to_str().unwrap(),
    ]);
    assert_eq!(res.status.code(), Some(1));
    let res = crs(&[
        "run",
        "--config",
        dir.path().join("missing.cfg").to_str().unwrap(),
        "--out",
        "x",
    ]);
    assert_eq!(res.status.code(), Some(1));
    let res = crs(&["frobnicate"]);
    assert!(!res.status.success());
}

#[test]
fn oracle_check_passes_on_two_antennas() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "o.cfg", SMALL);
    let res = crs(&[
        "oracle-check",
        "--config",
        cfg.to_str().unwrap(),
        "--theta",
        "0.5",
    ]);
    assert!(
        res.status.success(),
        "{}",
        String::from_utf8_lossy(&res.stdout)
    );
    assert!(String::from_utf8(res.stdout).unwrap().contains(",true"));
}

#[test]
fn aligned_config_produces_seven_full_regions() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs/aligned-alpha-pi9.cfg");
    let out = dir.path().join("aligned");
    let res = crs(&[
        "run",
        "--config",
        cfg.to_str().unwrap(),
        "--out",
        out.to_str().unwrap(),
    ]);
    assert!(
        res.status.success(),
        "{}",
        String::from_utf8_lossy(&res.stderr)
    );
    for scheme in ["crs", "nrs", "ers", "c-noma", "n-noma", "mu-lp", "odf"] {
        assert_eq!(
            body(&out.join(format!("{scheme}.csv"))).lines().count(),
            45,
            "{scheme}"
        );
    }
    let dominance = body(&out.join("dominance.csv"));
    assert!(dominance.contains("crs,nrs,true"));
}
