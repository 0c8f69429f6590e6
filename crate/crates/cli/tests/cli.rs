use std::collections::BTreeSet;
use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use isodesign_cli::bundle::digest;
use serde_json::Value;

fn isodesign(args: &[&str], root: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_isodesign"))
        .args(args)
        .env("ISODESIGN_OUT", root)
        .output()
        .expect("binary runs")
}

fn manifest(dir: &Path) -> Value {
    serde_json::from_str(&fs::read_to_string(dir.join("manifest.json")).unwrap()).unwrap()
}

fn listing(dir: &Path) -> BTreeSet<String> {
    fs::read_dir(dir)
        .unwrap()
        .map(|e| e.unwrap().file_name().into_string().unwrap())
        .collect()
}

fn names(list: &[&str]) -> BTreeSet<String> {
    list.iter().map(|s| s.to_string()).collect()
}

fn csv_column(path: &Path, col: usize) -> Vec<f64> {
    fs::read_to_string(path)
        .unwrap()
        .lines()
        .skip(1)
        .map(|l| l.split(',').nth(col).unwrap().parse().unwrap())
        .collect()
}

#[test]
fn box_shift_chain() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = tmp.path().join("shift.cfg");
    fs::write(&cfg, "base = box\n[step]\nkind = shift\nn = 1\ndE = -5\n").unwrap();
    let out = tmp.path().join("run");
    let o = isodesign(
        &["design", "--config", cfg.to_str().unwrap(), "--out", out.to_str().unwrap()],
        tmp.path(),
    );
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    assert_eq!(
        listing(&out),
        names(&["manifest.json", "potential.csv", "spectrum.csv", "states.csv", "steplog.csv"])
    );
    let m = manifest(&out);
    let checks = m["steps"][0]["checks"].as_array().unwrap();
    let levels: Vec<f64> = checks
        .iter()
        .filter(|c| c["name"] == "isospectrality")
        .map(|c| c["measured"].as_f64().unwrap())
        .collect();
    assert_eq!(levels.len(), 4);
    for (got, want) in levels.iter().zip([-4.0, 4.0, 9.0, 16.0]) {
        assert!((got - want).abs() < 1e-5, "{levels:?}");
    }
    assert!(checks.iter().all(|c| c["passed"] == true));
    assert_eq!(m["status"], "ok");
    let energies = csv_column(&out.join("spectrum.csv"), 1);
    assert!((energies[0] + 4.0).abs() < 1e-5);
    let header = fs::read_to_string(out.join("states.csv")).unwrap();
    assert!(header.starts_with("x,psi_1,psi_2,psi_3,psi_4\n"));
}

#[test]
fn empty_chain_on_free_line() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("free");
    let o = isodesign(
        &["design", "--set", "base=free-line", "--out", out.to_str().unwrap()],
        tmp.path(),
    );
    assert_eq!(o.status.code(), Some(0));
    assert!(csv_column(&out.join("potential.csv"), 1).iter().all(|v| *v == 0.0));
    assert_eq!(fs::read_to_string(out.join("spectrum.csv")).unwrap(), "n,energy,swf\n");
    // free waves pass untouched
    assert!(csv_column(&out.join("scattering.csv"), 1).iter().all(|r| *r < 1e-8));
}

#[test]
fn create_then_remove_round_trips() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("trip");
    let o = isodesign(
        &[
            "design",
            "--set",
            "base=free-line",
            "--set",
            "step=create E=-1",
            "--set",
            "step=remove n=1",
            "--out",
            out.to_str().unwrap(),
        ],
        tmp.path(),
    );
    assert_eq!(o.status.code(), Some(0));
    let m = manifest(&out);
    assert!(m["summary"]["final_max_abs_potential"].as_f64().unwrap() < 1e-6);
    assert_eq!(m["steps"].as_array().unwrap().len(), 2);
    assert!(csv_column(&out.join("potential.csv"), 1).iter().all(|v| v.abs() < 1e-6));
}

#[test]
fn validation_errors_write_nothing() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("never");
    let cases: [&[&str]; 6] = [
        &["design", "--set", "base=moon"],
        &["design", "--tol", "-1"],
        &["design", "--points", "1000"],
        &["design", "--set", "step=zone-shift level=2 dE=1"],
        &["band", "--set", "base=box"],
        &["design", "--set", "step=shift n=1 dE=10"],
    ];
    for args in cases {
        let mut a = args.to_vec();
        a.extend(["--out", out.to_str().unwrap()]);
        let o = isodesign(&a, tmp.path());
        assert_eq!(o.status.code(), Some(2), "{args:?}");
        assert!(!out.exists(), "{args:?} wrote output");
    }
}

#[test]
fn unknown_figure_lists_tags() {
    let tmp = tempfile::tempdir().unwrap();
    let o = isodesign(&["figure", "fig0_0"], tmp.path());
    assert_eq!(o.status.code(), Some(2));
    let err = String::from_utf8_lossy(&o.stderr);
    assert!(err.contains("fig1_1") && err.contains("fig7_13"), "{err}");
}

#[test]
fn oracle_failure_is_nonzero() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("strict");
    let o = isodesign(
        &["design", "--set", "step=shift n=1 dE=-5", "--tol", "1e-14", "--out", out.to_str().unwrap()],
        tmp.path(),
    );
    assert_eq!(o.status.code(), Some(1));
    assert_eq!(manifest(&out)["status"], "oracle-failure");
}

#[test]
fn numerical_failure_keeps_partial_output() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("partial");
    let o = isodesign(
        &[
            "design",
            "--set",
            "base=free-line",
            "--set",
            "step=create E=-1",
            "--set",
            "step=remove n=2",
            "--out",
            out.to_str().unwrap(),
        ],
        tmp.path(),
    );
    assert_eq!(o.status.code(), Some(3));
    let m = manifest(&out);
    assert_eq!(m["status"], "numerical-failure");
    assert_eq!(m["failed_step"]["index"], 2);
    // the state after step 1 was written
    let spectrum = csv_column(&out.join("spectrum.csv"), 1);
    assert_eq!(spectrum.len(), 1);
    assert!((spectrum[0] + 1.0).abs() < 1e-6);
}

#[test]
fn default_output_root_comes_from_env() {
    let tmp = tempfile::tempdir().unwrap();
    let o = isodesign(&["lattice", "--set", "base=lattice-stark"], tmp.path());
    assert_eq!(o.status.code(), Some(0));
    let dir = tmp.path().join("lattice");
    assert!(dir.join("lattice_states.csv").exists());
    let energies = csv_column(&dir.join("lattice_spectrum.csv"), 1);
    for w in energies.windows(2) {
        assert!((w[1] - w[0] - 1.0).abs() < 1e-8);
    }
}

fn without_timings(mut m: Value) -> Value {
    m.as_object_mut().unwrap().remove("timings");
    m
}

#[test]
fn runs_are_deterministic() {
    let tmp = tempfile::tempdir().unwrap();
    let args = |dir: &str| {
        vec![
            "band".to_string(),
            "--set".into(),
            "step=zone-track level=2 from=0 to=1 count=4".into(),
            "--out".into(),
            tmp.path().join(dir).to_str().unwrap().to_string(),
        ]
    };
    for dir in ["one", "two"] {
        let a = args(dir);
        let a: Vec<&str> = a.iter().map(String::as_str).collect();
        assert_eq!(isodesign(&a, tmp.path()).status.code(), Some(0));
    }
    let (one, two) = (tmp.path().join("one"), tmp.path().join("two"));
    assert_eq!(listing(&one), listing(&two));
    for name in listing(&one).iter().filter(|n| n.ends_with(".csv")) {
        assert_eq!(fs::read(one.join(name)).unwrap(), fs::read(two.join(name)).unwrap(), "{name}");
    }
    assert_eq!(without_timings(manifest(&one)), without_timings(manifest(&two)));
}

#[test]
fn manifest_lists_every_file() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("fig");
    let o = isodesign(&["figure", "fig1_1", "--out", out.to_str().unwrap()], tmp.path());
    assert_eq!(o.status.code(), Some(0));
    let m = manifest(&out);
    let files = m["files"].as_array().unwrap();
    let listed: BTreeSet<String> = files
        .iter()
        .map(|f| f["name"].as_str().unwrap().to_string())
        .collect();
    let mut on_disk = listing(&out);
    on_disk.remove("manifest.json");
    assert_eq!(listed, on_disk);
    for f in files {
        let data = fs::read(out.join(f["name"].as_str().unwrap())).unwrap();
        assert_eq!(f["sha256"].as_str().unwrap(), digest(&data));
    }
    let csv = fs::read_to_string(out.join("fig1_1.csv")).unwrap();
    assert!(csv.starts_with("x,V,dV,psi1_offset,psi2_offset"));
    let readme = fs::read_to_string(out.join("README.md")).unwrap();
    assert!(readme.contains("figure 1.1"));
}

#[test]
fn ladder_bundle_has_one_curve_per_slope() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("ladder");
    let o = isodesign(&["figure", "fig7_13", "--out", out.to_str().unwrap()], tmp.path());
    assert_eq!(o.status.code(), Some(0));
    let csv = fs::read_to_string(out.join("fig7_13.csv")).unwrap();
    assert!(csv.starts_with("n,psi_C1,psi_C0.5,psi_C0.25\n"));
    assert_eq!(csv.lines().count(), 82);
}
