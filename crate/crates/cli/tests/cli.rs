use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn pilotbox(args: &[&str], cwd: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_pilotbox"))
        .args(args)
        .current_dir(cwd)
        .env_remove("PILOTBOX_OUTPUT")
        .output()
        .expect("binary runs")
}

fn rows(text: &str) -> Vec<Vec<f64>> {
    text.lines()
        .skip(1)
        .map(|l| l.split(',').map(|v| v.parse().unwrap()).collect())
        .collect()
}

const SHORT: [&str; 4] = ["--t-final", "20", "--t-transient", "2"];

#[test]
fn dispersion_rs_column_is_k_squared_plus_half() {
    let tmp = tempfile::tempdir().unwrap();
    let out = pilotbox(&["dispersion", "--k-max", "5", "--epsilon", "1"], tmp.path());
    assert!(out.status.success());
    let text = String::from_utf8(out.stdout).unwrap();
    assert!(text.starts_with("k,omega_rs\n"));
    let table = rows(&text);
    assert_eq!(table.len(), 100);
    for r in &table {
        assert!((r[1] - (r[0] * r[0] + 0.5)).abs() <= 1e-12 * r[1]);
    }
}

#[test]
fn dispersion_hydro_columns_and_shallow_warning() {
    let tmp = tempfile::tempdir().unwrap();
    let out = pilotbox(
        &["dispersion", "--k-max", "5", "--hydro", "σ/ρ=1,g=1,H=0.1", "--output", "d.csv"],
        tmp.path(),
    );
    assert!(out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("warning: kH > 0.3"));
    let text = fs::read_to_string(tmp.path().join("d.csv")).unwrap();
    let table = rows(&text);
    let mut checked = 0;
    for r in &table {
        let (full, shallow, kh) = (r[2], r[3], r[4]);
        if kh <= 0.3 {
            assert!((shallow - full).abs() / full <= kh * kh / 2.0);
            checked += 1;
        }
    }
    assert!(checked > 0);
}

#[test]
fn missing_flag_is_usage_error_without_output() {
    let tmp = tempfile::tempdir().unwrap();
    let out = pilotbox(&["dispersion", "--output", "d.csv"], tmp.path());
    assert_eq!(out.status.code(), Some(2));
    assert!(!tmp.path().join("d.csv").exists());

    let out = pilotbox(&["simulate", "--epsilon", "0.01", "--output", "run"], tmp.path());
    assert_eq!(out.status.code(), Some(2));
    assert!(!tmp.path().join("run").exists());

    let out = pilotbox(&["simulate", "--config", "missing.cfg"], tmp.path());
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn unforced_simulation_keeps_particle_still_and_analyzes() {
    let tmp = tempfile::tempdir().unwrap();
    let mut args = vec!["simulate", "--gamma0", "0", "--output", "run"];
    args.extend(SHORT);
    let out = pilotbox(&args, tmp.path());
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let run = tmp.path().join("run");
    let text = fs::read_to_string(run.join("trajectory.csv")).unwrap();
    let xs: Vec<f64> = rows(&text).iter().map(|r| r[1]).collect();
    assert!(xs.len() > 100);
    assert!(xs.iter().all(|x| *x == xs[0]));

    let out = pilotbox(&["analyze", "run"], tmp.path());
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    for f in ["peaks.csv", "phase_space.csv", "energy_levels.csv", "summary.json"] {
        assert!(run.join(f).exists(), "{f}");
    }
    let summary: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(run.join("summary.json")).unwrap()).unwrap();
    assert_eq!(summary["escaped"], serde_json::Value::Bool(false));
}

#[test]
fn simulate_is_byte_reproducible_and_honours_env_output() {
    let tmp = tempfile::tempdir().unwrap();
    let mut args = vec!["simulate", "--epsilon", "2.73"];
    args.extend(SHORT);
    let first = pilotbox(&[&args[..], &["--output", "a"]].concat(), tmp.path());
    assert!(first.status.success());
    let second = Command::new(env!("CARGO_BIN_EXE_pilotbox"))
        .args(&args)
        .current_dir(tmp.path())
        .env("PILOTBOX_OUTPUT", "from_env")
        .output()
        .unwrap();
    assert!(second.status.success());
    for f in ["trajectory.csv", "histogram.csv"] {
        let a = fs::read(tmp.path().join("a").join(f)).unwrap();
        let b = fs::read(tmp.path().join("from_env").join(f)).unwrap();
        assert_eq!(a, b, "{f}");
    }
}

#[test]
fn sweep_resume_on_complete_directory_is_a_no_op() {
    let tmp = tempfile::tempdir().unwrap();
    let mut args = vec![
        "sweep", "--eps-min", "1", "--eps-max", "2", "--points", "3", "--jobs", "2", "--output", "sw",
    ];
    args.extend(SHORT);
    let out = pilotbox(&args, tmp.path());
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let root = tmp.path().join("sw");
    for f in ["bifurcation_map.csv", "kinetic_energy.csv", "stability.csv", "manifest.json"] {
        assert!(root.join(f).exists(), "{f}");
    }
    let manifest = fs::read(root.join("manifest.json")).unwrap();

    let resumed = pilotbox(&[&args[..], &["--resume"]].concat(), tmp.path());
    assert_eq!(resumed.status.code(), Some(0));
    assert!(String::from_utf8_lossy(&resumed.stdout).contains("already complete"));
    assert_eq!(fs::read(root.join("manifest.json")).unwrap(), manifest);

    let out = pilotbox(&["analyze", "sw", "--output", "an"], tmp.path());
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let summary: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(tmp.path().join("an/summary.json")).unwrap())
            .unwrap();
    assert_eq!(summary["runs"], 3);
}

#[test]
fn calibration_writes_a_reusable_config() {
    let tmp = tempfile::tempdir().unwrap();
    let mut args = vec![
        "calibrate", "--gamma0-grid", "1,2", "--damping-grid", "0.05", "--output", "cal",
    ];
    args.extend(SHORT);
    let out = pilotbox(&args, tmp.path());
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let table = fs::read_to_string(tmp.path().join("cal/calibration.csv")).unwrap();
    assert_eq!(table.lines().count(), 3);
    let out = pilotbox(
        &["simulate", "--config", "cal/best.cfg", "--output", "again"],
        tmp.path(),
    );
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
}

#[test]
fn analyze_rejects_unknown_directory() {
    let tmp = tempfile::tempdir().unwrap();
    fs::create_dir(tmp.path().join("empty")).unwrap();
    assert_eq!(pilotbox(&["analyze", "empty"], tmp.path()).status.code(), Some(2));
    assert_eq!(pilotbox(&["analyze", "nowhere"], tmp.path()).status.code(), Some(2));
}
