use std::fs;

use pilotbox_core::io::{load_run, save_run};
use pilotbox_core::statistics::AnalysisConfig;
use pilotbox_core::sweep::{execute, is_complete, load_sweep, plan_sweep, read_bifurcation_map, SweepPlan};
use pilotbox_core::{run, run_with_snapshots, NormalizedParams};

fn short() -> NormalizedParams {
    NormalizedParams {
        t_final: 30.0,
        t_transient: 3.0,
        gamma0: 20.0,
        damping_b: 0.05,
        ..NormalizedParams::desk()
    }
}

#[test]
fn resume_after_interruption_matches_uninterrupted_sweep() {
    let tmp = tempfile::tempdir().unwrap();
    let mut plan = plan_sweep(0.5, 3.0, 5, short()).unwrap();
    plan.output_dir = Some(tmp.path().join("full"));
    let full = execute(&plan, false).unwrap();

    // Simulate a kill: drop two finished runs and the final manifest, leave a
    // half-written temporary directory behind.
    let root = tmp.path().join("partial");
    plan.output_dir = Some(root.clone());
    execute(&plan, false).unwrap();
    fs::remove_dir_all(root.join("runs/eps_0001")).unwrap();
    fs::remove_dir_all(root.join("runs/eps_0004")).unwrap();
    fs::remove_file(root.join("manifest.json")).unwrap();
    fs::create_dir_all(root.join("runs/.eps_0001.tmp-999")).unwrap();
    assert!(!is_complete(&root, &plan));

    let resumed = execute(&plan, true).unwrap();
    assert_eq!(resumed, full);
    assert!(is_complete(&root, &plan));
    assert!(!root.join("runs/.eps_0001.tmp-999").exists());
    for f in ["bifurcation_map.csv", "kinetic_energy.csv", "stability.csv", "energy_levels.csv"] {
        assert_eq!(
            fs::read(root.join(f)).unwrap(),
            fs::read(tmp.path().join("full").join(f)).unwrap(),
            "{f}"
        );
    }
}

#[test]
fn resume_refuses_a_different_plan() {
    let tmp = tempfile::tempdir().unwrap();
    let mut plan = plan_sweep(0.5, 1.0, 2, short()).unwrap();
    plan.output_dir = Some(tmp.path().to_path_buf());
    execute(&plan, false).unwrap();
    let mut other = plan.clone();
    other.base_params.gamma0 = 3.0;
    assert!(execute(&other, true).is_err());
}

#[test]
fn persisted_sweep_round_trips() {
    let tmp = tempfile::tempdir().unwrap();
    let mut plan = plan_sweep(1.0, 2.5, 4, short()).unwrap();
    plan.output_dir = Some(tmp.path().to_path_buf());
    let result = execute(&plan, false).unwrap();
    let (loaded_plan, loaded) = load_sweep(tmp.path()).unwrap();
    assert_eq!(loaded_plan, plan);
    assert_eq!(loaded, result);
    let map = read_bifurcation_map(&tmp.path().join("bifurcation_map.csv")).unwrap();
    assert_eq!(map, result.bifurcation_map);
}

#[test]
fn stability_mask_agrees_with_each_run() {
    let plan = plan_sweep(0.5, 3.0, 4, short()).unwrap();
    let result = execute(&plan, false).unwrap();
    for (r, stable) in result.runs.iter().zip(&result.stability_mask) {
        assert_eq!(*stable, !r.escaped && r.failure.is_none());
        assert_eq!(
            result.bifurcation_map.rows[result
                .runs
                .iter()
                .position(|q| q.epsilon == r.epsilon)
                .unwrap()]
            .is_some(),
            *stable
        );
    }
}

#[test]
fn single_point_sweep_equals_standalone_run() {
    let p = short().with_epsilon(2.0);
    let plan = SweepPlan {
        epsilon_grid: vec![2.0],
        base_params: short(),
        parallelism: 1,
        output_dir: None,
        analysis: AnalysisConfig::default(),
    };
    let swept = execute(&plan, false).unwrap();
    assert_eq!(swept.runs, vec![run(&p).unwrap()]);
}

#[test]
fn saved_run_loads_back_exactly() {
    let tmp = tempfile::tempdir().unwrap();
    let p = short().with_epsilon(2.73);
    let r = run_with_snapshots(&p, &[0.0, 10.0, 30.0]).unwrap();
    let dir = tmp.path().join("run");
    save_run(&dir, &r, 0.5).unwrap();
    assert_eq!(load_run(&dir).unwrap(), r);
}
