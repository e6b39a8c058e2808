use nlhelm::diagnostics::pde_residual;
use nlhelm::dual::{DualProblem, SolutionClass};
use nlhelm::farfield::{compute_farfield, decay_exponent_fit, extend_field};
use nlhelm::grid::{lp_norm, Field, GridSpec, SphereMesh};
use nlhelm::io::{load_checkpoint, save_checkpoint};
use nlhelm::resolvent::{schedule_floor, AbsorptionSchedule, ResolventMethod};
use nlhelm::scenario::Scenario;
use nlhelm::solver::{
    solve_mountain_pass, solve_mountain_pass_checkpointed, SolverCheckpoint, SolverConfig,
};
use std::path::Path;

fn gaussian_weight(grid: GridSpec) -> Field {
    Field::from_fn_real(grid, |x| {
        (-x.iter().map(|v| v * v).sum::<f64>() / 2.0).exp()
    })
}

fn gaussian_problem() -> DualProblem {
    let grid = GridSpec::new(3, 6.0, 16).unwrap();
    DualProblem::new(
        &gaussian_weight(grid),
        5.0,
        SolutionClass::Decaying,
        ResolventMethod::KernelConvolution,
        &AbsorptionSchedule::guarded(&grid, 1.0),
    )
    .unwrap()
}

/// Multiplier route with a two-level schedule just above its floor.
fn resolved_problem() -> DualProblem {
    let grid = GridSpec::new(3, 6.0, 24).unwrap();
    let floor = schedule_floor(&grid, ResolventMethod::Multiplier);
    DualProblem::new(
        &gaussian_weight(grid),
        5.0,
        SolutionClass::Decaying,
        ResolventMethod::Multiplier,
        &AbsorptionSchedule::new(3.0 * floor, 2, 1).unwrap(),
    )
    .unwrap()
}

fn config() -> SolverConfig {
    SolverConfig {
        seed: 1,
        restart_count: 0,
        recenter_every: 0,
        ..Default::default()
    }
}

#[test]
fn bundled_scenarios_validate() {
    let dir = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../scenarios");
    let mut count = 0;
    for entry in std::fs::read_dir(&dir).unwrap() {
        let path = entry.unwrap().path();
        if path.extension().is_some_and(|e| e == "json") {
            let scenario = Scenario::load(&path).unwrap_or_else(|e| panic!("{path:?}: {e}"));
            assert!(scenario.issues(&dir).is_empty(), "{path:?}");
            count += 1;
        }
    }
    assert!(count >= 5);
}

#[test]
fn solution_satisfies_nehari_and_the_equation() {
    let prob = resolved_problem();
    let rec = solve_mountain_pass(&prob, &config()).unwrap();
    assert!(rec.j_value > 0.0);
    assert!(rec.crit_residual <= 1e-6);
    let pd = prob.p_dual();
    let norm = lp_norm(&rec.v_star, pd).unwrap();
    let nehari = (1.0 / pd - 0.5) * norm.powf(pd);
    assert!((rec.j_value - nehari).abs() <= 1e-8 * rec.j_value);

    let at_solution = pde_residual(&prob, &rec.u_star).unwrap();
    let bent = rec.u_star.map(true, |z| z * 1.1);
    let elsewhere = pde_residual(&prob, &bent).unwrap();
    assert!(
        at_solution.l2 < 0.1 * elsewhere.l2,
        "{} {}",
        at_solution.l2,
        elsewhere.l2
    );
}

#[test]
fn far_field_of_solution_is_consistent() {
    let prob = gaussian_problem();
    let rec = solve_mountain_pass(&prob, &config()).unwrap();
    let mesh = SphereMesh::new(3, 2).unwrap();
    let pattern = compute_farfield(&prob, &rec.u_star, &mesh).unwrap();
    assert!(pattern.symmetry_defect() < 1e-10);
    let outgoing = extend_field(&prob.source(&rec.u_star).unwrap(), 26.0).unwrap();
    let fit = decay_exponent_fit(&outgoing.real_part(), [1.0, 13.0]).unwrap();
    assert!(
        fit.exponent < -0.5 && fit.exponent > -1.6,
        "{}",
        fit.exponent
    );
}

#[test]
fn checkpoint_resume_is_bitwise() {
    let prob = gaussian_problem();
    let cfg = SolverConfig {
        checkpoint_every: 3,
        ..config()
    };
    let mut saved: Vec<SolverCheckpoint> = Vec::new();
    let full = solve_mountain_pass_checkpointed(&prob, &cfg, None, &mut |ck| {
        saved.push(ck.clone());
        Ok(())
    })
    .unwrap();
    let first = saved.get(1).expect("a mid-run checkpoint").clone();

    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("ck.json");
    save_checkpoint(&path, &first, "hash").unwrap();
    let (loaded, hash) = load_checkpoint(&path).unwrap();
    assert_eq!(hash, "hash");
    assert_eq!(loaded, first);

    let resumed =
        solve_mountain_pass_checkpointed(&prob, &cfg, Some(loaded), &mut |_| Ok(())).unwrap();
    assert_eq!(resumed.j_value.to_bits(), full.j_value.to_bits());
    assert_eq!(resumed.v_star, full.v_star);
}
