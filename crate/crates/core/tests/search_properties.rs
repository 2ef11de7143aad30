mod common;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use surround_calib::harness::{perturb_rig, reference_initial_errors, PerturbationPlan};
use surround_calib::pose::compose_perturbation;
use surround_calib::search::{
    calibrate_camera, calibrate_rig, RigCalibrationResult, SearchOptions,
};
use surround_calib::{CameraId, Exec, Perturbation, Pose};

fn loss_at_truth_is_a_strict_minimum(f: &common::Fixture) {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for objective in common::objectives_at_truth(f) {
        let id = objective.target;
        let truth = f.truth.cameras.get(id).pose;
        let at_truth = objective.evaluate(&truth).unwrap().mean_loss;
        assert!(at_truth <= 4.0, "{id}: loss at truth {at_truth}");
        for _ in 0..20 {
            let yaw = rng.random_range(0.5..=3.0) * if rng.random_bool(0.5) { 1.0 } else { -1.0 };
            let pose =
                compose_perturbation(&Perturbation::new(0.0, 0.0, yaw, 0.0, 0.0, 0.0), &truth);
            let l = objective
                .evaluate(&pose)
                .map(|r| r.mean_loss)
                .unwrap_or(f64::INFINITY);
            assert!(at_truth < l, "{id}: yaw {yaw:.3} gives {l} <= {at_truth}");
        }
    }
}

#[test]
fn loss_at_truth_is_small_and_minimal_pinhole() {
    loss_at_truth_is_a_strict_minimum(common::pinhole());
}

#[test]
fn loss_at_truth_is_small_and_minimal_fisheye() {
    loss_at_truth_is_a_strict_minimum(common::fisheye());
}

fn reference_start(f: &common::Fixture) -> surround_calib::PerCamera<Pose> {
    perturb_rig(
        &f.truth,
        &PerturbationPlan::Explicit(reference_initial_errors()),
    )
    .poses
}

fn run(
    f: &common::Fixture,
    batch: usize,
    exec: Exec,
    threads: Option<usize>,
) -> RigCalibrationResult {
    let mut settings = common::settings_with(common::reduced_schedule(20));
    settings.search = SearchOptions {
        batch_size: batch,
        exec,
    };
    let inputs = f.inputs(reference_start(f));
    match threads {
        None => calibrate_rig(&inputs, &settings),
        Some(n) => rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build()
            .unwrap()
            .install(|| calibrate_rig(&inputs, &settings)),
    }
}

#[test]
fn results_are_bit_identical_across_execution_strategies() {
    let f = common::pinhole();
    for batch in [1, 8, 32] {
        let reference = run(f, batch, Exec::Sequential, None);
        assert!(reference.failed().is_empty());
        for (exec, threads) in [
            (Exec::Sequential, None),
            (Exec::Parallel, None),
            (Exec::Parallel, Some(1)),
            (Exec::Parallel, Some(3)),
        ] {
            let other = run(f, batch, exec, threads);
            assert!(
                reference.same_outcome(&other),
                "batch {batch}, {exec:?}, {threads:?} threads"
            );
        }
    }
}

#[test]
fn traces_are_monotone_and_front_is_untouched() {
    let f = common::pinhole();
    let start = reference_start(f);
    let r = run(f, 32, Exec::Parallel, None);
    assert_eq!(r.poses.front, start.front);
    for c in &r.cameras {
        let res = c.result.as_ref().unwrap();
        assert!(res.trace.is_monotone(), "{}", c.camera);
        assert!(res.final_loss <= res.initial_loss);
        let hist = res.trace.best_loss_history();
        assert_eq!(*hist.last().unwrap(), res.final_loss);
    }
}

#[test]
fn zero_radius_schedule_returns_the_initial_poses() {
    let f = common::pinhole();
    let start = reference_start(f);
    let settings = common::settings_with(common::reduced_schedule(20).zero_radius());
    let r = calibrate_rig(&f.inputs(start.clone()), &settings);
    assert!(r.failed().is_empty());
    assert_eq!(r.poses, start);
}

#[test]
fn starting_at_truth_never_ends_worse() {
    let f = common::pinhole();
    let settings = common::settings_with(common::reduced_schedule(20));
    let r = calibrate_rig(&f.inputs(f.truth.poses()), &settings);
    assert_eq!(r.poses.front, f.truth.cameras.front.pose);
    for c in &r.cameras {
        let res = c.result.as_ref().unwrap();
        assert!(res.final_loss <= res.initial_loss, "{}", c.camera);
    }
}

#[test]
fn more_final_phase_iterations_never_increase_the_loss() {
    let f = common::pinhole();
    let objectives = common::objectives_at_truth(f);
    let objective = objectives
        .iter()
        .find(|o| o.target == CameraId::Left)
        .unwrap();
    let start = compose_perturbation(&reference_initial_errors().left, &f.truth.cameras.left.pose);
    let loss_fn = |p: &Pose| {
        objective
            .evaluate_with(p, Exec::Sequential)
            .map(|r| r.mean_loss)
    };
    let options = SearchOptions::default();
    let mut previous: Option<(usize, f64)> = None;
    for n in [100, 200, 400, 800] {
        let mut schedule = common::reduced_schedule(20);
        schedule.phases[2].iterations = n;
        let r = calibrate_camera(CameraId::Left, &start, &schedule, &loss_fn, 5, &options).unwrap();
        if let Some((m, l)) = previous {
            assert!(
                r.final_loss <= l,
                "{n} iterations: {} > {l} at {m}",
                r.final_loss
            );
        }
        previous = Some((n, r.final_loss));
    }
}
