mod common;

use surround_calib::harness::{
    evaluate_mae, perturb_rig, reference_initial_errors, render_synthetic_views, GroundScene,
    PerturbationPlan, RigGroundTruth, SceneConfig, ViewRenderOptions,
};
use surround_calib::search::{calibrate_rig, RigInputs};
use surround_calib::{CameraId, Exec};

/// Worst rotation error over the refined cameras; a failed camera counts as infinite.
fn final_error(detail: f64, seed: u64) -> f64 {
    let scene = GroundScene::generate(&SceneConfig {
        detail,
        seed,
        ..SceneConfig::default()
    });
    let truth = RigGroundTruth::reference_pinhole();
    let views = render_synthetic_views(
        &scene,
        &truth,
        &ViewRenderOptions::default(),
        Exec::Parallel,
    );
    let start = perturb_rig(
        &truth,
        &PerturbationPlan::Explicit(reference_initial_errors()),
    )
    .poses;
    let inputs = RigInputs {
        images: views,
        intrinsics: truth.intrinsics(),
        initial: start,
    };
    let r = calibrate_rig(&inputs, &common::settings_with(common::reduced_schedule(5)));
    if !r.failed().is_empty() {
        return f64::INFINITY;
    }
    evaluate_mae(&r.poses, &truth.poses(), &CameraId::REFINED)
        .rows
        .iter()
        .map(|row| row.max_rotation())
        .fold(0.0, f64::max)
}

fn median(mut v: Vec<f64>) -> f64 {
    v.sort_by(f64::total_cmp);
    v[v.len() / 2]
}

#[test]
fn richer_texture_never_hurts() {
    let mut medians = Vec::new();
    for detail in [0.02, 0.5, 1.0] {
        let errors: Vec<f64> = (1..=3).map(|seed| final_error(detail, seed)).collect();
        eprintln!("detail {detail}: {errors:?}");
        medians.push(median(errors));
    }
    assert!(
        medians.windows(2).all(|w| w[1] <= w[0]),
        "medians {medians:?}"
    );
}
