#![allow(dead_code)]

use std::sync::OnceLock;

use surround_calib::harness::{
    render_synthetic_views, GroundScene, RigGroundTruth, SceneConfig, ViewRenderOptions,
};
use surround_calib::image::GrayImage;
use surround_calib::loss::{CameraObjective, PairTerm};
use surround_calib::search::{calibrate_rig, CalibrationSettings, RigInputs, SearchSchedule};
use surround_calib::{CameraId, Exec, PerCamera, Pose};

pub struct Fixture {
    pub truth: RigGroundTruth,
    pub views: PerCamera<GrayImage>,
}

impl Fixture {
    pub fn inputs(&self, initial: PerCamera<Pose>) -> RigInputs {
        RigInputs {
            images: self.views.clone(),
            intrinsics: self.truth.intrinsics(),
            initial,
        }
    }
}

pub fn scene() -> &'static GroundScene {
    static SCENE: OnceLock<GroundScene> = OnceLock::new();
    SCENE.get_or_init(|| GroundScene::generate(&SceneConfig::default()))
}

fn fixture(truth: RigGroundTruth) -> Fixture {
    let views = render_synthetic_views(
        scene(),
        &truth,
        &ViewRenderOptions::default(),
        Exec::Parallel,
    );
    Fixture { truth, views }
}

pub fn pinhole() -> &'static Fixture {
    static F: OnceLock<Fixture> = OnceLock::new();
    F.get_or_init(|| fixture(RigGroundTruth::reference_pinhole()))
}

pub fn fisheye() -> &'static Fixture {
    static F: OnceLock<Fixture> = OnceLock::new();
    F.get_or_init(|| fixture(RigGroundTruth::reference_fisheye()))
}

/// Default schedule with every phase's iteration count divided by `div`.
pub fn reduced_schedule(div: usize) -> SearchSchedule {
    let mut s = SearchSchedule::default();
    for p in &mut s.phases {
        p.iterations /= div;
    }
    s
}

pub fn settings_with(schedule: SearchSchedule) -> CalibrationSettings {
    CalibrationSettings {
        schedule,
        ..CalibrationSettings::default()
    }
}

/// Objectives for the refined cameras with texture chosen at the ground-truth poses.
pub fn objectives_at_truth(f: &Fixture) -> Vec<CameraObjective<'_>> {
    let mut schedule = SearchSchedule::default().zero_radius();
    for p in &mut schedule.phases {
        p.iterations = 0;
    }
    let settings = settings_with(schedule);
    let result = calibrate_rig(&f.inputs(f.truth.poses()), &settings);
    CameraId::REFINED
        .iter()
        .map(|&id| {
            let outcome = result.outcome(id).unwrap();
            assert!(outcome.result.is_ok(), "{id}: {:?}", outcome.result);
            CameraObjective {
                target: id,
                image: f.views.get(id),
                intrinsics: &f.truth.cameras.get(id).intrinsics,
                terms: outcome
                    .pairs
                    .iter()
                    .map(|p| {
                        PairTerm::new(
                            &p.texture,
                            &settings.spec,
                            p.gamma,
                            settings.exposure.apply_to,
                        )
                    })
                    .collect(),
                coverage_floor: settings.coverage_floor,
            }
        })
        .collect()
}
