//! Photometric extrinsic refinement for four-camera surround-view rigs.
//!
//! Each camera image is projected onto the ground plane as a bird's-eye view
//! (BEV). Where two BEVs overlap, high-gradient pixels of the fixed camera are
//! kept as texture points, and a candidate pose of the other camera is scored
//! by how well its raw image reproduces those intensities after exposure
//! compensation. A three-phase random search over 6-DoF perturbations then
//! refines left, right and rear against the fixed front camera.
//!
//! ```no_run
//! use surround_calib::harness::{self, GroundScene, RigGroundTruth, SceneConfig, ViewRenderOptions};
//! use surround_calib::search::{calibrate_rig, CalibrationSettings, RigInputs};
//! use surround_calib::Exec;
//!
//! let scene = GroundScene::generate(&SceneConfig::default());
//! let truth = RigGroundTruth::reference_pinhole();
//! let images = harness::render_synthetic_views(&scene, &truth, &ViewRenderOptions::default(), Exec::Parallel);
//! let initial = harness::perturb_rig(&truth, &harness::PerturbationPlan::Explicit(harness::reference_initial_errors()));
//! let inputs = RigInputs { images, intrinsics: truth.intrinsics(), initial: initial.poses };
//! let result = calibrate_rig(&inputs, &CalibrationSettings::default());
//! ```

pub mod bev;
pub mod camera;
pub mod config;
pub mod exec;
pub mod harness;
pub mod image;
pub mod loss;
pub mod pose;
pub mod rig;
pub mod search;
pub mod texture;

pub use exec::Exec;
pub use pose::{Perturbation, Pose, PoseParams};
pub use rig::{CameraId, PerCamera};
