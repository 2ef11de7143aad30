//! Rig configuration and calibration report files (JSON).
//!
//! Angles are degrees, lengths meters. Image paths in a rig file are resolved
//! relative to the directory holding the file. The report carries a SHA-256
//! digest of the configuration it was produced from, the seed and the tool
//! version; re-running that configuration reproduces the report exactly.

use std::collections::BTreeSet;
use std::fs;
use std::path::{Path, PathBuf};

use nalgebra::{Matrix3, Rotation3, Vector3};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::bev::{BevError, BevSpec, DEFAULT_MIN_OVERLAP};
use crate::camera::{CameraIntrinsics, IntrinsicsError};
use crate::exec::Exec;
use crate::image::{GrayImage, ImageError};
use crate::loss::DEFAULT_COVERAGE_FLOOR;
use crate::pose::{Perturbation, Pose, PoseParams};
use crate::rig::{CameraId, PerCamera};
use crate::search::{
    CalibrationSettings, ExposureSettings, RigCalibrationResult, RigInputs, ScheduleError,
    SearchOptions, SearchSchedule, SearchWarning, DEFAULT_BATCH_SIZE,
};
use crate::texture::TextureParams;

pub const CONFIG_VERSION: u32 = 1;
pub const REPORT_VERSION: u32 = 1;
pub const TOOL_VERSION: &str = env!("CARGO_PKG_VERSION");

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}: {source}")]
    Json {
        path: PathBuf,
        #[source]
        source: serde_json::Error,
    },
    #[error("unsupported file version {found} (expected {expected})")]
    Version { found: u32, expected: u32 },
    #[error("expected exactly four cameras, found {0}")]
    CameraCount(usize),
    #[error("camera {0} is listed more than once")]
    DuplicateCamera(CameraId),
    #[error("camera {camera}: image file {} does not exist", path.display())]
    MissingImage { camera: CameraId, path: PathBuf },
    #[error("camera {camera}: image {} is {found_w}x{found_h}, intrinsics declare {width}x{height}", path.display())]
    ImageSize {
        camera: CameraId,
        path: PathBuf,
        width: u32,
        height: u32,
        found_w: u32,
        found_h: u32,
    },
    #[error("camera {camera}: {source}")]
    Image {
        camera: CameraId,
        #[source]
        source: ImageError,
    },
    #[error("camera {camera}: {source}")]
    Intrinsics {
        camera: CameraId,
        #[source]
        source: IntrinsicsError,
    },
    #[error("bev: {0}")]
    Bev(#[from] BevError),
    #[error("schedule: {0}")]
    Schedule(#[from] ScheduleError),
    #[error("{0}")]
    Invalid(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CameraConfig {
    pub id: CameraId,
    pub intrinsics: CameraIntrinsics,
    pub initial_pose: PoseParams,
    pub image: PathBuf,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CameraPose {
    pub id: CameraId,
    pub pose: PoseParams,
}

fn default_coverage_floor() -> f64 {
    DEFAULT_COVERAGE_FLOOR
}

fn default_min_overlap() -> usize {
    DEFAULT_MIN_OVERLAP
}

fn default_batch_size() -> usize {
    DEFAULT_BATCH_SIZE
}

/// Everything `calibrate` needs: cameras, BEV geometry, texture and search
/// parameters, and the single seed all randomness derives from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RigConfig {
    pub version: u32,
    pub cameras: Vec<CameraConfig>,
    #[serde(default)]
    pub bev: BevSpec,
    #[serde(default)]
    pub texture: TextureParams,
    #[serde(default)]
    pub exposure: ExposureSettings,
    #[serde(default = "default_coverage_floor")]
    pub coverage_floor: f64,
    #[serde(default = "default_min_overlap")]
    pub min_overlap: usize,
    #[serde(default)]
    pub schedule: SearchSchedule,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_batch_size")]
    pub batch_size: usize,
    /// True poses, when known (synthetic rigs). Only used for reporting.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ground_truth: Option<Vec<CameraPose>>,
}

impl RigConfig {
    /// Config with default global settings for the given cameras.
    pub fn new(cameras: Vec<CameraConfig>) -> Self {
        Self {
            version: CONFIG_VERSION,
            cameras,
            bev: BevSpec::default(),
            texture: TextureParams::default(),
            exposure: ExposureSettings::default(),
            coverage_floor: DEFAULT_COVERAGE_FLOOR,
            min_overlap: DEFAULT_MIN_OVERLAP,
            schedule: SearchSchedule::default(),
            seed: 0,
            batch_size: DEFAULT_BATCH_SIZE,
            ground_truth: None,
        }
    }

    pub fn from_json(text: &str) -> Result<Self, serde_json::Error> {
        serde_json::from_str(text)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes")
    }

    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = fs::read_to_string(path).map_err(|source| ConfigError::Io {
            path: path.to_path_buf(),
            source,
        })?;
        Self::from_json(&text).map_err(|source| ConfigError::Json {
            path: path.to_path_buf(),
            source,
        })
    }

    pub fn save(&self, path: &Path) -> Result<(), ConfigError> {
        fs::write(path, self.to_json()).map_err(|source| ConfigError::Io {
            path: path.to_path_buf(),
            source,
        })
    }

    /// Hex SHA-256 of the compact JSON serialization.
    pub fn digest(&self) -> String {
        let bytes = serde_json::to_vec(self).expect("config serializes");
        hex::encode(Sha256::digest(&bytes))
    }

    pub fn camera(&self, id: CameraId) -> Option<&CameraConfig> {
        self.cameras.iter().find(|c| c.id == id)
    }

    /// Checks everything that does not touch the file system.
    pub fn validate_structure(&self) -> Result<(), ConfigError> {
        if self.version != CONFIG_VERSION {
            return Err(ConfigError::Version {
                found: self.version,
                expected: CONFIG_VERSION,
            });
        }
        if self.cameras.len() != 4 {
            return Err(ConfigError::CameraCount(self.cameras.len()));
        }
        let mut seen = BTreeSet::new();
        for c in &self.cameras {
            if !seen.insert(c.id) {
                return Err(ConfigError::DuplicateCamera(c.id));
            }
            c.intrinsics
                .validate()
                .map_err(|source| ConfigError::Intrinsics {
                    camera: c.id,
                    source,
                })?;
        }
        if let Some(gt) = &self.ground_truth {
            let ids: BTreeSet<_> = gt.iter().map(|p| p.id).collect();
            if ids.len() != gt.len() {
                return Err(ConfigError::Invalid(
                    "ground_truth lists a camera twice".into(),
                ));
            }
        }
        self.bev.validate()?;
        self.schedule.validate()?;
        if self.batch_size == 0 {
            return Err(ConfigError::Invalid("batch_size must be at least 1".into()));
        }
        if !(self.coverage_floor > 0.0 && self.coverage_floor <= 1.0) {
            return Err(ConfigError::Invalid(format!(
                "coverage_floor {} outside (0, 1]",
                self.coverage_floor
            )));
        }
        Ok(())
    }

    pub fn image_path(&self, id: CameraId, base_dir: &Path) -> Option<PathBuf> {
        self.camera(id).map(|c| base_dir.join(&c.image))
    }

    /// Full validation, including that every image exists with the declared size.
    pub fn validate(&self, base_dir: &Path) -> Result<(), ConfigError> {
        self.validate_structure()?;
        for c in &self.cameras {
            let path = base_dir.join(&c.image);
            if !path.is_file() {
                return Err(ConfigError::MissingImage { camera: c.id, path });
            }
            let (found_w, found_h) =
                ::image::image_dimensions(&path).map_err(|source| ConfigError::Image {
                    camera: c.id,
                    source: ImageError::Codec {
                        path: path.display().to_string(),
                        source,
                    },
                })?;
            let (width, height) = (c.intrinsics.width(), c.intrinsics.height());
            if (found_w, found_h) != (width, height) {
                return Err(ConfigError::ImageSize {
                    camera: c.id,
                    path,
                    width,
                    height,
                    found_w,
                    found_h,
                });
            }
        }
        Ok(())
    }

    fn per_camera<T>(&self, f: impl Fn(&CameraConfig) -> T) -> PerCamera<T> {
        PerCamera::from_fn(|id| f(self.camera(id).expect("validated config has every camera")))
    }

    pub fn intrinsics(&self) -> PerCamera<CameraIntrinsics> {
        self.per_camera(|c| c.intrinsics)
    }

    pub fn initial_poses(&self) -> PerCamera<Pose> {
        self.per_camera(|c| c.initial_pose.to_pose())
    }

    /// True poses when all four are present.
    pub fn ground_truth_poses(&self) -> Option<PerCamera<Pose>> {
        let gt = self.ground_truth.as_ref()?;
        let find = |id| gt.iter().find(|p| p.id == id).map(|p| p.pose.to_pose());
        Some(PerCamera {
            front: find(CameraId::Front)?,
            left: find(CameraId::Left)?,
            right: find(CameraId::Right)?,
            rear: find(CameraId::Rear)?,
        })
    }

    pub fn settings(&self, exec: Exec) -> CalibrationSettings {
        CalibrationSettings {
            spec: self.bev,
            texture: self.texture,
            exposure: self.exposure.clone(),
            coverage_floor: self.coverage_floor,
            min_overlap: self.min_overlap,
            schedule: self.schedule.clone(),
            seed: self.seed,
            search: SearchOptions {
                batch_size: self.batch_size,
                exec,
            },
        }
    }

    /// Validates, then loads the four images.
    pub fn load_inputs(&self, base_dir: &Path) -> Result<RigInputs, ConfigError> {
        self.validate(base_dir)?;
        let mut images = Vec::with_capacity(4);
        for id in CameraId::ALL {
            let path = self.image_path(id, base_dir).expect("validated");
            images.push(
                GrayImage::load(&path)
                    .map_err(|source| ConfigError::Image { camera: id, source })?,
            );
        }
        let mut it = images.into_iter();
        let images = PerCamera::from_fn(|_| it.next().expect("four images"));
        Ok(RigInputs {
            images,
            intrinsics: self.intrinsics(),
            initial: self.initial_poses(),
        })
    }
}

/// Bit-exact pose storage: row-major rotation matrix and translation of `T_CG`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PoseMatrix {
    pub rotation: [[f64; 3]; 3],
    pub translation: [f64; 3],
}

impl From<&Pose> for PoseMatrix {
    fn from(p: &Pose) -> Self {
        let m = p.rotation.matrix();
        Self {
            rotation: [
                [m[(0, 0)], m[(0, 1)], m[(0, 2)]],
                [m[(1, 0)], m[(1, 1)], m[(1, 2)]],
                [m[(2, 0)], m[(2, 1)], m[(2, 2)]],
            ],
            translation: [p.translation.x, p.translation.y, p.translation.z],
        }
    }
}

impl PoseMatrix {
    pub fn to_pose(&self) -> Pose {
        let r = &self.rotation;
        let m = Matrix3::new(
            r[0][0], r[0][1], r[0][2], r[1][0], r[1][1], r[1][2], r[2][0], r[2][1], r[2][2],
        );
        Pose::new(
            Rotation3::from_matrix_unchecked(m),
            Vector3::new(
                self.translation[0],
                self.translation[1],
                self.translation[2],
            ),
        )
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CameraStatus {
    /// Not optimized (the front camera).
    Fixed,
    Refined,
    Failed,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairSummary {
    pub source: CameraId,
    pub overlap_px: usize,
    pub gamma: f64,
    pub texture_points: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CameraReport {
    pub id: CameraId,
    pub status: CameraStatus,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
    pub initial: PoseParams,
    pub refined: PoseParams,
    pub refined_matrix: PoseMatrix,
    /// Increment from the initial to the refined pose.
    pub delta_vs_initial: Perturbation,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub delta_vs_ground_truth: Option<Perturbation>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub initial_loss: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub final_loss: Option<f64>,
    pub pairs: Vec<PairSummary>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub trace_file: Option<String>,
    #[serde(default)]
    pub warnings: Vec<String>,
}

/// Overall outcome, mapped to the process exit code by the CLI.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RunStatus {
    Success,
    Partial,
    Failure,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CalibrationReport {
    pub version: u32,
    pub tool_version: String,
    pub config_digest: String,
    pub seed: u64,
    pub batch_size: usize,
    pub cameras: Vec<CameraReport>,
}

impl CalibrationReport {
    /// `trace_files` holds the path (as written in the report) of each
    /// refined camera's trace, if one was written.
    pub fn new(
        config: &RigConfig,
        result: &RigCalibrationResult,
        trace_files: &PerCamera<Option<String>>,
    ) -> Self {
        let initial = config.initial_poses();
        let gt = config.ground_truth_poses();
        let cameras = CameraId::ALL
            .iter()
            .map(|&id| {
                let refined = result.poses.get(id);
                let outcome = result.outcome(id);
                let (status, error, initial_loss, final_loss, warnings) =
                    match outcome.map(|o| &o.result) {
                        None => (CameraStatus::Fixed, None, None, None, Vec::new()),
                        Some(Ok(r)) => (
                            CameraStatus::Refined,
                            None,
                            Some(r.initial_loss),
                            Some(r.final_loss),
                            r.trace.warnings.iter().map(warning_text).collect(),
                        ),
                        Some(Err(e)) => (
                            CameraStatus::Failed,
                            Some(e.to_string()),
                            None,
                            None,
                            Vec::new(),
                        ),
                    };
                CameraReport {
                    id,
                    status,
                    error,
                    initial: config
                        .camera(id)
                        .map(|c| c.initial_pose)
                        .unwrap_or_default(),
                    refined: PoseParams::from_pose(refined),
                    refined_matrix: PoseMatrix::from(refined),
                    delta_vs_initial: Perturbation::between(refined, initial.get(id)),
                    delta_vs_ground_truth: gt
                        .as_ref()
                        .map(|g| Perturbation::between(refined, g.get(id))),
                    initial_loss,
                    final_loss,
                    pairs: outcome
                        .map(|o| {
                            o.pairs
                                .iter()
                                .map(|p| PairSummary {
                                    source: p.texture.source,
                                    overlap_px: p.overlap_px,
                                    gamma: p.gamma.gamma(),
                                    texture_points: p.texture.len(),
                                })
                                .collect()
                        })
                        .unwrap_or_default(),
                    trace_file: if status == CameraStatus::Refined {
                        trace_files.get(id).clone()
                    } else {
                        None
                    },
                    warnings,
                }
            })
            .collect();
        Self {
            version: REPORT_VERSION,
            tool_version: TOOL_VERSION.to_string(),
            config_digest: config.digest(),
            seed: config.seed,
            batch_size: config.batch_size,
            cameras,
        }
    }

    pub fn camera(&self, id: CameraId) -> Option<&CameraReport> {
        self.cameras.iter().find(|c| c.id == id)
    }

    pub fn status(&self) -> RunStatus {
        let refined = self
            .cameras
            .iter()
            .filter(|c| c.status == CameraStatus::Refined)
            .count();
        let failed = self
            .cameras
            .iter()
            .filter(|c| c.status == CameraStatus::Failed)
            .count();
        match (refined, failed) {
            (_, 0) => RunStatus::Success,
            (0, _) => RunStatus::Failure,
            _ => RunStatus::Partial,
        }
    }

    /// Refined poses from the exact matrices.
    pub fn refined_poses(&self) -> Option<PerCamera<Pose>> {
        let find = |id| self.camera(id).map(|c| c.refined_matrix.to_pose());
        Some(PerCamera {
            front: find(CameraId::Front)?,
            left: find(CameraId::Left)?,
            right: find(CameraId::Right)?,
            rear: find(CameraId::Rear)?,
        })
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }

    pub fn from_json(text: &str) -> Result<Self, serde_json::Error> {
        serde_json::from_str(text)
    }

    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = fs::read_to_string(path).map_err(|source| ConfigError::Io {
            path: path.to_path_buf(),
            source,
        })?;
        let report = Self::from_json(&text).map_err(|source| ConfigError::Json {
            path: path.to_path_buf(),
            source,
        })?;
        if report.version != REPORT_VERSION {
            return Err(ConfigError::Version {
                found: report.version,
                expected: REPORT_VERSION,
            });
        }
        Ok(report)
    }
}

fn warning_text(w: &SearchWarning) -> String {
    match w {
        SearchWarning::NoImprovement { camera, phase } => {
            format!("{camera}: no improvement in phase {phase}")
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::harness;

    fn sample_config() -> RigConfig {
        let params = harness::reference_pose_params();
        let cameras = CameraId::ALL
            .iter()
            .map(|&id| CameraConfig {
                id,
                intrinsics: if id == CameraId::Rear {
                    harness::reference_fisheye()
                } else {
                    harness::reference_pinhole()
                },
                initial_pose: *params.get(id),
                image: PathBuf::from(format!("views/{id}.png")),
            })
            .collect();
        let mut cfg = RigConfig::new(cameras);
        cfg.seed = 17;
        cfg.ground_truth = Some(
            CameraId::ALL
                .iter()
                .map(|&id| CameraPose {
                    id,
                    pose: *params.get(id),
                })
                .collect(),
        );
        cfg
    }

    #[test]
    fn json_round_trip_is_identity() {
        let cfg = sample_config();
        let text = cfg.to_json();
        let back = RigConfig::from_json(&text).unwrap();
        assert_eq!(back, cfg);
        assert_eq!(back.to_json(), text);
        assert_eq!(back.digest(), cfg.digest());
    }

    #[test]
    fn digest_tracks_content() {
        let a = sample_config();
        let mut b = a.clone();
        b.seed += 1;
        assert_ne!(a.digest(), b.digest());
        assert_eq!(a.digest().len(), 64);
    }

    #[test]
    fn defaults_fill_missing_globals() {
        let cfg = sample_config();
        let mut v: serde_json::Value = serde_json::from_str(&cfg.to_json()).unwrap();
        let obj = v.as_object_mut().unwrap();
        for k in [
            "bev",
            "texture",
            "exposure",
            "coverage_floor",
            "min_overlap",
            "schedule",
            "batch_size",
        ] {
            obj.remove(k);
        }
        let back: RigConfig = serde_json::from_value(v).unwrap();
        assert_eq!(back.bev, BevSpec::default());
        assert_eq!(back.schedule, SearchSchedule::default());
        assert_eq!(back.batch_size, DEFAULT_BATCH_SIZE);
    }

    #[test]
    fn structural_errors() {
        let mut cfg = sample_config();
        cfg.cameras.pop();
        assert!(matches!(
            cfg.validate_structure(),
            Err(ConfigError::CameraCount(3))
        ));
        let mut cfg = sample_config();
        cfg.cameras[1].id = CameraId::Front;
        assert!(matches!(
            cfg.validate_structure(),
            Err(ConfigError::DuplicateCamera(CameraId::Front))
        ));
        let mut cfg = sample_config();
        cfg.version = 9;
        assert!(matches!(
            cfg.validate_structure(),
            Err(ConfigError::Version { found: 9, .. })
        ));
        let mut cfg = sample_config();
        cfg.batch_size = 0;
        assert!(cfg.validate_structure().is_err());
        assert!(
            RigConfig::from_json(&sample_config().to_json().replace("\"seed\"", "\"sede\""))
                .is_err()
        );
    }

    #[test]
    fn missing_image_names_the_path() {
        let dir = tempfile::tempdir().unwrap();
        let err = sample_config().validate(dir.path()).unwrap_err();
        let msg = err.to_string();
        assert!(matches!(err, ConfigError::MissingImage { .. }));
        assert!(msg.contains("front.png"), "{msg}");
    }

    #[test]
    fn image_size_is_checked() {
        let dir = tempfile::tempdir().unwrap();
        std::fs::create_dir(dir.path().join("views")).unwrap();
        let cfg = sample_config();
        for c in &cfg.cameras {
            GrayImage::new(8, 8)
                .save_png(&dir.path().join(&c.image))
                .unwrap();
        }
        assert!(matches!(
            cfg.validate(dir.path()),
            Err(ConfigError::ImageSize { found_w: 8, .. })
        ));
    }

    #[test]
    fn pose_matrix_is_exact() {
        let p = PoseParams::new(3.1, -47.0, 100.3, 0.1, -2.0, 4.1).to_pose();
        let m = PoseMatrix::from(&p);
        let text = serde_json::to_string(&m).unwrap();
        let back: PoseMatrix = serde_json::from_str(&text).unwrap();
        assert_eq!(back.to_pose(), p);
    }
}
