//! Exposure-compensated photometric loss of a candidate pose.
//!
//! Each texture point carries the intensity it had in the fixed neighbour's
//! BEV. For a candidate pose of the target camera the point's ground location
//! is projected into the target's raw image, sampled bilinearly, and the
//! squared intensity difference is accumulated. The loss is the mean over
//! points that land inside the image; candidates that lose more than the
//! coverage floor are rejected rather than scored.

use nalgebra::Vector3;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::bev::BevSpec;
use crate::camera::CameraIntrinsics;
use crate::exec::{pairwise_sum, Exec};
use crate::image::GrayImage;
use crate::pose::Pose;
use crate::rig::CameraId;
use crate::texture::{ExposureRatio, ExposureTarget, TexturePointSet};

pub const DEFAULT_COVERAGE_FLOOR: f64 = 0.5;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum LossError {
    #[error("texture point set is empty")]
    EmptyPointSet,
    #[error("only {valid} of {total} texture points are visible (coverage floor {floor})")]
    TooFewValid {
        valid: usize,
        total: usize,
        floor: f64,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LossReport {
    /// Mean squared residual over visible points, intensity^2.
    pub mean_loss: f64,
    pub valid_count: usize,
    pub total_count: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LossSettings {
    pub coverage_floor: f64,
    pub exposure_target: ExposureTarget,
}

impl Default for LossSettings {
    fn default() -> Self {
        Self {
            coverage_floor: DEFAULT_COVERAGE_FLOOR,
            exposure_target: ExposureTarget::Target,
        }
    }
}

/// One fixed neighbour's contribution: texture points lifted to the ground.
#[derive(Debug, Clone)]
pub struct PairTerm {
    pub source: CameraId,
    /// Ground point and stored source intensity.
    samples: Vec<(Vector3<f64>, f64)>,
    /// Multiplier applied to the target sample.
    target_gain: f64,
    /// Multiplier applied to the stored source intensity.
    source_gain: f64,
}

impl PairTerm {
    pub fn new(
        points: &TexturePointSet,
        spec: &BevSpec,
        gamma: ExposureRatio,
        target: ExposureTarget,
    ) -> Self {
        let (target_gain, source_gain) = match target {
            ExposureTarget::Target => (gamma.gamma(), 1.0),
            ExposureTarget::Source => (1.0, 1.0 / gamma.gamma()),
        };
        Self {
            source: points.source,
            samples: points
                .points
                .iter()
                .map(|p| {
                    (
                        spec.bev_pixel_to_ground(p.x as f64, p.y as f64),
                        p.intensity as f64,
                    )
                })
                .collect(),
            target_gain,
            source_gain,
        }
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    /// `(sum of squared residuals, visible count)` with an order-stable reduction.
    fn residual_sum(
        &self,
        candidate: &Pose,
        image: &GrayImage,
        intr: &CameraIntrinsics,
        exec: Exec,
    ) -> (f64, usize) {
        let chunks = exec.map_chunks(&self.samples, |chunk| {
            let mut sum = 0.0;
            let mut count = 0usize;
            for (ground, intensity) in chunk {
                let pc = candidate.transform_point(ground);
                let Ok(px) = intr.project(&pc) else { continue };
                let Some(sample) = image.sample_bilinear(px.x, px.y) else {
                    continue;
                };
                let r = self.source_gain * intensity - self.target_gain * sample;
                sum += r * r;
                count += 1;
            }
            (sum, count)
        });
        let sums: Vec<f64> = chunks.iter().map(|c| c.0).collect();
        (pairwise_sum(&sums), chunks.iter().map(|c| c.1).sum())
    }
}

/// Everything needed to score poses of one target camera.
#[derive(Debug, Clone)]
pub struct CameraObjective<'a> {
    pub target: CameraId,
    pub image: &'a GrayImage,
    pub intrinsics: &'a CameraIntrinsics,
    pub terms: Vec<PairTerm>,
    pub coverage_floor: f64,
}

impl<'a> CameraObjective<'a> {
    pub fn evaluate(&self, candidate: &Pose) -> Result<LossReport, LossError> {
        self.evaluate_with(candidate, Exec::default())
    }

    /// Pooled loss over every neighbour term that meets the coverage floor.
    pub fn evaluate_with(&self, candidate: &Pose, exec: Exec) -> Result<LossReport, LossError> {
        if self.terms.is_empty() || self.terms.iter().all(|t| t.is_empty()) {
            return Err(LossError::EmptyPointSet);
        }
        let mut sums = Vec::with_capacity(self.terms.len());
        let mut valid = 0usize;
        let mut total = 0usize;
        let mut failed = (0usize, 0usize);
        for term in self.terms.iter().filter(|t| !t.is_empty()) {
            let (sum, count) = term.residual_sum(candidate, self.image, self.intrinsics, exec);
            if (count as f64) < self.coverage_floor * term.len() as f64 || count == 0 {
                failed.0 += count;
                failed.1 += term.len();
                continue;
            }
            sums.push(sum);
            valid += count;
            total += term.len();
        }
        if valid == 0 {
            return Err(LossError::TooFewValid {
                valid: failed.0,
                total: failed.1,
                floor: self.coverage_floor,
            });
        }
        let mean_loss = pairwise_sum(&sums) / valid as f64;
        Ok(LossReport {
            mean_loss,
            valid_count: valid,
            total_count: total,
        })
    }
}

/// Single-neighbour photometric loss.
#[allow(clippy::too_many_arguments)]
pub fn photometric_loss(
    points: &TexturePointSet,
    candidate: &Pose,
    img_j: &GrayImage,
    intr_j: &CameraIntrinsics,
    spec: &BevSpec,
    gamma: ExposureRatio,
    settings: &LossSettings,
) -> Result<LossReport, LossError> {
    let objective = CameraObjective {
        target: points.target,
        image: img_j,
        intrinsics: intr_j,
        terms: vec![PairTerm::new(points, spec, gamma, settings.exposure_target)],
        coverage_floor: settings.coverage_floor,
    };
    objective.evaluate(candidate)
}
