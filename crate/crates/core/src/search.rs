//! Three-phase coarse-to-fine random search over pose perturbations, and the
//! rig scheduler that holds the front camera fixed while refining the others.
//!
//! Candidates are drawn from a per-(camera, phase) ChaCha stream and scored in
//! fixed-size batches. Every candidate of a batch is composed against the
//! batch-start centre; after the batch the lowest-loss candidate (earliest
//! draw on ties) replaces the incumbent if it is strictly better. With a batch
//! size of one this is the plain sequential accept-if-better loop.

use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::bev::{overlap_mask, render_bev_with, BevError, BevSpec, DEFAULT_MIN_OVERLAP};
use crate::camera::CameraIntrinsics;
use crate::exec::Exec;
use crate::image::GrayImage;
use crate::loss::{CameraObjective, LossError, PairTerm, DEFAULT_COVERAGE_FLOOR};
use crate::pose::{compose_perturbation, Perturbation, Pose};
use crate::rig::{CameraId, PerCamera};
use crate::texture::{
    exposure_ratio, extract_texture_points, ExposureRatio, ExposureTarget, TextureError,
    TextureParams, TexturePointSet,
};

pub const DEFAULT_BATCH_SIZE: usize = 32;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CenterPolicy {
    /// Every candidate perturbs the pose the search started from.
    FixedInitial,
    /// Candidates perturb the incumbent best pose.
    CurrentOptimal,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SearchPhase {
    /// Per-axis half-width for roll, pitch and yaw draws, degrees.
    pub rot_radius_deg: f64,
    /// Per-axis half-width for dx, dy and dz draws, meters.
    pub trans_radius_m: f64,
    pub iterations: usize,
    pub center_policy: CenterPolicy,
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ScheduleError {
    #[error("phase {phase}: radii must be finite and non-negative")]
    InvalidRadius { phase: usize },
    #[error("phase {phase}: radii must not grow from one phase to the next")]
    GrowingRadius { phase: usize },
    #[error("batch size must be at least 1")]
    ZeroBatch,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SearchSchedule {
    pub phases: Vec<SearchPhase>,
}

impl Default for SearchSchedule {
    fn default() -> Self {
        Self {
            phases: vec![
                SearchPhase {
                    rot_radius_deg: 3.0,
                    trans_radius_m: 0.10,
                    iterations: 15_000,
                    center_policy: CenterPolicy::FixedInitial,
                },
                SearchPhase {
                    rot_radius_deg: 1.0,
                    trans_radius_m: 0.04,
                    iterations: 15_000,
                    center_policy: CenterPolicy::CurrentOptimal,
                },
                SearchPhase {
                    rot_radius_deg: 0.3,
                    trans_radius_m: 0.01,
                    iterations: 10_000,
                    center_policy: CenterPolicy::CurrentOptimal,
                },
            ],
        }
    }
}

impl SearchSchedule {
    /// Same phase structure with every radius set to zero.
    pub fn zero_radius(&self) -> Self {
        Self {
            phases: self
                .phases
                .iter()
                .map(|p| SearchPhase {
                    rot_radius_deg: 0.0,
                    trans_radius_m: 0.0,
                    ..*p
                })
                .collect(),
        }
    }

    /// Radii must be finite, non-negative and non-increasing across phases.
    pub fn validate(&self) -> Result<(), ScheduleError> {
        for (k, p) in self.phases.iter().enumerate() {
            let ok = |v: f64| v.is_finite() && v >= 0.0;
            if !ok(p.rot_radius_deg) || !ok(p.trans_radius_m) {
                return Err(ScheduleError::InvalidRadius { phase: k + 1 });
            }
            if k > 0 {
                let prev = &self.phases[k - 1];
                if p.rot_radius_deg > prev.rot_radius_deg || p.trans_radius_m > prev.trans_radius_m
                {
                    return Err(ScheduleError::GrowingRadius { phase: k + 1 });
                }
            }
        }
        Ok(())
    }

    pub fn total_iterations(&self) -> usize {
        self.phases.iter().map(|p| p.iterations).sum()
    }
}

/// Independent, reproducible draw stream for one (camera, phase).
#[derive(Debug, Clone)]
pub struct PhaseRng(ChaCha8Rng);

impl PhaseRng {
    pub fn new(master_seed: u64, camera: CameraId, phase_index: usize) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(master_seed);
        rng.set_stream((camera.index() as u64) << 32 | phase_index as u64);
        Self(rng)
    }

    pub fn from_seed_and_stream(master_seed: u64, stream: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(master_seed);
        rng.set_stream(stream);
        Self(rng)
    }

    #[inline]
    fn symmetric(&mut self, radius: f64) -> f64 {
        if radius == 0.0 {
            // Still consume a draw so the stream position does not depend on radii.
            let _: f64 = self.0.random();
            return 0.0;
        }
        self.0.random_range(-radius..=radius)
    }
}

/// Six independent uniform draws within the phase's per-axis ranges.
pub fn sample_perturbation(phase: &SearchPhase, rng: &mut PhaseRng) -> Perturbation {
    let r = phase.rot_radius_deg;
    let t = phase.trans_radius_m;
    Perturbation::new(
        rng.symmetric(r),
        rng.symmetric(r),
        rng.symmetric(r),
        rng.symmetric(t),
        rng.symmetric(t),
        rng.symmetric(t),
    )
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceRecord {
    pub camera: CameraId,
    /// One-based phase number.
    pub phase: usize,
    pub iteration: usize,
    pub perturbation: Perturbation,
    /// `None` when the candidate was rejected.
    pub loss: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub rejection: Option<String>,
    pub accepted: bool,
    /// Incumbent loss once this candidate's batch was resolved.
    pub best_loss: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum SearchWarning {
    NoImprovement { camera: CameraId, phase: usize },
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct SearchTrace {
    pub records: Vec<TraceRecord>,
    pub warnings: Vec<SearchWarning>,
}

impl SearchTrace {
    pub fn best_loss_history(&self) -> Vec<f64> {
        self.records.iter().map(|r| r.best_loss).collect()
    }

    pub fn is_monotone(&self) -> bool {
        self.records
            .windows(2)
            .all(|w| w[1].best_loss <= w[0].best_loss)
    }

    /// One JSON object per line.
    pub fn to_json_lines(&self) -> String {
        let mut out = String::new();
        for r in &self.records {
            out.push_str(&serde_json::to_string(r).expect("trace records serialize"));
            out.push('\n');
        }
        out
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SearchOptions {
    pub batch_size: usize,
    pub exec: Exec,
}

impl Default for SearchOptions {
    fn default() -> Self {
        Self {
            batch_size: DEFAULT_BATCH_SIZE,
            exec: Exec::default(),
        }
    }
}

/// Incumbent pose and its loss.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Incumbent {
    pub pose: Pose,
    pub loss: f64,
}

/// Runs one phase; returns the incumbent after `phase.iterations` candidates.
#[allow(clippy::too_many_arguments)]
pub fn run_phase<F>(
    camera: CameraId,
    phase_number: usize,
    phase: &SearchPhase,
    center: &Pose,
    best: Incumbent,
    loss_fn: &F,
    rng: &mut PhaseRng,
    options: &SearchOptions,
    trace: &mut SearchTrace,
) -> Incumbent
where
    F: Fn(&Pose) -> Result<f64, LossError> + Sync,
{
    let batch = options.batch_size.max(1);
    let mut incumbent = best;
    let mut accepted_any = false;
    let mut k = 0;
    while k < phase.iterations {
        let n = batch.min(phase.iterations - k);
        let base = match phase.center_policy {
            CenterPolicy::FixedInitial => *center,
            CenterPolicy::CurrentOptimal => incumbent.pose,
        };
        let draws: Vec<Perturbation> = (0..n).map(|_| sample_perturbation(phase, rng)).collect();
        let results = options.exec.map_indexed(n, |i| {
            let pose = compose_perturbation(&draws[i], &base);
            (pose, loss_fn(&pose))
        });

        let mut winner: Option<usize> = None;
        let mut winner_loss = incumbent.loss;
        for (i, (_, res)) in results.iter().enumerate() {
            if let Ok(l) = res {
                if *l < winner_loss {
                    winner_loss = *l;
                    winner = Some(i);
                }
            }
        }
        if let Some(i) = winner {
            incumbent = Incumbent {
                pose: results[i].0,
                loss: winner_loss,
            };
            accepted_any = true;
        }
        for (i, (_, res)) in results.iter().enumerate() {
            trace.records.push(TraceRecord {
                camera,
                phase: phase_number,
                iteration: k + i,
                perturbation: draws[i],
                loss: res.as_ref().ok().copied(),
                rejection: res.as_ref().err().map(|e| e.to_string()),
                accepted: winner == Some(i),
                best_loss: incumbent.loss,
            });
        }
        k += n;
    }
    if !accepted_any && phase.iterations > 0 {
        log::warn!("{camera}: no improvement in phase {phase_number}");
        trace.warnings.push(SearchWarning::NoImprovement {
            camera,
            phase: phase_number,
        });
    }
    incumbent
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SearchError {
    #[error("initial pose of {camera} cannot be scored: {source}")]
    InitialRejected {
        camera: CameraId,
        #[source]
        source: LossError,
    },
    #[error("{source_cam}->{target}: {reason}")]
    PairSetup {
        source_cam: CameraId,
        target: CameraId,
        reason: String,
    },
    #[error("{camera}: no usable reference neighbour ({details})")]
    NoReference { camera: CameraId, details: String },
    #[error(transparent)]
    Schedule(#[from] ScheduleError),
}

#[derive(Debug, Clone, PartialEq)]
pub struct CameraSearchResult {
    pub pose: Pose,
    pub initial_loss: f64,
    pub final_loss: f64,
    pub trace: SearchTrace,
}

/// Runs every phase of `schedule` in order, threading the incumbent.
pub fn calibrate_camera<F>(
    camera: CameraId,
    initial: &Pose,
    schedule: &SearchSchedule,
    loss_fn: &F,
    seed: u64,
    options: &SearchOptions,
) -> Result<CameraSearchResult, SearchError>
where
    F: Fn(&Pose) -> Result<f64, LossError> + Sync,
{
    schedule.validate()?;
    if options.batch_size == 0 {
        return Err(ScheduleError::ZeroBatch.into());
    }
    let initial_loss =
        loss_fn(initial).map_err(|source| SearchError::InitialRejected { camera, source })?;
    let mut best = Incumbent {
        pose: *initial,
        loss: initial_loss,
    };
    let mut trace = SearchTrace::default();
    for (k, phase) in schedule.phases.iter().enumerate() {
        let mut rng = PhaseRng::new(seed, camera, k);
        best = run_phase(
            camera,
            k + 1,
            phase,
            initial,
            best,
            loss_fn,
            &mut rng,
            options,
            &mut trace,
        );
    }
    Ok(CameraSearchResult {
        pose: best.pose,
        initial_loss,
        final_loss: best.loss,
        trace,
    })
}

/// Images, intrinsics and starting poses of all four cameras.
#[derive(Debug, Clone)]
pub struct RigInputs {
    pub images: PerCamera<GrayImage>,
    pub intrinsics: PerCamera<CameraIntrinsics>,
    pub initial: PerCamera<Pose>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExposureSettings {
    /// When false the ratio is fixed to 1.
    pub enabled: bool,
    pub apply_to: ExposureTarget,
}

impl Default for ExposureSettings {
    fn default() -> Self {
        Self {
            enabled: false,
            apply_to: ExposureTarget::Target,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CalibrationSettings {
    pub spec: BevSpec,
    pub texture: TextureParams,
    pub exposure: ExposureSettings,
    pub coverage_floor: f64,
    pub min_overlap: usize,
    pub schedule: SearchSchedule,
    pub seed: u64,
    pub search: SearchOptions,
}

impl Default for CalibrationSettings {
    fn default() -> Self {
        Self {
            spec: BevSpec::default(),
            texture: TextureParams::default(),
            exposure: ExposureSettings::default(),
            coverage_floor: DEFAULT_COVERAGE_FLOOR,
            min_overlap: DEFAULT_MIN_OVERLAP,
            schedule: SearchSchedule::default(),
            seed: 0,
            search: SearchOptions::default(),
        }
    }
}

/// Setup facts for one (fixed neighbour, target) pair.
#[derive(Debug, Clone, PartialEq)]
pub struct PairSetup {
    pub overlap_px: usize,
    pub gamma: ExposureRatio,
    pub texture: TexturePointSet,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CameraOutcome {
    pub camera: CameraId,
    pub pairs: Vec<PairSetup>,
    pub result: Result<CameraSearchResult, SearchError>,
}

#[derive(Debug, Clone)]
pub struct RigCalibrationResult {
    /// Refined poses; the front camera and failed cameras keep their input pose.
    pub poses: PerCamera<Pose>,
    /// Left, right and rear, in processing order.
    pub cameras: Vec<CameraOutcome>,
    pub duration: Duration,
}

impl RigCalibrationResult {
    pub fn outcome(&self, id: CameraId) -> Option<&CameraOutcome> {
        self.cameras.iter().find(|c| c.camera == id)
    }

    pub fn failed(&self) -> Vec<CameraId> {
        self.cameras
            .iter()
            .filter(|c| c.result.is_err())
            .map(|c| c.camera)
            .collect()
    }

    /// Equality of everything except wall-clock time.
    pub fn same_outcome(&self, other: &RigCalibrationResult) -> bool {
        self.poses == other.poses && self.cameras == other.cameras
    }
}

fn pair_error(source: CameraId, target: CameraId, e: impl std::fmt::Display) -> SearchError {
    SearchError::PairSetup {
        source_cam: source,
        target,
        reason: e.to_string(),
    }
}

/// Builds the pair term scoring `target` against the fixed `source` camera.
fn setup_pair(
    inputs: &RigInputs,
    source: CameraId,
    source_pose: &Pose,
    target: CameraId,
    settings: &CalibrationSettings,
) -> Result<(PairTerm, PairSetup), SearchError> {
    let exec = settings.search.exec;
    let spec = &settings.spec;
    let bev_i = render_bev_with(
        inputs.images.get(source),
        inputs.intrinsics.get(source),
        source_pose,
        spec,
        exec,
    )
    .map_err(|e: BevError| pair_error(source, target, e))?;
    let bev_j = render_bev_with(
        inputs.images.get(target),
        inputs.intrinsics.get(target),
        inputs.initial.get(target),
        spec,
        exec,
    )
    .map_err(|e| pair_error(source, target, e))?;
    let mask = overlap_mask(&bev_i, &bev_j, spec, settings.min_overlap)
        .map_err(|e| pair_error(source, target, e))?;
    let texture = extract_texture_points(&bev_i, &mask, &settings.texture, source, target)
        .map_err(|e: TextureError| pair_error(source, target, e))?;
    let gamma = if settings.exposure.enabled {
        exposure_ratio(&bev_i, &bev_j, &mask).map_err(|e| pair_error(source, target, e))?
    } else {
        ExposureRatio::ONE
    };
    let term = PairTerm::new(&texture, spec, gamma, settings.exposure.apply_to);
    Ok((
        term,
        PairSetup {
            overlap_px: mask.count,
            gamma,
            texture,
        },
    ))
}

/// Refines left and right against the fixed front camera, then the rear
/// against both refined side cameras.
pub fn calibrate_rig(inputs: &RigInputs, settings: &CalibrationSettings) -> RigCalibrationResult {
    let start = Instant::now();
    let mut poses = inputs.initial.clone();
    let mut ok = PerCamera::from_fn(|id| id == CameraId::Front);
    let mut cameras = Vec::new();
    let inner_exec = if settings.search.batch_size > 1 {
        Exec::Sequential
    } else {
        settings.search.exec
    };

    for target in CameraId::REFINED {
        let mut terms = Vec::new();
        let mut pairs = Vec::new();
        let mut problems = Vec::new();
        for &source in target.reference_neighbors() {
            if !*ok.get(source) {
                problems.push(format!("{source} was not refined"));
                continue;
            }
            match setup_pair(inputs, source, poses.get(source), target, settings) {
                Ok((term, setup)) => {
                    terms.push(term);
                    pairs.push(setup);
                }
                Err(e) => problems.push(e.to_string()),
            }
        }

        let result = if terms.is_empty() {
            Err(SearchError::NoReference {
                camera: target,
                details: problems.join("; "),
            })
        } else {
            for p in &problems {
                log::warn!("{target}: skipping neighbour: {p}");
            }
            let objective = CameraObjective {
                target,
                image: inputs.images.get(target),
                intrinsics: inputs.intrinsics.get(target),
                terms,
                coverage_floor: settings.coverage_floor,
            };
            let loss_fn = |pose: &Pose| {
                objective
                    .evaluate_with(pose, inner_exec)
                    .map(|r| r.mean_loss)
            };
            calibrate_camera(
                target,
                inputs.initial.get(target),
                &settings.schedule,
                &loss_fn,
                settings.seed,
                &settings.search,
            )
        };

        if let Ok(r) = &result {
            *poses.get_mut(target) = r.pose;
            *ok.get_mut(target) = true;
            log::info!(
                "{target}: loss {:.4} -> {:.4}",
                r.initial_loss,
                r.final_loss
            );
        } else if let Err(e) = &result {
            log::error!("{target}: {e}");
        }
        cameras.push(CameraOutcome {
            camera: target,
            pairs,
            result,
        });
    }

    RigCalibrationResult {
        poses,
        cameras,
        duration: start.elapsed(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::pose::EulerDeg;

    fn phase(r: f64, t: f64, n: usize, c: CenterPolicy) -> SearchPhase {
        SearchPhase {
            rot_radius_deg: r,
            trans_radius_m: t,
            iterations: n,
            center_policy: c,
        }
    }

    fn yaw_of(p: &Pose) -> f64 {
        crate::pose::euler_from_rotation_deg(&p.rotation)
            .unwrap()
            .yaw
    }

    #[test]
    fn zero_radius_draws_zero() {
        let mut rng = PhaseRng::new(1, CameraId::Left, 0);
        let p = sample_perturbation(&phase(0.0, 0.0, 1, CenterPolicy::FixedInitial), &mut rng);
        assert!(p.is_zero());
    }

    #[test]
    fn draws_are_bounded_centered_and_reproducible() {
        let ph = phase(3.0, 0.1, 1, CenterPolicy::FixedInitial);
        let mut rng = PhaseRng::new(42, CameraId::Rear, 1);
        let mut sums = [0.0; 6];
        let n = 10_000;
        for _ in 0..n {
            let a = sample_perturbation(&ph, &mut rng).as_array();
            for i in 0..3 {
                assert!(a[i].abs() <= 3.0);
                assert!(a[i + 3].abs() <= 0.1);
            }
            for i in 0..6 {
                sums[i] += a[i];
            }
        }
        for s in &sums[..3] {
            assert!((s / n as f64).abs() < 0.1);
        }
        let mut a = PhaseRng::new(7, CameraId::Left, 2);
        let mut b = PhaseRng::new(7, CameraId::Left, 2);
        let mut c = PhaseRng::new(7, CameraId::Right, 2);
        let da: Vec<_> = (0..50).map(|_| sample_perturbation(&ph, &mut a)).collect();
        let db: Vec<_> = (0..50).map(|_| sample_perturbation(&ph, &mut b)).collect();
        let dc: Vec<_> = (0..50).map(|_| sample_perturbation(&ph, &mut c)).collect();
        assert_eq!(da, db);
        assert_ne!(da, dc);
    }

    #[test]
    fn convex_yaw_objective() {
        let loss = |p: &Pose| -> Result<f64, LossError> { Ok((yaw_of(p) - 1.5).powi(2)) };
        let start = Pose::identity();
        for policy in [CenterPolicy::FixedInitial, CenterPolicy::CurrentOptimal] {
            let ph = phase(3.0, 0.0, 2000, policy);
            let mut trace = SearchTrace::default();
            let best = Incumbent {
                pose: start,
                loss: loss(&start).unwrap(),
            };
            let out = run_phase(
                CameraId::Left,
                1,
                &ph,
                &start,
                best,
                &loss,
                &mut PhaseRng::new(3, CameraId::Left, 0),
                &SearchOptions::default(),
                &mut trace,
            );
            assert!(
                (yaw_of(&out.pose) - 1.5).abs() < 0.1,
                "{policy:?}: {}",
                yaw_of(&out.pose)
            );
            assert!(trace.is_monotone());
            assert_eq!(trace.records.len(), 2000);
        }
    }

    #[test]
    fn zero_iterations_return_best() {
        let loss = |_: &Pose| -> Result<f64, LossError> { Ok(0.0) };
        let best = Incumbent {
            pose: Pose::identity(),
            loss: 5.0,
        };
        let mut trace = SearchTrace::default();
        let out = run_phase(
            CameraId::Left,
            1,
            &phase(1.0, 0.1, 0, CenterPolicy::CurrentOptimal),
            &Pose::identity(),
            best,
            &loss,
            &mut PhaseRng::new(0, CameraId::Left, 0),
            &SearchOptions::default(),
            &mut trace,
        );
        assert_eq!(out, best);
        assert!(trace.records.is_empty() && trace.warnings.is_empty());
    }

    #[test]
    fn fixed_initial_never_moves_center() {
        // Loss prefers large positive yaw; a moving centre would exceed the radius.
        let loss = |p: &Pose| -> Result<f64, LossError> { Ok(-yaw_of(p)) };
        let mut trace = SearchTrace::default();
        let out = run_phase(
            CameraId::Left,
            1,
            &phase(1.0, 0.0, 500, CenterPolicy::FixedInitial),
            &Pose::identity(),
            Incumbent {
                pose: Pose::identity(),
                loss: 0.0,
            },
            &loss,
            &mut PhaseRng::new(0, CameraId::Left, 0),
            &SearchOptions {
                batch_size: 1,
                exec: Exec::Sequential,
            },
            &mut trace,
        );
        let y = yaw_of(&out.pose);
        assert!(y <= 1.0 + 1e-9 && y > 0.9);
        let out = run_phase(
            CameraId::Left,
            2,
            &phase(1.0, 0.0, 500, CenterPolicy::CurrentOptimal),
            &Pose::identity(),
            Incumbent {
                pose: Pose::identity(),
                loss: 0.0,
            },
            &loss,
            &mut PhaseRng::new(0, CameraId::Left, 1),
            &SearchOptions {
                batch_size: 1,
                exec: Exec::Sequential,
            },
            &mut trace,
        );
        assert!(yaw_of(&out.pose) > 10.0);
    }

    #[test]
    fn rejected_candidates_never_win_and_warning_is_raised() {
        let loss = |p: &Pose| -> Result<f64, LossError> {
            if p == &Pose::identity() {
                Ok(1.0)
            } else {
                Err(LossError::TooFewValid {
                    valid: 0,
                    total: 1,
                    floor: 0.5,
                })
            }
        };
        let r = calibrate_camera(
            CameraId::Right,
            &Pose::identity(),
            &SearchSchedule {
                phases: vec![phase(1.0, 0.1, 64, CenterPolicy::FixedInitial)],
            },
            &loss,
            0,
            &SearchOptions::default(),
        )
        .unwrap();
        assert_eq!(r.pose, Pose::identity());
        assert!(r
            .trace
            .records
            .iter()
            .all(|x| !x.accepted && x.loss.is_none() && x.rejection.is_some()));
        assert_eq!(
            r.trace.warnings,
            vec![SearchWarning::NoImprovement {
                camera: CameraId::Right,
                phase: 1
            }]
        );
    }

    #[test]
    fn zero_radius_schedule_is_identity() {
        let loss = |p: &Pose| -> Result<f64, LossError> { Ok(p.translation.norm()) };
        let start = Pose::from_euler_deg(
            EulerDeg::new(1.0, 2.0, 3.0),
            nalgebra::Vector3::new(0.1, 0.2, 0.3),
        );
        let r = calibrate_camera(
            CameraId::Left,
            &start,
            &SearchSchedule::default().zero_radius(),
            &loss,
            9,
            &SearchOptions::default(),
        )
        .unwrap();
        assert_eq!(r.pose, start);
        assert_eq!(r.final_loss, r.initial_loss);
    }

    #[test]
    fn batch_size_one_is_sequential_rule() {
        // With batch size 1 every improvement is taken immediately.
        let loss = |p: &Pose| -> Result<f64, LossError> { Ok((yaw_of(p) - 0.7).abs()) };
        let mut trace = SearchTrace::default();
        let ph = phase(0.5, 0.0, 300, CenterPolicy::CurrentOptimal);
        run_phase(
            CameraId::Left,
            2,
            &ph,
            &Pose::identity(),
            Incumbent {
                pose: Pose::identity(),
                loss: 0.7,
            },
            &loss,
            &mut PhaseRng::new(5, CameraId::Left, 1),
            &SearchOptions {
                batch_size: 1,
                exec: Exec::Parallel,
            },
            &mut trace,
        );
        let mut best = 0.7;
        for r in &trace.records {
            let l = r.loss.unwrap();
            assert_eq!(r.accepted, l < best);
            if l < best {
                best = l;
            }
            assert_eq!(r.best_loss, best);
        }
    }

    #[test]
    fn schedule_validation() {
        let mut s = SearchSchedule::default();
        s.validate().unwrap();
        s.phases[2].rot_radius_deg = 5.0;
        assert_eq!(s.validate(), Err(ScheduleError::GrowingRadius { phase: 3 }));
        s.phases[2].rot_radius_deg = f64::NAN;
        assert_eq!(s.validate(), Err(ScheduleError::InvalidRadius { phase: 3 }));
        SearchSchedule::default().zero_radius().validate().unwrap();
    }
}
