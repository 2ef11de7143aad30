//! `synth`, `calibrate` and `evaluate` commands.
//!
//! The binary in `main.rs` is a thin clap wrapper; everything that touches
//! files lives here so the commands can be driven from tests.

use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use serde::{Deserialize, Serialize};
use surround_calib::bev::{overlap_mask, render_bev_with, stitch_bev, BevImage, BevSpec};
use surround_calib::camera::CameraIntrinsics;
use surround_calib::config::{
    CalibrationReport, CameraConfig, CameraPose, CameraStatus, RigConfig, RunStatus,
};
use surround_calib::harness::{
    self, evaluate_mae, AxisErrors, GroundScene, MaeReport, PerturbationPlan, RigGroundTruth,
    SceneConfig, ViewRenderOptions,
};
use surround_calib::image::GrayImage;
use surround_calib::search::calibrate_rig;
use surround_calib::{CameraId, Exec, PerCamera, Perturbation, Pose, PoseParams};

/// Initial-pose disturbance written into the synthetic rig file.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum SynthPerturbation {
    /// Initial poses equal the truth.
    None,
    /// The reference initial-error row.
    Reference,
    /// Per-axis uniform draws, front excluded.
    Random { rot_deg: f64, trans_m: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SynthConfig {
    #[serde(default)]
    pub scene: SceneConfig,
    #[serde(default)]
    pub fisheye: bool,
    #[serde(default)]
    pub noise_sigma: f64,
    #[serde(default = "default_perturbation")]
    pub perturbation: SynthPerturbation,
    #[serde(default)]
    pub seed: u64,
}

fn default_perturbation() -> SynthPerturbation {
    SynthPerturbation::Reference
}

impl Default for SynthConfig {
    fn default() -> Self {
        Self {
            scene: SceneConfig::default(),
            fisheye: false,
            noise_sigma: 0.0,
            perturbation: SynthPerturbation::Reference,
            seed: 0,
        }
    }
}

impl SynthConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text =
            fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display()))
    }
}

#[derive(Debug, Clone)]
pub struct SynthOutput {
    /// Rig file with perturbed initial poses and embedded ground truth.
    pub rig_path: PathBuf,
    /// Rig file whose initial poses are the ground truth.
    pub gt_path: PathBuf,
    pub applied: PerCamera<Perturbation>,
    pub overlaps: Vec<(CameraId, CameraId, usize)>,
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let text = serde_json::to_string_pretty(value)?;
    fs::write(path, text).with_context(|| format!("writing {}", path.display()))
}

fn create_dir(path: &Path) -> Result<()> {
    fs::create_dir_all(path).with_context(|| format!("creating {}", path.display()))
}

fn save_png(img: &GrayImage, path: &Path) -> Result<()> {
    img.save_png(path)
        .with_context(|| format!("writing {}", path.display()))
}

/// Renders the scene and rig, writes views and both rig files.
pub fn cmd_synth(cfg: &SynthConfig, out: &Path, exec: Exec) -> Result<SynthOutput> {
    create_dir(&out.join("views"))?;
    let scene_cfg = SceneConfig {
        seed: cfg.seed,
        ..cfg.scene
    };
    let scene = GroundScene::generate(&scene_cfg);
    save_png(&scene.texture, &out.join("scene.png"))?;

    let truth = if cfg.fisheye {
        RigGroundTruth::reference_fisheye()
    } else {
        RigGroundTruth::reference_pinhole()
    };
    let opts = ViewRenderOptions {
        noise_sigma: cfg.noise_sigma,
        noise_seed: cfg.seed,
        ..ViewRenderOptions::default()
    };
    let views = harness::render_synthetic_views(&scene, &truth, &opts, exec);

    let plan = match cfg.perturbation {
        SynthPerturbation::None => {
            PerturbationPlan::Explicit(PerCamera::from_fn(|_| Perturbation::zero()))
        }
        SynthPerturbation::Reference => {
            PerturbationPlan::Explicit(harness::reference_initial_errors())
        }
        SynthPerturbation::Random { rot_deg, trans_m } => PerturbationPlan::Random {
            rot_deg,
            trans_m,
            seed: cfg.seed,
            include_front: false,
        },
    };
    let perturbed = harness::perturb_rig(&truth, &plan);

    let spec = BevSpec::default();
    let mut overlaps = Vec::new();
    let bevs = PerCamera::from_fn(|id| {
        let cam = truth.cameras.get(id);
        render_bev_with(views.get(id), &cam.intrinsics, &cam.pose, &spec, exec)
    });
    let gt_config = rig_config(&truth.intrinsics(), &truth.poses(), cfg.seed);
    for (a, b) in CameraId::ADJACENT {
        let (Ok(ba), Ok(bb)) = (bevs.get(a), bevs.get(b)) else {
            bail!("camera {a} or {b} sees no ground");
        };
        let count = overlap_mask(ba, bb, &spec, gt_config.min_overlap)
            .with_context(|| format!("overlap {a}-{b}"))?
            .count;
        println!("overlap {a:>5} - {b:<5} {count:>8} px");
        overlaps.push((a, b, count));
    }

    for id in CameraId::ALL {
        save_png(views.get(id), &out.join(format!("views/{id}.png")))?;
    }
    let gt_path = out.join("rig_gt.json");
    gt_config.save(&gt_path)?;
    let mut rig = rig_config(&truth.intrinsics(), &perturbed.poses, cfg.seed);
    rig.ground_truth = Some(
        gt_config
            .cameras
            .iter()
            .map(|c| CameraPose {
                id: c.id,
                pose: c.initial_pose,
            })
            .collect(),
    );
    let rig_path = out.join("rig.json");
    rig.save(&rig_path)?;
    write_json(&out.join("perturbations.json"), &perturbed.applied)?;
    Ok(SynthOutput {
        rig_path,
        gt_path,
        applied: perturbed.applied,
        overlaps,
    })
}

fn rig_config(
    intrinsics: &PerCamera<CameraIntrinsics>,
    poses: &PerCamera<Pose>,
    seed: u64,
) -> RigConfig {
    let truth_params = harness::reference_pose_params();
    let cameras = CameraId::ALL
        .iter()
        .map(|&id| {
            // Keep the declared parameters verbatim where the pose is untouched.
            let reference = truth_params.get(id);
            let pose = poses.get(id);
            let initial_pose = if reference.to_pose() == *pose {
                *reference
            } else {
                PoseParams::from_pose(pose)
            };
            CameraConfig {
                id,
                intrinsics: *intrinsics.get(id),
                initial_pose,
                image: PathBuf::from(format!("views/{id}.png")),
            }
        })
        .collect();
    let mut cfg = RigConfig::new(cameras);
    cfg.seed = seed;
    cfg
}

#[derive(Debug, Clone, Default)]
pub struct CalibrateOptions {
    pub seed: Option<u64>,
    pub batch_size: Option<usize>,
    pub dump_bev: bool,
    pub dump_texture: bool,
    pub exec: Exec,
}

#[derive(Debug, Clone)]
pub struct CalibrateOutput {
    pub report: CalibrationReport,
    pub report_path: PathBuf,
    pub status: RunStatus,
}

/// Loads and validates a rig file, applying command-line overrides.
pub fn load_rig(path: &Path, opts: &CalibrateOptions) -> Result<(RigConfig, PathBuf)> {
    let mut config = RigConfig::load(path)?;
    if let Some(seed) = opts.seed {
        config.seed = seed;
    }
    if let Some(b) = opts.batch_size {
        config.batch_size = b;
    }
    let base = path.parent().map(Path::to_path_buf).unwrap_or_default();
    config.validate(&base)?;
    Ok((config, base))
}

fn bevs_at(
    images: &PerCamera<GrayImage>,
    config: &RigConfig,
    poses: &PerCamera<Pose>,
    exec: Exec,
) -> PerCamera<BevImage> {
    let intr = config.intrinsics();
    PerCamera::from_fn(|id| {
        render_bev_with(
            images.get(id),
            intr.get(id),
            poses.get(id),
            &config.bev,
            exec,
        )
        .unwrap_or_else(|_| BevImage {
            intensities: GrayImage::new(config.bev.width, config.bev.height),
            valid: vec![false; config.bev.pixel_count()],
        })
    })
}

/// Runs the rig calibration and writes report, traces and stitched views.
pub fn cmd_calibrate(
    config_path: &Path,
    out: &Path,
    opts: &CalibrateOptions,
) -> Result<CalibrateOutput> {
    let (config, base) = load_rig(config_path, opts)?;
    let inputs = config.load_inputs(&base)?;
    let settings = config.settings(opts.exec);
    let result = calibrate_rig(&inputs, &settings);
    log::info!("calibration finished in {:.1?}", result.duration);

    create_dir(&out.join("traces"))?;
    let mut trace_files = PerCamera::from_fn(|_| None);
    for outcome in &result.cameras {
        if let Ok(r) = &outcome.result {
            let rel = format!("traces/{}.jsonl", outcome.camera);
            fs::write(out.join(&rel), r.trace.to_json_lines())
                .with_context(|| format!("writing {rel}"))?;
            *trace_files.get_mut(outcome.camera) = Some(rel);
        }
    }

    let before = bevs_at(&inputs.images, &config, &inputs.initial, opts.exec);
    let after = bevs_at(&inputs.images, &config, &result.poses, opts.exec);
    save_png(
        &stitch_bev(&before, &inputs.initial, &config.bev),
        &out.join("bev_before.png"),
    )?;
    save_png(
        &stitch_bev(&after, &result.poses, &config.bev),
        &out.join("bev_after.png"),
    )?;

    if opts.dump_bev {
        create_dir(&out.join("bev"))?;
        for id in CameraId::ALL {
            for (tag, set) in [("initial", &before), ("refined", &after)] {
                let img = out.join(format!("bev/{id}_{tag}.png"));
                let mask = out.join(format!("bev/{id}_{tag}_mask.png"));
                set.get(id)
                    .save_png(&img, &mask)
                    .with_context(|| format!("writing {}", img.display()))?;
            }
        }
    }
    if opts.dump_texture {
        create_dir(&out.join("texture"))?;
        for outcome in &result.cameras {
            for pair in &outcome.pairs {
                let name = format!("texture/{}_to_{}", pair.texture.source, pair.texture.target);
                fs::write(out.join(format!("{name}.csv")), pair.texture.to_csv())?;
                let mut overlay = after.get(pair.texture.source).intensities.clone();
                for p in &pair.texture.points {
                    overlay.set(p.x, p.y, 255.0);
                }
                save_png(&overlay, &out.join(format!("{name}.png")))?;
            }
        }
    }

    let report = CalibrationReport::new(&config, &result, &trace_files);
    let report_path = out.join("report.json");
    fs::write(&report_path, report.to_json())
        .with_context(|| format!("writing {}", report_path.display()))?;
    for c in &report.cameras {
        match c.status {
            CameraStatus::Fixed => println!("{:>5}: fixed", c.id),
            CameraStatus::Refined => println!(
                "{:>5}: loss {:.4} -> {:.4}",
                c.id,
                c.initial_loss.unwrap_or(f64::NAN),
                c.final_loss.unwrap_or(f64::NAN)
            ),
            CameraStatus::Failed => {
                println!("{:>5}: FAILED {}", c.id, c.error.as_deref().unwrap_or(""))
            }
        }
    }
    let status = report.status();
    Ok(CalibrateOutput {
        report,
        report_path,
        status,
    })
}

/// Ground-truth poses of a rig file: its `ground_truth` block when present,
/// otherwise its initial poses.
pub fn ground_truth_of(config: &RigConfig) -> Result<PerCamera<Pose>> {
    config.validate_structure()?;
    Ok(config
        .ground_truth_poses()
        .unwrap_or_else(|| config.initial_poses()))
}

/// Per-axis errors of a report against a ground-truth rig.
pub fn evaluate_report(report: &CalibrationReport, gt: &RigConfig) -> Result<MaeReport> {
    let truth = ground_truth_of(gt)?;
    let mut ids: Vec<CameraId> = report.cameras.iter().map(|c| c.id).collect();
    ids.sort();
    let mut want: Vec<CameraId> = gt.cameras.iter().map(|c| c.id).collect();
    want.sort();
    if ids != want {
        bail!("camera sets differ: report has {ids:?}, ground truth has {want:?}");
    }
    let estimated = report.refined_poses().expect("all four cameras present");
    let rows: Vec<CameraId> = report
        .cameras
        .iter()
        .filter(|c| c.status != CameraStatus::Fixed)
        .map(|c| c.id)
        .collect();
    Ok(evaluate_mae(&estimated, &truth, &rows))
}

pub fn format_mae_table(mae: &MaeReport) -> String {
    let mut s = format!(
        "{:<6} {:>10} {:>10} {:>10} {:>10} {:>10} {:>10}\n",
        "camera", "dtx[m]", "dty[m]", "dtz[m]", "droll[deg]", "dpitch[deg]", "dyaw[deg]"
    );
    for r in &mae.rows {
        s += &format!(
            "{:<6} {:>10.4} {:>10.4} {:>10.4} {:>10.4} {:>10.4} {:>10.4}\n",
            r.camera.name(),
            r.dtx,
            r.dty,
            r.dtz,
            r.droll,
            r.dpitch,
            r.dyaw
        );
    }
    let m = mae.mean_abs;
    s += &format!(
        "{:<6} {:>10.4} {:>10.4} {:>10.4} {:>10.4} {:>10.4} {:>10.4}\n",
        "|mean|", m[0], m[1], m[2], m[3], m[4], m[5]
    );
    s
}

pub fn write_mae_csv(mae: &MaeReport, path: &Path) -> Result<()> {
    let mut w =
        csv::Writer::from_path(path).with_context(|| format!("writing {}", path.display()))?;
    for r in &mae.rows {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_mae_csv(path: &Path) -> Result<Vec<AxisErrors>> {
    let mut r =
        csv::Reader::from_path(path).with_context(|| format!("reading {}", path.display()))?;
    Ok(r.deserialize().collect::<Result<_, _>>()?)
}

/// Prints the MAE table and optionally writes it as CSV.
pub fn cmd_evaluate(
    report_path: &Path,
    gt_path: &Path,
    csv_out: Option<&Path>,
) -> Result<MaeReport> {
    let report = CalibrationReport::load(report_path)?;
    let gt = RigConfig::load(gt_path)?;
    let mae = evaluate_report(&report, &gt)?;
    print!("{}", format_mae_table(&mae));
    if let Some(p) = csv_out {
        write_mae_csv(&mae, p)?;
    }
    Ok(mae)
}

pub fn exit_code(status: RunStatus) -> i32 {
    match status {
        RunStatus::Success => 0,
        RunStatus::Partial => 2,
        RunStatus::Failure => 1,
    }
}
