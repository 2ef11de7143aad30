//! Ground-truth harness: a textured ground plane, the reference four-camera
//! rig, a forward ray-casting renderer, controlled pose perturbations and
//! per-axis error metrics.
//!
//! The renderer here casts rays from camera pixels onto the ground; the BEV
//! module maps ground points into cameras. They share only the camera model
//! and pose types, so agreement between them at the true pose is a real check.

use nalgebra::{Point2, Vector3};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::camera::{CameraIntrinsics, FisheyeIntrinsics, PinholeIntrinsics};
use crate::exec::Exec;
use crate::image::GrayImage;
use crate::pose::{compose_perturbation, Perturbation, Pose, PoseParams};
use crate::rig::{CameraId, PerCamera};

/// Fill value for pixels whose ray never reaches the ground.
pub const SKY_VALUE: f32 = 128.0;

/// Square grayscale texture laid on the ground, centred on the origin.
#[derive(Debug, Clone, PartialEq)]
pub struct GroundScene {
    pub texture: GrayImage,
    /// Side length covered by the texture, meters.
    pub extent_m: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SceneConfig {
    pub size_px: u32,
    pub extent_m: f64,
    /// Texture richness in `[0, 1]`: amplitude and density of every layer.
    pub detail: f64,
    /// Standard deviation of the final low-pass, meters.
    pub blur_m: f64,
    pub seed: u64,
}

impl Default for SceneConfig {
    fn default() -> Self {
        Self {
            size_px: 2048,
            extent_m: 40.0,
            detail: 1.0,
            blur_m: 0.08,
            seed: 0,
        }
    }
}

fn smoothstep(t: f64) -> f64 {
    let t = t.clamp(0.0, 1.0);
    t * t * (3.0 - 2.0 * t)
}

/// Soft-edged band of half-width `half` around zero, 1 inside, 0 outside.
fn soft_band(dist: f64, half: f64, soft: f64) -> f64 {
    1.0 - smoothstep((dist.abs() - half) / soft + 0.5)
}

/// Value noise on a square lattice with smoothstep interpolation.
struct ValueNoise {
    n: usize,
    cell: f64,
    origin: f64,
    values: Vec<f64>,
}

impl ValueNoise {
    fn new(rng: &mut ChaCha8Rng, extent: f64, cell: f64) -> Self {
        let n = (extent / cell).ceil() as usize + 2;
        let values = (0..n * n).map(|_| rng.random_range(-1.0..=1.0)).collect();
        Self {
            n,
            cell,
            origin: -extent / 2.0,
            values,
        }
    }

    fn at(&self, x: f64, y: f64) -> f64 {
        let gx = ((x - self.origin) / self.cell).max(0.0);
        let gy = ((y - self.origin) / self.cell).max(0.0);
        let ix = (gx.floor() as usize).min(self.n - 2);
        let iy = (gy.floor() as usize).min(self.n - 2);
        let tx = smoothstep(gx - ix as f64);
        let ty = smoothstep(gy - iy as f64);
        let v = |i: usize, j: usize| self.values[j * self.n + i];
        let top = v(ix, iy) + tx * (v(ix + 1, iy) - v(ix, iy));
        let bot = v(ix, iy + 1) + tx * (v(ix + 1, iy + 1) - v(ix, iy + 1));
        top + ty * (bot - top)
    }
}

/// Separable Gaussian blur with clamped borders.
fn gaussian_blur(img: &GrayImage, sigma: f64) -> GrayImage {
    if sigma <= 0.0 {
        return img.clone();
    }
    let r = (3.0 * sigma).ceil() as i64;
    let kernel: Vec<f64> = (-r..=r)
        .map(|i| (-(i * i) as f64 / (2.0 * sigma * sigma)).exp())
        .collect();
    let norm: f64 = kernel.iter().sum();
    let (w, h) = (img.width() as i64, img.height() as i64);
    let pass = |src: &GrayImage, horizontal: bool| {
        GrayImage::from_fn(src.width(), src.height(), |x, y| {
            let mut acc = 0.0;
            for (k, kv) in kernel.iter().enumerate() {
                let o = k as i64 - r;
                let (sx, sy) = if horizontal {
                    ((x as i64 + o).clamp(0, w - 1), y as i64)
                } else {
                    (x as i64, (y as i64 + o).clamp(0, h - 1))
                };
                acc += kv * src.get(sx as u32, sy as u32) as f64;
            }
            (acc / norm) as f32
        })
    };
    pass(&pass(img, true), false)
}

impl GroundScene {
    /// Street-like ground: multi-scale value noise, jittered tile grout lines,
    /// dashed lane stripes, transverse bars and soft blobs, band-limited by a
    /// light blur.
    pub fn generate(cfg: &SceneConfig) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
        let d = cfg.detail.clamp(0.0, 1.0);
        let n = cfg.size_px;
        let e = cfg.extent_m;
        let texel = e / n as f64;
        let half = e / 2.0;

        let octaves: Vec<(ValueNoise, f64)> = [(3.2, 22.0), (1.3, 18.0), (0.5, 14.0), (0.2, 10.0)]
            .into_iter()
            .map(|(cell, amp)| (ValueNoise::new(&mut rng, e, cell), amp * d))
            .collect();

        // Grout lines: jittered spacing, density grows with detail.
        let spacing = (1.6 - 0.8 * d, 2.4 - 1.0 * d);
        let grout = |rng: &mut ChaCha8Rng| {
            let mut lines = Vec::new();
            let mut p = -half + rng.random_range(0.0..spacing.1);
            while p < half {
                lines.push(p);
                p += rng.random_range(spacing.0..spacing.1);
            }
            lines
        };
        let grout_x = grout(&mut rng);
        let grout_y = grout(&mut rng);
        let nearest = |lines: &[f64], v: f64| {
            lines
                .iter()
                .map(|l| (v - l).abs())
                .fold(f64::INFINITY, f64::min)
        };
        let profile = |lines: &[f64]| -> Vec<f64> {
            (0..n)
                .map(|i| {
                    let v = -half + (i as f64 + 0.5) * texel;
                    soft_band(nearest(lines, v), 0.025, 0.03)
                })
                .collect()
        };
        let tile_shade: Vec<f64> = (0..(grout_x.len() + 1) * (grout_y.len() + 1))
            .map(|_| rng.random_range(-90.0..90.0) * d)
            .collect();
        let cell_of = |lines: &[f64], v: f64| lines.partition_point(|l| *l < v);
        let grout_col = profile(&grout_x);
        let grout_row = profile(&grout_y);

        // Lane stripes run along y at fixed x, dashed with a random phase.
        let lanes: Vec<(f64, f64)> = [-6.2, -3.4, 3.4, 6.2]
            .into_iter()
            .map(|x| (x + rng.random_range(-0.3..0.3), rng.random_range(0.0..6.0)))
            .collect();
        // Transverse bars along x.
        let n_bars = (2.0 + 6.0 * d).round() as usize;
        let bars: Vec<(f64, f64, f64)> = (0..n_bars)
            .map(|_| {
                (
                    rng.random_range(-half..half),
                    rng.random_range(-9.0..-1.0),
                    rng.random_range(1.0..9.0),
                )
            })
            .collect();
        let n_blobs = (40.0 + 560.0 * d).round() as usize;
        let blobs: Vec<(f64, f64, f64, f64, f64)> = (0..n_blobs)
            .map(|_| {
                (
                    rng.random_range(-half..half),
                    rng.random_range(-half..half),
                    rng.random_range(0.15..0.8),
                    rng.random_range(0.15..0.8),
                    rng.random_range(-90.0..90.0),
                )
            })
            .collect();

        let coord = |i: u32| -half + (i as f64 + 0.5) * texel;
        let mut acc: Vec<f64> = Vec::with_capacity(n as usize * n as usize);
        for iy in 0..n {
            let y = coord(iy);
            for ix in 0..n {
                let x = coord(ix);
                let mut v = 118.0;
                for (noise, amp) in &octaves {
                    v += amp * noise.at(x, y);
                }
                v += tile_shade[cell_of(&grout_y, y) * (grout_x.len() + 1) + cell_of(&grout_x, x)];
                v -= 40.0 * d * grout_col[ix as usize].max(grout_row[iy as usize]);
                for (lx, phase) in &lanes {
                    let dash = ((y + phase).rem_euclid(6.0) < 3.0) as u8 as f64;
                    v += 95.0 * d.sqrt() * dash * soft_band(x - lx, 0.075, 0.03);
                }
                for (by, x0, x1) in &bars {
                    if x > *x0 && x < *x1 {
                        v += 80.0 * d * soft_band(y - by, 0.2, 0.04);
                    }
                }
                acc.push(v);
            }
        }
        // Blobs only touch texels inside their bounding box.
        let to_texel = |v: f64| (((v + half) / texel - 0.5).floor().max(0.0) as u32).min(n - 1);
        for (bx, by, rx, ry, amp) in &blobs {
            let reach = 1.5f64.sqrt();
            for iy in to_texel(by - ry * reach)..=to_texel(by + ry * reach) {
                for ix in to_texel(bx - rx * reach)..=to_texel(bx + rx * reach) {
                    let dx = (coord(ix) - bx) / rx;
                    let dy = (coord(iy) - by) / ry;
                    let r2 = dx * dx + dy * dy;
                    if r2 < 1.5 {
                        acc[(iy * n + ix) as usize] +=
                            amp * d * (1.0 - smoothstep((r2.sqrt() - 0.8) / 0.4));
                    }
                }
            }
        }
        let raw = GrayImage::from_vec(
            n,
            n,
            acc.into_iter()
                .map(|v| v.clamp(0.0, 255.0) as f32)
                .collect(),
        )
        .expect("square texture");
        Self {
            texture: gaussian_blur(&raw, cfg.blur_m / texel),
            extent_m: e,
        }
    }

    /// Checkerboard of `square_m` squares (values 40 and 200), unblurred.
    pub fn checkerboard(square_m: f64, size_px: u32, extent_m: f64) -> Self {
        let texel = extent_m / size_px as f64;
        let texture = GrayImage::from_fn(size_px, size_px, |ix, iy| {
            let x = -extent_m / 2.0 + (ix as f64 + 0.5) * texel;
            let y = -extent_m / 2.0 + (iy as f64 + 0.5) * texel;
            let parity =
                ((x / square_m).floor() as i64 + (y / square_m).floor() as i64).rem_euclid(2);
            if parity == 0 {
                40.0
            } else {
                200.0
            }
        });
        Self { texture, extent_m }
    }

    pub fn texel_size(&self) -> f64 {
        self.extent_m / self.texture.width() as f64
    }

    /// Continuous texel coordinate of a ground point.
    pub fn texel_coords(&self, x: f64, y: f64) -> (f64, f64) {
        let n = self.texture.width() as f64;
        let s = n / self.extent_m;
        (
            (x + self.extent_m / 2.0) * s - 0.5,
            (y + self.extent_m / 2.0) * s - 0.5,
        )
    }

    /// Bilinear texture lookup, clamped at the scene edge.
    pub fn sample(&self, x: f64, y: f64) -> f64 {
        let (tx, ty) = self.texel_coords(x, y);
        self.texture.sample_bilinear_clamped(tx, ty)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RigCamera {
    pub intrinsics: CameraIntrinsics,
    pub pose: Pose,
}

/// Four cameras with their true intrinsics and poses.
#[derive(Debug, Clone, PartialEq)]
pub struct RigGroundTruth {
    pub cameras: PerCamera<RigCamera>,
}

/// Reference mounting: camera centres 4.1 m above the ground; the side
/// cameras look outward horizontally, front and rear look straight down.
pub fn reference_pose_params() -> PerCamera<PoseParams> {
    PerCamera {
        front: PoseParams::new(180.0, 0.0, -90.0, 0.0, -2.0, 4.1),
        left: PoseParams::new(0.0, 90.0, -90.0, -1.0, 0.0, 4.1),
        right: PoseParams::new(0.0, -90.0, -90.0, 1.0, 0.0, 4.1),
        rear: PoseParams::new(180.0, 0.0, 90.0, 0.0, 2.0, 4.1),
    }
}

/// 125 degree pinhole, 1500 x 1500.
pub fn reference_pinhole() -> CameraIntrinsics {
    CameraIntrinsics::Pinhole(
        PinholeIntrinsics::from_hfov(125.0, 1500, 1500).expect("valid reference intrinsics"),
    )
}

/// 195 degree fisheye, 1280 x 1080, mild polynomial distortion.
pub fn reference_fisheye() -> CameraIntrinsics {
    CameraIntrinsics::Fisheye(
        FisheyeIntrinsics::new(
            350.0,
            350.0,
            639.5,
            539.5,
            [-0.05, 0.005, 0.0, 0.0],
            1280,
            1080,
            97.5f64.to_radians(),
        )
        .expect("valid reference intrinsics"),
    )
}

impl RigGroundTruth {
    pub fn new(intrinsics: PerCamera<CameraIntrinsics>, poses: PerCamera<Pose>) -> Self {
        Self {
            cameras: PerCamera::from_fn(|id| RigCamera {
                intrinsics: *intrinsics.get(id),
                pose: *poses.get(id),
            }),
        }
    }

    pub fn reference(intrinsics: CameraIntrinsics) -> Self {
        Self::new(
            PerCamera::from_fn(|_| intrinsics),
            reference_pose_params().map(|_, p| p.to_pose()),
        )
    }

    pub fn reference_pinhole() -> Self {
        Self::reference(reference_pinhole())
    }

    pub fn reference_fisheye() -> Self {
        Self::reference(reference_fisheye())
    }

    pub fn poses(&self) -> PerCamera<Pose> {
        self.cameras.map(|_, c| c.pose)
    }

    pub fn intrinsics(&self) -> PerCamera<CameraIntrinsics> {
        self.cameras.map(|_, c| c.intrinsics)
    }
}

/// Ground intersection of the ray through `pixel`, if it hits in front of the camera.
pub fn ray_ground_hit(
    intr: &CameraIntrinsics,
    pose: &Pose,
    pixel: &Point2<f64>,
    ground_z: f64,
) -> Option<Vector3<f64>> {
    let ray_cam = intr.unproject(pixel)?;
    let dir = pose.rotation.inverse() * ray_cam;
    let origin = pose.camera_center();
    let s = (ground_z - origin.z) / dir.z;
    if !(s.is_finite() && s > 0.0) {
        return None;
    }
    Some(origin + dir * s)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ViewRenderOptions {
    pub ground_z: f64,
    /// Standard deviation of additive Gaussian noise; 0 disables it.
    pub noise_sigma: f64,
    pub noise_seed: u64,
    /// Round to 8-bit levels, as stored PNGs would be.
    pub quantize: bool,
}

impl Default for ViewRenderOptions {
    fn default() -> Self {
        Self {
            ground_z: 0.0,
            noise_sigma: 0.0,
            noise_seed: 0,
            quantize: true,
        }
    }
}

/// Ray-casts one camera view of the scene.
pub fn render_view(
    scene: &GroundScene,
    cam: &RigCamera,
    opts: &ViewRenderOptions,
    stream: u64,
    exec: Exec,
) -> GrayImage {
    let (w, h) = (cam.intrinsics.width(), cam.intrinsics.height());
    let mut data = vec![0.0f32; w as usize * h as usize];
    exec.fill_rows(&mut data, w as usize, |row, out| {
        let mut noise_rng = (opts.noise_sigma > 0.0).then(|| {
            let mut r = ChaCha8Rng::seed_from_u64(opts.noise_seed);
            r.set_stream(stream << 32 | row as u64);
            r
        });
        let normal =
            Normal::new(0.0, opts.noise_sigma.max(f64::MIN_POSITIVE)).expect("finite sigma");
        for (col, px) in out.iter_mut().enumerate() {
            let pixel = Point2::new(col as f64, row as f64);
            let mut v = match ray_ground_hit(&cam.intrinsics, &cam.pose, &pixel, opts.ground_z) {
                Some(g) => scene.sample(g.x, g.y),
                None => SKY_VALUE as f64,
            };
            if let Some(rng) = noise_rng.as_mut() {
                v += normal.sample(rng);
            }
            *px = if opts.quantize {
                v.round().clamp(0.0, 255.0) as f32
            } else {
                v as f32
            };
        }
    });
    GrayImage::from_vec(w, h, data).expect("size matches intrinsics")
}

/// All four views of the rig.
pub fn render_synthetic_views(
    scene: &GroundScene,
    rig: &RigGroundTruth,
    opts: &ViewRenderOptions,
    exec: Exec,
) -> PerCamera<GrayImage> {
    PerCamera::from_fn(|id| render_view(scene, rig.cameras.get(id), opts, id.index() as u64, exec))
}

/// How to disturb the true rig.
#[derive(Debug, Clone, PartialEq)]
pub enum PerturbationPlan {
    Explicit(PerCamera<Perturbation>),
    /// Each component uniform in `[-r, r]`.
    Random {
        rot_deg: f64,
        trans_m: f64,
        seed: u64,
        include_front: bool,
    },
}

#[derive(Debug, Clone, PartialEq)]
pub struct PerturbedRig {
    pub poses: PerCamera<Pose>,
    pub applied: PerCamera<Perturbation>,
}

/// The reference initial-error row: left, right and rear disturbed, front exact.
pub fn reference_initial_errors() -> PerCamera<Perturbation> {
    PerCamera {
        front: Perturbation::zero(),
        left: Perturbation::new(0.95, 1.25, 2.86, 0.095, 0.025, -0.086),
        right: Perturbation::new(-2.95, 0.95, 2.8, 0.065, -0.075, 0.095),
        rear: Perturbation::new(-1.75, 2.95, -1.8, -0.02, -0.076, 0.096),
    }
}

pub fn perturb_rig(rig: &RigGroundTruth, plan: &PerturbationPlan) -> PerturbedRig {
    let applied = match plan {
        PerturbationPlan::Explicit(p) => p.clone(),
        PerturbationPlan::Random {
            rot_deg,
            trans_m,
            seed,
            include_front,
        } => {
            let mut rng = ChaCha8Rng::seed_from_u64(*seed);
            let mut draw = |r: f64| {
                if r > 0.0 {
                    rng.random_range(-r..=r)
                } else {
                    0.0
                }
            };
            PerCamera::from_fn(|id| {
                let p = Perturbation::new(
                    draw(*rot_deg),
                    draw(*rot_deg),
                    draw(*rot_deg),
                    draw(*trans_m),
                    draw(*trans_m),
                    draw(*trans_m),
                );
                if id == CameraId::Front && !include_front {
                    Perturbation::zero()
                } else {
                    p
                }
            })
        }
    };
    let poses =
        PerCamera::from_fn(|id| compose_perturbation(applied.get(id), &rig.cameras.get(id).pose));
    PerturbedRig { poses, applied }
}

/// Signed per-axis error of one camera: the increment taking the true pose to
/// the estimate, angles in degrees, offsets in meters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AxisErrors {
    pub camera: CameraId,
    pub dtx: f64,
    pub dty: f64,
    pub dtz: f64,
    pub droll: f64,
    pub dpitch: f64,
    pub dyaw: f64,
}

impl AxisErrors {
    pub fn max_rotation(&self) -> f64 {
        self.droll.abs().max(self.dpitch.abs()).max(self.dyaw.abs())
    }

    pub fn max_translation(&self) -> f64 {
        self.dtx.abs().max(self.dty.abs()).max(self.dtz.abs())
    }

    pub fn as_array(&self) -> [f64; 6] {
        [
            self.dtx,
            self.dty,
            self.dtz,
            self.droll,
            self.dpitch,
            self.dyaw,
        ]
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MaeReport {
    pub rows: Vec<AxisErrors>,
    /// Mean absolute error per axis over `rows`: tx, ty, tz, roll, pitch, yaw.
    pub mean_abs: [f64; 6],
}

impl MaeReport {
    pub fn row(&self, id: CameraId) -> Option<&AxisErrors> {
        self.rows.iter().find(|r| r.camera == id)
    }
}

pub fn evaluate_mae(
    estimated: &PerCamera<Pose>,
    truth: &PerCamera<Pose>,
    cameras: &[CameraId],
) -> MaeReport {
    let rows: Vec<AxisErrors> = cameras
        .iter()
        .map(|&id| {
            let d = Perturbation::between(estimated.get(id), truth.get(id));
            AxisErrors {
                camera: id,
                dtx: d.dx,
                dty: d.dy,
                dtz: d.dz,
                droll: d.roll,
                dpitch: d.pitch,
                dyaw: d.yaw,
            }
        })
        .collect();
    let mut mean_abs = [0.0; 6];
    if !rows.is_empty() {
        for r in &rows {
            for (m, v) in mean_abs.iter_mut().zip(r.as_array()) {
                *m += v.abs();
            }
        }
        for m in mean_abs.iter_mut() {
            *m /= rows.len() as f64;
        }
    }
    MaeReport { rows, mean_abs }
}
