//! Bird's-eye-view synthesis by inverse mapping onto a flat ground plane.
//!
//! A BEV pixel `(u, v)` corresponds to the ground point
//! `((u - center_x) * scale, (v - center_y) * scale, ground_z)`. Rendering a
//! camera into the BEV transforms that point by the camera pose, projects it
//! through the camera model and samples the source image bilinearly.

use std::path::Path;

use nalgebra::{Point2, Vector3};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::camera::CameraIntrinsics;
use crate::exec::Exec;
use crate::image::{save_mask_png, GrayImage, ImageError};
use crate::pose::Pose;
use crate::rig::{CameraId, PerCamera};

/// A render with fewer valid pixels than this fraction is rejected.
pub const MIN_FOOTPRINT_FRACTION: f64 = 0.01;

/// Default minimum size of a usable overlap, in BEV pixels.
pub const DEFAULT_MIN_OVERLAP: usize = 500;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum BevError {
    #[error("only {valid} of {total} BEV pixels are covered by the camera")]
    EmptyFootprint { valid: usize, total: usize },
    #[error("overlap of {count} px is below the minimum of {min} px")]
    InsufficientOverlap { count: usize, min: usize },
    #[error("BEV images have mismatched sizes")]
    SizeMismatch,
    #[error("invalid BEV spec: {0}")]
    InvalidSpec(String),
}

/// Axis-aligned, half-open pixel rectangle `[x0, x1) x [y0, y1)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct PixelRect {
    pub x0: u32,
    pub y0: u32,
    pub x1: u32,
    pub y1: u32,
}

impl PixelRect {
    pub const EMPTY: PixelRect = PixelRect {
        x0: 0,
        y0: 0,
        x1: 0,
        y1: 0,
    };

    #[inline]
    pub fn contains(&self, x: u32, y: u32) -> bool {
        x >= self.x0 && x < self.x1 && y >= self.y0 && y < self.y1
    }

    pub fn is_empty(&self) -> bool {
        self.x1 <= self.x0 || self.y1 <= self.y0
    }
}

/// Virtual top-down camera: image extent, metric scale and ego-vehicle cut.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BevSpec {
    pub width: u32,
    pub height: u32,
    /// Meters per pixel.
    pub scale: f64,
    pub center_x: f64,
    pub center_y: f64,
    #[serde(default)]
    pub ground_z: f64,
    pub ego_roi: PixelRect,
}

impl Default for BevSpec {
    /// 600 x 600 px at 2 cm/px (12 m x 12 m) with a 2.0 m x 4.8 m ego cut.
    fn default() -> Self {
        let mut spec = BevSpec {
            width: 600,
            height: 600,
            scale: 0.02,
            center_x: 299.5,
            center_y: 299.5,
            ground_z: 0.0,
            ego_roi: PixelRect::EMPTY,
        };
        spec.ego_roi = spec.roi_from_meters(2.0, 4.8);
        spec
    }
}

impl BevSpec {
    pub fn validate(&self) -> Result<(), BevError> {
        if !(self.scale > 0.0 && self.scale.is_finite()) {
            return Err(BevError::InvalidSpec(format!(
                "scale {} must be positive",
                self.scale
            )));
        }
        if self.width < 2 || self.height < 2 {
            return Err(BevError::InvalidSpec(
                "BEV image must be at least 2x2".into(),
            ));
        }
        let r = self.ego_roi;
        if !r.is_empty() && (r.x1 > self.width || r.y1 > self.height) {
            return Err(BevError::InvalidSpec(format!(
                "ego ROI {r:?} exceeds image bounds"
            )));
        }
        Ok(())
    }

    /// Pixels whose centres fall inside a `size_x` x `size_y` meter rectangle
    /// centred on the ground origin.
    pub fn roi_from_meters(&self, size_x: f64, size_y: f64) -> PixelRect {
        let span = |c: f64, half: f64, n: u32| {
            let lo = ((c - half / self.scale).ceil().max(0.0)) as u32;
            let hi = (((c + half / self.scale).floor() + 1.0).clamp(0.0, n as f64)) as u32;
            (lo.min(n), hi)
        };
        let (x0, x1) = span(self.center_x, size_x / 2.0, self.width);
        let (y0, y1) = span(self.center_y, size_y / 2.0, self.height);
        PixelRect { x0, y0, x1, y1 }
    }

    pub fn pixel_count(&self) -> usize {
        self.width as usize * self.height as usize
    }

    /// `P_G = K_G^-1 p_G` at the fixed ground depth.
    #[inline]
    pub fn bev_pixel_to_ground(&self, u: f64, v: f64) -> Vector3<f64> {
        Vector3::new(
            (u - self.center_x) * self.scale,
            (v - self.center_y) * self.scale,
            self.ground_z,
        )
    }

    #[inline]
    pub fn ground_to_bev(&self, p: &Vector3<f64>) -> Point2<f64> {
        Point2::new(
            p.x / self.scale + self.center_x,
            p.y / self.scale + self.center_y,
        )
    }
}

/// Camera image resampled onto the ground plane.
#[derive(Debug, Clone, PartialEq)]
pub struct BevImage {
    pub intensities: GrayImage,
    pub valid: Vec<bool>,
}

impl BevImage {
    pub fn width(&self) -> u32 {
        self.intensities.width()
    }

    pub fn height(&self) -> u32 {
        self.intensities.height()
    }

    #[inline]
    pub fn is_valid(&self, x: u32, y: u32) -> bool {
        self.valid[y as usize * self.width() as usize + x as usize]
    }

    #[inline]
    pub fn get(&self, x: u32, y: u32) -> f32 {
        self.intensities.get(x, y)
    }

    pub fn valid_count(&self) -> usize {
        self.valid.iter().filter(|v| **v).count()
    }

    /// Copy with every intensity multiplied by `gain` (simulated exposure).
    pub fn scaled(&self, gain: f32) -> BevImage {
        BevImage {
            intensities: self.intensities.map(|v| v * gain),
            valid: self.valid.clone(),
        }
    }

    /// Writes the intensities and a sibling validity mask.
    pub fn save_png(&self, image_path: &Path, mask_path: &Path) -> Result<(), ImageError> {
        self.intensities.save_png(image_path)?;
        save_mask_png(self.width(), self.height(), &self.valid, mask_path)
    }
}

/// Maps `img` (seen through `intr` at `pose`) onto the BEV grid.
pub fn render_bev(
    img: &GrayImage,
    intr: &CameraIntrinsics,
    pose: &Pose,
    spec: &BevSpec,
) -> Result<BevImage, BevError> {
    render_bev_with(img, intr, pose, spec, Exec::default())
}

pub fn render_bev_with(
    img: &GrayImage,
    intr: &CameraIntrinsics,
    pose: &Pose,
    spec: &BevSpec,
    exec: Exec,
) -> Result<BevImage, BevError> {
    spec.validate()?;
    let w = spec.width as usize;
    let mut cells = vec![(0.0f32, false); spec.pixel_count()];
    exec.fill_rows(&mut cells, w, |row, out| {
        for (col, cell) in out.iter_mut().enumerate() {
            *cell = sample_ground(
                img,
                intr,
                pose,
                &spec.bev_pixel_to_ground(col as f64, row as f64),
            )
            .map_or((0.0, false), |v| (v as f32, true));
        }
    });
    let (data, valid): (Vec<f32>, Vec<bool>) = cells.into_iter().unzip();
    let total = data.len();
    let bev = BevImage {
        intensities: GrayImage::from_vec(spec.width, spec.height, data).expect("size matches spec"),
        valid,
    };
    let valid_count = bev.valid_count();
    if (valid_count as f64) < MIN_FOOTPRINT_FRACTION * total as f64 {
        return Err(BevError::EmptyFootprint {
            valid: valid_count,
            total,
        });
    }
    Ok(bev)
}

/// Intensity seen by a camera at a ground point, if the point is visible.
#[inline]
pub fn sample_ground(
    img: &GrayImage,
    intr: &CameraIntrinsics,
    pose: &Pose,
    ground: &Vector3<f64>,
) -> Option<f64> {
    let px = intr.project(&pose.transform_point(ground)).ok()?;
    img.sample_bilinear(px.x, px.y)
}

/// Pixels valid in both BEVs and outside the ego ROI.
#[derive(Debug, Clone, PartialEq)]
pub struct OverlapMask {
    pub width: u32,
    pub height: u32,
    pub mask: Vec<bool>,
    pub count: usize,
}

impl OverlapMask {
    #[inline]
    pub fn contains(&self, x: u32, y: u32) -> bool {
        self.mask[y as usize * self.width as usize + x as usize]
    }

    /// Pixels whose full `(2 radius + 1)^2` neighbourhood lies inside the mask.
    pub fn eroded(&self, radius: u32) -> OverlapMask {
        if radius == 0 {
            return self.clone();
        }
        let (w, h) = (self.width as usize, self.height as usize);
        let r = radius as usize;
        // Separable min filter: horizontal run, then vertical.
        let erode_line = |line: &[bool], out: &mut [bool]| {
            let n = line.len();
            // Distance to the nearest false on the left and on the right.
            let mut left = vec![0usize; n];
            let mut run = 0usize;
            for i in 0..n {
                run = if line[i] { run + 1 } else { 0 };
                left[i] = run;
            }
            run = 0;
            for i in (0..n).rev() {
                run = if line[i] { run + 1 } else { 0 };
                out[i] = left[i] > r && run > r;
            }
        };
        let mut horiz = vec![false; w * h];
        for y in 0..h {
            erode_line(
                &self.mask[y * w..(y + 1) * w],
                &mut horiz[y * w..(y + 1) * w],
            );
        }
        let mut mask = vec![false; w * h];
        let mut col = vec![false; h];
        let mut col_out = vec![false; h];
        for x in 0..w {
            for y in 0..h {
                col[y] = horiz[y * w + x];
            }
            erode_line(&col, &mut col_out);
            for y in 0..h {
                mask[y * w + x] = col_out[y];
            }
        }
        let count = mask.iter().filter(|m| **m).count();
        OverlapMask {
            width: self.width,
            height: self.height,
            mask,
            count,
        }
    }
}

/// Common-view mask of two BEV renders.
pub fn overlap_mask(
    bev_i: &BevImage,
    bev_j: &BevImage,
    spec: &BevSpec,
    min_count: usize,
) -> Result<OverlapMask, BevError> {
    if bev_i.width() != bev_j.width()
        || bev_i.height() != bev_j.height()
        || bev_i.width() != spec.width
        || bev_i.height() != spec.height
    {
        return Err(BevError::SizeMismatch);
    }
    let w = spec.width;
    let mask: Vec<bool> = bev_i
        .valid
        .iter()
        .zip(&bev_j.valid)
        .enumerate()
        .map(|(idx, (a, b))| {
            let (x, y) = ((idx % w as usize) as u32, (idx / w as usize) as u32);
            *a && *b && !spec.ego_roi.contains(x, y)
        })
        .collect();
    let count = mask.iter().filter(|m| **m).count();
    if count < min_count {
        return Err(BevError::InsufficientOverlap {
            count,
            min: min_count,
        });
    }
    Ok(OverlapMask {
        width: spec.width,
        height: spec.height,
        mask,
        count,
    })
}

/// Diagnostic surround view: each pixel takes the valid camera whose centre
/// is nearest on the ground. Uncovered and ego pixels are black.
pub fn stitch_bev(
    bevs: &PerCamera<BevImage>,
    poses: &PerCamera<Pose>,
    spec: &BevSpec,
) -> GrayImage {
    let centers = poses.map(|_, p| p.camera_center());
    let mut out = GrayImage::new(spec.width, spec.height);
    for y in 0..spec.height {
        for x in 0..spec.width {
            if spec.ego_roi.contains(x, y) {
                continue;
            }
            let g = spec.bev_pixel_to_ground(x as f64, y as f64);
            let best = CameraId::ALL
                .into_iter()
                .filter(|id| bevs.get(*id).is_valid(x, y))
                .min_by(|a, b| {
                    let da = (centers.get(*a).xy() - g.xy()).norm_squared();
                    let db = (centers.get(*b).xy() - g.xy()).norm_squared();
                    da.total_cmp(&db)
                });
            if let Some(id) = best {
                out.set(x, y, bevs.get(id).get(x, y));
            }
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::camera::PinholeIntrinsics;
    use crate::pose::PoseParams;
    use proptest::prelude::*;

    fn small_spec() -> BevSpec {
        BevSpec {
            width: 40,
            height: 30,
            scale: 0.1,
            center_x: 20.0,
            center_y: 15.0,
            ground_z: 0.0,
            ego_roi: PixelRect::EMPTY,
        }
    }

    fn bev_all(valid: bool, spec: &BevSpec) -> BevImage {
        BevImage {
            intensities: GrayImage::filled(spec.width, spec.height, 50.0),
            valid: vec![valid; spec.pixel_count()],
        }
    }

    #[test]
    fn origin_and_scale() {
        let spec = BevSpec {
            ground_z: 0.3,
            ..BevSpec::default()
        };
        assert_eq!(
            spec.bev_pixel_to_ground(spec.center_x, spec.center_y),
            Vector3::new(0.0, 0.0, 0.3)
        );
        let p = spec.bev_pixel_to_ground(spec.center_x + 50.0, spec.center_y);
        assert!((p - Vector3::new(1.0, 0.0, 0.3)).norm() < 1e-12);
    }

    #[test]
    fn default_ego_roi_size() {
        let spec = BevSpec::default();
        spec.validate().unwrap();
        let r = spec.ego_roi;
        assert_eq!((r.x1 - r.x0, r.y1 - r.y0), (100, 240));
        assert!(
            r.contains(300, 300)
                && r.contains(250, 180)
                && !r.contains(249, 300)
                && !r.contains(300, 420)
        );
    }

    #[test]
    fn full_overlap_without_roi() {
        let spec = small_spec();
        let m = overlap_mask(&bev_all(true, &spec), &bev_all(true, &spec), &spec, 1).unwrap();
        assert_eq!(m.count, spec.pixel_count());
        assert!(m.mask.iter().all(|v| *v));
    }

    #[test]
    fn disjoint_footprints_fail() {
        let spec = small_spec();
        let mut a = bev_all(false, &spec);
        let mut b = bev_all(false, &spec);
        for i in 0..spec.pixel_count() {
            if i % 2 == 0 {
                a.valid[i] = true;
            } else {
                b.valid[i] = true;
            }
        }
        assert!(matches!(
            overlap_mask(&a, &b, &spec, DEFAULT_MIN_OVERLAP),
            Err(BevError::InsufficientOverlap { count: 0, .. })
        ));
    }

    #[test]
    fn roi_is_cut_and_mask_is_symmetric() {
        let mut spec = small_spec();
        spec.ego_roi = PixelRect {
            x0: 10,
            y0: 5,
            x1: 20,
            y1: 25,
        };
        let mut a = bev_all(true, &spec);
        let b = bev_all(true, &spec);
        a.valid[3] = false;
        let ab = overlap_mask(&a, &b, &spec, 1).unwrap();
        let ba = overlap_mask(&b, &a, &spec, 1).unwrap();
        assert_eq!(ab, ba);
        assert_eq!(ab.count, spec.pixel_count() - 200 - 1);
        assert!(!ab.contains(15, 10));
    }

    #[test]
    fn erosion_shrinks_by_radius() {
        let spec = small_spec();
        let m = overlap_mask(&bev_all(true, &spec), &bev_all(true, &spec), &spec, 1).unwrap();
        let e = m.eroded(2);
        assert_eq!(e.count, (40 - 4) * (30 - 4));
        assert!(e.contains(2, 2) && e.contains(37, 10) && !e.contains(1, 2) && !e.contains(38, 10));
    }

    #[test]
    fn camera_looking_up_has_empty_footprint() {
        let intr = CameraIntrinsics::Pinhole(PinholeIntrinsics::from_hfov(90.0, 64, 64).unwrap());
        // Optical axis along ground +z (upwards), camera 2 m above the ground.
        let pose = PoseParams::new(0.0, 0.0, 0.0, 0.0, 0.0, 2.0).to_pose();
        let img = GrayImage::filled(64, 64, 100.0);
        assert!(matches!(
            render_bev(&img, &intr, &pose, &small_spec()),
            Err(BevError::EmptyFootprint { valid: 0, .. })
        ));
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(1000))]
        #[test]
        fn ground_round_trip(u in 0u32..1000, v in 0u32..1000) {
            let spec = BevSpec::default();
            let p = spec.ground_to_bev(&spec.bev_pixel_to_ground(u as f64, v as f64));
            prop_assert!((p.x - u as f64).abs() < 1e-9 && (p.y - v as f64).abs() < 1e-9);
            prop_assert_eq!((p.x.round() as u32, p.y.round() as u32), (u, v));
        }
    }
}
