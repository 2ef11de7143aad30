//! Texture point selection in the common view and exposure-ratio estimation.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::bev::{BevImage, OverlapMask};
use crate::rig::CameraId;

pub const DEFAULT_DELTA: u32 = 2;
pub const DEFAULT_THETA: f64 = 15.0;
pub const DEFAULT_MAX_POINTS: usize = 3_000;

/// Exposure sums below this are treated as an all-black overlap.
const MIN_EXPOSURE_SUM: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum TextureError {
    #[error(
        "no texture points above the gradient threshold in the {source_cam}->{target} overlap"
    )]
    NoTexture {
        source_cam: CameraId,
        target: CameraId,
    },
    #[error("exposure ratio undefined: overlap intensity sum {sum} is zero")]
    DegenerateExposure { sum: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TextureParams {
    /// Backward-difference offset, pixels.
    pub delta: u32,
    /// Gradient-norm threshold, intensity units.
    pub theta: f64,
    /// Stride-subsample the selection down to at most this many points.
    pub max_points: usize,
}

impl Default for TextureParams {
    fn default() -> Self {
        Self {
            delta: DEFAULT_DELTA,
            theta: DEFAULT_THETA,
            max_points: DEFAULT_MAX_POINTS,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TexturePoint {
    pub x: u32,
    pub y: u32,
    /// Intensity in the source camera's BEV.
    pub intensity: f32,
}

/// Texture points from `source`'s BEV, used to score `target`.
#[derive(Debug, Clone, PartialEq)]
pub struct TexturePointSet {
    pub points: Vec<TexturePoint>,
    pub source: CameraId,
    pub target: CameraId,
}

impl TexturePointSet {
    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    /// CSV with `x,y,intensity` rows.
    pub fn to_csv(&self) -> String {
        let mut s = String::from("x,y,intensity\n");
        for p in &self.points {
            s.push_str(&format!("{},{},{}\n", p.x, p.y, p.intensity));
        }
        s
    }
}

/// Backward-difference photometric gradient
/// `(I(x,y) - I(x,y-delta), I(x,y) - I(x-delta,y))`, with `x` the column.
///
/// The caller guarantees `x >= delta` and `y >= delta`.
#[inline]
pub fn gradient(img: &BevImage, x: u32, y: u32, delta: u32) -> [f64; 2] {
    let c = img.get(x, y) as f64;
    [
        c - img.get(x, y - delta) as f64,
        c - img.get(x - delta, y) as f64,
    ]
}

/// All eroded-mask pixels of `bev` whose gradient norm exceeds `theta`,
/// in row-major order, stride-subsampled to `max_points`.
pub fn extract_texture_points(
    bev: &BevImage,
    mask: &OverlapMask,
    params: &TextureParams,
    source: CameraId,
    target: CameraId,
) -> Result<TexturePointSet, TextureError> {
    let delta = params.delta;
    let eroded = mask.eroded(delta);
    let theta2 = params.theta * params.theta;
    let mut points = Vec::new();
    for y in delta..mask.height {
        for x in delta..mask.width {
            if !eroded.contains(x, y) {
                continue;
            }
            let [gy, gx] = gradient(bev, x, y, delta);
            if gy * gy + gx * gx > theta2 {
                points.push(TexturePoint {
                    x,
                    y,
                    intensity: bev.get(x, y),
                });
            }
        }
    }
    if points.is_empty() {
        return Err(TextureError::NoTexture {
            source_cam: source,
            target,
        });
    }
    let points = stride_subsample(points, params.max_points);
    Ok(TexturePointSet {
        points,
        source,
        target,
    })
}

fn stride_subsample<T: Copy>(items: Vec<T>, max: usize) -> Vec<T> {
    let n = items.len();
    if n <= max || max == 0 {
        return items;
    }
    (0..max).map(|i| items[i * n / max]).collect()
}

/// Multiplicative gain `gamma_ij`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct ExposureRatio(pub f64);

impl ExposureRatio {
    pub const ONE: ExposureRatio = ExposureRatio(1.0);

    pub fn gamma(self) -> f64 {
        self.0
    }
}

impl Default for ExposureRatio {
    fn default() -> Self {
        Self::ONE
    }
}

/// Which side of the residual the exposure ratio is applied to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExposureTarget {
    /// `I_i - gamma * I_j`
    #[default]
    Target,
    /// `I_i / gamma - I_j`
    Source,
}

/// `sum I_i / sum I_j` over the overlap.
pub fn exposure_ratio(
    bev_i: &BevImage,
    bev_j: &BevImage,
    mask: &OverlapMask,
) -> Result<ExposureRatio, TextureError> {
    let mut sum_i = 0.0f64;
    let mut sum_j = 0.0f64;
    for (idx, m) in mask.mask.iter().enumerate() {
        if *m && bev_i.valid[idx] && bev_j.valid[idx] {
            sum_i += bev_i.intensities.data()[idx] as f64;
            sum_j += bev_j.intensities.data()[idx] as f64;
        }
    }
    if sum_j < MIN_EXPOSURE_SUM {
        return Err(TextureError::DegenerateExposure { sum: sum_j });
    }
    Ok(ExposureRatio(sum_i / sum_j))
}
