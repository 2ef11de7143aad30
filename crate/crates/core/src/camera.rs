//! Pinhole and fisheye projection.
//!
//! Pixel coordinates put integer values at pixel centres: `(0, 0)` is the
//! centre of the top-left pixel.

use nalgebra::{Point2, Vector3};
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Points with camera-frame depth at or below this are behind the camera.
pub const MIN_DEPTH: f64 = 1e-6;

/// Sample count for the fisheye monotonicity check.
const MONOTONIC_SAMPLES: usize = 1000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Error)]
pub enum ProjectionError {
    #[error("point is behind the camera")]
    BehindCamera,
    #[error("point is outside the fisheye field of view")]
    OutOfFov,
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum IntrinsicsError {
    #[error("focal lengths must be positive (fx={fx}, fy={fy})")]
    NonPositiveFocal { fx: f64, fy: f64 },
    #[error("principal point ({cx}, {cy}) outside the {width}x{height} image")]
    PrincipalPointOutside {
        cx: f64,
        cy: f64,
        width: u32,
        height: u32,
    },
    #[error("fisheye field of view {fov} rad must be in (0, pi]")]
    InvalidFov { fov: f64 },
    #[error("fisheye angle-to-radius map is not strictly increasing on [0, fov] (fails near theta={theta})")]
    NonMonotonic { theta: f64 },
}

fn check_common(
    fx: f64,
    fy: f64,
    cx: f64,
    cy: f64,
    width: u32,
    height: u32,
) -> Result<(), IntrinsicsError> {
    if !(fx > 0.0 && fy > 0.0) {
        return Err(IntrinsicsError::NonPositiveFocal { fx, fy });
    }
    if !(cx > 0.0 && cx < width as f64 && cy > 0.0 && cy < height as f64) {
        return Err(IntrinsicsError::PrincipalPointOutside {
            cx,
            cy,
            width,
            height,
        });
    }
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PinholeIntrinsics {
    pub fx: f64,
    pub fy: f64,
    pub cx: f64,
    pub cy: f64,
    pub width: u32,
    pub height: u32,
}

impl PinholeIntrinsics {
    pub fn new(
        fx: f64,
        fy: f64,
        cx: f64,
        cy: f64,
        width: u32,
        height: u32,
    ) -> Result<Self, IntrinsicsError> {
        let intr = Self {
            fx,
            fy,
            cx,
            cy,
            width,
            height,
        };
        intr.validate()?;
        Ok(intr)
    }

    /// Square-pixel camera with the given horizontal field of view (degrees),
    /// principal point at the image centre.
    pub fn from_hfov(hfov_deg: f64, width: u32, height: u32) -> Result<Self, IntrinsicsError> {
        let f = (width as f64 / 2.0) / (hfov_deg.to_radians() / 2.0).tan();
        Self::new(
            f,
            f,
            (width as f64 - 1.0) / 2.0,
            (height as f64 - 1.0) / 2.0,
            width,
            height,
        )
    }

    pub fn validate(&self) -> Result<(), IntrinsicsError> {
        check_common(self.fx, self.fy, self.cx, self.cy, self.width, self.height)
    }

    #[inline]
    pub fn project(&self, p: &Vector3<f64>) -> Result<Point2<f64>, ProjectionError> {
        if p.z <= MIN_DEPTH {
            return Err(ProjectionError::BehindCamera);
        }
        Ok(Point2::new(
            self.fx * p.x / p.z + self.cx,
            self.fy * p.y / p.z + self.cy,
        ))
    }

    /// Ray direction (z = 1) through a pixel.
    pub fn unproject(&self, px: &Point2<f64>) -> Option<Vector3<f64>> {
        Some(Vector3::new(
            (px.x - self.cx) / self.fx,
            (px.y - self.cy) / self.fy,
            1.0,
        ))
    }
}

/// Equidistant fisheye with odd-polynomial angle-to-radius distortion:
/// `r(theta) = theta * (1 + k1 theta^2 + k2 theta^4 + k3 theta^6 + k4 theta^8)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FisheyeIntrinsics {
    pub fx: f64,
    pub fy: f64,
    pub cx: f64,
    pub cy: f64,
    pub k1: f64,
    pub k2: f64,
    pub k3: f64,
    pub k4: f64,
    pub width: u32,
    pub height: u32,
    /// Maximum angle from the optical axis, radians.
    pub fov: f64,
}

impl FisheyeIntrinsics {
    #[allow(clippy::too_many_arguments)]
    pub fn new(
        fx: f64,
        fy: f64,
        cx: f64,
        cy: f64,
        k: [f64; 4],
        width: u32,
        height: u32,
        fov: f64,
    ) -> Result<Self, IntrinsicsError> {
        let intr = Self {
            fx,
            fy,
            cx,
            cy,
            k1: k[0],
            k2: k[1],
            k3: k[2],
            k4: k[3],
            width,
            height,
            fov,
        };
        intr.validate()?;
        Ok(intr)
    }

    pub fn validate(&self) -> Result<(), IntrinsicsError> {
        check_common(self.fx, self.fy, self.cx, self.cy, self.width, self.height)?;
        if !(self.fov > 0.0 && self.fov <= std::f64::consts::PI) {
            return Err(IntrinsicsError::InvalidFov { fov: self.fov });
        }
        let mut prev = self.distort(0.0);
        for i in 1..=MONOTONIC_SAMPLES {
            let theta = self.fov * i as f64 / MONOTONIC_SAMPLES as f64;
            let r = self.distort(theta);
            if r <= prev {
                return Err(IntrinsicsError::NonMonotonic { theta });
            }
            prev = r;
        }
        Ok(())
    }

    /// Normalized image radius for an incidence angle.
    #[inline]
    pub fn distort(&self, theta: f64) -> f64 {
        let t2 = theta * theta;
        theta * (1.0 + t2 * (self.k1 + t2 * (self.k2 + t2 * (self.k3 + t2 * self.k4))))
    }

    fn distort_derivative(&self, theta: f64) -> f64 {
        let t2 = theta * theta;
        1.0 + t2
            * (3.0 * self.k1 + t2 * (5.0 * self.k2 + t2 * (7.0 * self.k3 + t2 * 9.0 * self.k4)))
    }

    /// Inverse of [`distort`](Self::distort) on `[0, fov]`; `None` beyond the rim.
    pub fn undistort(&self, r: f64) -> Option<f64> {
        let r_max = self.distort(self.fov);
        if !(0.0..=r_max).contains(&r) {
            return None;
        }
        // Newton steps kept inside a shrinking bisection bracket.
        let (mut lo, mut hi) = (0.0, self.fov);
        let mut theta = r.min(self.fov);
        for _ in 0..100 {
            let f = self.distort(theta) - r;
            if f.abs() < 1e-15 {
                break;
            }
            if f > 0.0 {
                hi = theta;
            } else {
                lo = theta;
            }
            let step = theta - f / self.distort_derivative(theta);
            theta = if step > lo && step < hi {
                step
            } else {
                0.5 * (lo + hi)
            };
            if hi - lo < 1e-15 {
                break;
            }
        }
        Some(theta)
    }

    #[inline]
    pub fn project(&self, p: &Vector3<f64>) -> Result<Point2<f64>, ProjectionError> {
        let rho = (p.x * p.x + p.y * p.y).sqrt();
        if rho == 0.0 {
            // On the optical axis; behind it if z is not positive.
            if p.z > MIN_DEPTH {
                return Ok(Point2::new(self.cx, self.cy));
            }
            return Err(ProjectionError::BehindCamera);
        }
        let theta = rho.atan2(p.z);
        if theta > self.fov {
            return Err(ProjectionError::OutOfFov);
        }
        let r = self.distort(theta);
        Ok(Point2::new(
            self.fx * r * p.x / rho + self.cx,
            self.fy * r * p.y / rho + self.cy,
        ))
    }

    /// Unit ray through a pixel, or `None` outside the image circle.
    pub fn unproject(&self, px: &Point2<f64>) -> Option<Vector3<f64>> {
        let mx = (px.x - self.cx) / self.fx;
        let my = (px.y - self.cy) / self.fy;
        let r = (mx * mx + my * my).sqrt();
        if r == 0.0 {
            return Some(Vector3::new(0.0, 0.0, 1.0));
        }
        let theta = self.undistort(r)?;
        let s = theta.sin() / r;
        Some(Vector3::new(mx * s, my * s, theta.cos()))
    }
}

/// Either supported camera model.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "model", rename_all = "lowercase")]
pub enum CameraIntrinsics {
    Pinhole(PinholeIntrinsics),
    Fisheye(FisheyeIntrinsics),
}

impl CameraIntrinsics {
    #[inline]
    pub fn project(&self, p: &Vector3<f64>) -> Result<Point2<f64>, ProjectionError> {
        match self {
            CameraIntrinsics::Pinhole(c) => c.project(p),
            CameraIntrinsics::Fisheye(c) => c.project(p),
        }
    }

    pub fn unproject(&self, px: &Point2<f64>) -> Option<Vector3<f64>> {
        match self {
            CameraIntrinsics::Pinhole(c) => c.unproject(px),
            CameraIntrinsics::Fisheye(c) => c.unproject(px),
        }
    }

    pub fn width(&self) -> u32 {
        match self {
            CameraIntrinsics::Pinhole(c) => c.width,
            CameraIntrinsics::Fisheye(c) => c.width,
        }
    }

    pub fn height(&self) -> u32 {
        match self {
            CameraIntrinsics::Pinhole(c) => c.height,
            CameraIntrinsics::Fisheye(c) => c.height,
        }
    }

    pub fn validate(&self) -> Result<(), IntrinsicsError> {
        match self {
            CameraIntrinsics::Pinhole(c) => c.validate(),
            CameraIntrinsics::Fisheye(c) => c.validate(),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn pinhole() -> PinholeIntrinsics {
        PinholeIntrinsics::new(500.0, 500.0, 750.0, 750.0, 1500, 1500).unwrap()
    }

    fn fisheye(k: [f64; 4]) -> FisheyeIntrinsics {
        FisheyeIntrinsics::new(
            300.0,
            300.0,
            640.0,
            540.0,
            k,
            1280,
            1080,
            97.5f64.to_radians(),
        )
        .unwrap()
    }

    #[test]
    fn pinhole_examples() {
        let c = pinhole();
        assert_eq!(
            c.project(&Vector3::new(0.0, 0.0, 1.0)).unwrap(),
            Point2::new(750.0, 750.0)
        );
        assert_eq!(
            c.project(&Vector3::new(1.0, 0.0, 1.0)).unwrap(),
            Point2::new(1250.0, 750.0)
        );
        assert_eq!(
            c.project(&Vector3::new(0.0, 0.0, -1.0)),
            Err(ProjectionError::BehindCamera)
        );
        assert_eq!(
            c.project(&Vector3::new(0.0, 0.0, 1e-6)),
            Err(ProjectionError::BehindCamera)
        );
    }

    #[test]
    fn fisheye_examples() {
        let c = fisheye([-0.05, 0.005, 0.0, 0.0]);
        assert_eq!(
            c.project(&Vector3::new(0.0, 0.0, 1.0)).unwrap(),
            Point2::new(640.0, 540.0)
        );

        let c = fisheye([0.0; 4]);
        let p = Vector3::new(0.5f64.sin(), 0.0, 0.5f64.cos());
        let px = c.project(&p).unwrap();
        assert!((px.x - 790.0).abs() < 1e-9 && (px.y - 540.0).abs() < 1e-12);

        let theta = c.fov + 0.01;
        let p = Vector3::new(theta.sin(), 0.0, theta.cos());
        assert_eq!(c.project(&p), Err(ProjectionError::OutOfFov));
    }

    #[test]
    fn fisheye_rejects_non_monotonic_polynomial() {
        let err = FisheyeIntrinsics::new(
            300.0,
            300.0,
            640.0,
            540.0,
            [-0.5, 0.0, 0.0, 0.0],
            1280,
            1080,
            1.7,
        );
        assert!(matches!(err, Err(IntrinsicsError::NonMonotonic { .. })));
    }

    #[test]
    fn invalid_pinhole_rejected() {
        assert!(PinholeIntrinsics::new(0.0, 1.0, 5.0, 5.0, 10, 10).is_err());
        assert!(PinholeIntrinsics::new(1.0, 1.0, 10.0, 5.0, 10, 10).is_err());
    }

    proptest! {
        #[test]
        fn pinhole_is_scale_invariant(x in -2.0f64..2.0, y in -2.0f64..2.0, z in 0.1f64..5.0, s in 0.01f64..100.0) {
            let c = pinhole();
            let a = c.project(&Vector3::new(x, y, z)).unwrap();
            let b = c.project(&Vector3::new(s * x, s * y, s * z)).unwrap();
            prop_assert!((a - b).norm() < 1e-9);
        }

        #[test]
        fn pinhole_round_trip(u in 0.0f64..1500.0, v in 0.0f64..1500.0, depth in 0.1f64..20.0) {
            let c = pinhole();
            let ray = c.unproject(&Point2::new(u, v)).unwrap();
            let px = c.project(&(ray * depth)).unwrap();
            prop_assert!((px - Point2::new(u, v)).norm() < 1e-9);
        }

        #[test]
        fn fisheye_round_trip(theta in 0.0f64..1.70, phi in -3.1f64..3.1, depth in 0.1f64..20.0) {
            let c = fisheye([-0.05, 0.005, 0.0, 0.0]);
            let p = Vector3::new(theta.sin() * phi.cos(), theta.sin() * phi.sin(), theta.cos()) * depth;
            let px = c.project(&p).unwrap();
            let ray = c.unproject(&px).unwrap();
            prop_assert!((ray - p.normalize()).norm() < 1e-9);
            let px2 = c.project(&(ray * 3.0)).unwrap();
            prop_assert!((px2 - px).norm() < 1e-9);
        }

        #[test]
        fn zero_distortion_is_equidistant(theta in 0.0f64..1.70, phi in -3.1f64..3.1) {
            let c = fisheye([0.0; 4]);
            let p = Vector3::new(theta.sin() * phi.cos(), theta.sin() * phi.sin(), theta.cos());
            let px = c.project(&p).unwrap();
            let expected = Point2::new(640.0 + 300.0 * theta * phi.cos(), 540.0 + 300.0 * theta * phi.sin());
            prop_assert!((px - expected).norm() < 1e-9);
        }
    }
}
