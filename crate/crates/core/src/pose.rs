//! Rigid transforms, Euler-angle parameterization and pose perturbations.
//!
//! A [`Pose`] is the ground-to-camera transform `T_CG`: a ground point
//! `p_G` maps to camera coordinates `R * p_G + t`.
//!
//! Euler angles follow the intrinsic Z-Y-X convention,
//! `R = Rz(yaw) * Ry(pitch) * Rx(roll)`, with degrees at every external
//! interface and radians internally.

use nalgebra::{Matrix3, Rotation3, Vector3};
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Pitch angles closer than this to +-90 degrees are treated as gimbal lock.
pub const GIMBAL_LOCK_EPS_DEG: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Error)]
pub enum PoseError {
    #[error("pitch {pitch_deg} deg is within {GIMBAL_LOCK_EPS_DEG} deg of +-90 (gimbal lock)")]
    GimbalLock { pitch_deg: f64 },
}

/// Roll, pitch and yaw in degrees.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct EulerDeg {
    pub roll: f64,
    pub pitch: f64,
    pub yaw: f64,
}

impl EulerDeg {
    pub fn new(roll: f64, pitch: f64, yaw: f64) -> Self {
        Self { roll, pitch, yaw }
    }

    pub fn to_rotation(self) -> Rotation3<f64> {
        rotation_from_euler_deg(self.roll, self.pitch, self.yaw)
    }
}

/// Builds `Rz(yaw) * Ry(pitch) * Rx(roll)` from degrees.
pub fn rotation_from_euler_deg(roll: f64, pitch: f64, yaw: f64) -> Rotation3<f64> {
    let rx = Rotation3::from_axis_angle(&Vector3::x_axis(), roll.to_radians());
    let ry = Rotation3::from_axis_angle(&Vector3::y_axis(), pitch.to_radians());
    let rz = Rotation3::from_axis_angle(&Vector3::z_axis(), yaw.to_radians());
    rz * ry * rx
}

fn pitch_of(m: &Matrix3<f64>) -> f64 {
    (-m[(2, 0)]).atan2((m[(0, 0)] * m[(0, 0)] + m[(1, 0)] * m[(1, 0)]).sqrt())
}

/// Strict Z-Y-X extraction. Fails at gimbal lock, where roll and yaw are not
/// separately identifiable.
pub fn euler_from_rotation_deg(rot: &Rotation3<f64>) -> Result<EulerDeg, PoseError> {
    let m = rot.matrix();
    let pitch = pitch_of(m).to_degrees();
    if 90.0 - pitch.abs() <= GIMBAL_LOCK_EPS_DEG {
        return Err(PoseError::GimbalLock { pitch_deg: pitch });
    }
    Ok(EulerDeg {
        roll: m[(2, 1)].atan2(m[(2, 2)]).to_degrees(),
        pitch,
        yaw: m[(1, 0)].atan2(m[(0, 0)]).to_degrees(),
    })
}

/// Z-Y-X extraction that resolves gimbal lock by setting roll to zero and
/// folding the remaining rotation about the vertical axis into yaw.
pub fn euler_from_rotation_deg_lenient(rot: &Rotation3<f64>) -> EulerDeg {
    match euler_from_rotation_deg(rot) {
        Ok(e) => e,
        Err(PoseError::GimbalLock { pitch_deg }) => {
            let m = rot.matrix();
            EulerDeg {
                roll: 0.0,
                pitch: pitch_deg.signum() * 90.0,
                yaw: (-m[(0, 1)]).atan2(m[(1, 1)]).to_degrees(),
            }
        }
    }
}

/// Wraps an angle in degrees to `(-180, 180]`.
pub fn wrap_deg(angle: f64) -> f64 {
    let mut a = angle % 360.0;
    if a <= -180.0 {
        a += 360.0;
    } else if a > 180.0 {
        a -= 360.0;
    }
    a
}

/// Ground-to-camera rigid transform `T_CG`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Pose {
    pub rotation: Rotation3<f64>,
    pub translation: Vector3<f64>,
}

impl Default for Pose {
    fn default() -> Self {
        Self::identity()
    }
}

impl Pose {
    pub fn identity() -> Self {
        Self {
            rotation: Rotation3::identity(),
            translation: Vector3::zeros(),
        }
    }

    pub fn new(rotation: Rotation3<f64>, translation: Vector3<f64>) -> Self {
        Self {
            rotation,
            translation,
        }
    }

    pub fn from_euler_deg(euler: EulerDeg, translation: Vector3<f64>) -> Self {
        Self::new(euler.to_rotation(), translation)
    }

    /// Pose of a camera whose optical centre sits at `center` in the ground frame.
    pub fn from_center(rotation: Rotation3<f64>, center: Vector3<f64>) -> Self {
        Self::new(rotation, -(rotation * center))
    }

    /// Camera optical centre in the ground frame.
    pub fn camera_center(&self) -> Vector3<f64> {
        -(self.rotation.inverse() * self.translation)
    }

    #[inline]
    pub fn transform_point(&self, p: &Vector3<f64>) -> Vector3<f64> {
        self.rotation * p + self.translation
    }

    pub fn inverse(&self) -> Pose {
        let r_inv = self.rotation.inverse();
        Pose::new(r_inv, -(r_inv * self.translation))
    }

    /// `self * other`: apply `other` first, then `self`.
    pub fn compose(&self, other: &Pose) -> Pose {
        Pose::new(
            self.rotation * other.rotation,
            self.rotation * other.translation + self.translation,
        )
    }

    pub fn euler_deg(&self) -> Result<EulerDeg, PoseError> {
        euler_from_rotation_deg(&self.rotation)
    }

    /// Max absolute entry of `R^T R - I` plus `|det R - 1|`.
    pub fn orthonormality_error(&self) -> f64 {
        let m = self.rotation.matrix();
        let e = m.transpose() * m - Matrix3::identity();
        e.abs().max() + (m.determinant() - 1.0).abs()
    }

    /// Re-projects the rotation onto SO(3).
    pub fn renormalized(mut self) -> Pose {
        self.rotation.renormalize();
        self
    }
}

/// External pose parameterization used in rig files and reports: Euler
/// angles of the ground-to-camera rotation plus the camera centre in the
/// ground frame.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct PoseParams {
    pub roll: f64,
    pub pitch: f64,
    pub yaw: f64,
    #[serde(rename = "tx")]
    pub x: f64,
    #[serde(rename = "ty")]
    pub y: f64,
    #[serde(rename = "tz")]
    pub z: f64,
}

impl PoseParams {
    pub fn new(roll: f64, pitch: f64, yaw: f64, x: f64, y: f64, z: f64) -> Self {
        Self {
            roll,
            pitch,
            yaw,
            x,
            y,
            z,
        }
    }

    pub fn to_pose(self) -> Pose {
        Pose::from_center(
            rotation_from_euler_deg(self.roll, self.pitch, self.yaw),
            Vector3::new(self.x, self.y, self.z),
        )
    }

    pub fn from_pose(pose: &Pose) -> Self {
        let e = euler_from_rotation_deg_lenient(&pose.rotation);
        let c = pose.camera_center();
        Self::new(e.roll, e.pitch, e.yaw, c.x, c.y, c.z)
    }
}

/// Left-multiplied pose increment: angles in degrees, offsets in meters.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Perturbation {
    pub roll: f64,
    pub pitch: f64,
    pub yaw: f64,
    pub dx: f64,
    pub dy: f64,
    pub dz: f64,
}

impl Perturbation {
    pub fn new(roll: f64, pitch: f64, yaw: f64, dx: f64, dy: f64, dz: f64) -> Self {
        Self {
            roll,
            pitch,
            yaw,
            dx,
            dy,
            dz,
        }
    }

    pub fn zero() -> Self {
        Self::default()
    }

    pub fn is_zero(&self) -> bool {
        self.as_array().iter().all(|v| *v == 0.0)
    }

    pub fn as_array(&self) -> [f64; 6] {
        [self.roll, self.pitch, self.yaw, self.dx, self.dy, self.dz]
    }

    pub fn from_array(a: [f64; 6]) -> Self {
        Self::new(a[0], a[1], a[2], a[3], a[4], a[5])
    }

    pub fn to_pose(&self) -> Pose {
        Pose::new(
            rotation_from_euler_deg(self.roll, self.pitch, self.yaw),
            Vector3::new(self.dx, self.dy, self.dz),
        )
    }

    /// The increment `d` with `estimate = d * reference`, i.e. the
    /// perturbation that [`compose_perturbation`] would have applied.
    /// Angles are wrapped to `(-180, 180]`.
    pub fn between(estimate: &Pose, reference: &Pose) -> Perturbation {
        if estimate == reference {
            return Perturbation::zero();
        }
        let rel = estimate.compose(&reference.inverse());
        let e = euler_from_rotation_deg_lenient(&rel.rotation);
        Perturbation::new(
            wrap_deg(e.roll),
            wrap_deg(e.pitch),
            wrap_deg(e.yaw),
            rel.translation.x,
            rel.translation.y,
            rel.translation.z,
        )
    }
}

/// `T(k) = dT * T_base`. A zero increment returns `base` unchanged.
pub fn compose_perturbation(delta: &Perturbation, base: &Pose) -> Pose {
    if delta.is_zero() {
        return *base;
    }
    delta.to_pose().compose(base).renormalized()
}
