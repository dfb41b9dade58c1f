//! Pinhole intrinsics, rigid poses and projection.
//!
//! A [`Pose`] maps camera coordinates to world coordinates: `X_w = R X_c + t`,
//! so `translation` is the camera center in the world.

use nalgebra::{Matrix3, Point2, Vector3};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::so3;

/// Points closer than this to the image plane count as behind the camera.
pub const MIN_DEPTH: f64 = 1e-9;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GeometryError {
    #[error("invalid intrinsics: {0}")]
    InvalidIntrinsics(String),
    #[error("rotation is not orthonormal (deviation {0:e})")]
    NotARotation(f64),
    #[error("point is behind the camera")]
    BehindCamera,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CameraIntrinsics {
    pub fx: f64,
    pub fy: f64,
    pub cx: f64,
    pub cy: f64,
    pub width: u16,
    pub height: u16,
}

impl CameraIntrinsics {
    pub fn new(
        fx: f64,
        fy: f64,
        cx: f64,
        cy: f64,
        width: u16,
        height: u16,
    ) -> Result<Self, GeometryError> {
        let k = Self {
            fx,
            fy,
            cx,
            cy,
            width,
            height,
        };
        k.validate()?;
        Ok(k)
    }

    pub fn validate(&self) -> Result<(), GeometryError> {
        let bad = |m: &str| Err(GeometryError::InvalidIntrinsics(m.to_string()));
        if !(self.fx.is_finite() && self.fx > 0.0 && self.fy.is_finite() && self.fy > 0.0) {
            return bad("focal lengths must be positive");
        }
        if !(self.cx >= 0.0 && self.cx < f64::from(self.width)) {
            return bad("cx must lie in [0, width)");
        }
        if !(self.cy >= 0.0 && self.cy < f64::from(self.height)) {
            return bad("cy must lie in [0, height)");
        }
        Ok(())
    }

    pub fn matrix(&self) -> Matrix3<f64> {
        Matrix3::new(self.fx, 0.0, self.cx, 0.0, self.fy, self.cy, 0.0, 0.0, 1.0)
    }

    /// Calibrated homogeneous coordinates `K^-1 (u, v, 1)`.
    pub fn unproject(&self, u: f64, v: f64) -> Vector3<f64> {
        Vector3::new((u - self.cx) / self.fx, (v - self.cy) / self.fy, 1.0)
    }

    /// Pixel of a camera-frame point, `None` when it is behind the camera.
    pub fn project_camera(&self, p: &Vector3<f64>) -> Option<Point2<f64>> {
        if p.z <= MIN_DEPTH {
            return None;
        }
        Some(Point2::new(
            self.fx * p.x / p.z + self.cx,
            self.fy * p.y / p.z + self.cy,
        ))
    }

    pub fn contains(&self, u: f64, v: f64) -> bool {
        u >= 0.0 && v >= 0.0 && u <= f64::from(self.width) - 1.0 && v <= f64::from(self.height) - 1.0
    }

    pub fn pixel_count(&self) -> usize {
        usize::from(self.width) * usize::from(self.height)
    }
}

/// Rigid camera-to-world transform.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Pose {
    pub rotation: Matrix3<f64>,
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
            rotation: Matrix3::identity(),
            translation: Vector3::zeros(),
        }
    }

    /// Checks `R^T R = I` and `det R = 1` within `1e-9`.
    pub fn new(rotation: Matrix3<f64>, translation: Vector3<f64>) -> Result<Self, GeometryError> {
        let dev = (rotation.transpose() * rotation - Matrix3::identity())
            .abs()
            .max()
            .max((rotation.determinant() - 1.0).abs());
        if !dev.is_finite() || dev > 1e-9 || !translation.iter().all(|v| v.is_finite()) {
            return Err(GeometryError::NotARotation(dev));
        }
        Ok(Self {
            rotation,
            translation,
        })
    }

    pub fn from_translation(translation: Vector3<f64>) -> Self {
        Self {
            rotation: Matrix3::identity(),
            translation,
        }
    }

    /// Camera looking from `eye` towards `target`; image y points along
    /// `-up` projected on the image plane.
    pub fn look_at(eye: Vector3<f64>, target: Vector3<f64>, up: Vector3<f64>) -> Self {
        let z = (target - eye).normalize();
        let x = up.cross(&z).normalize() * -1.0;
        let y = z.cross(&x);
        let rotation = Matrix3::from_columns(&[x, y, z]);
        Self {
            rotation: so3::orthonormalize(&rotation),
            translation: eye,
        }
    }

    pub fn world_to_camera(&self, p: &Vector3<f64>) -> Vector3<f64> {
        self.rotation.transpose() * (p - self.translation)
    }

    pub fn camera_to_world(&self, p: &Vector3<f64>) -> Vector3<f64> {
        self.rotation * p + self.translation
    }

    pub fn inverse(&self) -> Pose {
        Pose {
            rotation: self.rotation.transpose(),
            translation: -(self.rotation.transpose() * self.translation),
        }
    }

    pub fn quaternion(&self) -> [f64; 4] {
        so3::matrix_to_quaternion(&self.rotation)
    }

    pub fn from_quaternion(q: [f64; 4], translation: Vector3<f64>) -> Self {
        Self {
            rotation: so3::quaternion_to_matrix(q),
            translation,
        }
    }
}

/// Projects a world point through `pose` and `k`.
pub fn project(
    point: &Vector3<f64>,
    pose: &Pose,
    k: &CameraIntrinsics,
) -> Result<Point2<f64>, GeometryError> {
    k.project_camera(&pose.world_to_camera(point))
        .ok_or(GeometryError::BehindCamera)
}

/// Inverse of [`project`] for a known camera-frame depth.
pub fn back_project(pixel: &Point2<f64>, depth: f64, k: &CameraIntrinsics) -> Vector3<f64> {
    k.unproject(pixel.x, pixel.y) * depth
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn k() -> CameraIntrinsics {
        CameraIntrinsics::new(1000.0, 1000.0, 640.0, 360.0, 1280, 720).unwrap()
    }

    #[test]
    fn optical_axis_projects_to_principal_point() {
        let p = project(&Vector3::new(0.0, 0.0, 2.0), &Pose::identity(), &k()).unwrap();
        assert_eq!((p.x, p.y), (640.0, 360.0));
    }

    #[test]
    fn lateral_offset() {
        // 1000 * 0.5 / 2 + 640
        let p = project(&Vector3::new(0.5, 0.0, 2.0), &Pose::identity(), &k()).unwrap();
        assert_eq!((p.x, p.y), (890.0, 360.0));
    }

    #[test]
    fn behind_camera() {
        assert_eq!(
            project(&Vector3::new(0.0, 0.0, -1.0), &Pose::identity(), &k()),
            Err(GeometryError::BehindCamera)
        );
        assert!(project(&Vector3::new(0.0, 0.0, 0.0), &Pose::identity(), &k()).is_err());
    }

    #[test]
    fn intrinsics_validation() {
        assert!(CameraIntrinsics::new(0.0, 1.0, 1.0, 1.0, 4, 4).is_err());
        assert!(CameraIntrinsics::new(1.0, 1.0, 4.0, 1.0, 4, 4).is_err());
        assert!(CameraIntrinsics::new(1.0, 1.0, 0.0, 3.9, 4, 4).is_ok());
    }

    #[test]
    fn pose_validation_rejects_scaled_rotation() {
        assert!(Pose::new(Matrix3::identity() * 1.001, Vector3::zeros()).is_err());
        assert!(Pose::new(so3::rotation_exp(&Vector3::new(0.1, 0.2, 0.3)), Vector3::zeros()).is_ok());
    }

    #[test]
    fn look_at_points_optical_axis_at_target() {
        let pose = Pose::look_at(
            Vector3::new(1.0, 2.0, -3.0),
            Vector3::new(0.0, 0.0, 0.0),
            Vector3::new(0.0, -1.0, 0.0),
        );
        let c = pose.world_to_camera(&Vector3::zeros());
        assert!(c.x.abs() < 1e-12 && c.y.abs() < 1e-12 && c.z > 0.0);
        assert!(Pose::new(pose.rotation, pose.translation).is_ok());
    }

    proptest! {
        #[test]
        fn project_back_project_round_trip(
            x in -2.0f64..2.0, y in -2.0f64..2.0, z in 0.5f64..20.0,
            rx in -1.0f64..1.0, ry in -1.0f64..1.0, rz in -1.0f64..1.0,
            tx in -1.0f64..1.0, ty in -1.0f64..1.0, tz in -1.0f64..1.0,
        ) {
            let pose = Pose::new(so3::rotation_exp(&Vector3::new(rx, ry, rz)), Vector3::new(tx, ty, tz)).unwrap();
            let cam = Vector3::new(x, y, z);
            let world = pose.camera_to_world(&cam);
            let px = project(&world, &pose, &k()).unwrap();
            let back = back_project(&px, z, &k());
            prop_assert!((back - cam).norm() <= 1e-9 * cam.norm());
        }
    }
}
