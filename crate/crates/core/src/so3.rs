//! Rotation helpers: exponential map, logarithm, quaternion conversion.
//!
//! Rotations are plain `nalgebra::Matrix3<f64>` values so they compose with the
//! rest of the geometry code without wrapper types.

use nalgebra::{Matrix3, Vector3};

/// Skew-symmetric (hat) matrix of `v`, such that `hat(v) * w == v.cross(&w)`.
pub fn hat(v: &Vector3<f64>) -> Matrix3<f64> {
    Matrix3::new(0.0, -v.z, v.y, v.z, 0.0, -v.x, -v.y, v.x, 0.0)
}

/// Exponential map `exp(phi^)` via the Rodrigues formula.
///
/// Below `1e-8` rad the second-order series is used, which is exact to
/// machine precision there.
pub fn rotation_exp(phi: &Vector3<f64>) -> Matrix3<f64> {
    let theta2 = phi.norm_squared();
    let k = hat(phi);
    if theta2 < 1e-16 {
        return Matrix3::identity() + k + 0.5 * k * k;
    }
    let theta = theta2.sqrt();
    let a = theta.sin() / theta;
    let b = (1.0 - theta.cos()) / theta2;
    Matrix3::identity() + a * k + b * k * k
}

/// Rotation angle in `[0, pi]` recovered from the trace.
pub fn rotation_angle(r: &Matrix3<f64>) -> f64 {
    ((r.trace() - 1.0) * 0.5).clamp(-1.0, 1.0).acos()
}

/// Logarithm of a rotation matrix, returned as a rotation vector.
pub fn rotation_log(r: &Matrix3<f64>) -> Vector3<f64> {
    let q = matrix_to_quaternion(r);
    let (v, w) = (Vector3::new(q[0], q[1], q[2]), q[3]);
    let sin_half = v.norm();
    if sin_half < 1e-12 {
        return 2.0 * v / w;
    }
    let angle = 2.0 * sin_half.atan2(w);
    v * (angle / sin_half)
}

/// Projects a near-rotation matrix onto SO(3) (closest in Frobenius norm).
pub fn orthonormalize(m: &Matrix3<f64>) -> Matrix3<f64> {
    let svd = m.svd(true, true);
    let (u, v_t) = (svd.u.unwrap(), svd.v_t.unwrap());
    let mut d = Matrix3::identity();
    if (u * v_t).determinant() < 0.0 {
        d[(2, 2)] = -1.0;
    }
    u * d * v_t
}

/// Unit quaternion `[qx, qy, qz, qw]` (Hamilton, scalar last) with `qw >= 0`.
pub fn matrix_to_quaternion(r: &Matrix3<f64>) -> [f64; 4] {
    let trace = r.trace();
    let (x, y, z, w);
    if trace > 0.0 {
        let s = (trace + 1.0).sqrt() * 2.0;
        w = 0.25 * s;
        x = (r[(2, 1)] - r[(1, 2)]) / s;
        y = (r[(0, 2)] - r[(2, 0)]) / s;
        z = (r[(1, 0)] - r[(0, 1)]) / s;
    } else if r[(0, 0)] > r[(1, 1)] && r[(0, 0)] > r[(2, 2)] {
        let s = (1.0 + r[(0, 0)] - r[(1, 1)] - r[(2, 2)]).sqrt() * 2.0;
        w = (r[(2, 1)] - r[(1, 2)]) / s;
        x = 0.25 * s;
        y = (r[(0, 1)] + r[(1, 0)]) / s;
        z = (r[(0, 2)] + r[(2, 0)]) / s;
    } else if r[(1, 1)] > r[(2, 2)] {
        let s = (1.0 + r[(1, 1)] - r[(0, 0)] - r[(2, 2)]).sqrt() * 2.0;
        w = (r[(0, 2)] - r[(2, 0)]) / s;
        x = (r[(0, 1)] + r[(1, 0)]) / s;
        y = 0.25 * s;
        z = (r[(1, 2)] + r[(2, 1)]) / s;
    } else {
        let s = (1.0 + r[(2, 2)] - r[(0, 0)] - r[(1, 1)]).sqrt() * 2.0;
        w = (r[(1, 0)] - r[(0, 1)]) / s;
        x = (r[(0, 2)] + r[(2, 0)]) / s;
        y = (r[(1, 2)] + r[(2, 1)]) / s;
        z = 0.25 * s;
    }
    let n = (x * x + y * y + z * z + w * w).sqrt();
    let sign = if w < 0.0 { -1.0 } else { 1.0 };
    [sign * x / n, sign * y / n, sign * z / n, sign * w / n]
}

/// Rotation matrix of a quaternion `[qx, qy, qz, qw]`; the input is normalized first.
pub fn quaternion_to_matrix(q: [f64; 4]) -> Matrix3<f64> {
    let n = (q[0] * q[0] + q[1] * q[1] + q[2] * q[2] + q[3] * q[3]).sqrt();
    let (x, y, z, w) = (q[0] / n, q[1] / n, q[2] / n, q[3] / n);
    Matrix3::new(
        1.0 - 2.0 * (y * y + z * z),
        2.0 * (x * y - z * w),
        2.0 * (x * z + y * w),
        2.0 * (x * y + z * w),
        1.0 - 2.0 * (x * x + z * z),
        2.0 * (y * z - x * w),
        2.0 * (x * z - y * w),
        2.0 * (y * z + x * w),
        1.0 - 2.0 * (x * x + y * y),
    )
}

/// Left Jacobian of SO(3): `exp(phi + d) ~ exp(J_l(phi) d) exp(phi)` for
/// small `d`.
pub fn left_jacobian(phi: &Vector3<f64>) -> Matrix3<f64> {
    let theta2 = phi.norm_squared();
    let k = hat(phi);
    if theta2 < 1e-10 {
        return Matrix3::identity() + 0.5 * k + k * k / 6.0;
    }
    let theta = theta2.sqrt();
    let a = (1.0 - theta.cos()) / theta2;
    let b = (theta - theta.sin()) / (theta2 * theta);
    Matrix3::identity() + a * k + b * k * k
}

/// Spherical linear interpolation between two rotations, `s` in `[0, 1]`.
pub fn slerp(a: &Matrix3<f64>, b: &Matrix3<f64>, s: f64) -> Matrix3<f64> {
    let delta = rotation_log(&(a.transpose() * b));
    a * rotation_exp(&(delta * s))
}
