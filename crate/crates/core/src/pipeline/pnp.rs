//! Camera pose from 2D-3D point correspondences: a linear estimate (plane
//! homography or direct linear transform) refined by Levenberg-Marquardt on
//! the pixel reprojection error.

use nalgebra::{DMatrix, Matrix3, Point2, SMatrix, Vector3, Vector6};
use thiserror::Error;

use crate::camera::{CameraIntrinsics, Pose, MIN_DEPTH};
use crate::so3;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum PnpError {
    #[error("insufficient correspondences: need {needed}, got {found}")]
    Insufficient { needed: usize, found: usize },
    #[error("degenerate configuration: {0}")]
    Degenerate(String),
}

#[derive(Debug, Clone, PartialEq)]
pub struct PnpSolution {
    pub pose: Pose,
    /// Sum of squared pixel residuals after the linear estimate and after
    /// every accepted refinement step.
    pub residual_history: Vec<f64>,
    /// Root-mean-square reprojection error in pixels.
    pub rms_px: f64,
}

const MAX_LM_ITERS: usize = 100;

/// Estimates the camera pose from at least `min_points` correspondences
/// `(world point, pixel)`.
pub fn solve_pnp_points(
    world: &[Vector3<f64>],
    pixels: &[Point2<f64>],
    k: &CameraIntrinsics,
    min_points: usize,
) -> Result<PnpSolution, PnpError> {
    assert_eq!(world.len(), pixels.len(), "one pixel per world point");
    let n = world.len();
    let needed = min_points.max(4);
    if n < needed {
        return Err(PnpError::Insufficient { needed, found: n });
    }
    let bearings: Vec<Vector3<f64>> = pixels.iter().map(|p| k.unproject(p.x, p.y)).collect();

    let centroid = world.iter().sum::<Vector3<f64>>() / n as f64;
    let centered = DMatrix::from_fn(n, 3, |i, j| world[i][j] - centroid[j]);
    let svd = centered.svd(false, true);
    let sv = &svd.singular_values;
    let v_t = svd.v_t.expect("requested");
    // nalgebra does not promise sorted singular values
    let mut order = [0usize, 1, 2];
    order.sort_by(|&a, &b| sv[b].total_cmp(&sv[a]));
    let s = [sv[order[0]], sv[order[1]], sv[order[2]]];
    if s[0] == 0.0 || s[1] / s[0] < 1e-9 {
        return Err(PnpError::Degenerate("world points are collinear".into()));
    }
    let axis = |i: usize| Vector3::new(v_t[(order[i], 0)], v_t[(order[i], 1)], v_t[(order[i], 2)]);
    let planar = s[2] / s[0] < 1e-6;

    let mut inits = Vec::new();
    if planar || n < 6 {
        // treat the points as lying on their best-fit plane
        let e1 = axis(0);
        let e2 = axis(1);
        inits.extend(homography_init(world, &bearings, &centroid, &e1, &e2));
    }
    if !planar && n >= 6 {
        inits.extend(dlt_init(world, &bearings));
    }
    let mut best: Option<(f64, Matrix3<f64>, Vector3<f64>)> = None;
    for (r, t) in inits {
        if let Some(c) = cost(world, pixels, k, &r, &t) {
            if best.as_ref().is_none_or(|b| c < b.0) {
                best = Some((c, r, t));
            }
        }
    }
    let (c0, mut r, mut t) =
        best.ok_or_else(|| PnpError::Degenerate("no linear estimate puts the points in front of the camera".into()))?;

    let mut history = vec![c0];
    let mut c = c0;
    let mut lambda = 1e-3;
    for _ in 0..MAX_LM_ITERS {
        let (jtj, jtr) = normal_equations(world, pixels, k, &r, &t);
        let mut improved = false;
        while lambda < 1e12 {
            let mut a = jtj;
            for i in 0..6 {
                a[(i, i)] += lambda * jtj[(i, i)].max(1e-12);
            }
            let Some(delta) = a.cholesky().map(|ch| ch.solve(&(-jtr))) else {
                lambda *= 10.0;
                continue;
            };
            let r_new = so3::orthonormalize(&(so3::rotation_exp(&delta.fixed_rows::<3>(0).into_owned()) * r));
            let t_new = t + delta.fixed_rows::<3>(3);
            match cost(world, pixels, k, &r_new, &t_new) {
                Some(c_new) if c_new < c => {
                    let rel = (c - c_new) / c.max(f64::MIN_POSITIVE);
                    (r, t, c) = (r_new, t_new, c_new);
                    history.push(c);
                    lambda = (lambda / 10.0).max(1e-12);
                    improved = rel > 1e-15 && delta.norm() > 1e-15;
                    break;
                }
                _ => lambda *= 10.0,
            }
        }
        if !improved {
            break;
        }
    }
    // camera frame -> world frame convention
    let pose = Pose {
        rotation: r.transpose(),
        translation: -(r.transpose() * t),
    };
    Ok(PnpSolution {
        pose,
        rms_px: (c / n as f64).sqrt(),
        residual_history: history,
    })
}

/// Sum of squared pixel residuals for `X_c = R X + t`; `None` when a point
/// falls behind the camera.
fn cost(world: &[Vector3<f64>], pixels: &[Point2<f64>], k: &CameraIntrinsics, r: &Matrix3<f64>, t: &Vector3<f64>) -> Option<f64> {
    let mut c = 0.0;
    for (x, u) in world.iter().zip(pixels) {
        let p = k.project_camera(&(r * x + t))?;
        c += (p - u).norm_squared();
    }
    Some(c)
}

fn normal_equations(
    world: &[Vector3<f64>],
    pixels: &[Point2<f64>],
    k: &CameraIntrinsics,
    r: &Matrix3<f64>,
    t: &Vector3<f64>,
) -> (SMatrix<f64, 6, 6>, Vector6<f64>) {
    let mut jtj = SMatrix::<f64, 6, 6>::zeros();
    let mut jtr = Vector6::zeros();
    for (x, u) in world.iter().zip(pixels) {
        let rx = r * x;
        let xc = rx + t;
        let z = xc.z.max(MIN_DEPTH);
        let proj = Point2::new(k.fx * xc.x / z + k.cx, k.fy * xc.y / z + k.cy);
        let res = proj - u;
        let dpi = SMatrix::<f64, 2, 3>::new(
            k.fx / z, 0.0, -k.fx * xc.x / (z * z),
            0.0, k.fy / z, -k.fy * xc.y / (z * z),
        );
        let mut j = SMatrix::<f64, 2, 6>::zeros();
        j.fixed_view_mut::<2, 3>(0, 0).copy_from(&(dpi * -so3::hat(&rx)));
        j.fixed_view_mut::<2, 3>(0, 3).copy_from(&dpi);
        jtj += j.transpose() * j;
        jtr += j.transpose() * res;
    }
    (jtj, jtr)
}

/// Hartley normalization for 2D points: centroid to the origin, mean
/// distance sqrt(2).
fn normalizer(pts: &[(f64, f64)]) -> Matrix3<f64> {
    let n = pts.len() as f64;
    let (mx, my) = pts.iter().fold((0.0, 0.0), |(a, b), p| (a + p.0 / n, b + p.1 / n));
    let d = pts.iter().map(|p| (p.0 - mx).hypot(p.1 - my)).sum::<f64>() / n;
    let s = if d > 0.0 { std::f64::consts::SQRT_2 / d } else { 1.0 };
    Matrix3::new(s, 0.0, -s * mx, 0.0, s, -s * my, 0.0, 0.0, 1.0)
}

fn null_vector(a: DMatrix<f64>) -> Option<Vec<f64>> {
    // smallest right singular vector via the normal matrix, robust for any
    // row count
    let ata = a.transpose() * &a;
    let eig = ata.symmetric_eigen();
    let (i, _) = eig.eigenvalues.iter().enumerate().min_by(|a, b| a.1.total_cmp(b.1))?;
    Some(eig.eigenvectors.column(i).iter().copied().collect())
}

/// Pose candidates from the homography between the best-fit plane of the
/// world points and the normalized image.
fn homography_init(
    world: &[Vector3<f64>],
    bearings: &[Vector3<f64>],
    c: &Vector3<f64>,
    e1: &Vector3<f64>,
    e2: &Vector3<f64>,
) -> Vec<(Matrix3<f64>, Vector3<f64>)> {
    let e3 = e1.cross(e2);
    let plane: Vec<(f64, f64)> = world.iter().map(|x| ((x - c).dot(e1), (x - c).dot(e2))).collect();
    let image: Vec<(f64, f64)> = bearings.iter().map(|b| (b.x, b.y)).collect();
    let (tp, ti) = (normalizer(&plane), normalizer(&image));
    let n = world.len();
    let mut a = DMatrix::zeros(2 * n, 9);
    for i in 0..n {
        let p = tp * Vector3::new(plane[i].0, plane[i].1, 1.0);
        let q = ti * Vector3::new(image[i].0, image[i].1, 1.0);
        let (u, v) = (q.x / q.z, q.y / q.z);
        for j in 0..3 {
            a[(2 * i, j)] = p[j];
            a[(2 * i, 6 + j)] = -u * p[j];
            a[(2 * i + 1, 3 + j)] = p[j];
            a[(2 * i + 1, 6 + j)] = -v * p[j];
        }
    }
    let Some(h) = null_vector(a) else { return Vec::new() };
    let hn = Matrix3::from_row_slice(&h);
    let Some(ti_inv) = ti.try_inverse() else { return Vec::new() };
    let hm = ti_inv * hn * tp;
    let (h1, h2, h3) = (hm.column(0).into_owned(), hm.column(1).into_owned(), hm.column(2).into_owned());
    let scale = 0.5 * (h1.norm() + h2.norm());
    if scale == 0.0 {
        return Vec::new();
    }
    let mut out = Vec::new();
    for sign in [1.0, -1.0] {
        let l = sign / scale;
        let (r1, r2, tc) = (h1 * l, h2 * l, h3 * l);
        if tc.z <= 0.0 {
            continue;
        }
        let m = so3::orthonormalize(&Matrix3::from_columns(&[r1, r2, r1.cross(&r2)]));
        // m = R [e1 e2 e3]
        let r = m * Matrix3::from_columns(&[*e1, *e2, e3]).transpose();
        let r = so3::orthonormalize(&r);
        out.push((r, tc - r * c));
    }
    out
}

/// Pose from the direct linear transform of the 3x4 projection matrix.
fn dlt_init(world: &[Vector3<f64>], bearings: &[Vector3<f64>]) -> Vec<(Matrix3<f64>, Vector3<f64>)> {
    let n = world.len();
    let mut a = DMatrix::zeros(2 * n, 12);
    for i in 0..n {
        let x = [world[i].x, world[i].y, world[i].z, 1.0];
        let (u, v) = (bearings[i].x, bearings[i].y);
        for j in 0..4 {
            a[(2 * i, j)] = x[j];
            a[(2 * i, 8 + j)] = -u * x[j];
            a[(2 * i + 1, 4 + j)] = x[j];
            a[(2 * i + 1, 8 + j)] = -v * x[j];
        }
    }
    let Some(p) = null_vector(a) else { return Vec::new() };
    let m = Matrix3::new(p[0], p[1], p[2], p[4], p[5], p[6], p[8], p[9], p[10]);
    let tv = Vector3::new(p[3], p[7], p[11]);
    let det = m.determinant();
    if det == 0.0 || !det.is_finite() {
        return Vec::new();
    }
    let s = det.cbrt();
    let r = so3::orthonormalize(&(m / s));
    vec![(r, tv / s)]
}
