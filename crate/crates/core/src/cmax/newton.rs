//! Truncated Newton (Newton-CG) minimization with finite-difference
//! Hessian-vector products and a backtracking line search.

pub(crate) struct Settings {
    pub max_iters: usize,
    pub step_tol: f64,
    /// Output change per unit parameter change; sets the finite-difference
    /// step so each probe moves events by about `PROBE_PX`.
    pub fd_scale: f64,
}

pub(crate) struct Outcome {
    pub x: Vec<f64>,
    pub f: f64,
    pub iterations: usize,
}

const PROBE_PX: f64 = 1e-3;
const ARMIJO: f64 = 1e-4;
const MAX_BACKTRACKS: usize = 40;

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

fn axpy(x: &[f64], alpha: f64, d: &[f64]) -> Vec<f64> {
    x.iter().zip(d).map(|(a, b)| a + alpha * b).collect()
}

/// Minimizes `f`, which returns value and gradient. Returns the best point
/// seen; never runs more than `max_iters` outer iterations.
pub(crate) fn minimize(mut f: impl FnMut(&[f64]) -> (f64, Vec<f64>), x0: &[f64], s: &Settings) -> Outcome {
    let n = x0.len();
    let mut x = x0.to_vec();
    let (mut fx, mut g) = f(&x);
    let mut iterations = 0;
    let scale = s.fd_scale.max(1e-12);

    while iterations < s.max_iters {
        let gnorm = norm(&g);
        if gnorm == 0.0 || !gnorm.is_finite() {
            break;
        }
        iterations += 1;

        // inner conjugate gradient on H p = -g
        let mut hess_vec = |d: &[f64]| {
            let eps = PROBE_PX / (norm(d) * scale);
            let (_, gd) = f(&axpy(&x, eps, d));
            gd.iter().zip(&g).map(|(a, b)| (a - b) / eps).collect::<Vec<_>>()
        };
        let tol = gnorm.sqrt().min(0.5) * gnorm;
        let mut p = vec![0.0; n];
        let mut r: Vec<f64> = g.iter().map(|v| -v).collect();
        let mut d = r.clone();
        let mut rr = dot(&r, &r);
        for i in 0..2 * n {
            let hd = hess_vec(&d);
            let curv = dot(&d, &hd);
            if curv <= 0.0 {
                if i == 0 {
                    // no useful curvature: gradient step scaled by |curvature|
                    let a = if curv < 0.0 { rr / -curv } else { 1.0 / scale };
                    p = d.iter().map(|v| v * a).collect();
                }
                break;
            }
            let alpha = rr / curv;
            p = axpy(&p, alpha, &d);
            r = axpy(&r, -alpha, &hd);
            let rr_new = dot(&r, &r);
            if rr_new.sqrt() < tol {
                break;
            }
            d = axpy(&r, rr_new / rr, &d);
            rr = rr_new;
        }
        let mut slope = dot(&g, &p);
        if !(slope < 0.0) {
            p = g.iter().map(|v| -v / (gnorm * scale)).collect();
            slope = dot(&g, &p);
        }

        // backtracking, with expansion while a full step keeps improving
        let mut alpha = 1.0;
        let mut accepted = None;
        for _ in 0..MAX_BACKTRACKS {
            let xt = axpy(&x, alpha, &p);
            let (ft, gt) = f(&xt);
            if ft.is_finite() && ft <= fx + ARMIJO * alpha * slope {
                accepted = Some((alpha, xt, ft, gt));
                break;
            }
            alpha *= 0.5;
        }
        let Some((mut alpha, mut xn, mut fnew, mut gn)) = accepted else {
            break;
        };
        if alpha == 1.0 {
            for _ in 0..10 {
                let xt = axpy(&x, 2.0 * alpha, &p);
                let (ft, gt) = f(&xt);
                if !(ft.is_finite() && ft < fnew) {
                    break;
                }
                (alpha, xn, fnew, gn) = (2.0 * alpha, xt, ft, gt);
            }
        }
        let step = alpha * norm(&p);
        x = xn;
        fx = fnew;
        g = gn;
        if step < s.step_tol {
            break;
        }
    }
    Outcome { x, f: fx, iterations }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn quadratic_in_one_step() {
        let f = |x: &[f64]| {
            let (a, b) = (x[0] - 3.0, x[1] + 1.0);
            (2.0 * a * a + 0.5 * b * b + a * b, vec![4.0 * a + b, b + a])
        };
        let o = minimize(f, &[0.0, 0.0], &Settings { max_iters: 50, step_tol: 1e-10, fd_scale: 1.0 });
        assert!((o.x[0] - 3.0).abs() < 1e-6 && (o.x[1] + 1.0).abs() < 1e-6, "{:?}", o.x);
        assert!(o.iterations <= 4);
    }

    #[test]
    fn rosenbrock() {
        let f = |x: &[f64]| {
            let (a, b) = (x[0], x[1]);
            (
                (1.0 - a).powi(2) + 100.0 * (b - a * a).powi(2),
                vec![-2.0 * (1.0 - a) - 400.0 * a * (b - a * a), 200.0 * (b - a * a)],
            )
        };
        let o = minimize(f, &[-1.2, 1.0], &Settings { max_iters: 200, step_tol: 1e-12, fd_scale: 1.0 });
        assert!((o.x[0] - 1.0).abs() < 1e-4 && (o.x[1] - 1.0).abs() < 1e-4, "{:?}", o.x);
    }

    #[test]
    fn respects_iteration_budget() {
        let f = |x: &[f64]| ((x[0] - 1e6).powi(4), vec![4.0 * (x[0] - 1e6).powi(3)]);
        let o = minimize(f, &[0.0], &Settings { max_iters: 3, step_tol: 0.0, fd_scale: 1.0 });
        assert_eq!(o.iterations, 3);
    }

    #[test]
    fn concave_start_still_descends() {
        // starts at a local maximum of a double well
        let f = |x: &[f64]| ((x[0] * x[0] - 1.0).powi(2), vec![4.0 * x[0] * (x[0] * x[0] - 1.0)]);
        let o = minimize(f, &[1e-3], &Settings { max_iters: 50, step_tol: 1e-12, fd_scale: 1.0 });
        assert!((o.x[0] - 1.0).abs() < 1e-6, "{:?}", o.x);
    }
}
