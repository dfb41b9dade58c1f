use nalgebra::{Point2, Vector2};

/// Image of warped events: every event adds a unit-mass Gaussian blob at
/// its warped position.
#[derive(Debug, Clone, PartialEq)]
pub struct Iwe {
    pub width: u16,
    pub height: u16,
    pub epsilon_px: f64,
    pub(crate) values: Vec<f64>,
}

impl Iwe {
    pub fn get(&self, x: u16, y: u16) -> f64 {
        self.values[usize::from(y) * usize::from(self.width) + usize::from(x)]
    }

    /// Row-major pixel values.
    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn total(&self) -> f64 {
        self.values.iter().sum()
    }
}

/// Accumulates warped positions into an IWE.
///
/// Each blob is a Gaussian of width `epsilon_px` over the pixels within
/// `truncation_px` of the position, faded to zero across the outermost pixel
/// of that disk so the image varies smoothly with the positions, and scaled
/// to unit mass over the whole disk. Blobs fully inside the frame therefore
/// add exactly 1; blobs straddling the border add only their in-frame part.
pub fn build_iwe(positions: &[Point2<f64>], width: u16, height: u16, epsilon_px: f64, truncation_px: u32) -> Iwe {
    let kernel = Kernel::new(epsilon_px, truncation_px);
    let mut values = vec![0.0; usize::from(width) * usize::from(height)];
    let mut taps = Vec::new();
    for mu in positions {
        let z = kernel.taps(mu, width, height, &mut taps).0;
        for t in &taps {
            if let Some(i) = t.idx {
                values[i] += t.w / z;
            }
        }
    }
    Iwe {
        width,
        height,
        epsilon_px,
        values,
    }
}

/// Variance of the pixel values.
pub fn contrast(iwe: &Iwe) -> f64 {
    let n = iwe.values.len() as f64;
    if n == 0.0 {
        return 0.0;
    }
    let mean = iwe.total() / n;
    iwe.values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n
}

#[derive(Debug, Clone, Copy)]
pub(crate) struct Tap {
    /// Row-major pixel index, `None` outside the frame.
    pub idx: Option<usize>,
    pub w: f64,
    /// Gradient of `w` with respect to the blob center.
    pub grad: Vector2<f64>,
}

#[derive(Debug, Clone, Copy)]
pub(crate) struct Kernel {
    inv_var: f64,
    radius: f64,
    fade_start: f64,
}

impl Kernel {
    pub fn new(epsilon_px: f64, truncation_px: u32) -> Self {
        let radius = f64::from(truncation_px);
        Self {
            inv_var: 1.0 / (epsilon_px * epsilon_px),
            radius,
            fade_start: (radius - 1.0).max(0.0),
        }
    }

    /// Weight at distance `d` and `(dw/dd) / d`.
    fn profile(&self, d: f64) -> (f64, f64) {
        let g = (-0.5 * d * d * self.inv_var).exp();
        // Gaussian part: g' / d = -g / sigma^2
        let mut w = g;
        let mut q = -g * self.inv_var;
        if d > self.fade_start {
            let s = (d - self.fade_start).min(1.0);
            let fade = 1.0 - s * s * s * (s * (6.0 * s - 15.0) + 10.0);
            let dfade = -30.0 * s * s * (s - 1.0) * (s - 1.0);
            w = g * fade;
            q = q * fade + g * dfade / d;
        }
        (w, q)
    }

    /// Fills `out` with the disk pixels around `mu` and returns the total
    /// weight over the disk (in and out of frame) and its gradient.
    pub fn taps(&self, mu: &Point2<f64>, width: u16, height: u16, out: &mut Vec<Tap>) -> (f64, Vector2<f64>) {
        out.clear();
        let r = self.radius;
        let (w, h) = (f64::from(width), f64::from(height));
        if !(mu.x > -r - 1.0 && mu.y > -r - 1.0 && mu.x < w + r && mu.y < h + r) {
            // nothing reaches the frame; mass is irrelevant
            return (1.0, Vector2::zeros());
        }
        let mut z = 0.0;
        let mut gz = Vector2::zeros();
        for iy in (mu.y - r).ceil() as i64..=(mu.y + r).floor() as i64 {
            for ix in (mu.x - r).ceil() as i64..=(mu.x + r).floor() as i64 {
                let delta = Vector2::new(mu.x - ix as f64, mu.y - iy as f64);
                let d = delta.norm();
                if d >= r {
                    continue;
                }
                let (wt, q) = self.profile(d);
                let grad = delta * q;
                z += wt;
                gz += grad;
                let inside = ix >= 0 && iy >= 0 && ix < i64::from(width) && iy < i64::from(height);
                let idx = inside.then(|| iy as usize * usize::from(width) + ix as usize);
                out.push(Tap { idx, w: wt, grad });
            }
        }
        (z, gz)
    }
}
