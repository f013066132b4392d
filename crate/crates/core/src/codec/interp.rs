//! Piecewise monotone cubic Hermite interpolation (Fritsch–Carlson).
//!
//! Knot ordinates must be strictly increasing or strictly decreasing; the
//! limited slopes keep every segment monotone, so the interpolant can be
//! inverted segment by segment.

#[derive(Debug, Clone, PartialEq)]
pub struct MonotoneCubic {
    xs: Vec<f64>,
    ys: Vec<f64>,
    slopes: Vec<f64>,
    increasing: bool,
}

impl MonotoneCubic {
    /// Returns `None` unless `xs` is strictly increasing and `ys` strictly
    /// monotone with at least two knots.
    pub fn new(xs: Vec<f64>, ys: Vec<f64>) -> Option<Self> {
        let n = xs.len();
        if n < 2 || ys.len() != n {
            return None;
        }
        if !xs.windows(2).all(|w| w[0] < w[1]) {
            return None;
        }
        let increasing = ys[1] > ys[0];
        let strictly = |w: &[f64]| if increasing { w[1] > w[0] } else { w[1] < w[0] };
        if !ys.windows(2).all(strictly) {
            return None;
        }

        let secants: Vec<f64> = (0..n - 1).map(|k| (ys[k + 1] - ys[k]) / (xs[k + 1] - xs[k])).collect();
        let mut slopes = vec![0.0; n];
        slopes[0] = secants[0];
        slopes[n - 1] = secants[n - 2];
        for k in 1..n - 1 {
            slopes[k] = 0.5 * (secants[k - 1] + secants[k]);
        }
        for k in 0..n - 1 {
            let a = slopes[k] / secants[k];
            let b = slopes[k + 1] / secants[k];
            let s = a * a + b * b;
            if s > 9.0 {
                let tau = 3.0 / s.sqrt();
                slopes[k] = tau * a * secants[k];
                slopes[k + 1] = tau * b * secants[k];
            }
        }
        Some(Self {
            xs,
            ys,
            slopes,
            increasing,
        })
    }

    pub fn is_increasing(&self) -> bool {
        self.increasing
    }

    pub fn domain(&self) -> (f64, f64) {
        (self.xs[0], self.xs[self.xs.len() - 1])
    }

    /// Range as `(min, max)`.
    pub fn range(&self) -> (f64, f64) {
        let (a, b) = (self.ys[0], self.ys[self.ys.len() - 1]);
        (a.min(b), a.max(b))
    }

    fn segment_eval(&self, k: usize, x: f64) -> f64 {
        let h = self.xs[k + 1] - self.xs[k];
        let t = (x - self.xs[k]) / h;
        let t2 = t * t;
        let t3 = t2 * t;
        let h00 = 2.0 * t3 - 3.0 * t2 + 1.0;
        let h10 = t3 - 2.0 * t2 + t;
        let h01 = -2.0 * t3 + 3.0 * t2;
        let h11 = t3 - t2;
        h00 * self.ys[k] + h10 * h * self.slopes[k] + h01 * self.ys[k + 1] + h11 * h * self.slopes[k + 1]
    }

    /// Value at `x`, with `x` clamped to the knot domain.
    pub fn eval(&self, x: f64) -> f64 {
        let (lo, hi) = self.domain();
        let x = x.clamp(lo, hi);
        let k = self.xs.partition_point(|&xi| xi <= x).clamp(1, self.xs.len() - 1) - 1;
        self.segment_eval(k, x)
    }

    /// Abscissa whose value is `y`, with `y` clamped to the range.
    pub fn inverse(&self, y: f64) -> f64 {
        let (lo, hi) = self.range();
        let y = y.clamp(lo, hi);
        let n = self.ys.len();
        let k = if self.increasing {
            self.ys.partition_point(|&yi| yi <= y)
        } else {
            self.ys.partition_point(|&yi| yi >= y)
        }
        .clamp(1, n - 1)
            - 1;
        let (mut a, mut b) = (self.xs[k], self.xs[k + 1]);
        for _ in 0..200 {
            let mid = 0.5 * (a + b);
            let below = if self.increasing {
                self.segment_eval(k, mid) < y
            } else {
                self.segment_eval(k, mid) > y
            };
            if below {
                a = mid;
            } else {
                b = mid;
            }
            if b - a <= f64::EPSILON * b.abs().max(1.0) {
                break;
            }
        }
        0.5 * (a + b)
    }
}
