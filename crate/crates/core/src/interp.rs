//! Shape-preserving cubic interpolation on a uniform grid.
//!
//! Fritsch–Carlson slope limiting keeps the interpolant within the local data
//! bounds and monotone wherever the data is monotone, which is what both the
//! inflow momentum profile and the Bernoulli datum need: values never
//! undershoot sampled bounds, and the cumulative integral of a positive
//! profile is strictly increasing.

/// Monotone (shape-preserving) C^1 cubic interpolant of samples on a uniform
/// grid over `[x0, x end]`.
#[derive(Debug, Clone, PartialEq)]
pub struct MonotoneCubic {
    x0: f64,
    h: f64,
    values: Vec<f64>,
    slopes: Vec<f64>,
    /// Cumulative integral of the interpolant at the nodes, `cum[0] = 0`.
    cum: Vec<f64>,
}

impl MonotoneCubic {
    /// Build from `values` sampled uniformly on `[x0, x1]`. Needs at least
    /// two samples.
    pub fn new(x0: f64, x1: f64, values: &[f64]) -> Self {
        assert!(values.len() >= 2, "need at least two samples");
        assert!(x1 > x0);
        let n = values.len() - 1;
        let h = (x1 - x0) / n as f64;
        let d: Vec<f64> = (0..n).map(|k| (values[k + 1] - values[k]) / h).collect();

        let mut slopes = vec![0.0; n + 1];
        // Interior: Fritsch-Carlson harmonic mean, zero at local extrema.
        for k in 1..n {
            if d[k - 1] * d[k] > 0.0 {
                slopes[k] = 2.0 * d[k - 1] * d[k] / (d[k - 1] + d[k]);
            }
        }
        // Endpoints: three-point estimate, clipped to preserve shape.
        slopes[0] = endpoint_slope(d[0], if n > 1 { d[1] } else { d[0] });
        slopes[n] = endpoint_slope(d[n - 1], if n > 1 { d[n - 2] } else { d[n - 1] });

        let mut cum = vec![0.0; n + 1];
        for k in 0..n {
            cum[k + 1] =
                cum[k] + segment_integral(values[k], values[k + 1], slopes[k], slopes[k + 1], h);
        }
        MonotoneCubic {
            x0,
            h,
            values: values.to_vec(),
            slopes,
            cum,
        }
    }

    pub fn num_samples(&self) -> usize {
        self.values.len()
    }

    pub fn x_min(&self) -> f64 {
        self.x0
    }

    pub fn x_max(&self) -> f64 {
        self.x0 + self.h * (self.values.len() - 1) as f64
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    fn locate(&self, x: f64) -> (usize, f64) {
        let n = self.values.len() - 1;
        let t = (x - self.x0) / self.h;
        let k = (t.floor() as isize).clamp(0, n as isize - 1) as usize;
        (k, t - k as f64)
    }

    /// Interpolant value; clamped extrapolation outside the sample range is
    /// the continuation of the boundary cubic.
    pub fn eval(&self, x: f64) -> f64 {
        let (k, t) = self.locate(x);
        hermite(
            self.values[k],
            self.values[k + 1],
            self.slopes[k] * self.h,
            self.slopes[k + 1] * self.h,
            t,
        )
    }

    /// First derivative of the interpolant.
    pub fn eval_deriv(&self, x: f64) -> f64 {
        let (k, t) = self.locate(x);
        hermite_deriv(
            self.values[k],
            self.values[k + 1],
            self.slopes[k] * self.h,
            self.slopes[k + 1] * self.h,
            t,
        ) / self.h
    }

    /// Exact integral of the interpolant from `x_min` to `x`.
    pub fn integral_to(&self, x: f64) -> f64 {
        let (k, t) = self.locate(x);
        let partial = segment_integral_partial(
            self.values[k],
            self.values[k + 1],
            self.slopes[k],
            self.slopes[k + 1],
            self.h,
            t,
        );
        self.cum[k] + partial
    }

    /// Total integral over the sample range.
    pub fn total_integral(&self) -> f64 {
        *self.cum.last().unwrap()
    }

    /// Cumulative integral at the sample nodes.
    pub fn cumulative(&self) -> &[f64] {
        &self.cum
    }

    /// Solve `integral_to(x) = target` for `x` assuming the interpolant is
    /// strictly positive (so the cumulative is strictly increasing).
    /// Bisection on the node table narrows to one segment, Newton polishes.
    pub fn invert_cumulative(&self, target: f64) -> f64 {
        let n = self.values.len() - 1;
        let total = self.total_integral();
        let t = target.clamp(0.0, total);
        // Binary search for the segment.
        let k = match self.cum.binary_search_by(|c| c.partial_cmp(&t).unwrap()) {
            Ok(k) => k.min(n - 1),
            Err(k) => k.saturating_sub(1).min(n - 1),
        };
        let x_lo = self.x0 + self.h * k as f64;
        let x_hi = x_lo + self.h;
        let (mut lo, mut hi) = (x_lo, x_hi);
        let mut x = 0.5 * (lo + hi);
        for _ in 0..100 {
            let f = self.integral_to(x) - t;
            if f.abs() <= 1e-15 * total.abs().max(1.0) {
                break;
            }
            if f > 0.0 {
                hi = x;
            } else {
                lo = x;
            }
            let w = self.eval(x);
            let newton = x - f / w;
            x = if w > 0.0 && newton > lo && newton < hi {
                newton
            } else {
                0.5 * (lo + hi)
            };
        }
        x
    }
}

fn endpoint_slope(d_adj: f64, d_next: f64) -> f64 {
    // Non-centered three-point formula with Fritsch-Carlson clipping.
    let s = 1.5 * d_adj - 0.5 * d_next;
    if s * d_adj <= 0.0 {
        0.0
    } else if s.abs() > 3.0 * d_adj.abs() {
        3.0 * d_adj
    } else {
        s
    }
}

/// Cubic Hermite basis on the unit interval; `m0`, `m1` are slopes scaled by
/// the segment width.
fn hermite(v0: f64, v1: f64, m0: f64, m1: f64, t: f64) -> f64 {
    let t2 = t * t;
    let t3 = t2 * t;
    v0 * (2.0 * t3 - 3.0 * t2 + 1.0)
        + m0 * (t3 - 2.0 * t2 + t)
        + v1 * (-2.0 * t3 + 3.0 * t2)
        + m1 * (t3 - t2)
}

fn hermite_deriv(v0: f64, v1: f64, m0: f64, m1: f64, t: f64) -> f64 {
    let t2 = t * t;
    v0 * (6.0 * t2 - 6.0 * t)
        + m0 * (3.0 * t2 - 4.0 * t + 1.0)
        + v1 * (-6.0 * t2 + 6.0 * t)
        + m1 * (3.0 * t2 - 2.0 * t)
}

/// Exact integral of one Hermite segment over its full width `h`.
fn segment_integral(v0: f64, v1: f64, s0: f64, s1: f64, h: f64) -> f64 {
    h * (v0 + v1) / 2.0 + h * h * (s0 - s1) / 12.0
}

/// Exact integral of one Hermite segment from local 0 to local `t in [0,1]`.
fn segment_integral_partial(v0: f64, v1: f64, s0: f64, s1: f64, h: f64, t: f64) -> f64 {
    let m0 = s0 * h;
    let m1 = s1 * h;
    let t2 = t * t;
    let t3 = t2 * t;
    let t4 = t3 * t;
    // Antiderivatives of the Hermite basis polynomials.
    let iv0 = 0.5 * t4 - t3 + t;
    let im0 = 0.25 * t4 - (2.0 / 3.0) * t3 + 0.5 * t2;
    let iv1 = -0.5 * t4 + t3;
    let im1 = 0.25 * t4 - t3 / 3.0;
    h * (v0 * iv0 + m0 * im0 + v1 * iv1 + m1 * im1)
}
