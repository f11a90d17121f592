//! Periodic nozzle walls and the shear map from the computational rectangle
//! `[0, L] x [0, 1]` onto one period of the physical nozzle.
//!
//! Walls are truncated Fourier series, so periodicity is exact and the first
//! two derivatives are available term by term. The straightening map is the
//! vertical shear `x2 = f1(x1) + eta * (f2(x1) - f1(x1))`; the walls are
//! graphs, so no orthogonalization is needed and the metric terms stay simple.

use thiserror::Error;

use std::f64::consts::TAU;

/// Sampling density used to certify the minimum gap.
const GAP_SAMPLES: usize = 4096;

#[derive(Debug, Error, PartialEq)]
pub enum GeometryError {
    #[error("period must be positive, got {0}")]
    BadPeriod(f64),
    #[error("wall gap is not positive: certified minimum {0}")]
    NonpositiveGap(f64),
    #[error("walls coincide at x1 = 0 (gap {0}); cannot normalize")]
    DegenerateSection(f64),
}

/// One wall as a truncated Fourier series of period `L`:
/// `f(x) = mean + sum_k cos[k-1] cos(k w x) + sin[k-1] sin(k w x)`, `w = 2 pi / L`.
#[derive(Debug, Clone, PartialEq)]
pub struct WallSeries {
    pub mean: f64,
    pub cos: Vec<f64>,
    pub sin: Vec<f64>,
}

impl WallSeries {
    pub fn constant(v: f64) -> Self {
        WallSeries {
            mean: v,
            cos: Vec::new(),
            sin: Vec::new(),
        }
    }

    /// Term-by-term evaluation of the series or one of its first two
    /// derivatives.
    fn eval(&self, omega: f64, x: f64, order: usize) -> f64 {
        assert!(order <= 2, "derivative order must be 0..=2");
        let mut acc = if order == 0 { self.mean } else { 0.0 };
        let n = self.cos.len().max(self.sin.len());
        for k in 1..=n {
            let kw = k as f64 * omega;
            let (s, c) = (kw * x).sin_cos();
            let a = self.cos.get(k - 1).copied().unwrap_or(0.0);
            let b = self.sin.get(k - 1).copied().unwrap_or(0.0);
            acc += match order {
                0 => a * c + b * s,
                1 => kw * (-a * s + b * c),
                _ => kw * kw * (-a * c - b * s),
            };
        }
        acc
    }

    /// Upper bound on the magnitude of the `order`-th derivative from the
    /// coefficient sums.
    fn coeff_bound(&self, omega: f64, order: usize) -> f64 {
        let mut acc = if order == 0 { self.mean.abs() } else { 0.0 };
        let n = self.cos.len().max(self.sin.len());
        for k in 1..=n {
            let kw = (k as f64 * omega).powi(order as i32);
            let a = self.cos.get(k - 1).copied().unwrap_or(0.0).abs();
            let b = self.sin.get(k - 1).copied().unwrap_or(0.0).abs();
            acc += kw * (a + b);
        }
        acc
    }
}

/// Immutable description of one nozzle period with derived bounds.
#[derive(Debug, Clone, PartialEq)]
pub struct NozzleGeometry {
    pub period: f64,
    omega: f64,
    f1: WallSeries,
    f2: WallSeries,
    /// Certified lower bound of `f2 - f1` over one period.
    pub gap_min: f64,
    /// Diagnostic sup bound on `|f_i|, |f_i'|, |f_i''|`.
    pub wall_norm: f64,
    /// Vertical shift and scale applied at load so `f1(0) = 0`, `f2(0) = 1`.
    pub applied_shift: f64,
    pub applied_scale: f64,
}

impl NozzleGeometry {
    /// Build a geometry, normalizing the section at `x1 = 0` to `[0, 1]` by a
    /// vertical shift and scale applied to both walls.
    pub fn new(period: f64, f1: WallSeries, f2: WallSeries) -> Result<Self, GeometryError> {
        if !period.is_finite() || period <= 0.0 {
            return Err(GeometryError::BadPeriod(period));
        }
        let omega = TAU / period;
        let v1 = f1.eval(omega, 0.0, 0);
        let v2 = f2.eval(omega, 0.0, 0);
        let gap0 = v2 - v1;
        if gap0 <= 0.0 {
            return Err(GeometryError::DegenerateSection(gap0));
        }
        let shift = -v1;
        let scale = 1.0 / gap0;
        let rescale = |w: &WallSeries| WallSeries {
            mean: (w.mean + shift) * scale,
            cos: w.cos.iter().map(|c| c * scale).collect(),
            sin: w.sin.iter().map(|s| s * scale).collect(),
        };
        let f1 = rescale(&f1);
        let f2 = rescale(&f2);

        // Certified gap: dense sampling plus a derivative-bound margin for the
        // unsampled gaps between nodes.
        let dgap_bound = f1.coeff_bound(omega, 1) + f2.coeff_bound(omega, 1);
        let dx = period / GAP_SAMPLES as f64;
        let mut gap_sample = f64::INFINITY;
        for k in 0..GAP_SAMPLES {
            let x = k as f64 * dx;
            gap_sample = gap_sample.min(f2.eval(omega, x, 0) - f1.eval(omega, x, 0));
        }
        let gap_min = gap_sample - 0.5 * dgap_bound * dx;
        if gap_min <= 0.0 {
            return Err(GeometryError::NonpositiveGap(gap_min));
        }

        let mut wall_norm: f64 = 0.0;
        for order in 0..=2 {
            wall_norm = wall_norm
                .max(f1.coeff_bound(omega, order))
                .max(f2.coeff_bound(omega, order));
        }

        Ok(NozzleGeometry {
            period,
            omega,
            f1,
            f2,
            gap_min,
            wall_norm,
            applied_shift: shift,
            applied_scale: scale,
        })
    }

    /// Unit-gap flat channel of the given period.
    pub fn flat_channel(period: f64) -> Self {
        NozzleGeometry::new(period, WallSeries::constant(0.0), WallSeries::constant(1.0))
            .expect("flat channel is always admissible")
    }

    /// Evaluate wall `i in {1, 2}` or its derivative (`order in 0..=2`).
    pub fn wall_eval(&self, i: usize, x1: f64, order: usize) -> f64 {
        let wall = match i {
            1 => &self.f1,
            2 => &self.f2,
            _ => panic!("wall index must be 1 or 2"),
        };
        wall.eval(self.omega, x1, order)
    }

    /// Gap `f2 - f1` and its derivatives.
    pub fn gap(&self, x1: f64, order: usize) -> f64 {
        self.wall_eval(2, x1, order) - self.wall_eval(1, x1, order)
    }

    /// Map `(xi, eta)` in `[0, L] x [0, 1]` to physical coordinates plus the
    /// Jacobian `d(x1, x2)/d(xi, eta)` as `[[1, 0], [dx2_dxi, dx2_deta]]`.
    pub fn map_to_physical(&self, xi: f64, eta: f64) -> ((f64, f64), [[f64; 2]; 2]) {
        let f1 = self.wall_eval(1, xi, 0);
        let g = self.gap(xi, 0);
        let df1 = self.wall_eval(1, xi, 1);
        let dg = self.gap(xi, 1);
        let x2 = f1 + eta * g;
        ((xi, x2), [[1.0, 0.0], [df1 + eta * dg, g]])
    }

    /// `d eta / d x1` at `(xi, eta)`, the only nontrivial inverse-map term of
    /// the vertical shear.
    pub fn eta_x1(&self, xi: f64, eta: f64) -> f64 {
        let g = self.gap(xi, 0);
        -(self.wall_eval(1, xi, 1) + eta * self.gap(xi, 1)) / g
    }

    /// Geometry is shifted along `x1`: `f_i^new(x) = f_i(x + dx)`.
    /// Used by the shift-invariance verification.
    pub fn shifted(&self, dx: f64) -> Self {
        let shift_wall = |w: &WallSeries| {
            let n = w.cos.len().max(w.sin.len());
            let mut cos = vec![0.0; n];
            let mut sin = vec![0.0; n];
            for k in 1..=n {
                let a = w.cos.get(k - 1).copied().unwrap_or(0.0);
                let b = w.sin.get(k - 1).copied().unwrap_or(0.0);
                let (s, c) = (k as f64 * self.omega * dx).sin_cos();
                // cos(k(x+dx)) = cos kx cos kdx - sin kx sin kdx, etc.
                cos[k - 1] = a * c + b * s;
                sin[k - 1] = b * c - a * s;
            }
            WallSeries {
                mean: w.mean,
                cos,
                sin,
            }
        };
        // Re-derive bounds but skip the section normalization: the shifted
        // walls generally have f1(0) != 0, which is exactly the point.
        let f1 = shift_wall(&self.f1);
        let f2 = shift_wall(&self.f2);
        NozzleGeometry {
            period: self.period,
            omega: self.omega,
            f1,
            f2,
            gap_min: self.gap_min,
            wall_norm: self.wall_norm,
            applied_shift: 0.0,
            applied_scale: 1.0,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sinusoidal() -> NozzleGeometry {
        // f2 = 1 - 0.1 sin(2 pi x), unit period.
        NozzleGeometry::new(
            1.0,
            WallSeries::constant(0.0),
            WallSeries {
                mean: 1.0,
                cos: vec![],
                sin: vec![-0.1],
            },
        )
        .unwrap()
    }

    #[test]
    fn flat_channel_walls() {
        let geom = NozzleGeometry::flat_channel(1.0);
        for &x in &[0.0, 0.37, 1.0, -2.5] {
            assert_eq!(geom.wall_eval(1, x, 0), 0.0);
            assert_eq!(geom.wall_eval(2, x, 0), 1.0);
        }
        assert!((geom.gap_min - 1.0).abs() < 1e-12);
    }

    #[test]
    fn sinusoidal_wall_reference_values() {
        let geom = sinusoidal();
        assert!((geom.wall_eval(2, 0.25, 0) - 0.9).abs() < 1e-14);
        // d/dx [1 - 0.1 sin(2 pi x)] at 0.25 = -0.2 pi cos(pi/2) = 0.
        assert!(geom.wall_eval(2, 0.25, 1).abs() < 1e-13);
        // Independent series-summation oracle for the derivative: central
        // finite difference of order-0 evaluations.
        for &x in &[0.1, 0.33, 0.71] {
            let h = 1e-6;
            let fd = (geom.wall_eval(2, x + h, 0) - geom.wall_eval(2, x - h, 0)) / (2.0 * h);
            assert!((geom.wall_eval(2, x, 1) - fd).abs() < 1e-8);
            let fd2 = (geom.wall_eval(2, x + h, 1) - geom.wall_eval(2, x - h, 1)) / (2.0 * h);
            assert!((geom.wall_eval(2, x, 2) - fd2).abs() < 1e-7);
        }
    }

    #[test]
    fn walls_periodic_to_machine_precision() {
        let geom = sinusoidal();
        for k in 0..64 {
            let x = k as f64 / 64.0 * geom.period;
            for order in 0..=2 {
                let a = geom.wall_eval(2, x, order);
                let b = geom.wall_eval(2, x + geom.period, order);
                assert!((a - b).abs() <= 1e-12 * a.abs().max(1.0));
            }
        }
    }

    #[test]
    fn map_reference_examples() {
        let flat = NozzleGeometry::flat_channel(1.0);
        let ((x1, x2), jac) = flat.map_to_physical(0.3, 0.7);
        assert_eq!((x1, x2), (0.3, 0.7));
        assert_eq!(jac, [[1.0, 0.0], [0.0, 1.0]]);

        // f1 = 0.1 sin(2 pi xi), f2 = 1 + 0.1 sin(2 pi xi): constant gap 1.
        let geom = NozzleGeometry::new(
            1.0,
            WallSeries {
                mean: 0.0,
                cos: vec![],
                sin: vec![0.1],
            },
            WallSeries {
                mean: 1.0,
                cos: vec![],
                sin: vec![0.1],
            },
        )
        .unwrap();
        let ((_, x2), _) = geom.map_to_physical(0.25, 0.0);
        assert!((x2 - 0.1).abs() < 1e-14);
        // eta = 1 lands on the upper wall.
        for &xi in &[0.0, 0.4, 0.9] {
            let ((_, x2), jac) = geom.map_to_physical(xi, 1.0);
            assert!((x2 - geom.wall_eval(2, xi, 0)).abs() < 1e-14);
            assert!(jac[1][1] >= geom.gap_min);
        }
    }

    #[test]
    fn jacobian_positive_and_period_closure() {
        let geom = sinusoidal();
        for i in 0..128 {
            for j in 0..=16 {
                let xi = i as f64 / 128.0;
                let eta = j as f64 / 16.0;
                let (_, jac) = geom.map_to_physical(xi, eta);
                assert!(jac[1][1] >= geom.gap_min - 1e-12);
                let ((x1a, x2a), _) = geom.map_to_physical(xi, eta);
                let ((x1b, x2b), _) = geom.map_to_physical(xi + geom.period, eta);
                assert!((x1b - x1a - geom.period).abs() < 1e-12);
                assert!((x2b - x2a).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn wall_norm_bounds_the_sampled_walls() {
        let geom = sinusoidal();
        // Coefficient-sum bound dominates any sampled value or derivative.
        for k in 0..256 {
            let x = k as f64 / 256.0;
            for order in 0..=2 {
                assert!(geom.wall_eval(2, x, order).abs() <= geom.wall_norm + 1e-12);
            }
        }
        // 1 + 0.1 (2 pi)^2 for the second derivative of the upper wall.
        let expected = 1.0f64.max(0.1 * (2.0 * std::f64::consts::PI).powi(2));
        assert!((geom.wall_norm - expected).abs() < 1e-12);
    }

    #[test]
    fn normalization_shifts_and_scales() {
        // Walls 0.5 and 2.5 at x=0: shift by -0.5, scale by 1/2.
        let geom = NozzleGeometry::new(
            2.0,
            WallSeries::constant(0.5),
            WallSeries {
                mean: 2.5,
                cos: vec![0.2],
                sin: vec![],
            },
        )
        .unwrap();
        assert!(geom.wall_eval(1, 0.0, 0).abs() < 1e-12);
        assert!((geom.wall_eval(2, 0.0, 0) - 1.0).abs() < 1e-12);
        assert!((geom.applied_shift + 0.5).abs() < 1e-12);
        // gap at 0 was 2.0 + 0.2 = 2.2.
        assert!((geom.applied_scale - 1.0 / 2.2).abs() < 1e-12);
    }

    #[test]
    fn rejects_bad_geometry() {
        assert!(
            NozzleGeometry::new(0.0, WallSeries::constant(0.0), WallSeries::constant(1.0)).is_err()
        );
        // Gap closes: f2 - f1 = 1 - 1.2 sin(2 pi x) dips negative.
        let r = NozzleGeometry::new(
            1.0,
            WallSeries::constant(0.0),
            WallSeries {
                mean: 1.0,
                cos: vec![],
                sin: vec![-1.2],
            },
        );
        assert!(matches!(r, Err(GeometryError::NonpositiveGap(_))));
    }

    #[test]
    fn shifted_geometry_evaluates_shifted_walls() {
        let geom = sinusoidal();
        let shifted = geom.shifted(0.5);
        for k in 0..32 {
            let x = k as f64 / 32.0;
            for order in 0..=2 {
                assert!(
                    (shifted.wall_eval(2, x, order) - geom.wall_eval(2, x + 0.5, order)).abs()
                        < 1e-12
                );
            }
        }
    }
}
