//! Bernoulli-as-function-of-stream-value machinery.
//!
//! An inflow momentum profile `W = rho u (0, .)` induces a monotone map
//! `kappa: [0, m] -> [0, 1]` through the cumulative-integral relation
//! `psi = int_0^{kappa(psi)} W`, so the inflow Bernoulli datum `B0(x2)`
//! becomes a function of the stream value, `B(psi) = B0(kappa(psi))`. The
//! solver needs that function on the whole real line, so the derivative is
//! extended by a piecewise-linear ramp that vanishes outside `[-m, 2m]` and
//! keeps the sign structure required by the maximum principle.

use thiserror::Error;

use crate::gas::GasModel;
use crate::interp::MonotoneCubic;

/// Relative tolerance on the integral consistency of an inflow profile.
pub const INTEGRAL_REL_TOL: f64 = 1e-10;

#[derive(Debug, Error, PartialEq)]
pub enum ProfileError {
    #[error("profile integral {integral} deviates from mass flux {mass_flux} beyond tolerance")]
    IntegralMismatch { integral: f64, mass_flux: f64 },
    #[error("profile minimum {min_w} violates the admissibility bound sigma0/2 = {bound}")]
    BelowSigmaBound { min_w: f64, bound: f64 },
    #[error("inflow datum derivative at x2 = 0 must be >= 0, got {0}")]
    EndpointSignLower(f64),
    #[error("inflow datum derivative at x2 = 1 must be <= 0, got {0}")]
    EndpointSignUpper(f64),
    #[error("extended Bernoulli minimum {b_min} does not exceed the enthalpy bound {h0}; datum too large for this gas")]
    BelowEnthalpyBound { b_min: f64, h0: f64 },
    #[error("profile deviates from the potential trace by {max_dev}, above sigma0/2 = {bound}")]
    OutsideAdmissibleSet { max_dev: f64, bound: f64 },
}

/// Inflow momentum profile `W` on `[0, 1]` with its mass flux and the
/// admissibility bound inherited from the potential solve.
#[derive(Debug, Clone, PartialEq)]
pub struct InflowProfile {
    w: MonotoneCubic,
    pub mass_flux: f64,
    pub sigma0: f64,
}

impl InflowProfile {
    /// Build from samples on a uniform grid of `[0, 1]`. The interpolant
    /// integral must match `mass_flux` to `1e-10 * m`; use
    /// [`InflowProfile::renormalized`] to project first.
    pub fn new(samples: &[f64], mass_flux: f64, sigma0: f64) -> Result<Self, ProfileError> {
        let w = MonotoneCubic::new(0.0, 1.0, samples);
        let integral = w.total_integral();
        if (integral - mass_flux).abs() > INTEGRAL_REL_TOL * mass_flux.abs().max(1e-300) {
            return Err(ProfileError::IntegralMismatch {
                integral,
                mass_flux,
            });
        }
        let min_w = samples.iter().cloned().fold(f64::INFINITY, f64::min);
        if min_w <= 0.5 * sigma0 {
            return Err(ProfileError::BelowSigmaBound {
                min_w,
                bound: 0.5 * sigma0,
            });
        }
        Ok(InflowProfile {
            w,
            mass_flux,
            sigma0,
        })
    }

    /// Scale the samples so the interpolant integral equals `mass_flux`
    /// exactly, then build. Returns the relative deviation that was removed.
    pub fn renormalized(
        samples: &[f64],
        mass_flux: f64,
        sigma0: f64,
    ) -> Result<(Self, f64), ProfileError> {
        let raw = MonotoneCubic::new(0.0, 1.0, samples);
        let integral = raw.total_integral();
        let factor = mass_flux / integral;
        let scaled: Vec<f64> = samples.iter().map(|v| v * factor).collect();
        let prof = InflowProfile::new(&scaled, mass_flux, sigma0)?;
        Ok((
            prof,
            (integral - mass_flux).abs() / mass_flux.abs().max(1e-300),
        ))
    }

    /// Uniform profile `W = m`.
    pub fn uniform(mass_flux: f64, sigma0: f64, n: usize) -> Self {
        InflowProfile::new(&vec![mass_flux; n.max(2)], mass_flux, sigma0)
            .expect("uniform profile is always consistent")
    }

    pub fn eval(&self, x2: f64) -> f64 {
        self.w.eval(x2)
    }

    pub fn samples(&self) -> &[f64] {
        self.w.values()
    }

    pub fn num_samples(&self) -> usize {
        self.w.num_samples()
    }

    /// Sup deviation from another profile sampled on the same grid.
    pub fn max_deviation_from(&self, other: &[f64]) -> f64 {
        assert_eq!(other.len(), self.w.num_samples());
        self.samples()
            .iter()
            .zip(other)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
    }

    /// Membership test against the admissible set: the profile must stay
    /// within `sigma0 / 2` of the potential inflow trace.
    pub fn check_admissible(&self, potential_trace: &[f64]) -> Result<(), ProfileError> {
        let dev = self.max_deviation_from(potential_trace);
        if dev > 0.5 * self.sigma0 {
            return Err(ProfileError::OutsideAdmissibleSet {
                max_dev: dev,
                bound: 0.5 * self.sigma0,
            });
        }
        Ok(())
    }
}

/// Monotone map `kappa: [0, m] -> [0, 1]` solving the cumulative-integral
/// relation, with its derivative `kappa' = 1 / W(kappa)`.
#[derive(Debug, Clone, PartialEq)]
pub struct Kappa {
    w: MonotoneCubic,
    pub mass_flux: f64,
}

/// Invert the cumulative integral of the profile.
pub fn build_kappa(profile: &InflowProfile) -> Kappa {
    Kappa {
        w: profile.w.clone(),
        mass_flux: profile.mass_flux,
    }
}

impl Kappa {
    pub fn eval(&self, psi: f64) -> f64 {
        self.w.invert_cumulative(psi)
    }

    pub fn deriv(&self, psi: f64) -> f64 {
        1.0 / self.w.eval(self.eval(psi))
    }
}

/// The composed Bernoulli function `B(psi) = B0(kappa(psi))` on `[0, m]`
/// together with its global extension.
#[derive(Debug, Clone, PartialEq)]
pub struct BernoulliProfile {
    datum: Datum,
    pub b_bar: f64,
    pub mass_flux: f64,
    /// `B'(0+)` and `B'(m-)`, the ramp slopes of the extension.
    bp0: f64,
    bpm: f64,
    b_at0: f64,
    b_atm: f64,
    /// Measured `C^{1,1}` distance of the datum from `b_bar`.
    pub eps: f64,
    /// Minimum of the datum over `[0, 1]`.
    pub b_check: f64,
    /// Global minimum of the extension over the real line.
    pub b_min: f64,
}

#[derive(Debug, Clone, PartialEq)]
enum Datum {
    Constant(f64),
    Varying { b0: MonotoneCubic, kappa: Kappa },
}

impl BernoulliProfile {
    /// Constant datum: the irrotational case, `B ext' = 0` everywhere.
    pub fn constant(b_bar: f64, mass_flux: f64) -> Self {
        BernoulliProfile {
            datum: Datum::Constant(b_bar),
            b_bar,
            mass_flux,
            bp0: 0.0,
            bpm: 0.0,
            b_at0: b_bar,
            b_atm: b_bar,
            eps: 0.0,
            b_check: b_bar,
            b_min: b_bar,
        }
    }

    /// Compose the inflow datum with `kappa` and extend the derivative by the
    /// piecewise-linear ramp vanishing outside `[-m, 2m]`.
    ///
    /// Rejects data violating the endpoint sign conditions or dipping to the
    /// enthalpy lower bound of the gas.
    pub fn compose_and_extend(
        b0_samples: &[f64],
        kappa: Kappa,
        mass_flux: f64,
        b_bar: f64,
        gas: &GasModel,
    ) -> Result<Self, ProfileError> {
        let b0 = MonotoneCubic::new(0.0, 1.0, b0_samples);
        let d0 = b0.eval_deriv(0.0);
        let d1 = b0.eval_deriv(1.0);
        let scale = b_bar.abs().max(1.0);
        if d0 < -1e-12 * scale {
            return Err(ProfileError::EndpointSignLower(d0));
        }
        if d1 > 1e-12 * scale {
            return Err(ProfileError::EndpointSignUpper(d1));
        }

        // Chain rule at the endpoints: kappa(0) = 0, kappa(m) = 1.
        let bp0 = d0 * kappa.deriv(0.0);
        let bpm = d1 * kappa.deriv(mass_flux);
        let b_at0 = b0.eval(0.0);
        let b_atm = b0.eval(1.0);

        let b_check = b0_samples.iter().cloned().fold(f64::INFINITY, f64::min);
        // Outside [0, m] the extension ramps monotonically to its plateaus.
        let b_min = b_check
            .min(b_at0 - bp0 * mass_flux / 2.0)
            .min(b_atm + bpm * mass_flux / 2.0);

        if let Some(h0) = gas.enthalpy_lower_bound() {
            if b_min <= h0 {
                return Err(ProfileError::BelowEnthalpyBound { b_min, h0 });
            }
        }

        // eps = max(|B0 - Bbar|, |B0'|, Lip(B0')) measured on the samples.
        let n = b0_samples.len() - 1;
        let h = 1.0 / n as f64;
        let mut eps: f64 = 0.0;
        for (k, &v) in b0_samples.iter().enumerate() {
            eps = eps.max((v - b_bar).abs());
            eps = eps.max(b0.eval_deriv(k as f64 * h).abs());
        }
        for k in 1..n {
            let second = (b0_samples[k + 1] - 2.0 * b0_samples[k] + b0_samples[k - 1]) / (h * h);
            eps = eps.max(second.abs());
        }

        Ok(BernoulliProfile {
            datum: Datum::Varying { b0, kappa },
            b_bar,
            mass_flux,
            bp0,
            bpm,
            b_at0,
            b_atm,
            eps,
            b_check,
            b_min,
        })
    }

    pub fn is_constant(&self) -> bool {
        matches!(self.datum, Datum::Constant(_))
    }

    /// Inflow datum `B0(x2)`.
    pub fn datum_eval(&self, x2: f64) -> f64 {
        match &self.datum {
            Datum::Constant(b) => *b,
            Datum::Varying { b0, .. } => b0.eval(x2),
        }
    }

    /// The extended Bernoulli function on the whole real line.
    pub fn b_ext(&self, s: f64) -> f64 {
        let m = self.mass_flux;
        match &self.datum {
            Datum::Constant(b) => *b,
            Datum::Varying { b0, kappa } => {
                if s < -m {
                    self.b_at0 - self.bp0 * m / 2.0
                } else if s < 0.0 {
                    self.b_at0 + self.bp0 * (0.5 * s * s + m * s) / m
                } else if s <= m {
                    b0.eval(kappa.eval(s))
                } else if s <= 2.0 * m {
                    self.b_atm + self.bpm * (2.0 * m * s - 0.5 * s * s - 1.5 * m * m) / m
                } else {
                    self.b_atm + self.bpm * m / 2.0
                }
            }
        }
    }

    /// Derivative of the extension (the ramp `g tilde`).
    pub fn b_ext_deriv(&self, s: f64) -> f64 {
        let m = self.mass_flux;
        match &self.datum {
            Datum::Constant(_) => 0.0,
            Datum::Varying { b0, kappa } => {
                if s < -m {
                    0.0
                } else if s < 0.0 {
                    self.bp0 * (s + m) / m
                } else if s <= m {
                    let y = kappa.eval(s);
                    b0.eval_deriv(y) / self.w_at(kappa, y)
                } else if s <= 2.0 * m {
                    self.bpm * (2.0 * m - s) / m
                } else {
                    0.0
                }
            }
        }
    }

    fn w_at(&self, kappa: &Kappa, y: f64) -> f64 {
        kappa.w.eval(y)
    }

    /// The composed map `x2 = kappa(psi)` when the datum varies.
    pub fn kappa(&self) -> Option<&Kappa> {
        match &self.datum {
            Datum::Constant(_) => None,
            Datum::Varying { kappa, .. } => Some(kappa),
        }
    }
}
