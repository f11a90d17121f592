//! Equation-of-state algebra: enthalpy, sound speed, critical states, and the
//! subsonic branch of Bernoulli's law with its partial derivatives.
//!
//! Two gas families are supported. For a polytropic gas `p = A rho^gamma`
//! (`gamma > 1`) the enthalpy is normalized by `h(0) = 0`; for an isothermal
//! gas `p = c^2 rho` it is normalized by `h(1) = 0`, which makes the enthalpy
//! unbounded below.

use thiserror::Error;

/// Relative residual demanded of the density inversion.
pub const BERNOULLI_RESIDUAL_TOL: f64 = 1e-13;

/// When `Sigma^2(s) - M` falls below this fraction of `Sigma^2(s)` the
/// two Bernoulli branches have merged to rounding level and the critical
/// density is returned directly.
const SONIC_MERGE_REL: f64 = 1e-10;

#[derive(Debug, Error, PartialEq)]
pub enum GasError {
    #[error("density must be positive, got {0}")]
    NonpositiveDensity(f64),
    #[error("Bernoulli value {s} is not above the enthalpy lower bound {h0}")]
    BernoulliBelowEnthalpyBound { s: f64, h0: f64 },
    #[error("momentum flux {m_flux2} exceeds the sonic bound {sigma2}; truncate before inverting")]
    SupersonicBranch { m_flux2: f64, sigma2: f64 },
    #[error("momentum flux must be nonnegative, got {0}")]
    NegativeMomentumFlux(f64),
    #[error("partials are undefined at the sonic boundary (H^2 c^2 - M = {0:.3e})")]
    SonicBoundaryPartials(f64),
    #[error("polytropic exponent must exceed 1, got {0}")]
    BadGamma(f64),
    #[error("pressure scale must be positive, got {0}")]
    BadPressureScale(f64),
    #[error("sound speed must be positive, got {0}")]
    BadSoundSpeed(f64),
}

/// Isentropic equation of state.
///
/// Immutable; all methods are pure and safe to call concurrently.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum GasModel {
    /// `p = A rho^gamma`, `gamma > 1`, `A > 0`. Enthalpy normalized by `h(0) = 0`.
    Polytropic { gamma: f64, a: f64 },
    /// `p = c^2 rho` with constant sound speed `c > 0`. Enthalpy normalized by
    /// `h(1) = 0` and unbounded below.
    Isothermal { c: f64 },
}

/// Sonic ladder at a fixed Bernoulli value `s`: the stagnation (maximum)
/// density, the critical density and speed where the flow meets the sound
/// speed, and the critical momentum flux `Sigma = rho_crit * speed_crit`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CriticalState {
    pub s: f64,
    pub rho_max: f64,
    pub rho_crit: f64,
    pub speed_crit: f64,
    pub sigma: f64,
}

impl GasModel {
    pub fn polytropic(gamma: f64, a: f64) -> Result<Self, GasError> {
        if gamma.is_nan() || gamma <= 1.0 {
            return Err(GasError::BadGamma(gamma));
        }
        if a.is_nan() || a <= 0.0 {
            return Err(GasError::BadPressureScale(a));
        }
        Ok(GasModel::Polytropic { gamma, a })
    }

    pub fn isothermal(c: f64) -> Result<Self, GasError> {
        if c.is_nan() || c <= 0.0 {
            return Err(GasError::BadSoundSpeed(c));
        }
        Ok(GasModel::Isothermal { c })
    }

    pub fn pressure(&self, rho: f64) -> f64 {
        match *self {
            GasModel::Polytropic { gamma, a } => a * rho.powf(gamma),
            GasModel::Isothermal { c } => c * c * rho,
        }
    }

    /// `p'(rho)`, the square of the sound speed.
    pub fn dp_drho(&self, rho: f64) -> f64 {
        match *self {
            GasModel::Polytropic { gamma, a } => a * gamma * rho.powf(gamma - 1.0),
            GasModel::Isothermal { c } => c * c,
        }
    }

    pub fn sound_speed(&self, rho: f64) -> f64 {
        self.dp_drho(rho).sqrt()
    }

    /// Specific enthalpy, the antiderivative of `p'(rho)/rho` with the
    /// declared normalization.
    pub fn enthalpy(&self, rho: f64) -> Result<f64, GasError> {
        if rho.is_nan() || rho <= 0.0 {
            return Err(GasError::NonpositiveDensity(rho));
        }
        Ok(match *self {
            GasModel::Polytropic { gamma, a } => a * gamma / (gamma - 1.0) * rho.powf(gamma - 1.0),
            GasModel::Isothermal { c } => c * c * rho.ln(),
        })
    }

    /// Lower bound of the enthalpy range; `None` encodes "unbounded below"
    /// (isothermal gas).
    pub fn enthalpy_lower_bound(&self) -> Option<f64> {
        match *self {
            GasModel::Polytropic { .. } => Some(0.0),
            GasModel::Isothermal { .. } => None,
        }
    }

    /// True when `s` lies above the enthalpy lower bound, so that the
    /// critical ladder at `s` exists.
    pub fn admissible_bernoulli(&self, s: f64) -> bool {
        match self.enthalpy_lower_bound() {
            Some(h0) => s > h0,
            None => s.is_finite(),
        }
    }

    fn check_bernoulli(&self, s: f64) -> Result<(), GasError> {
        if !self.admissible_bernoulli(s) {
            return Err(GasError::BernoulliBelowEnthalpyBound {
                s,
                h0: self.enthalpy_lower_bound().unwrap_or(f64::NEG_INFINITY),
            });
        }
        Ok(())
    }

    /// Stagnation density, critical density/speed and critical momentum flux
    /// at Bernoulli value `s`.
    ///
    /// Closed forms: the defining relations `h(rho_max) = s`,
    /// `h(rho_crit) + p'(rho_crit)/2 = s`, `speed_crit^2 = p'(rho_crit)` are
    /// explicitly invertible for both gas families.
    pub fn critical_state(&self, s: f64) -> Result<CriticalState, GasError> {
        self.check_bernoulli(s)?;
        let (rho_max, rho_crit, speed_crit) = match *self {
            GasModel::Polytropic { gamma, a } => {
                let k = a * gamma / (gamma - 1.0);
                let rho_max = (s / k).powf(1.0 / (gamma - 1.0));
                // h + p'/2 = k rho^{g-1} (1 + (g-1)/2) / ... solved directly:
                let rho_crit = (2.0 * (gamma - 1.0) * s / (a * gamma * (gamma + 1.0)))
                    .powf(1.0 / (gamma - 1.0));
                let speed_crit = self.dp_drho(rho_crit).sqrt();
                (rho_max, rho_crit, speed_crit)
            }
            GasModel::Isothermal { c } => {
                let rho_max = (s / (c * c)).exp();
                let rho_crit = (s / (c * c) - 0.5).exp();
                (rho_max, rho_crit, c)
            }
        };
        let h_crit = self.enthalpy(rho_crit)?;
        let sigma = rho_crit * (2.0 * (s - h_crit)).sqrt();
        Ok(CriticalState {
            s,
            rho_max,
            rho_crit,
            speed_crit,
            sigma,
        })
    }

    /// Shorthand for `Sigma(s)`, the critical momentum flux.
    pub fn sigma(&self, s: f64) -> Result<f64, GasError> {
        Ok(self.critical_state(s)?.sigma)
    }

    /// The subsonic branch `H(M, s)`: the unique density in
    /// `[rho_crit(s), rho_max(s)]` with `h(rho) + M/(2 rho^2) = s`.
    ///
    /// `m_flux2` is the squared momentum flux `|grad psi|^2`. Values above
    /// `Sigma^2(s)` are rejected; callers must truncate first.
    pub fn subsonic_density(&self, m_flux2: f64, s: f64) -> Result<f64, GasError> {
        if m_flux2 < 0.0 {
            return Err(GasError::NegativeMomentumFlux(m_flux2));
        }
        let crit = self.critical_state(s)?;
        let sigma2 = crit.sigma * crit.sigma;
        if m_flux2 > sigma2 {
            // Allow rounding-level overshoot at the sonic point itself.
            if m_flux2 - sigma2 <= SONIC_MERGE_REL * sigma2 {
                return Ok(crit.rho_crit);
            }
            return Err(GasError::SupersonicBranch { m_flux2, sigma2 });
        }
        if m_flux2 == 0.0 {
            return Ok(crit.rho_max);
        }
        // Newton degenerates as the branches merge; hand back the sonic state.
        if sigma2 - m_flux2 < SONIC_MERGE_REL * sigma2 {
            return Ok(crit.rho_crit);
        }

        let scale = s.abs().max(1.0);
        let f = |rho: f64| self.enthalpy(rho).unwrap() + m_flux2 / (2.0 * rho * rho) - s;
        // f' = c^2/rho - M/rho^3 > 0 on the subsonic bracket.
        let fp = |rho: f64| self.dp_drho(rho) / rho - m_flux2 / (rho * rho * rho);

        let mut lo = crit.rho_crit;
        let mut hi = crit.rho_max;
        let mut rho = 0.5 * (lo + hi);
        for _ in 0..200 {
            let fv = f(rho);
            if fv.abs() <= BERNOULLI_RESIDUAL_TOL * scale {
                return Ok(rho);
            }
            if fv > 0.0 {
                hi = rho;
            } else {
                lo = rho;
            }
            let step = fv / fp(rho);
            let newton = rho - step;
            rho = if newton > lo && newton < hi {
                newton
            } else {
                0.5 * (lo + hi)
            };
        }
        Ok(rho)
    }

    /// Partial derivatives `(dH/dM, dH/ds)` of the subsonic branch at
    /// `(m_flux2, s)`. Undefined (error) on the sonic boundary where the
    /// denominator `H^2 c^2 - M` vanishes.
    pub fn subsonic_density_partials(&self, m_flux2: f64, s: f64) -> Result<(f64, f64), GasError> {
        let rho = self.subsonic_density(m_flux2, s)?;
        let c2 = self.dp_drho(rho);
        let denom = rho * rho * c2 - m_flux2;
        let sigma2 = {
            let c = self.critical_state(s)?;
            c.sigma * c.sigma
        };
        if denom <= 1e-8 * sigma2 {
            return Err(GasError::SonicBoundaryPartials(denom));
        }
        let dh_dm = rho / (2.0 * (m_flux2 - rho * rho * c2));
        let dh_ds = rho * rho * rho / denom;
        Ok((dh_dm, dh_ds))
    }
}
