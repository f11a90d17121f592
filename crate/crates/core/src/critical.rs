//! Mach-vs-mass-flux sweeps and the critical mass flux.
//!
//! The truncated solver cannot represent a sonic state, so "sonic" is
//! operationalized through the ellipticity margin: a solve whose margin
//! enters the truncation band (or which fails to converge) marks its flux as
//! supercritical. Bisection between the largest clean subsonic flux and the
//! smallest flagged one brackets the critical value; the truncation width is
//! shrunk along with the bracket so the flag threshold converges to the sonic
//! line itself.

use rayon::prelude::*;

use crate::bernoulli::BernoulliProfile;
use crate::euler::reconstruct_flow;
use crate::gas::GasModel;
use crate::geometry::NozzleGeometry;
use crate::grid::Grid;
use crate::solver::{picard_solve, PicardOpts, SolveError, TruncationParams};

/// One row of a mass-flux sweep.
#[derive(Debug, Clone, Copy)]
pub struct SweepRecord {
    pub m: f64,
    pub max_mach: f64,
    /// `max(|grad psi|^2 - Sigma^2)` of the solve.
    pub margin: f64,
    pub converged: bool,
    pub near_sonic: bool,
}

#[derive(Debug, Clone)]
pub struct CriticalOpts {
    /// Mach target `1 - delta` the stored sequence is driven toward.
    pub mach_delta: f64,
    /// Relative bracket width at termination.
    pub bracket_tol: f64,
    pub theta0_frac: f64,
    /// Starting flux for the lower bound; default `0.1 Sigma(b_bar) gap_min`.
    pub m_start: Option<f64>,
    pub max_probes: usize,
    pub picard: PicardOpts,
}

impl Default for CriticalOpts {
    fn default() -> Self {
        CriticalOpts {
            mach_delta: 0.02,
            bracket_tol: 1e-3,
            theta0_frac: 0.5,
            m_start: None,
            max_probes: 200,
            picard: PicardOpts::default(),
        }
    }
}

/// Bracket for the critical mass flux plus the subsonic solution sequence
/// accumulated on the way (increasing `m`, increasing max Mach).
#[derive(Debug, Clone)]
pub struct CriticalBracket {
    pub m_lo: f64,
    pub m_hi: f64,
    pub records: Vec<SweepRecord>,
}

impl CriticalBracket {
    /// Midpoint estimate of the critical flux.
    pub fn estimate(&self) -> f64 {
        0.5 * (self.m_lo + self.m_hi)
    }

    pub fn relative_width(&self) -> f64 {
        (self.m_hi - self.m_lo) / self.m_hi
    }
}

/// One potential solve at flux `m` under the given truncation, reduced to a
/// sweep record. Solver failures are recorded, not propagated.
fn probe(
    grid: &Grid,
    gas: &GasModel,
    b_bar: f64,
    m: f64,
    trunc: &TruncationParams,
    opts: &PicardOpts,
) -> SweepRecord {
    if m == 0.0 {
        return SweepRecord {
            m,
            max_mach: 0.0,
            margin: f64::NEG_INFINITY,
            converged: true,
            near_sonic: false,
        };
    }
    let bprof = BernoulliProfile::constant(b_bar, m);
    match picard_solve(grid, gas, &bprof, trunc, m, opts) {
        Ok(stream) => {
            let max_mach = reconstruct_flow(grid, gas, &bprof, trunc, &stream)
                .map(|flow| {
                    flow.mach
                        .iter()
                        .fold(f64::NEG_INFINITY, |acc, v| acc.max(*v))
                })
                .unwrap_or(f64::NAN);
            SweepRecord {
                m,
                max_mach,
                margin: stream.margin,
                converged: true,
                near_sonic: stream.near_sonic,
            }
        }
        Err(_) => SweepRecord {
            m,
            max_mach: f64::NAN,
            margin: f64::NAN,
            converged: false,
            near_sonic: true,
        },
    }
}

/// Potential solve per flux value; rows are independent and run in parallel.
/// Individual failures land in their row, they are not fatal.
pub fn sweep(
    grid: &Grid,
    gas: &GasModel,
    b_bar: f64,
    m_values: &[f64],
    theta0_frac: f64,
    opts: &PicardOpts,
) -> Result<Vec<SweepRecord>, SolveError> {
    let trunc = TruncationParams::from_bounds(gas, b_bar, b_bar, None, theta0_frac)?;
    Ok(m_values
        .par_iter()
        .map(|&m| probe(grid, gas, b_bar, m, &trunc, opts))
        .collect())
}

/// Bracket the critical mass flux of the potential problem by bisection
/// between a clean subsonic solve and the smallest flagged (or failed) flux.
pub fn find_critical(
    grid: &Grid,
    geom: &NozzleGeometry,
    gas: &GasModel,
    b_bar: f64,
    opts: &CriticalOpts,
) -> Result<CriticalBracket, SolveError> {
    let sigma = gas.sigma(b_bar)?;
    let sigma2 = sigma * sigma;
    let theta_base =
        TruncationParams::from_bounds(gas, b_bar, b_bar, None, opts.theta0_frac)?.theta0;
    // The Mach number climbs like 1 - O(sqrt(Sigma - m)), so both the flag
    // offset (theta/8) and the final bracket must sit well inside
    // bracket_tol for the stored sequence to reach the Mach target.
    let theta_floor = (0.25 * sigma2 * opts.bracket_tol).min(theta_base);

    let m_start = opts.m_start.unwrap_or(0.1 * sigma * geom.gap_min);
    let first = probe(
        grid,
        gas,
        b_bar,
        m_start,
        &TruncationParams::new(theta_base)?,
        &opts.picard,
    );
    if !first.converged || first.near_sonic {
        return Err(SolveError::FluxOutOfRange {
            t: m_start,
            m: m_start,
        });
    }

    let mut records = vec![first];
    let mut m_lo = m_start;
    let mut m_hi = None;
    let mut probes = 1;

    // Grow until a flagged solve bounds the bracket from above.
    let mut m = m_start;
    while m_hi.is_none() && probes < opts.max_probes {
        m *= 1.6;
        let rec = probe(
            grid,
            gas,
            b_bar,
            m,
            &TruncationParams::new(theta_base)?,
            &opts.picard,
        );
        probes += 1;
        if rec.converged && !rec.near_sonic {
            m_lo = m;
            records.push(rec);
        } else {
            m_hi = Some(m);
        }
    }
    let mut m_hi = m_hi.ok_or(SolveError::BadTruncation(theta_base))?;
    // Truncation under which the current upper bound was flagged.
    let mut theta_hi = theta_base;

    // Bisect; the truncation shrinks with the bracket so the near-sonic flag
    // tracks the sonic line, and the stored Mach sequence climbs toward
    // 1 - mach_delta. When the truncation has shrunk well below the one that
    // flagged the upper bound, that bound is stale (the flag threshold moved
    // past it): re-probe it and, if clean, step the bracket upward until a
    // solve flags again.
    while probes < opts.max_probes {
        let rel_width = (m_hi - m_lo) / m_hi;
        let best_mach = records
            .last()
            .map(|r| r.max_mach)
            .unwrap_or(f64::NEG_INFINITY);
        if rel_width <= opts.bracket_tol && best_mach >= 1.0 - opts.mach_delta {
            break;
        }
        if rel_width <= opts.bracket_tol / 16.0 {
            // Width exhausted; the Mach target cannot improve further.
            break;
        }
        let theta = (8.0 * rel_width * sigma2).clamp(theta_floor, theta_base);
        let trunc = TruncationParams::new(theta)?;

        if theta < 0.5 * theta_hi {
            let rec = probe(grid, gas, b_bar, m_hi, &trunc, &opts.picard);
            probes += 1;
            if !(rec.converged && !rec.near_sonic) {
                theta_hi = theta;
                continue;
            }
            // Upper bound clean under the refined truncation: grow until a
            // solve flags, so the bracket invariant holds again.
            m_lo = m_hi;
            records.push(rec);
            let mut step = 4.0 * rel_width.max(opts.bracket_tol / 16.0);
            loop {
                if probes >= opts.max_probes {
                    m_hi = m_lo * (1.0 + step);
                    break;
                }
                let cand = m_lo * (1.0 + step);
                let rec = probe(grid, gas, b_bar, cand, &trunc, &opts.picard);
                probes += 1;
                if rec.converged && !rec.near_sonic {
                    m_lo = cand;
                    records.push(rec);
                    step *= 2.0;
                } else {
                    m_hi = cand;
                    theta_hi = theta;
                    break;
                }
            }
            continue;
        }

        let mid = 0.5 * (m_lo + m_hi);
        let rec = probe(grid, gas, b_bar, mid, &trunc, &opts.picard);
        probes += 1;
        if rec.converged && !rec.near_sonic {
            m_lo = mid;
            records.push(rec);
        } else {
            m_hi = mid;
            theta_hi = theta;
        }
    }

    Ok(CriticalBracket {
        m_lo,
        m_hi,
        records,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn gas() -> GasModel {
        GasModel::polytropic(2.0, 0.5).unwrap()
    }

    #[test]
    fn sweep_flat_channel_matches_one_d_oracle() {
        let geom = NozzleGeometry::flat_channel(1.0);
        let grid = Grid::new(&geom, 12, 16).unwrap();
        let ms = [0.2, 0.5, 0.8];
        let recs = sweep(&grid, &gas(), 1.5, &ms, 0.5, &PicardOpts::default()).unwrap();
        let mut prev = f64::NEG_INFINITY;
        for (rec, &m) in recs.iter().zip(&ms) {
            assert!(rec.converged && !rec.near_sonic);
            // 1-D closed form: q = m, rho = H(m^2, 1.5).
            let rho = gas().subsonic_density(m * m, 1.5).unwrap();
            let mach = (m / rho) / gas().sound_speed(rho);
            assert!(
                (rec.max_mach - mach).abs() < 1e-9,
                "mach {} vs oracle {mach}",
                rec.max_mach
            );
            assert!(rec.max_mach > prev);
            prev = rec.max_mach;
        }
    }

    #[test]
    fn sweep_zero_flux_is_rest_state() {
        let geom = NozzleGeometry::flat_channel(1.0);
        let grid = Grid::new(&geom, 12, 16).unwrap();
        let recs = sweep(&grid, &gas(), 1.5, &[0.0], 0.5, &PicardOpts::default()).unwrap();
        assert_eq!(recs[0].max_mach, 0.0);
        assert!(recs[0].converged);
    }

    #[test]
    fn rejects_supersonic_starting_flux() {
        // No subsonic solve at the initial lower bound is a configuration
        // error, not a bracket.
        let geom = NozzleGeometry::flat_channel(1.0);
        let grid = Grid::new(&geom, 8, 12).unwrap();
        let opts = CriticalOpts {
            m_start: Some(1.5), // beyond Sigma(1.5) = 1
            ..CriticalOpts::default()
        };
        assert!(find_critical(&grid, &geom, &gas(), 1.5, &opts).is_err());
    }

    #[test]
    fn critical_flux_flat_channel_closed_form() {
        // m_hat = Sigma(1.5) = 1 for the unit-gap flat channel.
        let geom = NozzleGeometry::flat_channel(1.0);
        let grid = Grid::new(&geom, 8, 12).unwrap();
        let bracket = find_critical(&grid, &geom, &gas(), 1.5, &CriticalOpts::default()).unwrap();
        assert!(bracket.relative_width() <= 1e-3);
        assert!(
            (bracket.estimate() - 1.0).abs() <= 1e-3,
            "estimate {} for Sigma = 1",
            bracket.estimate()
        );
        // Stored sequence is strictly increasing in Mach and approaches 1.
        let machs: Vec<f64> = bracket.records.iter().map(|r| r.max_mach).collect();
        for w in machs.windows(2) {
            assert!(w[1] > w[0] - 1e-10);
        }
        assert!(*machs.last().unwrap() >= 0.98);
    }
}
