//! The potential-flow baseline, the inflow-trace map `T`, and its fixed
//! point: the full rotational Euler flow.
//!
//! `T` sends an inflow momentum profile `W` to the inflow trace
//! `d psi / d x2 (0, .)` of the stream-function solve built from `W`. The
//! potential solve fixes the admissibility bounds (`sigma0`, `sigma1`) and
//! provides the starting profile; damped iteration of `T` closes the
//! Bernoulli-stream coupling.

use ndarray::Array2;

use crate::bernoulli::{build_kappa, BernoulliProfile, InflowProfile};
use crate::gas::GasModel;
use crate::grid::Grid;
use crate::interp::MonotoneCubic;
use crate::solver::{picard_solve, PicardOpts, SolveError, StreamField, TruncationParams};
use crate::stencil;

/// Reconstructed physical fields plus the scalar diagnostics read off them.
#[derive(Debug, Clone)]
pub struct FlowState {
    pub rho: Array2<f64>,
    pub u: Array2<f64>,
    pub v: Array2<f64>,
    pub mach: Array2<f64>,
    /// Discrete mass flux through every grid column.
    pub mass_flux_by_section: Vec<f64>,
    /// `max(u^2 + v^2 - c^2)` over the nodes.
    pub subsonic_margin: f64,
    pub min_u: f64,
}

/// Potential (irrotational) baseline with its admissibility bounds.
#[derive(Debug, Clone)]
pub struct PotentialSolution {
    pub stream: StreamField,
    pub flow: FlowState,
    /// `min d psi / d x2` over the nodes (positive on accepted solves).
    pub sigma0: f64,
    /// `max |grad psi|` over the nodes.
    pub sigma1: f64,
    /// Inflow trace `d psi / d x2 (0, .)` on the eta nodes.
    pub trace: Vec<f64>,
}

/// Converged Euler flow: the fixed point of `T` and everything derived.
#[derive(Debug, Clone)]
pub struct EulerSolution {
    pub stream: StreamField,
    pub profile: InflowProfile,
    pub bprofile: BernoulliProfile,
    pub flow: FlowState,
    pub potential: PotentialSolution,
    pub t_iterations: usize,
    /// `sup |W - T(W)|` at acceptance.
    pub t_residual: f64,
    /// Largest relative integral defect removed when renormalizing extracted
    /// traces (a discrete-conservation log of the coupling).
    pub trace_renorm_deviation: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum InitialProfile {
    /// Start from the potential inflow trace (the default).
    PotentialTrace,
    /// Start from the uniform profile `W = m`.
    Uniform,
}

#[derive(Debug, Clone)]
pub struct EulerOpts {
    /// Sup-norm tolerance on `W - T(W)`.
    pub fp_tol: f64,
    pub max_iter: usize,
    /// Damping of the profile update; `None` selects 1.0 for small datum
    /// variation and 0.5 otherwise.
    pub damping: Option<f64>,
    pub initial: InitialProfile,
    /// Fraction of the admissible truncation bound used for `theta0`.
    pub theta0_frac: f64,
    pub picard: PicardOpts,
}

impl Default for EulerOpts {
    fn default() -> Self {
        EulerOpts {
            fp_tol: 1e-8,
            max_iter: 50,
            damping: None,
            initial: InitialProfile::PotentialTrace,
            theta0_frac: 0.5,
            picard: PicardOpts::default(),
        }
    }
}

/// Inflow trace `d psi / d x2` along the column `xi = 0`, fourth order in
/// `eta` (one-sided stencils at the walls).
pub fn inflow_trace(grid: &Grid, psi: &Array2<f64>) -> Vec<f64> {
    let col: Vec<f64> = (0..=grid.ny).map(|j| psi[[0, j]]).collect();
    let d = stencil::deriv_column_order4(&col, grid.h_eta);
    d.into_iter().map(|v| v / grid.gap[0]).collect()
}

/// Reconstruct `(rho, u, v)` and the derived diagnostics from a stream field.
///
/// The density is inverted from the solver-family gradient, so it coincides
/// with the converged coefficient field; the velocities use the diagnostics
/// stencil family (centered second order inside, one-sided fourth order at
/// the walls). Keeping the two families separate makes the Bernoulli
/// composition check a genuine cross-stencil consistency measurement instead
/// of an algebraic identity. The nodal momentum `rho u` is exactly the
/// diagnostics-family `d psi / d x2`, so integrating it per column with the
/// compatible quadrature telescopes to `t` with no discretization error.
pub fn reconstruct_flow(
    grid: &Grid,
    gas: &GasModel,
    bprof: &BernoulliProfile,
    trunc: &TruncationParams,
    stream: &StreamField,
) -> Result<FlowState, SolveError> {
    let (nx, ny) = (grid.nx, grid.ny);
    let psi = &stream.psi;

    // Solver-family gradient for the density inversion.
    let (sdx1, sdx2) = grid.physical_gradient(psi);

    // d psi / d eta per column with the diagnostics family.
    let mut dpsi_eta = Array2::zeros((nx, ny + 1));
    for i in 0..nx {
        let col: Vec<f64> = (0..=ny).map(|j| psi[[i, j]]).collect();
        let d = stencil::deriv_column(&col, grid.h_eta);
        for j in 0..=ny {
            dpsi_eta[[i, j]] = d[j];
        }
    }

    let mut rho = Array2::zeros((nx, ny + 1));
    let mut u = Array2::zeros((nx, ny + 1));
    let mut v = Array2::zeros((nx, ny + 1));
    let mut mach = Array2::zeros((nx, ny + 1));
    let mut subsonic_margin = f64::NEG_INFINITY;
    let mut min_u = f64::INFINITY;

    for i in 0..nx {
        let ip = (i + 1) % nx;
        let im = (i + nx - 1) % nx;
        let g = grid.gap[i];
        for j in 0..=ny {
            let q2_solver = sdx1[[i, j]] * sdx1[[i, j]] + sdx2[[i, j]] * sdx2[[i, j]];
            let s = bprof.b_ext(psi[[i, j]]);
            let sigma = gas.sigma(s)?;
            let mt = trunc.truncate_speed(q2_solver, sigma * sigma);
            let r = gas.subsonic_density(mt, s)?;

            let psi_xi = (psi[[ip, j]] - psi[[im, j]]) / (2.0 * grid.h_xi);
            let dx1 = psi_xi + grid.shear[[i, j]] * dpsi_eta[[i, j]];
            let dx2 = dpsi_eta[[i, j]] / g;
            let uu = dx2 / r;
            let vv = -dx1 / r;
            let c2 = gas.dp_drho(r);
            rho[[i, j]] = r;
            u[[i, j]] = uu;
            v[[i, j]] = vv;
            mach[[i, j]] = (uu * uu + vv * vv).sqrt() / c2.sqrt();
            subsonic_margin = subsonic_margin.max(uu * uu + vv * vv - c2);
            min_u = min_u.min(uu);
        }
    }

    // Per-column mass flux. The compatible quadrature needs at least 11 eta
    // nodes; tiny grids fall back to the trapezoid rule.
    let weights = if ny >= 10 {
        stencil::compatible_weights(ny + 1, grid.h_eta)
    } else {
        stencil::trapezoid_weights(ny + 1, grid.h_eta)
    };
    let mut mass_flux_by_section = vec![0.0; nx];
    for i in 0..nx {
        let g = grid.gap[i];
        let mut acc = 0.0;
        for j in 0..=ny {
            acc += weights[j] * rho[[i, j]] * u[[i, j]] * g;
        }
        mass_flux_by_section[i] = acc;
    }

    Ok(FlowState {
        rho,
        u,
        v,
        mach,
        mass_flux_by_section,
        subsonic_margin,
        min_u,
    })
}

/// Potential flow at constant Bernoulli value `b_bar` and mass flux `m`.
///
/// Returns the baseline solve plus `sigma0 = min d2 psi` and
/// `sigma1 = max |grad psi|`, the bounds every rotational solve is measured
/// against.
pub fn solve_potential(
    grid: &Grid,
    gas: &GasModel,
    b_bar: f64,
    m: f64,
    theta0_frac: f64,
    opts: &PicardOpts,
) -> Result<PotentialSolution, SolveError> {
    if m == 0.0 {
        return Err(SolveError::FluxOutOfRange { t: 0.0, m });
    }
    let bprof = BernoulliProfile::constant(b_bar, m);
    // Before sigma1 exists only the first truncation bound applies.
    let trunc = TruncationParams::from_bounds(gas, b_bar, b_bar, None, theta0_frac)?;
    let stream = picard_solve(grid, gas, &bprof, &trunc, m, opts)?;
    let flow = reconstruct_flow(grid, gas, &bprof, &trunc, &stream)?;

    let (nx, ny) = (grid.nx, grid.ny);
    let mut sigma0 = f64::INFINITY;
    let mut sigma1: f64 = 0.0;
    for i in 0..nx {
        for j in 0..=ny {
            let rho_u = flow.rho[[i, j]] * flow.u[[i, j]];
            let rho_v = flow.rho[[i, j]] * flow.v[[i, j]];
            sigma0 = sigma0.min(rho_u);
            sigma1 = sigma1.max((rho_u * rho_u + rho_v * rho_v).sqrt());
        }
    }
    let trace = inflow_trace(grid, &stream.psi);
    Ok(PotentialSolution {
        stream,
        flow,
        sigma0,
        sigma1,
        trace,
    })
}

/// Everything one application of `T` needs besides the profile itself.
pub struct TContext<'a> {
    pub grid: &'a Grid,
    pub gas: &'a GasModel,
    pub b0_samples: &'a [f64],
    pub b_bar: f64,
    pub potential: &'a PotentialSolution,
    pub trunc: TruncationParams,
    pub picard: PicardOpts,
}

/// Result of one application of `T`.
pub struct TStep {
    pub profile: InflowProfile,
    pub stream: StreamField,
    pub bprofile: BernoulliProfile,
    /// Relative integral deviation removed by the renormalization of the
    /// extracted trace (discrete-flux defect of the solve).
    pub renorm_deviation: f64,
}

/// One application of the map `T`: build `kappa` and the extended Bernoulli
/// function from `W`, solve the stream equation at `t = m`, extract and
/// renormalize the inflow trace. `warm` seeds the inner solve (the previous
/// iterate's field).
///
/// Returns the new profile together with the solve and the composed Bernoulli
/// profile that produced it.
pub fn apply_t(
    ctx: &TContext,
    w: &InflowProfile,
    warm: Option<&Array2<f64>>,
) -> Result<TStep, SolveError> {
    w.check_admissible(&ctx.potential.trace)?;
    let kappa = build_kappa(w);
    let bprof = BernoulliProfile::compose_and_extend(
        ctx.b0_samples,
        kappa,
        w.mass_flux,
        ctx.b_bar,
        ctx.gas,
    )?;
    let stream = crate::solver::picard_solve_from(
        ctx.grid,
        ctx.gas,
        &bprof,
        &ctx.trunc,
        w.mass_flux,
        &ctx.picard,
        warm,
    )?;
    let raw = inflow_trace(ctx.grid, &stream.psi);
    let (tw, renorm_deviation) = InflowProfile::renormalized(&raw, w.mass_flux, w.sigma0)?;
    tw.check_admissible(&ctx.potential.trace)?;
    Ok(TStep {
        profile: tw,
        stream,
        bprofile: bprof,
        renorm_deviation,
    })
}

/// Damped fixed-point iteration of `T` from the potential baseline.
pub fn solve_euler(
    grid: &Grid,
    gas: &GasModel,
    b0_samples: &[f64],
    m: f64,
    opts: &EulerOpts,
) -> Result<EulerSolution, SolveError> {
    let b0 = MonotoneCubic::new(0.0, 1.0, b0_samples);
    let b_bar = b0.total_integral();
    let b_check = b0_samples.iter().cloned().fold(f64::INFINITY, f64::min);

    let potential = solve_potential(grid, gas, b_bar, m, opts.theta0_frac, &opts.picard)?;
    let trunc = TruncationParams::from_bounds(
        gas,
        b_check,
        b_bar,
        Some(potential.sigma1),
        opts.theta0_frac,
    )?;

    let start = match opts.initial {
        InitialProfile::PotentialTrace => potential.trace.clone(),
        InitialProfile::Uniform => vec![m; potential.trace.len()],
    };
    let (mut w, _) = InflowProfile::renormalized(&start, m, potential.sigma0)?;

    let ctx = TContext {
        grid,
        gas,
        b0_samples,
        b_bar,
        potential: &potential,
        trunc,
        picard: opts.picard,
    };
    let mut warm: Option<Array2<f64>> = None;
    let mut history = Vec::new();
    let mut max_renorm: f64 = 0.0;
    for it in 1..=opts.max_iter {
        let step = match apply_t(&ctx, &w, warm.as_ref()) {
            Ok(step) => step,
            // Losing admissibility mid-iteration aborts with the last valid
            // iterate attached.
            Err(SolveError::Profile(source)) if it > 1 => {
                return Err(SolveError::AdmissibilityLost {
                    iterations: it,
                    source,
                    last_profile: Box::new(w),
                });
            }
            Err(e) => return Err(e),
        };
        let TStep {
            profile: tw,
            stream,
            bprofile: bprof,
            renorm_deviation,
        } = step;
        max_renorm = max_renorm.max(renorm_deviation);
        let residual = tw.max_deviation_from(w.samples());
        history.push(residual);
        if residual <= opts.fp_tol {
            let flow = reconstruct_flow(grid, gas, &bprof, &trunc, &stream)?;
            return Ok(EulerSolution {
                stream,
                profile: tw,
                bprofile: bprof,
                flow,
                potential: ctx.potential.clone(),
                t_iterations: it,
                t_residual: residual,
                trace_renorm_deviation: max_renorm,
            });
        }
        warm = Some(stream.psi);
        let lambda = opts
            .damping
            .unwrap_or(if bprof.eps < 1e-3 { 1.0 } else { 0.5 });
        let blended: Vec<f64> = w
            .samples()
            .iter()
            .zip(tw.samples())
            .map(|(a, b)| (1.0 - lambda) * a + lambda * b)
            .collect();
        let (next, _) = InflowProfile::renormalized(&blended, m, potential.sigma0)?;
        w = next;
    }
    Err(SolveError::PicardStalled {
        iterations: opts.max_iter,
        residual: history.last().copied().unwrap_or(f64::NAN),
        history,
    })
}
