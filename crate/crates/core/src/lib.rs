//! Steady subsonic isentropic Euler flow through periodic 2-D nozzles.
//!
//! The continuity equation admits a stream function `psi` with
//! `d psi / d x2 = rho u`, `d psi / d x1 = -rho v`, and the Bernoulli
//! function is constant along streamlines, so the whole Euler system for
//! subsonic flow collapses to one quasilinear elliptic equation for `psi` on
//! one nozzle period. This crate provides:
//!
//! * [`gas`] — equation-of-state algebra and the subsonic density branch,
//! * [`geometry`] — Fourier-series walls and the straightening map,
//! * [`bernoulli`] — inflow profiles, the stream-value map `kappa`, and the
//!   extended Bernoulli function,
//! * [`grid`], [`linsys`], [`solver`] — the discretized elliptic problem and
//!   its Picard/conjugate-gradient solver,
//! * [`euler`] — the potential baseline, the inflow-trace fixed point, and
//!   full flow reconstruction,
//! * [`critical`] — Mach-vs-mass-flux sweeps and critical-flux bracketing,
//! * [`diagnostics`] — post-hoc verification of conservation, Bernoulli
//!   transport, the vorticity identity, and qualitative properties.

#![allow(clippy::needless_range_loop)] // index loops read better in stencil math

pub mod bernoulli;
pub mod critical;
pub mod diagnostics;
pub mod euler;
pub mod gas;
pub mod geometry;
pub mod grid;
pub mod interp;
pub mod linsys;
pub mod solver;
pub mod stencil;

pub use bernoulli::{build_kappa, BernoulliProfile, InflowProfile, Kappa, ProfileError};
pub use critical::{find_critical, sweep, CriticalBracket, CriticalOpts, SweepRecord};
pub use diagnostics::{estimate_order, verify_solution, VerificationReport};
pub use euler::{
    apply_t, inflow_trace, reconstruct_flow, solve_euler, solve_potential, EulerOpts,
    EulerSolution, FlowState, InitialProfile, PotentialSolution, TContext,
};
pub use gas::{CriticalState, GasError, GasModel};
pub use geometry::{GeometryError, NozzleGeometry, WallSeries};
pub use grid::Grid;
pub use interp::MonotoneCubic;
pub use solver::{
    picard_solve, picard_solve_from, PicardOpts, SolveError, StreamField, TruncationParams,
};
