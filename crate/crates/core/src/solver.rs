//! Nonlinear elliptic stream-function solver on one nozzle period.
//!
//! The equation `div((1/rho) grad psi) = rho B'(psi)` with `rho` the subsonic
//! density of the truncated momentum flux is solved by Picard iteration with
//! under-relaxation: coefficients frozen from the previous iterate, one
//! symmetric linear solve per sweep.
//!
//! The linear operator is assembled in energy form with vertex quadrature:
//! every cell corner contributes its local tensor `K = K_geo / rho` applied to
//! the one-sided edge gradients. The resulting stencil is symmetric positive
//! definite with exactly zero row sums in the gradient part, which gives an
//! exact discrete flux-telescoping identity: summing the equations over any
//! strip of nodes balances the cut-edge fluxes against the volume integral of
//! the right-hand side to solver precision.

use ndarray::Array2;
use thiserror::Error;

use crate::bernoulli::{BernoulliProfile, ProfileError};
use crate::gas::{GasError, GasModel};
use crate::grid::Grid;
use crate::linsys::{LinearStats, Stencil9, OFFSETS};

#[derive(Debug, Error)]
pub enum SolveError {
    #[error(transparent)]
    Gas(#[from] GasError),
    #[error(transparent)]
    Profile(#[from] ProfileError),
    #[error("grid too coarse: {nx} x {ny} (need at least 8 x 8)")]
    GridTooCoarse { nx: usize, ny: usize },
    #[error("linear solver breakdown after {iterations} iterations, residual {residual:.3e}")]
    LinearBreakdown { iterations: usize, residual: f64 },
    #[error("outer iteration did not converge: {iterations} iterations, residual {residual:.3e}")]
    PicardStalled {
        iterations: usize,
        residual: f64,
        history: Vec<f64>,
    },
    #[error("boundary flux value t = {t} outside [0, m = {m}]")]
    FluxOutOfRange { t: f64, m: f64 },
    #[error("truncation margin is not positive: theta0 bound {0:.3e}")]
    BadTruncation(f64),
}

/// Sonic truncation: a smooth monotone clamp applied to
/// `|grad psi|^2 - Sigma^2` keeping the density inversion strictly on the
/// subsonic branch.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TruncationParams {
    pub theta0: f64,
}

impl TruncationParams {
    pub fn new(theta0: f64) -> Result<Self, SolveError> {
        if !theta0.is_finite() || theta0 <= 0.0 {
            return Err(SolveError::BadTruncation(theta0));
        }
        Ok(TruncationParams { theta0 })
    }

    /// Choose `theta0` as a fraction of its admissible upper bound
    /// `min(Sigma^2(B_check)/2, Sigma^2(B_bar) - sigma1^2)`.
    ///
    /// `sigma1` is the potential-flow speed bound; before the potential solve
    /// exists, pass `None` and only the first term applies. The second term is
    /// deflated by 10% because the discrete `sigma1` underestimates the sup.
    pub fn from_bounds(
        gas: &GasModel,
        b_check: f64,
        b_bar: f64,
        sigma1: Option<f64>,
        frac: f64,
    ) -> Result<Self, SolveError> {
        let sig_check = gas.sigma(b_check)?;
        let mut bound = 0.5 * sig_check * sig_check;
        if let Some(s1) = sigma1 {
            let sig_bar = gas.sigma(b_bar)?;
            bound = bound.min(0.9 * (sig_bar * sig_bar - s1 * s1));
        }
        TruncationParams::new(frac * bound)
    }

    /// Width of the smoothing band of the clamp.
    pub fn zeta_width(&self) -> f64 {
        self.theta0 / 8.0
    }

    /// The clamp itself: identity below `-theta0/4`, plateau `-theta0/8`
    /// above, monotone cubic blend between.
    pub fn zeta(&self, s: f64) -> f64 {
        let lo = -self.theta0 / 4.0;
        let hi = -self.theta0 / 8.0;
        if s < lo {
            s
        } else if s >= hi {
            hi
        } else {
            // Hermite blend with slopes 1 and 0 at the band ends.
            let w = hi - lo;
            let t = (s - lo) / w;
            let t2 = t * t;
            let t3 = t2 * t;
            lo * (2.0 * t3 - 3.0 * t2 + 1.0) + w * (t3 - 2.0 * t2 + t) + hi * (-2.0 * t3 + 3.0 * t2)
        }
    }

    /// Truncated momentum-flux argument: `zeta(q2 - sigma2) + sigma2`, always
    /// at least `theta0/8` below the sonic value `sigma2`. Exact identity in
    /// the untruncated region (no `-sigma2 + sigma2` rounding round trip).
    pub fn truncate_speed(&self, q2: f64, sigma2: f64) -> f64 {
        let s = q2 - sigma2;
        if s < -self.theta0 / 4.0 {
            q2
        } else {
            self.zeta(s) + sigma2
        }
    }
}

/// Discrete stream function with solve metadata.
#[derive(Debug, Clone)]
pub struct StreamField {
    pub psi: Array2<f64>,
    /// Top-wall Dirichlet value (the mass-flux parameter).
    pub t: f64,
    pub iterations: usize,
    /// Final nonlinear residual (RMS of the pointwise equation residual).
    pub residual: f64,
    /// `max over nodes of |grad psi|^2 - Sigma^2(B(psi))`.
    pub margin: f64,
    pub near_sonic: bool,
    pub theta0: f64,
}

#[derive(Debug, Clone, Copy)]
pub struct PicardOpts {
    pub tol: f64,
    pub max_iter: usize,
    pub relax: f64,
    pub lin_rel_tol: f64,
    pub lin_max_iter: usize,
}

impl Default for PicardOpts {
    fn default() -> Self {
        PicardOpts {
            tol: 1e-10,
            max_iter: 500,
            relax: 0.7,
            lin_rel_tol: 1e-12,
            lin_max_iter: 200_000,
        }
    }
}

/// Assemble the stiffness operator for `div((1/rho) grad psi)` and the load
/// vector for the source `S` (right-hand side of the divergence form).
pub fn assemble(grid: &Grid, rho: &Array2<f64>, source: &Array2<f64>) -> (Stencil9, Array2<f64>) {
    let (nx, ny) = (grid.nx, grid.ny);
    let (hx, he) = (grid.h_xi, grid.h_eta);
    let w = 0.25 * hx * he;
    let mut a = Stencil9::zeros(nx, ny);

    // Local corner layout within a cell: (di, dj) of the corner, plus its
    // u-edge (horizontal) and v-edge (vertical) endpoints in local coords.
    type Local = (usize, usize);
    const CORNERS: [(Local, [Local; 2], [Local; 2]); 4] = [
        ((0, 0), [(0, 0), (1, 0)], [(0, 0), (0, 1)]),
        ((1, 0), [(0, 0), (1, 0)], [(1, 0), (1, 1)]),
        ((0, 1), [(0, 1), (1, 1)], [(0, 0), (0, 1)]),
        ((1, 1), [(0, 1), (1, 1)], [(1, 0), (1, 1)]),
    ];

    for i in 0..nx {
        for j in 0..ny {
            for &(corner, u_edge, v_edge) in &CORNERS {
                let ci = (i + corner.0) % nx;
                let cj = j + corner.1;
                let inv_rho = 1.0 / rho[[ci, cj]];
                let k11 = grid.k_geo11[[ci, cj]] * inv_rho;
                let k12 = grid.k_geo12[[ci, cj]] * inv_rho;
                let k22 = grid.k_geo22[[ci, cj]] * inv_rho;
                let alpha = w * k11 / (hx * hx);
                let beta = w * k12 / (hx * he);
                let gamma = w * k22 / (he * he);

                let pair = |local: (usize, usize)| -> (usize, usize, isize, isize) {
                    // absolute (i, j) plus local offsets for stencil addressing
                    (
                        (i + local.0) % nx,
                        j + local.1,
                        local.0 as isize,
                        local.1 as isize,
                    )
                };
                let (ua_i, ua_j, ua_li, ua_lj) = pair(u_edge[0]);
                let (ub_i, ub_j, ub_li, ub_lj) = pair(u_edge[1]);
                let (va_i, va_j, va_li, va_lj) = pair(v_edge[0]);
                let (vb_i, vb_j, vb_li, vb_lj) = pair(v_edge[1]);

                // K11 (u-edge pair) and K22 (v-edge pair) couplings.
                a.add(ua_i, ua_j, 0, 0, alpha);
                a.add(ub_i, ub_j, 0, 0, alpha);
                a.add(ua_i, ua_j, ub_li - ua_li, ub_lj - ua_lj, -alpha);
                a.add(ub_i, ub_j, ua_li - ub_li, ua_lj - ub_lj, -alpha);

                a.add(va_i, va_j, 0, 0, gamma);
                a.add(vb_i, vb_j, 0, 0, gamma);
                a.add(va_i, va_j, vb_li - va_li, vb_lj - va_lj, -gamma);
                a.add(vb_i, vb_j, va_li - vb_li, va_lj - vb_lj, -gamma);

                // Mixed coupling: beta * (Du_r Dv_s + Dv_r Du_s).
                let u_nodes = [
                    (ua_i, ua_j, ua_li, ua_lj, -1.0),
                    (ub_i, ub_j, ub_li, ub_lj, 1.0),
                ];
                let v_nodes = [
                    (va_i, va_j, va_li, va_lj, -1.0),
                    (vb_i, vb_j, vb_li, vb_lj, 1.0),
                ];
                for &(ri, rj, rli, rlj, du) in &u_nodes {
                    for &(si, sj, sli, slj, dv) in &v_nodes {
                        let c = beta * du * dv;
                        a.add(ri, rj, sli - rli, slj - rlj, c);
                        a.add(si, sj, rli - sli, rlj - slj, c);
                    }
                }
            }
        }
    }

    // Load vector: b_k = -S_k g_i hx he at the free nodes.
    let mut b = Array2::zeros((nx, ny + 1));
    for i in 0..nx {
        for j in 1..ny {
            b[[i, j]] = -source[[i, j]] * grid.gap[i] * hx * he;
        }
    }
    (a, b)
}

/// Solve the frozen-coefficient linear problem for given density and source
/// fields, starting from `psi` (whose Dirichlet rows must carry the boundary
/// data). Returns the updated field.
pub fn assemble_and_linear_solve(
    grid: &Grid,
    rho: &Array2<f64>,
    source: &Array2<f64>,
    psi: &Array2<f64>,
    rel_tol: f64,
    max_iter: usize,
) -> Result<(Array2<f64>, LinearStats), SolveError> {
    let (a, b) = assemble(grid, rho, source);
    let mut x = psi.clone();
    let stats = a.solve_pcg(&mut x, &b, rel_tol, max_iter)?;
    Ok((x, stats))
}

/// RMS of the pointwise equation residual implied by `A psi - b`.
fn nonlinear_residual(grid: &Grid, a: &Stencil9, psi: &Array2<f64>, b: &Array2<f64>) -> f64 {
    let r = a.residual(psi, b);
    let n_free = (grid.nx * (grid.ny - 1)) as f64;
    let sum: f64 = r.iter().map(|v| v * v).sum();
    (sum / n_free).sqrt() / (grid.h_xi * grid.h_eta)
}

/// Frozen-coefficient fields of one Picard sweep.
struct CoefficientFields {
    rho: Array2<f64>,
    source: Array2<f64>,
    margin: f64,
}

fn coefficient_fields(
    grid: &Grid,
    gas: &GasModel,
    bprof: &BernoulliProfile,
    trunc: &TruncationParams,
    psi: &Array2<f64>,
) -> Result<CoefficientFields, SolveError> {
    let (dx1, dx2) = grid.physical_gradient(psi);
    let (nx, ny) = (grid.nx, grid.ny);
    let mut rho = Array2::zeros((nx, ny + 1));
    let mut source = Array2::zeros((nx, ny + 1));
    let mut margin = f64::NEG_INFINITY;
    for i in 0..nx {
        for j in 0..=ny {
            let q2 = dx1[[i, j]] * dx1[[i, j]] + dx2[[i, j]] * dx2[[i, j]];
            let s = bprof.b_ext(psi[[i, j]]);
            let sigma = gas.sigma(s)?;
            let sigma2 = sigma * sigma;
            margin = margin.max(q2 - sigma2);
            let mt = trunc.truncate_speed(q2, sigma2);
            let r = gas.subsonic_density(mt, s)?;
            rho[[i, j]] = r;
            source[[i, j]] = r * bprof.b_ext_deriv(psi[[i, j]]);
        }
    }
    Ok(CoefficientFields {
        rho,
        source,
        margin,
    })
}

/// Fixed point of the outer iteration: truncate the momentum flux, invert the
/// Bernoulli law for the density, one linear solve, under-relax; repeat until
/// the nonlinear residual drops below `opts.tol`.
pub fn picard_solve(
    grid: &Grid,
    gas: &GasModel,
    bprof: &BernoulliProfile,
    trunc: &TruncationParams,
    t: f64,
    opts: &PicardOpts,
) -> Result<StreamField, SolveError> {
    picard_solve_from(grid, gas, bprof, trunc, t, opts, None)
}

/// [`picard_solve`] with an optional initial field (must carry the Dirichlet
/// data); the default start is `psi = t eta`.
pub fn picard_solve_from(
    grid: &Grid,
    gas: &GasModel,
    bprof: &BernoulliProfile,
    trunc: &TruncationParams,
    t: f64,
    opts: &PicardOpts,
    init: Option<&Array2<f64>>,
) -> Result<StreamField, SolveError> {
    let m = bprof.mass_flux;
    if !(0.0..=m * (1.0 + 1e-12)).contains(&t) {
        return Err(SolveError::FluxOutOfRange { t, m });
    }
    let (nx, ny) = (grid.nx, grid.ny);
    let mut psi = match init {
        Some(f) => f.clone(),
        None => {
            let mut psi = Array2::zeros((nx, ny + 1));
            for i in 0..nx {
                for j in 0..=ny {
                    psi[[i, j]] = t * grid.eta(j);
                }
            }
            psi
        }
    };

    let mut history = Vec::new();
    for it in 0..=opts.max_iter {
        let fields = coefficient_fields(grid, gas, bprof, trunc, &psi)?;
        let (a, b) = assemble(grid, &fields.rho, &fields.source);
        let residual = nonlinear_residual(grid, &a, &psi, &b);
        history.push(residual);
        if residual <= opts.tol {
            return Ok(StreamField {
                psi,
                t,
                iterations: it,
                residual,
                margin: fields.margin,
                near_sonic: fields.margin >= -trunc.theta0 / 8.0,
                theta0: trunc.theta0,
            });
        }
        if it == opts.max_iter {
            break;
        }
        let mut star = psi.clone();
        a.solve_pcg(&mut star, &b, opts.lin_rel_tol, opts.lin_max_iter)?;
        if opts.relax >= 1.0 {
            psi = star;
        } else {
            for i in 0..nx {
                for j in 0..=ny {
                    psi[[i, j]] = opts.relax * star[[i, j]] + (1.0 - opts.relax) * psi[[i, j]];
                }
            }
        }
    }
    Err(SolveError::PicardStalled {
        iterations: opts.max_iter,
        residual: *history.last().unwrap(),
        history,
    })
}

/// Pointwise bound on the local ellipticity ratio of the truncated operator:
/// `max over nodes of H^2 c^2 / (H^2 c^2 - M_trunc)`. The truncation keeps
/// the truncated momentum flux at least `theta0 / 8` below the sonic value,
/// so the ratio stays below a constant determined by `theta0` on any field.
pub fn ellipticity_ratio(
    grid: &Grid,
    gas: &GasModel,
    bprof: &BernoulliProfile,
    trunc: &TruncationParams,
    psi: &Array2<f64>,
) -> Result<f64, SolveError> {
    let (dx1, dx2) = grid.physical_gradient(psi);
    let mut ratio: f64 = 1.0;
    for i in 0..grid.nx {
        for j in 0..=grid.ny {
            let q2 = dx1[[i, j]] * dx1[[i, j]] + dx2[[i, j]] * dx2[[i, j]];
            let s = bprof.b_ext(psi[[i, j]]);
            let sigma = gas.sigma(s)?;
            let mt = trunc.truncate_speed(q2, sigma * sigma);
            let rho = gas.subsonic_density(mt, s)?;
            let hc2 = rho * rho * gas.dp_drho(rho);
            ratio = ratio.max(hc2 / (hc2 - mt));
        }
    }
    Ok(ratio)
}

/// Exact discrete flux balance over the strip of columns `i1..i2` (half-open,
/// may wrap): returns `(cut_flux, rhs_integral, gross_flux)` where `cut_flux`
/// sums `A_kl (psi_l - psi_k)` over edges leaving the strip, `rhs_integral`
/// sums the load over the strip, and `gross_flux` the absolute edge fluxes
/// (the natural scale of the balance). On a solved system the first two agree
/// to linear-solver precision.
pub fn strip_flux_balance(
    grid: &Grid,
    a: &Stencil9,
    psi: &Array2<f64>,
    b: &Array2<f64>,
    i1: usize,
    i2: usize,
) -> (f64, f64, f64) {
    let (nx, ny) = (grid.nx, grid.ny);
    let in_strip = |i: usize| -> bool {
        if i1 <= i2 {
            i >= i1 && i < i2
        } else {
            i >= i1 || i < i2
        }
    };
    let mut cut = 0.0;
    let mut rhs = 0.0;
    let mut gross = 0.0;
    for i in 0..nx {
        if !in_strip(i) {
            continue;
        }
        for j in 1..ny {
            rhs += b[[i, j]];
            for (k, &(di, dj)) in OFFSETS.iter().enumerate() {
                let c = a.get(i, j, k);
                if c == 0.0 {
                    continue;
                }
                let ii = (i as isize + di).rem_euclid(nx as isize) as usize;
                let jj = (j as isize + dj) as usize;
                // Edges to nodes outside the strip (other columns or the
                // Dirichlet rows) are cut edges.
                if in_strip(ii) && jj != 0 && jj != ny {
                    continue;
                }
                let flux = c * (psi[[ii, jj]] - psi[[i, j]]);
                cut -= flux;
                gross += flux.abs();
            }
        }
    }
    (cut, rhs, gross)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{NozzleGeometry, WallSeries};

    fn gas() -> GasModel {
        GasModel::polytropic(2.0, 0.5).unwrap()
    }

    #[test]
    fn zeta_clamp_values() {
        let tr = TruncationParams::new(0.5).unwrap();
        // Deep subsonic: identity region.
        assert_eq!(tr.truncate_speed(0.1, 1.0), 0.1);
        // Far past sonic: plateau sigma2 - theta0/8.
        assert!((tr.truncate_speed(2.0, 1.0) - 0.9375).abs() < 1e-15);
        // Boundary of the identity region.
        let q2 = 1.0 - 0.5 / 4.0;
        assert!((tr.truncate_speed(q2, 1.0) - q2).abs() < 1e-14);
        // Monotone and capped in between.
        let mut prev = f64::NEG_INFINITY;
        for k in 0..=100 {
            let s = -0.2 + 0.2 * k as f64 / 100.0;
            let z = tr.zeta(s);
            assert!(z >= prev - 1e-15);
            assert!(z <= -0.5 / 8.0 + 1e-15);
            prev = z;
        }
    }

    #[test]
    fn stiffness_is_symmetric_and_zero_row_sum() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(31);
        let geom = NozzleGeometry::new(
            1.0,
            WallSeries {
                mean: 0.0,
                cos: vec![0.03],
                sin: vec![0.02],
            },
            WallSeries {
                mean: 1.0,
                cos: vec![],
                sin: vec![-0.1],
            },
        )
        .unwrap();
        let grid = Grid::new(&geom, 12, 10).unwrap();
        let mut rho = Array2::zeros((12, 11));
        for v in rho.iter_mut() {
            *v = rng.gen_range(0.8..1.6);
        }
        let source = Array2::zeros((12, 11));
        let (a, _) = assemble(&grid, &rho, &source);

        // Symmetry: x^T A y = y^T A x for vectors vanishing on Dirichlet rows.
        let mut x = Array2::zeros((12, 11));
        let mut y = Array2::zeros((12, 11));
        for i in 0..12 {
            for j in 1..10 {
                x[[i, j]] = rng.gen_range(-1.0..1.0);
                y[[i, j]] = rng.gen_range(-1.0..1.0);
            }
        }
        let mut ax = Array2::zeros((12, 11));
        let mut ay = Array2::zeros((12, 11));
        a.matvec(&x, &mut ax);
        a.matvec(&y, &mut ay);
        let dot = |u: &Array2<f64>, v: &Array2<f64>| -> f64 {
            (0..12)
                .flat_map(|i| (1..10).map(move |j| (i, j)))
                .map(|(i, j)| u[[i, j]] * v[[i, j]])
                .sum()
        };
        let xa_y = dot(&ax, &y);
        let ya_x = dot(&ay, &x);
        assert!(
            (xa_y - ya_x).abs() <= 1e-12 * xa_y.abs().max(1.0),
            "asymmetry {xa_y} vs {ya_x}"
        );

        // Zero row sums: A applied to a constant vanishes on free rows.
        let ones = Array2::from_elem((12, 11), 1.0);
        let mut a1 = Array2::zeros((12, 11));
        a.matvec(&ones, &mut a1);
        for i in 0..12 {
            for j in 1..10 {
                assert!(
                    a1[[i, j]].abs() < 1e-13,
                    "row sum {} at ({i},{j})",
                    a1[[i, j]]
                );
            }
        }
    }

    #[test]
    fn flat_channel_laplace_is_exact() {
        // rho = 1, rhs = 0, t = m: psi = m eta to solver tolerance.
        let geom = NozzleGeometry::flat_channel(1.0);
        let grid = Grid::new(&geom, 16, 16).unwrap();
        let trunc = TruncationParams::new(0.4).unwrap();
        let bprof = BernoulliProfile::constant(1.5, 0.5);
        let field =
            picard_solve(&grid, &gas(), &bprof, &trunc, 0.5, &PicardOpts::default()).unwrap();
        for i in 0..16 {
            for j in 0..=16 {
                let exact = 0.5 * grid.eta(j);
                assert!(
                    (field.psi[[i, j]] - exact).abs() < 1e-12,
                    "psi error {} at ({i},{j})",
                    (field.psi[[i, j]] - exact).abs()
                );
            }
        }
        assert!(field.residual <= 1e-10);
        assert!(!field.near_sonic);
        // Uniform flow margin: q2 - Sigma^2 = 0.25 - 1.
        assert!((field.margin + 0.75).abs() < 1e-10);
    }

    #[test]
    fn constant_coefficient_scaling_drops_out() {
        let geom = NozzleGeometry::flat_channel(1.0);
        let grid = Grid::new(&geom, 12, 12).unwrap();
        let mut psi = Array2::zeros((12, 13));
        for i in 0..12 {
            psi[[i, 12]] = 0.5;
        }
        let source = Array2::zeros((12, 13));
        for rho0 in [1.0, 0.37, 2.9] {
            let rho = Array2::from_elem((12, 13), rho0);
            let (sol, _) =
                assemble_and_linear_solve(&grid, &rho, &source, &psi, 1e-13, 100_000).unwrap();
            for i in 0..12 {
                for j in 0..=12 {
                    let exact = 0.5 * j as f64 / 12.0;
                    assert!((sol[[i, j]] - exact).abs() < 1e-11);
                }
            }
        }
    }

    #[test]
    fn manufactured_solution_second_order() {
        // Flat channel, rho = 1: Laplace(psi*) with psi* = m sin(pi eta) + m eta.
        let geom = NozzleGeometry::flat_channel(1.0);
        let m = 0.5;
        let pi = std::f64::consts::PI;
        let run = |n: usize| -> f64 {
            let grid = Grid::new(&geom, n, n).unwrap();
            let rho = Array2::from_elem((n, n + 1), 1.0);
            let mut source = Array2::zeros((n, n + 1));
            let mut psi0 = Array2::zeros((n, n + 1));
            for i in 0..n {
                for j in 0..=n {
                    let eta = grid.eta(j);
                    source[[i, j]] = -m * pi * pi * (pi * eta).sin();
                }
                psi0[[i, n]] = m;
            }
            let (sol, _) =
                assemble_and_linear_solve(&grid, &rho, &source, &psi0, 1e-13, 200_000).unwrap();
            let mut err: f64 = 0.0;
            for i in 0..n {
                for j in 0..=n {
                    let eta = grid.eta(j);
                    let exact = m * (pi * eta).sin() + m * eta;
                    err = err.max((sol[[i, j]] - exact).abs());
                }
            }
            err
        };
        let e1 = run(16);
        let e2 = run(32);
        let order = (e1 / e2).log2();
        assert!(
            order >= 1.9,
            "manufactured-solution order {order:.2} (e16={e1:.3e}, e32={e2:.3e})"
        );
    }

    #[test]
    fn manufactured_solution_curvilinear_second_order() {
        // Sinusoidal walls exercise the mixed metric terms. The target field
        // psi*(x1, x2) = m (sin(pi eta) + eta) with eta = (x2 - f1)/g has an
        // analytic Laplacian through the chain rule.
        let geom = NozzleGeometry::new(
            1.0,
            WallSeries {
                mean: 0.0,
                cos: vec![],
                sin: vec![0.04],
            },
            WallSeries {
                mean: 1.0,
                cos: vec![],
                sin: vec![-0.06],
            },
        )
        .unwrap();
        let m = 0.5;
        let pi = std::f64::consts::PI;
        let profile = |eta: f64| m * ((pi * eta).sin() + eta);
        let dprofile = |eta: f64| m * (pi * (pi * eta).cos() + 1.0);
        let ddprofile = |eta: f64| -m * pi * pi * (pi * eta).sin();

        let run = |n: usize| -> f64 {
            let grid = Grid::new(&geom, n, n).unwrap();
            let rho = Array2::from_elem((n, n + 1), 1.0);
            let mut source = Array2::zeros((n, n + 1));
            let mut psi0 = Array2::zeros((n, n + 1));
            for i in 0..n {
                let xi = grid.xi(i);
                let g = geom.gap(xi, 0);
                let dg = geom.gap(xi, 1);
                let ddg = geom.gap(xi, 2);
                let df1 = geom.wall_eval(1, xi, 1);
                let ddf1 = geom.wall_eval(1, xi, 2);
                for j in 0..=n {
                    let eta = grid.eta(j);
                    let a = -(df1 + eta * dg) / g;
                    let b = 1.0 / g;
                    // Laplacian of F(eta(x1, x2)): F'' |grad eta|^2 + F' lap(eta).
                    let eta_x1x1 =
                        -(ddf1 + a * dg + eta * ddg) / g + (df1 + eta * dg) * dg / (g * g);
                    source[[i, j]] = ddprofile(eta) * (a * a + b * b) + dprofile(eta) * eta_x1x1;
                    psi0[[i, j]] = 0.0;
                }
                psi0[[i, n]] = profile(1.0);
            }
            let (sol, _) =
                assemble_and_linear_solve(&grid, &rho, &source, &psi0, 1e-13, 200_000).unwrap();
            let mut err: f64 = 0.0;
            for i in 0..n {
                for j in 0..=n {
                    err = err.max((sol[[i, j]] - profile(grid.eta(j))).abs());
                }
            }
            err
        };
        let e1 = run(16);
        let e2 = run(32);
        let order = (e1 / e2).log2();
        assert!(
            order >= 1.85,
            "curvilinear manufactured order {order:.2} (e16={e1:.3e}, e32={e2:.3e})"
        );
    }

    #[test]
    fn flux_telescoping_identity() {
        // After a solve, the cut-edge flux across any strip balances the
        // volume integral of the rhs to solver precision.
        let geom = NozzleGeometry::new(
            1.0,
            WallSeries::constant(0.0),
            WallSeries {
                mean: 1.0,
                cos: vec![],
                sin: vec![-0.1],
            },
        )
        .unwrap();
        let grid = Grid::new(&geom, 24, 16).unwrap();
        let g = gas();
        let bprof = BernoulliProfile::constant(1.5, 0.5);
        let trunc = TruncationParams::from_bounds(&g, 1.5, 1.5, None, 0.5).unwrap();
        let field = picard_solve(&grid, &g, &bprof, &trunc, 0.5, &PicardOpts::default()).unwrap();

        // One tight frozen-coefficient solve; the telescoping identity holds
        // at linear-solver precision on that pair.
        let fields = coefficient_fields(&grid, &g, &bprof, &trunc, &field.psi).unwrap();
        let (psi, _) = assemble_and_linear_solve(
            &grid,
            &fields.rho,
            &fields.source,
            &field.psi,
            1e-13,
            200_000,
        )
        .unwrap();
        let (a, b) = assemble(&grid, &fields.rho, &fields.source);
        for (i1, i2) in [(0usize, 5usize), (3, 17), (20, 4)] {
            let (cut, rhs, gross) = strip_flux_balance(&grid, &a, &psi, &b, i1, i2);
            assert!(
                (cut - rhs).abs() <= 1e-12 * gross.max(1e-12),
                "strip ({i1},{i2}): cut {cut:.3e} vs rhs {rhs:.3e} (gross {gross:.3e})"
            );
        }
    }

    #[test]
    fn ellipticity_ratio_bounded_by_truncation() {
        // Even at a flux past sonic, the truncated coefficients stay
        // uniformly elliptic with a ratio controlled by theta0.
        let geom = NozzleGeometry::flat_channel(1.0);
        let grid = Grid::new(&geom, 12, 12).unwrap();
        let g = gas();
        let trunc = TruncationParams::new(0.2).unwrap();
        for m in [0.5, 0.9, 0.99] {
            let bprof = BernoulliProfile::constant(1.5, m);
            let field = picard_solve(&grid, &g, &bprof, &trunc, m, &PicardOpts::default()).unwrap();
            let ratio = ellipticity_ratio(&grid, &g, &bprof, &trunc, &field.psi).unwrap();
            // H^2 c^2 <= rho_max^3 for this gas; the truncated argument sits
            // at least theta0/8 below it.
            let c = g.critical_state(1.5).unwrap();
            let bound = c.rho_max.powi(3) / (trunc.theta0 / 8.0);
            assert!(ratio >= 1.0);
            assert!(ratio <= bound, "ratio {ratio} vs bound {bound} at m={m}");
        }
    }

    #[test]
    fn zero_flux_gives_zero_field() {
        let geom = NozzleGeometry::flat_channel(1.0);
        let grid = Grid::new(&geom, 12, 12).unwrap();
        let bprof = BernoulliProfile::constant(1.5, 0.5);
        let trunc = TruncationParams::new(0.4).unwrap();
        let field =
            picard_solve(&grid, &gas(), &bprof, &trunc, 0.0, &PicardOpts::default()).unwrap();
        for v in field.psi.iter() {
            assert_eq!(*v, 0.0);
        }
        assert_eq!(field.iterations, 0);
    }

    #[test]
    fn rejects_flux_outside_range() {
        let geom = NozzleGeometry::flat_channel(1.0);
        let grid = Grid::new(&geom, 12, 12).unwrap();
        let bprof = BernoulliProfile::constant(1.5, 0.5);
        let trunc = TruncationParams::new(0.4).unwrap();
        assert!(matches!(
            picard_solve(&grid, &gas(), &bprof, &trunc, 0.7, &PicardOpts::default()),
            Err(SolveError::FluxOutOfRange { .. })
        ));
    }
}
