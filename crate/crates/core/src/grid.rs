//! Structured grid over one nozzle period: uniform in the computational
//! rectangle `[0, L] x [0, 1]`, periodic in `xi`, Dirichlet rows at
//! `eta = 0` and `eta = 1`.
//!
//! The mapped diffusion tensor splits as `K = K_geo / rho`, with the purely
//! geometric part precomputed at the nodes:
//! `K_geo = [[g, g a], [g a, g a^2 + 1/g]]` where `g` is the local gap and
//! `a = d eta / d x1` the shear term of the straightening map.

use ndarray::Array2;

use crate::geometry::NozzleGeometry;
use crate::solver::SolveError;

#[derive(Debug, Clone)]
pub struct Grid {
    pub nx: usize,
    /// Cells in `eta`; nodes are `j = 0..=ny`.
    pub ny: usize,
    pub h_xi: f64,
    pub h_eta: f64,
    pub period: f64,
    /// Gap and wall data per column.
    pub gap: Vec<f64>,
    /// Shear metric `a = eta_x1` at the nodes.
    pub shear: Array2<f64>,
    /// Geometric tensor components at the nodes.
    pub k_geo11: Array2<f64>,
    pub k_geo12: Array2<f64>,
    pub k_geo22: Array2<f64>,
}

impl Grid {
    pub fn new(geom: &NozzleGeometry, nx: usize, ny: usize) -> Result<Self, SolveError> {
        if nx < 8 || ny < 8 {
            return Err(SolveError::GridTooCoarse { nx, ny });
        }
        let h_xi = geom.period / nx as f64;
        let h_eta = 1.0 / ny as f64;
        let mut gap = vec![0.0; nx];
        let mut shear = Array2::zeros((nx, ny + 1));
        let mut k11 = Array2::zeros((nx, ny + 1));
        let mut k12 = Array2::zeros((nx, ny + 1));
        let mut k22 = Array2::zeros((nx, ny + 1));
        for i in 0..nx {
            let xi = i as f64 * h_xi;
            let g = geom.gap(xi, 0);
            gap[i] = g;
            for j in 0..=ny {
                let eta = j as f64 * h_eta;
                let a = geom.eta_x1(xi, eta);
                shear[[i, j]] = a;
                k11[[i, j]] = g;
                k12[[i, j]] = g * a;
                k22[[i, j]] = g * a * a + 1.0 / g;
            }
        }
        Ok(Grid {
            nx,
            ny,
            h_xi,
            h_eta,
            period: geom.period,
            gap,
            shear,
            k_geo11: k11,
            k_geo12: k12,
            k_geo22: k22,
        })
    }

    pub fn xi(&self, i: usize) -> f64 {
        i as f64 * self.h_xi
    }

    pub fn eta(&self, j: usize) -> f64 {
        j as f64 * self.h_eta
    }

    pub fn num_nodes(&self) -> usize {
        self.nx * (self.ny + 1)
    }

    /// Physical gradient of a nodal field: `(d/dx1, d/dx2)` from the mapped
    /// derivatives. Periodic centered in `xi`; centered in `eta` with
    /// one-sided second-order stencils at the walls (coefficient-grade
    /// accuracy, independent of the diagnostics stencils).
    pub fn physical_gradient(&self, f: &Array2<f64>) -> (Array2<f64>, Array2<f64>) {
        let (nx, ny) = (self.nx, self.ny);
        let mut dx1 = Array2::zeros((nx, ny + 1));
        let mut dx2 = Array2::zeros((nx, ny + 1));
        for i in 0..nx {
            let ip = (i + 1) % nx;
            let im = (i + nx - 1) % nx;
            let g = self.gap[i];
            for j in 0..=ny {
                let f_xi = (f[[ip, j]] - f[[im, j]]) / (2.0 * self.h_xi);
                let f_eta = if j == 0 {
                    (-3.0 * f[[i, 0]] + 4.0 * f[[i, 1]] - f[[i, 2]]) / (2.0 * self.h_eta)
                } else if j == ny {
                    (3.0 * f[[i, ny]] - 4.0 * f[[i, ny - 1]] + f[[i, ny - 2]]) / (2.0 * self.h_eta)
                } else {
                    (f[[i, j + 1]] - f[[i, j - 1]]) / (2.0 * self.h_eta)
                };
                dx1[[i, j]] = f_xi + self.shear[[i, j]] * f_eta;
                dx2[[i, j]] = f_eta / g;
            }
        }
        (dx1, dx2)
    }
}
