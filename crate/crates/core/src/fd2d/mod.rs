//! Finite-difference solver on square domains [−R, R]² with Dirichlet data.
//!
//! Nodes are x_i = −R + i·h, y_j = −R + j·h with h = 2R/(nx−1), stored row
//! major (index j·nx + i). The operator is discretized in conservative form
//! with face fluxes; f is evaluated at the nodal central-difference gradient.

mod io;
mod newton;

use crate::error::{Error, Result};
use crate::nonlinearity::NonlinearityModel;

pub use io::{decode_grid, encode_grid, read_grid, write_grid, GRID_MAGIC};
pub use newton::{newton_solve, InitialGuess, NewtonOptions};

/// Square domain [−r_dom, r_dom]² with nx × nx nodes.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SquareDomain {
    pub r_dom: f64,
    pub nx: usize,
}

impl SquareDomain {
    pub fn new(r_dom: f64, nx: usize) -> Result<Self> {
        if !(r_dom.is_finite() && r_dom > 0.0) {
            return Err(Error::param(format!("domain half-width must be positive, got {r_dom}")));
        }
        if nx < 3 {
            return Err(Error::param(format!("need at least 3 nodes per side, got {nx}")));
        }
        Ok(Self { r_dom, nx })
    }

    pub fn h(&self) -> f64 {
        2.0 * self.r_dom / (self.nx - 1) as f64
    }

    pub fn coord(&self, i: usize) -> f64 {
        -self.r_dom + i as f64 * self.h()
    }
}

/// Nodal values on a square grid.
#[derive(Debug, Clone, PartialEq)]
pub struct GridField {
    pub r_dom: f64,
    pub nx: usize,
    pub ny: usize,
    pub h: f64,
    pub u: Vec<f64>,
}

impl GridField {
    /// Samples g(x, y) at every node.
    pub fn from_fn<G: Fn(f64, f64) -> f64>(domain: &SquareDomain, g: G) -> Self {
        let nx = domain.nx;
        let mut u = Vec::with_capacity(nx * nx);
        for j in 0..nx {
            for i in 0..nx {
                u.push(g(domain.coord(i), domain.coord(j)));
            }
        }
        Self {
            r_dom: domain.r_dom,
            nx,
            ny: nx,
            h: domain.h(),
            u,
        }
    }

    pub fn domain(&self) -> SquareDomain {
        SquareDomain {
            r_dom: self.r_dom,
            nx: self.nx,
        }
    }

    pub fn index(&self, i: usize, j: usize) -> usize {
        j * self.nx + i
    }

    pub fn at(&self, i: usize, j: usize) -> f64 {
        self.u[j * self.nx + i]
    }

    pub fn x(&self, i: usize) -> f64 {
        -self.r_dom + i as f64 * self.h
    }

    pub fn y(&self, j: usize) -> f64 {
        -self.r_dom + j as f64 * self.h
    }

    pub fn is_boundary(&self, i: usize, j: usize) -> bool {
        i == 0 || j == 0 || i + 1 == self.nx || j + 1 == self.ny
    }

    pub fn interior_len(&self) -> usize {
        (self.nx - 2) * (self.ny - 2)
    }

    fn check(&self) -> Result<()> {
        if self.nx < 3 || self.ny < 3 {
            return Err(Error::param("grid must be at least 3×3"));
        }
        if self.u.len() != self.nx * self.ny {
            return Err(Error::DimensionMismatch {
                expected: self.nx * self.ny,
                actual: self.u.len(),
            });
        }
        Ok(())
    }
}

/// Result of a Newton solve.
#[derive(Debug, Clone)]
pub struct GridSolution {
    pub field: GridField,
    /// Dirichlet values on the outer ring, in row-major node order.
    pub boundary: Vec<f64>,
    /// Max-norm of the interior residual at the returned iterate.
    pub residual_norm: f64,
    pub converged: bool,
    pub newton_iterations: usize,
    pub linear_iterations: usize,
    /// Why the iteration stopped when it did not converge.
    pub failure: Option<String>,
}

/// Nodal gradient and z = |∇u|².
#[derive(Debug, Clone, PartialEq)]
pub struct GradientField {
    pub nx: usize,
    pub ny: usize,
    pub h: f64,
    pub ux: Vec<f64>,
    pub uy: Vec<f64>,
    pub z: Vec<f64>,
}

impl GradientField {
    pub fn grad_norm(&self, k: usize) -> f64 {
        self.z[k].sqrt()
    }
}

/// Central differences at interior nodes, second-order one-sided differences
/// on the boundary ring.
pub fn gradient_field(field: &GridField) -> Result<GradientField> {
    field.check()?;
    let (nx, ny, h) = (field.nx, field.ny, field.h);
    let n = nx * ny;
    let mut ux = vec![0.0; n];
    let mut uy = vec![0.0; n];
    for j in 0..ny {
        for i in 0..nx {
            let k = field.index(i, j);
            ux[k] = diff(|m| field.at(m, j), i, nx, h);
            uy[k] = diff(|m| field.at(i, m), j, ny, h);
        }
    }
    let z = ux.iter().zip(&uy).map(|(a, b)| a * a + b * b).collect();
    Ok(GradientField { nx, ny, h, ux, uy, z })
}

fn diff<F: Fn(usize) -> f64>(v: F, i: usize, n: usize, h: f64) -> f64 {
    if i == 0 {
        (-3.0 * v(0) + 4.0 * v(1) - v(2)) / (2.0 * h)
    } else if i + 1 == n {
        (3.0 * v(n - 1) - 4.0 * v(n - 2) + v(n - 3)) / (2.0 * h)
    } else {
        (v(i + 1) - v(i - 1)) / (2.0 * h)
    }
}

/// Discrete residual at interior nodes, row-major over the (nx−2)×(ny−2)
/// interior block.
pub fn residual(field: &GridField, model: &NonlinearityModel) -> Result<Vec<f64>> {
    field.check()?;
    let mut out = vec![0.0; field.interior_len()];
    residual_into(&field.u, field.nx, field.ny, field.h, model, &mut out);
    Ok(out)
}

/// Face flux D/√(1 + D² + T²) for normal difference D and tangential average T.
fn face_flux(d: f64, t: f64) -> f64 {
    d / (1.0 + d * d + t * t).sqrt()
}

pub(crate) fn residual_into(
    u: &[f64],
    nx: usize,
    ny: usize,
    h: f64,
    model: &NonlinearityModel,
    out: &mut [f64],
) {
    let at = |i: usize, j: usize| u[j * nx + i];
    // Flux through the face between (i, j) and (i+1, j).
    let fx = |i: usize, j: usize| {
        let d = (at(i + 1, j) - at(i, j)) / h;
        let t = (at(i, j + 1) - at(i, j - 1) + at(i + 1, j + 1) - at(i + 1, j - 1)) / (4.0 * h);
        face_flux(d, t)
    };
    // Flux through the face between (i, j) and (i, j+1).
    let fy = |i: usize, j: usize| {
        let d = (at(i, j + 1) - at(i, j)) / h;
        let t = (at(i + 1, j) - at(i - 1, j) + at(i + 1, j + 1) - at(i - 1, j + 1)) / (4.0 * h);
        face_flux(d, t)
    };
    let mi = nx - 2;
    for j in 1..ny - 1 {
        for i in 1..nx - 1 {
            let div = (fx(i, j) - fx(i - 1, j) + fy(i, j) - fy(i, j - 1)) / h;
            let p = [
                (at(i + 1, j) - at(i - 1, j)) / (2.0 * h),
                (at(i, j + 1) - at(i, j - 1)) / (2.0 * h),
            ];
            out[(j - 1) * mi + (i - 1)] = div - model.eval_f(&p);
        }
    }
}

/// ∂(residual)/∂u at each interior node. The f term depends only on the
/// neighbours, so this diagonal is exact.
pub(crate) fn residual_diagonal(u: &[f64], nx: usize, ny: usize, h: f64) -> Vec<f64> {
    let at = |i: usize, j: usize| u[j * nx + i];
    // d/dD of D/√(1+D²+T²)
    let slope = |d: f64, t: f64| (1.0 + t * t) / (1.0 + d * d + t * t).powf(1.5);
    let sx = |i: usize, j: usize| {
        let d = (at(i + 1, j) - at(i, j)) / h;
        let t = (at(i, j + 1) - at(i, j - 1) + at(i + 1, j + 1) - at(i + 1, j - 1)) / (4.0 * h);
        slope(d, t)
    };
    let sy = |i: usize, j: usize| {
        let d = (at(i, j + 1) - at(i, j)) / h;
        let t = (at(i + 1, j) - at(i - 1, j) + at(i + 1, j + 1) - at(i - 1, j + 1)) / (4.0 * h);
        slope(d, t)
    };
    let mut diag = Vec::with_capacity((nx - 2) * (ny - 2));
    for j in 1..ny - 1 {
        for i in 1..nx - 1 {
            let s = sx(i, j) + sx(i - 1, j) + sy(i, j) + sy(i, j - 1);
            diag.push(-s / (h * h));
        }
    }
    diag
}

#[cfg(test)]
mod tests {
    use super::*;

    fn domain(r: f64, nx: usize) -> SquareDomain {
        SquareDomain::new(r, nx).unwrap()
    }

    #[test]
    fn affine_residual_vanishes_for_zero_model() {
        let f = GridField::from_fn(&domain(1.0, 9), |x, y| 0.3 * x - 1.7 * y + 2.0);
        let r = residual(&f, &NonlinearityModel::Zero).unwrap();
        assert!(r.iter().all(|v| v.abs() < 1e-12), "{r:?}");
    }

    #[test]
    fn constant_field_residual_is_minus_eps() {
        let f = GridField::from_fn(&domain(2.0, 7), |_, _| 4.0);
        let r = residual(&f, &NonlinearityModel::imcf(0.25).unwrap()).unwrap();
        assert_eq!(r.len(), 25);
        assert!(r.iter().all(|&v| v == -0.25));
    }

    #[test]
    fn sphere_cap_residual_is_second_order() {
        let model = NonlinearityModel::constant(1.0).unwrap();
        let cap = |x: f64, y: f64| -(4.0 - x * x - y * y).sqrt();
        // Max over the fixed window |x|, |y| ≤ 1/2; nodes next to the corners
        // approach the cap's steep region as h shrinks.
        let err = |nx: usize| {
            let f = GridField::from_fn(&domain(1.0, nx), cap);
            let r = residual(&f, &model).unwrap();
            let mut m = 0.0f64;
            for j in 1..nx - 1 {
                for i in 1..nx - 1 {
                    if f.x(i).abs() <= 0.5 && f.y(j).abs() <= 0.5 {
                        m = m.max(r[(j - 1) * (nx - 2) + i - 1].abs());
                    }
                }
            }
            m
        };
        let ratio = err(33) / err(65);
        assert!(ratio > 3.5 && ratio < 4.5, "ratio {ratio}");
    }

    #[test]
    fn gradient_exact_on_affine() {
        let f = GridField::from_fn(&domain(1.5, 6), |x, y| 2.0 * x + 3.0 * y - 1.0);
        let g = gradient_field(&f).unwrap();
        for k in 0..36 {
            assert!((g.ux[k] - 2.0).abs() < 1e-12);
            assert!((g.uy[k] - 3.0).abs() < 1e-12);
            assert!((g.z[k] - 13.0).abs() < 1e-11);
        }
    }

    #[test]
    fn diagonal_matches_probing() {
        let model = NonlinearityModel::imcf(0.5).unwrap();
        let f = GridField::from_fn(&domain(1.0, 7), |x, y| x * x - 0.5 * y * y * y + x * y);
        let diag = residual_diagonal(&f.u, 7, 7, f.h);
        let base = residual(&f, &model).unwrap();
        let eps = 1e-7;
        for (k, &d) in diag.iter().enumerate() {
            let (i, j) = (k % 5 + 1, k / 5 + 1);
            let mut g = f.clone();
            g.u[j * 7 + i] += eps;
            let r = residual(&g, &model).unwrap();
            let fd = (r[k] - base[k]) / eps;
            assert!((fd - d).abs() < 1e-4 * d.abs(), "{fd} vs {d}");
        }
    }

    #[test]
    fn rejects_small_or_mismatched_grids() {
        assert!(SquareDomain::new(1.0, 2).is_err());
        assert!(SquareDomain::new(0.0, 5).is_err());
        let mut f = GridField::from_fn(&domain(1.0, 4), |_, _| 0.0);
        f.u.pop();
        assert!(residual(&f, &NonlinearityModel::Zero).is_err());
        assert!(gradient_field(&f).is_err());
    }
}
