//! Damped Jacobian-free Newton–Krylov iteration for the grid equations.

use super::{residual_diagonal, residual_into, GridField, GridSolution, SquareDomain};
use crate::error::{Error, Result};
use crate::linalg::{norm2, norm_inf, solve_bicgstab, FnOperator, KrylovOptions};
use crate::nonlinearity::NonlinearityModel;

/// Smallest damping factor tried by the line search.
pub const MIN_DAMPING: f64 = 1.0 / (1u32 << 20) as f64;
const ARMIJO_C: f64 = 1e-4;

/// Starting iterate.
#[derive(Debug, Clone, PartialEq)]
pub enum InitialGuess {
    /// Discrete harmonic extension of the boundary data.
    Laplace,
    /// Full nodal field; its boundary ring is overwritten by the data.
    Field(Vec<f64>),
}

#[derive(Debug, Clone, PartialEq)]
pub struct NewtonOptions {
    /// Max-norm residual target; `None` means 1e-9·(1 + ‖boundary‖∞).
    pub atol: Option<f64>,
    pub max_newton: usize,
    /// Relative tolerance of each inner linear solve.
    pub linear_rtol: f64,
    pub linear_max_iter: usize,
    pub initial: InitialGuess,
}

impl Default for NewtonOptions {
    fn default() -> Self {
        Self {
            atol: None,
            max_newton: 50,
            linear_rtol: 1e-6,
            linear_max_iter: 5000,
            initial: InitialGuess::Laplace,
        }
    }
}

/// Solves the Dirichlet problem with boundary values g on the square domain.
pub fn newton_solve<G: Fn(f64, f64) -> f64>(
    model: &NonlinearityModel,
    domain: &SquareDomain,
    g: G,
    opts: &NewtonOptions,
) -> Result<GridSolution> {
    let mut field = GridField::from_fn(domain, |_, _| 0.0);
    let (nx, ny, h) = (field.nx, field.ny, field.h);
    let mut boundary = Vec::with_capacity(2 * (nx + ny) - 4);
    for j in 0..ny {
        for i in 0..nx {
            if field.is_boundary(i, j) {
                let v = g(field.x(i), field.y(j));
                if !v.is_finite() {
                    return Err(Error::NonFinite(format!(
                        "boundary value at ({}, {})",
                        field.x(i),
                        field.y(j)
                    )));
                }
                boundary.push(v);
                let k = field.index(i, j);
                field.u[k] = v;
            }
        }
    }
    let bnorm = norm_inf(&boundary);
    let atol = opts.atol.unwrap_or(1e-9 * (1.0 + bnorm));
    if !(atol > 0.0) {
        return Err(Error::param("newton_atol must be positive"));
    }

    let interior: Vec<usize> = (1..ny - 1)
        .flat_map(|j| (1..nx - 1).map(move |i| j * nx + i))
        .collect();
    let m = interior.len();
    let mut linear_iterations = 0;
    match &opts.initial {
        InitialGuess::Laplace => {
            linear_iterations += laplace_fill(&mut field, &interior)?;
        }
        InitialGuess::Field(u0) => {
            if u0.len() != field.u.len() {
                return Err(Error::DimensionMismatch {
                    expected: field.u.len(),
                    actual: u0.len(),
                });
            }
            for &k in &interior {
                field.u[k] = u0[k];
            }
        }
    }

    let eval = |u: &[f64], out: &mut [f64]| residual_into(u, nx, ny, h, model, out);
    let mut res = vec![0.0; m];
    eval(&field.u, &mut res);
    let mut newton_iterations = 0;
    let mut failure = None;
    while norm_inf(&res) > atol {
        if newton_iterations == opts.max_newton {
            failure = Some(format!("no convergence in {} Newton steps", opts.max_newton));
            break;
        }
        newton_iterations += 1;
        let u = field.u.clone();
        let unorm = norm2(&interior.iter().map(|&k| u[k]).collect::<Vec<_>>());
        let base = res.clone();
        let jv = |v: &[f64], out: &mut [f64]| {
            let vnorm = norm2(v);
            if vnorm == 0.0 {
                out.iter_mut().for_each(|o| *o = 0.0);
                return;
            }
            let sigma = f64::EPSILON.sqrt() * (1.0 + unorm) / vnorm;
            let mut up = u.clone();
            for (&k, vi) in interior.iter().zip(v) {
                up[k] += sigma * vi;
            }
            eval(&up, out);
            for (o, b) in out.iter_mut().zip(&base) {
                *o = (*o - b) / sigma;
            }
        };
        let op = FnOperator::new(m, jv).with_diagonal(residual_diagonal(&u, nx, ny, h));
        let rhs: Vec<f64> = base.iter().map(|r| -r).collect();
        let lin = solve_bicgstab(
            &op,
            &rhs,
            KrylovOptions {
                rtol: opts.linear_rtol,
                atol: 0.0,
                max_iter: opts.linear_max_iter,
            },
        )?;
        linear_iterations += lin.iterations;
        if lin.solution.iter().any(|v| !v.is_finite()) {
            failure = Some("linear solve produced a non-finite step".into());
            break;
        }

        // Armijo backtracking on the residual 2-norm.
        let f0 = norm2(&base);
        let mut lambda = 1.0;
        let mut trial = vec![0.0; m];
        let accepted = loop {
            let mut cand = u.clone();
            for (&k, d) in interior.iter().zip(&lin.solution) {
                cand[k] += lambda * d;
            }
            eval(&cand, &mut trial);
            let f1 = norm2(&trial);
            if f1.is_finite() && f1 <= (1.0 - ARMIJO_C * lambda) * f0 {
                break Some(cand);
            }
            lambda *= 0.5;
            if lambda < MIN_DAMPING {
                break None;
            }
        };
        match accepted {
            Some(cand) => {
                field.u = cand;
                std::mem::swap(&mut res, &mut trial);
            }
            None => {
                failure = Some("line search reached the damping floor".into());
                break;
            }
        }
    }
    let residual_norm = norm_inf(&res);
    Ok(GridSolution {
        field,
        boundary,
        residual_norm,
        converged: residual_norm <= atol,
        newton_iterations,
        linear_iterations,
        failure,
    })
}

/// Replaces the interior of `field` by the 5-point discrete harmonic
/// extension of its boundary ring. Returns the Krylov iteration count.
fn laplace_fill(field: &mut GridField, interior: &[usize]) -> Result<usize> {
    let (nx, ny, h) = (field.nx, field.ny, field.h);
    let m = interior.len();
    let (mi, mj) = (nx - 2, ny - 2);
    let ih2 = 1.0 / (h * h);
    // Laplacian on interior unknowns with homogeneous boundary values.
    let lap = |x: &[f64], y: &mut [f64]| {
        for b in 0..mj {
            for a in 0..mi {
                let k = b * mi + a;
                let mut s = -4.0 * x[k];
                if a > 0 {
                    s += x[k - 1];
                }
                if a + 1 < mi {
                    s += x[k + 1];
                }
                if b > 0 {
                    s += x[k - mi];
                }
                if b + 1 < mj {
                    s += x[k + mi];
                }
                y[k] = s * ih2;
            }
        }
    };
    let mut rhs = vec![0.0; m];
    for b in 0..mj {
        for a in 0..mi {
            let (i, j) = (a + 1, b + 1);
            let mut s = 0.0;
            for (ii, jj) in [(i - 1, j), (i + 1, j), (i, j - 1), (i, j + 1)] {
                if field.is_boundary(ii, jj) {
                    s += field.at(ii, jj);
                }
            }
            rhs[b * mi + a] = -s * ih2;
        }
    }
    let op = FnOperator::new(m, lap).with_diagonal(vec![-4.0 * ih2; m]);
    let sol = solve_bicgstab(
        &op,
        &rhs,
        KrylovOptions {
            rtol: 1e-8,
            atol: 0.0,
            max_iter: 20 * (nx + ny) + 1000,
        },
    )?;
    if !sol.converged {
        return Err(Error::Solver(format!(
            "initial Laplace solve did not converge ({:?})",
            sol.reason
        )));
    }
    for (&k, v) in interior.iter().zip(&sol.solution) {
        field.u[k] = *v;
    }
    Ok(sol.iterations)
}
