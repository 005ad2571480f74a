//! Annulus boundary-value problems by shooting on the inner slope.
//!
//! The unknown is the inner flux ratio s₀ = w(r_in)/√(1+w(r_in)²) ∈ [−1, 1].
//! The scan covers w(r_in) = 0 and ±(log-spaced magnitudes) plus the two
//! vertical-tangent starts s₀ = ±1, which are needed by profiles such as the
//! catenoid through its neck.

use super::{
    check_dimension, integrate_segment, slope_from_ratio, Path, RadialOptions, RadialSolution,
    SegmentEnd,
};
use crate::error::{Error, Result};
use crate::nonlinearity::NonlinearityModel;

/// Shooting settings.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ShootingOptions {
    pub radial: RadialOptions,
    /// Accept when |u(r_out) − u_out| ≤ rel_tol·(1 + |u_out|).
    pub rel_tol: f64,
    /// Number of log-spaced slope magnitudes per sign in the scan.
    pub magnitudes: usize,
    pub slope_min: f64,
    pub slope_max: f64,
    pub max_iter: usize,
}

impl Default for ShootingOptions {
    fn default() -> Self {
        Self {
            radial: RadialOptions::default(),
            rel_tol: 1e-9,
            magnitudes: 64,
            slope_min: 1e-6,
            slope_max: 1e3,
            max_iter: 200,
        }
    }
}

/// Converged (or best) shooting profile.
#[derive(Debug, Clone)]
pub struct ShootingResult {
    pub solution: RadialSolution,
    /// w(r_in); ±∞ for a vertical-tangent start.
    pub initial_slope: f64,
    /// |u(r_out) − u_out|.
    pub boundary_residual: f64,
    /// Number of trajectories integrated (scan plus refinement).
    pub iterations: usize,
    pub converged: bool,
}

/// Solves the annulus problem with default options and integrator tolerance `tol`.
pub fn solve_annulus_bvp(
    model: &NonlinearityModel,
    n: usize,
    r_in: f64,
    r_out: f64,
    u_in: f64,
    u_out: f64,
    tol: f64,
) -> Result<ShootingResult> {
    let opts = ShootingOptions {
        radial: RadialOptions::with_tol(tol),
        ..ShootingOptions::default()
    };
    solve_annulus_bvp_with(model, n, r_in, r_out, u_in, u_out, &opts)
}

struct Shot {
    s0: f64,
    mismatch: f64,
    solution: Option<RadialSolution>,
}

struct Problem<'a> {
    model: &'a NonlinearityModel,
    n: usize,
    r_in: f64,
    r_out: f64,
    u_in: f64,
    u_out: f64,
    opts: &'a ShootingOptions,
}

impl Problem<'_> {
    fn shoot(&self, s0: f64) -> Result<Shot> {
        let n = self.n;
        let nm1 = n as i32 - 1;
        let radial = &self.opts.radial;
        let mut path = Path::new(n, self.u_in);
        let end = if s0.abs() < 1.0 {
            let y0 = [0.0, s0 * self.r_in.powi(nm1)];
            path.push(self.r_in, y0);
            let h0 = (self.r_out - self.r_in) * 1e-3;
            integrate_segment(self.model, n, self.r_in, y0, self.r_out, radial, h0, &mut path)?
        } else {
            // Vertical tangent at r_in: s = s₀ + s′ρ, u = u_in + s₀√(2ρ/|s′|)
            // to leading order, valid when s′ points back into (−1, 1).
            let limit = match self.model.limit_at_infinity() {
                Some(v) => v,
                None => return Ok(self.blown(s0)),
            };
            let ds = limit - (n as f64 - 1.0) * s0 / self.r_in;
            if s0 * ds >= 0.0 {
                return Ok(self.blown(s0));
            }
            let rho = 1e-12 * self.r_in;
            let x0 = self.r_in + rho;
            let s = s0 + ds * rho;
            let y0 = [
                s0 * (2.0 * rho / ds.abs()).sqrt(),
                s * x0.powi(nm1),
            ];
            path.push(x0, y0);
            integrate_segment(self.model, n, x0, y0, self.r_out, radial, rho, &mut path)?
        };
        let mismatch = match end {
            SegmentEnd::Reached => path.u[path.u.len() - 1] - self.u_out,
            SegmentEnd::Blowup { sign, .. } => sign * f64::INFINITY,
        };
        let solution = path.finish(*self.model, radial, end);
        Ok(Shot {
            s0,
            mismatch,
            solution: Some(solution),
        })
    }

    fn blown(&self, s0: f64) -> Shot {
        Shot {
            s0,
            mismatch: s0.signum() * f64::INFINITY,
            solution: None,
        }
    }

    fn accept(&self, shot: &Shot) -> bool {
        shot.solution.is_some() && shot.mismatch.abs() <= self.opts.rel_tol * (1.0 + self.u_out.abs())
    }

    /// Scan values of s₀ in increasing order.
    fn scan(&self) -> Vec<f64> {
        let m = self.opts.magnitudes.max(2);
        let (lo, hi) = (self.opts.slope_min.ln(), self.opts.slope_max.ln());
        let mags: Vec<f64> = (0..m)
            .map(|k| (lo + (hi - lo) * k as f64 / (m - 1) as f64).exp())
            .map(|w| w / (1.0 + w * w).sqrt())
            .collect();
        let mut s = Vec::with_capacity(2 * m + 3);
        s.push(-1.0);
        s.extend(mags.iter().rev().map(|v| -v));
        s.push(0.0);
        s.extend(mags.iter().copied());
        s.push(1.0);
        s
    }
}

pub fn solve_annulus_bvp_with(
    model: &NonlinearityModel,
    n: usize,
    r_in: f64,
    r_out: f64,
    u_in: f64,
    u_out: f64,
    opts: &ShootingOptions,
) -> Result<ShootingResult> {
    check_dimension(n)?;
    opts.radial.validate()?;
    if !(r_in > 0.0 && r_in < r_out && r_out.is_finite()) {
        return Err(Error::param(format!("need 0 < r_in < r_out, got {r_in}, {r_out}")));
    }
    if !(u_in.is_finite() && u_out.is_finite()) {
        return Err(Error::param("boundary values must be finite"));
    }
    if !(opts.slope_min > 0.0 && opts.slope_min < opts.slope_max && opts.rel_tol > 0.0) {
        return Err(Error::param("invalid shooting scan settings"));
    }
    let problem = Problem {
        model,
        n,
        r_in,
        r_out,
        u_in,
        u_out,
        opts,
    };
    let finish = |shot: Shot, iterations: usize, converged: bool| -> ShootingResult {
        let s0 = shot.s0;
        ShootingResult {
            solution: shot.solution.expect("accepted shots carry a profile"),
            initial_slope: if s0.abs() >= 1.0 {
                s0 * f64::INFINITY
            } else {
                slope_from_ratio(s0)
            },
            boundary_residual: shot.mismatch.abs(),
            iterations,
            converged,
        }
    };

    let mut iterations = 0;
    let mut prev: Option<Shot> = None;
    let mut bracket = None;
    for s0 in problem.scan() {
        let shot = problem.shoot(s0)?;
        iterations += 1;
        if problem.accept(&shot) {
            return Ok(finish(shot, iterations, true));
        }
        if let Some(p) = prev.take() {
            if p.mismatch.signum() != shot.mismatch.signum() {
                bracket = Some((p, shot));
                break;
            }
        }
        prev = Some(shot);
    }
    let (mut a, mut b) = bracket.ok_or_else(|| {
        Error::BracketFailure(format!(
            "boundary mismatch keeps one sign for |w(r_in)| ≤ {}",
            opts.slope_max
        ))
    })?;

    // Illinois variant of regula falsi, falling back to bisection when an
    // endpoint mismatch is infinite.
    let mut side = 0i8;
    let mut fa = a.mismatch;
    let mut fb = b.mismatch;
    for _ in 0..opts.max_iter {
        let s = if fa.is_finite() && fb.is_finite() {
            let t = (a.s0 * fb - b.s0 * fa) / (fb - fa);
            if t > a.s0 && t < b.s0 {
                t
            } else {
                0.5 * (a.s0 + b.s0)
            }
        } else {
            0.5 * (a.s0 + b.s0)
        };
        if !(s > a.s0 && s < b.s0) {
            break;
        }
        let shot = problem.shoot(s)?;
        iterations += 1;
        if problem.accept(&shot) {
            return Ok(finish(shot, iterations, true));
        }
        if shot.mismatch.signum() == a.mismatch.signum() {
            fa = shot.mismatch;
            a = shot;
            if side == -1 {
                fb *= 0.5;
            }
            side = -1;
        } else {
            fb = shot.mismatch;
            b = shot;
            if side == 1 {
                fa *= 0.5;
            }
            side = 1;
        }
    }
    // Return the better finite endpoint, flagged as not converged.
    let best = [a, b]
        .into_iter()
        .filter(|s| s.solution.is_some() && s.mismatch.is_finite())
        .min_by(|x, y| x.mismatch.abs().total_cmp(&y.mismatch.abs()));
    match best {
        Some(shot) => Ok(finish(shot, iterations, false)),
        None => Err(Error::Solver(
            "shooting bracket collapsed onto blow-up trajectories".into(),
        )),
    }
}
