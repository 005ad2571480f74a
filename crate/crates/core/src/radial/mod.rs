//! Radially symmetric solutions in any dimension n ≥ 2.
//!
//! With w = u′ and the flux q = r^{n−1}·w/√(1+w²) the equation becomes the
//! first-order system u′ = w, q′ = r^{n−1}·f̂(w). The flux is the integrated
//! variable because it stays smooth through r = 0, and the flux ratio
//! s = q/r^{n−1} tends to ±1 exactly where |u′| blows up.

mod dopri;
mod shooting;

use std::cell::Cell;
use std::io::Write;

use crate::error::{Error, Result};
use crate::nonlinearity::NonlinearityModel;
use dopri::{next_step, trial_step, State, Trial};

pub use shooting::{solve_annulus_bvp, solve_annulus_bvp_with, ShootingOptions, ShootingResult};

/// Default local error tolerance.
pub const DEFAULT_TOL: f64 = 1e-10;
/// Numerical blow-up threshold: integration stops once |s| ≥ 1 − δ.
pub const DEFAULT_DELTA_BLOW: f64 = 1e-6;
/// Start radius of origin integrations, relative to r_max.
pub const ORIGIN_START: f64 = 1e-6;

/// Integrator settings.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RadialOptions {
    pub tol: f64,
    pub delta_blow: f64,
    /// Largest step as a fraction of the integration interval.
    pub max_step_fraction: f64,
}

impl Default for RadialOptions {
    fn default() -> Self {
        Self {
            tol: DEFAULT_TOL,
            delta_blow: DEFAULT_DELTA_BLOW,
            max_step_fraction: 1.0 / 256.0,
        }
    }
}

impl RadialOptions {
    pub fn with_tol(tol: f64) -> Self {
        Self { tol, ..Self::default() }
    }

    fn validate(&self) -> Result<()> {
        if !(self.tol.is_finite() && self.tol > 0.0) {
            return Err(Error::param(format!("tolerance must be positive, got {}", self.tol)));
        }
        if !(self.delta_blow > 0.0 && self.delta_blow < 1.0) {
            return Err(Error::param(format!(
                "delta_blow must lie in (0, 1), got {}",
                self.delta_blow
            )));
        }
        if !(self.max_step_fraction > 0.0 && self.max_step_fraction <= 1.0) {
            return Err(Error::param("max_step_fraction must lie in (0, 1]"));
        }
        Ok(())
    }
}

/// Integrator bookkeeping attached to a solution.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RadialMeta {
    pub tol: f64,
    pub delta_blow: f64,
    pub accepted_steps: usize,
    pub rejected_steps: usize,
}

/// Sampled radial profile.
#[derive(Debug, Clone)]
pub struct RadialSolution {
    pub n: usize,
    pub model: NonlinearityModel,
    pub r: Vec<f64>,
    pub u: Vec<f64>,
    pub w: Vec<f64>,
    pub q: Vec<f64>,
    pub blowup_radius: Option<f64>,
    pub meta: RadialMeta,
}

impl RadialSolution {
    pub fn len(&self) -> usize {
        self.r.len()
    }

    pub fn is_empty(&self) -> bool {
        self.r.is_empty()
    }

    pub fn r_first(&self) -> f64 {
        self.r[0]
    }

    pub fn r_last(&self) -> f64 {
        self.r[self.r.len() - 1]
    }

    /// Flux ratio s = q/r^{n−1} at node i (the limit at r = 0 is 0).
    pub fn flux_ratio(&self, i: usize) -> f64 {
        flux_ratio(self.n, self.r[i], self.q[i])
    }

    /// w′ at node i from the ODE: w′ = s′/(1−s²)^{3/2}, s′ = f̂(w) − (n−1)s/r.
    pub fn w_prime(&self, i: usize) -> f64 {
        let r = self.r[i];
        let fw = self.model.eval_radial(self.w[i]);
        if r == 0.0 {
            return fw / self.n as f64;
        }
        let s = self.flux_ratio(i);
        let ds = fw - (self.n as f64 - 1.0) * s / r;
        ds / ((1.0 - s) * (1.0 + s)).powf(1.5)
    }

    /// Cubic Hermite interpolation of (u, w) at radius r; `None` outside the
    /// sampled interval.
    pub fn sample(&self, r: f64) -> Option<(f64, f64)> {
        if self.is_empty() || !(r >= self.r_first() && r <= self.r_last()) {
            return None;
        }
        let k = match self.r.partition_point(|&x| x <= r) {
            0 => 0,
            p if p >= self.len() => self.len() - 2,
            p => p - 1,
        };
        if self.len() == 1 {
            return Some((self.u[0], self.w[0]));
        }
        let (r0, r1) = (self.r[k], self.r[k + 1]);
        let h = r1 - r0;
        let t = (r - r0) / h;
        let u = hermite(t, h, self.u[k], self.w[k], self.u[k + 1], self.w[k + 1]);
        let w = hermite(t, h, self.w[k], self.w_prime(k), self.w[k + 1], self.w_prime(k + 1));
        Some((u, w))
    }

    /// Largest |w| over the nodes.
    pub fn max_abs_w(&self) -> f64 {
        self.w.iter().fold(0.0, |m, w| m.max(w.abs()))
    }

    /// Writes the profile as CSV with header `r,u,w,q`.
    pub fn write_csv<W: Write>(&self, mut out: W) -> Result<()> {
        writeln!(out, "r,u,w,q")?;
        for i in 0..self.len() {
            writeln!(
                out,
                "{:.16e},{:.16e},{:.16e},{:.16e}",
                self.r[i], self.u[i], self.w[i], self.q[i]
            )?;
        }
        Ok(())
    }

    pub fn to_csv_string(&self) -> String {
        let mut buf = Vec::new();
        self.write_csv(&mut buf).expect("writing to a Vec cannot fail");
        String::from_utf8(buf).expect("CSV output is ASCII")
    }
}

fn hermite(t: f64, h: f64, y0: f64, d0: f64, y1: f64, d1: f64) -> f64 {
    let t2 = t * t;
    let t3 = t2 * t;
    let h00 = 2.0 * t3 - 3.0 * t2 + 1.0;
    let h10 = t3 - 2.0 * t2 + t;
    let h01 = -2.0 * t3 + 3.0 * t2;
    let h11 = t3 - t2;
    h00 * y0 + h10 * h * d0 + h01 * y1 + h11 * h * d1
}

fn flux_ratio(n: usize, r: f64, q: f64) -> f64 {
    if r == 0.0 {
        0.0
    } else {
        q / r.powi(n as i32 - 1)
    }
}

/// w = s/√(1−s²), factored to keep precision as |s| → 1.
fn slope_from_ratio(s: f64) -> f64 {
    s / ((1.0 - s) * (1.0 + s)).sqrt()
}

/// Returns the recorded blow-up radius R*, where |q/r^{n−1}| first reached 1 − δ.
pub fn detect_blowup(solution: &RadialSolution) -> Option<f64> {
    solution.blowup_radius
}

/// Integrates outward from the axis with u(0) = u0 and default options at
/// local tolerance `tol`.
pub fn integrate_from_origin(
    model: &NonlinearityModel,
    n: usize,
    u0: f64,
    r_max: f64,
    tol: f64,
) -> Result<RadialSolution> {
    integrate_from_origin_with(model, n, u0, r_max, &RadialOptions::with_tol(tol))
}

pub fn integrate_from_origin_with(
    model: &NonlinearityModel,
    n: usize,
    u0: f64,
    r_max: f64,
    opts: &RadialOptions,
) -> Result<RadialSolution> {
    check_dimension(n)?;
    opts.validate()?;
    if !(r_max.is_finite() && r_max > 0.0) {
        return Err(Error::param(format!("r_max must be positive, got {r_max}")));
    }
    if !u0.is_finite() {
        return Err(Error::param("u0 must be finite"));
    }
    let nf = n as f64;
    let f0 = model.eval_radial(0.0);
    if !f0.is_finite() {
        return Err(Error::NonFinite(format!("f(0) = {f0}")));
    }
    // Leading terms of the expansion at the axis: s ≈ f(0)·r/n.
    let r0 = ORIGIN_START * r_max;
    let y0 = [f0 * r0 * r0 / (2.0 * nf), f0 * r0.powi(n as i32) / nf];

    let mut path = Path::new(n, u0);
    path.push(0.0, [0.0, 0.0]);
    path.push(r0, y0);
    let end = integrate_segment(model, n, r0, y0, r_max, opts, r0, &mut path)?;
    Ok(path.finish(*model, opts, end))
}

fn check_dimension(n: usize) -> Result<()> {
    if n < 2 {
        return Err(Error::param(format!("dimension must be at least 2, got {n}")));
    }
    Ok(())
}

/// Accumulated nodes and step counts of one integration. The integrated u
/// is relative to `u_offset`, so shifting the data leaves the step sequence
/// unchanged.
struct Path {
    n: usize,
    u_offset: f64,
    r: Vec<f64>,
    u: Vec<f64>,
    w: Vec<f64>,
    q: Vec<f64>,
    accepted: usize,
    rejected: usize,
}

impl Path {
    fn new(n: usize, u_offset: f64) -> Self {
        Self {
            n,
            u_offset,
            r: Vec::new(),
            u: Vec::new(),
            w: Vec::new(),
            q: Vec::new(),
            accepted: 0,
            rejected: 0,
        }
    }

    fn push(&mut self, r: f64, y: State) {
        self.r.push(r);
        self.u.push(self.u_offset + y[0]);
        self.w.push(slope_from_ratio(flux_ratio(self.n, r, y[1])));
        self.q.push(y[1]);
    }

    fn finish(self, model: NonlinearityModel, opts: &RadialOptions, end: SegmentEnd) -> RadialSolution {
        RadialSolution {
            n: self.n,
            model,
            r: self.r,
            u: self.u,
            w: self.w,
            q: self.q,
            blowup_radius: match end {
                SegmentEnd::Reached => None,
                SegmentEnd::Blowup { radius, .. } => Some(radius),
            },
            meta: RadialMeta {
                tol: opts.tol,
                delta_blow: opts.delta_blow,
                accepted_steps: self.accepted,
                rejected_steps: self.rejected,
            },
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
enum SegmentEnd {
    Reached,
    /// |s| crossed 1 − δ; `sign` is the sign of s there.
    Blowup { radius: f64, sign: f64 },
}

/// Adaptive integration of the (u, q) system from (x0, y0) to x_end.
///
/// Blow-up detection is armed once |s| < 1 − δ, so a start on the vertical
/// branch (|s| ≈ 1) is allowed to move away from it first. `h0` is the first
/// trial step.
fn integrate_segment(
    model: &NonlinearityModel,
    n: usize,
    x0: f64,
    y0: State,
    x_end: f64,
    opts: &RadialOptions,
    h0: f64,
    path: &mut Path,
) -> Result<SegmentEnd> {
    let threshold = 1.0 - opts.delta_blow;
    let nm1 = n as i32 - 1;
    let bad_f = Cell::new(None::<f64>);
    let rhs = |r: f64, y: &State| -> Option<State> {
        let rn1 = r.powi(nm1);
        let s = y[1] / rn1;
        if !(s.abs() < 1.0) {
            return None;
        }
        let w = slope_from_ratio(s);
        let fw = model.eval_radial(w);
        if fw.is_nan() {
            bad_f.set(Some(w));
            return None;
        }
        Some([w, rn1 * fw])
    };
    let ratio = |x: f64, y: &State| y[1] / x.powi(nm1);

    let span = x_end - x0;
    let max_step = opts.max_step_fraction * span;
    let min_step = 1e-15 * x_end.abs().max(1e-300);
    let mut armed = ratio(x0, &y0).abs() < threshold;
    if !armed && ratio(x0, &y0).abs() >= 1.0 {
        return Err(Error::param("initial flux ratio must lie in (−1, 1)"));
    }
    let mut x = x0;
    let mut y = y0;
    let mut h = h0.min(max_step).max(min_step);

    while x < x_end {
        let last = x_end - x <= h;
        let step = if last { x_end - x } else { h };
        match trial_step(&rhs, x, &y, step, opts.tol) {
            Trial::Undefined => {
                if let Some(w) = bad_f.get() {
                    return Err(Error::NonFinite(format!("f evaluated to NaN at |p| = {w}")));
                }
                path.rejected += 1;
                h = 0.25 * step;
                if h < min_step {
                    if armed {
                        // The flux ratio is pinned against 1 without crossing the
                        // threshold within resolvable steps.
                        return Ok(SegmentEnd::Blowup {
                            radius: x,
                            sign: ratio(x, &y).signum(),
                        });
                    }
                    return Err(Error::Solver(format!("step size underflow at r = {x}")));
                }
            }
            Trial::Step { err, .. } if err > 1.0 => {
                path.rejected += 1;
                h = next_step(step, err);
                if h < min_step {
                    return Err(Error::Solver(format!("step size underflow at r = {x}")));
                }
            }
            Trial::Step { y: y_new, err } => {
                let x_new = if last { x_end } else { x + step };
                let s_new = ratio(x_new, &y_new);
                if armed && s_new.abs() >= threshold {
                    return Ok(locate_blowup(&rhs, &ratio, x, y, step, threshold, opts.tol, path));
                }
                path.accepted += 1;
                x = x_new;
                y = y_new;
                path.push(x, y);
                if !armed && s_new.abs() < threshold {
                    armed = true;
                }
                h = next_step(step, err).min(max_step);
            }
        }
    }
    Ok(SegmentEnd::Reached)
}

/// Bisects on the step length for the first radius where |s| ≥ threshold,
/// appending the last sub-threshold state to the path.
#[allow(clippy::too_many_arguments)]
fn locate_blowup<F, G>(
    rhs: &F,
    ratio: &G,
    x: f64,
    y: State,
    step: f64,
    threshold: f64,
    tol: f64,
    path: &mut Path,
) -> SegmentEnd
where
    F: Fn(f64, &State) -> Option<State>,
    G: Fn(f64, &State) -> f64,
{
    let mut lo = 0.0;
    let mut hi = step;
    let mut y_lo = y;
    let mut sign = ratio(x, &y).signum();
    for _ in 0..100 {
        if hi - lo <= 4.0 * f64::EPSILON * (x + hi) {
            break;
        }
        let mid = 0.5 * (lo + hi);
        match trial_step(rhs, x, &y, mid, tol) {
            Trial::Step { y: ym, .. } if ratio(x + mid, &ym).abs() < threshold => {
                lo = mid;
                y_lo = ym;
            }
            Trial::Step { y: ym, .. } => {
                sign = ratio(x + mid, &ym).signum();
                hi = mid;
            }
            Trial::Undefined => hi = mid,
        }
    }
    if lo > 0.0 {
        path.accepted += 1;
        path.push(x + lo, y_lo);
    }
    SegmentEnd::Blowup { radius: x + hi, sign }
}

/// Closed-form radial solutions used as references.
pub mod oracles {
    /// Spherical cap with constant mean-curvature right-hand side H in
    /// dimension n, normalized to u(0) = 0: returns (u(r), u′(r)) while
    /// H·r/n < 1.
    pub fn sphere_cap(h: f64, n: usize, r: f64) -> (f64, f64) {
        let rho = n as f64 / h;
        let u = rho.signum() * (rho.abs() - (rho * rho - r * r).sqrt());
        let w = r / (rho * rho - r * r).sqrt() * rho.signum();
        (u, w)
    }

    /// Catenoid with neck radius c: (c·arccosh(r/c), c/√(r²−c²)) for r ≥ c.
    pub fn catenoid(c: f64, r: f64) -> (f64, f64) {
        (c * (r / c).acosh(), c / (r * r - c * c).sqrt())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_model_gives_flat_profile() {
        let sol = integrate_from_origin(&NonlinearityModel::Zero, 2, 0.0, 1.0, 1e-10).unwrap();
        assert!(sol.u.iter().all(|&u| u == 0.0));
        assert!(sol.w.iter().all(|&w| w == 0.0));
        assert_eq!(detect_blowup(&sol), None);
        assert_eq!(sol.r_last(), 1.0);
    }

    #[test]
    fn sphere_cap_slope_at_unit_radius() {
        let model = NonlinearityModel::constant(1.0).unwrap();
        let sol = integrate_from_origin(&model, 2, -2.0, 1.9, 1e-10).unwrap();
        let (u, w) = sol.sample(1.0).unwrap();
        assert!((w - 1.0 / 3f64.sqrt()).abs() < 1e-9, "w(1) = {w}");
        assert!((u + 3f64.sqrt()).abs() < 1e-9, "u(1) = {u}");
        assert!(sol.blowup_radius.is_none());
    }

    #[test]
    fn nodes_are_increasing_and_consistent() {
        let model = NonlinearityModel::imcf(1.0).unwrap();
        let sol = integrate_from_origin(&model, 3, 0.0, 4.0, 1e-10).unwrap();
        assert!(sol.r.windows(2).all(|p| p[0] < p[1]));
        for i in 0..sol.len() {
            let w = sol.w[i];
            let expected = sol.r[i].powi(2) * w / (1.0 + w * w).sqrt();
            assert!((sol.q[i] - expected).abs() <= 1e-12 * (1.0 + sol.q[i].abs()));
            assert!((w / (1.0 + w * w).sqrt()).abs() < 1.0);
        }
    }

    #[test]
    fn imcf_blows_up_before_flux_bound() {
        let model = NonlinearityModel::imcf(1.0).unwrap();
        let sol = integrate_from_origin(&model, 2, 0.0, 3.0, 1e-10).unwrap();
        let rstar = detect_blowup(&sol).unwrap();
        // q ≥ εrⁿ/n gives R* < n/ε; s′ ≤ 1/√(1−s²) gives R* > π/4.
        assert!(rstar > std::f64::consts::FRAC_PI_4 && rstar < 2.0, "R* = {rstar}");
        let finer = integrate_from_origin(&model, 2, 0.0, 3.0, 5e-11).unwrap();
        assert!((finer.blowup_radius.unwrap() - rstar).abs() < 1e-6);
        assert!(sol.r_last() < rstar);
        assert!(sol.max_abs_w() > 100.0);
    }

    #[test]
    fn constant_blowup_approaches_n_over_h() {
        let model = NonlinearityModel::constant(1.0).unwrap();
        let mut prev = 0.0;
        for delta in [1e-4, 1e-6, 1e-8] {
            let opts = RadialOptions {
                delta_blow: delta,
                ..RadialOptions::default()
            };
            let sol = integrate_from_origin_with(&model, 2, 0.0, 3.0, &opts).unwrap();
            let rstar = sol.blowup_radius.unwrap();
            // H·R*/n = 1 − δ exactly for this first integral.
            assert!((rstar - 2.0 * (1.0 - delta)).abs() < 1e-8, "R* = {rstar}");
            assert!(rstar > prev);
            prev = rstar;
        }
    }

    #[test]
    fn csv_has_header_and_full_precision() {
        let model = NonlinearityModel::constant(0.5).unwrap();
        let sol = integrate_from_origin(&model, 2, 1.0, 1.0, 1e-8).unwrap();
        let csv = sol.to_csv_string();
        let mut lines = csv.lines();
        assert_eq!(lines.next(), Some("r,u,w,q"));
        let row: Vec<f64> = lines
            .nth(1)
            .unwrap()
            .split(',')
            .map(|t| t.parse().unwrap())
            .collect();
        assert_eq!(row, vec![sol.r[1], sol.u[1], sol.w[1], sol.q[1]]);
        assert_eq!(csv.lines().count(), sol.len() + 1);
    }

    #[test]
    fn rejects_bad_arguments() {
        let m = NonlinearityModel::Zero;
        assert!(integrate_from_origin(&m, 1, 0.0, 1.0, 1e-10).is_err());
        assert!(integrate_from_origin(&m, 2, 0.0, -1.0, 1e-10).is_err());
        assert!(integrate_from_origin(&m, 2, 0.0, 1.0, 0.0).is_err());
        assert!(integrate_from_origin(&m, 2, f64::NAN, 1.0, 1e-10).is_err());
    }

    #[test]
    fn sample_outside_range_is_none() {
        let sol = integrate_from_origin(&NonlinearityModel::Zero, 2, 0.0, 1.0, 1e-10).unwrap();
        assert!(sol.sample(-0.1).is_none());
        assert!(sol.sample(1.1).is_none());
        assert_eq!(sol.sample(1.0), Some((0.0, 0.0)));
    }

    #[test]
    fn oracles_match_known_values() {
        let (u, w) = oracles::sphere_cap(1.0, 2, 1.0);
        assert!((u - (2.0 - 3f64.sqrt())).abs() < 1e-15);
        assert!((w - 1.0 / 3f64.sqrt()).abs() < 1e-15);
        let (u, w) = oracles::catenoid(1.0, 2.0);
        assert!((u - 2f64.acosh()).abs() < 1e-15);
        assert!((w - 1.0 / 3f64.sqrt()).abs() < 1e-15);
    }
}
