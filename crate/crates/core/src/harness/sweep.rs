//! Expanding-domain sweeps, Liouville probes and blow-up envelopes.

use rayon::prelude::*;
use serde::Serialize;

use super::boundary::BoundaryData;
use crate::error::{Error, Result};
use crate::estimates::{
    aggregate_constant, bound_value, fit_decay_exponent, grid_node_estimates, oscillation,
    radial_estimates_at, BoundCase, BoundShape, DecayFit, NodeEstimate,
};
use crate::fd2d::{gradient_field, newton_solve, GridField, NewtonOptions, SquareDomain};
use crate::nonlinearity::NonlinearityModel;
use crate::radial::{integrate_from_origin_with, RadialOptions, RadialSolution};

/// Relative slack when comparing a bound with the quantity it bounds.
pub const BOUND_SLACK: f64 = 1e-10;
/// Relative slack for "the minimal constant does not increase with R".
pub const MONOTONE_SLACK: f64 = 1e-6;
/// Evaluation radii per radial instance.
pub const RADIAL_EVAL_POINTS: usize = 512;

/// One solved instance of a sweep.
#[derive(Debug, Clone, PartialEq)]
pub struct Instance {
    /// Domain radius (half-width for squares).
    pub r: f64,
    /// Oscillation over the largest centered ball.
    pub l: f64,
    /// |∇u| (case A) or |∇u|² at the center.
    pub observed: f64,
    /// sup |∇u| over the central half of the domain.
    pub sup_grad: f64,
    /// Per-node inscribed-ball estimates.
    pub nodes: Vec<NodeEstimate>,
    /// Factor turning a raw minimal constant into the compared one.
    pub scale: f64,
    pub converged: bool,
    pub failure: Option<String>,
}

impl Instance {
    /// Failed instance placeholder.
    pub fn failed(r: f64, reason: impl Into<String>) -> Self {
        Self {
            r,
            l: f64::NAN,
            observed: f64::NAN,
            sup_grad: f64::NAN,
            nodes: Vec::new(),
            scale: 1.0,
            converged: false,
            failure: Some(reason.into()),
        }
    }

    /// Scaled per-instance minimal constant (max over nodes).
    pub fn c_min(&self) -> f64 {
        aggregate_constant(&self.nodes) * self.scale
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepRow {
    pub r: f64,
    pub l: f64,
    pub observed: f64,
    pub sup_grad: f64,
    /// Scaled minimal constant.
    pub c_min: f64,
    /// Bound at the center with the suite constant.
    pub bound: f64,
    pub nodes: usize,
    pub violations: usize,
    pub converged: bool,
    pub failure: Option<String>,
}

/// Result of a sweep over domain radii.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepReport {
    pub case: String,
    /// Sorted by R ascending.
    pub rows: Vec<SweepRow>,
    /// Decay slope of sup_grad against R, when at least 3 rows are usable.
    pub slope: Option<f64>,
    pub intercept: Option<f64>,
    /// Suite constant: max of the scaled per-instance minimal constants.
    pub c_star: f64,
    pub degenerate: bool,
}

impl SweepReport {
    /// Builds the report with the suite constant set to the largest scaled
    /// minimal constant, unless `c_fixed` is given.
    pub fn assemble(
        case: BoundCase,
        shape: BoundShape,
        mut instances: Vec<Instance>,
        c_fixed: Option<f64>,
    ) -> Result<Self> {
        instances.sort_by(|a, b| a.r.total_cmp(&b.r));
        let ok: Vec<&Instance> = instances.iter().filter(|i| i.converged).collect();
        let c_star = c_fixed.unwrap_or_else(|| ok.iter().map(|i| i.c_min()).fold(0.0, f64::max));
        let mut rows = Vec::with_capacity(instances.len());
        for inst in &instances {
            let mut violations = 0;
            let mut bound = f64::NAN;
            if inst.converged {
                let c = c_star / inst.scale;
                for n in &inst.nodes {
                    let b = bound_value(case, n.r, n.l, shape, c)?;
                    if b < n.observed * (1.0 - BOUND_SLACK) {
                        violations += 1;
                    }
                }
                bound = bound_value(case, inst.r, inst.l, shape, c)?;
            }
            rows.push(SweepRow {
                r: inst.r,
                l: inst.l,
                observed: inst.observed,
                sup_grad: inst.sup_grad,
                c_min: if inst.converged { inst.c_min() } else { f64::NAN },
                bound,
                nodes: inst.nodes.len(),
                violations,
                converged: inst.converged,
                failure: inst.failure.clone(),
            });
        }
        let pairs: Vec<(f64, f64)> = rows
            .iter()
            .filter(|r| r.converged)
            .map(|r| (r.r, r.sup_grad))
            .collect();
        let fit = fit_decay_exponent(&pairs).ok();
        Ok(Self {
            case: case.to_string(),
            degenerate: fit.is_none(),
            slope: fit.as_ref().map(|f| f.slope),
            intercept: fit.as_ref().map(|f| f.intercept),
            rows,
            c_star,
        })
    }

    pub fn total_violations(&self) -> usize {
        self.rows.iter().map(|r| r.violations).sum()
    }

    /// True when the minimal constants of converged rows never increase with
    /// R beyond the relative slack.
    pub fn min_constant_nonincreasing(&self) -> bool {
        let c: Vec<f64> = self.rows.iter().filter(|r| r.converged).map(|r| r.c_min).collect();
        c.windows(2).all(|w| w[1] <= w[0] * (1.0 + MONOTONE_SLACK))
    }

    /// True when sup_grad strictly decreases along converged rows.
    pub fn sup_grad_decreasing(&self) -> bool {
        let g: Vec<f64> = self.rows.iter().filter(|r| r.converged).map(|r| r.sup_grad).collect();
        g.windows(2).all(|w| w[1] < w[0])
    }

    /// CSV with header `R,L,observed,sup_grad,c_min,bound,nodes,violations,converged`.
    pub fn to_csv(&self) -> String {
        let mut s = String::from("R,L,observed,sup_grad,c_min,bound,nodes,violations,converged\n");
        for r in &self.rows {
            s.push_str(&format!(
                "{:.16e},{:.16e},{:.16e},{:.16e},{:.16e},{:.16e},{},{},{}\n",
                r.r, r.l, r.observed, r.sup_grad, r.c_min, r.bound, r.nodes, r.violations, r.converged
            ));
        }
        s
    }
}

/// Estimates on a converged grid solution: inscribed-ball data at every
/// interior node, center values, and the sup gradient over the central
/// quarter [−R/2, R/2]².
pub fn grid_instance(
    case: BoundCase,
    shape: BoundShape,
    field: &GridField,
    z_min: f64,
) -> Result<Instance> {
    let grad = gradient_field(field)?;
    let nodes = grid_node_estimates(case, field, &grad, shape, z_min)?;
    let r = field.r_dom;
    let (ci, cj) = (field.nx / 2, field.ny / 2);
    let k0 = field.index(ci, cj);
    let center = (field.x(ci), field.y(cj));
    let l = oscillation(field, center, r - center.0.abs().max(center.1.abs()))?;
    // Difference quotients below this level are rounding noise.
    let umax = field.u.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let floor = 16.0 * f64::EPSILON * (1.0 + umax) / field.h;
    let denoise = |g: f64| if g <= floor { 0.0 } else { g };
    let half = 0.5 * r * (1.0 + 1e-12);
    let mut sup: f64 = 0.0;
    for j in 0..field.ny {
        for i in 0..field.nx {
            if field.x(i).abs() <= half && field.y(j).abs() <= half {
                sup = sup.max(denoise(grad.grad_norm(field.index(i, j))));
            }
        }
    }
    Ok(Instance {
        r,
        l,
        observed: case.observed_from_grad(denoise(grad.grad_norm(k0))),
        sup_grad: sup,
        nodes,
        scale: 1.0,
        converged: true,
        failure: None,
    })
}

/// Evenly spaced interior radii of (inner, outer).
pub fn radial_eval_radii(inner: f64, outer: f64, count: usize) -> Vec<f64> {
    (1..count)
        .map(|i| inner + (outer - inner) * i as f64 / count as f64)
        .collect()
}

/// Estimates on a radial profile over inner < r < outer at evenly spaced
/// radii. For a ball (inner = 0) the center values are those at r = 0 and
/// the central ball has radius `outer`; for an annulus they are taken at the
/// mid-radius with half the width as radius.
pub fn radial_instance(
    case: BoundCase,
    shape: BoundShape,
    sol: &RadialSolution,
    inner: f64,
    outer: f64,
    z_min: f64,
) -> Result<Instance> {
    let radii = radial_eval_radii(inner, outer, RADIAL_EVAL_POINTS);
    let nodes = radial_estimates_at(case, sol, inner, outer, shape, z_min, &radii)?;
    let (mid, reach) = if inner > 0.0 {
        (0.5 * (inner + outer), 0.5 * (outer - inner))
    } else {
        (0.0, outer)
    };
    let w_center = sol
        .sample(mid)
        .map(|s| s.1)
        .ok_or_else(|| Error::param("profile does not cover the center"))?;
    let l = crate::estimates::oscillation_radial(sol, mid, reach)?;
    // Central half: |r − mid| ≤ reach/2.
    let sup = radii
        .iter()
        .filter(|&&r| (r - mid).abs() <= 0.5 * reach)
        .filter_map(|&r| sol.sample(r))
        .map(|s| s.1.abs())
        .chain(std::iter::once(w_center.abs()))
        .fold(0.0, f64::max);
    Ok(Instance {
        r: outer - inner,
        l,
        observed: case.observed_from_grad(w_center.abs()),
        sup_grad: sup,
        nodes,
        scale: 1.0,
        converged: true,
        failure: None,
    })
}

/// Runs `f` over `items` on a pool of `jobs` threads (0 = rayon default),
/// keeping the input order.
pub fn run_parallel<T: Sync, U: Send>(
    items: &[T],
    jobs: usize,
    f: impl Fn(&T) -> U + Sync + Send,
) -> Result<Vec<U>> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(jobs)
        .build()
        .map_err(|e| Error::param(format!("cannot build thread pool: {e}")))?;
    Ok(pool.install(|| items.par_iter().map(&f).collect()))
}

/// Solves the 2-D Dirichlet problem for each radius and evaluates it.
#[allow(clippy::too_many_arguments)]
pub fn grid_sweep(
    model: &NonlinearityModel,
    data: &BoundaryData,
    radii: &[f64],
    nx: usize,
    case: BoundCase,
    shape: BoundShape,
    z_min: f64,
    newton: &NewtonOptions,
    jobs: usize,
) -> Result<Vec<Instance>> {
    let results = run_parallel(radii, jobs, |&r| -> Result<Instance> {
        let domain = SquareDomain::new(r, nx)?;
        let sol = match newton_solve(model, &domain, data.function(r), newton) {
            Ok(s) => s,
            Err(e @ (Error::Solver(_) | Error::NonFinite(_))) => {
                return Ok(Instance::failed(r, e.to_string()))
            }
            Err(e) => return Err(e),
        };
        if !sol.converged {
            return Ok(Instance::failed(
                r,
                sol.failure.unwrap_or_else(|| "no convergence".into()),
            ));
        }
        grid_instance(case, shape, &sol.field, z_min)
    })?;
    results.into_iter().collect()
}

/// Liouville probe: solves on squares of half-width R with fixed boundary
/// data and tracks the sup gradient over the central quarter.
pub fn liouville_probe(
    model: &NonlinearityModel,
    data: &BoundaryData,
    radii: &[f64],
    nx: usize,
    jobs: usize,
) -> Result<SweepReport> {
    let instances = grid_sweep(
        model,
        data,
        radii,
        nx,
        BoundCase::E,
        BoundShape::default(),
        crate::bernstein::DEFAULT_Z_MIN,
        &NewtonOptions::default(),
        jobs,
    )?;
    SweepReport::assemble(BoundCase::E, BoundShape::default(), instances, None)
}

/// Radial Liouville probe: profiles from the origin with center value u0,
/// evaluated on balls of radius R.
pub fn radial_liouville_probe(
    model: &NonlinearityModel,
    n: usize,
    u0: f64,
    radii: &[f64],
    opts: &RadialOptions,
) -> Result<SweepReport> {
    let r_max = radii.iter().copied().fold(0.0, f64::max);
    let sol = integrate_from_origin_with(model, n, u0, r_max, opts)?;
    let mut instances = Vec::new();
    for &r in radii {
        if r > sol.r_last() {
            instances.push(Instance::failed(r, "profile blew up before R"));
            continue;
        }
        instances.push(radial_instance(BoundCase::E, BoundShape::default(), &sol, 0.0, r, 0.0)?);
    }
    SweepReport::assemble(BoundCase::E, BoundShape::default(), instances, None)
}

/// |u′| against the distance to the blow-up radius.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BlowupEnvelope {
    pub r_star: f64,
    /// (R* − r, |u′(r)|) over the window, sorted by distance.
    pub pairs: Vec<(f64, f64)>,
    /// max |u′|·(R* − r) over the window.
    pub c_star: f64,
    pub slope: f64,
    pub intercept: f64,
}

/// Default window of relative distances (R* − r)/R*.
pub const ENVELOPE_WINDOW: (f64, f64) = (1e-6, 1e-2);

/// Integrates from the origin until blow-up and fits |u′| ~ (R* − r)^slope
/// over solver nodes with relative distance in `window`.
pub fn blowup_envelope(
    model: &NonlinearityModel,
    n: usize,
    u0: f64,
    r_max: f64,
    window: (f64, f64),
    opts: &RadialOptions,
) -> Result<BlowupEnvelope> {
    let sol = integrate_from_origin_with(model, n, u0, r_max, opts)?;
    let r_star = sol
        .blowup_radius
        .ok_or_else(|| Error::Degenerate(format!("no blow-up before r = {r_max}")))?;
    let (lo, hi) = (window.0 * r_star, window.1 * r_star);
    let pairs: Vec<(f64, f64)> = sol
        .r
        .iter()
        .zip(&sol.w)
        .map(|(&r, &w)| (r_star - r, w.abs()))
        .filter(|&(d, _)| d >= lo && d <= hi)
        .collect();
    let fit: DecayFit = fit_decay_exponent(&pairs)?;
    let c_star = fit.pairs.iter().map(|&(d, w)| d * w).fold(0.0, f64::max);
    Ok(BlowupEnvelope {
        r_star,
        c_star,
        slope: fit.slope,
        intercept: fit.intercept,
        pairs: fit.pairs,
    })
}
