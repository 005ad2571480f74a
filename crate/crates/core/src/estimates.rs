//! Interior gradient bounds: formula evaluation, oscillation, minimal
//! constants and decay-exponent fits.
//!
//! Cases A and C-lin bound |∇u(0)|; the others bound |∇u(0)|². Every
//! "exp(·) − 1" term is evaluated with `exp_m1` so that the bound and its
//! inversion through `ln_1p` round-trip at small arguments.

use std::fmt;
use std::io::Write;
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::fd2d::{GradientField, GridField};
use crate::radial::RadialSolution;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum BoundCase {
    /// |∇u(0)| ≤ C/R^{1/θ}
    A,
    /// |∇u(0)|² ≤ C·max{exp(R^{−1/(θ−1)})−1, R^{−2/(2θ−1)}}
    B,
    /// |∇u(0)|² ≤ max{exp(C₁a₁)−1, exp(C₂a₂)−1},
    /// a₁ = (L+1)^{1/(2θ)}/R^{1/θ}, a₂ = (L+1)^{1/(1−η)}/R^{2/(1−η)}
    CSq,
    /// |∇u(0)| ≤ max{C₁a₁, C₂a₂} with a₁, a₂ as in `CSq`
    CLin,
    /// |∇u(0)|² ≤ max{exp(C(L+1)²/R²)−1, exp(C(L+1)²/R^{2/3})−1}
    D,
    /// |∇u(0)|² ≤ max{exp(CL²/R²)−1, exp(CL/R)−1}
    E,
}

impl BoundCase {
    pub const ALL: [BoundCase; 6] = [Self::A, Self::B, Self::CSq, Self::CLin, Self::D, Self::E];

    /// Whether the bound is on |∇u|² rather than |∇u|.
    pub fn bounds_square(self) -> bool {
        !matches!(self, Self::A | Self::CLin)
    }

    pub fn uses_oscillation(self) -> bool {
        matches!(self, Self::CSq | Self::CLin | Self::D | Self::E)
    }

    /// The bounded quantity for a gradient norm |∇u| = g.
    pub fn observed_from_grad(self, g: f64) -> f64 {
        if self.bounds_square() {
            g * g
        } else {
            g
        }
    }
}

impl fmt::Display for BoundCase {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::A => "A",
            Self::B => "B",
            Self::CSq => "C-sq",
            Self::CLin => "C-lin",
            Self::D => "D",
            Self::E => "E",
        })
    }
}

impl FromStr for BoundCase {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_uppercase().as_str() {
            "A" => Ok(Self::A),
            "B" => Ok(Self::B),
            "C" | "C-SQ" | "CSQ" => Ok(Self::CSq),
            "C-LIN" | "CLIN" => Ok(Self::CLin),
            "D" => Ok(Self::D),
            "E" => Ok(Self::E),
            _ => Err(Error::param(format!("unknown bound case `{s}`"))),
        }
    }
}

/// Exponents that fix the shape of a bound: θ (cases A, B, C) and η (case C).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BoundShape {
    pub theta: f64,
    pub eta: f64,
}

impl BoundShape {
    pub fn new(theta: f64, eta: f64) -> Self {
        Self { theta, eta }
    }

    pub fn validate(&self, case: BoundCase) -> Result<()> {
        let t = self.theta;
        match case {
            BoundCase::A if !(t.is_finite() && t > 0.0) => {
                Err(Error::param(format!("case A needs θ > 0, got {t}")))
            }
            BoundCase::B if !(t.is_finite() && t > 1.0) => {
                Err(Error::param(format!("case B needs θ > 1, got {t}")))
            }
            BoundCase::CSq | BoundCase::CLin => {
                if !(t > 0.0 && t <= 1.0) {
                    return Err(Error::param(format!("case C needs θ ∈ (0, 1], got {t}")));
                }
                if !(self.eta > 0.0 && self.eta < 1.0) {
                    return Err(Error::param(format!("case C needs η ∈ (0, 1), got {}", self.eta)));
                }
                Ok(())
            }
            _ => Ok(()),
        }
    }
}

impl Default for BoundShape {
    fn default() -> Self {
        Self { theta: 1.0, eta: 0.5 }
    }
}

/// A fully specified bound and its value.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BoundEvaluation {
    pub case: BoundCase,
    pub r: f64,
    pub l: f64,
    pub shape: BoundShape,
    pub c1: f64,
    /// Second constant of case C; equals `c1` elsewhere.
    pub c2: f64,
    pub value: f64,
}

impl BoundEvaluation {
    pub fn new(case: BoundCase, r: f64, l: f64, shape: BoundShape, c1: f64, c2: f64) -> Result<Self> {
        let value = bound_value_pair(case, r, l, shape, c1, c2)?;
        Ok(Self { case, r, l, shape, c1, c2, value })
    }
}

fn check_common(case: BoundCase, r: f64, l: f64, shape: BoundShape) -> Result<()> {
    if !(r.is_finite() && r > 0.0) {
        return Err(Error::param(format!("ball radius must be positive, got {r}")));
    }
    if case.uses_oscillation() && !(l.is_finite() && l >= 0.0) {
        return Err(Error::param(format!("oscillation must be ≥ 0, got {l}")));
    }
    shape.validate(case)
}

/// The R- and L-dependent factors multiplying the constant(s), i.e. the
/// bound with C = 1 inside each branch.
fn branch_arguments(case: BoundCase, r: f64, l: f64, shape: BoundShape) -> (f64, f64) {
    let t = shape.theta;
    let eta = shape.eta;
    match case {
        BoundCase::A => {
            let a = r.powf(-1.0 / t);
            (a, a)
        }
        BoundCase::B => ((r.powf(-1.0 / (t - 1.0))).exp_m1(), r.powf(-2.0 / (2.0 * t - 1.0))),
        BoundCase::CSq | BoundCase::CLin => (
            (l + 1.0).powf(1.0 / (2.0 * t)) / r.powf(1.0 / t),
            (l + 1.0).powf(1.0 / (1.0 - eta)) / r.powf(2.0 / (1.0 - eta)),
        ),
        BoundCase::D => {
            let l2 = (l + 1.0) * (l + 1.0);
            (l2 / (r * r), l2 / r.powf(2.0 / 3.0))
        }
        BoundCase::E => (l * l / (r * r), l / r),
    }
}

/// Bound value with a single constant (C₁ = C₂ = C in case C).
pub fn bound_value(case: BoundCase, r: f64, l: f64, shape: BoundShape, c: f64) -> Result<f64> {
    bound_value_pair(case, r, l, shape, c, c)
}

pub fn bound_value_pair(
    case: BoundCase,
    r: f64,
    l: f64,
    shape: BoundShape,
    c1: f64,
    c2: f64,
) -> Result<f64> {
    check_common(case, r, l, shape)?;
    if !(c1 >= 0.0 && c2 >= 0.0) || c1.is_nan() || c2.is_nan() {
        return Err(Error::param("constants must be non-negative"));
    }
    let (a1, a2) = branch_arguments(case, r, l, shape);
    Ok(match case {
        BoundCase::A => c1 * a1,
        BoundCase::B => c1 * a1.max(a2),
        BoundCase::CLin => (c1 * a1).max(c2 * a2),
        BoundCase::CSq | BoundCase::D | BoundCase::E => (c1 * a1).exp_m1().max((c2 * a2).exp_m1()),
    })
}

/// Smallest C (with C₁ = C₂ = C in case C) such that the bound is at least
/// `observed`. Returns +∞ when no finite constant works (e.g. case E with
/// L = 0 and a non-zero observation).
pub fn min_constant(case: BoundCase, observed: f64, r: f64, l: f64, shape: BoundShape) -> Result<f64> {
    check_common(case, r, l, shape)?;
    if !(observed >= 0.0) {
        return Err(Error::param(format!("observed quantity must be ≥ 0, got {observed}")));
    }
    if observed == 0.0 {
        return Ok(0.0);
    }
    let (a1, a2) = branch_arguments(case, r, l, shape);
    let scale = a1.max(a2);
    let target = match case {
        BoundCase::A | BoundCase::B | BoundCase::CLin => observed,
        BoundCase::CSq | BoundCase::D | BoundCase::E => observed.ln_1p(),
    };
    if scale == 0.0 {
        return Ok(f64::INFINITY);
    }
    Ok(target / scale)
}

/// Oscillation max − min of the nodal values in the closed disk.
pub fn oscillation(field: &GridField, center: (f64, f64), radius: f64) -> Result<f64> {
    if !(radius >= 0.0 && radius.is_finite()) {
        return Err(Error::param(format!("radius must be ≥ 0, got {radius}")));
    }
    let slack = 1e-12 * (field.r_dom + radius);
    let (cx, cy) = center;
    if cx - radius < -field.r_dom - slack
        || cx + radius > field.r_dom + slack
        || cy - radius < -field.r_dom - slack
        || cy + radius > field.r_dom + slack
    {
        return Err(Error::param("ball is not contained in the grid domain"));
    }
    let r2 = radius * radius + slack;
    let mut lo = f64::INFINITY;
    let mut hi = f64::NEG_INFINITY;
    for j in 0..field.ny {
        let dy = field.y(j) - cy;
        for i in 0..field.nx {
            let dx = field.x(i) - cx;
            if dx * dx + dy * dy <= r2 {
                let v = field.at(i, j);
                lo = lo.min(v);
                hi = hi.max(v);
            }
        }
    }
    if lo > hi {
        return Err(Error::Degenerate("no grid node inside the ball".into()));
    }
    Ok(hi - lo)
}

/// Oscillation of a radial profile over r ∈ [r0 − radius, r0 + radius]
/// (clipped at 0), with interpolated endpoint values.
pub fn oscillation_radial(sol: &RadialSolution, r0: f64, radius: f64) -> Result<f64> {
    if !(radius >= 0.0) {
        return Err(Error::param(format!("radius must be ≥ 0, got {radius}")));
    }
    let tol = 1e-12 * (1.0 + (r0 + radius).abs());
    let a = (r0 - radius).max(0.0);
    let b = r0 + radius;
    if a < sol.r_first() - tol || b > sol.r_last() + tol {
        return Err(Error::param("interval is not covered by the profile"));
    }
    let a = a.max(sol.r_first());
    let b = b.min(sol.r_last());
    let ua = sol.sample(a).map(|s| s.0).ok_or_else(|| Error::param("interval start outside profile"))?;
    let ub = sol.sample(b).map(|s| s.0).ok_or_else(|| Error::param("interval end outside profile"))?;
    let (mut lo, mut hi) = (ua.min(ub), ua.max(ub));
    for (r, u) in sol.r.iter().zip(&sol.u) {
        if *r > a && *r < b {
            lo = lo.min(*u);
            hi = hi.max(*u);
        }
    }
    Ok(hi - lo)
}

/// Row-wise sparse tables giving O(1) min/max over node ranges, so the
/// oscillation on every inscribed disk of a grid costs O(rows) per node.
pub struct DiskOscillation<'a> {
    field: &'a GridField,
    // levels[k][j·nx + i] covers nodes i .. i + 2^k − 1 of row j
    min_levels: Vec<Vec<f64>>,
    max_levels: Vec<Vec<f64>>,
}

impl<'a> DiskOscillation<'a> {
    pub fn new(field: &'a GridField) -> Self {
        let nx = field.nx;
        let mut min_levels = vec![field.u.clone()];
        let mut max_levels = vec![field.u.clone()];
        let mut span = 1;
        while 2 * span <= nx {
            let (pmin, pmax) = (&min_levels[min_levels.len() - 1], &max_levels[max_levels.len() - 1]);
            let mut nmin = pmin.clone();
            let mut nmax = pmax.clone();
            for j in 0..field.ny {
                for i in 0..=nx - 2 * span {
                    let k = j * nx + i;
                    nmin[k] = pmin[k].min(pmin[k + span]);
                    nmax[k] = pmax[k].max(pmax[k + span]);
                }
            }
            min_levels.push(nmin);
            max_levels.push(nmax);
            span *= 2;
        }
        Self {
            field,
            min_levels,
            max_levels,
        }
    }

    fn row_range(&self, j: usize, i0: usize, i1: usize) -> (f64, f64) {
        let len = i1 - i0 + 1;
        let k = (usize::BITS - 1 - len.leading_zeros()) as usize;
        let nx = self.field.nx;
        let a = j * nx + i0;
        let b = j * nx + i1 + 1 - (1 << k);
        (
            self.min_levels[k][a].min(self.min_levels[k][b]),
            self.max_levels[k][a].max(self.max_levels[k][b]),
        )
    }

    /// Oscillation over nodes within distance `radius` of node (i, j).
    pub fn at_node(&self, i: usize, j: usize, radius: f64) -> f64 {
        let f = self.field;
        let h = f.h;
        let reach = ((radius / h) * (1.0 + 1e-12)).floor() as usize;
        let mut lo = f64::INFINITY;
        let mut hi = f64::NEG_INFINITY;
        let j0 = j.saturating_sub(reach);
        let j1 = (j + reach).min(f.ny - 1);
        for jj in j0..=j1 {
            let dy = (jj as f64 - j as f64) * h;
            let rem = radius * radius * (1.0 + 1e-12) - dy * dy;
            if rem < 0.0 {
                continue;
            }
            let w = (rem.sqrt() / h).floor() as usize;
            let i0 = i.saturating_sub(w);
            let i1 = (i + w).min(f.nx - 1);
            let (a, b) = self.row_range(jj, i0, i1);
            lo = lo.min(a);
            hi = hi.max(b);
        }
        hi - lo
    }
}

/// Per-node data of an inscribed-ball evaluation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NodeEstimate {
    /// Node index (row-major for grids, profile index for radial solutions).
    pub index: usize,
    /// Inscribed-ball radius.
    pub r: f64,
    pub l: f64,
    /// |∇u| or |∇u|² depending on the case.
    pub observed: f64,
    pub c_min: f64,
}

/// Inscribed-ball data at every interior grid node whose z exceeds `z_min`.
/// The ball radius is the distance to the square's boundary.
pub fn grid_node_estimates(
    case: BoundCase,
    field: &GridField,
    grad: &GradientField,
    shape: BoundShape,
    z_min: f64,
) -> Result<Vec<NodeEstimate>> {
    if grad.z.len() != field.u.len() {
        return Err(Error::DimensionMismatch {
            expected: field.u.len(),
            actual: grad.z.len(),
        });
    }
    let osc = DiskOscillation::new(field);
    let mut out = Vec::new();
    for j in 1..field.ny - 1 {
        for i in 1..field.nx - 1 {
            let k = field.index(i, j);
            let z = grad.z[k];
            if !(z > z_min) {
                continue;
            }
            let (x, y) = (field.x(i), field.y(j));
            let r = (field.r_dom - x.abs()).min(field.r_dom - y.abs());
            let l = if case.uses_oscillation() { osc.at_node(i, j, r) } else { 0.0 };
            let observed = case.observed_from_grad(z.sqrt());
            let c_min = min_constant(case, observed, r, l, shape)?;
            out.push(NodeEstimate { index: k, r, l, observed, c_min });
        }
    }
    Ok(out)
}

/// Inscribed-ball data along a radial profile on the domain
/// inner < |x| < outer (inner = 0 for a full ball).
pub fn radial_node_estimates(
    case: BoundCase,
    sol: &RadialSolution,
    inner: f64,
    outer: f64,
    shape: BoundShape,
    z_min: f64,
) -> Result<Vec<NodeEstimate>> {
    let nodes = sol.r.iter().zip(&sol.w).map(|(&r, &w)| (r, w));
    radial_estimates_from(case, sol, inner, outer, shape, z_min, nodes)
}

/// Like [`radial_node_estimates`], at the given radii instead of the solver
/// nodes, with w interpolated. `index` is the position in `radii`; radii
/// outside the profile are skipped.
pub fn radial_estimates_at(
    case: BoundCase,
    sol: &RadialSolution,
    inner: f64,
    outer: f64,
    shape: BoundShape,
    z_min: f64,
    radii: &[f64],
) -> Result<Vec<NodeEstimate>> {
    let nodes = radii
        .iter()
        .map(|&r| (r, sol.sample(r).map_or(f64::NAN, |s| s.1)));
    radial_estimates_from(case, sol, inner, outer, shape, z_min, nodes)
}

fn radial_estimates_from(
    case: BoundCase,
    sol: &RadialSolution,
    inner: f64,
    outer: f64,
    shape: BoundShape,
    z_min: f64,
    nodes: impl Iterator<Item = (f64, f64)>,
) -> Result<Vec<NodeEstimate>> {
    let mut out = Vec::new();
    for (k, (r0, w)) in nodes.enumerate() {
        let r = if inner > 0.0 { (r0 - inner).min(outer - r0) } else { outer - r0 };
        if !(r > 0.0) || !(w * w > z_min) {
            continue;
        }
        let l = if case.uses_oscillation() {
            oscillation_radial(sol, r0, r)?
        } else {
            0.0
        };
        let observed = case.observed_from_grad(w.abs());
        let c_min = min_constant(case, observed, r, l, shape)?;
        out.push(NodeEstimate { index: k, r, l, observed, c_min });
    }
    Ok(out)
}

/// Largest per-node minimal constant (0 for an empty set).
pub fn aggregate_constant(nodes: &[NodeEstimate]) -> f64 {
    nodes.iter().fold(0.0, |m, n| m.max(n.c_min))
}

/// Least-squares fit of log g = slope·log R + intercept.
#[derive(Debug, Clone, PartialEq)]
pub struct DecayFit {
    /// Pairs used in the fit, sorted by R.
    pub pairs: Vec<(f64, f64)>,
    /// Pairs dropped because g ≤ 0 or a value was not finite.
    pub excluded: Vec<(f64, f64)>,
    pub slope: f64,
    pub intercept: f64,
    pub max_abs_residual: f64,
}

pub fn fit_decay_exponent(pairs: &[(f64, f64)]) -> Result<DecayFit> {
    let (mut used, excluded): (Vec<_>, Vec<_>) = pairs
        .iter()
        .copied()
        .partition(|&(r, g)| r.is_finite() && r > 0.0 && g.is_finite() && g > 0.0);
    if used.len() < 3 {
        return Err(Error::Degenerate(format!(
            "need at least 3 pairs with R, g > 0, have {}",
            used.len()
        )));
    }
    // Sorting makes the result independent of input order, bit for bit.
    used.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.total_cmp(&b.1)));
    let xs: Vec<f64> = used.iter().map(|p| p.0.ln()).collect();
    let ys: Vec<f64> = used.iter().map(|p| p.1.ln()).collect();
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxx: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
    if sxx == 0.0 {
        return Err(Error::Degenerate("all R values coincide".into()));
    }
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let max_abs_residual = xs
        .iter()
        .zip(&ys)
        .map(|(x, y)| (y - intercept - slope * x).abs())
        .fold(0.0, f64::max);
    Ok(DecayFit {
        pairs: used,
        excluded,
        slope,
        intercept,
        max_abs_residual,
    })
}

/// One line of a bound report.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BoundRow {
    pub case: BoundCase,
    pub r: f64,
    pub l: f64,
    pub theta: f64,
    pub eta: f64,
    pub c: f64,
    pub bound: f64,
    pub observed: f64,
}

impl BoundRow {
    pub fn margin(&self) -> f64 {
        self.bound - self.observed
    }
}

/// CSV with header `case,R,L,theta,eta,C,bound,observed,margin`.
pub fn write_bound_csv<W: Write>(rows: &[BoundRow], mut out: W) -> Result<()> {
    writeln!(out, "case,R,L,theta,eta,C,bound,observed,margin")?;
    for r in rows {
        writeln!(
            out,
            "{},{:.16e},{:.16e},{:.16e},{:.16e},{:.16e},{:.16e},{:.16e},{:.16e}",
            r.case,
            r.r,
            r.l,
            r.theta,
            r.eta,
            r.c,
            r.bound,
            r.observed,
            r.margin()
        )?;
    }
    Ok(())
}
