//! Discrete check of the maximum-principle inequality behind the gradient
//! bounds.
//!
//! For an auxiliary function P = h(u)·F(z)·φ(x) on the ball B_R(center), the
//! terms I₁ … I₉ are evaluated at the grid node where P is largest and the
//! inequality I₁+…+I₅ ≤ I₆+…+I₉ is reported as margin = rhs − lhs. The gradient
//! of z enters only through the stationarity substitution
//! ∇z = −(F/F′)(∇φ/φ + (h′/h)∇u).

use std::fmt;
use std::str::FromStr;

use serde_json::{json, Value};
use twofloat::TwoFloat;

use crate::error::{Error, Result};
use crate::fd2d::{gradient_field, GridField};
use crate::nonlinearity::NonlinearityModel;

/// Default critical-set exclusion threshold on z.
pub const DEFAULT_Z_MIN: f64 = 1e-6;

/// Gradient profile F(z).
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FProfile {
    /// F = z
    Z,
    /// F = log(1 + z)
    Log1pZ,
}

impl FProfile {
    /// (F, F′, F″) at z.
    pub fn derivatives(self, z: f64) -> (f64, f64, f64) {
        match self {
            Self::Z => (z, 1.0, 0.0),
            Self::Log1pZ => {
                let w = 1.0 + z;
                (z.ln_1p(), 1.0 / w, -1.0 / (w * w))
            }
        }
    }

    /// (F, (1+z)F′, (1+z)²F″) in double-double. Both profiles give exact
    /// polynomial expressions in this scaling, so no division is needed.
    fn scaled_dd(self, z: f64) -> (TwoFloat, TwoFloat, TwoFloat) {
        match self {
            Self::Z => (TwoFloat::from(z), TwoFloat::new_add(1.0, z), TwoFloat::from(0.0)),
            Self::Log1pZ => (TwoFloat::from(z.ln_1p()), TwoFloat::from(1.0), TwoFloat::from(-1.0)),
        }
    }

    /// F/F′
    pub fn ratio(self, z: f64) -> f64 {
        match self {
            Self::Z => z,
            Self::Log1pZ => (1.0 + z) * z.ln_1p(),
        }
    }
}

impl fmt::Display for FProfile {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::Z => "z",
            Self::Log1pZ => "log1pz",
        })
    }
}

impl FromStr for FProfile {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "z" | "Z" => Ok(Self::Z),
            "log1pz" | "Log1pZ" | "log1p" => Ok(Self::Log1pZ),
            other => Err(Error::param(format!("unknown F profile `{other}`"))),
        }
    }
}

/// Weight h(u).
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Weight {
    /// h ≡ 1
    One,
    /// h = (u + M − 2m + 1)^{−1/b} with `plus_one`, else (u + M − 2m)^{−1/b}.
    Power { b: f64, plus_one: bool },
}

impl fmt::Display for Weight {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match *self {
            Self::One => f.write_str("one"),
            Self::Power { b, plus_one: true } => write!(f, "power:{b},plus1"),
            Self::Power { b, plus_one: false } => write!(f, "power:{b}"),
        }
    }
}

impl FromStr for Weight {
    type Err = Error;

    /// `one`, `power:b` or `power:b,plus1`.
    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        if s == "one" {
            return Ok(Self::One);
        }
        let bad = || Error::param(format!("bad weight `{s}`"));
        let rest = s.strip_prefix("power:").ok_or_else(bad)?;
        let (b, plus_one) = match rest.split_once(',') {
            Some((b, "plus1")) => (b, true),
            Some(_) => return Err(bad()),
            None => (rest, false),
        };
        let b: f64 = b.trim().parse().map_err(|_| bad())?;
        if !(b.is_finite() && b > 0.0) {
            return Err(bad());
        }
        Ok(Self::Power { b, plus_one })
    }
}

/// Choices defining the auxiliary function.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AuxConfig {
    pub f: FProfile,
    pub h: Weight,
    pub alpha: f64,
    pub z_min: f64,
}

impl AuxConfig {
    pub fn new(f: FProfile, h: Weight, alpha: f64) -> Self {
        Self {
            f,
            h,
            alpha,
            z_min: DEFAULT_Z_MIN,
        }
    }

    pub fn to_json(&self) -> Value {
        json!({
            "F": self.f.to_string(),
            "h": self.h.to_string(),
            "alpha": self.alpha,
            "z_min": self.z_min,
        })
    }

    fn validate(&self) -> Result<()> {
        if !(self.alpha >= 1.0 && self.alpha.is_finite()) {
            return Err(Error::param(format!("alpha must be ≥ 1, got {}", self.alpha)));
        }
        if !(self.z_min >= 0.0) {
            return Err(Error::param("z_min must be ≥ 0"));
        }
        if let Weight::Power { b, .. } = self.h {
            if !(b > 0.0 && b.is_finite()) {
                return Err(Error::param(format!("weight exponent b must be positive, got {b}")));
            }
        }
        Ok(())
    }
}

/// Cutoff exponent used by the argument for each bound case:
/// A: max{2/θ, 1}; B: max{1/(θ−1), 1}; C, D, E: 2.
pub fn default_alpha(case: crate::estimates::BoundCase, theta: f64) -> f64 {
    use crate::estimates::BoundCase;
    match case {
        BoundCase::A => (2.0 / theta).max(1.0),
        BoundCase::B => (1.0 / (theta - 1.0)).max(1.0),
        _ => 2.0,
    }
}

/// φ = (1 − |x|²/R²)^α and ∇φ = −2α(1 − |x|²/R²)^{α−1}·x/R², with x
/// relative to the ball center.
pub fn cutoff_phi(x: &[f64], r: f64, alpha: f64) -> Result<(f64, Vec<f64>)> {
    if !(r > 0.0) {
        return Err(Error::param(format!("ball radius must be positive, got {r}")));
    }
    let s = 1.0 - x.iter().map(|v| v * v).sum::<f64>() / (r * r);
    if s < 0.0 {
        return Err(Error::param("point lies outside the ball"));
    }
    let phi = s.powf(alpha);
    let coef = if s == 0.0 && alpha < 1.0 + 1e-15 {
        -2.0 * alpha / (r * r)
    } else {
        -2.0 * alpha * s.powf(alpha - 1.0) / (r * r)
    };
    Ok((phi, x.iter().map(|v| coef * v).collect()))
}

/// (h, h′/h, h″/h) at u, with M = sup u and m = inf u over the ball.
pub fn weight_h(u: f64, weight: Weight, big_m: f64, small_m: f64) -> Result<(f64, f64, f64)> {
    match weight {
        Weight::One => Ok((1.0, 0.0, 0.0)),
        Weight::Power { b, plus_one } => {
            let t = u + big_m - 2.0 * small_m + if plus_one { 1.0 } else { 0.0 };
            if !(t > 0.0) {
                return Err(Error::Degenerate(format!(
                    "weight base u + M − 2m{} = {t} is not positive",
                    if plus_one { " + 1" } else { "" }
                )));
            }
            let h = t.powf(-1.0 / b);
            Ok((h, -1.0 / (b * t), (b + 1.0) / (b * b * t * t)))
        }
    }
}

/// G = F″/F − F′²/F² + (3+2z)/(2(1+z)²)·F′/F and
/// H = −F″/F + F′²/F² − F′/((1+z)F).
///
/// With w = 1+z, A = F, B = wF′, C = w²F″ these become
/// G = (2w(CA − B²) + (3+2z)AB)/(2w³A²) and H = (B² − CA − AB)/(w²A²).
/// The numerators cancel strongly for large z, so they are formed in
/// double-double arithmetic and divided once.
pub fn coefficients_gh(f: FProfile, z: f64) -> Result<(f64, f64)> {
    if !(z > 0.0 && z.is_finite()) {
        return Err(Error::param(format!("G and H need z > 0, got {z}")));
    }
    let (a, b, c) = f.scaled_dd(z);
    let w = TwoFloat::new_add(1.0, z);
    let two = TwoFloat::from(2.0);
    let k = c * a - b * b;
    let a2 = a * a;
    let g_num = two * w * k + (TwoFloat::from(3.0) + two * TwoFloat::from(z)) * a * b;
    let h_num = -k - a * b;
    let g = g_num / (two * w * w * w * a2);
    let h = h_num / (w * w * a2);
    Ok((g.hi(), h.hi()))
}

/// Pointwise inputs of the I-terms.
#[derive(Debug, Clone, PartialEq)]
pub struct PointData {
    /// Dimension entering I₂.
    pub n: usize,
    /// Position relative to the ball center.
    pub x: Vec<f64>,
    pub u: f64,
    pub grad_u: Vec<f64>,
}

/// Ball-dependent data shared by all nodes.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BallData {
    pub r: f64,
    /// sup u over the ball.
    pub big_m: f64,
    /// inf u over the ball.
    pub small_m: f64,
}

/// I₁ … I₉ at one point, with C_{n,α} = `c_suite` in I₉.
pub fn iterms_at(
    pt: &PointData,
    ball: &BallData,
    model: &NonlinearityModel,
    cfg: &AuxConfig,
    c_suite: f64,
) -> Result<[f64; 9]> {
    cfg.validate()?;
    let p = &pt.grad_u;
    if p.len() != pt.x.len() {
        return Err(Error::DimensionMismatch {
            expected: pt.x.len(),
            actual: p.len(),
        });
    }
    let z: f64 = p.iter().map(|v| v * v).sum();
    let (phi, dphi) = cutoff_phi(&pt.x, ball.r, cfg.alpha)?;
    if !(phi > 0.0) {
        return Err(Error::Degenerate("cutoff vanishes at the node".into()));
    }
    let (_, hp, hpp) = weight_h(pt.u, cfg.h, ball.big_m, ball.small_m)?;
    let (g, hh) = coefficients_gh(cfg.f, z)?;
    let f_ratio = cfg.f.ratio(z); // F/F′
    let fv = model.eval_f(p);
    let df = model.grad_f(p);
    let nz = 1.0 + z;
    let sq = nz.sqrt();
    let dot = |a: &[f64], b: &[f64]| a.iter().zip(b).map(|(x, y)| x * y).sum::<f64>();
    let p_dphi = dot(p, &dphi);
    let dphi2 = dot(&dphi, &dphi);
    // ∇z from the stationarity condition.
    let grad_z: Vec<f64> = dphi
        .iter()
        .zip(p)
        .map(|(dp, pi)| -f_ratio * (dp / phi + hp * pi))
        .collect();

    let i1 = sq * dot(&df, &grad_z) / f_ratio;
    let i2 = 2.0 / pt.n as f64 * nz * fv * fv / f_ratio;
    let i3 = hp * fv / sq;
    let i4 = (hpp - hp * hp) * z / nz;
    let i5 = (hp * f_ratio).powi(2) * (g * z + hh * z * z / nz);
    let i6 = -2.0 * hp * f_ratio * f_ratio / phi * (g + hh * z / nz) * p_dphi;
    let i7 = fv * p_dphi / (sq * phi);
    let i8 = (f_ratio / phi).powi(2) * (-g * dphi2 - hh * p_dphi * p_dphi / nz);
    let i9 = c_suite / (ball.r * ball.r * phi.powf(2.0 / cfg.alpha));
    Ok([i1, i2, i3, i4, i5, i6, i7, i8, i9])
}

/// Report of the inequality at the discrete maximum of hFφ.
#[derive(Debug, Clone, PartialEq)]
pub struct AuxDiagnostics {
    /// Grid indices (i, j) and coordinates (x, y) of the maximizing node.
    pub argmax: (usize, usize),
    pub argmax_xy: (f64, f64),
    pub p_max: f64,
    pub z_at_argmax: f64,
    /// Discrete |∇ log(hFφ)| at the argmax: per axis, the larger of the two
    /// one-sided difference quotients.
    pub stationarity: f64,
    pub i_terms: [f64; 9],
    pub lhs: f64,
    pub rhs: f64,
    pub margin: f64,
    /// R²φ^{2/α} at the argmax, so that I₉ = C/scale.
    pub i9_scale: f64,
    pub config: AuxConfig,
    pub c_suite: f64,
    pub h: f64,
}

impl AuxDiagnostics {
    /// Smallest C_{n,α} making the margin non-negative at this argmax.
    pub fn required_constant(&self) -> f64 {
        let without_i9 = self.rhs - self.i_terms[8] - self.lhs;
        (-without_i9 * self.i9_scale).max(0.0)
    }

    pub fn to_json(&self) -> Value {
        let mut m = serde_json::Map::new();
        m.insert(
            "argmax".into(),
            json!({
                "i": self.argmax.0,
                "j": self.argmax.1,
                "x": self.argmax_xy.0,
                "y": self.argmax_xy.1,
                "z": self.z_at_argmax,
            }),
        );
        m.insert("P_max".into(), json!(self.p_max));
        m.insert("stationarity".into(), json!(self.stationarity));
        for (k, v) in self.i_terms.iter().enumerate() {
            m.insert(format!("I{}", k + 1), json!(v));
        }
        m.insert("lhs".into(), json!(self.lhs));
        m.insert("rhs".into(), json!(self.rhs));
        m.insert("margin".into(), json!(self.margin));
        let mut cfg = self.config.to_json();
        cfg["C_suite"] = json!(self.c_suite);
        cfg["h_grid"] = json!(self.h);
        m.insert("config".into(), cfg);
        Value::Object(m)
    }
}

/// sup and inf of u over grid nodes inside the closed ball.
fn ball_extrema(field: &GridField, r: f64) -> (f64, f64) {
    let mut lo = f64::INFINITY;
    let mut hi = f64::NEG_INFINITY;
    let r2 = r * r * (1.0 + 1e-12);
    for j in 0..field.ny {
        for i in 0..field.nx {
            let (x, y) = (field.x(i), field.y(j));
            if x * x + y * y <= r2 {
                let v = field.at(i, j);
                lo = lo.min(v);
                hi = hi.max(v);
            }
        }
    }
    (hi, lo)
}

/// Locates the discrete argmax of hFφ on the ball centered at the domain
/// center with radius R_dom, and evaluates the I-terms there.
pub fn verify_max_inequality(
    field: &GridField,
    model: &NonlinearityModel,
    cfg: &AuxConfig,
    c_suite: f64,
) -> Result<AuxDiagnostics> {
    cfg.validate()?;
    let grad = gradient_field(field)?;
    let r = field.r_dom;
    let (big_m, small_m) = ball_extrema(field, r);
    let ball = BallData { r, big_m, small_m };
    let (nx, ny) = (field.nx, field.ny);

    // P at every interior node inside the ball, None where it is undefined.
    let mut pvals = vec![None; nx * ny];
    for j in 1..ny - 1 {
        for i in 1..nx - 1 {
            let k = field.index(i, j);
            let (phi, _) = match cutoff_phi(&[field.x(i), field.y(j)], r, cfg.alpha) {
                Ok(v) => v,
                Err(_) => continue,
            };
            let z = grad.z[k];
            if !(phi > 0.0 && z > 0.0) {
                continue;
            }
            let (hv, _, _) = weight_h(field.u[k], cfg.h, big_m, small_m)?;
            let (fv, _, _) = cfg.f.derivatives(z);
            pvals[k] = Some(hv * fv * phi);
        }
    }

    let mut best: Option<(usize, f64)> = None;
    for j in 1..ny - 1 {
        for i in 1..nx - 1 {
            let k = field.index(i, j);
            if let Some(p) = pvals[k] {
                if grad.z[k] >= cfg.z_min && best.map_or(true, |(_, b)| p > b) {
                    best = Some((k, p));
                }
            }
        }
    }
    let (k, p_max) = best.ok_or_else(|| {
        Error::Degenerate(format!("no node inside the ball has z ≥ {}", cfg.z_min))
    })?;
    let (i, j) = (k % nx, k / nx);
    let h = field.h;
    let logp = |kk: usize| pvals[kk].map(f64::ln);
    let stationarity = match (
        logp(k + 1),
        logp(k - 1),
        logp(k + nx),
        logp(k - nx),
    ) {
        (Some(e), Some(w), Some(n), Some(s)) => {
            // At a discrete maximum only the one-sided quotients carry the
            // stationarity information; take the larger one per axis.
            let c = logp(k).unwrap_or(0.0);
            let dx = (e - c).abs().max((c - w).abs()) / h;
            let dy = (n - c).abs().max((c - s).abs()) / h;
            (dx * dx + dy * dy).sqrt()
        }
        _ => f64::INFINITY,
    };

    let (x, y) = (field.x(i), field.y(j));
    let pt = PointData {
        n: 2,
        x: vec![x, y],
        u: field.u[k],
        grad_u: vec![grad.ux[k], grad.uy[k]],
    };
    let terms = iterms_at(&pt, &ball, model, cfg, c_suite)?;
    let lhs = terms[..5].iter().sum::<f64>();
    let rhs = terms[5..].iter().sum::<f64>();
    let (phi, _) = cutoff_phi(&pt.x, r, cfg.alpha)?;
    Ok(AuxDiagnostics {
        argmax: (i, j),
        argmax_xy: (x, y),
        p_max,
        z_at_argmax: grad.z[k],
        stationarity,
        i_terms: terms,
        lhs,
        rhs,
        margin: rhs - lhs,
        i9_scale: r * r * phi.powf(2.0 / cfg.alpha),
        config: *cfg,
        c_suite,
        h,
    })
}
