//! Right-hand sides f(∇u) of the prescribed mean curvature equation.
//!
//! Every built-in family depends on the gradient only through |p|, which lets
//! the same model drive both the radial ODE and the 2-D grid solver.

mod conditions;

use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};

pub use conditions::{
    check_condition, synthesize_constants, ConditionReport, ConditionSpec, ConditionTag,
    SampleSpec,
};

/// Built-in nonlinearity families.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum NonlinearityModel {
    /// f ≡ 0 (minimal surface equation).
    Zero,
    /// f(p) = |p|^θ.
    Power { theta: f64 },
    /// f(p) = ε√(1+|p|²), the elliptic regularization of inverse mean curvature flow.
    Imcf { eps: f64 },
    /// f(p) = m₁ log^θ(1+|p|²).
    LogPower { theta: f64, m1: f64 },
    /// f(p) = |p|/√(1+|p|²).
    BoundedRatio,
    /// f ≡ H (constant mean curvature).
    Constant { h: f64 },
}

impl NonlinearityModel {
    pub fn power(theta: f64) -> Result<Self> {
        positive("theta", theta)?;
        Ok(Self::Power { theta })
    }

    pub fn imcf(eps: f64) -> Result<Self> {
        positive("eps", eps)?;
        Ok(Self::Imcf { eps })
    }

    pub fn log_power(theta: f64, m1: f64) -> Result<Self> {
        positive("theta", theta)?;
        positive("m1", m1)?;
        Ok(Self::LogPower { theta, m1 })
    }

    pub fn constant(h: f64) -> Result<Self> {
        if !h.is_finite() {
            return Err(Error::param(format!("constant H must be finite, got {h}")));
        }
        Ok(Self::Constant { h })
    }

    /// f(p).
    pub fn eval_f(&self, p: &[f64]) -> f64 {
        self.eval_sq(norm_sq(p))
    }

    /// f at any p with |p| = |s|.
    pub fn eval_radial(&self, s: f64) -> f64 {
        self.eval_sq(s * s)
    }

    fn eval_sq(&self, s2: f64) -> f64 {
        match *self {
            Self::Zero => 0.0,
            Self::Power { theta } => s2.powf(0.5 * theta),
            Self::Imcf { eps } => eps * (1.0 + s2).sqrt(),
            Self::LogPower { theta, m1 } => m1 * s2.ln_1p().powf(theta),
            Self::BoundedRatio => (s2 / (1.0 + s2)).sqrt(),
            Self::Constant { h } => h,
        }
    }

    /// ∇ₚf(p). At p = 0 for families that are not C¹ there, returns zero.
    pub fn grad_f(&self, p: &[f64]) -> Vec<f64> {
        self.grad_f_flagged(p).0
    }

    /// ∇ₚf(p) plus a flag that is set when p = 0 and the model is not
    /// differentiable at the origin.
    pub fn grad_f_flagged(&self, p: &[f64]) -> (Vec<f64>, bool) {
        let s2 = norm_sq(p);
        if s2 == 0.0 {
            return (vec![0.0; p.len()], self.nonsmooth_at_origin());
        }
        // ∇ₚf = coef · p
        let coef = match *self {
            Self::Zero | Self::Constant { .. } => 0.0,
            Self::Power { theta } => theta * s2.powf(0.5 * theta - 1.0),
            Self::Imcf { eps } => eps / (1.0 + s2).sqrt(),
            Self::LogPower { theta, m1 } => {
                2.0 * m1 * theta * s2.ln_1p().powf(theta - 1.0) / (1.0 + s2)
            }
            Self::BoundedRatio => 1.0 / (s2.sqrt() * (1.0 + s2).powf(1.5)),
        };
        (p.iter().map(|&pi| coef * pi).collect(), false)
    }

    /// |∇ₚf| at any p with |p| = s ≥ 0.
    pub fn grad_norm_radial(&self, s: f64) -> f64 {
        let s = s.abs();
        let s2 = s * s;
        if s2 == 0.0 {
            return 0.0;
        }
        match *self {
            Self::Zero | Self::Constant { .. } => 0.0,
            Self::Power { theta } => theta * s.powf(theta - 1.0),
            Self::Imcf { eps } => eps * s / (1.0 + s2).sqrt(),
            Self::LogPower { theta, m1 } => {
                2.0 * m1 * theta * s2.ln_1p().powf(theta - 1.0) * s / (1.0 + s2)
            }
            Self::BoundedRatio => 1.0 / (1.0 + s2).powf(1.5),
        }
    }

    /// Families whose f is not C¹ at p = 0.
    pub fn nonsmooth_at_origin(&self) -> bool {
        match *self {
            Self::Power { theta } => theta <= 1.0,
            Self::LogPower { theta, .. } => theta <= 0.5,
            Self::BoundedRatio => true,
            Self::Zero | Self::Imcf { .. } | Self::Constant { .. } => false,
        }
    }

    /// Polynomial (or logarithmic) growth exponent θ of the family, if it has one.
    pub fn growth_exponent(&self) -> Option<f64> {
        match *self {
            Self::Power { theta } | Self::LogPower { theta, .. } => Some(theta),
            Self::Imcf { .. } => Some(1.0),
            _ => None,
        }
    }

    /// lim f(p) as |p| → ∞ when it is finite.
    pub fn limit_at_infinity(&self) -> Option<f64> {
        match *self {
            Self::Zero => Some(0.0),
            Self::Constant { h } => Some(h),
            Self::BoundedRatio => Some(1.0),
            _ => None,
        }
    }
}

fn norm_sq(p: &[f64]) -> f64 {
    p.iter().map(|x| x * x).sum()
}

fn positive(name: &str, v: f64) -> Result<()> {
    if v.is_finite() && v > 0.0 {
        Ok(())
    } else {
        Err(Error::param(format!("{name} must be positive and finite, got {v}")))
    }
}

impl fmt::Display for NonlinearityModel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match *self {
            Self::Zero => write!(f, "zero"),
            Self::Power { theta } => write!(f, "power:{theta}"),
            Self::Imcf { eps } => write!(f, "imcf:{eps}"),
            Self::LogPower { theta, m1 } => write!(f, "logpow:{theta},{m1}"),
            Self::BoundedRatio => write!(f, "ratio"),
            Self::Constant { h } => write!(f, "const:{h}"),
        }
    }
}

impl FromStr for NonlinearityModel {
    type Err = Error;

    /// Parses `zero`, `power:θ`, `imcf:ε`, `logpow:θ,m1`, `ratio`, `const:H`.
    fn from_str(spec: &str) -> Result<Self> {
        let bad = |reason: &str| Error::ModelSpec {
            spec: spec.to_string(),
            reason: reason.to_string(),
        };
        let trimmed = spec.trim();
        let (name, args) = match trimmed.split_once(':') {
            Some((n, a)) => (n.trim(), Some(a)),
            None => (trimmed, None),
        };
        let numbers = |expected: usize| -> Result<Vec<f64>> {
            let args = args.ok_or_else(|| bad("missing parameters"))?;
            let vals = args
                .split(',')
                .map(|t| {
                    let t = t.trim();
                    // Only plain decimal notation with a period separator.
                    if t.is_empty()
                        || !t
                            .chars()
                            .all(|c| c.is_ascii_digit() || matches!(c, '.' | '-' | '+' | 'e' | 'E'))
                    {
                        return Err(bad(&format!("`{t}` is not a decimal number")));
                    }
                    t.parse::<f64>()
                        .map_err(|_| bad(&format!("`{t}` is not a decimal number")))
                })
                .collect::<Result<Vec<_>>>()?;
            if vals.len() != expected {
                return Err(bad(&format!(
                    "expected {expected} parameter(s), got {}",
                    vals.len()
                )));
            }
            Ok(vals)
        };
        let no_args = || -> Result<()> {
            match args {
                None => Ok(()),
                Some(_) => Err(bad("this family takes no parameters")),
            }
        };
        let model = match name {
            "zero" => {
                no_args()?;
                Ok(Self::Zero)
            }
            "ratio" => {
                no_args()?;
                Ok(Self::BoundedRatio)
            }
            "power" => Self::power(numbers(1)?[0]),
            "imcf" => Self::imcf(numbers(1)?[0]),
            "logpow" => {
                let v = numbers(2)?;
                Self::log_power(v[0], v[1])
            }
            "const" => Self::constant(numbers(1)?[0]),
            _ => return Err(bad("unknown family")),
        };
        model.map_err(|e| bad(&e.to_string()))
    }
}
