//! Sampled checking and calibration of the structural conditions (A1)–(A4).

use std::fmt;
use std::str::FromStr;

use rand::SeedableRng;
use rand_distr::{Distribution, StandardNormal};
use rand_xoshiro::SplitMix64;

use super::NonlinearityModel;
use crate::error::{Error, Result};

/// Samples with |p| below this are skipped for models that are not C¹ at 0.
const NONSMOOTH_EXCLUSION: f64 = 1e-8;
/// Margins within this relative distance of zero are roundoff, not violations.
const ROUNDOFF_REL: f64 = 1e-12;
/// A synthesized lower-bound constant must exceed this; smaller ratios mean
/// the candidate only holds on the finite sampled range.
const RATIO_FLOOR: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ConditionTag {
    A1,
    A2,
    A3,
    A4,
}

impl ConditionTag {
    pub const ALL: [ConditionTag; 4] = [Self::A1, Self::A2, Self::A3, Self::A4];
}

impl fmt::Display for ConditionTag {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            Self::A1 => "A1",
            Self::A2 => "A2",
            Self::A3 => "A3",
            Self::A4 => "A4",
        };
        f.write_str(s)
    }
}

impl FromStr for ConditionTag {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_uppercase().as_str() {
            "A1" => Ok(Self::A1),
            "A2" => Ok(Self::A2),
            "A3" => Ok(Self::A3),
            "A4" => Ok(Self::A4),
            other => Err(Error::param(format!("unknown condition tag `{other}`"))),
        }
    }
}

/// A structural condition with concrete constants.
///
/// Field use by tag: A1 (m1, m2, θ), A2 (m1, m2, m3, θ), A3 (m1, θ), A4 (m1, m2).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ConditionSpec {
    pub tag: ConditionTag,
    pub m1: f64,
    pub m2: Option<f64>,
    pub m3: Option<f64>,
    pub theta: Option<f64>,
}

impl ConditionSpec {
    pub fn a1(m1: f64, m2: f64, theta: f64) -> Self {
        Self { tag: ConditionTag::A1, m1, m2: Some(m2), m3: None, theta: Some(theta) }
    }

    pub fn a2(m1: f64, m2: f64, m3: f64, theta: f64) -> Self {
        Self { tag: ConditionTag::A2, m1, m2: Some(m2), m3: Some(m3), theta: Some(theta) }
    }

    pub fn a3(m1: f64, theta: f64) -> Self {
        Self { tag: ConditionTag::A3, m1, m2: None, m3: None, theta: Some(theta) }
    }

    pub fn a4(m1: f64, m2: f64) -> Self {
        Self { tag: ConditionTag::A4, m1, m2: Some(m2), m3: None, theta: None }
    }

    /// Checks the constant ranges each condition requires.
    pub fn validate(&self) -> Result<()> {
        let pos = |name: &str, v: Option<f64>| -> Result<f64> {
            match v {
                Some(x) if x.is_finite() && x > 0.0 => Ok(x),
                Some(x) => Err(Error::param(format!("{}: {name} must be positive, got {x}", self.tag))),
                None => Err(Error::param(format!("{}: {name} is required", self.tag))),
            }
        };
        pos("m1", Some(self.m1))?;
        match self.tag {
            ConditionTag::A1 => {
                pos("m2", self.m2)?;
                pos("theta", self.theta)?;
            }
            ConditionTag::A2 => {
                pos("m2", self.m2)?;
                pos("m3", self.m3)?;
                let t = pos("theta", self.theta)?;
                if t <= 1.0 {
                    return Err(Error::param(format!("A2 requires theta > 1, got {t}")));
                }
            }
            ConditionTag::A3 => {
                let t = pos("theta", self.theta)?;
                if t > 1.0 {
                    return Err(Error::param(format!("A3 requires 0 < theta <= 1, got {t}")));
                }
            }
            ConditionTag::A4 => {
                pos("m2", self.m2)?;
            }
        }
        Ok(())
    }

    /// Signed margins (LHS − RHS) of each defining inequality at one sample,
    /// with roundoff-level values snapped to zero.
    fn margins(&self, model: &NonlinearityModel, p: &[f64]) -> [f64; 2] {
        let s2: f64 = p.iter().map(|x| x * x).sum();
        let f = model.eval_f(p);
        let g2: f64 = model.grad_f(p).iter().map(|x| x * x).sum();
        let log = s2.ln_1p();
        let m2 = self.m2.unwrap_or(0.0);
        let m3 = self.m3.unwrap_or(0.0);
        let theta = self.theta.unwrap_or(1.0);
        let f2 = f * f;
        match self.tag {
            ConditionTag::A1 => {
                let a = self.m1 * s2 * g2;
                let b = m2 * s2.powf(theta);
                [snap(f2 - a - b, f2 + a + b), f64::INFINITY]
            }
            ConditionTag::A2 => {
                let a = self.m1 * (1.0 + s2) * log * g2;
                let b = m2 * log.powf(2.0 * theta);
                let c = m3 * log.powf(theta);
                [snap(f2 - a - b, f2 + a + b), snap(c - f.abs(), c + f.abs())]
            }
            ConditionTag::A3 => {
                let rhs = self.m1 * log.powf(theta);
                [-(f.abs() - rhs).abs(), f64::INFINITY]
            }
            ConditionTag::A4 => {
                let a = self.m1 * (1.0 + s2) * (1.0 + s2) * log * g2;
                [snap(f2 - a, f2 + a), snap(m2 - f.abs(), m2 + f.abs())]
            }
        }
    }
}

fn snap(margin: f64, scale: f64) -> f64 {
    if margin.abs() <= ROUNDOFF_REL * scale {
        0.0
    } else {
        margin
    }
}

/// Where |p| is sampled: a logarithmic magnitude grid crossed with random
/// unit directions drawn from a seeded SplitMix64 stream.
#[derive(Debug, Clone, PartialEq)]
pub struct SampleSpec {
    pub dim: usize,
    pub magnitudes: usize,
    pub directions: usize,
    pub min_magnitude: f64,
    pub max_magnitude: f64,
    pub seed: u64,
}

impl Default for SampleSpec {
    fn default() -> Self {
        Self {
            dim: 2,
            magnitudes: 64,
            directions: 32,
            min_magnitude: 1e-6,
            max_magnitude: 1e6,
            seed: 0,
        }
    }
}

impl SampleSpec {
    pub fn with_seed(seed: u64) -> Self {
        Self { seed, ..Self::default() }
    }

    pub fn magnitude_grid(&self) -> Vec<f64> {
        let k = self.magnitudes.max(1);
        if k == 1 {
            return vec![self.min_magnitude];
        }
        let (lo, hi) = (self.min_magnitude.ln(), self.max_magnitude.ln());
        (0..k)
            .map(|i| (lo + (hi - lo) * i as f64 / (k - 1) as f64).exp())
            .collect()
    }

    pub fn unit_directions(&self) -> Vec<Vec<f64>> {
        let mut rng = SplitMix64::seed_from_u64(self.seed);
        let mut out = Vec::with_capacity(self.directions);
        while out.len() < self.directions {
            let v: Vec<f64> = (0..self.dim).map(|_| StandardNormal.sample(&mut rng)).collect();
            let n = v.iter().map(|x| x * x).sum::<f64>().sqrt();
            if n > 1e-12 {
                out.push(v.into_iter().map(|x| x / n).collect());
            }
        }
        out
    }

    /// All sample points, magnitude-major.
    pub fn points(&self, model: &NonlinearityModel) -> Vec<Vec<f64>> {
        let dirs = self.unit_directions();
        let skip_small = model.nonsmooth_at_origin();
        self.magnitude_grid()
            .into_iter()
            .filter(|&m| !(skip_small && m < NONSMOOTH_EXCLUSION))
            .flat_map(|m| dirs.iter().map(move |d| d.iter().map(|x| m * x).collect::<Vec<_>>()))
            .collect()
    }

    fn validate(&self) -> Result<()> {
        if self.dim == 0 || self.magnitudes == 0 || self.directions == 0 {
            return Err(Error::param("sampling needs dim, magnitudes and directions > 0"));
        }
        if !(self.min_magnitude > 0.0 && self.max_magnitude >= self.min_magnitude) {
            return Err(Error::param("sampling magnitudes must satisfy 0 < min <= max"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConditionReport {
    pub holds: bool,
    pub samples_checked: usize,
    /// Minimum over samples (and over the condition's inequalities) of LHS − RHS.
    pub worst_margin: f64,
    /// First sample where the condition fails.
    pub witness: Option<Vec<f64>>,
}

/// Evaluates the defining inequalities of `spec` at every sample point.
pub fn check_condition(
    model: &NonlinearityModel,
    spec: &ConditionSpec,
    sampling: &SampleSpec,
) -> Result<ConditionReport> {
    spec.validate()?;
    sampling.validate()?;
    let points = sampling.points(model);
    let mut worst = f64::INFINITY;
    let mut witness = None;
    for p in &points {
        let [a, b] = spec.margins(model, p);
        let m = a.min(b);
        if m < worst {
            worst = m;
        }
        if m < 0.0 && witness.is_none() {
            witness = Some(p.clone());
        }
    }
    Ok(ConditionReport {
        holds: witness.is_none(),
        samples_checked: points.len(),
        worst_margin: worst,
        witness,
    })
}

fn theta_candidates(model: &NonlinearityModel, tag: ConditionTag) -> Vec<f64> {
    let admissible = |t: f64| match tag {
        ConditionTag::A1 => t > 0.0,
        ConditionTag::A2 => t > 1.0,
        ConditionTag::A3 => t > 0.0 && t <= 1.0,
        ConditionTag::A4 => true,
    };
    let mut out = Vec::new();
    if let Some(t) = model.growth_exponent() {
        if admissible(t) {
            out.push(t);
        }
    }
    for t in [4.0, 3.0, 2.0, 1.5, 1.0, 0.75, 0.5, 0.25] {
        if admissible(t) && !out.contains(&t) {
            out.push(t);
        }
    }
    out
}

/// Grid-searches constants for `tag` and returns the first candidate that the
/// sampler confirms, or `None` when no candidate works.
///
/// m₁ runs over 2⁻ᵏ, k = 0..12. Lower-bound constants (m₂ of A1/A2) are set
/// to 0.9× the smallest observed ratio; upper-bound constants (m₃ of A2, m₂
/// of A4) to 1.1× the largest.
pub fn synthesize_constants(
    model: &NonlinearityModel,
    tag: ConditionTag,
    sampling: &SampleSpec,
) -> Option<ConditionSpec> {
    sampling.validate().ok()?;
    let points = sampling.points(model);
    let stats: Vec<(f64, f64, f64)> = points
        .iter()
        .map(|p| {
            let s2: f64 = p.iter().map(|x| x * x).sum();
            let f = model.eval_f(p);
            let g2: f64 = model.grad_f(p).iter().map(|x| x * x).sum();
            (s2, f, g2)
        })
        .collect();
    let m1_grid = (0..=12).map(|k| 0.5f64.powi(k));
    let holds = |spec: &ConditionSpec| {
        check_condition(model, spec, sampling).map(|r| r.holds).unwrap_or(false)
    };
    let max_abs_f = stats.iter().map(|&(_, f, _)| f.abs()).fold(0.0, f64::max);

    match tag {
        ConditionTag::A1 | ConditionTag::A2 => {
            for theta in theta_candidates(model, tag) {
                for m1 in m1_grid.clone() {
                    let mut min_ratio = f64::INFINITY;
                    let mut max_upper = 0.0f64;
                    for &(s2, f, g2) in &stats {
                        let log = s2.ln_1p();
                        let (lhs, denom) = match tag {
                            ConditionTag::A1 => (f * f - m1 * s2 * g2, s2.powf(theta)),
                            _ => (f * f - m1 * (1.0 + s2) * log * g2, log.powf(2.0 * theta)),
                        };
                        min_ratio = min_ratio.min(lhs / denom);
                        if tag == ConditionTag::A2 {
                            max_upper = max_upper.max(f.abs() / log.powf(theta));
                        }
                    }
                    if !(min_ratio.is_finite() && min_ratio >= RATIO_FLOOR) {
                        continue;
                    }
                    let m2 = 0.9 * min_ratio;
                    let spec = if tag == ConditionTag::A1 {
                        ConditionSpec::a1(m1, m2, theta)
                    } else {
                        if !(max_upper.is_finite() && max_upper > 0.0) {
                            continue;
                        }
                        ConditionSpec::a2(m1, m2, 1.1 * max_upper, theta)
                    };
                    if holds(&spec) {
                        return Some(spec);
                    }
                }
            }
            None
        }
        ConditionTag::A3 => {
            for theta in theta_candidates(model, tag) {
                let m1 = match *model {
                    NonlinearityModel::LogPower { theta: t, m1 } if t == theta => m1,
                    _ => {
                        let &(s2, f, _) = stats.first()?;
                        f.abs() / s2.ln_1p().powf(theta)
                    }
                };
                if !(m1.is_finite() && m1 > 0.0) {
                    continue;
                }
                let spec = ConditionSpec::a3(m1, theta);
                if holds(&spec) {
                    return Some(spec);
                }
            }
            None
        }
        ConditionTag::A4 => {
            let m2 = if max_abs_f > 0.0 { 1.1 * max_abs_f } else { 1.0 };
            if !m2.is_finite() {
                return None;
            }
            m1_grid
                .map(|m1| ConditionSpec::a4(m1, m2))
                .find(|spec| holds(spec))
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sampling() -> SampleSpec {
        SampleSpec::with_seed(7)
    }

    #[test]
    fn power_one_satisfies_a1_half_half() {
        let model = NonlinearityModel::Power { theta: 1.0 };
        let r = check_condition(&model, &ConditionSpec::a1(0.5, 0.5, 1.0), &sampling()).unwrap();
        assert!(r.holds, "{r:?}");
        assert!(r.witness.is_none());
        assert_eq!(r.samples_checked, 64 * 32);
    }

    #[test]
    fn power_two_violates_a1_with_witness() {
        let model = NonlinearityModel::Power { theta: 2.0 };
        let r = check_condition(&model, &ConditionSpec::a1(0.5, 1.0, 2.0), &sampling()).unwrap();
        assert!(!r.holds);
        let w = r.witness.expect("witness");
        let s2: f64 = w.iter().map(|x| x * x).sum();
        assert!(s2 > 0.0);
        // f² − m₁|p|²|∇f|² − m₂|p|⁴ = |p|⁴ − 2|p|⁴ − |p|⁴ = −2|p|⁴
        assert!(r.worst_margin < 0.0);
    }

    #[test]
    fn bounded_ratio_satisfies_a4() {
        let r = check_condition(
            &NonlinearityModel::BoundedRatio,
            &ConditionSpec::a4(1.0, 1.0),
            &sampling(),
        )
        .unwrap();
        assert!(r.holds, "{r:?}");
        assert!(r.worst_margin >= 0.0);
    }

    #[test]
    fn invalid_constants_are_configuration_errors() {
        let m = NonlinearityModel::Zero;
        let s = sampling();
        assert!(check_condition(&m, &ConditionSpec::a1(0.5, 0.5, 0.0), &s).is_err());
        assert!(check_condition(&m, &ConditionSpec::a2(0.5, 0.5, 1.0, 1.0), &s).is_err());
        assert!(check_condition(&m, &ConditionSpec::a3(1.0, 1.5), &s).is_err());
        assert!(check_condition(&m, &ConditionSpec::a4(-1.0, 1.0), &s).is_err());
    }

    #[test]
    fn synthesize_imcf_a1_uses_theta_one() {
        let spec = synthesize_constants(&NonlinearityModel::Imcf { eps: 1.0 }, ConditionTag::A1, &sampling())
            .expect("feasible");
        assert_eq!(spec.theta, Some(1.0));
        assert_eq!(spec.m1, 0.5);
        assert!(spec.m2.unwrap() > 0.4 && spec.m2.unwrap() < 0.5);
    }

    #[test]
    fn synthesize_zero_a1_is_infeasible() {
        assert!(synthesize_constants(&NonlinearityModel::Zero, ConditionTag::A1, &sampling()).is_none());
    }

    #[test]
    fn synthesize_logpower_a3_is_exact() {
        let spec = synthesize_constants(
            &NonlinearityModel::LogPower { theta: 1.0, m1: 1.0 },
            ConditionTag::A3,
            &sampling(),
        )
        .unwrap();
        assert_eq!(spec, ConditionSpec::a3(1.0, 1.0));
    }

    #[test]
    fn a3_exactness_for_logpower() {
        let model = NonlinearityModel::LogPower { theta: 0.5, m1: 2.5 };
        for p in sampling().points(&model) {
            let s2: f64 = p.iter().map(|x| x * x).sum();
            assert_eq!(model.eval_f(&p).abs() - 2.5 * s2.ln_1p().powf(0.5), 0.0);
        }
    }

    #[test]
    fn sampling_is_seed_deterministic() {
        let a = SampleSpec::with_seed(11).unit_directions();
        let b = SampleSpec::with_seed(11).unit_directions();
        let c = SampleSpec::with_seed(12).unit_directions();
        assert_eq!(a, b);
        assert_ne!(a, c);
        let mags = SampleSpec::default().magnitude_grid();
        assert_eq!(mags.len(), 64);
        assert!((mags[0] - 1e-6).abs() < 1e-20 && (mags[63] / 1e6 - 1.0).abs() < 1e-12);
    }
}
