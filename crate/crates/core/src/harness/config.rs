//! Strict INI experiment configs.
//!
//! A config is a list of `[section]` headers followed by `key = value`
//! lines. Comments start with `#` or `;` at the beginning of a line. Unknown
//! sections, unknown keys, duplicate keys and keys before the first section
//! are rejected with the offending line number.

use std::collections::BTreeMap;
use std::fmt;
use std::hash::Hasher;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use fnv::FnvHasher;

use super::boundary::BoundaryData;
use crate::bernstein::{AuxConfig, FProfile, Weight, DEFAULT_Z_MIN};
use crate::error::{Error, Result};
use crate::estimates::{BoundCase, BoundShape};
use crate::nonlinearity::{ConditionSpec, ConditionTag, NonlinearityModel};

/// Sections and the keys each one accepts.
const SCHEMA: &[(&str, &[&str])] = &[
    ("experiment", &["kind", "model", "seed", "out"]),
    ("geometry", &["domain", "n", "r", "r_list", "inner", "grid"]),
    ("boundary", &["data", "u0", "u_in", "u_out"]),
    ("bound", &["case", "theta", "eta", "c", "z_min"]),
    ("bernstein", &["f", "h", "alpha", "z_min", "c_suite", "k_tol"]),
    ("conditions", &["tag", "m1", "m2", "m3", "theta", "synthesize", "magnitudes", "directions"]),
    ("solver", &["tol", "newton_atol", "max_newton", "linear_rtol"]),
];

/// Keys that determine a 2-D solution; the solution cache is keyed on them.
const SOLUTION_KEYS: &[(&str, &str)] = &[
    ("experiment", "model"),
    ("geometry", "r"),
    ("geometry", "grid"),
    ("boundary", "data"),
    ("solver", "newton_atol"),
    ("solver", "max_newton"),
    ("solver", "linear_rtol"),
];

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Kind {
    CheckConditions,
    SolveRadial,
    Solve2D,
    ValidateBounds,
    FitDecay,
    BernsteinDiagnose,
    Sweep,
}

impl Kind {
    pub const ALL: [Kind; 7] = [
        Self::CheckConditions,
        Self::SolveRadial,
        Self::Solve2D,
        Self::ValidateBounds,
        Self::FitDecay,
        Self::BernsteinDiagnose,
        Self::Sweep,
    ];

    /// Subcommand name.
    pub fn name(self) -> &'static str {
        match self {
            Self::CheckConditions => "check-conditions",
            Self::SolveRadial => "solve-radial",
            Self::Solve2D => "solve-2d",
            Self::ValidateBounds => "validate-bounds",
            Self::FitDecay => "fit-decay",
            Self::BernsteinDiagnose => "bernstein",
            Self::Sweep => "sweep",
        }
    }
}

impl fmt::Display for Kind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Kind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Kind::ALL
            .into_iter()
            .find(|k| k.name() == s.trim())
            .ok_or_else(|| Error::param(format!("unknown experiment kind `{}`", s.trim())))
    }
}

/// Whether an experiment runs on radial profiles or on the 2-D grid.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DomainKind {
    Radial,
    Grid,
}

/// A raw value with the line it came from.
#[derive(Debug, Clone, PartialEq)]
struct Entry {
    value: String,
    line: usize,
}

/// Parsed INI text: section → key → entry, both sorted.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Ini {
    sections: BTreeMap<String, BTreeMap<String, Entry>>,
}

impl Ini {
    pub fn parse(text: &str) -> Result<Self> {
        let mut ini = Ini::default();
        let mut current: Option<String> = None;
        for (idx, raw) in text.lines().enumerate() {
            let line = idx + 1;
            let t = raw.trim();
            if t.is_empty() || t.starts_with('#') || t.starts_with(';') {
                continue;
            }
            if let Some(rest) = t.strip_prefix('[') {
                let name = rest
                    .strip_suffix(']')
                    .ok_or_else(|| Error::config(line, "unterminated section header"))?
                    .trim();
                if !SCHEMA.iter().any(|(s, _)| *s == name) {
                    return Err(Error::config(line, format!("unknown section [{name}]")));
                }
                if ini.sections.contains_key(name) {
                    return Err(Error::config(line, format!("section [{name}] appears twice")));
                }
                ini.sections.insert(name.to_string(), BTreeMap::new());
                current = Some(name.to_string());
                continue;
            }
            let (key, value) = t
                .split_once('=')
                .ok_or_else(|| Error::config(line, format!("expected `key = value`, got `{t}`")))?;
            let (key, value) = (key.trim(), value.trim());
            let section = current
                .as_ref()
                .ok_or_else(|| Error::config(line, "key outside of any section"))?;
            let allowed = SCHEMA.iter().find(|(s, _)| s == section).map(|(_, k)| *k).unwrap_or(&[]);
            if !allowed.contains(&key) {
                return Err(Error::config(line, format!("unknown key `{key}` in [{section}]")));
            }
            if value.is_empty() {
                return Err(Error::config(line, format!("empty value for `{key}`")));
            }
            let map = ini.sections.get_mut(section).expect("section exists");
            if map.contains_key(key) {
                return Err(Error::config(line, format!("duplicate key `{key}` in [{section}]")));
            }
            map.insert(key.to_string(), Entry { value: value.to_string(), line });
        }
        Ok(ini)
    }

    /// True when the key is present.
    pub fn has(&self, section: &str, key: &str) -> bool {
        self.get(section, key).is_some()
    }

    /// Raw value of a key.
    pub fn value(&self, section: &str, key: &str) -> Option<&str> {
        self.get(section, key).map(|e| e.value.as_str())
    }

    fn get(&self, section: &str, key: &str) -> Option<&Entry> {
        self.sections.get(section).and_then(|m| m.get(key))
    }

    /// Sets or replaces a value (used for command-line overrides).
    pub fn set(&mut self, section: &str, key: &str, value: &str) {
        self.sections
            .entry(section.to_string())
            .or_default()
            .insert(key.to_string(), Entry { value: value.to_string(), line: 0 });
    }

    /// Canonical text: sections and keys sorted, one `key = value` per line,
    /// empty sections dropped.
    pub fn canonical(&self) -> String {
        let mut out = String::new();
        for (name, keys) in &self.sections {
            if keys.is_empty() {
                continue;
            }
            out.push_str(&format!("[{name}]\n"));
            for (k, e) in keys {
                out.push_str(&format!("{k} = {}\n", e.value));
            }
        }
        out
    }

    fn typed<T: FromStr>(&self, section: &str, key: &str) -> Result<Option<T>>
    where
        T::Err: fmt::Display,
    {
        match self.get(section, key) {
            None => Ok(None),
            Some(e) => e.value.parse::<T>().map(Some).map_err(|err| {
                Error::config(e.line, format!("[{section}] {key} = `{}`: {err}", e.value))
            }),
        }
    }

    fn line_of(&self, section: &str, key: &str) -> usize {
        self.get(section, key).map_or(0, |e| e.line)
    }
}

/// 64-bit FNV-1a of `text`.
pub fn fnv1a64(text: &str) -> u64 {
    let mut h = FnvHasher::default();
    h.write(text.as_bytes());
    h.finish()
}

#[derive(Debug, Clone, PartialEq)]
pub struct Geometry {
    pub domain: DomainKind,
    /// Dimension of radial problems; grids are always 2-D.
    pub n: usize,
    /// Domain radii, ascending: a single entry unless `r_list` is given.
    pub radii: Vec<f64>,
    /// Inner radius of a radial annulus (0 for a ball).
    pub inner: f64,
    /// Nodes per side of the grid.
    pub grid: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BoundarySpec {
    pub data: BoundaryData,
    pub u0: f64,
    pub u_in: f64,
    pub u_out: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BoundSpec {
    pub case: BoundCase,
    pub shape: BoundShape,
    /// Fixed constant; `None` calibrates it from the data.
    pub c: Option<f64>,
    pub z_min: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BernsteinSpec {
    pub aux: AuxConfig,
    /// Constant in I₉; `None` calibrates it on the run itself.
    pub c_suite: Option<f64>,
    /// Violation threshold: a margin below −k_tol·h is reported.
    pub k_tol: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ConditionsSpec {
    pub tag: ConditionTag,
    /// Explicit constants, or `None` to synthesize them.
    pub spec: Option<ConditionSpec>,
    pub magnitudes: usize,
    pub directions: usize,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolverSpec {
    pub tol: f64,
    pub newton_atol: Option<f64>,
    pub max_newton: usize,
    pub linear_rtol: f64,
}

/// A validated experiment.
#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub kind: Kind,
    pub model: NonlinearityModel,
    pub seed: u64,
    pub out: Option<PathBuf>,
    pub geometry: Geometry,
    pub boundary: BoundarySpec,
    pub bound: BoundSpec,
    pub bernstein: BernsteinSpec,
    pub conditions: ConditionsSpec,
    pub solver: SolverSpec,
    ini: Ini,
}

impl ExperimentConfig {
    pub fn parse(text: &str) -> Result<Self> {
        Self::from_ini(Ini::parse(text)?)
    }

    pub fn from_path(path: &Path) -> Result<Self> {
        Self::parse(&std::fs::read_to_string(path)?)
    }

    /// Builds the typed config; every value error carries its line.
    pub fn from_ini(ini: Ini) -> Result<Self> {
        let need = |section: &str, key: &str| -> Result<()> {
            if ini.get(section, key).is_none() {
                return Err(Error::config(0, format!("missing required key [{section}] {key}")));
            }
            Ok(())
        };
        need("experiment", "kind")?;
        let kind: Kind = ini.typed("experiment", "kind")?.expect("checked");
        need("experiment", "model")?;
        let model: NonlinearityModel = ini.typed("experiment", "model")?.expect("checked");
        let seed = ini.typed("experiment", "seed")?.unwrap_or(0u64);
        let out = ini.get("experiment", "out").map(|e| PathBuf::from(&e.value));

        let domain = match ini.get("geometry", "domain") {
            None => match kind {
                Kind::SolveRadial => DomainKind::Radial,
                _ => DomainKind::Grid,
            },
            Some(e) => match e.value.as_str() {
                "radial" => DomainKind::Radial,
                "grid" => DomainKind::Grid,
                other => {
                    return Err(Error::config(e.line, format!("domain must be `radial` or `grid`, got `{other}`")))
                }
            },
        };
        let n = ini.typed("geometry", "n")?.unwrap_or(2usize);
        if n == 0 || (domain == DomainKind::Grid && n != 2) {
            return Err(Error::config(ini.line_of("geometry", "n"), "grid experiments are 2-D; radial n must be ≥ 1"));
        }
        let radii = match (ini.get("geometry", "r"), ini.get("geometry", "r_list")) {
            (Some(_), Some(e)) => {
                return Err(Error::config(e.line, "give either `r` or `r_list`, not both"))
            }
            (Some(_), None) => vec![ini.typed::<f64>("geometry", "r")?.expect("present")],
            (None, Some(e)) => {
                let mut v = parse_list(&e.value).map_err(|m| Error::config(e.line, m))?;
                v.sort_by(f64::total_cmp);
                v
            }
            (None, None) => vec![1.0],
        };
        if radii.is_empty() || radii.iter().any(|r| !(r.is_finite() && *r > 0.0)) {
            return Err(Error::config(ini.line_of("geometry", "r_list").max(ini.line_of("geometry", "r")), "radii must be positive"));
        }
        let inner = ini.typed("geometry", "inner")?.unwrap_or(0.0f64);
        if !(inner >= 0.0) || radii.iter().any(|&r| inner >= r) {
            return Err(Error::config(ini.line_of("geometry", "inner"), "inner radius must lie in [0, r)"));
        }
        let grid = ini.typed("geometry", "grid")?.unwrap_or(65usize);
        if grid < 3 {
            return Err(Error::config(ini.line_of("geometry", "grid"), "grid needs at least 3 nodes per side"));
        }

        let data = ini.typed("boundary", "data")?.unwrap_or(BoundaryData::Constant(0.0));
        let boundary = BoundarySpec {
            data,
            u0: ini.typed("boundary", "u0")?.unwrap_or(0.0),
            u_in: ini.typed("boundary", "u_in")?.unwrap_or(0.0),
            u_out: ini.typed("boundary", "u_out")?.unwrap_or(0.0),
        };

        let case = ini.typed("bound", "case")?.unwrap_or(BoundCase::E);
        let mut shape = BoundShape::default();
        if let Some(t) = ini.typed("bound", "theta")? {
            shape.theta = t;
        }
        if let Some(e) = ini.typed("bound", "eta")? {
            shape.eta = e;
        }
        shape
            .validate(case)
            .map_err(|e| Error::config(ini.line_of("bound", "theta").max(ini.line_of("bound", "case")), e.to_string()))?;
        let bound = BoundSpec {
            case,
            shape,
            c: ini.typed("bound", "c")?,
            z_min: ini.typed("bound", "z_min")?.unwrap_or(DEFAULT_Z_MIN),
        };

        let mut aux = AuxConfig::new(
            ini.typed("bernstein", "f")?.unwrap_or(FProfile::Z),
            ini.typed("bernstein", "h")?.unwrap_or(Weight::One),
            ini.typed("bernstein", "alpha")?.unwrap_or(2.0),
        );
        aux.z_min = ini.typed("bernstein", "z_min")?.unwrap_or(DEFAULT_Z_MIN);
        if !(aux.alpha >= 1.0) {
            return Err(Error::config(ini.line_of("bernstein", "alpha"), "alpha must be ≥ 1"));
        }
        let bernstein = BernsteinSpec {
            aux,
            c_suite: ini.typed("bernstein", "c_suite")?,
            k_tol: ini.typed("bernstein", "k_tol")?.unwrap_or(4.0),
        };

        let tag = ini.typed("conditions", "tag")?.unwrap_or(ConditionTag::A1);
        let synthesize = ini.typed("conditions", "synthesize")?.unwrap_or(false);
        let m1: Option<f64> = ini.typed("conditions", "m1")?;
        let spec = if synthesize {
            None
        } else if let Some(m1) = m1 {
            let spec = ConditionSpec {
                tag,
                m1,
                m2: ini.typed("conditions", "m2")?,
                m3: ini.typed("conditions", "m3")?,
                theta: ini.typed("conditions", "theta")?,
            };
            spec.validate().map_err(|e| Error::config(ini.line_of("conditions", "tag"), e.to_string()))?;
            Some(spec)
        } else if kind == Kind::CheckConditions {
            return Err(Error::config(
                ini.line_of("conditions", "tag"),
                "give the constants (m1, ...) or set synthesize = true",
            ));
        } else {
            None
        };
        let conditions = ConditionsSpec {
            tag,
            spec,
            magnitudes: ini.typed("conditions", "magnitudes")?.unwrap_or(64),
            directions: ini.typed("conditions", "directions")?.unwrap_or(32),
        };

        let solver = SolverSpec {
            tol: ini.typed("solver", "tol")?.unwrap_or(crate::radial::DEFAULT_TOL),
            newton_atol: ini.typed("solver", "newton_atol")?,
            max_newton: ini.typed("solver", "max_newton")?.unwrap_or(50),
            linear_rtol: ini.typed("solver", "linear_rtol")?.unwrap_or(1e-6),
        };
        if !(solver.tol > 0.0 && solver.linear_rtol > 0.0) {
            return Err(Error::config(ini.line_of("solver", "tol"), "solver tolerances must be positive"));
        }

        Ok(Self {
            kind,
            model,
            seed,
            out,
            geometry: Geometry { domain, n, radii, inner, grid },
            boundary,
            bound,
            bernstein,
            conditions,
            solver,
            ini,
        })
    }

    /// Replaces the seed, keeping the canonical form in sync.
    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self.ini.set("experiment", "seed", &seed.to_string());
        self
    }

    /// Canonical serialization (sorted sections and keys).
    pub fn canonical(&self) -> String {
        self.ini.canonical()
    }

    /// FNV-1a hash of the canonical serialization.
    pub fn cache_key(&self) -> u64 {
        fnv1a64(&self.canonical())
    }

    /// FNV-1a hash over the keys that determine a 2-D solution at radius `r`.
    pub fn solution_key(&self, r: f64) -> u64 {
        let mut text = String::new();
        for (s, k) in SOLUTION_KEYS {
            let v = match (*s, *k) {
                ("geometry", "r") => format!("{r:?}"),
                ("geometry", "grid") => self.geometry.grid.to_string(),
                _ => self.ini.get(s, k).map(|e| e.value.clone()).unwrap_or_default(),
            };
            text.push_str(&format!("{s}.{k} = {v}\n"));
        }
        fnv1a64(&text)
    }
}

fn parse_list(s: &str) -> std::result::Result<Vec<f64>, String> {
    s.split(',')
        .map(|t| t.trim().parse::<f64>().map_err(|_| format!("`{}` is not a number", t.trim())))
        .collect()
}
