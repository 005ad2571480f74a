//! Dirichlet data for square-domain experiments.

use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};

/// Boundary data g(x, y) on [−R, R]².
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum BoundaryData {
    /// `const:c`
    Constant(f64),
    /// `affine:a,b,c` gives a·x + b·y + c.
    Affine(f64, f64, f64),
    /// `cap:ρ` gives the lower hemisphere −√(ρ² − |x|²), mean curvature 2/ρ in 2-D.
    Cap(f64),
    /// `catenoid:c,x0,y0` gives c·arccosh(|x − x₀|/c), minimal for |x − x₀| > c.
    Catenoid(f64, f64, f64),
    /// `saddle:A` gives A(x² − y² + R·x)/(2R²). Its sup norm on the square is
    /// |A| for every R and its gradient at the center is nonzero.
    Saddle(f64),
}

impl BoundaryData {
    pub fn eval(&self, x: f64, y: f64, r_dom: f64) -> f64 {
        match *self {
            Self::Constant(c) => c,
            Self::Affine(a, b, c) => a * x + b * y + c,
            Self::Cap(rho) => -(rho * rho - x * x - y * y).sqrt(),
            Self::Catenoid(c, x0, y0) => c * ((x - x0).hypot(y - y0) / c).acosh(),
            Self::Saddle(a) => a * (x * x - y * y + r_dom * x) / (2.0 * r_dom * r_dom),
        }
    }

    /// Closure form for the grid solver.
    pub fn function(&self, r_dom: f64) -> impl Fn(f64, f64) -> f64 + '_ {
        move |x, y| self.eval(x, y, r_dom)
    }
}

impl fmt::Display for BoundaryData {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match *self {
            Self::Constant(c) => write!(f, "const:{c}"),
            Self::Affine(a, b, c) => write!(f, "affine:{a},{b},{c}"),
            Self::Cap(r) => write!(f, "cap:{r}"),
            Self::Catenoid(c, x0, y0) => write!(f, "catenoid:{c},{x0},{y0}"),
            Self::Saddle(a) => write!(f, "saddle:{a}"),
        }
    }
}

impl FromStr for BoundaryData {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        let (name, args) = s.split_once(':').unwrap_or((s, ""));
        let vals: Vec<f64> = if args.trim().is_empty() {
            Vec::new()
        } else {
            args.split(',')
                .map(|t| {
                    t.trim()
                        .parse::<f64>()
                        .ok()
                        .filter(|v| v.is_finite())
                        .ok_or_else(|| Error::param(format!("bad number `{}` in boundary data", t.trim())))
                })
                .collect::<Result<_>>()?
        };
        let arity = |k: usize| -> Result<()> {
            if vals.len() == k {
                Ok(())
            } else {
                Err(Error::param(format!("boundary data `{name}` takes {k} parameter(s)")))
            }
        };
        match name.trim() {
            "const" => arity(1).map(|_| Self::Constant(vals[0])),
            "affine" => arity(3).map(|_| Self::Affine(vals[0], vals[1], vals[2])),
            "cap" => {
                arity(1)?;
                if !(vals[0] > 0.0) {
                    return Err(Error::param("cap radius must be positive"));
                }
                Ok(Self::Cap(vals[0]))
            }
            "catenoid" => {
                arity(3)?;
                if !(vals[0] > 0.0) {
                    return Err(Error::param("catenoid neck radius must be positive"));
                }
                Ok(Self::Catenoid(vals[0], vals[1], vals[2]))
            }
            "saddle" => arity(1).map(|_| Self::Saddle(vals[0])),
            other => Err(Error::param(format!("unknown boundary data `{other}`"))),
        }
    }
}
