//! Dormand–Prince 5(4) embedded pair for small autonomous-in-structure systems.

/// State dimension of the radial system (u, q).
pub(crate) const DIM: usize = 2;
pub(crate) type State = [f64; DIM];

const C2: f64 = 1.0 / 5.0;
const C3: f64 = 3.0 / 10.0;
const C4: f64 = 4.0 / 5.0;
const C5: f64 = 8.0 / 9.0;

const A21: f64 = 1.0 / 5.0;
const A31: f64 = 3.0 / 40.0;
const A32: f64 = 9.0 / 40.0;
const A41: f64 = 44.0 / 45.0;
const A42: f64 = -56.0 / 15.0;
const A43: f64 = 32.0 / 9.0;
const A51: f64 = 19372.0 / 6561.0;
const A52: f64 = -25360.0 / 2187.0;
const A53: f64 = 64448.0 / 6561.0;
const A54: f64 = -212.0 / 729.0;
const A61: f64 = 9017.0 / 3168.0;
const A62: f64 = -355.0 / 33.0;
const A63: f64 = 46732.0 / 5247.0;
const A64: f64 = 49.0 / 176.0;
const A65: f64 = -5103.0 / 18656.0;

// 5th-order weights (also row 7 of the tableau, FSAL).
const B1: f64 = 35.0 / 384.0;
const B3: f64 = 500.0 / 1113.0;
const B4: f64 = 125.0 / 192.0;
const B5: f64 = -2187.0 / 6784.0;
const B6: f64 = 11.0 / 84.0;

// Difference between the 5th- and embedded 4th-order weights.
const E1: f64 = 71.0 / 57600.0;
const E3: f64 = -71.0 / 16695.0;
const E4: f64 = 71.0 / 1920.0;
const E5: f64 = -17253.0 / 339200.0;
const E6: f64 = 22.0 / 525.0;
const E7: f64 = -1.0 / 40.0;

/// Outcome of a single trial step.
pub(crate) enum Trial {
    /// Proposed new state and scaled error norm (accept when ≤ 1).
    Step { y: State, err: f64 },
    /// The right-hand side was undefined somewhere in the step (e.g. the
    /// flux ratio left (−1, 1)); the step must be shortened.
    Undefined,
}

fn comb(y: &State, h: f64, terms: &[(f64, &State)]) -> State {
    let mut out = *y;
    for (c, k) in terms {
        for i in 0..DIM {
            out[i] += h * c * k[i];
        }
    }
    out
}

/// One Dormand–Prince trial step of size `h` (may be negative) from (x, y).
///
/// `rhs` returns `None` where the system is undefined. The error norm is
/// max_i |e_i| / (tol · (1 + max(|y_i|, |y_new_i|))).
pub(crate) fn trial_step<F>(rhs: &F, x: f64, y: &State, h: f64, tol: f64) -> Trial
where
    F: Fn(f64, &State) -> Option<State>,
{
    macro_rules! eval {
        ($x:expr, $y:expr) => {
            match rhs($x, &$y) {
                Some(k) if k.iter().all(|v| v.is_finite()) => k,
                _ => return Trial::Undefined,
            }
        };
    }
    let k1 = eval!(x, *y);
    let k2 = eval!(x + C2 * h, comb(y, h, &[(A21, &k1)]));
    let k3 = eval!(x + C3 * h, comb(y, h, &[(A31, &k1), (A32, &k2)]));
    let k4 = eval!(x + C4 * h, comb(y, h, &[(A41, &k1), (A42, &k2), (A43, &k3)]));
    let k5 = eval!(
        x + C5 * h,
        comb(y, h, &[(A51, &k1), (A52, &k2), (A53, &k3), (A54, &k4)])
    );
    let k6 = eval!(
        x + h,
        comb(y, h, &[(A61, &k1), (A62, &k2), (A63, &k3), (A64, &k4), (A65, &k5)])
    );
    let y_new = comb(y, h, &[(B1, &k1), (B3, &k3), (B4, &k4), (B5, &k5), (B6, &k6)]);
    let k7 = eval!(x + h, y_new);
    let mut err: f64 = 0.0;
    for i in 0..DIM {
        let e = h * (E1 * k1[i] + E3 * k3[i] + E4 * k4[i] + E5 * k5[i] + E6 * k6[i] + E7 * k7[i]);
        let scale = tol * (1.0 + y[i].abs().max(y_new[i].abs()));
        err = err.max(e.abs() / scale);
    }
    if !err.is_finite() {
        return Trial::Undefined;
    }
    Trial::Step { y: y_new, err }
}

/// Standard step-size update with safety factor 0.9 and growth clamped to [0.2, 5].
pub(crate) fn next_step(h: f64, err: f64) -> f64 {
    let factor = if err == 0.0 { 5.0 } else { (0.9 * err.powf(-0.2)).clamp(0.2, 5.0) };
    h * factor
}
