//! Matrix-free linear algebra for the Newton steps: vector kernels, a linear
//! operator abstraction, and Jacobi-preconditioned BiCGSTAB.

use crate::error::{Error, Result};

/// Largest dimension for which a missing diagonal is recovered by probing
/// with unit vectors.
pub const DIAGONAL_PROBE_LIMIT: usize = 10_000;

pub trait LinearOperator {
    fn dim(&self) -> usize;

    /// y ← A x
    fn apply(&self, x: &[f64], y: &mut [f64]);

    /// Diagonal entries, when cheaply known.
    fn diagonal(&self) -> Option<Vec<f64>> {
        None
    }
}

/// Row-major dense square matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct DenseMatrix {
    n: usize,
    data: Vec<f64>,
}

impl DenseMatrix {
    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let n = rows.len();
        let mut data = Vec::with_capacity(n * n);
        for row in rows {
            check_len(n, row.len())?;
            data.extend_from_slice(row);
        }
        Ok(Self { n, data })
    }

    pub fn identity(n: usize) -> Self {
        let mut data = vec![0.0; n * n];
        for i in 0..n {
            data[i * n + i] = 1.0;
        }
        Self { n, data }
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.n + j]
    }
}

impl LinearOperator for DenseMatrix {
    fn dim(&self) -> usize {
        self.n
    }

    fn apply(&self, x: &[f64], y: &mut [f64]) {
        for (i, yi) in y.iter_mut().enumerate() {
            let row = &self.data[i * self.n..(i + 1) * self.n];
            *yi = row.iter().zip(x).map(|(a, b)| a * b).sum();
        }
    }

    fn diagonal(&self) -> Option<Vec<f64>> {
        Some((0..self.n).map(|i| self.get(i, i)).collect())
    }
}

/// Wraps a closure as an operator, optionally with a known diagonal.
pub struct FnOperator<F> {
    dim: usize,
    apply: F,
    diag: Option<Vec<f64>>,
}

impl<F: Fn(&[f64], &mut [f64])> FnOperator<F> {
    pub fn new(dim: usize, apply: F) -> Self {
        Self { dim, apply, diag: None }
    }

    pub fn with_diagonal(mut self, diag: Vec<f64>) -> Self {
        self.diag = Some(diag);
        self
    }
}

impl<F: Fn(&[f64], &mut [f64])> LinearOperator for FnOperator<F> {
    fn dim(&self) -> usize {
        self.dim
    }

    fn apply(&self, x: &[f64], y: &mut [f64]) {
        (self.apply)(x, y)
    }

    fn diagonal(&self) -> Option<Vec<f64>> {
        self.diag.clone()
    }
}

fn check_len(expected: usize, actual: usize) -> Result<()> {
    if expected == actual {
        Ok(())
    } else {
        Err(Error::DimensionMismatch { expected, actual })
    }
}

/// a·x + y
pub fn axpy(a: f64, x: &[f64], y: &[f64]) -> Result<Vec<f64>> {
    check_len(x.len(), y.len())?;
    Ok(x.iter().zip(y).map(|(xi, yi)| a * xi + yi).collect())
}

/// Inner product, summed left to right.
pub fn dot(x: &[f64], y: &[f64]) -> Result<f64> {
    check_len(x.len(), y.len())?;
    Ok(dot_unchecked(x, y))
}

pub fn norm2(x: &[f64]) -> f64 {
    dot_unchecked(x, x).sqrt()
}

pub fn norm_inf(x: &[f64]) -> f64 {
    x.iter().fold(0.0, |m, v| m.max(v.abs()))
}

fn dot_unchecked(x: &[f64], y: &[f64]) -> f64 {
    x.iter().zip(y).fold(0.0, |acc, (a, b)| acc + a * b)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StopReason {
    Converged,
    MaxIterations,
    /// ρ = (r̂, r) collapsed.
    RhoBreakdown,
    /// (r̂, A p̂) collapsed.
    AlphaBreakdown,
    /// ω = 0 or (t, t) = 0.
    OmegaBreakdown,
    NonFinite,
}

#[derive(Debug, Clone)]
pub struct KrylovResult {
    pub solution: Vec<f64>,
    pub iterations: usize,
    /// ‖b − A x‖₂ of the returned solution (as tracked by the recurrence).
    pub residual_norm: f64,
    pub converged: bool,
    pub reason: StopReason,
}

#[derive(Debug, Clone, Copy)]
pub struct KrylovOptions {
    pub rtol: f64,
    pub atol: f64,
    pub max_iter: usize,
}

impl Default for KrylovOptions {
    fn default() -> Self {
        Self { rtol: 1e-10, atol: 0.0, max_iter: 1000 }
    }
}

fn jacobi_inverse<A: LinearOperator + ?Sized>(a: &A) -> Option<Vec<f64>> {
    let n = a.dim();
    let diag = match a.diagonal() {
        Some(d) => d,
        None if n <= DIAGONAL_PROBE_LIMIT => {
            let mut e = vec![0.0; n];
            let mut col = vec![0.0; n];
            let mut d = Vec::with_capacity(n);
            for i in 0..n {
                e[i] = 1.0;
                a.apply(&e, &mut col);
                d.push(col[i]);
                e[i] = 0.0;
            }
            d
        }
        None => return None,
    };
    Some(
        diag.into_iter()
            .map(|d| if d != 0.0 && d.is_finite() { 1.0 / d } else { 1.0 })
            .collect(),
    )
}

fn precondition(minv: &Option<Vec<f64>>, x: &[f64], out: &mut [f64]) {
    match minv {
        Some(m) => out.iter_mut().zip(m.iter().zip(x)).for_each(|(o, (mi, xi))| *o = mi * xi),
        None => out.copy_from_slice(x),
    }
}

/// Solves A x = b with Jacobi-preconditioned BiCGSTAB starting from x = 0.
///
/// The preconditioner is applied to the search directions, so the tracked
/// residual is the unpreconditioned b − A x and the stopping test
/// ‖b − A x‖ ≤ rtol‖b‖ + atol is on the true residual.
pub fn solve_bicgstab<A: LinearOperator + ?Sized>(
    a: &A,
    b: &[f64],
    opts: KrylovOptions,
) -> Result<KrylovResult> {
    let n = a.dim();
    check_len(n, b.len())?;
    if !(opts.rtol > 0.0 && opts.rtol < 1.0) {
        return Err(Error::param(format!("rtol must lie in (0, 1), got {}", opts.rtol)));
    }
    if opts.atol < 0.0 {
        return Err(Error::param("atol must be non-negative"));
    }
    let minv = jacobi_inverse(a);

    let mut x = vec![0.0; n];
    let mut r = b.to_vec();
    let b_norm = norm2(b);
    let target = opts.rtol * b_norm + opts.atol;
    let mut r_norm = b_norm;
    let done = |x: Vec<f64>, it: usize, rn: f64, reason: StopReason| {
        Ok(KrylovResult {
            solution: x,
            iterations: it,
            residual_norm: rn,
            converged: reason == StopReason::Converged,
            reason,
        })
    };
    if r_norm <= target {
        return done(x, 0, r_norm, StopReason::Converged);
    }

    let r_hat = r.clone();
    let mut rho = 1.0;
    let mut alpha = 1.0;
    let mut omega = 1.0;
    let mut p = vec![0.0; n];
    let mut v = vec![0.0; n];
    let mut p_hat = vec![0.0; n];
    let mut s = vec![0.0; n];
    let mut s_hat = vec![0.0; n];
    let mut t = vec![0.0; n];
    let tiny = f64::EPSILON * f64::EPSILON;

    for it in 1..=opts.max_iter {
        let rho_new = dot_unchecked(&r_hat, &r);
        if !rho_new.is_finite() {
            return done(x, it - 1, r_norm, StopReason::NonFinite);
        }
        if rho_new.abs() <= tiny * norm2(&r_hat) * r_norm {
            return done(x, it - 1, r_norm, StopReason::RhoBreakdown);
        }
        if it == 1 {
            p.copy_from_slice(&r);
        } else {
            let beta = (rho_new / rho) * (alpha / omega);
            for i in 0..n {
                p[i] = r[i] + beta * (p[i] - omega * v[i]);
            }
        }
        rho = rho_new;

        precondition(&minv, &p, &mut p_hat);
        a.apply(&p_hat, &mut v);
        let rv = dot_unchecked(&r_hat, &v);
        if rv == 0.0 || !rv.is_finite() {
            return done(x, it - 1, r_norm, StopReason::AlphaBreakdown);
        }
        alpha = rho / rv;
        for i in 0..n {
            s[i] = r[i] - alpha * v[i];
        }
        let s_norm = norm2(&s);
        if s_norm <= target {
            for i in 0..n {
                x[i] += alpha * p_hat[i];
            }
            return done(x, it, s_norm, StopReason::Converged);
        }

        precondition(&minv, &s, &mut s_hat);
        a.apply(&s_hat, &mut t);
        let tt = dot_unchecked(&t, &t);
        if tt == 0.0 || !tt.is_finite() {
            return done(x, it - 1, r_norm, StopReason::OmegaBreakdown);
        }
        omega = dot_unchecked(&t, &s) / tt;
        for i in 0..n {
            x[i] += alpha * p_hat[i] + omega * s_hat[i];
            r[i] = s[i] - omega * t[i];
        }
        r_norm = norm2(&r);
        if !r_norm.is_finite() {
            return done(x, it, r_norm, StopReason::NonFinite);
        }
        if r_norm <= target {
            return done(x, it, r_norm, StopReason::Converged);
        }
        if omega == 0.0 {
            return done(x, it, r_norm, StopReason::OmegaBreakdown);
        }
    }
    done(x, opts.max_iter, r_norm, StopReason::MaxIterations)
}
