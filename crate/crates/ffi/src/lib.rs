//! C interface to the mcgrad solvers.
//!
//! Objects are opaque handles created by `mcg_*_new`/`mcg_*_solve` style
//! constructors and released with the matching `mcg_*_free`. Every function
//! returns an `int32_t` status (`MCG_OK` on success); on failure the message
//! is kept per thread and can be fetched with [`mcg_last_error`].
//!
//! # Safety
//!
//! All entry points share one contract. Pointer arguments must be null or
//! valid for the access described by the function (strings NUL-terminated,
//! arrays at least as long as the stated length). Handles must come from
//! this library and must not be used after being freed. Null pointers are
//! reported as `MCG_ERR_NULL_POINTER` rather than dereferenced.
#![allow(clippy::missing_safety_doc)]

use std::cell::RefCell;
use std::ffi::{c_char, c_void, CStr};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::ptr;

use mcgrad::bernstein::{coefficients_gh, verify_max_inequality, AuxConfig, FProfile, Weight};
use mcgrad::estimates::{bound_value, min_constant, BoundCase, BoundShape};
use mcgrad::fd2d::{newton_solve, read_grid, write_grid, GridField, NewtonOptions, SquareDomain};
use mcgrad::harness::{self, BoundaryData, ExperimentConfig, RunOptions};
use mcgrad::radial::{integrate_from_origin, solve_annulus_bvp, RadialSolution};
use mcgrad::{Error, NonlinearityModel};

pub const MCG_OK: i32 = 0;
pub const MCG_ERR_NULL_POINTER: i32 = -1;
pub const MCG_ERR_INVALID_ARGUMENT: i32 = -2;
pub const MCG_ERR_PARSE: i32 = -3;
pub const MCG_ERR_SOLVER: i32 = -4;
pub const MCG_ERR_IO: i32 = -5;
pub const MCG_ERR_DEGENERATE: i32 = -6;
pub const MCG_ERR_PANIC: i32 = -255;

thread_local! {
    static LAST_ERROR: RefCell<String> = const { RefCell::new(String::new()) };
}

fn set_error(msg: impl Into<String>) {
    LAST_ERROR.with(|e| *e.borrow_mut() = msg.into());
}

fn code_of(err: &Error) -> i32 {
    match err {
        Error::Config { .. } | Error::ModelSpec { .. } | Error::Json(_) => MCG_ERR_PARSE,
        Error::InvalidParameter(_) | Error::DimensionMismatch { .. } => MCG_ERR_INVALID_ARGUMENT,
        Error::NonFinite(_) | Error::Solver(_) | Error::BracketFailure(_) => MCG_ERR_SOLVER,
        Error::Degenerate(_) => MCG_ERR_DEGENERATE,
        Error::GridFormat { .. } | Error::Io(_) => MCG_ERR_IO,
    }
}

struct Fail(i32, String);

impl From<Error> for Fail {
    fn from(e: Error) -> Self {
        Fail(code_of(&e), e.to_string())
    }
}

fn fail(code: i32, msg: impl Into<String>) -> Fail {
    Fail(code, msg.into())
}

/// Runs `f`, converting errors and panics into status codes.
fn guard(f: impl FnOnce() -> Result<(), Fail>) -> i32 {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => {
            set_error("");
            MCG_OK
        }
        Ok(Err(Fail(code, msg))) => {
            set_error(msg);
            code
        }
        Err(p) => {
            let msg = p
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| p.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "unknown panic".into());
            set_error(format!("panic: {msg}"));
            MCG_ERR_PANIC
        }
    }
}

unsafe fn str_arg<'a>(p: *const c_char, name: &str) -> Result<&'a str, Fail> {
    if p.is_null() {
        return Err(fail(MCG_ERR_NULL_POINTER, format!("{name} is null")));
    }
    CStr::from_ptr(p)
        .to_str()
        .map_err(|_| fail(MCG_ERR_INVALID_ARGUMENT, format!("{name} is not valid UTF-8")))
}

unsafe fn ref_arg<'a, T>(p: *const T, name: &str) -> Result<&'a T, Fail> {
    p.as_ref().ok_or_else(|| fail(MCG_ERR_NULL_POINTER, format!("{name} is null")))
}

unsafe fn out_arg<'a, T>(p: *mut T, name: &str) -> Result<&'a mut T, Fail> {
    p.as_mut().ok_or_else(|| fail(MCG_ERR_NULL_POINTER, format!("{name} is null")))
}

unsafe fn slice_arg<'a>(p: *const f64, len: usize, name: &str) -> Result<&'a [f64], Fail> {
    if len == 0 {
        return Ok(&[]);
    }
    if p.is_null() {
        return Err(fail(MCG_ERR_NULL_POINTER, format!("{name} is null")));
    }
    Ok(std::slice::from_raw_parts(p, len))
}

unsafe fn slice_out<'a>(p: *mut f64, len: usize, name: &str) -> Result<&'a mut [f64], Fail> {
    if len == 0 {
        return Ok(&mut []);
    }
    if p.is_null() {
        return Err(fail(MCG_ERR_NULL_POINTER, format!("{name} is null")));
    }
    Ok(std::slice::from_raw_parts_mut(p, len))
}

fn parse<T: std::str::FromStr<Err = Error>>(s: &str) -> Result<T, Fail> {
    s.parse::<T>().map_err(|e| fail(MCG_ERR_PARSE, e.to_string()))
}

/// Copies the calling thread's last error message into `buf` (NUL
/// terminated, truncated to `len` bytes) and returns the full message length
/// in bytes, excluding the terminator. Pass a null buffer to query the length.
#[no_mangle]
pub unsafe extern "C" fn mcg_last_error(buf: *mut c_char, len: usize) -> usize {
    LAST_ERROR.with(|e| {
        let e = e.borrow();
        if !buf.is_null() && len > 0 {
            let n = e.len().min(len - 1);
            ptr::copy_nonoverlapping(e.as_ptr(), buf as *mut u8, n);
            *buf.add(n) = 0;
        }
        e.len()
    })
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn mcg_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr() as *const c_char
}

// ---------------------------------------------------------------------------
// Models

/// Nonlinearity f(∇u).
pub struct McgModel(NonlinearityModel);

/// Parses a model spec such as `zero`, `power:2`, `imcf:0.5`, `logpow:θ,m1`,
/// `ratio` or `const:1`.
#[no_mangle]
pub unsafe extern "C" fn mcg_model_new(spec: *const c_char, out: *mut *mut McgModel) -> i32 {
    guard(|| {
        let out = out_arg(out, "out")?;
        *out = ptr::null_mut();
        let m: NonlinearityModel = parse(str_arg(spec, "spec")?)?;
        *out = Box::into_raw(Box::new(McgModel(m)));
        Ok(())
    })
}

#[no_mangle]
pub unsafe extern "C" fn mcg_model_free(model: *mut McgModel) {
    if !model.is_null() {
        drop(Box::from_raw(model));
    }
}

/// f(p) for a gradient vector of length `dim`.
#[no_mangle]
pub unsafe extern "C" fn mcg_model_eval(
    model: *const McgModel,
    p: *const f64,
    dim: usize,
    out: *mut f64,
) -> i32 {
    guard(|| {
        let m = ref_arg(model, "model")?;
        let p = slice_arg(p, dim, "p")?;
        *out_arg(out, "out")? = m.0.eval_f(p);
        Ok(())
    })
}

/// ∇ₚf(p) written to `grad` (length `dim`).
#[no_mangle]
pub unsafe extern "C" fn mcg_model_grad(
    model: *const McgModel,
    p: *const f64,
    dim: usize,
    grad: *mut f64,
) -> i32 {
    guard(|| {
        let m = ref_arg(model, "model")?;
        let p = slice_arg(p, dim, "p")?;
        let g = slice_out(grad, dim, "grad")?;
        g.copy_from_slice(&m.0.grad_f(p));
        Ok(())
    })
}

// ---------------------------------------------------------------------------
// Radial profiles

/// Sampled radial solution.
pub struct McgRadial(RadialSolution);

/// Integrates outward from the axis with u(0) = `u0`.
#[no_mangle]
pub unsafe extern "C" fn mcg_radial_from_origin(
    model: *const McgModel,
    n: usize,
    u0: f64,
    r_max: f64,
    tol: f64,
    out: *mut *mut McgRadial,
) -> i32 {
    guard(|| {
        let out = out_arg(out, "out")?;
        *out = ptr::null_mut();
        let m = ref_arg(model, "model")?;
        let sol = integrate_from_origin(&m.0, n, u0, r_max, tol)?;
        *out = Box::into_raw(Box::new(McgRadial(sol)));
        Ok(())
    })
}

/// Solves the annulus Dirichlet problem by shooting. Returns
/// `MCG_ERR_SOLVER` without a handle when shooting does not converge.
#[no_mangle]
pub unsafe extern "C" fn mcg_radial_annulus(
    model: *const McgModel,
    n: usize,
    r_in: f64,
    r_out: f64,
    u_in: f64,
    u_out: f64,
    tol: f64,
    out: *mut *mut McgRadial,
) -> i32 {
    guard(|| {
        let out = out_arg(out, "out")?;
        *out = ptr::null_mut();
        let m = ref_arg(model, "model")?;
        let res = solve_annulus_bvp(&m.0, n, r_in, r_out, u_in, u_out, tol)?;
        if !res.converged {
            return Err(fail(
                MCG_ERR_SOLVER,
                format!("shooting did not converge (residual {:e})", res.boundary_residual),
            ));
        }
        *out = Box::into_raw(Box::new(McgRadial(res.solution)));
        Ok(())
    })
}

#[no_mangle]
pub unsafe extern "C" fn mcg_radial_free(sol: *mut McgRadial) {
    if !sol.is_null() {
        drop(Box::from_raw(sol));
    }
}

/// Number of stored nodes.
#[no_mangle]
pub unsafe extern "C" fn mcg_radial_len(sol: *const McgRadial, out: *mut usize) -> i32 {
    guard(|| {
        *out_arg(out, "out")? = ref_arg(sol, "sol")?.0.len();
        Ok(())
    })
}

/// Copies r, u and u′ at the nodes into the given arrays of capacity `cap`.
/// Any output pointer may be null to skip it. Fails when `cap` is smaller
/// than the node count.
#[no_mangle]
pub unsafe extern "C" fn mcg_radial_nodes(
    sol: *const McgRadial,
    r: *mut f64,
    u: *mut f64,
    w: *mut f64,
    cap: usize,
) -> i32 {
    guard(|| {
        let s = &ref_arg(sol, "sol")?.0;
        if cap < s.len() {
            return Err(fail(MCG_ERR_INVALID_ARGUMENT, format!("capacity {cap} < {} nodes", s.len())));
        }
        for (dst, src) in [(r, &s.r), (u, &s.u), (w, &s.w)] {
            if !dst.is_null() {
                std::slice::from_raw_parts_mut(dst, s.len()).copy_from_slice(src);
            }
        }
        Ok(())
    })
}

/// Interpolated (u, u′) at radius `r` inside the profile.
#[no_mangle]
pub unsafe extern "C" fn mcg_radial_sample(
    sol: *const McgRadial,
    r: f64,
    u: *mut f64,
    w: *mut f64,
) -> i32 {
    guard(|| {
        let s = &ref_arg(sol, "sol")?.0;
        let (uv, wv) = s
            .sample(r)
            .ok_or_else(|| fail(MCG_ERR_INVALID_ARGUMENT, format!("r = {r} outside the profile")))?;
        *out_arg(u, "u")? = uv;
        *out_arg(w, "w")? = wv;
        Ok(())
    })
}

/// Blow-up radius. `has_blowup` receives 1 and `radius` the value when the
/// integration stopped at a singularity, otherwise 0.
#[no_mangle]
pub unsafe extern "C" fn mcg_radial_blowup(
    sol: *const McgRadial,
    has_blowup: *mut i32,
    radius: *mut f64,
) -> i32 {
    guard(|| {
        let s = &ref_arg(sol, "sol")?.0;
        let has = out_arg(has_blowup, "has_blowup")?;
        let rad = out_arg(radius, "radius")?;
        match s.blowup_radius {
            Some(r) => {
                *has = 1;
                *rad = r;
            }
            None => {
                *has = 0;
                *rad = f64::NAN;
            }
        }
        Ok(())
    })
}

// ---------------------------------------------------------------------------
// Grid solutions

/// Nodal field on a square [−R, R]².
pub struct McgGrid(GridField);

/// Boundary value callback g(x, y, user_data).
pub type McgBoundaryFn = Option<unsafe extern "C" fn(x: f64, y: f64, user_data: *mut c_void) -> f64>;

fn solve_grid(model: &NonlinearityModel, r_dom: f64, nx: usize, g: impl Fn(f64, f64) -> f64) -> Result<GridField, Fail> {
    let domain = SquareDomain::new(r_dom, nx)?;
    let sol = newton_solve(model, &domain, g, &NewtonOptions::default())?;
    if !sol.converged {
        return Err(fail(
            MCG_ERR_SOLVER,
            sol.failure.unwrap_or_else(|| "Newton iteration did not converge".into()),
        ));
    }
    Ok(sol.field)
}

/// Newton solve with boundary values from a callback.
#[no_mangle]
pub unsafe extern "C" fn mcg_grid_solve(
    model: *const McgModel,
    r_dom: f64,
    nx: usize,
    boundary: McgBoundaryFn,
    user_data: *mut c_void,
    out: *mut *mut McgGrid,
) -> i32 {
    guard(|| {
        let out = out_arg(out, "out")?;
        *out = ptr::null_mut();
        let m = ref_arg(model, "model")?;
        let cb = boundary.ok_or_else(|| fail(MCG_ERR_NULL_POINTER, "boundary is null"))?;
        let field = solve_grid(&m.0, r_dom, nx, |x, y| cb(x, y, user_data))?;
        *out = Box::into_raw(Box::new(McgGrid(field)));
        Ok(())
    })
}

/// Newton solve with named boundary data (`const:c`, `affine:a,b,c`,
/// `cap:rho`, `catenoid:c,x0,y0`, `saddle:A`).
#[no_mangle]
pub unsafe extern "C" fn mcg_grid_solve_data(
    model: *const McgModel,
    r_dom: f64,
    nx: usize,
    data: *const c_char,
    out: *mut *mut McgGrid,
) -> i32 {
    guard(|| {
        let out = out_arg(out, "out")?;
        *out = ptr::null_mut();
        let m = ref_arg(model, "model")?;
        let d: BoundaryData = parse(str_arg(data, "data")?)?;
        let field = solve_grid(&m.0, r_dom, nx, d.function(r_dom))?;
        *out = Box::into_raw(Box::new(McgGrid(field)));
        Ok(())
    })
}

/// Reads a grid file.
#[no_mangle]
pub unsafe extern "C" fn mcg_grid_read(path: *const c_char, out: *mut *mut McgGrid) -> i32 {
    guard(|| {
        let out = out_arg(out, "out")?;
        *out = ptr::null_mut();
        let field = read_grid(Path::new(str_arg(path, "path")?))?;
        *out = Box::into_raw(Box::new(McgGrid(field)));
        Ok(())
    })
}

/// Writes the grid file format (atomically).
#[no_mangle]
pub unsafe extern "C" fn mcg_grid_write(grid: *const McgGrid, path: *const c_char) -> i32 {
    guard(|| {
        let g = ref_arg(grid, "grid")?;
        write_grid(Path::new(str_arg(path, "path")?), &g.0)?;
        Ok(())
    })
}

#[no_mangle]
pub unsafe extern "C" fn mcg_grid_free(grid: *mut McgGrid) {
    if !grid.is_null() {
        drop(Box::from_raw(grid));
    }
}

/// Nodes per side, half-width and spacing.
#[no_mangle]
pub unsafe extern "C" fn mcg_grid_shape(
    grid: *const McgGrid,
    nx: *mut usize,
    r_dom: *mut f64,
    h: *mut f64,
) -> i32 {
    guard(|| {
        let g = &ref_arg(grid, "grid")?.0;
        *out_arg(nx, "nx")? = g.nx;
        *out_arg(r_dom, "r_dom")? = g.r_dom;
        *out_arg(h, "h")? = g.h;
        Ok(())
    })
}

/// Copies the row-major nodal values (nx·nx entries) into `values`.
#[no_mangle]
pub unsafe extern "C" fn mcg_grid_values(grid: *const McgGrid, values: *mut f64, cap: usize) -> i32 {
    guard(|| {
        let g = &ref_arg(grid, "grid")?.0;
        if cap < g.u.len() {
            return Err(fail(MCG_ERR_INVALID_ARGUMENT, format!("capacity {cap} < {} values", g.u.len())));
        }
        slice_out(values, g.u.len(), "values")?.copy_from_slice(&g.u);
        Ok(())
    })
}

// ---------------------------------------------------------------------------
// Estimates

/// Bound shape exponents θ and η.
#[repr(C)]
#[derive(Debug, Clone, Copy)]
pub struct McgShape {
    pub theta: f64,
    pub eta: f64,
}

fn bound_args(case: *const c_char, shape: McgShape) -> Result<(BoundCase, BoundShape), Fail> {
    let case: BoundCase = parse(unsafe { str_arg(case, "case")? })?;
    Ok((case, BoundShape::new(shape.theta, shape.eta)))
}

/// Value of the bound for case `A`, `B`, `C-sq`, `C-lin`, `D` or `E`.
#[no_mangle]
pub unsafe extern "C" fn mcg_bound_value(
    case: *const c_char,
    shape: McgShape,
    r: f64,
    l: f64,
    c: f64,
    out: *mut f64,
) -> i32 {
    guard(|| {
        let (case, shape) = bound_args(case, shape)?;
        *out_arg(out, "out")? = bound_value(case, r, l, shape, c)?;
        Ok(())
    })
}

/// Smallest constant whose bound covers `observed` (|∇u| for cases A and
/// C-lin, |∇u|² otherwise). May be +∞.
#[no_mangle]
pub unsafe extern "C" fn mcg_min_constant(
    case: *const c_char,
    shape: McgShape,
    observed: f64,
    r: f64,
    l: f64,
    out: *mut f64,
) -> i32 {
    guard(|| {
        let (case, shape) = bound_args(case, shape)?;
        *out_arg(out, "out")? = min_constant(case, observed, r, l, shape)?;
        Ok(())
    })
}

/// G and H at z > 0 for profile `z` or `log1pz`.
#[no_mangle]
pub unsafe extern "C" fn mcg_coefficients_gh(
    profile: *const c_char,
    z: f64,
    g: *mut f64,
    h: *mut f64,
) -> i32 {
    guard(|| {
        let f: FProfile = parse(str_arg(profile, "profile")?)?;
        let (gv, hv) = coefficients_gh(f, z)?;
        *out_arg(g, "g")? = gv;
        *out_arg(h, "h")? = hv;
        Ok(())
    })
}

/// Summary of the inequality at the discrete maximum of hFφ.
#[repr(C)]
#[derive(Debug, Clone, Copy)]
pub struct McgArgmaxReport {
    pub i: usize,
    pub j: usize,
    pub x: f64,
    pub y: f64,
    pub p_max: f64,
    pub z: f64,
    pub stationarity: f64,
    pub terms: [f64; 9],
    pub lhs: f64,
    pub rhs: f64,
    pub margin: f64,
    pub required_constant: f64,
    pub h: f64,
}

/// Locates the argmax of hFφ on the grid and evaluates I₁…I₉ there.
/// `weight` is `one`, `power:b` or `power:b,plus1`.
#[no_mangle]
pub unsafe extern "C" fn mcg_argmax_inequality(
    grid: *const McgGrid,
    model: *const McgModel,
    profile: *const c_char,
    weight: *const c_char,
    alpha: f64,
    c_suite: f64,
    out: *mut McgArgmaxReport,
) -> i32 {
    guard(|| {
        let g = ref_arg(grid, "grid")?;
        let m = ref_arg(model, "model")?;
        let f: FProfile = parse(str_arg(profile, "profile")?)?;
        let w: Weight = parse(str_arg(weight, "weight")?)?;
        let out = out_arg(out, "out")?;
        let d = verify_max_inequality(&g.0, &m.0, &AuxConfig::new(f, w, alpha), c_suite)?;
        *out = McgArgmaxReport {
            i: d.argmax.0,
            j: d.argmax.1,
            x: d.argmax_xy.0,
            y: d.argmax_xy.1,
            p_max: d.p_max,
            z: d.z_at_argmax,
            stationarity: d.stationarity,
            terms: d.i_terms,
            lhs: d.lhs,
            rhs: d.rhs,
            margin: d.margin,
            required_constant: d.required_constant(),
            h: d.h,
        };
        Ok(())
    })
}

// ---------------------------------------------------------------------------
// Experiments

/// Runs an experiment config file, writing reports under `out_dir`.
/// `exit_code` receives the command-line exit code (0 ok, 1 I/O, 2 config,
/// 3 solver failure, 4 violation); the return value is `MCG_OK` whenever
/// the run completed, including runs that found violations.
#[no_mangle]
pub unsafe extern "C" fn mcg_run_config(
    config_path: *const c_char,
    out_dir: *const c_char,
    jobs: usize,
    force: i32,
    exit_code: *mut i32,
) -> i32 {
    guard(|| {
        let code = out_arg(exit_code, "exit_code")?;
        let cfg = ExperimentConfig::from_path(Path::new(str_arg(config_path, "config_path")?));
        let mut opts = RunOptions::new(str_arg(out_dir, "out_dir")?);
        opts.jobs = jobs;
        opts.force = force != 0;
        match cfg.and_then(|c| harness::run(&c, &opts)) {
            Ok(outcome) => {
                *code = outcome.exit_code();
                Ok(())
            }
            Err(e) => {
                *code = harness::exit_code(&e);
                Err(e.into())
            }
        }
    })
}
