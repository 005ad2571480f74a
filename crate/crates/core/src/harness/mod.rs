//! Experiment orchestration behind the `mcgrad` command line.
//!
//! [`run`] dispatches a validated [`ExperimentConfig`] to its pipeline and
//! writes every report atomically into the output directory. Reports contain
//! no timings or paths, so identical configs and seeds give byte-identical
//! files.

pub mod boundary;
pub mod config;
pub mod sweep;

use std::path::{Path, PathBuf};

use serde_json::{json, Value};

pub use boundary::BoundaryData;
pub use config::{DomainKind, ExperimentConfig, Ini, Kind};
pub use sweep::{
    blowup_envelope, liouville_probe, radial_liouville_probe, BlowupEnvelope, Instance,
    SweepReport, SweepRow,
};

use crate::bernstein::verify_max_inequality;
use crate::error::{Error, Result};
use crate::estimates::BoundRow;
use crate::fd2d::{
    encode_grid, newton_solve, read_grid, write_grid, GridField, NewtonOptions, SquareDomain,
};
use crate::fsutil::atomic_write;
use crate::nonlinearity::{check_condition, synthesize_constants, SampleSpec};
use crate::radial::{
    integrate_from_origin_with, solve_annulus_bvp_with, RadialOptions, RadialSolution,
    ShootingOptions,
};

pub const EXIT_OK: i32 = 0;
pub const EXIT_IO: i32 = 1;
pub const EXIT_CONFIG: i32 = 2;
pub const EXIT_SOLVER: i32 = 3;
pub const EXIT_VIOLATION: i32 = 4;

/// Process exit code for an error.
pub fn exit_code(err: &Error) -> i32 {
    match err {
        Error::Config { .. }
        | Error::ModelSpec { .. }
        | Error::InvalidParameter(_)
        | Error::DimensionMismatch { .. } => EXIT_CONFIG,
        Error::Solver(_) | Error::BracketFailure(_) | Error::NonFinite(_) | Error::Degenerate(_) => {
            EXIT_SOLVER
        }
        Error::GridFormat { .. } | Error::Io(_) | Error::Json(_) => EXIT_IO,
    }
}

/// Command-line settings that are not part of the config.
#[derive(Debug, Clone, PartialEq)]
pub struct RunOptions {
    pub out_dir: PathBuf,
    /// Worker threads for sweeps; 0 uses all cores.
    pub jobs: usize,
    pub gnuplot: bool,
    /// Recompute 2-D solutions even when cached.
    pub force: bool,
}

impl RunOptions {
    pub fn new(out_dir: impl Into<PathBuf>) -> Self {
        Self {
            out_dir: out_dir.into(),
            jobs: 0,
            gnuplot: false,
            force: false,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Status {
    Ok,
    SolverFailure,
    Violation,
}

/// What a run produced.
#[derive(Debug, Clone, PartialEq)]
pub struct RunOutcome {
    pub status: Status,
    pub files: Vec<PathBuf>,
    /// One-line human summary.
    pub message: String,
}

impl RunOutcome {
    pub fn exit_code(&self) -> i32 {
        match self.status {
            Status::Ok => EXIT_OK,
            Status::SolverFailure => EXIT_SOLVER,
            Status::Violation => EXIT_VIOLATION,
        }
    }
}

struct Emitter<'a> {
    dir: &'a Path,
    files: Vec<PathBuf>,
}

impl Emitter<'_> {
    fn write(&mut self, name: &str, bytes: &[u8]) -> Result<()> {
        let p = self.dir.join(name);
        atomic_write(&p, bytes)?;
        self.files.push(p);
        Ok(())
    }

    fn json(&mut self, name: &str, v: &Value) -> Result<()> {
        let mut s = serde_json::to_string_pretty(v)?;
        s.push('\n');
        self.write(name, s.as_bytes())
    }

    fn gnuplot(&mut self, enabled: bool, name: &str, csv: &str, x: usize, y: usize, logscale: bool, title: &str) -> Result<()> {
        if !enabled {
            return Ok(());
        }
        let mut s = String::from("set datafile separator ','\nset key autotitle columnhead\n");
        if logscale {
            s.push_str("set logscale xy\n");
        }
        s.push_str(&format!(
            "set title '{title}'\nplot '{csv}' using {x}:{y} with linespoints\npause -1\n"
        ));
        self.write(name, s.as_bytes())
    }
}

/// Runs one experiment.
pub fn run(cfg: &ExperimentConfig, opts: &RunOptions) -> Result<RunOutcome> {
    let mut em = Emitter { dir: &opts.out_dir, files: Vec::new() };
    let (status, message) = match cfg.kind {
        Kind::CheckConditions => run_conditions(cfg, &mut em)?,
        Kind::SolveRadial => run_radial(cfg, opts, &mut em)?,
        Kind::Solve2D => run_2d(cfg, opts, &mut em)?,
        Kind::ValidateBounds => run_validate(cfg, opts, &mut em)?,
        Kind::FitDecay => run_fit_decay(cfg, opts, &mut em)?,
        Kind::BernsteinDiagnose => run_bernstein(cfg, opts, &mut em)?,
        Kind::Sweep => run_sweep(cfg, opts, &mut em)?,
    };
    Ok(RunOutcome { status, files: em.files, message })
}

fn header(cfg: &ExperimentConfig) -> Value {
    json!({
        "kind": cfg.kind.name(),
        "model": cfg.model.to_string(),
        "seed": cfg.seed,
        "config_key": format!("{:016x}", cfg.cache_key()),
    })
}

fn radial_opts(cfg: &ExperimentConfig) -> RadialOptions {
    RadialOptions::with_tol(cfg.solver.tol)
}

fn newton_opts(cfg: &ExperimentConfig) -> NewtonOptions {
    NewtonOptions {
        atol: cfg.solver.newton_atol,
        max_newton: cfg.solver.max_newton,
        linear_rtol: cfg.solver.linear_rtol,
        ..NewtonOptions::default()
    }
}

fn run_conditions(cfg: &ExperimentConfig, em: &mut Emitter) -> Result<(Status, String)> {
    let c = &cfg.conditions;
    let sampling = SampleSpec {
        magnitudes: c.magnitudes,
        directions: c.directions,
        seed: cfg.seed,
        ..SampleSpec::default()
    };
    let (spec, synthesized) = match c.spec {
        Some(s) => (Some(s), false),
        None => (synthesize_constants(&cfg.model, c.tag, &sampling), true),
    };
    let mut out = header(cfg);
    out["tag"] = json!(c.tag.to_string());
    out["synthesized"] = json!(synthesized);
    let Some(spec) = spec else {
        out["feasible"] = json!(false);
        em.json("conditions.json", &out)?;
        return Ok((Status::Violation, format!("{}: no constants found for {}", cfg.model, c.tag)));
    };
    let rep = check_condition(&cfg.model, &spec, &sampling)?;
    out["feasible"] = json!(true);
    out["constants"] = json!({"m1": spec.m1, "m2": spec.m2, "m3": spec.m3, "theta": spec.theta});
    out["holds"] = json!(rep.holds);
    out["samples_checked"] = json!(rep.samples_checked);
    out["worst_margin"] = json!(rep.worst_margin);
    out["witness"] = json!(rep.witness);
    em.json("conditions.json", &out)?;
    let verdict = if rep.holds { "holds" } else { "violated" };
    let msg = format!("{} {} {verdict} on {} samples", cfg.model, c.tag, rep.samples_checked);
    Ok((if rep.holds { Status::Ok } else { Status::Violation }, msg))
}

/// Radial profile for the configured geometry: from the origin for a ball,
/// by shooting for an annulus.
fn radial_profile(cfg: &ExperimentConfig, r: f64) -> Result<(RadialSolution, Value)> {
    let g = &cfg.geometry;
    if g.inner > 0.0 {
        let opts = ShootingOptions { radial: radial_opts(cfg), ..ShootingOptions::default() };
        let b = &cfg.boundary;
        let res = solve_annulus_bvp_with(&cfg.model, g.n, g.inner, r, b.u_in, b.u_out, &opts)?;
        let meta = json!({
            "initial_slope": res.initial_slope,
            "boundary_residual": res.boundary_residual,
            "iterations": res.iterations,
            "converged": res.converged,
        });
        Ok((res.solution, meta))
    } else {
        let sol = integrate_from_origin_with(&cfg.model, g.n, cfg.boundary.u0, r, &radial_opts(cfg))?;
        Ok((sol, json!({})))
    }
}

fn run_radial(cfg: &ExperimentConfig, opts: &RunOptions, em: &mut Emitter) -> Result<(Status, String)> {
    let r = cfg.geometry.radii[cfg.geometry.radii.len() - 1];
    let mut out = header(cfg);
    out["n"] = json!(cfg.geometry.n);
    out["r"] = json!(r);
    out["inner"] = json!(cfg.geometry.inner);
    let (sol, meta) = match radial_profile(cfg, r) {
        Ok(v) => v,
        Err(e) if exit_code(&e) == EXIT_SOLVER => {
            out["failure"] = json!(e.to_string());
            em.json("summary.json", &out)?;
            return Ok((Status::SolverFailure, e.to_string()));
        }
        Err(e) => return Err(e),
    };
    em.write("profile.csv", sol.to_csv_string().as_bytes())?;
    out["shooting"] = meta;
    out["blowup_radius"] = json!(sol.blowup_radius);
    out["r_last"] = json!(sol.r_last());
    out["max_abs_w"] = json!(sol.max_abs_w());
    out["accepted_steps"] = json!(sol.meta.accepted_steps);
    out["rejected_steps"] = json!(sol.meta.rejected_steps);
    em.json("summary.json", &out)?;
    em.gnuplot(opts.gnuplot, "profile.gp", "profile.csv", 1, 2, false, "u(r)")?;
    let msg = match sol.blowup_radius {
        Some(rs) => format!("blow-up at R* = {rs:.12}"),
        None => format!("integrated to r = {}", sol.r_last()),
    };
    Ok((Status::Ok, msg))
}

/// Result of a 2-D solve, possibly read back from the cache.
struct GridRun {
    field: GridField,
    /// Solver statistics; identical for a cache hit and a recompute.
    meta: Value,
    failure: Option<String>,
    cache_hit: bool,
}

/// 2-D solve with the on-disk cache under `<out>/cache/`: `<key>.grid` holds
/// the field and `<key>.json` the solver statistics.
fn solve_grid_cached(cfg: &ExperimentConfig, opts: &RunOptions, r: f64) -> Result<GridRun> {
    let key = format!("{:016x}", cfg.solution_key(r));
    let dir = opts.out_dir.join("cache");
    let (grid_path, meta_path) = (dir.join(format!("{key}.grid")), dir.join(format!("{key}.json")));
    if !opts.force && grid_path.exists() {
        let meta = std::fs::read(&meta_path)
            .ok()
            .and_then(|b| serde_json::from_slice::<Value>(&b).ok());
        if let Some(meta) = meta {
            let field = read_grid(&grid_path)?;
            return Ok(GridRun { field, meta, failure: None, cache_hit: true });
        }
    }
    let domain = SquareDomain::new(r, cfg.geometry.grid)?;
    let sol = newton_solve(&cfg.model, &domain, cfg.boundary.data.function(r), &newton_opts(cfg))?;
    let meta = json!({
        "cache_key": key,
        "converged": sol.converged,
        "residual_norm": sol.residual_norm,
        "newton_iterations": sol.newton_iterations,
        "linear_iterations": sol.linear_iterations,
    });
    if sol.converged {
        write_grid(&grid_path, &sol.field)?;
        atomic_write(&meta_path, serde_json::to_string(&meta)?.as_bytes())?;
        Ok(GridRun { field: sol.field, meta, failure: None, cache_hit: false })
    } else {
        let why = sol.failure.unwrap_or_else(|| "no convergence".into());
        Ok(GridRun { field: sol.field, meta, failure: Some(why), cache_hit: false })
    }
}

fn run_2d(cfg: &ExperimentConfig, opts: &RunOptions, em: &mut Emitter) -> Result<(Status, String)> {
    let r = cfg.geometry.radii[0];
    let mut out = header(cfg);
    out["r"] = json!(r);
    out["grid"] = json!(cfg.geometry.grid);
    out["boundary"] = json!(cfg.boundary.data.to_string());
    let run = solve_grid_cached(cfg, opts, r)?;
    out["solve"] = run.meta;
    em.write("solution.grid", &encode_grid(&run.field))?;
    if let Some(why) = run.failure {
        out["failure"] = json!(why);
        em.json("summary.json", &out)?;
        return Ok((Status::SolverFailure, why));
    }
    em.json("summary.json", &out)?;
    let source = if run.cache_hit { " (cached)" } else { "" };
    Ok((Status::Ok, format!("solved {}² grid on [-{r}, {r}]²{source}", cfg.geometry.grid)))
}

fn run_validate(cfg: &ExperimentConfig, opts: &RunOptions, em: &mut Emitter) -> Result<(Status, String)> {
    let b = cfg.bound;
    let r = cfg.geometry.radii[0];
    let mut out = header(cfg);
    out["case"] = json!(b.case.to_string());
    let inst = match cfg.geometry.domain {
        DomainKind::Grid => {
            let run = solve_grid_cached(cfg, opts, r)?;
            out["solve"] = run.meta;
            if let Some(why) = run.failure {
                out["failure"] = json!(why);
                em.json("summary.json", &out)?;
                return Ok((Status::SolverFailure, why));
            }
            sweep::grid_instance(b.case, b.shape, &run.field, b.z_min)?
        }
        DomainKind::Radial => {
            let (sol, _) = match radial_profile(cfg, r) {
                Ok(v) => v,
                Err(e) if exit_code(&e) == EXIT_SOLVER => {
                    out["failure"] = json!(e.to_string());
                    em.json("summary.json", &out)?;
                    return Ok((Status::SolverFailure, e.to_string()));
                }
                Err(e) => return Err(e),
            };
            let outer = sol.r_last();
            sweep::radial_instance(b.case, b.shape, &sol, cfg.geometry.inner, outer, b.z_min)?
        }
    };
    let c_min = inst.c_min();
    let c = b.c.unwrap_or(c_min);
    let mut rows = Vec::with_capacity(inst.nodes.len());
    let mut violations = 0;
    for n in &inst.nodes {
        let bound = crate::estimates::bound_value(b.case, n.r, n.l, b.shape, c)?;
        if bound < n.observed * (1.0 - sweep::BOUND_SLACK) {
            violations += 1;
        }
        rows.push(BoundRow {
            case: b.case,
            r: n.r,
            l: n.l,
            theta: b.shape.theta,
            eta: b.shape.eta,
            c,
            bound,
            observed: n.observed,
        });
    }
    let mut csv = Vec::new();
    crate::estimates::write_bound_csv(&rows, &mut csv)?;
    em.write("bounds.csv", &csv)?;
    out["c"] = json!(c);
    out["c_calibrated"] = json!(b.c.is_none());
    out["c_min"] = json!(c_min);
    out["nodes"] = json!(rows.len());
    out["violations"] = json!(violations);
    em.json("summary.json", &out)?;
    em.gnuplot(opts.gnuplot, "bounds.gp", "bounds.csv", 2, 8, true, "observed vs inscribed radius")?;
    let msg = format!("case {}: C = {c:.6e}, {violations} violation(s) over {} nodes", b.case, rows.len());
    Ok((if violations == 0 { Status::Ok } else { Status::Violation }, msg))
}

fn run_fit_decay(cfg: &ExperimentConfig, opts: &RunOptions, em: &mut Emitter) -> Result<(Status, String)> {
    let g = &cfg.geometry;
    let rep = match g.domain {
        DomainKind::Grid => liouville_probe(&cfg.model, &cfg.boundary.data, &g.radii, g.grid, opts.jobs)?,
        DomainKind::Radial => {
            radial_liouville_probe(&cfg.model, g.n, cfg.boundary.u0, &g.radii, &radial_opts(cfg))?
        }
    };
    emit_sweep(cfg, opts, em, &rep, "decay")?;
    let failed = rep.rows.iter().filter(|r| !r.converged).count();
    let msg = match rep.slope {
        Some(s) => format!("decay slope {s:.6} over {} radii", rep.rows.len() - failed),
        None => "degenerate: decay slope undefined".to_string(),
    };
    // A flat family is a valid (degenerate) outcome; too few solved radii is not.
    let status = if rep.rows.len() - failed < 3 { Status::SolverFailure } else { Status::Ok };
    Ok((status, msg))
}

fn emit_sweep(cfg: &ExperimentConfig, opts: &RunOptions, em: &mut Emitter, rep: &SweepReport, stem: &str) -> Result<()> {
    em.write(&format!("{stem}.csv"), rep.to_csv().as_bytes())?;
    let mut out = header(cfg);
    out["report"] = serde_json::to_value(rep)?;
    out["min_constant_nonincreasing"] = json!(rep.min_constant_nonincreasing());
    out["sup_grad_decreasing"] = json!(rep.sup_grad_decreasing());
    out["violations"] = json!(rep.total_violations());
    em.json(&format!("{stem}.json"), &out)?;
    em.gnuplot(opts.gnuplot, &format!("{stem}.gp"), &format!("{stem}.csv"), 1, 4, true, "sup gradient vs R")
}

fn run_bernstein(cfg: &ExperimentConfig, opts: &RunOptions, em: &mut Emitter) -> Result<(Status, String)> {
    let r = cfg.geometry.radii[0];
    let run = solve_grid_cached(cfg, opts, r)?;
    let field = run.field;
    let mut out = header(cfg);
    out["solve"] = run.meta;
    if let Some(why) = run.failure {
        out["failure"] = json!(why);
        em.json("bernstein.json", &out)?;
        return Ok((Status::SolverFailure, why));
    }
    let bs = cfg.bernstein;
    let probe = verify_max_inequality(&field, &cfg.model, &bs.aux, 0.0)?;
    let c_suite = bs.c_suite.unwrap_or_else(|| probe.required_constant());
    let diag = verify_max_inequality(&field, &cfg.model, &bs.aux, c_suite)?;
    let threshold = -bs.k_tol * diag.h;
    let mut d = diag.to_json();
    d["c_suite_calibrated"] = json!(bs.c_suite.is_none());
    d["required_constant"] = json!(probe.required_constant());
    d["margin_threshold"] = json!(threshold);
    out["diagnostics"] = d;
    em.json("bernstein.json", &out)?;
    let ok = diag.margin >= threshold;
    let msg = format!("margin {:.6e} (threshold {threshold:.3e}) at ({}, {})", diag.margin, diag.argmax_xy.0, diag.argmax_xy.1);
    Ok((if ok { Status::Ok } else { Status::Violation }, msg))
}

fn run_sweep(cfg: &ExperimentConfig, opts: &RunOptions, em: &mut Emitter) -> Result<(Status, String)> {
    let g = &cfg.geometry;
    let b = cfg.bound;
    if g.domain == DomainKind::Radial && g.radii.len() == 1 && g.inner == 0.0 {
        // Single radius on a ball: blow-up envelope of |u′| against R* − r.
        let env = match blowup_envelope(&cfg.model, g.n, cfg.boundary.u0, g.radii[0], sweep::ENVELOPE_WINDOW, &radial_opts(cfg)) {
            Ok(e) => e,
            Err(e) if exit_code(&e) == EXIT_SOLVER => {
                let mut out = header(cfg);
                out["failure"] = json!(e.to_string());
                em.json("envelope.json", &out)?;
                return Ok((Status::SolverFailure, e.to_string()));
            }
            Err(e) => return Err(e),
        };
        let mut csv = String::from("distance,abs_du\n");
        for (d, w) in &env.pairs {
            csv.push_str(&format!("{d:.16e},{w:.16e}\n"));
        }
        em.write("envelope.csv", csv.as_bytes())?;
        let mut out = header(cfg);
        out["r_star"] = json!(env.r_star);
        out["c_star"] = json!(env.c_star);
        out["slope"] = json!(env.slope);
        out["intercept"] = json!(env.intercept);
        out["window"] = json!([sweep::ENVELOPE_WINDOW.0, sweep::ENVELOPE_WINDOW.1]);
        out["points"] = json!(env.pairs.len());
        em.json("envelope.json", &out)?;
        em.gnuplot(opts.gnuplot, "envelope.gp", "envelope.csv", 1, 2, true, "|u'| vs R* - r")?;
        return Ok((Status::Ok, format!("R* = {:.10}, slope {:.4}, C* = {:.6}", env.r_star, env.slope, env.c_star)));
    }
    let instances = match g.domain {
        DomainKind::Grid => sweep::grid_sweep(
            &cfg.model,
            &cfg.boundary.data,
            &g.radii,
            g.grid,
            b.case,
            b.shape,
            b.z_min,
            &newton_opts(cfg),
            opts.jobs,
        )?,
        DomainKind::Radial => {
            let r_max = g.radii[g.radii.len() - 1];
            let (sol, _) = radial_profile(cfg, r_max)?;
            let mut v = Vec::new();
            for &r in &g.radii {
                if r > sol.r_last() || (g.inner > 0.0 && r != r_max) {
                    v.push(Instance::failed(r, "radius not covered by the profile"));
                } else {
                    v.push(sweep::radial_instance(b.case, b.shape, &sol, g.inner, r, b.z_min)?);
                }
            }
            v
        }
    };
    let rep = SweepReport::assemble(b.case, b.shape, instances, b.c)?;
    emit_sweep(cfg, opts, em, &rep, "sweep")?;
    let violations = rep.total_violations();
    let msg = format!(
        "case {}: C* = {:.6e}, {violations} violation(s), slope {:?}",
        b.case, rep.c_star, rep.slope
    );
    let status = if violations > 0 {
        Status::Violation
    } else if rep.rows.iter().any(|r| !r.converged) {
        Status::SolverFailure
    } else {
        Status::Ok
    };
    Ok((status, msg))
}
