//! Acceptance suite: one PASS/FAIL line per criterion.
//!
//! Runs without the libtest harness so the lines always print. The process
//! exits non-zero when any criterion fails.

use std::time::{Duration, Instant};

use mcgrad::bernstein::{
    coefficients_gh, cutoff_phi, default_alpha, verify_max_inequality, weight_h, AuxConfig,
    AuxDiagnostics, FProfile, Weight, DEFAULT_Z_MIN,
};
use mcgrad::estimates::{bound_value, BoundCase, BoundShape};
use mcgrad::fd2d::{newton_solve, GridField, NewtonOptions, SquareDomain};
use mcgrad::harness::boundary::BoundaryData;
use mcgrad::harness::sweep::{
    blowup_envelope, grid_sweep, liouville_probe, radial_instance, Instance, SweepReport,
    ENVELOPE_WINDOW,
};
use mcgrad::nonlinearity::{
    check_condition, synthesize_constants, ConditionSpec, ConditionTag, SampleSpec,
};
use mcgrad::radial::{integrate_from_origin, solve_annulus_bvp, RadialOptions};
use mcgrad::NonlinearityModel;

// Pinned tolerances.
const SPHERE_TOL: f64 = 1e-8;
const CATENOID_TOL: f64 = 1e-8;
const ORDER_RATIO: (f64, f64) = (3.5, 4.5);
const ENVELOPE_SPREAD: f64 = 2.0;
const ENVELOPE_SLOPE: (f64, f64) = (-1.0, -0.3);
const BERNSTEIN_K: f64 = 4.0;
const GH_REL_TOL: f64 = 1e-12;

type Check = Result<String, String>;

struct Criterion {
    id: u32,
    name: &'static str,
    limit: Duration,
    run: fn() -> Check,
}

fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

fn sci(v: &[f64]) -> String {
    let items: Vec<String> = v.iter().map(|x| format!("{x:.4e}")).collect();
    format!("[{}]", items.join(", "))
}

fn e2s<E: std::fmt::Display>(e: E) -> String {
    e.to_string()
}

// 1. Sphere cap from the axis.
fn sphere_cap_radial() -> Check {
    let model = NonlinearityModel::constant(1.0).map_err(e2s)?;
    let sol = integrate_from_origin(&model, 2, -2.0, 1.9, 1e-12).map_err(e2s)?;
    ensure(sol.blowup_radius.is_none() && sol.r_last() == 1.9, || "profile stopped early".into())?;
    let exact = |r: f64| -(4.0 - r * r).sqrt();
    let mut err: f64 = 0.0;
    for (&r, &u) in sol.r.iter().zip(&sol.u) {
        err = err.max((u - exact(r)).abs());
    }
    for k in 0..=1900 {
        let r = k as f64 / 1000.0;
        let (u, _) = sol.sample(r).ok_or("sample outside profile")?;
        err = err.max((u - exact(r)).abs());
    }
    ensure(err <= SPHERE_TOL, || format!("max error {err:.3e} > {SPHERE_TOL:.0e}"))?;
    Ok(format!("max |u − (−√(4−r²))| on [0, 1.9] = {err:.3e}"))
}

// 2. Catenoid by annulus shooting.
fn catenoid_shooting() -> Check {
    let (r_in, r_out) = (1.25, 3.0);
    let res = solve_annulus_bvp(
        &NonlinearityModel::Zero,
        2,
        r_in,
        r_out,
        r_in.acosh(),
        r_out.acosh(),
        1e-12,
    )
    .map_err(e2s)?;
    ensure(res.converged, || "shooting did not converge".into())?;
    let (_, w) = res.solution.sample(2.0).ok_or("r = 2 not covered")?;
    let err = (w - 1.0 / 3f64.sqrt()).abs();
    ensure(err <= CATENOID_TOL, || format!("|w(2) − 1/√3| = {err:.3e}"))?;
    Ok(format!("w(2) = {w:.12}, error {err:.3e}"))
}

fn cap_data(x: f64, y: f64) -> f64 {
    -(4.0 - x * x - y * y).sqrt()
}

fn solve_field(model: &NonlinearityModel, r: f64, nx: usize, g: impl Fn(f64, f64) -> f64) -> Result<GridField, String> {
    let domain = SquareDomain::new(r, nx).map_err(e2s)?;
    let sol = newton_solve(model, &domain, g, &NewtonOptions::default()).map_err(e2s)?;
    if !sol.converged {
        return Err(format!("Newton failed on {nx}²: {:?}", sol.failure));
    }
    Ok(sol.field)
}

// 3. Second-order convergence of the grid solver.
fn grid_order() -> Check {
    let model = NonlinearityModel::constant(1.0).map_err(e2s)?;
    let mut errs = Vec::new();
    for nx in [33, 65, 129] {
        let t = Instant::now();
        let f = solve_field(&model, 1.0, nx, cap_data)?;
        let el = t.elapsed();
        ensure(el < Duration::from_secs(30), || format!("{nx}² solve took {el:?}"))?;
        let mut e: f64 = 0.0;
        for j in 0..f.ny {
            for i in 0..f.nx {
                e = e.max((f.at(i, j) - cap_data(f.x(i), f.y(j))).abs());
            }
        }
        errs.push(e);
    }
    let ratios = [errs[0] / errs[1], errs[1] / errs[2]];
    for q in ratios {
        ensure((ORDER_RATIO.0..=ORDER_RATIO.1).contains(&q), || {
            format!("errors {}, ratio {q:.3} outside {ORDER_RATIO:?}", sci(&errs))
        })?;
    }
    Ok(format!("errors {}, ratios {:.3} {:.3}", sci(&errs), ratios[0], ratios[1]))
}

// 4. Structural conditions.
fn condition_suite() -> Check {
    let sampling = SampleSpec::default();
    let mut confirmed = Vec::new();
    let mut expect = |model: NonlinearityModel, tag: ConditionTag, theta: Option<f64>| -> Result<(), String> {
        let spec = synthesize_constants(&model, tag, &sampling)
            .ok_or_else(|| format!("{model:?}: no constants for {tag}"))?;
        if let Some(t) = theta {
            ensure(spec.theta == Some(t), || format!("{model:?} {tag}: θ = {:?}, want {t}", spec.theta))?;
        }
        let rep = check_condition(&model, &spec, &sampling).map_err(e2s)?;
        ensure(rep.holds, || format!("{model:?} {tag} rejected at {:?}", rep.witness))?;
        confirmed.push(format!("{tag}"));
        Ok(())
    };
    for theta in [0.5, 1.0, 2.0] {
        expect(NonlinearityModel::power(theta).map_err(e2s)?, ConditionTag::A1, None)?;
    }
    for eps in [0.25, 0.5, 1.0] {
        expect(NonlinearityModel::imcf(eps).map_err(e2s)?, ConditionTag::A1, Some(1.0))?;
    }
    expect(NonlinearityModel::log_power(2.0, 1.0).map_err(e2s)?, ConditionTag::A2, None)?;
    for theta in [0.5, 1.0] {
        expect(NonlinearityModel::log_power(theta, 1.0).map_err(e2s)?, ConditionTag::A3, None)?;
    }
    expect(NonlinearityModel::BoundedRatio, ConditionTag::A4, None)?;
    expect(NonlinearityModel::constant(1.0).map_err(e2s)?, ConditionTag::A4, None)?;

    let power2 = NonlinearityModel::power(2.0).map_err(e2s)?;
    let rep = check_condition(&power2, &ConditionSpec::a1(0.5, 1.0, 2.0), &sampling).map_err(e2s)?;
    let w = rep.witness.ok_or("no witness for Power(2) against A1(1/2, 1, 2)")?;
    ensure(!rep.holds, || "violation not reported".into())?;
    Ok(format!("{} conditions confirmed; witness |p| = {:.3e}", confirmed.len(), w.iter().map(|v| v * v).sum::<f64>().sqrt()))
}

// 5. Blow-up envelope of the regularized inverse mean curvature flow.
fn imcf_envelope() -> Check {
    let mut normalized = Vec::new();
    let mut slopes = Vec::new();
    for eps in [0.25, 0.5, 1.0] {
        let model = NonlinearityModel::imcf(eps).map_err(e2s)?;
        let env = blowup_envelope(&model, 2, 0.0, 10.0 / eps, ENVELOPE_WINDOW, &RadialOptions::default())
            .map_err(e2s)?;
        for &(d, w) in &env.pairs {
            ensure(w <= env.c_star / d * (1.0 + 1e-12), || format!("ε = {eps}: |u′| above C*/(R*−r) at d = {d:e}"))?;
        }
        let m2 = synthesize_constants(&model, ConditionTag::A1, &SampleSpec::default())
            .and_then(|s| s.m2)
            .ok_or("no A1 constants")?;
        normalized.push(env.c_star * m2.sqrt());
        slopes.push(env.slope);
    }
    let lo = normalized.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = normalized.iter().copied().fold(0.0, f64::max);
    ensure(hi < ENVELOPE_SPREAD * lo, || format!("C*·√m₂ = {normalized:.4?} varies by ≥ 2×"))?;
    for &s in &slopes {
        ensure((ENVELOPE_SLOPE.0..=ENVELOPE_SLOPE.1).contains(&s), || format!("slope {s:.4} outside {ENVELOPE_SLOPE:?}"))?;
    }
    Ok(format!("C*·√m₂ = {normalized:.4?} (spread {:.4}), slopes {slopes:.4?}", hi / lo))
}

fn family_check(name: &str, case: BoundCase, instances: Vec<Instance>) -> Result<String, String> {
    let shape = BoundShape::default();
    let n = instances.len();
    let rep = SweepReport::assemble(case, shape, instances, None).map_err(e2s)?;
    let conv = rep.rows.iter().filter(|r| r.converged).count();
    ensure(conv == n && conv >= 4, || format!("{name}: {conv}/{n} converged"))?;
    ensure(rep.total_violations() == 0, || format!("{name}: {} violations", rep.total_violations()))?;
    let cm: Vec<f64> = rep.rows.iter().map(|r| r.c_min).collect();
    ensure(rep.min_constant_nonincreasing(), || format!("{name}: C_min {} increases with R", sci(&cm)))?;
    Ok(format!("{name} C*={:.4}", rep.c_star))
}

// 6. Bound satisfaction across the suite.
fn bound_sweep() -> Check {
    let shape = BoundShape::default();
    let mut parts = Vec::new();

    let mut caps = Vec::new();
    for k in 2..=5 {
        let h = 0.5f64.powi(k);
        let r = 0.95 * 2.0 / h;
        let sol = integrate_from_origin(&NonlinearityModel::constant(h).map_err(e2s)?, 2, 0.0, r, 1e-10).map_err(e2s)?;
        caps.push(radial_instance(BoundCase::D, shape, &sol, 0.0, r, DEFAULT_Z_MIN).map_err(e2s)?);
    }
    parts.push(family_check("caps(D)", BoundCase::D, caps)?);

    let mut cats = Vec::new();
    for c in [1.0, 2.0, 4.0, 8.0] {
        let res = solve_annulus_bvp(&NonlinearityModel::Zero, 2, c, 3.0 * c, 0.0, c * 3f64.acosh(), 1e-10)
            .map_err(e2s)?;
        let mut inst = radial_instance(BoundCase::E, shape, &res.solution, c, 3.0 * c, DEFAULT_Z_MIN).map_err(e2s)?;
        inst.converged = res.converged;
        cats.push(inst);
    }
    parts.push(family_check("catenoids(E)", BoundCase::E, cats)?);

    let mut imcf = Vec::new();
    for k in 0..4 {
        let eps = 0.5f64.powi(k);
        let model = NonlinearityModel::imcf(eps).map_err(e2s)?;
        let full = integrate_from_origin(&model, 2, 0.0, 10.0 / eps, 1e-10).map_err(e2s)?;
        let r = 0.95 * full.blowup_radius.ok_or("no blow-up")?;
        let sol = integrate_from_origin(&model, 2, 0.0, r, 1e-10).map_err(e2s)?;
        let mut inst = radial_instance(BoundCase::A, shape, &sol, 0.0, r, DEFAULT_Z_MIN).map_err(e2s)?;
        let m2 = synthesize_constants(&model, ConditionTag::A1, &SampleSpec::default())
            .and_then(|s| s.m2)
            .ok_or("no A1 constants")?;
        inst.scale = m2.sqrt();
        imcf.push(inst);
    }
    parts.push(family_check("imcf(A)", BoundCase::A, imcf)?);

    let minimal = grid_sweep(
        &NonlinearityModel::Zero,
        &BoundaryData::Saddle(1.0),
        &[4.0, 8.0, 16.0, 32.0],
        65,
        BoundCase::E,
        shape,
        DEFAULT_Z_MIN,
        &NewtonOptions::default(),
        0,
    )
    .map_err(e2s)?;
    parts.push(family_check("minimal-2d(E)", BoundCase::E, minimal)?);
    Ok(parts.join(", "))
}

// 7. Decay for minimal graphs on growing squares.
fn minimal_decay() -> Check {
    let rep = liouville_probe(&NonlinearityModel::Zero, &BoundaryData::Saddle(1.0), &[4.0, 8.0, 16.0, 32.0], 65, 0)
        .map_err(e2s)?;
    ensure(rep.rows.len() == 4 && rep.rows.iter().all(|r| r.converged), || "unconverged run".into())?;
    let sup: Vec<f64> = rep.rows.iter().map(|r| r.sup_grad).collect();
    ensure(sup.windows(2).all(|w| w[1] < w[0]), || format!("sup gradients {} not decreasing", sci(&sup)))?;
    let c = rep.c_star;
    for row in &rep.rows {
        let rhs = (c * row.l / row.r).exp_m1();
        ensure(row.observed <= rhs, || format!("R = {}: |∇u(0)|² = {:e} > {rhs:e}", row.r, row.observed))?;
        let b = bound_value(BoundCase::E, row.r, row.l, BoundShape::default(), c).map_err(e2s)?;
        ensure(row.observed <= b, || format!("R = {}: case E bound fails", row.r))?;
    }
    Ok(format!("sup|∇u| {}, C* = {c:.4}", sci(&sup)))
}

// 8. The maximum-principle inequality at the discrete argmax.
fn bernstein_argmax() -> Check {
    let cap_model = NonlinearityModel::constant(1.0).map_err(e2s)?;
    let cat = BoundaryData::Catenoid(1.0, -2.1, 0.0);
    let configs = [
        ("One/Z", AuxConfig::new(FProfile::Z, Weight::One, default_alpha(BoundCase::A, 1.0))),
        ("b4/log1pz", AuxConfig::new(FProfile::Log1pZ, Weight::Power { b: 4.0, plus_one: false }, 2.0)),
    ];
    let grids = [33, 65, 129];
    // fields[field][grid]
    let mut fields: Vec<(&str, NonlinearityModel, Vec<GridField>)> = Vec::new();
    let mut cap_fields = Vec::new();
    let mut cat_fields = Vec::new();
    for nx in grids {
        cap_fields.push(solve_field(&cap_model, 1.0, nx, cap_data)?);
        cat_fields.push(solve_field(&NonlinearityModel::Zero, 0.5, nx, cat.function(0.5))?);
    }
    fields.push(("cap", cap_model, cap_fields));
    fields.push(("catenoid", NonlinearityModel::Zero, cat_fields));

    // Suite constant: smallest C making every finest-grid margin non-negative.
    let mut c_suite: f64 = 0.0;
    for (_, model, fs) in &fields {
        for (_, cfg) in &configs {
            let d = verify_max_inequality(&fs[2], model, cfg, 0.0).map_err(e2s)?;
            c_suite = c_suite.max(d.required_constant());
        }
    }
    let mut worst_k: f64 = 0.0;
    for (fname, model, fs) in &fields {
        for (cname, cfg) in &configs {
            let diags: Vec<AuxDiagnostics> = fs
                .iter()
                .map(|f| verify_max_inequality(f, model, cfg, c_suite))
                .collect::<Result<_, _>>()
                .map_err(e2s)?;
            for d in &diags {
                let k = (-d.margin / d.h).max(0.0);
                worst_k = worst_k.max(k);
                ensure(d.margin >= -BERNSTEIN_K * d.h, || {
                    format!("{fname} {cname} h = {:.4e}: margin {:.4e} < −{BERNSTEIN_K}·h", d.h, d.margin)
                })?;
            }
            let st: Vec<f64> = diags.iter().map(|d| d.stationarity).collect();
            ensure(st.windows(2).all(|w| w[1] < w[0]), || format!("{fname} {cname}: stationarity {st:.4?} not decreasing"))?;
        }
    }
    Ok(format!("C_suite = {c_suite:.4}, worst −margin/h = {worst_k:.3} ≤ K = {BERNSTEIN_K}"))
}

// 9. Structural identities.
fn structural() -> Check {
    let mut worst: f64 = 0.0;
    for k in 0..1000 {
        let z = 10f64.powf(-6.0 + 12.0 * k as f64 / 999.0);
        let zp = 1.0 + z;
        let (g, h) = coefficients_gh(FProfile::Z, z).map_err(e2s)?;
        let g_ref = -(2.0 + z) / (2.0 * z * z * zp * zp);
        let h_ref = 1.0 / (z * z * zp);
        let l = z.ln_1p();
        let (gl, hl) = coefficients_gh(FProfile::Log1pZ, z).map_err(e2s)?;
        let gl_ref = (l - 2.0 * zp) / (2.0 * zp.powi(3) * l * l);
        let hl_ref = 1.0 / (zp * zp * l * l);
        for (a, b) in [(g, g_ref), (h, h_ref), (gl, gl_ref), (hl, hl_ref)] {
            worst = worst.max(((a - b) / b).abs());
        }
    }
    ensure(worst <= GH_REL_TOL, || format!("G/H relative error {worst:.3e}"))?;

    // Cutoff bound on a polar lattice, several α and R.
    let mut cutoff_pts = 0;
    for alpha in [1.0, 1.5, 2.0, 3.0, 5.0] {
        for r in [0.3, 1.0, 7.0] {
            for a in 0..48 {
                for q in 0..64 {
                    let rad = r * q as f64 / 64.0;
                    let th = a as f64 * std::f64::consts::TAU / 48.0;
                    let x = [rad * th.cos(), rad * th.sin()];
                    let (phi, d) = cutoff_phi(&x, r, alpha).map_err(e2s)?;
                    let lhs = (d[0] * d[0] + d[1] * d[1]) / (phi * phi);
                    let rhs = 4.0 * alpha * alpha / (r * r * phi.powf(2.0 / alpha));
                    ensure(lhs <= rhs * (1.0 + 1e-12), || format!("cutoff bound fails at {x:?}, α = {alpha}"))?;
                    cutoff_pts += 1;
                }
            }
        }
    }

    // Two-sided weight bound at every node of solved fields.
    let mut nodes = 0;
    let fields = [
        solve_field(&NonlinearityModel::constant(1.0).map_err(e2s)?, 1.0, 33, cap_data)?,
        solve_field(&NonlinearityModel::Zero, 0.5, 33, BoundaryData::Catenoid(1.0, -2.1, 0.0).function(0.5))?,
    ];
    for f in &fields {
        let big_m = f.u.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let small_m = f.u.iter().copied().fold(f64::INFINITY, f64::min);
        let l = big_m - small_m;
        for b in [0.5, 1.0, 2.0, 4.0] {
            for &u in &f.u {
                let (h1, _, _) = weight_h(u, Weight::Power { b, plus_one: true }, big_m, small_m).map_err(e2s)?;
                let lo = 1.0 / (2.0f64.powf(1.0 / b) * (l + 1.0).powf(1.0 / b));
                let hi = 1.0 / (l + 1.0).powf(1.0 / b);
                ensure(lo * (1.0 - 1e-14) <= h1 && h1 <= hi * (1.0 + 1e-14), || format!("h = {h1} outside [{lo}, {hi}]"))?;
                nodes += 1;
            }
        }
    }
    Ok(format!("G/H rel err {worst:.2e}; cutoff bound at {cutoff_pts} points; h bound at {nodes} node evaluations"))
}

fn main() {
    let criteria = [
        Criterion { id: 1, name: "sphere cap radial oracle", limit: Duration::from_secs(1), run: sphere_cap_radial },
        Criterion { id: 2, name: "catenoid shooting oracle", limit: Duration::from_secs(1), run: catenoid_shooting },
        Criterion { id: 3, name: "2-D convergence order", limit: Duration::from_secs(90), run: grid_order },
        Criterion { id: 4, name: "condition suite", limit: Duration::from_secs(5), run: condition_suite },
        Criterion { id: 5, name: "IMCF blow-up envelope", limit: Duration::from_secs(10), run: imcf_envelope },
        Criterion { id: 6, name: "bound-satisfaction sweep", limit: Duration::from_secs(300), run: bound_sweep },
        Criterion { id: 7, name: "minimal-surface decay", limit: Duration::from_secs(300), run: minimal_decay },
        Criterion { id: 8, name: "argmax inequality", limit: Duration::from_secs(120), run: bernstein_argmax },
        Criterion { id: 9, name: "structural identities", limit: Duration::from_secs(5), run: structural },
    ];
    let mut failed = 0;
    for c in &criteria {
        let t = Instant::now();
        let res = (c.run)();
        let el = t.elapsed();
        let res = match res {
            Ok(msg) if el > c.limit => Err(format!("{msg}; took {el:.2?} > {:?}", c.limit)),
            other => other,
        };
        match res {
            Ok(msg) => println!("PASS [{}] {}: {msg} ({el:.2?})", c.id, c.name),
            Err(msg) => {
                failed += 1;
                println!("FAIL [{}] {}: {msg} ({el:.2?})", c.id, c.name);
            }
        }
    }
    println!("acceptance: {} passed, {failed} failed", criteria.len() - failed);
    if failed > 0 {
        std::process::exit(1);
    }
}
