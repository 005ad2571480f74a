use std::ffi::{c_void, CStr, CString};
use std::path::{Path, PathBuf};
use std::process::Command;
use std::ptr;

use mcgrad_ffi::*;

fn last_error() -> String {
    let n = unsafe { mcg_last_error(ptr::null_mut(), 0) };
    let mut buf = vec![0u8; n + 1];
    unsafe { mcg_last_error(buf.as_mut_ptr() as *mut _, buf.len()) };
    CStr::from_bytes_until_nul(&buf).unwrap().to_str().unwrap().to_owned()
}

fn model(spec: &str) -> *mut McgModel {
    let s = CString::new(spec).unwrap();
    let mut m = ptr::null_mut();
    assert_eq!(unsafe { mcg_model_new(s.as_ptr(), &mut m) }, MCG_OK, "{}", last_error());
    m
}

#[test]
fn model_evaluation_and_errors() {
    let m = model("imcf:1");
    let p = [1.0, 0.0];
    let mut f = 0.0;
    let mut g = [0.0; 2];
    unsafe {
        assert_eq!(mcg_model_eval(m, p.as_ptr(), 2, &mut f), MCG_OK);
        assert_eq!(mcg_model_grad(m, p.as_ptr(), 2, g.as_mut_ptr()), MCG_OK);
        mcg_model_free(m);
    }
    assert!((f - 2f64.sqrt()).abs() < 1e-15);
    assert!((g[0] - 0.5f64.sqrt()).abs() < 1e-15 && g[1] == 0.0);

    let bad = CString::new("imcf:-1").unwrap();
    let mut out = 1 as *mut McgModel;
    assert_eq!(unsafe { mcg_model_new(bad.as_ptr(), &mut out) }, MCG_ERR_PARSE);
    assert!(out.is_null());
    assert!(!last_error().is_empty());

    assert_eq!(unsafe { mcg_model_new(ptr::null(), &mut out) }, MCG_ERR_NULL_POINTER);
    assert!(last_error().contains("spec"));
    assert_eq!(unsafe { mcg_model_eval(ptr::null(), p.as_ptr(), 2, &mut f) }, MCG_ERR_NULL_POINTER);
    // Freeing null is a no-op.
    unsafe { mcg_model_free(ptr::null_mut()) };
}

#[test]
fn error_buffer_truncates() {
    let bad = CString::new("nope").unwrap();
    let mut out = ptr::null_mut();
    assert_eq!(unsafe { mcg_model_new(bad.as_ptr(), &mut out) }, MCG_ERR_PARSE);
    let full = last_error();
    let mut small = [0x7fu8; 5];
    let n = unsafe { mcg_last_error(small.as_mut_ptr() as *mut _, small.len()) };
    assert_eq!(n, full.len());
    assert_eq!(small[4], 0);
    assert_eq!(&small[..4], &full.as_bytes()[..4]);
}

#[test]
fn radial_profiles() {
    let m = model("const:1");
    let mut sol = ptr::null_mut();
    unsafe {
        assert_eq!(mcg_radial_from_origin(m, 2, -2.0, 1.9, 1e-12, &mut sol), MCG_OK);
        let (mut u, mut w) = (0.0, 0.0);
        assert_eq!(mcg_radial_sample(sol, 1.0, &mut u, &mut w), MCG_OK);
        assert!((u + 3f64.sqrt()).abs() < 1e-8);
        assert!((w - 1.0 / 3f64.sqrt()).abs() < 1e-8);
        assert_eq!(mcg_radial_sample(sol, 5.0, &mut u, &mut w), MCG_ERR_INVALID_ARGUMENT);

        let mut n = 0;
        assert_eq!(mcg_radial_len(sol, &mut n), MCG_OK);
        let mut r = vec![0.0; n];
        let mut uu = vec![0.0; n];
        assert_eq!(mcg_radial_nodes(sol, r.as_mut_ptr(), uu.as_mut_ptr(), ptr::null_mut(), n), MCG_OK);
        assert_eq!(r[0], 0.0);
        assert_eq!(r[n - 1], 1.9);
        assert_eq!(mcg_radial_nodes(sol, r.as_mut_ptr(), ptr::null_mut(), ptr::null_mut(), n - 1), MCG_ERR_INVALID_ARGUMENT);

        let (mut has, mut rad) = (7, 0.0);
        assert_eq!(mcg_radial_blowup(sol, &mut has, &mut rad), MCG_OK);
        assert_eq!(has, 0);
        mcg_radial_free(sol);
    }

    let imcf = model("imcf:1");
    unsafe {
        assert_eq!(mcg_radial_from_origin(imcf, 2, 0.0, 3.0, 1e-10, &mut sol), MCG_OK);
        let (mut has, mut rad) = (0, 0.0);
        mcg_radial_blowup(sol, &mut has, &mut rad);
        assert_eq!(has, 1);
        assert!(rad > 1.4 && rad < 2.0);
        mcg_radial_free(sol);
        mcg_model_free(imcf);
    }

    let zero = model("zero");
    unsafe {
        assert_eq!(mcg_radial_annulus(zero, 2, 1.0, 3.0, 0.0, 3f64.acosh(), 1e-12, &mut sol), MCG_OK);
        let (mut u, mut w) = (0.0, 0.0);
        mcg_radial_sample(sol, 2.0, &mut u, &mut w);
        assert!((w - 1.0 / 3f64.sqrt()).abs() < 1e-7);
        mcg_radial_free(sol);
        assert_eq!(mcg_radial_from_origin(zero, 0, 0.0, 1.0, 1e-10, &mut sol), MCG_ERR_INVALID_ARGUMENT);
        assert!(sol.is_null());
        mcg_model_free(zero);
        mcg_model_free(m);
    }
}

unsafe extern "C" fn affine(x: f64, y: f64, data: *mut c_void) -> f64 {
    let k = *(data as *const f64);
    k * x - y + 0.5
}

#[test]
fn grid_solve_io_and_argmax() {
    let zero = model("zero");
    let mut k = 0.75f64;
    let mut g = ptr::null_mut();
    unsafe {
        assert_eq!(mcg_grid_solve(zero, 1.0, 17, Some(affine), &mut k as *mut f64 as *mut c_void, &mut g), MCG_OK);
        let (mut nx, mut r, mut h) = (0, 0.0, 0.0);
        assert_eq!(mcg_grid_shape(g, &mut nx, &mut r, &mut h), MCG_OK);
        assert_eq!((nx, r), (17, 1.0));
        assert!((h - 0.125).abs() < 1e-15);
        let mut vals = vec![0.0; nx * nx];
        assert_eq!(mcg_grid_values(g, vals.as_mut_ptr(), vals.len()), MCG_OK);
        for j in 0..nx {
            for i in 0..nx {
                let (x, y) = (-1.0 + i as f64 * h, -1.0 + j as f64 * h);
                assert!((vals[j * nx + i] - (0.75 * x - y + 0.5)).abs() <= 1e-8);
            }
        }

        let dir = tempfile::tempdir().unwrap();
        let path = CString::new(dir.path().join("u.grid").to_str().unwrap()).unwrap();
        assert_eq!(mcg_grid_write(g, path.as_ptr()), MCG_OK);
        let mut back = ptr::null_mut();
        assert_eq!(mcg_grid_read(path.as_ptr(), &mut back), MCG_OK);
        let mut vals2 = vec![0.0; nx * nx];
        mcg_grid_values(back, vals2.as_mut_ptr(), vals2.len());
        assert_eq!(vals, vals2);
        mcg_grid_free(back);
        let missing = CString::new(dir.path().join("none.grid").to_str().unwrap()).unwrap();
        assert_eq!(mcg_grid_read(missing.as_ptr(), &mut back), MCG_ERR_IO);

        assert_eq!(mcg_grid_solve(zero, 1.0, 17, None, ptr::null_mut(), &mut back), MCG_ERR_NULL_POINTER);
        mcg_grid_free(g);
    }

    let cap_model = model("const:1");
    let data = CString::new("cap:2").unwrap();
    let (f, w) = (CString::new("z").unwrap(), CString::new("one").unwrap());
    let mut rep = std::mem::MaybeUninit::<McgArgmaxReport>::uninit();
    unsafe {
        assert_eq!(mcg_grid_solve_data(cap_model, 1.0, 33, data.as_ptr(), &mut g), MCG_OK);
        assert_eq!(mcg_argmax_inequality(g, cap_model, f.as_ptr(), w.as_ptr(), 2.0, 1.0, rep.as_mut_ptr()), MCG_OK);
        let rep = rep.assume_init();
        let sum_l: f64 = rep.terms[..5].iter().sum();
        let sum_r: f64 = rep.terms[5..].iter().sum();
        assert!((rep.lhs - sum_l).abs() < 1e-12 * (1.0 + sum_l.abs()));
        assert!((rep.rhs - sum_r).abs() < 1e-12 * (1.0 + sum_r.abs()));
        assert!((rep.margin - (rep.rhs - rep.lhs)).abs() < 1e-12 * (1.0 + rep.rhs.abs()));
        assert!(rep.p_max > 0.0 && rep.h > 0.0);
        mcg_grid_free(g);

        // Constant field: no node with z > 0.
        let flat = CString::new("const:2").unwrap();
        assert_eq!(mcg_grid_solve_data(zero, 1.0, 9, flat.as_ptr(), &mut g), MCG_OK);
        let mut rep = std::mem::MaybeUninit::<McgArgmaxReport>::uninit();
        assert_eq!(mcg_argmax_inequality(g, zero, f.as_ptr(), w.as_ptr(), 2.0, 1.0, rep.as_mut_ptr()), MCG_ERR_DEGENERATE);
        mcg_grid_free(g);
        mcg_model_free(cap_model);
        mcg_model_free(zero);
    }
}

#[test]
fn estimates() {
    let a = CString::new("A").unwrap();
    let e = CString::new("E").unwrap();
    let shape = McgShape { theta: 1.0, eta: 0.5 };
    let mut v = 0.0;
    unsafe {
        assert_eq!(mcg_bound_value(a.as_ptr(), shape, 10.0, 0.0, 2.0, &mut v), MCG_OK);
        assert!((v - 0.2).abs() < 1e-15);
        assert_eq!(mcg_min_constant(e.as_ptr(), shape, std::f64::consts::E - 1.0, 1.0, 1.0, &mut v), MCG_OK);
        assert!((v - 1.0).abs() < 1e-12);
        let bad = CString::new("Q").unwrap();
        assert_eq!(mcg_bound_value(bad.as_ptr(), shape, 1.0, 0.0, 1.0, &mut v), MCG_ERR_PARSE);
        assert_eq!(mcg_bound_value(a.as_ptr(), shape, -1.0, 0.0, 1.0, &mut v), MCG_ERR_INVALID_ARGUMENT);

        let z = CString::new("z").unwrap();
        let (mut g, mut h) = (0.0, 0.0);
        assert_eq!(mcg_coefficients_gh(z.as_ptr(), 1.0, &mut g, &mut h), MCG_OK);
        assert!((g + 0.375).abs() < 1e-15 && (h - 0.5).abs() < 1e-15);
        assert_eq!(mcg_coefficients_gh(z.as_ptr(), 0.0, &mut g, &mut h), MCG_ERR_INVALID_ARGUMENT);
    }
}

#[test]
fn run_config_reports_exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("c.ini");
    std::fs::write(&cfg, "[experiment]\nkind = check-conditions\nmodel = power:2\n[conditions]\ntag = A1\nm1 = 0.5\nm2 = 1\ntheta = 2\n").unwrap();
    let c = CString::new(cfg.to_str().unwrap()).unwrap();
    let out = CString::new(dir.path().join("o").to_str().unwrap()).unwrap();
    let mut code = -1;
    assert_eq!(unsafe { mcg_run_config(c.as_ptr(), out.as_ptr(), 1, 0, &mut code) }, MCG_OK);
    assert_eq!(code, 4);
    assert!(dir.path().join("o/conditions.json").exists());

    std::fs::write(&cfg, "[experiment]\nkind = check-conditions\nmodle = zero\n").unwrap();
    assert_eq!(unsafe { mcg_run_config(c.as_ptr(), out.as_ptr(), 1, 0, &mut code) }, MCG_ERR_PARSE);
    assert_eq!(code, 2);
    assert!(last_error().contains("line 3"), "{}", last_error());
}

#[test]
fn version_string() {
    let v = unsafe { CStr::from_ptr(mcg_version()) };
    assert_eq!(v.to_str().unwrap(), env!("CARGO_PKG_VERSION"));
}

fn header() -> String {
    std::fs::read_to_string(Path::new(env!("CARGO_MANIFEST_DIR")).join("include/mcgrad.h")).unwrap()
}

#[test]
fn header_declares_every_exported_symbol() {
    let src = std::fs::read_to_string(Path::new(env!("CARGO_MANIFEST_DIR")).join("src/lib.rs")).unwrap();
    let h = header();
    let mut count = 0;
    for line in src.lines() {
        if let Some(rest) = line.split("extern \"C\" fn ").nth(1) {
            let name = rest.split('(').next().unwrap();
            assert!(h.contains(&format!("{name}(")), "{name} missing from header");
            count += 1;
        }
    }
    assert!(count >= 20, "only {count} exports found");
    for t in ["typedef struct McgModel McgModel;", "typedef struct McgGrid McgGrid;", "typedef struct McgRadial McgRadial;", "#define MCG_ERR_PANIC -255"] {
        assert!(h.contains(t), "{t}");
    }
}

fn find_staticlib() -> Option<PathBuf> {
    // target/<profile>/deps/capi-<hash>
    let exe = std::env::current_exe().ok()?;
    let profile_dir = exe.parent()?.parent()?;
    let lib = profile_dir.join("libmcgrad_ffi.a");
    lib.exists().then_some(lib)
}

const C_SMOKE: &str = r#"
#include <stdio.h>
#include <math.h>
#include "mcgrad.h"

static double cap(double x, double y, void *ud) {
    double rho = *(double *)ud;
    return -sqrt(rho * rho - x * x - y * y);
}

int main(void) {
    McgModel *m = NULL;
    if (mcg_model_new("const:1", &m) != MCG_OK) return 1;
    double rho = 2.0;
    McgGrid *g = NULL;
    if (mcg_grid_solve(m, 1.0, 17, cap, &rho, &g) != MCG_OK) return 2;
    size_t nx; double r, h;
    mcg_grid_shape(g, &nx, &r, &h);
    double vals[17 * 17];
    mcg_grid_values(g, vals, 17 * 17);
    double center = vals[8 * 17 + 8];
    if (fabs(center + 2.0) > 1e-3) return 3;
    McgArgmaxReport rep;
    if (mcg_argmax_inequality(g, m, "z", "one", 2.0, 1.0, &rep) != MCG_OK) return 4;
    char buf[128];
    if (mcg_model_new("bogus", &m) != MCG_ERR_PARSE) return 5;
    mcg_last_error(buf, sizeof buf);
    printf("ok %s %.6f %s\n", mcg_version(), center, buf);
    mcg_grid_free(g);
    return 0;
}
"#;

#[test]
fn c_program_links_against_staticlib() {
    let Some(lib) = find_staticlib() else {
        eprintln!("staticlib not found next to the test binary; skipping C link check");
        return;
    };
    if Command::new("cc").arg("--version").output().is_err() {
        eprintln!("no C compiler; skipping C link check");
        return;
    }
    let dir = tempfile::tempdir().unwrap();
    let src = dir.path().join("smoke.c");
    std::fs::write(&src, C_SMOKE).unwrap();
    let exe = dir.path().join("smoke");
    let inc = Path::new(env!("CARGO_MANIFEST_DIR")).join("include");
    let out = Command::new("cc")
        .args(["-std=c99", "-Wall", "-Werror", "-o"])
        .arg(&exe)
        .arg(&src)
        .arg("-I")
        .arg(&inc)
        .arg(&lib)
        .args(["-lpthread", "-ldl", "-lm"])
        .output()
        .unwrap();
    assert!(out.status.success(), "cc failed: {}", String::from_utf8_lossy(&out.stderr));
    let run = Command::new(&exe).output().unwrap();
    let stdout = String::from_utf8_lossy(&run.stdout);
    assert!(run.status.success(), "exit {:?}: {stdout}", run.status.code());
    assert!(stdout.starts_with("ok "), "{stdout}");
}
