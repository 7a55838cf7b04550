use std::ffi::CStr;
use std::path::PathBuf;
use std::process::Command;
use std::ptr;

use specreg_ffi::*;

fn grid_signal(n: usize) -> Vec<f64> {
    (1..=n)
        .map(|i| {
            let t = i as f64 / n as f64;
            0.5 + (2.0 * std::f64::consts::PI * t).cos()
        })
        .collect()
}

fn last_error() -> String {
    let p = specreg_last_error_message();
    assert!(!p.is_null());
    unsafe { CStr::from_ptr(p) }.to_string_lossy().into_owned()
}

#[test]
fn adaptive_round_trip() {
    let y = grid_signal(512);
    unsafe {
        let mut obs = ptr::null_mut();
        assert_eq!(specreg_observations_new(y.as_ptr(), y.len(), &mut obs), SpecregStatus::Ok);
        assert_eq!(specreg_observations_len(obs), 512);
        let mut k = ptr::null_mut();
        assert_eq!(specreg_kernel_identity(&mut k), SpecregStatus::Ok);
        let mut sel = ptr::null_mut();
        assert_eq!(specreg_select_adaptive(obs, k, &mut sel), SpecregStatus::Ok);
        let m = specreg_selection_truncation(sel);
        assert_eq!(m, 2);
        let mut len = 0usize;
        assert_eq!(specreg_selection_coefficients(sel, ptr::null_mut(), 0, &mut len), SpecregStatus::Ok);
        assert_eq!(len, m);
        let mut buf = vec![0.0; len];
        assert_eq!(specreg_selection_coefficients(sel, buf.as_mut_ptr(), len, &mut len), SpecregStatus::Ok);
        assert!((buf[0] - 0.5).abs() < 1e-10);
        let mut v = 0.0;
        assert_eq!(specreg_selection_eval(sel, 0.25, &mut v), SpecregStatus::Ok);
        assert!((v - 0.5).abs() < 1e-8, "{v}");
        let mut e = SpecregEnergy::default();
        assert_eq!(specreg_energy(obs, k, sel, 0.0, &mut e), SpecregStatus::Ok);
        assert!((e.h_hat - (0.25 + 0.5)).abs() < 1e-8, "{}", e.h_hat);
        specreg_selection_free(sel);
        specreg_kernel_free(k);
        specreg_observations_free(obs);
    }
}

#[test]
fn errors_carry_status_and_message() {
    unsafe {
        let mut k = ptr::null_mut();
        assert_eq!(specreg_kernel_power_law(-1.0, 1.0, &mut k), SpecregStatus::Config);
        assert!(k.is_null());
        assert!(last_error().contains("theta"), "{}", last_error());

        let y = grid_signal(16);
        let mut obs = ptr::null_mut();
        assert_eq!(specreg_observations_new(y.as_ptr(), y.len(), &mut obs), SpecregStatus::Ok);
        assert_eq!(specreg_kernel_identity(&mut k), SpecregStatus::Ok);
        let mut sel = ptr::null_mut();
        assert_eq!(specreg_select_penalized(obs, k, 0.1, ptr::null(), &mut sel), SpecregStatus::Precondition);
        assert!(last_error().contains("n too small"), "{}", last_error());

        assert_eq!(specreg_select_adaptive(ptr::null(), k, &mut sel), SpecregStatus::NullPointer);
        assert_eq!(specreg_observations_new(ptr::null(), 4, &mut obs), SpecregStatus::NullPointer);
        specreg_kernel_free(k);
        specreg_observations_free(obs);
    }
    assert!(specreg_last_error_message().is_null() || !last_error().is_empty());
}

#[test]
fn success_clears_last_error() {
    unsafe {
        let mut k = ptr::null_mut();
        specreg_kernel_power_law(f64::NAN, 1.0, &mut k);
        assert!(!specreg_last_error_message().is_null());
        assert_eq!(specreg_kernel_identity(&mut k), SpecregStatus::Ok);
        assert!(specreg_last_error_message().is_null());
        specreg_kernel_free(k);
    }
}

#[test]
fn penalized_with_overrides() {
    let n = 1024;
    let y = grid_signal(n);
    unsafe {
        let mut obs = ptr::null_mut();
        specreg_observations_new(y.as_ptr(), n, &mut obs);
        let mut k = ptr::null_mut();
        specreg_kernel_power_law(0.0, 1.0, &mut k);
        let opts = SpecregPenaltyOptions { has_gamma_override: true, gamma_override: 0.5, ..Default::default() };
        let mut sel = ptr::null_mut();
        assert_eq!(specreg_select_penalized(obs, k, 0.05, &opts, &mut sel), SpecregStatus::Ok);
        let mut g = 0.0;
        assert_eq!(specreg_selection_gamma_hat(sel, &mut g), SpecregStatus::Unavailable);
        assert!(specreg_selection_tau_star(sel).is_finite());
        let mut ci = SpecregInterval::default();
        assert_eq!(specreg_function_ci(sel, 0.05, 0.95, &mut ci), SpecregStatus::Ok);
        assert!(ci.lower >= 0.0 && ci.lower <= ci.upper);
        specreg_selection_free(sel);
        specreg_kernel_free(k);
        specreg_observations_free(obs);
    }
}

#[test]
fn status_names_are_static() {
    let s = unsafe { CStr::from_ptr(specreg_status_name(SpecregStatus::Precondition)) };
    assert_eq!(s.to_str().unwrap(), "precondition failed");
    let v = unsafe { CStr::from_ptr(specreg_version()) };
    assert_eq!(v.to_str().unwrap(), env!("CARGO_PKG_VERSION"));
}

fn header_path() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("include/specreg.h")
}

#[test]
fn header_declares_every_export() {
    let h = std::fs::read_to_string(header_path()).expect("header generated by build.rs");
    for name in [
        "specreg_observations_new",
        "specreg_observations_free",
        "specreg_kernel_power_law",
        "specreg_kernel_identity",
        "specreg_kernel_explicit",
        "specreg_select_adaptive",
        "specreg_select_penalized",
        "specreg_selection_truncation",
        "specreg_selection_eval",
        "specreg_energy",
        "specreg_energy_ci",
        "specreg_function_ci",
        "specreg_last_error_message",
        "SPECREG_STATUS_PRECONDITION",
    ] {
        assert!(h.contains(name), "{name} missing from header");
    }
}

/// Compiles a small C program against the header and static library.
#[test]
fn c_program_links_against_staticlib() {
    if Command::new("cc").arg("--version").output().is_err() {
        eprintln!("skipping: no C compiler");
        return;
    }
    let exe = std::env::current_exe().unwrap();
    let profile_dir = exe.parent().and_then(|d| d.parent()).unwrap();
    let lib = profile_dir.join("libspecreg_ffi.a");
    if !lib.exists() {
        eprintln!("skipping: {} not built", lib.display());
        return;
    }
    let dir = tempfile::tempdir().unwrap();
    let src = dir.path().join("smoke.c");
    std::fs::write(
        &src,
        r#"
#include <stdio.h>
#include "specreg.h"
int main(void) {
    double y[256];
    for (int i = 0; i < 256; i++) y[i] = 1.0;
    SpecregObservations *obs = NULL;
    SpecregKernel *k = NULL;
    SpecregSelection *sel = NULL;
    if (specreg_observations_new(y, 256, &obs) != SPECREG_STATUS_OK) return 1;
    if (specreg_kernel_identity(&k) != SPECREG_STATUS_OK) return 2;
    if (specreg_select_adaptive(obs, k, &sel) != SPECREG_STATUS_OK) return 3;
    double v = 0.0;
    if (specreg_selection_eval(sel, 0.3, &v) != SPECREG_STATUS_OK) return 4;
    printf("%zu %.6f\n", specreg_selection_truncation(sel), v);
    if (specreg_kernel_power_law(-2.0, 1.0, &k) != SPECREG_STATUS_CONFIG) return 5;
    if (specreg_last_error_message() == NULL) return 6;
    specreg_selection_free(sel);
    specreg_observations_free(obs);
    return 0;
}
"#,
    )
    .unwrap();
    let bin = dir.path().join("smoke");
    let status = Command::new("cc")
        .arg(&src)
        .arg("-I")
        .arg(header_path().parent().unwrap())
        .arg(&lib)
        .args(["-lpthread", "-ldl", "-lm", "-o"])
        .arg(&bin)
        .status()
        .unwrap();
    assert!(status.success(), "C compilation failed");
    let out = Command::new(&bin).output().unwrap();
    assert!(out.status.success(), "exit {:?}", out.status.code());
    let text = String::from_utf8(out.stdout).unwrap();
    let v: f64 = text.split_whitespace().nth(1).unwrap().parse().unwrap();
    assert!((v - 1.0).abs() < 1e-9, "{text}");
}
