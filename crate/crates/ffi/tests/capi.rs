use std::ffi::{CStr, CString};
use std::path::{Path, PathBuf};
use std::process::Command;
use std::ptr;

use blab_ffi::*;

const GOOD: &str = "command = \"verify-identities\"\nm = 5\ndims = [5, 6]\n\
                    [conventions]\nlock_a = \"verified\"\nfourth_moment = \"isotropic\"\n";

fn parse(text: &str) -> (BlabStatus, *mut BlabConfig) {
    let c = CString::new(text).unwrap();
    let mut cfg = ptr::null_mut();
    let s = unsafe { blab_config_parse(c.as_ptr(), &mut cfg) };
    (s, cfg)
}

fn last_error() -> String {
    let p = blab_last_error_message();
    assert!(!p.is_null());
    unsafe { CStr::from_ptr(p) }.to_string_lossy().into_owned()
}

#[test]
fn run_roundtrip_through_handles() {
    let (s, cfg) = parse(GOOD);
    assert_eq!(s, BlabStatus::Ok);
    let mut out = ptr::null_mut();
    assert_eq!(unsafe { blab_run(cfg, BlabCommand::VerifyIdentities, 7, &mut out) }, BlabStatus::Ok);
    let mut passed = false;
    assert_eq!(unsafe { blab_outcome_passed(out, &mut passed) }, BlabStatus::Ok);
    assert!(passed);
    let (mut total, mut failed) = (0usize, 1usize);
    assert_eq!(unsafe { blab_outcome_counts(out, &mut total, &mut failed) }, BlabStatus::Ok);
    assert!(total > 10);
    assert_eq!(failed, 0);

    let mut json = ptr::null_mut();
    assert_eq!(unsafe { blab_outcome_summary_json(out, &mut json) }, BlabStatus::Ok);
    let text = unsafe { CStr::from_ptr(json) }.to_str().unwrap().to_owned();
    unsafe { blab_string_free(json) };
    let v: serde_json::Value = serde_json::from_str(&text).unwrap();
    assert_eq!(v["schema"], "blab.summary/1");
    assert_eq!(v["seed"], 7);

    let dir = tempfile::tempdir().unwrap();
    let d = CString::new(dir.path().to_str().unwrap()).unwrap();
    assert_eq!(unsafe { blab_outcome_write(out, d.as_ptr()) }, BlabStatus::Ok);
    let on_disk = std::fs::read_to_string(dir.path().join("summary.json")).unwrap();
    assert_eq!(on_disk.trim_end(), text.trim_end());
    unsafe {
        blab_outcome_free(out);
        blab_config_free(cfg);
    }
}

#[test]
fn failing_suite_is_not_an_error() {
    // the printed lock target does not hold, so the run completes with failures
    let (s, cfg) = parse("m = 5\ndims = [5]\n");
    assert_eq!(s, BlabStatus::Ok);
    let mut out = ptr::null_mut();
    assert_eq!(unsafe { blab_run(cfg, BlabCommand::VerifyIdentities, 0, &mut out) }, BlabStatus::Ok);
    let mut passed = true;
    unsafe { blab_outcome_passed(out, &mut passed) };
    assert!(!passed);
    unsafe {
        blab_outcome_free(out);
        blab_config_free(cfg);
    }
}

#[test]
fn config_errors_map_to_status_codes() {
    let (s, cfg) = parse("m = \"nine\"");
    assert_eq!(s, BlabStatus::Config);
    assert!(cfg.is_null());
    assert!(!last_error().is_empty());

    let (s, _) = parse("bogus_key = 1");
    assert_eq!(s, BlabStatus::Config);

    let path = CString::new("/nonexistent/blab.toml").unwrap();
    let mut cfg = ptr::null_mut();
    assert_eq!(unsafe { blab_config_load(path.as_ptr(), &mut cfg) }, BlabStatus::Io);
    assert!(last_error().contains("nonexistent"));
}

#[test]
fn null_and_utf8_arguments_are_rejected() {
    let mut cfg = ptr::null_mut();
    assert_eq!(unsafe { blab_config_parse(ptr::null(), &mut cfg) }, BlabStatus::NullPointer);
    let c = CString::new("m = 9").unwrap();
    assert_eq!(unsafe { blab_config_parse(c.as_ptr(), ptr::null_mut()) }, BlabStatus::NullPointer);
    let bad = [0xffu8, 0xfe, 0];
    assert_eq!(unsafe { blab_config_parse(bad.as_ptr().cast(), &mut cfg) }, BlabStatus::InvalidUtf8);
    let mut out = ptr::null_mut();
    assert_eq!(
        unsafe { blab_run(ptr::null(), BlabCommand::Reduce, 0, &mut out) },
        BlabStatus::NullPointer
    );
    let mut v = 0.0;
    assert_eq!(unsafe { blab_bubble_eval(5, ptr::null(), 5, &mut v) }, BlabStatus::NullPointer);
    unsafe {
        blab_config_free(ptr::null_mut());
        blab_outcome_free(ptr::null_mut());
        blab_string_free(ptr::null_mut());
    }
}

#[test]
fn scalar_entry_points() {
    let mut v = 0.0;
    // U(0) = alpha = (m(m-2))^((m-2)/4) = 15^(3/4) for m = 5
    let z = [0.0; 5];
    assert_eq!(unsafe { blab_bubble_eval(5, z.as_ptr(), 5, &mut v) }, BlabStatus::Ok);
    assert!((v - 15f64.powf(0.75)).abs() < 1e-12);
    // wrong length is a numerical (argument) error
    assert_eq!(unsafe { blab_bubble_eval(5, z.as_ptr(), 4, &mut v) }, BlabStatus::Numerical);
    // I^0_2 = 1
    assert_eq!(unsafe { blab_moment(2.0, 0.0, &mut v) }, BlabStatus::Ok);
    assert!((v - 1.0).abs() < 1e-14);
    assert_eq!(unsafe { blab_moment(1.0, 0.5, &mut v) }, BlabStatus::Numerical);
    let ver = unsafe { CStr::from_ptr(blab_version()) }.to_str().unwrap();
    assert_eq!(ver, env!("CARGO_PKG_VERSION"));
}

#[test]
fn errors_are_thread_local() {
    let (s, _) = parse("m = \"x\"");
    assert_eq!(s, BlabStatus::Config);
    std::thread::spawn(|| assert!(blab_last_error_message().is_null()))
        .join()
        .unwrap();
}

fn target_dir() -> PathBuf {
    // tests run from target/<profile>/deps
    let exe = std::env::current_exe().unwrap();
    exe.parent().unwrap().parent().unwrap().to_path_buf()
}

#[test]
fn header_compiles_and_links_from_c() {
    let root = Path::new(env!("CARGO_MANIFEST_DIR"));
    let lib = target_dir().join("libblab_ffi.a");
    assert!(lib.exists(), "static library not found at {}", lib.display());
    let out = Path::new(env!("CARGO_TARGET_TMPDIR")).join("capi_smoke");
    let status = Command::new("cc")
        .arg(root.join("tests/c/smoke.c"))
        .arg("-I")
        .arg(root.join("include"))
        .arg(&lib)
        .args(["-lpthread", "-ldl", "-lm", "-o"])
        .arg(&out)
        .status()
        .expect("C compiler");
    assert!(status.success());
    let run = Command::new(&out).output().unwrap();
    assert!(run.status.success(), "{}", String::from_utf8_lossy(&run.stderr));
    assert_eq!(String::from_utf8_lossy(&run.stdout).trim(), "ok");
}
