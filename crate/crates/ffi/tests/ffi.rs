use std::ffi::{CStr, CString};
use std::path::{Path, PathBuf};
use std::process::Command;
use std::ptr;

use fmlfs_ffi::*;

fn write_toy_csv(dir: &Path) -> PathBuf {
    let mut text = String::from("a,b,c,d,y0,y1\n");
    for i in 0..40u32 {
        let a = f64::from(i % 7);
        let b = f64::from((i * 13) % 11);
        let y0 = u8::from(i % 7 > 3);
        let y1 = u8::from(i % 2 == 0);
        text.push_str(&format!("{a},{b},{},{},{y0},{y1}\n", a * 2.0 + 1.0, f64::from(i % 3)));
    }
    let p = dir.join("toy.csv");
    std::fs::write(&p, text).unwrap();
    p
}

fn last_error() -> String {
    let p = fmlfs_last_error_message();
    assert!(!p.is_null());
    unsafe { CStr::from_ptr(p) }.to_string_lossy().into_owned()
}

fn load(path: &Path) -> *mut FmlfsDataset {
    let c = CString::new(path.to_str().unwrap()).unwrap();
    let mut ds = ptr::null_mut();
    assert_eq!(unsafe { fmlfs_dataset_load(c.as_ptr(), 2, &mut ds) }, FmlfsStatus::Ok);
    ds
}

fn order_of(r: *const FmlfsRanking) -> Vec<u32> {
    let len = unsafe { fmlfs_ranking_len(r) };
    let mut buf = vec![0u32; len];
    let mut written = 0;
    assert_eq!(
        unsafe { fmlfs_ranking_order(r, buf.as_mut_ptr(), len, &mut written) },
        FmlfsStatus::Ok
    );
    assert_eq!(written, len);
    buf
}

#[test]
fn rank_and_round_trip_json() {
    let dir = tempfile::tempdir().unwrap();
    let ds = load(&write_toy_csv(dir.path()));
    let (mut n, mut d, mut l) = (0, 0, 0);
    assert_eq!(unsafe { fmlfs_dataset_dims(ds, &mut n, &mut d, &mut l) }, FmlfsStatus::Ok);
    assert_eq!((n, d, l), (40, 4, 2));

    let mut r = ptr::null_mut();
    assert_eq!(unsafe { fmlfs_rank(ds, 2, 0.5, 10, 3, &mut r) }, FmlfsStatus::Ok);
    let order = order_of(r);
    let mut sorted = order.clone();
    sorted.sort();
    assert_eq!(sorted, vec![0, 1, 2, 3]);

    let mut json = ptr::null_mut();
    assert_eq!(unsafe { fmlfs_ranking_to_json(r, &mut json) }, FmlfsStatus::Ok);
    let mut back = ptr::null_mut();
    assert_eq!(unsafe { fmlfs_ranking_from_json(json, &mut back) }, FmlfsStatus::Ok);
    assert_eq!(order_of(back), order);
    unsafe {
        fmlfs_string_free(json);
        fmlfs_ranking_free(back);
        fmlfs_ranking_free(r);
        fmlfs_dataset_free(ds);
    }
}

#[test]
fn client_reports_feed_the_server() {
    let x: Vec<f64> = (0..60).map(|i| f64::from((i * 7) % 13)).collect();
    let y: Vec<u8> = (0..40).map(|i| u8::from(x[i % 60] > 6.0)).collect();
    let mut ds = ptr::null_mut();
    let st = unsafe { fmlfs_dataset_from_arrays(x.as_ptr(), y.as_ptr(), 20, 3, 2, &mut ds) };
    assert_eq!(st, FmlfsStatus::Ok);

    let mut reports = Vec::new();
    for id in 0..2 {
        let mut s = ptr::null_mut();
        assert_eq!(unsafe { fmlfs_client_report_json(ds, id, 10, &mut s) }, FmlfsStatus::Ok);
        reports.push(s);
    }
    let ptrs: Vec<*const std::ffi::c_char> = reports.iter().map(|&p| p.cast_const()).collect();
    let mut r = ptr::null_mut();
    assert_eq!(unsafe { fmlfs_server_rank(ptrs.as_ptr(), 2, false, &mut r) }, FmlfsStatus::Ok);
    assert_eq!(unsafe { fmlfs_ranking_len(r) }, 3);

    // the same report twice is a protocol violation
    let dup = [ptrs[0], ptrs[0]];
    let mut bad = ptr::null_mut();
    assert_eq!(unsafe { fmlfs_server_rank(dup.as_ptr(), 2, false, &mut bad) }, FmlfsStatus::Protocol);
    assert!(bad.is_null());
    assert!(last_error().contains("duplicate"));

    unsafe {
        for s in reports {
            fmlfs_string_free(s);
        }
        fmlfs_ranking_free(r);
        fmlfs_dataset_free(ds);
    }
}

#[test]
fn error_codes() {
    let mut ds = ptr::null_mut();
    let missing = CString::new("/definitely/not/here.csv").unwrap();
    assert_eq!(unsafe { fmlfs_dataset_load(missing.as_ptr(), 2, &mut ds) }, FmlfsStatus::Io);
    assert!(ds.is_null());
    assert!(last_error().contains("not/here"));

    assert_eq!(unsafe { fmlfs_dataset_load(ptr::null(), 2, &mut ds) }, FmlfsStatus::NullPointer);
    assert_eq!(
        unsafe { fmlfs_dataset_dims(ptr::null(), ptr::null_mut(), ptr::null_mut(), ptr::null_mut()) },
        FmlfsStatus::NullPointer
    );

    let garbage = CString::new("{\"order\":[0,0]}").unwrap();
    let mut r = ptr::null_mut();
    assert_eq!(unsafe { fmlfs_ranking_from_json(garbage.as_ptr(), &mut r) }, FmlfsStatus::Parse);

    let x = [1.0, 2.0];
    let y = [2u8, 0];
    assert_eq!(
        unsafe { fmlfs_dataset_from_arrays(x.as_ptr(), y.as_ptr(), 2, 1, 1, &mut ds) },
        FmlfsStatus::InvalidArgument
    );

    let dir = tempfile::tempdir().unwrap();
    let ds = load(&write_toy_csv(dir.path()));
    let mut r = ptr::null_mut();
    assert_eq!(unsafe { fmlfs_rank(ds, 1, 0.5, 10, 0, &mut r) }, FmlfsStatus::InvalidArgument);
    unsafe { fmlfs_dataset_free(ds) };
    unsafe {
        fmlfs_dataset_free(ptr::null_mut());
        fmlfs_ranking_free(ptr::null_mut());
        fmlfs_string_free(ptr::null_mut());
    }
}

/// Builds the static library into its own target directory, so the outer
/// `cargo test` lock and crate-type selection do not matter.
fn static_library() -> PathBuf {
    let exe = std::env::current_exe().unwrap();
    // tests run from <target>/<profile>/deps
    let target = exe.ancestors().nth(3).unwrap().join("c-smoke");
    let cargo = std::env::var("CARGO").unwrap_or_else(|_| "cargo".into());
    let status = Command::new(cargo)
        .args(["build", "--offline", "--quiet", "-p", "fmlfs-ffi", "--lib", "--target-dir"])
        .arg(&target)
        .current_dir(env!("CARGO_MANIFEST_DIR"))
        .status()
        .expect("cargo");
    assert!(status.success(), "building the static library failed");
    target.join("debug").join("libfmlfs_ffi.a")
}

#[test]
fn c_program_links_against_static_library() {
    let lib = static_library();
    assert!(lib.exists(), "static library missing at {}", lib.display());
    let crate_dir = Path::new(env!("CARGO_MANIFEST_DIR"));
    let dir = tempfile::tempdir().unwrap();
    let exe = dir.path().join("smoke");
    let status = Command::new("cc")
        .arg("-std=c11")
        .arg("-Wall")
        .arg("-Werror")
        .arg("-I")
        .arg(crate_dir.join("include"))
        .arg(crate_dir.join("tests").join("smoke.c"))
        .arg(&lib)
        .args(["-lpthread", "-ldl", "-lm", "-o"])
        .arg(&exe)
        .status()
        .expect("C compiler");
    assert!(status.success());
    let csv = write_toy_csv(dir.path());
    let out = Command::new(&exe).arg(&csv).output().unwrap();
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    assert!(String::from_utf8_lossy(&out.stdout).starts_with("ok "));
}
