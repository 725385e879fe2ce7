use std::ffi::{CStr, CString};
use std::ptr;

use gosszeta_ffi::*;

fn field(p: u32, n: u32) -> *mut GosszetaField {
    let mut f = ptr::null_mut();
    assert_eq!(unsafe { gosszeta_field_new(p, n, &mut f) }, GosszetaStatus::Ok);
    assert!(!f.is_null());
    f
}

fn last_error() -> String {
    unsafe { CStr::from_ptr(gosszeta_last_error()) }.to_str().unwrap().to_string()
}

fn take(s: *mut std::ffi::c_char) -> serde_json::Value {
    let v = serde_json::from_str(unsafe { CStr::from_ptr(s) }.to_str().unwrap()).unwrap();
    unsafe { gosszeta_string_free(s) };
    v
}

#[test]
fn field_lifecycle() {
    let f = field(2, 3);
    assert_eq!(unsafe { gosszeta_field_order(f) }, 8);
    unsafe { gosszeta_field_free(f) };
    unsafe { gosszeta_field_free(ptr::null_mut()) };
    assert_eq!(unsafe { gosszeta_field_order(ptr::null()) }, 0);

    let mut g = ptr::null_mut();
    assert_eq!(unsafe { gosszeta_field_new(6, 1, &mut g) }, GosszetaStatus::InvalidArgument);
    assert!(g.is_null());
    assert!(!last_error().is_empty());
    assert_eq!(unsafe { gosszeta_field_new(3, 1, ptr::null_mut()) }, GosszetaStatus::NullPointer);
}

#[test]
fn valuations() {
    let f = field(3, 1);
    let m = CString::new("8").unwrap();
    let expected = [(0, Some(0)), (1, Some(1)), (2, Some(6)), (3, None)];
    for (d, want) in expected {
        let (mut v, mut zero) = (-1i64, false);
        let st = unsafe { gosszeta_valuation(f, 1, m.as_ptr(), d, 14, &mut v, &mut zero) };
        assert_eq!(st, GosszetaStatus::Ok);
        match want {
            Some(w) => assert_eq!((v, zero), (w, false)),
            None => assert!(zero),
        }
    }
    let bad = CString::new("eight").unwrap();
    let (mut v, mut zero) = (0i64, false);
    let st = unsafe { gosszeta_valuation(f, 1, bad.as_ptr(), 1, 14, &mut v, &mut zero) };
    assert_eq!(st, GosszetaStatus::InvalidArgument);
    assert!(last_error().contains("eight"));

    let big = CString::new("1099511627775").unwrap();
    let st = unsafe { gosszeta_valuation(f, 0, big.as_ptr(), 2, 10, &mut v, &mut zero) };
    assert_eq!(st, GosszetaStatus::ResourceLimit);
    unsafe { gosszeta_field_free(f) };
}

#[test]
fn greedy_and_verify_documents() {
    let f = field(3, 1);
    let m = CString::new("8").unwrap();
    let mut s = ptr::null_mut();
    assert_eq!(unsafe { gosszeta_greedy_json(f, 1, m.as_ptr(), 2, &mut s) }, GosszetaStatus::Ok);
    let dec = take(s);
    assert_eq!(dec["weight"], 6);
    assert_eq!(dec["exists"], true);

    let mut verdict = false;
    let st = unsafe { gosszeta_verify_json(f, 1, m.as_ptr(), 64, &mut s, &mut verdict) };
    assert_eq!(st, GosszetaStatus::Ok);
    assert!(verdict);
    let doc = take(s);
    assert_eq!(doc["degree"], 2);
    assert_eq!(doc["roots"].as_array().unwrap().len(), 2);
    assert_eq!(doc["verdict"], true);

    let spec = CString::new("-1").unwrap();
    let st = unsafe { gosszeta_verify_stream_json(f, 0, spec.as_ptr(), 32, 4, 64, &mut s, &mut verdict) };
    assert_eq!(st, GosszetaStatus::Ok, "{}", last_error());
    assert!(verdict);
    let doc = take(s);
    assert_eq!(doc["degree"], 4);

    let st = unsafe { gosszeta_verify_json(f, 1, ptr::null(), 0, &mut s, &mut verdict) };
    assert_eq!(st, GosszetaStatus::NullPointer);
    unsafe { gosszeta_field_free(f) };
}

#[test]
fn header_declares_the_api() {
    let header = std::fs::read_to_string(concat!(env!("CARGO_MANIFEST_DIR"), "/include/gosszeta.h")).unwrap();
    for name in [
        "gosszeta_field_new",
        "gosszeta_field_free",
        "gosszeta_valuation",
        "gosszeta_greedy_json",
        "gosszeta_verify_json",
        "gosszeta_verify_stream_json",
        "gosszeta_last_error",
        "gosszeta_string_free",
        "GOSSZETA_STATUS_RESOURCE_LIMIT",
        "typedef struct GosszetaField GosszetaField",
    ] {
        assert!(header.contains(name), "header lacks {name}");
    }
}

/// Builds `tests/smoke.c` against the header and the static library.
/// Skipped when no C compiler is on the path.
#[test]
fn c_program_links_and_runs() {
    use std::path::PathBuf;
    use std::process::Command;

    let dir = PathBuf::from(env!("CARGO_MANIFEST_DIR"));
    if Command::new("cc").arg("--version").output().is_err() {
        eprintln!("skipping: no C compiler");
        return;
    }
    // the test binary sits next to the library in target/<profile>/deps
    let deps = std::env::current_exe().unwrap().parent().unwrap().to_path_buf();
    let lib = [deps.join("libgosszeta_ffi.a"), deps.join("../libgosszeta_ffi.a")]
        .into_iter()
        .find(|p| p.exists())
        .expect("static library is built with the crate");
    let exe = deps.join("gosszeta_smoke");
    let status = Command::new("cc")
        .arg(dir.join("tests/smoke.c"))
        .arg("-I")
        .arg(dir.join("include"))
        .arg(&lib)
        .args(["-lpthread", "-ldl", "-lm", "-o"])
        .arg(&exe)
        .status()
        .unwrap();
    assert!(status.success(), "C build failed");
    let out = Command::new(&exe).output().unwrap();
    assert!(out.status.success(), "smoke program exited with {:?}", out.status.code());
    assert_eq!(String::from_utf8_lossy(&out.stdout).trim(), "ok");
}
