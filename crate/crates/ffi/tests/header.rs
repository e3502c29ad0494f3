//! The generated header compiles as C and C++, and a C program linked
//! against the static library runs end to end.

use std::path::{Path, PathBuf};
use std::process::Command;

fn crate_dir() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR"))
}

fn compiler() -> Option<&'static str> {
    ["cc", "gcc", "clang"]
        .into_iter()
        .find(|c| Command::new(c).arg("--version").output().is_ok_and(|o| o.status.success()))
}

/// `target/<profile>`, found from this test binary's location.
fn profile_dir() -> PathBuf {
    let exe = std::env::current_exe().expect("test binary path");
    exe.parent().and_then(Path::parent).expect("target/<profile>/deps").to_path_buf()
}

#[test]
fn header_is_current_and_ascii() {
    let header = std::fs::read_to_string(crate_dir().join("include/bte.h")).expect("build script writes include/bte.h");
    assert!(header.is_ascii());
    for name in ["bte_encode", "bte_hint_render_config", "bte_paired_effect", "bte_last_error", "BTE_STATUS_PANIC"] {
        assert!(header.contains(name), "{name} missing from header");
    }
    assert!(header.contains("typedef struct BteTree BteTree;"), "handles must stay opaque");
}

#[test]
fn header_compiles_as_c_and_cpp() {
    let Some(cc) = compiler() else {
        panic!("no C compiler on PATH");
    };
    let include = crate_dir().join("include");
    for lang in ["c", "c++"] {
        let out = Command::new(cc)
            .args(["-fsyntax-only", "-Wall", "-Wextra", "-Werror", "-x", lang])
            .arg(include.join("bte.h"))
            .output()
            .expect("compiler runs");
        assert!(out.status.success(), "{lang}: {}", String::from_utf8_lossy(&out.stderr));
    }
}

#[test]
fn c_program_links_and_runs() {
    let cc = compiler().expect("no C compiler on PATH");
    let lib = profile_dir().join("libbte_ffi.a");
    assert!(lib.is_file(), "{} not built", lib.display());
    let dir = tempfile::tempdir().unwrap();
    let exe = dir.path().join("smoke");
    let out = Command::new(cc)
        .arg("-std=c99")
        .arg("-I")
        .arg(crate_dir().join("include"))
        .arg(crate_dir().join("tests/c/smoke.c"))
        .arg(&lib)
        .args(["-lm", "-lpthread", "-ldl", "-o"])
        .arg(&exe)
        .output()
        .expect("compiler runs");
    assert!(out.status.success(), "link: {}", String::from_utf8_lossy(&out.stderr));
    let run = Command::new(&exe).output().expect("smoke runs");
    let stdout = String::from_utf8_lossy(&run.stdout);
    assert!(run.status.success(), "exit {:?}: {stdout} {}", run.status.code(), String::from_utf8_lossy(&run.stderr));
    assert!(stdout.starts_with("ok "), "{stdout}");
}
