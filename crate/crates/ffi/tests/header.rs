//! Compiles and runs a small C program against the generated header and
//! the static library. Skipped when no C compiler is on the path.

use std::path::PathBuf;
use std::process::Command;

const PROGRAM: &str = r#"
#include <stdio.h>
#include "hloc.h"

int main(void) {
    HlocField *f = NULL;
    HlocWeight *w = NULL;
    double vals[65], norm = 0.0;
    int i;
    if (hloc_field_new(1, 4.0, 64, &f) != HLOC_STATUS_INVALID_GRID) return 10;
    if (hloc_last_error() == NULL) return 11;
    if (hloc_field_new(1, 4.0, 65, &f) != HLOC_STATUS_OK) return 12;
    for (i = 0; i < 65; i++) vals[i] = 1.0;
    if (hloc_field_set(f, vals, 65) != HLOC_STATUS_OK) return 13;
    if (hloc_weight_new(1, 4.0, 65, "{\"family\": \"constant\"}", &w) != HLOC_STATUS_OK) return 14;
    if (hloc_lp_norm(f, w, 1.0, &norm) != HLOC_STATUS_OK) return 15;
    printf("%.17g\n", norm);
    hloc_weight_free(w);
    hloc_field_free(f);
    return 0;
}
"#;

fn have(cmd: &str) -> bool {
    Command::new(cmd).arg("--version").output().is_ok()
}

#[test]
fn c_program_links_and_runs() {
    if !have("cc") {
        eprintln!("no C compiler, skipping");
        return;
    }
    let manifest = PathBuf::from(env!("CARGO_MANIFEST_DIR"));
    // target/<profile>/deps/<this test> -> target/<profile>
    let profile_dir = std::env::current_exe().unwrap().parent().unwrap().parent().unwrap().to_path_buf();
    let lib = profile_dir.join("libhloc_ffi.a");
    if !lib.exists() {
        eprintln!("{} not built, skipping", lib.display());
        return;
    }
    let dir = tempfile::tempdir().unwrap();
    let src = dir.path().join("main.c");
    let exe = dir.path().join("main");
    std::fs::write(&src, PROGRAM).unwrap();
    let status = Command::new("cc")
        .arg("-std=c99")
        .arg("-Wall")
        .arg("-Werror")
        .arg("-I")
        .arg(manifest.join("include"))
        .arg(&src)
        .arg(&lib)
        .args(["-lpthread", "-ldl", "-lm", "-o"])
        .arg(&exe)
        .status()
        .unwrap();
    assert!(status.success());
    let out = Command::new(&exe).output().unwrap();
    assert!(out.status.success(), "exit {:?}", out.status.code());
    // constant weight, f = 1: h times the 65 nodes
    let norm: f64 = String::from_utf8(out.stdout).unwrap().trim().parse().unwrap();
    assert!((norm - 65.0 * 0.125).abs() < 1e-12, "{norm}");
}
