//! Compiles a small C program against the generated header and the static
//! library. Skipped when no C compiler is on PATH.

use std::path::PathBuf;
use std::process::Command;

const PROGRAM: &str = r#"
#include <math.h>
#include <stdio.h>
#include "gaussnm.h"

int main(void) {
    GnmState *a = NULL, *b = NULL;
    double f = 0.0;
    if (gnm_state_new(0, 0, 0, 0, 0, &a) != GNM_STATUS_OK) return 1;
    if (gnm_state_new(1, 0, 0, 0, 0, &b) != GNM_STATUS_OK) return 2;
    if (gnm_fidelity(a, b, &f) != GNM_STATUS_OK) return 3;
    if (fabs(f - sqrt(0.5)) > 1e-12) return 4;
    if (gnm_state_new(-1, 0, 0, 0, 0, &b) != GNM_STATUS_DOMAIN) return 5;
    if (gnm_last_error()[0] == '\0') return 6;

    GnmChannel *ch = NULL;
    GnmResult *r = NULL;
    if (gnm_channel_damping_example(0.1, &ch) != GNM_STATUS_OK) return 7;
    if (gnm_measure(ch, GNM_FAMILY_COHERENT, GNM_METHOD_CLOSED, NAN, &r) != GNM_STATUS_OK) return 8;
    printf("%.6f\n", gnm_result_value(r));
    gnm_result_free(r);
    gnm_channel_free(ch);
    gnm_state_free(a);
    gnm_state_free(b);
    return 0;
}
"#;

#[test]
fn header_compiles_and_links() {
    let cc = std::env::var("CC").unwrap_or_else(|_| "cc".into());
    if Command::new(&cc).arg("--version").output().is_err() {
        eprintln!("no C compiler, skipping");
        return;
    }
    let manifest = PathBuf::from(env!("CARGO_MANIFEST_DIR"));
    // target/<profile>/deps/<test binary>
    let profile_dir = std::env::current_exe().unwrap().parent().unwrap().parent().unwrap().to_path_buf();
    let lib = profile_dir.join("libgaussnm_ffi.a");
    assert!(lib.exists(), "static library not found at {}", lib.display());

    let dir = tempfile::tempdir().unwrap();
    let src = dir.path().join("main.c");
    let exe = dir.path().join("main");
    std::fs::write(&src, PROGRAM).unwrap();
    let status = Command::new(&cc)
        .arg("-std=c99")
        .arg("-Wall")
        .arg("-Werror")
        .arg("-I")
        .arg(manifest.join("include"))
        .arg(&src)
        .arg(&lib)
        .args(["-lm", "-lpthread", "-ldl", "-o"])
        .arg(&exe)
        .status()
        .unwrap();
    assert!(status.success());
    let out = Command::new(&exe).output().unwrap();
    assert!(out.status.success(), "exit {:?}", out.status.code());
    let value: f64 = String::from_utf8(out.stdout).unwrap().trim().parse().unwrap();
    assert!((value - 0.046).abs() < 1e-3);
}
