//! Compiles and runs a C program against the generated header and the static
//! library. Skipped when no C compiler is on the path.

use std::path::{Path, PathBuf};
use std::process::Command;

const PROGRAM: &str = r#"
#include <stdio.h>
#include <stdlib.h>
#include "relaxns.h"

int main(void) {
    RelaxnsGrid *g = NULL;
    if (relaxns_grid_new(2, 7, &g) != RELAXNS_STATUS_INVALID_GRID) return 10;
    if (relaxns_last_error_message() == NULL) return 11;
    if (relaxns_grid_new(2, 16, &g) != RELAXNS_STATUS_OK) return 12;
    size_t n = relaxns_field_len(g, RELAXNS_FIELD_VELOCITY);
    double *u = malloc(n * sizeof(double));
    if (relaxns_taylor_green(g, 1.0, u, n) != RELAXNS_STATUS_OK) return 13;
    RelaxnsSolver *s = NULL;
    if (relaxns_solver_new(g, 1e-3, 0.02, 1e-3, &s) != RELAXNS_STATUS_OK) return 14;
    if (relaxns_solver_prepare(s, u, n) != RELAXNS_STATUS_OK) return 15;
    if (relaxns_solver_step(s, 5) != RELAXNS_STATUS_OK) return 16;
    RelaxnsNorms norms;
    if (relaxns_solver_norms(s, &norms) != RELAXNS_STATUS_OK) return 17;
    printf("t=%.3e u_l2=%.6e\n", norms.t, norms.u_l2);
    relaxns_solver_free(s);
    relaxns_grid_free(g);
    free(u);
    return norms.u_l2 > 0.0 ? 0 : 18;
}
"#;

fn compiler() -> Option<String> {
    let cc = std::env::var("CC").unwrap_or_else(|_| "cc".into());
    Command::new(&cc)
        .arg("--version")
        .output()
        .ok()
        .filter(|o| o.status.success())
        .map(|_| cc)
}

fn static_lib() -> Option<PathBuf> {
    let exe = std::env::current_exe().ok()?;
    let profile_dir = exe.parent()?.parent()?;
    let lib = profile_dir.join("librelaxns_ffi.a");
    lib.exists().then_some(lib)
}

#[test]
fn c_program_links_and_runs() {
    let Some(cc) = compiler() else {
        eprintln!("no C compiler; skipped");
        return;
    };
    let Some(lib) = static_lib() else {
        eprintln!("static library not built; skipped");
        return;
    };
    let include = Path::new(env!("CARGO_MANIFEST_DIR")).join("include");
    let dir = tempfile::tempdir().unwrap();
    let src = dir.path().join("smoke.c");
    let bin = dir.path().join("smoke");
    std::fs::write(&src, PROGRAM).unwrap();
    let out = Command::new(&cc)
        .arg("-std=c99")
        .arg("-Wall")
        .arg("-Werror")
        .arg("-I")
        .arg(&include)
        .arg(&src)
        .arg(&lib)
        .args(["-lpthread", "-ldl", "-lm", "-o"])
        .arg(&bin)
        .output()
        .unwrap();
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let run = Command::new(&bin).output().unwrap();
    assert!(
        run.status.success(),
        "exit {:?}: {}",
        run.status.code(),
        String::from_utf8_lossy(&run.stdout)
    );
    assert!(String::from_utf8_lossy(&run.stdout).starts_with("t=5.000e-03"));
}
