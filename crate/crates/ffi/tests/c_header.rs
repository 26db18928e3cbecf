//! Compiles and runs a C program against the generated header and the shared
//! library.

use std::path::PathBuf;
use std::process::Command;

const PROGRAM: &str = r#"
#include <stdio.h>
#include "graphsteer.h"

int main(void) {
    GsSchedule sched = gs_schedule_default();
    sched.steps = 30;
    GsPrior *prior = NULL;
    if (gs_prior_gaussian(4, 0, 1.0, sched, &prior) != GS_STATUS_OK) return 1;
    GsReward *reward = NULL;
    if (gs_reward_star(&reward) != GS_STATUS_OK) return 2;
    GsSamplerOptions opts = gs_sampler_options_default();
    opts.n_chains = 2;
    GsSampleSet *set = NULL;
    if (gs_sample(prior, reward, opts, &set) != GS_STATUS_OK) return 3;
    uint8_t adj[16];
    if (gs_sample_set_adjacency(set, 1, adj, sizeof adj) != GS_STATUS_OK) return 4;
    if (gs_sample_set_adjacency(set, 5, adj, sizeof adj) != GS_STATUS_USAGE) return 5;
    printf("%zu %s\n", gs_sample_set_len(set), gs_last_error());
    gs_sample_set_free(set);
    gs_reward_free(reward);
    gs_prior_free(prior);
    return 0;
}
"#;

#[test]
fn c_program_links_and_runs() {
    let Ok(cc) = which_cc() else {
        eprintln!("no C compiler found; skipping");
        return;
    };
    let crate_dir = PathBuf::from(env!("CARGO_MANIFEST_DIR"));
    // Test binaries live in <target>/<profile>/deps; the shared library one level up.
    let lib_dir = std::env::current_exe()
        .unwrap()
        .parent()
        .unwrap()
        .parent()
        .unwrap()
        .to_path_buf();
    assert!(
        lib_dir.join("libgraphsteer_ffi.so").is_file() || lib_dir.join("libgraphsteer_ffi.dylib").is_file(),
        "shared library not found in {}",
        lib_dir.display()
    );
    let dir = tempfile::tempdir().unwrap();
    let src = dir.path().join("main.c");
    let exe = dir.path().join("main");
    std::fs::write(&src, PROGRAM).unwrap();
    let status = Command::new(cc)
        .arg("-std=c11")
        .arg("-Wall")
        .arg("-Werror")
        .arg("-I")
        .arg(crate_dir.join("include"))
        .arg(&src)
        .arg("-o")
        .arg(&exe)
        .arg("-L")
        .arg(&lib_dir)
        .arg("-lgraphsteer_ffi")
        .status()
        .unwrap();
    assert!(status.success());
    let out = Command::new(&exe)
        .env("LD_LIBRARY_PATH", &lib_dir)
        .env("DYLD_LIBRARY_PATH", &lib_dir)
        .output()
        .unwrap();
    assert!(out.status.success(), "exit {:?}", out.status.code());
    let stdout = String::from_utf8_lossy(&out.stdout);
    assert!(stdout.starts_with("2 "), "{stdout}");
    assert!(stdout.contains("out of range"));
}

fn which_cc() -> Result<&'static str, ()> {
    ["cc", "clang", "gcc"]
        .into_iter()
        .find(|c| {
            Command::new(c)
                .arg("--version")
                .output()
                .is_ok_and(|o| o.status.success())
        })
        .ok_or(())
}
