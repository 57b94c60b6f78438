//! End-to-end checks of the `ibflow` binary.

use std::path::Path;
use std::process::Command;

fn ibflow() -> Command {
    Command::new(env!("CARGO_BIN_EXE_ibflow"))
}

fn cases() -> &'static Path {
    Path::new(concat!(env!("CARGO_MANIFEST_DIR"), "/../../cases"))
}

#[test]
fn every_bundled_case_validates() {
    for name in ["couette_ib", "couette_conforming", "channel_powerlaw", "shear_cavity_thermal", "dim_vs_ibm_sweep"] {
        let out = ibflow().arg("validate").arg(cases().join(format!("{name}.toml"))).output().unwrap();
        assert!(out.status.success(), "{name}: {}", String::from_utf8_lossy(&out.stderr));
    }
}

#[test]
fn unknown_key_exits_with_a_configuration_error() {
    let dir = tempfile::tempdir().unwrap();
    let text = std::fs::read_to_string(cases().join("channel_powerlaw.toml")).unwrap().replace("[solver]", "[solver]\ncfl = 0.5");
    let path = dir.path().join("bad.toml");
    std::fs::write(&path, text).unwrap();
    let out = ibflow().arg("run").arg(&path).output().unwrap();
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("solver.cfl"));
}

#[test]
fn zero_end_time_run_writes_the_initial_state() {
    let dir = tempfile::tempdir().unwrap();
    let text = std::fs::read_to_string(cases().join("couette_ib.toml"))
        .unwrap()
        .replace("end_time = \"2 s\"", "end_time = \"0 s\"")
        .replace("divisions = [64, 64, 1]", "divisions = [16, 16, 1]");
    let path = dir.path().join("c.toml");
    std::fs::write(&path, text).unwrap();
    let out_dir = dir.path().join("out");
    let out = ibflow().arg("--out").arg(&out_dir).arg("run").arg(&path).output().unwrap();
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    for f in ["vtk/fields_000000.vtk", "probes.csv", "steps.csv", "residuals.csv", "benchmark.csv", "surface_inner.csv"] {
        assert!(out_dir.join(f).exists(), "{f} missing");
    }
}

#[test]
fn mesh_export_and_stencil_audit_write_their_files() {
    let dir = tempfile::tempdir().unwrap();
    let case = cases().join("dim_vs_ibm_sweep.toml");
    let out = ibflow().arg("--out").arg(dir.path()).arg("mesh-export").arg(&case).output().unwrap();
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    assert!(dir.path().join("mesh.ibflow").exists() && dir.path().join("mesh.vtk").exists());
    let out = ibflow()
        .args(["--partitions", "4", "--out"])
        .arg(dir.path())
        .arg("stencil-audit")
        .arg(&case)
        .output()
        .unwrap();
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let audit = std::fs::read_to_string(dir.path().join("stencil_audit.txt")).unwrap();
    assert!(audit.contains("gathers match true"), "{}", audit.lines().last().unwrap_or(""));
}
