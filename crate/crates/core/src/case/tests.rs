use super::*;
use crate::Vec3;

const LID: &str = r#"
[mesh]
generator = "box"
min = ["0 m", "0 m", "0 m"]
max = ["1 m", "1 m", "0.1 m"]
divisions = [8, 8, 1]

[mesh.patches]
zmin = "symmetry"
zmax = "symmetry"

[material]
density = "1 kg/m^3"
specific_heat = "1000 J/(kg*K)"
conductivity = "0.2 W/(m*K)"

[rheology]
consistency = "1 Pa*s"

[initial]
temperature = "50 degC"

[boundary.ymax]
velocity = "fixed"
motion = { translation = ["1 m/s", "0 m/s", "0 m/s"] }
temperature = "insulated"

[solver]
dt = "5 ms"
end_time = "0 s"

[output]
directory = "out"
probes = [{ name = "mid", point = ["0.5 m", "0.5 m", "0.05 m"] }]
sections = [{ name = "ux", field = "u_x", axis = "x", stations = ["0.25 m", "0.75 m"] }]
"#;

fn config_errors(r: crate::Result<impl std::fmt::Debug>) -> Vec<String> {
    match r {
        Err(crate::Error::Config(list)) => list,
        other => panic!("expected configuration errors, got {other:?}"),
    }
}

#[test]
fn parses_and_converts_units() {
    let case = CaseFile::parse(LID).unwrap().resolve(std::path::Path::new("/tmp/x")).unwrap();
    assert_eq!(case.initial_temperature, 323.15);
    assert_eq!(case.solver.dt, 5e-3);
    assert_eq!(case.physics.material.conductivity, 0.2);
    assert_eq!(case.output.directory, std::path::PathBuf::from("/tmp/x/out"));
    let b = &case.boundary["ymax"];
    match &b.velocity {
        Some(crate::fv::VelocityCondition::Fixed(m)) => assert_eq!(m.translation, Vec3::x()),
        v => panic!("{v:?}"),
    }
}

#[test]
fn unknown_keys_are_named() {
    let text = LID.replace("[rheology]", "[rheology]\nconsistensy = \"1 Pa*s\"").replace("[solver]", "[solver]\nsubsteps = 3");
    let errs = config_errors(CaseFile::parse(&text));
    assert!(errs.iter().any(|e| e.contains("rheology.consistensy")), "{errs:?}");
    assert!(errs.iter().any(|e| e.contains("solver.substeps")), "{errs:?}");
}

#[test]
fn every_problem_is_reported_with_its_path() {
    let text = LID
        .replace("\"1 kg/m^3\"", "\"-1 kg/m^3\"")
        .replace("\"5 ms\"", "\"5 m\"")
        .replace("consistency = \"1 Pa*s\"", "consistency = \"1 Pa*s\"\nexponent = 1.5")
        .replace("field = \"u_x\"", "field = \"vorticity\"");
    let errs = config_errors(CaseFile::parse(&text).unwrap().resolve(std::path::Path::new(".")));
    for key in ["material.density", "solver.dt", "rheology.exponent", "output.sections[0].field"] {
        assert!(errs.iter().any(|e| e.starts_with(key)), "{key} missing in {errs:?}");
    }
}

#[test]
fn mesh_source_must_be_unique() {
    let text = LID.replace("generator = \"box\"", "generator = \"box\"\nfile = \"m.mesh\"");
    let errs = config_errors(CaseFile::parse(&text).unwrap().resolve(std::path::Path::new(".")));
    assert!(errs.iter().any(|e| e.starts_with("mesh:")), "{errs:?}");
}

#[test]
fn unknown_patches_are_rejected_against_the_mesh() {
    let text = LID.replace("[boundary.ymax]", "[boundary.lid]");
    let case = CaseFile::parse(&text).unwrap().resolve(std::path::Path::new(".")).unwrap();
    let errs = config_errors(case.build_mesh());
    assert!(errs.iter().any(|e| e.starts_with("boundary.lid")), "{errs:?}");
}

#[test]
fn serialization_round_trip_is_a_fixed_point() {
    let a = CaseFile::parse(LID).unwrap();
    let text = a.to_toml().unwrap();
    let b = CaseFile::parse(&text).unwrap();
    assert_eq!(a, b);
    assert_eq!(b.to_toml().unwrap(), text);
}

#[test]
fn zero_end_time_writes_the_initial_snapshot_and_exits() {
    let dir = tempfile::tempdir().unwrap();
    let mut case = CaseFile::parse(LID).unwrap().resolve(dir.path()).unwrap();
    case.apply(&Overrides { out: Some(dir.path().join("o")), ..Default::default() });
    let s = run_case(&case, None).unwrap();
    assert_eq!(s.steps, 0);
    assert!(dir.path().join("o/vtk/fields_000000.vtk").exists());
    let probes = std::fs::read_to_string(dir.path().join("o/probes.csv")).unwrap();
    assert_eq!(probes.lines().count(), 2);
    let sections = std::fs::read_to_string(dir.path().join("o/sections.csv")).unwrap();
    assert_eq!(sections.lines().count(), 3);
}

#[test]
fn identical_runs_write_identical_bytes() {
    let dir = tempfile::tempdir().unwrap();
    let text = LID.replace("end_time = \"0 s\"", "end_time = \"15 ms\"");
    let mut outputs = Vec::new();
    for k in 0..2 {
        let mut case = CaseFile::parse(&text).unwrap().resolve(dir.path()).unwrap();
        case.apply(&Overrides { out: Some(dir.path().join(format!("run{k}"))), ..Default::default() });
        let s = run_case(&case, None).unwrap();
        assert_eq!(s.steps, 3);
        let read = |f: &str| std::fs::read(dir.path().join(format!("run{k}/{f}"))).unwrap();
        outputs.push([read("probes.csv"), read("residuals.csv"), read("sections.csv"), read("steps.csv")]);
    }
    assert_eq!(outputs[0], outputs[1]);
}
