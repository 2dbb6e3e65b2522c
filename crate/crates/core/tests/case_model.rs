use std::path::{Path, PathBuf};

use foamgpt::case::{
    load_case, required_artifacts, validate_case, write_case, CaseEntry, CaseTree, Severity, Violation,
};
use foamgpt::foam::{parse_foam_file, serialize_foam_file, FormatStyle};

fn fixtures() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("fixtures")
}

const BASELINES: &[(&str, &str)] = &[
    ("cavity", "icoFoam"),
    ("pitzDaily", "simpleFoam"),
    ("hotRoom", "buoyantBoussinesqSimpleFoam"),
    ("damBreak", "interFoam"),
    ("column", "MPPICFoam"),
    ("mixerVessel2D", "pimpleFoam"),
];

const SOLUTIONS: &[(&str, &str)] = &[
    ("bubble", "interFoam"),
    ("droplet", "interFoam"),
    ("nozzle", "interFoam"),
    ("airfoil", "simpleFoam"),
    ("motorBike", "simpleFoam"),
    ("cylinder", "pimpleFoam"),
];

fn fatal(v: &[Violation]) -> Vec<&Violation> {
    v.iter().filter(|v| v.severity == Severity::Fatal).collect()
}

fn solution_case(name: &str) -> CaseTree {
    let mut case = load_case(&fixtures().join("provided").join(name)).unwrap();
    case.merge(&load_case(&fixtures().join("solutions").join(name)).unwrap());
    case
}

#[test]
fn every_fixture_dictionary_is_a_fixed_point() {
    let mut n = 0;
    for entry in walkdir::WalkDir::new(fixtures()).sort_by_file_name() {
        let entry = entry.unwrap();
        if !entry.file_type().is_file() {
            continue;
        }
        let text = std::fs::read_to_string(entry.path()).unwrap_or_default();
        if !text.contains("FoamFile") {
            continue;
        }
        let first = parse_foam_file(&text).unwrap_or_else(|e| panic!("{}: {e}", entry.path().display()));
        let out = serialize_foam_file(&first, FormatStyle::default());
        let second = parse_foam_file(&out).unwrap();
        assert_eq!(first, second, "{}", entry.path().display());
        assert_eq!(serialize_foam_file(&second, FormatStyle::default()), out);
        n += 1;
    }
    assert!(n >= 15, "only {n} dictionaries");
}

#[test]
fn cavity_listing() {
    let case = load_case(&fixtures().join("cases/cavity")).unwrap();
    for p in ["0/U", "0/p", "system/controlDict", "system/fvSchemes", "system/fvSolution", "system/blockMeshDict"] {
        assert!(matches!(case.get(p), Some(CaseEntry::Parsed(_))), "{p}");
    }
    assert!(case.warnings.is_empty());
}

#[test]
fn empty_dir_and_binary_blob() {
    let dir = tempfile::tempdir().unwrap();
    assert!(load_case(dir.path()).unwrap().is_empty());
    std::fs::write(dir.path().join("mesh.bin"), [0u8, 159, 146, 150, 255]).unwrap();
    let case = load_case(dir.path()).unwrap();
    assert_eq!(case.len(), 1);
    assert!(matches!(case.get("mesh.bin"), Some(CaseEntry::Blob(_))));
    assert!(fatal(&case.warnings).is_empty());
}

#[test]
fn write_load_round_trip() {
    for dir in ["cases/cavity", "cases/pitzDaily", "provided/airfoil", "provided/motorBike"] {
        let case = load_case(&fixtures().join(dir)).unwrap();
        let out = tempfile::tempdir().unwrap();
        write_case(&case, out.path()).unwrap();
        let back = load_case(out.path()).unwrap();
        assert!(case.same_content(&back), "{dir}");
    }
    let polymesh = fixtures().join("provided/airfoil/constant/polyMesh/points");
    let case = load_case(&fixtures().join("provided/airfoil")).unwrap();
    let out = tempfile::tempdir().unwrap();
    write_case(&case, out.path()).unwrap();
    assert_eq!(std::fs::read(polymesh).unwrap(), std::fs::read(out.path().join("constant/polyMesh/points")).unwrap());
}

#[test]
fn empty_case_writes_empty_dir() {
    let out = tempfile::tempdir().unwrap();
    let target = out.path().join("new");
    write_case(&CaseTree::new("x"), &target).unwrap();
    assert!(target.is_dir());
    assert_eq!(std::fs::read_dir(&target).unwrap().count(), 0);
}

#[test]
fn baselines_and_solutions_have_no_fatal_violations() {
    for (name, solver) in BASELINES {
        let case = load_case(&fixtures().join("cases").join(name)).unwrap();
        let v = validate_case(&case, &required_artifacts(solver));
        assert!(fatal(&v).is_empty(), "{name}: {v:#?}");
    }
    for (name, solver) in SOLUTIONS {
        let v = validate_case(&solution_case(name), &required_artifacts(solver));
        assert!(fatal(&v).is_empty(), "{name}: {v:#?}");
    }
}

#[test]
fn pristine_cavity_has_no_violations_at_all() {
    let case = load_case(&fixtures().join("cases/cavity")).unwrap();
    assert_eq!(validate_case(&case, &required_artifacts("icoFoam")), vec![]);
}

#[test]
fn empty_directory_misses_control_dict() {
    let dir = tempfile::tempdir().unwrap();
    let v = validate_case(&load_case(dir.path()).unwrap(), &required_artifacts("icoFoam"));
    assert!(v.iter().any(|v| v.rule_id == "R2" && v.path == "system/controlDict"));
}
