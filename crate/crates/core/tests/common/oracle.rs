//! Reference answers for the benchmark suites, built from raw fixture text
//! with plain string edits. Shared by the script generator example and the
//! drift test.

#![allow(dead_code)]

use std::fs;
use std::path::{Path, PathBuf};

pub fn core_dir() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).to_path_buf()
}

pub fn fixtures() -> PathBuf {
    core_dir().join("fixtures")
}

pub fn scripts_dir() -> PathBuf {
    core_dir().join("suites/scripts")
}

enum Edit {
    Replace(&'static str, &'static str),
    Append(&'static str),
}

use Edit::{Append, Replace};

struct ModifyTask {
    id: &'static str,
    case: &'static str,
    solver: &'static str,
    file: &'static str,
    edits: &'static [Edit],
}

const RAS_OFF: &str = "simulationType  laminar;";
const TAIL: &str = "// ************************************************************************* //";

macro_rules! ras {
    ($model:literal) => {
        concat!("simulationType  RAS;\n\nRAS\n{\n    RASModel        ", $model, ";\n\n    turbulence      on;\n\n    printCoeffs     on;\n}")
    };
}

const MODIFY: &[ModifyTask] = &[
    ModifyTask {
        id: "cavity-lid-2ms",
        case: "cavity",
        solver: "icoFoam",
        file: "0/U",
        edits: &[Replace("uniform (1 0 0)", "uniform (2 0 0)")],
    },
    ModifyTask {
        id: "cavity-lid-sine",
        case: "cavity",
        solver: "icoFoam",
        file: "0/U",
        edits: &[Replace(
            "type            fixedValue;\n        value           uniform (1 0 0);",
            "type            uniformFixedValue;\n        uniformValue    sine;\n        uniformValueCoeffs\n        {\n            frequency   10;\n            amplitude   5;\n            scale       (1 0 0);\n            level       (0 0 0);\n        }\n        value           uniform (0 0 0);",
        )],
    },
    ModifyTask {
        id: "cavity-mesh-15",
        case: "cavity",
        solver: "icoFoam",
        file: "system/blockMeshDict",
        edits: &[Replace("(20 20 1)", "(15 15 1)")],
    },
    ModifyTask {
        id: "cavity-endtime-5",
        case: "cavity",
        solver: "icoFoam",
        file: "system/controlDict",
        edits: &[Replace("endTime         3;", "endTime         5;")],
    },
    ModifyTask {
        id: "cavity-rngkepsilon",
        case: "cavity",
        solver: "icoFoam",
        file: "constant/turbulenceProperties",
        edits: &[Replace(RAS_OFF, ras!("RNGkEpsilon"))],
    },
    ModifyTask {
        id: "cavity-komegasst",
        case: "cavity",
        solver: "icoFoam",
        file: "constant/turbulenceProperties",
        edits: &[Replace(RAS_OFF, ras!("kOmegaSST"))],
    },
    ModifyTask {
        id: "cavity-kklomega",
        case: "cavity",
        solver: "icoFoam",
        file: "constant/turbulenceProperties",
        edits: &[Replace(RAS_OFF, ras!("kkLOmega"))],
    },
    ModifyTask {
        id: "cavity-lrr",
        case: "cavity",
        solver: "icoFoam",
        file: "constant/turbulenceProperties",
        edits: &[Replace(RAS_OFF, ras!("LRR"))],
    },
    ModifyTask {
        id: "pitzdaily-inlet-20",
        case: "pitzDaily",
        solver: "simpleFoam",
        file: "0/U",
        edits: &[Replace("uniform (10 0 0)", "uniform (20 0 0)")],
    },
    ModifyTask {
        id: "pitzdaily-komegasst",
        case: "pitzDaily",
        solver: "simpleFoam",
        file: "constant/turbulenceProperties",
        edits: &[Replace("RASModel        kEpsilon;", "RASModel        kOmegaSST;")],
    },
    ModifyTask {
        id: "pitzdaily-smagorinsky",
        case: "pitzDaily",
        solver: "simpleFoam",
        file: "constant/turbulenceProperties",
        edits: &[
            Replace("simulationType  RAS;", "simulationType  LES;"),
            Append("LES\n{\n    LESModel        Smagorinsky;\n\n    turbulence      on;\n\n    printCoeffs     on;\n\n    delta           cubeRootVol;\n}\n"),
        ],
    },
    ModifyTask {
        id: "hotroom-hot-wall-320",
        case: "hotRoom",
        solver: "buoyantBoussinesqSimpleFoam",
        file: "0/T",
        edits: &[Replace("uniform 310;", "uniform 320;")],
    },
    ModifyTask {
        id: "dambreak-oil",
        case: "damBreak",
        solver: "interFoam",
        file: "constant/transportProperties",
        edits: &[Replace("nu              1e-06;", "nu              1e-04;"), Replace("rho             1000;", "rho             850;")],
    },
    ModifyTask {
        id: "dambreak-kepsilon",
        case: "damBreak",
        solver: "interFoam",
        file: "constant/turbulenceProperties",
        edits: &[Replace(RAS_OFF, ras!("kEpsilon"))],
    },
    ModifyTask {
        id: "column-velocity-2",
        case: "column",
        solver: "MPPICFoam",
        file: "0/U.air",
        edits: &[Replace("uniform (0 1 0)", "uniform (0 2 0)")],
    },
    ModifyTask {
        id: "column-co",
        case: "column",
        solver: "MPPICFoam",
        file: "constant/transportProperties",
        edits: &[Replace("rho.air         1.2;", "rho.air         1.14;"), Replace("nu              1e-05;", "nu              1.5e-05;")],
    },
    ModifyTask {
        id: "column-kepsilon",
        case: "column",
        solver: "MPPICFoam",
        file: "constant/turbulenceProperties.air",
        edits: &[Replace(RAS_OFF, ras!("kEpsilon"))],
    },
    ModifyTask {
        id: "mixer-omega-15",
        case: "mixerVessel2D",
        solver: "pimpleFoam",
        file: "constant/MRFProperties",
        edits: &[Replace("omega     20;", "omega     15;")],
    },
    ModifyTask {
        id: "mixer-kepsilon",
        case: "mixerVessel2D",
        solver: "pimpleFoam",
        file: "constant/turbulenceProperties",
        edits: &[Replace(RAS_OFF, ras!("kEpsilon"))],
    },
];

/// (task id, solver, fixture dir name, uses setFields, mesh provided)
const GENERATE: &[(&str, &str, &str, bool, bool)] = &[
    ("bubble", "interFoam", "bubble", true, false),
    ("droplet", "interFoam", "droplet", true, false),
    ("airfoil", "simpleFoam", "airfoil", false, true),
    ("motorbike", "simpleFoam", "motorBike", false, true),
    ("cylinder", "pimpleFoam", "cylinder", false, true),
    ("nozzle", "interFoam", "nozzle", true, false),
];

fn apply(text: &str, edits: &[Edit], what: &str) -> String {
    let mut out = text.to_string();
    for e in edits {
        match e {
            Replace(old, new) => {
                assert_eq!(out.matches(old).count(), 1, "{what}: '{old}' must occur exactly once");
                out = out.replacen(old, new, 1);
            }
            Append(block) => {
                let at = out.rfind(TAIL).unwrap_or_else(|| panic!("{what}: no closing banner"));
                out.insert_str(at, &format!("{block}\n"));
            }
        }
    }
    out
}

fn plan(solver: &str, commands: &[&str]) -> String {
    serde_json::json!({ "solver": solver, "commands": commands }).to_string()
}

fn file_block(path: &str, text: &str) -> String {
    let body = if text.ends_with('\n') { text.to_string() } else { format!("{text}\n") };
    format!("FILE: {path}\n```\n{body}```\n")
}

fn modify_commands(solver: &str) -> Vec<&str> {
    let mut c = vec!["blockMesh"];
    if solver == "interFoam" {
        c.push("setFields");
    }
    c.push(solver);
    c
}

/// `(variant, task id, script json)` for every checked-in script.
pub fn all_scripts() -> Vec<(&'static str, String, String)> {
    let mut out = Vec::new();
    for t in MODIFY {
        let path = fixtures().join("cases").join(t.case).join(t.file);
        let original = fs::read_to_string(&path).unwrap_or_else(|e| panic!("{}: {e}", path.display()));
        let edited = apply(&original, t.edits, t.id);
        let p = plan(t.solver, &modify_commands(t.solver));
        let oracle = vec![p.clone(), format!("Updated {}.\n\n{}", t.file, file_block(t.file, &edited))];
        let skip = vec![p, format!("Left {} as it was.\n\n{}", t.file, file_block(t.file, &original))];
        out.push(("table2-oracle", t.id.to_string(), to_json(&oracle)));
        out.push(("table2-skip", t.id.to_string(), to_json(&skip)));
    }
    for (id, solver, dir, set_fields, mesh) in GENERATE {
        let mut cmds = Vec::new();
        if !mesh {
            cmds.push("blockMesh");
        }
        if *set_fields {
            cmds.push("setFields");
        }
        cmds.push(solver);
        let root = fixtures().join("solutions").join(dir);
        let mut reply = String::from("Case files follow.\n\n");
        for entry in walkdir::WalkDir::new(&root).sort_by_file_name() {
            let entry = entry.unwrap();
            if !entry.file_type().is_file() {
                continue;
            }
            let rel = entry.path().strip_prefix(&root).unwrap().to_string_lossy().replace('\\', "/");
            reply.push_str(&file_block(&rel, &fs::read_to_string(entry.path()).unwrap()));
            reply.push('\n');
        }
        out.push(("table3-oracle", id.to_string(), to_json(&[plan(solver, &cmds), reply])));
    }
    out
}

fn to_json(responses: &[String]) -> String {
    let mut s = serde_json::to_string_pretty(responses).unwrap();
    s.push('\n');
    s
}

pub fn script_path(variant: &str, id: &str) -> PathBuf {
    scripts_dir().join(variant).join(format!("{id}.json"))
}
