use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

pub const CONSTRAINT_PATCH_TYPES: &[&str] =
    &["empty", "symmetry", "symmetryPlane", "wedge", "cyclic", "cyclicAMI", "processor"];

pub const RAS_MODELS: &[&str] = &[
    "kEpsilon",
    "RNGkEpsilon",
    "realizableKE",
    "LaunderSharmaKE",
    "buoyantKEpsilon",
    "kOmega",
    "kOmega2006",
    "kOmegaSST",
    "kOmegaSSTSAS",
    "kOmegaSSTLM",
    "kkLOmega",
    "v2f",
    "LienCubicKE",
    "ShihQuadraticKE",
    "LienLeschziner",
    "LamBremhorstKE",
    "qZeta",
    "LRR",
    "SSG",
    "SpalartAllmaras",
];

pub const LES_MODELS: &[&str] = &[
    "Smagorinsky",
    "WALE",
    "kEqn",
    "dynamicKEqn",
    "dynamicLagrangian",
    "DeardorffDiffStress",
    "SpalartAllmarasDES",
    "SpalartAllmarasDDES",
    "SpalartAllmarasIDDES",
    "kOmegaSSTDES",
];

/// Models accepted for a `simulationType`; `None` for unknown types.
pub fn turbulence_models(simulation_type: &str) -> Option<&'static [&'static str]> {
    match simulation_type {
        "RAS" => Some(RAS_MODELS),
        "LES" => Some(LES_MODELS),
        "laminar" => Some(&[]),
        _ => None,
    }
}

/// Files and keywords a solver needs before it can start.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RequirementSet {
    pub solver: String,
    pub required_files: BTreeSet<String>,
    /// `(file, keyword path)` pairs.
    pub required_keywords: Vec<(String, String)>,
    /// Set when the solver is not in the registry and a default was used.
    pub heuristic: bool,
}

const SYSTEM_TRIO: &[&str] = &["system/controlDict", "system/fvSchemes", "system/fvSolution"];
const SCHEME_SECTIONS: &[&str] = &["ddtSchemes", "gradSchemes", "divSchemes", "laplacianSchemes"];

fn solver_entry(solver: &str) -> Option<(&'static [&'static str], Option<&'static str>)> {
    let e: (&[&str], Option<&str>) = match solver {
        "icoFoam" => (&["0/U", "0/p", "constant/transportProperties"], Some("PISO")),
        "pisoFoam" => (
            &["0/U", "0/p", "constant/transportProperties", "constant/turbulenceProperties"],
            Some("PISO"),
        ),
        "simpleFoam" => (
            &["0/U", "0/p", "constant/transportProperties", "constant/turbulenceProperties"],
            Some("SIMPLE"),
        ),
        "pimpleFoam" => (
            &["0/U", "0/p", "constant/transportProperties", "constant/turbulenceProperties"],
            Some("PIMPLE"),
        ),
        "buoyantBoussinesqSimpleFoam" => (
            &[
                "0/U",
                "0/p",
                "0/p_rgh",
                "0/T",
                "constant/transportProperties",
                "constant/g",
                "constant/turbulenceProperties",
            ],
            Some("SIMPLE"),
        ),
        "interFoam" => (
            &[
                "0/U",
                "0/p_rgh",
                "0/alpha.water",
                "constant/transportProperties",
                "constant/g",
                "constant/turbulenceProperties",
                "system/setFieldsDict",
            ],
            Some("PIMPLE"),
        ),
        "MPPICFoam" => (
            &[
                "0/U.air",
                "0/p",
                "constant/transportProperties",
                "constant/kinematicCloudProperties",
                "constant/g",
                "constant/turbulenceProperties.air",
            ],
            Some("PIMPLE"),
        ),
        _ => return None,
    };
    Some(e)
}

/// Registry lookup; unknown solvers get the system files plus `0/U` and
/// `0/p` with `heuristic` set.
pub fn required_artifacts(solver: &str) -> RequirementSet {
    let (files, algorithm, heuristic): (&[&str], Option<&str>, bool) = match solver_entry(solver) {
        Some((files, algo)) => (files, algo, false),
        None => (&["0/U", "0/p"], None, true),
    };
    let mut required_files: BTreeSet<String> = SYSTEM_TRIO.iter().map(|s| s.to_string()).collect();
    required_files.extend(files.iter().map(|s| s.to_string()));

    let mut required_keywords = vec![("system/fvSolution".to_string(), "solvers".to_string())];
    if let Some(a) = algorithm {
        required_keywords.push(("system/fvSolution".into(), a.into()));
    }
    for s in SCHEME_SECTIONS {
        required_keywords.push(("system/fvSchemes".into(), s.to_string()));
    }
    RequirementSet { solver: solver.to_string(), required_files, required_keywords, heuristic }
}
