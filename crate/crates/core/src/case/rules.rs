use regex::Regex;

use super::registry::{turbulence_models, RequirementSet, CONSTRAINT_PATCH_TYPES};
use super::{CaseTree, Severity, Violation};
use crate::foam::{Dict, FoamFile, FoamValue};

/// Registered rule ids and their descriptions.
pub const RULES: &[(&str, &str)] = &[
    ("R1", "patch constraint types match in every field"),
    ("R2", "solver file requirements"),
    ("R3", "dictionary keyword requirements"),
    ("R4", "controlDict sanity"),
    ("R5", "turbulence model registry"),
    ("P1", "dictionary kept as raw bytes after a parse failure"),
    ("H1", "header object differs from file name"),
];

/// Runs every rule; Fatal violations come first.
pub fn validate_case(case: &CaseTree, reqs: &RequirementSet) -> Vec<Violation> {
    let mut out = Vec::new();
    check_patches(case, &mut out);
    check_files(case, reqs, &mut out);
    check_keywords(case, reqs, &mut out);
    check_control(case, reqs, &mut out);
    check_turbulence(case, &mut out);
    out.extend(case.warnings.iter().cloned());
    check_headers(case, &mut out);
    out.sort_by_key(|v| v.severity == Severity::Warning);
    out
}

struct Patch {
    name: String,
    kind: String,
    groups: Vec<String>,
}

fn patch_from_dict(name: &str, d: &Dict) -> Patch {
    let groups = match d.get("inGroups") {
        Some(FoamValue::List(l)) => l.items.iter().filter_map(|i| i.as_word().map(str::to_string)).collect(),
        _ => Vec::new(),
    };
    Patch { name: name.to_string(), kind: d.word("type").unwrap_or("patch").to_string(), groups }
}

/// Patches from `constant/polyMesh/boundary`, or from the `boundary`
/// section of `system/blockMeshDict` before the mesh exists.
fn patches(case: &CaseTree) -> Vec<Patch> {
    if let Some(b) = case.foam("constant/polyMesh/boundary") {
        return b
            .body
            .bare_values()
            .filter_map(|v| match v {
                FoamValue::List(l) => Some(l.items.iter()),
                _ => None,
            })
            .flatten()
            .filter_map(|i| match i {
                FoamValue::Keyed { name, dict } => Some(patch_from_dict(name, dict)),
                _ => None,
            })
            .collect();
    }
    let Some(bm) = case.foam("system/blockMeshDict") else { return Vec::new() };
    let mut out = Vec::new();
    match bm.body.get("boundary").or_else(|| bm.body.get("patches")) {
        Some(FoamValue::List(l)) => {
            for item in &l.items {
                if let FoamValue::Keyed { name, dict } = item {
                    out.push(patch_from_dict(name, dict));
                }
            }
            // legacy form: `patches ( wall movingWall ( faces ) ... )`
            if out.is_empty() {
                for chunk in l.items.chunks(3) {
                    if let [kind, name, _] = chunk {
                        if let (Some(k), Some(n)) = (kind.as_word(), name.as_word()) {
                            out.push(Patch { name: n.into(), kind: k.into(), groups: Vec::new() });
                        }
                    }
                }
            }
        }
        _ => {}
    }
    if let Some(FoamValue::Dict(d)) = bm.body.get("defaultPatch") {
        let name = d.word("name").unwrap_or("defaultFaces");
        let kind = d.word("type").unwrap_or("empty");
        out.push(Patch { name: name.into(), kind: kind.into(), groups: Vec::new() });
    }
    out
}

/// Compiles a quoted dictionary key as an anchored regex.
fn key_regex(key: &str) -> Option<Regex> {
    let inner = key.strip_prefix('"')?.strip_suffix('"')?;
    Regex::new(&format!("^(?:{inner})$")).ok()
}

/// The entry of `dict` that applies to `name`: an exact key, else the last
/// matching regex key.
fn resolve<'d>(dict: &'d Dict, name: &str) -> Option<&'d FoamValue> {
    if let Some(v) = dict.get(name) {
        return Some(v);
    }
    dict.iter()
        .filter(|(k, _)| key_regex(k).is_some_and(|re| re.is_match(name)))
        .map(|(_, v)| v)
        .last()
}

fn resolve_patch<'d>(bf: &'d Dict, patch: &Patch) -> Option<&'d FoamValue> {
    if let Some(v) = bf.get(&patch.name) {
        return Some(v);
    }
    if let Some(v) = resolve(bf, &patch.name) {
        return Some(v);
    }
    patch.groups.iter().find_map(|g| resolve(bf, g))
}

fn check_patches(case: &CaseTree, out: &mut Vec<Violation>) {
    let patches = patches(case);
    if patches.is_empty() {
        return;
    }
    for (path, entry) in case.iter() {
        let is_field = path.strip_prefix("0/").is_some_and(|rest| !rest.contains('/'));
        let Some(file) = entry.as_foam().filter(|_| is_field) else { continue };
        let Some(FoamValue::Dict(bf)) = file.body.get("boundaryField") else { continue };
        let field = file.object().unwrap_or(&path[2..]);
        let constraints_included = bf.raw_entries().any(|r| r.contains("setConstraintTypes"));
        for patch in &patches {
            let constraint_patch = CONSTRAINT_PATCH_TYPES.contains(&patch.kind.as_str());
            let Some(bc) = resolve_patch(bf, patch).and_then(FoamValue::as_dict) else {
                if !(constraint_patch && constraints_included) {
                    out.push(Violation::fatal(
                        "R1",
                        path,
                        format!("Cannot find patchField entry for {} in field {field}", patch.name),
                    ));
                }
                continue;
            };
            let Some(bc_type) = bc.word("type") else {
                if !bc.keys().any(|k| k.starts_with('$')) && bc.raw_entries().next().is_none() {
                    out.push(Violation::fatal(
                        "R1",
                        path,
                        format!("keyword type is undefined for patch {} of field {field}", patch.name),
                    ));
                }
                continue;
            };
            if constraint_patch && bc_type != patch.kind {
                out.push(Violation::fatal(
                    "R1",
                    path,
                    format!(
                        "inconsistent patch and patchField types for patch {} of field {field}: \
                         patch type {} and patchField type {bc_type}",
                        patch.name, patch.kind
                    ),
                ));
            } else if CONSTRAINT_PATCH_TYPES.contains(&bc_type) && bc_type != patch.kind {
                out.push(Violation::fatal(
                    "R1",
                    path,
                    format!(
                        "patch type '{}' not constraint type '{bc_type}' for patch {} of field {field}",
                        patch.kind, patch.name
                    ),
                ));
            }
        }
    }
}

fn check_files(case: &CaseTree, reqs: &RequirementSet, out: &mut Vec<Violation>) {
    for f in &reqs.required_files {
        if !case.contains(f) {
            out.push(Violation::fatal("R2", f, format!("cannot find file \"{f}\" required by {}", reqs.solver)));
        }
    }
}

fn has_keyword(file: &FoamFile, keypath: &str) -> bool {
    crate::foam::get_entry(file, keypath).is_ok()
}

/// A linear-solver block with `$name` references expanded from siblings.
fn expand_block(solvers: &Dict, block: &Dict, depth: usize) -> Dict {
    let mut merged = Dict::new();
    for e in &block.entries {
        match e {
            crate::foam::DictEntry::Entry(k, FoamValue::Seq(items)) if k.starts_with('$') && items.is_empty() => {
                let name = &k[1..];
                if depth < 8 {
                    if let Some(FoamValue::Dict(parent)) = resolve(solvers, name) {
                        for pe in expand_block(solvers, parent, depth + 1).entries {
                            if let crate::foam::DictEntry::Entry(pk, pv) = pe {
                                merged.insert(pk, pv);
                            }
                        }
                    }
                }
            }
            crate::foam::DictEntry::Entry(k, v) => merged.insert(k.clone(), v.clone()),
            _ => {}
        }
    }
    merged
}

fn check_keywords(case: &CaseTree, reqs: &RequirementSet, out: &mut Vec<Violation>) {
    for (path, keypath) in &reqs.required_keywords {
        let Some(file) = case.foam(path) else { continue };
        if !has_keyword(file, keypath) {
            let last = keypath.rsplit('/').next().unwrap_or(keypath);
            out.push(Violation::fatal("R3", path, format!("keyword {last} is undefined in dictionary \"{path}\"")));
        }
    }
    let Some(fv) = case.foam("system/fvSolution") else { return };
    let Some(FoamValue::Dict(solvers)) = fv.body.get("solvers") else { return };
    for (name, value) in solvers.iter() {
        let Some(block) = value.as_dict() else { continue };
        let block = expand_block(solvers, block, 0);
        let Some(solver) = block.word("solver") else { continue };
        let needs_smoother = matches!(solver, "GAMG" | "smoothSolver");
        if needs_smoother && block.get("smoother").is_none() {
            out.push(Violation::fatal(
                "R3",
                "system/fvSolution",
                format!("keyword smoother is undefined in dictionary \"system/fvSolution/solvers/{name}\""),
            ));
        }
    }
}

fn check_control(case: &CaseTree, reqs: &RequirementSet, out: &mut Vec<Violation>) {
    let path = "system/controlDict";
    let Some(cd) = case.foam(path) else { return };
    for key in ["application", "startTime", "endTime", "deltaT"] {
        if cd.body.get(key).is_none() {
            out.push(Violation::fatal("R4", path, format!("keyword {key} is undefined in dictionary \"{path}\"")));
        }
    }
    let num = |k: &str| cd.body.get(k).and_then(|v| v.last_token().as_f64());
    if let (Some(start), Some(end)) = (num("startTime"), num("endTime")) {
        if end <= start {
            out.push(Violation::fatal("R4", path, format!("endTime {end} is not after startTime {start}")));
        }
    }
    if let Some(app) = cd.body.word("application") {
        if !reqs.heuristic && app != reqs.solver {
            out.push(Violation::warning(
                "R4",
                path,
                format!("application {app} differs from the requested solver {}", reqs.solver),
            ));
        }
    }
}

fn check_turbulence(case: &CaseTree, out: &mut Vec<Violation>) {
    for (path, entry) in case.iter() {
        let Some(base) = path.strip_prefix("constant/") else { continue };
        if !(base == "turbulenceProperties" || base.starts_with("turbulenceProperties.")) {
            continue;
        }
        let Some(file) = entry.as_foam() else { continue };
        let Some(sim) = file.body.word("simulationType") else {
            out.push(Violation::fatal("R5", path, format!("keyword simulationType is undefined in dictionary \"{path}\"")));
            continue;
        };
        let Some(models) = turbulence_models(sim) else {
            out.push(Violation::fatal(
                "R5",
                path,
                format!("Unknown simulationType {sim}, valid types are laminar, RAS, LES"),
            ));
            continue;
        };
        if sim == "laminar" {
            continue;
        }
        let sub = file.body.get(sim).and_then(FoamValue::as_dict);
        let model = sub.and_then(|d| d.word(&format!("{sim}Model")).or_else(|| d.word("model")));
        match model {
            None => out.push(Violation::fatal(
                "R5",
                path,
                format!("keyword {sim}Model is undefined in dictionary \"{path}/{sim}\""),
            )),
            Some(m) if !models.contains(&m) => out.push(Violation::fatal(
                "R5",
                path,
                format!("Unknown {sim}Model type {m} for simulationType {sim}"),
            )),
            Some(_) => {}
        }
    }
}

fn check_headers(case: &CaseTree, out: &mut Vec<Violation>) {
    for (path, entry) in case.iter() {
        let Some(file) = entry.as_foam() else { continue };
        let base = path.rsplit('/').next().unwrap_or(path);
        let base = base.strip_suffix(".orig").unwrap_or(base);
        if let Some(obj) = file.object() {
            if obj != base {
                out.push(Violation::warning("H1", path, format!("header object {obj} differs from file name {base}")));
            }
        }
    }
}
