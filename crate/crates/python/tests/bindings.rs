use std::ffi::CString;

use pyo3::prelude::*;
use pyo3::types::PyModule;

fn with_module(body: &str) {
    Python::attach(|py| {
        let m = PyModule::new(py, "pyfoamgpt").unwrap();
        pyfoamgpt::pyfoamgpt(&m).unwrap();
        let globals = pyo3::types::PyDict::new(py);
        globals.set_item("fg", m).unwrap();
        globals.set_item("FIXTURES", concat!(env!("CARGO_MANIFEST_DIR"), "/../core/fixtures")).unwrap();
        let code = CString::new(body).unwrap();
        if let Err(e) = py.run(&code, Some(&globals), None) {
            e.print(py);
            panic!("python snippet failed");
        }
    });
}

#[test]
fn foam_file_round_trip() {
    with_module(
        r#"
u = fg.FoamFile.read(FIXTURES + "/cases/cavity/0/U")
assert u.object == "U"
v = u.set("boundaryField/movingWall/value", "uniform (2 0 0)")
assert v.get("boundaryField/movingWall/value") == "uniform (2 0 0)"
assert fg.FoamFile.parse(v.dumps(banner=False)) == v
"#,
    );
}

#[test]
fn case_validation_and_cost() {
    with_module(
        r#"
c = fg.Case.load(FIXTURES + "/taxonomy/smoother_negative")
fatal = [x for x in c.validate("icoFoam") if x["severity"] == "fatal"]
assert [x["rule_id"] for x in fatal] == ["R3"], fatal
assert "smoother" in fatal[0]["message"]
assert fg.compute_cost("gpt-4o", 1000000, 1000000) == 12500000
try:
    fg.compute_cost("nobody", 1, 1)
    raise AssertionError("expected KeyError")
except KeyError:
    pass
"#,
    );
}
