use pyo3::prelude::*;
use pyo3::types::PyDict;

use pars_reduce_py::pars_reduce_py;

fn with_module(code: &str) {
    pyo3::append_to_inittab!(pars_reduce_py);
    Python::initialize();
    Python::attach(|py| {
        let globals = PyDict::new(py);
        globals.set_item("pr", py.import("pars_reduce_py").unwrap()).unwrap();
        let code = std::ffi::CString::new(code).unwrap();
        if let Err(e) = py.run(&code, Some(&globals), None) {
            e.print(py);
            panic!("python snippet failed");
        }
    });
}

#[test]
fn bindings_from_python() {
    with_module(
        r#"
g = pr.ParamSystem.catalog("illustrative_discrete")
assert (g.n, g.m, g.o, g.p, g.discrete) == (2, 1, 1, 2, True), repr(g)
assert pr.ParamSystem.from_json(g.to_json()).to_json() == g.to_json()
a, b, c, d = g.evaluate([1.0, -1.0])
assert a == [[0.5, 0.1], [0.3, -0.5]], a
err, argmax = pr.sampled_error(g, pr.ParamSystem.catalog("illustrative_gramian_n1"))
assert abs(err - 0.27) <= 0.02, err
assert "illustrative_discrete" in pr.CATALOG
try:
    pr.ParamSystem.from_json("{}")
    raise AssertionError("accepted an empty model")
except ValueError:
    pass
try:
    pr.ParamSystem.catalog("nope")
    raise AssertionError("accepted an unknown name")
except ValueError:
    pass
"#,
    );
}
