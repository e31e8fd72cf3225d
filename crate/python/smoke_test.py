"""Smoke test for the Python bindings.

Build and install first:

    pip install maturin
    maturin develop --release -m crates/py/Cargo.toml
"""

import json
import math
import pathlib

import pars_reduce_py as pr


def check(cond, what):
    print(("ok   " if cond else "FAIL ") + what)
    if not cond:
        raise SystemExit(1)


def check_schemas(model_text, report_text):
    try:
        import jsonschema
        from referencing import Registry, Resource
    except ImportError:
        print("skip schema validation (jsonschema not installed)")
        return
    docs = pathlib.Path(__file__).resolve().parent.parent / "docs"
    model_schema = json.loads((docs / "model.schema.json").read_text())
    report_schema = json.loads((docs / "report.schema.json").read_text())
    registry = Registry().with_resource("model.schema.json", Resource.from_contents(model_schema))
    jsonschema.validate(json.loads(model_text), model_schema)
    jsonschema.Draft202012Validator(report_schema, registry=registry).validate(json.loads(report_text))
    check(True, "model and report match the shipped schemas")


def main():
    g = pr.ParamSystem.catalog("illustrative_discrete")
    check((g.n, g.m, g.o, g.p, g.discrete) == (2, 1, 1, 2, True), repr(g))

    again = pr.ParamSystem.from_json(g.to_json())
    check(again.to_json() == g.to_json(), "model JSON round trip")

    a, b, c, d = g.evaluate([1.0, -1.0])
    check(a == [[0.5, 0.1], [0.3, -0.5]], "evaluate at a vertex")
    check(g.hinf_norm([0.0, 0.0]) > 0.0, "nominal H-inf norm")

    err, argmax = pr.sampled_error(g, g, 5)
    check(err <= 1e-9 and len(argmax) == 2, "self distance vanishes")

    published = pr.ParamSystem.catalog("illustrative_gramian_n1")
    err, _ = pr.sampled_error(g, published)
    check(abs(err - 0.27) <= 0.02, f"published one-state model error {err:.4f}")

    report = json.loads(pr.baseline(g, 2, 1))
    bound = report["baseline"]["bound"]
    sampled = report["sampledError"]["maxError"]
    check(abs(bound - 0.62) <= 0.05 and sampled <= bound, f"baseline bound {bound:.4f}, error {sampled:.4f}")

    config = {
        "nPrime": 2,
        "pPrime": 2,
        "degrees": {"a": 1, "b": 0, "c": 0, "d": 0, "p": 0, "q0": 2, "q": [0, 0]},
        "gamma": {"mode": "fixed", "value": 0.05},
        "gridPerDim": 5,
    }
    text = pr.reduce(g, json.dumps(config))
    reduced = pr.reduced_model(text)
    gamma = json.loads(text)["certifiedGamma"]
    err, _ = pr.sampled_error(g, reduced, 5)
    check(math.isfinite(gamma) and err <= gamma + 1e-6, f"identity reduction certified {gamma:.2e}")

    check_schemas(g.to_json(), text)

    try:
        pr.ParamSystem.from_json("{}")
    except ValueError:
        check(True, "malformed model raises ValueError")
    else:
        check(False, "malformed model raises ValueError")


if __name__ == "__main__":
    main()
