import json

import numpy as np
import pytest

import semicoupling as sc
from semicoupling.config import load_config, load_problem

MINIMAL = {
    "schema": "semicoupling-problem-v1",
    "box": {"lo": [-1.0, -1.0], "hi": [1.0, 1.0]},
    "resolution": 16,
    "density": {"kind": "constant", "value": 1.0},
    "target": {"points": [[0.0, 0.0]], "masses": [0.5]},
    "cost": {"kind": "quadratic"},
}


def write(tmp_path, payload, name="problem.json"):
    path = tmp_path / name
    path.write_text(json.dumps(payload, indent=1))
    return str(path)


def test_minimal_problem_fills_defaults(tmp_path):
    prob = load_problem(write(tmp_path, MINIMAL))
    assert prob.tolerances.tol_mass == 1e-3
    assert prob.tolerances.tol_tie is None
    assert prob.source.resolution == (16, 16)
    assert prob.target.total_mass == 0.5


def test_abundance_rejected_at_load(tmp_path):
    bad = json.loads(json.dumps(MINIMAL))
    bad["target"]["masses"] = [5.0]
    with pytest.raises(sc.AbundanceError):
        load_problem(write(tmp_path, bad))


def test_unknown_key_names_key_and_line(tmp_path):
    bad = json.loads(json.dumps(MINIMAL))
    bad["betaa"] = 2.0
    path = write(tmp_path, bad)
    with pytest.raises(sc.SchemaError) as err:
        load_problem(path)
    assert err.value.key == "betaa"
    assert err.value.line is not None
    text = open(path).read()
    assert '"betaa"' in text.splitlines()[err.value.line - 1]


def test_unknown_nested_key(tmp_path):
    bad = json.loads(json.dumps(MINIMAL))
    bad["target"]["wieghts"] = [1.0]
    with pytest.raises(sc.SchemaError) as err:
        load_problem(write(tmp_path, bad))
    assert err.value.key == "wieghts"


def test_expression_density(tmp_path):
    prob_spec = json.loads(json.dumps(MINIMAL))
    prob_spec["density"] = {"kind": "expression", "expr": "1.0 + 0.5 * x0 * x0"}
    prob = load_problem(write(tmp_path, prob_spec))
    pts = prob.source.grid_points()
    expect = 1.0 + 0.5 * pts[:, 0] ** 2
    assert prob.source.density.ravel() == pytest.approx(expect)


def test_expression_rejects_unknown_names(tmp_path):
    bad = json.loads(json.dumps(MINIMAL))
    bad["density"] = {"kind": "expression", "expr": "__import__('os').getcwd()"}
    with pytest.raises(sc.SchemaError):
        load_problem(write(tmp_path, bad))


def test_invalid_json_reports_line(tmp_path):
    path = tmp_path / "broken.json"
    path.write_text('{\n "box": [1,\n}')
    with pytest.raises(sc.SchemaError) as err:
        load_problem(str(path))
    assert err.value.line is not None


def test_resolution_override(tmp_path):
    prob = load_problem(write(tmp_path, MINIMAL), resolution=32)
    assert prob.source.resolution == (32, 32)


def test_log_repulsive_auto_offset(tmp_path):
    spec = json.loads(json.dumps(MINIMAL))
    spec["cost"] = {"kind": "log-repulsive", "params": {"offset": "auto"}}
    prob = load_problem(write(tmp_path, spec))
    assert prob.cost.offset == pytest.approx(np.log(2 * np.sqrt(2)))


def run_config(tmp_path, **kwargs):
    payload = {
        "schema": "semicoupling-run-v1",
        "problem": "problem.json",
        "stages": ["solve"],
        "seed": 0,
    }
    payload.update(kwargs)
    write(tmp_path, MINIMAL)
    return write(tmp_path, payload, name="run.json")


def test_run_config_stage_prefix_enforced(tmp_path):
    path = run_config(tmp_path, stages=["solve", "uhs"])
    with pytest.raises(sc.SchemaError, match="prefix"):
        load_config(path)
    ok = load_config(run_config(tmp_path, stages=["solve", "strata"]))
    assert ok.stages == ["solve", "strata"]


def test_run_config_missing_problem(tmp_path):
    path = run_config(tmp_path, problem="nope.json")
    with pytest.raises(sc.SchemaError, match="not found"):
        load_config(path)


def test_run_config_overrides(tmp_path):
    path = run_config(tmp_path, solve={"tol_mass": 5e-3}, out_dir="zzz", seed=9)
    cfg = load_config(path)
    assert cfg.stage_options("solve") == {"tol_mass": 5e-3}
    assert cfg.out_dir == "zzz" and cfg.seed == 9
    cfg2 = load_config(path, out_dir="aaa", seed=1)
    assert cfg2.out_dir == "aaa" and cfg2.seed == 1
