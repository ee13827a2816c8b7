"""Problem and run configuration files.

Both are JSON with fixed field names; the documented schemas live in
docs/problem_schema.md and docs/output_schemas.md. Validation rejects
unknown keys, naming the key and, when it can be found in the raw text,
its line number.
"""

import json
import math

import numpy as np

from .costs import LogRepulsiveCost, QuadraticCost
from .errors import SchemaError
from .measures import SourceMeasure, TargetMeasure
from .problem import Problem, Tolerances

PROBLEM_SCHEMA = "semicoupling-problem-v1"
RUN_SCHEMA = "semicoupling-run-v1"
STAGES = ("solve", "strata", "uhs", "flow")

_TOLERANCE_KEYS = ("tol_mass", "tol_tie", "tol_rank", "tol_twist",
                   "eps_stop", "eps_uhs", "max_flow_time", "ode_rel_err")

# key -> allowed child keys (None: scalar/list leaf)
_PROBLEM_KEYS = {
    "schema": None,
    "box": {"lo": None, "hi": None},
    "resolution": None,
    "density": {"kind": None, "value": None, "expr": None},
    "target": {"points": None, "masses": None, "quad_weights": None},
    "cost": {"kind": None, "params": {"offset": None}},
    "tolerances": {k: None for k in _TOLERANCE_KEYS},
}

_RUN_KEYS = {
    "schema": None,
    "problem": None,
    "stages": None,
    "out_dir": None,
    "seed": None,
    "solve": {"tol_mass": None, "max_iters": None, "resolution": None},
    "strata": {"audit_resolutions": None},
    "uhs": {"region": None, "stratum": None, "samples": None, "beta": None},
    "flow": {"mode": None, "stratum": None, "seeds": None, "seed_count": None,
             "beta": None, "eps_stop": None, "force": None},
}

# restricted namespace for density expressions
_EXPR_NS = {
    "pi": math.pi, "e": math.e,
    "sin": np.sin, "cos": np.cos, "tan": np.tan, "exp": np.exp,
    "log": np.log, "sqrt": np.sqrt, "abs": np.abs, "tanh": np.tanh,
    "minimum": np.minimum, "maximum": np.maximum, "where": np.where,
}


def find_key_line(text, key):
    """1-based line of the first occurrence of a quoted key, or None."""
    needle = f'"{key}"'
    for lineno, line in enumerate(text.splitlines(), start=1):
        if needle in line:
            return lineno
    return None


def _check_keys(obj, allowed, text, path=""):
    if not isinstance(obj, dict):
        raise SchemaError(f"expected an object at {path or 'top level'}")
    for key, value in obj.items():
        if key not in allowed:
            raise SchemaError(
                f"unknown key at {path or 'top level'}",
                key=key, line=find_key_line(text, key),
            )
        child = allowed[key]
        if isinstance(child, dict) and isinstance(value, dict):
            _check_keys(value, child, text, path=f"{path}{key}.")


def _require(obj, key, text, path=""):
    if key not in obj:
        raise SchemaError(f"missing required key at {path or 'top level'}", key=key)
    return obj[key]


def _load_json(path):
    with open(path, "r", encoding="utf-8") as fh:
        text = fh.read()
    try:
        return json.loads(text), text
    except json.JSONDecodeError as exc:
        raise SchemaError(f"{path}: invalid JSON: {exc.msg}", line=exc.lineno) from exc


def density_function(spec, dim):
    kind = spec.get("kind")
    if kind == "constant":
        value = float(spec.get("value", 1.0))
        return lambda pts: np.full(pts.shape[0], value)
    if kind == "expression":
        expr = spec.get("expr")
        if not isinstance(expr, str):
            raise SchemaError("density expression must be a string", key="expr")
        code = compile(expr, "<density>", "eval")
        for name in code.co_names:
            if name not in _EXPR_NS and not (name.startswith("x") and name[1:].isdigit()):
                raise SchemaError(f"name {name!r} not allowed in density expression",
                                  key="expr")

        def fn(pts):
            ns = dict(_EXPR_NS)
            for k in range(dim):
                ns[f"x{k}"] = pts[:, k]
            vals = eval(code, {"__builtins__": {}}, ns)
            return np.broadcast_to(np.asarray(vals, dtype=float), (pts.shape[0],))

        return fn
    raise SchemaError(f"unknown density kind {kind!r}", key="kind")


def build_cost(spec, box_lo, box_hi):
    kind = _require(spec, "kind", "")
    params = spec.get("params", {})
    if kind == "quadratic":
        return QuadraticCost()
    if kind in ("log-repulsive", "log_repulsive"):
        offset = params.get("offset", "auto")
        if offset == "auto":
            diam = float(np.linalg.norm(np.asarray(box_hi) - np.asarray(box_lo)))
            offset = math.log(diam)
        return LogRepulsiveCost(offset=float(offset))
    raise SchemaError(f"unknown cost kind {kind!r}", key="kind")


def tolerances_from(spec):
    if not spec:
        return Tolerances()
    kwargs = {k: spec[k] for k in _TOLERANCE_KEYS if k in spec}
    return Tolerances(**kwargs)


def load_problem(path, resolution=None):
    """Parse, validate, and build a Problem from a problem file.

    ``resolution`` overrides the file's grid. Abundance is checked at load
    time by the Problem constructor.
    """
    data, text = _load_json(path)
    _check_keys(data, _PROBLEM_KEYS, text)
    if data.get("schema", PROBLEM_SCHEMA) != PROBLEM_SCHEMA:
        raise SchemaError(
            f"expected schema {PROBLEM_SCHEMA!r}, found {data.get('schema')!r}",
            key="schema", line=find_key_line(text, "schema"),
        )
    box = _require(data, "box", text)
    lo = np.asarray(_require(box, "lo", text, "box."), dtype=float)
    hi = np.asarray(_require(box, "hi", text, "box."), dtype=float)
    res = resolution if resolution is not None else _require(data, "resolution", text)
    dens_spec = _require(data, "density", text)
    tgt = _require(data, "target", text)
    points = np.asarray(_require(tgt, "points", text, "target."), dtype=float)
    masses = np.asarray(_require(tgt, "masses", text, "target."), dtype=float)
    qw = tgt.get("quad_weights")

    from .measures import make_source

    source = make_source((lo, hi), res, density_function(dens_spec, lo.size))
    target = TargetMeasure(points, masses, None if qw is None else np.asarray(qw, float))
    cost = build_cost(_require(data, "cost", text), lo, hi)
    tol = tolerances_from(data.get("tolerances", {}))
    return Problem(source, target, cost, tol)


class RunConfig:
    """Validated pipeline configuration."""

    def __init__(self, problem_path, stages, out_dir, seed, overrides):
        self.problem_path = problem_path
        self.stages = list(stages)
        self.out_dir = out_dir
        self.seed = int(seed)
        self.overrides = overrides

    def stage_options(self, stage):
        return dict(self.overrides.get(stage, {}))


def load_config(path, out_dir=None, seed=None):
    """Parse and validate a run configuration file.

    The stage list must be a prefix of [solve, strata, uhs, flow]; later
    stages read the files written by earlier ones.
    """
    import os

    data, text = _load_json(path)
    _check_keys(data, _RUN_KEYS, text)
    if data.get("schema", RUN_SCHEMA) != RUN_SCHEMA:
        raise SchemaError(
            f"expected schema {RUN_SCHEMA!r}, found {data.get('schema')!r}",
            key="schema", line=find_key_line(text, "schema"),
        )
    problem_path = _require(data, "problem", text)
    if not os.path.isabs(problem_path):
        problem_path = os.path.join(os.path.dirname(os.path.abspath(path)), problem_path)
    if not os.path.exists(problem_path):
        raise SchemaError(f"problem file not found: {problem_path}", key="problem",
                          line=find_key_line(text, "problem"))
    stages = data.get("stages", list(STAGES))
    if tuple(stages) != STAGES[: len(stages)] or not stages:
        raise SchemaError(
            f"stages must be a nonempty prefix of {list(STAGES)}",
            key="stages", line=find_key_line(text, "stages"),
        )
    overrides = {s: data.get(s, {}) for s in STAGES}
    return RunConfig(
        problem_path=problem_path,
        stages=stages,
        out_dir=out_dir or data.get("out_dir", "run_out"),
        seed=seed if seed is not None else data.get("seed", 0),
        overrides=overrides,
    )
