"""Pipeline orchestration: solve -> strata -> uhs -> flow, file-coupled.

Stages communicate only via the files they write under the output
directory, so any consumer (tests, the plotting frontend) can replay a
stage from disk. Outputs are deterministic given identical config and
seed; CSV bodies are byte-identical across reruns.
"""

import hashlib
import json
import os
import time

import numpy as np

from . import __version__
from .config import RunConfig, load_problem
from .csvio import body_sha256, read_csv_arrays, write_csv
from .dual import Potential, solve_dual
from .errors import StageError
from .fields import FieldSpec
from .flows import CellularField, OffDomainField, retract_region
from .singularity import dimension_audit, local_tie_gap, stratify, subdifferential
from .uhs import sample_region, uhs_check

SOLUTION_SCHEMA = "semicoupling/solution-v1"
STRATA_SCHEMA = "semicoupling/strata-v1"
UHS_SCHEMA = "semicoupling/uhs-samples-v1"
TRAJ_SCHEMA = "semicoupling/trajectories-v1"
OMEGA_SCHEMA = "semicoupling/omega-v1"
SEEDS_SCHEMA = "semicoupling/seeds-v1"
MANIFEST_SCHEMA = "semicoupling/manifest-v1"


def _write_report(path, payload):
    payload = dict(payload)
    payload.setdefault("tool", f"semicoupling-{__version__}")
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(payload, fh, indent=1, sort_keys=True)
        fh.write("\n")


def _read_report(path):
    with open(path, "r", encoding="utf-8") as fh:
        return json.load(fh)


def _coord_columns(dim):
    return [f"x{k}" for k in range(dim)]


def load_solution(out_dir):
    data = _read_report(os.path.join(out_dir, "solution.json"))
    if data.get("schema") != SOLUTION_SCHEMA:
        raise ValueError(
            f"solution.json schema mismatch: expected {SOLUTION_SCHEMA!r}, "
            f"found {data.get('schema')!r}"
        )
    return data


def stage_solve(problem, out_dir, tol_mass=None, max_iters=500):
    tol = problem.tolerances.replace(tol_mass=tol_mass)
    sol = solve_dual(problem, tol, max_iters=max_iters)
    report = {
        "schema": SOLUTION_SCHEMA,
        "psi": sol.potential.psi.tolist(),
        "cell_masses": sol.cell_masses.tolist(),
        "residual": sol.residual,
        "dual_value": sol.dual_value,
        "primal_value": sol.primal_value,
        "gap": sol.gap,
        "iterations": sol.iterations,
        "active_mass": sol.active_mass,
        "resolution": list(problem.source.resolution),
        "iteration_log": [
            {"iter": i, "dual": v, "residual": r, "step": s}
            for i, v, r, s in sol.iteration_log
        ],
    }
    _write_report(os.path.join(out_dir, "solution.json"), report)
    return {"solution.json": {"rows": len(report["psi"])}}, sol


def stage_strata(problem, out_dir, audit_resolutions=(128, 256, 512)):
    sol = load_solution(out_dir)
    potential = Potential(np.asarray(sol["psi"]))
    field = stratify(problem, potential)
    rows = zip(
        *(field.points[:, k] for k in range(problem.dim)),
        field.active.astype(int), field.cardinality, field.rank,
    )
    columns = _coord_columns(problem.dim) + ["active", "cardinality", "rank"]
    n = write_csv(os.path.join(out_dir, "strata.csv"), STRATA_SCHEMA, columns,
                  rows, __version__)
    audit = dimension_audit(problem, potential, resolutions=audit_resolutions)
    report = {
        "schema": "semicoupling/strata-report-v1",
        "counts": {str(j): c for j, c in field.counts().items()},
        "dimension_audit": audit,
    }
    _write_report(os.path.join(out_dir, "strata_report.json"), report)
    return {"strata.csv": {"rows": n}, "strata_report.json": {"rows": 1}}, field


def stage_uhs(problem, out_dir, rng, region="offdomain", stratum=None,
              samples=200, beta=None):
    sol = load_solution(out_dir)
    potential = Potential(np.asarray(sol["psi"]))
    pts = sample_region(problem, potential, region, samples, rng, stratum=stratum)
    if pts.shape[0] == 0:
        raise ValueError(f"region {region!r} has no grid cells to sample")
    mode = "off_domain" if region == "offdomain" else "cellular"
    spec = FieldSpec(mode, beta, stratum if mode == "cellular" else None)
    report = uhs_check(problem, potential, pts, spec)
    columns = _coord_columns(problem.dim) + [
        "eta_norm", "mean_integrand_norm", "ratio", "hull_distance", "passed"]
    rows = zip(
        *(report.samples[:, k] for k in range(problem.dim)),
        report.eta_norm, report.mean_integrand, report.ratio,
        report.hull_dist, report.passed_mask.astype(int),
    )
    n = write_csv(os.path.join(out_dir, "uhs_samples.csv"), UHS_SCHEMA, columns,
                  rows, __version__)
    _write_report(os.path.join(out_dir, "uhs_report.json"),
                  {"schema": "semicoupling/uhs-report-v1", **report.as_dict()})
    return {"uhs_samples.csv": {"rows": n}, "uhs_report.json": {"rows": 1}}, report


def _grid_seeds(problem, potential, mode, stratum, count, rng):
    if mode == "offdomain":
        return sample_region(problem, potential, "offdomain", count, rng)
    return sample_region(problem, potential, "stratum", count, rng, stratum=stratum)


def _load_seeds(path, dim):
    _, arrays = read_csv_arrays(path, expect_schema=SEEDS_SCHEMA)
    return np.stack([arrays[c] for c in _coord_columns(dim)], axis=1)


def stage_flow(problem, out_dir, rng, mode="offdomain", stratum=None,
               seeds="grid", seed_count=100, beta=None, eps_stop=None,
               force=False):
    sol = load_solution(out_dir)
    potential = Potential(np.asarray(sol["psi"]))
    tol = problem.tolerances.replace(eps_stop=eps_stop)

    uhs_path = os.path.join(out_dir, "uhs_report.json")
    if os.path.exists(uhs_path):
        uhs_result = _read_report(uhs_path)
        if not uhs_result.get("passed", True) and not force:
            raise ValueError(
                "UHS check failed on the region; rerun with force to integrate anyway"
            )

    if isinstance(seeds, str) and seeds != "grid":
        seed_pts = _load_seeds(seeds, problem.dim)
    elif isinstance(seeds, str):
        seed_pts = _grid_seeds(problem, potential, mode, stratum, seed_count, rng)
    else:
        seed_pts = np.atleast_2d(np.asarray(seeds, dtype=float))
    if seed_pts.shape[0] == 0:
        raise ValueError("no seeds available for the requested region")

    if mode == "offdomain":
        shared = OffDomainField(problem, potential, beta=beta)
        factory = lambda seed: shared
    elif mode == "cellular":
        def factory(seed):
            tie = tol.tol_tie
            if tie is None:
                tie = float(local_tie_gap(problem, potential.psi, seed[None, :])[0])
            sub = subdifferential(problem, potential, seed, tie)
            return CellularField(problem, potential, sub.indices, beta=beta,
                                 tolerances=tol)
    else:
        raise ValueError(f"unknown flow mode {mode!r}")

    result = retract_region(factory, seed_pts, tol)

    traj_cols = ["seed_id", "t"] + _coord_columns(problem.dim) + ["u_min"]
    traj_rows = []
    for i, tr in enumerate(result.trajectories):
        for k in range(tr.n_samples):
            traj_rows.append(
                [i, tr.times[k], *tr.points[k], tr.u_min[k]])
    n_traj = write_csv(os.path.join(out_dir, "trajectories.csv"), TRAJ_SCHEMA,
                       traj_cols, traj_rows, __version__)

    omega_cols = ["seed_id"] + _coord_columns(problem.dim) + ["omega", "terminated_by"]
    omega_rows = [
        [i, *tr.seed, tr.omega, tr.terminated_by]
        for i, tr in enumerate(result.trajectories)
    ]
    n_om = write_csv(os.path.join(out_dir, "omega.csv"), OMEGA_SCHEMA,
                     omega_cols, omega_rows, __version__)

    report = {
        "schema": "semicoupling/flow-report-v1",
        "mode": mode,
        "n_seeds": int(seed_pts.shape[0]),
        "n_pole_reached": int(sum(t == "pole_reached" for t in result.terminations)),
        "failures": [int(i) for i in result.failures],
        "failure_seeds": [result.trajectories[i].seed.tolist() for i in result.failures],
        "neighbor_modulus": result.neighbor_modulus(),
    }
    _write_report(os.path.join(out_dir, "flow_report.json"), report)
    files = {
        "trajectories.csv": {"rows": n_traj},
        "omega.csv": {"rows": n_om},
        "flow_report.json": {"rows": 1},
    }
    return files, result


def _input_hash(config: RunConfig):
    h = hashlib.sha256()
    with open(config.problem_path, "rb") as fh:
        h.update(fh.read())
    h.update(json.dumps(config.overrides, sort_keys=True).encode())
    h.update(str(config.seed).encode())
    h.update(",".join(config.stages).encode())
    return h.hexdigest()


def run_pipeline(config: RunConfig):
    """Run the configured stage prefix; returns the manifest dict.

    A stage failure writes a partial manifest naming the failed stage and
    raises StageError.
    """
    os.makedirs(config.out_dir, exist_ok=True)
    manifest = {
        "schema": MANIFEST_SCHEMA,
        "input_hash": _input_hash(config),
        "seed": config.seed,
        "stages": [],
    }
    solve_opts = config.stage_options("solve")
    problem = load_problem(config.problem_path,
                           resolution=solve_opts.pop("resolution", None))

    runners = {
        "solve": lambda rng: stage_solve(problem, config.out_dir, **solve_opts),
        "strata": lambda rng: stage_strata(
            problem, config.out_dir,
            **{k: tuple(v) if k == "audit_resolutions" else v
               for k, v in config.stage_options("strata").items()}),
        "uhs": lambda rng: stage_uhs(problem, config.out_dir, rng,
                                     **config.stage_options("uhs")),
        "flow": lambda rng: stage_flow(problem, config.out_dir, rng,
                                       **config.stage_options("flow")),
    }

    for k, stage in enumerate(config.stages):
        rng = np.random.default_rng(config.seed + 1000 * k)
        started = time.perf_counter()
        try:
            files, _ = runners[stage](rng)
        except Exception as exc:
            manifest["failed_stage"] = stage
            _finalize_manifest(manifest, config.out_dir)
            raise StageError(stage, str(exc)) from exc
        wall = time.perf_counter() - started
        for fname, meta in files.items():
            meta["body_sha256"] = _file_hash(os.path.join(config.out_dir, fname))
        manifest["stages"].append({"name": stage, "files": files, "wall_s": wall})
    _finalize_manifest(manifest, config.out_dir)
    return manifest


def _file_hash(path):
    if path.endswith(".csv"):
        return body_sha256(path)
    with open(path, "rb") as fh:
        return hashlib.sha256(fh.read()).hexdigest()


def _finalize_manifest(manifest, out_dir):
    _write_report(os.path.join(out_dir, "manifest.json"), manifest)
