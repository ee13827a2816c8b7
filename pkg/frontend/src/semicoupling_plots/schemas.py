"""Readers for the documented semicoupling run-directory file formats.

This package consumes the CSV/JSON files only; it never imports the solver
package. Every file carries a schema name that must match exactly.
"""

import json
import os

import numpy as np

STRATA_SCHEMA = "semicoupling/strata-v1"
TRAJ_SCHEMA = "semicoupling/trajectories-v1"
OMEGA_SCHEMA = "semicoupling/omega-v1"
UHS_SCHEMA = "semicoupling/uhs-samples-v1"
SOLUTION_SCHEMA = "semicoupling/solution-v1"


class SchemaVersionError(ValueError):
    def __init__(self, path, expected, found):
        super().__init__(
            f"{path}: schema version mismatch, expected {expected!r}, found {found!r}"
        )
        self.expected = expected
        self.found = found


def read_versioned_csv(path, expected_schema):
    """Parse a versioned CSV into (meta, {column: array})."""
    with open(path, "r", encoding="utf-8") as fh:
        header = fh.readline().strip()
        if not header.startswith("# "):
            raise SchemaVersionError(path, expected_schema, None)
        meta = dict(item.split("=", 1) for item in header[2:].split() if "=" in item)
        if meta.get("schema") != expected_schema:
            raise SchemaVersionError(path, expected_schema, meta.get("schema"))
        columns = fh.readline().strip().split(",")
        rows = [line.rstrip("\n").split(",") for line in fh if line.strip()]
    out = {}
    for k, name in enumerate(columns):
        col = [r[k] for r in rows]
        try:
            out[name] = np.asarray(col, dtype=float)
        except ValueError:
            out[name] = np.asarray(col)
    return meta, out


def read_report(path, expected_schema):
    with open(path, "r", encoding="utf-8") as fh:
        data = json.load(fh)
    if data.get("schema") != expected_schema:
        raise SchemaVersionError(path, expected_schema, data.get("schema"))
    return data


def load_strata(run_dir):
    """Strata rows reshaped onto their grid.

    Returns (extent, grid_shape, points, active, cardinality, rank) with
    extent = (x0_lo, x0_hi, x1_lo, x1_hi) of the box.
    """
    _, cols = read_versioned_csv(os.path.join(run_dir, "strata.csv"), STRATA_SCHEMA)
    x0, x1 = cols["x0"], cols["x1"]
    u0, u1 = np.unique(x0), np.unique(x1)
    n0, n1 = u0.size, u1.size
    if n0 * n1 != x0.size:
        raise ValueError("strata.csv rows do not form a full grid")
    h0 = u0[1] - u0[0] if n0 > 1 else 1.0
    h1 = u1[1] - u1[0] if n1 > 1 else 1.0
    extent = (u0[0] - h0 / 2, u0[-1] + h0 / 2, u1[0] - h1 / 2, u1[-1] + h1 / 2)
    pts = np.stack([x0, x1], axis=1)
    return (extent, (n0, n1), pts, cols["active"].astype(bool),
            cols["cardinality"].astype(int), cols["rank"].astype(int))


def load_trajectories(run_dir):
    """Trajectories grouped by seed id: list of (t, points, u_min) arrays."""
    _, cols = read_versioned_csv(os.path.join(run_dir, "trajectories.csv"), TRAJ_SCHEMA)
    ids = cols["seed_id"].astype(int)
    coords = np.stack([cols["x0"], cols["x1"]], axis=1)
    out = []
    for sid in np.unique(ids):
        rows = ids == sid
        out.append((cols["t"][rows], coords[rows], cols["u_min"][rows]))
    return out


def load_omega(run_dir):
    _, cols = read_versioned_csv(os.path.join(run_dir, "omega.csv"), OMEGA_SCHEMA)
    seeds = np.stack([cols["x0"], cols["x1"]], axis=1)
    return seeds, cols["omega"], cols["terminated_by"]


def load_uhs(run_dir):
    _, cols = read_versioned_csv(os.path.join(run_dir, "uhs_samples.csv"), UHS_SCHEMA)
    pts = np.stack([cols["x0"], cols["x1"]], axis=1)
    return pts, cols["hull_distance"], cols["passed"].astype(bool)
