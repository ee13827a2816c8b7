"""Deterministic CSV export: fixed column orders, 17-significant-digit floats.

The first line is a comment carrying the schema name and tool version; the
body below it is byte-identical across reruns with identical inputs.
"""

import hashlib

import numpy as np

FLOAT_FMT = "%.17g"


def _format(value):
    if isinstance(value, (bool, np.bool_)):
        return "1" if value else "0"
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    if isinstance(value, (float, np.floating)):
        return FLOAT_FMT % float(value)
    text = str(value)
    if "," in text or "\n" in text:
        raise ValueError(f"CSV field may not contain separators: {text!r}")
    return text


def write_csv(path, schema, columns, rows, tool_version):
    """Write rows (iterable of sequences) under a versioned header."""
    lines = [f"# schema={schema} tool=semicoupling-{tool_version}"]
    lines.append(",".join(columns))
    for row in rows:
        if len(row) != len(columns):
            raise ValueError("row width does not match the column count")
        lines.append(",".join(_format(v) for v in row))
    data = "\n".join(lines) + "\n"
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(data)
    return len(lines) - 2


def read_csv(path, expect_schema=None):
    """Read a versioned CSV into (meta, columns, list-of-string rows)."""
    with open(path, "r", encoding="utf-8") as fh:
        header = fh.readline().strip()
        if not header.startswith("# "):
            raise ValueError(f"{path}: missing schema header line")
        meta = dict(item.split("=", 1) for item in header[2:].split() if "=" in item)
        if expect_schema is not None and meta.get("schema") != expect_schema:
            raise ValueError(
                f"{path}: schema mismatch, expected {expect_schema!r}, "
                f"found {meta.get('schema')!r}"
            )
        columns = fh.readline().strip().split(",")
        rows = [line.rstrip("\n").split(",") for line in fh if line.strip()]
    return meta, columns, rows


def read_csv_arrays(path, expect_schema=None):
    """Read a versioned CSV into a dict of float arrays (non-numeric as str)."""
    meta, columns, rows = read_csv(path, expect_schema)
    out = {}
    for k, name in enumerate(columns):
        col = [r[k] for r in rows]
        try:
            out[name] = np.asarray(col, dtype=float)
        except ValueError:
            out[name] = np.asarray(col)
    return meta, out


def body_sha256(path):
    """Hash of everything after the header comment line."""
    with open(path, "rb") as fh:
        data = fh.read()
    cut = data.find(b"\n")
    return hashlib.sha256(data[cut + 1 :]).hexdigest()
