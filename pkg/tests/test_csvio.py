import numpy as np
import pytest

from semicoupling.csvio import body_sha256, read_csv, read_csv_arrays, write_csv


def test_roundtrip_full_precision(tmp_path):
    path = tmp_path / "vals.csv"
    vals = [1 / 3, 2e-17, 123456.789012345678, -0.1]
    rows = [[i, v, "tag"] for i, v in enumerate(vals)]
    n = write_csv(path, "semicoupling/test-v1", ["idx", "value", "name"], rows, "0.1.0")
    assert n == 4
    meta, arrays = read_csv_arrays(path, expect_schema="semicoupling/test-v1")
    assert meta["tool"] == "semicoupling-0.1.0"
    assert arrays["value"].tolist() == vals  # 17 significant digits are lossless
    assert arrays["name"].tolist() == ["tag"] * 4


def test_schema_mismatch_names_versions(tmp_path):
    path = tmp_path / "vals.csv"
    write_csv(path, "semicoupling/test-v1", ["a"], [[1.0]], "0.1.0")
    with pytest.raises(ValueError) as err:
        read_csv(path, expect_schema="semicoupling/test-v2")
    assert "test-v2" in str(err.value) and "test-v1" in str(err.value)


def test_body_hash_ignores_header(tmp_path):
    p1, p2 = tmp_path / "a.csv", tmp_path / "b.csv"
    write_csv(p1, "semicoupling/test-v1", ["a"], [[0.5]], "0.1.0")
    write_csv(p2, "semicoupling/test-v1", ["a"], [[0.5]], "9.9.9")
    assert body_sha256(p1) == body_sha256(p2)


def test_separator_in_field_rejected(tmp_path):
    with pytest.raises(ValueError, match="separator"):
        write_csv(tmp_path / "bad.csv", "s", ["a"], [["x,y"]], "0.1.0")
