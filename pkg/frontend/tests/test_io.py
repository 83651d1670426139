import numpy as np
import pytest

from echoplots.io import SchemaError, meta_for_csv, read_manifest, read_table

ECHO_HEADER = "t,m11,m11_stderr,m_mb,m_mb_stderr,m_x,m_x_stderr\n"

MANIFEST = """\
[task]
kind = echo

[manifest]
config_sha256 = abc
spinecho_version = 0.1.0

[run_n06_js0.1]
n = 6
j_sigma = 0.1
sigma2 = 0.005
sigma0_2 = 0.5
tau_sigma = 14.142135623730951
csv = tiny_n06_js0.1_echo.csv
"""


def test_read_table_roundtrip(tmp_path):
    path = tmp_path / "echo.csv"
    path.write_text(
        ECHO_HEADER
        + "0.000000000000e+00,1,0,1,0,0,0\n"
        + "1.000000000000e+00,0.9,0.01,0.8,0.02,0.1,0.022\n"
    )
    table = read_table(path, required=("t", "m11"))
    assert np.allclose(table["t"], [0.0, 1.0])
    assert np.allclose(table["m_x"], [0.0, 0.1])


def test_read_table_missing_column(tmp_path):
    path = tmp_path / "bad.csv"
    path.write_text("t,m11\n0,1\n")
    with pytest.raises(SchemaError, match="m_mb"):
        read_table(path, required=("t", "m_mb"))


def test_read_table_empty_but_valid(tmp_path):
    path = tmp_path / "empty.csv"
    path.write_text(ECHO_HEADER)
    table = read_table(path, required=("t",))
    assert len(table["t"]) == 0


def test_read_manifest_runs(tmp_path):
    path = tmp_path / "manifest.ini"
    path.write_text(MANIFEST)
    runs = read_manifest(path)
    assert set(runs) == {"tiny_n06_js0.1_echo.csv"}
    meta = runs["tiny_n06_js0.1_echo.csv"]
    assert meta.n == 6
    assert meta.sigma2 == 0.005
    assert meta.tag == "n06_js0.1"


def test_meta_for_csv_matches_by_name(tmp_path):
    path = tmp_path / "manifest.ini"
    path.write_text(MANIFEST)
    meta = meta_for_csv(path, tmp_path / "sub" / "tiny_n06_js0.1_echo.csv")
    assert meta is not None and meta.n == 6
    assert meta_for_csv(path, "other.csv") is None
    assert meta_for_csv(None, "other.csv") is None


def test_read_manifest_missing_file(tmp_path):
    with pytest.raises(FileNotFoundError):
        read_manifest(tmp_path / "nope.ini")
