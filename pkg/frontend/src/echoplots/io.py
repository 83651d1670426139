"""CSV and manifest readers for the rendering tool.

The renderer only consumes the engine's documented text artifacts: echo
series CSVs, combined scaling CSVs, identity residual CSVs, and the INI run
manifest whose [run_*] sections carry the per-run metadata (n, j_sigma,
sigma2, ...) needed for overlay curves.
"""

from __future__ import annotations

import configparser
from dataclasses import dataclass
from pathlib import Path

import numpy as np


class SchemaError(ValueError):
    """An input file does not carry the columns a figure kind requires."""


ECHO_COLUMNS = ("t", "m11", "m11_stderr", "m_mb", "m_mb_stderr", "m_x", "m_x_stderr")
SCALING_COLUMNS = ("n", "j_sigma", "t", "eta", "f", "valid")
RESIDUAL_COLUMNS = ("identity", "computed", "expected", "residual")


def read_table(path, required):
    """A CSV as a dict of float columns; empty files give zero-length columns.

    Raises SchemaError naming the first missing required column.
    """
    path = Path(path)
    with open(path) as fh:
        header = fh.readline().strip()
    names = [c.strip() for c in header.split(",")] if header else []
    for col in required:
        if col not in names:
            raise SchemaError(f"{path.name}: missing column {col!r}")
    data = np.genfromtxt(path, delimiter=",", names=True, dtype=None,
                         encoding=None)
    data = np.atleast_1d(data)
    out = {}
    for name in names:
        col = data[name] if data.size else np.zeros(0)
        out[name] = np.atleast_1d(col)
    return out


@dataclass
class RunMeta:
    """Overlay metadata for one engine run, keyed by its CSV file name."""

    tag: str
    n: int
    j_sigma: float
    sigma2: float
    sigma0_2: float
    tau_sigma: float
    csv: str


def read_manifest(path):
    """All [run_*] sections of a run manifest, keyed by csv file name."""
    parser = configparser.ConfigParser()
    read = parser.read(path)
    if not read:
        raise FileNotFoundError(f"cannot read manifest {path}")
    runs = {}
    for section in parser.sections():
        if not section.startswith("run_"):
            continue
        get = lambda key: parser.get(section, key)
        meta = RunMeta(
            tag=section[len("run_"):],
            n=parser.getint(section, "n"),
            j_sigma=parser.getfloat(section, "j_sigma"),
            sigma2=parser.getfloat(section, "sigma2"),
            sigma0_2=parser.getfloat(section, "sigma0_2"),
            tau_sigma=parser.getfloat(section, "tau_sigma"),
            csv=get("csv"),
        )
        runs[meta.csv] = meta
    return runs


def meta_for_csv(manifest_path, csv_path):
    """The manifest run entry matching one echo CSV, or None."""
    if manifest_path is None:
        return None
    runs = read_manifest(manifest_path)
    return runs.get(Path(csv_path).name)
