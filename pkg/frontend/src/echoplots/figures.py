"""Deterministic figure rendering from engine CSVs, with a data sidecar.

Every render writes the image plus ``<image>.points.csv`` listing exactly the
points drawn, one row per (series, x, y). The sidecar is the contract: curves
are never smoothed, resampled, or reordered, so reading it back recovers the
input data verbatim.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path

import matplotlib
matplotlib.use("Agg")
import matplotlib.pyplot as plt
import numpy as np

from .io import (
    ECHO_COLUMNS,
    RESIDUAL_COLUMNS,
    SCALING_COLUMNS,
    meta_for_csv,
    read_table,
)

KINDS = ("echo_series", "scaling_collapse", "residuals")

ECHO_STYLES = (
    ("m11", "tab:blue", "local echo M11"),
    ("m_mb", "tab:red", "many-body echo M_MB"),
    ("m_x", "tab:green", "cross contribution M_X"),
)


@dataclass
class FigureSpec:
    kind: str
    inputs: list
    output: Path
    manifest: Path | None = None
    title: str = ""
    logy: bool = False
    xlabel: str = "t (units of 1/J0)"
    ylabel: str = ""
    style: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"unknown figure kind {self.kind!r}")
        if not self.inputs:
            raise ValueError("at least one input CSV required")
        self.inputs = [Path(p) for p in self.inputs]
        self.output = Path(self.output)


def _sidecar_path(output: Path) -> Path:
    return output.with_name(output.name + ".points.csv")


def _write_sidecar(path, points):
    with open(path, "w") as fh:
        fh.write("series,x,y\n")
        for series, x, y in points:
            fh.write("%s,%.12e,%.12e\n" % (series, x, y))


def overlay_curves(meta, t):
    """Short-time parabolas from manifest metadata, on the given time grid.

    Returns (name, t_window, values) triples for the three contributions:
    1 - sigma2 t^2, 1 - (N/4) sigma2 t^2 and ((N-4)/4) sigma2 t^2, each drawn
    on twice its validity window tau_sigma / N.
    """
    window = 2.0 * meta.tau_sigma / meta.n
    sel = t <= window
    ts = t[sel]
    return [
        ("overlay_m11", ts, 1.0 - meta.sigma2 * ts**2),
        ("overlay_m_mb", ts, 1.0 - (meta.n / 4.0) * meta.sigma2 * ts**2),
        ("overlay_m_x", ts, ((meta.n - 4) / 4.0) * meta.sigma2 * ts**2),
    ]


def _render_echo_series(spec, ax):
    points = []
    for path in spec.inputs:
        table = read_table(path, required=("t",))
        missing = [c for c in ECHO_COLUMNS if c not in table]
        if missing:
            # tolerate absent optional columns, but a bare file is suspicious
            pass
        t = table["t"]
        for column, color, label in ECHO_STYLES:
            if column not in table:
                continue
            vals = table[column]
            if len(vals) and np.all(np.isnan(vals)):
                continue
            ax.plot(t, vals, color=color, lw=1.2, label=label)
            err = table.get(column + "_stderr")
            if err is not None and len(err) and not np.all(np.isnan(err)) \
                    and np.any(err > 0):
                ax.fill_between(t, vals - err, vals + err, color=color, alpha=0.2)
            points.extend((column, x, y) for x, y in zip(t, vals))
        meta = meta_for_csv(spec.manifest, path)
        if meta is not None and len(t):
            for name, ts, ys in overlay_curves(meta, t):
                ax.plot(ts, ys, "k--", lw=0.9)
                points.extend((name, x, y) for x, y in zip(ts, ys))
    ax.set_ylabel(spec.ylabel or "echo amplitude")
    if points:
        ax.legend(loc="best", fontsize=8)
    return points


def _render_scaling_collapse(spec, ax):
    points = []
    markers = "osv^D<>p*"
    series = 0
    for path in spec.inputs:
        table = read_table(path, required=SCALING_COLUMNS)
        n_col = table["n"].astype(int)
        j_col = table["j_sigma"].astype(float)
        keys = sorted(set(zip(n_col.tolist(), j_col.tolist())))
        for n, j in keys:
            sel = (n_col == n) & (j_col == j) & (table["valid"].astype(float) > 0)
            # no comma: the label becomes the sidecar's series column
            label = f"N={n} J={j:g}"
            ax.plot(table["t"][sel], table["f"][sel],
                    marker=markers[series % len(markers)], ms=3.5, lw=0.8,
                    label=label)
            points.extend(
                (label, x, y) for x, y in zip(table["t"][sel], table["f"][sel])
            )
            series += 1
    ax.axhline(0.25, color="gray", lw=0.6, ls=":")
    ax.set_ylabel(spec.ylabel or "f(t) = eta / N")
    if series:
        ax.legend(loc="best", fontsize=7, ncol=2)
    return points


def _render_residuals(spec, ax):
    points = []
    idx = 0
    for path in spec.inputs:
        table = read_table(path, required=RESIDUAL_COLUMNS)
        for k in range(len(table["residual"])):
            label = str(table["identity"][k])
            if "alpha" in table:
                label += f" (alpha={float(table['alpha'][k]):g})"
            y = float(table["residual"][k])
            ax.bar(idx, max(y, 1e-20), color="tab:blue")
            ax.text(idx, 1.5e-20, label, rotation=90, fontsize=6,
                    ha="center", va="bottom")
            points.append(("residual", float(idx), y))
            idx += 1
    ax.set_yscale("log")
    ax.set_ylabel(spec.ylabel or "brute force vs closed form residual")
    ax.set_xlabel("identity")
    return points


def render(spec: FigureSpec) -> Path:
    """Draw one figure and its sidecar; returns the image path."""
    fig, ax = plt.subplots(figsize=(6.0, 4.0), dpi=150)
    if spec.kind == "echo_series":
        points = _render_echo_series(spec, ax)
    elif spec.kind == "scaling_collapse":
        points = _render_scaling_collapse(spec, ax)
    else:
        points = _render_residuals(spec, ax)
    if spec.kind != "residuals":
        ax.set_xlabel(spec.xlabel)
    if spec.logy:
        ax.set_yscale("log")
    if spec.title:
        ax.set_title(spec.title)
    fig.tight_layout()
    fig.savefig(spec.output)
    plt.close(fig)
    _write_sidecar(_sidecar_path(spec.output), points)
    return spec.output
