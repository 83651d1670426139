"""Finite-size scaling of the echo: exponent eta(N, t) and collapse f(t).

The extensive-decay hypothesis reads M_MB ~ (M11)^(N f(t)) with f(0+) = 1/4.
Each run contributes eta = log(M_MB) / log(M11) and f = eta / N, valid only
while both echoes sit strictly between their saturation plateaus and 1.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .echo import EchoSeries

SCALING_CSV_COLUMNS = ("n", "j_sigma", "t", "eta", "f", "valid")


@dataclass
class ScalingTable:
    n: int
    j_sigma: float
    t: np.ndarray
    eta: np.ndarray
    f: np.ndarray
    valid: np.ndarray
    meta: dict = field(default_factory=dict)

    def to_csv(self, path):
        with open(path, "w") as fh:
            fh.write(",".join(SCALING_CSV_COLUMNS) + "\n")
            for t, eta, f, v in zip(self.t, self.eta, self.f, self.valid):
                fh.write(
                    "%d,%.12e,%.12e,%.12e,%.12e,%d\n"
                    % (self.n, self.j_sigma, t, eta, f, int(v))
                )

    @classmethod
    def from_csv(cls, path):
        data = np.atleast_1d(np.genfromtxt(path, delimiter=",", names=True))
        return cls(
            n=int(data["n"][0]),
            j_sigma=float(data["j_sigma"][0]),
            t=np.asarray(data["t"], dtype=float),
            eta=np.asarray(data["eta"], dtype=float),
            f=np.asarray(data["f"], dtype=float),
            valid=np.asarray(data["valid"]).astype(bool),
        )


def mmb_scrambling_floor(n: int) -> float:
    """Plateau scale of the subset-averaged revival probability.

    Magnetization conservation confines each basis state to its sector, so
    even perfect in-sector scrambling leaves the average of |<b|U|b>|^2 at
    sum_m weight_m / dim_m = (N+1) 2^-N; the plateau cannot drop below this.
    """
    return (n + 1) * 2.0 ** (-n)


def saturation_bands(n: int):
    """Validity floors: m11 above 1.5 * (2/N), m_mb above 3x its plateau scale."""
    return 3.0 / n, 3.0 * mmb_scrambling_floor(n)


def eta_f(series: EchoSeries, n: int, j_sigma: float) -> ScalingTable:
    """Exponent table eta = log(m_mb)/log(m11), f = eta/n, with validity flags."""
    if series.m11 is None or series.m_mb is None:
        raise ValueError("series must carry both m11 and m_mb")
    t = np.asarray(series.t)
    m11 = np.asarray(series.m11, dtype=float)
    m_mb = np.asarray(series.m_mb, dtype=float)
    m11_floor, mmb_floor = saturation_bands(n)
    valid = (
        (m11 > m11_floor)
        & (m11 < 1.0)
        & (m_mb > mmb_floor)
        & (m_mb < 1.0)
    )
    # for stochastic estimators the log ratio is meaningless while the decay
    # is still buried in the sampling noise
    for vals, err in ((m11, series.m11_stderr), (m_mb, series.m_mb_stderr)):
        if err is not None:
            valid &= (1.0 - vals) > 5.0 * np.asarray(err, dtype=float)
    eta = np.full(len(t), np.nan)
    with np.errstate(divide="ignore", invalid="ignore"):
        eta[valid] = np.log(m_mb[valid]) / np.log(m11[valid])
    return ScalingTable(
        n=n,
        j_sigma=j_sigma,
        t=t,
        eta=eta,
        f=eta / n,
        valid=valid,
        meta={"m11_floor": m11_floor, "m_mb_floor": mmb_floor},
    )


def write_scaling_tables(path, tables) -> None:
    """Concatenate several runs into one scaling CSV."""
    with open(path, "w") as fh:
        fh.write(",".join(SCALING_CSV_COLUMNS) + "\n")
        for tab in tables:
            for t, eta, f, v in zip(tab.t, tab.eta, tab.f, tab.valid):
                fh.write(
                    "%d,%.12e,%.12e,%.12e,%.12e,%d\n"
                    % (tab.n, tab.j_sigma, t, eta, f, int(v))
                )


def read_scaling_tables(path):
    """Inverse of write_scaling_tables: one ScalingTable per (n, j_sigma)."""
    data = np.atleast_1d(np.genfromtxt(path, delimiter=",", names=True))
    keys = sorted(set(zip(data["n"].astype(int), map(float, data["j_sigma"]))))
    tables = []
    for n, js in keys:
        sel = (data["n"].astype(int) == n) & (data["j_sigma"] == js)
        tables.append(
            ScalingTable(
                n=n,
                j_sigma=js,
                t=np.asarray(data["t"][sel], dtype=float),
                eta=np.asarray(data["eta"][sel], dtype=float),
                f=np.asarray(data["f"][sel], dtype=float),
                valid=np.asarray(data["valid"][sel]).astype(bool),
            )
        )
    return tables


@dataclass
class CollapseReport:
    t: np.ndarray            # common pre-saturation time grid
    spread: np.ndarray       # per-time relative spread of f across tables
    max_spread: float
    departure_times: dict    # (n, j_sigma) -> first saturated time (inf if none)
    empty: bool = False


def departure_time(table: ScalingTable) -> float:
    """Earliest time at which a table leaves its valid (pre-saturation) window."""
    started = False
    for t, v in zip(table.t, table.valid):
        if v:
            started = True
        elif started:
            return float(t)
    return float("inf")


def collapse_check(tables) -> CollapseReport:
    """Relative spread of f(t) across runs on their common valid window."""
    tables = list(tables)
    if len(tables) < 2:
        raise ValueError("need at least two tables to compare")
    t_lo = max(t.t[t.valid].min() for t in tables if np.any(t.valid))
    t_hi = min(
        min(departure_time(t), t.t[t.valid].max()) for t in tables if np.any(t.valid)
    )
    base = tables[0].t
    common = base[(base >= t_lo) & (base <= t_hi)]
    if len(common) == 0:
        return CollapseReport(
            t=np.zeros(0), spread=np.zeros(0), max_spread=np.nan,
            departure_times={(t.n, t.j_sigma): departure_time(t) for t in tables},
            empty=True,
        )
    curves = []
    for tab in tables:
        sel = tab.valid
        curves.append(np.interp(common, tab.t[sel], tab.f[sel]))
    stack = np.array(curves)
    mean = stack.mean(axis=0)
    spread = (stack.max(axis=0) - stack.min(axis=0)) / np.abs(mean)
    return CollapseReport(
        t=common,
        spread=spread,
        max_spread=float(spread.max()),
        departure_times={(t.n, t.j_sigma): departure_time(t) for t in tables},
    )


@dataclass
class DecayTime:
    t3: float | None
    convention: str = "1/e-of-contrast"


def decay_time(series: EchoSeries, quantity: str = "m11") -> DecayTime:
    """Operational decay time: first crossing of M_inf + (1 - M_inf)/e.

    M_inf is the time average over the final quarter of the grid; crossings
    are located by linear interpolation.  This is an artifact convention, not
    a quantity the underlying theory defines.
    """
    vals = getattr(series, quantity)
    if vals is None:
        raise ValueError(f"series has no {quantity} values")
    t = np.asarray(series.t)
    m = np.asarray(vals, dtype=float)
    tail = t >= t[0] + 0.75 * (t[-1] - t[0])
    m_inf = float(m[tail].mean())
    if 1.0 - m_inf < 1e-12:
        return DecayTime(t3=None)  # no contrast, nothing ever decayed
    target = m_inf + (1.0 - m_inf) / np.e
    below = m <= target
    if not np.any(below):
        return DecayTime(t3=None)
    k = int(np.argmax(below))
    if k == 0:
        return DecayTime(t3=float(t[0]))
    # linear interpolation between the bracketing grid points
    t3 = t[k - 1] + (t[k] - t[k - 1]) * (m[k - 1] - target) / (m[k - 1] - m[k])
    return DecayTime(t3=float(t3))
