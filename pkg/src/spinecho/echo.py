"""The Loschmidt-echo protocol and its observables M11, M_MB, M_X.

The echo operator is U_LE(t) = U_-(t/2) U_+(t/2) with U_+ generated by
H0 + Sigma and U_- by -H0 + Sigma; all series are reported against the total
time t = 2 t_R.

Two estimator families are provided for the local echo M11: the exhaustive
trace over the subset A of basis states with the first spin up (exact up to
propagation error, affordable for n <= 12), and the random-phase pure-state
estimator, one evolution per seed.  The many-body echo M_MB averages the
squared diagonal return amplitude |<beta|U_LE|beta>|^2 over A, either
exhaustively (n <= 14) or over a sample of basis states.

Exhaustive modes run on cached per-sector eigendecompositions of the two
generators; tracked single states run on the matrix-free Krylov propagator
with one incrementally advanced running vector per evolution leg.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .basis import (
    FullSpace,
    enumerate_sector,
    first_up_mask,
    popcount,
    s1z_diagonal,
)
from .errors import CapacityError
from .hamiltonians import ModelSpec, StateVector, echo_generator
from .propagator import DENSE_DIM_CAP, PropagationConfig, evolve

M11_EXACT_MAX_SITES = 12
MMB_EXACT_MAX_SITES = 14

CSV_COLUMNS = ("t", "m11", "m11_stderr", "m_mb", "m_mb_stderr", "m_x", "m_x_stderr")


@dataclass
class EchoProtocol:
    spec: ModelSpec
    cfg: PropagationConfig
    t_grid: np.ndarray

    def __post_init__(self):
        self.t_grid = np.asarray(self.t_grid, dtype=float)
        if len(self.t_grid) == 0:
            raise ValueError("empty time grid")
        if self.t_grid[0] != 0.0:
            raise ValueError("time grid must start at 0")
        if np.any(np.diff(self.t_grid) <= 0):
            raise ValueError("time grid must be strictly increasing")


@dataclass
class EchoSeries:
    """Echo observables on a time grid; absent quantities stay None."""

    t: np.ndarray
    m11: np.ndarray | None = None
    m11_stderr: np.ndarray | None = None
    m_mb: np.ndarray | None = None
    m_mb_stderr: np.ndarray | None = None
    m_x: np.ndarray | None = None
    m_x_stderr: np.ndarray | None = None
    meta: dict = field(default_factory=dict)

    def column(self, name):
        val = getattr(self, name)
        if val is None:
            return np.full(len(self.t), np.nan)
        return np.asarray(val, dtype=float)

    def to_csv(self, path):
        cols = [np.asarray(self.t, dtype=float)] + [
            self.column(c) for c in CSV_COLUMNS[1:]
        ]
        with open(path, "w") as fh:
            fh.write(",".join(CSV_COLUMNS) + "\n")
            for row in zip(*cols):
                fh.write(",".join("%.12e" % v for v in row) + "\n")

    @classmethod
    def from_csv(cls, path):
        data = np.genfromtxt(path, delimiter=",", names=True)
        data = np.atleast_1d(data)

        def col(name):
            v = np.asarray(data[name], dtype=float)
            return None if np.all(np.isnan(v)) else v

        return cls(
            t=np.asarray(data["t"], dtype=float),
            m11=col("m11"),
            m11_stderr=col("m11_stderr"),
            m_mb=col("m_mb"),
            m_mb_stderr=col("m_mb_stderr"),
            m_x=col("m_x"),
            m_x_stderr=col("m_x_stderr"),
        )


def random_phase_state(n: int, seed: int) -> StateVector:
    """Equal-modulus random-phase superposition over A (first spin up)."""
    space = FullSpace(n)
    rng = np.random.default_rng(seed)
    phases = rng.uniform(0.0, 2.0 * np.pi, 1 << (n - 1))
    amps = np.zeros(space.dim, dtype=np.complex128)
    idx_a = (np.arange(1 << (n - 1), dtype=np.int64) << 1) | 1
    amps[idx_a] = np.exp(1j * phases) / math.sqrt(1 << (n - 1))
    return StateVector(amps, space)


def _apply_fn(spec, space, sign_h0, sign_sigma):
    op = echo_generator(spec, sign_h0, sign_sigma)
    return lambda x: op.apply(x, space)


def u_le_apply(protocol: EchoProtocol, sv: StateVector, t: float) -> StateVector:
    """U_-(t/2) U_+(t/2) |psi> with the protocol's propagation settings."""
    if t == 0.0:
        return sv.copy()
    spec, cfg = protocol.spec, protocol.cfg
    if cfg.method == "dense_oracle" or (
        cfg.method == "auto" and sv.space.dim <= DENSE_DIM_CAP
    ):
        fwd = _sector_eigs(spec, sv.space)
        return StateVector(fwd.ule_apply(sv.data, t), sv.space)
    half = _apply_fn(spec, sv.space, +1, +1)
    back = _apply_fn(spec, sv.space, -1, +1)
    out = evolve(half, sv.data, 0.5 * t, cfg)
    out = evolve(back, out, 0.5 * t, cfg)
    return StateVector(out, sv.space)


class _EchoEigs:
    """Eigendecompositions of both echo generators on one space block."""

    def __init__(self, spec, space):
        hp = echo_generator(spec, +1, +1).dense(space)
        hm = echo_generator(spec, -1, +1).dense(space)
        self.wp, self.vp = np.linalg.eigh(hp)
        self.wm, self.vm = np.linalg.eigh(hm)
        self.mix = self.vm.T @ self.vp  # generators are real symmetric

    def ule_columns(self, t: float, cols: np.ndarray) -> np.ndarray:
        """Columns U_LE(t)[:, cols]."""
        pp = np.exp(-0.5j * t * self.wp)
        pm = np.exp(-0.5j * t * self.wm)
        x = (self.mix * pp[None, :]) @ self.vp[cols, :].T
        return (self.vm * pm[None, :]) @ x

    def ule_apply(self, psi: np.ndarray, t: float) -> np.ndarray:
        pp = np.exp(-0.5j * t * self.wp)
        pm = np.exp(-0.5j * t * self.wm)
        return (self.vm * pm[None, :]) @ (self.mix @ (pp * (self.vp.T @ psi)))


_EIG_CACHE: dict = {}


def _sector_eigs(spec: ModelSpec, space) -> _EchoEigs:
    key = (spec, space.key())
    if key not in _EIG_CACHE:
        if space.dim > DENSE_DIM_CAP:
            raise CapacityError(
                f"sector dimension {space.dim} exceeds dense cap {DENSE_DIM_CAP}"
            )
        _EIG_CACHE[key] = _EchoEigs(spec, space)
    return _EIG_CACHE[key]


def _exact_sector_sweep(protocol: EchoProtocol, want_m11: bool, want_mmb: bool):
    """Exhaustive per-sector dense sweep over the time grid.

    Returns (m11, m_mb) arrays; entries stay 0 for quantities not requested.
    Both observables share the same U_LE columns, so asking for both costs
    the same as asking for one.
    """
    spec, grid = protocol.spec, protocol.t_grid
    n = spec.n
    m11 = np.zeros(len(grid))
    m_mb = np.zeros(len(grid))
    weight = 1.0 / (1 << (n - 1))
    for n_up in range(1, n + 1):
        sec = enumerate_sector(n, n_up)
        a_pos = np.nonzero(first_up_mask(sec.states))[0]
        if len(a_pos) == 0:
            continue
        eigs = _sector_eigs(spec, sec)
        s1 = s1z_diagonal(sec.states)
        for k, t in enumerate(grid):
            if t == 0.0:
                m11[k] += weight * len(a_pos)
                m_mb[k] += weight * len(a_pos)
                continue
            u_cols = eigs.ule_columns(t, a_pos)
            prob = np.abs(u_cols) ** 2
            if want_mmb:
                m_mb[k] += weight * float(np.sum(prob[a_pos, np.arange(len(a_pos))]))
            if want_m11:
                m11[k] += weight * 2.0 * float(s1 @ prob.sum(axis=1))
    return m11, m_mb


def _unit_sector_state(spec: ModelSpec, bits: int):
    sec = enumerate_sector(spec.n, int(popcount(bits)))
    vec = np.zeros(sec.dim, dtype=np.complex128)
    vec[sec.rank(bits)] = 1.0
    return sec, vec


def _mmb_state_trace(protocol: EchoProtocol, bits: int) -> np.ndarray:
    """|<beta|U_LE(t)|beta>|^2 along the grid, two running Krylov legs."""
    spec, cfg, grid = protocol.spec, protocol.cfg, protocol.t_grid
    sec, e0 = _unit_sector_state(spec, bits)
    fwd_gen = _apply_fn(spec, sec, +1, +1)   # H0 + Sigma
    rev_gen = _apply_fn(spec, sec, +1, -1)   # H0 - Sigma (adjoint backward leg)
    f = e0.copy()
    b = e0.copy()
    out = np.empty(len(grid))
    out[0] = 1.0
    t_prev = 0.0
    for k, t in enumerate(grid[1:], start=1):
        dt2 = 0.5 * (t - t_prev)
        f = evolve(fwd_gen, f, dt2, cfg)
        b = evolve(rev_gen, b, dt2, cfg)
        out[k] = abs(np.vdot(b, f)) ** 2
        t_prev = t
    return out


def _m11_state_trace(protocol: EchoProtocol, sv: StateVector) -> np.ndarray:
    """2<S_1^z>(t) under the echo protocol for one tracked state.

    The forward leg advances incrementally; the backward leg is re-applied
    from the current forward state at every grid point (S_1^z does not reduce
    to an overlap of two running legs).
    """
    spec, cfg, grid = protocol.spec, protocol.cfg, protocol.t_grid
    space = sv.space
    fwd_gen = _apply_fn(spec, space, +1, +1)
    bwd_gen = _apply_fn(spec, space, -1, +1)
    s1 = s1z_diagonal(space.states)
    f = sv.data.copy()
    out = np.empty(len(grid))
    out[0] = 2.0 * float(s1 @ (np.abs(f) ** 2))
    t_prev = 0.0
    for k, t in enumerate(grid[1:], start=1):
        f = evolve(fwd_gen, f, 0.5 * (t - t_prev), cfg)
        chi = evolve(bwd_gen, f, 0.5 * t, cfg)
        out[k] = 2.0 * float(s1 @ (np.abs(chi) ** 2))
        t_prev = t
    return out


def _use_dense(protocol: EchoProtocol) -> bool:
    if protocol.cfg.method == "krylov":
        return False
    max_dim = math.comb(protocol.spec.n, protocol.spec.n // 2)
    return max_dim <= DENSE_DIM_CAP


def m11_exact_trace(protocol: EchoProtocol) -> EchoSeries:
    """M11 as the exhaustive average over A; exact, stderr 0."""
    n = protocol.spec.n
    if n > M11_EXACT_MAX_SITES:
        raise CapacityError(
            f"exact trace needs 2^(n-1) evolutions; capped at n={M11_EXACT_MAX_SITES}"
        )
    if _use_dense(protocol):
        m11, _ = _exact_sector_sweep(protocol, want_m11=True, want_mmb=False)
    else:
        weight = 1.0 / (1 << (n - 1))
        m11 = np.zeros(len(protocol.t_grid))
        for bits in range(1, 1 << n, 2):  # odd patterns: first spin up
            sec, e0 = _unit_sector_state(protocol.spec, bits)
            m11 += weight * _m11_state_trace(protocol, StateVector(e0, sec))
    return EchoSeries(
        t=protocol.t_grid,
        m11=m11,
        m11_stderr=np.zeros(len(protocol.t_grid)),
        meta={"m11_estimator": "exact_trace"},
    )


def m11_random_phase(protocol: EchoProtocol, seeds, threads: int = 1) -> EchoSeries:
    """M11 from random-phase pure states, averaged over seeds."""
    seeds = list(seeds)
    if not seeds:
        raise ValueError("at least one seed required")
    runs = _map(
        lambda s: _m11_state_trace(protocol, random_phase_state(protocol.spec.n, s)),
        seeds,
        threads,
    )
    samples = np.array(runs)
    m11 = samples.mean(axis=0)
    if len(seeds) > 1:
        stderr = samples.std(axis=0, ddof=1) / math.sqrt(len(seeds))
    else:
        stderr = np.zeros(len(protocol.t_grid))
    return EchoSeries(
        t=protocol.t_grid,
        m11=m11,
        m11_stderr=stderr,
        meta={"m11_estimator": "random_phase", "seeds": seeds},
    )


def sample_subset_a(n: int, k: int, seed: int, stratified: bool = True) -> np.ndarray:
    """Draw k distinct basis states from A, optionally stratified by sector."""
    total = 1 << (n - 1)
    if k > total:
        raise ValueError(f"cannot draw {k} distinct states from |A| = {total}")
    rng = np.random.default_rng(seed)
    rest = np.arange(total, dtype=np.int64)  # encodes spins 2..n
    if not stratified:
        pick = rng.choice(total, size=k, replace=False)
        return np.sort((rest[pick] << 1) | 1)
    ups = popcount(rest)
    picks = []
    # proportional allocation with largest-remainder rounding
    sizes = np.array([math.comb(n - 1, m) for m in range(n)])
    quota = k * sizes / total
    alloc = np.floor(quota).astype(int)
    order = np.argsort(-(quota - alloc))
    for m in order:
        if alloc.sum() >= k:
            break
        if alloc[m] < sizes[m]:
            alloc[m] += 1
    for m in range(n):
        take = min(alloc[m], sizes[m])
        if take == 0:
            continue
        pool = rest[ups == m]
        picks.append(rng.choice(pool, size=take, replace=False))
    chosen = np.concatenate(picks)
    return np.sort((chosen << 1) | 1)


def mmb(
    protocol: EchoProtocol,
    mode: str = "exact",
    k: int = 1024,
    seed: int = 0,
    stratified: bool = True,
    threads: int = 1,
) -> EchoSeries:
    """M_MB over the grid; mode 'exact' (n <= 14) or 'sampled' (k states)."""
    n = protocol.spec.n
    grid = protocol.t_grid
    if mode == "exact":
        if n > MMB_EXACT_MAX_SITES:
            raise CapacityError(
                f"exact M_MB capped at n={MMB_EXACT_MAX_SITES}; use sampled mode"
            )
        if _use_dense(protocol):
            _, m_mb = _exact_sector_sweep(protocol, want_m11=False, want_mmb=True)
        else:
            weight = 1.0 / (1 << (n - 1))
            m_mb = np.zeros(len(grid))
            for bits in range(1, 1 << n, 2):
                m_mb += weight * _mmb_state_trace(protocol, bits)
        return EchoSeries(
            t=grid,
            m_mb=m_mb,
            m_mb_stderr=np.zeros(len(grid)),
            meta={"m_mb_estimator": "exact"},
        )
    if mode != "sampled":
        raise ValueError(f"unknown M_MB mode {mode!r}")
    states = sample_subset_a(n, k, seed, stratified)
    runs = _map(lambda b: _mmb_state_trace(protocol, int(b)), states, threads)
    samples = np.array(runs)
    m_mb = samples.mean(axis=0)
    stderr = samples.std(axis=0, ddof=1) / math.sqrt(len(states)) if k > 1 else np.zeros(len(grid))
    return EchoSeries(
        t=grid,
        m_mb=m_mb,
        m_mb_stderr=stderr,
        meta={"m_mb_estimator": "sampled", "samples": int(k), "sample_seed": int(seed)},
    )


def m_x(m11_series: EchoSeries, mmb_series: EchoSeries) -> EchoSeries:
    """Cross contribution M_X = M11 - M_MB with propagated errors."""
    if m11_series.m11 is None or mmb_series.m_mb is None:
        raise ValueError("need an m11 series and an m_mb series")
    if len(m11_series.t) != len(mmb_series.t) or np.any(m11_series.t != mmb_series.t):
        raise ValueError("time grids differ")
    e1 = m11_series.column("m11_stderr")
    e2 = mmb_series.column("m_mb_stderr")
    meta = dict(m11_series.meta)
    meta.update(mmb_series.meta)
    return EchoSeries(
        t=m11_series.t,
        m11=m11_series.m11,
        m11_stderr=m11_series.m11_stderr,
        m_mb=mmb_series.m_mb,
        m_mb_stderr=mmb_series.m_mb_stderr,
        m_x=np.asarray(m11_series.m11) - np.asarray(mmb_series.m_mb),
        m_x_stderr=np.sqrt(np.nan_to_num(e1) ** 2 + np.nan_to_num(e2) ** 2),
        meta=meta,
    )


def pi11(series: EchoSeries) -> np.ndarray:
    """Probability that the first spin is still up: (M11 + 1) / 2."""
    if series.m11 is None:
        raise ValueError("series has no m11 values")
    return (np.asarray(series.m11) + 1.0) / 2.0


def _map(fn, items, threads):
    if threads <= 1:
        return [fn(x) for x in items]
    from concurrent.futures import ThreadPoolExecutor

    with ThreadPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(fn, items))
