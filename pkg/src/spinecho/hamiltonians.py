"""Model Hamiltonians: the XXZ ring H0, perturbation families, and moments.

Every operator here is a sum of two-site secular terms

    jz * Sz_i Sz_j + jxy * (Sx_i Sx_j + Sy_i Sy_j)

plus, for the disorder family, on-site Sz fields.  All of them conserve the
total magnetization, so they act block-wise on magnetization sectors.

The action on a state vector is assembled from bit tests and bit flips on the
basis states; the per-(operator, space) scatter tables this produces are
cached and reused, the full matrix is never formed.

Units: hbar = 1, energies in units of j0, times in units of 1/j0.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np
import scipy.sparse as sp

from .basis import FullSpace, SectorIndex, check_sites, enumerate_sector
from .errors import SpaceMismatchError

SIGMA_FAMILIES = ("nnn_xxz", "generic_secular", "ising_nnn", "onsite_disorder")
BOUNDARIES = ("open", "periodic")


@dataclass(frozen=True)
class ModelSpec:
    """Couplings and perturbation family defining H0 and Sigma.

    ``sigma_boundary`` applies to the nnn_xxz family: "open" sums the
    next-nearest bonds i..i+2 up to the chain end, "periodic" closes the
    next-nearest ring so that every site has two Sigma neighbors (this is the
    geometry whose site-averaged second moment equals the bulk value
    j_sigma^2/2).
    """

    n: int
    j0: float = 1.0
    j_sigma: float = 0.0
    alpha: float = 0.0
    sigma_family: str = "nnn_xxz"
    sigma_boundary: str = "open"
    sigma_bonds: tuple | None = None  # ((i, j, J), ...) for generic_secular
    disorder_seed: int = 0

    def __post_init__(self):
        check_sites(self.n)
        if self.j0 <= 0:
            raise ValueError("j0 must be positive")
        if self.j_sigma < 0:
            raise ValueError("j_sigma must be non-negative")
        if self.sigma_family not in SIGMA_FAMILIES:
            raise ValueError(f"unknown sigma_family {self.sigma_family!r}")
        if self.sigma_boundary not in BOUNDARIES:
            raise ValueError(f"unknown sigma_boundary {self.sigma_boundary!r}")
        if self.sigma_bonds is not None:
            pairs = [frozenset((i, j)) for i, j, _ in self.sigma_bonds]
            if len(pairs) != len(set(pairs)):
                raise ValueError("generic_secular bond list repeats a pair")
            for i, j, _ in self.sigma_bonds:
                if i == j or not (0 <= i < self.n and 0 <= j < self.n):
                    raise ValueError(f"bad bond ({i}, {j})")


@dataclass
class StateVector:
    """Complex amplitudes over the full space or one magnetization sector."""

    data: np.ndarray
    space: FullSpace | SectorIndex

    def __post_init__(self):
        self.data = np.asarray(self.data, dtype=np.complex128)
        if len(self.data) != self.space.dim:
            raise SpaceMismatchError(
                f"amplitude length {len(self.data)} != space dimension {self.space.dim}"
            )

    @property
    def norm(self) -> float:
        return float(np.linalg.norm(self.data))

    def copy(self) -> "StateVector":
        return StateVector(self.data.copy(), self.space)


def _ring_pairs(n: int, step: int):
    """Unordered pairs (i, (i+step) mod n), each bond once."""
    seen = set()
    pairs = []
    for i in range(n):
        p = frozenset((i, (i + step) % n))
        if len(p) == 2 and p not in seen:
            seen.add(p)
            pairs.append(tuple(sorted(p)))
    return pairs


def h0_bonds(spec: ModelSpec):
    """Nearest-neighbor XXZ ring: jz = j0/2, jxy = j0 on every ring bond."""
    return [(i, j, 0.5 * spec.j0, spec.j0) for i, j in _ring_pairs(spec.n, 1)]


def sigma_pairs(spec: ModelSpec):
    """Unordered site pairs carrying the perturbation coupling."""
    if spec.sigma_family == "generic_secular" and spec.sigma_bonds is not None:
        return [(min(i, j), max(i, j), jc) for i, j, jc in spec.sigma_bonds]
    if spec.sigma_family == "onsite_disorder":
        return []
    if spec.sigma_family in ("nnn_xxz", "ising_nnn") and spec.sigma_boundary == "open":
        return [(i, i + 2, spec.j_sigma) for i in range(spec.n - 2)]
    # periodic next-nearest ring (also the generic_secular default geometry)
    return [(i, j, spec.j_sigma) for i, j in _ring_pairs(spec.n, 2)]


def sigma_terms(spec: ModelSpec):
    """Bond list (i, j, jz, jxy) and optional on-site Sz fields for Sigma."""
    fields = None
    bonds = []
    if spec.sigma_family == "onsite_disorder":
        rng = np.random.default_rng(spec.disorder_seed)
        fields = rng.uniform(-spec.j_sigma, spec.j_sigma, spec.n)
    elif spec.sigma_family == "ising_nnn":
        bonds = [(i, j, jc, 0.0) for i, j, jc in sigma_pairs(spec)]
    elif spec.sigma_family == "generic_secular":
        bonds = [(i, j, 2.0 * spec.alpha * jc, -jc) for i, j, jc in sigma_pairs(spec)]
    else:  # nnn_xxz, same anisotropy pattern as H0
        bonds = [(i, j, 0.5 * jc, jc) for i, j, jc in sigma_pairs(spec)]
    return bonds, fields


class SpinOperator:
    """A magnetization-conserving spin Hamiltonian applied without a matrix.

    The Ising parts form a diagonal; each flip-flop bond contributes a
    scatter of antiparallel configurations onto their pair-swapped partners.
    Both are derived from bit operations on the basis states of the target
    space and cached per space.
    """

    def __init__(self, n: int, bonds, fields=None):
        self.n = n
        self.bonds = tuple(bonds)
        self.fields = None if fields is None else np.asarray(fields, dtype=float)
        self._tables = {}

    def _build_tables(self, space):
        states = space.states
        diag = np.zeros(space.dim)
        rows, cols, vals = [], [], []
        for i, j, jz, jxy in self.bonds:
            bi = (states >> np.uint64(i)) & np.uint64(1)
            bj = (states >> np.uint64(j)) & np.uint64(1)
            same = bi == bj
            if jz:
                diag += np.where(same, 0.25 * jz, -0.25 * jz)
            if jxy:
                src = np.nonzero(~same)[0]
                mask = np.uint64((1 << i) | (1 << j))
                dst = space.index_of(states[src] ^ mask)
                rows.append(dst)
                cols.append(src)
                vals.append(np.full(len(src), 0.5 * jxy))
        if self.fields is not None:
            for i, h in enumerate(self.fields):
                if h:
                    bi = (states >> np.uint64(i)) & np.uint64(1)
                    diag += np.where(bi.astype(bool), 0.5 * h, -0.5 * h)
        if rows:
            offdiag = sp.csr_matrix(
                (np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))),
                shape=(space.dim, space.dim),
            )
        else:
            offdiag = None
        return diag, offdiag

    def tables(self, space):
        key = space.key()
        if key not in self._tables:
            self._tables[key] = self._build_tables(space)
        return self._tables[key]

    def apply(self, psi: np.ndarray, space) -> np.ndarray:
        diag, offdiag = self.tables(space)
        out = diag * psi
        if offdiag is not None:
            out = out + offdiag @ psi
        return out

    def dense(self, space) -> np.ndarray:
        diag, offdiag = self.tables(space)
        h = np.diag(diag)
        if offdiag is not None:
            h = h + offdiag.toarray()
        return h

    def norm_estimate(self, space) -> float:
        """Cheap upper bound on the spectral radius (Gershgorin-style)."""
        diag, offdiag = self.tables(space)
        bound = float(np.max(np.abs(diag))) if len(diag) else 0.0
        if offdiag is not None:
            bound += float(np.max(np.abs(offdiag).sum(axis=1)))
        return bound


@lru_cache(maxsize=None)
def h0_operator(spec: ModelSpec) -> SpinOperator:
    return SpinOperator(spec.n, h0_bonds(spec))


@lru_cache(maxsize=None)
def sigma_operator(spec: ModelSpec) -> SpinOperator:
    bonds, fields = sigma_terms(spec)
    return SpinOperator(spec.n, bonds, fields)


@lru_cache(maxsize=None)
def echo_generator(spec: ModelSpec, sign_h0: int = 1, sign_sigma: int = 1) -> SpinOperator:
    """sign_h0 * H0 + sign_sigma * Sigma as a single operator."""
    bonds = [(i, j, sign_h0 * jz, sign_h0 * jxy) for i, j, jz, jxy in h0_bonds(spec)]
    sbonds, fields = sigma_terms(spec)
    bonds += [(i, j, sign_sigma * jz, sign_sigma * jxy) for i, j, jz, jxy in sbonds]
    if fields is not None:
        fields = sign_sigma * fields
    return SpinOperator(spec.n, bonds, fields)


def _check_space(spec: ModelSpec, sv: StateVector):
    if sv.space.n != spec.n:
        raise SpaceMismatchError(f"state on {sv.space.n} sites, model on {spec.n}")


def apply_h0(spec: ModelSpec, sv: StateVector) -> StateVector:
    """H0 |psi>, computed within the state's own space."""
    _check_space(spec, sv)
    return StateVector(h0_operator(spec).apply(sv.data, sv.space), sv.space)


def apply_sigma(spec: ModelSpec, sv: StateVector) -> StateVector:
    """Sigma |psi>, computed within the state's own space."""
    _check_space(spec, sv)
    return StateVector(sigma_operator(spec).apply(sv.data, sv.space), sv.space)


@dataclass(frozen=True)
class Moments:
    """Local second moments and the time scales they set (hbar = 1).

    ``sigma2`` / ``sigma0_2`` are the bulk values quoted for the ring model
    (j_sigma^2/2 and j0^2/2); ``sigma2_site_avg`` is the exact site average
    of the perturbation's local second moment for the actual bond geometry,
    which differs from the bulk value for an open next-nearest chain.
    """

    sigma2: float
    sigma0_2: float
    tau_sigma: float
    t2: float
    sigma2_site_avg: float


def site_second_moments(spec: ModelSpec) -> np.ndarray:
    """Per-site sum of (J_ij/2)^2 over the perturbation bonds."""
    out = np.zeros(spec.n)
    for i, j, jc in sigma_pairs(spec):
        out[i] += (jc / 2.0) ** 2
        out[j] += (jc / 2.0) ** 2
    return out


def second_moments(spec: ModelSpec) -> Moments:
    sigma2 = 0.5 * spec.j_sigma**2
    sigma0_2 = 0.5 * spec.j0**2
    return Moments(
        sigma2=sigma2,
        sigma0_2=sigma0_2,
        tau_sigma=(1.0 / math.sqrt(sigma2)) if sigma2 > 0 else math.inf,
        t2=1.0 / math.sqrt(sigma0_2),
        sigma2_site_avg=float(np.mean(site_second_moments(spec))),
    )
