"""Time propagation: Lanczos-Krylov exp(-iHt) action and a dense oracle.

The Krylov path is matrix-free and adaptive: steps of at most ``dt_max`` are
taken, the subspace is grown until the standard residual estimate (last
tridiagonal coefficient times the last component of the small exponential)
drops below the per-step tolerance, and the step is halved when the subspace
cap is hit without convergence.

The dense oracle diagonalizes the explicit Hamiltonian and is admitted only
up to dimension 4096; it exists to verify the Krylov path and to make the
exhaustive echo traces affordable.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.linalg

from .errors import CapacityError, ConvergenceError

DENSE_DIM_CAP = 4096
METHODS = ("auto", "krylov", "dense_oracle")


@dataclass(frozen=True)
class PropagationConfig:
    tol: float = 1e-9
    max_krylov_dim: int = 30
    dt_max: float = 0.5
    method: str = "auto"

    def __post_init__(self):
        if not 0.0 < self.tol < 1e-4:
            raise ValueError("tol must lie in (0, 1e-4)")
        if self.max_krylov_dim < 2:
            raise ValueError("max_krylov_dim must be at least 2")
        if self.dt_max <= 0:
            raise ValueError("dt_max must be positive")
        if self.method not in METHODS:
            raise ValueError(f"unknown method {self.method!r}")


def _lanczos_step(apply_h, psi, dt, tol_step, m_max):
    """One exp(-iH dt) psi attempt.  Returns (result, converged)."""
    beta0 = np.linalg.norm(psi)
    if beta0 == 0.0:
        return psi, True
    v = psi / beta0
    vecs = [v]
    alphas = []
    betas = []
    w = apply_h(v)
    for m in range(m_max):
        a = float(np.real(np.vdot(vecs[-1], w)))
        alphas.append(a)
        w = w - a * vecs[-1]
        if len(vecs) > 1:
            w = w - betas[-1] * vecs[-2]
        # full reorthogonalization; m is small and this keeps T accurate
        for u in vecs:
            w = w - np.vdot(u, w) * u
        b = float(np.linalg.norm(w))
        if len(alphas) > 1:
            evals, evecs = scipy.linalg.eigh_tridiagonal(alphas, betas)
        else:
            evals, evecs = np.array(alphas), np.ones((1, 1))
        small = evecs @ (np.exp(-1j * dt * evals) * evecs[0, :].conj())
        err = abs(b * small[-1] * dt)
        if b < 1e-13 or err < tol_step:
            out = beta0 * np.tensordot(small, np.array(vecs), axes=(0, 0))
            return out, True
        betas.append(b)
        v = w / b
        vecs.append(v)
        w = apply_h(v)
    return psi, False


def evolve(apply_h, psi: np.ndarray, t: float, cfg: PropagationConfig) -> np.ndarray:
    """exp(-iHt) psi to within tol*(1+|t|) via adaptive Lanczos steps."""
    if t == 0.0:
        return psi.copy()
    remaining = abs(t)
    sign = 1.0 if t > 0 else -1.0
    out = psi.copy()
    dt_floor = 1e-10 * max(1.0, abs(t))
    dt = min(cfg.dt_max, remaining)
    while remaining > 1e-15 * max(1.0, abs(t)):
        dt = min(dt, remaining)
        tol_step = cfg.tol * dt / abs(t)
        stepped, ok = _lanczos_step(apply_h, out, sign * dt, tol_step, cfg.max_krylov_dim)
        if not ok:
            dt *= 0.5
            if dt < dt_floor:
                raise ConvergenceError(
                    f"Krylov step size fell below {dt_floor:g} without convergence"
                )
            continue
        out = stepped
        remaining -= dt
    return out


def dense_oracle(h_dense: np.ndarray, psi: np.ndarray, t: float) -> np.ndarray:
    """Exact-to-roundoff exp(-iHt) psi via full Hermitian eigendecomposition."""
    dim = h_dense.shape[0]
    if dim > DENSE_DIM_CAP:
        raise CapacityError(f"dense oracle limited to dimension {DENSE_DIM_CAP}, got {dim}")
    evals, evecs = np.linalg.eigh(h_dense)
    return evecs @ (np.exp(-1j * t * evals) * (evecs.conj().T @ psi))


class EigenPropagator:
    """Cached eigendecomposition of one Hamiltonian block for repeated times."""

    def __init__(self, h_dense: np.ndarray):
        if h_dense.shape[0] > DENSE_DIM_CAP:
            raise CapacityError(
                f"dense propagation limited to dimension {DENSE_DIM_CAP}, got {h_dense.shape[0]}"
            )
        self.evals, self.evecs = np.linalg.eigh(h_dense)

    def apply(self, psi: np.ndarray, t: float) -> np.ndarray:
        return self.evecs @ (np.exp(-1j * t * self.evals) * (self.evecs.conj().T @ psi))
