"""Matrix-free Loschmidt-echo dynamics for spin-1/2 chains.

Simulates the imperfect time-reversal protocol (forward evolution under
H0 + Sigma, backward under -H0 + Sigma) and computes the local echo M11,
the many-body echo M_MB, the cross contribution M_X, their short-time
expansions, and the extensive-decay scaling collapse f(t) = eta(N, t) / N.
"""

__version__ = "0.1.0"

from .basis import FullSpace, SectorIndex, enumerate_sector, sz_expectation
from .echo import (
    EchoProtocol,
    EchoSeries,
    m11_exact_trace,
    m11_random_phase,
    m_x,
    mmb,
    pi11,
    random_phase_state,
    u_le_apply,
)
from .hamiltonians import (
    ModelSpec,
    Moments,
    StateVector,
    apply_h0,
    apply_sigma,
    second_moments,
)
from .propagator import PropagationConfig, dense_oracle, evolve

__all__ = [
    "EchoProtocol",
    "EchoSeries",
    "FullSpace",
    "ModelSpec",
    "Moments",
    "PropagationConfig",
    "SectorIndex",
    "StateVector",
    "apply_h0",
    "apply_sigma",
    "dense_oracle",
    "enumerate_sector",
    "evolve",
    "m11_exact_trace",
    "m11_random_phase",
    "m_x",
    "mmb",
    "pi11",
    "random_phase_state",
    "second_moments",
    "sz_expectation",
    "u_le_apply",
]
