"""Shared fixtures and the acceptance-summary reporting hook."""

import numpy as np
import pytest

# one line per acceptance check, printed after the test session
ACCEPTANCE_LINES = []


def record_acceptance(name: str, passed: bool, detail: str = ""):
    status = "PASS" if passed else "FAIL"
    line = f"ACCEPTANCE {name}: {status}"
    if detail:
        line += f" ({detail})"
    ACCEPTANCE_LINES.append(line)
    return passed


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    if not ACCEPTANCE_LINES:
        return
    terminalreporter.section("acceptance criteria")
    for line in ACCEPTANCE_LINES:
        terminalreporter.write_line(line)


# Pauli-style single-site operators for building independent dense references.
SZ2 = np.diag([-0.5, 0.5])
SP2 = np.array([[0.0, 0.0], [1.0, 0.0]])  # raising: up <- down
SM2 = SP2.T
ID2 = np.eye(2)


def site_op(n, site, op):
    """Embed a 2x2 operator at one site; bit i of the state index is site i."""
    full = np.eye(1)
    for k in reversed(range(n)):
        full = np.kron(full, op if k == site else ID2)
    return full


def dense_bond(n, i, j, jz, jxy):
    """jz Sz_i Sz_j + (jxy/2)(S+_i S-_j + S-_i S+_j) on the full space."""
    h = jz * site_op(n, i, SZ2) @ site_op(n, j, SZ2)
    if jxy:
        h = h + 0.5 * jxy * (
            site_op(n, i, SP2) @ site_op(n, j, SM2)
            + site_op(n, i, SM2) @ site_op(n, j, SP2)
        )
    return h


def dense_reference(n, bonds, fields=None):
    """Independent dense Hamiltonian from a (i, j, jz, jxy) bond list."""
    h = np.zeros((2**n, 2**n))
    for i, j, jz, jxy in bonds:
        h += dense_bond(n, i, j, jz, jxy)
    if fields is not None:
        for i, hz in enumerate(fields):
            if hz:
                h += hz * site_op(n, i, SZ2)
    return h


@pytest.fixture
def rng():
    return np.random.default_rng(1234)
