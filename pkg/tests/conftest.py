"""Shared oracles for the test-suite.

The dense constructions here are written independently of the library: they
build operators from Kronecker products of 2x2 Pauli matrices.
"""

import numpy as np
import pytest

from xyanneal.geometry import CouplingMatrix

SX = np.array([[0, 1], [1, 0]], dtype=complex) / 2
SY = np.array([[0, -1j], [1j, 0]], dtype=complex) / 2
SZ = np.array([[1, 0], [0, -1]], dtype=complex) / 2
# library basis: index bit i is spin i, bit set = up.  In a Kronecker product
# the last factor is the least significant bit, and within a factor index 0
# is "bit clear" = down, so single-site matrices are taken in (down, up) order.
_FLIP = np.array([[0, 1], [1, 0]])


def _local(op):
    return _FLIP @ op @ _FLIP


def site_op(op, i, n):
    out = np.array([[1.0 + 0j]])
    for k in reversed(range(n)):
        out = np.kron(out, _local(op) if k == i else np.eye(2))
    return out


def dense_hamiltonian(j, ox, oy):
    j = np.asarray(j, dtype=float)
    n = j.shape[0]
    h = np.zeros((2**n, 2**n), dtype=complex)
    for a in range(n):
        for b in range(a + 1, n):
            h += j[a, b] * (site_op(SX, a, n) @ site_op(SX, b, n) + site_op(SY, a, n) @ site_op(SY, b, n))
    for a in range(n):
        h -= ox * site_op(SX, a, n) + oy * site_op(SY, a, n)
    return h


def dense_total(op, n):
    return sum(site_op(op, i, n) for i in range(n))


def random_couplings(n, seed):
    rng = np.random.default_rng(seed)
    a = rng.normal(size=(n, n))
    j = np.triu(a, 1)
    return CouplingMatrix(j + j.T)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


# acceptance report lines, echoed in the terminal summary even without -s
ACCEPTANCE_LINES = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.write_sep("=", "acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES, key=lambda s: int(s.split("criterion ")[1].split(":")[0])):
            terminalreporter.write_line(line)
