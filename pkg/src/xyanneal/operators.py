"""Spin-1/2 many-body operators in the computational z-basis.

Basis index ``b`` encodes spin ``i`` in bit ``i``; a set bit is spin up
(``S_z = +1/2``).  Spin operators are ``S_a = sigma_a / 2``.

The Hamiltonian family is

    H(Ox, Oy) = sum_{i<j} J_ij (Sx_i Sx_j + Sy_i Sy_j) - sum_i (Ox Sx_i + Oy Sy_i)

The interaction (flip-flop) and both field terms are stored on one shared
sparse pattern, so assembling ``H`` for new field values is a single
vectorized axpy over the nonzeros.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg  # noqa: F401  (registers sp.linalg)

from .errors import DimensionTooLarge
from .geometry import CouplingMatrix

MAX_SPINS = 14

_AXES = ("x", "y", "z")


def check_size(n_spins: int, max_spins: int = MAX_SPINS) -> None:
    if n_spins < 1:
        raise ValueError("need at least one spin")
    if n_spins > max_spins:
        raise DimensionTooLarge(f"{n_spins} spins exceeds the cap of {max_spins}")


@lru_cache(maxsize=None)
def _bits(n_spins: int) -> np.ndarray:
    """(D, N) array of basis-state bits."""
    b = np.arange(2**n_spins)[:, None]
    return ((b >> np.arange(n_spins)[None, :]) & 1).astype(np.int8)


@dataclass(frozen=True)
class ManyBodyOperator:
    """A Hermitian operator on ``n_spins`` spins, stored as a CSR matrix."""

    n_spins: int
    matrix: sp.csr_matrix

    @property
    def dimension(self) -> int:
        return self.matrix.shape[0]

    def __matmul__(self, vec):
        return self.matrix @ vec

    def toarray(self) -> np.ndarray:
        return self.matrix.toarray()

    def expectation(self, state) -> float:
        psi = getattr(state, "amplitudes", state)
        return float(np.vdot(psi, self.matrix @ psi).real)

    def norm(self) -> float:
        """Frobenius-norm based scale, cheap and basis independent."""
        return float(sp.linalg.norm(self.matrix))

    def hermiticity_error(self) -> float:
        diff = self.matrix - self.matrix.conj().T
        return float(abs(diff).max()) if diff.nnz else 0.0


class XYModel:
    """Field-parametrized Hamiltonian family for one coupling matrix.

    Build once per disorder realization; :meth:`operator` then assembles
    ``H(Ox, Oy)`` cheaply.
    """

    def __init__(self, couplings: CouplingMatrix, max_spins: int = MAX_SPINS):
        n = couplings.n_spins
        check_size(n, max_spins)
        self.couplings = couplings
        self.n_spins = n
        self.dimension = dim = 2**n
        bits = _bits(n)
        cols = np.arange(dim)

        rows_l, cols_l, hint, hx, hy = [], [], [], [], []
        # single flips carry the field terms
        for i in range(n):
            rows_l.append(cols ^ (1 << i))
            cols_l.append(cols)
            hint.append(np.zeros(dim))
            hx.append(np.full(dim, -0.5))
            # <b^i|Sy_i|b> = (i/2)(2 b_i - 1); the field enters with a minus sign
            hy.append(-0.5j * (2 * bits[:, i] - 1))
        # flip-flops between anti-aligned pairs
        jm = couplings.j
        for i in range(n):
            for k in range(i + 1, n):
                mask = bits[:, i] != bits[:, k]
                c = cols[mask]
                rows_l.append(c ^ ((1 << i) | (1 << k)))
                cols_l.append(c)
                hint.append(np.full(c.size, 0.5 * jm[i, k]))
                hx.append(np.zeros(c.size))
                hy.append(np.zeros(c.size, dtype=complex))

        rows = np.concatenate(rows_l) if rows_l else np.zeros(0, dtype=np.int64)
        colv = np.concatenate(cols_l) if cols_l else np.zeros(0, dtype=np.int64)
        order = np.lexsort((colv, rows))
        self._indices = colv[order].astype(np.int32)
        self._indptr = np.concatenate(([0], np.cumsum(np.bincount(rows, minlength=dim)))).astype(np.int32)
        self._int = np.concatenate(hint)[order] if hint else np.zeros(0)
        self._x = np.concatenate(hx)[order] if hx else np.zeros(0)
        self._y = np.concatenate(hy)[order] if hy else np.zeros(0, dtype=complex)

    def csr(self, omega_x: float = 0.0, omega_y: float = 0.0) -> sp.csr_matrix:
        if omega_y == 0.0:
            data = (self._int + omega_x * self._x).astype(complex)
        else:
            data = self._int + omega_x * self._x + omega_y * self._y
        return sp.csr_matrix((data, self._indices, self._indptr), shape=(self.dimension, self.dimension))

    def real_csr(self, omega_x: float = 0.0) -> sp.csr_matrix:
        """Real-valued ``H(Ox, 0)`` (the y-field is the only imaginary part)."""
        data = self._int + omega_x * self._x
        return sp.csr_matrix((data, self._indices, self._indptr), shape=(self.dimension, self.dimension))

    def operator(self, omega_x: float = 0.0, omega_y: float = 0.0) -> ManyBodyOperator:
        return ManyBodyOperator(self.n_spins, self.csr(omega_x, omega_y))


def build_hamiltonian(
    j: CouplingMatrix, omega_x: float = 0.0, omega_y: float = 0.0, max_spins: int = MAX_SPINS
) -> ManyBodyOperator:
    """``H = sum_{i<j} J_ij (SxSx + SySy) - sum_i (Ox Sx_i + Oy Sy_i)``."""
    if not (np.isfinite(omega_x) and np.isfinite(omega_y)):
        raise ValueError("fields must be finite")
    return XYModel(j, max_spins).operator(omega_x, omega_y)


@lru_cache(maxsize=32)
def total_spin(n_spins: int, axis: str) -> sp.csr_matrix:
    """``sum_i S_axis^(i)`` as a CSR matrix."""
    if axis not in _AXES:
        raise ValueError(f"axis must be one of {_AXES}")
    check_size(n_spins)
    dim = 2**n_spins
    bits = _bits(n_spins)
    if axis == "z":
        return sp.diags(bits.sum(axis=1) - 0.5 * n_spins, format="csr").astype(complex)
    cols = np.tile(np.arange(dim), n_spins)
    rows = np.concatenate([np.arange(dim) ^ (1 << i) for i in range(n_spins)])
    if axis == "x":
        data = np.full(rows.size, 0.5 + 0j)
    else:
        data = np.concatenate([0.5j * (2 * bits[:, i] - 1) for i in range(n_spins)])
    return sp.csr_matrix((data, (rows, cols)), shape=(dim, dim))


# -- states -------------------------------------------------------------------

_SINGLE = {
    # amplitudes (down, up)
    ("z", 1): (0.0, 1.0),
    ("z", -1): (1.0, 0.0),
    ("x", 1): (2**-0.5, 2**-0.5),
    ("x", -1): (2**-0.5, -(2**-0.5)),
    ("y", 1): (1j * 2**-0.5, 2**-0.5),
    ("y", -1): (-1j * 2**-0.5, 2**-0.5),
}


@dataclass(frozen=True)
class StateVector:
    amplitudes: np.ndarray

    def __post_init__(self):
        amp = np.asarray(self.amplitudes, dtype=complex)
        dim = amp.size
        if amp.ndim != 1 or dim < 2 or dim & (dim - 1):
            raise ValueError("state length must be a power of two (>= 2)")
        object.__setattr__(self, "amplitudes", amp)

    @property
    def n_spins(self) -> int:
        return self.amplitudes.size.bit_length() - 1

    def norm(self) -> float:
        return float(np.linalg.norm(self.amplitudes))

    def fidelity(self, other: "StateVector") -> float:
        return float(abs(np.vdot(self.amplitudes, other.amplitudes)) ** 2)

    @classmethod
    def normalized(cls, amplitudes) -> "StateVector":
        amp = np.asarray(amplitudes, dtype=complex)
        return cls(amp / np.linalg.norm(amp))


def _sign(sign) -> int:
    if sign in (1, "+", "+1"):
        return 1
    if sign in (-1, "-", "-1"):
        return -1
    raise ValueError(f"sign must be + or -, got {sign!r}")


def polarized_state(n_spins: int, axis: str = "x", sign=1) -> StateVector:
    """Product state with every spin pointing along ``sign * axis``."""
    check_size(n_spins)
    if axis not in _AXES:
        raise ValueError(f"axis must be one of {_AXES}")
    a0, a1 = _SINGLE[(axis, _sign(sign))]
    ups = _bits(n_spins).sum(axis=1)
    amp = np.power(complex(a1), ups) * np.power(complex(a0), n_spins - ups)
    return StateVector(amp)


# -- parity -------------------------------------------------------------------


@dataclass(frozen=True)
class ParitySector:
    """Eigenspace of ``P = prod_i (2 Sx_i)`` (the global spin flip).

    ``basis`` is a real sparse ``(2**N, 2**(N-1))`` matrix with orthonormal
    columns ``(|b> + p |~b>) / sqrt(2)`` for every ``b`` whose top bit is 0.
    """

    label: str
    n_spins: int
    basis: sp.csc_matrix

    @property
    def dimension(self) -> int:
        return self.basis.shape[1]

    @property
    def eigenvalue(self) -> int:
        return 1 if self.label == "even" else -1

    def project(self, operator) -> np.ndarray:
        """Dense sector block ``B^T H B`` of an operator or matrix."""
        m = getattr(operator, "matrix", operator)
        block = self.basis.T @ (m @ self.basis)
        return block.toarray() if sp.issparse(block) else np.asarray(block)

    def restrict(self, vec) -> np.ndarray:
        psi = getattr(vec, "amplitudes", vec)
        return self.basis.T @ psi

    def embed(self, coeffs) -> np.ndarray:
        return self.basis @ coeffs


@lru_cache(maxsize=32)
def parity_decompose(n_spins: int) -> tuple[ParitySector, ParitySector]:
    check_size(n_spins)
    dim = 2**n_spins
    half = dim // 2
    reps = np.arange(half)
    partners = reps ^ (dim - 1)
    rows = np.concatenate([reps, partners])
    cols = np.concatenate([reps, reps])
    s = 2**-0.5
    even = sp.csc_matrix((np.full(dim, s), (rows, cols)), shape=(dim, half))
    odd = sp.csc_matrix((np.concatenate([np.full(half, s), np.full(half, -s)]), (rows, cols)), shape=(dim, half))
    return ParitySector("even", n_spins, even), ParitySector("odd", n_spins, odd)


def parity_operator(n_spins: int) -> sp.csr_matrix:
    dim = 2**n_spins
    return sp.csr_matrix((np.ones(dim), (np.arange(dim) ^ (dim - 1), np.arange(dim))), shape=(dim, dim))
