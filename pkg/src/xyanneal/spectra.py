"""Exact diagonalization: spectra, parity-sector level diagrams, magnetization spectra.

Energies here are in the units of the coupling matrix passed in; use
``CouplingMatrix.normalized()`` for J_med units.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.sparse.linalg as spla
from scipy.linalg import eigh

from .errors import SectorInvalid
from .geometry import CouplingMatrix
from .operators import XYModel, parity_decompose, polarized_state, total_spin

#: Above this dimension the ground-state energy comes from sparse Lanczos (ARPACK).
DENSE_GROUND_STATE_LIMIT = 1024
DEGENERACY_TOL = 1e-9


@dataclass(frozen=True)
class EigenSystem:
    energies: np.ndarray  # ascending
    states: np.ndarray  # columns, full z-basis
    sector: str

    def residuals(self, matrix) -> np.ndarray:
        m = getattr(matrix, "matrix", matrix)
        hv = m @ self.states
        return np.linalg.norm(hv - self.states * self.energies[None, :], axis=0)


def _model(j) -> XYModel:
    return j if isinstance(j, XYModel) else XYModel(j)


def diagonalize(j, omega_x: float = 0.0, omega_y: float = 0.0, sector: str = "full") -> EigenSystem:
    """Dense diagonalization of ``H(J, Ox, Oy)``, optionally inside a parity sector."""
    if sector not in ("full", "even", "odd"):
        raise ValueError(f"sector must be full, even or odd, got {sector!r}")
    model = _model(j)
    if sector != "full":
        if omega_y != 0.0:
            raise SectorInvalid("the probe field breaks parity; use sector='full'")
        sec = parity_decompose(model.n_spins)[0 if sector == "even" else 1]
        evals, evecs = eigh(sec.project(model.real_csr(omega_x)))
        return EigenSystem(evals, np.asarray(sec.embed(evecs)), sector)
    if omega_y == 0.0:
        evals, evecs = eigh(model.real_csr(omega_x).toarray())
    else:
        evals, evecs = eigh(model.csr(omega_x, omega_y).toarray())
    return EigenSystem(evals, evecs, "full")


def ground_state_energy(j) -> float:
    """Lowest eigenvalue of ``H(J, 0, 0)`` per particle."""
    model = _model(j)
    n = model.n_spins
    if model.dimension <= DENSE_GROUND_STATE_LIMIT:
        lows = []
        for sec in parity_decompose(n) if n > 1 else ():
            lows.append(eigh(sec.project(model.real_csr(0.0)), eigvals_only=True, subset_by_index=(0, 0))[0])
        if not lows:
            return 0.0
        return float(min(lows)) / n
    h = model.real_csr(0.0)
    # fixed start vector: ARPACK's default is random, which breaks reproducibility
    v0 = np.random.default_rng(0).standard_normal(model.dimension)
    val = spla.eigsh(h, k=1, which="SA", v0=v0, tol=1e-13, return_eigenvectors=False)
    return float(val[0]) / n


@dataclass(frozen=True)
class LevelSlice:
    omega_x: float
    energies: np.ndarray
    overlaps: np.ndarray  # |<v_k|Psi_x>|^2


def level_diagram(j, omega_x_grid, sector: str = "even") -> list[LevelSlice]:
    """Sector eigenenergies versus annealing field, with overlaps on the x-polarized state."""
    model = _model(j)
    sec = parity_decompose(model.n_spins)[0 if sector == "even" else 1]
    psi_x = sec.restrict(polarized_state(model.n_spins, "x")).real
    out = []
    for ox in omega_x_grid:
        evals, evecs = eigh(sec.project(model.real_csr(float(ox))))
        out.append(LevelSlice(float(ox), evals, (evecs.T @ psi_x) ** 2))
    return out


def asymptotic_slopes(diagram: list[LevelSlice]) -> np.ndarray:
    """Least-squares slope dE_k/dOx of every (sorted) level over the grid."""
    ox = np.array([s.omega_x for s in diagram])
    e = np.array([s.energies for s in diagram])
    return np.polyfit(ox, e, 1)[0]


def _codiagonal_values(energies: np.ndarray, m: np.ndarray, tol: float) -> np.ndarray:
    """Diagonal of ``m`` after diagonalizing it inside each degenerate energy block."""
    vals = np.empty(energies.size)
    start = 0
    while start < energies.size:
        stop = start + 1
        while stop < energies.size and energies[stop] - energies[stop - 1] < tol:
            stop += 1
        if stop - start == 1:
            vals[start] = m[start, start].real
        else:
            vals[start:stop] = np.linalg.eigvalsh(m[start:stop, start:stop])
        start = stop
    return vals


def magnetization_spectrum(j, omega_y: float) -> list[tuple[float, float]]:
    """``(E_k / N, <M_y>_k)`` for every eigenstate of ``H(J, 0, Oy)``, by energy.

    A rotation by pi/2 about z maps ``H(J, Oy, 0)`` onto ``H(J, 0, Oy)``
    (the XY coupling is invariant) and ``S_x`` onto ``S_y``, so the
    spectrum is computed from the real parity blocks of ``H(J, Oy, 0)``.
    Inside degenerate blocks the magnetization is diagonalized as well, so
    the values do not depend on the eigenbasis chosen by the solver.
    """
    model = _model(j)
    n = model.n_spins
    h = model.real_csr(float(omega_y))
    sx = total_spin(n, "x").real
    blocks = [(sec, *eigh(sec.project(h))) for sec in parity_decompose(n)]
    tol = DEGENERACY_TOL * max(max(np.abs(ev).max() for _, ev, _ in blocks), 1e-300)
    rows = []
    for sec, evals, evecs in blocks:
        mvals = _codiagonal_values(evals, evecs.T @ sec.project(sx) @ evecs, tol)
        rows.extend(zip(evals / n, mvals / n))
    rows.sort(key=lambda r: (r[0], r[1]))
    return [(float(e), float(m)) for e, m in rows]
