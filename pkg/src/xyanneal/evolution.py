"""Unitary time evolution under piecewise-linear field schedules.

The propagator advances ``i d|psi>/dt = H(t)|psi>`` step by step.  Each
exponential ``exp(-i tau H)|v>`` is evaluated with a Lanczos (Krylov)
approximation that is refined until its a-posteriori error estimate drops
below ``tol``; if the Krylov space would grow past ``m_max`` the step is
split.  Within a step the default ``"cfm4"`` scheme is the fourth-order
commutator-free Magnus integrator (two exponentials at Gauss-node field
combinations).  On constant-field segments a single exponential per step is
exact, so only the Krylov tolerance matters there.
"""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass, field

import numpy as np
from scipy.linalg import eigh_tridiagonal

from .errors import NonFiniteState, NormDrift
from .geometry import CouplingMatrix
from .operators import StateVector, XYModel, total_spin

NORM_TOLERANCE = 1e-8

_SQ3 = math.sqrt(3.0)
_CFM4_NODES = (0.5 - _SQ3 / 6.0, 0.5 + _SQ3 / 6.0)
_CFM4_A1 = (3.0 - 2.0 * _SQ3) / 12.0
_CFM4_A2 = (3.0 + 2.0 * _SQ3) / 12.0


@dataclass(frozen=True)
class Segment:
    duration: float
    omega_x_start: float = 0.0
    omega_x_end: float = 0.0
    omega_y_start: float = 0.0
    omega_y_end: float = 0.0

    def __post_init__(self):
        vals = (self.duration, self.omega_x_start, self.omega_x_end, self.omega_y_start, self.omega_y_end)
        if not all(math.isfinite(v) for v in vals):
            raise ValueError("segment values must be finite")
        if self.duration <= 0:
            raise ValueError(f"segment duration must be positive, got {self.duration}")

    @classmethod
    def constant(cls, duration: float, omega_x: float = 0.0, omega_y: float = 0.0) -> "Segment":
        return cls(duration, omega_x, omega_x, omega_y, omega_y)

    @property
    def is_constant(self) -> bool:
        return self.omega_x_start == self.omega_x_end and self.omega_y_start == self.omega_y_end

    def fields(self, s: float) -> tuple[float, float]:
        """Fields at fraction ``s`` in [0, 1] of the segment."""
        ox = self.omega_x_start + s * (self.omega_x_end - self.omega_x_start)
        oy = self.omega_y_start + s * (self.omega_y_end - self.omega_y_start)
        return ox, oy


@dataclass(frozen=True)
class FieldSchedule:
    segments: tuple[Segment, ...]

    def __post_init__(self):
        segs = tuple(self.segments)
        if not segs:
            raise ValueError("a schedule needs at least one segment")
        object.__setattr__(self, "segments", segs)

    @property
    def total_duration(self) -> float:
        return math.fsum(s.duration for s in self.segments)

    def fields_at(self, t: float) -> tuple[float, float]:
        start = 0.0
        for seg in self.segments:
            if t <= start + seg.duration:
                return seg.fields(min(max((t - start) / seg.duration, 0.0), 1.0))
            start += seg.duration
        return self.segments[-1].fields(1.0)

    def reversed_negated(self) -> "FieldSchedule":
        """Fields of the time-reversed schedule whose Hamiltonian is ``-H``.

        Only the field part is negated here; pair it with negated couplings.
        """
        return FieldSchedule(
            tuple(
                Segment(s.duration, -s.omega_x_end, -s.omega_x_start, -s.omega_y_end, -s.omega_y_start)
                for s in reversed(self.segments)
            )
        )


@dataclass
class Trajectory:
    times: np.ndarray
    m_x: np.ndarray
    m_y: np.ndarray
    m_z: np.ndarray
    energy: np.ndarray
    final_state: StateVector
    n_steps: int = 0
    matvecs: int = 0

    def to_csv(self, fh=None) -> str | None:
        """Write columns ``t,m_x,m_y,m_z,energy``; returns the text when no file is given."""
        out = io.StringIO() if fh is None else fh
        w = csv.writer(out, lineterminator="\n")
        w.writerow(["t", "m_x", "m_y", "m_z", "energy"])
        for row in zip(self.times, self.m_x, self.m_y, self.m_z, self.energy):
            w.writerow([repr(float(v)) for v in row])
        return out.getvalue() if fh is None else None

    def window_mean(self, observable: str, start: float) -> float:
        """Trapezoid time-average of an observable over ``[start, t_end]``."""
        t = self.times
        y = getattr(self, observable)
        sel = t >= start - 1e-9 * max(1.0, abs(start))
        ts, ys = t[sel], y[sel]
        if ts.size == 1 or ts[-1] == ts[0]:
            return float(ys[-1])
        return float(np.trapezoid(ys, ts) / (ts[-1] - ts[0]))


# -- Krylov exponential ---------------------------------------------------------


class _Counter:
    def __init__(self):
        self.n = 0


def expv(matrix, vec: np.ndarray, tau: float, tol: float = 1e-12, m_max: int = 40, counter=None) -> np.ndarray:
    """``exp(-i tau H) vec`` for Hermitian ``H`` by Lanczos with full reorthogonalization.

    The standard estimate ``beta * h_{m+1,m} |[exp(-i tau T_m)]_{m,1}|`` is
    used as the stopping criterion.  When it does not fall below ``tol``
    within ``m_max`` iterations the interval is halved recursively.
    """
    beta0 = np.linalg.norm(vec)
    if not math.isfinite(beta0):
        raise NonFiniteState("state contains non-finite amplitudes")
    if beta0 == 0.0 or tau == 0.0:
        return vec.copy()
    dim = vec.size
    m_max = min(m_max, dim)
    basis = np.empty((m_max + 1, dim), dtype=complex)
    basis[0] = vec / beta0
    alpha = np.empty(m_max)
    beta = np.empty(m_max)
    for j in range(m_max):
        w = matrix @ basis[j]
        if counter is not None:
            counter.n += 1
        a = np.vdot(basis[j], w).real
        w -= a * basis[j]
        if j:
            w -= beta[j - 1] * basis[j - 1]
        w -= basis[: j + 1].T @ (basis[: j + 1].conj() @ w)
        b = np.linalg.norm(w)
        alpha[j] = a
        beta[j] = b
        m = j + 1
        breakdown = b <= 1e-13 * max(1.0, abs(a))
        if breakdown or m == m_max or (m >= 4 and m % 2 == 0):
            if m == 1:
                y = np.array([np.exp(-1j * tau * a)])
            else:
                evals, evecs = eigh_tridiagonal(alpha[:m], beta[: m - 1])
                y = evecs @ (np.exp(-1j * tau * evals) * evecs[0])
            err = beta0 * b * abs(y[-1])
            if breakdown or err < tol:
                return beta0 * (basis[:m].T @ y)
        if m < m_max:
            basis[m] = w / b
    half = expv(matrix, vec, 0.5 * tau, tol, m_max, counter)
    return expv(matrix, half, 0.5 * tau, tol, m_max, counter)


# -- observables ----------------------------------------------------------------


class Observer:
    """Magnetizations and energy per particle for a fixed coupling matrix."""

    def __init__(self, model: XYModel):
        n = model.n_spins
        self.n_spins = n
        self._sx = total_spin(n, "x")
        self._sy = total_spin(n, "y")
        self._sz_diag = total_spin(n, "z").diagonal().real
        self._hint = model.real_csr(0.0)

    def __call__(self, psi: np.ndarray, omega_x: float, omega_y: float) -> tuple[float, float, float, float]:
        n = self.n_spins
        sx = np.vdot(psi, self._sx @ psi).real
        sy = np.vdot(psi, self._sy @ psi).real
        sz = float(np.dot(np.abs(psi) ** 2, self._sz_diag))
        e_int = np.vdot(psi, self._hint @ psi).real
        energy = (e_int - omega_x * sx - omega_y * sy) / n
        return sx / n, sy / n, sz / n, energy


def _as_model(j) -> XYModel:
    return j if isinstance(j, XYModel) else XYModel(j)


def measure(state: StateVector, j: CouplingMatrix, omega_x: float = 0.0, omega_y: float = 0.0):
    """``(M_x, M_y, M_z, <H>/N)`` for the given state and fields."""
    obs = Observer(_as_model(j))
    return obs(state.amplitudes, omega_x, omega_y)


# -- propagation ----------------------------------------------------------------


def propagate(
    state: StateVector,
    j,
    schedule: FieldSchedule,
    step: float,
    sample_every: int = 100,
    scheme: str = "cfm4",
    tol: float = 1e-12,
    m_max: int = 40,
    observe: bool = True,
    sample_from: float = 0.0,
    hold_step: float | None = None,
) -> Trajectory:
    """Integrate the Schroedinger equation through ``schedule``.

    Each segment is cut into ``ceil(duration / step)`` equal steps
    (``hold_step`` instead of ``step`` on constant-field segments, where a
    single exponential per step is exact and the step only sets the
    sampling grid).
    Observables are recorded at ``t = 0``, after every ``sample_every``-th
    step and at the end.  ``j`` may be a :class:`CouplingMatrix` or a
    prebuilt :class:`XYModel`.  With ``observe=False`` only the end point is
    recorded.

    Raises:
        NormDrift: ``| ||psi|| - 1 |`` exceeded 1e-8 at a sample.
        NonFiniteState: the state overflowed or became NaN.
    """
    if step <= 0:
        raise ValueError("step must be positive")
    if sample_every < 1:
        raise ValueError("sample_every must be >= 1")
    if scheme not in ("cfm4", "midpoint"):
        raise ValueError(f"unknown scheme {scheme!r}")
    model = _as_model(j)
    if state.amplitudes.size != model.dimension:
        raise ValueError("state and Hamiltonian dimensions differ")
    obs = Observer(model)
    counter = _Counter()

    psi = state.amplitudes.copy()
    times, rows = [], []

    def record(t, fields):
        norm = np.linalg.norm(psi)
        if not math.isfinite(norm):
            raise NonFiniteState(f"non-finite state at t={t}")
        if abs(norm - 1.0) > NORM_TOLERANCE:
            raise NormDrift(f"norm drifted to {norm!r} at t={t}")
        times.append(t)
        rows.append(obs(psi, *fields))

    record(0.0, schedule.segments[0].fields(0.0))
    t0 = 0.0
    k_total = 0
    n_segments = len(schedule.segments)
    for si, seg in enumerate(schedule.segments):
        seg_step = hold_step if (hold_step and seg.is_constant) else step
        n_steps = max(1, math.ceil(seg.duration / seg_step - 1e-9))
        h = seg.duration / n_steps
        const_h = model.csr(*seg.fields(0.0)) if seg.is_constant else None
        for k in range(n_steps):
            if const_h is not None:
                psi = expv(const_h, psi, h, tol, m_max, counter)
            elif scheme == "midpoint":
                psi = expv(model.csr(*seg.fields((k + 0.5) / n_steps)), psi, h, tol, m_max, counter)
            else:
                f1 = seg.fields((k + _CFM4_NODES[0]) / n_steps)
                f2 = seg.fields((k + _CFM4_NODES[1]) / n_steps)
                fa = (2 * (_CFM4_A2 * f1[0] + _CFM4_A1 * f2[0]), 2 * (_CFM4_A2 * f1[1] + _CFM4_A1 * f2[1]))
                fb = (2 * (_CFM4_A1 * f1[0] + _CFM4_A2 * f2[0]), 2 * (_CFM4_A1 * f1[1] + _CFM4_A2 * f2[1]))
                psi = expv(model.csr(*fa), psi, 0.5 * h, tol, m_max, counter)
                psi = expv(model.csr(*fb), psi, 0.5 * h, tol, m_max, counter)
            k_total += 1
            is_last = si == n_segments - 1 and k == n_steps - 1
            t = t0 + (k + 1) * h if k < n_steps - 1 else t0 + seg.duration
            if is_last or (observe and k_total % sample_every == 0 and t >= sample_from - 1e-9 * h):
                record(t, seg.fields((k + 1) / n_steps))
        t0 += seg.duration
    times[-1] = schedule.total_duration

    arr = np.array(rows)
    return Trajectory(
        times=np.array(times),
        m_x=arr[:, 0],
        m_y=arr[:, 1],
        m_z=arr[:, 2],
        energy=arr[:, 3],
        final_state=StateVector(psi),
        n_steps=k_total,
        matvecs=counter.n,
    )
