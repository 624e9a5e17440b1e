"""Closed-form references for checking the propagator.

* ``kubo_single_spin``: linear response of one spin in a static x-field to a
  weak y-field switched on at ``t = 0``.
* ``two_spin_reference``: exact flip-flop dynamics of an XY-coupled pair
  started in ``|up, down>``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .evolution import FieldSchedule, Segment, propagate
from .geometry import CouplingMatrix
from .operators import StateVector, polarized_state


@dataclass(frozen=True)
class KuboParams:
    b_field: float
    probe: float
    sx_expect: float = 0.5
    time: float = 0.0

    def __post_init__(self):
        if not (math.isfinite(self.b_field) and math.isfinite(self.probe)):
            raise ValueError("fields must be finite")
        if abs(self.sx_expect) > 0.5:
            raise ValueError("|<S_x>| cannot exceed 1/2")
        if not self.time >= 0:
            raise ValueError("time must be nonnegative")


def kubo_single_spin(p: KuboParams) -> float:
    """``<S_y>(t) = B_y <S_x> (1 - cos(B t)) / B`` to first order in ``B_y``.

    At ``B = 0`` the expression is taken at its limit, zero.
    """
    if p.b_field == 0.0:
        return 0.0
    return p.probe * p.sx_expect * (1.0 - math.cos(p.b_field * p.time)) / p.b_field


def kubo_vs_dynamics(b_field: float, probe: float, t_max: float, step: float = 0.05) -> float:
    """Largest deviation between simulated ``<S_y>(t)`` and the Kubo result on ``[0, t_max]``.

    The spin starts x-polarized (``<S_x> = 1/2``) and evolves under
    ``H = -B S_x - B_y S_y``.  The difference is second order in the probe.
    """
    sched = FieldSchedule((Segment.constant(t_max, b_field, probe),))
    traj = propagate(polarized_state(1, "x"), CouplingMatrix.zeros(1), sched, step, sample_every=1)
    ref = np.array([kubo_single_spin(KuboParams(b_field, probe, 0.5, float(t))) for t in traj.times])
    return float(np.max(np.abs(traj.m_y - ref)))


def two_spin_reference(j: float, t: float) -> tuple[float, float, StateVector]:
    """``(<Sz_1>, <Sz_2>, psi(t))`` for ``H = J (Sx Sx + Sy Sy)`` from ``|up, down>``.

    Spin 1 is bit 0, so ``|up, down>`` is basis index 1 and ``|down, up>`` is 2.
    """
    c = math.cos(j * t)
    amp = np.zeros(4, dtype=complex)
    amp[1] = math.cos(j * t / 2)
    amp[2] = -1j * math.sin(j * t / 2)
    return 0.5 * c, -0.5 * c, StateVector(amp)
