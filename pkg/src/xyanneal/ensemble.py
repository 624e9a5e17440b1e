"""Disorder ensembles: seeding, (parallel) execution and aggregation.

Realization ``k`` of an ensemble depends only on ``derive_seed(master, k)``.
Realizations may run in worker processes in any order; results are always
aggregated in index order, so summaries are bit-identical for any number of
workers.  BLAS is pinned to one thread inside every realization for the
same reason.
"""

from __future__ import annotations

import math
import traceback
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np
from threadpoolctl import threadpool_limits

from .errors import EnsembleFailed, XYAnnealError
from .geometry import DISORDER_PRESETS, DisorderTarget, disorder_stats, sample_disordered
from .operators import XYModel
from .protocols import (
    DEFAULT_HOLD_STEP,
    DEFAULT_MEASURE_DELAY,
    DEFAULT_OMEGA_X0,
    DEFAULT_PROBE,
    DEFAULT_PROBE_GRID,
    DEFAULT_STEADY_WINDOW,
    DEFAULT_STEP,
    DEFAULT_WAIT,
    hysteresis_sweep,
    in_medium_units,
    scan_energy,
)
from .spectra import ground_state_energy

_MASK64 = (1 << 64) - 1
_GOLDEN = 0x9E3779B97F4A7C15


def _mix64(z: int) -> int:
    # SplitMix64 finalizer; a bijection on 64-bit integers
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9 & _MASK64
    z = (z ^ (z >> 27)) * 0x94D049BB133111EB & _MASK64
    return z ^ (z >> 31)


def derive_seed(master_seed: int, index: int) -> int:
    """Seed of realization ``index``; injective in ``index`` for a fixed master seed."""
    if not 0 <= master_seed <= _MASK64 or not 0 <= index <= _MASK64:
        raise ValueError("seeds and indices must be unsigned 64-bit integers")
    return _mix64((_mix64(master_seed) + index * _GOLDEN) & _MASK64)


@dataclass(frozen=True)
class SweepParams:
    """What each realization computes.

    ``kind="hysteresis"`` runs the ZFA/FA susceptibility sweep,
    ``kind="energy"`` only the post-ramp energy scan.
    """

    kind: str = "hysteresis"
    ramp_speeds: tuple = (0.05, 0.2, 1.0, 5.0)
    omega_x0: float = DEFAULT_OMEGA_X0
    probe_grid: tuple = DEFAULT_PROBE_GRID
    probe: float = DEFAULT_PROBE
    wait_time: float = DEFAULT_WAIT
    measure_delay: float = DEFAULT_MEASURE_DELAY
    steady_window: float = DEFAULT_STEADY_WINDOW
    step: float = DEFAULT_STEP
    hold_step: float | None = DEFAULT_HOLD_STEP
    mirror: bool = True

    def __post_init__(self):
        if self.kind not in ("hysteresis", "energy"):
            raise ValueError(f"kind must be hysteresis or energy, got {self.kind!r}")
        object.__setattr__(self, "ramp_speeds", tuple(float(v) for v in self.ramp_speeds))
        object.__setattr__(self, "probe_grid", tuple(float(v) for v in self.probe_grid))
        if not self.ramp_speeds or any(not v > 0 for v in self.ramp_speeds):
            raise ValueError("ramp speeds must be positive")


@dataclass(frozen=True)
class EnsembleConfig:
    master_seed: int
    n_spins: int
    n_realizations: int = 100
    disorder: DisorderTarget = DISORDER_PRESETS["strong"]
    sweep: SweepParams = SweepParams()
    max_failure_fraction: float = 0.2

    def __post_init__(self):
        if self.n_realizations < 1:
            raise ValueError("n_realizations must be >= 1")
        if not 0 <= self.master_seed <= _MASK64:
            raise ValueError("master_seed must be an unsigned 64-bit integer")
        if self.n_spins < 2:
            raise ValueError("an ensemble needs at least two spins")

    def seeds(self) -> list[int]:
        return [derive_seed(self.master_seed, k) for k in range(self.n_realizations)]


@dataclass(frozen=True)
class RealizationResult:
    index: int
    seed: int
    values: dict  # quantity -> 1-D array over the speed grid
    info: dict = field(default_factory=dict)  # scalar per-realization data
    error: str | None = None


@dataclass(frozen=True)
class Stat:
    mean: np.ndarray
    std: np.ndarray
    sem: np.ndarray  # NaN when only one realization succeeded


@dataclass(frozen=True)
class EnsembleSummary:
    grid: np.ndarray
    stats: dict  # quantity -> Stat
    n_effective: int
    failed_realizations: list  # (index, seed, message)
    realizations: list  # successful RealizationResult, by index
    mean_ground_energy: float = math.nan

    def combined_sem(self, a: str, b: str) -> np.ndarray:
        """Standard error of ``mean(a) - mean(b)`` for independent estimates."""
        return np.sqrt(self.stats[a].sem ** 2 + self.stats[b].sem ** 2)


def run_realization(config: EnsembleConfig, index: int) -> RealizationResult:
    """Sample realization ``index`` and run the configured sweep on it."""
    seed = derive_seed(config.master_seed, index)
    sw = config.sweep
    with threadpool_limits(limits=1):
        _, cm, draws = sample_disordered(config.n_spins, config.disorder, seed)
        stats = disorder_stats(cm)
        model = XYModel(in_medium_units(cm))
        eg = ground_state_energy(model)
        info = {"draws": draws, "j_med": stats.j_med, "sigma_j": stats.sigma_j,
                "relative_disorder": stats.relative_disorder, "ground_energy": eg}
        if sw.kind == "energy":
            pts = scan_energy(model, sw.omega_x0, sw.ramp_speeds, sw.probe, sw.step, ground_energy=eg)
            values = {"epsilon": [p.epsilon for p in pts]}
        else:
            pts = hysteresis_sweep(model, sw.omega_x0, sw.ramp_speeds, sw.probe_grid, sw.step,
                                   sw.wait_time, sw.measure_delay, sw.steady_window,
                                   ground_energy=eg, mirror=sw.mirror, hold_step=sw.hold_step)
            values = {
                "epsilon": [p.epsilon for p in pts],
                "chi_zfa": [p.chi_zfa for p in pts],
                "chi_zfa_fit_err": [p.chi_zfa_err for p in pts],
                "chi_fa": [p.chi_fa for p in pts],
                "chi_fa_fit_err": [p.chi_fa_err for p in pts],
            }
    values = {k: np.asarray(v, dtype=float) for k, v in values.items()}
    values["eps_over_eg"] = values["epsilon"] / abs(eg)
    return RealizationResult(index, seed, values, info)


def _guarded(fn, config, index) -> RealizationResult:
    try:
        return fn(config, index)
    except XYAnnealError as exc:
        return RealizationResult(index, derive_seed(config.master_seed, index), {}, {},
                                 f"{type(exc).__name__}: {exc}")
    except Exception:  # noqa: BLE001  (recorded, budgeted below)
        return RealizationResult(index, derive_seed(config.master_seed, index), {}, {},
                                 traceback.format_exc(limit=3))


def aggregate(grid, results: list[RealizationResult], n_realizations: int,
              max_failure_fraction: float = 0.2) -> EnsembleSummary:
    """Mean, sample std (ddof=1) and SEM over realizations, in index order.

    ``eps_over_mean_eg`` (energy over the ensemble-mean ground-state
    energy) is added whenever ground energies are available.
    """
    results = sorted(results, key=lambda r: r.index)
    ok = [r for r in results if r.error is None]
    failed = [(r.index, r.seed, r.error) for r in results if r.error is not None]
    if len(failed) > max_failure_fraction * n_realizations:
        raise EnsembleFailed(f"{len(failed)} of {n_realizations} realizations failed; first: {failed[0][2]}")
    if not ok:
        raise EnsembleFailed("no realization succeeded")
    n = len(ok)
    keys = list(ok[0].values)
    data = {k: np.array([r.values[k] for r in ok]) for k in keys}
    eg_mean = math.nan
    if "ground_energy" in ok[0].info and "epsilon" in data:
        eg_mean = math.fsum(r.info["ground_energy"] for r in ok) / n
        data["eps_over_mean_eg"] = data["epsilon"] / abs(eg_mean)
    stats = {}
    for k, arr in data.items():
        mean = arr.mean(axis=0)
        if n > 1:
            std = arr.std(axis=0, ddof=1)
            sem = std / math.sqrt(n)
        else:
            std = np.zeros_like(mean)
            sem = np.full_like(mean, np.nan)
        stats[k] = Stat(mean, std, sem)
    return EnsembleSummary(np.asarray(grid, dtype=float), stats, n, failed, ok, eg_mean)


def run_ensemble(config: EnsembleConfig, threads: int = 1, realization_fn=None,
                 order=None) -> EnsembleSummary:
    """Run every realization and aggregate.

    ``threads`` is the number of worker processes (1 runs inline).
    ``realization_fn(config, index)`` defaults to :func:`run_realization`
    and must be a module-level function when ``threads > 1``.  ``order``
    permutes the execution order, which never affects the result.
    """
    fn = realization_fn or run_realization
    indices = list(range(config.n_realizations)) if order is None else [int(i) for i in order]
    if sorted(indices) != list(range(config.n_realizations)):
        raise ValueError("order must be a permutation of the realization indices")
    if threads <= 1:
        results = [_guarded(fn, config, k) for k in indices]
    else:
        with ProcessPoolExecutor(max_workers=threads) as pool:
            results = list(pool.map(_guarded, [fn] * len(indices), [config] * len(indices), indices))
    return aggregate(config.sweep.ramp_speeds, results, config.n_realizations, config.max_failure_fraction)
