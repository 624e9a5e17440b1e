import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from xyanneal.errors import AttemptsExhausted, DegenerateGeometry
from xyanneal.geometry import (
    DISORDER_PRESETS,
    HARD_SPHERE_DIAMETER,
    CouplingMatrix,
    DisorderTarget,
    PositionSet,
    SamplingConfig,
    calibrate_packing_fraction,
    compute_couplings,
    disorder_stats,
    mean_relative_disorder,
    sample_disordered,
    sample_positions,
)


def test_diameter_value():
    assert HARD_SPHERE_DIAMETER == pytest.approx(1.2407, abs=1e-4)
    # two spheres of this diameter each have unit volume
    assert 4 / 3 * math.pi * (HARD_SPHERE_DIAMETER / 2) ** 3 == pytest.approx(1.0)


@pytest.mark.parametrize("eta", [0.0, -0.1, 0.31, 0.9, 1.0])
def test_config_rejects_bad_packing(eta):
    with pytest.raises(ValueError):
        SamplingConfig(4, eta)


def test_config_rejects_bad_counts_and_seeds():
    with pytest.raises(ValueError):
        SamplingConfig(0, 0.1)
    with pytest.raises(ValueError):
        SamplingConfig(3, 0.1, seed=-1)
    with pytest.raises(ValueError):
        SamplingConfig(3, 0.1, seed=2**64)


def test_single_particle_inside_sphere():
    for seed in range(50):
        cfg = SamplingConfig(1, 0.2, seed)
        p = sample_positions(cfg)
        assert p.n_spins == 1
        assert np.linalg.norm(p.positions[0]) <= cfg.radius
        assert 4 / 3 * math.pi * cfg.radius**3 == pytest.approx(1 / 0.2)


@pytest.mark.parametrize("n,eta", [(2, 0.3), (8, 0.05), (12, 0.3), (20, 0.25)])
def test_hard_sphere_constraint_and_containment(n, eta):
    for seed in range(20):
        cfg = SamplingConfig(n, eta, seed)
        pos = sample_positions(cfg)
        d = np.linalg.norm(pos.positions[:, None] - pos.positions[None], axis=-1)
        assert d[np.triu_indices(n, 1)].min() >= HARD_SPHERE_DIAMETER
        assert np.all(np.linalg.norm(pos.positions, axis=1) <= cfg.radius)


def test_determinism():
    cfg = SamplingConfig(10, 0.2, 77)
    assert np.array_equal(sample_positions(cfg).positions, sample_positions(cfg).positions)
    other = sample_positions(SamplingConfig(10, 0.2, 78)).positions
    assert not np.array_equal(sample_positions(cfg).positions, other)


def test_attempts_exhausted():
    # 60 spheres at the maximal packing with a single try each cannot all fit
    with pytest.raises(AttemptsExhausted):
        sample_positions(SamplingConfig(60, 0.3, 1, max_attempts=1))


def _brute_force_sampler(n, eta, rng):
    """Naive reference: cube rejection for uniform points, pairwise loops for overlaps."""
    radius = (3 * n / eta / (4 * math.pi)) ** (1 / 3)
    pts = []
    while len(pts) < n:
        p = rng.uniform(-radius, radius, size=3)
        if p @ p > radius * radius:
            continue
        if all(math.dist(p, q) >= HARD_SPHERE_DIAMETER for q in pts):
            pts.append(p)
    return np.array(pts)


def _mean_nn(pos):
    d = np.linalg.norm(pos[:, None] - pos[None], axis=-1)
    np.fill_diagonal(d, np.inf)
    return d.min(axis=1).mean()


def test_nearest_neighbour_statistics_match_brute_force():
    n, eta, runs = 8, 0.05, 10_000
    ours = np.array([_mean_nn(sample_positions(SamplingConfig(n, eta, s)).positions) for s in range(runs)])
    rng = np.random.default_rng(2024)
    ref = np.array([_mean_nn(_brute_force_sampler(n, eta, rng)) for _ in range(runs)])
    se = math.sqrt(ours.var(ddof=1) / runs + ref.var(ddof=1) / runs)
    assert abs(ours.mean() - ref.mean()) <= 2 * se


# -- couplings ---------------------------------------------------------------


def _scalar_coupling(p, q, c3=1.0):
    dx, dy, dz = q[0] - p[0], q[1] - p[1], q[2] - p[2]
    r2 = dx * dx + dy * dy + dz * dz
    r = math.sqrt(r2)
    cos = dz / r
    return c3 / (r2 * r) * (1.0 - 3.0 * cos * cos)


def test_on_axis_pair():
    cm = compute_couplings(PositionSet(np.array([[0.0, 0, 0], [0, 0, 1]])))
    assert cm.j[0, 1] == -2.0


def test_magic_angle_vanishes():
    theta = math.acos(1 / math.sqrt(3))
    for r in (1.3, 2.0, 5.0):
        p = np.array([[0.0, 0, 0], [r * math.sin(theta), 0, r * math.cos(theta)]])
        assert abs(compute_couplings(PositionSet(p)).j[0, 1]) < 1e-15


def test_three_spin_hand_values_bit_exact():
    pts = np.array([[0.0, 0, 0], [1, 0, 0], [0, 0, 2]])
    cm = compute_couplings(PositionSet(pts))
    assert cm.j[0, 1] == 1.0
    assert cm.j[0, 2] == -0.25
    assert cm.j[1, 2] == pytest.approx(-1.4 / (5 * math.sqrt(5)), rel=1e-15)
    for a in range(3):
        for b in range(a + 1, 3):
            assert cm.j[a, b] == _scalar_coupling(pts[a], pts[b])
            assert cm.j[b, a] == cm.j[a, b]
        assert cm.j[a, a] == 0.0


def test_couplings_match_scalar_evaluator_for_samples():
    pos = sample_positions(SamplingConfig(9, 0.1, 5))
    cm = compute_couplings(pos, c3=1.0)
    p = pos.positions
    for a in range(9):
        for b in range(a + 1, 9):
            assert cm.j[a, b] == _scalar_coupling(p[a], p[b])


def test_coincident_spins_raise():
    with pytest.raises(DegenerateGeometry):
        compute_couplings(PositionSet(np.array([[1.0, 2, 3], [1.0, 2, 3]])))


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 10_000), st.floats(0, 2 * math.pi), st.floats(0.5, 3.0))
def test_rotation_and_scaling(seed, phi, lam):
    p = sample_positions(SamplingConfig(6, 0.2, seed)).positions
    j0 = compute_couplings(PositionSet(p)).j
    c, s = math.cos(phi), math.sin(phi)
    rot = np.array([[c, -s, 0], [s, c, 0], [0, 0, 1]])
    assert np.allclose(compute_couplings(PositionSet(p @ rot.T)).j, j0, rtol=1e-10, atol=1e-14)
    assert np.allclose(compute_couplings(PositionSet(p * lam)).j, j0 / lam**3, rtol=1e-10, atol=1e-14)


def test_coupling_matrix_validation():
    with pytest.raises(ValueError):
        CouplingMatrix(np.array([[0.0, 1.0], [2.0, 0.0]]))
    with pytest.raises(ValueError):
        CouplingMatrix(np.array([[1.0, 1.0], [1.0, 0.0]]))
    with pytest.raises(ValueError):
        CouplingMatrix(np.array([[0.0, np.nan], [np.nan, 0.0]]))


def test_json_round_trips():
    pos = sample_positions(SamplingConfig(5, 0.2, 9))
    assert np.array_equal(PositionSet.from_json(pos.to_json()).positions, pos.positions)
    cm = compute_couplings(pos, c3=2.5)
    back = CouplingMatrix.from_json(cm.to_json())
    assert np.array_equal(back.j, cm.j) and back.c3 == 2.5


# -- disorder statistics ---------------------------------------------------------


def _sort_median(xs):
    s = sorted(xs)
    m = len(s)
    return s[m // 2] if m % 2 else (s[m // 2 - 1] + s[m // 2]) / 2


def test_two_spin_stats():
    st_ = disorder_stats(CouplingMatrix(np.array([[0.0, -2.0], [-2.0, 0.0]])))
    assert st_.j_med == 2.0 and st_.sigma_j == 0.0 and st_.relative_disorder == 0.0


def test_four_spin_stats_against_sort_oracle():
    j = np.array([
        [0.0, 0.3, -1.2, 0.05],
        [0.3, 0.0, 0.7, -0.4],
        [-1.2, 0.7, 0.0, 0.1],
        [0.05, -0.4, 0.1, 0.0],
    ])
    maxima = [max(abs(v) for v in row) for row in j.tolist()]
    assert maxima == [1.2, 0.7, 1.2, 0.4]
    med = _sort_median(maxima)
    mean = sum(maxima) / 4
    sd = math.sqrt(sum((m - mean) ** 2 for m in maxima) / 4)
    st_ = disorder_stats(CouplingMatrix(j))
    assert st_.j_med == pytest.approx(med, rel=1e-15)
    assert st_.sigma_j == pytest.approx(sd, rel=1e-14)


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 10_000), st.floats(0.1, 10.0))
def test_stats_scaling_and_permutation(seed, lam):
    cm = compute_couplings(sample_positions(SamplingConfig(7, 0.2, seed)))
    base = disorder_stats(cm)
    scaled = disorder_stats(cm.scaled(lam))
    assert scaled.j_med == pytest.approx(lam * base.j_med, rel=1e-12)
    assert scaled.relative_disorder == pytest.approx(base.relative_disorder, rel=1e-12)
    perm = np.random.default_rng(seed).permutation(7)
    permuted = disorder_stats(CouplingMatrix(cm.j[np.ix_(perm, perm)]))
    assert permuted.j_med == base.j_med
    assert permuted.sigma_j == pytest.approx(base.sigma_j, rel=1e-12)


def test_normalized_has_unit_median():
    cm = compute_couplings(sample_positions(SamplingConfig(8, 0.1, 3)))
    assert disorder_stats(cm.normalized()).j_med == pytest.approx(1.0, rel=1e-14)


# -- disorder calibration -------------------------------------------------------


def test_sample_disordered_respects_window_and_is_deterministic():
    for regime in DISORDER_PRESETS.values():
        pos, cm, draws = sample_disordered(8, regime, 11)
        assert regime.accepts(disorder_stats(cm))
        pos2, cm2, draws2 = sample_disordered(8, regime, 11)
        assert draws == draws2 and np.array_equal(cm.j, cm2.j)


def test_window_without_tolerance_accepts_everything():
    t = DisorderTarget(0.1, 0.0, None)
    _, _, draws = sample_disordered(6, t, 3)
    assert draws == 1


def test_mean_disorder_decreases_with_packing():
    dense = mean_relative_disorder(8, 0.3, 200, 0)
    dilute = mean_relative_disorder(8, 0.02, 200, 0)
    assert dilute > dense


def test_calibration_hits_reachable_target():
    eta = calibrate_packing_fraction(8, 0.8, n_samples=100, seed=1, iterations=8)
    assert 1e-3 < eta < 0.3
    assert mean_relative_disorder(8, eta, 100, 1) == pytest.approx(0.8, abs=0.05)


def test_calibration_clamps_unreachable_target():
    # the ensemble-mean ratio cannot be pushed down to 0.1 at any allowed packing
    assert calibrate_packing_fraction(8, 0.1, n_samples=50, seed=1) == 0.3
