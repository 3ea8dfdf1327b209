import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from bcgain.canonical import (REGIMES, RegimeQuad, ShapeStructure, canonical_failure_bound,
                              canonical_failure_bound_terms, continuous_position_variance,
                              continuous_stationary_covariance, dominance_margin, h2_norm_squared,
                              multijoint_structure, ordering_index, regime_ordering,
                              shape_condition_margins)
from bcgain.dynamics import GainSetting, PlantModel, build_error_dynamics, discretize
from bcgain.errors import ConfigError
from bcgain.lyapunov import solve_continuous_lyapunov, stationary_proxy

from conftest import random_psd


def test_stationary_covariance_co():
    np.testing.assert_array_equal(continuous_stationary_covariance(50, 40, 1, 1), np.diag([0.625, 31.25]))


def test_stationary_covariance_no_noise():
    np.testing.assert_array_equal(continuous_stationary_covariance(50, 40, 1, 0.0), np.zeros((2, 2)))


@pytest.mark.parametrize("alpha,beta,m,s2", [(100, 20, 1, 1), (50, 40, 1, 1), (8, 4, 2, 1), (3, 70, 0.5, 2.5)])
def test_stationary_covariance_solves_lyapunov(alpha, beta, m, s2):
    sys = build_error_dynamics(PlantModel.scalar(m, 0.01), GainSetting.scalar(alpha, beta))
    p = continuous_stationary_covariance(alpha, beta, m, s2)
    q = s2 * sys.b_c @ sys.b_c.T
    assert np.linalg.norm(sys.a_c @ p + p @ sys.a_c.T + q) <= 1e-10 * (1 + np.linalg.norm(q))
    np.testing.assert_allclose(solve_continuous_lyapunov(sys.a_c, q), p, rtol=1e-10, atol=1e-12 * np.abs(p).max())


def test_position_variance_table_values():
    assert continuous_position_variance(100, 40, 1) == 1.25
    assert continuous_position_variance(100, 20, 1) == 2.5
    assert continuous_position_variance(50, 40, 1) == 0.625


@settings(max_examples=100, deadline=None)
@given(a=st.floats(0.1, 500), b=st.floats(0.1, 500), c=st.floats(0.01, 100), s2=st.floats(0.0, 10))
def test_position_variance_ratio_invariant(a, b, c, s2):
    assert continuous_position_variance(c * a, c * b, s2) == pytest.approx(
        continuous_position_variance(a, b, s2), rel=1e-14)


def test_h2_values():
    assert h2_norm_squared(50, 40) == pytest.approx(0.625, rel=1e-14)
    assert h2_norm_squared(1, 1) == pytest.approx(0.5, rel=1e-14)


def test_h2_matches_variance_random():
    rng = np.random.default_rng(0)
    for _ in range(20):
        a, b = rng.uniform(0.5, 300, 2)
        m = rng.uniform(0.2, 5)
        assert h2_norm_squared(a, b, m) == pytest.approx(continuous_position_variance(a, b, 1.0), rel=1e-14)


def test_h2_matches_quadrature():
    # independent route: (1/pi) int_0^inf |H(jw)|^2 dw
    from scipy.integrate import quad
    a, b, m = 50.0, 40.0, 1.0
    f = lambda w: (a / m) ** 2 / ((a / m - w * w) ** 2 + (b / m * w) ** 2)
    val, _ = quad(f, 0, np.inf, limit=500)
    assert val / math.pi == pytest.approx(h2_norm_squared(a, b, m), rel=1e-9)


def test_canonical_bound_large_radius():
    assert canonical_failure_bound(50, 40, 0.02, 50.0, 50, 1.0) == 0.0


def test_canonical_bound_scale_invariance():
    for r in (0.05, 0.3, 0.8):
        assert canonical_failure_bound(100, 80, 0.02, r, 50, 1.0) == canonical_failure_bound(
            50, 40, 0.02, r, 50, 1.0)


def test_canonical_bound_clipped():
    terms = canonical_failure_bound_terms(50, 40, 0.02, 0.3, 50, 1.0)
    assert terms.exponent == pytest.approx(-3.6, rel=1e-14)
    assert terms.raw == pytest.approx(102 * math.exp(-3.6), rel=1e-14)
    assert terms.clipped == 1.0


def test_ordering_index_trivial():
    assert ordering_index(ShapeStructure(1.0, 1.0, 0.0)) == 1.0
    assert ordering_index(ShapeStructure(1.0, 1.0, math.sqrt(0.75))) == pytest.approx(4.0, rel=1e-14)


def test_regime_ordering_table_quad():
    rep = regime_ordering(RegimeQuad(50, 100, 20, 40), continuous_position_variance)
    assert rep.values == {"CO": 0.625, "SO": 1.25, "CU": 1.25, "SU": 2.5}
    assert rep.holds and rep.so_cu_relation == "SO=CU" and rep.so_minus_cu == 0.0
    assert rep.normalized() == {"CO": 1.0, "SO": 2.0, "CU": 2.0, "SU": 4.0}


def test_regime_ordering_constant():
    rep = regime_ordering(RegimeQuad(1, 2, 1, 2), lambda a, b: 3.0)
    assert rep.holds and rep.so_cu_relation == "SO=CU"


def test_regime_ordering_reports_violation():
    rep = regime_ordering(RegimeQuad(1, 2, 1, 2), lambda a, b: -a)
    assert not rep.holds
    assert set(rep.violations) == {"CO<=SO", "CU<=SU"}


def test_regime_ordering_system_dependent_sign():
    rep = regime_ordering(RegimeQuad(50, 100, 20, 40), lambda a, b: a / b**2)
    assert rep.holds and rep.so_cu_relation == "SO<CU" and rep.so_minus_cu < 0


def test_quad_validation():
    with pytest.raises(ConfigError):
        RegimeQuad(100, 50, 20, 40)
    q = RegimeQuad(50, 100, 20, 40)
    assert (q.co.kp[0], q.co.kd[0]) == (50, 40)
    assert (q.su.kp[0], q.su.kd[0]) == (100, 20)
    assert (q.so.kp[0], q.so.kd[0], q.cu.kp[0], q.cu.kd[0]) == (100, 40, 50, 20)


def test_multijoint_scalar_values():
    s = multijoint_structure(PlantModel.scalar(1.0, 0.02), GainSetting.scalar(50, 40), [[1.0]])
    assert s.l == 1.0
    assert s.b == pytest.approx(0.25, rel=1e-14)
    assert s.rho_star == pytest.approx(math.exp(-0.4), rel=1e-15)
    assert s.rho_star == pytest.approx(0.6703, abs=1e-4)
    np.testing.assert_array_equal(s.x_bar, [[1.0]])


def test_multijoint_zero_noise():
    plant = PlantModel.scalar(1.0, 0.02)
    gains = GainSetting.scalar(50, 40)
    s = multijoint_structure(plant, gains, [[0.0]])
    assert s.l == 0.0 and ordering_index(s) == 0.0
    assert stationary_proxy(discretize(plant, gains), [[0.0]]).x[0, 0] == 0.0


def test_multijoint_identical_joints():
    one = multijoint_structure(PlantModel.scalar(1.5, 0.02), GainSetting.scalar(30, 12))
    two = multijoint_structure(PlantModel.diagonal([1.5, 1.5], 0.02), GainSetting([30, 30], [12, 12]))
    assert (one.l, one.b, one.rho_star) == (two.l, two.b, two.rho_star)


def test_multijoint_rejects_coupled_mass():
    with pytest.raises(ConfigError):
        multijoint_structure(PlantModel(np.array([[1.0, 0.1], [0.1, 1.0]]), 0.02), GainSetting([1, 1], [1, 1]))


def test_psi_dominance_co():
    plant = PlantModel.scalar(1.0, 0.02)
    gains = GainSetting.scalar(50, 40)
    s = multijoint_structure(plant, gains)
    x_inf = stationary_proxy(discretize(plant, gains), [[1.0]]).x
    assert dominance_margin(s, x_inf) >= 0
    assert ordering_index(s) == pytest.approx(0.25 / (1 - math.exp(-0.8)), rel=1e-14)


def test_shape_conditions_with_identity_reference(regime_loops, quad):
    # with identity references only the label inequality holds: the velocity
    # row of B exceeds b and ||A||_2 > 1 for every regime
    plant = PlantModel.scalar(1.0, 0.02)
    for regime in REGIMES:
        s = multijoint_structure(plant, quad.gains(regime))
        margins = shape_condition_margins(regime_loops[regime], [[1.0]], s)
        assert margins.label >= 0
        assert margins.injection < 0 and margins.contraction < 0 and not margins.holds


def test_shape_conditions_hold_for_scalar_normal_loop():
    from bcgain.dynamics import DiscreteClosedLoop
    loop = DiscreteClosedLoop.from_matrices([[0.5]], [[1.0]], [[1.0]])
    assert shape_condition_margins(loop, [[1.0]], ShapeStructure(1.0, 1.0, 0.5)).holds


def test_psi_dominance_fails_for_soft_heavy_joint():
    # outside the published gain range the per-joint reduction is not an
    # upper bound: alpha = 1, m = 1 gives Psi ~ X_inf / 2
    plant = PlantModel.scalar(1.0, 0.02)
    gains = GainSetting.scalar(1.0, 1.0)
    s = multijoint_structure(plant, gains)
    x_inf = stationary_proxy(discretize(plant, gains), [[1.0]]).x
    assert dominance_margin(s, x_inf) < 0


@pytest.mark.parametrize("seed", range(5))
def test_psi_dominance_random_multijoint(seed):
    rng = np.random.default_rng(seed)
    n = int(rng.integers(1, 7))
    plant = PlantModel.diagonal(np.exp(rng.uniform(np.log(0.5), np.log(2.0), n)), 0.02)
    gains = GainSetting(np.exp(rng.uniform(np.log(5), np.log(200), n)),
                        np.exp(rng.uniform(np.log(5), np.log(200), n)))
    sigma = random_psd(rng, n)
    s = multijoint_structure(plant, gains, sigma)
    x_inf = stationary_proxy(discretize(plant, gains), sigma).x
    assert dominance_margin(s, x_inf) >= -1e-10


def test_grid_monotonicity_continuous():
    axis = np.linspace(5, 200, 50)
    vals = np.array([[continuous_position_variance(a, b) for b in axis] for a in axis])
    assert np.all(np.diff(vals, axis=0) > 0)
    assert np.all(np.diff(vals, axis=1) < 0)


def test_grid_monotonicity_discrete():
    axis = np.linspace(5, 200, 50)
    plant = PlantModel.scalar(1.0, 0.02)
    vals = np.array([[stationary_proxy(discretize(plant, GainSetting.scalar(a, b)), [[1.0]]).x[0, 0]
                      for b in axis] for a in axis])
    assert np.all(np.diff(vals, axis=0) > 0)
    assert np.all(np.diff(vals, axis=1) < 0)
