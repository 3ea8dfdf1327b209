import math

import numpy as np
import pytest

from bcgain.canonical import REGIMES
from bcgain.errors import ConfigError, UnstableLoop
from bcgain.experiments import (TABLE1_COLUMNS, ExperimentConfig, convergence_slope, envelopes_fig2,
                                failure_curve, grid_axis, regime_loop, regime_rows, sweep_heatmap,
                                zoh_inheritance_study)
from bcgain.montecarlo import EnsembleConfig
from bcgain.output import read_csv, to_csv

SMALL = ExperimentConfig(n_rollouts=2000)


def test_analytic_rows():
    rows = regime_rows(ExperimentConfig(), simulate_failures=False)
    assert [r.regime for r in rows] == list(REGIMES)
    by = {r.regime: r for r in rows}
    assert by["CO"].x_d == pytest.approx(0.012480, abs=5e-7)
    assert by["SU"].x_d_ratio == pytest.approx(3.99315, abs=1e-4)
    assert [round(r.rho, 4) for r in rows] == [0.9745, 0.9478, 0.9431, 0.8187]
    assert [r.x_c for r in rows] == [0.625, 1.25, 1.25, 2.5]
    assert all(math.isnan(r.fail_hat) for r in rows)


def test_rows_deterministic():
    a = regime_rows(SMALL)
    b = regime_rows(SMALL)
    assert a == b


def test_rows_parallel_width_invariant():
    a = regime_rows(SMALL)
    b = regime_rows(ExperimentConfig(n_rollouts=2000, parallel_width=4))
    assert [r.fail_hat for r in a] == [r.fail_hat for r in b]


def test_rows_csv_round_trip():
    rows = regime_rows(SMALL)
    text = to_csv(TABLE1_COLUMNS, [[getattr(r, c) for c in TABLE1_COLUMNS] for r in rows])
    header, back = read_csv(text)
    assert header == TABLE1_COLUMNS
    for row, parsed in zip(rows, back):
        assert parsed == [getattr(row, c) for c in TABLE1_COLUMNS]


def test_unstable_regime_reported():
    # exact ZOH keeps a Hurwitz loop inside the unit disk, so only a
    # near-zero stiffness can cross the stability margin
    with pytest.raises(UnstableLoop) as exc:
        regime_loop(ExperimentConfig(alpha_l=1e-10, alpha_h=1e-9, beta_l=1, beta_h=2), "SU")
    assert "SU" in str(exc.value)


def test_envelopes_shape():
    env = envelopes_fig2(ExperimentConfig(n_rollouts=1000, horizon=20))
    assert set(env) == set(REGIMES)
    for stats in env.values():
        assert stats.envelopes.shape == (21, 3)
        assert stats.r95_theory > 0


def test_grid_axis():
    ax = grid_axis(5, 200, 50)
    assert ax.size == 50 and ax[0] == pytest.approx(5) and ax[-1] == pytest.approx(200)
    merged = grid_axis(5, 200, 50, extra=(50, 100))
    assert 50.0 in merged and 100.0 in merged
    with pytest.raises(ConfigError):
        grid_axis(200, 5, 10)
    with pytest.raises(ConfigError):
        grid_axis(5, 200, 1)
    with pytest.raises(ConfigError):
        grid_axis(5, 200, 10, spacing="cubic")


def test_sweep_matches_regime_rows():
    cfg = ExperimentConfig()
    cells = sweep_heatmap(resolution=12, quad=cfg.quad)
    lookup = {(c.kp, c.kd): c for c in cells}
    rows = regime_rows(cfg, simulate_failures=False)
    for row in rows:
        cell = lookup[(row.kp, row.kd)]
        assert cell.x_inf_d == pytest.approx(row.x_d, rel=1e-12)
        assert cell.x_inf_normalized == pytest.approx(row.x_d_ratio, rel=1e-12)


def test_sweep_monotone():
    cells = sweep_heatmap(resolution=20)
    grid = np.array([c.x_inf_d for c in cells]).reshape(20, 20)
    assert np.all(np.diff(grid, axis=0) > 0)
    assert np.all(np.diff(grid, axis=1) < 0)


def test_sweep_marks_unstable_cells():
    cells = sweep_heatmap(kp_range=(1e-10, 1.0), kd_range=(5, 200), resolution=6, reference=(1.0, 5.0))
    bad = [c for c in cells if not c.stable]
    assert len(bad) < len(cells)
    assert bad and all(math.isnan(c.x_inf_d) for c in bad)


def test_failure_curve():
    cfg = ExperimentConfig()
    pts = failure_curve(cfg.quad, [0.1, 0.3, 0.6, 1.0], EnsembleConfig(3000, 50, seed=1))
    for regime, curve in pts.items():
        emp = [p.empirical for p in curve]
        assert emp == sorted(emp, reverse=True)
        assert all(p.bound >= p.empirical for p in curve)
    assert pts["CO"][1].gamma < pts["SU"][1].gamma


def test_inheritance_records():
    recs = zoh_inheritance_study(50, 40)
    assert [r.dt for r in recs] == [0.02, 0.01, 0.005, 0.0025]
    errs = [r.rel_error for r in recs]
    assert errs == sorted(errs, reverse=True)
    assert all(r.x_c == 0.625 for r in recs)
    # exact ZOH converges at second order
    assert convergence_slope(recs) == pytest.approx(2.0, abs=0.1)


def test_inheritance_rejects_unsorted_dts():
    with pytest.raises(ConfigError):
        zoh_inheritance_study(50, 40, dts=(0.01, 0.02))
