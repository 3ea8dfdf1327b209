"""Reproduction drivers for the canonical scalar example: the regime table,
envelope/failure curves, the gain-grid sweep and the small-dt study."""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass

import numpy as np

from .bounds import FailureBoundQuery, amplification_index, failure_bound, r95_threshold
from .canonical import REGIMES, RegimeQuad, continuous_position_variance
from .dynamics import GainSetting, PlantModel, discretize
from .errors import ConfigError, UnstableLoop
from .lyapunov import stationary_proxy
from .montecarlo import EnsembleConfig, NoiseModel, simulate

__all__ = [
    "ExperimentConfig",
    "Table1Row",
    "SweepCell",
    "FailureCurvePoint",
    "InheritanceRecord",
    "TABLE1_COLUMNS",
    "regime_loop",
    "regime_rows",
    "reproduce_table1",
    "envelopes_fig2",
    "sweep_heatmap",
    "grid_axis",
    "failure_curve",
    "zoh_inheritance_study",
    "convergence_slope",
]


@dataclass(frozen=True)
class ExperimentConfig:
    """Defaults reproduce the published scalar setup."""

    m: float = 1.0
    dt: float = 0.02
    alpha_l: float = 50.0
    alpha_h: float = 100.0
    beta_l: float = 20.0
    beta_h: float = 40.0
    sigma2: float = 1.0
    n_rollouts: int = 50_000
    horizon: int = 50
    radius: float = 0.3
    seed: int = 42
    parallel_width: int = 1

    @property
    def quad(self):
        return RegimeQuad(self.alpha_l, self.alpha_h, self.beta_l, self.beta_h)

    @property
    def plant(self):
        return PlantModel.scalar(self.m, self.dt)

    @property
    def noise(self):
        return NoiseModel.gaussian(self.sigma2)

    @property
    def ensemble(self):
        return EnsembleConfig(self.n_rollouts, self.horizon, self.seed, self.parallel_width)

    def to_dict(self):
        return asdict(self)


@dataclass(frozen=True)
class Table1Row:
    regime: str
    kp: float
    kd: float
    rho: float
    x_c: float
    x_d: float
    x_d_ratio: float
    fail_hat: float = math.nan
    fail_ci: float = math.nan


TABLE1_COLUMNS = [f.name for f in Table1Row.__dataclass_fields__.values()]


def regime_loop(config, regime):
    alpha, beta = config.quad.point(regime)
    try:
        return discretize(config.plant, GainSetting.scalar(alpha, beta))
    except UnstableLoop as exc:
        raise UnstableLoop(exc.rho, exc.margin, context=f"regime {regime}") from None


def regime_rows(config: ExperimentConfig, simulate_failures=True):
    """Analytic columns for all four regimes, plus Monte Carlo failure rates
    when ``simulate_failures`` is set. Every regime uses the same seed."""
    loops = {r: regime_loop(config, r) for r in REGIMES}
    x_d = {r: float(stationary_proxy(loops[r], [[config.sigma2]]).x[0, 0]) for r in REGIMES}
    fails = {}
    if simulate_failures:
        def run(regime):
            ens = simulate(loops[regime], config.noise, config.ensemble)
            return ens.stats(config.radius)

        if config.parallel_width > 1:
            with ThreadPoolExecutor(max_workers=min(4, config.parallel_width)) as pool:
                fails = dict(zip(REGIMES, pool.map(run, REGIMES)))
        else:
            fails = {r: run(r) for r in REGIMES}
    rows = []
    for regime in REGIMES:
        alpha, beta = config.quad.point(regime)
        st = fails.get(regime)
        rows.append(Table1Row(
            regime=regime,
            kp=alpha,
            kd=beta,
            rho=loops[regime].spectral_radius,
            x_c=continuous_position_variance(alpha, beta, config.sigma2),
            x_d=x_d[regime],
            x_d_ratio=x_d[regime] / x_d["CO"],
            fail_hat=st.failure_rate if st else math.nan,
            fail_ci=st.ci_halfwidth if st else math.nan,
        ))
    return rows


def reproduce_table1(config: ExperimentConfig = ExperimentConfig()):
    return regime_rows(config, simulate_failures=True)


def envelopes_fig2(config: ExperimentConfig = ExperimentConfig(), levels=(50, 95, 99)):
    """Per-regime percentile envelopes of ``||e_t||`` for ``t = 0..T``."""
    out = {}
    for regime in REGIMES:
        loop = regime_loop(config, regime)
        ens = simulate(loop, config.noise, config.ensemble)
        x_inf = stationary_proxy(loop, [[config.sigma2]]).x
        out[regime] = ens.stats(config.radius, tuple(levels), r95_theory=r95_threshold(x_inf))
    return out


@dataclass(frozen=True)
class SweepCell:
    kp: float
    kd: float
    x_inf_d: float
    x_inf_normalized: float
    log10_normalized: float
    stable: bool = True


def grid_axis(lo, hi, resolution, spacing="log", extra=()):
    if not 0 < lo < hi:
        raise ConfigError(f"grid range must satisfy 0 < lo < hi, got ({lo}, {hi})")
    if resolution < 2:
        raise ConfigError("grid resolution must be at least 2")
    if spacing == "log":
        axis = np.geomspace(lo, hi, int(resolution))
    elif spacing == "linear":
        axis = np.linspace(lo, hi, int(resolution))
    else:
        raise ConfigError(f"unknown grid spacing {spacing!r}")
    if extra:
        axis = np.union1d(axis, np.asarray(extra, dtype=float))
    return axis


def _x_inf(plant, kp, kd, sigma2):
    loop = discretize(plant, GainSetting.scalar(kp, kd))
    return float(stationary_proxy(loop, [[sigma2]]).x[0, 0])


def sweep_heatmap(kp_range=(5.0, 200.0), kd_range=(5.0, 200.0), resolution=50, m=1.0,
                  dt=0.02, sigma2=1.0, spacing="log", quad=None, reference=(50.0, 40.0)):
    """Stationary discrete proxy over a ``kp x kd`` grid, row-major in ``kp``.

    When ``quad`` is given its gain levels are merged into the axes so the
    regime points are grid cells. Values are normalized by the proxy at
    ``reference`` (the CO point of ``quad`` if given). Cells that fail the
    stability check are kept with ``stable=False`` and NaN values.
    """
    plant = PlantModel.scalar(m, dt)
    if quad is not None:
        reference = quad.point("CO")
        kp_axis = grid_axis(*kp_range, resolution, spacing, (quad.alpha_l, quad.alpha_h))
        kd_axis = grid_axis(*kd_range, resolution, spacing, (quad.beta_l, quad.beta_h))
    else:
        kp_axis = grid_axis(*kp_range, resolution, spacing)
        kd_axis = grid_axis(*kd_range, resolution, spacing)
    ref = _x_inf(plant, *reference, sigma2)
    cells = []
    for kp in kp_axis:
        for kd in kd_axis:
            try:
                x = _x_inf(plant, kp, kd, sigma2)
            except UnstableLoop:
                cells.append(SweepCell(kp, kd, math.nan, math.nan, math.nan, False))
                continue
            cells.append(SweepCell(kp, kd, x, x / ref, math.log10(x / ref)))
    return cells


@dataclass(frozen=True)
class FailureCurvePoint:
    regime: str
    r: float
    empirical: float
    std_error: float
    bound: float
    gamma: float


def failure_curve(quad: RegimeQuad, r_grid, mc: EnsembleConfig, m=1.0, dt=0.02,
                  sigma2=1.0, l_roll=1.0, n=1):
    """Empirical failure rate and the validation-loss failure bound over a
    grid of tube radii. One ensemble per regime is shared by all radii."""
    plant = PlantModel.scalar(m, dt)
    noise = NoiseModel.gaussian(sigma2)
    out = {}
    for regime in REGIMES:
        loop = discretize(plant, quad.gains(regime))
        gamma = amplification_index(loop, mc.horizon).gamma
        ens = simulate(loop, noise, mc)
        pts = []
        for r in r_grid:
            p = ens.failure_rate(r)
            q = FailureBoundQuery(r=float(r), t_horizon=mc.horizon, l_va=l_roll, n=n)
            pts.append(FailureCurvePoint(regime, float(r), p,
                                         math.sqrt(p * (1 - p) / mc.n_rollouts),
                                         failure_bound(q, gamma), gamma))
        out[regime] = pts
    return out


@dataclass(frozen=True)
class InheritanceRecord:
    dt: float
    x_d_over_dt: float
    x_c: float
    rel_error: float


def zoh_inheritance_study(alpha, beta, m=1.0, dts=(0.02, 0.01, 0.005, 0.0025), sigma2=1.0):
    """Compare ``X_inf^d / dt`` with the continuous variance as ``dt`` shrinks."""
    dts = [float(d) for d in dts]
    if any(b >= a for a, b in zip(dts, dts[1:])):
        raise ConfigError("dt sequence must be strictly decreasing")
    x_c = continuous_position_variance(alpha, beta, sigma2)
    out = []
    for dt in dts:
        ratio = _x_inf(PlantModel.scalar(m, dt), alpha, beta, sigma2) / dt
        out.append(InheritanceRecord(dt, ratio, x_c, abs(ratio - x_c) / x_c))
    return out


def convergence_slope(records):
    """Least-squares slope of ``log(rel_error)`` against ``log(dt)``."""
    dt = np.log([r.dt for r in records])
    err = np.log([r.rel_error for r in records])
    return float(np.polyfit(dt, err, 1)[0])
