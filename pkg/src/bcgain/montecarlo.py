"""Seeded Monte Carlo rollouts of the sampled error dynamics.

Every action error is a pure function of ``(seed, rollout index, step)``
through a counter-based generator, so results do not depend on how the
rollouts are split across worker threads.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from fractions import Fraction

import numpy as np

from . import _backend
from ._fallback import GAUSSIAN, RADEMACHER, UNIFORM, noise_batch
from .bounds import r95_threshold
from .dynamics import DiscreteClosedLoop
from .errors import ConfigError
from .lyapunov import check_psd, stationary_proxy

__all__ = [
    "NoiseModel",
    "EnsembleConfig",
    "EnsembleStats",
    "Ensemble",
    "simulate",
    "rollout",
    "failure_rate",
    "percentile_envelopes",
    "empirical_position_covariance",
    "nearest_rank",
]

_KINDS = {"gaussian": GAUSSIAN, "bounded_uniform": UNIFORM, "rademacher_scaled": RADEMACHER}


@dataclass(frozen=True, eq=False)
class NoiseModel:
    """Zero-mean sub-Gaussian action-error law with proxy ``sigma_roll``.

    ``gaussian`` draws ``N(0, sigma_roll)``; ``bounded_uniform`` draws each
    coordinate uniformly on ``[-a_i, a_i]``; ``rademacher_scaled`` draws
    ``+-a_i``. For the last two the proxy is ``diag(a^2)``.
    """

    kind: str
    sigma_roll: np.ndarray
    scale: np.ndarray | None = None

    def __post_init__(self):
        if self.kind not in _KINDS:
            raise ConfigError(f"unknown noise kind {self.kind!r}; expected one of {sorted(_KINDS)}")
        sigma = check_psd(self.sigma_roll, "sigma_roll")
        if self.kind != "gaussian":
            if self.scale is None:
                raise ConfigError(f"{self.kind} noise needs a per-coordinate scale")
            scale = np.atleast_1d(np.asarray(self.scale, dtype=float))
            if np.any(scale < 0) or scale.shape != (sigma.shape[0],):
                raise ConfigError("scale must be a non-negative vector matching sigma_roll")
            if not np.allclose(sigma, np.diag(scale**2), rtol=1e-12, atol=0):
                raise ConfigError("sigma_roll must equal diag(scale^2) for bounded noise")
            object.__setattr__(self, "scale", scale)
        object.__setattr__(self, "sigma_roll", sigma)

    @classmethod
    def gaussian(cls, sigma_roll):
        return cls("gaussian", np.atleast_2d(np.asarray(sigma_roll, dtype=float)))

    @classmethod
    def bounded_uniform(cls, a):
        a = np.atleast_1d(np.asarray(a, dtype=float))
        return cls("bounded_uniform", np.diag(a**2), a)

    @classmethod
    def rademacher_scaled(cls, a):
        a = np.atleast_1d(np.asarray(a, dtype=float))
        return cls("rademacher_scaled", np.diag(a**2), a)

    @classmethod
    def zero(cls, n=1):
        return cls("gaussian", np.zeros((n, n)))

    @property
    def dim(self):
        return self.sigma_roll.shape[0]

    @property
    def code(self):
        return _KINDS[self.kind]

    @property
    def factor(self):
        """Matrix ``L`` mapping standardized variates to action errors."""
        if self.kind != "gaussian":
            return np.diag(self.scale)
        w, v = np.linalg.eigh(self.sigma_roll)
        root = (v * np.sqrt(np.clip(w, 0.0, None))) @ v.T
        return np.ascontiguousarray(0.5 * (root + root.T))

    @property
    def variance(self):
        """True covariance of one draw (below the proxy for bounded kinds)."""
        if self.kind == "bounded_uniform":
            return np.diag(self.scale**2 / 3.0)
        return self.sigma_roll


@dataclass(frozen=True)
class EnsembleConfig:
    n_rollouts: int
    horizon: int
    seed: int = 0
    parallel_width: int = 1

    def __post_init__(self):
        for name in ("n_rollouts", "horizon", "parallel_width"):
            v = getattr(self, name)
            if int(v) != v or v < 1:
                raise ConfigError(f"{name} must be a positive integer, got {v!r}")
        if int(self.seed) != self.seed or not 0 <= self.seed < 2**64:
            raise ConfigError(f"seed must be a 64-bit unsigned integer, got {self.seed!r}")


@dataclass(frozen=True, eq=False)
class EnsembleStats:
    """Summary of one ensemble.

    ``envelopes`` has shape ``(T + 1, len(levels))`` with nearest-rank
    percentiles of ``||e_t||``.
    """

    failure_rate: float
    ci_halfwidth: float
    radius: float
    levels: tuple = ()
    envelopes: np.ndarray = field(default_factory=lambda: np.zeros((0, 0)))
    max_abs_error: float = 0.0
    r95_theory: float = math.nan
    n_rollouts: int = 0

    @property
    def std_error(self):
        p = self.failure_rate
        return math.sqrt(p * (1 - p) / self.n_rollouts) if self.n_rollouts else math.nan


def nearest_rank(sorted_values, level):
    """Nearest-rank percentile of an ascending array along axis 0."""
    n = sorted_values.shape[0]
    rank = math.ceil(Fraction(str(level)) * n / 100)
    return sorted_values[min(max(rank, 1), n) - 1]


class Ensemble:
    """Norm trajectories of ``N`` rollouts (and optionally one position snapshot)."""

    def __init__(self, norms, snapshot=None, snapshot_t=None, backend=None):
        self.norms = norms
        self.snapshot = snapshot
        self.snapshot_t = snapshot_t
        self.backend = backend
        self._max = None
        self._sorted = None

    @property
    def n_rollouts(self):
        return self.norms.shape[0]

    @property
    def horizon(self):
        return self.norms.shape[1] - 1

    @property
    def max_norms(self):
        if self._max is None:
            self._max = self.norms.max(axis=1)
        return self._max

    def failure_rate(self, r):
        """Fraction of rollouts with ``||e_t|| >= r`` for some ``t <= T``."""
        return float(np.count_nonzero(self.max_norms >= r)) / self.n_rollouts

    def envelopes(self, levels):
        if self._sorted is None:
            self._sorted = np.sort(self.norms, axis=0)
        for p in levels:
            if not 0 < p < 100:
                raise ConfigError(f"percentile levels must lie in (0, 100), got {p!r}")
        return np.stack([nearest_rank(self._sorted, p) for p in levels], axis=1)

    def stats(self, r, levels=(), r95_theory=math.nan):
        p = self.failure_rate(r)
        n = self.n_rollouts
        env = self.envelopes(levels) if levels else np.zeros((self.horizon + 1, 0))
        return EnsembleStats(
            failure_rate=p,
            ci_halfwidth=1.96 * math.sqrt(p * (1 - p) / n),
            radius=float(r),
            levels=tuple(levels),
            envelopes=env,
            max_abs_error=float(self.max_norms.max()),
            r95_theory=r95_theory,
            n_rollouts=n,
        )


def _prepare(loop, noise):
    if noise.dim != loop.n_inputs:
        raise ConfigError(f"noise dimension {noise.dim} does not match loop input width {loop.n_inputs}")
    mats = [np.ascontiguousarray(m, dtype=float) for m in (loop.a, loop.b, loop.c, noise.factor)]
    return mats


def simulate(loop: DiscreteClosedLoop, noise: NoiseModel, cfg: EnsembleConfig,
             horizon=None, snapshot_t=None, keep_norms=True, backend=None) -> Ensemble:
    """Run ``cfg.n_rollouts`` rollouts from ``x_0 = 0``.

    Rollouts are split into ``cfg.parallel_width`` contiguous slices run on
    a thread pool; each slice writes its own rows of the output.
    """
    horizon = cfg.horizon if horizon is None else int(horizon)
    if horizon < 1:
        raise ConfigError("horizon must be positive")
    if snapshot_t is not None and not 0 <= snapshot_t <= horizon:
        raise ConfigError(f"snapshot time must lie in [0, {horizon}]")
    kern = _backend.get(backend)
    if kern is _backend.compiled and max(loop.state_dim, loop.n_inputs) > kern.MAX_STATE:
        kern = _backend.fallback
    a, b, c, lfac = _prepare(loop, noise)
    n = cfg.n_rollouts
    norms = np.empty((n, horizon + 1)) if keep_norms else None
    snap = np.empty((n, loop.n)) if snapshot_t is not None else None
    snap_t = -1 if snapshot_t is None else int(snapshot_t)

    width = min(cfg.parallel_width, n)
    edges = [n * i // width for i in range(width + 1)]

    def work(i):
        lo, hi = edges[i], edges[i + 1]
        kern.simulate(a, b, c, lfac, noise.code, cfg.seed, horizon, lo, hi,
                      None if norms is None else norms[lo:hi],
                      snap_t, None if snap is None else snap[lo:hi])

    if width == 1:
        work(0)
    else:
        with ThreadPoolExecutor(max_workers=width) as pool:
            list(pool.map(work, range(width)))
    return Ensemble(norms if norms is not None else np.zeros((n, 0)), snap, snapshot_t,
                    "numpy" if kern is _backend.fallback else "compiled")


def rollout(loop: DiscreteClosedLoop, noise: NoiseModel, horizon: int, seed=0, index=0):
    """Position errors ``e_0 .. e_T`` (shape ``(T + 1, n)``) of one rollout.

    Uses the same random stream as the ensemble engine: rollout ``index``
    of seed ``seed``.
    """
    a, b, c, lfac = _prepare(loop, noise)
    xi = noise_batch(lfac, seed, np.array([index], dtype=np.uint64), int(horizon), noise.code)[0]
    x = np.zeros(loop.state_dim)
    out = np.zeros((int(horizon) + 1, loop.n))
    for t in range(int(horizon)):
        xn = np.empty_like(x)
        for i in range(x.size):
            acc = 0.0
            for j in range(x.size):
                acc = acc + a[i, j] * x[j]
            for j in range(b.shape[1]):
                acc = acc + b[i, j] * xi[t, j]
            xn[i] = acc
        x = xn
        for i in range(loop.n):
            acc = 0.0
            for j in range(x.size):
                acc = acc + c[i, j] * x[j]
            out[t + 1, i] = acc
    return out


def _r95(loop, noise):
    x_inf = stationary_proxy(loop, noise.sigma_roll).x
    try:
        return r95_threshold(x_inf)
    except ConfigError:
        return math.nan


def failure_rate(loop, noise, horizon, r, cfg, backend=None) -> EnsembleStats:
    """Empirical ``P(exists t <= T: ||e_t|| >= r)`` with a 95% normal CI."""
    if not r >= 0:
        raise ConfigError(f"tube radius must be non-negative, got {r!r}")
    ens = simulate(loop, noise, cfg, horizon=horizon, backend=backend)
    return ens.stats(r)


def percentile_envelopes(loop, noise, horizon, cfg, levels=(50, 95, 99), r=math.inf,
                         backend=None) -> EnsembleStats:
    """Per-step nearest-rank percentiles of ``||e_t||`` plus the theoretical
    steady-state 95% radius for comparison."""
    ens = simulate(loop, noise, cfg, horizon=horizon, backend=backend)
    return ens.stats(r, tuple(levels), r95_theory=_r95(loop, noise))


def empirical_position_covariance(loop, noise, t, cfg, backend=None):
    """Sample covariance (denominator ``N - 1``) of ``e_t`` over the ensemble."""
    if int(t) != t or t < 1:
        raise ConfigError("t must be a positive integer")
    ens = simulate(loop, noise, cfg, horizon=t, snapshot_t=t, keep_norms=False, backend=backend)
    e = ens.snapshot
    return np.atleast_2d(np.cov(e, rowvar=False))
