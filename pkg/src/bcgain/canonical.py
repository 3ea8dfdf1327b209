"""Closed forms for the scalar PD loop, the four-regime ordering, and the
per-joint reduction to the scalar ordering index."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import NamedTuple

import numpy as np

from .bounds import BoundTerms, _terms
from .dynamics import GainSetting, PlantModel
from .errors import ConfigError
from .lyapunov import check_psd

__all__ = [
    "REGIMES",
    "RegimeQuad",
    "ShapeStructure",
    "OrderingReport",
    "continuous_stationary_covariance",
    "continuous_position_variance",
    "h2_norm_squared",
    "canonical_failure_bound",
    "canonical_failure_bound_terms",
    "ordering_index",
    "regime_ordering",
    "multijoint_structure",
    "dominance_margin",
    "ShapeMargins",
    "shape_condition_margins",
]

REGIMES = ("CO", "SO", "CU", "SU")
TIE_TOL = 1e-12


def _positive(**kwargs):
    for name, v in kwargs.items():
        if not (math.isfinite(v) and v > 0):
            raise ConfigError(f"{name} must be positive, got {v!r}")


@dataclass(frozen=True)
class RegimeQuad:
    """Two stiffness and two damping levels; the corners are the four regimes."""

    alpha_l: float
    alpha_h: float
    beta_l: float
    beta_h: float

    def __post_init__(self):
        _positive(alpha_l=self.alpha_l, alpha_h=self.alpha_h,
                  beta_l=self.beta_l, beta_h=self.beta_h)
        if not self.alpha_l < self.alpha_h:
            raise ConfigError("need alpha_l < alpha_h")
        if not self.beta_l < self.beta_h:
            raise ConfigError("need beta_l < beta_h")

    def point(self, regime):
        """``(alpha, beta)`` of a regime name."""
        return {
            "CO": (self.alpha_l, self.beta_h),
            "SO": (self.alpha_h, self.beta_h),
            "CU": (self.alpha_l, self.beta_l),
            "SU": (self.alpha_h, self.beta_l),
        }[regime]

    def points(self):
        return {name: self.point(name) for name in REGIMES}

    def gains(self, regime, n=1):
        a, b = self.point(regime)
        return GainSetting(np.full(n, a), np.full(n, b))

    co = property(lambda self: self.gains("CO"))
    so = property(lambda self: self.gains("SO"))
    cu = property(lambda self: self.gains("CU"))
    su = property(lambda self: self.gains("SU"))


@dataclass(frozen=True, eq=False)
class ShapeStructure:
    """Scalars bounding label difficulty ``l``, injection ``b`` and contraction
    ``rho_star`` against the reference ``x_bar``."""

    l: float
    b: float
    rho_star: float
    x_bar: np.ndarray = field(default_factory=lambda: np.eye(1))

    def __post_init__(self):
        if not (self.l >= 0 and self.b >= 0):
            raise ConfigError("l and b must be non-negative")
        if not 0 <= self.rho_star < 1:
            raise ConfigError(f"rho_star must lie in [0, 1), got {self.rho_star!r}")
        object.__setattr__(self, "x_bar", check_psd(self.x_bar, "x_bar"))


def continuous_stationary_covariance(alpha, beta, m, sigma2):
    """Stationary state covariance of the continuous scalar loop:
    ``diag(s2 a / (2 b), s2 a^2 / (2 b m))``."""
    _positive(alpha=alpha, beta=beta, m=m)
    if sigma2 < 0:
        raise ConfigError("sigma2 must be non-negative")
    return np.diag([sigma2 * alpha / (2.0 * beta), sigma2 * alpha**2 / (2.0 * beta * m)])


def continuous_position_variance(alpha, beta, sigma2=1.0):
    _positive(alpha=alpha, beta=beta)
    return sigma2 * alpha / (2.0 * beta)


def h2_norm_squared(alpha, beta, m=1.0):
    """Squared H2 norm of ``(a/m) / (s^2 + (b/m) s + a/m)``.

    Evaluated through the standard second-order formula
    ``k^2 / (4 zeta wn^3)`` rather than the simplified ratio, so it serves as
    an independent check of :func:`continuous_position_variance`. The value
    does not depend on ``m``.
    """
    _positive(alpha=alpha, beta=beta, m=m)
    wn = math.sqrt(alpha / m)
    zeta = beta / (2.0 * math.sqrt(m * alpha))
    return (alpha / m) ** 2 / (4.0 * zeta * wn**3)


def canonical_failure_bound_terms(alpha, beta, dt, r, t_horizon, l_roll) -> BoundTerms:
    _positive(alpha=alpha, beta=beta, dt=dt, r=r, l_roll=l_roll)
    if t_horizon < 0:
        raise ConfigError("horizon must be non-negative")
    return _terms(2.0 * (t_horizon + 1), -r * r * beta / (alpha * dt * l_roll))


def canonical_failure_bound(alpha, beta, dt, r, t_horizon, l_roll) -> float:
    """Leading-order scalar failure bound ``2(T+1) exp(-r^2 b / (a dt L))``.

    The ``o(dt)`` discretization remainder has no computable form and is
    not included.
    """
    return canonical_failure_bound_terms(alpha, beta, dt, r, t_horizon, l_roll).clipped


def ordering_index(structure: ShapeStructure) -> float:
    return structure.b * structure.l / (1.0 - structure.rho_star**2)


@dataclass(frozen=True)
class OrderingReport:
    values: dict
    violations: tuple
    so_minus_cu: float
    so_cu_relation: str

    @property
    def holds(self):
        return not self.violations

    def normalized(self, reference="CO"):
        ref = self.values[reference]
        return {k: v / ref for k, v in self.values.items()}


_HASSE_EDGES = (("CO", "SO"), ("CO", "CU"), ("SO", "SU"), ("CU", "SU"))


def regime_ordering(quad: RegimeQuad, psi_fn) -> OrderingReport:
    """Evaluate ``psi_fn(alpha, beta)`` at the four corners and check the
    Hasse edges CO <= SO, CO <= CU, SO <= SU, CU <= SU.

    Violated edges are listed in the report; nothing is raised. The SO/CU
    comparison is reported as a signed difference only.
    """
    values = {name: float(psi_fn(*quad.point(name))) for name in REGIMES}
    violations = tuple(
        f"{lo}<={hi}" for lo, hi in _HASSE_EDGES if values[lo] > values[hi]
    )
    diff = values["SO"] - values["CU"]
    scale = max(abs(values["SO"]), abs(values["CU"]), 1.0)
    if abs(diff) <= TIE_TOL * scale:
        relation = "SO=CU"
    else:
        relation = "SO<CU" if diff < 0 else "SO>CU"
    return OrderingReport(values, violations, diff, relation)


def multijoint_structure(plant: PlantModel, gains: GainSetting, sigma_roll=None) -> ShapeStructure:
    """Per-joint scalars for a decoupled (diagonal mass) robot with reference
    matrices ``W = I_2n`` and ``Sigma = I_n``.

    ``l = lambda_max(Sigma_roll)``, ``b = max a_i^2 dt^2 / (4 m_i^2)`` and
    ``rho_star = max exp(-b_i dt / (2 m_i))``. ``sigma_roll`` defaults to
    the identity.
    """
    if not plant.is_diagonal:
        raise ConfigError("multi-joint reduction requires a diagonal mass matrix")
    if gains.n != plant.n:
        raise ConfigError(f"gain dimension {gains.n} does not match plant dimension {plant.n}")
    n = plant.n
    sigma = np.eye(n) if sigma_roll is None else check_psd(sigma_roll, "sigma_roll")
    if sigma.shape != (n, n):
        raise ConfigError(f"sigma_roll must be {n}x{n}")
    m = np.diag(plant.m)
    dt = plant.dt
    l = max(float(np.linalg.eigvalsh(sigma).max()), 0.0)
    b = float(np.max(gains.kp**2 * dt**2 / (4.0 * m**2)))
    rho_star = float(np.max(np.exp(-gains.kd * dt / (2.0 * m))))
    return ShapeStructure(l=l, b=b, rho_star=rho_star, x_bar=np.eye(n))


def dominance_margin(structure: ShapeStructure, x_inf) -> float:
    """Smallest eigenvalue of ``Psi * X_bar - X_inf`` (non-negative when the
    scalar ordering bound holds)."""
    gap = ordering_index(structure) * structure.x_bar - np.atleast_2d(x_inf)
    return float(np.linalg.eigvalsh(0.5 * (gap + gap.T)).min())


class ShapeMargins(NamedTuple):
    """Smallest eigenvalue of each upper-bound gap; all three must be >= 0
    for the structure to hold."""

    label: float
    injection: float
    contraction: float

    @property
    def holds(self):
        return min(self) >= -1e-12


def shape_condition_margins(loop, sigma_roll, structure: ShapeStructure, w_bar=None,
                            sigma_bar=None) -> ShapeMargins:
    """Check the three structural inequalities for a concrete loop:
    ``l Sigma_bar - Sigma_roll``, ``b W_bar - B Sigma_bar B^T`` and
    ``rho*^2 W_bar - A W_bar A^T`` (identity references by default)."""
    d, k = loop.b.shape
    w_bar = np.eye(d) if w_bar is None else np.asarray(w_bar, dtype=float)
    sigma_bar = np.eye(k) if sigma_bar is None else np.asarray(sigma_bar, dtype=float)
    sigma = check_psd(sigma_roll, "sigma_roll")

    def low(m):
        return float(np.linalg.eigvalsh(0.5 * (m + m.T)).min())

    return ShapeMargins(
        low(structure.l * sigma_bar - sigma),
        low(structure.b * w_bar - loop.b @ sigma_bar @ loop.b.T),
        low(structure.rho_star**2 * w_bar - loop.a @ w_bar @ loop.a.T),
    )
