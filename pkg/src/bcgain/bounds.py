"""Amplification index and sub-Gaussian tail / failure bounds.

All probability-valued functions clip at 1. The ``*_terms`` variants also
return the raw exponent and the unclipped value so callers can see when
the clip is active.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

from .dynamics import DiscreteClosedLoop
from .errors import ConfigError
from .lyapunov import check_psd

__all__ = [
    "FailureBoundQuery",
    "AmplificationResult",
    "BoundTerms",
    "GeometricBoundWarning",
    "amplification_index",
    "amplification_geometric_bound",
    "per_step_dominated",
    "directional_tail",
    "euclidean_tail",
    "failure_bound",
    "failure_bound_terms",
    "failure_bound_from_proxy",
    "r95_threshold",
    "truncation_bound",
]

LN40 = math.log(40.0)


class GeometricBoundWarning(UserWarning):
    """``||C A^s B|| <= ||B|| rho^s`` fails, so the geometric bound is not certified."""


class BoundTerms(NamedTuple):
    exponent: float
    raw: float
    clipped: float


def _terms(prefactor, exponent):
    # exponent <= 0; -inf encodes a zero-variance (never fails) case
    if exponent == -math.inf:
        return BoundTerms(exponent, 0.0, 0.0)
    raw = prefactor * math.exp(exponent)
    return BoundTerms(exponent, raw, min(1.0, raw))


@dataclass(frozen=True)
class FailureBoundQuery:
    """Inputs of the horizon-T failure bound.

    ``eps_gen`` is the generalization slack at the user's confidence level;
    it is taken as given.
    """

    r: float
    t_horizon: int
    l_va: float
    eps_gen: float = 0.0
    n: int = 1

    def __post_init__(self):
        if not (math.isfinite(self.r) and self.r > 0):
            raise ConfigError(f"tube radius must be positive, got {self.r!r}")
        if int(self.t_horizon) != self.t_horizon or self.t_horizon < 0:
            raise ConfigError(f"horizon must be a non-negative integer, got {self.t_horizon!r}")
        for name in ("l_va", "eps_gen"):
            v = getattr(self, name)
            if not (math.isfinite(v) and v >= 0):
                raise ConfigError(f"{name} must be finite and non-negative, got {v!r}")
        if int(self.n) != self.n or self.n < 1:
            raise ConfigError(f"n must be a positive integer, got {self.n!r}")

    @property
    def loss(self):
        return self.l_va + self.eps_gen


@dataclass(frozen=True, eq=False)
class AmplificationResult:
    gamma: float
    per_step_gains: np.ndarray
    argmax_t: int


def _impulse_norms(loop, t_horizon):
    """Squared operator norms ``||C A^s B||^2`` for ``s = 0..T-1``."""
    out = np.empty(t_horizon)
    ab = loop.b.copy()
    for s in range(t_horizon):
        out[s] = np.linalg.norm(loop.c @ ab, 2) ** 2
        ab = loop.a @ ab
    return out


def amplification_index(loop: DiscreteClosedLoop, t_horizon: int) -> AmplificationResult:
    """Finite-horizon amplification ``max_{t<=T} sum_{s<t} ||C A^s B||_op^2``."""
    if int(t_horizon) != t_horizon or t_horizon < 0:
        raise ConfigError(f"horizon must be a non-negative integer, got {t_horizon!r}")
    t_horizon = int(t_horizon)
    gains = _impulse_norms(loop, t_horizon)
    prefix = np.concatenate([[0.0], np.cumsum(gains)])
    # summands are non-negative so the last prefix is the max; keep the
    # general argmax anyway
    argmax = int(np.flatnonzero(prefix == prefix.max())[-1])
    gains.setflags(write=False)
    return AmplificationResult(float(prefix[argmax]), gains, argmax)


def per_step_dominated(loop: DiscreteClosedLoop, t_horizon: int, rtol=1e-12) -> bool:
    """Whether ``||C A^s B|| <= ||B|| rho^s`` holds for every ``s < T``."""
    norms = np.sqrt(_impulse_norms(loop, int(t_horizon)))
    envelope = np.linalg.norm(loop.b, 2) * loop.spectral_radius ** np.arange(int(t_horizon))
    return bool(np.all(norms <= envelope * (1 + rtol)))


def amplification_geometric_bound(loop: DiscreteClosedLoop, t_horizon: int) -> float:
    """Closed-form geometric bound ``||B||^2 (1 - rho^{2T}) / (1 - rho^2)``.

    It dominates the amplification index only when the impulse response obeys
    the per-step envelope; otherwise a :class:`GeometricBoundWarning` is
    emitted and the value is returned uncertified.
    """
    if int(t_horizon) != t_horizon or t_horizon < 0:
        raise ConfigError(f"horizon must be a non-negative integer, got {t_horizon!r}")
    if t_horizon == 0:
        return 0.0
    rho2 = loop.spectral_radius ** 2
    value = np.linalg.norm(loop.b, 2) ** 2 * (1.0 - rho2 ** int(t_horizon)) / (1.0 - rho2)
    if not per_step_dominated(loop, t_horizon):
        warnings.warn(
            "impulse response exceeds ||B|| rho^s; geometric bound is not certified",
            GeometricBoundWarning,
            stacklevel=2,
        )
    return float(value)


def directional_tail(x, u, r) -> float:
    """Chernoff tail ``P(|u^T e| >= r) <= 2 exp(-r^2 / (2 u^T X u))``.

    A degenerate direction (``u^T X u == 0``) gives 0 for ``r > 0``.
    """
    x = np.atleast_2d(np.asarray(x, dtype=float))
    u = np.atleast_1d(np.asarray(u, dtype=float))
    if r <= 0:
        raise ConfigError(f"r must be positive, got {r!r}")
    var = float(u @ x @ u)
    if var < 0:
        raise ConfigError("u^T X u is negative; X is not PSD")
    if var == 0:
        return 0.0
    return _terms(2.0, -r * r / (2.0 * var)).clipped


def euclidean_tail(x, n, r) -> float:
    """Union bound ``P(||e|| >= r) <= 2n exp(-r^2 / (2 n lambda_max(X)))``."""
    x = np.atleast_2d(np.asarray(x, dtype=float))
    if r <= 0:
        raise ConfigError(f"r must be positive, got {r!r}")
    lam = float(np.linalg.eigvalsh(0.5 * (x + x.T)).max())
    if lam <= 0:
        return 0.0
    return _terms(2.0 * n, -r * r / (2.0 * n * lam)).clipped


def failure_bound_terms(query: FailureBoundQuery, gamma: float) -> BoundTerms:
    if not (math.isfinite(gamma) and gamma >= 0):
        raise ConfigError(f"gamma must be finite and non-negative, got {gamma!r}")
    n, t = query.n, query.t_horizon
    scale = gamma * query.loss
    if scale == 0:
        return _terms(2.0 * n * (t + 1), -math.inf)
    return _terms(2.0 * n * (t + 1), -query.r ** 2 / (2.0 * n * scale))


def failure_bound(query: FailureBoundQuery, gamma: float) -> float:
    """Horizon-T failure bound ``2n(T+1) exp(-r^2 / (2n Gamma_T (L_va + eps)))``, clipped."""
    return failure_bound_terms(query, gamma).clipped


def failure_bound_from_proxy(sigma_roll, gamma, r, t_horizon, sharp=False) -> BoundTerms:
    """Failure bound with the loss replaced by a known action-error proxy.

    By default ``tr(sigma_roll)`` stands in for the loss. ``sharp=True`` uses
    ``lambda_max(sigma_roll)`` instead, which is tighter but is not the
    validation-loss form of the bound.
    """
    sigma = check_psd(sigma_roll, "sigma_roll")
    level = float(np.linalg.eigvalsh(sigma).max()) if sharp else float(np.trace(sigma))
    n = sigma.shape[0]
    query = FailureBoundQuery(r=r, t_horizon=t_horizon, l_va=max(level, 0.0), n=n)
    return failure_bound_terms(query, gamma)


def r95_threshold(x_inf) -> float:
    """Radius with directional tail 5%: ``sqrt(2 lambda_max(X) ln 40)``."""
    x = np.atleast_2d(np.asarray(x_inf, dtype=float))
    lam = float(np.linalg.eigvalsh(0.5 * (x + x.T)).max())
    if not lam > 0:
        raise ConfigError("proxy is zero; the 95% radius is undefined")
    return math.sqrt(2.0 * lam * LN40)


def truncation_bound(psi, rho_star, t, x_bar_norm) -> float:
    """Geometric bound on ``||X_inf - X_t||``: ``rho_star^(2t) psi ||X_bar||``."""
    if not 0 <= rho_star < 1:
        raise ConfigError(f"rho_star must lie in [0, 1), got {rho_star!r}")
    if t < 0:
        raise ConfigError(f"t must be non-negative, got {t!r}")
    return float(rho_star ** (2 * t) * psi * x_bar_norm)
