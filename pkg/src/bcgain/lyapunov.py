"""Discrete/continuous Lyapunov solvers and the finite-horizon proxy sums."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .dynamics import STABILITY_MARGIN, DiscreteClosedLoop, spectral_radius
from .errors import ConfigError, NotHurwitz, NumericalError, UnstableLoop

__all__ = [
    "ProxyResult",
    "finite_horizon_proxy",
    "stationary_proxy",
    "solve_discrete_lyapunov",
    "solve_continuous_lyapunov",
    "check_psd",
]

PSD_TOL = 1e-10
RESIDUAL_TOL = 1e-10


@dataclass(frozen=True, eq=False)
class ProxyResult:
    """Sub-Gaussian proxy of the state (``s``) and of the position error (``x``).

    ``horizon`` is ``math.inf`` for the stationary solution, in which case
    ``residual`` holds the Frobenius residual of the Lyapunov equation.
    """

    s: np.ndarray
    x: np.ndarray
    horizon: float
    residual: float = 0.0


def check_psd(q, name="matrix", tol=PSD_TOL):
    """Symmetrize ``q`` and reject it if it has an eigenvalue below ``-tol*||q||``."""
    q = np.atleast_2d(np.asarray(q, dtype=float))
    if q.shape[0] != q.shape[1]:
        raise ConfigError(f"{name} must be square, got {q.shape}")
    if not np.all(np.isfinite(q)):
        raise ConfigError(f"{name} has non-finite entries")
    scale = max(np.abs(q).max(), 1.0)
    if np.abs(q - q.T).max() > 1e-10 * scale:
        raise ConfigError(f"{name} is not symmetric")
    q = 0.5 * (q + q.T)
    if q.size:
        lo = np.linalg.eigvalsh(q).min()
        if lo < -tol * max(np.linalg.norm(q, 2), 1.0):
            raise ConfigError(f"{name} is not positive semidefinite (min eigenvalue {lo!r})")
    return q


def _clamp_psd(s):
    s = 0.5 * (s + s.T)
    w, v = np.linalg.eigh(s)
    if w.min() >= 0:
        return s
    if w.min() < -PSD_TOL * max(abs(w).max(), 1.0):
        raise NumericalError(f"Lyapunov solution is indefinite (min eigenvalue {w.min()!r})")
    s = (v * np.clip(w, 0.0, None)) @ v.T
    return 0.5 * (s + s.T)


def solve_discrete_lyapunov(a, q, margin=STABILITY_MARGIN):
    """Solve ``S = a S a^T + q`` through the dense Kronecker system.

    ``(I - a kron a) vec(S) = vec(q)`` is formed explicitly, which is fine for
    the state sizes used here (up to 24).
    """
    a = np.atleast_2d(np.asarray(a, dtype=float))
    q = check_psd(q, "q")
    d = a.shape[0]
    if a.shape != (d, d) or q.shape != (d, d):
        raise ConfigError(f"shape mismatch a{a.shape}, q{q.shape}")
    rho = spectral_radius(a)
    if rho >= 1.0 - margin:
        raise UnstableLoop(rho, margin)
    op = np.eye(d * d) - np.kron(a, a)
    try:
        vec = np.linalg.solve(op, q.reshape(-1))
    except np.linalg.LinAlgError as exc:
        raise NumericalError(f"discrete Lyapunov system is singular: {exc}") from exc
    return _clamp_psd(vec.reshape(d, d))


def solve_continuous_lyapunov(a_c, q):
    """Solve ``a_c P + P a_c^T + q = 0`` for Hurwitz ``a_c``."""
    a_c = np.atleast_2d(np.asarray(a_c, dtype=float))
    q = check_psd(q, "q")
    d = a_c.shape[0]
    if a_c.shape != (d, d) or q.shape != (d, d):
        raise ConfigError(f"shape mismatch a_c{a_c.shape}, q{q.shape}")
    eig = np.linalg.eigvals(a_c)
    if np.any(eig.real >= 0):
        raise NotHurwitz(eig)
    eye = np.eye(d)
    op = np.kron(a_c, eye) + np.kron(eye, a_c)
    try:
        vec = np.linalg.solve(op, -q.reshape(-1))
    except np.linalg.LinAlgError as exc:
        raise NumericalError(f"continuous Lyapunov system is singular: {exc}") from exc
    return _clamp_psd(vec.reshape(d, d))


def discrete_residual(a, s, q):
    return float(np.linalg.norm(s - a @ s @ a.T - q))


def continuous_residual(a_c, p, q):
    return float(np.linalg.norm(a_c @ p + p @ a_c.T + q))


def _injection(loop, sigma_roll):
    sigma = check_psd(sigma_roll, "sigma_roll")
    if sigma.shape != (loop.n_inputs, loop.n_inputs):
        raise ConfigError(
            f"sigma_roll must be {loop.n_inputs}x{loop.n_inputs}, got {sigma.shape}"
        )
    w = loop.b @ sigma @ loop.b.T
    return 0.5 * (w + w.T)


def finite_horizon_proxy(loop: DiscreteClosedLoop, sigma_roll, t: int) -> ProxyResult:
    """Proxy ``S_t = sum_{s<t} A^s B Sigma B^T (A^T)^s`` and ``X_t = C S_t C^T``.

    Accumulated with ``S_{k+1} = A S_k A^T + B Sigma B^T`` from ``S_0 = 0``.
    """
    if int(t) != t or t < 1:
        raise ConfigError(f"horizon must be a positive integer, got {t!r}")
    w = _injection(loop, sigma_roll)
    a = loop.a
    s = np.zeros_like(w)
    for _ in range(int(t)):
        s = a @ s @ a.T + w
    s = 0.5 * (s + s.T)
    return ProxyResult(s=s, x=loop.c @ s @ loop.c.T, horizon=int(t))


def stationary_proxy(loop: DiscreteClosedLoop, sigma_roll) -> ProxyResult:
    """Stationary proxy ``S_inf`` from the discrete Lyapunov equation."""
    w = _injection(loop, sigma_roll)
    s = solve_discrete_lyapunov(loop.a, w)
    res = discrete_residual(loop.a, s, w)
    if res > RESIDUAL_TOL * (1.0 + np.linalg.norm(w)):
        raise NumericalError(f"discrete Lyapunov residual {res!r} above tolerance")
    return ProxyResult(s=s, x=loop.c @ s @ loop.c.T, horizon=math.inf, residual=res)
