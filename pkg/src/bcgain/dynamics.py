"""Linearized PD error dynamics and exact zero-order-hold discretization."""

from __future__ import annotations

import cmath
import math
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg

from .errors import ConfigError, NumericalError, UnstableLoop

__all__ = [
    "PlantModel",
    "GainSetting",
    "ContinuousErrorSystem",
    "DiscreteClosedLoop",
    "STABILITY_MARGIN",
    "build_error_dynamics",
    "zoh_discretize",
    "discretize",
    "canonical_zoh_eigenvalues",
    "spectral_radius",
]

STABILITY_MARGIN = 1e-9


def _frozen(a):
    a = np.array(a, dtype=float)
    a.setflags(write=False)
    return a


@dataclass(frozen=True, eq=False)
class PlantModel:
    """Joint-space plant: mass matrix ``m`` (n x n, SPD) and control period ``dt``."""

    m: np.ndarray
    dt: float

    def __post_init__(self):
        m = np.atleast_2d(np.asarray(self.m, dtype=float))
        if m.ndim != 2 or m.shape[0] != m.shape[1] or m.shape[0] < 1:
            raise ConfigError(f"mass matrix must be square, got shape {m.shape}")
        if not np.all(np.isfinite(m)):
            raise ConfigError("mass matrix has non-finite entries")
        scale = max(np.abs(m).max(), 1.0)
        if np.abs(m - m.T).max() > 1e-12 * scale:
            raise ConfigError("mass matrix is not symmetric")
        eig = np.linalg.eigvalsh(0.5 * (m + m.T))
        if eig.min() <= 0:
            raise ConfigError(
                f"mass matrix is not positive definite (min eigenvalue {eig.min()!r})"
            )
        if not (np.isfinite(self.dt) and self.dt > 0):
            raise ConfigError(f"control period must be positive, got {self.dt!r}")
        object.__setattr__(self, "m", _frozen(m))
        object.__setattr__(self, "dt", float(self.dt))

    @classmethod
    def scalar(cls, m, dt):
        return cls(np.array([[float(m)]]), dt)

    @classmethod
    def diagonal(cls, masses, dt):
        return cls(np.diag(np.asarray(masses, dtype=float)), dt)

    @property
    def n(self):
        return self.m.shape[0]

    @property
    def is_diagonal(self):
        return bool(np.all(self.m == np.diag(np.diag(self.m))))


@dataclass(frozen=True, eq=False)
class GainSetting:
    """Diagonal PD gains: stiffness ``kp`` and damping ``kd`` per joint."""

    kp: np.ndarray
    kd: np.ndarray

    def __post_init__(self):
        kp = np.atleast_1d(np.asarray(self.kp, dtype=float))
        kd = np.atleast_1d(np.asarray(self.kd, dtype=float))
        if kp.ndim != 1 or kd.shape != kp.shape:
            raise ConfigError(f"kp and kd must be equal-length vectors, got {kp.shape}, {kd.shape}")
        if not (np.all(np.isfinite(kp)) and np.all(np.isfinite(kd))):
            raise ConfigError("gains must be finite")
        if np.any(kp <= 0) or np.any(kd <= 0):
            raise ConfigError("gains must be strictly positive")
        object.__setattr__(self, "kp", _frozen(kp))
        object.__setattr__(self, "kd", _frozen(kd))

    @classmethod
    def scalar(cls, kp, kd):
        return cls(np.array([kp], dtype=float), np.array([kd], dtype=float))

    @property
    def n(self):
        return self.kp.shape[0]


@dataclass(frozen=True, eq=False)
class ContinuousErrorSystem:
    a_c: np.ndarray
    b_c: np.ndarray
    c: np.ndarray

    @property
    def n(self):
        return self.c.shape[0]


@dataclass(frozen=True, eq=False)
class DiscreteClosedLoop:
    """Sampled closed loop ``x+ = a x + b xi``, ``e = c x``.

    Construction verifies Schur stability; use :meth:`from_matrices` for
    loops that did not come out of :func:`zoh_discretize`.
    """

    a: np.ndarray
    b: np.ndarray
    c: np.ndarray
    spectral_radius: float = field(default=float("nan"))
    dt: float = float("nan")

    def __post_init__(self):
        a = np.atleast_2d(np.asarray(self.a, dtype=float))
        b = np.asarray(self.b, dtype=float)
        c = np.asarray(self.c, dtype=float)
        if b.ndim == 1:
            b = b.reshape(-1, 1)
        if c.ndim == 1:
            c = c.reshape(1, -1)
        d = a.shape[0]
        if a.shape != (d, d) or b.shape[0] != d or c.shape[1] != d:
            raise ConfigError(
                f"inconsistent shapes a{a.shape}, b{b.shape}, c{c.shape}"
            )
        rho = spectral_radius(a)
        if not math.isnan(self.spectral_radius) and abs(rho - self.spectral_radius) > 1e-10:
            raise ConfigError("spectral_radius does not match the transition matrix")
        if rho >= 1.0 - STABILITY_MARGIN:
            raise UnstableLoop(rho, STABILITY_MARGIN)
        object.__setattr__(self, "a", _frozen(a))
        object.__setattr__(self, "b", _frozen(b))
        object.__setattr__(self, "c", _frozen(c))
        object.__setattr__(self, "spectral_radius", rho)
        object.__setattr__(self, "dt", float(self.dt))

    @classmethod
    def from_matrices(cls, a, b, c=None, dt=float("nan")):
        a = np.atleast_2d(np.asarray(a, dtype=float))
        if c is None:
            c = np.eye(1, a.shape[0])
        return cls(a, b, c, dt=dt)

    @property
    def state_dim(self):
        return self.a.shape[0]

    @property
    def n(self):
        """Number of position outputs (joints)."""
        return self.c.shape[0]

    @property
    def n_inputs(self):
        return self.b.shape[1]


def build_error_dynamics(plant: PlantModel, gains: GainSetting) -> ContinuousErrorSystem:
    """Continuous error dynamics of a PD loop linearized about the expert.

    ``a_c = [[0, I], [-M^-1 Kp, -M^-1 Kd]]``, ``b_c = [[0], [M^-1 Kp]]`` and
    ``c = [I, 0]``.
    """
    n = plant.n
    if gains.n != n:
        raise ConfigError(f"gain dimension {gains.n} does not match plant dimension {n}")
    kp = np.diag(gains.kp)
    kd = np.diag(gains.kd)
    # cho_solve keeps the lower blocks exact for diagonal M
    factor = scipy.linalg.cho_factor(plant.m)
    minv_kp = scipy.linalg.cho_solve(factor, kp)
    minv_kd = scipy.linalg.cho_solve(factor, kd)
    eye = np.eye(n)
    zero = np.zeros((n, n))
    a_c = np.block([[zero, eye], [-minv_kp, -minv_kd]])
    b_c = np.vstack([zero, minv_kp])
    c = np.hstack([eye, zero])
    return ContinuousErrorSystem(_frozen(a_c), _frozen(b_c), _frozen(c))


def _zoh_matrices(a_c, b_c, dt):
    d, k = b_c.shape
    aug = np.zeros((d + k, d + k))
    aug[:d, :d] = a_c
    aug[:d, d:] = b_c
    phi = scipy.linalg.expm(aug * dt)
    return phi[:d, :d], phi[:d, d:]


def zoh_discretize(sys: ContinuousErrorSystem, dt: float) -> DiscreteClosedLoop:
    """Exact ZOH sampling of ``sys`` with period ``dt``.

    Both matrices come out of one exponential of the augmented block
    ``[[a_c, b_c], [0, 0]] * dt``: its top-left block is ``exp(a_c dt)`` and
    its top-right block is ``(int_0^dt exp(a_c s) ds) b_c``.

    Raises
    ------
    UnstableLoop
        If the sampled loop has spectral radius ``>= 1 - STABILITY_MARGIN``.
    """
    if not (np.isfinite(dt) and dt > 0):
        raise ConfigError(f"dt must be positive, got {dt!r}")
    a, b = _zoh_matrices(np.asarray(sys.a_c), np.asarray(sys.b_c), float(dt))
    return DiscreteClosedLoop(a, b, sys.c, dt=dt)


def discretize(plant: PlantModel, gains: GainSetting) -> DiscreteClosedLoop:
    """Shorthand for ``zoh_discretize(build_error_dynamics(plant, gains), plant.dt)``."""
    return zoh_discretize(build_error_dynamics(plant, gains), plant.dt)


def canonical_zoh_eigenvalues(alpha, beta, m, dt):
    """Eigenvalues of the sampled scalar PD loop, larger modulus first."""
    for name, v in (("alpha", alpha), ("beta", beta), ("m", m), ("dt", dt)):
        if not v > 0:
            raise ConfigError(f"{name} must be positive, got {v!r}")
    disc = complex(beta * beta - 4.0 * m * alpha)
    root = cmath.sqrt(disc)
    lam1 = cmath.exp((-beta + root) / (2.0 * m) * dt)
    lam2 = cmath.exp((-beta - root) / (2.0 * m) * dt)
    return (lam1, lam2) if abs(lam1) >= abs(lam2) else (lam2, lam1)


def spectral_radius(a) -> float:
    a = np.atleast_2d(np.asarray(a, dtype=float))
    if a.shape[0] != a.shape[1]:
        raise ConfigError(f"spectral radius needs a square matrix, got {a.shape}")
    try:
        eig = np.linalg.eigvals(a)
    except np.linalg.LinAlgError as exc:
        raise NumericalError(f"eigenvalue solve failed: {exc}") from exc
    if not np.all(np.isfinite(eig)):
        raise NumericalError("eigenvalue solve returned non-finite values")
    return float(np.max(np.abs(eig))) if eig.size else 0.0
