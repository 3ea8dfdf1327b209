"""Exception types raised by the toolkit."""


class BCGainError(Exception):
    """Base class for all toolkit errors."""


class ConfigError(BCGainError, ValueError):
    """Invalid model, gain, noise or run configuration."""


class NumericalError(BCGainError, ArithmeticError):
    """A numerical routine could not produce a trustworthy result."""


class UnstableLoop(NumericalError):
    """The discrete closed loop is not Schur stable within the margin.

    Attributes
    ----------
    rho : float
        Spectral radius of the offending transition matrix.
    """

    def __init__(self, rho, margin=0.0, context=""):
        self.rho = float(rho)
        self.margin = float(margin)
        msg = f"closed loop not Schur stable: rho={self.rho!r} (margin {self.margin:g})"
        if context:
            msg = f"{context}: {msg}"
        super().__init__(msg)


class NotHurwitz(NumericalError):
    """A continuous-time matrix has an eigenvalue with non-negative real part."""

    def __init__(self, eigenvalues):
        self.eigenvalues = tuple(complex(v) for v in eigenvalues)
        worst = max(v.real for v in self.eigenvalues)
        super().__init__(f"matrix is not Hurwitz: max real eigenvalue part {worst!r}")
