"""Gain-dependent error propagation in PD-controlled behavior cloning rollouts.

Submodules
----------
dynamics     error dynamics and exact ZOH discretization
lyapunov     proxy matrices and Lyapunov solvers
bounds       amplification index and tail/failure bounds
canonical    scalar closed forms, regime ordering, multi-joint reduction
montecarlo   seeded ensemble simulation
experiments  reproduction drivers
cli          command-line interface
"""

__version__ = "0.1.0"

from ._backend import NAME as backend  # noqa: E402
