"""Frequency-secure islanding of networked microgrids.

The package builds a mixed-integer second-order cone model of the linking
grid, solves it by branch-and-bound over an interior-point relaxation, and
adds linear frequency-security cuts until every islanded component keeps its
frequency nadir and steady state within limits.
"""

__version__ = "0.1.0"

from .case import NetworkCase, SwitchConfig, bundled_case_path, load_case, with_severity  # noqa: E402
from .conic import SolveSettings, solve_misocp  # noqa: E402
from .cuts import run, verify  # noqa: E402
from .ufls import simulate_ufls  # noqa: E402

__all__ = [
    "__version__",
    "NetworkCase",
    "SwitchConfig",
    "SolveSettings",
    "bundled_case_path",
    "load_case",
    "with_severity",
    "solve_misocp",
    "run",
    "verify",
    "simulate_ufls",
]
