"""Mixed finite element solvers for saturated and unsaturated soil consolidation.

Three model problems share one discretization stack: 1D Terzaghi
consolidation (``mp1``), 2D saturated poroelasticity under a strip footing
(``mp2``) and 2D gravity drainage of an unsaturated sand column (``mp3``).
"""
from ._jit import backend
from .errors import (
    DegenerateElementError,
    DivergedStateError,
    InvalidConfigError,
    InvalidRequestError,
    NonconvergenceError,
    PorofemError,
    SolverError,
)
from .problems import PRESETS, build_problem, get_preset, run_preset

__version__ = "0.1.0"

__all__ = [
    "PRESETS",
    "DegenerateElementError",
    "DivergedStateError",
    "InvalidConfigError",
    "InvalidRequestError",
    "NonconvergenceError",
    "PorofemError",
    "SolverError",
    "backend",
    "build_problem",
    "get_preset",
    "run_preset",
]
