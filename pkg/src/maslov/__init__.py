"""Maslov index of unstable-subspace paths via Riccati singularity tracking.

Given a symmetric potential V(x) with limits at both infinities, the library
integrates the Lagrangian frame of the unstable plane for the first-order
system attached to u'' + V(x) u = lambda u, follows the eigenvalue branches
of S = YX^-1 through their poles, and sums the signed crossing contributions
into the Maslov index. The hot integration loop runs in a compiled kernel
when available, with a pure-numpy fallback selected at import time.
"""

from ._backend import BACKEND_NAME
from .errors import MaslovError
from .examples import (
    analytic_maslov,
    example1_analytic_s,
    example1_problem,
    example2_analytic_branches,
    example2_problem,
)
from .integrate import IntegratorConfig, evolve, step
from .lagrangian import Frame, continuous_s, crossing_form, frame_rhs, riccati_rhs, riccati_s
from .problem import (
    Problem,
    load_tabulated,
    stable_frame_at_plus_infinity,
    unstable_frame_at_minus_infinity,
)
from .tracker import (
    CrossingRecord,
    Evolution,
    MaslovResult,
    classify_crossing,
    locate_crossing,
    maslov_index,
    sweep,
)

__version__ = "0.1.0"

__all__ = [
    "BACKEND_NAME",
    "CrossingRecord",
    "Evolution",
    "Frame",
    "IntegratorConfig",
    "MaslovError",
    "MaslovResult",
    "Problem",
    "analytic_maslov",
    "classify_crossing",
    "continuous_s",
    "crossing_form",
    "evolve",
    "example1_analytic_s",
    "example1_problem",
    "example2_analytic_branches",
    "example2_problem",
    "frame_rhs",
    "load_tabulated",
    "locate_crossing",
    "maslov_index",
    "riccati_rhs",
    "riccati_s",
    "stable_frame_at_plus_infinity",
    "step",
    "sweep",
    "unstable_frame_at_minus_infinity",
]
