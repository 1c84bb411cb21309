"""Quartic-root Finsler metrics ``F = (alpha^4 + beta^4)^(1/4) + beta`` on coordinate patches.

Metric evaluation with exact forward-mode derivatives, sprays and geodesics,
reversibility and projective-flatness checks, and the induced quasi-metric.
"""

from .config import *  # noqa: F401,F403
from .expr import *  # noqa: F401,F403
from .flatness import *  # noqa: F401,F403
from .geodesics import *  # noqa: F401,F403
from .metric import *  # noqa: F401,F403
from .one_forms import *  # noqa: F401,F403
from .quasimetric import *  # noqa: F401,F403
from .reports import *  # noqa: F401,F403
from . import config, expr, flatness, geodesics, metric, one_forms, quasimetric, reports

__version__ = "0.1.0"

__all__ = sorted(
    set(config.__all__)
    | set(expr.__all__)
    | set(flatness.__all__)
    | set(geodesics.__all__)
    | set(metric.__all__)
    | set(one_forms.__all__)
    | set(quasimetric.__all__)
    | set(reports.__all__)
)
