"""Binomial AR(1) models: simulation, partial-likelihood fitting and
sequential change-point monitoring."""

from ._core import *  # noqa: F401,F403
from ._core import __doc__  # noqa: F401
