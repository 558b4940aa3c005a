"""Perception-latency scheduling: discretization, belief propagation,
admissible schedule sets, planning and Monte Carlo simulation."""

from ._latsched import *  # noqa: F401,F403
from ._latsched import LatschedError, ConfigError  # noqa: F401

__version__ = "0.1.0"
