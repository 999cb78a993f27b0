"""Boundary-element tools for equivalent-current reconstruction on closed
surfaces, with quasi-Helmholtz stabilized formulations and an experiment CLI.
"""

__version__ = "0.1.0"

from .exceptions import LovebemError

__all__ = ["LovebemError", "__version__"]
