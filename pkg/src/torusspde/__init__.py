"""Spectral Galerkin simulation and Monte-Carlo verification for SPDEs on the torus."""

__version__ = "0.1.0"

from . import cli, conditions, noise, operators, solver, spaces, verify  # noqa: F401
