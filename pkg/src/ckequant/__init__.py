"""Numerical laboratory for balanced Bergman metrics of coupled
Kahler-Einstein type on projective testbeds."""

__version__ = "0.1.0"

from .config import ExperimentConfig, GridConfig, SolverConfig, TestbedSpec

__all__ = ["ExperimentConfig", "GridConfig", "SolverConfig", "TestbedSpec",
           "__version__"]
