"""Headless multi-robot exploration simulator with particle-filter localisation
and pheromone-style coordination through a central supervisor."""

from .sim import RunConfig, run

__all__ = ["RunConfig", "run"]
__version__ = "0.1.0"
