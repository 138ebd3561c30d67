"""Two-timescale resource allocation simulator for collaborative MEC systems."""

from .config import AgentParams, ExperimentSpec, GaParams, SystemConfig

__all__ = ["AgentParams", "ExperimentSpec", "GaParams", "SystemConfig"]
__version__ = "0.1.0"
