"""Simulation and end-to-end phase training for stacked-surface MIMO links."""

from .config import ExperimentSpec, TrainConfig, parse_config
from .sisnet import PhaseStack
from .trainer import evaluate, train

__all__ = ["ExperimentSpec", "PhaseStack", "TrainConfig", "evaluate", "parse_config", "train"]
__version__ = "0.1.0"
