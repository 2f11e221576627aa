"""Coherence-preserving optimal control of open quantum systems.

Lindblad dynamics on small dense density matrices, and a forward-backward
sweep for the minimum-energy control that keeps a coherence measure inside
a prescribed band.
"""
from .dynamics import ControlGrid, SystemModel, integrate_backward, integrate_forward
from .models import ExperimentConfig, QutritParams, build_qutrit, load_config, paper_defaults
from .operators import ConstraintSpec, DecoherenceChannel, DensityMatrix, coherence, coherence_squared
from .pmp import SolverConfig, SweepResult, sweep

__all__ = [
    "ConstraintSpec",
    "ControlGrid",
    "DecoherenceChannel",
    "DensityMatrix",
    "ExperimentConfig",
    "QutritParams",
    "SolverConfig",
    "SweepResult",
    "SystemModel",
    "build_qutrit",
    "coherence",
    "coherence_squared",
    "integrate_backward",
    "integrate_forward",
    "load_config",
    "paper_defaults",
    "sweep",
]
