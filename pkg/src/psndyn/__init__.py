"""Packet-switching network simulator with TCP NewReno and cwnd dynamics analysis."""

from ._jit import backend
from .scenario import (
    ExperimentConfig, LinkParams, RunArtifacts, SweepArtifacts, TcpParams, assign_flows, build_line_topology,
    perturbation_windows, run_experiment, run_sweep,
)

__version__ = "0.1.0"

__all__ = [
    "ExperimentConfig", "LinkParams", "RunArtifacts", "SweepArtifacts", "TcpParams", "__version__",
    "assign_flows", "backend", "build_line_topology", "perturbation_windows", "run_experiment", "run_sweep",
]
