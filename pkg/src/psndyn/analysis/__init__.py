"""Dynamical-systems analysis of cwnd traces."""

from .graph import QuantizationSpec, StateGraph, build_transition_graph, quantize_state
from .lyapunov import EmbeddingSpec, largest_lyapunov
from .pca import CwndSeries, PcaModel, WindowMatrix, pca_project, window_matrix
from .peaks import bifurcation_diagram, local_peaks
from .stats import FlowStats, dims_to_contribution, pearson, throughput

__all__ = [
    "CwndSeries", "EmbeddingSpec", "FlowStats", "PcaModel", "QuantizationSpec", "StateGraph",
    "WindowMatrix", "bifurcation_diagram", "build_transition_graph", "dims_to_contribution",
    "largest_lyapunov", "local_peaks", "pca_project", "pearson", "quantize_state", "throughput",
    "window_matrix",
]
