"""Per-flow statistics and plot-ready tables built from simulation runs."""

from __future__ import annotations

import math
import warnings

import numpy as np

from .analysis import (
    EmbeddingSpec, FlowStats, StateGraph, bifurcation_diagram, build_transition_graph,
    dims_to_contribution, largest_lyapunov, pca_project, pearson, window_matrix,
)
from .analysis.pca import PcaModel
from .config import AnalysisConfig
from .errors import AllZeroSpectrum, DegenerateInput, MissingTrace, NoValidNeighbors, SeriesTooShort, ZeroVariance
from .scenario import RunArtifacts, SweepArtifacts


def embedding(a: AnalysisConfig) -> EmbeddingSpec:
    return EmbeddingSpec(a.embed_dim, a.embed_delay, a.theiler, a.lyapunov_horizon, tuple(a.lyapunov_fit),
                         a.lyapunov_points)


def _check_flow(run: RunArtifacts, flow: int) -> None:
    if not 0 <= flow < run.n_flows:
        raise MissingTrace(f"run has no cwnd trace for flow {flow}")


def flow_pca(run: RunArtifacts, flow: int, a: AnalysisConfig = AnalysisConfig()) -> PcaModel:
    _check_flow(run, flow)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", DegenerateInput)
        return pca_project(window_matrix(run.series(flow), a.window))


def bursts(run: RunArtifacts):
    return run.schedule.windows if run.schedule is not None else None


def flow_graph(run: RunArtifacts, flow: int, a: AnalysisConfig = AnalysisConfig(),
               model: PcaModel | None = None) -> StateGraph:
    model = flow_pca(run, flow, a) if model is None else model
    return build_transition_graph(model.projections, a.bins, bursts(run), a.window)


def n_dims(model: PcaModel, threshold: float = 0.99) -> int:
    """Dimensions for the contribution threshold; 0 for a flat trace with no variance at all."""
    try:
        return dims_to_contribution(model.eigenvalues, threshold)
    except AllZeroSpectrum:
        return 0


def flow_lyapunov(run: RunArtifacts, flow: int, a: AnalysisConfig = AnalysisConfig()) -> float:
    s = run.series(flow)
    if np.ptp(s.values) == 0:
        return 0.0
    try:
        return largest_lyapunov(s, embedding(a))
    except (SeriesTooShort, NoValidNeighbors):
        return math.nan


def flow_stats(run: RunArtifacts, flow: int, a: AnalysisConfig = AnalysisConfig(),
               lyapunov: bool = True) -> FlowStats:
    _check_flow(run, flow)
    model = flow_pca(run, flow, a)
    g = flow_graph(run, flow, a, model)
    c = run.counters
    sent, dropped = int(c["sent"][flow]), int(c["dropped"][flow])
    thr = 1.0 if sent == 0 else (sent - dropped) / sent
    return FlowStats(
        flow_id=flow, duty=run.config.duty, sent=sent, delivered=int(c["delivered"][flow]), dropped=dropped,
        throughput=thr, n_states=g.n_states, n_dims_99=n_dims(model),
        lyapunov=flow_lyapunov(run, flow, a) if lyapunov else math.nan, perturbed=run.config.perturb,
    )


def run_stats(run: RunArtifacts, a: AnalysisConfig = AnalysisConfig(), lyapunov: bool = True) -> list[FlowStats]:
    return [flow_stats(run, f, a, lyapunov) for f in range(run.n_flows)]


def sweep_stats(sweep: SweepArtifacts, a: AnalysisConfig = AnalysisConfig(),
                lyapunov: bool = True) -> list[FlowStats]:
    out = []
    for key in sorted(sweep.runs):
        out.extend(run_stats(sweep.runs[key], a, lyapunov))
    return out


def _safe_r(x, y) -> float:
    try:
        return pearson(x, y)
    except ZeroVariance:
        return math.nan


def correlations(stats: list[FlowStats], perturbed: bool = False) -> list[dict]:
    """Per-flow Pearson r of states vs drops and states vs dimensions across duties."""
    rows = [s for s in stats if s.perturbed == perturbed]
    out = []
    for f in sorted({s.flow_id for s in rows}):
        fr = sorted((s for s in rows if s.flow_id == f), key=lambda s: s.duty)
        ns = [s.n_states for s in fr]
        out.append({
            "flow": f,
            "r_states_drops": _safe_r(ns, [s.dropped for s in fr]),
            "r_states_dims": _safe_r(ns, [s.n_dims_99 for s in fr]),
        })
    return out


def distinct_peaks(values, bin_width: float = 0.5) -> int:
    v = np.asarray(values, dtype=float)
    if v.size == 0:
        return 0
    return int(np.unique(np.floor(v / bin_width + 1e-9)).size)


def bifurcation_points(sweep: SweepArtifacts, flow: int, perturbed: bool = False,
                       a: AnalysisConfig = AnalysisConfig()) -> list[tuple[float, float]]:
    duties = [d for d, p in sorted(sweep.runs) if p == perturbed]
    traces = {d: sweep.get(d, perturbed).series(flow) for d in duties}
    durations = [t.duration for t in traces.values()]
    settle = a.settle_fraction * durations[0] if durations else None
    return bifurcation_diagram(traces, duties, settle)


def peak_counts(sweep: SweepArtifacts, flow: int, perturbed: bool = False,
                a: AnalysisConfig = AnalysisConfig()) -> dict[float, int]:
    pts = bifurcation_points(sweep, flow, perturbed, a)
    duties = sorted({d for d, _ in pts})
    return {d: distinct_peaks([p for dd, p in pts if dd == d], a.peak_bin) for d in duties}
