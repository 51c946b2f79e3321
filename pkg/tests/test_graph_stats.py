import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from psndyn.analysis import (
    FlowStats, QuantizationSpec, StateGraph, build_transition_graph, dims_to_contribution, pearson,
    quantize_state, throughput,
)
from psndyn.analysis.graph import perturbed_windows
from psndyn.errors import AllZeroSpectrum, InvalidCounts, ZeroVariance


def test_abab_sequence():
    p = np.array([[0.0, 0.0], [1.0, 1.0], [0.0, 0.0], [1.0, 1.0]])
    g = build_transition_graph(p, 10)
    assert g.n_states == 2
    assert g.edges == {(0, 1): 2, (1, 0): 1}


def test_constant_sequence_self_loop():
    g = build_transition_graph(np.full((5, 2), 3.0), 100)
    assert g.n_states == 1 and g.edges == {(0, 0): 4}


def test_single_bin_grid():
    p = np.random.default_rng(0).normal(size=(30, 2))
    assert build_transition_graph(p, 1).n_states == 1


def test_quantize_rule():
    grid = QuantizationSpec.fit(np.array([[0.0, 0.0], [10.0, 20.0]]), bins=10)
    assert quantize_state((0.0, 0.0), grid) == quantize_state((0.0, 0.0), grid) == (0, 0)
    assert quantize_state((3.5, 4.1), grid) == (3, 2)
    assert quantize_state((10.0, 20.0), grid) == (9, 9)  # the top edge folds into the last bin
    assert quantize_state((1.2, 0), grid) != quantize_state((2.3, 0), grid)


def test_collapsed_axis():
    p = np.column_stack([np.linspace(0, 1, 10), np.full(10, 1e-13)])
    p[3, 1] = -1e-13
    g = build_transition_graph(p, 100)
    assert {n.key[1] for n in g.nodes} == {0}


@settings(max_examples=100, deadline=None)
@given(st.integers(2, 300), st.integers(1, 120), st.integers(0, 2**32 - 1))
def test_graph_invariants(w, bins, seed):
    p = np.random.default_rng(seed).normal(size=(w, 2))
    g = build_transition_graph(p, bins)
    assert g.total_weight == w - 1
    assert g.n_states <= w
    assert len(g.order) == w
    again = build_transition_graph(p, bins)
    assert again.to_json() == g.to_json()
    assert StateGraph.from_json(g.to_json()).to_json() == g.to_json()


def test_perturbed_attribution():
    # windows of 10 s; one burst at [100, 110) touches window 10, the aftershock window 11
    mask = perturbed_windows(30, 10.0, [(100.0, 110.0)])
    assert list(np.nonzero(mask)[0]) == [10, 11]
    p = np.column_stack([np.arange(30.0), np.zeros(30)])
    g = build_transition_graph(p, 100, bursts=[(100.0, 110.0)], window_len=10.0)
    assert [n.id for n in g.nodes if n.perturbed] == [10, 11]
    assert g.perturbed_edges == {(9, 10), (10, 11)}
    dot = g.to_dot("flow0")
    assert dot.startswith("digraph flow0 {") and 's10 [label="10" color="blue"' in dot
    assert 's0 -> s1 [label="1" weight=1];' in dot


def test_throughput():
    assert throughput(1000, 20) == 0.98
    assert throughput(5000, 50) == 0.99
    assert throughput(7, 0) == 1.0 and throughput(0, 0) == 1.0
    with pytest.raises(InvalidCounts):
        throughput(5, 6)


def test_dims_to_contribution():
    assert dims_to_contribution([99, 1]) == 1
    assert dims_to_contribution([1, 1, 1, 1]) == 4
    with pytest.raises(AllZeroSpectrum):
        dims_to_contribution([0, 0])


@given(st.lists(st.floats(0, 100), min_size=1, max_size=30), st.floats(0.01, 1.0), st.floats(0.01, 1.0))
def test_dims_monotone_in_threshold(lam, a, b):
    lam = sorted(lam, reverse=True)
    if sum(lam) <= 0:
        return
    lo, hi = min(a, b), max(a, b)
    assert dims_to_contribution(lam, lo) <= dims_to_contribution(lam, hi)


def test_pearson():
    a = np.array([1.0, 2.0, 4.0, 8.0])
    assert pearson(a, a) == 1.0
    assert pearson(a, -a) == -1.0
    assert pearson(a, 3 * a + 2) == pytest.approx(1.0)
    with pytest.raises(ZeroVariance):
        pearson(a, np.ones(4))


@given(st.lists(st.tuples(st.floats(-1e3, 1e3), st.floats(-1e3, 1e3)), min_size=3, max_size=40))
def test_pearson_matches_numpy(pairs):
    x, y = np.array(pairs).T
    if np.ptp(x) < 1e-6 or np.ptp(y) < 1e-6:
        return
    assert pearson(x, y) == pytest.approx(np.corrcoef(x, y)[0, 1], abs=1e-9)


def test_flow_stats_validation():
    s = FlowStats(0, 0.5, 100, 95, 5, 0.95, 10, 3)
    assert math.isnan(s.as_row()["lyapunov"])
    with pytest.raises(ValueError):
        FlowStats(0, 0.5, 100, 95, 5, 1.5, 10, 3)
    with pytest.raises(InvalidCounts):
        FlowStats(0, 0.5, 1, 1, 5, 0.5, 10, 3)
