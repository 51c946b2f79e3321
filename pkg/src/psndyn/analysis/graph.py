from __future__ import annotations

import json
import math
from collections import Counter
from dataclasses import dataclass, field

import numpy as np


@dataclass(frozen=True)
class QuantizationSpec:
    """Per-axis uniform grid over the observed range of the projections."""

    bins: int = 100
    mins: tuple[float, float] = (0.0, 0.0)
    widths: tuple[float, float] = (0.0, 0.0)  # 0 marks a collapsed axis

    @classmethod
    def fit(cls, points, bins: int = 100, rtol: float = 1e-9) -> "QuantizationSpec":
        p = np.asarray(points, dtype=float)
        if bins < 1:
            raise ValueError("bins must be >= 1")
        lo = p.min(axis=0)
        span = p.max(axis=0) - lo
        # spans at round-off level of the dominant axis carry no information
        tol = rtol * max(1.0, float(span.max()))
        widths = tuple(float(sp / bins) if sp > tol else 0.0 for sp in span)
        return cls(bins, (float(lo[0]), float(lo[1])), widths)


def quantize_state(p, grid: QuantizationSpec) -> tuple[int, int]:
    out = []
    for axis in range(2):
        w = grid.widths[axis]
        if w == 0.0:
            out.append(0)
            continue
        i = math.floor((float(p[axis]) - grid.mins[axis]) / w)
        out.append(min(max(i, 0), grid.bins - 1))
    return out[0], out[1]


@dataclass
class StateNode:
    id: int
    key: tuple[int, int]
    coords: tuple[float, float]
    first_window: int
    perturbed: bool = False


@dataclass
class StateGraph:
    nodes: list[StateNode]
    edges: dict[tuple[int, int], int]
    order: list[int]
    bins: int
    perturbed_edges: set = field(default_factory=set)

    @property
    def n_states(self) -> int:
        return len(self.nodes)

    @property
    def total_weight(self) -> int:
        return sum(self.edges.values())

    def to_dot(self, name: str = "states") -> str:
        lines = [f"digraph {name} {{", f'  graph [comment="bins={self.bins}"];']
        for n in self.nodes:
            attrs = f'label="{n.id}"'
            if n.perturbed:
                attrs += ' color="blue" perturbed="true"'
            lines.append(f"  s{n.id} [{attrs}];")
        for (a, b), wgt in sorted(self.edges.items()):
            attrs = f'label="{wgt}" weight={wgt}'
            if (a, b) in self.perturbed_edges:
                attrs += ' color="blue"'
            lines.append(f"  s{a} -> s{b} [{attrs}];")
        lines.append("}")
        return "\n".join(lines) + "\n"

    def to_json(self) -> str:
        return json.dumps({
            "bins": self.bins,
            "nodes": [
                {"id": n.id, "key": list(n.key), "coords": list(n.coords),
                 "first_window": n.first_window, "perturbed": n.perturbed}
                for n in self.nodes
            ],
            "edges": [
                {"from": a, "to": b, "weight": w, "perturbed": (a, b) in self.perturbed_edges}
                for (a, b), w in sorted(self.edges.items())
            ],
            "order": self.order,
        }, indent=1)

    @classmethod
    def from_json(cls, text: str) -> "StateGraph":
        d = json.loads(text)
        nodes = [StateNode(n["id"], tuple(n["key"]), tuple(n["coords"]), n["first_window"], n["perturbed"])
                 for n in d["nodes"]]
        edges = {(e["from"], e["to"]): e["weight"] for e in d["edges"]}
        pert = {(e["from"], e["to"]) for e in d["edges"] if e["perturbed"]}
        return cls(nodes, edges, d["order"], d["bins"], pert)


def perturbed_windows(n_windows: int, window_len: float, bursts, aftershock: int = 1) -> np.ndarray:
    """Boolean mask of windows overlapping a burst, plus ``aftershock`` windows after each."""
    mask = np.zeros(n_windows, dtype=bool)
    for start, end in bursts:
        first = int(math.floor(start / window_len))
        last = int(math.ceil(end / window_len)) - 1
        lo = max(first, 0)
        hi = min(last + aftershock, n_windows - 1)
        if lo <= hi:
            mask[lo:hi + 1] = True
    return mask


def build_transition_graph(projections, quantization: QuantizationSpec | int = 100, bursts=None,
                           window_len: float = 10.0) -> StateGraph:
    """Link consecutive quantized window states into a weighted digraph.

    ``bursts`` is an iterable of (start, end) seconds; a state whose first
    visit falls in a burst window or the one after it is marked perturbed.
    """
    p = np.asarray(projections, dtype=float)[:, :2]
    if p.shape[0] < 2:
        raise ValueError("need at least two projected windows")
    grid = quantization if isinstance(quantization, QuantizationSpec) else QuantizationSpec.fit(p, quantization)
    mask = (perturbed_windows(p.shape[0], window_len, bursts) if bursts is not None
            else np.zeros(p.shape[0], dtype=bool))
    ids: dict[tuple[int, int], int] = {}
    nodes: list[StateNode] = []
    order: list[int] = []
    for w, pt in enumerate(p):
        key = quantize_state(pt, grid)
        sid = ids.get(key)
        if sid is None:
            sid = len(nodes)
            ids[key] = sid
            nodes.append(StateNode(sid, key, (float(pt[0]), float(pt[1])), w, bool(mask[w])))
        order.append(sid)
    edges = Counter(zip(order[:-1], order[1:]))
    pert_edges = {(order[i - 1], order[i]) for i in range(1, len(order)) if mask[i]}
    return StateGraph(nodes, dict(edges), order, grid.bins, pert_edges)
