from __future__ import annotations

import math
from dataclasses import asdict, dataclass

import numpy as np

from ..errors import AllZeroSpectrum, InvalidCounts, ZeroVariance


def throughput(sent: int, drops: int) -> float:
    """Fraction of sent packets that were not dropped; 1.0 for an idle flow."""
    if drops < 0 or sent < 0 or drops > sent:
        raise InvalidCounts(f"need sent >= drops >= 0, got sent={sent}, drops={drops}")
    if sent == 0:
        return 1.0
    return (sent - drops) / sent


def dims_to_contribution(eigenvalues, threshold: float = 0.99) -> int:
    """Smallest number of leading components whose eigenvalue share reaches ``threshold``."""
    lam = np.asarray(eigenvalues, dtype=float)
    if not 0.0 < threshold <= 1.0:
        raise ValueError("threshold must lie in (0, 1]")
    total = lam.sum()
    if lam.size == 0 or total <= 0.0:
        raise AllZeroSpectrum("eigenvalue spectrum sums to zero")
    share = np.cumsum(lam) / total
    # absorb summation round-off at the boundary
    return int(np.searchsorted(share, threshold - 1e-12, side="left")) + 1


def pearson(a, b) -> float:
    x = np.asarray(a, dtype=float)
    y = np.asarray(b, dtype=float)
    if x.shape != y.shape or x.ndim != 1 or x.size < 2:
        raise ValueError("pearson needs two equal-length sequences of length >= 2")
    xc = x - x.mean()
    yc = y - y.mean()
    sxx = float(xc @ xc)
    syy = float(yc @ yc)
    if sxx == 0.0 or syy == 0.0:
        raise ZeroVariance("correlation undefined for a constant sequence")
    r = float(xc @ yc) / math.sqrt(sxx * syy)
    return max(-1.0, min(1.0, r))


@dataclass
class FlowStats:
    flow_id: int
    duty: float
    sent: int
    delivered: int
    dropped: int
    throughput: float
    n_states: int
    n_dims_99: int
    lyapunov: float = float("nan")
    perturbed: bool = False

    def __post_init__(self):
        if not 0.0 <= self.throughput <= 1.0:
            raise ValueError("throughput outside [0, 1]")
        if self.dropped > self.sent:
            raise InvalidCounts("dropped exceeds sent")

    def as_row(self) -> dict:
        return asdict(self)
