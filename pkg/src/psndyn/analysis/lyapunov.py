"""Largest Lyapunov exponent from a scalar series (Rosenstein's method)."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .. import _jit
from .._jit import njit
from ..errors import NoValidNeighbors, SeriesTooShort


@dataclass(frozen=True)
class EmbeddingSpec:
    dim: int = 5
    delay: int = 10  # samples
    theiler: int = 50  # temporal exclusion around each reference, samples
    horizon: int = 20  # divergence steps tracked
    fit: tuple[int, int] = (0, 10)  # step range for the slope, inclusive
    max_points: int = 5000  # series is truncated to its most recent samples

    def __post_init__(self):
        if self.dim < 1 or self.delay < 1 or self.theiler < 0 or self.horizon < 1:
            raise ValueError("invalid embedding parameters")
        lo, hi = self.fit
        if not 0 <= lo < hi <= self.horizon:
            raise ValueError("fit range must satisfy 0 <= start < stop <= horizon")


def delay_embed(x: np.ndarray, dim: int, delay: int) -> np.ndarray:
    n = x.size - (dim - 1) * delay
    if n <= 0:
        raise SeriesTooShort("series shorter than one embedding vector")
    return np.stack([x[i * delay: i * delay + n] for i in range(dim)], axis=1)


@njit
def _nearest_jit(y, m, theiler):
    nn = np.full(m, -1, dtype=np.int64)
    dim = y.shape[1]
    for i in range(m):
        best = np.inf
        for j in range(m):
            if abs(i - j) <= theiler:
                continue
            d = 0.0
            for c in range(dim):
                t = y[i, c] - y[j, c]
                d += t * t
                if d >= best:
                    break
            if d < best:
                best = d
                nn[i] = j
    return nn


def _nearest_numpy(y, m, theiler, chunk=128):
    cand = y[:m]
    nn = np.full(m, -1, dtype=np.int64)
    idx = np.arange(m)
    for a in range(0, m, chunk):
        b = min(a + chunk, m)
        d = ((cand[a:b, None, :] - cand[None, :, :]) ** 2).sum(axis=2)
        d[np.abs(idx[a:b, None] - idx[None, :]) <= theiler] = np.inf
        nn[a:b] = np.argmin(d, axis=1)
        nn[a:b][np.isinf(d.min(axis=1))] = -1
    return nn


def nearest_neighbors(y: np.ndarray, m: int, theiler: int) -> np.ndarray:
    """Index of each of the first ``m`` vectors' nearest neighbour outside the Theiler window."""
    if _jit.DISABLED:
        return _nearest_numpy(y, m, theiler)
    return _nearest_jit(np.ascontiguousarray(y), m, theiler)


def divergence_curve(y: np.ndarray, nn: np.ndarray, horizon: int) -> tuple[np.ndarray, int]:
    """Mean log distance ratio ln(d_k / d_0) over usable neighbour pairs.

    Pairs starting at zero distance contribute zero divergence while they stay
    together and are dropped once they separate (the embedding cannot resolve
    them). Pairs that later coincide exactly are dropped from that step on.
    """
    ref = np.nonzero(nn >= 0)[0]
    if ref.size == 0:
        raise NoValidNeighbors("no neighbour outside the Theiler window")
    nbr = nn[ref]
    d0 = np.linalg.norm(y[ref] - y[nbr], axis=1)
    curve = np.zeros(horizon + 1)
    alive = np.ones(ref.size, dtype=bool)
    used = 0
    for k in range(horizon + 1):
        dk = np.linalg.norm(y[ref + k] - y[nbr + k], axis=1)
        together = (d0 == 0.0) & (dk == 0.0)
        alive &= together | ((d0 > 0.0) & (dk > 0.0))
        if not alive.any():
            raise NoValidNeighbors("every neighbour pair became unusable")
        with np.errstate(divide="ignore", invalid="ignore"):
            ratio = np.where(together, 0.0, np.log(dk / np.where(d0 > 0, d0, 1.0)))
        curve[k] = ratio[alive].mean()
        used = int(alive.sum())
    return curve, used


def _slope(x: np.ndarray, y: np.ndarray) -> float:
    # y relative to its first value so an exactly flat curve gives exactly 0
    yr = y - y[0]
    xc = x - x.mean()
    return float((xc * yr).sum() / (xc * xc).sum())


def largest_lyapunov(series, embed: EmbeddingSpec = EmbeddingSpec(), dt: float | None = None) -> float:
    """Rosenstein estimate of the largest Lyapunov exponent, per unit of ``dt``.

    ``series`` may be a :class:`CwndSeries` (its ``dt`` is used) or an array
    (``dt`` defaults to 1, giving an exponent per sample).
    """
    x = np.asarray(getattr(series, "values", series), dtype=float)
    if dt is None:
        dt = float(getattr(series, "dt", 1.0))
    if x.size > embed.max_points:
        x = x[-embed.max_points:]
    y = delay_embed(x, embed.dim, embed.delay)
    m = y.shape[0] - embed.horizon
    if m < 2 * embed.theiler + 2:
        raise SeriesTooShort("series too short for the embedding, horizon and Theiler window")
    nn = nearest_neighbors(y, m, embed.theiler)
    curve, _ = divergence_curve(y, nn, embed.horizon)
    lo, hi = embed.fit
    steps = np.arange(lo, hi + 1, dtype=float)
    return _slope(steps * dt, curve[lo:hi + 1])
