from __future__ import annotations

from collections.abc import Mapping, Sequence

import numpy as np

from ..errors import MissingTrace, SeriesTooShort
from .pca import CwndSeries


def local_peaks(series) -> np.ndarray:
    """Values of the interior local maxima of a sampled series.

    A peak is a strict rise followed, possibly after a flat run, by a strict
    fall; a flat-topped peak is reported once. Endpoints never count, so a
    monotone series has no peaks.
    """
    v = np.asarray(getattr(series, "values", series), dtype=float)
    if v.size < 3:
        raise SeriesTooShort("local_peaks needs at least 3 samples")
    # collapse flat runs to one value each
    keep = np.empty(v.size, dtype=bool)
    keep[0] = True
    np.not_equal(v[1:], v[:-1], out=keep[1:])
    r = v[keep]
    if r.size < 3:
        return np.empty(0)
    mid = r[1:-1]
    return mid[(r[:-2] < mid) & (mid > r[2:])]


def bifurcation_diagram(traces: Mapping[float, CwndSeries], duty_grid: Sequence[float],
                        settle: float | None = None) -> list[tuple[float, float]]:
    """Scatter points (duty, peak) from the post-transient part of each trace.

    ``settle`` defaults to the first 10% of each run. A series with no peaks
    after settling is a fixed point and contributes its final value once.
    """
    points: list[tuple[float, float]] = []
    for duty in duty_grid:
        if duty not in traces:
            raise MissingTrace(f"no cwnd trace for duty {duty}")
        s = traces[duty]
        v = np.asarray(s.values, dtype=float)
        cut = 0.1 * s.duration if settle is None else settle
        start = int(np.ceil(cut / s.dt - 1e-9))
        tail = v[start:]
        if tail.size == 0:
            continue
        peaks = local_peaks(tail) if tail.size >= 3 else np.empty(0)
        if peaks.size == 0:
            points.append((float(duty), float(tail[-1])))
        else:
            points.extend((float(duty), float(p)) for p in peaks)
    return points
