from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np

from ..errors import DegenerateInput, NonDivisibleWindow


@dataclass
class CwndSeries:
    flow_id: int
    dt: float
    values: np.ndarray

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=float)
        if self.dt <= 0:
            raise ValueError("dt must be positive")

    @property
    def duration(self) -> float:
        return self.values.size * self.dt

    def __len__(self) -> int:
        return self.values.size


@dataclass
class WindowMatrix:
    data: np.ndarray  # (windows, samples per window)
    T: float

    @property
    def n_windows(self) -> int:
        return self.data.shape[0]

    @property
    def n_samples(self) -> int:
        return self.data.shape[1]


def _exact_ratio(a: float, b: float, what: str) -> int:
    q = a / b
    n = int(round(q))
    if n < 1 or abs(q - n) > 1e-9 * max(1.0, q):
        raise NonDivisibleWindow(f"{what}: {a} is not a whole multiple of {b}")
    return n


def window_matrix(series: CwndSeries, T: float) -> WindowMatrix:
    """Cut a series into consecutive non-overlapping windows of ``T`` seconds."""
    per = _exact_ratio(T, series.dt, "window length")
    if series.values.size % per:
        raise NonDivisibleWindow(f"{series.values.size} samples do not split into windows of {per}")
    return WindowMatrix(series.values.reshape(-1, per), T)


@dataclass
class PcaModel:
    mean: np.ndarray
    eigenvalues: np.ndarray  # descending, length min(W, S)
    components: np.ndarray  # rows are orthonormal eigenvectors
    projections: np.ndarray  # (W, k)

    @property
    def k(self) -> int:
        return self.projections.shape[1]

    def reconstruct(self, data: np.ndarray, d: int) -> np.ndarray:
        """Rank-``d`` reconstruction of ``data`` in this basis."""
        v = self.components[:d]
        xc = np.asarray(data, dtype=float) - self.mean
        return (xc @ v.T) @ v + self.mean


def _fix_signs(vt: np.ndarray) -> np.ndarray:
    idx = np.argmax(np.abs(vt), axis=1)
    signs = np.sign(vt[np.arange(vt.shape[0]), idx])
    signs[signs == 0] = 1.0
    return vt * signs[:, None]


def pca_project(m: WindowMatrix | np.ndarray, k: int = 2) -> PcaModel:
    """Project each window (row) onto the top-``k`` principal axes.

    Columns are mean-centred, not scaled; the covariance is taken over
    windows with W - 1 normalisation. Each eigenvector is signed so its
    largest-magnitude entry is positive.
    """
    x = np.asarray(getattr(m, "data", m), dtype=float)
    w, s = x.shape
    if w < 2:
        raise ValueError("PCA needs at least two windows")
    mean = x.mean(axis=0)
    xc = x - mean
    r = min(w, s)
    if not np.any(xc):
        warnings.warn("all windows identical; projections are zero", DegenerateInput, stacklevel=2)
        comps = np.eye(r, s)
        return PcaModel(mean, np.zeros(r), comps, np.zeros((w, k)))
    _, sv, vt = np.linalg.svd(xc, full_matrices=False)
    vt = _fix_signs(vt)
    eig = sv**2 / (w - 1)
    return PcaModel(mean, eig, vt, xc @ vt[:k].T)
