import warnings

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from psndyn.analysis import CwndSeries, pca_project, window_matrix
from psndyn.errors import DegenerateInput, NonDivisibleWindow


def jacobi_eigh(a, tol=1e-14, sweeps=100):
    """Cyclic Jacobi rotations on a symmetric matrix: a reference that shares no code with LAPACK."""
    a = np.array(a, dtype=float)
    n = a.shape[0]
    v = np.eye(n)
    for _ in range(sweeps):
        off = np.sqrt(np.sum(np.tril(a, -1) ** 2))
        if off < tol * max(1.0, np.abs(a).max()):
            break
        for p in range(n - 1):
            for q in range(p + 1, n):
                if a[p, q] == 0.0:
                    continue
                theta = (a[q, q] - a[p, p]) / (2.0 * a[p, q])
                t = np.sign(theta) / (abs(theta) + np.sqrt(theta * theta + 1.0)) if theta != 0 else 1.0
                c = 1.0 / np.sqrt(t * t + 1.0)
                s = t * c
                rot = np.eye(n)
                rot[p, p] = rot[q, q] = c
                rot[p, q] = s
                rot[q, p] = -s
                a = rot.T @ a @ rot
                v = v @ rot
    w = np.diag(a)
    order = np.argsort(w)[::-1]
    return w[order], v[:, order]


def oracle(x, k=2):
    xc = x - x.mean(axis=0)
    cov = xc.T @ xc / (x.shape[0] - 1)
    w, v = jacobi_eigh(cov)
    for j in range(v.shape[1]):
        i = np.argmax(np.abs(v[:, j]))
        if v[i, j] < 0:
            v[:, j] = -v[:, j]
    return w, xc @ v[:, :k]


def test_random_10x4_matches_oracle(rng):
    x = rng.normal(size=(10, 4))
    m = pca_project(x)
    w, proj = oracle(x)
    np.testing.assert_allclose(m.eigenvalues, w[:4], atol=1e-8)
    np.testing.assert_allclose(m.projections, proj, atol=1e-8)


@settings(max_examples=60, deadline=None)
@given(st.integers(2, 20), st.integers(2, 20), st.integers(0, 2**32 - 1))
def test_random_matrices_match_oracle(w, s, seed):
    x = np.random.default_rng(seed).normal(size=(w, s)) * 5
    m = pca_project(x)
    ew, proj = oracle(x)
    r = min(w, s)
    np.testing.assert_allclose(m.eigenvalues, np.clip(ew[:r], 0, None), atol=1e-8)
    gap = np.abs(np.diff(ew[:3]))
    if np.all(gap > 1e-6):  # sign/basis is only unique for separated eigenvalues
        np.testing.assert_allclose(m.projections, proj, atol=1e-8)


@settings(max_examples=60, deadline=None)
@given(st.integers(3, 15), st.integers(2, 15), st.integers(0, 2**32 - 1))
def test_model_invariants(w, s, seed):
    x = np.random.default_rng(seed).normal(size=(w, s))
    m = pca_project(x)
    lam = m.eigenvalues
    assert np.all(lam >= 0) and np.all(np.diff(lam) <= 1e-12)
    np.testing.assert_allclose(m.components @ m.components.T, np.eye(len(lam)), atol=1e-8)
    var = m.projections.var(axis=0, ddof=1)
    np.testing.assert_allclose(var, lam[:2], atol=1e-8)
    assert var[0] >= var[1] - 1e-8
    errs = [np.linalg.norm(x - m.reconstruct(x, d)) for d in range(len(lam) + 1)]
    assert all(b <= a + 1e-9 for a, b in zip(errs, errs[1:]))
    np.testing.assert_allclose(m.reconstruct(x, len(lam)), x, atol=1e-8)


def test_identical_windows_degenerate():
    with pytest.warns(DegenerateInput):
        m = pca_project(np.tile(np.arange(5.0), (4, 1)))
    assert np.all(m.projections == 0) and np.all(m.eigenvalues == 0)


def test_rank_one_data(rng):
    u = rng.normal(size=8)
    x = np.outer(rng.normal(size=12), u)
    m = pca_project(x)
    assert m.eigenvalues[1] == pytest.approx(0, abs=1e-10)
    np.testing.assert_allclose(m.projections[:, 1], 0, atol=1e-8)


def test_window_matrix_shapes():
    s = CwndSeries(0, 0.01, np.arange(1_000_000.0))
    wm = window_matrix(s, 10.0)
    assert (wm.n_windows, wm.n_samples) == (1000, 1000)
    small = window_matrix(CwndSeries(0, 1.0, np.arange(20.0)), 5.0)
    assert small.data.shape == (4, 5)
    np.testing.assert_array_equal(small.data[1], [5, 6, 7, 8, 9])
    assert window_matrix(CwndSeries(0, 0.5, np.arange(8.0)), 4.0).data.shape == (1, 8)


def test_window_matrix_rejects_ragged():
    with pytest.raises(NonDivisibleWindow):
        window_matrix(CwndSeries(0, 1.0, np.arange(21.0)), 5.0)
    with pytest.raises(NonDivisibleWindow):
        window_matrix(CwndSeries(0, 0.3, np.arange(20.0)), 1.0)


def test_needs_two_windows():
    with warnings.catch_warnings():
        with pytest.raises(ValueError):
            pca_project(np.ones((1, 4)))
