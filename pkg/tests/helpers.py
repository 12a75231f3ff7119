"""Shared construction helpers for the test suite."""

import numpy as np

from pppa import QpInstance, SymMatrix


def random_symmetric(rng, n, spread=1.0):
    a = rng.uniform(-spread, spread, size=(n, n))
    return SymMatrix.from_dense(np.tril(a) + np.tril(a, -1).T)


def random_pd(rng, n):
    a = rng.uniform(-1.0, 1.0, size=(n, n))
    return SymMatrix.from_dense(a @ a.T + n * np.eye(n))


def random_sbar(rng, n, rho=0.5):
    """Comparison-psd matrix via diagonal dominance; mixed off-diagonal signs."""
    a = rng.uniform(-1.0, 1.0, size=(n, n))
    a = np.tril(a, -1)
    a[rng.uniform(size=(n, n)) > rho] = 0.0
    a = a + a.T
    margins = rng.uniform(0.0, 1.0, size=n)
    np.fill_diagonal(a, np.sum(np.abs(a), axis=1) + margins)
    return SymMatrix.from_dense(a)


def random_z_psd(rng, n):
    """Random symmetric psd Z-matrix (Stieltjes or singular Laplacian-like)."""
    a = -np.abs(rng.uniform(0.0, 1.0, size=(n, n)))
    a = np.tril(a, -1)
    a[rng.uniform(size=(n, n)) > 0.7] = 0.0
    a = a + a.T
    margins = np.where(rng.uniform(size=n) < 0.5, 0.0, rng.uniform(0.1, 1.0, size=n))
    np.fill_diagonal(a, np.sum(np.abs(a), axis=1) + margins)
    return SymMatrix.from_dense(a)


def random_tridiagonal_sym(rng, n, dominant=False):
    diag = rng.uniform(-1.0, 1.0, size=n)
    sub = rng.uniform(-1.0, 1.0, size=max(n - 1, 0))
    if dominant:
        diag = np.abs(diag)
        if n > 1:
            diag[:-1] += np.abs(sub)
            diag[1:] += np.abs(sub)
    return SymMatrix.from_banded(diag, sub)


def dyadic_laplacian(rng, n, flip_edges_from=None):
    """Weighted complete-graph Laplacian with dyadic weights (exact row sums).

    ``flip_edges_from`` positivizes random edges not touching the listed
    rows, which keeps those rows fully nonpositive.
    """
    w = rng.integers(1, 9, size=(n, n)) / 8.0
    a = -(np.tril(w, -1) + np.tril(w, -1).T)
    np.fill_diagonal(a, -a.sum(axis=1))
    if flip_edges_from is not None:
        protected = set(flip_edges_from)
        for i in range(n):
            for j in range(i):
                if i in protected or j in protected:
                    continue
                if rng.random() < 0.5 and a[i, j] != 0.0:
                    a[i, j] = -a[i, j]
                    a[j, i] = a[i, j]
    return SymMatrix.from_dense(a)


def make_instance(m, q, u):
    return QpInstance(m if isinstance(m, SymMatrix) else SymMatrix.from_dense(m),
                      np.asarray(q, dtype=float), np.asarray(u, dtype=float))


def objectives_match(a, b, tol=1e-8):
    return abs(a - b) <= tol * (1.0 + abs(b))
