"""Symmetric matrix storage and the dense/banded linear-algebra kernel.

Matrices are stored symmetric by construction: the dense constructor
reads only the lower triangle and mirrors it, so ``value(i, j) ==
value(j, i)`` holds exactly.  Tridiagonal matrices additionally carry
their diagonal and sub-diagonal as flat arrays so that every operation
on them runs in linear time; the dense array is materialized lazily
and only on demand.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.linalg

from .errors import SingularBlock, SingularPivot
from .tolerances import TOL_PIVOT, TOL_PSD, _SCALE_FLOOR


def _as_vector(v) -> np.ndarray:
    return np.atleast_1d(np.asarray(v, dtype=float))


@dataclass
class SymMatrix:
    """Dense symmetric matrix with an optional tridiagonal tag.

    Use :meth:`from_dense` or :meth:`from_banded` to construct; the
    raw constructor is internal.
    """

    n: int
    tridiagonal: bool = False
    _dense: np.ndarray | None = field(default=None, repr=False)
    _diag: np.ndarray | None = field(default=None, repr=False)
    _sub: np.ndarray | None = field(default=None, repr=False)

    @classmethod
    def from_dense(cls, a, tridiagonal: bool = False) -> "SymMatrix":
        a = np.asarray(a, dtype=float)
        if a.ndim != 2 or a.shape[0] != a.shape[1]:
            raise ValueError(f"expected a square matrix, got shape {a.shape}")
        n = a.shape[0]
        lower = np.tril(a)
        full = lower + np.tril(a, -1).T
        if tridiagonal:
            if n > 2 and np.any(np.tril(full, -2) != 0.0):
                raise ValueError("matrix tagged tridiagonal has entries below the first sub-diagonal")
            return cls(
                n=n,
                tridiagonal=True,
                _dense=full,
                _diag=np.diagonal(full).copy(),
                _sub=np.diagonal(full, -1).copy() if n > 1 else np.zeros(0),
            )
        return cls(n=n, _dense=full)

    @classmethod
    def from_banded(cls, diag, sub) -> "SymMatrix":
        diag = _as_vector(diag)
        sub = np.asarray(sub, dtype=float).reshape(-1)
        n = diag.size
        if sub.size != max(n - 1, 0):
            raise ValueError(f"sub-diagonal length {sub.size} does not match n={n}")
        return cls(n=n, tridiagonal=True, _diag=diag.copy(), _sub=sub.copy())

    def full(self) -> np.ndarray:
        """Dense symmetric array (materialized once for banded storage)."""
        if self._dense is None:
            a = np.diag(self._diag)
            if self.n > 1:
                idx = np.arange(self.n - 1)
                a[idx + 1, idx] = self._sub
                a[idx, idx + 1] = self._sub
            self._dense = a
        return self._dense

    def band(self) -> tuple[np.ndarray, np.ndarray]:
        if not self.tridiagonal:
            raise ValueError("band() requires a tridiagonal matrix")
        return self._diag, self._sub

    def value(self, i: int, j: int) -> float:
        if self.tridiagonal and self._dense is None:
            if i == j:
                return float(self._diag[i])
            if abs(i - j) == 1:
                return float(self._sub[min(i, j)])
            return 0.0
        return float(self.full()[i, j])

    def diagonal(self) -> np.ndarray:
        if self.tridiagonal and self._dense is None:
            return self._diag
        return np.diagonal(self.full())

    def scale(self) -> float:
        """max |m_ii|, floored away from zero; the tolerance unit."""
        if self.n == 0:
            return 1.0
        return max(float(np.max(np.abs(self.diagonal()))), _SCALE_FLOOR)

    def matvec(self, x: np.ndarray) -> np.ndarray:
        """M @ x for a vector or a (n, k) block; O(n) per column if banded."""
        x = np.asarray(x, dtype=float)
        if self.tridiagonal and self._dense is None:
            d, e = self._diag, self._sub
            if x.ndim == 1:
                y = d * x
                if self.n > 1:
                    y[:-1] += e * x[1:]
                    y[1:] += e * x[:-1]
                return y
            y = d[:, None] * x
            if self.n > 1:
                y[:-1] += e[:, None] * x[1:]
                y[1:] += e[:, None] * x[:-1]
            return y
        return self.full() @ x

    def submatrix(self, keep) -> "SymMatrix":
        """Principal submatrix on the (sorted) index set ``keep``."""
        keep = np.asarray(keep, dtype=int)
        if self.tridiagonal and self._dense is None:
            d = self._diag[keep]
            if keep.size > 1:
                adjacent = keep[1:] == keep[:-1] + 1
                e = np.where(adjacent, self._sub[np.minimum(keep[:-1], self.n - 2)], 0.0)
            else:
                e = np.zeros(0)
            return SymMatrix.from_banded(d, e)
        a = self.full()[np.ix_(keep, keep)]
        return SymMatrix(n=keep.size, _dense=a)

    def copy(self) -> "SymMatrix":
        return SymMatrix(
            n=self.n,
            tridiagonal=self.tridiagonal,
            _dense=None if self._dense is None else self._dense.copy(),
            _diag=None if self._diag is None else self._diag.copy(),
            _sub=None if self._sub is None else self._sub.copy(),
        )


def as_sym(m) -> SymMatrix:
    """Coerce an array-like (or pass through a SymMatrix) to SymMatrix."""
    if isinstance(m, SymMatrix):
        return m
    return SymMatrix.from_dense(m)


@dataclass
class PptResult:
    """Principal pivot transform of a vector/matrix pair."""

    transformed_vector: np.ndarray
    transformed_matrix: np.ndarray


def comparison_matrix(m) -> SymMatrix:
    """Comparison matrix: same diagonal, off-diagonal entries -|m_ij|."""
    m = as_sym(m)
    if m.tridiagonal:
        d, e = m.band()
        return SymMatrix.from_banded(d, -np.abs(e))
    a = -np.abs(m.full())
    np.fill_diagonal(a, m.diagonal())
    return SymMatrix(n=m.n, _dense=a)


def _complement(n: int, alpha: np.ndarray) -> np.ndarray:
    mask = np.ones(n, dtype=bool)
    mask[alpha] = False
    return np.flatnonzero(mask)


def _pivoted_cholesky_pivots(a: np.ndarray, stop_tol: float):
    """Diagonal-pivoted Cholesky elimination.

    Returns ``(pivots, remaining)`` where ``pivots`` are the accepted
    pivot values in elimination order and ``remaining`` is the
    untouched trailing block (empty when elimination completed).
    """
    a = np.array(a, dtype=float)
    n = a.shape[0]
    pivots = []
    for k in range(n):
        d = np.diagonal(a)[k:]
        j = k + int(np.argmax(d))
        if a[j, j] <= stop_tol:
            return np.array(pivots), a[k:, k:]
        if j != k:
            a[[k, j], :] = a[[j, k], :]
            a[:, [k, j]] = a[:, [j, k]]
        piv = a[k, k]
        pivots.append(piv)
        col = a[k + 1:, k] / piv
        a[k + 1:, k + 1:] -= np.outer(col, a[k + 1:, k])
    return np.array(pivots), a[n:, n:]


def _banded_psd(diag: np.ndarray, sub: np.ndarray, tol_abs: float) -> bool:
    # LDL recursion along the band; a vanished pivot forces the
    # adjacent coupling to vanish too, else the 2x2 block is indefinite.
    t = float("nan")
    n = diag.size
    prev_ok = False
    for k in range(n):
        t_new = diag[k]
        if k > 0:
            if prev_ok:
                t_new -= sub[k - 1] ** 2 / t
            elif abs(sub[k - 1]) > tol_abs:
                return False
        if t_new < -tol_abs:
            return False
        prev_ok = t_new > tol_abs
        t = t_new
    return True


def is_psd(m, tol: float = TOL_PSD) -> bool:
    """Positive semidefiniteness via diagonal-pivoted Cholesky.

    Accepts pivots down to ``-tol * scale(M)``; when no positive pivot
    remains, the untouched block must be negligibly small.
    """
    m = as_sym(m)
    if m.n == 0:
        return True
    tol_abs = tol * m.scale()
    if m.tridiagonal and m._dense is None:
        d, e = m.band()
        return _banded_psd(d, e, tol_abs)
    pivots, remaining = _pivoted_cholesky_pivots(m.full(), tol_abs)
    if remaining.size == 0:
        return True
    return bool(np.all(np.abs(remaining) <= 10.0 * tol_abs))


def is_pd(m, tol: float = TOL_PIVOT) -> bool:
    """Strict positive definiteness: pivoted Cholesky completes with all pivots above tol*scale."""
    m = as_sym(m)
    if m.n == 0:
        return True
    tol_abs = tol * m.scale()
    if m.tridiagonal and m._dense is None:
        d, e = m.band()
        t = 0.0
        for k in range(m.n):
            t = d[k] - (e[k - 1] ** 2 / t if k > 0 else 0.0)
            if t <= tol_abs:
                return False
        return True
    pivots, remaining = _pivoted_cholesky_pivots(m.full(), tol_abs)
    return remaining.size == 0


def _check_block_nonsingular(maa: np.ndarray, scale: float) -> None:
    # Submatrices arising here live inside psd matrices, so
    # nonsingularity is equivalent to positive definiteness.
    if maa.shape[0] == 0:
        return
    _, remaining = _pivoted_cholesky_pivots(maa, TOL_PIVOT * scale)
    if remaining.size:
        raise SingularBlock(f"principal block of order {maa.shape[0]} fails the nonsingularity test")


def schur_complement(m, alpha) -> SymMatrix:
    """Schur complement of M_aa in M: M_cc - M_ca M_aa^{-1} M_ac."""
    m = as_sym(m)
    alpha = np.asarray(sorted(alpha), dtype=int)
    rest = _complement(m.n, alpha)
    if alpha.size == 0:
        return SymMatrix.from_dense(m.full())
    a = m.full()
    maa = a[np.ix_(alpha, alpha)]
    _check_block_nonsingular(maa, m.scale())
    mac = a[np.ix_(alpha, rest)]
    x = np.linalg.solve(maa, mac)
    s = a[np.ix_(rest, rest)] - mac.T @ x
    return SymMatrix.from_dense((s + s.T) / 2.0)


def principal_pivot_transform(m, r, alpha) -> PptResult:
    """Block pivot on M_aa applied to the pair (r, M).

    Returns the transformed vector and matrix with blocks placed at
    their original index positions; the complement/complement block of
    the matrix equals the Schur complement of M_aa in M.
    """
    m = as_sym(m)
    r = _as_vector(r)
    alpha = np.asarray(sorted(alpha), dtype=int)
    rest = _complement(m.n, alpha)
    a = m.full()
    if alpha.size == 0:
        return PptResult(r.copy(), a.copy())
    maa = a[np.ix_(alpha, alpha)]
    _check_block_nonsingular(maa, m.scale())
    inv = np.linalg.inv(maa)
    mac = a[np.ix_(alpha, rest)]
    vec = np.empty(m.n)
    vec[alpha] = -inv @ r[alpha]
    vec[rest] = r[rest] - a[np.ix_(rest, alpha)] @ (inv @ r[alpha])
    out = np.empty_like(a)
    out[np.ix_(alpha, alpha)] = inv
    out[np.ix_(alpha, rest)] = -inv @ mac
    out[np.ix_(rest, alpha)] = mac.T @ inv
    out[np.ix_(rest, rest)] = a[np.ix_(rest, rest)] - mac.T @ inv @ mac
    return PptResult(vec, out)


def irreducible_components(m) -> list[np.ndarray]:
    """Connected components of the off-diagonal adjacency graph.

    Components are ordered by smallest member; indices are ascending.
    """
    m = as_sym(m)
    n = m.n
    if n == 0:
        return []
    if m.tridiagonal and m._dense is None:
        _, e = m.band()
        cuts = np.flatnonzero(e == 0.0)
        starts = np.concatenate(([0], cuts + 1))
        ends = np.concatenate((cuts + 1, [n]))
        return [np.arange(s, t) for s, t in zip(starts, ends)]
    a = m.full()
    seen = np.zeros(n, dtype=bool)
    comps = []
    for root in range(n):
        if seen[root]:
            continue
        stack = [root]
        seen[root] = True
        members = []
        while stack:
            i = stack.pop()
            members.append(i)
            neighbors = np.flatnonzero(a[i] != 0.0)
            for j in neighbors:
                if j != i and not seen[j]:
                    seen[j] = True
                    stack.append(int(j))
        comps.append(np.array(sorted(members), dtype=int))
    return comps


def alpha_runs(alpha: np.ndarray) -> list[tuple[int, int]]:
    """Split a sorted index array into maximal contiguous runs [s, e)."""
    alpha = np.asarray(alpha, dtype=int)
    if alpha.size == 0:
        return []
    breaks = np.flatnonzero(np.diff(alpha) > 1)
    starts = np.concatenate(([0], breaks + 1))
    ends = np.concatenate((breaks + 1, [alpha.size]))
    return [(int(alpha[s]), int(alpha[e - 1]) + 1) for s, e in zip(starts, ends)]


def tridiag_solve(m, alpha, rhs, tol: float = TOL_PIVOT) -> np.ndarray:
    """Solve M_aa y = rhs_a for tridiagonal M in O(n).

    ``alpha`` must be sorted; it splits into contiguous runs and each
    run is solved with a banded elimination.  ``rhs`` is indexed by
    original variable positions (full length) and the solution is
    returned aligned with ``alpha``.
    """
    m = as_sym(m)
    if not m.tridiagonal:
        raise ValueError("tridiag_solve requires a tridiagonal matrix")
    alpha = np.asarray(alpha, dtype=int)
    rhs = np.asarray(rhs, dtype=float)
    single = rhs.ndim == 1
    cols = rhs.reshape(m.n, -1)
    out = np.empty((alpha.size, cols.shape[1]))
    d, e = m.band()
    tol_abs = tol * m.scale()
    pos = 0
    for s, t in alpha_runs(alpha):
        k = t - s
        if k == 1:
            if abs(d[s]) <= tol_abs:
                raise SingularPivot(f"diagonal pivot at index {s} below tolerance")
            out[pos] = cols[s] / d[s]
        else:
            ab = np.zeros((3, k))
            ab[0, 1:] = e[s:t - 1]
            ab[1, :] = d[s:t]
            ab[2, :-1] = e[s:t - 1]
            try:
                sol = scipy.linalg.solve_banded((1, 1), ab, cols[s:t], check_finite=False)
            except (np.linalg.LinAlgError, scipy.linalg.LinAlgError) as exc:
                raise SingularPivot(str(exc)) from exc
            if not np.all(np.isfinite(sol)):
                raise SingularPivot(f"banded solve on run [{s},{t}) produced non-finite values")
            out[pos:pos + k] = sol
        pos += k
    return out[:, 0] if single else out


def quadratic_objective(m, q: np.ndarray, x: np.ndarray) -> float:
    """q'x + x'Mx/2, using the banded product when available."""
    m = as_sym(m)
    return float(q @ x + 0.5 * (x @ m.matvec(x)))
