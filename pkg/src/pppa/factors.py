"""Incremental maintenance of the basic-block inverse.

A FactorState holds the explicit inverse of M_aa for the current
ordered index set ``alpha``.  Growing or shrinking alpha by one index
updates the inverse with the bordered-inverse formulas in O(|alpha|^2)
arithmetic; a full refactorization runs whenever the update counter
exceeds n or a cheap residual probe fails.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import SingularPivot
from .matrices import SymMatrix, as_sym
from .tolerances import TOL_FACTOR, TOL_PIVOT


@dataclass
class FactorState:
    """Explicit inverse of the principal block M_aa, kept up to date."""

    m: SymMatrix
    alpha: list[int] = field(default_factory=list)
    inv: np.ndarray = field(default_factory=lambda: np.zeros((0, 0)))
    refresh_counter: int = 0

    @classmethod
    def for_alpha(cls, m, alpha=()) -> "FactorState":
        m = as_sym(m)
        alpha = [int(i) for i in alpha]
        if alpha:
            block = m.full()[np.ix_(alpha, alpha)]
            inv = np.linalg.inv(block)
        else:
            inv = np.zeros((0, 0))
        return cls(m=m, alpha=alpha, inv=inv)

    def solve(self, rhs: np.ndarray) -> np.ndarray:
        """M_aa^{-1} rhs for rhs aligned with the alpha ordering."""
        return self.inv @ rhs

    def column_solve(self, i: int) -> np.ndarray:
        """M_aa^{-1} M_{a,i}, aligned with the alpha ordering."""
        return self.inv @ self.m.full()[self.alpha, i]

    def schur_scalar(self, i: int) -> float:
        """m_ii - M_{i,a} M_aa^{-1} M_{a,i} for i outside alpha."""
        a = self.m.full()
        if not self.alpha:
            return float(a[i, i])
        col = a[self.alpha, i]
        return float(a[i, i] - col @ (self.inv @ col))

    def residual(self) -> float:
        """max-norm of inv @ M_aa - I; the testable factor invariant."""
        if not self.alpha:
            return 0.0
        block = self.m.full()[np.ix_(self.alpha, self.alpha)]
        return float(np.max(np.abs(self.inv @ block - np.eye(len(self.alpha)))))

    def refactorize(self) -> "FactorState":
        return FactorState.for_alpha(self.m, self.alpha)


def _spot_residual(factor: FactorState, col_index: int) -> float:
    # Probe only the column of inv @ M_aa belonging to col_index; O(k^2).
    k = factor.alpha.index(col_index)
    col = factor.m.full()[factor.alpha, col_index]
    probe = factor.inv @ col
    probe[k] -= 1.0
    return float(np.max(np.abs(probe))) if probe.size else 0.0


def factor_update(factor: FactorState, i: int, direction: str,
                  mhat: np.ndarray | None = None) -> FactorState:
    """Add or remove index ``i`` from the factored block.

    ``mhat`` may supply a precomputed M_aa^{-1} M_{a,i} for the add
    direction.  The returned state is fresh; the input is not mutated.
    """
    i = int(i)
    m = factor.m
    scale = m.scale()
    if direction == "add":
        if i in factor.alpha:
            raise ValueError(f"index {i} already in alpha")
        a_col = m.full()[factor.alpha, i]
        if mhat is None:
            mhat = factor.inv @ a_col
        sigma = float(m.value(i, i) - a_col @ mhat)
        if sigma <= TOL_PIVOT * scale:
            raise SingularPivot(f"Schur scalar {sigma:.3e} at index {i} below pivot tolerance")
        k = len(factor.alpha)
        inv = np.empty((k + 1, k + 1))
        inv[:k, :k] = factor.inv + np.outer(mhat, mhat) / sigma
        inv[:k, k] = -mhat / sigma
        inv[k, :k] = -mhat / sigma
        inv[k, k] = 1.0 / sigma
        new = FactorState(m=m, alpha=factor.alpha + [i], inv=inv,
                          refresh_counter=factor.refresh_counter + 1)
    elif direction == "remove":
        if i not in factor.alpha:
            raise ValueError(f"index {i} not in alpha")
        k = factor.alpha.index(i)
        beta = float(factor.inv[k, k])
        if abs(beta) <= TOL_PIVOT / scale:
            new = FactorState.for_alpha(m, [j for j in factor.alpha if j != i])
            return new
        b = np.delete(factor.inv[:, k], k)
        inv = np.delete(np.delete(factor.inv, k, axis=0), k, axis=1)
        inv -= np.outer(b, b) / beta
        new = FactorState(m=m, alpha=[j for j in factor.alpha if j != i], inv=inv,
                          refresh_counter=factor.refresh_counter + 1)
    else:
        raise ValueError(f"direction must be 'add' or 'remove', got {direction!r}")

    if new.alpha and (new.refresh_counter > m.n or
                      _spot_residual(new, new.alpha[-1]) > TOL_FACTOR):
        new = new.refactorize()
    return new
