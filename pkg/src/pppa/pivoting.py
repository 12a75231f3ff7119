"""Parametric principal pivoting for box-constrained convex QPs.

The engine traces the solution path of

    minimize (q + tau p)' x + x' M x / 2   over  0 <= x <= u

as tau decreases to zero, keeping the index partition

    alpha: strictly between bounds,  beta: at zero,  gamma: at the upper bound.

Each iteration solves for the basic components, runs a ratio test for
the next critical tau, and applies a diagonal pivot, or a 2x2 pivot
when the entering index has a vanishing Schur diagonal.  Positive
definite instances never reach the 2x2 branch, which recovers the
plain 2n-step scheme as a special case.
"""

from __future__ import annotations

import bisect
from dataclasses import dataclass, field

import numpy as np

from .errors import IterationCap, PreconditionViolated
from .factors import FactorState, factor_update
from .matrices import SymMatrix, as_sym, quadratic_objective, tridiag_solve
from .tolerances import TOL_KKT, TOL_PIVOT, TOL_PSD, TOL_RATIO

OPTIMAL = "optimal"
UNBOUNDED = "unbounded"
ERROR = "error"


@dataclass
class QpInstance:
    """Box-constrained QP data: minimize q'x + x'Mx/2 over 0 <= x <= u."""

    m: SymMatrix
    q: np.ndarray
    u: np.ndarray

    def __post_init__(self):
        self.m = as_sym(self.m)
        self.q = np.atleast_1d(np.asarray(self.q, dtype=float))
        self.u = np.atleast_1d(np.asarray(self.u, dtype=float))
        n = self.m.n
        if self.q.shape != (n,) or self.u.shape != (n,):
            raise ValueError(f"q/u shapes {self.q.shape}/{self.u.shape} do not match n={n}")
        if n and float(np.min(self.u)) <= 0.0:
            raise ValueError("upper bounds must be positive (use inf for unbounded)")

    @property
    def n(self) -> int:
        return self.m.n

    def objective(self, x: np.ndarray) -> float:
        return quadratic_objective(self.m, self.q, x)


@dataclass(frozen=True)
class Partition:
    """Disjoint index triple (alpha, beta, gamma) covering range(n)."""

    alpha: tuple[int, ...]
    beta: tuple[int, ...]
    gamma: tuple[int, ...]

    @classmethod
    def initial(cls, n: int) -> "Partition":
        return cls(alpha=(), beta=tuple(range(n)), gamma=())


@dataclass
class Stats:
    """Work counters accumulated over a solve (and merged across subsolves)."""

    pivots: int = 0
    two_by_two: int = 0
    reductions: int = 0
    subproblems: int = 0
    refactorizations: int = 0
    flops: int = 0
    max_iter_flops: int = 0

    def merge(self, other: "Stats") -> None:
        self.pivots += other.pivots
        self.two_by_two += other.two_by_two
        self.reductions += other.reductions
        self.subproblems += other.subproblems
        self.refactorizations += other.refactorizations
        self.flops += other.flops
        self.max_iter_flops = max(self.max_iter_flops, other.max_iter_flops)


@dataclass
class Ray:
    """Recession certificate: feasible direction of linear descent."""

    direction: np.ndarray
    index: int | None = None


@dataclass
class SolveOutcome:
    status: str
    x: np.ndarray | None = None
    objective: float | None = None
    ray: Ray | None = None
    stats: Stats = field(default_factory=Stats)
    reason: str | None = None


@dataclass
class TridiagFactor:
    """Run-structured stand-in for FactorState on tridiagonal instances.

    Keeps alpha sorted and solves M_aa systems directly with banded
    elimination per contiguous run; no inverse is maintained.
    """

    m: SymMatrix
    alpha: list[int] = field(default_factory=list)

    def added(self, i: int) -> "TridiagFactor":
        new = list(self.alpha)
        bisect.insort(new, i)
        return TridiagFactor(self.m, new)

    def removed(self, i: int) -> "TridiagFactor":
        return TridiagFactor(self.m, [j for j in self.alpha if j != i])


@dataclass
class ParamState:
    """One engine iteration's view: partition, tau, bar vectors, factor."""

    partition: Partition
    tau_cur: float
    qbar: np.ndarray | None
    pbar: np.ndarray | None
    factor: FactorState | TridiagFactor | None
    stats: Stats = field(default_factory=Stats)


@dataclass
class PivotDecision:
    """Outcome of the ratio tests; consumed by apply_pivot.

    kind: 'to_upper'            alpha -> gamma            (case 1)
          'from_lower'          beta -> alpha             (case 2a)
          'at_ub'               beta -> gamma             (2x2, rho = u_i)
          'exchange_to_lower'   i: beta->alpha, j: alpha->beta   (2x2)
          'exchange_to_upper'   i: beta->alpha, j: alpha->gamma  (2x2)
    """

    kind: str
    i_bar: int
    j_bar: int | None = None
    tau_new: float = 0.0
    mhat: np.ndarray | None = None


def _solve_embedded(factor, m: SymMatrix, alpha: np.ndarray, rhs_full: np.ndarray) -> np.ndarray:
    """M_aa^{-1} rhs_a scattered back into full-length (n, k) arrays."""
    out = np.zeros_like(rhs_full)
    if alpha.size == 0:
        return out
    if isinstance(factor, TridiagFactor) or (factor is None and m.tridiagonal):
        out[alpha] = tridiag_solve(m, alpha, rhs_full)
    elif factor is None:
        a = m.full()
        out[alpha] = np.linalg.solve(a[np.ix_(alpha, alpha)], rhs_full[alpha])
    else:
        order = factor.alpha
        out[order] = factor.inv @ rhs_full[order]
    return out


def compute_bars(instance: QpInstance, partition: Partition, p: np.ndarray,
                 factor=None, mug: np.ndarray | None = None):
    """Solve for (qbar, pbar): basic components via M_aa, nonbasic by substitution.

    ``mug`` may carry a precomputed M @ (u on gamma, 0 elsewhere).
    """
    m, q, u = instance.m, instance.q, instance.u
    n = m.n
    alpha = np.asarray(partition.alpha, dtype=int)
    if mug is None:
        if partition.gamma:
            ug = np.zeros(n)
            gamma = np.asarray(partition.gamma, dtype=int)
            ug[gamma] = u[gamma]
            mug = m.matvec(ug)
        else:
            mug = np.zeros(n)
    p = np.asarray(p, dtype=float)
    rhs = np.column_stack([q + mug, p])
    sol = _solve_embedded(factor, m, alpha, rhs)
    prod = m.matvec(sol)
    qbar = q + mug - prod[:, 0]
    pbar = p - prod[:, 1]
    qbar[alpha] = sol[alpha, 0]
    pbar[alpha] = sol[alpha, 1]
    return qbar, pbar


def ratio_test_tau(state: ParamState, u: np.ndarray, tau_eps: float = 0.0):
    """First ratio test: next critical tau and the blocking index.

    Returns (tau_new, kind, i_bar) with kind in {'optimal', 'to_upper',
    'from_lower'}.  Exact ties prefer beta candidates, then the
    smallest index.
    """
    qbar, pbar = state.qbar, state.pbar
    n = qbar.size
    tol = TOL_RATIO * float(np.max(np.abs(pbar), initial=0.0))
    beta_mask = np.zeros(n, dtype=bool)
    beta_mask[list(state.partition.beta)] = True
    alpha_mask = np.zeros(n, dtype=bool)
    alpha_mask[list(state.partition.alpha)] = True

    ratios_b = np.full(n, -np.inf)
    cand_b = beta_mask & (pbar > tol)
    ratios_b[cand_b] = -qbar[cand_b] / pbar[cand_b]
    best_b = float(np.max(ratios_b, initial=-np.inf))

    ratios_a = np.full(n, -np.inf)
    cand_a = alpha_mask & (pbar > tol) & np.isfinite(u)
    ratios_a[cand_a] = -(u[cand_a] + qbar[cand_a]) / pbar[cand_a]
    best_a = float(np.max(ratios_a, initial=-np.inf))

    tau_new = max(best_b, best_a, 0.0)
    if tau_new <= tau_eps:
        return 0.0, "optimal", None
    if best_b >= best_a:
        return tau_new, "from_lower", int(np.flatnonzero(ratios_b == best_b)[0])
    return tau_new, "to_upper", int(np.flatnonzero(ratios_a == best_a)[0])


def second_ratio_test(state: ParamState, instance: QpInstance, i_bar: int,
                      tau_new: float, mhat: np.ndarray):
    """Blocking-variable search for a 2x2 pivot at a zero Schur diagonal.

    ``mhat`` is M_aa^{-1} M_{a, i_bar} embedded into a full-length
    vector.  Returns (rho_min, kind, j_bar) with kind in {'at_ub',
    'exchange_to_lower', 'exchange_to_upper', 'unbounded'}; ties keep
    u_i first, then the smallest j_bar.
    """
    qbar, pbar, u = state.qbar, state.pbar, instance.u
    n = qbar.size
    alpha_mask = np.zeros(n, dtype=bool)
    alpha_mask[list(state.partition.alpha)] = True
    mtol = TOL_RATIO * float(np.max(np.abs(mhat), initial=0.0))

    x_tau = np.maximum(-qbar - tau_new * pbar, 0.0)
    s_tau = np.maximum(u + qbar + tau_new * pbar, 0.0)

    rho_lower = np.full(n, np.inf)
    cand = alpha_mask & (mhat > mtol)
    rho_lower[cand] = x_tau[cand] / mhat[cand]
    rho_upper = np.full(n, np.inf)
    cand = alpha_mask & (mhat < -mtol) & np.isfinite(u)
    rho_upper[cand] = s_tau[cand] / (-mhat[cand])

    rho_u = float(u[i_bar]) if np.isfinite(u[i_bar]) else np.inf
    rho_min = min(float(np.min(rho_lower, initial=np.inf)),
                  float(np.min(rho_upper, initial=np.inf)), rho_u)
    if not np.isfinite(rho_min):
        return np.inf, "unbounded", None
    if rho_u <= rho_min:
        return rho_min, "at_ub", None
    lower_hits = np.flatnonzero(rho_lower == rho_min)
    upper_hits = np.flatnonzero(rho_upper == rho_min)
    j_lower = int(lower_hits[0]) if lower_hits.size else n
    j_upper = int(upper_hits[0]) if upper_hits.size else n
    if j_lower <= j_upper:
        return rho_min, "exchange_to_lower", j_lower
    return rho_min, "exchange_to_upper", j_upper


def apply_pivot(state: ParamState, decision: PivotDecision) -> ParamState:
    """Update the partition and the factored block for one pivot."""
    part = state.partition
    alpha, beta, gamma = list(part.alpha), list(part.beta), list(part.gamma)
    i, j = decision.i_bar, decision.j_bar
    factor = state.factor
    stats = state.stats

    def _factor_add(f, idx, mhat_embedded=None):
        if isinstance(f, TridiagFactor):
            return f.added(idx)
        if f is None:
            return None
        mhat_aligned = None
        if mhat_embedded is not None:
            mhat_aligned = mhat_embedded[f.alpha]
        before = f.refresh_counter
        f2 = factor_update(f, idx, "add", mhat=mhat_aligned)
        if f2.refresh_counter <= before:
            stats.refactorizations += 1
        return f2

    def _factor_remove(f, idx):
        if isinstance(f, TridiagFactor):
            return f.removed(idx)
        if f is None:
            return None
        before = f.refresh_counter
        f2 = factor_update(f, idx, "remove")
        if f2.refresh_counter <= before:
            stats.refactorizations += 1
        return f2

    if decision.kind == "to_upper":
        alpha.remove(i)
        bisect.insort(gamma, i)
        factor = _factor_remove(factor, i)
    elif decision.kind == "from_lower":
        beta.remove(i)
        bisect.insort(alpha, i)
        factor = _factor_add(factor, i, decision.mhat)
    elif decision.kind == "at_ub":
        beta.remove(i)
        bisect.insort(gamma, i)
        stats.two_by_two += 1
    elif decision.kind == "exchange_to_lower":
        beta.remove(i)
        bisect.insort(beta, j)
        alpha.remove(j)
        bisect.insort(alpha, i)
        factor = _factor_remove(factor, j)
        factor = _factor_add(factor, i)
        stats.two_by_two += 1
    elif decision.kind == "exchange_to_upper":
        beta.remove(i)
        alpha.remove(j)
        bisect.insort(alpha, i)
        bisect.insort(gamma, j)
        factor = _factor_remove(factor, j)
        factor = _factor_add(factor, i)
        stats.two_by_two += 1
    else:
        raise ValueError(f"unknown pivot kind {decision.kind!r}")
    stats.pivots += 1

    return ParamState(
        partition=Partition(alpha=tuple(alpha), beta=tuple(beta), gamma=tuple(gamma)),
        tau_cur=decision.tau_new,
        qbar=state.qbar,
        pbar=state.pbar,
        factor=factor,
        stats=stats,
    )


def solution_at_tau(state: ParamState, instance: QpInstance, tau: float) -> np.ndarray:
    """Path point: x_beta = 0, x_gamma = u, x_alpha = -qbar - tau*pbar."""
    x = np.zeros(instance.n)
    gamma = np.asarray(state.partition.gamma, dtype=int)
    alpha = np.asarray(state.partition.alpha, dtype=int)
    if gamma.size:
        x[gamma] = instance.u[gamma]
    if alpha.size:
        x[alpha] = -state.qbar[alpha] - tau * state.pbar[alpha]
    return x


def _schur_diag(factor, m: SymMatrix, alpha: np.ndarray, i: int) -> float:
    if isinstance(factor, TridiagFactor) or (factor is None and m.tridiagonal):
        if alpha.size == 0:
            return m.value(i, i)
        d, e = m.band()
        rhs = np.zeros(m.n)
        touched = False
        for nb in (i - 1, i + 1):
            if 0 <= nb < m.n and np.any(alpha == nb):
                rhs[nb] = m.value(nb, i)
                touched = touched or rhs[nb] != 0.0
        if not touched:
            return m.value(i, i)
        z = np.zeros(m.n)
        z[alpha] = tridiag_solve(m, alpha, rhs)
        return float(m.value(i, i) - sum(m.value(i, nb) * z[nb] for nb in (i - 1, i + 1) if 0 <= nb < m.n))
    if factor is None:
        a = m.full()
        if alpha.size == 0:
            return float(a[i, i])
        col = a[alpha, i]
        return float(a[i, i] - col @ np.linalg.solve(a[np.ix_(alpha, alpha)], col))
    return factor.schur_scalar(i)


def _column_solve_embedded(factor, m: SymMatrix, alpha: np.ndarray, i: int) -> np.ndarray:
    out = np.zeros(m.n)
    if alpha.size == 0:
        return out
    if isinstance(factor, TridiagFactor) or (factor is None and m.tridiagonal):
        rhs = np.zeros(m.n)
        for nb in (i - 1, i + 1):
            if 0 <= nb < m.n and np.any(alpha == nb):
                rhs[nb] = m.value(nb, i)
        out[alpha] = tridiag_solve(m, alpha, rhs)
    elif factor is None:
        a = m.full()
        out[alpha] = np.linalg.solve(a[np.ix_(alpha, alpha)], a[alpha, i])
    else:
        out[factor.alpha] = factor.column_solve(i)
    return out


def _iteration_flops(n: int, k: int, banded: bool) -> int:
    # Faithful operation-count formulas for the kernels that actually ran.
    if banded:
        return 5 * n * 3 + 16 * k + 8 * n
    return 2 * n * n * 2 + 2 * k * k * 2 + 4 * k * k + 8 * n


def solve_psd(instance: QpInstance, p, *, max_pivots: int | None = None,
              callback=None, scale: float | None = None) -> SolveOutcome:
    """Streamlined pivoting for psd M with positive diagonal.

    ``p`` must be a valid parametric direction (nonnegative under the
    class construction) with q + tau0 p >= 0 for some tau0 > 0; callers
    run the reduction pipeline first when that fails.  ``scale``
    anchors the zero/pivot thresholds (reduced problems pass the
    original problem's scale).
    """
    m, q, u = instance.m, instance.q, instance.u
    n = m.n
    stats = Stats()
    if n == 0:
        return SolveOutcome(status=OPTIMAL, x=np.zeros(0), objective=0.0, stats=stats)
    p = np.asarray(p, dtype=float)
    if scale is None:
        scale = m.scale()
    diag = instance.m.diagonal()
    if float(np.min(diag)) <= TOL_PIVOT * scale:
        raise PreconditionViolated("matrix has a nonpositive diagonal entry; run zero-diagonal preprocessing first")
    p_tol = TOL_PSD * max(float(np.max(np.abs(p), initial=0.0)), scale)
    q_tol = TOL_PSD * (1.0 + float(np.max(np.abs(q), initial=0.0)))
    blocked = (p <= p_tol) & (q < -q_tol)
    if np.any(blocked):
        i = int(np.flatnonzero(blocked)[0])
        raise PreconditionViolated(
            f"no tau0 > 0 with q + tau0*p >= 0: p[{i}] ~ 0 while q[{i}] = {q[i]:.6g} < 0")

    banded = m.tridiagonal
    factor = TridiagFactor(m, []) if banded else FactorState.for_alpha(m, [])
    state = ParamState(partition=Partition.initial(n), tau_cur=np.inf,
                       qbar=None, pbar=None, factor=factor, stats=stats)
    mug = np.zeros(n)
    cap = max_pivots if max_pivots is not None else max(3 * n, 4)
    tau_eps = None

    while True:
        alpha_arr = np.asarray(state.partition.alpha, dtype=int)
        qbar, pbar = compute_bars(instance, state.partition, p, state.factor, mug=mug)
        state.qbar, state.pbar = qbar, pbar
        it_flops = _iteration_flops(n, alpha_arr.size, banded)
        stats.flops += it_flops
        stats.max_iter_flops = max(stats.max_iter_flops, it_flops)

        tau_new, kind, i_bar = ratio_test_tau(state, u, tau_eps=tau_eps or 0.0)
        if tau_eps is None:
            tau_eps = 1e-12 * max(1.0, tau_new)
        if kind == "optimal":
            x = solution_at_tau(state, instance, 0.0)
            x = np.minimum(np.maximum(x, 0.0), u)
            state.tau_cur = 0.0
            if callback is not None:
                callback(state, 0.0, None)
            return SolveOutcome(status=OPTIMAL, x=x, objective=instance.objective(x), stats=stats)

        if kind == "to_upper":
            decision = PivotDecision(kind="to_upper", i_bar=i_bar, tau_new=tau_new)
        else:
            sigma = _schur_diag(state.factor, m, alpha_arr, i_bar)
            if sigma > TOL_PIVOT * scale:
                mhat = None
                if not banded and alpha_arr.size:
                    mhat = _column_solve_embedded(state.factor, m, alpha_arr, i_bar)
                decision = PivotDecision(kind="from_lower", i_bar=i_bar, tau_new=tau_new, mhat=mhat)
            else:
                mhat = _column_solve_embedded(state.factor, m, alpha_arr, i_bar)
                rho, sub_kind, j_bar = second_ratio_test(state, instance, i_bar, tau_new, mhat)
                if sub_kind == "unbounded":
                    d = np.zeros(n)
                    d[i_bar] = 1.0
                    d[alpha_arr] = -mhat[alpha_arr]
                    d[np.abs(d) <= 1e-14 * max(1.0, float(np.max(np.abs(d))))] = 0.0
                    d[(d < 0.0) & (d > -1e-10)] = 0.0
                    if callback is not None:
                        callback(state, tau_new, None)
                    return SolveOutcome(status=UNBOUNDED, ray=Ray(direction=d, index=i_bar),
                                        stats=stats)
                decision = PivotDecision(kind=sub_kind, i_bar=i_bar, j_bar=j_bar,
                                         tau_new=tau_new, mhat=mhat)

        if callback is not None:
            callback(state, tau_new, decision)
        state = apply_pivot(state, decision)
        # gamma is monotone, so M @ (u on gamma) updates one column at a time.
        for entered in {"to_upper": [decision.i_bar], "at_ub": [decision.i_bar],
                        "exchange_to_upper": [decision.j_bar]}.get(decision.kind, []):
            if banded:
                dcol, ecol = m.band()
                mug[entered] += u[entered] * dcol[entered]
                if entered > 0:
                    mug[entered - 1] += u[entered] * ecol[entered - 1]
                if entered < n - 1:
                    mug[entered + 1] += u[entered] * ecol[entered]
            else:
                mug += u[entered] * m.full()[:, entered]
        if stats.pivots > cap:
            raise IterationCap(f"pivot count exceeded {cap} (3n cap); degeneracy anomaly")


def solve_pd(instance: QpInstance, p, **kwargs) -> SolveOutcome:
    """Positive definite specialization: same path, no 2x2 pivots arise."""
    p = np.asarray(p, dtype=float)
    if p.size and float(np.min(p)) <= 0.0:
        raise PreconditionViolated("positive definite mode requires a positive parametric vector")
    return solve_psd(instance, p, **kwargs)
