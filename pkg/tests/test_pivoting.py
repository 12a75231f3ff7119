import numpy as np
import pytest

from pppa import (FactorState, ParamState, Partition, PivotDecision,
                  QpInstance, Stats, SymMatrix, apply_pivot, compute_bars,
                  enumerate_active_sets, kkt_residual, ratio_test_tau,
                  recession_check, second_ratio_test, solution_at_tau,
                  solve_pd, solve_psd)
from pppa.errors import PreconditionViolated

from helpers import make_instance, objectives_match, random_sbar


def _state(partition, qbar, pbar, tau=np.inf, factor=None):
    return ParamState(partition=partition, tau_cur=tau,
                      qbar=np.asarray(qbar, dtype=float),
                      pbar=np.asarray(pbar, dtype=float),
                      factor=factor, stats=Stats())


class TestComputeBars:
    def test_mixed_partition(self):
        # Independent dense solve of the basic system, then substitution.
        inst = make_instance([[2, 1], [1, 2]], [-3, -3], [np.inf, 1.0])
        part = Partition(alpha=(0,), beta=(), gamma=(1,))
        qbar, pbar = compute_bars(inst, part, np.array([2.0, 2.0]))
        assert qbar == pytest.approx([-1.0, 0.0])
        assert pbar == pytest.approx([1.0, 1.0])

    def test_empty_alpha_gamma(self):
        inst = make_instance([[2, 1], [1, 2]], [-3, -3], [1.0, 1.0])
        qbar, pbar = compute_bars(inst, Partition.initial(2), np.array([2.0, 2.0]))
        assert qbar == pytest.approx([-3.0, -3.0])
        assert pbar == pytest.approx([2.0, 2.0])

    def test_identity_full_alpha(self):
        inst = make_instance(np.eye(3), [1.0, -2.0, 0.5], np.full(3, np.inf))
        part = Partition(alpha=(0, 1, 2), beta=(), gamma=())
        qbar, pbar = compute_bars(inst, part, np.ones(3))
        assert qbar == pytest.approx(inst.q)
        assert pbar == pytest.approx(np.ones(3))

    def test_factor_and_direct_agree(self):
        rng = np.random.default_rng(0)
        for _ in range(25):
            n = int(rng.integers(2, 8))
            m = random_sbar(rng, n)
            u = np.where(rng.uniform(size=n) < 0.5, np.inf, rng.uniform(1.0, 3.0, size=n))
            inst = QpInstance(m, rng.uniform(-2, 2, size=n), u)
            labels = rng.integers(0, 3, size=n)
            labels[~np.isfinite(u)] = np.minimum(labels[~np.isfinite(u)], 1)
            part = Partition(alpha=tuple(np.flatnonzero(labels == 0)),
                             beta=tuple(np.flatnonzero(labels == 1)),
                             gamma=tuple(np.flatnonzero(labels == 2)))
            p = rng.uniform(0, 2, size=n)
            direct = compute_bars(inst, part, p)
            factor = FactorState.for_alpha(m, part.alpha)
            via_factor = compute_bars(inst, part, p, factor)
            assert direct[0] == pytest.approx(via_factor[0], abs=1e-9)
            assert direct[1] == pytest.approx(via_factor[1], abs=1e-9)


class TestRatioTest:
    def test_single_positive_ratio(self):
        st = _state(Partition.initial(2), [-3.0, 2.0], [1.0, 1.0])
        tau, kind, i = ratio_test_tau(st, np.full(2, np.inf))
        assert (tau, kind, i) == (3.0, "from_lower", 0)

    def test_all_nonnegative_is_optimal(self):
        st = _state(Partition.initial(2), [1.0, 0.0], [1.0, 1.0])
        tau, kind, i = ratio_test_tau(st, np.full(2, np.inf))
        assert (tau, kind, i) == (0.0, "optimal", None)

    def test_alpha_upper_bound_candidate(self):
        st = _state(Partition(alpha=(0,), beta=(), gamma=()), [-2.0], [1.0])
        tau, kind, i = ratio_test_tau(st, np.array([1.0]))
        assert (tau, kind, i) == (1.0, "to_upper", 0)

    def test_beta_preferred_on_exact_tie(self):
        st = _state(Partition(alpha=(0,), beta=(1,), gamma=()),
                    [-2.0, -1.0], [1.0, 1.0])
        tau, kind, i = ratio_test_tau(st, np.array([1.0, np.inf]))
        assert (tau, kind, i) == (1.0, "from_lower", 1)

    def test_smallest_index_on_tie(self):
        st = _state(Partition.initial(3), [-2.0, -2.0, -1.0], [1.0, 1.0, 1.0])
        tau, kind, i = ratio_test_tau(st, np.full(3, np.inf))
        assert (tau, kind, i) == (2.0, "from_lower", 0)


class TestSecondRatioTest:
    def test_exchange_to_lower(self):
        inst = make_instance(np.eye(2), [0.0, 0.0], [np.inf, 4.0])
        st = _state(Partition(alpha=(0,), beta=(1,), gamma=()), [-2.0, 0.0], [1.0, 0.0])
        rho, kind, j = second_ratio_test(st, inst, 1, 1.0, np.array([1.0, 0.0]))
        assert (rho, kind, j) == (1.0, "exchange_to_lower", 0)

    def test_exchange_to_upper(self):
        inst = make_instance(np.eye(2), [0.0, 0.0], [3.0, np.inf])
        st = _state(Partition(alpha=(0,), beta=(1,), gamma=()), [-2.0, 0.0], [1.0, 0.0])
        rho, kind, j = second_ratio_test(st, inst, 1, 1.0, np.array([-1.0, 0.0]))
        assert (rho, kind, j) == (2.0, "exchange_to_upper", 0)

    def test_unbounded_when_no_candidates(self):
        inst = make_instance(np.eye(2), [0.0, 0.0], [np.inf, np.inf])
        st = _state(Partition(alpha=(0,), beta=(1,), gamma=()), [-2.0, 0.0], [1.0, 0.0])
        rho, kind, j = second_ratio_test(st, inst, 1, 1.0, np.array([-1.0, 0.0]))
        assert kind == "unbounded" and np.isinf(rho)

    def test_finite_upper_bound_wins_ties(self):
        inst = make_instance(np.eye(2), [0.0, 0.0], [np.inf, 1.0])
        st = _state(Partition(alpha=(0,), beta=(1,), gamma=()), [-2.0, 0.0], [1.0, 0.0])
        rho, kind, j = second_ratio_test(st, inst, 1, 1.0, np.array([1.0, 0.0]))
        assert (rho, kind, j) == (1.0, "at_ub", None)


class TestApplyPivot:
    def test_from_lower(self):
        st = _state(Partition(alpha=(), beta=(0, 1), gamma=()), [0.0, 0.0], [0.0, 0.0])
        new = apply_pivot(st, PivotDecision(kind="from_lower", i_bar=0, tau_new=1.0))
        assert new.partition == Partition(alpha=(0,), beta=(1,), gamma=())
        assert new.stats.pivots == 1 and new.stats.two_by_two == 0

    def test_to_upper(self):
        st = _state(Partition(alpha=(0,), beta=(1,), gamma=()), [0.0, 0.0], [0.0, 0.0])
        new = apply_pivot(st, PivotDecision(kind="to_upper", i_bar=0, tau_new=1.0))
        assert new.partition == Partition(alpha=(), beta=(1,), gamma=(0,))

    def test_exchange_to_upper(self):
        st = _state(Partition(alpha=(0,), beta=(1,), gamma=()), [0.0, 0.0], [0.0, 0.0])
        new = apply_pivot(st, PivotDecision(kind="exchange_to_upper", i_bar=1, j_bar=0,
                                            tau_new=1.0))
        assert new.partition == Partition(alpha=(1,), beta=(), gamma=(0,))
        assert new.stats.two_by_two == 1

    def test_exchange_to_lower(self):
        st = _state(Partition(alpha=(0,), beta=(1, 2), gamma=()), [0.0] * 3, [0.0] * 3)
        new = apply_pivot(st, PivotDecision(kind="exchange_to_lower", i_bar=1, j_bar=0,
                                            tau_new=1.0))
        assert new.partition == Partition(alpha=(1,), beta=(0, 2), gamma=())

    def test_at_ub(self):
        st = _state(Partition(alpha=(), beta=(0,), gamma=()), [0.0], [0.0])
        new = apply_pivot(st, PivotDecision(kind="at_ub", i_bar=0, tau_new=1.0))
        assert new.partition == Partition(alpha=(), beta=(), gamma=(0,))


class TestSolutionAtTau:
    def test_all_beta(self):
        inst = make_instance(np.eye(3), np.zeros(3), np.full(3, np.inf))
        st = _state(Partition.initial(3), np.zeros(3), np.zeros(3))
        assert solution_at_tau(st, inst, 5.0) == pytest.approx(np.zeros(3))

    def test_all_gamma(self):
        inst = make_instance(np.eye(2), np.zeros(2), [2.0, 3.0])
        st = _state(Partition(alpha=(), beta=(), gamma=(0, 1)), np.zeros(2), np.zeros(2))
        assert solution_at_tau(st, inst, 1.0) == pytest.approx([2.0, 3.0])

    def test_alpha_linear_in_tau(self):
        inst = make_instance(np.eye(1), np.zeros(1), [np.inf])
        st = _state(Partition(alpha=(0,), beta=(), gamma=()), [-2.0], [1.0])
        assert solution_at_tau(st, inst, 1.0) == pytest.approx([1.0])


class TestSolvePsd:
    def test_one_variable_clipped(self):
        inst = make_instance([[2.0]], [-3.0], [1.0])
        out = solve_psd(inst, [1.0])
        assert out.status == "optimal"
        assert out.x == pytest.approx([1.0])
        assert out.objective == pytest.approx(-2.0)

    def test_start_condition_violation(self):
        inst = make_instance([[1, -1], [-1, 1]], [1.0, -2.0], [np.inf, np.inf])
        with pytest.raises(PreconditionViolated):
            solve_psd(inst, [0.0, 0.0])

    def test_matches_oracle_on_box(self):
        inst = make_instance([[2, 1], [1, 2]], [-3.0, -3.0], [1.0, 1.0])
        out = solve_psd(inst, [2.0, 2.0])
        ref = enumerate_active_sets(inst)
        assert out.x == pytest.approx([1.0, 1.0])
        assert objectives_match(out.objective, ref.objective)
        assert out.objective == pytest.approx(-3.0)

    def test_two_by_two_unbounded_branch(self):
        inst = make_instance([[1, -1], [-1, 1]], [-1.0, -1.0], [np.inf, np.inf])
        out = solve_psd(inst, [1.0, 1.0])
        assert out.status == "unbounded"
        assert recession_check(inst, out.ray)

    def test_two_by_two_bound_swap(self):
        inst = make_instance([[1, -1], [-1, 1]], [-1.0, -1.0], [np.inf, 2.0])
        out = solve_psd(inst, [1.0, 1.0])
        assert out.status == "optimal"
        assert kkt_residual(inst, out.x) <= 1e-8 * (1 + np.max(np.abs(inst.q)))
        assert out.stats.two_by_two >= 1
        ref = enumerate_active_sets(inst)
        assert objectives_match(out.objective, ref.objective)


class TestSolvePd:
    def test_separable_identity(self):
        q = np.array([1.0, -2.0, 0.0, -0.5])
        inst = make_instance(np.eye(4), q, np.full(4, np.inf))
        out = solve_pd(inst, np.ones(4))
        assert out.x == pytest.approx(np.maximum(-q, 0.0))

    def test_clip_at_upper_bound(self):
        inst = make_instance([[1.0]], [-5.0], [2.0])
        out = solve_pd(inst, [1.0])
        assert out.x == pytest.approx([2.0])

    def test_requires_positive_p(self):
        inst = make_instance(np.eye(2), [1.0, 1.0], [1.0, 1.0])
        with pytest.raises(PreconditionViolated):
            solve_pd(inst, [1.0, 0.0])

    def test_random_stieltjes_matches_oracle(self):
        rng = np.random.default_rng(33)
        for _ in range(30):
            n = 5
            a = -np.abs(rng.uniform(0.1, 1.0, size=(n, n)))
            a = np.tril(a, -1) + np.tril(a, -1).T
            np.fill_diagonal(a, np.sum(np.abs(a), axis=1) + rng.uniform(0.2, 1.0, size=n))
            u = rng.uniform(0.5, 2.0, size=n)
            inst = make_instance(a, rng.uniform(-3, 3, size=n), u)
            d = np.linalg.solve(a, np.ones(n))
            p = a @ d  # = ones; any Stieltjes dominance vector works
            out = solve_pd(inst, p)
            ref = enumerate_active_sets(inst)
            assert out.status == ref.status == "optimal"
            assert objectives_match(out.objective, ref.objective)
            assert out.stats.two_by_two == 0

    def test_no_two_by_two_on_pd(self):
        rng = np.random.default_rng(35)
        for _ in range(25):
            n = int(rng.integers(2, 7))
            m = random_sbar(rng, n)  # dominance margins > 0 make it pd
            u = np.where(rng.uniform(size=n) < 0.5, np.inf, rng.uniform(0.5, 2, size=n))
            inst = QpInstance(m, rng.uniform(-3, 3, size=n), u)
            mbar = _comparison(m)
            d = np.linalg.solve(mbar, np.ones(n))
            p = 0.5 * (m.full() + mbar) @ d
            out = solve_pd(inst, p)
            assert out.stats.two_by_two == 0


def _comparison(m):
    a = -np.abs(m.full())
    np.fill_diagonal(a, m.diagonal())
    return a


class TestEngineProperties:
    def _random_instance(self, rng):
        n = int(rng.integers(2, 8))
        m = random_sbar(rng, n)
        u = np.where(rng.uniform(size=n) < 0.4, np.inf, rng.uniform(0.5, 3.0, size=n))
        q = rng.uniform(-4.0, 4.0, size=n)
        mbar = _comparison(m)
        d = np.linalg.solve(mbar, np.ones(n))
        p = 0.5 * (m.full() + mbar) @ d
        return QpInstance(m, q, u), p

    def test_kkt_certificate_and_tau_monotone(self):
        rng = np.random.default_rng(41)
        for _ in range(50):
            inst, p = self._random_instance(rng)
            taus = []
            gammas = []

            def watch(state, tau_new, decision):
                taus.append(tau_new)
                gammas.append(set(state.partition.gamma))

            out = solve_psd(inst, p, callback=watch)
            assert out.status == "optimal"
            assert kkt_residual(inst, out.x) <= 1e-8 * (1 + np.max(np.abs(inst.q)))
            assert all(b <= a + 1e-9 for a, b in zip(taus, taus[1:]))
            assert all(g1 <= g2 for g1, g2 in zip(gammas, gammas[1:]))

    def test_pivot_bound_two_n(self):
        rng = np.random.default_rng(43)
        for _ in range(50):
            inst, p = self._random_instance(rng)
            out = solve_psd(inst, p)
            assert out.stats.pivots <= 2 * inst.n

    def test_piecewise_parametric_kkt(self):
        # Each segment endpoint solves the parametric problem at its tau.
        rng = np.random.default_rng(47)
        for _ in range(20):
            inst, p = self._random_instance(rng)
            checks = []

            def watch(state, tau_new, decision):
                if state.qbar is None:
                    return
                x = solution_at_tau(state, inst, tau_new)
                shifted = QpInstance(inst.m, inst.q + tau_new * p, inst.u)
                checks.append(kkt_residual(shifted, np.clip(x, 0.0, inst.u)))

            out = solve_psd(inst, p, callback=watch)
            assert out.status == "optimal"
            assert checks and max(checks) <= 1e-7 * (1 + np.max(np.abs(inst.q)) + np.max(p))

    def test_two_by_two_only_at_zero_schur_diagonal(self):
        # Drive the singular 2-variable family through the 2x2 branch and
        # verify every 2x2 decision happened at a vanished Schur diagonal.
        rng = np.random.default_rng(53)
        two_by_two_seen = 0
        for _ in range(60):
            c = rng.uniform(0.5, 2.0)
            m = SymMatrix.from_dense([[c, -c], [-c, c]])
            q = rng.uniform(-3.0, -0.1, size=2)
            kind = rng.integers(0, 3)
            if kind == 0:
                u = np.array([np.inf, rng.uniform(0.5, 3.0)])
            elif kind == 1:
                u = np.array([rng.uniform(0.5, 3.0), np.inf])
            else:
                u = rng.uniform(0.5, 3.0, size=2)
            inst = QpInstance(m, q, u)
            p = np.ones(2)
            events = []

            def watch(state, tau_new, decision, inst=inst):
                if decision is None:
                    return
                if decision.kind in ("at_ub", "exchange_to_lower", "exchange_to_upper"):
                    a = inst.m.full()
                    alpha = list(state.partition.alpha)
                    i = decision.i_bar
                    sigma = a[i, i]
                    if alpha:
                        sigma -= a[i, alpha] @ np.linalg.solve(
                            a[np.ix_(alpha, alpha)], a[alpha, i])
                    events.append(abs(sigma))

            out = solve_psd(inst, p, callback=watch)
            two_by_two_seen += out.stats.two_by_two
            assert len(events) == out.stats.two_by_two
            assert all(s <= 1e-10 * inst.m.scale() for s in events)
            if out.status == "optimal":
                assert kkt_residual(inst, out.x) <= 1e-8 * (1 + np.max(np.abs(q)))
                ref = enumerate_active_sets(inst)
                assert objectives_match(out.objective, ref.objective)
            else:
                assert recession_check(inst, out.ray)
                assert enumerate_active_sets(inst).status == "unbounded"
        assert two_by_two_seen >= 10
