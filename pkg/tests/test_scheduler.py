"""Virtual queues, drift bound, scoring, two-stage selection, the
brute-force oracle, and the decision validator on hand-built instances
where every client's round cost is chosen exactly.
"""
import numpy as np
import pytest
from conftest import THETA, fake_breakdown, loose_params, make_ctx

from socfedcs import scheduler, sghs
from socfedcs.costs import CostParams
from socfedcs.scheduler import (InvariantViolation, SelectionDecision,
                                VirtualQueues)

PARAMS = loose_params()


class TestQueues:
    def test_idle_growth(self):
        q = VirtualQueues.zeros(1)
        d = SelectionDecision(pairs=[], theta=THETA, per_client_costs={},
                              objective=0.0)
        q2 = scheduler.update_queues(q, d, 14.0 / 120.0)
        assert q2.z[0] == pytest.approx(0.11666666666666667)

    def test_floor_at_zero(self):
        q = VirtualQueues(z=np.array([0.5]))
        d = SelectionDecision(pairs=[(0, 0)], theta=THETA,
                              per_client_costs={}, objective=0.0)
        assert scheduler.update_queues(q, d, 0.1).z[0] == 0.0

    def test_drain_by_one(self):
        q = VirtualQueues(z=np.array([2.3]))
        d = SelectionDecision(pairs=[(0, 0)], theta=THETA,
                              per_client_costs={}, objective=0.0)
        assert scheduler.update_queues(q, d, 0.1).z[0] == pytest.approx(1.3)

    def test_lyapunov(self):
        q = VirtualQueues(z=np.array([3.0, 4.0]))
        assert q.lyapunov() == pytest.approx(12.5)


class TestDriftBound:
    def test_default_scale(self):
        gamma = scheduler.drift_bound(40, 14.0 / 120.0)
        assert gamma == pytest.approx(20.272222222222222)

    def test_zero_delta(self):
        assert scheduler.drift_bound(40, 0.0) == pytest.approx(20.0)

    def test_single_fc_full_rate(self):
        assert scheduler.drift_bound(1, 1.0) == pytest.approx(1.0)

    def test_rejects_empty(self):
        with pytest.raises(ValueError):
            scheduler.drift_bound(0, 0.5)


class TestScore:
    def test_zero_queue_unit_v(self):
        params = CostParams(theta=THETA, v=1.0, t_max_cmp=10.0, t_max_com=10.0,
                            clients_per_round=2, delta=0.25)
        ctx = make_ctx(np.zeros((1, 1)), [0.7, 0.1], params)
        q = VirtualQueues.zeros(1)
        assert scheduler.score(0, 0, THETA, ctx, q, params) == \
            pytest.approx(0.7)

    def test_worked_example(self):
        ctx = make_ctx(np.zeros((1, 1)), [0.5, 0.1], PARAMS)
        q = VirtualQueues(z=np.array([2.0]))
        assert scheduler.score(0, 0, THETA, ctx, q, PARAMS) == \
            pytest.approx(3.0)

    def test_backlog_priority(self):
        ctx = make_ctx(np.zeros((2, 1)), [0.5, 0.5, 0.1], PARAMS)
        q = VirtualQueues(z=np.array([1.5, 0.5]))
        s1 = scheduler.score(0, 0, THETA, ctx, q, PARAMS)
        s2 = scheduler.score(1, 1, THETA, ctx, q, PARAMS)
        assert s1 < s2

    def test_rejects_non_candidate(self):
        ctx = make_ctx(np.zeros((2, 1)), [0.5, 0.5, 0.1], PARAMS)
        q = VirtualQueues.zeros(2)
        with pytest.raises(ValueError):
            scheduler.score(0, 1, THETA, ctx, q, PARAMS)


class TestFcRecommend:
    def test_singleton_pool(self):
        ctx = make_ctx(np.zeros((1, 1)), [0.4, 0.1], PARAMS)
        rec = scheduler.fc_recommend(0, THETA, ctx, VirtualQueues.zeros(1),
                                     PARAMS)
        assert rec[:2] == (0, 0)

    def test_all_unavailable(self):
        ctx = make_ctx(np.array([[1.0]]), [0.4, 0.1], PARAMS,
                       available=[False, False])
        assert scheduler.fc_recommend(0, THETA, ctx, VirtualQueues.zeros(1),
                                      PARAMS) is None

    def test_sc_wins_despite_surcharge(self):
        # SC cost 0.1 + 0.05 surcharge still beats the FC's own 0.4.
        ctx = make_ctx(np.array([[1.0]]), [0.4, 0.1], PARAMS)
        m, i, s = scheduler.fc_recommend(0, THETA, ctx,
                                         VirtualQueues.zeros(1), PARAMS)
        assert (m, i) == (0, 1)
        assert s == pytest.approx(10.0 * 0.15)

    def test_fc_wins_when_surcharge_dominates(self):
        ctx = make_ctx(np.array([[1.0]]), [0.12, 0.1], PARAMS)
        _, i, _ = scheduler.fc_recommend(0, THETA, ctx,
                                         VirtualQueues.zeros(1), PARAMS)
        assert i == 0


class TestServerSelect:
    def test_empty_recommendations(self):
        ctx = make_ctx(np.zeros((2, 1)), [0.4, 0.4, 0.1], PARAMS)
        q = VirtualQueues(z=np.array([1.0, 2.0]))
        d = scheduler.server_select([], THETA, ctx, q, PARAMS)
        assert d.pairs == []
        q2 = scheduler.update_queues(q, d, PARAMS.delta)
        assert np.allclose(q2.z, q.z + PARAMS.delta)

    def test_duplicate_sc_conflict(self):
        # Two FCs recommend the same SC; the lower score wins the client.
        weights = np.zeros((3, 5))
        weights[1, 4] = weights[2, 4] = 1.0  # SC global id 7
        ctx = make_ctx(weights, [0.4] * 3 + [0.1] * 5, PARAMS)
        recs = [(1, 7, 0.4), (2, 7, 0.6)]
        d = scheduler.server_select(recs, THETA, ctx,
                                    VirtualQueues.zeros(3), PARAMS)
        assert d.pairs == [(1, 7)]

    def test_top_l_by_score(self):
        ctx = make_ctx(np.zeros((3, 1)), [0.2, 0.3, 0.4, 0.1], PARAMS)
        recs = [(0, 0, 2.0), (1, 1, 3.0), (2, 2, 4.0)]
        d = scheduler.server_select(recs, THETA, ctx,
                                    VirtualQueues.zeros(3), PARAMS)
        assert sorted(d.pairs) == [(0, 0), (1, 1)]  # L = 2


class TestRoundObjective:
    def test_empty_selection(self):
        q = VirtualQueues(z=np.array([1.0, 2.0]))
        d = SelectionDecision(pairs=[], theta=THETA, per_client_costs={},
                              objective=0.0)
        assert scheduler.round_objective(d, q, 0.1, 10.0) == \
            pytest.approx(0.3)

    def test_single_selection_zero_queues(self):
        d = SelectionDecision(pairs=[(0, 0)], theta=THETA,
                              per_client_costs={(0, 0): fake_breakdown(0.4)},
                              objective=0.0)
        assert scheduler.round_objective(d, VirtualQueues.zeros(3), 0.1,
                                         10.0) == pytest.approx(4.0)

    def test_worked_example(self):
        d = SelectionDecision(
            pairs=[(0, 0), (1, 1)], theta=THETA,
            per_client_costs={(0, 0): fake_breakdown(0.3),
                              (1, 1): fake_breakdown(0.5)},
            objective=0.0)
        q = VirtualQueues(z=np.array([1.0, 1.0, 0.0]))
        assert scheduler.round_objective(d, q, 0.1, 10.0) == \
            pytest.approx(3.2)


class TestDriftInequality:
    def test_holds_for_consistent_update(self):
        rng = np.random.default_rng(0)
        for _ in range(200):
            num_fc = 5
            z = rng.uniform(0.0, 3.0, size=num_fc)
            before = VirtualQueues(z=z)
            chosen = rng.choice(num_fc, size=rng.integers(0, 4),
                                replace=False)
            d = SelectionDecision(pairs=[(int(m), int(m)) for m in chosen],
                                  theta=THETA, per_client_costs={},
                                  objective=0.0)
            delta = float(rng.uniform(0.0, 1.0))
            after = scheduler.update_queues(before, d, delta)
            scheduler.check_drift_inequality(before, after, d, delta)

    def test_detects_inconsistent_queues(self):
        before = VirtualQueues(z=np.array([0.0, 0.0]))
        after = VirtualQueues(z=np.array([50.0, 50.0]))
        d = SelectionDecision(pairs=[], theta=THETA, per_client_costs={},
                              objective=0.0)
        with pytest.raises(InvariantViolation):
            scheduler.check_drift_inequality(before, after, d, 0.1)


class TestSelectAtTheta:
    def test_disjoint_matches_single_poll(self):
        # Disjoint pools: iterated polling reduces to one poll plus top-L.
        rng = np.random.default_rng(1)
        for _ in range(30):
            num_fc, per_fc = 4, 2
            weights = np.zeros((num_fc, num_fc * per_fc))
            for m in range(num_fc):
                weights[m, m * per_fc:(m + 1) * per_fc] = 1.0
            wsets = rng.uniform(0.05, 1.0, size=num_fc * (1 + per_fc))
            ctx = make_ctx(weights, list(wsets), PARAMS)
            q = VirtualQueues(z=rng.uniform(0.0, 5.0, size=num_fc))
            d = scheduler.select_at_theta(THETA, ctx, q, PARAMS)
            recs = [scheduler.fc_recommend(m, THETA, ctx, q, PARAMS)
                    for m in range(num_fc)]
            d2 = scheduler.server_select([r for r in recs if r], THETA, ctx,
                                         q, PARAMS)
            assert sorted(d.pairs) == sorted(d2.pairs)
            assert d.objective == pytest.approx(d2.objective)

    def test_conflict_falls_back_to_next_best(self):
        # Both FCs want SC 2 (cheapest); the loser takes its next choice.
        weights = np.array([[1.0, 1.0], [1.0, 0.0]])
        # ids: FC 0, FC 1, SC 2, SC 3; SC 2 cheapest for both.
        ctx = make_ctx(weights, [0.9, 0.9, 0.05, 0.2], PARAMS)
        q = VirtualQueues(z=np.array([0.0, 10.0]))
        d = scheduler.select_at_theta(THETA, ctx, q, PARAMS)
        assert sorted(d.pairs) == [(0, 3), (1, 2)]

    def test_respects_cardinality(self):
        ctx = make_ctx(np.zeros((5, 1)), [0.1] * 5 + [0.5], PARAMS)
        d = scheduler.select_at_theta(THETA, ctx, VirtualQueues.zeros(5),
                                      PARAMS)
        assert len(d.pairs) == PARAMS.clients_per_round

    def test_skips_ineligible(self):
        ctx = make_ctx(np.zeros((2, 1)), [0.1, 0.1, 0.5], PARAMS,
                       available=[False, True, True])
        d = scheduler.select_at_theta(THETA, ctx, VirtualQueues.zeros(2),
                                      PARAMS)
        assert d.pairs == [(1, 1)]


class TestAlternatingOptimize:
    def test_zero_budget_one_shot(self):
        ctx = make_ctx(np.zeros((3, 1)), [0.3, 0.2, 0.4, 0.1], PARAMS)
        q = VirtualQueues.zeros(3)
        d = scheduler.alternating_optimize(
            ctx, q, PARAMS, sghs.SghsParams(ni=0), np.random.default_rng(0),
            theta_init=0.37)
        ref = scheduler.select_at_theta(0.37, ctx, q, PARAMS)
        assert d.theta == 0.37
        assert sorted(d.pairs) == sorted(ref.pairs)

    def test_identical_clients_selection_stable(self):
        ctx = make_ctx(np.zeros((4, 1)), [0.3] * 5, PARAMS)
        q = VirtualQueues.zeros(4)
        d = scheduler.alternating_optimize(
            ctx, q, PARAMS, sghs.SghsParams(ni=60), np.random.default_rng(1))
        assert sorted(d.pairs) == [(0, 0), (1, 1)]  # first L by id

    def test_single_client_matches_grid_search(self):
        params = CostParams(theta=THETA, v=10.0, t_max_cmp=10.0,
                            t_max_com=10.0, clients_per_round=1, delta=0.5)
        ctx = make_ctx(np.zeros((1, 1)), [0.3, 0.1], params)
        q = VirtualQueues(z=np.array([5.0]))
        d = scheduler.alternating_optimize(
            ctx, q, params, sghs.SghsParams(ni=200),
            np.random.default_rng(2))
        # objective at theta with the client selected: v * G + z * (delta - 1)
        grid = np.linspace(0.01, 0.99, 10_000)
        grid_obj = min(params.v * ctx.cost(0, 0, float(t))
                       + 5.0 * (0.5 - 1.0) for t in grid)
        assert d.objective <= grid_obj + 1e-2


class TestBruteForce:
    def test_small_enumeration(self):
        weights = np.zeros((3, 4))
        weights[0, 0] = weights[1, 1] = weights[2, 2] = 1.0
        ctx = make_ctx(weights, [0.3] * 3 + [0.2] * 4, PARAMS)
        d = scheduler.brute_force_select(ctx, VirtualQueues.zeros(3), THETA,
                                        PARAMS)
        assert len(d.pairs) <= PARAMS.clients_per_round

    def test_state_cap(self):
        weights = np.ones((6, 6))
        ctx = make_ctx(weights, [0.3] * 12, PARAMS)
        with pytest.raises(scheduler.InstanceTooLargeError):
            scheduler.brute_force_select(ctx, VirtualQueues.zeros(6), THETA,
                                        PARAMS, max_states=100)

    def test_zero_cap_prefers_empty(self):
        params = CostParams(theta=THETA, v=10.0, t_max_cmp=10.0,
                            t_max_com=10.0, clients_per_round=0, delta=0.25)
        ctx = make_ctx(np.zeros((2, 1)), [0.3, 0.3, 0.1], params)
        d = scheduler.brute_force_select(ctx, VirtualQueues.zeros(2), THETA,
                                        params)
        assert d.pairs == []

    def test_zero_queues_prefer_idle(self):
        # With no backlog, any selection only adds cost; idle is optimal.
        ctx = make_ctx(np.zeros((2, 1)), [0.3, 0.3, 0.1], PARAMS)
        d = scheduler.brute_force_select(ctx, VirtualQueues.zeros(2), THETA,
                                        PARAMS)
        assert d.pairs == []

    def test_disjoint_equality_under_uniform_backlog(self):
        rng = np.random.default_rng(3)
        for _ in range(20):
            num_fc, per_fc = 3, 2
            weights = np.zeros((num_fc, num_fc * per_fc))
            for m in range(num_fc):
                weights[m, m * per_fc:(m + 1) * per_fc] = 1.0
            wsets = rng.uniform(0.05, 1.0, size=num_fc * (1 + per_fc))
            ctx = make_ctx(weights, list(wsets), PARAMS)
            backlog = 1.1 * PARAMS.v * (wsets.max() + PARAMS.sigma * PARAMS.c0)
            q = VirtualQueues(z=np.full(num_fc, backlog))
            ts = scheduler.select_at_theta(THETA, ctx, q, PARAMS)
            bf = scheduler.brute_force_select(ctx, q, THETA, PARAMS)
            assert ts.objective == pytest.approx(bf.objective, rel=1e-12)


class TestValidateDecision:
    def _ctx(self):
        return make_ctx(np.array([[1.0], [0.0]]), [0.3, 0.3, 0.1], PARAMS)

    def _decision(self, pairs):
        return SelectionDecision(
            pairs=pairs, theta=THETA,
            per_client_costs={p: fake_breakdown(0.3) for p in pairs},
            objective=0.0)

    def test_accepts_valid(self):
        scheduler.validate_decision(self._decision([(0, 2), (1, 1)]),
                                    self._ctx(), PARAMS, max_selected=2)

    def test_cap(self):
        with pytest.raises(InvariantViolation):
            scheduler.validate_decision(self._decision([(0, 0), (1, 1)]),
                                        self._ctx(), PARAMS, max_selected=1)

    def test_uncapped_when_none(self):
        scheduler.validate_decision(self._decision([(0, 0), (1, 1)]),
                                    self._ctx(), PARAMS, max_selected=None)

    def test_duplicate_fc(self):
        with pytest.raises(InvariantViolation):
            scheduler.validate_decision(self._decision([(0, 0), (0, 2)]),
                                        self._ctx(), PARAMS)

    def test_duplicate_client(self):
        ctx = make_ctx(np.array([[1.0], [1.0]]), [0.3, 0.3, 0.1], PARAMS)
        with pytest.raises(InvariantViolation):
            scheduler.validate_decision(self._decision([(0, 2), (1, 2)]),
                                        ctx, PARAMS)

    def test_fc_only_mode(self):
        with pytest.raises(InvariantViolation):
            scheduler.validate_decision(self._decision([(0, 2)]), self._ctx(),
                                        PARAMS, fc_only=True)

    def test_non_candidate(self):
        with pytest.raises(InvariantViolation):
            scheduler.validate_decision(self._decision([(1, 2)]), self._ctx(),
                                        PARAMS)

    def test_unavailable_client(self):
        ctx = make_ctx(np.array([[1.0], [0.0]]), [0.3, 0.3, 0.1], PARAMS,
                       available=[True, True, False])
        with pytest.raises(InvariantViolation):
            scheduler.validate_decision(self._decision([(0, 2)]), ctx, PARAMS)

    def test_straggler_cap(self):
        params = CostParams(theta=THETA, v=10.0, t_max_cmp=0.01,
                            t_max_com=10.0, clients_per_round=2, delta=0.25)
        ctx = make_ctx(np.array([[1.0], [0.0]]), [0.3, 0.3, 0.1], params)
        with pytest.raises(InvariantViolation):
            scheduler.validate_decision(self._decision([(0, 0)]), ctx, params)
