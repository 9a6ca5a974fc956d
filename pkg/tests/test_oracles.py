import itertools

import numpy as np
import pytest

from clockauction import domain, oracles
from clockauction.domain import DemandObservation
from clockauction.errors import DimensionError, DomainError, ResourceLimitError
from clockauction.experiments import single_item_example_models, two_item_example_models
from clockauction.values import TabularValuation, ThresholdValuation

from conftest import all_bundles, brute_argmax, brute_max_revenue, random_monotone_table


def obs(bundle, price, rnd):
    return DemandObservation(tuple(bundle), tuple(price), rnd)


class TestArgmax:
    def test_huge_price_gives_empty(self):
        _, (v1, v2) = two_item_example_models()
        assert oracles.argmax_utility(v1, (100.0, 100.0)) == (0, 0)
        assert oracles.argmax_utility(v2, (100.0, 100.0)) == (0, 0)

    def test_two_step_buyer_prefers_five_at_low_price(self):
        _, (_, v2) = single_item_example_models()
        expected, _ = brute_argmax(lambda x: v2.value(x), (10,), (0.4,))
        assert expected == (5,)
        assert oracles.argmax_utility(v2, (0.4,)) == (5,)

    def test_two_step_buyer_prefers_one_at_high_price(self):
        _, (_, v2) = single_item_example_models()
        expected, _ = brute_argmax(lambda x: v2.value(x), (10,), (0.6,))
        assert expected == (1,)
        assert oracles.argmax_utility(v2, (0.6,)) == (1,)

    def test_tie_break_is_smallest_rank(self):
        # two bundles tie exactly; the lexicographically smaller one wins
        v = TabularValuation((2,), (0.0, 1.0, 2.0))
        assert oracles.argmax_utility(v, (1.0,)) == (0,)

    def test_routes_agree_on_random_instances(self, rng):
        for _ in range(40):
            m = int(rng.integers(1, 4))
            caps = tuple(int(c) for c in rng.integers(1, 4, size=m))
            table = random_monotone_table(rng, caps)
            val = TabularValuation(caps, tuple(table))
            price = tuple(float(p) for p in rng.uniform(0, 3, size=m))
            fast = oracles.argmax_utility(val, price)
            pruned = oracles.argmax_utility_pruned(val, price)
            naive = oracles.argmax_utility_naive(val, price)
            assert fast == pruned == naive

    def test_demand_and_utility_consistent(self):
        _, (v1, _) = single_item_example_models()
        bundle, utility = oracles.demand_and_utility(v1, (0.5,))
        assert bundle == (6,)
        assert utility == pytest.approx(3.0)


class TestIndirectUtility:
    def test_zero_price_wants_everything(self):
        v = TabularValuation((3,), (0.0, 1.0, 2.0, 3.0))
        assert oracles.indirect_utility(v, (0.0,)) == 3.0
        assert oracles.argmax_utility(v, (0.0,)) == (3,)

    def test_block_buyer_at_half(self):
        _, (v1, _) = single_item_example_models()
        assert oracles.indirect_utility(v1, (0.5,)) == pytest.approx(3.0)

    def test_large_price_gives_zero(self):
        _, (v1, _) = single_item_example_models()
        assert oracles.indirect_utility(v1, (50.0,)) == 0.0

    def test_never_negative(self, rng):
        caps = (2, 2)
        table = random_monotone_table(rng, caps)
        val = TabularValuation(caps, tuple(table))
        for _ in range(50):
            price = tuple(float(p) for p in rng.uniform(0, 10, size=2))
            assert oracles.indirect_utility(val, price) >= 0.0


class TestIndirectRevenue:
    def test_zero_price(self):
        assert oracles.indirect_revenue((0.0, 0.0), (3, 5)) == 0.0

    def test_single_item(self):
        assert oracles.indirect_revenue((0.5,), (10,)) == 5.0

    def test_two_items(self):
        assert oracles.indirect_revenue((0.5, 0.5), (10, 10)) == 10.0

    def test_equals_brute_force_over_feasible_allocations(self, rng):
        for _ in range(10):
            m = int(rng.integers(1, 3))
            caps = tuple(int(c) for c in rng.integers(1, 3, size=m))
            price = tuple(float(p) for p in rng.uniform(0, 2, size=m))
            for n in (1, 2, 3):
                brute = brute_max_revenue(caps, price, n)
                assert oracles.indirect_revenue(price, caps) == pytest.approx(brute)


class TestWdpReports:
    def test_all_empty_reports(self):
        caps = (3, 3)
        reports = [[obs((0, 0), (1.0, 1.0), 0)], [obs((0, 0), (1.0, 1.0), 0)]]
        allocation = oracles.wdp_reports(reports, caps)
        assert allocation == ((0, 0), (0, 0))

    def test_two_item_low_price_reports_cannot_combine(self):
        caps, models = two_item_example_models()
        prices = [(x, x) for x in (0.1, 0.25, 0.4)]
        reports = [[], []]
        for r, p in enumerate(prices):
            for i, model in enumerate(models):
                reports[i].append(obs(oracles.argmax_utility(model, p), p, r))
        allocation = oracles.wdp_reports(reports, caps)
        assert domain.social_welfare(allocation, models) == 10.0

    def test_single_item_low_price_reports(self):
        caps, models = single_item_example_models()
        prices = [(x,) for x in (0.1, 0.3, 0.45)]
        reports = [[], []]
        for r, p in enumerate(prices):
            for i, model in enumerate(models):
                reports[i].append(obs(oracles.argmax_utility(model, p), p, r))
        allocation = oracles.wdp_reports(reports, caps)
        assert domain.social_welfare(allocation, models) == 6.0

    def test_never_infeasible(self, rng):
        caps = (2, 2)
        for _ in range(20):
            reports = []
            for _ in range(3):
                rounds = []
                for r in range(3):
                    bundle = tuple(int(v) for v in rng.integers(0, 3, size=2))
                    price = tuple(float(p) for p in rng.uniform(0, 2, size=2))
                    rounds.append(obs(bundle, price, r))
                reports.append(rounds)
            allocation = oracles.wdp_reports(reports, caps)
            assert domain.is_feasible(allocation, caps)

    def test_inferred_at_least_any_feasible_observed_round(self, rng):
        caps = (3, 3)
        reports = []
        for _ in range(2):
            rounds = []
            for r in range(4):
                bundle = tuple(int(v) for v in rng.integers(0, 2, size=2))
                price = tuple(float(p) for p in rng.uniform(0, 2, size=2))
                rounds.append(obs(bundle, price, r))
            reports.append(rounds)
        cands = oracles.candidates_from_reports(reports, 2)
        _, best = oracles.select_allocation(cands, caps)
        for r in range(4):
            tuple_r = [reports[i][r].bundle for i in range(2)]
            if domain.is_feasible(tuple_r, caps):
                inferred = sum(reports[i][r].inferred_value() for i in range(2))
                assert best >= inferred - 1e-12

    def test_repeated_bundle_takes_max_price(self):
        cands = oracles.candidates_from_reports(
            [[obs((2,), (0.5,), 0), obs((2,), (0.9,), 1)]], 1
        )
        assert cands[0][(2,)] == pytest.approx(1.8)

    def test_rounds_must_increase(self):
        with pytest.raises(DomainError):
            oracles.check_reports([[obs((1,), (0.5,), 1), obs((1,), (0.5,), 1)]], 1)


class TestSelectAllocation:
    def test_matches_naive_on_random_candidate_sets(self, rng):
        for _ in range(30):
            m = int(rng.integers(1, 3))
            caps = tuple(int(c) for c in rng.integers(1, 4, size=m))
            n = int(rng.integers(1, 4))
            cands = []
            for _ in range(n):
                k = int(rng.integers(1, 5))
                entry = {}
                for _ in range(k):
                    bundle = tuple(int(rng.integers(0, c + 1)) for c in caps)
                    entry[bundle] = float(rng.uniform(0, 5))
                cands.append(entry)
            fast = oracles.select_allocation(cands, caps)
            naive = oracles.select_allocation_naive(cands, caps)
            assert fast == naive

    def test_lexicographic_tie_break(self):
        caps = (1, 1)
        cands = [
            {(1, 0): 1.0, (0, 1): 1.0},
            {(0, 0): 0.0},
        ]
        allocation, total = oracles.select_allocation(cands, caps)
        assert total == 1.0
        # (0,1) has rank 1, (1,0) has rank 2: smaller rank wins the tie
        assert allocation == ((0, 1), (0, 0))


class TestWdpTrue:
    def test_single_strictly_monotone_bidder_takes_everything(self):
        v = TabularValuation((2, 2), tuple(float(x[0] + 2 * x[1]) for x in all_bundles((2, 2))))
        allocation, welfare = oracles.wdp_true([v], (2, 2))
        assert allocation == ((2, 2),)
        assert welfare == 6.0

    def test_two_item_example_optimum(self):
        caps, models = two_item_example_models()
        allocation, welfare = oracles.wdp_true(models, caps)
        assert welfare == 18.0
        assert allocation == ((4, 4), (4, 4))

    def test_single_item_example_optimum(self):
        caps, models = single_item_example_models()
        allocation, welfare = oracles.wdp_true(models, caps)
        assert welfare == 9.0
        assert allocation == ((6,), (1,))

    def test_beats_random_feasible_allocations(self, rng):
        caps = (2, 2)
        tables = [random_monotone_table(rng, caps) for _ in range(3)]
        models = [TabularValuation(caps, tuple(t)) for t in tables]
        _, best = oracles.wdp_true(models, caps)
        for _ in range(1000):
            remaining = list(caps)
            alloc = []
            for _ in range(3):
                bundle = tuple(int(rng.integers(0, r + 1)) for r in remaining)
                remaining = [r - b for r, b in zip(remaining, bundle)]
                alloc.append(bundle)
            assert best >= domain.social_welfare(alloc, models) - 1e-12

    def test_resource_cap(self):
        v = TabularValuation((1,), (0.0, 1.0))
        with pytest.raises(ResourceLimitError):
            oracles.wdp_true([v], (1,), cap=1)


class TestClearingSearch:
    def test_single_item_example_has_no_lcp(self):
        caps, models = single_item_example_models()
        grid = oracles.uniform_price_grid(1, 0.0, 1.0, 0.05)
        assert oracles.brute_force_clearing_search(models, caps, grid) is None

    def test_two_item_example_has_no_lcp(self):
        caps, models = two_item_example_models()
        grid = oracles.uniform_price_grid(2, 0.0, 1.0, 0.1)
        assert oracles.brute_force_clearing_search(models, caps, grid) is None

    def test_near_tie_single_copy_market_clears(self):
        # two bidders want one copy at 5 and 5 - eps; any price between sells it
        eps = 0.1
        caps = (1,)
        v_hi = TabularValuation(caps, (0.0, 5.0))
        v_lo = TabularValuation(caps, (0.0, 5.0 - eps))
        grid = [[4.95]]
        price = oracles.brute_force_clearing_search([v_hi, v_lo], caps, grid)
        assert price == (4.95,)

    def test_grid_cap(self):
        caps, models = two_item_example_models()
        grid = oracles.uniform_price_grid(2, 0.0, 1.0, 0.001)
        with pytest.raises(ResourceLimitError):
            oracles.brute_force_clearing_search(models, caps, grid, max_grid_points=100)

    def test_tie_sets_enumerated(self):
        # at p = 0.5 the two-step buyer is torn between 1 and 5 copies
        _, (_, v2) = single_item_example_models()
        ties = oracles.tie_set(v2, (0.5,))
        assert ties == [(1,), (5,)]
