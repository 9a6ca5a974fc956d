import numpy as np
import pytest

from clockauction import metrics, oracles
from clockauction.errors import MetricError
from clockauction.experiments import single_item_example_models, two_item_example_models
from clockauction.metrics import clearing_error, efficiency, r_squared, r_squared_shift_invariant


class TestEfficiency:
    def test_optimum_is_fully_efficient(self):
        caps, models = two_item_example_models()
        allocation, _ = oracles.wdp_true(models, caps)
        assert efficiency(allocation, models, caps) == 1.0

    def test_two_item_restricted_outcome(self):
        caps, models = two_item_example_models()
        assert efficiency(((3, 7), (0, 0)), models, caps) == pytest.approx(10.0 / 18.0)

    def test_single_item_restricted_outcome(self):
        caps, models = single_item_example_models()
        assert efficiency(((6,), (0,)), models, caps) == pytest.approx(6.0 / 9.0)

    def test_zero_optimum_counts_as_efficient(self):
        from clockauction.values import TabularValuation

        v = TabularValuation((1,), (0.0, 0.0))
        assert efficiency(((0,),), [v], (1,)) == 1.0

    def test_cached_optimum_reused(self):
        caps, models = single_item_example_models()
        assert efficiency(((6,), (1,)), models, caps, optimum_welfare=9.0) == 1.0


class TestClearingError:
    def test_exact_clearing(self):
        assert clearing_error(((6,), (4,)), (10,)) == 0

    def test_one_over_one_under(self):
        assert clearing_error(((6, 4), (5, 5)), (10, 10)) == 1 + 1

    def test_nothing_sold(self):
        assert clearing_error(((0, 0), (0, 0)), (10, 10)) == 200

    def test_integer_result(self):
        assert isinstance(clearing_error(((1,), (1,)), (3,)), int)


class TestRSquared:
    def test_perfect_prediction(self):
        assert r_squared([1.0, 2.0, 3.0], [1.0, 2.0, 3.0]) == 1.0

    def test_mean_prediction_scores_zero(self):
        truth = [0.0, 10.0]
        assert r_squared([5.0, 5.0], truth) == 0.0

    def test_constant_shift_halves_nothing(self):
        # shifting by 5 on truth (0, 10): SS_res = 50, SS_tot = 50
        assert r_squared([5.0, 15.0], [0.0, 10.0]) == 0.0

    def test_degenerate_truth_rejected(self):
        with pytest.raises(MetricError):
            r_squared([1.0, 2.0], [3.0, 3.0])

    def test_length_mismatch_rejected(self):
        with pytest.raises(MetricError):
            r_squared([1.0], [1.0, 2.0])


class TestShiftInvariantRSquared:
    def test_shift_blindness(self):
        truth = [0.0, 3.0, 7.0, 10.0]
        shifted = [t + 4.2 for t in truth]
        assert r_squared_shift_invariant(shifted, truth) == pytest.approx(1.0)

    def test_perfect_prediction(self):
        truth = [0.0, 3.0, 7.0]
        assert r_squared_shift_invariant(truth, truth) == 1.0

    def test_orthogonal_centered_prediction(self):
        # centered truth (-1, 0, 1); centered prediction (1, -2, 1)/sqrt? use
        # an orthogonal vector with equal norm: t_c = (-1, 0, 1), p_c = (1, 0, 1) - mean...
        truth = [0.0, 1.0, 2.0]          # centered: (-1, 0, 1), norm^2 = 2
        pred = [1.0, -1.0, 1.0]          # centered: (2/3, -4/3, 2/3), orthogonal to t_c
        tc = np.array(truth) - np.mean(truth)
        pc = np.array(pred) - np.mean(pred)
        assert float(tc @ pc) == pytest.approx(0.0)
        expected = 1.0 - float(np.sum((tc - pc) ** 2)) / float(np.sum(tc**2))
        got = r_squared_shift_invariant(pred, truth)
        assert got == pytest.approx(expected)
        assert got <= 0.0

    def test_degenerate_truth_rejected(self):
        with pytest.raises(MetricError):
            r_squared_shift_invariant([1.0, 2.0], [3.0, 3.0])
