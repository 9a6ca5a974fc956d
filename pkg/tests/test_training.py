import numpy as np
import pytest

from clockauction import domain, nets, oracles, training
from clockauction.domain import DemandObservation
from clockauction.errors import DomainError
from clockauction.experiments import single_item_example_models
from clockauction.nets import Architecture, construct_exact, init
from clockauction.training import TrainConfig, dq_loss, fits_all_observations, train_on_dqs

from conftest import random_monotone_table


def truthful_obs(model, price, rnd):
    return DemandObservation(oracles.argmax_utility(model, price), tuple(price), rnd)


class TestDqLoss:
    def test_zero_when_net_agrees(self):
        caps = (2,)
        v_table = np.array([0.0, 2.0, 4.0])
        net = construct_exact(v_table, caps)
        observation = DemandObservation((2,), (1.0,), 0)
        assert oracles.argmax_utility(net, (1.0,)) == (2,)
        assert dq_loss(net, observation) == 0.0

    def test_zero_on_truthful_data_for_exact_net(self):
        # a net representing the true values satisfies the best-response
        # inequality at every truthful observation
        _, (_, v2) = single_item_example_models()
        table = v2.value_table()
        net = construct_exact(table, (10,))
        for r, p in enumerate([0.1, 0.3, 0.4, 0.55, 0.8, 2.9]):
            observation = truthful_obs(v2, (p,), r)
            assert dq_loss(net, observation) == pytest.approx(0.0, abs=1e-9)

    def test_nonnegative_on_fresh_net(self):
        _, (_, v2) = single_item_example_models()
        net = init(Architecture((8,)), (10,), seed=1)
        observation = DemandObservation((5,), (0.4,), 0)
        assert dq_loss(net, observation) >= 0.0

    def test_positive_iff_demand_mismatch(self, rng):
        caps = (3,)
        table = random_monotone_table(rng, caps)
        net = init(Architecture((8,)), caps, seed=2)
        for p in (0.2, 0.8, 1.6):
            observation = DemandObservation((3,), (p,), 0)
            loss = dq_loss(net, observation)
            if oracles.argmax_utility(net, (p,)) == (3,):
                assert loss == 0.0
            else:
                assert loss > 0.0


class TestTrainOnDqs:
    def test_rejects_zero_epochs(self):
        with pytest.raises(DomainError):
            TrainConfig(epochs=0)

    def test_rejects_empty_observations(self):
        net = init(Architecture((4,)), (2,), seed=0)
        with pytest.raises(DomainError):
            train_on_dqs(net, [], TrainConfig())

    def test_already_fit_net_unchanged(self):
        caps = (2,)
        net = construct_exact(np.array([0.0, 2.0, 4.0]), caps)
        observation = DemandObservation((2,), (1.0,), 0)
        trained, report = train_on_dqs(net, [observation], TrainConfig(epochs=1))
        assert report.steps == 0
        assert report.epoch_mismatches == [0]
        for (a, _), (b, _) in zip(net.param_arrays(), trained.param_arrays()):
            assert np.array_equal(a, b)

    def test_input_net_not_mutated(self):
        caps = (2,)
        net = init(Architecture((6,)), caps, seed=1)
        before = [arr.copy() for arr, _ in net.param_arrays()]
        obs = [DemandObservation((2,), (1.0,), 0), DemandObservation((0,), (3.0,), 1)]
        train_on_dqs(net, obs, TrainConfig(epochs=20, learning_rate=0.05))
        for prev, (arr, _) in zip(before, net.param_arrays()):
            assert np.array_equal(prev, arr)

    def test_learns_linear_bidder_demands(self):
        # v(x) = 2x on three copies: demand 2 below price 2, none above
        caps = (2,)
        obs = [DemandObservation((2,), (1.0,), 0), DemandObservation((0,), (3.0,), 1)]
        net = init(Architecture((8,)), caps, seed=2)
        trained, report = train_on_dqs(net, obs, TrainConfig(epochs=100, learning_rate=0.05))
        assert report.epoch_mismatches[-1] == 0
        assert oracles.argmax_utility(trained, (1.0,)) == (2,)
        assert oracles.argmax_utility(trained, (3.0,)) == (0,)

    def test_projection_invariant_after_training(self):
        _, (_, v2) = single_item_example_models()
        obs = [truthful_obs(v2, (p,), r) for r, p in enumerate([0.1, 0.4, 0.6, 1.0, 2.0])]
        net = init(Architecture((10,)), (10,), seed=3)
        trained, _ = train_on_dqs(net, obs, TrainConfig(epochs=40, learning_rate=0.03))
        trained.check_constraints()

    def test_deterministic(self):
        _, (_, v2) = single_item_example_models()
        obs = [truthful_obs(v2, (p,), r) for r, p in enumerate([0.1, 0.4, 0.6])]
        net = init(Architecture((8,)), (10,), seed=4)
        cfg = TrainConfig(epochs=25, learning_rate=0.05, seed=9)
        a, _ = train_on_dqs(net, obs, cfg)
        b, _ = train_on_dqs(net, obs, cfg)
        for (wa, _), (wb, _) in zip(a.param_arrays(), b.param_arrays()):
            assert np.array_equal(wa, wb)

    def test_zero_epoch_loss_reproduces_every_response(self, rng):
        caps = (4,)
        table = random_monotone_table(rng, caps, strictly_increasing=True)
        from clockauction.values import TabularValuation

        v = TabularValuation(caps, tuple(table))
        prices = [(float(p),) for p in np.linspace(0.05, 3.0, 30)]
        obs = [truthful_obs(v, p, r) for r, p in enumerate(prices)]
        net = init(Architecture((16, 16)), caps, seed=5)
        trained, report = train_on_dqs(
            net, obs, TrainConfig(epochs=400, learning_rate=0.05, cosine_schedule=True)
        )
        assert report.epoch_mismatches[-1] == 0
        assert fits_all_observations(trained, obs)

    def test_batch_per_epoch_mode(self):
        caps = (2,)
        obs = [DemandObservation((2,), (1.0,), 0), DemandObservation((0,), (3.0,), 1)]
        net = init(Architecture((8,)), caps, seed=2)
        cfg = TrainConfig(epochs=200, learning_rate=0.03, batch_per_epoch=True)
        trained, report = train_on_dqs(net, obs, cfg)
        assert report.epoch_mismatches[-1] == 0

    def test_adam_mode_converges(self):
        caps = (2,)
        obs = [DemandObservation((2,), (1.0,), 0), DemandObservation((0,), (3.0,), 1)]
        net = init(Architecture((8,)), caps, seed=2)
        cfg = TrainConfig(epochs=300, learning_rate=0.02, optimizer="adam")
        trained, report = train_on_dqs(net, obs, cfg)
        assert report.epoch_mismatches[-1] == 0

    def test_shuffle_is_seeded(self):
        _, (_, v2) = single_item_example_models()
        obs = [truthful_obs(v2, (p,), r) for r, p in enumerate([0.1, 0.4, 0.6, 1.2])]
        net = init(Architecture((8,)), (10,), seed=4)
        cfg = TrainConfig(epochs=20, learning_rate=0.05, shuffle=True, seed=13)
        a, _ = train_on_dqs(net, obs, cfg)
        b, _ = train_on_dqs(net, obs, cfg)
        for (wa, _), (wb, _) in zip(a.param_arrays(), b.param_arrays()):
            assert np.array_equal(wa, wb)


class TestLossGradient:
    def test_matches_finite_differences(self, rng):
        caps = (3,)
        net = init(Architecture((6,)), caps, seed=7)
        observation = DemandObservation((1,), (0.7,), 0)
        predicted = oracles.argmax_utility(net, (0.7,))
        if predicted == observation.bundle:
            pytest.skip("random net already consistent")
        grads = training._loss_grads(net, predicted, observation.bundle, l2=0.0)
        h = 1e-6
        for (arr, _), g in zip(net.param_arrays(), grads):
            flat = rng.integers(0, arr.size)
            idx = np.unravel_index(flat, arr.shape)
            old = arr[idx]

            def loss_value():
                net.invalidate()
                table = net.value_table()
                lhs = table[domain.rank_of(predicted, caps)] - domain.inner_product((0.7,), predicted)
                rhs = table[domain.rank_of(observation.bundle, caps)] - domain.inner_product(
                    (0.7,), observation.bundle
                )
                return lhs - rhs

            arr[idx] = old + h
            up = loss_value()
            arr[idx] = old - h
            down = loss_value()
            arr[idx] = old
            net.invalidate()
            fd = (up - down) / (2 * h)
            assert g[idx] == pytest.approx(fd, abs=1e-6, rel=1e-4)
