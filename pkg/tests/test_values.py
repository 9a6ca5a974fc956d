import itertools

import numpy as np
import pytest

from clockauction import domain, values
from clockauction.errors import DomainError
from clockauction.experiments import single_item_example_models, two_item_example_models
from clockauction.values import (
    SynergyDomainSpec,
    SynergyValuation,
    TabularValuation,
    ThresholdValuation,
    generate_synergy_model,
    to_table,
)

from conftest import all_bundles, random_monotone_table


class TestThresholdValuation:
    def test_empty_bundle_is_zero(self):
        _, (v1, v2) = two_item_example_models()
        assert v1.value((0, 0)) == 0.0
        assert v2.value((0, 0)) == 0.0

    def test_two_step_buyer_at_five(self):
        _, (_, v2) = single_item_example_models()
        # 3 * 1[5 >= 1] + 2 * 1[5 >= 5]
        assert v2.value((5,)) == 5.0
        assert v2.value((1,)) == 3.0
        assert v2.value((4,)) == 3.0

    def test_block_values(self):
        _, (v1, _) = two_item_example_models()
        assert v1.value((7, 3)) == 10.0
        assert v1.value((3, 7)) == 10.0
        assert v1.value((4, 4)) == 9.0
        assert v1.value((10, 10)) == 10.0  # max, not sum

    def test_rejects_zero_threshold(self):
        with pytest.raises(DomainError):
            ThresholdValuation((2, 2), ((((0, 0)), 1.0),))

    def test_out_of_capacity_bundle(self):
        _, (v1, _) = single_item_example_models()
        with pytest.raises(DomainError):
            v1.value((11,))


class TestTabularValuation:
    def test_linear_table(self):
        v = TabularValuation((2,), (0.0, 2.0, 4.0))
        assert v.value((1,)) == 2.0
        assert to_table(v).tolist() == [0.0, 2.0, 4.0]

    def test_rejects_non_monotone(self):
        with pytest.raises(DomainError):
            TabularValuation((2,), (0.0, 3.0, 1.0))

    def test_rejects_non_normalized(self):
        with pytest.raises(DomainError):
            TabularValuation((1,), (1.0, 2.0))

    def test_block_buyer_table(self):
        _, (v1, _) = single_item_example_models()
        table = to_table(v1)
        for x in range(11):
            assert table[x] == (6.0 if x >= 6 else 0.0)

    def test_tabulate_roundtrip(self, rng):
        caps = (2, 3)
        table = random_monotone_table(rng, caps)
        model = TabularValuation(caps, tuple(table))
        frozen = values.tabulate(model)
        for x in all_bundles(caps):
            assert frozen.value(x) == model.value(x)


class TestSynergyValuation:
    def test_zero_synergy_is_additive(self):
        v = SynergyValuation((3, 3), interest=(0, 1), base_values=(1.5, 2.0), synergy=0.0)
        for x in all_bundles((3, 3)):
            assert v.value(x) == pytest.approx(1.5 * x[0] + 2.0 * x[1])

    def test_uninterested_items_are_worthless(self):
        v = SynergyValuation((2, 2), interest=(0,), base_values=(1.0,), synergy=0.5)
        assert v.value((0, 2)) == 0.0
        assert v.value((1, 0)) == v.value((1, 2))

    def test_synergy_amplifies_packages(self):
        v = SynergyValuation((3,), interest=(0,), base_values=(1.0,), synergy=0.5)
        assert v.value((1,)) == pytest.approx(1.0)
        assert v.value((2,)) == pytest.approx(2.0 * 1.5)
        assert v.value((3,)) == pytest.approx(3.0 * 1.5**2)


class TestGenerator:
    SPEC = SynergyDomainSpec(capacities=(2, 2, 2), n_bidders=3, interest_size=(1, 3))

    def test_determinism(self):
        a = generate_synergy_model(7, self.SPEC)
        b = generate_synergy_model(7, self.SPEC)
        assert values.domain_to_dict((2, 2, 2), a) == values.domain_to_dict((2, 2, 2), b)

    def test_different_seeds_differ(self):
        a = generate_synergy_model(7, self.SPEC)
        b = generate_synergy_model(8, self.SPEC)
        assert values.domain_to_dict((2, 2, 2), a) != values.domain_to_dict((2, 2, 2), b)

    def test_monotone_by_full_pair_enumeration(self):
        models = generate_synergy_model(7, self.SPEC)
        bundles = all_bundles((2, 2, 2))
        for model in models:
            for x, y in itertools.product(bundles, bundles):
                if all(a <= b for a, b in zip(x, y)):
                    assert model.value(x) <= model.value(y) + 1e-12

    def test_normalized(self):
        for seed in range(5):
            for model in generate_synergy_model(seed, self.SPEC):
                assert model.value((0, 0, 0)) == 0.0

    def test_threshold_terms_stay_monotone(self):
        spec = SynergyDomainSpec(
            capacities=(2, 2), n_bidders=2, n_threshold_terms=2, bonus_range=(0.5, 1.5)
        )
        for seed in range(5):
            for model in generate_synergy_model(seed, spec):
                table = to_table(model)
                for rank, x in enumerate(domain.iter_bundles((2, 2))):
                    for j in range(2):
                        if x[j] > 0:
                            smaller = tuple(v - 1 if k == j else v for k, v in enumerate(x))
                            assert table[rank] >= table[domain.rank_of(smaller, (2, 2))]


class TestSerialization:
    def test_domain_document_roundtrip(self):
        spec = SynergyDomainSpec(capacities=(2, 3), n_bidders=2)
        models = generate_synergy_model(3, spec)
        doc = values.domain_to_dict(spec.capacities, models)
        caps, restored = values.domain_from_dict(doc)
        assert caps == (2, 3)
        for a, b in zip(models, restored):
            for x in all_bundles(caps):
                assert a.value(x) == b.value(x)

    def test_threshold_roundtrip(self):
        caps, models = two_item_example_models()
        doc = values.domain_to_dict(caps, models)
        _, restored = values.domain_from_dict(doc)
        assert restored[0].value((7, 3)) == 10.0
        assert restored[1].value((4, 4)) == 9.0

    def test_tabular_roundtrip(self, rng):
        caps = (2, 2)
        table = random_monotone_table(rng, caps)
        doc = values.domain_to_dict(caps, [TabularValuation(caps, tuple(table))])
        _, restored = values.domain_from_dict(doc)
        assert np.array_equal(to_table(restored[0]), table)

    def test_unknown_kind_rejected(self):
        with pytest.raises(DomainError):
            values.model_from_dict((2,), {"kind": "mystery"})
