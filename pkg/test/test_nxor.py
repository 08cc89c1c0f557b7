"""
Tests for the equality network with redundant inputs.
"""
import itertools
from collections import Counter

import numpy as np
import pytest

from redlab.exceptions import BadValue, CombinatorialCapExceeded
from redlab.nxor import (
    ThresholdNetwork,
    canonical_base,
    enumerate_suppression,
    format_table,
    generalized_enumerate,
    noisy_xor_points,
)

# adv_count of every (w1, w2) for the canonical base
CANONICAL_ADV_COUNTS = {
    (0, 0): 0,
    (1, 0): 2,
    (-1, 0): 1,
    (0, 1): 2,
    (0, -1): 1,
    (1, 1): 2,
    (1, -1): 3,
    (-1, 1): 3,
    (-1, -1): 2,
}


class TestThresholdNetwork:
    def test_truth_table(self):
        net = canonical_base()
        assert net.evaluate(1, 1, 0) == 1
        assert net.evaluate(0, 1, 0) == 0
        assert net.evaluate(0, 0, 0) == 1
        assert net.evaluate(1, 0, 0) == 0

    def test_redundant_zero_disables_edges(self):
        net = canonical_base()
        for w1, w2 in itertools.product((-1, 0, 1), repeat=2):
            variant = net.with_redundant_weights([w1], [w2])
            for x1, x2 in itertools.product((0, 1), repeat=2):
                assert variant.evaluate(x1, x2, 0) == int(x1 == x2)

    def test_rejects_wrong_base(self):
        with pytest.raises(BadValue):
            ThresholdNetwork.from_flat([1, 1, 0.5, -1, -1, -0.5, 1, 1, 0.5])

    def test_from_flat(self):
        net = ThresholdNetwork.from_flat([1, 1, 1.5, -1, -1, -0.5, 1, 1, 0.5])
        assert net.n_redundant == 0
        assert net.evaluate(1, 1) == 1

    def test_wrong_arity(self):
        with pytest.raises(BadValue):
            canonical_base().evaluate(1, 1)


class TestSuppression:
    def test_nine_rows_in_order(self):
        rows = enumerate_suppression()
        assert [(r.w1, r.w2) for r in rows] == list(itertools.product((-1, 0, 1), repeat=2))

    def test_adv_counts(self):
        rows = enumerate_suppression()
        assert {(r.w1, r.w2): r.adv_count for r in rows} == CANONICAL_ADV_COUNTS

    def test_zero_suppression_is_the_only_perfect_setting(self):
        rows = enumerate_suppression()
        assert [(r.w1, r.w2) for r in rows if r.adv_count == 0] == [(0, 0)]

    def test_edges_and_potential(self):
        rows = enumerate_suppression()
        assert Counter((r.allowing_edges, r.potential) for r in rows) == Counter(
            {(0, 0): 1, (1, 1): 4, (2, 0): 2, (2, 2): 2}
        )

    def test_matches_brute_force(self):
        base = canonical_base()
        for row in enumerate_suppression(base):
            net = base.with_redundant_weights([row.w1], [row.w2])
            wrong = sum(
                net.evaluate(x1, x2, x3) != int(x1 == x2) for x1, x2, x3 in itertools.product((0, 1), repeat=3)
            )
            assert wrong == row.adv_count

    def test_table_text(self):
        text = format_table(enumerate_suppression())
        assert len(text.splitlines()) == 10
        assert 'adv_count' in text.splitlines()[0]


class TestGeneralized:
    def test_no_redundant_bits(self):
        summary = generalized_enumerate(0)
        assert summary.n_configs == 1
        assert summary.rows[0].adv_count == 0

    def test_one_bit_matches_suppression(self):
        rows = generalized_enumerate(1).rows
        assert [(r.weights, r.adv_count) for r in rows] == [
            ((s.w1, s.w2), s.adv_count) for s in enumerate_suppression()
        ]

    def test_two_bits(self):
        summary = generalized_enumerate(2)
        assert summary.n_configs == 81
        assert summary.input_space == 16
        zero = [r for r in summary.rows if not any(r.weights)]
        assert len(zero) == 1 and zero[0].adv_count == 0
        assert sum(summary.adv_count_distribution().values()) == 81

    def test_by_potential(self):
        grouped = generalized_enumerate(2).by_potential()
        assert sum(g['configs'] for g in grouped) == 81
        assert grouped[0]['potential'] == 0

    def test_cap(self):
        with pytest.raises(CombinatorialCapExceeded):
            generalized_enumerate(6)

    def test_range(self):
        with pytest.raises(BadValue):
            generalized_enumerate(17, cap=3**40)


class TestNoisyPoints:
    def test_labels(self):
        points, labels = noisy_xor_points(100, noise=0.0, seed=1)
        np.testing.assert_array_equal(labels, (points[:, 0] == points[:, 1]).astype(int))
