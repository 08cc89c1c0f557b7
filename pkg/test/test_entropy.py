"""
Tests for the entropy estimators and text metrics.
"""
import math

import numpy as np
import pytest

from redlab.entropy import (
    Estimator,
    Histogram,
    Side,
    TextPair,
    binary_entropy,
    dataset_entropy,
    entropy_jvhw,
    entropy_miller_madow,
    entropy_mle,
    entropy_report,
    histogram,
    image_entropy,
    jvhw_degree,
    text_metric_rows,
    text_metrics,
)
from redlab.exceptions import BadValue, EmptyInput
from redlab.nn import Dataset


class TestHistogram:
    def test_counts(self):
        hist = histogram([0, 0, 1])
        assert hist.counts == {0: 2, 1: 1}
        assert hist.total == 3

    def test_single_symbol(self):
        assert histogram([7] * 12).counts == {7: 12}

    def test_all_bytes(self):
        hist = histogram(bytes(range(256)))
        assert hist.support_size == 256
        assert set(hist.counts.values()) == {1}

    def test_empty(self):
        with pytest.raises(EmptyInput):
            histogram([])

    @pytest.mark.parametrize('bad', [[-1, 2], [0.5, 1.0]])
    def test_bad_symbols(self, bad):
        with pytest.raises(BadValue):
            histogram(bad)

    def test_inconsistent_total(self):
        with pytest.raises(BadValue):
            Histogram(counts={0: 2}, total=3)


class TestMle:
    @pytest.mark.parametrize(
        'samples, expected',
        [
            ([0, 0, 1, 1], 1.0),
            ([5, 5, 5], 0.0),
            ([0, 1, 2, 3], 2.0),
        ],
    )
    def test_values(self, samples, expected):
        assert entropy_mle(histogram(samples)) == pytest.approx(expected, abs=1e-12)

    def test_bounds(self):
        rng = np.random.default_rng(0)
        for _ in range(20):
            samples = rng.integers(0, 9, size=50)
            h = entropy_mle(histogram(samples))
            assert 0.0 <= h <= math.log2(len(set(samples.tolist()))) + 1e-12

    def test_miller_madow_adds_correction(self):
        hist = histogram([0, 1, 2, 3])
        assert entropy_miller_madow(hist) == pytest.approx(2.0 + 3 / (8 * math.log(2)))


class TestJvhw:
    def test_degenerate(self):
        for n in (2, 10, 1000):
            assert entropy_jvhw([3] * n) == pytest.approx(0.0, abs=1e-6)

    def test_uniform_eight(self):
        samples = np.random.default_rng(42).integers(0, 8, size=10_000)
        assert entropy_jvhw(samples) == pytest.approx(3.0, abs=0.05)

    def test_beats_plugin_when_undersampled(self):
        truth = math.log2(1000)
        wins = 0
        for seed in range(20):
            hist = histogram(np.random.default_rng(seed).integers(0, 1000, size=2000))
            wins += abs(entropy_jvhw(hist) - truth) < abs(entropy_mle(hist) - truth)
        assert wins >= 15

    def test_consistent_as_n_grows(self):
        """Test both estimators close in on log2(16) at n = 100, 1000 and 10000."""
        errors = {}
        for n in (100, 1000, 10_000):
            hists = [histogram(np.random.default_rng(seed).integers(0, 16, size=n)) for seed in range(5)]
            errors[n] = (
                np.mean([abs(entropy_mle(h) - 4.0) for h in hists]),
                np.mean([abs(entropy_jvhw(h) - 4.0) for h in hists]),
            )
        for i in range(2):
            assert errors[100][i] > errors[10_000][i]
            assert errors[100][i] < 0.15
            assert errors[1000][i] < 0.05
            assert errors[10_000][i] < 0.02

    def test_non_negative(self):
        assert entropy_jvhw([0, 0, 0, 0, 0, 0, 0, 1]) >= 0.0

    def test_degree(self):
        assert jvhw_degree(2) == 2
        assert jvhw_degree(10**9) == 22

    def test_report_names_estimator(self):
        samples = [0, 1, 1, 2, 2, 2]
        assert entropy_report(samples).estimator == 'JVHW'
        fallback = entropy_report(samples, fallback=True)
        assert fallback.estimator == 'MillerMadow'
        assert fallback.h_jvhw == pytest.approx(entropy_miller_madow(histogram(samples)))
        assert fallback.support_size == 3


class TestImages:
    def test_constant_black(self):
        assert image_entropy(np.zeros((28, 28))) == 0.0

    def test_half_black_half_white(self):
        image = np.zeros((4, 4))
        image[:2] = 1.0
        assert image_entropy(image, Estimator.MLE) == pytest.approx(1.0)

    def test_dataset_mean_and_median(self):
        inputs = np.array([[0.0, 0.0, 0.0, 0.0], [0.0, 0.0, 1.0, 1.0], [0.0, 1.0, 1.0, 1.0]])
        data = Dataset(inputs=inputs, labels=[0, 0, 0], num_classes=1)
        mean, median = dataset_entropy(data)
        assert median == pytest.approx(binary_entropy(0.25))
        assert mean == pytest.approx((0.0 + 1.0 + binary_entropy(0.25)) / 3)


class TestTextMetrics:
    def test_aaaa(self):
        # 0x61 = 01100001 has three 1-bits
        m = text_metrics([TextPair(b'aaaa', b'aaab')], Side.BENIGN)
        assert m.mean_bits_per_char == 0.0
        assert m.h_byte_wise == 0.0
        assert m.h_bit_wise == pytest.approx(binary_entropy(3 / 8))

    def test_rare_character_raises_complexity(self):
        pairs = [TextPair(w, w + b'\xa7') for w in (b'hello', b'good', b'movie', b'bad')]
        benign = text_metrics(pairs, Side.BENIGN)
        adversarial = text_metrics(pairs, Side.ADVERSARIAL)
        assert adversarial.mean_bits_per_char > benign.mean_bits_per_char

    def test_identical_words(self):
        pairs = [TextPair(b'great', b'great')]
        assert text_metrics(pairs, 'benign') == text_metrics(pairs, 'adversarial')

    def test_rows(self):
        rows = text_metric_rows([TextPair(b'fine', b'f1ne')])
        assert [r['side'] for r in rows] == ['benign', 'adversarial']

    def test_empty_word(self):
        with pytest.raises(EmptyInput):
            TextPair(b'', b'x')

    def test_no_pairs(self):
        with pytest.raises(EmptyInput):
            text_metrics([], Side.BENIGN)
