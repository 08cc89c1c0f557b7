"""
Tests for the block quantizer and compression sizes.
"""
import numpy as np
import pytest
from pydantic import ValidationError

from redlab.attacks import AttackConfig, attack_dataset
from redlab.complexity import (
    BASE_LUMINANCE_TABLE,
    QuantizationConfig,
    block_dct,
    block_idct,
    complexity_metrics,
    complexity_report,
    compressed_size,
    image_to_bytes,
    quality_sweep,
    quantize,
    quantize_dataset,
    scaled_table,
)
from redlab.exceptions import BadValue, EmptyInput
from redlab.nn import accuracy


class TestTables:
    def test_quality_50_is_base(self):
        np.testing.assert_array_equal(scaled_table(50), BASE_LUMINANCE_TABLE)

    def test_quality_100_is_all_ones(self):
        assert np.all(scaled_table(100) == 1)

    def test_quality_1_saturates(self):
        assert scaled_table(1).max() == 255
        assert scaled_table(1).min() >= 1

    def test_quality_20(self):
        # scale 5000 // 20 = 250
        assert scaled_table(20)[0, 0] == 40

    def test_out_of_range(self):
        with pytest.raises(BadValue):
            scaled_table(0)
        with pytest.raises(ValidationError):
            QuantizationConfig(quality=101)

    def test_base_table_readonly(self):
        with pytest.raises(ValueError):
            BASE_LUMINANCE_TABLE[0, 0] = 1


class TestQuantize:
    def test_dct_is_orthonormal(self):
        block = np.random.default_rng(0).normal(size=(8, 8))
        coefficients = block_dct(block)
        assert np.sum(coefficients**2) == pytest.approx(np.sum(block**2))
        np.testing.assert_allclose(block_idct(coefficients), block, atol=1e-12)

    def test_quality_100_near_lossless(self, mini_split):
        _, test_set = mini_split
        for image in test_set.images()[:20]:
            assert np.max(np.abs(quantize(image, 100) - image)) <= 2 / 255

    def test_constant_image(self):
        image = np.full((28, 28), 0.5)
        out = quantize(image, 20)
        assert np.ptp(out) < 1e-9
        # at most half a DC step of 40 / 8 levels
        assert abs(out[0, 0] - 0.5) <= 2.5 / 255 + 1e-12

    def test_requantize_is_stable(self):
        image = 0.3 + 0.4 * np.random.default_rng(1).random((32, 32))
        once = quantize(image, 50)
        twice = quantize(once, 50)
        assert np.mean(np.abs(twice - once) <= 1 / 255) >= 0.99

    def test_color_channels(self):
        image = np.random.default_rng(2).random((3, 16, 16))
        out = quantize(image, QuantizationConfig(quality=75))
        assert out.shape == (3, 16, 16)
        np.testing.assert_allclose(out[1], quantize(image[1], 75))

    def test_odd_shape_is_padded(self):
        out = quantize(np.random.default_rng(3).random((10, 13)), 50)
        assert out.shape == (10, 13)
        assert out.min() >= 0.0 and out.max() <= 1.0

    def test_bad_shape(self):
        with pytest.raises(BadValue):
            quantize(np.zeros(10), 50)

    def test_pulls_adversarial_back(self, mini_split, trained_model):
        _, test_set = mini_split
        sample = test_set.subset(np.arange(10))
        adv, _ = attack_dataset(trained_model, sample, AttackConfig(epsilon=0.25))
        before = np.linalg.norm(adv.inputs - sample.inputs, axis=1).mean()
        after = np.linalg.norm(quantize_dataset(adv, 20).inputs - sample.inputs, axis=1).mean()
        assert after < before


class TestCompressedSize:
    def test_repetitive(self):
        assert compressed_size(b'\x00' * 10_000) < 100

    def test_random(self):
        payload = np.random.default_rng(0).integers(0, 256, size=10_000, dtype=np.uint8).tobytes()
        assert compressed_size(payload) >= 9_500

    def test_empty(self):
        with pytest.raises(EmptyInput):
            compressed_size(b'')

    def test_image_bytes(self):
        assert image_to_bytes(np.array([[0.0, 1.0], [0.5, 0.2]])) == bytes([0, 255, 128, 51])

    def test_report(self, mini_split):
        _, test_set = mini_split
        report = complexity_report(test_set)
        assert 0 < report.compressed_size
        assert report.ratio == pytest.approx(report.compressed_size / report.original_size)

    def test_adversarial_compresses_worse(self, mini_split, trained_model):
        _, test_set = mini_split
        adv, _ = attack_dataset(trained_model, test_set, AttackConfig(epsilon=0.25))
        benign, adversarial = complexity_metrics(test_set), complexity_metrics(adv)
        assert benign.original_size < adversarial.original_size
        assert benign.h_mle < adversarial.h_mle


class TestQualitySweep:
    def test_shape_of_curve(self, mini_split, trained_model):
        _, test_set = mini_split
        clean = accuracy(trained_model, test_set)
        sweep = dict(quality_sweep(trained_model, test_set, [100, 50, 1]))
        assert list(sweep) == [100, 50, 1]
        assert abs(sweep[100] - clean) <= 0.02
        assert sweep[1] < sweep[100]
