"""
Compression sizes and JPEG-style block quantization.

Quantization keeps only the lossy part of baseline JPEG: an orthonormal 8x8
DCT-II per block, division by a quality-scaled luminance table, rounding and
the inverse transform. No entropy coding or container is produced.
"""
import zlib
from dataclasses import dataclass
from typing import List, Literal, Sequence, Tuple, Union

import numpy as np
from pydantic import BaseModel, ConfigDict, Field
from scipy.fft import dctn, idctn

from redlab.entropy import Estimator, dataset_entropy
from redlab.exceptions import BadValue, EmptyInput
from redlab.nn import Dataset, MlpModel, accuracy
from redlab.utils import log as _log

log = _log.getChild('complexity')

BLOCK = 8
ZLIB_LEVEL = 9
COMPRESSED_QUALITY = 20

# base luminance table of the JPEG standard (Annex K)
BASE_LUMINANCE_TABLE = np.array(
    [
        [16, 11, 10, 16, 24, 40, 51, 61],
        [12, 12, 14, 19, 26, 58, 60, 55],
        [14, 13, 16, 24, 40, 57, 69, 56],
        [14, 17, 22, 29, 51, 87, 80, 62],
        [18, 22, 37, 56, 68, 109, 103, 77],
        [24, 35, 55, 64, 81, 104, 113, 92],
        [49, 64, 78, 87, 103, 121, 120, 101],
        [72, 92, 95, 98, 112, 100, 103, 99],
    ],
    dtype=np.int64,
)
BASE_LUMINANCE_TABLE.flags.writeable = False


class QuantizationConfig(BaseModel):
    model_config = ConfigDict(frozen=True)

    quality: int = Field(..., ge=1, le=100)
    block_size: Literal[8] = BLOCK

    def table(self) -> np.ndarray:
        return scaled_table(self.quality)


@dataclass(frozen=True)
class ComplexityReport:
    original_size: float
    compressed_size: float
    ratio: float


@dataclass(frozen=True)
class ComplexityMetrics:
    """Per-variant dataset means of the four complexity measures."""

    h_mle: float
    h_jvhw: float
    original_size: float
    compressed_size: float

    def values(self) -> Tuple[float, float, float, float]:
        return (self.h_mle, self.h_jvhw, self.original_size, self.compressed_size)


def scaled_table(quality: int) -> np.ndarray:
    """IJG quality scaling of the base table, entries clamped to 1..255."""
    if not 1 <= quality <= 100:
        raise BadValue(f'quality must be in 1..100, got {quality}')

    scale = 5000 // quality if quality < 50 else 200 - 2 * quality
    table = (BASE_LUMINANCE_TABLE * scale + 50) // 100
    return np.clip(table, 1, 255)


def block_dct(blocks: np.ndarray) -> np.ndarray:
    """Orthonormal 2-d DCT-II over the last two axes."""
    return dctn(blocks, type=2, axes=(-2, -1), norm='ortho')


def block_idct(coefficients: np.ndarray) -> np.ndarray:
    return idctn(coefficients, type=2, axes=(-2, -1), norm='ortho')


def _blockify(plane: np.ndarray) -> np.ndarray:
    h, w = plane.shape
    padded = np.pad(plane, ((0, -h % BLOCK), (0, -w % BLOCK)), mode='edge')
    ph, pw = padded.shape
    return padded.reshape(ph // BLOCK, BLOCK, pw // BLOCK, BLOCK).swapaxes(1, 2)


def _unblockify(blocks: np.ndarray, shape) -> np.ndarray:
    bh, bw = blocks.shape[:2]
    plane = blocks.swapaxes(1, 2).reshape(bh * BLOCK, bw * BLOCK)
    return plane[: shape[0], : shape[1]]


def _round_half_away(x: np.ndarray) -> np.ndarray:
    return np.sign(x) * np.floor(np.abs(x) + 0.5)


def _quantize_plane(plane: np.ndarray, table: np.ndarray) -> np.ndarray:
    blocks = _blockify(plane * 255.0 - 128.0)
    levels = _round_half_away(block_dct(blocks) / table)
    restored = block_idct(levels * table)
    return np.clip((_unblockify(restored, plane.shape) + 128.0) / 255.0, 0.0, 1.0)


def quantize(image, config: Union[QuantizationConfig, int]) -> np.ndarray:
    """JPEG-style lossy round trip of one image.

    Parameters
    ----------
    image : array_like
        ``(H, W)`` grayscale or ``(C, H, W)`` channel-planar image in [0, 1].
        Each channel is quantized on its own, without color conversion or
        chroma subsampling.
    config : QuantizationConfig or int
        An int is taken as the quality.

    Returns
    -------
    numpy.ndarray
        Same shape as ``image``, values in [0, 1].
    """
    if not isinstance(config, QuantizationConfig):
        config = QuantizationConfig(quality=config)

    image = np.asarray(image, dtype=np.float64)
    if image.size == 0:
        raise EmptyInput('cannot quantize a zero-sized image')
    if image.ndim not in (2, 3):
        raise BadValue(f'image must be (H, W) or (C, H, W), got shape {image.shape}')

    table = config.table().astype(np.float64)
    if image.ndim == 2:
        return _quantize_plane(image, table)

    return np.stack([_quantize_plane(plane, table) for plane in image])


def quantize_dataset(dataset: Dataset, quality: int) -> Dataset:
    config = QuantizationConfig(quality=quality)
    images = dataset.images()
    out = np.stack([quantize(img, config) for img in images]) if len(dataset) else images
    return dataset.with_inputs(out.reshape(len(dataset), -1), name=f'{dataset.name}@q{quality}')


def compressed_size(payload: bytes) -> int:
    """Length of ``payload`` after zlib (DEFLATE) at level 9."""
    if not payload:
        raise EmptyInput('cannot compress an empty payload')

    return len(zlib.compress(bytes(payload), ZLIB_LEVEL))


def image_to_bytes(image) -> bytes:
    """8-bit pixel bytes, ``round(v * 255)`` in row-major order."""
    image = np.asarray(image, dtype=np.float64)
    return np.rint(np.clip(image, 0, 1) * 255).astype(np.uint8).tobytes()


def complexity_report(dataset: Dataset, quality: int = COMPRESSED_QUALITY) -> ComplexityReport:
    """Mean original and compressed sizes over the images of a dataset.

    ``original_size`` is the raw pixel bytes through DEFLATE,
    ``compressed_size`` the same after quantization at ``quality``.
    """
    if len(dataset) == 0:
        raise EmptyInput(f'dataset {dataset.name!r} is empty')

    config = QuantizationConfig(quality=quality)
    original, compressed = [], []
    for image in dataset.images():
        original.append(compressed_size(image_to_bytes(image)))
        compressed.append(compressed_size(image_to_bytes(quantize(image, config))))

    o, c = float(np.mean(original)), float(np.mean(compressed))
    return ComplexityReport(original_size=o, compressed_size=c, ratio=c / o)


def complexity_metrics(dataset: Dataset, fallback: bool = False) -> ComplexityMetrics:
    """The four dataset means compared between benign and adversarial variants."""
    h_mle, _ = dataset_entropy(dataset, Estimator.MLE)
    h_jvhw, _ = dataset_entropy(dataset, Estimator.MILLER_MADOW if fallback else Estimator.JVHW)
    report = complexity_report(dataset)
    return ComplexityMetrics(
        h_mle=h_mle,
        h_jvhw=h_jvhw,
        original_size=report.original_size,
        compressed_size=report.compressed_size,
    )


def quality_sweep(model: MlpModel, dataset: Dataset, qualities: Sequence[int]) -> List[Tuple[int, float]]:
    """Accuracy of ``model`` on ``dataset`` quantized at each quality."""
    rows = []
    for q in qualities:
        acc = accuracy(model, quantize_dataset(dataset, q))
        log.info(f'quality {q}: accuracy {acc:.4f}')
        rows.append((int(q), acc))

    return rows
