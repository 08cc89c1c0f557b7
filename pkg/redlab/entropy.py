"""
Discrete entropy estimators and the word-pair text metrics.

All estimators return bits. Symbols are non-negative integers, pixel values
are quantized to 8-bit symbols with ``round(v * 255)`` before counting.
"""
import enum
import functools
import math
from dataclasses import dataclass
from typing import Dict, Iterable, Sequence, Tuple, Union

import numpy as np
from scipy.special import entr

from redlab.exceptions import BadValue, EmptyInput
from redlab.nn import Dataset
from redlab.utils import log as _log

log = _log.getChild('entropy')

LN2 = math.log(2)

# JVHW constants: polynomial degree min(ceil(1.6 ln n), JVHW_MAX_DEGREE) on [0, 2 c1 ln n / n]
JVHW_DEGREE_FACTOR = 1.6
JVHW_MAX_DEGREE = 22
JVHW_C1 = 1.0


class Estimator(str, enum.Enum):
    MLE = 'MLE'
    JVHW = 'JVHW'
    MILLER_MADOW = 'MillerMadow'


class Side(str, enum.Enum):
    BENIGN = 'benign'
    ADVERSARIAL = 'adversarial'


@dataclass(frozen=True)
class Histogram:
    counts: Dict[int, int]
    total: int

    def __post_init__(self):
        if any(c < 1 for c in self.counts.values()):
            raise BadValue('histogram counts must be >= 1 for present symbols')
        if sum(self.counts.values()) != self.total:
            raise BadValue(f'histogram total {self.total} != sum of counts')

    @property
    def support_size(self):
        return len(self.counts)

    def values(self) -> np.ndarray:
        return np.fromiter(self.counts.values(), dtype=np.int64, count=len(self.counts))


@dataclass(frozen=True)
class EntropyReport:
    """Both estimates of one sample.

    ``estimator`` names the bias-corrected estimator behind ``h_jvhw``:
    ``JVHW`` normally, ``MillerMadow`` when the fallback is switched on.
    """

    h_mle: float
    h_jvhw: float
    n_samples: int
    support_size: int
    estimator: str = Estimator.JVHW.value


@dataclass(frozen=True)
class TextPair:
    benign_word: bytes
    adversarial_word: bytes

    def __post_init__(self):
        if not self.benign_word or not self.adversarial_word:
            raise EmptyInput('text pair words must be non-empty')

    def word(self, side) -> bytes:
        return self.benign_word if Side(side) is Side.BENIGN else self.adversarial_word


@dataclass(frozen=True)
class TextMetrics:
    mean_bits_per_char: float
    h_byte_wise: float
    h_bit_wise: float
    compressed_size: float


def _as_symbols(samples) -> np.ndarray:
    if isinstance(samples, (bytes, bytearray, memoryview)):
        return np.frombuffer(bytes(samples), dtype=np.uint8).astype(np.int64)

    symbols = np.asarray(samples)
    if symbols.dtype.kind == 'f':
        if not np.all(symbols == np.floor(symbols)):
            raise BadValue('symbols must be integers')
    elif symbols.dtype.kind not in 'iub':
        raise BadValue(f'symbols must be integers, got dtype {symbols.dtype}')

    return symbols.astype(np.int64).ravel()


def histogram(samples) -> Histogram:
    """Exact symbol counts of ``samples`` (a sequence of integers or a byte string)."""
    symbols = _as_symbols(samples)
    if symbols.size == 0:
        raise EmptyInput('cannot build a histogram of no samples')
    if symbols.min() < 0:
        raise BadValue(f'symbols must be non-negative, got {symbols.min()}')

    values, counts = np.unique(symbols, return_counts=True)
    return Histogram(counts=dict(zip(values.tolist(), counts.tolist())), total=int(symbols.size))


def _as_histogram(samples) -> Histogram:
    return samples if isinstance(samples, Histogram) else histogram(samples)


def entropy_mle(hist: Histogram) -> float:
    """Plug-in entropy in bits."""
    hist = _as_histogram(hist)
    p = hist.values() / hist.total
    return float(entr(p).sum() / LN2)


def entropy_miller_madow(hist: Histogram) -> float:
    """Plug-in entropy plus the Miller-Madow correction ``(k - 1) / (2 n ln 2)``."""
    hist = _as_histogram(hist)
    return entropy_mle(hist) + (hist.support_size - 1) / (2 * hist.total * LN2)


@functools.lru_cache(maxsize=32)
def _entr_power_coefficients(degree: int) -> Tuple[float, ...]:
    """Power-basis coefficients of a near-minimax approximation of -u ln u on [0, 1].

    Chebyshev interpolation is within a small factor of the best uniform
    approximation and needs no Remez iteration.
    """
    cheb = np.polynomial.Chebyshev.interpolate(entr, degree, domain=[0, 1])
    poly = cheb.convert(kind=np.polynomial.Polynomial, domain=[0, 1], window=[0, 1])
    return tuple(float(c) for c in poly.coef)


def jvhw_degree(n: int) -> int:
    return max(1, min(math.ceil(JVHW_DEGREE_FACTOR * math.log(n)), JVHW_MAX_DEGREE))


def _jvhw_polynomial_terms(counts: np.ndarray, n: int, degree: int, interval: float) -> np.ndarray:
    """Unbiased estimates of the approximating polynomial of -p ln p at each count.

    With ``p = interval * u``, ``-p ln p = interval * (-u ln u) - p ln(interval)``;
    ``u**k`` is estimated without bias by ``prod_{j<k} (c - j) / (interval (n - j))``.
    """
    coefficients = _entr_power_coefficients(degree)
    counts = counts.astype(np.float64)
    acc = np.full_like(counts, coefficients[0])
    moment = np.ones_like(counts)
    for k in range(1, degree + 1):
        moment = moment * (counts - (k - 1)) / (interval * (n - (k - 1)))
        acc = acc + coefficients[k] * moment

    return interval * acc - (counts / n) * math.log(interval)


def entropy_jvhw(samples) -> float:
    """JVHW minimax entropy estimate in bits.

    Parameters
    ----------
    samples : sequence of int, bytes or Histogram

    Returns
    -------
    float
        Clamped to be non-negative; exactly 0 for a degenerate sample.

    Notes
    -----
    Symbols with count at most ``c1 ln n`` are estimated through the unbiased
    estimator of a degree ``min(ceil(1.6 ln n), 22)`` polynomial approximation
    of ``-p ln p`` on ``[0, 2 c1 ln n / n]``. Symbols with count above
    ``2 c1 ln n`` use the plug-in term plus ``1 / (2n)``. Counts in between
    blend the two linearly.
    """
    hist = _as_histogram(samples)
    n = hist.total
    if hist.support_size == 1:
        return 0.0

    counts = hist.values()
    x = counts / n
    interval = min(2 * JVHW_C1 * math.log(n) / n, 1.0)

    plugin = entr(x) + 1 / (2 * n)
    ratio = np.clip(2 * x / interval - 1, 0, 1)
    need_poly = ratio < 1
    terms = plugin.copy()
    if need_poly.any():
        poly = _jvhw_polynomial_terms(counts[need_poly], n, jvhw_degree(n), interval)
        r = ratio[need_poly]
        terms[need_poly] = r * plugin[need_poly] + (1 - r) * poly

    return float(max(terms.sum(), 0.0) / LN2)


def binary_entropy(p: float) -> float:
    if not 0 <= p <= 1:
        raise BadValue(f'binary entropy needs p in [0, 1], got {p}')

    return float((entr(p) + entr(1 - p)) / LN2)


def entropy_report(samples, fallback: bool = False) -> EntropyReport:
    """MLE and bias-corrected estimates of one sample.

    ``fallback`` substitutes Miller-Madow for JVHW; the report names which ran.
    """
    hist = _as_histogram(samples)
    if fallback:
        estimator, h = Estimator.MILLER_MADOW, entropy_miller_madow(hist)
    else:
        estimator, h = Estimator.JVHW, entropy_jvhw(hist)

    return EntropyReport(
        h_mle=entropy_mle(hist),
        h_jvhw=h,
        n_samples=hist.total,
        support_size=hist.support_size,
        estimator=estimator.value,
    )


ESTIMATORS = {
    Estimator.MLE: entropy_mle,
    Estimator.JVHW: entropy_jvhw,
    Estimator.MILLER_MADOW: entropy_miller_madow,
}


def pixel_symbols(image) -> np.ndarray:
    image = np.asarray(image, dtype=np.float64)
    if image.size == 0:
        raise EmptyInput('image has no pixels')

    return np.rint(np.clip(image, 0, 1) * 255).astype(np.int64).ravel()


def image_entropy(image, estimator: Union[Estimator, str] = Estimator.MLE) -> float:
    """Entropy of the 256-bin pixel histogram of one image with values in [0, 1]."""
    return ESTIMATORS[Estimator(estimator)](histogram(pixel_symbols(image)))


def dataset_entropy(dataset: Dataset, estimator: Union[Estimator, str] = Estimator.MLE) -> Tuple[float, float]:
    """Mean and median per-image entropy over a dataset."""
    if len(dataset) == 0:
        raise EmptyInput(f'dataset {dataset.name!r} is empty')

    values = np.array([image_entropy(row, estimator) for row in dataset.inputs])
    return float(values.mean()), float(np.median(values))


def text_metrics(pairs: Sequence[TextPair], side: Union[Side, str]) -> TextMetrics:
    """The four word-level complexity metrics of one side of the word pairs.

    ``mean_bits_per_char`` is the mean over words of the byte-histogram MLE
    entropy, ``h_byte_wise`` that mean divided by 8, ``h_bit_wise`` the binary
    entropy of the pooled fraction of 1-bits over all words and
    ``compressed_size`` the mean DEFLATE size per word.
    """
    from redlab.complexity import compressed_size

    if not pairs:
        raise EmptyInput('text metrics need at least one word pair')

    words = [pair.word(side) for pair in pairs]
    per_word = np.array([entropy_mle(histogram(w)) for w in words])
    bits = np.unpackbits(np.frombuffer(b''.join(words), dtype=np.uint8))
    mean_bits = float(per_word.mean())
    return TextMetrics(
        mean_bits_per_char=mean_bits,
        h_byte_wise=mean_bits / 8,
        h_bit_wise=binary_entropy(float(bits.mean())),
        compressed_size=float(np.mean([compressed_size(w) for w in words])),
    )


def text_metric_rows(pairs: Iterable[TextPair]):
    pairs = list(pairs)
    rows = []
    for side in Side:
        m = text_metrics(pairs, side)
        rows.append(
            {
                'side': side.value,
                'mean_bits_per_char': m.mean_bits_per_char,
                'h_byte_wise': m.h_byte_wise,
                'h_bit_wise': m.h_bit_wise,
                'compressed_size': m.compressed_size,
                'n_pairs': len(pairs),
            }
        )

    return rows
