"""
Memorization capacity by random weight masking, and the sweep relating
adversarial robustness to the entropy of penultimate features.
"""
import math
import time
from dataclasses import dataclass, field
from typing import List, Optional, Sequence, Tuple

import numpy as np
from scipy.stats import spearmanr

from redlab.attacks import AttackConfig, attack_dataset
from redlab.entropy import entropy_jvhw, entropy_miller_madow, entropy_mle, histogram
from redlab.exceptions import BadValue, DimensionMismatch, EmptyInput
from redlab.nn import (
    Dataset,
    LayerSpec,
    MlpModel,
    TrainConfig,
    accuracy,
    features,
    mlp_init,
    param_count,
    train,
)
from redlab.utils import derive_rng, derive_seed, log as _log

log = _log.getChild('capacity')

FEATURE_LEVELS = 16
FEATURE_CLIP = 2.0


@dataclass(frozen=True, eq=False)
class WeightMask:
    """Bit vector over the flat param layout; True entries are trainable."""

    mask: np.ndarray

    def __post_init__(self):
        mask = np.array(self.mask, dtype=bool).reshape(-1)
        mask.flags.writeable = False
        object.__setattr__(self, 'mask', mask)

    @property
    def trainable_count(self):
        return int(np.count_nonzero(self.mask))

    def __len__(self):
        return self.mask.shape[0]

    @classmethod
    def ones(cls, n: int) -> 'WeightMask':
        return cls(np.ones(n, dtype=bool))

    @classmethod
    def zeros(cls, n: int) -> 'WeightMask':
        return cls(np.zeros(n, dtype=bool))


@dataclass
class CapacityResult:
    """Outcome of one binary search.

    ``min_params`` is the smallest passing size found; ``None`` when even the
    full architecture fails. ``largest_failing`` is the biggest size that
    failed in every trial. ``partial`` marks a search cut short by the budget.
    """

    epsilon: float
    min_params: Optional[int]
    trials_per_size: int
    curve: List[Tuple[int, float]] = field(default_factory=list)
    largest_failing: Optional[int] = None
    exceeds_architecture: bool = False
    partial: bool = False
    variant: str = ''
    total_params: int = 0

    def monotone_curve(self) -> List[Tuple[int, float]]:
        """The curve with best accuracy replaced by its running max over size."""
        out, best = [], -math.inf
        for size, acc in self.curve:
            best = max(best, acc)
            out.append((size, best))
        return out


@dataclass(frozen=True)
class RobustnessPoint:
    adv_ratio: float
    adv_test_accuracy: float
    feature_entropy: float
    feature_entropy_jvhw: float
    n_successful: int


def random_mask(n_params: int, trainable_count: int, rng: np.random.Generator) -> WeightMask:
    """Mask drawn uniformly among masks with exactly ``trainable_count`` ones."""
    if not 0 <= trainable_count <= n_params:
        raise BadValue(f'trainable_count must be in [0, {n_params}], got {trainable_count}')

    mask = np.zeros(n_params, dtype=bool)
    mask[rng.choice(n_params, size=trainable_count, replace=False)] = True
    return WeightMask(mask)


def apply_mask(model: MlpModel, mask: WeightMask, seed: int) -> MlpModel:
    """Re-initialize ``model`` from ``seed`` and pin the masked entries at zero."""
    if len(mask) != model.n_params:
        raise DimensionMismatch(f'mask has length {len(mask)}, model has {model.n_params} params')

    fresh = mlp_init(model.layers, seed)
    return MlpModel(layers=fresh.layers, params=fresh.params * mask.mask, seed=seed, mask=mask.mask)


def _majority(dataset: Dataset) -> float:
    return float(dataset.class_frequencies().max())


def memorization_capacity(
    dataset: Dataset,
    epsilon: float,
    arch: Sequence[LayerSpec],
    budget: Optional[float] = None,
    trials_per_size: int = 5,
    train_config: Optional[TrainConfig] = None,
    seed: int = 0,
    variant: str = '',
) -> CapacityResult:
    """Smallest number of trainable parameters that fits ``dataset`` to ``1 - epsilon``.

    Parameters
    ----------
    dataset : Dataset
        Training set; accuracy is measured on it.
    epsilon : float
        Error tolerance in (0, 1).
    arch : sequence of LayerSpec
    budget : float, optional
        Wall-clock seconds. When exhausted the search stops and the result is
        flagged ``partial``.
    trials_per_size : int
        Random masks tried at each searched size; a size passes when any trial
        passes.
    train_config : TrainConfig, optional
        Its ``target_accuracy`` is overridden with ``1 - epsilon``.
    seed : int
        Master seed; trial ``t`` at size ``k`` draws from ``(seed, k, t)``.

    Notes
    -----
    Size 0 is the constant model and is scored by the majority-class
    frequency. The full size is tried first; if it fails the result is
    flagged ``exceeds_architecture``.
    """
    if not 0 < epsilon < 1:
        raise BadValue(f'epsilon must be in (0, 1), got {epsilon}')
    if len(dataset) == 0:
        raise EmptyInput('cannot measure capacity on an empty dataset')
    if trials_per_size < 1:
        raise BadValue(f'trials_per_size must be >= 1, got {trials_per_size}')

    target = 1 - epsilon
    config = (train_config or TrainConfig()).model_copy(update={'target_accuracy': target})
    base = mlp_init(arch, seed)
    total = param_count(base.layers)
    start = time.monotonic()
    tried = {}

    def over_budget():
        return budget is not None and time.monotonic() - start > budget

    def passes(size):
        if size == 0:
            best = _majority(dataset)
        else:
            best = -math.inf
            for trial in range(trials_per_size):
                mask = random_mask(total, size, derive_rng(seed, size, trial))
                model = apply_mask(base, mask, derive_seed(seed, size, trial))
                model, _ = train(model, dataset, config.model_copy(update={'seed': derive_seed(seed, size, trial, 1)}))
                best = max(best, accuracy(model, dataset))
                log.debug(f'size {size} trial {trial}: accuracy {best:.4f}')
                if best >= target:
                    break
        tried[size] = best
        return best >= target

    result = CapacityResult(
        epsilon=epsilon, min_params=None, trials_per_size=trials_per_size, variant=variant, total_params=total
    )
    if not passes(total):
        log.warning(f'{variant or dataset.name}: {total} params do not reach accuracy {target:.4f}')
        result.exceeds_architecture = True
        result.largest_failing = total
    elif passes(0):
        result.min_params = 0
    else:
        lo, hi = 0, total
        while hi - lo > 1:
            if over_budget():
                log.warning(f'capacity search stopped by the {budget}s budget at [{lo}, {hi}]')
                result.partial = True
                break
            mid = (lo + hi) // 2
            if passes(mid):
                hi = mid
            else:
                lo = mid
        result.min_params, result.largest_failing = hi, lo

    result.curve = sorted(tried.items())
    log.info(f'{variant or dataset.name} epsilon={epsilon}: min_params {result.min_params} of {total}')
    return result


def feature_symbols(feats: np.ndarray) -> np.ndarray:
    """16-level scalar quantization of pooled-standardized activations.

    Activations are standardized with the mean and std of all entries,
    clipped to ``[-2, 2]`` and split into 16 equal bins.
    """
    feats = np.atleast_2d(np.asarray(feats, dtype=np.float64))
    std = feats.std()
    z = (feats - feats.mean()) / std if std > 0 else np.zeros_like(feats)
    z = np.clip(z, -FEATURE_CLIP, FEATURE_CLIP)
    levels = np.floor((z + FEATURE_CLIP) / (2 * FEATURE_CLIP) * FEATURE_LEVELS).astype(np.int64)
    return np.minimum(levels, FEATURE_LEVELS - 1)


def feature_entropy(feats: np.ndarray, fallback: bool = False) -> Tuple[float, float]:
    """Mean per-example MLE and JVHW entropy of quantized features."""
    symbols = feature_symbols(feats)
    if symbols.shape[0] == 0:
        return math.nan, math.nan

    corrected = entropy_miller_madow if fallback else entropy_jvhw
    hists = [histogram(row) for row in symbols]
    return float(np.mean([entropy_mle(h) for h in hists])), float(np.mean([corrected(h) for h in hists]))


def spearman(points: Sequence[RobustnessPoint]) -> float:
    """Rank correlation of adversarial accuracy and feature entropy, NaN points dropped."""
    pairs = [(p.adv_test_accuracy, p.feature_entropy) for p in points if not math.isnan(p.feature_entropy)]
    if len(pairs) < 3:
        return math.nan

    acc, ent = zip(*pairs)
    return float(spearmanr(acc, ent).statistic)


def _concat(a: Dataset, b: Dataset) -> Dataset:
    return Dataset(
        inputs=np.concatenate([a.inputs, b.inputs]),
        labels=np.concatenate([a.labels, b.labels]),
        num_classes=a.num_classes,
        image_shape=a.image_shape,
        name=f'{a.name}+{b.name}',
    )


def robustness_sweep(
    benign_train: Dataset,
    attack_config: AttackConfig,
    ratios: Sequence[float],
    benign_test: Dataset,
    arch: Sequence[LayerSpec],
    train_config: Optional[TrainConfig] = None,
    seed: int = 0,
    fallback: bool = False,
) -> List[RobustnessPoint]:
    """Adversarial accuracy and feature entropy as adversarial training grows.

    A base model is trained on ``benign_train`` and attacked to produce the
    adversarial training pool, labeled with the ground truth. For the ``i``-th
    ratio ``r`` a fresh model initialized from ``(seed, i)`` is trained on the
    benign set plus the first ``floor(r n)`` adversarial examples, then
    attacked white-box on ``benign_test``. Feature entropy is measured on the
    penultimate activations of the successful adversarial test inputs and is
    NaN when there are none.
    """
    ratios = [float(r) for r in ratios]
    if any(not 0 <= r <= 1 for r in ratios) or ratios != sorted(ratios):
        raise BadValue(f'ratios must be ascending in [0, 1], got {ratios}')

    config = train_config or TrainConfig(seed=seed)
    base, _ = train(mlp_init(arch, seed), benign_train, config)
    adv_train, _ = attack_dataset(base, benign_train, attack_config, seed)

    points = []
    for i, r in enumerate(ratios):
        k = int(math.floor(r * len(benign_train)))
        mixed = _concat(benign_train, adv_train.subset(np.arange(k))) if k > 0 else benign_train
        model, _ = train(mlp_init(arch, derive_seed(seed, i)), mixed, config)

        adv_test, results = attack_dataset(model, benign_test, attack_config, seed)
        successes = [res.adv_input for res in results if res.counted]
        if successes:
            h_mle, h_jvhw = feature_entropy(features(model, np.stack(successes)), fallback=fallback)
        else:
            log.warning(f'ratio {r}: no successful adversarial test inputs, feature entropy is undefined')
            h_mle = h_jvhw = math.nan

        point = RobustnessPoint(
            adv_ratio=r,
            adv_test_accuracy=accuracy(model, adv_test),
            feature_entropy=h_mle,
            feature_entropy_jvhw=h_jvhw,
            n_successful=len(successes),
        )
        log.info(f'ratio {r}: adversarial accuracy {point.adv_test_accuracy:.4f}, feature entropy {h_mle:.4f}')
        points.append(point)

    return points
