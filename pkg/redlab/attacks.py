"""
Untargeted white-box attacks and Gaussian noise at a fixed SNR.

Success is always judged against the ground-truth label: an attack succeeds
when the model's argmax on the perturbed input differs from it. Success
rates and perturbation norms only count inputs the model classified
correctly before the attack.
"""
import enum
import json
import math
import pathlib
from dataclasses import dataclass
from typing import List, Optional, Sequence, Tuple

import numpy as np
from pydantic import BaseModel, ConfigDict, Field

from redlab.dataio import JEncode
from redlab.exceptions import BadValue, NonFiniteLoss, Unwritable
from redlab.nn import Dataset, MlpModel, grad_input, logit_jacobian, predict
from redlab.utils import derive_rng, log as _log

log = _log.getChild('attacks')

# keeps arctanh finite for pixels at exactly 0 or 1
TANH_SHRINK = 1 - 1e-6
DEEPFOOL_SLACK = 1e-4
CW_CONFIDENCE = 1e-4
CW_C_GROWTH = 10.0


class AttackKind(str, enum.Enum):
    FGSM = 'FGSM'
    DEEPFOOL = 'DeepFool'
    CW_L2 = 'CW-L2'
    GAUSSIAN_SNR = 'GaussianSNR'


class AttackConfig(BaseModel):
    """Hyperparameters of every attack; each kind reads the fields it needs."""

    model_config = ConfigDict(frozen=True)

    kind: AttackKind = AttackKind.FGSM
    epsilon: float = Field(0.25, ge=0)
    max_iter: int = Field(50, ge=1)
    overshoot: float = 0.02
    c: float = Field(1.0, gt=0)
    steps: int = Field(200, ge=0)
    step_size: float = Field(0.01, gt=0)
    c_rounds: int = Field(4, ge=1)
    snr: float = Field(math.inf, gt=0)
    clip: bool = True


@dataclass(frozen=True, eq=False)
class AttackResult:
    adv_input: np.ndarray
    success: bool
    perturbation_l2: float
    perturbation_linf: float
    queries: int
    originally_correct: bool = True

    @property
    def counted(self) -> bool:
        """A success that changed a correct prediction."""
        return self.success and self.originally_correct


def _clip(x, config):
    return np.clip(x, 0.0, 1.0) if config.clip else x


def _result(model, input, adv, label, queries) -> AttackResult:
    delta = adv - input
    return AttackResult(
        adv_input=adv,
        success=bool(predict(model, adv) != label),
        perturbation_l2=float(np.linalg.norm(delta)),
        perturbation_linf=float(np.max(np.abs(delta))) if delta.size else 0.0,
        queries=queries,
        originally_correct=bool(predict(model, input) == label),
    )


def fgsm(model: MlpModel, input, label: int, config: AttackConfig) -> AttackResult:
    """One signed-gradient step of size ``epsilon``."""
    x = np.asarray(input, dtype=np.float64)
    g = grad_input(model, x, label)
    adv = _clip(x + config.epsilon * np.sign(g), config)
    return _result(model, x, adv, label, queries=1)


def _margin(logits, label):
    others = np.delete(logits, label)
    return float(logits[label] - others.max())


def deepfool(model: MlpModel, input, config: AttackConfig, label: Optional[int] = None) -> AttackResult:
    """Multi-class DeepFool against all competing classes.

    Parameters
    ----------
    model : MlpModel
    input : array_like
    config : AttackConfig
        Reads ``max_iter``, ``overshoot`` and ``clip``.
    label : int, optional
        Ground truth; defaults to the model's prediction on ``input``.

    Returns
    -------
    AttackResult
        On non-convergence within ``max_iter`` the iterate with the smallest
        true-class margin is returned with ``success=False``.
    """
    x0 = np.asarray(input, dtype=np.float64)
    if label is None:
        label = int(predict(model, x0))

    r_total = np.zeros_like(x0)
    x = x0.copy()
    best, best_margin = x0, math.inf
    queries = 0
    for _ in range(config.max_iter):
        logits, jac = logit_jacobian(model, x)
        queries += 1
        if int(np.argmax(logits)) != label:
            return _result(model, x0, x, label, queries)

        margin = _margin(logits, label)
        if margin < best_margin:
            best, best_margin = x, margin

        w = jac - jac[label]
        f = logits - logits[label]
        norms = np.linalg.norm(w, axis=1)
        norms[label] = 0.0
        with np.errstate(divide='ignore', invalid='ignore'):
            dist = np.where(norms > 0, np.abs(f) / norms, np.inf)
        k = int(np.argmin(dist))
        if not np.isfinite(dist[k]):
            log.debug('deepfool: all competitor gradients vanished')
            break

        r_total = r_total + (abs(f[k]) + DEEPFOOL_SLACK) / norms[k] ** 2 * w[k]
        x = _clip(x0 + (1 + config.overshoot) * r_total, config)

    logits, _ = logit_jacobian(model, x)
    queries += 1
    if int(np.argmax(logits)) != label or _margin(logits, label) < best_margin:
        best = x

    return _result(model, x0, best, label, queries)


def cw_l2(model: MlpModel, input, label: int, config: AttackConfig) -> AttackResult:
    """Carlini-Wagner L2 with plain gradient descent over a tanh box.

    Minimizes ``||x' - x||^2 + c * max(z_label - max_other z + CW_CONFIDENCE, 0)``
    with ``x' = (tanh(w) + 1) / 2``. Each step moves ``x'`` against the
    objective gradient by a fixed length ``step_size * sqrt(dim)`` that decays
    linearly to zero, then maps it back to ``w``; pixels at exactly 0 or 1
    move as freely as any other. A round without a successful iterate
    restarts from ``x`` with ``c`` multiplied by ``CW_C_GROWTH``, at most
    ``c_rounds`` rounds. The successful iterate with the smallest L2 wins.
    """
    x0 = np.asarray(input, dtype=np.float64)
    if config.steps == 0:
        return _result(model, x0, x0, label, queries=0)
    if predict(model, x0) != label:
        return _result(model, x0, x0, label, queries=1)

    others = np.delete(np.arange(model.output_dim), label)
    scale = config.step_size * math.sqrt(max(x0.size, 1))
    best_success, best_l2 = None, math.inf
    best_attempt, best_margin = x0, math.inf
    queries = 0
    c = config.c
    for attempt in range(config.c_rounds):
        w = np.arctanh((2 * x0 - 1) * TANH_SHRINK)
        for step in range(config.steps + 1):
            x = (np.tanh(w) + 1) / 2
            logits, jac = logit_jacobian(model, x)
            queries += 1
            other = others[int(np.argmax(logits[others]))]
            margin = float(logits[label] - logits[other])
            delta = x - x0
            objective = float(delta @ delta) + c * max(margin + CW_CONFIDENCE, 0.0)
            if not math.isfinite(objective):
                raise NonFiniteLoss(f'cw_l2 objective became {objective} at round {attempt} step {step}')

            if int(np.argmax(logits)) != label:
                l2 = float(np.linalg.norm(delta))
                if l2 < best_l2:
                    best_success, best_l2 = x, l2
            elif margin < best_margin:
                best_attempt, best_margin = x, margin

            if step == config.steps:
                break
            grad_x = 2 * delta
            if margin + CW_CONFIDENCE > 0:
                grad_x = grad_x + c * (jac[label] - jac[other])
            norm = float(np.linalg.norm(grad_x))
            if norm == 0:
                break
            length = scale * (1 - step / config.steps)
            x = np.clip(x - length * grad_x / norm, 0.0, 1.0)
            w = np.arctanh((2 * x - 1) * TANH_SHRINK)

        if best_success is not None:
            break
        log.debug(f'cw_l2: no success at c={c:g}')
        c *= CW_C_GROWTH

    adv = best_success if best_success is not None else best_attempt
    return _result(model, x0, adv, label, queries)


def snr_noise(inputs, snr: float, seed: int) -> np.ndarray:
    """Unclipped noise with per-row variance ``mean(row**2) / snr``."""
    x = np.atleast_2d(np.asarray(inputs, dtype=np.float64))
    if math.isinf(snr):
        return np.zeros_like(x)

    sigma = np.sqrt(np.mean(x**2, axis=1, keepdims=True) / snr)
    return derive_rng(seed).standard_normal(x.shape) * sigma


def gaussian_snr(dataset: Dataset, snr: float, seed: int) -> Dataset:
    """Additive Gaussian noise at signal-to-noise ratio ``snr``, clipped to [0, 1].

    ``snr = inf`` returns ``dataset`` itself.
    """
    if not snr > 0:
        raise BadValue(f'snr must be > 0, got {snr}')
    if math.isinf(snr):
        return dataset
    if len(dataset) == 0:
        return dataset

    noisy = np.clip(dataset.inputs + snr_noise(dataset.inputs, snr, seed), 0.0, 1.0)
    return dataset.with_inputs(noisy, name=f'{dataset.name}+snr{snr:g}')


def run_attack(model: MlpModel, input, label: int, config: AttackConfig, seed: int = 0) -> AttackResult:
    kind = config.kind
    if kind is AttackKind.FGSM:
        return fgsm(model, input, label, config)
    elif kind is AttackKind.DEEPFOOL:
        return deepfool(model, input, config, label=label)
    elif kind is AttackKind.CW_L2:
        return cw_l2(model, input, label, config)

    x = np.asarray(input, dtype=np.float64)
    adv = _clip(x + snr_noise(x, config.snr, seed)[0], config)
    return _result(model, x, adv, label, queries=0)


def attack_dataset(
    model: MlpModel, dataset: Dataset, config: AttackConfig, seed: int = 0
) -> Tuple[Dataset, List[AttackResult]]:
    """Attack every example; returns the adversarial dataset and per-example results."""
    if config.kind is AttackKind.GAUSSIAN_SNR:
        noisy = gaussian_snr(dataset, config.snr, seed)
        results = [_result(model, x, a, y, 0) for x, a, y in zip(dataset.inputs, noisy.inputs, dataset.labels)]
        return noisy, results

    results = [run_attack(model, x, int(y), config) for x, y in zip(dataset.inputs, dataset.labels)]
    adv = np.stack([r.adv_input for r in results]) if results else dataset.inputs
    rate = success_rate(results)
    log.info(f'{config.kind.value} on {dataset.name or "dataset"}: {len(results)} examples, success rate {rate:.3f}')
    return dataset.with_inputs(adv, name=f'{dataset.name}+{config.kind.value}'), results


def adversarial_training_set(
    model: MlpModel, dataset: Dataset, config: AttackConfig, seed: int = 0
) -> Tuple[Dataset, List[AttackResult]]:
    """Adversarial copy of ``dataset`` labeled with the attacked model's predictions.

    Capacity and fitting-speed experiments train on the adversarial inputs
    paired with the labels the attack produced, so a failed attack keeps its
    true label and a successful one carries the wrong class it was pushed to.
    """
    adv, results = attack_dataset(model, dataset, config, seed)
    labels = predict(model, adv.inputs) if len(adv) else adv.labels
    relabeled = Dataset(
        inputs=adv.inputs,
        labels=labels,
        num_classes=dataset.num_classes,
        image_shape=dataset.image_shape,
        name=adv.name,
    )
    return relabeled, results


def success_rate(results: Sequence[AttackResult]) -> float:
    """Share of originally correct inputs the attack flipped; NaN when there are none."""
    flips = [r.success for r in results if r.originally_correct]
    return float(np.mean(flips)) if flips else math.nan


def perturbation_norms(results: Sequence[AttackResult]) -> np.ndarray:
    """L2 norms of the counted successes."""
    return np.array([r.perturbation_l2 for r in results if r.counted], dtype=np.float64)


def transfer_rate(results: Sequence[AttackResult], target_model: MlpModel, dataset: Dataset) -> float:
    """Fraction of adversarial inputs misclassified by ``target_model``."""
    if not results:
        return math.nan

    adv = np.stack([r.adv_input for r in results])
    return float(np.mean(predict(target_model, adv) != dataset.labels[: len(results)]))


def _summary(values):
    if not values:
        return None, None

    return float(np.mean(values)), float(np.median(values))


def write_sidecar(path, config: AttackConfig, seed: int, results: Sequence[AttackResult]) -> pathlib.Path:
    """JSON record of an attack run next to the adversarial dataset."""
    l2 = perturbation_norms(results).tolist()
    linf = [r.perturbation_linf for r in results if r.counted]
    settings = config.model_dump(mode='json')
    if math.isinf(config.snr):
        settings['snr'] = 'inf'
    if config.kind is AttackKind.CW_L2:
        settings['optimizer'] = 'gradient-descent'

    doc = {
        'config': settings,
        'seed': seed,
        'n': len(results),
        'n_correct': sum(r.originally_correct for r in results),
        'success_rate': success_rate(results) if results else None,
        'l2_mean': _summary(l2)[0],
        'l2_median': _summary(l2)[1],
        'linf_mean': _summary(linf)[0],
        'linf_median': _summary(linf)[1],
        'queries': int(sum(r.queries for r in results)),
        'examples': [
            {
                'success': r.success,
                'originally_correct': r.originally_correct,
                'perturbation_l2': r.perturbation_l2,
                'perturbation_linf': r.perturbation_linf,
                'queries': r.queries,
            }
            for r in results
        ],
    }
    path = pathlib.Path(path)
    try:
        path.write_text(json.dumps(doc, cls=JEncode, indent=2) + '\n', encoding='utf-8')
    except OSError as e:
        raise Unwritable(f'cannot write sidecar {path}: {e}') from e

    return path
