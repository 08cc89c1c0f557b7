"""
Dense feed-forward networks with exact backpropagation.

Parameter layout
----------------
``MlpModel.params`` is one flat float64 vector. For each layer in order it holds
the weight matrix of shape ``(input_dim, output_dim)`` in row-major order,
followed by the ``output_dim`` biases. A layer computes ``z = a @ W + b``.

Weights are initialized uniformly in ``[-sqrt(6 / (fan_in + fan_out)), +...]``
and biases start at zero. Training is plain mini-batch SGD on the softmax
cross-entropy with an epoch-wise permutation drawn from a generator derived
from ``(seed, epoch)``.
"""
import enum
import pathlib
import struct
from dataclasses import dataclass, field, replace
from typing import List, Literal, Optional, Sequence, Tuple

import numpy as np
from pydantic import BaseModel, ConfigDict, Field
from scipy.special import log_softmax, softmax

from redlab.exceptions import BadMagic, BadValue, DimensionMismatch, EmptyInput, NonFiniteLoss, TruncatedPayload
from redlab.utils import derive_rng, log

log = log.getChild('nn')

MODEL_MAGIC = b'RLAB'
MODEL_VERSION = 1


class Activation(str, enum.Enum):
    RELU = 'relu'
    IDENTITY = 'identity'
    SOFTMAX = 'softmax'


ACTIVATION_CODES = {Activation.RELU: 0, Activation.IDENTITY: 1, Activation.SOFTMAX: 2}
ACTIVATION_FROM_CODE = {v: k for k, v in ACTIVATION_CODES.items()}


@dataclass(frozen=True)
class LayerSpec:
    input_dim: int
    output_dim: int
    activation: Activation = Activation.RELU

    def __post_init__(self):
        if self.input_dim < 1 or self.output_dim < 1:
            raise BadValue(f'layer dims must be >= 1, got {self.input_dim}->{self.output_dim}')

        object.__setattr__(self, 'activation', Activation(self.activation))

    @property
    def n_params(self):
        return self.input_dim * self.output_dim + self.output_dim


def param_count(layers: Sequence[LayerSpec]) -> int:
    return sum(layer.n_params for layer in layers)


def _check_chain(layers):
    if not layers:
        raise BadValue('a model needs at least one layer')

    for i, (a, b) in enumerate(zip(layers, layers[1:])):
        if a.output_dim != b.input_dim:
            raise DimensionMismatch(f'layer {i} outputs {a.output_dim} but layer {i + 1} expects {b.input_dim}')

    for i, layer in enumerate(layers[:-1]):
        if layer.activation is Activation.SOFTMAX:
            raise BadValue(f'softmax is only permitted on the final layer, found on layer {i}')


def _readonly(array, dtype):
    out = np.array(array, dtype=dtype, copy=True)
    out.flags.writeable = False
    return out


@dataclass(frozen=True, eq=False)
class Dataset:
    """Labeled examples, one row of ``inputs`` per example.

    ``image_shape`` records how a row unflattens into an image, ``(H, W)`` for
    grayscale or ``(C, H, W)`` for channel-planar color. It is ``None`` for
    non-image data.
    """

    inputs: np.ndarray
    labels: np.ndarray
    num_classes: int
    image_shape: Optional[Tuple[int, ...]] = None
    name: str = ''

    def __post_init__(self):
        inputs = np.asarray(self.inputs, dtype=np.float64)
        if inputs.ndim == 1:
            inputs = inputs.reshape(-1, 1)
        if inputs.ndim != 2:
            raise DimensionMismatch(f'inputs must be (n, d), got shape {inputs.shape}')

        labels = np.asarray(self.labels, dtype=np.int64).reshape(-1)
        if labels.shape[0] != inputs.shape[0]:
            raise DimensionMismatch(f'{inputs.shape[0]} inputs but {labels.shape[0]} labels')
        if self.num_classes < 1:
            raise BadValue(f'num_classes must be >= 1, got {self.num_classes}')
        if labels.size and (labels.min() < 0 or labels.max() >= self.num_classes):
            raise BadValue(f'labels must lie in [0, {self.num_classes}), got [{labels.min()}, {labels.max()}]')
        if not np.all(np.isfinite(inputs)):
            raise BadValue('inputs contain nan or inf')
        if self.image_shape is not None and int(np.prod(self.image_shape)) != inputs.shape[1]:
            raise DimensionMismatch(f'image_shape {self.image_shape} does not match input dim {inputs.shape[1]}')

        object.__setattr__(self, 'inputs', _readonly(inputs, np.float64))
        object.__setattr__(self, 'labels', _readonly(labels, np.int64))
        if self.image_shape is not None:
            object.__setattr__(self, 'image_shape', tuple(int(s) for s in self.image_shape))

    def __len__(self):
        return self.inputs.shape[0]

    @property
    def dim(self):
        return self.inputs.shape[1]

    def subset(self, indices) -> 'Dataset':
        indices = np.asarray(indices, dtype=np.int64)
        return replace(self, inputs=self.inputs[indices], labels=self.labels[indices])

    def with_inputs(self, inputs, name=None) -> 'Dataset':
        return replace(self, inputs=inputs, name=self.name if name is None else name)

    def class_frequencies(self) -> np.ndarray:
        return np.bincount(self.labels, minlength=self.num_classes) / max(len(self), 1)

    def images(self) -> np.ndarray:
        if self.image_shape is None:
            raise BadValue(f'dataset {self.name!r} has no image shape')

        return self.inputs.reshape((len(self),) + self.image_shape)


@dataclass(frozen=True)
class MlpModel:
    """Immutable dense network; training returns a new instance.

    ``mask``, when set, marks trainable entries of ``params`` (True) and
    pins the rest at exactly zero.
    """

    layers: Tuple[LayerSpec, ...]
    params: np.ndarray
    seed: int = 0
    mask: Optional[np.ndarray] = field(default=None, compare=False)

    def __post_init__(self):
        layers = tuple(self.layers)
        _check_chain(layers)
        params = np.asarray(self.params, dtype=np.float64).reshape(-1)
        expected = param_count(layers)
        if params.shape[0] != expected:
            raise DimensionMismatch(f'params has length {params.shape[0]}, layers need {expected}')
        if not np.all(np.isfinite(params)):
            raise NonFiniteLoss('model parameters contain nan or inf')

        object.__setattr__(self, 'layers', layers)
        object.__setattr__(self, 'params', _readonly(params, np.float64))
        if self.mask is not None:
            mask = np.asarray(self.mask, dtype=bool).reshape(-1)
            if mask.shape[0] != expected:
                raise DimensionMismatch(f'mask has length {mask.shape[0]}, layers need {expected}')
            object.__setattr__(self, 'mask', _readonly(mask, bool))

    @property
    def input_dim(self):
        return self.layers[0].input_dim

    @property
    def output_dim(self):
        return self.layers[-1].output_dim

    @property
    def n_params(self):
        return self.params.shape[0]

    def unpack(self) -> List[Tuple[np.ndarray, np.ndarray]]:
        return _unpack(self.layers, self.params)

    def with_params(self, params) -> 'MlpModel':
        return replace(self, params=params)

    def __eq__(self, other):
        if not isinstance(other, MlpModel):
            return NotImplemented

        return (
            self.layers == other.layers
            and self.seed == other.seed
            and np.array_equal(self.params, other.params)
            and _mask_equal(self.mask, other.mask)
        )


def _mask_equal(a, b):
    if a is None or b is None:
        return a is None and b is None

    return np.array_equal(a, b)


def _unpack(layers, params):
    out = []
    offset = 0
    for layer in layers:
        n_w = layer.input_dim * layer.output_dim
        W = params[offset : offset + n_w].reshape(layer.input_dim, layer.output_dim)
        offset += n_w
        b = params[offset : offset + layer.output_dim]
        offset += layer.output_dim
        out.append((W, b))

    return out


def mlp_arch(input_dim, hidden, num_classes, linear=False) -> List[LayerSpec]:
    """One hidden layer; ``linear`` swaps ReLU for Identity."""
    hidden_act = Activation.IDENTITY if linear else Activation.RELU
    return [LayerSpec(input_dim, hidden, hidden_act), LayerSpec(hidden, num_classes, Activation.SOFTMAX)]


def mlp_init(spec: Sequence[LayerSpec], seed: int) -> MlpModel:
    layers = tuple(spec)
    _check_chain(layers)
    rng = derive_rng(seed)
    chunks = []
    for layer in layers:
        limit = np.sqrt(6.0 / (layer.input_dim + layer.output_dim))
        chunks.append(rng.uniform(-limit, limit, size=layer.input_dim * layer.output_dim))
        chunks.append(np.zeros(layer.output_dim))

    return MlpModel(layers=layers, params=np.concatenate(chunks), seed=seed)


def _as_batch(model_or_layers, inputs):
    layers = model_or_layers.layers if isinstance(model_or_layers, MlpModel) else model_or_layers
    x = np.asarray(inputs, dtype=np.float64)
    single = x.ndim == 1
    if single:
        x = x[None, :]
    if x.ndim != 2 or x.shape[1] != layers[0].input_dim:
        raise DimensionMismatch(f'input has shape {np.shape(inputs)}, model expects dim {layers[0].input_dim}')

    return x, single


def _forward_raw(layers, params, x):
    activations = [x]
    a = x
    z = x
    for layer, (W, b) in zip(layers, _unpack(layers, params)):
        z = a @ W + b
        if layer.activation is Activation.RELU:
            a = np.maximum(z, 0.0)
        elif layer.activation is Activation.SOFTMAX:
            a = softmax(z, axis=-1)
        else:
            a = z
        activations.append(a)

    return z, activations


def _backward_raw(layers, params, activations, grad_logits, want_params=True):
    """Propagate ``grad_logits`` (dLoss/dz of the last layer) back to the input.

    ``grad_logits`` may have more rows than ``activations`` when a single input
    is differentiated against several output directions at once (Jacobians).
    """
    weights = _unpack(layers, params)
    delta = grad_logits
    grads = [None] * len(layers)
    for i in reversed(range(len(layers))):
        W, _ = weights[i]
        if want_params:
            grads[i] = ((activations[i].T @ delta).ravel(), delta.sum(axis=0))
        delta = delta @ W.T
        if i > 0 and layers[i - 1].activation is Activation.RELU:
            delta = delta * (activations[i] > 0)

    flat = np.concatenate([np.concatenate(g) for g in grads]) if want_params else None
    return flat, delta


def forward(model: MlpModel, input) -> Tuple[np.ndarray, List[np.ndarray]]:
    """Logits and per-layer activations.

    ``activations[0]`` is the input, ``activations[i]`` the output of layer
    ``i - 1``; ``activations[-2]`` are the penultimate features T(x) and
    ``activations[-1]`` the output layer after its activation. A 1-d input gives
    1-d results, a 2-d batch keeps its leading axis.
    """
    x, single = _as_batch(model, input)
    logits, activations = _forward_raw(model.layers, model.params, x)
    if single:
        return logits[0], [a[0] for a in activations]

    return logits, activations


def predict(model: MlpModel, inputs) -> np.ndarray:
    x, single = _as_batch(model, inputs)
    logits, _ = _forward_raw(model.layers, model.params, x)
    labels = np.argmax(logits, axis=1)
    return labels[0] if single else labels


def features(model: MlpModel, inputs) -> np.ndarray:
    x, _ = _as_batch(model, inputs)
    _, activations = _forward_raw(model.layers, model.params, x)
    return activations[-2]


def _cross_entropy(logits, labels):
    logp = log_softmax(logits, axis=1)
    n = logits.shape[0]
    loss = -logp[np.arange(n), labels].mean()
    grad = np.exp(logp)
    grad[np.arange(n), labels] -= 1.0
    return loss, grad / n


def _check_labels(model, labels):
    labels = np.asarray(labels, dtype=np.int64).reshape(-1)
    if labels.size and (labels.min() < 0 or labels.max() >= model.output_dim):
        raise BadValue(f'labels must lie in [0, {model.output_dim})')

    return labels


def param_gradient(model: MlpModel, inputs, labels) -> Tuple[float, np.ndarray]:
    """Mean cross-entropy over the batch and its gradient w.r.t. ``params``."""
    x, _ = _as_batch(model, inputs)
    labels = _check_labels(model, labels)
    logits, activations = _forward_raw(model.layers, model.params, x)
    loss, grad_logits = _cross_entropy(logits, labels)
    grad, _ = _backward_raw(model.layers, model.params, activations, grad_logits)
    return float(loss), grad


def loss(model: MlpModel, inputs, labels) -> float:
    x, _ = _as_batch(model, inputs)
    labels = _check_labels(model, labels)
    logits, _ = _forward_raw(model.layers, model.params, x)
    return float(_cross_entropy(logits, labels)[0])


def grad_input(model: MlpModel, input, label) -> np.ndarray:
    """Exact gradient of the cross-entropy loss w.r.t. one input vector."""
    x, _ = _as_batch(model, input)
    labels = _check_labels(model, [label])
    logits, activations = _forward_raw(model.layers, model.params, x)
    _, grad_logits = _cross_entropy(logits, labels)
    _, dx = _backward_raw(model.layers, model.params, activations, grad_logits, want_params=False)
    return dx[0]


def logit_jacobian(model: MlpModel, input) -> Tuple[np.ndarray, np.ndarray]:
    """Logits and the ``(C, d)`` Jacobian of the logits w.r.t. one input."""
    x, _ = _as_batch(model, input)
    logits, activations = _forward_raw(model.layers, model.params, x)
    eye = np.eye(model.output_dim)
    _, jac = _backward_raw(model.layers, model.params, activations, eye, want_params=False)
    return logits[0], jac


class TrainConfig(BaseModel):
    model_config = ConfigDict(frozen=True)

    learning_rate: float = Field(0.1, ge=0)
    batch_size: int = Field(32, ge=1)
    max_epochs: int = Field(30, ge=0)
    seed: int = Field(0, ge=0, lt=2**64)
    loss: Literal['cross-entropy'] = 'cross-entropy'
    # stop once training accuracy reaches this
    target_accuracy: Optional[float] = Field(None, gt=0, le=1)


@dataclass
class TrainCurve:
    train_accuracy: List[float] = field(default_factory=list)
    loss: List[float] = field(default_factory=list)
    test_accuracy: List[float] = field(default_factory=list)

    def __len__(self):
        return len(self.train_accuracy)

    def records(self):
        for i, (acc, l) in enumerate(zip(self.train_accuracy, self.loss)):
            row = {'epoch': i + 1, 'train_accuracy': acc, 'loss': l}
            if self.test_accuracy:
                row['test_accuracy'] = self.test_accuracy[i]
            yield row


def epochs_to_accuracy(curve: TrainCurve, target: float) -> Optional[int]:
    """1-based epoch at which training accuracy first reaches ``target``."""
    for i, acc in enumerate(curve.train_accuracy):
        if acc >= target:
            return i + 1

    return None


def _accuracy_raw(layers, params, dataset):
    logits, _ = _forward_raw(layers, params, dataset.inputs)
    return float(np.mean(np.argmax(logits, axis=1) == dataset.labels))


def accuracy(model: MlpModel, dataset: Dataset) -> float:
    if len(dataset) == 0:
        raise EmptyInput('accuracy of an empty dataset is undefined')

    _as_batch(model, dataset.inputs[:1])
    return _accuracy_raw(model.layers, model.params, dataset)


def train(
    model: MlpModel, dataset: Dataset, config: TrainConfig, eval_dataset: Optional[Dataset] = None
) -> Tuple[MlpModel, TrainCurve]:
    """Mini-batch SGD on the softmax cross-entropy.

    Returns the trained model and the per-epoch curve. Masked parameters of
    ``model`` receive no updates and stay exactly zero.

    Raises
    ------
    EmptyInput
        ``dataset`` has no examples.
    NonFiniteLoss
        A batch produced a nan/inf loss or gradient.
    """
    if len(dataset) == 0:
        raise EmptyInput('cannot train on an empty dataset')

    _as_batch(model, dataset.inputs[:1])
    _check_labels(model, dataset.labels)
    layers = model.layers
    params = np.array(model.params, copy=True)
    gate = None if model.mask is None else model.mask.astype(np.float64)
    n = len(dataset)
    curve = TrainCurve()

    for epoch in range(config.max_epochs):
        order = derive_rng(config.seed, epoch).permutation(n)
        for batch, start in enumerate(range(0, n, config.batch_size)):
            idx = order[start : start + config.batch_size]
            logits, activations = _forward_raw(layers, params, dataset.inputs[idx])
            batch_loss, grad_logits = _cross_entropy(logits, dataset.labels[idx])
            grad, _ = _backward_raw(layers, params, activations, grad_logits)
            if not np.isfinite(batch_loss) or not np.all(np.isfinite(grad)):
                raise NonFiniteLoss(
                    f'non-finite loss {batch_loss} at epoch {epoch + 1} batch {batch + 1} '
                    f'(learning_rate={config.learning_rate}, batch_size={config.batch_size})'
                )
            if gate is not None:
                grad *= gate
            params -= config.learning_rate * grad

        if not np.all(np.isfinite(params)):
            raise NonFiniteLoss(f'parameters diverged at epoch {epoch + 1} (learning_rate={config.learning_rate})')

        logits, _ = _forward_raw(layers, params, dataset.inputs)
        epoch_loss, _ = _cross_entropy(logits, dataset.labels)
        train_acc = float(np.mean(np.argmax(logits, axis=1) == dataset.labels))
        curve.train_accuracy.append(train_acc)
        curve.loss.append(float(epoch_loss))
        if eval_dataset is not None:
            curve.test_accuracy.append(_accuracy_raw(layers, params, eval_dataset))
        log.debug(f'epoch {epoch + 1}: loss {epoch_loss:.6f} train accuracy {train_acc:.4f}')

        if config.target_accuracy is not None and train_acc >= config.target_accuracy:
            break

    return model.with_params(params), curve


def dump_model(model: MlpModel, path) -> None:
    """Write the RLAB container.

    Layout: ``RLAB``, version u32, layer count u32, seed u64, mask flag u32,
    then ``(input_dim, output_dim, activation code)`` u32 triples, the params as
    little-endian float64 and, when the flag is set, one byte per param of mask.
    """
    has_mask = model.mask is not None
    parts = [struct.pack('<4sIIQI', MODEL_MAGIC, MODEL_VERSION, len(model.layers), model.seed, int(has_mask))]
    for layer in model.layers:
        parts.append(struct.pack('<III', layer.input_dim, layer.output_dim, ACTIVATION_CODES[layer.activation]))
    parts.append(model.params.astype('<f8').tobytes())
    if has_mask:
        parts.append(model.mask.astype(np.uint8).tobytes())

    pathlib.Path(path).write_bytes(b''.join(parts))


def load_model(path) -> MlpModel:
    data = pathlib.Path(path).read_bytes()
    head = struct.calcsize('<4sIIQI')
    if len(data) < head:
        raise TruncatedPayload('model header is truncated', offset=len(data))

    magic, version, n_layers, seed, has_mask = struct.unpack_from('<4sIIQI', data, 0)
    if magic != MODEL_MAGIC:
        raise BadMagic(f'expected {MODEL_MAGIC!r}, got {magic!r}', offset=0)
    if version != MODEL_VERSION:
        raise BadMagic(f'unsupported model container version {version}', offset=4)

    offset = head
    layers = []
    for _ in range(n_layers):
        if len(data) < offset + 12:
            raise TruncatedPayload('layer table is truncated', offset=offset)
        d_in, d_out, code = struct.unpack_from('<III', data, offset)
        if code not in ACTIVATION_FROM_CODE:
            raise BadMagic(f'unknown activation code {code}', offset=offset + 8)
        layers.append(LayerSpec(d_in, d_out, ACTIVATION_FROM_CODE[code]))
        offset += 12

    n = param_count(layers)
    end = offset + 8 * n + (n if has_mask else 0)
    if len(data) < end:
        raise TruncatedPayload(f'expected {end} bytes, file has {len(data)}', offset=len(data))

    params = np.frombuffer(data, dtype='<f8', count=n, offset=offset).astype(np.float64)
    mask = None
    if has_mask:
        mask = np.frombuffer(data, dtype=np.uint8, count=n, offset=offset + 8 * n).astype(bool)

    return MlpModel(layers=tuple(layers), params=params, seed=seed, mask=mask)
