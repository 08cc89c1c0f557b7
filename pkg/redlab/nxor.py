"""
Exhaustive simulation of the Boolean equality network with redundant inputs.

The network computes ``y = (x1 == x2)`` with two step units and one step
output. Redundant bits enter both hidden units through weights in
{-1, 0, 1}; every weight setting is checked against all inputs.
"""
import itertools
from collections import Counter
from dataclasses import dataclass, field, replace
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np
import pandas as pd

from redlab.exceptions import BadValue, CombinatorialCapExceeded
from redlab.utils import derive_rng, log as _log

log = _log.getChild('nxor')

WEIGHT_VALUES = (-1, 0, 1)
MAX_REDUNDANT = 16
DEFAULT_CAP = 3**10


def _step(pre, threshold):
    # strict: thresholds sit at .5 offsets so integer inputs never tie
    return (pre > threshold).astype(np.int64)


@dataclass(frozen=True)
class ThresholdNetwork:
    """Two hidden step units over ``(x1, x2, *redundant)`` and one step output.

    ``hidden_weights[i]`` holds the weights of hidden unit ``i`` on
    ``(x1, x2, r1, ..., rn)``. A unit fires iff its pre-activation exceeds its
    threshold.
    """

    hidden_weights: Tuple[Tuple[float, ...], Tuple[float, ...]]
    hidden_thresholds: Tuple[float, float]
    output_weights: Tuple[float, float]
    output_threshold: float

    def __post_init__(self):
        rows = tuple(tuple(float(w) for w in row) for row in self.hidden_weights)
        if len(rows) != 2 or len(rows[0]) != len(rows[1]) or len(rows[0]) < 2:
            raise BadValue('hidden_weights must be two rows of equal length >= 2')
        object.__setattr__(self, 'hidden_weights', rows)
        object.__setattr__(self, 'hidden_thresholds', tuple(float(t) for t in self.hidden_thresholds))
        object.__setattr__(self, 'output_weights', tuple(float(w) for w in self.output_weights))

        # redundant inputs at 0 leave only the core weights in play
        for x1, x2 in itertools.product((0, 1), repeat=2):
            if self.evaluate(x1, x2, *([0] * self.n_redundant)) != int(x1 == x2):
                raise BadValue(f'base network does not compute x1 == x2 at ({x1}, {x2})')

    @property
    def n_redundant(self):
        return len(self.hidden_weights[0]) - 2

    @classmethod
    def from_flat(cls, values: Sequence[float]) -> 'ThresholdNetwork':
        """Base network from ``h1(x1, x2, threshold), h2(x1, x2, threshold), out(h1, h2, threshold)``."""
        if len(values) != 9:
            raise BadValue(f'base weights need 9 numbers, got {len(values)}')
        a, b, t1, c, d, t2, o1, o2, t3 = values
        return cls(((a, b), (c, d)), (t1, t2), (o1, o2), t3)

    def with_redundant_weights(self, w_h1: Sequence[int], w_h2: Sequence[int]) -> 'ThresholdNetwork':
        """Copy with the redundant-input weights replaced; the core weights are kept."""
        if len(w_h1) != len(w_h2):
            raise BadValue('both hidden units need one weight per redundant bit')
        rows = (
            self.hidden_weights[0][:2] + tuple(float(w) for w in w_h1),
            self.hidden_weights[1][:2] + tuple(float(w) for w in w_h2),
        )
        return replace(self, hidden_weights=rows)

    def evaluate_batch(self, inputs: np.ndarray) -> np.ndarray:
        inputs = np.asarray(inputs, dtype=np.float64)
        W = np.asarray(self.hidden_weights)
        h = _step(inputs @ W.T, np.asarray(self.hidden_thresholds))
        return _step(h @ np.asarray(self.output_weights), self.output_threshold)

    def evaluate(self, x1: int, x2: int, *redundant: int) -> int:
        if len(redundant) != self.n_redundant:
            raise BadValue(f'network takes {self.n_redundant} redundant bits, got {len(redundant)}')

        return int(self.evaluate_batch(np.array([[x1, x2, *redundant]]))[0])


@dataclass(frozen=True)
class SuppressionRow:
    w1: int
    w2: int
    adv_count: int
    allowing_edges: int
    potential: int


@dataclass(frozen=True)
class WeightRow:
    """One redundant-weight setting; ``weights`` lists the h1 block then the h2 block."""

    weights: Tuple[int, ...]
    adv_count: int
    allowing_edges: int
    potential: int


@dataclass
class GeneralizedSummary:
    n_redundant: int
    input_space: int
    rows: List[WeightRow] = field(default_factory=list)

    @property
    def n_configs(self):
        return len(self.rows)

    def adv_count_distribution(self) -> Dict[int, int]:
        return dict(sorted(Counter(r.adv_count for r in self.rows).items()))

    def by_potential(self) -> List[dict]:
        """adv_count statistics grouped by total potential."""
        if not self.rows:
            return []
        df = pd.DataFrame([{'potential': r.potential, 'adv_count': r.adv_count} for r in self.rows])
        grouped = df.groupby('potential')['adv_count']
        out = pd.DataFrame(
            {
                'configs': grouped.size(),
                'mean_adv_count': grouped.mean(),
                'min_adv_count': grouped.min(),
                'max_adv_count': grouped.max(),
            }
        ).reset_index()
        return out.to_dict(orient='records')


def canonical_base() -> ThresholdNetwork:
    """h1 = step(x1 + x2 > 1.5), h2 = step(-x1 - x2 > -0.5), y = step(h1 + h2 > 0.5), one redundant bit at weight 0."""
    return ThresholdNetwork(
        hidden_weights=((1, 1, 0), (-1, -1, 0)),
        hidden_thresholds=(1.5, -0.5),
        output_weights=(1, 1),
        output_threshold=0.5,
    )


def _all_inputs(n_redundant):
    return np.array(list(itertools.product((0, 1), repeat=2 + n_redundant)), dtype=np.float64)


def _adv_counts(base: ThresholdNetwork, n_redundant: int, configs: np.ndarray) -> np.ndarray:
    """Mismatch counts against ``x1 == x2`` for every row of ``configs`` (M, 2n)."""
    X = _all_inputs(n_redundant)
    target = (X[:, 0] == X[:, 1]).astype(np.int64)
    core = np.asarray(base.hidden_weights)[:, :2]
    R = X[:, 2:]
    W1, W2 = configs[:, :n_redundant], configs[:, n_redundant:]
    # (inputs, configs)
    pre1 = (X[:, :2] @ core[0])[:, None] + R @ W1.T
    pre2 = (X[:, :2] @ core[1])[:, None] + R @ W2.T
    t1, t2 = base.hidden_thresholds
    o1, o2 = base.output_weights
    y = _step(o1 * _step(pre1, t1) + o2 * _step(pre2, t2), base.output_threshold)
    return (y != target[:, None]).sum(axis=0)


def enumerate_suppression(base: Optional[ThresholdNetwork] = None) -> List[SuppressionRow]:
    """All nine (w1, w2) settings of the single redundant bit, lexicographic order."""
    base = canonical_base() if base is None else base
    summary = generalized_enumerate(1, base)
    return [SuppressionRow(r.weights[0], r.weights[1], r.adv_count, r.allowing_edges, r.potential) for r in summary.rows]


def generalized_enumerate(
    n_redundant: int, base: Optional[ThresholdNetwork] = None, cap: int = DEFAULT_CAP
) -> GeneralizedSummary:
    """Enumerate every weight setting for ``n_redundant`` redundant bits.

    Parameters
    ----------
    n_redundant : int
        0..16. Each bit adds one weight into each hidden unit.
    base : ThresholdNetwork, optional
        Core weights; its own redundant weights are ignored.
    cap : int
        Largest number of settings (``3 ** (2 n)``) to enumerate.

    Raises
    ------
    CombinatorialCapExceeded
        ``3 ** (2 n)`` exceeds ``cap``.
    """
    if not 0 <= n_redundant <= MAX_REDUNDANT:
        raise BadValue(f'n_redundant must be in 0..{MAX_REDUNDANT}, got {n_redundant}')
    n_configs = 3 ** (2 * n_redundant)
    if n_configs > cap:
        raise CombinatorialCapExceeded(f'{n_configs} weight settings for {n_redundant} redundant bits exceed cap {cap}')

    base = canonical_base() if base is None else base
    configs = np.array(list(itertools.product(WEIGHT_VALUES, repeat=2 * n_redundant)), dtype=np.int64)
    configs = configs.reshape(n_configs, 2 * n_redundant)
    counts = _adv_counts(base, n_redundant, configs.astype(np.float64))
    edges = np.count_nonzero(configs, axis=1)
    potential = np.abs(configs.sum(axis=1))

    summary = GeneralizedSummary(n_redundant=n_redundant, input_space=2 ** (2 + n_redundant))
    summary.rows = [
        WeightRow(tuple(int(w) for w in c), int(a), int(e), int(p)) for c, a, e, p in zip(configs, counts, edges, potential)
    ]
    log.debug(f'enumerated {n_configs} settings over {summary.input_space} inputs')
    return summary


def noisy_xor_points(n: int, noise: float = 0.1, seed: int = 0) -> Tuple[np.ndarray, np.ndarray]:
    """Points scattered around the four corners of the unit square, labelled ``x1 == x2``."""
    rng = derive_rng(seed)
    corners = rng.integers(0, 2, size=(n, 2))
    points = corners + rng.normal(0.0, noise, size=(n, 2))
    return points, (corners[:, 0] == corners[:, 1]).astype(np.int64)


def format_table(rows: Sequence) -> str:
    """Aligned text rendering of suppression rows."""
    if not rows:
        return ''

    records = []
    for r in rows:
        if isinstance(r, SuppressionRow):
            records.append(
                {'w1': r.w1, 'w2': r.w2, 'adv_count': r.adv_count, 'edges': r.allowing_edges, 'potential': r.potential}
            )
        else:
            records.append(
                {
                    'weights': ' '.join(f'{w:+d}' for w in r.weights),
                    'adv_count': r.adv_count,
                    'edges': r.allowing_edges,
                    'potential': r.potential,
                }
            )

    return pd.DataFrame(records).to_string(index=False)
