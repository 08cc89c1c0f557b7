"""
Exact information theory on finite joint distributions.

A feature map is a partition of the x-support; it is sufficient for Y when it
keeps all of I(X;Y). The minimal sufficient partition groups symbols with
equal conditionals p(y|x). A sufficient feature that carries more entropy
than the minimal one is redundant, and any consistent set of adversarial
points lets the redundancy be squeezed out by remapping them onto a benign
anchor.
"""
import functools
import json
import math
import pathlib
from dataclasses import dataclass, field, replace
from fractions import Fraction
from typing import Dict, FrozenSet, Iterator, List, Optional, Sequence, Tuple, Union

import numpy as np
from pydantic import BaseModel, ValidationError
from scipy.special import entr, rel_entr

from redlab.exceptions import BadValue, InvalidAdversarialSpec, NotSufficient, ParseError
from redlab.utils import derive_rng, derive_seed, log as _log

log = _log.getChild('infotheory')

LN2 = math.log(2)
CONDITIONAL_TOL = 1e-9
JOINT_SUM_TOL = 1e-12
EXHAUSTIVE_LIMIT = 10
PARTITION_CHUNK = 16384


@dataclass(frozen=True, eq=False)
class DiscreteSystem:
    """Finite joint distribution ``joint[x, y]`` over named supports.

    ``rational`` optionally holds the exact entries when they were given as
    fractions; the exact conditional comparison uses it.
    """

    x_support: Tuple[str, ...]
    y_support: Tuple[str, ...]
    joint: np.ndarray
    rational: Optional[Tuple[Tuple[Fraction, ...], ...]] = field(default=None, repr=False)

    def __post_init__(self):
        joint = np.array(self.joint, dtype=np.float64)
        shape = (len(self.x_support), len(self.y_support))
        if joint.shape != shape:
            raise BadValue(f'joint has shape {joint.shape}, supports give {shape}')
        if len(set(self.x_support)) != shape[0] or len(set(self.y_support)) != shape[1]:
            raise BadValue('support symbols must be unique')
        if np.any(joint < 0) or not np.all(np.isfinite(joint)):
            raise BadValue('joint probabilities must be finite and >= 0')
        if abs(joint.sum() - 1) > JOINT_SUM_TOL:
            raise BadValue(f'joint sums to {joint.sum():.15g}, not 1')
        if np.any(joint.sum(axis=1) <= 0) or np.any(joint.sum(axis=0) <= 0):
            raise BadValue('every declared x and y symbol needs positive marginal mass')

        joint.flags.writeable = False
        object.__setattr__(self, 'joint', joint)
        object.__setattr__(self, 'x_support', tuple(self.x_support))
        object.__setattr__(self, 'y_support', tuple(self.y_support))

    @property
    def n_x(self):
        return self.joint.shape[0]

    @property
    def n_y(self):
        return self.joint.shape[1]

    def p_x(self) -> np.ndarray:
        return self.joint.sum(axis=1)

    def p_y(self) -> np.ndarray:
        return self.joint.sum(axis=0)

    def conditionals(self) -> np.ndarray:
        """``p(y|x)``, one row per x."""
        return self.joint / self.p_x()[:, None]

    def exact_conditionals(self) -> List[Tuple[Fraction, ...]]:
        rows = self.rational
        if rows is None:
            # shortest decimal that round-trips each float
            rows = [tuple(Fraction(repr(float(v))) for v in row) for row in self.joint]

        out = []
        for row in rows:
            total = sum(row)
            out.append(tuple(v / total for v in row))
        return out

    def ground_truth(self) -> Tuple[int, ...]:
        """Bayes label ``argmax_y p(y|x)`` per x, lowest index on ties."""
        return tuple(int(i) for i in np.argmax(self.joint, axis=1))


@dataclass(frozen=True)
class FeatureMap:
    """``labels[x]`` is the feature symbol of x; equal labels share a cell."""

    labels: Tuple[int, ...]

    def __post_init__(self):
        object.__setattr__(self, 'labels', tuple(int(v) for v in self.labels))

    @classmethod
    def identity(cls, n: int) -> 'FeatureMap':
        return cls(tuple(range(n)))

    def canonical(self) -> Tuple[int, ...]:
        """Relabel by first appearance, so equal partitions compare equal."""
        seen: Dict[int, int] = {}
        return tuple(seen.setdefault(v, len(seen)) for v in self.labels)

    def cells(self) -> List[Tuple[int, ...]]:
        groups: Dict[int, List[int]] = {}
        for x, t in enumerate(self.labels):
            groups.setdefault(t, []).append(x)
        return [tuple(g) for g in groups.values()]

    def same_partition(self, other: 'FeatureMap') -> bool:
        return self.canonical() == other.canonical()

    def refines(self, other: 'FeatureMap') -> bool:
        """Every cell of ``self`` lies inside one cell of ``other``."""
        return all(len({other.labels[x] for x in cell}) == 1 for cell in self.cells())

    def __call__(self, x: int) -> int:
        return self.labels[x]


@dataclass(frozen=True)
class DecisionMap:
    labels: Dict[int, int]

    def __call__(self, t: int) -> int:
        return self.labels[t]


@dataclass(frozen=True)
class AdversarialSpec:
    adv_set: FrozenSet[int]
    anchor: int
    ground_truth: Tuple[int, ...]

    def __post_init__(self):
        object.__setattr__(self, 'adv_set', frozenset(int(a) for a in self.adv_set))
        object.__setattr__(self, 'ground_truth', tuple(int(v) for v in self.ground_truth))


@dataclass(frozen=True)
class NecessityReport:
    entropy_t: float
    entropy_t_prime: float
    entropy_gap: float
    redundancy: float
    mi_drop: float
    entropy_decreased: bool
    redundant: bool
    not_minimal: bool
    minimal_confirmed: Optional[bool] = None

    @property
    def all_hold(self):
        return self.entropy_decreased and self.redundant and self.not_minimal


@dataclass
class TrialSummary:
    reports: List[NecessityReport]

    @property
    def n_trials(self):
        return len(self.reports)

    def count(self, name: str) -> int:
        return sum(bool(getattr(r, name)) for r in self.reports)

    @property
    def all_hold(self):
        return sum(r.all_hold for r in self.reports)


def _entropy_bits(p: np.ndarray) -> float:
    return float(entr(p).sum() / LN2)


def _check_feature(system: DiscreteSystem, feature: FeatureMap):
    if len(feature.labels) != system.n_x:
        raise BadValue(f'feature map covers {len(feature.labels)} symbols, system has {system.n_x}')


def pushforward(system: DiscreteSystem, feature: Optional[FeatureMap] = None) -> np.ndarray:
    """Joint of ``(T(X), Y)``; rows follow the canonical cell order."""
    if feature is None:
        return system.joint

    _check_feature(system, feature)
    labels = np.asarray(feature.canonical())
    out = np.zeros((labels.max() + 1, system.n_y))
    np.add.at(out, labels, system.joint)
    return out


def mutual_information(system: DiscreteSystem, feature: Optional[FeatureMap] = None) -> float:
    """``I(T(X); Y)`` in bits; ``feature=None`` is the identity."""
    joint = pushforward(system, feature)
    product = joint.sum(axis=1)[:, None] * joint.sum(axis=0)[None, :]
    return float(max(rel_entr(joint, product).sum() / LN2, 0.0))


def entropy_of_partition(system: DiscreteSystem, feature: Optional[FeatureMap] = None) -> float:
    """``H(T(X))`` in bits."""
    return _entropy_bits(pushforward(system, feature).sum(axis=1))


def mi_gap(system: DiscreteSystem, feature: FeatureMap) -> float:
    return mutual_information(system) - mutual_information(system, feature)


def is_sufficient(system: DiscreteSystem, feature: FeatureMap, tol: float = CONDITIONAL_TOL) -> bool:
    return mi_gap(system, feature) <= tol


def minimal_sufficient_partition(
    system: DiscreteSystem, tol: float = CONDITIONAL_TOL, exact: bool = False
) -> FeatureMap:
    """Group x-symbols whose conditionals ``p(y|x)`` agree.

    Parameters
    ----------
    tol : float
        Largest absolute difference between two conditionals still counted
        as equal. Ignored when ``exact``.
    exact : bool
        Compare conditionals as exact rationals.
    """
    if exact:
        rows = system.exact_conditionals()

        def same(a, b):
            return rows[a] == rows[b]

    else:
        cond = system.conditionals()

        def same(a, b):
            return bool(np.max(np.abs(cond[a] - cond[b])) <= tol)

    representatives: List[int] = []
    labels = []
    for x in range(system.n_x):
        for t, rep in enumerate(representatives):
            if same(x, rep):
                labels.append(t)
                break
        else:
            labels.append(len(representatives))
            representatives.append(x)

    return FeatureMap(tuple(labels))


def redundancy(system: DiscreteSystem, feature: FeatureMap, tol: float = CONDITIONAL_TOL, exact: bool = False) -> float:
    """``H(T(X)) - H(T_min(X))`` for a sufficient feature.

    Raises
    ------
    NotSufficient
        ``feature`` loses information about Y; carries the MI gap.
    """
    gap = mi_gap(system, feature)
    if gap > tol:
        raise NotSufficient(gap)

    minimal = minimal_sufficient_partition(system, tol=tol, exact=exact)
    return max(entropy_of_partition(system, feature) - entropy_of_partition(system, minimal), 0.0)


def enumerate_partitions(n: int) -> Iterator[Tuple[int, ...]]:
    """All set partitions of ``range(n)`` as restricted-growth strings (Bell(n) of them)."""
    if n == 0:
        yield ()
        return

    rgs = [0] * n
    maxima = [0] * n
    while True:
        yield tuple(rgs)
        i = n - 1
        while i > 0 and rgs[i] > maxima[i - 1]:
            i -= 1
        if i == 0:
            return
        rgs[i] += 1
        maxima[i] = max(maxima[i - 1], rgs[i])
        for j in range(i + 1, n):
            rgs[j] = 0
            maxima[j] = maxima[i]


@functools.lru_cache(maxsize=None)
def partition_table(n: int) -> np.ndarray:
    """Every restricted-growth string of length ``n``, one row each, read-only."""
    table = np.array(list(enumerate_partitions(n)), dtype=np.int8).reshape(-1, n)
    table.flags.writeable = False
    return table


def exhaustive_minimal_entropy(system: DiscreteSystem, tol: float = CONDITIONAL_TOL) -> float:
    """Smallest ``H(T(X))`` over every sufficient partition, by brute force.

    All Bell(|X|) partitions are scored, ``PARTITION_CHUNK`` rows at a time.
    """
    n = system.n_x
    full = mutual_information(system)
    p_y = system.p_y()
    cells = np.arange(n)
    best = math.inf
    table = partition_table(n)
    for start in range(0, table.shape[0], PARTITION_CHUNK):
        chunk = table[start : start + PARTITION_CHUNK]
        onehot = (chunk[:, :, None] == cells).astype(np.float64)
        joint = np.einsum('pxt,xy->pty', onehot, system.joint)
        p_t = joint.sum(axis=2)
        mi = rel_entr(joint, p_t[:, :, None] * p_y).sum(axis=(1, 2)) / LN2
        sufficient = full - np.maximum(mi, 0.0) <= tol
        if sufficient.any():
            best = min(best, float((entr(p_t[sufficient]).sum(axis=1) / LN2).min()))

    return best


def validate_adversarial_spec(
    system: DiscreteSystem, feature: FeatureMap, decision: DecisionMap, adv: AdversarialSpec
) -> None:
    _check_feature(system, feature)
    if len(adv.ground_truth) != system.n_x:
        raise InvalidAdversarialSpec(f'ground truth covers {len(adv.ground_truth)} symbols, system has {system.n_x}')
    if not 0 <= adv.anchor < system.n_x:
        raise InvalidAdversarialSpec(f'anchor {adv.anchor} is not in the x-support')
    if adv.anchor in adv.adv_set:
        raise InvalidAdversarialSpec(f'anchor {system.x_support[adv.anchor]} is itself adversarial')
    missing = {t for t in feature.labels if t not in decision.labels}
    if missing:
        raise InvalidAdversarialSpec(f'decision map is undefined on feature symbols {sorted(missing)}')

    for a in sorted(adv.adv_set):
        if not 0 <= a < system.n_x:
            raise InvalidAdversarialSpec(f'adversarial point {a} is not in the x-support')
        if decision(feature(a)) == adv.ground_truth[a]:
            raise InvalidAdversarialSpec(f'{system.x_support[a]} is classified correctly, so it is not adversarial')
    if decision(feature(adv.anchor)) != adv.ground_truth[adv.anchor]:
        raise InvalidAdversarialSpec(f'anchor {system.x_support[adv.anchor]} is misclassified')


def construct_reduced_feature(
    system: DiscreteSystem, feature: FeatureMap, decision: DecisionMap, adv: AdversarialSpec
) -> FeatureMap:
    """``T'``: equal to ``T`` off the adversarial set, ``T(anchor)`` on it."""
    if not adv.adv_set:
        raise InvalidAdversarialSpec('empty adversarial set leaves the feature unchanged')
    validate_adversarial_spec(system, feature, decision, adv)

    anchor_symbol = feature(adv.anchor)
    return FeatureMap(tuple(anchor_symbol if x in adv.adv_set else t for x, t in enumerate(feature.labels)))


def verify_necessity(
    system: DiscreteSystem,
    feature: FeatureMap,
    decision: DecisionMap,
    adv: AdversarialSpec,
    tol: float = CONDITIONAL_TOL,
    exact: bool = False,
) -> NecessityReport:
    """Check that a feature admitting adversarial points is redundant.

    Builds the reduced feature, compares entropies, measures redundancy and
    compares the feature against the minimal sufficient partition. The drop
    ``I(X;Y) - I(T'(X);Y)`` is reported, not asserted to be zero.
    """
    reduced = construct_reduced_feature(system, feature, decision, adv)
    red = redundancy(system, feature, tol=tol, exact=exact)
    h_t = entropy_of_partition(system, feature)
    h_t_prime = entropy_of_partition(system, reduced)
    minimal = minimal_sufficient_partition(system, tol=tol, exact=exact)
    return NecessityReport(
        entropy_t=h_t,
        entropy_t_prime=h_t_prime,
        entropy_gap=h_t - h_t_prime,
        redundancy=red,
        mi_drop=mi_gap(system, reduced),
        entropy_decreased=h_t_prime < h_t,
        redundant=red > tol,
        not_minimal=not feature.same_partition(minimal),
    )


def default_anchor(system: DiscreteSystem, adv_set, feature: FeatureMap, decision: DecisionMap, ground_truth) -> int:
    """Benign x of largest ``p(x)``, lowest index on ties."""
    p = system.p_x()
    candidates = [
        x for x in range(system.n_x) if x not in adv_set and decision(feature(x)) == ground_truth[x]
    ]
    if not candidates:
        raise InvalidAdversarialSpec('no correctly classified symbol is left to serve as anchor')

    return max(candidates, key=lambda x: (p[x], -x))


def worked_example() -> Tuple[DiscreteSystem, FeatureMap, DecisionMap, AdversarialSpec]:
    """Four equiprobable symbols in two conditional classes.

    ``p(y|x)`` is ``(3/4, 1/4)`` for x0, x1 and ``(1/4, 3/4)`` for x2, x3.
    The identity feature has H = 2 bits against 1 bit for the minimal
    partition. The decision map sends x1 to the wrong label, and remapping x1
    onto the anchor x0 leaves H(T') = 1.5 bits with no loss of information.
    """
    q = Fraction(1, 4)
    rational = (
        (q * Fraction(3, 4), q * Fraction(1, 4)),
        (q * Fraction(3, 4), q * Fraction(1, 4)),
        (q * Fraction(1, 4), q * Fraction(3, 4)),
        (q * Fraction(1, 4), q * Fraction(3, 4)),
    )
    system = DiscreteSystem(
        x_support=('x0', 'x1', 'x2', 'x3'),
        y_support=('y0', 'y1'),
        joint=np.array([[float(v) for v in row] for row in rational]),
        rational=rational,
    )
    feature = FeatureMap.identity(4)
    decision = DecisionMap({0: 0, 1: 1, 2: 1, 3: 1})
    adv = AdversarialSpec(adv_set=frozenset({1}), anchor=0, ground_truth=system.ground_truth())
    return system, feature, decision, adv


def random_trial_system(
    seed: int, n_x: Optional[int] = None, n_y: Optional[int] = None
) -> Tuple[DiscreteSystem, FeatureMap, DecisionMap, AdversarialSpec]:
    """Random system with planted redundancy and a consistent adversarial set.

    |X| in 4..10 and |Y| in {2, 3} unless given. The marginal p(x) is
    Dirichlet(1); the symbols fall into 2..|X|-1 cells that share a
    Dirichlet(1) conditional, at least one cell holding two or more symbols.
    The feature splits one such cell in two; the split-off piece is sent to a
    wrong label by the decision map and forms the adversarial set. The anchor
    is the benign symbol of largest p(x).
    """
    rng = derive_rng(seed)
    n_x = int(rng.integers(4, 11)) if n_x is None else n_x
    n_y = int(rng.integers(2, 4)) if n_y is None else n_y
    if n_x < 3 or n_y < 2:
        raise BadValue('trial systems need |X| >= 3 and |Y| >= 2')

    n_cells = int(rng.integers(2, n_x))
    # every cell non-empty; the pigeonhole leaves one cell with >= 2 members
    cell_of = np.concatenate([np.arange(n_cells), rng.integers(0, n_cells, size=n_x - n_cells)])
    rng.shuffle(cell_of)

    while True:
        conditionals = rng.dirichlet(np.ones(n_y), size=n_cells)
        gaps = [np.max(np.abs(a - b)) for i, a in enumerate(conditionals) for b in conditionals[i + 1 :]]
        argmax_unique = all(np.sum(row == row.max()) == 1 for row in conditionals)
        if min(gaps) > 1e-6 and argmax_unique:
            break

    p_x = rng.dirichlet(np.ones(n_x))
    joint = p_x[:, None] * conditionals[cell_of]
    joint /= joint.sum()
    system = DiscreteSystem(
        x_support=tuple(f'x{i}' for i in range(n_x)),
        y_support=tuple(f'y{j}' for j in range(n_y)),
        joint=joint,
    )

    sizes = np.bincount(cell_of, minlength=n_cells)
    split_cell = int(rng.choice(np.flatnonzero(sizes >= 2)))
    members = np.flatnonzero(cell_of == split_cell)
    piece_size = int(rng.integers(1, members.size))
    piece = frozenset(int(x) for x in rng.choice(members, size=piece_size, replace=False))

    planted = n_cells
    feature = FeatureMap(tuple(planted if x in piece else int(c) for x, c in enumerate(cell_of)))
    truth = tuple(int(np.argmax(conditionals[c])) for c in cell_of)
    decision = {int(c): int(np.argmax(conditionals[c])) for c in range(n_cells)}
    right = int(np.argmax(conditionals[split_cell]))
    decision[planted] = int(rng.choice([y for y in range(n_y) if y != right]))
    decision = DecisionMap(decision)

    anchor = default_anchor(system, piece, feature, decision, truth)
    return system, feature, decision, AdversarialSpec(adv_set=piece, anchor=anchor, ground_truth=truth)


def run_trials(n: int, seed: int, exhaustive_limit: int = EXHAUSTIVE_LIMIT) -> TrialSummary:
    """Verify necessity on ``n`` random systems.

    Systems with at most ``exhaustive_limit`` x-symbols also have the minimal
    partition's entropy confirmed against every sufficient partition.
    """
    reports = []
    for i in range(n):
        system, feature, decision, adv = random_trial_system(derive_seed(seed, i))
        report = verify_necessity(system, feature, decision, adv)
        if system.n_x <= exhaustive_limit:
            minimal = entropy_of_partition(system, minimal_sufficient_partition(system))
            confirmed = abs(exhaustive_minimal_entropy(system) - minimal) <= CONDITIONAL_TOL
            report = replace(report, minimal_confirmed=confirmed)
        if not report.all_hold:
            log.warning(f'trial {i}: verdicts did not all hold: {report}')
        reports.append(report)

    summary = TrialSummary(reports)
    log.info(f'{summary.count("entropy_decreased")}/{n} entropy-gap verdicts positive')
    return summary


# JSON system documents


class AdversarialBlock(BaseModel):
    adv_set: List[str]
    anchor: Optional[str] = None
    ground_truth: Optional[Dict[str, str]] = None


class SystemDocument(BaseModel):
    x_support: List[str]
    y_support: List[str]
    joint: List[List[Union[float, str]]]
    feature: Optional[Dict[str, str]] = None
    decision: Optional[Dict[str, str]] = None
    adversarial: Optional[AdversarialBlock] = None


@dataclass
class LoadedSystem:
    system: DiscreteSystem
    feature: Optional[FeatureMap] = None
    decision: Optional[DecisionMap] = None
    adversarial: Optional[AdversarialSpec] = None


def _index(symbols: Sequence[str], name: str, what: str) -> int:
    try:
        return list(symbols).index(name)
    except ValueError as e:
        raise ParseError(f'unknown {what} symbol {name!r}') from e


def _rational(value) -> Fraction:
    try:
        return Fraction(value) if isinstance(value, str) else Fraction(repr(float(value)))
    except (ValueError, ZeroDivisionError) as e:
        raise ParseError(f'bad probability {value!r}') from e


def load_system(path) -> LoadedSystem:
    """Read a system document.

    The document holds ``x_support`` and ``y_support`` as string lists and
    ``joint`` as a row-major matrix whose entries are numbers or fraction
    strings such as ``"3/16"``. Optional blocks: ``feature`` (x symbol ->
    feature symbol), ``decision`` (feature symbol -> y symbol) and
    ``adversarial`` (``adv_set``, optional ``anchor`` and ``ground_truth``).
    """
    path = pathlib.Path(path)
    try:
        doc = SystemDocument.model_validate_json(path.read_text(encoding='utf-8'))
    except ValidationError as e:
        raise ParseError(f'{path} is not a valid system document: {e}') from e

    rational = tuple(tuple(_rational(v) for v in row) for row in doc.joint)
    system = DiscreteSystem(
        x_support=tuple(doc.x_support),
        y_support=tuple(doc.y_support),
        joint=np.array([[float(v) for v in row] for row in rational]) if rational else np.zeros((0, 0)),
        rational=rational,
    )
    loaded = LoadedSystem(system=system)
    if doc.feature is None:
        return loaded

    symbols: Dict[str, int] = {}
    labels = []
    for x in system.x_support:
        if x not in doc.feature:
            raise ParseError(f'feature map is undefined on {x!r}')
        labels.append(symbols.setdefault(doc.feature[x], len(symbols)))
    loaded.feature = FeatureMap(tuple(labels))

    if doc.decision is not None:
        loaded.decision = DecisionMap(
            {symbols[t]: _index(system.y_support, y, 'y') for t, y in doc.decision.items() if t in symbols}
        )
    if doc.adversarial is not None and loaded.decision is not None:
        block = doc.adversarial
        adv_set = frozenset(_index(system.x_support, a, 'x') for a in block.adv_set)
        if block.ground_truth is None:
            truth = system.ground_truth()
        else:
            truth = tuple(_index(system.y_support, block.ground_truth[x], 'y') for x in system.x_support)
        if block.anchor is None:
            anchor = default_anchor(system, adv_set, loaded.feature, loaded.decision, truth)
        else:
            anchor = _index(system.x_support, block.anchor, 'x')
        loaded.adversarial = AdversarialSpec(adv_set=adv_set, anchor=anchor, ground_truth=truth)

    return loaded


def dump_system(loaded: LoadedSystem, path) -> pathlib.Path:
    system = loaded.system
    doc = {
        'x_support': list(system.x_support),
        'y_support': list(system.y_support),
        'joint': [[str(v) for v in row] for row in system.rational]
        if system.rational is not None
        else system.joint.tolist(),
    }
    if loaded.feature is not None:
        doc['feature'] = {x: f't{t}' for x, t in zip(system.x_support, loaded.feature.labels)}
    if loaded.decision is not None:
        doc['decision'] = {f't{t}': system.y_support[y] for t, y in loaded.decision.labels.items()}
    if loaded.adversarial is not None:
        adv = loaded.adversarial
        doc['adversarial'] = {
            'adv_set': [system.x_support[a] for a in sorted(adv.adv_set)],
            'anchor': system.x_support[adv.anchor],
            'ground_truth': {x: system.y_support[y] for x, y in zip(system.x_support, adv.ground_truth)},
        }

    path = pathlib.Path(path)
    path.write_text(json.dumps(doc, indent=2) + '\n', encoding='utf-8')
    return path
