"""Quasi-sure algebra on a finite sample space.

A :class:`PriorFamily` is a finite list of probability vectors. Everything
quasi-sure is decided by its *q.s. support*, the set of outcomes charged by at
least one prior: an event is polar iff it misses the support, two random
variables are q.s. equal iff they agree on it, and a measure is dominated by
the capacity iff it vanishes off it.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from numbers import Number

from .errors import DominationError, ValidationError
from .numeric import EXACT, FLOAT, all_exact, convert, is_zero, parse_number

__all__ = [
    "SampleSpace",
    "Prior",
    "PriorFamily",
    "QsVector",
    "MeasureVector",
    "capacity",
    "sublinear_expectation",
    "polar_analysis",
    "qs_compare",
    "qs_norm",
    "ess_sup",
    "patchwork_sup",
    "restrict_to_prior",
    "family_dominance",
    "reduce_family",
    "capacity_continuity",
]

LEQ, GEQ, EQ, INCOMPARABLE = "leq", "geq", "eq", "incomparable"
F2_LL_F1, F1_LL_F2, EQUIVALENT, NEITHER = "F2<<F1", "F1<<F2", "equivalent", "neither"


@dataclass(frozen=True)
class SampleSpace:
    outcomes: tuple

    def __post_init__(self):
        outcomes = tuple(self.outcomes)
        object.__setattr__(self, "outcomes", outcomes)
        if not outcomes:
            raise ValidationError("a sample space needs at least one outcome")
        if len(set(outcomes)) != len(outcomes):
            raise ValidationError("outcome labels must be pairwise distinct")

    @classmethod
    def of_size(cls, n):
        return cls(tuple(f"w{i + 1}" for i in range(n)))

    def __len__(self):
        return len(self.outcomes)

    def index(self, label):
        try:
            return self.outcomes.index(label)
        except ValueError:
            raise ValidationError(f"unknown outcome label {label!r}") from None

    def event(self, labels):
        """Indices of an event given by labels (or by indices, if every
        element is an int that is not itself a label)."""
        idx = set()
        for item in labels:
            if item in self.outcomes:
                idx.add(self.outcomes.index(item))
            elif isinstance(item, int) and not isinstance(item, bool) and 0 <= item < len(self):
                idx.add(item)
            else:
                raise ValidationError(f"unknown outcome label {item!r}")
        return frozenset(idx)

    def render(self, values):
        """Ordered ``label -> value`` mapping, for reports."""
        return dict(zip(self.outcomes, values))


def _vector(values, n, what):
    values = tuple(values)
    if len(values) != n:
        raise ValidationError(f"{what} has {len(values)} entries, expected {n}")
    return values


@dataclass(frozen=True)
class Prior:
    """A probability vector. Exact (Fraction) weights must sum to exactly 1;
    float weights to within 1e-12."""

    weights: tuple

    def __post_init__(self):
        w = tuple(self.weights)
        object.__setattr__(self, "weights", w)
        if not w:
            raise ValidationError("a prior needs at least one weight")
        for i, x in enumerate(w):
            if not isinstance(x, Number) or isinstance(x, bool) or not math.isfinite(x):
                raise ValidationError(f"weight {i} is not a finite number: {x!r}")
            if x < 0:
                raise ValidationError(f"weight {i} is negative: {x}")
        total = sum(w)
        if all_exact(w):
            if total != 1:
                raise ValidationError(f"prior weights sum to {total}, not 1")
        elif abs(total - 1) > 1e-12:
            raise ValidationError(f"prior weights sum to {total}, not 1")

    @classmethod
    def parse(cls, values, mode=EXACT):
        return cls(tuple(parse_number(v, mode) for v in values))

    @classmethod
    def dirac(cls, n, i, mode=EXACT):
        return cls(tuple(convert(1 if k == i else 0, mode) for k in range(n)))

    def __len__(self):
        return len(self.weights)

    @property
    def support(self):
        return frozenset(i for i, x in enumerate(self.weights) if not is_zero(x))

    def expectation(self, values):
        return sum((p * x for p, x in zip(self.weights, values) if not is_zero(p)), 0 * self.weights[0])

    def to_mode(self, mode):
        return Prior(tuple(convert(x, mode) for x in self.weights))


@dataclass(frozen=True)
class PriorFamily:
    space: SampleSpace
    priors: tuple
    qs_support: frozenset = field(init=False, compare=False)

    def __post_init__(self):
        priors = tuple(p if isinstance(p, Prior) else Prior(tuple(p)) for p in self.priors)
        object.__setattr__(self, "priors", priors)
        if not priors:
            raise ValidationError("a prior family needs at least one prior")
        for k, p in enumerate(priors):
            if len(p) != len(self.space):
                raise ValidationError(f"prior {k} has {len(p)} weights, expected {len(self.space)}")
        support = frozenset().union(*(p.support for p in priors))
        object.__setattr__(self, "qs_support", support)

    @classmethod
    def from_weights(cls, rows, outcomes=None, mode=EXACT):
        rows = [list(r) for r in rows]
        space = SampleSpace(outcomes) if outcomes is not None else SampleSpace.of_size(len(rows[0]))
        return cls(space, tuple(Prior.parse(r, mode) for r in rows))

    def __len__(self):
        return len(self.priors)

    @property
    def n(self):
        return len(self.space)

    @property
    def support_list(self):
        return sorted(self.qs_support)

    @property
    def mode(self):
        return EXACT if all(all_exact(p.weights) for p in self.priors) else FLOAT

    def is_polar(self, event):
        return not (frozenset(event) & self.qs_support)

    def vector(self, values):
        return QsVector(values, self)

    def to_mode(self, mode):
        return PriorFamily(self.space, tuple(p.to_mode(mode) for p in self.priors))

    def event(self, labels):
        return self.space.event(labels)


class QsVector:
    """A random variable modulo polar sets.

    Values at polar outcomes are overwritten with 0 (the canonical
    representative), so equality is plain tuple equality on canonical form.
    """

    __slots__ = ("family", "values", "raw")

    def __init__(self, values, family):
        if isinstance(values, QsVector):
            values = values.raw
        if isinstance(values, dict):
            values = [values[label] for label in family.space.outcomes]
        raw = _vector(values, family.n, "random variable")
        for i, x in enumerate(raw):
            if not isinstance(x, Number) or isinstance(x, bool):
                raise ValidationError(f"value {i} is not a number: {x!r}")
        zero = 0 * raw[0]
        self.family = family
        self.raw = raw
        self.values = tuple(x if i in family.qs_support else zero for i, x in enumerate(raw))

    def __repr__(self):
        return f"QsVector({list(self.values)!r})"

    def __len__(self):
        return len(self.values)

    def __iter__(self):
        return iter(self.values)

    def __getitem__(self, i):
        return self.values[i]

    def __eq__(self, other):
        if isinstance(other, QsVector):
            return self.family.qs_support == other.family.qs_support and self.values == other.values
        return NotImplemented

    def __hash__(self):
        return hash((self.family.qs_support, self.values))

    def _other(self, other):
        if isinstance(other, QsVector):
            _check_same(self.family, other.family)
            return other.values
        if isinstance(other, Number):
            return (other,) * len(self.values)
        return _vector(other, len(self.values), "operand")

    def __add__(self, other):
        return QsVector([a + b for a, b in zip(self.values, self._other(other))], self.family)

    __radd__ = __add__

    def __sub__(self, other):
        return QsVector([a - b for a, b in zip(self.values, self._other(other))], self.family)

    def __rsub__(self, other):
        return QsVector([b - a for a, b in zip(self.values, self._other(other))], self.family)

    def __neg__(self):
        return QsVector([-a for a in self.values], self.family)

    def __mul__(self, k):
        if not isinstance(k, Number):
            return NotImplemented
        return QsVector([k * a for a in self.values], self.family)

    __rmul__ = __mul__

    def __abs__(self):
        return QsVector([abs(a) for a in self.values], self.family)

    def on_support(self):
        return tuple(self.values[i] for i in self.family.support_list)

    def render(self):
        return self.family.space.render(self.values)


def as_qs(values, family):
    if isinstance(values, QsVector):
        _check_same(family, values.family)
        return values
    return QsVector(values, family)


def _check_same(f1, f2):
    if len(f1.space) != len(f2.space):
        raise ValidationError(f"dimension mismatch: {len(f1.space)} vs {len(f2.space)} outcomes")


@dataclass(frozen=True)
class MeasureVector:
    """A signed measure on a finite space, one mass per outcome."""

    masses: tuple

    def __post_init__(self):
        object.__setattr__(self, "masses", tuple(self.masses))

    def __len__(self):
        return len(self.masses)

    @property
    def support(self):
        return frozenset(i for i, m in enumerate(self.masses) if not is_zero(m))

    @property
    def total_mass(self):
        return sum(self.masses)

    @property
    def total_variation(self):
        return sum(abs(m) for m in self.masses)

    @property
    def nonnegative(self):
        return all(m >= 0 or is_zero(m) for m in self.masses)

    def is_dominated(self, family):
        return self.support <= family.qs_support

    def integrate(self, values):
        values = values.values if isinstance(values, QsVector) else values
        return sum((m * x for m, x in zip(self.masses, values) if not is_zero(m)), 0 * self.masses[0])


def capacity(family, event):
    """``c(A) = max_P P(A)``."""
    idx = family.event(event)
    if not idx:
        return 0 * family.priors[0].weights[0]
    return max(sum(p.weights[i] for i in idx) for p in family.priors)


def sublinear_expectation(family, f):
    """``c(f) = max_P E_P[f]``."""
    f = as_qs(f, family)
    return max(p.expectation(f.values) for p in family.priors)


def polar_analysis(family):
    """``(qs_support, polar_atoms)`` as label sets."""
    labels = family.space.outcomes
    support = frozenset(labels[i] for i in family.qs_support)
    polar = frozenset(labels) - support
    return support, polar


def _le(a, b):
    return a <= b or is_zero(a - b)


def qs_compare(X, Y, family=None):
    """Order relation of ``X`` and ``Y`` evaluated on the q.s. support."""
    if family is None:
        if not isinstance(X, QsVector):
            raise ValidationError("qs_compare needs a family or QsVector operands")
        family = X.family
    X, Y = as_qs(X, family), as_qs(Y, family)
    sup = family.support_list
    leq = all(_le(X[i], Y[i]) for i in sup)
    geq = all(_le(Y[i], X[i]) for i in sup)
    if leq and geq:
        return EQ
    if leq:
        return LEQ
    if geq:
        return GEQ
    return INCOMPARABLE


def qs_leq(X, Y, family=None):
    return qs_compare(X, Y, family) in (LEQ, EQ)


def qs_norm(X, family=None):
    """``||X||_{c,inf}``: the smallest ``m`` with ``|X| <= m`` quasi-surely."""
    if family is not None:
        X = as_qs(X, family)
    return max(abs(X[i]) for i in X.family.support_list)


def ess_sup(family, D):
    """Least upper bound of ``D`` in the q.s. order (0 off the support)."""
    D = [as_qs(Y, family) for Y in D]
    if not D:
        raise ValidationError("ess_sup of an empty set")
    zero = 0 * D[0].values[0]
    sup = family.qs_support
    values = [max(Y.values[i] for Y in D) if i in sup else zero for i in range(family.n)]
    return QsVector(values, family)


def patchwork_sup(family, D):
    """Essential supremum assembled prior by prior.

    Valid when the priors have pairwise disjoint supports ``Omega_k``: the
    result is ``sum_k (ess sup of D under P_k) * 1_{Omega_k}``, each per-prior
    essential supremum being computed under prior ``P_k`` alone.
    """
    supports = [p.support for p in family.priors]
    for a in range(len(supports)):
        for b in range(a + 1, len(supports)):
            if supports[a] & supports[b]:
                raise ValidationError(f"priors {a} and {b} have overlapping supports")
    D = [as_qs(Y, family) for Y in D]
    if not D:
        raise ValidationError("ess_sup of an empty set")
    total = [0 * D[0].values[0]] * family.n
    for p in family.priors:
        restricted = [restrict_to_prior(Y, p) for Y in D]
        local = [max(col) for col in zip(*restricted)]
        for i, v in zip(sorted(p.support), local):
            total[i] = total[i] + v
    return QsVector(total, family)


def restrict_to_prior(X, Q, family=None):
    """Restriction to a prior: the values of ``X`` on ``support(Q)``, in outcome order."""
    if family is not None:
        X = as_qs(X, family)
    if not isinstance(X, QsVector):
        raise ValidationError("restrict_to_prior needs a QsVector or a family")
    if not isinstance(Q, Prior):
        Q = Prior(tuple(Q))
    if len(Q) != X.family.n:
        raise ValidationError("prior dimension does not match the sample space")
    if not Q.support <= X.family.qs_support:
        raise DominationError("prior charges an outcome that is polar for the family")
    return tuple(X.values[i] for i in sorted(Q.support))


def family_dominance(F1, F2):
    """Relation between two prior families on the same space."""
    _check_same(F1, F2)
    s1, s2 = F1.qs_support, F2.qs_support
    if s1 == s2:
        return EQUIVALENT
    if s2 <= s1:
        return F2_LL_F1
    if s1 <= s2:
        return F1_LL_F2
    return NEITHER


def reduce_family_indices(F):
    uncovered = set(F.qs_support)
    chosen = []
    supports = [p.support for p in F.priors]
    while uncovered:
        best = max(range(len(supports)), key=lambda k: (len(supports[k] & uncovered), -k))
        chosen.append(best)
        uncovered -= supports[best]
    return sorted(chosen)


def reduce_family(F):
    """Greedy cover of the q.s. support by priors; ties go to the lowest
    index. The result is equivalent to ``F`` and has at most
    ``|qs_support|`` members."""
    return PriorFamily(F.space, tuple(F.priors[k] for k in reduce_family_indices(F)))


@dataclass(frozen=True)
class ContinuityReport:
    capacities: tuple
    limit: object
    monotone: bool


def capacity_continuity(family, chain):
    """Capacities along a strictly decreasing chain of events ending at the
    empty set. On a finite space the terminal value is always 0."""
    events = [family.event(A) for A in chain]
    if not events:
        raise ValidationError("empty chain")
    for k in range(1, len(events)):
        if not events[k] < events[k - 1]:
            raise ValidationError(f"chain is not strictly decreasing at step {k}")
    if events[-1]:
        raise ValidationError("chain must end at the empty set")
    caps = tuple(capacity(family, e) for e in events)
    monotone = all(_le(caps[k], caps[k - 1]) for k in range(1, len(caps)))
    limit = caps[-1]
    assert is_zero(limit) and monotone, "capacity of the empty set must vanish"
    return ContinuityReport(caps, limit, monotone)

