"""Discrete-time markets under a prior family.

Prices are pre-discounted by a numeraire ``S^0 = 1`` which is never stored.
The filtration is a list of successively finer partitions of the outcomes;
a predictable strategy holds ``H[t][j]`` on each block of ``partitions[t-1]``.

Every LP here is posed only on the q.s. support of the family, which is the
finite-space meaning of "P-quasi-surely". Martingale constraints are written
as mass-weighted block sums, so blocks of zero mass impose nothing and no
conditional expectation is ever formed.
"""

from __future__ import annotations

import itertools
import logging
from dataclasses import dataclass
from fractions import Fraction

from .core import Prior, PriorFamily, QsVector, SampleSpace
from .errors import ArbitrageError, InvariantError, SizeError, ValidationError
from .lp import INFEASIBLE, UNBOUNDED, LinearProgram
from .risk import CONVEX, RiskFunctional
from .numeric import EXACT, FLOAT, all_exact, convert, is_positive, is_zero, parse_number

log = logging.getLogger(__name__)

VERTEX_CAP = 12


@dataclass(frozen=True)
class Filtration:
    """``partitions[t]`` is a tuple of blocks, each a sorted tuple of outcome
    indices."""

    partitions: tuple

    def __post_init__(self):
        parts = tuple(tuple(tuple(sorted(b)) for b in part) for part in self.partitions)
        object.__setattr__(self, "partitions", parts)

    @classmethod
    def from_labels(cls, space, partitions):
        return cls(tuple(tuple(tuple(sorted(space.event(block))) for block in part) for part in partitions))

    @classmethod
    def tree(cls, n, splits):
        """Helper for tests: ``splits[t]`` lists the sizes of the blocks at
        time ``t+1`` from left to right."""
        parts = [((tuple(range(n))),)]
        for sizes in splits:
            blocks, start = [], 0
            for s in sizes:
                blocks.append(tuple(range(start, start + s)))
                start += s
            parts.append(tuple(blocks))
        return cls(tuple(parts))

    @property
    def T(self):
        return len(self.partitions) - 1

    def block_of(self, t, omega):
        for b, block in enumerate(self.partitions[t]):
            if omega in block:
                return b
        raise ValidationError(f"outcome {omega} not covered by partition {t}")


@dataclass(frozen=True)
class MarketModel:
    """``prices[t][j][omega]`` for ``t = 0..T`` and assets ``j = 0..d-1``."""

    space: SampleSpace
    filtration: Filtration
    prices: tuple

    def __post_init__(self):
        prices = tuple(tuple(tuple(row) for row in S_t) for S_t in self.prices)
        object.__setattr__(self, "prices", prices)
        if len(prices) != len(self.filtration.partitions):
            raise ValidationError(
                f"prices cover {len(prices)} dates but the filtration has {len(self.filtration.partitions)}"
            )
        d = {len(S_t) for S_t in prices}
        if len(d) != 1 or 0 in d:
            raise ValidationError("every date needs the same positive number of assets")
        n = len(self.space)
        for t, S_t in enumerate(prices):
            for j, row in enumerate(S_t):
                if len(row) != n:
                    raise ValidationError(f"price row (t={t}, asset={j}) has {len(row)} entries, expected {n}")

    @property
    def T(self):
        return self.filtration.T

    @property
    def d(self):
        return len(self.prices[0])

    @property
    def n(self):
        return len(self.space)

    @property
    def mode(self):
        return EXACT if all(all_exact(row) for S_t in self.prices for row in S_t) else FLOAT

    def to_mode(self, mode):
        return MarketModel(
            self.space,
            self.filtration,
            tuple(tuple(tuple(convert(x, mode) for x in row) for row in S_t) for S_t in self.prices),
        )

    def increment(self, t, j, omega):
        """``S_t^j(omega) - S_{t-1}^j(omega)`` for ``t >= 1``."""
        return self.prices[t][j][omega] - self.prices[t - 1][j][omega]


@dataclass(frozen=True)
class ModelVerdict:
    valid: bool
    issues: tuple = ()

    def raise_if_invalid(self):
        if not self.valid:
            raise ValidationError(f"invalid market model: {len(self.issues)} issue(s)", [i["reason"] for i in self.issues])


def validate_model(model):
    """Check filtration structure and adaptedness; each problem found is
    itemized with its ``(t, asset, block)`` location."""
    issues = []
    n = model.n
    universe = set(range(n))
    parts = model.filtration.partitions
    if not parts:
        issues.append({"t": None, "asset": None, "block": None, "reason": "filtration has no dates"})
        return ModelVerdict(False, tuple(issues))
    for t, part in enumerate(parts):
        seen = set()
        for b, block in enumerate(part):
            if not block:
                issues.append({"t": t, "asset": None, "block": b, "reason": f"empty block {b} at time {t}"})
            for w in block:
                if w not in universe:
                    issues.append({"t": t, "asset": None, "block": b, "reason": f"unknown outcome {w} at time {t}"})
                elif w in seen:
                    issues.append({"t": t, "asset": None, "block": b, "reason": f"outcome {w} in two blocks at time {t}"})
                seen.add(w)
        if seen != universe and not (seen - universe):
            issues.append({"t": t, "asset": None, "block": None, "reason": f"partition {t} does not cover all outcomes"})
    if parts and len(parts[0]) != 1:
        issues.append({"t": 0, "asset": None, "block": None, "reason": "partition 0 must be the trivial partition"})
    for t in range(1, len(parts)):
        for b, block in enumerate(parts[t]):
            if not block:
                continue
            parents = {_block_index(parts[t - 1], w) for w in block}
            if len(parents) != 1:
                issues.append(
                    {"t": t, "asset": None, "block": b, "reason": f"block {b} at time {t} does not refine time {t - 1}"}
                )
    for t, S_t in enumerate(model.prices):
        for j, row in enumerate(S_t):
            for w, x in enumerate(row):
                try:
                    finite = abs(x) < float("inf")
                except TypeError:
                    finite = False
                if not finite:
                    issues.append({"t": t, "asset": j, "block": None, "reason": f"price S[{t}][{j}][{w}] is not finite"})
            if t < len(parts):
                for b, block in enumerate(parts[t]):
                    vals = {row[w] for w in block if 0 <= w < n}
                    if len(vals) > 1:
                        issues.append(
                            {
                                "t": t,
                                "asset": j,
                                "block": b,
                                "reason": f"asset {j} is not constant on block {b} at time {t}",
                            }
                        )
    return ModelVerdict(not issues, tuple(issues))


def _block_index(part, w):
    for b, block in enumerate(part):
        if w in block:
            return b
    return None


@dataclass(frozen=True)
class Strategy:
    """``holdings[t-1][j][omega]`` for trading dates ``t = 1..T``."""

    holdings: tuple

    def __post_init__(self):
        object.__setattr__(self, "holdings", tuple(tuple(tuple(r) for r in H_t) for H_t in self.holdings))

    @classmethod
    def zero(cls, model, mode=EXACT):
        z = convert(0, mode)
        return cls(tuple(tuple((z,) * model.n for _ in range(model.d)) for _ in range(model.T)))

    @classmethod
    def constant(cls, model, value):
        return cls(tuple(tuple((value,) * model.n for _ in range(model.d)) for _ in range(model.T)))

    @classmethod
    def from_blocks(cls, model, values):
        """``values[(t, block, j)]`` for ``t = 1..T`` and blocks of
        ``partitions[t-1]``; missing keys hold nothing."""
        zero = 0 * next(iter(values.values())) if values else 0
        H = []
        for t in range(1, model.T + 1):
            H_t = []
            for j in range(model.d):
                row = [zero] * model.n
                for b, block in enumerate(model.filtration.partitions[t - 1]):
                    v = values.get((t, b, j), zero)
                    for w in block:
                        row[w] = v
                H_t.append(tuple(row))
            H.append(tuple(H_t))
        return cls(tuple(H))

    def block_values(self, model):
        out = {}
        for t in range(1, model.T + 1):
            for b, block in enumerate(model.filtration.partitions[t - 1]):
                for j in range(model.d):
                    out[(t, b, j)] = self.holdings[t - 1][j][block[0]]
        return out


def check_predictable(model, H):
    if len(H.holdings) != model.T:
        raise ValidationError(f"strategy covers {len(H.holdings)} dates, expected {model.T}")
    for t in range(1, model.T + 1):
        H_t = H.holdings[t - 1]
        if len(H_t) != model.d:
            raise ValidationError(f"strategy at t={t} has {len(H_t)} assets, expected {model.d}")
        for j, row in enumerate(H_t):
            if len(row) != model.n:
                raise ValidationError(f"strategy row (t={t}, asset={j}) has wrong length")
            for b, block in enumerate(model.filtration.partitions[t - 1]):
                if len({row[w] for w in block}) > 1:
                    raise ValidationError(
                        f"strategy is not predictable: H[{t}][{j}] varies on block {b} of time {t - 1}"
                    )


def gains(model, H, family=None):
    """Terminal gain ``(H . S)_T = sum_t sum_j H_t^j (S_t^j - S_{t-1}^j)``.

    Returns a :class:`QsVector` when ``family`` is given, else a tuple.
    """
    check_predictable(model, H)
    out = []
    for w in range(model.n):
        g = 0
        for t in range(1, model.T + 1):
            for j in range(model.d):
                g = g + H.holdings[t - 1][j][w] * model.increment(t, j, w)
        out.append(g)
    return QsVector(out, family) if family is not None else tuple(out)


# -- LP assembly -----------------------------------------------------------


def _hedge_columns(model):
    """One LP variable per (trading date t, block of partitions[t-1], asset)."""
    return [
        (t, b, j)
        for t in range(1, model.T + 1)
        for b in range(len(model.filtration.partitions[t - 1]))
        for j in range(model.d)
    ]


def _gain_rows(model, columns, mode):
    """``G[omega][k]``: gain at ``omega`` per unit of hedge variable ``k``."""
    zero = convert(0, mode)
    block_at = [[_block_index(part, w) for w in range(model.n)] for part in model.filtration.partitions]
    G = []
    for w in range(model.n):
        row = []
        for t, b, j in columns:
            row.append(model.increment(t, j, w) if block_at[t - 1][w] == b else zero)
        G.append(row)
    return G


def _prepare(model, family, mode, *payoffs):
    if len(family.space) != model.n:
        raise ValidationError("prior family and market model live on different sample spaces")
    validate_model(model).raise_if_invalid()
    if mode is None:
        exact = model.mode == EXACT and family.mode == EXACT
        for X in payoffs:
            vals = X.raw if isinstance(X, QsVector) else X
            if isinstance(vals, dict):
                vals = list(vals.values())
            exact = exact and all_exact(vals)
        mode = EXACT if exact else FLOAT
    m = model.to_mode(mode)
    fam = family.to_mode(mode)
    conv = []
    for X in payoffs:
        vals = X.raw if isinstance(X, QsVector) else X
        if isinstance(vals, dict):
            vals = [vals[label] for label in model.space.outcomes]
        conv.append(QsVector([convert(parse_number(v, mode) if isinstance(v, str) else v, mode) for v in vals], fam))
    return (m, fam, mode, *conv)


def _strategy_from_lp(model, columns, xs):
    return Strategy.from_blocks(model, {col: v for col, v in zip(columns, xs)})


@dataclass(frozen=True)
class ConeResult:
    member: bool
    strategy: Strategy = None


def cone_membership(model, family, X, mode=None):
    """Is ``X <= (H . S)_T`` q.s. for some predictable ``H``?"""
    model, family, mode, X = _prepare(model, family, mode, X)
    columns = _hedge_columns(model)
    G = _gain_rows(model, columns, mode)
    lp = LinearProgram(len(columns), mode=mode, bounds=[(None, None)] * len(columns))
    for w in family.support_list:
        lp.add_constraint(G[w], ">=", X[w])
    res = lp.solve()
    if res.status == INFEASIBLE:
        return ConeResult(False)
    return ConeResult(True, _strategy_from_lp(model, columns, res.x))


@dataclass(frozen=True)
class NAResult:
    no_arbitrage: bool
    strategy: Strategy = None
    outcome: object = None
    gains: tuple = None

    @property
    def verdict(self):
        return "no_arbitrage" if self.no_arbitrage else "arbitrage"


def na_check(model, family, mode=None, method="aggregate"):
    """No-arbitrage test: is there a predictable ``H`` with gains ``>= 0`` q.s. and
    ``>= 1`` at some non-polar outcome?

    ``method="per_outcome"`` solves one feasibility LP per non-polar
    outcome. ``"aggregate"`` (default) reaches the same decision with a single
    LP, maximizing the total gain subject to ``0 <= gains <= 1`` on the
    support; a positive optimum exposes the outcome, and the strategy is
    rescaled so that its gain there is at least 1.
    """
    model, family, mode = _prepare(model, family, mode)
    columns = _hedge_columns(model)
    G = _gain_rows(model, columns, mode)
    support = family.support_list
    free = [(None, None)] * len(columns)
    if method == "per_outcome":
        for target in support:
            lp = LinearProgram(len(columns), mode=mode, bounds=list(free))
            for w in support:
                lp.add_constraint(G[w], ">=", 0)
            lp.add_constraint(G[target], ">=", 1)
            res = lp.solve()
            if res.status != INFEASIBLE:
                H = _strategy_from_lp(model, columns, res.x)
                return NAResult(False, H, model.space.outcomes[target], gains(model, H))
        return NAResult(True)
    if method != "aggregate":
        raise ValidationError(f"unknown NA method {method!r}")
    total = [sum(G[w][k] for w in support) for k in range(len(columns))]
    lp = LinearProgram(len(columns), total, sense="max", mode=mode, bounds=list(free))
    for w in support:
        lp.add_constraint(G[w], ">=", 0)
        lp.add_constraint(G[w], "<=", 1)
    res = lp.solve()
    if not res.optimal:
        raise InvariantError(f"bounded arbitrage LP returned {res.status}")
    if not is_positive(res.value):
        return NAResult(True)
    g = [sum(a * h for a, h in zip(G[w], res.x)) for w in range(model.n)]
    target = max(support, key=lambda w: (g[w], -w))
    scale = 1 / g[target]
    H = _strategy_from_lp(model, columns, [h * scale for h in res.x])
    return NAResult(False, H, model.space.outcomes[target], gains(model, H))


@dataclass(frozen=True)
class MartingalePolytope:
    """``{Q >= 0 on the q.s. support, Q(Omega) = 1, S a Q-martingale}``.

    ``rows`` are equality constraints over the support outcomes
    (``support[k]`` is the outcome of column ``k``); the last row is the
    normalization.
    """

    model: MarketModel
    family: PriorFamily
    support: tuple
    rows: tuple
    rhs: tuple
    mode: str
    empty: bool
    vertices: tuple = None

    def measure(self, q_on_support):
        zero = convert(0, self.mode)
        full = [zero] * self.model.n
        for w, q in zip(self.support, q_on_support):
            full[w] = q
        return tuple(full)

    def contains(self, Q):
        Q = tuple(convert(q, self.mode) for q in Q)
        if any(not is_zero(Q[w]) for w in range(self.model.n) if w not in self.support):
            return False
        if any(q < 0 and not is_zero(q) for q in Q):
            return False
        qs = [Q[w] for w in self.support]
        return all(is_zero(sum(a * q for a, q in zip(row, qs)) - b) for row, b in zip(self.rows, self.rhs))

    def optimize(self, weights, sense="max"):
        """Optimize ``sum_w weights[w] Q(w)`` over the polytope; returns the
        LP result (``x`` indexed by support position)."""
        lp = LinearProgram(len(self.support), [weights[w] for w in self.support], sense=sense, mode=self.mode)
        for row, b in zip(self.rows, self.rhs):
            lp.add_constraint(row, "==", b)
        return lp.solve()


def _martingale_rows(model, support, mode):
    zero, one = convert(0, mode), convert(1, mode)
    rows = []
    for t in range(model.T):
        for block in model.filtration.partitions[t]:
            for j in range(model.d):
                row = []
                for w in support:
                    row.append(model.increment(t + 1, j, w) if w in block else zero)
                if any(not is_zero(a) for a in row):
                    rows.append(tuple(row))
    rhs = [zero] * len(rows)
    rows.append(tuple(one for _ in support))
    rhs.append(one)
    return tuple(rows), tuple(rhs)


def martingale_polytope(model, family, enumerate_vertices=False, mode=None):
    model, family, mode = _prepare(model, family, mode)
    support = tuple(family.support_list)
    rows, rhs = _martingale_rows(model, support, mode)
    lp = LinearProgram(len(support), mode=mode)
    for row, b in zip(rows, rhs):
        lp.add_constraint(row, "==", b)
    empty = lp.solve().status == INFEASIBLE
    vertices = None
    if enumerate_vertices:
        if len(support) > VERTEX_CAP:
            raise SizeError(f"vertex enumeration is capped at {VERTEX_CAP} free outcomes, got {len(support)}")
        verts = [] if empty else _enumerate_vertices(rows, rhs)
        vertices = tuple(
            tuple(_full(model.n, support, v, mode)) for v in verts
        )
    return MartingalePolytope(model, family, support, rows, rhs, mode, empty, vertices)


def _full(n, support, v, mode):
    zero = convert(0, mode)
    out = [zero] * n
    for w, q in zip(support, v):
        out[w] = convert(q, mode)
    return out


def _row_reduce(rows, rhs):
    """Exact row echelon form; drops dependent rows."""
    M = [[Fraction(a) for a in row] + [Fraction(b)] for row, b in zip(rows, rhs)]
    ncol = len(M[0]) - 1 if M else 0
    out = []
    r = 0
    for c in range(ncol):
        piv = next((i for i in range(r, len(M)) if M[i][c] != 0), None)
        if piv is None:
            continue
        M[r], M[piv] = M[piv], M[r]
        p = M[r][c]
        M[r] = [v / p for v in M[r]]
        for i in range(len(M)):
            if i != r and M[i][c] != 0:
                f = M[i][c]
                M[i] = [a - f * b for a, b in zip(M[i], M[r])]
        r += 1
    for i in range(r, len(M)):
        if M[i][-1] != 0:
            return None
    for i in range(r):
        out.append(M[i])
    return out


def _solve_square(A, b):
    n = len(A)
    M = [list(A[i]) + [b[i]] for i in range(n)]
    for c in range(n):
        piv = next((i for i in range(c, n) if M[i][c] != 0), None)
        if piv is None:
            return None
        M[c], M[piv] = M[piv], M[c]
        p = M[c][c]
        M[c] = [v / p for v in M[c]]
        for i in range(n):
            if i != c and M[i][c] != 0:
                f = M[i][c]
                M[i] = [a - f * bb for a, bb in zip(M[i], M[c])]
    return [M[i][-1] for i in range(n)]


def _enumerate_vertices(rows, rhs):
    """All basic feasible solutions of ``{q >= 0 : rows q = rhs}``, found by
    brute force over column subsets in exact arithmetic, sorted
    lexicographically."""
    reduced = _row_reduce(rows, rhs)
    if reduced is None:
        return []
    r = len(reduced)
    n = len(rows[0])
    A = [row[:-1] for row in reduced]
    b = [row[-1] for row in reduced]
    found = set()
    for cols in itertools.combinations(range(n), r):
        sub = [[A[i][c] for c in cols] for i in range(r)]
        sol = _solve_square(sub, b)
        if sol is None or any(v < 0 for v in sol):
            continue
        q = [Fraction(0)] * n
        for c, v in zip(cols, sol):
            q[c] = v
        found.add(tuple(q))
    return sorted(found)


@dataclass(frozen=True)
class FtapReport:
    na: NAResult
    polytope_equivalent_to_family: bool
    max_masses: dict
    agree: bool

    @property
    def na_verdict(self):
        return self.na.verdict


def ftap_check(model, family, mode=None):
    """Decide no-arbitrage and, independently, whether the dominated martingale
    measures charge every non-polar outcome; the two must agree."""
    model, family, mode = _prepare(model, family, mode)
    na = na_check(model, family, mode)
    poly = martingale_polytope(model, family, mode=mode)
    max_masses = {}
    equivalent = not poly.empty
    if not poly.empty:
        for w in poly.support:
            weights = [convert(1 if k == w else 0, mode) for k in range(model.n)]
            res = poly.optimize(weights)
            max_masses[model.space.outcomes[w]] = res.value
            if not is_positive(res.value):
                equivalent = False
    agree = equivalent == na.no_arbitrage
    if not agree:
        raise InvariantError(
            f"FTAP disagreement: na={na.verdict}, polytope equivalent={equivalent}"
        )
    return FtapReport(na, equivalent, max_masses, agree)


@dataclass(frozen=True)
class SuperhedgeResult:
    price: object
    strategy: Strategy
    dual_measure: tuple
    dual_value: object
    gap: object
    lower_price: object
    mode: str

    @property
    def interval(self):
        return (self.lower_price, self.price)


def _primal_price(model, family, mode, X):
    columns = _hedge_columns(model)
    G = _gain_rows(model, columns, mode)
    nv = 1 + len(columns)
    one = convert(1, mode)
    lp = LinearProgram(nv, [one] + [convert(0, mode)] * len(columns), mode=mode, bounds=[(None, None)] * nv)
    for w in family.support_list:
        lp.add_constraint([one] + list(G[w]), ">=", X[w])
    res = lp.solve()
    if res.status == UNBOUNDED:
        raise InvariantError("superhedging LP is unbounded; the model admits arbitrage or is malformed")
    if res.status == INFEASIBLE:
        raise InvariantError("superhedging LP is infeasible, which cannot happen")
    return res.value, _strategy_from_lp(model, columns, res.x[1:]), res.duals


def superhedge(model, family, X, mode=None):
    """Minimal superhedging price with its hedge, the maximizing dominated
    martingale measure, and the primal-dual gap."""
    model, family, mode, X = _prepare(model, family, mode, X)
    na = na_check(model, family, mode)
    if not na.no_arbitrage:
        raise ArbitrageError(f"market admits an arbitrage (profitable at {na.outcome!r})", na)
    price, H, _ = _primal_price(model, family, mode, X)
    lower, _, _ = _primal_price(model, family, mode, -X)
    poly = martingale_polytope(model, family, mode=mode)
    dual = poly.optimize(X.values)
    if not dual.optimal:
        raise InvariantError(f"dual pricing LP is {dual.status} under no-arbitrage")
    Q = poly.measure(dual.x)
    gap = price - dual.value
    if mode == EXACT and gap != 0:
        raise InvariantError(f"nonzero duality gap {gap} in exact mode")
    return SuperhedgeResult(price, H, Q, dual.value, gap, -lower, mode)


@dataclass(frozen=True)
class BipolarVerdict:
    member: bool
    max_expectation: object
    vertex: tuple
    agree: bool
    strategy: Strategy = None


def bipolar_check(model, family, X, mode=None):
    """``X`` in the hedging cone iff ``E_Q[X] <= 0`` at every vertex of the
    martingale polytope."""
    model, family, mode, X = _prepare(model, family, mode, X)
    na = na_check(model, family, mode)
    if not na.no_arbitrage:
        raise ArbitrageError("bipolar check needs an arbitrage-free market", na)
    cone = cone_membership(model, family, X, mode)
    poly = martingale_polytope(model, family, enumerate_vertices=True, mode=mode)
    best, arg = None, None
    for Q in poly.vertices:
        v = sum((q * x for q, x in zip(Q, X.values)), convert(0, mode))
        if best is None or v > best:
            best, arg = v, Q
    dual_member = best is not None and (best <= 0 or is_zero(best))
    agree = dual_member == cone.member
    if not agree:
        raise InvariantError(f"bipolar disagreement: cone member={cone.member}, max E_Q[X]={best}")
    return BipolarVerdict(cone.member, best, arg, agree, cone.strategy)


def price_functional(model, family, mode=None):
    """The superhedging price ``X -> price(X)`` as a convex, monotone,
    cash-additive :class:`~qsure.risk.RiskFunctional`.

    When the martingale polytope is small enough to enumerate, its vertices
    become the linear pieces and the reduction family.
    """
    model, family, mode = _prepare(model, family, mode)
    na = na_check(model, family, mode)
    if not na.no_arbitrage:
        raise ArbitrageError("the superhedging price is -inf on an arbitrage market", na)

    def evaluate(X):
        return _primal_price(model, family, mode, [convert(v, mode) for v in X.values])[0]

    pieces = None
    try:
        pieces = tuple(martingale_polytope(model, family, enumerate_vertices=True, mode=mode).vertices)
    except SizeError:
        pass
    return RiskFunctional(
        family,
        evaluate,
        kind=CONVEX,
        cash_additive=True,
        monotone=True,
        reduction_family=None if pieces is None else tuple(Prior(v) for v in pieces),
        linear_pieces=pieces,
        name="superhedging_price",
    )
