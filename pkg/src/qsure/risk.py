"""Robust risk functionals and their dual representations.

A :class:`RiskFunctional` is an evaluation oracle plus the structural
metadata the dual routines can exploit:

* ``linear_pieces`` -- measures ``a_i`` with ``f(X) = max_i a_i . X``. Worst
  case expectations and AVaR have this form; conjugates then reduce to an
  exact hull-feasibility LP and the slices defining ``R`` to exact LPs.
* ``smooth_pieces`` -- differentiable convex functions whose maximum is
  ``f``; used for robust entropic risk through an epigraph SLSQP solve.
* ``penalty`` -- an exact closed-form conjugate, when one is known.

Anything else falls back to searching a box grid, which only ever yields a
lower bound for a supremum.
"""

from __future__ import annotations

import itertools
import logging
import math
import random
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Callable, Optional

import numpy as np
from scipy.optimize import minimize

from .core import MeasureVector, Prior, PriorFamily, QsVector, as_qs, qs_leq, qs_norm, restrict_to_prior
from .errors import ContractError, DominationError, ValidationError
from .lp import INFEASIBLE, LinearProgram
from .numeric import EXACT, FLOAT, INF, all_exact, is_positive, is_zero

log = logging.getLogger(__name__)

CONVEX = "convex"
QUASICONVEX = "quasiconvex"

DEFAULT_GRID = Fraction(1, 16)
DEFAULT_K = 16
DEFAULT_EPS = tuple(Fraction(1, 2**k) for k in range(11))
GRID_CAP = 200_000


# -- per-prior building blocks ------------------------------------------------


@dataclass(frozen=True)
class LocalFunctional:
    """A functional under a single prior ``P``: it sees only the values of
    ``X`` on ``support(P)`` (in outcome order), and the matching weights."""

    name: str
    evaluate: Callable
    linear_pieces: Optional[tuple] = None  # vectors over support(P)
    smooth: Optional[Callable] = None  # x -> (value, gradient), float arrays
    penalty: Optional[Callable] = None  # closed-form conjugate of mu over support(P)
    convex: bool = True
    monotone: bool = True
    cash_additive: bool = True


def _weights_on_support(P):
    return tuple(P.weights[i] for i in sorted(P.support))


def local_expectation(P):
    p = _weights_on_support(P)
    return LocalFunctional(
        "expectation",
        lambda x: sum(a * b for a, b in zip(p, x)),
        linear_pieces=(p,),
    )


def local_neg_expectation(P):
    p = _weights_on_support(P)
    return LocalFunctional(
        "neg_expectation",
        lambda x: -sum(a * b for a, b in zip(p, x)),
        linear_pieces=(tuple(-a for a in p),),
        monotone=False,
        cash_additive=False,
    )


def _logsumexp(p, x):
    x = np.asarray(x, dtype=float)
    p = np.asarray(p, dtype=float)
    m = x.max()
    w = p * np.exp(x - m)
    s = w.sum()
    return float(m + math.log(s)), w / s


def kl_divergence(mu, p):
    """Relative entropy of ``mu`` w.r.t. ``p``; ``inf`` unless ``mu`` is a
    probability vector absolutely continuous w.r.t. ``p``."""
    if any(m < 0 and not is_zero(m) for m in mu) or abs(float(sum(mu)) - 1) > 1e-12:
        return INF
    total = 0.0
    for m, q in zip(mu, p):
        if is_zero(m):
            continue
        if is_zero(q):
            return INF
        total += float(m) * math.log(float(m) / float(q))
    return total


def local_entropic(P):
    """``log E_P[exp(X)]``."""
    p = _weights_on_support(P)
    return LocalFunctional(
        "entropic",
        lambda x: _logsumexp(p, x)[0],
        smooth=lambda x: _logsumexp(p, x),
        penalty=lambda mu: kl_divergence(mu, p),
    )


def avar_local(p, x, alpha):
    """Upper-tail average: ``(1/alpha) max{q . x : 0 <= q <= p, sum q = alpha}``."""
    order = sorted(range(len(x)), key=lambda i: x[i], reverse=True)
    left = alpha
    acc = 0 * alpha
    for i in order:
        take = min(p[i], left)
        acc += take * x[i]
        left -= take
        if left <= 0:
            break
    return acc / alpha


def avar_pieces(p, alpha, cap=12):
    """Vertices of the AVaR risk envelope ``{q : 0 <= q <= p/alpha, sum q = 1}``."""
    n = len(p)
    if n > cap:
        return None
    out = set()
    for r in range(n + 1):
        for full in itertools.combinations(range(n), r):
            mass = sum((p[i] for i in full), 0 * alpha)
            if mass > alpha:
                continue
            base = [p[i] if i in full else 0 * alpha for i in range(n)]
            if mass == alpha:
                out.add(tuple(v / alpha for v in base))
                continue
            for k in range(n):
                if k not in full and mass + p[k] >= alpha:
                    q = list(base)
                    q[k] = alpha - mass
                    out.add(tuple(v / alpha for v in q))
    return tuple(sorted(out))


def local_avar(P, alpha):
    if not 0 < alpha <= 1:
        raise ValidationError(f"AVaR level must lie in (0, 1], got {alpha}")
    p = _weights_on_support(P)
    return LocalFunctional(
        f"avar({alpha})",
        lambda x: avar_local(p, x, alpha),
        linear_pieces=avar_pieces(p, alpha),
    )


# -- the functional -----------------------------------------------------------


@dataclass(frozen=True, eq=False)
class RiskFunctional:
    family: PriorFamily
    evaluate: Callable
    kind: str = CONVEX
    cash_additive: bool = False
    monotone: bool = False
    reduction_family: Optional[tuple] = None
    linear_pieces: Optional[tuple] = None
    smooth_pieces: Optional[tuple] = None
    penalty: Optional[Callable] = None
    name: str = "functional"
    _memo: dict = field(default_factory=dict, repr=False)

    def __call__(self, X):
        return self.evaluate(as_qs(X, self.family))

    def conjugate_cached(self, mu):
        key = tuple(mu)
        if key not in self._memo:
            self._memo[key] = _closed_penalty(self, key)
        return self._memo[key]


def _lift(P, local_vec, n, zero):
    full = [zero] * n
    for i, v in zip(sorted(P.support), local_vec):
        full[i] = v
    return tuple(full)


def build_sup_functional(Q, per_prior, family, *, kind=None, cash_additive=None, monotone=None, name="sup"):
    """``f(X) = max_{P in Q} f_P(X restricted to support(P))``, with reduction family ``Q``.

    ``per_prior[k]`` is a :class:`LocalFunctional` or a plain callable on
    the restricted vector; metadata (convexity, monotonicity, cash
    additivity, linear or smooth structure) is inherited only when every
    local functional declares it.
    """
    Q = tuple(P if isinstance(P, Prior) else Prior(tuple(P)) for P in Q)
    if not Q or len(Q) != len(per_prior):
        raise ValidationError("need one local functional per prior")
    for k, P in enumerate(Q):
        if len(P) != family.n:
            raise ValidationError(f"prior {k} lives on a different sample space")
        if not P.support <= family.qs_support:
            raise DominationError(f"prior {k} charges an outcome that is polar for the family")
    locals_ = [
        f if isinstance(f, LocalFunctional) else LocalFunctional("custom", f, convex=False, monotone=False, cash_additive=False)
        for f in per_prior
    ]

    def evaluate(X):
        return max(loc.evaluate(restrict_to_prior(X, P)) for P, loc in zip(Q, locals_))

    n = family.n
    linear = None
    if all(loc.linear_pieces is not None for loc in locals_):
        pieces = []
        for P, loc in zip(Q, locals_):
            zero = 0 * P.weights[0]
            pieces.extend(_lift(P, v, n, zero) for v in loc.linear_pieces)
        linear = tuple(dict.fromkeys(pieces))
    smooth = None
    if linear is None and all(loc.smooth is not None for loc in locals_):
        smooth = tuple(_lift_smooth(P, loc.smooth, n) for P, loc in zip(Q, locals_))
    penalty = None
    if len(Q) == 1 and locals_[0].penalty is not None:
        P, loc = Q[0], locals_[0]
        sup = sorted(P.support)

        def penalty(mu, P=P, loc=loc, sup=sup):
            if any(not is_zero(mu[i]) for i in range(n) if i not in P.support):
                return INF
            return loc.penalty([mu[i] for i in sup])

    if kind is None:
        kind = CONVEX if all(loc.convex for loc in locals_) else QUASICONVEX
    if cash_additive is None:
        cash_additive = all(loc.cash_additive for loc in locals_)
    if monotone is None:
        monotone = all(loc.monotone for loc in locals_)
    return RiskFunctional(
        family,
        evaluate,
        kind=kind,
        cash_additive=cash_additive,
        monotone=monotone,
        reduction_family=Q,
        linear_pieces=linear,
        smooth_pieces=smooth,
        penalty=penalty,
        name=name,
    )


def _lift_smooth(P, smooth, n):
    sup = sorted(P.support)

    def piece(y):
        v, g = smooth(np.asarray([y[i] for i in sup], dtype=float))
        grad = np.zeros(n)
        grad[sup] = g
        return v, grad

    return piece


def worst_case(family, priors=None):
    """``max_{P} E_P[X]`` over ``priors`` (default: the whole family)."""
    priors = family.priors if priors is None else priors
    return build_sup_functional(priors, [local_expectation(P) for P in priors], family, name="worst_case")


def expectation(family, prior=0):
    P = family.priors[prior] if isinstance(prior, int) else prior
    return build_sup_functional([P], [local_expectation(P)], family, name="expectation")


def entropic(family, priors=None):
    """Robust entropic risk ``max_P log E_P[exp(X)]``."""
    priors = family.priors if priors is None else priors
    return build_sup_functional(priors, [local_entropic(P) for P in priors], family, name="entropic")


def avar(family, alpha=Fraction(1, 2), priors=None):
    """Robust average value-at-risk: worst case of per-prior upper-tail AVaR."""
    priors = family.priors if priors is None else priors
    return build_sup_functional(priors, [local_avar(P, alpha) for P in priors], family, name=f"avar({alpha})")


ZOO = {
    "worst_case": lambda family, **kw: worst_case(family),
    "expectation": lambda family, prior=0, **kw: expectation(family, prior),
    "entropic": lambda family, **kw: entropic(family),
    "avar": lambda family, alpha=Fraction(1, 2), **kw: avar(family, alpha),
}


def from_name(name, family, **kw):
    try:
        factory = ZOO[name]
    except KeyError:
        raise ValidationError(f"unknown functional {name!r}; choose from {sorted(ZOO)}") from None
    return factory(family, **kw)


# -- conjugates -----------------------------------------------------------------


@dataclass(frozen=True)
class PenaltyValue:
    measure: MeasureVector
    value: object
    method: str
    argmax: Optional[tuple] = None


def _hull_penalty(pieces, mu):
    """0 if ``mu`` is a convex combination of ``pieces``, else ``inf``."""
    exact = all_exact(mu) and all(all_exact(p) for p in pieces)
    mode = EXACT if exact else FLOAT
    k = len(pieces)
    lp = LinearProgram(k, mode=mode)
    for i in range(len(mu)):
        lp.add_constraint([p[i] for p in pieces], "==", mu[i])
    lp.add_constraint([1] * k, "==", 1)
    feasible = lp.solve().status != INFEASIBLE
    if feasible:
        return Fraction(0) if exact else 0.0
    return INF


def _closed_penalty(f, mu):
    if f.penalty is not None:
        return f.penalty(mu)
    if f.linear_pieces is not None:
        return _hull_penalty(f.linear_pieces, mu)
    return None


def _check_measure(f, mu):
    if not isinstance(mu, MeasureVector):
        mu = MeasureVector(tuple(mu))
    if len(mu) != f.family.n:
        raise ValidationError("measure dimension does not match the sample space")
    if not mu.nonnegative:
        raise ValidationError("conjugate is only defined here for nonnegative measures")
    if not mu.is_dominated(f.family):
        raise ValidationError("measure charges a polar outcome")
    return mu


def _grid_values(M, h):
    k = int(math.floor(M / h + 1e-12))
    return [i * h for i in range(-k, k + 1)]


def _embed(family, y_support):
    full = [0.0] * family.n
    for i, v in zip(family.support_list, y_support):
        full[i] = float(v)
    return full


def _grid_search(objective, dims, M, h):
    """Maximize ``objective`` over ``{-M, -M+h, ..., M}^dims``: exhaustively
    when small, else by cyclic coordinate sweeps over the same grid."""
    values = _grid_values(M, h)
    if len(values) ** dims <= GRID_CAP:
        best, arg = -INF, None
        for y in itertools.product(values, repeat=dims):
            v = objective(y)
            if v > best:
                best, arg = v, y
        return best, arg
    y = [0.0] * dims
    best = objective(y)
    improved = True
    while improved:
        improved = False
        for i in range(dims):
            keep = y[i]
            for v in values:
                y[i] = v
                val = objective(y)
                if val > best + 1e-15:
                    best, keep, improved = val, v, True
            y[i] = keep
    return best, tuple(y)


def _smooth_conjugate(f, mu, M):
    sup = f.family.support_list
    n = f.family.n
    m = np.asarray([float(mu[i]) for i in sup])
    pieces = f.smooth_pieces
    dims = len(sup)

    def full(y):
        z = np.zeros(n)
        z[sup] = y
        return z

    def obj(v):
        return v[-1] - m @ v[:-1]

    def obj_grad(v):
        g = np.empty(dims + 1)
        g[:-1] = -m
        g[-1] = 1.0
        return g

    cons = []
    for piece in pieces:
        cons.append(
            {
                "type": "ineq",
                "fun": lambda v, piece=piece: v[-1] - piece(full(v[:-1]))[0],
                "jac": lambda v, piece=piece: np.concatenate([-piece(full(v[:-1]))[1][sup], [1.0]]),
            }
        )
    bounds = [(-M, M)] * dims + [(None, None)]
    best_val, best_y = -INF, None
    for start in (np.zeros(dims), np.clip(np.log(np.maximum(m, 1e-12) * dims), -M, M)):
        s0 = max(p(full(start))[0] for p in pieces)
        res = minimize(obj, np.concatenate([start, [s0]]), jac=obj_grad, bounds=bounds, constraints=cons,
                       method="SLSQP", options={"maxiter": 500, "ftol": 1e-14})
        y = np.clip(res.x[:-1], -M, M)
        val = float(m @ y) - float(f(_embed(f.family, y)))
        if val > best_val:
            best_val, best_y = val, tuple(float(v) for v in y)
    return best_val, best_y


def conjugate(f, mu, box=8, grid=DEFAULT_GRID):
    """``f*(mu) = sup_Y { int Y dmu - f(Y) }``.

    Closed forms are used when available (``method="closed_form"``); the
    worst-case family decides hull membership exactly. Otherwise the sup is
    searched over ``Y`` in the box ``[-box, box]`` on the q.s. support, and
    the returned value is a lower bound for the true conjugate.
    """
    mu = _check_measure(f, mu)
    if box <= 0 or grid <= 0:
        raise ValidationError("box radius and grid step must be positive")
    closed = f.conjugate_cached(mu.masses)
    if closed is not None:
        return PenaltyValue(mu, closed, "closed_form")
    sup = f.family.support_list
    if f.smooth_pieces is not None:
        val, y = _smooth_conjugate(f, mu.masses, float(box))
        return PenaltyValue(mu, val, "smooth", y)
    m = [float(mu.masses[i]) for i in sup]

    def objective(y):
        return sum(a * b for a, b in zip(m, y)) - float(f(_embed(f.family, y)))

    val, y = _grid_search(objective, len(sup), float(box), float(grid))
    return PenaltyValue(mu, val, "grid", y)


# -- simplex discretization -----------------------------------------------------


def simplex_grid(dims, K, exact=True):
    """Barycentric grid of mesh ``1/K`` on the probability simplex in
    ``dims`` coordinates (vertices included)."""
    one = Fraction(1, K) if exact else 1.0 / K
    for cuts in itertools.combinations(range(K + dims - 1), dims - 1):
        prev = -1
        parts = []
        for c in cuts + (K + dims - 1,):
            parts.append(c - prev - 1)
            prev = c
        yield tuple(p * one for p in parts)


def _probe_measures(f, K, exact):
    fam = f.family
    sup = fam.support_list
    n = fam.n
    zero = Fraction(0) if exact else 0.0
    seen = {}

    def add(q):
        key = tuple(q)
        if key not in seen:
            seen[key] = True

    def full(local):
        v = [zero] * n
        for i, q in zip(sup, local):
            v[i] = q
        return tuple(v)

    for P in fam.priors:
        add(tuple(P.weights))
    for P in f.reduction_family or ():
        add(tuple(P.weights))
    for piece in f.linear_pieces or ():
        if all(a >= 0 for a in piece) and sum(piece) == 1:
            add(piece)
    for local in simplex_grid(len(sup), K, exact):
        add(full(local))
    return list(seen)


def _as_payoff(f, X):
    X = as_qs(X, f.family)
    return X


def _dual_value(f, X, mu, box, grid):
    pen = conjugate(f, mu, box, grid).value
    if pen == INF:
        return -INF
    return sum((m * x for m, x in zip(mu, X.values)), 0 * X.values[0] if all_exact(mu) else 0.0) - pen


@dataclass(frozen=True)
class BidualResult:
    value: object
    measure: tuple
    probes: int


def bidual_convex_search(f, X, K=DEFAULT_K, refine=12, box=None, grid=DEFAULT_GRID, mass_levels=None):
    if f.kind != CONVEX:
        raise ContractError("bidual_convex needs a convex functional")
    if not f.monotone:
        raise ContractError("bidual_convex needs a monotone functional")
    X = _as_payoff(f, X)
    exact = all_exact(X.values) and f.family.mode == EXACT
    if box is None:
        box = 8 * max(1, qs_norm(X))
    probes = _probe_measures(f, K, exact)
    if not f.cash_additive:
        levels = mass_levels or [Fraction(k, 4) for k in range(9)]
        probes = [tuple(lvl * q for q in mu) for lvl in levels for mu in probes]
    best, arg = -INF, None
    for mu in probes:
        v = _dual_value(f, X, mu, box, grid)
        if v > best:
            best, arg = v, mu
    count = len(probes)
    if refine and arg is not None:
        best, arg, extra = _refine(f, X, arg, best, K, refine, box, grid, exact)
        count += extra
    return BidualResult(best, arg, count)


def _refine(f, X, mu, best, K, levels, box, grid, exact):
    """Local ascent on the simplex by pairwise mass transfers (and, for
    non-cash-additive ``f``, rescaling) with halving step sizes."""
    sup = f.family.support_list
    step = Fraction(1, 2 * K) if exact else 0.5 / K
    count = 0
    mu = list(mu)
    for _ in range(levels):
        improved = True
        rounds = 0
        while improved and rounds < 50:
            improved = False
            rounds += 1
            moves = [(i, j) for i in sup for j in sup if i != j]
            for i, j in moves:
                if mu[i] < step:
                    continue
                cand = list(mu)
                cand[i] -= step
                cand[j] += step
                count += 1
                v = _dual_value(f, X, cand, box, grid)
                if v > best:
                    best, mu, improved = v, cand, True
            if not f.cash_additive:
                for factor in (1 + step, 1 - step):
                    cand = [q * factor for q in mu]
                    count += 1
                    v = _dual_value(f, X, cand, box, grid)
                    if v > best:
                        best, mu, improved = v, cand, True
        step = step / 2
    return best, tuple(mu), count


def bidual_convex(f, X, K=DEFAULT_K, refine=12, box=None, grid=DEFAULT_GRID):
    """``sup_mu { int X dmu - f*(mu) }`` over a discretized set of
    nonnegative measures (probabilities when ``f`` is cash additive)."""
    return bidual_convex_search(f, X, K, refine, box, grid).value


# -- quasiconvex dual -------------------------------------------------------------


@dataclass(frozen=True)
class QuasiDualValue:
    t: object
    measure: tuple
    value: object
    sweep: tuple  # (t', inner value) pairs, infeasible slices omitted
    infeasible: bool = False
    method: str = ""


def inner_slice_min(f, mu, t, box, grid=DEFAULT_GRID):
    """``inf { f(Y) : int Y dmu = t, |Y| <= box on the support }``; ``inf`` if
    the slice is empty."""
    fam = f.family
    sup = fam.support_list
    m = [mu[i] for i in sup]
    reach = box * sum(m)
    if t > reach or t < -reach:
        return INF, "infeasible"
    if f.linear_pieces is not None:
        exact = all_exact(m) and all(all_exact(p) for p in f.linear_pieces) and all_exact([t, box])
        mode = EXACT if exact else FLOAT
        dims = len(sup)
        obj = [0] * dims + [1]
        lp = LinearProgram(dims + 1, obj, mode=mode, bounds=[(-box, box)] * dims + [(None, None)])
        for piece in f.linear_pieces:
            lp.add_constraint([-piece[i] for i in sup] + [1], ">=", 0)
        lp.add_constraint(m + [0], "==", t)
        res = lp.solve()
        if res.status == INFEASIBLE:
            return INF, "infeasible"
        return res.value, "lp"
    if f.smooth_pieces is not None and f.kind == CONVEX:
        return _smooth_slice(f, m, float(t), float(box)), "smooth"
    return _grid_slice(f, m, float(t), float(box), float(grid)), "grid"


def _smooth_slice(f, m, t, M):
    fam = f.family
    sup = fam.support_list
    n = fam.n
    dims = len(sup)
    m = np.asarray([float(v) for v in m])

    def full(y):
        z = np.zeros(n)
        z[sup] = y
        return z

    cons = [{"type": "eq", "fun": lambda v: m @ v[:-1] - t, "jac": lambda v: np.concatenate([m, [0.0]])}]
    for piece in f.smooth_pieces:
        cons.append(
            {
                "type": "ineq",
                "fun": lambda v, piece=piece: v[-1] - piece(full(v[:-1]))[0],
                "jac": lambda v, piece=piece: np.concatenate([-piece(full(v[:-1]))[1][sup], [1.0]]),
            }
        )
    start = np.full(dims, t / max(m.sum(), 1e-300))
    start = np.clip(start, -M, M)
    s0 = max(p(full(start))[0] for p in f.smooth_pieces)
    res = minimize(lambda v: v[-1], np.concatenate([start, [s0]]),
                   jac=lambda v: np.concatenate([np.zeros(dims), [1.0]]),
                   bounds=[(-M, M)] * dims + [(None, None)], constraints=cons, method="SLSQP",
                   options={"maxiter": 500, "ftol": 1e-14})
    y = np.clip(res.x[:-1], -M, M)
    return float(f(_embed(fam, y)))


def _grid_slice(f, m, t, M, h):
    """Grid search on the slice: every support coordinate but the one with
    the largest weight ranges over the box grid; that one is solved for."""
    fam = f.family
    dims = len(m)
    k = max(range(dims), key=lambda i: m[i])
    mk = float(m[k])
    others = [i for i in range(dims) if i != k]

    def objective(z):
        y = [0.0] * dims
        rest = 0.0
        for i, v in zip(others, z):
            y[i] = v
            rest += float(m[i]) * v
        y[k] = (t - rest) / mk
        if abs(y[k]) > M + 1e-12:
            return -INF
        return -float(f(_embed(fam, y)))

    if not others:
        return -objective(())
    best, _ = _grid_search(objective, len(others), M, h)
    return -best if best > -INF else INF


def quasi_R(f, t, mu, box=None, eps_schedule=DEFAULT_EPS, grid=DEFAULT_GRID):
    """``R(t, mu) = sup_{t' < t} inf { f(Y) : int Y dmu = t' }``.

    The outer sup runs over ``t' = t - eps`` for the decreasing schedule;
    slices the box cannot reach are skipped. If none is reachable and they
    all lie below the box, the lowest reachable slice stands in (flagged
    ``infeasible``); above the box the value is ``inf``. The left limit at ``t`` is
    estimated by linear extrapolation through the two finest points and used
    when it exceeds the sampled sup (it is exact for piecewise-linear inner
    values, such as all LP-backed functionals).
    """
    if isinstance(mu, MeasureVector):
        mu = mu.masses
    mu = tuple(mu)
    if len(mu) != f.family.n:
        raise ValidationError("measure dimension does not match the sample space")
    if any(q < 0 and not is_zero(q) for q in mu):
        raise ValidationError("quasi_R needs a nonnegative measure")
    if not MeasureVector(mu).is_dominated(f.family):
        raise ValidationError("measure charges a polar outcome")
    if box is None:
        box = 8 * max(1, abs(t))
    sweep = []
    method = ""
    for eps in eps_schedule:
        tp = t - eps
        v, method_k = inner_slice_min(f, mu, tp, box, grid)
        if method_k != "infeasible":
            method = method_k
            sweep.append((tp, v))
    if not sweep:
        reach = box * sum(mu[i] for i in f.family.support_list)
        if t - eps_schedule[0] < -reach:
            # every slice lies below the box: fall back to its lowest slice
            v, method_k = inner_slice_min(f, mu, -reach, box, grid)
            return QuasiDualValue(t, mu, v, ((-reach, v),), True, f"boundary_{method_k}")
        return QuasiDualValue(t, mu, INF, (), True, "infeasible")
    value = max(v for _, v in sweep)
    if len(sweep) >= 2 and sweep[-1][0] > sweep[-2][0]:
        (t1, v1), (t2, v2) = sweep[-2], sweep[-1]
        if v1 != INF and v2 != INF:
            limit = v2 + (v2 - v1) * (t - t2) / (t2 - t1)
            if limit > value:
                value = limit
    return QuasiDualValue(t, mu, value, tuple(sweep), False, method)


def bidual_quasiconvex(f, X, K=DEFAULT_K, box=None, eps_schedule=DEFAULT_EPS, grid=DEFAULT_GRID):
    """``sup_P R(E_P[X], P)`` over the discretized probability simplex."""
    if f.kind not in (CONVEX, QUASICONVEX):
        raise ContractError("bidual_quasiconvex needs a quasiconvex functional")
    if not f.monotone:
        raise ContractError("bidual_quasiconvex needs a monotone functional")
    if not f.reduction_family:
        raise ContractError("bidual_quasiconvex needs a P-sensitive functional (reduction family)")
    X = as_qs(X, f.family)
    exact = all_exact(X.values) and f.family.mode == EXACT
    if box is None:
        box = 8 * max(1, qs_norm(X))
    # weak duality caps the sup at f(X); probing the likeliest maximizers
    # (largest E_P[X] first) lets the search stop as soon as the cap is hit
    cap = f(X)
    tol = 0 if exact else 1e-12
    expect = lambda P: sum((p * x for p, x in zip(P, X.values)), 0 * X.values[0])
    special = {tuple(P.weights) for P in f.family.priors + tuple(f.reduction_family or ())}
    special.update(tuple(p) for p in f.linear_pieces or ())
    probes = _probe_measures(f, K, exact)
    ordered = sorted((P for P in probes if P in special), key=expect, reverse=True)
    ordered += [P for P in probes if P not in special]
    best = -INF
    for P in ordered:
        r = quasi_R(f, expect(P), P, box, eps_schedule, grid)
        if r.value > best:
            best = r.value
        if best >= cap - tol:
            break
    return best


# -- continuity -----------------------------------------------------------------


@dataclass(frozen=True)
class ContinuityVerdict:
    passed: bool
    mode: str
    witness: Optional[int]
    values: tuple
    target: object


def continuity_checks(f, sequence, X, mode="fatou", tol=1e-9, lipschitz=None, tail=None):
    """Finite analogs of the Fatou property and of continuity from below.

    ``fatou``: ``f(X) <= min over the tail of f(X_n) + tol``.
    ``monotone``: ``f(X_n)`` nondecreasing, never above ``f(X)``, and the
    last term within tolerance of ``f(X)``.

    A finite sequence only approaches its limit, so the tolerance is widened
    by ``lipschitz * ||X - X_n||``. The default constant is 1 for monotone
    cash-additive functionals (which are 1-Lipschitz in the q.s. sup norm) and
    0 otherwise, i.e. the sequence must then reach ``X`` on the support.
    """
    if X is None:
        raise ValidationError("continuity check needs the q.s. limit X")
    if not sequence:
        raise ValidationError("empty sequence")
    if mode not in ("fatou", "monotone"):
        raise ValidationError(f"unknown continuity mode {mode!r}")
    fam = f.family
    X = as_qs(X, fam)
    seq = [as_qs(Y, fam) for Y in sequence]
    for k, Y in enumerate(seq):
        if any(not math.isfinite(v) for v in Y.values):
            raise ValidationError(f"sequence element {k} is unbounded")
    if mode == "monotone":
        for k in range(1, len(seq)):
            if not qs_leq(seq[k - 1], seq[k]):
                raise ValidationError(f"sequence is not q.s. nondecreasing at index {k}")
        for k, Y in enumerate(seq):
            if not qs_leq(Y, X):
                raise ValidationError(f"sequence element {k} exceeds the limit X")
    if lipschitz is None:
        lipschitz = 1 if (f.monotone and f.cash_additive) else 0
    target = f(X)
    values = tuple(f(Y) for Y in seq)
    dist = [float(qs_norm(Y - X)) for Y in seq]
    if mode == "fatou":
        start = len(seq) // 2 if tail is None else max(0, len(seq) - tail)
        for k in range(start, len(seq)):
            if float(target) > float(values[k]) + tol + lipschitz * dist[k]:
                return ContinuityVerdict(False, mode, k, values, target)
        return ContinuityVerdict(True, mode, None, values, target)
    for k in range(1, len(seq)):
        if float(values[k]) < float(values[k - 1]) - tol:
            return ContinuityVerdict(False, mode, k, values, target)
    for k, v in enumerate(values):
        if float(v) > float(target) + tol:
            return ContinuityVerdict(False, mode, k, values, target)
    last = len(seq) - 1
    if abs(float(target) - float(values[last])) > tol + lipschitz * dist[last]:
        return ContinuityVerdict(False, mode, last, values, target)
    return ContinuityVerdict(True, mode, None, values, target)


# -- P-sensitivity --------------------------------------------------------------


@dataclass(frozen=True)
class HalfspaceSet:
    """``{X : a_i . X <= b_i on the q.s. support}``."""

    family: PriorFamily
    rows: tuple = ()

    def __contains__(self, X):
        X = as_qs(X, self.family)
        sup = self.family.qs_support
        for a, b in self.rows:
            lhs = sum(a[i] * X.values[i] for i in sup)
            if lhs > b and not is_zero(lhs - b):
                return False
        return True


def level_set(f, a):
    """``{X : f(X) <= a}`` in halfspace form when ``f`` is piecewise linear,
    else as a membership oracle."""
    if f.linear_pieces is not None:
        return HalfspaceSet(f.family, tuple((p, a) for p in f.linear_pieces))
    return lambda X: f(X) <= a


@dataclass(frozen=True)
class SensitivityVerdict:
    status: str  # certified_ok | violation | no_violation_found
    witness: Optional[tuple] = None
    method: str = ""

    @property
    def ok(self):
        return self.status != "violation"


def sensitivity_check(A, Q, family, probes=64, seed=0, box=4):
    """Is ``A`` decided prior by prior over the reduction family ``Q``?

    Looks for ``X`` outside ``A`` such that for every ``P in Q`` some member
    of ``A`` agrees with ``X`` on ``support(P)``. For halfspace sets the
    answer is exact: ``certified_ok`` straight away when each inequality only
    involves outcomes inside one ``support(P)``, otherwise one LP per
    inequality. A bare membership oracle gets a seeded random search whose
    best outcome is ``no_violation_found``.
    """
    Q = tuple(P if isinstance(P, Prior) else Prior(tuple(P)) for P in Q)
    for k, P in enumerate(Q):
        if not P.support <= family.qs_support:
            raise DominationError(f"reduction prior {k} charges a polar outcome")
    if isinstance(A, HalfspaceSet):
        return _halfspace_sensitivity(A, Q, family)
    return _probe_sensitivity(A, Q, family, probes, seed, box)


def _halfspace_sensitivity(A, Q, family):
    sup = family.qs_support
    supports = [P.support for P in Q]
    if all(any({i for i in sup if not is_zero(a[i])} <= s for s in supports) for a, _ in A.rows):
        return SensitivityVerdict("certified_ok", method="support_entailment")
    order = family.support_list
    n = len(order)
    exact = all(all_exact([a[i] for i in order] + [b]) for a, b in A.rows)
    mode = EXACT if exact else FLOAT
    nv = n * (1 + len(Q))
    for a, b in A.rows:
        obj = [a[i] for i in order] + [0] * (n * len(Q))
        lp = LinearProgram(nv, obj, sense="max", mode=mode, bounds=[(None, None)] * nv)
        lp.add_constraint(obj, "<=", b + 1)
        for q, P in enumerate(Q):
            off = n * (1 + q)
            for a2, b2 in A.rows:
                row = [0] * nv
                for k, i in enumerate(order):
                    row[off + k] = a2[i]
                lp.add_constraint(row, "<=", b2)
            for k, i in enumerate(order):
                if i in P.support:
                    row = [0] * nv
                    row[k] = 1
                    row[off + k] = -1
                    lp.add_constraint(row, "==", 0)
        res = lp.solve()
        if res.optimal and is_positive(res.value - b):
            X = [0 * res.value] * family.n
            for k, i in enumerate(order):
                X[i] = res.x[k]
            return SensitivityVerdict("violation", tuple(X), "lp_entailment")
    return SensitivityVerdict("certified_ok", method="lp_entailment")


def _probe_sensitivity(member, Q, family, probes, seed, box):
    rng = random.Random(seed)
    sup = family.support_list
    n = family.n
    grid = [Fraction(k, 4) for k in range(-4 * box, 4 * box + 1)]

    def rand_vec():
        v = [Fraction(0)] * n
        for i in sup:
            v[i] = rng.choice(grid)
        return v

    pool = [rand_vec() for _ in range(probes)] + [[Fraction(-box)] * n]
    for X in pool[:probes]:
        if member(QsVector(X, family)):
            continue
        ok_all = True
        for P in Q:
            found = False
            for Z in pool:
                Y = [X[i] if i in P.support else Z[i] for i in range(n)]
                if member(QsVector(Y, family)):
                    found = True
                    break
            if not found:
                ok_all = False
                break
        if ok_all:
            return SensitivityVerdict("violation", tuple(X), "probe")
    return SensitivityVerdict("no_violation_found", method="probe")


def spot_check(f, samples=20, seed=0, scale=4):
    """Randomized check of the declared monotonicity and cash additivity and
    of invariance under changes on polar outcomes; returns a list of failure
    messages (empty on success)."""
    rng = random.Random(seed)
    fam = f.family
    n = fam.n
    exact = fam.mode == EXACT and f.smooth_pieces is None
    tol = 0 if exact else 1e-9

    def vec():
        return [Fraction(rng.randint(-4 * scale, 4 * scale), 4) if exact else rng.uniform(-scale, scale) for _ in range(n)]

    failures = []
    polar = [i for i in range(n) if i not in fam.qs_support]
    for _ in range(samples):
        X = vec()
        fx = f(X)
        if polar:
            Z = list(X)
            for i in polar:
                Z[i] = Z[i] + 7
            if abs(f(Z) - fx) > tol:
                failures.append("value depends on polar outcomes")
        if f.cash_additive:
            k = Fraction(rng.randint(-8, 8), 4) if exact else rng.uniform(-2, 2)
            if abs(f([x + k for x in X]) - (fx + k)) > tol:
                failures.append("cash additivity fails")
        if f.monotone:
            Y = [x + (Fraction(rng.randint(0, 4), 4) if exact else rng.uniform(0, 1)) for x in X]
            if f(Y) < fx - tol:
                failures.append("monotonicity fails")
    return failures
