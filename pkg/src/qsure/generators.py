"""Seeded random instances: prior families, filtrations and markets.

Arbitrage-free markets are built around a martingale measure whose support
is exactly the q.s. support of the family, so NA holds by construction;
``arbitrage=True`` instead plants a one-period sure gain on a non-polar block.
"""

from __future__ import annotations

import random
from fractions import Fraction

from .core import Prior, PriorFamily, SampleSpace
from .market import Filtration, MarketModel
from .numeric import EXACT, convert


def _rng(seed_or_rng):
    return seed_or_rng if isinstance(seed_or_rng, random.Random) else random.Random(seed_or_rng)


def random_weights(rng, support, n):
    raw = {i: rng.randint(1, 6) for i in support}
    total = sum(raw.values())
    return tuple(Fraction(raw.get(i, 0), total) for i in range(n))


def random_family(seed, n, k=None, polar=0, space=None):
    """``k`` priors on ``n`` outcomes, exactly ``polar`` of which are polar
    (``polar=None`` draws it at random)."""
    rng = _rng(seed)
    k = k or rng.randint(1, min(8, n + 1))
    if polar is None:
        polar = rng.randint(0, n - 1)
    polar = min(polar, n - 1)
    support = sorted(rng.sample(range(n), n - polar))
    subsets = [set(rng.sample(support, rng.randint(1, len(support)))) for _ in range(k)]
    for w in support:
        if not any(w in s for s in subsets):
            subsets[rng.randrange(k)].add(w)
    space = space or SampleSpace.of_size(n)
    return PriorFamily(space, tuple(Prior(random_weights(rng, s, n)) for s in subsets))


def random_filtration(seed, n, T):
    rng = _rng(seed)
    parts = [(tuple(range(n)),)]
    for t in range(T):
        blocks = []
        for block in parts[-1]:
            if len(block) == 1:
                blocks.append(block)
                continue
            if t == T - 1 and rng.random() < 0.7:
                blocks.extend((w,) for w in block)
                continue
            cuts = sorted(rng.sample(range(1, len(block)), rng.randint(1, min(3, len(block) - 1))))
            start = 0
            for c in cuts + [len(block)]:
                blocks.append(block[start:c])
                start = c
        parts.append(tuple(blocks))
    return Filtration(tuple(parts))


def random_market(seed, n, T, d, family, arbitrage=False, mode=EXACT):
    rng = _rng(seed)
    fil = random_filtration(rng, n, T)
    support = sorted(family.qs_support)
    Q = random_weights(rng, support, n)
    planted = None
    if arbitrage:
        t0 = rng.randrange(T)
        charged = [b for b, block in enumerate(fil.partitions[t0]) if any(w in family.qs_support for w in block)]
        planted = (t0, rng.choice(charged), rng.randrange(d))

    S = [[[0] * n for _ in range(d)]]
    for j in range(d):
        S[0][j] = [Fraction(rng.randint(2, 10))] * n
    for t in range(T):
        nxt = [[None] * n for _ in range(d)]
        for b, block in enumerate(fil.partitions[t]):
            children = [c for c in fil.partitions[t + 1] if c[0] in block]
            for j in range(d):
                parent = S[t][j][block[0]]
                if planted == (t, b, j):
                    live = [c for c in children if any(w in family.qs_support for w in c)]
                    sure = rng.choice(live)
                    moves = {c: Fraction(rng.randint(0, 2), rng.randint(1, 2)) for c in children}
                    moves[sure] = Fraction(rng.randint(1, 3), rng.randint(1, 2))
                else:
                    moves = {c: Fraction(rng.randint(-4, 4), rng.randint(1, 2)) for c in children}
                    mass = {c: sum(Q[w] for w in c) for c in children}
                    W = sum(mass.values())
                    if W > 0:
                        drift = sum(mass[c] * moves[c] for c in children) / W
                        moves = {c: m - drift for c, m in moves.items()}
                for c in children:
                    for w in c:
                        nxt[j][w] = parent + moves[c]
        S.append(nxt)
    model = MarketModel(family.space, fil, S)
    return model if mode == EXACT else model.to_mode(mode)


def random_payoff(seed, n, mode=EXACT, low=-4, high=4):
    rng = _rng(seed)
    return tuple(convert(Fraction(rng.randint(low * 2, high * 2), 2), mode) for _ in range(n))
