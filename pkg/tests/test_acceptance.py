"""Acceptance suite: one test per criterion, each printing a PASS/FAIL line.

Run alone with ``pytest tests/test_acceptance.py -v`` (the summary lines are
written past pytest's output capture).
"""

import random
import time
from fractions import Fraction as F

import pytest

from qsure import core, generators, market, risk
from qsure.core import Prior, PriorFamily, SampleSpace, as_qs
from qsure.errors import InvariantError
from qsure.files import load
from qsure.market import Strategy
from qsure.risk import HalfspaceSet

pytestmark = pytest.mark.acceptance


@pytest.fixture
def report(capsys):
    def emit(number, ok, detail):
        with capsys.disabled():
            print(f"\n[criterion {number:>2}] {'PASS' if ok else 'FAIL'}  {detail}")
        assert ok, detail

    return emit


def _family(rng, n, k=None, polar=None):
    return generators.random_family(rng, n, k=k, polar=polar)


# 1 ------------------------------------------------------------------------------------

def test_criterion_01_superhedging_duality(report):
    start = time.perf_counter()
    cases = exact_bad = float_bad = 0
    worst_float_gap = 0.0
    for seed in range(220):
        rng = random.Random(seed)
        n = rng.randint(2, 32)
        fam = _family(rng, n, k=rng.randint(1, 8), polar=rng.randint(0, n // 4))
        model = generators.random_market(rng, n, rng.randint(1, 3), rng.randint(1, 2), fam)
        X = generators.random_payoff(rng, n)
        res = market.superhedge(model, fam, X)
        exact_bad += res.gap != 0 or res.price != res.dual_value
        fres = market.superhedge(model.to_mode("float"), fam.to_mode("float"), [float(x) for x in X])
        worst_float_gap = max(worst_float_gap, abs(fres.gap))
        float_bad += abs(fres.gap) > 1e-8
        cases += 1
    elapsed = time.perf_counter() - start
    ok = cases >= 200 and exact_bad == 0 and float_bad == 0 and elapsed <= 120
    report(1, ok, f"{cases} models, exact gaps nonzero: {exact_bad}, float max gap {worst_float_gap:.2e}, "
                  f"{elapsed:.1f}s (limit 120s)")


# 2 ------------------------------------------------------------------------------------

def test_criterion_02_ftap_equivalence(report):
    total = agree = arbitrage = polar = planted_missed = 0
    for seed in range(560):
        rng = random.Random(10_000 + seed)
        n = rng.randint(1, 10)
        want_polar = seed % 3 == 0 and n > 1
        fam = _family(rng, n, polar=rng.randint(1, n - 1) if want_polar else 0)
        planted = seed % 4 == 1
        model = generators.random_market(rng, n, rng.randint(1, 3), rng.randint(1, 2), fam, arbitrage=planted)
        try:
            rep = market.ftap_check(model, fam)
            ok = rep.agree and rep.na.no_arbitrage == rep.polytope_equivalent_to_family
        except InvariantError:
            ok = False
            rep = None
        total += 1
        agree += ok
        if rep is not None and not rep.na.no_arbitrage:
            arbitrage += 1
        planted_missed += planted and rep is not None and rep.na.no_arbitrage
        polar += len(fam.qs_support) < n
    ok = total >= 500 and agree == total and arbitrage >= 50 and polar >= 50 and planted_missed == 0
    report(2, ok, f"{agree}/{total} agree; {arbitrage} arbitrage models, {polar} with polar outcomes")


# 3 ------------------------------------------------------------------------------------

def test_criterion_03_bipolar_identity(report):
    total = agree = members = 0
    seed = 0
    while total < 220:
        rng = random.Random(20_000 + seed)
        seed += 1
        n = rng.randint(1, 12)
        fam = _family(rng, n, polar=rng.randint(0, n - 1))
        model = generators.random_market(rng, n, rng.randint(1, 3), rng.randint(1, 2), fam)
        if rng.random() < 0.5:
            X = generators.random_payoff(rng, n)
        else:
            cols = market._hedge_columns(model)
            H = Strategy.from_blocks(model, {c: F(rng.randint(-4, 4), 2) for c in cols})
            shift = F(rng.randint(-2, 1), 4)
            X = tuple(g + shift for g in market.gains(model, H))
        try:
            v = market.bipolar_check(model, fam, X)
            ok = v.agree
            members += v.member
        except InvariantError:
            ok = False
        total += 1
        agree += ok
    ok = agree == total
    report(3, ok, f"{agree}/{total} (model, payoff) pairs agree; {members} cone members")


# 4 ------------------------------------------------------------------------------------

def test_criterion_04_binomial_golden(report):
    mf = load("binomial")
    res = market.superhedge(mf.model, mf.family, mf.payoff("call"), mode="exact")
    strategy = res.strategy.block_values(mf.model)
    ok = (
        mf.model.prices == (((1, 1),), ((2, F(1, 2)),))
        and res.price == F(1, 3)
        and strategy == {(1, 0, 0): F(2, 3)}
        and res.dual_measure == (F(1, 3), F(2, 3))
        and res.gap == 0
    )
    report(4, ok, f"price {res.price}, strategy {strategy[(1, 0, 0)]}, dual {res.dual_measure}")


# 5 ------------------------------------------------------------------------------------

def test_criterion_05_convex_bidual(report):
    exact_cases = exact_ok = 0
    for seed in range(110):
        rng = random.Random(30_000 + seed)
        n = rng.randint(1, 5)
        fam = _family(rng, n, k=rng.randint(1, 4), polar=rng.randint(0, n - 1))
        f = risk.worst_case(fam)
        X = generators.random_payoff(rng, n)
        b = risk.bidual_convex(f, X)
        direct = max(P.expectation(as_qs(X, fam).values) for P in fam.priors)
        exact_cases += 1
        exact_ok += isinstance(b, F) and b == direct == f(X)
    ent_cases = ent_ok = 0
    worst = 0.0
    for seed in range(30):
        rng = random.Random(31_000 + seed)
        n = rng.randint(2, 4)
        fam = _family(rng, n, k=rng.randint(1, 4), polar=rng.randint(0, 1))
        f = risk.entropic(fam)
        X = generators.random_payoff(rng, n)
        v, b = f(X), risk.bidual_convex(f, X)
        # relative error; at f(X) = 0 the absolute error is used
        err = abs(b - v) / abs(v) if v != 0 else abs(b - v)
        worst = max(worst, err)
        ent_cases += 1
        ent_ok += err <= 1e-3 and b <= v + 1e-9
    ok = exact_cases >= 100 and exact_ok == exact_cases and ent_ok == ent_cases
    report(5, ok, f"worst-case exact {exact_ok}/{exact_cases}; entropic {ent_ok}/{ent_cases} "
                  f"within 1e-3 (max rel err {worst:.1e})")


# 6 ------------------------------------------------------------------------------------

def test_criterion_06_quasiconvex_bidual(report):
    cases = {"expectation": [0, 0], "worst_case": [0, 0]}
    mus = mono = 0
    worst = 0.0
    for seed in range(55):
        rng = random.Random(40_000 + seed)
        n = rng.randint(1, 5)
        fam = _family(rng, n, k=rng.randint(1, 4), polar=rng.randint(0, n - 1))
        X = generators.random_payoff(rng, n)
        for name, f in (("expectation", risk.expectation(fam, rng.randrange(len(fam)))), ("worst_case", risk.worst_case(fam))):
            b = risk.bidual_quasiconvex(f, X)
            err = abs(float(b) - float(f(X)))
            worst = max(worst, err)
            cases[name][0] += 1
            cases[name][1] += err <= 1e-6
            tested = [f.family.priors[0].weights]
            grid = list(risk._probe_measures(f, 4, True))
            tested.append(grid[rng.randrange(len(grid))])
            for mu in tested:
                ts = [F(k - 10, 2) for k in range(20)]
                box = 8 * max(abs(t) for t in ts)
                vals = [risk.quasi_R(f, t, mu, box=box).value for t in ts]
                mus += 1
                mono += all(a <= b for a, b in zip(vals, vals[1:]))
    ok = all(c >= 50 and good == c for c, good in cases.values()) and mono == mus
    report(6, ok, f"expectation {cases['expectation'][1]}/{cases['expectation'][0]}, worst-case "
                  f"{cases['worst_case'][1]}/{cases['worst_case'][0]} within 1e-6 (max err {worst:.1e}); "
                  f"R monotone for {mono}/{mus} measures")


# 7 ------------------------------------------------------------------------------------

def test_criterion_07_sensitivity(report):
    total = passed = certified = 0
    for seed in range(60):
        rng = random.Random(50_000 + seed)
        n = rng.randint(1, 5)
        fam = _family(rng, n, k=rng.randint(1, 4), polar=rng.randint(0, n - 1))
        Q = [fam.priors[k] for k in sorted(rng.sample(range(len(fam)), rng.randint(1, len(fam))))]
        outputs = [
            risk.build_sup_functional(Q, [risk.local_expectation(P) for P in Q], fam),
            risk.build_sup_functional(Q, [risk.local_avar(P, F(1, 2)) for P in Q], fam),
            risk.build_sup_functional(Q, [risk.local_neg_expectation(P) for P in Q], fam),
            risk.build_sup_functional(Q, [risk.local_entropic(P) for P in Q], fam),
        ]
        for f in outputs:
            level = F(rng.randint(-4, 4), 2)
            v = risk.sensitivity_check(risk.level_set(f, level), f.reduction_family, fam, seed=seed)
            total += 1
            passed += v.ok
            certified += v.status == "certified_ok"
    fam = PriorFamily.from_weights([(F(1, 2), F(1, 2))])
    A = HalfspaceSet(fam, (((1, 0), 0),))
    fixture = risk.sensitivity_check(A, [Prior((0, 1))], fam)
    witness_ok = fixture.status == "violation" and fixture.witness not in A
    ok = passed == total and witness_ok
    report(7, ok, f"{passed}/{total} sup-functional level sets pass ({certified} certified); "
                  f"violation fixture -> {fixture.status} witness {fixture.witness}")


# 8 ------------------------------------------------------------------------------------

def test_criterion_08_reduction(report):
    total = good = 0
    for seed in range(220):
        rng = random.Random(60_000 + seed)
        n = rng.randint(1, 12)
        fam = _family(rng, n, k=rng.randint(1, 8), polar=rng.randint(0, n - 1))
        red = core.reduce_family(fam)
        ok = (
            core.family_dominance(fam, red) == core.EQUIVALENT
            and len(red) <= len(fam.qs_support)
            and all(P in fam.priors for P in red.priors)
        )
        total += 1
        good += ok
    report(8, good == total and total >= 200, f"{good}/{total} reduced families equivalent and small enough")


# 9 ------------------------------------------------------------------------------------

def test_criterion_09_order_completeness(report):
    total = good = 0
    for seed in range(220):
        rng = random.Random(70_000 + seed)
        n = rng.randint(1, 8)
        fam = _family(rng, n, k=rng.randint(1, 5), polar=rng.randint(0, n - 1))
        D = [generators.random_payoff(rng, n) for _ in range(rng.randint(1, 6))]
        s = core.ess_sup(fam, D)
        upper = all(core.qs_leq(Y, s, fam) for Y in D)
        # any other upper bound, built independently of ess_sup, dominates it
        Z = [max(Y[i] for Y in D) + F(rng.randint(0, 4), 2) for i in range(n)]
        for i in range(n):
            if i not in fam.qs_support:
                Z[i] = F(-100)
        least = core.qs_leq(s, Z, fam)
        tight = all(any(Y[i] == s[i] for Y in D) for i in fam.qs_support)
        total += 1
        good += upper and least and tight
    patch_total = patch_good = 0
    for seed in range(60):
        rng = random.Random(71_000 + seed)
        n = rng.randint(1, 8)
        blocks, idx = [], list(range(n))
        rng.shuffle(idx)
        while idx:
            cut = rng.randint(1, len(idx))
            blocks.append(sorted(idx[:cut]))
            idx = idx[cut:]
        if rng.random() < 0.5 and len(blocks) > 1:
            blocks.pop()  # leave some outcomes polar
        rows = []
        for b in blocks:
            raw = {i: rng.randint(1, 5) for i in b}
            tot = sum(raw.values())
            rows.append(tuple(F(raw.get(i, 0), tot) for i in range(n)))
        fam = PriorFamily(SampleSpace.of_size(n), tuple(Prior(r) for r in rows))
        D = [generators.random_payoff(rng, n) for _ in range(rng.randint(1, 5))]
        # patchwork oracle: per block, the essential sup is the max over the block's outcomes
        oracle = [F(0)] * n
        for b in blocks:
            for i in b:
                oracle[i] = max(Y[i] for Y in D)
        pw = core.patchwork_sup(fam, D)
        patch_total += 1
        patch_good += pw.values == tuple(oracle) == core.ess_sup(fam, D).values
    ok = total >= 200 and good == total and patch_good == patch_total
    report(9, ok, f"least upper bound {good}/{total}; patchwork formula exact {patch_good}/{patch_total}")


# 10 -----------------------------------------------------------------------------------

def _monotone_sequence(rng, X, n, support, eventually_equal):
    Z = [F(rng.randint(1, 8), 2) for _ in range(n)]
    length = rng.randint(8, 30)
    seq = []
    for k in range(length):
        if eventually_equal and k >= length - 3:
            seq.append(tuple(X))
        else:
            seq.append(tuple(x - z / 2 ** k for x, z in zip(X, Z)))
    return seq


def test_criterion_10_continuity(report):
    total = good = 0
    for seed in range(110):
        rng = random.Random(80_000 + seed)
        n = rng.randint(2, 8)
        fam = _family(rng, n, k=rng.randint(1, 4), polar=rng.randint(0, n // 3))
        model = generators.random_market(rng, n, rng.randint(1, 2), rng.randint(1, 2), fam)
        X = generators.random_payoff(rng, n)
        functionals = [risk.worst_case(fam), market.price_functional(model, fam)]
        eventually = seed % 2 == 0
        seq = _monotone_sequence(rng, X, n, fam.qs_support, eventually)
        # eventually-equal sequences get no Lipschitz slack at all, and their
        # liminf is read off the constant tail
        lip, tail = (0, 3) if eventually else (None, None)
        for f in functionals:
            for mode in ("fatou", "monotone"):
                v = risk.continuity_checks(f, seq, X, mode, tol=1e-9, lipschitz=lip, tail=tail)
                total += 1
                good += v.passed
    ok = total >= 100 and good == total
    report(10, ok, f"{good}/{total} checks pass (worst-case and superhedging price, fatou and monotone)")
