from fractions import Fraction as F

import pytest
from hypothesis import given
import hypothesis.strategies as st

from qsure import core
from qsure.core import QsVector, as_qs
from qsure.errors import DominationError, ValidationError

from conftest import families, family, vectors


# -- capacity and sublinear expectation ---------------------------------------

def test_capacity_examples(two_point):
    assert core.capacity(two_point, ["w1"]) == 1
    assert core.capacity(two_point, []) == 0
    assert core.capacity(two_point, ["w1", "w2"]) == 1


def test_capacity_float_family():
    fam = family((1.0, 0.0), (0.5, 0.5))
    assert core.capacity(fam, ["w1"]) == 1.0


def test_capacity_unknown_label(two_point):
    with pytest.raises(ValidationError):
        core.capacity(two_point, ["nope"])


def test_sublinear_expectation_examples():
    assert core.sublinear_expectation(family((1, 0), (0, 1)), (1, -1)) == 1
    assert core.sublinear_expectation(family((1, 0), (0, 1)), (F(7, 3), F(7, 3))) == F(7, 3)
    fam = family((F(1, 2), F(1, 2)), (F(9, 10), F(1, 10)))
    assert core.sublinear_expectation(fam, (2, 1)) == F(19, 10)


def test_sublinear_expectation_dimension_mismatch(two_point):
    with pytest.raises(ValidationError):
        core.sublinear_expectation(two_point, (1, 2, 3))


@given(families(), st.data())
def test_capacity_subadditive_monotone(fam, data):
    n = fam.n
    A = data.draw(st.sets(st.integers(0, n - 1)))
    B = data.draw(st.sets(st.integers(0, n - 1)))
    cA, cB, cAB = core.capacity(fam, A), core.capacity(fam, B), core.capacity(fam, A | B)
    assert cAB <= cA + cB
    assert cA <= cAB and cB <= cAB
    assert (cA == 0) == fam.is_polar(frozenset(A))
    indicator = [1 if i in A else 0 for i in range(n)]
    assert core.sublinear_expectation(fam, indicator) == cA


@given(families(), st.data())
def test_sublinear_expectation_homogeneous_subadditive(fam, data):
    X = data.draw(vectors(fam.n))
    Y = data.draw(vectors(fam.n))
    k = F(data.draw(st.integers(0, 6)), 2)
    e = lambda V: core.sublinear_expectation(fam, V)
    assert e(tuple(x + y for x, y in zip(X, Y))) <= e(X) + e(Y)
    assert e(tuple(k * x for x in X)) == k * e(X)


# -- polar sets and the q.s. order ---------------------------------------------

def test_polar_analysis_examples():
    assert core.polar_analysis(family((1, 0))) == ({"w1"}, {"w2"})
    assert core.polar_analysis(family((1, 0), (0, 1))) == ({"w1", "w2"}, set())
    assert core.polar_analysis(family((F(1, 2), F(1, 2), 0))) == ({"w1", "w2"}, {"w3"})


@given(families())
def test_polar_analysis_partition(fam):
    support, polar = core.polar_analysis(fam)
    assert support | polar == set(fam.space.outcomes) and not support & polar
    for lbl in fam.space.outcomes:
        assert (core.capacity(fam, [lbl]) > 0) == (lbl in support)


def test_qs_compare_examples():
    fam = family((1, 0))
    assert core.qs_compare((0, 5), (1, -9), fam) == core.LEQ
    full = family((F(1, 2), F(1, 2)))
    assert core.qs_compare((3, 4), (3, 4), full) == core.EQ
    assert core.qs_compare((0, 1), (1, 0), full) == core.INCOMPARABLE
    assert core.qs_compare((2, 1), (1, 0), full) == core.GEQ


@given(families(), st.data())
def test_qs_order_is_partial_order(fam, data):
    X, Y, Z = (as_qs(data.draw(vectors(fam.n)), fam) for _ in range(3))
    assert core.qs_compare(X, X) == core.EQ
    if core.qs_leq(X, Y) and core.qs_leq(Y, Z):
        assert core.qs_leq(X, Z)
    if core.qs_leq(X, Y) and core.qs_leq(Y, X):
        assert X == Y
    rel = core.qs_compare(X, Y)
    assert (rel == core.EQ) == (core.qs_leq(X, Y) and core.qs_leq(Y, X))


def test_qs_vector_canonical_form():
    fam = family((1, 0))
    X = QsVector((5, 7), fam)
    assert X.values == (5, 0)
    assert X.raw == (5, 7)
    assert X == QsVector((5, -100), fam)
    assert hash(X) == hash(QsVector((5, 3), fam))


def test_qs_norm_examples():
    assert core.qs_norm((5, 7), family((1, 0))) == 5
    assert core.qs_norm((0, 0), family((1, 0))) == 0
    assert core.qs_norm((-3, 2), family((F(1, 2), F(1, 2)))) == 3


@given(families(), st.data())
def test_qs_norm_lattice_and_triangle(fam, data):
    X = as_qs(data.draw(vectors(fam.n)), fam)
    Y = as_qs(data.draw(vectors(fam.n)), fam)
    k = F(data.draw(st.integers(-6, 6)), 3)
    assert core.qs_norm(X + Y) <= core.qs_norm(X) + core.qs_norm(Y)
    assert core.qs_norm(X * k) == abs(k) * core.qs_norm(X)
    if core.qs_leq(abs(X), abs(Y)):
        assert core.qs_norm(X) <= core.qs_norm(Y)
    assert (core.qs_norm(X) == 0) == (X == as_qs([0] * fam.n, fam))


# -- essential supremum -----------------------------------------------------------

def test_ess_sup_examples():
    full = family((F(1, 2), F(1, 2)))
    assert core.ess_sup(full, [(1, 0), (0, 1)]).values == (1, 1)
    fam = family((1, 0, 0), (0, 1, 0))
    X = (4, -2, 9)
    assert core.ess_sup(fam, [X]) == as_qs(X, fam)
    assert core.ess_sup(fam, [X]).values == (4, -2, 0)


def test_patchwork_matches_ess_sup_on_diracs():
    fam = family((1, 0), (0, 1))
    D = [(1, 0), (0, 1)]
    # per prior: ess sup under delta_1 is 1, under delta_2 is 1
    expected = (1, 1)
    assert core.patchwork_sup(fam, D).values == expected
    assert core.ess_sup(fam, D).values == expected


def test_patchwork_rejects_overlap(two_point):
    with pytest.raises(ValidationError):
        core.patchwork_sup(two_point, [(1, 0)])


def test_ess_sup_empty(two_point):
    with pytest.raises(ValidationError):
        core.ess_sup(two_point, [])


@given(families(), st.data())
def test_ess_sup_least_upper_bound(fam, data):
    D = data.draw(st.lists(vectors(fam.n), min_size=1, max_size=5))
    s = core.ess_sup(fam, D)
    for Y in D:
        assert core.qs_leq(Y, s, fam)
    bump = data.draw(vectors(fam.n, 0, 3))
    Z = tuple(max(col) + b for col, b in zip(zip(*D), bump))
    assert core.qs_leq(s, Z, fam)


# -- restriction, dominance, reduction ------------------------------------------------

def test_restrict_examples():
    fam = family((F(1, 2), F(1, 2)))
    assert core.restrict_to_prior((3, 9), (1, 0), fam) == (3,)
    assert core.restrict_to_prior((0, 0), (1, 0), fam) == (0,)
    fam3 = family((F(1, 3), F(1, 3), F(1, 3)))
    assert core.restrict_to_prior((1, 2, 3), (F(1, 2), F(1, 2), 0), fam3) == (1, 2)


def test_restrict_rejects_polar_charge():
    fam = family((1, 0))
    with pytest.raises(DominationError):
        core.restrict_to_prior((1, 2), (0, 1), fam)


@given(families(), st.data())
def test_restrict_respects_equivalence(fam, data):
    X = data.draw(vectors(fam.n))
    noise = data.draw(vectors(fam.n))
    Y = tuple(x if i in fam.qs_support else e for i, (x, e) in enumerate(zip(X, noise)))
    for P in fam.priors:
        assert core.restrict_to_prior(X, P, fam) == core.restrict_to_prior(Y, P, fam)


def test_family_dominance_examples():
    F1 = family((F(1, 2), F(1, 2)))
    assert core.family_dominance(F1, family((1, 0))) == core.F2_LL_F1
    assert core.family_dominance(family((1, 0)), F1) == core.F1_LL_F2
    assert core.family_dominance(F1, F1) == core.EQUIVALENT
    assert core.family_dominance(family((1, 0)), family((0, 1))) == core.NEITHER


def test_reduce_examples():
    fam = family((1, 0), (1, 0), (0, 1))
    assert core.reduce_family(fam).priors == (fam.priors[0], fam.priors[2])
    fam = family((F(1, 2), F(1, 2)), (1, 0))
    red = core.reduce_family(fam)
    assert red.priors == (fam.priors[0],)
    assert core.family_dominance(fam, red) == core.EQUIVALENT
    single = family((F(1, 4), F(3, 4)))
    assert core.reduce_family(single).priors == single.priors


def test_reduce_tie_breaking_lowest_index():
    fam = family((F(1, 2), F(1, 2), 0), (0, F(1, 2), F(1, 2)), (F(1, 2), 0, F(1, 2)))
    assert core.reduce_family_indices(fam) == [0, 1]


@given(families(max_n=7, max_k=6))
def test_reduce_equivalent_and_small(fam):
    red = core.reduce_family(fam)
    assert core.family_dominance(fam, red) == core.EQUIVALENT
    assert len(red) <= len(fam.qs_support)
    assert all(P in fam.priors for P in red.priors)


# -- capacity along chains -----------------------------------------------------------

def test_capacity_continuity_examples():
    fam = family((1, 0), (0, 1))
    rep = core.capacity_continuity(fam, [["w1", "w2"], ["w2"], []])
    assert rep.capacities == (1, 1, 0) and rep.limit == 0 and rep.monotone
    assert core.capacity_continuity(fam, [["w1", "w2"], []]).capacities == (1, 0)
    fam3 = family((F(1, 2), F(1, 2), 0))
    rep = core.capacity_continuity(fam3, [["w1", "w2", "w3"], ["w3"], []])
    assert rep.capacities == (1, 0, 0)


def test_capacity_continuity_rejects_non_chain():
    fam = family((1, 0), (0, 1))
    with pytest.raises(ValidationError):
        core.capacity_continuity(fam, [["w1"], ["w2"], []])
    with pytest.raises(ValidationError):
        core.capacity_continuity(fam, [["w1", "w2"], ["w1"]])


# -- value types -----------------------------------------------------------------------

def test_prior_validation():
    with pytest.raises(ValidationError):
        core.Prior((F(1, 2), F(1, 3)))
    with pytest.raises(ValidationError):
        core.Prior((F(3, 2), F(-1, 2)))
    core.Prior((0.1, 0.2, 0.7))


def test_measure_vector():
    fam = family((1, 0, 0), (0, F(1, 2), F(1, 2)))
    mu = core.MeasureVector((F(1, 2), F(1, 2), 0))
    assert mu.nonnegative and mu.is_dominated(fam)
    assert mu.integrate((2, 4, 100)) == 3
    assert not core.MeasureVector((0, 0, 1)).is_dominated(family((1, 0, 0)))
