"""Dense two-phase simplex over exact rationals or floats.

The kernel solves small linear programs exactly: with ``Fraction`` data every
pivot is exact, Bland's rule guarantees termination, and the optimum is
certified by the complementary dual solution read off the final tableau
(primal feasibility, dual feasibility and zero gap are re-checked in the
original data before a result is returned).

A float path shares the same code with an absolute pivot tolerance of
``1e-9``.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from fractions import Fraction

from .errors import InvariantError, ValidationError
from .numeric import EXACT, FLOAT, check_mode, convert

try:
    from gmpy2 import mpq as _rational
except ImportError:  # pragma: no cover
    _rational = Fraction

log = logging.getLogger(__name__)

FLOAT_TOL = 1e-9

OPTIMAL = "optimal"
INFEASIBLE = "infeasible"
UNBOUNDED = "unbounded"

_SENSES = ("<=", ">=", "==")


@dataclass(frozen=True)
class LPResult:
    status: str
    value: object = None
    x: tuple = ()
    duals: tuple = ()
    pivots: int = 0

    @property
    def optimal(self):
        return self.status == OPTIMAL

    @property
    def feasible(self):
        return self.status in (OPTIMAL, UNBOUNDED)


@dataclass
class LinearProgram:
    """``min``/``max`` of ``objective . x`` subject to linear constraints.

    ``bounds[k]`` is ``(lo, hi)`` with ``None`` meaning unbounded on that
    side; the default for every variable is ``(0, None)``.

    ``duals`` of an optimal result are sensitivities ``d value / d rhs_i`` of
    the explicit constraints, in the order they were added.
    """

    nvars: int
    objective: list = None
    sense: str = "min"
    mode: str = EXACT
    bounds: list = None
    constraints: list = field(default_factory=list)

    def __post_init__(self):
        check_mode(self.mode)
        if self.sense not in ("min", "max"):
            raise ValidationError(f"unknown objective sense {self.sense!r}")
        if self.objective is None:
            self.objective = [0] * self.nvars
        if len(self.objective) != self.nvars:
            raise ValidationError("objective length does not match nvars")
        self.objective = [convert(c, self.mode) for c in self.objective]
        if self.bounds is None:
            self.bounds = [(0, None)] * self.nvars
        self.bounds = [
            (None if lo is None else convert(lo, self.mode), None if hi is None else convert(hi, self.mode))
            for lo, hi in self.bounds
        ]

    def add_constraint(self, coeffs, sense, rhs):
        """Append ``coeffs . x  sense  rhs``. ``coeffs`` is dense or a
        ``{index: coefficient}`` mapping."""
        if sense not in _SENSES:
            raise ValidationError(f"unknown constraint sense {sense!r}")
        if isinstance(coeffs, dict):
            row = [0] * self.nvars
            for k, v in coeffs.items():
                row[k] = v
        else:
            row = list(coeffs)
        if len(row) != self.nvars:
            raise ValidationError("constraint length does not match nvars")
        self.constraints.append(([convert(a, self.mode) for a in row], sense, convert(rhs, self.mode)))
        return len(self.constraints) - 1

    def set_free(self, *indices):
        for k in indices:
            self.bounds[k] = (None, None)

    def solve(self):
        return _solve(self)


def _to_fraction(q):
    return Fraction(int(q.numerator), int(q.denominator))


def _solve(lp):
    mode = lp.mode
    if mode == EXACT:
        num = _rational
        back = _to_fraction
    else:
        num = float
        back = float
    tol = 0 if mode == EXACT else FLOAT_TOL
    zero, one = num(0), num(1)

    # Substitute every original variable by nonnegative standard columns.
    subst = []  # per variable: (offset, [(col, coef), ...])
    ncols = 0
    extra_rows = []  # (col, ub) meaning z_col <= ub
    for lo, hi in lp.bounds:
        lo = None if lo is None else num(lo)
        hi = None if hi is None else num(hi)
        if lo is not None:
            subst.append((lo, [(ncols, one)]))
            if hi is not None:
                if hi < lo:
                    return LPResult(INFEASIBLE)
                extra_rows.append((ncols, hi - lo))
            ncols += 1
        elif hi is not None:
            subst.append((hi, [(ncols, -one)]))
            ncols += 1
        else:
            subst.append((zero, [(ncols, one), (ncols + 1, -one)]))
            ncols += 2

    rows = []  # (dense std coeffs without slacks, sense, rhs, origin index or None)
    for i, (coeffs, sense, rhs) in enumerate(lp.constraints):
        std = [zero] * ncols
        b = num(rhs)
        for k, a in enumerate(coeffs):
            if a == 0:
                continue
            a = num(a)
            off, cols = subst[k]
            b = b - a * off
            for col, coef in cols:
                std[col] += a * coef
        rows.append((std, sense, b, i))
    for col, ub in extra_rows:
        std = [zero] * ncols
        std[col] = one
        rows.append((std, "<=", ub, None))

    nslack = sum(1 for r in rows if r[1] != "==")
    m = len(rows)
    n = ncols + nslack
    width = n + m + 1  # structural + slack, artificial, rhs

    tableau = []
    row_sign = []
    s = ncols
    for std, sense, b, _ in rows:
        row = std + [zero] * (nslack + m + 1)
        if sense == "<=":
            row[s] = one
            s += 1
        elif sense == ">=":
            row[s] = -one
            s += 1
        row[-1] = b
        sign = 1
        if b < 0:
            row = [-v for v in row]
            sign = -1
        tableau.append(row)
        row_sign.append(sign)
    for i in range(m):
        tableau[i][n + i] = one
    basis = [n + i for i in range(m)]

    cost = [zero] * width
    flip = -1 if lp.sense == "max" else 1
    const = zero
    for k, c in enumerate(lp.objective):
        c = num(c)
        off, cols = subst[k]
        const += c * off
        for col, coef in cols:
            cost[col] += flip * c * coef

    pivots = 0

    def pivot(r, c):
        nonlocal pivots
        pivots += 1
        prow = tableau[r]
        p = prow[c]
        if p != 1:
            prow = [v / p for v in prow]
            tableau[r] = prow
        nz = [j for j, v in enumerate(prow) if v != 0]
        for i in range(len(tableau)):
            if i == r:
                continue
            row = tableau[i]
            f = row[c]
            if f == 0:
                continue
            for j in nz:
                row[j] -= f * prow[j]
            if mode == FLOAT:
                row[c] = 0.0
        basis[r] = c

    def run(obj_index, allowed):
        objrow = tableau[obj_index]
        while True:
            entering = None
            for j in range(width - 1):
                if allowed[j] and objrow[j] < -tol:
                    entering = j
                    break
            if entering is None:
                return OPTIMAL
            best = None
            leave = None
            for i in range(m):
                a = tableau[i][entering]
                if a > tol:
                    ratio = tableau[i][-1] / a
                    if leave is None or ratio < best - tol or (ratio <= best + tol and basis[i] < basis[leave]):
                        best, leave = ratio, i
            if leave is None:
                return UNBOUNDED
            pivot(leave, entering)

    # Phase 1: minimize the sum of artificials.
    phase1 = [zero] * width
    for i in range(m):
        for j in range(n):
            phase1[j] -= tableau[i][j]
        phase1[-1] -= tableau[i][-1]
    tableau.append(phase1)
    allowed = [True] * n + [False] * m + [False]
    run(m, allowed)
    if -tableau[m][-1] > tol:
        return LPResult(INFEASIBLE, pivots=pivots)
    tableau.pop()

    # Drive zero-level artificials out of the basis where possible.
    for i in range(m):
        if basis[i] >= n:
            for j in range(n):
                if abs(tableau[i][j]) > tol:
                    pivot(i, j)
                    break

    # Phase 2.
    objrow = list(cost)
    for i in range(m):
        cb = cost[basis[i]]
        if cb != 0:
            row = tableau[i]
            for j in range(width):
                objrow[j] -= cb * row[j]
    tableau.append(objrow)
    status = run(m, allowed)
    if status == UNBOUNDED:
        return LPResult(UNBOUNDED, pivots=pivots)
    objrow = tableau.pop()

    z = [zero] * n
    for i in range(m):
        if basis[i] < n:
            z[basis[i]] = tableau[i][-1]
    y_std = [-objrow[n + i] for i in range(m)]

    x = []
    for off, cols in subst:
        v = off
        for col, coef in cols:
            v += coef * z[col]
        x.append(v)
    value_min = sum((cost[j] * z[j] for j in range(ncols)), zero)

    _certify(lp, rows, row_sign, cost, z, y_std, ncols, n, tol)

    value = back(flip * value_min + const)
    duals = []
    for i, (_, _, _, origin) in enumerate(rows):
        if origin is not None:
            duals.append(back(flip * row_sign[i] * y_std[i]))
    x = [back(v) for v in x]
    if mode == FLOAT:
        x = [0.0 if abs(v) <= FLOAT_TOL else v for v in x]
    return LPResult(OPTIMAL, value, tuple(x), tuple(duals), pivots)


def _certify(lp, rows, row_sign, cost, z, y_std, ncols, n, tol):
    """Re-check optimality in the standard-form data (before pivoting)."""
    slack_tol = 0 if lp.mode == EXACT else 1e-7
    primal = 0
    dual = 0
    s = ncols
    for i, (std, sense, b, _) in enumerate(rows):
        lhs = sum((a * zj for a, zj in zip(std, z[:ncols]) if a != 0), 0)
        slack = 0
        if sense != "==":
            slack = z[s] if sense == "<=" else -z[s]
            s += 1
        if abs(lhs + slack - b) > slack_tol:
            raise InvariantError(f"LP certificate: primal row {i} violated")
        dual += row_sign[i] * b * y_std[i]
    # Reduced costs of structural and slack columns must be nonnegative.
    col_dual = [0] * n
    s = ncols
    for i, (std, sense, _, _) in enumerate(rows):
        yi = row_sign[i] * y_std[i]
        for j, a in enumerate(std):
            if a != 0:
                col_dual[j] += a * yi
        if sense != "==":
            col_dual[s] += yi if sense == "<=" else -yi
            s += 1
    for j in range(n):
        cj = cost[j] if j < ncols else 0
        if cj - col_dual[j] < -slack_tol:
            raise InvariantError(f"LP certificate: dual column {j} infeasible")
    primal = sum((cost[j] * z[j] for j in range(ncols)), 0)
    if abs(primal - dual) > slack_tol * max(1, abs(primal)):
        raise InvariantError(f"LP certificate: duality gap {primal - dual}")
