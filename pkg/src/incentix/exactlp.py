"""Exact rational linear programming via two-phase primal simplex.

Solves

    min/max  c . x   subject to  A x {<=, >=, ==} b,  x >= 0

entirely in rational arithmetic: no floating point enters the pivot
path, so returned optima are exact and the optimal basis is a function
of the input alone (Bland's smallest-index rule for both the entering
and leaving variable, which also rules out cycling).

Internally every instance is rewritten to the canonical pair

    (P) min c.x   s.t. G x >= g, x >= 0
    (D) max g.y   s.t. G^T y <= c, y >= 0

with maximization negated and equality rows expanded into paired
inequalities.  After phase 2 the dual vector is recovered from the
final basis by an exact linear solve, mapped back to one multiplier per
original row, and the quadruple (primal feasibility, dual feasibility,
complementary slackness, equal objective values) is verified exactly;
a violation raises instead of returning a wrong certificate.

Dual sign convention on original rows: for a minimization, >= rows have
y >= 0 and <= rows have y <= 0; for a maximization the signs flip; ==
rows are unrestricted.  In all cases  b . y  equals the optimal value.

Hot arithmetic runs on gmpy2.mpq (identical semantics to
fractions.Fraction, roughly an order of magnitude faster); the public
interface speaks Fraction.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from typing import Sequence

from gmpy2 import mpq

from .model import as_rational

ROW_SENSES = ("<=", ">=", "==")

OPTIMAL = "optimal"
INFEASIBLE = "infeasible"
UNBOUNDED = "unbounded"

_MAX_PIVOTS = 500_000


class PivotLimit(RuntimeError):
    """Exceeded the pivot safety cap; indicates a solver bug, not an
    unsolvable instance (Bland's rule terminates finitely)."""


@dataclass(frozen=True)
class LinearProgram:
    """An LP over nonnegative variables.

    sense: "min" or "max".
    c: objective coefficients, length nvar.
    rows: constraint matrix, one tuple per row.
    senses: one of "<=", ">=", "==" per row.
    b: right hand sides.
    """

    sense: str
    c: tuple[Fraction, ...]
    rows: tuple[tuple[Fraction, ...], ...]
    senses: tuple[str, ...]
    b: tuple[Fraction, ...]

    def __post_init__(self):
        if self.sense not in ("min", "max"):
            raise ValueError(f"sense must be 'min' or 'max', got {self.sense!r}")
        object.__setattr__(self, "c", tuple(as_rational(v) for v in self.c))
        object.__setattr__(
            self, "rows", tuple(tuple(as_rational(v) for v in row) for row in self.rows)
        )
        object.__setattr__(self, "senses", tuple(self.senses))
        object.__setattr__(self, "b", tuple(as_rational(v) for v in self.b))
        nvar = len(self.c)
        if any(len(row) != nvar for row in self.rows):
            raise ValueError("constraint row length differs from objective length")
        if not len(self.rows) == len(self.senses) == len(self.b):
            raise ValueError("rows, senses, and b must have equal lengths")
        for s in self.senses:
            if s not in ROW_SENSES:
                raise ValueError(f"unknown row sense {s!r}")

    @property
    def nvar(self) -> int:
        return len(self.c)


@dataclass(frozen=True)
class LpSolution:
    """status is "optimal", "infeasible", or "unbounded"; value, primal,
    and dual are exact and present only when optimal.  dual carries one
    multiplier per original row and satisfies b . dual == value."""

    status: str
    value: Fraction | None = None
    primal: tuple[Fraction, ...] | None = None
    dual: tuple[Fraction, ...] | None = None


def solve(lp: LinearProgram) -> LpSolution:
    """Solve exactly; see the module docstring for conventions."""
    minimize = lp.sense == "min"
    c = [mpq(v) if minimize else -mpq(v) for v in lp.c]

    # Canonicalize rows to >=; remember how each maps back to an original row.
    canon_rows: list[list] = []
    canon_b: list = []
    # (orig_row, mult): y_min[orig] += mult * y_canonical
    backmap: list[tuple[int, int]] = []
    for r, (row, sense, rhs) in enumerate(zip(lp.rows, lp.senses, lp.b)):
        qrow = [mpq(v) for v in row]
        qrhs = mpq(rhs)
        if sense in (">=", "=="):
            canon_rows.append(qrow)
            canon_b.append(qrhs)
            backmap.append((r, 1))
        if sense in ("<=", "=="):
            canon_rows.append([-v for v in qrow])
            canon_b.append(-qrhs)
            backmap.append((r, -1))

    status, x, y_canon = _simplex_min_ge(c, canon_rows, canon_b)
    if status != OPTIMAL:
        return LpSolution(status=status)

    value_min = sum((ci * xi for ci, xi in zip(c, x)), mpq(0))
    y_min = [mpq(0)] * len(lp.rows)
    for (orig, mult), yv in zip(backmap, y_canon):
        y_min[orig] += mult * yv

    if minimize:
        value, primal, dual = value_min, x, y_min
    else:
        value, primal, dual = -value_min, x, [-v for v in y_min]

    _check_certificates(lp, value, primal, dual)
    return LpSolution(
        status=OPTIMAL,
        value=_fr(value),
        primal=tuple(_fr(v) for v in primal),
        dual=tuple(_fr(v) for v in dual),
    )


def _fr(q) -> Fraction:
    return Fraction(int(q.numerator), int(q.denominator))


def _check_certificates(lp: LinearProgram, value, primal, dual) -> None:
    # Exact optimality proof: feasibility both sides, complementary
    # slackness, and matching objective values.  Any failure is a bug.
    minimize = lp.sense == "min"
    for row, sense, rhs, y in zip(lp.rows, lp.senses, lp.b, dual):
        act = sum((mpq(a) * x for a, x in zip(row, primal)), mpq(0))
        if sense == ">=" and not act >= rhs:
            raise RuntimeError("primal certificate violates a >= row")
        if sense == "<=" and not act <= rhs:
            raise RuntimeError("primal certificate violates a <= row")
        if sense == "==" and act != rhs:
            raise RuntimeError("primal certificate violates an == row")
        if sense != "==":
            expected_sign = 1 if (sense == ">=") == minimize else -1
            if y * expected_sign < 0:
                raise RuntimeError("dual multiplier has the wrong sign")
        if y != 0 and act != rhs:
            raise RuntimeError("complementary slackness (rows) fails")
    for j in range(lp.nvar):
        reduced = mpq(lp.c[j]) - sum(
            (mpq(lp.rows[r][j]) * dual[r] for r in range(len(lp.rows))), mpq(0)
        )
        if minimize and reduced < 0:
            raise RuntimeError("dual certificate infeasible (min)")
        if not minimize and reduced > 0:
            raise RuntimeError("dual certificate infeasible (max)")
        if primal[j] != 0 and reduced != 0:
            raise RuntimeError("complementary slackness (columns) fails")
    dual_value = sum((mpq(b) * y for b, y in zip(lp.b, dual)), mpq(0))
    if dual_value != value:
        raise RuntimeError("strong duality check failed")


def _simplex_min_ge(c, rows, b):
    """Two-phase simplex for min c.x s.t. rows.x >= b, x >= 0 (all mpq).

    Returns (status, x, y) where y is the exact dual of the >= system
    (y >= 0, b.y = c.x at optimum).
    """
    m = len(rows)
    n = len(c)
    zero = mpq(0)
    one = mpq(1)

    if m == 0:
        # Unconstrained over the nonnegative orthant.
        if any(v < 0 for v in c):
            return UNBOUNDED, None, None
        return OPTIMAL, [zero] * n, []

    # Working equality system W xs = wb with xs = (x, s), surplus s >= 0.
    # Row i of the canonical system is  rows[i].x - s_i = b_i; rows with
    # b_i <= 0 are negated so every working rhs is nonnegative and the
    # surplus column can serve as the initial basic variable.
    ncols = n + m
    work: list[list] = []
    wb: list = []
    flip = [False] * m
    art_rows = []
    for i in range(m):
        if b[i] <= 0:
            flip[i] = True
            wrow = [-v for v in rows[i]] + [zero] * m
            wrow[n + i] = one
            work.append(wrow)
            wb.append(-b[i])
        else:
            wrow = list(rows[i]) + [zero] * m
            wrow[n + i] = -one
            work.append(wrow)
            wb.append(b[i])
            art_rows.append(i)

    # Frozen copy for the dual solve later (tableau rows mutate in place).
    base_cols = [row[:] for row in work]

    # Tableau rows carry the rhs as their last entry.  Artificial columns
    # (one per art_row) sit after the surplus block.
    nart = len(art_rows)
    total = ncols + nart
    tableau = []
    basis = [0] * m
    for i in range(m):
        trow = work[i] + [zero] * nart + [wb[i]]
        tableau.append(trow)
        basis[i] = n + i  # surplus; overwritten below for artificial rows
    for k, i in enumerate(art_rows):
        tableau[i][ncols + k] = one
        basis[i] = ncols + k

    pivots = 0

    def pivot(r: int, e: int, costrow: list) -> None:
        nonlocal pivots
        pivots += 1
        if pivots > _MAX_PIVOTS:
            raise PivotLimit(f"exceeded {_MAX_PIVOTS} pivots")
        prow = tableau[r]
        piv = prow[e]
        if piv != 1:
            inv = 1 / piv
            prow = [v * inv for v in prow]
            tableau[r] = prow
        for i in range(m):
            if i != r:
                f = tableau[i][e]
                if f:
                    trow = tableau[i]
                    tableau[i] = [a - f * p for a, p in zip(trow, prow)]
        f = costrow[e]
        if f:
            costrow[:] = [a - f * p for a, p in zip(costrow, prow)]
        basis[r] = e

    def run(costrow: list, banned_from: int) -> str:
        # Bland: entering = smallest eligible column with negative reduced
        # cost; leaving = smallest-index basic variable among the minimum
        # ratios.  banned_from truncates the eligible column range.
        while True:
            enter = -1
            for j in range(banned_from):
                if costrow[j] < 0:
                    enter = j
                    break
            if enter < 0:
                return OPTIMAL
            leave = -1
            best = None
            for i in range(m):
                coef = tableau[i][enter]
                if coef > 0:
                    ratio = tableau[i][-1] / coef
                    if best is None or ratio < best or (
                        ratio == best and basis[i] < basis[leave]
                    ):
                        best = ratio
                        leave = i
            if leave < 0:
                return UNBOUNDED
            pivot(leave, enter, costrow)

    # Phase 1: drive the artificials to zero.
    if nart:
        costrow = [zero] * (total + 1)
        for j in range(total):
            acc = zero
            for i in art_rows:
                acc += tableau[i][j]
            costrow[j] = (one if j >= ncols else zero) - acc
        acc = zero
        for i in art_rows:
            acc += tableau[i][-1]
        costrow[-1] = -acc
        status = run(costrow, total)
        if status != OPTIMAL:  # pragma: no cover - phase 1 is always bounded
            raise RuntimeError("phase 1 reported unbounded")
        if costrow[-1] != 0:
            return INFEASIBLE, None, None
        # Degenerate leftovers: swap any basic artificial for a real
        # column.  W has full row rank (every row owns a surplus column),
        # so the search below always finds a pivot.
        for r in range(m):
            if basis[r] >= ncols:
                for j in range(ncols):
                    if tableau[r][j] != 0:
                        pivot(r, j, costrow)
                        break
                else:  # pragma: no cover - unreachable by rank argument
                    raise RuntimeError("could not remove artificial variable")

    # Phase 2 on the true objective; artificial columns are banned.
    cost_ext = list(c) + [zero] * m
    costrow = [zero] * (total + 1)
    for j in range(ncols):
        acc = cost_ext[j]
        for i in range(m):
            cb = cost_ext[basis[i]]
            if cb:
                acc -= cb * tableau[i][j]
        costrow[j] = acc
    acc = zero
    for i in range(m):
        cb = cost_ext[basis[i]]
        if cb:
            acc += cb * tableau[i][-1]
    costrow[-1] = -acc
    status = run(costrow, ncols)
    if status != OPTIMAL:
        return UNBOUNDED, None, None

    x = [zero] * n
    for i in range(m):
        if basis[i] < n:
            x[basis[i]] = tableau[i][-1]

    # Dual from the final basis: solve y . B = c_B on the frozen working
    # matrix, then undo the row negations.
    mat = [[base_cols[i][basis[k]] for i in range(m)] for k in range(m)]
    rhs = [cost_ext[basis[k]] for k in range(m)]
    y_work = _solve_linear(mat, rhs)
    y = [-v if flip[i] else v for i, v in enumerate(y_work)]
    return OPTIMAL, x, y


def _solve_linear(mat, rhs):
    """Exact Gaussian elimination for a square nonsingular system."""
    k = len(mat)
    aug = [row[:] + [rhs[i]] for i, row in enumerate(mat)]
    for col in range(k):
        piv = next((r for r in range(col, k) if aug[r][col] != 0), None)
        if piv is None:  # pragma: no cover - basis matrices are nonsingular
            raise RuntimeError("singular basis matrix")
        aug[col], aug[piv] = aug[piv], aug[col]
        prow = aug[col]
        inv = 1 / prow[col]
        if inv != 1:
            aug[col] = prow = [v * inv for v in prow]
        for r in range(k):
            if r != col:
                f = aug[r][col]
                if f:
                    aug[r] = [a - f * p for a, p in zip(aug[r], prow)]
    return [aug[r][-1] for r in range(k)]
