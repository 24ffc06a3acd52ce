"""Substitutability, the incentivizability decision, and mechanism synthesis.

The substitutability of an action j is the least total effort that can
replace one unit of effort on j without hurting any feature:

    kappa_j = min 1.y   s.t.  alpha^T y >= alpha_(j),  y >= 0

and for a set S, with a unit mixture z over S on the right hand side:

    kappa_S = min 1.y   s.t.  alpha^T y >= alpha_S^T z,  1_S.z >= 1,  y, z >= 0.

Both are at most 1 (copying the effort is always feasible).  A profile
x* exhausting the budget is the optimum of some linear mechanism if and
only if kappa over its support equals 1 exactly; in that case a
mechanism is recovered from the dual side:

    max  beta . (A_S(x*)^T x* / B)   s.t.  A(x*) beta <= 1,  beta >= 0

where A(x*)[j][i] = alpha[j][i] * f_i'([alpha^T x*]_i).  The curve
slopes are rationalized (nearest rational, denominator <= 10^12) so the
synthesis LP stays exact; positive slopes cancel row-wise in the
optimality argument, so the rationalization cannot change the verdict
and the LP value is exactly 1 on every incentivizable input.

Everything here is exact: kappa values are Fractions and the equality
test against 1 is rational equality, never a float tolerance.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from typing import Iterable, Sequence

from .agent import KktReport, kkt_verify
from .exactlp import OPTIMAL, LinearProgram, solve
from .model import (
    EffortGraph,
    EffortProfile,
    LinearMechanism,
    partials,
    profile_array,
)

ONE = Fraction(1)

# Nearest-rational precision for curve slopes entering the synthesis LP.
FPRIME_MAX_DENOMINATOR = 10**12

# Float profiles: entries are rationalized to this denominator bound and
# entries below 1e-12 * B are treated as exact zeros (support must be a
# discrete object).
PROFILE_MAX_DENOMINATOR = 10**12
SUPPORT_ZERO_REL = Fraction(1, 10**12)

# Budget mismatch allowance for float profiles.
BUDGET_REL_TOL = 1e-12

# A synthesis LP value farther than this from 1 signals curve-slope
# precision trouble rather than a genuine obstruction.
DEGENERATE_LP_TOL = Fraction(1, 10**9)

# Relative slack for the float polytope membership test.
POLYTOPE_REL_TOL = 1e-9


class NotIncentivizable(Exception):
    """Raised by synthesize when the decision fails; carries the kappa
    certificate as the obstruction."""

    def __init__(self, certificate: "KappaCertificate"):
        self.certificate = certificate
        super().__init__(
            f"support {certificate.subset} has substitutability "
            f"{certificate.kappa} < 1"
        )


class DegenerateSynthesis(Exception):
    """Synthesis LP value deviates from 1 beyond tolerance; the curve
    slopes could not be represented faithfully."""


@dataclass(frozen=True)
class KappaCertificate:
    """Exact optimum and witnesses of a substitutability LP.

    witness_y always has length m; witness_z is None for the
    single-action form, otherwise length m with zeros outside the set.
    The witnesses are feasible exactly and 1.y equals kappa exactly
    (both checked by the LP layer's certificate verification).
    """

    kappa: Fraction
    witness_y: tuple[Fraction, ...]
    witness_z: tuple[Fraction, ...] | None
    subset: tuple[int, ...]


@dataclass(frozen=True)
class Decision:
    incentivizable: bool
    certificate: KappaCertificate


@dataclass(frozen=True)
class SynthesisResult:
    beta: LinearMechanism
    lp_value: Fraction
    kkt_residual: float


@dataclass(frozen=True)
class DesignatedFeasibility:
    feasible: bool
    witnesses: tuple[int, ...]


def resolve_action(graph: EffortGraph, j) -> int:
    # Names win; a purely numeric string that is not a name falls back to
    # a positional index so CLI users can say --action 2 on anonymous rows.
    if isinstance(j, str):
        if j in graph.actions:
            return graph.actions.index(j)
        stripped = j.lstrip("-")
        if not stripped.isdigit():
            raise KeyError(f"unknown action {j!r}")
        j = int(j)
    else:
        j = int(j)
    if not 0 <= j < graph.m:
        raise IndexError(f"action index {j} out of range")
    return j


def resolve_subset(graph: EffortGraph, S: Iterable) -> tuple[int, ...]:
    idx = sorted({resolve_action(graph, j) for j in S})
    if not idx:
        raise ValueError("empty action subset")
    return tuple(idx)


def kappa_of_action(graph: EffortGraph, j) -> KappaCertificate:
    """Exact kappa_j with an optimal substitution witness y."""
    j = resolve_action(graph, j)
    target = graph.weights[j]
    # Feature rows where the target is zero read 'nonneg >= 0': vacuous.
    rows_keep = [i for i in range(graph.n) if target[i] != 0]
    if not rows_keep:
        # Inert action: the empty substitution already dominates it.
        return KappaCertificate(
            Fraction(0), tuple([Fraction(0)] * graph.m), None, (j,)
        )
    cols_keep = [
        k for k in range(graph.m) if any(graph.weights[k][i] != 0 for i in rows_keep)
    ]
    lp = LinearProgram(
        sense="min",
        c=tuple(ONE for _ in cols_keep),
        rows=tuple(
            tuple(graph.weights[k][i] for k in cols_keep) for i in rows_keep
        ),
        senses=tuple(">=" for _ in rows_keep),
        b=tuple(target[i] for i in rows_keep),
    )
    sol = solve(lp)
    if sol.status != OPTIMAL:  # pragma: no cover - y = e_j is always feasible
        raise RuntimeError(f"substitutability LP reported {sol.status}")
    y = [Fraction(0)] * graph.m
    for k, v in zip(cols_keep, sol.primal):
        y[k] = v
    if sol.value > 1:  # pragma: no cover - exact guard
        raise RuntimeError("kappa exceeded 1; copying the action refutes this")
    return KappaCertificate(sol.value, tuple(y), None, (j,))


def kappa_of_set(graph: EffortGraph, S: Iterable) -> KappaCertificate:
    """Exact kappa_S with optimal witnesses (y, z)."""
    subset = resolve_subset(graph, S)
    # Variables: y over actions that can matter, then z over S.
    rows_keep = [
        i
        for i in range(graph.n)
        if any(graph.weights[j][i] != 0 for j in subset)
    ]
    cols_y = [
        k for k in range(graph.m) if any(graph.weights[k][i] != 0 for i in rows_keep)
    ]
    ny, nz = len(cols_y), len(subset)
    zero = Fraction(0)
    rows = []
    b = []
    for i in rows_keep:
        rows.append(
            tuple(graph.weights[k][i] for k in cols_y)
            + tuple(-graph.weights[j][i] for j in subset)
        )
        b.append(zero)
    rows.append(tuple(zero for _ in cols_y) + tuple(ONE for _ in subset))
    b.append(ONE)
    lp = LinearProgram(
        sense="min",
        c=tuple(ONE for _ in cols_y) + tuple(zero for _ in subset),
        rows=tuple(rows),
        senses=tuple(">=" for _ in rows),
        b=tuple(b),
    )
    sol = solve(lp)
    if sol.status != OPTIMAL:  # pragma: no cover - y = z = e_j is feasible
        raise RuntimeError(f"substitutability LP reported {sol.status}")
    y = [zero] * graph.m
    for k, v in zip(cols_y, sol.primal[:ny]):
        y[k] = v
    z = [zero] * graph.m
    for j, v in zip(subset, sol.primal[ny:]):
        z[j] = v
    if sol.value > 1:  # pragma: no cover - exact guard
        raise RuntimeError("kappa exceeded 1; copying the mixture refutes this")
    return KappaCertificate(sol.value, tuple(y), tuple(z), subset)


def rational_profile(graph: EffortGraph, x) -> tuple[Fraction, ...]:
    """Exact profile for support extraction.

    Rational entries pass through unchanged; float entries are replaced
    by the nearest rational with denominator <= 10^12 and then snapped
    to zero below 1e-12 * B.
    """
    if isinstance(x, EffortProfile):
        x = x.values
    vals = list(x)
    if len(vals) != graph.m:
        raise ValueError(f"profile has length {len(vals)}, expected {graph.m}")
    cutoff = SUPPORT_ZERO_REL * graph.budget
    out = []
    for v in vals:
        if isinstance(v, float):
            r = Fraction(v).limit_denominator(PROFILE_MAX_DENOMINATOR)
            if abs(r) < cutoff:
                r = Fraction(0)
        else:
            r = Fraction(v)
        if r < 0:
            raise ValueError(f"negative effort entry {v}")
        out.append(r)
    return tuple(out)


def _check_budget(graph: EffortGraph, xr: Sequence[Fraction], had_floats: bool):
    total = sum(xr, Fraction(0))
    if had_floats:
        if abs(float(total - graph.budget)) > BUDGET_REL_TOL * max(
            1.0, float(graph.budget)
        ):
            raise ValueError(
                f"profile sums to {float(total)}, budget is {float(graph.budget)}"
            )
    elif total != graph.budget:
        raise ValueError(f"profile sums to {total}, budget is {graph.budget}")


def decide(graph: EffortGraph, x_star) -> Decision:
    """Is x* the optimum of some linear mechanism?  True iff kappa over
    the support of x* equals 1 exactly; depends only on the support."""
    vals = x_star.values if isinstance(x_star, EffortProfile) else tuple(x_star)
    had_floats = any(isinstance(v, float) for v in vals)
    xr = rational_profile(graph, vals)
    _check_budget(graph, xr, had_floats)
    support = tuple(j for j, v in enumerate(xr) if v > 0)
    cert = kappa_of_set(graph, support)
    return Decision(incentivizable=(cert.kappa == 1), certificate=cert)


def _rationalized_slopes(graph: EffortGraph, xr: Sequence[Fraction]):
    """f_i'([alpha^T x]_i) as exact rationals, nearest within 1e-12."""
    slopes = []
    for i in range(graph.n):
        t = float(sum(graph.weights[j][i] * xr[j] for j in range(graph.m)))
        d = graph.fns[i].deriv(t)
        if not (d >= 0) or d == float("inf"):
            raise DegenerateSynthesis(
                f"curve slope for feature {graph.features[i]!r} is {d}"
            )
        slopes.append(Fraction(d).limit_denominator(FPRIME_MAX_DENOMINATOR))
    return slopes


def synthesize(graph: EffortGraph, x_star) -> SynthesisResult:
    """A mechanism whose best response is x*, or raise.

    Solves the exact synthesis LP on rationalized slopes, checks its
    value against 1, max-normalizes the optimal vertex, and verifies the
    float KKT conditions at x*.
    """
    vals = x_star.values if isinstance(x_star, EffortProfile) else tuple(x_star)
    had_floats = any(isinstance(v, float) for v in vals)
    xr = rational_profile(graph, vals)
    _check_budget(graph, xr, had_floats)
    support = tuple(j for j, v in enumerate(xr) if v > 0)
    cert = kappa_of_set(graph, support)
    if cert.kappa != 1:
        raise NotIncentivizable(cert)

    slopes = _rationalized_slopes(graph, xr)
    # a[j][i] = alpha[j][i] * f_i'; objective weights come from the unit
    # mixture z = x* / sum(x*) restricted to the support.
    total = sum(xr, Fraction(0))
    z = [v / total for v in xr]
    c = [
        sum(graph.weights[j][i] * slopes[i] * z[j] for j in support)
        for i in range(graph.n)
    ]
    rows = tuple(
        tuple(graph.weights[j][i] * slopes[i] for i in range(graph.n))
        for j in range(graph.m)
    )
    lp = LinearProgram(
        sense="max",
        c=tuple(c),
        rows=rows,
        senses=tuple("<=" for _ in rows),
        b=tuple(ONE for _ in rows),
    )
    sol = solve(lp)
    if sol.status != OPTIMAL:  # pragma: no cover - LP is bounded and feasible
        raise RuntimeError(f"synthesis LP reported {sol.status}")
    if abs(sol.value - 1) > DEGENERATE_LP_TOL:
        raise DegenerateSynthesis(
            f"synthesis LP value {sol.value} deviates from 1 beyond tolerance"
        )
    peak = max(sol.primal)
    beta = LinearMechanism(tuple(float(v / peak) for v in sol.primal))
    report = kkt_verify(graph, beta, [float(v) for v in xr])
    residual = _kkt_residual(report)
    if not report.verdict:  # pragma: no cover - exactness guard
        raise DegenerateSynthesis(
            f"synthesized mechanism fails KKT verification (residual {residual})"
        )
    return SynthesisResult(beta=beta, lp_value=sol.value, kkt_residual=residual)


def _kkt_residual(report: KktReport) -> float:
    scale = max(report.gradient) if report.gradient else 0.0
    if scale <= 0:
        return 0.0
    return max(report.equalization_gap, report.support_gap, 0.0) / scale


def in_polytope(graph: EffortGraph, beta, x_star) -> bool:
    """Float membership test for the mechanisms that incentivize x*:
    A(x*) beta <= (1/B) x*.A(x*) beta componentwise, 1e-9 relative."""
    x = profile_array(x_star, graph.m)
    lhs = partials(graph, beta, x)
    rhs = float(x @ lhs) / float(graph.budget)
    tol = POLYTOPE_REL_TOL * max(1.0, abs(rhs))
    return bool((lhs <= rhs + tol).all())


def feasible_designated(graph: EffortGraph, D: Iterable) -> DesignatedFeasibility:
    """A designated set admits an incentivizable profile iff some member
    action has substitutability exactly 1; those members are returned."""
    subset = resolve_subset(graph, D)
    witnesses = tuple(
        j for j in subset if kappa_of_action(graph, j).kappa == 1
    )
    return DesignatedFeasibility(feasible=bool(witnesses), witnesses=witnesses)
