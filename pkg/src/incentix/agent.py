"""Agent side: best response to a mechanism and KKT optimality checks.

The agent maximizes H(x) = sum_i beta_i f_i([alpha^T x]_i) over the
budget simplex {x >= 0, sum x = B}.  H is concave, so a point is optimal
iff it satisfies the three KKT conditions: the budget is exhausted, all
partial derivatives on the support agree, and no off-support partial
exceeds them.  kkt_verify checks exactly these with tolerances
tol_b = 1e-9 * B and tol_g = 1e-7 * (max gradient entry).

best_response runs projected gradient ascent with Euclidean projection
onto the simplex and Armijo backtracking (shrink 0.5, slope 1e-4),
stopping once its internal KKT residual falls to 1e-9 or after 1e5
iterations.  The optimum need not be unique (the objective can be affine
along indifference faces); the contract is that the returned point
passes kkt_verify, not that it matches a canonical optimum.
"""

from __future__ import annotations

import math
import os
import random
from dataclasses import dataclass

import numpy as np

from .model import (
    EffortGraph,
    EffortProfile,
    LinearMechanism,
    beta_array,
    partials,
    profile_array,
)

KKT_REL_TOL = 1e-7
BUDGET_REL_TOL = 1e-9

STOP_RESIDUAL = 1e-9
MAX_ITERATIONS = 100_000
ARMIJO_SLOPE = 1e-4
ARMIJO_SHRINK = 0.5
RESTARTS = 3
RESTART_ITERATIONS = 20_000


class NonConvergence(RuntimeError):
    """Iteration cap hit without a KKT-passing iterate; carries the best
    profile found and its report."""

    def __init__(self, profile: EffortProfile, report: "KktReport"):
        self.profile = profile
        self.report = report
        super().__init__(
            "best response did not converge "
            f"(support_gap={report.support_gap:.3e}, "
            f"equalization_gap={report.equalization_gap:.3e})"
        )


@dataclass(frozen=True)
class KktReport:
    gradient: tuple[float, ...]
    budget_residual: float
    support_gap: float
    equalization_gap: float
    verdict: bool


def project_simplex(v: np.ndarray, total: float) -> np.ndarray:
    """Euclidean projection onto {x >= 0, sum x = total}, total > 0."""
    u = np.sort(v)[::-1]
    cumulative = np.cumsum(u) - total
    ks = np.arange(1, v.size + 1)
    rho = int(ks[u - cumulative / ks > 0][-1])
    theta = cumulative[rho - 1] / rho
    out = v - theta
    np.maximum(out, 0.0, out=out)
    return out


class _CurveBank:
    """Vectorized evaluation of all feature curves at once; t may be a
    vector of feature inputs or any array whose last axis indexes
    features."""

    def __init__(self, fns):
        self.n = len(fns)
        self.groups = []
        by_family: dict[str, list[int]] = {}
        for i, fn in enumerate(fns):
            by_family.setdefault(fn.family, []).append(i)
        for family, idx in by_family.items():
            scale = np.array([fns[i].scale for i in idx])
            if family in ("expsat", "log1p"):
                aux = np.array([fns[i].rate for i in idx])
            elif family == "sqrtshift":
                aux = np.array([fns[i].shift for i in idx])
            else:
                aux = None
            self.groups.append((family, np.array(idx), scale, aux))

    def values(self, t: np.ndarray) -> np.ndarray:
        out = np.empty_like(t, dtype=float)
        for family, idx, scale, aux in self.groups:
            ti = t[..., idx]
            if family == "linear":
                out[..., idx] = scale * ti
            elif family == "expsat":
                out[..., idx] = scale * -np.expm1(-aux * ti)
            elif family == "log1p":
                out[..., idx] = scale * np.log1p(aux * ti)
            else:
                out[..., idx] = scale * (np.sqrt(ti + aux) - np.sqrt(aux))
        return out

    def derivs(self, t: np.ndarray) -> np.ndarray:
        out = np.empty_like(t, dtype=float)
        for family, idx, scale, aux in self.groups:
            ti = t[..., idx]
            if family == "linear":
                out[..., idx] = np.broadcast_to(scale, ti.shape)
            elif family == "expsat":
                out[..., idx] = scale * aux * np.exp(-aux * ti)
            elif family == "log1p":
                out[..., idx] = scale * aux / (1.0 + aux * ti)
            else:
                with np.errstate(divide="ignore"):
                    out[..., idx] = scale / (2.0 * np.sqrt(ti + aux))
        return out


def kkt_verify(graph: EffortGraph, beta, x) -> KktReport:
    """First-order optimality report for x under the mechanism beta.

    Over-budget candidates are not rejected here; their violation shows
    up as a negative budget_residual and a false verdict.
    """
    xa = profile_array(x, graph.m)
    g = partials(graph, beta, xa, allow_over_budget=True)
    budget = float(graph.budget)
    budget_residual = budget - float(xa.sum())
    gmax = float(g.max()) if g.size else 0.0
    supp = xa > 0
    if supp.any():
        smin = float(g[supp].min())
        smax = float(g[supp].max())
        equalization_gap = smax - smin
        support_gap = gmax - smin
    else:
        equalization_gap = 0.0
        support_gap = math.inf if gmax > 0 else 0.0
    tol_g = KKT_REL_TOL * max(gmax, 0.0)
    verdict = (
        abs(budget_residual) <= BUDGET_REL_TOL * budget
        and equalization_gap <= tol_g
        and support_gap <= tol_g
    )
    return KktReport(
        gradient=tuple(float(v) for v in g),
        budget_residual=budget_residual,
        support_gap=support_gap,
        equalization_gap=equalization_gap,
        verdict=verdict,
    )


def _ascend(x0, value, grad, budget, max_iter):
    """Projected gradient ascent with Armijo backtracking from x0."""
    x = project_simplex(np.asarray(x0, dtype=float), budget)
    h = value(x)
    step = 1.0
    for _ in range(max_iter):
        g = grad(x)
        gmax = float(g.max())
        if gmax <= 0:
            break  # constant objective on the simplex
        residual = (gmax - float(g[x > 0].min())) / gmax
        if residual <= STOP_RESIDUAL:
            break
        accepted = False
        while step > 1e-16:
            xc = project_simplex(x + step * g, budget)
            ascent = float(g @ (xc - x))
            if ascent <= 0:
                break  # projection fixed point at this step size
            hc = value(xc)
            if hc >= h + ARMIJO_SLOPE * ascent:
                x, h = xc, hc
                step *= 2.0
                accepted = True
                break
            step *= ARMIJO_SHRINK
        if not accepted:
            break
    return x


def best_response(graph: EffortGraph, beta, *, max_iter: int = MAX_ITERATIONS,
                  seed: int | None = None) -> EffortProfile:
    """A KKT-passing maximizer of the agent objective.

    Deterministic from the uniform start; if that run stalls short of
    verification, a few seeded random restarts are tried (seed from the
    INCENTIX_SEED environment variable unless given) before raising
    NonConvergence with the best iterate found.
    """
    mech = beta if isinstance(beta, LinearMechanism) else LinearMechanism(
        tuple(float(v) for v in beta)
    )
    b = beta_array(mech, graph.n)
    budget = float(graph.budget)
    if budget <= 0:
        raise ValueError("budget must be positive")
    alpha = graph.alpha_float()
    alpha_t = np.ascontiguousarray(alpha.T)
    bank = _CurveBank(graph.fns)

    def value(x):
        return float(b @ bank.values(alpha_t @ x))

    def grad(x):
        return alpha @ (b * bank.derivs(alpha_t @ x))

    x = _ascend(np.full(graph.m, budget / graph.m), value, grad, budget, max_iter)
    report = kkt_verify(graph, mech, x)
    if report.verdict:
        return EffortProfile(tuple(float(v) for v in x))

    if seed is None:
        seed = int(os.environ.get("INCENTIX_SEED", "0"))
    rng = random.Random(seed)
    best_x, best_h, best_report = x, value(x), report
    for _ in range(RESTARTS):
        raw = np.array([-math.log(1.0 - rng.random()) for _ in range(graph.m)])
        x0 = budget * raw / raw.sum()
        x = _ascend(x0, value, grad, budget, RESTART_ITERATIONS)
        report = kkt_verify(graph, mech, x)
        if report.verdict:
            return EffortProfile(tuple(float(v) for v in x))
        h = value(x)
        if h > best_h:
            best_x, best_h, best_report = x, h, report
    raise NonConvergence(
        EffortProfile(tuple(float(v) for v in best_x)), best_report
    )


def brute_force_response(graph: EffortGraph, beta, grid_step) -> EffortProfile:
    """Exhaustive lattice oracle: evaluate H on every x with
    x_j = k_j * grid_step summing to B and return the maximizer,
    lexicographically first (in k) among ties.  m <= 4 only."""
    if graph.m > 4:
        raise ValueError("instance too large for brute force (m > 4)")
    mech = beta if isinstance(beta, LinearMechanism) else LinearMechanism(
        tuple(float(v) for v in beta)
    )
    b = beta_array(mech, graph.n)
    budget = float(graph.budget)
    step = float(grid_step)
    if step <= 0:
        raise ValueError("grid_step must be positive")
    levels = int(round(budget / step))
    if levels < 1 or abs(levels * step - budget) > 1e-9 * max(1.0, budget):
        raise ValueError("grid_step does not divide the budget")
    alpha = graph.alpha_float()
    bank = _CurveBank(graph.fns)
    m = graph.m

    def chunk_utilities(ks: np.ndarray) -> np.ndarray:
        xs = ks.astype(float) * (budget / levels)
        return bank.values(xs @ alpha) @ b

    def triangle(total: int) -> np.ndarray:
        # All (p, q) with p + q <= total, ordered lexicographically.
        i, j = np.triu_indices(total + 1)
        return np.column_stack((i, j - i))

    if m == 1:
        return EffortProfile((budget,))
    if m == 2:
        k = np.arange(levels + 1)
        ks = np.column_stack((k, levels - k))
        util = chunk_utilities(ks)
        pick = int(np.argmax(util))
        best = ks[pick]
    elif m == 3:
        pairs = triangle(levels)
        ks = np.column_stack((pairs, levels - pairs.sum(axis=1)))
        util = chunk_utilities(ks)
        pick = int(np.argmax(util))
        best = ks[pick]
    else:
        best = None
        best_util = -math.inf
        for k1 in range(levels + 1):
            pairs = triangle(levels - k1)
            ks = np.column_stack(
                (np.full(len(pairs), k1), pairs, levels - k1 - pairs.sum(axis=1))
            )
            util = chunk_utilities(ks)
            pick = int(np.argmax(util))
            if util[pick] > best_util:
                best_util = float(util[pick])
                best = ks[pick]
    return EffortProfile(tuple(budget * int(k) / levels for k in best))
