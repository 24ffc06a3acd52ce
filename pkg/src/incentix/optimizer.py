"""Evaluator side: which supports inside a designated set can be
incentivized, and concave objective maximization over them.

The family of incentivizable subsets of D is downward closed, so the
enumeration walks subsets in decreasing cardinality and only descends
into sets that failed the substitutability test; sets dominated by an
already accepted maximal set are skipped.  Each face {x : S(x) <= S,
sum x = B} of a maximal S is a simplex, so a concave objective is
maximized per face by projected (super)gradient ascent and the best
face wins.  Ties break toward larger |S|, then lexicographic.

gadget_from_graph encodes a simple graph so that a nonempty vertex set
is jointly incentivizable exactly when it is independent; this is the
reduction showing the general designated-set problem is hard, and the
brute-force independent set enumerator is its test oracle.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction
from itertools import combinations
from typing import Callable

import numpy as np

from .agent import project_simplex
from .kappa import (
    SynthesisResult,
    feasible_designated,
    kappa_of_set,
    resolve_subset,
    synthesize,
)
from .model import ConcaveFn, EffortGraph, EffortProfile, LinearMechanism

ENUMERATION_CAP = 24
FACE_STOP_RESIDUAL = 1e-9
FACE_MAX_ITERATIONS = 100_000
SUBGRADIENT_ITERATIONS = 3000
SUPPORT_ZERO_REL = 1e-9
VALUE_TIE_REL = 1e-12

_KINDS = ("dot", "neg_sq_dist", "weighted_min", "entropy", "card", "external")


class InfeasibleDesignatedSet(RuntimeError):
    """No action in D has kappa = 1, so no profile supported inside D
    can be incentivized at all."""

    def __init__(self, indices: tuple[int, ...]):
        self.indices = indices
        super().__init__(
            "infeasible designated set: every action in it can be fully "
            "substituted (kappa < 1 for each)"
        )


@dataclass(frozen=True)
class DesignatedSet:
    indices: tuple[int, ...]

    def __post_init__(self):
        idx = tuple(sorted(set(int(j) for j in self.indices)))
        if not idx:
            raise ValueError("designated set must be nonempty")
        object.__setattr__(self, "indices", idx)

    def __len__(self) -> int:
        return len(self.indices)


@dataclass(frozen=True)
class SimpleGraph:
    """Undirected simple graph with named vertices."""

    names: tuple[str, ...]
    edges: tuple[tuple[int, int], ...]

    def __post_init__(self):
        names = tuple(str(v) for v in self.names)
        object.__setattr__(self, "names", names)
        if len(set(names)) != len(names):
            raise ValueError("duplicate vertex names")
        n = len(names)
        seen = set()
        norm = []
        for u, v in self.edges:
            u, v = int(u), int(v)
            if not (0 <= u < n and 0 <= v < n):
                raise ValueError("edge endpoint out of range")
            if u == v:
                raise ValueError(f"self-loop at vertex {names[u]!r}")
            key = (min(u, v), max(u, v))
            if key in seen:
                raise ValueError(
                    f"duplicate edge {names[key[0]]}-{names[key[1]]}"
                )
            seen.add(key)
            norm.append(key)
        object.__setattr__(self, "edges", tuple(norm))

    @property
    def n(self) -> int:
        return len(self.names)


@dataclass(frozen=True)
class ConcaveObjective:
    """Objective g over effort profiles.  Built-in kinds are concave on
    the nonnegative orthant; card counts the support and is handled
    combinatorially rather than by ascent."""

    kind: str
    vector: tuple[float, ...] | None = None
    value_fn: Callable | None = field(default=None, compare=False)
    supergradient_fn: Callable | None = field(default=None, compare=False)

    def __post_init__(self):
        if self.kind not in _KINDS:
            raise ValueError(f"unknown objective kind {self.kind!r}")
        if self.kind in ("dot", "neg_sq_dist") and self.vector is None:
            raise ValueError(f"{self.kind} objective needs a vector")
        if self.kind == "external" and (
            self.value_fn is None or self.supergradient_fn is None
        ):
            raise ValueError("external objective needs value and supergradient")
        if self.vector is not None:
            object.__setattr__(
                self, "vector", tuple(float(v) for v in self.vector)
            )

    @staticmethod
    def dot(w) -> "ConcaveObjective":
        return ConcaveObjective("dot", vector=tuple(w))

    @staticmethod
    def neg_sq_dist(t) -> "ConcaveObjective":
        return ConcaveObjective("neg_sq_dist", vector=tuple(t))

    @staticmethod
    def weighted_min(w=None) -> "ConcaveObjective":
        return ConcaveObjective(
            "weighted_min", vector=None if w is None else tuple(w)
        )

    @staticmethod
    def entropy() -> "ConcaveObjective":
        return ConcaveObjective("entropy")

    @staticmethod
    def card() -> "ConcaveObjective":
        return ConcaveObjective("card")

    @staticmethod
    def external(value_fn, supergradient_fn) -> "ConcaveObjective":
        return ConcaveObjective(
            "external", value_fn=value_fn, supergradient_fn=supergradient_fn
        )

    @property
    def smooth(self) -> bool:
        return self.kind in ("dot", "neg_sq_dist")

    def bind(self, m: int, designated: tuple[int, ...]):
        """Return (value, supergradient) callables on length-m arrays."""
        if self.kind == "dot":
            w = np.asarray(self.vector)
            if w.size != m:
                raise ValueError("dot weight vector length mismatch")
            return (lambda x: float(w @ x)), (lambda x: w.copy())
        if self.kind == "neg_sq_dist":
            t = np.asarray(self.vector)
            if t.size != m:
                raise ValueError("target vector length mismatch")
            return (
                lambda x: -float(((x - t) ** 2).sum()),
                lambda x: -2.0 * (x - t),
            )
        if self.kind == "weighted_min":
            d = np.asarray(designated, dtype=int)
            if self.vector is None:
                w = np.ones(len(d))
            else:
                w = np.asarray(self.vector)
                if w.size != m:
                    raise ValueError("weighted_min vector length mismatch")
                w = w[d]

            def wm_value(x):
                return float((w * x[d]).min())

            def wm_super(x):
                s = np.zeros(m)
                k = int(np.argmin(w * x[d]))
                s[d[k]] = w[k]
                return s

            return wm_value, wm_super
        if self.kind == "entropy":

            def ent_value(x):
                pos = x[x > 0]
                return -float((pos * np.log(pos)).sum())

            def ent_super(x):
                return -(1.0 + np.log(np.maximum(x, 1e-300)))

            return ent_value, ent_super
        if self.kind == "external":
            return (
                lambda x: float(self.value_fn(x)),
                lambda x: np.asarray(self.supergradient_fn(x), dtype=float),
            )
        raise ValueError("card objective has no gradient form")


@dataclass(frozen=True)
class OptimizeResult:
    x_star: EffortProfile
    beta: LinearMechanism
    value: float
    support: tuple[int, ...]
    faces: tuple[tuple[int, ...], ...]
    kkt_residual: float


def _face_order(faces):
    return sorted(faces, key=lambda s: (-len(s), s))


def incentivizable_supports(graph: EffortGraph, designated, *,
                            prune: bool = True) -> list[tuple[int, ...]]:
    """Maximal S inside the designated set with kappa_S = 1 exactly.

    prune=False is the reference semantics (test kappa on every
    nonempty subset); both paths return the same maximal family because
    incentivizability is downward closed.
    """
    if isinstance(designated, DesignatedSet):
        didx = designated.indices
    else:
        didx = tuple(resolve_subset(graph, designated))
    if len(didx) > ENUMERATION_CAP:
        raise ValueError(
            f"designated set too large for enumeration (|D| > {ENUMERATION_CAP})"
        )
    memo: dict[tuple[int, ...], Fraction] = {}

    def kappa(s: tuple[int, ...]) -> Fraction:
        if s not in memo:
            memo[s] = kappa_of_set(graph, s).kappa
        return memo[s]

    maximal: list[tuple[int, ...]] = []
    if prune:
        level = {didx}
        while level:
            failed = []
            for s in sorted(level):
                if any(set(s) <= set(acc) for acc in maximal):
                    continue
                if kappa(s) == 1:
                    maximal.append(s)
                else:
                    failed.append(s)
            level = set()
            for s in failed:
                if len(s) > 1:
                    for drop in range(len(s)):
                        level.add(s[:drop] + s[drop + 1:])
    else:
        good = []
        for size in range(len(didx), 0, -1):
            for s in combinations(didx, size):
                if kappa(s) == 1:
                    good.append(s)
        for s in good:
            if not any(set(s) < set(t) for t in good):
                maximal.append(s)
    return _face_order(maximal)


def _ascend_face(x0, value, grad, budget, *, max_iter=FACE_MAX_ITERATIONS):
    """Armijo projected gradient ascent for smooth concave objectives on
    a simplex; stops at the simplex KKT residual, which unlike the agent
    solver must tolerate gradients of any sign."""
    x = project_simplex(np.asarray(x0, dtype=float), budget)
    h = value(x)
    step = 1.0
    for _ in range(max_iter):
        g = grad(x)
        gmax = float(g.max())
        residual = gmax - float(g[x > 0].min())
        if residual <= FACE_STOP_RESIDUAL * max(1.0, abs(gmax)):
            break
        accepted = False
        while step > 1e-16:
            xc = project_simplex(x + step * g, budget)
            ascent = float(g @ (xc - x))
            if ascent <= 0:
                break
            hc = value(xc)
            if hc >= h + 1e-4 * ascent:
                x, h = xc, hc
                step *= 2.0
                accepted = True
                break
            step *= 0.5
        if not accepted:
            break
    return x, h


def _subgradient_face(x0, value, supergrad, budget,
                      *, iters=SUBGRADIENT_ITERATIONS):
    """Diminishing-step projected supergradient ascent; returns the best
    iterate seen, which is the standard guarantee for nonsmooth concave
    objectives."""
    x = project_simplex(np.asarray(x0, dtype=float), budget)
    best_x, best_h = x.copy(), value(x)
    for k in range(iters):
        s = supergrad(x)
        norm = float(np.linalg.norm(s))
        if norm == 0.0:
            break
        step = budget / (norm * math.sqrt(k + 1.0))
        x = project_simplex(x + step * s, budget)
        h = value(x)
        if h > best_h:
            best_x, best_h = x.copy(), h
    return best_x, best_h


def _maximize_on_face(graph, face, objective, designated):
    m = graph.m
    budget = float(graph.budget)
    value, supergrad = objective.bind(m, designated)
    idx = np.asarray(face, dtype=int)

    def lift(sub):
        x = np.zeros(m)
        x[idx] = sub
        return x

    sub_value = lambda sub: value(lift(sub))
    sub_grad = lambda sub: supergrad(lift(sub))[idx]
    x0 = np.full(len(face), budget / len(face))
    if objective.smooth:
        sub, h = _ascend_face(x0, sub_value, sub_grad, budget)
    else:
        sub, h = _subgradient_face(x0, sub_value, sub_grad, budget)
    return lift(sub), h


def optimize_profile(graph: EffortGraph, designated,
                     objective: ConcaveObjective) -> OptimizeResult:
    """Maximize the objective over all incentivizable profiles supported
    inside the designated set, then synthesize a mechanism for the
    winner."""
    if isinstance(designated, DesignatedSet):
        didx = designated.indices
    else:
        didx = tuple(resolve_subset(graph, designated))
    if not feasible_designated(graph, didx).feasible:
        raise InfeasibleDesignatedSet(didx)
    faces = incentivizable_supports(graph, didx)
    budget = float(graph.budget)

    best = None  # (value, x, face)
    if objective.kind == "card":
        # Support size is constant on each open face; the enumeration
        # already orders faces by size then lexicographic rank.
        face = faces[0]
        x = np.zeros(graph.m)
        x[list(face)] = budget / len(face)
        best = (float(len(face)), x, face)
    else:
        for face in faces:
            x, h = _maximize_on_face(graph, face, objective, didx)
            if best is None or h > best[0] + VALUE_TIE_REL * max(1.0, abs(best[0])):
                best = (h, x, face)

    h, x, face = best
    x = np.where(x < SUPPORT_ZERO_REL * budget, 0.0, x)
    x *= budget / x.sum()
    syn: SynthesisResult = synthesize(graph, x)
    profile = EffortProfile(tuple(float(v) for v in x))
    return OptimizeResult(
        x_star=profile,
        beta=syn.beta,
        value=float(h),
        support=profile.support(),
        faces=tuple(faces),
        kkt_residual=syn.kkt_residual,
    )


def gadget_from_graph(g: SimpleGraph) -> EffortGraph:
    """Effort graph in which a nonempty vertex set is jointly
    incentivizable iff it is independent: each vertex action feeds its
    own feature with weight 3, each edge action feeds both endpoint
    features with weight 2, curves are the identity, budget 1."""
    actions = list(g.names)
    for u, v in g.edges:
        actions.append(f"{g.names[u]}-{g.names[v]}")
    zero, two, three = Fraction(0), Fraction(2), Fraction(3)
    weights = []
    for v in range(g.n):
        row = [zero] * g.n
        row[v] = three
        weights.append(tuple(row))
    for u, v in g.edges:
        row = [zero] * g.n
        row[u] = two
        row[v] = two
        weights.append(tuple(row))
    return EffortGraph(
        actions=tuple(actions),
        features=g.names,
        fns=tuple(ConcaveFn.identity() for _ in range(g.n)),
        weights=tuple(weights),
        budget=Fraction(1),
    )


def independent_sets_bruteforce(g: SimpleGraph) -> list[tuple[int, ...]]:
    """All independent vertex sets (the empty set included), smallest
    first; exhaustive, so capped at 10 vertices."""
    if g.n > 10:
        raise ValueError("graph too large for brute force (|V| > 10)")
    adjacent = set(g.edges)
    out = []
    for size in range(g.n + 1):
        for s in combinations(range(g.n), size):
            if all((s[a], s[b]) not in adjacent
                   for a in range(len(s)) for b in range(a + 1, len(s))):
                out.append(s)
    return out
