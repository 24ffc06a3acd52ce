"""Effort graphs, conversion curves, profiles, and linear mechanisms.

An effort graph is a weighted bipartite graph between m actions and n
features.  An agent splits a budget B of effort across actions; feature i
receives the weighted total t_i = sum_j alpha[j][i] * x_j and converts it
to a score F_i = f_i(t_i) through a nonnegative, increasing, weakly
concave curve f_i with f_i(0) = 0.  A linear mechanism beta >= 0 pays the
agent H(x) = sum_i beta_i * F_i.

Weights and the budget are exact rationals; profiles, mechanisms, and
curve evaluations are floating point.  Exact arithmetic is reserved for
the substitutability computations built on top of this module.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Callable, Iterable, Sequence, Union

import numpy as np

Rational = Fraction
RationalLike = Union[Fraction, int, str]

FAMILIES = ("linear", "expsat", "log1p", "sqrtshift")


def as_rational(value) -> Fraction:
    """Coerce ints, strings like '3/4', and Fractions to an exact Fraction."""
    if isinstance(value, Fraction):
        return value
    if isinstance(value, bool):
        raise TypeError("boolean is not a rational value")
    if isinstance(value, (int, str)):
        return Fraction(value)
    if isinstance(value, float):
        # Floats are admitted for convenience; the binary value is taken as is.
        return Fraction(value)
    raise TypeError(f"cannot interpret {value!r} as a rational")


@dataclass(frozen=True)
class ConcaveFn:
    """One conversion curve f(y) on y >= 0.

    Families and their parameters:

    ==========  =======================  ==========================
    family      f(y)                     parameters
    ==========  =======================  ==========================
    linear      c * y                    scale c
    expsat      c * (1 - exp(-a*y))      scale c, rate a
    log1p       c * ln(1 + a*y)          scale c, rate a
    sqrtshift   c * (sqrt(y+s)-sqrt(s))  scale c, shift s
    ==========  =======================  ==========================

    Every family has f(0) = 0, is increasing and weakly concave for
    positive parameters.  Parameter sign checks live in validate_graph so
    that invalid documents can still be loaded and reported on.
    """

    family: str
    scale: float
    rate: float | None = None
    shift: float | None = None

    def __post_init__(self):
        if self.family not in FAMILIES:
            raise ValueError(f"unknown curve family {self.family!r}")
        needs_rate = self.family in ("expsat", "log1p")
        if needs_rate != (self.rate is not None):
            raise ValueError(f"family {self.family!r}: rate parameter mismatch")
        if (self.family == "sqrtshift") != (self.shift is not None):
            raise ValueError(f"family {self.family!r}: shift parameter mismatch")

    @staticmethod
    def linear(scale: float = 1.0) -> "ConcaveFn":
        return ConcaveFn("linear", float(scale))

    @staticmethod
    def identity() -> "ConcaveFn":
        return ConcaveFn.linear(1.0)

    @staticmethod
    def expsat(scale: float, rate: float) -> "ConcaveFn":
        return ConcaveFn("expsat", float(scale), rate=float(rate))

    @staticmethod
    def log1p(scale: float, rate: float) -> "ConcaveFn":
        return ConcaveFn("log1p", float(scale), rate=float(rate))

    @staticmethod
    def sqrtshift(scale: float, shift: float) -> "ConcaveFn":
        return ConcaveFn("sqrtshift", float(scale), shift=float(shift))

    def value(self, y: float) -> float:
        c = self.scale
        if self.family == "linear":
            return c * y
        if self.family == "expsat":
            return c * -math.expm1(-self.rate * y)
        if self.family == "log1p":
            return c * math.log1p(self.rate * y)
        s = self.shift
        return c * (math.sqrt(y + s) - math.sqrt(s))

    def deriv(self, y: float) -> float:
        c = self.scale
        if self.family == "linear":
            return c
        if self.family == "expsat":
            return c * self.rate * math.exp(-self.rate * y)
        if self.family == "log1p":
            return c * self.rate / (1.0 + self.rate * y)
        root = math.sqrt(y + self.shift)
        if root == 0.0:
            return math.inf
        return c / (2.0 * root)

    def params(self) -> dict:
        """Family-specific parameters, suitable for serialization."""
        out = {"scale": self.scale}
        if self.rate is not None:
            out["rate"] = self.rate
        if self.shift is not None:
            out["shift"] = self.shift
        return out


@dataclass(frozen=True)
class EffortGraph:
    """Immutable effort graph: names, exact weights, curves, and budget.

    weights[j][i] is the exact rational weight on the edge from action j
    to feature i; rows of zeros (inert actions) and columns of zeros
    (constant features) are representable and flagged by validate_graph.
    """

    actions: tuple[str, ...]
    features: tuple[str, ...]
    fns: tuple[ConcaveFn, ...]
    weights: tuple[tuple[Fraction, ...], ...]
    budget: Fraction
    _alpha: np.ndarray = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        object.__setattr__(self, "actions", tuple(str(a) for a in self.actions))
        object.__setattr__(self, "features", tuple(str(f) for f in self.features))
        object.__setattr__(self, "fns", tuple(self.fns))
        rows = tuple(tuple(as_rational(w) for w in row) for row in self.weights)
        object.__setattr__(self, "weights", rows)
        object.__setattr__(self, "budget", as_rational(self.budget))
        m, n = len(self.actions), len(self.features)
        if len(set(self.actions)) != m:
            raise ValueError("duplicate action names")
        if len(set(self.features)) != n:
            raise ValueError("duplicate feature names")
        if len(self.fns) != n:
            raise ValueError(f"expected {n} curves, got {len(self.fns)}")
        if len(rows) != m or any(len(row) != n for row in rows):
            raise ValueError("weight matrix shape does not match actions x features")
        alpha = np.array([[float(w) for w in row] for row in rows], dtype=float)
        alpha = alpha.reshape(m, n)
        alpha.setflags(write=False)
        object.__setattr__(self, "_alpha", alpha)

    @property
    def m(self) -> int:
        return len(self.actions)

    @property
    def n(self) -> int:
        return len(self.features)

    def alpha_float(self) -> np.ndarray:
        """Read-only float copy of the weight matrix, shape (m, n)."""
        return self._alpha

    def action_index(self, name: str) -> int:
        try:
            return self.actions.index(name)
        except ValueError:
            raise KeyError(f"unknown action {name!r}") from None

    def feature_index(self, name: str) -> int:
        try:
            return self.features.index(name)
        except ValueError:
            raise KeyError(f"unknown feature {name!r}") from None

    def feature_inputs(self, x) -> np.ndarray:
        """t = alpha^T x as floats, shape (n,)."""
        return self._alpha.T @ profile_array(x, self.m)


@dataclass(frozen=True)
class EffortProfile:
    """A point x >= 0 in effort space; support is the set of strictly
    positive coordinates."""

    values: tuple

    def __post_init__(self):
        vals = tuple(self.values)
        for j, v in enumerate(vals):
            if v < 0:
                raise ValueError(f"negative effort {v!r} at position {j}")
        object.__setattr__(self, "values", vals)

    def total(self):
        return sum(self.values)

    def support(self) -> tuple[int, ...]:
        return tuple(j for j, v in enumerate(self.values) if v > 0)

    def __len__(self) -> int:
        return len(self.values)

    def __iter__(self):
        return iter(self.values)


@dataclass(frozen=True)
class LinearMechanism:
    """Payment weights beta over features; beta >= 0 with at least one
    positive entry (the zero mechanism pays nothing and is rejected)."""

    beta: tuple[float, ...]

    def __post_init__(self):
        object.__setattr__(self, "beta", tuple(float(b) for b in self.beta))
        if any(b < 0 for b in self.beta):
            raise ValueError("negative mechanism weight")
        if not any(b > 0 for b in self.beta):
            raise ValueError("zero mechanism")

    def __len__(self) -> int:
        return len(self.beta)

    def __iter__(self):
        return iter(self.beta)


@dataclass(frozen=True)
class ValidationReport:
    errors: tuple[str, ...]
    warnings: tuple[str, ...]

    @property
    def ok(self) -> bool:
        return not self.errors


def profile_array(x, m: int) -> np.ndarray:
    """Normalize a profile-like object to a float vector of length m."""
    if isinstance(x, EffortProfile):
        x = x.values
    arr = np.asarray([float(v) for v in x], dtype=float)
    if arr.shape != (m,):
        raise ValueError(f"profile has length {arr.size}, expected {m}")
    return arr


def beta_array(beta, n: int) -> np.ndarray:
    if isinstance(beta, LinearMechanism):
        beta = beta.beta
    arr = np.asarray([float(b) for b in beta], dtype=float)
    if arr.shape != (n,):
        raise ValueError(f"mechanism has length {arr.size}, expected {n}")
    return arr


def validate_graph(graph: EffortGraph) -> ValidationReport:
    """Structural and sign checks.

    Errors (graph unusable): negative weight, budget <= 0, nonpositive
    curve scale or rate, negative sqrtshift shift.  Warnings (legal but
    suspicious): all-zero action row, all-zero feature column.
    """
    errors: list[str] = []
    warnings: list[str] = []
    for j, row in enumerate(graph.weights):
        for i, w in enumerate(row):
            if w < 0:
                errors.append(
                    f"negative weight {w} on edge "
                    f"{graph.actions[j]!r} -> {graph.features[i]!r}"
                )
    if graph.budget <= 0:
        errors.append(f"budget {graph.budget} is not positive")
    for i, fn in enumerate(graph.fns):
        name = graph.features[i]
        if not fn.scale > 0:
            errors.append(f"feature {name!r}: scale {fn.scale} is not positive")
        if fn.rate is not None and not fn.rate > 0:
            errors.append(f"feature {name!r}: rate {fn.rate} is not positive")
        if fn.shift is not None and fn.shift < 0:
            errors.append(f"feature {name!r}: shift {fn.shift} is negative")
    for j, row in enumerate(graph.weights):
        if all(w == 0 for w in row):
            warnings.append(f"action {graph.actions[j]!r} has no effect on any feature")
    for i in range(graph.n):
        if all(row[i] == 0 for row in graph.weights):
            warnings.append(f"feature {graph.features[i]!r} is constant (zero column)")
    return ValidationReport(tuple(errors), tuple(warnings))


def _reject_infeasible(graph: EffortGraph, arr: np.ndarray, *, budget: bool) -> None:
    slack = 1e-12 * max(1.0, float(graph.budget))
    low = arr.min() if arr.size else 0.0
    if low < -slack:
        raise ValueError(f"infeasible profile: negative entry {low!r}")
    if budget:
        total = float(arr.sum())
        limit = float(graph.budget)
        if total > limit * (1.0 + 1e-9) + slack:
            raise ValueError(
                f"infeasible profile: total effort {total!r} exceeds budget {limit!r}"
            )


def feature_values(graph: EffortGraph, x) -> np.ndarray:
    """F_i = f_i([alpha^T x]_i) for every feature, as floats."""
    arr = profile_array(x, graph.m)
    _reject_infeasible(graph, arr, budget=True)
    t = graph._alpha.T @ arr
    return np.array([fn.value(ti) for fn, ti in zip(graph.fns, t)], dtype=float)


def utility(graph: EffortGraph, beta, x) -> float:
    """Agent payoff H(x) = beta . F(x)."""
    b = beta_array(beta, graph.n)
    return float(b @ feature_values(graph, x))


def partials(graph: EffortGraph, beta, x, *, allow_over_budget: bool = False) -> np.ndarray:
    """Gradient of H at x: dH/dx_j = sum_i alpha[j][i] * beta_i * f_i'(t_i).

    A feature with zero edge weight to an action contributes exactly 0 to
    that action's partial even when f_i'(t_i) is infinite (sqrtshift with
    shift 0 at t_i = 0), hence the masked product below.

    allow_over_budget skips the total-effort check so that an optimality
    verifier can evaluate the gradient at a candidate point whose budget
    violation it wants to report rather than trip over.
    """
    b = beta_array(beta, graph.n)
    arr = profile_array(x, graph.m)
    _reject_infeasible(graph, arr, budget=not allow_over_budget)
    t = graph._alpha.T @ arr
    fp = np.array([fn.deriv(ti) for fn, ti in zip(graph.fns, t)], dtype=float)
    coef = b * fp
    if np.all(np.isfinite(coef)):
        return graph.alpha_float() @ coef
    alpha = graph.alpha_float()
    with np.errstate(invalid="ignore"):
        terms = np.where(alpha > 0, alpha * coef[None, :], 0.0)
    return terms.sum(axis=1)
