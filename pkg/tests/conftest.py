"""Shared builders for the test suite.

Random instances are generated from explicit seeds so every run sees the
same graphs; weights are small-denominator rationals so LP results can
be compared exactly.
"""

from __future__ import annotations

import math
import random
from fractions import Fraction
from pathlib import Path

import pytest

from incentix.model import ConcaveFn, EffortGraph

SCENARIOS = Path(__file__).resolve().parent.parent / "scenarios"

LIN = ConcaveFn.identity()


def classroom_graph(mid: int = 2) -> EffortGraph:
    return EffortGraph(
        actions=("cheat", "study", "copy"),
        features=("test", "homework"),
        fns=(LIN, LIN),
        weights=(
            (Fraction(3), Fraction(0)),
            (Fraction(mid), Fraction(mid)),
            (Fraction(0), Fraction(3)),
        ),
        budget=Fraction(1),
    )


def nonconvex_graph(a22: int = 2) -> EffortGraph:
    es = ConcaveFn.expsat
    return EffortGraph(
        actions=("1", "2", "3", "4"),
        features=("F1", "F2", "F3"),
        fns=(es(1.0, 1.0), es(1.0, 1.0), es(1.0, 2.0)),
        weights=(
            (Fraction(1), Fraction(0), Fraction(0)),
            (Fraction(0), Fraction(a22), Fraction(0)),
            (Fraction(0), Fraction(1), Fraction(1)),
            (Fraction(0), Fraction(0), Fraction(2)),
        ),
        budget=Fraction(1),
    )


NONCONVEX_BETA = (1.0, math.exp(1 / 3) / 2, math.e / 4)
NONCONVEX_BETA_PRIME = (1.0, math.exp(-1 / 3) / 2, 0.25)
NONCONVEX_XSTAR = (Fraction(1, 3), Fraction(0), Fraction(2, 3), Fraction(0))


def random_rational(rng: random.Random, max_den: int = 10) -> Fraction:
    den = rng.randint(1, max_den)
    return Fraction(rng.randint(0, den * 3), den)


def random_graph(rng: random.Random, m: int, n: int, *,
                 families: bool = False, max_den: int = 10) -> EffortGraph:
    """Random effort graph with small rational weights; every action
    touches at least one feature and the density is moderate."""
    while True:
        rows = []
        for _ in range(m):
            row = [
                random_rational(rng, max_den) if rng.random() < 0.6 else Fraction(0)
                for _ in range(n)
            ]
            if all(w == 0 for w in row):
                row[rng.randrange(n)] = Fraction(rng.randint(1, max_den))
            rows.append(tuple(row))
        if all(any(row[i] != 0 for row in rows) for i in range(n)):
            break
    if families:
        fns = tuple(random_curve(rng) for _ in range(n))
    else:
        fns = tuple(LIN for _ in range(n))
    return EffortGraph(
        actions=tuple(f"a{j}" for j in range(m)),
        features=tuple(f"F{i}" for i in range(n)),
        fns=fns,
        weights=tuple(rows),
        budget=Fraction(1),
    )


def random_curve(rng: random.Random) -> ConcaveFn:
    scale = rng.uniform(0.5, 2.0)
    pick = rng.randrange(4)
    if pick == 0:
        return ConcaveFn.linear(scale)
    if pick == 1:
        return ConcaveFn.expsat(scale, rng.uniform(0.5, 2.0))
    if pick == 2:
        return ConcaveFn.log1p(scale, rng.uniform(0.5, 2.0))
    return ConcaveFn.sqrtshift(scale, rng.uniform(0.1, 1.0))


@pytest.fixture
def classroom():
    return classroom_graph(2)


@pytest.fixture
def classroom_weak():
    return classroom_graph(1)


@pytest.fixture
def nonconvex():
    return nonconvex_graph()


@pytest.fixture
def nonconvex_a22zero():
    return nonconvex_graph(a22=0)
