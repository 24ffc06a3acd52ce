from __future__ import annotations

import random
from fractions import Fraction as F

import pytest

from incentix.kappa import (
    DegenerateSynthesis,
    NotIncentivizable,
    decide,
    feasible_designated,
    in_polytope,
    kappa_of_action,
    kappa_of_set,
    rational_profile,
    resolve_subset,
    synthesize,
)
from incentix.model import ConcaveFn, EffortGraph

from conftest import (
    NONCONVEX_BETA,
    NONCONVEX_XSTAR,
    classroom_graph,
    random_graph,
)


def check_witness(graph, cert):
    """Exact feasibility of the certificate: alpha^T y covers the target
    combination and 1.y equals kappa."""
    assert sum(cert.witness_y, F(0)) == cert.kappa
    if cert.witness_z is None:
        target = graph.weights[cert.subset[0]]
    else:
        assert sum(cert.witness_z, F(0)) >= 1
        target = tuple(
            sum(graph.weights[j][i] * cert.witness_z[j] for j in cert.subset)
            for i in range(graph.n)
        )
    for i in range(graph.n):
        covered = sum(
            graph.weights[k][i] * cert.witness_y[k] for k in range(graph.m)
        )
        if target[i] != 0:
            assert covered >= target[i]


def test_singleton_kappas(classroom, classroom_weak):
    for name in ("cheat", "study", "copy"):
        cert = kappa_of_action(classroom, name)
        assert cert.kappa == 1
        check_witness(classroom, cert)
    weak = kappa_of_action(classroom_weak, "study")
    assert weak.kappa == F(2, 3)
    check_witness(classroom_weak, weak)


def test_pair_substitution(classroom):
    cert = kappa_of_set(classroom, ("cheat", "copy"))
    assert cert.kappa == F(3, 4)
    assert cert.subset == (0, 2)
    check_witness(classroom, cert)
    # Adding the middle action cannot raise the optimum.
    assert kappa_of_set(classroom, ("cheat", "study", "copy")).kappa <= F(3, 4)


def test_inert_action_kappa(nonconvex_a22zero):
    cert = kappa_of_action(nonconvex_a22zero, "2")
    assert cert.kappa == 0
    assert cert.witness_y == (F(0),) * 4


def test_singleton_forms_agree():
    rng = random.Random(42)
    for _ in range(10):
        g = random_graph(rng, rng.randint(2, 5), rng.randint(2, 4))
        for j in range(g.m):
            assert kappa_of_action(g, j).kappa == kappa_of_set(g, [j]).kappa


def test_decide_classroom(classroom):
    good = decide(classroom, (F(1, 2), F(1, 2), F(0)))
    assert good.incentivizable
    assert good.certificate.kappa == 1
    bad = decide(classroom, (F(1, 2), F(0), F(1, 2)))
    assert not bad.incentivizable
    assert bad.certificate.kappa == F(3, 4)
    # Only the support matters, not the interior weights.
    again = decide(classroom, (F(1, 4), F(0), F(3, 4)))
    assert again.certificate.kappa == bad.certificate.kappa


def test_decide_nonconvex(nonconvex):
    assert decide(nonconvex, NONCONVEX_XSTAR).incentivizable
    assert decide(nonconvex, (F(2, 3), F(0), F(1, 3), F(0))).incentivizable


def test_budget_enforcement(classroom):
    with pytest.raises(ValueError, match="budget"):
        decide(classroom, (F(1, 3), F(1, 3), F(0)))
    with pytest.raises(ValueError, match="budget"):
        decide(classroom, (0.5, 0.4, 0.0))
    # Float rounding noise within 1e-12 is accepted.
    x = (0.1, 0.7, 0.2 + 3e-16)
    assert decide(classroom, x).incentivizable in (True, False)


def test_rational_profile_snapping(classroom):
    xr = rational_profile(classroom, [1 / 3, 1e-15, 2 / 3])
    assert xr == (F(1, 3), F(0), F(2, 3))
    xr = rational_profile(classroom, [0.25, -1e-15, 0.75])
    assert xr[1] == 0
    with pytest.raises(ValueError, match="negative"):
        rational_profile(classroom, [0.5, -0.1, 0.6])
    with pytest.raises(ValueError, match="length"):
        rational_profile(classroom, [F(1)])
    # Exact rationals pass through untouched, even tiny ones.
    keep = rational_profile(classroom, (F(1, 10**14), F(0), F(1)))
    assert keep[0] == F(1, 10**14)


def test_synthesize_pure_middle(classroom):
    res = synthesize(classroom, (F(0), F(1), F(0)))
    assert res.lp_value == 1
    assert res.beta.beta == (1.0, 0.5)
    assert res.kkt_residual <= 1e-9


def test_synthesize_nonconvex(nonconvex):
    res = synthesize(nonconvex, NONCONVEX_XSTAR)
    assert res.lp_value == 1
    for got, want in zip(res.beta.beta, NONCONVEX_BETA):
        assert got == pytest.approx(want, rel=1e-9)
    assert res.kkt_residual <= 1e-7


def test_synthesize_rejects_weak_support(classroom):
    with pytest.raises(NotIncentivizable) as info:
        synthesize(classroom, (F(1, 2), F(0), F(1, 2)))
    assert info.value.certificate.kappa == F(3, 4)


def test_synthesize_infinite_slope():
    g = EffortGraph(
        actions=("a0", "a1"),
        features=("F0", "F1"),
        fns=(ConcaveFn.identity(), ConcaveFn.sqrtshift(1.0, 0.0)),
        weights=((F(1), F(0)), (F(0), F(1))),
        budget=F(1),
    )
    # x* leaves F1 at zero input where the sqrt slope blows up.
    with pytest.raises(DegenerateSynthesis, match="slope"):
        synthesize(g, (F(1), F(0)))


def test_in_polytope(classroom):
    x = (F(0), F(1), F(0))
    assert in_polytope(classroom, (1.0, 0.5), x)
    assert in_polytope(classroom, (1.0, 1.0), x)
    assert not in_polytope(classroom, (1.0, 0.4), x)
    assert not in_polytope(classroom, (0.4, 1.0), x)


def test_feasible_designated(classroom, classroom_weak, nonconvex_a22zero):
    ok = feasible_designated(classroom, ("cheat", "copy"))
    assert ok.feasible and ok.witnesses == (0, 2)
    weak = feasible_designated(classroom_weak, ("study",))
    assert not weak.feasible and weak.witnesses == ()
    inert = feasible_designated(nonconvex_a22zero, ("2",))
    assert not inert.feasible


def test_resolve_subset(classroom):
    assert resolve_subset(classroom, ("copy", 0, "0")) == (0, 2)
    with pytest.raises(ValueError, match="empty"):
        resolve_subset(classroom, ())
