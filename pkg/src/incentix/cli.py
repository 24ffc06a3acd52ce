"""Command line interface.

Structured results (JSON documents, CSV tables) go to standard output;
diagnostics go to standard error.  Exit codes: 0 success, 1 validation
warnings, 2 input error, 3 infeasible or not incentivizable.  Rationals
on the command line may be written as decimals or "p/q" strings; the
latter stay exact all the way into the solver.
"""

from __future__ import annotations

import argparse
import csv
import json
import sys
from fractions import Fraction

import numpy as np

from .agent import NonConvergence, best_response, kkt_verify
from .documents import DocumentError, emit_graph, load_graph, rational_str
from .kappa import (
    DegenerateSynthesis,
    KappaCertificate,
    NotIncentivizable,
    decide,
    kappa_of_action,
    kappa_of_set,
    resolve_action,
    synthesize,
)
from .model import EffortGraph, validate_graph
from .optimizer import (
    ConcaveObjective,
    InfeasibleDesignatedSet,
    SimpleGraph,
    gadget_from_graph,
    incentivizable_supports,
    optimize_profile,
)

SUPPORT_ZERO_REL = 1e-9

OK, WARNINGS, INPUT_ERROR, INFEASIBLE = 0, 1, 2, 3


def _fail(message: str) -> int:
    print(f"error: {message}", file=sys.stderr)
    return INPUT_ERROR


def _parse_scalar(text: str):
    """Exact Fraction for 'p/q' and integer literals, float for decimals."""
    s = text.strip()
    if "/" in s:
        return Fraction(s)
    if "." in s or "e" in s or "E" in s:
        return float(s)
    return Fraction(s)


def _parse_vector(text: str):
    items = [t for t in text.split(",") if t.strip() != ""]
    if not items:
        raise ValueError("empty value list")
    return [_parse_scalar(t) for t in items]


def _load(path: str) -> EffortGraph:
    return load_graph(path)


def _usable(graph: EffortGraph):
    """Hard-stop on structurally invalid graphs before any solve."""
    report = validate_graph(graph)
    if report.errors:
        raise DocumentError("; ".join(report.errors))


def _cert_rational(q) -> str:
    q = Fraction(q)
    if q.denominator == 1:
        return str(q.numerator)
    return f"{q.numerator}/{q.denominator}"


def _certificate_doc(cert: KappaCertificate, verdict: bool) -> dict:
    return {
        "schema": 1,
        "kappa": _cert_rational(cert.kappa),
        "witness_y": [_cert_rational(v) for v in cert.witness_y],
        "witness_z": (
            None
            if cert.witness_z is None
            else [_cert_rational(v) for v in cert.witness_z]
        ),
        "verdict": verdict,
    }


def _report_doc(report) -> dict:
    return {
        "gradient": list(report.gradient),
        "budget_residual": report.budget_residual,
        "support_gap": report.support_gap,
        "equalization_gap": report.equalization_gap,
        "verdict": report.verdict,
    }


def _emit(doc) -> None:
    print(json.dumps(doc, indent=2))


def cmd_validate(args) -> int:
    report = validate_graph(_load(args.path))
    _emit(
        {
            "errors": list(report.errors),
            "warnings": list(report.warnings),
            "ok": report.ok,
        }
    )
    if report.errors:
        return INPUT_ERROR
    if report.warnings:
        return WARNINGS
    return OK


def cmd_kappa(args) -> int:
    graph = _load(args.path)
    _usable(graph)
    if args.action is not None:
        cert = kappa_of_action(graph, args.action)
    else:
        names = [t.strip() for t in args.set.split(",") if t.strip()]
        cert = kappa_of_set(graph, names)
    _emit(_certificate_doc(cert, cert.kappa == 1))
    return OK


def cmd_synthesize(args) -> int:
    graph = _load(args.path)
    _usable(graph)
    profile = _parse_vector(args.profile)
    decision = decide(graph, profile)
    if not decision.incentivizable:
        _emit(_certificate_doc(decision.certificate, False))
        return INFEASIBLE
    result = synthesize(graph, profile)
    doc = _certificate_doc(decision.certificate, True)
    doc["beta"] = [float(v) for v in result.beta.beta]
    doc["kkt_residual"] = result.kkt_residual
    _emit(doc)
    return OK


def cmd_respond(args) -> int:
    graph = _load(args.path)
    _usable(graph)
    beta = [float(v) for v in _parse_vector(args.beta)]
    profile = best_response(graph, beta)
    report = kkt_verify(graph, beta, profile.values)
    doc = {"profile": list(profile.values), "report": _report_doc(report)}
    if args.designated is not None:
        names = [t.strip() for t in args.designated.split(",") if t.strip()]
        allowed = {resolve_action(graph, n) for n in names}
        undesired = sorted(set(profile.support()) - allowed)
        doc["undesired_support"] = [graph.actions[j] for j in undesired]
    _emit(doc)
    return OK


def _parse_objective(spec: str, graph: EffortGraph) -> ConcaveObjective:
    kind, _, rest = spec.partition(":")
    kind = kind.strip()
    vec = None
    if rest:
        vec = [float(v) for v in _parse_vector(rest)]
        if len(vec) != graph.m:
            raise ValueError(
                f"objective vector needs {graph.m} entries, got {len(vec)}"
            )
    if kind == "card":
        return ConcaveObjective.card()
    if kind == "entropy":
        return ConcaveObjective.entropy()
    if kind == "dot":
        if vec is None:
            raise ValueError("dot objective needs weights, e.g. dot:1,0,2")
        return ConcaveObjective.dot(vec)
    if kind == "neg_sq_dist":
        if vec is None:
            raise ValueError(
                "neg_sq_dist objective needs a target, e.g. neg_sq_dist:1/3,0,2/3"
            )
        return ConcaveObjective.neg_sq_dist(vec)
    if kind == "weighted_min":
        return ConcaveObjective.weighted_min(vec)
    raise ValueError(f"unknown objective {kind!r}")


def cmd_optimize(args) -> int:
    graph = _load(args.path)
    _usable(graph)
    names = [t.strip() for t in args.designated.split(",") if t.strip()]
    objective = _parse_objective(args.objective, graph)
    result = optimize_profile(graph, names, objective)
    _emit(
        {
            "x_star": list(result.x_star.values),
            "support": [graph.actions[j] for j in result.support],
            "beta": [float(v) for v in result.beta.beta],
            "value": result.value,
            "kkt_residual": result.kkt_residual,
            "maximal_supports": [
                [graph.actions[j] for j in face] for face in result.faces
            ],
        }
    )
    return OK


def _resolve_feature(graph: EffortGraph, token: str) -> int:
    # Same convention as action lookup: names first, digits as position.
    if token in graph.features:
        return graph.features.index(token)
    if not token.lstrip("-").isdigit():
        raise KeyError(f"unknown feature {token!r}")
    i = int(token)
    if not 0 <= i < graph.n:
        raise IndexError(f"feature index {i} out of range")
    return i


def _parse_grid(spec: str, graph: EffortGraph):
    """COORD[:LO[:HI[:STEPS]]] with defaults 0, 1.5, 50; COORD is a
    feature name or index."""
    parts = spec.split(":")
    if len(parts) > 4 or not parts[0].strip():
        raise ValueError(f"bad grid spec {spec!r}")
    i = _resolve_feature(graph, parts[0].strip())
    lo = float(_parse_scalar(parts[1])) if len(parts) > 1 else 0.0
    hi = float(_parse_scalar(parts[2])) if len(parts) > 2 else 1.5
    steps = int(parts[3]) if len(parts) > 3 else 50
    if steps < 1:
        raise ValueError("grid needs at least one step")
    if steps > 1 and hi <= lo:
        raise ValueError("grid of zero width")
    if steps == 1:
        values = [lo]
    else:
        values = [lo + k * (hi - lo) / (steps - 1) for k in range(steps)]
    return i, values


def cmd_sweep(args) -> int:
    graph = _load(args.path)
    _usable(graph)
    if len(args.feature_grid) != 2:
        raise ValueError("sweep needs exactly two --feature-grid specs")
    (i, vi), (j, vj) = (_parse_grid(s, graph) for s in args.feature_grid)
    if i == j:
        raise ValueError("swept coordinates must be distinct")
    base = np.zeros(graph.n)
    for chunk in args.fixed or []:
        for item in chunk.split(","):
            if not item.strip():
                continue
            name, _, value = item.partition("=")
            if not value:
                raise ValueError(f"bad --fixed entry {item!r}, want NAME=VALUE")
            k = _resolve_feature(graph, name.strip())
            if k in (i, j):
                raise ValueError(f"feature {name.strip()!r} is already swept")
            base[k] = float(_parse_scalar(value))

    cutoff = SUPPORT_ZERO_REL * float(graph.budget)
    writer = csv.writer(sys.stdout, lineterminator="\n")
    writer.writerow(["beta_i", "beta_j", "support", "utility"])
    warned = False
    for bi in vi:
        for bj in vj:
            beta = base.copy()
            beta[i], beta[j] = bi, bj
            if not beta.any():
                # all-zero mechanism: the agent is indifferent everywhere
                writer.writerow([repr(bi), repr(bj), "", repr(0.0)])
                continue
            try:
                profile = best_response(graph, beta)
            except NonConvergence as e:
                if not warned:
                    print(
                        "warning: best response did not fully converge at "
                        f"grid point ({bi!r}, {bj!r}); using best iterate",
                        file=sys.stderr,
                    )
                    warned = True
                profile = e.profile
            x = np.array(profile.values)
            x[x < cutoff] = 0.0
            support = "+".join(
                sorted(graph.actions[k] for k in range(graph.m) if x[k] > 0)
            )
            t = graph.feature_inputs(x)
            utility = float(
                sum(b * fn.value(ti) for b, fn, ti in zip(beta, graph.fns, t))
            )
            writer.writerow([repr(bi), repr(bj), support, repr(utility)])
    return OK


def _parse_edge_tokens(tokens) -> SimpleGraph:
    names: list[str] = []
    index: dict[str, int] = {}

    def vertex(name: str) -> int:
        if name not in index:
            index[name] = len(names)
            names.append(name)
        return index[name]

    edges = []
    for tok in tokens:
        tok = tok.strip()
        if not tok:
            continue
        if "-" in tok:
            parts = tok.split("-")
            if len(parts) != 2 or not parts[0] or not parts[1]:
                raise ValueError(f"bad edge token {tok!r}, want U-V")
            edges.append((vertex(parts[0]), vertex(parts[1])))
        else:
            vertex(tok)
    if not names:
        raise ValueError("empty graph")
    return SimpleGraph(tuple(names), tuple(edges))


def cmd_gadget(args) -> int:
    if (args.edges is None) == (args.file is None):
        raise ValueError("give an inline edge list or --file, not both")
    if args.file is not None:
        with open(args.file, "r", encoding="utf-8") as fh:
            tokens = fh.read().replace("\n", ",").split(",")
    else:
        tokens = args.edges.split(",")
    graph = gadget_from_graph(_parse_edge_tokens(tokens))
    sys.stdout.write(emit_graph(graph))
    return OK


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="incentix",
        description="Effort-graph mechanism design: decide, synthesize, "
        "simulate, and optimize.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("validate", help="check a graph document")
    p.add_argument("path")
    p.set_defaults(fn=cmd_validate)

    p = sub.add_parser("kappa", help="exact substitutability of an action or set")
    p.add_argument("path")
    g = p.add_mutually_exclusive_group(required=True)
    g.add_argument("--action", help="action name or index")
    g.add_argument("--set", help="comma-separated action names or indices")
    p.set_defaults(fn=cmd_kappa)

    p = sub.add_parser("synthesize", help="mechanism incentivizing a profile")
    p.add_argument("path")
    p.add_argument("--profile", required=True,
                   help="comma-separated efforts, rationals or decimals")
    p.set_defaults(fn=cmd_synthesize)

    p = sub.add_parser("respond", help="agent best response to a mechanism")
    p.add_argument("path")
    p.add_argument("--beta", required=True, help="comma-separated weights")
    p.add_argument("--designated",
                   help="flag effort outside these actions as undesired")
    p.set_defaults(fn=cmd_respond)

    p = sub.add_parser("optimize", help="maximize an objective over "
                       "incentivizable profiles")
    p.add_argument("path")
    p.add_argument("--designated", required=True,
                   help="comma-separated action names or indices")
    p.add_argument("--objective", required=True,
                   help="card | entropy | dot:W | neg_sq_dist:T | weighted_min[:W]")
    p.set_defaults(fn=cmd_optimize)

    p = sub.add_parser("sweep", help="best-response support map over a "
                       "mechanism grid, as CSV")
    p.add_argument("path")
    p.add_argument("--feature-grid", action="append", required=True,
                   metavar="COORD[:LO[:HI[:STEPS]]]",
                   help="swept feature; give exactly twice "
                   "(defaults 0, 1.5, 50)")
    p.add_argument("--fixed", action="append", metavar="NAME=VALUE[,...]",
                   help="held-fixed mechanism entries; unlisted features are 0")
    p.set_defaults(fn=cmd_sweep)

    p = sub.add_parser("gadget", help="emit the independent-set gadget graph")
    p.add_argument("edges", nargs="?",
                   help="inline edge list like u-v,v-w; bare names are "
                   "isolated vertices")
    p.add_argument("--file", help="file with the same edge-list syntax")
    p.set_defaults(fn=cmd_gadget)
    return parser


def main(argv=None) -> int:
    args = _build_parser().parse_args(argv)
    try:
        return args.fn(args)
    except json.JSONDecodeError as e:
        return _fail(f"parse error at line {e.lineno}, column {e.colno}: {e.msg}")
    except FileNotFoundError as e:
        return _fail(f"cannot read {e.filename!r}")
    except NotIncentivizable as e:
        _emit(_certificate_doc(e.certificate, False))
        return INFEASIBLE
    except InfeasibleDesignatedSet as e:
        print(f"error: {e}", file=sys.stderr)
        return INFEASIBLE
    except (DocumentError, ValueError) as e:
        return _fail(str(e))
    except (KeyError, IndexError) as e:
        return _fail(e.args[0] if e.args else str(e))
    except (DegenerateSynthesis, NonConvergence) as e:
        return _fail(str(e))


if __name__ == "__main__":
    sys.exit(main())
