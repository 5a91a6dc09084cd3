"""Command line: ``solve``, ``check``, ``sample`` and ``eval`` on problem files.

Exit codes: 0 success, 2 invalid input, 3 size limit or infeasible problem.
"""

from __future__ import annotations

import argparse
import json
import sys
import time
from pathlib import Path

import numpy as np

from . import additive, lingauss
from .core import SolveReport, brute_force_solve, estimate
from .errors import (
    BadEdgeError,
    CycleError,
    DimensionError,
    DomainError,
    HypothesisError,
    OciError,
    ParseError,
    SingularError,
    TooLargeError,
    ValidationError,
)
from .io import ProblemFile, _jsonable, dumps_report, parse_problem, report_to_dict
from .sem import ImputationPlan, impute, sample
from .setfunc import (
    ConstraintOracle,
    brute_force_extremum,
    greedy_maximize,
    is_nondecreasing,
    is_submodular,
    minimize_single_value,
)

EXIT_OK, EXIT_INVALID, EXIT_LIMIT = 0, 2, 3

DEFAULT_METHOD = {
    "sem": "brute",
    "additive_variance": "lovasz-min",
    "set_function": "lovasz-min",
    "linear_gaussian": "enumerate",
}
METHODS = {
    "sem": {"brute"},
    "additive_variance": {"brute", "lovasz-min", "greedy-max"},
    "set_function": {"brute", "lovasz-min", "greedy-max"},
    "linear_gaussian": {"enumerate", "brute"},
}


class Infeasible(OciError):
    pass


def _settings(args, pf: ProblemFile) -> dict:
    h = pf.hints
    return {
        "seed": args.seed if args.seed is not None else h.get("seed", 0),
        "samples": args.samples if args.samples is not None else h.get("samples", 10_000),
        "max_card": args.max_card if getattr(args, "max_card", None) is not None else h.get("max_card"),
        "method": getattr(args, "method", None) or h.get("method") or DEFAULT_METHOD[pf.kind],
        "mode": "exact" if h.get("exact") else "auto",
    }


def _grids(args, pf: ProblemFile) -> dict[int, list]:
    raw = pf.hints.get("grids", {})
    if getattr(args, "grid", None):
        try:
            raw = json.loads(args.grid)
        except json.JSONDecodeError as e:
            raise ParseError(f"--grid is not valid JSON: {e.msg}", field="--grid") from e
        if not isinstance(raw, dict):
            raise ValidationError("expected an object mapping node to a list of values", "--grid")
    out = {}
    for k, vals in raw.items():
        key = int(k) if isinstance(k, str) and k.isdigit() and k not in pf.names else k
        if not isinstance(vals, list):
            raise ValidationError(f"grid for {k!r} must be a list", "--grid")
        out[pf.index_of(key)] = vals
    return out


def _constraint(pf: ProblemFile, max_card) -> ConstraintOracle:
    if max_card is not None:
        return ConstraintOracle.cardinality(int(max_card))
    if pf.kind == "set_function":
        return pf.model[1]
    return ConstraintOracle.unconstrained()


def _require_hypotheses(pf: ProblemFile) -> None:
    if pf.violations:
        raise HypothesisError(pf.violations)


def _set_report(subset, value, method, F=None, extra=None) -> SolveReport:
    table = None
    if F is not None and F.m <= 12:
        table = {s: float(v) for s, v in enumerate(F.table())}
    return SolveReport(tuple(subset), (), float(value), method, table=table, extra=extra or {})


def solve(args, pf: ProblemFile) -> SolveReport:
    st = _settings(args, pf)
    method = st["method"]
    if method not in METHODS[pf.kind]:
        raise ValidationError(f"method {method!r} not available for kind {pf.kind!r}; use one of {sorted(METHODS[pf.kind])}", "--method")
    t0 = time.perf_counter()
    if pf.kind == "sem":
        grids = _grids(args, pf)
        if not grids:
            raise ValidationError("brute force over a SEM needs value grids (--grid or hints.grids)", "--grid")
        report = brute_force_solve(pf.model, grids, st["samples"], st["seed"], st["mode"])
    elif pf.kind == "linear_gaussian":
        if method == "enumerate":
            report = lingauss.enumerate_solve(pf.model)
        else:
            grids = _grids(args, pf)
            if not grids:
                raise ValidationError("brute force needs value grids (--grid or hints.grids)", "--grid")
            report = brute_force_solve(lingauss.materialize(pf.model), grids, st["samples"], st["seed"], "mc")
    else:
        if pf.kind == "additive_variance":
            _require_hypotheses(pf)
            sense = pf.body.get("objective", "min")
            F = additive.build_F(pf.model) if sense == "min" and method != "greedy-max" else additive.build_F_max(pf.model)
            if method == "greedy-max":
                sense = "max"
        else:
            F = pf.model[0]
            sense = "max" if method == "greedy-max" else pf.body.get("objective", "min")
        con = _constraint(pf, st["max_card"])
        if method == "lovasz-min":
            if con.kind != "none":
                raise ValidationError("lovasz-min solves the unconstrained problem; drop the constraint", "--max-card" if st["max_card"] is not None else "body.constraint")
            subset, value = minimize_single_value(F)
            report = _set_report(subset, value, method)
        elif method == "greedy-max":
            subset = greedy_maximize(F, con)
            report = _set_report(subset, F(subset), method)
        else:
            subset, value = brute_force_extremum(F, con, sense)
            if not np.isfinite(value):
                raise Infeasible("no feasible subset has a finite objective")
            report = _set_report(subset, value, method, F, {"direction": sense})
    if not np.isfinite(report.objective):
        raise Infeasible("no feasible plan has a finite objective")
    report.method = method
    report.wall_time = time.perf_counter() - t0
    return report


def check(args, pf: ProblemFile) -> dict:
    out: dict = {"kind": pf.kind, "problem_digest": pf.digest, "violations": []}
    if pf.kind == "set_function":
        F = pf.model[0]
        sub, mono = is_submodular(F), is_nondecreasing(F)
        out["submodular"] = sub.holds
        out["nondecreasing"] = mono.holds
        if not sub:
            A, B, i = sub.witness
            out["violations"].append({"kind": "not_submodular", "triple": {"smaller": list(A), "larger": list(B), "element": i}})
        if not mono:
            S, T = mono.witness
            out["violations"].append({"kind": "not_nondecreasing", "pair": {"smaller": list(S), "larger": list(T)}})
    elif pf.kind == "additive_variance":
        for v in pf.violations:
            out["violations"].append({"kind": v.kind, "detail": v.detail, "witness": _jsonable(v.witness)})
        if not pf.violations and pf.model.node_count <= 12:
            F, Fmax = additive.build_F(pf.model), additive.build_F_max(pf.model)
            sub = is_submodular(F)
            out["F_submodular"] = sub.holds
            if not sub:
                out["F_witness"] = _jsonable(sub.witness)
            out["F_max_submodular"] = is_submodular(Fmax).holds
            out["F_max_nondecreasing"] = is_nondecreasing(Fmax).holds
    elif pf.kind == "linear_gaussian":
        m = lingauss.build_matrices(pf.model, 0)
        out["N"] = pf.model.N
        out["P_unit_lower_triangular"] = bool(np.allclose(np.triu(m.P, 1), 0) and np.all(np.diag(m.P) == 1))
    else:
        sem = pf.model.sem
        out["nodes"] = sem.node_count
        out["topological_order"] = [sem.names[i] for i in sem.dag.order]
        out["finite"] = sem.is_finite
    return out


def _parse_plan(text: str, pf: ProblemFile) -> ImputationPlan:
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as e:
        raise ParseError(f"--plan is not valid JSON: {e.msg}", field="--plan") from e
    if not isinstance(doc, dict) or set(doc) - {"nodes", "values"} or "nodes" not in doc:
        raise ValidationError('expected {"nodes": [...], "values": [...]}', "--plan")
    nodes = [pf.index_of(v) for v in doc["nodes"]]
    values = doc.get("values")
    if values is None:
        if pf.kind in ("sem", "linear_gaussian"):
            raise ValidationError("values are required for this kind", "--plan")
        values = [0.0] * len(nodes)
    if len(values) != len(nodes):
        raise ValidationError("need one value per node", "--plan")
    values = [tuple(v) if isinstance(v, list) else v for v in values]
    return ImputationPlan(tuple(nodes), tuple(values))


def _sem_of(pf: ProblemFile):
    if pf.kind == "sem":
        return pf.model.sem
    if pf.kind == "linear_gaussian":
        return lingauss.materialize(pf.model).sem
    if pf.kind == "additive_variance":
        return additive.materialize(pf.model)
    raise ValidationError("set_function problems have no SEM to sample", "kind")


def evaluate_plan(args, pf: ProblemFile) -> dict:
    st = _settings(args, pf)
    plan = _parse_plan(args.plan, pf)
    out = {"plan": {"nodes": [pf.names[i] for i in plan.nodes], "values": _jsonable(plan.values)}}
    if pf.kind == "sem":
        value, se = estimate(pf.model, plan, st["samples"], st["seed"], st["mode"])
        out.update(objective=value, stderr=se, seed=st["seed"], n_samples=st["samples"])
    elif pf.kind == "linear_gaussian":
        if args.simulate:
            value, se = estimate(lingauss.materialize(pf.model), plan, st["samples"], st["seed"], "mc")
            out.update(objective=value, stderr=se, seed=st["seed"], n_samples=st["samples"])
        else:
            x = np.zeros(pf.model.N)
            for i, v in zip(plan.nodes, plan.values):
                x[i] = float(v)
            out.update(objective=lingauss.analytic_objective(pf.model, list(plan.nodes), x), stderr=0.0)
    else:
        if pf.kind == "additive_variance":
            _require_hypotheses(pf)
            sense = pf.body.get("objective", "min")
            F = additive.build_F(pf.model) if sense == "min" else additive.build_F_max(pf.model)
        else:
            F = pf.model[0]
        out.update(objective=F(plan.nodes), stderr=0.0)
    return _jsonable(out)


def sample_cmd(args, pf: ProblemFile) -> list[dict]:
    st = _settings(args, pf)
    sem = _sem_of(pf)
    n = args.samples if args.samples is not None else 1
    base = sample(sem, st["seed"], n)
    if args.plan:
        base = impute(sem, base, _parse_plan(args.plan, pf))
    rows = []
    for k in range(base.n):
        rows.append({"sample": k, "values": {sem.names[i]: _jsonable(base[i][k]) for i in range(sem.node_count)}})
    return rows


def _write(text: str, out: str | None) -> None:
    if out:
        Path(out).write_text(text)
    else:
        sys.stdout.write(text)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="causal-imputation", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("--problem", required=True, help="problem file (JSON)")
        p.add_argument("--seed", type=int, default=None)
        p.add_argument("--samples", type=int, default=None)
        p.add_argument("--out", default=None, help="write output here instead of stdout")

    p = sub.add_parser("solve", help="find the optimal imputation plan")
    common(p)
    p.add_argument("--method", choices=["brute", "lovasz-min", "greedy-max", "enumerate"])
    p.add_argument("--grid", help='value grids, e.g. \'{"x1": [-1, 0, 1]}\'')
    p.add_argument("--max-card", type=int, dest="max_card")

    p = sub.add_parser("check", help="verify structural hypotheses and set-function properties")
    common(p)

    p = sub.add_parser("sample", help="draw realizations (optionally imputed)")
    common(p)
    p.add_argument("--plan", default=None)

    p = sub.add_parser("eval", help="score one imputation plan")
    common(p)
    p.add_argument("--plan", required=True, help='e.g. \'{"nodes": [1], "values": [0]}\'')
    p.add_argument("--simulate", action="store_true", help="Monte-Carlo instead of closed form (linear_gaussian)")
    return parser


def _error(kind: str, exc: Exception, code: int) -> int:
    doc = {"error": kind, "message": str(exc)}
    for attr in ("field", "line"):
        if getattr(exc, attr, None) is not None:
            doc[attr] = getattr(exc, attr)
    if isinstance(exc, HypothesisError):
        doc["violations"] = [str(v) for v in exc.violations]
    sys.stderr.write(json.dumps(doc, sort_keys=True) + "\n")
    return code


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        pf = parse_problem(args.problem)
        if args.command == "solve":
            report = solve(args, pf)
            _write(dumps_report(report_to_dict(report, pf)), args.out)
        elif args.command == "check":
            _write(json.dumps(_jsonable(check(args, pf)), sort_keys=True, indent=2) + "\n", args.out)
        elif args.command == "eval":
            _write(json.dumps(evaluate_plan(args, pf), sort_keys=True) + "\n", args.out)
        else:
            _write("".join(json.dumps(r, sort_keys=True) + "\n" for r in sample_cmd(args, pf)), args.out)
    except (TooLargeError, SingularError, Infeasible) as e:
        return _error(type(e).__name__, e, EXIT_LIMIT)
    except (ParseError, ValidationError, HypothesisError, CycleError, BadEdgeError, DomainError, DimensionError) as e:
        return _error(type(e).__name__, e, EXIT_INVALID)
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
