"""Problem files, report files and their canonical JSON forms."""

from __future__ import annotations

import copy
import hashlib
import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any

import jsonschema
import numpy as np

from . import __version__
from .additive import AdditiveSemSpec, check_hypotheses
from .core import OciProblem, SolveReport, quadratic_cost
from .errors import OciError, ParseError, TooLargeError, ValidationError
from .graph import Dag
from .lingauss import ENUM_LIMIT as LG_LIMIT
from .lingauss import TrellisProblem
from .sem import AdditiveNoise, Finite, NoiseSpec, Real, Realization, Sem, Table, squared_deviation
from .setfunc import ENUM_LIMIT, ConstraintOracle, SetFunction

FORMAT_VERSION = "1.0"
KINDS = ("sem", "additive_variance", "linear_gaussian", "set_function")

_num = {"type": "number"}
_nums = {"type": "array", "items": _num}
_name = {"type": "string", "minLength": 1}
_edges = {"type": "array", "items": {"type": "array", "items": _name, "minItems": 2, "maxItems": 2}}


def _obj(props: dict, required=()) -> dict:
    return {"type": "object", "properties": props, "required": list(required), "additionalProperties": False}


_set_cost = {
    "oneOf": [
        _obj({"type": {"const": "modular"}, "weights": _nums, "offset": _num}, ["type", "weights"]),
        _obj({"type": {"const": "table"}, "values": _nums}, ["type", "values"]),
        _obj(
            {
                "type": {"const": "coverage"},
                "sets": {"type": "array", "items": {"type": "array", "items": {"type": "integer", "minimum": 0}}},
                "weights": _nums,
            },
            ["type", "sets", "weights"],
        ),
    ]
}

_noise = {
    "oneOf": [
        _obj({"dist": {"const": "gaussian"}, "mean": _num, "std": {"type": "number", "minimum": 0}}, ["dist"]),
        _obj({"dist": {"const": "uniform"}, "low": _num, "high": _num}, ["dist", "low", "high"]),
        _obj({"dist": {"const": "degenerate"}, "value": _num}, ["dist"]),
    ]
}

_nested = {"type": "array"}

_mechanism = {
    "oneOf": [
        _obj({"type": {"const": "additive"}, "noise": _noise, "weights": _nums}, ["type", "noise"]),
        _obj({"type": {"const": "table"}, "probs": _nested}, ["type", "probs"]),
    ]
}

_domain = {
    "oneOf": [
        _obj({"type": {"const": "finite"}, "size": {"type": "integer", "minimum": 1}}, ["type", "size"]),
        _obj({"type": {"const": "real"}, "dim": {"type": "integer", "minimum": 1}}, ["type"]),
    ]
}

_value = {"oneOf": [_num, _nums]}

BODY_SCHEMAS = {
    "sem": _obj(
        {
            "nodes": {
                "type": "array",
                "minItems": 1,
                "items": _obj({"name": _name, "domain": _domain, "mechanism": _mechanism}, ["name", "mechanism"]),
            },
            "edges": _edges,
            "cost": _obj(
                {"type": {"const": "quadratic"}, "delta": _nums, "q": _nums, "fixed": {"type": "number", "minimum": 0}},
                ["type"],
            ),
            "system_cost": {
                "oneOf": [
                    _obj(
                        {"type": {"const": "squared_error"}, "nodes": {"type": "array", "items": _name}, "targets": {"type": "array", "items": _value}},
                        ["type", "nodes"],
                    ),
                    _obj({"type": {"const": "linear"}, "weights": {"type": "object", "additionalProperties": _num}, "offset": _num}, ["type", "weights"]),
                    _obj({"type": {"const": "constant"}, "value": _num}, ["type", "value"]),
                ]
            },
        },
        ["nodes", "system_cost"],
    ),
    "additive_variance": _obj(
        {
            "nodes": {"type": "array", "items": _name, "minItems": 1},
            "edges": _edges,
            "variances": {"type": "array", "items": _value},
            "target": _name,
            "cost": _set_cost,
            "objective": {"enum": ["min", "max"]},
        },
        ["nodes", "variances", "target"],
    ),
    "linear_gaussian": _obj(
        {
            "A": {"type": "array", "items": _nums, "minItems": 1},
            "sigma2": _num,
            "T": {"type": "integer"},
            "q": _nums,
            "delta": _nums,
            "ybar": _nums,
        },
        ["A", "sigma2", "T", "q", "delta", "ybar"],
    ),
    "set_function": _obj(
        {
            "m": {"type": "integer", "minimum": 0},
            "values": _nums,
            "constraint": {
                "oneOf": [
                    _obj({"type": {"const": "cardinality"}, "k": {"type": "integer", "minimum": 0}}, ["type", "k"]),
                    _obj({"type": {"const": "explicit"}, "sets": {"type": "array", "items": {"type": "array", "items": {"type": "integer", "minimum": 0}}}}, ["type", "sets"]),
                ]
            },
            "objective": {"enum": ["min", "max"]},
        },
        ["m", "values"],
    ),
}

HINTS_SCHEMA = _obj(
    {
        "samples": {"type": "integer", "minimum": 2},
        "seed": {"type": "integer", "minimum": 0},
        "grids": {"type": "object", "additionalProperties": {"type": "array", "items": _value}},
        "max_card": {"type": "integer", "minimum": 0},
        "method": {"enum": ["brute", "lovasz-min", "greedy-max", "enumerate"]},
        "exact": {"type": "boolean"},
    }
)

FILE_SCHEMA = _obj(
    {"format_version": {"type": "string"}, "kind": {"enum": list(KINDS)}, "body": {"type": "object"}, "hints": HINTS_SCHEMA},
    ["format_version", "kind", "body"],
)


def canonical_json(obj: Any) -> str:
    return json.dumps(obj, sort_keys=True, separators=(",", ":"), allow_nan=False)


@dataclass
class ProblemFile:
    format_version: str
    kind: str
    body: dict
    hints: dict = field(default_factory=dict)
    model: Any = field(default=None, compare=False, repr=False)
    violations: list = field(default_factory=list, compare=False, repr=False)

    def to_dict(self) -> dict:
        out = {"format_version": self.format_version, "kind": self.kind, "body": copy.deepcopy(self.body)}
        if self.hints:
            out["hints"] = copy.deepcopy(self.hints)
        return out

    def dumps(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True, indent=2) + "\n"

    @property
    def digest(self) -> str:
        return hashlib.sha256(canonical_json(self.to_dict()).encode()).hexdigest()

    @property
    def names(self) -> list[str]:
        b = self.body
        if self.kind == "sem":
            return [n["name"] for n in b["nodes"]]
        if self.kind == "additive_variance":
            return list(b["nodes"])
        if self.kind == "set_function":
            return [str(i) for i in range(b["m"])]
        return _trellis_names(self.model)

    def index_of(self, node) -> int:
        names = self.names
        if isinstance(node, int) and not isinstance(node, bool):
            if not 0 <= node < len(names):
                raise ValidationError(f"node index {node} out of range", "plan")
            return node
        if node in names:
            return names.index(node)
        raise ValidationError(f"unknown node {node!r}", "plan")


def _trellis_names(p: TrellisProblem) -> list[str]:
    return [f"x{k}_{t}" for t in range(p.T + 1) for k in range(p.n)]


# --------------------------------------------------------------------------- parsing


def _field_path(err: jsonschema.ValidationError) -> str:
    return "/".join(str(p) for p in err.absolute_path) or "<root>"


def _validate_schema(doc: Any, schema: dict, prefix: str) -> None:
    errors = sorted(jsonschema.Draft202012Validator(schema).iter_errors(doc), key=lambda e: list(map(str, e.absolute_path)))
    if errors:
        e = errors[0]
        path = _field_path(e)
        raise ValidationError(e.message, f"{prefix}/{path}" if prefix else path)


def _reject_constant(token: str):
    raise ValueError(f"non-standard JSON number {token}")


def loads_problem(text: str) -> ProblemFile:
    try:
        doc = json.loads(text, parse_constant=_reject_constant)
    except json.JSONDecodeError as e:
        raise ParseError(e.msg, line=e.lineno) from e
    except ValueError as e:
        raise ParseError(str(e)) from e
    return problem_from_dict(doc)


def parse_problem(path: str | Path) -> ProblemFile:
    try:
        text = Path(path).read_text()
    except OSError as e:
        raise ParseError(f"cannot read {path}: {e.strerror}") from e
    return loads_problem(text)


def problem_from_dict(doc: dict) -> ProblemFile:
    _validate_schema(doc, FILE_SCHEMA, "")
    if doc["format_version"].split(".")[0] != FORMAT_VERSION.split(".")[0]:
        raise ValidationError(f"unsupported format version {doc['format_version']!r}", "format_version")
    kind = doc["kind"]
    _validate_schema(doc["body"], BODY_SCHEMAS[kind], "body")
    pf = ProblemFile(doc["format_version"], kind, copy.deepcopy(doc["body"]), copy.deepcopy(doc.get("hints", {})))
    try:
        pf.model = BUILDERS[kind](pf.body)
    except ValidationError as e:
        if e.field and not e.field.startswith("body"):
            raise ValidationError(str(e).split(": ", 1)[-1], f"body/{e.field}") from e
        raise
    except TooLargeError:
        raise
    except OciError as e:
        raise ValidationError(str(e), "body") from e
    if kind == "additive_variance":
        pf.violations = check_hypotheses(pf.model)
    _check_grids(pf)
    return pf


def _check_grids(pf: ProblemFile) -> None:
    for name in pf.hints.get("grids", {}):
        if name not in pf.names:
            raise ValidationError(f"grid for unknown node {name!r}", "hints/grids")


def _name_index(names: list[str]) -> dict[str, int]:
    idx = {}
    for k, n in enumerate(names):
        if n in idx:
            raise ValidationError(f"duplicate node name {n!r}", "nodes")
        idx[n] = k
    return idx


def _edges(body: dict, idx: dict[str, int]) -> list[tuple[int, int]]:
    out = []
    for k, (a, b) in enumerate(body.get("edges", [])):
        for x in (a, b):
            if x not in idx:
                raise ValidationError(f"edge references unknown node {x!r}", f"edges/{k}")
        out.append((idx[a], idx[b]))
    return out


def _set_function(spec: dict | None, m: int, name: str) -> SetFunction:
    if spec is None:
        return SetFunction.modular([0.0] * m, name=name)
    t = spec["type"]
    if t == "modular":
        if len(spec["weights"]) != m:
            raise ValidationError(f"need {m} weights", "cost/weights")
        f = SetFunction.modular(spec["weights"], spec.get("offset", 0.0), name)
    elif t == "table":
        if len(spec["values"]) != 1 << m:
            raise ValidationError(f"need 2^{m} = {1 << m} values", "cost/values")
        return SetFunction.from_table(spec["values"], name)
    else:
        if len(spec["sets"]) != m or any(w < 0 for w in spec["weights"]):
            raise ValidationError(f"need {m} sets and non-negative weights", "cost")
        if any(i >= len(spec["weights"]) for s in spec["sets"] for i in s):
            raise ValidationError("set references an item without a weight", "cost/sets")
        f = SetFunction.coverage(spec["sets"], spec["weights"], name)
    return SetFunction.from_table(f.table(), name) if m <= ENUM_LIMIT else f


def _build_set_function(body: dict):
    m = body["m"]
    if m > ENUM_LIMIT:
        raise TooLargeError(f"set_function ground set {m} exceeds the enumeration limit {ENUM_LIMIT}; split the problem")
    if len(body["values"]) != 1 << m:
        raise ValidationError(f"need 2^{m} = {1 << m} values, got {len(body['values'])}", "values")
    F = SetFunction.from_table(body["values"], "F")
    c = body.get("constraint")
    if c is None:
        con = ConstraintOracle.unconstrained()
    elif c["type"] == "cardinality":
        con = ConstraintOracle.cardinality(c["k"])
    else:
        sets = [tuple(s) for s in c["sets"]]
        if any(i >= m for s in sets for i in s):
            raise ValidationError("constraint set references an element outside the ground set", "constraint/sets")
        con = ConstraintOracle.explicit([()] + sets)
    return F, con


def _build_additive(body: dict) -> AdditiveSemSpec:
    names = body["nodes"]
    if len(names) > ENUM_LIMIT:
        raise TooLargeError(f"{len(names)} nodes exceed the enumeration limit {ENUM_LIMIT}")
    idx = _name_index(names)
    dag = Dag(len(names), _edges(body, idx))
    if body["target"] not in idx:
        raise ValidationError(f"unknown target {body['target']!r}", "target")
    cost = _set_function(body.get("cost"), len(names), "c")
    return AdditiveSemSpec(dag, body["variances"], idx[body["target"]], cost)


def _build_trellis(body: dict) -> TrellisProblem:
    A = body["A"]
    if any(len(row) != len(A) for row in A):
        raise ValidationError("A must be square", "A")
    p = TrellisProblem(np.array(A, dtype=float), body["sigma2"], body["T"], body["q"], body["delta"], body["ybar"])
    if p.N > LG_LIMIT:
        raise TooLargeError(f"N = n(T+1) = {p.N} exceeds the enumeration limit {LG_LIMIT}; shorten the horizon")
    return p


def _noise(spec: dict) -> NoiseSpec:
    d = spec["dist"]
    if d == "gaussian":
        return NoiseSpec.gaussian(spec.get("mean", 0.0), spec.get("std", 1.0))
    if d == "uniform":
        if spec["high"] < spec["low"]:
            raise ValidationError("uniform noise needs low <= high", "noise")
        return NoiseSpec.uniform(spec["low"], spec["high"])
    return NoiseSpec.degenerate(spec.get("value", 0.0))


def _build_sem(body: dict) -> OciProblem:
    nodes = body["nodes"]
    names = [n["name"] for n in nodes]
    idx = _name_index(names)
    dag = Dag(len(nodes), _edges(body, idx))
    mechs, doms = [], []
    for k, n in enumerate(nodes):
        mech = n["mechanism"]
        try:
            if mech["type"] == "table":
                m = Table(np.array(mech["probs"], dtype=float))
                dom = Finite(m.size)
                if n.get("domain", {}).get("type", "finite") != "finite" or n.get("domain", {}).get("size", m.size) != m.size:
                    raise ValidationError("table width does not match the declared domain")
            else:
                dspec = n.get("domain", {"type": "real"})
                if dspec["type"] != "real":
                    raise ValidationError("additive mechanism needs a real domain")
                dom = Real(dspec.get("dim", 1))
                w = mech.get("weights")
                m = AdditiveNoise(_noise(mech["noise"]), tuple(w) if w is not None else None)
        except (ValidationError, ValueError) as e:
            raise ValidationError(str(e), f"nodes/{k}/mechanism") from e
        mechs.append(m)
        doms.append(dom)
    try:
        sem = Sem(dag, mechs, doms, names)
    except ValidationError as e:
        raise ValidationError(str(e), "nodes") from e
    n = len(nodes)
    cs = body.get("cost", {"type": "quadratic"})
    delta = cs.get("delta", [0.0] * n)
    q = cs.get("q", [0.0] * n)
    if len(delta) != n or len(q) != n:
        raise ValidationError(f"need {n} entries", "cost")
    if any(x < 0 for x in q):
        raise ValidationError("q_i >= 0 violated", "cost/q")
    base = quadratic_cost(delta, q)
    fixed = float(cs.get("fixed", 0.0))

    def cost(nodes_, values):
        return base(nodes_, values) + (fixed if nodes_ else 0.0)

    return OciProblem(sem, cost, _system_cost(body["system_cost"], idx, sem))


def _system_cost(spec: dict, idx: dict[str, int], sem: Sem):
    t = spec["type"]
    if t == "squared_error":
        for k, name in enumerate(spec["nodes"]):
            if name not in idx:
                raise ValidationError(f"unknown node {name!r}", f"system_cost/nodes/{k}")
        targets = spec.get("targets", [0.0] * len(spec["nodes"]))
        if len(targets) != len(spec["nodes"]):
            raise ValidationError("need one target per node", "system_cost/targets")
        return squared_deviation([idx[n] for n in spec["nodes"]], targets)
    if t == "linear":
        weights = {}
        for name, w in spec["weights"].items():
            if name not in idx:
                raise ValidationError(f"unknown node {name!r}", "system_cost/weights")
            if isinstance(sem.domains[idx[name]], Real) and sem.domains[idx[name]].dim != 1:
                raise ValidationError("linear cost needs scalar nodes", "system_cost/weights")
            weights[idx[name]] = float(w)
        offset = float(spec.get("offset", 0.0))

        def g(y: Realization) -> np.ndarray:
            out = np.full(y.n, offset)
            for i, w in weights.items():
                out = out + w * np.asarray(y[i], dtype=float)
            return out

        return g
    value = float(spec["value"])
    return lambda y: np.full(y.n, value)


BUILDERS = {
    "sem": _build_sem,
    "additive_variance": _build_additive,
    "linear_gaussian": _build_trellis,
    "set_function": _build_set_function,
}


# --------------------------------------------------------------------------- reports


def _jsonable(x):
    if isinstance(x, (np.integer,)):
        return int(x)
    if isinstance(x, (np.floating, float)):
        x = float(x)
        if not math.isfinite(x):
            return None if math.isnan(x) else ("inf" if x > 0 else "-inf")
        return x
    if isinstance(x, (tuple, list, np.ndarray)):
        return [_jsonable(v) for v in x]
    if isinstance(x, dict):
        return {str(k): _jsonable(v) for k, v in x.items()}
    return x


TABLE_SERIALIZE_LIMIT = 1 << 12


def report_to_dict(report: SolveReport, pf: ProblemFile) -> dict:
    names = pf.names
    result = {
        "subset": [names[i] for i in report.subset],
        "subset_indices": list(report.subset),
        "values": _jsonable(report.values),
        "objective": _jsonable(report.objective),
        "stderr": _jsonable(report.stderr),
    }
    if report.table is not None and len(report.table) <= TABLE_SERIALIZE_LIMIT:
        result["table"] = [
            {"subset_indices": [i for i in range(len(names)) if s >> i & 1], "objective": _jsonable(v)}
            for s, v in sorted(report.table.items())
        ]
    if report.extra:
        result["extra"] = _jsonable(report.extra)
    return {
        "tool": {"name": "causal-imputation", "version": __version__},
        "format_version": FORMAT_VERSION,
        "kind": pf.kind,
        "problem_digest": pf.digest,
        "method": report.method,
        "seed": report.seed,
        "n_samples": report.n_samples,
        "result": result,
        "timing": {"wall_time_s": report.wall_time},
    }


def dumps_report(doc: dict) -> str:
    return json.dumps(doc, sort_keys=True, indent=2) + "\n"


def without_timing(doc: dict) -> dict:
    return {k: v for k, v in doc.items() if k != "timing"}
