"""Variance objective for additive location-parameter SEMs.

Model: ``X_j = sum(pa(X_j)) + e_j`` with independent noises of variance
``v_j`` and system cost ``g(Y) = ||Y_t - E Y_t||^2`` for one target ``t``.
When every ancestor of ``t`` reaches it along a single path, the expected
cost after imputing ``I`` has a closed form, computed here without sampling.
"""

from __future__ import annotations

from collections.abc import Iterable, Sequence
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

from .errors import HypothesisError, ValidationError
from .graph import Dag, mask_to_nodes, nodes_to_mask
from .sem import AdditiveNoise, ImputationPlan, NoiseSpec, Real, Realization, Sem
from .setfunc import CHECK_LIMIT, SetFunction, is_nondecreasing, is_submodular


class Violation(NamedTuple):
    kind: str
    detail: str
    witness: tuple = ()

    def __str__(self) -> str:
        return f"{self.kind}: {self.detail}"


@dataclass(frozen=True, eq=False)
class AdditiveSemSpec:
    dag: Dag
    variances: tuple[float, ...]
    target: int
    cost: SetFunction

    def __init__(self, dag: Dag, variances: Sequence[float | Sequence[float]], target: int, cost: SetFunction | None = None):
        v = []
        for x in variances:
            # vector nodes: squared norm is coordinate-separable
            s = float(np.sum(np.asarray(x, dtype=float)))
            if not np.isfinite(s) or s < 0:
                raise ValidationError(f"noise variance must be finite and non-negative, got {x!r}", "variances")
            v.append(s)
        if len(v) != dag.node_count:
            raise ValidationError(f"need {dag.node_count} variances, got {len(v)}", "variances")
        if not 0 <= target < dag.node_count:
            raise ValidationError(f"target {target} out of range", "target")
        if cost is None:
            cost = SetFunction.modular([0.0] * dag.node_count, name="zero")
        if cost.m != dag.node_count:
            raise ValidationError(f"cost ground set {cost.m} != node count {dag.node_count}", "cost")
        object.__setattr__(self, "dag", dag)
        object.__setattr__(self, "variances", tuple(v))
        object.__setattr__(self, "target", int(target))
        object.__setattr__(self, "cost", cost)

    @property
    def node_count(self) -> int:
        return self.dag.node_count

    @property
    def relevant_mask(self) -> int:
        """The target and its ancestors: the only nodes whose noise reaches the target."""
        return self.dag.ancestor_mask(self.target) | (1 << self.target)


def check_hypotheses(spec: AdditiveSemSpec, slack: float = 1e-9) -> list[Violation]:
    out = []
    t = spec.target
    for j in mask_to_nodes(spec.dag.ancestor_mask(t)):
        k = spec.dag.path_count(j, t)
        if k != 1:
            out.append(Violation("unique_path", f"{k} paths from node {j} to target {t}", (j, t, k)))
    if spec.node_count <= CHECK_LIMIT:
        res = is_submodular(spec.cost, slack)
        if not res:
            A, B, i = res.witness
            out.append(Violation("cost_not_submodular", f"marginal of {i} grows from {list(A)} to {list(B)}", res.witness))
    return out


def _require(spec: AdditiveSemSpec) -> None:
    bad = check_hypotheses(spec)
    if bad:
        raise HypothesisError(bad)


def _zeroed(spec: AdditiveSemSpec, I: int) -> int:
    # only imputations on the target's ancestral set change the target; each
    # one removes its own noise and, by path uniqueness, that of its ancestors
    rel = spec.relevant_mask
    z = 0
    for j in mask_to_nodes(I & rel):
        z |= (1 << j) | spec.dag.ancestor_mask(j)
    return z & rel


def baseline_variance(spec: AdditiveSemSpec) -> float:
    return float(sum(spec.variances[j] for j in mask_to_nodes(spec.relevant_mask)))


def closed_form_G(spec: AdditiveSemSpec, I: int | Iterable[int], check: bool = True) -> float:
    """Expected ``||Y_t - E Y_t||^2`` after imputing ``I`` (bitmask or node iterable)."""
    if check:
        _require(spec)
    mask = I if isinstance(I, (int, np.integer)) else nodes_to_mask(I)
    mask = int(mask)
    if (mask >> spec.target) & 1:
        return 0.0
    live = spec.relevant_mask & ~_zeroed(spec, mask)
    return float(sum(spec.variances[j] for j in mask_to_nodes(live)))


def build_G(spec: AdditiveSemSpec) -> SetFunction:
    _require(spec)
    return SetFunction(spec.node_count, lambda s: closed_form_G(spec, s, check=False), "G")


def build_F(spec: AdditiveSemSpec) -> SetFunction:
    """``F(I) = c(I) + G(I)``, the minimization objective."""
    _require(spec)
    c = spec.cost
    return SetFunction(spec.node_count, lambda s: c(s) + closed_form_G(spec, s, check=False), "F")


def build_F_max(spec: AdditiveSemSpec) -> SetFunction:
    """``F'(I) = c(I) - G(I)``, the maximization variant with negated variance cost.

    Also requires ``c`` to be nondecreasing (checked when ``|V| <= 12``).
    """
    _require(spec)
    c = spec.cost
    if spec.node_count <= CHECK_LIMIT:
        mono = is_nondecreasing(c)
        if not mono:
            S, T = mono.witness
            raise HypothesisError([Violation("cost_not_nondecreasing", f"c{list(S)} > c{list(T)}", mono.witness)])
    return SetFunction(spec.node_count, lambda s: c(s) - closed_form_G(spec, s, check=False), "F_max")


def materialize(spec: AdditiveSemSpec, noise_means: Sequence[float] | None = None) -> Sem:
    """Gaussian SEM with unit parent weights and node noise variances ``v_j``."""
    means = noise_means if noise_means is not None else [0.0] * spec.node_count
    mechs = [AdditiveNoise(NoiseSpec.gaussian(mu, np.sqrt(v))) for mu, v in zip(means, spec.variances)]
    return Sem(spec.dag, mechs, [Real(1)] * spec.node_count)


def mean_after(sem: Sem, plan: ImputationPlan) -> list[float]:
    """Exact node means of an additive SEM after imputation (linear propagation)."""
    forced = plan.as_dict()
    mu = [0.0] * sem.node_count
    for i in sem.dag.order:
        if i in forced:
            mu[i] = float(forced[i])
            continue
        mech = sem.mechanisms[i]
        pa = sem.dag.parents(i)
        w = mech.weights if mech.weights is not None else (1.0,) * len(pa)
        mu[i] = mech.noise.mean + sum(wj * mu[p] for wj, p in zip(w, pa))
    return mu


def single_value_plan(I: int | Iterable[int], values: Sequence[float] | None = None) -> ImputationPlan:
    nodes = mask_to_nodes(I) if isinstance(I, (int, np.integer)) else sorted(I)
    vals = [0.0 if values is None else float(values[v]) for v in nodes]
    return ImputationPlan(tuple(nodes), tuple(vals))


def target_variance_cost(sem: Sem, target: int, plan: ImputationPlan):
    """``g(Y) = (Y_t - E Y_t)^2`` with the mean taken under ``plan``."""
    mu = mean_after(sem, plan)[target]

    def g(y: Realization) -> np.ndarray:
        d = np.asarray(y[target], dtype=float) - mu
        return d * d

    return g
