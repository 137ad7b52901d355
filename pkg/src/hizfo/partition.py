"""Budgeted tensor selection: DP solver, brute-force oracle, role assignment.

The selection problem: pick the tensor subset with the largest total
importance whose truncated-backward cost fits in ``rho * T_full`` FLOPs,
where the cost of a subset charges each selected tensor's weight-gradient
FLOPs plus activation propagation through every layer down to and
including the deepest selected one.

The DP runs on a quantized budget axis of ``buckets`` cells (transition
costs rounded up, so a reported plan never actually exceeds the budget)
and scans every candidate "nearest selected predecessor" per cell, which
is what makes inter-tensor propagation costs exact. Time complexity is
O(N^2 * buckets). Tensors with negative importance are never selected:
they can only hurt a maximization.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

from .importance import ImportanceProfile
from .models import CostModel, LayeredModel
from .tensors import ConfigurationError, Role

_TOL = 1e-9  # forgives float noise when costs are exact bucket multiples


@dataclass
class PartitionPlan:
    fo_set: list[str]
    zo_set: list[str]
    budget_ratio: float
    budget_flops: float
    consumed_flops: int
    achieved_importance: float
    quantization_buckets: int
    warning: str | None = None

    def to_dict(self) -> dict:
        d = {
            "rho": self.budget_ratio,
            "budget_flops": self.budget_flops,
            "consumed_flops": self.consumed_flops,
            "fo": list(self.fo_set),
            "zo": list(self.zo_set),
            "achieved_importance": self.achieved_importance,
        }
        if self.warning:
            d["warning"] = self.warning
        return d

    def save_json(self, path) -> None:
        with open(path, "w") as f:
            json.dump(self.to_dict(), f, indent=2, sort_keys=True)
            f.write("\n")

    @classmethod
    def from_dict(cls, d: dict, buckets: int = 0) -> "PartitionPlan":
        return cls(
            fo_set=list(d["fo"]),
            zo_set=list(d["zo"]),
            budget_ratio=float(d["rho"]),
            budget_flops=float(d["budget_flops"]),
            consumed_flops=int(d["consumed_flops"]),
            achieved_importance=float(d["achieved_importance"]),
            quantization_buckets=int(buckets),
            warning=d.get("warning"),
        )


def _check_keys(profile: ImportanceProfile, cost: CostModel):
    names = cost.names()
    if set(names) != set(profile.scores):
        raise ConfigurationError("importance profile and cost model cover different tensors")
    return names


def _transition_costs(cost: CostModel) -> np.ndarray:
    """delta[k, p+1]: cost of selecting entry k when the previous selected
    entry is p (p = -1 meaning none): grad_flops[k] plus propagation for
    entries p+1 .. k."""
    grad = np.array([e.grad_flops for e in cost.entries], dtype=np.float64)
    prop = np.array([e.prop_flops for e in cost.entries], dtype=np.float64)
    cum = np.concatenate([[0.0], np.cumsum(prop)])  # cum[i] = sum(prop[:i])
    n = len(grad)
    delta = np.full((n, n + 1), np.inf)  # inf marks p >= k (not a predecessor)
    for k in range(n):
        for p in range(-1, k):
            delta[k, p + 1] = grad[k] + (cum[k + 1] - cum[p + 1])
    return delta


def solve_dp(profile: ImportanceProfile, cost: CostModel, rho: float, buckets: int = 10_000) -> PartitionPlan:
    """Importance-maximizing selection under a quantized FLOPs budget."""
    if not (0.0 < rho <= 1.0):
        raise ConfigurationError(f"rho must be in (0, 1], got {rho}")
    if buckets < 10:
        raise ConfigurationError(f"buckets must be >= 10, got {buckets}")
    names = _check_keys(profile, cost)
    n = len(names)
    total = cost.total_backward_flops
    budget = rho * total
    scores = np.array([profile.scores[name] for name in names])
    delta = _transition_costs(cost)

    if rho >= 1.0:
        # the budget equals the full backward cost, which no subset exceeds,
        # so the constraint is vacuous and quantization plays no part
        fo = [names[k] for k in range(n) if scores[k] > 0.0]
        return _finish(profile, cost, rho, buckets, fo, warning=None)

    finite = np.isfinite(delta)
    integral = bool(np.all(delta[finite] == np.round(delta[finite])))
    if integral and total <= buckets:
        # integer FLOPs that already fit on the budget axis: run the DP on
        # unit-cost cells, which is exact (rounding up is a no-op)
        bucket = 1.0
        qbudget = int(np.floor(rho * total + _TOL))
    else:
        bucket = total / buckets
        qbudget = int(np.floor(rho * buckets + _TOL))
    qdelta = np.full(delta.shape, np.iinfo(np.int64).max // 2, dtype=np.int64)
    qdelta[finite] = np.ceil(delta[finite] / bucket - _TOL).astype(np.int64)  # round costs up

    selectable = scores > 0.0
    # value[k, t]: best importance of a selection whose deepest entry is k
    # at exactly t budget cells; parent[k, t]: the predecessor entry (+1, 0 = none)
    NEG = -np.inf
    value = np.full((n, qbudget + 1), NEG)
    parent = np.zeros((n, qbudget + 1), dtype=np.int32)
    for k in range(n):
        if not selectable[k]:
            continue
        # predecessor "none" is column 0; predecessor p contributes value[p]
        cands = np.full((k + 1, qbudget + 1), NEG)
        q0 = qdelta[k, 0]
        if q0 <= qbudget:
            cands[0, q0] = 0.0
        for p in range(k):
            if not selectable[p]:
                continue
            q = qdelta[k, p + 1]
            if q <= qbudget:
                cands[p + 1, q:] = value[p, : qbudget + 1 - q]
        best = cands.max(axis=0)
        value[k] = best + scores[k]
        value[k, best == NEG] = NEG
        parent[k] = cands.argmax(axis=0)

    best_importance, best_state = 0.0, None
    for t in range(qbudget + 1):
        for k in range(n):
            if value[k, t] > best_importance + 1e-15:
                best_importance = value[k, t]
                best_state = (k, t)

    fo: list[str] = []
    state = best_state
    while state is not None:
        k, t = state
        fo.append(names[k])
        p = int(parent[k, t]) - 1
        state = None if p < 0 else (p, t - int(qdelta[k, p + 1]))
    fo.reverse()

    warning = None
    if not fo:
        min_single = int(qdelta[:, 0].min()) if n else qbudget + 1
        if min_single > qbudget:
            warning = "budget_below_min_cost"
    return _finish(profile, cost, rho, buckets, fo, warning)


def _finish(profile, cost, rho, buckets, fo, warning) -> PartitionPlan:
    names = cost.names()
    fo_ordered = [name for name in names if name in set(fo)]
    zo = [name for name in names if name not in set(fo)]
    return PartitionPlan(
        fo_set=fo_ordered,
        zo_set=zo,
        budget_ratio=rho,
        budget_flops=rho * cost.total_backward_flops,
        consumed_flops=cost.subset_backward_flops(fo_ordered),
        achieved_importance=float(sum(profile.scores[name] for name in fo_ordered)),
        quantization_buckets=buckets,
        warning=warning,
    )


def brute_force_select(profile: ImportanceProfile, cost: CostModel, rho: float) -> PartitionPlan:
    """Exact optimum by enumerating all subsets; the solver's test oracle.

    Uses the same cost accounting as solve_dp but no quantization. Ties on
    importance go to the cheaper subset, then to the smaller one, so the
    empty set wins when every score is zero.
    """
    if not (0.0 < rho <= 1.0):
        raise ConfigurationError(f"rho must be in (0, 1], got {rho}")
    names = _check_keys(profile, cost)
    n = len(names)
    if n > 20:
        raise ConfigurationError(f"brute force refuses {n} tensors (limit 20)")
    budget = rho * cost.total_backward_flops
    grad = np.array([e.grad_flops for e in cost.entries], dtype=np.float64)
    prop = np.array([e.prop_flops for e in cost.entries], dtype=np.float64)
    cumprop = np.concatenate([[0.0], np.cumsum(prop)])
    scores = np.array([profile.scores[name] for name in names])

    best = (0.0, 0.0, 0, ())  # (importance, -cost, -popcount) maximized
    for mask in range(1, 1 << n):
        idx = [k for k in range(n) if mask >> k & 1]
        c = grad[idx].sum() + cumprop[max(idx) + 1]
        if c > budget:
            continue
        imp = float(scores[idx].sum())
        key = (imp, -c, -len(idx))
        if key > (best[0], best[1], best[2]):
            best = (imp, -c, -len(idx), tuple(idx))
    fo = [names[k] for k in best[3]]
    return _finish(profile, cost, rho, 0, fo, warning=None)


def apply_plan(model: LayeredModel, plan: PartitionPlan) -> None:
    """Assign FO/ZO roles per the plan; idempotent."""
    names = {t.name for t in model.tensors()}
    for name in list(plan.fo_set) + list(plan.zo_set):
        if name not in names:
            raise ConfigurationError(f"plan names unknown tensor {name!r}")
    missing = names - set(plan.fo_set) - set(plan.zo_set)
    if missing:
        raise ConfigurationError(f"plan does not cover tensors: {sorted(missing)}")
    fo = set(plan.fo_set)
    for t in model.tensors():
        t.role = Role.FO if t.name in fo else Role.ZO


def full_fo_plan(profile: ImportanceProfile, cost: CostModel) -> PartitionPlan:
    """Everything first-order; the trivial plan used by the full-FO baseline."""
    return _finish(profile, cost, 1.0, 0, list(cost.names()), warning=None)
