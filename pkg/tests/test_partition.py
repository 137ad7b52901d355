import json

import numpy as np
import pytest

from hizfo.datasets import two_moons_batches
from hizfo.importance import ImportanceProfile, estimate_importance
from hizfo.models import CostEntry, CostModel, MLPModel, backward_truncated, flops_profile
from hizfo.partition import (
    PartitionPlan,
    apply_plan,
    brute_force_select,
    full_fo_plan,
    solve_dp,
)
from hizfo.tensors import ConfigurationError, Role


def profile_of(scores):
    names = list(scores)
    return ImportanceProfile(dict(scores), dict(scores), 1, 1.0, {n: i for i, n in enumerate(names)})


def random_instance(rng, n, integer_costs=True):
    """Random selection instance; FLOPs counts are integers like real cost
    models, where the DP's unit-cost cells make it exact."""
    if integer_costs:
        grads = rng.integers(1, 51, n)
        props = rng.integers(0, 21, n)
    else:
        grads = rng.uniform(1, 50, n)
        props = rng.uniform(0, 20, n)
    entries = [CostEntry(f"t{i}", i, float(grads[i]), float(props[i]), 0) for i in range(n)]
    return profile_of({f"t{i}": float(rng.uniform(0, 1)) for i in range(n)}), CostModel(entries)


FIXTURE = (
    profile_of({"t0": 0.9, "t1": 0.5, "t2": 0.8, "t3": 0.3}),
    CostModel([CostEntry(f"t{i}", i, 10, 5, 0) for i in range(4)]),
)


class TestSolveDp:
    def test_fixture_matches_enumeration(self):
        prof, cost = FIXTURE
        dp = solve_dp(prof, cost, 0.5, buckets=10**6)  # budget 30 of T_full 60
        bf = brute_force_select(prof, cost, 0.5)
        assert dp.achieved_importance == pytest.approx(bf.achieved_importance, abs=1e-12)
        assert dp.fo_set == bf.fo_set == ["t0", "t1"]
        assert dp.consumed_flops == 30

    def test_rho_one_selects_every_positive_tensor(self):
        prof, cost = FIXTURE
        plan = solve_dp(prof, cost, 1.0, buckets=100)
        assert plan.fo_set == ["t0", "t1", "t2", "t3"]
        assert plan.consumed_flops == cost.total_backward_flops

    def test_budget_below_min_cost_gives_all_zo_with_warning(self):
        prof, cost = FIXTURE
        plan = solve_dp(prof, cost, 0.1, buckets=100)  # budget 6 < min single cost 15
        assert plan.fo_set == [] and plan.warning == "budget_below_min_cost"
        assert plan.achieved_importance == 0.0
        assert set(plan.zo_set) == {"t0", "t1", "t2", "t3"}

    def test_oracle_equivalence_random_instances(self):
        rng = np.random.default_rng(42)
        for _ in range(40):
            n = int(rng.integers(2, 13))
            prof, cost = random_instance(rng, n)
            rho = float(rng.uniform(0.1, 0.95))
            dp = solve_dp(prof, cost, rho, buckets=100_000)
            bf = brute_force_select(prof, cost, rho)
            assert bf.achieved_importance - 1e-9 <= dp.achieved_importance
            assert dp.achieved_importance <= bf.achieved_importance + 1e-12

    def test_float_costs_never_beat_oracle(self):
        # with non-integral costs the bucketed DP may lose a boundary set to
        # round-up, but must never report more than the true optimum
        rng = np.random.default_rng(7)
        for _ in range(40):
            n = int(rng.integers(2, 13))
            prof, cost = random_instance(rng, n, integer_costs=False)
            rho = float(rng.uniform(0.1, 0.95))
            dp = solve_dp(prof, cost, rho, buckets=50_000)
            bf = brute_force_select(prof, cost, rho)
            assert dp.achieved_importance <= bf.achieved_importance + 1e-12

    def test_consumed_within_one_bucket_of_budget(self):
        rng = np.random.default_rng(3)
        for _ in range(30):
            prof, cost = random_instance(rng, 10)
            rho = float(rng.uniform(0.2, 0.99))
            buckets = int(rng.choice([100, 1000, 10_000]))
            plan = solve_dp(prof, cost, rho, buckets=buckets)
            assert plan.consumed_flops <= plan.budget_flops + cost.total_backward_flops / buckets + 1e-9

    def test_negative_importance_never_selected(self):
        prof = profile_of({"t0": 0.5, "t1": -0.2, "t2": 0.3})
        cost = CostModel([CostEntry(f"t{i}", i, 1, 0, 0) for i in range(3)])
        plan = solve_dp(prof, cost, 1.0, buckets=100)
        assert "t1" not in plan.fo_set and plan.fo_set == ["t0", "t2"]

    def test_monotone_in_rho(self):
        rng = np.random.default_rng(9)
        prof, cost = random_instance(rng, 10)
        achieved = [
            solve_dp(prof, cost, rho, buckets=10_000).achieved_importance
            for rho in (0.1, 0.3, 0.5, 0.7, 0.9, 1.0)
        ]
        assert all(a <= b + 1e-12 for a, b in zip(achieved, achieved[1:]))

    def test_invalid_arguments(self):
        prof, cost = FIXTURE
        with pytest.raises(ConfigurationError):
            solve_dp(prof, cost, 0.0, buckets=100)
        with pytest.raises(ConfigurationError):
            solve_dp(prof, cost, 1.5, buckets=100)
        with pytest.raises(ConfigurationError):
            solve_dp(prof, cost, 0.5, buckets=5)

    def test_mismatched_keys_rejected(self):
        prof, _ = FIXTURE
        cost = CostModel([CostEntry("other", 0, 1, 0, 0)])
        with pytest.raises(ConfigurationError):
            solve_dp(prof, cost, 0.5, buckets=100)


class TestBruteForce:
    def test_single_affordable_tensor_selected(self):
        prof = profile_of({"t0": 0.4})
        cost = CostModel([CostEntry("t0", 0, 5, 1, 0)])
        assert brute_force_select(prof, cost, 1.0).fo_set == ["t0"]

    def test_all_zero_importance_prefers_empty(self):
        prof = profile_of({"t0": 0.0, "t1": 0.0})
        cost = CostModel([CostEntry(f"t{i}", i, 1, 1, 0) for i in range(2)])
        plan = brute_force_select(prof, cost, 1.0)
        assert plan.fo_set == [] and plan.achieved_importance == 0.0

    def test_refuses_large_instances(self):
        names = {f"t{i}": 0.1 for i in range(21)}
        prof = profile_of(names)
        cost = CostModel([CostEntry(f"t{i}", i, 1, 0, 0) for i in range(21)])
        with pytest.raises(ConfigurationError):
            brute_force_select(prof, cost, 0.5)


class TestCostAudit:
    def test_consumed_equals_measured_backward_flops(self):
        model = MLPModel(dims=(2, 16, 8, 2), seed=0)
        batches = two_moons_batches(2, 16, seed=1)
        prof = estimate_importance(model, batches, warmup_steps=2, warmup_lr=1e-3)
        cost = flops_profile(model, 16)
        for rho in (0.3, 0.6, 0.9, 1.0):
            plan = solve_dp(prof, cost, rho, buckets=10_000)
            if not plan.fo_set:
                continue
            before = model.tally.backward
            backward_truncated(model, batches[0], plan.fo_set)
            assert model.tally.backward - before == plan.consumed_flops


class TestApplyPlan:
    def plan(self, fo, zo):
        return PartitionPlan(fo, zo, 0.5, 0.0, 0, 0.0, 10)

    def test_roles_assigned(self):
        m = MLPModel(dims=(2, 16, 2), seed=0)
        names = [t.name for t in m.tensors()]
        apply_plan(m, self.plan(names[:1], names[1:]))
        assert m.tensors()[0].role == Role.FO
        assert all(t.role == Role.ZO for t in m.tensors()[1:])

    def test_empty_fo_all_zo(self):
        m = MLPModel(dims=(2, 16, 2), seed=0)
        names = [t.name for t in m.tensors()]
        apply_plan(m, self.plan([], names))
        assert all(t.role == Role.ZO for t in m.tensors())

    def test_full_fo(self):
        m = MLPModel(dims=(2, 16, 2), seed=0)
        names = [t.name for t in m.tensors()]
        apply_plan(m, self.plan(names, []))
        assert all(t.role == Role.FO for t in m.tensors())

    def test_idempotent(self):
        m = MLPModel(dims=(2, 16, 2), seed=0)
        names = [t.name for t in m.tensors()]
        plan = self.plan(names[:2], names[2:])
        apply_plan(m, plan)
        roles = [t.role for t in m.tensors()]
        apply_plan(m, plan)
        assert roles == [t.role for t in m.tensors()]

    def test_unknown_tensor_rejected(self):
        m = MLPModel(dims=(2, 16, 2), seed=0)
        with pytest.raises(ConfigurationError):
            apply_plan(m, self.plan(["ghost"], [t.name for t in m.tensors()]))

    def test_uncovered_tensor_rejected(self):
        m = MLPModel(dims=(2, 16, 2), seed=0)
        names = [t.name for t in m.tensors()]
        with pytest.raises(ConfigurationError):
            apply_plan(m, self.plan(names[:1], names[2:]))


class TestSerialization:
    def test_plan_json_roundtrip(self, tmp_path):
        prof, cost = FIXTURE
        plan = solve_dp(prof, cost, 0.5, buckets=1000)
        path = tmp_path / "plan.json"
        plan.save_json(path)
        with open(path) as f:
            d = json.load(f)
        assert set(d) == {"rho", "budget_flops", "consumed_flops", "fo", "zo", "achieved_importance"}
        loaded = PartitionPlan.from_dict(d, buckets=1000)
        assert loaded.fo_set == plan.fo_set and loaded.zo_set == plan.zo_set
        assert loaded.consumed_flops == plan.consumed_flops

    def test_full_fo_plan_covers_everything(self):
        prof, cost = FIXTURE
        plan = full_fo_plan(prof, cost)
        assert plan.fo_set == cost.names() and plan.zo_set == []
