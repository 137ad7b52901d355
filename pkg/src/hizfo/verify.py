"""Pass/fail suites over the estimator and convergence properties.

Each suite returns a (name, passed, detail) row; the CLI prints one line
per suite and exits nonzero if any fails. ``fast`` shrinks Monte-Carlo
budgets for smoke runs. ``corrupt_restore`` is a fault-injection hook that
negates the noise on restore, which must make the restore-exactness suite
fail; it exists so the test suite can prove the checks have teeth.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .datasets import two_moons_batches
from .models import MLPModel
from .optimizer import OptimizerConfig, hizfo_step
from .partition import PartitionPlan, apply_plan
from .rng import add_scaled_noise, regenerate_noise, step_seed
from .tensors import Role
from .theory import (
    QuadraticObjective,
    QuarticObjective,
    TheoryRunSpec,
    descent_inequality_check,
    estimator_bias_sq,
    estimator_mean,
    rate_experiment,
    second_moment_check,
)

RATE_SLOPE_BAND = (-1.5, -0.3)


@dataclass
class SuiteResult:
    name: str
    passed: bool
    detail: str


def suite_estimator_unbiasedness(fast=False) -> SuiteResult:
    n = 20_000 if fast else 100_000
    obj = QuadraticObjective(np.linspace(0.5, 1.5, 16))
    theta = np.random.default_rng(11).standard_normal(16) * 2.0
    g = obj.grad(theta)
    mean = estimator_mean(obj, theta, 1e-3, n, seed=11)
    rel = float(np.linalg.norm(mean - g) / np.linalg.norm(g))
    return SuiteResult("estimator_unbiasedness", rel <= 0.01, f"relative error {rel:.2e} (<= 1e-2)")


def suite_bias_scaling(fast=False) -> SuiteResult:
    n = 20_000 if fast else 100_000
    mus = (1e-1, 1e-2, 1e-3, 1e-4)
    theta = np.full(8, 1.0)
    biases = [np.sqrt(estimator_bias_sq(QuarticObjective(), theta, mu, n, seed=3)) for mu in mus]
    slope = float(np.polyfit(np.log10(mus), np.log10(biases), 1)[0])
    return SuiteResult("bias_scaling", slope >= 0.8, f"log-log slope {slope:.3f} (>= 0.8)")


def suite_second_moment(fast=False) -> SuiteResult:
    n = 20_000 if fast else 100_000
    oks, details = [], []
    for d in (4, 64):
        measured, bound = second_moment_check(d, n_samples=n, seed=d)
        oks.append(measured <= bound)
        details.append(f"d={d}: {measured:.1f} <= {bound:.1f}")
    return SuiteResult("second_moment_bound", all(oks), "; ".join(details))


def suite_descent_inequality(fast=False) -> SuiteResult:
    states = 30 if fast else 100
    fails, worst = descent_inequality_check(
        TheoryRunSpec(d_zo=6, d_fo=4, sigma_fo=0.3), n_states=states, seed=2
    )
    return SuiteResult("descent_inequality", fails == 0, f"{fails}/{states} states violated the bound")


def suite_rate_band(fast=False) -> SuiteResult:
    grid = (100, 316, 1000, 3162) if fast else (100, 316, 1000, 3162, 10000)
    res = rate_experiment(TheoryRunSpec(seed=1), T_grid=grid)
    lo, hi = RATE_SLOPE_BAND
    ok = lo <= res.slope <= hi and not any(div for _, _, div in res.rows)
    return SuiteResult("rate_band", ok, f"slope {res.slope:.3f} in [{lo}, {hi}]")


def suite_restore_exactness(fast=False, corrupt_restore=False) -> SuiteResult:
    steps = 20 if fast else 200
    model = MLPModel(dims=(2, 16, 2), seed=1)
    batches = two_moons_batches(4, 32, seed=3)
    names = [t.name for t in model.tensors()]
    plan = PartitionPlan(names[:2], names[2:], 0.5, 0.0, 0, 0.0, 10)
    apply_plan(model, plan)
    cfg = OptimizerConfig(eta_fo=0.05, eta_zo=0.005, epsilon=1e-3, master_seed=5)
    eps = cfg.epsilon
    zo = model.tensors_with_role(Role.ZO)
    shapes = [t.data.shape for t in zo]
    worst = 0.0
    for s in range(steps):
        arrays = [t.data for t in zo]
        before = [a.copy() for a in arrays]
        probe = step_seed(12345, s)
        us = regenerate_noise(shapes, probe)
        add_scaled_noise(arrays, probe, +eps)
        add_scaled_noise(arrays, probe, +eps if corrupt_restore else -eps)
        for a, b, u in zip(arrays, before, us):
            denom = np.spacing(np.maximum(np.abs(b), np.abs(b + eps * u)))
            worst = max(worst, float(np.max(np.abs(a - b) / denom)))
            a[:] = b  # keep the trajectory clean after probing
        hizfo_step(model, batches[s % 4], cfg, s)
    return SuiteResult("restore_exactness", worst <= 4.0, f"worst deviation {worst:.2f} ulp (<= 4)")


ALL_SUITES = (
    suite_estimator_unbiasedness,
    suite_bias_scaling,
    suite_second_moment,
    suite_descent_inequality,
    suite_rate_band,
    suite_restore_exactness,
)


def verify_all(fast=False, corrupt_restore=False) -> list[SuiteResult]:
    results = []
    for suite in ALL_SUITES:
        if suite is suite_restore_exactness:
            results.append(suite(fast=fast, corrupt_restore=corrupt_restore))
        else:
            results.append(suite(fast=fast))
    return results
