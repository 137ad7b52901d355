"""Empirical checks of the optimizer's convergence and estimator claims.

Everything here runs on synthetic objectives with analytic gradients, so
the measured quantities (true gradient norms, estimator bias, moments) are
exact up to Monte-Carlo error. The forward-difference estimator under test
is the same one the optimizer applies:

    g_hat = (f(theta + mu * u) - f(theta)) / mu * u,   u ~ N(0, I)

restricted to the ZO block. Bias measurements subtract the analytic
control variate (grad . u) u, whose expectation is exactly the gradient;
this removes the O(||grad||) sampling noise that would otherwise swamp
the O(mu^2) bias signal at small mu.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field

import numpy as np

from .rng import step_seed


@dataclass
class TheoryRunSpec:
    d_zo: int = 16
    d_fo: int = 4
    smoothness: float = 1.0      # largest curvature of the quadratic objective
    sigma_fo: float = 0.5        # FO gradient noise scale
    sigma_zo: float = 0.5        # additive ZO estimator noise scale
    alpha: float = 1.0           # ZO weight in the update vector
    gap0: float = 50.0           # initial optimality gap f(theta_0) - f*
    mu: float | None = None      # None: 1 / sqrt(d_zo * T)
    eta: float | None = None     # None: 1 / sqrt(T)
    seed: int = 0

    def curvatures(self) -> np.ndarray:
        d = self.d_zo + self.d_fo
        if d < 2:
            return np.full(d, self.smoothness)
        return np.geomspace(self.smoothness / 10.0, self.smoothness, d)


class QuadraticObjective:
    """f(theta) = 0.5 * sum(c * theta^2); smoothness constant max(c)."""

    def __init__(self, curvatures):
        self.c = np.asarray(curvatures, dtype=np.float64)

    def value(self, theta):
        return 0.5 * float(self.c @ (theta * theta))

    def value_many(self, thetas):
        return 0.5 * (thetas * thetas) @ self.c

    def grad(self, theta):
        return self.c * theta


class QuarticObjective:
    """f(theta) = sum(theta^4); smooth but non-quadratic, so the
    forward-difference estimator has an O(mu^2) mean bias."""

    def value(self, theta):
        return float(np.sum(theta**4))

    def value_many(self, thetas):
        return np.sum(thetas**4, axis=-1)

    def grad(self, theta):
        return 4.0 * theta**3


def zo_forward_samples(objective, theta, mu, n_samples, rng, d_zo=None):
    """Draw forward-difference estimates over the first d_zo coordinates.

    Returns (g_hat, u): arrays of shape (n_samples, d_zo).
    """
    d = theta.size
    d_zo = d if d_zo is None else int(d_zo)
    u = rng.standard_normal((n_samples, d_zo))
    pert = np.tile(theta, (n_samples, 1))
    pert[:, :d_zo] += mu * u
    diffs = (objective.value_many(pert) - objective.value(theta)) / mu
    return diffs[:, None] * u, u


def estimator_mean(objective, theta, mu, n_samples, seed=0, d_zo=None,
                   control_variate=True, antithetic=False):
    """Monte-Carlo estimate of E[g_hat] over the ZO block.

    With the control variate enabled, the sample mean of
    g_hat - (grad . u) u  is computed and the analytic gradient added back:
    same estimand, variance reduced by orders of magnitude. Antithetic
    pairing (u, -u) additionally cancels the odd-order residual, which
    matters when resolving an O(mu^2) bias at small mu. Neither changes
    the estimand: u stays N(0, I)-distributed.
    """
    rng = np.random.default_rng(seed)
    d_zo = theta.size if d_zo is None else int(d_zo)
    g = objective.grad(theta)[:d_zo]
    if antithetic:
        half = max(n_samples // 2, 1)
        u = rng.standard_normal((half, d_zo))
        u = np.concatenate([u, -u])
        pert = np.tile(theta, (u.shape[0], 1))
        pert[:, :d_zo] += mu * u
        diffs = (objective.value_many(pert) - objective.value(theta)) / mu
        ghat = diffs[:, None] * u
    else:
        ghat, u = zo_forward_samples(objective, theta, mu, n_samples, rng, d_zo)
    if not control_variate:
        return ghat.mean(axis=0)
    resid = ghat - (u @ g)[:, None] * u
    return resid.mean(axis=0) + g


def estimator_bias_sq(objective, theta, mu, n_samples, seed=0, d_zo=None, antithetic=True):
    g = objective.grad(theta)[: (theta.size if d_zo is None else d_zo)]
    mean = estimator_mean(objective, theta, mu, n_samples, seed=seed, d_zo=d_zo,
                          antithetic=antithetic)
    return float(np.sum((mean - g) ** 2))


def estimator_second_moment(objective, theta, mu, n_samples, seed=0, d_zo=None):
    rng = np.random.default_rng(seed)
    ghat, _ = zo_forward_samples(objective, theta, mu, n_samples, rng, d_zo)
    return float(np.mean(np.sum(ghat * ghat, axis=1)))


def bias_dimension_sweep(
    d_list=(4, 16, 64, 256),
    mu_list=(1e-1, 1e-2, 1e-3, 1e-4),
    n_samples=100_000,
    seed=0,
    objective_factory=None,
):
    """Bias surface over (d_zo, mu) for a smooth non-quadratic objective.

    Returns rows (d_zo, mu, bias_sq). No exponent in d_zo is asserted; the
    surface is reported raw.
    """
    rows = []
    for i, d in enumerate(d_list):
        objective = objective_factory(d) if objective_factory else QuarticObjective()
        theta = np.full(d, 0.5)
        for j, mu in enumerate(mu_list):
            b = estimator_bias_sq(objective, theta, mu, n_samples, seed=step_seed(seed, i * 1000 + j))
            rows.append((int(d), float(mu), b))
    return rows


def save_bias_sweep_csv(path, rows) -> None:
    with open(path, "w", newline="") as f:
        w = csv.writer(f)
        w.writerow(["d_zo", "mu", "bias_sq"])
        for d, mu, b in rows:
            w.writerow([d, repr(mu), repr(b)])


@dataclass
class RateResult:
    rows: list = field(default_factory=list)   # (T, min_grad_sq, diverged)
    slope: float = 0.0
    intercept: float = 0.0

    def save_csv(self, path) -> None:
        with open(path, "w", newline="") as f:
            w = csv.writer(f)
            w.writerow(["T", "min_grad_sq", "diverged", "fit_slope", "fit_intercept"])
            for T, v, div in self.rows:
                w.writerow([T, repr(v), int(div), repr(self.slope), repr(self.intercept)])


def hybrid_run_min_grad_sq(spec: TheoryRunSpec, T: int) -> tuple[float, bool]:
    """Run T hybrid steps on the noisy quadratic; return min_t ||grad f(theta_t)||^2.

    The first d_zo coordinates use the forward-difference estimate, the rest
    the analytic gradient plus injected gaussian noise. The tracked gradient
    is the true analytic one, not the estimate.
    """
    obj = QuadraticObjective(spec.curvatures())
    d = spec.d_zo + spec.d_fo
    rng = np.random.default_rng(step_seed(spec.seed, T))
    theta = rng.standard_normal(d)
    # scale the start so f(theta_0) equals the requested optimality gap
    f0 = obj.value(theta)
    if f0 > 0:
        theta *= np.sqrt(spec.gap0 / f0)
    eta = spec.eta if spec.eta is not None else 1.0 / np.sqrt(T)
    mu = spec.mu if spec.mu is not None else 1.0 / np.sqrt(max(spec.d_zo, 1) * T)
    best = np.inf
    for _ in range(T):
        g = obj.grad(theta)
        best = min(best, float(g @ g))
        if not np.isfinite(best):
            return float("inf"), True
        g_fo = g[spec.d_zo :] + spec.sigma_fo * rng.standard_normal(spec.d_fo)
        if spec.d_zo:
            u = rng.standard_normal(spec.d_zo)
            pert = theta.copy()
            pert[: spec.d_zo] += mu * u
            ghat = (obj.value(pert) - obj.value(theta)) / mu * u
            if spec.sigma_zo:
                ghat = ghat + spec.sigma_zo * rng.standard_normal(spec.d_zo)
            theta[: spec.d_zo] -= eta * spec.alpha * ghat
        theta[spec.d_zo :] -= eta * g_fo
    return best, False


def rate_experiment(spec: TheoryRunSpec, T_grid=(100, 316, 1000, 3162, 10000)) -> RateResult:
    """min ||grad||^2 against the step budget, with a log-log OLS fit."""
    rows = []
    for T in T_grid:
        v, div = hybrid_run_min_grad_sq(spec, int(T))
        rows.append((int(T), v, div))
    good = [(T, v) for T, v, div in rows if not div and v > 0]
    slope, intercept = 0.0, 0.0
    if len(good) >= 2:
        x = np.log10([T for T, _ in good])
        y = np.log10([v for _, v in good])
        slope, intercept = np.polyfit(x, y, 1)
    return RateResult(rows=rows, slope=float(slope), intercept=float(intercept))


def descent_inequality_check(
    spec: TheoryRunSpec, n_states=100, n_probes=400, seed=0, tolerance=3.5
):
    """Spot-check the smoothness descent bound at random states.

    For each state, Monte-Carlo estimates of E[f(theta - eta v)],
    <grad, E[v]> and E[||v||^2] must satisfy
        E[f(next)] <= f(theta) - eta <grad, E[v]> + (L eta^2 / 2) E[||v||^2] + tol * se
    where se is the Monte-Carlo standard error of the left side.
    Returns (n_failures, worst_margin).
    """
    obj = QuadraticObjective(spec.curvatures())
    L = float(np.max(obj.c))
    d = spec.d_zo + spec.d_fo
    rng = np.random.default_rng(seed)
    eta = 0.05
    mu = 1e-3
    failures = 0
    worst = -np.inf
    for _ in range(n_states):
        theta = rng.standard_normal(d) * rng.uniform(0.5, 3.0)
        g = obj.grad(theta)
        f0 = obj.value(theta)
        u = rng.standard_normal((n_probes, spec.d_zo))
        pert = np.tile(theta, (n_probes, 1))
        pert[:, : spec.d_zo] += mu * u
        diffs = (obj.value_many(pert) - f0) / mu
        ghat = diffs[:, None] * u
        v = np.tile(np.concatenate([np.zeros(spec.d_zo), g[spec.d_zo :]]), (n_probes, 1))
        v[:, : spec.d_zo] = spec.alpha * ghat
        v[:, spec.d_zo :] += spec.sigma_fo * rng.standard_normal((n_probes, spec.d_fo))
        nxt = obj.value_many(np.tile(theta, (n_probes, 1)) - eta * v)
        lhs = float(nxt.mean())
        se = float(nxt.std(ddof=1) / np.sqrt(n_probes))
        rhs = f0 - eta * float(g @ v.mean(axis=0)) + 0.5 * L * eta * eta * float(np.mean(np.sum(v * v, axis=1)))
        margin = lhs - rhs
        worst = max(worst, margin - tolerance * se)
        if margin > tolerance * se:
            failures += 1
    return failures, worst


def second_moment_check(d_zo, mu=1e-3, n_samples=100_000, seed=0, slack=0.05):
    """E[||g_hat||^2] against 2 (d_zo + 1) ||grad||^2 + slack, on a quadratic.

    Returns (measured, bound). The sampling-variance constant of the bound
    is zero for a quadratic at this mu, so the slack only covers
    Monte-Carlo error.
    """
    obj = QuadraticObjective(np.linspace(0.5, 1.5, d_zo))
    rng = np.random.default_rng(seed)
    theta = rng.standard_normal(d_zo)
    g = obj.grad(theta)
    measured = estimator_second_moment(obj, theta, mu, n_samples, seed=seed)
    bound = (1.0 + slack) * (2.0 * (d_zo + 1) * float(g @ g))
    return measured, bound
