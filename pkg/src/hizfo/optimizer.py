"""The hybrid FO/ZO optimization step, baselines, and the training loop.

One hybrid step runs two forward passes: a clean pass giving the reference
loss and a pass with the ZO parameters perturbed in place by seeded
gaussian noise. First-order tensors are updated with the gradient of
``L_clean + alpha * L_perturbed`` (the perturbed term back-propagated
through the perturbed activations), zeroth-order tensors with the scaled
finite-difference direction ``(L_perturbed - L_clean) / eps * u``. The
noise is never stored: perturbing, restoring, and updating all regenerate
it from the per-step seed.

``backward_flops`` in a step record is the budget-comparable accounting of
one truncated backward over the FO set; the model tally tracks every pass
actually executed.
"""

from __future__ import annotations

import csv
import json
import time
from dataclasses import dataclass, field, asdict

import numpy as np

from .models import LayeredModel
from .partition import PartitionPlan, apply_plan
from .rng import add_scaled_noise, step_seed
from .tensors import Batch, ConfigurationError, NumericOverflowError, Role

ALGORITHMS = ("hizfo", "full_fo", "frozen_subset", "mezo")

STEP_CSV_COLUMNS = (
    "step", "L_FO", "L_ZO", "L_total", "fo_grad_norm", "zo_est_norm",
    "bwd_flops", "fwd_flops", "wall_ns",
)


@dataclass
class OptimizerConfig:
    eta_fo: float = 2e-5
    eta_zo: float = 2e-6
    epsilon: float = 1e-3
    alpha: float = 0.1
    master_seed: int = 0
    fo_rule: str = "sgd"          # "sgd" or "adamlike"
    beta1: float = 0.9
    beta2: float = 0.999
    weight_decay: float = 0.0
    adam_eps: float = 1e-8
    max_steps: int = 100
    epochs: int | None = None
    eval_interval: int = 50
    probes: int = 1               # perturbation probes averaged per step

    def __post_init__(self):
        if self.epsilon <= 0:
            raise ConfigurationError("epsilon must be > 0")
        if self.eta_fo <= 0 or self.eta_zo <= 0:
            raise ConfigurationError("learning rates must be > 0")
        if self.alpha < 0:
            raise ConfigurationError("alpha must be >= 0")
        if self.fo_rule not in ("sgd", "adamlike"):
            raise ConfigurationError(f"unknown fo_rule {self.fo_rule!r}")
        if self.probes < 1:
            raise ConfigurationError("probes must be >= 1")


@dataclass
class StepRecord:
    step: int
    L_FO: float
    L_ZO: float
    L_total: float
    fo_grad_norm: float
    zo_estimate_norm: float
    backward_flops: int
    forward_flops: int
    wall_ns: int
    diverged: bool = False


class FoUpdater:
    """Applies the first-order rule; owns AdamLike state for FO tensors only."""

    def __init__(self, cfg: OptimizerConfig):
        self.cfg = cfg
        self.state: dict[str, tuple[np.ndarray, np.ndarray]] = {}
        self.count = 0

    def apply(self, tensors, grads) -> None:
        with np.errstate(over="ignore", invalid="ignore"):
            self._apply(tensors, grads)

    def _apply(self, tensors, grads) -> None:
        cfg = self.cfg
        if cfg.fo_rule == "sgd":
            for t in tensors:
                t.data -= cfg.eta_fo * grads[t.name]
            return
        self.count += 1
        b1, b2 = cfg.beta1, cfg.beta2
        for t in tensors:
            g = grads[t.name]
            if t.name not in self.state:
                self.state[t.name] = (np.zeros_like(t.data), np.zeros_like(t.data))
            m, v = self.state[t.name]
            m *= b1
            m += (1 - b1) * g
            v *= b2
            v += (1 - b2) * g * g
            mhat = m / (1 - b1**self.count)
            vhat = v / (1 - b2**self.count)
            if cfg.weight_decay:
                t.data -= cfg.eta_fo * cfg.weight_decay * t.data
            t.data -= cfg.eta_fo * mhat / (np.sqrt(vhat) + cfg.adam_eps)

    def state_size(self) -> int:
        return sum(m.size + v.size for m, v in self.state.values())


def _noise_fn(zo_arrays, seed, u_override):
    """Returns apply(scale) adding scale*u in place; u regenerated per call."""
    if u_override is None:
        return lambda scale: add_scaled_noise(zo_arrays, seed, scale)
    flat = np.asarray(u_override, dtype=np.float64).reshape(-1)
    total = sum(a.size for a in zo_arrays)
    if flat.size == 1:
        flat = np.full(total, flat[0])
    if flat.size != total:
        raise ConfigurationError(f"u override has {flat.size} values for {total} ZO coordinates")

    def apply(scale):
        pos = 0
        sq = 0.0
        with np.errstate(over="ignore", invalid="ignore"):
            for a in zo_arrays:
                chunk = flat[pos : pos + a.size]
                a += scale * chunk
                sq += float(chunk @ chunk)
                pos += a.size
        return sq

    return apply


def _grad_norm(grads) -> float:
    if not grads:
        return 0.0
    with np.errstate(over="ignore", invalid="ignore"):
        return float(np.sqrt(sum(float(g @ g) for g in grads.values())))


def _record(step, lfo, lzo, ltotal, gnorm, znorm, bwd, fwd, t0, diverged=False):
    return StepRecord(step, lfo, lzo, ltotal, gnorm, znorm, int(bwd), int(fwd),
                      time.perf_counter_ns() - t0, diverged)


def hizfo_step(
    model: LayeredModel,
    batch: Batch,
    cfg: OptimizerConfig,
    step_index: int,
    fo_updater: FoUpdater | None = None,
    u_override=None,
) -> StepRecord:
    """One hybrid step over the model's current FO/ZO role assignment."""
    t0 = time.perf_counter_ns()
    fo = model.tensors_with_role(Role.FO)
    zo = model.tensors_with_role(Role.ZO)
    fo_names = [t.name for t in fo]
    zo_arrays = [t.data for t in zo]
    updater = fo_updater or FoUpdater(cfg)
    fwd_before = model.tally.forward
    fo_cost = model.cost_model(batch.size).subset_backward_flops(fo_names)

    try:
        loss_clean, cache_clean = model.forward_with_cache(batch)
    except NumericOverflowError:
        return _record(step_index, float("nan"), 0.0, float("nan"), 0.0, 0.0,
                       0, model.tally.forward - fwd_before, t0, diverged=True)
    grads_clean = model.backward_from_cache(batch, cache_clean, fo_names)

    base = step_seed(cfg.master_seed, step_index)
    seeds = [base] if cfg.probes == 1 else [step_seed(base, j) for j in range(cfg.probes)]
    eps = cfg.epsilon
    loss_pert_sum = 0.0
    grads_pert_acc: dict[str, np.ndarray] = {}
    coefs: list[float] = []
    noise_sq = 0.0
    for seed in seeds:
        noise = _noise_fn(zo_arrays, seed, u_override)
        noise(+eps)
        try:
            loss_pert, cache_pert = model.forward_with_cache(batch)
        except NumericOverflowError:
            noise(-eps)  # put the ZO parameters back before aborting
            return _record(step_index, loss_clean, float("nan"), float("nan"),
                           0.0, 0.0, 0, model.tally.forward - fwd_before, t0, diverged=True)
        noise(-eps)
        if cfg.alpha != 0.0 and fo_names:
            g = model.backward_from_cache(batch, cache_pert, fo_names)
            for n, v in g.items():
                if n in grads_pert_acc:
                    grads_pert_acc[n] += v
                else:
                    grads_pert_acc[n] = v
        loss_pert_sum += loss_pert
        coefs.append((loss_pert - loss_clean) / eps)

    n_probes = len(seeds)
    loss_pert_mean = loss_pert_sum / n_probes
    total = loss_clean + cfg.alpha * loss_pert_mean

    grads_total = {}
    for n in fo_names:
        g = grads_clean[n]
        if grads_pert_acc:
            g = g + (cfg.alpha / n_probes) * grads_pert_acc[n]
        grads_total[n] = g
    updater.apply(fo, grads_total)

    est_sq = 0.0
    for seed, coef in zip(seeds, coefs):
        noise = _noise_fn(zo_arrays, seed, u_override)
        sq = noise(-cfg.eta_zo * coef / n_probes)
        est_sq += (coef / n_probes) ** 2 * sq
    est_norm = float(np.sqrt(est_sq)) if zo_arrays else 0.0

    return _record(step_index, loss_clean, loss_pert_mean, total,
                   _grad_norm(grads_total), est_norm, fo_cost,
                   model.tally.forward - fwd_before, t0)


def baseline_step_full_fo(
    model: LayeredModel, batch: Batch, cfg: OptimizerConfig, step_index: int = 0,
    fo_updater: FoUpdater | None = None,
) -> StepRecord:
    """Plain full backprop on every tensor; ZO fields stay zero."""
    t0 = time.perf_counter_ns()
    tensors = model.tensors()
    names = [t.name for t in tensors]
    updater = fo_updater or FoUpdater(cfg)
    fwd_before = model.tally.forward
    try:
        loss, cache = model.forward_with_cache(batch)
    except NumericOverflowError:
        return _record(step_index, float("nan"), 0.0, float("nan"), 0.0, 0.0,
                       0, model.tally.forward - fwd_before, t0, diverged=True)
    grads = model.backward_from_cache(batch, cache, names)
    updater.apply(tensors, grads)
    cost = model.cost_model(batch.size).total_backward_flops
    return _record(step_index, loss, 0.0, loss + cfg.alpha * 0.0, _grad_norm(grads),
                   0.0, cost, model.tally.forward - fwd_before, t0)


def baseline_step_frozen_subset(
    model: LayeredModel, batch: Batch, cfg: OptimizerConfig, plan: PartitionPlan,
    step_index: int = 0, fo_updater: FoUpdater | None = None,
) -> StepRecord:
    """First-order updates on the plan's FO set; everything else untouched."""
    t0 = time.perf_counter_ns()
    fo_names = list(plan.fo_set)
    fo = [model.tensor(n) for n in fo_names]
    updater = fo_updater or FoUpdater(cfg)
    fwd_before = model.tally.forward
    try:
        loss, cache = model.forward_with_cache(batch)
    except NumericOverflowError:
        return _record(step_index, float("nan"), 0.0, float("nan"), 0.0, 0.0,
                       0, model.tally.forward - fwd_before, t0, diverged=True)
    grads = model.backward_from_cache(batch, cache, fo_names)
    updater.apply(fo, grads)
    cost = model.cost_model(batch.size).subset_backward_flops(fo_names)
    return _record(step_index, loss, 0.0, loss + cfg.alpha * 0.0, _grad_norm(grads),
                   0.0, cost, model.tally.forward - fwd_before, t0)


def baseline_step_mezo(
    model: LayeredModel, batch: Batch, cfg: OptimizerConfig, step_index: int = 0,
    u_override=None,
) -> StepRecord:
    """Pure zeroth order: seeded central difference over all parameters.

    The step record's ``L_FO`` column holds the midpoint of the two probe
    losses (no clean pass is run) and ``L_ZO`` stays zero.
    """
    t0 = time.perf_counter_ns()
    arrays = [t.data for t in model.tensors()]
    seed = step_seed(cfg.master_seed, step_index)
    noise = _noise_fn(arrays, seed, u_override)
    eps = cfg.epsilon
    fwd_before = model.tally.forward
    noise(+eps)
    try:
        loss_plus = model.forward(batch)
        noise(-2 * eps)
        loss_minus = model.forward(batch)
    except NumericOverflowError:
        return _record(step_index, float("nan"), 0.0, float("nan"), 0.0, 0.0,
                       0, model.tally.forward - fwd_before, t0, diverged=True)
    noise(+eps)  # restore
    coef = (loss_plus - loss_minus) / (2 * eps)
    sq = noise(-cfg.eta_zo * coef)
    mid = 0.5 * (loss_plus + loss_minus)
    return _record(step_index, mid, 0.0, mid + cfg.alpha * 0.0, 0.0,
                   abs(coef) * float(np.sqrt(sq)), 0, model.tally.forward - fwd_before, t0)


@dataclass
class RunReport:
    algorithm: str
    steps_run: int
    diverged: bool
    final_eval_loss: float | None
    eval_history: list = field(default_factory=list)   # (step, eval_loss)
    records: list = field(default_factory=list)
    total_backward_flops: int = 0
    total_forward_flops: int = 0
    wall_total_ns: int = 0
    memory_proxy: dict = field(default_factory=dict)

    def to_dict(self, include_records: bool = False) -> dict:
        d = {
            "algorithm": self.algorithm,
            "steps_run": self.steps_run,
            "diverged": self.diverged,
            "final_eval_loss": self.final_eval_loss,
            "eval_history": [[s, l] for s, l in self.eval_history],
            "total_backward_flops": self.total_backward_flops,
            "total_forward_flops": self.total_forward_flops,
            "memory_proxy": self.memory_proxy,
            "wall_total_ns": self.wall_total_ns,
        }
        if include_records:
            d["records"] = [asdict(r) for r in self.records]
        return d

    def save_json(self, path) -> None:
        with open(path, "w") as f:
            json.dump(self.to_dict(), f, indent=2, sort_keys=True)
            f.write("\n")


def write_step_csv(path, records) -> None:
    with open(path, "w", newline="") as f:
        w = csv.writer(f)
        w.writerow(STEP_CSV_COLUMNS)
        for r in records:
            w.writerow([
                r.step, repr(r.L_FO), repr(r.L_ZO), repr(r.L_total),
                repr(r.fo_grad_norm), repr(r.zo_estimate_norm),
                r.backward_flops, r.forward_flops, r.wall_ns,
            ])


def evaluate(model: LayeredModel, batches) -> float:
    return float(np.mean([model.forward(b) for b in batches]))


def train(
    model: LayeredModel,
    data,
    cfg: OptimizerConfig,
    plan: PartitionPlan | None = None,
    algorithm: str = "hizfo",
    eval_batches=None,
) -> RunReport:
    """Run one deterministic optimization loop and collect step records."""
    if algorithm not in ALGORITHMS:
        raise ConfigurationError(f"unknown algorithm {algorithm!r}; expected one of {ALGORITHMS}")
    batches = list(data)
    if cfg.max_steps > 0 and not batches:
        raise ConfigurationError("training needs at least one batch")
    if algorithm in ("hizfo", "frozen_subset"):
        if plan is None:
            raise ConfigurationError(f"{algorithm} requires a partition plan")
        apply_plan(model, plan)

    max_steps = cfg.max_steps
    if cfg.epochs is not None:
        max_steps = min(max_steps, cfg.epochs * len(batches))
    updater = FoUpdater(cfg)
    records: list[StepRecord] = []
    eval_history: list[tuple[int, float]] = []
    diverged = False
    t_start = time.perf_counter_ns()

    for step in range(max_steps):
        batch = batches[step % len(batches)]
        if algorithm == "hizfo":
            rec = hizfo_step(model, batch, cfg, step, fo_updater=updater)
        elif algorithm == "full_fo":
            rec = baseline_step_full_fo(model, batch, cfg, step, fo_updater=updater)
        elif algorithm == "frozen_subset":
            rec = baseline_step_frozen_subset(model, batch, cfg, plan, step, fo_updater=updater)
        else:
            rec = baseline_step_mezo(model, batch, cfg, step)
        records.append(rec)
        if rec.diverged:
            diverged = True
            break
        if eval_batches and cfg.eval_interval > 0 and (step + 1) % cfg.eval_interval == 0:
            eval_history.append((step + 1, evaluate(model, eval_batches)))

    final_eval = None
    if eval_batches is not None and not diverged:
        final_eval = evaluate(model, eval_batches)
        if not eval_history or eval_history[-1][0] != len(records):
            eval_history.append((len(records), final_eval))
    elif eval_batches is not None and diverged:
        final_eval = float("inf")

    tape_params = sum(t.size for t in model.tensors_with_role(Role.FO))
    if algorithm == "full_fo":
        tape_params = sum(t.size for t in model.tensors())
    elif algorithm == "mezo":
        tape_params = 0
    return RunReport(
        algorithm=algorithm,
        steps_run=len(records),
        diverged=diverged,
        final_eval_loss=final_eval,
        eval_history=eval_history,
        records=records,
        total_backward_flops=int(sum(r.backward_flops for r in records)),
        total_forward_flops=int(sum(r.forward_flops for r in records)),
        wall_total_ns=time.perf_counter_ns() - t_start,
        memory_proxy={
            "tape_params": int(tape_params),
            "optimizer_state_params": int(updater.state_size()),
        },
    )
