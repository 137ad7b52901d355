"""Command-line harness: profile, partition, train, sweep, verify, report.

Exit codes: 0 ok, 1 config error, 2 diverged run, 3 verification failure.
Sweeps fan out over a process pool capped by the HZFO_THREADS environment
variable; every run is rebuilt from its serialized config, so results are
independent of worker scheduling.
"""

from __future__ import annotations

import argparse
import csv
import json
import os
import statistics
import sys
from multiprocessing import Pool
from pathlib import Path

from .config import (
    ExperimentConfig,
    build_data,
    build_model,
    build_optimizer_config,
    load_config,
    parse_config,
    serialize_config,
)
from .importance import estimate_importance
from .models import flops_profile
from .optimizer import train, write_step_csv
from .partition import full_fo_plan, solve_dp
from .tensors import ConfigurationError
from .verify import verify_all

SWEEP_AXES = ("rho", "r", "alpha")
SWEEP_SEEDS = 5


def _profile(cfg: ExperimentConfig):
    model = build_model(cfg)
    train_batches, _ = build_data(cfg, model)
    steps, lr = cfg.warmup()
    profile = estimate_importance(model, train_batches, warmup_steps=steps, warmup_lr=lr)
    cost = flops_profile(model, cfg.get("task", "batch_size"))
    return model, train_batches, profile, cost


def _plan(cfg: ExperimentConfig):
    model, batches, profile, cost = _profile(cfg)
    if cfg.algorithm == "full_fo":
        return model, batches, profile, cost, full_fo_plan(profile, cost)
    return model, batches, profile, cost, solve_dp(profile, cost, cfg.rho, cfg.buckets)


def cmd_profile(cfg: ExperimentConfig, out: Path) -> int:
    _, _, profile, cost = _profile(cfg)
    out.mkdir(parents=True, exist_ok=True)
    profile.save_csv(out / "importance.csv")
    with open(out / "cost_model.json", "w") as f:
        json.dump(cost.to_dict(), f, indent=2, sort_keys=True)
        f.write("\n")
    print(f"wrote {out / 'importance.csv'} and {out / 'cost_model.json'}")
    return 0


def cmd_partition(cfg: ExperimentConfig, out: Path) -> int:
    _, _, _, _, plan = _plan(cfg)
    out.mkdir(parents=True, exist_ok=True)
    plan.save_json(out / "plan.json")
    msg = f"wrote {out / 'plan.json'} (|FO|={len(plan.fo_set)}, |ZO|={len(plan.zo_set)})"
    if plan.warning:
        msg += f" warning: {plan.warning}"
    print(msg)
    return 0


def cmd_train(cfg: ExperimentConfig, out: Path) -> int:
    model, batches, _, _, plan = _plan(cfg)
    _, eval_batches = build_data(cfg, model)
    opt = build_optimizer_config(cfg)
    report = train(model, batches, opt, plan, cfg.algorithm, eval_batches=eval_batches)
    out.mkdir(parents=True, exist_ok=True)
    plan.save_json(out / "plan.json")
    report.save_json(out / "report.json")
    write_step_csv(out / "steps.csv", report.records)
    with open(out / "config.txt", "w") as f:
        f.write(serialize_config(cfg))
    print(
        f"{cfg.algorithm}: {report.steps_run} steps, final eval loss "
        f"{report.final_eval_loss}, diverged={report.diverged}"
    )
    return 2 if report.diverged else 0


def _sweep_worker(args):
    text, axis, value, seed = args
    cfg = parse_config(text)
    cfg.set("run", "master_seed", seed)
    cfg.set("model", "seed", seed)
    cfg.set("task", "data_seed", seed)
    if axis == "rho":
        cfg.set("partition", "rho", value)
    elif axis == "r":
        cfg.set("optimizer", "eta_zo", value * cfg.get("optimizer", "eta_fo"))
    elif axis == "alpha":
        cfg.set("optimizer", "alpha", value)
    model, batches, _, _, plan = _plan(cfg)
    _, eval_batches = build_data(cfg, model)
    opt = build_optimizer_config(cfg)
    report = train(model, batches, opt, plan, cfg.algorithm, eval_batches=eval_batches)
    final = report.final_eval_loss
    return {
        "axis": axis,
        "value": value,
        "seed": seed,
        "final_eval_loss": float("inf") if report.diverged else final,
        "diverged": int(report.diverged),
        "steps": report.steps_run,
        "backward_flops": report.total_backward_flops,
    }


def cmd_sweep(cfg: ExperimentConfig, out: Path, axis: str, values: list[float]) -> int:
    if axis not in SWEEP_AXES:
        raise ConfigurationError(f"sweep axis must be one of {SWEEP_AXES}, got {axis!r}")
    if not values:
        raise ConfigurationError("sweep needs at least one value")
    text = serialize_config(cfg)
    jobs = [
        (text, axis, v, cfg.master_seed + s) for v in values for s in range(SWEEP_SEEDS)
    ]
    workers = int(os.environ.get("HZFO_THREADS", os.cpu_count() or 1))
    workers = max(1, min(workers, len(jobs)))
    if workers == 1:
        rows = [_sweep_worker(j) for j in jobs]
    else:
        with Pool(processes=workers) as pool:
            rows = pool.map(_sweep_worker, jobs)
    rows.sort(key=lambda r: (r["value"], r["seed"]))
    out.mkdir(parents=True, exist_ok=True)
    cols = ["axis", "value", "seed", "final_eval_loss", "diverged", "steps", "backward_flops"]
    with open(out / "sweep.csv", "w", newline="") as f:
        w = csv.DictWriter(f, fieldnames=cols)
        w.writeheader()
        w.writerows(rows)
    with open(out / "sweep_summary.csv", "w", newline="") as f:
        w = csv.writer(f)
        w.writerow(["axis", "value", "median_final_eval_loss", "n_diverged", "n_runs"])
        for v in values:
            group = [r for r in rows if r["value"] == v]
            med = statistics.median(r["final_eval_loss"] for r in group)
            w.writerow([axis, v, repr(med), sum(r["diverged"] for r in group), len(group)])
    print(f"wrote {out / 'sweep.csv'} and {out / 'sweep_summary.csv'} ({len(rows)} runs)")
    return 0


def cmd_verify(fast: bool) -> int:
    results = verify_all(fast=fast)
    for r in results:
        print(f"[{'PASS' if r.passed else 'FAIL'}] {r.name}: {r.detail}")
    return 0 if all(r.passed for r in results) else 3


def cmd_report(out: Path) -> int:
    path = out / "report.json"
    if not path.exists():
        raise ConfigurationError(f"no report.json under {out}")
    with open(path) as f:
        report = json.load(f)
    print(f"algorithm:          {report['algorithm']}")
    print(f"steps run:          {report['steps_run']}")
    print(f"diverged:           {report['diverged']}")
    print(f"final eval loss:    {report['final_eval_loss']}")
    print(f"backward FLOPs:     {report['total_backward_flops']}")
    print(f"forward FLOPs:      {report['total_forward_flops']}")
    proxy = report.get("memory_proxy", {})
    print(
        "memory proxy:       "
        f"{proxy.get('tape_params', 0)} gradient-tape params + "
        f"{proxy.get('optimizer_state_params', 0)} optimizer-state params"
    )
    print(f"wall time:          {report['wall_total_ns'] / 1e9:.3f} s")
    return 0


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="hizfo", description=__doc__)
    sub = p.add_subparsers(dest="command", required=True)
    for name in ("profile", "partition", "train", "sweep"):
        sp = sub.add_parser(name)
        sp.add_argument("--config", required=True, help="experiment config path")
        sp.add_argument("--seed", type=int, default=None, help="override master seed")
        sp.add_argument("--out", default=None, help="override output directory")
        if name == "sweep":
            sp.add_argument("--axis", required=True, choices=SWEEP_AXES)
            sp.add_argument("--values", required=True, help="comma-separated values")
    sv = sub.add_parser("verify")
    sv.add_argument("--fast", action="store_true", help="reduced Monte-Carlo budgets")
    sr = sub.add_parser("report")
    sr.add_argument("--out", required=True, help="run directory to summarize")
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        if args.command == "verify":
            return cmd_verify(args.fast)
        if args.command == "report":
            return cmd_report(Path(args.out))
        cfg = load_config(args.config)
        if args.seed is not None:
            cfg.set("run", "master_seed", args.seed)
            cfg.set("model", "seed", args.seed)
            cfg.set("task", "data_seed", args.seed)
        out = Path(args.out) if args.out else Path(cfg.out_dir)
        if args.command == "profile":
            return cmd_profile(cfg, out)
        if args.command == "partition":
            return cmd_partition(cfg, out)
        if args.command == "train":
            return cmd_train(cfg, out)
        if args.command == "sweep":
            values = [float(v) for v in args.values.split(",") if v.strip()]
            return cmd_sweep(cfg, out, args.axis, values)
        raise ConfigurationError(f"unknown command {args.command}")
    except ConfigurationError as e:
        print(f"config error: {e}", file=sys.stderr)
        return 1
    except FileNotFoundError as e:
        print(f"config error: {e}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
