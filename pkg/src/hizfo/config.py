"""Experiment configuration: flat key=value text with section headers.

A config fully determines a run byte-for-byte (except wall-clock columns).
Unknown sections or keys are rejected, and ``serialize(parse(text))`` is a
canonical fixed point, so configs diff cleanly.
"""

from __future__ import annotations

import configparser
import io
from dataclasses import dataclass, field

from .datasets import CharCorpus, two_moons_batches
from .models import LayeredModel, make_model
from .optimizer import ALGORITHMS, OptimizerConfig
from .tensors import ConfigurationError

# section -> key -> (type tag, default)   type tags: s str, i int, f float,
# oi optional int, of optional float, os optional str
_SCHEMA = {
    "model": {
        "kind": ("s", "mlp"),
        "seed": ("i", 0),
        "hidden_dims": ("s", "16"),
        "input_dim": ("i", 2),
        "output_dim": ("i", 2),
        "loss": ("s", "cross_entropy"),
        "blocks": ("s", "10:1.0:0.0"),
        "d_model": ("i", 16),
        "depth": ("i", 2),
        "context": ("i", 16),
    },
    "task": {
        "dataset": ("s", "two_moons"),
        "batch_size": ("i", 64),
        "train_batches": ("i", 16),
        "eval_batches": ("i", 4),
        "noise": ("f", 0.15),
        "corpus_path": ("os", None),
        "data_seed": ("i", 0),
    },
    "optimizer": {
        "algorithm": ("s", "hizfo"),
        "eta_fo": ("f", 2e-5),
        "eta_zo": ("f", 2e-6),
        "epsilon": ("f", 1e-3),
        "alpha": ("f", 0.1),
        "fo_rule": ("s", "sgd"),
        "beta1": ("f", 0.9),
        "beta2": ("f", 0.999),
        "weight_decay": ("f", 0.0),
        "max_steps": ("i", 200),
        "epochs": ("oi", None),
        "eval_interval": ("i", 50),
        "probes": ("i", 1),
    },
    "partition": {
        "rho": ("f", 0.6),
        "buckets": ("i", 10_000),
        "warmup_steps": ("i", 5),
        "warmup_lr": ("of", None),
    },
    "run": {
        "master_seed": ("i", 0),
        "out_dir": ("s", "runs/out"),
    },
}


@dataclass
class ExperimentConfig:
    values: dict = field(default_factory=dict)  # (section, key) -> typed value

    def get(self, section: str, key: str):
        return self.values[(section, key)]

    def set(self, section: str, key: str, value) -> None:
        if (section, key) not in self.values:
            raise ConfigurationError(f"unknown config key [{section}] {key}")
        self.values[(section, key)] = value

    # resolved accessors -------------------------------------------------
    @property
    def algorithm(self) -> str:
        return self.get("optimizer", "algorithm")

    @property
    def rho(self) -> float:
        return self.get("partition", "rho")

    @property
    def buckets(self) -> int:
        return self.get("partition", "buckets")

    @property
    def master_seed(self) -> int:
        return self.get("run", "master_seed")

    @property
    def out_dir(self) -> str:
        return self.get("run", "out_dir")

    def warmup(self) -> tuple[int, float]:
        lr = self.get("partition", "warmup_lr")
        if lr is None:
            lr = 1e-2 if self.get("model", "kind") in ("quadratic", "rosenbrock") else 1e-3
        return self.get("partition", "warmup_steps"), lr


def default_config() -> ExperimentConfig:
    return ExperimentConfig(
        {(s, k): default for s, keys in _SCHEMA.items() for k, (_, default) in keys.items()}
    )


def _convert(tag: str, raw: str, where: str):
    raw = raw.strip()
    if tag in ("oi", "of", "os") and raw == "":
        return None
    try:
        if tag in ("i", "oi"):
            return int(raw)
        if tag in ("f", "of"):
            return float(raw)
        return raw
    except ValueError as e:
        raise ConfigurationError(f"bad value for {where}: {raw!r}") from e


def parse_config(text: str) -> ExperimentConfig:
    cp = configparser.ConfigParser(interpolation=None)
    try:
        cp.read_string(text)
    except configparser.Error as e:
        raise ConfigurationError(f"malformed config: {e}") from e
    cfg = default_config()
    for section in cp.sections():
        if section not in _SCHEMA:
            raise ConfigurationError(f"unknown config section [{section}]")
        for key, raw in cp.items(section):
            if key not in _SCHEMA[section]:
                raise ConfigurationError(f"unknown config key [{section}] {key}")
            tag = _SCHEMA[section][key][0]
            cfg.values[(section, key)] = _convert(tag, raw, f"[{section}] {key}")
    return cfg


def load_config(path) -> ExperimentConfig:
    with open(path) as f:
        return parse_config(f.read())


def serialize_config(cfg: ExperimentConfig) -> str:
    out = io.StringIO()
    for section, keys in _SCHEMA.items():
        out.write(f"[{section}]\n")
        for key in keys:
            v = cfg.values[(section, key)]
            out.write(f"{key} = {'' if v is None else v}\n")
        out.write("\n")
    return out.getvalue()


# builders ---------------------------------------------------------------

def build_model(cfg: ExperimentConfig) -> LayeredModel:
    kind = cfg.get("model", "kind")
    seed = cfg.get("model", "seed")
    if kind == "quadratic":
        blocks = []
        for part in cfg.get("model", "blocks").split(","):
            dim, curv, target = part.strip().split(":")
            blocks.append((int(dim), float(curv), float(target)))
        return make_model("quadratic", seed=seed, blocks=tuple(blocks))
    if kind == "rosenbrock":
        return make_model("rosenbrock")
    if kind == "mlp":
        hidden = [int(h) for h in cfg.get("model", "hidden_dims").split(",") if h.strip()]
        dims = [cfg.get("model", "input_dim"), *hidden, cfg.get("model", "output_dim")]
        return make_model("mlp", seed=seed, dims=tuple(dims), loss=cfg.get("model", "loss"))
    if kind == "attention_lm":
        corpus = _corpus(cfg)
        return make_model(
            "attention_lm",
            seed=seed,
            vocab_size=corpus.vocab.size,
            d_model=cfg.get("model", "d_model"),
            depth=cfg.get("model", "depth"),
            context=cfg.get("model", "context"),
        )
    raise ConfigurationError(f"unknown model kind {kind!r}")


def _corpus(cfg: ExperimentConfig) -> CharCorpus:
    path = cfg.get("task", "corpus_path")
    if not path:
        raise ConfigurationError("char_corpus task needs [task] corpus_path")
    return CharCorpus.from_file(path, cfg.get("model", "context"))


def build_data(cfg: ExperimentConfig, model: LayeredModel):
    """(train_batches, eval_batches) for the configured task."""
    dataset = cfg.get("task", "dataset")
    bs = cfg.get("task", "batch_size")
    n_train = cfg.get("task", "train_batches")
    n_eval = cfg.get("task", "eval_batches")
    seed = cfg.get("task", "data_seed")
    if dataset == "analytic":
        dummy = model.dummy_batch()
        return [dummy] * max(n_train, 1), [dummy] * max(n_eval, 1)
    if dataset == "two_moons":
        noise = cfg.get("task", "noise")
        train = two_moons_batches(n_train, bs, noise=noise, seed=seed)
        evalb = two_moons_batches(n_eval, bs, noise=noise, seed=seed + 10_000)
        return train, evalb
    if dataset == "char_corpus":
        corpus = _corpus(cfg)
        return (
            corpus.batches(n_train, bs, seed=seed),
            corpus.batches(n_eval, bs, seed=seed + 10_000),
        )
    raise ConfigurationError(f"unknown dataset {dataset!r}")


def build_optimizer_config(cfg: ExperimentConfig) -> OptimizerConfig:
    algorithm = cfg.algorithm
    if algorithm not in ALGORITHMS:
        raise ConfigurationError(f"unknown algorithm {algorithm!r}")
    return OptimizerConfig(
        eta_fo=cfg.get("optimizer", "eta_fo"),
        eta_zo=cfg.get("optimizer", "eta_zo"),
        epsilon=cfg.get("optimizer", "epsilon"),
        alpha=cfg.get("optimizer", "alpha"),
        master_seed=cfg.master_seed,
        fo_rule=cfg.get("optimizer", "fo_rule"),
        beta1=cfg.get("optimizer", "beta1"),
        beta2=cfg.get("optimizer", "beta2"),
        weight_decay=cfg.get("optimizer", "weight_decay"),
        max_steps=cfg.get("optimizer", "max_steps"),
        epochs=cfg.get("optimizer", "epochs"),
        eval_interval=cfg.get("optimizer", "eval_interval"),
        probes=cfg.get("optimizer", "probes"),
    )
