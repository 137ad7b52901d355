"""Per-tensor sensitivity scores from a short full-gradient warm-up.

The score of a tensor is the loss increase a first-order model predicts if
its last warm-up update were undone: the negative inner product of the
last applied update with the gradient at the post-update weights, summed
over the tensor's elements. Scores are normalized by the largest absolute
raw score so downstream selection works on a [-1, 1] scale.
"""

from __future__ import annotations

import csv
import itertools
from dataclasses import dataclass, field

import numpy as np

from .models import LayeredModel, full_gradient
from .tensors import ConfigurationError


@dataclass
class ImportanceProfile:
    scores: dict[str, float]
    raw_scores: dict[str, float]
    warmup_steps: int
    normalizer: float
    layer_index: dict[str, int] = field(default_factory=dict)

    def ranked(self) -> list[str]:
        """Names by descending score; ties go to the output-nearest layer."""
        return sorted(self.scores, key=lambda n: (-self.scores[n], self.layer_index.get(n, 0)))

    def save_csv(self, path) -> None:
        with open(path, "w", newline="") as f:
            w = csv.writer(f)
            w.writerow(["tensor", "layer_index", "raw_importance", "normalized_importance"])
            for name in self.scores:
                w.writerow(
                    [name, self.layer_index.get(name, 0),
                     repr(self.raw_scores[name]), repr(self.scores[name])]
                )

    @classmethod
    def load_csv(cls, path) -> "ImportanceProfile":
        scores, raw, layers = {}, {}, {}
        with open(path, newline="") as f:
            for row in csv.DictReader(f):
                name = row["tensor"]
                layers[name] = int(row["layer_index"])
                raw[name] = float(row["raw_importance"])
                scores[name] = float(row["normalized_importance"])
        normalizer = max((abs(v) for v in raw.values()), default=0.0)
        return cls(scores, raw, warmup_steps=0, normalizer=normalizer, layer_index=layers)


def estimate_importance(
    model: LayeredModel,
    data,
    warmup_steps: int = 5,
    warmup_lr: float = 1e-2,
) -> ImportanceProfile:
    """Run a few plain gradient-descent steps and score each tensor.

    The model's parameters are restored bit-for-bit before returning, so
    profiling never moves the model that will actually be trained.
    """
    if warmup_steps < 1:
        raise ConfigurationError("warmup_steps must be >= 1")
    batches = list(data)
    if not batches:
        raise ConfigurationError("importance estimation needs at least one batch")

    tensors = model.tensors()
    snapshot = [t.data.copy() for t in tensors]
    names = [t.name for t in tensors]
    try:
        stream = itertools.cycle(batches)
        last_update: dict[str, np.ndarray] = {}
        batch = None
        for _ in range(warmup_steps):
            batch = next(stream)
            grads = full_gradient(model, batch)
            for t in tensors:
                step = -warmup_lr * grads[t.name]
                t.data += step
                last_update[t.name] = step
        # gradient at the post-update weights, on the batch the update minimized
        grads = full_gradient(model, batch)
        raw = {n: float(-(last_update[n] @ grads[n])) for n in names}
    finally:
        for t, saved in zip(tensors, snapshot):
            t.data[:] = saved

    normalizer = max(abs(v) for v in raw.values())
    if normalizer == 0.0:
        scores = {n: 0.0 for n in names}
    else:
        scores = {n: raw[n] / normalizer for n in names}
    return ImportanceProfile(
        scores=scores,
        raw_scores=raw,
        warmup_steps=warmup_steps,
        normalizer=normalizer,
        layer_index={t.name: t.layer_index for t in tensors},
    )
