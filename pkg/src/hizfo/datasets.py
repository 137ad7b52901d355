"""Synthetic tasks: two-moons classification and a byte-level char corpus."""

from __future__ import annotations

from collections import Counter

import numpy as np

from .tensors import Batch, ConfigurationError

OOV = 0  # out-of-vocabulary byte id in char corpora


def two_moons(n: int, noise: float = 0.15, seed: int = 0) -> tuple[np.ndarray, np.ndarray]:
    """Two interleaved half circles with gaussian noise; labels 0/1."""
    rng = np.random.default_rng(seed)
    half = n // 2
    t_outer = rng.uniform(0.0, np.pi, size=half)
    t_inner = rng.uniform(0.0, np.pi, size=n - half)
    outer = np.stack([np.cos(t_outer), np.sin(t_outer)], axis=1)
    inner = np.stack([1.0 - np.cos(t_inner), 0.5 - np.sin(t_inner)], axis=1)
    x = np.concatenate([outer, inner]) + rng.normal(0.0, noise, size=(n, 2))
    y = np.concatenate([np.zeros(half, dtype=int), np.ones(n - half, dtype=int)])
    order = rng.permutation(n)
    return x[order], y[order]


def two_moons_batches(n_batches: int, batch_size: int, noise: float = 0.15, seed: int = 0) -> list[Batch]:
    x, y = two_moons(n_batches * batch_size, noise=noise, seed=seed)
    return [
        Batch(x[i * batch_size : (i + 1) * batch_size], y[i * batch_size : (i + 1) * batch_size])
        for i in range(n_batches)
    ]


class ByteVocab:
    """Byte-level vocabulary capped at 64 ids: the 63 most frequent bytes
    plus one shared out-of-vocabulary id."""

    MAX_SIZE = 64

    def __init__(self, data: bytes, max_size: int = MAX_SIZE):
        counts = Counter(data)
        keep = [b for b, _ in sorted(counts.items(), key=lambda kv: (-kv[1], kv[0]))[: max_size - 1]]
        self.byte_of_id = {i + 1: b for i, b in enumerate(sorted(keep))}
        self.id_of_byte = {b: i for i, b in self.byte_of_id.items()}
        self.size = len(self.byte_of_id) + 1  # +1 for OOV id 0

    def encode(self, data: bytes) -> np.ndarray:
        return np.array([self.id_of_byte.get(b, OOV) for b in data], dtype=np.int64)


class CharCorpus:
    """A UTF-8 file turned into fixed-length next-token windows."""

    def __init__(self, text: bytes, context: int):
        if len(text) < context + 2:
            raise ConfigurationError("corpus too short for the requested context length")
        self.vocab = ByteVocab(text)
        self.ids = self.vocab.encode(text)
        self.context = int(context)

    @classmethod
    def from_file(cls, path, context: int) -> "CharCorpus":
        with open(path, "rb") as f:
            return cls(f.read(), context)

    def batches(self, n_batches: int, batch_size: int, seed: int = 0) -> list[Batch]:
        rng = np.random.default_rng(seed)
        hi = len(self.ids) - self.context - 1
        out = []
        for _ in range(n_batches):
            starts = rng.integers(0, hi, size=batch_size)
            x = np.stack([self.ids[s : s + self.context] for s in starts])
            y = np.stack([self.ids[s + 1 : s + self.context + 1] for s in starts])
            out.append(Batch(x, y))
        return out
