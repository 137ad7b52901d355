"""Seeded noise plumbing for in-place perturbation.

Every perturbation of the ZO parameter set is derived from a 64-bit step
seed, so the noise vector never has to be stored: adding, removing and
reusing it are all "regenerate the stream and apply a scale" operations.
Step seeds come from splitmix64, a counter-based construction, so any
(master_seed, step) pair maps to an independent stream without shared
state between steps or runs.
"""

from __future__ import annotations

import numpy as np

_MASK64 = (1 << 64) - 1
_GAMMA = 0x9E3779B97F4A7C15  # splitmix64 increment


def splitmix64(x: int) -> int:
    """One splitmix64 mixing round of a 64-bit value."""
    x = (x + _GAMMA) & _MASK64
    z = x
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & _MASK64
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & _MASK64
    return (z ^ (z >> 31)) & _MASK64


def step_seed(master_seed: int, step_index: int) -> int:
    """Derive the per-step perturbation seed from the run's master seed.

    Counter-based: seed(s, t) mixes the master seed with the step counter,
    so regenerating any step's noise needs no history.
    """
    if step_index < 0:
        raise ValueError("step_index must be >= 0")
    return splitmix64((master_seed & _MASK64) ^ splitmix64(step_index & _MASK64))


def noise_generator(seed: int) -> np.random.Generator:
    """Fresh counter-based generator for one perturbation stream."""
    return np.random.Generator(np.random.Philox(key=seed & _MASK64))


def add_scaled_noise(arrays, seed: int, scale: float) -> float:
    """Add scale * u to each array in place, u ~ N(0, I) drawn from `seed`.

    The same seed always regenerates the same u, in array order, so the
    caller can perturb (+eps), restore (-eps) and apply the estimator
    update (-lr * coefficient) with three calls and zero stored noise.

    Returns sum(u**2) over all elements, which callers use for noise and
    estimate norms.
    """
    gen = noise_generator(seed)
    sq = 0.0
    with np.errstate(over="ignore", invalid="ignore"):
        for a in arrays:
            u = gen.standard_normal(a.size)
            a += (scale * u).reshape(a.shape)
            sq += float(u @ u)
    return sq


def regenerate_noise(shapes, seed: int) -> list[np.ndarray]:
    """Materialize the noise vectors for the given shapes (test/replay aid)."""
    gen = noise_generator(seed)
    return [gen.standard_normal(int(np.prod(s))).reshape(s) for s in shapes]
