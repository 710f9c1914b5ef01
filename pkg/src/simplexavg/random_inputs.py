"""Seeded generators for random nonnegative test inputs."""

from __future__ import annotations

import numpy as np

from .gridfn import GridFunction
from .rng import stream

__all__ = ["random_bump_grid"]


def random_bump_grid(
    rng: np.random.Generator,
    d: int = 2,
    lo: float = -1.5,
    hi: float = 1.5,
    h: float = 1 / 32,
    n_bumps: int = 3,
    width_range: tuple = (0.15, 0.4),
) -> GridFunction:
    """Sum of Gaussian bumps sampled on a grid (smooth, nonnegative, compact)."""
    n = int(round((hi - lo) / h))
    axes = [lo + (np.arange(n) + 0.5) * h for _ in range(d)]
    mesh = np.meshgrid(*axes, indexing="ij")
    vals = np.zeros(mesh[0].shape)
    margin = 0.25 * (hi - lo)
    for _ in range(n_bumps):
        c = rng.uniform(lo + margin, hi - margin, d)
        w = rng.uniform(*width_range)
        amp = rng.uniform(0.2, 1.0)
        rr = sum((m - c[a]) ** 2 for a, m in enumerate(mesh))
        vals += amp * np.exp(-rr / (2 * w * w))
    return GridFunction(np.full(d, lo), np.full(d, h), vals)
