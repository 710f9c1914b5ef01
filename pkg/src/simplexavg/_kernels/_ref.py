"""Pure-numpy reference backend for the evaluation kernels."""

from __future__ import annotations

from itertools import product as _iterproduct

import numpy as np

MODE_GRID = 0
MODE_SHAPE = 1


def _interp(values: np.ndarray, lo: np.ndarray, h: np.ndarray, pts: np.ndarray) -> np.ndarray:
    """Multilinear interpolation of cell-center samples; zero outside."""
    d = values.ndim
    u = (pts - lo) / h - 0.5
    i0 = np.floor(u).astype(np.int64)
    frac = u - i0
    out = np.zeros(len(pts))
    dims = values.shape
    for corner in _iterproduct((0, 1), repeat=d):
        idx = i0 + np.array(corner, dtype=np.int64)
        w = np.ones(len(pts))
        for a in range(d):
            w *= frac[:, a] if corner[a] else (1.0 - frac[:, a])
        valid = np.all((idx >= 0) & (idx < np.array(dims)), axis=1)
        if valid.any():
            vi = idx[valid]
            out[valid] += w[valid] * values[tuple(vi.T)]
    return out


def eval_points(field, pts: np.ndarray) -> np.ndarray:
    if field.mode == MODE_SHAPE:
        return field.shape.contains(pts).astype(np.float64)
    return _interp(field.values, field.lo, field.h, pts)


def product_reduce(fields, x: np.ndarray, offsets: np.ndarray, n_batches: int):
    c, n, k, d = offsets.shape
    pts = x[:, None, None, :] - offsets  # (c, n, k, d)
    prod = np.ones((c, n))
    for i, f in enumerate(fields):
        vals = eval_points(f, pts[:, :, i, :].reshape(-1, d)).reshape(c, n)
        prod *= vals
    pb = prod.reshape(c, n_batches, n // n_batches)
    return pb.sum(axis=2), (pb * pb).sum(axis=2)
