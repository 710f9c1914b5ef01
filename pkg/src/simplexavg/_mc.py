"""Chunked Monte Carlo engine behind the averaging operators.

Each output point owns a Philox stream keyed by ``(seed, tag, point index)``;
a point's samples are drawn from its stream alone, so results are
bit-identical for any chunking or worker count.  Points whose averaging
orbit provably misses an input's support are pruned to exact zeros (the
estimator would evaluate to zero on every sample).
"""

from __future__ import annotations

import os
from concurrent.futures import ThreadPoolExecutor

import numpy as np

from ._kernels import FieldSpec, product_reduce
from .geometry import _orthonormalize
from .rng import stream

TAG_ROTATION = "rotation-mc"
TAG_SPHERE = "sphere-mc"
TAG_BISPHERE = "bisphere-mc"

_CHUNK_BUDGET = 6_000_000  # max offset array elements per chunk


def _have_rotation2() -> bool:
    from ._kernels import backend_name

    return backend_name() == "cython"


def default_workers() -> int:
    env = os.environ.get("SIMPLEXAVG_WORKERS")
    if env:
        return max(1, int(env))
    return min(4, os.cpu_count() or 1)


def draw_rotation2_trig(n: int, rng: np.random.Generator, group: str = "O"):
    """Haar O(2)/SO(2) parameterized by angle and reflection coin.

    Returns (cos, sin, refl) arrays of length n.  A sample acts on a vertex
    (a, b) as (c a - s b, s a + c b), with the sign of the b-terms flipped
    under reflection.  The stream consumption (one (n, 2) uniform block) is
    fixed so that both kernel backends replay identical draws.
    """
    u = rng.random((n, 2))
    theta = (2.0 * np.pi) * u[:, 0]
    refl = (u[:, 1] < 0.5) if group == "O" else np.zeros(n, dtype=bool)
    return np.cos(theta), np.sin(theta), refl


def _offsets_from_trig(c, s, refl, vectors: np.ndarray) -> np.ndarray:
    n = len(c)
    k = len(vectors)
    sgn = np.where(refl, -1.0, 1.0)
    out = np.empty((n, k, 2))
    for i, (a, b) in enumerate(vectors):
        bs = b * sgn
        out[:, i, 0] = c * a - s * bs
        out[:, i, 1] = s * a + c * bs
    return out


def draw_offsets(
    kind: str,
    d: int,
    n: int,
    rng: np.random.Generator,
    vectors: np.ndarray | None = None,
    group: str = "O",
    linear_maps: np.ndarray | None = None,
) -> np.ndarray:
    """Sample offsets (n, k, d) for one output point.

    ``rotation``: Haar matrices applied to the rows of ``vectors`` (angle
    parameterization in d = 2, orthonormalized Gaussians otherwise);
    ``sphere``: uniform points of S^{d-1} (k = 1);
    ``bisphere``: uniform points of S^{2d-1} split into two R^d halves.
    For the sphere kinds an optional stack of ``linear_maps`` (k, d, raw)
    turns the raw sphere point into per-field offsets (adjoint pairings).
    """
    if kind == "rotation":
        if d == 2:
            c, s, refl = draw_rotation2_trig(n, rng, group)
            return _offsets_from_trig(c, s, refl, vectors)
        gauss = rng.standard_normal((n, d, d))
        q = _orthonormalize(gauss)
        if group == "SO":
            neg = np.linalg.det(q) < 0
            q[neg, :, -1] *= -1.0
        return np.einsum("nij,kj->nki", q, vectors)
    if kind == "sphere":
        g = rng.standard_normal((n, d))
        g /= np.linalg.norm(g, axis=1, keepdims=True)
        if linear_maps is not None:
            return np.einsum("kij,nj->nki", linear_maps, g)
        return g[:, None, :]
    if kind == "bisphere":
        g = rng.standard_normal((n, 2 * d))
        g /= np.linalg.norm(g, axis=1, keepdims=True)
        if linear_maps is not None:
            return np.einsum("kij,nj->nki", linear_maps, g)
        return g.reshape(n, 2, d)
    raise ValueError(f"unknown sampler kind {kind!r}")


def _offset_radii(kind: str, k: int, vectors, linear_maps) -> np.ndarray:
    if kind == "rotation":
        return np.linalg.norm(vectors, axis=1)
    if linear_maps is not None:
        return np.array([np.linalg.svd(m, compute_uv=False)[0] for m in linear_maps])
    return np.ones(k)


def _active_mask(fields, X: np.ndarray, radii: np.ndarray) -> np.ndarray:
    mask = np.ones(len(X), dtype=bool)
    for i, f in enumerate(fields):
        if f.bound_center is None:
            continue
        dist = np.linalg.norm(X - f.bound_center[None, :], axis=1)
        mask &= dist <= radii[i] + f.bound_radius + 1e-9
    return mask


def mc_field_product(
    kind: str,
    fields,
    X: np.ndarray,
    n_samples: int,
    seed: int,
    tag: str,
    *,
    vectors: np.ndarray | None = None,
    group: str = "O",
    linear_maps: np.ndarray | None = None,
    indices: np.ndarray | None = None,
    n_batches: int = 1,
    workers: int | None = None,
    prune: bool = True,
):
    """Monte Carlo mean of ``prod_i f_i(x - offset_i)`` at each point of X.

    Returns ``(mean, stderr, batch_means)`` with shapes (m,), (m,),
    (m, n_batches).
    """
    X = np.ascontiguousarray(np.atleast_2d(X), dtype=np.float64)
    m, d = X.shape
    k = len(fields)
    if indices is None:
        indices = np.arange(m, dtype=np.int64)
    else:
        indices = np.asarray(indices, dtype=np.int64)
        if indices.shape != (m,):
            raise ValueError("indices must have one entry per point")
    if n_samples < 1 or n_samples % n_batches != 0:
        raise ValueError(f"n_samples={n_samples} must be a positive multiple of n_batches")
    if kind == "rotation" and vectors is None:
        raise ValueError("rotation sampler needs offset vectors")

    radii = _offset_radii(kind, k, vectors, linear_maps)
    active = _active_mask(fields, X, radii) if prune else np.ones(m, dtype=bool)
    act_idx = np.nonzero(active)[0]

    sums = np.zeros((m, n_batches))
    sumsqs = np.zeros((m, n_batches))

    chunk = max(1, _CHUNK_BUDGET // max(1, n_samples * k * d))
    tasks = [act_idx[i : i + chunk] for i in range(0, len(act_idx), chunk)]

    fast2 = kind == "rotation" and d == 2 and _have_rotation2()

    def run(task_idx: np.ndarray):
        c = len(task_idx)
        if fast2:
            cos_a = np.empty((c, n_samples))
            sin_a = np.empty((c, n_samples))
            refl = np.empty((c, n_samples), dtype=np.uint8)
            for j, pt in enumerate(task_idx):
                rng = stream(seed, tag, int(indices[pt]))
                cc, ss, rf = draw_rotation2_trig(n_samples, rng, group)
                cos_a[j] = cc
                sin_a[j] = ss
                refl[j] = rf
            from ._kernels import rotation2_reduce

            return task_idx, rotation2_reduce(
                fields, X[task_idx], cos_a, sin_a, refl, vectors, n_batches
            )
        offs = np.empty((c, n_samples, k, d))
        for j, pt in enumerate(task_idx):
            rng = stream(seed, tag, int(indices[pt]))
            offs[j] = draw_offsets(
                kind, d, n_samples, rng, vectors=vectors, group=group, linear_maps=linear_maps
            )
        return task_idx, product_reduce(fields, X[task_idx], offs, n_batches)

    nw = workers if workers is not None else default_workers()
    if nw <= 1 or len(tasks) <= 1:
        results = [run(t) for t in tasks]
    else:
        with ThreadPoolExecutor(max_workers=nw) as pool:
            results = list(pool.map(run, tasks))
    for task_idx, (s, s2) in results:
        sums[task_idx] = s
        sumsqs[task_idx] = s2

    n = n_samples
    total = sums.sum(axis=1)
    mean = total / n
    var = np.maximum(sumsqs.sum(axis=1) - total * mean, 0.0) / max(n - 1, 1)
    stderr = np.sqrt(var / n)
    batch_means = sums / (n // n_batches)
    return mean, stderr, batch_means
