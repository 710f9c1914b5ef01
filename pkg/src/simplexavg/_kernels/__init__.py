"""Hot evaluation kernels with pluggable backends.

The compiled Cython core (`simplexavg._kernels._core`) is used when it was
built; otherwise the pure-numpy reference backend takes over.  Selection can
be forced with the environment variable ``SIMPLEXAVG_KERNEL`` set to
``cython`` or ``python`` (default ``auto``).

Both backends implement the same two entry points:

``eval_points(field, pts)``
    Evaluate one field at arbitrary points (m, d).

``product_reduce(fields, x, offsets, n_batches)``
    For each output point ``x[c]`` accumulate batch sums and sums of squares
    of ``prod_i field_i(x[c] - offsets[c, s, i])`` over samples ``s``.
"""

from __future__ import annotations

import os
from dataclasses import dataclass

import numpy as np

from ..gridfn import GridFunction
from ..shapes import ShapeSet, compile_program

from . import _ref

try:
    from . import _core

    HAVE_CORE = True
except ImportError:  # extension not built; fall back to numpy
    _core = None
    HAVE_CORE = False

__all__ = [
    "FieldSpec",
    "HAVE_CORE",
    "backend_name",
    "eval_points",
    "product_reduce",
]

MODE_GRID = 0
MODE_SHAPE = 1

MAX_DIM = 16
MAX_FIELDS = 8


@dataclass
class FieldSpec:
    """Kernel-side description of one operator input."""

    mode: int
    d: int
    values: np.ndarray | None = None  # grid mode: C-contiguous float64
    lo: np.ndarray | None = None
    h: np.ndarray | None = None
    shape: ShapeSet | None = None  # shape mode
    codes: np.ndarray | None = None
    params: np.ndarray | None = None
    bound_center: np.ndarray | None = None
    bound_radius: float = 0.0

    @classmethod
    def from_gridfunction(cls, f: GridFunction) -> "FieldSpec":
        if f.d > MAX_DIM:
            raise ValueError(f"kernel supports dimension <= {MAX_DIM}, got {f.d}")
        center, radius = f.support_bounding_ball()
        if f.shape_set is not None:
            codes, params = compile_program(f.shape_set)
            return cls(
                mode=MODE_SHAPE,
                d=f.d,
                shape=f.shape_set,
                codes=codes,
                params=params,
                bound_center=center,
                bound_radius=radius,
            )
        return cls(
            mode=MODE_GRID,
            d=f.d,
            values=np.ascontiguousarray(f.values, dtype=np.float64),
            lo=f.lo.astype(np.float64),
            h=f.h.astype(np.float64),
            bound_center=center,
            bound_radius=radius,
        )

    @classmethod
    def from_shape(cls, s: ShapeSet) -> "FieldSpec":
        codes, params = compile_program(s)
        center, radius = s.bounding_ball()
        return cls(
            mode=MODE_SHAPE,
            d=s.d,
            shape=s,
            codes=codes,
            params=params,
            bound_center=np.asarray(center, dtype=float),
            bound_radius=float(radius),
        )


def _select():
    choice = os.environ.get("SIMPLEXAVG_KERNEL", "auto").lower()
    if choice == "python":
        return _ref, "python"
    if choice == "cython":
        if not HAVE_CORE:
            raise RuntimeError("SIMPLEXAVG_KERNEL=cython but the compiled core is unavailable")
        return _core, "cython"
    if choice != "auto":
        raise ValueError(f"SIMPLEXAVG_KERNEL must be auto/cython/python, got {choice!r}")
    return (_core, "cython") if HAVE_CORE else (_ref, "python")


def backend_name() -> str:
    return _select()[1]


def eval_points(field: FieldSpec, pts: np.ndarray) -> np.ndarray:
    """Evaluate a field at points (m, d)."""
    pts = np.ascontiguousarray(pts, dtype=np.float64)
    return _select()[0].eval_points(field, pts)


def rotation2_reduce(fields, x, cos_a, sin_a, refl, vertices, n_batches: int = 1):
    """d = 2 rotation fast path (compiled backend only)."""
    backend, name = _select()
    if name != "cython":
        raise RuntimeError("rotation2_reduce requires the compiled backend")
    return backend.rotation2_reduce(
        fields,
        np.ascontiguousarray(x, dtype=np.float64),
        np.ascontiguousarray(cos_a, dtype=np.float64),
        np.ascontiguousarray(sin_a, dtype=np.float64),
        np.ascontiguousarray(refl, dtype=np.uint8),
        np.ascontiguousarray(vertices, dtype=np.float64),
        n_batches,
    )


def product_reduce(
    fields, x: np.ndarray, offsets: np.ndarray, n_batches: int = 1
) -> tuple[np.ndarray, np.ndarray]:
    """Batched Monte Carlo product reduction.

    Parameters
    ----------
    fields : list of FieldSpec, length k
    x : (c, d) output points
    offsets : (c, n, k, d) per-point sample offsets
    n_batches : number of equal sample batches (must divide n)

    Returns
    -------
    (sums, sumsqs) : two (c, n_batches) arrays of batch sums of the product
        and of its square.
    """
    if len(fields) > MAX_FIELDS:
        raise ValueError(f"kernel supports at most {MAX_FIELDS} inputs, got {len(fields)}")
    x = np.ascontiguousarray(x, dtype=np.float64)
    offsets = np.ascontiguousarray(offsets, dtype=np.float64)
    if offsets.ndim != 4 or offsets.shape[0] != x.shape[0] or offsets.shape[3] != x.shape[1]:
        raise ValueError(f"offsets shape {offsets.shape} inconsistent with x {x.shape}")
    if offsets.shape[2] != len(fields):
        raise ValueError("offsets third axis must match the number of fields")
    n = offsets.shape[1]
    if n % n_batches != 0:
        raise ValueError(f"n_batches={n_batches} must divide n_samples={n}")
    return _select()[0].product_reduce(fields, x, offsets, n_batches)
