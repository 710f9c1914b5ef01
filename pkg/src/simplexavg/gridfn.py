"""Discretized nonnegative functions on rectangular grids.

Values live at cell centers ``lo + (i + 1/2) h``.  Boxes are axis-aligned
with integer corners by default so that unit-cube restrictions coincide with
cell boundaries.  Exponent tuples are kept as exact rationals.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction
from itertools import product

import numpy as np

from .shapes import ShapeSet

__all__ = [
    "GridFunction",
    "ExponentTuple",
    "lp_norm",
    "rasterize",
    "restrict_to_cube",
    "holder_consistent",
    "parse_exponent",
]


@dataclass
class GridFunction:
    """Nonnegative sampled function on a rectangular grid.

    Attributes
    ----------
    lo : (d,) array
        Lower corner of the bounding box.
    h : (d,) array
        Grid spacing per axis.
    values : ndarray
        Cell-center samples, shape gives the cell count per axis.
    shape_set : ShapeSet, optional
        Retained when the function was rasterized from an analytic set, in
        which case operators evaluate exact membership instead of
        interpolating.
    stderr : ndarray, optional
        Per-cell Monte Carlo standard errors for operator outputs.
    """

    lo: np.ndarray
    h: np.ndarray
    values: np.ndarray
    shape_set: ShapeSet | None = None
    stderr: np.ndarray | None = None

    def __post_init__(self):
        self.values = np.ascontiguousarray(self.values, dtype=np.float64)
        self.lo = np.asarray(self.lo, dtype=np.float64)
        self.h = np.asarray(self.h, dtype=np.float64)
        if self.lo.shape != (self.values.ndim,) or self.h.shape != (self.values.ndim,):
            raise ValueError("lo and h must have one entry per value axis")
        if np.any(self.h <= 0):
            raise ValueError("grid spacing must be positive")
        if np.any(self.values < 0):
            raise ValueError("grid values must be nonnegative")

    @property
    def d(self) -> int:
        return self.values.ndim

    @property
    def hi(self) -> np.ndarray:
        return self.lo + self.h * np.array(self.values.shape)

    @property
    def cell_volume(self) -> float:
        return float(np.prod(self.h))

    def axis_centers(self, axis: int) -> np.ndarray:
        n = self.values.shape[axis]
        return self.lo[axis] + (np.arange(n) + 0.5) * self.h[axis]

    def centers(self) -> np.ndarray:
        """All cell centers, shape (n_cells, d), row-major cell order."""
        grids = np.meshgrid(*[self.axis_centers(a) for a in range(self.d)], indexing="ij")
        return np.stack([g.ravel() for g in grids], axis=1)

    def integral(self) -> float:
        return float(self.values.sum() * self.cell_volume)

    def support_bounding_ball(self) -> tuple[np.ndarray, float]:
        """Enclosing ball of the support, padded by one cell for interpolation."""
        if self.shape_set is not None:
            c, r = self.shape_set.bounding_ball()
            return c, r + float(np.linalg.norm(self.h))
        nz = np.nonzero(self.values)
        if len(nz[0]) == 0:
            return self.lo.copy(), 0.0
        mins = np.array([idx.min() for idx in nz], dtype=float)
        maxs = np.array([idx.max() for idx in nz], dtype=float)
        lo = self.lo + mins * self.h
        hi = self.lo + (maxs + 1) * self.h
        center = (lo + hi) / 2
        return center, float(np.linalg.norm(hi - lo) / 2 + np.linalg.norm(self.h))

    def same_grid(self, other: "GridFunction") -> bool:
        return (
            self.values.shape == other.values.shape
            and np.allclose(self.lo, other.lo)
            and np.allclose(self.h, other.h)
        )

    def __add__(self, other: "GridFunction") -> "GridFunction":
        if not self.same_grid(other):
            raise ValueError("grids do not match")
        return GridFunction(self.lo, self.h, self.values + other.values)

    def __rmul__(self, c: float) -> "GridFunction":
        if c < 0:
            raise ValueError("scalar must be nonnegative")
        return GridFunction(self.lo, self.h, c * self.values)


def lp_norm(f: GridFunction, p) -> float:
    """L^p norm or quasi-norm of a grid function; ``p = inf`` gives the max."""
    p = float(p)
    if p <= 0:
        raise ValueError(f"exponent must be positive, got {p}")
    if math.isinf(p):
        return float(f.values.max(initial=0.0))
    return float((f.values ** p).sum() * f.cell_volume) ** (1.0 / p)


def rasterize(
    shape: ShapeSet, box=None, h: float | np.ndarray = 1 / 64, align: str = "integer"
) -> GridFunction:
    """Indicator grid of a shape: cell value = membership of the cell center.

    ``box`` defaults to the shape's bounding box rounded out to integer
    corners (``align="integer"``, which keeps unit-cube boundaries on cell
    boundaries) or to whole cells (``align="cell"``, tighter).  The shape
    must fit inside the box; truncation is rejected.
    """
    d = shape.d
    h = np.broadcast_to(np.asarray(h, dtype=float), (d,)).copy()
    slo, shi = shape.bbox()
    if box is None:
        if align == "integer":
            lo = np.floor(slo)
            hi = np.ceil(shi)
        elif align == "cell":
            lo = np.floor(slo / h) * h
            hi = np.ceil(shi / h) * h
        else:
            raise ValueError(f"align must be 'integer' or 'cell', got {align!r}")
    else:
        lo = np.asarray(box[0], dtype=float)
        hi = np.asarray(box[1], dtype=float)
        if np.any(slo < lo - 1e-12) or np.any(shi > hi + 1e-12):
            raise ValueError("shape exceeds the requested box; refusing to truncate")
    counts = (hi - lo) / h
    n = np.rint(counts).astype(int)
    if np.any(np.abs(counts - n) > 1e-9) or np.any(n < 1):
        raise ValueError("grid spacing must evenly divide the box")
    axes = [lo[a] + (np.arange(n[a]) + 0.5) * h[a] for a in range(d)]
    grids = np.meshgrid(*axes, indexing="ij")
    pts = np.stack([g.ravel() for g in grids], axis=1)
    vals = shape.contains(pts).astype(np.float64).reshape(tuple(n))
    return GridFunction(lo, h, vals, shape_set=shape)


def restrict_to_cube(f: GridFunction, l) -> GridFunction:
    """Zero the function outside the unit cube with lower corner ``l``."""
    l = np.asarray(l, dtype=float)
    masks = []
    for a in range(f.d):
        c = f.axis_centers(a)
        masks.append((c >= l[a]) & (c < l[a] + 1))
    mask = masks[0]
    for m in masks[1:]:
        mask = np.multiply.outer(mask, m)
    return GridFunction(f.lo, f.h, f.values * mask, shape_set=None)


def unit_cube_indices(f: GridFunction):
    """Integer lower corners of all unit cubes overlapping the support."""
    nz = np.nonzero(f.values)
    if len(nz[0]) == 0:
        return []
    mins = [
        int(math.floor(f.lo[a] + (idx.min() + 0.5) * f.h[a])) for a, idx in enumerate(nz)
    ]
    maxs = [
        int(math.floor(f.lo[a] + (idx.max() + 0.5) * f.h[a])) for a, idx in enumerate(nz)
    ]
    ranges = [range(lo, hi + 1) for lo, hi in zip(mins, maxs)]
    return [np.array(c) for c in product(*ranges)]


# -- serialization -----------------------------------------------------------


def save_csv(f: GridFunction, path) -> None:
    """Write a grid function as CSV: header lines (d, lo, h, cells) then the
    values in row-major order, one per line."""
    with open(path, "w") as fh:
        fh.write(f"# d,{f.d}\n")
        fh.write("# lo," + ",".join(repr(float(v)) for v in f.lo) + "\n")
        fh.write("# h," + ",".join(repr(float(v)) for v in f.h) + "\n")
        fh.write("# cells," + ",".join(str(n) for n in f.values.shape) + "\n")
        for v in f.values.ravel():
            fh.write(repr(float(v)) + "\n")


def load_csv(path) -> GridFunction:
    header = {}
    vals = []
    with open(path) as fh:
        for line in fh:
            line = line.strip()
            if not line:
                continue
            if line.startswith("#"):
                parts = line[1:].strip().split(",")
                header[parts[0].strip()] = [p for p in parts[1:]]
            else:
                vals.append(float(line))
    d = int(header["d"][0])
    lo = np.array([float(v) for v in header["lo"]])
    h = np.array([float(v) for v in header["h"]])
    cells = tuple(int(v) for v in header["cells"])
    if len(lo) != d or len(cells) != d:
        raise ValueError("inconsistent grid header")
    return GridFunction(lo, h, np.array(vals).reshape(cells))


def save_npz(f: GridFunction, path) -> None:
    """Flat binary container with the same header fields as the CSV form."""
    np.savez(path, lo=f.lo, h=f.h, values=f.values)


def load_npz(path) -> GridFunction:
    data = np.load(path)
    return GridFunction(data["lo"], data["h"], data["values"])


# -- exponent tuples -------------------------------------------------------

INF = math.inf


def parse_exponent(x) -> Fraction | float:
    """Parse an exponent as an exact rational; 'inf' maps to math.inf."""
    if isinstance(x, Fraction):
        return x
    if isinstance(x, str):
        if x.strip().lower() in ("inf", "infinity", "oo"):
            return INF
        return Fraction(x)
    if isinstance(x, int):
        return Fraction(x)
    if isinstance(x, float):
        if math.isinf(x):
            return INF
        return Fraction(x).limit_denominator(10 ** 12)
    raise TypeError(f"cannot parse exponent from {x!r}")


def _recip(p) -> Fraction:
    if p == INF:
        return Fraction(0)
    return 1 / Fraction(p)


@dataclass(frozen=True)
class ExponentTuple:
    """Input exponents (p_1, ..., p_k) and target exponent r, r < 1 allowed."""

    p: tuple
    r: object
    label: str = ""

    def __post_init__(self):
        ps = tuple(parse_exponent(x) for x in self.p)
        if any(x != INF and x <= 0 for x in ps):
            raise ValueError("input exponents must be positive")
        r = parse_exponent(self.r)
        if r != INF and r <= 0:
            raise ValueError("target exponent must be positive")
        object.__setattr__(self, "p", ps)
        object.__setattr__(self, "r", r)

    @property
    def k(self) -> int:
        return len(self.p)

    def sum_recip_p(self) -> Fraction:
        return sum((_recip(x) for x in self.p), Fraction(0))

    def recip_r(self) -> Fraction:
        return _recip(self.r)

    def is_improving(self) -> bool:
        """True when 1/r < sum 1/p_i (output better than Holder scaling)."""
        return self.recip_r() < self.sum_recip_p()

    def describe(self) -> str:
        ps = ",".join(str(x) for x in self.p)
        return f"({ps};{self.r})" + (f" [{self.label}]" if self.label else "")


def holder_consistent(e: ExponentTuple, tol: float = 1e-12) -> bool:
    """True iff sum of 1/p_i equals 1/r (exactly for rational entries)."""
    diff = e.sum_recip_p() - e.recip_r()
    return abs(float(diff)) <= tol
