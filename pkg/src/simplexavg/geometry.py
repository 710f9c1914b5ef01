"""Regular simplices, Haar-distributed rotations, sphere sampling and the
independent-frame selection used by the restricted strong-type argument."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .rng import stream

__all__ = [
    "SimplexConfig",
    "Rotation",
    "SpherePoint",
    "DegenerateConfigurationError",
    "regular_simplex_vertices",
    "sample_rotation",
    "sample_rotation_matrices",
    "sample_sphere_point",
    "sample_sphere_points",
    "is_unit_simplex_tuple",
    "select_independent_frames",
]

SPAN_TOL = 1e-10  # distance below which a candidate counts as inside the span
TIE_TOL = 1e-9  # distances within this of the max are tied; smallest index wins


class DegenerateConfigurationError(RuntimeError):
    """All frame candidates were numerically inside the current span."""


@dataclass(frozen=True)
class SimplexConfig:
    """Vertices u_1..u_k of a unit-side regular k-simplex with u_0 = 0.

    Rows of ``vertices`` are unit vectors in R^d with pairwise inner
    products 1/2, so all pairwise distances among {0, u_1, ..., u_k} are 1.
    """

    d: int
    k: int
    vertices: np.ndarray  # (k, d)

    def __post_init__(self):
        if not 1 <= self.k <= self.d:
            raise ValueError(f"need 1 <= k <= d, got k={self.k}, d={self.d}")
        v = np.asarray(self.vertices, dtype=float)
        if v.shape != (self.k, self.d):
            raise ValueError(f"vertices must have shape ({self.k}, {self.d}), got {v.shape}")
        gram = v @ v.T
        target = np.full((self.k, self.k), 0.5) + 0.5 * np.eye(self.k)
        if np.max(np.abs(gram - target)) > 1e-12:
            raise ValueError("vertices do not form a unit-side regular simplex")
        object.__setattr__(self, "vertices", v)


@dataclass(frozen=True)
class Rotation:
    """Element of O(d), stored as its matrix."""

    d: int
    matrix: np.ndarray  # (d, d)

    def __post_init__(self):
        m = np.asarray(self.matrix, dtype=float)
        if m.shape != (self.d, self.d):
            raise ValueError(f"matrix must be {self.d}x{self.d}, got {m.shape}")
        if np.max(np.abs(m.T @ m - np.eye(self.d))) > 1e-10:
            raise ValueError("matrix is not orthogonal within 1e-10")
        det = float(np.linalg.det(m))
        if abs(abs(det) - 1.0) > 1e-8:
            raise ValueError(f"|det| = {abs(det)} is not 1 within 1e-8")
        object.__setattr__(self, "matrix", m)

    @property
    def det_sign(self) -> int:
        return 1 if np.linalg.det(self.matrix) > 0 else -1


@dataclass(frozen=True)
class SpherePoint:
    """Point of the unit sphere S^{n-1}."""

    n: int
    coords: np.ndarray

    def __post_init__(self):
        c = np.asarray(self.coords, dtype=float)
        if c.shape != (self.n,):
            raise ValueError(f"coords must have shape ({self.n},), got {c.shape}")
        if abs(np.linalg.norm(c) - 1.0) > 1e-12:
            raise ValueError("coords are not unit length within 1e-12")
        object.__setattr__(self, "coords", c)


def regular_simplex_vertices(d: int, k: int) -> SimplexConfig:
    """Construct the unit-side regular k-simplex embedded in R^d.

    The Gram matrix of the nonzero vertices (ones on the diagonal, 1/2 off
    it) is Cholesky-factored; its rows give vertices spanning the first k
    coordinates.

    Parameters
    ----------
    d : int
        Ambient dimension.
    k : int
        Simplex order, 1 <= k <= d.
    """
    if k < 1 or k > d:
        raise ValueError(f"simplex order k must satisfy 1 <= k <= d, got k={k}, d={d}")
    gram = np.full((k, k), 0.5) + 0.5 * np.eye(k)
    chol = np.linalg.cholesky(gram)
    vertices = np.zeros((k, d))
    vertices[:, :k] = chol
    return SimplexConfig(d=d, k=k, vertices=vertices)


def _orthonormalize(mats: np.ndarray) -> np.ndarray:
    """Gram-Schmidt on the columns of a stack of matrices (n, d, d).

    Normalization factors are positive, i.e. this is the unique QR with a
    positive-diagonal R; applied to iid standard Gaussian matrices the Q
    factor is exactly Haar-distributed on O(d).
    """
    q = np.array(mats, dtype=float)
    d = q.shape[-1]
    for j in range(d):
        v = q[..., j]
        for i in range(j):
            u = q[..., i]
            v = v - np.sum(u * v, axis=-1, keepdims=True) * u
        q[..., j] = v / np.linalg.norm(v, axis=-1, keepdims=True)
    return q


def sample_rotation_matrices(
    d: int, n: int, rng: np.random.Generator, group: str = "O"
) -> np.ndarray:
    """Draw ``n`` Haar-distributed matrices from O(d) or SO(d), shape (n, d, d)."""
    if d < 1:
        raise ValueError(f"dimension must be >= 1, got {d}")
    if group not in ("O", "SO"):
        raise ValueError(f"group must be 'O' or 'SO', got {group!r}")
    gauss = rng.standard_normal((n, d, d))
    q = _orthonormalize(gauss)
    if group == "SO":
        # Haar measure on O(d) conditioned on det = +1; flipping the last
        # column maps the det = -1 component measure-preservingly onto SO(d).
        neg = np.linalg.det(q) < 0
        q[neg, :, -1] *= -1.0
    return q


def sample_rotation(d: int, seed: int | np.random.Generator, group: str = "O") -> Rotation:
    """Sample one Haar-distributed rotation.

    ``seed`` may be a master seed (stream tag ``"rotation"``) or an existing
    generator.  ``group="O"`` includes reflections (det = -1 with
    probability 1/2); ``group="SO"`` restricts to det = +1.
    """
    rng = seed if isinstance(seed, np.random.Generator) else stream(seed, "rotation")
    return Rotation(d=d, matrix=sample_rotation_matrices(d, 1, rng, group=group)[0])


def sample_sphere_points(n: int, count: int, rng: np.random.Generator) -> np.ndarray:
    """Uniform points on S^{n-1}, shape (count, n), by normalized Gaussians."""
    if n < 1:
        raise ValueError(f"sphere dimension must be >= 1, got {n}")
    g = rng.standard_normal((count, n))
    return g / np.linalg.norm(g, axis=1, keepdims=True)


def sample_sphere_point(n: int, seed: int | np.random.Generator) -> SpherePoint:
    """Sample one uniform point of S^{n-1}."""
    rng = seed if isinstance(seed, np.random.Generator) else stream(seed, "sphere")
    return SpherePoint(n=n, coords=sample_sphere_points(n, 1, rng)[0])


def is_unit_simplex_tuple(x, v, tol: float = 1e-9) -> bool:
    """True iff all pairwise distances among {x, v_1, ..., v_k} equal 1 within tol."""
    x = np.asarray(x, dtype=float)
    pts = np.vstack([x[None, :], np.asarray(v, dtype=float)])
    if pts.ndim != 2:
        raise ValueError("points must share a common dimension")
    diff = pts[:, None, :] - pts[None, :, :]
    dist = np.linalg.norm(diff, axis=-1)
    off = ~np.eye(len(pts), dtype=bool)
    return bool(np.all(np.abs(dist[off] - 1.0) <= tol))


def select_independent_frames(rotations, simplex: SimplexConfig) -> list[int]:
    """Select vertex indices m_1..m_k so that {R_i u_{m_i}} is a linear frame.

    Walks the rotation tuple once: m_1 = 1, and at each later step the
    admissible vertex index p <= i whose rotated vertex is farthest from the
    span of the vectors already kept is chosen (ties broken toward the
    smallest p).  Returns 1-based indices.

    Raises
    ------
    DegenerateConfigurationError
        If every candidate lies within ``SPAN_TOL`` of the current span.
    """
    mats = [r.matrix if isinstance(r, Rotation) else np.asarray(r, dtype=float) for r in rotations]
    k = simplex.k
    if len(mats) != k:
        raise ValueError(f"need exactly k={k} rotations, got {len(mats)}")
    u = simplex.vertices  # (k, d)

    chosen = [1]
    frame = [mats[0] @ u[0]]
    basis = [frame[0] / np.linalg.norm(frame[0])]
    for j in range(1, k):
        candidates = mats[j] @ u[: j + 1].T  # (d, j+1): R_{j+1} u_p for p <= j+1
        resid = candidates.copy()
        for b in basis:
            resid -= b[:, None] * (b @ candidates)[None, :]
        dist = np.linalg.norm(resid, axis=0)
        dmax = float(dist.max())
        if dmax <= SPAN_TOL:
            raise DegenerateConfigurationError(
                f"all {j + 1} candidates within {SPAN_TOL} of the span at step {j + 1}"
            )
        p = int(np.nonzero(dist >= dmax - TIE_TOL)[0][0])
        chosen.append(p + 1)
        frame.append(candidates[:, p])
        newb = resid[:, p] / np.linalg.norm(resid[:, p])
        basis.append(newb)
    return chosen


def frame_min_singular_value(rotations, simplex: SimplexConfig, indices) -> float:
    """Smallest singular value of the matrix [R_1 u_{m_1} ... R_k u_{m_k}]."""
    mats = [r.matrix if isinstance(r, Rotation) else np.asarray(r, dtype=float) for r in rotations]
    cols = np.stack(
        [mats[i] @ simplex.vertices[m - 1] for i, m in enumerate(indices)], axis=1
    )
    return float(np.linalg.svd(cols, compute_uv=False)[-1])
