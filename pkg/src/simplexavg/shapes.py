"""Analytic indicator sets with exact membership tests and Lebesgue measures.

A :class:`ShapeSet` is a tree of primitives (ball, annulus, slab, cube, cap)
combined by union / intersection / difference.  Membership is decided
exactly per point; measures use closed forms for primitives, deterministic
quadrature for caps in d >= 3, and seeded Monte Carlo with a declared
relative error bound for boolean combinations.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from math import asin, gamma, pi, sqrt

import numpy as np
from scipy import integrate, special

from .rng import stream

__all__ = ["ShapeSet", "ball_volume", "compile_program"]

# opcodes for the compiled membership program (postfix stack machine)
OP_BALL = 1
OP_ANNULUS = 2
OP_SLAB = 3
OP_CUBE = 4
OP_CAP = 5
OP_UNION = 10
OP_INTERSECTION = 11
OP_DIFFERENCE = 12

_MC_SEED_TAG = "shape-measure"
_MC_REL_TOL = 1e-3  # declared relative error bound for MC measures


def ball_volume(d: int, r: float) -> float:
    """Volume of the d-ball of radius r."""
    return pi ** (d / 2) / gamma(d / 2 + 1) * r ** d


def _angular_cap_integral(d: int, s2: float) -> float:
    """Integral of sin^(d-2) over [0, theta] with sin^2(theta) = s2, for d >= 2."""
    if d == 2:
        return asin(sqrt(s2))
    a, b = (d - 1) / 2, 0.5
    return 0.5 * special.beta(a, b) * special.betainc(a, b, min(s2, 1.0))


@dataclass(frozen=True)
class ShapeSet:
    """Indicator set in R^d.

    Use the classmethod constructors; the generic fields are
    ``kind`` (one of ball/annulus/slab/cube/cap/union/intersection/difference),
    numeric ``params`` and, for boolean kinds, ``children``.
    """

    kind: str
    d: int
    params: dict = field(default_factory=dict)
    children: tuple = ()

    # -- constructors -----------------------------------------------------

    @classmethod
    def ball(cls, center, radius: float) -> "ShapeSet":
        center = np.asarray(center, dtype=float)
        if radius <= 0:
            raise ValueError(f"ball radius must be positive, got {radius}")
        return cls("ball", len(center), {"center": tuple(center), "radius": float(radius)})

    @classmethod
    def annulus(cls, center, r_inner: float, r_outer: float) -> "ShapeSet":
        center = np.asarray(center, dtype=float)
        if not 0 <= r_inner < r_outer:
            raise ValueError(f"need 0 <= r_inner < r_outer, got {r_inner}, {r_outer}")
        return cls(
            "annulus",
            len(center),
            {"center": tuple(center), "r_inner": float(r_inner), "r_outer": float(r_outer)},
        )

    @classmethod
    def slab(cls, axis: int, center, thickness: float, lateral: float) -> "ShapeSet":
        """Box-like slab: ``thickness`` along coordinate ``axis``, extent
        ``lateral`` along every other axis, centered at ``center``."""
        center = np.asarray(center, dtype=float)
        d = len(center)
        if not 0 <= axis < d:
            raise ValueError(f"axis {axis} out of range for dimension {d}")
        if thickness <= 0 or lateral <= 0:
            raise ValueError("thickness and lateral extent must be positive")
        return cls(
            "slab",
            d,
            {
                "axis": int(axis),
                "center": tuple(center),
                "thickness": float(thickness),
                "lateral": float(lateral),
            },
        )

    @classmethod
    def cube(cls, corner, side: float) -> "ShapeSet":
        corner = np.asarray(corner, dtype=float)
        if side <= 0:
            raise ValueError(f"cube side must be positive, got {side}")
        return cls("cube", len(corner), {"corner": tuple(corner), "side": float(side)})

    @classmethod
    def cap(cls, direction, r_inner: float, r_outer: float, half_width: float) -> "ShapeSet":
        """Knapp-style cap: the annulus ``r_inner <= |x| <= r_outer`` cut to
        points within ``half_width`` of the ray spanned by ``direction``."""
        u = np.asarray(direction, dtype=float)
        n = np.linalg.norm(u)
        if n == 0:
            raise ValueError("cap direction must be nonzero")
        if not 0 <= r_inner < r_outer or half_width <= 0:
            raise ValueError("cap needs 0 <= r_inner < r_outer and half_width > 0")
        return cls(
            "cap",
            len(u),
            {
                "direction": tuple(u / n),
                "r_inner": float(r_inner),
                "r_outer": float(r_outer),
                "half_width": float(half_width),
            },
        )

    @classmethod
    def union_of(cls, members, d: int | None = None) -> "ShapeSet":
        members = tuple(members)
        if not members:
            if d is None:
                raise ValueError("an empty union needs an explicit dimension")
            return cls("union", d, {}, ())
        d = members[0].d
        if any(m.d != d for m in members):
            raise ValueError("union members must share a dimension")
        return cls("union", d, {}, members)

    @classmethod
    def intersection_of(cls, members) -> "ShapeSet":
        members = tuple(members)
        if len(members) < 2:
            raise ValueError("intersection needs at least two members")
        d = members[0].d
        if any(m.d != d for m in members):
            raise ValueError("intersection members must share a dimension")
        return cls("intersection", d, {}, members)

    @classmethod
    def difference_of(cls, a: "ShapeSet", b: "ShapeSet") -> "ShapeSet":
        if a.d != b.d:
            raise ValueError("difference members must share a dimension")
        return cls("difference", a.d, {}, (a, b))

    # -- membership --------------------------------------------------------

    def contains(self, pts: np.ndarray) -> np.ndarray:
        """Exact membership of points, shape (m, d) -> bool (m,)."""
        pts = np.atleast_2d(np.asarray(pts, dtype=float))
        if pts.shape[1] != self.d:
            raise ValueError(f"points have dimension {pts.shape[1]}, shape has {self.d}")
        p = self.params
        if self.kind == "ball":
            diff = pts - np.array(p["center"])
            return np.einsum("ij,ij->i", diff, diff) <= p["radius"] ** 2
        if self.kind == "annulus":
            diff = pts - np.array(p["center"])
            rr = np.einsum("ij,ij->i", diff, diff)
            return (rr >= p["r_inner"] ** 2) & (rr <= p["r_outer"] ** 2)
        if self.kind == "slab":
            diff = np.abs(pts - np.array(p["center"]))
            ax = p["axis"]
            ok = diff[:, ax] <= p["thickness"] / 2
            for j in range(self.d):
                if j != ax:
                    ok &= diff[:, j] <= p["lateral"] / 2
            return ok
        if self.kind == "cube":
            corner = np.array(p["corner"])
            return np.all((pts >= corner) & (pts <= corner + p["side"]), axis=1)
        if self.kind == "cap":
            u = np.array(p["direction"])
            rr = np.einsum("ij,ij->i", pts, pts)
            along = pts @ u
            perp2 = rr - along ** 2
            return (
                (rr >= p["r_inner"] ** 2)
                & (rr <= p["r_outer"] ** 2)
                & (along > 0)
                & (perp2 <= p["half_width"] ** 2)
            )
        if self.kind == "union":
            if not self.children:
                return np.zeros(len(pts), dtype=bool)
            out = self.children[0].contains(pts)
            for c in self.children[1:]:
                out |= c.contains(pts)
            return out
        if self.kind == "intersection":
            out = self.children[0].contains(pts)
            for c in self.children[1:]:
                out &= c.contains(pts)
            return out
        if self.kind == "difference":
            return self.children[0].contains(pts) & ~self.children[1].contains(pts)
        raise ValueError(f"unknown shape kind {self.kind!r}")

    # -- geometry ----------------------------------------------------------

    def bbox(self) -> tuple[np.ndarray, np.ndarray]:
        """Axis-aligned bounding box (lo, hi)."""
        p = self.params
        if self.kind == "ball":
            c = np.array(p["center"])
            return c - p["radius"], c + p["radius"]
        if self.kind == "annulus":
            c = np.array(p["center"])
            return c - p["r_outer"], c + p["r_outer"]
        if self.kind == "slab":
            c = np.array(p["center"])
            half = np.full(self.d, p["lateral"] / 2)
            half[p["axis"]] = p["thickness"] / 2
            return c - half, c + half
        if self.kind == "cube":
            corner = np.array(p["corner"])
            return corner, corner + p["side"]
        if self.kind == "cap":
            u = np.array(p["direction"])
            w = p["half_width"]
            a0 = sqrt(max(p["r_inner"] ** 2 - w * w, 0.0))
            lo = np.minimum(a0 * u, p["r_outer"] * u) - w
            hi = np.maximum(a0 * u, p["r_outer"] * u) + w
            return lo, hi
        if not self.children:  # empty union
            return np.zeros(self.d), np.zeros(self.d)
        lo0, hi0 = self.children[0].bbox()
        if self.kind == "difference":
            return lo0, hi0
        boxes = [c.bbox() for c in self.children]
        if self.kind == "union":
            return (
                np.min([b[0] for b in boxes], axis=0),
                np.max([b[1] for b in boxes], axis=0),
            )
        # intersection
        return (
            np.max([b[0] for b in boxes], axis=0),
            np.min([b[1] for b in boxes], axis=0),
        )

    def bounding_ball(self) -> tuple[np.ndarray, float]:
        """Conservative enclosing ball (center, radius)."""
        if self.kind == "ball":
            return np.array(self.params["center"]), self.params["radius"]
        if self.kind == "annulus":
            return np.array(self.params["center"]), self.params["r_outer"]
        lo, hi = self.bbox()
        return (lo + hi) / 2, float(np.linalg.norm(hi - lo) / 2)

    def measure(self, rel_tol: float = _MC_REL_TOL) -> float:
        """Lebesgue measure |E|.

        Closed form for ball/annulus/slab/cube and for caps in d = 2; caps in
        d >= 3 use deterministic radial quadrature.  Boolean combinations use
        a sum when members are provably disjoint (disjoint bounding balls),
        otherwise seeded Monte Carlo targeting relative error ``rel_tol``.
        """
        p = self.params
        if self.kind == "ball":
            return ball_volume(self.d, p["radius"])
        if self.kind == "annulus":
            return ball_volume(self.d, p["r_outer"]) - ball_volume(self.d, p["r_inner"])
        if self.kind == "slab":
            return p["thickness"] * p["lateral"] ** (self.d - 1)
        if self.kind == "cube":
            return p["side"] ** self.d
        if self.kind == "cap":
            return self._cap_measure()
        if self.kind == "union" and self._children_disjoint():
            return sum(c.measure(rel_tol) for c in self.children)
        return self._mc_measure(rel_tol)

    def _children_disjoint(self) -> bool:
        balls = [c.bounding_ball() for c in self.children]
        for i in range(len(balls)):
            for j in range(i + 1, len(balls)):
                ci, ri = balls[i]
                cj, rj = balls[j]
                if np.linalg.norm(ci - cj) <= ri + rj:
                    return False
        return True

    def _cap_measure(self) -> float:
        p = self.params
        ri, ro, w = p["r_inner"], p["r_outer"], p["half_width"]
        d = self.d
        if w >= ro:
            # the lateral cut is inactive on the half-annulus
            return (ball_volume(d, ro) - ball_volume(d, ri)) / 2
        if d == 2:
            # area = int 2 r asin(min(w/r,1)) dr; antiderivative below for r >= w
            def anti(r):
                return r * r * asin(w / r) + w * sqrt(r * r - w * w)

            lo = max(ri, w)
            area = anti(ro) - anti(lo)
            if ri < w:  # inner edge inside the cylinder: quarter-disc pieces
                area += (pi / 2) * (w * w - ri * ri)
            return area
        def integrand(r):
            s2 = min((w / r) ** 2, 1.0)
            return r ** (d - 1) * _angular_cap_integral(d, s2)

        val, _ = integrate.quad(integrand, ri, ro, limit=200)
        return _cap_norm(d) * val

    def _mc_measure(self, rel_tol: float) -> float:
        lo, hi = self.bbox()
        vol_box = float(np.prod(hi - lo))
        if vol_box <= 0:
            return 0.0
        key = json.dumps(self.to_dict(), sort_keys=True)
        rng = stream(0, _MC_SEED_TAG + key)
        n0 = 200_000
        hits = int(np.count_nonzero(self.contains(rng.uniform(lo, hi, size=(n0, self.d)))))
        n_tot = n0
        p_hat = max(hits / n_tot, 1e-12)
        # n for stderr/p <= rel_tol: n >= (1-p)/(p rel_tol^2)
        n_target = int(min((1 - p_hat) / (p_hat * rel_tol ** 2), 4e7))
        while n_tot < n_target:
            n_next = min(n_target - n_tot, 2_000_000)
            hits += int(
                np.count_nonzero(self.contains(rng.uniform(lo, hi, size=(n_next, self.d))))
            )
            n_tot += n_next
        return hits / n_tot * vol_box

    # -- serialization -----------------------------------------------------

    def to_dict(self) -> dict:
        out = {"kind": self.kind, "d": self.d, **self.params}
        if self.children:
            out["children"] = [c.to_dict() for c in self.children]
        return out

    @classmethod
    def from_dict(cls, data: dict) -> "ShapeSet":
        kind = data["kind"]
        if kind == "ball":
            return cls.ball(data["center"], data["radius"])
        if kind == "annulus":
            return cls.annulus(data["center"], data["r_inner"], data["r_outer"])
        if kind == "slab":
            return cls.slab(data["axis"], data["center"], data["thickness"], data["lateral"])
        if kind == "cube":
            return cls.cube(data["corner"], data["side"])
        if kind == "cap":
            return cls.cap(data["direction"], data["r_inner"], data["r_outer"], data["half_width"])
        children = [cls.from_dict(c) for c in data.get("children", [])]
        if kind == "union":
            return cls.union_of(children)
        if kind == "intersection":
            return cls.intersection_of(children)
        if kind == "difference":
            return cls.difference_of(*children)
        raise ValueError(f"unknown shape kind {kind!r}")


def _cap_norm(d: int) -> float:
    """Surface measure of S^{d-2} (the azimuthal factor in the cap integral)."""
    return 2 * pi ** ((d - 1) / 2) / gamma((d - 1) / 2)


def compile_program(shape: ShapeSet) -> tuple[np.ndarray, np.ndarray]:
    """Flatten a shape tree into (codes, params) for the membership kernels.

    ``codes`` is an int32 array of (opcode, arity) rows in postfix order;
    primitive parameters are appended to ``params`` in evaluation order.
    """
    codes: list[tuple[int, int]] = []
    params: list[float] = []

    def emit(s: ShapeSet):
        p = s.params
        if s.kind == "ball":
            codes.append((OP_BALL, 0))
            params.extend(p["center"])
            params.append(p["radius"])
        elif s.kind == "annulus":
            codes.append((OP_ANNULUS, 0))
            params.extend(p["center"])
            params.extend([p["r_inner"], p["r_outer"]])
        elif s.kind == "slab":
            codes.append((OP_SLAB, 0))
            params.append(float(p["axis"]))
            params.extend(p["center"])
            params.extend([p["thickness"], p["lateral"]])
        elif s.kind == "cube":
            codes.append((OP_CUBE, 0))
            params.extend(p["corner"])
            params.append(p["side"])
        elif s.kind == "cap":
            codes.append((OP_CAP, 0))
            params.extend(p["direction"])
            params.extend([p["r_inner"], p["r_outer"], p["half_width"]])
        elif s.kind in ("union", "intersection"):
            for c in s.children:
                emit(c)
            op = OP_UNION if s.kind == "union" else OP_INTERSECTION
            codes.append((op, len(s.children)))
        elif s.kind == "difference":
            emit(s.children[0])
            emit(s.children[1])
            codes.append((OP_DIFFERENCE, 2))
        else:
            raise ValueError(f"unknown shape kind {s.kind!r}")

    emit(shape)
    return (
        np.asarray(codes, dtype=np.int32).reshape(-1, 2),
        np.asarray(params, dtype=np.float64),
    )
