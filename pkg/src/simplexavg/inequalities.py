"""Exponent-region geometry and the restricted strong-type ratio harness.

Region membership is exact rational arithmetic; only the Monte Carlo ratios
are floating point.  The harness evaluates an operator on indicator families
at log-spaced scales and reports the ratio ``||op(1_E1,...)||_r / prod
|E_i|^{1/p_i}`` per member, per-kind log-log slopes, and the slope of the
max-ratio envelope across kinds (the scale-wise best lower bound on the
operator constant, which is the boundedness surrogate).
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field as dc_field
from fractions import Fraction
from itertools import permutations

import numpy as np

from .geometry import SimplexConfig, regular_simplex_vertices
from .gridfn import ExponentTuple, GridFunction, holder_consistent, lp_norm, rasterize
from .operators import (
    McEstimate,
    bilinear_spherical_average,
    simplex_average,
    spherical_average,
)
from .rng import derive_seed
from .shapes import ShapeSet

__all__ = [
    "InsufficientBudgetError",
    "UndefinedRatioError",
    "t_l1_region_contains",
    "region_polygon",
    "clm_exponents",
    "lower_dim_exponents",
    "improving_triples_T",
    "OperatorSpec",
    "McBudget",
    "ShapeFamily",
    "make_family",
    "MemberEval",
    "evaluate_member",
    "restricted_ratio",
    "ratio_from_member",
    "verify_uniform_boundedness",
    "VerificationReport",
]


class InsufficientBudgetError(RuntimeError):
    """An MC ratio carries more than 20% relative standard error."""


class UndefinedRatioError(ValueError):
    """A restricted ratio was requested against a zero-measure set."""


# -- Theorem 1.1 region ------------------------------------------------------


def _as_frac(x) -> Fraction:
    if isinstance(x, Fraction):
        return x
    if isinstance(x, str):
        return Fraction(x)
    if isinstance(x, float):
        return Fraction(x).limit_denominator(10 ** 12)
    return Fraction(x)


def region_polygon(d: int) -> list[tuple[Fraction, Fraction]]:
    """Vertices of the L^1-target boundedness region for the triangle average."""
    if d < 2:
        raise ValueError("region is defined for d >= 2")
    c = Fraction(d, d + 1)
    return [(Fraction(0), Fraction(1)), (c, c), (Fraction(1), Fraction(0))]


def t_l1_region_contains(d: int, pt) -> bool:
    """Exact closed-hull membership of (1/p, 1/q) in the region of the
    L^p x L^q -> L^1 triangle-average bound."""
    x, y = (_as_frac(v) for v in pt)
    verts = region_polygon(d)
    # counter-clockwise order: (0,1) -> (c,c) -> (1,0) has positive orientation
    a, b, c = verts
    for p1, p2 in ((a, b), (b, c), (c, a)):
        cross = (p2[0] - p1[0]) * (y - p1[1]) - (p2[1] - p1[1]) * (x - p1[0])
        if cross > 0:
            return False
    return True


# -- exponent calculators ----------------------------------------------------


def _geo_denominator(q: Fraction, k: int) -> Fraction:
    # 2 + q + q^2 + ... + q^(k-2)
    return Fraction(2) + sum((q ** i for i in range(1, k - 1)), Fraction(0))


def clm_exponents(m: int, k: int, d: int) -> list[ExponentTuple]:
    """Exponent tuples from the iterated majorization bounds.

    Emits the Holder diagonal (kr, ..., kr; r) with
    r = q^{k-1} / (2 + q + ... + q^{k-2}), and the improving tuples with
    p_1 = q^{k-1}(d+1)/d, p_j = q^{k+1-j}(d+1)/d and
    r = q^{k-1}(d+1) / (2 + q + ... + q^{k-2}), in all input permutations.
    Requires d >= m k.
    """
    if m < 2 or k < 2:
        raise ValueError(f"need m, k >= 2, got m={m}, k={k}")
    if d < m * k:
        raise ValueError(f"hypothesis d >= mk violated: d={d} < {m * k}")
    q = Fraction(m, m - 1)
    denom = _geo_denominator(q, k)
    out = []
    r_diag = q ** (k - 1) / denom
    out.append(ExponentTuple(p=(k * r_diag,) * k, r=r_diag, label="majorization-diagonal"))
    scale = Fraction(d + 1, d)
    ps = [q ** (k - 1) * scale] + [q ** (k + 1 - j) * scale for j in range(2, k + 1)]
    r_imp = q ** (k - 1) * (d + 1) / denom
    seen = set()
    for perm in permutations(ps):
        if perm in seen:
            continue
        seen.add(perm)
        out.append(ExponentTuple(p=perm, r=r_imp, label="majorization-improving"))
    return out


def lower_dim_exponents(k: int, d: int) -> list[ExponentTuple]:
    """Exponent tuples of the low-dimension restricted strong-type bounds.

    Emits (k, ..., k; k), the improving tuple (k(d+1)/d, ..., k(d+1)/d; d+1),
    the quasi-Banach hull vertices with q_{s(1)} = (d+1)/d,
    q_{s(j)} = (k-1)(d+1)/d and r = (d+1)/(2d), and the Holder-diagonal
    endpoint (k r0, ..., k r0; r0) with r0 = (d+1)/(2d).
    """
    if k < 1:
        raise ValueError(f"need k >= 1, got {k}")
    if d < k:
        raise ValueError(f"need d >= k, got d={d}, k={k}")
    out = [
        ExponentTuple(p=(Fraction(k),) * k, r=Fraction(k), label="restricted-diagonal"),
        ExponentTuple(
            p=(Fraction(k * (d + 1), d),) * k, r=Fraction(d + 1), label="restricted-improving"
        ),
    ]
    r0 = Fraction(d + 1, 2 * d)
    if k >= 2:
        q1 = Fraction(d + 1, d)
        qj = Fraction((k - 1) * (d + 1), d)
        seen = set()
        for perm in permutations([q1] + [qj] * (k - 1)):
            if perm in seen:
                continue
            seen.add(perm)
            out.append(ExponentTuple(p=perm, r=r0, label="quasi-banach-vertex"))
    out.append(ExponentTuple(p=(k * r0,) * k, r=r0, label="holder-diagonal-endpoint"))
    return out


def improving_triples_T(d: int) -> list[tuple[Fraction, Fraction, Fraction]]:
    """The two improving (1/p, 1/q, 1/r) triples for the triangle average."""
    if d < 2:
        raise ValueError("need d >= 2")
    a = Fraction(d, d + 1)
    b = Fraction(d, 2 * (d + 1))
    r = Fraction(d + 2, 2 * (d + 1))
    return [(a, b, r), (b, a, r)]


# -- operator specs and budgets ----------------------------------------------


@dataclass(frozen=True)
class OperatorSpec:
    """Which averaging operator the harness drives."""

    kind: str  # "S1", "T", "Sk", "B"
    d: int
    k: int = 1
    group: str = "O"

    @classmethod
    def from_string(cls, name: str, d: int, group: str = "O") -> "OperatorSpec":
        name = name.upper()
        if name == "S1":
            return cls("S1", d, 1, group)
        if name in ("T", "S2"):
            return cls("T", d, 2, group)
        if name == "B":
            return cls("B", d, 2, group)
        if name.startswith("S") and name[1:].isdigit():
            return cls("Sk", d, int(name[1:]), group)
        raise ValueError(f"unknown operator {name!r}")

    @property
    def n_inputs(self) -> int:
        return self.k

    def simplex(self) -> SimplexConfig | None:
        if self.kind in ("T", "Sk"):
            return regular_simplex_vertices(self.d, self.k)
        return None

    def probe_anchors(self) -> np.ndarray:
        """Directions at unit orbit distance used to place probe families."""
        if self.kind == "S1":
            e1 = np.zeros(self.d)
            e1[0] = 1.0
            return e1[None, :]
        if self.kind == "B":
            e1 = np.zeros(self.d)
            e1[0] = 1.0 / math.sqrt(2.0)
            return np.stack([e1, e1])
        return self.simplex().vertices

    def apply_grids(self, fs, budget: "McBudget", seed: int) -> GridFunction:
        if self.kind == "S1":
            return spherical_average(
                fs[0], budget.n_samples, seed, workers=budget.workers, n_batches=budget.n_batches
            )
        if self.kind == "B":
            return bilinear_spherical_average(
                fs[0], fs[1], budget.n_samples, seed, workers=budget.workers, n_batches=budget.n_batches
            )
        return simplex_average(
            self.simplex(),
            fs,
            budget.n_samples,
            seed,
            group=self.group,
            workers=budget.workers,
            n_batches=budget.n_batches,
        )

    def describe(self) -> str:
        base = self.kind if self.kind != "Sk" else f"S{self.k}"
        return f"{base}(d={self.d}{',SO' if self.group == 'SO' else ''})"


@dataclass(frozen=True)
class McBudget:
    h: float = 1 / 64
    n_samples: int = 4096
    n_batches: int = 4
    workers: int | None = None


# -- probe families ----------------------------------------------------------


@dataclass
class ShapeFamily:
    """Scale family delta -> k-tuple of indicator sets for one probe kind."""

    name: str
    deltas: tuple
    op: OperatorSpec

    def sets_at(self, delta: float) -> list[ShapeSet]:
        op = self.op
        anchors = op.probe_anchors()
        radii = np.linalg.norm(anchors, axis=1)
        if self.name in ("vertex-balls", "twin-balls"):
            return [ShapeSet.ball(a, delta) for a in anchors]
        if self.name == "annuli":
            return [
                ShapeSet.annulus(np.zeros(op.d), max(r - delta / 2, 0.0), r + delta / 2)
                for r in radii
            ]
        if self.name == "slabs":
            return [
                ShapeSet.slab(0, np.zeros(op.d), delta, 3.0) for _ in range(op.n_inputs)
            ]
        if self.name == "knapp":
            return [
                ShapeSet.cap(a, max(r - delta / 2, 0.0), r + delta / 2, math.sqrt(delta) / 2)
                for a, r in zip(anchors, radii)
            ]
        raise ValueError(f"unknown family kind {self.name!r}")


STANDARD_FAMILY_KINDS = ("vertex-balls", "annuli", "slabs", "knapp")


def make_family(op: OperatorSpec, kind: str, deltas) -> ShapeFamily:
    return ShapeFamily(name=kind, deltas=tuple(float(x) for x in deltas), op=op)


# -- ratio harness -----------------------------------------------------------


@dataclass
class MemberEval:
    """Cached operator evaluation for one family member."""

    kind: str
    delta: float
    sets: list
    output: GridFunction
    measures: list
    seed: int
    n_samples: int


def _member_seed(master_seed: int, sets) -> int:
    material = json.dumps([s.to_dict() for s in sets], sort_keys=True)
    return derive_seed(master_seed, material)


def evaluate_member(
    op: OperatorSpec,
    sets,
    budget: McBudget,
    seed: int,
    kind: str = "",
    delta: float = 0.0,
) -> MemberEval:
    """Rasterize the sets, run the operator and record exact measures."""
    sets = list(sets)
    if len(sets) != op.n_inputs:
        raise ValueError(f"{op.describe()} needs {op.n_inputs} sets, got {len(sets)}")
    member_seed = _member_seed(seed, sets)
    grids = [rasterize(s, h=budget.h, align="cell") for s in sets]
    out = op.apply_grids(grids, budget, member_seed)
    return MemberEval(
        kind=kind,
        delta=delta,
        sets=sets,
        output=out,
        measures=[s.measure() for s in sets],
        seed=member_seed,
        n_samples=budget.n_samples,
    )


def ratio_from_member(member: MemberEval, e: ExponentTuple) -> McEstimate:
    """Restricted-type ratio ||op||_r / prod |E_i|^{1/p_i} for one member."""
    if any(m <= 0 for m in member.measures):
        raise UndefinedRatioError("restricted ratio against a zero-measure set")
    r = float(e.r)
    out = member.output
    denom = 1.0
    for meas, p in zip(member.measures, e.p):
        denom *= meas ** float(1 / Fraction(p)) if p != math.inf else 1.0
    value = lp_norm(out, r) / denom
    stderr = 0.0
    if getattr(out, "batch_values", None) is not None:
        nb = out.batch_values.shape[-1]
        if nb > 1:
            norms = [
                lp_norm(GridFunction(out.lo, out.h, out.batch_values[..., b]), r) / denom
                for b in range(nb)
            ]
            stderr = float(np.std(norms, ddof=1) / math.sqrt(nb))
    return McEstimate(
        value=float(value),
        stderr=stderr,
        n_samples=member.n_samples,
        seed={"seed": member.seed},
    )


def restricted_ratio(
    op: OperatorSpec, e: ExponentTuple, sets, budget: McBudget | None = None, seed: int = 0
) -> McEstimate:
    budget = budget or McBudget()
    member = evaluate_member(op, sets, budget, seed)
    return ratio_from_member(member, e)


def _fit_slope(deltas, ratios) -> tuple[float, float] | None:
    pts = [(d, r) for d, r in zip(deltas, ratios) if r > 0]
    if not pts:
        return None
    if len(pts) == 1 or len({p[0] for p in pts}) == 1:
        return (0.0, 0.0)  # constant family: flat by convention
    x = np.log([p[0] for p in pts])
    y = np.log([p[1] for p in pts])
    n = len(x)
    xbar = x.mean()
    sxx = float(np.sum((x - xbar) ** 2))
    if sxx == 0:
        return (0.0, 0.0)
    slope = float(np.sum((x - xbar) * (y - y.mean())) / sxx)
    resid = y - (y.mean() + slope * (x - xbar))
    if n > 2:
        se = math.sqrt(float(np.sum(resid ** 2)) / (n - 2) / sxx)
    else:
        se = 0.0
    return (slope, 2.0 * se)


@dataclass
class VerificationReport:
    """Harness output: per-member ratios, slopes and the pass/fail verdict."""

    operator: str
    exponents: ExponentTuple
    family: str
    entries: list  # dicts: kind, delta, ratio, stderr, member_seed
    max_ratio: float
    slopes: dict  # kind -> (slope, half_width)
    envelope_slope: tuple | None
    seed: int
    thresholds: dict
    verdict: bool

    def to_dict(self) -> dict:
        return {
            "operator": self.operator,
            "exponents": self.exponents.describe(),
            "family": self.family,
            "entries": self.entries,
            "max_ratio": self.max_ratio,
            "slopes": {k: list(v) for k, v in self.slopes.items()},
            "envelope_slope": list(self.envelope_slope) if self.envelope_slope else None,
            "seed": self.seed,
            "thresholds": self.thresholds,
            "verdict": "pass" if self.verdict else "fail",
        }

    def csv_rows(self) -> list[tuple]:
        return [(e["kind"], e["delta"], e["ratio"], e["stderr"]) for e in self.entries]


def verify_uniform_boundedness(
    op: OperatorSpec,
    e: ExponentTuple,
    families,
    budget: McBudget | None = None,
    seed: int = 0,
    *,
    slope_tol: float = 0.15,
    ratio_cap: float = 10.0,
    expect: str = "bounded",
    fail_slope: float = -0.5,
    member_evals: list | None = None,
) -> VerificationReport:
    """Evaluate a probe family (or list of families) and judge boundedness.

    For ``expect="bounded"`` the verdict requires a finite max ratio below
    ``ratio_cap``, an envelope slope within ``slope_tol`` of flat, and no
    per-kind ratio growth (slope >= -slope_tol); positive per-kind slopes
    (decaying ratios of non-extremal kinds) are consistent with boundedness
    and reported but not failed.  For ``expect="unbounded"`` the verdict
    requires envelope slope <= ``fail_slope``.

    Pass precomputed ``member_evals`` to reuse operator evaluations across
    exponent tuples.
    """
    budget = budget or McBudget()
    if isinstance(families, ShapeFamily):
        families = [families]
    if member_evals is None:
        member_evals = evaluate_families(op, families, budget, seed)
    if len(member_evals) < 5:
        raise ValueError("need at least 5 family members")

    entries = []
    for m in member_evals:
        est = ratio_from_member(m, e)
        if est.value > 0 and est.stderr > 0.2 * est.value:
            raise InsufficientBudgetError(
                f"ratio stderr {est.stderr:.3g} exceeds 20% of ratio {est.value:.3g} "
                f"for {m.kind} at delta={m.delta}"
            )
        entries.append(
            {
                "kind": m.kind,
                "delta": m.delta,
                "ratio": est.value,
                "stderr": est.stderr,
                "member_seed": m.seed,
            }
        )

    kinds = sorted({e_["kind"] for e_ in entries})
    slopes = {}
    for kind in kinds:
        sub = [e_ for e_ in entries if e_["kind"] == kind]
        fit = _fit_slope([s["delta"] for s in sub], [s["ratio"] for s in sub])
        if fit is not None:
            slopes[kind] = fit

    env = {}
    for e_ in entries:
        env[e_["delta"]] = max(env.get(e_["delta"], 0.0), e_["ratio"])
    envelope = _fit_slope(list(env.keys()), list(env.values()))

    max_ratio = max(e_["ratio"] for e_ in entries)
    if expect == "bounded":
        ok = max_ratio <= ratio_cap
        if envelope is None:
            ok = False
        else:
            ok = ok and abs(envelope[0]) <= slope_tol
        ok = ok and all(s[0] >= -slope_tol for s in slopes.values())
    elif expect == "unbounded":
        ok = envelope is not None and envelope[0] <= fail_slope
    else:
        raise ValueError(f"expect must be 'bounded' or 'unbounded', got {expect!r}")

    return VerificationReport(
        operator=op.describe(),
        exponents=e,
        family="+".join(f.name for f in families),
        entries=entries,
        max_ratio=max_ratio,
        slopes=slopes,
        envelope_slope=envelope,
        seed=seed,
        thresholds={
            "slope_tol": slope_tol,
            "ratio_cap": ratio_cap,
            "expect": expect,
            "fail_slope": fail_slope,
        },
        verdict=bool(ok),
    )


def evaluate_families(op: OperatorSpec, families, budget: McBudget, seed: int) -> list[MemberEval]:
    """Evaluate all members of the given families (cached by set content)."""
    evals = []
    cache = {}
    for fam in families:
        for delta in fam.deltas:
            sets = fam.sets_at(delta)
            key = json.dumps([s.to_dict() for s in sets], sort_keys=True)
            if key in cache:
                m = cache[key]
                evals.append(
                    MemberEval(fam.name, delta, sets, m.output, m.measures, m.seed, m.n_samples)
                )
                continue
            m = evaluate_member(op, sets, budget, seed, kind=fam.name, delta=delta)
            cache[key] = m
            evals.append(m)
    return evals
