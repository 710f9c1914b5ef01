"""Command-line orchestration: seeded experiments, CSV/JSON artifacts,
pass/fail exit codes.

Every run writes ``config.resolved.json``, ``report.json`` and ``data/*.csv``
into the output directory; the report embeds the config hash, backend and
seed so artifacts are reproducible byte for byte.  Exit codes: 0 when all
declared thresholds pass, 1 on a threshold failure, 2 on configuration or
runtime errors.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import math
import sys
import time
from fractions import Fraction
from pathlib import Path

import numpy as np

from . import geometry
from ._kernels import backend_name
from .gridfn import ExponentTuple, GridFunction, lp_norm, parse_exponent, rasterize
from .inequalities import (
    McBudget,
    OperatorSpec,
    STANDARD_FAMILY_KINDS,
    evaluate_families,
    make_family,
    region_polygon,
    t_l1_region_contains,
    verify_uniform_boundedness,
)
from .operators import (
    adjoint_residual_detail,
    cube_decomposition_bound,
    empirical_difference_histogram,
    l1_pairing_detail,
    majorization_pair,
    pushforward_gof,
    resolve_difference_support,
    simplex_average,
    PushforwardDensity,
)
from .random_inputs import random_bump_grid
from .rng import derive_seed, stream
from .shapes import ShapeSet

PASS, FAIL = "PASS", "FAIL"


def _print_check(label: str, ok: bool, detail: str = "") -> bool:
    line = f"{PASS if ok else FAIL}  {label}"
    if detail:
        line += f"  ({detail})"
    print(line)
    return ok


def _json_default(o):
    if isinstance(o, Fraction):
        return str(o)
    if isinstance(o, (np.floating, np.integer)):
        return o.item()
    if isinstance(o, np.ndarray):
        return o.tolist()
    raise TypeError(f"not serializable: {type(o)}")


def _write_outputs(outdir: Path, config: dict, report: dict, csvs: dict) -> None:
    outdir.mkdir(parents=True, exist_ok=True)
    (outdir / "data").mkdir(exist_ok=True)
    cfg_text = json.dumps(config, sort_keys=True, indent=2, default=_json_default)
    (outdir / "config.resolved.json").write_text(cfg_text + "\n")
    report = dict(report)
    report["config_sha256"] = hashlib.sha256(cfg_text.encode()).hexdigest()
    report["backend"] = backend_name()
    (outdir / "report.json").write_text(
        json.dumps(report, sort_keys=True, indent=2, default=_json_default) + "\n"
    )
    for name, (header, rows) in csvs.items():
        path = outdir / "data" / name
        with open(path, "w") as fh:
            fh.write(",".join(header) + "\n")
            for row in rows:
                fh.write(",".join(repr(v) if isinstance(v, float) else str(v) for v in row) + "\n")


def _parse_tuple(text: str) -> ExponentTuple:
    parts = [p.strip() for p in text.split(",")]
    if len(parts) < 2:
        raise ValueError(f"exponent tuple needs p_1..p_k,r, got {text!r}")
    return ExponentTuple(p=tuple(parts[:-1]), r=parts[-1])


def _parse_rational(text: str) -> float:
    return float(Fraction(text))


# -- subcommand implementations ----------------------------------------------


def cmd_haar_test(args) -> tuple[bool, dict, dict]:
    d, draws, seed = args.d, args.draws, args.seed
    rng = stream(seed, "haar-test")
    checks = []
    rows = []
    if d == 1:
        mats = geometry.sample_rotation_matrices(1, draws, rng, group="O")
        freq = float(np.mean(mats[:, 0, 0] > 0))
        ok = 0.47 <= freq <= 0.53
        checks.append(_print_check("O(1) sign frequency in [0.47, 0.53]", ok, f"freq={freq:.4f}"))
        rows.append(("sign_freq", freq, 0.5, 0.0))
        report = {"freq": freq}
    else:
        mats = geometry.sample_rotation_matrices(d, draws, rng, group=args.group)
        u = np.zeros(d)
        u[0] = 1.0
        img = mats @ u
        ortho = float(
            np.max(np.abs(np.einsum("nij,nik->njk", mats[:512], mats[:512]) - np.eye(d)))
        )
        checks.append(_print_check("orthogonality ||R'R - I|| < 1e-10", ortho < 1e-10, f"{ortho:.2e}"))
        mean = img.mean(axis=0)
        se_mean = math.sqrt(1.0 / d / draws)
        zm = float(np.max(np.abs(mean)) / se_mean)
        checks.append(_print_check("mean of R e1 within 3 sigma of 0", zm <= 3.0, f"max|z|={zm:.2f}"))
        cov = img.T @ img / draws
        var_diag = 3.0 / (d * (d + 2)) - 1.0 / d ** 2
        var_off = 1.0 / (d * (d + 2))
        zc = 0.0
        for i in range(d):
            for j in range(d):
                target = 1.0 / d if i == j else 0.0
                se = math.sqrt((var_diag if i == j else var_off) / draws)
                zc = max(zc, abs(cov[i, j] - target) / se)
                rows.append((f"cov_{i}{j}", float(cov[i, j]), target, se))
        checks.append(_print_check("covariance of R e1 within 3 sigma of I/d", zc <= 3.0, f"max|z|={zc:.2f}"))
        report = {"max_mean_z": zm, "max_cov_z": zc, "orthogonality": ortho}
    ok = all(checks)
    return ok, report, {"moments.csv": (("stat", "value", "target", "stderr"), rows)}


def cmd_simplex_check(args) -> tuple[bool, dict, dict]:
    rows = []
    worst = 0.0
    for d in range(1, args.dmax + 1):
        for k in range(1, d + 1):
            cfg = geometry.regular_simplex_vertices(d, k)
            v = cfg.vertices
            gram = v @ v.T
            target = np.full((k, k), 0.5) + 0.5 * np.eye(k)
            resid = float(np.max(np.abs(gram - target)))
            worst = max(worst, resid)
            rows.append((d, k, resid))
    ok = _print_check(f"Gram residuals < 1e-12 for all 1 <= k <= d <= {args.dmax}", worst < 1e-12, f"worst={worst:.2e}")
    return ok, {"worst_gram_residual": worst}, {"gram.csv": (("d", "k", "residual"), rows)}


def cmd_pushforward_check(args) -> tuple[bool, dict, dict]:
    t0 = time.time()
    hist = empirical_difference_histogram(args.d, args.samples, args.bins, args.seed)
    gof = pushforward_gof(hist)
    resolution = resolve_difference_support(hist)
    runtime = time.time() - t0
    dens = PushforwardDensity(args.d)
    p_model = np.diff(dens.radial_cdf(hist.edges))
    rows = [
        (float(hist.edges[i]), float(hist.edges[i + 1]), int(hist.counts[i]),
         float(hist.counts[i] / hist.n_samples), float(p_model[i]))
        for i in range(len(hist.counts))
    ]
    checks = [
        _print_check("all mass within the confirmed support [0, sqrt(2)]",
                     hist.n_beyond_support == 0, f"max={hist.max_observed:.6f}"),
        _print_check("chi-square p-value > 0.001", gof["p_value"] > 0.001, f"p={gof['p_value']:.4f}"),
        _print_check("sup bin-probability deviation < 0.01",
                     gof["sup_prob_deviation"] < 0.01, f"dev={gof['sup_prob_deviation']:.5f}"),
    ]
    report = {
        "gof": gof,
        "support_resolution": resolution,
        "runtime_s": runtime,
        "n_samples": args.samples,
        "seed": args.seed,
    }
    return all(checks), report, {"bins.csv": (("r_lo", "r_hi", "count", "p_emp", "p_model"), rows)}


def cmd_l1_identity(args) -> tuple[bool, dict, dict]:
    d, h = args.d, _parse_rational(args.h)
    # both sides of the identity must see the same discrete object, so the
    # indicators are used as plain grids (no analytic-membership shortcut)
    E = rasterize(ShapeSet.ball(np.zeros(d), args.r1), h=h)
    F = rasterize(ShapeSet.ball(np.zeros(d), args.r2), h=h)
    E = GridFunction(E.lo, E.h, E.values)
    F = GridFunction(F.lo, F.h, F.values)
    simplex = geometry.regular_simplex_vertices(d, 2)
    out = simplex_average(simplex, [E, F], args.samples, args.seed, workers=args.workers)
    vol = out.cell_volume
    norm1 = float(out.values.sum() * vol)
    norm1_se = float(np.sqrt(np.sum((out.stderr * vol) ** 2)))
    pairing = l1_pairing_detail(E, F, args.samples, derive_seed(args.seed, "pairing"), workers=args.workers)
    combined = math.hypot(norm1_se, pairing.stderr)
    target = math.pi if d == 2 and args.r1 == 1.0 else None
    checks = [
        _print_check(
            "||T(1_E,1_F)||_1 agrees with <1_E, S(1_F)> within 3 stderr",
            abs(norm1 - pairing.value) <= 3 * combined,
            f"|{norm1:.5f} - {pairing.value:.5f}| vs 3x{combined:.2e}",
        )
    ]
    if target is not None:
        checks.append(
            _print_check("pairing equals pi within 2%", abs(pairing.value - target) <= 0.02 * target,
                         f"{pairing.value:.5f} vs {target:.5f}")
        )
    report = {
        "norm1": norm1, "norm1_stderr": norm1_se,
        "pairing": pairing.value, "pairing_stderr": pairing.stderr,
    }
    rows = [("norm1", norm1, norm1_se), ("pairing", pairing.value, pairing.stderr)]
    return all(checks), report, {"l1.csv": (("quantity", "value", "stderr"), rows)}


def cmd_majorize_check(args) -> tuple[bool, dict, dict]:
    d, k, m = args.d, args.k, args.m
    simplex = geometry.regular_simplex_vertices(d, k)
    rng = stream(args.seed, "majorize-inputs")
    rows = []
    violations = 0
    worst_margin = math.inf
    for trial in range(args.count):
        fs = [random_bump_grid(rng, d=d, h=args.grid_h) for _ in range(k)]
        xs = rng.uniform(-1.2, 1.2, size=(args.points, d))
        for j, x in enumerate(xs):
            lhs, rhs = majorization_pair(m, simplex, fs, x, args.samples, args.seed, index=trial * args.points + j)
            margin = rhs.value + 3 * rhs.stderr - lhs.value
            worst_margin = min(worst_margin, margin)
            if lhs.value > rhs.value + 3 * rhs.stderr:
                violations += 1
            rows.append((trial, j, lhs.value, rhs.value, rhs.stderr))
    ok1 = _print_check(
        f"pointwise majorization (m={m}): lhs <= rhs + 3 stderr at all {args.count * args.points} points",
        violations == 0, f"violations={violations}")

    # stability of the empirical sup ratio under a quadrupled budget
    fs = [random_bump_grid(rng, d=d, h=args.grid_h) for _ in range(k)]
    xs = rng.uniform(-1.2, 1.2, size=(args.points, d))
    sups = []
    for ns in (args.samples, 4 * args.samples):
        ratios = []
        for j, x in enumerate(xs):
            lhs, rhs = majorization_pair(m, simplex, fs, x, ns, derive_seed(args.seed, f"stab{ns}"), index=j)
            if rhs.value > 0:
                ratios.append(lhs.value / rhs.value)
        sups.append(max(ratios))
    rel_change = abs(sups[0] - sups[1]) / sups[1]
    ok2 = _print_check("sup lhs/rhs stable under 4x budget (<10%)", rel_change < 0.10,
                       f"sup={sups[0]:.4f} -> {sups[1]:.4f}, change={rel_change:.2%}")
    report = {"violations": violations, "worst_margin": worst_margin,
              "sup_ratio": sups[0], "sup_ratio_4x": sups[1], "rel_change": rel_change}
    return ok1 and ok2, report, {"majorize.csv": (("trial", "point", "lhs", "rhs", "rhs_stderr"), rows)}


def cmd_region(args) -> tuple[bool, dict, dict]:
    poly = region_polygon(args.d)
    rows = [(str(x), str(y)) for x, y in poly + [poly[0]]]
    report = {"polygon": [[str(x), str(y)] for x, y in poly]}
    if args.point:
        x, y = (s.strip() for s in args.point.split(","))
        inside = t_l1_region_contains(args.d, (x, y))
        print("inside" if inside else "outside")
        report["point"] = [x, y]
        report["inside"] = inside
    return True, report, {"region_polygon.csv": (("x", "y"), rows)}


def cmd_verify_ratios(args) -> tuple[bool, dict, dict]:
    op = OperatorSpec.from_string(args.op, args.d, args.group)
    lo, hi, count = (s.strip() for s in args.deltas.split(","))
    deltas = np.geomspace(float(Fraction(lo)), float(Fraction(hi)), int(count))
    kinds = list(STANDARD_FAMILY_KINDS) if args.family == "standard" else [args.family]
    families = [make_family(op, kind, deltas) for kind in kinds]
    budget = McBudget(h=_parse_rational(args.h), n_samples=args.samples,
                      n_batches=args.batches, workers=args.workers)
    t0 = time.time()
    members = evaluate_families(op, families, budget, args.seed)
    tuples = [_parse_tuple(t) for t in args.exponents]
    all_ok = True
    reports = []
    csvs = {}
    for i, e in enumerate(tuples):
        rep = verify_uniform_boundedness(
            op, e, families, budget, args.seed,
            slope_tol=args.slope_tol, ratio_cap=args.ratio_cap,
            expect=args.expect, fail_slope=args.fail_slope,
            member_evals=members,
        )
        env = rep.envelope_slope
        detail = f"max_ratio={rep.max_ratio:.3f}, envelope_slope={env[0]:+.3f}" if env else "no ratios"
        all_ok &= _print_check(f"{op.describe()} {e.describe()} [{args.expect}]", rep.verdict, detail)
        reports.append(rep.to_dict())
        csvs[f"ratios_{i}.csv"] = (("kind", "delta", "ratio", "stderr"), rep.csv_rows())
    report = {"reports": reports, "runtime_s": time.time() - t0, "n_members": len(members)}
    return all_ok, report, csvs


def cmd_cube_bound(args) -> tuple[bool, dict, dict]:
    d, k = args.d, args.k
    e = _parse_tuple(args.exponents)
    s = float(Fraction(args.s)) if args.s else float(e.r)
    simplex = geometry.regular_simplex_vertices(d, k)
    rng = stream(args.seed, "cube-bound-inputs")
    h = _parse_rational(args.h)
    rows = []
    ratios = []
    for trial in range(args.pairs):
        fs = [random_bump_grid(rng, d=d, lo=-2.0, hi=2.0, h=h) for _ in range(k)]
        out = simplex_average(simplex, fs, args.samples, derive_seed(args.seed, f"pair{trial}"),
                              workers=args.workers)
        lhs = lp_norm(out, s)
        bound = cube_decomposition_bound(fs, e, s=s, N=args.N)
        ratios.append(lhs / bound)
        rows.append((trial, lhs, bound, lhs / bound))
    c_fit = max(ratios[: args.fit])
    violations = [i for i, r in enumerate(ratios[args.fit :], start=args.fit) if r > 1.05 * c_fit]
    ok = _print_check(
        f"one constant C fitted on {args.fit} pairs bounds the remaining {args.pairs - args.fit} (<=5% slack)",
        not violations,
        f"C={c_fit:.4f}, violations={violations}")
    report = {"C": c_fit, "ratios": ratios, "violations": violations}
    return ok, report, {"cube_bound.csv": (("trial", "lhs", "bound", "ratio"), rows)}


def cmd_adjoint_check(args) -> tuple[bool, dict, dict]:
    rng = stream(args.seed, "adjoint-inputs")
    h = _parse_rational(args.h)
    rows = []
    worst = 0.0
    failures = 0
    for trial in range(args.count):
        f, g, w = (random_bump_grid(rng, d=args.d, h=h) for _ in range(3))
        chk = adjoint_residual_detail(f, g, w, args.samples, derive_seed(args.seed, f"triple{trial}"),
                                      workers=args.workers)
        z = chk.residual / chk.stderr if chk.stderr > 0 else 0.0
        worst = max(worst, z)
        if chk.residual > 3 * chk.stderr:
            failures += 1
        rows.append((trial, chk.lhs, chk.rhs, chk.residual, chk.stderr, z))
    ok = _print_check(f"adjoint identity residual < 3 stderr in all {args.count} trials",
                      failures == 0, f"worst z={worst:.2f}")
    return ok, {"failures": failures, "worst_z": worst}, {
        "adjoint.csv": (("trial", "lhs", "rhs", "residual", "stderr", "z"), rows)}


def cmd_frames_check(args) -> tuple[bool, dict, dict]:
    dims = [int(s) for s in args.dims.split(",")]
    rows = []
    ok = True
    report = {}
    for d in dims:
        simplex = geometry.regular_simplex_vertices(d, d)
        rng = stream(args.seed, f"frames-d{d}")
        min_sv = math.inf
        order_ok = True
        degenerate = 0
        for trial in range(args.count):
            mats = geometry.sample_rotation_matrices(d, d, rng)
            try:
                idx = geometry.select_independent_frames(list(mats), simplex)
            except geometry.DegenerateConfigurationError:
                degenerate += 1
                continue
            if any(m > i + 1 for i, m in enumerate(idx)):
                order_ok = False
            sv = geometry.frame_min_singular_value(list(mats), simplex, idx)
            min_sv = min(min_sv, sv)
        rows.append((d, args.count, min_sv, degenerate))
        ok &= _print_check(
            f"d=k={d}: m_i <= i, min singular value > 1e-6, no degeneracy over {args.count} tuples",
            order_ok and min_sv > 1e-6 and degenerate == 0,
            f"min_sv={min_sv:.3e}")
        report[f"d{d}"] = {"min_sv": min_sv, "degenerate": degenerate}
    return ok, report, {"frames.csv": (("d", "count", "min_sv", "degenerate"), rows)}


def cmd_estimate_norm(args) -> tuple[bool, dict, dict]:
    from .extremizer import estimate_norm

    op = OperatorSpec.from_string(args.op, args.d, args.group)
    e = _parse_tuple(args.exponents)
    h = _parse_rational(args.h)
    grid = {"lo": [-2.0] * args.d, "hi": [2.0] * args.d, "h": h}
    budget = McBudget(h=h, n_samples=args.samples, n_batches=1, workers=args.workers)
    est = estimate_norm(op, e, grid, iterations=args.iterations, restarts=args.restarts,
                        seed=args.seed, budget=budget)
    ok = True
    if args.expect is not None:
        ok = abs(est.lower_bound - args.expect) <= args.rtol * args.expect
        _print_check(f"norm estimate within {args.rtol:.0%} of {args.expect}", ok,
                     f"estimate={est.lower_bound:.4f}")
    else:
        print(f"lower bound: {est.lower_bound:.6f}")
    rows = [(i, v) for i, v in enumerate(est.history)]
    return ok, est.to_dict(), {"history.csv": (("iteration", "objective"), rows)}


# -- parser -------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="simplexavg", description=__doc__)
    sub = ap.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("--seed", type=int, default=0)
        p.add_argument("--workers", type=int, default=None)
        p.add_argument("--outdir", default=None, help="output directory (default ./simplexavg-out/<command>)")
        p.add_argument("--config", default=None, help="JSON config file; CLI flags override its keys")

    p = sub.add_parser("haar-test", help="rotation sampler moment tests")
    common(p)
    p.add_argument("--d", type=int, default=3)
    p.add_argument("--draws", type=int, default=100_000)
    p.add_argument("--group", default="O", choices=["O", "SO"])
    p.set_defaults(fn=cmd_haar_test)

    p = sub.add_parser("simplex-check", help="regular simplex Gram residuals")
    common(p)
    p.add_argument("--dmax", type=int, default=8)
    p.set_defaults(fn=cmd_simplex_check)

    p = sub.add_parser("pushforward-check", help="difference-map density vs histogram oracle")
    common(p)
    p.add_argument("--d", type=int, default=2)
    p.add_argument("--samples", type=int, default=1_000_000)
    p.add_argument("--bins", type=int, default=40)
    p.set_defaults(fn=cmd_pushforward_check)

    p = sub.add_parser("l1-identity", help="L1 duality pairing for the triangle average")
    common(p)
    p.add_argument("--d", type=int, default=2)
    p.add_argument("--h", default="1/64")
    p.add_argument("--samples", type=int, default=4096)
    p.add_argument("--r1", type=float, default=1.0)
    p.add_argument("--r2", type=float, default=3.0)
    p.set_defaults(fn=cmd_l1_identity)

    p = sub.add_parser("majorize-check", help="pointwise majorization and sup-ratio stability")
    common(p)
    p.add_argument("--d", type=int, default=2)
    p.add_argument("--k", type=int, default=2)
    p.add_argument("--m", type=int, default=2)
    p.add_argument("--count", type=int, default=10)
    p.add_argument("--points", type=int, default=10)
    p.add_argument("--samples", type=int, default=1024)
    p.add_argument("--grid-h", type=float, default=1 / 32)
    p.set_defaults(fn=cmd_majorize_check)

    p = sub.add_parser("region", help="exact membership in the L1-target region")
    common(p)
    p.add_argument("--d", type=int, default=2)
    p.add_argument("--point", default=None, help="rational pair, e.g. 2/3,2/3")
    p.set_defaults(fn=cmd_region)

    p = sub.add_parser("verify-ratios", help="restricted strong-type ratio harness")
    common(p)
    p.add_argument("--op", default="T")
    p.add_argument("--d", type=int, default=2)
    p.add_argument("--group", default="O", choices=["O", "SO"])
    p.add_argument("--exponents", action="append", required=True,
                   help="p_1,..,p_k,r as exact rationals; repeatable")
    p.add_argument("--family", default="standard",
                   choices=["standard", "vertex-balls", "twin-balls", "annuli", "slabs", "knapp"])
    p.add_argument("--deltas", default="0.02,1.0,8", help="min,max,count (log-spaced)")
    p.add_argument("--h", default="1/64")
    p.add_argument("--samples", type=int, default=4096)
    p.add_argument("--batches", type=int, default=4)
    p.add_argument("--expect", default="bounded", choices=["bounded", "unbounded"])
    p.add_argument("--slope-tol", type=float, default=0.15)
    p.add_argument("--ratio-cap", type=float, default=10.0)
    p.add_argument("--fail-slope", type=float, default=-0.5)
    p.set_defaults(fn=cmd_verify_ratios)

    p = sub.add_parser("cube-bound", help="unit-cube decomposition bound vs measured quasi-norm")
    common(p)
    p.add_argument("--d", type=int, default=2)
    p.add_argument("--k", type=int, default=2)
    p.add_argument("--exponents", default="3/2,3/2,3/4")
    p.add_argument("--s", default=None)
    p.add_argument("--pairs", type=int, default=20)
    p.add_argument("--fit", type=int, default=5)
    p.add_argument("--N", type=int, default=2)
    p.add_argument("--h", default="1/32")
    p.add_argument("--samples", type=int, default=1024)
    p.set_defaults(fn=cmd_cube_bound)

    p = sub.add_parser("adjoint-check", help="adjoint identity residuals")
    common(p)
    p.add_argument("--d", type=int, default=2)
    p.add_argument("--count", type=int, default=50)
    p.add_argument("--samples", type=int, default=512)
    p.add_argument("--h", default="1/32")
    p.set_defaults(fn=cmd_adjoint_check)

    p = sub.add_parser("frames-check", help="frame-selection soundness sweep")
    common(p)
    p.add_argument("--dims", default="2,3")
    p.add_argument("--count", type=int, default=1000)
    p.set_defaults(fn=cmd_frames_check)

    p = sub.add_parser("estimate-norm", help="operator norm lower bound by ascent")
    common(p)
    p.add_argument("--op", default="S1")
    p.add_argument("--d", type=int, default=2)
    p.add_argument("--group", default="O", choices=["O", "SO"])
    p.add_argument("--exponents", default="1,1")
    p.add_argument("--iterations", type=int, default=20)
    p.add_argument("--restarts", type=int, default=3)
    p.add_argument("--samples", type=int, default=512)
    p.add_argument("--h", default="1/16")
    p.add_argument("--expect", type=float, default=None)
    p.add_argument("--rtol", type=float, default=0.02)
    p.set_defaults(fn=cmd_estimate_norm)

    return ap


def main(argv=None) -> int:
    ap = build_parser()
    try:
        args = ap.parse_args(argv)
    except SystemExit as exc:
        return 2 if exc.code not in (0, None) else 0
    try:
        if args.config:
            file_cfg = json.loads(Path(args.config).read_text())
            defaults = {k: v for k, v in file_cfg.items() if hasattr(args, k)}
            explicit = {
                a.split("=")[0].lstrip("-").replace("-", "_")
                for a in (argv if argv is not None else sys.argv[1:])
                if a.startswith("--")
            }
            for k, v in defaults.items():
                if k not in explicit:
                    setattr(args, k, v)
        config = {k: v for k, v in vars(args).items() if k not in ("fn", "outdir", "config")}
        t0 = time.time()
        ok, report, csvs = args.fn(args)
        report = {
            "command": args.command,
            "pass": bool(ok),
            "seed": getattr(args, "seed", None),
            "runtime_s": time.time() - t0,
            **report,
        }
        outdir = Path(args.outdir) if args.outdir else Path("simplexavg-out") / args.command
        _write_outputs(outdir, config, report, csvs)
        return 0 if ok else 1
    except (ValueError, KeyError, OSError, RuntimeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
