import math
from fractions import Fraction

import numpy as np
import pytest

from simplexavg.gridfn import ExponentTuple, GridFunction, holder_consistent
from simplexavg.inequalities import (
    InsufficientBudgetError,
    McBudget,
    MemberEval,
    OperatorSpec,
    ShapeFamily,
    UndefinedRatioError,
    clm_exponents,
    evaluate_families,
    improving_triples_T,
    lower_dim_exponents,
    make_family,
    ratio_from_member,
    region_polygon,
    restricted_ratio,
    t_l1_region_contains,
    verify_uniform_boundedness,
)
from simplexavg.shapes import ShapeSet


class TestRegion:
    def test_hull_vertex_inside(self):
        assert t_l1_region_contains(2, ("2/3", "2/3"))

    def test_midpoint_of_banach_edge_inside(self):
        assert t_l1_region_contains(2, ("1/2", "1/2"))

    def test_origin_outside(self):
        assert not t_l1_region_contains(2, (0, 0))

    def test_epsilon_past_vertex_outside(self):
        for d in (2, 3, 5):
            c = Fraction(d, d + 1)
            eps = Fraction(1, 1000)
            assert t_l1_region_contains(d, (c, c))
            assert not t_l1_region_contains(d, (c + eps, c + eps))

    def test_symmetry(self):
        pts = [("1/3", "2/3"), ("1/5", "4/5"), ("3/4", "1/2"), ("9/10", "1/10")]
        for d in (2, 3):
            for x, y in pts:
                assert t_l1_region_contains(d, (x, y)) == t_l1_region_contains(d, (y, x))

    def test_corners(self):
        assert t_l1_region_contains(2, (0, 1))
        assert t_l1_region_contains(2, (1, 0))

    def test_polygon(self):
        poly = region_polygon(2)
        assert poly == [
            (Fraction(0), Fraction(1)),
            (Fraction(2, 3), Fraction(2, 3)),
            (Fraction(1), Fraction(0)),
        ]


class TestExponentCalculators:
    def test_clm_m2_k2_diagonal(self):
        tuples = clm_exponents(2, 2, 4)
        diag = [t for t in tuples if t.label == "majorization-diagonal"][0]
        assert diag.p == (Fraction(2), Fraction(2)) and diag.r == Fraction(1)
        assert holder_consistent(diag)

    def test_clm_m2_k2_d4_improving(self):
        tuples = clm_exponents(2, 2, 4)
        imp = [t for t in tuples if t.label == "majorization-improving"]
        assert any(t.p == (Fraction(5, 2), Fraction(5, 2)) and t.r == Fraction(5) for t in imp)
        assert all(not holder_consistent(t) and t.is_improving() for t in imp)

    def test_clm_permutation_closure(self):
        tuples = clm_exponents(2, 3, 6)
        imp = {t.p for t in tuples if t.label == "majorization-improving"}
        for p in list(imp):
            assert tuple(reversed(p)) in imp

    def test_clm_hypothesis_violation(self):
        with pytest.raises(ValueError):
            clm_exponents(2, 2, 3)
        with pytest.raises(ValueError):
            clm_exponents(1, 2, 10)

    def test_lower_dim_k2_d2(self):
        tuples = lower_dim_exponents(2, 2)
        labels = {t.label: t for t in tuples}
        assert labels["restricted-diagonal"].p == (Fraction(2), Fraction(2))
        assert labels["restricted-diagonal"].r == Fraction(2)
        imp = labels["restricted-improving"]
        assert imp.p == (Fraction(3), Fraction(3)) and imp.r == Fraction(3)
        end = labels["holder-diagonal-endpoint"]
        assert end.p == (Fraction(3, 2), Fraction(3, 2)) and end.r == Fraction(3, 4)
        assert holder_consistent(end)

    def test_lower_dim_k3_d3(self):
        tuples = lower_dim_exponents(3, 3)
        diag = [t for t in tuples if t.label == "restricted-diagonal"][0]
        assert diag.p == (Fraction(3),) * 3 and diag.r == Fraction(3)

    def test_lower_dim_quasi_vertices(self):
        tuples = lower_dim_exponents(2, 2)
        verts = [t for t in tuples if t.label == "quasi-banach-vertex"]
        assert all(t.r == Fraction(3, 4) for t in verts)
        assert all(holder_consistent(t) for t in verts)

    def test_lower_dim_dimension_error(self):
        with pytest.raises(ValueError):
            lower_dim_exponents(3, 2)

    def test_improving_triples_d2(self):
        triples = improving_triples_T(2)
        assert (Fraction(2, 3), Fraction(1, 3), Fraction(2, 3)) in triples
        assert (Fraction(1, 3), Fraction(2, 3), Fraction(2, 3)) in triples
        for a, b, r in triples:
            assert r < a + b  # improving: 1/r < 1/p + 1/q
        assert triples[0][:2] == triples[1][:2][::-1]


class TestOperatorSpec:
    def test_from_string(self):
        assert OperatorSpec.from_string("S1", 3).k == 1
        assert OperatorSpec.from_string("T", 2).k == 2
        assert OperatorSpec.from_string("S3", 4).k == 3
        assert OperatorSpec.from_string("B", 2).kind == "B"
        with pytest.raises(ValueError):
            OperatorSpec.from_string("Q", 2)

    def test_probe_anchors(self):
        op = OperatorSpec.from_string("T", 2)
        anchors = op.probe_anchors()
        assert np.allclose(np.linalg.norm(anchors, axis=1), 1.0)
        assert np.allclose(np.linalg.norm(anchors[0] - anchors[1]), 1.0)
        opb = OperatorSpec.from_string("B", 2)
        assert np.allclose(np.linalg.norm(opb.probe_anchors(), axis=1), 1 / math.sqrt(2))


class TestRestrictedRatio:
    def test_s1_interior_saturation(self):
        # S(1_E) = 1 on |x| <= 9 for E = B(0, 10), so the ratio against
        # |E|^{d/(d+1)} is finite and modest
        op = OperatorSpec.from_string("S1", 2)
        e = ExponentTuple(p=("3/2",), r=3)
        sets = [ShapeSet.ball([0.0, 0.0], 10.0)]
        est = restricted_ratio(op, e, sets, McBudget(h=1 / 8, n_samples=128, n_batches=4), seed=0)
        assert 0 < est.value < 10

    def test_t_unit_balls(self):
        op = OperatorSpec.from_string("T", 2)
        e = ExponentTuple(p=(2, 2), r=2)
        sets = [ShapeSet.ball([0.0, 0.0], 1.0)] * 2
        est = restricted_ratio(op, e, sets, McBudget(h=1 / 32, n_samples=512, n_batches=4), seed=0)
        assert 0 < est.value < 10

    def test_far_apart_sets_zero(self):
        op = OperatorSpec.from_string("T", 2)
        e = ExponentTuple(p=(2, 2), r=2)
        sets = [ShapeSet.ball([-3.0, 0.0], 0.3), ShapeSet.ball([3.0, 0.0], 0.3)]
        est = restricted_ratio(op, e, sets, McBudget(h=1 / 16, n_samples=64, n_batches=4), seed=0)
        assert est.value == 0.0

    def test_zero_measure_rejected(self):
        op = OperatorSpec.from_string("T", 2)
        e = ExponentTuple(p=(2, 2), r=2)
        ball = ShapeSet.ball([0.0, 0.0], 0.5)
        degenerate = ShapeSet.difference_of(ball, ball)
        with pytest.raises(UndefinedRatioError):
            restricted_ratio(op, e, [ball, degenerate], McBudget(h=1 / 8, n_samples=32, n_batches=4), 0)

    def test_translation_invariance_same_seed_material(self):
        op = OperatorSpec.from_string("T", 2)
        e = ExponentTuple(p=(2, 2), r=2)
        budget = McBudget(h=1 / 16, n_samples=256, n_batches=4)
        base = [ShapeSet.ball([1.0, 0.0], 0.4), ShapeSet.ball([0.5, math.sqrt(3) / 2], 0.4)]
        t = np.array([2.0, 1.0])
        shifted = [ShapeSet.ball([3.0, 1.0], 0.4), ShapeSet.ball([2.5, 1.0 + math.sqrt(3) / 2], 0.4)]
        r1 = restricted_ratio(op, e, base, budget, seed=0)
        r2 = restricted_ratio(op, e, shifted, budget, seed=0)
        # same geometry, so the ratios agree within Monte Carlo noise
        comb = math.hypot(r1.stderr, r2.stderr)
        assert abs(r1.value - r2.value) <= 3 * comb + 5e-3


class TestFamilies:
    def test_family_kinds(self):
        op = OperatorSpec.from_string("T", 2)
        deltas = [0.1, 0.2]
        for kind in ("vertex-balls", "annuli", "slabs", "knapp"):
            fam = make_family(op, kind, deltas)
            sets = fam.sets_at(0.1)
            assert len(sets) == 2
            assert all(s.measure() > 0 for s in sets)

    def test_twin_balls_distance_one(self):
        op = OperatorSpec.from_string("T", 2)
        fam = make_family(op, "twin-balls", [0.05])
        a, b = fam.sets_at(0.05)
        ca, cb = np.array(a.params["center"]), np.array(b.params["center"])
        assert np.linalg.norm(ca - cb) == pytest.approx(1.0)

    def test_unknown_kind(self):
        op = OperatorSpec.from_string("T", 2)
        with pytest.raises(ValueError):
            make_family(op, "wedges", [0.1]).sets_at(0.1)


class TestHarness:
    def test_repeated_set_family_slope_exactly_zero(self):
        op = OperatorSpec.from_string("S1", 2)
        e = ExponentTuple(p=(2,), r=2)
        fam = ShapeFamily(name="vertex-balls", deltas=(0.3,) * 6, op=op)
        budget = McBudget(h=1 / 16, n_samples=128, n_batches=4)
        rep = verify_uniform_boundedness(op, e, fam, budget, seed=3)
        # identical sets get content-derived seeds, hence identical ratios
        assert rep.slopes["vertex-balls"][0] == 0.0
        assert rep.envelope_slope[0] == 0.0

    def test_insufficient_budget_detected(self):
        op = OperatorSpec.from_string("S1", 2)
        e = ExponentTuple(p=(2,), r=2)
        out = GridFunction(np.zeros(2), np.full(2, 0.5), np.full((4, 4), 0.25))
        out.batch_values = np.stack(
            [np.full((4, 4), v) for v in (0.02, 0.9, 0.01, 0.6)], axis=-1
        )
        member = MemberEval("vertex-balls", 0.1, [ShapeSet.ball([0.0, 0.0], 0.1)], out, [0.03], 7, 64)
        with pytest.raises(InsufficientBudgetError):
            verify_uniform_boundedness(op, e, [], member_evals=[member] * 5, seed=0)

    def test_unbounded_detection_twin_balls(self):
        # (1,1;1) on twin balls: ratio grows like 1/delta
        op = OperatorSpec.from_string("T", 2)
        e = ExponentTuple(p=(1, 1), r=1)
        fam = make_family(op, "twin-balls", np.geomspace(0.05, 0.2, 5))
        budget = McBudget(h=1 / 32, n_samples=2048, n_batches=4)
        rep = verify_uniform_boundedness(op, e, fam, budget, seed=4, expect="unbounded", fail_slope=-0.5)
        assert rep.verdict
        assert rep.envelope_slope[0] < -0.5

    def test_report_serialization(self):
        op = OperatorSpec.from_string("S1", 2)
        e = ExponentTuple(p=(2,), r=2)
        fam = make_family(op, "vertex-balls", [0.1, 0.2, 0.3, 0.4, 0.5])
        budget = McBudget(h=1 / 16, n_samples=256, n_batches=4)
        rep = verify_uniform_boundedness(op, e, fam, budget, seed=5)
        d = rep.to_dict()
        assert d["verdict"] in ("pass", "fail")
        assert len(rep.csv_rows()) == 5

    def test_member_eval_reuse_across_tuples(self):
        op = OperatorSpec.from_string("T", 2)
        fam = make_family(op, "annuli", np.geomspace(0.1, 0.6, 5))
        budget = McBudget(h=1 / 16, n_samples=512, n_batches=4)
        members = evaluate_families(op, [fam], budget, seed=6)
        e1 = ExponentTuple(p=(2, 2), r=2)
        e2 = ExponentTuple(p=(3, 3), r=3)
        r1 = verify_uniform_boundedness(op, e1, [fam], budget, seed=6, member_evals=members)
        r2 = verify_uniform_boundedness(op, e2, [fam], budget, seed=6, member_evals=members)
        assert r1.entries[0]["member_seed"] == r2.entries[0]["member_seed"]
