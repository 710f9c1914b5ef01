"""Backend equivalence: the compiled core and the numpy fallback must agree."""

import numpy as np
import pytest

import simplexavg._kernels as kernels
from simplexavg._kernels import FieldSpec, _ref
from simplexavg._mc import draw_rotation2_trig, _offsets_from_trig
from simplexavg.geometry import regular_simplex_vertices
from simplexavg.gridfn import GridFunction, rasterize
from simplexavg.shapes import ShapeSet
from simplexavg.rng import stream

core = pytest.importorskip("simplexavg._kernels._core")


def shape_field():
    s = ShapeSet.difference_of(
        ShapeSet.union_of([ShapeSet.ball([0.0, 0.0], 1.0), ShapeSet.cap([1.0, 0.0], 0.8, 1.2, 0.3)]),
        ShapeSet.slab(0, [0.0, 0.0], 0.2, 3.0),
    )
    return FieldSpec.from_shape(s)


def grid_field(seed=0):
    base = rasterize(ShapeSet.ball([0.0, 0.0], 1.5), h=1 / 16)
    vals = stream(seed, "kernel-grid").random(base.values.shape)
    return FieldSpec.from_gridfunction(GridFunction(base.lo, base.h, vals))


def test_membership_identical():
    f = shape_field()
    pts = stream(1, "kpts").uniform(-2, 2, size=(50_000, 2))
    np.testing.assert_array_equal(_ref.eval_points(f, pts), core.eval_points(f, np.ascontiguousarray(pts)))


def test_interpolation_close():
    f = grid_field()
    pts = stream(2, "kpts2").uniform(-2, 2, size=(50_000, 2))
    a = _ref.eval_points(f, pts)
    b = core.eval_points(f, np.ascontiguousarray(pts))
    np.testing.assert_allclose(a, b, atol=1e-13)


def test_interpolation_exact_at_centers():
    base = rasterize(ShapeSet.ball([0.0, 0.0], 1.0), h=1 / 8)
    vals = stream(3, "kgrid3").random(base.values.shape)
    g = GridFunction(base.lo, base.h, vals)
    f = FieldSpec.from_gridfunction(g)
    centers = g.centers()
    np.testing.assert_allclose(_ref.eval_points(f, centers), vals.ravel(), atol=1e-14)
    np.testing.assert_allclose(
        core.eval_points(f, np.ascontiguousarray(centers)), vals.ravel(), atol=1e-14
    )


def test_interpolation_zero_outside():
    f = grid_field()
    far = np.array([[10.0, 10.0], [-10.0, 0.0]])
    assert np.all(_ref.eval_points(f, far) == 0)
    assert np.all(core.eval_points(f, far) == 0)


def test_product_reduce_agreement():
    fields = [shape_field(), grid_field()]
    rng = stream(4, "kred")
    x = rng.uniform(-1, 1, size=(40, 2))
    offsets = rng.uniform(-1, 1, size=(40, 128, 2, 2))
    s_ref, q_ref = _ref.product_reduce(fields, x, offsets, 4)
    s_core, q_core = core.product_reduce(fields, np.ascontiguousarray(x), np.ascontiguousarray(offsets), 4)
    np.testing.assert_allclose(s_ref, s_core, rtol=1e-12, atol=1e-12)
    np.testing.assert_allclose(q_ref, q_core, rtol=1e-12, atol=1e-12)


def test_rotation2_matches_generic_offsets():
    # the fast path must agree with building offsets and reducing generically
    fields = [shape_field(), grid_field()]
    verts = regular_simplex_vertices(2, 2).vertices
    rng = stream(5, "krot")
    x = np.ascontiguousarray(rng.uniform(-1, 1, size=(20, 2)))
    n = 256
    cos_a = np.empty((20, n))
    sin_a = np.empty((20, n))
    refl = np.empty((20, n), dtype=np.uint8)
    offs = np.empty((20, n, 2, 2))
    for j in range(20):
        g = stream(6, "krot-pt", j)
        c, s, r = draw_rotation2_trig(n, g, "O")
        cos_a[j], sin_a[j], refl[j] = c, s, r
        offs[j] = _offsets_from_trig(c, s, r, verts)
    s_fast, q_fast = core.rotation2_reduce(fields, x, cos_a, sin_a, refl, np.ascontiguousarray(verts), 4)
    s_gen, q_gen = core.product_reduce(fields, x, np.ascontiguousarray(offs), 4)
    np.testing.assert_allclose(s_fast, s_gen, rtol=1e-12, atol=1e-12)
    np.testing.assert_allclose(q_fast, q_gen, rtol=1e-12, atol=1e-12)


def test_backend_env_override(monkeypatch):
    monkeypatch.setenv("SIMPLEXAVG_KERNEL", "python")
    assert kernels.backend_name() == "python"
    monkeypatch.setenv("SIMPLEXAVG_KERNEL", "cython")
    assert kernels.backend_name() == "cython"
    monkeypatch.setenv("SIMPLEXAVG_KERNEL", "bogus")
    with pytest.raises(ValueError):
        kernels.backend_name()


def test_operator_results_match_across_backends(monkeypatch):
    from simplexavg.operators import simplex_average

    tri = regular_simplex_vertices(2, 2)
    E = rasterize(ShapeSet.ball([0.0, 0.0], 1.0), h=1 / 8)
    monkeypatch.setenv("SIMPLEXAVG_KERNEL", "cython")
    a = simplex_average(tri, [E, E], n_samples=128, seed=3, workers=1)
    monkeypatch.setenv("SIMPLEXAVG_KERNEL", "python")
    b = simplex_average(tri, [E, E], n_samples=128, seed=3, workers=1)
    np.testing.assert_allclose(a.values, b.values, atol=1e-9)


def test_field_count_limit():
    fields = [shape_field()] * 9
    x = np.zeros((1, 2))
    offsets = np.zeros((1, 4, 9, 2))
    with pytest.raises(ValueError):
        kernels.product_reduce(fields, x, offsets, 1)
