import math

import numpy as np
import pytest

from simplexavg.geometry import (
    DegenerateConfigurationError,
    Rotation,
    SimplexConfig,
    frame_min_singular_value,
    is_unit_simplex_tuple,
    regular_simplex_vertices,
    sample_rotation,
    sample_rotation_matrices,
    sample_sphere_point,
    sample_sphere_points,
    select_independent_frames,
)
from simplexavg.rng import stream


def gram_residual(v: np.ndarray) -> float:
    k = len(v)
    target = np.full((k, k), 0.5) + 0.5 * np.eye(k)
    return float(np.max(np.abs(v @ v.T - target)))


class TestRegularSimplex:
    def test_d2_k2_explicit(self):
        # Cholesky of [[1, 1/2], [1/2, 1]] is [[1, 0], [1/2, sqrt(3)/2]]
        cfg = regular_simplex_vertices(2, 2)
        expected = np.array([[1.0, 0.0], [0.5, math.sqrt(3) / 2]])
        np.testing.assert_allclose(cfg.vertices, expected, atol=1e-15)

    def test_k1_is_e1(self):
        cfg = regular_simplex_vertices(5, 1)
        np.testing.assert_allclose(cfg.vertices, np.eye(5)[:1], atol=1e-15)

    def test_d3_k3_gram(self):
        cfg = regular_simplex_vertices(3, 3)
        assert gram_residual(cfg.vertices) < 1e-12

    @pytest.mark.parametrize("d,k", [(4, 2), (8, 8), (6, 3)])
    def test_gram_property(self, d, k):
        cfg = regular_simplex_vertices(d, k)
        assert gram_residual(cfg.vertices) < 1e-12
        assert np.max(np.abs(np.linalg.norm(cfg.vertices, axis=1) - 1)) < 1e-12

    def test_spans_first_k_coordinates(self):
        cfg = regular_simplex_vertices(5, 3)
        assert np.allclose(cfg.vertices[:, 3:], 0.0)

    def test_dimension_errors(self):
        with pytest.raises(ValueError):
            regular_simplex_vertices(2, 3)
        with pytest.raises(ValueError):
            regular_simplex_vertices(2, 0)


class TestRotationSampling:
    def test_orthogonality(self):
        rng = stream(0, "test-rot")
        for d in (1, 2, 3, 5):
            mats = sample_rotation_matrices(d, 64, rng)
            worst = max(np.max(np.abs(m.T @ m - np.eye(d))) for m in mats)
            assert worst < 1e-10

    def test_o1_sign_frequency(self):
        rng = stream(1, "test-o1")
        mats = sample_rotation_matrices(1, 10_000, rng)
        freq = float(np.mean(mats[:, 0, 0] > 0))
        assert 0.47 <= freq <= 0.53

    def test_so_group_has_positive_det(self):
        rng = stream(2, "test-so")
        mats = sample_rotation_matrices(3, 200, rng, group="SO")
        assert np.all(np.linalg.det(mats) > 0)

    def test_o_group_mixes_reflections(self):
        rng = stream(3, "test-o")
        dets = np.linalg.det(sample_rotation_matrices(3, 4000, rng))
        frac = np.mean(dets < 0)
        assert 0.45 <= frac <= 0.55

    def test_haar_moments_d3(self):
        # image of a fixed unit vector must be uniform on S^2: mean 0, cov I/3
        d, n = 3, 100_000
        rng = stream(4, "test-haar")
        mats = sample_rotation_matrices(d, n, rng)
        img = mats @ np.eye(d)[0]
        se_mean = math.sqrt(1 / d / n)
        assert np.max(np.abs(img.mean(axis=0))) <= 3 * se_mean
        cov = img.T @ img / n
        var_diag = 3 / (d * (d + 2)) - 1 / d ** 2
        var_off = 1 / (d * (d + 2))
        for i in range(d):
            for j in range(d):
                se = math.sqrt((var_diag if i == j else var_off) / n)
                target = 1 / d if i == j else 0.0
                assert abs(cov[i, j] - target) <= 3 * se

    def test_haar_invariance_under_fixed_rotation(self):
        # A R u has the same moments as R u for fixed A in O(d)
        d, n = 3, 100_000
        rng = stream(5, "test-haar-inv")
        mats = sample_rotation_matrices(d, n, rng)
        A = sample_rotation(d, stream(6, "test-fixed")).matrix
        img = (A @ (mats @ np.eye(d)[0]).T).T
        se_mean = math.sqrt(1 / d / n)
        assert np.max(np.abs(img.mean(axis=0))) <= 3 * se_mean
        cov = img.T @ img / n
        assert np.max(np.abs(cov - np.eye(d) / d)) <= 3 * math.sqrt(3 / (d * (d + 2)) / n) + 1e-3

    def test_rotation_type_validation(self):
        with pytest.raises(ValueError):
            Rotation(d=2, matrix=np.array([[1.0, 0.1], [0.0, 1.0]]))
        r = sample_rotation(4, 123)
        assert r.det_sign in (-1, 1)


class TestSphereSampling:
    def test_n1_is_sign(self):
        rng = stream(7, "test-s1")
        pts = sample_sphere_points(1, 100, rng)
        assert set(np.round(pts.ravel()).tolist()) <= {-1.0, 1.0}

    def test_unit_norm(self):
        p = sample_sphere_point(6, 42)
        assert abs(np.linalg.norm(p.coords) - 1) < 1e-12

    def test_second_moment_n4(self):
        n, draws = 4, 1_000_000
        rng = stream(8, "test-s4")
        pts = sample_sphere_points(n, draws, rng)
        m2 = (pts ** 2).mean(axis=0)
        # var of u_i^2 is 3/(n(n+2)) - 1/n^2
        se = math.sqrt((3 / (n * (n + 2)) - 1 / n ** 2) / draws)
        assert np.max(np.abs(m2 - 1 / n)) <= 3 * se

    def test_zero_dimension_rejected(self):
        with pytest.raises(ValueError):
            sample_sphere_points(0, 1, stream(0, "x"))


class TestUnitSimplexTuple:
    def test_constructed_simplex(self):
        cfg = regular_simplex_vertices(2, 2)
        assert is_unit_simplex_tuple(np.zeros(2), cfg.vertices, tol=1e-9)

    def test_repeated_vertex(self):
        assert not is_unit_simplex_tuple(np.zeros(2), [(1.0, 0.0), (1.0, 0.0)], tol=1e-9)

    def test_rotation_invariance(self):
        cfg = regular_simplex_vertices(3, 3)
        r = sample_rotation(3, 99).matrix
        rotated = (r @ cfg.vertices.T).T
        assert is_unit_simplex_tuple(np.zeros(3), rotated, tol=1e-9)

    def test_translation_invariance(self):
        cfg = regular_simplex_vertices(2, 2)
        shift = np.array([0.3, -1.7])
        assert is_unit_simplex_tuple(shift, cfg.vertices + shift, tol=1e-9)


class TestFrameSelection:
    def test_k1_trivial(self):
        cfg = regular_simplex_vertices(3, 1)
        r = sample_rotation(3, 1)
        assert select_independent_frames([r], cfg) == [1]

    def test_identity_d2(self):
        # step 2: u_1 lies in span{u_1}, so p = 2 is forced
        cfg = regular_simplex_vertices(2, 2)
        eye = np.eye(2)
        assert select_independent_frames([eye, eye], cfg) == [1, 2]

    def test_identity_d3(self):
        # simplex vertices are linearly independent; the max-distance
        # tie-break picks the new vertex at each step
        cfg = regular_simplex_vertices(3, 3)
        eye = np.eye(3)
        assert select_independent_frames([eye, eye, eye], cfg) == [1, 2, 3]

    @pytest.mark.parametrize("d", [2, 3])
    def test_soundness_random(self, d):
        cfg = regular_simplex_vertices(d, d)
        rng = stream(11, f"frames-{d}")
        for _ in range(200):
            mats = list(sample_rotation_matrices(d, d, rng))
            idx = select_independent_frames(mats, cfg)
            assert idx[0] == 1
            assert all(m <= i + 1 for i, m in enumerate(idx))
            assert frame_min_singular_value(mats, cfg, idx) > 1e-8

    def test_degenerate_error(self):
        # a rank-deficient matrix is not a rotation; it maps every candidate
        # into the span and must trip the degeneracy guard
        cfg = regular_simplex_vertices(2, 2)
        broken = np.array([[1.0, 0.0], [0.0, 0.0]])
        with pytest.raises(DegenerateConfigurationError):
            select_independent_frames([np.eye(2), np.zeros((2, 2))], cfg)
        with pytest.raises(DegenerateConfigurationError):
            select_independent_frames([broken, broken], cfg)

    def test_wrong_count_rejected(self):
        cfg = regular_simplex_vertices(2, 2)
        with pytest.raises(ValueError):
            select_independent_frames([np.eye(2)], cfg)


def test_simplex_config_validation():
    with pytest.raises(ValueError):
        SimplexConfig(d=2, k=2, vertices=np.array([[1.0, 0.0], [0.0, 1.0]]))
