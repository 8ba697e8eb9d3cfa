"""Tests for grid geometry, filters, and convolution-matrix construction."""

import numpy as np
import pytest

from convinit import (
    CIRCULAR,
    ZERO_SELF,
    GridShape,
    ImpulseOffset,
    all_impulse_offsets,
    build_conv_matrix,
    impulse_conv_matrix,
    make_filter,
    sample_impulse_offsets,
)
from convinit.gridconv import Filter

from oracles import cross_correlate_circular, cross_correlate_zero_self


class TestGridShape:
    def test_index_row_major(self):
        g = GridShape(3, 5)
        assert g.n == 15
        assert g.index(0, 0) == 0
        assert g.index(0, 4) == 4
        assert g.index(1, 0) == 5
        assert g.index(2, 4) == 14

    def test_rejects_empty_grid(self):
        with pytest.raises(ValueError):
            GridShape(0, 4)


class TestOffsetsAndFilters:
    def test_all_offsets_row_major(self):
        offs = all_impulse_offsets(3)
        assert [(o.di, o.dj) for o in offs] == [
            (-1, -1), (-1, 0), (-1, 1),
            (0, -1), (0, 0), (0, 1),
            (1, -1), (1, 0), (1, 1),
        ]

    def test_box_filter_all_ones(self):
        np.testing.assert_array_equal(make_filter("box", 3).coeffs, np.ones((3, 3)))

    def test_impulse_filter_one_hot_center(self):
        f = make_filter("impulse", 5, offset=ImpulseOffset(0, 0))
        expected = np.zeros((5, 5))
        expected[2, 2] = 1.0
        np.testing.assert_array_equal(f.coeffs, expected)

    def test_impulse_filter_offset_placement(self):
        f = make_filter("impulse", 3, offset=ImpulseOffset(-1, 1))
        assert f.coeffs[0, 2] == 1.0
        assert f.coeffs.sum() == 1.0

    def test_impulse_offset_outside_radius_rejected(self):
        with pytest.raises(ValueError):
            make_filter("impulse", 3, offset=ImpulseOffset(2, 0))

    def test_random_filters_differ_across_seeds(self):
        a = make_filter("random", 3, seed=1)
        b = make_filter("random", 3, seed=2)
        assert np.any(a.coeffs != b.coeffs)

    def test_random_filter_deterministic(self):
        a = make_filter("random", 3, seed=9)
        b = make_filter("random", 3, seed=9)
        np.testing.assert_array_equal(a.coeffs, b.coeffs)

    def test_even_size_rejected(self):
        with pytest.raises(ValueError):
            make_filter("box", 4)

    def test_impulse_filters_form_standard_basis(self):
        """The f^2 one-hot filters, vectorized, have identity Gram matrix."""
        vecs = np.stack(
            [
                make_filter("impulse", 3, offset=o).coeffs.reshape(-1)
                for o in all_impulse_offsets(3)
            ]
        )
        np.testing.assert_array_equal(vecs @ vecs.T, np.eye(9))


class TestBuildConvMatrix:
    def test_one_by_one_filter_scales_identity(self):
        filt = Filter(1, np.array([[2.5]]))
        for padding in (CIRCULAR, ZERO_SELF):
            cm = build_conv_matrix(filt, GridShape(3, 4), padding)
            np.testing.assert_array_equal(cm.matrix, 2.5 * np.eye(12))

    def test_box_rows_sum_to_filter_mass(self):
        cm = build_conv_matrix(make_filter("box", 3), GridShape(3, 3), CIRCULAR)
        np.testing.assert_array_equal(cm.matrix.sum(axis=1), np.full(9, 9.0))

    def test_interior_row_holds_filter_coefficients(self):
        filt = make_filter("random", 3, seed=4)
        grid = GridShape(4, 4)
        cm = build_conv_matrix(filt, grid, CIRCULAR)
        row = cm.matrix[grid.index(1, 1)]
        for u in range(3):
            for v in range(3):
                col = grid.index(1 + u - 1, 1 + v - 1)
                assert row[col] == filt.coeffs[u, v]

    @pytest.mark.parametrize("padding", [CIRCULAR, ZERO_SELF])
    def test_matches_direct_cross_correlation(self, padding):
        oracle = {
            CIRCULAR: cross_correlate_circular,
            ZERO_SELF: cross_correlate_zero_self,
        }[padding]
        rng = np.random.default_rng(201)
        for trial in range(50):
            gh = int(rng.integers(3, 7))
            gw = int(rng.integers(3, 7))
            f = int(rng.choice([1, 3]))
            coeffs = rng.standard_normal((f, f))
            image = rng.standard_normal((gh, gw))
            cm = build_conv_matrix(Filter(f, coeffs), GridShape(gh, gw), padding)
            via_matrix = (cm.matrix @ image.reshape(-1)).reshape(gh, gw)
            np.testing.assert_allclose(via_matrix, oracle(image, coeffs), atol=1e-12)

    def test_linear_in_coefficients(self):
        rng = np.random.default_rng(202)
        grid = GridShape(4, 5)
        a = rng.standard_normal((3, 3))
        b = rng.standard_normal((3, 3))
        ma = build_conv_matrix(Filter(3, a), grid, CIRCULAR).matrix
        mb = build_conv_matrix(Filter(3, b), grid, CIRCULAR).matrix
        mab = build_conv_matrix(Filter(3, a + 2.0 * b), grid, CIRCULAR).matrix
        np.testing.assert_allclose(mab, ma + 2.0 * mb, atol=1e-12)

    def test_filter_too_large_for_circular_grid(self):
        with pytest.raises(ValueError):
            build_conv_matrix(make_filter("box", 5), GridShape(3, 3), CIRCULAR)

    def test_large_filter_allowed_with_self_fallback(self):
        cm = build_conv_matrix(make_filter("box", 5), GridShape(3, 3), ZERO_SELF)
        assert cm.matrix.shape == (9, 9)


class TestImpulseConvMatrix:
    def test_center_offset_is_identity(self):
        cm = impulse_conv_matrix(ImpulseOffset(0, 0), GridShape(3, 4), CIRCULAR)
        np.testing.assert_array_equal(cm.matrix, np.eye(12))

    def test_one_by_two_swap(self):
        cm = impulse_conv_matrix(ImpulseOffset(0, 1), GridShape(1, 2), CIRCULAR)
        np.testing.assert_array_equal(cm.matrix, np.array([[0.0, 1.0], [1.0, 0.0]]))

    def test_self_fallback_bottom_row(self):
        """Offset (1, 0) on a 3x3 grid: bottom-row pixels have no pixel below,
        so they map to themselves; everything else maps one row down."""
        grid = GridShape(3, 3)
        cm = impulse_conv_matrix(ImpulseOffset(1, 0), grid, ZERO_SELF)
        expected = np.zeros((9, 9))
        for i in range(3):
            for j in range(3):
                row = grid.index(i, j)
                expected[row, grid.index(i + 1, j) if i < 2 else row] = 1.0
        np.testing.assert_array_equal(cm.matrix, expected)

    def test_circular_is_permutation(self):
        grid = GridShape(4, 5)
        for off in all_impulse_offsets(3):
            m = impulse_conv_matrix(off, grid, CIRCULAR).matrix
            assert set(np.unique(m)) <= {0.0, 1.0}
            np.testing.assert_array_equal(m.sum(axis=0), np.ones(20))
            np.testing.assert_array_equal(m.sum(axis=1), np.ones(20))

    def test_fallback_rows_one_hot(self):
        grid = GridShape(4, 4)
        for off in all_impulse_offsets(3):
            m = impulse_conv_matrix(off, grid, ZERO_SELF).matrix
            np.testing.assert_array_equal(m.sum(axis=1), np.ones(16))
            assert set(np.unique(m)) <= {0.0, 1.0}

    def test_circular_composition_adds_offsets(self):
        grid = GridShape(4, 4)
        a = impulse_conv_matrix(ImpulseOffset(1, 0), grid, CIRCULAR).matrix
        b = impulse_conv_matrix(ImpulseOffset(0, 1), grid, CIRCULAR).matrix
        ab = impulse_conv_matrix(ImpulseOffset(1, 1), grid, CIRCULAR).matrix
        np.testing.assert_array_equal(b @ a, ab)

    def test_circular_composition_wraps(self):
        grid = GridShape(3, 3)
        a = impulse_conv_matrix(ImpulseOffset(1, 1), grid, CIRCULAR).matrix
        composed = a @ a @ a
        np.testing.assert_array_equal(composed, np.eye(9))

    def test_agrees_with_impulse_filter_matrix(self):
        grid = GridShape(4, 4)
        for off in all_impulse_offsets(3):
            direct = impulse_conv_matrix(off, grid, CIRCULAR).matrix
            via_filter = build_conv_matrix(
                make_filter("impulse", 3, offset=off), grid, CIRCULAR
            ).matrix
            np.testing.assert_array_equal(direct, via_filter)


class TestSampleOffsets:
    def test_all_nine_when_heads_equal_pool(self):
        offs = sample_impulse_offsets(9, 3, seed=5)
        assert sorted((o.di, o.dj) for o in offs) == sorted(
            (o.di, o.dj) for o in all_impulse_offsets(3)
        )

    def test_golden_three_heads(self):
        offs = sample_impulse_offsets(3, 3, seed=2024)
        assert [(o.di, o.dj) for o in offs] == [(0, 1), (-1, -1), (1, 0)]

    def test_distinct_when_heads_fit(self):
        for seed in range(10):
            offs = sample_impulse_offsets(6, 3, seed=seed)
            assert len({(o.di, o.dj) for o in offs}) == 6

    def test_overflow_repeats_after_exhausting_pool(self):
        offs = sample_impulse_offsets(12, 3, seed=3)
        assert len(offs) == 12
        assert len({(o.di, o.dj) for o in offs[:9]}) == 9
        pool = {(o.di, o.dj) for o in all_impulse_offsets(3)}
        assert all((o.di, o.dj) in pool for o in offs[9:])

    def test_deterministic(self):
        a = sample_impulse_offsets(5, 3, seed=77)
        b = sample_impulse_offsets(5, 3, seed=77)
        assert [(o.di, o.dj) for o in a] == [(o.di, o.dj) for o in b]
