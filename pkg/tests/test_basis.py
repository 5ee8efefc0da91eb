"""Basis construction checks, including the hand-computed trigonometric
oracles for small lattices."""

import numpy as np
import pytest

from gpdiag.basis import (
    build_basis_1d,
    build_basis_2d,
    load_basis_cache,
    order_columns,
    project,
    save_basis_cache,
)
from gpdiag.covariance import density_for_dim
from gpdiag.errors import DimensionError


def brute_force_1d(m):
    """Direct evaluation of the column formulas, no vectorization."""
    z = np.zeros((m, m - 1))
    for k in range(1, m + 1):
        for j in range(1, m):
            if j == m - 1:
                z[k - 1, j - 1] = np.cos((m / 2) / m * 2 * np.pi * k)
            elif j % 2 == 1:
                w = ((j + 1) // 2) / m
                z[k - 1, j - 1] = 2 * np.cos(w * 2 * np.pi * k)
            else:
                w = (j // 2) / m
                z[k - 1, j - 1] = -2 * np.sin(w * 2 * np.pi * k)
    return z


class TestBasis1D:
    def test_m4_gram(self):
        b = build_basis_1d(4)
        assert b.Z.shape == (4, 3)
        gram = b.Z.T @ b.Z
        assert np.allclose(np.diag(gram), [8, 8, 4], atol=1e-12)
        assert np.max(np.abs(b.Z.T @ np.ones(4))) < 1e-12

    def test_m200_diag_pattern(self):
        b = build_basis_1d(200)
        assert np.sum(b.ztz_diag == 400) == 198
        assert np.sum(b.ztz_diag == 200) == 1

    def test_m8_matches_brute_force(self):
        b = build_basis_1d(8)
        assert np.allclose(b.Z, brute_force_1d(8), atol=1e-12)

    def test_odd_m_rejected(self):
        with pytest.raises(DimensionError):
            build_basis_1d(7)
        with pytest.raises(DimensionError):
            build_basis_1d(2)


class TestBasis2D:
    def test_4x4_gram(self):
        b = build_basis_2d(4, 4)
        assert b.Z.shape == (16, 15)
        gram = b.Z.T @ b.Z
        off = gram - np.diag(np.diag(gram))
        assert np.max(np.abs(off)) < 1e-8 * 16
        assert np.sum(b.ztz_diag == 32) == 12
        assert np.sum(b.ztz_diag == 16) == 3
        assert np.allclose(np.diag(gram), b.ztz_diag, atol=1e-10)

    def test_4x6_block_widths(self):
        # widths (M1/2-1)M2, M1(M2/2-1), M2-2, M1-2, 1, 1, 1 sum to M1M2-1
        m1, m2 = 4, 6
        widths = [(m1 // 2 - 1) * m2, m1 * (m2 // 2 - 1), m2 - 2, m1 - 2, 1, 1, 1]
        assert widths == [6, 8, 4, 2, 1, 1, 1]
        assert sum(widths) == m1 * m2 - 1
        b = build_basis_2d(m1, m2)
        assert b.Z.shape == (24, 23)
        assert np.sum(b.ztz_diag == 24) == 3

    @pytest.mark.parametrize("m1,m2", [(4, 4), (4, 6), (6, 8), (10, 4)])
    def test_column_count_identity(self, m1, m2):
        b = build_basis_2d(m1, m2)
        assert b.n_columns == m1 * m2 - 1

    def test_first_pair_column_matches_direct_loop(self):
        # the (1/M1, 1/M2) cosine column evaluated point by point
        m1 = m2 = 4
        b = build_basis_2d(m1, m2)
        target = np.zeros(16)
        r = 0
        for i in range(1, m1 + 1):
            for j in range(1, m2 + 1):
                target[r] = 2 * np.cos(2 * np.pi * (i / m1 + j / m2))
                r += 1
        cols = [
            c
            for c in range(15)
            if np.allclose(b.freq[c], [0.25, 0.25]) and not b.is_sin[c]
        ]
        assert len(cols) == 1
        assert np.allclose(b.Z[:, cols[0]], target, atol=1e-12)

    def test_odd_dimension_rejected(self):
        with pytest.raises(DimensionError):
            build_basis_2d(5, 4)


class TestOrdering:
    def test_1d_natural_order_is_canonical(self):
        b = build_basis_1d(16)
        ordered = order_columns(b, density_for_dim(1))
        assert np.array_equal(ordered.freq, b.freq)
        assert np.array_equal(ordered.is_sin, b.is_sin)

    def test_2d_sorted_by_frequency_norm(self):
        b = build_basis_2d(4, 6)
        wtw = b.freq_norm_sq
        assert np.all(np.diff(wtw) >= -1e-15)
        # brute force: the density order at any rho equals the wtw order
        dens = density_for_dim(2)
        a = np.array([dens(w, 5.0) for w in b.freq])
        assert np.all(np.diff(a) <= 1e-15)

    def test_permutation_invariant_to_range(self):
        b = build_basis_2d(6, 4)
        ordered = order_columns(b, density_for_dim(2))  # verifies rho in {1,5,20}
        assert np.array_equal(ordered.freq, b.freq)


class TestProjection:
    def test_ones_vector_projects_to_zero(self):
        b = build_basis_1d(12)
        assert np.max(np.abs(project(b, np.ones(12)).v)) < 1e-12

    def test_basis_column_projects_to_single_entry(self):
        b = build_basis_2d(4, 4)
        j = 5
        v = project(b, b.Z[:, j]).v
        expected = np.zeros(15)
        expected[j] = np.sqrt(b.ztz_diag[j])
        assert np.allclose(v, expected, atol=1e-9)

    def test_energy_identity_m64(self):
        rng = np.random.default_rng(64)
        b = build_basis_1d(64)
        y = rng.standard_normal(64)
        v = project(b, y).v
        centered = y - y.mean()
        # oracle via explicit dense multiply with the orthonormalized matrix
        w = b.Z / np.sqrt(b.ztz_diag)
        assert np.allclose(v, w.T @ y, atol=1e-12)
        assert abs(np.sum(v**2) - np.sum(centered**2)) < 1e-8 * np.sum(y**2)

    def test_parseval_with_mean(self):
        rng = np.random.default_rng(9)
        b = build_basis_2d(4, 6)
        y = rng.uniform(-2, 5, 24)
        v = project(b, y).v
        total = np.sum(v**2) + 24 * np.mean(y) ** 2
        assert abs(total - np.sum(y**2)) < 1e-8 * np.sum(y**2)

    def test_linearity(self):
        rng = np.random.default_rng(2)
        b = build_basis_1d(32)
        x, w = rng.standard_normal((2, 32))
        lhs = project(b, 2.5 * x - 1.25 * w).v
        rhs = 2.5 * project(b, x).v - 1.25 * project(b, w).v
        assert np.allclose(lhs, rhs, atol=1e-10)

    def test_length_mismatch(self):
        b = build_basis_1d(8)
        with pytest.raises(DimensionError):
            project(b, np.ones(9))

    def test_energy_never_exceeds_total(self):
        rng = np.random.default_rng(21)
        b = build_basis_2d(6, 4)
        for _ in range(5):
            y = rng.standard_normal(24) * rng.uniform(0.1, 10)
            v = project(b, y)
            assert np.sum(v.v_sq) <= np.sum(y**2) + 1e-9


class TestCache:
    def test_round_trip_bit_identical(self, tmp_path):
        b = build_basis_2d(4, 6)
        p = tmp_path / "z.bin"
        save_basis_cache(b, p)
        back = load_basis_cache(p)
        assert back.dims == (4, 6)
        assert np.array_equal(back.Z, b.Z)

    def test_1d_cache(self, tmp_path):
        b = build_basis_1d(16)
        p = tmp_path / "z1.bin"
        save_basis_cache(b, p)
        assert load_basis_cache(p).dims == (16,)
