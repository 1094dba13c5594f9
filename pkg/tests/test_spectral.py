"""Transform, multiplier, dealiasing and interpolation primitives."""

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from sympflow import (ConfigurationError, Grid2D, Multiplier, PhysicalField,
                      SpectrumField, apply_multiplier, dealias,
                      interpolate_at, transform)
from sympflow.spectral import eval_spectra

from conftest import random_band_limited


def random_spectrum(grid, seed, kmax=None):
    rng = np.random.default_rng(seed)
    return random_band_limited(grid, rng, kmax=kmax, harmonic_scale=0.0).stream


class TestGrid:
    def test_odd_n_rejected(self):
        with pytest.raises(ConfigurationError):
            Grid2D(33)

    def test_small_n_rejected(self):
        with pytest.raises(ConfigurationError):
            Grid2D(6)

    def test_wavenumber_roundtrip(self):
        grid = Grid2D(16)
        for idx, k in enumerate(grid.k1):
            assert grid.k1[int(k) % 16] == k
            assert idx == int(k) % 16

    def test_grid_mismatch_raises(self):
        a = SpectrumField.zeros(Grid2D(16))
        b = SpectrumField.zeros(Grid2D(32))
        with pytest.raises(ConfigurationError):
            a + b


class TestTransform:
    def test_constant_field_is_dc_mode(self, grid32):
        phys = PhysicalField(grid32, np.ones((32, 32)))
        spec = transform(phys)
        assert spec.coeffs[0, 0] == pytest.approx(1.0)
        off = spec.coeffs.copy()
        off[0, 0] = 0.0
        assert np.max(np.abs(off)) < 1e-15

    def test_single_mode_is_cosine(self, grid32):
        spec = SpectrumField.from_modes(grid32, {(1, 0): 0.5, (-1, 0): 0.5})
        X, _ = grid32.mesh
        assert np.max(np.abs(transform(spec).values - np.cos(X))) < 1e-14

    def test_roundtrip_band_limited(self, grid32):
        spec = random_spectrum(grid32, 0)
        back = transform(transform(spec))
        scale = np.max(np.abs(spec.coeffs))
        assert np.max(np.abs(back.coeffs - spec.coeffs)) < 1e-13 * scale

    def test_mean_is_lattice_mean(self, grid32):
        rng = np.random.default_rng(1)
        vals = rng.normal(size=(32, 32))
        spec = transform(PhysicalField(grid32, vals))
        assert spec.coeffs[0, 0].real == pytest.approx(vals.mean())


class TestMultipliers:
    def test_laplacian_eigenfunction(self, grid32):
        cosx = SpectrumField.from_modes(grid32, {(1, 0): 0.5, (-1, 0): 0.5})
        out = apply_multiplier(cosx, Multiplier.LAP_POS)
        assert np.max(np.abs(out.coeffs - cosx.coeffs)) == 0.0

    def test_helmholtz_on_cosine(self, grid32):
        cosx = SpectrumField.from_modes(grid32, {(1, 0): 0.5, (-1, 0): 0.5})
        out = apply_multiplier(cosx, Multiplier.HELMHOLTZ_INV)
        assert np.max(np.abs(out.coeffs - 0.5 * cosx.coeffs)) < 1e-16

    def test_gradient_of_cosine(self, grid32):
        cosx = SpectrumField.from_modes(grid32, {(1, 0): 0.5, (-1, 0): 0.5})
        out = transform(apply_multiplier(cosx, Multiplier.GRAD1))
        X, _ = grid32.mesh
        assert np.max(np.abs(out.values + np.sin(X))) < 1e-14

    def test_helmholtz_inverts_identity_plus_laplacian(self, grid32):
        f = random_spectrum(grid32, 2)
        lifted = SpectrumField(grid32, f.coeffs * (1.0 + grid32.ksq))
        back = apply_multiplier(lifted, Multiplier.HELMHOLTZ_INV)
        assert np.max(np.abs(back.coeffs - f.coeffs)) < 1e-14

    @given(st.sampled_from(list(Multiplier)), st.sampled_from(list(Multiplier)),
           st.integers(0, 1000))
    @settings(max_examples=30, deadline=None)
    def test_multipliers_commute(self, a, b, seed):
        # diagonal operators; the two orders differ only in the rounding of
        # elementwise products, so agreement is required at the ulp level
        grid = Grid2D(16)
        rng = np.random.default_rng(seed)
        f = random_band_limited(grid, rng, harmonic_scale=0.0).stream
        ab = apply_multiplier(apply_multiplier(f, a), b)
        ba = apply_multiplier(apply_multiplier(f, b), a)
        scale = np.max(np.abs(ab.coeffs)) + 1e-300
        assert np.max(np.abs(ab.coeffs - ba.coeffs)) <= 8e-16 * scale

    @given(st.sampled_from(list(Multiplier)), st.integers(0, 1000))
    @settings(max_examples=20, deadline=None)
    def test_hermitian_symmetry_preserved(self, symbol, seed):
        grid = Grid2D(16)
        rng = np.random.default_rng(seed)
        f = random_band_limited(grid, rng, harmonic_scale=0.0).stream
        assert apply_multiplier(f, symbol).hermitian_residual() < 1e-12


class TestDealias:
    def test_in_band_unchanged(self, grid32):
        f = random_spectrum(grid32, 3, kmax=10)
        assert np.array_equal(dealias(f).coeffs, f.coeffs)

    def test_high_mode_zeroed(self, grid32):
        f = SpectrumField.from_modes(grid32, {(15, 0): 0.5, (-15, 0): 0.5})
        assert np.all(dealias(f).coeffs == 0.0)

    def test_product_matches_truncated_convolution(self, grid32):
        """Pointwise product on the lattice, dealiased, equals the exact
        coefficient convolution truncated to the 2/3 band."""
        rng = np.random.default_rng(4)
        a = random_band_limited(grid32, rng, kmax=10, harmonic_scale=0.0).stream
        b = random_band_limited(grid32, rng, kmax=10, harmonic_scale=0.0).stream
        prod_vals = transform(a).values * transform(b).values
        got = dealias(transform(PhysicalField(grid32, prod_vals)))

        half = grid32.n // 2
        exact = np.zeros((grid32.n, grid32.n), dtype=complex)
        idx = [(int(k1), int(k2))
               for k1 in range(-10, 11) for k2 in range(-10, 11)]
        for (p1, p2) in idx:
            cb = b.coeffs
            ca = a.coeffs[p1 % 32, p2 % 32]
            if ca == 0.0:
                continue
            for (q1, q2) in idx:
                k1, k2 = p1 + q1, p2 + q2
                if not (-half <= k1 < half and -half <= k2 < half):
                    continue
                if 3 * max(abs(k1), abs(k2)) > grid32.n:
                    continue
                exact[k1 % 32, k2 % 32] += ca * cb[q1 % 32, q2 % 32]
        assert np.max(np.abs(got.coeffs - exact)) < 1e-13 * np.max(np.abs(exact))


class TestInterpolation:
    def test_cosine_zero_at_half_pi(self, grid32):
        cosx = SpectrumField.from_modes(grid32, {(1, 0): 0.5, (-1, 0): 0.5})
        vals = interpolate_at(cosx, [(np.pi / 2, 1.0), (np.pi / 2, 4.0)])
        assert np.max(np.abs(vals)) < 1e-14

    def test_matches_fft_on_lattice(self, grid32):
        rng = np.random.default_rng(5)
        f = random_band_limited(grid32, rng, kmax=15, harmonic_scale=0.0).stream
        direct = interpolate_at(f, grid32.lattice_points)
        assert np.max(np.abs(direct - transform(f).values.ravel())) < 1e-12

    def test_constant_everywhere(self, grid32):
        c = SpectrumField.from_modes(grid32, {})
        c = SpectrumField(grid32, c.coeffs + np.where(
            (grid32.kx == 0) & (grid32.ky == 0), 2.5, 0.0))
        rng = np.random.default_rng(6)
        pts = rng.uniform(0, 2 * np.pi, size=(40, 2))
        assert np.max(np.abs(interpolate_at(c, pts) - 2.5)) < 1e-13

    def test_empty_points(self, grid32):
        f = random_spectrum(grid32, 7)
        assert interpolate_at(f, []).size == 0

    def test_batched_evaluation_matches_single(self, grid32):
        rng = np.random.default_rng(8)
        f1 = random_spectrum(grid32, 9)
        f2 = random_spectrum(grid32, 10)
        pts = rng.uniform(0, 2 * np.pi, size=(17, 2))
        stack = eval_spectra(grid32, np.stack([f1.coeffs, f2.coeffs]), pts)
        assert np.allclose(stack[0], interpolate_at(f1, pts), atol=1e-13)
        assert np.allclose(stack[1], interpolate_at(f2, pts), atol=1e-13)


@given(st.integers(0, 10_000))
@settings(max_examples=25, deadline=None)
def test_parseval(seed):
    grid = Grid2D(16)
    rng = np.random.default_rng(seed)
    f = random_band_limited(grid, rng, harmonic_scale=0.0).stream
    phys = transform(f).values
    lhs = np.mean(phys ** 2)
    rhs = np.sum(np.abs(f.coeffs) ** 2)
    assert lhs == pytest.approx(rhs, rel=1e-12)
