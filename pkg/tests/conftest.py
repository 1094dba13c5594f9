import numpy as np
import pytest

from sympflow import Grid2D, SpectrumField, SymplecticVectorField


@pytest.fixture(scope="session")
def grid32():
    return Grid2D(32)


def stream_field(grid, modes, harmonic=(0.0, 0.0)):
    """Stream from {(k1, k2): coefficient} plus a harmonic pair."""
    return SymplecticVectorField.from_stream(
        SpectrumField.from_modes(grid, modes), harmonic)


def cos_x(grid, amplitude=1.0):
    return stream_field(grid, {(1, 0): amplitude / 2, (-1, 0): amplitude / 2})


def cos_y(grid, amplitude=1.0):
    return stream_field(grid, {(0, 1): amplitude / 2, (0, -1): amplitude / 2})


def two_mode(grid, amplitude=1.0):
    """cos x + cos y: a stationary eigenmode with cellular structure."""
    a = amplitude / 2
    return stream_field(grid, {(1, 0): a, (-1, 0): a, (0, 1): a, (0, -1): a})


def generic_field(grid, amplitude=1.0):
    """cos x + cos 2y: mixed eigenvalues, genuinely non-stationary."""
    a = amplitude / 2
    return stream_field(grid, {(1, 0): a, (-1, 0): a, (0, 2): a, (0, -2): a})


def random_band_limited(grid, rng, kmax=None, harmonic_scale=1.0):
    """Hermitian-symmetric random stream within |k|_inf <= kmax plus a
    random harmonic part."""
    n = grid.n
    if kmax is None:
        kmax = n // 4
    c = rng.normal(size=(n, n)) + 1j * rng.normal(size=(n, n))
    keep = np.maximum(np.abs(grid.kx), np.abs(grid.ky)) <= kmax
    c = np.where(keep, c, 0.0)
    c[0, 0] = 0.0
    c = 0.5 * (c + np.roll(c[::-1, ::-1], (1, 1), (0, 1)).conj())
    h = harmonic_scale * rng.normal(size=2)
    return SymplecticVectorField(SpectrumField(grid, c), h)
