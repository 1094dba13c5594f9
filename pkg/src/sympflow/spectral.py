"""Fourier representation of periodic scalar fields on the square torus [0, 2pi)^2.

Conventions used throughout the library:

* coefficients are "mean normalised": a field with values F(x) on the n x n
  collocation lattice x_j = 2 pi j / n has coefficients
  c(k) = fft2(F) / n^2, so that c(0, 0) is the lattice mean and
  F(x) = sum_k c(k) exp(i k.x) exactly on the lattice;
* real fields satisfy the Hermitian symmetry c(-k) = conj(c(k));
* the Laplacian is the positive one (Fourier symbol |k|^2).
"""

from __future__ import annotations

import enum
from dataclasses import dataclass
from functools import cached_property

import numpy as np

from .errors import ConfigurationError

TWO_PI = 2.0 * np.pi


class Multiplier(enum.Enum):
    """Diagonal Fourier multipliers."""

    GRAD1 = "grad1"           # i k1
    GRAD2 = "grad2"           # i k2
    LAP_POS = "lap_pos"       # |k|^2  (positive Laplacian)
    HELMHOLTZ_INV = "helmholtz_inv"  # 1 / (1 + |k|^2)


@dataclass(frozen=True)
class Grid2D:
    """Square collocation grid with n modes per axis and period 2 pi.

    Wavenumbers follow the standard FFT layout 0, 1, ..., n/2-1, -n/2, ..., -1
    along each axis (axis 0 is x, axis 1 is y).
    """

    n: int

    def __post_init__(self):
        if self.n % 2 != 0 or self.n < 8:
            raise ConfigurationError(
                f"grid size must be an even integer >= 8, got {self.n}")

    @cached_property
    def k1(self) -> np.ndarray:
        return np.fft.fftfreq(self.n, d=1.0 / self.n).astype(np.int64)

    @cached_property
    def kx(self) -> np.ndarray:
        return self.k1[:, None] * np.ones((1, self.n), dtype=np.int64)

    @cached_property
    def ky(self) -> np.ndarray:
        return np.ones((self.n, 1), dtype=np.int64) * self.k1[None, :]

    @cached_property
    def ksq(self) -> np.ndarray:
        return (self.kx ** 2 + self.ky ** 2).astype(float)

    @cached_property
    def dealias_mask(self) -> np.ndarray:
        """True on modes kept by the 2/3 rule: max(|k1|, |k2|) <= n/3."""
        kmax = np.maximum(np.abs(self.kx), np.abs(self.ky))
        return 3 * kmax <= self.n

    @cached_property
    def x(self) -> np.ndarray:
        return TWO_PI * np.arange(self.n) / self.n

    @cached_property
    def mesh(self) -> tuple[np.ndarray, np.ndarray]:
        return np.meshgrid(self.x, self.x, indexing="ij")

    @cached_property
    def lattice_points(self) -> np.ndarray:
        """All lattice points as an (n*n, 2) array, row-major in (x, y)."""
        X, Y = self.mesh
        return np.stack([X.ravel(), Y.ravel()], axis=1)

    def to_phys(self, coeffs: np.ndarray) -> np.ndarray:
        """Inverse transform of mean-normalised coefficients (batched over
        leading axes)."""
        return np.fft.ifft2(coeffs, axes=(-2, -1)).real * (self.n ** 2)

    def to_spec(self, values: np.ndarray) -> np.ndarray:
        """Forward transform to mean-normalised coefficients (batched)."""
        return np.fft.fft2(values, axes=(-2, -1)) / (self.n ** 2)

    def multiplier_array(self, symbol: Multiplier) -> np.ndarray:
        if symbol is Multiplier.GRAD1:
            return 1j * self.kx
        if symbol is Multiplier.GRAD2:
            return 1j * self.ky
        if symbol is Multiplier.LAP_POS:
            return self.ksq
        if symbol is Multiplier.HELMHOLTZ_INV:
            return 1.0 / (1.0 + self.ksq)
        raise ConfigurationError(f"unknown multiplier {symbol!r}")


def _check_same_grid(a, b):
    if a.grid != b.grid:
        raise ConfigurationError(
            f"grid mismatch: n={a.grid.n} vs n={b.grid.n}")


@dataclass(frozen=True)
class SpectrumField:
    """Complex Fourier coefficients of a real scalar field."""

    grid: Grid2D
    coeffs: np.ndarray

    def __post_init__(self):
        arr = np.array(self.coeffs, dtype=complex)
        if arr.shape != (self.grid.n, self.grid.n):
            raise ConfigurationError(
                f"coefficient array has shape {arr.shape}, expected "
                f"({self.grid.n}, {self.grid.n})")
        arr.setflags(write=False)
        object.__setattr__(self, "coeffs", arr)

    @classmethod
    def zeros(cls, grid: Grid2D) -> "SpectrumField":
        return cls(grid, np.zeros((grid.n, grid.n), dtype=complex))

    @classmethod
    def from_modes(cls, grid: Grid2D, modes: dict) -> "SpectrumField":
        """Build from {(k1, k2): coefficient}; no symmetry completion."""
        c = np.zeros((grid.n, grid.n), dtype=complex)
        half = grid.n // 2
        for (a, b), val in modes.items():
            if not (-half <= a <= half - 1 and -half <= b <= half - 1):
                raise ConfigurationError(f"mode {(a, b)} outside grid n={grid.n}")
            c[a % grid.n, b % grid.n] = val
        return cls(grid, c)

    @property
    def mean(self) -> complex:
        return self.coeffs[0, 0]

    def hermitian_residual(self) -> float:
        c = self.coeffs
        mirrored = np.roll(c[::-1, ::-1], shift=(1, 1), axis=(0, 1)).conj()
        return float(np.max(np.abs(c - mirrored)))

    def __add__(self, other: "SpectrumField") -> "SpectrumField":
        _check_same_grid(self, other)
        return SpectrumField(self.grid, self.coeffs + other.coeffs)

    def __sub__(self, other: "SpectrumField") -> "SpectrumField":
        _check_same_grid(self, other)
        return SpectrumField(self.grid, self.coeffs - other.coeffs)

    def __mul__(self, scalar: float) -> "SpectrumField":
        return SpectrumField(self.grid, self.coeffs * scalar)

    __rmul__ = __mul__

    def __neg__(self) -> "SpectrumField":
        return SpectrumField(self.grid, -self.coeffs)


@dataclass(frozen=True)
class PhysicalField:
    """Real values on the n x n collocation lattice."""

    grid: Grid2D
    values: np.ndarray

    def __post_init__(self):
        arr = np.array(self.values, dtype=float)
        if arr.shape != (self.grid.n, self.grid.n):
            raise ConfigurationError(
                f"value array has shape {arr.shape}, expected "
                f"({self.grid.n}, {self.grid.n})")
        if not np.all(np.isfinite(arr)):
            raise ConfigurationError("physical field contains NaN or Inf")
        arr.setflags(write=False)
        object.__setattr__(self, "values", arr)


def transform(field):
    """FFT between the two representations.  `transform(transform(f))`
    reproduces `f` up to rounding."""
    if isinstance(field, SpectrumField):
        return PhysicalField(field.grid, field.grid.to_phys(field.coeffs))
    if isinstance(field, PhysicalField):
        return SpectrumField(field.grid, field.grid.to_spec(field.values))
    raise ConfigurationError(f"cannot transform object of type {type(field)}")


def apply_multiplier(field: SpectrumField, symbol: Multiplier) -> SpectrumField:
    return SpectrumField(field.grid,
                         field.grid.multiplier_array(symbol) * field.coeffs)


def dealias(field: SpectrumField) -> SpectrumField:
    """Zero every mode with max(|k1|, |k2|) > n/3 (2/3 rule)."""
    return SpectrumField(field.grid,
                         np.where(field.grid.dealias_mask, field.coeffs, 0.0))


def _mode_matrix(coords: np.ndarray, kvals: np.ndarray) -> np.ndarray:
    """exp(i * coords[p] * kvals[j]) built by repeated multiplication
    (integer wavenumbers), cheaper than a dense exp call."""
    kmax = int(np.max(np.abs(kvals))) if kvals.size else 0
    base = np.exp(1j * coords)
    powers = np.empty((coords.size, kmax + 1), dtype=complex)
    powers[:, 0] = 1.0
    if kmax > 0:
        np.cumprod(np.broadcast_to(base[:, None], (coords.size, kmax)),
                   axis=1, out=powers[:, 1:])
    out = np.empty((coords.size, kvals.size), dtype=complex)
    for j, k in enumerate(kvals):
        out[:, j] = powers[:, k] if k >= 0 else powers[:, -k].conj()
    return out


def eval_spectra(grid: Grid2D, coeff_stack: np.ndarray,
                 points: np.ndarray, chunk: int = 8192) -> np.ndarray:
    """Evaluate a stack of spectra at scattered points by direct summation
    of the trigonometric polynomial.

    coeff_stack has shape (nf, n, n) (or (n, n) for a single field), points
    has shape (p, 2).  Returns real values of shape (nf, p).  Only the
    rectangular band actually populated by nonzero coefficients enters the
    sum, so dealiased fields evaluate at band-limited cost.
    """
    single = coeff_stack.ndim == 2
    stack = coeff_stack[None] if single else coeff_stack
    points = np.asarray(points, dtype=float).reshape(-1, 2)
    p = points.shape[0]
    nf = stack.shape[0]
    out = np.zeros((nf, p))
    if p == 0:
        return out[0] if single else out

    occupied = np.abs(stack).max(axis=0) > 0.0
    rows = np.flatnonzero(occupied.any(axis=1))
    cols = np.flatnonzero(occupied.any(axis=0))
    if rows.size == 0:
        return out[0] if single else out
    sub = stack[:, rows[:, None], cols[None, :]]           # (nf, b1, b2)
    kr = grid.k1[rows]
    kc = grid.k1[cols]

    for start in range(0, p, chunk):
        sl = slice(start, min(start + chunk, p))
        e1 = _mode_matrix(points[sl, 0], kr)                # (pc, b1)
        e2 = _mode_matrix(points[sl, 1], kc)                # (pc, b2)
        partial = np.tensordot(e1, sub, axes=([1], [1]))    # (pc, nf, b2)
        out[:, sl] = np.einsum("pfb,pb->fp", partial, e2).real
    return out[0] if single else out


def interpolate_at(field: SpectrumField, points) -> np.ndarray:
    """Exact trigonometric-polynomial evaluation sum_k c(k) exp(i k.x) at
    the given (x, y) points; empty input gives an empty array."""
    pts = np.asarray(points, dtype=float)
    if pts.size == 0:
        return np.zeros(0)
    return eval_spectra(field.grid, field.coeffs, pts.reshape(-1, 2))
