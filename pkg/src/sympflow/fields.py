"""Divergence-free vector fields on the torus in stream-function form.

A tangent vector at the identity is v = J grad(f) + h with f a mean-zero
stream function, h a constant (harmonic) component, and J the 90-degree
rotation J(a, b) = (b, -a).  This J satisfies the compatibility identity
omega(v, w) = g(v, J w) for omega = dx ^ dy, which fixes every sign below.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ConfigurationError
from .spectral import TWO_PI, Grid2D, SpectrumField, _check_same_grid


# ---------------------------------------------------------------------------
# array-level kernels (broadcast over arbitrary leading axes)

def velocity_coeffs(grid: Grid2D, stream: np.ndarray,
                    harmonic: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Coefficients of J grad(f) + h: (df/dy, -df/dx) plus the constant."""
    u1 = 1j * grid.ky * stream
    u2 = -1j * grid.kx * stream
    u1[..., 0, 0] += harmonic[..., 0]
    u2[..., 0, 0] += harmonic[..., 1]
    return u1, u2


def project_coeffs(grid: Grid2D, u1: np.ndarray,
                   u2: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """L2-orthogonal projection of a velocity spectrum onto stream+harmonic
    form; returns (stream coefficients, harmonic components)."""
    ksq = np.where(grid.ksq > 0, grid.ksq, 1.0)
    stream = -1j * (grid.ky * u1 - grid.kx * u2) / ksq
    stream[..., 0, 0] = 0.0
    harmonic = np.stack([u1[..., 0, 0].real, u2[..., 0, 0].real], axis=-1)
    return stream, harmonic


def h1_pairs(grid: Grid2D, s1: np.ndarray, h1: np.ndarray,
             s2: np.ndarray, h2: np.ndarray) -> np.ndarray:
    """H1 inner products between two stacks of fields: result[i, j] =
    <(s1[i], h1[i]), (s2[j], h2[j])>_{H1}."""
    w = (1.0 + grid.ksq) * grid.ksq
    cross = np.einsum("iab,jab->ij", s1 * w, s2.conj()).real
    return TWO_PI ** 2 * (cross + h1 @ h2.T)


# ---------------------------------------------------------------------------
# public types and operations

@dataclass(frozen=True)
class SymplecticVectorField:
    """Symplectic (area-preserving) tangent vector: stream spectrum plus
    constant harmonic part."""

    stream: SpectrumField
    harmonic: np.ndarray

    def __post_init__(self):
        h = np.array(self.harmonic, dtype=float).reshape(2)
        h.setflags(write=False)
        object.__setattr__(self, "harmonic", h)
        if self.stream.coeffs[0, 0] != 0:
            raise ConfigurationError(
                "stream function must be mean-zero (coeff(0,0) == 0)")

    @property
    def grid(self) -> Grid2D:
        return self.stream.grid

    @classmethod
    def zero(cls, grid: Grid2D) -> "SymplecticVectorField":
        return cls(SpectrumField.zeros(grid), np.zeros(2))

    @classmethod
    def from_stream(cls, stream: SpectrumField,
                    harmonic=(0.0, 0.0)) -> "SymplecticVectorField":
        c = stream.coeffs.copy()
        c[0, 0] = 0.0
        return cls(SpectrumField(stream.grid, c), np.asarray(harmonic, float))

    def __add__(self, other: "SymplecticVectorField"):
        _check_same_grid(self, other)
        return SymplecticVectorField(self.stream + other.stream,
                                     self.harmonic + other.harmonic)

    def __sub__(self, other: "SymplecticVectorField"):
        _check_same_grid(self, other)
        return SymplecticVectorField(self.stream - other.stream,
                                     self.harmonic - other.harmonic)

    def __mul__(self, scalar: float):
        return SymplecticVectorField(self.stream * scalar,
                                     self.harmonic * scalar)

    __rmul__ = __mul__

    def __neg__(self):
        return SymplecticVectorField(-self.stream, -self.harmonic)


@dataclass(frozen=True)
class VelocityField:
    """Generic (not necessarily symplectic) velocity spectrum, one
    SpectrumField per component."""

    u1: SpectrumField
    u2: SpectrumField

    def __post_init__(self):
        _check_same_grid(self.u1, self.u2)

    @property
    def grid(self) -> Grid2D:
        return self.u1.grid

    def __add__(self, other: "VelocityField"):
        return VelocityField(self.u1 + other.u1, self.u2 + other.u2)

    def __sub__(self, other: "VelocityField"):
        return VelocityField(self.u1 - other.u1, self.u2 - other.u2)

    def __mul__(self, scalar: float):
        return VelocityField(self.u1 * scalar, self.u2 * scalar)

    __rmul__ = __mul__


def to_velocity(v: SymplecticVectorField) -> VelocityField:
    """Velocity components of v = J grad(f) + h = (df/dy + h1, -df/dx + h2)."""
    u1, u2 = velocity_coeffs(v.grid, v.stream.coeffs, v.harmonic)
    return VelocityField(SpectrumField(v.grid, u1), SpectrumField(v.grid, u2))


def velocity_values(v: SymplecticVectorField) -> tuple[np.ndarray, np.ndarray]:
    """Velocity components sampled on the collocation lattice."""
    u1, u2 = velocity_coeffs(v.grid, v.stream.coeffs, v.harmonic)
    return v.grid.to_phys(u1), v.grid.to_phys(u2)


def project_P(u: VelocityField) -> SymplecticVectorField:
    """L2-orthogonal projection onto symplectic fields.  Per mode k != 0 the
    coefficient pair is projected onto the line spanned by i J k; the k = 0
    coefficient becomes the harmonic part.  Idempotent and self-adjoint."""
    stream, harmonic = project_coeffs(u.grid, u.u1.coeffs, u.u2.coeffs)
    return SymplecticVectorField(SpectrumField(u.grid, stream), harmonic)


def project_with_residual(u: VelocityField) -> tuple[SymplecticVectorField, float]:
    """Projection plus the relative L2 norm of the discarded component."""
    p = project_P(u)
    back = to_velocity(p)
    num = np.sum(np.abs(u.u1.coeffs - back.u1.coeffs) ** 2
                 + np.abs(u.u2.coeffs - back.u2.coeffs) ** 2)
    den = np.sum(np.abs(u.u1.coeffs) ** 2 + np.abs(u.u2.coeffs) ** 2)
    return p, float(np.sqrt(num / den)) if den > 0 else 0.0


def h1_inner(u: SymplecticVectorField, v: SymplecticVectorField) -> float:
    """Right-invariant H1 metric at the identity,
    <u, v> = int g((1 + Lap) u, v) dmu
           = (2 pi)^2 [h_u . h_v + sum_k (1 + |k|^2) |k|^2 fu(k) conj(fv(k))].
    """
    _check_same_grid(u, v)
    grid = u.grid
    w = (1.0 + grid.ksq) * grid.ksq
    s = np.sum(w * u.stream.coeffs * v.stream.coeffs.conj()).real
    return float(TWO_PI ** 2 * (s + u.harmonic @ v.harmonic))


def h1_norm(v: SymplecticVectorField) -> float:
    return float(np.sqrt(max(h1_inner(v, v), 0.0)))


def l2_inner_velocity(a: VelocityField, b: VelocityField) -> float:
    """int g(a, b) dmu for generic velocity fields."""
    s = np.sum(a.u1.coeffs * b.u1.coeffs.conj()
               + a.u2.coeffs * b.u2.coeffs.conj()).real
    return float(TWO_PI ** 2 * s)


def casimir_q(v: SymplecticVectorField) -> SpectrumField:
    """Transported density q = Lap (1 + Lap) f, the H1 analogue of vorticity;
    q(k) = |k|^2 (1 + |k|^2) f(k)."""
    grid = v.grid
    return SpectrumField(grid, grid.ksq * (1.0 + grid.ksq) * v.stream.coeffs)


def stream_from_casimir(q: SpectrumField) -> SpectrumField:
    """Invert q = Lap (1 + Lap) f on the mean-zero part."""
    grid = q.grid
    w = grid.ksq * (1.0 + grid.ksq)
    c = np.where(w > 0, q.coeffs / np.where(w > 0, w, 1.0), 0.0)
    return SpectrumField(grid, c)
