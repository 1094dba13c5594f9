"""Finite-dimensional conjugate-point construction in the projective
unitary isometry group of complex projective space.

The two-parameter family gamma(s, t) = A(s) B(t) A(s)^{-1} is built from
2 x 2 trigonometric blocks; its velocity gamma_t gamma^{-1} is a constant
skew-Hermitian matrix (a Killing generator, hence a stationary geodesic),
and the variation field J(t) = d/ds gamma(s, t)|_{s=0} vanishes at t = 0 and
t = 2 pi, exhibiting a conjugate pair at parameter distance 2 pi.  Matrices
that differ by a unit scalar represent the same projective isometry, so
comparisons are made modulo a best-fit global phase.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ConfigurationError, NumericalError
from .fields import SymplecticVectorField, h1_norm
from .geodesic import rhs_direct
from .spectral import Grid2D, SpectrumField


def _block2(s: float) -> np.ndarray:
    return np.array([[1j * np.cos(s), np.sin(s)],
                     [np.sin(s), 1j * np.cos(s)]])


def _dblock2(s: float) -> np.ndarray:
    return np.array([[-1j * np.sin(s), np.cos(s)],
                     [np.cos(s), -1j * np.sin(s)]])


def _assemble(blocks: list[np.ndarray]) -> np.ndarray:
    size = sum(b.shape[0] for b in blocks)
    out = np.zeros((size, size), dtype=complex)
    pos = 0
    for b in blocks:
        k = b.shape[0]
        out[pos:pos + k, pos:pos + k] = b
        pos += k
    return out


@dataclass(frozen=True)
class UnitaryPath:
    """Closures assembling A(s), B(t) and their parameter derivatives for
    the (n+1) x (n+1) projective-unitary family; the block layout dispatches
    on the parity of n."""

    n: int

    def __post_init__(self):
        if self.n < 2:
            raise ConfigurationError(
                f"the construction requires n >= 2, got {self.n}")

    @property
    def size(self) -> int:
        return self.n + 1

    def a_matrix(self, s: float) -> np.ndarray:
        i1 = np.array([[1j]])
        if self.n % 2 == 0:
            blocks = [i1] + [_block2(s)] * (self.n // 2)
        else:
            blocks = [i1] + [_block2(s)] * ((self.n - 1) // 2) + [i1]
        return _assemble(blocks)

    def da_matrix(self, s: float) -> np.ndarray:
        z1 = np.array([[0.0j]])
        if self.n % 2 == 0:
            blocks = [z1] + [_dblock2(s)] * (self.n // 2)
        else:
            blocks = [z1] + [_dblock2(s)] * ((self.n - 1) // 2) + [z1]
        return _assemble(blocks)

    def b_matrix(self, t: float) -> np.ndarray:
        i1 = np.array([[1j]])
        if self.n % 2 == 0:
            blocks = [_block2(t)] * (self.n // 2) + [i1]
        else:
            blocks = [_block2(t)] * ((self.n - 1) // 2) + [1j * np.eye(2)]
        return _assemble(blocks)

    def db_matrix(self, t: float) -> np.ndarray:
        z2 = np.zeros((2, 2), dtype=complex)
        if self.n % 2 == 0:
            blocks = [_dblock2(t)] * (self.n // 2) + [np.array([[0.0j]])]
        else:
            blocks = [_dblock2(t)] * ((self.n - 1) // 2) + [z2]
        return _assemble(blocks)

    def gamma(self, s: float, t: float) -> np.ndarray:
        a = self.a_matrix(s)
        return a @ self.b_matrix(t) @ a.conj().T

    def unitarity_residual(self, s: float, t: float) -> float:
        gam = self.gamma(s, t)
        return float(np.max(np.abs(gam.conj().T @ gam - np.eye(self.size))))


def build_path(n: int) -> UnitaryPath:
    """Two-parameter variation of projective isometries in dimension n + 1."""
    return UnitaryPath(n)


def velocity_field(path: UnitaryPath, s: float, t: float) -> np.ndarray:
    """gamma_t gamma^{-1} by exact differentiation of the trigonometric
    entries; asserted skew-Hermitian."""
    a = path.a_matrix(s)
    gamma_t = a @ path.db_matrix(t) @ a.conj().T
    gamma_inv = path.gamma(s, t).conj().T       # unitary inverse
    v = gamma_t @ gamma_inv
    skew = float(np.max(np.abs(v + v.conj().T)))
    if skew > 1e-12:
        raise NumericalError(
            f"velocity sample is not skew-Hermitian (residual {skew:.3e})")
    return v


def variation_field(path: UnitaryPath, t: float) -> np.ndarray:
    """J(t) = d/ds gamma(s, t)|_{s=0}, by the product rule with the exact
    derivative of A (and d(A^{-1}) = -A^{-1} A' A^{-1})."""
    a0 = path.a_matrix(0.0)
    da0 = path.da_matrix(0.0)
    b = path.b_matrix(t)
    a0inv = a0.conj().T
    return da0 @ b @ a0inv - a0 @ b @ a0inv @ da0 @ a0inv


def variation_field_fd(path: UnitaryPath, t: float,
                       eps: float = 1e-5) -> np.ndarray:
    """Central finite difference of gamma in s, for cross-checking the
    analytic derivative."""
    return (path.gamma(eps, t) - path.gamma(-eps, t)) / (2 * eps)


def align_phase(x: np.ndarray, y: np.ndarray) -> complex:
    """Unit scalar c minimising ||c x - y||_F (projective identification)."""
    inner = np.sum(x.conj() * y)
    if abs(inner) == 0.0:
        return 1.0 + 0.0j
    return inner / abs(inner)


def reference_variation(path: UnitaryPath, t: float) -> np.ndarray:
    """Closed-form block pattern of the variation field for even n: the
    alternating diag(-sin t, sin t) blocks along the second superdiagonal
    and the i(1 - cos t) entry in the terminal corner, antisymmetrised.
    Matches `variation_field` up to a global unit phase."""
    if path.n % 2 != 0:
        raise ConfigurationError("the reference block pattern applies to even n")
    n = path.n
    out = np.zeros((n + 1, n + 1), dtype=complex)
    for m in range(n - 1):
        out[m, m + 2] = -np.sin(t) if m % 2 == 0 else np.sin(t)
        out[m + 2, m] = -out[m, m + 2]
    out[n - 1, n] = 1j * (1.0 - np.cos(t))
    out[n, n - 1] = -out[n - 1, n]
    return out


def reference_form_residual(path: UnitaryPath, t: float) -> float:
    """Distance between the analytic variation field and the closed-form
    block pattern after best-fit phase alignment."""
    j = variation_field(path, t)
    ref = reference_variation(path, t)
    scale = max(np.linalg.norm(ref), 1e-30)
    c = align_phase(j, ref)
    return float(np.linalg.norm(c * j - ref) / scale)


def killing_stationarity_torus(h, n: int = 16) -> float:
    """H1 norm of the geodesic tendency of a constant (Killing) field on the
    flat torus; zero because constants generate isometric translations."""
    grid = Grid2D(n)
    v = SymplecticVectorField(SpectrumField.zeros(grid), np.asarray(h, float))
    return h1_norm(rhs_direct(v))
