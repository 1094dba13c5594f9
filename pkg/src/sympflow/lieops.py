"""Adjoint and coadjoint calculus on the symplectic tangent space.

Sign conventions:

* ad(v, u) = J grad(omega(v, u)), which for stream fields equals
  J grad({f, g}) with the canonical Poisson bracket; this equals minus the
  vector-field Lie bracket, ad(v, u) = -[v, u] with [a, b] = grad_a b - grad_b a.
* ad_star is the H1 adjoint of ad:  <ad_star(v, w), x>_{H1} = <w, ad(v, x)>_{H1},
  realised by the closed form (1 + Lap)^{-1} P((1 + Lap) Lap g . Jv) where g is
  the stream function of w.
* Ad along a flow map eta acts by Ad_eta w = (D eta . w) o eta^{-1}; its H1
  adjoint is assembled as a matrix on a Galerkin basis.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass
from functools import cached_property

import numpy as np

from .errors import ConfigurationError, NumericalError
from .fields import (SymplecticVectorField, VelocityField, h1_pairs,
                     project_coeffs, project_with_residual, casimir_q,
                     velocity_coeffs, to_velocity)
from .spectral import TWO_PI, Grid2D, SpectrumField, eval_spectra, _check_same_grid

NEWTON_MAX_ITER = 20
NEWTON_TOL = 1e-12


class AdDirection(enum.Enum):
    FORWARD = "forward"    # Ad_eta
    INVERSE = "inverse"    # Ad_{eta^{-1}}


def ad(v: SymplecticVectorField, u: SymplecticVectorField) -> SymplecticVectorField:
    """Algebra adjoint ad_v u = J grad(omega(v, u)).

    omega(v, u) is formed pointwise and dealiased; the result is a pure
    stream field (the gradient of a scalar has zero mean)."""
    _check_same_grid(v, u)
    grid = v.grid
    v1c, v2c = velocity_coeffs(grid, v.stream.coeffs, v.harmonic)
    u1c, u2c = velocity_coeffs(grid, u.stream.coeffs, u.harmonic)
    phys = grid.to_phys(np.stack([v1c, v2c, u1c, u2c]))
    w = phys[0] * phys[3] - phys[1] * phys[2]
    s = grid.to_spec(w)
    s[0, 0] = 0.0
    s = np.where(grid.dealias_mask, s, 0.0)
    return SymplecticVectorField(SpectrumField(grid, s), np.zeros(2))


def lie_bracket(v: SymplecticVectorField, u: SymplecticVectorField) -> SymplecticVectorField:
    """Vector-field bracket [v, u] = grad_v u - grad_u v = -ad(v, u)."""
    return -1.0 * ad(v, u)


def ad_star(v: SymplecticVectorField, w: SymplecticVectorField) -> SymplecticVectorField:
    """H1 algebra coadjoint, -(1 + Lap)^{-1} P(Lap (1 + Lap) g . Jv) for
    w = J grad(g) + h.

    The leading minus is forced by the positive-Laplacian convention: with
    Lap >= 0, integrating by parts gives
    <w, ad_v x>_{H1} = int Lap(1+Lap)g . omega(v, x) dmu
                     = -int g(Lap(1+Lap)g . Jv, x) dmu,
    and the adjoint identity <ad_star(v, w), x>_{H1} = <w, ad(v, x)>_{H1}
    then holds exactly on band-limited data (it is asserted by the test
    suite at the rounding level)."""
    _check_same_grid(v, w)
    grid = v.grid
    q = casimir_q(w).coeffs
    v1c, v2c = velocity_coeffs(grid, v.stream.coeffs, v.harmonic)
    phys = grid.to_phys(np.stack([q, v1c, v2c]))
    s, jv1, jv2 = phys[0], phys[2], -phys[1]
    x = grid.to_spec(np.stack([-s * jv1, -s * jv2]))
    x = np.where(grid.dealias_mask, x, 0.0)
    stream, harmonic = project_coeffs(grid, x[0], x[1])
    stream = stream / (1.0 + grid.ksq)
    return SymplecticVectorField(SpectrumField(grid, stream), harmonic)


def K_op(v: SymplecticVectorField, w: SymplecticVectorField) -> SymplecticVectorField:
    """K_v w = ad_star(w, v); compact in w for fixed v."""
    return ad_star(w, v)


# ---------------------------------------------------------------------------
# flow maps

@dataclass(frozen=True)
class FlowMap:
    """Lagrangian configuration: particle positions eta(x_j) (unwrapped, so
    winding is retained), Jacobian matrices D eta(x_j), and the time stamp.
    The displacement eta - id is periodic, which makes spectra of the map
    and its Jacobian available for composition."""

    grid: Grid2D
    positions: np.ndarray      # (2, n, n), unwrapped
    jacobian: np.ndarray       # (2, 2, n, n)
    time: float

    def __post_init__(self):
        pos = np.array(self.positions, dtype=float)
        jac = np.array(self.jacobian, dtype=float)
        n = self.grid.n
        if pos.shape != (2, n, n) or jac.shape != (2, 2, n, n):
            raise ConfigurationError("flow map arrays have wrong shape")
        pos.setflags(write=False)
        jac.setflags(write=False)
        object.__setattr__(self, "positions", pos)
        object.__setattr__(self, "jacobian", jac)

    @classmethod
    def identity(cls, grid: Grid2D) -> "FlowMap":
        X, Y = grid.mesh
        pos = np.stack([X, Y])
        jac = np.zeros((2, 2, grid.n, grid.n))
        jac[0, 0] = 1.0
        jac[1, 1] = 1.0
        return cls(grid, pos, jac, 0.0)

    @cached_property
    def displacement_spectra(self) -> np.ndarray:
        X, Y = self.grid.mesh
        return self.grid.to_spec(self.positions - np.stack([X, Y]))

    @cached_property
    def jacobian_minus_id_spectra(self) -> np.ndarray:
        dev = self.jacobian.reshape(4, self.grid.n, self.grid.n).copy()
        dev[0] -= 1.0
        dev[3] -= 1.0
        return self.grid.to_spec(dev)

    def det_jacobian(self) -> np.ndarray:
        j = self.jacobian
        return j[0, 0] * j[1, 1] - j[0, 1] * j[1, 0]

    def max_det_deviation(self) -> float:
        return float(np.max(np.abs(self.det_jacobian() - 1.0)))

    @cached_property
    def inverse_positions(self) -> np.ndarray:
        """Newton solve of eta(xi) = x for every lattice point x, using
        trigonometric interpolation of the displacement and Jacobian."""
        grid = self.grid
        target = grid.lattice_points                      # (p, 2)
        xi = target.copy()
        stack = np.concatenate([self.displacement_spectra,
                                self.jacobian_minus_id_spectra])
        worst = np.inf
        for _ in range(NEWTON_MAX_ITER):
            vals = eval_spectra(grid, stack, xi)          # (6, p)
            r1 = xi[:, 0] + vals[0] - target[:, 0]
            r2 = xi[:, 1] + vals[1] - target[:, 1]
            r1 = (r1 + np.pi) % TWO_PI - np.pi
            r2 = (r2 + np.pi) % TWO_PI - np.pi
            worst = max(np.max(np.abs(r1)), np.max(np.abs(r2)))
            if worst < NEWTON_TOL:
                break
            a = 1.0 + vals[2]
            b = vals[3]
            c = vals[4]
            d = 1.0 + vals[5]
            det = a * d - b * c
            xi[:, 0] -= (d * r1 - b * r2) / det
            xi[:, 1] -= (-c * r1 + a * r2) / det
        else:
            raise NumericalError(
                "flow-map inversion did not converge", time=self.time,
                residual=worst)
        return xi.reshape(grid.n, grid.n, 2).transpose(2, 0, 1)


def _velocity_stack(flds: list[SymplecticVectorField]) -> np.ndarray:
    grid = flds[0].grid
    out = np.empty((2 * len(flds), grid.n, grid.n), dtype=complex)
    for j, w in enumerate(flds):
        u1, u2 = velocity_coeffs(grid, w.stream.coeffs, w.harmonic)
        out[2 * j] = u1
        out[2 * j + 1] = u2
    return out


def _ad_group_many(eta: FlowMap, flds: list[SymplecticVectorField],
                   direction: AdDirection) -> list[VelocityField]:
    """Push a batch of fields through Ad_eta (FORWARD) or Ad_{eta^{-1}}
    (INVERSE); all interpolations share one evaluation pass."""
    grid = eta.grid
    stack = _velocity_stack(flds)
    if direction is AdDirection.INVERSE:
        # Ad_{eta^{-1}} w = (D eta)^{-1} (w o eta): no map inversion needed.
        pts = eta.positions.reshape(2, -1).T
        vals = eval_spectra(grid, stack, pts)
        j = eta.jacobian.reshape(2, 2, -1)
        det = j[0, 0] * j[1, 1] - j[0, 1] * j[1, 0]
        m11, m12 = j[1, 1] / det, -j[0, 1] / det
        m21, m22 = -j[1, 0] / det, j[0, 0] / det
    elif direction is AdDirection.FORWARD:
        xi = eta.inverse_positions.reshape(2, -1).T
        jdev = eval_spectra(grid, eta.jacobian_minus_id_spectra, xi)
        vals = eval_spectra(grid, stack, xi)
        m11, m12 = 1.0 + jdev[0], jdev[1]
        m21, m22 = jdev[2], 1.0 + jdev[3]
    else:
        raise ConfigurationError(f"unknown Ad direction {direction!r}")

    out = []
    for jf in range(len(flds)):
        w1, w2 = vals[2 * jf], vals[2 * jf + 1]
        r1 = (m11 * w1 + m12 * w2).reshape(grid.n, grid.n)
        r2 = (m21 * w1 + m22 * w2).reshape(grid.n, grid.n)
        spec = grid.to_spec(np.stack([r1, r2]))
        out.append(VelocityField(SpectrumField(grid, spec[0]),
                                 SpectrumField(grid, spec[1])))
    return out


def Ad_group(eta: FlowMap, w: SymplecticVectorField,
             direction: AdDirection = AdDirection.FORWARD) -> VelocityField:
    """Group adjoint along a flow map.

    FORWARD returns (D eta . w) o eta^{-1} sampled on the lattice, with
    eta^{-1} obtained by Newton iteration; INVERSE returns
    (D eta)^{-1} (w o eta), which needs no inversion.  The result is a plain
    velocity field; re-project with `project_with_residual` when a symplectic
    element is required."""
    return _ad_group_many(eta, [w], direction)[0]


def _ad_star_many(eta: FlowMap, flds: list[SymplecticVectorField],
                  direction: AdDirection) -> list[SymplecticVectorField]:
    """H1 group coadjoint applied to fields (not a basis truncation).

    Since the flow is area preserving, the L2 adjoint of u -> (D eta . u) o
    eta^{-1} is Y -> (D eta)^T (Y o eta), and of u -> (D eta)^{-1} (u o eta)
    it is Y -> ((D eta)^{-T} o eta^{-1}) (Y o eta^{-1}).  The H1 coadjoint
    conjugates this by the inertia operator:
    Ad_star w = (1 + Lap)^{-1} P [pullback of (1 + Lap) w]."""
    grid = eta.grid
    one_lap = 1.0 + grid.ksq
    stack = np.empty((2 * len(flds), grid.n, grid.n), dtype=complex)
    for j, w in enumerate(flds):
        u1, u2 = velocity_coeffs(grid, one_lap * w.stream.coeffs, w.harmonic)
        stack[2 * j] = u1
        stack[2 * j + 1] = u2
    if direction is AdDirection.FORWARD:
        pts = eta.positions.reshape(2, -1).T
        vals = eval_spectra(grid, stack, pts)
        j = eta.jacobian.reshape(2, 2, -1)
        m11, m12 = j[0, 0], j[1, 0]          # D eta^T
        m21, m22 = j[0, 1], j[1, 1]
    elif direction is AdDirection.INVERSE:
        xi = eta.inverse_positions.reshape(2, -1).T
        jdev = eval_spectra(grid, eta.jacobian_minus_id_spectra, xi)
        vals = eval_spectra(grid, stack, xi)
        a, b = 1.0 + jdev[0], jdev[1]
        c, d = jdev[2], 1.0 + jdev[3]
        det = a * d - b * c                   # (D eta)^{-T} o eta^{-1}
        m11, m12 = d / det, -c / det
        m21, m22 = -b / det, a / det
    else:
        raise ConfigurationError(f"unknown Ad direction {direction!r}")
    out = []
    for jf in range(len(flds)):
        y1, y2 = vals[2 * jf], vals[2 * jf + 1]
        r1 = (m11 * y1 + m12 * y2).reshape(grid.n, grid.n)
        r2 = (m21 * y1 + m22 * y2).reshape(grid.n, grid.n)
        spec = grid.to_spec(np.stack([r1, r2]))
        stream, harm = project_coeffs(grid, spec[0], spec[1])
        out.append(SymplecticVectorField(
            SpectrumField(grid, stream / one_lap), harm))
    return out


def Ad_star_field(eta: FlowMap, w: SymplecticVectorField,
                  direction: AdDirection = AdDirection.FORWARD
                  ) -> SymplecticVectorField:
    """Field-level H1 group coadjoint (FORWARD: adjoint of Ad_eta)."""
    return _ad_star_many(eta, [w], direction)[0]


# ---------------------------------------------------------------------------
# Galerkin truncation

def _mode_order(kmax: int) -> list[tuple[int, int]]:
    reps = []
    for a in range(-kmax, kmax + 1):
        for b in range(-kmax, kmax + 1):
            if (a, b) == (0, 0):
                continue
            if a > 0 or (a == 0 and b > 0):   # one representative per +-k pair
                reps.append((a, b))
    reps.sort(key=lambda k: (k[0] ** 2 + k[1] ** 2, k[0], k[1]))
    return reps


@dataclass(frozen=True)
class GalerkinBasis:
    """H1-orthonormal truncation of the tangent space: the two harmonic
    directions followed by cos/sin stream modes in increasing |k|^2."""

    grid: Grid2D
    elements: tuple[SymplecticVectorField, ...]
    labels: tuple[str, ...]
    gram: np.ndarray

    @classmethod
    def build(cls, grid: Grid2D, m: int) -> "GalerkinBasis":
        if m < 2 or m % 2 != 0:
            raise ConfigurationError(f"basis dimension must be even and >= 2, got {m}")
        n_pairs = (m - 2) // 2
        reps = _mode_order(grid.n // 2 - 1)[:n_pairs]
        if len(reps) < n_pairs:
            raise ConfigurationError(f"grid n={grid.n} too small for m={m}")
        return cls.from_modes(grid, reps, include_harmonic=True)

    @classmethod
    def from_modes(cls, grid: Grid2D, reps: list[tuple[int, int]],
                   include_harmonic: bool = True) -> "GalerkinBasis":
        """Basis from explicit mode representatives (one per +-k pair),
        each contributing a cos and a sin stream element."""
        elements: list[SymplecticVectorField] = []
        labels: list[str] = []
        if include_harmonic:
            elements += [
                SymplecticVectorField(SpectrumField.zeros(grid),
                                      np.array([1.0, 0.0]) / TWO_PI),
                SymplecticVectorField(SpectrumField.zeros(grid),
                                      np.array([0.0, 1.0]) / TWO_PI),
            ]
            labels += ["h1", "h2"]
        for (a, b) in reps:
            ksq = float(a * a + b * b)
            if 3 * max(abs(a), abs(b)) > grid.n:
                raise ConfigurationError(
                    f"basis mode {(a, b)} falls outside the dealiasing band of n={grid.n}")
            scale = 1.0 / np.sqrt(TWO_PI ** 2 * (1.0 + ksq) * ksq / 2.0)
            cos_el = SpectrumField.from_modes(
                grid, {(a, b): 0.5 * scale, (-a, -b): 0.5 * scale})
            sin_el = SpectrumField.from_modes(
                grid, {(a, b): -0.5j * scale, (-a, -b): 0.5j * scale})
            elements.append(SymplecticVectorField(cos_el, np.zeros(2)))
            elements.append(SymplecticVectorField(sin_el, np.zeros(2)))
            labels.append(f"cos({a},{b})")
            labels.append(f"sin({a},{b})")
        streams = np.stack([e.stream.coeffs for e in elements])
        harms = np.stack([e.harmonic for e in elements])
        gram = h1_pairs(grid, streams, harms, streams, harms)
        try:
            np.linalg.cholesky(gram)
        except np.linalg.LinAlgError as exc:
            raise ConfigurationError("basis Gram matrix is not positive definite") from exc
        return cls(grid, tuple(elements), tuple(labels), gram)

    @property
    def dim(self) -> int:
        return len(self.elements)

    @cached_property
    def _streams(self) -> np.ndarray:
        return np.stack([e.stream.coeffs for e in self.elements])

    @cached_property
    def _harmonics(self) -> np.ndarray:
        return np.stack([e.harmonic for e in self.elements])

    def pairings(self, streams: np.ndarray, harmonics: np.ndarray) -> np.ndarray:
        """H1 pairings of the basis against a stack of fields: (m, nf)."""
        return h1_pairs(self.grid, self._streams, self._harmonics,
                        streams, harmonics)

    def coords(self, v: SymplecticVectorField) -> np.ndarray:
        b = self.pairings(v.stream.coeffs[None], v.harmonic[None])[:, 0]
        return np.linalg.solve(self.gram, b)

    def coords_many(self, flds: list[SymplecticVectorField]) -> np.ndarray:
        """Coordinate matrix whose column j holds the coordinates of flds[j]."""
        streams = np.stack([f.stream.coeffs for f in flds])
        harms = np.stack([f.harmonic for f in flds])
        return np.linalg.solve(self.gram, self.pairings(streams, harms))

    def from_coords(self, c: np.ndarray) -> SymplecticVectorField:
        streams = np.einsum("i,iab->ab", c, self._streams)
        harm = c @ self._harmonics
        return SymplecticVectorField(SpectrumField(self.grid, streams), harm)

    def norm_of_coords(self, c: np.ndarray) -> float:
        return float(np.sqrt(max(c @ self.gram @ c, 0.0)))


def ad_matrix(eta: FlowMap, basis: GalerkinBasis,
              direction: AdDirection) -> tuple[np.ndarray, float]:
    """Matrix of w -> P(Ad w) on the basis plus the worst projection
    residual encountered."""
    pushed = _ad_group_many(eta, list(basis.elements), direction)
    projected, residual = [], 0.0
    for u in pushed:
        p, r = project_with_residual(u)
        projected.append(p)
        residual = max(residual, r)
    return basis.coords_many(projected), residual


def Ad_star_matrix(eta: FlowMap, basis: GalerkinBasis,
                   direction: AdDirection = AdDirection.FORWARD) -> np.ndarray:
    """H1 adjoint of the projected group adjoint: G^{-1} A^T G, so that
    <Ad_star v, w>_{H1} = <v, Ad w>_{H1} holds on the truncated space."""
    a, _ = ad_matrix(eta, basis, direction)
    return np.linalg.solve(basis.gram, a.T @ basis.gram)


def ad_star_matrix_on_basis(v: SymplecticVectorField,
                            basis: GalerkinBasis) -> np.ndarray:
    """Matrix of w -> ad_star(v, w) on the basis."""
    return basis.coords_many([ad_star(v, e) for e in basis.elements])


def k_matrix(v: SymplecticVectorField, basis: GalerkinBasis) -> np.ndarray:
    """Matrix of w -> K_v w = ad_star(w, v) on the basis."""
    return basis.coords_many([ad_star(e, v) for e in basis.elements])
