"""Jacobi fields, the solution operator of the exponential map, and
conjugate-point detection.

A Jacobi field along a geodesic with velocity v(t) is carried as the pair
(y, z): y is the right-translated variation of the flow and z the velocity
variation, with

    y' = z - [v, y],      z' = -(1 + Lap)^{-1} P(flux(z, v) + flux(v, z)),

the z equation being the bilinear polarisation of the geodesic tendency.
Initial conditions are y(0) = 0, z(0) = w0.

The solution operator is assembled on a Galerkin basis in two independent
ways and compared in left-translated coordinates (the common pointwise
D eta factor is omitted; it is invertible and does not affect kernels):

* LINEARIZED: integrate the pair above for every basis column and record
  Ad_{eta(t)^{-1}} y(t);
* OMEGA_GAMMA: Omega_t = int_0^t Ad_{eta^{-1}} Ad*_{eta^{-1}} dtau by the
  trapezoidal rule, and Gamma_t from the causal Volterra equation
  W = Omega - int_0^t Ad_{eta^{-1}} K_v Ad_{eta} W dtau, stepped forward in
  time with the trapezoidal rule (the implicit last-node term is solved
  exactly, all earlier values are already known).
"""

from __future__ import annotations

import enum
import warnings
from dataclasses import dataclass
from functools import cached_property

import numpy as np

from .errors import ConfigurationError
from .fields import (SymplecticVectorField, h1_pairs, project_coeffs,
                     velocity_coeffs, project_with_residual)
from .geodesic import GeodesicState, Trajectory
from .lieops import (AdDirection, GalerkinBasis, K_op, _ad_group_many,
                     _ad_star_many)
from .spectral import Grid2D, SpectrumField


class PhiMethod(enum.Enum):
    LINEARIZED = "linearized"
    OMEGA_GAMMA = "omega_gamma"


@dataclass(frozen=True)
class JacobiState:
    """Right-translated Jacobi field y and velocity variation z at time t."""

    y: SymplecticVectorField
    z: SymplecticVectorField
    t: float

    @classmethod
    def initial(cls, w0: SymplecticVectorField) -> "JacobiState":
        return cls(SymplecticVectorField.zero(w0.grid), w0, 0.0)


# ---------------------------------------------------------------------------
# batched column dynamics

class _BackgroundCache:
    """Physical-space pieces of the background velocity needed by the
    polarised tendency, cached per stage time."""

    def __init__(self, traj: Trajectory):
        self.traj = traj
        self.grid = traj.grid
        self._store: dict[float, tuple] = {}

    def at(self, t: float) -> tuple:
        key = round(t, 12)
        if key not in self._store:
            grid = self.grid
            v = self.traj.velocity_at(t)
            v1c, v2c = velocity_coeffs(grid, v.stream.coeffs, v.harmonic)
            one_lap = 1.0 + grid.ksq
            ikx, iky = 1j * grid.kx, 1j * grid.ky
            stack = np.stack([
                v1c, v2c,
                ikx * (one_lap * v1c), iky * (one_lap * v1c),
                ikx * (one_lap * v2c), iky * (one_lap * v2c),
                grid.ksq * v1c, grid.ksq * v2c,
                ikx * v1c, iky * v1c, ikx * v2c, iky * v2c,
            ])
            self._store[key] = tuple(grid.to_phys(stack))
        return self._store[key]


def _columns_rhs(grid: Grid2D, cols: dict, bg: tuple,
                 use_dealias: bool = True) -> dict:
    """Tendency of the batched Jacobi columns against one background."""
    (v1, v2, d1Wv1, d2Wv1, d1Wv2, d2Wv2,
     Lv1, Lv2, d1v1, d2v1, d1v2, d2v2) = bg
    ys, yh, zs, zh = cols["ys"], cols["yh"], cols["zs"], cols["zh"]
    m = ys.shape[0]
    one_lap = 1.0 + grid.ksq
    ikx, iky = 1j * grid.kx, 1j * grid.ky

    z1c, z2c = velocity_coeffs(grid, zs, zh)
    y1c, y2c = velocity_coeffs(grid, ys, yh)
    big = np.concatenate([
        z1c, z2c,
        ikx * (one_lap * z1c), iky * (one_lap * z1c),
        ikx * (one_lap * z2c), iky * (one_lap * z2c),
        grid.ksq * z1c, grid.ksq * z2c,
        ikx * z1c, iky * z1c, ikx * z2c, iky * z2c,
        y1c, y2c,
    ])
    p = grid.to_phys(big)
    (z1, z2, d1Wz1, d2Wz1, d1Wz2, d2Wz2, Lz1, Lz2,
     d1z1, d2z1, d1z2, d2z2, y1, y2) = [p[i * m:(i + 1) * m] for i in range(14)]

    flux1 = (z1 * d1Wv1 + z2 * d2Wv1 + Lv1 * d1z1 + Lv2 * d1z2
             + v1 * d1Wz1 + v2 * d2Wz1 + Lz1 * d1v1 + Lz2 * d1v2)
    flux2 = (z1 * d1Wv2 + z2 * d2Wv2 + Lv1 * d2z1 + Lv2 * d2z2
             + v1 * d1Wz2 + v2 * d2Wz2 + Lz1 * d2v1 + Lz2 * d2v2)
    omega_vy = v1 * y2 - v2 * y1

    spec = grid.to_spec(np.concatenate([flux1, flux2, omega_vy]))
    if use_dealias:
        spec = np.where(grid.dealias_mask, spec, 0.0)
    f1, f2, w = spec[:m], spec[m:2 * m], spec[2 * m:]
    stream_flux, harm_flux = project_coeffs(grid, f1, f2)
    dzs = -stream_flux / one_lap
    dzh = -harm_flux
    # y' = z + ad(v, y): the bracket [v, y] equals -J grad(omega(v, y))
    w[:, 0, 0] = 0.0
    dys = zs + w
    dyh = zh.copy()
    return {"ys": dys, "yh": dyh, "zs": dzs, "zh": dzh}


def jacobi_rhs(state: JacobiState, background: GeodesicState,
               use_dealias: bool = True
               ) -> tuple[SymplecticVectorField, SymplecticVectorField]:
    """Single-column tendency (y', z') against a background state."""
    grid = state.y.grid
    v = background.v
    v1c, v2c = velocity_coeffs(grid, v.stream.coeffs, v.harmonic)
    one_lap = 1.0 + grid.ksq
    ikx, iky = 1j * grid.kx, 1j * grid.ky
    stack = np.stack([
        v1c, v2c,
        ikx * (one_lap * v1c), iky * (one_lap * v1c),
        ikx * (one_lap * v2c), iky * (one_lap * v2c),
        grid.ksq * v1c, grid.ksq * v2c,
        ikx * v1c, iky * v1c, ikx * v2c, iky * v2c,
    ])
    bg = tuple(grid.to_phys(stack))
    cols = {"ys": state.y.stream.coeffs[None], "yh": state.y.harmonic[None],
            "zs": state.z.stream.coeffs[None], "zh": state.z.harmonic[None]}
    d = _columns_rhs(grid, cols, bg, use_dealias)
    ydot = SymplecticVectorField(SpectrumField(grid, d["ys"][0]), d["yh"][0])
    zdot = SymplecticVectorField(SpectrumField(grid, d["zs"][0]), d["zh"][0])
    return ydot, zdot


class _ColumnIntegrator:
    """RK4 integrator for the batched Jacobi columns along a trajectory."""

    def __init__(self, traj: Trajectory, w0s: list[SymplecticVectorField],
                 dt: float | None = None):
        self.traj = traj
        self.grid = traj.grid
        self.dt = traj.config.dt if dt is None else dt
        self.cache = _BackgroundCache(traj)
        m = len(w0s)
        n = self.grid.n
        self.initial = {
            "ys": np.zeros((m, n, n), dtype=complex),
            "yh": np.zeros((m, 2)),
            "zs": np.stack([w.stream.coeffs for w in w0s]),
            "zh": np.stack([w.harmonic for w in w0s]),
        }

    def advance(self, cols: dict, t_from: float, t_to: float) -> dict:
        span = t_to - t_from
        if span <= 1e-14:
            return cols
        nsteps = max(1, int(np.ceil(span / self.dt - 1e-12)))
        h = span / nsteps
        t = t_from
        use_dealias = self.traj.config.dealias
        for _ in range(nsteps):
            k1 = _columns_rhs(self.grid, cols, self.cache.at(t), use_dealias)
            mid = {k: cols[k] + h / 2 * k1[k] for k in cols}
            k2 = _columns_rhs(self.grid, mid, self.cache.at(t + h / 2), use_dealias)
            mid = {k: cols[k] + h / 2 * k2[k] for k in cols}
            k3 = _columns_rhs(self.grid, mid, self.cache.at(t + h / 2), use_dealias)
            end = {k: cols[k] + h * k3[k] for k in cols}
            k4 = _columns_rhs(self.grid, end, self.cache.at(t + h), use_dealias)
            cols = {k: cols[k] + h / 6 * (k1[k] + 2 * k2[k] + 2 * k3[k] + k4[k])
                    for k in cols}
            t += h
        return cols

    def fields_y(self, cols: dict) -> list[SymplecticVectorField]:
        return [SymplecticVectorField(SpectrumField(self.grid, cols["ys"][j]),
                                      cols["yh"][j])
                for j in range(cols["ys"].shape[0])]


@dataclass(frozen=True)
class PhiMatrix:
    """Matrix of the solution operator (in left-translated, D eta - free
    coordinates) on a Galerkin basis at time t."""

    matrix: np.ndarray
    t: float
    gram: np.ndarray
    projection_residual: float = 0.0

    @cached_property
    def singular_values(self) -> np.ndarray:
        return np.linalg.svd(self.matrix, compute_uv=False)

    @property
    def sigma_min(self) -> float:
        return float(self.singular_values[-1])

    @property
    def sigma_max(self) -> float:
        return float(self.singular_values[0])

    @property
    def det_sign(self) -> float:
        return float(np.linalg.slogdet(self.matrix)[0])

    def adjoint_matrix(self) -> np.ndarray:
        """H1 adjoint G^{-1} M^T G."""
        return np.linalg.solve(self.gram, self.matrix.T @ self.gram)


def _check_basis_size(grid: Grid2D, basis: GalerkinBasis):
    resolved = int(grid.dealias_mask.sum())
    if basis.dim > resolved // 4:
        raise ConfigurationError(
            f"basis dimension {basis.dim} too large for grid n={grid.n} "
            f"({resolved} resolved modes)")


def _matrix_from_columns(integ: _ColumnIntegrator, basis: GalerkinBasis,
                         cols: dict, t: float) -> PhiMatrix:
    eta = integ.traj.flow_at(t)
    pushed = _ad_group_many(eta, integ.fields_y(cols), AdDirection.INVERSE)
    projected, worst = [], 0.0
    for u in pushed:
        p, r = project_with_residual(u)
        projected.append(p)
        worst = max(worst, r)
    return PhiMatrix(basis.coords_many(projected), t, basis.gram, worst)


def _node_integrands(state: GeodesicState,
                     basis: GalerkinBasis) -> tuple[np.ndarray, np.ndarray]:
    """Matrices of w -> Ad_{eta^{-1}} Ad*_{eta^{-1}} w (the Omega integrand)
    and w -> Ad_{eta^{-1}} K_v Ad_{eta} w (the Gamma kernel) at one node.

    The operator chains are composed on fields and projected onto the basis
    once at the end, so no intermediate truncation is introduced."""
    eta = state.eta
    if eta is None:
        raise ConfigurationError("trajectory was solved without flow tracking")
    elements = list(basis.elements)
    star = _ad_star_many(eta, elements, AdDirection.INVERSE)
    omega_cols = [project_with_residual(u)[0]
                  for u in _ad_group_many(eta, star, AdDirection.INVERSE)]
    pushed = [project_with_residual(u)[0]
              for u in _ad_group_many(eta, elements, AdDirection.FORWARD)]
    kicked = [K_op(state.v, w) for w in pushed]
    gamma_cols = [project_with_residual(u)[0]
                  for u in _ad_group_many(eta, kicked, AdDirection.INVERSE)]
    return basis.coords_many(omega_cols), basis.coords_many(gamma_cols)


def omega_gamma_decomposition(traj: Trajectory, basis: GalerkinBasis,
                              t: float) -> tuple[np.ndarray, list, list]:
    """Trapezoidal Omega_t and Volterra Gamma_t matrices at every stored
    sample time up to t; returns (times, omegas, gammas)."""
    times = traj.times
    idx = np.flatnonzero(np.isclose(times, t, rtol=0, atol=1e-10))
    if idx.size == 0:
        raise ConfigurationError(
            "OMEGA_GAMMA requires t to coincide with a stored sample time; "
            "adjust the solver cadence")
    j_end = int(idx[0])
    node_t = times[:j_end + 1]
    steps = np.diff(node_t)
    if steps.size and (np.max(steps) - np.min(steps)) > 1e-9 * np.max(steps):
        raise ConfigurationError("sample times are not uniformly spaced")

    integrands, m_mats = [], []
    for j in range(j_end + 1):
        omega_j, gamma_j = _node_integrands(traj.samples[j], basis)
        integrands.append(omega_j)
        m_mats.append(gamma_j)
    m = basis.dim
    h = float(steps[0]) if steps.size else 0.0
    omegas = [np.zeros((m, m))]
    gammas = [np.zeros((m, m))]
    eye = np.eye(m)
    # acc = h * [M_0 W_0 / 2 + sum_{l=1}^{j-1} M_l W_l]; W_0 = 0
    acc = np.zeros((m, m))
    for j in range(1, j_end + 1):
        omegas.append(omegas[-1] + h / 2 * (integrands[j - 1] + integrands[j]))
        w_j = np.linalg.solve(eye + h / 2 * m_mats[j], omegas[j] - acc)
        acc = acc + h * (m_mats[j] @ w_j)
        gammas.append(omegas[j] - w_j)
    return node_t, omegas, gammas


def assemble_phi(traj: Trajectory, basis: GalerkinBasis, t: float,
                 method: PhiMethod = PhiMethod.LINEARIZED,
                 dt: float | None = None) -> PhiMatrix:
    """Solution-operator matrix at time t by the requested method."""
    _check_basis_size(traj.grid, basis)
    if t < 0 or t > traj.t_final + 1e-12:
        raise ConfigurationError(f"t = {t} outside trajectory range")
    if method is PhiMethod.LINEARIZED:
        integ = _ColumnIntegrator(traj, list(basis.elements), dt)
        cols = integ.advance(integ.initial, 0.0, t)
        return _matrix_from_columns(integ, basis, cols, t)
    if method is PhiMethod.OMEGA_GAMMA:
        _, omegas, gammas = omega_gamma_decomposition(traj, basis, t)
        return PhiMatrix(omegas[-1] - gammas[-1], t, basis.gram)
    raise ConfigurationError(f"unknown method {method!r}")


@dataclass
class PhiScan:
    """Solution-operator matrices at a grid of times, with restartable
    column checkpoints for refinement."""

    times: np.ndarray
    matrices: list[PhiMatrix]
    checkpoints: list[dict]
    integrator: _ColumnIntegrator
    basis: GalerkinBasis

    def _columns_at(self, t: float) -> dict:
        i = int(np.searchsorted(self.times, t + 1e-14) - 1)
        if i < 0:
            cols = {k: v.copy() for k, v in self.integrator.initial.items()}
            t0 = 0.0
        else:
            cols = {k: v.copy() for k, v in self.checkpoints[i].items()}
            t0 = float(self.times[i])
        return self.integrator.advance(cols, t0, t)

    def evaluate(self, t: float) -> PhiMatrix:
        """Matrix at an arbitrary time, integrating from the nearest stored
        checkpoint at or below t."""
        return _matrix_from_columns(self.integrator, self.basis,
                                    self._columns_at(t), t)

    def full_norm_sigma(self, t: float) -> tuple[float, float]:
        """Smallest and largest values of |y(t)|_{H1} over unit-coordinate
        combinations of the launched columns, measured in the full space
        (no basis compression).  A genuine conjugate point needs the
        smallest one to vanish; compression kernels do not pass this."""
        cols = self._columns_at(t)
        gy = h1_pairs(self.integrator.grid, cols["ys"], cols["yh"],
                      cols["ys"], cols["yh"])
        lam = np.linalg.eigvalsh(np.linalg.solve(self.basis.gram,
                                                 0.5 * (gy + gy.T)))
        return (float(np.sqrt(max(lam.min(), 0.0))),
                float(np.sqrt(max(lam.max(), 0.0))))


def assemble_phi_series(traj: Trajectory, basis: GalerkinBasis,
                        t_grid, dt: float | None = None) -> PhiScan:
    """One LINEARIZED pass through increasing times, recording the matrix and
    a restartable checkpoint at every node."""
    _check_basis_size(traj.grid, basis)
    t_grid = np.asarray(t_grid, dtype=float)
    if t_grid.ndim != 1 or t_grid.size == 0 or np.any(np.diff(t_grid) <= 0) \
            or t_grid[0] <= 0:
        raise ConfigurationError("t_grid must be strictly increasing and positive")
    if t_grid[-1] > traj.t_final + 1e-12:
        raise ConfigurationError("t_grid extends beyond the trajectory")
    integ = _ColumnIntegrator(traj, list(basis.elements), dt)
    cols = integ.initial
    matrices, checkpoints = [], []
    t_prev = 0.0
    for t in t_grid:
        cols = integ.advance(cols, t_prev, float(t))
        checkpoints.append({k: v.copy() for k, v in cols.items()})
        matrices.append(_matrix_from_columns(integ, basis, cols, float(t)))
        t_prev = float(t)
    return PhiScan(t_grid, matrices, checkpoints, integ, basis)


@dataclass(frozen=True)
class ConjugatePoint:
    t: float
    multiplicity: int


def _bisect_det(scan: PhiScan, a: float, b: float, sign_a: float,
                max_iter: int = 36) -> float:
    for _ in range(max_iter):
        mid = 0.5 * (a + b)
        if b - a < 1e-11 * max(1.0, b):
            return mid
        s = scan.evaluate(mid).det_sign
        if s == 0.0:
            return mid
        if s == sign_a:
            a = mid
        else:
            b = mid
    return 0.5 * (a + b)


def _golden_min(scan: PhiScan, a: float, b: float, max_iter: int = 40) -> float:
    invphi = (np.sqrt(5.0) - 1) / 2
    c = b - invphi * (b - a)
    d = a + invphi * (b - a)
    fc = scan.evaluate(c).sigma_min
    fd = scan.evaluate(d).sigma_min
    for _ in range(max_iter):
        if b - a < 1e-10 * max(1.0, b):
            break
        if fc < fd:
            b, d, fd = d, c, fc
            c = b - invphi * (b - a)
            fc = scan.evaluate(c).sigma_min
        else:
            a, c, fc = c, d, fd
            d = a + invphi * (b - a)
            fd = scan.evaluate(d).sigma_min
    return 0.5 * (a + b)


def detect_conjugate(traj: Trajectory, basis: GalerkinBasis, t_grid,
                     kernel_rtol: float = 1e-6, dip_rtol: float = 1e-2,
                     dt: float | None = None,
                     scan: PhiScan | None = None,
                     confirm_full_norm: bool = True) -> list[ConjugatePoint]:
    """Scan sigma_min of the solution operator over t_grid and refine each
    candidate crossing.

    Odd-multiplicity crossings flip the determinant sign and are refined by
    bisection; even-multiplicity crossings show up as a local minimum of
    sigma_min below `dip_rtol * sigma_max` and are refined by golden-section.
    The multiplicity is the number of singular values below
    `kernel_rtol * sigma_max` at the refined time.

    With `confirm_full_norm` (the default) a refined candidate is reported
    only if the smallest |y(t*)|_{H1} over the launched column family is also
    below threshold in the full, uncompressed norm.  The compressed operator
    develops exact kernels whose location moves under basis enlargement
    while the underlying Jacobi fields stay bounded away from zero; the
    full-norm gate removes those truncation artifacts."""
    if scan is None:
        scan = assemble_phi_series(traj, basis, t_grid, dt)
    times = scan.times
    sig_min = np.array([m.sigma_min for m in scan.matrices])
    sig_scale = max(m.sigma_max for m in scan.matrices)
    det_signs = np.array([m.det_sign for m in scan.matrices])
    dip = dip_rtol * sig_scale

    below = sig_min < dip
    if np.any(below[:-1] & below[1:]):
        warnings.warn("t_grid too coarse: sigma_min stays below the dip "
                      "threshold across adjacent samples", RuntimeWarning)

    found: list[ConjugatePoint] = []
    full_norm = getattr(scan, "full_norm_sigma", None)

    def record(t_star: float):
        phi = scan.evaluate(t_star)
        mult = int(np.sum(phi.singular_values < kernel_rtol * phi.sigma_max))
        if mult == 0:
            return
        if confirm_full_norm and full_norm is not None:
            lo, hi = full_norm(t_star)
            if lo >= kernel_rtol * hi:
                return
        found.append(ConjugatePoint(t_star, mult))

    for i in range(len(times) - 1):
        if det_signs[i] * det_signs[i + 1] < 0:
            record(_bisect_det(scan, float(times[i]), float(times[i + 1]),
                               det_signs[i]))
    for i in range(1, len(times) - 1):
        if (below[i] and sig_min[i] <= sig_min[i - 1]
                and sig_min[i] <= sig_min[i + 1]
                and det_signs[i - 1] * det_signs[i] > 0
                and det_signs[i] * det_signs[i + 1] > 0):
            t_star = _golden_min(scan, float(times[i - 1]), float(times[i + 1]))
            if scan.evaluate(t_star).sigma_min < kernel_rtol * sig_scale:
                record(t_star)
    found.sort(key=lambda cp: cp.t)
    deduped: list[ConjugatePoint] = []
    for cp in found:
        if not deduped or abs(cp.t - deduped[-1].t) > 1e-8 * max(1.0, cp.t):
            deduped.append(cp)
    return deduped


@dataclass(frozen=True)
class IndexResult:
    dim_ker: int
    dim_coker: int

    @property
    def index(self) -> int:
        return self.dim_ker - self.dim_coker


def _count_below(sigma: np.ndarray, threshold: float, what: str) -> int:
    count = int(np.sum(sigma < threshold))
    if 0 < count < sigma.size:
        above = sigma[sigma >= threshold].min()
        below = sigma[sigma < threshold].max()
        if below > 0 and above / below < 10.0:
            warnings.warn(
                f"threshold {threshold:.3e} sits inside a singular-value "
                f"cluster of the {what} ({below:.3e} vs {above:.3e})",
                RuntimeWarning)
    return count


def index_check(phi: PhiMatrix, threshold: float | None = None) -> IndexResult:
    """Numerical kernel and cokernel dimensions of the solution operator.

    The kernel counts singular values below the threshold (default
    1e-6 * sigma_max); the cokernel is computed from the H1 adjoint
    G^{-1} M^T G.  A warning is raised when the threshold falls inside a
    singular-value cluster (ratio of bracketing values < 10)."""
    if threshold is None:
        threshold = 1e-6 * phi.sigma_max
    dim_ker = _count_below(phi.singular_values, threshold, "operator")
    adj_sigma = np.linalg.svd(phi.adjoint_matrix(), compute_uv=False)
    dim_coker = _count_below(adj_sigma, threshold, "adjoint")
    return IndexResult(dim_ker, dim_coker)
