"""Time integration of the H1 Euler-Arnold equation on the torus.

Two equivalent right-hand sides are provided: the DIRECT form

    v_t = -(1 + Lap)^{-1} P(grad_v (1 + Lap) v + (grad v)^T Lap v)

and the VORTICITY (transport) form for q = Lap (1 + Lap) f,

    q_t + v . grad q = 0,

which follows from the coadjoint-orbit conservation law.  The flow map
eta' = v o eta and its Jacobian are advanced jointly with the velocity by a
classical RK4 step.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigurationError, NumericalError
from .fields import (SymplecticVectorField, VelocityField, casimir_q,
                     h1_inner, project_coeffs, stream_from_casimir,
                     velocity_coeffs, velocity_values)
from .lieops import AdDirection, Ad_star_matrix, FlowMap, GalerkinBasis
from .spectral import TWO_PI, Grid2D, SpectrumField, eval_spectra

BLOWUP_VMAX = 1e6


class SolverForm(enum.Enum):
    DIRECT = "direct"
    VORTICITY = "vorticity"


@dataclass(frozen=True)
class SolverConfig:
    """Fixed-step RK4 solve parameters.

    `cadence` controls how often states are stored and diagnostics taken
    (every `cadence`-th step).  `track_flow` turns the flow-map integration
    off for velocity-only runs; flow-dependent diagnostics are then skipped.
    """

    n: int
    dt: float
    t_end: float
    form: SolverForm = SolverForm.DIRECT
    cadence: int = 1
    dealias: bool = True
    track_flow: bool = True

    def __post_init__(self):
        if self.dt <= 0:
            raise ConfigurationError(f"dt must be positive, got {self.dt}")
        if self.t_end < 0:
            raise ConfigurationError(f"t_end must be >= 0, got {self.t_end}")
        if self.cadence < 1 or int(self.cadence) != self.cadence:
            raise ConfigurationError(f"cadence must be a positive integer, got {self.cadence}")

    @property
    def n_steps(self) -> int:
        return int(round(self.t_end / self.dt))


@dataclass(frozen=True)
class GeodesicState:
    """One point along the geodesic: velocity, flow map, time."""

    v: SymplecticVectorField
    eta: FlowMap | None
    t: float

    def __post_init__(self):
        if self.eta is not None and abs(self.eta.time - self.t) > 1e-12:
            raise ConfigurationError("flow-map time stamp disagrees with state time")


def momentum_flux(a: SymplecticVectorField, b: SymplecticVectorField,
                  use_dealias: bool = True) -> VelocityField:
    """grad_a (1 + Lap) b + (grad a)^T Lap b with dealiased products."""
    grid = a.grid
    a1c, a2c = velocity_coeffs(grid, a.stream.coeffs, a.harmonic)
    b1c, b2c = velocity_coeffs(grid, b.stream.coeffs, b.harmonic)
    one_lap = 1.0 + grid.ksq
    ikx, iky = 1j * grid.kx, 1j * grid.ky
    stack = np.stack([
        a1c, a2c,
        ikx * (one_lap * b1c), iky * (one_lap * b1c),
        ikx * (one_lap * b2c), iky * (one_lap * b2c),
        grid.ksq * b1c, grid.ksq * b2c,
        ikx * a1c, iky * a1c, ikx * a2c, iky * a2c,
    ])
    p = grid.to_phys(stack)
    a1, a2 = p[0], p[1]
    d1W1, d2W1, d1W2, d2W2 = p[2], p[3], p[4], p[5]
    L1, L2 = p[6], p[7]
    d1a1, d2a1, d1a2, d2a2 = p[8], p[9], p[10], p[11]
    out1 = a1 * d1W1 + a2 * d2W1 + L1 * d1a1 + L2 * d1a2
    out2 = a1 * d1W2 + a2 * d2W2 + L1 * d2a1 + L2 * d2a2
    spec = grid.to_spec(np.stack([out1, out2]))
    if use_dealias:
        spec = np.where(grid.dealias_mask, spec, 0.0)
    return VelocityField(SpectrumField(grid, spec[0]),
                         SpectrumField(grid, spec[1]))


def inertia_inverse(stream: np.ndarray, harmonic: np.ndarray,
                    grid: Grid2D) -> SymplecticVectorField:
    """(1 + Lap)^{-1} applied through the stream/harmonic representation."""
    return SymplecticVectorField(
        SpectrumField(grid, stream / (1.0 + grid.ksq)), harmonic)


def rhs_direct(v: SymplecticVectorField,
               use_dealias: bool = True) -> SymplecticVectorField:
    """Velocity tendency of the DIRECT form; equals -ad_star(v, v)."""
    flux = momentum_flux(v, v, use_dealias)
    stream, harm = project_coeffs(v.grid, flux.u1.coeffs, flux.u2.coeffs)
    return inertia_inverse(-stream, -harm, v.grid)


def rhs_vorticity(q: SpectrumField, v: SymplecticVectorField,
                  use_dealias: bool = True) -> SpectrumField:
    """Transport tendency -dealias(v . grad q)."""
    grid = q.grid
    v1c, v2c = velocity_coeffs(grid, v.stream.coeffs, v.harmonic)
    stack = np.stack([v1c, v2c, 1j * grid.kx * q.coeffs, 1j * grid.ky * q.coeffs])
    p = grid.to_phys(stack)
    out = grid.to_spec(-(p[0] * p[2] + p[1] * p[3]))
    out[0, 0] = 0.0
    if use_dealias:
        out = np.where(grid.dealias_mask, out, 0.0)
    return SpectrumField(grid, out)


def _flow_rates(grid: Grid2D, v: SymplecticVectorField, pos: np.ndarray,
                jac: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """eta' = v o eta and (D eta)' = (grad v o eta) . D eta."""
    v1c, v2c = velocity_coeffs(grid, v.stream.coeffs, v.harmonic)
    ikx, iky = 1j * grid.kx, 1j * grid.ky
    stack = np.stack([v1c, v2c, ikx * v1c, iky * v1c, ikx * v2c, iky * v2c])
    vals = eval_spectra(grid, stack, pos.reshape(2, -1).T)
    posdot = vals[:2].reshape(2, grid.n, grid.n)
    gradv = vals[2:].reshape(2, 2, -1)
    jacdot = np.einsum("ikp,kjp->ijp", gradv,
                       jac.reshape(2, 2, -1)).reshape(2, 2, grid.n, grid.n)
    return posdot, jacdot


def _lin_comb(base: dict, rate: dict, c: float) -> dict:
    return {k: base[k] + c * rate[k] for k in base}


def _as_state_dict(state: GeodesicState, form: SolverForm) -> dict:
    out = {}
    if form is SolverForm.DIRECT:
        out["f"] = state.v.stream.coeffs
        out["h"] = state.v.harmonic
    else:
        out["q"] = casimir_q(state.v).coeffs
    if state.eta is not None:
        out["pos"] = state.eta.positions
        out["jac"] = state.eta.jacobian
    return out


def _velocity_of(arrs: dict, grid: Grid2D, frozen_h: np.ndarray,
                 form: SolverForm) -> SymplecticVectorField:
    if form is SolverForm.DIRECT:
        return SymplecticVectorField(SpectrumField(grid, arrs["f"]), arrs["h"])
    stream = stream_from_casimir(SpectrumField(grid, arrs["q"]))
    return SymplecticVectorField(stream, frozen_h)


def step_rk4(state: GeodesicState, config: SolverConfig) -> GeodesicState:
    """One classical RK4 step of the coupled velocity + flow-map system."""
    grid = state.v.grid
    v1, v2 = velocity_values(state.v)
    vmax = float(np.sqrt(np.max(v1 ** 2 + v2 ** 2)))
    if config.dt * vmax * grid.n / TWO_PI >= 1.0:
        raise NumericalError(
            f"CFL bound violated (dt*max|v|*n/2pi = "
            f"{config.dt * vmax * grid.n / TWO_PI:.3f} >= 1); reduce dt",
            time=state.t)

    frozen_h = state.v.harmonic
    form = config.form

    def deriv(arrs: dict) -> dict:
        v = _velocity_of(arrs, grid, frozen_h, form)
        out = {}
        if form is SolverForm.DIRECT:
            vdot = rhs_direct(v, config.dealias)
            out["f"] = vdot.stream.coeffs
            out["h"] = vdot.harmonic
        else:
            out["q"] = rhs_vorticity(SpectrumField(grid, arrs["q"]), v,
                                     config.dealias).coeffs
        if "pos" in arrs:
            out["pos"], out["jac"] = _flow_rates(grid, v, arrs["pos"], arrs["jac"])
        return out

    y0 = _as_state_dict(state, form)
    dt = config.dt
    k1 = deriv(y0)
    k2 = deriv(_lin_comb(y0, k1, dt / 2))
    k3 = deriv(_lin_comb(y0, k2, dt / 2))
    k4 = deriv(_lin_comb(y0, k3, dt))
    y1 = {k: y0[k] + dt / 6 * (k1[k] + 2 * k2[k] + 2 * k3[k] + k4[k])
          for k in y0}

    t1 = state.t + dt
    for arr in y1.values():
        if not np.all(np.isfinite(arr)):
            raise NumericalError(
                "solution blew up (NaN/Inf); the resolved band is too small "
                "for this data -- increase n or reduce t_end", time=t1)
    v_new = _velocity_of(y1, grid, frozen_h, form)
    eta_new = None
    if state.eta is not None:
        eta_new = FlowMap(grid, y1["pos"], y1["jac"], t1)
    return GeodesicState(v_new, eta_new, t1)


# ---------------------------------------------------------------------------
# diagnostics

@dataclass
class DiagnosticsRecord:
    t: float
    energy: float
    casimir_residual: float
    adstar_residual: float
    detjac_dev: float
    vmax: float

    def as_dict(self) -> dict:
        return {"t": self.t, "energy": self.energy,
                "casimir_residual": self.casimir_residual,
                "adstar_residual": self.adstar_residual,
                "detjac_dev": self.detjac_dev, "vmax": self.vmax}


@dataclass
class DiagnosticsReport:
    records: list[DiagnosticsRecord] = field(default_factory=list)

    def rows(self) -> list[dict]:
        return [r.as_dict() for r in self.records]

    def max_energy_drift(self) -> float:
        e0 = self.records[0].energy
        return max(abs(r.energy - e0) / abs(e0) for r in self.records)

    def max_abs(self, attr: str) -> float:
        vals = [getattr(r, attr) for r in self.records]
        vals = [v for v in vals if np.isfinite(v)]
        return max(np.abs(vals)) if vals else float("nan")


def diagnostics(state: GeodesicState, v0: SymplecticVectorField,
                q0: SpectrumField, basis: GalerkinBasis | None = None) -> DiagnosticsRecord:
    """Conservation residuals at one state: H1 energy, transported-density
    residual |q(t) o eta - q0| / |q0|, coadjoint-orbit residual
    |Ad_star_{eta(t)} v(t) - v0| / |v0| on the Galerkin basis, and the
    volume-preservation deviation max|det D eta - 1|."""
    grid = state.v.grid
    energy = h1_inner(state.v, state.v)
    v1, v2 = velocity_values(state.v)
    vmax = float(np.sqrt(np.max(v1 ** 2 + v2 ** 2)))
    casimir = adstar = detjac = float("nan")
    if state.eta is not None:
        qt = casimir_q(state.v)
        vals = eval_spectra(grid, qt.coeffs, state.eta.positions.reshape(2, -1).T)
        q0_phys = grid.to_phys(q0.coeffs).ravel()
        denom = float(np.sqrt(np.mean(q0_phys ** 2)))
        num = float(np.sqrt(np.mean((vals - q0_phys) ** 2)))
        casimir = num / denom if denom > 0 else 0.0
        detjac = state.eta.max_det_deviation()
        if basis is not None:
            m = Ad_star_matrix(state.eta, basis, AdDirection.FORWARD)
            ct = basis.coords(state.v)
            c0 = basis.coords(v0)
            dnm = basis.norm_of_coords(c0)
            adstar = basis.norm_of_coords(m @ ct - c0) / dnm if dnm > 0 else 0.0
    return DiagnosticsRecord(state.t, energy, casimir, adstar, detjac, vmax)


# ---------------------------------------------------------------------------
# trajectories

@dataclass
class Trajectory:
    """Sampled geodesic with dense velocity output (cubic Hermite between
    samples, using the exact tendency at the sample points)."""

    config: SolverConfig
    v0: SymplecticVectorField
    q0: SpectrumField
    samples: list[GeodesicState]
    failure: str | None = None

    def __post_init__(self):
        self._rhs_cache: dict[int, SymplecticVectorField] = {}

    @property
    def grid(self) -> Grid2D:
        return self.v0.grid

    @property
    def times(self) -> np.ndarray:
        return np.array([s.t for s in self.samples])

    @property
    def t_final(self) -> float:
        return self.samples[-1].t

    def _tendency(self, idx: int) -> SymplecticVectorField:
        if idx not in self._rhs_cache:
            self._rhs_cache[idx] = rhs_direct(self.samples[idx].v,
                                              self.config.dealias)
        return self._rhs_cache[idx]

    def _bracket(self, t: float) -> int:
        times = self.times
        if t < times[0] - 1e-12 or t > times[-1] + 1e-12:
            raise ConfigurationError(
                f"t = {t} outside trajectory range [{times[0]}, {times[-1]}]")
        return int(np.clip(np.searchsorted(times, t + 1e-14) - 1, 0,
                           len(times) - 2))

    def velocity_at(self, t: float) -> SymplecticVectorField:
        times = self.times
        hit = np.flatnonzero(np.isclose(times, t, rtol=0, atol=1e-12))
        if hit.size:
            return self.samples[int(hit[0])].v
        i = self._bracket(t)
        t0, t1 = times[i], times[i + 1]
        dt = t1 - t0
        s = (t - t0) / dt
        h00 = 2 * s ** 3 - 3 * s ** 2 + 1
        h10 = s ** 3 - 2 * s ** 2 + s
        h01 = -2 * s ** 3 + 3 * s ** 2
        h11 = s ** 3 - s ** 2
        return (h00 * self.samples[i].v + (h10 * dt) * self._tendency(i)
                + h01 * self.samples[i + 1].v
                + (h11 * dt) * self._tendency(i + 1))

    def flow_at(self, t: float) -> FlowMap:
        """Flow map at time t: the stored sample, or the left sample advanced
        by flow-only RK4 steps driven by the dense velocity."""
        times = self.times
        hit = np.flatnonzero(np.isclose(times, t, rtol=0, atol=1e-12))
        if hit.size:
            eta = self.samples[int(hit[0])].eta
            if eta is None:
                raise ConfigurationError("trajectory was solved without flow tracking")
            return eta
        i = self._bracket(t)
        eta = self.samples[i].eta
        if eta is None:
            raise ConfigurationError("trajectory was solved without flow tracking")
        return advance_flow(self, eta, t)

    def state_at(self, t: float) -> GeodesicState:
        return GeodesicState(self.velocity_at(t), self.flow_at(t), t)


def advance_flow(traj: Trajectory, eta: FlowMap, t_to: float,
                 dt: float | None = None) -> FlowMap:
    """RK4 on eta' = v o eta alone, with v taken from dense trajectory output."""
    grid = traj.grid
    if dt is None:
        dt = traj.config.dt
    t = eta.time
    pos, jac = eta.positions.copy(), eta.jacobian.copy()
    while t < t_to - 1e-12:
        step = min(dt, t_to - t)
        k1 = _flow_rates(grid, traj.velocity_at(t), pos, jac)
        k2 = _flow_rates(grid, traj.velocity_at(t + step / 2),
                         pos + step / 2 * k1[0], jac + step / 2 * k1[1])
        k3 = _flow_rates(grid, traj.velocity_at(t + step / 2),
                         pos + step / 2 * k2[0], jac + step / 2 * k2[1])
        k4 = _flow_rates(grid, traj.velocity_at(t + step),
                         pos + step * k3[0], jac + step * k3[1])
        pos = pos + step / 6 * (k1[0] + 2 * k2[0] + 2 * k3[0] + k4[0])
        jac = jac + step / 6 * (k1[1] + 2 * k2[1] + 2 * k3[1] + k4[1])
        t += step
    return FlowMap(grid, pos, jac, t_to)


def solve_geodesic(v0: SymplecticVectorField, config: SolverConfig,
                   basis: GalerkinBasis | None = None
                   ) -> tuple[Trajectory, DiagnosticsReport]:
    """Integrate the geodesic from the identity with initial velocity v0.

    Returns the sampled trajectory and a diagnostics report (one record per
    stored sample).  A numerical failure aborts the run and is returned as a
    failure marker on the partial trajectory rather than raised."""
    grid = Grid2D(config.n)
    if v0.grid != grid:
        raise ConfigurationError(
            f"initial data on n={v0.grid.n} but solver configured for n={config.n}")
    outside = np.abs(np.where(grid.dealias_mask, 0.0, v0.stream.coeffs))
    if config.dealias and np.max(outside, initial=0.0) > 0:
        raise ConfigurationError(
            "initial stream has energy outside the dealiasing band")

    q0 = casimir_q(v0)
    eta0 = FlowMap.identity(grid) if config.track_flow else None
    state = GeodesicState(v0, eta0, 0.0)
    traj = Trajectory(config, v0, q0, [state])
    report = DiagnosticsReport([diagnostics(state, v0, q0, basis)])

    for step in range(1, config.n_steps + 1):
        try:
            state = step_rk4(state, config)
        except NumericalError as exc:
            traj.failure = str(exc)
            break
        if step % config.cadence == 0 or step == config.n_steps:
            traj.samples.append(state)
            report.records.append(diagnostics(state, v0, q0, basis))
    return traj, report
