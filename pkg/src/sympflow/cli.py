"""Configuration-driven command-line entry point.

Commands: `geodesic` (solve and emit conservation diagnostics),
`jacobi-scan` (conjugate-point scan CSV), `ops-selftest` (seeded operator
identity checks), `cpn-verify` (matrix-level conjugate-point verification).

Config files are plain `key = value` lines grouped in a `[command]` section;
`--set key=value` flags override file keys.  Every run writes a manifest that
re-parses to the resolved configuration.

Exit codes: 0 pass, 1 selftest assertion, 2 configuration, 3 numerical,
4 I/O.
"""

from __future__ import annotations

import argparse
import ast
import sys
import time
from dataclasses import dataclass, fields as dc_fields
from pathlib import Path

import numpy as np

from . import __version__
from .errors import ConfigurationError, NumericalError
from .fields import (SymplecticVectorField, h1_inner, h1_norm, project_P,
                     to_velocity)
from .geodesic import SolverConfig, SolverForm, solve_geodesic
from .lieops import (AdDirection, Ad_group, GalerkinBasis, ad, ad_star)
from .jacobi import assemble_phi_series, detect_conjugate, index_check
from .spectral import Grid2D, Multiplier, SpectrumField, apply_multiplier
from . import cpn

COMMANDS = ("geodesic", "jacobi-scan", "ops-selftest", "cpn-verify")


@dataclass
class RunConfig:
    """Resolved run parameters; defaults suit quick desk-scale runs."""

    command: str
    n: int = 32
    dt: float = 0.01
    t_end: float = 1.0
    modes: tuple = ((1, 0, 1.0, 0.0),)
    harmonic: tuple = (0.0, 0.0)
    form: str = "direct"
    m: int = 24
    t_grid: str = "0.5:2.0:4"
    outdir: str = "."
    seed: int = 0
    cadence: int = 1
    dealias: bool = True
    track_flow: bool = True

    def validate(self):
        if self.command not in COMMANDS:
            raise ConfigurationError(
                f"unknown command {self.command!r}; expected one of {COMMANDS}")
        if self.command == "cpn-verify":
            if self.n < 2:
                raise ConfigurationError("cpn-verify requires n >= 2")
        else:
            Grid2D(self.n)  # validates even n >= 8
        if self.dt <= 0 or self.t_end < 0:
            raise ConfigurationError("dt must be > 0 and t_end >= 0")
        if self.form not in ("direct", "vorticity"):
            raise ConfigurationError(f"unknown solver form {self.form!r}")
        if self.m < 2 or self.m % 2:
            raise ConfigurationError("basis dimension m must be even and >= 2")
        if self.cadence < 1:
            raise ConfigurationError("cadence must be >= 1")
        for mode in self.modes:
            if len(mode) != 4:
                raise ConfigurationError(
                    f"mode entries are (k1, k2, re, im); got {mode!r}")
            if (int(mode[0]), int(mode[1])) == (0, 0):
                raise ConfigurationError("mode (0, 0) is not a stream mode")
        if len(self.harmonic) != 2:
            raise ConfigurationError("harmonic must be a pair (h1, h2)")

    def t_grid_values(self) -> np.ndarray:
        try:
            start, stop, num = self.t_grid.split(":")
            grid = np.linspace(float(start), float(stop), int(num))
        except ValueError as exc:
            raise ConfigurationError(
                f"t_grid must be 'start:stop:num', got {self.t_grid!r}") from exc
        if grid.size == 0 or grid[0] <= 0:
            raise ConfigurationError("t_grid must start above 0")
        return grid


_BOOL_KEYS = {"dealias", "track_flow"}
_INT_KEYS = {"n", "m", "seed", "cadence"}
_FLOAT_KEYS = {"dt", "t_end"}
_LITERAL_KEYS = {"modes", "harmonic"}
_STR_KEYS = {"form", "t_grid", "outdir", "command"}


def _convert(key: str, raw: str, where: str) -> object:
    raw = raw.strip()
    try:
        if key in _BOOL_KEYS:
            if raw.lower() in ("true", "yes", "on", "1"):
                return True
            if raw.lower() in ("false", "no", "off", "0"):
                return False
            raise ValueError(f"not a boolean: {raw!r}")
        if key in _INT_KEYS:
            return int(raw)
        if key in _FLOAT_KEYS:
            return float(raw)
        if key in _LITERAL_KEYS:
            value = ast.literal_eval(raw)
            if key == "modes":
                if not isinstance(value, (list, tuple)):
                    raise ValueError("modes must be a list of 4-tuples")
                return tuple(tuple(entry) for entry in value)
            return tuple(value)
        if key in _STR_KEYS:
            return raw
    except (ValueError, SyntaxError) as exc:
        raise ConfigurationError(f"{where}: bad value for {key!r}: {exc}") from exc
    raise ConfigurationError(f"{where}: unknown key {key!r}")


def parse_config_file(path: str) -> dict[str, dict[str, tuple[str, str]]]:
    """Parse `[section]` / `key = value` lines; comments start with `#`.
    Returns {section: {key: (raw value, 'file:line')}}."""
    sections: dict[str, dict[str, tuple[str, str]]] = {}
    current = None
    text = Path(path).read_text(encoding="utf-8")
    for lineno, line in enumerate(text.splitlines(), start=1):
        stripped = line.strip()
        if not stripped or stripped.startswith("#"):
            continue
        where = f"{path}:{lineno}"
        if stripped.startswith("[") and stripped.endswith("]"):
            current = stripped[1:-1].strip()
            sections.setdefault(current, {})
            continue
        if "=" not in stripped:
            raise ConfigurationError(f"{where}: expected 'key = value'")
        if current is None:
            raise ConfigurationError(f"{where}: key outside any [section]")
        key, _, raw = stripped.partition("=")
        sections[current][key.strip()] = (raw.strip(), where)
    return sections


def build_config(command: str, config_path: str | None,
                 overrides: list[str]) -> RunConfig:
    cfg = RunConfig(command=command)
    if config_path is not None:
        sections = parse_config_file(config_path)
        for key, (raw, where) in sections.get(command, {}).items():
            if key == "command":
                continue
            setattr(cfg, key, _convert(key, raw, where))
    for item in overrides:
        if "=" not in item:
            raise ConfigurationError(f"--set expects key=value, got {item!r}")
        key, _, raw = item.partition("=")
        key = key.strip()
        if key == "command":
            raise ConfigurationError("command cannot be overridden with --set")
        setattr(cfg, key, _convert(key, raw, "--set"))
    cfg.validate()
    return cfg


def _format_value(value) -> str:
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, float):
        return repr(value)
    if isinstance(value, tuple):
        return repr(list(value))
    return str(value)


def write_manifest(cfg: RunConfig, outdir: Path, wall_time: float):
    lines = [f"# sympflow {__version__}",
             f"# wall_time_s = {wall_time:.3f}",
             f"[{cfg.command}]"]
    for f in dc_fields(cfg):
        if f.name == "command":
            continue
        lines.append(f"{f.name} = {_format_value(getattr(cfg, f.name))}")
    (outdir / "manifest.txt").write_text("\n".join(lines) + "\n",
                                         encoding="utf-8")


def _fmt(value) -> str:
    if isinstance(value, (float, np.floating)):
        return f"{value:.17g}"
    return str(value)


def emit_csv(records: list[dict], path) -> None:
    """UTF-8 CSV with a header row; floats carry 17 significant digits so
    they round-trip exactly; rows keep input order."""
    path = Path(path)
    if records:
        keys = list(records[0].keys())
        for r in records:
            if list(r.keys()) != keys:
                raise ConfigurationError("CSV records are not homogeneous")
    else:
        keys = []
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(",".join(keys) + "\n")
        for r in records:
            fh.write(",".join(_fmt(r[k]) for k in keys) + "\n")


def initial_field(cfg: RunConfig, grid: Grid2D) -> SymplecticVectorField:
    """Assemble the stream from (k1, k2, re, im) entries: each adds
    re*cos(k.x) + im*sin(k.x); the loader conjugate-completes the pair."""
    c = np.zeros((grid.n, grid.n), dtype=complex)
    half = grid.n // 2
    for (k1, k2, re, im) in cfg.modes:
        k1, k2 = int(k1), int(k2)
        if not (-half < k1 < half and -half < k2 < half):
            raise ConfigurationError(f"mode {(k1, k2)} outside grid n={grid.n}")
        c[k1 % grid.n, k2 % grid.n] += (re - 1j * im) / 2
        c[-k1 % grid.n, -k2 % grid.n] += (re + 1j * im) / 2
    return SymplecticVectorField(SpectrumField(grid, c),
                                 np.asarray(cfg.harmonic, float))


# ---------------------------------------------------------------------------
# commands

def cmd_geodesic(cfg: RunConfig, outdir: Path) -> int:
    grid = Grid2D(cfg.n)
    v0 = initial_field(cfg, grid)
    solver = SolverConfig(n=cfg.n, dt=cfg.dt, t_end=cfg.t_end,
                          form=SolverForm(cfg.form), cadence=cfg.cadence,
                          dealias=cfg.dealias, track_flow=cfg.track_flow)
    basis = GalerkinBasis.build(grid, cfg.m) if cfg.track_flow else None
    traj, report = solve_geodesic(v0, solver, basis=basis)
    emit_csv(report.rows(), outdir / "diagnostics.csv")
    if traj.failure is not None:
        print(f"numerical failure: {traj.failure}", file=sys.stderr)
        return 3
    return 0


def cmd_jacobi_scan(cfg: RunConfig, outdir: Path) -> int:
    grid = Grid2D(cfg.n)
    v0 = initial_field(cfg, grid)
    t_grid = cfg.t_grid_values()
    solver = SolverConfig(n=cfg.n, dt=cfg.dt,
                          t_end=float(t_grid[-1]),
                          form=SolverForm(cfg.form), cadence=cfg.cadence,
                          dealias=cfg.dealias, track_flow=True)
    traj, _ = solve_geodesic(v0, solver)
    if traj.failure is not None:
        print(f"numerical failure: {traj.failure}", file=sys.stderr)
        return 3
    basis = GalerkinBasis.build(grid, cfg.m)
    scan = assemble_phi_series(traj, basis, t_grid, dt=cfg.dt)
    rows = []
    for t, phi in zip(t_grid, scan.matrices):
        idx = index_check(phi)
        rows.append({"t": float(t), "sigma_min": phi.sigma_min,
                     "det_sign": int(phi.det_sign),
                     "dim_ker": idx.dim_ker, "dim_coker": idx.dim_coker})
    emit_csv(rows, outdir / "scan.csv")
    points = detect_conjugate(traj, basis, t_grid, scan=scan)
    for cp in points:
        print(f"conjugate point: t = {cp.t:.8f}, multiplicity {cp.multiplicity}")
    if not points:
        print("no conjugate points detected on the scanned interval")
    return 0


def _selftest_checks(cfg: RunConfig) -> list[dict]:
    grid = Grid2D(cfg.n)
    rng = np.random.default_rng(cfg.seed)

    def random_field(scale=1.0, kmax=None):
        if kmax is None:
            kmax = grid.n // 4
        c = rng.normal(size=(grid.n, grid.n)) + 1j * rng.normal(size=(grid.n, grid.n))
        keep = np.maximum(np.abs(grid.kx), np.abs(grid.ky)) <= kmax
        c = np.where(keep, c, 0)
        c[0, 0] = 0
        c = 0.5 * (c + np.roll(c[::-1, ::-1], (1, 1), (0, 1)).conj())
        f = SymplecticVectorField(SpectrumField(grid, c), rng.normal(size=2))
        return (scale / h1_norm(f)) * f

    rows = []

    def add(name, value, threshold):
        rows.append({"check": name, "value": float(value),
                     "threshold": float(threshold),
                     "passed": bool(value <= threshold)})

    worst = 0.0
    for _ in range(20):
        v, w, x = random_field(), random_field(), random_field()
        lhs = h1_inner(ad_star(v, w), x)
        rhs = h1_inner(w, ad(v, x))
        worst = max(worst, abs(lhs - rhs))
    add("coadjoint_adjointness", worst, 1e-11)

    v = random_field()
    r = ad(v, v)
    add("adjoint_antisymmetry", h1_norm(r), 1e-12)

    f = random_field()
    g1 = apply_multiplier(apply_multiplier(f.stream, Multiplier.LAP_POS),
                          Multiplier.HELMHOLTZ_INV)
    g2 = apply_multiplier(apply_multiplier(f.stream, Multiplier.HELMHOLTZ_INV),
                          Multiplier.LAP_POS)
    add("multiplier_commutation", np.max(np.abs(g1.coeffs - g2.coeffs)), 1e-15)

    u = to_velocity(random_field())
    p1 = project_P(u)
    p2 = project_P(to_velocity(p1))
    add("projection_idempotent", h1_norm(p1 - p2), 1e-12)

    # compatibility omega(v, w) = g(v, J w) on random constant vectors
    worst = 0.0
    for _ in range(50):
        a = rng.normal(size=2)
        b = rng.normal(size=2)
        omega = a[0] * b[1] - a[1] * b[0]
        jw = np.array([b[1], -b[0]])
        worst = max(worst, abs(omega - a @ jw))
    add("j_compatibility", worst, 1e-14)

    # d/dt Ad_{eta(t)^{-1}} u = -ad_v u at t = 0, central difference from the
    # +-v geodesics; measured convergence order.  The bands are chosen so the
    # bracket stays inside the retained 2/3 band and no truncation floor
    # contaminates the order measurement.
    band = max(2, cfg.n // 8)
    v = random_field(kmax=band)
    u = random_field(kmax=band)
    target = -1.0 * ad(v, u)
    errs = []
    for dt in (4e-2, 2e-2):
        fd = None
        for sign in (1.0, -1.0):
            traj, _ = solve_geodesic(sign * v,
                                     SolverConfig(n=cfg.n, dt=dt, t_end=dt))
            term = project_P(Ad_group(traj.samples[-1].eta, u,
                                      AdDirection.INVERSE))
            contrib = (sign / (2 * dt)) * term
            fd = contrib if fd is None else fd + contrib
        errs.append(h1_norm(fd - target))
    order = np.log2(errs[0] / errs[1])
    rows.append({"check": "group_algebra_adjoint_order", "value": float(order),
                 "threshold": 1.9, "passed": bool(order >= 1.9)})
    return rows


def cmd_ops_selftest(cfg: RunConfig, outdir: Path) -> int:
    rows = _selftest_checks(cfg)
    emit_csv(rows, outdir / "selftest.csv")
    failed = [r for r in rows if not r["passed"]]
    for r in failed:
        print(f"selftest failure: {r['check']} = {r['value']:.3e}", file=sys.stderr)
    return 1 if failed else 0


def cmd_cpn_verify(cfg: RunConfig, outdir: Path) -> int:
    path = cpn.build_path(cfg.n)
    rng = np.random.default_rng(cfg.seed)
    rows = []

    def add(name, value, threshold):
        rows.append({"check": name, "value": float(value),
                     "threshold": float(threshold),
                     "passed": bool(value <= threshold)})

    worst = max(np.max(np.abs(path.gamma(s, 0.0) - 1j * np.eye(path.size)))
                for s in np.linspace(0.0, 2 * np.pi, 25))
    add("gamma_identity_at_t0", worst, 1e-13)
    worst = max(path.unitarity_residual(rng.uniform(0, 2 * np.pi),
                                        rng.uniform(0, 2 * np.pi))
                for _ in range(50))
    add("gamma_unitarity", worst, 1e-13)
    worst = 0.0
    for _ in range(100):
        v = cpn.velocity_field(path, rng.uniform(0, 2 * np.pi),
                               rng.uniform(0, 2 * np.pi))
        worst = max(worst, np.max(np.abs(v + v.conj().T)))
    add("velocity_skew_hermitian", worst, 1e-12)
    add("variation_zero_at_0", np.linalg.norm(cpn.variation_field(path, 0.0)), 1e-13)
    add("variation_zero_at_2pi",
        np.linalg.norm(cpn.variation_field(path, 2 * np.pi)), 1e-12)
    mid = np.linalg.norm(cpn.variation_field(path, np.pi))
    rows.append({"check": "variation_nonzero_at_pi", "value": float(mid),
                 "threshold": 0.1, "passed": bool(mid > 0.1)})
    worst = max(np.max(np.abs(cpn.variation_field(path, t)
                              - cpn.variation_field_fd(path, t)))
                for t in np.linspace(0.0, 2 * np.pi, 25))
    add("variation_analytic_vs_fd", worst, 1e-9)
    if cfg.n % 2 == 0:
        worst = max(cpn.reference_form_residual(path, t)
                    for t in np.linspace(0.1, 2 * np.pi - 0.1, 13))
        add("variation_reference_blocks", worst, 1e-12)
    add("killing_stationarity_torus",
        cpn.killing_stationarity_torus((1.0, 0.0)), 1e-13)
    emit_csv(rows, outdir / "cpn_report.csv")
    failed = [r for r in rows if not r["passed"]]
    for r in failed:
        print(f"cpn-verify failure: {r['check']} = {r['value']:.3e}",
              file=sys.stderr)
    return 1 if failed else 0


def run(cfg: RunConfig) -> int:
    """Execute the configured command; returns the process exit status."""
    start = time.perf_counter()
    outdir = Path(cfg.outdir)
    outdir.mkdir(parents=True, exist_ok=True)
    dispatch = {"geodesic": cmd_geodesic, "jacobi-scan": cmd_jacobi_scan,
                "ops-selftest": cmd_ops_selftest, "cpn-verify": cmd_cpn_verify}
    status = dispatch[cfg.command](cfg, outdir)
    write_manifest(cfg, outdir, time.perf_counter() - start)
    return status


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="sympflow",
        description="Geodesics, coadjoint calculus and conjugate points of "
                    "the H1 metric on area-preserving maps of the 2-torus")
    parser.add_argument("command", choices=COMMANDS)
    parser.add_argument("--config", help="config file with a [command] section")
    parser.add_argument("--set", dest="overrides", action="append", default=[],
                        metavar="KEY=VALUE", help="override a config key")
    parser.add_argument("--version", action="version", version=__version__)
    args = parser.parse_args(argv)
    try:
        cfg = build_config(args.command, args.config, args.overrides)
        return run(cfg)
    except ConfigurationError as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return 2
    except NumericalError as exc:
        print(f"numerical error: {exc}", file=sys.stderr)
        return 3
    except OSError as exc:
        print(f"i/o error: {exc}", file=sys.stderr)
        return 4


if __name__ == "__main__":
    sys.exit(main())
