#!/usr/bin/env python3
"""Measure the discretisation orders: RK4 Richardson ratio at a fixed
horizon, and the central-difference order of the group/algebra adjoint and
coadjoint flow identities."""

import argparse

import numpy as np

from sympflow import (Ad_group, AdDirection, Ad_star_matrix, GalerkinBasis,
                      Grid2D, SolverConfig, SpectrumField,
                      SymplecticVectorField, ad, h1_norm, project_P,
                      solve_geodesic)
from sympflow.lieops import ad_star_matrix_on_basis


def generic(grid, amplitude=1.0):
    a = amplitude / 2
    return SymplecticVectorField.from_stream(SpectrumField.from_modes(
        grid, {(1, 0): a, (-1, 0): a, (0, 2): a, (0, -2): a}))


def rk4_ratio(grid):
    v0 = generic(grid)
    t_end = 0.08

    def final(dt):
        traj, _ = solve_geodesic(v0, SolverConfig(
            n=grid.n, dt=dt, t_end=t_end, cadence=10 ** 6, track_flow=False))
        return traj.samples[-1].v

    ref = final(0.0025)
    return h1_norm(final(0.02) - ref) / h1_norm(final(0.01) - ref)


def adjoint_orders(grid, seed=0):
    rng = np.random.default_rng(seed)
    n = grid.n

    def rand(kmax):
        c = rng.normal(size=(n, n)) + 1j * rng.normal(size=(n, n))
        keep = np.maximum(np.abs(grid.kx), np.abs(grid.ky)) <= kmax
        c = np.where(keep, c, 0)
        c[0, 0] = 0
        c = 0.5 * (c + np.roll(c[::-1, ::-1], (1, 1), (0, 1)).conj())
        f = SymplecticVectorField(SpectrumField(grid, c), rng.normal(size=2))
        return (1.0 / h1_norm(f)) * f

    band = max(2, grid.n // 8)   # keep the bracket inside the 2/3 band
    v, u = rand(band), rand(band)
    target = -1.0 * ad(v, u)
    errs = []
    for dt in (4e-2, 2e-2):
        fd = None
        for sign in (1.0, -1.0):
            traj, _ = solve_geodesic(sign * v, SolverConfig(n=n, dt=dt, t_end=dt))
            term = project_P(Ad_group(traj.samples[-1].eta, u, AdDirection.INVERSE))
            fd = (sign / (2 * dt)) * term if fd is None else fd + (sign / (2 * dt)) * term
        errs.append(h1_norm(fd - target))
    order_ad = np.log2(errs[0] / errs[1])

    basis = GalerkinBasis.build(grid, 10)
    v = rand(min(band, 3))
    target_m = -ad_star_matrix_on_basis(v, basis)
    errs = []
    for dt in (4e-2, 2e-2):
        fd = np.zeros((10, 10))
        for sign in (1.0, -1.0):
            traj, _ = solve_geodesic(sign * v, SolverConfig(n=n, dt=dt, t_end=dt))
            fd = fd + (sign / (2 * dt)) * Ad_star_matrix(
                traj.samples[-1].eta, basis, AdDirection.INVERSE)
        errs.append(np.linalg.norm(fd - target_m))
    order_coad = np.log2(errs[0] / errs[1])
    return order_ad, order_coad


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--n", type=int, default=32)
    args = ap.parse_args()
    grid = Grid2D(args.n)
    ratio = rk4_ratio(grid)
    print(f"RK4 Richardson ratio (expect about 16): {ratio:.2f}")
    order_ad, order_coad = adjoint_orders(grid)
    print(f"adjoint flow identity central-difference order: {order_ad:.3f}")
    print(f"coadjoint matrix identity central-difference order: {order_coad:.3f}")


if __name__ == "__main__":
    main()
