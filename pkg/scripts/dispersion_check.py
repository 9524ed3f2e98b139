#!/usr/bin/env python3
"""Measure the lattice dispersion of the covariant field evolution over a
range of wavenumbers and compare with omega^2 = k^2 + m^2.

    python scripts/dispersion_check.py --modes 1 2 3 4 --n 512
"""

import argparse
import sys

import numpy as np

from varq import covariant as cv


def measure_omega(spec, grid, mode, amp=0.01, dt=5e-4, n_steps=16000):
    x = grid.nodes
    k = 2 * np.pi * mode / grid.length
    m2 = spec.dv_at(np.array([1.0]))[0]  # V' = m^2 q for the KG potential
    omega = np.sqrt(k * k + m2)
    state = cv.FieldState1p1(grid, amp * np.cos(k * x), amp * omega * np.sin(k * x) * spec.eta)
    times, qs, _, _ = cv.ddw_evolve_series(spec, state, dt, n_steps, store_every=n_steps // 100)
    c = qs @ np.exp(-1j * k * x) * (2.0 / grid.n)
    slope = np.polyfit(times, np.unwrap(np.angle(c)), 1)[0]
    return k, omega, abs(slope)


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--modes", type=int, nargs="+", default=[1, 2, 3, 4])
    ap.add_argument("--n", type=int, default=512)
    ap.add_argument("--kg-mass", type=float, default=1.0)
    ap.add_argument("--out", default="dispersion.csv")
    args = ap.parse_args()

    spec = cv.FieldLagrangianSpec(
        eta=1.0,
        potential=lambda q: 0.5 * args.kg_mass**2 * q * q,
        potential_grad=lambda q: args.kg_mass**2 * np.asarray(q, dtype=float),
    )
    grid = cv.PeriodicGrid1D(2 * np.pi, args.n)

    rows = []
    for mode in args.modes:
        k, omega, measured = measure_omega(spec, grid, mode)
        rel = abs(measured - omega) / omega
        rows.append((k, omega, measured, rel))
        print(f"k = {k:6.3f}: omega measured {measured:.8f}, exact {omega:.8f}, rel err {rel:.2e}")

    with open(args.out, "w") as fh:
        fh.write("k,omega_exact,omega_measured,rel_err\n")
        for row in rows:
            fh.write(",".join(format(x, ".17g") for x in row) + "\n")
    print(f"wrote {args.out}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
