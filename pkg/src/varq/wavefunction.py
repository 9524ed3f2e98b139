"""Canonical map between hydrodynamic variables (rho, lam) and a complex
amplitude, plus the global linear evolution

    i a dpsi/dt = -(a^2/2) d/dq (m(q)^{-1} dpsi/dq) + V(q) psi

advanced with the norm-preserving Cayley stepper.  The divergence form of
the kinetic term fixes the operator ordering for position-dependent mass.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np

from .errors import DomainEscapeError, InvalidArgumentError, InvalidStateError
from .mechanics import NaturalSystemSpec
from .numerics import CayleyPropagator, Grid1D, TridiagonalOperator, sturm_liouville_operator

__all__ = [
    "WaveFunction",
    "canonical_map_forward",
    "canonical_map_inverse",
    "polar_from_uv",
    "schrodinger_operator",
    "schrodinger_evolve",
    "schrodinger_evolve_series",
    "normalize_wavefunction",
]

DENSITY_FLOOR_FRAC = 1e-12


def normalize_wavefunction(grid: Grid1D, psi: np.ndarray) -> np.ndarray:
    psi = np.asarray(psi, dtype=complex)
    norm = grid.h * float(np.sum(np.abs(psi) ** 2))
    if norm <= 0:
        raise InvalidStateError("wavefunction has zero norm")
    return psi / np.sqrt(norm)


@dataclass(frozen=True)
class WaveFunction:
    grid: Grid1D
    psi: np.ndarray
    a: float

    def __post_init__(self):
        psi = np.asarray(self.psi, dtype=complex)
        if psi.shape != (self.grid.n,):
            raise InvalidStateError("psi must match the grid")
        if not self.a > 0:
            raise InvalidStateError(f"need a > 0, got {self.a}")
        norm = self.grid.h * float(np.sum(np.abs(psi) ** 2))
        if abs(norm - 1.0) > 1e-9:
            raise InvalidStateError(f"wavefunction not normalised: h*sum|psi|^2 = {norm!r}")
        object.__setattr__(self, "psi", psi)

    @property
    def rho(self) -> np.ndarray:
        return np.abs(self.psi) ** 2

    def norm(self) -> float:
        return self.grid.h * float(np.sum(np.abs(self.psi) ** 2))


def _unwrap_segments(phase: np.ndarray, mask: np.ndarray) -> np.ndarray:
    """Unwrap the phase left-to-right independently on each masked segment.

    The branch restarts across masked gaps: the multiplier field is only
    defined per support component, so no continuity is imposed between
    disconnected components.
    """
    out = np.zeros_like(phase)
    n = phase.size
    i = 0
    while i < n:
        if not mask[i]:
            i += 1
            continue
        j = i
        while j < n and mask[j]:
            j += 1
        out[i:j] = np.unwrap(phase[i:j])
        i = j
    return out


def canonical_map_forward(wf: WaveFunction, floor_frac: float = DENSITY_FLOOR_FRAC):
    """(psi) -> (rho, lam, mask): rho = |psi|^2 and lam = a * arg(psi).

    ``mask`` marks cells with rho above the relative floor; lam is branch-
    unwrapped along the grid within each masked segment and zero elsewhere.
    The global phase constant is fixed to zero.
    """
    rho = np.abs(wf.psi) ** 2
    mask = rho > floor_frac * float(np.max(rho))
    phase = np.angle(wf.psi)
    lam = np.where(mask, wf.a * _unwrap_segments(phase, mask), 0.0)
    return rho, lam, mask


def canonical_map_inverse(grid: Grid1D, rho: np.ndarray, lam: np.ndarray, a: float) -> WaveFunction:
    """(rho, lam) -> psi = sqrt(rho) * exp(i lam / a)."""
    rho = np.asarray(rho, dtype=float)
    lam = np.asarray(lam, dtype=float)
    if np.any(rho < 0):
        raise InvalidStateError("density must be nonnegative")
    psi = np.sqrt(rho) * np.exp(1j * lam / a)
    return WaveFunction(grid, normalize_wavefunction(grid, psi), a)


def polar_from_uv(u, v, a: float):
    """Map the plane fields (u, v) to (P, Lam) with unit Jacobian:

        P = (u^2 + v^2) / (2a),    Lam = a * arg(u + i v)

    (integration constants and the global phase are fixed to zero).
    """
    u = np.asarray(u, dtype=float)
    v = np.asarray(v, dtype=float)
    P = (u * u + v * v) / (2.0 * a)
    lam = a * np.arctan2(v, u)
    return P, lam


def schrodinger_operator(spec: NaturalSystemSpec, grid: Grid1D, a: float) -> TridiagonalOperator:
    """Interior-node operator -(a^2/2) d/dq (m^{-1} d/dq .) + V."""
    return sturm_liouville_operator(
        grid, lambda q: 1.0 / spec.mass_at(q), spec.potential_at, coeff=a * a
    )


def _boundary_mass(grid: Grid1D, psi: np.ndarray, cells: int = 3) -> float:
    dens = np.abs(psi) ** 2
    return grid.h * float(np.sum(dens[:cells]) + np.sum(dens[-cells:]))


class SchrodingerEvolution:
    """Reusable Cayley evolution with a boundary-leakage guard."""

    def __init__(self, spec: NaturalSystemSpec, grid: Grid1D, a: float, dt: float,
                 boundary_threshold: float = 1e-8):
        self.grid = grid
        self.a = a
        self.dt = dt
        self.op = schrodinger_operator(spec, grid, a)
        self.prop = CayleyPropagator(self.op, dt, a)
        self.boundary_threshold = boundary_threshold

    def check_boundary(self, psi: np.ndarray, t: float):
        mass = _boundary_mass(self.grid, psi)
        if mass > self.boundary_threshold:
            raise DomainEscapeError(
                f"boundary density {mass:.3e} exceeds {self.boundary_threshold:.1e} at t={t:.6g}",
                diagnostics={"boundary_mass": mass, "t": t},
            )

    def step(self, psi: np.ndarray) -> np.ndarray:
        out = psi.copy()
        out[1:-1] = self.prop.step(psi[1:-1])
        out[0] = 0.0
        out[-1] = 0.0
        return out

    def energy(self, psi: np.ndarray) -> float:
        inner = psi[1:-1]
        return self.grid.h * float(np.real(np.vdot(inner, self.op.apply(inner))))


def schrodinger_evolve(
    spec: NaturalSystemSpec,
    wf: WaveFunction,
    dt: float,
    n_steps: int,
    boundary_threshold: float = 1e-8,
) -> WaveFunction:
    """Evolve by n_steps Cayley steps; raises DomainEscapeError if density
    piles up at the grid edge (the state is no longer represented)."""
    evo = SchrodingerEvolution(spec, wf.grid, wf.a, dt, boundary_threshold)
    psi = wf.psi.copy()
    evo.check_boundary(psi, 0.0)
    for k in range(n_steps):
        psi = evo.step(psi)
        evo.check_boundary(psi, (k + 1) * dt)
    return WaveFunction(wf.grid, psi, wf.a)


def schrodinger_evolve_series(
    spec: NaturalSystemSpec,
    wf: WaveFunction,
    dt: float,
    n_steps: int,
    store_every: int = 1,
    boundary_threshold: float = 1e-8,
):
    """Like schrodinger_evolve but returns (times, snapshots) including t=0."""
    if store_every < 1:
        raise InvalidArgumentError("store_every must be >= 1")
    evo = SchrodingerEvolution(spec, wf.grid, wf.a, dt, boundary_threshold)
    psi = wf.psi.copy()
    evo.check_boundary(psi, 0.0)
    times = [0.0]
    snaps = [psi.copy()]
    for k in range(n_steps):
        psi = evo.step(psi)
        t = (k + 1) * dt
        evo.check_boundary(psi, t)
        if (k + 1) % store_every == 0:
            times.append(t)
            snaps.append(psi.copy())
    return np.asarray(times), np.asarray(snaps)
