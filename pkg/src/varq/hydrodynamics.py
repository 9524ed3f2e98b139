"""Diffusion-current extension of the classical transport: the coupled
(rho, lam) system

    dlam/dt + (dlam/dq)^2/2m + V + [pole + g(rho) terms] = 0
    drho/dt + d/dq (rho dlam/dq / m) = 0

valid wherever rho > 0.  In quantum-pole mode rho*d^2(rho) = (a/2)^2/rho
+ g(rho), whose singular part turns into the quantum potential
-(a^2/2) (d/dq (m^{-1} d/dq sqrt(rho))) / sqrt(rho); with g = 0 the system
is locally equivalent to the linear evolution in the wavefunction module.

Direct integration is singular at density nodes, so lam-updates are
restricted to the bulk where rho stays above a relative floor; global
statements live with the complex-amplitude variables.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np

from .errors import InvalidSpecError, InvalidStateError, StepRejectedError
from .mechanics import (
    NaturalSystemSpec,
    classical_transport_step,
    upwind_density_update,
    _face_velocity,
)
from .numerics import Grid1D, TridiagonalOperator, grad_central, sturm_liouville_operator

__all__ = [
    "DiffusionSpec",
    "HydroState",
    "diffusion_current",
    "effective_hamiltonian_density",
    "madelung_step",
    "madelung_run",
    "multiplier_residual_series",
]

RHO_FLOOR_FRAC = 1e-12


@dataclass(frozen=True)
class DiffusionSpec:
    """Action constant a, regular coupling g(rho), and mode selector.

    mode = "classical" forces d(rho) = 0; mode = "quantum-pole" selects
    rho d^2(rho) = (a/2)^2 / rho + g(rho).  The sign branch of rho*d(rho)
    is fixed to + (the dynamics only sees rho*d^2, so the branch shows up
    only in diffusion-current reporting).
    """

    a: float
    g: Optional[Callable] = None
    g_grad: Optional[Callable] = None
    mode: str = "quantum-pole"

    def __post_init__(self):
        if not self.a > 0:
            raise InvalidSpecError(f"need a > 0, got {self.a}")
        if self.mode not in ("classical", "quantum-pole"):
            raise InvalidSpecError(f"unknown mode {self.mode!r}")
        if self.g is not None:
            try:
                g0 = float(np.asarray(self.g(0.0)))
            except ArithmeticError as exc:
                raise InvalidSpecError("g(rho) must be finite at rho = 0") from exc
            if not np.isfinite(g0):
                raise InvalidSpecError("g(rho) must be finite at rho = 0")

    def g_at(self, rho):
        if self.g is None:
            return np.zeros_like(np.asarray(rho, dtype=float))
        return np.asarray(self.g(rho), dtype=float)

    def g_grad_at(self, rho):
        if self.g is None:
            return np.zeros_like(np.asarray(rho, dtype=float))
        if self.g_grad is not None:
            return np.asarray(self.g_grad(rho), dtype=float)
        rho = np.asarray(rho, dtype=float)
        step = 1e-7 * np.maximum(1.0, np.abs(rho))
        return (self.g_at(rho + step) - self.g_at(np.maximum(rho - step, 0.0))) / (
            step + np.minimum(rho, step)
        )

    def rho_d(self, rho):
        """Regular combination rho*d(rho) = +sqrt((a/2)^2 + rho g(rho))."""
        if self.mode == "classical":
            return np.zeros_like(np.asarray(rho, dtype=float))
        val = (0.5 * self.a) ** 2 + np.asarray(rho, dtype=float) * self.g_at(rho)
        if np.any(val < 0):
            raise InvalidStateError("rho*d^2(rho) lost positivity; g too negative")
        return np.sqrt(val)


@dataclass(frozen=True)
class HydroState:
    grid: Grid1D
    rho: np.ndarray
    lam: np.ndarray

    def __post_init__(self):
        rho = np.asarray(self.rho, dtype=float)
        lam = np.asarray(self.lam, dtype=float)
        if rho.shape != (self.grid.n,) or lam.shape != (self.grid.n,):
            raise InvalidStateError("rho and lam must match the grid")
        if np.any(rho < -1e-14):
            raise InvalidStateError("density must be nonnegative")
        total = self.grid.h * float(np.sum(rho))
        if abs(total - 1.0) > 1e-9:
            raise InvalidStateError(f"density not normalised: h*sum(rho) = {total!r}")
        object.__setattr__(self, "rho", np.maximum(rho, 0.0))
        object.__setattr__(self, "lam", lam)


def diffusion_current(
    spec: NaturalSystemSpec, dspec: DiffusionSpec, grid: Grid1D, rho: np.ndarray
) -> np.ndarray:
    """Non-convective current i = rho d(rho) (drho/dq) / m(q).

    Identically zero in classical mode; in quantum-pole mode the rho-pole
    cancels and the current stays regular through rho = 0.
    """
    rho = np.asarray(rho, dtype=float)
    if np.any(rho < 0):
        raise InvalidStateError("density must be nonnegative")
    grad = grad_central(rho, grid.h)
    return dspec.rho_d(rho) * grad / spec.mass_at(grid.nodes)


def _bulk_slice(rho: np.ndarray, floor_frac: float):
    """Bounds of the connected above-floor component containing the peak.

    Detached remnants at floor level (left behind by a moving support) are
    not part of the bulk and stay frozen.
    """
    mask = rho > floor_frac * float(np.max(rho))
    peak = int(np.argmax(rho))
    lo = peak
    while lo > 0 and mask[lo - 1]:
        lo -= 1
    hi = peak
    while hi < rho.size - 1 and mask[hi + 1]:
        hi += 1
    return lo, hi


def _check_nodeless(rho: np.ndarray, floor_frac: float, where: str,
                    hard_frac: float = 0.05, significant_frac: float = 1e3):
    """Reject when a deep density dip separates two substantial regions.

    A node means rho drops far below the floor with density well above the
    floor on both sides.  Floor-level remnants detached from a moving
    support do not count; neither do cells hovering within ``hard_frac``
    of the floor (support boundary noise).
    """
    floor = floor_frac * float(np.max(rho))
    deep = np.flatnonzero(rho < hard_frac * floor)
    if deep.size:
        sig = np.flatnonzero(rho > significant_frac * floor)
        if sig.size >= 2:
            inside = deep[(deep > sig[0]) & (deep < sig[-1])]
            if inside.size:
                raise StepRejectedError(
                    f"density node forming inside the bulk ({where})",
                    location=int(inside[0]),
                    diagnostics={"rho_min": float(rho[inside[0]]), "floor": floor},
                )
    return _bulk_slice(rho, floor_frac)


def _quantum_operator(spec: NaturalSystemSpec, grid: Grid1D, a: float) -> TridiagonalOperator:
    return sturm_liouville_operator(
        grid, lambda q: 1.0 / spec.mass_at(q), spec.potential_at, coeff=a * a
    )


def effective_hamiltonian_density(
    spec: NaturalSystemSpec,
    dspec: DiffusionSpec,
    state: HydroState,
    floor_frac: float = RHO_FLOOR_FRAC,
) -> np.ndarray:
    """Pointwise rho [ (dlam/dq)^2/2m + V ] + (1/2) rho d^2(rho) (drho/dq)^2 / m.

    Cells below the density floor contribute only through the first term
    with their (frozen) multiplier values.
    """
    grid = state.grid
    q = grid.nodes
    m = spec.mass_at(q)
    grad_lam = grad_central(state.lam, grid.h)
    grad_rho = grad_central(state.rho, grid.h)
    out = state.rho * (grad_lam**2 / (2.0 * m) + spec.potential_at(q))
    if dspec.mode == "quantum-pole":
        mask = state.rho > floor_frac * float(np.max(state.rho))
        hd2 = np.zeros_like(state.rho)
        hd2[mask] = (0.5 * dspec.a) ** 2 / state.rho[mask] + dspec.g_at(state.rho[mask])
        out = out + 0.5 * hd2 * grad_rho**2 / m
    return out


def _g_terms(spec, dspec, grid, rho):
    """(1/2) m^{-1} g'(rho) (drho/dq)^2 - d/dq(m^{-1} g(rho) drho/dq)."""
    if dspec.g is None:
        return 0.0
    h = grid.h
    q = grid.nodes
    grad_rho = grad_central(rho, h)
    first = 0.5 * dspec.g_grad_at(rho) * grad_rho**2 / spec.mass_at(q)
    mu_f = 1.0 / spec.mass_at(grid.midpoints)
    rho_f = 0.5 * (rho[:-1] + rho[1:])
    flux = mu_f * dspec.g_at(rho_f) * np.diff(rho) / h
    div = np.zeros_like(rho)
    div[1:-1] = (flux[1:] - flux[:-1]) / h
    return first - div


def madelung_step(
    spec: NaturalSystemSpec,
    dspec: DiffusionSpec,
    state: HydroState,
    dt: float,
    floor_frac: float = RHO_FLOOR_FRAC,
    support_floor: Optional[float] = None,
    _op: Optional[TridiagonalOperator] = None,
) -> HydroState:
    """One semi-implicit step of the coupled (rho, lam) system.

    Classical mode delegates to the shared classical transport kernel, so
    it reproduces mechanics.transport_density bit for bit.  In quantum-pole
    mode the density moves by limited upwind fluxes and the multiplier is
    then advanced with the quantum term evaluated at the fresh density
    (lagged sqrt(rho)); multiplier updates are restricted to the bulk
    where rho exceeds the relative floor.
    """
    grid = state.grid
    if dspec.mode == "classical":
        rho_new, lam_new = classical_transport_step(
            grid, state.rho, state.lam, spec, dt, support_floor=support_floor
        )
        return HydroState(grid, rho_new, lam_new)

    lo, hi = _check_nodeless(state.rho, floor_frac, "before step")

    v_face = _face_velocity(grid, spec, state.lam)
    active = slice(lo, hi)
    vmax = float(np.max(np.abs(v_face[active]))) if hi > lo else 0.0
    cfl = vmax * dt / grid.h
    if cfl > 1.0:
        raise StepRejectedError(
            f"CFL violation: max |v| dt / h = {cfl:.3g} > 1",
            location=lo + int(np.argmax(np.abs(v_face[active]))),
            diagnostics={"cfl": cfl},
        )
    v_masked = np.zeros_like(v_face)
    v_masked[active] = v_face[active]
    rho_new = upwind_density_update(grid, state.rho, v_masked, dt)

    # multiplier update with the quantum term at the fresh density; the
    # interior-node operator application gives (H sqrt(rho))/sqrt(rho),
    # which reduces exactly to w_r on discrete eigenstate densities
    op = _op if _op is not None else _quantum_operator(spec, grid, dspec.a)
    sr = np.sqrt(np.maximum(rho_new, 0.0))
    h_sr = np.zeros_like(sr)
    h_sr[1:-1] = op.apply(sr[1:-1])
    mask = np.zeros(grid.n, dtype=bool)
    lo2, hi2 = _bulk_slice(rho_new, floor_frac)
    mask[lo2 : hi2 + 1] = True
    grad_lam = grad_central(state.lam, grid.h)
    m = spec.mass_at(grid.nodes)
    rate = np.zeros(grid.n)
    rate[mask] = grad_lam[mask] ** 2 / (2.0 * m[mask]) + h_sr[mask] / sr[mask]
    if dspec.g is not None:
        gterm = _g_terms(spec, dspec, grid, rho_new)
        rate[mask] += np.asarray(gterm)[mask]
    lam_new = state.lam.copy()
    lam_new[mask] -= dt * rate[mask]

    _check_nodeless(rho_new, floor_frac, "after step")
    return HydroState(grid, rho_new, lam_new)


def madelung_run(
    spec: NaturalSystemSpec,
    dspec: DiffusionSpec,
    state: HydroState,
    t_final: float,
    dt: float,
    floor_frac: float = RHO_FLOOR_FRAC,
    observer=None,
) -> HydroState:
    """Advance to t_final in uniform steps of (at most) dt."""
    n_steps = max(1, int(np.ceil(t_final / dt)))
    dt = t_final / n_steps
    t = 0.0
    op = _quantum_operator(spec, state.grid, dspec.a) if dspec.mode == "quantum-pole" else None
    for _ in range(n_steps):
        state = madelung_step(spec, dspec, state, dt, floor_frac=floor_frac, _op=op)
        t += dt
        if observer is not None:
            observer(t, state)
    return state


def multiplier_residual_series(
    grid: Grid1D,
    spec: NaturalSystemSpec,
    dspec: DiffusionSpec,
    rho_series: np.ndarray,
    lam_series: np.ndarray,
    times: np.ndarray,
    floor_frac: float = RHO_FLOOR_FRAC,
):
    """Residual of the multiplier equation on stored snapshots.

    Returns (residuals, mask) with residuals shaped (nt - 2, n), centered
    in time and evaluated only on the bulk mask of each snapshot.
    """
    rho_series = np.asarray(rho_series, dtype=float)
    lam_series = np.asarray(lam_series, dtype=float)
    times = np.asarray(times, dtype=float)
    q = grid.nodes
    m = spec.mass_at(q)
    v = spec.potential_at(q)
    nt = rho_series.shape[0]
    out = np.zeros((nt - 2, grid.n))
    masks = np.zeros((nt - 2, grid.n), dtype=bool)
    op = _quantum_operator(spec, grid, dspec.a) if dspec.mode == "quantum-pole" else None
    for k in range(1, nt - 1):
        dldt = (lam_series[k + 1] - lam_series[k - 1]) / (times[k + 1] - times[k - 1])
        grad_lam = grad_central(lam_series[k], grid.h)
        res = dldt + grad_lam**2 / (2.0 * m)
        if op is not None:
            sr = np.sqrt(rho_series[k])
            h_sr = np.zeros_like(sr)
            h_sr[1:-1] = op.apply(sr[1:-1])
            mask = rho_series[k] > floor_frac * float(np.max(rho_series[k]))
            quantum = np.zeros(grid.n)
            quantum[mask] = h_sr[mask] / sr[mask]
            if dspec.g is not None:
                quantum[mask] += np.asarray(_g_terms(spec, dspec, grid, rho_series[k]))[mask]
            res = np.where(mask, res + quantum, 0.0)
        else:
            mask = np.ones(grid.n, dtype=bool)
            res = res + v
        out[k - 1] = res
        masks[k - 1] = mask
    return out, masks
