"""Classical probabilistic transport for natural systems H = p^2/2m(q) + V(q):
Legendre transform, characteristic (Hamilton) flow, density transport driven
by a global multiplier field S, and the residual checks used to validate
time-reversal and the irrelevance of density-gradient couplings in the
classical balance.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np

from .errors import (
    InvalidArgumentError,
    InvalidSpecError,
    InvalidStateError,
    StepRejectedError,
)
from .numerics import Grid1D, build_grid, grad_central, rk4_step

__all__ = [
    "NaturalSystemSpec",
    "PhaseState",
    "FlowResult",
    "ClassicalEnsemble",
    "legendre_hamiltonian",
    "hamilton_flow",
    "transport_density",
    "classical_transport_step",
    "hj_residual",
    "hj_residual_series",
    "continuity_residual_series",
    "lagrangian_equivalence_check",
    "normalize_density",
]

_FD_STEP = float(np.cbrt(np.finfo(float).eps))


def _eval_on(fn: Callable, q) -> np.ndarray:
    """Evaluate a scalar-or-vector callback on q, broadcasting constants."""
    out = np.asarray(fn(q), dtype=float)
    if out.shape != np.shape(q):
        out = np.broadcast_to(out, np.shape(q)).copy() if np.shape(q) else float(out)
    return out


def _fd_grad(fn: Callable) -> Callable:
    def dfn(q):
        q = np.asarray(q, dtype=float)
        step = _FD_STEP * np.maximum(1.0, np.abs(q))
        return (np.asarray(fn(q + step), dtype=float) - np.asarray(fn(q - step), dtype=float)) / (2.0 * step)

    return dfn


@dataclass(frozen=True)
class NaturalSystemSpec:
    """Positive mass profile m(q) and potential V(q) of a natural system.

    Analytic gradients are optional; central finite differences are used
    when they are not supplied.
    """

    mass: Callable
    potential: Callable
    mass_grad: Optional[Callable] = None
    potential_grad: Optional[Callable] = None

    def mass_at(self, q):
        m = _eval_on(self.mass, q)
        if np.any(np.asarray(m) <= 0):
            raise InvalidSpecError("mass m(q) must be positive")
        return m

    def potential_at(self, q):
        v = _eval_on(self.potential, q)
        if not np.all(np.isfinite(np.asarray(v))):
            raise InvalidSpecError("potential V(q) must be finite")
        return v

    def dmass_at(self, q):
        fn = self.mass_grad if self.mass_grad is not None else _fd_grad(self.mass)
        return _eval_on(fn, q)

    def dpotential_at(self, q):
        fn = self.potential_grad if self.potential_grad is not None else _fd_grad(self.potential)
        return _eval_on(fn, q)


@dataclass(frozen=True)
class PhaseState:
    q: float
    p: float

    def __post_init__(self):
        if not (np.isfinite(self.q) and np.isfinite(self.p)):
            raise InvalidStateError("phase-space point must be finite")


def legendre_hamiltonian(spec: NaturalSystemSpec, q: float, p: float) -> float:
    """H(q, p) = p^2 / (2 m(q)) + V(q).

    For a positive mass the velocity-momentum map is invertible, so this is
    the exact Legendre transform of the quadratic kinetic Lagrangian.
    """
    if not (np.isfinite(q) and np.isfinite(p)):
        raise InvalidArgumentError("q and p must be finite")
    m = float(spec.mass_at(q))
    return float(p * p / (2.0 * m) + spec.potential_at(q))


@dataclass(frozen=True)
class FlowResult:
    """Trajectory of the characteristic flow; (n_steps + 1, 2) [q, p] rows."""

    states: np.ndarray
    dt: float
    escaped: bool = False
    escape_step: Optional[int] = None

    @property
    def times(self) -> np.ndarray:
        return self.dt * np.arange(self.states.shape[0])


def hamilton_flow(
    spec: NaturalSystemSpec,
    state: PhaseState,
    dt: float,
    n_steps: int,
    q_range: Optional[tuple] = None,
) -> FlowResult:
    """Integrate dq/dt = dH/dp, dp/dt = -dH/dq with RK4.

    If the trajectory leaves ``q_range`` (or stops being finite) the run is
    reported as escaped rather than raising; the trajectory is truncated at
    the escape step.
    """
    if not np.isfinite(dt * n_steps):
        raise InvalidArgumentError("dt * n_steps must be finite")

    def rhs(y):
        q, p = y
        m = float(spec.mass_at(q))
        dm = float(spec.dmass_at(q))
        dv = float(spec.dpotential_at(q))
        return np.array([p / m, p * p * dm / (2.0 * m * m) - dv])

    out = np.empty((n_steps + 1, 2))
    out[0] = (state.q, state.p)
    y = out[0].copy()
    for k in range(1, n_steps + 1):
        y = rk4_step(rhs, y, dt)
        out[k] = y
        bad = not np.all(np.isfinite(y))
        if q_range is not None and not bad:
            bad = not (q_range[0] <= y[0] <= q_range[1])
        if bad:
            return FlowResult(out[: k + 1].copy(), dt, escaped=True, escape_step=k)
    return FlowResult(out, dt)


def normalize_density(grid: Grid1D, rho: np.ndarray) -> np.ndarray:
    rho = np.asarray(rho, dtype=float)
    total = grid.h * float(np.sum(rho))
    if total <= 0:
        raise InvalidStateError("density has nonpositive total mass")
    return rho / total


@dataclass(frozen=True)
class ClassicalEnsemble:
    """Density rho plus the global multiplier field S on a shared grid."""

    grid: Grid1D
    rho: np.ndarray
    S: np.ndarray

    def __post_init__(self):
        rho = np.asarray(self.rho, dtype=float)
        S = np.asarray(self.S, dtype=float)
        if rho.shape != (self.grid.n,) or S.shape != (self.grid.n,):
            raise InvalidStateError("rho and S must match the grid")
        if np.any(rho < -1e-14):
            raise InvalidStateError("density must be nonnegative")
        total = self.grid.h * float(np.sum(rho))
        if abs(total - 1.0) > 1e-9:
            raise InvalidStateError(f"density not normalised: h*sum(rho) = {total!r}")
        object.__setattr__(self, "rho", np.maximum(rho, 0.0))
        object.__setattr__(self, "S", S)


def _face_velocity(grid: Grid1D, spec: NaturalSystemSpec, lam: np.ndarray) -> np.ndarray:
    """Characteristic velocity dH/dp = (dS/dq)/m at the n-1 face midpoints."""
    m_face = spec.mass_at(grid.midpoints)
    return np.diff(lam) / grid.h / m_face


def _minmod(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    return np.where(a * b > 0, np.where(np.abs(a) < np.abs(b), a, b), 0.0)


def upwind_density_update(grid: Grid1D, rho: np.ndarray, v_face: np.ndarray, dt: float) -> np.ndarray:
    """Conservative upwind step with minmod-limited face reconstruction.

    Second order where the density is smooth, first order at extrema; the
    limiter keeps the update monotone.  Telescoping fluxes with no-flux
    walls keep h*sum(rho) exact to roundoff.
    """
    drho = np.zeros_like(rho)
    drho[1:-1] = _minmod(rho[1:-1] - rho[:-2], rho[2:] - rho[1:-1])
    nu = v_face * dt / grid.h
    r_left = rho[:-1] + 0.5 * (1.0 - nu) * drho[:-1]
    r_right = rho[1:] - 0.5 * (1.0 + nu) * drho[1:]
    flux = np.where(v_face > 0.0, v_face * r_left, v_face * r_right)
    new = rho.copy()
    new[:-1] -= (dt / grid.h) * flux
    new[1:] += (dt / grid.h) * flux
    return new


def _godunov_hj_update(grid: Grid1D, spec: NaturalSystemSpec, S: np.ndarray, dt: float) -> np.ndarray:
    """Upwind (Godunov) step of dS/dt + (dS/dq)^2/2m + V = 0 for convex H."""
    h = grid.h
    dm = np.empty_like(S)
    dp = np.empty_like(S)
    dm[1:] = np.diff(S) / h
    dp[:-1] = np.diff(S) / h
    dm[0] = dp[0]
    dp[-1] = dm[-1]
    p2 = np.maximum(np.maximum(dm, 0.0) ** 2, np.minimum(dp, 0.0) ** 2)
    q = grid.nodes
    return S - dt * (p2 / (2.0 * spec.mass_at(q)) + spec.potential_at(q))


def _support_window(rho: np.ndarray, floor_frac: float, buffer: int) -> tuple:
    """Index window [lo, hi] covering {rho > floor} dilated by ``buffer``."""
    mask = rho > floor_frac * float(np.max(rho))
    idx = np.flatnonzero(mask)
    lo = max(int(idx[0]) - buffer, 0)
    hi = min(int(idx[-1]) + buffer, rho.size - 1)
    return lo, hi


def classical_transport_step(
    grid: Grid1D,
    rho: np.ndarray,
    S: np.ndarray,
    spec: NaturalSystemSpec,
    dt: float,
    support_floor: Optional[float] = None,
    buffer: int = 12,
):
    """Shared kernel: one coupled (rho, S) step of the classical balance.

    With ``support_floor`` set, the multiplier equation is advanced only on
    the support window {rho > floor * max(rho)} (dilated by ``buffer``
    cells) and extended quadratically outside it.  The equations only hold
    where rho > 0, and restricting them there keeps the multiplier
    gradients bounded by the ensemble's physical momentum range even while
    the density passes through a focus.

    Raises StepRejectedError when the CFL number exceeds 1 on active faces.
    """
    if support_floor is None:
        lo, hi = 0, grid.n - 1
    else:
        lo, hi = _support_window(rho, support_floor, buffer)

    v_face = _face_velocity(grid, spec, S)
    active = slice(lo, hi)  # faces between nodes lo..hi
    vmax = float(np.max(np.abs(v_face[active]))) if hi > lo else 0.0
    cfl = vmax * dt / grid.h
    if cfl > 1.0:
        loc = lo + int(np.argmax(np.abs(v_face[active])))
        raise StepRejectedError(
            f"CFL violation: max |v| dt / h = {cfl:.3g} > 1",
            location=loc,
            diagnostics={"cfl": cfl},
        )

    if support_floor is None:
        rho_new = upwind_density_update(grid, rho, v_face, dt)
        S_new = _godunov_hj_update(grid, spec, S, dt)
        return rho_new, S_new

    v_masked = np.zeros_like(v_face)
    v_masked[active] = v_face[active]
    rho_new = upwind_density_update(grid, rho, v_masked, dt)

    sub = build_grid(grid.nodes[lo], grid.nodes[hi], hi - lo + 1) if hi - lo + 1 >= 3 else None
    S_new = S.copy()
    if sub is not None:
        S_new[lo : hi + 1] = _godunov_hj_update(sub, spec, S[lo : hi + 1], dt)
    # quadratic extension outside the window (matching edge gradient and
    # curvature): the multiplier is local to the support, outside values
    # only seed cells the window grows into, and keeping the curvature
    # avoids kicking the density when the window turns around
    h = grid.h
    if lo > 0:
        gl = (S_new[lo + 1] - S_new[lo]) / h
        cl = (S_new[lo + 2] - 2.0 * S_new[lo + 1] + S_new[lo]) / (h * h) if lo + 2 < grid.n else 0.0
        d = h * np.arange(lo, 0, -1)
        S_new[:lo] = S_new[lo] - gl * d + 0.5 * cl * d * d
    if hi < grid.n - 1:
        gr = (S_new[hi] - S_new[hi - 1]) / h
        cr = (S_new[hi] - 2.0 * S_new[hi - 1] + S_new[hi - 2]) / (h * h) if hi - 2 >= 0 else 0.0
        d = h * np.arange(1, grid.n - hi)
        S_new[hi + 1 :] = S_new[hi] + gr * d + 0.5 * cr * d * d
    return rho_new, S_new


def transport_density(
    ens: ClassicalEnsemble,
    spec: NaturalSystemSpec,
    dt: float,
    support_floor: Optional[float] = None,
) -> ClassicalEnsemble:
    """One step of the coupled global system

        drho/dt + d/dq (rho dS/dq / m) = 0,    dS/dt + H(q, dS/dq) = 0.

    ``support_floor`` switches on the support-restricted multiplier update
    (see classical_transport_step); omit it to advance both fields on the
    whole grid.
    """
    rho_new, S_new = classical_transport_step(
        ens.grid, ens.rho, ens.S, spec, dt, support_floor=support_floor
    )
    return ClassicalEnsemble(ens.grid, rho_new, S_new)


def transport_run(
    ens: ClassicalEnsemble,
    spec: NaturalSystemSpec,
    t_final: float,
    dt: float,
    support_floor: Optional[float] = None,
    observer=None,
) -> ClassicalEnsemble:
    """Advance the ensemble to t_final in uniform steps of (at most) dt.

    ``observer(t, ens)`` is called after every step when given.
    """
    n_steps = max(1, int(np.ceil(t_final / dt)))
    dt = t_final / n_steps
    t = 0.0
    for _ in range(n_steps):
        ens = transport_density(ens, spec, dt, support_floor=support_floor)
        t += dt
        if observer is not None:
            observer(t, ens)
    return ens


def hj_residual(ens: ClassicalEnsemble, spec: NaturalSystemSpec, dSdt: np.ndarray) -> np.ndarray:
    """Pointwise residual dS/dt + H(q, dS/dq) with a central gradient."""
    dSdt = np.asarray(dSdt, dtype=float)
    if dSdt.shape != (ens.grid.n,):
        raise InvalidArgumentError("dSdt must match the grid")
    q = ens.grid.nodes
    grad = grad_central(ens.S, ens.grid.h)
    return dSdt + grad**2 / (2.0 * spec.mass_at(q)) + spec.potential_at(q)


def hj_residual_series(grid: Grid1D, spec: NaturalSystemSpec, S_series: np.ndarray, times: np.ndarray) -> np.ndarray:
    """Residual of the S-equation on stored snapshots, centered in time.

    Returns an (nt - 2, n) array aligned with times[1:-1].
    """
    S_series = np.asarray(S_series, dtype=float)
    times = np.asarray(times, dtype=float)
    q = grid.nodes
    m = spec.mass_at(q)
    v = spec.potential_at(q)
    out = np.empty((S_series.shape[0] - 2, grid.n))
    for k in range(1, S_series.shape[0] - 1):
        dSdt = (S_series[k + 1] - S_series[k - 1]) / (times[k + 1] - times[k - 1])
        grad = grad_central(S_series[k], grid.h)
        out[k - 1] = dSdt + grad**2 / (2.0 * m) + v
    return out


def continuity_residual_series(
    grid: Grid1D,
    spec: NaturalSystemSpec,
    rho_series: np.ndarray,
    lam_series: np.ndarray,
    times: np.ndarray,
) -> np.ndarray:
    """Residual of drho/dt + d/dq(rho dlam/dq / m) on stored snapshots."""
    rho_series = np.asarray(rho_series, dtype=float)
    lam_series = np.asarray(lam_series, dtype=float)
    times = np.asarray(times, dtype=float)
    q = grid.nodes
    m = spec.mass_at(q)
    out = np.empty((rho_series.shape[0] - 2, grid.n))
    for k in range(1, rho_series.shape[0] - 1):
        drdt = (rho_series[k + 1] - rho_series[k - 1]) / (times[k + 1] - times[k - 1])
        flux = rho_series[k] * grad_central(lam_series[k], grid.h) / m
        out[k - 1] = drdt + grad_central(flux, grid.h)
    return out


def lagrangian_equivalence_check(
    ens: ClassicalEnsemble,
    spec: NaturalSystemSpec,
    d_rho: Callable,
    dt: Optional[float] = None,
) -> float:
    """Max discrepancy between density updates with and without the
    d(rho)-coupling routed through the multiplier gradient.

    In the classical balance the momentum entering the velocity is
    (dlam/dq - d(rho) drho/dq) while the multiplier itself shifts by the
    antiderivative of d, so the two contributions cancel identically and
    the returned discrepancy is zero to rounding.
    """
    grid = ens.grid
    if dt is None:
        v0 = _face_velocity(grid, spec, ens.S)
        vmax = float(np.max(np.abs(v0)))
        dt = 0.5 * grid.h / max(vmax, 1e-12)
    rho_a, _ = classical_transport_step(grid, ens.rho, ens.S, spec, dt)

    drho_face = np.diff(ens.rho) / grid.h
    rho_face = 0.5 * (ens.rho[:-1] + ens.rho[1:])
    shift = np.asarray(d_rho(rho_face), dtype=float) * drho_face
    lam_grad_face = np.diff(ens.S) / grid.h + shift
    p_face = lam_grad_face - shift
    v_face = p_face / spec.mass_at(grid.midpoints)
    rho_b = upwind_density_update(grid, ens.rho, v_face, dt)
    return float(np.max(np.abs(rho_a - rho_b)))
