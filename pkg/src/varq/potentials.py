"""Named potential catalog shared by the library specs and the scenario CLI.

Every entry carries the potential and its analytic derivative so the
characteristic integrators do not have to fall back on finite differences.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np

from .errors import ConfigError

__all__ = ["Potential", "free", "harmonic", "quartic", "box", "polynomial", "make_potential"]


@dataclass(frozen=True)
class Potential:
    name: str
    v: Callable
    dv: Callable


def free() -> Potential:
    return Potential("free", lambda q: np.zeros_like(np.asarray(q, dtype=float)),
                     lambda q: np.zeros_like(np.asarray(q, dtype=float)))


def box() -> Potential:
    # hard walls come from the Dirichlet grid ends, the interior is flat
    p = free()
    return Potential("box", p.v, p.dv)


def harmonic(k: float = 1.0) -> Potential:
    return Potential("harmonic", lambda q: 0.5 * k * np.square(q), lambda q: k * np.asarray(q, dtype=float))


def quartic(c: float = 1.0) -> Potential:
    return Potential("quartic", lambda q: c * np.asarray(q, dtype=float) ** 4,
                     lambda q: 4.0 * c * np.asarray(q, dtype=float) ** 3)


def polynomial(coeffs: Sequence[float]) -> Potential:
    """V(q) = sum_j coeffs[j] * q**j."""
    c = np.asarray(coeffs, dtype=float)
    dc = c[1:] * np.arange(1, c.size)

    def v(q):
        return np.polyval(c[::-1], np.asarray(q, dtype=float))

    def dv(q):
        if dc.size == 0:
            return np.zeros_like(np.asarray(q, dtype=float))
        return np.polyval(dc[::-1], np.asarray(q, dtype=float))

    return Potential("polynomial", v, dv)


def make_potential(kind: str, **params) -> Potential:
    """Build a catalog potential from config parameters."""
    kind = kind.strip().lower()
    if kind == "free":
        return free()
    if kind == "box":
        return box()
    if kind == "harmonic":
        return harmonic(k=float(params.get("k", 1.0)))
    if kind == "quartic":
        return quartic(c=float(params.get("c", 1.0)))
    if kind == "polynomial":
        raw = params.get("coeffs")
        if raw is None:
            raise ConfigError("polynomial potential needs 'coeffs'", key="potential.coeffs")
        if isinstance(raw, str):
            coeffs = [float(s) for s in raw.replace(",", " ").split()]
        else:
            coeffs = [float(x) for x in raw]
        return polynomial(coeffs)
    raise ConfigError(f"unknown potential kind '{kind}'", key="potential.kind")
