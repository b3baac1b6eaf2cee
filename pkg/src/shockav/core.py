"""Gas state representations, the polytropic EOS, and inviscid flux evaluation.

Primitive states are ordered (u_x, u_y, rho, p); conserved states are
(rho, rho*u_x, rho*u_y, E) with E = rho*h0 - p the total energy per volume.
Field arrays carry these four components along axis 0.

Density and pressure floors are hard errors, not clips: the flows this
package targets never approach vacuum, so a floor violation means the
scheme has gone wrong and silently patching it would hide the failure.
"""

from __future__ import annotations

from typing import NamedTuple

import numpy as np
from numba import njit

RHO_FLOOR = 1e-12
P_FLOOR = 1e-12

# component indices, shared by every module that touches field arrays
UX, UY, RHO, PRE = 0, 1, 2, 3


class NonphysicalState(RuntimeError):
    """Raised when a conversion or solver produces rho or p at/below floor."""

    def __init__(self, message, where=None):
        super().__init__(message if where is None else f"{message} at cell {where}")
        self.where = where


class Gas(NamedTuple):
    """Polytropic gas; gamma is the ratio of specific heats."""

    gamma: float = 1.4


class PrimitiveState(NamedTuple):
    u_x: float
    u_y: float
    rho: float
    p: float


class ConservedState(NamedTuple):
    mass: float
    mom_x: float
    mom_y: float
    energy: float


def total_enthalpy(q: PrimitiveState, gas: Gas) -> float:
    """Specific total enthalpy h0 = |u|^2/2 + gamma*p / ((gamma-1)*rho)."""
    g = gas.gamma
    return 0.5 * (q.u_x**2 + q.u_y**2) + g * q.p / ((g - 1.0) * q.rho)


def sound_speed(q: PrimitiveState, gas: Gas) -> float:
    return float(np.sqrt(gas.gamma * q.p / q.rho))


def to_conserved(q: PrimitiveState, gas: Gas) -> ConservedState:
    e = 0.5 * q.rho * (q.u_x**2 + q.u_y**2) + q.p / (gas.gamma - 1.0)
    return ConservedState(q.rho, q.rho * q.u_x, q.rho * q.u_y, e)


def to_primitive(u: ConservedState, gas: Gas) -> PrimitiveState:
    """Invert to_conserved.  Raises NonphysicalState on floored rho or p."""
    rho = u.mass
    if rho <= RHO_FLOOR:
        raise NonphysicalState(f"density {rho} at/below floor {RHO_FLOOR}")
    ux = u.mom_x / rho
    uy = u.mom_y / rho
    p = (gas.gamma - 1.0) * (u.energy - 0.5 * rho * (ux * ux + uy * uy))
    if p <= P_FLOOR:
        raise NonphysicalState(f"pressure {p} at/below floor {P_FLOOR}")
    return PrimitiveState(ux, uy, rho, p)


def physical_flux(q: PrimitiveState, s, gas: Gas) -> ConservedState:
    """Projected inviscid flux s_x*F_x(q) + s_y*F_y(q) for area vector s."""
    sx, sy = s
    un = sx * q.u_x + sy * q.u_y  # velocity times face area, |s| included
    e = 0.5 * q.rho * (q.u_x**2 + q.u_y**2) + q.p / (gas.gamma - 1.0)
    return ConservedState(
        q.rho * un,
        q.rho * q.u_x * un + q.p * sx,
        q.rho * q.u_y * un + q.p * sy,
        (e + q.p) * un,
    )


# ---------------------------------------------------------------------------
# field-array versions (component axis first); these carry the hot paths

def to_conserved_field(Q: np.ndarray, gamma: float) -> np.ndarray:
    U = np.empty_like(Q)
    ux, uy, rho, p = Q[UX], Q[UY], Q[RHO], Q[PRE]
    U[0] = rho
    U[1] = rho * ux
    U[2] = rho * uy
    U[3] = 0.5 * rho * (ux * ux + uy * uy) + p / (gamma - 1.0)
    return U


def to_primitive_field(U: np.ndarray, gamma: float) -> np.ndarray:
    """Vectorized inverse; raises NonphysicalState with the first bad index."""
    Q = np.empty_like(U)
    rho = U[0]
    with np.errstate(divide="ignore", invalid="ignore"):
        ux = U[1] / rho
        uy = U[2] / rho
        p = (gamma - 1.0) * (U[3] - 0.5 * rho * (ux * ux + uy * uy))
    bad = (rho <= RHO_FLOOR) | ~np.isfinite(rho)
    if bad.any():
        where = np.unravel_index(np.argmax(bad), bad.shape)
        raise NonphysicalState(f"density {rho[where]} at/below floor", where)
    bad = (p <= P_FLOOR) | ~np.isfinite(p)
    if bad.any():
        where = np.unravel_index(np.argmax(bad), bad.shape)
        raise NonphysicalState(f"pressure {p[where]} at/below floor", where)
    Q[UX], Q[UY], Q[RHO], Q[PRE] = ux, uy, rho, p
    return Q


def sound_speed_field(Q: np.ndarray, gamma: float) -> np.ndarray:
    return np.sqrt(gamma * Q[PRE] / Q[RHO])


@njit(cache=True)
def prim_to_cons_cell(ux, uy, rho, p, gamma):  # pragma: no cover - trivial jit
    e = 0.5 * rho * (ux * ux + uy * uy) + p / (gamma - 1.0)
    return rho, rho * ux, rho * uy, e


@njit(cache=True)
def flux_cell(ux, uy, rho, p, sx, sy, gamma):
    """Scalar projected flux, shared by the jitted scheme kernels."""
    un = sx * ux + sy * uy
    e = 0.5 * rho * (ux * ux + uy * uy) + p / (gamma - 1.0)
    return (rho * un,
            rho * ux * un + p * sx,
            rho * uy * un + p * sy,
            (e + p) * un)
