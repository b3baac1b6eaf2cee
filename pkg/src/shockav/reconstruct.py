"""Interface-state reconstruction.

Piecewise-linear (MUSCL) extrapolation with minmod / van Leer / MC limiting,
applied either component-wise to primitive variables or to locally-projected
characteristic increments, plus fifth-order WENO on conserved characteristic
fields with interface-frozen Roe eigenvectors.

The shock-layer switch: wherever the artificial-viscosity coefficient is
nonzero in a cell or one of its neighbors along the reconstruction direction,
the limiter is forced to minmod (optionally also dropping to primitive
variables); under WENO5 the whole reconstruction falls back to the minmod
extrapolation there.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass

import numpy as np
from numba import njit


class LimiterKind(enum.IntEnum):
    Minmod = 0
    VanLeer = 1
    MC = 2


# suggestion-2 modes
SUGG2_OFF = 0
SUGG2_MINMOD_CHAR = 1
SUGG2_MINMOD_PRIM = 2

_SUGG2_NAMES = {"off": SUGG2_OFF,
                "minmod_characteristic": SUGG2_MINMOD_CHAR,
                "minmod_primitive": SUGG2_MINMOD_PRIM}

# reconstruction schemes
SCHEME_FIRST_ORDER = 0
SCHEME_MUSCL = 1
SCHEME_WENO5 = 2

_SCHEME_NAMES = {"firstorder": SCHEME_FIRST_ORDER,
                 "muscl": SCHEME_MUSCL,
                 "weno5": SCHEME_WENO5}

WENO_EPS = 1e-6


@dataclass(frozen=True)
class ReconConfig:
    scheme: str = "muscl"            # firstorder | muscl | weno5
    limiter: LimiterKind = LimiterKind.Minmod
    variables: str = "characteristic"  # characteristic | primitive
    suggestion2: str = "off"

    def __post_init__(self):
        if self.scheme not in _SCHEME_NAMES:
            raise ValueError(f"unknown reconstruction scheme {self.scheme!r}")
        if self.variables not in ("characteristic", "primitive"):
            raise ValueError(f"unknown variable set {self.variables!r}")
        if self.suggestion2 not in _SUGG2_NAMES:
            raise ValueError(f"unknown suggestion2 mode {self.suggestion2!r}")

    @property
    def scheme_id(self) -> int:
        return _SCHEME_NAMES[self.scheme]

    @property
    def sugg2_id(self) -> int:
        return _SUGG2_NAMES[self.suggestion2]

    @property
    def char_flag(self) -> bool:
        return self.variables == "characteristic"


@njit(cache=True, inline="always")
def _minmod(a, b):
    if a * b <= 0.0:
        return 0.0
    return a if abs(a) < abs(b) else b


@njit(cache=True, inline="always")
def _limiter(kind, a, b):
    if a * b <= 0.0:
        return 0.0
    if kind == 0:
        return a if abs(a) < abs(b) else b
    if kind == 1:
        return 2.0 * a * b / (a + b)
    m = _minmod(a, b)
    return _minmod(0.5 * (a + b), 2.0 * m)


def limiter(kind: LimiterKind, a: float, b: float) -> float:
    """Limited slope from the two one-sided differences."""
    return _limiter(int(kind), float(a), float(b))


def characteristic_matrices(q_cell, n, gas):
    """Transformation A (primitive increments -> characteristic) and its
    inverse, built from the cell's rho, c and the unit normal n."""
    nx, ny = float(n[0]), float(n[1])
    rho, p = q_cell.rho, q_cell.p
    c = math.sqrt(gas.gamma * p / rho)
    A = np.array([
        [nx, ny, 0.0, 1.0 / (rho * c)],
        [nx, ny, 0.0, -1.0 / (rho * c)],
        [0.0, 0.0, 1.0, -1.0 / (c * c)],
        [ny, -nx, 0.0, 0.0],
    ])
    A_inv = np.array([
        [0.5 * nx, 0.5 * nx, 0.0, ny],
        [0.5 * ny, 0.5 * ny, 0.0, -nx],
        [0.5 * rho / c, -0.5 * rho / c, 1.0, 0.0],
        [0.5 * rho * c, -0.5 * rho * c, 0.0, 0.0],
    ])
    return A, A_inv


@njit(cache=True, inline="always")
def _char_slope(d0m, d1m, d2m, d3m, d0p, d1p, d2p, d3p,
                nx, ny, rho, c, kind):
    """Limit the two difference vectors in characteristic space; return the
    limited slope back in primitive components."""
    irc = 1.0 / (rho * c)
    ic2 = 1.0 / (c * c)
    zm0 = nx * d0m + ny * d1m + d3m * irc
    zm1 = nx * d0m + ny * d1m - d3m * irc
    zm2 = d2m - d3m * ic2
    zm3 = ny * d0m - nx * d1m
    zp0 = nx * d0p + ny * d1p + d3p * irc
    zp1 = nx * d0p + ny * d1p - d3p * irc
    zp2 = d2p - d3p * ic2
    zp3 = ny * d0p - nx * d1p
    z0 = _limiter(kind, zm0, zp0)
    z1 = _limiter(kind, zm1, zp1)
    z2 = _limiter(kind, zm2, zp2)
    z3 = _limiter(kind, zm3, zp3)
    s0 = 0.5 * nx * (z0 + z1) + ny * z3
    s1 = 0.5 * ny * (z0 + z1) - nx * z3
    s2 = 0.5 * rho / c * (z0 - z1) + z2
    s3 = 0.5 * rho * c * (z0 - z1)
    return s0, s1, s2, s3


@njit(cache=True)
def muscl_slopes_kernel(Q, sbar, mask, axis, lim_id, use_char, sugg2, gamma, S):
    """Limited slopes along one grid direction for every cell that has both
    neighbors inside the array.  axis: 0 = xi, 1 = eta.  mask holds the
    shock-layer flags used by the suggestion-2 switch."""
    ni, nj = Q.shape[1], Q.shape[2]
    di = 1 if axis == 0 else 0
    dj = 1 - di
    for i in range(di, ni - di):
        for j in range(dj, nj - dj):
            d0m = Q[0, i, j] - Q[0, i - di, j - dj]
            d1m = Q[1, i, j] - Q[1, i - di, j - dj]
            d2m = Q[2, i, j] - Q[2, i - di, j - dj]
            d3m = Q[3, i, j] - Q[3, i - di, j - dj]
            d0p = Q[0, i + di, j + dj] - Q[0, i, j]
            d1p = Q[1, i + di, j + dj] - Q[1, i, j]
            d2p = Q[2, i + di, j + dj] - Q[2, i, j]
            d3p = Q[3, i + di, j + dj] - Q[3, i, j]

            kind = lim_id
            char = use_char
            if sugg2 != 0:
                if mask[i, j] or mask[i - di, j - dj] or mask[i + di, j + dj]:
                    kind = 0
                    if sugg2 == 2:
                        char = False

            if char:
                sx = sbar[i, j, 0]
                sy = sbar[i, j, 1]
                sm = math.sqrt(sx * sx + sy * sy)
                nx, ny = sx / sm, sy / sm
                rho = Q[2, i, j]
                c = math.sqrt(gamma * Q[3, i, j] / rho)
                s0, s1, s2, s3 = _char_slope(d0m, d1m, d2m, d3m,
                                             d0p, d1p, d2p, d3p,
                                             nx, ny, rho, c, kind)
            else:
                s0 = _limiter(kind, d0m, d0p)
                s1 = _limiter(kind, d1m, d1p)
                s2 = _limiter(kind, d2m, d2p)
                s3 = _limiter(kind, d3m, d3p)
            S[0, i, j] = s0
            S[1, i, j] = s1
            S[2, i, j] = s2
            S[3, i, j] = s3


@njit(cache=True)
def interface_states_kernel(Q, S, axis, lo, QL, QR):
    """Boundary-extrapolated states at the faces of one direction.

    Face (f, j) of the output separates cells (lo+f-1, j) and (lo+f, j) of the
    extended arrays (axis=0; the eta case is transposed accordingly):
    QL = left cell value + half its slope, QR = right cell value - half.
    """
    nf, nt = QL.shape[1], QL.shape[2]
    for f in range(nf):
        for t in range(nt):
            if axis == 0:
                il, jl = lo + f - 1, t
                ir, jr = lo + f, t
            else:
                il, jl = t, lo + f - 1
                ir, jr = t, lo + f
            for c in range(4):
                QL[c, f, t] = Q[c, il, jl] + 0.5 * S[c, il, jl]
                QR[c, f, t] = Q[c, ir, jr] - 0.5 * S[c, ir, jr]


@njit(cache=True, inline="always")
def _weno_edge(v0, v1, v2, v3, v4):
    """Jiang-Shu fifth-order value at the right edge of the center cell."""
    b0 = (13.0 / 12.0) * (v0 - 2.0 * v1 + v2)**2 + 0.25 * (v0 - 4.0 * v1 + 3.0 * v2)**2
    b1 = (13.0 / 12.0) * (v1 - 2.0 * v2 + v3)**2 + 0.25 * (v1 - v3)**2
    b2 = (13.0 / 12.0) * (v2 - 2.0 * v3 + v4)**2 + 0.25 * (3.0 * v2 - 4.0 * v3 + v4)**2
    a0 = 0.1 / (WENO_EPS + b0)**2
    a1 = 0.6 / (WENO_EPS + b1)**2
    a2 = 0.3 / (WENO_EPS + b2)**2
    inv = 1.0 / (a0 + a1 + a2)
    p0 = (2.0 * v0 - 7.0 * v1 + 11.0 * v2) / 6.0
    p1 = (-v1 + 5.0 * v2 + 2.0 * v3) / 6.0
    p2 = (2.0 * v2 + 5.0 * v3 - v4) / 6.0
    return inv * (a0 * p0 + a1 * p1 + a2 * p2)


@njit(cache=True)
def weno5_states_kernel(Q, U, Sface, mask, sbar, axis, lo, sugg2, gamma,
                        QL, QR):
    """WENO5 interface states (primitive out) at the faces of one direction.

    Conserved stencil values are projected onto the characteristic fields of
    the face-normal Jacobian, evaluated at the Roe average of the two
    adjacent cells, reconstructed per field, and projected back.  Faces whose
    owning cell (or its direction neighbor) sits in the shock layer fall back
    to minmod MUSCL extrapolation when the suggestion-2 switch is active.
    """
    nf, nt = QL.shape[1], QL.shape[2]
    gm = gamma - 1.0
    v0 = np.empty(5)
    v1 = np.empty(5)
    v2 = np.empty(5)
    v3 = np.empty(5)
    for f in range(nf):
        for t in range(nt):
            if axis == 0:
                il, jl = lo + f - 1, t
                ir, jr = lo + f, t
                di, dj = 1, 0
            else:
                il, jl = t, lo + f - 1
                ir, jr = t, lo + f
                di, dj = 0, 1

            # Roe average across the face, frozen eigen-frame
            rl = Q[2, il, jl]
            rr = Q[2, ir, jr]
            w = math.sqrt(rr / rl)
            iw = 1.0 / (1.0 + w)
            ux = (Q[0, il, jl] + w * Q[0, ir, jr]) * iw
            uy = (Q[1, il, jl] + w * Q[1, ir, jr]) * iw
            hl = 0.5 * (Q[0, il, jl]**2 + Q[1, il, jl]**2) \
                + gamma * Q[3, il, jl] / (gm * rl)
            hr = 0.5 * (Q[0, ir, jr]**2 + Q[1, ir, jr]**2) \
                + gamma * Q[3, ir, jr] / (gm * rr)
            h = (hl + w * hr) * iw
            ke = 0.5 * (ux * ux + uy * uy)
            a2 = gm * (h - ke)
            a = math.sqrt(a2)

            sx = Sface[f, t, 0]
            sy = Sface[f, t, 1]
            sm = math.sqrt(sx * sx + sy * sy)
            nx, ny = sx / sm, sy / sm
            tx, ty = ny, -nx
            un = ux * nx + uy * ny
            ut = ux * tx + uy * ty
            b1 = gm / a2
            b2 = b1 * ke

            for side in range(2):
                if side == 0:
                    ic, jc = il, jl
                else:
                    ic, jc = ir, jr
                switched = False
                if sugg2 != 0:
                    if mask[ic, jc] or mask[ic - di, jc - dj] or mask[ic + di, jc + dj]:
                        switched = True
                if switched:
                    # minmod MUSCL fallback in this cell
                    d0m = Q[0, ic, jc] - Q[0, ic - di, jc - dj]
                    d1m = Q[1, ic, jc] - Q[1, ic - di, jc - dj]
                    d2m = Q[2, ic, jc] - Q[2, ic - di, jc - dj]
                    d3m = Q[3, ic, jc] - Q[3, ic - di, jc - dj]
                    d0p = Q[0, ic + di, jc + dj] - Q[0, ic, jc]
                    d1p = Q[1, ic + di, jc + dj] - Q[1, ic, jc]
                    d2p = Q[2, ic + di, jc + dj] - Q[2, ic, jc]
                    d3p = Q[3, ic + di, jc + dj] - Q[3, ic, jc]
                    if sugg2 == 1:
                        sbx = sbar[ic, jc, 0]
                        sby = sbar[ic, jc, 1]
                        sbm = math.sqrt(sbx * sbx + sby * sby)
                        cnx, cny = sbx / sbm, sby / sbm
                        rho_c = Q[2, ic, jc]
                        c_c = math.sqrt(gamma * Q[3, ic, jc] / rho_c)
                        s0, s1, s2, s3 = _char_slope(
                            d0m, d1m, d2m, d3m, d0p, d1p, d2p, d3p,
                            cnx, cny, rho_c, c_c, 0)
                    else:
                        s0 = _minmod(d0m, d0p)
                        s1 = _minmod(d1m, d1p)
                        s2 = _minmod(d2m, d2p)
                        s3 = _minmod(d3m, d3p)
                    sgn = 1.0 if side == 0 else -1.0
                    if side == 0:
                        QL[0, f, t] = Q[0, ic, jc] + sgn * 0.5 * s0
                        QL[1, f, t] = Q[1, ic, jc] + sgn * 0.5 * s1
                        QL[2, f, t] = Q[2, ic, jc] + sgn * 0.5 * s2
                        QL[3, f, t] = Q[3, ic, jc] + sgn * 0.5 * s3
                    else:
                        QR[0, f, t] = Q[0, ic, jc] + sgn * 0.5 * s0
                        QR[1, f, t] = Q[1, ic, jc] + sgn * 0.5 * s1
                        QR[2, f, t] = Q[2, ic, jc] + sgn * 0.5 * s2
                        QR[3, f, t] = Q[3, ic, jc] + sgn * 0.5 * s3
                    continue

                # characteristic projection of the 5-cell conserved stencil
                for k in range(5):
                    off = k - 2
                    if side == 0:
                        ii = ic + off * di
                        jj = jc + off * dj
                    else:
                        ii = ic - off * di
                        jj = jc - off * dj
                    c0 = U[0, ii, jj]
                    c1 = U[1, ii, jj]
                    c2 = U[2, ii, jj]
                    c3 = U[3, ii, jj]
                    cn = c1 * nx + c2 * ny
                    ct = c1 * tx + c2 * ty
                    # left eigenvector rows
                    v0[k] = 0.5 * (c0 * (b2 + un / a) - (b1 * ux + nx / a) * c1
                                   - (b1 * uy + ny / a) * c2 + b1 * c3)
                    v1[k] = c0 * (1.0 - b2) + b1 * (ux * c1 + uy * c2 - c3)
                    v2[k] = ct - c0 * ut
                    v3[k] = 0.5 * (c0 * (b2 - un / a) - (b1 * ux - nx / a) * c1
                                   - (b1 * uy - ny / a) * c2 + b1 * c3)
                w0 = _weno_edge(v0[0], v0[1], v0[2], v0[3], v0[4])
                w1 = _weno_edge(v1[0], v1[1], v1[2], v1[3], v1[4])
                w2 = _weno_edge(v2[0], v2[1], v2[2], v2[3], v2[4])
                w3 = _weno_edge(v3[0], v3[1], v3[2], v3[3], v3[4])

                # back-projection: U = w0*K1 + w1*K2 + w2*K3 + w3*K4
                r0 = w0 + w1 + w3
                r1 = w0 * (ux - a * nx) + w1 * ux + w2 * tx + w3 * (ux + a * nx)
                r2 = w0 * (uy - a * ny) + w1 * uy + w2 * ty + w3 * (uy + a * ny)
                r3 = w0 * (h - a * un) + w1 * ke + w2 * ut + w3 * (h + a * un)

                rho_s = r0
                ux_s = r1 / rho_s
                uy_s = r2 / rho_s
                p_s = gm * (r3 - 0.5 * rho_s * (ux_s * ux_s + uy_s * uy_s))
                if side == 0:
                    QL[0, f, t] = ux_s
                    QL[1, f, t] = uy_s
                    QL[2, f, t] = rho_s
                    QL[3, f, t] = p_s
                else:
                    QR[0, f, t] = ux_s
                    QR[1, f, t] = uy_s
                    QR[2, f, t] = rho_s
                    QR[3, f, t] = p_s


def shock_mask(av_field: np.ndarray) -> np.ndarray:
    """Shock-layer indicator: cells with nonzero artificial viscosity."""
    return av_field > 0.0
