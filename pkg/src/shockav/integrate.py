"""Time marching.

The semi-discrete rate L(Q) = -(1/V) * (net inviscid face flux) + source is
advanced with forward Euler, SSP RK2/RK3, or the Hancock-Rodionov
predictor-corrector, which needs a single Riemann sweep per step.  The
artificial-viscosity coefficient, the viscous source and the shock mask are
computed once per outer step from level-n data and held fixed across stages;
ghost layers are refilled before every rate evaluation at its stage time.
"""

from __future__ import annotations

import enum
import math
import time
from dataclasses import dataclass, field

import numpy as np
from numba import njit

from .boundary import PostShockOverwrite, fill_ghosts
from .core import (Gas, NonphysicalState, P_FLOOR, RHO_FLOOR, flux_cell,
                   to_conserved_field)
from .grid import NG, StructuredGrid
from .reconstruct import (ReconConfig, SCHEME_FIRST_ORDER, SCHEME_MUSCL,
                          SCHEME_WENO5, interface_states_kernel,
                          muscl_slopes_kernel, shock_mask,
                          weno5_states_kernel)
from .riemann import SolverKind, solve_flux_batch
from .viscosity import AvModel, ViscousSource, compute_av_field, viscous_rhs


class SchemeKind(enum.Enum):
    Euler = "euler"
    RK2 = "rk2"
    RK3 = "rk3"
    HancockRodionov = "hancock"


STEPPER_NAMES = {k.value: k for k in SchemeKind}


def default_cfl(recon: ReconConfig, stepper: SchemeKind) -> float:
    """0.6 for the RK3 + WENO5 pairing, 0.8 for everything else."""
    if stepper is SchemeKind.RK3 and recon.scheme == "weno5":
        return 0.6
    return 0.8


@dataclass(frozen=True)
class Numerics:
    """Everything that defines the discretization, minus the grid."""

    recon: ReconConfig = field(default_factory=ReconConfig)
    solver: SolverKind = SolverKind.Exact
    stepper: SchemeKind = SchemeKind.HancockRodionov
    av: AvModel = field(default_factory=AvModel)
    cfl: float | None = None
    entropy_fix: bool = False

    def __post_init__(self):
        if (self.stepper is SchemeKind.HancockRodionov
                and self.recon.scheme == "weno5"):
            raise ValueError("the predictor-corrector stepper needs cell "
                             "slopes; pair weno5 with rk2/rk3 instead")
        if self.cfl is not None and not 0.0 < self.cfl:
            raise ValueError(f"cfl must be positive, got {self.cfl}")

    @property
    def effective_cfl(self) -> float:
        return self.cfl if self.cfl is not None else \
            default_cfl(self.recon, self.stepper)


@dataclass
class StepContext:
    """Per-step frozen data: time increment, viscous source, shock mask."""

    dt: float
    frozen_source: ViscousSource
    shock_mask: np.ndarray
    cfl: float

    def __post_init__(self):
        if not self.dt > 0.0:
            raise ValueError(f"dt must be positive, got {self.dt}")


@dataclass
class FlowState:
    grid: StructuredGrid
    gas: Gas
    Qext: np.ndarray  # (4, I+2*NG, J+2*NG) primitive, ghosts included
    t: float = 0.0
    n: int = 0

    @property
    def Q(self) -> np.ndarray:
        """Interior primitive view (4, I, J)."""
        return self.Qext[:, NG:NG + self.grid.I, NG:NG + self.grid.J]


def make_state(grid: StructuredGrid, gas: Gas, Q0: np.ndarray,
               t: float = 0.0) -> FlowState:
    """Wrap an interior primitive field (copied) in an extended-lattice state.

    Ghost layers start at zero and are only meaningful after a boundary fill.
    """
    Q0 = np.asarray(Q0, dtype=np.float64)
    if Q0.shape != (4, grid.I, grid.J):
        raise ValueError(f"initial field shape {Q0.shape} does not match "
                         f"(4, {grid.I}, {grid.J})")
    Qext = np.zeros((4, grid.I + 2 * NG, grid.J + 2 * NG))
    Qext[:, NG:NG + grid.I, NG:NG + grid.J] = Q0
    return FlowState(grid, gas, Qext, t=t)


class Workspace:
    """Preallocated scratch arrays for one grid size (reused every step)."""

    def __init__(self, grid: StructuredGrid):
        I, J = grid.I, grid.J
        ni, nj = I + 2 * NG, J + 2 * NG
        self.S_xi = np.zeros((4, ni, nj))
        self.S_eta = np.zeros((4, ni, nj))
        self.U_ext = np.zeros((4, ni, nj))
        self.QLx = np.empty((4, I + 1, J))
        self.QRx = np.empty((4, I + 1, J))
        self.Fx = np.empty((4, I + 1, J))
        self.QLe = np.empty((4, J + 1, I))
        self.QRe = np.empty((4, J + 1, I))
        self.Fe = np.empty((4, J + 1, I))
        self.rate = np.empty((4, I, J))
        self.U0 = np.empty((4, I, J))
        self.Ua = np.empty((4, I, J))
        self.Ub = np.empty((4, I, J))
        self.Qa = np.empty((4, I, J))
        self.Qb = np.empty((4, I, J))


# ---------------------------------------------------------------------------
# jitted kernels


@njit(cache=True)
def dt_kernel(Q, sbx, sbe, vol, ng, gamma):
    """min over cells of V / (lam_xi + lam_eta); lam = |u.S| + a|S| per
    direction with the cell's face-pair average S.  The first ghost ring is
    included: it feeds the boundary-face Riemann problems, and a strong jump
    held in the ghosts (a shock entering through an inflow boundary) must
    constrain the very first step."""
    ni, nj = vol.shape
    best = 1e300
    for i in range(ng - 1, ni - ng + 1):
        for j in range(ng - 1, nj - ng + 1):
            ux = Q[0, i, j]
            uy = Q[1, i, j]
            a = math.sqrt(gamma * Q[3, i, j] / Q[2, i, j])
            sx = sbx[i, j, 0]
            sy = sbx[i, j, 1]
            lam = abs(ux * sx + uy * sy) + a * math.sqrt(sx * sx + sy * sy)
            ex = sbe[i, j, 0]
            ey = sbe[i, j, 1]
            lam += abs(ux * ex + uy * ey) + a * math.sqrt(ex * ex + ey * ey)
            d = vol[i, j] / lam
            if d < best:
                best = d
    return best


@njit(cache=True)
def accumulate_rate_kernel(Fx, Fe, vol, src, ng, out):
    """out = -(flux divergence)/V + src on interior cells.  Fx is laid out
    (4, I+1, J) over xi faces, Fe (4, J+1, I) over eta faces."""
    I = out.shape[1]
    J = out.shape[2]
    for c in range(4):
        for i in range(I):
            for j in range(J):
                d = (Fx[c, i + 1, j] - Fx[c, i, j]) \
                    + (Fe[c, j + 1, i] - Fe[c, j, i])
                out[c, i, j] = -d / vol[ng + i, ng + j] + src[c, i, j]


@njit(cache=True)
def combine_kernel(out, a, X, b, Y, w, R):
    # out = a*X + b*Y + w*R, elementwise (aliasing out with X or Y is fine)
    for c in range(4):
        for i in range(out.shape[1]):
            for j in range(out.shape[2]):
                out[c, i, j] = a * X[c, i, j] + b * Y[c, i, j] + w * R[c, i, j]


@njit(cache=True)
def cons_from_prim_kernel(Q, gamma, U):
    for i in range(Q.shape[1]):
        for j in range(Q.shape[2]):
            ux = Q[0, i, j]
            uy = Q[1, i, j]
            rho = Q[2, i, j]
            p = Q[3, i, j]
            U[0, i, j] = rho
            U[1, i, j] = rho * ux
            U[2, i, j] = rho * uy
            U[3, i, j] = 0.5 * rho * (ux * ux + uy * uy) + p / (gamma - 1.0)


@njit(cache=True)
def prim_from_cons_kernel(U, gamma, Q):
    """Invert in place; returns -1, or the linear index of the first cell
    whose density or pressure fell to the floor."""
    n, m = U.shape[1], U.shape[2]
    for i in range(n):
        for j in range(m):
            rho = U[0, i, j]
            if not (rho > RHO_FLOOR) or not math.isfinite(rho):
                return i * m + j
            ux = U[1, i, j] / rho
            uy = U[2, i, j] / rho
            p = (gamma - 1.0) * (U[3, i, j] - 0.5 * rho * (ux * ux + uy * uy))
            if not (p > P_FLOOR) or not math.isfinite(p):
                return i * m + j
            Q[0, i, j] = ux
            Q[1, i, j] = uy
            Q[2, i, j] = rho
            Q[3, i, j] = p
    return -1


@njit(cache=True)
def prim_from_cons_fallback_kernel(U, Qn, gamma, Q):
    """Like prim_from_cons_kernel, but a cell whose inversion lands on a
    floor reverts to its level-n primitives Qn instead of aborting; returns
    the number of reverted cells.  Intended for predictor states only,
    which are intermediates: a local revert merely drops the half-step
    extrapolation to first order in time at that cell."""
    n, m = U.shape[1], U.shape[2]
    reverted = 0
    for i in range(n):
        for j in range(m):
            rho = U[0, i, j]
            ok = rho > RHO_FLOOR and math.isfinite(rho)
            if ok:
                ux = U[1, i, j] / rho
                uy = U[2, i, j] / rho
                p = (gamma - 1.0) * (U[3, i, j]
                                     - 0.5 * rho * (ux * ux + uy * uy))
                ok = p > P_FLOOR and math.isfinite(p)
            if ok:
                Q[0, i, j] = ux
                Q[1, i, j] = uy
                Q[2, i, j] = rho
                Q[3, i, j] = p
            else:
                Q[0, i, j] = Qn[0, i, j]
                Q[1, i, j] = Qn[1, i, j]
                Q[2, i, j] = Qn[2, i, j]
                Q[3, i, j] = Qn[3, i, j]
                reverted += 1
    return reverted


@njit(cache=True)
def prim_from_cons_stage_fallback_kernel(U, Qn, Un, gamma, Q):
    """Fallback inversion for Runge-Kutta stage states.  A reverted cell is
    also written back into the stage conservative array U (from Un), because
    later stage combinations reuse U directly."""
    n, m = U.shape[1], U.shape[2]
    reverted = 0
    for i in range(n):
        for j in range(m):
            rho = U[0, i, j]
            ok = rho > RHO_FLOOR and math.isfinite(rho)
            if ok:
                ux = U[1, i, j] / rho
                uy = U[2, i, j] / rho
                p = (gamma - 1.0) * (U[3, i, j]
                                     - 0.5 * rho * (ux * ux + uy * uy))
                ok = p > P_FLOOR and math.isfinite(p)
            if ok:
                Q[0, i, j] = ux
                Q[1, i, j] = uy
                Q[2, i, j] = rho
                Q[3, i, j] = p
            else:
                Q[0, i, j] = Qn[0, i, j]
                Q[1, i, j] = Qn[1, i, j]
                Q[2, i, j] = Qn[2, i, j]
                Q[3, i, j] = Qn[3, i, j]
                U[0, i, j] = Un[0, i, j]
                U[1, i, j] = Un[1, i, j]
                U[2, i, j] = Un[2, i, j]
                U[3, i, j] = Un[3, i, j]
                reverted += 1
    return reverted


@njit(cache=True)
def hancock_predictor_kernel(Q, Sx, Se, face_xi, face_eta, vol, src, ng, dt,
                             gamma, Upred):
    """Conserved predictor at t+dt from each cell's own boundary-extrapolated
    states and the physical flux -- no Riemann problems."""
    I = Upred.shape[1]
    J = Upred.shape[2]
    for ii in range(I):
        for jj in range(J):
            i = ng + ii
            j = ng + jj
            q0 = Q[0, i, j]
            q1 = Q[1, i, j]
            q2 = Q[2, i, j]
            q3 = Q[3, i, j]
            sx0 = 0.5 * Sx[0, i, j]
            sx1 = 0.5 * Sx[1, i, j]
            sx2 = 0.5 * Sx[2, i, j]
            sx3 = 0.5 * Sx[3, i, j]
            se0 = 0.5 * Se[0, i, j]
            se1 = 0.5 * Se[1, i, j]
            se2 = 0.5 * Se[2, i, j]
            se3 = 0.5 * Se[3, i, j]

            w0, w1, w2, w3 = flux_cell(q0 - sx0, q1 - sx1, q2 - sx2, q3 - sx3,
                                       face_xi[i, j, 0], face_xi[i, j, 1],
                                       gamma)
            e0, e1, e2, e3 = flux_cell(q0 + sx0, q1 + sx1, q2 + sx2, q3 + sx3,
                                       face_xi[i + 1, j, 0],
                                       face_xi[i + 1, j, 1], gamma)
            s0, s1, s2, s3 = flux_cell(q0 - se0, q1 - se1, q2 - se2, q3 - se3,
                                       face_eta[i, j, 0], face_eta[i, j, 1],
                                       gamma)
            n0, n1, n2, n3 = flux_cell(q0 + se0, q1 + se1, q2 + se2, q3 + se3,
                                       face_eta[i, j + 1, 0],
                                       face_eta[i, j + 1, 1], gamma)
            r = dt / vol[i, j]
            m0 = q2
            m1 = q2 * q0
            m2 = q2 * q1
            m3 = 0.5 * q2 * (q0 * q0 + q1 * q1) + q3 / (gamma - 1.0)
            Upred[0, ii, jj] = m0 - r * ((e0 - w0) + (n0 - s0)) \
                + dt * src[0, ii, jj]
            Upred[1, ii, jj] = m1 - r * ((e1 - w1) + (n1 - s1)) \
                + dt * src[1, ii, jj]
            Upred[2, ii, jj] = m2 - r * ((e2 - w2) + (n2 - s2)) \
                + dt * src[2, ii, jj]
            Upred[3, ii, jj] = m3 - r * ((e3 - w3) + (n3 - s3)) \
                + dt * src[3, ii, jj]


# ---------------------------------------------------------------------------
# rate evaluation


def _raise_face_failure(axis_name, bad, nt):
    f, t = bad // nt, bad % nt
    raise NonphysicalState(
        f"riemann solver failed (vacuum or no convergence) at {axis_name} "
        f"face", where=(axis_name, f, t))


def _interface_fluxes(Qext, grid, recon, solver, ctx, gas, ws, entropy_fix):
    I, J = grid.I, grid.J
    g = gas.gamma
    mask = ctx.shock_mask
    scheme = recon.scheme_id

    Sx_face = grid.face_xi_ext[NG:NG + I + 1, NG:NG + J]
    Se_face = np.swapaxes(grid.face_eta_ext[NG:NG + I, NG:NG + J + 1], 0, 1)
    Qx = Qext[:, :, NG:NG + J]
    Qe = Qext[:, NG:NG + I, :]

    if scheme == SCHEME_WENO5:
        cons_from_prim_kernel(Qext, g, ws.U_ext)
        weno5_states_kernel(Qx, ws.U_ext[:, :, NG:NG + J], Sx_face,
                            mask[:, NG:NG + J],
                            grid.sbar_xi_ext[:, NG:NG + J], 0, NG,
                            recon.sugg2_id, g, ws.QLx, ws.QRx)
        weno5_states_kernel(Qe, ws.U_ext[:, NG:NG + I, :], Se_face,
                            mask[NG:NG + I, :],
                            grid.sbar_eta_ext[NG:NG + I, :], 1, NG,
                            recon.sugg2_id, g, ws.QLe, ws.QRe)
    elif scheme == SCHEME_MUSCL:
        lim = int(recon.limiter)
        muscl_slopes_kernel(Qext, grid.sbar_xi_ext, mask, 0, lim,
                            recon.char_flag, recon.sugg2_id, g, ws.S_xi)
        muscl_slopes_kernel(Qext, grid.sbar_eta_ext, mask, 1, lim,
                            recon.char_flag, recon.sugg2_id, g, ws.S_eta)
        interface_states_kernel(Qx, ws.S_xi[:, :, NG:NG + J], 0, NG,
                                ws.QLx, ws.QRx)
        interface_states_kernel(Qe, ws.S_eta[:, NG:NG + I, :], 1, NG,
                                ws.QLe, ws.QRe)
    else:  # first order: interface states are the adjacent cell values
        ws.QLx[:] = Qext[:, NG - 1:NG + I, NG:NG + J]
        ws.QRx[:] = Qext[:, NG:NG + I + 1, NG:NG + J]
        ws.QLe[:] = np.swapaxes(Qext[:, NG:NG + I, NG - 1:NG + J], 1, 2)
        ws.QRe[:] = np.swapaxes(Qext[:, NG:NG + I, NG:NG + J + 1], 1, 2)

    bad = solve_flux_batch(int(solver), ws.QLx, ws.QRx, Sx_face, g,
                           entropy_fix, ws.Fx)
    if bad >= 0:
        _raise_face_failure("xi", bad, J)
    bad = solve_flux_batch(int(solver), ws.QLe, ws.QRe, Se_face, g,
                           entropy_fix, ws.Fe)
    if bad >= 0:
        _raise_face_failure("eta", bad, I)


def spatial_operator_L(Qext: np.ndarray, grid: StructuredGrid,
                       recon: ReconConfig, solver: SolverKind,
                       ctx: StepContext, gas: Gas, *,
                       entropy_fix: bool = False,
                       ws: Workspace | None = None,
                       out: np.ndarray | None = None) -> np.ndarray:
    """Per-cell conserved-state rate on the interior; ghosts must be filled.

    -(1/V) * [F(i+1/2) - F(i-1/2) + F(j+1/2) - F(j-1/2)] + frozen source.
    """
    if ws is None:
        ws = Workspace(grid)
    _interface_fluxes(Qext, grid, recon, solver, ctx, gas, ws, entropy_fix)
    if out is None:
        out = ws.rate
    accumulate_rate_kernel(ws.Fx, ws.Fe, grid.volumes_ext,
                           ctx.frozen_source.source, NG, out)
    return out


def compute_dt(Qext: np.ndarray, grid: StructuredGrid, gas: Gas,
               cfl: float) -> float:
    """CFL time step from interior cell volumes and face-pair-averaged
    area vectors; ghost values are not consulted."""
    dt = cfl * dt_kernel(Qext, grid.sbar_xi_ext, grid.sbar_eta_ext,
                         grid.volumes_ext, NG, gas.gamma)
    if not dt > 0.0 or not math.isfinite(dt):
        raise NonphysicalState(f"CFL step collapsed to {dt}")
    return dt


def prepare_step(state: FlowState, numerics: Numerics) -> StepContext:
    """Level-n frozen data (ghosts must already be filled at state.t)."""
    g = state.gas.gamma
    mu = compute_av_field(state.Qext, state.grid, numerics.av, g)
    vs = viscous_rhs(state.Qext, state.grid, mu, numerics.av, g)
    dt = compute_dt(state.Qext, state.grid, state.gas, numerics.effective_cfl)
    return StepContext(dt=dt, frozen_source=vs, shock_mask=shock_mask(mu),
                       cfl=numerics.effective_cfl)


# ---------------------------------------------------------------------------
# steppers


def _write_interior(state: FlowState, U: np.ndarray, stage: str) -> None:
    bad = prim_from_cons_kernel(U, state.gas.gamma, state.Q)
    if bad >= 0:
        i, j = bad // state.grid.J, bad % state.grid.J
        raise NonphysicalState(f"nonphysical state after {stage}",
                               where=(i, j))


def _write_stage(state: FlowState, U: np.ndarray, ws: Workspace) -> None:
    """Interior write for an intermediate stage: nonphysical cells revert to
    the level-n state (ws.Qa / ws.U0) instead of aborting the run."""
    prim_from_cons_stage_fallback_kernel(U, ws.Qa, ws.U0, state.gas.gamma,
                                         state.Q)


def _L(state, ctx, numerics, ws, out):
    return spatial_operator_L(state.Qext, state.grid, numerics.recon,
                              numerics.solver, ctx, state.gas,
                              entropy_fix=numerics.entropy_fix, ws=ws,
                              out=out)


def step_euler(state: FlowState, ctx: StepContext, numerics: Numerics,
               bcs: dict, ws: Workspace | None = None) -> FlowState:
    ws = ws if ws is not None else Workspace(state.grid)
    cons_from_prim_kernel(state.Q, state.gas.gamma, ws.U0)
    r = _L(state, ctx, numerics, ws, ws.rate)
    combine_kernel(ws.Ua, 1.0, ws.U0, 0.0, ws.U0, ctx.dt, r)
    _write_interior(state, ws.Ua, "euler update")
    state.t += ctx.dt
    state.n += 1
    return state


def step_rk2(state: FlowState, ctx: StepContext, numerics: Numerics,
             bcs: dict, ws: Workspace | None = None) -> FlowState:
    ws = ws if ws is not None else Workspace(state.grid)
    dt, t0 = ctx.dt, state.t
    ws.Qa[:] = state.Q
    cons_from_prim_kernel(state.Q, state.gas.gamma, ws.U0)

    r = _L(state, ctx, numerics, ws, ws.rate)
    combine_kernel(ws.Ua, 1.0, ws.U0, 0.0, ws.U0, dt, r)
    _write_stage(state, ws.Ua, ws)

    fill_ghosts(state.Qext, state.grid, bcs, t0 + dt)
    r = _L(state, ctx, numerics, ws, ws.rate)
    combine_kernel(ws.Ub, 0.5, ws.U0, 0.5, ws.Ua, 0.5 * dt, r)
    _write_interior(state, ws.Ub, "rk2 stage 2")

    state.t = t0 + dt
    state.n += 1
    return state


def step_rk3(state: FlowState, ctx: StepContext, numerics: Numerics,
             bcs: dict, ws: Workspace | None = None) -> FlowState:
    ws = ws if ws is not None else Workspace(state.grid)
    dt, t0 = ctx.dt, state.t
    ws.Qa[:] = state.Q
    cons_from_prim_kernel(state.Q, state.gas.gamma, ws.U0)

    r = _L(state, ctx, numerics, ws, ws.rate)
    combine_kernel(ws.Ua, 1.0, ws.U0, 0.0, ws.U0, dt, r)
    _write_stage(state, ws.Ua, ws)

    fill_ghosts(state.Qext, state.grid, bcs, t0 + dt)
    r = _L(state, ctx, numerics, ws, ws.rate)
    combine_kernel(ws.Ub, 0.75, ws.U0, 0.25, ws.Ua, 0.25 * dt, r)
    _write_stage(state, ws.Ub, ws)

    fill_ghosts(state.Qext, state.grid, bcs, t0 + 0.5 * dt)
    r = _L(state, ctx, numerics, ws, ws.rate)
    combine_kernel(ws.Ua, 1.0 / 3.0, ws.U0, 2.0 / 3.0, ws.Ub,
                   2.0 / 3.0 * dt, r)
    _write_interior(state, ws.Ua, "rk3 stage 3")

    state.t = t0 + dt
    state.n += 1
    return state


def step_hancock_rodionov(state: FlowState, ctx: StepContext,
                          numerics: Numerics, bcs: dict,
                          ws: Workspace | None = None) -> FlowState:
    """Predictor from own-face extrapolated physical fluxes (no Riemann
    solves), then one Riemann-based corrector sweep at the primitive
    half-time average, reusing the level-n slopes."""
    ws = ws if ws is not None else Workspace(state.grid)
    grid, gas = state.grid, state.gas
    g = gas.gamma
    I, J = grid.I, grid.J
    dt, t0 = ctx.dt, state.t
    recon = numerics.recon
    src = ctx.frozen_source.source

    ws.Qa[:] = state.Q
    cons_from_prim_kernel(ws.Qa, g, ws.U0)

    if recon.scheme_id == SCHEME_MUSCL:
        lim = int(recon.limiter)
        muscl_slopes_kernel(state.Qext, grid.sbar_xi_ext, ctx.shock_mask, 0,
                            lim, recon.char_flag, recon.sugg2_id, g, ws.S_xi)
        muscl_slopes_kernel(state.Qext, grid.sbar_eta_ext, ctx.shock_mask, 1,
                            lim, recon.char_flag, recon.sugg2_id, g, ws.S_eta)
    else:
        ws.S_xi.fill(0.0)
        ws.S_eta.fill(0.0)

    hancock_predictor_kernel(state.Qext, ws.S_xi, ws.S_eta,
                             grid.face_xi_ext, grid.face_eta_ext,
                             grid.volumes_ext, src, NG, dt, g, ws.Ua)
    prim_from_cons_fallback_kernel(ws.Ua, ws.Qa, g, ws.Qb)

    state.Q[:] = 0.5 * (ws.Qa + ws.Qb)
    fill_ghosts(state.Qext, grid, bcs, t0 + 0.5 * dt)

    # corrector: same slopes, interface states from the half-time field
    Qx = state.Qext[:, :, NG:NG + J]
    Qe = state.Qext[:, NG:NG + I, :]
    interface_states_kernel(Qx, ws.S_xi[:, :, NG:NG + J], 0, NG,
                            ws.QLx, ws.QRx)
    interface_states_kernel(Qe, ws.S_eta[:, NG:NG + I, :], 1, NG,
                            ws.QLe, ws.QRe)
    Sx_face = grid.face_xi_ext[NG:NG + I + 1, NG:NG + J]
    Se_face = np.swapaxes(grid.face_eta_ext[NG:NG + I, NG:NG + J + 1], 0, 1)
    bad = solve_flux_batch(int(numerics.solver), ws.QLx, ws.QRx, Sx_face, g,
                           numerics.entropy_fix, ws.Fx)
    if bad >= 0:
        _raise_face_failure("xi", bad, J)
    bad = solve_flux_batch(int(numerics.solver), ws.QLe, ws.QRe, Se_face, g,
                           numerics.entropy_fix, ws.Fe)
    if bad >= 0:
        _raise_face_failure("eta", bad, I)
    accumulate_rate_kernel(ws.Fx, ws.Fe, grid.volumes_ext, src, NG, ws.rate)

    combine_kernel(ws.Ub, 1.0, ws.U0, 0.0, ws.U0, dt, ws.rate)
    _write_interior(state, ws.Ub, "corrector update")

    state.t = t0 + dt
    state.n += 1
    return state


_STEPPERS = {
    SchemeKind.Euler: step_euler,
    SchemeKind.RK2: step_rk2,
    SchemeKind.RK3: step_rk3,
    SchemeKind.HancockRodionov: step_hancock_rodionov,
}


def advance(state: FlowState, ctx: StepContext, numerics: Numerics,
            bcs: dict, ws: Workspace | None = None) -> FlowState:
    return _STEPPERS[numerics.stepper](state, ctx, numerics, bcs, ws)


# ---------------------------------------------------------------------------
# run loop


@dataclass
class RunDiagnostics:
    n_steps: int
    t_final: float
    wall_time_s: float
    last_dt: float = 0.0
    stopped_early: bool = False
    hit_max_steps: bool = False


def _apply_pins(state: FlowState, pins) -> None:
    c = state.grid.centers
    for pin in pins:
        m = pin.region(c[..., 0], c[..., 1], state.t)
        if np.any(m):
            vals = np.asarray(pin.state, dtype=np.float64)
            Q = state.Q
            for comp in range(4):
                Q[comp][m] = vals[comp]


def run_to_time(state: FlowState, t_end: float, numerics: Numerics,
                bcs: dict, *, callback=None, callback_every: int = 1,
                pins: tuple = (), max_steps: int | None = None,
                ws: Workspace | None = None):
    """Advance to t_end; returns (state, RunDiagnostics).

    Per step: fill ghosts at level n, freeze the viscous source and shock
    mask, pick dt (clipped so the last step lands on t_end exactly), advance,
    apply interior pins, then hand (n, t, state, ctx) to the callback every
    `callback_every` steps; a truthy callback return stops the run early.
    """
    grid = state.grid
    if ws is None:
        ws = Workspace(grid)
    pins = tuple(p for p in pins if isinstance(p, PostShockOverwrite))
    eps = 1e-12 * max(1.0, abs(t_end))
    diag = RunDiagnostics(n_steps=0, t_final=state.t, wall_time_s=0.0)
    t_start = time.perf_counter()

    while state.t < t_end - eps:
        if max_steps is not None and diag.n_steps >= max_steps:
            diag.hit_max_steps = True
            break
        fill_ghosts(state.Qext, grid, bcs, state.t)
        ctx = prepare_step(state, numerics)
        clipped = state.t + ctx.dt >= t_end
        if clipped:
            ctx.dt = t_end - state.t
        try:
            advance(state, ctx, numerics, bcs, ws)
        except NonphysicalState as exc:
            raise NonphysicalState(
                f"step {state.n}, t={state.t:.8g}: {exc}",
                where=exc.where) from exc
        if clipped:
            state.t = t_end
        if pins:
            _apply_pins(state, pins)
        diag.n_steps += 1
        diag.last_dt = ctx.dt
        if callback is not None and diag.n_steps % callback_every == 0:
            if callback(state.n, state.t, state, ctx):
                diag.stopped_early = True
                break

    fill_ghosts(state.Qext, grid, bcs, state.t)
    diag.t_final = state.t
    diag.wall_time_s = time.perf_counter() - t_start
    return state, diag


def total_conserved(state: FlowState) -> np.ndarray:
    """Volume-weighted conserved totals (mass, x/y momentum, energy)."""
    U = to_conserved_field(state.Q, state.gas.gamma)
    return (U * state.grid.volumes[None, :, :]).sum(axis=(1, 2))
