"""Time steppers, CFL control, conservation and the run loop."""
import math
from dataclasses import replace

import numpy as np
import pytest

import shockav.integrate as integ
from shockav.boundary import (Inflow, Outflow, Periodic, PostShockOverwrite,
                              fill_ghosts)
from shockav.core import (Gas, NonphysicalState, PrimitiveState,
                          to_conserved_field)
from shockav.grid import NG, GridSpec, make_grid
from shockav.integrate import (Numerics, SchemeKind, StepContext, Workspace,
                               compute_dt, default_cfl, make_state,
                               prepare_step, run_to_time, spatial_operator_L,
                               total_conserved)
from shockav.reconstruct import LimiterKind, ReconConfig
from shockav.riemann import SolverKind
from shockav.viscosity import AvModel, ViscousSource

GAS = Gas(1.4)
Q_UNIFORM = (0.3, -0.2, 1.1, 1.7)


def _uniform_state(grid, q=Q_UNIFORM):
    Q0 = np.empty((4, grid.I, grid.J))
    Q0[:] = np.array(q).reshape(4, 1, 1)
    return make_state(grid, GAS, Q0)


def _periodic_bcs():
    return {s: Periodic() for s in ("west", "east", "south", "north")}


def _sod_strip(I=64):
    grid = make_grid(GridSpec("rectangular", I, 1, h_x=1.0 / I, h_y=1.0 / I))
    Q0 = np.empty((4, I, 1))
    x = grid.centers[:, 0, 0]
    left = x < 0.5
    Q0[0] = Q0[1] = 0.0
    Q0[2, :, 0] = np.where(left, 1.0, 0.125)
    Q0[3, :, 0] = np.where(left, 1.0, 0.1)
    bcs = {"west": Outflow(), "east": Outflow(),
           "south": Periodic(), "north": Periodic()}
    return make_state(grid, GAS, Q0), bcs


def _zero_ctx(grid, dt=0.1):
    vs = ViscousSource(source=np.zeros((4, grid.I, grid.J)),
                       mu_av=np.zeros_like(grid.volumes_ext))
    return StepContext(dt=dt, frozen_source=vs,
                       shock_mask=np.zeros_like(grid.volumes_ext,
                                                dtype=np.bool_), cfl=0.8)


# ---------------------------------------------------------------------------
# configuration


def test_numerics_validation():
    with pytest.raises(ValueError):
        Numerics(recon=ReconConfig(scheme="weno5"),
                 stepper=SchemeKind.HancockRodionov)
    with pytest.raises(ValueError):
        Numerics(cfl=-0.5)
    with pytest.raises(ValueError):
        Numerics(cfl=0.0)
    assert Numerics(cfl=0.45).effective_cfl == 0.45


def test_default_cfl_pairing():
    w5 = ReconConfig(scheme="weno5")
    assert default_cfl(w5, SchemeKind.RK3) == 0.6
    assert default_cfl(w5, SchemeKind.RK2) == 0.8
    assert default_cfl(ReconConfig(), SchemeKind.HancockRodionov) == 0.8
    assert Numerics().effective_cfl == 0.8
    assert Numerics(recon=w5, stepper=SchemeKind.RK3).effective_cfl == 0.6


def test_step_context_requires_positive_dt():
    grid = make_grid(GridSpec("rectangular", 4, 4, h_x=1.0, h_y=1.0))
    with pytest.raises(ValueError):
        _zero_ctx(grid, dt=0.0)


# ---------------------------------------------------------------------------
# CFL step


def test_compute_dt_hand_value():
    grid = make_grid(GridSpec("rectangular", 4, 4, h_x=1.0, h_y=1.0))
    state = _uniform_state(grid, (0.0, 0.0, 1.4, 1.0))  # a = 1 exactly
    state.Qext[:] = np.array([0.0, 0.0, 1.4, 1.0]).reshape(4, 1, 1)
    # lam = (|u.S| + a|S|) per direction = 1 + 1; dt = cfl * V / 2
    assert compute_dt(state.Qext, grid, GAS, 0.8) == pytest.approx(0.4,
                                                                   rel=1e-13)
    assert compute_dt(state.Qext, grid, GAS, 0.4) == pytest.approx(0.2,
                                                                   rel=1e-13)


def test_compute_dt_sees_first_ghost_ring_only():
    grid = make_grid(GridSpec("rectangular", 6, 5, h_x=1.0, h_y=1.0))
    state = _uniform_state(grid, (0.0, 0.0, 1.4, 1.0))
    state.Qext[:] = np.array([0.0, 0.0, 1.4, 1.0]).reshape(4, 1, 1)
    base = compute_dt(state.Qext, grid, GAS, 0.8)
    # a fast stream waiting in the first west ghost column must shrink dt
    state.Qext[0, NG - 1, :] = 100.0
    tight = compute_dt(state.Qext, grid, GAS, 0.8)
    assert tight < base / 40
    # the outer ghost rings are not consulted
    state.Qext[0, NG - 1, :] = 0.0
    state.Qext[0, :NG - 1, :] = 1e6
    state.Qext[0, -(NG - 1):, :] = 1e6
    assert compute_dt(state.Qext, grid, GAS, 0.8) == base


# ---------------------------------------------------------------------------
# uniform flow: zero rates, bit-exact preservation


@pytest.mark.parametrize("scheme", ["firstorder", "muscl", "weno5"])
def test_rate_vanishes_on_uniform_flow(scheme):
    grid = make_grid(GridSpec("rectangular", 8, 6, h_x=0.5, h_y=0.25))
    state = _uniform_state(grid)
    bcs = _periodic_bcs()
    fill_ghosts(state.Qext, grid, bcs, 0.0)
    rate = spatial_operator_L(state.Qext, grid, ReconConfig(scheme=scheme),
                              SolverKind.Exact, _zero_ctx(grid), GAS)
    assert np.abs(rate).max() == 0.0


@pytest.mark.parametrize("stepper", list(SchemeKind))
def test_uniform_flow_is_preserved(stepper):
    grid = make_grid(GridSpec("rectangular", 8, 6, h_x=0.5, h_y=0.25))
    state = _uniform_state(grid)
    before = state.Q.copy()
    num = Numerics(stepper=stepper)
    run_to_time(state, 1e9, num, _periodic_bcs(), max_steps=5)
    assert state.n == 5
    if stepper is SchemeKind.RK3:
        # the 1/3-2/3 stage blend rounds in the last ulp
        np.testing.assert_allclose(state.Q, before, rtol=5e-16)
    else:
        np.testing.assert_array_equal(state.Q, before)


# ---------------------------------------------------------------------------
# order of accuracy on a linear ODE (the spatial operator is stubbed out)


def _taylor_factor(stepper, z):
    if stepper is SchemeKind.Euler:
        return 1.0 + z
    if stepper is SchemeKind.RK2:
        return 1.0 + z + z * z / 2.0
    return 1.0 + z + z * z / 2.0 + z ** 3 / 6.0


@pytest.mark.parametrize("stepper",
                         [SchemeKind.Euler, SchemeKind.RK2, SchemeKind.RK3])
def test_stepper_taylor_polynomial(stepper, monkeypatch):
    """On dU/dt = lam*U each stage combination telescopes to the classic
    stability polynomial; checks the stage weights exactly."""
    lam = 0.37

    def fake_L(Qext, grid, recon, solver, ctx, gas, *, entropy_fix=False,
               ws=None, out=None):
        U = to_conserved_field(Qext[:, NG:-NG, NG:-NG], gas.gamma)
        if out is None:
            out = np.empty_like(U)
        out[:] = lam * U
        return out

    monkeypatch.setattr(integ, "spatial_operator_L", fake_L)
    grid = make_grid(GridSpec("rectangular", 4, 3, h_x=1.0, h_y=1.0))
    state = _uniform_state(grid)
    bcs = _periodic_bcs()
    fill_ghosts(state.Qext, grid, bcs, 0.0)
    U0 = to_conserved_field(state.Q, GAS.gamma)
    dt = 0.1
    integ.advance(state, _zero_ctx(grid, dt=dt), Numerics(stepper=stepper),
                  bcs)
    U1 = to_conserved_field(state.Q, GAS.gamma)
    np.testing.assert_allclose(U1, _taylor_factor(stepper, lam * dt) * U0,
                               rtol=1e-12)


# ---------------------------------------------------------------------------
# predictor-corrector consistency


def test_hancock_with_zero_slopes_matches_euler():
    """With first-order reconstruction the predictor is the identity (the
    own-cell flux sum closes), so the update must equal forward Euler."""
    results = {}
    for stepper in (SchemeKind.Euler, SchemeKind.HancockRodionov):
        state, bcs = _sod_strip()
        num = Numerics(recon=ReconConfig(scheme="firstorder"),
                       stepper=stepper, av=AvModel(c_av=0.0), cfl=0.5)
        run_to_time(state, 0.1, num, bcs, max_steps=25)
        results[stepper] = state.Q.copy()
    np.testing.assert_allclose(results[SchemeKind.Euler],
                               results[SchemeKind.HancockRodionov],
                               rtol=1e-13, atol=1e-14)


# ---------------------------------------------------------------------------
# conservation


def _compressive_periodic_state():
    grid = make_grid(GridSpec("vortex_periodic", 24, 24))
    x = grid.centers[..., 0]
    y = grid.centers[..., 1]
    Q0 = np.empty((4, 24, 24))
    Q0[0] = np.sin(2 * np.pi * x / 10.0)
    Q0[1] = 0.7 * np.sin(2 * np.pi * y / 10.0)
    Q0[2] = 1.0 + 0.2 * np.cos(2 * np.pi * x / 10.0)
    Q0[3] = 1.0
    return make_state(grid, GAS, Q0)


NUMERICS_MATRIX = [
    Numerics(recon=ReconConfig(scheme="firstorder"), stepper=SchemeKind.Euler),
    Numerics(recon=ReconConfig(limiter=LimiterKind.MC), stepper=SchemeKind.RK2,
             solver=SolverKind.Roe),
    Numerics(recon=ReconConfig(scheme="weno5"), stepper=SchemeKind.RK3,
             solver=SolverKind.Hllc),
    Numerics(stepper=SchemeKind.HancockRodionov),
]


@pytest.mark.parametrize("num", NUMERICS_MATRIX,
                         ids=[n.stepper.value for n in NUMERICS_MATRIX])
def test_conserved_totals_drift_below_1e11(num):
    state = _compressive_periodic_state()
    bcs = _periodic_bcs()
    fill_ghosts(state.Qext, state.grid, bcs, 0.0)
    ctx = prepare_step(state, num)
    assert np.any(ctx.frozen_source.mu_av > 0), \
        "field should trip the shock-layer viscosity"
    tot0 = total_conserved(state)
    run_to_time(state, 1e9, num, bcs, max_steps=100)
    assert state.n == 100
    tot1 = total_conserved(state)
    scale = np.maximum(np.abs(tot0), tot0[0])
    assert np.all(np.abs(tot1 - tot0) <= 1e-11 * scale), (tot1 - tot0) / scale


# ---------------------------------------------------------------------------
# free-stream preservation on skewed and curved meshes


FS_COMBOS = [
    (Numerics(), "hancock-minmod-exact"),
    (Numerics(solver=SolverKind.Roe), "hancock-minmod-roe"),
    (Numerics(solver=SolverKind.Hllc), "hancock-minmod-hllc"),
    (Numerics(solver=SolverKind.Hll), "hancock-minmod-hll"),
    (Numerics(recon=ReconConfig(limiter=LimiterKind.MC),
              stepper=SchemeKind.RK2), "rk2-mc-exact"),
    (Numerics(recon=ReconConfig(scheme="weno5"), stepper=SchemeKind.RK3),
     "rk3-weno5-exact"),
]


@pytest.mark.parametrize("family", ["parallelogram", "polar_annulus"])
@pytest.mark.parametrize("num,label", FS_COMBOS,
                         ids=[label for _, label in FS_COMBOS])
def test_free_stream_preserved(num, label, family):
    if family == "parallelogram":
        grid = make_grid(GridSpec("parallelogram", 16, 12, h_x=0.25,
                                  h_y=0.25, alpha=0.5))
    else:
        grid = make_grid(GridSpec("polar_annulus", 12, 16, r_inner=1.0,
                                  r_outer=2.0, phi_min=-1.0, phi_max=1.0))
    q0 = PrimitiveState(*Q_UNIFORM)
    state = _uniform_state(grid)
    bcs = {s: Inflow(q0) for s in ("west", "east", "south", "north")}
    run_to_time(state, 1e9, num, bcs, max_steps=100)
    assert state.n == 100
    dev = np.abs(state.Q - np.array(q0).reshape(4, 1, 1)).max()
    assert dev < 1e-12, f"{label} on {family}: deviation {dev:.3e}"


# ---------------------------------------------------------------------------
# run loop mechanics


def test_run_to_time_zero_horizon_is_noop():
    state = _uniform_state(make_grid(GridSpec("rectangular", 6, 4,
                                              h_x=0.5, h_y=0.5)))
    before = state.Q.copy()
    _, diag = run_to_time(state, 0.0, Numerics(), _periodic_bcs())
    assert diag.n_steps == 0 and state.t == 0.0
    np.testing.assert_array_equal(state.Q, before)


def test_run_to_time_lands_exactly_on_t_end():
    state, bcs = _sod_strip(32)
    t_end = 0.0123
    _, diag = run_to_time(state, t_end, Numerics(), bcs)
    assert state.t == t_end
    assert not diag.hit_max_steps


def test_run_to_time_max_steps_flag():
    state, bcs = _sod_strip(32)
    _, diag = run_to_time(state, 1.0, Numerics(), bcs, max_steps=4)
    assert diag.n_steps == 4 and diag.hit_max_steps and state.t < 1.0


def test_callback_cadence_and_early_stop():
    state, bcs = _sod_strip(32)
    seen = []

    def cb(n, t, st, ctx):
        seen.append(n)
        assert ctx.dt > 0 and st is state
        return len(seen) == 3

    _, diag = run_to_time(state, 1.0, Numerics(), bcs, callback=cb,
                          callback_every=2)
    assert seen == [2, 4, 6]
    assert diag.stopped_early and diag.n_steps == 6


def test_pins_overwrite_region_every_step():
    grid = make_grid(GridSpec("rectangular", 10, 4, h_x=0.1, h_y=0.1))
    state = _uniform_state(grid, (0.0, 0.0, 1.0, 1.0))
    qpin = PrimitiveState(0.5, 0.0, 2.0, 3.0)
    pin = PostShockOverwrite(region=lambda x, y, t: x < 0.35, state=qpin)
    bcs = {"west": Inflow(qpin), "east": Outflow(),
           "south": Periodic(), "north": Periodic()}
    run_to_time(state, 1e9, Numerics(), bcs, pins=(pin,), max_steps=3)
    x = grid.centers[..., 0]
    pinned = x < 0.35
    got = state.Q[:, pinned]
    np.testing.assert_array_equal(got, np.broadcast_to(
        np.array(qpin).reshape(4, 1), got.shape))
    # far field untouched by the pin itself
    np.testing.assert_allclose(state.Q[2, -1, :], 1.0, rtol=1e-12)


def test_first_step_rate_is_local_to_the_jump():
    state, bcs = _sod_strip(64)
    fill_ghosts(state.Qext, state.grid, bcs, 0.0)
    ctx = prepare_step(state, Numerics(av=AvModel(c_av=0.0)))
    rate = spatial_operator_L(state.Qext, state.grid,
                              ReconConfig(scheme="firstorder"),
                              SolverKind.Exact, ctx, GAS)
    touched = set(np.nonzero(np.abs(rate).max(axis=(0, 2)))[0])
    assert touched == {31, 32}


def test_nonphysical_failure_carries_cell_location(monkeypatch):
    def bomb_L(Qext, grid, recon, solver, ctx, gas, *, entropy_fix=False,
               ws=None, out=None):
        if out is None:
            out = np.zeros((4, grid.I, grid.J))
        out[:] = 0.0
        out[3, 2, 1] = -1e9   # drain the energy of one cell
        return out

    monkeypatch.setattr(integ, "spatial_operator_L", bomb_L)
    grid = make_grid(GridSpec("rectangular", 6, 4, h_x=0.5, h_y=0.5))
    state = _uniform_state(grid)
    with pytest.raises(NonphysicalState) as exc:
        run_to_time(state, 1.0, Numerics(stepper=SchemeKind.Euler),
                    _periodic_bcs())
    assert exc.value.where == (2, 1)


def test_runs_are_deterministic():
    fields = []
    for _ in range(2):
        state, bcs = _sod_strip(48)
        run_to_time(state, 1.0, Numerics(), bcs, max_steps=20)
        fields.append(state.Q.copy())
    np.testing.assert_array_equal(fields[0], fields[1])
