"""Riemann-solver verification against independent oracles.

The exact solver's star pressure is cross-checked with a bisection root
finder written here from the pressure-function definition alone, so any
error in the production Newton iteration cannot hide."""

import math

import numpy as np
import pytest

from shockav.core import Gas, PrimitiveState, physical_flux
from shockav.riemann import (SolverKind, consistency_error, exact_star_state,
                             roe_average, sample_exact, solve_flux,
                             solve_flux_batch)
from conftest import random_state

GAS = Gas(1.4)
SOLVERS = [SolverKind.Exact, SolverKind.Roe, SolverKind.Hllc, SolverKind.Hll]


def _pressure_function(p, q, g):
    """Two-shock/two-rarefaction pressure function, one side."""
    a = math.sqrt(g * q.p / q.rho)
    if p > q.p:
        A = 2.0 / ((g + 1.0) * q.rho)
        B = (g - 1.0) / (g + 1.0) * q.p
        return (p - q.p) * math.sqrt(A / (p + B))
    return 2.0 * a / (g - 1.0) * ((p / q.p) ** ((g - 1.0) / (2.0 * g)) - 1.0)


def _star_pressure_bisection(qL, qR, g, tol=1e-13):
    def f(p):
        return (_pressure_function(p, qL, g) + _pressure_function(p, qR, g)
                + qR.u_x - qL.u_x)
    lo, hi = 1e-14, 1.0
    while f(hi) < 0.0:
        hi *= 10.0
        if hi > 1e12:
            raise RuntimeError("no bracket")
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        if f(mid) > 0.0:
            hi = mid
        else:
            lo = mid
        if hi - lo < tol * mid:
            break
    return 0.5 * (lo + hi)


SOD = (PrimitiveState(0.0, 0.0, 1.0, 1.0), PrimitiveState(0.0, 0.0, 0.125, 0.1))


def test_star_state_sod_textbook():
    ps, us = exact_star_state(*SOD, GAS)
    assert ps == pytest.approx(0.30313, rel=1e-4)
    assert us == pytest.approx(0.92745, rel=1e-4)


@pytest.mark.parametrize("case", [
    SOD,
    # strong left-running shock
    (PrimitiveState(-19.59745, 0.0, 1.0, 1000.0),
     PrimitiveState(-19.59745, 0.0, 1.0, 0.01)),
    # colliding streams
    (PrimitiveState(5.0, 0.0, 1.0, 1.0), PrimitiveState(-5.0, 0.0, 1.0, 1.0)),
    # receding streams, still no vacuum
    (PrimitiveState(-1.0, 0.0, 1.0, 1.0), PrimitiveState(1.0, 0.0, 1.0, 1.0)),
])
def test_star_pressure_matches_bisection(case):
    qL, qR = case
    ps, us = exact_star_state(qL, qR, GAS)
    ps_ref = _star_pressure_bisection(qL, qR, GAS.gamma)
    assert ps == pytest.approx(ps_ref, rel=1e-9)


def test_star_pressure_random_states(rng):
    for _ in range(300):
        qL = PrimitiveState(*random_state(rng))
        qR = PrimitiveState(*random_state(rng))
        aL = math.sqrt(GAS.gamma * qL.p / qL.rho)
        aR = math.sqrt(GAS.gamma * qR.p / qR.rho)
        if qR.u_x - qL.u_x >= 2.0 * (aL + aR) / (GAS.gamma - 1.0) - 1e-6:
            continue  # vacuum region, tested separately
        ps, _ = exact_star_state(qL, qR, GAS)
        assert ps == pytest.approx(
            _star_pressure_bisection(qL, qR, GAS.gamma), rel=1e-9)


@pytest.mark.parametrize("kind", SOLVERS)
def test_consistency_all_solvers(kind, rng):
    for _ in range(100):
        q = PrimitiveState(*random_state(rng))
        s = (float(rng.uniform(-2, 2)), float(rng.uniform(-2, 2)))
        if abs(s[0]) + abs(s[1]) < 1e-3:
            continue
        assert consistency_error(kind, q, s, GAS) < 1e-12


@pytest.mark.parametrize("kind", SOLVERS)
def test_mirror_antisymmetry(kind, rng):
    """Point-reflect the problem (u -> -u, left/right swapped) across the
    same face: mass/energy fluxes change sign, momentum flux is preserved."""
    for _ in range(60):
        qL = PrimitiveState(*random_state(rng))
        qR = PrimitiveState(*random_state(rng))
        s = (float(rng.uniform(0.2, 2)), float(rng.uniform(-2, 2)))
        f = np.array(solve_flux(kind, qL, qR, s, GAS))
        qLm = PrimitiveState(-qL.u_x, -qL.u_y, qL.rho, qL.p)
        qRm = PrimitiveState(-qR.u_x, -qR.u_y, qR.rho, qR.p)
        fm = np.array(solve_flux(kind, qRm, qLm, s, GAS))
        np.testing.assert_allclose(
            f, [-fm[0], fm[1], fm[2], -fm[3]], rtol=1e-11, atol=1e-11)


@pytest.mark.parametrize("kind", SOLVERS)
def test_rotation_covariance(kind, rng):
    """Rotating both states and the face vector rotates the momentum flux
    and leaves mass/energy components unchanged."""
    for _ in range(60):
        qL = PrimitiveState(*random_state(rng))
        qR = PrimitiveState(*random_state(rng))
        s = (1.3, -0.4)
        th = float(rng.uniform(0, 2 * math.pi))
        c, sn = math.cos(th), math.sin(th)

        def rot(q):
            return PrimitiveState(c * q.u_x - sn * q.u_y,
                                  sn * q.u_x + c * q.u_y, q.rho, q.p)

        f = np.array(solve_flux(kind, qL, qR, s, GAS))
        sr = (c * s[0] - sn * s[1], sn * s[0] + c * s[1])
        fr = np.array(solve_flux(kind, rot(qL), rot(qR), sr, GAS))
        np.testing.assert_allclose(fr[0], f[0], rtol=1e-11, atol=1e-12)
        np.testing.assert_allclose(fr[3], f[3], rtol=1e-11, atol=1e-11)
        np.testing.assert_allclose(fr[1], c * f[1] - sn * f[2],
                                   rtol=1e-11, atol=1e-11)
        np.testing.assert_allclose(fr[2], sn * f[1] + c * f[2],
                                   rtol=1e-11, atol=1e-11)


def test_flux_scales_linearly_with_face_area(rng):
    qL = PrimitiveState(1.0, 0.2, 1.0, 2.0)
    qR = PrimitiveState(-0.5, 0.1, 0.7, 0.9)
    for kind in SOLVERS:
        f1 = np.array(solve_flux(kind, qL, qR, (0.4, 0.3), GAS))
        f3 = np.array(solve_flux(kind, qL, qR, (1.2, 0.9), GAS))
        np.testing.assert_allclose(3.0 * f1, f3, rtol=1e-12)


def test_supersonic_upwinding():
    # flow fully supersonic to the right: the interface flux is the left flux
    qL = PrimitiveState(5.0, 0.0, 1.0, 1.0)
    qR = PrimitiveState(5.5, 0.0, 0.5, 0.8)
    for kind in SOLVERS:
        f = np.array(solve_flux(kind, qL, qR, (1.0, 0.0), GAS))
        np.testing.assert_allclose(f, physical_flux(qL, (1.0, 0.0), GAS),
                                   rtol=1e-12)


def test_sample_exact_far_rays_return_inputs():
    qL, qR = SOD
    np.testing.assert_allclose(sample_exact(qL, qR, -100.0, GAS), qL,
                               rtol=1e-12)
    np.testing.assert_allclose(sample_exact(qL, qR, 100.0, GAS), qR,
                               rtol=1e-12)


def test_sample_exact_star_region_continuity():
    qL, qR = SOD
    ps, us = exact_star_state(qL, qR, GAS)
    left_of_contact = sample_exact(qL, qR, us - 1e-9, GAS)
    right_of_contact = sample_exact(qL, qR, us + 1e-9, GAS)
    assert left_of_contact.p == pytest.approx(ps, rel=1e-8)
    assert right_of_contact.p == pytest.approx(ps, rel=1e-8)
    assert left_of_contact.u_x == pytest.approx(us, rel=1e-6)
    # density jumps across the contact
    assert left_of_contact.rho != pytest.approx(right_of_contact.rho, rel=1e-3)


def test_roe_average_degenerates_to_state():
    q = PrimitiveState(1.0, -2.0, 3.0, 4.0)
    ux, uy, h0, a = roe_average(q, q, GAS)
    assert ux == pytest.approx(q.u_x)
    assert uy == pytest.approx(q.u_y)
    from shockav.core import total_enthalpy
    assert h0 == pytest.approx(total_enthalpy(q, GAS))


def test_batch_matches_scalar_and_reports_failure():
    ni, nj = 4, 3
    rng = np.random.default_rng(5)
    QL = np.empty((4, ni, nj))
    QR = np.empty((4, ni, nj))
    for i in range(ni):
        for j in range(nj):
            QL[:, i, j] = random_state(rng)
            QR[:, i, j] = random_state(rng)
    # keep the velocity jumps mild so no pair is vacuum-adjacent
    QL[:2] *= 0.1
    QR[:2] *= 0.1
    S = np.stack([np.full((ni, nj), 1.0), np.full((ni, nj), 0.25)], axis=-1)
    F = np.empty((4, ni, nj))
    bad = solve_flux_batch(int(SolverKind.Exact), QL, QR, S, GAS.gamma, False, F)
    assert bad == -1
    for i in range(ni):
        for j in range(nj):
            ref = solve_flux(SolverKind.Exact, PrimitiveState(*QL[:, i, j]),
                             PrimitiveState(*QR[:, i, j]), S[i, j], GAS)
            np.testing.assert_allclose(F[:, i, j], ref, rtol=1e-12)

    # inject a vacuum-generating pair; the batch reports its linear index
    QL[:, 2, 1] = (-50.0, 0.0, 1.0, 1.0)
    QR[:, 2, 1] = (50.0, 0.0, 1.0, 1.0)
    bad = solve_flux_batch(int(SolverKind.Exact), QL, QR, S, GAS.gamma, False, F)
    assert bad == 2 * nj + 1


def test_vacuum_raises_on_scalar_api():
    from shockav.core import NonphysicalState
    qL = PrimitiveState(-50.0, 0.0, 1.0, 1.0)
    qR = PrimitiveState(50.0, 0.0, 1.0, 1.0)
    with pytest.raises(NonphysicalState):
        solve_flux(SolverKind.Exact, qL, qR, (1.0, 0.0), GAS)


def test_hll_more_diffusive_than_hllc_on_contact():
    # pure contact: HLLC resolves it exactly (zero mass flux), HLL smears it
    qL = PrimitiveState(0.0, 0.0, 1.0, 1.0)
    qR = PrimitiveState(0.0, 0.0, 0.5, 1.0)
    f_hllc = np.array(solve_flux(SolverKind.Hllc, qL, qR, (1.0, 0.0), GAS))
    f_hll = np.array(solve_flux(SolverKind.Hll, qL, qR, (1.0, 0.0), GAS))
    assert abs(f_hllc[0]) < 1e-12
    assert abs(f_hll[0]) > 1e-3
