"""Orbit construction, monodromy, closed-form multipliers, continuation."""

import math

import numpy as np
import pytest
from numpy.testing import assert_allclose

from phasered.model import Network, Params, ShapeFn, full_jacobian
from phasered.reduction import ReductionOrder, TorusExpansion, assemble
from phasered.stability import (
    ContinuationError,
    DegenerateOrbitError,
    FullSystem,
    IntegrationError,
    MonodromyResult,
    OrbitNotClosedError,
    OrderParams,
    PeriodicOrbit,
    SectionError,
    appendix_sync_floquet_correction,
    continue_orbit,
    flow,
    full_sync_spectrum_delta0,
    integrate,
    monodromy,
    order_parameter,
    prmm_sync_closed,
    splay_eigs_reduced,
    splay_orbit_delta0,
    splay_phases,
    sync_orbit,
    system_label,
)

SIN = ShapeFn.single_sin()
NET3 = Network.all_to_all(3)
# reference parameter point used throughout the stability figures
P_REF = Params(omega=1.0, m=-1.0, alpha=np.pi / 2 + 0.05, K=0.1, delta=0.0)

O_1INF = ReductionOrder(1, math.inf)
O_10 = ReductionOrder(1, 0)
O_20 = ReductionOrder(2, 0)
O_21 = ReductionOrder(2, 1)
O_22 = ReductionOrder(2, 2)


def reduced(order, p, g=SIN, net=NET3):
    return assemble(net, p, g, order)


# ---- integration ----


def test_uncoupled_reduced_flow_is_linear():
    p = P_REF.replace(K=0.0)
    sys = reduced(O_10, p)
    phi0 = np.array([0.2, 1.1, 3.0])
    t = 7.3
    out = flow(sys, phi0, t, tol=1e-10)
    assert_allclose(out, phi0 + p.omega * t, atol=1e-8)


def test_uncoupled_full_radius_relaxes_monotonically():
    p = P_REF.replace(K=0.0)
    sysf = FullSystem(p, SIN, NET3)
    x0 = np.concatenate([np.full(3, 2.0), np.zeros(3)])
    sol = integrate(sysf, x0, 12.0, tol=1e-10,
                    t_eval=np.linspace(0.0, 12.0, 60))
    radii = sol.y[0]
    assert np.all(np.diff(radii) < 1e-12)
    assert abs(radii[-1] - 1.0) < 1e-4
    assert abs(flow(sysf, x0, 40.0, tol=1e-10)[0] - 1.0) < 1e-9


def test_time_reversal_round_trip():
    p = P_REF.replace(delta=0.1)
    sysf = FullSystem(p, SIN, NET3)
    x0 = np.array([1.05, 0.97, 1.01, 0.3, 1.9, 4.4])
    # window short enough that the backward (expanding) leg cannot blow
    # integrator noise past the bound: amplification is e^{|m| t}
    tol = 1e-10
    fwd = flow(sysf, x0, 2.0, tol=tol)
    back = flow(sysf, fwd, -2.0, tol=tol)
    assert np.max(np.abs(back - x0)) < 10 * tol


def test_integrate_rejects_nonpositive_tol():
    sys = reduced(O_10, P_REF)
    with pytest.raises(ValueError):
        integrate(sys, np.zeros(3), 1.0, tol=0.0)


# ---- orbit containers ----


def test_periodic_orbit_validation_and_freezing():
    with pytest.raises(ValueError):
        PeriodicOrbit(np.zeros(3), period=-1.0)
    orb = sync_orbit(reduced(O_10, P_REF))
    with pytest.raises(ValueError):
        orb.state[0] = 5.0


def test_system_labels():
    assert system_label(FullSystem(P_REF, SIN, NET3)) == "full"
    assert system_label(reduced(O_22, P_REF)) == "(2,2)"


# ---- monodromy basics ----


def test_uncoupled_monodromy_is_identity():
    p = P_REF.replace(K=0.0)
    res = monodromy(reduced(O_10, p), sync_orbit(reduced(O_10, p)))
    assert_allclose(res.multipliers, np.ones(3), atol=1e-9)
    assert_allclose(res.exponents, np.zeros(3), atol=1e-9)
    assert abs(res.trivial - 1.0) < 1e-9


def test_monodromy_rejects_unclosed_orbit():
    sys = reduced(O_10, P_REF)
    good = sync_orbit(sys)
    bad = PeriodicOrbit(good.state, good.period * 1.1, kind="sync",
                        system=good.system)
    with pytest.raises(OrbitNotClosedError):
        monodromy(sys, bad)


def test_sync_orbit_closes_for_every_system():
    p = P_REF.replace(delta=0.15)
    shaped = ShapeFn(((1, 0.4, 0.8), (3, 0.0, 0.3)))
    systems = [
        FullSystem(p, shaped, NET3),
        reduced(O_1INF, p, g=shaped),
        reduced(O_22, p, g=shaped),
    ]
    for sys in systems:
        res = monodromy(sys, sync_orbit(sys, phase=0.4))
        assert res.closure_defect < 1e-8
        assert abs(res.trivial - 1.0) < 1e-7


# ---- sync orbit: closed forms vs numerics ----


def test_prmm_sync_closed_at_zero_coupling():
    p = P_REF.replace(K=0.0)
    for order in (O_1INF, O_20, O_21, O_22):
        assert prmm_sync_closed(order, p) == pytest.approx(1.0, abs=1e-15)


def test_prmm_sync_closed_reference_values():
    lam_first = prmm_sync_closed(O_1INF, P_REF)
    # exponent 2*pi*K*sin(0.05); unstable sync
    assert math.log(lam_first) == pytest.approx(0.0314028, abs=5e-7)
    assert lam_first > 1.0
    lam_second = prmm_sync_closed(O_20, P_REF)
    assert math.log(lam_second) == pytest.approx(-0.0312720, abs=5e-7)
    assert lam_second == pytest.approx(0.969212, abs=5e-6)


def test_prmm_sync_closed_order_relations():
    p = P_REF.replace(delta=0.2)
    assert prmm_sync_closed(O_21, p) == prmm_sync_closed(O_20, p)
    p0 = P_REF.replace(delta=0.0)
    assert prmm_sync_closed(O_22, p0) == pytest.approx(
        prmm_sync_closed(O_20, p0), rel=1e-14)
    # the delta-dependence enters only through the (2,2) truncation
    assert prmm_sync_closed(O_22, p) != pytest.approx(
        prmm_sync_closed(O_20, p), rel=1e-6)


def test_prmm_sync_closed_rejects_unsupported():
    with pytest.raises(ValueError):
        prmm_sync_closed(ReductionOrder(1, 1), P_REF)
    with pytest.raises(ValueError):
        prmm_sync_closed(O_22, P_REF, shape=ShapeFn.single_cos())


def test_prmm_sync_closed_matches_monodromy():
    cases = [(0.1, 0.0), (0.1, 0.2), (-0.2, 0.1)]
    for order in (O_1INF, O_20, O_21, O_22):
        for K, delta in cases:
            p = P_REF.replace(K=K, delta=delta)
            sys = reduced(order, p)
            lam_closed = prmm_sync_closed(order, p, shape=SIN)
            lam_num = monodromy(sys, sync_orbit(sys), tol=1e-10).critical
            assert abs(lam_num - lam_closed) / abs(lam_closed) < 1e-6, (
                order, K, delta)


def test_first_order_exact_multiplier_independent_of_delta():
    mods = []
    for delta in (0.0, 0.1, 0.2):
        p = P_REF.replace(delta=delta)
        sys = reduced(O_1INF, p)
        mods.append(monodromy(sys, sync_orbit(sys), tol=1e-12).critical_abs)
    assert np.ptp(mods) < 1e-8


# ---- full-system sync spectrum at delta = 0 ----


def test_full_sync_spectrum_reference_values():
    q = full_sync_spectrum_delta0(P_REF, 3)
    assert q[0] == 0.0
    assert q[1].real == pytest.approx(-0.0050786, abs=1e-7)
    assert q[3] == P_REF.m
    assert q[4].real == pytest.approx(-0.9849256, abs=1e-7)
    assert_allclose(q.imag, 0.0, atol=1e-14)


def test_full_sync_spectrum_zero_coupling():
    q = full_sync_spectrum_delta0(P_REF.replace(K=0.0), 4)
    vals, counts = np.unique(np.round(q.real, 12), return_counts=True)
    assert set(vals) == {0.0, P_REF.m}
    assert set(counts) == {4}


def test_full_sync_spectrum_alpha0_is_diffusive():
    p = P_REF.replace(alpha=0.0, K=0.03)
    q = full_sync_spectrum_delta0(p, 3)
    assert q[1] == pytest.approx(-p.K, abs=1e-14)


def test_full_sync_spectrum_matches_eigensolver():
    for n in (3, 5):
        for K in (0.1, -0.2):
            p = P_REF.replace(K=K)
            net = Network.all_to_all(n)
            state = np.concatenate([np.ones(n), np.full(n, 0.7)])
            jac = full_jacobian(state, p, SIN, net)
            numeric = np.sort_complex(np.linalg.eigvals(jac))
            closed = np.sort_complex(full_sync_spectrum_delta0(p, n))
            assert_allclose(numeric, closed, atol=1e-10)


def test_full_sync_spectrum_matches_floquet_exponents():
    p = P_REF
    sysf = FullSystem(p, SIN, NET3)
    res = monodromy(sysf, sync_orbit(sysf, phase=0.2), tol=1e-11)
    numeric = np.sort(res.exponents.real)
    closed = np.sort(full_sync_spectrum_delta0(p, 3).real)
    assert_allclose(numeric, closed, atol=1e-6)
    assert_allclose(res.exponents.imag, 0.0, atol=1e-6)


def test_full_sync_spectrum_rejects_delta():
    with pytest.raises(ValueError):
        full_sync_spectrum_delta0(P_REF.replace(delta=0.1), 3)


# ---- splay orbit: construction and closed forms ----


def test_splay_orbit_reference_values_and_invariance():
    orb = splay_orbit_delta0(P_REF, 3)
    rstar = orb.state[0]
    assert rstar == pytest.approx(1.0049732, abs=1e-7)
    what = 2.0 * np.pi / orb.period
    assert what == pytest.approx(0.900125, abs=5e-7)
    sysf = FullSystem(P_REF, SIN, NET3)
    deriv = sysf.rhs(orb.state)
    assert np.max(np.abs(deriv[:3])) < 1e-12
    assert_allclose(deriv[3:], what, atol=1e-12)


def test_splay_orbit_zero_coupling():
    orb = splay_orbit_delta0(P_REF.replace(K=0.0), 3)
    assert_allclose(orb.state[:3], 1.0, atol=1e-15)
    assert orb.period == pytest.approx(2.0 * np.pi / P_REF.omega, rel=1e-15)


def test_splay_orbit_error_paths():
    with pytest.raises(DegenerateOrbitError):
        splay_orbit_delta0(P_REF.replace(alpha=0.0, K=0.3), 3)
    with pytest.raises(DegenerateOrbitError):
        splay_orbit_delta0(P_REF.replace(alpha=np.pi / 2, K=1.0), 3)
    with pytest.raises(ValueError):
        splay_orbit_delta0(P_REF.replace(delta=0.1), 3)
    with pytest.raises(ValueError):
        splay_orbit_delta0(P_REF, 2)


def test_splay_orbit_closes_in_reductions():
    for order in (O_10, O_20, O_22):
        sys = reduced(order, P_REF)
        orb = splay_orbit_delta0(P_REF, 3, reduced=True,
                                 system=str(order))
        res = monodromy(sys, orb)
        assert res.closure_defect < 1e-8, order
        assert abs(res.trivial - 1.0) < 1e-7


def test_splay_eigs_reference_values():
    q = splay_eigs_reduced(O_10, P_REF)
    assert q[0] == pytest.approx(-0.0024990 + 0.0499375j, abs=1e-7)
    assert q[1] == pytest.approx(np.conj(q[0]))
    assert np.all(splay_eigs_reduced(O_10, P_REF.replace(K=0.0)) == 0.0)
    rot = np.exp(1j * P_REF.alpha)
    expected = 0.05 * rot * (1.0 + 0.05 * rot)
    assert splay_eigs_reduced(O_20, P_REF)[0] == pytest.approx(expected)


def test_splay_eigs_match_monodromy():
    for order in (O_10, O_20):
        sys = reduced(order, P_REF)
        orb = splay_orbit_delta0(P_REF, 3, reduced=True, system=str(order))
        res = monodromy(sys, orb, tol=1e-12)
        predicted = np.exp(orb.period * splay_eigs_reduced(order, P_REF))
        got = sorted(res.nontrivial, key=lambda z: z.imag)
        want = sorted(predicted, key=lambda z: z.imag)
        assert_allclose(got, want, rtol=1e-6, atol=1e-9)


def test_splay_eigs_rejects_unsupported():
    with pytest.raises(ValueError):
        splay_eigs_reduced(O_21, P_REF)
    with pytest.raises(ValueError):
        splay_eigs_reduced(O_10, P_REF.replace(delta=0.1))


# ---- splay set invariance ----


def test_splay_set_invariant_at_delta0_but_drifts_otherwise():
    orb = splay_orbit_delta0(P_REF, 3)
    t_eval = np.linspace(0.0, orb.period, 40)

    def spacing_defect(p):
        sysf = FullSystem(p, SIN, NET3)
        sol = integrate(sysf, orb.state, orb.period, tol=1e-10, t_eval=t_eval)
        phases = sol.y[3:]
        gaps = np.diff(phases, axis=0)
        return np.max(np.abs(np.angle(np.exp(1j * (gaps - 2 * np.pi / 3)))))

    assert spacing_defect(P_REF) < 1e-8
    assert spacing_defect(P_REF.replace(delta=0.1)) > 1e-4


# ---- Newton shooting ----


def test_continue_orbit_fixes_exact_seed():
    sysf = FullSystem(P_REF, SIN, NET3)
    seed = splay_orbit_delta0(P_REF, 3)
    out = continue_orbit(sysf, seed)
    assert_allclose(out.state, seed.state, atol=1e-12)
    assert out.period == pytest.approx(seed.period, abs=1e-12)
    assert out.kind == "continued"


def test_continue_orbit_full_system_small_deviation():
    p = P_REF.replace(delta=0.1)
    sysf = FullSystem(p, SIN, NET3)
    seed = splay_orbit_delta0(P_REF, 3)
    orb = continue_orbit(sysf, seed)
    assert abs(orb.period - seed.period) / seed.period < 0.05
    res = monodromy(sysf, orb, tol=1e-11)
    assert res.closure_defect < 1e-8
    assert abs(res.trivial - 1.0) < 1e-6


def test_continue_orbit_path_is_smooth_in_deviation():
    deltas = np.arange(0.0, 0.2001, 0.02)
    seed = splay_orbit_delta0(P_REF, 3)
    periods, mods = [], []
    for delta in deltas:
        sysf = FullSystem(P_REF.replace(delta=delta), SIN, NET3)
        seed = continue_orbit(sysf, seed)
        periods.append(seed.period)
        mods.append(monodromy(sysf, seed).critical_abs)
    for path in (np.array(periods), np.array(mods)):
        d1 = np.abs(np.diff(path))
        assert d1.max() < 10.0 * np.median(d1) + 1e-8
        assert np.abs(np.diff(path, 2)).max() < d1.max() + 1e-8


def test_continue_orbit_iteration_budget():
    p = P_REF.replace(delta=0.1)
    sysf = FullSystem(p, SIN, NET3)
    seed = splay_orbit_delta0(P_REF, 3)
    with pytest.raises(ContinuationError):
        continue_orbit(sysf, seed, max_iter=1)


def test_continue_orbit_section_tangency():
    p = Params(omega=0.01, m=-1.0, alpha=np.pi / 2, K=1.0, delta=0.0)
    sysf = FullSystem(p, SIN, NET3)
    state = np.concatenate([np.ones(3), [0.0, 2.0, 4.0]])
    with pytest.raises(SectionError):
        continue_orbit(sysf, PeriodicOrbit(state, 1.0))


# ---- order parameters ----


def test_order_parameter_reference_configurations():
    sync = order_parameter(np.full(4, 1.3))
    assert sync.R == pytest.approx(1.0, abs=1e-15)
    splay = order_parameter(splay_phases(3))
    assert abs(splay.z1) < 1e-15
    pair = order_parameter(np.array([0.0, np.pi]))
    assert abs(pair.z1) < 1e-15
    assert pair.Q == pytest.approx(1.0, abs=1e-15)
    with pytest.raises(ValueError):
        OrderParams(z1=1.2 + 0.0j, z2=0.0j)


# ---- per-harmonic sync linearization terms ----


def test_harmonic_correction_reference_values():
    p = Params(omega=1.0, m=-1.0, alpha=np.pi / 2, K=0.1, delta=0.1)
    assert appendix_sync_floquet_correction(1, "sin", p, 0.0) == (
        pytest.approx(0.001, abs=1e-12))
    p0 = p.replace(alpha=0.0)
    assert appendix_sync_floquet_correction(2, "cos", p0, 0.7) == 0.0
    with pytest.raises(ValueError):
        appendix_sync_floquet_correction(0, "sin", p, 0.0)
    with pytest.raises(ValueError):
        appendix_sync_floquet_correction(1, "tan", p, 0.0)


def test_harmonic_corrections_average_to_zero():
    p = Params(omega=1.3, m=-0.8, alpha=1.1, K=0.2, delta=0.15)
    gamma = np.linspace(0.0, 2.0 * np.pi, 4097)
    for n in range(1, 6):
        for kind in ("sin", "cos"):
            vals = appendix_sync_floquet_correction(n, kind, p, gamma)
            integral = np.trapezoid(vals, gamma)
            assert abs(integral) < 1e-10, (n, kind)


# ---- torus prediction accuracy ----


def test_torus_radius_prediction_error_scales_quadratically():
    delta = 0.1
    tor = TorusExpansion.build(NET3, P_REF, SIN, jmax=2)
    phi0 = np.array([0.3, 1.7, 4.0])
    couplings = np.array([0.02, 0.04, 0.08])
    errs = []
    for K in couplings:
        p = P_REF.replace(K=K, delta=delta)
        sysf = FullSystem(p, SIN, NET3)
        x0 = np.concatenate([tor.radius(phi0, K, delta), phi0])
        settled = flow(sysf, x0, 40.0, tol=1e-10)
        sol = integrate(sysf, settled, 20.0, tol=1e-10,
                        t_eval=np.linspace(0.0, 20.0, 201))
        radii = sol.y[:3]
        predicted = np.stack([tor.radius(sol.y[3:, i], K, delta)
                              for i in range(sol.y.shape[1])], axis=1)
        errs.append(np.max(np.abs(radii - predicted)))
    slope = np.polyfit(np.log(couplings), np.log(errs), 1)[0]
    assert 1.7 <= slope <= 2.3
