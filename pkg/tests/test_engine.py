import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from mboa import engine as eng
from mboa import models as mdl

TH0 = 20 * np.sqrt(2 * np.pi)


def erf_model(zeta=2.0):
    return mdl.SpinHalfModel(mdl.ErfRotation.from_zeta(TH0, 1.0, zeta))


def const_model(dtheta=1.0, B=1.0 / 3.0):
    return mdl.SpinHalfModel(mdl.ConstantRotation(dtheta, B))


def test_free_flight_without_rotation():
    m = mdl.SpinHalfModel(mdl.ConstantRotation(0.0, 1.0))
    tr = eng.integrate_diagonal(m, 0, -1.0, 3.0, dt=0.01, T=2.0)
    np.testing.assert_allclose(tr.xs, -1.0 + 3.0 * tr.times, atol=1e-12)
    np.testing.assert_allclose(tr.ps, 3.0, atol=1e-12)


def test_pair_path_for_constant_rotation_is_free_flight_with_linear_phase():
    m = const_model()
    p0 = 2.0 / 3.0
    tr = eng.integrate_pair(m, 1, 0, -5.0, p0, dt=0.01, T=10.0)
    np.testing.assert_allclose(tr.xs, -5.0 + p0 * tr.times, atol=1e-10)
    lo, hi = mdl.branch_energies(m, 0.0, p0)
    np.testing.assert_allclose(tr.phase, (hi - lo) * tr.times, rtol=1e-12, atol=1e-12)


def test_diagonal_phase_vanishes_and_energy_conserved():
    m = erf_model()
    tr = eng.integrate_diagonal(m, 0, -3.5, 20.0, T=0.4)
    assert np.all(tr.phase == 0)
    assert tr.energy_drift() < 1e-6


@settings(max_examples=15, deadline=None)
@given(st.floats(-3, -1), st.floats(5, 25))
def test_phase_antisymmetry(x0, p0):
    m = erf_model()
    a = eng.integrate_pair(m, 0, 1, x0, p0, dt=1e-4, T=0.05)
    b = eng.integrate_pair(m, 1, 0, x0, p0, dt=1e-4, T=0.05)
    np.testing.assert_allclose(a.xs, b.xs, atol=1e-12)
    np.testing.assert_allclose(a.phase, -b.phase, atol=1e-10)


def test_rk4_order():
    # energy drift falls by at least 8x when dt halves
    m = erf_model()
    drifts = []
    for dt in (4e-4, 2e-4):
        tr = eng.integrate_diagonal(m, 0, -2.0, 20.0, dt=dt, T=0.3)
        drifts.append(tr.energy_drift())
    assert drifts[0] / drifts[1] >= 8


def test_rk4_trajectory_converges_at_fourth_order():
    m = erf_model()
    ends = [eng.integrate_diagonal(m, 0, -2.0, 20.0, dt=dt, T=0.3).xs[-1] for dt in (8e-4, 4e-4, 2e-4)]
    assert abs(ends[0] - ends[1]) / abs(ends[1] - ends[2]) == pytest.approx(16, rel=0.25)


def test_reflection_turning_point_energy():
    m = erf_model()
    tr = eng.integrate_diagonal(m, 0, -3.5, 20.0, T=0.4)
    i = np.argmax(tr.xs)
    assert tr.ps[0] > 0 and tr.ps[-1] < 0
    e0 = mdl.branch_energies(m, tr.xs[0], tr.ps[0])[0]
    assert mdl.branch_energies(m, tr.xs[i], tr.ps[i])[0] == pytest.approx(e0, rel=1e-6)


def test_generic_rates_match_closed_form_for_spin_half():
    pr = mdl.ErfRotation.from_zeta(TH0, 1.0, 2.0)
    tab = mdl.SpinHalfModel(mdl.TabulatedProfile(pr.theta, pr.B))
    coll = mdl.CollectiveSpinModel(1, pr)
    ref = eng.integrate_diagonal(mdl.SpinHalfModel(pr), 0, -2.0, 15.0, dt=1e-3, T=0.1)
    gen = eng.integrate_diagonal(coll, 0, -2.0, 15.0, dt=1e-3, T=0.1)
    np.testing.assert_allclose(gen.xs, ref.xs, atol=1e-9)
    np.testing.assert_allclose(gen.ps, ref.ps, atol=1e-7)
    fd = eng.integrate_diagonal(tab, 0, -2.0, 15.0, dt=1e-3, T=0.1)
    np.testing.assert_allclose(fd.xs, ref.xs, atol=1e-4)


def test_adiabaticity_flag_at_degeneracy():
    m = mdl.SpinHalfModel(mdl.BellProfile())
    with pytest.warns(eng.AdiabaticityWarning):
        tr = eng.integrate_pair(m, 0, 1, 8.0, 0.0, dt=0.01, T=0.1)
    assert "adiabaticity suspect" in tr.flags


def test_evolve_observable_constant_rotation_offdiagonal():
    m = const_model()
    p0 = 2.0 / 3.0
    trajs = {(a, b): eng.integrate_pair(m, a, b, 0.0, p0, dt=0.01, T=3.0, record_every=50)
             for a in (0, 1) for b in (a, 1)}
    om, flags = eng.evolve_observable(m, eng.q_weyl(m), trajs)
    assert not flags
    phi = mdl.tilt_angle(m, 0.0, p0)
    gap = np.diff(mdl.branch_energies(m, 0.0, p0))[0]
    t = trajs[(0, 1)].times
    np.testing.assert_allclose(np.abs(om[:, 0, 1]), 0.5 * np.cos(phi), rtol=1e-10)
    np.testing.assert_allclose(np.angle(om[:, 0, 1] / om[0, 0, 1]), np.angle(np.exp(-1j * gap * t)), atol=1e-8)
    np.testing.assert_allclose(om[:, 0, 0].imag, 0, atol=1e-14)


def test_sample_wavepacket_moments_and_determinism():
    x, p, w = eng.sample_wavepacket(1.0, 2.0, 0.5, 20000, 7)
    assert x.mean() == pytest.approx(1.0, abs=4 * 0.5 / np.sqrt(20000))
    assert p.std() == pytest.approx(1.0, rel=0.03)
    assert x.std() == pytest.approx(0.5, rel=0.03)
    x2, p2, _ = eng.sample_wavepacket(1.0, 2.0, 0.5, 10, 7)
    np.testing.assert_array_equal(x2, x[:10])
    assert np.all(w == 1)
    with pytest.raises(ValueError):
        eng.sample_wavepacket(0, 0, -1.0, 10, 0)


def test_stderr_scales_with_samples():
    m = erf_model()
    a = eng.expectation_twa(m, "q", -3.5, 20.0, 0.25, T=0.05, count=100, seed=1, record_every=50)
    b = eng.expectation_twa(m, "q", -3.5, 20.0, 0.25, T=0.05, count=400, seed=1, record_every=50)
    ratio = a.stderr[-1] / b.stderr[-1]
    assert ratio == pytest.approx(2.0, rel=0.3)


def test_twa_mean_position_is_packet_center_at_t0():
    m = erf_model()
    r = eng.expectation_twa(m, ("x", "q"), -3.5, 20.0, 0.25, T=0.01, count=2000, seed=3)
    assert r["x"].mean[0] == pytest.approx(-3.5, abs=4 * 0.25 / np.sqrt(2000))
    assert set(r) == {"x", "q"}


def test_dressed_wigner_trace_is_scalar_weight():
    m = erf_model()
    x, p = np.array([-0.5, 0.0, 0.7]), np.array([3.0, 20.0, -4.0])
    w = eng.dressed_wigner_matrix(m, x, p, 2.5)
    np.testing.assert_allclose(np.trace(w), 2.5)


def test_trace_normalization_within_three_sigma():
    m = erf_model()
    est, se = eng.trace_normalization(m, -0.2, 5.0, 0.25, 20000, 11)
    assert abs(est - 1.0) < 3 * se


def test_trapped_probability_routes_agree():
    m = erf_model()
    q = eng.trapped_probability(m, 0.0, 0.0, 0.1, "quadrature", nodes=96)
    mc = eng.trapped_probability(m, 0.0, 0.0, 0.1, "montecarlo", count=20000, seed=2)
    assert q == pytest.approx(mc, abs=3e-3)
    with pytest.raises(ValueError):
        eng.trapped_probability(m, 0, 0, 0.1, "bogus")


def test_bo_baseline_free_for_uniform_field():
    m = mdl.SpinHalfModel(mdl.ConstantRotation(0.0, 2.0))
    tr = eng.integrate_bo(m, 0.0, 1.0, dt=0.01, T=1.0)
    np.testing.assert_allclose(tr.xs, tr.times, atol=1e-12)
    assert tr.branch == ("bo", "bo")
