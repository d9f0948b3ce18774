import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy.linalg import expm
from scipy.special import erf

from mboa import models as mdl
from mboa.linalg import eigh

TH0 = 20 * np.sqrt(2 * np.pi)


def erf_model(zeta=2.0):
    return mdl.SpinHalfModel(mdl.ErfRotation.from_zeta(TH0, 1.0, zeta))


PROFILES = [
    mdl.ErfRotation.from_zeta(TH0, 1.0, 2.0),
    mdl.ConstantRotation(1.0, 0.5),
    mdl.BellProfile(),
]


@pytest.mark.parametrize("pr", PROFILES, ids=lambda p: type(p).__name__)
def test_profile_derivatives_match_finite_differences(pr):
    x = np.linspace(-2.5, 2.5, 21)
    h = 1e-5
    np.testing.assert_allclose(pr.dtheta(x), (pr.theta(x + h) - pr.theta(x - h)) / (2 * h), rtol=1e-6, atol=1e-6)
    np.testing.assert_allclose(pr.d2theta(x), (pr.dtheta(x + h) - pr.dtheta(x - h)) / (2 * h), rtol=1e-6, atol=1e-5)
    np.testing.assert_allclose(pr.dB(x), (pr.B(x + h) - pr.B(x - h)) / (2 * h), rtol=1e-6, atol=1e-6)


def test_erf_profile_shape_and_zeta():
    m = erf_model(2.0)
    pr = m.profile
    assert pr.theta(-50) == pytest.approx(0.0)
    assert pr.theta(50) == pytest.approx(2 * TH0)
    assert pr.theta(0.3) == pytest.approx(TH0 * (1 + erf(0.3)))
    assert mdl.zeta(m) == pytest.approx(2.0)


def test_tabulated_profile_matches_analytic():
    pr = mdl.ErfRotation.from_zeta(TH0, 1.0, 2.0)
    tab = mdl.TabulatedProfile(pr.theta, pr.B)
    x = np.linspace(-2, 2, 9)
    np.testing.assert_allclose(tab.dtheta(x), pr.dtheta(x), rtol=1e-6)
    np.testing.assert_allclose(tab.d2theta(x), pr.d2theta(x), rtol=1e-3, atol=1e-3)


def test_spin_operators_algebra():
    for n in (1, 2, 5):
        sx, sy, sz = mdl.spin_operators(n)
        np.testing.assert_allclose(sx @ sy - sy @ sx, 1j * sz, atol=1e-12)
        s2 = sx @ sx + sy @ sy + sz @ sz
        np.testing.assert_allclose(s2, n / 2 * (n / 2 + 1) * np.eye(n + 1), atol=1e-12)


@settings(max_examples=50, deadline=None)
@given(st.floats(-3, 3), st.floats(-30, 30))
def test_branch_energies_are_spectrum(x, p):
    m = erf_model()
    lam = eigh(mdl.moving_hamiltonian(m, x, p)).eigenvalues
    np.testing.assert_allclose(lam, mdl.branch_energies(m, x, p), atol=1e-10 * max(1, p * p))
    lam_mv = eigh(mdl.moving_hamiltonian(m, x, p, "moving")).eigenvalues
    np.testing.assert_allclose(lam_mv, lam, atol=1e-10 * max(1, p * p))


def test_frame_rotation_maps_moving_to_lab():
    m = erf_model()
    for x, p in [(-0.7, 3.0), (0.2, -11.0), (1.4, 25.0)]:
        u = m.frame_rotation(x)
        g, _ = m.frame_generator(x)
        np.testing.assert_allclose(u, expm(-1j * g), atol=1e-12)
        np.testing.assert_allclose(u @ m.interaction_moving(x) @ u.conj().T, m.interaction(x), atol=1e-12)


def test_gauge_potential_from_rotation():
    # A = i hbar (dU/dx) U^dagger with U the moving-to-lab rotation
    m = erf_model()
    x, h = 0.3, 1e-6
    u = m.frame_rotation
    a = 1j * (u(x + h) - u(x - h)) / (2 * h) @ u(x).conj().T
    np.testing.assert_allclose(a, m.agp(x), atol=1e-6)


@pytest.mark.parametrize("frame", ["lab", "moving"])
def test_hamiltonian_gradients_finite_differences(frame):
    for model in (erf_model(), mdl.CollectiveSpinModel(3, mdl.BellProfile())):
        for x, p in [(-0.4, 2.0), (0.9, -5.0)]:
            dx, dp = mdl.hamiltonian_gradients(model, x, p, frame)
            h = 1e-6
            fx = (mdl.moving_hamiltonian(model, x + h, p, frame) - mdl.moving_hamiltonian(model, x - h, p, frame)) / (2 * h)
            fp = (mdl.moving_hamiltonian(model, x, p + h, frame) - mdl.moving_hamiltonian(model, x, p - h, frame)) / (2 * h)
            np.testing.assert_allclose(dx, fx, atol=1e-4 * max(1, np.abs(fx).max()))
            np.testing.assert_allclose(dp, fp, atol=1e-6)


@settings(max_examples=40, deadline=None)
@given(st.floats(-2.5, 2.5), st.floats(-25, 25), st.sampled_from([-1, 1]))
def test_branch_gradients_finite_differences(x, p, sign):
    m = erf_model()
    h = 1e-6
    e, ex_, ep = mdl.branch_gradients(m, x, p, sign)
    i = (sign + 1) // 2
    f = lambda a, b: mdl.branch_energies(m, a, b)[i]
    assert e == pytest.approx(f(x, p), rel=1e-12, abs=1e-12)
    scale = max(1.0, abs(e))
    assert ex_ == pytest.approx((f(x + h, p) - f(x - h, p)) / (2 * h), abs=1e-3 * scale)
    assert ep == pytest.approx((f(x, p + h) - f(x, p - h)) / (2 * h), abs=1e-5 * scale)


def test_collective_n1_equals_spin_half():
    pr = mdl.ErfRotation.from_zeta(TH0, 1.0, 2.0)
    half = mdl.SpinHalfModel(pr)
    coll = mdl.CollectiveSpinModel(1, pr)
    for x, p in [(-1.0, 4.0), (0.25, -7.0)]:
        for frame in ("lab", "moving"):
            np.testing.assert_allclose(mdl.moving_hamiltonian(coll, x, p, frame),
                                       mdl.moving_hamiltonian(half, x, p, frame), atol=1e-12)


def test_tilt_angle_and_gap():
    m = mdl.SpinHalfModel(mdl.ConstantRotation(1.0, 1.0 / 3.0))
    p = 2.0 / 3.0
    assert mdl.tilt_angle(m, 0.0, p) == pytest.approx(np.pi / 4)
    lo, hi = mdl.branch_energies(m, 0.0, p)
    assert hi - lo == pytest.approx(2 * np.hypot(1 / 3, p / 2))
    gx, gp = mdl.tilt_angle_gradient(m, 0.0, p)
    h = 1e-6
    assert gp == pytest.approx((mdl.tilt_angle(m, 0, p + h) - mdl.tilt_angle(m, 0, p - h)) / (2 * h), rel=1e-6)
    assert gx == pytest.approx(0.0, abs=1e-12)


def test_tilt_angle_warns_at_degenerate_point():
    m = mdl.SpinHalfModel(mdl.ConstantRotation(1.0, 1.0))
    bell = mdl.BellProfile()
    mb = mdl.SpinHalfModel(bell)
    with pytest.warns(mdl.DegenerateTiltWarning):
        mdl.tilt_angle(mb, 100.0, 0.0)
    assert mdl.tilt_angle(m, 0.0, 0.0) == 0.0


def test_chi_and_kappa():
    m = mdl.CollectiveSpinModel(20, mdl.ConstantRotation(1.0, 20 / (4 * 40)))
    assert mdl.chi(m, 0.0) == pytest.approx(40.0)
    s = mdl.SpinHalfModel(mdl.ConstantRotation(2.0, 0.5))
    assert mdl.kappa_spin(s, 0.0) == pytest.approx(4 / 2)


def test_bell_potential_derivative():
    pr = mdl.BellProfile()
    m = mdl.CollectiveSpinModel(2, pr, potential=mdl.BellPotential(pr, 1.0, 1.0))
    x = np.linspace(-4, 4, 9)
    np.testing.assert_allclose(m.potential.derivative(x),
                               [(m.potential(a + 1e-6) - m.potential(a - 1e-6)) / 2e-6 for a in x], atol=1e-6)


def test_invalid_parameters():
    with pytest.raises(ValueError):
        mdl.SpinHalfModel(mdl.ConstantRotation(1.0, 1.0), M=0.0)
    with pytest.raises(ValueError):
        mdl.CollectiveSpinModel(0, mdl.ConstantRotation(1.0, 1.0))
    with pytest.raises(ValueError):
        mdl.spin_operators(0)
