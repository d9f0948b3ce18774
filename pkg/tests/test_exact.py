import numpy as np
import pytest

from mboa import exact as ex
from mboa import models as mdl

TH0 = 20 * np.sqrt(2 * np.pi)


def erf_model(zeta=2.0):
    return mdl.SpinHalfModel(mdl.ErfRotation.from_zeta(TH0, 1.0, zeta))


def test_grid_validation():
    with pytest.raises(ValueError):
        ex.Grid(1000, -1, 1)
    g = ex.Grid(256, -4, 4)
    assert g.dx == pytest.approx(8 / 256)


def test_packet_preparation():
    m = erf_model()
    g = ex.Grid(4096, -8, 8)
    st = ex.prepare_bo_packet(m, -3.5, 20.0, 0.25, g)
    assert st.norm() == pytest.approx(1.0, abs=1e-12)
    d = st.density()
    mean = np.sum(g.x * d) * g.dx
    std = np.sqrt(np.sum((g.x - mean) ** 2 * d) * g.dx)
    assert std == pytest.approx(0.25, rel=1e-3)
    obs = ex.observables(st)
    assert obs["mean_q"] == pytest.approx(20.0, rel=1e-3)
    # local spin parallel to the field (0, sin theta, cos theta)
    tex = obs["spin_texture"]
    th = m.profile.theta(g.x)
    on = d > 1e-6 * d.max()
    np.testing.assert_allclose(tex[1][on], np.sin(th[on]), atol=1e-10)
    np.testing.assert_allclose(tex[2][on], np.cos(th[on]), atol=1e-10)
    with pytest.raises(ValueError):
        ex.prepare_bo_packet(m, -7.5, 20.0, 0.25, g)


def test_free_packet_spreading():
    m = mdl.SpinHalfModel(mdl.ConstantRotation(0.0, 0.0))
    g = ex.Grid(2048, -20, 20)
    sig, t = 0.5, 2.0
    st = ex.split_step(ex.prepare_bo_packet(m, 0.0, 1.0, sig, g), m, 0.01, 200)
    d = st.density()
    mean = np.sum(g.x * d) * g.dx
    w2 = np.sum((g.x - mean) ** 2 * d) * g.dx
    assert w2 == pytest.approx(sig**2 + (t / (2 * sig)) ** 2, rel=1e-3)
    assert mean == pytest.approx(t, rel=1e-6)


def test_rabi_precession():
    m = mdl.SpinHalfModel(mdl.ConstantRotation(0.0, 1.5))
    g = ex.Grid(256, -10, 10)
    st = ex.prepare_bo_packet(m, 0.0, 0.0, 1.0, g)
    # tip the spin into x so the field along z precesses it
    st = ex.SpinorGrid(g, np.array([st.psi[0], st.psi[0]]) / np.sqrt(2), 0.0)
    dt, n = 0.001, 2000
    sy = []
    so = ex.SplitOperator(m, g, dt)
    for _ in range(n // 20):
        st = so.run(st, 20)
        up, dn = st.psi
        sy.append(np.sum(2 * np.imag(np.conj(up) * dn)) * g.dx)
    t = dt * 20 * np.arange(1, n // 20 + 1)
    np.testing.assert_allclose(sy, -np.sin(2 * 1.5 * t), atol=1e-6)


def test_norm_conservation():
    m = erf_model()
    g = ex.Grid(2048, -8, 8)
    so = ex.SplitOperator(m, g, 2e-5, norm_tol=1e-10)
    st = so.run(ex.prepare_bo_packet(m, -3.5, 20.0, 0.25, g), 10000)
    assert st.norm() == pytest.approx(1.0, abs=1e-10)


def test_norm_drift_raises():
    m = erf_model()
    g = ex.Grid(256, -8, 8)
    st = ex.prepare_bo_packet(m, 0.0, 0.0, 0.5, g)
    bad = ex.SpinorGrid(g, st.psi, 0.0)
    so = ex.SplitOperator(m, g, 1e-3, norm_tol=1e-6)
    so.kin = so.kin * 1.001
    with pytest.raises(ex.NormDriftError):
        so.run(bad, 10)


def test_strang_order():
    m = erf_model()
    g = ex.Grid(2048, -8, 8)
    st0 = ex.prepare_bo_packet(m, -2.0, 20.0, 0.25, g)
    T = 0.05
    ref = ex.split_step(st0, m, T / 3200, 3200).psi
    errs = [np.sqrt(np.sum(np.abs(ex.split_step(st0, m, T / n, n).psi - ref) ** 2) * g.dx) for n in (100, 200)]
    assert errs[0] / errs[1] == pytest.approx(4.0, rel=0.1)


def test_ehrenfest():
    m = erf_model()
    g = ex.Grid(4096, -8, 8)
    so = ex.SplitOperator(m, g, 2e-5)
    _, ser = so.propagate(ex.prepare_bo_packet(m, -3.5, 20.0, 0.25, g), 20000, 50)
    t, x, q = ser["t"], ser["mean_x"], ser["mean_q"]
    dxdt = (x[2:] - x[:-2]) / (t[2:] - t[:-2])
    qm = q[1:-1]
    smooth = np.abs(qm) > 2.0
    np.testing.assert_allclose(dxdt[smooth], qm[smooth], rtol=1e-3)


def test_symmetric_packet_has_zero_mean():
    m = mdl.SpinHalfModel(mdl.ConstantRotation(0.0, 1.0))
    g = ex.Grid(8192, -8, 8)
    obs = ex.observables(ex.prepare_bo_packet(m, 0.0, 0.0, 0.5, g))
    assert obs["mean_x"] == pytest.approx(0.0, abs=1e-12)
    # open interval on the grid drops half-weight endpoints, about rho(0.5) dx
    assert obs["p_trapped"] == pytest.approx(0.682689, abs=1.5e-3)


def test_mask_absorbs():
    g = ex.Grid(512, -8, 8)
    mask = ex.cosine_mask(g, 2.0, 100.0, 0.01)
    assert mask[g.n // 2] == 1.0
    assert mask[0] < mask[10] < 1.0


def test_coherent_state_at_zero_chi():
    n = 10
    m = mdl.CollectiveSpinModel(n, mdl.ConstantRotation(0.0, 1.0))
    gs = ex.collective_ground_state(m, 0.0, 0.0)
    assert gs.delta_x == pytest.approx(np.sqrt(n) / 2, rel=1e-10)
    assert gs.delta_y == pytest.approx(np.sqrt(n) / 2, rel=1e-10)
    assert gs.mean[2] == pytest.approx(n / 2)


def test_hp_predictions():
    hp = ex.hp_predict(20, 0.0)
    assert hp["r"] == 0 and hp["var_x"] == hp["var_y"] == 5.0
    assert ex.hp_predict(20, 40.0)["var_x"] == pytest.approx(5 / np.sqrt(41))


def test_squeezing_approaches_hp():
    devs = []
    for n in (20, 40, 80):
        m = mdl.CollectiveSpinModel(n, mdl.ConstantRotation(1.0, n / (4 * 40.0)))
        gs = ex.collective_ground_state(m, 0.0, 0.0)
        devs.append(abs(gs.delta_x / gs.delta_y * np.sqrt(41) - 1))
    assert devs[0] < 0.1 and devs[0] > devs[1] > devs[2]


def test_entropy_of_product_and_triplet():
    assert ex.entanglement_entropy([1, 0, 0, 0]) == 0.0
    assert ex.entanglement_entropy(ex.dicke_to_product([0, 1, 0])) == pytest.approx(1.0)
    bell = np.array([-1, 0, 0, 1]) / np.sqrt(2)
    assert ex.entanglement_entropy(bell) == pytest.approx(1.0)


def test_phase_diagram_corners_and_symmetry():
    phis = np.linspace(0, np.pi / 2, 5)
    ratios = np.linspace(0, 4, 5)
    d = ex.entanglement_phase_diagram(phis, ratios)
    assert d[0, 0] < 0.05 and d[-1, -1] > 0.95
    # p -> -p with theta' -> -theta' gives the same ground-state entanglement
    from mboa.linalg import eigh
    for dth, b, p in [(1.0, 0.3, 0.7), (2.5, 0.1, -0.4)]:
        s = []
        for sgn in (1, -1):
            m = mdl.CollectiveSpinModel(2, mdl.ConstantRotation(sgn * dth, b))
            psi = eigh(mdl.moving_hamiltonian(m, 0.0, sgn * p, "moving")).state(0)
            s.append(ex.entanglement_entropy(ex.dicke_to_product(psi)))
        assert s[0] == pytest.approx(s[1], abs=1e-12)
