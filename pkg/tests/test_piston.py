import numpy as np
import pytest

from mboa import piston as pst


def small_model(N=200, kappa_ratio=2 / 15):
    return pst.PistonModel.from_mass_ratio(N, kappa_ratio)


def test_model_parameters():
    md = small_model(300, 0.1)
    assert md.kappa == pytest.approx(100.0)
    assert md.M == pytest.approx(1000.0)
    assert md.x_star() == pytest.approx(np.sqrt(300))
    with pytest.raises(ValueError):
        pst.PistonModel(M=-1.0, N=10)


def test_init_gas_deterministic_and_inside():
    md = small_model()
    a = pst.init_gas(md, 20.0, 4)
    b = pst.init_gas(md, 20.0, 4)
    np.testing.assert_array_equal(a.xi, b.xi)
    assert np.all((a.xi > 0) & (a.xi < 20.0))
    assert a.v == 0.0


def test_conservation_per_event():
    md = small_model()
    sim = pst.PistonGas(md, pst.init_gas(md, 1.75 * md.x_star(), 1), check=True)
    e0 = sim.energy()
    n = sim.advance_to(300.0)
    assert n > 1000
    de, dp = sim.max_residual
    assert de < 1e-9 and dp < 1e-9
    assert sim.energy() == pytest.approx(e0, rel=1e-10)


def test_time_reversal():
    md = small_model(100)
    st0 = pst.init_gas(md, 1.5 * md.x_star(), 2)
    sim = pst.PistonGas(md, st0)
    sim.advance_to(5.0)
    sim.reverse()
    t1 = sim.t
    sim.advance_to(t1 + 5.0)
    assert sim.x == pytest.approx(st0.x, abs=1e-6)
    assert sim.v == pytest.approx(0.0, abs=1e-6)
    np.testing.assert_allclose(sim.xi, st0.xi, atol=1e-6)
    np.testing.assert_allclose(-sim.eta, st0.eta, atol=1e-6)


def test_single_event_step_is_pure():
    md = small_model(10)
    st = pst.init_gas(md, 5.0, 0)
    nxt = pst.step_to_next_event(st, md)
    assert nxt.collision_count == 1 and nxt.t > st.t
    assert st.collision_count == 0
    assert nxt.energy(md) == pytest.approx(st.energy(md), rel=1e-12)


def test_predictions():
    md = small_model(2000)
    x0 = 1.75 * md.x_star()
    mbo = pst.mbo_prediction(md, x0)
    bo = pst.bo_prediction(md, x0, md.N / 2)
    assert bo.period == pytest.approx(np.pi * np.sqrt(md.M / md.k))
    assert mbo.period / bo.period == pytest.approx(np.sqrt(1 + 2 / 15))


def test_oscillation_period_of_sine():
    t = np.linspace(0, 20, 4001)
    T, tc = pst.oscillation_period(t, np.sin(2 * np.pi * t / 3.0 + 0.3))
    assert T == pytest.approx(3.0, rel=1e-4)
    with pytest.raises(ValueError):
        pst.oscillation_period(t[:10], t[:10])


def test_entropies_agree_at_rest():
    md = small_model()
    x, E = 15.0, 500.0
    th = pst.entropy_series(md, [0.0], [x], [0.0], [0.0], E)
    assert th.S_moving[0] == pytest.approx(th.S_lab[0] - 0.5 * np.log1p(md.kappa / md.M))


def test_phase_space_stats_linear_profile():
    md = small_model(1000)
    rng = np.random.default_rng(0)
    xi = rng.uniform(0, 10, 1000)
    st = pst.PistonState(0.0, 10.0, 0.5, xi, 2.0 * xi / 10 + rng.normal(0, 0.01, 1000))
    s = pst.phase_space_stats(st, md)
    assert s["slope"] == pytest.approx(2.0, rel=1e-2)
