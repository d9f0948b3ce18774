"""Experiment runners: one per configuration kind.

Every runner builds the models from an :class:`ExperimentConfig`, runs the
methods it compares (exact reference, moving-frame approximation, plain
Born-Oppenheimer baseline where meaningful) and returns a :class:`RunReport`
whose metrics carry the tolerances declared in the configuration.
"""
from __future__ import annotations

import time

import numpy as np

from . import engine as eng
from . import exact as ex
from . import models as mdl
from . import piston as pst
from .config import ExperimentConfig
from .dressing import dressing_identities
from .linalg import eigh
from .report import RunReport, fit_sinusoid, metric
from .spin_twa import FRAMES, twa_spin_classical, twa_spin_trajectory

__all__ = ["ExperimentError", "RUNNERS", "run", "eigen_closed_form_residual"]

RUNNERS = {}


class ExperimentError(RuntimeError):
    """A module error raised while running an experiment."""


def _runner(kind):
    def deco(fn):
        RUNNERS[kind] = fn
        return fn
    return deco


def run(config: ExperimentConfig) -> RunReport:
    """Dispatch ``config`` to its runner and time it."""
    t0 = time.perf_counter()
    try:
        tables, metrics, flags = RUNNERS[config.kind](config)
    except (ValueError, RuntimeError, ArithmeticError) as e:
        raise ExperimentError(f"{config.kind} (seed {config.seed}): {e}") from e
    return RunReport(config, tables, metrics, time.perf_counter() - t0, tuple(flags))


def _steps(total, dt):
    return max(int(round(total / dt)), 1)


def _erf_model(cfg):
    th0, d, M, mu = cfg["model.theta0"], cfg["model.d"], cfg["model.M"], cfg["model.mu"]
    if cfg.get("model.B") is not None:
        prof = mdl.ErfRotation(th0, d, cfg["model.B"])
    else:
        prof = mdl.ErfRotation.from_zeta(th0, d, cfg["model.zeta"], M, mu)
    if cfg.values.get("model.N", 1) > 1:
        return mdl.CollectiveSpinModel(cfg["model.N"], prof, M, mu)
    return mdl.SpinHalfModel(prof, M, mu)


def _packet(cfg):
    return cfg["packet.x0"], cfg["packet.p0"], cfg["packet.sigma_x"]


def _exact_series(model, cfg, grid, mask=None, interval=None):
    x0, p0, sig = _packet(cfg)
    dte = cfg["numerics.dt_exact"]
    every = max(int(round(cfg["numerics.record_dt"] / dte)), 1)
    so = ex.SplitOperator(model, grid, dte, mask=mask)
    state = ex.prepare_bo_packet(model, x0, p0, sig, grid)
    _, ser = so.propagate(state, _steps(cfg["numerics.T"], dte), every, interval)
    return ser


def _twa_dt(cfg, model):
    dt = cfg.get("numerics.dt")
    return eng.default_dt(model, cfg["packet.p0"]) if dt is None else dt


def _bo_means(model, cfg, dt, record_every):
    x0, p0, sig = _packet(cfg)
    xs, ps, _ = eng.sample_wavepacket(x0, p0, sig, cfg["numerics.samples"], cfg.seed)
    tr = eng.integrate_bo(model, xs, ps, dt, cfg["numerics.T"], record_every)
    return tr.times, tr.xs.mean(axis=1), tr.ps.mean(axis=1)


@_runner("spin_reflection")
def _spin_reflection(cfg):
    model = _erf_model(cfg)
    x0, p0, sig = _packet(cfg)
    grid = ex.Grid(cfg["numerics.grid_n"], cfg["numerics.grid_min"], cfg["numerics.grid_max"])
    ser = _exact_series(model, cfg, grid)
    t = ser["t"]
    dt = _twa_dt(cfg, model)
    rec = max(int(round(cfg["numerics.record_dt"] / dt)), 1)
    res = eng.expectation_twa(model, ("x", "q"), x0, p0, sig, dt, cfg["numerics.T"],
                              cfg["numerics.samples"], cfg.seed, rec)
    tb, xb, pb = _bo_means(model, cfg, dt, rec)
    x_m = np.interp(t, res["x"].times, res["x"].mean)
    q_m = np.interp(t, res["q"].times, res["q"].mean)
    table = {
        "t": t, "x_exact": ser["mean_x"], "x_mboa": x_m, "x_boa": np.interp(t, tb, xb),
        "q_exact": ser["mean_q"], "q_mboa": q_m, "q_boa": np.interp(t, tb, pb),
        "x_mboa_stderr": np.interp(t, res["x"].times, res["x"].stderr), "norm": ser["norm"],
    }
    traversal = float(np.sum(np.abs(np.diff(ser["mean_x"]))))
    dev = float(np.max(np.abs(x_m - ser["mean_x"])))
    dev_bo = float(np.max(np.abs(table["x_boa"] - ser["mean_x"])))
    margin = cfg["tolerance.reflection_margin"] * cfg["model.d"]
    metrics = [
        metric("x_deviation_over_traversal", dev / traversal, "<=", cfg["tolerance.traversal_fraction"],
               ("exact", "mboa"), f"traversal {traversal:.6g}"),
        metric("x_deviation_over_traversal_boa", dev_bo / traversal, "info", None, ("exact", "boa")),
        metric("exact_final_x_minus_x0", ser["mean_x"][-1] - x0, "<", margin, ("exact",), "reflection"),
        metric("mboa_final_x_minus_x0", x_m[-1] - x0, "<", margin, ("mboa",), "reflection"),
        metric("boa_final_x_minus_x0", table["x_boa"][-1] - x0, "info", None, ("boa",)),
    ]
    return {"series": table}, metrics, res["x"].flags


@_runner("spin_trapping")
def _spin_trapping(cfg):
    model = _erf_model(cfg)
    x0, p0, sig = _packet(cfg)
    d = cfg["model.d"]
    grid = ex.Grid(cfg["numerics.grid_n"], cfg["numerics.grid_min"], cfg["numerics.grid_max"])
    mask = ex.cosine_mask(grid, cfg["numerics.mask_width"], cfg["numerics.mask_rate"],
                          cfg["numerics.dt_exact"])
    ser = _exact_series(model, cfg, grid, mask, (-d / 2, d / 2))
    quad = eng.trapped_probability(model, x0, p0, sig, "quadrature", nodes=cfg["numerics.quadrature_nodes"])
    mc = eng.trapped_probability(model, x0, p0, sig, "montecarlo", count=cfg["numerics.samples"],
                                 seed=cfg.seed)
    t = ser["t"]
    tail = t >= t[-1] * (1 - cfg["tolerance.plateau_fraction"])
    plateau = float(ser["p_trapped"][tail].mean())
    table = {"t": t, "p_trapped_exact": ser["p_trapped"], "p_trapped_mboa": np.full_like(t, quad),
             "norm": ser["norm"]}
    metrics = [
        metric("plateau_minus_prediction", abs(plateau - quad), "<=", cfg["tolerance.plateau_abs"],
               ("exact", "mboa"), f"plateau {plateau:.6g}, prediction {quad:.6g}"),
        metric("quadrature_minus_montecarlo", abs(quad - mc), "<=",
               cfg["tolerance.quadrature_vs_montecarlo"], ("quadrature", "montecarlo")),
    ]
    return {"series": table}, metrics, ()


def interference_model(cfg) -> mdl.SpinHalfModel:
    dth, M, mu, p0 = cfg["model.dtheta"], cfg["model.M"], cfg["model.mu"], cfg["packet.p0"]
    B = cfg.get("model.B")
    if B is None:
        B = mdl.HBAR * dth * p0 / (2 * M * mu * cfg["model.tan_phi"])
    return mdl.SpinHalfModel(mdl.ConstantRotation(dth, B), M, mu)


@_runner("spin_interference")
def _spin_interference(cfg):
    model = interference_model(cfg)
    x0, p0, sig = _packet(cfg)
    dth, M = model.profile.dtheta0, model.M
    length = 2 * np.pi * cfg["numerics.grid_turns"] / dth
    grid = ex.Grid(cfg["numerics.grid_n"], -length / 2, length / 2)
    ser = _exact_series(model, cfg, grid)
    t = ser["t"]
    dt = cfg["numerics.dt"]
    rec = max(int(round(cfg["numerics.record_dt"] / dt)), 1)
    res = eng.expectation_twa(model, "q", x0, p0, sig, dt, cfg["numerics.T"], cfg["numerics.samples"],
                              cfg.seed, rec)
    tb, _, pb = _bo_means(model, cfg, dt, rec)
    q_ex, q_m = ser["mean_q"], np.interp(t, res.times, res.mean)
    table = {"t": t, "q_mboa": q_m, "q_exact": q_ex, "q_boa": np.interp(t, tb, pb),
             "q_mboa_stderr": np.interp(t, res.times, res.stderr)}
    branches = mdl.branch_energies(model, x0, p0)
    gap = float(branches[1] - branches[0])
    phi = float(mdl.tilt_angle(model, x0, p0))
    fit = fit_sinusoid(t, q_ex, gap)
    window = cfg.get("tolerance.overlap_T")
    if window is None:
        window = 4 * sig * M / (mdl.HBAR * dth * np.sin(phi))
    w = t <= window
    amp = 0.5 * (q_ex[w].max() - q_ex[w].min())
    rms = float(np.sqrt(np.mean((q_m[w] - q_ex[w]) ** 2)))
    tail = t >= t[-1] * (1 - cfg["tolerance.tail_fraction"])
    target = p0 - mdl.HBAR * dth / 4 * np.sin(2 * phi)
    metrics = [
        metric("frequency_rel_error", abs(fit["omega"] / gap - 1), "<=", cfg["tolerance.frequency_rel"],
               ("exact", "gap"), f"fit {fit['omega']:.6g}, gap {gap:.6g}"),
        metric("rms_over_amplitude", rms / amp, "<", cfg["tolerance.rms_fraction"], ("exact", "mboa"),
               f"window t <= {window:.6g}"),
        metric("long_time_rel_error", abs(q_ex[tail].mean() / target - 1), "<=",
               cfg["tolerance.long_time_rel"], ("exact", "closed form"), f"target {target:.6g}"),
    ]
    return {"series": table}, metrics, res.flags


@_runner("spin_twa_fluctuations")
def _spin_twa_fluctuations(cfg):
    model = _erf_model(cfg)
    x0, p0, sig = _packet(cfg)
    grid = ex.Grid(cfg["numerics.grid_n"], cfg["numerics.grid_min"], cfg["numerics.grid_max"])
    ser = _exact_series(model, cfg, grid)
    t = ser["t"]
    dt = cfg["numerics.dt"]
    rec = max(int(round(cfg["numerics.record_dt"] / dt)), 1)
    table = {"t": t, "q_exact": ser["mean_q"]}
    mres = eng.expectation_twa(model, "q", x0, p0, sig, dt, cfg["numerics.T"], cfg["numerics.samples"],
                               cfg.seed, rec)
    table["q_mboa"] = np.interp(t, mres.times, mres.mean)
    frames = FRAMES if cfg["numerics.lab_frame"] else FRAMES[1:]
    rms = {}
    for fr in frames:
        r = twa_spin_classical(model, fr, x0, p0, sig, cfg["numerics.samples"], cfg.seed, dt,
                               cfg["numerics.T"], rec)
        col = "q_twa_" + fr.replace("moving_", "").lower()
        table[col] = np.interp(t, r.times, r.mean)
        rms[fr] = float(np.sqrt(np.mean((table[col] - ser["mean_q"]) ** 2)))
    rms_mboa = float(np.sqrt(np.mean((table["q_mboa"] - ser["mean_q"]) ** 2)))
    traj = twa_spin_trajectory(model, "moving_spin_half", x0, p0, dt=dt, T=cfg["numerics.T"],
                               record_every=max(rec // 10, 1))
    phi = mdl.tilt_angle(model, traj.x, traj.k)
    q_mbo = traj.k - 0.5 * mdl.HBAR * model.profile.dtheta(traj.x) * np.sin(phi)
    trajectory = {"t": traj.times, "x": traj.x, "q": traj.q, "p": traj.k, "q_mbo": q_mbo}
    metrics = [
        metric("rms_spin_half_frame", rms["moving_spin_half"], "<",
               rms["moving_large_S"] - cfg["tolerance.margin"], ("exact", "twa spin-1/2 moving"),
               f"large-S moving RMS {rms['moving_large_S']:.6g}"),
        metric("rms_large_spin_frame", rms["moving_large_S"], "info", None, ("exact", "twa large-S moving")),
        metric("rms_mboa", rms_mboa, "info", None, ("exact", "mboa")),
    ]
    if "lab" in rms:
        metrics.append(metric("rms_lab_frame", rms["lab"], "info", None, ("exact", "twa lab")))
    return {"series": table, "trajectory": trajectory}, metrics, mres.flags


BELL = np.array([-1.0, 0.0, 0.0, 1.0]) / np.sqrt(2)


@_runner("bell_protocol")
def _bell_protocol(cfg):
    prof = mdl.BellProfile(cfg["model.B0"], cfg["model.dtheta0"], cfg["model.dB_width"],
                           cfg["model.dtheta_width"], cfg["model.xB0"], cfg["model.xtheta0"])
    M, mu = cfg["model.M"], cfg["model.mu"]
    model = mdl.CollectiveSpinModel(2, prof, M, mu, potential=mdl.BellPotential(prof, M, mu))
    tr = eng.integrate_diagonal(model, 0, cfg["packet.x0"], cfg["packet.p0"], cfg["numerics.dt"],
                                cfg["numerics.T"], cfg["numerics.record_every"])
    ent, fid, q = [], [], []
    sx = model.ops[0]
    for x, p in zip(tr.xs, tr.ps):
        psi = eigh(mdl.moving_hamiltonian(model, float(x), float(p), "moving")).state(0)
        v = ex.dicke_to_product(psi)
        ent.append(ex.entanglement_entropy(v))
        fid.append(abs(np.vdot(BELL, v)) ** 2)
        q.append(p + mdl.HBAR * prof.dtheta(x) * np.vdot(psi, sx @ psi).real)
    ratio = mdl.HBAR * prof.dtheta(tr.xs) / tr.ps
    table = {"t": tr.times, "x": tr.xs, "p": tr.ps, "q": np.array(q), "ratio": ratio,
             "entropy": np.array(ent), "fidelity": np.array(fid), "energy": tr.energies[0]}
    metrics = [
        metric("final_fidelity", fid[-1], ">", cfg["tolerance.fidelity"], ("ground state", "bell pair")),
        metric("final_entropy_bits", ent[-1], ">", cfg["tolerance.entropy"], ("ground state",)),
        metric("final_dtheta_over_p", ratio[-1], ">", cfg["tolerance.ratio_min"], ("mboa",)),
        metric("energy_drift", tr.energy_drift(), "<", 1e-6, ("mboa",)),
    ]
    return {"series": table}, metrics, tr.flags


@_runner("squeezing_ground_state")
def _squeezing(cfg):
    chi, dth, M, mu = cfg["model.chi"], cfg["model.dtheta"], cfg["model.M"], cfg["model.mu"]
    Ns = list(range(cfg["model.N"], cfg["numerics.N_max"] + 1, cfg["numerics.N_step"]))
    rows = []
    for N in Ns:
        B = N * (mdl.HBAR * dth) ** 2 / (4 * M * mu * chi)
        model = mdl.CollectiveSpinModel(N, mdl.ConstantRotation(dth, B), M, mu)
        gs = ex.collective_ground_state(model, 0.0, cfg["packet.p0"])
        hp = ex.hp_predict(N, chi)
        r_hp = np.sqrt(hp["var_x"] / hp["var_y"])
        r = gs.delta_x / gs.delta_y
        rows.append((N, r, r_hp, gs.var_x, gs.var_y, hp["var_x"], hp["var_y"], abs(r / r_hp - 1)))
    a = np.array(rows, dtype=float)
    cols = ("N", "ratio", "ratio_hp", "var_x", "var_y", "var_x_hp", "var_y_hp", "deviation")
    table = {c: a[:, i] for i, c in enumerate(cols)}
    mono = bool(np.all(np.diff(a[:, 7]) < 0)) if len(rows) > 1 else True
    metrics = [
        metric("ratio_rel_error", a[0, 7], "<=", cfg["tolerance.ratio_rel"], ("exact", "holstein-primakoff"),
               f"N={Ns[0]}, chi={chi}"),
        metric("deviation_monotone_in_N", mono, "is", True, ("exact", "holstein-primakoff"),
               f"N={Ns[0]}..{Ns[-1]}"),
    ]
    return {"series": table}, metrics, ()


@_runner("entanglement_diagram")
def _entanglement_diagram(cfg):
    phis = np.linspace(0, np.pi / 2, cfg["numerics.phi_points"])
    ratios = np.linspace(0, cfg["numerics.ratio_max"], cfg["numerics.ratio_points"])
    d = ex.entanglement_phase_diagram(phis, ratios)
    P, R = np.meshgrid(phis, ratios, indexing="ij")
    table = {"phi": P.ravel(), "ratio": R.ravel(), "entropy": d.ravel()}
    metrics = [
        metric("lower_left_entropy", d[0, 0], "<", cfg["tolerance.lower_left_max"], ("exact",),
               "phi=0, ratio=0"),
        metric("upper_right_entropy", d[-1, -1], ">", cfg["tolerance.upper_right_min"], ("exact",),
               f"phi=pi/2, ratio={ratios[-1]:g}"),
    ]
    return {"series": table}, metrics, ()


def _piston_model(cfg, ratio_key):
    N, m, k, b0 = cfg["model.N"], cfg["model.m"], cfg["model.k"], cfg["model.beta0"]
    M = cfg.get("model.M")
    if M is None:
        if ratio_key == "model.kappa_ratio":
            return pst.PistonModel.from_mass_ratio(N, cfg[ratio_key], m=m, k=k, beta0=b0)
        M = cfg[ratio_key] * m * N
    return pst.PistonModel(M=M, N=N, m=m, k=k, beta0=b0)


@_runner("piston_oscillation")
def _piston_oscillation(cfg):
    model = _piston_model(cfg, "model.kappa_ratio")
    x0 = cfg["model.displacement"] * model.x_star()
    sim = pst.PistonGas(model, pst.init_gas(model, x0, cfg.seed), check=True)
    mbo = pst.mbo_prediction(model, x0)
    E = sim.energy()
    rec = [(sim.t, sim.x, model.M * sim.v, sim.canonical_momentum())]
    sim.advance_to(cfg["numerics.periods"] * mbo.period,
                   record=lambda s: rec.append((s.t, s.x, model.M * s.v, s.canonical_momentum())),
                   every=cfg["numerics.record_every"])
    t, x, q, p = np.array(rec).T
    th = pst.entropy_series(model, t, x, q, p, E)
    table = {"t": t, "x": x, "q": q, "p": p, "S_lab": th.S_lab, "S_moving": th.S_moving}
    T, _ = pst.oscillation_period(t, x)
    t_bo = pst.bo_prediction(model, x0, model.N / (2 * model.beta0)).period
    target = np.sqrt(1 + model.kappa / model.M)
    de, dp = sim.max_residual
    tol = cfg["tolerance.conservation"]
    metrics = [
        metric("period_ratio_rel_error", abs(T / t_bo / target - 1),
               "<=" if cfg["numerics.period_check"] else "info", cfg["tolerance.period_rel"],
               ("event-driven", "sqrt(1+kappa/M)"), f"T/T_BO {T / t_bo:.6g}, target {target:.6g}"),
        metric("event_energy_residual", de, "<=", tol, ("event-driven",), f"{sim.count} collisions"),
        metric("event_momentum_residual", dp, "<=", tol, ("event-driven",)),
    ]
    if cfg["numerics.entropy"]:
        diag = pst.entropy_diagnostics(th)
        metrics += [
            metric("entropy_swing_over_drift", diag["ratio"], ">=", cfg["tolerance.entropy_ratio"],
                   ("S_lab", "S_moving"),
                   f"swing {diag['amplitude']:.6g}, drift {diag['drift']:.6g} per period, "
                   f"{diag['periods']} periods"),
            metric("moving_entropy_non_decreasing", diag["non_decreasing"], "is", True, ("S_moving",)),
        ]
    if cfg["numerics.fluctuations"]:
        w0 = cfg["numerics.window_start"] * mbo.period
        fl = pst.fluctuation_stats(model, t, x, q, p, x0, (w0, w0 + mbo.period), cfg["numerics.batches"],
                                   cfg["numerics.speed_fraction"])
        metrics += [
            metric("q_mean_residual_in_se", abs(fl["mean_residual"]) / fl["mean_se"], "<=",
                   cfg["tolerance.q_mean_se"], ("event-driven", "p/(1+kappa/M)"),
                   f"residual {fl['mean_residual']:.6g} +- {fl['mean_se']:.6g}"),
            metric("q_variance_rel_error", abs(fl["var_ratio"] - 1), "<=", cfg["tolerance.var_rel"],
                   ("event-driven", "kappa M/(kappa+M)/beta_M"), f"{fl['var_events']} events"),
        ]
    return {"series": table}, metrics, ()


@_runner("piston_snapshot")
def _piston_snapshot(cfg):
    model = _piston_model(cfg, "model.mass_ratio")
    x0 = cfg["model.displacement"] * model.x_star()
    res = pst.slope_snapshots(model, x0, cfg.seed, cfg["numerics.snapshots"])
    rows = res["rows"]
    cols = ("t", "x", "q", "p", "slope", "slope_err", "slope_predicted")
    snaps = {c: rows[:, i] for i, c in enumerate(cols)}
    first = res["first"]
    order = np.argsort(first.xi)
    gas = {"xi_over_x": first.xi[order] / first.x, "eta": first.eta[order]}
    metrics = [
        metric("slope_ratio_rel_error", abs(res["ratio"] - 1), "<=", cfg["tolerance.slope_rel"],
               ("event-driven", "p m / M"), f"pooled ratio {res['ratio']:.6g} +- {res['ratio_err']:.6g}"),
    ]
    return {"snapshots": snaps, "gas": gas}, metrics, ()


def eigen_closed_form_residual(model: mdl.SpinHalfModel, count: int, seed: int, x_range=(-3.0, 3.0),
                               p_range=(-30.0, 30.0)) -> float:
    """Largest ``|eigh(H) - closed form|`` over random phase-space points."""
    worst = 0.0
    for i in range(count):
        r = eng._philox(seed, i).uniform(size=2)
        x = x_range[0] + (x_range[1] - x_range[0]) * r[0]
        p = p_range[0] + (p_range[1] - p_range[0]) * r[1]
        lam = eigh(mdl.moving_hamiltonian(model, x, p)).eigenvalues
        worst = max(worst, float(np.max(np.abs(lam - mdl.branch_energies(model, x, p)))))
    return worst


@_runner("dressing_identities")
def _dressing(cfg):
    model = _erf_model(cfg)
    xr, pr = cfg["numerics.x_range"], cfg["numerics.p_range"]
    res = dressing_identities(model, cfg["numerics.samples"], cfg.seed, (-xr, xr), (-pr, pr))
    tol = cfg["tolerance.identity"]
    labels = {"x": ("x^M = x I", ("moyal", "closed form")),
              "q_dyson": ("q^M = p I - A", ("dyson", "closed form")),
              "q_moyal": ("q^M = p I - A", ("moyal", "closed form")),
              "q2": ("(q^2)^M = (q^M)^2", ("dyson", "moyal"))}
    metrics = [metric(f"identity_{k}", v, "<=", tol, labels[k][1], labels[k][0]) for k, v in res.items()]
    names = list(res)
    if isinstance(model, mdl.SpinHalfModel):
        worst = eigen_closed_form_residual(model, cfg["numerics.eigen_samples"], cfg.seed, (-xr, xr), (-pr, pr))
        metrics.append(metric("eigen_closed_form", worst, "<=", cfg["tolerance.eigen"],
                              ("jacobi", "closed form")))
        names.append("eigen")
        res = {**res, "eigen": worst}
    table = {"index": np.arange(len(names), dtype=float), "max_residual": np.array([res[n] for n in names])}
    return {"series": table}, metrics, ()
