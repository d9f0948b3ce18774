"""Exact event-driven dynamics of a harmonic piston confining an ideal 1-D gas.

The gas of ``N`` point particles lives between a hard wall at ``0`` and a piston
at ``x > 0``. The piston is tied to the wall by a spring ``k x**2 / 2``. Between
collisions the piston follows its exact harmonic orbit and the particles fly
freely, so the only numerical step is locating collision times.

Collision times with the piston come from a convexity argument: for a particle
at ``xi`` with velocity ``u`` the gap ``g(t) = xi + u t - X(t)`` has
``g'' = omega**2 X(t) > 0`` while the piston is at positive ``X``, so ``g`` has at
most one upward zero after its minimum. A sign test at a horizon time selects
the few candidate particles and a bracketed root solve finds the exact time.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.optimize import brentq
from scipy.special import gammaln

__all__ = [
    "PistonModel",
    "PistonState",
    "PistonGas",
    "ThermoSeries",
    "MissedCollisionError",
    "init_gas",
    "step_to_next_event",
    "bo_prediction",
    "mbo_prediction",
    "SlowHamiltonian",
    "entropy_series",
    "phase_space_stats",
    "oscillation_period",
    "period_averages",
    "entropy_diagnostics",
    "fluctuation_stats",
    "slope_snapshots",
]


class MissedCollisionError(RuntimeError):
    """A particle left the box, meaning a collision was skipped."""


@dataclass(frozen=True)
class PistonModel:
    """Piston of mass ``M`` on a spring ``k`` confining ``N`` particles of mass ``m``.

    Parameters
    ----------
    M, m : float
        Piston and particle masses.
    N : int
        Number of gas particles.
    k : float
        Spring constant; the spring pulls the piston toward the wall.
    beta0 : float
        Initial inverse temperature of the gas.
    """

    M: float
    N: int
    m: float = 1.0
    k: float = 1.0
    beta0: float = 1.0

    def __post_init__(self):
        for name in ("M", "m", "k", "beta0"):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be positive")
        if int(self.N) < 1:
            raise ValueError("N must be at least 1")

    @classmethod
    def from_mass_ratio(cls, N: int, kappa_over_M: float, **kw) -> "PistonModel":
        m = kw.get("m", 1.0)
        return cls(M=m * N / 3.0 / kappa_over_M, N=N, **kw)

    @property
    def omega(self) -> float:
        return float(np.sqrt(self.k / self.M))

    @property
    def kappa(self) -> float:
        """Mass dragged along by the gas in its moving equilibrium."""
        return self.m * self.N / 3.0

    def x_star(self, beta: float | None = None) -> float:
        """Equilibrium piston position of a gas held at inverse temperature ``beta``."""
        beta = self.beta0 if beta is None else beta
        return float(np.sqrt(self.N / (self.k * beta)))


@dataclass(frozen=True)
class PistonState:
    """Snapshot of the piston and gas at one instant."""

    t: float
    x: float
    v: float
    xi: np.ndarray
    eta: np.ndarray
    collision_count: int = 0
    seed: int | None = None

    def fast_energy(self, m: float = 1.0) -> float:
        return float(np.sum(self.eta**2) / (2 * m))

    def energy(self, model: PistonModel) -> float:
        return 0.5 * model.M * self.v**2 + 0.5 * model.k * self.x**2 + self.fast_energy(model.m)

    def canonical_momentum(self, model: PistonModel) -> float:
        return model.M * self.v + float(np.sum(self.xi * self.eta)) / self.x


def init_gas(model: PistonModel, x0: float, seed: int) -> PistonState:
    """Gibbs gas at ``beta0`` in ``(0, x0)`` with the piston released from rest."""
    rng = np.random.Generator(np.random.Philox(key=seed))
    xi = rng.uniform(0.0, x0, size=model.N)
    eta = rng.normal(0.0, np.sqrt(model.m / model.beta0), size=model.N)
    return PistonState(0.0, float(x0), 0.0, xi, eta, 0, seed)


class PistonGas:
    """Mutable event-driven integrator.

    Parameters
    ----------
    model : PistonModel
    state : PistonState
        Initial condition; copied.
    check : bool
        Assert energy and canonical-momentum conservation on every collision.
    """

    def __init__(self, model: PistonModel, state: PistonState, check: bool = False):
        self.model = model
        self.t = float(state.t)
        self.x = float(state.x)
        self.v = float(state.v)
        self.xi = np.array(state.xi, dtype=float)
        self.eta = np.array(state.eta, dtype=float)
        self.count = int(state.collision_count)
        self.seed = state.seed
        self.check = check
        self.horizon = 2 * np.pi / model.omega / 64
        self.max_residual = (0.0, 0.0)
        if np.any(self.xi < 0) or np.any(self.xi > self.x):
            raise MissedCollisionError("initial particles outside (0, x)")

    def state(self) -> PistonState:
        return PistonState(self.t, self.x, self.v, self.xi.copy(), self.eta.copy(), self.count, self.seed)

    def energy(self) -> float:
        md = self.model
        return 0.5 * md.M * self.v**2 + 0.5 * md.k * self.x**2 + float(self.eta @ self.eta) / (2 * md.m)

    def canonical_momentum(self) -> float:
        return self.model.M * self.v + float(self.xi @ self.eta) / self.x

    def fast_energy(self) -> float:
        return float(self.eta @ self.eta) / (2 * self.model.m)

    def _piston(self, tau):
        w = self.model.omega
        c, s = np.cos(w * tau), np.sin(w * tau)
        return self.x * c + self.v / w * s, -self.x * w * s + self.v * c

    def _free_flight(self, tau: float):
        if tau > 0:
            self.xi += (self.eta / self.model.m) * tau
            self.x, self.v = self._piston(tau)
            self.t += tau

    def _piston_root(self, i: int, h: float) -> float:
        xi, u = self.xi[i], self.eta[i] / self.model.m
        w = self.model.omega
        x, v = self.x, self.v

        def g(tau):
            return xi + u * tau - (x * np.cos(w * tau) + v / w * np.sin(w * tau))

        def dg(tau):
            return u - (-x * w * np.sin(w * tau) + v * np.cos(w * tau))

        lo = 0.0
        if dg(0.0) < 0.0:
            lo = brentq(dg, 0.0, h, xtol=1e-15, rtol=4 * np.finfo(float).eps)
        glo = g(lo)
        if glo >= 0.0:
            return lo
        return brentq(g, lo, h, xtol=1e-12 * self.horizon, rtol=4 * np.finfo(float).eps)

    def next_event(self) -> tuple[float, int, str]:
        """Time to, index of, and kind of the next collision within the horizon."""
        m = self.model.m
        u = self.eta / m
        with np.errstate(divide="ignore", invalid="ignore"):
            tw = np.where(u < 0, self.xi / -u, np.inf)
        tw = np.maximum(tw, 0.0)
        iw = int(np.argmin(tw))
        h = min(float(tw[iw]), self.horizon)
        xh, _ = self._piston(h)
        gap = self.xi + u * h - xh
        cand = np.flatnonzero(gap >= 0.0)
        if cand.size:
            roots = np.array([self._piston_root(int(i), h) for i in cand])
            j = int(np.argmin(roots))
            return float(roots[j]), int(cand[j]), "piston"
        if tw[iw] <= self.horizon:
            return h, iw, "wall"
        return h, -1, "none"

    def step(self) -> str:
        """Advance to and resolve the next collision (or to the horizon if none)."""
        return self._resolve(*self.next_event())

    def _resolve(self, tau: float, i: int, kind: str) -> str:
        if self.check and kind != "none":
            e0, p0 = self.energy(), None
        self._free_flight(tau)
        md = self.model
        if kind == "wall":
            self.xi[i] = 0.0
            self.eta[i] = -self.eta[i]
        elif kind == "piston":
            if self.check:
                p0 = self.canonical_momentum_at(i)
            self.xi[i] = self.x
            u = self.eta[i] / md.m
            V = self.v
            tot = md.M + md.m
            self.v = ((md.M - md.m) * V + 2 * md.m * u) / tot
            self.eta[i] = md.m * ((md.m - md.M) * u + 2 * md.M * V) / tot
        if kind != "none":
            self.count += 1
            self._validate(i)
            if self.check:
                e1 = self.energy()
                de = abs(e1 - e0) / abs(e0)
                dp = 0.0
                if p0 is not None:
                    p1 = self.canonical_momentum()
                    dp = abs(p1 - p0) / max(abs(p0), np.sqrt(md.M * abs(e0)) * 1e-3)
                self.max_residual = (max(self.max_residual[0], de), max(self.max_residual[1], dp))
        return kind

    def canonical_momentum_at(self, i: int) -> float:
        # pre-collision value with particle i placed exactly on the piston
        xi = self.xi.copy()
        xi[i] = self.x
        return self.model.M * self.v + float(xi @ self.eta) / self.x

    def _validate(self, i: int):
        tol = 1e-9 * self.x
        bad = (self.xi < -tol) | (self.xi > self.x + tol)
        if np.any(bad):
            j = int(np.flatnonzero(bad)[0])
            raise MissedCollisionError(
                f"particle {j} at {self.xi[j]!r} outside (0, {self.x!r}) at t={self.t!r} "
                f"after event {self.count} (particle {i})"
            )
        np.clip(self.xi, 0.0, self.x, out=self.xi)

    def advance_to(self, t_end: float, record=None, every: int = 1) -> int:
        """Process collisions until ``t_end``, then free-fly to exactly ``t_end``.

        ``record(sim)`` is called after every ``every``-th collision.
        Returns the number of collisions processed.
        """
        n0 = self.count
        while True:
            tau, i, kind = self.next_event()
            if self.t + tau > t_end:
                self._free_flight(t_end - self.t)
                return self.count - n0
            self._resolve(tau, i, kind)
            if record is not None and kind != "none" and self.count % every == 0:
                record(self)

    def reverse(self):
        """Flip every velocity (time reversal)."""
        self.eta = -self.eta
        self.v = -self.v


def step_to_next_event(state: PistonState, model: PistonModel) -> PistonState:
    """Pure single-event update; convenient for tests, slow for long runs."""
    sim = PistonGas(model, state)
    while sim.step() == "none":
        pass
    return sim.state()


@dataclass(frozen=True)
class SlowHamiltonian:
    """Emergent slow Hamiltonian ``p^2/2M_eff + k x^2/2 + E0 (x0/x)^2``."""

    M_eff: float
    k: float
    E0: float
    x0: float
    kappa: float = 0.0
    beta_moving: float | None = None

    def potential(self, x):
        return 0.5 * self.k * x**2 + self.E0 * (self.x0 / x) ** 2

    def dpotential(self, x):
        return self.k * x - 2 * self.E0 * self.x0**2 / x**3

    def __call__(self, x, p):
        return p**2 / (2 * self.M_eff) + self.potential(x)

    @property
    def x_eq(self) -> float:
        return float((2 * self.E0 * self.x0**2 / self.k) ** 0.25)

    @property
    def curvature(self) -> float:
        return 4.0 * self.k

    @property
    def omega(self) -> float:
        """Oscillation frequency; the potential is isochronous so this holds at any amplitude."""
        return float(np.sqrt(self.curvature / self.M_eff))

    @property
    def period(self) -> float:
        return 2 * np.pi / self.omega


def bo_prediction(model: PistonModel, x0: float, E0_fast: float) -> SlowHamiltonian:
    return SlowHamiltonian(model.M, model.k, E0_fast, x0)


def mbo_prediction(model: PistonModel, x0: float, beta0: float | None = None,
                   E0_fast: float | None = None, protocol: str = "sudden") -> SlowHamiltonian:
    """Moving-frame slow Hamiltonian with the dressed mass ``M + kappa``.

    ``protocol`` selects how the moving-frame inverse temperature is set:
    ``"sudden"`` (piston released from rest) or ``"slow"``.
    """
    beta0 = model.beta0 if beta0 is None else beta0
    if E0_fast is None:
        E0_fast = model.N / (2 * beta0)
    kap = model.kappa
    if protocol == "sudden":
        bm = beta0 * (1 - kap / (model.M + kap) / model.N)
    elif protocol == "slow":
        bm = beta0 / (1 + kap / model.M) ** (1.0 / model.N)
    else:
        raise ValueError(f"unknown protocol {protocol!r}")
    return SlowHamiltonian(model.M + kap, model.k, E0_fast, x0, kap, bm)


@dataclass(frozen=True)
class ThermoSeries:
    times: np.ndarray
    x: np.ndarray
    q: np.ndarray
    p: np.ndarray
    E_fast: np.ndarray
    S_lab: np.ndarray
    S_moving: np.ndarray


def _log_volume(model: PistonModel, x, kinetic):
    half = model.N / 2.0
    with np.errstate(invalid="ignore", divide="ignore"):
        return half * np.log(2 * np.pi * model.m * x**2) - gammaln(half + 1) + half * np.log(kinetic)


def entropy_series(model: PistonModel, times, x, q, p, E_total) -> ThermoSeries:
    """Lab-frame and moving-frame microcanonical entropies along a trajectory.

    ``q`` is the mechanical piston momentum ``M v`` and ``p`` the canonical one.
    """
    times, x, q, p = (np.asarray(a, dtype=float) for a in (times, x, q, p))
    kap = model.kappa
    k_lab = E_total - q**2 / (2 * model.M) - 0.5 * model.k * x**2
    k_mov = E_total - p**2 / (2 * (model.M + kap)) - 0.5 * model.k * x**2
    s_lab = _log_volume(model, x, k_lab)
    s_mov = _log_volume(model, x, k_mov) - 0.5 * np.log1p(kap / model.M)
    return ThermoSeries(times, x, q, p, k_lab, s_lab, s_mov)


def phase_space_stats(state: PistonState, model: PistonModel, bins: int = 20) -> dict:
    """Velocity profile of the gas and its linear fit against ``xi / x``.

    Returns binned means of ``eta``, the least-squares slope with its standard
    error, and the slope predicted by the moving equilibrium ``p m / M``.
    """
    s = np.asarray(state.xi) / state.x
    eta = np.asarray(state.eta)
    a = np.vstack([s, np.ones_like(s)]).T
    coef, res, *_ = np.linalg.lstsq(a, eta, rcond=None)
    resid = eta - a @ coef
    dof = max(eta.size - 2, 1)
    cov = np.linalg.inv(a.T @ a) * (resid @ resid) / dof
    edges = np.linspace(0.0, 1.0, bins + 1)
    idx = np.clip(np.digitize(s, edges) - 1, 0, bins - 1)
    counts = np.bincount(idx, minlength=bins)
    sums = np.bincount(idx, weights=eta, minlength=bins)
    with np.errstate(invalid="ignore"):
        means = sums / counts
    p = state.canonical_momentum(model)
    return {
        "bin_centers": 0.5 * (edges[1:] + edges[:-1]),
        "bin_means": means,
        "slope": float(coef[0]),
        "slope_err": float(np.sqrt(cov[0, 0])),
        "intercept": float(coef[1]),
        "slope_predicted": p * model.m / model.M,
        "p": p,
    }


def oscillation_period(times, x) -> tuple[float, np.ndarray]:
    """Mean period from upward crossings of ``x`` through its running mean.

    Crossing instants are linearly interpolated. Returns the mean spacing and
    the crossing times.
    """
    times, x = np.asarray(times, float), np.asarray(x, float)
    ups = np.flatnonzero((x[:-1] < np.mean(x)) & (x[1:] >= np.mean(x)))
    level = np.mean(x)
    tc = times[ups] + (level - x[ups]) * (times[ups + 1] - times[ups]) / (x[ups + 1] - x[ups])
    if tc.size < 2:
        raise ValueError("fewer than two crossings; run longer")
    return float(np.mean(np.diff(tc))), tc


def period_averages(times, values, crossings) -> np.ndarray:
    """Time averages of ``values`` between consecutive crossing instants."""
    times, values = np.asarray(times, float), np.asarray(values, float)
    out = []
    for t1, t2 in zip(crossings[:-1], crossings[1:]):
        mk = (times >= t1) & (times < t2)
        if mk.sum() < 2:
            raise ValueError("too few samples inside one period")
        out.append(np.trapezoid(values[mk], times[mk]) / (times[mk][-1] - times[mk][0]))
    return np.array(out)


def entropy_diagnostics(series: ThermoSeries) -> dict:
    """Lab entropy swing versus drift of the period-averaged moving entropy.

    ``amplitude`` is the mean half-range of ``S_lab`` per period, ``drift`` the
    mean change per period of the period-averaged ``S_moving``.
    """
    _, tc = oscillation_period(series.times, series.x)
    if tc.size < 4:
        raise ValueError("need at least three full periods")
    avg = period_averages(series.times, series.S_moving, tc)
    amp = []
    for t1, t2 in zip(tc[:-1], tc[1:]):
        mk = (series.times >= t1) & (series.times < t2)
        amp.append(0.5 * (series.S_lab[mk].max() - series.S_lab[mk].min()))
    drift = (avg[-1] - avg[0]) / (avg.size - 1)
    return {
        "periods": int(avg.size),
        "amplitude": float(np.mean(amp)),
        "drift": float(drift),
        "ratio": float(np.mean(amp) / abs(drift)) if drift else float("inf"),
        "moving_averages": avg,
        "non_decreasing": bool(np.all(np.diff(avg) >= 0)),
    }


def fluctuation_stats(model: PistonModel, times, x, q, p, x0: float, window: tuple,
                      batches: int = 20, speed_fraction: float = 0.9) -> dict:
    """Event-sampled statistics of the mechanical momentum ``q`` about its moving mean.

    The mean residual ``q - p / (1 + kappa/M)`` over ``window`` comes with a
    batch-means standard error. The variance test rescales each residual by the
    local moving temperature ``beta_M (x/x0)^2`` and keeps events near maximal
    ``|p|``, where the gas profile is fully developed.
    """
    times, x, q, p = (np.asarray(a, float) for a in (times, x, q, p))
    r = 1 + model.kappa / model.M
    mk = (times >= window[0]) & (times < window[1])
    res = q[mk] - p[mk] / r
    bm = np.array([b.mean() for b in np.array_split(res, batches)])
    mb = mbo_prediction(model, x0)
    hi = np.abs(p) > speed_fraction * np.abs(p).max()
    scaled = (q - p / r) ** 2 * mb.beta_moving * (x / x0) ** 2
    target = model.kappa * model.M / (model.kappa + model.M)
    return {
        "mean_residual": float(res.mean()),
        "mean_se": float(bm.std(ddof=1) / np.sqrt(batches)),
        "var_ratio": float(scaled[hi].mean() / target),
        "var_events": int(hi.sum()),
    }


def slope_snapshots(model: PistonModel, x0: float, seed: int, count: int = 8) -> dict:
    """Gas velocity-profile slope at successive instants of maximal piston speed.

    Snapshots are taken every half MBO period starting at a quarter period;
    the ratio to ``p m / M`` is pooled with inverse-variance weights. The
    first snapshot is returned whole under ``"first"``.
    """
    sim = PistonGas(model, init_gas(model, x0, seed))
    T = mbo_prediction(model, x0).period
    ratios, errs, rows = [], [], []
    first = None
    for j in range(count):
        sim.advance_to((0.5 * j + 0.25) * T)
        st = sim.state()
        first = st if first is None else first
        s = phase_space_stats(st, model)
        ratios.append(s["slope"] / s["slope_predicted"])
        errs.append(abs(s["slope_err"] / s["slope_predicted"]))
        rows.append((st.t, st.x, model.M * st.v, s["p"], s["slope"], s["slope_err"], s["slope_predicted"]))
    w = 1 / np.array(errs) ** 2
    pooled = float(np.sum(w * np.array(ratios)) / w.sum())
    return {"ratio": pooled, "ratio_err": float(1 / np.sqrt(w.sum())),
            "ratios": np.array(ratios), "rows": np.array(rows), "first": first}
