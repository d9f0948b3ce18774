"""Mixed quantum-classical propagation on moving-frame eigenbranches.

Each eigenbranch ``n`` of the moving Hamiltonian acts as a classical Hamiltonian
for the slow coordinate. Diagonal matrix elements of an observable ride on
single-branch orbits; off-diagonal elements ``(m, n)`` ride on the orbit of the
averaged Hamiltonian ``(H_m + H_n) / 2`` and pick up the phase
``Phi_mn = int (H_m - H_n) dt``. Averaging the trace of the dressed Wigner
matrix against the evolved observable over a packet gives expectation values.

Spin-1/2 models use vectorized closed forms; any other model goes through
numerical diagonalization with Hellmann-Feynman forces.
"""
from __future__ import annotations

import warnings
from dataclasses import dataclass, field

import numpy as np

from . import models as mdl
from .linalg import Spectrum, eigh, gauge_fix
from .models import HBAR, SpinHalfModel

__all__ = [
    "MboTrajectory",
    "EnsembleResult",
    "AdiabaticityWarning",
    "mbo_spectrum",
    "default_dt",
    "integrate_diagonal",
    "integrate_pair",
    "bo_energy",
    "integrate_bo",
    "continued_bases",
    "evolve_observable",
    "sample_wavepacket",
    "wigner_packet",
    "dressed_wigner_matrix",
    "dressed_wigner_generic",
    "expectation_twa",
    "trapped_probability",
    "trace_normalization",
    "sigma_q_spin",
    "q_weyl",
    "x_weyl",
]


class AdiabaticityWarning(RuntimeWarning):
    """A trajectory came close to a degeneracy of the moving Hamiltonian."""


@dataclass(frozen=True)
class MboTrajectory:
    """Phase-space path on branch pair ``(m, n)``.

    Arrays have shape ``(T,)`` for one trajectory or ``(T, S)`` for ``S``
    trajectories integrated together.

    Attributes
    ----------
    branch : tuple of int
    times : ndarray
    xs, ps : ndarray
    phase : ndarray
        Accumulated ``int (H_m - H_n) dt / hbar``.
    energies : ndarray
        ``H_m`` and ``H_n`` along the path, stacked on the first axis.
    flags : tuple of str
    """

    branch: tuple
    times: np.ndarray
    xs: np.ndarray
    ps: np.ndarray
    phase: np.ndarray
    energies: np.ndarray
    flags: tuple = ()

    @property
    def pair_energy(self) -> np.ndarray:
        return 0.5 * (self.energies[0] + self.energies[1])

    def energy_drift(self) -> float:
        """Largest relative change of the driving Hamiltonian along the path."""
        h = self.pair_energy
        scale = np.maximum(np.abs(h[0]), np.finfo(float).tiny)
        return float(np.max(np.abs(h - h[0]) / scale))


@dataclass(frozen=True)
class EnsembleResult:
    """Monte-Carlo time series of one observable."""

    observable: str
    times: np.ndarray
    mean: np.ndarray
    stderr: np.ndarray
    count: int
    seed: int
    flags: tuple = ()


def mbo_spectrum(model, x, p, reference: Spectrum | None = None, frame: str = "lab") -> Spectrum:
    """Eigenpairs of the moving Hamiltonian at ``(x, p)``."""
    spec = eigh(mdl.moving_hamiltonian(model, x, p, frame))
    return spec if reference is None else gauge_fix(spec, reference)


def default_dt(model, p0) -> float:
    pr = model.profile
    p_scale = max(float(np.max(np.abs(p0))), HBAR * pr.dtheta_max, 1e-12)
    return 1e-3 * model.M * pr.length_scale / p_scale


# --------------------------------------------------------------------------
# rates


def _sign(n: int) -> int:
    if n not in (0, 1):
        raise ValueError(f"spin-1/2 branch index must be 0 or 1, got {n}")
    return -1 if n == 0 else 1


def _spin_rates(model, m, n):
    sm, sn = _sign(m), _sign(n)

    def rates(x, p):
        hm, hxm, hpm = mdl.branch_gradients(model, x, p, sm)
        if m == n:
            hn, hxn, hpn = hm, hxm, hpm
        else:
            hn, hxn, hpn = mdl.branch_gradients(model, x, p, sn)
        gap = 2 * model.mu * mdl.b_eff(model, x, p)
        return 0.5 * (hpm + hpn), -0.5 * (hxm + hxn), (hm - hn) / HBAR, hm, hn, gap

    return rates


def _generic_rates(model, m, n):
    def one(x, p):
        h = mdl.moving_hamiltonian(model, x, p, "moving")
        spec = eigh(h)
        dhx, dhp = mdl.hamiltonian_gradients(model, x, p, "moving")
        v = spec.eigenvectors
        lam = spec.eigenvalues
        out = []
        for k in (m, n):
            col = v[:, k]
            out.append((lam[k], np.vdot(col, dhx @ col).real, np.vdot(col, dhp @ col).real))
        gaps = np.abs(np.diff(lam))
        idx = [i for k in (m, n) for i in (k - 1, k) if 0 <= i < gaps.size]
        gap = float(np.min(gaps[idx])) if idx else np.inf
        (hm, hxm, hpm), (hn, hxn, hpn) = out
        return 0.5 * (hpm + hpn), -0.5 * (hxm + hxn), (hm - hn) / HBAR, hm, hn, gap

    def rates(x, p):
        if np.ndim(x) == 0:
            return one(float(x), float(p))
        res = [one(float(a), float(b)) for a, b in zip(np.ravel(x), np.ravel(p))]
        return tuple(np.array(r).reshape(np.shape(x)) for r in zip(*res))

    return rates


def _integrate(rates, x0, p0, dt, steps, record_every, eps_gap):
    x = np.array(x0, dtype=float)
    p = np.array(p0, dtype=float)
    phi = np.zeros_like(x)
    nrec = steps // record_every + 1
    xs = np.empty((nrec,) + x.shape)
    ps = np.empty_like(xs)
    phs = np.empty_like(xs)
    en = np.empty((2, nrec) + x.shape)
    min_gap = np.inf
    r = 0
    k1 = rates(x, p)
    for i in range(steps + 1):
        if i % record_every == 0:
            xs[r], ps[r], phs[r] = x, p, phi
            en[0, r], en[1, r] = k1[3], k1[4]
            r += 1
        min_gap = min(min_gap, float(np.min(k1[5])))
        if i == steps:
            break
        k2 = rates(x + 0.5 * dt * k1[0], p + 0.5 * dt * k1[1])
        k3 = rates(x + 0.5 * dt * k2[0], p + 0.5 * dt * k2[1])
        k4 = rates(x + dt * k3[0], p + dt * k3[1])
        x = x + dt / 6 * (k1[0] + 2 * k2[0] + 2 * k3[0] + k4[0])
        p = p + dt / 6 * (k1[1] + 2 * k2[1] + 2 * k3[1] + k4[1])
        # Simpson weights on the stage values of the phase rate
        phi = phi + dt / 6 * (k1[2] + 2 * k2[2] + 2 * k3[2] + k4[2])
        k1 = rates(x, p)
    flags = ()
    if eps_gap is not None and min_gap < eps_gap:
        flags = ("adiabaticity suspect",)
        warnings.warn(f"gap fell to {min_gap:.3e} < {eps_gap:.3e}", AdiabaticityWarning, stacklevel=3)
    return xs, ps, phs, en, flags


def integrate_pair(model, m: int, n: int, x0, p0, dt: float | None = None, T: float = 1.0,
                   record_every: int = 1, eps_gap: float | None = None) -> MboTrajectory:
    """RK4 orbit of the pair Hamiltonian ``(H_m + H_n)/2`` with its phase.

    ``x0`` and ``p0`` may be arrays; spin-1/2 models are then integrated in a
    single vectorized pass.
    """
    if dt is None:
        dt = default_dt(model, p0)
    steps = max(int(round(T / dt)), 1)
    if isinstance(model, SpinHalfModel) and model.profile.analytic:
        rates = _spin_rates(model, m, n)
    else:
        rates = _generic_rates(model, m, n)
    if eps_gap is None:
        eps_gap = 1e-6 * _energy_scale(model)
    xs, ps, phs, en, flags = _integrate(rates, x0, p0, dt, steps, record_every, eps_gap)
    times = dt * record_every * np.arange(xs.shape[0])
    return MboTrajectory((m, n), times, xs, ps, phs, en, flags)


def integrate_diagonal(model, n: int, x0, p0, dt: float | None = None, T: float = 1.0,
                       record_every: int = 1, eps_gap: float | None = None) -> MboTrajectory:
    """RK4 orbit on eigenbranch ``n``; equivalent to ``integrate_pair(n, n)``."""
    return integrate_pair(model, n, n, x0, p0, dt, T, record_every, eps_gap)


def bo_energy(model, x, p):
    """Energy of the field-aligned state: BO surface plus its diagonal correction."""
    pr, n = model.profile, model.N
    return (p**2 / (2 * model.M) + HBAR**2 * n * pr.dtheta(x) ** 2 / (8 * model.M)
            - n * model.mu * pr.B(x) + model.potential(x))


def _bo_rates(model):
    pr, n = model.profile, model.N

    def rates(x, p):
        h = bo_energy(model, x, p)
        force = -(HBAR**2 * n * pr.dtheta(x) * pr.d2theta(x) / (4 * model.M)
                  - n * model.mu * pr.dB(x) + model.potential.derivative(x))
        return p / model.M, force, np.zeros_like(h), h, h, np.full_like(h, np.inf)

    return rates


def integrate_bo(model, x0, p0, dt: float | None = None, T: float = 1.0,
                 record_every: int = 1) -> MboTrajectory:
    """RK4 orbit of the slow coordinate with the spin frozen along the local field.

    The branch label is ``("bo", "bo")``; the phase is identically zero.
    """
    if dt is None:
        dt = default_dt(model, p0)
    steps = max(int(round(T / dt)), 1)
    xs, ps, phs, en, _ = _integrate(_bo_rates(model), x0, p0, dt, steps, record_every, None)
    times = dt * record_every * np.arange(xs.shape[0])
    return MboTrajectory(("bo", "bo"), times, xs, ps, phs, en, ())


def _energy_scale(model) -> float:
    pr = model.profile
    return max(model.mu * float(np.max(pr.B(np.linspace(-5, 5, 11) * pr.length_scale))),
               HBAR**2 * pr.dtheta_max**2 / model.M, 1e-300)


# --------------------------------------------------------------------------
# observables and gauge continuation


def continued_bases(model, xs, ps, frame: str = "moving") -> tuple[np.ndarray, float]:
    """Eigenbases along a path, each phase-matched to its predecessor.

    Returns the bases with shape ``(T, D, D)`` and the smallest overlap between
    matched columns of consecutive points.
    """
    bases = []
    prev = None
    worst = 1.0
    for x, p in zip(np.ravel(xs), np.ravel(ps)):
        spec = mbo_spectrum(model, float(x), float(p), prev, frame)
        if prev is not None:
            ov = np.abs(np.sum(prev.eigenvectors.conj() * spec.eigenvectors, axis=0))
            worst = min(worst, float(np.min(ov)))
        bases.append(spec.eigenvectors)
        prev = spec
    return np.array(bases), worst


def q_weyl(model):
    """Dressed mechanical momentum ``p - A_x`` as a matrix field."""
    def omega(x, p):
        return p * np.eye(model.dim) - model.agp(x)
    return omega


def x_weyl(model):
    def omega(x, p):
        return x * np.eye(model.dim)
    return omega


def evolve_observable(model, omega, trajs: dict, index: int | None = None,
                      frame: str = "moving", min_overlap: float = 0.9):
    """Evolved observable in the moving eigenbasis.

    Parameters
    ----------
    omega : callable
        ``omega(x, p)`` returns the observable symbol as a ``D x D`` matrix.
    trajs : dict
        Maps ``(m, n)`` with ``m <= n`` to a scalar :class:`MboTrajectory`; all
        start at the same point.
    index : int, optional
        Time index; all recorded times when omitted.

    Returns
    -------
    values : ndarray, shape ``(T, D, D)`` or ``(D, D)``
    flags : tuple of str
    """
    d = model.dim
    first = next(iter(trajs.values()))
    nt = first.times.size
    out = np.zeros((nt, d, d), dtype=complex)
    flags = []
    for (m, n), tr in trajs.items():
        if m > n:
            raise ValueError("pass pairs with m <= n")
        bases, worst = continued_bases(model, tr.xs, tr.ps, frame)
        if worst < min_overlap:
            flags.append(f"gauge discontinuity on pair {(m, n)} (overlap {worst:.3f})")
        for t in range(nt):
            o = omega(float(tr.xs[t]), float(tr.ps[t]))
            v = bases[t]
            val = np.vdot(v[:, m], o @ v[:, n]) * np.exp(1j * tr.phase[t])
            out[t, m, n] = val
            out[t, n, m] = np.conj(val)
    if index is not None:
        return out[index], tuple(flags)
    return out, tuple(flags)


# --------------------------------------------------------------------------
# packets and dressed Wigner weights


def _philox(seed: int, i: int) -> np.random.Generator:
    return np.random.Generator(np.random.Philox(key=int(seed), counter=[0, 0, 0, int(i)]))


def sample_wavepacket(x0: float, p0: float, sigma_x: float, count: int, seed: int):
    """Draws from the Wigner function of a minimum-uncertainty Gaussian.

    Sample ``i`` depends only on ``(seed, i)``. Returns ``(x, p, weights)``; the
    weights are uniform because the draws follow the Wigner density itself.
    """
    if sigma_x <= 0:
        raise ValueError("sigma_x must be positive")
    if count < 1:
        raise ValueError("count must be at least 1")
    z = np.array([_philox(seed, i).standard_normal(2) for i in range(count)])
    xs = x0 + sigma_x * z[:, 0]
    ps = p0 + HBAR / (2 * sigma_x) * z[:, 1]
    return xs, ps, np.ones(count)


def wigner_packet(x, p, x0, p0, sigma_x):
    """Wigner function of the Gaussian packet; integrates to ``2 pi hbar``."""
    return 2 * np.exp(-((x - x0) ** 2) / (2 * sigma_x**2) - 2 * sigma_x**2 * (p - p0) ** 2 / HBAR**2)


def dressed_wigner_matrix(model, x, p, scalar_weight=1.0) -> np.ndarray:
    """Ground-aligned spinor projected on the spin-1/2 moving eigenbasis."""
    phi = mdl.tilt_angle(model, x, p)
    c, s = np.cos(phi / 2), np.sin(phi / 2)
    return scalar_weight * np.array([[c * c, c * s], [c * s, s * s]])


def dressed_wigner_generic(model, basis: np.ndarray, scalar_weight=1.0) -> np.ndarray:
    """Projector on the field-aligned state, in the given moving-frame basis."""
    top = basis[0, :]  # components of each eigenvector along the aligned state
    return scalar_weight * np.outer(top, top.conj()).conj()


def sigma_q_spin(model, x, p):
    """Spread of the mechanical momentum in the spin-1/2 moving ground state."""
    return 0.5 * HBAR * np.abs(model.profile.dtheta(x) * np.cos(mdl.tilt_angle(model, x, p)))


# --------------------------------------------------------------------------
# ensembles


_SPIN_OBSERVABLES = ("x", "q", "p", "x_sa", "q_sa")


def _spin_diag(model, name, x, p, sign):
    if name in ("x", "x_sa"):
        return x
    if name == "p":
        return p
    phi = mdl.tilt_angle(model, x, p)
    return p + sign * 0.5 * HBAR * model.profile.dtheta(x) * np.sin(phi)


def _spin_offdiag(model, name, x, p):
    # (ground, excited) element in the real moving-frame gauge
    if name == "p":
        return np.zeros_like(x, dtype=complex)
    if name == "x":
        return np.zeros_like(x, dtype=complex)
    phi = mdl.tilt_angle(model, x, p)
    dphix, dphip = mdl.tilt_angle_gradient(model, x, p)
    if name == "x_sa":
        return 0.5j * HBAR * dphip
    q = 0.5 * HBAR * model.profile.dtheta(x) * np.cos(phi) + 0j
    if name == "q_sa":
        q = q - 0.5j * HBAR * dphix
    return q


def expectation_twa(model, observable, x0: float, p0: float, sigma_x: float,
                    dt: float | None = None, T: float = 1.0, count: int = 1000, seed: int = 0,
                    record_every: int = 1):
    """Ensemble average of ``Tr(W(x, p) Omega(t))`` over packet samples.

    ``observable`` is one of ``"x", "q", "p", "x_sa", "q_sa"`` for spin-1/2
    models (the ``_sa`` variants include the second-order dressing), or a
    callable ``omega(x, p)`` returning the moving-frame symbol for any model.
    A tuple of names evaluates several observables on the same trajectories
    and returns a dict of results keyed by name.
    """
    xs, ps, _ = sample_wavepacket(x0, p0, sigma_x, count, seed)
    if dt is None:
        dt = default_dt(model, p0)
    names = observable if isinstance(observable, tuple) else (observable,)
    fast = (isinstance(model, SpinHalfModel) and model.profile.analytic
            and all(isinstance(o, str) for o in names))
    if fast:
        for o in names:
            if o not in _SPIN_OBSERVABLES:
                raise ValueError(f"unknown observable {o!r}")
        vals, times, flags = _spin_twa(model, names, xs, ps, dt, T, record_every)
    else:
        vals = {}
        for o in names:
            omega = {"x": x_weyl(model), "q": q_weyl(model)}[o] if isinstance(o, str) else o
            v, times, flags = _generic_twa(model, omega, xs, ps, dt, T, record_every)
            vals[o if isinstance(o, str) else getattr(o, "__name__", "omega")] = v
    out = {}
    for name, v in vals.items():
        mean = v.mean(axis=1)
        err = v.std(axis=1, ddof=1) / np.sqrt(count) if count > 1 else np.zeros_like(mean)
        out[name] = EnsembleResult(name, times, mean, err, count, seed, flags)
    return out if isinstance(observable, tuple) else next(iter(out.values()))


def _spin_twa(model, names, xs, ps, dt, T, record_every):
    phi0 = mdl.tilt_angle(model, xs, ps)
    c2, s2, off = np.cos(phi0 / 2) ** 2, np.sin(phi0 / 2) ** 2, 0.5 * np.sin(phi0)
    g = integrate_pair(model, 0, 0, xs, ps, dt, T, record_every)
    e = integrate_pair(model, 1, 1, xs, ps, dt, T, record_every)
    flags = g.flags + e.flags
    pr = None
    out = {}
    for name in names:
        vals = c2 * _spin_diag(model, name, g.xs, g.ps, -1) + s2 * _spin_diag(model, name, e.xs, e.ps, +1)
        if name not in ("x", "p"):
            if pr is None:
                pr = integrate_pair(model, 0, 1, xs, ps, dt, T, record_every)
                flags += pr.flags
            o = _spin_offdiag(model, name, pr.xs, pr.ps)
            vals = vals + 2 * np.real(off * np.exp(1j * pr.phase) * o)
        out[name] = vals
    return out, g.times, tuple(sorted(set(flags)))


def _generic_twa(model, omega, xs, ps, dt, T, record_every):
    d = model.dim
    cols = []
    flags = set()
    times = None
    for x0, p0 in zip(xs, ps):
        trajs = {(m, n): integrate_pair(model, m, n, x0, p0, dt, T, record_every)
                 for m in range(d) for n in range(m, d)}
        om, fl = evolve_observable(model, omega, trajs)
        basis0, _ = continued_bases(model, [x0], [p0])
        w = dressed_wigner_generic(model, basis0[0])
        cols.append(np.real(np.einsum("nm,tmn->t", w, om)))
        flags.update(fl)
        for tr in trajs.values():
            flags.update(tr.flags)
        times = trajs[(0, 0)].times
    return np.array(cols).T, times, tuple(sorted(flags))


def trapped_probability(model, x0: float, p0: float, sigma_x: float, method: str = "quadrature",
                        nodes: int = 96, count: int = 100_000, seed: int = 0) -> float:
    """Weight of the packet on the moving ground branch, ``<cos^2(phi/2)>_W``.

    ``method="quadrature"`` uses a Gauss-Hermite tensor grid, ``"montecarlo"``
    averages over packet samples.
    """
    sp = HBAR / (2 * sigma_x)
    if method == "quadrature":
        u, w = np.polynomial.hermite.hermgauss(nodes)
        X = x0 + np.sqrt(2) * sigma_x * u[:, None]
        P = p0 + np.sqrt(2) * sp * u[None, :]
        f = np.cos(mdl.tilt_angle(model, X, P) / 2) ** 2
        return float(w @ f @ w / np.pi)
    if method == "montecarlo":
        xs, ps, _ = sample_wavepacket(x0, p0, sigma_x, count, seed)
        return float(np.mean(np.cos(mdl.tilt_angle(model, xs, ps) / 2) ** 2))
    raise ValueError(f"unknown method {method!r}")


def trace_normalization(model, x0: float, p0: float, sigma_x: float, count: int, seed: int,
                        width: float = 6.0) -> tuple[float, float]:
    """Uniform-box Monte-Carlo estimate of ``int Tr W dx dp / (2 pi hbar)``.

    Returns the estimate and its standard error.
    """
    sp = HBAR / (2 * sigma_x)
    rng = np.random.Generator(np.random.Philox(key=int(seed)))
    x = x0 + sigma_x * width * rng.uniform(-1, 1, count)
    p = p0 + sp * width * rng.uniform(-1, 1, count)
    area = (2 * width * sigma_x) * (2 * width * sp)
    w = wigner_packet(x, p, x0, p0, sigma_x)
    if isinstance(model, SpinHalfModel):
        tr = np.trace(dressed_wigner_matrix(model, x, p, 1.0))
    else:
        tr = np.array([np.trace(dressed_wigner_generic(model, continued_bases(model, [a], [b])[0][0])).real
                       for a, b in zip(x, p)])
    f = w * tr * area / (2 * np.pi * HBAR)
    return float(f.mean()), float(f.std(ddof=1) / np.sqrt(count))
