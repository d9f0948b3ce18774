"""Exact quantum references.

* Split-operator propagation of a spinor wavepacket on a periodic grid.
* Exact diagonalization of the collective spin in its symmetric block.
* Holstein-Primakoff squeezing predictions and two-spin entanglement.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import models as mdl
from .linalg import eigh, expectation
from .models import HBAR, CollectiveSpinModel, SpinHalfModel

__all__ = [
    "Grid",
    "SpinorGrid",
    "NormDriftError",
    "prepare_bo_packet",
    "SplitOperator",
    "split_step",
    "observables",
    "cosine_mask",
    "GroundState",
    "collective_ground_state",
    "hp_predict",
    "dicke_to_product",
    "entanglement_entropy",
    "entanglement_phase_diagram",
    "scaled_pair_hamiltonian",
]


class NormDriftError(RuntimeError):
    """Norm of the propagated state drifted beyond tolerance."""


@dataclass(frozen=True)
class Grid:
    """Periodic grid of ``n`` points on ``[x_min, x_max)``; ``n`` a power of two."""

    n: int
    x_min: float
    x_max: float

    def __post_init__(self):
        if self.n < 2 or self.n & (self.n - 1):
            raise ValueError(f"grid size must be a power of two, got {self.n}")
        if not self.x_max > self.x_min:
            raise ValueError("x_max must exceed x_min")

    @property
    def dx(self) -> float:
        return (self.x_max - self.x_min) / self.n

    @property
    def x(self) -> np.ndarray:
        return self.x_min + self.dx * np.arange(self.n)

    @property
    def k(self) -> np.ndarray:
        return 2 * np.pi * np.fft.fftfreq(self.n, self.dx)


@dataclass(frozen=True)
class SpinorGrid:
    """Wavefunction with ``n_c`` internal components on a grid.

    ``psi`` has shape ``(n_c, n)``; ``sum |psi|^2 dx = 1``.
    """

    grid: Grid
    psi: np.ndarray
    t: float = 0.0

    @property
    def n_c(self) -> int:
        return self.psi.shape[0]

    def density(self) -> np.ndarray:
        return np.sum(np.abs(self.psi) ** 2, axis=0)

    def norm(self) -> float:
        return float(np.sum(self.density()) * self.grid.dx)


def prepare_bo_packet(model, x0: float, p0: float, sigma_x: float, grid: Grid,
                      edge_fraction: float = 0.02, edge_tol: float = 1e-8) -> SpinorGrid:
    """Gaussian packet whose internal state is aligned with the local field."""
    x = grid.x
    env = np.exp(-((x - x0) ** 2) / (4 * sigma_x**2) + 1j * p0 * x / HBAR)
    if isinstance(model, SpinHalfModel):
        th = model.profile.theta(x)
        spin = np.array([np.cos(th / 2), 1j * np.sin(th / 2)])
    else:
        spin = np.array([model.bo_ground(xi) for xi in x]).T
    psi = spin * env
    psi /= np.sqrt(np.sum(np.abs(psi) ** 2) * grid.dx)
    dens = np.sum(np.abs(psi) ** 2, axis=0) * grid.dx
    m = max(1, int(edge_fraction * grid.n))
    edge = dens[:m].sum() + dens[-m:].sum()
    if edge > edge_tol:
        raise ValueError(f"packet mass {edge:.2e} lies within the outer grid cells; enlarge the box")
    return SpinorGrid(grid, psi, 0.0)


def cosine_mask(grid: Grid, width: float, rate: float, dt: float) -> np.ndarray:
    """Per-step absorbing mask ``exp(-rate dt cos^2(pi d / 2 width))`` within ``width`` of the edges.

    ``d`` is the distance to the nearest edge; the interior is left untouched.
    """
    x = grid.x
    d = np.minimum(x - grid.x_min, grid.x_max - x)
    ramp = np.where(d < width, np.cos(0.5 * np.pi * np.minimum(d, width) / width) ** 2, 0.0)
    return np.exp(-rate * dt * ramp)


def _site_propagators(model, x, tau):
    """``exp(-i (H_int + V) tau / hbar)`` for every grid site, shape ``(n, c, c)``."""
    v = model.potential(x)
    if isinstance(model, SpinHalfModel):
        th, b = model.profile.theta(x), model.profile.B(x)
        a = model.mu * b * tau / HBAR
        ca, sa = np.cos(a), np.sin(a)
        ph = np.exp(-1j * v * tau / HBAR)
        # exp(+i a n.sigma) with n = (0, sin th, cos th)
        u = np.empty((x.size, 2, 2), dtype=complex)
        u[:, 0, 0] = ca + 1j * sa * np.cos(th)
        u[:, 1, 1] = ca - 1j * sa * np.cos(th)
        u[:, 0, 1] = sa * np.sin(th)
        u[:, 1, 0] = -sa * np.sin(th)
        return u * ph[:, None, None]
    h = np.array([model.interaction(xi) for xi in x]) + v[:, None, None] * np.eye(model.dim)
    w, vec = np.linalg.eigh(h)
    return np.einsum("nab,nb,ncb->nac", vec, np.exp(-1j * w * tau / HBAR), vec.conj())


class SplitOperator:
    """Strang-split propagator ``e^{-iV dt/2} e^{-iT dt} e^{-iV dt/2}``.

    Parameters
    ----------
    model : SpinHalfModel or CollectiveSpinModel
    grid : Grid
    dt : float
    mask : ndarray, optional
        Absorbing mask applied after every step; disables the norm check.
    """

    def __init__(self, model, grid: Grid, dt: float, mask: np.ndarray | None = None,
                 norm_tol: float = 1e-6):
        self.model = model
        self.grid = grid
        self.dt = dt
        self.mask = mask
        self.norm_tol = norm_tol
        x = grid.x
        self.half = _site_propagators(model, x, dt / 2)
        self.full = _site_propagators(model, x, dt)
        self.kin = np.exp(-1j * HBAR * grid.k**2 / (2 * model.M) * dt)

    @staticmethod
    def _apply(u, psi):
        return np.einsum("nab,bn->an", u, psi)

    def _kinetic(self, psi):
        return np.fft.ifft(self.kin * np.fft.fft(psi, axis=1), axis=1)

    def run(self, state: SpinorGrid, steps: int) -> SpinorGrid:
        """Advance ``steps`` time steps; adjacent potential half-steps are merged."""
        if steps <= 0:
            return state
        psi = state.psi
        n0 = state.norm()
        if self.mask is None:
            psi = self._apply(self.half, psi)
            for i in range(steps):
                psi = self._kinetic(psi)
                psi = self._apply(self.full if i < steps - 1 else self.half, psi)
        else:
            for _ in range(steps):
                psi = self._apply(self.half, psi)
                psi = self._kinetic(psi)
                psi = self._apply(self.half, psi) * self.mask
        out = SpinorGrid(self.grid, psi, state.t + steps * self.dt)
        if self.mask is None:
            drift = abs(out.norm() - n0)
            if drift > self.norm_tol:
                raise NormDriftError(f"norm drifted by {drift:.3e} over {steps} steps")
        return out

    def propagate(self, state: SpinorGrid, steps: int, record_every: int, interval=None):
        """Run and record observables every ``record_every`` steps.

        Returns the final state and a dict of time series.
        """
        rec = {k: [] for k in ("t", "mean_x", "mean_q", "norm", "p_trapped")}
        def push(s):
            o = observables(s, interval)
            for k in rec:
                rec[k].append(s.t if k == "t" else o[k])
        push(state)
        done = 0
        while done < steps:
            n = min(record_every, steps - done)
            state = self.run(state, n)
            done += n
            push(state)
        return state, {k: np.array(v) for k, v in rec.items()}


def split_step(state: SpinorGrid, model, dt: float, steps: int) -> SpinorGrid:
    """Pure convenience wrapper around :class:`SplitOperator`."""
    return SplitOperator(model, state.grid, dt).run(state, steps)


def observables(state: SpinorGrid, interval=None) -> dict:
    """Position, mechanical momentum, norm and trapped weight of a grid state.

    ``interval=(a, b)`` sets the region for ``p_trapped`` (default ``(-1/2, 1/2)``).
    For two-component states the local spin texture is included.
    """
    g = state.grid
    dens = state.density()
    norm = float(dens.sum() * g.dx)
    x = g.x
    phi_k = np.fft.fft(state.psi, axis=1)
    dk = np.sum(np.abs(phi_k) ** 2, axis=0)
    a, b = (-0.5, 0.5) if interval is None else interval
    inside = (x > a) & (x < b)
    out = {
        "norm": norm,
        "mean_x": float(np.sum(x * dens) * g.dx / norm),
        "mean_q": float(HBAR * np.sum(g.k * dk) / np.sum(dk)),
        "p_trapped": float(dens[inside].sum() * g.dx),
    }
    if state.n_c == 2:
        up, dn = state.psi
        with np.errstate(invalid="ignore", divide="ignore"):
            r = np.where(dens > 0, dens, 1.0)
            out["spin_texture"] = np.array([
                2 * np.real(np.conj(up) * dn) / r,
                2 * np.imag(np.conj(up) * dn) / r,
                (np.abs(up) ** 2 - np.abs(dn) ** 2) / r,
            ])
    if state.n_c == 4:
        rho = np.einsum("an,bn->ab", state.psi, state.psi.conj()) * g.dx
        out["entanglement"] = _reduced_entropy(rho.reshape(2, 2, 2, 2))
    return out


# --------------------------------------------------------------------------
# collective spin ground states


@dataclass(frozen=True)
class GroundState:
    """Moving-frame ground state of the collective spin with its quadratures."""

    N: int
    amplitudes: np.ndarray
    energy: float
    mean: tuple
    var_x: float
    var_y: float

    @property
    def delta_x(self) -> float:
        return float(np.sqrt(self.var_x))

    @property
    def delta_y(self) -> float:
        return float(np.sqrt(self.var_y))


def collective_ground_state(model: CollectiveSpinModel, x: float, p: float) -> GroundState:
    """Ground state in the frame where the local field points along ``z``."""
    h = mdl.moving_hamiltonian(model, x, p, "moving")
    spec = eigh(h)
    psi = spec.state(0)
    sx, sy, sz = model.ops
    mx, my, mz = (expectation(psi, o) for o in (sx, sy, sz))
    vx = expectation(psi, sx @ sx) - mx**2
    vy = expectation(psi, sy @ sy) - my**2
    return GroundState(int(model.N), psi, float(spec.eigenvalues[0]), (mx, my, mz), vx, vy)


def hp_predict(N: int, chi_value: float) -> dict:
    """Large-``N`` squeezing of the collective ground state."""
    return {
        "r": 0.25 * np.log1p(chi_value),
        "var_x": N / 4 * (1 + chi_value) ** -0.5,
        "var_y": N / 4 * (1 + chi_value) ** 0.5,
    }


# --------------------------------------------------------------------------
# two-spin entanglement


def dicke_to_product(amplitudes) -> np.ndarray:
    """Map a two-spin symmetric-block state to the product basis ``uu, ud, du, dd``."""
    a = np.asarray(amplitudes, dtype=complex)
    if a.shape != (3,):
        raise ValueError("expected three amplitudes (N = 2)")
    r = 1 / np.sqrt(2)
    return np.array([a[0], r * a[1], r * a[1], a[2]])


def _reduced_entropy(rho4) -> float:
    rho_r = np.einsum("abcb->ac", rho4)
    w = np.clip(np.linalg.eigvalsh(rho_r).real, 0, None)
    w = w[w > 1e-15]
    return float(max(0.0, -np.sum(w * np.log2(w))))


def entanglement_entropy(psi4) -> float:
    """Entropy in bits of one spin's reduced state for a pure two-spin state."""
    v = np.asarray(psi4, dtype=complex).reshape(2, 2)
    v = v / np.linalg.norm(v)
    return _reduced_entropy(np.einsum("ab,cd->abcd", v, v.conj()))


def scaled_pair_hamiltonian(phi: float, ratio: float) -> np.ndarray:
    """Two-spin moving Hamiltonian up to a positive factor and constant shift.

    With ``p = M = 1``, ``theta' = ratio`` and a field chosen so that the tilt angle
    equals ``phi``, the Hamiltonian is proportional to
    ``sin(phi) Sx + ratio/2 sin(phi) Sx^2 - cos(phi) Sz``, which stays finite at
    ``phi = 0`` and ``ratio = 0``.
    """
    sx, _, sz = mdl.spin_operators(2)
    return np.sin(phi) * sx + 0.5 * ratio * np.sin(phi) * sx @ sx - np.cos(phi) * sz


def entanglement_phase_diagram(phis, ratios) -> np.ndarray:
    """Entanglement of the two-spin moving ground state on a ``(phi, ratio)`` grid.

    Returns an array of shape ``(len(phis), len(ratios))``.
    """
    out = np.empty((len(phis), len(ratios)))
    for i, ph in enumerate(phis):
        for j, r in enumerate(ratios):
            spec = eigh(scaled_pair_hamiltonian(float(ph), float(r)))
            out[i, j] = entanglement_entropy(dicke_to_product(spec.state(0)))
    return out
