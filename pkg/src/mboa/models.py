"""Spin models in a rotating magnetic field and their closed-form physics.

Conventions: ``hbar = 1``. A spin-1/2 particle of mass ``M`` and moment ``mu``
moves along ``x`` in a field of magnitude ``B(x)`` whose direction rotates in
the y-z plane by the angle ``theta(x)``. The lab interaction is
``-mu B (cos(theta) sz + sin(theta) sy)``; ``N`` spins couple through the
collective spin as ``-2 mu B (cos(theta) Sz + sin(theta) Sy)``.

All scalar functions accept numpy arrays and broadcast.
"""
from __future__ import annotations

import warnings
from dataclasses import dataclass
from typing import Callable

import numpy as np
from scipy.special import erf

__all__ = [
    "HBAR",
    "SX", "SY", "SZ", "I2",
    "spin_operators",
    "FieldProfile",
    "ConstantRotation",
    "ErfRotation",
    "BellProfile",
    "TabulatedProfile",
    "ScalarPotential",
    "ZeroPotential",
    "CallablePotential",
    "BellPotential",
    "SpinHalfModel",
    "CollectiveSpinModel",
    "agp_spin",
    "moving_hamiltonian",
    "hamiltonian_gradients",
    "tilt_angle",
    "b_eff",
    "branch_energies",
    "branch_gradients",
    "zeta",
    "v_eff",
    "kappa_spin",
    "chi",
    "bell_potential",
    "superadiabatic_agps",
    "tilt_angle_gradient",
    "DegenerateTiltWarning",
]

HBAR = 1.0
SQRT_PI = np.sqrt(np.pi)

SX = np.array([[0, 1], [1, 0]], dtype=complex)
SY = np.array([[0, -1j], [1j, 0]], dtype=complex)
SZ = np.array([[1, 0], [0, -1]], dtype=complex)
I2 = np.eye(2, dtype=complex)


def spin_operators(N: int) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Collective spin ``(Sx, Sy, Sz)`` in the symmetric block of ``N`` spin-1/2.

    Basis order is ``Sz = N/2, N/2 - 1, ..., -N/2``.
    """
    if N < 1:
        raise ValueError("N must be at least 1")
    s = N / 2.0
    m = s - np.arange(N + 1)
    # <m+1| S+ |m>
    up = np.sqrt(s * (s + 1) - m[1:] * (m[1:] + 1))
    splus = np.diag(up, 1).astype(complex)
    sx = 0.5 * (splus + splus.conj().T)
    sy = -0.5j * (splus - splus.conj().T)
    sz = np.diag(m).astype(complex)
    return sx, sy, sz


# --------------------------------------------------------------------------
# field profiles


class FieldProfile:
    """Rotation angle ``theta(x)`` and field magnitude ``B(x)`` with derivatives.

    Subclasses provide ``theta``, ``dtheta``, ``d2theta``, ``B`` and ``dB``.
    ``analytic`` is False when derivatives come from finite differences.
    """

    analytic = True
    kind = "abstract"

    def theta(self, x):
        raise NotImplementedError

    def dtheta(self, x):
        raise NotImplementedError

    def d2theta(self, x):
        raise NotImplementedError

    def B(self, x):
        raise NotImplementedError

    def dB(self, x):
        raise NotImplementedError

    def params(self) -> dict:
        return {}

    @property
    def length_scale(self) -> float:
        return 1.0

    @property
    def dtheta_max(self) -> float:
        return 0.0


@dataclass(frozen=True)
class ConstantRotation(FieldProfile):
    """Uniform field magnitude rotating at a constant rate, ``theta = dtheta0 * x``."""

    dtheta0: float
    B0: float
    kind = "constant_rotation"

    def __post_init__(self):
        if self.B0 < 0:
            raise ValueError("B0 must be non-negative")

    def theta(self, x):
        return self.dtheta0 * np.asarray(x, dtype=float)

    def dtheta(self, x):
        return np.full_like(np.asarray(x, dtype=float), self.dtheta0)

    def d2theta(self, x):
        return np.zeros_like(np.asarray(x, dtype=float))

    def B(self, x):
        return np.full_like(np.asarray(x, dtype=float), self.B0)

    def dB(self, x):
        return np.zeros_like(np.asarray(x, dtype=float))

    def params(self):
        return {"dtheta0": self.dtheta0, "B0": self.B0}

    @property
    def length_scale(self):
        return 1.0 / abs(self.dtheta0) if self.dtheta0 else 1.0

    @property
    def dtheta_max(self):
        return abs(self.dtheta0)


@dataclass(frozen=True)
class ErfRotation(FieldProfile):
    """Field of fixed magnitude rotating by ``2 theta0`` across a region of width ``d``."""

    theta0: float
    d: float
    B0: float
    kind = "erf_rotation"

    def __post_init__(self):
        if self.d <= 0:
            raise ValueError("d must be positive")
        if self.B0 < 0:
            raise ValueError("B0 must be non-negative")

    @classmethod
    def from_zeta(cls, theta0: float, d: float, zeta_value: float, M: float = 1.0,
                  mu: float = 1.0) -> "ErfRotation":
        """Profile whose field magnitude yields the requested non-adiabaticity ``zeta``."""
        if zeta_value <= 0:
            raise ValueError("zeta must be positive")
        return cls(theta0, d, HBAR**2 * theta0**2 / (np.pi * M * mu * zeta_value * d**2))

    def theta(self, x):
        return self.theta0 * (1 + erf(np.asarray(x, dtype=float) / self.d))

    def dtheta(self, x):
        x = np.asarray(x, dtype=float)
        return 2 * self.theta0 / (SQRT_PI * self.d) * np.exp(-(x / self.d) ** 2)

    def d2theta(self, x):
        x = np.asarray(x, dtype=float)
        return -2 * x / self.d**2 * self.dtheta(x)

    def B(self, x):
        return np.full_like(np.asarray(x, dtype=float), self.B0)

    def dB(self, x):
        return np.zeros_like(np.asarray(x, dtype=float))

    def params(self):
        return {"theta0": self.theta0, "d": self.d, "B0": self.B0}

    @property
    def length_scale(self):
        return self.d

    @property
    def dtheta_max(self):
        return abs(2 * self.theta0 / (SQRT_PI * self.d))


@dataclass(frozen=True)
class BellProfile(FieldProfile):
    """Field that switches off while the rotation rate switches on.

    ``B(x)`` falls from ``B0`` to zero around ``xB0``; ``theta'(x)`` rises from zero
    to ``dtheta0`` around ``xtheta0``.
    """

    B0: float = 10.0
    dtheta0: float = 1.0
    dB_width: float = 1.0
    dtheta_width: float = 1.0
    xB0: float = 1.0
    xtheta0: float = -1.0
    kind = "bell_protocol"

    def __post_init__(self):
        if self.B0 < 0:
            raise ValueError("B0 must be non-negative")
        if self.dB_width <= 0 or self.dtheta_width <= 0:
            raise ValueError("widths must be positive")

    def theta(self, x):
        # antiderivative of dtheta, zero far to the left
        u = (np.asarray(x, dtype=float) - self.xtheta0) / self.dtheta_width
        w = self.dtheta_width
        return 0.5 * self.dtheta0 * w * (u + u * erf(u) + np.exp(-u * u) / SQRT_PI)

    def dtheta(self, x):
        u = (np.asarray(x, dtype=float) - self.xtheta0) / self.dtheta_width
        return 0.5 * self.dtheta0 * (1 + erf(u))

    def d2theta(self, x):
        u = (np.asarray(x, dtype=float) - self.xtheta0) / self.dtheta_width
        return self.dtheta0 / (SQRT_PI * self.dtheta_width) * np.exp(-u * u)

    def B(self, x):
        u = (self.xB0 - np.asarray(x, dtype=float)) / self.dB_width
        return 0.5 * self.B0 * (1 + erf(u))

    def dB(self, x):
        u = (self.xB0 - np.asarray(x, dtype=float)) / self.dB_width
        return -self.B0 / (SQRT_PI * self.dB_width) * np.exp(-u * u)

    def params(self):
        return {"B0": self.B0, "dtheta0": self.dtheta0, "dB_width": self.dB_width,
                "dtheta_width": self.dtheta_width, "xB0": self.xB0, "xtheta0": self.xtheta0}

    @property
    def length_scale(self):
        return min(self.dB_width, self.dtheta_width)

    @property
    def dtheta_max(self):
        return abs(self.dtheta0)


def _fd_step(x):
    return 1e-6 * np.maximum(1.0, np.abs(x))


class TabulatedProfile(FieldProfile):
    """Profile from user callables; derivatives by centered finite differences."""

    analytic = False
    kind = "tabulated"

    def __init__(self, theta: Callable, B: Callable):
        self._theta = theta
        self._B = B

    def theta(self, x):
        return np.asarray(self._theta(np.asarray(x, dtype=float)), dtype=float)

    def B(self, x):
        return np.asarray(self._B(np.asarray(x, dtype=float)), dtype=float)

    def dtheta(self, x):
        x = np.asarray(x, dtype=float)
        h = _fd_step(x)
        return (self.theta(x + h) - self.theta(x - h)) / (2 * h)

    def d2theta(self, x):
        x = np.asarray(x, dtype=float)
        h = 1e3 * _fd_step(x)
        return (self.theta(x + h) - 2 * self.theta(x) + self.theta(x - h)) / h**2

    def dB(self, x):
        x = np.asarray(x, dtype=float)
        h = _fd_step(x)
        return (self.B(x + h) - self.B(x - h)) / (2 * h)


# --------------------------------------------------------------------------
# scalar potentials


class ScalarPotential:
    """External potential ``V(x)`` with derivative."""

    def __call__(self, x):
        raise NotImplementedError

    def derivative(self, x):
        raise NotImplementedError


class ZeroPotential(ScalarPotential):
    def __call__(self, x):
        return np.zeros_like(np.asarray(x, dtype=float))

    def derivative(self, x):
        return np.zeros_like(np.asarray(x, dtype=float))

    def __repr__(self):
        return "ZeroPotential()"


class CallablePotential(ScalarPotential):
    """Wraps a plain function; the derivative is a centered finite difference."""

    def __init__(self, fn: Callable, dfn: Callable | None = None):
        self.fn = fn
        self.dfn = dfn

    def __call__(self, x):
        return np.asarray(self.fn(np.asarray(x, dtype=float)), dtype=float)

    def derivative(self, x):
        x = np.asarray(x, dtype=float)
        if self.dfn is not None:
            return np.asarray(self.dfn(x), dtype=float)
        h = _fd_step(x)
        return (self(x + h) - self(x - h)) / (2 * h)


@dataclass(frozen=True)
class BellPotential(ScalarPotential):
    """Compensating potential that flattens the two-spin ground branch.

    ``V = sqrt((2 mu B)^2 + (theta'^2 / 4M)^2) - theta'^2 / 4M``
    """

    profile: FieldProfile
    M: float = 1.0
    mu: float = 1.0

    def _parts(self, x):
        a = 2 * self.mu * self.profile.B(x)
        b = (HBAR * self.profile.dtheta(x)) ** 2 / (4 * self.M)
        return a, b

    def __call__(self, x):
        a, b = self._parts(x)
        # b^2 + a^2 - b^2 written to avoid cancellation when a << b
        return a**2 / (np.sqrt(a**2 + b**2) + b)

    def derivative(self, x):
        a, b = self._parts(x)
        da = 2 * self.mu * self.profile.dB(x)
        db = HBAR**2 * self.profile.dtheta(x) * self.profile.d2theta(x) / (2 * self.M)
        r = np.sqrt(a**2 + b**2)
        with np.errstate(invalid="ignore", divide="ignore"):
            out = np.where(r > 0, (a * da + b * db) / np.where(r > 0, r, 1.0), 0.0) - db
        return out


def bell_potential(profile: FieldProfile, x, M: float = 1.0, mu: float = 1.0):
    return BellPotential(profile, M, mu)(x)


# --------------------------------------------------------------------------
# models


@dataclass(frozen=True)
class SpinHalfModel:
    """A spin-1/2 particle moving through a rotating field.

    Parameters
    ----------
    profile : FieldProfile
    M : float
        Mass of the moving particle.
    mu : float
        Magnetic moment.
    potential : ScalarPotential, optional
        Additional spin-independent potential ``V(x)``.
    """

    profile: FieldProfile
    M: float = 1.0
    mu: float = 1.0
    potential: ScalarPotential = ZeroPotential()

    N = 1
    dim = 2

    def __post_init__(self):
        if not self.M > 0 or not self.mu > 0:
            raise ValueError("M and mu must be positive")

    def agp(self, x) -> np.ndarray:
        return -0.5 * HBAR * float(self.profile.dtheta(x)) * SX

    def dagp(self, x) -> np.ndarray:
        return -0.5 * HBAR * float(self.profile.d2theta(x)) * SX

    def interaction(self, x) -> np.ndarray:
        th, b = float(self.profile.theta(x)), float(self.profile.B(x))
        return -self.mu * b * (np.cos(th) * SZ + np.sin(th) * SY)

    def dinteraction(self, x) -> np.ndarray:
        pr = self.profile
        th, b = float(pr.theta(x)), float(pr.B(x))
        db, dth = float(pr.dB(x)), float(pr.dtheta(x))
        return -self.mu * (db * (np.cos(th) * SZ + np.sin(th) * SY)
                           + b * dth * (-np.sin(th) * SZ + np.cos(th) * SY))

    def interaction_moving(self, x) -> np.ndarray:
        return -self.mu * float(self.profile.B(x)) * SZ

    def dinteraction_moving(self, x) -> np.ndarray:
        return -self.mu * float(self.profile.dB(x)) * SZ

    def frame_rotation(self, x) -> np.ndarray:
        """Unitary taking moving-frame spinors to the lab, ``exp(i theta sx / 2)``."""
        th = float(self.profile.theta(x))
        return np.cos(th / 2) * I2 + 1j * np.sin(th / 2) * SX

    def frame_generator(self, x) -> tuple[np.ndarray, np.ndarray]:
        """``(G, dG/dx)`` with ``frame_rotation = exp(-i G / hbar)``."""
        pr = self.profile
        return -0.5 * HBAR * float(pr.theta(x)) * SX, -0.5 * HBAR * float(pr.dtheta(x)) * SX

    def bo_ground(self, x) -> np.ndarray:
        """Lab-frame spinor aligned with the local field."""
        th = float(self.profile.theta(x))
        return np.array([np.cos(th / 2), 1j * np.sin(th / 2)])


@dataclass(frozen=True)
class CollectiveSpinModel:
    """``N`` spin-1/2 particles bound to one moving body, in the symmetric block.

    The interaction is ``-2 mu B (cos(theta) Sz + sin(theta) Sy)`` and the gauge
    potential is ``-hbar theta' Sx``.
    """

    N: int
    profile: FieldProfile
    M: float = 1.0
    mu: float = 1.0
    potential: ScalarPotential = ZeroPotential()

    def __post_init__(self):
        if int(self.N) < 1:
            raise ValueError("N must be at least 1")
        if not self.M > 0 or not self.mu > 0:
            raise ValueError("M and mu must be positive")
        sx, sy, sz = spin_operators(int(self.N))
        object.__setattr__(self, "_ops", (sx, sy, sz))
        object.__setattr__(self, "_sx_eig", np.linalg.eigh(sx))

    @property
    def dim(self) -> int:
        return int(self.N) + 1

    @property
    def ops(self):
        return self._ops

    def agp(self, x) -> np.ndarray:
        return -HBAR * float(self.profile.dtheta(x)) * self._ops[0]

    def dagp(self, x) -> np.ndarray:
        return -HBAR * float(self.profile.d2theta(x)) * self._ops[0]

    def interaction(self, x) -> np.ndarray:
        _, sy, sz = self._ops
        th, b = float(self.profile.theta(x)), float(self.profile.B(x))
        return -2 * self.mu * b * (np.cos(th) * sz + np.sin(th) * sy)

    def dinteraction(self, x) -> np.ndarray:
        _, sy, sz = self._ops
        pr = self.profile
        th, b = float(pr.theta(x)), float(pr.B(x))
        db, dth = float(pr.dB(x)), float(pr.dtheta(x))
        return -2 * self.mu * (db * (np.cos(th) * sz + np.sin(th) * sy)
                               + b * dth * (-np.sin(th) * sz + np.cos(th) * sy))

    def interaction_moving(self, x) -> np.ndarray:
        return -2 * self.mu * float(self.profile.B(x)) * self._ops[2]

    def dinteraction_moving(self, x) -> np.ndarray:
        return -2 * self.mu * float(self.profile.dB(x)) * self._ops[2]

    def frame_rotation(self, x) -> np.ndarray:
        """Unitary taking moving-frame states to the lab, ``exp(i theta Sx)``."""
        th = float(self.profile.theta(x))
        w, v = self._sx_eig
        return (v * np.exp(1j * th * w)) @ v.conj().T

    def frame_generator(self, x) -> tuple[np.ndarray, np.ndarray]:
        """``(G, dG/dx)`` with ``frame_rotation = exp(-i G / hbar)``."""
        sx = self._ops[0]
        pr = self.profile
        return -HBAR * float(pr.theta(x)) * sx, -HBAR * float(pr.dtheta(x)) * sx

    def bo_ground(self, x) -> np.ndarray:
        """All spins aligned with the local field (coherent state)."""
        top = np.zeros(self.dim, dtype=complex)
        top[0] = 1.0
        return self.frame_rotation(x) @ top


def agp_spin(model, x) -> np.ndarray:
    """Gauge potential generating translations of the spin frame."""
    return model.agp(x)


def moving_hamiltonian(model, x, p, frame: str = "lab") -> np.ndarray:
    """Matrix symbol ``(p - A)^2 / 2M + V + H_int`` at one phase-space point.

    ``frame="lab"`` keeps the spin basis fixed in space. ``frame="moving"`` uses the
    basis co-rotating with the field, where the field points along z and the
    matrix is real for the spin models.
    """
    a = model.agp(x)
    kin = p * np.eye(model.dim) - a
    h = kin @ kin / (2 * model.M) + _interaction(model, x, frame)
    v = float(model.potential(x))
    if v:
        h = h + v * np.eye(model.dim)
    return 0.5 * (h + h.conj().T)


def _interaction(model, x, frame):
    if frame == "lab":
        return model.interaction(x)
    if frame == "moving":
        return model.interaction_moving(x)
    raise ValueError(f"unknown frame {frame!r}")


def _dinteraction(model, x, frame):
    if frame == "lab":
        return model.dinteraction(x)
    if frame == "moving":
        return model.dinteraction_moving(x)
    raise ValueError(f"unknown frame {frame!r}")


def hamiltonian_gradients(model, x, p, frame: str = "lab") -> tuple[np.ndarray, np.ndarray]:
    """Exact ``(dH/dx, dH/dp)`` of the moving Hamiltonian at ``(x, p)``."""
    a = model.agp(x)
    da = model.dagp(x)
    kin = p * np.eye(model.dim) - a
    dhdx = -(da @ kin + kin @ da) / (2 * model.M) + _dinteraction(model, x, frame)
    dv = float(model.potential.derivative(x))
    if dv:
        dhdx = dhdx + dv * np.eye(model.dim)
    dhdp = kin / model.M
    return dhdx, dhdp


class DegenerateTiltWarning(RuntimeWarning):
    """Tilt angle requested where the effective field vanishes."""


def tilt_angle(model, x, p):
    """Angle between the effective and the real field, ``atan2(theta' p, 2 M mu B)``."""
    a = HBAR * model.profile.dtheta(x) * p
    b = 2 * model.M * model.mu * model.profile.B(x)
    a, b = np.broadcast_arrays(np.asarray(a, float), np.asarray(b, float))
    if np.any((a == 0) & (b == 0)):
        warnings.warn("tilt angle undefined where B = 0 and p theta' = 0; using 0",
                      DegenerateTiltWarning, stacklevel=2)
    out = np.arctan2(a, b)
    return out if out.ndim else float(out)


def tilt_angle_gradient(model, x, p):
    """Analytic ``(d phi/dx, d phi/dp)`` of the tilt angle."""
    pr = model.profile
    a = HBAR * pr.dtheta(x) * p
    b = 2 * model.M * model.mu * pr.B(x)
    dax = HBAR * pr.d2theta(x) * p
    dap = HBAR * pr.dtheta(x) * np.ones_like(np.asarray(p, float))
    dbx = 2 * model.M * model.mu * pr.dB(x)
    r2 = a * a + b * b
    with np.errstate(invalid="ignore", divide="ignore"):
        return (b * dax - a * dbx) / r2, (b * dap) / r2


def b_eff(model, x, p):
    """Magnitude of the momentum-dependent effective field."""
    bb = model.profile.B(x)
    tp = model.profile.dtheta(x)
    return np.sqrt(bb**2 + (HBAR * p * tp / (2 * model.M * model.mu)) ** 2)


def branch_energies(model: SpinHalfModel, x, p):
    """Closed-form ``(H_minus, H_plus)`` of the spin-1/2 moving Hamiltonian."""
    tp = model.profile.dtheta(x)
    base = p**2 / (2 * model.M) + (HBAR * tp) ** 2 / (8 * model.M) + model.potential(x)
    gap = model.mu * b_eff(model, x, p)
    return base - gap, base + gap


def branch_gradients(model: SpinHalfModel, x, p, sign: int):
    """Closed-form ``(H, dH/dx, dH/dp)`` on branch ``sign`` (-1 ground, +1 excited)."""
    pr, M, mu = model.profile, model.M, model.mu
    tp, tpp = pr.dtheta(x), pr.d2theta(x)
    bb, dbb = pr.B(x), pr.dB(x)
    c = (HBAR / (2 * M * mu)) ** 2
    be = np.sqrt(bb**2 + c * (p * tp) ** 2)
    base = p**2 / (2 * M) + (HBAR * tp) ** 2 / (8 * M) + model.potential(x)
    with np.errstate(invalid="ignore", divide="ignore"):
        inv = np.where(be > 0, 1.0 / np.where(be > 0, be, 1.0), 0.0)
    dbe_dx = (bb * dbb + c * p * p * tp * tpp) * inv
    dbe_dp = c * p * tp * tp * inv
    h = base + sign * mu * be
    hx = HBAR**2 * tp * tpp / (4 * M) + model.potential.derivative(x) + sign * mu * dbe_dx
    hp = p / M + sign * mu * dbe_dp
    return h, hx, hp


def zeta(model) -> float:
    """Non-adiabaticity of an erf-profile model, ``theta0^2 / (pi M mu B d^2)``."""
    pr = model.profile
    if not isinstance(pr, ErfRotation):
        raise TypeError("zeta is defined for the erf rotation profile")
    return HBAR**2 * pr.theta0**2 / (np.pi * model.M * model.mu * pr.B0 * pr.d**2)


def v_eff(model) -> float:
    """Height of the dynamical barrier at the center of the rotation region."""
    z = zeta(model)
    mub = model.mu * model.profile.B0
    e_min = mub * (z / 2 - 1) if z < 1 else -mub / (2 * z)
    return e_min + mub


def kappa_spin(model, x):
    """Mass correction ``(hbar theta')^2 / (4 mu B)`` of the ground branch."""
    tp = model.profile.dtheta(x)
    with np.errstate(divide="ignore"):
        return (HBAR * tp) ** 2 / (4 * model.mu * model.profile.B(x))


def chi(model: CollectiveSpinModel, x):
    """Squeezing strength ``N (hbar theta')^2 / (4 M mu B)``."""
    tp = model.profile.dtheta(x)
    with np.errstate(divide="ignore"):
        return model.N * (HBAR * tp) ** 2 / (4 * model.M * model.mu * model.profile.B(x))


def superadiabatic_agps(model: SpinHalfModel, x, p) -> tuple[np.ndarray, np.ndarray]:
    """Second-order gauge potentials ``(B'_x, B'_p)`` in the moving eigenbasis.

    Both are proportional to ``sy`` with coefficients ``-hbar dphi/dx / 2`` and
    ``-hbar dphi/dp / 2``. Tabulated profiles fall back to finite differences.
    """
    a = HBAR * model.profile.dtheta(x) * p
    b = 2 * model.M * model.mu * model.profile.B(x)
    if a == 0 and b == 0:
        warnings.warn("superadiabatic potentials undefined at a degenerate point",
                      DegenerateTiltWarning, stacklevel=2)
        return np.zeros((2, 2), complex), np.zeros((2, 2), complex)
    if model.profile.analytic:
        dx, dp = tilt_angle_gradient(model, x, p)
    else:
        hx, hp = _fd_step(x), _fd_step(p)
        dx = (tilt_angle(model, x + hx, p) - tilt_angle(model, x - hx, p)) / (2 * hx)
        dp = (tilt_angle(model, x, p + hp) - tilt_angle(model, x, p - hp)) / (2 * hp)
    return -0.5 * HBAR * float(dx) * SY, -0.5 * HBAR * float(dp) * SY
