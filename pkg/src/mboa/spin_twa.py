"""Truncated Wigner dynamics with a classical spin vector.

A spin-1/2 particle is replaced by a classical vector ``S`` with
``|S| = sqrt(3)/2`` coupled to a classical coordinate. Three Hamiltonians are
available:

``lab``
    ``q^2/2M + V - 2 mu B(x) . S``
``moving_large_S``
    the exact classical canonical transform of ``lab`` into the co-rotating
    frame, ``(p + theta' S'_x)^2/2M + V - 2 mu B S'_z``
``moving_spin_half``
    the classical image of the quantum moving-frame Hamiltonian, which is
    linear in the spin, ``p^2/2M + theta'^2/8M + V - 2 mu B S'_z + theta' S'_x p/M``

Quantum noise of the spin enters through the four discrete initial vectors
``(+-1/2, +-1/2, 1/2)`` in the field-aligned frame.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .engine import EnsembleResult, default_dt, sample_wavepacket
from .models import HBAR

__all__ = ["FRAMES", "SPIN_SEEDS", "SpinTrajectory", "classical_hamiltonian",
           "twa_spin_trajectory", "twa_spin_classical"]

FRAMES = ("lab", "moving_large_S", "moving_spin_half")

SPIN_SEEDS = np.array([[0.5, 0.5, 0.5], [0.5, -0.5, 0.5], [-0.5, 0.5, 0.5], [-0.5, -0.5, 0.5]])


@dataclass(frozen=True)
class SpinTrajectory:
    """Single classical-spin trajectory.

    ``k`` is the lab momentum ``q`` in the lab frame and the canonical ``p`` in
    the moving frames; ``q`` is always the mechanical momentum.
    """

    frame: str
    times: np.ndarray
    x: np.ndarray
    k: np.ndarray
    q: np.ndarray
    spin: np.ndarray


def _check_frame(frame):
    if frame not in FRAMES:
        raise ValueError(f"unknown frame {frame!r}; expected one of {FRAMES}")


def classical_hamiltonian(model, frame: str, x, k, s):
    """Value of the classical Hamiltonian; ``s`` has shape ``(..., 3)``."""
    _check_frame(frame)
    pr, M, mu = model.profile, model.M, model.mu
    v = model.potential(x)
    b = pr.B(x)
    sx, sy, sz = s[..., 0], s[..., 1], s[..., 2]
    if frame == "lab":
        th = pr.theta(x)
        return k**2 / (2 * M) + v - 2 * mu * b * (np.cos(th) * sz + np.sin(th) * sy)
    dth = pr.dtheta(x)
    if frame == "moving_large_S":
        return (k + HBAR * dth * sx) ** 2 / (2 * M) + v - 2 * mu * b * sz
    return (k**2 / (2 * M) + (HBAR * dth) ** 2 / (8 * M) + v - 2 * mu * b * sz
            + HBAR * dth * sx * k / M)


def _rates(model, frame, x, k, s):
    pr, M, mu = model.profile, model.M, model.mu
    b, db, dv = pr.B(x), pr.dB(x), model.potential.derivative(x)
    sx, sy, sz = s[..., 0], s[..., 1], s[..., 2]
    grad = np.zeros_like(s)
    if frame == "lab":
        th, dth = pr.theta(x), pr.dtheta(x)
        c, sn = np.cos(th), np.sin(th)
        along = c * sz + sn * sy
        dx = k / M
        dk = -dv + 2 * mu * (db * along + b * dth * (c * sy - sn * sz))
        grad[..., 1] = -2 * mu * b * sn
        grad[..., 2] = -2 * mu * b * c
    else:
        dth, d2th = pr.dtheta(x), pr.d2theta(x)
        if frame == "moving_large_S":
            q = k + HBAR * dth * sx
            dx = q / M
            dk = -(q * HBAR * d2th * sx / M + dv - 2 * mu * db * sz)
            grad[..., 0] = q * HBAR * dth / M
        else:
            dx = k / M + HBAR * dth * sx / M
            dk = -(HBAR**2 * dth * d2th / (4 * M) + dv - 2 * mu * db * sz
                   + HBAR * d2th * sx * k / M)
            grad[..., 0] = HBAR * dth * k / M
        grad[..., 2] = -2 * mu * b
    ds = -np.cross(s, grad) / HBAR
    return dx, dk, ds


def _mechanical(model, frame, x, k, s):
    if frame == "lab":
        return k
    return k + HBAR * model.profile.dtheta(x) * s[..., 0]


def _initial_state(model, frame, x, q, s_aligned):
    """Lab momentum ``q`` and field-frame spin to the frame's canonical variables."""
    if frame != "lab":
        return q - HBAR * model.profile.dtheta(x) * s_aligned[..., 0], s_aligned
    th = model.profile.theta(x)
    c, sn = np.cos(th), np.sin(th)
    s = np.empty_like(s_aligned)
    s[..., 0] = s_aligned[..., 0]
    s[..., 1] = sn * s_aligned[..., 2] + c * s_aligned[..., 1]
    s[..., 2] = c * s_aligned[..., 2] - sn * s_aligned[..., 1]
    return q, s


def _run(model, frame, x, k, s, dt, steps, record_every):
    norm0 = np.linalg.norm(s, axis=-1)
    rec_x, rec_k, rec_q, rec_s = [x.copy()], [k.copy()], [_mechanical(model, frame, x, k, s)], [s.copy()]
    for i in range(1, steps + 1):
        a = _rates(model, frame, x, k, s)
        b = _rates(model, frame, x + 0.5 * dt * a[0], k + 0.5 * dt * a[1], s + 0.5 * dt * a[2])
        c = _rates(model, frame, x + 0.5 * dt * b[0], k + 0.5 * dt * b[1], s + 0.5 * dt * b[2])
        d = _rates(model, frame, x + dt * c[0], k + dt * c[1], s + dt * c[2])
        x = x + dt / 6 * (a[0] + 2 * b[0] + 2 * c[0] + d[0])
        k = k + dt / 6 * (a[1] + 2 * b[1] + 2 * c[1] + d[1])
        s = s + dt / 6 * (a[2] + 2 * b[2] + 2 * c[2] + d[2])
        # the flow preserves |S| exactly; RK4 only to O(dt^5), so project back
        s = s * (norm0 / np.linalg.norm(s, axis=-1))[..., None]
        if i % record_every == 0:
            rec_x.append(x.copy())
            rec_k.append(k.copy())
            rec_q.append(_mechanical(model, frame, x, k, s))
            rec_s.append(s.copy())
    times = dt * record_every * np.arange(len(rec_x))
    return times, np.array(rec_x), np.array(rec_k), np.array(rec_q), np.array(rec_s)


def twa_spin_trajectory(model, frame: str, x0: float, q0: float, spin0=SPIN_SEEDS[0],
                        dt: float | None = None, T: float = 1.0, record_every: int = 1) -> SpinTrajectory:
    """One classical trajectory from lab momentum ``q0`` and a field-frame spin."""
    _check_frame(frame)
    dt = default_dt(model, q0) if dt is None else dt
    x = np.array([float(x0)])
    k, s = _initial_state(model, frame, x, np.array([float(q0)]), np.asarray(spin0, float)[None, :])
    times, xs, ks, qs, ss = _run(model, frame, x, k, s, dt, int(round(T / dt)), record_every)
    return SpinTrajectory(frame, times, xs[:, 0], ks[:, 0], qs[:, 0], ss[:, 0])


def twa_spin_classical(model, frame: str, x0: float, p0: float, sigma_x: float,
                       count: int = 500, seed: int = 0, dt: float | None = None, T: float = 1.0,
                       record_every: int = 1) -> EnsembleResult:
    """Ensemble mean of the mechanical momentum ``q(t)``.

    Each packet sample is combined with all four discrete spin vectors at equal
    weight. Standard errors are taken over packet samples.
    """
    _check_frame(frame)
    dt = default_dt(model, p0) if dt is None else dt
    xs, qs, _ = sample_wavepacket(x0, p0, sigma_x, count, seed)
    n_s = SPIN_SEEDS.shape[0]
    x = np.repeat(xs, n_s)
    q = np.repeat(qs, n_s)
    s_al = np.tile(SPIN_SEEDS, (count, 1))
    k, s = _initial_state(model, frame, x, q, s_al)
    times, _, _, qrec, _ = _run(model, frame, x, k, s, dt, int(round(T / dt)), record_every)
    per_sample = qrec.reshape(len(times), count, n_s).mean(axis=2)
    mean = per_sample.mean(axis=1)
    err = per_sample.std(axis=1, ddof=1) / np.sqrt(count) if count > 1 else np.zeros_like(mean)
    return EnsembleResult(f"q[{frame}]", times, mean, err, count, seed, ())
