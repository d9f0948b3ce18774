"""Dressed Weyl symbols of ``x``, ``q`` and ``q^2`` under the field-following frame change.

Three independent evaluations are provided:

* ``closed_form``: ``x I``, ``p I - A``, ``(p I - A)^2`` with the analytic gauge potential;
* ``moyal``: products with the exact frame unitary and its exact derivative
  (Frechet derivative of the matrix exponential);
* ``dyson``: Gauss-Legendre quadrature of the lambda-ordered expansion in the
  frame generator, truncated where it terminates for these symbols.
"""
from __future__ import annotations

import numpy as np
from numpy.polynomial.legendre import leggauss
from scipy.linalg import expm, expm_frechet

from .engine import _philox
from .models import HBAR

__all__ = ["closed_form", "moyal", "dyson", "dressing_identities"]


def closed_form(model, x: float, p: float) -> dict:
    eye = np.eye(model.dim)
    q = p * eye - model.agp(x)
    return {"x": x * eye, "q": q, "q2": q @ q}


def moyal(model, x: float, p: float) -> dict:
    """Dressing with the unitary itself; ``A = i hbar (dU/dx) U^dagger``."""
    g, dg = model.frame_generator(x)
    u, du = expm_frechet(-1j * g / HBAR, -1j * dg / HBAR)
    eye = np.eye(model.dim)
    a = 1j * HBAR * du @ u.conj().T
    xm = u @ (x * eye) @ u.conj().T
    return {"x": xm, "q": p * eye - a}


def _rotated_dg(g, dg, lam):
    # exp(-i lam G) dG exp(i lam G) for each lam, shape (L, D, D)
    w, v = np.linalg.eigh(g)
    ph = np.exp(-1j * np.outer(lam, w) / HBAR)
    core = v.conj().T @ dg @ v
    mid = ph[:, :, None] * core[None] * ph.conj()[:, None, :]
    return v[None] @ mid @ v.conj().T[None]


def dyson(model, x: float, p: float, nodes: int = 24) -> dict:
    """Quadrature of the first two terms of the lambda expansion.

    For symbols at most quadratic in ``p`` and generators independent of ``p``
    all higher terms vanish, so the result is exact up to quadrature error.
    """
    g, dg = model.frame_generator(x)
    u, w = leggauss(nodes)
    lam, w = 0.5 * (u + 1), 0.5 * w
    f = _rotated_dg(g, dg, lam)
    first = np.einsum("l,lab->ab", w, f)
    pair = np.einsum("l,m,lab,mbc->ac", w, w, f, f)
    second = 0.5 * (pair + np.einsum("l,m,mab,lbc->ac", w, w, f, f))
    eye = np.eye(model.dim)
    return {
        "x": x * eye,
        "q": p * eye - first,
        "q2": p * p * eye - 2 * p * first + second,
    }


def dressing_identities(model, count: int = 1000, seed: int = 0, x_range=(-3.0, 3.0),
                        p_range=(-30.0, 30.0)) -> dict:
    """Largest residual of each identity over ``count`` random phase-space points.

    Keys: ``x`` (``x^M = x I``), ``q`` (``q^M = p I - A`` by the Dyson and Moyal
    routes against the closed form), ``q2`` (``(q^2)^M = (q^M)^2`` with the
    left side from the Dyson route).
    """
    res = {"x": 0.0, "q_dyson": 0.0, "q_moyal": 0.0, "q2": 0.0}
    for i in range(count):
        r = _philox(seed, i).uniform(size=2)
        x = x_range[0] + (x_range[1] - x_range[0]) * r[0]
        p = p_range[0] + (p_range[1] - p_range[0]) * r[1]
        cf, mo, dy = closed_form(model, x, p), moyal(model, x, p), dyson(model, x, p)
        scale = max(1.0, abs(x), abs(p) + float(np.abs(model.agp(x)).max()))
        res["x"] = max(res["x"], float(np.abs(mo["x"] - cf["x"]).max()) / scale)
        res["q_dyson"] = max(res["q_dyson"], float(np.abs(dy["q"] - cf["q"]).max()) / scale)
        res["q_moyal"] = max(res["q_moyal"], float(np.abs(mo["q"] - cf["q"]).max()) / scale)
        res["q2"] = max(res["q2"], float(np.abs(dy["q2"] - mo["q"] @ mo["q"]).max()) / scale**2)
    return res
