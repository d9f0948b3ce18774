"""Small dense Hermitian linear algebra.

Everything here works on plain ``numpy`` complex arrays of dimension ``D <= ~64``.
The eigensolver is a cyclic Jacobi sweep, which is deterministic for identical
input bits and accurate to machine precision at these sizes.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

__all__ = [
    "NonHermitianError",
    "Spectrum",
    "check_hermitian",
    "eigh",
    "gauge_fix",
    "expectation",
    "normalize",
    "DEGENERACY_RTOL",
]

HERMITIAN_ATOL = 1e-12
DEGENERACY_RTOL = 1e-10
JACOBI_TOL = 1e-13
JACOBI_MAX_SWEEPS = 100


class NonHermitianError(ValueError):
    """Raised when a matrix expected to be Hermitian is not."""


@dataclass(frozen=True)
class Spectrum:
    """Eigenvalues (ascending) and orthonormal eigenvector columns.

    Attributes
    ----------
    eigenvalues : ndarray, shape (D,)
    eigenvectors : ndarray, shape (D, D)
        Column ``k`` belongs to ``eigenvalues[k]``.
    gauge_tag : str
        Phase convention that was applied to the columns.
    """

    eigenvalues: np.ndarray
    eigenvectors: np.ndarray
    gauge_tag: str = "none"

    def __post_init__(self):
        self.eigenvalues.setflags(write=False)
        self.eigenvectors.setflags(write=False)

    @property
    def dim(self) -> int:
        return self.eigenvalues.shape[0]

    def reconstruct(self) -> np.ndarray:
        u = self.eigenvectors
        return (u * self.eigenvalues) @ u.conj().T

    def state(self, n: int) -> np.ndarray:
        return np.array(self.eigenvectors[:, n])

    def degenerate_clusters(self, rtol: float = DEGENERACY_RTOL) -> list[list[int]]:
        """Group indices whose eigenvalues agree within ``rtol*(1+|lambda|)``."""
        lam = self.eigenvalues
        clusters = [[0]]
        for k in range(1, lam.size):
            if abs(lam[k] - lam[k - 1]) <= rtol * (1.0 + abs(lam[k])):
                clusters[-1].append(k)
            else:
                clusters.append([k])
        return clusters


def check_hermitian(h, atol: float = HERMITIAN_ATOL) -> np.ndarray:
    """Return ``h`` as a complex square array, or raise if it is not Hermitian.

    The tolerance is absolute for entries of order one and scales with the
    largest entry otherwise.
    """
    a = np.asarray(h, dtype=complex)
    if a.ndim != 2 or a.shape[0] != a.shape[1] or a.shape[0] < 1:
        raise NonHermitianError(f"expected a non-empty square matrix, got shape {a.shape}")
    asym = float(np.max(np.abs(a - a.conj().T)))
    scale = max(1.0, float(np.max(np.abs(a))))
    if asym > atol * scale:
        raise NonHermitianError(f"matrix is not Hermitian: max |H - H^dagger| = {asym:.3e}")
    return a


def _jacobi(a: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    n = a.shape[0]
    a = 0.5 * (a + a.conj().T)
    v = np.eye(n, dtype=complex)
    if n == 1:
        return a.real.diagonal().copy(), v
    total = np.linalg.norm(a)
    if total == 0.0:
        return np.zeros(n), v
    iu = np.triu_indices(n, 1)
    for _ in range(JACOBI_MAX_SWEEPS):
        off = np.sqrt(2.0 * np.sum(np.abs(a[iu]) ** 2))
        if off <= JACOBI_TOL * total:
            break
        for p in range(n - 1):
            for q in range(p + 1, n):
                apq = a[p, q]
                mag = abs(apq)
                if mag <= 1e-300 or mag <= 1e-18 * total:
                    continue
                phase = apq / mag
                # the real-symmetric rotation acting on the phase-aligned pair
                tau = (a[q, q].real - a[p, p].real) / (2.0 * mag)
                t = (1.0 if tau >= 0 else -1.0) / (abs(tau) + np.sqrt(1.0 + tau * tau))
                c = 1.0 / np.sqrt(1.0 + t * t)
                s = t * c
                j = np.array([[c, s], [-s * phase.conjugate(), c * phase.conjugate()]])
                app, aqq = a[p, p].real - t * mag, a[q, q].real + t * mag
                cols = a[:, [p, q]] @ j
                a[:, p] = cols[:, 0]
                a[:, q] = cols[:, 1]
                rows = j.conj().T @ a[[p, q], :]
                a[p, :] = rows[0]
                a[q, :] = rows[1]
                a[p, q] = 0.0
                a[q, p] = 0.0
                # closed-form diagonal update: fewer roundings than the products above
                a[p, p] = app
                a[q, q] = aqq
                vc = v[:, [p, q]] @ j
                v[:, p] = vc[:, 0]
                v[:, q] = vc[:, 1]
    return a.real.diagonal().copy(), v


def eigh(h) -> Spectrum:
    """Eigendecomposition of a Hermitian matrix by cyclic Jacobi rotations.

    Returns eigenvalues in ascending order with orthonormal eigenvectors whose
    largest-magnitude component is real and positive.
    """
    a = check_hermitian(h)
    lam, v = _jacobi(a.copy())
    order = np.argsort(lam, kind="stable")
    spec = Spectrum(lam[order], v[:, order], "raw")
    return gauge_fix(spec)


def _phase_to_real_positive(z: complex) -> complex:
    mag = abs(z)
    return 1.0 if mag == 0.0 else (z / mag).conjugate()


def _polar_unitary(o: np.ndarray) -> np.ndarray:
    # unitary factor W of o = W P, maximizing Re tr(W^dagger o)
    u, _, vh = np.linalg.svd(o)
    return u @ vh


def gauge_fix(spec: Spectrum, reference: Spectrum | None = None) -> Spectrum:
    """Fix the phase (and, inside degenerate clusters, the basis) of eigenvectors.

    Without ``reference`` the largest-magnitude component of every column is made
    real positive. With ``reference`` every column is rotated by the phase that makes
    its overlap with the matching reference column real positive; inside a cluster of
    degenerate eigenvalues the basis is rotated to best match the reference columns
    (which also fixes the order of the columns within the cluster).
    """
    vecs = np.array(spec.eigenvectors, dtype=complex)
    clusters = spec.degenerate_clusters()
    degenerate = any(len(c) > 1 for c in clusters)
    if reference is None:
        for k in range(vecs.shape[1]):
            col = vecs[:, k]
            # earliest index among near-maximal entries keeps the choice stable
            mags = np.abs(col)
            i = int(np.flatnonzero(mags >= mags.max() * (1 - 1e-12))[0])
            vecs[:, k] = col * _phase_to_real_positive(col[i])
        tag = "largest component real positive"
    else:
        if reference.dim != spec.dim:
            raise ValueError(f"reference dimension {reference.dim} != {spec.dim}")
        ref = np.asarray(reference.eigenvectors)
        for cl in clusters:
            if len(cl) == 1:
                k = cl[0]
                vecs[:, k] = vecs[:, k] * _phase_to_real_positive(np.vdot(ref[:, k], vecs[:, k]))
            else:
                sub = vecs[:, cl]
                overlap = sub.conj().T @ ref[:, cl]
                vecs[:, cl] = sub @ _polar_unitary(overlap)
        tag = "continued from reference"
    if degenerate:
        tag += "; degenerate subspace, arbitrary basis"
    return Spectrum(np.array(spec.eigenvalues), vecs, tag)


def normalize(psi) -> np.ndarray:
    psi = np.asarray(psi, dtype=complex)
    nrm = np.linalg.norm(psi)
    if nrm == 0.0:
        raise ValueError("cannot normalize the zero vector")
    return psi / nrm


def expectation(state, op) -> float:
    """Real expectation value ``<psi|op|psi>`` of a Hermitian operator."""
    psi = np.asarray(state, dtype=complex)
    o = np.asarray(op, dtype=complex)
    if o.shape != (psi.size, psi.size):
        raise ValueError(f"operator shape {o.shape} does not match state dimension {psi.size}")
    val = np.vdot(psi, o @ psi)
    if abs(val.imag) > 1e-8 * max(1.0, abs(val.real)):
        raise NonHermitianError(f"expectation has imaginary part {val.imag:.3e}")
    return float(val.real)
