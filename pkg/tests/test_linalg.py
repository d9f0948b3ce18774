import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from mboa.linalg import NonHermitianError, Spectrum, check_hermitian, eigh, expectation, gauge_fix, normalize


def random_hermitian(n, seed):
    rng = np.random.default_rng(seed)
    a = rng.normal(size=(n, n)) + 1j * rng.normal(size=(n, n))
    return 0.5 * (a + a.conj().T)


def count_below(h, lam):
    # Sylvester inertia: negative pivots of an LDL^H factorization of h - lam I
    a = h - lam * np.eye(h.shape[0])
    n = a.shape[0]
    neg = 0
    for k in range(n):
        piv = a[k, k].real
        if piv == 0.0:
            piv = 1e-300
        neg += piv < 0
        if k + 1 < n:
            a[k + 1:, k + 1:] -= np.outer(a[k + 1:, k], a[k, k + 1:]) / piv
    return neg


def bisect_eigenvalues(h):
    n = h.shape[0]
    r = np.abs(h).sum(axis=1).max()
    out = []
    for j in range(n):
        lo, hi = -r - 1, r + 1
        for _ in range(200):
            mid = 0.5 * (lo + hi)
            if count_below(h, mid) > j:
                hi = mid
            else:
                lo = mid
        out.append(0.5 * (lo + hi))
    return np.array(out)


@pytest.mark.parametrize("n", [1, 2, 3, 5, 8])
def test_eigh_matches_inertia_bisection(n):
    h = random_hermitian(n, n)
    np.testing.assert_allclose(eigh(h).eigenvalues, bisect_eigenvalues(h), atol=1e-11)


@settings(max_examples=40, deadline=None)
@given(st.integers(1, 6), st.integers(0, 10_000))
def test_eigh_reconstructs_and_is_unitary(n, seed):
    h = random_hermitian(n, seed)
    s = eigh(h)
    np.testing.assert_allclose(s.reconstruct(), h, atol=1e-11)
    np.testing.assert_allclose(s.eigenvectors.conj().T @ s.eigenvectors, np.eye(n), atol=1e-11)
    assert np.all(np.diff(s.eigenvalues) >= 0)


def test_pauli_x():
    s = eigh(np.array([[0, 1], [1, 0]], dtype=complex))
    np.testing.assert_allclose(s.eigenvalues, [-1, 1], atol=1e-15)


def test_diagonal_input_is_untouched():
    s = eigh(np.diag([3.0, -1.0, 2.0]))
    np.testing.assert_allclose(s.eigenvalues, [-1, 2, 3])
    np.testing.assert_allclose(np.abs(s.eigenvectors), np.eye(3)[:, [1, 2, 0]])


def test_non_hermitian_rejected():
    with pytest.raises(NonHermitianError):
        check_hermitian(np.array([[0, 1], [0, 0]], dtype=complex))
    with pytest.raises(NonHermitianError):
        eigh(np.array([[1, 2j], [2j, 1]]))


def test_largest_component_real_positive():
    s = eigh(random_hermitian(4, 7))
    for k in range(4):
        v = s.eigenvectors[:, k]
        j = np.argmax(np.abs(v))
        assert abs(v[j].imag) < 1e-14 and v[j].real > 0


@settings(max_examples=30, deadline=None)
@given(st.integers(2, 5), st.integers(0, 10_000), st.floats(0, 2 * np.pi))
def test_gauge_fix_idempotent_and_removes_phases(n, seed, ph):
    s = eigh(random_hermitian(n, seed))
    once = gauge_fix(s)
    np.testing.assert_allclose(gauge_fix(once).eigenvectors, once.eigenvectors, atol=1e-14)
    rotated = Spectrum(s.eigenvalues, s.eigenvectors * np.exp(1j * ph), "raw")
    np.testing.assert_allclose(gauge_fix(rotated, s).eigenvectors, s.eigenvectors, atol=1e-12)


def test_degenerate_cluster_aligned_to_reference():
    h = np.diag([1.0, 1.0, 2.0]).astype(complex)
    ref = eigh(h)
    u = np.eye(3, dtype=complex)
    c, s = np.cos(0.3), np.sin(0.3)
    u[:2, :2] = [[c, 1j * s], [1j * s, c]]
    mixed = Spectrum(ref.eigenvalues, u @ ref.eigenvectors, "raw")
    assert mixed.degenerate_clusters() == [[0, 1], [2]]
    np.testing.assert_allclose(gauge_fix(mixed, ref).eigenvectors, ref.eigenvectors, atol=1e-12)


def test_normalize_and_expectation():
    v = normalize([3, 4j])
    np.testing.assert_allclose(np.linalg.norm(v), 1.0)
    assert expectation(v, np.diag([1.0, -1.0])) == pytest.approx((9 - 16) / 25)
    with pytest.raises(ValueError):
        normalize([0, 0])
