import numpy as np
import pytest

from covest.errors import NotPositiveDefinite
from covest.linalg import chol_logdet, chol_solve, is_symmetric, spd_cholesky, spd_inverse, sym


def test_cholesky_identity():
    L = spd_cholesky(np.eye(3))
    assert np.array_equal(L, np.eye(3))


def test_cholesky_known_factor():
    a = np.array([[4.0, 2.0], [2.0, 3.0]])
    L = spd_cholesky(a)
    expected = np.array([[2.0, 0.0], [1.0, np.sqrt(2.0)]])
    assert np.allclose(L, expected, rtol=0, atol=1e-14)
    # reconstruction to relative Frobenius error below 1e-12
    err = np.linalg.norm(L @ L.T - a) / np.linalg.norm(a)
    assert err < 1e-12


def test_cholesky_rejects_indefinite():
    with pytest.raises(NotPositiveDefinite):
        spd_cholesky(np.array([[1.0, 2.0], [2.0, 1.0]]))  # eigenvalues 3 and -1


def test_cholesky_rejects_asymmetric():
    a = np.array([[2.0, 0.5], [0.3, 2.0]])
    with pytest.raises(NotPositiveDefinite):
        spd_cholesky(a)


def test_roundtrip_random_spd():
    rng = np.random.default_rng(0)
    for _ in range(50):
        p = rng.integers(1, 8)
        g = rng.standard_normal((p, p))
        a = g.T @ g + np.eye(p)
        L = spd_cholesky(a)
        assert np.linalg.norm(L @ L.T - a) / np.linalg.norm(a) < 1e-12


def test_jitter_rescues_borderline_matrix():
    # symmetric with one eigenvalue at -1e-14 of the trace scale
    q, _ = np.linalg.qr(np.random.default_rng(1).standard_normal((4, 4)))
    a = sym(q @ np.diag([1.0, 0.5, 0.2, -1e-15]) @ q.T)
    L = spd_cholesky(a)
    assert np.all(np.isfinite(L))


def test_jitter_does_not_rescue_indefinite():
    with pytest.raises(NotPositiveDefinite):
        spd_cholesky(np.diag([1.0, -0.5]))


def test_chol_solve_and_logdet():
    rng = np.random.default_rng(2)
    g = rng.standard_normal((5, 5))
    a = g.T @ g + np.eye(5)
    L = spd_cholesky(a)
    b = rng.standard_normal((5, 3))
    assert np.allclose(a @ chol_solve(L, b), b, atol=1e-10)
    assert np.isclose(chol_logdet(L), np.linalg.slogdet(a)[1])
    assert np.allclose(a @ spd_inverse(a), np.eye(5), atol=1e-10)


def test_is_symmetric_tolerance():
    a = np.eye(2)
    a[0, 1] = 5e-11  # inside the 1e-10 tolerance
    assert is_symmetric(a)
    a[0, 1] = 1e-9
    assert not is_symmetric(a)
