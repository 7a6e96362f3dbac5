"""Matrix-calculus identities the surrogate machinery depends on."""

import numpy as np
import pytest

from risdfrc import linalg as la


def cgauss(rng, *shape):
    return rng.standard_normal(shape) + 1j * rng.standard_normal(shape)


def rand_hermitian(rng, n):
    a = cgauss(rng, n, n)
    return 0.5 * (a + a.conj().T)


def char_poly_max_eig(a):
    """Largest eigenvalue via Faddeev-LeVerrier coefficients and root finding."""
    n = a.shape[0]
    coeffs = np.zeros(n + 1, dtype=complex)
    coeffs[0] = 1.0
    m = np.eye(n, dtype=complex)
    for k in range(1, n + 1):
        m = a @ m
        coeffs[k] = -np.trace(m) / k
        m += coeffs[k] * np.eye(n)
    roots = np.roots(coeffs)
    return float(np.max(roots.real))


def test_vec_identity_and_column_order():
    assert np.array_equal(la.vec(np.eye(2)), [1, 0, 0, 1])
    m = np.array([[1, 3], [2, 4]], dtype=complex)  # columns (1,2) and (3,4)
    assert np.array_equal(la.vec(m), [1, 2, 3, 4])


def test_vec_unvec_round_trip():
    rng = np.random.default_rng(7)
    m = cgauss(rng, 3, 3)
    assert np.array_equal(la.unvec(la.vec(m), 3), m)


def test_round_trip_exact_up_to_16():
    rng = np.random.default_rng(11)
    for n in range(1, 17):
        m = cgauss(rng, n, n)
        assert np.array_equal(la.unvec(la.vec(m), n), m)
        p = la.vec(m)
        assert np.array_equal(la.vec(la.unvec(p, n)), p)


def test_unvec_of_identity_and_trace_contract():
    assert np.array_equal(la.unvec(la.vec(np.eye(4)), 4), np.eye(4))
    rng = np.random.default_rng(3)
    p = cgauss(rng, 16)
    v = cgauss(rng, 4, 4)
    lhs = np.trace(la.unvec(p, 4).conj().T @ v)
    rhs = p.conj() @ la.vec(v)
    assert abs(lhs - rhs) <= 1e-12 * (1 + abs(rhs))


def test_unvec_rejects_bad_length():
    with pytest.raises(la.DimensionError):
        la.unvec(np.zeros(5), 2)


def test_kron_identity_cases():
    rng = np.random.default_rng(5)
    b = cgauss(rng, 3, 2)
    assert np.array_equal(la.kron(np.eye(1), b), b)
    out = la.kron(np.diag([1.0, 2.0]), np.eye(2))
    assert np.array_equal(out, np.diag([1.0, 1.0, 2.0, 2.0]))

    # identity on the left replicates blocks; on the right expands entries
    left = la.kron(np.eye(2), b)
    assert np.array_equal(left[:3, :2], b)
    assert np.array_equal(left[3:, 2:], b)
    assert np.all(left[:3, 2:] == 0) and np.all(left[3:, :2] == 0)
    right = la.kron(b, np.eye(2))
    for i in range(3):
        for j in range(2):
            assert np.array_equal(right[2*i:2*i+2, 2*j:2*j+2],
                                  b[i, j] * np.eye(2))


def test_kron_vec_of_product_identity():
    rng = np.random.default_rng(13)
    for _ in range(20):
        a = cgauss(rng, 3, 4)
        b = cgauss(rng, 4, 2)
        c = cgauss(rng, 2, 5)
        lhs = la.vec(a @ b @ c)
        rhs = la.kron(c.T, a) @ la.vec(b)
        assert np.linalg.norm(lhs - rhs) <= 1e-12 * np.linalg.norm(lhs)


def test_trace_vec_inner_product_identity():
    rng = np.random.default_rng(17)
    for _ in range(20):
        a = cgauss(rng, 4, 3)
        b = cgauss(rng, 4, 3)
        lhs = np.trace(a.conj().T @ b)
        rhs = la.vec(a).conj() @ la.vec(b)
        assert abs(lhs - rhs) <= 1e-12 * (1 + abs(lhs))


def test_trace_four_factor_identity():
    rng = np.random.default_rng(19)
    for _ in range(20):
        a = cgauss(rng, 3, 4)
        b = cgauss(rng, 4, 5)
        c = cgauss(rng, 5, 2)
        d = cgauss(rng, 2, 3)
        lhs = np.trace(a @ b @ c @ d)
        rhs = la.vec(d.T) @ la.kron(c.T, a) @ la.vec(b)
        assert abs(lhs - rhs) <= 1e-12 * (1 + abs(lhs))


def test_herm_eig_max_diagonal_and_rank1():
    val, vec_ = la.herm_eig_max(np.diag([1.0, 3.0, 2.0]).astype(complex))
    assert val == pytest.approx(3.0, abs=1e-12)
    assert np.abs(vec_[1]) == pytest.approx(1.0, abs=1e-12)

    rng = np.random.default_rng(23)
    u = cgauss(rng, 5)
    u *= 2.0 / np.linalg.norm(u)
    val, vec_ = la.herm_eig_max(np.outer(u, u.conj()))
    assert val == pytest.approx(4.0, rel=1e-12)
    phase = vec_ @ u.conj() / abs(vec_ @ u.conj())
    assert np.linalg.norm(vec_ - phase * u / 2.0) <= 1e-10


def test_herm_eig_max_matches_char_poly():
    rng = np.random.default_rng(29)
    for _ in range(10):
        m = rand_hermitian(rng, 8)
        val, vec_ = la.herm_eig_max(m)
        ref = char_poly_max_eig(m)
        assert abs(val - ref) <= 1e-9 * (1 + abs(ref))
        assert np.linalg.norm(m @ vec_ - val * vec_) <= 1e-9 * (1 + abs(val))


def test_herm_eig_max_rejects_non_hermitian():
    with pytest.raises(la.HermitianError):
        la.herm_eig_max(np.array([[0.0, 1.0], [0.0, 0.0]]))


def test_psd_cholesky_identity_and_rank1():
    out = la.psd_cholesky(np.eye(3, dtype=complex))
    assert np.linalg.norm(out @ out.conj().T - np.eye(3)) <= 1e-12

    rng = np.random.default_rng(31)
    u = cgauss(rng, 4)
    m = np.outer(u, u.conj())
    ell = la.psd_cholesky(m)
    col_norms = np.linalg.norm(ell, axis=0)
    assert np.sum(col_norms > 1e-10) == 1
    assert np.linalg.norm(ell @ ell.conj().T - m) <= 1e-8 * (1 + np.linalg.norm(m))


def test_psd_cholesky_reconstructs_random_psd():
    rng = np.random.default_rng(37)
    for _ in range(10):
        a = cgauss(rng, 6, 4)
        m = a @ a.conj().T
        ell = la.psd_cholesky(m)
        err = np.linalg.norm(ell @ ell.conj().T - m)
        assert err <= 1e-8 * (1 + np.linalg.norm(m))


def test_psd_cholesky_rejects_indefinite():
    with pytest.raises(la.NotPsdError):
        la.psd_cholesky(np.diag([1.0, -0.5]).astype(complex))


def test_psd_cholesky_clips_solver_noise():
    rng = np.random.default_rng(41)
    a = cgauss(rng, 4, 4)
    m = a @ a.conj().T
    noisy = m - 0.5e-9 * np.linalg.norm(m) * np.eye(4)
    ell = la.psd_cholesky(noisy)
    assert np.linalg.norm(ell @ ell.conj().T - noisy) <= 1e-8 * (1 + np.linalg.norm(m))
