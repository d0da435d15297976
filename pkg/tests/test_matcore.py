import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from dmrnn.matcore import (
    DimensionError,
    NotHermitianError,
    herm_eig,
    inv_sqrt_psd,
    kron,
    partial_trace,
    swap_subsystems,
    unvec,
    vec,
)
from dmrnn.rand import complex_normal, random_density

X = np.array([[0, 1], [1, 0]], dtype=complex)


def kron_loop(a, b):
    out = np.zeros((a.shape[0] * b.shape[0], a.shape[1] * b.shape[1]), dtype=complex)
    for i in range(a.shape[0]):
        for j in range(a.shape[1]):
            for k in range(b.shape[0]):
                for l in range(b.shape[1]):
                    out[i * b.shape[0] + k, j * b.shape[1] + l] = a[i, j] * b[k, l]
    return out


def test_kron_examples():
    assert np.array_equal(kron(np.eye(2), np.eye(2)), np.eye(4))
    assert np.array_equal(kron(np.diag([1, 0]), np.diag([0, 1])), np.diag([0, 1, 0, 0]))
    assert np.array_equal(kron(X, X), np.fliplr(np.eye(4)))
    assert np.array_equal(kron(X, X), kron_loop(X, X))


def test_kron_matches_loop_on_rectangular(rng):
    a, b = complex_normal(rng, (2, 3)), complex_normal(rng, (3, 2))
    np.testing.assert_allclose(kron(a, b), kron_loop(a, b), atol=1e-14)


def test_kron_associative(rng):
    for _ in range(20):
        a, b, c = (complex_normal(rng, (2, 2)) for _ in range(3))
        assert np.abs(kron(kron(a, b), c) - kron(a, kron(b, c))).max() <= 1e-12


def test_kron_dimension_cap():
    with pytest.raises(DimensionError):
        kron(np.eye(65), np.eye(64))


def test_vec_examples():
    assert np.array_equal(vec(np.eye(2)).ravel(), [1, 0, 0, 1])
    a, b, c, d = 1, 2j, 3, 4 - 1j
    assert np.array_equal(vec([[a, b], [c, d]]).ravel(), [a, c, b, d])
    assert vec(np.eye(3)).shape == (9, 1)
    with pytest.raises(DimensionError):
        vec(np.zeros((2, 3)))


def test_unvec_examples():
    assert np.array_equal(unvec([1, 0, 0, 1]), np.eye(2))
    for k in range(4):
        e = unvec(np.eye(4)[:, k])
        expected = np.zeros((2, 2))
        expected[k % 2, k // 2] = 1
        assert np.array_equal(e, expected)
    with pytest.raises(DimensionError):
        unvec(np.ones(5))


def test_vec_identity_with_kron(rng):
    # vec(A X B^dagger) = (conj(B) (x) A) vec(X) under column stacking
    a, x, b = (complex_normal(rng, (3, 3)) for _ in range(3))
    lhs = vec(a @ x @ b.conj().T)
    rhs = kron(b.conj(), a) @ vec(x)
    np.testing.assert_allclose(lhs, rhs, atol=1e-12)


@settings(max_examples=50, deadline=None)
@given(st.integers(1, 8), st.integers(0, 2**32 - 1))
def test_vec_unvec_round_trip_exact(d, seed):
    r = np.random.default_rng(seed)
    m = complex_normal(r, (d, d))
    assert np.array_equal(unvec(vec(m)), m)
    v = complex_normal(r, (d * d,))
    assert np.array_equal(vec(unvec(v)).ravel(), v)


def test_herm_eig_two_level_states():
    e = herm_eig(np.diag([0.5, 0.5]))
    np.testing.assert_allclose(e.eigenvalues, [0.5, 0.5], atol=1e-15)
    e = herm_eig(np.array([[0.5, 0.5], [0.5, 0.5]]))
    np.testing.assert_allclose(e.eigenvalues, [1.0, 0.0], atol=1e-15)
    e = herm_eig(np.eye(5))
    np.testing.assert_allclose(e.eigenvalues, np.ones(5))
    np.testing.assert_allclose(e.unitary @ e.unitary.conj().T, np.eye(5), atol=1e-12)


@pytest.mark.parametrize("d", [1, 2, 5, 9, 16])
def test_herm_eig_reconstruction(rng, d):
    for _ in range(10):
        g = complex_normal(rng, (d, d))
        h = g + g.conj().T
        e = herm_eig(h)
        assert np.all(np.diff(e.eigenvalues) <= 0)
        assert np.linalg.norm(e.unitary @ e.unitary.conj().T - np.eye(d)) <= 1e-10
        assert np.linalg.norm(e.reconstruct() - h) <= 1e-10 * max(1.0, np.linalg.norm(h))


def test_herm_eig_deterministic(rng):
    g = complex_normal(rng, (6, 6))
    h = g + g.conj().T
    a, b = herm_eig(h), herm_eig(h)
    assert np.array_equal(a.eigenvalues, b.eigenvalues)
    assert np.array_equal(a.unitary, b.unitary)


def test_herm_eig_rejects_non_hermitian():
    with pytest.raises(NotHermitianError):
        herm_eig(np.array([[0, 1], [0, 0]]))


def test_inv_sqrt_psd_examples():
    np.testing.assert_allclose(inv_sqrt_psd(np.eye(2), 0), np.eye(2), atol=1e-15)
    np.testing.assert_allclose(inv_sqrt_psd(4 * np.eye(2), 0), 0.5 * np.eye(2), atol=1e-15)
    expected = np.diag([(2 + 1e-6) ** -0.5, (0 + 1e-6) ** -0.5])
    np.testing.assert_allclose(inv_sqrt_psd(np.diag([2.0, 0.0]), 1e-6), expected, rtol=1e-12)
    assert abs(expected[1, 1] - 1000) < 1e-9


def test_inv_sqrt_psd_rejects_indefinite():
    with pytest.raises(ValueError):
        inv_sqrt_psd(np.diag([1.0, -1e-3]), 1e-6)


def test_inv_sqrt_psd_whitens(rng):
    for d in (2, 3, 5):
        g = complex_normal(rng, (d, d))
        h = g @ g.conj().T + 0.1 * np.eye(d)
        x = inv_sqrt_psd(h, 0)
        assert np.linalg.norm(x @ h @ x - np.eye(d)) <= 1e-8
        np.testing.assert_allclose(x, x.conj().T, atol=1e-12)


def partial_trace_oracle(rho, d_a, d_b, keep):
    # explicit sum over basis kets of the discarded factor
    if keep == "A":
        out = np.zeros((d_a, d_a), dtype=complex)
        for j in range(d_b):
            ket = np.kron(np.eye(d_a), np.eye(d_b)[:, [j]])
            out += ket.T @ rho @ ket
    else:
        out = np.zeros((d_b, d_b), dtype=complex)
        for i in range(d_a):
            ket = np.kron(np.eye(d_a)[:, [i]], np.eye(d_b))
            out += ket.T @ rho @ ket
    return out


def test_partial_trace_bell():
    psi = np.array([1, 0, 0, 1]) / np.sqrt(2)
    bell = np.outer(psi, psi)
    for keep in "AB":
        assert np.abs(partial_trace(bell, 2, 2, keep) - np.eye(2) / 2).max() <= 1e-10


def test_partial_trace_matches_oracle(rng):
    rho = random_density(6, rng).mat
    for keep in "AB":
        got = partial_trace(rho, 2, 3, keep)
        np.testing.assert_allclose(got, partial_trace_oracle(rho, 2, 3, keep), atol=1e-14)
    rb = partial_trace(rho, 2, 3, "B")
    assert rb.shape == (3, 3)
    assert abs(np.trace(rb) - 1) < 1e-12
    np.testing.assert_allclose(rb, rb.conj().T, atol=1e-14)


def test_partial_trace_product_and_linearity(rng):
    a, b = complex_normal(rng, (2, 2)), complex_normal(rng, (3, 3))
    ab = kron(a, b)
    assert np.abs(partial_trace(ab, 2, 3, "B") - np.trace(a) * b).max() <= 1e-12
    assert np.abs(partial_trace(ab, 2, 3, "A") - np.trace(b) * a).max() <= 1e-12
    m1, m2 = complex_normal(rng, (6, 6)), complex_normal(rng, (6, 6))
    lhs = partial_trace(2 * m1 - 3j * m2, 2, 3, "A")
    rhs = 2 * partial_trace(m1, 2, 3, "A") - 3j * partial_trace(m2, 2, 3, "A")
    np.testing.assert_allclose(lhs, rhs, atol=1e-12)
    assert abs(np.trace(partial_trace(m1, 2, 3, "B")) - np.trace(m1)) < 1e-12


def test_partial_trace_dimension_mismatch():
    with pytest.raises(DimensionError):
        partial_trace(np.eye(5), 2, 2, "A")


def test_swap_subsystems(rng):
    a, b = complex_normal(rng, (2, 2)), complex_normal(rng, (3, 3))
    np.testing.assert_allclose(swap_subsystems(kron(a, b), 2, 3), kron(b, a), atol=1e-14)
