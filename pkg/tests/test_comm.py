import numpy as np
import pytest

from dfrc_hbf import comm
from dfrc_hbf.model import complex_normal


def _instance(rng, n_rx=3, n_tx=5, n_s=2, L=4):
    return complex_normal(rng, (n_rx, n_tx)), complex_normal(rng, (L, n_tx, n_s))


def test_rate_zero_precoder(rng):
    H, _ = _instance(rng)
    U = complex_normal(rng, (3, 2))
    assert comm.spectral_efficiency(H, np.zeros((5, 2)), U, 0.1) == 0.0
    assert comm.achievable_rate(H, np.zeros((5, 2)), 0.1) == 0.0


def test_rate_scalar_unit_snr():
    rate = comm.spectral_efficiency(np.array([[1.0]]), np.array([[np.sqrt(0.5)]]), np.array([[1.0]]), 0.5)
    assert abs(rate - 1.0) < 1e-12


def test_rate_singular_combiner(rng):
    H, X = _instance(rng)
    U = np.zeros((4, 3, 2), dtype=complex)
    U[:, :, 0] = 1.0
    with pytest.raises(comm.SingularCombinerError, match="U\\[0\\]"):
        comm.spectral_efficiency(H, X, U, 0.1)


def test_rate_invariant_to_combiner_recombination(rng):
    H, X = _instance(rng)
    U = complex_normal(rng, (4, 3, 2))
    T = complex_normal(rng, (4, 2, 2))
    a = comm.spectral_efficiency(H, X, U, 0.1)
    b = comm.spectral_efficiency(H, X, U @ T, 0.1)
    np.testing.assert_allclose(a, b, rtol=1e-10)


def test_mmse_combiner_attains_capacity(rng):
    H, X = _instance(rng)
    U = comm.update_combiner(H, X, 0.1)
    np.testing.assert_allclose(
        comm.spectral_efficiency(H, X, U, 0.1), comm.achievable_rate(H, X, 0.1), rtol=1e-10
    )


def test_mse_matrix_examples(rng):
    H, X = _instance(rng, L=1)
    np.testing.assert_allclose(comm.mse_matrix(H, X[0], np.zeros((3, 2)), 0.1), np.eye(2))
    n = 3
    Hs = complex_normal(rng, (n, n))
    Xs = complex_normal(rng, (n, n))
    U = np.linalg.inv(Hs @ Xs).conj().T  # U^H H X = I
    np.testing.assert_allclose(comm.mse_matrix(Hs, Xs, U, 0.0), np.zeros((n, n)), atol=1e-9)


def test_mse_psd_and_decreases_at_mmse(rng):
    H, X = _instance(rng)
    U0 = complex_normal(rng, (4, 3, 2))
    E0 = comm.mse_matrix(H, X, U0, 0.1)
    E1 = comm.mse_matrix(H, X, comm.update_combiner(H, X, 0.1), 0.1)
    for E in (E0, E1):
        assert np.linalg.eigvalsh(E).min() > -1e-12
    assert np.all(np.trace(E1, axis1=1, axis2=2).real <= np.trace(E0, axis1=1, axis2=2).real)


def test_combiner_examples():
    assert not np.any(comm.update_combiner(np.eye(2), np.zeros((2, 1)), 0.1))
    u = comm.update_combiner(np.array([[1.0]]), np.array([[1.0]]), 1.0)
    assert abs(u[0, 0] - 0.5) < 1e-15


def test_combiner_singular_without_noise():
    with pytest.raises(np.linalg.LinAlgError):
        comm.update_combiner(np.ones((2, 2)), np.ones((2, 1)), 0.0)


def test_combiner_minimizes_weighted_mse(rng):
    H, X = _instance(rng, L=1)
    X = X[0]
    W = complex_normal(rng, (2, 2))
    W = W @ W.conj().T + np.eye(2)
    U = comm.update_combiner(H, X, 0.1)
    best = np.trace(comm.mse_matrix(H, X, U, 0.1) @ W).real
    for _ in range(100):
        Up = U + 0.05 * complex_normal(rng, U.shape)
        assert best <= np.trace(comm.mse_matrix(H, X, Up, 0.1) @ W).real + 1e-12


def test_weight_examples():
    np.testing.assert_allclose(
        comm.update_weight(np.eye(2), np.zeros((2, 2)), np.zeros((2, 2))), np.eye(2)
    )
    w = comm.update_weight(np.array([[1.0]]), np.array([[1.0]]), np.array([[0.5]]))
    assert abs(w[0, 0] - 2.0) < 1e-12


def test_weight_singular_input():
    with pytest.raises(np.linalg.LinAlgError):
        comm.update_weight(np.array([[1.0]]), np.array([[1.0]]), np.array([[1.0]]))


def test_weight_logdet_equals_rate(rng):
    H, X = _instance(rng)
    U = comm.update_combiner(H, X, 0.1)
    W = comm.update_weight(H, X, U)
    logdet = np.linalg.slogdet(W)[1] / np.log(2)
    np.testing.assert_allclose(logdet, comm.spectral_efficiency(H, X, U, 0.1), rtol=1e-8)
    assert np.all(np.linalg.eigvalsh(W) > 0)


def test_mu_rate_examples():
    p = comm.MuMisoProblem(np.array([[1.0]]), noise_vars=np.array([1.0]))
    np.testing.assert_allclose(comm.mu_miso_rate(p, np.array([[1.0]])), [1.0])
    p2 = comm.MuMisoProblem(np.eye(2))
    np.testing.assert_array_equal(comm.mu_miso_rate(p2, np.zeros((2, 2))), [0.0, 0.0])
    h = np.array([[1.0, 0.5], [0.5, 1.0]])
    r = comm.mu_miso_rate(comm.MuMisoProblem(h), np.array([[1.0, 0.2], [0.2, 1.0]]))
    assert abs(r[0] - r[1]) < 1e-12


def test_mu_u_and_w_examples():
    p = comm.MuMisoProblem(np.array([[1.0]]), noise_vars=np.array([1.0]))
    assert comm.mu_miso_update_u(p, np.zeros((1, 1)))[0] == 0
    assert abs(comm.mu_miso_update_u(p, np.array([[1.0]]))[0] - 0.5) < 1e-15
    assert comm.mu_miso_update_w(p, np.zeros((1, 1)))[0] == 1.0
    assert abs(comm.mu_miso_update_w(p, np.array([[1.0]]))[0] - 2.0) < 1e-12


def test_mu_u_minimizes_mse(rng):
    h = complex_normal(rng, (3, 6))
    p = comm.MuMisoProblem(h)
    X = complex_normal(rng, (6, 3))
    u = comm.mu_miso_update_u(p, X)
    e = comm.mu_miso_mse(p, X, u)
    for _ in range(100):
        e_pert = comm.mu_miso_mse(p, X, u + 0.05 * complex_normal(rng, 3))
        assert np.all(e <= e_pert + 1e-12)


def test_mu_weight_identity(rng):
    h = complex_normal(rng, (3, 6))
    p = comm.MuMisoProblem(h, priorities=[1.0, 2.0, 0.5], noise_vars=[0.1, 0.2, 0.3])
    X = complex_normal(rng, (4, 6, 3))
    w = comm.mu_miso_update_w(p, X)
    np.testing.assert_allclose(np.log2(w), comm.mu_miso_rate(p, X), rtol=1e-8)
    assert np.all(w > 0)


def test_mu_problem_validation():
    with pytest.raises(ValueError):
        comm.MuMisoProblem(np.ones((2, 3)), priorities=[1.0, 0.0])
    with pytest.raises(ValueError):
        comm.MuMisoProblem(np.ones((2, 3)), noise_vars=[0.1])
