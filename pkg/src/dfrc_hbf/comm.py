"""Communication metrics and WMMSE block updates (single-user MIMO and MU-MISO).

Stacks are numpy arrays with the subpulse index first: precoders ``X`` are
(L, n_tx, n_s), combiners ``U`` are (L, n_rx, n_s), weights ``W`` are
(L, n_s, n_s). Single matrices (2-D inputs) are accepted and treated as L = 1.
Rates are reported in bits/s/Hz.
"""

import logging
from dataclasses import dataclass

import numpy as np

from ._validation import check_complex_array, hermitian_part

logger = logging.getLogger(__name__)

WEIGHT_COND_LIMIT = 1e12


class SingularCombinerError(ValueError):
    """Raised when a combiner leaves the noise covariance C_l = s2 U^H U singular."""


def _herm(a):
    return np.conj(np.swapaxes(a, -1, -2))


def _stack(a, name):
    arr = check_complex_array(a, name)
    if arr.ndim == 2:
        return arr[None], True
    if arr.ndim != 3:
        raise ValueError(f"{name} must be 2-D or 3-D, got shape {arr.shape}")
    return arr, False


def _unstack(a, single):
    return a[0] if single else a


def spectral_efficiency(H, X, U, sigma_c2):
    """Per-subpulse rate log2|I + U C^-1 U^H H X X^H H^H| with C = s2 U^H U.

    Returns an array of per-subpulse rates (a scalar for 2-D inputs).
    """
    X, single = _stack(X, "X")
    U, _ = _stack(U, "U")
    HX = H @ X
    C = sigma_c2 * (_herm(U) @ U)
    for l, c in enumerate(C):
        if np.linalg.cond(c) > 1e13:
            raise SingularCombinerError(f"combiner U[{l}] is rank deficient")
    # Sylvester: |I + U C^-1 U^H A| = |I + C^-1 U^H A U|
    UHX = _herm(U) @ HX
    inner = np.linalg.solve(C, UHX @ _herm(UHX))
    n_s = C.shape[-1]
    _, logdet = np.linalg.slogdet(np.eye(n_s) + inner)
    rates = np.maximum(logdet.real / np.log(2.0), 0.0)
    return rates[0] if single else rates


def achievable_rate(H, X, sigma_c2):
    """Rate with the optimal (MMSE) receiver, log2|I + H X X^H H^H / s2|."""
    X, single = _stack(X, "X")
    HX = H @ X
    G = _herm(HX) @ HX / sigma_c2
    _, logdet = np.linalg.slogdet(np.eye(G.shape[-1]) + G)
    rates = logdet.real / np.log(2.0)
    return rates[0] if single else rates


def mse_matrix(H, X, U, sigma_c2):
    """E = (I - U^H H X)(I - U^H H X)^H + s2 U^H U."""
    X, single = _stack(X, "X")
    U, _ = _stack(U, "U")
    n_s = X.shape[-1]
    D = np.eye(n_s) - _herm(U) @ H @ X
    E = D @ _herm(D) + sigma_c2 * (_herm(U) @ U)
    return _unstack(hermitian_part(E), single)


def update_combiner(H, X, sigma_c2):
    """MMSE combiner (H X X^H H^H + s2 I)^-1 H X."""
    X, single = _stack(X, "X")
    HX = H @ X
    A = HX @ _herm(HX) + sigma_c2 * np.eye(H.shape[0])
    try:
        U = np.linalg.solve(A, HX)
    except np.linalg.LinAlgError as exc:
        raise np.linalg.LinAlgError("singular system in combiner update") from exc
    return _unstack(U, single)


def update_weight(H, X, U):
    """MMSE weight (I - X^H H^H U)^-1, regularized when badly conditioned."""
    X, single = _stack(X, "X")
    U, _ = _stack(U, "U")
    n_s = X.shape[-1]
    B = np.eye(n_s) - _herm(H @ X) @ U
    cond = np.linalg.cond(B)
    bad = cond > WEIGHT_COND_LIMIT
    if np.any(~np.isfinite(cond)):
        raise np.linalg.LinAlgError("I - X^H H^H U is singular; combiner is not MMSE")
    if np.any(bad):
        logger.warning("ill-conditioned weight update (cond=%.3g); regularizing", cond.max())
        B = B + bad[:, None, None] * 1e-12 * np.eye(n_s)
    W = hermitian_part(np.linalg.inv(B))
    return _unstack(W, single)


def wmmse_objective(H, X, U, W, sigma_c2):
    """sum_l Tr(E_l W_l) - log|W_l| (natural log)."""
    E = mse_matrix(H, X, U, sigma_c2)
    E, _ = _stack(E, "E")
    W, _ = _stack(W, "W")
    _, logdet = np.linalg.slogdet(W)
    return float(np.sum(np.einsum("lij,lji->l", E, W).real - logdet.real))


@dataclass(frozen=True)
class MuMisoProblem:
    """Single-antenna users: channels ``h_n`` as rows of (n_users, n_tx)."""

    channels: np.ndarray
    priorities: np.ndarray = None
    noise_vars: np.ndarray = None

    def __post_init__(self):
        h = check_complex_array(self.channels, "channels", ndim=2)
        n_users = h.shape[0]
        if n_users < 1:
            raise ValueError("need at least one user")
        beta = np.ones(n_users) if self.priorities is None else np.asarray(self.priorities, float)
        sig = np.full(n_users, 0.1) if self.noise_vars is None else np.asarray(self.noise_vars, float)
        if beta.shape != (n_users,) or np.any(beta <= 0):
            raise ValueError("priorities must be positive, one per user")
        if sig.shape != (n_users,) or np.any(sig <= 0):
            raise ValueError("noise_vars must be positive, one per user")
        object.__setattr__(self, "channels", h)
        object.__setattr__(self, "priorities", beta)
        object.__setattr__(self, "noise_vars", sig)

    @property
    def n_users(self):
        return self.channels.shape[0]


def _user_gains(channels, X):
    """g[l, n, i] = h_n^H X_l[:, i]."""
    return np.einsum("nt,lti->lni", np.conj(channels), X)


def mu_miso_rate(problem, precoders):
    """Per-user rates R_l[n] (bits/s/Hz), shape (L, n_users), for effective precoders F_l."""
    X, single = _stack(precoders, "precoders")
    g = np.abs(_user_gains(problem.channels, X)) ** 2
    desired = np.diagonal(g, axis1=1, axis2=2)
    interference = g.sum(axis=2) - desired
    rates = np.log2(1.0 + desired / (problem.noise_vars + interference))
    return _unstack(rates, single)


def mu_miso_update_u(problem, X):
    """u_{l,n} = conj(h_n^H x_n) / (sum_i |h_n^H x_i|^2 + s2_n), shape (L, n_users)."""
    X, single = _stack(X, "X")
    g = _user_gains(problem.channels, X)
    total = np.sum(np.abs(g) ** 2, axis=2) + problem.noise_vars
    u = np.conj(np.diagonal(g, axis1=1, axis2=2)) / total
    return _unstack(u, single)


def mu_miso_mse(problem, X, u):
    """e_{l,n} = |u h^H x_n - 1|^2 + sum_{i != n} |u h^H x_i|^2 + s2 |u|^2."""
    X, single = _stack(X, "X")
    u = np.atleast_2d(u)
    ug = u[:, :, None] * _user_gains(problem.channels, X)
    ug[:, np.arange(problem.n_users), np.arange(problem.n_users)] -= 1.0
    e = np.sum(np.abs(ug) ** 2, axis=2) + problem.noise_vars * np.abs(u) ** 2
    return _unstack(e, single)


def mu_miso_update_w(problem, X):
    """Reciprocal of the MSE at the optimal receiver, i.e. 1 + SINR_n (always positive)."""
    X, single = _stack(X, "X")
    u = mu_miso_update_u(problem, X)
    w = 1.0 / mu_miso_mse(problem, X, u)
    return _unstack(w, single)


def mu_miso_objective(problem, X, u, w):
    """sum_{l,n} beta_n (w e - log w)."""
    e = mu_miso_mse(problem, X, u)
    return float(np.sum(problem.priorities * (w * e - np.log(w))))
