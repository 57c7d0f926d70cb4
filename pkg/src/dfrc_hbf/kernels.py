"""Quadratic-form radar SINR kernels and a Monte-Carlo reference estimator.

Two equivalent views of the output SINR are built here:

* filter form, ``v^H Theta_t v / (v^H Theta_c v + s2 |v|^2)``, quadratic in the
  vectorized receive filter ``v = vec(V)`` (column-major, length n_rad * l_obs);
* precoder form, ``sum_l Tr(F_l F_l^H Phi_t[l]) / (sum_l Tr(F_l F_l^H Phi_c[l]) + s2 |v|^2)``,
  quadratic in the per-subpulse precoders ``F_l``.

The known Doppler rotation is treated as absorbed into the filter, so neither
kernel carries it; :func:`monte_carlo_sinr` can include it for sensitivity checks.
"""

from dataclasses import dataclass

import numpy as np

from ._validation import check_complex_array, check_count, hermitian_part
from .model import complex_normal, substream


@dataclass(frozen=True)
class SinrKernelsV:
    """Filter-form kernels, each (n_rad * l_obs) square."""

    theta_t: np.ndarray
    theta_c: np.ndarray


@dataclass(frozen=True)
class SinrKernelsF:
    """Precoder-form diagonal blocks, each stack shaped (L, n_tx, n_tx)."""

    phi_t: np.ndarray
    phi_c: np.ndarray

    def constraint_matrices(self, gamma):
        """``Phi_t[l] - gamma Phi_c[l]`` for every subpulse."""
        return hermitian_part(self.phi_t - gamma * self.phi_c)


def filter_to_vector(V):
    return np.asarray(V).reshape(-1, order="F")


def vector_to_filter(v, n_rad):
    v = np.asarray(v)
    return v.reshape(n_rad, v.size // n_rad, order="F")


def _as_filter(v, scene):
    arr = check_complex_array(v, "filter")
    if arr.ndim == 1:
        if arr.size != scene.n_rad * scene.l_obs:
            raise ValueError(
                f"filter has {arr.size} entries, expected n_rad * l_obs = "
                f"{scene.n_rad * scene.l_obs}"
            )
        return vector_to_filter(arr, scene.n_rad)
    if arr.shape != (scene.n_rad, scene.l_obs):
        raise ValueError(f"filter has shape {arr.shape}, expected {(scene.n_rad, scene.l_obs)}")
    return arr


def _as_precoders(precoders, scene):
    F = check_complex_array(precoders, "precoders", ndim=3)
    if F.shape[0] != scene.n_subpulses or F.shape[1] != scene.n_tx:
        raise ValueError(
            f"precoders have shape {F.shape}, expected ({scene.n_subpulses}, {scene.n_tx}, n_s)"
        )
    return F


def _group_by_length(scene):
    """Clutter bins grouped by FIR length -> (lengths, index arrays, stacked covariances)."""
    groups = {}
    for i, c in enumerate(scene.clutter):
        groups.setdefault(c.fir_length, []).append(i)
    for length, idx in groups.items():
        cov = np.stack([scene.clutter[i].covariance for i in idx])
        yield length, np.asarray(idx), cov


def _accumulate_theta(grams, cov, n_obs):
    """Sum over l of (Sigma placed at rows/cols l..l+n-1) kron G_l.

    ``grams`` is (B, L, r, r) for B scatterers sharing FIR length n; ``cov`` is (B, n, n).
    Returns the 4-D block array (n_obs, n_obs, r, r).
    """
    _, n_sub, r, _ = grams.shape
    length = cov.shape[1]
    out = np.zeros((n_obs, n_obs, r, r), dtype=complex)
    for l in range(n_sub):
        out[l : l + length, l : l + length] += np.einsum("bpq,bij->pqij", cov, grams[:, l])
    return out


def _blocks_to_matrix(blocks):
    n_obs, _, r, _ = blocks.shape
    return blocks.transpose(0, 2, 1, 3).reshape(n_obs * r, n_obs * r)


def build_theta_kernels(precoders, scene):
    """Filter-form kernels for fixed per-subpulse precoders ``F_l`` (L, n_tx, n_s)."""
    F = _as_precoders(precoders, scene)
    n_obs = scene.l_obs
    FF = F @ np.conj(np.swapaxes(F, 1, 2))

    Ht = scene.target_matrix
    grams = (Ht @ FF @ Ht.conj().T)[None]
    theta_t = _blocks_to_matrix(
        _accumulate_theta(grams, scene.target.covariance[None], n_obs)
    )

    dim = scene.n_rad * n_obs
    theta_c = np.zeros((dim, dim), dtype=complex)
    Hc = scene.clutter_matrices
    for _, idx, cov in _group_by_length(scene):
        H = Hc[idx][:, None]
        grams = H @ FF[None] @ np.conj(np.swapaxes(H, -1, -2))
        theta_c += _blocks_to_matrix(_accumulate_theta(grams, cov, n_obs))
    return SinrKernelsV(hermitian_part(theta_t), hermitian_part(theta_c))


def _phi_stack(V, H, cov, n_sub):
    """H^H W_l Sigma^T W_l^H H for the sliding windows W_l = V[:, l:l+n]."""
    length = cov.shape[-1]
    windows = np.stack([V[:, l : l + length] for l in range(n_sub)])
    inner = windows @ cov.T @ np.conj(np.swapaxes(windows, 1, 2))
    return H.conj().T @ inner @ H


def build_phi_kernels(filter, scene):
    """Precoder-form diagonal blocks for a fixed receive filter (matrix or vector)."""
    V = _as_filter(filter, scene)
    L = scene.n_subpulses
    phi_t = _phi_stack(V, scene.target_matrix, scene.target.covariance, L)
    phi_c = np.zeros_like(phi_t)
    for c, H in zip(scene.clutter, scene.clutter_matrices):
        phi_c += _phi_stack(V, H, c.covariance, L)
    return SinrKernelsF(hermitian_part(phi_t), hermitian_part(phi_c))


def sinr_filter_form(v, kernels, sigma_r2):
    v = filter_to_vector(check_complex_array(v, "filter"))
    vv = np.vdot(v, v).real
    if vv == 0:
        raise ValueError("SINR undefined for a zero filter")
    num = np.vdot(v, kernels.theta_t @ v).real
    den = np.vdot(v, kernels.theta_c @ v).real + sigma_r2 * vv
    return max(num, 0.0) / den


def precoder_quadratic(precoders, phi):
    """sum_l Tr(F_l F_l^H Phi[l])."""
    F = np.asarray(precoders)
    return np.einsum("lia,lij,lja->", F.conj(), phi, F).real


def sinr_precoder_form(precoders, kernels, sigma_r2, v):
    v = filter_to_vector(check_complex_array(v, "filter"))
    vv = np.vdot(v, v).real
    if vv == 0:
        raise ValueError("SINR undefined for a zero filter")
    num = precoder_quadratic(precoders, kernels.phi_t)
    den = precoder_quadratic(precoders, kernels.phi_c) + sigma_r2 * vv
    return max(num, 0.0) / den


def _sqrt_psd(cov):
    w, Q = np.linalg.eigh(cov)
    return Q * np.sqrt(np.clip(w, 0.0, None))


def _toeplitz_batch(taps, n_sub, n_obs):
    """Banded (n, L, n_obs) matrices with row l holding the taps from column l."""
    n, length = taps.shape
    T = np.zeros((n, n_sub, n_obs), dtype=complex)
    rows = np.arange(n_sub)
    for k in range(length):
        T[:, rows, rows + k] = taps[:, k : k + 1]
    return T


def monte_carlo_sinr(
    precoders,
    filter,
    scene,
    sigma_r2,
    n_draws=100_000,
    seed=0,
    include_doppler=False,
    chunk=10_000,
    terms=False,
):
    """Empirical SINR from direct simulation of the received block.

    Each draw samples the target FIR, every clutter FIR, unit-power symbols and
    receiver noise, forms the three filtered components of the received matrix
    and averages their powers. Returns ``(estimate, std_error)``; the standard
    error of the ratio of means comes from the delta method. With ``terms=True``
    a dict of per-component means and standard errors is returned as well.
    """
    n_draws = check_count(n_draws, "n_draws", minimum=100)
    F = _as_precoders(precoders, scene)
    V = _as_filter(filter, scene)
    L, n_s = F.shape[0], F.shape[2]
    n_obs = scene.l_obs
    sym_rng = substream(seed, "symbols")
    tgt_rng = substream(seed, "target")
    clt_rng = substream(seed, "clutter")
    noise_rng = substream(seed, "noise")

    Vc = V.conj()
    t_sqrt = _sqrt_psd(scene.target.covariance)
    c_sqrt = [_sqrt_psd(c.covariance) for c in scene.clutter]
    doppler = scene.doppler_phases() if include_doppler else None

    sig, clut, noise = [], [], []
    done = 0
    while done < n_draws:
        n = min(chunk, n_draws - done)
        s = complex_normal(sym_rng, (n, L, n_s))
        X = np.einsum("lts,nls->ntl", F, s)  # columns x[l] = F_l s_l

        t = complex_normal(tgt_rng, (n, scene.target.fir_length)) @ t_sqrt.T
        XT = X @ _toeplitz_batch(t, L, n_obs)
        if doppler is not None:
            XT = XT * doppler
        R_t = scene.target_matrix @ XT
        sig.append(np.abs(np.einsum("rk,nrk->n", Vc, R_t)) ** 2)

        y_c = np.zeros(n, dtype=complex)
        for sq, H in zip(c_sqrt, scene.clutter_matrices):
            j = complex_normal(clt_rng, (n, sq.shape[0])) @ sq.T
            y_c += np.einsum("rk,nrk->n", Vc, H @ (X @ _toeplitz_batch(j, L, n_obs)))
        clut.append(np.abs(y_c) ** 2)

        Z = np.sqrt(sigma_r2) * complex_normal(noise_rng, (n, scene.n_rad, n_obs))
        noise.append(np.abs(np.einsum("rk,nrk->n", Vc, Z)) ** 2)
        done += n

    A = np.concatenate(sig)
    B = np.concatenate(clut) + np.concatenate(noise)
    a, b = A.mean(), B.mean()
    ratio = a / b
    resid = (A - ratio * B) / b
    std_error = resid.std(ddof=1) / np.sqrt(n_draws)
    if not terms:
        return ratio, std_error
    sqrt_n = np.sqrt(n_draws)
    c_all, z_all = np.concatenate(clut), np.concatenate(noise)
    return ratio, std_error, {
        "signal": (a, A.std(ddof=1) / sqrt_n),
        "clutter": (c_all.mean(), c_all.std(ddof=1) / sqrt_n),
        "noise": (z_all.mean(), z_all.std(ddof=1) / sqrt_n),
    }
