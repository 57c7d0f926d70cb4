"""Block solvers of the consensus-ADMM precoder design and the radar filter update."""

from dataclasses import dataclass, replace
from typing import NamedTuple

import numpy as np
import scipy.linalg

from . import comm
from ._validation import hermitian_part
from .model import DpsAnalogPrecoder

ARCHITECTURES = ("dps", "sps", "digital")


class RadarConstraintUnreachable(RuntimeError):
    """The radar SINR constraint cannot be met for the current filter and kernels."""

    def __init__(self, message, gap=None):
        super().__init__(message)
        self.gap = gap


def _herm(a):
    return np.conj(np.swapaxes(a, -1, -2))


# --------------------------------------------------------------------------- state


@dataclass
class ProblemSpec:
    """Fixed data of one design problem.

    Exactly one of ``channel`` (single-user MIMO, (n_rx, n_tx)) and ``users``
    (:class:`~dfrc_hbf.comm.MuMisoProblem`) is set. ``gamma`` is linear.
    """

    cfg: object
    scene: object
    gamma: float
    channel: np.ndarray = None
    users: comm.MuMisoProblem = None

    def __post_init__(self):
        if (self.channel is None) == (self.users is None):
            raise ValueError("give exactly one of channel or users")
        if not self.gamma > 0:
            raise ValueError("gamma must be > 0")

    @property
    def is_mu(self):
        return self.users is not None

    @property
    def energy_budget(self):
        return self.cfg.energy_budget

    def alpha(self, v):
        """Right-hand side gamma * s2_r * |v|^2 of the precoder-form SINR constraint."""
        return self.gamma * self.cfg.noise_var_radar * float(np.vdot(v, v).real)


@dataclass
class AdmmState:
    """Primal, dual and penalty variables of the consensus-ADMM.

    ``u``/``w`` are combiner/weight matrix stacks for single-user problems and
    (L, n_users) scalar arrays for MU-MISO problems.
    """

    x: np.ndarray
    z: np.ndarray
    u: np.ndarray
    w: np.ndarray
    d1: np.ndarray
    d2: np.ndarray
    f_set: DpsAnalogPrecoder
    f_digital: np.ndarray
    rho1: float = 20.0
    rho2: float = 20.0

    def __post_init__(self):
        if not (self.rho1 > 0 and self.rho2 > 0):
            raise ValueError("penalties must be > 0")

    def hybrid(self):
        """F_set P F_D,l for every subpulse, shape (L, n_tx, n_s)."""
        return hybrid_precoders(self.f_set, self.f_digital)

    def copy(self):
        return replace(
            self,
            x=self.x.copy(),
            z=self.z.copy(),
            u=self.u.copy(),
            w=self.w.copy(),
            d1=self.d1.copy(),
            d2=self.d2.copy(),
            f_digital=self.f_digital.copy(),
        )


def hybrid_precoders(f_set, f_digital):
    M = f_set.n_tx // f_set.n_rf
    rows = np.repeat(f_digital, M, axis=1)
    return f_set.gains[None, :, None] * rows


# ---------------------------------------------------------------- radar filter


def update_radar_filter(kernels, sigma_r2):
    """Unit-norm filter maximizing v^H Th_t v / v^H (Th_c + s2 I) v.

    Returns ``(v, sinr)``. The sign/phase is fixed so the largest entry is real
    positive, which makes the output deterministic.
    """
    A = hermitian_part(np.asarray(kernels.theta_t))
    B = hermitian_part(np.asarray(kernels.theta_c)) + sigma_r2 * np.eye(A.shape[0])
    if not (np.all(np.isfinite(A)) and np.all(np.isfinite(B))):
        raise ValueError("kernels contain non-finite entries")
    n = A.shape[0]
    vals, vecs = scipy.linalg.eigh(A, B, subset_by_index=[n - 1, n - 1])
    v = vecs[:, 0]
    v = v / np.linalg.norm(v)
    k = np.argmax(np.abs(v))
    v = v * np.exp(-1j * np.angle(v[k]))
    return v, max(float(vals[0]), 0.0)


# ---------------------------------------------------------------- X update


def energy_lhs(eigvals, weights, mu):
    """sum_{l,n} weights / (eigvals + mu)^2, the transmit energy of X(mu)."""
    return float(np.sum(weights / (eigvals + mu) ** 2))


def solve_energy_constrained(Xi, Psi, energy, rtol=1e-12, max_iter=200):
    """min_X sum_l Tr(X^H Xi X) - 2 Re Tr(X^H Psi) s.t. sum_l |X_l|_F^2 <= energy.

    ``Xi`` is a positive-definite stack (L, n, n) and ``Psi`` is (L, n, k).
    The multiplier is found by bisection on the strictly decreasing energy
    function after one eigendecomposition per subpulse. Returns ``(X, mu)``.
    """
    lam, Q = np.linalg.eigh(hermitian_part(Xi))
    Pt = _herm(Q) @ Psi
    weights = np.sum(np.abs(Pt) ** 2, axis=2)
    mu = 0.0
    if energy_lhs(lam, weights, 0.0) > energy:
        lo = 0.0
        hi = np.sqrt(weights.sum() / energy)
        while energy_lhs(lam, weights, hi) > energy:
            lo, hi = hi, 2.0 * hi
        tol = rtol * energy
        for _ in range(max_iter):
            mu = 0.5 * (lo + hi)
            gap = energy_lhs(lam, weights, mu) - energy
            if abs(gap) <= tol or hi - lo <= 4 * np.finfo(float).eps * hi:
                break
            if gap > 0:
                lo = mu
            else:
                hi = mu
    X = Q @ (Pt / (lam + mu)[:, :, None])
    return X, mu


def wmmse_quadratic_terms(problem, state):
    """Quadratic and linear coefficients of the WMMSE cost in X.

    Single-user: (H^H U W U^H H, H^H U W). MU-MISO:
    (sum_n b_n w_n |u_n|^2 h_n h_n^H, [b_n w_n conj(u_n) h_n]_n).
    """
    if problem.is_mu:
        users = problem.users
        h = users.channels.T  # (n_tx, n_users)
        coef = users.priorities * state.w  # (L, n_users)
        A = np.einsum("ln,tn,sn->lts", coef * np.abs(state.u) ** 2, h, h.conj())
        B = (coef * np.conj(state.u))[:, None, :] * h[None]
        return A, B
    H = problem.channel
    HU = H.conj().T @ state.u
    A = HU @ state.w @ _herm(HU)
    B = HU @ state.w
    return A, B


def x_subproblem(problem, state, architecture="dps"):
    """(Xi, Psi) such that the X-step minimizes Tr(X^H Xi X) - 2 Re Tr(X^H Psi)."""
    A, B = wmmse_quadratic_terms(problem, state)
    n_tx = A.shape[-1]
    eye = np.eye(n_tx)
    if architecture == "digital":
        Xi = A + 0.5 * state.rho2 * eye
        Psi = B - 0.5 * state.d2 + 0.5 * state.rho2 * state.z
    else:
        Xi = A + 0.5 * (state.rho1 + state.rho2) * eye
        Psi = (
            B
            - 0.5 * (state.d1 + state.d2)
            + 0.5 * state.rho1 * state.hybrid()
            + 0.5 * state.rho2 * state.z
        )
    return Xi, Psi


def update_x_su(state, H, problem, architecture="dps"):
    """Energy-constrained X-step for the single-user problem. Returns ``(X, mu)``."""
    if problem.channel is None:
        problem = replace(problem, channel=H, users=None)
    Xi, Psi = x_subproblem(problem, state, architecture)
    return solve_energy_constrained(Xi, Psi, problem.energy_budget)


def update_x_mu_miso(state, problem, architecture="dps"):
    """Energy-constrained X-step for the MU-MISO problem. Returns ``(X, mu)``."""
    if not problem.is_mu:
        raise ValueError("problem has no MU-MISO users")
    Xi, Psi = x_subproblem(problem, state, architecture)
    return solve_energy_constrained(Xi, Psi, problem.energy_budget)


def fully_digital_update(state, H, problem):
    """X-step of the fully-digital benchmark (no analog consensus term)."""
    if problem.is_mu:
        return update_x_mu_miso(state, problem, "digital")[0]
    return update_x_su(state, H, problem, "digital")[0]


# ---------------------------------------------------------------- Z update


class ConstraintEig(NamedTuple):
    """Eigendecomposition of the constraint matrices M[l] = Phi_t[l] - gamma Phi_c[l]."""

    eigvals: np.ndarray  # (L, n)
    eigvecs: np.ndarray  # (L, n, n)


def constraint_eig(kernels, gamma):
    lam, Q = np.linalg.eigh(kernels.constraint_matrices(gamma))
    return ConstraintEig(lam, Q)


def radar_constraint_value(Z, M):
    """sum_l Tr(Z_l Z_l^H M[l])."""
    return float(np.einsum("lia,lij,lja->", Z.conj(), M, Z).real)


def update_z(x, d2, rho2, eig, alpha, rtol=1e-12, max_iter=200):
    """Project X + D2/rho2 onto {Z : sum_l Tr(Z Z^H M[l]) >= alpha}.

    ``eig`` is the :class:`ConstraintEig` of the M stack. The multiplier nu is
    searched on (0, rho2 / (2 lambda_max)) where the constraint value is
    strictly increasing; Newton steps are safeguarded by bisection.
    Returns ``(Z, nu)``; raises :class:`RadarConstraintUnreachable`.
    """
    lam, Q = eig
    c = 0.5 * rho2
    z0 = x + d2 / rho2
    G = _herm(Q) @ (c * z0)
    q = np.sum(np.abs(G) ** 2, axis=2)

    def value(nu):
        den = c - nu * lam
        return float(np.sum(lam * q / den**2))

    def slope(nu):
        den = c - nu * lam
        return float(np.sum(2.0 * lam**2 * q / den**3))

    if value(0.0) >= alpha:
        return z0, 0.0
    lam_max = lam.max()
    if lam_max <= 0:
        raise RadarConstraintUnreachable(
            "radar SINR constraint unreachable for current filter/kernels",
            gap=alpha - value(0.0),
        )
    nu_max = c / lam_max
    hi = None
    for k in range(1, 53):
        cand = nu_max * (1.0 - 2.0**-k)
        if value(cand) >= alpha:
            hi = cand
            break
    if hi is None:
        raise RadarConstraintUnreachable(
            "radar SINR constraint unreachable for current filter/kernels",
            gap=alpha - value(nu_max * (1.0 - 2.0**-52)),
        )
    lo = 0.0
    nu = hi
    tol = rtol * max(alpha, 1.0)
    for _ in range(max_iter):
        h = value(nu) - alpha
        if abs(h) <= tol:
            break
        if h > 0:
            hi = nu
        else:
            lo = nu
        d = slope(nu)
        step = nu - h / d if abs(d) >= 1e-14 else np.nan
        nu = step if lo < step < hi else 0.5 * (lo + hi)
        if hi - lo <= 4 * np.finfo(float).eps * hi:
            break
    Z = Q @ (G / (c - nu * lam)[:, :, None])
    return Z, nu


# ---------------------------------------------------------------- analog/digital


def update_fd(f_set, x, d1, rho1):
    """Least-squares digital precoders for fixed F_set, shape (L, n_rf, n_s)."""
    n_tx, n_rf = f_set.n_tx, f_set.n_rf
    M = n_tx // n_rf
    energy = np.sum((f_set.amplitudes**2).reshape(n_rf, M), axis=1)
    empty = np.flatnonzero(energy == 0)
    if empty.size:
        raise ValueError(f"subarray {int(empty[0])} has all-zero amplitudes")
    pi = x + d1 / rho1
    L, _, n_s = pi.shape
    proj = (np.conj(f_set.gains)[None, :, None] * pi).reshape(L, n_rf, M, n_s).sum(axis=2)
    return proj / energy[None, :, None]


def update_fset(x, f_digital, d1, rho1, n_tx, architecture="dps"):
    """Per-antenna closed-form analog gains for fixed F_D.

    ``architecture='sps'`` pins every amplitude to 1/sqrt(n_tx) (phase-only);
    antennas whose F_D rows vanish get amplitude 0 and phase 0.
    """
    n_rf = f_digital.shape[1]
    M = n_tx // n_rf
    pi = x + d1 / rho1
    Y = np.repeat(f_digital, M, axis=1)
    corr = np.sum(pi * np.conj(Y), axis=(0, 2))
    power = np.sum(np.abs(Y) ** 2, axis=(0, 2))
    cap = 2.0 / np.sqrt(n_tx)
    live = power > 0
    amp = np.zeros(n_tx)
    amp[live] = np.minimum(np.abs(corr[live]) / power[live], cap)
    phase = np.where(live & (corr != 0), np.angle(corr), 0.0)
    f_set = DpsAnalogPrecoder(amp, phase, n_rf)
    if architecture == "sps":
        return sps_project(f_set)
    return f_set


def dps_phase_split(amplitudes, phases, n_tx):
    """Two unit-modulus phase settings whose sum / sqrt(n_tx) equals A exp(j phi)."""
    amp = np.asarray(amplitudes, dtype=float)
    cap = 2.0 / np.sqrt(n_tx)
    if np.any(amp < -1e-12) or np.any(amp > cap * (1 + 1e-12)):
        raise ValueError(f"amplitude outside [0, {cap:.6g}]")
    half = np.arccos(np.clip(amp * np.sqrt(n_tx) / 2.0, -1.0, 1.0))
    phi = np.asarray(phases, dtype=float)
    return phi + half, phi - half


def sps_project(f_set):
    """Pin amplitudes to 1/sqrt(n_tx); phases (0 for dead antennas) are kept."""
    amp = np.full(f_set.n_tx, 1.0 / np.sqrt(f_set.n_tx))
    return DpsAnalogPrecoder(amp, f_set.phases, f_set.n_rf)


def update_duals(state, architecture="dps"):
    """Dual ascent on both consensus constraints (D2 scaled by rho2). Mutates ``state``."""
    if architecture != "digital":
        state.d1 = state.d1 + state.rho1 * (state.x - state.hybrid())
    state.d2 = state.d2 + state.rho2 * (state.x - state.z)
    return state


# ---------------------------------------------------------------- objective


def comm_objective(problem, state):
    """WMMSE cost of the current (X, U, W)."""
    if problem.is_mu:
        return comm.mu_miso_objective(problem.users, state.x, state.u, state.w)
    return comm.wmmse_objective(
        problem.channel, state.x, state.u, state.w, problem.cfg.noise_var_comm
    )


def augmented_lagrangian(problem, state, architecture="dps"):
    """WMMSE cost plus the linear and quadratic consensus penalties."""
    value = comm_objective(problem, state)
    if architecture != "digital":
        r1 = state.x - state.hybrid()
        value += np.vdot(state.d1, r1).real + 0.5 * state.rho1 * np.vdot(r1, r1).real
    r2 = state.x - state.z
    value += np.vdot(state.d2, r2).real + 0.5 * state.rho2 * np.vdot(r2, r2).real
    return float(value)


def update_comm_receivers(problem, state):
    """WMMSE combiner and weight steps at the current X. Mutates ``state``."""
    if problem.is_mu:
        state.u = comm.mu_miso_update_u(problem.users, state.x)
        state.w = 1.0 / comm.mu_miso_mse(problem.users, state.x, state.u)
    else:
        H, s2 = problem.channel, problem.cfg.noise_var_comm
        state.u = comm.update_combiner(H, state.x, s2)
        state.w = comm.update_weight(H, state.x, state.u)
    return state
