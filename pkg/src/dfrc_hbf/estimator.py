"""Estimator-style front end: fit a DFRC beamformer to a channel and radar scene."""

import numpy as np
from sklearn.base import BaseEstimator, TransformerMixin
from sklearn.utils.validation import check_is_fitted

from . import algorithms, comm
from ._validation import check_complex_array, check_positive
from .model import SystemConfig, substream
from .solvers import ProblemSpec


def db_to_linear(value_db):
    return 10.0 ** (np.asarray(value_db, dtype=float) / 10.0)


class _BaseBeamformer(BaseEstimator, TransformerMixin):
    def _config(self, n_tx, n_rx, n_streams, scene):
        if scene.n_tx != n_tx:
            raise ValueError(f"scene has n_tx={scene.n_tx}, channel has {n_tx}")
        return SystemConfig(
            n_tx=n_tx,
            n_rf=self.n_rf,
            n_rx=n_rx,
            n_rad=scene.n_rad,
            n_streams=n_streams,
            n_subpulses=scene.n_subpulses,
            energy_budget=check_positive(self.energy_budget, "energy_budget"),
            noise_var_comm=check_positive(self.noise_var_comm, "noise_var_comm"),
            noise_var_radar=check_positive(self.noise_var_radar, "noise_var_radar"),
            spacing_over_lambda_tx=scene.spacing_over_lambda_tx,
            spacing_over_lambda_rx=scene.spacing_over_lambda_rx,
        )

    def _solve(self, problem):
        seed = 0 if self.random_state is None else self.random_state
        result = algorithms.thereon_multistart(
            problem,
            self.architecture,
            seeds=[substream(seed, "init", k) for k in range(self.n_init)],
            n_outer=self.max_outer_iter,
            max_inner=self.max_inner_iter,
            outer_tol=self.tol,
            rho1=self.rho1,
            rho2=self.rho2,
        )
        self.result_ = result
        self.analog_precoder_ = result.f_set
        self.digital_precoders_ = result.f_digital
        self.precoders_ = result.precoders
        self.combiners_ = result.combiners
        self.radar_filter_ = result.filter
        self.sum_se_ = result.sum_se
        self.radar_sinr_db_ = result.radar_sinr_db
        self.feasible_ = result.feasible
        self.n_iter_ = result.n_inner
        self.n_outer_iter_ = result.n_outer
        return self

    def transform(self, symbols):
        """Transmit samples ``x_l = F_l s_l``.

        ``symbols`` is (L, n_s) for one symbol per subpulse or (L, n_s, T) for a
        block of T symbols; the output is (L, n_tx) or (L, n_tx, T).
        """
        check_is_fitted(self, "precoders_")
        L, _, n_s = self.precoders_.shape
        s = check_complex_array(symbols, "symbols")
        if s.ndim not in (2, 3) or s.shape[:2] != (L, n_s):
            raise ValueError(f"symbols must have shape ({L}, {n_s}[, T]), got {s.shape}")
        if s.ndim == 2:
            return np.einsum("lts,ls->lt", self.precoders_, s)
        return self.precoders_ @ s


class HybridBeamformer(_BaseBeamformer):
    """Single-user MIMO DFRC hybrid beamformer (THEREON design).

    Parameters
    ----------
    n_rf : int
        RF chains, each driving a disjoint subarray.
    n_streams : int
        Data streams per subpulse.
    gamma_db : float
        Radar SINR requirement in dB.
    architecture : {'dps', 'sps', 'digital'}
        Double phase shifters, conventional single phase shifters or the
        fully-digital benchmark.
    energy_budget, noise_var_comm, noise_var_radar : float
        Linear-scale budget and noise variances.
    rho1, rho2 : float
        ADMM penalties of the analog and radar consensus constraints.
    max_inner_iter, max_outer_iter : int
        ADMM iterations per outer round and outer filter/precoder rounds.
    tol : float
        Outer stop when the sum SE changes by less than this (bits/s/Hz).
    n_init : int
        Random initial points tried; the best feasible design is kept.
    random_state : int or None
        Seed of the random initial points.

    Attributes
    ----------
    precoders_ : ndarray (L, n_tx, n_streams)
        Effective precoders F_l.
    analog_precoder_ : DpsAnalogPrecoder
    digital_precoders_ : ndarray (L, n_rf, n_streams)
    combiners_ : ndarray (L, n_rx, n_streams)
    radar_filter_ : ndarray (n_rad * l_obs,)
    sum_se_ : float
    radar_sinr_db_ : float
    feasible_ : bool
    """

    def __init__(
        self,
        n_rf=4,
        n_streams=4,
        gamma_db=12.0,
        architecture="dps",
        energy_budget=10.0,
        noise_var_comm=0.1,
        noise_var_radar=0.1,
        rho1=20.0,
        rho2=20.0,
        max_inner_iter=100,
        max_outer_iter=10,
        tol=1e-4,
        n_init=1,
        random_state=None,
    ):
        self.n_rf = n_rf
        self.n_streams = n_streams
        self.gamma_db = gamma_db
        self.architecture = architecture
        self.energy_budget = energy_budget
        self.noise_var_comm = noise_var_comm
        self.noise_var_radar = noise_var_radar
        self.rho1 = rho1
        self.rho2 = rho2
        self.max_inner_iter = max_inner_iter
        self.max_outer_iter = max_outer_iter
        self.tol = tol
        self.n_init = n_init
        self.random_state = random_state

    def fit(self, H, scene):
        """Design precoders, combiners and radar filter for channel ``H`` (n_rx, n_tx)."""
        H = check_complex_array(H, "H", ndim=2)
        cfg = self._config(H.shape[1], H.shape[0], self.n_streams, scene)
        self.config_ = cfg
        problem = ProblemSpec(cfg, scene, float(db_to_linear(self.gamma_db)), channel=H)
        return self._solve(problem)

    def score(self, H, scene=None):
        """Sum SE (bits/s/Hz) of the fitted precoders on channel ``H``."""
        check_is_fitted(self, "precoders_")
        H = check_complex_array(H, "H", ndim=2)
        return float(np.sum(comm.achievable_rate(H, self.precoders_, self.noise_var_comm)))


class MuMisoHybridBeamformer(_BaseBeamformer):
    """Multi-user MISO variant; one stream per single-antenna user.

    Takes the same parameters as :class:`HybridBeamformer` except
    ``n_streams`` (set by the user count) plus optional ``priorities``.
    ``per_user_se_`` holds the rates summed over subpulses.
    """

    def __init__(
        self,
        n_rf=8,
        gamma_db=12.0,
        architecture="dps",
        priorities=None,
        energy_budget=10.0,
        noise_var_comm=0.1,
        noise_var_radar=0.1,
        rho1=20.0,
        rho2=20.0,
        max_inner_iter=100,
        max_outer_iter=10,
        tol=1e-4,
        n_init=1,
        random_state=None,
    ):
        self.n_rf = n_rf
        self.gamma_db = gamma_db
        self.architecture = architecture
        self.priorities = priorities
        self.energy_budget = energy_budget
        self.noise_var_comm = noise_var_comm
        self.noise_var_radar = noise_var_radar
        self.rho1 = rho1
        self.rho2 = rho2
        self.max_inner_iter = max_inner_iter
        self.max_outer_iter = max_outer_iter
        self.tol = tol
        self.n_init = n_init
        self.random_state = random_state

    def _users(self, channels):
        h = check_complex_array(channels, "channels", ndim=2)
        noise = np.full(h.shape[0], check_positive(self.noise_var_comm, "noise_var_comm"))
        return comm.MuMisoProblem(h, self.priorities, noise)

    def fit(self, channels, scene):
        """Fit to user channels ``h_n`` given as rows of (n_users, n_tx)."""
        users = self._users(channels)
        cfg = self._config(users.channels.shape[1], 1, users.n_users, scene)
        self.config_ = cfg
        problem = ProblemSpec(cfg, scene, float(db_to_linear(self.gamma_db)), users=users)
        self._solve(problem)
        self.per_user_se_ = self.result_.per_user_se
        return self

    def score(self, channels, scene=None):
        """Sum over users and subpulses of the MU-MISO rate."""
        check_is_fitted(self, "precoders_")
        return float(np.sum(comm.mu_miso_rate(self._users(channels), self.precoders_)))
