"""Consensus-ADMM precoder design, the THEREON outer alternation and detection probability."""

import logging
from dataclasses import dataclass, field

import numpy as np
from scipy import stats

from . import comm, kernels, solvers
from .model import DpsAnalogPrecoder, complex_normal, substream
from .solvers import ARCHITECTURES, AdmmState, ProblemSpec, RadarConstraintUnreachable

logger = logging.getLogger(__name__)

__all__ = [
    "ConvergenceTrace",
    "SolveResult",
    "ThresholdInfeasible",
    "consensus_admm",
    "detection_probability",
    "initial_state",
    "sum_rate",
    "thereon",
    "thereon_multistart",
    "thereon_mu_miso",
]


class ThresholdInfeasible(RuntimeError):
    """Even with the whole energy budget on the radar, the SINR threshold is out of reach."""


@dataclass
class ConvergenceTrace:
    """Per-inner-iteration and per-outer-iteration history of one solve."""

    outer_iter: list = field(default_factory=list)
    inner_iter: list = field(default_factory=list)
    sum_se: list = field(default_factory=list)
    aug_lagrangian: list = field(default_factory=list)
    primal_residual_consensus: list = field(default_factory=list)
    primal_residual_z: list = field(default_factory=list)
    outer_se: list = field(default_factory=list)
    outer_sinr: list = field(default_factory=list)

    COLUMNS = (
        "outer_iter",
        "inner_iter",
        "sum_se",
        "aug_lagrangian",
        "primal_residual_consensus",
        "primal_residual_z",
    )

    def record(self, outer, inner, se, lagrangian, r_cons, r_z):
        self.outer_iter.append(int(outer))
        self.inner_iter.append(int(inner))
        self.sum_se.append(float(se))
        self.aug_lagrangian.append(float(lagrangian))
        self.primal_residual_consensus.append(float(r_cons))
        self.primal_residual_z.append(float(r_z))

    def rows(self):
        return list(zip(*(getattr(self, c) for c in self.COLUMNS)))

    def __len__(self):
        return len(self.inner_iter)


@dataclass
class SolveResult:
    """Output of one THEREON solve.

    ``precoders`` are the effective per-subpulse precoders F_l (L, n_tx, n_s);
    ``combiners`` are the MMSE combiners (SU) or scalar receivers (MU).
    """

    f_set: DpsAnalogPrecoder
    f_digital: np.ndarray
    precoders: np.ndarray
    combiners: np.ndarray
    filter: np.ndarray
    sum_se: float
    per_user_se: np.ndarray
    radar_sinr: float
    gamma: float
    trace: ConvergenceTrace
    n_outer: int
    n_inner: int
    architecture: str = "dps"

    @property
    def radar_sinr_db(self):
        return 10.0 * np.log10(self.radar_sinr) if self.radar_sinr > 0 else -np.inf

    @property
    def feasible(self):
        return bool(self.radar_sinr >= self.gamma * (1.0 - 1e-6))


# ---------------------------------------------------------------- helpers


def _check_architecture(architecture):
    if architecture not in ARCHITECTURES:
        raise ValueError(f"architecture must be one of {ARCHITECTURES}, got {architecture!r}")
    return architecture


def _final_precoders(state, architecture, budget=None):
    """Deployable precoders; the hybrid is scaled down if it overshoots ``budget``."""
    if architecture == "digital":
        return state.x
    F = state.hybrid()
    if budget is not None:
        energy = np.linalg.norm(F) ** 2
        if energy > budget:
            F = F * np.sqrt(budget / energy)
    return F


def sum_rate(problem, precoders):
    """Sum over subpulses (and users) of the achieved rate in bits/s/Hz.

    The single-user rate is the one reached with the MMSE combiner,
    log2|I + H F F^H H^H / s2|, which stays defined when F_l drops streams and
    the combiner loses rank. Returns ``(sum, per_user)``; ``per_user`` is None
    for single-user problems.
    """
    if problem.is_mu:
        rates = comm.mu_miso_rate(problem.users, precoders)
        per_user = rates.sum(axis=0)
        return float(per_user.sum()), per_user
    rates = comm.achievable_rate(problem.channel, precoders, problem.cfg.noise_var_comm)
    return float(np.sum(rates)), None


def _residuals(state, architecture):
    r_z = np.linalg.norm(state.x - state.z)
    if architecture == "digital":
        return 0.0, r_z
    return np.linalg.norm(state.x - state.hybrid()), r_z


def _n_streams(problem):
    return problem.users.n_users if problem.is_mu else problem.cfg.n_streams


def initial_state(problem, architecture="dps", seed=0, rho1=20.0, rho2=20.0):
    """Random feasible starting point.

    Analog phases are uniform, amplitudes 1/sqrt(n_tx), digital entries CN(0, 1);
    the hybrid precoder is scaled to spend exactly the energy budget and used
    for both consensus copies. Duals start at zero and U/W come from one
    WMMSE pass.
    """
    _check_architecture(architecture)
    cfg = problem.cfg
    rng = substream(seed, "init")
    n_s = _n_streams(problem)
    phases = rng.uniform(0.0, 2 * np.pi, cfg.n_tx)
    amps = np.full(cfg.n_tx, 1.0 / np.sqrt(cfg.n_tx))
    f_set = DpsAnalogPrecoder(amps, phases, cfg.n_rf)
    f_digital = complex_normal(rng, (cfg.n_subpulses, cfg.n_rf, n_s))
    hybrid = solvers.hybrid_precoders(f_set, f_digital)
    scale = np.sqrt(cfg.energy_budget) / np.linalg.norm(hybrid)
    f_digital = f_digital * scale
    hybrid = hybrid * scale
    zeros = np.zeros_like(hybrid)
    state = AdmmState(
        x=hybrid.copy(),
        z=hybrid.copy(),
        u=None,
        w=None,
        d1=zeros.copy(),
        d2=zeros.copy(),
        f_set=f_set,
        f_digital=f_digital,
        rho1=rho1,
        rho2=rho2,
    )
    return solvers.update_comm_receivers(problem, state)


# ---------------------------------------------------------------- inner loop


def consensus_admm(
    problem,
    v,
    state,
    architecture="dps",
    max_iter=100,
    tol=None,
    trace=None,
    outer_iter=0,
    phi=None,
    sinr_margin=0.0,
):
    """Consensus-ADMM for fixed radar filter ``v``.

    Runs U -> W -> X -> Z -> F_D -> F_set -> duals until both primal
    residuals and the change of X between iterations fall below ``tol``
    (default 1e-5 sqrt(n_tx n_s)), or for ``max_iter`` iterations. The
    change test keeps the loop going while the WMMSE blocks still move X
    even though the consensus constraints are already met. The Z copy enforces the threshold ``gamma (1 + sinr_margin)``.
    ``state`` is updated in place and returned together with the number of
    iterations used.
    """
    _check_architecture(architecture)
    if phi is None:
        phi = kernels.build_phi_kernels(v, problem.scene)
    boost = 1.0 + sinr_margin
    eig = solvers.constraint_eig(phi, problem.gamma * boost)
    alpha = problem.alpha(v) * boost
    n_tx = problem.cfg.n_tx
    if tol is None:
        tol = 1e-5 * np.sqrt(n_tx * _n_streams(problem))
    if trace is None:
        trace = ConvergenceTrace()

    it = 0
    for it in range(1, max_iter + 1):
        x_prev = state.x
        solvers.update_comm_receivers(problem, state)
        state.x, _ = solvers.solve_energy_constrained(
            *solvers.x_subproblem(problem, state, architecture), problem.energy_budget
        )
        try:
            state.z, _ = solvers.update_z(state.x, state.d2, state.rho2, eig, alpha)
        except RadarConstraintUnreachable as exc:
            raise RadarConstraintUnreachable(
                f"{exc} (outer {outer_iter}, inner {it}, constraint gap {exc.gap:.6g})",
                gap=exc.gap,
            ) from exc
        if architecture != "digital":
            state.f_digital = solvers.update_fd(state.f_set, state.x, state.d1, state.rho1)
            state.f_set = solvers.update_fset(
                state.x, state.f_digital, state.d1, state.rho1, n_tx, architecture
            )
        solvers.update_duals(state, architecture)

        r_cons, r_z = _residuals(state, architecture)
        se, _ = sum_rate(problem, _final_precoders(state, architecture, problem.energy_budget))
        trace.record(
            outer_iter,
            it,
            se,
            solvers.augmented_lagrangian(problem, state, architecture),
            r_cons,
            r_z,
        )
        if max(r_cons, r_z, np.linalg.norm(state.x - x_prev)) <= tol:
            break
    return state, it


# ---------------------------------------------------------------- outer loop


def _radar_filter(problem, precoders):
    theta = kernels.build_theta_kernels(precoders, problem.scene)
    return solvers.update_radar_filter(theta, problem.cfg.noise_var_radar)


def _check_threshold(problem, phi, v):
    lam_max = np.linalg.eigvalsh(phi.constraint_matrices(problem.gamma))[:, -1].max()
    alpha = problem.alpha(v)
    if problem.energy_budget * lam_max < alpha:
        raise ThresholdInfeasible(
            "threshold infeasible: best radar-only precoder reaches "
            f"{problem.energy_budget * lam_max:.6g} < {alpha:.6g}"
        )


def thereon(
    problem,
    architecture="dps",
    state=None,
    n_outer=10,
    max_inner=100,
    outer_tol=1e-4,
    inner_tol=None,
    seed=0,
    rho1=20.0,
    rho2=20.0,
    sinr_margin=1e-3,
):
    """Alternate the GEVD radar-filter update and the consensus-ADMM precoder design.

    The ADMM state (including duals) is carried over between outer rounds.
    Stops after ``n_outer`` rounds or once the sum SE changes by less than
    ``outer_tol``. The inner loop aims ``sinr_margin`` (relative) above the
    threshold so the residual consensus error of the hybrid precoder does not
    push the final SINR below it. Raises :class:`ThresholdInfeasible` when
    the threshold cannot be met for the first filter.
    """
    _check_architecture(architecture)
    if state is None:
        state = initial_state(problem, architecture, seed=seed, rho1=rho1, rho2=rho2)
    trace = ConvergenceTrace()
    n_inner = 0
    prev_se = None
    precoders = _final_precoders(state, architecture)
    t = 0
    for t in range(1, n_outer + 1):
        v, _ = _radar_filter(problem, precoders)
        phi = kernels.build_phi_kernels(v, problem.scene)
        if t == 1:
            _check_threshold(problem, phi, v)
        state, used = consensus_admm(
            problem,
            v,
            state,
            architecture,
            max_iter=max_inner,
            tol=inner_tol,
            trace=trace,
            outer_iter=t,
            phi=phi,
            sinr_margin=sinr_margin,
        )
        n_inner += used
        precoders = _final_precoders(state, architecture, problem.energy_budget)
        se, _ = sum_rate(problem, precoders)
        trace.outer_se.append(se)
        trace.outer_sinr.append(
            kernels.sinr_precoder_form(precoders, phi, problem.cfg.noise_var_radar, v)
        )
        if prev_se is not None and abs(se - prev_se) < outer_tol:
            break
        prev_se = se

    v, sinr = _radar_filter(problem, precoders)
    se, per_user = sum_rate(problem, precoders)
    if problem.is_mu:
        combiners = comm.mu_miso_update_u(problem.users, precoders)
    else:
        combiners = comm.update_combiner(
            problem.channel, precoders, problem.cfg.noise_var_comm
        )
    f_set, f_digital = state.f_set, state.f_digital
    if architecture != "digital":
        f_set = f_set.with_split_phases()
        raw = np.linalg.norm(state.hybrid())
        if raw > 0:
            f_digital = f_digital * (np.linalg.norm(precoders) / raw)
    return SolveResult(
        f_set=f_set,
        f_digital=f_digital,
        precoders=precoders,
        combiners=combiners,
        filter=v,
        sum_se=se,
        per_user_se=per_user,
        radar_sinr=sinr,
        gamma=problem.gamma,
        trace=trace,
        n_outer=t,
        n_inner=n_inner,
        architecture=architecture,
    )


def thereon_multistart(problem, architecture="dps", seeds=(0,), **kwargs):
    """Best of several THEREON runs from independent random initial points.

    Feasible solutions beat infeasible ones, then the larger sum SE wins.
    Starts that fail with :class:`ThresholdInfeasible` or
    :class:`RadarConstraintUnreachable` are skipped; if all fail the last
    error is raised.
    """
    best, error = None, None
    for seed in seeds:
        try:
            result = thereon(problem, architecture, seed=seed, **kwargs)
        except (ThresholdInfeasible, RadarConstraintUnreachable) as exc:
            error = exc
            continue
        if best is None or (result.feasible, result.sum_se) > (best.feasible, best.sum_se):
            best = result
    if best is None:
        if error is None:
            raise ValueError("seeds must not be empty")
        raise error
    return best


def thereon_mu_miso(problem, architecture="dps", **kwargs):
    """THEREON with the scalar MU-MISO WMMSE updates; ``problem.users`` must be set."""
    if not problem.is_mu:
        raise ValueError("problem has no MU-MISO users")
    if problem.users.channels.shape[1] != problem.cfg.n_tx:
        raise ValueError("user channels do not match n_tx")
    return thereon(problem, architecture, **kwargs)


# ---------------------------------------------------------------- detection


def detection_probability(sinr, p_fa):
    """P_d = Q_1(sqrt(2 sinr), sqrt(-2 ln p_fa)) for a Swerling-type detector.

    Q_1(a, b) is the survival function of a noncentral chi-square with two
    degrees of freedom and noncentrality a^2, evaluated at b^2.
    """
    if not 0.0 < p_fa < 1.0:
        raise ValueError(f"p_fa must lie in (0, 1), got {p_fa!r}")
    sinr = np.asarray(sinr, dtype=float)
    if np.any(sinr < 0):
        raise ValueError("sinr must be >= 0")
    b2 = -2.0 * np.log(p_fa)
    a2 = 2.0 * sinr
    with np.errstate(invalid="ignore"):
        pd = np.where(a2 > 0, stats.ncx2.sf(b2, 2, np.where(a2 > 0, a2, 1.0)), p_fa)
    pd = np.where(np.isinf(a2), 1.0, pd)
    return float(pd) if pd.ndim == 0 else pd
