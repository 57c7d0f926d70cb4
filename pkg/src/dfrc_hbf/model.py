"""System configuration, array geometry, channels and extended-scatterer statistics.

Angles are in radians throughout; degrees only appear at the CLI boundary.
"""

from dataclasses import dataclass
from functools import cached_property

import numpy as np

from ._validation import check_count, check_hermitian_psd, check_positive

# Fixed component ids for the per-component RNG substreams.
_STREAMS = {
    "channel": 0,
    "init": 1,
    "target": 2,
    "clutter": 3,
    "symbols": 4,
    "noise": 5,
    "users": 6,
}


def substream(seed, component, *index):
    """Independent, portable generator for one simulation component.

    ``substream(7, "channel", 3)`` always yields the same PCG64 stream and is
    statistically independent of ``substream(7, "init", 3)``.
    """
    if isinstance(seed, np.random.Generator):
        return seed
    key = (_STREAMS[component],) + tuple(int(i) for i in index)
    return np.random.default_rng(np.random.SeedSequence(seed, spawn_key=key))


def complex_normal(rng, size):
    """Draws from CN(0, 1)."""
    return (rng.standard_normal(size) + 1j * rng.standard_normal(size)) / np.sqrt(2.0)


@dataclass(frozen=True)
class SystemConfig:
    """Dimensions, energy budget and noise levels of the DFRC transmitter."""

    n_tx: int = 32
    n_rf: int = 4
    n_rx: int = 4
    n_rad: int = 4
    n_streams: int = 4
    n_subpulses: int = 16
    energy_budget: float = 10.0
    noise_var_comm: float = 0.1
    noise_var_radar: float = 0.1
    spacing_over_lambda_tx: float = 0.5
    spacing_over_lambda_rx: float = 0.5

    def __post_init__(self):
        for name in ("n_tx", "n_rf", "n_rx", "n_rad", "n_streams", "n_subpulses"):
            check_count(getattr(self, name), name)
        for name in (
            "energy_budget",
            "noise_var_comm",
            "noise_var_radar",
            "spacing_over_lambda_tx",
            "spacing_over_lambda_rx",
        ):
            check_positive(getattr(self, name), name)
        if self.n_tx % self.n_rf:
            raise ValueError("n_tx not divisible by n_rf")
        if self.n_streams > self.n_rf:
            raise ValueError("n_streams must not exceed n_rf")

    @property
    def subarray_size(self):
        return self.n_tx // self.n_rf

    def selection_matrix(self):
        return selection_matrix(self.n_tx, self.n_rf)


def selection_matrix(n_tx, n_rf):
    """Binary block-diagonal antenna-to-RF-chain map, shape (n_tx, n_rf)."""
    return np.kron(np.eye(n_rf), np.ones((n_tx // n_rf, 1)))


@dataclass(frozen=True)
class DpsAnalogPrecoder:
    """Per-antenna DPS gains ``A_m exp(j phi_m)`` feeding a partially connected array.

    ``split_phases`` holds the two phase-shifter settings per antenna, shape
    (n_tx, 2), when they have been computed.
    """

    amplitudes: np.ndarray
    phases: np.ndarray
    n_rf: int
    split_phases: np.ndarray = None

    def __post_init__(self):
        amp = np.asarray(self.amplitudes, dtype=float)
        ph = np.mod(np.asarray(self.phases, dtype=float), 2 * np.pi)
        if amp.ndim != 1 or ph.shape != amp.shape:
            raise ValueError("amplitudes and phases must be 1-D of equal length")
        n_tx = amp.size
        if n_tx % self.n_rf:
            raise ValueError("n_tx not divisible by n_rf")
        cap = 2.0 / np.sqrt(n_tx)
        if np.any(amp < 0) or np.any(amp > cap * (1 + 1e-12)):
            raise ValueError(f"amplitudes must lie in [0, {cap:.6g}]")
        object.__setattr__(self, "amplitudes", np.minimum(amp, cap))
        object.__setattr__(self, "phases", ph)
        if self.split_phases is not None:
            sp = np.asarray(self.split_phases, dtype=float)
            if sp.shape != (n_tx, 2):
                raise ValueError("split_phases must have shape (n_tx, 2)")
            object.__setattr__(self, "split_phases", sp)

    @property
    def n_tx(self):
        return self.amplitudes.size

    @property
    def gains(self):
        """Complex diagonal of F_set."""
        return self.amplitudes * np.exp(1j * self.phases)

    def analog_matrix(self):
        """F_RF = diag(f) P."""
        return self.gains[:, None] * selection_matrix(self.n_tx, self.n_rf)

    def with_split_phases(self):
        from .solvers import dps_phase_split

        psi1, psi2 = dps_phase_split(self.amplitudes, self.phases, self.n_tx)
        return DpsAnalogPrecoder(
            self.amplitudes, self.phases, self.n_rf, np.stack([psi1, psi2], axis=1)
        )


def steering_vector(angle, count, spacing_over_lambda=0.5):
    """Unit-norm ULA response; entry k is exp(j 2 pi d k sin(angle)) / sqrt(count)."""
    count = check_count(count, "count")
    check_positive(spacing_over_lambda, "spacing_over_lambda")
    k = np.arange(count)
    return np.exp(2j * np.pi * spacing_over_lambda * k * np.sin(angle)) / np.sqrt(count)


def generate_geometric_channel(cfg, n_path=16, seed=0, n_rx=None):
    """Narrowband geometric channel ``sqrt(1/P) sum_p g_p a_r(aoa_p) a_t(aod_p)^H``.

    Path gains are CN(0, 1); AoA and AoD are uniform on [0, 2 pi).
    ``seed`` may be an int or a ``numpy.random.Generator``.
    """
    n_path = check_count(n_path, "n_path")
    n_rx = cfg.n_rx if n_rx is None else n_rx
    rng = substream(seed, "channel")
    gains = complex_normal(rng, n_path)
    aoa = rng.uniform(0.0, 2 * np.pi, n_path)
    aod = rng.uniform(0.0, 2 * np.pi, n_path)
    kr = np.arange(n_rx)[:, None]
    kt = np.arange(cfg.n_tx)[:, None]
    a_r = np.exp(2j * np.pi * cfg.spacing_over_lambda_rx * kr * np.sin(aoa)) / np.sqrt(n_rx)
    a_t = np.exp(2j * np.pi * cfg.spacing_over_lambda_tx * kt * np.sin(aod)) / np.sqrt(cfg.n_tx)
    return np.sqrt(1.0 / n_path) * (a_r * gains) @ a_t.conj().T


def exponential_covariance(power, shape, length):
    """Toeplitz covariance ``power * shape**(-|m-n|)`` of an FIR with ``length`` taps."""
    check_positive(power, "power")
    if not shape > 1:
        raise ValueError(f"shape must be > 1, got {shape!r}")
    length = check_count(length, "length")
    idx = np.arange(length)
    return power * float(shape) ** (-np.abs(idx[:, None] - idx[None, :]))


@dataclass(frozen=True)
class ExtendedScattererStats:
    """Azimuth and second-order FIR statistics of an extended target or clutter bin."""

    angle: float
    covariance: np.ndarray

    def __post_init__(self):
        cov = check_hermitian_psd(np.atleast_2d(self.covariance), "covariance")
        if not np.any(cov.imag):
            cov = cov.real
        object.__setattr__(self, "covariance", cov)

    @property
    def fir_length(self):
        return self.covariance.shape[0]


@dataclass(frozen=True)
class RadarScene:
    """Extended target plus K stationary clutter bins seen by the radar receiver."""

    target: ExtendedScattererStats
    clutter: tuple = ()
    n_subpulses: int = 16
    n_tx: int = 32
    n_rad: int = 4
    spacing_over_lambda_tx: float = 0.5
    spacing_over_lambda_rx: float = 0.5
    doppler_hz: float = 0.0
    sample_rate_hz: float = 1.0

    def __post_init__(self):
        object.__setattr__(self, "clutter", tuple(self.clutter))
        check_count(self.n_subpulses, "n_subpulses")
        check_count(self.n_tx, "n_tx")
        check_count(self.n_rad, "n_rad")
        check_positive(self.sample_rate_hz, "sample_rate_hz")

    @property
    def n_clutter(self):
        return len(self.clutter)

    @property
    def l_obs(self):
        longest = max([self.target.fir_length] + [c.fir_length for c in self.clutter])
        return self.n_subpulses + longest - 1

    def steering_matrix(self, angle):
        """Two-way spatial response a_rad(angle) a_t(angle)^H, shape (n_rad, n_tx)."""
        a_r = steering_vector(angle, self.n_rad, self.spacing_over_lambda_rx)
        a_t = steering_vector(angle, self.n_tx, self.spacing_over_lambda_tx)
        return np.outer(a_r, a_t.conj())

    @cached_property
    def target_matrix(self):
        return self.steering_matrix(self.target.angle)

    @cached_property
    def clutter_matrices(self):
        if not self.clutter:
            return np.zeros((0, self.n_rad, self.n_tx), dtype=complex)
        return np.stack([self.steering_matrix(c.angle) for c in self.clutter])

    def doppler_phases(self):
        """Diagonal of the Doppler matrix over the observation window."""
        n = np.arange(1, self.l_obs + 1)
        return np.exp(2j * np.pi * n * self.doppler_hz / self.sample_rate_hz)


def clutter_angles(n_clutter):
    """Homogeneous layout: bin i (1-based) sits at 2 pi (i - 1) / K."""
    return 2 * np.pi * np.arange(n_clutter) / max(n_clutter, 1)


def build_scene(
    cfg,
    target_angle=0.0,
    target_power=10.0,
    target_shape=15.0,
    target_length=6,
    n_clutter=31,
    clutter_power=1.0,
    clutter_shape=1.2,
    clutter_length=8,
    doppler_hz=0.0,
    sample_rate_hz=1.0,
    clutter_angles_rad=None,
):
    """Scene with an exponentially correlated target and K identical clutter bins."""
    target_length = check_count(target_length, "target_length")
    clutter_length = check_count(clutter_length, "clutter_length")
    n_clutter = check_count(n_clutter, "n_clutter", minimum=0)
    target = ExtendedScattererStats(
        target_angle, exponential_covariance(target_power, target_shape, target_length)
    )
    angles = clutter_angles(n_clutter) if clutter_angles_rad is None else clutter_angles_rad
    if len(angles) != n_clutter:
        raise ValueError("clutter_angles_rad length must equal n_clutter")
    cov = exponential_covariance(clutter_power, clutter_shape, clutter_length)
    clutter = tuple(ExtendedScattererStats(float(a), cov) for a in angles)
    return RadarScene(
        target=target,
        clutter=clutter,
        n_subpulses=cfg.n_subpulses,
        n_tx=cfg.n_tx,
        n_rad=cfg.n_rad,
        spacing_over_lambda_tx=cfg.spacing_over_lambda_tx,
        spacing_over_lambda_rx=cfg.spacing_over_lambda_rx,
        doppler_hz=doppler_hz,
        sample_rate_hz=sample_rate_hz,
    )
