"""Experiment configuration files.

Grammar (UTF-8, one statement per line)::

    # comment            ; comment
    [section]            one of: experiment, system, scene, solver
    key = value          value is an int, float, bare word, or a [a, b, ...] list

Keys may appear before any section header or inside their own section. An
empty file yields the default experiment: single-user MIMO, 32 antennas,
4 RF chains, gamma = 12 dB, DPS only, one trial.
"""

import ast
import dataclasses
from dataclasses import dataclass

from ..model import SystemConfig

SCENARIOS = ("su-mimo", "mu-miso")
BASELINES = ("dps", "sps", "fully-digital")
SWEEP_KEYS = ("gamma_db", "n_rf", "n_users")


class ConfigError(ValueError):
    """Invalid configuration; ``key`` and ``line`` locate the offending entry."""

    def __init__(self, message, key=None, line=None):
        where = []
        if key is not None:
            where.append(f"key '{key}'")
        if line is not None:
            where.append(f"line {line}")
        super().__init__(f"{message} ({', '.join(where)})" if where else message)
        self.key = key
        self.line = line


@dataclass(frozen=True)
class ExperimentConfig:
    # [experiment]
    scenario: str = "su-mimo"
    baselines: tuple = ("dps",)
    trials: int = 1
    seed: int = 0
    out: str = "results"
    record_timing: bool = False
    gamma_db: tuple = (12.0,)
    n_users: tuple = (4,)
    # [system]
    n_tx: int = 32
    n_rf: tuple = (4,)
    n_rx: int = 4
    n_rad: int = 4
    n_streams: int = 4
    n_subpulses: int = 16
    n_path: int = 16
    energy_budget: float = 10.0
    noise_var_comm: float = 0.1
    noise_var_radar: float = 0.1
    spacing_over_lambda_tx: float = 0.5
    spacing_over_lambda_rx: float = 0.5
    # [scene]
    target_angle_deg: float = 0.0
    target_power: float = 10.0
    target_shape: float = 15.0
    target_length: int = 6
    n_clutter: int = 31
    clutter_power: float = 1.0
    clutter_shape: float = 1.2
    clutter_length: int = 8
    doppler_hz: float = 0.0
    sample_rate_hz: float = 1.0
    # [solver]
    rho1: float = 20.0
    rho2: float = 20.0
    max_inner_iter: int = 100
    max_outer_iter: int = 10
    outer_tol: float = 1e-4
    n_init: int = 1

    @property
    def sweep(self):
        """``(key, values)`` of the swept axis, or ``(None, (None,))``."""
        for key in SWEEP_KEYS:
            values = getattr(self, key)
            if len(values) > 1:
                return key, values
        return None, (None,)

    def points(self):
        """Per-sweep-point overrides ``{'gamma_db': g, 'n_rf': r, 'n_users': u}``."""
        key, values = self.sweep
        base = {k: getattr(self, k)[0] for k in SWEEP_KEYS}
        if key is None:
            return [base]
        return [{**base, key: v} for v in values]

    def system_config(self, point):
        """SystemConfig of one sweep point.

        When RF chains are swept, the stream count is capped by n_rf. In the
        MU-MISO scenario there is one stream per single-antenna user.
        """
        n_rf = point["n_rf"]
        if self.scenario == "mu-miso":
            n_streams, n_rx = point["n_users"], 1
        else:
            n_streams, n_rx = self.n_streams, self.n_rx
            if len(self.n_rf) > 1:
                n_streams = min(n_streams, n_rf)
        return SystemConfig(
            n_tx=self.n_tx,
            n_rf=n_rf,
            n_rx=n_rx,
            n_rad=self.n_rad,
            n_streams=n_streams,
            n_subpulses=self.n_subpulses,
            energy_budget=self.energy_budget,
            noise_var_comm=self.noise_var_comm,
            noise_var_radar=self.noise_var_radar,
            spacing_over_lambda_tx=self.spacing_over_lambda_tx,
            spacing_over_lambda_rx=self.spacing_over_lambda_rx,
        )


_SECTIONS = {
    "experiment": (
        "scenario",
        "baselines",
        "trials",
        "seed",
        "out",
        "record_timing",
        "gamma_db",
        "n_users",
    ),
    "system": (
        "n_tx",
        "n_rf",
        "n_rx",
        "n_rad",
        "n_streams",
        "n_subpulses",
        "n_path",
        "energy_budget",
        "noise_var_comm",
        "noise_var_radar",
        "spacing_over_lambda_tx",
        "spacing_over_lambda_rx",
    ),
    "scene": (
        "target_angle_deg",
        "target_power",
        "target_shape",
        "target_length",
        "n_clutter",
        "clutter_power",
        "clutter_shape",
        "clutter_length",
        "doppler_hz",
        "sample_rate_hz",
    ),
    "solver": ("rho1", "rho2", "max_inner_iter", "max_outer_iter", "outer_tol", "n_init"),
}
_SECTION_OF = {key: sec for sec, keys in _SECTIONS.items() for key in keys}
_FIELDS = {f.name: f for f in dataclasses.fields(ExperimentConfig)}

_POSITIVE_INT = {
    "trials": 1,
    "n_tx": 1,
    "n_rx": 1,
    "n_rad": 1,
    "n_streams": 1,
    "n_subpulses": 1,
    "n_path": 1,
    "target_length": 1,
    "clutter_length": 1,
    "max_inner_iter": 1,
    "max_outer_iter": 1,
    "n_init": 1,
    "n_clutter": 0,
    "seed": 0,
}
_POSITIVE_FLOAT = (
    "energy_budget",
    "noise_var_comm",
    "noise_var_radar",
    "spacing_over_lambda_tx",
    "spacing_over_lambda_rx",
    "target_power",
    "clutter_power",
    "sample_rate_hz",
    "rho1",
    "rho2",
    "outer_tol",
)


def _literal(text):
    try:
        return ast.literal_eval(text)
    except (ValueError, SyntaxError):
        return text


def _as_int(value, key, line):
    if isinstance(value, bool) or not isinstance(value, int):
        raise ConfigError(f"expected an integer, got {value!r}", key, line)
    return value


def _as_float(value, key, line):
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise ConfigError(f"expected a number, got {value!r}", key, line)
    return float(value)


def _coerce(key, raw, line):
    value = _literal(raw)
    if key in ("scenario", "out"):
        if not isinstance(value, str) or not value:
            raise ConfigError(f"expected a word, got {raw!r}", key, line)
        return value
    if key == "record_timing":
        if isinstance(value, str) and value.lower() in ("true", "false"):
            return value.lower() == "true"
        if isinstance(value, bool):
            return value
        raise ConfigError(f"expected true or false, got {raw!r}", key, line)
    if key == "baselines":
        if isinstance(value, str):
            value = [w.strip() for w in raw.strip("[]").split(",")]
        if not isinstance(value, (list, tuple)):
            raise ConfigError(f"expected a list of baselines, got {raw!r}", key, line)
        return tuple(value)
    if key in SWEEP_KEYS:
        items = value if isinstance(value, (list, tuple)) else [value]
        conv = _as_float if key == "gamma_db" else _as_int
        return tuple(conv(v, key, line) for v in items)
    if _FIELDS[key].type is int:
        return _as_int(value, key, line)
    return _as_float(value, key, line)


def _check(values, lines):
    def fail(msg, key):
        raise ConfigError(msg, key, lines.get(key))

    if values["scenario"] not in SCENARIOS:
        fail(f"scenario must be one of {SCENARIOS}", "scenario")
    if not values["baselines"]:
        fail("baselines must not be empty", "baselines")
    for b in values["baselines"]:
        if b not in BASELINES:
            fail(f"unknown baseline {b!r}; choose from {BASELINES}", "baselines")
    if len(set(values["baselines"])) != len(values["baselines"]):
        fail("duplicate baseline", "baselines")
    for key, minimum in _POSITIVE_INT.items():
        if values[key] < minimum:
            fail(f"must be >= {minimum}", key)
    for key in _POSITIVE_FLOAT:
        if not values[key] > 0:
            fail("must be > 0", key)
    for key in ("target_shape", "clutter_shape"):
        if not values[key] > 1:
            fail("shape must be > 1", key)
    swept = [k for k in SWEEP_KEYS if len(values[k]) > 1]
    for key in SWEEP_KEYS:
        if not values[key]:
            fail("sweep list must be non-empty", key)
    if len(swept) > 1:
        fail(f"only one sweep axis allowed, got {swept}", swept[1])
    for key in ("n_rf", "n_users"):
        if min(values[key]) < 1:
            fail("must be >= 1", key)


def _check_points(cfg, lines):
    for point in cfg.points():
        try:
            sys_cfg = cfg.system_config(point)
        except ValueError as exc:
            msg = str(exc)
            if "divisible" in msg:
                key = "n_tx" if "n_tx" in lines else "n_rf"
            elif "n_streams" in msg:
                key = "n_users" if cfg.scenario == "mu-miso" else "n_streams"
            else:
                key = msg.split()[0]
            raise ConfigError(msg, key, lines.get(key)) from None
        if cfg.scenario == "mu-miso" and sys_cfg.n_streams > sys_cfg.n_rf:
            raise ConfigError("n_users must not exceed n_rf", "n_users", lines.get("n_users"))


def parse_config_text(text):
    """Parse configuration text into a validated :class:`ExperimentConfig`."""
    values = {name: f.default for name, f in _FIELDS.items()}
    lines = {}
    section = None
    for lineno, raw in enumerate(text.splitlines(), start=1):
        stripped = raw.split("#", 1)[0].split(";", 1)[0].strip()
        if not stripped:
            continue
        if stripped.startswith("["):
            if not stripped.endswith("]") or "=" in stripped:
                raise ConfigError(f"malformed section header {stripped!r}", line=lineno)
            section = stripped[1:-1].strip()
            if section not in _SECTIONS:
                raise ConfigError(f"unknown section [{section}]", line=lineno)
            continue
        if "=" not in stripped:
            raise ConfigError(f"expected 'key = value', got {stripped!r}", line=lineno)
        key, val = (s.strip() for s in stripped.split("=", 1))
        if key not in _FIELDS:
            raise ConfigError("unknown key", key, lineno)
        if section is not None and _SECTION_OF[key] != section:
            raise ConfigError(
                f"belongs in section [{_SECTION_OF[key]}], not [{section}]", key, lineno
            )
        if key in lines:
            raise ConfigError(f"duplicate key (first set on line {lines[key]})", key, lineno)
        if not val:
            raise ConfigError("missing value", key, lineno)
        values[key] = _coerce(key, val, lineno)
        lines[key] = lineno
    _check(values, lines)
    cfg = ExperimentConfig(**values)
    _check_points(cfg, lines)
    return cfg


def parse_config(path):
    """Read and validate a configuration file."""
    try:
        with open(path, encoding="utf-8") as fh:
            text = fh.read()
    except (OSError, UnicodeDecodeError) as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    return parse_config_text(text)
