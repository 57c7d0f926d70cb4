import numpy as np
import pytest

from dfrc_hbf.model import (
    ExtendedScattererStats,
    RadarScene,
    SystemConfig,
    build_scene,
    complex_normal,
    exponential_covariance,
)


def random_psd(rng, n, complex_=True):
    A = complex_normal(rng, (n, n)) if complex_ else rng.standard_normal((n, n))
    return A @ A.conj().T / n


def small_scene(rng, n_tx=4, n_rad=2, n_sub=3, l_tar=2, n_clutter=2, l_clutter=None, complex_cov=False):
    """Random small scene with possibly unequal FIR lengths."""
    target = ExtendedScattererStats(rng.uniform(-1, 1), random_psd(rng, l_tar, complex_cov))
    clutter = []
    for _ in range(n_clutter):
        length = l_clutter if l_clutter is not None else int(rng.integers(1, 4))
        clutter.append(ExtendedScattererStats(rng.uniform(0, 2 * np.pi), random_psd(rng, length, complex_cov)))
    return RadarScene(target, clutter, n_subpulses=n_sub, n_tx=n_tx, n_rad=n_rad)


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


@pytest.fixture(scope="session")
def desk_cfg():
    return SystemConfig(n_tx=16, n_rf=4, n_rx=4, n_rad=4, n_streams=4, n_subpulses=8)


@pytest.fixture(scope="session")
def desk_scene(desk_cfg):
    return build_scene(desk_cfg)


__all__ = ["random_psd", "small_scene", "exponential_covariance"]


ACCEPTANCE = {}


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(ACCEPTANCE):
        terminalreporter.write_line(ACCEPTANCE[number])
