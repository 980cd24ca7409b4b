import math

import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from bosecount.detectors import DetectorMatrix, validate_array

settings.register_profile(
    "default", deadline=None, max_examples=40,
    suppress_health_check=[HealthCheck.too_slow, HealthCheck.data_too_large],
)
settings.load_profile("default")


def random_psd(rng, rank_one=False):
    """Random 2x2 PSD detector matrix."""
    v = rng.standard_normal(2) + 1j * rng.standard_normal(2)
    m = np.outer(v, v.conj())
    if not rank_one:
        w = rng.standard_normal(2) + 1j * rng.standard_normal(2)
        m = m + rng.uniform(0, 1) * np.outer(w, w.conj())
    return m


def random_array(rng, M=2, rank_one=False, fill=None):
    """Random SubUnity array whose largest eigenvalue of the sum is ``fill``."""
    mats = [random_psd(rng, rank_one) for _ in range(M)]
    top = np.linalg.eigvalsh(sum(mats)).max()
    fill = rng.uniform(0.3, 0.95) if fill is None else fill
    mats = [m * fill / top for m in mats]
    return validate_array([
        DetectorMatrix(m[0, 0].real, m[1, 1].real, m[0, 1], str(i + 1)) for i, m in enumerate(mats)
    ])


def random_unitary_array(rng):
    """Complete two-detector array from a random 2x2 unitary (rank-one rows)."""
    th, ph, ch = rng.uniform(0, 2 * math.pi, 3)
    c, s = math.cos(th / 2), math.sin(th / 2)
    u = np.array([[c, s * np.exp(1j * ph)], [-s * np.exp(1j * ch), c * np.exp(1j * (ph + ch))]])
    mats = [np.outer(u[k].conj(), u[k]) for k in range(2)]
    return validate_array([DetectorMatrix(m[0, 0].real, m[1, 1].real, m[0, 1], str(i + 1)) for i, m in enumerate(mats)])


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


CRITERION_LINES: list[str] = []


def record_criterion(k: int, ok: bool, detail: str) -> bool:
    """Log one acceptance line; shown again in the terminal summary."""
    line = f"{'PASS' if ok else 'FAIL'} criterion {k}: {detail}"
    CRITERION_LINES.append(line)
    print(line)
    return ok


def pytest_terminal_summary(terminalreporter):
    if CRITERION_LINES:
        terminalreporter.write_sep("=", "acceptance criteria")
        for line in CRITERION_LINES:
            terminalreporter.write_line(line)
