import functools

import pytest

from noisyfb import analysis
from noisyfb.schemes import SystemParams

ACCEPTANCE_LINES = []


@functools.lru_cache(maxsize=None)
def operating_point(rate, dsnr_db, pe, N):
    """System and scheme at the snr where the analytic error bound meets ``pe``."""
    dsnr = 10 ** (dsnr_db / 10)
    snr = analysis.snr_for_target_rate(rate, N, pe, dsnr)
    sys_ = SystemParams.from_snr(snr, dsnr, N)
    return sys_, analysis.derive_scheme_params(sys_, pe)


@pytest.fixture(scope="session")
def point_a():
    return operating_point(4.0, 20.0, 1e-6, 19)


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
