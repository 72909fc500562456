import numpy as np
import pytest
from hypothesis import strategies as st

from sideband_tomo.gaussian import TmstParams

SQUEEZED = TmstParams(n_sq=0.320, n_th=0.471, r_th=0.5)


def tmst_params(max_photons=5.0):
    """Hypothesis strategy over valid TMST parameters."""
    photons = st.floats(0.0, max_photons, allow_nan=False)
    amp = st.floats(-3.0, 3.0, allow_nan=False)
    return st.builds(lambda re, im, n_sq, n_th, r_th: TmstParams(complex(re, im), n_sq, n_th, r_th),
                     amp, amp, photons, photons, st.floats(0.0, 1.0))


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


# criterion number -> (passed, detail); filled by test_acceptance.py
ACCEPTANCE = {}


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for num in sorted(ACCEPTANCE):
        ok, detail = ACCEPTANCE[num]
        terminalreporter.write_line(f"criterion {num}: {'PASS' if ok else 'FAIL'}  {detail}")
