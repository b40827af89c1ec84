import math

import numpy as np
import pytest
from hypothesis import HealthCheck, settings
from scipy.integrate import quad

from chaoscomm.waveform import WaveformParams, basis_pulse

settings.register_profile("default", deadline=None, max_examples=40,
                          suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("default")


@pytest.fixture
def params():
    return WaveformParams(f=1.0, beta=0.65, oversampling=16)


def quad_correlation(shift, params, span=60):
    """``int p(t) p(t + shift) dt`` by piecewise adaptive quadrature (independent oracle)."""
    f = params.f
    total = 0.0
    for k in range(-span, 2):
        a, b = k / f, (k + 1) / f
        kinks = [x for x in (-shift, 1.0 / f - shift, 0.0) if a < x < b]
        val, _ = quad(lambda t: basis_pulse(t, params) * basis_pulse(t + shift, params),
                      a, b, points=kinks or None, epsabs=1e-14, epsrel=1e-13, limit=200)
        total += val
    return total


def random_symbols(n, seed):
    return 2.0 * np.random.default_rng(seed).integers(0, 2, n) - 1.0


def bipolar_lists(min_size=1, max_size=64):
    from hypothesis import strategies as st
    return st.lists(st.sampled_from([-1.0, 1.0]), min_size=min_size, max_size=max_size)


E_P = 1.352085009556          # quadrature of p^2, beta=0.65, f=1
C_TWO_PATH_DELAYED = -0.046177152999   # e^-0.6 * int p(t) p(t+1) dt
R_HALF = 0.372804474894       # int p(t) p(t +/- 0.5) dt
SQRT_EPS = math.sqrt(np.finfo(float).eps)


def pytest_terminal_summary(terminalreporter):
    import sys
    mod = sys.modules.get("test_acceptance")
    if mod is None or not mod.RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for line in sorted(mod.RESULTS, key=lambda s: int(s.split()[1].rstrip(":"))):
        terminalreporter.write_line(line)
