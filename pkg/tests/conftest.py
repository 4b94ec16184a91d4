import pytest

from balwaves.model import BUILTIN_NAMES, builtin, derive_constants
from balwaves.spectrum import (
    HomoclinicOperator,
    PeriodicOperator,
    floquet_spectrum,
    linearize,
    pulse_unstable_eigenvalue,
)
from balwaves.waves import compute_periodic_large, compute_periodic_small, compute_pulse

ACCEPTANCE_LINES: list[str] = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)


@pytest.fixture(scope="session")
def models():
    return {name: builtin(name) for name in BUILTIN_NAMES}


@pytest.fixture(scope="session")
def constants(models):
    return {name: derive_constants(m) for name, m in models.items()}


@pytest.fixture(scope="session")
def pulses(models, constants):
    return {name: compute_pulse(models[name], constants[name]) for name in models}


@pytest.fixture(scope="session")
def pulse_eigen(models, pulses):
    out = {}
    for name, p in pulses.items():
        lc = linearize(models[name], p)
        op = HomoclinicOperator(lc)
        out[name] = (lc, op, pulse_unstable_eigenvalue(lc, float(models[name].dg(0.0)), op=op))
    return out


@pytest.fixture(scope="session")
def bf_small(models, constants):
    m, k = models["burgers-fisher"], constants["burgers-fisher"]
    return {eps: compute_periodic_small(m, k, eps) for eps in (0.02, 0.01, 0.005)}


LARGE_LADDER = (0.05, 0.02, 0.01, 0.005, 0.002)


@pytest.fixture(scope="session")
def bf_large(models, constants, pulses):
    m, k, p = models["burgers-fisher"], constants["burgers-fisher"], pulses["burgers-fisher"]
    return {eps: compute_periodic_large(m, k, eps, p) for eps in LARGE_LADDER}


@pytest.fixture(scope="session")
def bf_small_spectra(models, bf_small):
    m = models["burgers-fisher"]
    out = {}
    for eps, w in bf_small.items():
        lc = linearize(m, w)
        op = PeriodicOperator(lc)
        out[eps] = (lc, op, floquet_spectrum(lc, op=op))
    return out


@pytest.fixture(scope="session")
def bf_large_spectra(models, bf_large, pulse_eigen):
    m = models["burgers-fisher"]
    lam_bar = pulse_eigen["burgers-fisher"][2].value
    r = 0.5 * lam_bar
    window = (lam_bar - r, lam_bar + r, -r, r)
    out = {}
    for eps in (0.02, 0.01):
        lc = linearize(m, bf_large[eps])
        op = PeriodicOperator(lc)
        out[eps] = (lc, op, floquet_spectrum(lc, window, op=op))
    return out
