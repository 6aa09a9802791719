import numpy as np
import pytest

from mdcfronthaul import UplinkChannel


def scalar_channel(h=1.0, P=1.0, N0=1.0):
    return UplinkChannel((np.array([[h]], dtype=complex),), N0 * np.eye(1), P)


def random_pd(rng, n, scale=1.0, floor=0.1):
    a = rng.standard_normal((n, n)) + 1j * rng.standard_normal((n, n))
    return scale * (a @ a.conj().T / n + floor * np.eye(n))


def random_channel(rng, n_R=2, N_U=2, P=None):
    H = [rng.standard_normal((n_R, 1)) + 1j * rng.standard_normal((n_R, 1)) for _ in range(N_U)]
    return UplinkChannel(tuple(H), np.eye(n_R), P if P is not None else float(rng.uniform(0.5, 20)))


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


# one PASS/FAIL line per acceptance criterion at the end of the run
_CRITERIA = {}


def pytest_runtest_logreport(report):
    if "test_acceptance.py::" not in report.nodeid:
        return
    name = report.nodeid.split("::")[-1]
    detail = dict(report.user_properties).get("detail", "")
    if report.when == "call" or report.failed:
        prev = _CRITERIA.get(name)
        if prev is None or prev[0] == "PASS":
            _CRITERIA[name] = ("PASS" if report.passed else "FAIL", detail or (prev or ("", ""))[1])


def pytest_terminal_summary(terminalreporter):
    if not _CRITERIA:
        return
    terminalreporter.section("acceptance criteria")
    for name, (status, detail) in _CRITERIA.items():
        terminalreporter.write_line(f"{status} {name}" + (f"  [{detail}]" if detail else ""))
