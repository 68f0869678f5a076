import numpy as np
import pytest

from mkl_l01svm.data import Dataset, synth_2d
from mkl_l01svm.experiments import prepare
from mkl_l01svm.kernels import DEFAULT_SIGMAS, build_bank

SEP4_X = np.array([[0.0, 0.0], [0.0, 1.0], [3.0, 0.0], [3.0, 1.0]])
SEP4_Y = np.array([-1.0, -1.0, 1.0, 1.0])


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture
def sep4():
    """Four points, two per class, linearly separable along x1."""
    return Dataset(SEP4_X, SEP4_Y)


@pytest.fixture(scope="session")
def synth_prepared():
    """Normalized 200-point synthetic set and its 10-kernel bank."""
    stats, trn, _, bank = prepare(synth_2d(100, 0), None, DEFAULT_SIGMAS)
    return stats, trn, bank


def random_problem(rng, m, L, n=2):
    X = rng.normal(size=(m, n))
    y = np.where(np.arange(m) % 2 == 0, 1.0, -1.0)
    rng.shuffle(y)
    sigmas = np.sort(rng.uniform(0.3, 2.0, size=L))
    return Dataset(X, y), build_bank(X, sigmas)


# -- acceptance summary: one line per criterion -------------------------------

_CRITERIA = {}


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    rep = outcome.get_result()
    marker = item.get_closest_marker("criterion")
    if marker is None:
        return
    num, title = marker.args
    detail = "; ".join(f"{k}={v}" for k, v in item.user_properties)
    if rep.when == "setup" and rep.skipped:
        _CRITERIA[num] = ("SKIP", title, str(rep.longrepr[-1]) if rep.longrepr else "")
    elif rep.when == "call":
        status = "PASS" if rep.passed else ("SKIP" if rep.skipped else "FAIL")
        if rep.skipped and rep.longrepr:
            detail = str(rep.longrepr[-1])
        _CRITERIA[num] = (status, title, detail)
    elif rep.when == "setup" and rep.failed:
        _CRITERIA[num] = ("FAIL", title, "error during setup")


def pytest_terminal_summary(terminalreporter):
    if not _CRITERIA:
        return
    terminalreporter.section("acceptance criteria")
    for num in sorted(_CRITERIA):
        status, title, detail = _CRITERIA[num]
        line = f"criterion {num:>2}: {status}  {title}"
        terminalreporter.write_line(line + (f"  [{detail}]" if detail else ""))
