import numpy as np
import pytest

from kalmanreg.data import Dataset


@pytest.fixture(scope="session")
def diabetes_csv(tmp_path_factory):
    """The 442x10 diabetes table (raw, unscaled) exported from scikit-learn's bundled copy."""
    datasets = pytest.importorskip("sklearn.datasets")
    frame = datasets.load_diabetes(scaled=False, as_frame=True).frame
    frame = frame.rename(columns={"target": "progression"})
    path = tmp_path_factory.mktemp("data") / "diabetes.csv"
    frame.to_csv(path, index=False)
    return path


def line_dataset(n=200, slope=2.0, intercept=1.0, seed=0):
    x = np.random.default_rng(seed).uniform(-1.0, 1.0, size=n)
    return Dataset(x.reshape(-1, 1), slope * x + intercept, ("x",), "y")


def ols_oracle(X, y):
    """Normal equations with an intercept column, solved directly."""
    A = np.column_stack([X, np.ones(len(y))])
    beta = np.linalg.solve(A.T @ A, A.T @ y)
    return beta[:-1], beta[-1]


_acceptance: dict[str, tuple[str, str]] = {}


def pytest_configure(config):
    config.addinivalue_line("markers", "acceptance(label): exit criterion, reported in the terminal summary")


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    rep = outcome.get_result()
    marker = item.get_closest_marker("acceptance")
    if marker is None:
        return
    label = marker.args[0]
    if rep.when == "call" or (rep.when == "setup" and not rep.passed):
        status = "PASS" if rep.passed else ("SKIP" if rep.skipped else "FAIL")
        _acceptance[label] = (status, item.nodeid)


def pytest_terminal_summary(terminalreporter):
    if not _acceptance:
        return
    terminalreporter.section("acceptance criteria")
    for label in sorted(_acceptance, key=lambda s: int(s.split()[0][2:])):
        status, _ = _acceptance[label]
        terminalreporter.write_line(f"[{status}] {label}")
