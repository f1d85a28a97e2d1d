import warnings

import pytest

from decisionfp.model import PRESETS, find_equilibria
from decisionfp.reduction import build_frame, build_manifold

# Lines recorded by the acceptance suite; printed once in the terminal summary.
ACCEPTANCE_LINES: list[str] = []


def record_acceptance(label: str, passed: bool, detail: str) -> None:
    ACCEPTANCE_LINES.append(f"{'PASS' if passed else 'FAIL'}  {label}: {detail}")


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE_LINES:
        return
    terminalreporter.section("acceptance criteria")
    for line in ACCEPTANCE_LINES:
        terminalreporter.write_line(line)


def pytest_configure(config):
    config.addinivalue_line("markers", "acceptance: acceptance-criterion checks (long running)")


@pytest.fixture(scope="session")
def decision():
    return PRESETS["decision"]


@pytest.fixture(scope="session")
def decision_equilibria(decision):
    return find_equilibria(decision)


@pytest.fixture(scope="session")
def decision_manifold(decision, decision_equilibria):
    return build_manifold(decision, equilibria=decision_equilibria)


@pytest.fixture(scope="session")
def literal_central_manifold():
    """Reduction of the monostable literal preset around its only equilibrium."""
    params = PRESETS["literal"]
    eqs = find_equilibria(params)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", RuntimeWarning)
        frame = build_frame(params, base_point=eqs[0].location, equilibria=eqs)
    return build_manifold(params, frame=frame, equilibria=eqs)
