import numpy as np
import pytest

from sviconf.box import BoxSet
from sviconf.model import SaaMap

# reference n=10 instance of the two-dimensional example, inputs rounded to 4 decimals
J10 = np.array([[0.9292, 0.5400], [0.7536, 2.1111]])
B10 = np.array([-0.1319, -0.2906])
SIGMA10 = np.array([[0.4169, 0.0137], [0.0137, 0.1865]])
L0 = np.array([[1.0, 0.5], [1.0, 2.0]])
SIGMA0 = np.eye(2) / 3.0

ACCEPTANCE_SEED = 20140101

_acceptance: dict[str, tuple[bool, str]] = {}


@pytest.fixture
def orthant2():
    return BoxSet.nonnegative_orthant(2)


@pytest.fixture
def saa10():
    return SaaMap(J10, B10)


@pytest.fixture
def record():
    """Register one acceptance criterion outcome for the terminal summary."""

    def _record(name: str, ok: bool, detail: str = ""):
        prev = _acceptance.get(name)
        if prev is not None:
            ok = ok and prev[0]
            detail = f"{prev[1]}; {detail}" if detail else prev[1]
        _acceptance[name] = (bool(ok), detail)

    return _record


def pytest_terminal_summary(terminalreporter):
    if not _acceptance:
        return
    terminalreporter.section("acceptance criteria")
    for name in sorted(_acceptance, key=lambda s: int(s.split()[0])):
        ok, detail = _acceptance[name]
        terminalreporter.write_line(f"[{'PASS' if ok else 'FAIL'}] criterion {name}: {detail}")
