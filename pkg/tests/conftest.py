import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from gsmdetect.model import ProblemSpec, SequenceFamily, make_spec

settings.register_profile("default", deadline=None, max_examples=60, suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("default")


def binomial_band(p: float, n: int, k: float = 3.0) -> float:
    return k * np.sqrt(p * (1 - p) / n)


@pytest.fixture
def mild11():
    return make_spec("mild", 1.0, 1.0, 1e-2, 400)


@pytest.fixture
def direct1():
    return make_spec("direct", 1.0, 0.0, 0.1, 200)


@pytest.fixture
def toy2():
    return ProblemSpec(SequenceFamily.explicit([1.0, 2.0]), SequenceFamily.direct(), 1.0, 2)


_VERDICTS: list[str] = []


@pytest.fixture
def verdict():
    """Record a PASS/FAIL line for an acceptance criterion and return the flag."""

    def record(k: int, ok: bool, detail: str) -> bool:
        line = f"{'PASS' if ok else 'FAIL'} criterion {k}: {detail}"
        _VERDICTS.append(line)
        print(line)
        return ok

    return record


def pytest_terminal_summary(terminalreporter):
    if _VERDICTS:
        terminalreporter.section("acceptance criteria")
        for line in sorted(_VERDICTS, key=lambda s: int(s.split()[2].rstrip(":"))):
            terminalreporter.write_line(line)
