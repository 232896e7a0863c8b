from contextlib import contextmanager

import pytest
from hypothesis import settings

settings.register_profile("kamlab", deadline=None, max_examples=40, derandomize=True)
settings.load_profile("kamlab")

_CRITERIA: dict[int, str] = {}


@pytest.fixture(scope="session")
def chart():
    from kamlab.duffing import default_chart

    return default_chart()


@pytest.fixture
def criterion():
    """Context manager recording one PASS/FAIL line per acceptance criterion."""

    @contextmanager
    def record(number: int, title: str):
        detail: dict[str, object] = {}
        ok = False
        try:
            yield detail
            ok = True
        finally:
            facts = ", ".join(f"{k}={v:.4g}" if isinstance(v, float) else f"{k}={v}" for k, v in detail.items())
            line = f"{'PASS' if ok else 'FAIL'} criterion {number}: {title}" + (f" ({facts})" if facts else "")
            _CRITERIA[number] = line
            print(line)

    return record


def pytest_terminal_summary(terminalreporter):
    if _CRITERIA:
        terminalreporter.section("acceptance criteria")
        for n in sorted(_CRITERIA):
            terminalreporter.write_line(_CRITERIA[n])
