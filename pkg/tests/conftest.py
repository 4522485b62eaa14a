import mpmath
import numpy as np
import pytest


def j0_series(x, dps=40):
    """Power series of J0 evaluated in high precision (independent oracle)."""
    with mpmath.workdps(dps):
        x = mpmath.mpf(x)
        term = mpmath.mpf(1)
        total = term
        k = 0
        while abs(term) > mpmath.mpf(10) ** (-dps + 5) or k < 5:
            k += 1
            term *= -(x / 2) ** 2 / (k * k)
            total += term
        return float(total)


@pytest.fixture
def rng():
    return np.random.default_rng(20240607)


_ACCEPTANCE_LINES: list[str] = []


@pytest.fixture
def report(capsys):
    """Record one acceptance line; it is echoed live and again in the summary."""

    def _report(number, name, ok, detail, elapsed, limit):
        ok = bool(ok) and elapsed < limit
        line = f"[{'PASS' if ok else 'FAIL'}] criterion {number:>2} {name}: {detail} ({elapsed:.1f}s / {limit:g}s)"
        _ACCEPTANCE_LINES.append(line)
        with capsys.disabled():
            print("\n" + line)
        return ok

    return _report


def pytest_terminal_summary(terminalreporter):
    if _ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(_ACCEPTANCE_LINES, key=lambda s: int(s.split()[2])):
            terminalreporter.write_line(line)
