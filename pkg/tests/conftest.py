import numpy as np
import pytest
from hypothesis import settings

settings.register_profile("default", deadline=None, max_examples=60)
settings.load_profile("default")


@pytest.fixture
def octagon():
    from onsetloc.signal import ArrayGeometry
    return ArrayGeometry.circular(8, 0.1)


def octagon_pair_count(threshold_m, diameter=0.1):
    """Chord-length oracle for an 8-mic circle: k-step chords have length D*sin(k*pi/8);
    k = 1, 2, 3 occur 8 times each, the diameter (k = 4) 4 times."""
    mult = {1: 8, 2: 8, 3: 8, 4: 4}
    return sum(m for k, m in mult.items() if diameter * np.sin(k * np.pi / 8) < threshold_m)


ACCEPTANCE_LINES: list[str] = []


@pytest.fixture
def report():
    """Record one PASS/FAIL line per acceptance criterion; echoed in the terminal summary."""
    def _report(name: str, ok: bool, detail: str) -> bool:
        line = f"{'PASS' if ok else 'FAIL'}  {name}: {detail}"
        ACCEPTANCE_LINES.append(line)
        print(line)
        return ok
    return _report


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
