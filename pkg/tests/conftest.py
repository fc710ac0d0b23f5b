import numpy as np
import pytest

from rapdscreen.detection import Frame
from rapdscreen.protocol import Eye


def make_frame(pixels, t=0.0, eye=Eye.LEFT):
    return Frame(np.asarray(pixels, dtype=np.uint8), t, eye)


def disk_image(shape, cx, cy, r, inside=0, outside=255):
    yy, xx = np.mgrid[0:shape[0], 0:shape[1]]
    img = np.full(shape, outside, dtype=np.uint8)
    img[(xx - cx) ** 2 + (yy - cy) ** 2 <= r * r] = inside
    return img


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


# one line per acceptance criterion, echoed in the terminal summary
ACCEPTANCE_LINES = []


@pytest.fixture
def acceptance():
    def record(number, ok, detail):
        line = f"ACCEPTANCE {number}: {'PASS' if ok else 'FAIL'}  {detail}"
        ACCEPTANCE_LINES.append(line)
        print(line)
        assert ok, line
    return record


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES):
            terminalreporter.write_line(line)
