import json

import numpy as np
import pytest

ACCEPTANCE_LINES: list = []


def record_acceptance(number: int, name: str, passed: bool, detail: str) -> None:
    ACCEPTANCE_LINES.append((number, f"[{'PASS' if passed else 'FAIL'}] criterion {number:2d} {name}: {detail}"))


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE_LINES:
        return
    terminalreporter.section("acceptance criteria")
    for _, line in sorted(ACCEPTANCE_LINES):
        terminalreporter.write_line(line)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def two_squares_geojson(path):
    """Two disjoint unit squares, [0,1]^2 and [3,4]x[0,1]."""
    sq = lambda x0: [[x0, 0.0], [x0 + 1, 0.0], [x0 + 1, 1.0], [x0, 1.0], [x0, 0.0]]  # noqa: E731
    doc = {
        "type": "FeatureCollection",
        "features": [
            {"type": "Feature", "properties": {}, "geometry": {"type": "Polygon", "coordinates": [sq(0.0)]}},
            {"type": "Feature", "properties": {}, "geometry": {"type": "Polygon", "coordinates": [sq(3.0)]}},
        ],
    }
    path.write_text(json.dumps(doc))
    return path
