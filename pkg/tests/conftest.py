import json
from importlib import resources
from pathlib import Path

import pytest

from streetdyn.lanegraph import load_lane_graph

DATA = Path(str(resources.files("streetdyn").joinpath("data")))


@pytest.fixture(scope="session")
def data_dir():
    return DATA


@pytest.fixture(scope="session")
def intersection():
    return load_lane_graph(DATA / "maps" / "intersection.json")


@pytest.fixture(scope="session")
def urban():
    return load_lane_graph(DATA / "maps" / "urban_road.json")


@pytest.fixture
def write_json(tmp_path):
    def write(doc, name="doc.json"):
        p = tmp_path / name
        p.write_text(json.dumps(doc))
        return p
    return write


# acceptance results, filled by test_acceptance.py and printed after the run
ACCEPTANCE: dict[int, tuple[bool, str]] = {}


@pytest.fixture
def criterion():
    def record(number: int, ok: bool, detail: str) -> bool:
        ACCEPTANCE[number] = (bool(ok), detail)
        return ok
    return record


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(ACCEPTANCE):
        ok, detail = ACCEPTANCE[n]
        terminalreporter.write_line(f"criterion {n}: {'PASS' if ok else 'FAIL'}  {detail}")
