import json
from pathlib import Path

import pytest

from hexstation.osm import load_stations, parse_geojson
from hexstation.study_area import build_city_dataset

DATA = Path(__file__).parent / "data"
FIXTURE_CITIES = ("alphaville", "betatown")


def fixture_manifest(city: str) -> dict:
    return json.loads((DATA / city / "manifest.json").read_text())


def load_fixture_city(city: str):
    d = DATA / city
    stations = load_stations((d / "stations.csv").read_bytes(), city)
    objects = parse_geojson((d / "objects.geojson").read_bytes())
    return build_city_dataset(city, stations, objects, fixture_manifest(city)["resolution"])


_CACHE = {}


def cached_city(city: str):
    if city not in _CACHE:
        _CACHE[city] = load_fixture_city(city)
    return _CACHE[city]


@pytest.fixture(scope="session")
def alphaville():
    return cached_city("alphaville")


@pytest.fixture(scope="session")
def betatown():
    return cached_city("betatown")


# one line per acceptance criterion, echoed in the terminal summary
ACCEPTANCE_LINES: list[str] = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.write_sep("=", "acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES, key=lambda s: int(s.split()[1].rstrip(":"))):
            terminalreporter.write_line(line)
