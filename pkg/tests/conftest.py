import json
import sys
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parent))

from iegs_sro.fixtures import bundled, bundled_path  # noqa: E402
from iegs_sro.gas import select_linearization_points  # noqa: E402
from iegs_sro.pipeline import solve_sro  # noqa: E402
from iegs_sro.scenarios import ingest_samples  # noqa: E402

_cache = {}


def fixture_case(name, S=None):
    """(network, doc, zero-budget scenarios, linearization), cached per session."""
    key = (name, S)
    if key not in _cache:
        net, text = bundled(name)
        doc = json.loads(bundled_path(name).read_text())
        scen = ingest_samples(text, net)
        if S is not None:
            scen = scen.subset(range(S))
        lin = select_linearization_points(net, scen)
        _cache[key] = (net, doc, scen, lin)
    return _cache[key]


def solved(name, eps, S=None, **kw):
    key = (name, S, eps, tuple(sorted(kw.items())))
    if key not in _cache:
        net, _, scen, lin = fixture_case(name, S)
        _cache[key] = solve_sro(net, scen.with_budget(eps), lin=lin, **kw)
    return _cache[key]


@pytest.fixture(scope="session")
def golden():
    return fixture_case("golden")


@pytest.fixture(scope="session")
def golden_report():
    rep = solved("golden", 0.05)
    assert rep.optimal
    return rep


def pytest_terminal_summary(terminalreporter):
    lines = getattr(sys.modules.get("test_acceptance"), "RESULTS", [])
    if lines:
        terminalreporter.section("acceptance criteria")
        for line in lines:
            terminalreporter.write_line(line)
