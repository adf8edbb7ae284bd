from __future__ import annotations

from pathlib import Path
from typing import Dict, List, Tuple

import pytest

from visguide.harness import RunConfig, load_scenario, run

SCENARIO_DIR = Path(__file__).resolve().parents[1] / "scenarios"

ACCEPTANCE = {
    1: "closed-form guidance equals the direct 2x2 solve",
    2: "truth-mode errors follow their exponential envelopes",
    3: "lane-change run in vision mode",
    4: "squircle run in vision mode",
    5: "occlusion case and subcase labelling",
    6: "adjusted centroid under a crossing bar",
    7: "keypoints recovered after the bar leaves",
    8: "pyramidal flow on pure translations",
    9: "Singer filter matrices and consistency",
    10: "camera projection and focal length",
    11: "deterministic logs",
    12: "finite logs over every scenario",
}

_outcomes: Dict[int, List[str]] = {}
_notes: Dict[int, List[str]] = {}


def pytest_configure(config):
    config.addinivalue_line("markers", "criterion(n): test backs acceptance criterion n")
    config.addinivalue_line("markers", "slow: runs one or more full scenarios")


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    rep = outcome.get_result()
    marker = item.get_closest_marker("criterion")
    if marker is None:
        return
    if rep.when == "call" or (rep.when == "setup" and not rep.passed):
        _outcomes.setdefault(marker.args[0], []).append(rep.outcome)


def pytest_terminal_summary(terminalreporter):
    if not _outcomes:
        return
    terminalreporter.section("acceptance criteria")
    for n, title in ACCEPTANCE.items():
        outs = _outcomes.get(n)
        if not outs:
            verdict = "NOT RUN"
        elif all(o == "passed" for o in outs):
            verdict = "PASS"
        else:
            verdict = "FAIL"
        note = "; ".join(_notes.get(n, []))
        terminalreporter.write_line(f"{verdict:7s} {n:2d}. {title}" + (f"  [{note}]" if note else ""))


@pytest.fixture
def measured(request):
    """Attach a measured value to the criterion line in the summary."""
    marker = request.node.get_closest_marker("criterion")

    def note(text: str) -> None:
        if marker is not None:
            _notes.setdefault(marker.args[0], []).append(text)

    return note


_run_cache: Dict[Tuple, object] = {}


def scenario_path(name: str) -> Path:
    return SCENARIO_DIR / f"{name}.yaml"


def cached_run(name: str, mode: str = "vision", **guidance):
    """Run a bundled scenario once per session (optionally with other gains)."""
    key = (name, mode, tuple(sorted(guidance.items())))
    if key not in _run_cache:
        sc = load_scenario(scenario_path(name))
        if guidance:
            from dataclasses import replace
            sc = replace(sc, guidance=replace(sc.guidance, **guidance))
        _run_cache[key] = run(RunConfig(sc, mode=mode))
    return _run_cache[key]


@pytest.fixture(scope="session")
def runs():
    return cached_run
