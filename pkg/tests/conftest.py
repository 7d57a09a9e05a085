"""Shared fixtures, hypothesis strategies, independent oracles and the
acceptance-criteria report printed at the end of the session."""
from __future__ import annotations

from collections import deque

import numpy as np
import pytest
from hypothesis import HealthCheck, settings
from hypothesis import strategies as st

from matcha.graph import Topology

settings.register_profile("default", deadline=None, suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("default")


# ---- independent oracles -----------------------------------------------------

def bfs_connected(m: int, edges) -> bool:
    """Reachability from node 0 by breadth-first search."""
    adj = [[] for _ in range(m)]
    for i, j in edges:
        adj[i].append(j)
        adj[j].append(i)
    seen = {0}
    queue = deque([0])
    while queue:
        v = queue.popleft()
        for w in adj[v]:
            if w not in seen:
                seen.add(w)
                queue.append(w)
    return len(seen) == m


def check_edge_colouring(topology: Topology, matchings) -> list:
    """Problems with a proposed matching decomposition (empty list = valid)."""
    problems = []
    seen = {}
    for idx, mt in enumerate(matchings):
        if not mt:
            problems.append(f"matching {idx} is empty")
        used = set()
        for e in mt:
            e = tuple(sorted(e))
            if e[0] in used or e[1] in used:
                problems.append(f"matching {idx} reuses a vertex at {e}")
            used.update(e)
            if e in seen:
                problems.append(f"edge {e} in matchings {seen[e]} and {idx}")
            seen[e] = idx
    if set(seen) != set(topology.edges):
        problems.append("matchings do not cover the edge set exactly")
    return problems


# ---- hypothesis strategies ---------------------------------------------------

@st.composite
def graphs(draw, min_nodes=2, max_nodes=12, connected=False):
    m = draw(st.integers(min_nodes, max_nodes))
    pairs = [(i, j) for i in range(m) for j in range(i + 1, m)]
    mask = draw(st.lists(st.booleans(), min_size=len(pairs), max_size=len(pairs)))
    edges = [p for p, keep in zip(pairs, mask) if keep]
    if connected:
        # a random spanning tree keeps the draw connected
        order = draw(st.permutations(range(m)))
        for k in range(1, m):
            parent = order[draw(st.integers(0, k - 1))]
            e = tuple(sorted((order[k], parent)))
            if e not in edges:
                edges.append(e)
    return Topology(m, tuple(edges))


def random_symmetric(rng, m):
    a = rng.standard_normal((m, m))
    return (a + a.T) / 2.0


# ---- acceptance report -------------------------------------------------------

_RESULTS = {}


def pytest_configure(config):
    config.addinivalue_line("markers", "criterion(number, title): acceptance criterion")


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    report = outcome.get_result()
    marker = item.get_closest_marker("criterion")
    if marker is None:
        return
    number, title = marker.args
    if report.when == "call" or (report.when == "setup" and not report.passed):
        detail = dict(item.user_properties).get("detail", "")
        _RESULTS[number] = (title, "PASS" if report.passed else "FAIL", detail)


def pytest_terminal_summary(terminalreporter):
    if not _RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(_RESULTS):
        title, status, detail = _RESULTS[number]
        line = f"[{status}] criterion {number:2d}: {title}"
        terminalreporter.write_line(line + (f"  ({detail})" if detail else ""))
    passed = sum(1 for r in _RESULTS.values() if r[1] == "PASS")
    terminalreporter.write_line(f"{passed}/{len(_RESULTS)} acceptance criteria passed")


@pytest.fixture
def detail(record_property):
    """Attach a one-line summary to the acceptance report."""
    def _set(text: str):
        record_property("detail", text)
    return _set
