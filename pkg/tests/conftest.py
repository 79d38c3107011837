import networkx as nx
import numpy as np
import pytest

from cascadeform import Topology, load_scenario
from cascadeform.scenario import bundled_scenario_path


def oracle_two_reachable(n, edges, sources, v):
    """Brute force on networkx: drop each node in turn and test every surviving source."""
    g = nx.Graph()
    g.add_nodes_from(range(n))
    g.add_edges_from(edges)
    for w in range(n):
        if w == v:
            continue
        h = g.copy()
        h.remove_node(w)
        for s in sources:
            if s != w and not nx.has_path(h, s, v):
                return False
    return True


def oracle_two_rooted(n, edges, roots):
    return all(oracle_two_reachable(n, edges, roots, v) for v in range(n) if v not in roots)


def random_edges(rng, n, p):
    return [(i, j) for i in range(n) for j in range(i + 1, n) if rng.random() < p]


def random_two_rooted(rng, n):
    """Rejection-sample a G(n, p) graph until it is 2-rooted at two random nodes.

    The accept test is the networkx oracle, so the sampler does not depend
    on the code under test.
    """
    while True:
        p = rng.uniform(0.25, 0.8)
        edges = random_edges(rng, n, p)
        roots = tuple(int(r) for r in rng.choice(n, size=2, replace=False))
        degs = np.zeros(n, dtype=int)
        for i, j in edges:
            degs[i] += 1
            degs[j] += 1
        if degs.min() >= 2 and oracle_two_rooted(n, edges, roots):
            return Topology(n, edges, roots)


def random_basis(rng, n, scale=5.0):
    return scale * (rng.standard_normal(n) + 1j * rng.standard_normal(n))


def cycle(n, roots=(0, 1)):
    return Topology(n, [(i, (i + 1) % n) for i in range(n)], roots)


def complete(n, roots=(0, 1)):
    return Topology(n, [(i, j) for i in range(n) for j in range(i + 1, n)], roots)


@pytest.fixture(scope="session")
def bundled():
    return load_scenario(bundled_scenario_path())


@pytest.fixture
def triangle():
    return Topology(3, [(0, 1), (1, 2), (0, 2)], (0, 1)), np.array([0, 1, 1j])


# Acceptance results are collected here and echoed in the terminal summary.
ACCEPTANCE = {}


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for key in sorted(ACCEPTANCE):
        ok, detail = ACCEPTANCE[key]
        terminalreporter.write_line(f"{'PASS' if ok else 'FAIL'} criterion {key}: {detail}")
