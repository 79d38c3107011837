"""Bidirectional interaction graphs and the 2-reachable / 2-rooted tests."""

from collections import deque
from dataclasses import dataclass, field

from .exceptions import DomainError, TopologyError

__all__ = ["Topology", "neighbors", "is_two_reachable", "is_two_rooted"]


@dataclass(frozen=True)
class Topology:
    """Undirected graph over nodes ``0..n-1`` with an optional root pair.

    Every edge is sensed in both directions. Edges are stored as sorted
    ``(i, j)`` tuples with ``i < j``.

    Parameters
    ----------
    n : int
        Number of nodes, at least 3.
    edges : iterable of (int, int)
        Unordered node pairs. Duplicates collapse; self-loops are rejected.
    roots : (int, int), optional
        Designated co-leader pair. Required by :func:`is_two_rooted`.
    """

    n: int
    edges: frozenset
    roots: tuple = None
    _adj: tuple = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        n = int(self.n)
        if n < 3:
            raise TopologyError(f"a topology needs at least 3 nodes, got {n}")
        norm = set()
        for e in self.edges:
            i, j = (int(v) for v in e)
            if i == j:
                raise TopologyError(f"self-loop on node {i}")
            for v in (i, j):
                if not 0 <= v < n:
                    raise TopologyError(f"edge ({i}, {j}) references node {v} outside 0..{n - 1}")
            norm.add((min(i, j), max(i, j)))
        adj = [set() for _ in range(n)]
        for i, j in norm:
            adj[i].add(j)
            adj[j].add(i)
        roots = self.roots
        if roots is not None:
            roots = tuple(int(r) for r in roots)
            if len(roots) != 2 or roots[0] == roots[1]:
                raise TopologyError(f"roots must be two distinct nodes, got {roots}")
            for r in roots:
                if not 0 <= r < n:
                    raise TopologyError(f"root {r} outside 0..{n - 1}")
        object.__setattr__(self, "n", n)
        object.__setattr__(self, "edges", frozenset(norm))
        object.__setattr__(self, "roots", roots)
        object.__setattr__(self, "_adj", tuple(frozenset(a) for a in adj))

    def degree(self, i):
        return len(self._adj[self._check_node(i)])

    def has_edge(self, i, j):
        return (min(i, j), max(i, j)) in self.edges

    def sorted_edges(self):
        return sorted(self.edges)

    def with_roots(self, roots):
        return Topology(self.n, self.edges, roots)

    def with_edges(self, edges):
        return Topology(self.n, edges, self.roots)

    def _check_node(self, i):
        if isinstance(i, bool) or int(i) != i or not 0 <= int(i) < self.n:
            raise DomainError(f"invalid node id {i!r} for a graph on {self.n} nodes")
        return int(i)


def neighbors(g, i):
    """Return the neighbor set of node ``i``."""
    return set(g._adj[g._check_node(i)])


def _reachable_from(g, start, removed):
    seen = {start}
    queue = deque([start])
    while queue:
        u = queue.popleft()
        for w in g._adj[u]:
            if w != removed and w not in seen:
                seen.add(w)
                queue.append(w)
    return seen


def is_two_reachable(g, u_set, v):
    """Check whether ``v`` is 2-reachable from the node set ``u_set``.

    For every single node ``w != v`` that is deleted, each surviving member
    of ``u_set`` must still have a path to ``v``. With ``w`` ranging over
    the nodes of ``u_set`` too, this also covers the loss of one source.

    Raises
    ------
    DomainError
        If ``u_set`` has fewer than two nodes or contains ``v``.
    """
    v = g._check_node(v)
    u = {g._check_node(x) for x in u_set}
    if len(u) < 2:
        raise DomainError("2-reachability needs a non-singleton source set")
    if v in u:
        raise DomainError(f"target node {v} must not belong to the source set")
    for w in range(g.n):
        if w == v:
            continue
        reach = _reachable_from(g, v, removed=w)
        if not (u - {w}) <= reach:
            return False
    return True


def is_two_rooted(g):
    """True iff every non-root node is 2-reachable from the declared roots."""
    if g.roots is None:
        raise DomainError("topology has no declared roots")
    # Same predicate as is_two_reachable per node, one BFS per deleted node.
    a, b = g.roots
    for w in range(g.n):
        survivors = [r for r in (a, b) if r != w]
        comp = _reachable_from(g, survivors[0], removed=w)
        if len(survivors) == 2 and survivors[1] not in comp:
            # roots split apart: fine only if no other node is left to reach
            if g.n - len({a, b, w}) > 0:
                return False
            continue
        if len(comp) != g.n - 1:
            return False
    return True
