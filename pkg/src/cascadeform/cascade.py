"""Cascade formulation: 2-rooted clusters coupled only through shared roots,
led by a meta-cluster formed by those roots.

Each cluster and the meta-cluster get their own Laplacian and stabilizing
diagonal. The global closed-loop matrix is the sum of the embedded blocks.

Two conventions exist for the root rows of a cluster block:

``"leader"`` (default)
    Cluster roots are leaders inside their cluster: their cluster rows are
    empty, so a root is steered only by the meta-cluster. The global matrix
    is then block triangular (roots first), its spectrum is exactly the
    union of the meta spectrum and the cluster follower spectra, and a
    fault inside one cluster cannot reach the roots.
``"summed"``
    Cluster root rows are synthesized like any other row and summed with
    the meta row. Kept for diagnostics; the sum is not stable in general.
"""

import logging
from dataclasses import dataclass, field, replace

import numpy as np

from ._validation import check_formation_basis
from .exceptions import AssemblyError, DomainError, StructureError, TopologyError
from .laplacian import build_laplacian, connectivity_metrics, synthesize_weights, EdgeWeights
from .spectral import eigenvalues, kernel_residuals, numerical_rank
from .stabilizer import GAParams, design_stabilizer
from .topology import Topology, is_two_rooted

__all__ = [
    "ClusterSpec",
    "Cluster",
    "MetaCluster",
    "CascadeNetwork",
    "CascadeMetrics",
    "DecouplingReport",
    "build_cascade",
    "assemble",
    "cascade_metrics",
    "decoupling_experiment",
    "ROOT_ROW_MODES",
]

log = logging.getLogger(__name__)

ROOT_ROW_MODES = ("leader", "summed")


@dataclass(frozen=True)
class ClusterSpec:
    members: tuple
    roots: tuple

    @classmethod
    def coerce(cls, obj):
        if isinstance(obj, ClusterSpec):
            return obj
        if isinstance(obj, dict):
            return cls(tuple(obj["members"]), tuple(obj["roots"]))
        members, roots = obj
        return cls(tuple(members), tuple(roots))


@dataclass
class Cluster:
    member_ids: tuple
    root_pair: tuple
    local_topology: Topology
    local_basis: np.ndarray
    laplacian: object = None
    diagonal: np.ndarray = None
    report: object = None
    shares_design_of: int = None

    @property
    def followers(self):
        return tuple(m for m in self.member_ids if m not in self.root_pair)

    @property
    def block(self):
        """Stabilized local matrix ``diag(d) @ L``."""
        return self.diagonal[:, None] * self.laplacian.matrix


@dataclass
class MetaCluster:
    root_ids: tuple
    leaders: tuple
    topology: Topology
    basis: np.ndarray
    laplacian: object = None
    diagonal: np.ndarray = None
    report: object = None

    @property
    def block(self):
        return self.diagonal[:, None] * self.laplacian.matrix


@dataclass
class CascadeNetwork:
    n: int
    global_basis: np.ndarray
    topology: Topology
    clusters: list
    meta: MetaCluster
    root_rows: str = "leader"
    meta_leaders: bool = True
    assembled: np.ndarray = field(default=None, repr=False)

    @property
    def root_ids(self):
        return self.meta.root_ids

    def cluster_of(self, node):
        """Indices of the clusters containing ``node``."""
        return [k for k, c in enumerate(self.clusters) if node in c.member_ids]


@dataclass(frozen=True)
class CascadeMetrics:
    lambda_a: complex
    lambda_max: complex
    formula_lambda_a: complex
    formula_lambda_max: complex
    components: tuple

    @property
    def gap_lambda_a(self):
        return abs(self.lambda_a - self.formula_lambda_a)

    @property
    def gap_lambda_max(self):
        return abs(self.lambda_max - self.formula_lambda_max)

    def to_dict(self):
        pair = lambda z: [z.real, z.imag]  # noqa: E731
        return {
            "lambda_a": pair(self.lambda_a),
            "lambda_max": pair(self.lambda_max),
            "formula_lambda_a": pair(self.formula_lambda_a),
            "formula_lambda_max": pair(self.formula_lambda_max),
            "gap_lambda_a": self.gap_lambda_a,
            "gap_lambda_max": self.gap_lambda_max,
            "components": [
                {"name": name, "lambda_a": pair(a), "lambda_max": pair(m)}
                for name, a, m in self.components
            ],
        }


@dataclass(frozen=True)
class DecouplingReport:
    target_cluster: int
    edge: tuple
    perturbation: float
    baseline: np.ndarray
    perturbed: np.ndarray
    drift: np.ndarray
    moved: np.ndarray
    threshold: float

    @property
    def n_moved(self):
        return int(np.count_nonzero(self.moved))

    def to_dict(self):
        return {
            "target_cluster": self.target_cluster,
            "edge": list(self.edge),
            "perturbation": self.perturbation,
            "threshold": self.threshold,
            "n_eigenvalues": int(self.baseline.size),
            "n_moved": self.n_moved,
            "max_drift": float(self.drift.max()) if self.drift.size else 0.0,
            "baseline": [[v.real, v.imag] for v in self.baseline],
            "perturbed": [[v.real, v.imag] for v in self.perturbed],
            "drift": [float(x) for x in self.drift],
            "moved": [bool(x) for x in self.moved],
        }


def _similar_bases(a, b, rel_tol=1e-9):
    """True if ``b == c1 + c2 * a`` for some complex ``c1, c2``."""
    if a.shape != b.shape:
        return False
    basis = np.column_stack([np.ones_like(a), a])
    coef, *_ = np.linalg.lstsq(basis, b, rcond=None)
    scale = np.linalg.norm(b - b.mean())
    return bool(np.linalg.norm(basis @ coef - b) <= rel_tol * max(scale, 1e-300))


def _validate_partition(g, partition, meta_edges):
    n = g.n
    specs = [ClusterSpec.coerce(p) for p in partition]
    if len(specs) < 2:
        raise StructureError("a cascade needs at least two clusters")
    roots = []
    for k, s in enumerate(specs):
        if len(set(s.members)) != len(s.members):
            raise StructureError(f"cluster {k} lists a member twice")
        if len(s.members) < 3:
            raise StructureError(f"cluster {k} has {len(s.members)} members; at least 3 required")
        for v in s.members:
            if not 0 <= v < n:
                raise StructureError(f"cluster {k} references unknown node {v}")
        if len(s.roots) != 2 or s.roots[0] == s.roots[1] or not set(s.roots) <= set(s.members):
            raise StructureError(f"cluster {k} must name two distinct member roots, got {s.roots}")
        for r in s.roots:
            if r not in roots:
                roots.append(r)
    root_set = set(roots)
    owner = {}
    for k, s in enumerate(specs):
        for v in s.members:
            if v in root_set:
                if v not in s.roots:
                    raise StructureError(f"node {v} is a root elsewhere but a follower of cluster {k}")
                continue
            if v in owner:
                raise StructureError(f"follower {v} belongs to clusters {owner[v]} and {k}")
            owner[v] = k
    covered = root_set | set(owner)
    if len(covered) != n:
        missing = sorted(set(range(n)) - covered)
        raise StructureError(f"partition leaves nodes {missing[:10]} uncovered")

    meta = set()
    for e in meta_edges:
        a, b = (int(v) for v in e)
        if a not in root_set or b not in root_set:
            raise StructureError(f"meta edge ({a}, {b}) must join two cluster roots")
        if not g.has_edge(a, b):
            raise StructureError(f"meta edge ({a}, {b}) is not an edge of the graph")
        meta.add((min(a, b), max(a, b)))

    cluster_edges = [set() for _ in specs]
    for a, b in g.sorted_edges():
        if (a, b) in meta:
            continue
        homes = [k for k, s in enumerate(specs) if a in s.members and b in s.members]
        if not homes:
            fa, fb = owner.get(a), owner.get(b)
            who = a if fa is not None else b
            if fa is not None or fb is not None:
                raise StructureError(
                    f"edge ({a}, {b}) couples follower {who} of cluster "
                    f"{owner[who]} outside its cluster"
                )
            raise StructureError(f"root-root edge ({a}, {b}) is neither inside a cluster nor a meta edge")
        for k in homes:
            cluster_edges[k].add((a, b))
    return specs, roots, owner, meta, cluster_edges


def _design(lap, bounds, ga):
    d, report = design_stabilizer(lap, bounds, ga)
    return d, report


def build_cascade(g, basis, partition, meta_edges, bounds, ga=None, meta_roots=None,
                  root_rows="leader", meta_leaders=True, weight_seed=0, reuse_designs=True):
    """Validate a cluster partition and design every component.

    Parameters
    ----------
    g : Topology
        Global interaction graph.
    basis : array_like of complex
        Global formation basis.
    partition : sequence of ClusterSpec, dict or (members, roots)
        Node ids are global indices.
    meta_edges : sequence of (int, int)
        Graph edges between roots that form the meta-cluster.
    bounds : SpectrumBounds
        Band used for every component design.
    ga : GAParams, optional
        Component ``k`` (in design order) uses seed ``ga.seed + k + 1``; the
        meta-cluster uses ``ga.seed``.
    meta_roots : (int, int), optional
        Main co-leaders; defaults to ``g.roots``.
    root_rows : {"leader", "summed"}
    meta_leaders : bool
        If true the two co-leaders get empty meta rows, so they hold their
        position and every other root is steered relative to them. If
        false every meta row is synthesized.
    weight_seed : int
    reuse_designs : bool
        Reuse an earlier cluster's (L, D) when the cluster has the same
        local edge structure and a basis related by translation, rotation
        and scaling (the same weights annihilate it).

    Returns
    -------
    CascadeNetwork
        With designs done and ``assembled`` populated.
    """
    if root_rows not in ROOT_ROW_MODES:
        raise DomainError(f"root_rows must be one of {ROOT_ROW_MODES}, got {root_rows!r}")
    ga = ga or GAParams()
    xi = check_formation_basis(basis, n=g.n)
    specs, roots, _, meta, cluster_edges = _validate_partition(g, partition, meta_edges)
    if meta_roots is None:
        meta_roots = g.roots
    if meta_roots is None or len(set(meta_roots)) != 2 or not set(meta_roots) <= set(roots):
        raise StructureError(f"meta-cluster co-leaders must be two cluster roots, got {meta_roots}")

    clusters = []
    designed = []  # (cluster index, local edges, local root positions)
    for k, s in enumerate(specs):
        pos = {v: i for i, v in enumerate(s.members)}
        local_edges = frozenset((min(pos[a], pos[b]), max(pos[a], pos[b])) for a, b in cluster_edges[k])
        local_roots = (pos[s.roots[0]], pos[s.roots[1]])
        topo = Topology(len(s.members), local_edges, local_roots)
        if not is_two_rooted(topo):
            raise TopologyError(f"cluster {k} is not 2-rooted with roots {s.roots}")
        cl = Cluster(tuple(s.members), tuple(s.roots), topo, xi[list(s.members)])
        twin = None
        if reuse_designs:
            for j, edges_j, roots_j in designed:
                other = clusters[j]
                if (edges_j == local_edges and roots_j == local_roots
                        and _similar_bases(other.local_basis, cl.local_basis)):
                    twin = j
                    break
        leaders = local_roots if root_rows == "leader" else ()
        if twin is not None:
            src = clusters[twin]
            weights = EdgeWeights(_weights_of(src), leaders)
            cl.laplacian = build_laplacian(topo, weights, cl.local_basis)
            cl.diagonal = src.diagonal.copy()
            cl.report = src.report
            cl.shares_design_of = twin
        else:
            w = synthesize_weights(topo, cl.local_basis, weight_seed + k, leaders=leaders)
            cl.laplacian = build_laplacian(topo, w, cl.local_basis)
            cl.diagonal, cl.report = _design(cl.laplacian, bounds, replace(ga, seed=ga.seed + len(designed) + 1))
            designed.append((k, local_edges, local_roots))
        log.info("cluster %d: %d members, lambda_a=%s%s", k, len(s.members), cl.report.lambda_a,
                 f" (design of cluster {twin})" if twin is not None else "")
        clusters.append(cl)

    rpos = {r: i for i, r in enumerate(roots)}
    mtopo = Topology(len(roots), frozenset((rpos[a], rpos[b]) if rpos[a] < rpos[b] else (rpos[b], rpos[a])
                                           for a, b in meta),
                     (rpos[meta_roots[0]], rpos[meta_roots[1]]))
    if not is_two_rooted(mtopo):
        raise TopologyError(f"meta-cluster is not 2-rooted with co-leaders {tuple(meta_roots)}")
    mbasis = xi[roots]
    mleaders = mtopo.roots if meta_leaders else ()
    mw = synthesize_weights(mtopo, mbasis, weight_seed + len(specs), leaders=mleaders)
    mlap = build_laplacian(mtopo, mw, mbasis)
    md, mrep = _design(mlap, bounds, ga)
    meta_cluster = MetaCluster(tuple(roots), tuple(meta_roots), mtopo, mbasis, mlap, md, mrep)
    log.info("meta-cluster: %d roots, lambda_a=%s", len(roots), mrep.lambda_a)

    net = CascadeNetwork(g.n, xi, g, clusters, meta_cluster, root_rows, bool(meta_leaders))
    assemble(net)
    return net


def _weights_of(cluster):
    """Recover the directed weights of a cluster Laplacian (local indices)."""
    m = cluster.laplacian.matrix
    topo = cluster.local_topology
    out = {}
    for i in range(topo.n):
        if i in cluster.laplacian.leaders:
            continue
        for j in topo._adj[i]:
            out[(i, j)] = -m[i, j]
    return out


def _assemble_blocks(n, blocks):
    out = np.zeros((n, n), dtype=np.complex128)
    for ids, block in blocks:
        idx = np.asarray(ids)
        out[np.ix_(idx, idx)] += block
    return out


def _component_blocks(c, override=None):
    blocks = []
    for k, cl in enumerate(c.clusters):
        blk = override[1] if override is not None and override[0] == k else cl.block
        blocks.append((cl.member_ids, blk))
    blocks.append((c.meta.root_ids, c.meta.block))
    return blocks


def assemble(c, check=True, rel_tol=1e-9):
    """Embed every stabilized component block into the global ``n x n`` matrix.

    Follower rows come from their cluster alone; a root row is the sum of
    the matching rows of every cluster containing that root plus its
    meta-cluster row.

    Raises
    ------
    AssemblyError
        If ``check`` and the result does not annihilate ``1`` and ``xi``
        (relative to ``||A||_F``) or its numerical rank is not ``n - 2``.
    """
    a = _assemble_blocks(c.n, _component_blocks(c))
    if check:
        r1, rxi = kernel_residuals(a, c.global_basis)
        fro = float(np.linalg.norm(a))
        rank = numerical_rank(a)
        if r1 > rel_tol * fro or rxi > rel_tol * fro or rank != c.n - 2:
            raise AssemblyError(
                "assembled cascade violates its kernel/rank postcondition",
                {"residual_ones": r1, "residual_xi": rxi, "frobenius": fro,
                 "rank": rank, "expected_rank": c.n - 2},
            )
    c.assembled = a
    return a


def _pick(values, key):
    return sorted(values, key=key)[0]


def cascade_metrics(c):
    """Connectivity of the assembled matrix next to the component-wise formula.

    The formula takes the minimum-real-part ``lambda_a`` and the
    maximum-real-part ``lambda_max`` over all clusters and the
    meta-cluster. Both are returned so their gap can be inspected.
    """
    if c.assembled is None:
        assemble(c)
    lam_a, lam_max = connectivity_metrics(eigenvalues(c.assembled))
    comps = []
    seen = {}
    for k, cl in enumerate(c.clusters):
        key = cl.shares_design_of if cl.shares_design_of is not None else k
        if key not in seen:
            seen[key] = connectivity_metrics(eigenvalues(cl.block))
        comps.append((f"cluster_{k}", *seen[key]))
    comps.append(("meta", *connectivity_metrics(eigenvalues(c.meta.block))))
    f_a = _pick([x[1] for x in comps], key=lambda z: (z.real, z.imag))
    f_max = _pick([x[2] for x in comps], key=lambda z: (-z.real, -z.imag))
    return CascadeMetrics(lam_a, lam_max, f_a, f_max, tuple(comps))


def _greedy_match(base, other):
    """Pair every baseline eigenvalue with a distinct perturbed one, closest pairs first."""
    dist = np.abs(base[:, None] - other[None, :])
    order = np.argsort(dist, axis=None, kind="stable")
    used_a = np.zeros(base.size, bool)
    used_b = np.zeros(other.size, bool)
    match = np.empty(base.size, dtype=int)
    left = base.size
    for flat in order:
        i, j = divmod(int(flat), other.size)
        if used_a[i] or used_b[j]:
            continue
        used_a[i] = used_b[j] = True
        match[i] = j
        left -= 1
        if left == 0:
            break
    return match


def decoupling_experiment(c, target_cluster, perturbation, threshold=1e-9):
    """Perturb one intra-cluster weight and track how the global spectrum moves.

    The weight perturbed is the first weight of the first follower row of
    the target cluster (member order, lowest neighbor index), multiplied by
    ``1 + perturbation``. The perturbed matrix is assembled without the
    kernel postcondition, since a single-weight change breaks it.
    """
    if isinstance(target_cluster, bool) or not 0 <= int(target_cluster) < len(c.clusters):
        raise DomainError(f"target cluster {target_cluster} out of range 0..{len(c.clusters) - 1}")
    k = int(target_cluster)
    cl = c.clusters[k]
    weights = _weights_of(cl)
    leaders = cl.laplacian.leaders
    rows = [i for i in range(len(cl.member_ids)) if cl.member_ids[i] in cl.followers and i not in leaders]
    edge = None
    for i in rows:
        nbrs = sorted(j for (a, j) in weights if a == i)
        if nbrs:
            edge = (i, nbrs[0])
            break
    if edge is None:
        raise DomainError(f"cluster {k} has no follower weight to perturb")
    new_w = dict(weights)
    new_w[edge] = new_w[edge] * (1.0 + float(perturbation))
    lap = build_laplacian(cl.local_topology, EdgeWeights(new_w, leaders), cl.local_basis)
    block = cl.diagonal[:, None] * lap.matrix
    if c.assembled is None:
        assemble(c)
    base_mat = _assemble_blocks(c.n, _component_blocks(c))
    pert_mat = _assemble_blocks(c.n, _component_blocks(c, override=(k, block)))
    base = eigenvalues(base_mat).eigenvalues
    pert = eigenvalues(pert_mat).eigenvalues
    match = _greedy_match(base, pert)
    drift = np.abs(base - pert[match])
    global_edge = (cl.member_ids[edge[0]], cl.member_ids[edge[1]])
    return DecouplingReport(k, global_edge, float(perturbation), base, pert[match], drift,
                            drift > threshold, threshold)
