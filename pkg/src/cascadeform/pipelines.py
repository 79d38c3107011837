"""End-to-end designs: whole-network (conventional) and cascade.

Both produce a :class:`Design` whose ``system`` is the stabilized global
matrix ``A`` in ``z' = sat(-A z)``.
"""

import logging
from dataclasses import dataclass, field

import numpy as np
from sklearn.base import BaseEstimator
from sklearn.utils.validation import check_is_fitted

from ._validation import check_complex_vector, check_formation_basis
from .cascade import build_cascade, cascade_metrics
from .exceptions import DomainError
from .formats import matrix_to_pairs, pair, pairs
from .laplacian import ComplexLaplacian, build_laplacian, connectivity_metrics, synthesize_weights, \
    verify_formation_conditions
from .simulator import Scenario, run
from .spectral import eigenvalues
from .stabilizer import GAParams, SpectrumBounds, design_stabilizer
from .topology import Topology

__all__ = [
    "Design",
    "CascadeConfig",
    "design_conventional",
    "design_cascade",
    "is_stable",
    "ConventionalFormation",
    "CascadeFormation",
]

log = logging.getLogger(__name__)
MODES = ("conventional", "cascade")


@dataclass(frozen=True)
class CascadeConfig:
    """Cluster partition and meta-cluster wiring, all in global node indices."""

    clusters: tuple
    meta_edges: tuple
    meta_roots: tuple
    root_rows: str = "leader"
    meta_leaders: bool = True


@dataclass
class Design:
    mode: str
    system: np.ndarray
    basis: np.ndarray
    topology: Topology
    spectrum: object
    lambda_a: complex
    lambda_max: complex
    conditions: object
    reports: dict = field(default_factory=dict)
    diagonal: np.ndarray = None
    laplacian: object = None
    network: object = None
    metrics: object = None

    @property
    def n(self):
        return self.system.shape[0]

    @property
    def stable(self):
        return is_stable(self.spectrum)

    @property
    def ok(self):
        return bool(self.conditions.verdict and self.stable)

    def to_dict(self, agent_ids=None):
        out = {
            "mode": self.mode,
            "n": self.n,
            "lambda_a": pair(self.lambda_a),
            "lambda_max": pair(self.lambda_max),
            "stable": self.stable,
            "conditions": self.conditions.to_dict(),
            "spectrum": self.spectrum.to_dict(),
            "system": matrix_to_pairs(self.system),
            "ga": {k: r.to_dict() for k, r in sorted(self.reports.items())},
        }
        if agent_ids is not None:
            out["agents"] = list(agent_ids)
        if self.diagonal is not None:
            out["diagonal"] = pairs(self.diagonal)
        if self.network is not None:
            net = self.network
            out["cascade"] = {
                "root_rows": net.root_rows,
                "meta_leaders": net.meta_leaders,
                "clusters": [
                    {"members": list(c.member_ids), "roots": list(c.root_pair),
                     "diagonal": pairs(c.diagonal), "shares_design_of": c.shares_design_of}
                    for c in net.clusters
                ],
                "meta": {"roots": list(net.meta.root_ids), "co_leaders": list(net.meta.leaders),
                         "diagonal": pairs(net.meta.diagonal)},
                "metrics": self.metrics.to_dict(),
            }
        return out


def is_stable(spec):
    """Two structural zeros and every other eigenvalue strictly in the right half-plane."""
    nz = spec.nonzero
    return bool(spec.zero_count == 2 and nz.size > 0 and np.all(nz.real > 0))


def _conditions(system, xi, g):
    return verify_formation_conditions(ComplexLaplacian(system, xi, g))


def design_conventional(g, basis, bounds, ga=None, weight_seed=0):
    """Synthesize weights on the whole graph and run one GA over all ``n`` agents."""
    ga = ga or GAParams()
    xi = check_formation_basis(basis, n=g.n)
    lap = build_laplacian(g, synthesize_weights(g, xi, weight_seed), xi)
    d, report = design_stabilizer(lap, bounds, ga)
    system = d[:, None] * lap.matrix
    spec = eigenvalues(system)
    lam_a, lam_max = connectivity_metrics(spec)
    log.info("conventional design: lambda_a=%s lambda_max=%s", lam_a, lam_max)
    return Design("conventional", system, xi, g, spec, lam_a, lam_max, _conditions(system, xi, g),
                  {"network": report}, diagonal=d, laplacian=lap)


def design_cascade(g, basis, config, bounds, ga=None, weight_seed=0):
    """Design every cluster and the meta-cluster, then assemble the global system."""
    ga = ga or GAParams()
    xi = check_formation_basis(basis, n=g.n)
    net = build_cascade(g, xi, config.clusters, config.meta_edges, bounds, ga,
                        meta_roots=config.meta_roots, root_rows=config.root_rows,
                        meta_leaders=config.meta_leaders, weight_seed=weight_seed)
    system = net.assembled
    metrics = cascade_metrics(net)
    spec = eigenvalues(system)
    reports = {f"cluster_{k}": c.report for k, c in enumerate(net.clusters)}
    reports["meta"] = net.meta.report
    topo = g if g.roots is not None else g.with_roots(config.meta_roots)
    return Design("cascade", system, xi, topo, spec, metrics.lambda_a, metrics.lambda_max,
                  _conditions(system, xi, topo), reports, network=net, metrics=metrics)


class _SystemEstimator(BaseEstimator):
    def transform(self, X):
        """Rows of ``X`` are agent states; returns the rows of ``A z``."""
        check_is_fitted(self, "system_")
        Z = np.atleast_2d(np.asarray(X, dtype=np.complex128))
        if Z.shape[1] != self.n_features_in_:
            raise DomainError(f"expected {self.n_features_in_} agents per row, got {Z.shape[1]}")
        return Z @ self.system_.T

    def simulate(self, z0, dt=0.01, t_end=10.0, v_min=-10.0, v_max=10.0, integrator="rk4", failures=()):
        check_is_fitted(self, "system_")
        z0 = check_complex_vector(z0, name="z0", n=self.n_features_in_)
        return run(Scenario(self.system_, self.design_.basis, z0, dt, t_end, v_min, v_max,
                            integrator, tuple(failures), topology=self.design_.topology))

    def _bounds(self):
        return SpectrumBounds(self.lambda_min_bar, self.lambda_max_bar)

    def _ga(self):
        kw = dict(self.ga_params or {})
        kw["seed"] = self.seed
        return GAParams(**kw)

    def _check_inputs(self, X, y):
        if not isinstance(X, Topology):
            raise DomainError(f"{type(self).__name__}.fit expects a Topology as X")
        if y is None:
            raise DomainError(f"{type(self).__name__}.fit needs the formation basis as y")


class ConventionalFormation(_SystemEstimator):
    """Whole-network design: one Laplacian, one GA over every agent.

    Attributes
    ----------
    design_ : Design
    system_ : ndarray
        ``diag(d) @ L``.
    """

    def __init__(self, lambda_min_bar=0.5, lambda_max_bar=25.0, seed=0, ga_params=None):
        self.lambda_min_bar = lambda_min_bar
        self.lambda_max_bar = lambda_max_bar
        self.seed = seed
        self.ga_params = ga_params

    def fit(self, X, y=None):
        self._check_inputs(X, y)
        self.design_ = design_conventional(X, y, self._bounds(), self._ga(), weight_seed=self.seed)
        self.system_ = self.design_.system
        self.n_features_in_ = X.n
        return self


class CascadeFormation(_SystemEstimator):
    """Cluster + meta-cluster design assembled into one global system.

    Parameters
    ----------
    partition : sequence
        ``(members, roots)`` pairs, dicts or :class:`~cascadeform.cascade.ClusterSpec`.
    meta_edges : sequence of (int, int)
    meta_roots : (int, int), optional
        Defaults to the topology roots.
    root_rows : {"leader", "summed"}
    meta_leaders : bool

    Attributes
    ----------
    design_ : Design
    network_ : CascadeNetwork
    metrics_ : CascadeMetrics
    system_ : ndarray
    """

    def __init__(self, partition=(), meta_edges=(), meta_roots=None, lambda_min_bar=0.5,
                 lambda_max_bar=25.0, seed=0, ga_params=None, root_rows="leader", meta_leaders=True):
        self.partition = partition
        self.meta_edges = meta_edges
        self.meta_roots = meta_roots
        self.lambda_min_bar = lambda_min_bar
        self.lambda_max_bar = lambda_max_bar
        self.seed = seed
        self.ga_params = ga_params
        self.root_rows = root_rows
        self.meta_leaders = meta_leaders

    def fit(self, X, y=None):
        self._check_inputs(X, y)
        roots = self.meta_roots if self.meta_roots is not None else X.roots
        cfg = CascadeConfig(tuple(self.partition), tuple(self.meta_edges), roots,
                            self.root_rows, self.meta_leaders)
        self.design_ = design_cascade(X, y, cfg, self._bounds(), self._ga(), weight_seed=self.seed)
        self.network_ = self.design_.network
        self.metrics_ = self.design_.metrics
        self.system_ = self.design_.system
        self.n_features_in_ = X.n
        return self

