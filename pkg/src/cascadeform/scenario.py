"""Scenario files: strict JSON schema, cross-reference checks, label mapping.

Agents carry user-facing ids (strings or integers); everything downstream
uses their position in the ``agents`` list as the node index.
"""

import json
from dataclasses import dataclass, replace
from importlib import resources

import jsonschema
import numpy as np

from .cascade import ClusterSpec, ROOT_ROW_MODES
from .exceptions import DomainError, ScenarioError
from .pipelines import CascadeConfig
from .simulator import FailureEvent, INTEGRATORS
from .stabilizer import INIT_MODES, GAParams, SpectrumBounds
from .topology import Topology

__all__ = ["SCHEMA", "ScenarioFile", "RobustnessConfig", "parse_scenario", "load_scenario",
           "bundled_scenario_path", "parse_failure_flag"]

_num = {"type": "number"}
_pos = {"type": "number", "exclusiveMinimum": 0}
_id = {"type": ["string", "integer"]}
_pair = {"type": "array", "items": _num, "minItems": 2, "maxItems": 2}
_id_pair = {"type": "array", "items": _id, "minItems": 2, "maxItems": 2}
_interval = {"type": "array", "items": _num, "minItems": 2, "maxItems": 2}


def _obj(props, required=()):
    return {"type": "object", "properties": props, "required": list(required), "additionalProperties": False}


_agent = _obj({"id": _id, "position": _pair}, ["id", "position"])

SCHEMA = _obj(
    {
        "version": {"const": 1},
        "name": {"type": "string"},
        "comments": {"type": ["string", "array"], "items": {"type": "string"}},
        "seed": {"type": "integer", "minimum": 0},
        "agents": {"type": "array", "items": _agent, "minItems": 3},
        "edges": {"type": "array", "items": _id_pair},
        "roots": _id_pair,
        "cascade": _obj(
            {
                "clusters": {
                    "type": "array",
                    "items": _obj({"members": {"type": "array", "items": _id, "minItems": 3},
                                   "roots": _id_pair}, ["members", "roots"]),
                    "minItems": 2,
                },
                "meta_edges": {"type": "array", "items": _id_pair},
                "meta_roots": _id_pair,
                "root_rows": {"enum": list(ROOT_ROW_MODES)},
                "meta_leaders": {"type": "boolean"},
            },
            ["clusters", "meta_edges"],
        ),
        "bounds": _obj({"lambda_min_bar": _pos, "lambda_max_bar": _pos}, ["lambda_min_bar", "lambda_max_bar"]),
        "saturation": _obj({"v_min": _num, "v_max": _num}, ["v_min", "v_max"]),
        "integration": _obj({"dt": _pos, "t_end": _pos, "integrator": {"enum": list(INTEGRATORS)}}),
        "ga": _obj({
            "population_size": {"type": "integer", "minimum": 4},
            "generations": {"type": "integer", "minimum": 0},
            "crossover_rate": {"type": "number", "minimum": 0, "maximum": 1},
            "mutation_rate": {"type": "number", "minimum": 0, "maximum": 1},
            "mutation_sigma": {"type": "number", "minimum": 0},
            "tournament_size": {"type": "integer", "minimum": 1},
            "elitism_count": {"type": "integer", "minimum": 0},
            "stability_penalty_weight": {"type": "number", "minimum": 0},
            "real_diagonal": {"type": "boolean"},
            "init": {"enum": list(INIT_MODES)},
        }),
        "initial_positions": {
            "oneOf": [
                _obj({"mode": {"const": "explicit"}, "positions": {"type": "array", "items": _agent}},
                     ["mode", "positions"]),
                _obj({"mode": {"const": "random_box"}, "re": _interval, "im": _interval}, ["mode", "re", "im"]),
            ]
        },
        "failures": {
            "type": "array",
            "items": _obj({"kind": {"enum": ["link_failure", "actuator_failure"]},
                           "nodes": {"type": "array", "items": _id, "minItems": 1, "maxItems": 2},
                           "time": {"type": "number", "minimum": 0}}, ["kind", "nodes", "time"]),
        },
        "convergence_tol": _pos,
        "robustness": _obj({
            "failure_time": {"type": "number", "minimum": 0},
            "cases": _obj({"cluster_link": _id_pair, "meta_link": _id_pair,
                           "cluster_actuator": _id, "meta_actuator": _id}),
        }),
    },
    ["agents", "edges", "roots", "bounds"],
)


@dataclass(frozen=True)
class RobustnessConfig:
    failure_time: float = 5.0
    cases: tuple = ()  # (name, FailureEvent without time) pairs declared in the file


@dataclass(frozen=True)
class ScenarioFile:
    name: str
    agent_ids: tuple
    basis: np.ndarray
    topology: Topology
    cascade: CascadeConfig
    bounds: SpectrumBounds
    v_min: float
    v_max: float
    dt: float
    t_end: float
    integrator: str
    ga: GAParams
    initial: dict
    failures: tuple
    seed: int
    convergence_tol: float
    robustness: RobustnessConfig
    source: str = None

    @property
    def n(self):
        return len(self.agent_ids)

    def with_seed(self, seed):
        seed = int(seed)
        return replace(self, seed=seed, ga=replace(self.ga, seed=seed))

    def with_failures(self, extra):
        return replace(self, failures=self.failures + tuple(extra))

    def index_of(self, label):
        lookup = {str(a): i for i, a in enumerate(self.agent_ids)}
        key = str(label)
        if key not in lookup:
            raise ScenarioError(f"unknown agent id {label!r}")
        return lookup[key]

    def initial_positions(self):
        if self.initial["mode"] == "explicit":
            return self.initial["z0"].copy()
        rng = np.random.default_rng(self.seed)
        lo_re, hi_re = self.initial["re"]
        lo_im, hi_im = self.initial["im"]
        return rng.uniform(lo_re, hi_re, self.n) + 1j * rng.uniform(lo_im, hi_im, self.n)


def _path(parts):
    out = ""
    for p in parts:
        out += f"[{p}]" if isinstance(p, int) else (f".{p}" if out else str(p))
    return out or "<root>"


def _line_of(text, needle, occurrence):
    """1-based line of the ``occurrence``-th match of ``needle`` in ``text``."""
    pos = -1
    for _ in range(occurrence):
        pos = text.find(needle, pos + 1)
        if pos < 0:
            return None
    return text.count("\n", 0, pos) + 1


def _no_duplicate_keys(pairs):
    out = {}
    for k, v in pairs:
        if k in out:
            raise ScenarioError(f"duplicate key {k!r}")
        out[k] = v
    return out


def parse_scenario(text, source=None):
    """Parse and validate scenario JSON text."""
    try:
        raw = json.loads(text, object_pairs_hook=_no_duplicate_keys)
    except json.JSONDecodeError as exc:
        raise ScenarioError(f"invalid JSON: {exc.msg}", line=exc.lineno) from None
    validator = jsonschema.Draft202012Validator(SCHEMA)
    errors = sorted(validator.iter_errors(raw), key=lambda e: (len(e.absolute_path), list(map(str, e.absolute_path))))
    if errors:
        err = errors[0]
        raise ScenarioError(f"schema violation: {err.message}", path=_path(err.absolute_path))
    return _build(raw, text, source)


def load_scenario(path):
    path = str(path)
    try:
        with open(path) as fh:
            text = fh.read()
    except OSError as exc:
        raise ScenarioError(f"cannot read scenario: {exc.strerror}", path=path) from None
    return parse_scenario(text, source=path)


def bundled_scenario_path(name="thirty_agents.json"):
    return str(resources.files("cascadeform") / "data" / name)


def _build(raw, text, source):
    agents = raw["agents"]
    ids, index = [], {}
    for k, a in enumerate(agents):
        key = str(a["id"])
        if key in index:
            needle = json.dumps(a["id"])
            line = _line_of(text, needle, 2) if text.count(needle) >= 2 else None
            raise ScenarioError(f"duplicate agent id {a['id']!r}", path=f"agents[{k}].id", line=line)
        index[key] = k
        ids.append(a["id"])
    xi = np.array([complex(*a["position"]) for a in agents])

    def ref(label, where):
        key = str(label)
        if key not in index:
            raise ScenarioError(f"unknown agent id {label!r}", path=where)
        return index[key]

    def ref_pair(p, where):
        a, b = ref(p[0], f"{where}[0]"), ref(p[1], f"{where}[1]")
        if a == b:
            raise ScenarioError(f"pair must name two different agents, got {p}", path=where)
        return a, b

    edges = [ref_pair(e, f"edges[{k}]") for k, e in enumerate(raw["edges"])]
    roots = ref_pair(raw["roots"], "roots")
    try:
        topo = Topology(len(ids), edges, roots)
        bounds = SpectrumBounds(raw["bounds"]["lambda_min_bar"], raw["bounds"]["lambda_max_bar"])
    except DomainError as exc:
        raise ScenarioError(str(exc), path="edges" if "edge" in str(exc) else "bounds") from None
    dists = np.abs(xi[:, None] - xi[None, :]) + np.eye(len(ids))
    if np.any(dists == 0):
        i, j = sorted(np.argwhere(dists == 0)[0])
        raise ScenarioError(f"agents {ids[i]!r} and {ids[j]!r} share a formation position", path=f"agents[{j}].position")

    cascade = None
    if "cascade" in raw:
        c = raw["cascade"]
        clusters = []
        for k, cl in enumerate(c["clusters"]):
            members = tuple(ref(m, f"cascade.clusters[{k}].members[{i}]") for i, m in enumerate(cl["members"]))
            croots = ref_pair(cl["roots"], f"cascade.clusters[{k}].roots")
            clusters.append(ClusterSpec(members, croots))
        meta_edges = tuple(ref_pair(e, f"cascade.meta_edges[{k}]") for k, e in enumerate(c["meta_edges"]))
        meta_roots = ref_pair(c["meta_roots"], "cascade.meta_roots") if "meta_roots" in c else roots
        cascade = CascadeConfig(tuple(clusters), meta_edges, meta_roots,
                                c.get("root_rows", "leader"), c.get("meta_leaders", True))

    sat = raw.get("saturation", {"v_min": -10.0, "v_max": 10.0})
    if not (sat["v_min"] < sat["v_max"] and sat["v_min"] <= 0 <= sat["v_max"]):
        raise ScenarioError("saturation needs v_min <= 0 <= v_max and v_min < v_max", path="saturation")
    integ = raw.get("integration", {})
    dt, t_end = float(integ.get("dt", 0.01)), float(integ.get("t_end", 30.0))
    if t_end < dt:
        raise ScenarioError("t_end must be at least dt", path="integration.t_end")
    seed = int(raw.get("seed", 0))
    try:
        ga = GAParams(**raw.get("ga", {}), seed=seed)
    except DomainError as exc:
        raise ScenarioError(str(exc), path="ga") from None

    init = raw.get("initial_positions", {"mode": "random_box", "re": [-20.0, 20.0], "im": [-20.0, 20.0]})
    if init["mode"] == "explicit":
        z0 = np.full(len(ids), np.nan, dtype=np.complex128)
        for k, p in enumerate(init["positions"]):
            z0[ref(p["id"], f"initial_positions.positions[{k}].id")] = complex(*p["position"])
        missing = [ids[i] for i in np.flatnonzero(np.isnan(z0.real))]
        if missing:
            raise ScenarioError(f"no initial position for agents {missing[:5]}", path="initial_positions.positions")
        initial = {"mode": "explicit", "z0": z0}
    else:
        for axis in ("re", "im"):
            if not init[axis][0] < init[axis][1]:
                raise ScenarioError("interval must be increasing", path=f"initial_positions.{axis}")
        initial = {"mode": "random_box", "re": tuple(init["re"]), "im": tuple(init["im"])}

    failures = []
    for k, f in enumerate(raw.get("failures", [])):
        where = f"failures[{k}]"
        nodes = tuple(ref(v, f"{where}.nodes[{i}]") for i, v in enumerate(f["nodes"]))
        try:
            ev = FailureEvent(f["kind"], nodes, f["time"])
        except DomainError as exc:
            raise ScenarioError(str(exc), path=where) from None
        if ev.time > t_end:
            raise ScenarioError(f"failure time {ev.time} is after t_end {t_end}", path=f"{where}.time")
        if ev.kind == "link_failure" and not topo.has_edge(*nodes):
            raise ScenarioError(f"link {f['nodes']} is not an edge", path=f"{where}.nodes")
        failures.append(ev)

    rob = raw.get("robustness", {})
    cases = []
    for name, val in sorted(rob.get("cases", {}).items()):
        where = f"robustness.cases.{name}"
        if name.endswith("_link"):
            nodes = ref_pair(val, where)
            if not topo.has_edge(*nodes):
                raise ScenarioError(f"link {val} is not an edge", path=where)
            cases.append((name, FailureEvent("link_failure", nodes)))
        else:
            cases.append((name, FailureEvent("actuator_failure", (ref(val, where),))))
    if rob.get("cases") and cascade is None:
        raise ScenarioError("robustness cases need a cascade block", path="robustness")
    robustness = RobustnessConfig(float(rob.get("failure_time", min(5.0, t_end))), tuple(cases))
    if robustness.failure_time > t_end:
        raise ScenarioError("failure time is after t_end", path="robustness.failure_time")

    return ScenarioFile(
        name=raw.get("name", ""),
        agent_ids=tuple(ids),
        basis=xi,
        topology=topo,
        cascade=cascade,
        bounds=bounds,
        v_min=float(sat["v_min"]),
        v_max=float(sat["v_max"]),
        dt=dt,
        t_end=t_end,
        integrator=integ.get("integrator", "rk4"),
        ga=ga,
        initial=initial,
        failures=tuple(failures),
        seed=seed,
        convergence_tol=float(raw.get("convergence_tol", 1e-2)),
        robustness=robustness,
        source=source,
    )


_KINDS = {"link": "link_failure", "link_failure": "link_failure",
          "actuator": "actuator_failure", "actuator_failure": "actuator_failure"}


def parse_failure_flag(flag, scenario):
    """Parse ``KIND:ARGS:TIME``, e.g. ``link:a3,a4:5.0`` or ``actuator:a7:2``."""
    parts = flag.split(":")
    if len(parts) != 3 or parts[0] not in _KINDS:
        raise ScenarioError(f"--failure expects KIND:ARGS:TIME with KIND in link|actuator, got {flag!r}")
    kind = _KINDS[parts[0]]
    try:
        time = float(parts[2])
    except ValueError:
        raise ScenarioError(f"--failure time must be a number, got {parts[2]!r}") from None
    nodes = tuple(scenario.index_of(tok.strip()) for tok in parts[1].split(","))
    try:
        ev = FailureEvent(kind, nodes, time)
    except DomainError as exc:
        raise ScenarioError(f"--failure {flag!r}: {exc}") from None
    if ev.time > scenario.t_end:
        raise ScenarioError(f"--failure time {ev.time} is after t_end {scenario.t_end}")
    if kind == "link_failure" and not scenario.topology.has_edge(*nodes):
        raise ScenarioError(f"--failure link {parts[1]} is not an edge")
    return ev
