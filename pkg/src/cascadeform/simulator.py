"""Closed-loop integration of ``z' = u``, ``u = sat(-A z)`` with failure injection.

``A`` is a stabilized Laplacian (conventional or assembled cascade). Each
component of every control sample is clamped to ``[v_min, v_max]``,
including the intermediate stages of rk4.
"""

import csv
import json
import logging
from dataclasses import dataclass, field

import numpy as np

from ._validation import check_complex_matrix, check_complex_vector, check_formation_basis
from .exceptions import DivergenceError, DomainError

__all__ = [
    "FailureEvent",
    "Scenario",
    "Trajectory",
    "INTEGRATORS",
    "SUMMARY_VERSION",
    "control_inputs",
    "apply_failure",
    "step",
    "formation_error",
    "run",
    "convergence_time",
    "write_series_csv",
    "write_error_csv",
    "run_summary",
    "dump_json",
    "format_float",
]

log = logging.getLogger(__name__)

INTEGRATORS = ("euler", "rk4")
FAILURE_KINDS = ("link_failure", "actuator_failure")
SUMMARY_VERSION = 1
DIVERGENCE_FACTOR = 1e6


@dataclass(frozen=True)
class FailureEvent:
    """``link_failure`` takes two node ids, ``actuator_failure`` one."""

    kind: str
    nodes: tuple
    time: float = 0.0

    def __post_init__(self):
        if self.kind not in FAILURE_KINDS:
            raise DomainError(f"unknown failure kind {self.kind!r}; expected one of {FAILURE_KINDS}")
        nodes = tuple(int(v) for v in np.atleast_1d(self.nodes))
        want = 2 if self.kind == "link_failure" else 1
        if len(nodes) != want:
            raise DomainError(f"{self.kind} takes {want} node id(s), got {nodes}")
        if want == 2 and nodes[0] == nodes[1]:
            raise DomainError(f"link failure needs two distinct nodes, got {nodes}")
        if not (np.isfinite(self.time) and self.time >= 0):
            raise DomainError(f"failure time must be finite and non-negative, got {self.time}")
        object.__setattr__(self, "nodes", nodes)
        object.__setattr__(self, "time", float(self.time))

    def to_dict(self):
        return {"kind": self.kind, "nodes": list(self.nodes), "time": self.time}


@dataclass(frozen=True)
class Scenario:
    system: np.ndarray
    basis: np.ndarray
    z0: np.ndarray
    dt: float
    t_end: float
    v_min: float = -10.0
    v_max: float = 10.0
    integrator: str = "rk4"
    failures: tuple = ()
    convergence_tol: float = 1e-2
    seed: int = 0
    topology: object = None

    def __post_init__(self):
        system = check_complex_matrix(self.system, name="system", square=True)
        n = system.shape[0]
        basis = check_formation_basis(self.basis, n=n)
        z0 = check_complex_vector(self.z0, name="z0", n=n)
        if not (self.dt > 0 and np.isfinite(self.dt)):
            raise DomainError(f"dt must be positive, got {self.dt}")
        if not self.t_end >= self.dt:
            raise DomainError(f"t_end ({self.t_end}) must be at least dt ({self.dt})")
        if not self.v_min < self.v_max:
            raise DomainError(f"saturation needs v_min < v_max, got ({self.v_min}, {self.v_max})")
        if not self.v_min <= 0.0 <= self.v_max:
            raise DomainError("saturation interval must contain 0 so agents can stop")
        if self.integrator not in INTEGRATORS:
            raise DomainError(f"integrator must be one of {INTEGRATORS}, got {self.integrator!r}")
        events = tuple(self.failures)
        for ev in events:
            if ev.time > self.t_end:
                raise DomainError(f"failure at t={ev.time} is after t_end={self.t_end}")
            for v in ev.nodes:
                if not 0 <= v < n:
                    raise DomainError(f"failure references node {v} outside 0..{n - 1}")
        object.__setattr__(self, "system", system)
        object.__setattr__(self, "basis", basis)
        object.__setattr__(self, "z0", z0)
        object.__setattr__(self, "dt", float(self.dt))
        object.__setattr__(self, "t_end", float(self.t_end))
        object.__setattr__(self, "v_min", float(self.v_min))
        object.__setattr__(self, "v_max", float(self.v_max))
        object.__setattr__(self, "failures", tuple(sorted(events, key=lambda e: e.time)))

    @property
    def n(self):
        return self.system.shape[0]

    @property
    def n_steps(self):
        return int(np.ceil(self.t_end / self.dt - 1e-9))


@dataclass
class Trajectory:
    times: np.ndarray
    states: np.ndarray
    controls: np.ndarray
    formation_errors: np.ndarray
    events_applied: list = field(default_factory=list)
    diverged: bool = False
    diverged_at: float = None
    system_final: np.ndarray = field(default=None, repr=False)
    frozen_final: np.ndarray = field(default=None, repr=False)

    def __len__(self):
        return len(self.times)


def control_inputs(z, system, v_min, v_max, frozen=None):
    """Saturated control ``clip(Re(-A z)) + i clip(Im(-A z))``; frozen agents get 0."""
    raw = -(system @ z)
    u = np.clip(raw.real, v_min, v_max) + 1j * np.clip(raw.imag, v_min, v_max)
    if frozen is not None:
        u[frozen] = 0.0
    return u


def apply_failure(system, event, frozen=None, topology=None):
    """Return ``(system', frozen')`` with ``event`` applied.

    A link failure deletes the coupling term in both endpoint rows and
    moves it onto their diagonals, so both rows keep summing to zero. An
    actuator failure marks the agent frozen; its column is untouched, so
    neighbors keep sensing it.

    Edge existence is checked against ``topology`` when given, otherwise
    against the sparsity of ``system``.
    """
    a = np.array(system, dtype=np.complex128, copy=True)
    n = a.shape[0]
    frozen = np.zeros(n, dtype=bool) if frozen is None else np.array(frozen, dtype=bool, copy=True)
    for v in event.nodes:
        if not 0 <= v < n:
            raise DomainError(f"failure references node {v} outside 0..{n - 1}")
    if event.kind == "actuator_failure":
        frozen[event.nodes[0]] = True
        return a, frozen
    i, j = event.nodes
    if topology is not None:
        present = topology.has_edge(i, j)
    else:
        present = a[i, j] != 0 or a[j, i] != 0
    if not present:
        raise DomainError(f"link ({i}, {j}) is not an edge of the network")
    a[i, i] += a[i, j]
    a[j, j] += a[j, i]
    a[i, j] = 0.0
    a[j, i] = 0.0
    return a, frozen


def step(z, system, dt, integrator, v_min, v_max, frozen=None, t=None):
    """Advance one step of size ``dt`` (euler or classical rk4)."""
    with np.errstate(over="ignore", invalid="ignore"):
        if integrator == "euler":
            out = z + dt * control_inputs(z, system, v_min, v_max, frozen)
        elif integrator == "rk4":
            k1 = control_inputs(z, system, v_min, v_max, frozen)
            k2 = control_inputs(z + 0.5 * dt * k1, system, v_min, v_max, frozen)
            k3 = control_inputs(z + 0.5 * dt * k2, system, v_min, v_max, frozen)
            k4 = control_inputs(z + dt * k3, system, v_min, v_max, frozen)
            out = z + (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
        else:
            raise DomainError(f"integrator must be one of {INTEGRATORS}, got {integrator!r}")
    if not np.all(np.isfinite(out)):
        raise DivergenceError("state became non-finite", time=t)
    return out


def formation_error(z, basis):
    """Distance from ``z`` to ``{c1 1 + c2 xi}``, relative to the centered basis norm."""
    xi = check_formation_basis(basis)
    z = check_complex_vector(z, name="z", n=xi.shape[0])
    centered = np.linalg.norm(xi - xi.mean())
    if centered == 0.0:
        raise DomainError("formation basis is a multiple of the ones vector")
    a = np.column_stack([np.ones_like(xi), xi])
    coef, *_ = np.linalg.lstsq(a, z, rcond=None)
    return float(np.linalg.norm(z - a @ coef) / centered)


def _due(event_time, t, dt):
    return t >= event_time - 1e-9 * dt


def run(s):
    """Integrate a scenario, applying each failure at the first step boundary
    at or after its time.

    Divergence (``||z||_inf`` above ``1e6`` times ``max(1, ||z0||_inf)``
    or a non-finite state) stops the run; the samples so far are kept and
    the trajectory is flagged.
    """
    n_steps = s.n_steps
    n = s.n
    times = np.empty(n_steps + 1)
    states = np.empty((n_steps + 1, n), dtype=np.complex128)
    controls = np.empty((n_steps + 1, n), dtype=np.complex128)
    errors = np.empty(n_steps + 1)
    system = s.system
    frozen = np.zeros(n, dtype=bool)
    pending = list(s.failures)
    applied = []
    limit = DIVERGENCE_FACTOR * max(1.0, float(np.max(np.abs(s.z0))))
    z = s.z0.copy()
    diverged_at = None
    k = 0
    while True:
        t = k * s.dt
        while pending and _due(pending[0].time, t, s.dt):
            ev = pending.pop(0)
            system, frozen = apply_failure(system, ev, frozen, s.topology)
            applied.append({**ev.to_dict(), "applied_at": t})
            log.debug("t=%g applied %s %s", t, ev.kind, ev.nodes)
        times[k] = t
        states[k] = z
        controls[k] = control_inputs(z, system, s.v_min, s.v_max, frozen)
        errors[k] = formation_error(z, s.basis)
        if k == n_steps:
            break
        try:
            z = step(z, system, s.dt, s.integrator, s.v_min, s.v_max, frozen, t)
        except DivergenceError:
            diverged_at = t + s.dt
            break
        if float(np.max(np.abs(z))) > limit:
            diverged_at = t + s.dt
            break
        k += 1
    m = k + 1
    if diverged_at is not None:
        log.warning("trajectory diverged at t=%g", diverged_at)
    return Trajectory(times[:m], states[:m], controls[:m], errors[:m], applied,
                      diverged_at is not None, diverged_at, system, frozen)


def convergence_time(traj, tol):
    """Earliest sample time after which the formation error stays at or below ``tol``."""
    if traj.diverged:
        return None
    err = np.asarray(traj.formation_errors)
    above = np.nonzero(err > tol)[0]
    if above.size == 0:
        return float(traj.times[0])
    last = int(above[-1])
    if last == err.size - 1:
        return None
    return float(traj.times[last + 1])


def format_float(x):
    """Shortest round-trip repr, so files are byte-stable across runs."""
    return repr(float(x))


def write_series_csv(path, times, series, prefix="z"):
    """Write complex series as ``t, re_<prefix>1, im_<prefix>1, ...``."""
    series = np.asarray(series)
    n = series.shape[1]
    header = ["t"]
    for i in range(1, n + 1):
        header += [f"re_{prefix}{i}", f"im_{prefix}{i}"]
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for t, row in zip(times, series):
            out = [format_float(t)]
            for v in row:
                out += [format_float(v.real), format_float(v.imag)]
            w.writerow(out)


def write_error_csv(path, times, columns):
    """``columns`` maps a column name to a real series aligned with ``times``."""
    names = list(columns)
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["t"] + names)
        for k, t in enumerate(times):
            w.writerow([format_float(t)] + [format_float(columns[c][k]) for c in names])


def run_summary(traj, tol):
    ct = convergence_time(traj, tol)
    return {
        "version": SUMMARY_VERSION,
        "converged": ct is not None,
        "convergence_time": ct,
        "convergence_tol": float(tol),
        "diverged": bool(traj.diverged),
        "diverged_at": traj.diverged_at,
        "final_error": float(traj.formation_errors[-1]),
        "max_control_magnitude": float(np.max(np.abs(traj.controls))),
        "n_samples": len(traj),
        "t_final": float(traj.times[-1]),
        "events": list(traj.events_applied),
    }


def dump_json(obj, path):
    with open(path, "w") as fh:
        json.dump(obj, fh, indent=2, sort_keys=True)
        fh.write("\n")
