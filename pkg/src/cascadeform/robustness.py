"""Failure experiments on a cascade design.

Four categories are exercised: a link inside a cluster, a link of the
meta-cluster, a frozen cluster follower and a frozen meta-cluster root.
A category's case is either declared in the scenario or picked by a fixed
rule: the first candidate (in the order of :func:`candidate_failures`)
whose post-failure matrix keeps every non-structural eigenvalue in the
open right half-plane. Every candidate is surveyed and reported, so the
selection stays auditable.
"""

from dataclasses import dataclass

import numpy as np

from .simulator import FailureEvent, Scenario, apply_failure, formation_error, run, run_summary
from .spectral import eigenvalues, kernel_residuals, numerical_rank

__all__ = ["CASE_NAMES", "candidate_failures", "post_failure_margin", "select_cases",
           "adjacent_clusters", "CaseResult", "run_case", "conventional_link_check"]

CASE_NAMES = ("cluster_link", "meta_link", "cluster_actuator", "meta_actuator")
STATE_BOUND_FACTOR = 10.0


def candidate_failures(network):
    """Non-trivial failure candidates per category, in a fixed order.

    Links between two meta co-leaders and frozen co-leaders are skipped
    when the co-leaders hold their position anyway, since those failures
    change nothing.
    """
    leaders = set(network.meta.leaders) if network.meta_leaders else set()
    cluster_links, cluster_acts = [], []
    for cl in network.clusters:
        followers = set(cl.followers)
        topo = cl.local_topology
        for a, b in topo.sorted_edges():
            ga, gb = cl.member_ids[a], cl.member_ids[b]
            if ga in followers or gb in followers:
                e = (min(ga, gb), max(ga, gb))
                if e not in cluster_links:
                    cluster_links.append(e)
        cluster_acts.extend(sorted(followers))
    meta_links = []
    roots = network.meta.root_ids
    for a, b in network.meta.topology.sorted_edges():
        ga, gb = roots[a], roots[b]
        if ga in leaders and gb in leaders:
            continue
        meta_links.append((min(ga, gb), max(ga, gb)))
    meta_acts = [r for r in sorted(roots) if r not in leaders]
    return {
        "cluster_link": [FailureEvent("link_failure", e) for e in cluster_links],
        "meta_link": [FailureEvent("link_failure", e) for e in meta_links],
        "cluster_actuator": [FailureEvent("actuator_failure", (v,)) for v in cluster_acts],
        "meta_actuator": [FailureEvent("actuator_failure", (v,)) for v in meta_acts],
    }


def post_failure_margin(system, event, topology=None):
    """Return ``(rank, min_re, stable)`` of the closed loop after ``event``.

    Frozen agents contribute zero rows. The ``n - rank`` eigenvalues of
    smallest magnitude are treated as structural and excluded from
    ``min_re``.
    """
    a, frozen = apply_failure(system, event, topology=topology)
    a[frozen] = 0.0
    n = a.shape[0]
    rank = numerical_rank(a)
    vals = eigenvalues(a).eigenvalues
    rest = vals[np.argsort(np.abs(vals), kind="stable")][n - rank:]
    min_re = float(rest.real.min()) if rest.size else float("inf")
    return rank, min_re, bool(min_re > 0)


def select_cases(network, system, declared=(), topology=None):
    """Pick one event per category; returns ``(cases, survey)``.

    ``cases`` maps a category to ``(event, how)`` where ``how`` is
    ``"declared"``, ``"first_stable"`` or ``"first_candidate"`` (no
    candidate kept the closed loop stable).
    """
    declared = dict(declared)
    cands = candidate_failures(network)
    cases, survey = {}, {}
    for name in CASE_NAMES:
        rows = []
        for ev in cands[name]:
            rank, min_re, ok = post_failure_margin(system, ev, topology)
            rows.append({"nodes": list(ev.nodes), "rank": rank, "min_re": min_re, "stable": ok})
        survey[name] = {"candidates": len(rows), "stable": sum(r["stable"] for r in rows), "detail": rows}
        if name in declared:
            cases[name] = (declared[name], "declared")
            continue
        pick = next((ev for ev, r in zip(cands[name], rows) if r["stable"]), None)
        if pick is not None:
            cases[name] = (pick, "first_stable")
        elif cands[name]:
            cases[name] = (cands[name][0], "first_candidate")
    return cases, survey


def adjacent_clusters(network, event):
    nodes = set(event.nodes)
    return [k for k, cl in enumerate(network.clusters) if nodes & set(cl.member_ids)]


@dataclass
class CaseResult:
    name: str
    event: FailureEvent
    how: str
    trajectory: object
    adjacent: list
    cluster_errors: list
    state_ratio: float
    tol: float
    post_rank: int
    post_min_re: float
    conventional: dict = None

    @property
    def unaffected_converged(self):
        return all(e < self.tol for k, e in enumerate(self.cluster_errors) if k not in self.adjacent)

    @property
    def bounded(self):
        return not self.trajectory.diverged and self.state_ratio <= STATE_BOUND_FACTOR

    @property
    def passed(self):
        return self.unaffected_converged and self.bounded

    def to_dict(self):
        out = {
            "event": self.event.to_dict(),
            "selected_by": self.how,
            "adjacent_clusters": self.adjacent,
            "cluster_final_errors": self.cluster_errors,
            "unaffected_converged": self.unaffected_converged,
            "state_ratio": self.state_ratio,
            "state_bound_factor": STATE_BOUND_FACTOR,
            "bounded": self.bounded,
            "post_failure": {"rank": self.post_rank, "min_re": self.post_min_re,
                             "stable": self.post_min_re > 0},
            "passed": self.passed,
            "summary": run_summary(self.trajectory, self.tol),
        }
        if self.conventional is not None:
            out["conventional"] = self.conventional
        return out


def run_case(name, event, how, network, system, sf, z0, failure_time):
    """Simulate the cascade with ``event`` injected at ``failure_time``."""
    timed = FailureEvent(event.kind, event.nodes, failure_time)
    traj = run(Scenario(system, network.global_basis, z0, sf.dt, sf.t_end, sf.v_min, sf.v_max,
                        sf.integrator, (timed,), sf.convergence_tol, sf.seed, network.topology))
    final = traj.states[-1]
    errs = [formation_error(final[list(cl.member_ids)], network.global_basis[list(cl.member_ids)])
            for cl in network.clusters]
    envelope = max(1.0, float(np.max(np.abs(z0))))
    ratio = float(np.max(np.abs(traj.states))) / envelope
    rank, min_re, _ = post_failure_margin(system, event, network.topology)
    return CaseResult(name, timed, how, traj, adjacent_clusters(network, event), errs, ratio,
                      sf.convergence_tol, rank, min_re)


def conventional_link_check(system, basis, event, topology=None, rel_tol=1e-9):
    """Formation conditions of a whole-network design after a link failure."""
    a, _ = apply_failure(system, event, topology=topology)
    r1, rxi = kernel_residuals(a, basis)
    fro = float(np.linalg.norm(a))
    rank = numerical_rank(a)
    n = a.shape[0]
    broken = rank != n - 2 or rxi > rel_tol * fro or r1 > rel_tol * fro
    return {"rank": rank, "expected_rank": n - 2, "residual_ones": r1, "residual_xi": rxi,
            "frobenius": fro, "conditions_broken": bool(broken)}
