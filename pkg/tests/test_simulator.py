import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from cascadeform import (DivergenceError, DomainError, FailureEvent, GAParams, Scenario, SpectrumBounds,
                         Topology, Trajectory, apply_failure, build_laplacian, control_inputs, convergence_time,
                         design_stabilizer, formation_error, propagate_exact, run, step,
                         synthesize_weights)
from cascadeform.simulator import run_summary, write_error_csv, write_series_csv

from conftest import complete, random_basis


@pytest.fixture(scope="module")
def system6():
    rng = np.random.default_rng(6)
    g, xi = complete(6), random_basis(rng, 6)
    lap = build_laplacian(g, synthesize_weights(g, xi, 6), xi)
    d, _ = design_stabilizer(lap, SpectrumBounds(0.5, 20), GAParams(population_size=40, generations=60))
    return g, xi, d[:, None] * lap.matrix


def test_controls_vanish_on_formation(system6):
    _, xi, a = system6
    assert np.max(np.abs(control_inputs(xi, a, -10, 10))) <= 1e-9
    assert np.max(np.abs(control_inputs(np.ones(6), a, -10, 10))) <= 1e-12


def test_clamp_is_componentwise():
    a = np.array([[-(15 + 3j)]])
    assert control_inputs(np.array([1.0 + 0j]), a, -10, 10)[0] == 10 + 3j
    a = np.array([[30 - 40j]])
    assert control_inputs(np.array([1.0 + 0j]), a, -10, 10)[0] == -10 + 10j


@settings(max_examples=200, deadline=None)
@given(st.integers(0, 2**32 - 1), st.floats(0.1, 50))
def test_controls_always_within_bounds(seed, vmax):
    rng = np.random.default_rng(seed)
    a = 10 * (rng.standard_normal((5, 5)) + 1j * rng.standard_normal((5, 5)))
    z = 10 * (rng.standard_normal(5) + 1j * rng.standard_normal(5))
    u = control_inputs(z, a, -vmax, vmax)
    assert np.all(np.abs(u.real) <= vmax) and np.all(np.abs(u.imag) <= vmax)


def test_euler_scalar_decay():
    out = step(np.array([1.0 + 0j]), np.array([[1.0 + 0j]]), 0.1, "euler", -10, 10)
    assert out[0] == pytest.approx(0.9)


def test_equilibrium_is_held(system6):
    _, xi, a = system6
    z = 3 + (1 - 2j) * xi
    for integ in ("euler", "rk4"):
        assert np.max(np.abs(step(z, a, 0.01, integ, -10, 10) - z)) <= 1e-10


def test_step_rejects_unknown_integrator():
    with pytest.raises(DomainError):
        step(np.ones(2, complex), np.eye(2), 0.1, "midpoint", -1, 1)


def test_step_detects_non_finite():
    with pytest.raises(DivergenceError):
        step(np.array([1e308 + 0j]), np.array([[-1e308 + 0j]]), 10.0, "euler", -np.inf, np.inf, t=2.0)


def test_rk4_matches_spectral_propagator(system6):
    _, xi, a = system6
    z0 = np.random.default_rng(1).uniform(-5, 5, 6) + 0j
    tr = run(Scenario(a, xi, z0, 1e-3, 1.0, -np.inf, np.inf))
    assert np.max(np.abs(tr.states[-1] - propagate_exact(a, z0, 1.0))) <= 1e-6


def test_formation_error_examples():
    rng = np.random.default_rng(2)
    xi = random_basis(rng, 7)
    assert formation_error(xi, xi) <= 1e-12
    assert formation_error(2 + (1 + 1j) * xi, xi) <= 1e-12
    basis = np.column_stack([np.ones(7), xi])
    q, _ = np.linalg.qr(basis)
    v = rng.standard_normal(7) + 1j * rng.standard_normal(7)
    v -= q @ (q.conj().T @ v)
    v *= 0.1 * np.linalg.norm(xi - xi.mean()) / np.linalg.norm(v)
    assert formation_error(xi + v, xi) == pytest.approx(0.1, rel=1e-10)


def test_formation_error_degenerate_basis():
    with pytest.raises(DomainError):
        formation_error(np.ones(3), np.ones(3))


def test_link_failure_keeps_row_sums(system6):
    g, _, a = system6
    b, frozen = apply_failure(a, FailureEvent("link_failure", (2, 4)), topology=g)
    assert b[2, 4] == 0 and b[4, 2] == 0 and not frozen.any()
    assert np.allclose(b.sum(axis=1), a.sum(axis=1), atol=1e-12)
    assert np.array_equal(np.delete(b, [2, 4], axis=0), np.delete(a, [2, 4], axis=0))


def test_link_failure_on_missing_edge():
    g = Topology(4, [(0, 1), (1, 2), (2, 3), (3, 0)])
    with pytest.raises(DomainError):
        apply_failure(np.eye(4), FailureEvent("link_failure", (0, 2)), topology=g)
    with pytest.raises(DomainError):
        apply_failure(np.eye(4), FailureEvent("link_failure", (0, 2)))


def test_actuator_failure_freezes_agent(system6):
    _, xi, a = system6
    b, frozen = apply_failure(a, FailureEvent("actuator_failure", (3,)))
    assert np.array_equal(a, b) and frozen.tolist() == [False, False, False, True, False, False]
    z0 = np.arange(6) * (1 + 1j)
    tr = run(Scenario(a, xi, z0, 0.01, 1.0, failures=(FailureEvent("actuator_failure", (3,), 0.0),)))
    assert np.all(tr.states[:, 3] == z0[3]) and np.all(tr.controls[:, 3] == 0)


def test_failure_event_validation():
    with pytest.raises(DomainError):
        FailureEvent("bitflip", (1,))
    with pytest.raises(DomainError):
        FailureEvent("link_failure", (1,))
    with pytest.raises(DomainError):
        FailureEvent("link_failure", (1, 1))
    with pytest.raises(DomainError):
        FailureEvent("actuator_failure", (1,), -1.0)


def test_event_applied_at_first_step_boundary(system6):
    g, xi, a = system6
    ev = FailureEvent("link_failure", (0, 3), 0.234)
    tr = run(Scenario(a, xi, xi * 2, 0.1, 1.0, failures=(ev,), topology=g))
    assert tr.events_applied[0]["applied_at"] == pytest.approx(0.3)


def test_run_stays_in_formation(system6):
    _, xi, a = system6
    tr = run(Scenario(a, xi, 1 - 2j + 0.5j * xi, 0.01, 2.0))
    assert np.max(tr.formation_errors) <= 1e-12
    assert convergence_time(tr, 1e-2) == 0.0


def test_run_flags_divergence():
    a = -np.eye(3, dtype=complex)
    a[0, 1] = 0.5
    tr = run(Scenario(a, np.array([0, 1, 1j]), np.ones(3) + 1j, 0.1, 100.0, -np.inf, np.inf))
    assert tr.diverged and tr.diverged_at < 100 and len(tr) < 1001
    assert convergence_time(tr, 1e-2) is None


def test_scenario_validation(system6):
    _, xi, a = system6
    with pytest.raises(DomainError):
        Scenario(a, xi, xi, 0.01, 1.0, v_min=1, v_max=2)
    with pytest.raises(DomainError):
        Scenario(a, xi, xi, 0.01, 1.0, integrator="leapfrog")
    with pytest.raises(DomainError):
        Scenario(a, xi, xi, 0.01, 1.0, failures=(FailureEvent("actuator_failure", (1,), 5.0),))


def _traj(errors, dt=0.5):
    e = np.asarray(errors, dtype=float)
    t = np.arange(e.size) * dt
    z = np.zeros((e.size, 1), complex)
    return Trajectory(t, z, z, e)


def test_convergence_time_examples():
    assert convergence_time(_traj([0, 0, 0]), 1e-2) == 0.0
    assert convergence_time(_traj([1, 1, 0.5]), 1e-2) is None
    assert convergence_time(_traj([1, 0.1, 0.01, 0.001, 1e-4]), 1e-2) == 1.0
    assert convergence_time(_traj([1, 0.001, 0.5, 0.001, 1e-4]), 1e-2) == 1.5


def test_run_is_deterministic(system6):
    _, xi, a = system6
    z0 = np.random.default_rng(0).uniform(-10, 10, 6) * (1 + 0.5j)
    s = Scenario(a, xi, z0, 0.01, 3.0)
    assert run(s).states.tobytes() == run(s).states.tobytes()


def test_csv_writers(tmp_path, system6):
    _, xi, a = system6
    tr = run(Scenario(a, xi, xi + 1, 0.5, 1.0))
    write_series_csv(tmp_path / "s.csv", tr.times, tr.states, "z")
    lines = (tmp_path / "s.csv").read_text().splitlines()
    assert lines[0].split(",")[:3] == ["t", "re_z1", "im_z1"] and len(lines) == 4
    write_error_csv(tmp_path / "e.csv", tr.times, {"error": tr.formation_errors})
    assert (tmp_path / "e.csv").read_text().splitlines()[0] == "t,error"
    summ = run_summary(tr, 1e-2)
    assert summ["version"] == 1 and summ["n_samples"] == 3
