import csv

import numpy as np
import pytest

from grafem.exceptions import ConvergenceError
from grafem.fem import SimState, lumped_mass, total_energy
from grafem.fracture import FractureModel
from grafem.materials import MaterialParams
from grafem.meshing import box_mesh
from grafem.timestep import (
    METRIC_COLUMNS,
    BCGroup,
    BoundaryCondition,
    Probe,
    Simulation,
    SolverConfig,
    dynamic_step,
    quasi_static_step,
    write_metrics,
)
from grafem.viz import VizMesh

STVK = MaterialParams(youngs=1e4, poisson=0.3, density=1000.0, energy_model="stvk")
NEO = MaterialParams(youngs=1e4, poisson=0.3, density=1000.0)

L, W, H = 1.0, 0.2, 0.2


@pytest.fixture
def bar():
    return box_mesh((L, W, H), (6, 2, 2))


def _at(mesh, axis, value):
    return np.flatnonzero(np.isclose(mesh.rest_positions[:, axis], value))


def _node(mesh, point):
    return int(np.argmin(np.linalg.norm(mesh.rest_positions - np.asarray(point), axis=1)))


def _roller_pull(mesh, stretch, t_end=1.0):
    """Uniaxial pull along x: both end faces slide freely in y and z, rigid modes pinned."""
    return BoundaryCondition([
        BCGroup("left", _at(mesh, 0, 0.0), components=(0,)),
        BCGroup("right", _at(mesh, 0, L), "translate", times=(0.0, t_end),
                values=((0, 0, 0), (stretch, 0, 0)), components=(0,)),
        BCGroup("pin", [_node(mesh, (0, 0, 0))], components=(1, 2)),
        BCGroup("spin", [_node(mesh, (0, W, 0))], components=(2,)),
    ])


def test_unloaded_quasi_static_step_keeps_rest(bar):
    bc = _roller_pull(bar, 0.0)
    s = SimState.initial(bar)
    _, r = quasi_static_step(bar, s, STVK, bc, SolverConfig(dt=1.0), 1.0)
    assert r.iterations <= 1
    assert np.all(s.displacements == 0.0)


def test_small_stretch_matches_linear_elasticity(bar):
    strain = 1e-3
    bc = _roller_pull(bar, strain * L)
    s = SimState.initial(bar)
    _, r = quasi_static_step(bar, s, STVK, bc, SolverConfig(dt=1.0), 1.0)
    right = bc.group("right").nodes
    load = r.reaction.reshape(-1, 3)[right, 0].sum()
    assert load == pytest.approx(STVK.youngs * strain * W * H, rel=0.05)
    # lateral contraction across the width
    top, bottom = _at(bar, 1, W), _at(bar, 1, 0.0)
    lateral = (s.displacements[top, 1].mean() - s.displacements[bottom, 1].mean()) / W
    assert lateral == pytest.approx(-STVK.poisson * strain, rel=0.05)


def test_pull_past_threshold_breaks_and_stays_in_equilibrium(bar):
    params = STVK.replace(sigma_thres=5.0)
    bc = _roller_pull(bar, 3e-3)
    s = SimState.initial(bar)
    config = SolverConfig(dt=1.0, damage_iterations=3)
    _, r = quasi_static_step(bar, s, params, bc, config, 1.0, fracture=FractureModel(bar, params))
    assert s.broken_count > 0
    assert r.newly_broken.size == s.broken_count
    assert r.residual <= config.resolved_newton_tol(bar, params)


def test_newton_failure_raises_with_diagnostics(bar):
    bc = _roller_pull(bar, 0.3)
    config = SolverConfig(dt=1.0, newton_max_iters=0, max_increment_halvings=1)
    with pytest.raises(ConvergenceError) as err:
        quasi_static_step(bar, SimState.initial(bar), NEO, bc, config, 1.0)
    assert "residual" in err.value.diagnostics


@pytest.mark.parametrize("params", [STVK, NEO], ids=["stvk", "neo"])
def test_dynamic_rest_state_is_unchanged(bar, params):
    s = SimState.initial(bar)
    for _ in range(5):
        dynamic_step(bar, s, params, BoundaryCondition(), SolverConfig(dt=1e-3))
    # cell sizes are not exact binary fractions, so the rest gradient is the identity up to round-off
    assert np.abs(s.displacements).max() <= 1e-15 * L
    assert np.abs(s.velocities).max() <= 1e-15
    assert s.time == pytest.approx(5e-3)


def test_free_fall_is_exact(bar):
    g = np.array([0.0, 0.0, -9.81])
    dt, n = 1e-3, 20
    s = SimState.initial(bar)
    config = SolverConfig(dt=dt, gravity=tuple(g))
    for _ in range(n):
        dynamic_step(bar, s, NEO, BoundaryCondition(), config)
    np.testing.assert_allclose(s.velocities, np.tile(n * dt * g, (bar.n_nodes, 1)), rtol=1e-12)


def test_nodes_of_fully_broken_elements_fly_ballistically(two_tets):
    s = SimState.initial(two_tets)
    s.element_chi[1] = 0.0
    v0 = np.array([1.0, 2.0, -3.0])
    s.velocities[4] = v0
    dt, n = 1e-3, 10
    config = SolverConfig(dt=dt, linear_solver="direct")
    for _ in range(n):
        dynamic_step(two_tets, s, NEO, BoundaryCondition(), config)
    np.testing.assert_allclose(s.displacements[4], n * dt * v0, rtol=1e-12)
    np.testing.assert_allclose(s.velocities[4], v0, rtol=1e-12)


def test_undamped_energy_does_not_grow(bar):
    s = SimState.initial(bar)
    s.displacements[:, 1] = 0.02 * np.sin(np.pi * bar.rest_positions[:, 0]) * bar.rest_positions[:, 0]
    mass = lumped_mass(bar, NEO)
    config = SolverConfig(dt=1e-3)

    def energy():
        return total_energy(bar, s.displacements, NEO) + 0.5 * np.sum(mass[:, None] * s.velocities ** 2)

    history = [energy()]
    for _ in range(100):
        dynamic_step(bar, s, NEO, BoundaryCondition(), config, mass=mass)
        history.append(energy())
    assert history[-1] <= history[0]
    assert np.all(np.diff(history) <= 1e-9 * history[0])


@pytest.mark.parametrize("mode", ["dynamic", "quasi_static"])
def test_constrained_nodes_follow_their_schedule(bar, mode):
    bc = BoundaryCondition([
        BCGroup("left", _at(bar, 0, 0.0)),
        BCGroup("right", _at(bar, 0, L), "translate", times=(0.0, 0.01, 0.02),
                values=((0, 0, 0), (1e-3, 2e-4, 0), (0, 0, -1e-3))),
    ])
    sim = Simulation(bar, NEO, bc, SolverConfig(dt=2.5e-3), mode=mode)
    right = bc.group("right").nodes
    for _ in range(8):
        sim.step()
        expected = bc.prescribed(sim.state.time, bar.rest_positions).reshape(-1, 3)
        np.testing.assert_array_equal(sim.state.displacements[right], expected[right])
        assert np.all(sim.state.displacements[bc.group("left").nodes] == 0.0)


def test_rotation_keyframes():
    X = np.array([[1.0, 0.0, 0.0], [0.0, 0.0, 2.0]])
    g = BCGroup("spin", [0, 1], "rotate", times=(0.0, 1.0), values=(0.0, np.pi), axis=(0, 0, 1))
    np.testing.assert_allclose(g.displacement(0.5, X), [[-1.0, 1.0, 0.0], [0.0, 0.0, 0.0]], atol=1e-15)
    np.testing.assert_allclose(g.displacement(2.0, X)[0], [-2.0, 0.0, 0.0], atol=1e-15)


def test_fracturing_run_keeps_the_pattern(bar):
    params = NEO.replace(sigma_thres=20.0)
    bc = BoundaryCondition([
        BCGroup("left", _at(bar, 0, 0.0)),
        BCGroup("right", _at(bar, 0, L), "translate", times=(0.0, 0.02), values=((0, 0, 0), (0.02, 0, 0))),
    ])
    sim = Simulation(bar, params, bc, SolverConfig(dt=1e-3), probes=[Probe("reaction", "right")])
    result = sim.run(n_steps=20)
    assert result.state.broken_count > 0
    assert result.pattern_constant
    assert len(result.metrics) == 21
    assert max(r["load"] for r in result.metrics) > 0


def test_zero_duration_run_writes_only_the_initial_frame(bar, tmp_path):
    sim = Simulation(bar, NEO, BoundaryCondition(), SolverConfig(), viz=VizMesh.from_mesh(bar),
                     frame_every=1, out_dir=tmp_path)
    result = sim.run(duration=0.0)
    assert len(result.metrics) == 1 and result.metrics[0]["step"] == 0
    assert [p.name for p in result.frames] == ["frame_000000.obj"]


def test_metrics_csv_round_trip(bar, tmp_path):
    sim = Simulation(bar, NEO, BoundaryCondition(), SolverConfig(dt=1e-3, gravity=(0, 0, -9.81)))
    metrics = sim.run(n_steps=3).metrics
    path = tmp_path / "metrics.csv"
    write_metrics(path, metrics)
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    assert tuple(rows[0]) == METRIC_COLUMNS
    for row, expected in zip(rows[1:], metrics):
        assert [float(v) for v in row] == [float(expected[k]) for k in METRIC_COLUMNS]


@pytest.mark.parametrize("kwargs", [
    dict(kind="slide"),
    dict(kind="translate", times=(0.0, 0.0), values=((0, 0, 0), (1, 0, 0))),
    dict(kind="translate", times=(0.0, 1.0), values=((0, 0, 0),)),
    dict(components=(3,)),
    dict(components=()),
])
def test_invalid_boundary_groups(kwargs):
    with pytest.raises(ValueError):
        BCGroup("g", [0, 1], **kwargs)


def test_overlapping_groups_are_rejected():
    with pytest.raises(ValueError, match="more than one group"):
        BoundaryCondition([BCGroup("a", [0, 1]), BCGroup("b", [1, 2])])
    # disjoint components on the same node are fine
    bc = BoundaryCondition([BCGroup("a", [0], components=(0,)), BCGroup("b", [0], components=(1, 2))])
    np.testing.assert_array_equal(bc.dofs, [0, 1, 2])


@pytest.mark.parametrize("build", [
    lambda: Probe("strain", "a"),
    lambda: Probe("reaction", ("a", "b")),
    lambda: SolverConfig(dt=-1.0),
    lambda: SolverConfig(linear_solver="lu"),
    lambda: SolverConfig(contact_substeps=0),
])
def test_invalid_probe_and_solver_settings(build):
    with pytest.raises(ValueError):
        build()


def test_unknown_mode(bar):
    with pytest.raises(ValueError):
        Simulation(bar, NEO, BoundaryCondition(), SolverConfig(), mode="explicit")
