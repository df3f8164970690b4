import numpy as np
import pytest
import yaml

from grafem.exceptions import ScenarioError
from grafem.mesh import write_tetgen
from grafem.meshing import box_mesh
from grafem.scenario import (
    builtin_scenario,
    builtin_scenarios,
    build_mesh,
    build_simulation,
    dump_scenario,
    load_scenario,
    parse_scenario,
    run_scenario,
)

MINIMAL = """
name: tiny
mode: quasi_static
duration: 0.2
mesh: {generator: box, options: {size: [0.2, 0.05, 0.05], divisions: [4, 1, 1]}}
material: {youngs: 1.0e6, poisson: 0.3, sigma_thres: 2.0e4}
solver: {dt: 0.1, linear_solver: direct, damage_iterations: 5}
node_sets:
  left: {box: [[-1, -1, -1], [1.0e-9, 1, 1]]}
  right: {box: [[0.1999999, -1, -1], [1, 1, 1]]}
boundary:
  - {name: left, set: left}
  - {name: right, set: right, kind: translate, times: [0, 0.2], values: [[0, 0, 0], [0.004, 0, 0]]}
probe: {kind: reaction, target: right}
output: {frame_every: 1}
"""


def _edit(text, **changes):
    data = yaml.safe_load(text)
    for path, value in changes.items():
        node = data
        *parents, leaf = path.split("__")
        for p in parents:
            node = node[p]
        node[leaf] = value
    return yaml.safe_dump(data)


def test_minimal_config_parses():
    c = parse_scenario(MINIMAL)
    assert c.name == "tiny" and c.mode == "quasi_static"
    assert c.material.to_params().sigma_thres == 2.0e4
    assert c.solver.to_config().linear_solver == "direct"


@pytest.mark.parametrize("changes, fragment", [
    (dict(solver__dt=-0.1), "dt must be positive"),
    (dict(material__stifness=3.0), "stifness"),
    (dict(probe={"kind": "reaction", "target": "middle"}), "unknown boundary group"),
    (dict(boundary=[{"name": "left", "set": "nowhere"}]), "unknown node set"),
    (dict(mesh={"generator": "box", "options": {"sides": 3}}), "sides"),
    (dict(material__energy_model="rubber"), "energy_model"),
])
def test_invalid_configs_are_rejected(changes, fragment):
    with pytest.raises(ScenarioError) as err:
        parse_scenario(_edit(MINIMAL, **changes))
    assert any(fragment in e for e in err.value.errors)


def test_every_problem_is_reported_at_once():
    with pytest.raises(ScenarioError) as err:
        parse_scenario(_edit(MINIMAL, solver__dt=-1.0, material__colour="red"))
    assert len(err.value.errors) >= 2


def test_yaml_syntax_and_shape_errors():
    with pytest.raises(ScenarioError, match="YAML"):
        parse_scenario("mesh: [unclosed")
    with pytest.raises(ScenarioError, match="mapping"):
        parse_scenario("- just\n- a list\n")


def test_empty_node_set_is_reported():
    text = _edit(MINIMAL, node_sets__left={"box": [[5, 5, 5], [6, 6, 6]]})
    with pytest.raises(ScenarioError, match="selects no nodes"):
        build_simulation(parse_scenario(text))


@pytest.mark.parametrize("name", sorted(builtin_scenarios()))
def test_builtins_survive_a_text_round_trip(name):
    c = builtin_scenario(name)
    again = parse_scenario(dump_scenario(c))
    assert again == c


def test_charpy_variants_differ_only_in_strength():
    low = builtin_scenario("charpy_low").model_dump()
    high = builtin_scenario("charpy_high").model_dump()
    assert low["material"].pop("sigma_thres") < high["material"].pop("sigma_thres")
    low.pop("name"), high.pop("name")
    assert low == high


def test_pull_materials_differ_only_in_kernel_radius():
    stone, wood, cheese = (builtin_scenario(f"pull_{m}").model_dump() for m in ("stone", "wood", "cheese"))
    radii = [d["material"].pop("r_d") for d in (stone, wood, cheese)]
    width = stone["mesh"]["options"]["size"][1]
    assert radii == [0.0, pytest.approx(0.1 * width), pytest.approx(0.5 * width)]
    for d in (stone, wood, cheese):
        d.pop("name")
    assert stone == wood == cheese


def test_brazilian_cylinder_lies_horizontally():
    mesh = build_mesh(builtin_scenario("brazilian").mesh)
    extent = np.ptp(mesh.rest_positions, axis=0)
    assert extent[0] == pytest.approx(0.255)
    assert extent[1] == pytest.approx(0.1) and extent[2] == pytest.approx(0.1)


@pytest.mark.parametrize("name", sorted(builtin_scenarios()))
def test_builtins_build(name):
    sim = build_simulation(builtin_scenario(name))
    assert sim.mesh.n_tets > 0
    assert sim.bc.dofs.size > 0 or sim.colliders


def test_run_writes_outputs_and_clears_the_marker(tmp_path):
    out = tmp_path / "run"
    outcome = run_scenario(parse_scenario(MINIMAL), out_dir=out)
    names = sorted(p.name for p in out.iterdir())
    assert "INCOMPLETE" not in names
    assert {"metrics.csv", "damage.log", "manifest.txt", "frame_000000.obj", "frame_000002.obj"} <= set(names)
    lines = (out / "metrics.csv").read_text().splitlines()
    assert lines[0].startswith("step,time,")
    assert len(lines) == 1 + len(outcome.metrics) == 4
    manifest = (out / "manifest.txt").read_text()
    assert "config_sha256:" in manifest and "pattern_constant: True" in manifest


def test_tetgen_paths_resolve_against_the_config(tmp_path):
    (tmp_path / "meshes").mkdir()
    write_tetgen(box_mesh((0.2, 0.05, 0.05), (4, 1, 1)), tmp_path / "meshes" / "bar")
    text = _edit(MINIMAL, mesh={"generator": "tetgen", "path": "meshes/bar"})
    cfg_path = tmp_path / "tiny.yaml"
    cfg_path.write_text(text)
    c = load_scenario(cfg_path)
    assert build_mesh(c.mesh).n_tets == 24
    assert run_scenario(c).state.step == 2


def test_tetgen_needs_a_path():
    with pytest.raises(ScenarioError):
        parse_scenario(_edit(MINIMAL, mesh={"generator": "tetgen"}))


def test_unknown_builtin():
    with pytest.raises(ScenarioError, match="unknown scenario"):
        builtin_scenario("tensile")
