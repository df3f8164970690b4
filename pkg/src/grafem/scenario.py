"""Scenario configs: a YAML grammar, validation, the built-in experiments, and the batch runner.

A config is a YAML mapping with these top-level keys (``mesh``,
``material`` and ``solver`` are required)::

    name: pull_stone
    mode: quasi_static | dynamic
    duration: 1.0                     # seconds of simulated (or load) time
    mesh:
      generator: box | notched_bar | cylinder | tetgen
      options: {size: [0.3, 0.1, 0.1], divisions: [15, 5, 5]}
      path: meshes/bar                # tetgen only: base name of .node/.ele
    material: {youngs: 1.0e7, poisson: 0.3, sigma_thres: 1.0e5, r_d: 0.0, ...}
    solver: {dt: 0.05, damage_iterations: 50, ...}
    screen_kernel: hat | flat
    node_sets:
      left: {box: [[-1, -1, -1], [1.0e-9, 1, 1]]}   # rest-space AABB, inclusive
      pin: {nodes: [0, 5, 9]}
    boundary:
      - {name: left, set: left, kind: translate, times: [0, 1], values: [[0,0,0], [-0.0045,0,0]]}
    colliders:
      - {name: striker, kind: sphere, radius: 0.005, times: [...], positions: [...]}
    probe: {kind: reaction | collider, target: left, direction: [-1, 0, 0]}
    initial_velocity: [0, 0, 0]
    output: {frame_every: 0}
    seed: 0

Unknown keys anywhere are rejected. Lengths are meters, stresses pascals.
"""

import hashlib
import inspect
import io
import platform
import time
from pathlib import Path
from typing import Any, Literal, Optional

import numpy as np
import scipy
import yaml
from pydantic import BaseModel, ConfigDict, Field, ValidationError, field_validator, model_validator

from . import meshing
from .collision import Collider
from .exceptions import ScenarioError
from .materials import ENERGY_MODELS, MaterialParams
from .mesh import TetMesh, load_tetgen_files
from .timestep import BCGroup, BoundaryCondition, Probe, Simulation, SolverConfig, write_metrics
from .viz import VizMesh

__all__ = [
    "ScenarioConfig",
    "parse_scenario",
    "load_scenario",
    "dump_scenario",
    "builtin_scenarios",
    "builtin_scenario",
    "build_mesh",
    "select_nodes",
    "build_simulation",
    "run_scenario",
    "ScenarioOutcome",
]

Vec3 = tuple[float, float, float]

_GENERATORS = {
    "box": meshing.box_mesh,
    "notched_bar": meshing.notched_bar_mesh,
    "cylinder": meshing.cylinder_mesh,
}


class _Section(BaseModel):
    model_config = ConfigDict(extra="forbid")


class MeshSpec(_Section):
    generator: Literal["box", "notched_bar", "cylinder", "tetgen"]
    options: dict[str, Any] = Field(default_factory=dict)
    path: Optional[str] = None

    @model_validator(mode="after")
    def _check(self):
        if self.generator == "tetgen":
            if not self.path:
                raise ValueError("tetgen meshes need 'path'")
            if self.options:
                raise ValueError("tetgen meshes take no 'options'")
            return self
        if self.path is not None:
            raise ValueError(f"'path' only applies to tetgen meshes, not {self.generator!r}")
        accepted = set(inspect.signature(_GENERATORS[self.generator]).parameters)
        unknown = sorted(set(self.options) - accepted)
        if unknown:
            raise ValueError(f"unknown {self.generator} option(s) {unknown}; accepted: {sorted(accepted)}")
        return self


class MaterialSpec(_Section):
    youngs: float
    poisson: float
    density: float = 1000.0
    sigma_thres: float = float("inf")
    r_d: float = 0.0
    damp_mass_coeff: float = 0.0
    damp_stiff_coeff: float = 0.0
    energy_model: str = "stvk"

    @field_validator("energy_model")
    @classmethod
    def _model(cls, v):
        if v not in ENERGY_MODELS:
            raise ValueError(f"energy_model must be one of {sorted(ENERGY_MODELS)}")
        return v

    @model_validator(mode="after")
    def _check(self):
        self.to_params()
        return self

    def to_params(self) -> MaterialParams:
        return MaterialParams(**self.model_dump())


class SolverSpec(_Section):
    dt: float
    newton_tol: Optional[float] = None
    newton_max_iters: int = 30
    cg_tol: float = 1e-8
    cg_max_iters: Optional[int] = None
    line_search_factor: float = 0.5
    line_search_c: float = 1e-4
    line_search_max_halvings: int = 20
    max_increment_halvings: int = 10
    gravity: Vec3 = (0.0, 0.0, 0.0)
    linear_solver: Literal["cg", "direct"] = "cg"
    full_newton: bool = False
    damage_iterations: int = 0
    contact_substeps: int = 1

    @model_validator(mode="after")
    def _check(self):
        self.to_config()
        return self

    def to_config(self) -> SolverConfig:
        return SolverConfig(**self.model_dump())


class NodeSetSpec(_Section):
    box: Optional[tuple[Vec3, Vec3]] = None
    nodes: Optional[list[int]] = None

    @model_validator(mode="after")
    def _check(self):
        if (self.box is None) == (self.nodes is None):
            raise ValueError("a node set needs exactly one of 'box' or 'nodes'")
        if self.box is not None and any(lo > hi for lo, hi in zip(*self.box)):
            raise ValueError("box corners must be ordered [min, max]")
        if self.nodes is not None and any(n < 0 for n in self.nodes):
            raise ValueError("node ids must be non-negative")
        return self


class BoundarySpec(_Section):
    name: str
    set: str
    kind: Literal["fixed", "translate", "rotate"] = "fixed"
    times: list[float] = Field(default_factory=lambda: [0.0])
    values: list[float | list[float]] = Field(default_factory=lambda: [[0.0, 0.0, 0.0]])  # vectors or angles
    axis: Vec3 = (1.0, 0.0, 0.0)
    center: Vec3 = (0.0, 0.0, 0.0)
    components: list[int] = Field(default_factory=lambda: [0, 1, 2])

    @model_validator(mode="after")
    def _check(self):
        BCGroup(self.name, np.empty(0, dtype=np.int64), self.kind, tuple(self.times), self.values,
                self.axis, self.center, tuple(self.components))
        return self


class ColliderSpec(_Section):
    name: str
    kind: Literal["sphere", "halfspace"]
    times: list[float] = Field(default_factory=lambda: [0.0])
    positions: list[Vec3] = Field(default_factory=lambda: [(0.0, 0.0, 0.0)])
    radius: float = 0.0
    normal: Vec3 = (0.0, 0.0, 1.0)
    stiffness: float = 1e6
    restitution: float = 0.0
    friction: float = 0.0

    @model_validator(mode="after")
    def _check(self):
        self.to_collider()
        return self

    def to_collider(self) -> Collider:
        return Collider(**self.model_dump())


class ProbeSpec(_Section):
    kind: Literal["reaction", "collider"]
    target: str | list[str]
    direction: Vec3 = (1.0, 0.0, 0.0)

    @property
    def targets(self):
        return [self.target] if isinstance(self.target, str) else list(self.target)

    @field_validator("direction")
    @classmethod
    def _nonzero(cls, v):
        if not np.linalg.norm(v) > 0:
            raise ValueError("probe direction must be nonzero")
        return v


class OutputSpec(_Section):
    frame_every: int = Field(default=0, ge=0)


class ScenarioConfig(_Section):
    name: str = "scenario"
    mode: Literal["quasi_static", "dynamic"] = "dynamic"
    duration: float = Field(ge=0.0)
    mesh: MeshSpec
    material: MaterialSpec
    solver: SolverSpec
    screen_kernel: Literal["hat", "flat"] = "hat"
    node_sets: dict[str, NodeSetSpec] = Field(default_factory=dict)
    boundary: list[BoundarySpec] = Field(default_factory=list)
    colliders: list[ColliderSpec] = Field(default_factory=list)
    probe: Optional[ProbeSpec] = None
    initial_velocity: Optional[Vec3] = None
    output: OutputSpec = Field(default_factory=OutputSpec)
    seed: int = 0

    @model_validator(mode="after")
    def _references(self):
        problems = _reference_problems(self.model_dump())
        if problems:
            raise ValueError("; ".join(problems))
        return self


def _names(items):
    return [i.get("name") for i in items if isinstance(i, dict)] if isinstance(items, list) else []


def _reference_problems(data):
    """Cross-section consistency checks that work on raw or validated mappings."""
    problems = []
    sets = data.get("node_sets") or {}
    sets = sets if isinstance(sets, dict) else {}
    boundary = data.get("boundary") or []
    for b in boundary if isinstance(boundary, list) else []:
        if isinstance(b, dict) and "set" in b and b["set"] not in sets:
            problems.append(f"boundary {b.get('name')!r} references unknown node set {b['set']!r}")
    names = _names(boundary)
    dupes = sorted({str(n) for n in names if names.count(n) > 1})
    if dupes:
        problems.append(f"duplicate boundary names {dupes}")
    cnames = _names(data.get("colliders") or [])
    if len(set(cnames)) != len(cnames):
        problems.append("collider names must be unique")
    probe = data.get("probe")
    if isinstance(probe, dict) and probe.get("kind") in ("reaction", "collider") and "target" in probe:
        target = probe["target"]
        targets = [target] if isinstance(target, str) else list(target) if isinstance(target, list) else []
        if probe["kind"] == "reaction":
            if not isinstance(target, str):
                problems.append("a reaction probe targets a single boundary group")
            pool, what = names, "boundary group / node set"
        else:
            pool, what = cnames, "collider"
        for t in targets:
            if t not in pool:
                problems.append(f"probe references unknown {what} {t!r}")
    return problems


# --- text round trip ------------------------------------------------------------

def _format_errors(err: ValidationError):
    out = []
    for e in err.errors():
        loc = ".".join(str(p) for p in e["loc"]) or "<root>"
        out.append(f"{loc}: {e['msg']}")
    return out


def parse_scenario(text: str) -> ScenarioConfig:
    """Validate YAML scenario text; raises :class:`ScenarioError` listing every problem found."""
    try:
        data = yaml.safe_load(text)
    except yaml.YAMLError as exc:
        raise ScenarioError([f"YAML syntax: {exc}"]) from exc
    if not isinstance(data, dict):
        raise ScenarioError(["<root>: a scenario must be a mapping"])
    try:
        return ScenarioConfig.model_validate(data)
    except ValidationError as exc:
        errors = _format_errors(exc)
        # reference checks only run on a fully valid model, so add them here
        for problem in _reference_problems(data):
            if not any(problem in e for e in errors):
                errors.append(problem)
        raise ScenarioError(errors) from exc


def load_scenario(path) -> ScenarioConfig:
    """Read and validate a scenario file; relative tetgen paths resolve against the file's folder."""
    path = Path(path)
    config = parse_scenario(path.read_text())
    if config.mesh.generator == "tetgen" and not Path(config.mesh.path).is_absolute():
        config.mesh.path = str((path.parent / config.mesh.path).resolve())
    return config


def _plain(obj):
    if isinstance(obj, dict):
        return {k: _plain(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_plain(v) for v in obj]
    if isinstance(obj, float) and not np.isfinite(obj):
        return obj
    return obj


def dump_scenario(config: ScenarioConfig) -> str:
    data = _plain(config.model_dump(exclude_none=True))
    return yaml.safe_dump(data, sort_keys=False, default_flow_style=None, width=100)


# --- building -----------------------------------------------------------------

def build_mesh(spec: MeshSpec) -> TetMesh:
    if spec.generator == "tetgen":
        return load_tetgen_files(spec.path)
    options = dict(spec.options)
    for key in ("size", "divisions", "origin"):
        if key in options:
            options[key] = tuple(options[key])
    return _GENERATORS[spec.generator](**options)


def select_nodes(mesh: TetMesh, spec: NodeSetSpec, name="set") -> np.ndarray:
    if spec.nodes is not None:
        nodes = np.unique(np.asarray(spec.nodes, dtype=np.int64))
        if nodes.size and nodes.max() >= mesh.n_nodes:
            raise ScenarioError([f"node_sets.{name}: node {int(nodes.max())} beyond mesh size {mesh.n_nodes}"])
        return nodes
    lo, hi = (np.asarray(c, dtype=np.float64) for c in spec.box)
    X = mesh.rest_positions
    return np.flatnonzero(np.all((X >= lo) & (X <= hi), axis=1))


def build_simulation(config: ScenarioConfig, mesh: TetMesh = None, out_dir=None, damage_log=None,
                     frame_every=None):
    """Instantiate mesh, material, boundary conditions and colliders for ``config``."""
    mesh = build_mesh(config.mesh) if mesh is None else mesh
    sets, problems = {}, []
    for name, spec in config.node_sets.items():
        try:
            sets[name] = select_nodes(mesh, spec, name)
        except ScenarioError as exc:
            problems.extend(exc.errors)
            continue
        if sets[name].size == 0:
            problems.append(f"node_sets.{name}: selects no nodes of this mesh")
    if problems:
        raise ScenarioError(problems)
    groups = []
    for b in config.boundary:
        groups.append(BCGroup(b.name, sets[b.set], b.kind, tuple(b.times), b.values, b.axis, b.center,
                              tuple(b.components)))
    try:
        bc = BoundaryCondition(groups)
    except ValueError as exc:
        raise ScenarioError([f"boundary: {exc}"]) from exc
    probes = [] if config.probe is None else [Probe(config.probe.kind, config.probe.target, config.probe.direction)]
    every = config.output.frame_every if frame_every is None else int(frame_every)
    viz = VizMesh.from_mesh(mesh) if (every > 0 and out_dir is not None) else None
    return Simulation(
        mesh, config.material.to_params(), bc, config.solver.to_config(), mode=config.mode,
        colliders=[c.to_collider() for c in config.colliders], probes=probes, viz=viz,
        frame_every=every, out_dir=None if out_dir is None else Path(out_dir), damage_log=damage_log,
        kernel=config.screen_kernel, initial_velocity=config.initial_velocity,
    )


def _build_identifier():
    from . import __version__

    return f"grafem {__version__}; python {platform.python_version()}; numpy {np.__version__}; scipy {scipy.__version__}"


class ScenarioOutcome:
    """What :func:`run_scenario` produced: the run result plus the files written."""

    def __init__(self, result, simulation, out_dir, files):
        self.result = result
        self.simulation = simulation
        self.out_dir = out_dir
        self.files = files

    @property
    def metrics(self):
        return self.result.metrics

    @property
    def state(self):
        return self.result.state


def run_scenario(config: ScenarioConfig, out_dir=None, frame_every=None, on_step=None, mesh: TetMesh = None):
    """Run ``config``; with ``out_dir`` write metrics.csv, damage.log, manifest.txt and OBJ frames.

    While running, the directory holds an ``INCOMPLETE`` marker that is
    removed only after every output has been written.
    """
    mesh = build_mesh(config.mesh) if mesh is None else mesh
    if out_dir is None:
        sim = build_simulation(config, mesh=mesh, frame_every=0)
        result = sim.run(duration=config.duration, on_step=on_step)
        return ScenarioOutcome(result, sim, None, {})

    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    marker = out / "INCOMPLETE"
    marker.write_text("run started; outputs are partial until this file is removed\n")
    every = config.output.frame_every if frame_every is None else int(frame_every)
    log_buffer = io.StringIO()
    sim = build_simulation(config, mesh=mesh, out_dir=out, damage_log=log_buffer, frame_every=every)
    started = time.perf_counter()
    result = sim.run(duration=config.duration, on_step=on_step)
    elapsed = time.perf_counter() - started

    files = {"metrics": out / "metrics.csv", "damage": out / "damage.log", "manifest": out / "manifest.txt"}
    write_metrics(files["metrics"], result.metrics)
    files["damage"].write_text(log_buffer.getvalue())
    config_text = dump_scenario(config)
    stats = mesh.stats()
    lines = [
        f"scenario: {config.name}",
        f"build: {_build_identifier()}",
        f"config_sha256: {hashlib.sha256(config_text.encode()).hexdigest()}",
        "mesh: " + ", ".join(f"{k}={v}" for k, v in stats.items()),
        f"steps: {len(result.metrics) - 1}",
        f"broken_edges: {result.state.broken_count}",
        f"pattern_constant: {result.pattern_constant}",
        f"frames: {len(result.frames)}",
        f"wall_seconds: {elapsed:.3f}",
        "--- config ---",
        config_text,
    ]
    files["manifest"].write_text("\n".join(lines))
    files["frames"] = list(result.frames)
    marker.unlink()
    return ScenarioOutcome(result, sim, out, files)


# --- built-in experiments ---------------------------------------------------------

def _stroke_keyframes(speed, stroke, ease_in, ease_out, hold, n=16):
    """Times and travel for a stroke that accelerates, cruises, brakes and then holds.

    Accelerating over ``ease_in`` and braking over ``ease_out`` make the
    approach and the stop gentle; the travel follows a quadratic during both.
    """
    t_in = 2.0 * ease_in / speed
    cruise = max(stroke - ease_in - ease_out, 0.0)
    t_cruise = t_in + cruise / speed
    t_out = t_cruise + 2.0 * ease_out / speed
    times = np.unique(np.concatenate([np.linspace(0.0, t_in, n), [t_cruise], np.linspace(t_cruise, t_out, n),
                                      [t_out + hold]]))

    def travel(t):
        if t <= t_in:
            return 0.5 * speed * t * t / t_in
        if t <= t_cruise:
            return ease_in + speed * (t - t_in)
        if t <= t_out:
            s = t - t_cruise
            return ease_in + cruise + speed * s - 0.5 * speed * s * s / (t_out - t_cruise)
        return stroke

    return times.tolist(), [travel(t) for t in times], float(times[-1])


def _pull_block(r_d_fraction, name, twist=False):
    size = (0.3, 0.1, 0.1)
    width = size[1]
    eps = 1e-9
    if twist:
        boundary = [
            {"name": "left", "set": "left", "kind": "rotate", "times": [0.0, 1.0], "values": [0.0, -0.35],
             "axis": (1.0, 0.0, 0.0), "center": (0.0, 0.05, 0.05)},
            {"name": "right", "set": "right", "kind": "rotate", "times": [0.0, 1.0], "values": [0.0, 0.35],
             "axis": (1.0, 0.0, 0.0), "center": (0.3, 0.05, 0.05)},
        ]
        probe = {"kind": "reaction", "target": "right", "direction": (1.0, 0.0, 0.0)}
        duration, dt = 1.0, 0.05
    else:
        boundary = [
            {"name": "left", "set": "left", "kind": "translate", "times": [0.0, 1.0],
             "values": [(0.0, 0.0, 0.0), (-0.0045, 0.0, 0.0)]},
            {"name": "right", "set": "right", "kind": "translate", "times": [0.0, 1.0],
             "values": [(0.0, 0.0, 0.0), (0.0045, 0.0, 0.0)]},
        ]
        probe = {"kind": "reaction", "target": "right", "direction": (1.0, 0.0, 0.0)}
        duration, dt = 1.0, 0.05
    return ScenarioConfig.model_validate({
        "name": name,
        "mode": "quasi_static",
        "duration": duration,
        "mesh": {"generator": "box", "options": {"size": list(size), "divisions": [15, 5, 5]}},
        "material": {"youngs": 1.0e7, "poisson": 0.3, "density": 1000.0, "sigma_thres": 1.0e5,
                     "r_d": r_d_fraction * width, "energy_model": "stable_neo_hookean"},
        "solver": {"dt": dt, "damage_iterations": 50, "linear_solver": "direct"},
        "node_sets": {"left": {"box": [(-1.0, -1.0, -1.0), (eps, 1.0, 1.0)]},
                      "right": {"box": [(size[0] - eps, -1.0, -1.0), (1.0, 1.0, 1.0)]}},
        "boundary": boundary,
        "probe": probe,
    })


# Charpy/Izod steel: stiffness and density of structural steel; the two
# strengths are illustrative choices that split and do not split the bar.
CHARPY_STRENGTH = {"low": 1.0e9, "high": 4.0e9}


def _charpy(strength):
    length, width, height = 0.055, 0.010, 0.010
    ny = 3
    radius, gap = 0.005, 1e-6
    times, travel, end = _stroke_keyframes(speed=5.0, stroke=1.2e-3, ease_in=3e-4, ease_out=2e-4, hold=1e-4)
    colliders = []
    for k, y in enumerate(np.linspace(0.0, width, ny + 1)):
        colliders.append({
            "name": f"striker_{k}", "kind": "sphere", "radius": radius, "stiffness": 5.0e8,
            "times": times,
            "positions": [(0.5 * length, float(y), height + radius + gap - d) for d in travel],
        })
    eps = 1e-9
    return ScenarioConfig.model_validate({
        "name": f"charpy_{strength}",
        "mode": "dynamic",
        "duration": end,
        "mesh": {"generator": "notched_bar", "options": {"length": length, "width": width, "height": height,
                                                         "notch_depth": 0.002, "notch_angle_deg": 45.0, "ny": ny}},
        "material": {"youngs": 200e9, "poisson": 0.3, "density": 7850.0,
                     "sigma_thres": CHARPY_STRENGTH[strength], "damp_stiff_coeff": 5e-7, "energy_model": "stvk"},
        "solver": {"dt": 5e-7},
        "node_sets": {"left_end": {"box": [(-1.0, -1.0, -1.0), (eps, 1.0, 1.0)]},
                      "right_end": {"box": [(length - eps, -1.0, -1.0), (1.0, 1.0, 1.0)]}},
        "boundary": [{"name": "left_end", "set": "left_end", "components": [1, 2]},
                     {"name": "right_end", "set": "right_end", "components": [1, 2]}],
        "colliders": colliders,
        "probe": {"kind": "collider", "target": [c["name"] for c in colliders], "direction": (0.0, 0.0, -1.0)},
        "output": {"frame_every": 100},
    })


def _izod(strength):
    length, width, height = 0.055, 0.010, 0.010
    ny = 3
    notch_x = 0.020
    radius, gap = 0.005, 1e-6
    times, travel, end = _stroke_keyframes(speed=3.5, stroke=3e-3, ease_in=3e-4, ease_out=3e-4, hold=1e-4)
    strike_x = length - 0.003
    colliders = []
    for k, y in enumerate(np.linspace(0.0, width, ny + 1)):
        colliders.append({
            "name": f"striker_{k}", "kind": "sphere", "radius": radius, "stiffness": 5.0e8,
            "times": times,
            "positions": [(strike_x, float(y), -radius - gap + d) for d in travel],
        })
    return ScenarioConfig.model_validate({
        "name": f"izod_{strength}",
        "mode": "dynamic",
        "duration": end,
        "mesh": {"generator": "notched_bar", "options": {"length": length, "width": width, "height": height,
                                                         "notch_x": notch_x, "notch_depth": 0.002,
                                                         "notch_angle_deg": 45.0, "ny": ny}},
        "material": {"youngs": 200e9, "poisson": 0.3, "density": 7850.0,
                     "sigma_thres": CHARPY_STRENGTH[strength], "damp_stiff_coeff": 5e-7, "energy_model": "stvk"},
        "solver": {"dt": 5e-7},
        # the clamp grips the bar up to the notch plane
        "node_sets": {"clamp": {"box": [(-1.0, -1.0, -1.0), (notch_x - 0.004 + 1e-9, 1.0, 1.0)]}},
        "boundary": [{"name": "clamp", "set": "clamp"}],
        "colliders": colliders,
        "probe": {"kind": "collider", "target": [c["name"] for c in colliders], "direction": (0.0, 0.0, 1.0)},
        "output": {"frame_every": 200},
    })


BRAZILIAN_DIAMETER = 0.100
BRAZILIAN_LENGTH = 0.255


def _brazilian():
    radius = 0.5 * BRAZILIAN_DIAMETER
    eps = 1e-6
    return ScenarioConfig.model_validate({
        "name": "brazilian",
        "mode": "quasi_static",
        "duration": 1.0,
        "mesh": {"generator": "cylinder", "options": {"radius": radius, "length": BRAZILIAN_LENGTH,
                                                      "n_rings": 5, "n_layers": 5, "axis": 0, "per_ring": 8}},
        "material": {"youngs": 25e9, "poisson": 0.2, "density": 2400.0, "sigma_thres": 2.5e6,
                     "energy_model": "stable_neo_hookean"},
        "solver": {"dt": 0.05, "damage_iterations": 50, "linear_solver": "direct"},
        # the platens touch the cylinder along its top and bottom generator lines
        "node_sets": {"bottom_line": {"box": [(-1.0, -eps, -radius - eps), (1.0, eps, -radius + eps)]},
                      "top_line": {"box": [(-1.0, -eps, radius - eps), (1.0, eps, radius + eps)]}},
        "boundary": [
            {"name": "bottom_platen", "set": "bottom_line", "kind": "fixed"},
            {"name": "top_platen", "set": "top_line", "kind": "translate", "times": [0.0, 1.0],
             "values": [(0.0, 0.0, 0.0), (0.0, 0.0, -2.0e-4)], "components": [1, 2]},
        ],
        "probe": {"kind": "reaction", "target": "top_platen", "direction": (0.0, 0.0, -1.0)},
    })


def _sphere_impact():
    size = 0.1
    radius = 0.04
    times = [0.0, 0.02]
    start = (0.5 * size, 0.5 * size, size + radius + 0.01)
    end = (start[0], start[1], start[2] - 0.02 * 5.0)
    return ScenarioConfig.model_validate({
        "name": "sphere_impact",
        "mode": "dynamic",
        "duration": 0.02,
        "mesh": {"generator": "box", "options": {"size": [size, size, size], "divisions": [6, 6, 6]}},
        "material": {"youngs": 5.0e6, "poisson": 0.3, "density": 1200.0, "sigma_thres": 2.0e5,
                     "damp_stiff_coeff": 1e-4, "energy_model": "stvk"},
        "solver": {"dt": 2e-4, "gravity": (0.0, 0.0, -9.81)},
        "colliders": [
            {"name": "floor", "kind": "halfspace", "normal": (0.0, 0.0, 1.0), "stiffness": 1.0e7},
            {"name": "ball", "kind": "sphere", "radius": radius, "times": times, "positions": [start, end],
             "stiffness": 1.0e7},
        ],
        "probe": {"kind": "collider", "target": "ball", "direction": (0.0, 0.0, -1.0)},
        "output": {"frame_every": 10},
    })


_BUILTINS = {
    "pull_stone": lambda: _pull_block(0.0, "pull_stone"),
    "pull_wood": lambda: _pull_block(0.1, "pull_wood"),
    "pull_cheese": lambda: _pull_block(0.5, "pull_cheese"),
    "twist_stone": lambda: _pull_block(0.0, "twist_stone", twist=True),
    "twist_wood": lambda: _pull_block(0.1, "twist_wood", twist=True),
    "twist_cheese": lambda: _pull_block(0.5, "twist_cheese", twist=True),
    "charpy_low": lambda: _charpy("low"),
    "charpy_high": lambda: _charpy("high"),
    "izod_low": lambda: _izod("low"),
    "izod_high": lambda: _izod("high"),
    "brazilian": _brazilian,
    "sphere_impact": _sphere_impact,
}


def builtin_scenarios() -> dict:
    """Fresh configs for every built-in experiment, keyed by name."""
    return {name: make() for name, make in _BUILTINS.items()}


def builtin_scenario(name: str) -> ScenarioConfig:
    try:
        return _BUILTINS[name]()
    except KeyError:
        raise ScenarioError([f"unknown scenario {name!r}; choose from {sorted(_BUILTINS)}"]) from None
