"""Graph-based fracture on tetrahedral meshes.

The computational mesh never changes: cracks are broken edges of its node
graph, elements lose stiffness as their edges break, and a separate render
mesh is split only for display.
"""

__version__ = "0.1.0"

from .exceptions import (
    ConvergenceError,
    DecompositionError,
    GeometryError,
    GrafemError,
    MeshFormatError,
    ScenarioError,
)
from .mesh import TetMesh, load_tetgen, write_tetgen
from .materials import MaterialParams, cauchy_stress, energy_density, pk1, pk1_differential
from .fem import SimState, SystemAssembler, assemble_forces, assemble_stiffness, lumped_mass, total_energy
from .fracture import FractureModel, NonlocalScreen, build_T, compute_chi, compute_edge_stresses, update_damage
from .collision import Collider, detect_and_respond
from .timestep import BCGroup, BoundaryCondition, Probe, Simulation, SolverConfig, dynamic_step, quasi_static_step
from .viz import VizMesh
from .scenario import ScenarioConfig, builtin_scenario, builtin_scenarios, parse_scenario, run_scenario

__all__ = [
    "__version__",
    "GrafemError", "MeshFormatError", "GeometryError", "DecompositionError", "ConvergenceError", "ScenarioError",
    "TetMesh", "load_tetgen", "write_tetgen",
    "MaterialParams", "energy_density", "pk1", "pk1_differential", "cauchy_stress",
    "SimState", "SystemAssembler", "assemble_forces", "assemble_stiffness", "lumped_mass", "total_energy",
    "FractureModel", "NonlocalScreen", "build_T", "compute_chi", "compute_edge_stresses", "update_damage",
    "Collider", "detect_and_respond",
    "SolverConfig", "BCGroup", "BoundaryCondition", "Probe", "Simulation", "quasi_static_step", "dynamic_step",
    "VizMesh",
    "ScenarioConfig", "parse_scenario", "builtin_scenarios", "builtin_scenario", "run_scenario",
]
