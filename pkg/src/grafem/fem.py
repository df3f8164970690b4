"""Element kinematics, forces and stiffness, and global assembly on a frozen pattern.

Degrees of freedom are node-major: dof ``3 * i + c`` is component ``c`` of
node ``i``. Element quantities are batched over all tets; the scatter into
global arrays uses ``np.bincount`` so the reduction order is fixed.
"""

from dataclasses import dataclass, field, replace

import numpy as np

from .exceptions import DecompositionError
from .linalg import FixedPatternSparse
from .materials import energy_density, pk1, pk1_differential
from .mesh import TET_EDGE_PAIRS, TetMesh

__all__ = [
    "SimState",
    "deformation_gradients",
    "deformation_gradient",
    "element_forces",
    "element_internal_force",
    "edge_decomposed_forces",
    "assemble_forces",
    "element_stiffness_blocks",
    "SystemAssembler",
    "assemble_stiffness",
    "lumped_mass",
    "damping_apply",
    "element_energies",
    "total_energy",
]


@dataclass
class SimState:
    """Mutable simulation state; arrays are owned by the state."""

    displacements: np.ndarray
    velocities: np.ndarray
    edge_damage: np.ndarray
    element_chi: np.ndarray
    time: float = 0.0
    step: int = 0
    inverted: np.ndarray = field(default=None)

    @classmethod
    def initial(cls, mesh: TetMesh):
        return cls(
            displacements=np.zeros((mesh.n_nodes, 3)),
            velocities=np.zeros((mesh.n_nodes, 3)),
            edge_damage=np.zeros(mesh.n_edges, dtype=np.int8),
            element_chi=np.ones(mesh.n_tets),
            inverted=np.zeros(mesh.n_tets, dtype=bool),
        )

    def copy(self):
        return replace(
            self,
            displacements=self.displacements.copy(),
            velocities=self.velocities.copy(),
            edge_damage=self.edge_damage.copy(),
            element_chi=self.element_chi.copy(),
            inverted=None if self.inverted is None else self.inverted.copy(),
        )

    def positions(self, mesh: TetMesh):
        return mesh.rest_positions + self.displacements

    @property
    def broken_count(self):
        return int(np.count_nonzero(self.edge_damage))


def _displacements(state_or_u):
    if isinstance(state_or_u, SimState):
        return state_or_u.displacements
    return np.asarray(state_or_u, dtype=np.float64).reshape(-1, 3)


def _chi(mesh, state_or_u, chi):
    if chi is not None:
        return np.asarray(chi, dtype=np.float64)
    if isinstance(state_or_u, SimState):
        return state_or_u.element_chi
    return np.ones(mesh.n_tets)


def deformation_gradients(mesh: TetMesh, state_or_u):
    """F of every tet, shape (m, 3, 3), from a state or a displacement array."""
    x = mesh.rest_positions + _displacements(state_or_u)
    return np.einsum("mai,maj->mij", x[mesh.tets], mesh.shape_gradients)


def deformation_gradient(mesh: TetMesh, state, tet_index: int):
    u = _displacements(state)
    tet = mesh.tets[tet_index]
    Ds = (mesh.rest_positions[tet[1:]] + u[tet[1:]] - mesh.rest_positions[tet[0]] - u[tet[0]]).T
    return Ds @ mesh.rest_shape_inverse[tet_index]


def element_forces(mesh: TetMesh, state_or_u, params, chi=None):
    """Restoring forces ``-chi V P G_a`` on the 4 nodes of every tet, shape (m, 4, 3)."""
    F = deformation_gradients(mesh, state_or_u)
    P = pk1(F, params)
    scale = _chi(mesh, state_or_u, chi) * mesh.rest_volumes
    return -scale[:, None, None] * np.einsum("mij,maj->mai", P, mesh.shape_gradients)


def element_internal_force(mesh: TetMesh, state, params, tet_index: int):
    F = deformation_gradient(mesh, state, tet_index)
    P = pk1(F, params)
    chi = _chi(mesh, state, None)[tet_index]
    G = mesh.shape_gradients[tet_index]
    return -chi * mesh.rest_volumes[tet_index] * G @ P.T


def edge_decomposed_forces(mesh: TetMesh, state, params, tet_index: int, det_tol=1e-10):
    """Split the undamaged nodal forces of one tet into forces along its six edges.

    Returns coefficients ``c`` in tet edge order such that the force on
    node ``i`` is ``sum_j c_ij * unit(x_j - x_i)``; positive values pull the
    two end nodes together. Each node's three coefficients come from its own
    3x3 solve; the two ends of an edge agree up to round-off and are averaged.
    """
    u = _displacements(state)
    tet = mesh.tets[tet_index]
    x = mesh.rest_positions[tet] + u[tet]
    F = deformation_gradient(mesh, state, tet_index)
    forces = -mesh.rest_volumes[tet_index] * mesh.shape_gradients[tet_index] @ pk1(F, params).T
    scale = np.linalg.norm(x - x.mean(axis=0), axis=1).max()
    coeff = np.zeros((4, 4))
    for i in range(4):
        others = [j for j in range(4) if j != i]
        d = x[others] - x[i]
        lengths = np.linalg.norm(d, axis=1)
        if np.any(lengths <= det_tol * scale):
            raise DecompositionError(f"tet {tet_index}: zero-length edge at local node {i}")
        D = (d / lengths[:, None]).T
        if abs(np.linalg.det(D)) <= det_tol:
            raise DecompositionError(f"tet {tet_index}: edges at local node {i} are coplanar")
        coeff[i, others] = np.linalg.solve(D, forces[i])
    a, b = TET_EDGE_PAIRS[:, 0], TET_EDGE_PAIRS[:, 1]
    return 0.5 * (coeff[a, b] + coeff[b, a])


def _element_dofs(mesh):
    return (3 * mesh.tets[:, :, None] + np.arange(3)).reshape(-1, 12)


def assemble_forces(mesh: TetMesh, state_or_u, params, chi=None):
    """Global internal (restoring) force vector of length ``3 n``."""
    f = element_forces(mesh, state_or_u, params, chi)
    return np.bincount(_element_dofs(mesh).ravel(), weights=f.ravel(), minlength=mesh.n_dofs)


def element_stiffness_blocks(mesh: TetMesh, state_or_u, params, chi=None):
    """Energy Hessians of every tet, shape (m, 12, 12), dof order (node, component)."""
    F = deformation_gradients(mesh, state_or_u)
    G = mesh.shape_gradients
    m = mesh.n_tets
    # unit perturbation of node b, component d: dF = e_d (x) G_b
    dF = np.zeros((m, 4, 3, 3, 3))
    for d in range(3):
        dF[:, :, d, d, :] = G
    dF = dF.reshape(m, 12, 3, 3)
    dP = pk1_differential(F[:, None], dF, params)
    scale = _chi(mesh, state_or_u, chi) * mesh.rest_volumes
    K = np.einsum("mncj,maj->macn", dP, G).reshape(m, 12, 12)
    K = 0.5 * (K + np.swapaxes(K, 1, 2))
    return scale[:, None, None] * K


class SystemAssembler:
    """Owns the fixed global pattern of one mesh and fills it each step."""

    def __init__(self, mesh: TetMesh):
        self.mesh = mesh
        dofs = _element_dofs(mesh)
        self._rows = np.repeat(dofs, 12, axis=1).ravel()
        self._cols = np.tile(dofs, (1, 12)).ravel()
        self.template = FixedPatternSparse(self._rows, self._cols, mesh.n_dofs)
        node = np.arange(mesh.n_nodes)
        r = 3 * node[:, None, None] + np.arange(3)[None, :, None]
        c = 3 * node[:, None, None] + np.arange(3)[None, None, :]
        self.node_block_positions = self.template.positions(np.broadcast_to(r, (mesh.n_nodes, 3, 3)),
                                                            np.broadcast_to(c, (mesh.n_nodes, 3, 3)))

    @property
    def structure_hash(self):
        return self.template.initial_structure_hash

    def new_matrix(self):
        return self.template.copy().zero()

    def stiffness(self, state_or_u, params, chi=None):
        K = self.template.copy()
        K.assemble(element_stiffness_blocks(self.mesh, state_or_u, params, chi).ravel())
        return K

    def add_node_blocks(self, matrix: FixedPatternSparse, nodes, blocks, factor=1.0):
        """Add 3x3 ``blocks`` to the diagonal node blocks of ``nodes``."""
        nodes = np.asarray(nodes, dtype=np.int64)
        if nodes.size:
            np.add.at(matrix.data, self.node_block_positions[nodes].ravel(),
                      factor * np.asarray(blocks).ravel())
        return matrix


def assemble_stiffness(mesh: TetMesh, state_or_u, params, chi=None):
    return SystemAssembler(mesh).stiffness(state_or_u, params, chi)


def lumped_mass(mesh: TetMesh, params):
    """Per-node mass: a quarter of the mass of every incident tet."""
    share = np.repeat(params.density * mesh.rest_volumes / 4.0, 4)
    return np.bincount(mesh.tets.ravel(), weights=share, minlength=mesh.n_nodes)


def damping_apply(mass, stiffness, params, velocity):
    """Rayleigh damping force ``(alpha M + beta K) v`` for flattened ``velocity``.

    ``mass`` is per node or per dof; ``stiffness`` may be ``None`` when
    ``damp_stiff_coeff`` is zero.
    """
    v = np.asarray(velocity, dtype=np.float64).ravel()
    m = np.asarray(mass, dtype=np.float64)
    if m.size * 3 == v.size:
        m = np.repeat(m, 3)
    out = params.damp_mass_coeff * m * v
    if params.damp_stiff_coeff != 0.0:
        out = out + params.damp_stiff_coeff * (stiffness @ v)
    return out


def element_energies(mesh: TetMesh, state_or_u, params, chi=None):
    """``chi V (Psi(F) - Psi(I))`` per tet, so every element stores zero energy at rest."""
    F = deformation_gradients(mesh, state_or_u)
    rest = energy_density(np.eye(3), params)
    psi = energy_density(F, params) - rest
    return _chi(mesh, state_or_u, chi) * mesh.rest_volumes * psi


def total_energy(mesh: TetMesh, state_or_u, params, chi=None):
    return float(np.sum(element_energies(mesh, state_or_u, params, chi)))
