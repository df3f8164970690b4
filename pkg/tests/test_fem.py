import numpy as np
import pytest
from hypothesis import given, strategies as st

from grafem.exceptions import DecompositionError
from grafem.fem import (
    SimState,
    SystemAssembler,
    assemble_forces,
    assemble_stiffness,
    damping_apply,
    deformation_gradient,
    deformation_gradients,
    edge_decomposed_forces,
    element_internal_force,
    lumped_mass,
    total_energy,
)
from grafem.materials import MaterialParams
from grafem.mesh import TET_EDGE_PAIRS, TetMesh
from grafem.verification import fd_check_forces, fd_check_stiffness

STVK = MaterialParams(youngs=1e3, poisson=0.3, energy_model="stvk")
NEO = MaterialParams(youngs=1e3, poisson=0.3, energy_model="stable_neo_hookean")

REGULAR_TET = np.array([[1.0, 1.0, 1.0], [1.0, -1.0, -1.0], [-1.0, 1.0, -1.0], [-1.0, -1.0, 1.0]])


def _state(mesh, u=None):
    s = SimState.initial(mesh)
    if u is not None:
        s.displacements = np.asarray(u, dtype=float).reshape(-1, 3).copy()
    return s


def _linear_stiffness(X, lam, mu):
    """Small-strain stiffness V B^T D B of one linear tet, engineering-shear Voigt form."""
    Dm = np.stack([X[1] - X[0], X[2] - X[0], X[3] - X[0]], axis=1)
    inv = np.linalg.inv(Dm)
    grads = np.vstack([-inv.sum(axis=0), inv])
    B = np.zeros((6, 12))
    for a, (gx, gy, gz) in enumerate(grads):
        c = 3 * a
        B[0, c] = gx
        B[1, c + 1] = gy
        B[2, c + 2] = gz
        B[3, c], B[3, c + 1] = gy, gx
        B[4, c], B[4, c + 2] = gz, gx
        B[5, c + 1], B[5, c + 2] = gz, gy
    D = np.zeros((6, 6))
    D[:3, :3] = lam
    D[np.arange(3), np.arange(3)] += 2 * mu
    D[3:, 3:] = mu * np.eye(3)
    return abs(np.linalg.det(Dm)) / 6.0 * B.T @ D @ B


def test_deformation_gradient_rest_and_translation(unit_tet):
    np.testing.assert_array_equal(deformation_gradient(unit_tet, _state(unit_tet), 0), np.eye(3))
    moved = _state(unit_tet, np.tile([0.3, -2.0, 5.0], (4, 1)))
    np.testing.assert_allclose(deformation_gradient(unit_tet, moved, 0), np.eye(3), atol=1e-15)


def test_affine_displacement_recovers_the_map(small_box):
    A = np.array([[1.1, 0.2, 0.0], [-0.1, 0.9, 0.3], [0.05, 0.0, 1.2]])
    u = small_box.rest_positions @ (A - np.eye(3)).T
    F = deformation_gradients(small_box, u)
    np.testing.assert_allclose(F, np.broadcast_to(A, F.shape), atol=1e-13)
    np.testing.assert_allclose(deformation_gradient(small_box, u, 5), A, atol=1e-13)


def test_rest_forces_vanish(unit_tet, small_box):
    assert np.all(element_internal_force(unit_tet, _state(unit_tet), STVK, 0) == 0.0)
    assert np.all(assemble_forces(small_box, _state(small_box), STVK) == 0.0)


def test_zero_chi_gives_zero_force(unit_tet):
    s = _state(unit_tet, np.random.default_rng(0).standard_normal((4, 3)) * 0.1)
    s.element_chi[:] = 0.0
    assert np.all(element_internal_force(unit_tet, s, STVK, 0) == 0.0)


def test_force_locality(small_box):
    u = np.zeros((small_box.n_nodes, 3))
    node = 7
    u[node] = [0.01, -0.02, 0.005]
    f = assemble_forces(small_box, u, STVK).reshape(-1, 3)
    neighbours = np.unique(small_box.tets[np.any(small_box.tets == node, axis=1)])
    loaded = np.flatnonzero(np.abs(f).max(axis=1) > 0)
    assert set(loaded) <= set(neighbours)
    assert node in loaded


@pytest.mark.parametrize("params", [STVK, NEO], ids=["stvk", "neo"])
@pytest.mark.parametrize("damaged", [False, True])
def test_forces_and_stiffness_match_finite_differences(small_box, params, damaged):
    rng = np.random.default_rng(1)
    s = _state(small_box, 0.03 * rng.standard_normal((small_box.n_nodes, 3)))
    if damaged:
        s.element_chi[rng.uniform(size=small_box.n_tets) < 0.3] = 0.4
        s.element_chi[0] = 0.0
    assert fd_check_forces(small_box, s, params) < 1e-4
    assert fd_check_stiffness(small_box, s, params) < 1e-3


def test_single_element_force_matches_assembly(small_box):
    s = _state(small_box, 0.02 * np.random.default_rng(2).standard_normal((small_box.n_nodes, 3)))
    total = np.zeros((small_box.n_nodes, 3))
    for t in range(small_box.n_tets):
        total[small_box.tets[t]] += element_internal_force(small_box, s, NEO, t)
    np.testing.assert_allclose(total.ravel(), assemble_forces(small_box, s, NEO), atol=1e-12)


def test_rest_stiffness_matches_linear_fem():
    rng = np.random.default_rng(3)
    X = REGULAR_TET + 0.1 * rng.standard_normal((4, 3))
    mesh = TetMesh.from_arrays(X, [[0, 1, 2, 3]], reorient=True)
    K = assemble_stiffness(mesh, np.zeros(12), STVK).to_dense()
    expected = _linear_stiffness(mesh.rest_positions[mesh.tets[0]], STVK.lam, STVK.mu)
    # dof order is node-major in both; map the reoriented local nodes back to global ones
    order = (3 * mesh.tets[0][:, None] + np.arange(3)).ravel()
    full = np.zeros((12, 12))
    full[np.ix_(order, order)] = expected
    np.testing.assert_allclose(K, full, rtol=1e-11, atol=1e-10 * np.abs(full).max())


def test_all_damaged_stiffness_is_zero(small_box):
    chi = np.zeros(small_box.n_tets)
    K = assemble_stiffness(small_box, np.zeros(small_box.n_dofs), STVK, chi)
    assert np.all(K.data == 0.0)


def test_stiffness_is_symmetric(small_box):
    u = 0.05 * np.random.default_rng(4).standard_normal(small_box.n_dofs)
    assert assemble_stiffness(small_box, u, NEO).asymmetry() < 1e-14


def test_pattern_does_not_depend_on_damage(small_box):
    asm = SystemAssembler(small_box)
    K1 = asm.stiffness(np.zeros(small_box.n_dofs), STVK)
    K2 = asm.stiffness(np.zeros(small_box.n_dofs), STVK, np.zeros(small_box.n_tets))
    assert K1.structure_hash == K2.structure_hash == asm.structure_hash
    np.testing.assert_array_equal(K1.indices, K2.indices)


def test_lumped_mass(unit_tet):
    m = lumped_mass(unit_tet, MaterialParams(youngs=1.0, poisson=0.3, density=1000.0))
    np.testing.assert_allclose(m, 1000.0 / 6.0 / 4.0, rtol=1e-15)
    m2 = lumped_mass(unit_tet, MaterialParams(youngs=1.0, poisson=0.3, density=2000.0))
    np.testing.assert_array_equal(m2, 2.0 * m)


def test_mass_conservation(small_box):
    m = lumped_mass(small_box, STVK)
    assert m.sum() == pytest.approx(STVK.density * small_box.total_volume, rel=1e-13)
    assert np.all(m > 0)


def test_damping(unit_tet):
    m = lumped_mass(unit_tet, STVK)
    K = assemble_stiffness(unit_tet, np.zeros(12), STVK)
    v = np.random.default_rng(5).standard_normal(12)
    assert np.all(damping_apply(m, K, STVK, v) == 0.0)
    p = STVK.replace(damp_mass_coeff=0.7, damp_stiff_coeff=0.01)
    assert np.all(damping_apply(m, K, p, np.zeros(12)) == 0.0)
    p = STVK.replace(damp_mass_coeff=0.7)
    np.testing.assert_allclose(damping_apply(m, None, p, v), 0.7 * np.repeat(m, 3) * v, rtol=1e-15)
    p = STVK.replace(damp_stiff_coeff=0.01)
    np.testing.assert_allclose(damping_apply(m, K, p, v), 0.01 * (K @ v), rtol=1e-14)


def test_rest_energy_is_zero_for_both_models(small_box):
    for params in (STVK, NEO):
        assert total_energy(small_box, np.zeros(small_box.n_dofs), params) == 0.0


def test_edge_decomposition_at_rest_and_uniform_expansion():
    mesh = TetMesh.from_arrays(REGULAR_TET, [[0, 1, 2, 3]], reorient=True)
    assert np.allclose(edge_decomposed_forces(mesh, _state(mesh), STVK, 0), 0.0, atol=1e-12)
    s = _state(mesh, 0.05 * mesh.rest_positions)
    c = edge_decomposed_forces(mesh, s, STVK, 0)
    assert np.ptp(c) <= 1e-10 * np.abs(c).max()
    assert np.all(c > 0)  # stretched edges pull their ends together


def test_edge_decomposition_reproduces_nodal_forces():
    rng = np.random.default_rng(6)
    mesh = TetMesh.from_arrays(REGULAR_TET, [[0, 1, 2, 3]], reorient=True)
    s = _state(mesh, 0.05 * rng.standard_normal((4, 3)))
    c = edge_decomposed_forces(mesh, s, STVK, 0)
    x = s.positions(mesh)[mesh.tets[0]]
    f = np.zeros((4, 3))
    for k, (a, b) in enumerate(TET_EDGE_PAIRS):
        d = (x[b] - x[a]) / np.linalg.norm(x[b] - x[a])
        f[a] += c[k] * d
        f[b] -= c[k] * d
    np.testing.assert_allclose(f, element_internal_force(mesh, s, STVK, 0), rtol=1e-8, atol=1e-10 * np.abs(f).max())


def test_collapsed_element_cannot_be_decomposed(unit_tet):
    u = np.zeros((4, 3))
    u[1] = unit_tet.rest_positions[0] - unit_tet.rest_positions[1]
    with pytest.raises(DecompositionError):
        edge_decomposed_forces(unit_tet, _state(unit_tet, u), STVK, 0)


@given(seed=st.integers(0, 10_000))
def test_breaking_nothing_keeps_forces_bitwise(seed):
    from grafem.meshing import box_mesh
    mesh = box_mesh((1.0, 1.0, 1.0), (2, 1, 1))
    u = 0.05 * np.random.default_rng(seed).standard_normal(mesh.n_dofs)
    a = assemble_forces(mesh, u, STVK)
    s = _state(mesh, u)
    s.edge_damage[:] = 0
    b = assemble_forces(mesh, s, STVK)
    assert a.tobytes() == b.tobytes()
