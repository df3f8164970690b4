import hashlib

import numpy as np
import pytest
from hypothesis import given, strategies as st

from grafem.fem import SimState
from grafem.mesh import TetMesh
from grafem.meshing import box_mesh
from grafem.viz import VizMesh, read_obj, signed_volume

from conftest import UNIT_TET_NODES


def _state_digest(state: SimState) -> str:
    h = hashlib.sha256()
    for arr in (state.displacements, state.velocities, state.edge_damage, state.element_chi):
        h.update(np.ascontiguousarray(arr).tobytes())
    h.update(repr((state.time, state.step)).encode())
    return h.hexdigest()


def _edge(mesh, a, b):
    return int(np.flatnonzero((mesh.edges[:, 0] == min(a, b)) & (mesh.edges[:, 1] == max(a, b)))[0])


def test_unfractured_surface_is_the_boundary_surface(small_box, tmp_path):
    viz = VizMesh.from_mesh(small_box)
    verts, faces = read_obj(viz.export_frame(tmp_path / "rest.obj"))
    nodes = small_box.boundary_nodes
    np.testing.assert_array_equal(verts, small_box.rest_positions[nodes])
    assert sorted(map(tuple, nodes[faces].tolist())) == sorted(map(tuple, small_box.boundary_faces.tolist()))
    assert signed_volume(verts, faces) == pytest.approx(small_box.total_volume, rel=1e-12)


def test_unit_tet_obj(unit_tet, tmp_path):
    verts, faces = read_obj(VizMesh.from_mesh(unit_tet).export_frame(tmp_path / "tet.obj"))
    assert verts.shape == (4, 3) and faces.shape == (4, 3)


def test_broken_edge_adds_a_child_per_endpoint(small_box):
    viz = VizMesh.from_mesh(small_box)
    (a, b) = small_box.boundary_faces[0][:2]
    e = _edge(small_box, a, b)
    before = viz.n_vertices
    viz.apply_splits([e])
    viz.faces
    for end in (a, b):
        assert viz.has_vertex(("e", e, int(end)))
        assert viz.parents(("e", e, int(end))) == (int(end),)
    assert not viz.has_vertex(("e", e))
    assert viz.n_vertices > before + 2


def test_face_child_bindings(unit_tet):
    viz = VizMesh.from_mesh(unit_tet)
    viz.apply_splits([_edge(unit_tet, 0, 1)])
    # the third corner still joins both ends
    assert viz.face_child_bindings((0, 1, 2)) == {0: (0, 1, 2), 1: (0, 1, 2), 2: (0, 1, 2)}
    viz.apply_splits([_edge(unit_tet, 0, 2)])
    assert viz.face_child_bindings((0, 1, 2)) == {0: (0,), 1: (1, 2), 2: (1, 2)}


def test_fully_split_tet_fragments_fill_the_tet(unit_tet):
    viz = VizMesh.from_mesh(unit_tet).apply_splits(np.arange(6))
    faces, tags = viz.faces, viz.face_tags
    X = viz.rest_vertices()
    corners = np.array([corner for _, corner in tags])
    assert set(corners.tolist()) == {0, 1, 2, 3}
    volumes = [signed_volume(X, faces[corners == c]) for c in range(4)]
    assert all(v > 0 for v in volumes)
    assert sum(volumes) == pytest.approx(unit_tet.total_volume, abs=1e-9)


@given(broken=st.lists(st.booleans(), min_size=6, max_size=6))
def test_any_single_tet_split_keeps_the_enclosed_volume(broken):
    mesh = TetMesh.from_arrays(UNIT_TET_NODES, [[0, 1, 2, 3]])
    viz = VizMesh.from_mesh(mesh).apply_splits(np.flatnonzero(broken))
    faces = viz.faces  # builds the child vertices
    assert signed_volume(viz.rest_vertices(), faces) == pytest.approx(mesh.total_volume, abs=1e-12)


@given(seed=st.integers(0, 10_000), share=st.floats(0.0, 1.0))
def test_cracks_never_change_the_rest_volume(seed, share):
    mesh = box_mesh((1.0, 0.5, 0.5), (2, 2, 1))
    broken = np.flatnonzero(np.random.default_rng(seed).uniform(size=mesh.n_edges) < share)
    viz = VizMesh.from_mesh(mesh).apply_splits(broken)
    # crack faces come in opposite pairs and split boundary faces tile their parent
    faces = viz.faces  # builds the child vertices
    assert signed_volume(viz.rest_vertices(), faces) == pytest.approx(mesh.total_volume, rel=1e-12)


def test_splitting_leaves_the_simulation_state_alone(small_box, tmp_path):
    s = SimState.initial(small_box)
    s.displacements = 0.01 * np.random.default_rng(0).standard_normal(s.displacements.shape)
    s.edge_damage[[3, 17, 40]] = 1
    digest = _state_digest(s)
    viz = VizMesh.from_mesh(small_box)
    viz.apply_splits([3, 17, 40], small_box, s)
    viz.advect(small_box, s)
    viz.export_frame(tmp_path / "f.obj")
    assert _state_digest(s) == digest
    assert [r.edge for r in viz.split_records] == [3, 17, 40]


def test_advection_follows_the_parents(unit_tet):
    viz = VizMesh.from_mesh(unit_tet).apply_splits([_edge(unit_tet, 0, 1)])
    shift = np.array([0.5, -1.0, 2.0])
    pos = viz.advect(displacements=np.tile(shift, (4, 1)))
    np.testing.assert_allclose(pos, viz.rest_vertices() + shift, rtol=1e-15)
    u = np.zeros((4, 3))
    u[0] = shift
    pos = viz.advect(displacements=u)
    e = _edge(unit_tet, 0, 1)
    i0, i1 = (viz._index[("e", e, n)] for n in (0, 1))
    np.testing.assert_allclose(pos[i0] - viz.rest_vertices()[i0], shift)
    np.testing.assert_array_equal(pos[i1], viz.rest_vertices()[i1])


def test_exported_frame_round_trips(small_box, tmp_path):
    viz = VizMesh.from_mesh(small_box).apply_splits([0, 5, 9])
    s = SimState.initial(small_box)
    s.displacements = 0.02 * np.random.default_rng(1).standard_normal(s.displacements.shape)
    viz.advect(small_box, s)
    verts, faces = read_obj(viz.export_frame(tmp_path / "f.obj"))
    used = viz.used_vertices()
    np.testing.assert_array_equal(verts, viz.positions[used])
    np.testing.assert_array_equal(used[faces], viz.faces)


def test_unknown_edge_is_rejected(unit_tet):
    with pytest.raises(IndexError):
        VizMesh.from_mesh(unit_tet).apply_splits([6])
