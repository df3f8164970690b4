"""Render-only split surface that shows cracks without touching the simulation mesh.

Render vertices are keyed by what they stand for:

``('n', i)``
    computational node ``i``;
``('e', edge)`` / ``('e', edge, i)``
    midpoint of an intact edge (shared by both ends) or the copy of a
    broken edge's midpoint that stays with end node ``i``;
``('f', face, c)``
    centroid of a triangle for the piece ``c`` of its intact-edge graph;
``('t', tet, c)``
    centroid of a tet for piece ``c`` of its intact-edge graph.

A child vertex sits at its rest midpoint or centroid plus the mean
displacement of its parent nodes. The face list is a function of the
damage seen so far, so it is rebuilt once per export after new splits.
"""

from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import scipy.sparse as sp

from .fem import SimState
from .fracture import fragment_labels
from .mesh import TET_EDGE_PAIRS, TetMesh

__all__ = ["VizMesh", "SplitRecord", "read_obj", "signed_volume"]


@dataclass
class SplitRecord:
    step: int
    edge: int
    tets: tuple


def _face_labels(a, b, c, broken):
    """Piece label per corner of a triangle given its broken edges (ab, bc, ca)."""
    lab = {a: a, b: b, c: c}
    for _ in range(2):
        for (p, q), gone in zip(((a, b), (b, c), (c, a)), broken):
            if not gone:
                low = min(lab[p], lab[q])
                lab[p] = lab[q] = low
    return lab


@dataclass
class VizMesh:
    mesh: TetMesh
    damage: np.ndarray = None
    split_records: list = field(default_factory=list)
    _keys: list = field(default_factory=list)
    _index: dict = field(default_factory=dict)
    _rest: list = field(default_factory=list)
    _parents: list = field(default_factory=list)
    _faces: np.ndarray = None
    _face_tags: list = None
    _binding: object = None
    positions: np.ndarray = None

    def __post_init__(self):
        if self.damage is None:
            self.damage = np.zeros(self.mesh.n_edges, dtype=np.int8)
        for i in range(self.mesh.n_nodes):
            self._vertex(("n", i), self.mesh.rest_positions[i], (i,))
        self._edge_index = {tuple(e): k for k, e in enumerate(self.mesh.edges.tolist())}
        self.positions = np.asarray(self._rest, dtype=np.float64)

    @classmethod
    def from_mesh(cls, mesh: TetMesh):
        return cls(mesh)

    # -- vertex pool ---------------------------------------------------------

    def _vertex(self, key, rest_point, parents):
        idx = self._index.get(key)
        if idx is None:
            idx = len(self._keys)
            self._index[key] = idx
            self._keys.append(key)
            self._rest.append(np.asarray(rest_point, dtype=np.float64))
            self._parents.append(tuple(sorted(int(p) for p in parents)))
            self._binding = None
        return idx

    @property
    def n_vertices(self):
        return len(self._keys)

    def vertex_key(self, idx):
        return self._keys[idx]

    def parents(self, key_or_idx):
        idx = self._index[key_or_idx] if isinstance(key_or_idx, tuple) else key_or_idx
        return self._parents[idx]

    def has_vertex(self, key):
        return key in self._index

    def _edge_id(self, a, b):
        return self._edge_index[(min(a, b), max(a, b))]

    def _mid(self, a, b, side):
        e = self._edge_id(a, b)
        X = self.mesh.rest_positions
        mid = 0.5 * (X[a] + X[b])
        if self.damage[e]:
            return self._vertex(("e", e, side), mid, (side,))
        return self._vertex(("e", e), mid, (a, b))

    def _face_centroid(self, nodes, corner):
        a, b, c = nodes
        broken = [self.damage[self._edge_id(p, q)] for p, q in ((a, b), (b, c), (c, a))]
        lab = _face_labels(a, b, c, broken)
        piece = tuple(sorted(n for n in nodes if lab[n] == lab[corner]))
        key = ("f", tuple(sorted(nodes)), piece)
        return self._vertex(key, self.mesh.rest_positions[list(nodes)].mean(axis=0), piece)

    def _tet_centroid(self, t, corner_local, labels):
        tet = self.mesh.tets[t]
        piece = tuple(sorted(int(tet[k]) for k in range(4) if labels[t, k] == labels[t, corner_local]))
        return self._vertex(("t", int(t), piece), self.mesh.rest_positions[tet].mean(axis=0), piece)

    def face_child_bindings(self, nodes):
        """Parent nodes of the face-centroid child used by each corner of triangle ``nodes``."""
        return {int(c): self.parents(self._face_centroid(tuple(int(n) for n in nodes), int(c))) for c in nodes}

    # -- splitting -------------------------------------------------------------

    def apply_splits(self, newly_broken, mesh: TetMesh = None, state: SimState = None, step=None):
        """Record newly broken edges; the surface is rebuilt lazily on the next query."""
        newly = np.asarray(newly_broken, dtype=np.int64).ravel()
        if newly.size == 0:
            return self
        if newly.min() < 0 or newly.max() >= self.mesh.n_edges:
            raise IndexError(f"unknown edge id in {newly.tolist()}")
        step = state.step if (step is None and state is not None) else step
        ptr, idx = self.mesh.edge_tet_ptr, self.mesh.edge_tet_idx
        for e in newly:
            if not self.damage[e]:
                self.split_records.append(SplitRecord(step, int(e), tuple(idx[ptr[e]:ptr[e + 1]].tolist())))
        self.damage[newly] = 1
        self._faces = None
        return self

    def _quad(self, q, tris, tags, tag):
        tris.append((q[0], q[1], q[2]))
        tris.append((q[0], q[2], q[3]))
        tags.extend([tag, tag])

    def _build(self):
        mesh = self.mesh
        X = mesh.rest_positions
        tris, tags = [], []
        faces = mesh.boundary_faces
        owners = mesh.boundary_face_owners
        face_edges_broken = np.stack([
            self.damage[[self._edge_id(int(f[p]), int(f[q])) for f in faces]]
            for p, q in ((0, 1), (1, 2), (2, 0))
        ], axis=1) if len(faces) else np.zeros((0, 3), dtype=np.int8)
        for f, owner, broken in zip(faces.tolist(), owners.tolist(), face_edges_broken):
            if not broken.any():
                tris.append(tuple(f))
                tags.append((owner, -1))
                continue
            for k in range(3):
                i, j, l = f[k], f[(k + 1) % 3], f[(k + 2) % 3]
                q = (i, self._mid(i, j, i), self._face_centroid(tuple(f), i), self._mid(l, i, i))
                self._quad(q, tris, tags, (owner, i))

        broken_edges = np.flatnonzero(self.damage)
        if broken_edges.size:
            labels = fragment_labels(mesh, self.damage)
            ptr, idx = mesh.edge_tet_ptr, mesh.edge_tet_idx
            for e in broken_edges:
                for t in idx[ptr[e]:ptr[e + 1]]:
                    tet = mesh.tets[t]
                    k = int(np.flatnonzero(mesh.tet_edges[t] == e)[0])
                    la, lb = TET_EDGE_PAIRS[k]
                    others = [n for n in range(4) if n not in (la, lb)]
                    for side_local, far_local in ((la, lb), (lb, la)):
                        i, j = int(tet[side_local]), int(tet[far_local])
                        k1, k2 = int(tet[others[0]]), int(tet[others[1]])
                        q = [self._mid(i, j, i),
                             self._face_centroid((i, j, k1), i),
                             self._tet_centroid(t, side_local, labels),
                             self._face_centroid((i, j, k2), i)]
                        pts = np.asarray([self._rest[v] for v in q])
                        area = np.cross(pts[1] - pts[0], pts[2] - pts[0]) + np.cross(pts[2] - pts[0], pts[3] - pts[0])
                        if area @ (X[j] - X[i]) < 0:
                            q = [q[0], q[3], q[2], q[1]]
                        self._quad(q, tris, tags, (int(t), i))
        self._faces = np.asarray(tris, dtype=np.int64).reshape(-1, 3)
        self._face_tags = tags

    @property
    def faces(self):
        if self._faces is None:
            self._build()
        return self._faces

    @property
    def face_tags(self):
        """(tet, corner node) owning each triangle; corner -1 for an unsplit boundary face."""
        if self._faces is None:
            self._build()
        return self._face_tags

    # -- motion and output --------------------------------------------------------

    def _binding_matrix(self):
        if self._binding is None or self._binding.shape[0] != self.n_vertices:
            rows, cols, vals = [], [], []
            for r, par in enumerate(self._parents):
                w = 1.0 / len(par)
                rows.extend([r] * len(par))
                cols.extend(par)
                vals.extend([w] * len(par))
            self._binding = sp.csr_matrix((vals, (rows, cols)), shape=(self.n_vertices, self.mesh.n_nodes))
        return self._binding

    def rest_vertices(self):
        return np.asarray(self._rest, dtype=np.float64)

    def advect(self, mesh: TetMesh = None, state: SimState = None, displacements=None):
        """Place every render vertex at its rest point plus its parents' mean displacement."""
        self.faces  # materialise vertices referenced by the current damage
        u = state.displacements if displacements is None else np.asarray(displacements).reshape(-1, 3)
        self.positions = self.rest_vertices() + self._binding_matrix() @ u
        return self.positions

    def used_vertices(self):
        return np.unique(self.faces)

    def export_frame(self, path):
        """Write referenced vertices (in pool order) and triangles as Wavefront OBJ."""
        faces = self.faces
        if self.positions is None or self.positions.shape[0] != self.n_vertices:
            self.positions = self.rest_vertices() if self.positions is None else np.concatenate(
                [self.positions, self.rest_vertices()[self.positions.shape[0]:]])
        used = np.unique(faces)
        remap = np.full(self.n_vertices, -1, dtype=np.int64)
        remap[used] = np.arange(used.size)
        lines = [f"v {x!r} {y!r} {z!r}" for x, y, z in self.positions[used].tolist()]
        lines += [f"f {a + 1} {b + 1} {c + 1}" for a, b, c in remap[faces].tolist()]
        path = Path(path)
        path.write_text("\n".join(lines) + "\n")
        return path


def read_obj(path):
    """Vertices (k, 3) and 0-based triangles (f, 3) from an OBJ written by :meth:`VizMesh.export_frame`."""
    verts, faces = [], []
    for line in Path(path).read_text().splitlines():
        parts = line.split()
        if not parts:
            continue
        if parts[0] == "v":
            verts.append([float(p) for p in parts[1:4]])
        elif parts[0] == "f":
            faces.append([int(p.split("/")[0]) - 1 for p in parts[1:4]])
    return np.asarray(verts, dtype=np.float64).reshape(-1, 3), np.asarray(faces, dtype=np.int64).reshape(-1, 3)


def signed_volume(vertices, triangles):
    """Volume enclosed by a closed, outward-oriented triangle set."""
    v = np.asarray(vertices)[np.asarray(triangles)]
    return float(np.einsum("ij,ij->i", v[:, 0], np.cross(v[:, 1], v[:, 2])).sum() / 6.0)
