"""Tetrahedral meshes and the edge graph they induce.

A :class:`TetMesh` is built once and never modified afterwards: fracture is
recorded as labels on its edges, so the connectivity, the degrees of freedom
and every precomputed rest quantity stay valid for the whole run.
"""

from dataclasses import dataclass
from functools import cached_property
from pathlib import Path

import numpy as np

from ._validation import as_points, readonly
from .exceptions import GeometryError, MeshFormatError

__all__ = [
    "TET_EDGE_PAIRS",
    "TET_FACES",
    "TetMesh",
    "induce_edge_graph",
    "rest_quantities",
    "load_tetgen",
    "load_tetgen_files",
    "write_tetgen",
]

#: Local node pairs of the six tet edges, in the order (12, 13, 14, 23, 24, 34).
TET_EDGE_PAIRS = np.array([[0, 1], [0, 2], [0, 3], [1, 2], [1, 3], [2, 3]])

#: Local faces, face ``k`` is opposite local node ``k``; outward for positive tets.
TET_FACES = np.array([[1, 2, 3], [0, 3, 2], [0, 1, 3], [0, 2, 1]])

# relative volume below which a rest element counts as degenerate
_DEGENERATE_RTOL = 1e-12


def induce_edge_graph(tets):
    """Build the unique edge list and the tet/edge incidence maps.

    Parameters
    ----------
    tets : array_like, shape (m, 4)
        Node indices of every tetrahedron.

    Returns
    -------
    edges : ndarray, shape (n_edges, 2)
        Canonical edges ``(min, max)``, sorted lexicographically.
    tet_edges : ndarray, shape (m, 6)
        Edge index of each local edge, ordered as :data:`TET_EDGE_PAIRS`.
    edge_tet_ptr, edge_tet_idx : ndarray
        CSR-style incidence: the tets around edge ``e`` are
        ``edge_tet_idx[edge_tet_ptr[e]:edge_tet_ptr[e + 1]]`` (ascending).
    """
    tets = np.asarray(tets, dtype=np.int64)
    if tets.ndim != 2 or tets.shape[1] != 4:
        raise GeometryError(f"tets must have shape (m, 4), got {tets.shape}")
    if tets.shape[0] == 0:
        raise GeometryError("mesh must contain at least one tetrahedron")
    srt = np.sort(tets, axis=1)
    bad = np.nonzero(np.any(srt[:, 1:] == srt[:, :-1], axis=1))[0]
    if bad.size:
        raise GeometryError("repeated node index in element", tet=int(bad[0]))

    pairs = np.sort(tets[:, TET_EDGE_PAIRS], axis=2).reshape(-1, 2)
    edges, inverse = np.unique(pairs, axis=0, return_inverse=True)
    tet_edges = inverse.reshape(-1, 6)

    flat = tet_edges.ravel()
    order = np.argsort(flat, kind="stable")
    edge_tet_idx = order // 6
    counts = np.bincount(flat, minlength=edges.shape[0])
    edge_tet_ptr = np.concatenate([[0], np.cumsum(counts)])
    return edges, tet_edges, edge_tet_ptr, edge_tet_idx


def rest_quantities(rest_positions, tets, reorient=False):
    """Volumes, shape-matrix inverses and centroids of the rest elements.

    Raises :class:`GeometryError` for degenerate elements and, unless
    ``reorient`` is set, for negatively oriented ones. With ``reorient`` the
    last two nodes of such elements are swapped and the fixed tets returned.
    """
    X = np.asarray(rest_positions, dtype=np.float64)
    tets = np.array(tets, dtype=np.int64, copy=True)
    Dm = _shape_matrices(X, tets)
    det = np.linalg.det(Dm)
    scale = np.max(np.linalg.norm(Dm, axis=1), axis=1) ** 3
    degenerate = np.abs(det) <= _DEGENERATE_RTOL * scale
    if np.any(degenerate):
        e = int(np.nonzero(degenerate)[0][0])
        raise GeometryError("zero-volume element", tet=e)
    negative = det < 0
    if np.any(negative):
        if not reorient:
            e = int(np.nonzero(negative)[0][0])
            raise GeometryError("inverted (negatively oriented) element", tet=e)
        tets[negative] = tets[negative][:, [0, 1, 3, 2]]
        Dm = _shape_matrices(X, tets)
        det = np.linalg.det(Dm)
    volumes = det / 6.0
    return {
        "tets": tets,
        "rest_volumes": volumes,
        "rest_shape_inverse": np.linalg.inv(Dm),
        "rest_centroids": X[tets].mean(axis=1),
    }


def _shape_matrices(X, tets):
    x = X[tets]
    return np.stack([x[:, 1] - x[:, 0], x[:, 2] - x[:, 0], x[:, 3] - x[:, 0]], axis=2)


@dataclass(frozen=True, eq=False)
class TetMesh:
    """Immutable tetrahedral mesh with its induced edge graph.

    Build instances with :meth:`from_arrays`; all arrays are read-only.
    """

    rest_positions: np.ndarray
    tets: np.ndarray
    edges: np.ndarray
    tet_edges: np.ndarray
    edge_tet_ptr: np.ndarray
    edge_tet_idx: np.ndarray
    rest_volumes: np.ndarray
    rest_shape_inverse: np.ndarray
    rest_centroids: np.ndarray
    rest_edge_lengths: np.ndarray

    @classmethod
    def from_arrays(cls, rest_positions, tets, reorient=False):
        X = as_points(rest_positions, "rest_positions")
        tets = np.asarray(tets, dtype=np.int64)
        if tets.ndim != 2 or tets.shape[1] != 4:
            raise GeometryError(f"tets must have shape (m, 4), got {tets.shape}")
        if tets.size and (tets.min() < 0 or tets.max() >= X.shape[0]):
            bad = int(np.nonzero(np.any((tets < 0) | (tets >= X.shape[0]), axis=1))[0][0])
            raise GeometryError("node index out of range", tet=bad)
        induce_edge_graph(tets)  # rejects empty lists and repeated nodes before any geometry
        rest = rest_quantities(X, tets, reorient=reorient)
        # local edge order must follow the (possibly reoriented) node order
        edges, tet_edges, ptr, idx = induce_edge_graph(rest["tets"])
        lengths = np.linalg.norm(X[edges[:, 1]] - X[edges[:, 0]], axis=1)
        return cls(
            rest_positions=readonly(X),
            tets=readonly(rest["tets"]),
            edges=readonly(edges),
            tet_edges=readonly(tet_edges),
            edge_tet_ptr=readonly(ptr),
            edge_tet_idx=readonly(idx),
            rest_volumes=readonly(rest["rest_volumes"]),
            rest_shape_inverse=readonly(rest["rest_shape_inverse"]),
            rest_centroids=readonly(rest["rest_centroids"]),
            rest_edge_lengths=readonly(lengths),
        )

    @property
    def n_nodes(self):
        return self.rest_positions.shape[0]

    @property
    def n_tets(self):
        return self.tets.shape[0]

    @property
    def n_edges(self):
        return self.edges.shape[0]

    @property
    def n_dofs(self):
        return 3 * self.n_nodes

    def edge_tets(self, edge):
        """Indices of the tets incident to ``edge``."""
        return self.edge_tet_idx[self.edge_tet_ptr[edge]:self.edge_tet_ptr[edge + 1]]

    @cached_property
    def shape_gradients(self):
        """Rest gradients of the four linear shape functions, shape (m, 4, 3)."""
        g = self.rest_shape_inverse  # rows are grad N_1..N_3
        G = np.concatenate([-g.sum(axis=1, keepdims=True), g], axis=1)
        return readonly(G)

    @cached_property
    def boundary_faces(self):
        """Outward-oriented boundary triangles, shape (n_faces, 3), sorted.

        A face is on the boundary when exactly one tet owns it.
        """
        faces, owners = self._boundary_faces_and_owners
        return faces

    @cached_property
    def boundary_face_owners(self):
        faces, owners = self._boundary_faces_and_owners
        return owners

    @cached_property
    def _boundary_faces_and_owners(self):
        local = self.tets[:, TET_FACES]  # (m, 4, 3), outward for positive tets
        flat = local.reshape(-1, 3)
        keys = np.sort(flat, axis=1)
        _, inverse, counts = np.unique(keys, axis=0, return_inverse=True, return_counts=True)
        once = counts[inverse.ravel()] == 1
        faces = flat[once]
        owners = np.nonzero(once)[0] // 4
        order = np.lexsort(np.sort(faces, axis=1).T[::-1])
        return readonly(faces[order]), readonly(owners[order])

    @cached_property
    def boundary_nodes(self):
        return readonly(np.unique(self.boundary_faces))

    @cached_property
    def mean_face_area(self):
        x = self.rest_positions[self.tets[:, TET_FACES]]
        areas = 0.5 * np.linalg.norm(np.cross(x[:, :, 1] - x[:, :, 0], x[:, :, 2] - x[:, :, 0]), axis=-1)
        return float(areas.mean())

    @property
    def total_volume(self):
        return float(self.rest_volumes.sum())

    def stats(self):
        lo = self.rest_positions.min(axis=0)
        hi = self.rest_positions.max(axis=0)
        return {
            "nodes": self.n_nodes,
            "tets": self.n_tets,
            "edges": self.n_edges,
            "boundary_faces": int(self.boundary_faces.shape[0]),
            "volume": self.total_volume,
            "min_tet_volume": float(self.rest_volumes.min()),
            "min_edge_length": float(self.rest_edge_lengths.min()),
            "max_edge_length": float(self.rest_edge_lengths.max()),
            "bbox_min": lo.tolist(),
            "bbox_max": hi.tolist(),
        }


def _data_lines(text):
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if line:
            yield lineno, line.split()


def _parse_numbers(tokens, lineno, kind, count):
    if len(tokens) < count:
        raise MeshFormatError(f"expected at least {count} fields, got {len(tokens)}", lineno)
    try:
        return [kind(t) for t in tokens[:count]]
    except ValueError:
        raise MeshFormatError(f"cannot parse {tokens[:count]!r}", lineno) from None


def load_tetgen(node_text, ele_text, reorient=False):
    """Parse TetGen ``.node`` and ``.ele`` texts into a :class:`TetMesh`.

    Node ids may start at 0 or 1; element references are mapped through the
    ids declared in the node file, so both conventions load the same mesh.
    """
    lines = list(_data_lines(node_text))
    if not lines:
        raise MeshFormatError("empty .node file", 1)
    lineno, head = lines[0]
    n_nodes, dim = _parse_numbers(head, lineno, int, 2)
    if dim != 3:
        raise MeshFormatError(f"only 3D meshes are supported, got dimension {dim}", lineno)
    body = lines[1:]
    if len(body) != n_nodes:
        raise MeshFormatError(f"header declares {n_nodes} nodes, found {len(body)}", lineno)
    ids = {}
    X = np.empty((n_nodes, 3))
    for row, (ln, tokens) in enumerate(body):
        vals = _parse_numbers(tokens, ln, float, 4)
        node_id = int(vals[0])
        if vals[0] != node_id or node_id in ids:
            raise MeshFormatError(f"invalid or duplicate node id {tokens[0]}", ln)
        ids[node_id] = row
        X[row] = vals[1:4]

    lines = list(_data_lines(ele_text))
    if not lines:
        raise MeshFormatError("empty .ele file", 1)
    lineno, head = lines[0]
    n_tets, per_tet = _parse_numbers(head, lineno, int, 2)
    if per_tet not in (4, 10):
        raise MeshFormatError(f"unsupported nodes per tet {per_tet}", lineno)
    body = lines[1:]
    if len(body) != n_tets:
        raise MeshFormatError(f"header declares {n_tets} elements, found {len(body)}", lineno)
    tets = np.empty((n_tets, 4), dtype=np.int64)
    for row, (ln, tokens) in enumerate(body):
        vals = _parse_numbers(tokens, ln, int, 5)
        for k, node_id in enumerate(vals[1:5]):
            if node_id not in ids:
                raise MeshFormatError(f"element references unknown node {node_id}", ln)
            tets[row, k] = ids[node_id]
    return TetMesh.from_arrays(X, tets, reorient=reorient)


def load_tetgen_files(path, reorient=False):
    """Load ``<base>.node``/``<base>.ele``; ``path`` may name either file or the base."""
    path = Path(path)
    base = path.with_suffix("") if path.suffix in (".node", ".ele") else path
    node_path, ele_path = base.with_suffix(".node"), base.with_suffix(".ele")
    for p in (node_path, ele_path):
        if not p.is_file():
            raise FileNotFoundError(f"mesh file not found: {p}")
    return load_tetgen(node_path.read_text(), ele_path.read_text(), reorient=reorient)


def write_tetgen(mesh, base):
    """Write ``mesh`` as 1-based TetGen files ``<base>.node`` and ``<base>.ele``."""
    base = Path(base)
    lines = [f"{mesh.n_nodes} 3 0 0"]
    lines += [f"{i + 1} {x!r} {y!r} {z!r}" for i, (x, y, z) in enumerate(mesh.rest_positions.tolist())]
    base.with_suffix(".node").write_text("\n".join(lines) + "\n")
    lines = [f"{mesh.n_tets} 4 0"]
    lines += [f"{e + 1} " + " ".join(str(v + 1) for v in tet) for e, tet in enumerate(mesh.tets.tolist())]
    base.with_suffix(".ele").write_text("\n".join(lines) + "\n")
