"""Edge stresses, the non-local breaking test, irreversible edge damage and element degradation.

Each tet's Cartesian stress is projected on its six current edge directions.
An edge breaks once its projected tensile stress reaches the material
threshold, optionally after averaging stress over a neighbourhood of rest
centroids. An element's surviving share of strain energy, ``chi``, is the
fraction of its edge-stress magnitude still carried by intact edges, and
drops to zero when its intact edges no longer connect all four nodes.
"""

from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp
from scipy.sparse.csgraph import connected_components
from scipy.spatial import cKDTree

from .fem import SimState, deformation_gradients
from .materials import cartesian_stress_sixvector
from .mesh import TET_EDGE_PAIRS, TetMesh

__all__ = [
    "direction_rows",
    "build_T",
    "build_T_all",
    "edge_normal_stresses",
    "NonlocalScreen",
    "EdgeStressReport",
    "compute_edge_stresses",
    "update_damage",
    "fragment_labels",
    "fragment_components",
    "compute_chi",
    "graph_components",
    "DamagePassResult",
    "FractureModel",
]

_DEGENERATE_EDGE_RTOL = 1e-12


def direction_rows(directions):
    """Map unit vectors (..., 3) to rows (..., 6) giving ``d^T sigma d`` on a six-vector.

    The shear entries carry a factor 2 because each off-diagonal stress
    component appears twice in the full quadratic form.
    """
    d = np.asarray(directions, dtype=np.float64)
    x, y, z = d[..., 0], d[..., 1], d[..., 2]
    return np.stack([x * x, y * y, z * z, 2 * x * y, 2 * x * z, 2 * y * z], axis=-1)


def _current_edge_vectors(mesh, u):
    x = mesh.rest_positions + u
    xt = x[mesh.tets]
    return xt[:, TET_EDGE_PAIRS[:, 1]] - xt[:, TET_EDGE_PAIRS[:, 0]]


def build_T_all(mesh: TetMesh, state_or_u):
    """Transform matrices of every tet (m, 6, 6) and a mask of degenerate tets.

    A tet is degenerate when one of its current edges has (numerically)
    zero length; its rows are left at zero.
    """
    u = state_or_u.displacements if isinstance(state_or_u, SimState) else np.reshape(state_or_u, (-1, 3))
    vec = _current_edge_vectors(mesh, u)
    length = np.linalg.norm(vec, axis=-1)
    rest_scale = mesh.rest_edge_lengths[mesh.tet_edges].max(axis=1)
    degenerate = np.any(length <= _DEGENERATE_EDGE_RTOL * rest_scale[:, None], axis=1)
    safe = np.where(length > 0, length, 1.0)
    T = direction_rows(vec / safe[..., None])
    T[degenerate] = 0.0
    return T, degenerate


def build_T(mesh: TetMesh, state, tet_index: int):
    T, degenerate = build_T_all(mesh, state)
    if degenerate[tet_index]:
        raise ValueError(f"tet {tet_index} has a zero-length current edge")
    return T[tet_index]


def edge_normal_stresses(T, sigma_c):
    """Normal stress along each edge, ``T @ sigma_c``; both arguments may be batched."""
    return np.einsum("...ij,...j->...i", T, sigma_c)


class NonlocalScreen:
    """Weighted stress averaging over tets whose rest centroids lie within ``r_d``.

    ``kernel="hat"`` weights a neighbour by ``1 - dist / r_d``; ``"flat"``
    weights every neighbour equally. Weights are normalised per tet and
    stored as a sparse row-stochastic matrix built once from rest geometry.
    """

    def __init__(self, mesh: TetMesh, r_d: float, kernel: str = "hat"):
        if kernel not in ("hat", "flat"):
            raise ValueError(f"unknown kernel {kernel!r}")
        self.r_d = float(r_d)
        self.kernel = kernel
        m = mesh.n_tets
        self.local = self.r_d <= 0.0 or m == 1
        if self.local:
            self.weights = sp.identity(m, format="csr")
            return
        tree = cKDTree(mesh.rest_centroids)
        dist = tree.sparse_distance_matrix(tree, self.r_d, output_type="coo_matrix")
        off = dist.row != dist.col
        rows = np.concatenate([np.arange(m), dist.row[off]])
        cols = np.concatenate([np.arange(m), dist.col[off]])
        d = np.concatenate([np.zeros(m), dist.data[off]])
        if kernel == "hat":
            w = np.clip(1.0 - d / self.r_d, 0.0, None)
        else:
            w = np.ones_like(d)
        # self pairs may or may not be stored, so they are dropped above and added once
        W = sp.csr_matrix((w, (rows, cols)), shape=(m, m))
        W.sum_duplicates()
        W.eliminate_zeros()
        row_sum = np.asarray(W.sum(axis=1)).ravel()
        self.weights = sp.diags(1.0 / row_sum) @ W
        self.weights = self.weights.tocsr()

    def average(self, sigma_c):
        """Neighbourhood-averaged six-vectors, shape (m, 6)."""
        if self.local:
            return np.asarray(sigma_c)
        return np.asarray(self.weights @ sigma_c)

    def screen(self, mesh: TetMesh, sigma_c, T):
        """Per-tet screened edge stresses (m, 6) and per-edge maximum over incident tets."""
        per_tet = edge_normal_stresses(T, self.average(sigma_c))
        per_edge = np.full(mesh.n_edges, -np.inf)
        np.maximum.at(per_edge, mesh.tet_edges.ravel(), per_tet.ravel())
        return per_tet, per_edge


@dataclass
class EdgeStressReport:
    sigma_c: np.ndarray          # (m, 6) six-vector fed to the screen
    local_edge_stress: np.ndarray   # (m, 6) T sigma of the element itself
    screened_tet: np.ndarray     # (m, 6) T applied to the neighbourhood average
    edge_screen: np.ndarray      # (n_edges,) max of screened_tet over incident tets
    inverted: np.ndarray         # (m,) det F <= 0
    degenerate: np.ndarray       # (m,) zero-length current edge


def compute_edge_stresses(mesh: TetMesh, state: SimState, params, screen: NonlocalScreen, weights=None):
    """Evaluate every edge stress for the state's displacements.

    Stresses come from the undegraded energy, so a softened element that
    strains more also reports more stress. ``weights`` (m,) optionally
    scales each element's six-vector before it enters the screen.
    """
    F = deformation_gradients(mesh, state)
    sigma, inverted = cartesian_stress_sixvector(F, params)
    T, degenerate = build_T_all(mesh, state)
    local = edge_normal_stresses(T, sigma)
    fed = sigma if weights is None else np.asarray(weights)[:, None] * sigma
    per_tet, per_edge = screen.screen(mesh, fed, T)
    return EdgeStressReport(fed, local, per_tet, per_edge, inverted, degenerate)


def update_damage(state: SimState, edge_screen, sigma_thres):
    """Break every intact edge whose screened tensile stress is at least ``sigma_thres``.

    Mutates ``state.edge_damage`` and returns the sorted indices of edges
    broken by this call.
    """
    trips = (np.asarray(edge_screen) >= sigma_thres) & (state.edge_damage == 0)
    newly = np.flatnonzero(trips)
    state.edge_damage[newly] = 1
    return newly


def fragment_labels(mesh: TetMesh, edge_damage):
    """Component label of each local node, shape (m, 4), using intact edges only.

    Labels are the smallest local index in the component.
    """
    intact = np.asarray(edge_damage)[mesh.tet_edges] == 0
    labels = np.tile(np.arange(4), (mesh.n_tets, 1))
    # three sweeps cover the longest path in a 4-node graph
    for _ in range(3):
        for k, (a, b) in enumerate(TET_EDGE_PAIRS):
            on = intact[:, k]
            low = np.minimum(labels[:, a], labels[:, b])
            labels[on, a] = low[on]
            labels[on, b] = low[on]
    return labels


def fragment_components(mesh: TetMesh, state: SimState, tet_index: int):
    """Partition of local nodes 0..3 into connected pieces under intact edges."""
    labels = fragment_labels(mesh, state.edge_damage)[tet_index]
    groups = {}
    for node, lab in enumerate(labels):
        groups.setdefault(int(lab), []).append(node)
    return [tuple(g) for _, g in sorted(groups.items())]


def compute_chi(mesh: TetMesh, edge_damage, edge_stress, sigma_thres, eps_rel=1e-12):
    """Surviving energy fraction per tet from its six edge stresses.

    ``chi = sum |s| over intact edges / sum |s| over all edges``; zero when
    the intact edges split the element; the intact-edge share of six when
    the stress is too small to weigh the edges.
    """
    intact = np.asarray(edge_damage)[mesh.tet_edges] == 0
    mag = np.abs(edge_stress)
    denom = mag.sum(axis=1)
    num = np.where(intact, mag, 0.0).sum(axis=1)
    eps = eps_rel * (sigma_thres if np.isfinite(sigma_thres) else 1.0)
    small = denom < eps
    chi = np.where(small, intact.sum(axis=1) / 6.0, num / np.where(small, 1.0, denom))
    labels = fragment_labels(mesh, edge_damage)
    split = np.any(labels != labels[:, :1], axis=1)
    chi[split] = 0.0
    return np.clip(chi, 0.0, 1.0)


def graph_components(mesh: TetMesh, edge_damage):
    """Connected pieces of the intact-edge node graph.

    Returns ``(labels, pieces)``: a component label per node and the labels
    of components that still own at least one intact edge. A node whose
    edges are all broken is a component of its own but belongs to no piece.
    """
    intact = mesh.edges[np.asarray(edge_damage) == 0]
    n = mesh.n_nodes
    graph = sp.coo_matrix((np.ones(len(intact)), (intact[:, 0], intact[:, 1])), shape=(n, n))
    _, labels = connected_components(graph, directed=False)
    pieces = np.unique(labels[intact.ravel()]) if len(intact) else np.empty(0, dtype=labels.dtype)
    return labels, pieces


@dataclass
class DamagePassResult:
    newly_broken: np.ndarray
    report: EdgeStressReport

    @property
    def count(self):
        return int(self.newly_broken.size)


class FractureModel:
    """Runs the per-step damage pass for one mesh and material."""

    def __init__(self, mesh: TetMesh, params, kernel: str = "hat", log=None):
        self.mesh = mesh
        self.params = params
        self.screen = NonlocalScreen(mesh, params.r_d, kernel)
        self.log = log

    def damage_pass(self, state: SimState, step=None):
        """Break edges from the current displacements and refresh ``element_chi``.

        ``chi`` never increases: the new value is capped by the previous one.
        """
        report = compute_edge_stresses(self.mesh, state, self.params, self.screen)
        if np.isfinite(self.params.sigma_thres):
            newly = update_damage(state, report.edge_screen, self.params.sigma_thres)
        else:
            newly = np.empty(0, dtype=np.int64)
        if state.broken_count or np.any(report.degenerate):
            chi = compute_chi(self.mesh, state.edge_damage, report.local_edge_stress, self.params.sigma_thres)
            chi[report.degenerate] = 0.0
            state.element_chi = np.minimum(state.element_chi, chi)
        state.inverted = report.inverted
        if self.log is not None:
            self.log.write(
                f"step={state.step if step is None else step} new={newly.size} "
                f"total={state.broken_count} chi_min={state.element_chi.min():.6g} "
                f"chi_mean={state.element_chi.mean():.6g}\n"
            )
        return DamagePassResult(newly, report)
