"""Structured tetrahedral meshers for the built-in experiments.

All generators return positively oriented, conforming meshes so the
scenarios need no external meshing tool. Lengths are in meters.
"""

import itertools

import numpy as np
from scipy.spatial import Delaunay

from .mesh import TetMesh

__all__ = ["box_mesh", "grid_mesh", "graded_axis", "cylinder_mesh", "notched_bar_mesh"]


def _kuhn_cells():
    # six tets per cube, each a monotone lattice path from corner 000 to 111
    corner = {bits: i for i, bits in enumerate(itertools.product((0, 1), repeat=3))}
    cells = []
    for perm in itertools.permutations(range(3)):
        path = [(0, 0, 0)]
        cur = [0, 0, 0]
        for axis in perm:
            cur[axis] = 1
            path.append(tuple(cur))
        cells.append([corner[p] for p in path])
    return np.array(cells)


_KUHN = _kuhn_cells()


def grid_mesh(xs, ys, zs):
    """Tensor-product grid on the given node coordinates, 6 tets per cell."""
    xs, ys, zs = (np.asarray(a, dtype=np.float64) for a in (xs, ys, zs))
    nx, ny, nz = len(xs), len(ys), len(zs)
    X = np.stack(np.meshgrid(xs, ys, zs, indexing="ij"), axis=-1).reshape(-1, 3)

    def nid(i, j, k):
        return (i * ny + j) * nz + k

    i, j, k = np.meshgrid(np.arange(nx - 1), np.arange(ny - 1), np.arange(nz - 1), indexing="ij")
    i, j, k = i.ravel(), j.ravel(), k.ravel()
    corners = np.stack(
        [nid(i + a, j + b, k + c) for a, b, c in itertools.product((0, 1), repeat=3)], axis=1
    )
    tets = corners[:, _KUHN].reshape(-1, 4)
    return X, tets


def box_mesh(size, divisions, origin=(0.0, 0.0, 0.0)):
    """Uniform box ``size`` = (Lx, Ly, Lz) split into ``divisions`` cells per axis."""
    axes = [o + np.linspace(0.0, L, n + 1) for o, L, n in zip(origin, size, divisions)]
    X, tets = grid_mesh(*axes)
    return TetMesh.from_arrays(X, tets, reorient=True)


def graded_axis(length, fine_center, fine_half_width, fine_step, coarse_cells):
    """Node coordinates on [0, length] with uniform fine spacing around a center.

    The band ``[fine_center - fine_half_width, fine_center + fine_half_width]``
    uses ``fine_step``; each remaining side gets ``coarse_cells`` equal cells.
    The center itself is always a node.
    """
    eps = 1e-12 * length
    n_fine = max(1, int(round(fine_half_width / fine_step)))
    lo = max(0.0, fine_center - n_fine * fine_step)
    hi = min(length, fine_center + n_fine * fine_step)
    fine = fine_center + fine_step * np.arange(-n_fine, n_fine + 1)
    fine = fine[(fine >= lo - eps) & (fine <= hi + eps)]
    left = np.linspace(0.0, lo, coarse_cells + 1)[:-1] if lo > eps else np.empty(0)
    right = np.linspace(hi, length, coarse_cells + 1)[1:] if hi < length - eps else np.empty(0)
    return np.concatenate([left, fine, right])


def notched_bar_mesh(
    length=0.055,
    width=0.010,
    height=0.010,
    notch_x=None,
    notch_depth=0.002,
    notch_angle_deg=45.0,
    x_fine_half_width=0.004,
    x_fine_step=0.001,
    x_coarse_cells=7,
    ny=3,
    z_nodes=None,
):
    """Bar along x with a V notch cut into its bottom face (z = 0).

    The grid is slit along ``x = notch_x`` below the notch root and the two
    slit faces are pushed apart to the V flanks, so the notch surface is
    resolved exactly without removing elements.
    """
    if notch_x is None:
        notch_x = 0.5 * length
    xs = graded_axis(length, notch_x, x_fine_half_width, x_fine_step, x_coarse_cells)
    ys = np.linspace(0.0, width, ny + 1)
    if z_nodes is None:
        z_nodes = np.unique(np.concatenate([
            np.linspace(0.0, notch_depth, 3),
            np.linspace(notch_depth, height, 7),
        ]))
    zs = np.asarray(z_nodes, dtype=np.float64)
    if notch_depth > 0 and not np.any(np.isclose(zs, notch_depth)):
        raise ValueError("z_nodes must contain the notch depth")
    X, tets = grid_mesh(xs, ys, zs)
    if notch_depth <= 0:
        return TetMesh.from_arrays(X, tets, reorient=True)

    tol = 1e-9 * length
    on_slit = (np.abs(X[:, 0] - notch_x) < tol) & (X[:, 2] < notch_depth - tol)
    slit_nodes = np.nonzero(on_slit)[0]
    # left-hand tets get fresh copies of the slit nodes
    copy_of = np.full(X.shape[0], -1)
    copy_of[slit_nodes] = X.shape[0] + np.arange(slit_nodes.size)
    X = np.concatenate([X, X[slit_nodes]])
    left = X[tets].mean(axis=1)[:, 0] < notch_x
    sub = tets[left]
    sub = np.where(copy_of[sub] >= 0, copy_of[sub], sub)
    tets = tets.copy()
    tets[left] = sub

    half_tan = np.tan(np.radians(0.5 * notch_angle_deg))
    band = x_fine_half_width
    is_copy = np.zeros(X.shape[0], dtype=bool)
    is_copy[X.shape[0] - slit_nodes.size:] = True
    dx = X[:, 0] - notch_x
    depth_left = np.clip(notch_depth - X[:, 2], 0.0, None)
    w = depth_left * half_tan
    inside = (np.abs(dx) <= band + tol) & (depth_left > 0)
    side = np.where(is_copy | (dx < -tol), -1.0, 1.0)
    side[(np.abs(dx) < tol) & ~is_copy] = 1.0
    shift = side * w * np.clip(1.0 - np.abs(dx) / band, 0.0, 1.0)
    X[inside, 0] += shift[inside]

    used = np.unique(tets)
    remap = np.full(X.shape[0], -1)
    remap[used] = np.arange(used.size)
    return TetMesh.from_arrays(X[used], remap[tets], reorient=True)


def _disk_points(radius, n_rings, per_ring=8):
    pts = [np.zeros((1, 2))]
    for k in range(1, n_rings + 1):
        n = per_ring * k
        theta = 2 * np.pi * np.arange(n) / n
        r = radius * k / n_rings
        pts.append(np.stack([r * np.cos(theta), r * np.sin(theta)], axis=1))
    return np.concatenate(pts)


def cylinder_mesh(radius, length, n_rings=5, n_layers=5, axis=0, per_ring=8):
    """Solid cylinder centred on the origin with its axis along ``axis``.

    A ring-point disk triangulation is extruded in layers; each prism is cut
    into three tets with diagonals chosen by global vertex index, which keeps
    neighbouring prisms conforming. ``per_ring`` points per ring index (a
    multiple of 4) puts nodes on both ends of the two in-plane diameters.
    """
    pts2 = _disk_points(radius, n_rings, per_ring)
    tri = Delaunay(pts2).simplices
    a = pts2[tri]
    e1, e2 = a[:, 1] - a[:, 0], a[:, 2] - a[:, 0]
    area = 0.5 * np.abs(e1[:, 0] * e2[:, 1] - e1[:, 1] * e2[:, 0])
    tri = np.sort(tri[area > 1e-10 * radius**2], axis=1)
    n2 = pts2.shape[0]
    zs = np.linspace(-0.5 * length, 0.5 * length, n_layers + 1)

    coords = np.empty(((n_layers + 1) * n2, 3))
    for layer, z in enumerate(zs):
        block = slice(layer * n2, (layer + 1) * n2)
        coords[block, 0] = z
        coords[block, 1] = pts2[:, 0]
        coords[block, 2] = pts2[:, 1]
    # rotate so that the axis lands on the requested coordinate
    perm = {0: [0, 1, 2], 1: [2, 0, 1], 2: [1, 2, 0]}[axis]
    coords = coords[:, perm]

    tets = []
    for layer in range(n_layers):
        b, t = layer * n2, (layer + 1) * n2
        v0, v1, v2 = tri[:, 0], tri[:, 1], tri[:, 2]
        tets.append(np.stack([v0 + b, v1 + b, v2 + b, v2 + t], axis=1))
        tets.append(np.stack([v0 + b, v1 + b, v1 + t, v2 + t], axis=1))
        tets.append(np.stack([v0 + b, v0 + t, v1 + t, v2 + t], axis=1))
    return TetMesh.from_arrays(coords, np.concatenate(tets), reorient=True)
