"""Independent checks of the simulator.

* strain energy rebuilt from edge lengths alone, through a least-squares
  reconstruction of the right Cauchy-Green tensor;
* finite-difference checks of forces and stiffness;
* a witness that no per-edge additive (mass-spring) energy reproduces the
  element energy.
"""

from dataclasses import dataclass

import numpy as np

from .fem import SimState, assemble_forces, assemble_stiffness, total_energy
from .linalg import pinv_small
from .materials import MaterialParams, energy_density
from .mesh import TET_EDGE_PAIRS, TetMesh

__all__ = [
    "StretchRecord",
    "stretches_from_deformation",
    "Reconstruction",
    "reconstruct_C",
    "invariants",
    "energy_from_edges",
    "fd_check_forces",
    "fd_check_stiffness",
    "WitnessResult",
    "mass_spring_witness",
    "OracleResult",
    "run_oracle_suite",
    "random_deformation",
    "UNIT_TET",
    "PeakWindow",
    "peak_window",
]

UNIT_TET = np.array([[0.0, 0.0, 0.0], [1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]])
_SQRT2 = np.sqrt(2.0)


@dataclass
class StretchRecord:
    squared_stretch: np.ndarray   # (k,) current over rest length, squared
    directions: np.ndarray        # (k, 3) rest unit directions


def stretches_from_deformation(rest_vertices, F=None, current_vertices=None):
    """Edge stretches of one tet, from either a deformation gradient or current vertices."""
    X = np.asarray(rest_vertices, dtype=np.float64)
    rest = X[TET_EDGE_PAIRS[:, 1]] - X[TET_EDGE_PAIRS[:, 0]]
    if current_vertices is not None:
        x = np.asarray(current_vertices, dtype=np.float64)
        cur = x[TET_EDGE_PAIRS[:, 1]] - x[TET_EDGE_PAIRS[:, 0]]
    else:
        cur = rest @ np.asarray(F, dtype=np.float64).T
    rest_len2 = np.einsum("ij,ij->i", rest, rest)
    return StretchRecord(np.einsum("ij,ij->i", cur, cur) / rest_len2, rest / np.sqrt(rest_len2)[:, None])


@dataclass
class Reconstruction:
    C: np.ndarray
    rank: int

    @property
    def rank_deficient(self):
        return self.rank < 6


def _sym_rows(q):
    x, y, z = q[:, 0], q[:, 1], q[:, 2]
    return np.stack([x * x, y * y, z * z, _SQRT2 * x * y, _SQRT2 * x * z, _SQRT2 * y * z], axis=1)


def reconstruct_C(record: StretchRecord):
    """Least-squares C with ``q^T C q`` matching every squared stretch.

    C is unknown as a 6-vector on an orthonormal basis of symmetric
    matrices (off-diagonals scaled by sqrt 2), solved with a pseudo-inverse;
    fewer than six independent edge dyads give the minimum-norm answer.
    """
    q = np.asarray(record.directions, dtype=np.float64)
    if q.shape[0] < 6:
        raise ValueError(f"need at least 6 edges, got {q.shape[0]}")
    A = _sym_rows(q)
    pinv, rank = pinv_small(A, return_rank=True)
    c = pinv @ np.asarray(record.squared_stretch, dtype=np.float64)
    off = c[3:] / _SQRT2
    C = np.array([[c[0], off[0], off[1]], [off[0], c[1], off[2]], [off[1], off[2], c[2]]])
    return Reconstruction(C, rank)


def invariants(C, fiber_a=None, fiber_b=None):
    """I_C, II_C, III_C, J and, with fibers, IV_C = a.C b and V_C = a.C^T C b."""
    out = {"I": float(np.trace(C)), "II": float(np.sum(C * C)), "III": float(np.linalg.det(C))}
    out["J"] = float(np.sqrt(max(out["III"], 0.0)))
    if fiber_a is not None:
        a = np.asarray(fiber_a, dtype=np.float64)
        b = a if fiber_b is None else np.asarray(fiber_b, dtype=np.float64)
        out["IV"] = float(a @ C @ b)
        out["V"] = float(a @ C.T @ C @ b)
    return out


def energy_from_edges(record: StretchRecord, params: MaterialParams, model=None):
    """Strain energy density evaluated from edge stretches only."""
    model = model or params.energy_model
    inv = invariants(reconstruct_C(record).C)
    mu, lam = params.mu, params.lam
    if model == "stvk":
        return lam / 8.0 * (inv["I"] - 3.0) ** 2 + mu / 4.0 * (inv["II"] - 2.0 * inv["I"] + 3.0)
    if model == "stable_neo_hookean":
        alpha = params.neo_alpha
        return (0.5 * mu * (inv["I"] - 3.0) + 0.5 * lam * (inv["J"] - alpha) ** 2
                - 0.5 * mu * np.log(inv["I"] + 1.0))
    raise ValueError(f"unknown energy model {model!r}")


def random_deformation(rng, scale=0.3, min_det=0.2):
    """A random F near identity with ``det F >= min_det``."""
    while True:
        F = np.eye(3) + scale * rng.standard_normal((3, 3))
        if np.linalg.det(F) >= min_det:
            return F


# --- finite-difference checks ---------------------------------------------------

def _force_scale(mesh, params):
    return 1e-8 * params.youngs * mesh.mean_face_area


def fd_check_forces(mesh: TetMesh, state, params, h=1e-6, chi=None):
    """Largest deviation between forces and minus the central-difference energy gradient.

    Relative to the largest force component; a floor far below any
    meaningful force keeps the rest state from dividing by zero.
    ``h`` is relative to the mesh's mean rest edge length.
    """
    u0 = (state.displacements if isinstance(state, SimState) else np.asarray(state)).ravel().astype(float)
    chi = state.element_chi if (chi is None and isinstance(state, SimState)) else chi
    step = h * float(mesh.rest_edge_lengths.mean())
    f = assemble_forces(mesh, u0, params, chi)
    fd = np.empty_like(f)
    for k in range(u0.size):
        up, um = u0.copy(), u0.copy()
        up[k] += step
        um[k] -= step
        fd[k] = -(total_energy(mesh, up, params, chi) - total_energy(mesh, um, params, chi)) / (2 * step)
    denom = max(np.abs(f).max(), _force_scale(mesh, params))
    return float(np.abs(f - fd).max() / denom)


def fd_check_stiffness(mesh: TetMesh, state, params, h=1e-6, chi=None, n_directions=3, seed=0):
    """Worst relative gap between ``K v`` and the central difference of forces along ``v``."""
    u0 = (state.displacements if isinstance(state, SimState) else np.asarray(state)).ravel().astype(float)
    chi = state.element_chi if (chi is None and isinstance(state, SimState)) else chi
    K = assemble_stiffness(mesh, u0, params, chi)
    rng = np.random.default_rng(seed)
    step = h * float(mesh.rest_edge_lengths.mean())
    worst = 0.0
    for _ in range(n_directions):
        v = rng.standard_normal(u0.size)
        v /= np.abs(v).max()
        fd = -(assemble_forces(mesh, u0 + step * v, params, chi) - assemble_forces(mesh, u0 - step * v, params, chi)) / (2 * step)
        Kv = K @ v
        denom = max(np.abs(fd).max(), _force_scale(mesh, params) / float(mesh.rest_edge_lengths.mean()))
        worst = max(worst, float(np.abs(Kv - fd).max() / denom))
    return worst


# --- mass-spring non-equivalence -----------------------------------------------

@dataclass
class WitnessResult:
    demonstrated: bool
    relative: float
    absolute: float
    element_energy: float
    spring_energy: float
    floor: float


def _edge_features(record, degree):
    s = record.squared_stretch - 1.0
    return np.stack([s ** p for p in range(2, degree + 1)], axis=1)   # (6, degree - 1)


def mass_spring_witness(params: MaterialParams, gamma=0.3, stretches=(0.9, 0.95, 1.05, 1.1), degree=4,
                        rel_threshold=0.01, floor=None):
    """Fit the best per-edge additive energy on axis stretches, then test it under shear.

    Each edge of the unit right tet gets its own polynomial in
    ``lambda^2 - 1`` (powers 2..``degree``), fitted by least squares to the
    element energy of uniaxial stretches along x, y and z. The fit is then
    compared with the element energy for ``F = I + gamma e_x (x) e_y``.
    Non-equivalence counts as shown when the gap exceeds ``rel_threshold``
    of the element energy and the absolute ``floor`` (by default 1e-9 of
    ``(mu + lam) V``).
    """
    V = 1.0 / 6.0
    floor = 1e-9 * (params.mu + params.lam) * V if floor is None else floor
    rest = energy_density(np.eye(3), params)
    n_feat = degree - 1
    rows, target = [], []
    for axis in range(3):
        for s in stretches:
            F = np.eye(3)
            F[axis, axis] = s
            feats = _edge_features(stretches_from_deformation(UNIT_TET, F), degree)
            row = np.zeros(6 * n_feat)
            for e in range(6):
                row[e * n_feat:(e + 1) * n_feat] = feats[e]
            rows.append(row)
            target.append(V * (energy_density(F, params) - rest))
    coef = pinv_small(np.asarray(rows)) @ np.asarray(target)

    F = np.eye(3)
    F[0, 1] = gamma
    feats = _edge_features(stretches_from_deformation(UNIT_TET, F), degree)
    spring = float(sum(feats[e] @ coef[e * n_feat:(e + 1) * n_feat] for e in range(6)))
    element = float(V * (energy_density(F, params) - rest))
    absolute = abs(element - spring)
    relative = absolute / abs(element) if element != 0 else 0.0
    return WitnessResult(bool(relative > rel_threshold and absolute > floor), relative, absolute, element, spring, floor)


# --- suite ------------------------------------------------------------------------

@dataclass
class OracleResult:
    name: str
    passed: bool
    detail: str

    def __post_init__(self):
        self.passed = bool(self.passed)


def _theorem_oracle(n_samples, seed):
    rng = np.random.default_rng(seed)
    worst_e, worst_c = 0.0, 0.0
    for model in ("stvk", "stable_neo_hookean"):
        params = MaterialParams(youngs=1.0, poisson=0.3, energy_model=model)
        for _ in range(n_samples):
            X = UNIT_TET + 0.15 * rng.standard_normal((4, 3))
            if np.linalg.det((X[1:] - X[0]).T) < 0.05:
                X = UNIT_TET
            F = random_deformation(rng)
            rec = stretches_from_deformation(X, F)
            C = F.T @ F
            C_hat = reconstruct_C(rec).C
            worst_c = max(worst_c, np.linalg.norm(C_hat - C) / np.linalg.norm(C))
            a, b = energy_from_edges(rec, params), energy_density(F, params)
            worst_e = max(worst_e, abs(a - b) / max(abs(b), 1e-300))
    ok = worst_e < 1e-8 and worst_c < 1e-10
    return OracleResult("edge-length energy reconstruction", ok,
                        f"energy rel err {worst_e:.2e}, C rel err {worst_c:.2e} over {2 * n_samples} samples")


def _fd_oracle(seed):
    from .meshing import box_mesh

    rng = np.random.default_rng(seed)
    mesh = box_mesh((1.0, 0.5, 0.5), (3, 2, 2))
    worst_f, worst_k = 0.0, 0.0
    for model in ("stvk", "stable_neo_hookean"):
        params = MaterialParams(youngs=1e3, poisson=0.3, energy_model=model)
        for damaged in (False, True):
            state = SimState.initial(mesh)
            state.displacements = 0.03 * rng.standard_normal(state.displacements.shape)
            if damaged:
                state.element_chi = np.where(rng.uniform(size=mesh.n_tets) < 0.3, rng.uniform(size=mesh.n_tets), 1.0)
            worst_f = max(worst_f, fd_check_forces(mesh, state, params))
            worst_k = max(worst_k, fd_check_stiffness(mesh, state, params))
    ok = worst_f < 1e-4 and worst_k < 1e-3
    return OracleResult("force and stiffness finite differences", ok,
                        f"force rel err {worst_f:.2e}, stiffness rel err {worst_k:.2e}")


def _chi_oracle():
    from .fracture import compute_chi

    mesh = TetMesh.from_arrays(UNIT_TET, [[0, 1, 2, 3]])
    s = np.ones((1, 6))
    cases = {
        "intact": (np.zeros(6), 1.0),
        "all broken": (np.ones(6), 0.0),
        "one broken": (np.eye(6)[0], 5.0 / 6.0),
        "node isolated": (np.array([1, 1, 1, 0, 0, 0]), 0.0),
    }
    bad = []
    for name, (local, expected) in cases.items():
        dmg = np.zeros(mesh.n_edges, dtype=np.int8)
        dmg[mesh.tet_edges[0][local.astype(bool)]] = 1
        got = compute_chi(mesh, dmg, s, 1.0)[0]
        if abs(got - expected) > 1e-12:
            bad.append(f"{name}: {got} != {expected}")
    return OracleResult("degradation factor cases", not bad, "; ".join(bad) or "4 cases exact")


def _transform_oracle(seed):
    from .fracture import build_T_all, direction_rows, edge_normal_stresses
    from .materials import cartesian_stress_sixvector

    rng = np.random.default_rng(seed)
    mesh = TetMesh.from_arrays(UNIT_TET, [[0, 1, 2, 3]])
    params = MaterialParams(youngs=1.0, poisson=0.3, energy_model="stvk")
    row_err = np.abs(direction_rows([1.0, 0.0, 0.0]) - np.eye(6)[0]).max()
    T, _ = build_T_all(mesh, 0.1 * rng.standard_normal((4, 3)))
    hyd = np.abs(edge_normal_stresses(T[0], np.array([2.5, 2.5, 2.5, 0, 0, 0])) - 2.5).max()
    worst = 0.0
    for _ in range(20):
        F = random_deformation(rng)
        x = UNIT_TET @ F.T
        Q, _ = np.linalg.qr(rng.standard_normal((3, 3)))
        if np.linalg.det(Q) < 0:
            Q[:, 0] *= -1
        stresses = []
        for R in (np.eye(3), Q):
            xr = x @ R.T
            Fr = R @ F
            sig, _ = cartesian_stress_sixvector(Fr[None], params)
            Tr, _ = build_T_all(mesh, xr - UNIT_TET)
            stresses.append(edge_normal_stresses(Tr[0], sig[0]))
        worst = max(worst, np.abs(stresses[0] - stresses[1]).max() / max(np.abs(stresses[0]).max(), 1e-300))
    ok = row_err == 0 and hyd < 1e-12 and worst < 1e-8
    return OracleResult("edge transform identities", ok,
                        f"axis row err {row_err:.1e}, hydrostatic err {hyd:.1e}, rotation err {worst:.1e}")


def _pinv_oracle(seed):
    rng = np.random.default_rng(seed)
    worst = 0.0
    for shape in ((6, 6), (8, 6), (5, 7)):
        M = rng.standard_normal(shape)
        P = pinv_small(M)
        for lhs, rhs in ((M @ P @ M, M), (P @ M @ P, P), ((M @ P).T, M @ P), ((P @ M).T, P @ M)):
            worst = max(worst, np.abs(lhs - rhs).max())
    return OracleResult("pseudo-inverse Penrose conditions", worst < 1e-9, f"max violation {worst:.1e}")


def _witness_oracle():
    params = MaterialParams(youngs=1.0, poisson=0.3, energy_model="stvk")
    shear = mass_spring_witness(params, gamma=0.3)
    tiny = mass_spring_witness(params, gamma=1e-6)
    none = mass_spring_witness(params, gamma=0.0)
    ok = shear.demonstrated and not tiny.demonstrated and none.absolute == 0.0
    return OracleResult("mass-spring non-equivalence", ok,
                        f"shear rel gap {shear.relative:.2%}, small-shear abs gap {tiny.absolute:.1e} (floor {tiny.floor:.1e})")


def run_oracle_suite(n_samples=1000, seed=0):
    """Run every oracle and return a list of :class:`OracleResult`."""
    return [
        _theorem_oracle(n_samples, seed),
        _fd_oracle(seed),
        _chi_oracle(),
        _transform_oracle(seed),
        _pinv_oracle(seed),
        _witness_oracle(),
    ]


@dataclass
class PeakWindow:
    peak_index: int
    peak_load: float
    peak_displacement: float
    window_loads: np.ndarray    # loads after the peak until displacement grows by the window fraction
    unique_peak: bool

    @property
    def min_ratio(self):
        """Smallest post-peak load over the window as a fraction of the peak (nan if the window is empty)."""
        return float(self.window_loads.min() / self.peak_load) if self.window_loads.size else float("nan")


def peak_window(loads, displacements, fraction=0.2):
    """Locate the global load maximum and collect loads within ``fraction`` more displacement.

    The window holds the samples after the peak whose displacement, measured
    from the first sample, lies in ``[d_peak, (1 + fraction) d_peak]``.
    """
    loads = np.asarray(loads, dtype=np.float64)
    disp = np.asarray(displacements, dtype=np.float64)
    disp = disp - disp[0]
    k = int(np.argmax(loads))
    unique = int(np.count_nonzero(loads == loads[k])) == 1
    after = np.arange(loads.size) > k
    inside = after & (disp >= disp[k]) & (disp <= (1.0 + fraction) * disp[k])
    return PeakWindow(k, float(loads[k]), float(disp[k]), loads[inside], unique)

