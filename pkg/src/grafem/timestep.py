"""Boundary conditions, quasi-static Newton continuation, implicit dynamics and the run loop."""

import csv
import logging
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse.linalg as spla

from .collision import ContactResult, contact_energy, detect_and_respond
from .exceptions import ConvergenceError
from .fem import SimState, SystemAssembler, assemble_forces, lumped_mass, total_energy
from .fracture import FractureModel
from .linalg import cg_solve
from .mesh import TetMesh

__all__ = [
    "SolverConfig",
    "BCGroup",
    "BoundaryCondition",
    "Probe",
    "StepResult",
    "quasi_static_step",
    "dynamic_step",
    "Simulation",
    "RunResult",
    "METRIC_COLUMNS",
    "write_metrics",
]

logger = logging.getLogger(__name__)

METRIC_COLUMNS = ("step", "time", "strain_energy", "kinetic_energy", "broken_edges", "load", "displacement")


@dataclass
class SolverConfig:
    dt: float = 1e-3
    newton_tol: float = None
    newton_max_iters: int = 30
    cg_tol: float = 1e-8
    cg_max_iters: int = None
    line_search_factor: float = 0.5
    line_search_c: float = 1e-4
    line_search_max_halvings: int = 20
    max_increment_halvings: int = 10
    gravity: tuple = (0.0, 0.0, 0.0)
    linear_solver: str = "cg"
    full_newton: bool = False
    damage_iterations: int = 0
    contact_substeps: int = 1

    def __post_init__(self):
        if not self.dt > 0:
            raise ValueError(f"dt must be positive, got {self.dt!r}")
        if self.newton_tol is not None and not self.newton_tol > 0:
            raise ValueError("newton_tol must be positive")
        if not self.cg_tol > 0:
            raise ValueError("cg_tol must be positive")
        if self.linear_solver not in ("cg", "direct"):
            raise ValueError(f"linear_solver must be 'cg' or 'direct', got {self.linear_solver!r}")
        if not 0 < self.line_search_factor < 1:
            raise ValueError("line_search_factor must lie in (0, 1)")
        if self.contact_substeps < 1:
            raise ValueError("contact_substeps must be at least 1")

    def resolved_newton_tol(self, mesh: TetMesh, params):
        if self.newton_tol is not None:
            return self.newton_tol
        stress = params.sigma_thres if np.isfinite(params.sigma_thres) else 1e-3 * params.youngs
        return 1e-6 * stress * mesh.mean_face_area


@dataclass
class BCGroup:
    """Prescribed motion of a node set, piecewise linear between keyframes.

    ``kind="fixed"`` holds the nodes at rest. ``"translate"`` interpolates
    displacement vectors ``values`` (k, 3). ``"rotate"`` interpolates angles
    in radians about ``axis`` through ``center``. Only ``components`` of each
    node are constrained.
    """

    name: str
    nodes: np.ndarray
    kind: str = "fixed"
    times: tuple = (0.0,)
    values: tuple = ((0.0, 0.0, 0.0),)
    axis: tuple = (1.0, 0.0, 0.0)
    center: tuple = (0.0, 0.0, 0.0)
    components: tuple = (0, 1, 2)

    def __post_init__(self):
        self.nodes = np.unique(np.asarray(self.nodes, dtype=np.int64))
        if self.kind not in ("fixed", "translate", "rotate"):
            raise ValueError(f"unknown boundary kind {self.kind!r}")
        self.times = np.asarray(self.times, dtype=np.float64).ravel()
        if np.any(np.diff(self.times) <= 0):
            raise ValueError(f"group {self.name!r}: keyframe times must increase strictly")
        vals = np.asarray(self.values, dtype=np.float64)
        if self.kind == "translate":
            vals = vals.reshape(-1, 3)
        elif self.kind == "rotate":
            vals = vals.ravel()
        if self.kind != "fixed" and vals.shape[0] != self.times.size:
            raise ValueError(f"group {self.name!r}: need one value per keyframe")
        self.values = vals
        axis = np.asarray(self.axis, dtype=np.float64)
        self.axis = axis / np.linalg.norm(axis)
        self.center = np.asarray(self.center, dtype=np.float64)
        self.components = tuple(sorted(set(int(c) for c in self.components)))
        if not self.components or not set(self.components) <= {0, 1, 2}:
            raise ValueError(f"group {self.name!r}: components must be a non-empty subset of 0, 1, 2")

    def displacement(self, t, rest_positions):
        X = rest_positions[self.nodes]
        if self.kind == "fixed":
            return np.zeros_like(X)
        if self.kind == "translate":
            d = np.array([np.interp(t, self.times, self.values[:, c]) for c in range(3)])
            return np.broadcast_to(d, X.shape).copy()
        angle = np.interp(t, self.times, self.values)
        k = self.axis
        r = X - self.center
        cos, sin = np.cos(angle), np.sin(angle)
        rotated = r * cos + np.cross(k, r) * sin + np.outer(r @ k, k) * (1 - cos)
        return rotated - r


class BoundaryCondition:
    """A set of disjoint :class:`BCGroup` constraints."""

    def __init__(self, groups=()):
        self.groups = list(groups)
        dofs = [3 * g.nodes[:, None] + np.array(g.components) for g in self.groups]
        flat = np.concatenate([d.ravel() for d in dofs]) if dofs else np.empty(0, dtype=np.int64)
        uniq, counts = np.unique(flat, return_counts=True)
        if np.any(counts > 1):
            raise ValueError(f"dof {int(uniq[counts > 1][0])} is constrained by more than one group")
        self.dofs = uniq.astype(np.int64)
        self._group_dofs = dofs

    def group(self, name):
        for g in self.groups:
            if g.name == name:
                return g
        raise KeyError(name)

    def prescribed(self, t, rest_positions):
        """Full-length dof vector of prescribed displacements (zero off the constrained set)."""
        out = np.zeros(rest_positions.size)
        for g, dofs in zip(self.groups, self._group_dofs):
            d = g.displacement(t, rest_positions)
            out[dofs.ravel()] = d[:, list(g.components)].ravel()
        return out

    def free_mask(self, n_dofs):
        mask = np.ones(n_dofs, dtype=bool)
        mask[self.dofs] = False
        return mask


@dataclass
class Probe:
    """What to log as load and displacement.

    ``kind="reaction"``: load is the support reaction summed over ``group``
    and projected on ``direction``; displacement is the mean displacement of
    the group's nodes along ``direction``. ``kind="collider"``: load is the
    contact force on the body summed over the named colliders (one name or
    several), displacement the travel of the first, both along ``direction``.
    """

    kind: str
    target: object
    direction: tuple = (1.0, 0.0, 0.0)

    def __post_init__(self):
        if self.kind not in ("reaction", "collider"):
            raise ValueError(f"unknown probe kind {self.kind!r}")
        if self.kind == "reaction" and not isinstance(self.target, str):
            raise ValueError("a reaction probe targets a single boundary group")
        d = np.asarray(self.direction, dtype=np.float64)
        self.direction = d / np.linalg.norm(d)

    @property
    def targets(self):
        return (self.target,) if isinstance(self.target, str) else tuple(self.target)


@dataclass
class StepResult:
    iterations: int = 0
    residual: float = 0.0
    newly_broken: np.ndarray = field(default_factory=lambda: np.empty(0, dtype=np.int64))
    reaction: np.ndarray = None        # (3n,) support reaction forces
    contact: ContactResult = None
    increments: int = 1
    linear_iterations: int = 0
    collider_loads: list = None        # force each collider delivered over the step


# --- linear solves -----------------------------------------------------------

def _direct_solve(matrix, rhs):
    try:
        x = spla.spsolve(matrix.to_scipy().tocsc(), rhs)
    except RuntimeError:
        return None
    if not np.all(np.isfinite(x)):
        return None
    return x


def _floor_diagonal(matrix, rel=1e-8):
    """Give rows without stiffness (e.g. nodes of fully degraded tets) a small pivot."""
    diag = matrix.diagonal()
    top = np.abs(diag).max() if diag.size else 0.0
    if top == 0.0:
        matrix.add_diagonal(np.ones_like(diag))
        return top
    weak = np.abs(diag) < 1e-10 * top
    if np.any(weak):
        matrix.add_diagonal(np.where(weak, rel * top, 0.0))
    return top


# --- quasi-static -------------------------------------------------------------

class _Equilibrium:
    """Energy, gradient and Hessian of the static problem with frozen damage."""

    def __init__(self, mesh, params, assembler, chi, colliders, t, f_ext):
        self.mesh, self.params, self.assembler = mesh, params, assembler
        self.chi, self.colliders, self.t, self.f_ext = chi, colliders, t, f_ext

    def energy(self, u):
        e = total_energy(self.mesh, u, self.params, self.chi) - self.f_ext @ u
        if self.colliders:
            e += contact_energy(self.mesh.rest_positions + u.reshape(-1, 3), self.colliders, self.t)
        return e

    def contact(self, u):
        if not self.colliders:
            return None
        x = self.mesh.rest_positions + u.reshape(-1, 3)
        zero_v = np.zeros_like(x)
        return detect_and_respond(x, zero_v, np.ones(x.shape[0]), self.colliders, self.t, 1.0)

    def gradient(self, u):
        f = assemble_forces(self.mesh, u, self.params, self.chi) + self.f_ext
        c = self.contact(u)
        if c is not None:
            f = f + c.forces.ravel()
        return -f

    def hessian(self, u):
        H = self.assembler.stiffness(u, self.params, self.chi)
        c = self.contact(u)
        if c is not None and c.active:
            self.assembler.add_node_blocks(H, c.nodes, c.blocks)
        return H


def _newton(problem, u, constrained, tol, config):
    """Minimise the static energy over the free dofs starting from ``u``.

    Returns ``(u, iterations, residual, converged)``.
    """
    u = u.copy()
    g = problem.gradient(u)
    g[constrained] = 0.0
    res = float(np.linalg.norm(g))
    energy = problem.energy(u)
    for it in range(1, config.newton_max_iters + 1):
        if res <= tol:
            return u, it - 1, res, True
        H = problem.hessian(u)
        H.apply_dirichlet(constrained)
        top = _floor_diagonal(H)
        step = None
        shift = 0.0
        for _ in range(6):
            trial = H.copy().add_diagonal(shift) if shift else H
            x = _direct_solve(trial, -g)
            if x is not None and g @ x < 0:
                step = x
                break
            shift = 1e-8 * top if shift == 0.0 else shift * 100.0
        if step is None:
            return u, it, res, False
        slope = g @ step
        alpha = 1.0
        accepted = False
        for _ in range(config.line_search_max_halvings):
            cand = u + alpha * step
            e_new = problem.energy(cand)
            if np.isfinite(e_new) and e_new <= energy + config.line_search_c * alpha * slope:
                accepted = True
                break
            alpha *= config.line_search_factor
        if not accepted:
            # near the solution energy differences drown in round-off; fall back to the residual
            cand = u + step
            g_c = problem.gradient(cand)
            g_c[constrained] = 0.0
            if np.linalg.norm(g_c) < res:
                accepted = True
                e_new = problem.energy(cand)
        if not accepted:
            return u, it, res, False
        u = cand
        energy = e_new
        g = problem.gradient(u)
        g[constrained] = 0.0
        res = float(np.linalg.norm(g))
        if not np.isfinite(res):
            return u, it, res, False
    return u, config.newton_max_iters, res, res <= tol


def _predict(problem, u, du_bc, constrained):
    """Linearised response of the free dofs to a boundary increment."""
    if not np.any(du_bc):
        return u.copy()
    H = problem.hessian(u)
    rhs = -(H @ du_bc)
    H.apply_dirichlet(constrained)
    _floor_diagonal(H)
    rhs[constrained] = du_bc[constrained]
    x = _direct_solve(H, rhs)
    if x is None:
        x = du_bc
    return u + x


def quasi_static_step(mesh: TetMesh, state: SimState, params, bc: BoundaryCondition, config: SolverConfig,
                      t_new: float, assembler: SystemAssembler = None, fracture: FractureModel = None,
                      colliders=(), external_forces=None):
    """Move the load to time ``t_new`` and re-establish static equilibrium.

    The boundary increment is split in halves on Newton failure, at most
    ``config.max_increment_halvings`` times in a row. Damage is kept frozen
    during the solve; afterwards a damage pass runs on the converged state,
    followed by up to ``config.damage_iterations`` re-equilibrations at the
    same load whenever new edges broke. Mutates and returns ``state``.
    """
    assembler = assembler or SystemAssembler(mesh)
    tol = config.resolved_newton_tol(mesh, params)
    constrained = bc.dofs
    f_ext = np.zeros(mesh.n_dofs) if external_forces is None else np.asarray(external_forces, dtype=float).ravel()
    u = state.displacements.ravel().copy()
    target = bc.prescribed(t_new, mesh.rest_positions)
    start_bc = u[constrained].copy()
    problem = _Equilibrium(mesh, params, assembler, state.element_chi.copy(), list(colliders), t_new, f_ext)

    done, frac, halvings, increments, iters, res = 0.0, 1.0, 0, 0, 0, 0.0
    while done < 1.0:
        frac = min(frac, 1.0 - done)
        goal = done + frac
        du_bc = np.zeros(mesh.n_dofs)
        du_bc[constrained] = start_bc + goal * (target[constrained] - start_bc) - u[constrained]
        trial = _predict(problem, u, du_bc, constrained)
        trial[constrained] = start_bc + goal * (target[constrained] - start_bc)
        trial, k, res, ok = _newton(problem, trial, constrained, tol, config)
        iters += k
        if ok:
            u, done, halvings = trial, goal, 0
            increments += 1
            frac *= 2.0
            continue
        halvings += 1
        if halvings > config.max_increment_halvings:
            raise ConvergenceError(
                "quasi-static Newton failed to converge",
                {"time": t_new, "load_fraction": done, "residual": res, "tol": tol, "halvings": halvings - 1},
            )
        frac *= 0.5

    state.displacements = u.reshape(-1, 3)
    state.velocities = np.zeros_like(state.displacements)
    state.time = t_new
    newly_all = []
    if fracture is not None:
        newly = fracture.damage_pass(state).newly_broken
        newly_all.append(newly)
        for _ in range(config.damage_iterations):
            if newly.size == 0:
                break
            problem.chi = state.element_chi.copy()
            u, k, res, ok = _newton(problem, u, constrained, tol, config)
            iters += k
            if not ok:
                raise ConvergenceError("re-equilibration after fracture failed", {"time": t_new, "residual": res})
            state.displacements = u.reshape(-1, 3)
            newly = fracture.damage_pass(state).newly_broken
            newly_all.append(newly)
    newly = np.unique(np.concatenate(newly_all)) if newly_all else np.empty(0, dtype=np.int64)
    reaction = np.zeros(mesh.n_dofs)
    f_int = assemble_forces(mesh, u, params, problem.chi)
    reaction[constrained] = -f_int[constrained]
    contact = problem.contact(u)
    loads = None if contact is None else contact.collider_forces
    return state, StepResult(iters, res, newly, reaction, contact, increments, collider_loads=loads)


# --- dynamics -----------------------------------------------------------------

def _solve_dynamic(A, rhs, x0, config):
    if config.linear_solver == "direct":
        x = _direct_solve(A, rhs)
        if x is None:
            raise ConvergenceError("direct solve of the dynamic system failed")
        return x, 0
    result = cg_solve(A, rhs, x0=x0, tol=config.cg_tol, max_iters=config.cg_max_iters)
    if result.converged:
        return result.x, result.iterations
    if not result.indefinite:
        retry = cg_solve(A, rhs, x0=result.x, tol=config.cg_tol,
                         max_iters=4 * (config.cg_max_iters or max(10 * rhs.size, 100)))
        if retry.converged:
            return retry.x, result.iterations + retry.iterations
        result = retry
    x = _direct_solve(A, rhs)
    if x is not None:
        logger.info("CG failed (indefinite=%s); used a direct solve", result.indefinite)
        return x, result.iterations
    diag = A.diagonal()
    raise ConvergenceError(
        "dynamic linear solve failed",
        {"cg_residual": result.residual, "indefinite": result.indefinite,
         "min_diag": float(diag.min()), "max_diag": float(diag.max())},
    )


def dynamic_step(mesh: TetMesh, state: SimState, params, bc: BoundaryCondition, config: SolverConfig,
                 external_forces=None, mass=None, assembler: SystemAssembler = None, contact: ContactResult = None):
    """Advance one implicit backward-Euler step with damage frozen.

    Solves ``(M + dt B + dt^2 (K + Kc)) dv = dt (f_el + f_ext - B v - dt (K + Kc) v)``
    where ``K`` is the current degraded stiffness, ``Kc`` the contact penalty
    stiffness and ``B = alpha M + beta K``. Constrained nodes are moved to
    their scheduled positions exactly. Mutates and returns ``state``.
    """
    assembler = assembler or SystemAssembler(mesh)
    mass = lumped_mass(mesh, params) if mass is None else mass
    dt = config.dt
    t1 = state.time + dt
    m_dof = np.repeat(mass, 3)
    u = state.displacements.ravel()
    v = state.velocities.ravel()
    chi = state.element_chi
    f_ext = np.zeros(mesh.n_dofs) if external_forces is None else np.asarray(external_forces, dtype=float).ravel().copy()
    f_ext += m_dof * np.tile(np.asarray(config.gravity, dtype=float), mesh.n_nodes)
    if contact is not None:
        f_ext += contact.forces.ravel()
    constrained = bc.dofs
    u_bc = bc.prescribed(t1, mesh.rest_positions)
    alpha, beta = params.damp_mass_coeff, params.damp_stiff_coeff

    def system(u_now):
        K = assembler.stiffness(u_now, params, chi)
        if contact is not None and contact.active:
            Kc = assembler.new_matrix()
            assembler.add_node_blocks(Kc, contact.nodes, contact.blocks)
        else:
            Kc = None
        return K, Kc

    K, Kc = system(u)
    f_el = assemble_forces(mesh, u, params, chi)
    stiff = K.copy()
    if Kc is not None:
        stiff.add_scaled(Kc)
    A = K.copy().scale(dt * beta + dt * dt)
    if Kc is not None:
        A.add_scaled(Kc, dt * dt)
    A.add_diagonal((1.0 + dt * alpha) * m_dof)
    rhs = dt * (f_el + f_ext - alpha * m_dof * v - beta * (K @ v) - dt * (stiff @ v))

    dv_c = np.zeros(mesh.n_dofs)
    dv_c[constrained] = (u_bc[constrained] - u[constrained]) / dt - v[constrained]
    if constrained.size:
        rhs -= A @ dv_c
        A.apply_dirichlet(constrained)
        rhs[constrained] = dv_c[constrained]
    # uniform gravity lies in the kernel of K, so its response is known exactly;
    # the iterative solve only handles what remains
    base = np.tile(dt * np.asarray(config.gravity, dtype=float) / (1.0 + dt * alpha), mesh.n_nodes)
    base[constrained] = dv_c[constrained]
    rest = rhs - A @ base
    if np.linalg.norm(rest) <= 1e-14 * np.linalg.norm(rhs):
        remainder, lin_iters = np.zeros_like(rhs), 0
    else:
        remainder, lin_iters = _solve_dynamic(A, rest, np.zeros_like(rhs), config)
    dv = base + remainder
    newton_iters = 1

    if config.full_newton:
        tol = config.resolved_newton_tol(mesh, params)
        free = bc.free_mask(mesh.n_dofs)
        for newton_iters in range(2, config.newton_max_iters + 2):
            v1 = v + dv
            u1 = u + dt * v1
            f1 = assemble_forces(mesh, u1, params, chi)
            K1, Kc1 = system(u1)
            f_c1 = f_ext.copy()
            if Kc1 is not None:
                f_c1 -= dt * (Kc1 @ (v1 - v))  # linearised penalty along the step
            r = m_dof * dv - dt * (f1 + f_c1 - alpha * m_dof * v1 - beta * (K1 @ v1))
            r[~free] = 0.0
            if np.linalg.norm(r) <= tol * dt:
                break
            J = K1.copy().scale(dt * beta + dt * dt)
            if Kc1 is not None:
                J.add_scaled(Kc1, dt * dt)
            J.add_diagonal((1.0 + dt * alpha) * m_dof)
            J.apply_dirichlet(constrained)
            delta, k = _solve_dynamic(J, -r, np.zeros_like(r), config)
            lin_iters += k
            dv = dv + delta
        else:
            raise ConvergenceError("full Newton dynamic step did not converge", {"time": t1})

    v1 = v + dv
    u1 = u + dt * v1
    u1[constrained] = u_bc[constrained]
    v1[constrained] = (u_bc[constrained] - u[constrained]) / dt
    state.displacements = u1.reshape(-1, 3)
    state.velocities = v1.reshape(-1, 3)
    state.time = t1
    reaction = np.zeros(mesh.n_dofs)
    if constrained.size:
        # force the supports exert: what the constrained rows needed beyond the elastic force
        reaction[constrained] = (m_dof * dv)[constrained] / dt - (f_el + f_ext)[constrained]
    loads = None if contact is None else contact.forces_after(u1 - u)
    return state, StepResult(newton_iters, 0.0, np.empty(0, dtype=np.int64), reaction, contact, 1, lin_iters,
                             collider_loads=loads)


# --- run loop -----------------------------------------------------------------

@dataclass
class RunResult:
    state: SimState
    metrics: list
    frames: list
    pattern_hashes: list
    dof_counts: list

    @property
    def pattern_constant(self):
        return len(set(self.pattern_hashes)) <= 1 and len(set(self.dof_counts)) <= 1


class Simulation:
    """Drives one scenario: fracture check, viz update, contacts, solve, output."""

    def __init__(self, mesh: TetMesh, params, bc: BoundaryCondition, config: SolverConfig, mode="dynamic",
                 colliders=(), probes=(), viz=None, frame_every=0, out_dir=None, damage_log=None,
                 kernel="hat", initial_velocity=None):
        if mode not in ("quasi_static", "dynamic"):
            raise ValueError(f"mode must be 'quasi_static' or 'dynamic', got {mode!r}")
        self.mesh, self.params, self.bc, self.config, self.mode = mesh, params, bc, config, mode
        self.colliders = list(colliders)
        self.probes = list(probes)
        self.viz = viz
        self.frame_every = int(frame_every)
        self.out_dir = out_dir
        self.assembler = SystemAssembler(mesh)
        self.mass = lumped_mass(mesh, params)
        self.fracture = FractureModel(mesh, params, kernel=kernel, log=damage_log)
        self.state = SimState.initial(mesh)
        if initial_velocity is not None:
            v = np.asarray(initial_velocity, dtype=float)
            self.state.velocities = np.broadcast_to(v, self.state.velocities.shape).copy()
        self._collider_start = {c.name: c.position(0.0) for c in self.colliders}
        self.frames = []

    def _metrics(self, result: StepResult):
        s = self.state
        strain = total_energy(self.mesh, s.displacements, self.params, s.element_chi)
        kinetic = 0.5 * float(np.sum(self.mass[:, None] * s.velocities ** 2))
        load = disp = 0.0
        if self.probes:
            probe = self.probes[0]
            if probe.kind == "reaction":
                nodes = self.bc.group(probe.target).nodes
                if result is not None and result.reaction is not None:
                    load = float(result.reaction.reshape(-1, 3)[nodes].sum(axis=0) @ probe.direction)
                disp = float(s.displacements[nodes].mean(axis=0) @ probe.direction)
            else:
                names = [c.name for c in self.colliders]
                idx = [names.index(t) for t in probe.targets]
                if result is not None and result.collider_loads is not None:
                    load = float(sum(result.collider_loads[i] for i in idx) @ probe.direction)
                first = probe.targets[0]
                travel = self.colliders[idx[0]].position(s.time) - self._collider_start[first]
                disp = float(travel @ probe.direction)
        return {
            "step": s.step, "time": s.time, "strain_energy": strain, "kinetic_energy": kinetic,
            "broken_edges": s.broken_count, "load": load, "displacement": disp,
        }

    def _emit_frame(self):
        if self.viz is None or self.out_dir is None:
            return
        self.viz.advect(self.mesh, self.state)
        path = self.out_dir / f"frame_{self.state.step:06d}.obj"
        self.viz.export_frame(path)
        self.frames.append(path)

    def step(self):
        s = self.state
        if self.mode == "quasi_static":
            t1 = s.time + self.config.dt
            _, result = quasi_static_step(self.mesh, s, self.params, self.bc, self.config, t1,
                                          self.assembler, self.fracture, self.colliders)
            newly = result.newly_broken
        else:
            newly = self.fracture.damage_pass(s).newly_broken
            contact = None
            if self.colliders:
                contact = detect_and_respond(s.positions(self.mesh), s.velocities, self.mass, self.colliders,
                                             s.time + self.config.dt, self.config.dt, self.config.contact_substeps)
            _, result = dynamic_step(self.mesh, s, self.params, self.bc, self.config, None, self.mass,
                                     self.assembler, contact)
            result.newly_broken = newly
        if self.viz is not None and newly.size:
            self.viz.apply_splits(newly, self.mesh, s)
        s.step += 1
        return result

    def run(self, duration=None, n_steps=None, on_step=None):
        """Advance until ``duration`` seconds or ``n_steps`` steps have been taken."""
        if n_steps is None:
            n_steps = int(round((duration or 0.0) / self.config.dt))
        metrics = [self._metrics(None)]
        hashes = [self.assembler.template.structure_hash]
        dofs = [self.assembler.template.n]
        self._emit_frame()
        for _ in range(n_steps):
            result = self.step()
            metrics.append(self._metrics(result))
            hashes.append(self.assembler.template.structure_hash)
            dofs.append(self.assembler.template.n)
            if self.frame_every and self.state.step % self.frame_every == 0:
                self._emit_frame()
            if on_step is not None:
                on_step(self, result)
        return RunResult(self.state, metrics, list(self.frames), hashes, dofs)


def write_metrics(path, metrics):
    """Write metric rows as CSV with round-trip float formatting."""
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(METRIC_COLUMNS)
        for row in metrics:
            w.writerow([row["step"], repr(float(row["time"]))] +
                       [repr(float(row[k])) for k in ("strain_energy", "kinetic_energy")] +
                       [row["broken_edges"], repr(float(row["load"])), repr(float(row["displacement"]))])
