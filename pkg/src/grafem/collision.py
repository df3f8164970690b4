"""Discrete vertex collisions against analytic spheres and half-spaces.

The response mixes a penalty spring along the contact normal, an impulse
that removes approaching normal velocity, and Coulomb-clamped tangential
damping. Every mesh vertex is tested, whether or not it belongs to a
fractured element. There is no self-collision.
"""

import logging
from dataclasses import dataclass, field

import numpy as np

from ._validation import as_vector3, check_nonnegative, check_positive

__all__ = ["Collider", "ContactResult", "detect_and_respond", "contact_energy"]

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class Collider:
    """A rigid sphere or half-space with a piecewise-linear reference-point schedule.

    For a sphere the schedule moves the center; for a half-space it moves a
    point on the boundary plane, with ``normal`` pointing out of the solid
    obstacle. Outside the keyframe range the point holds still.
    """

    kind: str
    times: tuple = (0.0,)
    positions: tuple = ((0.0, 0.0, 0.0),)
    radius: float = 0.0
    normal: tuple = (0.0, 0.0, 1.0)
    stiffness: float = 1e6
    restitution: float = 0.0
    friction: float = 0.0
    name: str = ""

    def __post_init__(self):
        if self.kind not in ("sphere", "halfspace"):
            raise ValueError(f"collider kind must be 'sphere' or 'halfspace', got {self.kind!r}")
        times = np.asarray(self.times, dtype=np.float64).ravel()
        pos = np.asarray(self.positions, dtype=np.float64).reshape(-1, 3)
        if times.size != pos.shape[0] or times.size == 0:
            raise ValueError("collider needs one position per keyframe time")
        if np.any(np.diff(times) <= 0):
            raise ValueError("collider keyframe times must increase strictly")
        object.__setattr__(self, "times", tuple(times))
        object.__setattr__(self, "positions", tuple(map(tuple, pos)))
        if self.kind == "sphere":
            check_positive(self.radius, "radius")
        else:
            n = as_vector3(self.normal, "normal")
            norm = np.linalg.norm(n)
            if not np.isclose(norm, 1.0, rtol=1e-9, atol=0):
                raise ValueError(f"halfspace normal must have unit length, got {norm}")
            object.__setattr__(self, "normal", tuple(n))
        check_positive(self.stiffness, "stiffness")
        if not 0.0 <= self.restitution <= 1.0:
            raise ValueError(f"restitution must lie in [0, 1], got {self.restitution!r}")
        check_nonnegative(self.friction, "friction")

    def position(self, t):
        times = np.asarray(self.times)
        pos = np.asarray(self.positions)
        return np.array([np.interp(t, times, pos[:, c]) for c in range(3)])

    def velocity(self, t):
        times = np.asarray(self.times)
        if times.size < 2 or t < times[0] or t >= times[-1]:
            return np.zeros(3)
        k = int(np.searchsorted(times, t, side="right")) - 1
        pos = np.asarray(self.positions)
        return (pos[k + 1] - pos[k]) / (times[k + 1] - times[k])

    def penetration(self, x, t):
        """Penetration depth (n,) and unit contact normals (n, 3) pointing out of the collider."""
        ref = self.position(t)
        if self.kind == "sphere":
            d = x - ref
            dist = np.linalg.norm(d, axis=1)
            safe = np.where(dist > 0, dist, 1.0)
            normal = d / safe[:, None]
            normal[dist == 0] = (0.0, 0.0, 1.0)
            return self.radius - dist, normal
        n = np.asarray(self.normal)
        depth = -(x - ref) @ n
        return depth, np.broadcast_to(n, x.shape).copy()


@dataclass
class ContactResult:
    forces: np.ndarray                 # (n, 3) total contact force per vertex
    impulse_forces: np.ndarray         # (n, 3) the velocity-impulse part alone
    nodes: np.ndarray                  # vertices in contact with any collider
    blocks: np.ndarray                 # (k, 3, 3) penalty stiffness per entry of ``nodes``
    collider_forces: list = field(default_factory=list)  # force each collider exerts on the body
    max_penetration: float = 0.0
    collider_blocks: list = field(default_factory=list)  # (nodes, blocks, nodal forces) per collider

    @property
    def active(self):
        return self.nodes.size > 0

    def forces_after(self, displacement_increment):
        """Per-collider force once the penalty is linearised over a step's displacement.

        An implicit step applies ``f - Kc du`` rather than the force sampled at
        its start, so this is the load the body actually received. A vertex
        whose linearised force would pull toward the collider contributes zero.
        """
        du = np.asarray(displacement_increment, dtype=np.float64).reshape(-1, 3)
        out = []
        for nodes, blocks, nodal in self.collider_blocks:
            if nodes.size == 0:
                out.append(np.zeros(3))
                continue
            f = nodal - np.einsum("kij,kj->ki", blocks, du[nodes])
            f[np.einsum("ki,ki->k", f, nodal) < 0] = 0.0
            out.append(f.sum(axis=0))
        return out


def _respond_once(collider, x, v, mass, t, dt):
    depth, normal = collider.penetration(x, t)
    hit = np.flatnonzero(depth > 0)
    n_nodes = x.shape[0]
    forces = np.zeros((n_nodes, 3))
    impulse = np.zeros((n_nodes, 3))
    if hit.size == 0:
        return forces, impulse, hit, np.zeros((0, 3, 3)), 0.0
    nrm = normal[hit]
    d = depth[hit]
    m = mass[hit]
    f_pen = collider.stiffness * d
    v_rel = v[hit] - collider.velocity(t)
    vn = np.einsum("ij,ij->i", v_rel, nrm)
    approaching = vn < 0
    f_imp = np.where(approaching, m * (1.0 + collider.restitution) * (-vn) / dt, 0.0)
    f_normal = f_pen + f_imp
    f = f_normal[:, None] * nrm
    if collider.friction > 0:
        vt = v_rel - vn[:, None] * nrm
        speed = np.linalg.norm(vt, axis=1)
        mag = np.minimum(collider.friction * np.abs(f_normal), m * speed / dt)
        safe = np.where(speed > 0, speed, 1.0)
        f -= (mag / safe)[:, None] * vt
    forces[hit] = f
    impulse[hit] = f_imp[:, None] * nrm
    blocks = collider.stiffness * np.einsum("ki,kj->kij", nrm, nrm)
    return forces, impulse, hit, blocks, float(d.max())


def detect_and_respond(positions, velocities, mass, colliders, t, dt, substeps=1):
    """Contact forces on all vertices for colliders evaluated at time ``t``.

    With ``substeps > 1`` the test is repeated at evenly spaced times in
    ``(t - dt, t]`` using positions extrapolated along the current
    velocities, and the forces are averaged. ``mass`` is the per-vertex
    lumped mass used to size impulses.
    """
    x = np.asarray(positions, dtype=np.float64)
    v = np.asarray(velocities, dtype=np.float64)
    mass = np.asarray(mass, dtype=np.float64)
    n_nodes = x.shape[0]
    total = np.zeros((n_nodes, 3))
    total_imp = np.zeros((n_nodes, 3))
    block_sum = np.zeros((n_nodes, 3, 3))
    touched = np.zeros(n_nodes, dtype=bool)
    per_collider = []
    per_blocks = []
    deepest = 0.0
    offsets = (np.arange(substeps) + 1 - substeps) / substeps * dt
    for collider in colliders:
        f_col = np.zeros((n_nodes, 3))
        own = np.zeros((n_nodes, 3, 3))
        own_hit = np.zeros(n_nodes, dtype=bool)
        for off in offsets:
            xs = x + off * v
            f, imp, hit, blocks, pen = _respond_once(collider, xs, v, mass, t + off, dt)
            f_col += f / substeps
            total_imp += imp / substeps
            if hit.size:
                np.add.at(own, hit, blocks / substeps)
                own_hit[hit] = True
            deepest = max(deepest, pen)
            if collider.kind == "sphere" and pen > 0.5 * collider.radius:
                logger.warning("deep penetration %.3g m into sphere %r (radius %.3g m)",
                               pen, collider.name, collider.radius)
        total += f_col
        block_sum += own
        touched |= own_hit
        per_collider.append(f_col.sum(axis=0))
        hit_nodes = np.flatnonzero(own_hit)
        per_blocks.append((hit_nodes, own[hit_nodes], f_col[hit_nodes]))
    nodes = np.flatnonzero(touched)
    return ContactResult(total, total_imp, nodes, block_sum[nodes], per_collider, deepest, per_blocks)


def contact_energy(positions, colliders, t):
    """Penalty energy ``sum k d^2 / 2`` over penetrating vertices."""
    x = np.asarray(positions, dtype=np.float64)
    energy = 0.0
    for collider in colliders:
        depth, _ = collider.penetration(x, t)
        d = depth[depth > 0]
        energy += 0.5 * collider.stiffness * float(d @ d)
    return energy
