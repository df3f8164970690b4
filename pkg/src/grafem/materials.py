"""Hyper-elastic energy densities, stresses and stress differentials.

Every function takes deformation gradients with trailing shape (3, 3) and
broadcasts over any leading batch dimensions, so a whole mesh is evaluated
in one call.
"""

from dataclasses import dataclass, field

import numpy as np

from ._validation import as_matrices, check_nonnegative, check_positive

__all__ = [
    "ENERGY_MODELS",
    "MaterialParams",
    "lame_parameters",
    "energy_density",
    "pk1",
    "pk1_differential",
    "cauchy_stress",
    "cartesian_stress_sixvector",
    "SIXVECTOR_INDEX",
]

ENERGY_MODELS = ("stable_neo_hookean", "stvk")

#: (row, col) of the six stress components, ordered xx, yy, zz, xy, xz, yz.
SIXVECTOR_INDEX = ((0, 0), (1, 1), (2, 2), (0, 1), (0, 2), (1, 2))


def lame_parameters(youngs, poisson):
    """Return ``(mu, lam)`` for Young's modulus and Poisson's ratio."""
    mu = youngs / (2.0 * (1.0 + poisson))
    lam = youngs * poisson / ((1.0 + poisson) * (1.0 - 2.0 * poisson))
    return mu, lam


@dataclass(frozen=True)
class MaterialParams:
    """Elastic, fracture and damping constants of one material.

    ``mu`` and ``lam`` default to the Lamé parameters of (``youngs``,
    ``poisson``); passing them explicitly overrides that mapping.
    """

    youngs: float
    poisson: float
    density: float = 1000.0
    sigma_thres: float = np.inf
    r_d: float = 0.0
    damp_mass_coeff: float = 0.0
    damp_stiff_coeff: float = 0.0
    energy_model: str = "stvk"
    mu: float = field(default=None)
    lam: float = field(default=None)

    def __post_init__(self):
        check_positive(self.youngs, "youngs")
        if not (0.0 <= self.poisson < 0.5):
            raise ValueError(f"poisson must lie in [0, 0.5), got {self.poisson!r}")
        check_positive(self.density, "density")
        if not self.sigma_thres > 0:
            raise ValueError(f"sigma_thres must be positive, got {self.sigma_thres!r}")
        check_nonnegative(self.r_d, "r_d")
        check_nonnegative(self.damp_mass_coeff, "damp_mass_coeff")
        check_nonnegative(self.damp_stiff_coeff, "damp_stiff_coeff")
        if self.energy_model not in ENERGY_MODELS:
            raise ValueError(f"energy_model must be one of {ENERGY_MODELS}, got {self.energy_model!r}")
        mu, lam = lame_parameters(self.youngs, self.poisson)
        if self.mu is None:
            object.__setattr__(self, "mu", mu)
        if self.lam is None:
            object.__setattr__(self, "lam", lam)
        check_positive(self.mu, "mu")
        if self.energy_model == "stable_neo_hookean":
            check_positive(self.lam, "lam")

    @property
    def neo_alpha(self):
        """Rest-stabilising volume offset of the stable Neo-Hookean energy."""
        return 1.0 + self.mu / self.lam - self.mu / (4.0 * self.lam)

    def replace(self, **changes):
        values = {k: getattr(self, k) for k in self.__dataclass_fields__}
        if "youngs" in changes or "poisson" in changes:
            values["mu"] = values["lam"] = None
        values.update(changes)
        return MaterialParams(**values)


def _transpose(A):
    return np.swapaxes(A, -1, -2)


def _trace(A):
    return np.einsum("...ii->...", A)


def _ddot(A, B):
    return np.einsum("...ij,...ij->...", A, B)


def _cofactor(F):
    """d det(F) / dF, valid for singular and inverted F."""
    f0, f1, f2 = F[..., :, 0], F[..., :, 1], F[..., :, 2]
    return np.stack([np.cross(f1, f2), np.cross(f2, f0), np.cross(f0, f1)], axis=-1)


def _cofactor_differential(F, dF):
    f0, f1, f2 = F[..., :, 0], F[..., :, 1], F[..., :, 2]
    d0, d1, d2 = dF[..., :, 0], dF[..., :, 1], dF[..., :, 2]
    return np.stack([
        np.cross(d1, f2) + np.cross(f1, d2),
        np.cross(d2, f0) + np.cross(f2, d0),
        np.cross(d0, f1) + np.cross(f0, d1),
    ], axis=-1)


# --- Saint Venant-Kirchhoff -------------------------------------------------

def _green_strain(F):
    return 0.5 * (_transpose(F) @ F - np.eye(3))


def _stvk_energy(F, p):
    E = _green_strain(F)
    return 0.5 * p.lam * _trace(E) ** 2 + p.mu * _ddot(E, E)


def _stvk_S(E, p):
    return p.lam * _trace(E)[..., None, None] * np.eye(3) + 2.0 * p.mu * E


def _stvk_pk1(F, p):
    return F @ _stvk_S(_green_strain(F), p)


def _stvk_dpk1(F, dF, p):
    S = _stvk_S(_green_strain(F), p)
    FtdF = _transpose(F) @ dF
    dE = 0.5 * (FtdF + _transpose(FtdF))
    return dF @ S + F @ _stvk_S(dE, p)


# --- stable Neo-Hookean -----------------------------------------------------

def _neo_energy(F, p):
    Ic = _ddot(F, F)
    J = np.linalg.det(F)
    return 0.5 * p.mu * (Ic - 3.0) + 0.5 * p.lam * (J - p.neo_alpha) ** 2 - 0.5 * p.mu * np.log(Ic + 1.0)


def _neo_pk1(F, p):
    Ic = _ddot(F, F)
    J = np.linalg.det(F)
    a = p.mu * (1.0 - 1.0 / (Ic + 1.0))
    b = p.lam * (J - p.neo_alpha)
    return a[..., None, None] * F + b[..., None, None] * _cofactor(F)


def _neo_dpk1(F, dF, p):
    Ic = _ddot(F, F)
    J = np.linalg.det(F)
    cof = _cofactor(F)
    a = p.mu * (1.0 - 1.0 / (Ic + 1.0))
    da = p.mu * 2.0 * _ddot(F, dF) / (Ic + 1.0) ** 2
    b = p.lam * (J - p.neo_alpha)
    db = p.lam * _ddot(cof, dF)
    return (
        a[..., None, None] * dF
        + da[..., None, None] * F
        + db[..., None, None] * cof
        + b[..., None, None] * _cofactor_differential(F, dF)
    )


_MODELS = {
    "stvk": (_stvk_energy, _stvk_pk1, _stvk_dpk1),
    "stable_neo_hookean": (_neo_energy, _neo_pk1, _neo_dpk1),
}


def energy_density(F, params):
    """Strain energy density of ``params.energy_model`` in J/m^3.

    StVK is ``lam/2 tr(E)^2 + mu E:E``. The stable Neo-Hookean model is
    ``mu/2 (I_C - 3) + lam/2 (J - alpha)^2 - mu/2 log(I_C + 1)``, which is
    not zero at F = I but is stationary there.
    """
    F = as_matrices(F)
    return _MODELS[params.energy_model][0](F, params)


def pk1(F, params):
    """First Piola-Kirchhoff stress dPsi/dF, same shape as ``F``."""
    F = as_matrices(F)
    return _MODELS[params.energy_model][1](F, params)


def pk1_differential(F, dF, params):
    """Directional derivative of :func:`pk1` at ``F`` along ``dF``.

    ``F`` and ``dF`` broadcast against each other, so a single ``F`` can be
    paired with a stack of directions.
    """
    F = as_matrices(F)
    dF = as_matrices(dF, "dF")
    return _MODELS[params.energy_model][2](F, dF, params)


def cauchy_stress(F, params):
    """Cauchy stress ``P F^T / J`` and a mask of inverted elements.

    Where ``det F <= 0`` the Cauchy conversion is meaningless; the symmetric
    part of P is returned instead and the entry is flagged in the mask.
    """
    F = as_matrices(F)
    P = pk1(F, params)
    J = np.linalg.det(F)
    inverted = J <= 0.0
    safe_J = np.where(inverted, 1.0, J)
    sigma = (P @ _transpose(F)) / safe_J[..., None, None]
    sigma = 0.5 * (sigma + _transpose(sigma))
    if np.any(inverted):
        sym_P = 0.5 * (P + _transpose(P))
        sigma = np.where(inverted[..., None, None], sym_P, sigma)
    return sigma, inverted


def cartesian_stress_sixvector(F, params):
    """Pack the stress of each F as (xx, yy, zz, xy, xz, yz).

    Returns ``(six, inverted)`` where ``six`` has shape ``F.shape[:-2] + (6,)``.
    """
    sigma, inverted = cauchy_stress(F, params)
    rows, cols = zip(*SIXVECTOR_INDEX)
    return sigma[..., rows, cols], inverted
