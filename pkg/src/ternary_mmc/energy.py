"""Discrete Flory-Huggins-deGennes energy for the ternary MMC system.

With ``phi3 = 1 - phi1 - phi2`` the energy density is

    S = (phi1/M0) ln(alpha phi1/M0) + (phi2/N0) ln(beta phi2/N0) + phi3 ln phi3
    H = chi12 phi1 phi2 + chi13 phi1 phi3 + chi23 phi2 phi3

plus the singular gradient terms ``eps_i^2 |grad phi_i|^2 / (36 phi_i)``,
discretized on faces as ``a_x(kappa(A_x u) (D_x u)^2)``.  The splitting is
``G_h = G_c - G_e`` with ``G_c = <S,1> + surface terms`` and ``G_e = -<H,1>``.

Variational derivatives are taken with respect to the grid inner product
``<u, v> = h^2 sum u v``, so ``d/ds G(phi + s psi) = <dG/dphi, psi>``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import NamedTuple

import numpy as np

from .grid import Grid


class GibbsDomainError(ValueError):
    """A phase pair left the open Gibbs triangle at some grid point."""

    def __init__(self, message, index=None, constraint=None, value=None):
        super().__init__(message)
        self.index = index
        self.constraint = constraint
        self.value = value


class PhasePair(NamedTuple):
    """Volume fractions ``(phi1, phi2)``; ``phi3`` is always derived."""

    phi1: np.ndarray
    phi2: np.ndarray

    # numpy scalars must defer to __rmul__ instead of broadcasting the tuple
    __array_ufunc__ = None

    @property
    def phi3(self) -> np.ndarray:
        return 1.0 - self.phi1 - self.phi2

    def __add__(self, other):
        return PhasePair(self.phi1 + other.phi1, self.phi2 + other.phi2)

    def __sub__(self, other):
        return PhasePair(self.phi1 - other.phi1, self.phi2 - other.phi2)

    def __mul__(self, s):
        return PhasePair(s * self.phi1, s * self.phi2)

    __rmul__ = __mul__

    def __neg__(self):
        return PhasePair(-self.phi1, -self.phi2)

    def copy(self) -> "PhasePair":
        return PhasePair(self.phi1.copy(), self.phi2.copy())

    def means(self) -> tuple[float, float]:
        return float(np.mean(self.phi1)), float(np.mean(self.phi2))


def derived_alpha_beta(m0: float, n0: float) -> tuple[float, float]:
    """Geometric constants ``alpha``, ``beta`` of the ideal-solution term.

    ``n0 = 0`` is accepted here as the limiting case of the formula; a model
    needs ``n0 > 0`` (see :class:`ModelParams`).
    """
    if not (m0 > 0 and n0 >= 0):
        raise ValueError(f"need M0 > 0 and N0 >= 0, got M0={m0!r}, N0={n0!r}")
    r = math.sqrt(m0 / math.pi)
    return math.pi * (r + 0.5 * n0) ** 2, 2.0 * r + n0


@dataclass(frozen=True)
class ModelParams:
    """Physical constants; defaults are the experiment values used throughout."""

    m0: float = 0.16
    n0: float = 5.12
    chi12: float = 4.0
    chi13: float = 10.0
    chi23: float = 1.6
    eps1: float = 1.0
    eps2: float = 1.0
    eps3: float = 1.0
    mob1: float = 1.0
    mob2: float = 1.0
    alpha: float = field(init=False)
    beta: float = field(init=False)

    def __post_init__(self):
        for name in ("m0", "n0", "chi12", "chi13", "chi23", "eps1", "eps2",
                     "eps3", "mob1", "mob2"):
            value = getattr(self, name)
            if not (isinstance(value, (int, float)) and math.isfinite(value) and value > 0):
                raise ValueError(f"model parameter {name} must be a positive real, got {value!r}")
        if self.concavity_margin <= 0:
            raise ValueError(
                "mixing entropy is not concave: 4*chi13*chi23 - (chi12-chi13-chi23)^2 = "
                f"{self.concavity_margin:g} <= 0")
        alpha, beta = derived_alpha_beta(self.m0, self.n0)
        object.__setattr__(self, "alpha", alpha)
        object.__setattr__(self, "beta", beta)

    @property
    def chi_cross(self) -> float:
        """``chi12 - chi13 - chi23``, the mixed second derivative of H."""
        return self.chi12 - self.chi13 - self.chi23

    @property
    def concavity_margin(self) -> float:
        return 4.0 * self.chi13 * self.chi23 - self.chi_cross**2

    def mobility(self, which: int) -> float:
        return _pick(which, self.mob1, self.mob2)


def _pick(which, first, second):
    if which == 1:
        return first
    if which == 2:
        return second
    raise ValueError(f"phase index must be 1 or 2, got {which!r}")


def kappa(phi):
    return 1.0 / (36.0 * phi)


def kappa_prime(phi):
    return -1.0 / (36.0 * phi**2)


def check_admissible(p: PhasePair) -> None:
    """Raise :class:`GibbsDomainError` unless every point is strictly inside the triangle."""
    for name, label, arr in (("phi1 > 0", "phi1", p.phi1), ("phi2 > 0", "phi2", p.phi2),
                             ("phi1 + phi2 < 1", "1 - phi1 - phi2", p.phi3)):
        bad = ~(arr > 0)
        if bad.any():
            i, j = np.argwhere(bad)[0]
            value = float(arr[i, j])
            raise GibbsDomainError(
                f"Gibbs triangle violated at grid index {(int(i), int(j))}: "
                f"constraint {name} fails ({label} = {value!r})",
                index=(int(i), int(j)), constraint=name, value=value)


def is_admissible(p: PhasePair) -> bool:
    return bool(np.all(p.phi1 > 0) and np.all(p.phi2 > 0) and np.all(p.phi3 > 0))


def gibbs_margin(p: PhasePair) -> float:
    return float(min(p.phi1.min(), p.phi2.min(), p.phi3.min()))


# -- bulk densities -----------------------------------------------------------

def ideal_density(p: PhasePair, params: ModelParams) -> np.ndarray:
    """Pointwise ``S``; the singular logarithm is kept apart from the constants."""
    phi1, phi2, phi3 = p.phi1, p.phi2, p.phi3
    return (phi1 / params.m0 * (np.log(phi1) + math.log(params.alpha / params.m0))
            + phi2 / params.n0 * (np.log(phi2) + math.log(params.beta / params.n0))
            + phi3 * np.log(phi3))


def mixing_density(p: PhasePair, params: ModelParams) -> np.ndarray:
    phi1, phi2, phi3 = p.phi1, p.phi2, p.phi3
    return params.chi12 * phi1 * phi2 + params.chi13 * phi1 * phi3 + params.chi23 * phi2 * phi3


def ideal_derivative(p: PhasePair, params: ModelParams, which: int) -> np.ndarray:
    """``dS/dphi_i`` including every additive constant."""
    log3 = np.log(p.phi3)
    if which == 1:
        return (np.log(p.phi1) + math.log(params.alpha / params.m0) + 1.0) / params.m0 - log3 - 1.0
    if which == 2:
        return (np.log(p.phi2) + math.log(params.beta / params.n0) + 1.0) / params.n0 - log3 - 1.0
    raise ValueError(f"phase index must be 1 or 2, got {which!r}")


def mixing_derivative(p: PhasePair, params: ModelParams, which: int) -> np.ndarray:
    """``dH/dphi_i`` (polynomial, defined everywhere)."""
    c = params.chi_cross
    if which == 1:
        return params.chi13 - 2.0 * params.chi13 * p.phi1 + c * p.phi2
    if which == 2:
        return params.chi23 - 2.0 * params.chi23 * p.phi2 + c * p.phi1
    raise ValueError(f"phase index must be 1 or 2, got {which!r}")


def hessian_H_diag(params: ModelParams, which: int) -> float:
    """Constant ``d^2 H / d phi_i^2``."""
    return _pick(which, -2.0 * params.chi13, -2.0 * params.chi23)


# -- singular surface terms ---------------------------------------------------

def _surface_energy(grid: Grid, u: np.ndarray) -> float:
    # <a_x(kappa(A_x u)(D_x u)^2) + a_y(...), 1>
    fx = kappa(grid.avg_x(u)) * grid.diff_x(u) ** 2
    fy = kappa(grid.avg_y(u)) * grid.diff_y(u) ** 2
    return grid.inner(grid.avg_back_x(fx) + grid.avg_back_y(fy), 1.0)


def _surface_derivative(grid: Grid, u: np.ndarray) -> np.ndarray:
    """``a_x(kappa'(A_x u)(D_x u)^2) - 2 d_x(kappa(A_x u) D_x u)`` plus y terms."""
    out = np.zeros_like(u)
    for avg, diff, avg_b, diff_b in ((grid.avg_x, grid.diff_x, grid.avg_back_x, grid.diff_back_x),
                                     (grid.avg_y, grid.diff_y, grid.avg_back_y, grid.diff_back_y)):
        a = avg(u)
        d = diff(u)
        out += avg_b(kappa_prime(a) * d**2) - 2.0 * diff_b(kappa(a) * d)
    return out


def _surface_hessvec(grid: Grid, u: np.ndarray, v: np.ndarray) -> np.ndarray:
    """Exact linearization of :func:`_surface_derivative` at ``u`` in direction ``v``.

    Per face the density is ``g(a, d) = d^2 / (36 a)`` with ``a = A u``,
    ``d = D u``; the Hessian is ``A^T(g_aa da + g_ad dd) + D^T(g_ad da + g_dd dd)``.
    """
    out = np.zeros_like(u)
    for avg, diff, avg_b, diff_b in ((grid.avg_x, grid.diff_x, grid.avg_back_x, grid.diff_back_x),
                                     (grid.avg_y, grid.diff_y, grid.avg_back_y, grid.diff_back_y)):
        a = avg(u)
        d = diff(u)
        da = avg(v)
        dd = diff(v)
        inv = 1.0 / (18.0 * a)
        g_dd = inv
        g_ad = -d * inv / a
        g_aa = d * d * inv / (a * a)
        out += avg_b(g_aa * da + g_ad * dd) - diff_b(g_ad * da + g_dd * dd)
    return out


# -- energies -----------------------------------------------------------------

def _surface_total(grid: Grid, p: PhasePair, params: ModelParams) -> float:
    return (params.eps1**2 * _surface_energy(grid, p.phi1)
            + params.eps2**2 * _surface_energy(grid, p.phi2)
            + params.eps3**2 * _surface_energy(grid, p.phi3))


def energy_convex(grid: Grid, p: PhasePair, params: ModelParams) -> float:
    """``G_c = <S, 1>`` plus the three singular gradient sums."""
    check_admissible(p)
    return grid.inner(ideal_density(p, params), 1.0) + _surface_total(grid, p, params)


def energy_concave(grid: Grid, p: PhasePair, params: ModelParams) -> float:
    """``G_e = -<H, 1>`` (convex, because H is concave under the chi condition)."""
    return -grid.inner(mixing_density(p, params), 1.0)


def energy_total(grid: Grid, p: PhasePair, params: ModelParams) -> float:
    check_admissible(p)
    return (grid.inner(ideal_density(p, params) + mixing_density(p, params), 1.0)
            + _surface_total(grid, p, params))


def var_deriv_convex(grid: Grid, p: PhasePair, params: ModelParams, which: int) -> np.ndarray:
    """``delta G_c / delta phi_i``: ``Q1`` through ``Q9`` summed."""
    check_admissible(p)
    eps_i = _pick(which, params.eps1, params.eps2)
    u = p.phi1 if which == 1 else p.phi2
    return (ideal_derivative(p, params, which)
            + eps_i**2 * _surface_derivative(grid, u)
            - params.eps3**2 * _surface_derivative(grid, p.phi3))


def var_deriv_convex_pair(grid: Grid, p: PhasePair, params: ModelParams) -> PhasePair:
    """Both convex derivatives, sharing the phase-3 surface term."""
    check_admissible(p)
    s3 = params.eps3**2 * _surface_derivative(grid, p.phi3)
    return PhasePair(
        ideal_derivative(p, params, 1) + params.eps1**2 * _surface_derivative(grid, p.phi1) - s3,
        ideal_derivative(p, params, 2) + params.eps2**2 * _surface_derivative(grid, p.phi2) - s3)


def var_deriv_concave(grid: Grid, p: PhasePair, params: ModelParams, which: int) -> np.ndarray:
    """``delta G_e / delta phi_i = -dH/dphi_i``."""
    return -mixing_derivative(p, params, which)


def ideal_hessian(p: PhasePair, params: ModelParams) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Pointwise ``(S_11, S_12, S_22)``."""
    inv3 = 1.0 / p.phi3
    return 1.0 / (params.m0 * p.phi1) + inv3, inv3, 1.0 / (params.n0 * p.phi2) + inv3


def hessvec_convex(grid: Grid, p: PhasePair, params: ModelParams, v: PhasePair) -> PhasePair:
    """Second variation of ``G_c`` at ``p`` applied to ``v``."""
    s11, s12, s22 = ideal_hessian(p, params)
    v3 = -(v.phi1 + v.phi2)
    w3 = params.eps3**2 * _surface_hessvec(grid, p.phi3, v3)
    return PhasePair(
        s11 * v.phi1 + s12 * v.phi2 + params.eps1**2 * _surface_hessvec(grid, p.phi1, v.phi1) - w3,
        s12 * v.phi1 + s22 * v.phi2 + params.eps2**2 * _surface_hessvec(grid, p.phi2, v.phi2) - w3)
