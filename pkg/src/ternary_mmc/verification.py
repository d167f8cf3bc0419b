"""Fast randomized property checks run by ``ternary-mmc verify``."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import energy as en
from .energy import ModelParams, PhasePair
from .grid import EdgeField, Grid
from .hinv import inv_laplacian, inv_laplacian_cg
from .scheme import SchemeParams, SchemeState, bdf2_objective


@dataclass
class Check:
    name: str
    passed: bool
    detail: str


def random_admissible(grid: Grid, rng, spread: float = 0.08) -> PhasePair:
    """Random pair well inside the triangle: centers in (0.15, 0.35), perturbations up to ``spread``."""
    c1, c2 = rng.uniform(0.15, 0.35, 2)
    return PhasePair(c1 + spread * rng.uniform(-1, 1, grid.shape),
                     c2 + spread * rng.uniform(-1, 1, grid.shape))


def _mean_zero(rng, shape):
    v = rng.standard_normal(shape)
    return v - v.mean()


def rel(a, b) -> float:
    return abs(a - b) / max(abs(a), abs(b), 1e-300)


def check_summation_by_parts(rng, sizes=(4, 8, 16, 32), tol=1e-12) -> Check:
    worst = 0.0
    for n in sizes:
        g = Grid(n, 64.0)
        psi = rng.standard_normal(g.shape)
        nu = rng.standard_normal(g.shape)
        f = EdgeField(rng.standard_normal(g.shape), rng.standard_normal(g.shape))
        coef = EdgeField(rng.uniform(0.5, 2, g.shape), rng.uniform(0.5, 2, g.shape))
        lhs = g.inner(psi, g.divergence(f))
        rhs = -g.inner_edge(g.gradient(psi), f)
        scale = g.norm2(psi) * np.sqrt(g.inner_edge(f, f)) / g.h
        worst = max(worst, abs(lhs - rhs) / scale)
        gn = g.gradient(nu)
        lhs = g.inner(psi, g.weighted_divergence(coef, gn))
        rhs = -g.inner_edge(g.gradient(psi), EdgeField(coef.x * gn.x, coef.y * gn.y))
        worst = max(worst, rel(lhs, rhs))
    return Check("summation by parts", worst <= tol, f"max relative defect {worst:.2e}")


def check_laplacian(rng, tol=1e-15) -> Check:
    g = Grid(16, 64.0)
    u = rng.standard_normal(g.shape)
    lap = g.laplacian(u)
    comp = g.divergence(g.gradient(u))
    err = np.max(np.abs(lap - comp)) / np.max(np.abs(lap))
    mean = abs(np.mean(lap)) / np.max(np.abs(lap))
    return Check("laplacian = div grad", err <= tol and mean <= 1e-13,
                 f"defect {err:.1e}, mean {mean:.1e}")


def check_single_mode(tol=1e-12) -> Check:
    worst = 0.0
    for n, k in ((16, 1), (32, 3), (64, 5)):
        g = Grid(n, 64.0)
        x, _ = g.centers()
        u = np.cos(2 * np.pi * k * x / g.length)
        lam = 4.0 / g.h**2 * np.sin(np.pi * k * g.h / g.length) ** 2
        worst = max(worst, np.max(np.abs(g.laplacian(u) + lam * u)) / lam)
        worst = max(worst, np.max(np.abs(inv_laplacian(g, u) - u / lam)) * lam)
    return Check("single-mode eigenvalues", worst <= tol, f"max relative defect {worst:.2e}")


def check_hinv_roundtrip(rng, tol=1e-11) -> Check:
    g = Grid(16, 64.0)
    phi = _mean_zero(rng, g.shape)
    psi = inv_laplacian(g, phi)
    err = g.norm2(-g.laplacian(psi) - phi) / g.norm2(phi)
    cg = inv_laplacian_cg(g, phi)
    err_cg = g.norm2(cg - psi) / g.norm2(psi)
    return Check("H^-1 round trip", err <= tol and err_cg <= 1e-9,
                 f"residual {err:.1e}, transform vs CG {err_cg:.1e}")


def concave_difference(grid: Grid, p: PhasePair, d: PhasePair, params: ModelParams,
                       s: float) -> float:
    """Central difference of ``G_e`` along ``d``.

    The density is differenced cell by cell before summing; subtracting two
    rounded totals of size ``|G_e|`` would bury the polynomial's exact
    difference quotient under ``eps |G_e| / s`` of roundoff.
    """
    delta = en.mixing_density(p + s * d, params) - en.mixing_density(p - s * d, params)
    return -grid.h**2 * math.fsum(delta.ravel()) / (2 * s)


def convex_densities(grid: Grid, p: PhasePair, params: ModelParams) -> np.ndarray:
    """Cell and face contributions to ``G_c``, written out from the energy formula.

    Row 0 holds the ideal-solution density per cell, rows 1..6 the surface
    density ``eps^2 (D u)^2 / (36 A u)`` on x and y faces for the three phases;
    ``h^2`` times the grand total is ``G_c``.
    """
    phi1, phi2 = p.phi1, p.phi2
    phi3 = 1.0 - phi1 - phi2
    ideal = (phi1 / params.m0 * np.log(params.alpha * phi1 / params.m0)
             + phi2 / params.n0 * np.log(params.beta * phi2 / params.n0)
             + phi3 * np.log(phi3))
    rows = [ideal]
    for u, eps in ((phi1, params.eps1), (phi2, params.eps2), (phi3, params.eps3)):
        for axis in (0, 1):
            nxt = np.roll(u, -1, axis=axis)
            rows.append(eps**2 * ((nxt - u) / grid.h) ** 2 / (36.0 * 0.5 * (nxt + u)))
    return np.stack(rows)


def convex_difference(grid: Grid, p: PhasePair, d: PhasePair, params: ModelParams,
                      s: float) -> float:
    """Fourth-order central difference of ``G_c`` along ``d``.

    The logarithms have large third derivatives, so the two-point quotient
    carries an ``O(s^2)`` bias that swamps ``1e-6`` whenever the directional
    derivative happens to be small; the ``(s, 2s)`` stencil cancels it.
    Differences are taken per cell and face before summing.
    """
    def dens(t):
        return convex_densities(grid, p + t * d, params)

    delta = 8.0 * (dens(s) - dens(-s)) - (dens(2 * s) - dens(-2 * s))
    return grid.h**2 * math.fsum(delta.ravel()) / (12 * s)


def check_gradients(rng, params: ModelParams, samples=5, tol=1e-6) -> Check:
    worst_c = worst_e = worst_j = 0.0
    s = 1e-5
    for n in (8, 16):
        g = Grid(n, 64.0)
        for _ in range(samples):
            p = random_admissible(g, rng)
            for which in (1, 2):
                psi = _mean_zero(rng, g.shape)
                d = PhasePair(psi, 0 * psi) if which == 1 else PhasePair(0 * psi, psi)
                fd = convex_difference(g, p, d, params, s)
                worst_c = max(worst_c, rel(fd, g.inner(en.var_deriv_convex(g, p, params, which), psi)))
                fd = concave_difference(g, p, d, params, s)
                worst_e = max(worst_e, rel(fd, g.inner(en.var_deriv_concave(g, p, params, which), psi)))
            prev = random_admissible(g, rng, 0.02)
            prev = PhasePair(prev.phi1 - prev.phi1.mean() + p.phi1.mean(),
                             prev.phi2 - prev.phi2.mean() + p.phi2.mean())
            state = SchemeState(p, prev, 0.0, 1)
            obj = bdf2_objective(g, state, params, SchemeParams.from_preset(params, 0.01))
            v = PhasePair(_mean_zero(rng, g.shape), _mean_zero(rng, g.shape))
            fd = (obj.value(p + s * v) - obj.value(p - s * v)) / (2 * s)
            grad = obj.gradient(p)
            worst_j = max(worst_j, rel(fd, g.inner(grad.phi1, v.phi1) + g.inner(grad.phi2, v.phi2)))
    ok = worst_c <= tol and worst_e <= 1e-8 and worst_j <= tol
    return Check("gradient oracles", ok,
                 f"convex {worst_c:.1e}, concave {worst_e:.1e}, objective {worst_j:.1e}")


def check_splitting(rng, params: ModelParams, samples=20) -> Check:
    worst = 0.0
    convex_ok = concave_ok = True
    for _ in range(samples):
        g = Grid(8, 64.0)
        p, q = random_admissible(g, rng), random_admissible(g, rng)
        total = en.energy_total(g, p, params)
        split = en.energy_convex(g, p, params) - en.energy_concave(g, p, params)
        worst = max(worst, rel(total, split))
        m = 0.5 * (p + q)
        convex_ok &= en.energy_convex(g, m, params) <= 0.5 * (
            en.energy_convex(g, p, params) + en.energy_convex(g, q, params)) + 1e-10
        h = lambda z: -en.energy_concave(g, z, params)  # noqa: E731
        concave_ok &= h(m) >= 0.5 * (h(p) + h(q)) - 1e-10
    ok = worst <= 1e-12 and convex_ok and concave_ok
    return Check("convex-concave splitting", ok,
                 f"identity defect {worst:.1e}, convex {convex_ok}, concave {concave_ok}")


def run_checks(seed: int = 0, params: ModelParams | None = None) -> list[Check]:
    params = params or ModelParams()
    rng = np.random.default_rng(seed)
    return [
        check_summation_by_parts(rng),
        check_laplacian(rng),
        check_single_mode(),
        check_hinv_roundtrip(rng),
        check_gradients(rng, params),
        check_splitting(rng, params),
    ]
