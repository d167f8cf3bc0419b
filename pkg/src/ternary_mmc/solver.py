"""Safeguarded inexact Newton minimization over the mass-constrained Gibbs triangle.

The objective is any object exposing

* ``grid`` (a :class:`~ternary_mmc.grid.Grid`),
* ``value(p) -> float``, ``gradient(p) -> PhasePair``,
* ``hessvec(p, v) -> PhasePair``,

and optionally ``preconditioner(p)`` returning a callable that approximates
the inverse Hessian on mean-zero pairs, and ``residual_m1h(p, g)``.

Search directions have zero mean in each phase, so the masses of the start
point are kept to roundoff for every iterate.  A fraction-to-boundary cap on
the step length keeps every trial point strictly inside the triangle; the
objective is never evaluated outside it.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np

from .energy import PhasePair, is_admissible
from .hinv import pcg

log = logging.getLogger(__name__)

_EPS = np.finfo(float).eps


@dataclass(frozen=True)
class SolverParams:
    """Stopping and safeguard settings.

    ``grad_tol=None`` resolves to ``1e-10 * L`` for a domain of side ``L``.
    """

    grad_tol: float | None = None
    max_iters: int = 200
    boundary_fraction: float = 0.9
    linear_tol: float = 1e-8
    armijo_c: float = 1e-4
    max_linear_iters: int = 200

    def __post_init__(self):
        if self.grad_tol is not None and not self.grad_tol > 0:
            raise ValueError(f"grad_tol must be positive, got {self.grad_tol!r}")
        if not (isinstance(self.max_iters, int) and self.max_iters > 0):
            raise ValueError(f"max_iters must be a positive integer, got {self.max_iters!r}")
        if not 0 < self.boundary_fraction < 1:
            raise ValueError(f"boundary_fraction must lie in (0, 1), got {self.boundary_fraction!r}")
        if not self.linear_tol > 0:
            raise ValueError(f"linear_tol must be positive, got {self.linear_tol!r}")
        if not 0 < self.armijo_c < 1:
            raise ValueError(f"armijo_c must lie in (0, 1), got {self.armijo_c!r}")

    def tolerance(self, grid) -> float:
        return self.grad_tol if self.grad_tol is not None else 1e-10 * grid.length


@dataclass
class SolveReport:
    iterations: int = 0
    final_grad_norm: float = float("nan")
    final_residual_m1h: float = float("nan")
    line_search_backtracks: int = 0
    converged: bool = False
    linear_iterations: int = 0
    fallback_directions: int = 0
    exterior_evaluations: int = 0
    objective_history: list = field(default_factory=list, repr=False)


class SolverError(RuntimeError):
    """Minimization failed; ``best`` is the last accepted iterate."""

    def __init__(self, message, best=None, report=None, boundary_distance=None):
        super().__init__(message)
        self.best = best
        self.report = report
        self.boundary_distance = boundary_distance


def project(p: PhasePair) -> PhasePair:
    """Remove the mean of each component."""
    return PhasePair(p.phi1 - np.mean(p.phi1), p.phi2 - np.mean(p.phi2))


def pair_inner(grid, u: PhasePair, v: PhasePair) -> float:
    return grid.inner(u.phi1, v.phi1) + grid.inner(u.phi2, v.phi2)


def pair_norm(grid, u: PhasePair) -> float:
    return float(np.sqrt(max(pair_inner(grid, u, u), 0.0)))


def search_direction(obj, p: PhasePair, grad: PhasePair, sp: SolverParams,
                     report: SolveReport | None = None) -> PhasePair:
    """Inexact Newton direction on mean-zero pairs.

    Solves ``P H P d = -P g`` by preconditioned CG.  If the curvature test
    fails on the first CG iteration, the preconditioned steepest-descent
    direction is returned instead.
    """
    grid = obj.grid
    g = project(grad)
    if not np.any(g.phi1) and not np.any(g.phi2):
        return PhasePair(np.zeros_like(g.phi1), np.zeros_like(g.phi2))
    precond = obj.preconditioner(p) if hasattr(obj, "preconditioner") else (lambda r: r)

    def apply_h(v):
        return project(obj.hessvec(p, v))

    def apply_m(r):
        return project(precond(r))

    rhs = -g
    d, info = pcg(apply_h, rhs, apply_m, lambda u, v: pair_inner(grid, u, v),
                  tol=sp.linear_tol, maxiter=sp.max_linear_iters)
    if report is not None:
        report.linear_iterations += info["iterations"]
    if info["iterations"] == 0 or pair_inner(grid, d, g) >= 0:
        if report is not None:
            report.fallback_directions += 1
        log.debug("falling back to preconditioned steepest descent: %s", info)
        d = apply_m(rhs)
    return project(d)


def max_interior_step(p: PhasePair, d: PhasePair, boundary_fraction: float) -> float:
    """Largest ``t`` keeping each of phi1, phi2, phi3 above ``(1 - bf)`` of its current value."""
    t = np.inf
    for u, du in ((p.phi1, d.phi1), (p.phi2, d.phi2), (p.phi3, -(d.phi1 + d.phi2))):
        neg = du < 0
        if np.any(neg):
            t = min(t, float(np.min(boundary_fraction * u[neg] / -du[neg])))
    return t


def safeguarded_line_search(obj, p: PhasePair, d: PhasePair, value: float,
                            slope: float, sp: SolverParams,
                            report: SolveReport | None = None) -> float:
    """Fraction-to-boundary capped Armijo backtracking; returns the step length.

    Returns ``0.0`` for a zero direction.  Raises :class:`SolverError` when the
    step collapses below ``1e-14``.
    """
    if not np.any(d.phi1) and not np.any(d.phi2):
        return 0.0
    t = min(1.0, max_interior_step(p, d, sp.boundary_fraction))
    # roundoff floor for comparing nearly equal objective values
    slack = 64 * _EPS * (abs(value) + 1.0)
    while t >= 1e-14:
        trial = p + t * d
        if not is_admissible(trial):
            if report is not None:
                report.exterior_evaluations += 1
        else:
            if obj.value(trial) <= value + sp.armijo_c * t * slope + slack:
                return t
        if report is not None:
            report.line_search_backtracks += 1
        t *= 0.5
    raise SolverError(
        "line search step collapsed below 1e-14",
        best=p, report=report,
        boundary_distance=float(min(p.phi1.min(), p.phi2.min(), p.phi3.min())))


def minimize(obj, start: PhasePair, targets: tuple[float, float] | None,
             sp: SolverParams) -> tuple[PhasePair, SolveReport]:
    """Minimize a strictly convex objective over ``{means fixed} x Gibbs triangle``.

    Raises
    ------
    SolverError
        If ``max_iters`` is exhausted or the line search collapses; the
        exception carries the best iterate and the report.
    """
    grid = obj.grid
    if not is_admissible(start):
        raise SolverError("start point is outside the Gibbs triangle", best=start)
    if targets is not None:
        m1, m2 = start.means()
        if abs(m1 - targets[0]) > 1e-10 or abs(m2 - targets[1]) > 1e-10:
            raise SolverError(
                f"start means ({m1!r}, {m2!r}) differ from targets {targets!r}", best=start)
    tol = sp.tolerance(grid)
    report = SolveReport()
    p = start
    value = obj.value(p)
    report.objective_history.append(value)
    for it in range(sp.max_iters + 1):
        g_full = obj.gradient(p)
        g = project(g_full)
        gnorm = pair_norm(grid, g)
        report.final_grad_norm = gnorm
        if gnorm <= tol:
            report.converged = True
            break
        if it == sp.max_iters:
            break
        d = search_direction(obj, p, g, sp, report)
        slope = pair_inner(grid, g, d)
        t = safeguarded_line_search(obj, p, d, value, slope, sp, report)
        if t == 0.0:
            break
        p = p + t * d
        value = obj.value(p)
        report.objective_history.append(value)
        report.iterations = it + 1
    if hasattr(obj, "residual_m1h"):
        report.final_residual_m1h = obj.residual_m1h(p, g)
    if not report.converged:
        raise SolverError(
            f"no convergence after {report.iterations} iterations "
            f"(gradient norm {report.final_grad_norm:.3e} > {tol:.3e})",
            best=p, report=report,
            boundary_distance=float(min(p.phi1.min(), p.phi2.min(), p.phi3.min())))
    return p, report
