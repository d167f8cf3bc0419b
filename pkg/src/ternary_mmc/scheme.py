"""BDF2 convex-splitting scheme with Douglas-Dupont regularization.

For ``n >= 1`` the update solves, for ``i = 1, 2``,

    (3 phi_i^{n+1} - 4 phi_i^n + phi_i^{n-1}) / (2 dt) = M_i Delta_h mu_i^{n+1}
    mu_i^{n+1} = dG_c/dphi_i(phi^{n+1}) + dH/dphi_i(2 phi^n - phi^{n-1})
                 - A_i dt Delta_h (phi_i^{n+1} - phi_i^n)

which is the stationarity condition of a strictly convex functional on the
mass-constrained admissible set.  Both the first step and the BDF2 steps are
cast in the common form

    J(phi) = sum_i [ (w_i/2) ||phi_i - b_i||_{-1,h}^2 + <f_i, phi_i>
                     + (A_i dt / 2) ||grad_h(phi_i - anchor_i)||^2 ] + c G_c(phi)

and handed to :func:`ternary_mmc.solver.minimize`.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field

import numpy as np

from . import energy as en
from .energy import ModelParams, PhasePair
from .grid import Grid
from .hinv import inv_laplacian, irfft2, norm_m1h, rfft2
from .solver import SolveReport, SolverError, SolverParams, minimize, project

log = logging.getLogger(__name__)

A_PRESETS = ("paper-experiment", "theorem", "alternate")


def energy_thresholds(params: ModelParams) -> tuple[float, float]:
    """Smallest ``(A1, A2)`` for which decay of the modified energy E is guaranteed."""
    k = (3.0 * params.chi13 + 3.0 * params.chi23 + 2.0 * params.chi12) ** 2 / 4.0
    return params.mob1 * k, params.mob2 * k


def a_preset(params: ModelParams, name: str) -> tuple[float, float]:
    """Douglas-Dupont coefficients for a named preset.

    ``paper-experiment``: 1.25 chi13^2 + 0.25 c^2, 2 chi23^2 + 2 c^2
    ``theorem``: the decay thresholds of :func:`energy_thresholds`
    ``alternate``: 2 chi13^2 + 0.5 c^2, 2 chi23^2 + 0.5 c^2 (for the F quantity)

    with ``c = chi12 - chi13 - chi23``.
    """
    c2 = params.chi_cross**2
    if name == "paper-experiment":
        return 1.25 * params.chi13**2 + 0.25 * c2, 2.0 * params.chi23**2 + 2.0 * c2
    if name == "theorem":
        return energy_thresholds(params)
    if name == "alternate":
        return 2.0 * params.chi13**2 + 0.5 * c2, 2.0 * params.chi23**2 + 0.5 * c2
    raise ValueError(f"unknown A preset {name!r}; expected one of {A_PRESETS}")


@dataclass(frozen=True)
class SchemeParams:
    dt: float
    a1: float
    a2: float
    solver: SolverParams = field(default_factory=SolverParams)

    def __post_init__(self):
        if not (self.dt > 0 and math.isfinite(self.dt)):
            raise ValueError(f"time step must be positive, got {self.dt!r}")
        for name in ("a1", "a2"):
            value = getattr(self, name)
            if not (value >= 0 and math.isfinite(value)):
                raise ValueError(f"{name} must be a non-negative real, got {value!r}")

    @classmethod
    def from_preset(cls, params: ModelParams, dt: float, preset: str = "paper-experiment",
                    solver: SolverParams | None = None) -> "SchemeParams":
        a1, a2 = a_preset(params, preset)
        return cls(dt, a1, a2, solver or SolverParams())

    def a(self, which: int) -> float:
        return self.a1 if which == 1 else self.a2

    def certified_E(self, params: ModelParams) -> bool:
        t1, t2 = energy_thresholds(params)
        return self.a1 >= t1 and self.a2 >= t2

    def certified_F(self, params: ModelParams) -> bool:
        alt1, alt2 = a_preset(params, "alternate")
        return (params.mob1 == 1.0 and params.mob2 == 1.0
                and self.a1 >= alt1 and self.a2 >= alt2)


@dataclass(frozen=True)
class SchemeState:
    """Two-level history ``(phi^n, phi^{n-1})`` at ``time = step * dt``."""

    current: PhasePair
    previous: PhasePair
    time: float
    step: int
    report: SolveReport | None = None

    @property
    def extrapolated(self) -> PhasePair:
        return 2.0 * self.current - self.previous


class StepFailure(SolverError):
    """A time step could not be completed; carries the solver's best iterate."""


class RunFailure(RuntimeError):
    """A run aborted; carries the last accepted state and the records so far."""

    def __init__(self, message, state=None, records=None, cause=None):
        super().__init__(message)
        self.state = state
        self.records = records or []
        self.cause = cause


# -- the common convex objective ---------------------------------------------

class StepObjective:
    """Strictly convex per-step functional (see module docstring)."""

    def __init__(self, grid: Grid, params: ModelParams, weights, base: PhasePair,
                 convex_scale: float, linear: PhasePair, reg, anchor: PhasePair):
        self.grid = grid
        self.params = params
        self.weights = tuple(float(w) for w in weights)
        self.base = base
        self.convex_scale = float(convex_scale)
        self.linear = linear
        self.reg = tuple(float(r) for r in reg)
        self.anchor = anchor
        self.mobilities = (params.mob1, params.mob2)

    def value(self, p: PhasePair) -> float:
        g = self.grid
        total = self.convex_scale * en.energy_convex(g, p, self.params)
        for i in range(2):
            diff = p[i] - self.base[i]
            total += 0.5 * self.weights[i] * g.inner(diff, inv_laplacian(g, diff))
            total += g.inner(self.linear[i], p[i])
            if self.reg[i]:
                total += 0.5 * self.reg[i] * g.grad_norm2(p[i] - self.anchor[i]) ** 2
        return total

    def gradient(self, p: PhasePair) -> PhasePair:
        g = self.grid
        dc = en.var_deriv_convex_pair(g, p, self.params)
        out = []
        for i in range(2):
            gi = (self.weights[i] * inv_laplacian(g, p[i] - self.base[i])
                  + self.convex_scale * dc[i] + self.linear[i])
            if self.reg[i]:
                gi = gi - self.reg[i] * g.laplacian(p[i] - self.anchor[i])
            out.append(gi)
        return PhasePair(*out)

    def hessvec(self, p: PhasePair, v: PhasePair) -> PhasePair:
        g = self.grid
        hc = en.hessvec_convex(g, p, self.params, v)
        out = []
        for i in range(2):
            wi = self.weights[i] * inv_laplacian(g, v[i]) + self.convex_scale * hc[i]
            if self.reg[i]:
                wi = wi - self.reg[i] * g.laplacian(v[i])
            out.append(wi)
        return PhasePair(*out)

    def preconditioner(self, p: PhasePair):
        """Fourier-diagonal 2x2 block model of the Hessian, frozen at mean coefficients."""
        g = self.grid
        prm = self.params
        c = self.convex_scale
        lam = g.laplacian_eigenvalues()
        inv_lam = np.zeros_like(lam)
        inv_lam[lam > 0] = 1.0 / lam[lam > 0]
        s3 = float(np.mean(1.0 / p.phi3))
        s11 = float(np.mean(1.0 / (prm.m0 * p.phi1))) + s3
        s22 = float(np.mean(1.0 / (prm.n0 * p.phi2))) + s3
        sig1 = prm.eps1**2 * float(np.mean(1.0 / (18.0 * p.phi1)))
        sig2 = prm.eps2**2 * float(np.mean(1.0 / (18.0 * p.phi2)))
        sig3 = prm.eps3**2 * float(np.mean(1.0 / (18.0 * p.phi3)))
        m11 = self.weights[0] * inv_lam + c * (s11 + (sig1 + sig3) * lam) + self.reg[0] * lam
        m22 = self.weights[1] * inv_lam + c * (s22 + (sig2 + sig3) * lam) + self.reg[1] * lam
        m12 = c * (s3 + sig3 * lam)
        det = m11 * m22 - m12 * m12
        det[0, 0] = 1.0
        i11, i12, i22 = m22 / det, -m12 / det, m11 / det
        for arr in (i11, i12, i22):
            arr[0, 0] = 0.0
        n = g.n

        def apply(r: PhasePair) -> PhasePair:
            r1 = rfft2(r.phi1)
            r2 = rfft2(r.phi2)
            return PhasePair(irfft2(i11 * r1 + i12 * r2, n), irfft2(i12 * r1 + i22 * r2, n))

        return apply

    def residual_m1h(self, p: PhasePair, projected_grad: PhasePair) -> float:
        """``|| M_i (-Delta_h) P g_i ||_{-1,h}`` combined over both phases."""
        g = self.grid
        total = 0.0
        for i in range(2):
            total += (self.mobilities[i] * g.grad_norm2(projected_grad[i])) ** 2
        return float(np.sqrt(total))


def bdf2_objective(grid: Grid, state: SchemeState, params: ModelParams,
                   sp: SchemeParams) -> StepObjective:
    dt = sp.dt
    hat = state.extrapolated
    weights = (3.0 / (2.0 * params.mob1 * dt), 3.0 / (2.0 * params.mob2 * dt))
    base = (4.0 * state.current - state.previous) * (1.0 / 3.0)
    linear = PhasePair(en.mixing_derivative(hat, params, 1), en.mixing_derivative(hat, params, 2))
    return StepObjective(grid, params, weights, base, 1.0, linear,
                         (sp.a1 * dt, sp.a2 * dt), state.current)


def initial_time_derivative(grid: Grid, initial: PhasePair, params: ModelParams) -> PhasePair:
    """``(phi_i)_t^0 = M_i Delta_h mu_i^0`` with ``mu^0`` the exact chemical potential at ``phi^0``."""
    dc = en.var_deriv_convex_pair(grid, initial, params)
    out = []
    for i, which in enumerate((1, 2)):
        mu0 = dc[i] + en.mixing_derivative(initial, params, which)
        out.append(params.mobility(which) * grid.laplacian(mu0))
    return PhasePair(*out)


def init_objective(grid: Grid, initial: PhasePair, params: ModelParams,
                   sp: SchemeParams) -> StepObjective:
    dt = sp.dt
    dc0 = en.var_deriv_convex_pair(grid, initial, params)
    phit = initial_time_derivative(grid, initial, params)
    linear = []
    for i, which in enumerate((1, 2)):
        linear.append(0.5 * dc0[i] + en.mixing_derivative(initial, params, which)
                      + 0.5 * dt * en.hessian_H_diag(params, which) * phit[i])
    weights = (1.0 / (params.mob1 * dt), 1.0 / (params.mob2 * dt))
    return StepObjective(grid, params, weights, initial, 0.5, PhasePair(*linear),
                         (0.0, 0.0), initial)


# -- residual forms ---------------------------------------------------------

def chemical_potential(grid: Grid, candidate: PhasePair, state: SchemeState,
                       params: ModelParams, sp: SchemeParams, which: int) -> np.ndarray:
    """``mu_i^{n+1}`` for a candidate new level."""
    hat = state.extrapolated
    u = candidate[which - 1]
    un = state.current[which - 1]
    return (en.var_deriv_convex(grid, candidate, params, which)
            - en.var_deriv_concave(grid, hat, params, which)
            - sp.a(which) * sp.dt * grid.laplacian(u - un))


def bdf2_residual(grid: Grid, candidate: PhasePair, state: SchemeState,
                  params: ModelParams, sp: SchemeParams) -> PhasePair:
    out = []
    for which in (1, 2):
        i = which - 1
        mu = chemical_potential(grid, candidate, state, params, sp, which)
        lhs = (3.0 * candidate[i] - 4.0 * state.current[i] + state.previous[i]) / (2.0 * sp.dt)
        out.append(lhs - params.mobility(which) * grid.laplacian(mu))
    return PhasePair(*out)


def init_residual(grid: Grid, candidate: PhasePair, initial: PhasePair,
                  params: ModelParams, sp: SchemeParams) -> PhasePair:
    """Residual of the second-order start-up step."""
    phit = initial_time_derivative(grid, initial, params)
    out = []
    for which in (1, 2):
        i = which - 1
        mu = (0.5 * (en.var_deriv_convex(grid, candidate, params, which)
                     + en.var_deriv_convex(grid, initial, params, which))
              + en.mixing_derivative(initial, params, which)
              + 0.5 * sp.dt * en.hessian_H_diag(params, which) * phit[i])
        lhs = (candidate[i] - initial[i]) / sp.dt
        out.append(lhs - params.mobility(which) * grid.laplacian(mu))
    return PhasePair(*out)


def residual_m1h(grid: Grid, r: PhasePair) -> float:
    return float(np.hypot(norm_m1h(grid, r.phi1), norm_m1h(grid, r.phi2)))


def objective(grid: Grid, candidate: PhasePair, state: SchemeState, params: ModelParams,
              sp: SchemeParams, targets: tuple[float, float] | None = None) -> float:
    """``J_h^n`` evaluated term by term.

    ``targets`` are the conserved means; they default to the means of
    ``state.current``.
    """
    if targets is None:
        targets = state.current.means()
    m1, m2 = candidate.means()
    if abs(m1 - targets[0]) > 1e-10 or abs(m2 - targets[1]) > 1e-10:
        raise ValueError(f"candidate means ({m1!r}, {m2!r}) violate the mass constraint {targets!r}")
    en.check_admissible(candidate)
    hat = state.extrapolated
    total = en.energy_convex(grid, candidate, params)
    for which in (1, 2):
        i = which - 1
        bdf = 3.0 * candidate[i] - 4.0 * state.current[i] + state.previous[i]
        total += norm_m1h(grid, bdf) ** 2 / (12.0 * params.mobility(which) * sp.dt)
        total += grid.inner(en.mixing_derivative(hat, params, which), candidate[i])
        total += 0.5 * sp.a(which) * sp.dt * grid.grad_norm2(candidate[i] - state.current[i]) ** 2
    return total


# -- stepping ---------------------------------------------------------------

def _solve(obj: StepObjective, guesses, targets, sp: SchemeParams, step: int):
    start = None
    for guess in guesses:
        if en.is_admissible(guess):
            start = guess
            break
    try:
        return minimize(obj, start, targets, sp.solver)
    except SolverError as exc:
        raise StepFailure(f"step {step}: {exc}", best=exc.best, report=exc.report,
                          boundary_distance=exc.boundary_distance) from exc


def step_init(grid: Grid, initial: PhasePair, params: ModelParams,
              sp: SchemeParams) -> SchemeState:
    """Second-order start-up step producing ``phi^1`` from ``phi^0``."""
    en.check_admissible(initial)
    obj = init_objective(grid, initial, params, sp)
    targets = initial.means()
    new, report = _solve(obj, [initial], targets, sp, 1)
    if not en.is_admissible(new):
        log.warning("start-up step produced an inadmissible state")
    return SchemeState(new, initial, 1 * sp.dt, 1, report)


def step(grid: Grid, state: SchemeState, params: ModelParams, sp: SchemeParams) -> SchemeState:
    """One BDF2 step; the solver starts from the extrapolated level when admissible."""
    obj = bdf2_objective(grid, state, params, sp)
    targets = state.current.means()
    guess = state.extrapolated
    # restore exact means of the extrapolation before using it as a start point
    guess = project(guess) + PhasePair(np.full(grid.shape, targets[0]),
                                       np.full(grid.shape, targets[1]))
    new, report = _solve(obj, [guess, state.current], targets, sp, state.step + 1)
    n = state.step + 1
    return SchemeState(new, state.current, n * sp.dt, n, report)


def steps_for(t_final: float, dt: float) -> int:
    """Number of steps of size ``dt`` reaching ``t_final`` exactly (within 1e-9)."""
    if t_final < 0:
        raise ValueError(f"t_final must be non-negative, got {t_final!r}")
    k = round(t_final / dt)
    if abs(k * dt - t_final) > 1e-9:
        raise ValueError(f"t_final={t_final!r} is not an integer multiple of dt={dt!r}")
    return int(k)


def run(grid: Grid, initial: PhasePair, params: ModelParams, sp: SchemeParams,
        t_final: float, callbacks=(), diag_stride: int = 1, record_fn=None):
    """Integrate to ``t_final``.

    Parameters
    ----------
    callbacks
        Callables ``cb(state, record)`` invoked whenever a record is taken;
        returning ``False`` aborts the run after that step.
    diag_stride
        Records are taken at step 0, every ``diag_stride`` steps, and at the
        final step.
    record_fn
        ``record_fn(grid, state, params, sp)``; defaults to
        :func:`ternary_mmc.diagnostics.record`.

    Returns
    -------
    (SchemeState, list of records)
    """
    if record_fn is None:
        from .diagnostics import record as record_fn
    if diag_stride < 1:
        raise ValueError(f"diag_stride must be >= 1, got {diag_stride!r}")
    nsteps = steps_for(t_final, sp.dt)
    en.check_admissible(initial)
    state = SchemeState(initial, initial, 0.0, 0, None)
    records = []

    def take(st):
        rec = record_fn(grid, st, params, sp)
        records.append(rec)
        keep_going = True
        for cb in callbacks:
            if cb(st, rec) is False:
                keep_going = False
        return keep_going

    if not take(state) or nsteps == 0:
        return state, records
    try:
        for n in range(1, nsteps + 1):
            if n == 1:
                state = step_init(grid, initial, params, sp)
            else:
                state = step(grid, state, params, sp)
            if n % diag_stride == 0 or n == nsteps:
                if not take(state):
                    break
    except StepFailure as exc:
        raise RunFailure(f"run aborted: {exc}", state=state, records=records, cause=exc) from exc
    return state, records
