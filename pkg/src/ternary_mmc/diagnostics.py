"""Per-step observables and certification of decay, conservation and positivity."""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np

from . import energy as en
from .energy import ModelParams
from .grid import Grid
from .hinv import norm_m1h
from .scheme import SchemeParams, SchemeState
from .solver import SolveReport

log = logging.getLogger(__name__)


def increment_terms(grid: Grid, state: SchemeState):
    """``(||d1||_{-1,h}^2, ||d2||_{-1,h}^2, ||d1||_2^2, ||d2||_2^2)`` for ``d = phi^{n+1} - phi^n``."""
    d1 = state.current.phi1 - state.previous.phi1
    d2 = state.current.phi2 - state.previous.phi2
    return (norm_m1h(grid, d1) ** 2, norm_m1h(grid, d2) ** 2,
            grid.norm2(d1) ** 2, grid.norm2(d2) ** 2)


def modified_energy_E(grid: Grid, state: SchemeState, params: ModelParams,
                      sp: SchemeParams, energy: float | None = None) -> float:
    if energy is None:
        energy = en.energy_total(grid, state.current, params)
    m1, m2, l1, l2 = increment_terms(grid, state)
    dt = sp.dt
    # ||(d)/dt||^2 dt / (4M) == ||d||^2 / (4 M dt)
    return (energy
            + m1 / (4.0 * params.mob1 * dt) + m2 / (4.0 * params.mob2 * dt)
            + 0.5 * (2 * params.chi12 + 3 * params.chi13 + params.chi23) * l1
            + 0.5 * (2 * params.chi12 + params.chi13 + 3 * params.chi23) * l2)


def modified_energy_F(grid: Grid, state: SchemeState, params: ModelParams,
                      sp: SchemeParams, energy: float | None = None) -> float:
    """Alternate decaying quantity; only meaningful for unit mobilities."""
    if params.mob1 != 1.0 or params.mob2 != 1.0:
        log.warning("F is derived for unit mobilities; got M1=%g, M2=%g",
                    params.mob1, params.mob2)
    if energy is None:
        energy = en.energy_total(grid, state.current, params)
    m1, m2, l1, l2 = increment_terms(grid, state)
    return energy + 3.0 / (4.0 * sp.dt) * (m1 + m2) + params.chi13 * l1 + params.chi23 * l2


@dataclass
class DiagnosticsRecord:
    step: int
    time: float
    energy_gh: float
    energy_e_mod: float
    energy_f_mod: float
    mass1: float
    mass2: float
    min1: float
    max1: float
    min2: float
    max2: float
    min_sum_complement: float
    gibbs_margin: float
    solver: SolveReport | None = field(default=None, repr=False)

    @property
    def solver_iters(self) -> int:
        return self.solver.iterations if self.solver is not None else 0

    @property
    def solver_grad_norm(self) -> float:
        return self.solver.final_grad_norm if self.solver is not None else 0.0


def record(grid: Grid, state: SchemeState, params: ModelParams,
           sp: SchemeParams) -> DiagnosticsRecord:
    p = state.current
    phi3 = p.phi3
    g = en.energy_total(grid, p, params)
    min1, min2, min3 = float(p.phi1.min()), float(p.phi2.min()), float(phi3.min())
    if params.mob1 == 1.0 and params.mob2 == 1.0:
        f_mod = modified_energy_F(grid, state, params, sp, g)
    else:
        f_mod = float("nan")
    return DiagnosticsRecord(
        step=state.step, time=state.time, energy_gh=g,
        energy_e_mod=modified_energy_E(grid, state, params, sp, g),
        energy_f_mod=f_mod,
        mass1=float(np.mean(p.phi1)), mass2=float(np.mean(p.phi2)),
        min1=min1, max1=float(p.phi1.max()), min2=min2, max2=float(p.phi2.max()),
        min_sum_complement=min3, gibbs_margin=min(min1, min2, min3),
        solver=state.report)


@dataclass
class Certificate:
    mass_ok: bool = True
    positivity_ok: bool = True
    decay_ok: bool = True
    energy_checked: str | None = None
    max_mass_drift: float = 0.0
    min_margin: float = float("inf")
    first_mass_violation: int | None = None
    first_positivity_violation: int | None = None
    first_decay_violation: int | None = None
    messages: list = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return self.mass_ok and self.positivity_ok and self.decay_ok

    def summary(self) -> str:
        head = "certified" if self.ok else "NOT certified"
        parts = [f"{head}: mass drift {self.max_mass_drift:.2e}",
                 f"min Gibbs margin {self.min_margin:.4g}",
                 f"energy {self.energy_checked or 'not checked'}"]
        return "; ".join(parts) + "".join(f"\n  {m}" for m in self.messages)


def certify(records, energy: str | None = None, mass_tol: float = 1e-12,
            decay_slack: float = 1e-10) -> Certificate:
    """Check a record series.

    ``energy`` selects ``"E"``, ``"F"`` or ``None`` (no decay check).  Decay is
    asserted between consecutive records with ``step >= 1``, with slack
    ``decay_slack * |value|``.
    """
    cert = Certificate(energy_checked=energy)
    if not records:
        return cert
    m1, m2 = records[0].mass1, records[0].mass2
    for rec in records:
        drift = max(abs(rec.mass1 - m1), abs(rec.mass2 - m2))
        cert.max_mass_drift = max(cert.max_mass_drift, drift)
        if drift > mass_tol and cert.mass_ok:
            cert.mass_ok = False
            cert.first_mass_violation = rec.step
            cert.messages.append(f"mass drift {drift:.3e} > {mass_tol:g} at step {rec.step}")
        cert.min_margin = min(cert.min_margin, rec.gibbs_margin)
        if not rec.gibbs_margin > 0 and cert.positivity_ok:
            cert.positivity_ok = False
            cert.first_positivity_violation = rec.step
            cert.messages.append(f"Gibbs margin {rec.gibbs_margin!r} at step {rec.step}")
    if energy is not None:
        attr = {"E": "energy_e_mod", "F": "energy_f_mod"}[energy]
        series = [r for r in records if r.step >= 1]
        for prev, cur in zip(series, series[1:]):
            a, b = getattr(prev, attr), getattr(cur, attr)
            if b > a + decay_slack * abs(a):
                cert.decay_ok = False
                cert.first_decay_violation = cur.step
                cert.messages.append(
                    f"{energy} increased at step {cur.step}: {a!r} -> {b!r}")
                break
    return cert


def choose_energy(params: ModelParams, sp: SchemeParams) -> str | None:
    """The modified energy whose decay is guaranteed for these coefficients, if any."""
    if sp.certified_E(params):
        return "E"
    if sp.certified_F(params):
        return "F"
    return None
