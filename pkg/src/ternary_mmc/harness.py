"""Experiment reproduction: initial data, grid transfer and the convergence study."""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass

import numpy as np

from . import energy as en
from .energy import ModelParams, PhasePair
from .grid import Grid
from .scheme import SchemeParams, run, steps_for
from .solver import SolverParams

log = logging.getLogger(__name__)

INITIAL_KINDS = ("example1", "example2", "file")
TRANSFER_MODES = ("nearest", "bilinear")


# -- initial data -------------------------------------------------------------

def build_initial(kind: str, grid: Grid, seed: int | None = 0, path=None,
                  independent_noise: bool = False) -> PhasePair:
    """Initial phase pair.

    ``example1``: ``0.1 + 0.01 cos(3 pi x/32) cos(3 pi y/32)`` and the same
    perturbation around 0.5.  ``example2``: ``(0.1, 0.4)`` plus one uniform
    draw ``r_ij`` in ``[-0.01, 0.01]`` per cell shared by both phases (or
    independent draws when ``independent_noise``).  ``file``: a snapshot.
    """
    if kind == "example1":
        x, y = grid.centers()
        bump = 0.01 * np.cos(3 * np.pi * x / 32) * np.cos(3 * np.pi * y / 32)
        pair = PhasePair(0.1 + bump, 0.5 + bump)
    elif kind == "example2":
        rng = np.random.default_rng(seed)
        r1 = rng.uniform(-0.01, 0.01, grid.shape)
        r2 = rng.uniform(-0.01, 0.01, grid.shape) if independent_noise else r1
        pair = PhasePair(0.1 + r1, 0.4 + r2)
    elif kind == "file":
        from .storage import load_snapshot
        snap = load_snapshot(path)
        if snap.n != grid.n or not math.isclose(snap.length, grid.length, rel_tol=1e-12):
            raise ValueError(f"snapshot grid ({snap.n}, {snap.length}) does not match "
                             f"({grid.n}, {grid.length})")
        pair = snap.pair
    else:
        raise ValueError(f"unknown initial-data kind {kind!r}; expected one of {INITIAL_KINDS}")
    en.check_admissible(pair)
    return pair


# -- inter-grid transfer ------------------------------------------------------

def coarse_to_fine(u: np.ndarray, mode: str = "nearest") -> np.ndarray:
    """Transfer a cell field from ``n`` to ``2n`` cells per side.

    ``nearest`` copies each coarse cell into its 2x2 children.  ``bilinear``
    interpolates to the fine centers, which sit a quarter coarse spacing from
    the coarse centers, with periodic wrap (weights 3/4 and 1/4 per axis).
    """
    u = np.asarray(u, dtype=np.float64)
    if u.ndim != 2 or u.shape[0] != u.shape[1]:
        raise ValueError(f"expected a square cell field, got shape {u.shape}")
    if mode == "nearest":
        return np.repeat(np.repeat(u, 2, axis=0), 2, axis=1)
    if mode == "bilinear":
        out = u
        for axis in (0, 1):
            lo = 0.75 * out + 0.25 * np.roll(out, 1, axis=axis)
            hi = 0.75 * out + 0.25 * np.roll(out, -1, axis=axis)
            shape = list(out.shape)
            shape[axis] *= 2
            merged = np.empty(shape)
            index = [slice(None)] * 2
            index[axis] = slice(0, None, 2)
            merged[tuple(index)] = lo
            index[axis] = slice(1, None, 2)
            merged[tuple(index)] = hi
            out = merged
        return out
    raise ValueError(f"unknown transfer mode {mode!r}; expected one of {TRANSFER_MODES}")


def cauchy_difference(fine: PhasePair, coarse: PhasePair, fine_grid: Grid,
                      mode: str = "bilinear", fine_time: float | None = None,
                      coarse_time: float | None = None):
    """Per-phase ``l2`` and ``linf`` norms of ``phi_fine - I(phi_coarse)`` on the fine grid.

    Returns ``((l2_1, l2_2), (linf_1, linf_2))``.
    """
    if fine_time is not None and coarse_time is not None and abs(fine_time - coarse_time) > 1e-9:
        raise ValueError(f"solutions are at different times: {fine_time!r} vs {coarse_time!r}")
    if coarse.phi1.shape[0] * 2 != fine.phi1.shape[0]:
        raise ValueError(f"grid mismatch: coarse {coarse.phi1.shape}, fine {fine.phi1.shape}")
    l2, linf = [], []
    for i in range(2):
        delta = fine[i] - coarse_to_fine(coarse[i], mode)
        l2.append(fine_grid.norm2(delta))
        linf.append(fine_grid.norm_inf(delta))
    return tuple(l2), tuple(linf)


# -- convergence study --------------------------------------------------------

@dataclass(frozen=True)
class RefinementPath:
    """Grids with doubling ``n`` and ``dt = dt_coef * h``."""

    sizes: tuple
    length: float = 64.0
    dt_coef: float = 0.002
    t_final: float = 0.4

    def __post_init__(self):
        sizes = tuple(int(n) for n in self.sizes)
        if len(sizes) < 2:
            raise ValueError("a refinement path needs at least two grids")
        for a, b in zip(sizes, sizes[1:]):
            if b != 2 * a:
                raise ValueError(f"grid sizes must double, got {a} then {b}")
        object.__setattr__(self, "sizes", sizes)
        for grid in self.grids:
            steps_for(self.t_final, self.dt(grid))

    @property
    def grids(self) -> list[Grid]:
        return [Grid(n, self.length) for n in self.sizes]

    def dt(self, grid: Grid) -> float:
        return self.dt_coef * grid.h


@dataclass
class ConvergenceRow:
    label: str
    err_l2_phi1: float
    err_l2_phi2: float
    err_linf_phi1: float
    err_linf_phi2: float
    rate_l2_phi1: float = float("nan")
    rate_l2_phi2: float = float("nan")
    rate_linf_phi1: float = float("nan")
    rate_linf_phi2: float = float("nan")

    ERROR_FIELDS = ("err_l2_phi1", "err_l2_phi2", "err_linf_phi1", "err_linf_phi2")

    @property
    def rates(self) -> tuple[float, float, float, float]:
        return (self.rate_l2_phi1, self.rate_l2_phi2, self.rate_linf_phi1, self.rate_linf_phi2)


def convergence_rate(err_coarse: float, err_fine: float) -> float:
    """``log2`` ratio of consecutive errors; NaN when either is at roundoff level."""
    if err_coarse <= 1e-14 or err_fine <= 1e-14:
        return float("nan")
    return math.log2(err_coarse / err_fine)


def rows_from_solutions(path: RefinementPath, solutions, mode: str = "bilinear"):
    rows = []
    grids = path.grids
    for k in range(1, len(grids)):
        (l1, l2), (i1, i2) = cauchy_difference(solutions[k], solutions[k - 1], grids[k], mode)
        rows.append(ConvergenceRow(f"{grids[k-1].n}^2-{grids[k].n}^2", l1, l2, i1, i2))
    for prev, cur in zip(rows, rows[1:]):
        for name in ConvergenceRow.ERROR_FIELDS:
            setattr(cur, name.replace("err_", "rate_"),
                    convergence_rate(getattr(prev, name), getattr(cur, name)))
    return rows


def run_convergence_study(path: RefinementPath, params: ModelParams | None = None,
                          kind: str = "example1", seed: int = 0, a_preset: str = "paper-experiment",
                          solver: SolverParams | None = None, mode: str = "bilinear",
                          progress=None):
    """Run every grid to ``t_final`` and tabulate Cauchy differences.

    Returns ``(rows, solutions)``.
    """
    params = params or ModelParams()
    solutions = []
    for grid in path.grids:
        sp = SchemeParams.from_preset(params, path.dt(grid), a_preset, solver)
        init = build_initial(kind, grid, seed)
        state, _ = run(grid, init, params, sp, path.t_final,
                       diag_stride=max(1, steps_for(path.t_final, sp.dt)),
                       record_fn=_no_record)
        solutions.append(state.current)
        if progress is not None:
            progress(grid, state)
        log.info("grid %d^2 finished at t=%g after %d steps", grid.n, state.time, state.step)
    return rows_from_solutions(path, solutions, mode), solutions


def _no_record(grid, state, params, sp):
    return None


def format_table(rows) -> str:
    """Human-readable table with one column per grid pair."""
    labels = [r.label for r in rows]
    width = max(14, *(len(s) + 2 for s in labels))
    lines = ["Grid sizes".ljust(18) + "".join(s.rjust(width) for s in labels)]
    names = (("l2-error-phi1", "err_l2_phi1", "rate_l2_phi1"),
             ("l2-error-phi2", "err_l2_phi2", "rate_l2_phi2"),
             ("linf-error-phi1", "err_linf_phi1", "rate_linf_phi1"),
             ("linf-error-phi2", "err_linf_phi2", "rate_linf_phi2"))
    for title, err, rate in names:
        lines.append(title.ljust(18) + "".join(f"{getattr(r, err):.4e}".rjust(width) for r in rows))
        cells = []
        for r in rows:
            v = getattr(r, rate)
            cells.append(("-" if math.isnan(v) else f"{v:.2f}").rjust(width))
        lines.append("  rate".ljust(18) + "".join(cells))
    return "\n".join(lines)
