"""Figures written next to the CSV output of ``run`` and ``converge``.

Figures are built on :class:`matplotlib.figure.Figure` directly so no
interactive backend or global pyplot state is involved.
"""

from __future__ import annotations

import math
from pathlib import Path

import matplotlib as mpl
import numpy as np
from matplotlib.figure import Figure
from matplotlib.ticker import MaxNLocator

STYLE = {
    "font.size": 9,
    "axes.labelsize": 9,
    "legend.fontsize": 8,
    "xtick.labelsize": 8,
    "ytick.labelsize": 8,
}


styled = mpl.rc_context(STYLE)


def _figure(ncols=1, width=4.0, height=3.0):
    fig = Figure(figsize=(width * ncols, height), layout="constrained")
    axes = np.atleast_1d(fig.subplots(1, ncols))
    for ax in axes:
        ax.xaxis.set_major_locator(MaxNLocator(5))
    return fig, axes


def _save(fig, path) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fig.savefig(path, dpi=150)
    return path


@styled
def plot_energy(records, path):
    t = [r.time for r in records]
    fig, (ax,) = _figure()
    ax.plot(t, [r.energy_gh for r in records], label=r"$G_h$")
    ax.plot(t, [r.energy_e_mod for r in records], "--", label=r"$E_h^{n+1,n}$")
    f = [r.energy_f_mod for r in records]
    if not all(math.isnan(v) for v in f):
        ax.plot(t, f, ":", label=r"$F_h^{n+1}$")
    ax.set_xlabel("time")
    ax.set_ylabel("energy")
    ax.legend()
    return _save(fig, path)


@styled
def plot_mass(records, path):
    t = [r.time for r in records]
    m1, m2 = records[0].mass1, records[0].mass2
    fig, axes = _figure(2)
    for ax, vals, name in ((axes[0], [r.mass1 - m1 for r in records], r"$\phi_1$"),
                           (axes[1], [r.mass2 - m2 for r in records], r"$\phi_2$")):
        ax.plot(t, vals)
        ax.set_xlabel("time")
        ax.set_ylabel(f"mass error of {name}")
        ax.ticklabel_format(axis="y", style="sci", scilimits=(0, 0))
    return _save(fig, path)


@styled
def plot_extrema(records, path):
    t = [r.time for r in records]
    fig, axes = _figure(3)
    series = (
        (r"$\phi_1$", [r.min1 for r in records], [r.max1 for r in records]),
        (r"$\phi_2$", [r.min2 for r in records], [r.max2 for r in records]),
        (r"$\phi_1+\phi_2$", None, [1.0 - r.min_sum_complement for r in records]),
    )
    for ax, (name, lo, hi) in zip(axes, series):
        if lo is not None:
            ax.plot(t, lo, label="min")
        ax.plot(t, hi, label="max")
        ax.set_xlabel("time")
        ax.set_title(name)
        ax.legend()
    return _save(fig, path)


@styled
def plot_phases(pair, length, path, title=None):
    fig, axes = _figure(3, width=3.0, height=2.8)
    extent = (0, length, 0, length)
    for ax, field, name in zip(axes, (pair.phi1, pair.phi2, pair.phi3),
                               (r"$\phi_1$", r"$\phi_2$", r"$\phi_3$")):
        im = ax.imshow(field.T, origin="lower", extent=extent, cmap="viridis")
        ax.set_title(name)
        fig.colorbar(im, ax=ax, shrink=0.8)
    if title:
        fig.suptitle(title)
    return _save(fig, path)


@styled
def plot_convergence(rows, path, sizes=None):
    """Log-log Cauchy errors against the fine-grid size of each pair."""
    fine = [int(r.label.split("-")[1].split("^")[0]) for r in rows] if sizes is None else sizes
    fig, (ax,) = _figure(width=4.5, height=3.4)
    for attr, label, marker in (("err_l2_phi1", r"$\ell^2$, $\phi_1$", "o"),
                                ("err_l2_phi2", r"$\ell^2$, $\phi_2$", "s"),
                                ("err_linf_phi1", r"$\ell^\infty$, $\phi_1$", "^"),
                                ("err_linf_phi2", r"$\ell^\infty$, $\phi_2$", "v")):
        ax.loglog(fine, [getattr(r, attr) for r in rows], marker=marker, label=label)
    ref = np.array(fine, dtype=float)
    first = rows[0].err_l2_phi1
    ax.loglog(ref, first * (ref[0] / ref) ** 2, "k--", lw=0.8, label="slope 2")
    ax.set_xlabel("fine grid size N")
    ax.set_ylabel("Cauchy difference")
    ax.legend()
    return _save(fig, path)


def run_report(records, outdir, final_pair=None, length=None) -> list[Path]:
    """Write the standard run figures into ``outdir``; returns their paths."""
    outdir = Path(outdir)
    paths = [plot_energy(records, outdir / "energy.png"),
             plot_mass(records, outdir / "mass.png"),
             plot_extrema(records, outdir / "extrema.png")]
    if final_pair is not None and length is not None:
        paths.append(plot_phases(final_pair, length, outdir / "phases_final.png",
                                 title=f"t = {records[-1].time:g}"))
    return paths
