"""Discrete H^{-1} machinery on mean-zero cell fields.

The constant-coefficient operator ``L = -Delta_h`` is diagonalized by the
real 2-D DFT; its eigenvalues are ``(4/h^2)(sin^2(pi k/n) + sin^2(pi l/n))``.
"""

from __future__ import annotations

import os
from functools import lru_cache

import numpy as np
import scipy.fft

from .grid import EdgeField, Grid


def fft_workers() -> int:
    """Thread cap for transforms, from ``MMC_THREADS`` (default 1)."""
    raw = os.environ.get("MMC_THREADS", "1")
    try:
        value = int(raw)
    except ValueError:
        raise ValueError(f"MMC_THREADS must be a positive integer, got {raw!r}") from None
    if value < 1:
        raise ValueError(f"MMC_THREADS must be a positive integer, got {raw!r}")
    return value


def rfft2(u: np.ndarray) -> np.ndarray:
    return scipy.fft.rfft2(u, workers=fft_workers())


def irfft2(uh: np.ndarray, n: int) -> np.ndarray:
    return scipy.fft.irfft2(uh, s=(n, n), workers=fft_workers())


@lru_cache(maxsize=32)
def _inverse_symbol(n: int, length: float) -> np.ndarray:
    lam = Grid(n, length).laplacian_eigenvalues()
    inv = np.zeros_like(lam)
    inv[lam > 0] = 1.0 / lam[lam > 0]
    inv.setflags(write=False)
    return inv


def center(u: np.ndarray) -> tuple[np.ndarray, float]:
    """Return ``(u - mean(u), mean(u))``."""
    m = float(np.mean(u))
    return u - m, m


def inv_laplacian(grid: Grid, phi: np.ndarray) -> np.ndarray:
    """Mean-zero solution ``psi`` of ``-Delta_h psi = phi - mean(phi)``."""
    phi_hat = rfft2(phi)
    psi = irfft2(phi_hat * _inverse_symbol(grid.n, grid.length), grid.n)
    return psi - np.mean(psi)


def inner_m1h(grid: Grid, phi1: np.ndarray, phi2: np.ndarray) -> float:
    """``<phi1, L^{-1} phi2>`` after re-centering both arguments."""
    a, _ = center(phi1)
    b, _ = center(phi2)
    return grid.inner(a, inv_laplacian(grid, b))


def norm_m1h(grid: Grid, phi: np.ndarray) -> float:
    return float(np.sqrt(max(inner_m1h(grid, phi, phi), 0.0)))


def pcg(apply_a, b, apply_m=None, inner=None, tol=1e-11, maxiter=500, x0=None):
    """Preconditioned conjugate gradients for an SPD operator.

    ``apply_a``/``apply_m`` map a vector-like object to one of the same kind;
    vectors must support ``+``, ``-`` and scalar ``*``.  ``inner`` defaults to
    the Euclidean dot product of numpy arrays.

    Returns ``(x, info)`` where ``info`` holds ``iterations``, ``residual``
    (relative, unpreconditioned), ``converged`` and ``negative_curvature``.
    """
    if inner is None:
        inner = lambda u, v: float(np.vdot(u, v))  # noqa: E731
    if apply_m is None:
        apply_m = lambda r: r  # noqa: E731
    bnorm = np.sqrt(inner(b, b))
    info = {"iterations": 0, "residual": 0.0, "converged": True,
            "negative_curvature": False}
    if bnorm == 0.0:
        return (b * 0.0 if x0 is None else x0), info
    if x0 is None:
        x = b * 0.0
        r = b
    else:
        x = x0
        r = b - apply_a(x0)
    z = apply_m(r)
    p = z
    rz = inner(r, z)
    for k in range(1, maxiter + 1):
        ap = apply_a(p)
        curv = inner(p, ap)
        if curv <= 0.0:
            info["negative_curvature"] = True
            info["converged"] = False
            info["iterations"] = k - 1
            info["residual"] = float(np.sqrt(inner(r, r)) / bnorm)
            return x, info
        step = rz / curv
        x = x + step * p
        r = r - step * ap
        res = np.sqrt(inner(r, r)) / bnorm
        if res <= tol:
            info["iterations"] = k
            info["residual"] = float(res)
            return x, info
        z = apply_m(r)
        rz_new = inner(r, z)
        p = z + (rz_new / rz) * p
        rz = rz_new
    info["iterations"] = maxiter
    info["residual"] = float(np.sqrt(inner(r, r)) / bnorm)
    info["converged"] = False
    return x, info


def inv_laplacian_cg(grid: Grid, phi: np.ndarray, tol: float = 1e-12,
                     maxiter: int | None = None) -> np.ndarray:
    """Unpreconditioned CG solve of ``-Delta_h psi = phi - mean(phi)``.

    Independent of the transform path; used for cross-checks.
    """
    rhs, _ = center(phi)

    def apply(v):
        out = -grid.laplacian(v)
        return out - np.mean(out)

    psi, info = pcg(apply, rhs, tol=tol, maxiter=maxiter or 10 * grid.n**2)
    if not info["converged"]:
        raise RuntimeError(f"CG did not converge: {info}")
    return psi - np.mean(psi)


def inv_weighted(grid: Grid, coef: EdgeField, phi: np.ndarray,
                 tol: float = 1e-11, maxiter: int = 1000) -> np.ndarray:
    """Solve ``-div_h(D grad_h psi) = phi - mean(phi)`` for a positive face field ``D``.

    CG preconditioned with the constant-coefficient inverse scaled by the
    mean of ``D``.
    """
    if np.any(coef.x <= 0) or np.any(coef.y <= 0):
        raise ValueError("face coefficient must be strictly positive")
    rhs, _ = center(phi)
    scale = 0.5 * (np.mean(coef.x) + np.mean(coef.y))

    def apply(v):
        out = -grid.weighted_divergence(coef, grid.gradient(v))
        return out - np.mean(out)

    def precond(r):
        return inv_laplacian(grid, r) / scale

    psi, info = pcg(apply, rhs, precond, grid.inner, tol=tol, maxiter=maxiter)
    if not info["converged"]:
        raise RuntimeError(f"weighted H^-1 solve did not converge: {info}")
    return psi - np.mean(psi)
