"""Periodic staggered-grid operators on a uniform square mesh.

Cell-centered fields are ``(n, n)`` float64 arrays indexed ``[i, j]`` with
``i`` along x (axis 0) and ``j`` along y (axis 1).  Cell ``i`` (zero-based)
has its center at ``x_i = (i + 1/2) h``, i.e. the one-based point
``p(i+1) = (i + 1/2) h``.

Face fields are stored with the same ``(n, n)`` shape: ``fx[i, j]`` lives at
the east face ``(i + 1/2, j)`` and ``fy[i, j]`` at the north face
``(i, j + 1/2)``.

Operators (all with periodic wrap)::

    A_x u[i+1/2] = (u[i+1] + u[i]) / 2      D_x u[i+1/2] = (u[i+1] - u[i]) / h
    a_x f[i]     = (f[i+1/2] + f[i-1/2]) / 2  d_x f[i]   = (f[i+1/2] - f[i-1/2]) / h
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import NamedTuple

import numpy as np


class EdgeField(NamedTuple):
    """Face-centered vector field; ``x`` on east faces, ``y`` on north faces."""

    x: np.ndarray
    y: np.ndarray


@dataclass(frozen=True)
class Grid:
    """Uniform periodic ``n x n`` grid on ``[0, length]^2``."""

    n: int
    length: float

    def __post_init__(self):
        if int(self.n) != self.n or self.n < 4:
            raise ValueError(f"grid needs an integer n >= 4, got {self.n!r}")
        if not (self.length > 0 and np.isfinite(self.length)):
            raise ValueError(f"domain length must be positive, got {self.length!r}")
        object.__setattr__(self, "n", int(self.n))
        object.__setattr__(self, "length", float(self.length))

    @property
    def h(self) -> float:
        return self.length / self.n

    @property
    def shape(self) -> tuple[int, int]:
        return (self.n, self.n)

    @property
    def area(self) -> float:
        return self.length**2

    def centers(self) -> tuple[np.ndarray, np.ndarray]:
        """Cell-center coordinates as ``(X, Y)`` meshes with ``ij`` indexing."""
        c = (np.arange(self.n) + 0.5) * self.h
        return np.meshgrid(c, c, indexing="ij")

    def zeros(self) -> np.ndarray:
        return np.zeros(self.shape)

    def check(self, u: np.ndarray, name: str = "field") -> np.ndarray:
        u = np.asarray(u, dtype=np.float64)
        if u.shape != self.shape:
            raise ValueError(f"{name} has shape {u.shape}, grid expects {self.shape}")
        if not np.all(np.isfinite(u)):
            bad = tuple(int(k) for k in np.argwhere(~np.isfinite(u))[0])
            raise ValueError(f"{name} has a non-finite entry at {bad}")
        return u

    # -- cell -> face ------------------------------------------------------

    def diff_x(self, u: np.ndarray) -> np.ndarray:
        return (np.roll(u, -1, axis=0) - u) / self.h

    def diff_y(self, u: np.ndarray) -> np.ndarray:
        return (np.roll(u, -1, axis=1) - u) / self.h

    def avg_x(self, u: np.ndarray) -> np.ndarray:
        return 0.5 * (np.roll(u, -1, axis=0) + u)

    def avg_y(self, u: np.ndarray) -> np.ndarray:
        return 0.5 * (np.roll(u, -1, axis=1) + u)

    # -- face -> cell ------------------------------------------------------

    def diff_back_x(self, f: np.ndarray) -> np.ndarray:
        return (f - np.roll(f, 1, axis=0)) / self.h

    def diff_back_y(self, f: np.ndarray) -> np.ndarray:
        return (f - np.roll(f, 1, axis=1)) / self.h

    def avg_back_x(self, f: np.ndarray) -> np.ndarray:
        return 0.5 * (f + np.roll(f, 1, axis=0))

    def avg_back_y(self, f: np.ndarray) -> np.ndarray:
        return 0.5 * (f + np.roll(f, 1, axis=1))

    # -- composite operators -----------------------------------------------

    def gradient(self, u: np.ndarray) -> EdgeField:
        return EdgeField(self.diff_x(u), self.diff_y(u))

    def divergence(self, f: EdgeField) -> np.ndarray:
        return self.diff_back_x(f.x) + self.diff_back_y(f.y)

    def laplacian(self, u: np.ndarray) -> np.ndarray:
        return self.divergence(self.gradient(u))

    def weighted_divergence(self, coef: EdgeField, f: EdgeField,
                            require_positive: bool = False) -> np.ndarray:
        """``d_x(D f^x) + d_y(D f^y)`` for a face coefficient ``D``."""
        if require_positive:
            for comp, arr in (("x", coef.x), ("y", coef.y)):
                bad = np.argwhere(arr <= 0)
                if bad.size:
                    i, j = bad[0]
                    raise ValueError(
                        f"non-positive {comp}-face coefficient {arr[i, j]!r} at "
                        f"face {(int(i), int(j))} ({len(bad)} faces in total)")
        return self.divergence(EdgeField(coef.x * f.x, coef.y * f.y))

    def laplacian_eigenvalues(self) -> np.ndarray:
        """Eigenvalues of ``-Delta_h`` on the rfft2 frequency layout ``(n, n//2+1)``."""
        n, h = self.n, self.h
        sx = np.sin(np.pi * np.arange(n) / n) ** 2
        sy = np.sin(np.pi * np.arange(n // 2 + 1) / n) ** 2
        return (4.0 / h**2) * (sx[:, None] + sy[None, :])

    # -- inner products and norms ------------------------------------------

    def inner(self, u: np.ndarray, v: np.ndarray) -> float:
        """Cell inner product ``h^2 sum u v``."""
        return float(self.h**2 * np.sum(u * v))

    def inner_edge(self, f: EdgeField, g: EdgeField) -> float:
        """``[f, g] = <a_x(f^x g^x), 1> + <a_y(f^y g^y), 1>``."""
        one = 1.0
        return (self.inner(self.avg_back_x(f.x * g.x), one)
                + self.inner(self.avg_back_y(f.y * g.y), one))

    def mean(self, u: np.ndarray) -> float:
        return float(np.mean(u))

    def norm2(self, u: np.ndarray) -> float:
        return float(np.sqrt(self.inner(u, u)))

    def normp(self, u: np.ndarray, p: float) -> float:
        if p < 1:
            raise ValueError(f"l^p norm needs p >= 1, got {p}")
        if np.isinf(p):
            return self.norm_inf(u)
        return float(self.inner(np.abs(u) ** p, 1.0) ** (1.0 / p))

    def norm_inf(self, u: np.ndarray) -> float:
        return float(np.max(np.abs(u)))

    def grad_norm2(self, u: np.ndarray) -> float:
        g = self.gradient(u)
        return float(np.sqrt(self.inner_edge(g, g)))

    def grad_normp(self, u: np.ndarray, p: float) -> float:
        if p < 1:
            raise ValueError(f"l^p norm needs p >= 1, got {p}")
        g = self.gradient(u)
        total = (self.inner(self.avg_back_x(np.abs(g.x) ** p), 1.0)
                 + self.inner(self.avg_back_y(np.abs(g.y) ** p), 1.0))
        return float(total ** (1.0 / p))

    def h1_norm(self, u: np.ndarray) -> float:
        return float(np.sqrt(self.norm2(u) ** 2 + self.grad_norm2(u) ** 2))
