"""Lattices for the kernel in original ``(x, y)`` and characteristic ``(xi, eta)`` variables."""

from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property

import numpy as np

from ..coefficients import DomainError


class GridError(ValueError):
    pass


def to_goursat(x: float, y: float) -> tuple[float, float]:
    if not (0.0 <= y <= x <= 1.0):
        raise DomainError(f"(x, y) = ({x}, {y}) is outside 0 <= y <= x <= 1")
    return x + y, x - y


def from_goursat(xi: float, eta: float) -> tuple[float, float]:
    if not (0.0 <= eta <= 1.0 and eta <= xi <= 2.0 - eta):
        raise DomainError(f"(xi, eta) = ({xi}, {eta}) is outside eta in [0,1], xi in [eta, 2-eta]")
    return 0.5 * (xi + eta), 0.5 * (xi - eta)


@dataclass(frozen=True)
class GoursatGrid:
    """Uniform lattice ``xi_i = i h``, ``eta_j = j h`` with ``h = 2 / n``.

    Both axes share the step, so the lines ``xi = eta`` and ``xi = 2 - eta``
    pass through nodes and every integration limit of the integral equation
    is a node.
    """

    n: int

    def __post_init__(self):
        if int(self.n) != self.n:
            raise GridError("grid size must be an integer")
        if self.n % 2:
            raise GridError(f"grid must be even (got n={self.n})")
        if self.n < 8:
            raise GridError(f"grid needs n >= 8 (got n={self.n})")

    @property
    def h(self) -> float:
        return 2.0 / self.n

    @property
    def J(self) -> int:
        return self.n // 2

    @cached_property
    def xi(self) -> np.ndarray:
        return np.arange(self.n + 1) * self.h

    @cached_property
    def eta(self) -> np.ndarray:
        return np.arange(self.J + 1) * self.h

    @cached_property
    def mask(self) -> np.ndarray:
        i = np.arange(self.n + 1)[:, None]
        j = np.arange(self.J + 1)[None, :]
        return (j <= i) & (i <= self.n - j)

    @property
    def x_nodes(self) -> np.ndarray:
        """Nodes of the matching ``(x, y)`` lattice, step ``h / 2``."""
        return np.arange(self.n + 1) / self.n

    def empty(self) -> np.ndarray:
        out = np.full((self.n + 1, self.J + 1), np.nan)
        return out

    def sample(self, func) -> np.ndarray:
        """Evaluate ``func(xi, eta)`` on valid nodes; NaN elsewhere."""
        XI, ETA = np.meshgrid(self.xi, self.eta, indexing="ij")
        out = self.empty()
        out[self.mask] = func(XI[self.mask], ETA[self.mask])
        return out


@dataclass
class GoursatField:
    grid: GoursatGrid
    values: np.ndarray

    def __post_init__(self):
        shape = (self.grid.n + 1, self.grid.J + 1)
        if self.values.shape != shape:
            raise ValueError(f"field shape {self.values.shape} does not match grid {shape}")

    @property
    def valid(self) -> np.ndarray:
        return self.values[self.grid.mask]

    def max_abs(self) -> float:
        return float(np.max(np.abs(self.valid)))


def lattice_from_goursat(G: np.ndarray, grid: GoursatGrid) -> np.ndarray:
    """Map ``G`` to ``k`` on the ``(x, y)`` lattice with step ``1/n``.

    Node ``(p, q)`` is ``(x, y) = (p/n, q/n)``.  When ``p + q`` is even the
    node coincides with Goursat node ``((p+q)/2, (p-q)/2)``.  The others sit
    at cell centres of the Goursat lattice and take the bilinear value, which
    is the mean of the four corners; on the edges ``y = 0`` and ``x = 1`` a
    corner leaves the domain and the mean of the opposite in-domain pair is
    used instead.
    """
    n = grid.n
    K = np.full((n + 1, n + 1), np.nan)
    p = np.arange(n + 1)[:, None]
    q = np.arange(n + 1)[None, :]
    inside = q <= p
    exact = inside & ((p + q) % 2 == 0)
    P, Q = np.nonzero(exact)
    K[P, Q] = G[(P + Q) // 2, (P - Q) // 2]

    P, Q = np.nonzero(inside & ~exact)
    out = np.empty(P.size)
    interior = (Q > 0) & (P < n)
    Pi, Qi = P[interior], Q[interior]
    out[interior] = 0.25 * (K[Pi - 1, Qi] + K[Pi + 1, Qi] + K[Pi, Qi - 1] + K[Pi, Qi + 1])
    bottom = Q == 0
    out[bottom] = 0.5 * (K[P[bottom] - 1, 0] + K[P[bottom] + 1, 0])
    right = P == n
    out[right] = 0.5 * (K[n, Q[right] - 1] + K[n, Q[right] + 1])
    K[P, Q] = out
    return K


def goursat_from_lattice(K: np.ndarray, grid: GoursatGrid) -> np.ndarray:
    """Inverse of :func:`lattice_from_goursat` on exact nodes."""
    G = grid.empty()
    I, Jj = np.nonzero(grid.mask)
    G[I, Jj] = K[I + Jj, I - Jj]
    return G
