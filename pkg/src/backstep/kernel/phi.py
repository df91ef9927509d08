"""The integral operator of the successive-approximation scheme.

For a field H on the Goursat triangle,

    Phi_H(xi, eta) = 1/4 int_eta^xi int_0^eta mu H ds dtau
                   + 1/2 int_0^eta int_0^tau mu H ds dtau
                   + 1/4 int_eta^xi int_0^eta int_z^{z+eta-s} Hhat dtau ds dz
                   + 1/2 int_0^eta int_0^z int_z^{2z-s} Hhat dtau ds dz

with ``mu = mu(x, y)`` evaluated at ``x = (tau+s)/2``, ``y = (tau-s)/2`` and
``Hhat(tau, s, z) = f((tau-s)/2, z-(tau+s)/2) H(tau, s)``.  All integrals
are composite trapezoid rules on the lattice.
"""

from __future__ import annotations

import numpy as np

from ..coefficients import ProblemSpec
from .grid import GoursatField, GoursatGrid


def _trap(values, h):
    return float(np.trapezoid(values, dx=h)) if len(values) > 1 else 0.0


def build_G0(spec: ProblemSpec, grid: GoursatGrid) -> GoursatField:
    """Inhomogeneous part ``(lambda0/4)(xi+eta)`` plus the two integrals of f."""
    n, J, h = grid.n, grid.J, grid.h
    xi = grid.xi
    G0 = grid.empty()
    # f((tau+s)/2, (tau-s)/2) on the lattice, columns s = eta_b
    F = grid.sample(lambda a, b: spec.f(0.5 * (a + b), 0.5 * (a - b)))
    F = np.where(grid.mask, F, 0.0)
    csb = np.cumsum(F, axis=1)
    R = h * (csb - 0.5 * (F[:, :1] + F))  # R[a, j] = int_0^{eta_j} F(tau_a, s) ds
    R = np.where(grid.mask, R, 0.0)
    csa = np.cumsum(R, axis=0)
    Jdx = np.arange(J + 1)
    first = h * (csa - 0.5 * (R[Jdx, Jdx][None, :] + R))
    diag = R[Jdx, Jdx]
    second = h * (np.cumsum(diag) - 0.5 * (diag[0] + diag))
    G0 = 0.25 * spec.lambda0 * (xi[:, None] + grid.eta[None, :]) + 0.25 * first + 0.5 * second[None, :]
    G0 = np.where(grid.mask, G0, np.nan)
    # the f-integrals vanish identically on eta = 0
    G0[:, 0] = 0.25 * spec.lambda0 * xi
    return GoursatField(grid, G0)


class PhiOperator:
    """Prefix-sum evaluation of Phi in O(n^3) operations.

    ``mu`` is tabulated on the Goursat nodes and ``f`` on the half-step
    lattice ``(p/n, q/n)``, the only points the triple integrals touch.
    The inner ``tau`` integral of the triple terms grows by one cell per
    ``eta`` step, so it is carried across steps instead of recomputed.
    """

    def __init__(self, spec: ProblemSpec, grid: GoursatGrid):
        self.spec = spec
        self.grid = grid
        self.mu = np.where(grid.mask, grid.sample(spec.mu_goursat), 0.0)
        s = np.arange(grid.n + 1) / grid.n
        self.f_half = np.asarray(spec.f(s[:, None], s[None, :]), dtype=float)
        self.has_f = not spec.f.is_zero

    def __call__(self, H) -> GoursatField:
        values = H.values if isinstance(H, GoursatField) else np.asarray(H)
        grid = self.grid
        n, J, h = grid.n, grid.J, grid.h
        mask = grid.mask
        H0 = np.where(mask, values, 0.0)
        jd = np.arange(J + 1)

        F = self.mu * H0
        R = h * (np.cumsum(F, axis=1) - 0.5 * (F[:, :1] + F))
        R = np.where(mask, R, 0.0)
        total = 0.25 * h * (np.cumsum(R, axis=0) - 0.5 * (R[jd, jd][None, :] + R))
        d = R[jd, jd]
        total += (0.5 * h * (np.cumsum(d) - 0.5 * (d[0] + d)))[None, :]

        if self.has_f:
            Q = self._triple_inner(H0)
            Q = np.where(mask, Q, 0.0)
            total += 0.25 * h * (np.cumsum(Q, axis=0) - 0.5 * (Q[jd, jd][None, :] + Q))
            d = Q[jd, jd]
            total += (0.5 * h * (np.cumsum(d) - 0.5 * (d[0] + d)))[None, :]

        return GoursatField(grid, np.where(mask, total, np.nan))

    def _triple_inner(self, H0: np.ndarray) -> np.ndarray:
        """``Q[c, j] = int_0^{eta_j} int_{z_c}^{z_c+eta_j-s} Hhat(tau, s, z_c) dtau ds``."""
        n, J, h = self.grid.n, self.grid.J, self.grid.h
        Fh = self.f_half
        T = np.zeros((n + 1, J + 1))  # T[c, b] = inner tau-integral at the current eta
        Q = np.zeros((n + 1, J + 1))
        for j in range(J):
            cs = np.arange(j + 1, n - j)
            if cs.size == 0:
                break
            bs = np.arange(j + 1)
            # extend tau from z_c + eta_j - s_b to one cell further
            a1 = cs[:, None] + (j - bs)[None, :]
            p1 = a1 - bs[None, :]
            q1 = (cs - j)[:, None]
            g1 = Fh[p1, q1] * H0[a1, bs[None, :]]
            g2 = Fh[p1 + 1, q1 - 1] * H0[a1 + 1, bs[None, :]]
            T[cs, : j + 1] += 0.5 * h * (g1 + g2)
            Tc = T[cs, : j + 2]
            Q[cs, j + 1] = h * (Tc.sum(axis=1) - 0.5 * Tc[:, 0])
        return Q


def apply_phi_fast(spec: ProblemSpec, grid: GoursatGrid, H) -> GoursatField:
    return PhiOperator(spec, grid)(H)


def apply_phi(spec: ProblemSpec, grid: GoursatGrid, H) -> GoursatField:
    """Reference evaluation of Phi by nested quadrature loops, O(n^5).

    Kept deliberately independent of :class:`PhiOperator`: coefficients are
    evaluated at each quadrature point and every integral is formed from
    scratch.  Use for small grids only.
    """
    values = H.values if isinstance(H, GoursatField) else np.asarray(H)
    n, J, h = grid.n, grid.J, grid.h
    out = grid.empty()

    def mu_H(a_idx, b_idx):
        tau, s = a_idx * h, b_idx * h
        return spec.mu_goursat(tau, s) * values[a_idx, b_idx]

    def hhat(a_idx, b, c):
        tau, s, z = a_idx * h, b * h, c * h
        return spec.f(0.5 * (tau - s), z - 0.5 * (tau + s)) * values[a_idx, b]

    def inner_triple(c, upper_eta):
        # int_0^{upper_eta} int_{z_c}^{z_c + upper_eta - s} Hhat dtau ds
        col = [_trap(hhat(np.arange(c, c + upper_eta - b + 1), b, c), h)
               for b in range(upper_eta + 1)]
        return _trap(np.array(col), h)

    for i in range(n + 1):
        for j in range(J + 1):
            if not (j <= i <= n - j):
                continue
            bj = np.arange(j + 1)
            first = _trap(np.array([_trap(mu_H(np.full(j + 1, a), bj), h) for a in range(j, i + 1)]), h)
            second = _trap(np.array([_trap(mu_H(np.full(a + 1, a), np.arange(a + 1)), h)
                                     for a in range(j + 1)]), h)
            value = 0.25 * first + 0.5 * second
            if not spec.f.is_zero:
                third = _trap(np.array([inner_triple(c, j) for c in range(j, i + 1)]), h)
                fourth = _trap(np.array([inner_triple(c, c) for c in range(j + 1)]), h)
                value += 0.25 * third + 0.5 * fourth
            out[i, j] = value
    return GoursatField(grid, out)
