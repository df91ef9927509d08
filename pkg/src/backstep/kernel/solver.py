"""Successive approximation of the backstepping kernel and a-posteriori checks."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from ..coefficients import DerivedConstants, ProblemSpec, compute_constants
from .grid import GoursatField, GoursatGrid, goursat_from_lattice, lattice_from_goursat
from .phi import PhiOperator, build_G0

EPS = np.finfo(float).eps


class ConvergenceError(RuntimeError):
    def __init__(self, message: str, trace: "IterationTrace"):
        super().__init__(message)
        self.trace = trace


class ConstantsError(RuntimeError):
    pass


def envelope(n: int, M: float, r: float = 2.0) -> float:
    """``M**(n+2) r**(n+1) / (n+1)!``, the bound on the n-th increment at ``xi+eta = r``."""
    if M == 0.0 or r == 0.0:
        return 0.0
    return math.exp((n + 2) * math.log(M) + (n + 1) * math.log(r) - math.lgamma(n + 2))


@dataclass(frozen=True)
class IterationRecord:
    n: int
    sup_delta: float
    envelope: float
    # max over nodes of |dG_n| / (M^{n+2} (xi+eta)^{n+1} / (n+1)!), roundoff floor removed
    pointwise_ratio: float


@dataclass
class IterationTrace:
    records: list[IterationRecord] = field(default_factory=list)
    g0_max: float = 0.0

    @property
    def iterations(self) -> int:
        return len(self.records)

    def envelope_violations(self) -> list[IterationRecord]:
        return [r for r in self.records if r.sup_delta > r.envelope]

    def pointwise_violations(self) -> list[IterationRecord]:
        return [r for r in self.records if r.pointwise_ratio > 1.0]


@dataclass(frozen=True)
class ResidualReport:
    interior: float
    diagonal: float
    edge: float
    corner: float
    interior_location: tuple[float, float] | None = None

    def as_dict(self) -> dict:
        return {"interior": self.interior, "diagonal": self.diagonal,
                "edge": self.edge, "corner": self.corner}


@dataclass
class KernelSolution:
    """Kernel on the ``(x, y)`` lattice ``(p/n, q/n)``, NaN above the diagonal."""

    grid: GoursatGrid
    k_values: np.ndarray
    goursat: GoursatField | None = None
    trace: IterationTrace | None = None
    constants: DerivedConstants | None = None
    residual_report: ResidualReport | None = None

    @property
    def x_nodes(self) -> np.ndarray:
        return self.grid.x_nodes

    def k(self, x: float, y: float) -> float:
        """Value at a lattice node (nearest index)."""
        n = self.grid.n
        return float(self.k_values[int(round(x * n)), int(round(y * n))])


@dataclass(frozen=True)
class ControlGains:
    k11: float
    y_nodes: np.ndarray
    kx1: np.ndarray

    @classmethod
    def zero(cls, m: int = 101) -> "ControlGains":
        return cls(0.0, np.linspace(0.0, 1.0, m), np.zeros(m))


def _log_ratio_check(abs_vals, floor, log_scale, log_r, power):
    """max of (|v| - floor)_+ / (scale * r**power), computed in logs."""
    excess = np.maximum(abs_vals - floor, 0.0)
    with np.errstate(divide="ignore"):
        log_ex = np.log(excess)
    log_env = log_scale + power * log_r
    ratios = np.exp(np.clip(log_ex - log_env, -745.0, 700.0))
    ratios[excess == 0.0] = 0.0
    return ratios


def solve_kernel(spec: ProblemSpec, grid: GoursatGrid, tol: float = 1e-10, max_iter: int = 200,
                 constants: DerivedConstants | None = None, residuals: bool = True) -> KernelSolution:
    """Iterate ``G_{n+1} = G_0 + Phi(G_n)`` from ``G_0`` until ``sup |G_{n+1} - G_n| <= tol``."""
    if tol <= 0:
        raise ValueError("tol must be positive")
    if constants is None:
        constants = compute_constants(spec, grid.n + 1)
    M = constants.M
    mask = grid.mask
    phi = PhiOperator(spec, grid)
    G0 = build_G0(spec, grid)

    trace = IterationTrace(g0_max=G0.max_abs())
    if trace.g0_max > M * (1.0 + 1e-12) + 1e-300:
        raise ConstantsError(f"max |G0| = {trace.g0_max!r} exceeds M = {M!r}")

    XI, ETA = np.meshgrid(grid.xi, grid.eta, indexing="ij")
    r = (XI + ETA)[mask]
    pos = r > 0
    log_r = np.log(r[pos])
    log_M = math.log(M) if M > 0 else -math.inf

    G = G0.values
    for it in range(max_iter):
        G_next = G0.values + phi(G).values
        dG = (G_next - G)[mask]
        sup = float(np.max(np.abs(dG)))
        floor = 4.0 * EPS * np.maximum(np.abs(G_next[mask]), np.abs(G[mask]))
        if M > 0:
            ratios = _log_ratio_check(np.abs(dG[pos]), floor[pos],
                                      (it + 2) * log_M - math.lgamma(it + 2), log_r, it + 1)
            pw = float(np.max(ratios)) if ratios.size else 0.0
        else:
            pw = 0.0 if np.all(np.abs(dG) <= floor) else math.inf
        trace.records.append(IterationRecord(it, sup, envelope(it, M), pw))
        G = G_next
        if sup <= tol:
            break
    else:
        raise ConvergenceError(f"no convergence to tol={tol} in {max_iter} iterations", trace)

    field_ = GoursatField(grid, G)
    sol = KernelSolution(grid, lattice_from_goursat(G, grid), field_, trace, constants)
    if residuals:
        sol.residual_report = check_residual(spec, sol)
    return sol


def kernel_from_function(func, grid: GoursatGrid, constants: DerivedConstants | None = None) -> KernelSolution:
    """Sample ``func(x, y)`` on the exact lattice nodes and wrap it as a solution."""
    def on_goursat(xi, eta):
        return np.array([func(0.5 * (a + b), 0.5 * (a - b)) for a, b in zip(xi, eta)])

    G = grid.sample(on_goursat)
    return KernelSolution(grid, lattice_from_goursat(G, grid), GoursatField(grid, G), None, constants)


@dataclass(frozen=True)
class BoundCheck:
    passed: bool
    max_abs: float
    bound: float
    location: tuple[float, float]


def check_bound(sol: KernelSolution, bound: float | None = None) -> BoundCheck:
    """Compare ``max |k|`` over the lattice with ``M exp(2M)``."""
    if bound is None:
        bound = sol.constants.bound
    K = np.abs(sol.k_values)
    K = np.where(np.tri(*K.shape, dtype=bool), K, 0.0)
    K = np.where(np.isnan(K), np.inf, K)  # a NaN inside D is a failure, not a skip
    p, q = (int(v) for v in np.unravel_index(np.argmax(K), K.shape))
    n = sol.grid.n
    max_abs = float(K[p, q])
    return BoundCheck(max_abs <= bound, max_abs, float(bound), (p / n, q / n))


def check_residual(spec: ProblemSpec, sol: KernelSolution) -> ResidualReport:
    """Residuals of the kernel PDE and its boundary conditions.

    Only lattice nodes that coincide with Goursat nodes are used, with step
    ``h = 2/n`` in each direction, so interpolated values never enter a
    difference quotient.  The interior residual skips a one-cell margin.
    """
    n = sol.grid.n
    h = 2.0 / n
    K = sol.k_values
    x = np.arange(n + 1) / n

    # interior: 2 <= q <= p - 2, p <= n - 2, p + q even
    P, Q = np.meshgrid(np.arange(n + 1), np.arange(n + 1), indexing="ij")
    sel = (Q >= 2) & (Q <= P - 2) & (P <= n - 2) & ((P + Q) % 2 == 0)
    Pi, Qi = P[sel], Q[sel]
    interior = 0.0
    where = None
    if Pi.size:
        kxx = (K[Pi + 2, Qi] - 2.0 * K[Pi, Qi] + K[Pi - 2, Qi]) / h**2
        kyy = (K[Pi, Qi + 2] - 2.0 * K[Pi, Qi] + K[Pi, Qi - 2]) / h**2
        rhs = spec.mu(x[Pi], x[Qi]) * K[Pi, Qi] + spec.f(x[Pi], x[Qi])
        if not spec.f.is_zero:
            rhs = rhs + _volterra(spec, K, n)[Pi, Qi]
        res = np.abs(kxx - kyy - rhs)
        idx = int(np.argmax(res))
        interior = float(res[idx])
        where = (Pi[idx] / n, Qi[idx] / n)

    diag = np.diagonal(K)
    diagonal = float(np.max(np.abs(diag - 0.5 * spec.lambda0 * x)))

    pe = np.arange(4, n + 1, 2)
    ky = (-3.0 * K[pe, 0] + 4.0 * K[pe, 2] - K[pe, 4]) / (2.0 * h)
    edge = float(np.max(np.abs(ky))) if pe.size else 0.0

    return ResidualReport(interior, diagonal, edge, float(abs(K[0, 0])), where)


def _volterra(spec: ProblemSpec, K: np.ndarray, n: int) -> np.ndarray:
    """``V[p, q] = int_y^x k(x, z) f(z, y) dz`` by trapezoid on exact nodes (z step 2/n)."""
    h = 2.0 / n
    x = np.arange(n + 1) / n
    V = np.zeros((n + 1, n + 1))
    for p in range(n + 1):
        zs = np.arange(p % 2, p + 1, 2)  # z nodes with the parity of p
        if zs.size < 2:
            continue
        # rows: lower limit q = zs[m]; integrand over zs[m:]
        W = K[p, zs][None, :] * spec.f(x[zs][None, :], x[zs][:, None])
        W = np.triu(W)
        cs = np.cumsum(W[:, ::-1], axis=1)[:, ::-1]  # cs[m, l] = sum_{l' >= l} W[m, l']
        m = np.arange(zs.size)
        V[p, zs] = h * (cs[m, m] - 0.5 * (W[m, m] + W[m, -1]))
    return V


def extract_gains(sol: KernelSolution, m: int = 101) -> ControlGains:
    """``k(1, 1)`` and ``k_x(1, y)`` resampled to ``m`` uniform nodes.

    ``k_x`` uses second-order backward differences on exact nodes with step
    ``2/n``.  For the two nodes nearest ``y = 1`` the backward x-stencil
    leaves D, and ``k_x = D_d k - k_y`` is used with ``D_d`` the derivative
    along ``(1, 1)``.
    """
    if m < 8:
        raise ValueError("need at least 8 output nodes")
    n = sol.grid.n
    h = 2.0 / n
    K = sol.k_values
    q = np.arange(0, n + 1, 2)
    kx = np.empty(q.size)
    far = q <= n - 4
    qf = q[far]
    kx[far] = (3.0 * K[n, qf] - 4.0 * K[n - 2, qf] + K[n - 4, qf]) / (2.0 * h)
    for idx in np.nonzero(~far)[0]:
        qq = q[idx]
        d_diag = (3.0 * K[n, qq] - 4.0 * K[n - 2, qq - 2] + K[n - 4, qq - 4]) / (2.0 * h)
        d_y = (3.0 * K[n, qq] - 4.0 * K[n, qq - 2] + K[n, qq - 4]) / (2.0 * h)
        kx[idx] = d_diag - d_y
    y_out = np.linspace(0.0, 1.0, m)
    return ControlGains(float(K[n, n]), y_out, np.interp(y_out, q / n, kx))


@dataclass(frozen=True)
class ProbeRecord:
    n: int
    ratio: float  # sup |G_n - Gbar| / (M^n (xi+eta)^n / n!), roundoff floor removed
    limit: float
    passed: bool
    witness: tuple[float, float] | None


@dataclass(frozen=True)
class UniquenessReport:
    delta: float
    M: float
    records: tuple[ProbeRecord, ...]
    polish_iterations: int
    fixed_point_residual: float

    @property
    def passed(self) -> bool:
        return all(r.passed for r in self.records)


def polish(phi: PhiOperator, G0: np.ndarray, G: np.ndarray, max_extra: int = 200):
    """Continue the iteration until increments stop shrinking (roundoff level)."""
    mask = phi.grid.mask
    last = math.inf
    for k in range(max_extra):
        G_next = G0 + phi(G).values
        sup = float(np.max(np.abs((G_next - G)[mask])))
        G = G_next
        if sup == 0.0 or sup >= last or sup <= 8 * EPS * max(1.0, float(np.max(np.abs(G[mask])))):
            return G, k + 1
        last = sup
    return G, max_extra


def uniqueness_probe(spec: ProblemSpec, grid: GoursatGrid, sol: KernelSolution, n_max: int = 12,
                     rtol: float = 1e-8) -> UniquenessReport:
    """Check ``|G_n - Gbar| <= delta M^n (xi+eta)^n / n!`` for ``n <= n_max``.

    ``Gbar`` is the converged field, first polished to a roundoff-level fixed
    point, and ``delta = max |Phi(Gbar)|``.  Differences below a few ulps of
    the compared values are treated as zero.
    """
    M = sol.constants.M
    mask = grid.mask
    phi = PhiOperator(spec, grid)
    G0 = build_G0(spec, grid).values
    Gbar, extra = polish(phi, G0, sol.goursat.values)
    phi_bar = phi(Gbar).values
    delta = float(np.max(np.abs(phi_bar[mask])))
    fp_res = float(np.max(np.abs((G0 + phi_bar - Gbar)[mask])))

    XI, ETA = np.meshgrid(grid.xi, grid.eta, indexing="ij")
    r = (XI + ETA)[mask]
    coords = np.stack([XI[mask], ETA[mask]], axis=1)
    pos = r > 0
    log_r = np.log(r[pos])
    records = []
    G = G0
    for it in range(n_max + 1):
        diff = np.abs((G - Gbar)[mask])
        floor = 4.0 * EPS * np.maximum(np.abs(G[mask]), np.abs(Gbar[mask]))
        limit = delta * (1.0 + rtol)
        if M > 0 and delta > 0:
            ratios = np.zeros(diff.size)
            ratios[pos] = _log_ratio_check(diff[pos], floor[pos], it * math.log(M) - math.lgamma(it + 1),
                                           log_r, it)
            # only the corner xi = eta = 0, where the envelope is 0 for n >= 1
            over = diff[~pos] > floor[~pos]
            ratios[~pos] = np.where(over, diff[~pos] if it == 0 else math.inf, 0.0)
        else:
            ratios = np.where(diff > floor, math.inf, 0.0)
        k = int(np.argmax(ratios))
        ratio = float(ratios[k])
        ok = ratio <= limit
        records.append(ProbeRecord(it, ratio, limit, ok, None if ok else tuple(map(float, coords[k]))))
        G = G0 + phi(G).values
    return UniquenessReport(delta, M, tuple(records), extra, fp_res)
