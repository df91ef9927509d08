"""Closed-loop simulation of the reaction-diffusion plant under boundary feedback.

Diffusion is advanced by Crank-Nicolson, reaction and the Volterra term
explicitly.  Both Neumann conditions use ghost nodes, so the control
``U = -k(1,1) w(1) - int_0^1 k_x(1,y) w(y) dy`` enters through the ghost
value at ``x = 1``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.linalg import solve_banded

from .coefficients import FunctionDescriptor, ProblemSpec, compute_constants
from .kernel.solver import ControlGains

SCHEME = "CN-diffusion/explicit-reaction"


class BlowUpError(RuntimeError):
    def __init__(self, t: float):
        super().__init__(f"non-finite state at t={t!r}")
        self.t = t


class SimConfigError(ValueError):
    pass


class CompatibilityError(RuntimeError):
    pass


@dataclass(frozen=True)
class SimConfig:
    nx: int = 200
    dt: float = 1e-3
    t_end: float = 5.0
    p_list: tuple[float, ...] = (1.0, 2.0, math.inf)
    burn_in: float | None = None
    output_interval: float | None = None
    w1p: bool = True
    scheme: str = SCHEME

    def __post_init__(self):
        if self.nx < 4:
            raise SimConfigError("nx must be >= 4")
        if not self.dt > 0 or not self.t_end > 0:
            raise SimConfigError("dt and t_end must be positive")
        if any(not p >= 1 for p in self.p_list):
            raise SimConfigError("every p must satisfy p >= 1")
        if self.burn_in is not None and not 0 <= self.burn_in < self.t_end:
            raise SimConfigError("burn_in must lie in [0, t_end)")
        if self.scheme != SCHEME:
            raise SimConfigError(f"unsupported scheme {self.scheme!r}")

    @property
    def fit_start(self) -> float:
        return 0.1 * self.t_end if self.burn_in is None else self.burn_in

    @property
    def steps(self) -> int:
        return int(round(self.t_end / self.dt))

    @property
    def output_every(self) -> int:
        if self.output_interval is None:
            return max(1, self.steps // 500)
        return max(1, int(round(self.output_interval / self.dt)))


def stability_limit(spec: ProblemSpec, t_end: float, samples: int = 101) -> float:
    """Largest admissible dt, ``0.5 / (sup|c| + f_bar + 1)`` on the sampled window."""
    xs = np.linspace(0.0, 1.0, samples)
    ts = np.linspace(0.0, t_end, samples)
    c_abs = float(np.max(np.abs(spec.c(xs[:, None], ts[None, :]))))
    f_bar = compute_constants(spec, samples, t_end).f_bar
    return 0.5 / (c_abs + f_bar + 1.0)


def check_config(spec: ProblemSpec, cfg: SimConfig) -> None:
    limit = stability_limit(spec, cfg.t_end)
    if cfg.dt > limit:
        raise SimConfigError(f"dt={cfg.dt!r} exceeds the explicit-reaction limit {limit!r}")


@dataclass
class SimState:
    t: float
    w: np.ndarray


def trapezoid_weights(nx: int) -> np.ndarray:
    wts = np.full(nx + 1, 1.0 / nx)
    wts[0] = wts[-1] = 0.5 / nx
    return wts


def lp_norm(w, p: float, dx: float | None = None) -> float:
    if isinstance(w, SimState):
        w = w.w
    w = np.asarray(w, dtype=float)
    if not p >= 1:
        raise ValueError(f"p must be >= 1, got {p}")
    if dx is None:
        dx = 1.0 / (w.size - 1)
    if math.isinf(p):
        return float(np.max(np.abs(w)))
    return float(np.trapezoid(np.abs(w) ** p, dx=dx) ** (1.0 / p))


def w1p_norm(w, p: float, dx: float | None = None) -> float:
    if isinstance(w, SimState):
        w = w.w
    w = np.asarray(w, dtype=float)
    if dx is None:
        dx = 1.0 / (w.size - 1)
    wx = np.gradient(w, dx, edge_order=2)
    a, b = lp_norm(w, p, dx), lp_norm(wx, p, dx)
    if math.isinf(p):
        return max(a, b)
    return float((a**p + b**p) ** (1.0 / p))


def _d_left(w, dx):
    return (-3.0 * w[0] + 4.0 * w[1] - w[2]) / (2.0 * dx)


def _d_right(w, dx):
    return (3.0 * w[-1] - 4.0 * w[-2] + w[-3]) / (2.0 * dx)


def feedback(gains: ControlGains, nx: int):
    """Return ``(k11, weights)`` with ``U = -k11 w[-1] - weights @ w``."""
    x = np.linspace(0.0, 1.0, nx + 1)
    kx = np.interp(x, gains.y_nodes, gains.kx1)
    return float(gains.k11), kx * trapezoid_weights(nx)


def compatibility_residuals(w, gains: ControlGains) -> tuple[float, float]:
    """``(|w_x(0)|, |w_x(1) - U|)`` with second-order one-sided differences."""
    w = np.asarray(w, dtype=float)
    nx = w.size - 1
    dx = 1.0 / nx
    k11, gw = feedback(gains, nx)
    U = -k11 * w[-1] - gw @ w
    return abs(_d_left(w, dx)), abs(_d_right(w, dx) - U)


def compatible_coefficients(base_values, gains: ControlGains) -> tuple[float, float]:
    """Coefficients ``(a, b)`` of ``a x(1-x)^2 + b x^2(x-1)`` restoring compatibility."""
    w = np.asarray(base_values, dtype=float)
    nx = w.size - 1
    dx = 1.0 / nx
    x = np.linspace(0.0, 1.0, nx + 1)
    k11, gw = feedback(gains, nx)
    left = x * (1.0 - x) ** 2
    right = x**2 * (x - 1.0)

    def cond(v):
        return np.array([_d_left(v, dx), _d_right(v, dx) + k11 * v[-1] + gw @ v])

    A = np.column_stack([cond(left), cond(right)])
    rhs = -cond(w)
    if abs(np.linalg.det(A)) < 1e-14 * max(1.0, np.max(np.abs(A)) ** 2):
        raise CompatibilityError("singular compatibility system; choose another base profile")
    a, b = np.linalg.solve(A, rhs)
    return float(a), float(b)


def make_compatible_initial(base, gains: ControlGains, nx: int) -> SimState:
    """Sample ``base`` and correct it so both boundary relations hold discretely."""
    x = np.linspace(0.0, 1.0, nx + 1)
    if isinstance(base, FunctionDescriptor):
        w = np.asarray(base(x), dtype=float) * np.ones_like(x)
    elif callable(base):
        w = np.asarray(base(x), dtype=float) * np.ones_like(x)
    else:
        w = np.array(base, dtype=float)
        if w.size != nx + 1:
            raise ValueError("sampled base has the wrong number of nodes")
    if not np.any(w):
        return SimState(0.0, w)
    a, b = compatible_coefficients(w, gains)
    w = w + a * x * (1.0 - x) ** 2 + b * x**2 * (x - 1.0)
    return SimState(0.0, w)


class Simulator:
    """Stepper for one (spec, gains, config) triple; states may be stacked column-wise."""

    def __init__(self, spec: ProblemSpec, gains: ControlGains, cfg: SimConfig, check: bool = True):
        if check:
            check_config(spec, cfg)
        self.spec, self.gains, self.cfg = spec, gains, cfg
        nx = cfg.nx
        self.dx = dx = 1.0 / nx
        self.x = np.linspace(0.0, 1.0, nx + 1)
        self.k11, self.gw = feedback(gains, nx)

        r = 0.5 * cfg.dt / dx**2
        # I - dt/2 A in banded storage, A the ghost-node Neumann Laplacian
        ab = np.zeros((3, nx + 1))
        ab[0, 1:] = -r
        ab[1, :] = 1.0 + 2.0 * r
        ab[2, :-1] = -r
        ab[0, 1] = -2.0 * r
        ab[2, -2] = -2.0 * r
        self.ab = ab
        self.r = r

        if spec.f.is_zero:
            self.V = None
        else:
            X, Y = np.meshgrid(self.x, self.x, indexing="ij")
            F = np.where(Y <= X, spec.f(X, Y), 0.0) * dx
            idx = np.arange(nx + 1)
            F[:, 0] *= 0.5
            F[idx, idx] *= 0.5
            F[0, 0] = 0.0
            self.V = F
        self.c1x = np.asarray(spec.c1(self.x), dtype=float) * np.ones(nx + 1)
        self.shape = np.asarray(spec.c3_shape(self.x), dtype=float) * np.ones(nx + 1)

    def control(self, w):
        return -self.k11 * w[-1] - self.gw @ w

    def reaction(self, t: float) -> np.ndarray:
        return self.c1x + float(self.spec.c2(t)) + float(self.spec.c3_L(t)) * self.shape

    def step(self, state: SimState) -> SimState:
        # non-finite values are caught explicitly below
        with np.errstate(invalid="ignore", over="ignore"):
            return self._step(state)

    def _step(self, state: SimState) -> SimState:
        w = state.w
        r, dt, dx = self.r, self.cfg.dt, self.dx
        lap = np.empty_like(w)
        lap[1:-1] = w[:-2] - 2.0 * w[1:-1] + w[2:]
        lap[0] = 2.0 * (w[1] - w[0])
        lap[-1] = 2.0 * (w[-2] - w[-1])
        c = self.reaction(state.t)
        src = c[:, None] * w if w.ndim == 2 else c * w
        if self.V is not None:
            src = src + self.V @ w
        rhs = w + r * lap + dt * src
        # ghost value w[nx+1] = w[nx-1] + 2 dx U adds 2 dx U / dx^2 to the last row
        rhs[-1] = rhs[-1] + 2.0 * r * 2.0 * dx * self.control(w)
        w_new = solve_banded((1, 1), self.ab, rhs, check_finite=False)
        t_new = state.t + dt
        if not np.all(np.isfinite(w_new)):
            raise BlowUpError(t_new)
        return SimState(t_new, w_new)

    def run(self, w0, observe):
        """Advance to ``t_end`` calling ``observe(state)`` at t=0 and each output time."""
        state = SimState(0.0, np.array(w0, dtype=float))
        every = self.cfg.output_every
        observe(state)
        for k in range(1, self.cfg.steps + 1):
            state = self.step(state)
            state.t = k * self.cfg.dt
            if k % every == 0 or k == self.cfg.steps:
                observe(state)
        return state


def step(spec: ProblemSpec, gains: ControlGains, cfg: SimConfig, state: SimState) -> SimState:
    return Simulator(spec, gains, cfg).step(state)


def norm_name(p: float, w1p: bool = False) -> str:
    tag = "inf" if math.isinf(p) else (str(int(p)) if float(p).is_integer() else repr(float(p)))
    return ("w1p_p" if w1p else "norm_p") + tag


def _norms_of(w, cfg: SimConfig, dx: float) -> dict[str, float]:
    out = {norm_name(p): lp_norm(w, p, dx) for p in cfg.p_list}
    if cfg.w1p:
        out.update({norm_name(p, True): w1p_norm(w, p, dx) for p in cfg.p_list})
    return out


@dataclass
class DecayFit:
    sigma_hat: float
    C_hat: float
    fit_residual: float  # max |log residual| over the fit window
    max_ratio: float  # max ||w[t]|| / (C_hat exp(-sigma_hat t) ||w0||) over the window
    monotone: bool  # log-norm strictly decreasing over the window


@dataclass
class DecayReport:
    times: np.ndarray
    series: dict[str, np.ndarray]
    fits: dict[str, DecayFit] = field(default_factory=dict)
    degenerate: bool = False
    fit_start: float = 0.0

    def lines(self) -> list[str]:
        if self.degenerate:
            return ["degenerate: zero initial data, all norms vanish; fit skipped"]
        out = []
        for name, fit in self.fits.items():
            out.append(f"{name}: sigma_hat={fit.sigma_hat:.10g} C_hat={fit.C_hat:.10g} "
                       f"fit_residual={fit.fit_residual:.3e} max_ratio={fit.max_ratio:.10g} "
                       f"monotone={fit.monotone}")
        return out


def fit_decay(times, values, t_start: float) -> DecayFit:
    """Least squares fit of ``log(values / values[0]) = log C - sigma t`` over ``t >= t_start``."""
    times = np.asarray(times, dtype=float)
    values = np.asarray(values, dtype=float)
    sel = times >= t_start - 1e-12
    t, v = times[sel], values[sel]
    y = np.log(v / values[0])
    slope, intercept = np.polyfit(t, y, 1)
    resid = y - (intercept + slope * t)
    return DecayFit(
        sigma_hat=float(-slope),
        C_hat=float(math.exp(intercept)),
        fit_residual=float(np.max(np.abs(resid))),
        max_ratio=float(np.exp(np.max(resid))),
        monotone=bool(np.all(np.diff(y) < 0)),
    )


def run_decay_experiment(spec: ProblemSpec, gains: ControlGains, cfg: SimConfig, w0) -> DecayReport:
    w0 = w0.w if isinstance(w0, SimState) else np.asarray(w0, dtype=float)
    sim = Simulator(spec, gains, cfg)
    times, rows = [], []

    def observe(state):
        times.append(state.t)
        rows.append(_norms_of(state.w, cfg, sim.dx))

    if not np.any(w0):
        # zero is an equilibrium; no need to integrate
        names = list(_norms_of(w0, cfg, sim.dx))
        ts = np.array([0.0, cfg.t_end])
        return DecayReport(ts, {k: np.zeros(2) for k in names}, {}, True, cfg.fit_start)

    sim.run(w0, observe)
    ts = np.array(times)
    series = {k: np.array([r[k] for r in rows]) for k in rows[0]}
    fits = {k: fit_decay(ts, v, cfg.fit_start) for k, v in series.items()}
    return DecayReport(ts, series, fits, False, cfg.fit_start)


@dataclass
class DependenceReport:
    ratios: dict[str, float]
    scaled: dict[float, dict[str, float]]
    spread: dict[str, float]  # max/min - 1 across the scaled runs
    degenerate: bool = False

    def lines(self) -> list[str]:
        if self.degenerate:
            return ["degenerate: identical initial data, ratio 0/0 undefined"]
        out = [f"{k}: ratio={v:.10g} spread={self.spread[k]:.3e}" for k, v in self.ratios.items()]
        for a, rs in self.scaled.items():
            out.append(f"alpha={a!r}: " + " ".join(f"{k}={v:.10g}" for k, v in rs.items()))
        return out


def run_dependence_experiment(spec: ProblemSpec, gains: ControlGains, cfg: SimConfig, w01, w02,
                              alphas=(1.0, 0.1, 0.01)) -> DependenceReport:
    """sup over output times of ``||w1 - w2|| / ||w01 - w02||`` in every requested norm.

    The second datum is replaced by ``w01 + alpha (w02 - w01)`` for each alpha;
    all runs are stacked and advanced together.
    """
    w01 = w01.w if isinstance(w01, SimState) else np.asarray(w01, dtype=float)
    w02 = w02.w if isinstance(w02, SimState) else np.asarray(w02, dtype=float)
    d0 = w02 - w01
    if not np.any(d0):
        return DependenceReport({}, {}, {}, True)
    sim = Simulator(spec, gains, cfg)
    alphas = tuple(float(a) for a in alphas)
    W = np.column_stack([w01] + [w01 + a * d0 for a in alphas])
    denom = [_norms_of(a * d0, cfg, sim.dx) for a in alphas]
    best = [dict.fromkeys(denom[0], 0.0) for _ in alphas]

    def observe(state):
        for m, a in enumerate(alphas):
            diff = state.w[:, 1 + m] - state.w[:, 0]
            for k, v in _norms_of(diff, cfg, sim.dx).items():
                best[m][k] = max(best[m][k], v / denom[m][k])

    sim.run(W, observe)
    scaled = {a: best[m] for m, a in enumerate(alphas)}
    names = list(best[0])
    spread = {k: max(s[k] for s in best) / min(s[k] for s in best) - 1.0 for k in names}
    return DependenceReport(dict(best[0]), scaled, spread, False)
