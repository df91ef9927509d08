"""Problem data for the controlled parabolic system.

The reaction coefficient is split as ``c(x, t) = c1(x) + c2(t) + c3(x, t)``
with ``c3(x, t) = L(t) * shape(x)``.  Every coefficient is a closed-form
:class:`FunctionDescriptor`, a sum of products of elementary basis
functions, so integrals can be refined at any resolution without
re-sampling input data.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

KINDS = ("constant", "monomial", "sine", "cosine", "exponential")
AXIS_NAMES = ("x", "y")


class DomainError(ValueError):
    """A point lies outside the domain an operation is defined on."""


@dataclass(frozen=True)
class Basis:
    """One elementary factor ``amplitude * phi(parameter, point[axis])``."""

    kind: str
    amplitude: float
    parameter: float = 0.0
    axis: int = 0

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"unknown basis kind {self.kind!r}; expected one of {KINDS}")
        if not (math.isfinite(self.amplitude) and math.isfinite(self.parameter)):
            raise ValueError("basis amplitude and parameter must be finite")
        if self.kind == "monomial" and self.parameter < 0:
            raise ValueError("monomial power must be nonnegative")
        if self.axis not in (0, 1):
            raise ValueError("axis must be 0 or 1")

    def __call__(self, u):
        u = np.asarray(u, dtype=float)
        a, p = self.amplitude, self.parameter
        if self.kind == "constant":
            return np.full_like(u, a)
        if self.kind == "monomial":
            return a * np.power(u, p)
        if self.kind == "sine":
            return a * np.sin(p * u)
        if self.kind == "cosine":
            return a * np.cos(p * u)
        return a * np.exp(p * u)

    def to_text(self) -> str:
        text = f"{self.kind}:{self.amplitude!r}:{self.parameter!r}"
        if self.axis:
            text += "@" + AXIS_NAMES[self.axis]
        return text

    @classmethod
    def from_text(cls, text: str) -> "Basis":
        body, _, axis_name = text.strip().partition("@")
        axis = 0
        if axis_name:
            if axis_name not in AXIS_NAMES:
                raise ValueError(f"unknown axis {axis_name!r} in {text!r}")
            axis = AXIS_NAMES.index(axis_name)
        parts = body.split(":")
        if len(parts) not in (2, 3):
            raise ValueError(f"basis {text!r} is not of the form kind:amplitude[:parameter]")
        kind = parts[0].strip()
        try:
            amplitude = float(parts[1])
            parameter = float(parts[2]) if len(parts) == 3 else 0.0
        except ValueError as exc:
            raise ValueError(f"non-numeric field in basis {text!r}") from exc
        return cls(kind, amplitude, parameter, axis)


@dataclass(frozen=True)
class FunctionDescriptor:
    """Sum of products of :class:`Basis` factors.

    Text form: products separated by ``,``, factors by ``*``, for example
    ``"monomial:1.0:2, sine:0.5:3.0*cosine:1.0:2.0@y"`` for
    ``x**2 + 0.5 sin(3x) cos(2y)``.  An empty string is the zero function.
    """

    products: tuple[tuple[Basis, ...], ...] = ()
    arity: int = 1

    def __post_init__(self):
        for prod in self.products:
            if not prod:
                raise ValueError("empty product in descriptor")
            for b in prod:
                if b.axis >= self.arity:
                    raise ValueError(f"basis axis {b.axis} exceeds descriptor arity {self.arity}")

    @classmethod
    def zero(cls, arity: int = 1) -> "FunctionDescriptor":
        return cls((), arity)

    @classmethod
    def constant(cls, value: float, arity: int = 1) -> "FunctionDescriptor":
        return cls(((Basis("constant", float(value)),),), arity)

    @classmethod
    def of(cls, *terms, arity: int = 1) -> "FunctionDescriptor":
        """Build from ``(kind, amplitude, parameter[, axis])`` tuples, one product each."""
        return cls(tuple((Basis(*t),) for t in terms), arity)

    def __call__(self, *coords):
        if len(coords) != self.arity:
            raise TypeError(f"descriptor takes {self.arity} coordinate(s), got {len(coords)}")
        arrays = np.broadcast_arrays(*(np.asarray(c, dtype=float) for c in coords))
        total = np.zeros(arrays[0].shape)
        for prod in self.products:
            value = np.ones(arrays[0].shape)
            for b in prod:
                value = value * b(arrays[b.axis])
            total = total + value
        if total.ndim == 0:
            return float(total)
        return total

    @property
    def is_zero(self) -> bool:
        return all(any(b.amplitude == 0.0 for b in prod) for prod in self.products)

    @property
    def is_constant(self) -> bool:
        def flat(b: Basis) -> bool:
            return b.amplitude == 0.0 or b.kind == "constant" or b.parameter == 0.0

        return all(all(flat(b) for b in prod) for prod in self.products)

    def to_text(self) -> str:
        return ", ".join("*".join(b.to_text() for b in prod) for prod in self.products)

    @classmethod
    def from_text(cls, text: str, arity: int = 1) -> "FunctionDescriptor":
        text = text.strip()
        if not text:
            return cls.zero(arity)
        products = []
        for chunk in text.split(","):
            chunk = chunk.strip()
            if not chunk:
                raise ValueError(f"empty term in descriptor {text!r}")
            products.append(tuple(Basis.from_text(f) for f in chunk.split("*")))
        return cls(tuple(products), arity)


def _zero1() -> FunctionDescriptor:
    return FunctionDescriptor.zero(1)


def _zero2() -> FunctionDescriptor:
    return FunctionDescriptor.zero(2)


@dataclass(frozen=True)
class ProblemSpec:
    """Coefficients of the plant and the kernel equation.

    ``theta`` is Hölder-regularity metadata and never enters a computation.
    """

    lambda0: float
    c1: FunctionDescriptor = field(default_factory=_zero1)
    c2: FunctionDescriptor = field(default_factory=_zero1)
    c3_L: FunctionDescriptor = field(default_factory=_zero1)
    c3_gamma0: float = 1.0
    c3_shape: FunctionDescriptor = field(default_factory=_zero1)
    f: FunctionDescriptor = field(default_factory=_zero2)
    theta: float = 0.5

    def __post_init__(self):
        if not math.isfinite(self.lambda0) or self.lambda0 < 0:
            raise ValueError("lambda0 must be finite and nonnegative")
        if self.c3_gamma0 < 1:
            raise ValueError("c3_gamma0 must be >= 1")
        if not 0 < self.theta <= 0.5:
            raise ValueError("theta must lie in (0, 1/2]")
        for name in ("c1", "c2", "c3_L", "c3_shape"):
            if getattr(self, name).arity != 1:
                raise ValueError(f"{name} must be a function of one variable")
        if self.f.arity != 2:
            raise ValueError("f must be a function of two variables")

    def c3(self, x, t):
        return self.c3_L(t) * self.c3_shape(x)

    def c(self, x, t):
        return self.c1(x) + self.c2(t) + self.c3(x, t)

    def omega(self, s):
        return np.power(s, self.c3_gamma0)

    def mu(self, x, y):
        """``lambda0 - c1(x) + c1(y)``, vectorised and unchecked."""
        return self.lambda0 + (self.c1(y) - self.c1(x))

    def mu_goursat(self, xi, eta):
        return self.mu(0.5 * (np.asarray(xi) + eta), 0.5 * (np.asarray(xi) - eta))


def eval_mu(spec: ProblemSpec, x: float, y: float) -> float:
    if not (0.0 <= y <= x <= 1.0):
        raise DomainError(f"(x, y) = ({x}, {y}) is outside 0 <= y <= x <= 1")
    return float(spec.mu(x, y))


@dataclass(frozen=True)
class DerivedConstants:
    f_bar: float
    lambda_bar: float
    M: float
    bound: float
    lambda_under: float
    sample_count: int
    t_horizon: float


def _triangle_samples(sample_count: int):
    s = np.linspace(0.0, 1.0, sample_count)
    X, Y = np.meshgrid(s, s, indexing="ij")
    keep = Y <= X
    return X[keep], Y[keep]


def sup_c(spec: ProblemSpec, t_horizon: float, sample_count: int):
    """Lattice maximum of c on [0,1] x [0,t_horizon]; returns (value, x, t)."""
    xs = np.linspace(0.0, 1.0, sample_count)
    ts = np.linspace(0.0, t_horizon, sample_count)
    C = spec.c(xs[:, None], ts[None, :])
    idx = np.unravel_index(np.argmax(C), C.shape)
    return float(C[idx]), float(xs[idx[0]]), float(ts[idx[1]])


def compute_constants(spec: ProblemSpec, sample_count: int = 101,
                      t_horizon: float = 1.0) -> DerivedConstants:
    """Constants of the maximum estimate ``|k| <= M exp(2M)``.

    Maxima over continuous domains are taken over a uniform lattice with
    ``sample_count`` points per axis; corners are always included.
    """
    if sample_count < 2:
        raise ValueError("sample_count must be >= 2")
    s = np.linspace(0.0, 1.0, sample_count)
    f_bar = float(np.max(np.abs(spec.f(s[:, None], s[None, :]))))
    X, Y = _triangle_samples(sample_count)
    lambda_bar = max(spec.lambda0, float(np.max(np.abs(spec.mu(X, Y)))))
    M = 0.5 * (f_bar + lambda_bar)
    c_max, _, _ = sup_c(spec, t_horizon, sample_count)
    return DerivedConstants(
        f_bar=f_bar,
        lambda_bar=lambda_bar,
        M=M,
        bound=M * math.exp(2.0 * M),
        lambda_under=spec.lambda0 - c_max,
        sample_count=sample_count,
        t_horizon=t_horizon,
    )


@dataclass(frozen=True)
class Check:
    name: str
    passed: bool
    detail: str
    witness: dict | None = None
    advisory: bool = False


@dataclass(frozen=True)
class ValidationReport:
    checks: tuple[Check, ...]

    @property
    def passed(self) -> bool:
        return all(c.passed for c in self.checks if not c.advisory)

    def failures(self) -> list[Check]:
        return [c for c in self.checks if not c.passed and not c.advisory]

    def lines(self) -> list[str]:
        out = []
        for c in self.checks:
            tag = "PASS" if c.passed else ("WARN" if c.advisory else "FAIL")
            line = f"{tag} {c.name}: {c.detail}"
            if c.witness and not c.passed:
                line += " witness=" + ", ".join(f"{k}={v!r}" for k, v in c.witness.items())
            out.append(line)
        return out


def validate_spec(spec: ProblemSpec, t_horizon: float, sample_count: int = 101) -> ValidationReport:
    """Check the standing assumptions on a sampled window.

    ``lim L(t) = 0`` cannot be verified on a finite horizon; the report
    only warns when L fails to be nonincreasing on the sampled window.
    """
    if t_horizon <= 0:
        raise ValueError("t_horizon must be positive")
    if sample_count < 2:
        raise ValueError("sample_count must be >= 2")
    checks = []

    c_max, xw, tw = sup_c(spec, t_horizon, sample_count)
    ok = spec.lambda0 > c_max
    checks.append(Check(
        "lambda0_exceeds_sup_c", ok,
        f"lambda0={spec.lambda0!r} sup c={c_max!r}",
        None if ok else {"x": xw, "t": tw, "c": c_max},
    ))

    s = np.linspace(0.0, 1.0, sample_count)
    om = spec.omega(s)
    ok = bool(np.all(om <= 1.0))
    i = int(np.argmax(om))
    checks.append(Check("omega_le_one", ok, f"max omega={float(om[i])!r}",
                        None if ok else {"s": float(s[i]), "omega": float(om[i])}))

    ts = np.linspace(0.0, t_horizon, sample_count)
    L = np.asarray(spec.c3_L(ts), dtype=float)
    ok = bool(np.all(L >= 0.0))
    i = int(np.argmin(L))
    checks.append(Check("L_nonnegative", ok, f"min L={float(L[i])!r}",
                        None if ok else {"t": float(ts[i]), "L": float(L[i])}))

    shape = np.asarray(spec.c3_shape(s), dtype=float)
    dshape = np.abs(shape[:, None] - shape[None, :])
    om_xy = spec.omega(np.abs(s[:, None] - s[None, :]))
    # |c3(x,t) - c3(y,t)| = |L(t)| |shape(x) - shape(y)|, compared to L(t) omega(|x - y|)
    lhs = np.abs(L)[:, None, None] * dshape[None, :, :]
    rhs = L[:, None, None] * om_xy[None, :, :]
    excess = lhs - rhs - 1e-12 * (1.0 + np.abs(rhs))
    k = np.unravel_index(np.argmax(excess), excess.shape)
    ok = bool(excess[k] <= 0.0)
    checks.append(Check(
        "c3_modulus", ok, f"max excess={float(lhs[k] - rhs[k])!r}",
        None if ok else {"t": float(ts[k[0]]), "x": float(s[k[1]]), "y": float(s[k[2]]),
                         "lhs": float(lhs[k]), "rhs": float(rhs[k])},
    ))

    inc = np.diff(L)
    ok = bool(np.all(inc <= 1e-15 * (1.0 + np.abs(L[1:]))))
    i = int(np.argmax(inc)) if inc.size else 0
    checks.append(Check(
        "L_nonincreasing", ok,
        "L(t) -> 0 is assumed, only monotonicity on the window is sampled",
        None if ok else {"t": float(ts[i + 1]), "increase": float(inc[i])},
        advisory=True,
    ))
    return ValidationReport(tuple(checks))
