"""Run configuration files.

A config is an INI-style file with sections ``[problem]``, ``[solver]``,
``[simulation]`` and ``[outputs]``.  Only ``problem.lambda0`` is required.
Function-valued keys take descriptor strings such as
``c1 = "monomial:1.0:2, sine:0.5:3.0"``; see
:class:`backstep.coefficients.FunctionDescriptor`.

Example::

    [problem]
    lambda0 = 1.0
    c1 = "sine:1.0:1.0"
    f = "constant:0.1:0"

    [solver]
    n = 400

    [simulation]
    t_end = 5.0
    p_list = 1, 2, inf
"""

from __future__ import annotations

import configparser
import math
import re
from dataclasses import dataclass, field
from pathlib import Path

from .coefficients import FunctionDescriptor, ProblemSpec
from .simulator import SCHEME, SimConfig


class ConfigError(ValueError):
    pass


@dataclass(frozen=True)
class SolverSection:
    n: int = 200
    tol: float = 1e-10
    max_iter: int = 200
    gain_nodes: int = 101
    sample_count: int = 101
    probe_iterations: int = 12


@dataclass(frozen=True)
class SimulationSection:
    sim: SimConfig = field(default_factory=SimConfig)
    initial: FunctionDescriptor = field(
        default_factory=lambda: FunctionDescriptor.of(("cosine", 1.0, math.pi)))
    perturbation: FunctionDescriptor = field(
        default_factory=lambda: FunctionDescriptor.of(("cosine", 0.1, 2.0 * math.pi)))
    experiments: tuple[str, ...] = ("decay", "dependence")
    alphas: tuple[float, ...] = (1.0, 0.1, 0.01)


@dataclass(frozen=True)
class OutputSection:
    dir: str = "out"
    verbosity: str = "normal"


@dataclass(frozen=True)
class RunConfig:
    problem: ProblemSpec
    solver: SolverSection = field(default_factory=SolverSection)
    simulation: SimulationSection = field(default_factory=SimulationSection)
    outputs: OutputSection = field(default_factory=OutputSection)


_KEYS = {
    "problem": {"lambda0", "c1", "c2", "c3_L", "c3_gamma0", "c3_shape", "f", "theta"},
    "solver": {"n", "tol", "max_iter", "gain_nodes", "sample_count", "probe_iterations"},
    "simulation": {"nx", "dt", "t_end", "p_list", "burn_in", "output_interval", "w1p", "scheme",
                   "initial", "perturbation", "experiments", "alphas"},
    "outputs": {"dir", "verbosity"},
}
_EXPERIMENTS = {"decay", "dependence"}


def _line_index(text: str) -> dict[tuple[str, str | None], int]:
    """Map (section, key) to 1-based line numbers; key None is the header line."""
    where, section = {}, None
    for lineno, line in enumerate(text.splitlines(), 1):
        m = re.match(r"\s*\[([^\]]+)\]", line)
        if m:
            section = m.group(1).strip()
            where.setdefault((section, None), lineno)
            continue
        m = re.match(r"\s*([^=:#;\s][^=:]*?)\s*[=:]", line)
        if m and section is not None:
            where.setdefault((section, m.group(1).strip()), lineno)
    return where


def _unquote(value: str) -> str:
    value = value.strip()
    if len(value) >= 2 and value[0] == value[-1] and value[0] in "\"'":
        return value[1:-1]
    return value


def _float(text: str) -> float:
    t = text.strip().lower()
    if t in ("inf", "+inf", "infinity"):
        return math.inf
    return float(t)


def _bool(text: str) -> bool:
    t = text.strip().lower()
    if t in ("1", "true", "yes", "on"):
        return True
    if t in ("0", "false", "no", "off"):
        return False
    raise ValueError(f"not a boolean: {text!r}")


def _list(text: str, conv) -> tuple:
    return tuple(conv(v) for v in text.replace(";", ",").split(",") if v.strip())


def parse_config(text: str, source: str = "<config>") -> RunConfig:
    parser = configparser.ConfigParser(interpolation=None, default_section="__defaults__")
    parser.optionxform = str
    try:
        parser.read_string(text, source=source)
    except configparser.Error as exc:
        raise ConfigError(f"{source}: {exc}") from exc
    lines = _line_index(text)

    def at(section, key=None):
        return f"{source}:{lines.get((section, key), '?')}"

    for section in parser.sections():
        if section not in _KEYS:
            raise ConfigError(f"{at(section)}: unknown section [{section}]")
        for key in parser[section]:
            if key not in _KEYS[section]:
                raise ConfigError(f"{at(section, key)}: unknown key {key!r} in [{section}]")
    if not parser.has_section("problem"):
        raise ConfigError(f"{source}: missing required section [problem]")

    def get(section, key, conv, default):
        if not parser.has_option(section, key):
            return default
        raw = _unquote(parser.get(section, key))
        try:
            return conv(raw)
        except (ValueError, TypeError) as exc:
            raise ConfigError(f"{at(section, key)}: bad value for {section}.{key}: {exc}") from exc

    if not parser.has_option("problem", "lambda0"):
        raise ConfigError(f"{at('problem')}: [problem] requires lambda0")
    d1 = lambda s: FunctionDescriptor.from_text(s, 1)  # noqa: E731
    d2 = lambda s: FunctionDescriptor.from_text(s, 2)  # noqa: E731
    z1 = FunctionDescriptor.zero(1)
    try:
        problem = ProblemSpec(
            lambda0=get("problem", "lambda0", float, None),
            c1=get("problem", "c1", d1, z1),
            c2=get("problem", "c2", d1, z1),
            c3_L=get("problem", "c3_L", d1, z1),
            c3_gamma0=get("problem", "c3_gamma0", float, 1.0),
            c3_shape=get("problem", "c3_shape", d1, z1),
            f=get("problem", "f", d2, FunctionDescriptor.zero(2)),
            theta=get("problem", "theta", float, 0.5),
        )
    except ValueError as exc:
        if isinstance(exc, ConfigError):
            raise
        raise ConfigError(f"{at('problem')}: {exc}") from exc

    sd = SolverSection()
    solver = SolverSection(
        n=get("solver", "n", int, sd.n),
        tol=get("solver", "tol", float, sd.tol),
        max_iter=get("solver", "max_iter", int, sd.max_iter),
        gain_nodes=get("solver", "gain_nodes", int, sd.gain_nodes),
        sample_count=get("solver", "sample_count", int, sd.sample_count),
        probe_iterations=get("solver", "probe_iterations", int, sd.probe_iterations),
    )

    md = SimConfig()
    sim_d = SimulationSection()
    try:
        sim = SimConfig(
            nx=get("simulation", "nx", int, md.nx),
            dt=get("simulation", "dt", float, md.dt),
            t_end=get("simulation", "t_end", float, md.t_end),
            p_list=get("simulation", "p_list", lambda s: _list(s, _float), md.p_list),
            burn_in=get("simulation", "burn_in", float, None),
            output_interval=get("simulation", "output_interval", float, None),
            w1p=get("simulation", "w1p", _bool, md.w1p),
            scheme=get("simulation", "scheme", str, SCHEME),
        )
    except ValueError as exc:
        if isinstance(exc, ConfigError):
            raise
        raise ConfigError(f"{at('simulation')}: {exc}") from exc
    experiments = get("simulation", "experiments", lambda s: _list(s, str.strip), sim_d.experiments)
    bad = set(experiments) - _EXPERIMENTS
    if bad:
        raise ConfigError(f"{at('simulation', 'experiments')}: unknown experiments {sorted(bad)}")
    simulation = SimulationSection(
        sim=sim,
        initial=get("simulation", "initial", d1, sim_d.initial),
        perturbation=get("simulation", "perturbation", d1, sim_d.perturbation),
        experiments=experiments,
        alphas=get("simulation", "alphas", lambda s: _list(s, float), sim_d.alphas),
    )

    verbosity = get("outputs", "verbosity", str, "normal")
    if verbosity not in ("normal", "quiet", "verbose"):
        raise ConfigError(f"{at('outputs', 'verbosity')}: verbosity must be normal, quiet or verbose")
    outputs = OutputSection(dir=get("outputs", "dir", str, "out"), verbosity=verbosity)
    return RunConfig(problem, solver, simulation, outputs)


def load_config(path) -> RunConfig:
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    return parse_config(text, str(path))


def problem_to_text(spec: ProblemSpec) -> str:
    """``[problem]`` section reproducing ``spec`` exactly."""
    rows = [
        "[problem]",
        f"lambda0 = {spec.lambda0!r}",
        f'c1 = "{spec.c1.to_text()}"',
        f'c2 = "{spec.c2.to_text()}"',
        f'c3_L = "{spec.c3_L.to_text()}"',
        f"c3_gamma0 = {spec.c3_gamma0!r}",
        f'c3_shape = "{spec.c3_shape.to_text()}"',
        f'f = "{spec.f.to_text()}"',
        f"theta = {spec.theta!r}",
    ]
    return "\n".join(rows) + "\n"
