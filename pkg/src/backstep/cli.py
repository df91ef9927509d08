"""Command line front end: ``backstep {solve-kernel,validate,simulate,all} --config PATH``.

Exit status is 0 when every executed check passed, 1 when a check failed
and 2 for unusable input (parse errors, rejected grids or configs).
"""

from __future__ import annotations

import argparse
import math
import sys
from pathlib import Path

import numpy as np

from . import artifacts
from .bessel import closed_form_gain_grid, closed_form_kernel
from .coefficients import FunctionDescriptor, compute_constants, validate_spec
from .config import ConfigError, RunConfig, load_config, problem_to_text
from .kernel.grid import GoursatGrid, GridError
from .kernel.solver import (ControlGains, ConvergenceError, check_bound, check_residual, extract_gains,
                            solve_kernel, uniqueness_probe)
from .simulator import (BlowUpError, CompatibilityError, SimConfigError, check_config,
                        make_compatible_initial, run_decay_experiment, run_dependence_experiment)

KERNEL_CSV = "kernel.csv"
GAINS_CSV = "gains.csv"
KERNEL_REPORT = "kernel_report.txt"
VALIDATE_REPORT = "validate_report.txt"
NORMS_CSV = "norms.csv"
DECAY_REPORT = "decay_report.txt"
DEPENDENCE_REPORT = "dependence_report.txt"

DIAGONAL_TOL = 1e-6
CORNER_TOL = 1e-10
REFINEMENT_RATIO = 3.0
PROBE_RTOL = 1e-8
BESSEL_K_TOL = 1e-4
BESSEL_GAIN_TOL = 5e-3
DEPENDENCE_SPREAD = 0.01


class InputError(Exception):
    pass


class Pipeline:
    def __init__(self, cfg: RunConfig, out: Path, quiet: bool = False):
        self.cfg = cfg
        self.spec = cfg.problem
        self.out = out
        self.quiet = quiet or cfg.outputs.verbosity == "quiet"
        self._solution = None
        self._constants = None

    def say(self, line: str) -> None:
        if not self.quiet:
            print(line)

    def check(self, name: str, ok: bool, detail: str) -> bool:
        self.say(f"{'PASS' if ok else 'FAIL'} {name}: {detail}")
        return ok

    @property
    def constants(self):
        if self._constants is None:
            s = self.cfg.solver
            self._constants = compute_constants(self.spec, max(s.sample_count, s.n + 1),
                                                self.cfg.simulation.sim.t_end)
        return self._constants

    def grid(self, n: int | None = None) -> GoursatGrid:
        try:
            return GoursatGrid(self.cfg.solver.n if n is None else n)
        except GridError as exc:
            raise InputError(f"solver.n: {exc}") from exc

    def solution(self):
        if self._solution is None:
            s = self.cfg.solver
            self._solution = solve_kernel(self.spec, self.grid(), s.tol, s.max_iter, self.constants)
        return self._solution

    # -- verbs ---------------------------------------------------------------

    def solve_kernel(self) -> int:
        s = self.cfg.solver
        report = validate_spec(self.spec, self.cfg.simulation.sim.t_end, s.sample_count)
        for line in report.lines():
            self.say(line)
        if not report.passed:
            for c in report.failures():
                print(f"validation failed: {c.name} witness={c.witness}", file=sys.stderr)
            return 1
        self.grid()
        try:
            sol = self.solution()
        except ConvergenceError as exc:
            print(f"solver error: {exc}", file=sys.stderr)
            for r in exc.trace.records:
                print(f"  n={r.n} sup|dG|={r.sup_delta:.3e} envelope={r.envelope:.3e}", file=sys.stderr)
            return 1
        bound = check_bound(sol)
        res = sol.residual_report
        env_bad = sol.trace.envelope_violations()
        gains = extract_gains(sol, s.gain_nodes)

        ok = True
        ok &= self.check("bound", bound.passed,
                         f"max|k|={bound.max_abs:.10g} <= M e^(2M)={bound.bound:.10g} at (x,y)={bound.location}")
        ok &= self.check("envelope", not env_bad,
                         f"{sol.trace.iterations} iterations, {len(env_bad)} violations")
        ok &= self.check("diagonal", res.diagonal <= DIAGONAL_TOL, f"max|k(x,x)-lambda0 x/2|={res.diagonal:.3e}")
        ok &= self.check("corner", res.corner <= CORNER_TOL, f"|k(0,0)|={res.corner:.3e}")
        self.say(f"INFO residual: interior={res.interior:.3e} edge={res.edge:.3e}")
        self.say(f"INFO gains: k(1,1)={gains.k11:.10g} kx1(0)={gains.kx1[0]:.10g} kx1(1)={gains.kx1[-1]:.10g}")

        self.out.mkdir(parents=True, exist_ok=True)
        artifacts.write_kernel_csv(self.out / KERNEL_CSV, sol)
        artifacts.write_gains_csv(self.out / GAINS_CSV, gains)
        c = sol.constants
        artifacts.write_metadata(self.out / KERNEL_REPORT, {
            "problem": problem_to_text(self.spec),
            "n": sol.grid.n,
            "h": sol.grid.h,
            "tol": s.tol,
            "iterations": sol.trace.iterations,
            "constants": {"f_bar": c.f_bar, "lambda_bar": c.lambda_bar, "M": c.M, "bound": c.bound,
                          "lambda_under": c.lambda_under, "sample_count": c.sample_count,
                          "t_horizon": c.t_horizon},
            "g0_max": sol.trace.g0_max,
            "k11": gains.k11,
            "max_abs_k": bound.max_abs,
            "residuals": res.as_dict(),
            "trace": [{"n": r.n, "sup_delta": r.sup_delta, "envelope": r.envelope,
                       "pointwise_ratio": r.pointwise_ratio} for r in sol.trace.records],
            "checks_passed": bool(ok),
        })
        return 0 if ok else 1

    def validate(self) -> int:
        s = self.cfg.solver
        sol = self.solution()
        bound_value = self.constants.bound
        kernel, source = sol, "fresh solve"
        path = self.out / KERNEL_CSV
        ok = True
        if path.exists():
            try:
                kernel = artifacts.read_kernel_csv(path)
                source = str(path)
            except ValueError as exc:
                return 0 if self.check("bound", False, f"unreadable kernel file: {exc}") else 1
            if kernel.grid.n != sol.grid.n:
                ok &= self.check("kernel_file", False,
                                 f"{path} has n={kernel.grid.n}, config has n={sol.grid.n}")
                kernel = sol

        b = check_bound(kernel, bound_value)
        ok &= self.check("bound", b.passed,
                         f"[{source}] max|k|={b.max_abs:.10g} bound={b.bound:.10g} witness (x,y)={b.location}")

        res = check_residual(self.spec, kernel)
        coarse_n = (sol.grid.n // 4) * 2
        detail = f"interior={res.interior:.3e} diagonal={res.diagonal:.3e} corner={res.corner:.3e}"
        refine_ok = True
        if coarse_n >= 8:
            coarse = solve_kernel(self.spec, GoursatGrid(coarse_n), s.tol, s.max_iter, self.constants)
            rc = coarse.residual_report.interior
            if res.interior > 1e-12:
                ratio = rc / res.interior
                refine_ok = ratio >= REFINEMENT_RATIO
                detail += f" refinement ratio n={coarse_n}->{sol.grid.n}: {ratio:.3f}"
            else:
                detail += " (interior residual at roundoff)"
        ok &= self.check("residual", refine_ok and res.diagonal <= DIAGONAL_TOL and res.corner <= CORNER_TOL,
                         detail)

        env_bad = sol.trace.envelope_violations()
        pw_bad = sol.trace.pointwise_violations()
        worst = max((r.sup_delta / r.envelope for r in sol.trace.records if r.envelope > 0), default=0.0)
        ok &= self.check("envelope", not env_bad and not pw_bad,
                         f"{sol.trace.iterations} iterations, max sup|dG|/envelope={worst:.3e}, "
                         f"{len(env_bad)} sup and {len(pw_bad)} pointwise violations")

        probe = uniqueness_probe(self.spec, sol.grid, sol, s.probe_iterations, PROBE_RTOL)
        bad = [r for r in probe.records if not r.passed]
        ok &= self.check("uniqueness", probe.passed,
                         f"delta={probe.delta:.6g} n<= {s.probe_iterations}, "
                         f"max ratio {max(r.ratio for r in probe.records):.6g}"
                         + (f" first violation n={bad[0].n} at (xi,eta)={bad[0].witness}" if bad else ""))

        if self.spec.c1.is_constant and self.spec.f.is_zero:
            lam = self.spec.lambda0
            n = kernel.grid.n
            P, Q = np.nonzero(np.tri(n + 1, dtype=bool))
            exact = np.array([closed_form_kernel(lam, p / n, q / n) for p, q in zip(P, Q)])
            k_err = float(np.max(np.abs(kernel.k_values[P, Q] - exact)))
            gains = extract_gains(kernel, s.gain_nodes)
            cg = closed_form_gain_grid(lam, gains.y_nodes)
            g_err = float(np.max(np.abs(gains.kx1 - cg)))
            k11_err = abs(gains.k11 - 0.5 * lam)
            ktol = BESSEL_K_TOL * max(1.0, float(np.max(np.abs(exact))))
            gtol = BESSEL_GAIN_TOL * max(1.0, float(np.max(np.abs(cg))))
            ok &= self.check("bessel", k_err <= ktol and g_err <= gtol and k11_err <= BESSEL_K_TOL,
                             f"|k11-lambda0/2|={k11_err:.3e} max|k-closed|={k_err:.3e} (tol {ktol:.1e}) "
                             f"max|kx1-closed|={g_err:.3e} (tol {gtol:.1e})")
        else:
            self.say("SKIP bessel: c1 not constant or f nonzero, no closed form")

        self.out.mkdir(parents=True, exist_ok=True)
        artifacts.write_metadata(self.out / VALIDATE_REPORT, {
            "kernel_source": source,
            "bound": {"max_abs": b.max_abs, "bound": b.bound, "location": list(b.location)},
            "residuals": res.as_dict(),
            "uniqueness": {"delta": probe.delta, "ratios": [r.ratio for r in probe.records]},
            "passed": bool(ok),
        })
        return 0 if ok else 1

    def gains(self) -> ControlGains:
        report_path, gains_path = self.out / KERNEL_REPORT, self.out / GAINS_CSV
        if report_path.exists() and gains_path.exists():
            meta = artifacts.read_metadata(report_path)
            if meta.get("problem") == problem_to_text(self.spec) and meta.get("n") == self.cfg.solver.n:
                return artifacts.read_gains_csv(gains_path, meta["k11"])
        return extract_gains(self.solution(), self.cfg.solver.gain_nodes)

    def simulate(self) -> int:
        sim_sec = self.cfg.simulation
        cfg = sim_sec.sim
        try:
            check_config(self.spec, cfg)
        except SimConfigError as exc:
            raise InputError(f"simulation: {exc}") from exc
        gains = self.gains()
        self.out.mkdir(parents=True, exist_ok=True)
        ok = True
        try:
            w0 = make_compatible_initial(sim_sec.initial, gains, cfg.nx)
            if "decay" in sim_sec.experiments:
                rep = run_decay_experiment(self.spec, gains, cfg, w0)
                names = list(rep.series)
                artifacts.write_csv(self.out / NORMS_CSV, ["t"] + names,
                                    [rep.times] + [rep.series[k] for k in names])
                artifacts.write_metadata(self.out / DECAY_REPORT, {
                    "degenerate": rep.degenerate,
                    "fit_start": rep.fit_start,
                    "fits": {k: vars(f) for k, f in rep.fits.items()},
                })
                for line in rep.lines():
                    self.say("INFO decay " + line)
                if rep.degenerate:
                    self.say("PASS decay: degenerate zero-data run flagged")
                else:
                    worst = min(f.sigma_hat for f in rep.fits.values())
                    ok &= self.check("decay", worst > 0, f"min sigma_hat={worst:.6g}")
            if "dependence" in sim_sec.experiments:
                both = FunctionDescriptor(sim_sec.initial.products + sim_sec.perturbation.products, 1)
                w02 = make_compatible_initial(both, gains, cfg.nx)
                dep = run_dependence_experiment(self.spec, gains, cfg, w0, w02, sim_sec.alphas)
                artifacts.write_metadata(self.out / DEPENDENCE_REPORT, {
                    "degenerate": dep.degenerate,
                    "ratios": dep.ratios,
                    "scaled": {repr(a): r for a, r in dep.scaled.items()},
                    "spread": dep.spread,
                })
                for line in dep.lines():
                    self.say("INFO dependence " + line)
                if dep.degenerate:
                    self.say("PASS dependence: identical initial data flagged")
                else:
                    finite = all(math.isfinite(v) for v in dep.ratios.values())
                    spread = max(dep.spread.values())
                    ok &= self.check("dependence", finite and spread <= DEPENDENCE_SPREAD,
                                     f"max ratio={max(dep.ratios.values()):.6g} spread={spread:.3e}")
        except BlowUpError as exc:
            print(f"blow-up: {exc}", file=sys.stderr)
            return 1
        except CompatibilityError as exc:
            raise InputError(str(exc)) from exc
        return 0 if ok else 1

    def all(self) -> int:
        status = self.solve_kernel()
        if status:
            return status
        status = max(status, self.validate())
        return max(status, self.simulate())


VERBS = {"solve-kernel": "solve_kernel", "validate": "validate", "simulate": "simulate", "all": "all"}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="backstep", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="verb", required=True)
    for verb in VERBS:
        p = sub.add_parser(verb)
        p.add_argument("--config", required=True, metavar="PATH")
        p.add_argument("--out", metavar="DIR", help="output directory (overrides [outputs] dir)")
        p.add_argument("--quiet", action="store_true")
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        cfg = load_config(args.config)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    pipe = Pipeline(cfg, Path(args.out or cfg.outputs.dir), args.quiet)
    try:
        return getattr(pipe, VERBS[args.verb])()
    except InputError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
