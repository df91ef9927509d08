"""Kernel of the backstepping transformation by successive approximation."""

from .grid import (GoursatField, GoursatGrid, GridError, from_goursat, goursat_from_lattice,
                   lattice_from_goursat, to_goursat)
from .phi import PhiOperator, apply_phi, apply_phi_fast, build_G0
from .solver import (BoundCheck, ConstantsError, ControlGains, ConvergenceError, IterationTrace,
                     KernelSolution, ResidualReport, UniquenessReport, check_bound, check_residual,
                     envelope, extract_gains, kernel_from_function, solve_kernel, uniqueness_probe)

__all__ = [
    "BoundCheck", "ConstantsError", "ControlGains", "ConvergenceError", "GoursatField",
    "GoursatGrid", "GridError", "IterationTrace", "KernelSolution", "PhiOperator",
    "ResidualReport", "UniquenessReport", "apply_phi", "apply_phi_fast", "build_G0",
    "check_bound", "check_residual", "envelope", "extract_gains", "from_goursat",
    "goursat_from_lattice", "kernel_from_function", "lattice_from_goursat", "solve_kernel",
    "to_goursat", "uniqueness_probe",
]
