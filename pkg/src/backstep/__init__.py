"""Backstepping boundary control for reaction-diffusion plants with Volterra terms.

Subpackages: :mod:`backstep.kernel` solves the kernel equation,
:mod:`backstep.simulator` runs the closed loop, :mod:`backstep.cli`
drives both from a config file.
"""

__version__ = "0.1.0"
