"""CSV and metadata files exchanged between the solver, the simulator and the CLI.

Numbers are written with 17 significant digits, which round-trips every
double exactly, using ``.`` as decimal separator and LF line endings.
"""

from __future__ import annotations

import json
import math
from pathlib import Path

import numpy as np

from .kernel.grid import GoursatGrid
from .kernel.solver import ControlGains, KernelSolution


def fmt(v: float) -> str:
    return "%.17g" % v


def write_csv(path, header: list[str], columns: list[np.ndarray]) -> None:
    rows = zip(*columns)
    with open(path, "w", newline="\n", encoding="ascii") as fh:
        fh.write(",".join(header) + "\n")
        for row in rows:
            fh.write(",".join(fmt(float(v)) for v in row) + "\n")


def read_csv(path) -> tuple[list[str], np.ndarray]:
    with open(path, encoding="ascii") as fh:
        header = fh.readline().strip().split(",")
        data = np.loadtxt(fh, delimiter=",", ndmin=2)
    if data.size and data.shape[1] != len(header):
        raise ValueError(f"{path}: {data.shape[1]} columns but header names {len(header)}")
    return header, data


def write_kernel_csv(path, sol: KernelSolution) -> None:
    n = sol.grid.n
    P, Q = np.nonzero(np.tri(n + 1, dtype=bool))
    write_csv(path, ["x", "y", "k"], [P / n, Q / n, sol.k_values[P, Q]])


def read_kernel_csv(path) -> KernelSolution:
    """Rebuild the lattice from a ``x,y,k`` file written by :func:`write_kernel_csv`."""
    header, data = read_csv(path)
    if header != ["x", "y", "k"]:
        raise ValueError(f"{path}: expected header x,y,k, got {','.join(header)}")
    count = data.shape[0]
    n = int(round((math.sqrt(8 * count + 1) - 3) / 2))
    if (n + 1) * (n + 2) // 2 != count:
        raise ValueError(f"{path}: {count} rows do not form a triangular lattice")
    P = np.rint(data[:, 0] * n).astype(int)
    Q = np.rint(data[:, 1] * n).astype(int)
    K = np.full((n + 1, n + 1), np.nan)
    K[P, Q] = data[:, 2]
    return KernelSolution(GoursatGrid(n), K)


def write_gains_csv(path, gains: ControlGains) -> None:
    write_csv(path, ["y", "kx1"], [gains.y_nodes, gains.kx1])


def read_gains_csv(path, k11: float) -> ControlGains:
    header, data = read_csv(path)
    if header != ["y", "kx1"]:
        raise ValueError(f"{path}: expected header y,kx1, got {','.join(header)}")
    return ControlGains(float(k11), data[:, 0].copy(), data[:, 1].copy())


def _clean(obj):
    if isinstance(obj, dict):
        return {str(k): _clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_clean(v) for v in obj]
    if isinstance(obj, (np.floating, float)):
        v = float(obj)
        return v if math.isfinite(v) else repr(v)
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, np.bool_):
        return bool(obj)
    return obj


def write_metadata(path, meta: dict) -> None:
    Path(path).write_text(json.dumps(_clean(meta), indent=2, sort_keys=True) + "\n", encoding="ascii")


def read_metadata(path) -> dict:
    return json.loads(Path(path).read_text(encoding="ascii"))
