"""Text artifacts: legacy-VTK field dumps with CSV companions, metric time
series, JSON run reports, and sweep tables.

Everything is plain text with round-trip-exact float formatting (repr), so
regression goldens diff cleanly across platforms.
"""

from __future__ import annotations

import dataclasses
import json
import os
from dataclasses import dataclass, field

import numpy as np

from .core import PRE, RHO, UX, UY
from .grid import StructuredGrid


def _f(x) -> str:
    return repr(float(x))


def write_field_dump(state, grid: StructuredGrid, path: str, *,
                     mu_av: np.ndarray | None = None,
                     err: np.ndarray | None = None) -> None:
    """Legacy-VTK ASCII structured grid (nodes + cell data) at `path`, plus
    a companion CSV with the same cell values at `path` with a .csv suffix.

    state may be a FlowState or a bare (4, I, J) primitive array.  mu_av is
    the per-cell viscosity coefficient (interior shape), err an optional
    local density-error field.
    """
    Q = state.Q if hasattr(state, "Q") else np.asarray(state)
    I, J = grid.I, grid.J
    if Q.shape != (4, I, J):
        raise ValueError(f"field shape {Q.shape} does not match grid "
                         f"({I}x{J})")
    if mu_av is None:
        mu_av = np.zeros((I, J))
    nodes = grid.nodes  # (I+1, J+1, 2)

    arrays = [("rho", Q[RHO]), ("u_x", Q[UX]), ("u_y", Q[UY]),
              ("p", Q[PRE]), ("mu_av", mu_av)]
    if err is not None:
        arrays.append(("density_error", err))

    try:
        with open(path, "w") as f:
            f.write("# vtk DataFile Version 3.0\n")
            f.write("shockav field dump\n")
            f.write("ASCII\n")
            f.write("DATASET STRUCTURED_GRID\n")
            f.write(f"DIMENSIONS {I + 1} {J + 1} 1\n")
            f.write(f"POINTS {(I + 1) * (J + 1)} double\n")
            for j in range(J + 1):
                for i in range(I + 1):
                    f.write(f"{_f(nodes[i, j, 0])} {_f(nodes[i, j, 1])} 0.0\n")
            f.write(f"CELL_DATA {I * J}\n")
            for name, arr in arrays:
                f.write(f"SCALARS {name} double 1\n")
                f.write("LOOKUP_TABLE default\n")
                for j in range(J):
                    for i in range(I):
                        f.write(_f(arr[i, j]) + "\n")

        csv_path = os.path.splitext(path)[0] + ".csv"
        centers = grid.centers
        with open(csv_path, "w") as f:
            f.write("i,j,x,y," + ",".join(n for n, _ in arrays) + "\n")
            for j in range(J):
                for i in range(I):
                    row = [str(i), str(j), _f(centers[i, j, 0]),
                           _f(centers[i, j, 1])]
                    row += [_f(arr[i, j]) for _, arr in arrays]
                    f.write(",".join(row) + "\n")
    except OSError as exc:
        raise OSError(f"writing field dump {path}: {exc}") from exc


def read_field_csv(path: str):
    """Companion-CSV reader; returns (header list, float ndarray of the
    numeric columns)."""
    with open(path) as f:
        header = f.readline().strip().split(",")
        data = np.loadtxt(f, delimiter=",", ndmin=2)
    return header, data


class MetricsWriter:
    """Streaming metrics.csv writer: step, t, x_s, eps0, eps1, mass_drift."""

    COLUMNS = ("step", "t", "x_s", "eps0", "eps1", "mass_drift")

    def __init__(self, path: str):
        self.path = path
        self.last_t = None
        self._fh = open(path, "w")
        self._fh.write(",".join(self.COLUMNS) + "\n")

    def write(self, step: int, t: float, x_s: float, e0: float, e1: float,
              mass_drift: float) -> None:
        self._fh.write(f"{step},{_f(t)},{_f(x_s)},{_f(e0)},{_f(e1)},"
                       f"{_f(mass_drift)}\n")
        self.last_t = t

    def close(self) -> None:
        self._fh.close()

    def __enter__(self):
        return self

    def __exit__(self, *exc):
        self.close()
        return False


@dataclass
class RunReport:
    case: str
    scheme: str
    n_steps: int = 0
    t_final: float = 0.0
    wall_time_s: float = 0.0
    eps0_max: float = 0.0
    eps1_max: float = 0.0
    conservation_drift: float = 0.0
    passed: bool = False
    error: str | None = None
    extra: dict = field(default_factory=dict)


def write_report(report: RunReport, path: str) -> None:
    with open(path, "w") as f:
        json.dump(dataclasses.asdict(report), f, indent=2, sort_keys=True)
        f.write("\n")


def write_sweep_table(path: str, col_label: str, col_values,
                      rows: dict) -> None:
    """rows: {row label: [cell text per column]}; a paper-style table."""
    with open(path, "w") as f:
        f.write(col_label + "," + ",".join(str(v) for v in col_values) + "\n")
        for label, cells in rows.items():
            f.write(str(label) + "," + ",".join(str(c) for c in cells) + "\n")
