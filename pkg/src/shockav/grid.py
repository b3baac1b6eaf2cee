"""Structured grids, their metric terms, and deterministic perturbations.

A grid is a logically rectangular lattice of I x J cells.  Nodes are stored on
an index range extended by NG = 3 in every direction so that ghost-cell
geometry (centers, volumes, face vectors) is the analytic continuation of the
family formula rather than an ad-hoc extrapolation; every generator below is
defined by a closed-form node map, so the continuation is exact.

Face area vectors are 90-degree rotations of the face edge vectors, signed to
point toward increasing index, and cell volumes come from the shoelace
formula.  With those two choices the per-cell closure identity

    S_xi(i+1/2) - S_xi(i-1/2) + S_eta(j+1/2) - S_eta(j-1/2) = 0

holds to round-off by construction, which is what guarantees free-stream
preservation on the sheared and polar grids.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable

import numpy as np

NG = 3  # ghost layers; the five-point WENO stencil needs three

_SM_GAMMA = 0x9E3779B97F4A7C15
_SM_MIX1 = 0xBF58476D1CE4E5B9
_SM_MIX2 = 0x94D049BB133111EB
_MASK64 = 0xFFFFFFFFFFFFFFFF


class InvalidSpec(ValueError):
    pass


def splitmix64_stream(seed: int, count: int) -> np.ndarray:
    """First `count` uniforms in [0, 1) of the splitmix64 sequence.

    state += 0x9E3779B97F4A7C15
    z = state; z ^= z >> 30; z *= 0xBF58476D1CE4E5B9
    z ^= z >> 27; z *= 0x94D049BB133111EB; z ^= z >> 31
    uniform = (z >> 11) * 2**-53
    """
    state = seed & _MASK64
    out = np.empty(count, dtype=np.float64)
    for k in range(count):
        state = (state + _SM_GAMMA) & _MASK64
        z = state
        z = ((z ^ (z >> 30)) * _SM_MIX1) & _MASK64
        z = ((z ^ (z >> 27)) * _SM_MIX2) & _MASK64
        z = z ^ (z >> 31)
        out[k] = (z >> 11) * 2.0**-53
    return out


@dataclass(frozen=True)
class GridSpec:
    """Parameters for one of the supported grid families.

    family: rectangular | parallelogram | polar_annulus | dmr_cartesian |
            noh_cartesian | vortex_periodic
    For the three fixed-domain families (dmr/noh/vortex) the extents are
    implied and h_x/h_y are derived from I, J.
    """

    family: str
    I: int
    J: int
    h_x: float = 1.0
    h_y: float = 1.0
    alpha: float = 0.0  # parallelogram slant: grid lines x + alpha*y = const
    x0: float = 0.0
    y0: float = 0.0
    r_inner: float = 1.0
    r_outer: float = 3.0
    phi_min: float = 0.0
    phi_max: float = 0.0


@dataclass
class StructuredGrid:
    spec: GridSpec
    I: int
    J: int
    # nodes on the extended lattice: index (i + NG, j + NG), shape (I+2NG+1, J+2NG+1, 2)
    nodes_ext: np.ndarray
    tags: dict = field(default_factory=dict)

    # metric arrays, filled by _compute_metrics; all on the extended cell lattice
    volumes_ext: np.ndarray = None
    face_xi_ext: np.ndarray = None   # (I+2NG+1, J+2NG, 2), face i-1/2 of ext cell i
    face_eta_ext: np.ndarray = None  # (I+2NG, J+2NG+1, 2)
    centers_ext: np.ndarray = None
    sbar_xi_ext: np.ndarray = None   # per-cell mean of the two xi faces
    sbar_eta_ext: np.ndarray = None
    h_ext: np.ndarray = None         # characteristic mesh size per cell

    # ----- interior views -------------------------------------------------
    @property
    def nodes(self) -> np.ndarray:
        return self.nodes_ext[NG:NG + self.I + 1, NG:NG + self.J + 1]

    @property
    def volumes(self) -> np.ndarray:
        return self.volumes_ext[NG:NG + self.I, NG:NG + self.J]

    @property
    def face_xi(self) -> np.ndarray:
        return self.face_xi_ext[NG:NG + self.I + 1, NG:NG + self.J]

    @property
    def face_eta(self) -> np.ndarray:
        return self.face_eta_ext[NG:NG + self.I, NG:NG + self.J + 1]

    @property
    def centers(self) -> np.ndarray:
        return self.centers_ext[NG:NG + self.I, NG:NG + self.J]

    def with_nodes(self, nodes_ext: np.ndarray) -> "StructuredGrid":
        g = StructuredGrid(self.spec, self.I, self.J, nodes_ext, dict(self.tags))
        _compute_metrics(g)
        return g


def _node_map(spec: GridSpec) -> Callable:
    f = spec.family
    if f == "rectangular":
        return lambda i, j: (spec.x0 + i * spec.h_x, spec.y0 + j * spec.h_y)
    if f == "parallelogram":
        if spec.alpha <= 0.0:
            raise InvalidSpec("parallelogram grids need alpha > 0")
        n_shift = spec.alpha * spec.J * spec.h_y / spec.h_x
        if abs(n_shift - round(n_shift)) > 1e-9 or round(n_shift) < 1:
            raise InvalidSpec(
                f"parallelogram shift alpha*J*h_y/h_x = {n_shift} must be a "
                "positive integer for shifted periodicity")
        return lambda i, j: (spec.x0 + i * spec.h_x - spec.alpha * j * spec.h_y,
                             spec.y0 + j * spec.h_y)
    if f == "polar_annulus":
        dr = (spec.r_outer - spec.r_inner) / spec.I
        dphi = (spec.phi_max - spec.phi_min) / spec.J
        if dr <= 0 or dphi <= 0:
            raise InvalidSpec("polar annulus needs r_outer > r_inner, phi_max > phi_min")
        if spec.r_inner - NG * dr <= 0:
            raise InvalidSpec("polar annulus ghost extension would cross r = 0")

        def polar(i, j):
            r = spec.r_inner + i * dr
            phi = spec.phi_min + j * dphi
            return (r * np.cos(phi), r * np.sin(phi))

        return polar
    if f == "dmr_cartesian":
        hx, hy = 4.0 / spec.I, 1.0 / spec.J
        return lambda i, j: (i * hx, j * hy)
    if f == "noh_cartesian":
        hx, hy = 1.0 / spec.I, 1.0 / spec.J
        return lambda i, j: (i * hx, j * hy)
    if f == "vortex_periodic":
        hx, hy = 10.0 / spec.I, 10.0 / spec.J
        return lambda i, j: (i * hx, j * hy)
    raise InvalidSpec(f"unknown grid family {f!r}")


def make_grid(spec: GridSpec) -> StructuredGrid:
    if spec.I < 1 or spec.J < 1:
        raise InvalidSpec("cell counts must be positive")
    node = _node_map(spec)
    ii = np.arange(-NG, spec.I + NG + 1, dtype=np.float64)
    jj = np.arange(-NG, spec.J + NG + 1, dtype=np.float64)
    II, JJ = np.meshgrid(ii, jj, indexing="ij")
    x, y = node(II, JJ)
    nodes_ext = np.stack([x, y], axis=-1)
    g = StructuredGrid(spec, spec.I, spec.J, nodes_ext)
    _compute_metrics(g)
    return g


def _compute_metrics(g: StructuredGrid) -> None:
    nd = g.nodes_ext
    x, y = nd[..., 0], nd[..., 1]

    # xi face at index line i spans nodes (i, j) -> (i, j+1); normal -> +i
    ex = x[:, 1:] - x[:, :-1]
    ey = y[:, 1:] - y[:, :-1]
    g.face_xi_ext = np.stack([ey, -ex], axis=-1)

    # eta face at index line j spans nodes (i, j) -> (i+1, j); normal -> +j
    ex = x[1:, :] - x[:-1, :]
    ey = y[1:, :] - y[:-1, :]
    g.face_eta_ext = np.stack([-ey, ex], axis=-1)

    x00, y00 = x[:-1, :-1], y[:-1, :-1]
    x10, y10 = x[1:, :-1], y[1:, :-1]
    x11, y11 = x[1:, 1:], y[1:, 1:]
    x01, y01 = x[:-1, 1:], y[:-1, 1:]
    g.volumes_ext = 0.5 * ((x00 * y10 - x10 * y00) + (x10 * y11 - x11 * y10)
                           + (x11 * y01 - x01 * y11) + (x01 * y00 - x00 * y01))
    if np.any(g.volumes_ext <= 0.0):
        raise InvalidSpec("grid has non-positive cell volumes (inverted cells)")

    g.centers_ext = np.stack([0.25 * (x00 + x10 + x11 + x01),
                              0.25 * (y00 + y10 + y11 + y01)], axis=-1)
    g.sbar_xi_ext = 0.5 * (g.face_xi_ext[:-1, :] + g.face_xi_ext[1:, :])
    g.sbar_eta_ext = 0.5 * (g.face_eta_ext[:, :-1] + g.face_eta_ext[:, 1:])

    d1 = np.hypot(x11 - x00, y11 - y00)
    d2 = np.hypot(x01 - x10, y01 - y10)
    g.h_ext = np.maximum(d1, d2) / np.sqrt(2.0)


def characteristic_mesh_size(grid: StructuredGrid, i: int, j: int) -> float:
    """Cell size h = max(d1, d2)/sqrt(2) from the two cell diagonals."""
    return float(grid.h_ext[i + NG, j + NG])


def closure_residual(grid: StructuredGrid) -> float:
    """Max |sum of signed face vectors| per cell, normalized by max face area."""
    fx, fe = grid.face_xi_ext, grid.face_eta_ext
    res = (fx[1:, :] - fx[:-1, :]) + (fe[:, 1:] - fe[:, :-1])
    scale = max(np.abs(fx).max(), np.abs(fe).max())
    return float(np.abs(res).max() / scale)


def n_shift(spec: GridSpec) -> int:
    """Transverse periodic shift (in cells) of a parallelogram grid."""
    if spec.family != "parallelogram":
        return 0
    return int(round(spec.alpha * spec.J * spec.h_y / spec.h_x))


# ---------------------------------------------------------------------------
# Quirk-style perturbation injectors

def _perturbed_nodes(grid: StructuredGrid, lines, delta: float, rng_seed: int) -> np.ndarray:
    """Perturb node x-coordinates on the given i-lines by delta*(2*RND - 1).

    One splitmix64 stream provides J draws per line (node rows 0..J-1); row J
    and the ghost rows reuse the wrapped values so that the periodic
    identification of rows j and j+J survives the perturbation exactly.
    """
    J = grid.J
    nodes = grid.nodes_ext.copy()
    draws = splitmix64_stream(rng_seed, len(lines) * J)
    j_ext = np.arange(-NG, J + NG + 1)
    j_src = np.mod(j_ext, J)
    for k, i0 in enumerate(lines):
        r = draws[k * J:(k + 1) * J]
        nodes[i0 + NG, :, 0] += delta * (2.0 * r[j_src] - 1.0)
    return nodes


def perturb_grid_line(grid: StructuredGrid, i0: int, delta: float,
                      rng_seed: int) -> StructuredGrid:
    if not 0 < i0 < grid.I:
        raise InvalidSpec(f"perturbed line {i0} must be interior")
    if delta == 0.0:
        return grid.with_nodes(grid.nodes_ext.copy())
    return grid.with_nodes(_perturbed_nodes(grid, [i0], delta, rng_seed))


def perturb_grid_band(grid: StructuredGrid, i0: int, half_width: int,
                      delta: float, rng_seed: int) -> StructuredGrid:
    lines = range(i0 - half_width, i0 + half_width + 1)
    if lines.start < 1 or lines.stop > grid.I:
        raise InvalidSpec("perturbation band leaves the grid interior")
    if delta == 0.0:
        return grid.with_nodes(grid.nodes_ext.copy())
    return grid.with_nodes(_perturbed_nodes(grid, list(lines), delta, rng_seed))
