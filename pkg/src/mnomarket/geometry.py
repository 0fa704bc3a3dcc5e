"""Hexagonal 19-cell layout with toroidal wrap-around and per-cell user grids.

Cells are pointy-top hexagons of circumradius ``cell_radius``.  Centers sit
on a triangular lattice with spacing ``sqrt(3) * cell_radius``; the cluster
is the center cell plus two rings.  Distances are measured on the torus
obtained by tiling the plane with copies of the cluster.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

N_CELLS = 19
POINTS_PER_CELL = 64

_AXIAL_DIRECTIONS = [(1, 0), (1, -1), (0, -1), (-1, 0), (-1, 1), (0, 1)]
# Cluster translation for a hex patch of radius 2 (q^2 + qr + r^2 = 19).
_CLUSTER_SHIFT = (5, -2)


def _axial_to_xy(q: int, r: int, radius: float) -> tuple[float, float]:
    return (math.sqrt(3.0) * radius * (q + r / 2.0), 1.5 * radius * r)


def _rotate_axial(q: int, r: int) -> tuple[int, int]:
    # 60 degree counter-clockwise rotation in axial coordinates.
    return (-r, q + r)


def _cluster_axial() -> list[tuple[int, int]]:
    cells = [(0, 0)]
    for ring in (1, 2):
        q, r = -ring, ring  # start at direction 4 scaled by ring
        for dq, dr in _AXIAL_DIRECTIONS:
            for _ in range(ring):
                cells.append((q, r))
                q, r = q + dq, r + dr
    return cells


@dataclass(frozen=True)
class HexLayout:
    """Immutable 19-cell layout.

    ``cell_centers`` and ``wrap_images`` are ``(n, 2)`` arrays in km; the
    first wrap image is the zero vector.
    """

    cell_radius: float
    cell_centers: np.ndarray = field(repr=False)
    wrap_images: np.ndarray = field(repr=False)

    @property
    def cells(self) -> range:
        return range(len(self.cell_centers))

    @property
    def n_cells(self) -> int:
        return len(self.cell_centers)

    @property
    def site_spacing(self) -> float:
        return math.sqrt(3.0) * self.cell_radius


def build_layout(cell_radius: float = 1.0) -> HexLayout:
    if not cell_radius > 0:
        raise ValueError(f"cell_radius must be positive, got {cell_radius!r}")
    centers = np.array([_axial_to_xy(q, r, cell_radius) for q, r in _cluster_axial()])
    shifts = [(0, 0)]
    q, r = _CLUSTER_SHIFT
    for _ in range(6):
        shifts.append((q, r))
        q, r = _rotate_axial(q, r)
    images = np.array([_axial_to_xy(q, r, cell_radius) for q, r in shifts])
    centers.setflags(write=False)
    images.setflags(write=False)
    return HexLayout(cell_radius=float(cell_radius), cell_centers=centers, wrap_images=images)


def wrapped_offsets(layout: HexLayout, a, b) -> np.ndarray:
    """Shortest displacement ``b - a`` on the torus, broadcasting over leading axes."""
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    diff = b - a
    cand = diff[..., None, :] + layout.wrap_images
    d2 = np.einsum("...ij,...ij->...i", cand, cand)
    idx = np.argmin(d2, axis=-1)
    return np.take_along_axis(cand, idx[..., None, None], axis=-2)[..., 0, :]


def wrapped_distance(layout: HexLayout, a, b):
    """Minimum Euclidean distance between ``a`` and ``b`` over all wrap images.

    Accepts single points or broadcastable arrays of points (last axis = 2).
    Returns a float for scalar inputs.
    """
    off = wrapped_offsets(layout, a, b)
    d = np.sqrt(np.einsum("...i,...i->...", off, off))
    return float(d) if d.ndim == 0 else d


def _lattice(width: float, height: float, nx: int, ny: int) -> np.ndarray:
    xs = -width / 2.0 + (np.arange(nx) + 0.5) * (width / nx)
    ys = -height / 2.0 + (np.arange(ny) + 0.5) * (height / ny)
    return np.array([(x, y) for y in ys for x in xs])


def _grid_offsets(radius: float, side: int = 8) -> np.ndarray:
    width, height = math.sqrt(3.0) * radius, 2.0 * radius
    coarse = _lattice(width, height, side, side)
    inside = inside_hexagon(coarse, (0.0, 0.0), radius)
    # Points of the bounding-box lattice that miss the hexagon move to the
    # nearest free interior point of a lattice refined by two; the refined
    # points never coincide with coarse ones.
    fine = _lattice(width, height, 2 * side, 2 * side)
    fine = fine[inside_hexagon(fine, (0.0, 0.0), radius)]
    free = np.ones(len(fine), dtype=bool)
    pts = coarse.copy()
    for k in np.flatnonzero(~inside):
        d2 = np.sum((fine - coarse[k]) ** 2, axis=1)
        d2[~free] = np.inf
        j = int(np.argmin(d2))
        free[j] = False
        pts[k] = fine[j]
    return pts


@dataclass(frozen=True)
class UserGrid:
    owner_cell: int
    points: np.ndarray = field(repr=False)


def user_grid(layout: HexLayout, cell: int) -> UserGrid:
    """Deterministic 64-point grid covering the interior of ``cell``.

    An 8 x 8 lattice over the hexagon's bounding box, with the corner points
    that fall outside pulled onto the nearest free interior point of a
    twice-finer lattice.
    """
    if not (isinstance(cell, (int, np.integer)) and 0 <= cell < layout.n_cells):
        raise IndexError(f"cell index {cell!r} outside 0..{layout.n_cells - 1}")
    pts = _grid_offsets(layout.cell_radius) + layout.cell_centers[cell]
    pts.setflags(write=False)
    return UserGrid(owner_cell=int(cell), points=pts)


def inside_hexagon(points, center, radius: float) -> np.ndarray:
    """Strict interior test for a pointy-top hexagon."""
    p = np.atleast_2d(np.asarray(points, dtype=float)) - np.asarray(center, dtype=float)
    x, y = np.abs(p[:, 0]), np.abs(p[:, 1])
    h = math.sqrt(3.0) / 2.0 * radius
    return (x < h) & (y < radius) & (x / math.sqrt(3.0) + y < radius)
