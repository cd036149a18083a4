"""Evaluate classifiers on a regular grid and compare decision regions
inside and outside the training hull."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import ndimage

from hullgap.boundary.hull2d import HullPolygon, polygon_mask
from hullgap.boundary.poly import RED
from hullgap.errors import InputError

# a grid cell whose two logits tie is labelled with this class
TIE_CLASS = RED


@dataclass(frozen=True, eq=False)
class Grid2:
    """Class labels at cell centers; arrays are indexed ``[iy, ix]``."""

    bounds: tuple
    resolution: tuple
    labels: np.ndarray
    inside: np.ndarray

    def centers(self):
        return cell_centers(self.bounds, self.resolution)


def cell_centers(bounds, resolution):
    x_lo, x_hi, y_lo, y_hi = bounds
    nx, ny = resolution
    xs = x_lo + (np.arange(nx) + 0.5) * (x_hi - x_lo) / nx
    ys = y_lo + (np.arange(ny) + 0.5) * (y_hi - y_lo) / ny
    return xs, ys


def grid_eval(model, bounds, resolution, hull: HullPolygon | None = None) -> Grid2:
    """Label every cell center by the argmax of the model's two logits.

    ``model`` is anything with a ``logits(points)`` method.  The inside mask
    marks cell centers in ``hull`` (all False when no hull is given).
    """
    nx, ny = resolution
    if nx < 2 or ny < 2:
        raise InputError("resolution must be >= 2 along each axis")
    xs, ys = cell_centers(bounds, resolution)
    gx, gy = np.meshgrid(xs, ys)
    pts = np.column_stack([gx.ravel(), gy.ravel()])
    logits = model.logits(pts)
    # argmax picks the first maximal entry; class 0 is red
    labels = np.argmax(logits, axis=1).reshape(ny, nx)
    inside = polygon_mask(hull, pts).reshape(ny, nx) if hull is not None else np.zeros((ny, nx), bool)
    return Grid2(tuple(float(b) for b in bounds), (int(nx), int(ny)), labels, inside)


def nearest_cell(grid: Grid2, point) -> tuple:
    x_lo, x_hi, y_lo, y_hi = grid.bounds
    nx, ny = grid.resolution
    ix = int(np.clip(np.floor((point[0] - x_lo) / (x_hi - x_lo) * nx), 0, nx - 1))
    iy = int(np.clip(np.floor((point[1] - y_lo) / (y_hi - y_lo) * ny), 0, ny - 1))
    return iy, ix


def region_disagreement(a: Grid2, b: Grid2) -> dict:
    """Fraction of cells with different labels, inside and outside the hull.

    A region with no cells reports NaN.
    """
    if a.labels.shape != b.labels.shape or a.bounds != b.bounds:
        raise InputError("grids must share bounds and resolution")
    if not np.array_equal(a.inside, b.inside):
        raise InputError("grids must share the same inside mask")
    diff = a.labels != b.labels

    def rate(mask):
        return float(diff[mask].mean()) if mask.any() else float("nan")

    return {"inside_rate": rate(a.inside), "outside_rate": rate(~a.inside)}


def boundary_cells(labels: np.ndarray) -> np.ndarray:
    """Cells with at least one 4-neighbour of a different label."""
    edge = np.zeros(labels.shape, dtype=bool)
    dx = labels[:, 1:] != labels[:, :-1]
    dy = labels[1:, :] != labels[:-1, :]
    edge[:, 1:] |= dx
    edge[:, :-1] |= dx
    edge[1:, :] |= dy
    edge[:-1, :] |= dy
    return edge


def boundary_component_count(grid: Grid2, region: str = "inside") -> int:
    """Number of 4-connected pieces of decision boundary within a region."""
    if region not in ("inside", "outside"):
        raise InputError("region must be 'inside' or 'outside'")
    mask = grid.inside if region == "inside" else ~grid.inside
    cells = boundary_cells(grid.labels) & mask
    _, count = ndimage.label(cells)
    return int(count)
