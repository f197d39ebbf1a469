"""Periodic grid arithmetic on the unit torus."""

from typing import Union

import numpy as np
from scipy import sparse

from app.core.errors import InvalidArgumentError
from app.core.schemas import GridSpec


def nonneg_power(z: Union[np.ndarray, float], p: float) -> np.ndarray:
    """z**p for z >= 0 with 0**p = 0 (p > 0), 1 (p = 0), inf (p < 0)."""
    base = np.maximum(np.asarray(z, dtype=float), 0.0)
    with np.errstate(divide="ignore"):
        return np.power(base, p)


def node_positions(grid: GridSpec) -> np.ndarray:
    """Node coordinates x_i = i * h, i = 1..N."""
    return np.arange(1, grid.n_cells + 1, dtype=float) * grid.h


def as_grid_vector(w, grid: GridSpec, name: str = "w") -> np.ndarray:
    arr = np.asarray(w, dtype=float)
    if arr.ndim != 1 or arr.shape[0] != grid.n_cells:
        raise InvalidArgumentError(
            f"{name} has shape {arr.shape}, expected ({grid.n_cells},) for this grid"
        )
    return arr


def second_difference(w, grid: GridSpec) -> np.ndarray:
    """w_{i+1} - 2 w_i + w_{i-1} with periodic indices."""
    arr = as_grid_vector(w, grid)
    return np.roll(arr, -1) - 2.0 * arr + np.roll(arr, 1)


def forward_difference(w, grid: GridSpec) -> np.ndarray:
    """w_{i+1} - w_i with periodic indices."""
    arr = as_grid_vector(w, grid)
    return np.roll(arr, -1) - arr


def periodic_laplacian(n_cells: int) -> sparse.csr_matrix:
    """Sparse matrix of the periodic second difference (no 1/h^2 factor)."""
    if n_cells < 2:
        raise InvalidArgumentError("periodic stencil needs at least 2 cells")
    idx = np.arange(n_cells)
    rows = np.concatenate([idx, idx, idx])
    cols = np.concatenate([(idx - 1) % n_cells, idx, (idx + 1) % n_cells])
    data = np.concatenate([np.ones(n_cells), -2.0 * np.ones(n_cells), np.ones(n_cells)])
    # duplicate entries are summed, which gives the right wrap for N = 2
    return sparse.coo_matrix((data, (rows, cols)), shape=(n_cells, n_cells)).tocsr()
