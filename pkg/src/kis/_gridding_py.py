"""Pure numpy gridding kernels (fallback for the compiled ``_gridding`` module).

Both backends share one contract. ``idx`` and ``w`` have shape ``(n, d, L)``:
for node ``i`` and axis ``t`` the window touches grid lines ``idx[i, t, :]``
(already wrapped modulo the grid size) with weights ``w[i, t, :]``. The
d-dimensional window is the tensor product of the per-axis windows.
"""

import numpy as np


def _flat_indices(idx, grid_size):
    n, d, L = idx.shape
    flat = idx[:, 0, :]
    for t in range(1, d):
        flat = (flat[:, :, None] * grid_size + idx[:, t, None, :]).reshape(n, -1)
    return flat


def _tensor_weights(w):
    n, d, L = w.shape
    out = w[:, 0, :]
    for t in range(1, d):
        out = (out[:, :, None] * w[:, t, None, :]).reshape(n, -1)
    return out


def spread(idx, w, v, grid_size):
    """Accumulate ``v[i] * window_i`` onto a periodic grid of side ``grid_size``."""
    d = idx.shape[1]
    flat = _flat_indices(idx, grid_size)
    weights = _tensor_weights(w) * v[:, None]
    grid = np.bincount(flat.ravel(), weights=weights.ravel(), minlength=grid_size**d)
    return grid.reshape((grid_size,) * d)


def gather(idx, w, grid):
    """Evaluate ``sum_l grid[l] * window_i(l)`` for every node ``i``."""
    grid_size = grid.shape[0]
    flat = _flat_indices(idx, grid_size)
    return np.einsum("ij,ij->i", grid.ravel()[flat], _tensor_weights(w))
