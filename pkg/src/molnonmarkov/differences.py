"""Finite differences and quadrature on uniformly sampled series."""

from __future__ import annotations

import numpy as np


def _check_uniform(t: np.ndarray) -> float:
    if t.size < 3:
        raise ValueError("need at least three samples to differentiate")
    h = np.diff(t)
    if not np.allclose(h, h[0], rtol=1e-9, atol=0.0):
        raise ValueError("samples must be uniformly spaced")
    return float(h[0])


# antisymmetric central stencil weights for offsets 1..k
_STENCILS = {
    2: (1 / 2,),
    4: (2 / 3, -1 / 12),
    6: (3 / 4, -3 / 20, 1 / 60),
    8: (4 / 5, -1 / 5, 4 / 105, -1 / 280),
}


def central_difference(t, y, order: int = 2) -> np.ndarray:
    """dy/dt by central differences of the given order (2, 4, 6 or 8).

    The outermost order/2 samples at each end keep the second-order
    one-sided values of :func:`numpy.gradient`.
    """
    if order not in _STENCILS:
        raise ValueError("order must be 2, 4, 6 or 8")
    t = np.asarray(t, dtype=float)
    y = np.asarray(y)
    h = _check_uniform(t)
    out = np.gradient(y, h, edge_order=2)
    k = order // 2
    n = y.size
    if order == 2 or n < 2 * k + 1:
        return out
    acc = np.zeros(n - 2 * k, dtype=np.result_type(y, float))
    for j, w in enumerate(_STENCILS[order], start=1):
        acc += w * (y[k + j:n - k + j] - y[k - j:n - k - j])
    out[k:n - k] = acc / h
    return out


def trapezoid_segments(t, y, valid) -> tuple[np.ndarray, np.ndarray]:
    """Per-segment trapezoid areas and a mask of segments with both ends valid."""
    t = np.asarray(t, dtype=float)
    y = np.asarray(y, dtype=float)
    valid = np.asarray(valid, dtype=bool)
    ok = valid[:-1] & valid[1:]
    y0 = np.where(valid[:-1], y[:-1], 0.0)
    y1 = np.where(valid[1:], y[1:], 0.0)
    area = 0.5 * (y0 + y1) * np.diff(t)
    return np.where(ok, area, 0.0), ok
