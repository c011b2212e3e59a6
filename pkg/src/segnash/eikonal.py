"""First-order Fast Marching for ``|grad u| f = K`` with a point target.

The heavy loop lives in a compiled extension (``segnash._fmm``); when it is
not built, the pure-Python twin in ``segnash._fmm_py`` is used instead. Both
produce identical fields.
"""

from __future__ import annotations

import logging
from typing import Sequence

import numpy as np

from . import _fmm_py
from .grid import Grid, InvalidArgument, point_blocked

try:
    from . import _fmm as _fmm_ext
except ImportError:  # pragma: no cover - depends on build environment
    _fmm_ext = None

log = logging.getLogger(__name__)

_BACKENDS = {"python": _fmm_py}
if _fmm_ext is not None:
    _BACKENDS["cython"] = _fmm_ext

BACKEND = "cython" if _fmm_ext is not None else "python"


def available_backends() -> list[str]:
    return sorted(_BACKENDS)


def set_backend(name: str) -> None:
    """Select the Fast Marching kernel (``"cython"`` or ``"python"``)."""
    global BACKEND
    if name not in _BACKENDS:
        raise InvalidArgument(f"backend {name!r} unavailable; have {available_backends()}")
    BACKEND = name


def upwind_update(u_x: float, u_y: float, K: float, f: float, h: float, h_y: float | None = None) -> float:
    """Single-node upwind update from the smaller accepted neighbour per axis.

    Returns ``inf`` (no update) when both neighbours are unknown. Uses the
    two-sided quadratic when it is causal (result not below either
    neighbour) and the one-sided update otherwise.
    """
    if not (K > 0 and f > 0 and h > 0):
        raise InvalidArgument("K, f and h must be positive")
    return _fmm_py.upwind(float(u_x), float(u_y), K / f, h, h if h_y is None else h_y)


def snap_to_free(grid: Grid, blocked: np.ndarray, p: Sequence[float]) -> tuple[int, int]:
    """Nearest FREE node to ``p`` (ties broken by flat index)."""
    i, j = grid.nearest_index(p)
    if not blocked[j, i]:
        return i, j
    X, Y = grid.mesh()
    d = np.hypot(X - p[0], Y - p[1])
    d[blocked] = np.inf
    flat = int(np.argmin(d))
    if not np.isfinite(d.flat[flat]):
        raise InvalidArgument("no FREE nodes")
    return flat % grid.n_x, flat // grid.n_x


def solve_eikonal(
    grid: Grid,
    blocked: np.ndarray,
    cost,
    target: Sequence[float],
    speed=1.0,
    obstacles=(),
    return_order: bool = False,
):
    """Value function of the minimal cumulative cost to reach ``target``.

    ``cost`` (K) and ``speed`` (f) are scalars or ``(n_y, n_x)`` arrays.
    BLOCKED and unreachable nodes come back as ``+inf``.
    """
    blocked = np.ascontiguousarray(blocked, dtype=bool)
    if blocked.shape != grid.shape:
        raise InvalidArgument("mask shape does not match grid")
    if blocked.all():
        raise InvalidArgument("no FREE nodes")
    if not grid.contains(target, 1e-9 * grid.h):
        raise InvalidArgument(f"target {tuple(target)} outside the domain")
    if obstacles and point_blocked(obstacles, target):
        raise InvalidArgument(f"target {tuple(target)} inside an obstacle")
    ti, tj = grid.nearest_index(target)
    if blocked[tj, ti]:
        if not obstacles:
            raise InvalidArgument(f"target {tuple(target)} inside an obstacle")
        ti, tj = snap_to_free(grid, blocked, target)

    K = np.broadcast_to(np.asarray(cost, dtype=float), grid.shape)
    f = np.broadcast_to(np.asarray(speed, dtype=float), grid.shape)
    free = ~blocked
    if (K[free] <= 0).any() or not np.isfinite(K[free]).all():
        raise InvalidArgument("cost must be positive and finite on FREE nodes")
    if (f[free] <= 0).any() or not np.isfinite(f[free]).all():
        raise InvalidArgument("speed must be positive and finite on FREE nodes")
    slowness = np.full(grid.shape, np.inf)
    slowness[free] = K[free] / f[free]

    u, order = _BACKENDS[BACKEND].fast_march(
        np.ascontiguousarray(slowness),
        blocked.view(np.uint8),
        ti,
        tj,
        grid.h_x,
        grid.h_y,
    )
    if return_order:
        return u, order
    return u


def solve_distance(grid: Grid, blocked: np.ndarray | None, seed: Sequence[float], obstacles=()) -> np.ndarray:
    """Distance field from ``seed``; pass ``blocked=None`` to ignore obstacles."""
    if blocked is None:
        return solve_eikonal(grid, np.zeros(grid.shape, dtype=bool), 1.0, seed)
    return solve_eikonal(grid, blocked, 1.0, seed, obstacles=obstacles)
