"""Shadow zones and observability fields for a set of observer positions."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .eikonal import solve_distance
from .grid import Grid, InvalidArgument, Obstacle, point_blocked


@dataclass(frozen=True)
class ObserverSet:
    positions: tuple[tuple[float, float], ...]
    sigma: float = 0.1
    rho: float = 1.0
    khat_offset: float = 0.1

    def __post_init__(self):
        if len(self.positions) < 1:
            raise InvalidArgument("need at least one observer position")
        if not self.sigma > 0:
            raise InvalidArgument("sigma must be positive")
        if not self.rho >= 0:
            raise InvalidArgument("rho must be non-negative")
        if not self.khat_offset > 0:
            raise InvalidArgument("khat_offset must be positive")

    @property
    def r(self) -> int:
        return len(self.positions)

    def khat(self, d):
        return 1.0 / (self.rho * np.square(d) + self.khat_offset)


def compute_shadow_mask(
    grid: Grid,
    blocked: np.ndarray,
    obstacles: Sequence[Obstacle],
    observer: Sequence[float],
    method: str = "exact",
) -> np.ndarray:
    """Boolean field, ``True`` where a node is hidden from ``observer``.

    ``method="exact"`` intersects the sight line with the obstacle polygons.
    With ``method="eikonal"`` a node is in shadow when its obstacle-aware
    distance exceeds the free-space distance by more than ``1e-3 * h``, both
    from Fast Marching; cheaper but noticeably less accurate near shadow
    boundaries. BLOCKED nodes are reported as not shadowed;
    their observability is never used.
    """
    if point_blocked(obstacles, observer):
        raise InvalidArgument(f"observer {tuple(observer)} inside an obstacle")
    if method == "exact":
        return exact_shadow_mask(grid, blocked, obstacles, observer)
    if method != "eikonal":
        raise InvalidArgument(f"unknown shadow method {method!r}")
    d0 = solve_distance(grid, None, observer)
    if not blocked.any():
        return np.zeros(grid.shape, dtype=bool)
    d = solve_distance(grid, blocked, observer, obstacles=obstacles)
    tau = 1e-3 * grid.h
    return (d > d0 + tau) & ~blocked


def _sight_blocked(ob: Obstacle, o: Sequence[float], X: np.ndarray, Y: np.ndarray) -> np.ndarray:
    """Whether the segment from ``o`` to each point enters the interior of ``ob``."""
    dx = X - o[0]
    dy = Y - o[1]
    ts = [np.zeros_like(X), np.ones_like(X)]
    for (x1, y1), (x2, y2) in ob.edges():
        ex, ey = x2 - x1, y2 - y1
        den = dx * ey - dy * ex
        with np.errstate(divide="ignore", invalid="ignore", over="ignore"):
            t = ((x1 - o[0]) * ey - (y1 - o[1]) * ex) / den
            s = ((x1 - o[0]) * dy - (y1 - o[1]) * dx) / den
        hit = (np.abs(den) > 1e-300) & (s >= -1e-12) & (s <= 1 + 1e-12) & (t > 0) & (t < 1)
        ts.append(np.where(hit, t, np.nan))
        # vertices lying on the sight line split it as well
        cross = dx * (y1 - o[1]) - dy * (x1 - o[0])
        dd = dx * dx + dy * dy
        with np.errstate(divide="ignore", invalid="ignore"):
            tv = ((x1 - o[0]) * dx + (y1 - o[1]) * dy) / dd
        on = (np.abs(cross) <= 1e-12 * np.maximum(dd, 1e-300)) & (tv > 0) & (tv < 1)
        ts.append(np.where(on, tv, np.nan))
    T = np.sort(np.stack(ts, axis=-1), axis=-1)
    mids = 0.5 * (T[..., 1:] + T[..., :-1])
    out = np.zeros(X.shape, dtype=bool)
    for k in range(mids.shape[-1]):
        m = mids[..., k]
        ok = np.isfinite(m)
        if not ok.any():
            continue
        mx = o[0] + m[ok] * dx[ok]
        my = o[1] + m[ok] * dy[ok]
        inside = ob.contains_strict(mx, my, tol=1e-12)
        sub = out[ok]
        sub |= inside
        out[ok] = sub
    return out


def exact_shadow_mask(
    grid: Grid,
    blocked: np.ndarray,
    obstacles: Sequence[Obstacle],
    observer: Sequence[float],
) -> np.ndarray:
    X, Y = grid.mesh()
    out = np.zeros(grid.shape, dtype=bool)
    for ob in obstacles:
        out |= _sight_blocked(ob, observer, X, Y)
    return out & ~blocked


def pointwise_observability(
    grid: Grid,
    blocked: np.ndarray,
    shadow: np.ndarray,
    observer: Sequence[float],
    params: ObserverSet,
) -> np.ndarray:
    X, Y = grid.mesh()
    dist = np.hypot(X - observer[0], Y - observer[1])
    K = params.khat(dist) + params.sigma
    K[shadow] = params.sigma
    K[blocked] = np.inf
    return K


def observability_at(
    params: ObserverSet,
    obstacles: Sequence[Obstacle],
    pts: np.ndarray,
    depth: float = 0.0,
) -> np.ndarray:
    """``K_i`` evaluated exactly at arbitrary points, shape ``(r, len(pts))``.

    Visibility uses the polygon geometry rather than a grid mask, so sharp
    shadow edges are not smeared over a cell. Points inside an obstacle by at
    most ``depth`` are evaluated at the nearest boundary point (chords of a
    path that slides along a wall); deeper points get ``+inf``.
    """
    pts = np.array(np.atleast_2d(pts), dtype=float)
    deep = np.zeros(len(pts), dtype=bool)
    for ob in obstacles:
        inside = ob.contains_strict(pts[:, 0], pts[:, 1])
        for m in np.nonzero(inside)[0]:
            q = ob.nearest_boundary_point(pts[m])
            if np.hypot(*(q - pts[m])) > depth:
                deep[m] = True
            pts[m] = q
    X, Y = pts[:, 0], pts[:, 1]
    out = np.empty((params.r, len(pts)))
    for i, o in enumerate(params.positions):
        shadow = np.zeros(len(pts), dtype=bool)
        for ob in obstacles:
            shadow |= _sight_blocked(ob, o, X, Y)
        k = params.khat(np.hypot(X - o[0], Y - o[1])) + params.sigma
        k[shadow] = params.sigma
        k[deep] = np.inf
        out[i] = k
    return out


def observability_fields(
    grid: Grid,
    blocked: np.ndarray,
    obstacles: Sequence[Obstacle],
    params: ObserverSet,
    method: str = "exact",
) -> tuple[np.ndarray, np.ndarray]:
    """Shadow masks and ``K_i`` fields for every observer, stacked on axis 0."""
    shadows = np.stack(
        [compute_shadow_mask(grid, blocked, obstacles, p, method) for p in params.positions]
    )
    K = np.stack(
        [
            pointwise_observability(grid, blocked, s, p, params)
            for s, p in zip(shadows, params.positions)
        ]
    )
    return shadows, K


def weighted_observability(K_fields: np.ndarray, lam: Sequence[float]) -> np.ndarray:
    """Convex combination ``sum_i lam_i K_i``; ``+inf`` nodes stay ``+inf``."""
    lam = np.asarray(lam, dtype=float)
    K_fields = np.asarray(K_fields, dtype=float)
    if K_fields.ndim != 3 or K_fields.shape[0] != lam.shape[0]:
        raise InvalidArgument(
            f"weights of length {lam.shape[0]} do not match {K_fields.shape[0]} fields"
        )
    inf = ~np.isfinite(K_fields).all(axis=0)
    finite = np.where(np.isfinite(K_fields), K_fields, 0.0)
    out = np.tensordot(lam, finite, axes=1)
    out[inf] = np.inf
    return out
