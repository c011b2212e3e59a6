"""Uniform grids, obstacles, rasterization and bilinear sampling."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

FREE = False
BLOCKED = True


class InvalidArgument(ValueError):
    pass


class OutOfDomain(ValueError):
    pass


@dataclass(frozen=True)
class Grid:
    """Node-centred uniform grid on ``[x_min, x_max] x [y_min, y_max]``.

    Fields are stored as arrays of shape ``(n_y, n_x)`` so that
    ``values[j, i]`` lives at ``(x_min + i*h_x, y_min + j*h_y)``.
    """

    n_x: int
    n_y: int
    x_min: float
    x_max: float
    y_min: float
    y_max: float

    @property
    def h_x(self) -> float:
        return (self.x_max - self.x_min) / (self.n_x - 1)

    @property
    def h_y(self) -> float:
        return (self.y_max - self.y_min) / (self.n_y - 1)

    @property
    def h(self) -> float:
        return max(self.h_x, self.h_y)

    @property
    def shape(self) -> tuple[int, int]:
        return (self.n_y, self.n_x)

    @property
    def bounds(self) -> tuple[float, float, float, float]:
        return (self.x_min, self.x_max, self.y_min, self.y_max)

    def node(self, i: int, j: int) -> tuple[float, float]:
        return (self.x_min + i * self.h_x, self.y_min + j * self.h_y)

    def xs(self) -> np.ndarray:
        return self.x_min + np.arange(self.n_x) * self.h_x

    def ys(self) -> np.ndarray:
        return self.y_min + np.arange(self.n_y) * self.h_y

    def mesh(self) -> tuple[np.ndarray, np.ndarray]:
        """Node coordinates as two ``(n_y, n_x)`` arrays."""
        return np.meshgrid(self.xs(), self.ys())

    def nearest_index(self, p: Sequence[float]) -> tuple[int, int]:
        i = int(round((p[0] - self.x_min) / self.h_x))
        j = int(round((p[1] - self.y_min) / self.h_y))
        return (min(max(i, 0), self.n_x - 1), min(max(j, 0), self.n_y - 1))

    def contains(self, p: Sequence[float], slack: float = 1e-12) -> bool:
        return (
            self.x_min - slack <= p[0] <= self.x_max + slack
            and self.y_min - slack <= p[1] <= self.y_max + slack
        )

    def clamp(self, p: Sequence[float]) -> np.ndarray:
        return np.array(
            [min(max(p[0], self.x_min), self.x_max), min(max(p[1], self.y_min), self.y_max)]
        )


def build_grid(bounds: Sequence[float], n_x: int, n_y: int) -> Grid:
    """Build a grid from ``(x_min, x_max, y_min, y_max)`` and node counts."""
    if len(bounds) != 4:
        raise InvalidArgument("bounds must be (x_min, x_max, y_min, y_max)")
    x_min, x_max, y_min, y_max = (float(b) for b in bounds)
    if int(n_x) != n_x or int(n_y) != n_y or n_x < 2 or n_y < 2:
        raise InvalidArgument(f"node counts must be integers >= 2, got {n_x}, {n_y}")
    if not (x_max > x_min and y_max > y_min):
        raise InvalidArgument(f"degenerate bounds {bounds}")
    if not all(np.isfinite([x_min, x_max, y_min, y_max])):
        raise InvalidArgument("bounds must be finite")
    return Grid(int(n_x), int(n_y), x_min, x_max, y_min, y_max)


def _segments_cross(p1, p2, q1, q2) -> bool:
    """Proper or touching intersection of two closed segments."""

    def orient(a, b, c):
        v = (b[0] - a[0]) * (c[1] - a[1]) - (b[1] - a[1]) * (c[0] - a[0])
        return 0 if abs(v) < 1e-15 else (1 if v > 0 else -1)

    def on_seg(a, b, c):
        return min(a[0], b[0]) - 1e-15 <= c[0] <= max(a[0], b[0]) + 1e-15 and min(
            a[1], b[1]
        ) - 1e-15 <= c[1] <= max(a[1], b[1]) + 1e-15

    o1, o2 = orient(p1, p2, q1), orient(p1, p2, q2)
    o3, o4 = orient(q1, q2, p1), orient(q1, q2, p2)
    if o1 != o2 and o3 != o4:
        return True
    if o1 == 0 and on_seg(p1, p2, q1):
        return True
    if o2 == 0 and on_seg(p1, p2, q2):
        return True
    if o3 == 0 and on_seg(q1, q2, p1):
        return True
    if o4 == 0 and on_seg(q1, q2, p2):
        return True
    return False


@dataclass(frozen=True)
class Obstacle:
    """Impenetrable, occluding obstacle: an axis-aligned rectangle or a simple polygon.

    ``vertices`` is always populated (counter-clockwise for rectangles), so
    geometric queries treat both kinds uniformly.
    """

    kind: str
    vertices: tuple[tuple[float, float], ...]
    corners: tuple[float, float, float, float] | None = field(default=None)

    @classmethod
    def rectangle(cls, x0: float, y0: float, x1: float, y1: float) -> "Obstacle":
        xa, xb = sorted((float(x0), float(x1)))
        ya, yb = sorted((float(y0), float(y1)))
        if not (xb > xa and yb > ya):
            raise InvalidArgument("rectangle must have positive width and height")
        verts = ((xa, ya), (xb, ya), (xb, yb), (xa, yb))
        return cls("rectangle", verts, (xa, ya, xb, yb))

    @classmethod
    def polygon(cls, vertices: Sequence[Sequence[float]]) -> "Obstacle":
        verts = tuple((float(v[0]), float(v[1])) for v in vertices)
        if len(verts) >= 2 and verts[0] == verts[-1]:
            verts = verts[:-1]
        if len(verts) < 3:
            raise InvalidArgument("polygon needs at least 3 vertices")
        n = len(verts)
        edges = [(verts[k], verts[(k + 1) % n]) for k in range(n)]
        for a in range(n):
            for b in range(a + 1, n):
                if b == a + 1 or (a == 0 and b == n - 1):
                    continue
                if _segments_cross(*edges[a], *edges[b]):
                    raise InvalidArgument("polygon is self-intersecting")
        area2 = sum(
            verts[k][0] * verts[(k + 1) % n][1] - verts[(k + 1) % n][0] * verts[k][1]
            for k in range(n)
        )
        if abs(area2) < 1e-15:
            raise InvalidArgument("polygon has zero area")
        return cls("polygon", verts, None)

    def edges(self) -> list[tuple[tuple[float, float], tuple[float, float]]]:
        v = self.vertices
        return [(v[k], v[(k + 1) % len(v)]) for k in range(len(v))]

    def contains_strict(self, x: np.ndarray, y: np.ndarray, tol: float = 1e-12) -> np.ndarray:
        """Vectorised strict-interior test; points on the boundary are outside."""
        x = np.asarray(x, dtype=float)
        y = np.asarray(y, dtype=float)
        if self.kind == "rectangle":
            xa, ya, xb, yb = self.corners
            return (x > xa + tol) & (x < xb - tol) & (y > ya + tol) & (y < yb - tol)
        inside = np.zeros(np.broadcast(x, y).shape, dtype=bool)
        # even-odd crossing rule
        for (x1, y1), (x2, y2) in self.edges():
            if y1 == y2:
                continue
            cond = (y1 > y) != (y2 > y)
            xc = x1 + (y - y1) * (x2 - x1) / (y2 - y1)
            inside ^= cond & (x < xc)
        return inside & (self.boundary_distance(x, y) > tol)

    def boundary_distance(self, x: np.ndarray, y: np.ndarray) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        y = np.asarray(y, dtype=float)
        best = np.full(np.broadcast(x, y).shape, np.inf)
        for (x1, y1), (x2, y2) in self.edges():
            dx, dy = x2 - x1, y2 - y1
            t = np.clip(((x - x1) * dx + (y - y1) * dy) / (dx * dx + dy * dy), 0.0, 1.0)
            best = np.minimum(best, np.hypot(x - (x1 + t * dx), y - (y1 + t * dy)))
        return best

    def nearest_boundary_point(self, p: Sequence[float]) -> np.ndarray:
        best, best_d = None, np.inf
        for (x1, y1), (x2, y2) in self.edges():
            dx, dy = x2 - x1, y2 - y1
            t = ((p[0] - x1) * dx + (p[1] - y1) * dy) / (dx * dx + dy * dy)
            t = min(max(t, 0.0), 1.0)
            q = np.array([x1 + t * dx, y1 + t * dy])
            d = float(np.hypot(p[0] - q[0], p[1] - q[1]))
            if d < best_d:
                best, best_d = q, d
        return best

    def blocks_segment(self, p: Sequence[float], q: Sequence[float]) -> bool:
        """True when the open segment ``pq`` passes through the obstacle interior.

        Grazing contact with the boundary (including running along an edge)
        does not block.
        """
        n = 64
        t = (np.arange(n) + 0.5) / n
        xs = p[0] + t * (q[0] - p[0])
        ys = p[1] + t * (q[1] - p[1])
        if self.contains_strict(xs, ys, tol=1e-9).any():
            return True
        # exact check against edges for crossings the sampling might miss
        for a, b in self.edges():
            if _segments_proper_cross(p, q, a, b):
                return True
        return False

    def to_dict(self) -> dict:
        if self.kind == "rectangle":
            return {"type": "rectangle", "corners": list(self.corners)}
        return {"type": "polygon", "vertices": [list(v) for v in self.vertices]}


def _segments_proper_cross(p1, p2, q1, q2) -> bool:
    def orient(a, b, c):
        return (b[0] - a[0]) * (c[1] - a[1]) - (b[1] - a[1]) * (c[0] - a[0])

    d1, d2 = orient(q1, q2, p1), orient(q1, q2, p2)
    d3, d4 = orient(p1, p2, q1), orient(p1, p2, q2)
    eps = 1e-14
    return (d1 > eps and d2 < -eps or d1 < -eps and d2 > eps) and (
        d3 > eps and d4 < -eps or d3 < -eps and d4 > eps
    )


def rasterize(grid: Grid, obstacles: Sequence[Obstacle]) -> np.ndarray:
    """Boolean occupancy mask, ``True`` where a node lies strictly inside an obstacle."""
    X, Y = grid.mesh()
    mask = np.zeros(grid.shape, dtype=bool)
    slack = 1e-9 * max(grid.x_max - grid.x_min, grid.y_max - grid.y_min)
    for ob in obstacles:
        for vx, vy in ob.vertices:
            if not grid.contains((vx, vy), slack):
                raise InvalidArgument(f"obstacle vertex {(vx, vy)} outside the domain")
        # boundary nodes stay FREE; the tolerance absorbs rounding in node positions
        mask |= ob.contains_strict(X, Y, tol=1e-9 * grid.h)
    return mask


def point_blocked(obstacles: Sequence[Obstacle], p: Sequence[float]) -> bool:
    return any(bool(ob.contains_strict(p[0], p[1])) for ob in obstacles)


def _cell(grid: Grid, x: float, y: float) -> tuple[int, int, float, float]:
    fx = (x - grid.x_min) / grid.h_x
    fy = (y - grid.y_min) / grid.h_y
    i = min(max(int(np.floor(fx)), 0), grid.n_x - 2)
    j = min(max(int(np.floor(fy)), 0), grid.n_y - 2)
    return i, j, fx - i, fy - j


def sample_bilinear(grid: Grid, values: np.ndarray, p: Sequence[float]) -> float:
    """Bilinear interpolation of a node field at ``p``.

    Corners holding ``+inf`` are dropped and the remaining finite corners are
    combined by inverse-distance weighting; ``+inf`` comes back only when all
    four corners are infinite.
    """
    x, y = float(p[0]), float(p[1])
    if not grid.contains((x, y), 1e-9 * grid.h):
        raise OutOfDomain(f"point {(x, y)} outside the domain")
    i, j, tx, ty = _cell(grid, x, y)
    v00 = values[j, i]
    v10 = values[j, i + 1]
    v01 = values[j + 1, i]
    v11 = values[j + 1, i + 1]
    if v00 < np.inf and v10 < np.inf and v01 < np.inf and v11 < np.inf:
        return float(
            (1 - ty) * ((1 - tx) * v00 + tx * v10) + ty * ((1 - tx) * v01 + tx * v11)
        )
    return _idw(((0.0, 0.0, v00), (1.0, 0.0, v10), (0.0, 1.0, v01), (1.0, 1.0, v11)), tx, ty, grid)


def _idw(corners, tx, ty, grid: Grid) -> float:
    num = 0.0
    den = 0.0
    for cx, cy, v in corners:
        if not v < np.inf:
            continue
        d = np.hypot((tx - cx) * grid.h_x, (ty - cy) * grid.h_y)
        if d == 0.0:
            return float(v)
        num += v / d
        den += 1.0 / d
    return float(num / den) if den > 0 else float("inf")


def sample_bilinear_many(grid: Grid, values: np.ndarray, pts: np.ndarray) -> np.ndarray:
    """Vectorised :func:`sample_bilinear` for an ``(m, 2)`` array of points."""
    pts = np.asarray(pts, dtype=float).reshape(-1, 2)
    fx = (pts[:, 0] - grid.x_min) / grid.h_x
    fy = (pts[:, 1] - grid.y_min) / grid.h_y
    if (
        (fx < -1e-9).any()
        or (fy < -1e-9).any()
        or (fx > grid.n_x - 1 + 1e-9).any()
        or (fy > grid.n_y - 1 + 1e-9).any()
    ):
        raise OutOfDomain("points outside the domain")
    i = np.clip(np.floor(fx).astype(int), 0, grid.n_x - 2)
    j = np.clip(np.floor(fy).astype(int), 0, grid.n_y - 2)
    tx = fx - i
    ty = fy - j
    c = np.stack(
        [values[j, i], values[j, i + 1], values[j + 1, i], values[j + 1, i + 1]], axis=1
    )
    w = np.stack([(1 - tx) * (1 - ty), tx * (1 - ty), (1 - tx) * ty, tx * ty], axis=1)
    finite = np.isfinite(c)
    out = np.empty(len(pts))
    full = finite.all(axis=1)
    out[full] = (w[full] * c[full]).sum(axis=1)
    for k in np.flatnonzero(~full):
        out[k] = _idw(
            ((0.0, 0.0, c[k, 0]), (1.0, 0.0, c[k, 1]), (0.0, 1.0, c[k, 2]), (1.0, 1.0, c[k, 3])),
            tx[k],
            ty[k],
            grid,
        )
    return out
