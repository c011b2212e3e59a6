"""Optimal-path extraction on value functions and path-integrated observability."""

from __future__ import annotations

import threading
from collections import OrderedDict
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .eikonal import solve_eikonal
from .grid import Grid, InvalidArgument, Obstacle, sample_bilinear, sample_bilinear_many
from .visibility import ObserverSet, observability_at, observability_fields, weighted_observability


class TraceError(RuntimeError):
    """Gradient descent stalled or failed to reach the target."""


class InvalidTrajectory(ValueError):
    pass


class InfeasibleScenario(RuntimeError):
    pass


@dataclass
class Trajectory:
    points: np.ndarray
    arrived: bool = True

    @property
    def segment_lengths(self) -> np.ndarray:
        return np.hypot(*np.diff(self.points, axis=0).T)

    @property
    def length(self) -> float:
        return float(self.segment_lengths.sum())


# unit directions of the 16-neighbour stencil
_OFFSETS = [
    (1, 0), (-1, 0), (0, 1), (0, -1),
    (1, 1), (1, -1), (-1, 1), (-1, -1),
    (1, 2), (2, 1), (-1, 2), (-2, 1), (1, -2), (2, -1), (-1, -2), (-2, -1),
]
_DIRS = np.array([np.array(o, dtype=float) / np.hypot(*o) for o in _OFFSETS])


class _Sampler:
    """Point sampler for one field with the domain clamp and obstacle push-out."""

    def __init__(self, grid: Grid, u: np.ndarray, obstacles: Sequence[Obstacle]):
        self.grid = grid
        self.u = u
        self.obstacles = list(obstacles)

    def value(self, p) -> float:
        return sample_bilinear(self.grid, self.u, p)

    def admissible(self, q) -> np.ndarray:
        q = self.grid.clamp(q)
        for ob in self.obstacles:
            if ob.contains_strict(q[0], q[1]):
                q = self.grid.clamp(ob.nearest_boundary_point(q))
        return q

    def gradient(self, p) -> np.ndarray:
        g = self.grid
        out = np.zeros(2)
        for axis, eps in ((0, 0.5 * g.h_x), (1, 0.5 * g.h_y)):
            lo = np.array(p, dtype=float)
            hi = np.array(p, dtype=float)
            lo[axis] -= eps
            hi[axis] += eps
            lo = g.clamp(lo)
            hi = g.clamp(hi)
            span = hi[axis] - lo[axis]
            vl, vh = self.value(lo), self.value(hi)
            if np.isfinite(vl) and np.isfinite(vh):
                out[axis] = (vh - vl) / span
            elif np.isfinite(vl) or np.isfinite(vh):
                v0 = self.value(p)
                if not np.isfinite(v0):
                    continue
                if np.isfinite(vh) and hi[axis] > p[axis]:
                    out[axis] = (vh - v0) / (hi[axis] - p[axis])
                elif np.isfinite(vl) and lo[axis] < p[axis]:
                    out[axis] = (v0 - vl) / (p[axis] - lo[axis])
        return out


def _node_descent(grid: Grid, u: np.ndarray, p, up: float):
    """Lowest grid node among the enclosing cell and the 16-stencil around the nearest node.

    Node values of a Fast Marching solution always have a strictly smaller
    neighbour (except at the target), so this step cannot stall.
    """
    i0, j0 = grid.nearest_index(p)
    ic = min(int(np.floor((p[0] - grid.x_min) / grid.h_x)), grid.n_x - 2)
    jc = min(int(np.floor((p[1] - grid.y_min) / grid.h_y)), grid.n_y - 2)
    cands = [(ic + a, jc + b) for a in (0, 1) for b in (0, 1)]
    cands += [(i0 + a, j0 + b) for a, b in _OFFSETS]
    best, best_u = None, up
    for i, j in cands:
        if 0 <= i < grid.n_x and 0 <= j < grid.n_y and u[j, i] < best_u:
            best, best_u = np.array(grid.node(i, j)), float(u[j, i])
    return best, best_u


def trace_path(
    grid: Grid,
    u: np.ndarray,
    x_S: Sequence[float],
    x_T: Sequence[float],
    step_size: float | None = None,
    obstacles: Sequence[Obstacle] = (),
) -> Trajectory:
    """Steepest descent on ``u`` from ``x_S`` until within ``h`` of ``x_T``.

    Steps follow ``-grad u / |grad u|`` with the gradient taken by central
    differences of the bilinear interpolant. When that direction stalls,
    oscillates or climbs, the step is taken along whichever of the 16
    stencil directions decreases ``u`` most.
    """
    h = grid.h
    step = 0.5 * h if step_size is None else float(step_size)
    if not step > 0:
        raise InvalidArgument("step_size must be positive")
    s = _Sampler(grid, u, obstacles)
    p = np.array(x_S, dtype=float)
    target = np.array(x_T, dtype=float)
    up = s.value(p)
    if not np.isfinite(up):
        raise InfeasibleScenario(f"source {tuple(x_S)} cannot reach the target")
    pts = [p]
    if np.hypot(*(p - target)) <= h:
        return Trajectory(np.array(pts), True)
    max_steps = int(np.ceil(10 * (grid.n_x + grid.n_y) / (step / h)))
    prev = None
    slack = 1e-6
    for _ in range(max_steps):
        q = None
        g = s.gradient(p)
        gn = float(np.hypot(*g))
        if gn >= 1e-12:
            cand = s.admissible(p - step * g / gn)
            uc = s.value(cand)
            back = prev is not None and np.hypot(*(cand - prev)) < 0.25 * step
            moved = np.hypot(*(cand - p)) > 1e-3 * step
            if uc <= up + slack * abs(up) + 1e-14 and not back and moved:
                q, uq = cand, uc
        if q is None:
            best, best_u = None, up
            for scale in (1.0, 0.5, 0.25):
                for d in _DIRS:
                    cand = s.admissible(p + scale * step * d)
                    uc = s.value(cand)
                    if uc < best_u and np.hypot(*(cand - p)) > 1e-3 * step:
                        best, best_u = cand, uc
                if best is not None:
                    break
            if best is None:
                best, best_u = _node_descent(grid, u, p, up)
            if best is None:
                raise TraceError(f"descent stalled at {tuple(p)}")
            q, uq = best, best_u
        # node jumps can exceed one step; keep the spacing bound
        m = int(np.ceil(np.hypot(*(q - p)) / step - 1e-9))
        for t in range(1, m):
            pts.append(p + (t / m) * (q - p))
        prev, p, up = p, q, uq
        pts.append(p)
        if np.hypot(*(p - target)) <= h:
            pts.append(target)
            return Trajectory(np.array(pts), True)
    raise TraceError(f"no arrival after {max_steps} steps")


def integrate_costs(
    grid: Grid,
    traj: Trajectory,
    K_fields: np.ndarray,
    speed=1.0,
    k_fn=None,
) -> np.ndarray:
    """Midpoint-rule cumulative observability per field, with ``dt = ds / f``.

    ``K`` is sampled bilinearly from ``K_fields`` unless ``k_fn`` is given; it
    maps an ``(m, 2)`` array of points to the ``(r, m)`` array of exact values.
    """
    if not traj.arrived:
        raise InvalidTrajectory("trajectory did not reach the target")
    K_fields = np.asarray(K_fields, dtype=float)
    if K_fields.ndim == 2:
        K_fields = K_fields[None]
    pts = traj.points
    if len(pts) < 2:
        return np.zeros(K_fields.shape[0])
    mids = 0.5 * (pts[1:] + pts[:-1])
    ds = np.hypot(*np.diff(pts, axis=0).T)
    if np.ndim(speed) == 0:
        dt = ds / float(speed)
    else:
        dt = ds / sample_bilinear_many(grid, np.asarray(speed, dtype=float), mids)
    if k_fn is not None:
        ks = np.asarray(k_fn(mids), dtype=float)
    else:
        ks = np.array([sample_bilinear_many(grid, K, mids) for K in K_fields])
    if not np.isfinite(ks).all():
        raise InvalidTrajectory("trajectory passes through an obstacle")
    return ks @ dt


@dataclass(frozen=True)
class Evader:
    source: tuple[float, float]
    target: tuple[float, float]
    weight: float = 1.0
    speed: object = 1.0

    def speed_key(self):
        return float(self.speed) if np.ndim(self.speed) == 0 else id(self.speed)


@dataclass
class Evaluation:
    """Everything learned from one weighted solve at ``lam``."""

    lam: np.ndarray
    value: float
    costs: np.ndarray
    trajectories: list
    weights: np.ndarray = field(repr=False)

    @property
    def supergradient(self) -> np.ndarray:
        return self.weights @ self.costs

    @property
    def path_value(self) -> float:
        return float(self.lam @ self.supergradient)


class GameContext:
    """Grid, obstacles, observers and evaders with cached observability fields.

    ``evaluate(lam)`` solves the weighted Eikonal equation once per distinct
    (target, speed) pair, traces one optimal path per evader and integrates
    the individual costs along it. Results are memoised on ``lam`` rounded to
    12 decimals.
    """

    def __init__(
        self,
        grid: Grid,
        blocked: np.ndarray,
        obstacles: Sequence[Obstacle],
        observers: ObserverSet,
        evaders: Sequence[Evader],
        step_size: float | None = None,
        K_fields: np.ndarray | None = None,
        field_cache: int = 8,
        shadow_method: str = "exact",
    ):
        if not evaders:
            raise InvalidArgument("need at least one evader")
        self.grid = grid
        self.blocked = np.asarray(blocked, dtype=bool)
        self.obstacles = list(obstacles)
        self.observers = observers
        self.evaders = list(evaders)
        self.step_size = step_size
        self.shadow_method = shadow_method
        if K_fields is None:
            self.shadows, self.K_fields = observability_fields(
                grid, self.blocked, self.obstacles, observers, shadow_method
            )
            self._k_fn = lambda pts: observability_at(observers, self.obstacles, pts, depth=grid.h)
        else:
            self.shadows, self.K_fields = None, np.asarray(K_fields, dtype=float)
            self._k_fn = None
        self.weights = np.array([e.weight for e in self.evaders], dtype=float)
        self._groups: OrderedDict = OrderedDict()
        for l, e in enumerate(self.evaders):
            self._groups.setdefault((tuple(e.target), e.speed_key()), []).append(l)
        self._evals: dict = {}
        self._fields: OrderedDict = OrderedDict()
        self._field_cache = field_cache
        self._lock = threading.Lock()
        self.n_solves = 0

    def refined(self, factor: int) -> "GameContext":
        """Same game on a grid with ``factor`` times as many intervals per axis."""
        from .grid import build_grid, rasterize

        if factor < 1:
            raise InvalidArgument("refinement factor must be >= 1")
        g = self.grid
        fine = build_grid(g.bounds, factor * (g.n_x - 1) + 1, factor * (g.n_y - 1) + 1)
        X, Y = fine.mesh()
        pts = np.column_stack([X.ravel(), Y.ravel()])
        evaders = []
        for e in self.evaders:
            speed = e.speed
            if np.ndim(speed) != 0:
                speed = sample_bilinear_many(g, np.asarray(speed, dtype=float), pts).reshape(fine.shape)
            evaders.append(Evader(e.source, e.target, e.weight, speed))
        step = None if self.step_size is None else self.step_size / factor
        return GameContext(
            fine,
            rasterize(fine, self.obstacles),
            self.obstacles,
            self.observers,
            evaders,
            step_size=step,
            shadow_method=self.shadow_method,
        )

    @property
    def r(self) -> int:
        return self.K_fields.shape[0]

    @property
    def q(self) -> int:
        return len(self.evaders)

    @staticmethod
    def key(lam) -> tuple:
        return tuple(np.round(np.asarray(lam, dtype=float), 12).tolist())

    def value_fields(self, lam) -> list[np.ndarray]:
        """One value function per evader (shared arrays where solves coincide)."""
        k = self.key(lam)
        with self._lock:
            if k in self._fields:
                self._fields.move_to_end(k)
                return self._fields[k]
        lam = np.asarray(lam, dtype=float)
        if lam.shape != (self.r,):
            raise InvalidArgument(f"lambda must have length {self.r}")
        K = weighted_observability(self.K_fields, lam)
        fields: list = [None] * self.q
        for members in self._groups.values():
            e = self.evaders[members[0]]
            u = solve_eikonal(self.grid, self.blocked, K, e.target, e.speed, self.obstacles)
            self.n_solves += 1
            for l in members:
                fields[l] = u
        with self._lock:
            self._fields[k] = fields
            while len(self._fields) > self._field_cache:
                self._fields.popitem(last=False)
        return fields

    def evaluate(self, lam) -> Evaluation:
        k = self.key(lam)
        with self._lock:
            hit = self._evals.get(k)
        if hit is not None:
            return hit
        lam = np.asarray(lam, dtype=float)
        fields = self.value_fields(lam)
        value = 0.0
        costs = np.empty((self.q, self.r))
        trajs = []
        for l, (e, u) in enumerate(zip(self.evaders, fields)):
            u_src = sample_bilinear(self.grid, u, e.source)
            if not np.isfinite(u_src):
                raise InfeasibleScenario(f"source {e.source} cannot reach {e.target}")
            value += e.weight * u_src
            traj = trace_path(self.grid, u, e.source, e.target, self.step_size, self.obstacles)
            costs[l] = integrate_costs(self.grid, traj, self.K_fields, e.speed, self._k_fn)
            trajs.append(traj)
        ev = Evaluation(lam.copy(), float(value), costs, trajs, self.weights)
        with self._lock:
            self._evals[k] = ev
        return ev


def evaluate_G(lam, ctx: GameContext):
    """``(G, supergradient, trajectory)`` at ``lam`` for a single-evader context.

    ``G`` is the weighted value at the source; the supergradient is the cost
    vector of the traced optimal path. With several evaders the trajectory
    slot holds the list of per-evader paths.
    """
    ev = ctx.evaluate(lam)
    traj = ev.trajectories[0] if ctx.q == 1 else ev.trajectories
    return ev.value, ev.supergradient, traj
