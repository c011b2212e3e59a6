"""Approximate Nash equilibria of stationary surveillance-evasion games.

The observer's half comes from projected supergradient ascent on the
E-response value ``G``; the evader's half is assembled by perturbing the
observer strategy inside its support until a mix of near-optimal
trajectories balances the residual system ``G* 1 - M omega``.
"""

from __future__ import annotations

import itertools
import logging
import time
from dataclasses import dataclass, field, replace
from typing import Sequence

import numpy as np

from .grid import InvalidArgument
from .simplex import (
    AscentTrace,
    project_simplex_support,
    solve_mixing_weights,
    supergradient_ascent,
)
from .trajectory import Evaluation, GameContext, Trajectory

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class Tolerances:
    """Knobs of the equilibrium search.

    ``tol_R`` and ``tol_delta`` are relative: the residual threshold is
    ``tol_R * G(lambda*)`` and trajectories count as distinct when their cost
    vectors differ by at least ``tol_delta * |J|``.
    """

    tol_R: float = 1e-3
    tol_lambda: float = 5e-3
    epsilon: float = 1e-6
    delta_0: float = 1e-4
    tol_delta: float = 1e-2
    iters: int = 100
    delta_cap: float = 1.0
    extra_generations: int = 3
    value: str = "path"
    stagnation: tuple[int, float] | None = None

    def __post_init__(self):
        for name in ("tol_R", "tol_lambda", "delta_0", "tol_delta", "delta_cap"):
            if not getattr(self, name) > 0:
                raise InvalidArgument(f"{name} must be positive")
        if not self.epsilon >= 0:
            raise InvalidArgument("epsilon must be non-negative")
        if self.iters < 1:
            raise InvalidArgument("iters must be >= 1")
        if self.value not in ("path", "eikonal"):
            raise InvalidArgument("value must be 'path' or 'eikonal'")


@dataclass
class EvaderStrategy:
    """Distinct trajectories of one evader and the probability of each."""

    trajectories: list
    costs: np.ndarray
    omega: np.ndarray


@dataclass
class EquilibriumReport:
    lambda_star: np.ndarray
    support: list
    columns: np.ndarray
    omega: np.ndarray
    game_value: float
    eikonal_value: float
    residual: np.ndarray
    residual_norm: float
    tol_R: float
    converged: bool
    generations: list
    generation_lambdas: list
    deltas: list
    strategies: list
    ascent: AscentTrace = field(repr=False)
    metrics: dict = field(default_factory=dict)
    counters: dict = field(default_factory=dict)

    @property
    def k(self) -> int:
        return len(self.omega)

    @property
    def trajectories(self) -> list:
        """First evader's trajectory from every generation."""
        return [gen[0] for gen in self.generations]

    @property
    def mixed_costs(self) -> np.ndarray:
        """Expected cost vector ``sum_j omega_j J(a_j)`` over all observer positions."""
        return self.omega @ self.columns


def residual(omega, M, G_star: float) -> np.ndarray:
    """``G* 1 - M omega`` for an ``s x k`` cost matrix (a 1-D ``M`` is one column)."""
    omega = np.atleast_1d(np.asarray(omega, dtype=float))
    M = np.asarray(M, dtype=float)
    if M.ndim == 1:
        M = M[:, None] if omega.size == 1 else M[None, :]
    if M.shape[1] != omega.size:
        raise InvalidArgument(f"cost matrix {M.shape} does not match {omega.size} weights")
    return float(G_star) - M @ omega


def perturbed_lambda(lam_star, support: Sequence[int], direction, delta: float, epsilon: float) -> np.ndarray:
    """``(1 - eps) Pi_I(lam* - delta d) + eps / (r - s)`` off the support.

    ``direction`` may have length ``|I|`` (entries in support order) or ``r``.
    """
    lam_star = np.asarray(lam_star, dtype=float)
    r = lam_star.size
    idx = sorted(set(int(i) for i in support))
    if not idx:
        raise InvalidArgument("support must be non-empty")
    if delta < 0:
        raise InvalidArgument("delta must be non-negative")
    d = np.zeros(r)
    direction = np.asarray(direction, dtype=float)
    if direction.size == len(idx):
        d[idx] = direction
    elif direction.size == r:
        d[idx] = direction[idx]
    else:
        raise InvalidArgument("direction length must match the support or r")
    out = project_simplex_support(lam_star - delta * d, idx)
    s = len(idx)
    if s < r:
        out = (1.0 - epsilon) * out
        rest = np.ones(r, dtype=bool)
        rest[idx] = False
        out[rest] = epsilon / (r - s)
    return out


def _blend(lam_star, support, epsilon) -> np.ndarray:
    return perturbed_lambda(lam_star, support, np.zeros(len(support)), 0.0, epsilon)


class NoNewTrajectory(RuntimeError):
    pass


def _fit(cols: np.ndarray, lam_star, support, tol: Tolerances):
    """``(G*, omega, R)`` for a set of cost columns."""
    G_star = float(np.min(cols @ lam_star))
    M = cols[:, support].T
    omega, _ = solve_mixing_weights(M, G_star)
    return G_star, omega, residual(omega, M, G_star)


def adaptive_delta(
    ctx: GameContext,
    lam_star,
    support,
    R,
    columns: Sequence[np.ndarray],
    tol: Tolerances,
) -> tuple[Evaluation, float, int | None]:
    """Smallest doubling of ``delta_0`` that yields a usable new trajectory.

    A trajectory is usable when its cost vector is at least ``tol_delta |J|``
    away from every existing column. A near-duplicate of exactly one column
    that still differs from it by more than ``tol_R |J|`` is usable when
    either replacing that column or appending the new one more than halves
    the residual norm, or when it makes that column cheaper at ``lam_star``
    by more than ``tol_R`` relative. The third return value is the index of
    the column to replace, or ``None`` to append.
    Raises :class:`NoNewTrajectory` once ``delta`` exceeds ``tol.delta_cap``.
    """
    if not len(columns):
        raise InvalidArgument("need at least one existing trajectory")
    lam_star = np.asarray(lam_star, dtype=float)
    cols = np.array(columns, dtype=float)
    r_now = float(np.linalg.norm(R))
    delta = tol.delta_0
    while delta <= tol.delta_cap:
        lam = perturbed_lambda(lam_star, support, R, delta, tol.epsilon)
        ev = ctx.evaluate(lam)
        J = ev.supergradient
        thresh = tol.tol_delta * float(np.linalg.norm(J))
        near = [j for j, c in enumerate(cols) if np.linalg.norm(J - c) < thresh]
        if not near:
            return ev, delta, None
        if len(near) == 1 and np.linalg.norm(J - cols[near[0]]) > tol.tol_R * np.linalg.norm(J):
            j = near[0]
            old = float(lam_star @ cols[j])
            swapped = cols.copy()
            swapped[j] = J
            r_swap = float(np.linalg.norm(_fit(swapped, lam_star, support, tol)[2]))
            r_add = float(np.linalg.norm(_fit(np.vstack([cols, J]), lam_star, support, tol)[2]))
            if min(r_swap, r_add) < 0.5 * r_now:
                return ev, delta, (j if r_swap <= r_add else None)
            if lam_star @ J < old - tol.tol_R * old:
                return ev, delta, j
        delta *= 2.0
    raise NoNewTrajectory(f"no distinct trajectory for delta <= {tol.delta_cap}")


def _oracle(ctx: GameContext, mode: str):
    def oracle(lam):
        ev = ctx.evaluate(lam)
        G = ev.path_value if mode == "path" else ev.value
        return G, ev.supergradient

    return oracle


def observer_strategy(ctx: GameContext, tol: Tolerances, lam0=None) -> AscentTrace:
    lam0 = np.full(ctx.r, 1.0 / ctx.r) if lam0 is None else lam0
    return supergradient_ascent(_oracle(ctx, tol.value), lam0, tol.iters, stagnation=tol.stagnation)


def _prune(ctx: GameContext, generations, costs, omega, tol: Tolerances) -> list:
    """Collapse each evader's per-generation trajectories into distinct ones."""
    strategies = []
    for l in range(ctx.q):
        reps: list = []
        for g, J in enumerate(costs[:, l, :]):
            thresh = tol.tol_delta * float(np.linalg.norm(J))
            for rep in reps:
                if np.linalg.norm(J - rep["J"]) < thresh:
                    rep["w"] += omega[g]
                    break
            else:
                reps.append({"J": J, "w": float(omega[g]), "traj": generations[g][l]})
        keep = [rep for rep in reps if rep["w"] > 1e-12] or reps[:1]
        w = np.array([rep["w"] for rep in keep])
        strategies.append(
            EvaderStrategy(
                [rep["traj"] for rep in keep],
                np.array([rep["J"] for rep in keep]),
                w / w.sum(),
            )
        )
    return strategies


def _bracket_pure(ctx: GameContext, evals, support, tol: Tolerances, steps: int = 10):
    """Balanced single trajectory between two columns on opposite sides of the ray.

    Only for a two-point support: bisects the weight segment joining the two
    generating ``lambda`` and returns the first evaluation whose support costs
    agree within ``tol_R``, or ``None``.
    """
    if len(support) != 2 or len(evals) < 2:
        return None
    i, j = support

    def gap(e):
        return e.supergradient[i] - e.supergradient[j]

    for a, b in itertools.combinations(evals, 2):
        if gap(a) * gap(b) >= 0:
            continue
        lo, hi = (a, b) if gap(a) < 0 else (b, a)
        for _ in range(steps):
            ev = ctx.evaluate(0.5 * (lo.lam + hi.lam))
            J = ev.supergradient
            if abs(gap(ev)) <= tol.tol_R * float(J[support].max()):
                return ev
            if gap(ev) < 0:
                lo = ev
            else:
                hi = ev
    return None


def compute_equilibrium(ctx: GameContext, tol: Tolerances | None = None, trace: AscentTrace | None = None) -> EquilibriumReport:
    """Observer mix ``lambda*`` and evader mix ``omega`` over generated trajectories.

    Works for any number of evaders: each generation holds one trajectory per
    evader and contributes the weighted sum of their cost vectors as a column
    of the residual system. With two supported observers, a converged mix of
    columns on both sides of ``J_1 = J_2`` is replaced by a single balanced
    trajectory when bisection in ``lambda`` finds one within ``tol_R``.
    A report flagged ``converged=False`` is returned
    when the generation cap is reached or no new trajectory can be found.
    """
    tol = tol or Tolerances()
    t0 = time.perf_counter()
    solves0 = ctx.n_solves
    if trace is None:
        trace = observer_strategy(ctx, tol)
    t_ascent = time.perf_counter() - t0
    lam_star = trace.best
    r = ctx.r
    support = [i for i in range(r) if lam_star[i] > tol.tol_lambda]
    s = len(support)

    ev = ctx.evaluate(_blend(lam_star, support, tol.epsilon))
    evals = [ev]
    deltas = [0.0]
    omega = np.ones(1)
    cols = np.array([ev.supergradient])
    # every traced path bounds G(lambda*) from above; the cheapest one is the estimate
    G_star = float(np.min(cols @ lam_star))
    tol_R = tol.tol_R * G_star
    R = residual(omega, cols[:, support].T, G_star)
    first = cols[0, support]
    pure = float(first.max() - first.min()) <= tol_R
    converged = True
    cap = s + tol.extra_generations
    rounds = 0
    while not pure and np.linalg.norm(R) > tol_R:
        if len(evals) >= cap or rounds >= 3 * cap:
            converged = False
            log.info("generation cap %d reached with |R| = %.3g", cap, np.linalg.norm(R))
            break
        try:
            ev, delta, swap = adaptive_delta(ctx, lam_star, support, R, list(cols), tol)
        except NoNewTrajectory:
            converged = False
            log.info("no further trajectory; |R| = %.3g", np.linalg.norm(R))
            break
        rounds += 1
        if swap is None:
            evals.append(ev)
            deltas.append(delta)
        else:
            evals[swap] = ev
            deltas[swap] = delta
        cols = np.array([e.supergradient for e in evals])
        G_star, omega, R = _fit(cols, lam_star, support, tol)
        tol_R = tol.tol_R * G_star

    if converged and len(evals) > 1:
        ev = _bracket_pure(ctx, evals, support, tol)
        if ev is not None:
            evals, deltas = [ev], [deltas[int(np.argmax(omega))]]
            cols = np.array([ev.supergradient])
            G_star, omega, R = _fit(cols, lam_star, support, tol)
            tol_R = tol.tol_R * G_star

    costs = np.array([e.costs for e in evals])
    generations = [e.trajectories for e in evals]
    ev_star = ctx.evaluate(lam_star)
    report = EquilibriumReport(
        lambda_star=lam_star,
        support=support,
        columns=cols,
        omega=omega,
        game_value=G_star,
        eikonal_value=ev_star.value,
        residual=R,
        residual_norm=float(np.linalg.norm(R)),
        tol_R=tol_R,
        converged=converged,
        generations=generations,
        generation_lambdas=[e.lam for e in evals],
        deltas=deltas,
        strategies=_prune(ctx, generations, costs, omega, tol),
        ascent=trace,
    )
    report.metrics.update(
        observer_regret=observer_regret(report),
        evader_regret=evader_regret(report),
    )
    report.counters.update(
        ascent_iterations=len(trace.iterates) - 1,
        eikonal_solves=ctx.n_solves - solves0,
        ascent_seconds=t_ascent,
        total_seconds=time.perf_counter() - t0,
    )
    return report


def compute_equilibrium_multi(ctx: GameContext, tol: Tolerances | None = None) -> EquilibriumReport:
    """Equilibrium for ``q`` weighted evaders sharing one observer.

    Same search as :func:`compute_equilibrium`; ``report.strategies[l]``
    holds evader ``l``'s pruned mixed strategy.
    """
    return compute_equilibrium(ctx, tol)


def observer_regret(report: EquilibriumReport) -> float:
    return report.residual_norm / (len(report.support) * report.game_value)


def evader_regret(report: EquilibriumReport) -> float:
    exp = report.columns @ report.lambda_star
    return float(np.max(np.abs(exp[0] - exp)) / exp[0])


def compute_metrics(
    report: EquilibriumReport,
    ctx: GameContext,
    refinement_factor: int | None = 2,
    tol: Tolerances | None = None,
) -> dict:
    """Optimisation error against a refined grid plus both regrets.

    The refined run repeats the whole computation on a grid with
    ``refinement_factor`` times as many intervals per axis; its ascent stops
    early on stagnation (best value unchanged by ``1e-6`` relative over 25
    iterations).
    """
    metrics = {
        "observer_regret": observer_regret(report),
        "evader_regret": evader_regret(report),
        "relative_error": None,
    }
    if refinement_factor:
        tol = tol or Tolerances()
        fine = ctx.refined(int(refinement_factor))
        fine_report = compute_equilibrium(fine, replace(tol, stagnation=(25, 1e-6)))
        G_fine = fine_report.game_value
        metrics["relative_error"] = abs(report.game_value - G_fine) / report.game_value
        metrics["fine_game_value"] = G_fine
        metrics["fine_lambda_star"] = fine_report.lambda_star.tolist()
    report.metrics.update(metrics)
    return metrics


@dataclass
class ParetoPoint:
    lam: np.ndarray
    costs: np.ndarray
    trajectory: object


def _dominated(a: np.ndarray, b: np.ndarray) -> bool:
    """``a`` is dominated by ``b``."""
    return bool((b <= a).all() and (b < a).any())


def prune_dominated(points: Sequence[ParetoPoint]) -> list:
    return [
        p for p in points if not any(_dominated(p.costs, q.costs) for q in points if q is not p)
    ]


def sample_pareto_front(ctx: GameContext, m: int, beta: float = 1e-3) -> list:
    """Scalarised front samples for ``lam = (t, 1 - t)``, ``t`` uniform on ``[beta, 1 - beta]``.

    Dominated samples are dropped; the rest are returned in order of ``t``.
    """
    if ctx.r != 2:
        raise InvalidArgument("Pareto sweeps are only offered for two observer positions")
    if m < 2:
        raise InvalidArgument("need at least two samples")
    pts = []
    for t in np.linspace(beta, 1.0 - beta, m):
        ev = ctx.evaluate(np.array([t, 1.0 - t]))
        traj = ev.trajectories[0] if ctx.q == 1 else ev.trajectories
        pts.append(ParetoPoint(ev.lam, ev.supergradient, traj))
    return prune_dominated(pts)


def worst_case_check(front: Sequence[ParetoPoint], ray_tol: float = 2e-2) -> ParetoPoint | None:
    """Front sample on the central ray ``J_1 = J_2``, if the sampled front crosses it.

    Adjacent samples whose ``J_1 - J_2`` change sign bracket a crossing; the
    closer one is returned when it lies within ``ray_tol`` (relative) of the
    ray. A jump over the ray between two separated branches returns ``None``.
    """
    if not front:
        return None
    gaps = [float(p.costs[0] - p.costs[1]) for p in front]
    best = None
    for k, g in enumerate(gaps):
        if g == 0.0:
            cand = front[k]
        elif k + 1 < len(gaps) and g * gaps[k + 1] < 0:
            cand = front[k] if abs(g) <= abs(gaps[k + 1]) else front[k + 1]
        else:
            continue
        rel = abs(cand.costs[0] - cand.costs[1]) / float(np.max(cand.costs))
        if rel <= ray_tol and (best is None or rel < best[0]):
            best = (rel, cand)
    return None if best is None else best[1]
