"""Probability-simplex projection, projected supergradient ascent and the mixing-weight QP."""

from __future__ import annotations

import itertools
import logging
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from .grid import InvalidArgument

log = logging.getLogger(__name__)


def project_simplex(v) -> np.ndarray:
    """Euclidean projection of ``v`` onto ``{x >= 0, sum x = 1}`` (sort-based)."""
    v = np.asarray(v, dtype=float).ravel()
    if v.size == 0:
        raise InvalidArgument("cannot project an empty vector")
    if not np.isfinite(v).all():
        raise InvalidArgument("vector has non-finite entries")
    u = np.sort(v)[::-1]
    css = np.cumsum(u)
    j = np.arange(1, v.size + 1)
    rho = int(np.nonzero(u + (1.0 - css) / j > 0)[0][-1]) + 1
    tau = (1.0 - css[rho - 1]) / rho
    x = np.maximum(v + tau, 0.0)
    return x / x.sum()


def project_simplex_support(v, support: Sequence[int]) -> np.ndarray:
    """Projection onto the face of the simplex spanned by the indices in ``support``."""
    v = np.asarray(v, dtype=float).ravel()
    idx = np.asarray(sorted(set(int(i) for i in support)), dtype=int)
    if idx.size == 0:
        raise InvalidArgument("support must be non-empty")
    if idx.min() < 0 or idx.max() >= v.size:
        raise InvalidArgument("support index out of range")
    out = np.zeros_like(v)
    out[idx] = project_simplex(v[idx])
    return out


@dataclass
class AscentTrace:
    iterates: list = field(default_factory=list)
    values: list = field(default_factory=list)
    supergradients: list = field(default_factory=list)

    @property
    def best_index(self) -> int:
        return int(np.argmax(self.values))

    @property
    def best(self) -> np.ndarray:
        return self.iterates[self.best_index]

    @property
    def best_value(self) -> float:
        return float(self.values[self.best_index])


Oracle = Callable[[np.ndarray], tuple]


def supergradient_ascent(
    oracle: Oracle,
    lam0,
    n: int,
    stagnation: tuple[int, float] | None = None,
    retries: int = 5,
    retry_on: tuple = (RuntimeError,),
) -> AscentTrace:
    """Projected supergradient ascent with steps ``1 / (k * |g_0|)``.

    Runs ``n`` updates and evaluates the oracle at all ``n + 1`` iterates;
    the best recorded iterate is ``trace.best``. ``stagnation=(window, rtol)``
    stops early once the best value has not improved by ``rtol`` (relative)
    over ``window`` iterations. An oracle failure on an iterate is retried
    halfway back towards the previous iterate, at most ``retries`` times.
    """
    if n < 1:
        raise InvalidArgument("n must be >= 1")
    lam = project_simplex(lam0)
    trace = AscentTrace()
    G, g = oracle(lam)
    g = np.asarray(g, dtype=float)
    trace.iterates.append(lam)
    trace.values.append(float(G))
    trace.supergradients.append(g)
    g0 = float(np.linalg.norm(g))
    if g0 == 0.0:
        return trace
    best, since = float(G), 0
    for k in range(1, n + 1):
        prev = trace.iterates[-1]
        cand = project_simplex(prev + g / (k * g0))
        for attempt in range(retries + 1):
            try:
                G, g_new = oracle(cand)
                break
            except retry_on as exc:
                if attempt == retries:
                    raise
                log.debug("oracle failed at %s (%s); retrying closer to %s", cand, exc, prev)
                cand = 0.5 * (cand + prev)
        g = np.asarray(g_new, dtype=float)
        trace.iterates.append(cand)
        trace.values.append(float(G))
        trace.supergradients.append(g)
        if stagnation is not None:
            window, rtol = stagnation
            if G > best + rtol * abs(best):
                best, since = float(G), 0
            else:
                since += 1
                if since >= window:
                    break
    return trace


def _face_lsq(A: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Minimiser of ``|A w - b|`` subject to ``sum w = 1`` (min-norm when not unique)."""
    k = A.shape[1]
    kkt = np.zeros((k + 1, k + 1))
    kkt[:k, :k] = A.T @ A
    kkt[:k, k] = 1.0
    kkt[k, :k] = 1.0
    rhs = np.concatenate([A.T @ b, [1.0]])
    sol = np.linalg.lstsq(kkt, rhs, rcond=None)[0]
    return sol[:k]


def _pg_simplex_lsq(M: np.ndarray, b: np.ndarray, tol: float = 1e-10, max_iter: int = 200_000) -> np.ndarray:
    k = M.shape[1]
    L = float(np.linalg.norm(M, 2) ** 2) or 1.0
    w = np.full(k, 1.0 / k)
    y, t = w.copy(), 1.0
    for _ in range(max_iter):
        w_new = project_simplex(y - (M.T @ (M @ y - b)) / L)
        t_new = 0.5 * (1 + np.sqrt(1 + 4 * t * t))
        y = w_new + ((t - 1) / t_new) * (w_new - w)
        step = np.linalg.norm(w_new - w) * L
        w, t = w_new, t_new
        if step < tol:
            break
    return w


def solve_mixing_weights(M, target: float, exhaustive_max: int = 10) -> tuple[np.ndarray, float]:
    """``omega`` on the simplex minimising ``|target * 1 - M omega|_2``.

    For up to ``exhaustive_max`` columns every face of the simplex is solved
    exactly (equality-constrained least squares) and the best feasible face
    wins; larger problems fall back to accelerated projected gradient.
    """
    M = np.atleast_2d(np.asarray(M, dtype=float))
    if not np.isfinite(M).all() or not np.isfinite(target):
        raise InvalidArgument("non-finite entries in the residual system")
    s, k = M.shape
    if s < 1 or k < 1:
        raise InvalidArgument("empty residual system")
    b = np.full(s, float(target))
    if k == 1:
        w = np.ones(1)
        return w, float(np.linalg.norm(b - M @ w))
    if k > exhaustive_max:
        w = _pg_simplex_lsq(M, b)
        return w, float(np.linalg.norm(b - M @ w))
    best_w, best_r = None, np.inf
    for size in range(1, k + 1):
        for face in itertools.combinations(range(k), size):
            cols = list(face)
            wf = _face_lsq(M[:, cols], b) if size > 1 else np.ones(1)
            if (wf < -1e-12).any():
                continue
            w = np.zeros(k)
            w[cols] = np.maximum(wf, 0.0)
            w /= w.sum()
            r = float(np.linalg.norm(b - M @ w))
            if r < best_r - 1e-15:
                best_w, best_r = w, r
    return best_w, best_r
