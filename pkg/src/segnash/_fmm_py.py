"""Pure-Python Fast Marching kernel, used when the compiled extension is unavailable.

Mirrors ``_fmm.pyx`` operation for operation so both backends agree bit for bit.
"""

import heapq
from math import inf, sqrt

import numpy as np


def upwind(a: float, b: float, c: float, hx: float, hy: float) -> float:
    if a == inf and b == inf:
        return inf
    if b == inf:
        return a + c * hx
    if a == inf:
        return b + c * hy
    if hx == hy:
        s = c * hx
        if (a - b if a > b else b - a) < s:
            d = 2.0 * s * s - (a - b) * (a - b)
            return (a + b + sqrt(d)) * 0.5
        return (a if a < b else b) + s
    ia = 1.0 / (hx * hx)
    ib = 1.0 / (hy * hy)
    A = ia + ib
    B = -2.0 * (a * ia + b * ib)
    C = a * a * ia + b * b * ib - c * c
    d = B * B - 4.0 * A * C
    if d >= 0.0:
        u = (-B + sqrt(d)) / (2.0 * A)
        if u >= (a if a > b else b):
            return u
    u = a + c * hx
    if b + c * hy < u:
        u = b + c * hy
    return u


def fast_march(slowness, blocked, ti, tj, hx, hy):
    ny, nx = slowness.shape
    cost = slowness.ravel().tolist()
    blk = np.asarray(blocked, dtype=bool).ravel().tolist()
    u = [inf] * (nx * ny)
    accepted = [False] * (nx * ny)
    order = []
    start = tj * nx + ti
    u[start] = 0.0
    heap = [(0.0, start)]
    pop, push = heapq.heappop, heapq.heappush
    while heap:
        v, idx = pop(heap)
        if accepted[idx] or v != u[idx]:
            continue
        accepted[idx] = True
        order.append(idx)
        j, i = divmod(idx, nx)
        for ni, nj in ((i + 1, j), (i - 1, j), (i, j + 1), (i, j - 1)):
            if ni < 0 or ni >= nx or nj < 0 or nj >= ny:
                continue
            n = nj * nx + ni
            if blk[n] or accepted[n]:
                continue
            a = inf
            if ni > 0 and accepted[n - 1]:
                a = u[n - 1]
            if ni < nx - 1 and accepted[n + 1] and u[n + 1] < a:
                a = u[n + 1]
            b = inf
            if nj > 0 and accepted[n - nx]:
                b = u[n - nx]
            if nj < ny - 1 and accepted[n + nx] and u[n + nx] < b:
                b = u[n + nx]
            cand = upwind(a, b, cost[n], hx, hy)
            if cand < u[n]:
                u[n] = cand
                push(heap, (cand, n))
    return np.array(u).reshape(ny, nx), np.array(order, dtype=np.intp)
