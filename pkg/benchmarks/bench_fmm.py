"""Wall-clock comparison of the compiled and pure-Python Fast Marching kernels.

    python3 benchmarks/bench_fmm.py [--sizes 101 201 401] [--repeat 3]
"""

import argparse
import time

import numpy as np

from segnash import build_grid, solve_eikonal
from segnash.eikonal import available_backends, set_backend
from segnash.grid import Obstacle, rasterize


def case(n: int, obstacle: bool):
    g = build_grid((0, 1, 0, 1), n, n)
    obs = [Obstacle.rectangle(0.3, 0.6, 0.7, 0.7)] if obstacle else []
    blocked = rasterize(g, obs) if obs else np.zeros(g.shape, bool)
    return g, blocked, obs


def timed(g, blocked, obs, repeat: int):
    best, u = np.inf, None
    for _ in range(repeat):
        t0 = time.perf_counter()
        u = solve_eikonal(g, blocked, 1.0, (0.5, 0.1), obstacles=obs)
        best = min(best, time.perf_counter() - t0)
    return best, u


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--sizes", type=int, nargs="+", default=[101, 201, 401])
    ap.add_argument("--repeat", type=int, default=3)
    args = ap.parse_args(argv)
    backends = available_backends()
    if "cython" not in backends:
        print("compiled kernel not built; only the Python backend is timed")
    print(f"{'n':>5} {'obstacle':>8} " + " ".join(f"{b + ' [s]':>12}" for b in backends) + f" {'speedup':>8} {'identical':>9}")
    for n in args.sizes:
        for obstacle in (False, True):
            g, blocked, obs = case(n, obstacle)
            times, fields = {}, {}
            for b in backends:
                set_backend(b)
                times[b], fields[b] = timed(g, blocked, obs, args.repeat)
            same = all(np.array_equal(fields[b], fields[backends[0]]) for b in backends)
            speed = times["python"] / times["cython"] if "cython" in times else float("nan")
            print(f"{n:>5} {str(obstacle):>8} " + " ".join(f"{times[b]:>12.4f}" for b in backends)
                  + f" {speed:>8.1f} {str(same):>9}")
    set_backend("cython" if "cython" in backends else "python")


if __name__ == "__main__":
    main()
