"""Times the compiled transportation core against the pure-Python twin.

Both backends run the same pivot rules, so their optimal costs must agree
to machine precision on every instance; this script checks that while
timing them on square random instances of growing size.

Usage: python benchmarks/bench_transport.py [--sizes 50,100,200,400,800] [--repeats 3]
"""

import argparse
import time

import numpy as np

from concdiam import _transport_fallback
from concdiam._solver import backend_name

try:
    from concdiam import _transport_core
except ImportError:
    _transport_core = None


def random_instance(rng, n):
    pts = rng.normal(size=(n, 3))
    cost = np.linalg.norm(pts[:, None, :] - pts[None, :, :], axis=2)
    mu = rng.dirichlet(np.ones(n))
    nu = rng.dirichlet(np.ones(n))
    # identical float totals keep the backends on identical inputs
    nu[int(np.argmax(nu))] += mu.sum() - nu.sum()
    return np.ascontiguousarray(cost), mu, nu


def time_solve(solver, cost, mu, nu, repeats):
    best = float("inf")
    value = None
    for _ in range(repeats):
        start = time.perf_counter()
        rows, cols, flows = solver(cost, mu, nu)
        best = min(best, time.perf_counter() - start)
        value = float(np.dot(flows, cost[rows, cols]))
    return best, value


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--sizes", default="50,100,200,400,800")
    ap.add_argument("--repeats", type=int, default=3)
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args()
    sizes = [int(s) for s in args.sizes.split(",")]

    if _transport_core is None:
        print("compiled core not available; timing the fallback only")
    print(f"default backend: {backend_name()}")
    print(f"{'n':>5}  {'compiled (s)':>12}  {'python (s)':>12}  {'speedup':>8}  {'cost':>14}")

    rng = np.random.default_rng(args.seed)
    for n in sizes:
        cost, mu, nu = random_instance(rng, n)
        py_t, py_v = time_solve(_transport_fallback.solve, cost, mu, nu, args.repeats)
        if _transport_core is not None:
            c_t, c_v = time_solve(_transport_core.solve, cost, mu, nu, args.repeats)
            if abs(c_v - py_v) > 1e-9 * max(1.0, abs(py_v)):
                raise SystemExit(f"n={n}: backend costs differ: {c_v!r} vs {py_v!r}")
            print(f"{n:>5}  {c_t:>12.4f}  {py_t:>12.4f}  {py_t / c_t:>7.1f}x  {py_v:>14.9f}")
        else:
            print(f"{n:>5}  {'-':>12}  {py_t:>12.4f}  {'-':>8}  {py_v:>14.9f}")


if __name__ == "__main__":
    main()
