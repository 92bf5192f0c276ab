"""Compare the compiled and numpy gridding backends.

Times spread, gather, and a full fast-summation apply for each window
dimension on random normal points, checks the two backends agree, and
prints a table (or CSV with ``--csv``).

    python benchmarks/bench_backends.py --n 20000 50000 --repeat 5
"""

from __future__ import annotations

import argparse
import sys
import timeit

import numpy as np

from kis import _backend, _gridding_py
from kis.fastsum import FastsumConfig, FastsumPlan
from kis.kernels import GaussianKernelSpec

try:
    from kis import _gridding as _compiled
except ImportError:
    _compiled = None


def _swap(module):
    _backend.spread, _backend.gather = module.spread, module.gather


def bench(n, d, repeat, cfg):
    rng = np.random.default_rng(0)
    plan = FastsumPlan(rng.standard_normal((n, d)), GaussianKernelSpec(1.0), cfg)
    v = rng.standard_normal(n)
    grid = rng.standard_normal((plan.grid_size,) * d)
    rows = []
    results = {}
    for name, mod in (("compiled", _compiled), ("python", _gridding_py)):
        if mod is None:
            continue
        _swap(mod)
        timings = {
            "spread": lambda: mod.spread(plan._idx, plan._w, v, plan.grid_size),
            "gather": lambda: mod.gather(plan._idx, plan._w, grid),
            "apply": lambda: plan.apply(v),
        }
        for op, fn in timings.items():
            best = min(timeit.repeat(fn, number=1, repeat=repeat))
            rows.append((name, d, n, op, best))
        results[name] = plan.apply(v)
    if len(results) == 2:
        a, b = results["compiled"], results["python"]
        diff = float(np.max(np.abs(a - b)) / np.max(np.abs(b)))
        if diff > 1e-12:
            print(f"warning: backends disagree by {diff:.2e} (d={d}, n={n})", file=sys.stderr)
    return rows


def main(argv=None):
    p = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    p.add_argument("--n", type=int, nargs="+", default=[10000, 50000])
    p.add_argument("--d", type=int, nargs="+", default=[1, 2, 3])
    p.add_argument("--repeat", type=int, default=3)
    p.add_argument("--bandwidth", type=int, default=32)
    p.add_argument("--csv", action="store_true")
    args = p.parse_args(argv)
    if _compiled is None:
        print("compiled backend not built; timing the numpy backend only", file=sys.stderr)
    cfg = FastsumConfig(bandwidth=args.bandwidth)
    original = (_backend.spread, _backend.gather)
    rows = []
    try:
        for d in args.d:
            for n in args.n:
                rows.extend(bench(n, d, args.repeat, cfg))
    finally:
        _backend.spread, _backend.gather = original
    if args.csv:
        print("backend,d,n,op,seconds")
        for r in rows:
            print(f"{r[0]},{r[1]},{r[2]},{r[3]},{r[4]:.6f}")
        return
    print(f"{'backend':<10}{'d':>3}{'n':>9}  {'op':<8}{'seconds':>10}{'speedup':>9}")
    ref = {(d, n, op): t for name, d, n, op, t in rows if name == "python"}
    for name, d, n, op, t in rows:
        speed = ref.get((d, n, op), float("nan")) / t
        print(f"{name:<10}{d:>3}{n:>9}  {op:<8}{t:>10.4f}{speed:>8.1f}x")


if __name__ == "__main__":
    main()
