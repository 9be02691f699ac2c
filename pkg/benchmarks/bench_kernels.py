"""Compare the compiled and pure-Python kernels.

Usage: python benchmarks/bench_kernels.py [--radius 14] [--repeat 3]
"""

from __future__ import annotations

import argparse
import random
import time

from shadowlab import kernels
from shadowlab.groups import _bs_scaling, default_generators, parse_presentation


def _best_of(fn, repeat: int) -> float:
    best = float("inf")
    for _ in range(repeat):
        t = time.perf_counter()
        fn()
        best = min(best, time.perf_counter() - t)
    return best


def bench_bs_ball(radius: int, repeat: int) -> dict[str, float]:
    spec = parse_presentation("BS(1,2)")
    gens = default_generators(spec)
    scaled, scale = _bs_scaling(spec, gens, radius)
    out = {}
    sizes = set()
    for name in kernels.backends():
        res = kernels.bs_ball(2, scaled, scale, radius, 10**8, backend=name)
        sizes.add(len(res[0]))
        out[name] = _best_of(lambda: kernels.bs_ball(2, scaled, scale, radius, 10**8, backend=name), repeat)
    assert len(sizes) == 1, "backends disagree"
    print(f"bs_ball  R={radius}  elements={sizes.pop()}")
    return out


def bench_grid_scan(rows: int, side: int, repeat: int) -> dict[str, float]:
    rng = random.Random(0)
    a = [rng.randint(-50, 50) for _ in range(rows)]
    b = [rng.randint(-50, 50) for _ in range(rows)]
    # loose rows that always hold, then one that never does: every point checks every row
    c = [abs(x) * side + abs(y) * side for x, y in zip(a, b)]
    a[-1] = b[-1] = 0
    c[-1] = -1
    out = {}
    for name in kernels.backends():
        out[name] = _best_of(lambda: kernels.grid_scan(a, b, c, side, side, backend=name), repeat)
    print(f"grid_scan  rows={rows}  grid={side}x{side}  (infeasible, full scan)")
    return out


def main() -> None:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--radius", type=int, default=14)
    parser.add_argument("--side", type=int, default=400)
    parser.add_argument("--repeat", type=int, default=3)
    args = parser.parse_args()
    print(f"default backend: {kernels.BACKEND}")
    benches = (lambda: bench_bs_ball(args.radius, args.repeat),
               lambda: bench_grid_scan(16, args.side, args.repeat))
    for bench in benches:
        result = bench()
        py = result["python"]
        for name, secs in sorted(result.items()):
            print(f"  {name:<7} {secs * 1e3:9.2f} ms   speedup x{py / secs:6.1f}")


if __name__ == "__main__":
    main()
