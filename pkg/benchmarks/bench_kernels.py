"""Compare the compiled kernels with the pure-Python fallback.

Run with ``python3 benchmarks/bench_kernels.py``. Each kernel is timed on both
backends with identical inputs, and the outputs are checked for bit equality.
"""

import argparse
import time

import numpy as np

from entmeter import _backend


def best_of(fn, repeats):
    times = []
    out = None
    for _ in range(repeats):
        t0 = time.perf_counter()
        out = fn()
        times.append(time.perf_counter() - t0)
    return min(times), out


def bench_pair_project(k, repeats, rng):
    # 4 copies of a 4x4 system: the 65536-dimensional space of the G-concurrence observable
    psi = rng.standard_normal((16, 4, 64, 4, 1)) + 1j * rng.standard_normal((16, 4, 64, 4, 1))
    return best_of(lambda: k.pair_project(psi, -1), repeats)


def bench_givens(k, repeats, rng, length):
    amps0 = rng.standard_normal((4, 4)) + 1j * rng.standard_normal((4, 4))
    moves = rng.random((length, 4))

    def run():
        amps = amps0.copy()
        total, _ = k.givens_descent(amps, moves, 0.5)
        return total, amps

    return best_of(run, repeats)


def bench_concurrence_rows(k, repeats, rng):
    rows = rng.standard_normal((200_000, 4)) + 1j * rng.standard_normal((200_000, 4))
    return best_of(lambda: k.concurrence_rows(rows), repeats)


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeats", type=int, default=3)
    ap.add_argument("--moves", type=int, default=10_000)
    args = ap.parse_args()

    backends = {"python": _backend.load("python")}
    try:
        backends["cython"] = _backend.load("cython")
    except ImportError:
        print("compiled kernels not built; timing the fallback only")

    cases = {
        "pair_project (65536 amps)": lambda k, rng: bench_pair_project(k, args.repeats, rng),
        f"givens_descent ({args.moves} moves)": lambda k, rng: bench_givens(k, args.repeats, rng, args.moves),
        "concurrence_rows (2e5 rows)": lambda k, rng: bench_concurrence_rows(k, args.repeats, rng),
    }
    print(f"{'kernel':<32}" + "".join(f"{name:>12}" for name in backends) + f"{'speedup':>10}  identical")
    for label, case in cases.items():
        timings, outputs = {}, {}
        for name, k in backends.items():
            timings[name], outputs[name] = case(k, np.random.default_rng(7))
        line = f"{label:<32}" + "".join(f"{timings[n] * 1e3:>10.2f}ms" for n in backends)
        if "cython" in backends:
            a, b = outputs["python"], outputs["cython"]
            same = (a[0] == b[0] and np.array_equal(a[1], b[1])) if isinstance(a, tuple) else np.array_equal(a, b)
            line += f"{timings['python'] / timings['cython']:>9.1f}x  {same}"
        print(line)


if __name__ == "__main__":
    main()
