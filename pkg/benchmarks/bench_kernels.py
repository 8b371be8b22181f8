"""Time each kernel under every available backend.

Run with ``python3 benchmarks/bench_kernels.py [--repeat N]``.
"""
import argparse
import timeit

import numpy as np

from gazekit import kernels


def _cases(rng):
    k = 16
    S = rng.normal(0, 1, (k, k))
    a = rng.integers(0, k, 200).astype(np.int64)
    b = rng.integers(0, k, 200).astype(np.int64)

    n = 5000
    steps = rng.normal(0, 2, (n, 2))
    steps[rng.random(n) < 0.01] *= 40
    xy = np.cumsum(steps, axis=0)
    valid = rng.random(n) > 0.02
    t = np.arange(n, dtype=np.int64) * 2000
    idt_args = (xy[:, 0].copy(), xy[:, 1].copy(), valid, t, 2000.0, 40.0, 100_000.0)

    xs, ys = rng.uniform(0, 640, 50), rng.uniform(0, 360, 50)
    ws = rng.uniform(0.1, 1.0, 50)

    def gauss(mod):
        out = np.zeros((360, 640))
        mod.gaussian_accumulate(out, xs, ys, ws, 20.0, 80.0)

    return {
        "nw_fill 200x200": lambda mod: mod.nw_fill(a, b, S, -1.0, -1.0, True),
        "idt_windows n=5000": lambda mod: list(mod.idt_windows(*idt_args)),
        "gaussian_accumulate 50 pts 640x360": gauss,
    }


def main(argv=None):
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--repeat", type=int, default=3)
    args = parser.parse_args(argv)
    found = kernels.backends()
    cases = _cases(np.random.default_rng(0))
    names = sorted(found)
    print(f"{'kernel':<38}" + "".join(f"{n:>12}" for n in names) + ("     speedup" if len(names) > 1 else ""))
    for label, call in cases.items():
        best = {}
        for n in names:
            best[n] = min(timeit.repeat(lambda call=call, n=n: call(found[n]), number=1, repeat=args.repeat))
        row = f"{label:<38}" + "".join(f"{best[n] * 1e3:>10.2f}ms" for n in names)
        if "cython" in best:
            row += f"{best['python'] / best['cython']:>11.1f}x"
        print(row)


if __name__ == "__main__":
    main()
