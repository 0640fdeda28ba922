"""Compare the compiled and pure-Python finite-part kernels of the D integral.

Run with ``python benchmarks/bench_dexp.py [--repeat N]``. Reports the best
wall time per call for each backend and the largest relative disagreement.
"""

import argparse
import math
import timeit

from gravdeco import _dcore_py

try:
    from gravdeco import _dcore
except ImportError:  # extension not built
    _dcore = None

U_VALUES = (1e-3, 0.05, 0.1, 0.5, 1.0, 5.0, 50.0)
ARGS = (4 * math.pi, 1e-12, 1e-12, 4000)


def best_time(fn, repeat: int) -> float:
    def batch():
        for u in U_VALUES:
            fn(u, *ARGS)

    return min(timeit.repeat(batch, number=1, repeat=repeat)) / len(U_VALUES)


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--repeat", type=int, default=20)
    args = parser.parse_args(argv)

    t_py = best_time(_dcore_py.finite_part, args.repeat)
    print(f"python  {t_py * 1e6:10.1f} us/call")
    if _dcore is None:
        print("cython  not built")
        return 0
    t_cy = best_time(_dcore.finite_part, args.repeat)
    print(f"cython  {t_cy * 1e6:10.1f} us/call   speedup x{t_py / t_cy:.1f}")
    worst = max(abs(_dcore.finite_part(u, *ARGS)[0] / _dcore_py.finite_part(u, *ARGS)[0] - 1.0) for u in U_VALUES)
    print(f"max relative difference {worst:.2e}")
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
