"""Compare the compiled and pure-Python orbit kernels.

    python3 benchmarks/bench_kernel.py [--n 20000] [--repeat 3] [--precision 50]
"""
import argparse
import time

from gmpy2 import mpfr

from circlelab import kernel, make_arnold, make_two_harmonic
from circlelab.numerics import Precision


def best_of(fn, repeat):
    times = []
    for _ in range(repeat):
        t0 = time.perf_counter()
        out = fn()
        times.append(time.perf_counter() - t0)
    return min(times), out


def gap(a, b, op):
    """Largest difference between two backends' results (rounding order differs)."""
    if op == "advance":
        return float(max(abs(a[0] + a[1] - b[0] - b[1]), abs(a[2] - b[2])))
    ws_a, fs_a, pre_a = a
    ws_b, fs_b, pre_b = b
    d = max(abs(wa + fa - wb - fb) for wa, fa, wb, fb in zip(ws_a, fs_a, ws_b, fs_b))
    return float(max(d, max(abs(x - y) for x, y in zip(pre_a, pre_b))))


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--n", type=int, default=20_000)
    ap.add_argument("--repeat", type=int, default=3)
    ap.add_argument("--precision", type=int, default=50)
    args = ap.parse_args()

    prec = Precision(args.precision)
    backends = [("python", kernel.python_backend)]
    if kernel.compiled_backend is not None:
        backends.append(("compiled", kernel.compiled_backend))
    else:
        print("compiled backend unavailable; timing the fallback only")

    with prec.context():
        maps = {"arnold": make_arnold("0.6", "0.5", prec),
                "two_harmonic": make_two_harmonic("0.6", "0.4", "0.2", prec)}
        print(f"{'map':<13} {'op':<8} {'backend':<9} {'seconds':>9} {'points/s':>11}")
        for name, T in maps.items():
            ref = {}
            for op in ("advance", "orbit"):
                for label, be in backends:
                    if op == "advance":
                        fn = lambda: be.advance_log(T.spec, 0, mpfr(0), args.n)
                    else:
                        fn = lambda: be.orbit(T.spec, 0, mpfr(0), args.n)
                    sec, out = best_of(fn, args.repeat)
                    print(f"{name:<13} {op:<8} {label:<9} {sec:9.3f} {args.n / sec:11.0f}")
                    ref.setdefault(op, out)
                    if label != "python":
                        print(f"{'':<13} {'':<8} {'max diff':<9} {gap(ref[op], out, op):9.1e}")


if __name__ == "__main__":
    main()
