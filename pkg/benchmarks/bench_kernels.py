"""Time the compiled convolution kernels against the numpy fallback.

Runs each kernel on identical inputs, checks the outputs agree to 1e-12,
and prints a table of per-call wall times plus the speedup ratio. Shapes
cover the shipped CNN defaults and a couple of heavier cases.

    python3 benchmarks/bench_kernels.py [--repeats N]
"""

import argparse
import time

import numpy as np

from cntnn import _conv_numpy, _convkernels

# (label, batch, channels, H, W, out_channels, kernel, stride)
CASES = [
    ("mnist-l1", 32, 1, 28, 28, 8, 3, 2),
    ("mnist-l2", 32, 8, 13, 13, 8, 3, 2),
    ("wide", 16, 16, 32, 32, 16, 3, 1),
    ("stride-odd", 32, 4, 26, 26, 8, 3, 2),
]


def out_size(n, m, stride):
    return (n - m) // stride + 1


def timeit(fn, args, repeats):
    best = float("inf")
    for _ in range(repeats):
        t0 = time.perf_counter()
        out = fn(*args)
        best = min(best, time.perf_counter() - t0)
    return best, out


def run_case(label, b, c, h, w, oc, m, stride, repeats):
    rng = np.random.default_rng(0)
    x = rng.normal(size=(b, c, h, w))
    kernel = rng.normal(size=(c, oc, m, m))
    bias = rng.normal(size=oc)
    oh, ow = out_size(h, m, stride), out_size(w, m, stride)
    gz = rng.normal(size=(b, oc, oh, ow))

    rows = []
    for name, args in [
        ("conv_forward", (x, kernel, bias, stride)),
        ("conv_grad_weights", (x, gz, m, stride)),
        ("conv_grad_input", (kernel, gz, h, w, stride)),
    ]:
        t_c, out_c = timeit(getattr(_convkernels, name), args, repeats)
        t_n, out_n = timeit(getattr(_conv_numpy, name), args, repeats)
        outs_c = out_c if isinstance(out_c, tuple) else (out_c,)
        outs_n = out_n if isinstance(out_n, tuple) else (out_n,)
        for got, want in zip(outs_c, outs_n):
            # accumulation order differs between the backends, so exact
            # equality is out; demand agreement to 1e-9 relative
            assert np.allclose(np.asarray(got), np.asarray(want), rtol=1e-9, atol=1e-9), (label, name)
        rows.append((f"{label}/{name[5:]}", t_c, t_n))
    return rows


def main():
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--repeats", type=int, default=5, help="timed repeats, best-of (default 5)")
    opts = parser.parse_args()

    print(f"{'case':<24} {'compiled':>12} {'numpy':>12} {'speedup':>9}")
    rows = []
    for case in CASES:
        rows.extend(run_case(*case, repeats=opts.repeats))
    for name, t_c, t_n in rows:
        print(f"{name:<24} {t_c * 1e3:>10.3f}ms {t_n * 1e3:>10.3f}ms {t_n / t_c:>8.2f}x")
    geo = np.exp(np.mean([np.log(t_n / t_c) for _, t_c, t_n in rows]))
    print(f"\ngeometric-mean speedup: {geo:.2f}x over {len(rows)} kernel/shape pairs")


if __name__ == "__main__":
    main()
