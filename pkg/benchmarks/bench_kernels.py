"""Benchmark the compiled kernels against the pure-numpy fallback.

Runs the hot kernels on representative layer shapes from the full-size
network plus one end-to-end forward pass, and prints a table of per-call
times and the speedup of the compiled path.

    python benchmarks/bench_kernels.py [--repeat N] [--full-forward]
"""

import argparse
import time

import numpy as np

from googlenet import backend, graph, nets, ops

# (name, batch, in_ch, h, w, out_ch, k, stride, pad)
CONV_SHAPES = [
    ("stem 7x7/2 @224", 1, 3, 224, 224, 64, 7, 2, 3),
    ("conv2 3x3 @56", 1, 64, 56, 56, 192, 3, 1, 1),
    ("3b 3x3 @28", 1, 128, 28, 28, 192, 3, 1, 1),
    ("4e 5x5 @14", 1, 32, 14, 14, 128, 5, 1, 2),
]
POOL_SHAPES = [
    ("maxpool 3x3/2 @112", 1, 64, 112, 112, 3, 2, 0, True),
    ("inception pool 3x3/1 @28", 1, 256, 28, 28, 3, 1, 1, False),
]


def timeit(fn, repeat):
    fn()  # warm up
    best = float("inf")
    for _ in range(repeat):
        t0 = time.perf_counter()
        fn()
        best = min(best, time.perf_counter() - t0)
    return best


def bench_backend(kernels, repeat, rng):
    results = {}
    for name, b, c, h, w, o, k, s, p in CONV_SHAPES:
        x = rng.standard_normal((b, c, h, w)).astype(np.float32)
        oh = (h + 2 * p - k) // s + 1
        cols = kernels.im2col(x, k, k, s, p)
        results[f"im2col {name}"] = timeit(lambda: kernels.im2col(x, k, k, s, p), repeat)
        results[f"col2im {name}"] = timeit(lambda: kernels.col2im(cols, h, w, k, k, s, p), repeat)
    for name, b, c, h, w, k, s, p, ceil in POOL_SHAPES:
        x = rng.standard_normal((b, c, h, w)).astype(np.float32)
        oh = ops.pool_output_extent(h, k, s, p, ceil)
        ow = ops.pool_output_extent(w, k, s, p, ceil)
        g = rng.standard_normal((b, c, oh, ow)).astype(np.float32)
        _, arg = kernels.maxpool_forward(x, k, s, p, oh, ow)
        results[f"maxpool fwd {name}"] = timeit(lambda: kernels.maxpool_forward(x, k, s, p, oh, ow), repeat)
        results[f"maxpool bwd {name}"] = timeit(lambda: kernels.maxpool_backward(g, arg, h, w), repeat)
        results[f"avgpool fwd {name}"] = timeit(lambda: kernels.avgpool_forward(x, k, s, p, oh, ow), repeat)
    return results


def bench_full_forward(repeat, rng):
    net = nets.build_googlenet(with_aux=False)
    params = graph.init_params(net, seed=0)
    x = rng.standard_normal((1, 3, 224, 224)).astype(np.float32)
    results = {}
    for name in backend.available():
        backend.kernels = backend.get(name)
        results[name] = timeit(lambda: graph.forward(net, params, x), max(1, repeat // 3))
    backend.kernels = backend.get(backend.name)
    return results


def main():
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--repeat", type=int, default=5)
    parser.add_argument("--full-forward", action="store_true",
                        help="also time one end-to-end full-size forward pass per backend")
    args = parser.parse_args()

    names = backend.available()
    if "cython" not in names:
        print("compiled extension not built, benchmarking the numpy fallback only")
    rng = np.random.default_rng(0)
    per_backend = {name: bench_backend(backend.get(name), args.repeat, rng) for name in names}

    width = max(len(k) for k in per_backend[names[0]])
    header = f"{'kernel':<{width}}  " + "".join(f"{n:>12}" for n in names)
    if len(names) == 2:
        header += f"{'speedup':>10}"
    print(header)
    print("-" * len(header))
    for key in per_backend[names[0]]:
        line = f"{key:<{width}}  " + "".join(f"{per_backend[n][key] * 1e3:>10.2f}ms" for n in names)
        if len(names) == 2:
            line += f"{per_backend['numpy'][key] / per_backend['cython'][key]:>9.2f}x"
        print(line)

    if args.full_forward:
        print()
        for name, t in bench_full_forward(args.repeat, rng).items():
            print(f"full-size forward (batch 1), {name:>6}: {t * 1e3:8.1f}ms")


if __name__ == "__main__":
    main()
