"""Benchmark: compiled kernel backend vs pure-numpy fallback.

Times the two hot paths (batched forward, fused loss+gradients) at the
default model dimensions across batch sizes, plus one end-to-end training
epoch on the acceptance-scale cohort.

Usage: python benchmarks/bench_kernels.py [--repeats N]
"""

from __future__ import annotations

import argparse
import time

import numpy as np

from hypomimiacoach.kernels import get_backend
from hypomimiacoach.model import ModelConfig, init_model


def best_of(fn, repeats: int) -> float:
    times = []
    for _ in range(repeats):
        start = time.perf_counter()
        fn()
        times.append(time.perf_counter() - start)
    return min(times)


def main() -> None:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--repeats", type=int, default=5)
    args = parser.parse_args()

    backends = {"python": get_backend("python")}
    try:
        backends["compiled"] = get_backend("compiled")
    except ImportError:
        print("compiled backend not built; benchmarking the fallback only")

    config = ModelConfig()  # desk-scale defaults: D=32, F=16, C1=16, C2=8, k=2
    model = init_model(config)
    params = model.params()
    rng = np.random.default_rng(0)

    print(f"model dims: D={config.feature_dim} F={config.au_feature_dim} "
          f"C1={config.conv1_channels} C2={config.conv2_channels} k={config.k}")
    header = f"{'op':<16}{'batch':>6}" + "".join(f"{name:>14}" for name in backends)
    if len(backends) == 2:
        header += f"{'speedup':>10}"
    print(header)

    for batch in (1, 32, 256, 1024):
        X = rng.standard_normal((batch, config.feature_dim))
        y = rng.integers(0, 2, batch)
        for op_name, call in (
            ("forward_batch", lambda be: be.forward_batch(params, X, config.k)),
            ("loss_and_grads", lambda be: be.loss_and_grads(params, X, y, config.k)),
        ):
            row = f"{op_name:<16}{batch:>6}"
            timed = {}
            for name, backend in backends.items():
                timed[name] = best_of(lambda: call(backend), args.repeats)
                row += f"{timed[name] * 1e3:>12.2f}ms"
            if len(timed) == 2:
                row += f"{timed['python'] / timed['compiled']:>9.1f}x"
            print(row)

    # one SGD epoch at acceptance scale (1890 train frames, batch 32)
    from hypomimiacoach.training import sgd_step

    X = rng.standard_normal((1890, config.feature_dim))
    y = rng.integers(0, 2, 1890)

    def epoch(backend):
        p, v = params, None
        for start in range(0, len(X), config.batch_size):
            _, grads = backend.loss_and_grads(
                p, X[start : start + config.batch_size], y[start : start + config.batch_size],
                config.k,
            )
            p, v = sgd_step(p, grads, config.lr, config.momentum, v)

    row = f"{'sgd epoch':<16}{1890:>6}"
    timed = {}
    for name, backend in backends.items():
        timed[name] = best_of(lambda: epoch(backend), max(2, args.repeats // 2))
        row += f"{timed[name] * 1e3:>12.2f}ms"
    if len(timed) == 2:
        row += f"{timed['python'] / timed['compiled']:>9.1f}x"
    print(row)


if __name__ == "__main__":
    main()
