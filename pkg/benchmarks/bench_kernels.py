"""Benchmark the numba kernels against the pure-numpy fallback.

Times the three convolution primitives on their own, then a full model
step (forward + parameter backward) and a saliency pass, on both dense
and partially occluded inputs. Run:

    python benchmarks/bench_kernels.py [--batch 32] [--size 32] [--reps 10]
"""

from __future__ import annotations

import argparse
import time

import numpy as np

from edda import ConvNet, kernels
from edda.kernels import numba_impl, numpy_impl

IMPLS = {"numba": numba_impl, "numpy": numpy_impl}


def timeit(fn, reps: int) -> float:
    fn()  # warm-up; also triggers JIT compilation for numba
    best = float("inf")
    for _ in range(reps):
        t0 = time.perf_counter()
        fn()
        best = min(best, time.perf_counter() - t0)
    return best * 1000.0


def bench_primitives(batch: int, size: int, reps: int) -> None:
    rng = np.random.default_rng(0)
    cases = [
        ("conv 3->8", rng.random((batch, size, size, 3)), rng.normal(size=(3, 3, 3, 8))),
        ("conv 16->32", rng.random((batch, size // 4, size // 4, 16)), rng.normal(size=(3, 3, 16, 32))),
    ]
    print(f"{'primitive':<22} {'numba ms':>10} {'numpy ms':>10}")
    for name, x, w in cases:
        b = np.zeros(w.shape[-1])
        dout = rng.normal(size=x.shape[:3] + (w.shape[-1],))
        rows = {
            f"{name} forward": lambda impl, x=x, w=w, b=b: impl.conv2d_forward(x, w, b),
            f"{name} input grad": lambda impl, dout=dout, w=w: impl.conv2d_input_grad(dout, w),
            f"{name} param grads": lambda impl, x=x, dout=dout: impl.conv2d_param_grads(x, dout),
        }
        for label, call in rows.items():
            times = [timeit(lambda impl=impl: call(impl), reps) for impl in IMPLS.values()]
            print(f"{label:<22} {times[0]:>10.3f} {times[1]:>10.3f}")


def bench_model(batch: int, size: int, reps: int) -> None:
    rng = np.random.default_rng(1)
    model = ConvNet((size, size, 3), num_classes=3, seed=0)
    dense = rng.random((batch, size, size, 3))
    occluded = dense.copy()
    occluded[:, size // 4 : 3 * size // 4, size // 4 : 3 * size // 4] = 0.0
    dlogits = rng.normal(size=(batch, 3))

    print(f"\n{'model pass':<22} {'numba ms':>10} {'numpy ms':>10}")
    passes = {
        "forward dense": lambda: model.logits_batch(dense),
        "forward occluded": lambda: model.logits_batch(occluded),
        "train step": lambda: model.loss_backward(dense, dlogits),
        "saliency backward": lambda: model.feature_gradients(dense, 0, "conv3"),
    }
    for label, call in passes.items():
        times = []
        for backend in IMPLS:
            kernels.set_backend(backend)
            times.append(timeit(call, reps))
        print(f"{label:<22} {times[0]:>10.3f} {times[1]:>10.3f}")
    kernels.set_backend("numba")


def main() -> None:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--batch", type=int, default=32)
    parser.add_argument("--size", type=int, default=32)
    parser.add_argument("--reps", type=int, default=10)
    args = parser.parse_args()
    print(f"batch={args.batch} size={args.size} reps={args.reps} (best-of timing)\n")
    bench_primitives(args.batch, args.size, args.reps)
    bench_model(args.batch, args.size, args.reps)


if __name__ == "__main__":
    main()
