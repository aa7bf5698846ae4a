"""Timing comparison of the numba-jitted and pure-numpy kernel backends.

Run:  python benchmarks/bench_backends.py [--quick]

Times forward and backward of the three hot kernels at training-like shapes,
plus one full restoration-model forward/backward. The numpy path rides BLAS
matmuls and usually wins at desk scale; the numba path avoids the im2col
materialization and closes the gap as spatial sizes grow.
"""

import argparse
import time

import numpy as np

import vqcnir
from vqcnir import kernels, ops
from vqcnir.model import ModelConfig, VQCNIR, pixel_loss
from vqcnir.rng import Rng
from vqcnir.tensor import Tape, Tensor, backward


def time_fn(fn, repeats):
    fn()  # warm-up / jit compile
    t0 = time.perf_counter()
    for _ in range(repeats):
        fn()
    return (time.perf_counter() - t0) / repeats


def kernel_cases(quick):
    rng = Rng(0)
    sizes = [(2, 16, 32, 32, 32)] if quick else [(2, 16, 32, 32, 32), (4, 32, 64, 64, 64)]
    for B, C, O, H, W in sizes:
        x = rng.normal((B, C, H, W))
        w = rng.normal((O, C, 3, 3))
        off = rng.uniform((B, 18, H, W), -1.0, 1.0)
        g = rng.normal((B, O, H, W))
        wt = rng.normal((C, O, 4, 4))
        gt = rng.normal((B, O, 2 * H, 2 * W))
        label = f"B{B} C{C}->{O} {H}x{W}"
        yield f"conv2d fwd {label}", lambda: kernels.conv2d_forward(x, w, 1, 1, 1, 1)
        yield f"conv2d bwd-in {label}", lambda: kernels.conv2d_backward_input(g, w, x.shape, 1, 1, 1, 1)
        yield f"conv2d bwd-w {label}", lambda: kernels.conv2d_backward_weight(g, x, w.shape, 1, 1, 1, 1)
        yield f"deform fwd {label}", lambda: kernels.deform_forward(x, off, w)
        yield f"deform bwd {label}", lambda: kernels.deform_backward(g, x, off, w)
        yield f"tconv fwd {label}", lambda: kernels.tconv_forward(x, wt, 2, 1)
        yield f"tconv bwd-in {label}", lambda: kernels.tconv_backward_input(gt, wt, x.shape, 2, 1)


def model_case():
    cfg = ModelConfig(base_channels=8, num_scales=2, latent_dim=16, codebook_size=256, aiem_blocks=1)
    model = VQCNIR(Rng(3).split(2), cfg)
    rng = Rng(4)
    night = Tensor(rng.uniform((2, 3, 32, 32)))
    gt = Tensor(rng.uniform((2, 3, 32, 32)))

    def step():
        model.zero_grads()
        with Tape():
            restored, _ = model(night)
            backward(pixel_loss(restored, gt))

    return step


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--quick", action="store_true", help="fewer shapes and repeats")
    args = ap.parse_args()
    repeats = 3 if args.quick else 10

    rows = []
    for name, fn in kernel_cases(args.quick):
        times = {}
        for backend in ("numpy", "numba"):
            vqcnir.set_backend(backend)
            times[backend] = time_fn(fn, repeats)
        rows.append((name, times["numpy"], times["numba"]))

    step = model_case()
    times = {}
    for backend in ("numpy", "numba"):
        vqcnir.set_backend(backend)
        times[backend] = time_fn(step, max(2, repeats // 2))
    rows.append(("model fwd+bwd B2 32x32", times["numpy"], times["numba"]))

    width = max(len(r[0]) for r in rows)
    print(f"{'case':<{width}}  {'numpy':>10}  {'numba':>10}  ratio(nb/np)")
    for name, t_np, t_nb in rows:
        print(f"{name:<{width}}  {t_np * 1e3:>8.2f}ms  {t_nb * 1e3:>8.2f}ms  {t_nb / t_np:>8.2f}")


if __name__ == "__main__":
    main()
