"""Acceptance criteria, one test per criterion, each printing a PASS/FAIL
line. Tolerances and thresholds are pinned here; the training thresholds T1
and T2 were measured once on the first oracle runs of the pinned
configuration in conftest.py and then frozen.

Run alone with:  pytest tests/test_acceptance.py -v -s
"""

import time

import numpy as np
import pytest

import vqcnir
from vqcnir import checkpoint, data, gradcheck, ops
from vqcnir.codebook import Codebook, quantize
from vqcnir.dbca import DBCA, identity_deform_weights
from vqcnir.aiem import curve_map
from vqcnir.model import LossWeights, total_loss
from vqcnir.rng import Rng
from vqcnir.tensor import Tensor, tensor
from vqcnir.train import TrainConfig, train_stage2

from conftest import STAGE2_TRAIN

# thresholds pinned from the first oracle runs of the pinned configuration;
# the frozen values are the contract
T1_STAGE1_PSNR = 25.0  # oracle run measured 25.84 dB holdout reconstruction
T2_STAGE2_GAIN = 9.0  # oracle run measured 13.05 dB restored-vs-degraded gain
ABLATION_SLACK_DB = 0.1

GRAD_TOL = 1e-4


def report(num, name, ok):
    print(f"ACCEPTANCE {num:02d} {name}: {'PASS' if ok else 'FAIL'}")
    assert ok, f"criterion {num} ({name}) failed"


def test_01_gradient_suite():
    t0 = time.monotonic()
    ok, results = gradcheck.run(seed=0, tol=GRAD_TOL)
    elapsed = time.monotonic() - t0
    for name, err, passed in results:
        print(f"  gradcheck {name}: {err:.3e} {'ok' if passed else 'FAIL'}")
    report(1, "gradient suite < 1e-4", ok and elapsed < 300.0)


def test_02_quantization_oracle():
    t0 = time.monotonic()
    rng = Rng(42)
    mismatches = 0
    for trial in range(1000):
        r = rng.split(trial)
        K = 2 + r.choice(63)
        nz = 1 + r.choice(8)
        cb = Codebook(K, nz, r)
        if trial % 3 == 0 and K >= 4:
            # force duplicated entries to exercise the tie-break
            cb.entries.data[K - 1] = cb.entries.data[1]
            cb.entries.data[K // 2] = cb.entries.data[0]
        latent = r.normal((1, nz, 3, 3), 0, 1.0 / K)  # near-codebook scale
        result = quantize(Tensor(latent), cb)
        for i in range(3):
            for j in range(3):
                v = latent[0, :, i, j]
                best, best_d = 0, np.inf
                for k in range(K):
                    d = np.sum((v - cb.entries.data[k]) ** 2)
                    if d < best_d:
                        best, best_d = k, d
                if best != result.indices[0, i, j]:
                    mismatches += 1
    elapsed = time.monotonic() - t0
    report(2, "quantization matches exhaustive search", mismatches == 0 and elapsed < 30.0)


def test_03_curve_map_properties():
    rng = Rng(7)
    n = 100_000
    ok = True
    # identity at zero coefficients, bit-exact, orders 1..8
    x = rng.uniform((n,), -3.0, 3.0).reshape(1, 1, 100, 1000)
    for order in (1, 4, 8):
        zeros = [tensor(np.zeros_like(x)) for _ in range(order)]
        ok = ok and np.array_equal(curve_map(tensor(x), zeros).data, x)
    # range preservation on [0,1] for coefficient maps in [0,1]
    xu = rng.uniform((n,)).reshape(1, 1, 100, 1000)
    for order in range(1, 9):
        coeffs = [tensor(rng.uniform(xu.shape)) for _ in range(order)]
        out = curve_map(tensor(xu), coeffs).data
        ok = ok and out.min() >= 0.0 and out.max() <= 1.0
    # order-1 monotonicity via sorted inputs
    xs = np.sort(rng.uniform((n,))).reshape(1, 1, 1, n)
    out = curve_map(tensor(xs), [tensor(np.full(xs.shape, 0.9))]).data.reshape(-1)
    ok = ok and bool(np.all(np.diff(out) >= 0.0))
    # fixed points at 0 and 1
    fp = np.concatenate([np.zeros(n // 2), np.ones(n // 2)]).reshape(1, 1, 2, -1)
    coeffs = [tensor(rng.uniform(fp.shape)) for _ in range(4)]
    ok = ok and np.array_equal(curve_map(tensor(fp), coeffs).data, fp)
    report(3, "curve-map identity/range/monotonicity/fixed-points", ok)


def test_04_deform_conv_reduction():
    from vqcnir import kernels

    rng = Rng(11)
    ok = True
    for trial in range(100):
        r = rng.split(trial)
        B = 1 + r.choice(2)
        C = 1 + r.choice(4)
        O = 1 + r.choice(4)
        H = 4 + r.choice(6)
        x = r.normal((B, C, H, H))
        w = r.normal((O, C, 3, 3))
        off = np.zeros((B, 18, H, H))
        diff = np.abs(
            kernels.conv2d_forward(x, w, 1, 1, 1, 1) - kernels.deform_forward(x, off, w)
        ).max()
        ok = ok and diff <= 1e-12
    # integer-shift offsets against the shift-then-conv oracle, interior only
    for trial in range(20):
        r = rng.split(10_000 + trial)
        x = r.normal((1, 2, 10, 10))
        w = r.normal((2, 2, 3, 3))
        dy, dx = int(r.choice(3)) - 1, int(r.choice(3)) - 1
        off = np.zeros((1, 18, 10, 10))
        off[:, 0::2] = float(dy)
        off[:, 1::2] = float(dx)
        shifted = np.zeros_like(x)
        src_y = slice(max(0, dy), 10 + min(0, dy))
        dst_y = slice(max(0, -dy), 10 + min(0, -dy))
        src_x = slice(max(0, dx), 10 + min(0, dx))
        dst_x = slice(max(0, -dx), 10 + min(0, -dx))
        shifted[:, :, dst_y, dst_x] = x[:, :, src_y, src_x]
        out = kernels.deform_forward(x, off, w)
        ref = kernels.conv2d_forward(shifted, w, 1, 1, 1, 1)
        m = 2  # interior margin covers the shift plus the kernel ring
        diff = np.abs(out[:, :, m:-m, m:-m] - ref[:, :, m:-m, m:-m]).max()
        ok = ok and diff <= 1e-10
    report(4, "deform-conv reductions", ok)


def test_05_dbca_initialization_identity():
    rng = Rng(13)
    blk = DBCA(rng.split(0), 6)
    blk.deform_w = Tensor(identity_deform_weights(6), requires_grad=True)
    fd = tensor(rng.normal((2, 6, 7, 7)))
    fg = tensor(rng.normal((2, 6, 7, 7)))
    ops.reset_counter("softmax")
    out = blk(fd, fg)
    ok = np.array_equal(out.data, fd.data) and ops.counter("softmax") == 1
    # attention rows sum to one (check on the raw matrix with live scales)
    blk.attention.gamma_d.data[...] = 0.5
    logits_sum_ok = True
    qd = ops.reshape(blk.attention.q_d(blk.attention.norm_d(fd)), (2, 6, 49))
    qg = ops.reshape(blk.attention.q_g(blk.attention.norm_g(fg)), (2, 6, 49))
    m = ops.softmax(
        ops.scale(ops.matmul(qd, ops.transpose(qg, (0, 2, 1))), 1.0 / np.sqrt(6)), axis=-1
    ).data
    logits_sum_ok = np.allclose(m.sum(axis=-1), 1.0, atol=1e-12)
    report(5, "DBCA init identity, rows sum 1, single softmax", ok and logits_sum_ok)


def test_06_loss_arithmetic():
    one = lambda: Tensor(np.float64(1.0))
    exact = total_loss(one(), one(), one(), one(), LossWeights()).item() == 3.1
    rng = Rng(17)
    ok = exact
    for t in range(50):
        r = rng.split(t)
        parts = [float(r.uniform((), 0, 5)) for _ in range(4)]
        w = LossWeights(*[float(r.uniform((), 0, 2)) for _ in range(4)])
        got = total_loss(*(Tensor(np.float64(p)) for p in parts), w).item()
        expected = w.pix * parts[0] + w.ca * parts[1] + w.per * parts[2] + w.adv * parts[3]
        ok = ok and abs(got - expected) <= 1e-12
    report(6, "total loss weights {1,1,1,0.1} and decomposition", ok)


def test_07_stage1_training(stage1_ckpt):
    path, psnr_val, seconds = stage1_ckpt
    print(f"  stage1 holdout reconstruction psnr = {psnr_val:.4f} dB in {seconds:.0f}s")
    report(7, f"stage-1 reconstruction >= {T1_STAGE1_PSNR} dB", psnr_val >= T1_STAGE1_PSNR and seconds < 7200)


def test_08_stage2_training(stage2_run, stage1_ckpt):
    path, restored, degraded, seconds = stage2_run
    gain = restored - degraded
    print(f"  stage2 restored={restored:.4f} degraded={degraded:.4f} gain={gain:.4f} dB in {seconds:.0f}s")
    _, s1_arrays = checkpoint.load(stage1_ckpt[0])
    _, s2_arrays = checkpoint.load(path)
    frozen_ok = np.array_equal(s1_arrays["codebook.entries"], s2_arrays["codebook.entries"]) and all(
        np.array_equal(arr, s2_arrays[name])
        for name, arr in s1_arrays.items()
        if name.startswith("decoder_g")
    )
    report(8, f"stage-2 gain >= {T2_STAGE2_GAIN} dB with frozen prior", gain >= T2_STAGE2_GAIN and frozen_ok and seconds < 10800)


def test_09_ablation_ordering(ablation_runs):
    full = ablation_runs["none"]
    no_dbca = ablation_runs["dbca"]
    no_aiem = ablation_runs["aiem"]
    print(f"  matched-budget psnr: full={full:.4f} no_dbca={no_dbca:.4f} no_aiem={no_aiem:.4f}")
    strict = full >= no_dbca and full >= no_aiem
    print(f"  strict ordering full >= ablated: {'holds' if strict else 'does not hold (reported, not gated)'}")
    ok = full >= no_dbca - ABLATION_SLACK_DB and full >= no_aiem - ABLATION_SLACK_DB
    report(9, "ablation ordering within 0.1 dB slack", ok)


def test_10_metric_correctness(tmp_path):
    ok = data.psnr(np.zeros((8, 8, 3)), np.full((8, 8, 3), 0.1)) == pytest.approx(20.0, abs=1e-12)
    img = data.generate_clean(1, 24, 5)[0]
    ok = ok and abs(data.ssim(img, img) - 1.0) <= 1e-9
    rng = Rng(19)
    for i in range(100):
        im = rng.uniform((11, 13, 3))
        p1 = tmp_path / f"r{i}a.ppm"
        p2 = tmp_path / f"r{i}b.ppm"
        data.save_ppm(im, p1)
        data.save_ppm(data.load_ppm(p1), p2)
        ok = ok and p1.read_bytes() == p2.read_bytes()
    report(10, "metric arithmetic and PPM round trips", ok)


def test_11_determinism(paired_images, stage1_ckpt, tmp_path):
    cfg = dict(STAGE2_TRAIN)
    cfg.update(stage2_iters=50, log_interval=25, lr_milestones=())
    outs = []
    for run in range(2):
        out = tmp_path / f"det{run}.ckpt"
        train_stage2(paired_images, stage1_ckpt[0], TrainConfig(**cfg), str(out))
        outs.append((out.read_bytes(), (tmp_path / f"det{run}.ckpt.log").read_bytes()))
    ok = outs[0][0] == outs[1][0] and outs[0][1] == outs[1][1]
    report(11, "bit-identical repeated stage-2 runs", ok)
