"""Command-line entry point.

Exit codes: 0 success, 1 verification failure, 2 usage or configuration
error, 3 I/O or file-format error.
"""

import argparse
import os
import sys

import numpy as np

from . import checkpoint, data, gradcheck
from .config import parse_config
from .errors import ConfigError, ContractError, FormatError, TrainingDiverged
from .rng import Rng
from .train import (
    evaluate_restoration,
    load_stage2_model,
    restore_image,
    train_stage1,
    train_stage2,
)

EXIT_OK = 0
EXIT_VERIFY = 1
EXIT_USAGE = 2
EXIT_IO = 3


def build_parser():
    p = argparse.ArgumentParser(prog="vqcnir", description="Night image restoration with a codebook prior.")
    sub = p.add_subparsers(dest="command", required=True)

    g = sub.add_parser("gradcheck", help="finite-difference verification of every differentiable op")
    g.add_argument("--filter", default=None, help="run a single named check")
    g.add_argument("--seed", type=int, default=0)

    s = sub.add_parser("synth", help="generate a paired clean/night dataset")
    s.add_argument("--out", required=True)
    s.add_argument("--count", type=int, required=True)
    s.add_argument("--size", type=int, required=True)
    s.add_argument("--seed", type=int, required=True)
    s.add_argument("--config", default=None, help="optional config overriding degradation ranges")

    t1 = sub.add_parser("train-vqgan", help="stage 1: learn the codebook prior on clean images")
    t1.add_argument("--config", required=True)
    t1.add_argument("--out", required=True)

    t2 = sub.add_parser("train", help="stage 2: train the restoration network")
    t2.add_argument("--config", required=True)
    t2.add_argument("--stage1", required=True)
    t2.add_argument("--out", required=True)

    i = sub.add_parser("infer", help="restore one PPM image")
    i.add_argument("--ckpt", required=True)
    i.add_argument("--in", dest="input", required=True)
    i.add_argument("--out", required=True)

    e = sub.add_parser("eval", help="mean PSNR/SSIM over a dataset manifest")
    e.add_argument("--manifest", required=True)
    e.add_argument("--ckpt", default=None, help="also evaluate restored outputs from this checkpoint")

    a = sub.add_parser("ablate", help="stage-2 training with one module disabled")
    a.add_argument("--config", required=True)
    a.add_argument("--stage1", required=True)
    a.add_argument("--disable", required=True, choices=["aiem", "dbca", "decoder_d"])
    a.add_argument("--out", default=None, help="checkpoint path (default ablate_<module>.ckpt)")
    return p


def _load_pairs(manifest_path):
    base = os.path.dirname(os.path.abspath(manifest_path))
    pairs = []
    for clean_rel, night_rel, _seed in data.read_manifest(manifest_path):
        clean = data.load_ppm(os.path.join(base, clean_rel))
        night = data.load_ppm(os.path.join(base, night_rel))
        pairs.append((clean, night))
    return pairs


def cmd_gradcheck(args):
    try:
        ok, results = gradcheck.run(args.filter, args.seed)
    except KeyError:
        known = ", ".join(sorted(gradcheck.CASES))
        print(f"unknown gradcheck filter {args.filter!r}; known: {known}", file=sys.stderr)
        return EXIT_USAGE
    for name, err, passed in results:
        print(f"{name}: max_rel_err={err:.3e} {'PASS' if passed else 'FAIL'}")
    return EXIT_OK if ok else EXIT_VERIFY


def cmd_synth(args):
    ranges = None
    if args.config:
        cfg = parse_config(args.config)
        for line in cfg.echo_lines():
            print(line)
        ranges = cfg.degradation_ranges()
    os.makedirs(args.out, exist_ok=True)
    images = data.generate_clean(args.count, args.size, args.seed)
    master = Rng(args.seed)
    records = []
    for i, img in enumerate(images):
        prng = master.split(500_000 + i)
        noise_seed = int(prng.integers(1, 1 << 62)[0])
        params = data.DegradationParams.sample(prng, seed=noise_seed, ranges=ranges)
        night = data.degrade(img, params)
        clean_name = f"clean_{i:04d}.ppm"
        night_name = f"night_{i:04d}.ppm"
        data.save_ppm(img, os.path.join(args.out, clean_name))
        data.save_ppm(night, os.path.join(args.out, night_name))
        records.append((clean_name, night_name, noise_seed))
    manifest = os.path.join(args.out, "manifest.txt")
    data.write_manifest(manifest, records)
    print(f"synth: wrote {len(records)} pairs to {args.out} (manifest {manifest})")
    return EXIT_OK


def cmd_train_vqgan(args):
    cfg = parse_config(args.config)
    for line in cfg.echo_lines():
        print(line)
    if not cfg.data_manifest:
        raise ConfigError("config key data_manifest is required for training")
    pairs = _load_pairs(cfg.data_manifest)
    clean_images = [c for c, _ in pairs]
    psnr_val = train_stage1(clean_images, cfg.model_config(), cfg.train_config(), args.out, on_log=print)
    print(f"stage1 done: ckpt={args.out} holdout_psnr={psnr_val:.4f}")
    return EXIT_OK


def _run_stage2(args, disabled="none"):
    cfg = parse_config(args.config)
    for line in cfg.echo_lines():
        print(line)
    if not cfg.data_manifest:
        raise ConfigError("config key data_manifest is required for training")
    pairs = _load_pairs(cfg.data_manifest)
    out = args.out or f"ablate_{disabled}.ckpt"
    restored_psnr, degraded_psnr = train_stage2(
        pairs, args.stage1, cfg.train_config(), out, disabled=disabled, on_log=print
    )
    print(
        f"stage2 done: ckpt={out} disabled={disabled} "
        f"restored_psnr={restored_psnr:.4f} degraded_psnr={degraded_psnr:.4f} "
        f"gain={restored_psnr - degraded_psnr:.4f}"
    )
    return EXIT_OK


def cmd_train(args):
    return _run_stage2(args, disabled="none")


def cmd_ablate(args):
    return _run_stage2(args, disabled=args.disable)


def _pad_to_multiple(img, factor):
    H, W = img.shape[:2]
    ph = (-H) % factor
    pw = (-W) % factor
    if ph == 0 and pw == 0:
        return img, H, W
    return np.pad(img, ((0, ph), (0, pw), (0, 0)), mode="reflect"), H, W


def cmd_infer(args):
    model = load_stage2_model(args.ckpt)
    img = data.load_ppm(args.input)
    factor = 1 << model.cfg.num_scales
    padded, H, W = _pad_to_multiple(img, factor)
    restored = restore_image(model, padded)[:H, :W]
    data.save_ppm(restored, args.out)
    print(f"infer: wrote {args.out}")
    return EXIT_OK


def cmd_eval(args):
    pairs = _load_pairs(args.manifest)
    in_psnr = float(np.mean([data.psnr(n, c) for c, n in pairs]))
    in_ssim = float(np.mean([data.ssim(n, c) for c, n in pairs]))
    print(f"pairs={len(pairs)}")
    print(f"input_psnr={in_psnr:.4f} input_ssim={in_ssim:.4f}")
    if args.ckpt:
        model = load_stage2_model(args.ckpt)
        restored_psnr, _ = evaluate_restoration(model, [(c, n) for c, n in pairs])
        r_ssim = float(np.mean([data.ssim(restore_image(model, n), c) for c, n in pairs]))
        print(f"restored_psnr={restored_psnr:.4f} restored_ssim={r_ssim:.4f}")
    return EXIT_OK


COMMANDS = {
    "gradcheck": cmd_gradcheck,
    "synth": cmd_synth,
    "train-vqgan": cmd_train_vqgan,
    "train": cmd_train,
    "infer": cmd_infer,
    "eval": cmd_eval,
    "ablate": cmd_ablate,
}


def main(argv=None):
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as e:
        return int(e.code or 0)
    try:
        return COMMANDS[args.command](args)
    except ConfigError as e:
        print(f"config error: {e}", file=sys.stderr)
        return EXIT_USAGE
    except FormatError as e:
        print(f"format error: {e}", file=sys.stderr)
        return EXIT_IO
    except FileNotFoundError as e:
        print(f"i/o error: {e}", file=sys.stderr)
        return EXIT_IO
    except OSError as e:
        print(f"i/o error: {e}", file=sys.stderr)
        return EXIT_IO
    except (ContractError, TrainingDiverged) as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_VERIFY


if __name__ == "__main__":
    sys.exit(main())
