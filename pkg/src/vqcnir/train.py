"""Two-stage training: codebook prior learning, then restoration training.

Both loops are deterministic given (config, seed): batch sampling and
augmentation draw from per-iteration child generators, the optimizer is
plain bias-corrected Adam, and kernels run single-threaded per tape. Each
run writes a checkpoint plus a metrics log with one line per interval:

    iter=<n> loss=<f> l_pix=<f> l_ca=<f> l_per=<f> l_adv=<f> lr=<f> psnr_val=<f>
"""

from dataclasses import dataclass, field, replace

import numpy as np

from . import checkpoint, ops
from .codebook import code_alignment_loss, codebook_learning_loss, quantize, straight_through_latent
from .data import psnr
from .errors import ConfigError, TrainingDiverged
from .model import (
    Discriminator,
    LossWeights,
    ModelConfig,
    VQCNIR,
    VQGAN,
    adversarial_loss,
    perceptual_loss,
    pixel_loss,
    total_loss,
)
from .rng import Rng
from .tensor import Tape, Tensor, backward


@dataclass
class TrainConfig:
    seed: int = 0
    lr: float = 1e-4
    beta1: float = 0.9
    beta2: float = 0.99
    adam_eps: float = 1e-8
    lr_milestones: tuple = ()
    lr_decay: float = 0.5
    batch_size: int = 4
    crop: int = 64
    stage1_iters: int = 3000
    stage2_iters: int = 3000
    commit_beta: float = 0.25
    lambda_pix: float = 1.0
    lambda_ca: float = 1.0
    lambda_per: float = 1.0
    lambda_adv: float = 0.1
    log_interval: int = 100
    holdout: int = 20
    disc_base: int = 16
    stage1_adv_start: int = 0  # 0 disables the stage-1 adversarial term
    reseed_interval: int = 0  # 0 means one pass over the training set

    def __post_init__(self):
        ms = tuple(self.lr_milestones)
        if any(b <= a for a, b in zip(ms, ms[1:])):
            raise ConfigError(f"lr_milestones must be strictly increasing, got {ms}")
        if not (0.0 < self.lr_decay < 1.0):
            raise ConfigError(f"lr_decay must lie in (0, 1), got {self.lr_decay}")
        self.lr_milestones = ms

    def weights(self):
        return LossWeights(self.lambda_pix, self.lambda_ca, self.lambda_per, self.lambda_adv)


def multistep_lr(iteration, base_lr, milestones, decay):
    """base_lr scaled by decay once per milestone already reached."""
    hits = sum(1 for m in milestones if m <= iteration)
    return base_lr * (decay**hits)


class Adam:
    """Bias-corrected Adam over a list of (name, Tensor) parameters."""

    def __init__(self, named_params, beta1=0.9, beta2=0.99, eps=1e-8):
        self.params = list(named_params)
        self.beta1 = beta1
        self.beta2 = beta2
        self.eps = eps
        self.t = 0
        self.m = {name: np.zeros_like(p.data) for name, p in self.params}
        self.v = {name: np.zeros_like(p.data) for name, p in self.params}

    def zero_grad(self):
        for _, p in self.params:
            p.grad = None

    def step(self, lr):
        self.t += 1
        c1 = 1.0 - self.beta1**self.t
        c2 = 1.0 - self.beta2**self.t
        # overflow saturates to inf and surfaces via the trainer's finite check
        with np.errstate(over="ignore", invalid="ignore"):
            for name, p in self.params:
                g = p.grad if p.grad is not None else 0.0
                m = self.m[name] = self.beta1 * self.m[name] + (1.0 - self.beta1) * g
                v = self.v[name] = self.beta2 * self.v[name] + (1.0 - self.beta2) * (
                    g * g if isinstance(g, np.ndarray) else 0.0
                )
                p.data -= lr * (m / c1) / (np.sqrt(v / c2) + self.eps)


# ---------------------------------------------------------------------------
# data plumbing
# ---------------------------------------------------------------------------


def to_chw(image):
    return np.ascontiguousarray(image.transpose(2, 0, 1))


def _augment(images_chw, crop, rng):
    """One crop/flip/rotation draw applied to every co-registered image."""
    H, W = images_chw[0].shape[1], images_chw[0].shape[2]
    i = rng.choice(H - crop + 1) if H > crop else 0
    j = rng.choice(W - crop + 1) if W > crop else 0
    k = rng.choice(4)
    flip = rng.choice(2)
    out = []
    for img in images_chw:
        v = img[:, i : i + crop, j : j + crop]
        v = np.rot90(v, k, axes=(1, 2))
        if flip:
            v = v[:, :, ::-1]
        out.append(np.ascontiguousarray(v))
    return out


def _split_holdout(items, holdout):
    if holdout >= len(items):
        raise ConfigError(f"holdout {holdout} must be smaller than the dataset size {len(items)}")
    return items[:-holdout], items[-holdout:]


def _log_line(it, loss, l_pix, l_ca, l_per, l_adv, lr, psnr_val):
    return (
        f"iter={it} loss={loss:.6f} l_pix={l_pix:.6f} l_ca={l_ca:.6f} "
        f"l_per={l_per:.6f} l_adv={l_adv:.6f} lr={lr:.6f} psnr_val={psnr_val:.4f}"
    )


def _check_finite(value, it):
    if not np.isfinite(value):
        raise TrainingDiverged(f"loss became {value} at iteration {it}")


# ---------------------------------------------------------------------------
# stage 1: codebook prior
# ---------------------------------------------------------------------------


def evaluate_reconstruction(model, images):
    """Mean PSNR of clipped codebook reconstructions on full-size images."""
    scores = []
    for img in images:
        x = Tensor(to_chw(img)[None])
        rgb, _, _ = model.reconstruct(x)
        out = np.clip(rgb.data[0].transpose(1, 2, 0), 0.0, 1.0)
        scores.append(psnr(out, img))
    return float(np.mean(scores))


def train_stage1(clean_images, model_cfg, tcfg, out_path, on_log=None):
    """Learn encoder, codebook and prior decoder on clean images."""
    master = Rng(tcfg.seed)
    model = VQGAN(master.split(1), model_cfg)
    disc = Discriminator(master.split(3), tcfg.disc_base) if tcfg.stage1_adv_start else None
    train_imgs, val_imgs = _split_holdout([to_chw(im) for im in clean_images], tcfg.holdout)
    val_hwc = [im.transpose(1, 2, 0) for im in val_imgs]
    opt = Adam(model.named_params(), tcfg.beta1, tcfg.beta2, tcfg.adam_eps)
    opt_d = Adam(disc.named_params("disc"), tcfg.beta1, tcfg.beta2, tcfg.adam_eps) if disc else None
    reseed_every = tcfg.reseed_interval or max(1, len(train_imgs) // tcfg.batch_size)
    used = np.zeros(model.codebook.size, dtype=bool)
    lines = []
    psnr_val = 0.0
    for it in range(1, tcfg.stage1_iters + 1):
        rng_it = master.split(1_000_000 + it)
        lr = multistep_lr(it, tcfg.lr, tcfg.lr_milestones, tcfg.lr_decay)
        idx = rng_it.integers(tcfg.batch_size, len(train_imgs))
        batch = np.stack([_augment([train_imgs[i]], tcfg.crop, rng_it)[0] for i in idx])
        with Tape():
            x = Tensor(batch)
            z, _ = model.encoder(x)
            result = quantize(z, model.codebook)
            used[np.unique(result.indices)] = True
            recon, _ = model.decoder(straight_through_latent(z, result))
            l_pix = pixel_loss(recon, x)
            l_vq = codebook_learning_loss(z, model.codebook, result, tcfg.commit_beta)
            loss = ops.add(l_pix, l_vq)
            l_adv_val = 0.0
            if disc is not None and it >= tcfg.stage1_adv_start:
                g_adv, d_loss = adversarial_loss(disc, recon, x)
                loss = ops.add(loss, ops.scale(g_adv, tcfg.lambda_adv))
                l_adv_val = g_adv.item()
            _check_finite(loss.item(), it)
            opt.zero_grad()
            backward(loss)
            opt.step(lr)
            if disc is not None and it >= tcfg.stage1_adv_start:
                opt_d.zero_grad()
                backward(d_loss)
                opt_d.step(lr)
        if it % reseed_every == 0:
            dead = ~used
            if dead.any():
                vecs = z.data.transpose(0, 2, 3, 1).reshape(-1, model.codebook.dim)
                pick = rng_it.integers(int(dead.sum()), vecs.shape[0])
                model.codebook.entries.data[dead] = vecs[pick]
            used[:] = False
        if it % tcfg.log_interval == 0 or it == tcfg.stage1_iters:
            psnr_val = evaluate_reconstruction(model, val_hwc)
            line = _log_line(it, loss.item(), l_pix.item(), 0.0, 0.0, l_adv_val, lr, psnr_val)
            lines.append(line)
            if on_log:
                on_log(line)
    checkpoint.save(out_path, model.checkpoint_items(), model_cfg.to_text())
    with open(f"{out_path}.log", "w", encoding="utf-8") as fh:
        fh.write("\n".join(lines) + "\n")
    return psnr_val


# ---------------------------------------------------------------------------
# stage 2: restoration
# ---------------------------------------------------------------------------


def build_stage2_model(stage1_path, seed, disabled="none"):
    cfg_text, arrays = checkpoint.load(stage1_path)
    cfg = replace(ModelConfig.from_text(cfg_text), disabled=disabled)
    model = VQCNIR(Rng(seed).split(2), cfg)
    model.load_stage1(arrays)
    model.freeze_prior()
    return model


def load_stage2_model(path):
    cfg_text, arrays = checkpoint.load(path)
    cfg = ModelConfig.from_text(cfg_text)
    model = VQCNIR(Rng(0).split(2), cfg)
    model.load_items(arrays)
    model.freeze_prior()
    return model


def restore_image(model, image):
    """Full-image inference; returns the clipped restored image (H, W, 3)."""
    x = Tensor(to_chw(image)[None])
    restored, _ = model(x)
    return np.clip(restored.data[0].transpose(1, 2, 0), 0.0, 1.0)


def evaluate_restoration(model, pairs):
    """(mean restored-vs-clean PSNR, mean degraded-vs-clean PSNR)."""
    rs, ds = [], []
    for clean, degraded in pairs:
        out = restore_image(model, degraded)
        rs.append(psnr(out, clean))
        ds.append(psnr(degraded, clean))
    return float(np.mean(rs)), float(np.mean(ds))


def _frozen_snapshot(model):
    return (
        model.codebook.entries.data.tobytes(),
        b"".join(t.data.tobytes() for _, t in model.decoder_g.named_params("decoder_g")),
    )


def train_stage2(pairs, stage1_path, tcfg, out_path, disabled="none", on_log=None):
    """Train the night branch against frozen prior components.

    `pairs` is a list of (clean, degraded) images. Returns (restored PSNR,
    degraded PSNR) on the holdout split.
    """
    master = Rng(tcfg.seed)
    model = build_stage2_model(stage1_path, tcfg.seed, disabled)
    disc = Discriminator(master.split(3), tcfg.disc_base)
    train_pairs, val_pairs = _split_holdout(
        [(to_chw(c), to_chw(d)) for c, d in pairs], tcfg.holdout
    )
    val_hwc = [(c.transpose(1, 2, 0), d.transpose(1, 2, 0)) for c, d in val_pairs]
    opt_g = Adam(model.trainable_named_params(), tcfg.beta1, tcfg.beta2, tcfg.adam_eps)
    opt_d = Adam(disc.named_params("disc"), tcfg.beta1, tcfg.beta2, tcfg.adam_eps)
    weights = tcfg.weights()
    frozen_before = _frozen_snapshot(model)
    lines = []
    result = (0.0, 0.0)
    for it in range(1, tcfg.stage2_iters + 1):
        rng_it = master.split(2_000_000 + it)
        lr = multistep_lr(it, tcfg.lr, tcfg.lr_milestones, tcfg.lr_decay)
        idx = rng_it.integers(tcfg.batch_size, len(train_pairs))
        cs, ds = [], []
        for i in idx:
            c, d = _augment(list(train_pairs[i]), tcfg.crop, rng_it)
            cs.append(c)
            ds.append(d)
        gt = Tensor(np.stack(cs))
        night = Tensor(np.stack(ds))
        with Tape():
            restored, z_e = model(night)
            z_gt, _ = model.encoder_hq(gt)
            l_pix = pixel_loss(restored, gt)
            l_ca = code_alignment_loss(z_e, z_gt)
            l_per = perceptual_loss(restored, gt, model.encoder_hq)
            g_adv, d_loss = adversarial_loss(disc, restored, gt)
            loss = total_loss(l_pix, l_ca, l_per, g_adv, weights)
            _check_finite(loss.item(), it)
            opt_g.zero_grad()
            backward(loss)
            opt_g.step(lr)
            opt_d.zero_grad()
            backward(d_loss)
            opt_d.step(lr)
        if it % tcfg.log_interval == 0 or it == tcfg.stage2_iters:
            if _frozen_snapshot(model) != frozen_before:
                raise TrainingDiverged(f"frozen prior parameters changed by iteration {it}")
            result = evaluate_restoration(model, val_hwc)
            line = _log_line(
                it, loss.item(), l_pix.item(), l_ca.item(), l_per.item(), g_adv.item(), lr, result[0]
            )
            lines.append(line)
            if on_log:
                on_log(line)
    checkpoint.save(out_path, model.checkpoint_items(), model.cfg.to_text())
    with open(f"{out_path}.log", "w", encoding="utf-8") as fh:
        fh.write("\n".join(lines) + "\n")
    return result
