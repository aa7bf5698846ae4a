"""Model assembly: encoder, prior decoder, fused main decoder, and losses.

Stage 1 trains `VQGAN` (encoder + codebook + prior decoder) on clean images.
Stage 2 wraps the frozen prior inside `VQCNIR`: a trainable night encoder
with illumination enhancement feeds both the codebook lookup and a second
decoder that fuses the prior decoder's per-scale features through deformable
cross-attention. The frozen stage-1 encoder doubles as the perceptual-loss
feature extractor and as the target-code producer.
"""

from dataclasses import dataclass, field

import numpy as np

from . import ops
from .aiem import AIEM
from .codebook import Codebook, quantize
from .dbca import DBCA
from .errors import ConfigError, ContractError
from .layers import Block, Conv2d, ConvTranspose2d, Identity, ResBlock
from .tensor import Tensor

DISABLE_CHOICES = ("none", "aiem", "dbca", "decoder_d")


@dataclass
class ModelConfig:
    base_channels: int = 16
    num_scales: int = 3
    latent_dim: int = 64
    codebook_size: int = 256
    aiem_blocks: int = 2
    dbca_kernel: int = 3
    curve_splits: int = 4
    curve_order: int = 4
    disabled: str = "none"

    def __post_init__(self):
        if self.num_scales < 2:
            raise ConfigError("num_scales must be >= 2")
        if self.disabled not in DISABLE_CHOICES:
            raise ConfigError(f"disabled must be one of {DISABLE_CHOICES}, got {self.disabled!r}")
        if self.latent_dim % self.curve_splits != 0:
            raise ConfigError(
                f"curve_splits={self.curve_splits} must divide latent_dim={self.latent_dim}"
            )

    def channels(self):
        return [self.base_channels << l for l in range(self.num_scales + 1)]

    def to_text(self):
        keys = [
            "base_channels",
            "num_scales",
            "latent_dim",
            "codebook_size",
            "aiem_blocks",
            "dbca_kernel",
            "curve_splits",
            "curve_order",
            "disabled",
        ]
        return "".join(f"{k}={getattr(self, k)}\n" for k in keys)

    @classmethod
    def from_text(cls, text):
        kwargs = {}
        for line in text.splitlines():
            line = line.strip()
            if not line:
                continue
            k, v = line.split("=", 1)
            kwargs[k] = v if k == "disabled" else int(v)
        return cls(**kwargs)


@dataclass
class LossWeights:
    pix: float = 1.0
    ca: float = 1.0
    per: float = 1.0
    adv: float = 0.1


class Encoder(Block):
    """Conv stem plus stride-2 stages; returns the latent map and the
    per-scale pre-downsample features (used as skips and as the perceptual
    feature stack)."""

    def __init__(self, rng, cfg, in_channels=3):
        cs = cfg.channels()
        self.num_scales = cfg.num_scales
        self.stem = Conv2d(rng, in_channels, cs[0], 3, padding=1)
        self.res = [ResBlock(rng, cs[l]) for l in range(cfg.num_scales)]
        self.down = [Conv2d(rng, cs[l], cs[l + 1], 3, stride=2, padding=1) for l in range(cfg.num_scales)]
        self.deep = ResBlock(rng, cs[-1])
        self.to_latent = Conv2d(rng, cs[-1], cfg.latent_dim, 3, padding=1)

    def __call__(self, x):
        H, W = x.data.shape[2], x.data.shape[3]
        factor = 1 << self.num_scales
        if H % factor or W % factor:
            raise ContractError(
                f"spatial dims {H}x{W} must be divisible by {factor}; pad the input first"
            )
        h = self.stem(x)
        skips = []
        for res, down in zip(self.res, self.down):
            h = res(h)
            skips.append(h)
            h = down(h)
        z = self.to_latent(self.deep(h))
        return z, skips


class PriorDecoder(Block):
    """Mirror decoder from the quantized latent; also exposes the feature
    map at every scale for cross-attention fusion."""

    def __init__(self, rng, cfg):
        cs = cfg.channels()
        S = cfg.num_scales
        self.from_latent = Conv2d(rng, cfg.latent_dim, cs[-1], 3, padding=1)
        self.deep = ResBlock(rng, cs[-1])
        self.up = [ConvTranspose2d(rng, cs[l + 1], cs[l]) for l in reversed(range(S))]
        self.res = [ResBlock(rng, cs[l]) for l in reversed(range(S))]
        self.head = Conv2d(rng, cs[0], 3, 3, padding=1)

    def __call__(self, z):
        h = self.deep(self.from_latent(z))
        feats = [h]
        for up, res in zip(self.up, self.res):
            h = res(up(h))
            feats.append(h)
        return self.head(h), feats


class MainDecoder(Block):
    """Trainable decoder over the night latent: encoder skips join after each
    upsample and a DBCA block fuses the co-resolution prior feature.

    Layers draw from fixed rng splits so the shared weights are identical
    whether or not the fusion blocks are ablated away."""

    def __init__(self, rng, cfg):
        cs = cfg.channels()
        S = cfg.num_scales
        use_dbca = cfg.disabled != "dbca"
        self.from_latent = Conv2d(rng.split(0), cfg.latent_dim, cs[-1], 3, padding=1)
        self.deep = ResBlock(rng.split(1), cs[-1])
        self.up = [ConvTranspose2d(rng.split(10 + i), cs[l + 1], cs[l]) for i, l in enumerate(reversed(range(S)))]
        self.res = [ResBlock(rng.split(40 + i), cs[l]) for i, l in enumerate(reversed(range(S)))]
        levels = [cs[-1]] + [cs[l] for l in reversed(range(S))]
        self.dbca = [
            DBCA(rng.split(70 + i), c, cfg.dbca_kernel) if use_dbca else Identity()
            for i, c in enumerate(levels)
        ]
        self.head = Conv2d(rng.split(99), cs[0], 3, 3, padding=1)

    def __call__(self, z, skips, prior_feats):
        h = self.deep(self.from_latent(z))
        h = self.dbca[0](h, prior_feats[0])
        for i, (up, res) in enumerate(zip(self.up, self.res)):
            h = up(h)
            h = ops.add(h, skips[len(skips) - 1 - i])
            h = res(h)
            h = self.dbca[i + 1](h, prior_feats[i + 1])
        return self.head(h)


class VQGAN(Block):
    """Stage-1 prior: clean-image autoencoder through the codebook."""

    def __init__(self, rng, cfg):
        self.cfg = cfg
        self.encoder = Encoder(rng.split(1), cfg)
        self.codebook = Codebook(cfg.codebook_size, cfg.latent_dim, rng.split(2))
        self.decoder = PriorDecoder(rng.split(3), cfg)

    def encode(self, x):
        z, _ = self.encoder(x)
        return z

    def reconstruct(self, x):
        z, _ = self.encoder(x)
        result = quantize(z, self.codebook)
        rgb, _ = self.decoder(result.quantized)
        return rgb, z, result

    def checkpoint_items(self):
        items = []
        for name, t in self.encoder.named_params("encoder"):
            items.append((name, t.data))
        items.append(("codebook.entries", self.codebook.entries.data))
        for name, t in self.decoder.named_params("decoder_g"):
            items.append((name, t.data))
        return items


class Discriminator(Block):
    """Four stride-2 conv stages emitting a patch logit grid; the final
    layer starts at zero so both hinge terms begin at exactly one."""

    def __init__(self, rng, base=16):
        self.c1 = Conv2d(rng, 3, base, 4, stride=2, padding=1)
        self.c2 = Conv2d(rng, base, base * 2, 4, stride=2, padding=1)
        self.c3 = Conv2d(rng, base * 2, base * 4, 4, stride=2, padding=1)
        self.c4 = Conv2d(rng, base * 4, 1, 4, stride=2, padding=1, zero_init=True)

    def __call__(self, x):
        h = ops.leaky_relu(self.c1(x), 0.2)
        h = ops.leaky_relu(self.c2(h), 0.2)
        h = ops.leaky_relu(self.c3(h), 0.2)
        return self.c4(h)


class VQCNIR(Block):
    """Stage-2 restoration network around a frozen stage-1 prior."""

    def __init__(self, rng, cfg):
        self.cfg = cfg
        self.encoder_hq = Encoder(rng.split(1), cfg)  # frozen stage-1 copy
        self.encoder = Encoder(rng.split(1), cfg)  # night branch, warm-started
        if cfg.disabled == "aiem":
            self.aiem_stack = [Identity()]
        else:
            self.aiem_stack = [
                AIEM(rng.split(10 + i), cfg.latent_dim, cfg.curve_splits, cfg.curve_order)
                for i in range(cfg.aiem_blocks)
            ]
        self.codebook = Codebook(cfg.codebook_size, cfg.latent_dim, rng.split(2))
        self.decoder_g = PriorDecoder(rng.split(3), cfg)
        self.decoder_d = MainDecoder(rng.split(4), cfg)
        self.freeze_prior()

    def freeze_prior(self):
        self.encoder_hq.set_trainable(False)
        self.codebook.set_trainable(False)
        self.decoder_g.set_trainable(False)

    def load_stage1(self, arrays):
        """Copy stage-1 parameters into the frozen prior and warm-start the
        night encoder from the clean encoder."""
        for name, t in self.encoder_hq.named_params("encoder"):
            t.data[...] = arrays[name]
        for name, t in self.encoder.named_params("encoder"):
            t.data[...] = arrays[name]
        self.codebook.entries.data[...] = arrays["codebook.entries"]
        for name, t in self.decoder_g.named_params("decoder_g"):
            t.data[...] = arrays[name]

    def trainable_named_params(self):
        items = self.encoder.named_params("encoder")
        for i, blk in enumerate(self.aiem_stack):
            if isinstance(blk, Block):
                items.extend(blk.named_params(f"aiem.{i}"))
        items.extend(self.decoder_d.named_params("decoder_d"))
        return items

    def enhance(self, x):
        z, skips = self.encoder(x)
        for blk in self.aiem_stack:
            z = blk(z)
        return z, skips

    def __call__(self, x):
        """Restore a night image; returns (restored, night_latent)."""
        z_e, skips = self.enhance(x)
        result = quantize(z_e, self.codebook)
        rgb_g, prior_feats = self.decoder_g(result.quantized)
        if self.cfg.disabled == "decoder_d":
            return rgb_g, z_e
        restored = self.decoder_d(z_e, skips, prior_feats)
        return restored, z_e

    def checkpoint_items(self):
        items = []
        for name, t in self.encoder.named_params("encoder"):
            items.append((name, t.data))
        for i, blk in enumerate(self.aiem_stack):
            if isinstance(blk, Block):
                for name, t in blk.named_params(f"aiem.{i}"):
                    items.append((name, t.data))
        items.append(("codebook.entries", self.codebook.entries.data))
        for name, t in self.decoder_g.named_params("decoder_g"):
            items.append((name, t.data))
        for name, t in self.decoder_d.named_params("decoder_d"):
            items.append((name, t.data))
        return items

    def load_items(self, arrays):
        for name, arr in self.checkpoint_items():
            arr[...] = arrays[name]


# ---------------------------------------------------------------------------
# losses
# ---------------------------------------------------------------------------


def pixel_loss(restored, target):
    """Mean absolute error in the pixel domain."""
    t = target.detach() if isinstance(target, Tensor) else Tensor(target)
    if restored.data.shape != t.data.shape:
        raise ConfigError(f"pixel_loss shapes differ: {restored.data.shape} vs {t.data.shape}")
    return ops.mean_all(ops.abs_(ops.sub(restored, t)))


def perceptual_loss(restored, target, extractor):
    """Sum of per-stage mean L1 distances in the frozen extractor's feature
    space; symmetric in its two image arguments."""
    t = target.detach() if isinstance(target, Tensor) else Tensor(target)
    _, fa = extractor(restored)
    _, fb = extractor(t)
    total = None
    for a, b in zip(fa, fb):
        term = ops.mean_all(ops.abs_(ops.sub(a, b)))
        total = term if total is None else ops.add(total, term)
    return total


def adversarial_loss(disc, restored, target):
    """Hinge GAN losses: (generator_loss, discriminator_loss). The
    discriminator term sees the restored image detached."""
    t = target.detach() if isinstance(target, Tensor) else Tensor(target)
    d_real = disc(t)
    d_fake = disc(restored.detach())
    d_loss = ops.add(
        ops.mean_all(ops.relu(ops.sub(1.0, d_real))),
        ops.mean_all(ops.relu(ops.add(1.0, d_fake))),
    )
    g_loss = ops.neg(ops.mean_all(disc(restored)))
    return g_loss, d_loss


def total_loss(l_pix, l_ca, l_per, l_adv, weights):
    """Weighted sum of the four objectives."""
    out = ops.scale(l_pix, weights.pix)
    out = ops.add(out, ops.scale(l_ca, weights.ca))
    out = ops.add(out, ops.scale(l_per, weights.per))
    out = ops.add(out, ops.scale(l_adv, weights.adv))
    return out
