"""Synthetic paired data, PPM I/O, and distortion metrics.

Images are float64 arrays of shape (H, W, 3) with values in [0, 1]. The
clean-image generator composes smooth gradients, soft-edged shapes and
band-limited noise; the degradation stage models a dark capture: exposure
scaling, gamma, blur (Gaussian or linear motion) and sensor noise.
"""

import math
from dataclasses import dataclass

import numpy as np

from .errors import ConfigError, FormatError, ShapeError
from .rng import Rng

@dataclass
class DegradationRanges:
    """Sampling intervals for the degradation generator."""

    exposure_min: float = 0.1
    exposure_max: float = 0.5
    gamma_min: float = 1.5
    gamma_max: float = 3.0
    blur_sigma_min: float = 1.0
    blur_sigma_max: float = 3.0
    motion_len_min: float = 5.0
    motion_len_max: float = 15.0
    motion_prob: float = 0.5
    noise_min: float = 0.005
    noise_max: float = 0.02

    def __post_init__(self):
        for lo, hi in (
            (self.exposure_min, self.exposure_max),
            (self.gamma_min, self.gamma_max),
            (self.blur_sigma_min, self.blur_sigma_max),
            (self.motion_len_min, self.motion_len_max),
            (self.noise_min, self.noise_max),
        ):
            if lo > hi:
                raise ConfigError(f"degradation range [{lo}, {hi}] is inverted")
        if not (0.0 <= self.motion_prob <= 1.0):
            raise ConfigError(f"motion_prob must lie in [0, 1], got {self.motion_prob}")


# ---------------------------------------------------------------------------
# clean image synthesis
# ---------------------------------------------------------------------------


def _gaussian_kernel1d(sigma):
    radius = max(1, int(math.ceil(3.0 * sigma)))
    xs = np.arange(-radius, radius + 1, dtype=np.float64)
    k = np.exp(-0.5 * (xs / sigma) ** 2)
    return k / k.sum()


def _blur_separable(img, sigma):
    """Gaussian blur with reflect padding, per channel."""
    k = _gaussian_kernel1d(sigma)
    r = len(k) // 2
    out = np.pad(img, ((r, r), (0, 0), (0, 0)), mode="reflect")
    out = sum(out[i : i + img.shape[0]] * k[i] for i in range(len(k)))
    out = np.pad(out, ((0, 0), (r, r), (0, 0)), mode="reflect")
    out = sum(out[:, i : i + img.shape[1]] * k[i] for i in range(len(k)))
    return out


def generate_clean(count, size, seed):
    """Deterministic procedural clean images: gradient base, 2-5 soft shapes,
    plus low-amplitude band-limited texture."""
    images = []
    master = Rng(seed)
    yy, xx = np.meshgrid(np.arange(size), np.arange(size), indexing="ij")
    yn = (yy + 0.5) / size - 0.5
    xn = (xx + 0.5) / size - 0.5
    for i in range(count):
        rng = master.split(i)
        theta = rng.uniform((), 0.0, 2 * np.pi)
        ramp = np.cos(theta) * xn + np.sin(theta) * yn  # [-~0.7, ~0.7]
        t = (ramp - ramp.min()) / max(ramp.max() - ramp.min(), 1e-9)
        c0 = rng.uniform((3,), 0.15, 0.85)
        c1 = rng.uniform((3,), 0.15, 0.85)
        img = c0[None, None, :] + (c1 - c0)[None, None, :] * t[..., None]
        n_shapes = 2 + rng.choice(4)
        for _ in range(n_shapes):
            color = rng.uniform((3,), 0.05, 0.95)
            cy = rng.uniform((), 0.1, 0.9) * size
            cx = rng.uniform((), 0.1, 0.9) * size
            feather = rng.uniform((), 1.0, 3.0)
            if rng.uniform(()) < 0.5:
                radius = rng.uniform((), 0.08, 0.3) * size
                d = np.sqrt((yy + 0.5 - cy) ** 2 + (xx + 0.5 - cx) ** 2)
                alpha = np.clip((radius - d) / feather, 0.0, 1.0)
            else:
                hy = rng.uniform((), 0.06, 0.25) * size
                hx = rng.uniform((), 0.06, 0.25) * size
                dy = np.abs(yy + 0.5 - cy) - hy
                dx = np.abs(xx + 0.5 - cx) - hx
                alpha = np.clip(-np.maximum(dy, dx) / feather, 0.0, 1.0)
            img = img * (1.0 - alpha[..., None]) + color[None, None, :] * alpha[..., None]
        noise = rng.normal((size, size, 3))
        noise = _blur_separable(noise, rng.uniform((), 1.0, 3.0))
        amp = rng.uniform((), 0.02, 0.08)
        peak = max(np.abs(noise).max(), 1e-9)
        img = img + noise * (amp / peak)
        images.append(np.clip(img, 0.0, 1.0))
    return images


# ---------------------------------------------------------------------------
# degradation
# ---------------------------------------------------------------------------


def gaussian_blur_kernel(sigma):
    k1 = _gaussian_kernel1d(sigma)
    k = np.outer(k1, k1)
    return k / k.sum()


def motion_blur_kernel(length, angle):
    """Anti-aliased line kernel of the given pixel length and angle."""
    half = (int(math.ceil(length)) // 2) + 1
    size = 2 * half + 1
    k = np.zeros((size, size))
    steps = max(int(math.ceil(length)) * 4, 8)
    for s in range(steps + 1):
        t = s / steps - 0.5
        y = half + t * length * math.sin(angle)
        x = half + t * length * math.cos(angle)
        y0, x0 = int(math.floor(y)), int(math.floor(x))
        fy, fx = y - y0, x - x0
        for dy in (0, 1):
            for dx in (0, 1):
                yy_, xx_ = y0 + dy, x0 + dx
                if 0 <= yy_ < size and 0 <= xx_ < size:
                    wy = fy if dy else 1.0 - fy
                    wx = fx if dx else 1.0 - fx
                    k[yy_, xx_] += wy * wx
    return k / k.sum()


@dataclass
class DegradationParams:
    """One sampled degradation: y = clip(blur(s * x^gamma) + noise)."""

    exposure: float
    gamma: float
    kernel: np.ndarray
    noise_sigma: float
    seed: int

    @classmethod
    def sample(cls, rng, seed, ranges=None):
        """Draw parameters from the configured ranges (enforced here)."""
        r = ranges or DegradationRanges()
        exposure = rng.uniform((), r.exposure_min, r.exposure_max)
        gamma = rng.uniform((), r.gamma_min, r.gamma_max)
        if rng.uniform(()) < r.motion_prob:
            length = rng.uniform((), r.motion_len_min, r.motion_len_max)
            kernel = motion_blur_kernel(length, rng.uniform((), 0.0, np.pi))
        else:
            kernel = gaussian_blur_kernel(rng.uniform((), r.blur_sigma_min, r.blur_sigma_max))
        noise_sigma = rng.uniform((), r.noise_min, r.noise_max)
        params = cls(exposure=exposure, gamma=gamma, kernel=kernel, noise_sigma=noise_sigma, seed=seed)
        params.validate(r)
        return params

    def validate(self, ranges=None):
        r = ranges or DegradationRanges()
        if not (r.exposure_min <= self.exposure <= r.exposure_max):
            raise ConfigError(f"exposure {self.exposure} outside [{r.exposure_min}, {r.exposure_max}]")
        if not (r.gamma_min <= self.gamma <= r.gamma_max):
            raise ConfigError(f"gamma {self.gamma} outside [{r.gamma_min}, {r.gamma_max}]")
        if not (r.noise_min <= self.noise_sigma <= r.noise_max):
            raise ConfigError(f"noise_sigma {self.noise_sigma} outside [{r.noise_min}, {r.noise_max}]")
        if abs(self.kernel.sum() - 1.0) > 1e-12:
            raise ConfigError("blur kernel must be normalized to sum 1")


def _convolve_reflect(img, kernel):
    kh, kw = kernel.shape
    ry, rx = kh // 2, kw // 2
    padded = np.pad(img, ((ry, ry), (rx, rx), (0, 0)), mode="reflect")
    out = np.zeros_like(img)
    for i in range(kh):
        for j in range(kw):
            out += kernel[i, j] * padded[i : i + img.shape[0], j : j + img.shape[1]]
    return out


def degrade(clean, params):
    """Apply dark-capture degradation; deterministic in params.seed."""
    dark = params.exposure * np.power(clean, params.gamma)
    blurred = _convolve_reflect(dark, params.kernel)
    noise = Rng(params.seed).normal(clean.shape, 0.0, params.noise_sigma)
    return np.clip(blurred + noise, 0.0, 1.0)


# ---------------------------------------------------------------------------
# PPM (P6) I/O
# ---------------------------------------------------------------------------


def save_ppm(image, path):
    """Binary P6, maxval 255; v -> round(v*255) clamped."""
    arr = np.asarray(image, dtype=np.float64)
    if arr.ndim != 3 or arr.shape[2] != 3:
        raise ShapeError(f"image must be (H, W, 3), got {arr.shape}")
    h, w = arr.shape[:2]
    payload = np.clip(np.rint(arr * 255.0), 0, 255).astype(np.uint8)
    with open(path, "wb") as fh:
        fh.write(f"P6\n{w} {h}\n255\n".encode("ascii"))
        fh.write(payload.tobytes())


class _PPMScanner:
    def __init__(self, blob, path):
        self.blob = blob
        self.pos = 0
        self.path = path

    def error(self, msg):
        raise FormatError(f"{self.path}: {msg} at byte offset {self.pos}")

    def token(self, what):
        # skip whitespace and # comments
        while self.pos < len(self.blob):
            c = self.blob[self.pos : self.pos + 1]
            if c.isspace():
                self.pos += 1
            elif c == b"#":
                while self.pos < len(self.blob) and self.blob[self.pos : self.pos + 1] != b"\n":
                    self.pos += 1
            else:
                break
        start = self.pos
        while self.pos < len(self.blob) and not self.blob[self.pos : self.pos + 1].isspace():
            self.pos += 1
        if start == self.pos:
            self.error(f"missing {what}")
        return self.blob[start : self.pos]


def load_ppm(path):
    """Load a binary P6 file; byte b maps to exactly b/255."""
    with open(path, "rb") as fh:
        blob = fh.read()
    sc = _PPMScanner(blob, str(path))
    magic = sc.token("magic")
    if magic != b"P6":
        raise FormatError(f"{path}: bad magic {magic!r} at byte offset 0, expected b'P6'")
    try:
        w = int(sc.token("width"))
        h = int(sc.token("height"))
        maxval = int(sc.token("maxval"))
    except ValueError:
        sc.error("non-numeric header field")
    if w < 1 or h < 1:
        sc.error(f"invalid dimensions {w}x{h}")
    if maxval != 255:
        sc.error(f"unsupported maxval {maxval}, expected 255")
    sc.pos += 1  # single whitespace byte after maxval
    need = w * h * 3
    if len(blob) - sc.pos < need:
        sc.error(f"payload truncated, need {need} bytes")
    raw = np.frombuffer(blob[sc.pos : sc.pos + need], dtype=np.uint8)
    return raw.reshape(h, w, 3).astype(np.float64) / 255.0


def write_manifest(path, records):
    """records: iterable of (clean_path, degraded_path, seed)."""
    with open(path, "w", encoding="utf-8") as fh:
        for clean, degraded, seed in records:
            fh.write(f"{clean}\t{degraded}\t{seed}\n")


def read_manifest(path):
    records = []
    with open(path, "r", encoding="utf-8") as fh:
        for ln, line in enumerate(fh, 1):
            line = line.rstrip("\n")
            if not line:
                continue
            parts = line.split("\t")
            if len(parts) != 3:
                raise FormatError(f"{path}:{ln}: expected 3 tab-separated fields, got {len(parts)}")
            records.append((parts[0], parts[1], int(parts[2])))
    return records


# ---------------------------------------------------------------------------
# metrics
# ---------------------------------------------------------------------------

PSNR_CAP = 99.0


def psnr(a, b):
    """Peak signal-to-noise ratio in dB on [0,1] images; identical images
    report the 99.0 sentinel."""
    if a.shape != b.shape:
        raise ShapeError(f"psnr shapes differ: {a.shape} vs {b.shape}")
    mse = float(np.mean((a - b) ** 2))
    if mse == 0.0:
        return PSNR_CAP
    return min(10.0 * math.log10(1.0 / mse), PSNR_CAP)


def _luma(img):
    return 0.299 * img[..., 0] + 0.587 * img[..., 1] + 0.114 * img[..., 2]


def _window_mean(img, kernel):
    kh, kw = kernel.shape
    H, W = img.shape
    out = np.zeros((H - kh + 1, W - kw + 1))
    for i in range(kh):
        for j in range(kw):
            out += kernel[i, j] * img[i : i + H - kh + 1, j : j + W - kw + 1]
    return out


def ssim(a, b, window=11, sigma=1.5, k1=0.01, k2=0.03):
    """Single-scale SSIM on luma, Gaussian window, valid positions only."""
    if a.shape != b.shape:
        raise ShapeError(f"ssim shapes differ: {a.shape} vs {b.shape}")
    if a.shape[0] < window or a.shape[1] < window:
        raise ShapeError(f"image {a.shape[:2]} smaller than the {window}x{window} window")
    ya, yb = _luma(a), _luma(b)
    k1d = np.exp(-0.5 * ((np.arange(window) - window // 2) / sigma) ** 2)
    k = np.outer(k1d, k1d)
    k /= k.sum()
    mu_a = _window_mean(ya, k)
    mu_b = _window_mean(yb, k)
    var_a = _window_mean(ya * ya, k) - mu_a**2
    var_b = _window_mean(yb * yb, k) - mu_b**2
    cov = _window_mean(ya * yb, k) - mu_a * mu_b
    c1 = k1**2
    c2 = k2**2
    num = (2 * mu_a * mu_b + c1) * (2 * cov + c2)
    den = (mu_a**2 + mu_b**2 + c1) * (var_a + var_b + c2)
    return float(np.mean(num / den))
