"""Flat key=value run configuration.

One UTF-8 text file drives every command: `#` starts a comment, blank lines
are ignored, keys are validated against the schema below, unknown keys are
rejected with the offending line number. Defaults fill absent keys and the
startup log echoes every effective value with its source.
"""

from dataclasses import dataclass, field

from .data import DegradationRanges
from .errors import ConfigError
from .model import ModelConfig
from .train import TrainConfig


def _parse_int(s):
    return int(s, 0)


def _parse_float(s):
    return float(s)


def _parse_str(s):
    return s


def _parse_int_list(s):
    s = s.strip()
    if not s:
        return ()
    return tuple(int(tok) for tok in s.split(","))


SCHEMA = {
    # model
    "base_channels": (_parse_int, 16),
    "num_scales": (_parse_int, 3),
    "latent_dim": (_parse_int, 64),
    "codebook_size": (_parse_int, 256),
    "aiem_blocks": (_parse_int, 2),
    "dbca_kernel": (_parse_int, 3),
    "curve_splits": (_parse_int, 4),
    "curve_order": (_parse_int, 4),
    # training
    "seed": (_parse_int, 0),
    "lr": (_parse_float, 1e-4),
    "beta1": (_parse_float, 0.9),
    "beta2": (_parse_float, 0.99),
    "adam_eps": (_parse_float, 1e-8),
    "lr_milestones": (_parse_int_list, ()),
    "lr_decay": (_parse_float, 0.5),
    "batch_size": (_parse_int, 4),
    "crop": (_parse_int, 64),
    "stage1_iters": (_parse_int, 3000),
    "stage2_iters": (_parse_int, 3000),
    "commit_beta": (_parse_float, 0.25),
    "lambda_pix": (_parse_float, 1.0),
    "lambda_ca": (_parse_float, 1.0),
    "lambda_per": (_parse_float, 1.0),
    "lambda_adv": (_parse_float, 0.1),
    "log_interval": (_parse_int, 100),
    "holdout": (_parse_int, 20),
    "disc_base": (_parse_int, 16),
    "stage1_adv_start": (_parse_int, 0),
    "reseed_interval": (_parse_int, 0),
    # data
    "data_manifest": (_parse_str, ""),
    # degradation sampling ranges
    "deg_exposure_min": (_parse_float, 0.1),
    "deg_exposure_max": (_parse_float, 0.5),
    "deg_gamma_min": (_parse_float, 1.5),
    "deg_gamma_max": (_parse_float, 3.0),
    "deg_blur_sigma_min": (_parse_float, 1.0),
    "deg_blur_sigma_max": (_parse_float, 3.0),
    "deg_motion_len_min": (_parse_float, 5.0),
    "deg_motion_len_max": (_parse_float, 15.0),
    "deg_motion_prob": (_parse_float, 0.5),
    "deg_noise_min": (_parse_float, 0.005),
    "deg_noise_max": (_parse_float, 0.02),
}


@dataclass
class RunConfig:
    values: dict
    explicit: set = field(default_factory=set)

    def __getattr__(self, key):
        try:
            return self.values[key]
        except KeyError as e:
            raise AttributeError(key) from e

    def model_config(self, disabled="none"):
        return ModelConfig(
            base_channels=self.values["base_channels"],
            num_scales=self.values["num_scales"],
            latent_dim=self.values["latent_dim"],
            codebook_size=self.values["codebook_size"],
            aiem_blocks=self.values["aiem_blocks"],
            dbca_kernel=self.values["dbca_kernel"],
            curve_splits=self.values["curve_splits"],
            curve_order=self.values["curve_order"],
            disabled=disabled,
        )

    def train_config(self):
        v = self.values
        return TrainConfig(
            seed=v["seed"],
            lr=v["lr"],
            beta1=v["beta1"],
            beta2=v["beta2"],
            adam_eps=v["adam_eps"],
            lr_milestones=v["lr_milestones"],
            lr_decay=v["lr_decay"],
            batch_size=v["batch_size"],
            crop=v["crop"],
            stage1_iters=v["stage1_iters"],
            stage2_iters=v["stage2_iters"],
            commit_beta=v["commit_beta"],
            lambda_pix=v["lambda_pix"],
            lambda_ca=v["lambda_ca"],
            lambda_per=v["lambda_per"],
            lambda_adv=v["lambda_adv"],
            log_interval=v["log_interval"],
            holdout=v["holdout"],
            disc_base=v["disc_base"],
            stage1_adv_start=v["stage1_adv_start"],
            reseed_interval=v["reseed_interval"],
        )

    def degradation_ranges(self):
        v = self.values
        return DegradationRanges(
            exposure_min=v["deg_exposure_min"],
            exposure_max=v["deg_exposure_max"],
            gamma_min=v["deg_gamma_min"],
            gamma_max=v["deg_gamma_max"],
            blur_sigma_min=v["deg_blur_sigma_min"],
            blur_sigma_max=v["deg_blur_sigma_max"],
            motion_len_min=v["deg_motion_len_min"],
            motion_len_max=v["deg_motion_len_max"],
            motion_prob=v["deg_motion_prob"],
            noise_min=v["deg_noise_min"],
            noise_max=v["deg_noise_max"],
        )

    def echo_lines(self):
        out = []
        for key in SCHEMA:
            suffix = "" if key in self.explicit else " (default)"
            val = self.values[key]
            if isinstance(val, tuple):
                val = ",".join(str(x) for x in val)
            out.append(f"config {key}={val}{suffix}")
        return out


def parse_config(path):
    values = {k: default for k, (_, default) in SCHEMA.items()}
    explicit = set()
    with open(path, "r", encoding="utf-8") as fh:
        for ln, raw in enumerate(fh, 1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise ConfigError(f"{path}:{ln}: expected key=value, got {raw.strip()!r}")
            key, _, text = line.partition("=")
            key = key.strip()
            text = text.strip()
            if key not in SCHEMA:
                raise ConfigError(f"{path}:{ln}: unknown key {key!r}")
            parser, _ = SCHEMA[key]
            try:
                values[key] = parser(text)
            except ValueError as e:
                raise ConfigError(f"{path}:{ln}: invalid value for key {key!r}: {text!r}") from e
            explicit.add(key)
    return RunConfig(values=values, explicit=explicit)
