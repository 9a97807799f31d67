"""Run configuration: strict YAML schema shared by every CLI command.

Unknown keys anywhere in the file are errors — a silently ignored typo in
an ablation grid is far more expensive than a hard failure at startup.
All seeds are explicit; nothing is seeded from the clock.
"""

from __future__ import annotations

from dataclasses import dataclass, fields as dc_fields
from pathlib import Path
from typing import Any

import yaml

from .denoiser import ReferenceUNetConfig
from .detect import InaadConfig
from .diffusion import TrainConfig
from .metrics import SsimParams
from .noise import PyramidParams, SimplexParams, make_sampler
from .schedule import NoiseSchedule, linear_schedule
from .synthdata import PhantomParams, SplitCounts

__all__ = ["ConfigError", "RunConfig", "load_run_config"]


class ConfigError(ValueError):
    pass


_NOISE_KINDS = ("gaussian", "pyramid", "simplex")

# Schema nodes: {"key": (type-or-subschema, default)}. A default of
# _REQUIRED marks a mandatory key. Lists declare their element type.
_REQUIRED = object()

_SCHEMA: dict[str, Any] = {
    "seed": (int, _REQUIRED),
    "output_dir": (str, "runs"),
    "schedule": ({
        "steps": (int, 500),
        "beta_start": (float, 1e-4),
        "beta_end": (float, 0.02),
    }, None),
    "noise": ({
        "train_kind": (_NOISE_KINDS, "gaussian"),
        "corruption_kind": (_NOISE_KINDS, "gaussian"),
        "pyramid": ({
            "levels": (int, 10),
            "scale": (float, 0.8),
        }, None),
        "simplex": ({
            "start_frequency": (float, 2.0 ** -6),
            "octaves": (int, 6),
            "decay": (float, 0.8),
        }, None),
    }, None),
    "denoiser": ({
        "base_channels": (int, 64),
        "channel_mults": ([int], [1, 2, 4]),
        "blocks_per_level": (int, 2),
        "time_embed_dim": (int, 256),
        "attention": (bool, False),
    }, None),
    "train": ({
        "iterations": (int, 20000),
        "batch_size": (int, 16),
        "learning_rate": (float, 1e-4),
        "grad_clip": (float, 1.0),
        "checkpoint_every": (int, 1000),
        "ema_decay": (float, None),
        "image_size": (int, 64),
    }, None),
    "inaad": ({
        "noise_levels": ([int], [75, 100, 150, 200, 250]),
        "inpainting": (bool, True),
        "metric": (str, "ssim"),
        "ssim_window": (int, 7),
        "ssim_gaussian_window": (bool, False),
        "ssim_scope": (("full", "region"), "full"),
        "reverse_noise_scale": (float, 1.0),
        "corruption_noise_scale": (float, 1.0),
    }, None),
    "data": ({
        "dir": (str, "data"),
        "counts": ({
            "train_id": (int, 2000),
            "val_id": (int, 100),
            "test_id": (int, 100),
            "val_ood": (int, 100),
            "test_ood": (int, 100),
        }, None),
        "phantom": ("phantom", None),
    }, None),
}


def _type_name(spec) -> str:
    if isinstance(spec, tuple):
        return "one of " + ", ".join(repr(v) for v in spec)
    if isinstance(spec, list):
        return f"list of {spec[0].__name__}"
    return spec.__name__


def _coerce(value, spec, path: str):
    if isinstance(spec, tuple):  # enum of literals
        if value not in spec:
            raise ConfigError(f"{path}: expected {_type_name(spec)}, got {value!r}")
        return value
    if isinstance(spec, list):
        if not isinstance(value, list):
            raise ConfigError(f"{path}: expected a list, got {type(value).__name__}")
        return [_coerce(v, spec[0], f"{path}[{i}]") for i, v in enumerate(value)]
    if spec is bool:
        if not isinstance(value, bool):
            raise ConfigError(f"{path}: expected bool, got {value!r}")
        return value
    if spec is int:
        if isinstance(value, bool) or not isinstance(value, int):
            raise ConfigError(f"{path}: expected int, got {value!r}")
        return value
    if spec is float:
        if isinstance(value, bool) or not isinstance(value, (int, float)):
            raise ConfigError(f"{path}: expected number, got {value!r}")
        return float(value)
    if spec is str:
        if not isinstance(value, str):
            raise ConfigError(f"{path}: expected string, got {value!r}")
        return value
    raise AssertionError(f"bad schema node at {path}")


_PHANTOM_FIELDS = {f.name: f for f in dc_fields(PhantomParams)}


def _coerce_phantom(value, path: str) -> dict:
    if not isinstance(value, dict):
        raise ConfigError(f"{path}: expected a mapping of phantom parameters")
    out = {}
    for key, v in value.items():
        if key not in _PHANTOM_FIELDS:
            raise ConfigError(f"{path}.{key}: unknown phantom parameter")
        if key == "side":
            out[key] = _coerce(v, int, f"{path}.{key}")
        elif isinstance(v, list):
            pair = _coerce(v, [float], f"{path}.{key}")
            if len(pair) != 2:
                raise ConfigError(f"{path}.{key}: expected a [low, high] pair")
            out[key] = tuple(pair)
        else:
            out[key] = _coerce(v, float, f"{path}.{key}")
    return out


def _validate(raw: dict, schema: dict, path: str = "") -> dict:
    if not isinstance(raw, dict):
        raise ConfigError(f"{path or 'config'}: expected a mapping")
    unknown = set(raw) - set(schema)
    if unknown:
        where = f"{path}." if path else ""
        raise ConfigError(f"unknown key '{where}{sorted(unknown)[0]}'")
    out: dict = {}
    for key, (spec, default) in schema.items():
        here = f"{path}.{key}" if path else key
        if key not in raw or raw[key] is None:
            if default is _REQUIRED:
                raise ConfigError(f"missing required key {here!r}")
            if isinstance(spec, dict):
                out[key] = _validate({}, spec, here)
            elif spec == "phantom":
                out[key] = {}
            else:
                out[key] = default
            continue
        if isinstance(spec, dict):
            out[key] = _validate(raw[key], spec, here)
        elif spec == "phantom":
            out[key] = _coerce_phantom(raw[key], here)
        else:
            out[key] = _coerce(raw[key], spec, here)
    return out


@dataclass(frozen=True)
class RunConfig:
    """Validated run configuration with library-object accessors."""

    raw: dict
    base_dir: Path

    @property
    def seed(self) -> int:
        return self.raw["seed"]

    @property
    def output_dir(self) -> Path:
        return self._resolve(self.raw["output_dir"])

    def _resolve(self, p: str) -> Path:
        path = Path(p)
        return path if path.is_absolute() else self.base_dir / path

    @property
    def data_dir(self) -> Path:
        return self._resolve(self.raw["data"]["dir"])

    @property
    def image_size(self) -> int:
        return self.raw["train"]["image_size"]

    def schedule(self) -> NoiseSchedule:
        s = self.raw["schedule"]
        return linear_schedule(s["steps"], s["beta_start"], s["beta_end"])

    def pyramid_params(self) -> PyramidParams:
        return PyramidParams(**self.raw["noise"]["pyramid"])

    def simplex_params(self) -> SimplexParams:
        return SimplexParams(**self.raw["noise"]["simplex"])

    def train_sampler(self):
        return make_sampler(self.raw["noise"]["train_kind"],
                            pyramid=self.pyramid_params(),
                            simplex=self.simplex_params())

    @property
    def train_noise_kind(self) -> str:
        return self.raw["noise"]["train_kind"]

    def denoiser_config(self) -> ReferenceUNetConfig:
        d = self.raw["denoiser"]
        return ReferenceUNetConfig(
            base_channels=d["base_channels"],
            channel_mults=tuple(d["channel_mults"]),
            blocks_per_level=d["blocks_per_level"],
            time_embed_dim=d["time_embed_dim"],
            attention=d["attention"],
        )

    def train_config(self, seed: int, deterministic: bool = False,
                     start_iteration: int = 0, **overrides) -> TrainConfig:
        t = self.raw["train"]
        kwargs = dict(
            iterations=t["iterations"],
            batch_size=t["batch_size"],
            learning_rate=t["learning_rate"],
            grad_clip=t["grad_clip"],
            checkpoint_every=t["checkpoint_every"],
            ema_decay=t["ema_decay"],
            seed=seed,
            deterministic=deterministic,
            start_iteration=start_iteration,
        )
        kwargs.update(overrides)
        return TrainConfig(**kwargs)

    def inaad_config(self) -> InaadConfig:
        c = self.raw["inaad"]
        return InaadConfig(
            noise_levels=tuple(c["noise_levels"]),
            corruption=self.raw["noise"]["corruption_kind"],
            pyramid=self.pyramid_params(),
            simplex=self.simplex_params(),
            inpainting=c["inpainting"],
            metric=c["metric"],
            ssim_params=SsimParams(window=c["ssim_window"],
                                   gaussian_window=c["ssim_gaussian_window"]),
            ssim_scope=c["ssim_scope"],
            reverse_noise_scale=c["reverse_noise_scale"],
            corruption_noise_scale=c["corruption_noise_scale"],
        )

    def phantom_params(self) -> PhantomParams:
        return PhantomParams(**self.raw["data"]["phantom"])

    def split_counts(self) -> SplitCounts:
        return SplitCounts(**self.raw["data"]["counts"])


def load_run_config(path: str | Path) -> RunConfig:
    path = Path(path)
    if not path.is_file():
        raise ConfigError(f"config file not found: {path}")
    try:
        with open(path) as fh:
            raw = yaml.safe_load(fh)
    except yaml.YAMLError as exc:
        raise ConfigError(f"invalid YAML in {path}: {exc}") from exc
    if raw is None:
        raw = {}
    validated = _validate(raw, _SCHEMA)
    return RunConfig(raw=validated, base_dir=path.resolve().parent)
