"""Noise-prediction interface and its implementations.

A denoiser maps (noisy image x_t, step t) to a prediction of the noise
field that produced x_t. Two exact oracles support testing — one that
always predicts zero and one that inverts the forward corruption for a
known clean image — plus a small trainable convolutional network for real
runs (torch-backed; torch is imported only when a network is built).
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Protocol, runtime_checkable

import numpy as np

__all__ = [
    "Denoiser",
    "ReferenceUNetConfig",
    "zero_denoiser",
    "planted_denoiser",
    "build_unet",
]


@runtime_checkable
class Denoiser(Protocol):
    def predict(self, x: np.ndarray, t) -> np.ndarray:
        """Predict the noise in ``x`` at step ``t``.

        ``x`` may be a single image (H, W) or a batch (N, H, W); ``t`` is a
        single step index or one per batch item. The output matches the
        input shape and is finite everywhere.
        """
        ...


class _ZeroDenoiser:
    """Predicts no noise anywhere; test fixture."""

    def predict(self, x: np.ndarray, t) -> np.ndarray:
        return np.zeros_like(np.asarray(x, dtype=np.float64))


def zero_denoiser() -> _ZeroDenoiser:
    return _ZeroDenoiser()


class _PlantedDenoiser:
    """Oracle that knows the clean image and inverts the forward corruption.

    For input x_t it returns (x_t - sqrt(abar_t) * x0) / sqrt(1 - abar_t),
    the unique noise field consistent with x_t under the single-jump
    corruption of x0 at step t.
    """

    def __init__(self, x0: np.ndarray, schedule):
        self._x0 = np.asarray(x0, dtype=np.float64)
        self._schedule = schedule

    def predict(self, x: np.ndarray, t) -> np.ndarray:
        x = np.asarray(x, dtype=np.float64)
        t_arr = np.atleast_1d(np.asarray(t, dtype=np.int64))
        if np.any(t_arr == 0):
            raise ValueError("no noise is implied at t=0")
        abar = np.array([self._schedule.alpha_bar(int(ti)) for ti in t_arr])
        if x.ndim == 2:
            abar = abar[0]
        else:
            abar = abar.reshape(-1, *([1] * (x.ndim - 1)))
        return (x - np.sqrt(abar) * self._x0) / np.sqrt(1.0 - abar)


def planted_denoiser(x0: np.ndarray, schedule) -> _PlantedDenoiser:
    return _PlantedDenoiser(x0, schedule)


@dataclass(frozen=True)
class ReferenceUNetConfig:
    """Hyperparameters of the trainable denoising network.

    The defaults define the reference configuration used for calibrated
    acceptance runs at 64x64; smaller variants are useful on constrained
    hardware. Images must have a side divisible by 2**(levels - 1).
    """

    base_channels: int = 64
    channel_mults: tuple[int, ...] = (1, 2, 4)
    blocks_per_level: int = 2
    time_embed_dim: int = 256
    attention: bool = False

    def __post_init__(self):
        if self.base_channels < 1 or self.blocks_per_level < 1:
            raise ValueError("base_channels and blocks_per_level must be >= 1")
        if not self.channel_mults or any(m < 1 for m in self.channel_mults):
            raise ValueError("channel_mults must be non-empty positive ints")
        if self.time_embed_dim < 2 or self.time_embed_dim % 2:
            raise ValueError("time_embed_dim must be a positive even number")
        object.__setattr__(self, "channel_mults", tuple(self.channel_mults))

    @property
    def levels(self) -> int:
        return len(self.channel_mults)

    def check_image_side(self, side: int) -> None:
        factor = 2 ** (self.levels - 1)
        if side % factor:
            raise ValueError(
                f"image side {side} not divisible by {factor} "
                f"(network has {self.levels} resolution levels)"
            )


def build_unet(config: ReferenceUNetConfig, seed: int, dtype: str = "float32"):
    """Seeded trainable denoiser; same (config, seed) gives identical weights.

    ``dtype`` may be "float32" (default) or "float64"; the latter exists for
    high-precision gradient verification.
    """
    from ._torch_unet import UNetDenoiser

    return UNetDenoiser(config, seed, dtype=dtype)
