"""Forward corruption, reverse denoising step, training objective, and the
training/generation drivers built on them.

The forward process corrupts a clean image in a single jump:

    x_t = sqrt(abar_t) * x_0 + sqrt(1 - abar_t) * eps

The reverse step removes the predicted noise and re-injects a controlled
amount of fresh noise:

    x_{t-1} = (x_t - (1 - a_t) / sqrt(1 - abar_t) * eps_hat) / sqrt(a_t)
              + sigma_t * eps

with sigma_t = sqrt(beta_t) by default. The training objective is the mean
squared error between injected and predicted noise.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Sequence

import numpy as np

from .noise import NoiseSampler, sample_gaussian
from .schedule import NoiseSchedule
from .seeding import derive_seed, make_rng

__all__ = [
    "forward_diffuse",
    "reverse_step",
    "TrainingBatch",
    "sample_training_batch",
    "training_loss",
    "TrainConfig",
    "TrainResult",
    "TrainingDiverged",
    "train",
    "generate",
]


def _coeff(values: np.ndarray | float, x: np.ndarray):
    """Broadcast per-sample coefficients over image dimensions."""
    arr = np.asarray(values, dtype=np.float64)
    if arr.ndim == 0:
        return arr
    return arr.reshape(-1, *([1] * (x.ndim - 1)))


def _alpha_bars_at(schedule: NoiseSchedule, t: np.ndarray) -> np.ndarray:
    if np.any(t < 0) or np.any(t > schedule.num_steps):
        raise ValueError(f"step outside [0, {schedule.num_steps}]")
    padded = np.concatenate(([1.0], schedule.alpha_bars))
    return padded[t]


def forward_diffuse(x0: np.ndarray, t, schedule: NoiseSchedule,
                    eps: np.ndarray) -> np.ndarray:
    """Corrupt x0 to step t in one jump; t may vary per batch item."""
    x0 = np.asarray(x0, dtype=np.float64)
    eps = np.asarray(eps, dtype=np.float64)
    if x0.shape != eps.shape:
        raise ValueError(f"shape mismatch: image {x0.shape} vs noise {eps.shape}")
    t_arr = np.atleast_1d(np.asarray(t, dtype=np.int64))
    if t_arr.size > 1 and (x0.ndim < 3 or t_arr.size != x0.shape[0]):
        raise ValueError("per-sample t requires a matching batch dimension")
    abar = _alpha_bars_at(schedule, t_arr if t_arr.size > 1 else t_arr[:1])
    if t_arr.size == 1:
        abar = abar[0]
    c = _coeff(abar, x0)
    return np.sqrt(c) * x0 + np.sqrt(1.0 - c) * eps


def reverse_step(x_t: np.ndarray, t: int, denoiser, schedule: NoiseSchedule,
                 eps: np.ndarray, sigma: float | None = None) -> np.ndarray:
    """One denoising transition from step t to t-1.

    ``eps`` is the fresh noise to inject, scaled by ``sigma`` (default
    sqrt(beta_t)); callers pass zeros at t=1 so the chain ends clean.
    """
    x_t = np.asarray(x_t, dtype=np.float64)
    eps = np.asarray(eps, dtype=np.float64)
    if x_t.shape != eps.shape:
        raise ValueError(f"shape mismatch: image {x_t.shape} vs noise {eps.shape}")
    t = int(t)
    if t < 1:
        raise ValueError("reverse_step needs t >= 1")
    alpha = schedule.alpha(t)
    abar = schedule.alpha_bar(t)
    if sigma is None:
        sigma = np.sqrt(schedule.beta(t))
    eps_hat = np.asarray(denoiser.predict(x_t, t), dtype=np.float64)
    if eps_hat.shape != x_t.shape:
        raise ValueError("denoiser output shape differs from its input")
    mean = (x_t - (1.0 - alpha) / np.sqrt(1.0 - abar) * eps_hat) / np.sqrt(alpha)
    return mean + sigma * eps


@dataclass(frozen=True)
class TrainingBatch:
    """Clean images with per-sample steps and injected noise fields."""

    images: np.ndarray   # (N, H, W)
    t: np.ndarray        # (N,)
    eps: np.ndarray      # (N, H, W)

    def __post_init__(self):
        images = np.asarray(self.images, dtype=np.float64)
        eps = np.asarray(self.eps, dtype=np.float64)
        t = np.asarray(self.t, dtype=np.int64)
        if images.ndim != 3 or images.shape[0] == 0:
            raise ValueError("images must be a non-empty (N, H, W) array")
        if eps.shape != images.shape or t.shape != (images.shape[0],):
            raise ValueError("images, eps and t sizes disagree")
        if np.any(t < 1):
            raise ValueError("training steps must be >= 1")
        object.__setattr__(self, "images", images)
        object.__setattr__(self, "eps", eps)
        object.__setattr__(self, "t", t)


def sample_training_batch(images: np.ndarray, batch_size: int,
                          schedule: NoiseSchedule,
                          sampler: NoiseSampler, seed: int) -> TrainingBatch:
    """Draw a batch: uniform image picks, t ~ uniform{1..T}, seeded noise."""
    images = np.asarray(images, dtype=np.float64)
    if images.ndim != 3 or images.shape[0] == 0:
        raise ValueError("dataset must be a non-empty (M, H, W) array")
    rng = make_rng(seed)
    idx = rng.integers(0, images.shape[0], size=batch_size)
    t = rng.integers(1, schedule.num_steps + 1, size=batch_size)
    h, w = images.shape[1:]
    eps = np.stack([sampler(h, w, derive_seed(seed, "eps", i))
                    for i in range(batch_size)])
    return TrainingBatch(images=images[idx], t=t, eps=eps)


def training_loss(batch: TrainingBatch, denoiser,
                  schedule: NoiseSchedule) -> float:
    """Mean squared error between injected and predicted noise."""
    x_t = forward_diffuse(batch.images, batch.t, schedule, batch.eps)
    eps_hat = np.asarray(denoiser.predict(x_t, batch.t), dtype=np.float64)
    return float(np.mean((batch.eps - eps_hat) ** 2))


class TrainingDiverged(RuntimeError):
    pass


@dataclass(frozen=True)
class TrainConfig:
    iterations: int
    batch_size: int = 16
    learning_rate: float = 1e-4
    grad_clip: float = 1.0
    seed: int = 0
    ema_decay: float | None = None
    start_iteration: int = 0
    checkpoint_every: int = 0
    loss_log_path: str | Path | None = None
    deterministic: bool = False

    def __post_init__(self):
        if self.iterations < 0 or self.batch_size < 1:
            raise ValueError("iterations must be >= 0 and batch_size >= 1")
        if self.learning_rate < 0.0:
            raise ValueError("learning_rate must be >= 0")


@dataclass
class TrainResult:
    losses: np.ndarray = field(default_factory=lambda: np.empty(0))
    final_iteration: int = 0


def train(images: np.ndarray, denoiser, schedule: NoiseSchedule,
          config: TrainConfig, sampler: NoiseSampler = sample_gaussian,
          on_checkpoint: Callable[[object, int], None] | None = None,
          ) -> TrainResult:
    """Stochastic gradient descent on the noise-prediction objective.

    Batches are derived deterministically from (seed, iteration), so a
    resumed run consumes the same noise a fresh run would have at the same
    iteration. ``on_checkpoint(denoiser, iteration)`` fires every
    ``checkpoint_every`` iterations and once at the end. Raises
    TrainingDiverged the moment the loss stops being finite.
    """
    import torch

    if not hasattr(denoiser, "module"):
        raise TypeError("denoiser is not trainable (build it with build_unet)")
    images = np.asarray(images, dtype=np.float64)
    if images.ndim != 3 or images.shape[0] == 0:
        raise ValueError("dataset must be a non-empty (M, H, W) array")
    if config.deterministic:
        torch.set_num_threads(1)

    module = denoiser.module
    module.train()
    opt = torch.optim.Adam(module.parameters(), lr=config.learning_rate)
    if config.ema_decay is not None:
        ema = {name: p.detach().clone()
               for name, p in module.named_parameters()}
    tdtype = next(module.parameters()).dtype

    losses: list[float] = []
    log_rows: list[tuple[int, float]] = []
    iteration = config.start_iteration
    for iteration in range(config.start_iteration + 1, config.iterations + 1):
        batch = sample_training_batch(
            images, config.batch_size, schedule, sampler,
            derive_seed(config.seed, "iteration", iteration),
        )
        x_t = forward_diffuse(batch.images, batch.t, schedule, batch.eps)
        xt = torch.from_numpy(x_t[:, None]).to(tdtype)
        tt = torch.from_numpy(batch.t)
        target = torch.from_numpy(batch.eps[:, None]).to(tdtype)

        opt.zero_grad()
        loss = torch.mean((module(xt, tt) - target) ** 2)
        loss_val = float(loss.detach())
        if not np.isfinite(loss_val):
            raise TrainingDiverged(f"non-finite loss at iteration {iteration}")
        loss.backward()
        if config.grad_clip > 0.0:
            torch.nn.utils.clip_grad_norm_(module.parameters(), config.grad_clip)
        opt.step()
        if config.ema_decay is not None:
            with torch.no_grad():
                for name, p in module.named_parameters():
                    ema[name].mul_(config.ema_decay).add_(
                        p, alpha=1.0 - config.ema_decay)

        losses.append(loss_val)
        log_rows.append((iteration, loss_val))
        if (on_checkpoint is not None and config.checkpoint_every > 0
                and iteration % config.checkpoint_every == 0):
            module.eval()
            on_checkpoint(denoiser, iteration)
            module.train()

    module.eval()
    denoiser.ema_arrays = (
        {name: p.numpy().astype(np.float64) for name, p in ema.items()}
        if config.ema_decay is not None else None
    )
    if on_checkpoint is not None and (config.checkpoint_every == 0
                                      or iteration % config.checkpoint_every):
        on_checkpoint(denoiser, iteration)

    if config.loss_log_path is not None:
        path = Path(config.loss_log_path)
        path.parent.mkdir(parents=True, exist_ok=True)
        mode = "a" if config.start_iteration > 0 and path.exists() else "w"
        with open(path, mode) as fh:
            if mode == "w":
                fh.write("iteration,loss\n")
            for it, lv in log_rows:
                fh.write(f"{it},{lv:.8f}\n")

    return TrainResult(losses=np.asarray(losses), final_iteration=iteration)


def generate(denoiser, schedule: NoiseSchedule, seed: int, count: int,
             height: int, width: int,
             sampler: NoiseSampler = sample_gaussian) -> list[np.ndarray]:
    """Run the full reverse chain from pure noise; outputs clamped to [-1, 1]."""
    if count < 0:
        raise ValueError("count must be >= 0")
    if count == 0:
        return []
    x = np.stack([sampler(height, width, derive_seed(seed, "init", i))
                  for i in range(count)])
    for t in range(schedule.num_steps, 0, -1):
        if t == 1:
            eps = np.zeros_like(x)
        else:
            eps = np.stack([sampler(height, width, derive_seed(seed, "step", t, i))
                            for i in range(count)])
        x = reverse_step(x, t, denoiser, schedule, eps)
    x = np.clip(x, -1.0, 1.0)
    return [x[i] for i in range(count)]
