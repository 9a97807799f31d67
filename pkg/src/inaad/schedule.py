"""Diffusion noise schedule: per-step beta_t and the derived alpha products.

Steps are 1-based in the math (t = 1..T). Arrays are stored 0-based, so
``betas[t-1]`` is the beta for step t; the empty product alpha_bar(0) = 1 is
exposed explicitly rather than stored.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

__all__ = ["NoiseSchedule", "linear_schedule"]


@dataclass(frozen=True, eq=False)
class NoiseSchedule:
    """Per-step noise magnitudes for a T-step diffusion process.

    betas[i], alphas[i] and alpha_bars[i] correspond to step t = i + 1, with
    alphas = 1 - betas and alpha_bars the running product of alphas.
    ``meta`` records how the schedule was built (used when embedding the
    schedule in checkpoints).
    """

    betas: np.ndarray
    meta: dict | None = None
    alphas: np.ndarray = field(init=False)
    alpha_bars: np.ndarray = field(init=False)

    def __post_init__(self):
        betas = np.asarray(self.betas, dtype=np.float64)
        if betas.ndim != 1 or betas.size == 0:
            raise ValueError("betas must be a non-empty 1-D array")
        if np.any(betas <= 0.0) or np.any(betas >= 1.0):
            raise ValueError("every beta must lie strictly inside (0, 1)")
        object.__setattr__(self, "betas", betas)
        object.__setattr__(self, "alphas", 1.0 - betas)
        object.__setattr__(self, "alpha_bars", np.cumprod(1.0 - betas))

    @property
    def num_steps(self) -> int:
        return self.betas.size

    def _check_step(self, t: int, lowest: int) -> None:
        if not lowest <= t <= self.num_steps:
            raise ValueError(
                f"step {t} outside [{lowest}, {self.num_steps}]"
            )

    def beta(self, t: int) -> float:
        self._check_step(t, 1)
        return float(self.betas[t - 1])

    def alpha(self, t: int) -> float:
        self._check_step(t, 1)
        return float(self.alphas[t - 1])

    def alpha_bar(self, t: int) -> float:
        """Cumulative signal coefficient; alpha_bar(0) = 1 by convention."""
        self._check_step(t, 0)
        if t == 0:
            return 1.0
        return float(self.alpha_bars[t - 1])


def linear_schedule(num_steps: int, beta_start: float = 1e-4,
                    beta_end: float = 0.02) -> NoiseSchedule:
    """Schedule with beta interpolated linearly from beta_start to beta_end.

    The endpoints are the common diffusion defaults; only the step count is
    dictated by the method, so the shape is a documented assumption.
    """
    if num_steps < 1:
        raise ValueError("num_steps must be >= 1")
    if not (0.0 < beta_start <= beta_end < 1.0):
        raise ValueError("need 0 < beta_start <= beta_end < 1")
    betas = np.linspace(beta_start, beta_end, num_steps)
    meta = {"kind": "linear", "num_steps": int(num_steps),
            "beta_start": float(beta_start), "beta_end": float(beta_end)}
    return NoiseSchedule(betas=betas, meta=meta)
