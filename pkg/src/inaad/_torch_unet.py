"""Torch backend for the trainable denoiser.

The network is the usual downsample/upsample residual architecture with a
sinusoidal step embedding: per resolution level a stack of residual blocks
(each receiving a projected step embedding), strided-conv downsampling,
a two-block bottleneck with optional self-attention, and a mirrored up
path consuming skip connections. Everything here runs on CPU tensors; the
public interface speaks numpy.
"""

from __future__ import annotations

import math

import numpy as np
import torch
import torch.nn.functional as F
from torch import nn

from .denoiser import ReferenceUNetConfig


def _num_groups(channels: int) -> int:
    # Keep at least 4 channels per group: per-channel normalization would
    # cancel the additive (per-channel constant) step-embedding signal.
    g = min(32, max(1, channels // 4))
    while channels % g:
        g -= 1
    return g


class _ResBlock(nn.Module):
    def __init__(self, cin: int, cout: int, tdim: int):
        super().__init__()
        self.norm1 = nn.GroupNorm(_num_groups(cin), cin)
        self.conv1 = nn.Conv2d(cin, cout, 3, padding=1)
        self.temb_proj = nn.Linear(tdim, cout)
        self.norm2 = nn.GroupNorm(_num_groups(cout), cout)
        self.conv2 = nn.Conv2d(cout, cout, 3, padding=1)
        self.skip = nn.Conv2d(cin, cout, 1) if cin != cout else nn.Identity()

    def forward(self, x, temb):
        h = self.conv1(F.silu(self.norm1(x)))
        h = h + self.temb_proj(temb)[:, :, None, None]
        h = self.conv2(F.silu(self.norm2(h)))
        return h + self.skip(x)


class _SelfAttention(nn.Module):
    """Single-head attention over spatial positions."""

    def __init__(self, channels: int):
        super().__init__()
        self.norm = nn.GroupNorm(_num_groups(channels), channels)
        self.qkv = nn.Conv2d(channels, channels * 3, 1)
        self.proj = nn.Conv2d(channels, channels, 1)

    def forward(self, x):
        b, c, h, w = x.shape
        q, k, v = self.qkv(self.norm(x)).reshape(b, 3, c, h * w).unbind(1)
        attn = torch.softmax(q.transpose(1, 2) @ k / math.sqrt(c), dim=-1)
        out = (v @ attn.transpose(1, 2)).reshape(b, c, h, w)
        return x + self.proj(out)


class _Upsample(nn.Module):
    def __init__(self, channels: int):
        super().__init__()
        self.conv = nn.Conv2d(channels, channels, 3, padding=1)

    def forward(self, x):
        return self.conv(F.interpolate(x, scale_factor=2, mode="nearest"))


class _UNet(nn.Module):
    def __init__(self, cfg: ReferenceUNetConfig):
        super().__init__()
        tdim = cfg.time_embed_dim
        self.tdim = tdim
        self.temb_proj = nn.Sequential(
            nn.Linear(tdim, tdim), nn.SiLU(), nn.Linear(tdim, tdim)
        )
        chans = [cfg.base_channels * m for m in cfg.channel_mults]
        nblocks = cfg.blocks_per_level

        self.stem = nn.Conv2d(1, chans[0], 3, padding=1)
        skip_chans = [chans[0]]
        cur = chans[0]
        self.down_blocks = nn.ModuleList()
        self.downsamples = nn.ModuleList()
        for i, c in enumerate(chans):
            blocks = nn.ModuleList()
            for _ in range(nblocks):
                blocks.append(_ResBlock(cur, c, tdim))
                cur = c
                skip_chans.append(c)
            self.down_blocks.append(blocks)
            if i < len(chans) - 1:
                self.downsamples.append(nn.Conv2d(c, c, 3, stride=2, padding=1))
                skip_chans.append(c)

        self.mid1 = _ResBlock(cur, cur, tdim)
        self.mid_attn = _SelfAttention(cur) if cfg.attention else None
        self.mid2 = _ResBlock(cur, cur, tdim)

        self.up_blocks = nn.ModuleList()
        self.upsamples = nn.ModuleList()
        for i, c in reversed(list(enumerate(chans))):
            blocks = nn.ModuleList()
            for _ in range(nblocks + 1):
                blocks.append(_ResBlock(cur + skip_chans.pop(), c, tdim))
                cur = c
            self.up_blocks.append(blocks)
            if i > 0:
                self.upsamples.append(_Upsample(c))

        self.out_norm = nn.GroupNorm(_num_groups(cur), cur)
        self.out_conv = nn.Conv2d(cur, 1, 3, padding=1)

    def _time_embedding(self, t: torch.Tensor, dtype) -> torch.Tensor:
        half = self.tdim // 2
        freqs = torch.exp(
            -math.log(10000.0) * torch.arange(half, dtype=dtype) / half
        )
        angles = t.to(dtype)[:, None] * freqs[None, :]
        return torch.cat([torch.sin(angles), torch.cos(angles)], dim=1)

    def forward(self, x, t):
        temb = self.temb_proj(self._time_embedding(t, x.dtype))
        h = self.stem(x)
        skips = [h]
        for i, blocks in enumerate(self.down_blocks):
            for block in blocks:
                h = block(h, temb)
                skips.append(h)
            if i < len(self.downsamples):
                h = self.downsamples[i](h)
                skips.append(h)
        h = self.mid1(h, temb)
        if self.mid_attn is not None:
            h = self.mid_attn(h)
        h = self.mid2(h, temb)
        for i, blocks in enumerate(self.up_blocks):
            for block in blocks:
                h = block(torch.cat([h, skips.pop()], dim=1), temb)
            if i < len(self.upsamples):
                h = self.upsamples[i](h)
        return self.out_conv(F.silu(self.out_norm(h)))


class UNetDenoiser:
    """Numpy-facing wrapper around the torch network."""

    def __init__(self, config: ReferenceUNetConfig, seed: int,
                 dtype: str = "float32"):
        if dtype not in ("float32", "float64"):
            raise ValueError("dtype must be 'float32' or 'float64'")
        self.config = config
        self.seed = seed
        self._dtype = torch.float32 if dtype == "float32" else torch.float64
        with torch.random.fork_rng():
            torch.manual_seed(seed)
            self.module = _UNet(config)
        self.module.to(self._dtype)
        self.module.eval()
        # Populated by the trainer when EMA tracking is enabled.
        self.ema_arrays: dict[str, np.ndarray] | None = None

    @property
    def parameter_count(self) -> int:
        return sum(p.numel() for p in self.module.parameters())

    def predict(self, x: np.ndarray, t) -> np.ndarray:
        x = np.asarray(x, dtype=np.float64)
        squeeze = x.ndim == 2
        if squeeze:
            x = x[None]
        if x.ndim != 3:
            raise ValueError("expected (H, W) or (N, H, W) input")
        self.config.check_image_side(x.shape[-1])
        self.config.check_image_side(x.shape[-2])
        t_arr = np.broadcast_to(np.asarray(t, dtype=np.int64), (x.shape[0],))
        xt = torch.from_numpy(np.ascontiguousarray(x[:, None])).to(self._dtype)
        tt = torch.from_numpy(t_arr.copy())
        with torch.inference_mode():
            out = self.module(xt, tt)
        out = out[:, 0].numpy().astype(np.float64)
        return out[0] if squeeze else out

    # -- parameter access (checkpointing, gradient checks) ----------------

    def named_parameter_arrays(self) -> list[tuple[str, np.ndarray]]:
        """Parameters as (name, array) in deterministic traversal order."""
        return [(name, p.detach().numpy().copy())
                for name, p in self.module.named_parameters()]

    def load_parameter_arrays(self, blocks: dict[str, np.ndarray]) -> None:
        params = dict(self.module.named_parameters())
        missing = set(params) - set(blocks)
        extra = set(blocks) - set(params)
        if missing or extra:
            raise ValueError(
                f"parameter mismatch; missing={sorted(missing)[:3]} "
                f"extra={sorted(extra)[:3]}"
            )
        with torch.no_grad():
            for name, p in params.items():
                arr = np.asarray(blocks[name])
                if tuple(arr.shape) != tuple(p.shape):
                    raise ValueError(f"shape mismatch for {name}")
                p.copy_(torch.from_numpy(arr.astype(np.float64)).to(self._dtype))

    def get_flat_parameter(self, index: int) -> tuple[str, int]:
        """Map a flat parameter index to (tensor name, offset)."""
        for name, p in self.module.named_parameters():
            if index < p.numel():
                return name, index
            index -= p.numel()
        raise IndexError("flat parameter index out of range")

    def nudge_parameter(self, name: str, offset: int, delta: float) -> None:
        param = dict(self.module.named_parameters())[name]
        with torch.no_grad():
            param.view(-1)[offset] += delta
