"""Versioned model checkpoint files.

Layout: an 11-byte magic string, an 8-byte little-endian header length, a
UTF-8 JSON header, then one raw little-endian float32 block per entry of
the header's ``blocks`` list, in that order. The header carries the
network hyperparameters, the schedule parameters, the noise kind used for
training, the training seed and the iteration count, so inference always
reuses the training-time setup. The header is purely configuration-derived
(no timestamps), which keeps checkpoint writes byte-reproducible.
"""

from __future__ import annotations

import json
import struct
from dataclasses import asdict, dataclass
from pathlib import Path

import numpy as np

from .denoiser import ReferenceUNetConfig, build_unet
from .schedule import NoiseSchedule, linear_schedule

__all__ = ["save_checkpoint", "load_checkpoint", "LoadedCheckpoint",
           "CheckpointError"]

MAGIC = b"INAADCKPT1\n"
FORMAT_VERSION = 1


class CheckpointError(ValueError):
    pass


@dataclass
class LoadedCheckpoint:
    denoiser: object
    schedule: NoiseSchedule
    header: dict
    extra_blocks: dict[str, np.ndarray]

    @property
    def iteration(self) -> int:
        return int(self.header["iteration"])


def save_checkpoint(path: str | Path, denoiser, schedule: NoiseSchedule,
                    noise_kind: str, seed: int, iteration: int,
                    extra_blocks: dict[str, np.ndarray] | None = None,
                    extra_header: dict | None = None) -> None:
    """Write the denoiser parameters (and optional extra float blocks)."""
    if schedule.meta is None or schedule.meta.get("kind") != "linear":
        raise CheckpointError("only linear schedules can be embedded")
    params = denoiser.named_parameter_arrays()
    blocks: list[tuple[str, np.ndarray]] = list(params)
    for name in sorted(extra_blocks or {}):
        blocks.append((name, np.asarray(extra_blocks[name])))

    header = {
        "format_version": FORMAT_VERSION,
        "denoiser": asdict(denoiser.config),
        "schedule": dict(schedule.meta),
        "noise_kind": str(noise_kind),
        "seed": int(seed),
        "iteration": int(iteration),
        "parameter_names": [name for name, _ in params],
        "blocks": [{"name": name, "shape": list(arr.shape)}
                   for name, arr in blocks],
    }
    if extra_header:
        overlap = set(extra_header) & set(header)
        if overlap:
            raise CheckpointError(f"extra_header collides with {overlap}")
        header.update(extra_header)

    header_bytes = json.dumps(header, sort_keys=True).encode("utf-8")
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "wb") as fh:
        fh.write(MAGIC)
        fh.write(struct.pack("<Q", len(header_bytes)))
        fh.write(header_bytes)
        for _, arr in blocks:
            fh.write(np.ascontiguousarray(arr, dtype="<f4").tobytes())


def load_checkpoint(path: str | Path, use_ema: bool = False) -> LoadedCheckpoint:
    """Rebuild the denoiser and schedule stored in a checkpoint file.

    ``use_ema=True`` loads the exponential-moving-average weights (stored
    under ``ema.*`` blocks) into the network instead of the raw ones.
    """
    path = Path(path)
    with open(path, "rb") as fh:
        magic = fh.read(len(MAGIC))
        if magic != MAGIC:
            raise CheckpointError(f"{path} is not a checkpoint (bad magic)")
        (header_len,) = struct.unpack("<Q", fh.read(8))
        header = json.loads(fh.read(header_len).decode("utf-8"))
        if header.get("format_version") != FORMAT_VERSION:
            raise CheckpointError(
                f"unsupported checkpoint version {header.get('format_version')}"
            )
        blocks: dict[str, np.ndarray] = {}
        for entry in header["blocks"]:
            shape = tuple(entry["shape"])
            count = int(np.prod(shape)) if shape else 1
            data = fh.read(count * 4)
            if len(data) != count * 4:
                raise CheckpointError(f"truncated block {entry['name']!r}")
            blocks[entry["name"]] = np.frombuffer(
                data, dtype="<f4").reshape(shape).astype(np.float64)
        if fh.read(1):
            raise CheckpointError("trailing bytes after final block")

    sched = header["schedule"]
    schedule = linear_schedule(sched["num_steps"], sched["beta_start"],
                               sched["beta_end"])
    config = ReferenceUNetConfig(**{
        **header["denoiser"],
        "channel_mults": tuple(header["denoiser"]["channel_mults"]),
    })
    denoiser = build_unet(config, seed=header["seed"])

    param_names = list(header["parameter_names"])
    weights = {name: blocks[name] for name in param_names}
    if use_ema:
        ema = {name: blocks[f"ema.{name}"] for name in param_names
               if f"ema.{name}" in blocks}
        if len(ema) != len(param_names):
            raise CheckpointError("checkpoint holds no complete EMA state")
        weights = ema
    denoiser.load_parameter_arrays(weights)

    extras = {name: arr for name, arr in blocks.items()
              if name not in param_names}
    return LoadedCheckpoint(denoiser=denoiser, schedule=schedule,
                            header=header, extra_blocks=extras)
