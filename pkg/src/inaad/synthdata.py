"""Synthetic head-phantom dataset with ground-truth masks and anomalies.

A phantom is an ellipse "skull" with a bright rim, mid-gray interior
tissue, a bright midline echo along the major axis, two symmetric dark
inner structures, and multiplicative speckle. Anomalous variants modify
one aspect of a paired normal phantom generated from the same seed: a
bright blob, enlarged inner structures, a faded midline, or a globally
shrunken skull — spanning localized and global anomalies.

Pixel values live in [-1, 1]. Masks follow the inpainting convention:
1 marks the kept background outside the skull, 0 the anatomy region that
reconstruction is allowed to change.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, replace
from pathlib import Path
from typing import Literal

import numpy as np

from .imgio import save_image, save_mask
from .seeding import derive_seed, make_rng

__all__ = [
    "PhantomParams",
    "AnomalySpec",
    "AnomalyKind",
    "Region",
    "SplitCounts",
    "ManifestRow",
    "generate_normal",
    "generate_anomalous",
    "build_splits",
    "load_manifest",
    "ANOMALY_KINDS",
]

AnomalyKind = Literal[
    "cyst_blob", "enlarged_ventricle", "missing_midline", "shrunken_head"
]
ANOMALY_KINDS: tuple[AnomalyKind, ...] = (
    "cyst_blob", "enlarged_ventricle", "missing_midline", "shrunken_head"
)


@dataclass(frozen=True)
class PhantomParams:
    side: int = 64
    # Ranges are (low, high) for uniform draws, in pixels or luminance units.
    skull_axis_x: tuple[float, float] = (20.0, 26.0)
    skull_axis_y: tuple[float, float] = (15.0, 20.0)
    center_jitter: float = 2.0
    rim_thickness: tuple[float, float] = (1.5, 2.5)
    rim_value: tuple[float, float] = (0.85, 0.95)
    tissue_value: tuple[float, float] = (0.35, 0.45)
    midline_thickness: tuple[float, float] = (1.0, 1.8)
    midline_value: tuple[float, float] = (0.65, 0.75)
    structure_axis_x: tuple[float, float] = (4.0, 6.0)
    structure_axis_y: tuple[float, float] = (2.5, 3.5)
    structure_offset: tuple[float, float] = (0.30, 0.45)
    structure_value: tuple[float, float] = (0.10, 0.18)
    background_value: float = 0.08
    speckle_amplitude: float = 0.15

    def __post_init__(self):
        if self.side < 16:
            raise ValueError("side must be >= 16")
        if self.speckle_amplitude < 0.0:
            raise ValueError("speckle amplitude must be >= 0")
        margin = self.center_jitter + self.skull_axis_x[1]
        if margin >= self.side / 2:
            raise ValueError("skull axis range does not fit inside the frame")
        for name in ("skull_axis_x", "skull_axis_y", "rim_thickness",
                     "rim_value", "tissue_value", "midline_thickness",
                     "midline_value", "structure_axis_x", "structure_axis_y",
                     "structure_offset", "structure_value"):
            lo, hi = getattr(self, name)
            if not lo <= hi:
                raise ValueError(f"range {name} is inverted")


@dataclass(frozen=True)
class AnomalySpec:
    kind: AnomalyKind
    severity: float = 0.5
    location: tuple[float, float] | None = None  # (row, col), localized kinds

    def __post_init__(self):
        if self.kind not in ANOMALY_KINDS:
            raise ValueError(f"unknown anomaly kind: {self.kind!r}")
        if not 0.0 < self.severity <= 1.0:
            raise ValueError("severity must lie in (0, 1]")


@dataclass(frozen=True)
class Region:
    """Inclusive bounding box of the modified pixels."""

    top: int
    left: int
    bottom: int
    right: int

    def contains(self, row: float, col: float) -> bool:
        return self.top <= row <= self.bottom and self.left <= col <= self.right


@dataclass(frozen=True)
class _Geometry:
    cy: float
    cx: float
    ax: float
    ay: float
    rim_t: float
    rim_v: float
    tissue_v: float
    mid_t: float
    mid_v: float
    struct_ax: float
    struct_ay: float
    struct_dy: float
    struct_v: float


def _draw_geometry(rng: np.random.Generator, p: PhantomParams) -> _Geometry:
    u = rng.uniform
    half = p.side / 2.0
    return _Geometry(
        cy=half + u(-p.center_jitter, p.center_jitter),
        cx=half + u(-p.center_jitter, p.center_jitter),
        ax=u(*p.skull_axis_x),
        ay=u(*p.skull_axis_y),
        rim_t=u(*p.rim_thickness),
        rim_v=u(*p.rim_value),
        tissue_v=u(*p.tissue_value),
        mid_t=u(*p.midline_thickness),
        mid_v=u(*p.midline_value),
        struct_ax=u(*p.structure_axis_x),
        struct_ay=u(*p.structure_axis_y),
        struct_dy=u(*p.structure_offset) * u(*p.skull_axis_y),
        struct_v=u(*p.structure_value),
    )


def _ellipse_sq(rows, cols, cy, cx, ay, ax):
    return ((cols - cx) / ax) ** 2 + ((rows - cy) / ay) ** 2


def _render(g: _Geometry, p: PhantomParams, speckle: np.ndarray,
            midline_fade: float = 0.0,
            structure_scale: float = 1.0,
            blob: tuple[float, float, float, float] | None = None):
    """Rasterize a phantom; returns (image in [-1,1], mask)."""
    n = p.side
    rows = np.arange(n, dtype=np.float64)[:, None]
    cols = np.arange(n, dtype=np.float64)[None, :]

    outer = _ellipse_sq(rows, cols, g.cy, g.cx, g.ay, g.ax)
    inner = _ellipse_sq(rows, cols, g.cy, g.cx,
                        g.ay - g.rim_t, g.ax - g.rim_t)

    lum = np.full((n, n), p.background_value)
    lum[outer <= 1.0] = g.rim_v
    interior = inner <= 1.0
    # Gentle radial shading keeps the interior from being perfectly flat.
    lum[interior] = g.tissue_v * (1.0 - 0.12 * inner[interior])

    mid_v = g.tissue_v + (g.mid_v - g.tissue_v) * (1.0 - midline_fade)
    midline = (np.abs(rows - g.cy) <= g.mid_t) & (inner <= 0.8)
    lum[midline] = mid_v

    s_ax = g.struct_ax * structure_scale
    s_ay = g.struct_ay * structure_scale
    for sign in (-1.0, 1.0):
        struct = _ellipse_sq(rows, cols, g.cy + sign * g.struct_dy, g.cx,
                             s_ay, s_ax) <= 1.0
        lum[struct & interior] = g.struct_v

    if blob is not None:
        brow, bcol, amp, sigma = blob
        d2 = (rows - brow) ** 2 + (cols - bcol) ** 2
        # Truncated at 3 sigma so the anomaly is compactly supported.
        lum += np.where(d2 <= (3.0 * sigma) ** 2,
                        amp * np.exp(-d2 / (2.0 * sigma ** 2)), 0.0)

    lum = lum * (1.0 + p.speckle_amplitude * speckle)
    img = np.clip(lum * 2.0 - 1.0, -1.0, 1.0)
    mask = (outer > 1.0).astype(np.float64)
    return img, mask


def generate_normal(seed: int, params: PhantomParams = PhantomParams()):
    """Deterministic normal phantom; returns (image, mask)."""
    rng = make_rng(seed)
    geom = _draw_geometry(rng, params)
    speckle = rng.uniform(-1.0, 1.0, (params.side, params.side))
    return _render(geom, params, speckle)


def _blob_params(g: _Geometry, spec: AnomalySpec, rng: np.random.Generator):
    amp = 0.8 * spec.severity
    sigma = 1.5 + 2.5 * spec.severity
    if spec.location is not None:
        brow, bcol = spec.location
    else:
        # Rejection-sample a centre comfortably inside the interior.
        for _ in range(256):
            brow = g.cy + rng.uniform(-0.6, 0.6) * g.ay
            bcol = g.cx + rng.uniform(-0.6, 0.6) * g.ax
            if _ellipse_sq(brow, bcol, g.cy, g.cx,
                           g.ay - g.rim_t, g.ax - g.rim_t) <= 0.5:
                break
    inside = _ellipse_sq(brow, bcol, g.cy, g.cx,
                         g.ay - g.rim_t, g.ax - g.rim_t)
    if inside > 1.0:
        raise ValueError(f"blob location ({brow:.1f}, {bcol:.1f}) outside the brain")
    return brow, bcol, amp, sigma


def _clip_region(top, left, bottom, right, side) -> Region:
    return Region(
        top=max(0, int(np.floor(top))),
        left=max(0, int(np.floor(left))),
        bottom=min(side - 1, int(np.ceil(bottom))),
        right=min(side - 1, int(np.ceil(right))),
    )


def generate_anomalous(seed: int, params: PhantomParams, spec: AnomalySpec):
    """Anomalous phantom paired with ``generate_normal(seed, params)``.

    The same seed drives the same geometry and speckle, so outside the
    returned ground-truth region the anomalous image matches its paired
    normal exactly. Returns (image, mask, region).
    """
    rng = make_rng(seed)
    geom = _draw_geometry(rng, params)
    speckle = rng.uniform(-1.0, 1.0, (params.side, params.side))
    anomaly_rng = make_rng(derive_seed(seed, "anomaly"))

    if spec.kind == "cyst_blob":
        brow, bcol, amp, sigma = _blob_params(geom, spec, anomaly_rng)
        img, mask = _render(geom, params, speckle,
                            blob=(brow, bcol, amp, sigma))
        reach = 3.0 * sigma
        region = _clip_region(brow - reach, bcol - reach,
                              brow + reach, bcol + reach, params.side)
    elif spec.kind == "enlarged_ventricle":
        scale = 1.0 + 1.6 * spec.severity
        img, mask = _render(geom, params, speckle, structure_scale=scale)
        sx = geom.struct_ax * scale
        sy = geom.struct_ay * scale
        region = _clip_region(geom.cy - geom.struct_dy - sy,
                              geom.cx - sx,
                              geom.cy + geom.struct_dy + sy,
                              geom.cx + sx, params.side)
    elif spec.kind == "missing_midline":
        img, mask = _render(geom, params, speckle, midline_fade=spec.severity)
        region = _clip_region(geom.cy - geom.mid_t - 1,
                              geom.cx - geom.ax,
                              geom.cy + geom.mid_t + 1,
                              geom.cx + geom.ax, params.side)
    elif spec.kind == "shrunken_head":
        factor = 1.0 - spec.severity
        shrunk = replace(geom, ax=geom.ax * factor, ay=geom.ay * factor)
        if shrunk.ax <= shrunk.rim_t + 2 or shrunk.ay <= shrunk.rim_t + 2:
            raise ValueError("severity leaves no interior; reduce it")
        img, mask = _render(shrunk, params, speckle)
        region = _clip_region(geom.cy - geom.ay, geom.cx - geom.ax,
                              geom.cy + geom.ay, geom.cx + geom.ax,
                              params.side)
    else:  # pragma: no cover - guarded by AnomalySpec
        raise ValueError(spec.kind)
    return img, mask, region


@dataclass(frozen=True)
class SplitCounts:
    train_id: int = 2000
    val_id: int = 100
    test_id: int = 100
    val_ood: int = 100
    test_ood: int = 100

    def __post_init__(self):
        for name in ("train_id", "val_id", "test_id", "val_ood", "test_ood"):
            if getattr(self, name) < 0:
                raise ValueError(f"{name} must be >= 0")


@dataclass(frozen=True)
class ManifestRow:
    image_id: str
    path: str
    label: int
    group: str
    seed: int


# Severity draw ranges per anomaly kind; a full shrink would erase the head.
_SEVERITY_RANGES: dict[str, tuple[float, float]] = {
    "cyst_blob": (0.4, 0.9),
    "enlarged_ventricle": (0.4, 0.9),
    "missing_midline": (0.5, 1.0),
    "shrunken_head": (0.2, 0.4),
}


def build_splits(seed: int, counts: SplitCounts, params: PhantomParams,
                 out_dir: str | Path) -> Path:
    """Generate the dataset on disk and return the manifest path.

    Layout: ``images/<image_id>.png`` plus ``images/<image_id>_mask.png``;
    the manifest CSV lists (image_id, path, label, group, seed) and echoes
    the phantom parameters in leading comment lines. Every image owns a
    unique derived seed, so splits are disjoint by construction and the
    whole dataset regenerates bit-exact from (seed, counts, params).
    """
    out_dir = Path(out_dir)
    img_dir = out_dir / "images"
    img_dir.mkdir(parents=True, exist_ok=True)

    rows: list[ManifestRow] = []
    counter = 0

    def next_seed() -> int:
        nonlocal counter
        s = derive_seed(seed, "image", counter)
        counter += 1
        return s

    def add_normal(split: str, n: int):
        for i in range(n):
            img_seed = next_seed()
            image_id = f"{split}-{i:05d}"
            img, mask = generate_normal(img_seed, params)
            save_image(img_dir / f"{image_id}.png", img)
            save_mask(img_dir / f"{image_id}_mask.png", mask)
            rows.append(ManifestRow(image_id, f"images/{image_id}.png",
                                    0, "normal", img_seed))

    def add_anomalous(split: str, n: int):
        for i in range(n):
            img_seed = next_seed()
            kind = ANOMALY_KINDS[i % len(ANOMALY_KINDS)]
            lo, hi = _SEVERITY_RANGES[kind]
            sev_rng = make_rng(derive_seed(img_seed, "severity"))
            spec = AnomalySpec(kind=kind, severity=float(sev_rng.uniform(lo, hi)))
            image_id = f"{split}-{i:05d}"
            img, mask, _ = generate_anomalous(img_seed, params, spec)
            save_image(img_dir / f"{image_id}.png", img)
            save_mask(img_dir / f"{image_id}_mask.png", mask)
            rows.append(ManifestRow(image_id, f"images/{image_id}.png",
                                    1, kind, img_seed))

    add_normal("train", counts.train_id)
    add_normal("val", counts.val_id)
    add_normal("test", counts.test_id)
    add_anomalous("val-ood", counts.val_ood)
    add_anomalous("test-ood", counts.test_ood)

    manifest = out_dir / "manifest.csv"
    with open(manifest, "w", newline="") as fh:
        fh.write(f"# master_seed={seed}\n")
        fh.write(f"# counts={counts}\n")
        fh.write(f"# params={params}\n")
        writer = csv.writer(fh)
        writer.writerow(["image_id", "path", "label", "group", "seed"])
        for row in rows:
            writer.writerow([row.image_id, row.path, row.label,
                             row.group, row.seed])
    return manifest


def load_manifest(path: str | Path) -> list[ManifestRow]:
    path = Path(path)
    rows: list[ManifestRow] = []
    with open(path, newline="") as fh:
        lines = [ln for ln in fh if not ln.startswith("#")]
    reader = csv.DictReader(lines)
    for rec in reader:
        rows.append(ManifestRow(
            image_id=rec["image_id"],
            path=rec["path"],
            label=int(rec["label"]),
            group=rec["group"],
            seed=int(rec["seed"]),
        ))
    return rows
