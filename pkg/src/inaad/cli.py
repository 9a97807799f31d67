"""Command-line pipeline: synth, train, score, eval.

Exit codes: 0 success, 1 runtime failure (including per-image scoring
errors), 2 configuration error. In deterministic mode every command's
outputs are byte-identical across reruns; the per-image timing column is
suppressed (written as 0.000) since wall time is inherently unstable.
"""

from __future__ import annotations

import argparse
import csv
import json
import sys
import time
import warnings
from pathlib import Path

import numpy as np

from . import __version__
from .checkpoint import load_checkpoint, save_checkpoint
from .config import ConfigError, RunConfig, load_run_config
from .denoiser import build_unet
from .detect import InaadConfig, score_images
from .diffusion import train
from .imgio import load_image, load_mask, save_image
from .metrics import LabeledScores, evaluate_groups, roc_curve
from .seeding import derive_seed
from .synthdata import build_splits, load_manifest
from dataclasses import replace

__all__ = ["main", "entrypoint"]


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="inaad",
        description="Diffusion-based unsupervised anomaly detection pipeline",
    )
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)

    synth = sub.add_parser("synth", help="generate the synthetic dataset")
    synth.add_argument("--config", required=True, help="run configuration file")
    synth.add_argument("--out", help="dataset directory (default: data.dir)")

    tr = sub.add_parser("train", help="train a denoising diffusion model")
    tr.add_argument("--config", required=True)
    tr.add_argument("--checkpoint", help="resume from this checkpoint")
    tr.add_argument("--out", help="output directory (default: output_dir/train)")
    tr.add_argument("--deterministic", action="store_true",
                    help="single-threaded, byte-reproducible mode")

    sc = sub.add_parser("score", help="score a manifest of images")
    sc.add_argument("--config", required=True)
    sc.add_argument("--checkpoint", required=True)
    sc.add_argument("--manifest", required=True)
    sc.add_argument("--out", help="output directory (default: output_dir/score)")
    sc.add_argument("--jobs", type=int, default=16,
                    help="images reconstructed together per batch")
    sc.add_argument("--deterministic", action="store_true",
                    help="sequential per-image processing, stable timing column")
    sc.add_argument("--ablate", action="store_true",
                    help="also collect per-level and inpainting-off similarities")

    ev = sub.add_parser("eval", help="metric tables from a scores CSV")
    ev.add_argument("scores", help="scores.csv produced by the score command")
    ev.add_argument("--out", help="output directory (default: alongside scores)")
    ev.add_argument("--ablate", action="store_true",
                    help="emit the noise-level/inpainting ablation grid")

    return parser


def _require_file(path: Path, what: str) -> Path:
    if not path.is_file():
        raise ConfigError(f"{what} not found: {path}")
    return path


# ---------------------------------------------------------------- synth --

def cmd_synth(cfg: RunConfig, out: str | None) -> int:
    out_dir = Path(out) if out else cfg.data_dir
    manifest = build_splits(cfg.seed, cfg.split_counts(), cfg.phantom_params(),
                            out_dir)
    rows = load_manifest(manifest)
    by_split = {
        "train": lambda r: r.image_id.startswith("train-"),
        "val": lambda r: r.image_id.startswith(("val-", "val-ood-")),
        "test": lambda r: r.image_id.startswith(("test-", "test-ood-")),
    }
    header = "image_id,path,label,group,seed\n"
    for split, match in by_split.items():
        with open(out_dir / f"manifest-{split}.csv", "w") as fh:
            fh.write(header)
            for r in rows:
                if match(r):
                    fh.write(f"{r.image_id},{r.path},{r.label},{r.group},{r.seed}\n")
    print(f"wrote {len(rows)} images under {out_dir}")
    return 0


# ---------------------------------------------------------------- train --

def cmd_train(cfg: RunConfig, checkpoint: str | None, out: str | None,
              deterministic: bool) -> int:
    out_dir = Path(out) if out else cfg.output_dir / "train"
    out_dir.mkdir(parents=True, exist_ok=True)

    manifest_path = _require_file(cfg.data_dir / "manifest-train.csv",
                                  "training manifest (run `inaad synth` first)")
    rows = [r for r in load_manifest(manifest_path) if r.label == 0]
    if not rows:
        raise ConfigError("training manifest holds no normal images")
    images = np.stack([load_image(cfg.data_dir / r.path) for r in rows])
    if images.shape[1] != cfg.image_size:
        raise ConfigError(
            f"dataset image size {images.shape[1]} != train.image_size "
            f"{cfg.image_size}"
        )

    schedule = cfg.schedule()
    start_iteration = 0
    if checkpoint:
        loaded = load_checkpoint(_require_file(Path(checkpoint), "checkpoint"))
        denoiser = loaded.denoiser
        start_iteration = loaded.iteration
        if loaded.header["schedule"] != schedule.meta:
            raise ConfigError("checkpoint schedule differs from configured one")
    else:
        denoiser = build_unet(cfg.denoiser_config(),
                              seed=derive_seed(cfg.seed, "init"))
    denoiser.config.check_image_side(cfg.image_size)

    def emit(d, iteration: int) -> None:
        save_checkpoint(out_dir / f"ckpt_{iteration:07d}.ckpt", d, schedule,
                        noise_kind=cfg.train_noise_kind, seed=cfg.seed,
                        iteration=iteration,
                        extra_blocks=_ema_blocks(d))

    train_cfg = cfg.train_config(
        seed=derive_seed(cfg.seed, "train"),
        deterministic=deterministic,
        start_iteration=start_iteration,
        loss_log_path=out_dir / "loss.csv",
    )
    result = train(images, denoiser, schedule, train_cfg,
                   sampler=cfg.train_sampler(), on_checkpoint=emit)
    final = out_dir / "ckpt_final.ckpt"
    save_checkpoint(final, denoiser, schedule,
                    noise_kind=cfg.train_noise_kind, seed=cfg.seed,
                    iteration=result.final_iteration,
                    extra_blocks=_ema_blocks(denoiser))
    print(f"trained to iteration {result.final_iteration}; "
          f"final checkpoint {final}")
    return 0


def _ema_blocks(denoiser) -> dict | None:
    ema = getattr(denoiser, "ema_arrays", None)
    if not ema:
        return None
    return {f"ema.{name}": arr for name, arr in ema.items()}


# ---------------------------------------------------------------- score --

def _score_rows(rows, base_dir, denoiser, schedule, inaad_cfg, seed, jobs,
                collect_levels):
    """Load, score, and time manifest rows; returns per-row dicts.

    Images are scored one at a time (jobs = concurrent worker threads), so
    results do not depend on the degree of parallelism; each image's noise
    derives from its own seed.
    """
    results = []
    pending = []
    for row in rows:
        img_path = base_dir / row.path
        mask_path = img_path.with_name(img_path.stem + "_mask.png")
        if not img_path.is_file() or not mask_path.is_file():
            results.append({"row": row, "error": "missing image or mask file"})
            continue
        pending.append((row, load_image(img_path), load_mask(mask_path)))

    def score_one(item):
        row, img, mask = item
        t0 = time.perf_counter()
        [report] = score_images(
            img[None], mask[None], [derive_seed(seed, "score", row.image_id)],
            denoiser, schedule, inaad_cfg, batch_size=1,
            collect_levels=collect_levels)
        return {"row": row, "report": report,
                "seconds": time.perf_counter() - t0}

    if jobs == 1:
        results.extend(score_one(item) for item in pending)
    else:
        from concurrent.futures import ThreadPoolExecutor

        with ThreadPoolExecutor(max_workers=jobs) as pool:
            results.extend(pool.map(score_one, pending))
    return results


def cmd_score(cfg: RunConfig, checkpoint: str, manifest: str, out: str | None,
              jobs: int, deterministic: bool, ablate: bool) -> int:
    if jobs < 1:
        raise ConfigError("--jobs must be >= 1")
    out_dir = Path(out) if out else cfg.output_dir / "score"
    out_dir.mkdir(parents=True, exist_ok=True)
    heat_dir = out_dir / "heatmaps"
    heat_dir.mkdir(exist_ok=True)

    loaded = load_checkpoint(_require_file(Path(checkpoint), "checkpoint"))
    schedule = loaded.schedule
    manifest_path = _require_file(Path(manifest), "manifest")
    rows = load_manifest(manifest_path)
    base_dir = manifest_path.parent
    inaad_cfg = cfg.inaad_config()
    bad_levels = [s for s in inaad_cfg.noise_levels if s > schedule.num_steps]
    if bad_levels:
        raise ConfigError(f"noise levels {bad_levels} exceed the "
                          f"{schedule.num_steps}-step schedule")

    if deterministic:
        jobs = 1
    results = _score_rows(rows, base_dir, loaded.denoiser, schedule, inaad_cfg,
                          cfg.seed, jobs, collect_levels=ablate)
    ablation_rows = []
    if ablate:
        flipped = replace(inaad_cfg, inpainting=not inaad_cfg.inpainting)
        flip_results = _score_rows(rows, base_dir, loaded.denoiser, schedule,
                                   flipped, cfg.seed, jobs, collect_levels=True)
        for res, variant in ((results, inaad_cfg), (flip_results, flipped)):
            for item in res:
                if "error" in item:
                    continue
                report = item["report"]
                for level, sim in sorted(report.level_similarities.items()):
                    ablation_rows.append((item["row"], variant.inpainting,
                                          str(level), sim))
                ablation_rows.append((item["row"], variant.inpainting,
                                      "aggregate", report.similarity))

    results.sort(key=lambda item: item["row"].image_id)
    errors = 0
    with open(out_dir / "scores.csv", "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["image_id", "group_label", "similarity",
                         "anomaly_score", "seconds"])
        for item in results:
            row = item["row"]
            if "error" in item:
                errors += 1
                writer.writerow([row.image_id, row.group, "error", "error",
                                 "0.000"])
                continue
            report = item["report"]
            seconds = 0.0 if deterministic else item["seconds"]
            writer.writerow([row.image_id, row.group,
                             f"{report.similarity:.8f}",
                             f"{report.anomaly_score:.8f}",
                             f"{seconds:.3f}"])
            save_image(heat_dir / f"{row.image_id}_recon.png",
                       report.reconstruction)
            # Display heatmap: 3x3 box blur, |diff| range [0, 2] onto 8 bits.
            save_image(heat_dir / f"{row.image_id}_heatmap.png",
                       _smooth_heatmap(report) - 1.0)
            np.save(heat_dir / f"{row.image_id}_heatmap.npy",
                    report.heatmap.astype(np.float32))

    if ablate:
        with open(out_dir / "ablation.csv", "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["image_id", "group_label", "inpainting", "level",
                             "similarity"])
            ablation_rows.sort(key=lambda r: (r[0].image_id, not r[1], r[2]))
            for row, inpaint, level, sim in ablation_rows:
                writer.writerow([row.image_id, row.group,
                                 "on" if inpaint else "off",
                                 level, f"{sim:.8f}"])
        meta = {
            "corruption": inaad_cfg.corruption,
            "metric": inaad_cfg.metric,
            "noise_levels": list(inaad_cfg.noise_levels),
            "config_inpainting": inaad_cfg.inpainting,
        }
        (out_dir / "ablation_meta.json").write_text(
            json.dumps(meta, sort_keys=True, indent=1) + "\n")

    if errors:
        print(f"{errors} of {len(results)} images failed; see scores.csv",
              file=sys.stderr)
        return 1
    print(f"scored {len(results)} images into {out_dir}")
    return 0


def _smooth_heatmap(report) -> np.ndarray:
    from scipy import ndimage

    return ndimage.uniform_filter(report.heatmap, size=3, mode="constant")


# ----------------------------------------------------------------- eval --

def _read_scores(path: Path) -> LabeledScores:
    scores, labels, groups = [], [], []
    skipped = 0
    with open(path, newline="") as fh:
        for rec in csv.DictReader(fh):
            if rec["similarity"] == "error":
                skipped += 1
                continue
            scores.append(float(rec["anomaly_score"]))
            labels.append(0 if rec["group_label"] == "normal" else 1)
            groups.append(rec["group_label"])
    if skipped:
        warnings.warn(f"{skipped} error rows in {path} were skipped")
    if not scores:
        raise ConfigError(f"no usable score rows in {path}")
    arr_labels = np.asarray(labels)
    if arr_labels.sum() == 0:
        raise ConfigError("scores contain no anomalous (OOD) rows")
    if arr_labels.sum() == len(labels):
        raise ConfigError("scores contain no normal (ID) rows")
    return LabeledScores(np.asarray(scores), arr_labels, tuple(groups))


def cmd_eval(scores_path: str, out: str | None, ablate: bool) -> int:
    scores_file = _require_file(Path(scores_path), "scores CSV")
    out_dir = Path(out) if out else scores_file.parent
    out_dir.mkdir(parents=True, exist_ok=True)

    labeled = _read_scores(scores_file)
    with open(out_dir / "metrics.csv", "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["group", "n", "auroc", "ap"])
        for row in evaluate_groups(labeled):
            writer.writerow([row.group, row.n, f"{row.auroc:.6f}",
                             f"{row.ap:.6f}"])

    curve = roc_curve(labeled)
    with open(out_dir / "roc.csv", "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["threshold", "fpr", "tpr"])
        for thr, fpr, tpr in zip(curve.thresholds, curve.fpr, curve.tpr):
            writer.writerow([f"{thr:.8g}", f"{fpr:.8f}", f"{tpr:.8f}"])

    if ablate:
        _eval_ablation(scores_file.parent, out_dir)
    print(f"metric tables written to {out_dir}")
    return 0


def _eval_ablation(score_dir: Path, out_dir: Path) -> None:
    from .metrics import auroc, average_precision

    ablation_file = score_dir / "ablation.csv"
    if not ablation_file.is_file():
        raise ConfigError(
            "ablation.csv not found; rerun `inaad score --ablate` first")
    meta_file = score_dir / "ablation_meta.json"
    meta = json.loads(meta_file.read_text()) if meta_file.is_file() else {}

    cells: dict[tuple[str, str], list[tuple[float, int]]] = {}
    with open(ablation_file, newline="") as fh:
        for rec in csv.DictReader(fh):
            key = (rec["level"], rec["inpainting"])
            label = 0 if rec["group_label"] == "normal" else 1
            cells.setdefault(key, []).append(
                (1.0 - float(rec["similarity"]), label))

    def _level_order(level: str):
        return (1, 0) if level == "aggregate" else (0, int(level))

    with open(out_dir / "ablation_metrics.csv", "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["corruption", "levels", "metric", "inpainting",
                         "auroc", "ap"])
        for (level, inpaint) in sorted(cells, key=lambda k: (_level_order(k[0]),
                                                             k[1] != "on")):
            pairs = cells[(level, inpaint)]
            labeled = LabeledScores(np.asarray([p[0] for p in pairs]),
                                    np.asarray([p[1] for p in pairs]))
            levels_text = ("+".join(str(s) for s in meta.get("noise_levels", []))
                           if level == "aggregate" else level)
            writer.writerow([meta.get("corruption", "?"), levels_text,
                             meta.get("metric", "ssim"), inpaint,
                             f"{auroc(labeled):.6f}",
                             f"{average_precision(labeled):.6f}"])


# ----------------------------------------------------------------- main --

def main(argv: list[str] | None = None) -> int:
    args = _build_parser().parse_args(argv)
    try:
        if args.command == "synth":
            cfg = load_run_config(args.config)
            return cmd_synth(cfg, args.out)
        if args.command == "train":
            cfg = load_run_config(args.config)
            return cmd_train(cfg, args.checkpoint, args.out, args.deterministic)
        if args.command == "score":
            cfg = load_run_config(args.config)
            return cmd_score(cfg, args.checkpoint, args.manifest, args.out,
                             args.jobs, args.deterministic, args.ablate)
        if args.command == "eval":
            return cmd_eval(args.scores, args.out, args.ablate)
        raise AssertionError(args.command)
    except ConfigError as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return 2
    except Exception as exc:  # runtime failure
        print(f"error: {exc}", file=sys.stderr)
        return 1


def entrypoint() -> None:
    sys.exit(main())


if __name__ == "__main__":
    entrypoint()
