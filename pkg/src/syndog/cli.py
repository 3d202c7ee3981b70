"""Command-line interface."""

from __future__ import annotations

import logging

import click

from .assets import build_asset_pack
from .dataset import GenerationConfig, generate_dataset
from .metrics import evaluate_dirs, report_to_csv, report_to_json
from .placement import derive_bbox_stats, read_annotations_jsonl, save_stats_csv


@click.group()
@click.option("--verbose", "-v", is_flag=True, help="Enable info logging.")
def main(verbose):
    """Synthetic canine dataset generation and segmentation evaluation."""
    logging.basicConfig(level=logging.INFO if verbose else logging.WARNING)


@main.command()
@click.option("--config", "config_path", required=True, type=click.Path(exists=True),
              help="Generation config (JSON or TOML).")
@click.option("--out", "out_dir", required=True, type=click.Path(), help="Output dataset directory.")
@click.option("--count", type=int, default=None, help="Override sample count.")
@click.option("--seed", type=int, default=None, help="Override RNG seed.")
@click.option("--workers", type=int, default=1, show_default=True, help="Parallel workers.")
def generate(config_path, out_dir, count, seed, workers):
    """Generate a dataset of images, masks, part maps and annotations."""
    from dataclasses import replace

    config = GenerationConfig.from_file(config_path)
    if count is not None:
        config = replace(config, count=count)
    if seed is not None:
        config = replace(config, seed=seed)
    manifest = generate_dataset(config, out_dir, workers=workers)
    click.echo(f"wrote {len(manifest['samples'])} samples to {out_dir}")


@main.group()
def assets():
    """Asset-pack commands."""


@assets.command()
@click.option("--out", "out_dir", required=True, type=click.Path(), help="Pack directory.")
@click.option("--seed", type=int, default=0, show_default=True)
@click.option("--face-budget", type=int, default=4848, show_default=True)
@click.option("--textures", type=int, default=12, show_default=True)
@click.option("--variants", type=int, default=8, show_default=True)
@click.option("--backgrounds", type=int, default=20, show_default=True)
def synth(out_dir, seed, face_budget, textures, variants, backgrounds):
    """Build the procedural asset pack (mesh, PCA spaces, poses, stats,
    backgrounds) plus a ready-to-run config.json."""
    build_asset_pack(
        out_dir,
        seed=seed,
        face_budget=face_budget,
        n_textures=textures,
        n_variants=variants,
        n_backgrounds=backgrounds,
    )
    click.echo(f"asset pack written to {out_dir}")


@main.group()
def stats():
    """Bounding-box statistics commands."""


@stats.command()
@click.option("--annotations", required=True, type=click.Path(exists=True),
              help="JSON-lines joint annotations ({image_w, image_h, joints}).")
@click.option("--out", "out_path", required=True, type=click.Path(), help="Output stats CSV.")
def derive(annotations, out_path):
    """Derive box-size/center statistics from 2D joint annotations."""
    bbox_stats, skipped = derive_bbox_stats(read_annotations_jsonl(annotations))
    save_stats_csv(out_path, bbox_stats)
    click.echo(f"{len(bbox_stats)} records -> {out_path} ({skipped} skipped)")


@main.command("eval")
@click.option("--pred", "pred_dir", required=True, type=click.Path(exists=True),
              help="Predicted heatmaps or masks (PNG or .npy).")
@click.option("--gt", "gt_dir", required=True, type=click.Path(exists=True),
              help="Ground-truth masks.")
@click.option("--t0", type=float, default=0.7, show_default=True,
              help="Initial estimate for iterative thresholding.")
@click.option("--report", "report_path", type=click.Path(), default=None, help="JSON report path.")
@click.option("--csv", "csv_path", type=click.Path(), default=None, help="Per-image CSV path.")
@click.option("--pooled", is_flag=True, help="Also report globally pooled pixel metrics.")
def eval_cmd(pred_dir, gt_dir, t0, report_path, csv_path, pooled):
    """Score binary-segmentation predictions against ground truth."""
    report = evaluate_dirs(pred_dir, gt_dir, t0=t0, pooled=pooled)
    means = report.means
    click.echo(
        f"{len(report.rows)} images: IoU {means['iou']:.4f}  Dice {means['dice']:.4f}  "
        f"F2 {means['fbeta2']:.4f}  Acc {100 * means['accuracy']:.2f}%"
    )
    if report_path:
        report_to_json(report, report_path)
    if csv_path:
        report_to_csv(report, csv_path)


if __name__ == "__main__":
    main()
