"""Command-line front end exposing every pipeline stage.

Exit codes: 0 success, 2 usage/parse error, 3 data invariant violation,
4 verification failure.
"""

from __future__ import annotations

import csv
import functools
import math
import sys
import time
from pathlib import Path

import click
import numpy as np

from . import fileio
from .decode import QUAD, RBOX, DecodeConfig, DecodeStats, DenseOutputs, decode as decode_maps
from .errors import FileFormatError, TextDetError
from .geometry import Detection
from .labelgen import LabelConfig, generate_quad_maps, generate_rbox_maps, generate_score_map
from .losses import LossConfig
from .metrics import evaluate
from .net import NetConfig
from .nms import MergeConfig, MergeStats, locality_aware_nms, standard_nms
from .synth import SceneConfig, generate_scene
from .training import AdamState, load_checkpoint, save_checkpoint, train
from .verify import run_all

EXIT_PARSE = 2
EXIT_DATA = 3
EXIT_VERIFY = 4


def pipeline_command(fn):
    """Map package exceptions onto the uniform exit codes."""

    @functools.wraps(fn)
    def wrapper(*args, **kwargs):
        try:
            return fn(*args, **kwargs)
        except FileFormatError as exc:
            click.echo(f"error: {exc}", err=True)
            sys.exit(EXIT_PARSE)
        except TextDetError as exc:
            click.echo(f"error: {exc}", err=True)
            sys.exit(EXIT_DATA)

    return wrapper


def parse_size(value: str) -> tuple[int, int]:
    try:
        h, w = value.lower().split("x")
        return int(h), int(w)
    except ValueError:
        raise click.BadParameter("expected HxW, e.g. 128x128")


@click.group()
def main():
    """Dense rotated-text detection pipeline."""


@main.command("labelgen")
@click.option("--gt", "gt_path", required=True, type=click.Path(exists=True))
@click.option("--size", required=True, help="image size as HxW")
@click.option("--stride", default=4, show_default=True)
@click.option("--shrink-ratio", default=0.3, show_default=True)
@click.option("--head", type=click.Choice([RBOX, QUAD]), default=RBOX, show_default=True)
@click.option("--out", "out_dir", required=True, type=click.Path())
@pipeline_command
def cmd_labelgen(gt_path, size, stride, shrink_ratio, head, out_dir):
    """Write score.tnsr, geometry.tnsr and mask.tnsr for a quad file."""
    h, w = parse_size(size)
    quads = [q for q, _ in fileio.read_quad_file(gt_path)]
    cfg = LabelConfig(image_height=h, image_width=w, output_stride=stride,
                      shrink_ratio=shrink_ratio)
    score = generate_score_map(quads, cfg)
    if head == RBOX:
        maps = generate_rbox_maps(quads, cfg)
        geometry = np.concatenate([maps.d, maps.theta[None]], axis=0)
        mask = maps.valid_mask
    else:
        maps = generate_quad_maps(quads, cfg)
        geometry = maps.offsets
        mask = maps.valid_mask
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    fileio.write_tensor(out / "score.tnsr", score)
    fileio.write_tensor(out / "geometry.tnsr", geometry)
    fileio.write_tensor(out / "mask.tnsr", mask.astype(np.float32))
    click.echo(f"wrote labels for {len(quads)} quads to {out}")


@main.command("decode")
@click.option("--score", "score_path", required=True, type=click.Path(exists=True))
@click.option("--geometry", "geo_path", required=True, type=click.Path(exists=True))
@click.option("--stride", default=4, show_default=True)
@click.option("--head", type=click.Choice([RBOX, QUAD]), default=RBOX, show_default=True)
@click.option("--threshold", default=0.8, show_default=True)
@click.option("--out", "out_path", required=True, type=click.Path())
@pipeline_command
def cmd_decode(score_path, geo_path, stride, head, threshold, out_path):
    """Threshold dense maps into scored quad candidates."""
    score = fileio.read_tensor(score_path).astype(np.float64)
    geometry = fileio.read_tensor(geo_path).astype(np.float64)
    outputs = DenseOutputs(score=score, geometry=geometry, stride=stride, head=head)
    stats = DecodeStats()
    dets = decode_maps(outputs, DecodeConfig(score_threshold=threshold), stats)
    fileio.write_quad_file(out_path, dets)
    click.echo(f"decoded {stats.emitted} candidates "
               f"({stats.skipped_malformed} malformed cells skipped)")


def _read_detections(path) -> list[Detection]:
    dets = []
    for i, (quad, score) in enumerate(fileio.read_quad_file(path), 1):
        if score is None:
            raise FileFormatError(f"line {i}: detection record needs a 9th score field")
        dets.append(Detection(quad=quad, score=score))
    return dets


@main.command("nms")
@click.option("--in", "in_path", required=True, type=click.Path(exists=True))
@click.option("--out", "out_path", required=True, type=click.Path())
@click.option("--merge-iou", default=0.3, show_default=True)
@click.option("--final-iou", default=0.2, show_default=True)
@click.option("--stats", "stats_path", type=click.Path(), default=None)
@pipeline_command
def cmd_nms(in_path, out_path, merge_iou, final_iou, stats_path):
    """Locality-aware NMS over a row-ordered detection file."""
    dets = _read_detections(in_path)
    cfg = MergeConfig(merge_iou_threshold=merge_iou, final_nms_iou_threshold=final_iou)
    kept, stats = locality_aware_nms(dets, cfg)
    fileio.write_quad_file(out_path, kept)
    if stats_path:
        with open(stats_path, "w", newline="") as fh:
            wr = csv.writer(fh)
            wr.writerow(["weighted_merge_calls", "pairwise_iou_evaluations"])
            wr.writerow([stats.weighted_merge_calls, stats.pairwise_iou_evaluations])
    click.echo(f"{len(dets)} candidates -> {len(kept)} detections "
               f"({stats.weighted_merge_calls} merges)")


def clustered_candidates(n: int, clusters: int, seed: int) -> list[Detection]:
    """n jittered duplicates spread over well-separated clusters, in
    row-first order (cluster-contiguous)."""
    rng = np.random.default_rng(seed)
    per = n // clusters
    side = int(math.ceil(math.sqrt(clusters)))
    dets = []
    for c in range(clusters):
        cx = 200.0 * (c % side) + 50.0
        cy = 200.0 * (c // side) + 50.0
        base = np.array([[cx - 20, cy - 8], [cx + 20, cy - 8],
                         [cx + 20, cy + 8], [cx - 20, cy + 8]])
        count = per + (1 if c < n - per * clusters else 0)
        for _ in range(count):
            jitter = rng.uniform(-0.5, 0.5, size=(4, 2))
            dets.append(Detection(quad=base + jitter, score=float(rng.uniform(0.8, 1.0))))
    return dets


@main.command("bench-nms")
@click.option("--sizes", default="1000,2000,4000,8000", show_default=True)
@click.option("--clusters", default=64, show_default=True)
@click.option("--seed", default=0, show_default=True)
@click.option("--out", "out_path", required=True, type=click.Path())
@pipeline_command
def cmd_bench_nms(sizes, clusters, seed, out_path):
    """Comparison-count benchmark: locality-aware vs naive standard NMS."""
    rows = []
    for n in (int(s) for s in sizes.split(",")):
        dets = clustered_candidates(n, clusters, seed)
        t0 = time.perf_counter()
        _, stats = locality_aware_nms(dets)
        wall_ms = (time.perf_counter() - t0) * 1000.0
        t0 = time.perf_counter()
        standard_nms(dets, 0.2)
        naive_ms = (time.perf_counter() - t0) * 1000.0
        rows.append([n, stats.weighted_merge_calls, stats.pairwise_iou_evaluations,
                     f"{wall_ms:.3f}", f"{naive_ms:.3f}"])
        click.echo(f"n={n}: lanms {wall_ms:.1f} ms, naive {naive_ms:.1f} ms")
    with open(out_path, "w", newline="") as fh:
        wr = csv.writer(fh)
        wr.writerow(["n", "weighted_merge_calls", "pairwise_iou_evaluations",
                     "wall_ms", "naive_wall_ms"])
        wr.writerows(rows)


def make_dataset(count: int, seed: int, image_size: int, max_boxes: int = 3):
    cfg = SceneConfig(image_size=image_size, seed=seed, max_boxes=max_boxes)
    return [generate_scene(cfg, i) for i in range(count)]


@main.command("train")
@click.option("--steps", default=1000, show_default=True)
@click.option("--seed", default=42, show_default=True)
@click.option("--batch", default=8, show_default=True)
@click.option("--head", type=click.Choice([RBOX, QUAD]), default=RBOX, show_default=True)
@click.option("--lr", default=1e-3, show_default=True)
@click.option("--images", default=256, show_default=True)
@click.option("--image-size", default=128, show_default=True)
@click.option("--out", "out_path", required=True, type=click.Path())
@click.option("--log", "log_path", type=click.Path(), default=None)
@pipeline_command
def cmd_train(steps, seed, batch, head, lr, images, image_size, out_path, log_path):
    """Train on synthetic scenes and write a checkpoint (+ loss log CSV)."""
    dataset = make_dataset(images, seed, image_size)
    net, logs = train(
        dataset,
        net_cfg=NetConfig(head=head, input_size=image_size),
        adam=AdamState(lr=lr),
        steps=steps,
        batch_size=batch,
        seed=seed,
    )
    save_checkpoint(out_path, net)
    if log_path:
        with open(log_path, "w", newline="") as fh:
            wr = csv.writer(fh)
            wr.writerow(["step", "total", "score", "geometry"])
            for e in logs:
                wr.writerow([e.step, f"{e.total:.6f}", f"{e.score:.6f}", f"{e.geometry:.6f}"])
    last = logs[-1] if logs else None
    if last:
        click.echo(f"step {last.step}: total={last.total:.4f} "
                   f"score={last.score:.4f} geometry={last.geometry:.4f}")
    click.echo(f"checkpoint written to {out_path}")


@main.command("synth")
@click.option("--count", default=10, show_default=True)
@click.option("--seed", default=0, show_default=True)
@click.option("--image-size", default=128, show_default=True)
@click.option("--max-boxes", default=3, show_default=True)
@click.option("--out", "out_dir", required=True, type=click.Path())
@pipeline_command
def cmd_synth(count, seed, image_size, max_boxes, out_dir):
    """Write synthetic scenes as PGM images plus gt quad files."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    for i, (image, quads) in enumerate(make_dataset(count, seed, image_size, max_boxes)):
        fileio.write_pgm(out / f"scene_{i:04d}.pgm", image[0])
        fileio.write_quad_file(out / f"scene_{i:04d}.txt", [(q, None) for q in quads])
    click.echo(f"wrote {count} scenes to {out}")


def _paired_files(dets_path, gts_path):
    dp, gp = Path(dets_path), Path(gts_path)
    if dp.is_dir() != gp.is_dir():
        raise FileFormatError("--dets and --gts must both be files or both be directories")
    if not dp.is_dir():
        return [(dp, gp)]
    pairs = []
    for g in sorted(gp.glob("*.txt")):
        d = dp / g.name
        if not d.exists():
            raise FileFormatError(f"missing detection file for {g.name}")
        pairs.append((d, g))
    return pairs


@main.command("eval")
@click.option("--dets", "dets_path", required=True, type=click.Path(exists=True))
@click.option("--gts", "gts_path", required=True, type=click.Path(exists=True))
@click.option("--iou", default=0.5, show_default=True)
@click.option("--per-image", "csv_path", type=click.Path(), default=None)
@pipeline_command
def cmd_eval(dets_path, gts_path, iou, csv_path):
    """Greedy IoU-matched precision/recall/F over detection vs gt files."""
    tp = n_det = n_gt = 0
    rows = []
    for d_file, g_file in _paired_files(dets_path, gts_path):
        dets = _read_detections(d_file)
        gts = [q for q, _ in fileio.read_quad_file(g_file)]
        res = evaluate(dets, gts, iou)
        tp += len(res.matches)
        n_det += len(dets)
        n_gt += len(gts)
        rows.append([g_file.name, f"{res.precision:.6f}", f"{res.recall:.6f}",
                     f"{res.f_score:.6f}"])
    if n_det == 0 and n_gt == 0:
        p = r = f = 1.0
    else:
        p = tp / n_det if n_det else 0.0
        r = tp / n_gt if n_gt else 0.0
        f = 2 * p * r / (p + r) if p + r > 0 else 0.0
    if csv_path:
        with open(csv_path, "w", newline="") as fh:
            wr = csv.writer(fh)
            wr.writerow(["image", "precision", "recall", "f_score"])
            wr.writerows(rows)
    click.echo(f"P={p:.4f} R={r:.4f} F={f:.4f}")


@main.command("check-grads")
@click.option("--seed", default=7, show_default=True)
@pipeline_command
def cmd_check_grads(seed):
    """Finite-difference verification of every analytic gradient."""
    results = run_all(seed)
    failed = False
    for name, err in results.items():
        tol = 1e-2 if name == "network" else 1e-4
        status = "ok" if err < tol else "FAIL"
        if err >= tol:
            failed = True
        click.echo(f"{name:14s} max_rel_error={err:.3e} tol={tol:.0e} {status}")
    if failed:
        sys.exit(EXIT_VERIFY)


def _draw_line(img, p0, p1, color):
    n = int(max(abs(p1[0] - p0[0]), abs(p1[1] - p0[1])) * 2) + 1
    for t in np.linspace(0.0, 1.0, n):
        x = int(round(p0[0] + t * (p1[0] - p0[0])))
        y = int(round(p0[1] + t * (p1[1] - p0[1])))
        if 0 <= y < img.shape[0] and 0 <= x < img.shape[1]:
            img[y, x] = color


@main.command("render")
@click.option("--image", "image_path", required=True, type=click.Path(exists=True))
@click.option("--quads", "quads_path", required=True, type=click.Path(exists=True))
@click.option("--out", "out_path", required=True, type=click.Path())
@pipeline_command
def cmd_render(image_path, quads_path, out_path):
    """Draw quads over a PGM image; edge color encodes the score."""
    gray = fileio.read_pgm(image_path)
    rgb = np.stack([gray, gray, gray], axis=-1)
    records = fileio.read_quad_file(quads_path)
    max_score = max((s for _, s in records if s is not None), default=1.0) or 1.0
    for quad, score in records:
        frac = 1.0 if score is None else min(score / max_score, 1.0)
        color = np.array([1.0 - frac, frac, 0.0])  # red (low) -> green (high)
        for i in range(4):
            _draw_line(rgb, quad[i], quad[(i + 1) % 4], color)
    fileio.write_ppm(out_path, rgb)
    click.echo(f"rendered {len(records)} quads to {out_path}")


if __name__ == "__main__":
    main()
