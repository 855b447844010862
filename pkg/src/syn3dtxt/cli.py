"""Command-line front end: gen, preview, validate, stats.

Exit codes: 0 success / audit pass, 1 audit fail, 2 usage or resource error.
A JSON config file (see README) can seed any gen option; flags win. The
default config path comes from the SYN3DTXT_CONFIG environment variable.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from pathlib import Path

import numpy as np

from . import audit as audit_mod
from . import compositor, sampler, textraster, warp
from .dataset_io import IMAGE_KEYS, DatasetConfig, generate_dataset
from .errors import Syn3DTxtError
from .geometry3d import (
    CameraModel,
    OrderPolicy,
    RotationSpec,
    compose_rotation,
    encode_normal,
    plane_normal,
    rot_yaw,
)
from .sampler import rng_for_sample

CONFIG_ENV_VAR = "SYN3DTXT_CONFIG"

CONFIG_KEYS = (
    "corpus", "fonts", "backgrounds", "out", "count", "seed", "bend_fraction",
    "canvas_w", "canvas_h", "camera_f", "camera_d", "workers",
)


def _load_config_file(path: str | None) -> dict:
    if path is None:
        path = os.environ.get(CONFIG_ENV_VAR)
    if not path:
        return {}
    p = Path(path)
    if not p.is_file():
        raise Syn3DTxtError(f"config file {p} does not exist")
    try:
        data = json.loads(p.read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise Syn3DTxtError(f"config file {p} is not valid JSON: {exc}") from exc
    unknown = set(data) - set(CONFIG_KEYS)
    if unknown:
        raise Syn3DTxtError(f"config file {p} has unknown keys: {sorted(unknown)}")
    return data


def _build_dataset_config(args) -> DatasetConfig:
    merged = _load_config_file(args.config)
    overrides = {
        "corpus": args.corpus, "fonts": args.fonts, "backgrounds": args.backgrounds,
        "out": args.out, "count": args.count, "seed": args.seed,
        "bend_fraction": args.bend_fraction, "camera_f": args.camera_f,
        "camera_d": args.camera_d, "workers": args.workers,
    }
    if args.canvas:
        try:
            w, h = (int(v) for v in args.canvas.lower().split("x"))
        except ValueError:
            raise Syn3DTxtError(f"--canvas expects WxH, got {args.canvas!r}")
        overrides["canvas_w"], overrides["canvas_h"] = w, h
    for key, value in overrides.items():
        if value is not None:
            merged[key] = value
    missing = [k for k in ("corpus", "fonts", "backgrounds", "out") if k not in merged]
    if missing:
        raise Syn3DTxtError(f"missing required option(s): {', '.join('--' + m for m in missing)}")
    return DatasetConfig(
        corpus_path=merged["corpus"],
        fonts_dir=merged["fonts"],
        backgrounds_dir=merged["backgrounds"],
        out_dir=merged["out"],
        count=int(merged.get("count", 1000)),
        seed=int(merged.get("seed", 0)),
        bend_fraction=float(merged.get("bend_fraction", 0.0)),
        canvas_w=int(merged.get("canvas_w", 256)),
        canvas_h=int(merged.get("canvas_h", 64)),
        camera_f=merged.get("camera_f"),
        camera_d=merged.get("camera_d"),
        workers=int(merged.get("workers", 1)),
    )


def cmd_gen(args) -> int:
    cfg = _build_dataset_config(args)
    summary = generate_dataset(cfg)
    print(f"generated {summary['count']} paired samples in {summary['out_dir']} "
          f"({summary['elapsed_seconds']}s, {summary['workers']} worker(s))")
    for section in ("per_kind", "per_arc_level", "per_axis_combination"):
        parts = ", ".join(f"{k}={v}" for k, v in summary[section].items())
        print(f"  {section.removeprefix('per_')}: {parts}")
    return 0


def cmd_preview(args) -> int:
    from PIL import Image

    fonts = textraster.load_fonts(args.fonts)
    font_id = args.font or fonts[0].font_id
    fonts.by_id(font_id)  # raises KeyError for unknown ids
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    w, h = 256, 64
    cam = CameraModel.for_canvas(w, h)
    rng = rng_for_sample(args.seed, 0)

    if args.backgrounds:
        pool = compositor.BackgroundPool.from_dir(args.backgrounds)
        bg = compositor.crop_background(pool, rng, w, h)
    else:
        bg = np.full((h, w, 3), 96, dtype=np.uint8)

    mask = textraster.rasterize(args.text, font_id, fonts, w, h)
    mask = warp.arc_warp(mask, warp.ArcParams(
        args.arc, warp.ArcDirection(args.arc_direction)))

    if args.sweep is not None:
        params = warp.BendParams(args.sweep, per_char_count=len(mask.per_glyph_boxes))
        alpha, normal_rgb, _ = warp.cylinder_bend(mask, params, cam)
        stations = warp.glyph_stations(mask.per_glyph_boxes, args.sweep)
        print(f"cylinder bend: sweep {args.sweep} deg over {len(stations)} glyph(s)")
        for box, station in zip(mask.per_glyph_boxes, stations):
            n = plane_normal(rot_yaw(station))
            print(f"  {box.char!r} station {station:+7.2f} deg  "
                  f"normal ({n[0]:+.4f}, {n[1]:+.4f}, {n[2]:+.4f})  "
                  f"rgb {encode_normal(n)}")
    else:
        policy = OrderPolicy.NEAR_FIELD if args.policy == "near" else OrderPolicy.FAR_FIELD
        spec = RotationSpec(args.gamma, args.theta, args.phi, policy)
        matrix = compose_rotation(spec)
        alpha, _ = warp.flat_perspective_warp(mask.alpha, matrix, cam)
        n = plane_normal(matrix)
        color = encode_normal(n)
        normal_rgb = np.zeros((h, w, 3), dtype=np.uint8)
        normal_rgb[alpha > 127] = color
        print(f"normal: ({n[0]:+.6f}, {n[1]:+.6f}, {n[2]:+.6f})")
        print(f"rgb: {color}")

    if args.color:
        fill = tuple(int(v) for v in args.color.split(","))
        if len(fill) != 3 or not all(0 <= v <= 255 for v in fill):
            raise Syn3DTxtError(f"--color expects R,G,B bytes, got {args.color!r}")
    else:
        cols = np.flatnonzero(alpha.any(axis=0))
        rows = np.flatnonzero(alpha.any(axis=1))
        region = (int(cols[0]), int(rows[0]), int(cols[-1]) + 1, int(rows[-1]) + 1)
        fill = sampler.sample_fill(rng, bg, region)

    key = ("preview",)
    rendered = compositor.composite_pair(
        compositor.WarpedText(alpha, normal_rgb, key),
        compositor.WarpedText(alpha.copy(), normal_rgb.copy(), key),
        (font_id, fill), bg)
    for name, arr in rendered.as_dict().items():
        mode = "L" if arr.ndim == 2 else "RGB"
        Image.fromarray(arr, mode=mode).save(out / f"{name}.png")
    print(f"wrote {len(IMAGE_KEYS)} images to {out}")
    return 0


def cmd_validate(args) -> int:
    report = audit_mod.audit_dataset(
        args.dataset_dir, pair_fraction=args.pair_fraction, full=args.full)
    if args.report_dir:
        written = audit_mod.write_report_files(report, args.report_dir)
        print(f"report files in {args.report_dir}: {', '.join(written)}", file=sys.stderr)
    if args.json:
        print(json.dumps(report.to_json_dict(), indent=2, sort_keys=True))
    else:
        for check in report.checks:
            print(f"[{'PASS' if check.passed else 'FAIL'}] {check.name}: {check.detail}")
        for record_id, message in report.violations:
            print(f"[VIOLATION] {record_id}: {message}")
        if report.total_violations > len(report.violations):
            print(f"... and {report.total_violations - len(report.violations)} more violations")
        print(f"{'PASS' if report.passed else 'FAIL'}: {report.record_count} records, "
              f"{report.total_violations} violation(s)")
    return 0 if report.passed else 1


def cmd_stats(args) -> int:
    from .dataset_io import read_manifest

    records = read_manifest(args.dataset_dir)
    dists = audit_mod.empirical_distributions(records)
    if args.report_dir:
        shell = audit_mod.AuditReport(distributions=dists, record_count=len(records))
        written = audit_mod.write_report_files(shell, args.report_dir)
        print(f"report files in {args.report_dir}: {', '.join(written)}", file=sys.stderr)
    if args.json:
        print(json.dumps({"record_count": len(records), "distributions": dists},
                         indent=2, sort_keys=True))
        return 0

    def table(title, counts, targets=None):
        total = sum(counts.values()) or 1
        print(title)
        for k in sorted(counts):
            expected = f"  (target {targets[k] * 100:.1f}%)" if targets and k in targets else ""
            print(f"  {k:<18} {counts[k]:>8}  {counts[k] / total * 100:6.2f}%{expected}")

    print(f"records: {len(records)}")
    table("axis combinations:", dists["axis_combinations"], audit_mod.AXIS_TARGETS)
    table("angle magnitudes:", {k: v for k, v in dists["angle_magnitudes"].items()
                                if k != "out_of_range" or v},
          audit_mod.MAGNITUDE_TARGETS)
    table("angle senses:", dists["angle_signs"], audit_mod.SIGN_TARGETS)
    table("arc levels:", dists["arc_levels"], audit_mod.ARC_TARGETS)
    table("kinds:", dists["kinds"])
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="syn3dtxt",
        description="Scene-text training-pair generator with surface-normal "
                    "supervision, plus a dataset conformance auditor.")
    sub = parser.add_subparsers(dest="command", required=True)

    gen = sub.add_parser("gen", help="generate a paired dataset")
    gen.add_argument("--config", help=f"JSON config file (default ${CONFIG_ENV_VAR})")
    gen.add_argument("--corpus", help="word list, one word per line")
    gen.add_argument("--fonts", help="directory of TTF/OTF fonts")
    gen.add_argument("--backgrounds", help="directory of background images")
    gen.add_argument("--out", help="output dataset directory")
    gen.add_argument("--count", type=int, help="number of paired samples")
    gen.add_argument("--seed", type=int, help="master seed (64-bit)")
    gen.add_argument("--bend-fraction", type=float, dest="bend_fraction",
                     help="fraction of cylinder-bent samples (default 0)")
    gen.add_argument("--canvas", help="canvas size as WxH (default 256x64)")
    gen.add_argument("--camera-f", type=float, dest="camera_f", help="focal length, px")
    gen.add_argument("--camera-d", type=float, dest="camera_d", help="plane distance, px")
    gen.add_argument("--workers", type=int, help="parallel worker processes")
    gen.set_defaults(func=cmd_gen)

    preview = sub.add_parser("preview", help="render one sample for inspection")
    preview.add_argument("--text", required=True)
    preview.add_argument("--fonts", required=True, help="directory of fonts")
    preview.add_argument("--font", help="font id (default: first in the set)")
    preview.add_argument("--out", required=True, help="output directory")
    preview.add_argument("--gamma", type=float, default=0.0, help="roll, degrees")
    preview.add_argument("--theta", type=float, default=0.0, help="pitch, degrees")
    preview.add_argument("--phi", type=float, default=0.0, help="yaw, degrees")
    preview.add_argument("--policy", choices=("near", "far"), default="near")
    preview.add_argument("--arc", type=int, choices=(0, 60, 120), default=0)
    preview.add_argument("--arc-direction", dest="arc_direction",
                         choices=("arch_up", "arch_down"), default="arch_up")
    preview.add_argument("--sweep", type=float,
                         help="cylinder-bend sweep in degrees (renders a bent sample)")
    preview.add_argument("--backgrounds", help="background directory (default: flat gray)")
    preview.add_argument("--color", help="fill color as R,G,B (default: sampled)")
    preview.add_argument("--seed", type=int, default=0)
    preview.set_defaults(func=cmd_preview)

    validate = sub.add_parser("validate", help="audit a dataset for conformance")
    validate.add_argument("dataset_dir")
    validate.add_argument("--pair-fraction", type=float, default=0.1,
                          dest="pair_fraction",
                          help="fraction of records for the pair-invariant check")
    validate.add_argument("--full", action="store_true",
                          help="check every record exhaustively")
    validate.add_argument("--json", action="store_true", help="machine-readable report")
    validate.add_argument("--report-dir", dest="report_dir",
                          help="write CSV tables and figures here")
    validate.set_defaults(func=cmd_validate)

    stats = sub.add_parser("stats", help="print empirical distribution tables")
    stats.add_argument("dataset_dir")
    stats.add_argument("--json", action="store_true")
    stats.add_argument("--report-dir", dest="report_dir",
                       help="write CSV tables and figures here")
    stats.set_defaults(func=cmd_stats)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (Syn3DTxtError, OSError, KeyError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
