"""End-to-end sample generation, on-disk layout, and the manifest read path.

Layout:

    out/
      i_s/ i_t/ mask_s/ mask_t/ bin_s/ bin_t/ t_b/   one PNG per sample each
      manifest.jsonl                                 one JSON object per line

Every stochastic choice for sample i comes from the (seed, i) stream, so the
dataset content is a pure function of the config regardless of worker count
or scheduling. The manifest carries full provenance (seed, camera, all
draws), letting any sample be regenerated in isolation.
"""

from __future__ import annotations

import json
import multiprocessing
import time
import traceback
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from PIL import Image

from . import compositor, sampler, textraster, warp
from .compositor import BackgroundPool, RenderedSample, WarpedText, composite_pair
from .errors import (
    ConfigurationError,
    DegenerateProjectionError,
    GenerationError,
    GlyphCoverageError,
    ManifestError,
    ResampleExhaustedError,
)
from .geometry3d import CameraModel, OrderPolicy, RotationSpec, compose_rotation, \
    encode_normal, plane_normal
from .sampler import SampleKind, rng_for_sample
from .textraster import FontSet, WordCorpus
from .warp import ArcParams, BendParams

IMAGE_KEYS = ("i_s", "i_t", "mask_s", "mask_t", "bin_s", "bin_t", "t_b")
MANIFEST_NAME = "manifest.jsonl"

MAX_ROTATION_ATTEMPTS = 20
MAX_FONT_ATTEMPTS = 10
FONT_RESAMPLE_TAG = 2000

INK_THRESHOLD = 127


@dataclass(frozen=True)
class DatasetConfig:
    corpus_path: str
    fonts_dir: str
    backgrounds_dir: str
    out_dir: str
    count: int = 1000
    seed: int = 0
    bend_fraction: float = 0.0
    canvas_w: int = 256
    canvas_h: int = 64
    camera_f: float | None = None
    camera_d: float | None = None
    workers: int = 1

    def __post_init__(self):
        if self.count < 1:
            raise ConfigurationError(f"count must be >= 1, got {self.count}")
        if not 0.0 <= self.bend_fraction <= 1.0:
            raise ConfigurationError(
                f"bend_fraction must lie in [0, 1], got {self.bend_fraction}")
        if self.canvas_w < 4 * self.canvas_h:
            raise ConfigurationError(
                f"canvas must be a word crop with W >= 4*H, got "
                f"{self.canvas_w}x{self.canvas_h}")
        if self.workers < 1:
            raise ConfigurationError(f"workers must be >= 1, got {self.workers}")

    def camera(self) -> CameraModel:
        if self.camera_f is None and self.camera_d is None:
            return CameraModel.for_canvas(self.canvas_w, self.canvas_h)
        f = self.camera_f if self.camera_f is not None else self.camera_d
        d = self.camera_d if self.camera_d is not None else self.camera_f
        return CameraModel(f, d)

    def id_width(self) -> int:
        return max(6, len(str(self.count - 1)))


@dataclass
class Resources:
    fonts: FontSet
    corpus: WordCorpus
    pool: BackgroundPool
    camera: CameraModel


def load_resources(cfg: DatasetConfig) -> Resources:
    fonts = textraster.load_fonts(cfg.fonts_dir)
    corpus = textraster.load_corpus(cfg.corpus_path)
    if len(set(corpus.words)) < 2:
        raise ConfigurationError(
            "corpus needs at least two distinct words to build pairs")
    pool = BackgroundPool.from_dir(cfg.backgrounds_dir)
    return Resources(fonts, corpus, pool, cfg.camera())


@dataclass
class SampleRecord:
    """One manifest row: all draws plus the per-sample file references."""

    id: str
    text_s: str
    text_t: str
    font_id: str
    fill_rgb: tuple
    gamma: float
    theta: float
    phi: float
    order_policy: str | None
    axis_combination: str | None
    arc_angle: int
    arc_direction: str
    kind: str
    sweep_angle: float | None
    bg_source: str
    camera_f: float
    camera_d: float
    seed: int
    files: dict = field(default_factory=dict)

    def rotation_spec(self) -> RotationSpec:
        policy = OrderPolicy(self.order_policy) if self.order_policy else OrderPolicy.NEAR_FIELD
        return RotationSpec(self.gamma, self.theta, self.phi, policy)

    def expected_flat_color(self) -> tuple:
        return encode_normal(plane_normal(compose_rotation(self.rotation_spec())))

    def to_json_dict(self) -> dict:
        return {
            "id": self.id,
            "text_s": self.text_s,
            "text_t": self.text_t,
            "font_id": self.font_id,
            "fill_rgb": list(self.fill_rgb),
            "gamma": self.gamma,
            "theta": self.theta,
            "phi": self.phi,
            "order_policy": self.order_policy,
            "axis_combination": self.axis_combination,
            "arc_angle": self.arc_angle,
            "arc_direction": self.arc_direction,
            "kind": self.kind,
            "sweep_angle": self.sweep_angle,
            "bg_source": self.bg_source,
            "camera_f": self.camera_f,
            "camera_d": self.camera_d,
            "seed": self.seed,
            "files": dict(self.files),
        }

    @classmethod
    def from_json_dict(cls, d: dict) -> "SampleRecord":
        try:
            return cls(
                id=str(d["id"]),
                text_s=d["text_s"],
                text_t=d["text_t"],
                font_id=d["font_id"],
                fill_rgb=tuple(int(v) for v in d["fill_rgb"]),
                gamma=float(d["gamma"]),
                theta=float(d["theta"]),
                phi=float(d["phi"]),
                order_policy=d["order_policy"],
                axis_combination=d["axis_combination"],
                arc_angle=int(d["arc_angle"]),
                arc_direction=d["arc_direction"],
                kind=d["kind"],
                sweep_angle=None if d["sweep_angle"] is None else float(d["sweep_angle"]),
                bg_source=d["bg_source"],
                camera_f=float(d["camera_f"]),
                camera_d=float(d["camera_d"]),
                seed=int(d["seed"]),
                files=dict(d["files"]),
            )
        except (KeyError, TypeError, ValueError) as exc:
            raise ManifestError(f"malformed manifest record: {exc}") from exc


def _axis_combination_name(spec: RotationSpec) -> str:
    parts = [axis for axis in ("theta", "phi", "gamma")
             if getattr(spec, {"theta": "pitch_theta", "phi": "yaw_phi",
                               "gamma": "roll_gamma"}[axis]) != 0.0]
    return "_".join(parts)


def _draw_distinct_words(rng, corpus: WordCorpus) -> tuple[str, str]:
    text_s = corpus[int(rng.integers(0, len(corpus)))]
    for _ in range(1000):
        text_t = corpus[int(rng.integers(0, len(corpus)))]
        if text_t != text_s:
            return text_s, text_t
    raise ConfigurationError("could not draw two distinct words from the corpus")


def _render_flat(text: str, font_id: str, fonts: FontSet, arc: ArcParams,
                 rotation_matrix, cam: CameraModel, w: int, h: int) -> np.ndarray:
    mask = textraster.rasterize(text, font_id, fonts, w, h)
    mask = warp.arc_warp(mask, arc)
    alpha, _ = warp.flat_perspective_warp(mask.alpha, rotation_matrix, cam)
    return alpha

def _render_bent(text: str, font_id: str, fonts: FontSet, arc: ArcParams,
                 sweep: float, cam: CameraModel, w: int, h: int):
    mask = textraster.rasterize(text, font_id, fonts, w, h)
    mask = warp.arc_warp(mask, arc)
    params = BendParams(sweep, per_char_count=len(mask.per_glyph_boxes))
    coverage, normal_rgb, _ = warp.cylinder_bend(mask, params, cam)
    return coverage, normal_rgb


def _ink_bbox(alpha: np.ndarray) -> tuple[int, int, int, int]:
    cols = np.flatnonzero(alpha.any(axis=0))
    rows = np.flatnonzero(alpha.any(axis=1))
    if cols.size == 0:
        return 0, 0, alpha.shape[1], alpha.shape[0]
    return int(cols[0]), int(rows[0]), int(cols[-1]) + 1, int(rows[-1]) + 1


def generate_sample(cfg: DatasetConfig, index: int,
                    resources: Resources | None = None
                    ) -> tuple[SampleRecord, RenderedSample]:
    """Render one paired sample.

    Draw order on the (seed, index) stream: kind, the two words, font, arc
    parameters, rotation spec or bend sweep, background crop, fill color.
    Degenerate projections re-draw the rotation (or sweep) from a fresh
    substream, up to MAX_ROTATION_ATTEMPTS; an uncoverable word re-draws the
    font the same way.
    """
    res = resources if resources is not None else load_resources(cfg)
    w, h = cfg.canvas_w, cfg.canvas_h
    cam = res.camera
    rng = rng_for_sample(cfg.seed, index)

    kind = sampler.sample_kind(rng, cfg.bend_fraction)
    text_s, text_t = _draw_distinct_words(rng, res.corpus)

    font_id = sampler.sample_font(rng, res.fonts)
    for attempt in range(MAX_FONT_ATTEMPTS):
        if res.fonts.covers(font_id, text_s) and res.fonts.covers(font_id, text_t):
            break
        font_rng = rng_for_sample(cfg.seed, index, FONT_RESAMPLE_TAG, attempt)
        font_id = sampler.sample_font(font_rng, res.fonts)
    else:
        raise GlyphCoverageError(
            f"no font covering {text_s!r}/{text_t!r} in {MAX_FONT_ATTEMPTS} draws")

    arc = sampler.sample_arc(rng)
    spec = sweep = None
    if kind is SampleKind.FLAT_ROTATED:
        spec = sampler.build_rotation_spec(rng)
    else:
        sweep = sampler.sample_sweep(rng)

    for attempt in range(MAX_ROTATION_ATTEMPTS):
        try:
            if kind is SampleKind.FLAT_ROTATED:
                matrix = compose_rotation(spec)
                alpha_s = _render_flat(text_s, font_id, res.fonts, arc, matrix, cam, w, h)
                alpha_t = _render_flat(text_t, font_id, res.fonts, arc, matrix, cam, w, h)
                color = encode_normal(plane_normal(matrix))
                normal_s = np.zeros((h, w, 3), dtype=np.uint8)
                normal_s[alpha_s > INK_THRESHOLD] = color
                normal_t = np.zeros((h, w, 3), dtype=np.uint8)
                normal_t[alpha_t > INK_THRESHOLD] = color
            else:
                alpha_s, normal_s = _render_bent(text_s, font_id, res.fonts, arc, sweep, cam, w, h)
                alpha_t, normal_t = _render_bent(text_t, font_id, res.fonts, arc, sweep, cam, w, h)
            break
        except DegenerateProjectionError:
            retry_rng = rng_for_sample(cfg.seed, index, sampler.RESAMPLE_TAG, attempt)
            if kind is SampleKind.FLAT_ROTATED:
                spec = sampler.build_rotation_spec(retry_rng)
            else:
                sweep = sampler.sample_sweep(retry_rng)
    else:
        raise ResampleExhaustedError(
            f"sample {index}: no valid rotation in {MAX_ROTATION_ATTEMPTS} attempts")

    bg, bg_source = compositor.crop_background_with_source(res.pool, rng, w, h)
    fill = sampler.sample_fill(rng, bg, _ink_bbox(alpha_s))

    if kind is SampleKind.FLAT_ROTATED:
        transform_key = (spec.roll_gamma, spec.pitch_theta, spec.yaw_phi,
                         spec.order_policy.value)
    else:
        transform_key = ("bend", sweep)
    style_key = (kind.value, font_id, fill, arc.total_angle, arc.direction.value,
                 transform_key, cam.focal_length, cam.plane_distance)

    rendered = composite_pair(
        WarpedText(alpha_s, normal_s, style_key),
        WarpedText(alpha_t, normal_t, style_key),
        (font_id, fill),
        bg,
    )

    sample_id = str(index).zfill(cfg.id_width())
    record = SampleRecord(
        id=sample_id,
        text_s=text_s,
        text_t=text_t,
        font_id=font_id,
        fill_rgb=tuple(fill),
        gamma=spec.roll_gamma if spec else 0.0,
        theta=spec.pitch_theta if spec else 0.0,
        phi=spec.yaw_phi if spec else 0.0,
        order_policy=spec.order_policy.value if spec else None,
        axis_combination=_axis_combination_name(spec) if spec else None,
        arc_angle=arc.total_angle,
        arc_direction=arc.direction.value,
        kind=kind.value,
        sweep_angle=sweep,
        bg_source=bg_source,
        camera_f=cam.focal_length,
        camera_d=cam.plane_distance,
        seed=cfg.seed,
        files={key: f"{key}/{sample_id}.png" for key in IMAGE_KEYS},
    )
    return record, rendered


def write_sample(out_dir, record: SampleRecord, rendered: RenderedSample) -> None:
    root = Path(out_dir)
    images = rendered.as_dict()
    for key in IMAGE_KEYS:
        arr = images[key]
        mode = "L" if arr.ndim == 2 else "RGB"
        Image.fromarray(arr, mode=mode).save(
            root / record.files[key], compress_level=6)


_WORKER_CFG: DatasetConfig | None = None
_WORKER_RES: Resources | None = None


def _init_worker(cfg: DatasetConfig) -> None:
    global _WORKER_CFG, _WORKER_RES
    _WORKER_CFG = cfg
    _WORKER_RES = load_resources(cfg)


def _run_index(index: int):
    try:
        record, rendered = generate_sample(_WORKER_CFG, index, _WORKER_RES)
        write_sample(_WORKER_CFG.out_dir, record, rendered)
        return index, record.to_json_dict(), None
    except Exception:
        return index, None, traceback.format_exc()


def generate_dataset(cfg: DatasetConfig) -> dict:
    """Generate cfg.count paired samples and write the manifest.

    Returns a summary with per-axis-combination, per-arc-level, and per-kind
    counts. Partial failures abort with a GenerationError listing the failed
    indices; nothing is written to the manifest in that case.
    """
    start = time.monotonic()
    load_resources(cfg)  # fail fast on unusable resources
    root = Path(cfg.out_dir)
    for key in IMAGE_KEYS:
        (root / key).mkdir(parents=True, exist_ok=True)

    indices = range(cfg.count)
    results = {}
    failures = []
    if cfg.workers == 1:
        _init_worker(cfg)
        for i in indices:
            idx, record_dict, err = _run_index(i)
            if err is None:
                results[idx] = record_dict
            else:
                failures.append((idx, err))
    else:
        ctx = multiprocessing.get_context("fork")
        with ctx.Pool(cfg.workers, initializer=_init_worker, initargs=(cfg,)) as pool:
            for idx, record_dict, err in pool.imap_unordered(_run_index, indices, chunksize=8):
                if err is None:
                    results[idx] = record_dict
                else:
                    failures.append((idx, err))
    if failures:
        raise GenerationError(sorted(failures))

    with open(root / MANIFEST_NAME, "w", encoding="utf-8") as fh:
        for i in sorted(results):
            fh.write(json.dumps(results[i], sort_keys=True) + "\n")

    per_axis = {}
    per_arc = {}
    per_kind = {}
    for d in results.values():
        axis = d["axis_combination"] or "none"
        per_axis[axis] = per_axis.get(axis, 0) + 1
        per_arc[str(d["arc_angle"])] = per_arc.get(str(d["arc_angle"]), 0) + 1
        per_kind[d["kind"]] = per_kind.get(d["kind"], 0) + 1
    return {
        "count": cfg.count,
        "out_dir": str(root),
        "per_axis_combination": dict(sorted(per_axis.items())),
        "per_arc_level": dict(sorted(per_arc.items())),
        "per_kind": dict(sorted(per_kind.items())),
        "workers": cfg.workers,
        "elapsed_seconds": round(time.monotonic() - start, 3),
    }


def read_manifest(dataset_dir) -> list:
    """Parse manifest.jsonl into SampleRecords, strictly. Corrupt lines raise
    ManifestError naming the line number; semantic checks (angle/axis
    consistency, file existence) live in the auditor."""
    root = Path(dataset_dir)
    path = root / MANIFEST_NAME
    if not path.is_file():
        raise ManifestError(f"no {MANIFEST_NAME} in {root}")
    records = []
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            try:
                d = json.loads(line)
            except json.JSONDecodeError as exc:
                raise ManifestError(f"{path.name}:{lineno}: invalid JSON: {exc}") from exc
            try:
                records.append(SampleRecord.from_json_dict(d))
            except ManifestError as exc:
                raise ManifestError(f"{path.name}:{lineno}: {exc}") from exc
    return records
