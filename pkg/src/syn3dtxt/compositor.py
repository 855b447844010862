"""Background crops and final pair compositing.

A rendered pair shares one background crop and one style; the source and
target elements differ only in text content. Compositing never touches
pixels outside the binary ink mask, so the clean background is recoverable
byte-for-byte from either composite.
"""

from __future__ import annotations

import functools
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from PIL import Image

from .errors import ConfigurationError, PairingContractError

IMAGE_EXTENSIONS = {".png", ".jpg", ".jpeg", ".bmp"}

# Minimum |luma(fill) - mean luma(background under the ink)| on the 0..255 scale.
CONTRAST_FLOOR = 30.0

INK_THRESHOLD = 127

CROP_ATTEMPTS = 5


@dataclass(frozen=True)
class BackgroundPool:
    paths: tuple

    def __post_init__(self):
        if not self.paths:
            raise ConfigurationError("background pool is empty")

    def __len__(self):
        return len(self.paths)

    @classmethod
    def from_dir(cls, dir_path) -> "BackgroundPool":
        root = Path(dir_path)
        if not root.is_dir():
            raise ConfigurationError(f"background directory {root} does not exist")
        paths = sorted(
            str(p) for p in root.iterdir() if p.suffix.lower() in IMAGE_EXTENSIONS)
        if not paths:
            raise ConfigurationError(f"no background images in {root}")
        return cls(tuple(paths))


@functools.lru_cache(maxsize=64)
def _load_background(path: str) -> np.ndarray:
    with Image.open(path) as img:
        return np.asarray(img.convert("RGB"), dtype=np.uint8)


def crop_background_with_source(pool: BackgroundPool, rng: np.random.Generator,
                                w: int, h: int) -> tuple[np.ndarray, str]:
    """Random crop scaled to (w, h), plus the source path it was cut from.

    Draw order: source index, crop width, crop x, crop y. Sources smaller
    than the target are upscaled first; undecodable sources are redrawn up
    to CROP_ATTEMPTS times, then fatal."""
    img = None
    source = None
    for _ in range(CROP_ATTEMPTS):
        idx = int(rng.integers(0, len(pool)))
        source = pool.paths[idx]
        try:
            img = _load_background(source)
            break
        except (OSError, ValueError):
            continue
    if img is None:
        raise ConfigurationError(
            f"no decodable background found in {CROP_ATTEMPTS} attempts")

    ih, iw = img.shape[:2]
    scale = max(w / iw, h / ih)
    if scale > 1.0:
        iw, ih = math.ceil(iw * scale), math.ceil(ih * scale)
        img = np.asarray(Image.fromarray(img).resize((iw, ih), Image.BILINEAR))

    max_cw = min(iw, int(ih * w / h))
    min_cw = max(1, math.ceil(0.6 * max_cw))
    crop_w = int(rng.integers(min_cw, max_cw + 1))
    crop_h = min(ih, max(1, round(crop_w * h / w)))
    x0 = int(rng.integers(0, iw - crop_w + 1))
    y0 = int(rng.integers(0, ih - crop_h + 1))
    crop = img[y0:y0 + crop_h, x0:x0 + crop_w]
    if crop.shape[:2] != (h, w):
        crop = np.asarray(Image.fromarray(crop).resize((w, h), Image.BILINEAR))
    return np.ascontiguousarray(crop), source


def crop_background(pool: BackgroundPool, rng: np.random.Generator,
                    w: int, h: int) -> np.ndarray:
    """crop_background_with_source without the provenance."""
    crop, _ = crop_background_with_source(pool, rng, w, h)
    return crop


def luma(rgb) -> np.ndarray:
    """Rec. 601 luminance of (..., 3) values on their native scale."""
    arr = np.asarray(rgb, dtype=np.float64)
    return arr[..., 0] * 0.299 + arr[..., 1] * 0.587 + arr[..., 2] * 0.114


def contrast_ok(fill_rgb, bg_crop, ink_region=None) -> bool:
    """True iff the fill's luma differs from the background's mean luma over
    the ink bbox by at least CONTRAST_FLOOR (0..255 scale)."""
    bg = np.asarray(bg_crop)
    if ink_region is not None:
        x0, y0, x1, y1 = ink_region
        bg = bg[y0:y1, x0:x1]
    mean_luma = float(np.mean(luma(bg.astype(np.float64))))
    return abs(float(luma(np.array(fill_rgb, dtype=np.float64))) - mean_luma) >= CONTRAST_FLOOR


@dataclass
class WarpedText:
    """One warped pair element ready to composite: coverage, per-pixel normal
    colors (already zero outside ink), and the shared-style fingerprint used
    to enforce the pairing contract."""

    alpha: np.ndarray       # (H, W) uint8 coverage
    normal_rgb: np.ndarray  # (H, W, 3) uint8 encoded normals over ink
    style_key: tuple


@dataclass
class RenderedSample:
    """The seven per-pair images, all the same canvas size."""

    i_s: np.ndarray
    i_t: np.ndarray
    mask_s: np.ndarray
    mask_t: np.ndarray
    bin_s: np.ndarray
    bin_t: np.ndarray
    t_b: np.ndarray

    def as_dict(self) -> dict:
        return {
            "i_s": self.i_s, "i_t": self.i_t,
            "mask_s": self.mask_s, "mask_t": self.mask_t,
            "bin_s": self.bin_s, "bin_t": self.bin_t,
            "t_b": self.t_b,
        }


def _blend(fill_rgb, alpha: np.ndarray, bg: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Alpha-over restricted to the binary ink footprint, so pixels outside
    the binary mask stay byte-identical to the background."""
    binary = alpha > INK_THRESHOLD
    a = (alpha.astype(np.float64) / 255.0) * binary
    fill = np.array(fill_rgb, dtype=np.float64)
    out = fill[None, None, :] * a[..., None] + bg.astype(np.float64) * (1.0 - a[..., None])
    return np.floor(out + 0.5).astype(np.uint8), binary


def composite_pair(text_s: WarpedText, text_t: WarpedText, style,
                   bg: np.ndarray) -> RenderedSample:
    """Composite both pair elements over one background crop.

    style is the (font_id, fill_rgb) pair drawn by the sampler. Raises
    PairingContractError when the two elements were not rendered with the
    same transform parameters.
    """
    if text_s.style_key != text_t.style_key:
        raise PairingContractError(
            f"pair elements disagree on style: {text_s.style_key} vs {text_t.style_key}")
    _, fill_rgb = style
    bg = np.asarray(bg, dtype=np.uint8)

    i_s, bin_s = _blend(fill_rgb, text_s.alpha, bg)
    i_t, bin_t = _blend(fill_rgb, text_t.alpha, bg)
    mask_s = np.where(bin_s[..., None], text_s.normal_rgb, 0).astype(np.uint8)
    mask_t = np.where(bin_t[..., None], text_t.normal_rgb, 0).astype(np.uint8)

    return RenderedSample(
        i_s=i_s,
        i_t=i_t,
        mask_s=mask_s,
        mask_t=mask_t,
        bin_s=(bin_s.astype(np.uint8) * 255),
        bin_t=(bin_t.astype(np.uint8) * 255),
        t_b=bg.copy(),
    )
