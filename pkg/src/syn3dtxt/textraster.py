"""Font loading, word corpus loading, and text-mask rasterization.

A text mask is the flat starting plane for every downstream warp: an
anti-aliased 8-bit coverage image at a fixed canvas size, plus per-glyph
column extents so the bending stage can treat each character separately.
"""

from __future__ import annotations

import functools
import logging
import string
import unicodedata
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from fontTools.ttLib import TTFont, TTLibError
from PIL import Image, ImageDraw, ImageFont

from .errors import ConfigurationError, GlyphCoverageError

logger = logging.getLogger(__name__)

# Every usable font must cover at least this set.
PROBE_CHARS = string.ascii_letters + string.digits

DEFAULT_CHARSET = string.ascii_letters + string.digits
MAX_WORD_LEN = 24

FONT_EXTENSIONS = {".ttf", ".otf", ".ttc"}

# Text is scaled until its ink spans this fraction of the canvas in one
# dimension; keeps warped ink inside the canvas at extreme angles.
FILL_FRACTION = 0.6

MIN_CANVAS = 16

# Adjacent glyph boxes may overlap by kerning up to this fraction of the
# narrower box.
KERN_OVERLAP_FRACTION = 0.30


@dataclass(frozen=True)
class FontEntry:
    font_id: str
    display_name: str
    file_path: str
    codepoints: frozenset = field(repr=False, hash=False, compare=False)


@dataclass(frozen=True)
class FontSet:
    entries: tuple

    def __post_init__(self):
        if not self.entries:
            raise ConfigurationError("font set is empty")

    def __len__(self):
        return len(self.entries)

    def __getitem__(self, i) -> FontEntry:
        return self.entries[i]

    def by_id(self, font_id: str) -> FontEntry:
        for entry in self.entries:
            if entry.font_id == font_id:
                return entry
        raise KeyError(f"unknown font_id {font_id!r}")

    def covers(self, font_id: str, text: str) -> bool:
        cps = self.by_id(font_id).codepoints
        return all(ord(c) in cps for c in text)


@dataclass(frozen=True)
class WordCorpus:
    words: tuple
    dropped: int = 0

    def __post_init__(self):
        if not self.words:
            raise ConfigurationError("word corpus is empty")

    def __len__(self):
        return len(self.words)

    def __getitem__(self, i) -> str:
        return self.words[i]


@dataclass(frozen=True)
class GlyphBox:
    char: str
    x_min: int
    x_max: int

    @property
    def width(self) -> int:
        return self.x_max - self.x_min

    @property
    def center(self) -> float:
        return 0.5 * (self.x_min + self.x_max)


@dataclass
class TextMask:
    """Rasterized text plane: width x height coverage plus glyph layout."""

    width: int
    height: int
    alpha: np.ndarray  # (height, width) uint8
    baseline_y: float
    per_glyph_boxes: list

    def ink_bbox(self) -> tuple[int, int, int, int]:
        """(x0, y0, x1, y1) of pixels with alpha > 0, exclusive upper bounds."""
        cols = np.flatnonzero(self.alpha.any(axis=0))
        rows = np.flatnonzero(self.alpha.any(axis=1))
        if cols.size == 0:
            raise ValueError("mask has no ink")
        return int(cols[0]), int(rows[0]), int(cols[-1]) + 1, int(rows[-1]) + 1

    def ink_mass(self) -> float:
        return float(self.alpha.astype(np.float64).sum())


def check_glyph_layout(boxes) -> None:
    """Boxes must be ordered left-to-right with at most kerning overlap."""
    for a, b in zip(boxes, boxes[1:]):
        if b.center < a.center:
            raise ValueError(f"glyph boxes out of order: {a} before {b}")
        overlap = a.x_max - b.x_min
        limit = KERN_OVERLAP_FRACTION * min(a.width, b.width)
        if overlap > limit:
            raise ValueError(
                f"glyph boxes {a.char!r}/{b.char!r} overlap {overlap}px, "
                f"beyond kerning tolerance {limit:.1f}px")


def _resolve_excess_overlaps(boxes) -> list:
    """Split outline-bbox overlaps beyond the kerning tolerance at their
    midpoint (overhanging glyphs like an italic 'f' can exceed it)."""
    resolved = list(boxes)
    for i in range(len(resolved) - 1):
        a, b = resolved[i], resolved[i + 1]
        overlap = a.x_max - b.x_min
        if overlap <= KERN_OVERLAP_FRACTION * min(a.width, b.width):
            continue
        mid = (b.x_min + a.x_max) // 2
        new_a_max = max(a.x_min + 1, mid)
        new_b_min = min(b.x_max - 1, mid)
        resolved[i] = GlyphBox(a.char, a.x_min, new_a_max)
        resolved[i + 1] = GlyphBox(b.char, new_b_min, b.x_max)
    return resolved


def _font_codepoints(path: Path) -> frozenset:
    tt = TTFont(str(path), lazy=True, fontNumber=0)
    try:
        cmap = tt.getBestCmap()
    finally:
        tt.close()
    return frozenset(cmap.keys())


def _font_display_name(path: Path) -> str:
    try:
        tt = TTFont(str(path), lazy=True, fontNumber=0)
        try:
            name = tt["name"].getDebugName(4)
        finally:
            tt.close()
        if name:
            return name
    except Exception:
        pass
    return path.stem


def load_fonts(dir_path) -> FontSet:
    """Scan a directory for usable outline fonts, in lexicographic file order.

    Fonts that fail to parse or do not cover PROBE_CHARS are skipped with a
    warning; an empty result is a fatal configuration error.
    """
    root = Path(dir_path)
    if not root.is_dir():
        raise ConfigurationError(f"font directory {root} does not exist")
    probe = {ord(c) for c in PROBE_CHARS}
    entries = []
    seen_ids = set()
    candidates = sorted(
        (p for p in root.iterdir() if p.suffix.lower() in FONT_EXTENSIONS),
        key=lambda p: p.name)
    for path in candidates:
        try:
            cps = _font_codepoints(path)
            if not probe <= cps:
                missing = sorted(chr(c) for c in (probe - cps))[:8]
                logger.warning("skipping font %s: missing glyphs %s", path.name, missing)
                continue
            _load_pil_font(str(path), 24)  # must also be renderable by PIL
        except (TTLibError, OSError, ValueError) as exc:
            logger.warning("skipping unusable font %s: %s", path.name, exc)
            continue
        font_id = path.stem
        if font_id in seen_ids:
            font_id = f"{font_id}__{len(entries)}"
        seen_ids.add(font_id)
        entries.append(FontEntry(font_id, _font_display_name(path), str(path), cps))
    if not entries:
        raise ConfigurationError(f"no usable fonts in {root}")
    return FontSet(tuple(entries))


def load_corpus(file_path, charset: str = DEFAULT_CHARSET) -> WordCorpus:
    """Read one word per line, dropping lines that are empty, overlong, or
    contain characters outside the charset. Order is preserved."""
    path = Path(file_path)
    allowed = set(charset)
    words = []
    dropped = 0
    with open(path, "r", encoding="utf-8") as fh:
        for line in fh:
            word = line.strip()
            if word and len(word) <= MAX_WORD_LEN and set(word) <= allowed:
                words.append(word)
            else:
                dropped += 1
    if dropped:
        logger.warning("corpus %s: dropped %d invalid line(s)", path.name, dropped)
    if not words:
        raise ConfigurationError(f"corpus {path} contains no usable words")
    return WordCorpus(tuple(words), dropped)


@functools.lru_cache(maxsize=512)
def _load_pil_font(path: str, size: int) -> ImageFont.FreeTypeFont:
    # basic layout keeps glyph positions consistent with textlength arithmetic
    return ImageFont.truetype(path, size, layout_engine=ImageFont.Layout.BASIC)


def _text_bbox(font: ImageFont.FreeTypeFont, text: str):
    bbox = font.getbbox(text)
    return bbox  # (x0, y0, x1, y1) relative to the left-ascender origin


def _solve_font_size(path: str, text: str, canvas_w: int, canvas_h: int) -> int:
    """Largest integer size whose ink hits the fill fraction in one dimension
    without leaving the canvas."""
    target_w = FILL_FRACTION * canvas_w
    target_h = FILL_FRACTION * canvas_h
    probe = _load_pil_font(path, 100)
    x0, y0, x1, y1 = _text_bbox(probe, text)
    w0, h0 = max(1, x1 - x0), max(1, y1 - y0)
    size = max(4, int(100 * min(target_w / w0, target_h / h0)))

    def ink(sz):
        f = _load_pil_font(path, sz)
        bx0, by0, bx1, by1 = _text_bbox(f, text)
        return bx1 - bx0, by1 - by0

    w, h = ink(size)
    guard = 0
    while (w < target_w and h < target_h) and guard < 64:
        size += 1
        w, h = ink(size)
        guard += 1
    while (w > canvas_w - 2 or h > canvas_h - 2) and size > 4:
        size -= 1
        w, h = ink(size)
    return size


def rasterize(text: str, font_id: str, fonts: FontSet,
              canvas_w: int = 256, canvas_h: int = 64) -> TextMask:
    """Render text centered on a canvas, scaled so its ink spans at least
    60% of the canvas width or height (whichever binds first).

    Returns an anti-aliased coverage mask with per-glyph column boxes.
    Raises GlyphCoverageError when the font lacks a needed glyph.
    """
    if canvas_w < MIN_CANVAS or canvas_h < MIN_CANVAS:
        raise ValueError(f"canvas must be at least {MIN_CANVAS}x{MIN_CANVAS}")
    if not text or not text.strip():
        raise ValueError("text must contain at least one non-space character")
    entry = fonts.by_id(font_id)
    missing = [c for c in text if ord(c) not in entry.codepoints and not c.isspace()]
    if missing:
        raise GlyphCoverageError(
            f"font {font_id!r} lacks glyph(s) {''.join(sorted(set(missing)))!r}")

    size = _solve_font_size(entry.file_path, text, canvas_w, canvas_h)
    font = _load_pil_font(entry.file_path, size)
    x0, y0, x1, y1 = _text_bbox(font, text)
    dx = round(canvas_w / 2 - (x0 + x1) / 2)
    dy = round(canvas_h / 2 - (y0 + y1) / 2)

    img = Image.new("L", (canvas_w, canvas_h), 0)
    draw = ImageDraw.Draw(img)
    draw.text((dx, dy), text, font=font, fill=255)
    alpha = np.asarray(img, dtype=np.uint8)
    if not alpha.any():
        raise ValueError(f"text {text!r} produced no ink")

    ascent, _ = font.getmetrics()
    baseline_y = float(dy + ascent)

    boxes = []
    for i, ch in enumerate(text):
        if ch.isspace() or unicodedata.category(ch).startswith("Z"):
            continue
        prefix = draw.textlength(text[:i], font=font)
        gx0, _, gx1, _ = font.getbbox(ch)
        left = int(np.floor(dx + prefix + gx0))
        right = int(np.ceil(dx + prefix + gx1))
        left = max(0, min(canvas_w - 1, left))
        right = max(left + 1, min(canvas_w, right))
        boxes.append(GlyphBox(ch, left, right))
    boxes = _resolve_excess_overlaps(boxes)
    check_glyph_layout(boxes)

    return TextMask(canvas_w, canvas_h, alpha, baseline_y, boxes)
