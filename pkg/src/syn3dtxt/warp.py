"""2D arc distortion and per-character cylindrical bending.

The arc warp bends the mask's ink around a circular arc whose reference
line runs through the vertical center of the ink; radius is chosen so the
arc length equals the ink width, preserving total coverage to first order.

The cylinder bend places each glyph on a planar quad tangent to a vertical
cylinder, one angular station per glyph, which gives every character its
own surface normal in the emitted normal mask.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass

import numpy as np

from .errors import DegenerateProjectionError
from .geometry3d import (
    NEAR_LIMIT_FRACTION,
    CameraModel,
    Sampling,
    _gather_bilinear,
    encode_normal,
    homography_from_quads,
    plane_normal,
    project_quad,
    rot_yaw,
    warp_image,
)
from .textraster import GlyphBox, TextMask

ARC_LEVELS = (0, 60, 120)

BEND_SWEEP_MIN = 30.0
BEND_SWEEP_MAX = 120.0

# Binary masks threshold coverage here; also decides glyph ownership.
INK_THRESHOLD = 127


class ArcDirection(enum.Enum):
    ARCH_UP = "arch_up"      # ends rise, middle dips
    ARCH_DOWN = "arch_down"  # ends drop, middle bulges up


@dataclass(frozen=True)
class ArcParams:
    total_angle: int
    direction: ArcDirection = ArcDirection.ARCH_UP

    def __post_init__(self):
        if self.total_angle not in ARC_LEVELS:
            raise ValueError(f"arc angle must be one of {ARC_LEVELS}, got {self.total_angle!r}")
        if not isinstance(self.direction, ArcDirection):
            raise ValueError(f"direction must be an ArcDirection, got {self.direction!r}")


@dataclass(frozen=True)
class BendParams:
    sweep_angle: float
    per_char_count: int = 1

    def __post_init__(self):
        if not BEND_SWEEP_MIN <= self.sweep_angle <= BEND_SWEEP_MAX:
            raise ValueError(
                f"sweep_angle must lie in [{BEND_SWEEP_MIN}, {BEND_SWEEP_MAX}], "
                f"got {self.sweep_angle!r}")
        if self.per_char_count < 1:
            raise ValueError("per_char_count must be >= 1")


def fit_to_canvas(points: np.ndarray, out_w: int, out_h: int, margin: float = 0.0,
                  allow_upscale: bool = True) -> tuple[float, float, float]:
    """Uniform scale + offset mapping the points' bbox into the canvas,
    centered. Returns (scale, offset_x, offset_y) with q = scale * p + offset."""
    p = np.asarray(points, dtype=float).reshape(-1, 2)
    bmin = p.min(axis=0)
    bmax = p.max(axis=0)
    bw = max(bmax[0] - bmin[0], 1e-9)
    bh = max(bmax[1] - bmin[1], 1e-9)
    s = min((out_w - 2 * margin) / bw, (out_h - 2 * margin) / bh)
    if not allow_upscale:
        s = min(1.0, s)
    ox = (out_w - s * bw) / 2 - s * bmin[0]
    oy = (out_h - s * bh) / 2 - s * bmin[1]
    return s, ox, oy


def _arc_forward(x, y, cx, mid, radius, arch_up):
    """Forward arc map in continuous pixel-edge coordinates (y down)."""
    beta = (np.asarray(x, dtype=float) - cx) / radius
    h = mid - np.asarray(y, dtype=float)  # height above the reference line
    if arch_up:
        rho = radius - h
        u = cx + rho * np.sin(beta)
        v = (mid - radius) + rho * np.cos(beta)
    else:
        rho = radius + h
        u = cx + rho * np.sin(beta)
        v = (mid + radius) - rho * np.cos(beta)
    return u, v


def _arc_inverse(u, v, cx, mid, radius, arch_up):
    u = np.asarray(u, dtype=float)
    v = np.asarray(v, dtype=float)
    if arch_up:
        dx = u - cx
        dy = v - (mid - radius)
        rho = np.hypot(dx, dy)
        beta = np.arctan2(dx, dy)
        h = radius - rho
    else:
        dx = u - cx
        dy = v - (mid + radius)
        rho = np.hypot(dx, dy)
        beta = np.arctan2(dx, -dy)
        h = rho - radius
    x = cx + radius * beta
    y = mid - h
    return x, y


def arc_warp(mask: TextMask, params: ArcParams) -> TextMask:
    """Bend the mask's ink onto a circular arc of the given total angle.

    The warped ink bbox is recentered on the original canvas size and only
    downscaled when it would not fit (never upscaled, so coverage mass is
    preserved up to resampling losses). Level 0 is the identity.
    """
    if params.total_angle == 0:
        return mask

    w, h = mask.width, mask.height
    ix0, iy0, ix1, iy1 = mask.ink_bbox()
    ink_w = float(ix1 - ix0)
    cx = 0.5 * (ix0 + ix1)
    mid = 0.5 * (iy0 + iy1)
    a_rad = math.radians(params.total_angle)
    radius = ink_w / a_rad
    # pixels above the reference line must stay outside the circle center
    radius = max(radius, 0.5 * (iy1 - iy0) + 4.0)
    arch_up = params.direction is ArcDirection.ARCH_UP

    # warped bbox from densely sampled ink-bbox boundary
    ts = np.linspace(0.0, 1.0, 129)
    edge_x = ix0 + ts * (ix1 - ix0)
    edge_y = iy0 + ts * (iy1 - iy0)
    border_x = np.concatenate([edge_x, edge_x, np.full_like(edge_y, ix0), np.full_like(edge_y, ix1)])
    border_y = np.concatenate([np.full_like(edge_x, iy0), np.full_like(edge_x, iy1), edge_y, edge_y])
    fu, fv = _arc_forward(border_x, border_y, cx, mid, radius, arch_up)
    s, ox, oy = fit_to_canvas(np.column_stack([fu, fv]), w, h, margin=2.0, allow_upscale=False)

    qx, qy = np.meshgrid(np.arange(w, dtype=float) + 0.5, np.arange(h, dtype=float) + 0.5)
    pu = (qx - ox) / s
    pv = (qy - oy) / s
    sx, sy = _arc_inverse(pu, pv, cx, mid, radius, arch_up)
    alpha = _gather_bilinear(mask.alpha, sx - 0.5, sy - 0.5)
    alpha = np.floor(alpha + 0.5).astype(np.uint8)

    boxes = []
    for box in mask.per_glyph_boxes:
        corner_x = np.array([box.x_min, box.x_min, box.x_max, box.x_max], dtype=float)
        corner_y = np.array([iy0, iy1, iy0, iy1], dtype=float)
        bu, _ = _arc_forward(corner_x, corner_y, cx, mid, radius, arch_up)
        bu = bu * s + ox
        left = max(0, min(w - 1, int(np.floor(bu.min()))))
        right = max(left + 1, min(w, int(np.ceil(bu.max()))))
        boxes.append(GlyphBox(box.char, left, right))

    bl_u, bl_v = _arc_forward(cx, mask.baseline_y, cx, mid, radius, arch_up)
    baseline = float(bl_v * s + oy)
    return TextMask(w, h, alpha, baseline, boxes)


def glyph_stations(boxes, sweep_angle: float) -> list[float]:
    """Station angle per glyph: the first and last glyph centers pin the ends
    of [-sweep/2, +sweep/2]; interior glyphs interpolate by center position."""
    n = len(boxes)
    if n == 0:
        raise ValueError("mask has no glyph boxes to bend")
    if n == 1:
        return [0.0]
    centers = [b.center for b in boxes]
    span = centers[-1] - centers[0]
    if span <= 1e-9:
        return [0.0] * n
    half = sweep_angle / 2.0
    return [-half + sweep_angle * (c - centers[0]) / span for c in centers]


def _partition_columns(boxes, ink_x0: int, ink_x1: int, width: int) -> list[int]:
    """Disjoint column strips covering the ink, one per glyph, split at the
    midpoint of each box overlap (or gap). Keeping strips disjoint means no
    ink pixel is duplicated onto two cylinder stations, which would let a
    nearer station occlude a farther glyph entirely under heavy arc tilt."""
    edges = [min(ink_x0, boxes[0].x_min)]
    for a, b in zip(boxes, boxes[1:]):
        edges.append((a.x_max + b.x_min) // 2)
    edges.append(max(ink_x1, boxes[-1].x_max))
    edges = [max(0, min(width, e)) for e in edges]
    for i in range(1, len(edges)):
        if edges[i] <= edges[i - 1]:
            edges[i] = edges[i - 1] + 1
    if edges[-1] > width:
        raise ValueError(f"{len(boxes)} glyphs cannot tile a {width}px canvas")
    return edges


def cylinder_bend(mask: TextMask, params: BendParams,
                  cam: CameraModel) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Wrap the mask's glyphs around a vertical cylinder, one yaw station per
    glyph, and project through the camera.

    Returns (coverage, normal_rgb, binary): an 8-bit coverage canvas, an RGB
    normal mask colored per glyph station over that glyph's ink, and a 0/255
    binary mask at the coverage threshold. Overlaps resolve nearer-station-
    wins (smaller absolute station on top).
    """
    boxes = mask.per_glyph_boxes
    if params.per_char_count != len(boxes):
        raise ValueError(
            f"per_char_count {params.per_char_count} does not match "
            f"{len(boxes)} glyph boxes")
    w, h = mask.width, mask.height
    stations = glyph_stations(boxes, params.sweep_angle)
    sweep_rad = math.radians(params.sweep_angle)
    if len(boxes) >= 2:
        span = boxes[-1].center - boxes[0].center
        radius = max(span, 1e-6) / sweep_rad
    else:
        radius = 0.0
    ink_x0, _, ink_x1, _ = mask.ink_bbox()
    edges = _partition_columns(boxes, ink_x0, ink_x1, w)

    # project every glyph quad: local tangent plane, yawed to its station,
    # displaced onto the cylinder (arc-length preserving), pushed to depth d
    half_h = h / 2.0
    quads = []
    for i, station in enumerate(stations):
        half_w = (edges[i + 1] - edges[i]) / 2.0
        a = math.radians(station)
        block = rot_yaw(station)[:3, :3]
        local = np.array([
            [-half_w, -half_h, 0.0],
            [half_w, -half_h, 0.0],
            [half_w, half_h, 0.0],
            [-half_w, half_h, 0.0],
        ])
        center = np.array([radius * math.sin(a), 0.0, radius * (1.0 - math.cos(a))])
        pts = local @ block.T + center
        z = pts[:, 2] + cam.plane_distance
        if np.any(z <= NEAR_LIMIT_FRACTION * cam.plane_distance):
            raise DegenerateProjectionError(
                f"glyph {boxes[i].char!r} at station {station:.1f} deg crossed "
                f"the near limit")
        u = cam.focal_length * pts[:, 0] / z
        v = cam.focal_length * pts[:, 1] / z
        quads.append(np.column_stack([u, v]))

    s, ox, oy = fit_to_canvas(np.vstack(quads), w, h, margin=2.0)
    offset = np.array([ox, oy])

    coverage = np.zeros((h, w), dtype=np.uint8)
    owner = np.full((h, w), -1, dtype=np.int32)
    # far stations first so nearer ones overwrite at overlaps
    order = sorted(range(len(boxes)), key=lambda i: (-abs(stations[i]), i))
    for i in order:
        dst = quads[i] * s + offset
        strip = np.ascontiguousarray(mask.alpha[:, edges[i]:edges[i + 1]])
        strip_w = edges[i + 1] - edges[i]
        src = np.array([[0, 0], [strip_w, 0], [strip_w, h], [0, h]], dtype=float)
        hom = homography_from_quads(src, dst)

        wx0 = max(0, int(np.floor(dst[:, 0].min())) - 1)
        wy0 = max(0, int(np.floor(dst[:, 1].min())) - 1)
        wx1 = min(w, int(np.ceil(dst[:, 0].max())) + 1)
        wy1 = min(h, int(np.ceil(dst[:, 1].max())) + 1)
        if wx1 <= wx0 or wy1 <= wy0:
            continue
        shift = np.array([[1.0, 0.0, -wx0], [0.0, 1.0, -wy0], [0.0, 0.0, 1.0]])
        warped = warp_image(strip, shift @ hom, wx1 - wx0, wy1 - wy0, Sampling.BILINEAR)

        window = (slice(wy0, wy1), slice(wx0, wx1))
        coverage[window] = np.maximum(coverage[window], warped)
        hit = warped > INK_THRESHOLD
        owner[window][hit] = i

    binary = coverage > INK_THRESHOLD
    normal_rgb = np.zeros((h, w, 3), dtype=np.uint8)
    for i, station in enumerate(stations):
        color = encode_normal(plane_normal(rot_yaw(station)))
        normal_rgb[owner == i] = color
    return coverage, normal_rgb, (binary.astype(np.uint8) * 255)


def flat_perspective_warp(alpha: np.ndarray, rotation: np.ndarray,
                          cam: CameraModel) -> tuple[np.ndarray, np.ndarray]:
    """Project the whole mask plane through the camera and warp the coverage
    onto the same-size canvas, refit to the projected quad's bbox.

    Returns (warped coverage, homography). With the identity rotation and
    focal length equal to plane distance this is the byte-identity.
    """
    h, w = alpha.shape
    projected = project_quad(w / 2.0, h / 2.0, rotation, cam)
    s, ox, oy = fit_to_canvas(projected, w, h, margin=0.0)
    dst = projected * s + np.array([ox, oy])
    src = np.array([[0, 0], [w, 0], [w, h], [0, h]], dtype=float)
    hom = homography_from_quads(src, dst)
    warped = warp_image(alpha, hom, w, h, Sampling.BILINEAR)
    return warped, hom
