"""Deterministic, seeded sampling of every stochastic generation choice.

PRNG splitting
--------------
Each sample index owns an independent stream:

    rng = numpy PCG64 seeded with SeedSequence([master_seed, sample_index, *tags])

Streams never get shared between samples, so generation order and worker
scheduling cannot change any drawn value. Rotation re-draws after a
degenerate projection use the extra tags (RESAMPLE_TAG, attempt).

Draw order inside one primitive is fixed and documented on each function;
categorical draws consume a single uniform against cumulative weights in
the declared category order.
"""

from __future__ import annotations

import enum

import numpy as np

from .compositor import contrast_ok, luma
from .geometry3d import OrderPolicy, RotationSpec
from .textraster import FontSet
from .warp import ArcDirection, ArcParams

RESAMPLE_TAG = 1000

ANGLE_SMALL = 30.0
ANGLE_MEDIUM = (45.0, 60.0)
ANGLE_LARGE = (65.0, 70.0)

SWEEP_RANGE = (30.0, 120.0)

FILL_ATTEMPTS = 10


class AxisCombination(enum.Enum):
    """The seven allowed active-axis sets with their target frequencies."""

    PHI = "phi"
    THETA = "theta"
    GAMMA = "gamma"
    THETA_PHI = "theta_phi"
    THETA_GAMMA = "theta_gamma"
    PHI_GAMMA = "phi_gamma"
    THETA_PHI_GAMMA = "theta_phi_gamma"

    @property
    def axes(self) -> tuple[str, ...]:
        return tuple(self.value.split("_"))


# Categorical order and weights for axis-combination draws (must sum to 1).
AXIS_WEIGHTS = {
    AxisCombination.PHI: 0.20,
    AxisCombination.THETA: 0.20,
    AxisCombination.GAMMA: 0.20,
    AxisCombination.THETA_PHI: 0.20,
    AxisCombination.THETA_GAMMA: 0.05,
    AxisCombination.PHI_GAMMA: 0.05,
    AxisCombination.THETA_PHI_GAMMA: 0.10,
}


class SampleKind(enum.Enum):
    FLAT_ROTATED = "flat_rotated"
    CYLINDER_BENT = "cylinder_bent"


def rng_for_sample(master_seed: int, sample_index: int, *tags: int) -> np.random.Generator:
    """The documented splitting function: one PCG64 stream per (seed, index)."""
    seq = np.random.SeedSequence([int(master_seed) & (2**64 - 1), int(sample_index), *tags])
    return np.random.Generator(np.random.PCG64(seq))


def sample_axis_combination(rng: np.random.Generator) -> AxisCombination:
    """One uniform draw against the cumulative AXIS_WEIGHTS table."""
    u = rng.random()
    acc = 0.0
    for combo, weight in AXIS_WEIGHTS.items():
        acc += weight
        if u < acc:
            return combo
    return AxisCombination.THETA_PHI_GAMMA  # u == 1.0 edge


def sample_angle(rng: np.random.Generator) -> float:
    """Signed rotation angle. Draw order: magnitude category (uniform over
    small/medium/large), magnitude (continuous for medium/large, exactly 30
    for small), then sign (clockwise = negative, probability 1/2)."""
    category = int(rng.integers(0, 3))
    if category == 0:
        magnitude = ANGLE_SMALL
    elif category == 1:
        magnitude = float(rng.uniform(*ANGLE_MEDIUM))
    else:
        magnitude = float(rng.uniform(*ANGLE_LARGE))
    if rng.random() < 0.5:
        return -magnitude
    return magnitude


def build_rotation_spec(rng: np.random.Generator) -> RotationSpec:
    """Axis combination, then one angle per active axis in (theta, phi,
    gamma) order, then the order policy (near/far field, 1/2 each)."""
    combo = sample_axis_combination(rng)
    angles = {"theta": 0.0, "phi": 0.0, "gamma": 0.0}
    for axis in ("theta", "phi", "gamma"):
        if axis in combo.axes:
            angles[axis] = sample_angle(rng)
    policy = OrderPolicy.NEAR_FIELD if rng.random() < 0.5 else OrderPolicy.FAR_FIELD
    return RotationSpec(
        roll_gamma=angles["gamma"],
        pitch_theta=angles["theta"],
        yaw_phi=angles["phi"],
        order_policy=policy,
    )


def sample_arc(rng: np.random.Generator) -> ArcParams:
    """Arc level uniform over {0, 60, 120}, then direction (1/2 each)."""
    level = (0, 60, 120)[int(rng.integers(0, 3))]
    direction = ArcDirection.ARCH_UP if rng.random() < 0.5 else ArcDirection.ARCH_DOWN
    return ArcParams(level, direction)


def sample_kind(rng: np.random.Generator, bend_fraction: float = 0.0) -> SampleKind:
    if not 0.0 <= bend_fraction <= 1.0:
        raise ValueError(f"bend_fraction must lie in [0, 1], got {bend_fraction!r}")
    if rng.random() < bend_fraction:
        return SampleKind.CYLINDER_BENT
    return SampleKind.FLAT_ROTATED


def sample_sweep(rng: np.random.Generator) -> float:
    return float(rng.uniform(*SWEEP_RANGE))


def sample_font(rng: np.random.Generator, fonts: FontSet) -> str:
    return fonts[int(rng.integers(0, len(fonts)))].font_id


def sample_fill(rng: np.random.Generator, bg_crop=None, ink_region=None) -> tuple[int, int, int]:
    """Uniform RGB fill, re-drawn up to FILL_ATTEMPTS times until it clears
    the compositor's luminance-contrast rule against the background crop.
    If every attempt fails, the highest-contrast attempt wins."""
    if bg_crop is None:
        return tuple(int(v) for v in rng.integers(0, 256, size=3))
    best = None
    best_contrast = -1.0
    region = bg_crop[ink_region[1]:ink_region[3], ink_region[0]:ink_region[2]] \
        if ink_region is not None else bg_crop
    mean_luma = float(np.mean(luma(region.astype(np.float64))))
    for _ in range(FILL_ATTEMPTS):
        fill = tuple(int(v) for v in rng.integers(0, 256, size=3))
        if contrast_ok(fill, bg_crop, ink_region):
            return fill
        contrast = abs(luma(np.array(fill, dtype=np.float64)) - mean_luma)
        if contrast > best_contrast:
            best_contrast = contrast
            best = fill
    return best


def sample_style(rng: np.random.Generator, fonts: FontSet, bg_crop=None,
                 ink_region=None) -> tuple[str, tuple[int, int, int]]:
    """Font uniform over the set, then a contrast-checked fill color."""
    font_id = sample_font(rng, fonts)
    fill = sample_fill(rng, bg_crop, ink_region)
    return font_id, fill
