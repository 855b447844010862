"""Scene-text training-pair generator with RGB surface-normal supervision.

The package renders paired word crops (source/target text, shared style and
transform) with per-pixel surface-normal masks covering planar rotation,
perspective projection, arc distortion, and per-character cylindrical
bending, plus an auditor that checks generated datasets against the
prescribed sampling distributions.
"""

from .audit import AuditReport, audit_dataset, empirical_distributions
from .compositor import BackgroundPool, RenderedSample, composite_pair
from .dataset_io import (
    DatasetConfig,
    SampleRecord,
    generate_dataset,
    generate_sample,
    read_manifest,
)
from .errors import Syn3DTxtError
from .geometry3d import (
    CameraModel,
    OrderPolicy,
    RotationSpec,
    Sampling,
    compose_rotation,
    decode_normal,
    encode_normal,
    homography_from_quads,
    plane_normal,
    project_quad,
    rot_pitch,
    rot_roll,
    rot_yaw,
    select_order_policy,
    warp_image,
)
from .sampler import AxisCombination, SampleKind, rng_for_sample
from .textraster import FontSet, TextMask, WordCorpus, load_corpus, load_fonts, rasterize
from .warp import ArcDirection, ArcParams, BendParams, arc_warp, cylinder_bend

__version__ = "0.1.0"

__all__ = [
    "ArcDirection",
    "ArcParams",
    "AuditReport",
    "AxisCombination",
    "BackgroundPool",
    "BendParams",
    "CameraModel",
    "DatasetConfig",
    "FontSet",
    "OrderPolicy",
    "RenderedSample",
    "RotationSpec",
    "SampleKind",
    "SampleRecord",
    "Sampling",
    "Syn3DTxtError",
    "TextMask",
    "WordCorpus",
    "arc_warp",
    "audit_dataset",
    "composite_pair",
    "compose_rotation",
    "cylinder_bend",
    "decode_normal",
    "empirical_distributions",
    "encode_normal",
    "generate_dataset",
    "generate_sample",
    "homography_from_quads",
    "load_corpus",
    "load_fonts",
    "plane_normal",
    "project_quad",
    "rasterize",
    "read_manifest",
    "rng_for_sample",
    "rot_pitch",
    "rot_roll",
    "rot_yaw",
    "select_order_policy",
    "warp_image",
]
