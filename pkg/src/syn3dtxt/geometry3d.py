"""Rotation algebra, pinhole projection, homographies, and normal-map encoding.

Coordinate conventions used throughout the package:

  Plane frame (right-handed, matches image memory layout):
    - x: right, y: down, z: away from the camera along the optical axis
    - the unrotated text plane lies in z = 0 with its center at the origin
    - the base plane normal is (0, 0, 1)

  Camera:
    - optical center at the origin looking down +z
    - the plane is pushed out to z = plane_distance before projecting
    - projection: u = f * x / z, v = f * y / z, so (u, v) are image
      coordinates with the origin at the canvas center, y down

  Rotation matrices are 4x4 homogeneous, row-major, acting on column
  vectors. The three single-axis factories implement the generator's
  fixed conventions: roll mixes x/y, yaw mixes x/z, pitch mixes y/z,
  each with -sin in the upper triangle. Semantic names (roll/pitch/yaw)
  are authoritative, not axis letters.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass

import numpy as np

from .errors import DegenerateHomographyError, DegenerateProjectionError

BASE_NORMAL = np.array([0.0, 0.0, 1.0])

# Matrix entries this close to orthonormality are accepted as rotations.
ORTHONORMAL_TOL = 1e-6


class OrderPolicy(enum.Enum):
    """Multi-axis composition order. Roll is always applied first; near-field
    viewing applies pitch before yaw, far-field applies yaw before pitch."""

    NEAR_FIELD = "near_field"
    FAR_FIELD = "far_field"


class Sampling(enum.Enum):
    NEAREST = "nearest"
    BILINEAR = "bilinear"


@dataclass(frozen=True)
class RotationSpec:
    """A (roll, pitch, yaw) angle triple in degrees plus its composition order."""

    roll_gamma: float = 0.0
    pitch_theta: float = 0.0
    yaw_phi: float = 0.0
    order_policy: OrderPolicy = OrderPolicy.NEAR_FIELD

    def __post_init__(self):
        for name in ("roll_gamma", "pitch_theta", "yaw_phi"):
            value = getattr(self, name)
            if not math.isfinite(value):
                raise ValueError(f"{name} must be finite, got {value!r}")
            if not -90.0 <= value <= 90.0:
                raise ValueError(f"{name} must lie in [-90, 90] degrees, got {value!r}")
        if not isinstance(self.order_policy, OrderPolicy):
            raise ValueError(f"order_policy must be an OrderPolicy, got {self.order_policy!r}")

    @property
    def active_axes(self) -> tuple[str, ...]:
        axes = []
        if self.pitch_theta != 0.0:
            axes.append("theta")
        if self.yaw_phi != 0.0:
            axes.append("phi")
        if self.roll_gamma != 0.0:
            axes.append("gamma")
        return tuple(axes)


@dataclass(frozen=True)
class CameraModel:
    """Pinhole camera: focal length and distance to the unrotated plane center,
    both in pixels. Default geometry ties both to the canvas size so that
    +/-70 degree rotations stay clear of the near limit."""

    focal_length: float
    plane_distance: float

    def __post_init__(self):
        if not (math.isfinite(self.focal_length) and self.focal_length > 0):
            raise ValueError(f"focal_length must be positive, got {self.focal_length!r}")
        if not (math.isfinite(self.plane_distance) and self.plane_distance > 0):
            raise ValueError(f"plane_distance must be positive, got {self.plane_distance!r}")
        if self.plane_distance < self.focal_length:
            raise ValueError("plane_distance must be >= focal_length")

    @classmethod
    def for_canvas(cls, width: int, height: int) -> "CameraModel":
        side = 2.0 * max(width, height)
        return cls(focal_length=side, plane_distance=side)


def _check_finite_angle(name: str, degrees: float) -> float:
    value = float(degrees)
    if not math.isfinite(value):
        raise ValueError(f"{name} must be finite, got {degrees!r}")
    return value


def rot_roll(gamma: float) -> np.ndarray:
    """In-plane rotation by gamma degrees (mixes x and y, fixes z)."""
    g = math.radians(_check_finite_angle("gamma", gamma))
    c, s = math.cos(g), math.sin(g)
    return np.array([
        [c, -s, 0.0, 0.0],
        [s, c, 0.0, 0.0],
        [0.0, 0.0, 1.0, 0.0],
        [0.0, 0.0, 0.0, 1.0],
    ])


def rot_yaw(phi: float) -> np.ndarray:
    """Rotation about the vertical axis by phi degrees (mixes x and z)."""
    p = math.radians(_check_finite_angle("phi", phi))
    c, s = math.cos(p), math.sin(p)
    return np.array([
        [c, 0.0, -s, 0.0],
        [0.0, 1.0, 0.0, 0.0],
        [s, 0.0, c, 0.0],
        [0.0, 0.0, 0.0, 1.0],
    ])


def rot_pitch(theta: float) -> np.ndarray:
    """Rotation about the horizontal axis by theta degrees (mixes y and z)."""
    t = math.radians(_check_finite_angle("theta", theta))
    c, s = math.cos(t), math.sin(t)
    return np.array([
        [1.0, 0.0, 0.0, 0.0],
        [0.0, c, -s, 0.0],
        [0.0, s, c, 0.0],
        [0.0, 0.0, 0.0, 1.0],
    ])


def compose_rotation(spec: RotationSpec) -> np.ndarray:
    """Compose the three single-axis rotations under the spec's order policy.

    Matrices act on column vectors, so the rightmost factor applies first:
    roll is always first; NEAR_FIELD then applies pitch before yaw
    (Yaw @ Pitch @ Roll), FAR_FIELD applies yaw before pitch
    (Pitch @ Yaw @ Roll).
    """
    roll = rot_roll(spec.roll_gamma)
    pitch = rot_pitch(spec.pitch_theta)
    yaw = rot_yaw(spec.yaw_phi)
    if spec.order_policy is OrderPolicy.NEAR_FIELD:
        return yaw @ pitch @ roll
    return pitch @ yaw @ roll


def select_order_policy(height_y: float, distance_x: float,
                        threshold_degrees: float = 10.0) -> OrderPolicy:
    """Pick the composition order from the viewing geometry: the elevation
    angle arctan(height/distance) vanishes with distance, so distant targets
    are dominated by horizontal parallax and get FAR_FIELD."""
    if not (math.isfinite(distance_x) and distance_x > 0):
        raise ValueError(f"distance_x must be positive, got {distance_x!r}")
    if not (math.isfinite(height_y) and height_y >= 0):
        raise ValueError(f"height_y must be non-negative, got {height_y!r}")
    elevation = math.degrees(math.atan2(height_y, distance_x))
    if elevation < threshold_degrees:
        return OrderPolicy.FAR_FIELD
    return OrderPolicy.NEAR_FIELD


def _rotation_block(rotation: np.ndarray) -> np.ndarray:
    rotation = np.asarray(rotation, dtype=float)
    if rotation.shape == (4, 4):
        block = rotation[:3, :3]
    elif rotation.shape == (3, 3):
        block = rotation
    else:
        raise ValueError(f"expected a 3x3 or 4x4 matrix, got shape {rotation.shape}")
    if not np.allclose(block.T @ block, np.eye(3), atol=ORTHONORMAL_TOL):
        raise ValueError("rotation block is not orthonormal")
    return block


def plane_normal(rotation: np.ndarray) -> np.ndarray:
    """Normal of the rotated text plane: the 3x3 block applied to (0, 0, 1)."""
    return _rotation_block(rotation) @ BASE_NORMAL


def encode_normal(n) -> tuple[int, int, int]:
    """Quantize a unit normal to RGB bytes: c in [-1, 1] -> round(255*(c+1)/2),
    rounding half away from zero."""
    v = np.asarray(n, dtype=float)
    if v.shape != (3,):
        raise ValueError(f"expected a 3-vector, got shape {v.shape}")
    norm = float(np.linalg.norm(v))
    if abs(norm - 1.0) > 1e-6:
        raise ValueError(f"normal must be unit length, got norm {norm!r}")
    # all mapped values are >= 0, so floor(x + 0.5) is round-half-away-from-zero
    return tuple(min(255, math.floor(255.0 * (c + 1.0) / 2.0 + 0.5)) for c in v)


def decode_normal(e) -> np.ndarray:
    """Invert the byte mapping and renormalize. Byte quantization bounds the
    round-trip error at about half a degree."""
    b = np.asarray(e, dtype=float)
    if b.shape != (3,):
        raise ValueError(f"expected 3 byte values, got shape {b.shape}")
    if np.any(b < 0) or np.any(b > 255):
        raise ValueError(f"byte values must lie in [0, 255], got {e!r}")
    v = 2.0 * (b / 255.0) - 1.0
    norm = float(np.linalg.norm(v))
    if norm == 0.0:
        raise ValueError("encoded normal decodes to the zero vector")
    return v / norm


# Corner order for quads everywhere in the package: TL, TR, BR, BL.
_CORNER_SIGNS = np.array([
    [-1.0, -1.0],
    [1.0, -1.0],
    [1.0, 1.0],
    [-1.0, 1.0],
])

NEAR_LIMIT_FRACTION = 0.1


def project_quad(half_w: float, half_h: float, rotation: np.ndarray,
                 cam: CameraModel) -> np.ndarray:
    """Rotate the plane quad (+-half_w, +-half_h, 0), push it out to the
    camera's plane distance, and project. Returns a (4, 2) array of image
    coordinates (canvas-center origin, y down) in TL, TR, BR, BL order.

    Raises DegenerateProjectionError if any corner lands at or behind
    z = 0.1 * plane_distance; callers are expected to resample the rotation
    rather than clamp.
    """
    if not (half_w > 0 and half_h > 0):
        raise ValueError("half extents must be positive")
    block = _rotation_block(rotation)
    corners = np.column_stack([
        _CORNER_SIGNS[:, 0] * half_w,
        _CORNER_SIGNS[:, 1] * half_h,
        np.zeros(4),
    ])
    rotated = corners @ block.T
    z = rotated[:, 2] + cam.plane_distance
    if np.any(z <= NEAR_LIMIT_FRACTION * cam.plane_distance):
        raise DegenerateProjectionError(
            f"quad corner at z={z.min():.3f} crossed the near limit "
            f"{NEAR_LIMIT_FRACTION * cam.plane_distance:.3f}")
    u = cam.focal_length * rotated[:, 0] / z
    v = cam.focal_length * rotated[:, 1] / z
    return np.column_stack([u, v])


def _collinear(points: np.ndarray) -> bool:
    p = np.asarray(points, dtype=float)
    scale = max(1.0, float(np.abs(p).max()))
    for i in range(4):
        for j in range(i + 1, 4):
            for k in range(j + 1, 4):
                a, b, c = p[i], p[j], p[k]
                area2 = abs((b[0] - a[0]) * (c[1] - a[1]) - (b[1] - a[1]) * (c[0] - a[0]))
                if area2 < 1e-9 * scale * scale:
                    return True
    return False


def _normalize_points(points: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Isotropic conditioning for the DLT: centroid to origin, RMS distance
    to sqrt(2)."""
    centroid = points.mean(axis=0)
    shifted = points - centroid
    rms = math.sqrt(float((shifted ** 2).sum(axis=1).mean()))
    s = math.sqrt(2.0) / rms if rms > 0 else 1.0
    T = np.array([
        [s, 0.0, -s * centroid[0]],
        [0.0, s, -s * centroid[1]],
        [0.0, 0.0, 1.0],
    ])
    return shifted * s, T


def homography_from_quads(src, dst) -> np.ndarray:
    """Solve the 4-point planar homography H with H @ src_i ~ dst_i (DLT).

    The result is normalized so H[2, 2] == 1 whenever that entry is nonzero.
    Raises DegenerateHomographyError for collinear corner triples or a
    non-invertible solution.
    """
    src = np.asarray(src, dtype=float).reshape(4, 2)
    dst = np.asarray(dst, dtype=float).reshape(4, 2)
    if _collinear(src) or _collinear(dst):
        raise DegenerateHomographyError("three of the four corners are collinear")

    src_n, t_src = _normalize_points(src)
    dst_n, t_dst = _normalize_points(dst)

    rows = []
    for (x, y), (u, v) in zip(src_n, dst_n):
        rows.append([x, y, 1.0, 0.0, 0.0, 0.0, -u * x, -u * y, -u])
        rows.append([0.0, 0.0, 0.0, x, y, 1.0, -v * x, -v * y, -v])
    a = np.array(rows)
    _, _, vt = np.linalg.svd(a)
    h_n = vt[-1].reshape(3, 3)

    h = np.linalg.inv(t_dst) @ h_n @ t_src
    if abs(np.linalg.det(h)) <= 1e-12:
        raise DegenerateHomographyError("homography is not invertible")
    if abs(h[2, 2]) > 1e-12:
        h = h / h[2, 2]
    return h


def apply_homography(h: np.ndarray, points) -> np.ndarray:
    """Map (N, 2) points through a homography, dividing out the projective scale."""
    p = np.asarray(points, dtype=float).reshape(-1, 2)
    ones = np.ones((p.shape[0], 1))
    q = np.hstack([p, ones]) @ np.asarray(h, dtype=float).T
    return q[:, :2] / q[:, 2:3]


def _gather_bilinear(src: np.ndarray, x: np.ndarray, y: np.ndarray) -> np.ndarray:
    """Bilinear sample src at continuous positions (x, y), pixel centers at
    integer coordinates, zero (transparent) outside the image."""
    h, w = src.shape[:2]
    x0 = np.floor(x)
    y0 = np.floor(y)
    fx = x - x0
    fy = y - y0
    x0 = x0.astype(np.int64)
    y0 = y0.astype(np.int64)

    out = None
    for dx, dy, wgt in (
        (0, 0, (1 - fx) * (1 - fy)),
        (1, 0, fx * (1 - fy)),
        (0, 1, (1 - fx) * fy),
        (1, 1, fx * fy),
    ):
        xi = x0 + dx
        yi = y0 + dy
        valid = (xi >= 0) & (xi < w) & (yi >= 0) & (yi < h)
        xi = np.clip(xi, 0, w - 1)
        yi = np.clip(yi, 0, h - 1)
        term = src[yi, xi].astype(np.float64)
        weight = wgt * valid
        if term.ndim > weight.ndim:
            weight = weight[..., None]
        contrib = term * weight
        out = contrib if out is None else out + contrib
    return out


def _gather_nearest(src: np.ndarray, x: np.ndarray, y: np.ndarray) -> np.ndarray:
    h, w = src.shape[:2]
    xi = np.floor(x + 0.5).astype(np.int64)
    yi = np.floor(y + 0.5).astype(np.int64)
    valid = (xi >= 0) & (xi < w) & (yi >= 0) & (yi < h)
    xi = np.clip(xi, 0, w - 1)
    yi = np.clip(yi, 0, h - 1)
    out = src[yi, xi].astype(np.float64)
    mask = valid if out.ndim == valid.ndim else valid[..., None]
    return out * mask


def warp_image(img: np.ndarray, h: np.ndarray, out_w: int, out_h: int,
               sampling: Sampling = Sampling.BILINEAR) -> np.ndarray:
    """Inverse-map warp: every output pixel center is pulled back through
    H^-1 and sampled from the source. Out-of-bounds samples are transparent
    (zero); bilinear interpolation covers all channels including alpha.

    Pixel (i, j) covers [i, i+1) x [j, j+1) with its center at
    (i + 0.5, j + 0.5), so quad corners line up with pixel-grid edges and an
    identity homography reproduces the source byte for byte.
    """
    h = np.asarray(h, dtype=float)
    if h.shape != (3, 3):
        raise ValueError(f"homography must be 3x3, got {h.shape}")
    if abs(np.linalg.det(h)) <= 1e-12:
        raise DegenerateHomographyError("homography is not invertible")
    img = np.asarray(img)
    h_inv = np.linalg.inv(h)

    xs, ys = np.meshgrid(
        np.arange(out_w, dtype=np.float64) + 0.5,
        np.arange(out_h, dtype=np.float64) + 0.5,
    )
    denom = h_inv[2, 0] * xs + h_inv[2, 1] * ys + h_inv[2, 2]
    # projective points crossing w=0 map outside any finite source
    denom = np.where(np.abs(denom) < 1e-12, np.inf, denom)
    sx = (h_inv[0, 0] * xs + h_inv[0, 1] * ys + h_inv[0, 2]) / denom - 0.5
    sy = (h_inv[1, 0] * xs + h_inv[1, 1] * ys + h_inv[1, 2]) / denom - 0.5

    if sampling is Sampling.NEAREST:
        values = _gather_nearest(img, sx, sy)
    else:
        values = _gather_bilinear(img, sx, sy)
    if np.issubdtype(img.dtype, np.integer):
        return np.floor(values + 0.5).astype(img.dtype)
    return values.astype(img.dtype)
