"""Acceptance criteria for the generator, one test per criterion.

Each test prints one PASS/FAIL line (visible with `pytest -s`). Tolerances
are fixed here and must not be loosened: they are the product's contract.
Dataset-scale criteria share two session-scoped generation runs (10,000 and
2,000 samples) plus a 500-sample determinism pair.
"""

import hashlib
import math
import time

import numpy as np
import pytest
from PIL import Image

from syn3dtxt.audit import audit_dataset, decoded_station_yaws, modal_ink_color
from syn3dtxt.dataset_io import (
    IMAGE_KEYS,
    DatasetConfig,
    generate_dataset,
    read_manifest,
)
from syn3dtxt.geometry3d import (
    CameraModel,
    OrderPolicy,
    RotationSpec,
    apply_homography,
    compose_rotation,
    decode_normal,
    encode_normal,
    rot_pitch,
    rot_roll,
    rot_yaw,
)
from syn3dtxt.sampler import AXIS_WEIGHTS
from syn3dtxt.textraster import rasterize
from syn3dtxt.warp import ArcDirection, ArcParams, arc_warp, flat_perspective_warp

pytestmark = pytest.mark.acceptance


def report(name: str, passed: bool, detail: str = "") -> None:
    status = "PASS" if passed else "FAIL"
    print(f"[ACCEPTANCE {status}] {name}" + (f" — {detail}" if detail else ""))
    assert passed, f"{name}: {detail}"


def random_specs(seed: int, n: int, nonzero_tilts: bool = False):
    rng = np.random.default_rng(seed)
    specs = []
    for _ in range(n):
        if nonzero_tilts:
            theta, phi = rng.uniform(1.0, 90.0, size=2) * rng.choice([-1, 1], size=2)
            gamma = rng.uniform(-90.0, 90.0)
        else:
            gamma, theta, phi = rng.uniform(-90.0, 90.0, size=3)
        policy = OrderPolicy.NEAR_FIELD if rng.random() < 0.5 else OrderPolicy.FAR_FIELD
        specs.append(RotationSpec(gamma, theta, phi, policy))
    return specs


@pytest.fixture(scope="session")
def run_10k(corpus_file, fonts_dir, backgrounds_dir, tmp_path_factory):
    out = tmp_path_factory.mktemp("acc10k") / "d"
    cfg = DatasetConfig(str(corpus_file), str(fonts_dir), str(backgrounds_dir),
                        str(out), count=10_000, seed=42, bend_fraction=0.0)
    start = time.monotonic()
    generate_dataset(cfg)
    elapsed = time.monotonic() - start
    return out, elapsed


@pytest.fixture(scope="session")
def run_2k(corpus_file, fonts_dir, backgrounds_dir, tmp_path_factory):
    out = tmp_path_factory.mktemp("acc2k") / "d"
    cfg = DatasetConfig(str(corpus_file), str(fonts_dir), str(backgrounds_dir),
                        str(out), count=2_000, seed=7, bend_fraction=0.3)
    start = time.monotonic()
    generate_dataset(cfg)
    elapsed = time.monotonic() - start
    return out, elapsed


def test_rotation_algebra_10k():
    start = time.monotonic()
    eye = np.eye(3)
    worst_ortho = 0.0
    worst_det = 0.0
    for spec in random_specs(101, 10_000):
        m = compose_rotation(spec)[:3, :3]
        worst_ortho = max(worst_ortho, float(np.abs(m.T @ m - eye).max()))
        worst_det = max(worst_det, abs(float(np.linalg.det(m)) - 1.0))

    rng = np.random.default_rng(102)
    worst_single = 0.0
    for angle in rng.uniform(-90, 90, size=200):
        for factory, spec in (
            (rot_roll, RotationSpec(angle, 0, 0)),
            (rot_pitch, RotationSpec(0, angle, 0)),
            (rot_yaw, RotationSpec(0, 0, angle)),
        ):
            gap = float(np.abs(compose_rotation(spec) - factory(angle)).max())
            worst_single = max(worst_single, gap)
    elapsed = time.monotonic() - start
    report(
        "rotation algebra (10k specs)",
        worst_ortho <= 1e-9 and worst_det <= 1e-9 and worst_single <= 1e-12
        and elapsed < 5.0,
        f"orthonormality {worst_ortho:.2e}, det {worst_det:.2e}, "
        f"single-axis {worst_single:.2e}, {elapsed:.2f}s")


def test_normal_round_trip_10k():
    start = time.monotonic()
    fixtures_ok = (
        encode_normal((0, 0, 1)) == (128, 128, 255)
        and encode_normal((1, 0, 0)) == (255, 128, 128)
        and encode_normal((0, -1, 0)) == (128, 0, 128))
    rng = np.random.default_rng(103)
    v = rng.normal(size=(10_000, 3))
    v /= np.linalg.norm(v, axis=1, keepdims=True)
    worst = 0.0
    for n in v:
        d = decode_normal(encode_normal(n))
        worst = max(worst, math.degrees(math.acos(float(np.clip(np.dot(d, n), -1, 1)))))
    elapsed = time.monotonic() - start
    report(
        "normal encode/decode round trip (10k)",
        fixtures_ok and worst <= 0.6 and elapsed < 1.0,
        f"max angular error {worst:.3f} deg, fixtures {'ok' if fixtures_ok else 'BAD'}, "
        f"{elapsed:.2f}s")


def test_distribution_conformance_10k(run_10k):
    out, elapsed = run_10k
    records = read_manifest(out)
    n = len(records)
    counts = {}
    for rec in records:
        counts[rec.axis_combination] = counts.get(rec.axis_combination, 0) + 1

    worst_gap_pp = 0.0
    stat = 0.0
    for combo, weight in AXIS_WEIGHTS.items():
        observed = counts.get(combo.value, 0)
        worst_gap_pp = max(worst_gap_pp, abs(observed / n - weight) * 100)
        stat += (observed - n * weight) ** 2 / (n * weight)
    from scipy.stats import chi2

    critical = float(chi2.isf(0.001, df=6))

    def in_table(v):
        a = abs(v)
        return a == 30.0 or 45.0 <= a <= 60.0 or 65.0 <= a <= 70.0

    range_violations = sum(
        1 for rec in records
        for v in (rec.theta, rec.phi, rec.gamma) if v != 0.0 and not in_table(v))
    report(
        "distribution conformance (10k run)",
        n == 10_000 and worst_gap_pp <= 1.5 and stat <= critical
        and range_violations == 0 and elapsed < 600.0,
        f"max gap {worst_gap_pp:.2f}pp, chi2 {stat:.2f} <= {critical:.2f}, "
        f"{range_violations} range violations, generated in {elapsed:.0f}s")


def test_order_policy_non_commutativity():
    differing = 0
    specs = random_specs(104, 1_000, nonzero_tilts=True)
    for spec in specs:
        near = compose_rotation(RotationSpec(spec.roll_gamma, spec.pitch_theta,
                                             spec.yaw_phi, OrderPolicy.NEAR_FIELD))
        far = compose_rotation(RotationSpec(spec.roll_gamma, spec.pitch_theta,
                                            spec.yaw_phi, OrderPolicy.FAR_FIELD))
        if np.abs(near - far).max() > 1e-6:
            differing += 1

    rng = np.random.default_rng(105)
    agree_worst = 0.0
    for _ in range(200):
        gamma = float(rng.uniform(-90, 90))
        other = float(rng.uniform(-90, 90))
        for spec_pair in (
            (RotationSpec(gamma, other, 0.0, OrderPolicy.NEAR_FIELD),
             RotationSpec(gamma, other, 0.0, OrderPolicy.FAR_FIELD)),
            (RotationSpec(gamma, 0.0, other, OrderPolicy.NEAR_FIELD),
             RotationSpec(gamma, 0.0, other, OrderPolicy.FAR_FIELD)),
        ):
            gap = float(np.abs(compose_rotation(spec_pair[0])
                               - compose_rotation(spec_pair[1])).max())
            agree_worst = max(agree_worst, gap)
    report(
        "order-policy non-commutativity (1k specs)",
        differing == 1_000 and agree_worst <= 1e-12,
        f"{differing}/1000 dual-tilt specs differ, single-tilt gap {agree_worst:.2e}")


def test_end_to_end_self_consistency(run_2k):
    out, _ = run_2k
    records = read_manifest(out)
    flat_checked = bent_checked = 0
    failures = []
    for rec in records:
        mask = np.asarray(Image.open(out / rec.files["mask_s"]).convert("RGB"))
        if rec.kind == "flat_rotated":
            flat_checked += 1
            if modal_ink_color(mask) != rec.expected_flat_color():
                failures.append((rec.id, "modal color mismatch"))
        else:
            bent_checked += 1
            yaws = decoded_station_yaws(mask)
            if any(b <= a for a, b in zip(yaws, yaws[1:])):
                failures.append((rec.id, "yaws not monotonic"))
            elif len(yaws) >= 2 and abs((yaws[-1] - yaws[0]) - rec.sweep_angle) > 5.0:
                failures.append((rec.id, "span off"))
    report(
        "end-to-end self-consistency (2k run)",
        len(records) == 2_000 and not failures and bent_checked > 0,
        f"{flat_checked} flat + {bent_checked} bent records, "
        f"{len(failures)} failures {failures[:4]}")


def test_pair_invariant_200_samples(run_2k):
    out, _ = run_2k
    records = read_manifest(out)[:200]
    violating_px = 0
    for rec in records:
        i_s = np.asarray(Image.open(out / rec.files["i_s"]).convert("RGB"))
        i_t = np.asarray(Image.open(out / rec.files["i_t"]).convert("RGB"))
        t_b = np.asarray(Image.open(out / rec.files["t_b"]).convert("RGB"))
        bin_s = np.asarray(Image.open(out / rec.files["bin_s"]).convert("L")) > 0
        bin_t = np.asarray(Image.open(out / rec.files["bin_t"]).convert("L")) > 0
        outside = ~bin_s & ~bin_t
        violating_px += int((i_s[outside] != i_t[outside]).any(axis=-1).sum())
        violating_px += int((i_s[~bin_s] != t_b[~bin_s]).any(axis=-1).sum())
    report(
        "pair invariant (200 samples, exhaustive)",
        len(records) == 200 and violating_px == 0,
        f"{violating_px} violating pixels")


def test_determinism_across_worker_counts(corpus_file, fonts_dir, backgrounds_dir,
                                          tmp_path_factory):
    base = tmp_path_factory.mktemp("acc_det")
    digests = {}
    manifests = {}
    for workers in (1, 8):
        out = base / f"w{workers}"
        cfg = DatasetConfig(str(corpus_file), str(fonts_dir), str(backgrounds_dir),
                            str(out), count=500, seed=42, bend_fraction=0.2,
                            workers=workers)
        generate_dataset(cfg)
        manifests[workers] = (out / "manifest.jsonl").read_bytes()
        per_file = {}
        for key in IMAGE_KEYS:
            for path in sorted((out / key).glob("*.png")):
                per_file[f"{key}/{path.name}"] = hashlib.sha256(
                    path.read_bytes()).hexdigest()
        digests[workers] = per_file
    same_manifest = manifests[1] == manifests[8]
    same_files = digests[1] == digests[8]
    report(
        "determinism (500 samples, 1 vs 8 workers)",
        same_manifest and same_files,
        f"manifest identical: {same_manifest}, "
        f"{len(digests[1])} file hashes identical: {same_files}")


def test_identity_cases(font_set):
    mask = rasterize("Anchor", font_set[0].font_id, font_set, 256, 64)
    arc_identity = True
    for direction in ArcDirection:
        out = arc_warp(mask, ArcParams(0, direction))
        arc_identity &= np.array_equal(out.alpha, mask.alpha)
        arc_identity &= out.per_glyph_boxes == mask.per_glyph_boxes

    cam = CameraModel.for_canvas(256, 64)
    _, hom = flat_perspective_warp(mask.alpha, np.eye(4), cam)
    corners = np.array([[0, 0], [256, 0], [256, 64], [0, 64]], dtype=float)
    corner_err = float(np.abs(apply_homography(hom, corners) - corners).max())
    report(
        "identity cases (arc 0, zero rotation)",
        arc_identity and corner_err <= 1e-6,
        f"arc identity {arc_identity}, corner error {corner_err:.2e} px")


def test_scale_smoke_2k(run_2k):
    out, elapsed = run_2k
    n_pngs = sum(1 for key in IMAGE_KEYS for _ in (out / key).glob("*.png"))
    manifest_lines = len((out / "manifest.jsonl").read_text().splitlines())
    report(
        "scale smoke (2k pairs in < 5 min)",
        n_pngs == 14_000 and manifest_lines == 2_000 and elapsed < 300.0,
        f"{n_pngs} PNGs, {manifest_lines} manifest lines, {elapsed:.0f}s "
        f"(~{elapsed / 2000 * 150000 / 60:.0f} min extrapolated to 150k)")


def test_validator_passes_on_fresh_runs(run_2k):
    out, _ = run_2k
    rep = audit_dataset(out, pair_fraction=0.1)
    report(
        "auditor passes its own generator (2k run)",
        rep.passed,
        f"{rep.record_count} records, {rep.total_violations} violations, "
        f"{sum(1 for c in rep.checks if not c.passed)} failed checks")
