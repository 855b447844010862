"""Dataset conformance auditing.

Checks any on-disk dataset against the generator's contracts: manifest
integrity, per-record invariants, normal/angle self-consistency, the
pair-background invariant, and chi-square conformance of the empirical
axis/angle/arc distributions. Reports can be rendered to delimited files
plus matplotlib figures for inspection.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from PIL import Image
from scipy.stats import chi2

from .dataset_io import SampleRecord, read_manifest
from .geometry3d import decode_normal
from .sampler import AXIS_WEIGHTS

CHI2_ALPHA = 0.001
MIN_CHI2_COUNT = 5000

MAX_REPORTED_VIOLATIONS = 100

ARC_LEVELS = (0, 60, 120)
SWEEP_RANGE = (30.0, 120.0)
SPAN_TOLERANCE_DEG = 5.0

AXIS_TARGETS = {combo.value: weight for combo, weight in AXIS_WEIGHTS.items()}
MAGNITUDE_TARGETS = {"small": 1 / 3, "medium": 1 / 3, "large": 1 / 3}
SIGN_TARGETS = {"ccw": 0.5, "cw": 0.5}
ARC_TARGETS = {str(level): 1 / 3 for level in ARC_LEVELS}


@dataclass
class CheckResult:
    name: str
    passed: bool
    detail: str = ""
    statistic: float | None = None
    critical: float | None = None

    def to_json_dict(self) -> dict:
        return {
            "name": self.name,
            "passed": self.passed,
            "detail": self.detail,
            "statistic": self.statistic,
            "critical": self.critical,
        }


@dataclass
class AuditReport:
    checks: list = field(default_factory=list)
    violations: list = field(default_factory=list)  # (record id, message)
    total_violations: int = 0
    distributions: dict = field(default_factory=dict)
    record_count: int = 0

    @property
    def passed(self) -> bool:
        return self.total_violations == 0 and all(c.passed for c in self.checks)

    def add_violation(self, record_id: str, message: str) -> None:
        if len(self.violations) < MAX_REPORTED_VIOLATIONS:
            self.violations.append((record_id, message))
        self.total_violations += 1

    def to_json_dict(self) -> dict:
        return {
            "passed": self.passed,
            "record_count": self.record_count,
            "total_violations": self.total_violations,
            "violations": [{"id": i, "message": m} for i, m in self.violations],
            "checks": [c.to_json_dict() for c in self.checks],
            "distributions": self.distributions,
        }


def categorize_magnitude(value: float) -> str | None:
    """Table category of an angle magnitude, or None when out of range."""
    magnitude = abs(value)
    if magnitude == 30.0:
        return "small"
    if 45.0 <= magnitude <= 60.0:
        return "medium"
    if 65.0 <= magnitude <= 70.0:
        return "large"
    return None


def active_angles(record: SampleRecord) -> list[float]:
    return [v for v in (record.theta, record.phi, record.gamma) if v != 0.0]


def record_violations(root: Path, record: SampleRecord, check_files: bool = True) -> list[str]:
    """Per-record invariant checks; returns human-readable violation messages."""
    problems = []
    if record.text_s == record.text_t:
        problems.append("text_s equals text_t")
    if record.kind not in ("flat_rotated", "cylinder_bent"):
        problems.append(f"unknown kind {record.kind!r}")
    if record.arc_angle not in ARC_LEVELS:
        problems.append(f"arc_angle {record.arc_angle} not an allowed level")
    if record.arc_direction not in ("arch_up", "arch_down"):
        problems.append(f"unknown arc_direction {record.arc_direction!r}")
    if not all(0 <= v <= 255 for v in record.fill_rgb) or len(record.fill_rgb) != 3:
        problems.append(f"fill_rgb {record.fill_rgb} out of byte range")

    angles = {"theta": record.theta, "phi": record.phi, "gamma": record.gamma}
    if record.kind == "flat_rotated":
        if not record.axis_combination:
            problems.append("flat record missing axis_combination")
        else:
            declared = set(record.axis_combination.split("_"))
            actual = {name for name, v in angles.items() if v != 0.0}
            if declared != actual:
                problems.append(
                    f"axis_combination {record.axis_combination!r} inconsistent "
                    f"with angles {angles}")
            for name in declared:
                if categorize_magnitude(angles[name]) is None:
                    problems.append(
                        f"angle {name}={angles[name]} outside the allowed ranges")
        if record.order_policy not in ("near_field", "far_field"):
            problems.append(f"bad order_policy {record.order_policy!r}")
        if record.sweep_angle is not None:
            problems.append("flat record carries a sweep_angle")
    else:
        if any(v != 0.0 for v in angles.values()):
            problems.append(f"bent record has nonzero rotation angles {angles}")
        if record.axis_combination is not None:
            problems.append("bent record carries an axis_combination")
        if record.sweep_angle is None or not \
                SWEEP_RANGE[0] <= record.sweep_angle <= SWEEP_RANGE[1]:
            problems.append(f"sweep_angle {record.sweep_angle} outside {SWEEP_RANGE}")

    if check_files:
        for key, rel in record.files.items():
            if not (root / rel).is_file():
                problems.append(f"missing file {rel}")
    return problems


def chi_square_check(name: str, counts: dict, targets: dict, alpha: float = CHI2_ALPHA) -> CheckResult:
    n = sum(counts.values())
    stat = 0.0
    for category, weight in targets.items():
        expected = n * weight
        observed = counts.get(category, 0)
        stat += (observed - expected) ** 2 / expected
    critical = float(chi2.isf(alpha, df=len(targets) - 1))
    freqs = {k: round(counts.get(k, 0) / n, 4) for k in targets}
    return CheckResult(
        name=name,
        passed=stat <= critical,
        detail=f"n={n} freqs={freqs}",
        statistic=round(stat, 3),
        critical=round(critical, 3),
    )


def _load_rgb(path: Path) -> np.ndarray:
    with Image.open(path) as img:
        return np.asarray(img.convert("RGB"), dtype=np.uint8)


def _load_gray(path: Path) -> np.ndarray:
    with Image.open(path) as img:
        return np.asarray(img.convert("L"), dtype=np.uint8)


def modal_ink_color(mask: np.ndarray) -> tuple | None:
    ink = mask.any(axis=2)
    if not ink.any():
        return None
    colors, counts = np.unique(mask[ink].reshape(-1, 3), axis=0, return_counts=True)
    return tuple(int(v) for v in colors[int(np.argmax(counts))])


def decoded_station_yaws(mask: np.ndarray) -> list[float]:
    """Per-color decoded yaw angles ordered by the color's mean column."""
    ink = mask.any(axis=2)
    if not ink.any():
        return []
    colors = np.unique(mask[ink].reshape(-1, 3), axis=0)
    ordered = []
    for color in colors:
        sel = (mask == color).all(axis=2) & ink
        mean_x = float(np.nonzero(sel)[1].mean())
        n = decode_normal(tuple(int(v) for v in color))
        yaw = math.degrees(math.atan2(-n[0], n[2]))
        ordered.append((mean_x, yaw))
    ordered.sort()
    return [yaw for _, yaw in ordered]


def check_self_consistency(root: Path, record: SampleRecord,
                           both_sides: bool = False) -> list[str]:
    """The mask must agree with the manifest: flat records re-derive the
    encoded plane normal; bent records decode monotone stations spanning the
    recorded sweep."""
    problems = []
    sides = ("mask_s", "mask_t") if both_sides else ("mask_s",)
    for side in sides:
        mask = _load_rgb(root / record.files[side])
        if record.kind == "flat_rotated":
            expected = record.expected_flat_color()
            modal = modal_ink_color(mask)
            if modal != expected:
                problems.append(f"{side} modal color {modal} != expected {expected}")
        else:
            yaws = decoded_station_yaws(mask)
            if not yaws:
                problems.append(f"{side} has no ink")
                continue
            if any(b <= a for a, b in zip(yaws, yaws[1:])):
                problems.append(f"{side} station yaws not increasing: {yaws}")
            if len(yaws) >= 2:
                span = yaws[-1] - yaws[0]
                if abs(span - record.sweep_angle) > SPAN_TOLERANCE_DEG:
                    problems.append(
                        f"{side} yaw span {span:.2f} != sweep "
                        f"{record.sweep_angle:.2f} +/- {SPAN_TOLERANCE_DEG}")
    return problems


def check_pair_invariant(root: Path, record: SampleRecord) -> list[str]:
    """i_s and i_t must match outside the union of binary masks, and each
    composite must match the clean background outside its own mask."""
    problems = []
    i_s = _load_rgb(root / record.files["i_s"])
    i_t = _load_rgb(root / record.files["i_t"])
    t_b = _load_rgb(root / record.files["t_b"])
    bin_s = _load_gray(root / record.files["bin_s"]) > 0
    bin_t = _load_gray(root / record.files["bin_t"]) > 0

    outside_union = ~bin_s & ~bin_t
    bad = int((i_s[outside_union] != i_t[outside_union]).any(axis=-1).sum())
    if bad:
        problems.append(f"{bad} px differ between i_s and i_t outside both masks")
    bad = int((i_s[~bin_s] != t_b[~bin_s]).any(axis=-1).sum())
    if bad:
        problems.append(f"{bad} px differ between i_s and t_b outside bin_s")
    bad = int((i_t[~bin_t] != t_b[~bin_t]).any(axis=-1).sum())
    if bad:
        problems.append(f"{bad} px differ between i_t and t_b outside bin_t")

    mask_s = _load_rgb(root / record.files["mask_s"])
    if not np.array_equal(mask_s.any(axis=2), bin_s):
        problems.append("mask_s support differs from bin_s support")
    return problems


def empirical_distributions(records: list) -> dict:
    """Observed counts shaped like the prescribed tables."""
    axis_counts = {}
    magnitude_counts = {"small": 0, "medium": 0, "large": 0, "out_of_range": 0}
    sign_counts = {"ccw": 0, "cw": 0}
    signed_table = {("ccw", c): 0 for c in MAGNITUDE_TARGETS}
    signed_table.update({("cw", c): 0 for c in MAGNITUDE_TARGETS})
    arc_counts = {str(level): 0 for level in ARC_LEVELS}
    kind_counts = {}

    for rec in records:
        axis = rec.axis_combination or "none"
        axis_counts[axis] = axis_counts.get(axis, 0) + 1
        arc_counts[str(rec.arc_angle)] = arc_counts.get(str(rec.arc_angle), 0) + 1
        kind_counts[rec.kind] = kind_counts.get(rec.kind, 0) + 1
        if rec.kind == "flat_rotated":
            for value in active_angles(rec):
                category = categorize_magnitude(value)
                if category is None:
                    magnitude_counts["out_of_range"] += 1
                    continue
                magnitude_counts[category] += 1
                sense = "cw" if value < 0 else "ccw"
                sign_counts[sense] += 1
                signed_table[(sense, category)] += 1

    return {
        "axis_combinations": axis_counts,
        "angle_magnitudes": magnitude_counts,
        "angle_signs": sign_counts,
        "angle_table": {f"{sense}_{cat}": v for (sense, cat), v in signed_table.items()},
        "arc_levels": arc_counts,
        "kinds": kind_counts,
    }


def audit_dataset(dataset_dir, pair_fraction: float = 0.1,
                  full: bool = False) -> AuditReport:
    """Run every audit check against an on-disk dataset."""
    root = Path(dataset_dir)
    report = AuditReport()
    records = read_manifest(root)
    report.record_count = len(records)
    report.distributions = empirical_distributions(records)

    ids = [rec.id for rec in records]
    report.checks.append(CheckResult(
        "manifest_ids_unique_and_sorted",
        passed=(ids == sorted(ids) and len(set(ids)) == len(ids)),
        detail=f"{len(ids)} records"))

    broken_ids = set()
    for rec in records:
        problems = record_violations(root, rec)
        if problems:
            broken_ids.add(rec.id)
        for message in problems:
            report.add_violation(rec.id, message)

    for rec in records:
        if rec.id in broken_ids:
            continue  # image checks need every file present
        try:
            for message in check_self_consistency(root, rec, both_sides=full):
                report.add_violation(rec.id, message)
        except OSError as exc:
            report.add_violation(rec.id, f"unreadable image: {exc}")

    if full or pair_fraction >= 1.0:
        pair_subset = records
    else:
        stride = max(1, round(1.0 / max(pair_fraction, 1e-9)))
        pair_subset = records[::stride]
    for rec in pair_subset:
        if rec.id in broken_ids:
            continue
        try:
            for message in check_pair_invariant(root, rec):
                report.add_violation(rec.id, message)
        except OSError as exc:
            report.add_violation(rec.id, f"unreadable image: {exc}")
    report.checks.append(CheckResult(
        "pair_invariant_scope",
        passed=True,
        detail=f"checked {len(pair_subset)}/{len(records)} records"))

    # range conformance is a hard zero-tolerance gate at any dataset size
    out_of_range = report.distributions["angle_magnitudes"]["out_of_range"]
    report.checks.append(CheckResult(
        "angle_ranges", passed=(out_of_range == 0),
        detail=f"{out_of_range} active angle(s) outside the allowed ranges"))

    flat = [rec for rec in records if rec.kind == "flat_rotated"]
    if len(flat) >= MIN_CHI2_COUNT:
        axis_counts = {k: v for k, v in
                       report.distributions["axis_combinations"].items() if k != "none"}
        report.checks.append(chi_square_check(
            "axis_combination_chi_square", axis_counts, AXIS_TARGETS))
        magnitude_counts = {k: v for k, v in
                            report.distributions["angle_magnitudes"].items()
                            if k != "out_of_range"}
        report.checks.append(chi_square_check(
            "angle_magnitude_chi_square", magnitude_counts, MAGNITUDE_TARGETS))
        report.checks.append(chi_square_check(
            "angle_sign_chi_square", report.distributions["angle_signs"], SIGN_TARGETS))
    if len(records) >= MIN_CHI2_COUNT:
        report.checks.append(chi_square_check(
            "arc_level_chi_square", report.distributions["arc_levels"], ARC_TARGETS))
    return report


def _fraction_rows(section: str, counts: dict, targets: dict | None) -> list:
    total = sum(counts.values()) or 1
    rows = []
    for category in sorted(counts):
        expected = "" if not targets else targets.get(category, "")
        rows.append([section, category, counts[category],
                     round(counts[category] / total, 6), expected])
    return rows


def write_report_files(report: AuditReport, out_dir) -> list[str]:
    """Render the audit to delimited files plus distribution figures.

    Returns the list of files written (relative to out_dir)."""
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    written = []

    with open(out / "distributions.csv", "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["section", "category", "count", "fraction", "expected_fraction"])
        d = report.distributions
        writer.writerows(_fraction_rows("axis_combinations", d["axis_combinations"], AXIS_TARGETS))
        writer.writerows(_fraction_rows("angle_magnitudes",
                                        {k: v for k, v in d["angle_magnitudes"].items()
                                         if k != "out_of_range"}, MAGNITUDE_TARGETS))
        writer.writerows(_fraction_rows("angle_signs", d["angle_signs"], SIGN_TARGETS))
        writer.writerows(_fraction_rows("angle_table", d["angle_table"], None))
        writer.writerows(_fraction_rows("arc_levels", d["arc_levels"], ARC_TARGETS))
        writer.writerows(_fraction_rows("kinds", d["kinds"], None))
    written.append("distributions.csv")

    with open(out / "checks.csv", "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["check", "passed", "statistic", "critical", "detail"])
        for check in report.checks:
            writer.writerow([check.name, check.passed, check.statistic,
                             check.critical, check.detail])
        writer.writerow(["total_violations", report.total_violations == 0,
                         report.total_violations, 0, ""])
    written.append("checks.csv")

    figures = [
        ("axis_combinations.png", "Axis combinations",
         report.distributions["axis_combinations"], AXIS_TARGETS),
        ("angle_magnitudes.png", "Angle magnitude categories",
         {k: v for k, v in report.distributions["angle_magnitudes"].items()
          if k != "out_of_range"}, MAGNITUDE_TARGETS),
        ("arc_levels.png", "Arc distortion levels",
         report.distributions["arc_levels"], ARC_TARGETS),
        ("kinds.png", "Sample kinds", report.distributions["kinds"], None),
    ]
    for filename, title, counts, targets in figures:
        if not counts:
            continue
        total = sum(counts.values()) or 1
        labels = sorted(counts)
        observed = [counts[k] / total for k in labels]
        fig, ax = plt.subplots(figsize=(6.4, 3.2))
        xs = np.arange(len(labels))
        ax.bar(xs - 0.18, observed, width=0.36, label="observed")
        if targets:
            expected = [targets.get(k, 0.0) for k in labels]
            ax.bar(xs + 0.18, expected, width=0.36, label="expected")
        ax.set_xticks(xs)
        ax.set_xticklabels(labels, rotation=30, ha="right", fontsize=8)
        ax.set_ylabel("fraction")
        ax.set_title(title)
        ax.legend(fontsize=8)
        fig.tight_layout()
        fig.savefig(out / filename, dpi=110)
        plt.close(fig)
        written.append(filename)
    return written
