"""Core domain types: minutiae, orientation fields, descriptors, templates.

All types are treated as immutable after construction and are safe to share
read-only across comparison workers.  Constructors normalize array dtypes
but do not enforce semantic invariants; :func:`validate_template` reports
violations instead of raising, so malformed data can be inspected.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from enum import Enum

import numpy as np

from . import angles

TWO_PI = angles.TWO_PI

#: maximum deviation from unit Euclidean norm tolerated for descriptors
UNIT_NORM_TOL = 1e-6


class MinutiaKind(Enum):
    TRUE = "true"
    VIRTUAL = "virtual"


class TemplateVariant(Enum):
    LATENT_1 = "latent1"
    LATENT_2 = "latent2"
    REFERENCE = "reference"


class TextureSide(Enum):
    LATENT = "latent"
    REFERENCE = "reference"


@dataclass
class Minutia:
    """Oriented point feature: location in pixels, direction in [0, 2pi)."""

    x: float
    y: float
    alpha: float
    kind: MinutiaKind = MinutiaKind.TRUE

    def __post_init__(self):
        self.x = float(self.x)
        self.y = float(self.y)
        self.alpha = float(self.alpha)
        if not isinstance(self.kind, MinutiaKind):
            self.kind = MinutiaKind(self.kind)


@dataclass
class OrientationField:
    """Block-wise undirected ridge orientation with a validity mask.

    ``theta[by, bx]`` is the ridge orientation in [0, pi) of the block whose
    center sits at ``((bx + 0.5) * block_size, (by + 0.5) * block_size)``
    pixels; ``mask[by, bx]`` is True for blocks inside the ROI with a
    reliable estimate.
    """

    block_size: int
    theta: np.ndarray
    mask: np.ndarray

    def __post_init__(self):
        self.block_size = int(self.block_size)
        self.theta = np.ascontiguousarray(self.theta, dtype=np.float64)
        self.mask = np.ascontiguousarray(self.mask, dtype=bool)

    @property
    def height_blocks(self) -> int:
        return self.theta.shape[0]

    @property
    def width_blocks(self) -> int:
        return self.theta.shape[1]

    @property
    def width_px(self) -> int:
        return self.width_blocks * self.block_size

    @property
    def height_px(self) -> int:
        return self.height_blocks * self.block_size

    def block_centers(self) -> tuple[np.ndarray, np.ndarray]:
        """Pixel coordinates (cx, cy) of every block center, row-major."""
        by, bx = np.mgrid[0:self.height_blocks, 0:self.width_blocks]
        cx = (bx + 0.5) * self.block_size
        cy = (by + 0.5) * self.block_size
        return cx, cy


@dataclass
class Descriptor:
    """Per-minutia descriptor: one unit vector per patch type."""

    vectors: dict[str, np.ndarray]

    def __post_init__(self):
        self.vectors = {
            str(k): np.ascontiguousarray(v, dtype=np.float64)
            for k, v in self.vectors.items()
        }

    @property
    def patch_type_ids(self) -> tuple[str, ...]:
        return tuple(sorted(self.vectors))

    def vector(self, patch_type_id: str) -> np.ndarray:
        return self.vectors[patch_type_id]


@dataclass
class MinutiaeTemplate:
    """True-minutiae template: ridge flow, minutiae and their descriptors."""

    minutiae: list[Minutia]
    descriptors: list[Descriptor]
    orientation_field: OrientationField
    source_id: str
    variant: TemplateVariant

    def __post_init__(self):
        if not isinstance(self.variant, TemplateVariant):
            self.variant = TemplateVariant(self.variant)

    @property
    def points(self) -> list[Minutia]:
        return self.minutiae

    @property
    def bounds(self) -> tuple[int, int]:
        """(width_px, height_px) of the template's coordinate frame."""
        of = self.orientation_field
        return of.width_px, of.height_px


@dataclass
class TextureTemplate:
    """Virtual-minutiae template sampled from the ridge flow on a block grid.

    Latent-side templates carry *pairs* of co-located virtual minutiae with
    directions alpha and alpha+pi; reference-side templates carry a single
    virtual minutia per block.
    """

    virtual_minutiae: list[Minutia]
    descriptors: list[Descriptor]
    source_id: str
    side: TextureSide
    width_px: int
    height_px: int
    block_size: int = 16

    def __post_init__(self):
        if not isinstance(self.side, TextureSide):
            self.side = TextureSide(self.side)
        self.width_px = int(self.width_px)
        self.height_px = int(self.height_px)
        self.block_size = int(self.block_size)

    @property
    def points(self) -> list[Minutia]:
        return self.virtual_minutiae

    @property
    def bounds(self) -> tuple[int, int]:
        return self.width_px, self.height_px


@dataclass
class SubjectRecord:
    """One enrolled subject: a reference minutiae template plus texture."""

    subject_id: str
    minutiae_template: MinutiaeTemplate
    texture_template: TextureTemplate


# --------------------------------------------------------------------------
# validation


@dataclass
class Violation:
    code: str
    message: str

    def as_dict(self) -> dict:
        return {"code": self.code, "message": self.message}


@dataclass
class ValidationReport:
    source_id: str
    violations: list[Violation] = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return not self.violations

    def add(self, code: str, message: str) -> None:
        self.violations.append(Violation(code, message))

    def to_json(self) -> str:
        return json.dumps({
            "source_id": self.source_id,
            "ok": self.ok,
            "violations": [v.as_dict() for v in self.violations],
        }, sort_keys=True)


def _check_minutiae(report, minutiae, bounds, expected_kind):
    width, height = bounds
    for i, m in enumerate(minutiae):
        if m.kind is not expected_kind:
            report.add("wrong_kind",
                       f"minutia {i}: kind {m.kind.value}, expected "
                       f"{expected_kind.value}")
        if not (0.0 <= m.alpha < TWO_PI) or not math.isfinite(m.alpha):
            report.add("alpha_out_of_range",
                       f"minutia {i}: alpha out of [0,2pi): {m.alpha}")
        if not (0.0 <= m.x < width and 0.0 <= m.y < height):
            report.add("out_of_bounds",
                       f"minutia {i}: ({m.x}, {m.y}) outside "
                       f"{width}x{height}")


def _check_descriptors(report, descriptors, n_points):
    if len(descriptors) != n_points:
        report.add("descriptor_count",
                   f"{len(descriptors)} descriptors for {n_points} minutiae")
    type_sets = {d.patch_type_ids for d in descriptors}
    if len(type_sets) > 1:
        report.add("patch_type_mismatch",
                   f"templates must carry one patch-type set, found "
                   f"{sorted(type_sets)}")
    for i, d in enumerate(descriptors):
        for pt, vec in d.vectors.items():
            norm = float(np.linalg.norm(vec))
            if abs(norm - 1.0) > UNIT_NORM_TOL:
                report.add("not_unit_norm",
                           f"descriptor {i} patch {pt}: norm {norm:.8f}")


def _check_orientation_field(report, of):
    if of.theta.shape != of.mask.shape:
        report.add("field_shape",
                   f"theta {of.theta.shape} vs mask {of.mask.shape}")
        return
    masked = of.theta[of.mask]
    bad = ~((masked >= 0.0) & (masked < math.pi))
    if bad.any():
        report.add("theta_out_of_range",
                   f"{int(bad.sum())} masked blocks with theta outside "
                   f"[0,pi)")


def _check_virtual_pairs(report, minutiae):
    groups: dict[tuple[float, float], list[Minutia]] = {}
    for m in minutiae:
        groups.setdefault((m.x, m.y), []).append(m)
    for (x, y), members in groups.items():
        if len(members) != 2:
            report.add("unpaired_virtual_minutia",
                       f"{len(members)} virtual minutiae at ({x}, {y}), "
                       f"expected a pair")
            continue
        a, b = members
        if b.alpha != angles.antipode(a.alpha) and \
                a.alpha != angles.antipode(b.alpha):
            report.add("pair_not_antipodal",
                       f"pair at ({x}, {y}) directions {a.alpha}, {b.alpha} "
                       f"do not differ by pi")


def _check_border(report, minutiae, bounds, margin):
    width, height = bounds
    for i, m in enumerate(minutiae):
        if m.x < margin or m.x > width - margin or \
                m.y < margin or m.y > height - margin:
            report.add("too_close_to_border",
                       f"virtual minutia {i} at ({m.x}, {m.y}) within one "
                       f"block of the border")


def validate_template(t: MinutiaeTemplate | TextureTemplate) -> ValidationReport:
    """Check every structural invariant of a template.

    Returns a report listing all violations; the report is empty iff the
    template is well formed.
    """
    report = ValidationReport(source_id=t.source_id)
    if isinstance(t, MinutiaeTemplate):
        _check_orientation_field(report, t.orientation_field)
        _check_minutiae(report, t.minutiae, t.bounds, MinutiaKind.TRUE)
        _check_descriptors(report, t.descriptors, len(t.minutiae))
    elif isinstance(t, TextureTemplate):
        _check_minutiae(report, t.virtual_minutiae, t.bounds,
                        MinutiaKind.VIRTUAL)
        _check_descriptors(report, t.descriptors, len(t.virtual_minutiae))
        _check_border(report, t.virtual_minutiae, t.bounds, t.block_size)
        if t.side is TextureSide.LATENT:
            _check_virtual_pairs(report, t.virtual_minutiae)
    else:
        raise TypeError(f"not a template: {type(t)!r}")
    return report
