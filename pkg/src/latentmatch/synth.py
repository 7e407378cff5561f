"""Synthetic subjects and latents with exact ground truth.

Reference subjects get a smooth random orientation field, minutiae placed
with a minimum separation and descriptors drawn as random unit vectors;
latents are derived by a rigid transform plus controlled degradations
(occlusion, jitter, spurious minutiae, descriptor noise).  Everything is
deterministic in the seed, and the ground truth records the surviving-index
map and the exact alignment, which is what the matcher oracles test
against.

Descriptors are synthetic rather than image-derived on purpose: corrupted
copies of the reference vectors give the matcher realistic candidate lists
while keeping correctness questions independent of the imaging pipeline
(which is exercised separately on analytic gratings).
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass

import numpy as np

from . import angles
from .descriptors import DEFAULT_PATCH_TYPES
from .errors import PlacementFailureError
from .imaging import reference_virtual_minutiae
from .model import (Descriptor, Minutia, MinutiaKind, MinutiaeTemplate,
                    OrientationField, SubjectRecord, TemplateVariant,
                    TextureSide, TextureTemplate)
from .scoring import Alignment

#: minimum distance in pixels between generated reference minutiae
MIN_SEPARATION = 12.0

DESCRIPTOR_DIM = 128


@dataclass(frozen=True)
class FieldSpec:
    """Geometry of a synthetic subject's orientation field."""

    width_blocks: int = 24
    height_blocks: int = 24
    block_size: int = 16
    roi: str = "ellipse"  # "ellipse" or "full"
    # ellipse semi-axes as fractions of the half extents; shrink these to
    # keep content away from the frame under large rigid transforms
    roi_semi_axes: tuple[float, float] = (0.92, 0.96)

    @property
    def width_px(self) -> int:
        return self.width_blocks * self.block_size

    @property
    def height_px(self) -> int:
        return self.height_blocks * self.block_size


@dataclass(frozen=True)
class DistortionSpec:
    """Degradations applied when deriving a latent from a reference."""

    occlusion_fraction: float = 0.0
    position_jitter_sigma: float = 0.0
    angle_jitter_sigma: float = 0.0
    spurious_fraction: float = 0.0
    rigid_rotation: float = 0.0
    rigid_translation: tuple[float, float] = (0.0, 0.0)
    descriptor_noise_sigma: float = 0.0
    seed: int = 0

    def __post_init__(self):
        if not (0.0 <= self.occlusion_fraction <= 1.0):
            raise ValueError("occlusion_fraction must lie in [0, 1]")
        if not (0.0 <= self.spurious_fraction <= 1.0):
            raise ValueError("spurious_fraction must lie in [0, 1]")
        for name in ("position_jitter_sigma", "angle_jitter_sigma",
                     "descriptor_noise_sigma"):
            if getattr(self, name) < 0:
                raise ValueError(f"{name} must be non-negative")
        object.__setattr__(self, "rigid_translation",
                           (float(self.rigid_translation[0]),
                            float(self.rigid_translation[1])))

    def as_dict(self) -> dict:
        return {
            "occlusion_fraction": self.occlusion_fraction,
            "position_jitter_sigma": self.position_jitter_sigma,
            "angle_jitter_sigma": self.angle_jitter_sigma,
            "spurious_fraction": self.spurious_fraction,
            "rigid_rotation": self.rigid_rotation,
            "rigid_translation": list(self.rigid_translation),
            "descriptor_noise_sigma": self.descriptor_noise_sigma,
            "seed": self.seed,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "DistortionSpec":
        d = dict(d)
        if "rigid_translation" in d:
            d["rigid_translation"] = tuple(d["rigid_translation"])
        return cls(**d)


@dataclass
class GroundTruth:
    """Exact provenance of a derived latent.

    ``minutiae_map`` sends each surviving latent minutia index (shared by
    both latent minutiae templates; spurious minutiae are appended after
    the survivors) to its reference index; ``texture_map`` sends the latent
    virtual-minutia index of the in-correspondence pair member to its
    reference virtual-minutia index.  ``alignment`` maps latent coordinates
    onto reference coordinates.
    """

    minutiae_map: dict[int, int]
    texture_map: dict[int, int]
    alignment: Alignment

    def to_json(self) -> str:
        return json.dumps({
            "minutiae_map": {str(k): v for k, v in
                             sorted(self.minutiae_map.items())},
            "texture_map": {str(k): v for k, v in
                            sorted(self.texture_map.items())},
            "alignment": {
                "delta_alpha": self.alignment.delta_alpha,
                "delta_x": self.alignment.delta_x,
                "delta_y": self.alignment.delta_y,
            },
        }, sort_keys=True)

    @classmethod
    def from_json(cls, text: str) -> "GroundTruth":
        d = json.loads(text)
        return cls(
            minutiae_map={int(k): v for k, v in d["minutiae_map"].items()},
            texture_map={int(k): v for k, v in d["texture_map"].items()},
            alignment=Alignment(**d["alignment"]),
        )


@dataclass
class LatentQuery:
    """The three templates a latent contributes to a search."""

    query_id: str
    minutiae_template_1: MinutiaeTemplate
    minutiae_template_2: MinutiaeTemplate
    texture_template: TextureTemplate


# --------------------------------------------------------------------------
# reference generation


def _random_unit(rng: np.random.Generator, dim: int) -> np.ndarray:
    v = rng.standard_normal(dim)
    return v / np.linalg.norm(v)


def _random_descriptor(rng: np.random.Generator, patch_types) -> Descriptor:
    return Descriptor({pt: _random_unit(rng, DESCRIPTOR_DIM)
                       for pt in patch_types})


def _synthetic_field(rng: np.random.Generator, spec: FieldSpec
                     ) -> OrientationField:
    """Smooth orientation field from a low-order polynomial doubled-angle
    model, with an elliptical (or full) ROI mask."""
    h, w = spec.height_blocks, spec.width_blocks
    ys, xs = np.mgrid[0:h, 0:w]
    u = (xs - (w - 1) / 2.0) / max(w / 2.0, 1.0)
    v = (ys - (h - 1) / 2.0) / max(h / 2.0, 1.0)

    basis = [np.ones_like(u), u, v, u * v, u * u, v * v]
    c = sum(coef * b for coef, b in zip(rng.normal(size=6), basis))
    s = sum(coef * b for coef, b in zip(rng.normal(size=6), basis))
    theta = angles.wrap_orientation_array(0.5 * np.arctan2(s, c))

    if spec.roi == "full":
        mask = np.ones((h, w), dtype=bool)
    elif spec.roi == "ellipse":
        sx, sy = spec.roi_semi_axes
        mask = (u / sx) ** 2 + (v / sy) ** 2 <= 1.0
    else:
        raise ValueError(f"unknown roi shape {spec.roi!r}")
    theta = theta.copy()
    theta[~mask] = 0.0
    return OrientationField(block_size=spec.block_size, theta=theta,
                            mask=mask)


def _field_theta_at(of: OrientationField, x: float, y: float) -> float:
    bx = min(max(int(x // of.block_size), 0), of.width_blocks - 1)
    by = min(max(int(y // of.block_size), 0), of.height_blocks - 1)
    return float(of.theta[by, bx])


def generate_reference(seed: int, n_minutiae: int = 36,
                       field_spec: FieldSpec | None = None,
                       patch_types=DEFAULT_PATCH_TYPES,
                       subject_id: str | None = None) -> SubjectRecord:
    """Deterministically generate one enrolled subject.

    Minutiae are placed inside the ROI with a minimum separation of 12
    pixels and directed along the local ridge flow (randomly flipped by
    pi); raises PlacementFailureError when the separation constraint cannot
    be met.
    """
    if n_minutiae < 1:
        raise ValueError("n_minutiae must be at least 1")
    if field_spec is None:
        field_spec = FieldSpec()
    rng = np.random.default_rng(seed)
    of = _synthetic_field(rng, field_spec)

    masked = np.argwhere(of.mask)
    if masked.size == 0:
        raise PlacementFailureError("orientation field mask is empty")

    bs = field_spec.block_size
    placed_x: list[float] = []
    placed_y: list[float] = []
    minutiae: list[Minutia] = []
    attempts = 0
    max_attempts = 500 * n_minutiae
    while len(minutiae) < n_minutiae:
        attempts += 1
        if attempts > max_attempts:
            raise PlacementFailureError(
                f"placed {len(minutiae)} of {n_minutiae} minutiae after "
                f"{max_attempts} attempts")
        by, bx = masked[rng.integers(len(masked))]
        x = (bx + rng.random()) * bs
        y = (by + rng.random()) * bs
        if placed_x:
            dmin = np.hypot(np.array(placed_x) - x,
                            np.array(placed_y) - y).min()
            if dmin < MIN_SEPARATION:
                continue
        theta = _field_theta_at(of, x, y)
        flip = math.pi if rng.random() < 0.5 else 0.0
        minutiae.append(Minutia(x, y, angles.wrap_direction(theta + flip),
                                MinutiaKind.TRUE))
        placed_x.append(x)
        placed_y.append(y)

    descriptors = [_random_descriptor(rng, patch_types) for _ in minutiae]
    sid = subject_id if subject_id is not None else f"S{seed:08d}"
    minutiae_template = MinutiaeTemplate(
        minutiae=minutiae, descriptors=descriptors, orientation_field=of,
        source_id=sid, variant=TemplateVariant.REFERENCE)

    virtual = reference_virtual_minutiae(of)
    texture_template = TextureTemplate(
        virtual_minutiae=virtual,
        descriptors=[_random_descriptor(rng, patch_types) for _ in virtual],
        source_id=sid, side=TextureSide.REFERENCE,
        width_px=field_spec.width_px, height_px=field_spec.height_px,
        block_size=field_spec.block_size)
    return SubjectRecord(subject_id=sid, minutiae_template=minutiae_template,
                         texture_template=texture_template)


# --------------------------------------------------------------------------
# latent derivation


def _noisy_descriptor(rng: np.random.Generator, d: Descriptor,
                      sigma: float) -> Descriptor:
    """Perturb each per-type vector by sigma along a random unit direction,
    then renormalize."""
    out = {}
    for pt in d.patch_type_ids:
        v = d.vector(pt)
        if sigma > 0:
            v = v + sigma * _random_unit(rng, v.shape[0])
        out[pt] = v / np.linalg.norm(v)
    return Descriptor(out)


def _inverse_transform(alignment: Alignment, x: float, y: float
                       ) -> tuple[float, float]:
    """Latent coordinates of a reference point (inverse of
    Alignment.transform)."""
    cos_a = math.cos(alignment.delta_alpha)
    sin_a = math.sin(alignment.delta_alpha)
    rx = x - alignment.delta_x
    ry = y - alignment.delta_y
    return cos_a * rx + sin_a * ry, -sin_a * rx + cos_a * ry


def _derive_minutiae_template(rng, ref_template, survivors, alignment, spec,
                              field, variant, source_id, width, height,
                              patch_types):
    minutiae: list[Minutia] = []
    descriptors: list[Descriptor] = []
    index_map: dict[int, int] = {}
    for latent_idx, ref_idx in enumerate(survivors):
        m = ref_template.minutiae[ref_idx]
        x, y = _inverse_transform(alignment, m.x, m.y)
        if spec.position_jitter_sigma > 0:
            x += rng.normal(0.0, spec.position_jitter_sigma)
            y += rng.normal(0.0, spec.position_jitter_sigma)
        alpha = m.alpha - alignment.delta_alpha
        if spec.angle_jitter_sigma > 0:
            alpha += rng.normal(0.0, spec.angle_jitter_sigma)
        x = min(max(x, 0.0), width - 1e-9)
        y = min(max(y, 0.0), height - 1e-9)
        minutiae.append(Minutia(x, y, angles.wrap_direction(alpha),
                                MinutiaKind.TRUE))
        descriptors.append(_noisy_descriptor(
            rng, ref_template.descriptors[ref_idx],
            spec.descriptor_noise_sigma))
        index_map[latent_idx] = int(ref_idx)

    n_spurious = int(round(spec.spurious_fraction * len(survivors)))
    for _ in range(n_spurious):
        minutiae.append(Minutia(rng.uniform(0.0, width - 1e-9),
                                rng.uniform(0.0, height - 1e-9),
                                rng.uniform(0.0, angles.TWO_PI),
                                MinutiaKind.TRUE))
        descriptors.append(_random_descriptor(rng, patch_types))

    template = MinutiaeTemplate(minutiae=minutiae, descriptors=descriptors,
                                orientation_field=field,
                                source_id=source_id, variant=variant)
    return template, index_map


def _derive_latent_field(ref_field: OrientationField, alignment: Alignment,
                         occluded_ref_blocks: np.ndarray) -> OrientationField:
    """Reference orientation field expressed in latent coordinates."""
    cx, cy = ref_field.block_centers()
    tx, ty = alignment.transform(cx.ravel(), cy.ravel())
    bx = np.floor(tx / ref_field.block_size).astype(np.int64)
    by = np.floor(ty / ref_field.block_size).astype(np.int64)
    inside = (bx >= 0) & (bx < ref_field.width_blocks) & \
             (by >= 0) & (by < ref_field.height_blocks)
    theta = np.zeros(cx.size)
    mask = np.zeros(cx.size, dtype=bool)
    src_ok = inside
    sel_bx = bx[src_ok]
    sel_by = by[src_ok]
    mask[src_ok] = ref_field.mask[sel_by, sel_bx] & \
        ~occluded_ref_blocks[sel_by, sel_bx]
    theta[src_ok] = angles.wrap_orientation_array(
        ref_field.theta[sel_by, sel_bx] - alignment.delta_alpha)
    theta[~mask] = 0.0
    shape = (ref_field.height_blocks, ref_field.width_blocks)
    return OrientationField(block_size=ref_field.block_size,
                            theta=theta.reshape(shape),
                            mask=mask.reshape(shape))


def derive_latent(ref: SubjectRecord, spec: DistortionSpec,
                  query_id: str | None = None
                  ) -> tuple[LatentQuery, GroundTruth]:
    """Derive a latent (two minutiae templates plus one texture template)
    from a reference subject, with exact ground truth.

    The two minutiae templates share the occlusion survivors but draw
    jitter, spurious minutiae and descriptor noise independently,
    emulating two independent extraction pipelines.
    """
    rng = np.random.default_rng(spec.seed)
    tx, ty = spec.rigid_translation
    alignment = Alignment(delta_alpha=angles.signed_delta(spec.rigid_rotation),
                          delta_x=float(tx), delta_y=float(ty))

    ref_mt = ref.minutiae_template
    ref_field = ref_mt.orientation_field
    width = float(ref_field.width_px)
    height = float(ref_field.height_px)

    # contiguous occlusion: a half-plane sweep in reference coordinates
    n = len(ref_mt.minutiae)
    n_drop = int(round(spec.occlusion_fraction * n))
    psi = rng.uniform(0.0, angles.TWO_PI)
    proj = np.array([m.x * math.cos(psi) + m.y * math.sin(psi)
                     for m in ref_mt.minutiae])
    order = np.argsort(-proj, kind="stable")
    dropped = {int(i) for i in order[:n_drop]}
    if n_drop:
        cutoff = float(proj[order[n_drop - 1]])
    else:
        cutoff = float("inf")
    survivors = [i for i in range(n) if i not in dropped]

    # the same half-plane occludes orientation-field blocks
    cx, cy = ref_field.block_centers()
    occluded_blocks = (cx * math.cos(psi) + cy * math.sin(psi)) >= cutoff

    latent_field = _derive_latent_field(ref_field, alignment, occluded_blocks)
    patch_types = ref_mt.descriptors[0].patch_type_ids if ref_mt.descriptors \
        else DEFAULT_PATCH_TYPES

    qid = query_id if query_id is not None \
        else f"{ref.subject_id}-L{spec.seed:08d}"
    mt1, map1 = _derive_minutiae_template(
        rng, ref_mt, survivors, alignment, spec, latent_field,
        TemplateVariant.LATENT_1, qid, width, height, patch_types)
    mt2, _ = _derive_minutiae_template(
        rng, ref_mt, survivors, alignment, spec, latent_field,
        TemplateVariant.LATENT_2, qid, width, height, patch_types)

    # texture: surviving reference virtual minutiae become co-located
    # direction pairs in latent coordinates
    ref_tt = ref.texture_template
    bs = ref_tt.block_size
    virtual: list[Minutia] = []
    v_descriptors: list[Descriptor] = []
    texture_map: dict[int, int] = {}
    for ref_idx, vm in enumerate(ref_tt.virtual_minutiae):
        if vm.x * math.cos(psi) + vm.y * math.sin(psi) >= cutoff:
            continue  # occluded
        x, y = _inverse_transform(alignment, vm.x, vm.y)
        if spec.position_jitter_sigma > 0:
            x += rng.normal(0.0, spec.position_jitter_sigma)
            y += rng.normal(0.0, spec.position_jitter_sigma)
        if not (bs <= x <= width - bs and bs <= y <= height - bs):
            continue  # too close to the latent border
        alpha = vm.alpha - alignment.delta_alpha
        if spec.angle_jitter_sigma > 0:
            alpha += rng.normal(0.0, spec.angle_jitter_sigma)
        alpha = angles.wrap_direction(alpha)
        matching = Minutia(x, y, alpha, MinutiaKind.VIRTUAL)
        partner = Minutia(x, y, angles.antipode(alpha), MinutiaKind.VIRTUAL)
        matching_desc = _noisy_descriptor(rng, ref_tt.descriptors[ref_idx],
                                          spec.descriptor_noise_sigma)
        partner_desc = _random_descriptor(rng, patch_types)
        if rng.random() < 0.5:
            virtual.extend([matching, partner])
            v_descriptors.extend([matching_desc, partner_desc])
            texture_map[len(virtual) - 2] = ref_idx
        else:
            virtual.extend([partner, matching])
            v_descriptors.extend([partner_desc, matching_desc])
            texture_map[len(virtual) - 1] = ref_idx

    tt = TextureTemplate(virtual_minutiae=virtual, descriptors=v_descriptors,
                         source_id=qid, side=TextureSide.LATENT,
                         width_px=int(width), height_px=int(height),
                         block_size=bs)
    latent = LatentQuery(query_id=qid, minutiae_template_1=mt1,
                         minutiae_template_2=mt2, texture_template=tt)
    truth = GroundTruth(minutiae_map=map1, texture_map=texture_map,
                        alignment=alignment)
    return latent, truth
