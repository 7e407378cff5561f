"""Minutia descriptors: the 14-type patch catalog, a handcrafted baseline
descriptor (orientation histograms), cosine similarity and candidate
selection.

Descriptors are pluggable: anything that attaches unit vectors keyed by
patch type to a template works, including vectors loaded from a sidecar
file (:func:`load_descriptor_sidecar`).  The baseline here is deterministic
and contrast invariant, which the test oracles rely on.
"""

from __future__ import annotations

import copy
import json
from dataclasses import dataclass
from pathlib import Path
from typing import NamedTuple, Sequence

import numpy as np

from .errors import MissingPatchTypeError, PatchSetMismatchError
from .model import Descriptor


class PatchType(NamedTuple):
    """Catalog entry: window side length and center offset (in the
    rotation-normalized frame) relative to the minutia."""

    id: str
    size: int
    dx: float
    dy: float


_OFFSET = 32.0  # (160 - 96) / 2: offset windows hug the 160x160 extent

#: six centered scales plus eight offset 96x96 windows
PATCH_CATALOG: tuple[PatchType, ...] = (
    PatchType("c80", 80, 0.0, 0.0),
    PatchType("c96", 96, 0.0, 0.0),
    PatchType("c112", 112, 0.0, 0.0),
    PatchType("c128", 128, 0.0, 0.0),
    PatchType("c144", 144, 0.0, 0.0),
    PatchType("c160", 160, 0.0, 0.0),
    PatchType("tl96", 96, -_OFFSET, -_OFFSET),
    PatchType("tr96", 96, _OFFSET, -_OFFSET),
    PatchType("br96", 96, _OFFSET, _OFFSET),
    PatchType("bl96", 96, -_OFFSET, _OFFSET),
    PatchType("t96", 96, 0.0, -_OFFSET),
    PatchType("r96", 96, _OFFSET, 0.0),
    PatchType("l96", 96, -_OFFSET, 0.0),
    PatchType("b96", 96, 0.0, _OFFSET),
)

CATALOG_IDS: tuple[str, ...] = tuple(p.id for p in PATCH_CATALOG)

PATCH_BY_ID: dict[str, PatchType] = {p.id: p for p in PATCH_CATALOG}

#: subset used by default (one small centered window plus two flanking ones)
DEFAULT_PATCH_TYPES: tuple[str, ...] = ("c80", "l96", "r96")


@dataclass(frozen=True)
class PatchTypeCatalog:
    """The full catalog together with the currently selected subset."""

    selected_subset: tuple[str, ...] = DEFAULT_PATCH_TYPES

    def __post_init__(self):
        unknown = set(self.selected_subset) - set(CATALOG_IDS)
        if unknown:
            raise ValueError(f"unknown patch types: {sorted(unknown)}")

    @property
    def entries(self) -> tuple[PatchType, ...]:
        return PATCH_CATALOG


# --------------------------------------------------------------------------
# baseline descriptor: orientation histograms on a spatial grid

HOG_GRID = 4
HOG_BINS = 8
DESCRIPTOR_DIM = HOG_GRID * HOG_GRID * HOG_BINS  # 128


def _orientation_histogram(pixels: np.ndarray) -> np.ndarray:
    """Gradient-orientation histogram over a HOG_GRID x HOG_GRID layout,
    soft-binned over HOG_BINS directions and L2-normalized.

    The histogram is linear in gradient magnitude, so a global intensity
    scaling cancels exactly after normalization.
    """
    p = np.asarray(pixels, dtype=np.float64)
    gy, gx = np.gradient(p)
    mag = np.hypot(gx, gy)
    ang = np.mod(np.arctan2(gy, gx), 2.0 * np.pi)

    n = p.shape[0]
    cell = n // HOG_GRID
    rows = np.minimum(np.arange(n) // cell, HOG_GRID - 1)
    cell_idx = rows[:, None] * HOG_GRID + rows[None, :]

    # linear interpolation between the two nearest orientation bins
    pos = ang * (HOG_BINS / (2.0 * np.pi)) - 0.5
    lo = np.floor(pos).astype(np.int64)
    frac = pos - lo
    lo = np.mod(lo, HOG_BINS)
    hi = np.mod(lo + 1, HOG_BINS)

    hist = np.zeros((HOG_GRID * HOG_GRID, HOG_BINS))
    flat_cell = cell_idx.ravel()
    np.add.at(hist, (flat_cell, lo.ravel()), (mag * (1.0 - frac)).ravel())
    np.add.at(hist, (flat_cell, hi.ravel()), (mag * frac).ravel())

    vec = hist.ravel()
    norm = np.linalg.norm(vec)
    if norm == 0.0:  # featureless patch: fall back to a fixed unit vector
        return np.full(vec.shape, 1.0 / np.sqrt(vec.size))
    return vec / norm


def compute_descriptor(patches: Sequence, required_types: Sequence[str] | None = None
                       ) -> Descriptor:
    """Build a descriptor from the patches of one minutia.

    ``required_types`` defaults to the patch types present; when given, a
    missing type raises MissingPatchTypeError.  Output vectors are unit
    norm and deterministic for identical input.
    """
    by_type = {}
    for patch in patches:
        if patch.patch_type_id in by_type:
            raise ValueError(
                f"duplicate patch type {patch.patch_type_id!r}")
        by_type[patch.patch_type_id] = patch
    wanted = tuple(required_types) if required_types is not None \
        else tuple(sorted(by_type))
    vectors = {}
    for pt in wanted:
        if pt not in by_type:
            raise MissingPatchTypeError(f"no patch of type {pt!r}")
        vectors[pt] = _orientation_histogram(by_type[pt].pixels)
    return Descriptor(vectors=vectors)


# --------------------------------------------------------------------------
# similarity

def descriptor_similarity(a: Descriptor, b: Descriptor) -> float:
    """Mean per-patch-type cosine similarity; in [-1, 1]."""
    if a.patch_type_ids != b.patch_type_ids:
        raise PatchSetMismatchError(
            f"{a.patch_type_ids} vs {b.patch_type_ids}")
    total = 0.0
    for pt in a.patch_type_ids:
        va, vb = a.vector(pt), b.vector(pt)
        total += float(np.dot(va, vb) /
                       (np.linalg.norm(va) * np.linalg.norm(vb)))
    return total / len(a.patch_type_ids)


def _stacked(template, patch_types: tuple[str, ...]) -> dict[str, np.ndarray]:
    """Row-stacked, re-normalized descriptor matrices, cached per template."""
    cache = getattr(template, "_descriptor_stacks", None)
    if cache is None:
        cache = {}
        template._descriptor_stacks = cache
    if patch_types not in cache:
        stacks = {}
        for pt in patch_types:
            mat = np.stack([d.vector(pt) for d in template.descriptors]) \
                if template.descriptors else np.zeros((0, 1))
            if mat.size:
                mat = mat / np.linalg.norm(mat, axis=1, keepdims=True)
            stacks[pt] = mat
        cache[patch_types] = stacks
    return cache[patch_types]


def shared_patch_types(lt, rt, patch_types: Sequence[str] | None = None
                       ) -> tuple[str, ...]:
    """The patch-type set P two templates are compared over."""
    left = lt.descriptors[0].patch_type_ids if lt.descriptors else ()
    right = rt.descriptors[0].patch_type_ids if rt.descriptors else ()
    if patch_types is not None:
        wanted = tuple(patch_types)
        missing = (set(wanted) - set(left)) | (set(wanted) - set(right))
        if missing:
            raise PatchSetMismatchError(
                f"requested patch types missing from templates: "
                f"{sorted(missing)}")
        return wanted
    if lt.descriptors and rt.descriptors and left != right:
        raise PatchSetMismatchError(f"{left} vs {right}")
    return left or right


def similarity_matrix(lt, rt, patch_types: Sequence[str] | None = None
                      ) -> np.ndarray:
    """Dense n_l x n_r matrix of descriptor similarities."""
    n_l, n_r = len(lt.points), len(rt.points)
    if n_l == 0 or n_r == 0:
        return np.zeros((n_l, n_r))
    if len(lt.descriptors) != n_l or len(rt.descriptors) != n_r:
        raise ValueError("templates must carry one descriptor per minutia")
    types = shared_patch_types(lt, rt, patch_types)
    if not types:
        raise PatchSetMismatchError("templates carry no descriptors")
    left = _stacked(lt, types)
    right = _stacked(rt, types)
    sim = np.zeros((n_l, n_r))
    for pt in types:
        sim += left[pt] @ right[pt].T
    return sim / len(types)


# --------------------------------------------------------------------------
# sidecar descriptor files

def save_descriptor_sidecar(path, templates: Sequence) -> None:
    """Write descriptors keyed by (source_id, minutia index, patch type)."""
    payload = {}
    for t in templates:
        entry = {}
        for idx, d in enumerate(t.descriptors):
            entry[str(idx)] = {pt: d.vector(pt).tolist()
                               for pt in d.patch_type_ids}
        payload[t.source_id] = entry
    Path(path).write_text(json.dumps(payload, sort_keys=True),
                          encoding="utf-8")


def load_descriptor_sidecar(path) -> dict:
    return json.loads(Path(path).read_text(encoding="utf-8"))


def with_sidecar_descriptors(template, sidecar: dict):
    """Return a copy of the template with descriptors from a sidecar."""
    entry = sidecar.get(template.source_id)
    if entry is None:
        raise MissingPatchTypeError(
            f"sidecar has no descriptors for {template.source_id!r}")
    descriptors = []
    for idx in range(len(template.points)):
        per_type = entry.get(str(idx))
        if per_type is None:
            raise MissingPatchTypeError(
                f"sidecar missing minutia index {idx} for "
                f"{template.source_id!r}")
        descriptors.append(Descriptor(
            {pt: np.asarray(vec, dtype=np.float64)
             for pt, vec in per_type.items()}))
    out = copy.copy(template)
    out.descriptors = descriptors
    if hasattr(out, "_descriptor_stacks"):
        del out._descriptor_stacks
    return out
