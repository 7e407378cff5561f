"""Image-side operations: orientation field estimation, virtual minutiae
placement and local patch extraction.

The orientation estimator is a classical block gradient-covariance method
(doubled-angle averaging with a coherence mask); it stands in for learned
ridge-flow estimators while keeping the downstream contracts identical.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from PIL import Image
from scipy import ndimage

from . import angles
from .errors import EmptyRoiError
from .model import Minutia, MinutiaKind, OrientationField

#: blocks with gradient coherence below this are masked out
COHERENCE_THRESHOLD = 0.2

#: fraction of a block's pixels that must be inside the ROI
ROI_BLOCK_FRACTION = 0.5

#: side length of every resampled patch, in pixels
PATCH_OUTPUT_SIZE = 160


@dataclass
class GrayImage:
    """8-bit grayscale image with a per-pixel region-of-interest mask."""

    pixels: np.ndarray
    roi_mask: np.ndarray

    def __post_init__(self):
        self.pixels = np.ascontiguousarray(self.pixels, dtype=np.uint8)
        if self.roi_mask is None:
            self.roi_mask = np.ones(self.pixels.shape, dtype=bool)
        self.roi_mask = np.ascontiguousarray(self.roi_mask, dtype=bool)
        if self.roi_mask.shape != self.pixels.shape:
            raise ValueError(
                f"ROI mask shape {self.roi_mask.shape} does not match image "
                f"shape {self.pixels.shape}")

    @property
    def height(self) -> int:
        return self.pixels.shape[0]

    @property
    def width(self) -> int:
        return self.pixels.shape[1]


def load_gray_image(image_path, mask_path=None) -> GrayImage:
    """Read an 8-bit grayscale PNG/PGM plus an optional same-size ROI mask."""
    pixels = np.asarray(Image.open(image_path).convert("L"))
    mask = None
    if mask_path is not None:
        mask = np.asarray(Image.open(mask_path).convert("L")) > 0
    return GrayImage(pixels=pixels, roi_mask=mask)


# --------------------------------------------------------------------------
# orientation field


def _block_sums(values: np.ndarray, block_size: int) -> np.ndarray:
    h, w = values.shape
    hb, wb = h // block_size, w // block_size
    cropped = values[:hb * block_size, :wb * block_size]
    return cropped.reshape(hb, block_size, wb, block_size).sum(axis=(1, 3))


def estimate_orientation_field(img: GrayImage, block_size: int = 16,
                               coherence_threshold: float = COHERENCE_THRESHOLD
                               ) -> OrientationField:
    """Estimate block-wise ridge orientation from image gradients.

    For each block the gradient covariance (Gxx, Gyy, Gxy) is accumulated;
    the dominant gradient direction is ``0.5 * atan2(2 Gxy, Gxx - Gyy)`` and
    the ridge orientation is perpendicular to it.  Blocks outside the ROI or
    with coherence below the threshold are masked out.

    Raises EmptyRoiError when no block lies inside the ROI at all; a field
    whose blocks all failed the coherence test is returned as-is with an
    empty mask.
    """
    if block_size < 8:
        raise ValueError("block_size must be at least 8 pixels")
    if img.height < block_size or img.width < block_size:
        raise ValueError("image smaller than one block")

    gray = img.pixels.astype(np.float64)
    gy, gx = np.gradient(gray)

    gxx = _block_sums(gx * gx, block_size)
    gyy = _block_sums(gy * gy, block_size)
    gxy = _block_sums(gx * gy, block_size)

    roi_fraction = _block_sums(img.roi_mask.astype(np.float64), block_size)
    roi_in = roi_fraction >= ROI_BLOCK_FRACTION * block_size * block_size
    if not roi_in.any():
        raise EmptyRoiError("no image block lies inside the ROI")

    energy = gxx + gyy
    strength = np.hypot(gxx - gyy, 2.0 * gxy)
    with np.errstate(invalid="ignore", divide="ignore"):
        coherence = np.where(energy > 0.0, strength / energy, 0.0)

    gradient_dir = 0.5 * np.arctan2(2.0 * gxy, gxx - gyy)
    theta = angles.wrap_orientation_array(gradient_dir + math.pi / 2.0)

    mask = roi_in & (coherence >= coherence_threshold)
    theta[~mask] = 0.0
    return OrientationField(block_size=block_size, theta=theta, mask=mask)


# --------------------------------------------------------------------------
# virtual minutiae


def _interior_masked_blocks(of: OrientationField) -> np.ndarray:
    """Indices (by, bx) of masked-in blocks at least one block from the
    field border; virtual minutiae close to the border are dropped."""
    interior = np.zeros_like(of.mask)
    if of.height_blocks > 2 and of.width_blocks > 2:
        interior[1:-1, 1:-1] = of.mask[1:-1, 1:-1]
    return np.argwhere(interior)


def latent_virtual_minutiae(of: OrientationField) -> list[Minutia]:
    """Two opposite-direction virtual minutiae per interior masked block.

    The undirected block orientation O yields the directed pair (O, O+pi)
    sharing the block-center location; at least one member can then agree
    with the single directed virtual minutia on the reference side.
    """
    out: list[Minutia] = []
    for by, bx in _interior_masked_blocks(of):
        cx = (bx + 0.5) * of.block_size
        cy = (by + 0.5) * of.block_size
        alpha = angles.wrap_direction(of.theta[by, bx])
        out.append(Minutia(cx, cy, alpha, MinutiaKind.VIRTUAL))
        out.append(Minutia(cx, cy, angles.antipode(alpha),
                           MinutiaKind.VIRTUAL))
    return out


def reference_virtual_minutiae(of: OrientationField) -> list[Minutia]:
    """One virtual minutia per interior masked block, direction in [0, pi)."""
    out: list[Minutia] = []
    for by, bx in _interior_masked_blocks(of):
        cx = (bx + 0.5) * of.block_size
        cy = (by + 0.5) * of.block_size
        alpha = angles.wrap_direction(of.theta[by, bx])
        out.append(Minutia(cx, cy, alpha, MinutiaKind.VIRTUAL))
    return out


# --------------------------------------------------------------------------
# patches


@dataclass
class Patch:
    """Rotation-normalized local crop resampled to 160x160 pixels."""

    patch_type_id: str
    pixels: np.ndarray
    center_minutia: Minutia


def extract_patch(img: GrayImage, m: Minutia, patch_type_id: str,
                  catalog=None) -> Patch:
    """Crop a window around a minutia after rotation normalization.

    The image is conceptually rotated by ``-m.alpha`` about the minutia, so
    the minutia direction maps to the +x axis; the window (whose size and
    offset come from the patch-type catalog) is then cropped and resampled
    to 160x160 with bilinear interpolation.  Pixels falling outside the
    image are filled with the mean ROI intensity.
    """
    from .descriptors import PATCH_BY_ID  # avoid import cycle at load time
    if catalog is None:
        catalog = PATCH_BY_ID
    ptype = catalog[patch_type_id] if isinstance(catalog, dict) else \
        next(p for p in catalog if p.id == patch_type_id)

    size = PATCH_OUTPUT_SIZE
    scale = ptype.size / size
    rel = (np.arange(size) - size // 2) * scale
    u, v = np.meshgrid(rel + ptype.dx, rel + ptype.dy)

    cos_a = math.cos(m.alpha)
    sin_a = math.sin(m.alpha)
    src_x = m.x + cos_a * u - sin_a * v
    src_y = m.y + sin_a * u + cos_a * v

    if img.roi_mask.any():
        fill = float(img.pixels[img.roi_mask].mean())
    else:
        fill = float(img.pixels.mean())
    sampled = ndimage.map_coordinates(
        img.pixels.astype(np.float64), [src_y.ravel(), src_x.ravel()],
        order=1, mode="constant", cval=fill)
    return Patch(patch_type_id=patch_type_id,
                 pixels=sampled.reshape(size, size), center_minutia=m)
