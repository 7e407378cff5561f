"""
Ridge flow, virtual minutiae and patch descriptors
==================================================

Build an analytic ridge pattern, estimate its block orientation field,
place virtual minutiae on the block grid, and compute baseline descriptors
from rotation-normalized local patches.
"""

import math

import numpy as np

from latentmatch import (GrayImage, compute_descriptor,
                         descriptor_similarity, estimate_orientation_field,
                         extract_patch, latent_virtual_minutiae,
                         reference_virtual_minutiae)
from latentmatch.descriptors import DEFAULT_PATCH_TYPES


def grating(shape, ridge_deg, wavelength=10.0):
    h, w = shape
    yy, xx = np.mgrid[0:h, 0:w].astype(float)
    psi = math.radians(ridge_deg + 90.0)  # wave normal
    phase = 2 * np.pi / wavelength * (xx * math.cos(psi)
                                      + yy * math.sin(psi))
    return np.clip(127.5 + 100 * np.cos(phase), 0, 255).astype(np.uint8)


# A synthetic "fingerprint": parallel ridges at 35 degrees, period 10 px.
img = GrayImage(pixels=grating((320, 320), 35.0), roi_mask=None)
field = estimate_orientation_field(img, block_size=16)
masked = np.degrees(field.theta[field.mask])
print(f"orientation field: {field.mask.sum()} valid blocks of "
      f"{field.mask.size}; mean orientation {masked.mean():.2f} deg "
      f"(target 35)")

# The texture representation: reference prints get one virtual minutia
# per block, latents a pair of opposite directions per block (ridge flow
# is undirected, so the latent keeps both hypotheses).
ref_vm = reference_virtual_minutiae(field)
lat_vm = latent_virtual_minutiae(field)
print(f"virtual minutiae: {len(ref_vm)} (reference) vs {len(lat_vm)} "
      f"(latent, paired) on the same field")
a, b = lat_vm[0], lat_vm[1]
print(f"first latent pair: ({a.x:.0f}, {a.y:.0f}) with directions "
      f"{math.degrees(a.alpha):.1f} and {math.degrees(b.alpha):.1f} deg")

# Patches are rotation-normalized crops around a minutia; the catalog has
# 6 centered scales and 8 offset windows, of which 3 types are used by
# default.
center = ref_vm[len(ref_vm) // 2]
patches = [extract_patch(img, center, pt) for pt in DEFAULT_PATCH_TYPES]
for p in patches:
    print(f"patch {p.patch_type_id}: {p.pixels.shape[0]}x"
          f"{p.pixels.shape[1]}, intensity range "
          f"[{p.pixels.min():.0f}, {p.pixels.max():.0f}]")

descriptor = compute_descriptor(patches, DEFAULT_PATCH_TYPES)
print(f"descriptor patch types {descriptor.patch_type_ids}, "
      f"{descriptor.vector('c80').shape[0]} dims each, unit norm "
      f"{np.linalg.norm(descriptor.vector('c80')):.6f}")

# Descriptors compare by mean per-type cosine; a nearby minutia on the
# same ridge pattern looks similar, the self-comparison is exactly 1.
other = ref_vm[len(ref_vm) // 2 + 1]
other_desc = compute_descriptor(
    [extract_patch(img, other, pt) for pt in DEFAULT_PATCH_TYPES],
    DEFAULT_PATCH_TYPES)
print(f"self similarity {descriptor_similarity(descriptor, descriptor):.4f}, "
      f"neighbor similarity {descriptor_similarity(descriptor, other_desc):.4f}")
