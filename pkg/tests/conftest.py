"""Shared builders for test templates and fields."""

import math

import numpy as np

from latentmatch.model import (Descriptor, Minutia, MinutiaKind,
                               MinutiaeTemplate, OrientationField,
                               TemplateVariant, TextureSide, TextureTemplate)

TEST_PATCH_TYPES = ("c80", "l96", "r96")


def unit_vector(rng, dim):
    v = rng.standard_normal(dim)
    return v / np.linalg.norm(v)


def random_descriptor(rng, patch_types=TEST_PATCH_TYPES, dim=16):
    return Descriptor({pt: unit_vector(rng, dim) for pt in patch_types})


def make_field(rng=None, width=8, height=8, block_size=16, full=True):
    if rng is None:
        theta = np.zeros((height, width))
    else:
        theta = rng.uniform(0.0, math.pi, size=(height, width))
    if full:
        mask = np.ones((height, width), dtype=bool)
    else:
        mask = np.zeros((height, width), dtype=bool)
    return OrientationField(block_size=block_size, theta=theta, mask=mask)


def make_minutiae_template(rng, n=10, width=8, height=8, block_size=16,
                           patch_types=TEST_PATCH_TYPES, dim=16,
                           variant=TemplateVariant.REFERENCE,
                           source_id="T", min_separation=12.0):
    field = make_field(rng, width, height, block_size)
    w_px, h_px = width * block_size, height * block_size
    xs, ys = [], []
    while len(xs) < n:
        x = rng.uniform(0.0, w_px - 1e-6)
        y = rng.uniform(0.0, h_px - 1e-6)
        if xs and np.hypot(np.array(xs) - x, np.array(ys) - y).min() \
                < min_separation:
            continue
        xs.append(x)
        ys.append(y)
    minutiae = [Minutia(x, y, rng.uniform(0.0, 2.0 * math.pi),
                        MinutiaKind.TRUE) for x, y in zip(xs, ys)]
    descriptors = [random_descriptor(rng, patch_types, dim)
                   for _ in range(n)]
    return MinutiaeTemplate(minutiae=minutiae, descriptors=descriptors,
                            orientation_field=field, source_id=source_id,
                            variant=variant)


def make_texture_template(rng, n_pairs=6, width_px=128, height_px=128,
                          block_size=16, patch_types=TEST_PATCH_TYPES,
                          dim=16, side=TextureSide.LATENT, source_id="T"):
    from latentmatch import angles
    minutiae = []
    descriptors = []
    count = n_pairs if side is TextureSide.LATENT else n_pairs
    for _ in range(count):
        x = rng.uniform(block_size, width_px - block_size)
        y = rng.uniform(block_size, height_px - block_size)
        alpha = rng.uniform(0.0, 2.0 * math.pi)
        if side is TextureSide.LATENT:
            minutiae.append(Minutia(x, y, alpha, MinutiaKind.VIRTUAL))
            minutiae.append(Minutia(x, y, angles.antipode(alpha),
                                    MinutiaKind.VIRTUAL))
            descriptors.append(random_descriptor(rng, patch_types, dim))
            descriptors.append(random_descriptor(rng, patch_types, dim))
        else:
            minutiae.append(Minutia(x, y, alpha, MinutiaKind.VIRTUAL))
            descriptors.append(random_descriptor(rng, patch_types, dim))
    return TextureTemplate(virtual_minutiae=minutiae,
                           descriptors=descriptors, source_id=source_id,
                           side=side, width_px=width_px, height_px=height_px,
                           block_size=block_size)
