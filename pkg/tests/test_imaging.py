"""Orientation estimation, virtual minutiae and patch extraction."""

import math

import numpy as np
import pytest
from scipy import ndimage

from latentmatch import angles
from latentmatch.errors import EmptyRoiError
from latentmatch.imaging import (GrayImage, estimate_orientation_field,
                                 extract_patch, latent_virtual_minutiae,
                                 load_gray_image, reference_virtual_minutiae)
from latentmatch.model import Minutia, MinutiaKind, OrientationField


def grating(shape, ridge_deg, wavelength=10.0):
    """Sinusoidal grating whose ridges run along ridge_deg (x toward
    columns, y toward rows)."""
    h, w = shape
    yy, xx = np.mgrid[0:h, 0:w].astype(float)
    psi = math.radians(ridge_deg + 90.0)  # wave normal
    phase = 2 * np.pi / wavelength * (xx * math.cos(psi)
                                      + yy * math.sin(psi))
    return np.clip(127.5 + 100 * np.cos(phase), 0, 255).astype(np.uint8)


def angular_error_deg(theta_rad, target_deg):
    t = np.degrees(theta_rad)
    d = np.abs(t - target_deg % 180.0)
    return np.minimum(d, 180.0 - d)


class TestOrientationField:
    def test_grating_at_30_degrees(self):
        img = GrayImage(pixels=grating((256, 256), 30), roi_mask=None)
        of = estimate_orientation_field(img, 16)
        assert of.mask.any()
        assert angular_error_deg(of.theta[of.mask], 30).max() <= 3.0

    def test_uniform_image_fully_masked_out(self):
        img = GrayImage(pixels=np.full((128, 128), 77, dtype=np.uint8),
                        roi_mask=None)
        of = estimate_orientation_field(img, 16)
        assert not of.mask.any()

    def test_empty_roi_rejected(self):
        img = GrayImage(pixels=grating((128, 128), 10),
                        roi_mask=np.zeros((128, 128), dtype=bool))
        with pytest.raises(EmptyRoiError):
            estimate_orientation_field(img, 16)

    def test_rotated_grating_differs_by_90(self):
        of_a = estimate_orientation_field(
            GrayImage(pixels=grating((256, 256), 20), roi_mask=None), 16)
        of_b = estimate_orientation_field(
            GrayImage(pixels=grating((256, 256), 110), roi_mask=None), 16)
        diff = angular_error_deg(of_b.theta[of_b.mask & of_a.mask], 20 + 90)
        assert diff.max() <= 3.0

    def test_rotation_equivariance(self):
        # ndimage.rotate by -phi degrees turns ridge orientations by +phi
        # in this coordinate convention (x toward columns, y toward rows)
        base = grating((320, 320), 30)
        for phi in (10, 25, 40):
            rotated = ndimage.rotate(base.astype(float), -phi,
                                     reshape=False, order=1, mode="nearest")
            img = GrayImage(
                pixels=np.clip(rotated, 0, 255).astype(np.uint8),
                roi_mask=None)
            of = estimate_orientation_field(img, 16)
            interior = np.zeros_like(of.mask)
            interior[5:-5, 5:-5] = of.mask[5:-5, 5:-5]
            assert interior.any()
            err = angular_error_deg(of.theta[interior], 30 + phi)
            assert err.max() <= 3.0

    def test_theta_range_and_block_size_validation(self):
        img = GrayImage(pixels=grating((128, 128), 137), roi_mask=None)
        of = estimate_orientation_field(img, 16)
        masked = of.theta[of.mask]
        assert ((masked >= 0.0) & (masked < math.pi)).all()
        with pytest.raises(ValueError):
            estimate_orientation_field(img, 4)


def single_block_field(theta_value=0.4, size=5, block_size=16):
    theta = np.zeros((size, size))
    mask = np.zeros((size, size), dtype=bool)
    theta[2, 2] = theta_value
    mask[2, 2] = True
    return OrientationField(block_size=block_size, theta=theta, mask=mask)


class TestVirtualMinutiae:
    def test_single_interior_block_pair(self):
        of = single_block_field(0.4)
        pair = latent_virtual_minutiae(of)
        assert len(pair) == 2
        cx = cy = 2.5 * 16
        assert (pair[0].x, pair[0].y) == (cx, cy)
        assert (pair[1].x, pair[1].y) == (cx, cy)
        assert pair[0].alpha == 0.4
        assert pair[1].alpha == angles.antipode(0.4)
        assert all(m.kind is MinutiaKind.VIRTUAL for m in pair)

    def test_empty_mask_yields_nothing(self):
        of = OrientationField(block_size=16, theta=np.zeros((6, 6)),
                              mask=np.zeros((6, 6), dtype=bool))
        assert latent_virtual_minutiae(of) == []
        assert reference_virtual_minutiae(of) == []

    def test_fully_masked_field_interior_count(self):
        of = OrientationField(block_size=16, theta=np.zeros((10, 10)),
                              mask=np.ones((10, 10), dtype=bool))
        assert len(latent_virtual_minutiae(of)) == 2 * 8 * 8
        assert len(reference_virtual_minutiae(of)) == 8 * 8

    def test_latent_exactly_doubles_reference(self):
        rng = np.random.default_rng(90)
        theta = rng.uniform(0, math.pi, size=(12, 12))
        mask = rng.random((12, 12)) < 0.6
        of = OrientationField(block_size=16, theta=theta, mask=mask)
        assert len(latent_virtual_minutiae(of)) \
            == 2 * len(reference_virtual_minutiae(of))

    def test_pairs_share_location_and_oppose_exactly(self):
        rng = np.random.default_rng(91)
        theta = rng.uniform(0, math.pi, size=(9, 9))
        of = OrientationField(block_size=16, theta=theta,
                              mask=np.ones((9, 9), dtype=bool))
        vms = latent_virtual_minutiae(of)
        for a, b in zip(vms[0::2], vms[1::2]):
            assert (a.x, a.y) == (b.x, b.y)
            assert b.alpha == angles.antipode(a.alpha)

    def test_reference_direction_in_half_turn(self):
        rng = np.random.default_rng(92)
        theta = rng.uniform(0, math.pi, size=(8, 8))
        of = OrientationField(block_size=16, theta=theta,
                              mask=np.ones((8, 8), dtype=bool))
        for m in reference_virtual_minutiae(of):
            assert 0.0 <= m.alpha < math.pi

    def test_full_print_scale_count(self):
        # a print-sized elliptical ROI at 500 ppi yields on the order of a
        # thousand reference virtual minutiae
        h = w = 50  # 800x800 pixels at block size 16
        yy, xx = np.mgrid[0:h, 0:w]
        u = (xx - (w - 1) / 2) / (w / 2)
        v = (yy - (h - 1) / 2) / (h / 2)
        mask = (u / 0.85) ** 2 + (v / 0.95) ** 2 <= 1.0
        of = OrientationField(block_size=16, theta=np.zeros((h, w)),
                              mask=mask)
        count = len(reference_virtual_minutiae(of))
        assert 500 <= count <= 2500


def smooth_image(seed=0, size=400):
    rng = np.random.default_rng(seed)
    img = ndimage.gaussian_filter(rng.random((size, size)) * 255, 6)
    img = (img - img.min()) / max(np.ptp(img), 1e-9) * 255
    return img.astype(np.uint8)


class TestExtractPatch:
    def test_centered_full_scale_is_axis_aligned_crop(self):
        arr = smooth_image(1)
        img = GrayImage(pixels=arr, roi_mask=None)
        p = extract_patch(img, Minutia(200.0, 200.0, 0.0), "c160")
        direct = arr[120:280, 120:280].astype(float)
        assert np.allclose(p.pixels, direct, atol=1e-9)

    def test_quarter_turn_commutes_with_exact_rotation(self):
        # odd-sized array: np.rot90 is an exact rotation about the center
        # pixel, so extracting at alpha = pi/2 must equal extracting at
        # alpha = 0 from the pre-rotated image
        arr = smooth_image(2)[:399, :399]
        img = GrayImage(pixels=arr, roi_mask=None)
        p_rot = extract_patch(img, Minutia(199.0, 199.0, math.pi / 2),
                              "c160")
        pre = np.ascontiguousarray(np.rot90(arr, 1))
        p_pre = extract_patch(GrayImage(pixels=pre, roi_mask=None),
                              Minutia(199.0, 199.0, 0.0), "c160")
        assert np.allclose(p_rot.pixels, p_pre.pixels, atol=1e-9)

    def test_small_scale_resampled_to_160(self):
        arr = smooth_image(3)
        img = GrayImage(pixels=arr, roi_mask=None)
        p = extract_patch(img, Minutia(200.0, 200.0, 1.0), "c80")
        assert p.pixels.shape == (160, 160)

    def test_border_minutia_gets_mean_fill(self):
        arr = smooth_image(4)
        roi = np.ones_like(arr, dtype=bool)
        img = GrayImage(pixels=arr, roi_mask=roi)
        p = extract_patch(img, Minutia(10.0, 200.0, 0.0), "c160")
        fill = float(arr[roi].mean())
        fill_fraction = np.mean(np.isclose(p.pixels, fill, atol=1e-9))
        assert fill_fraction > 0.2  # left strip falls outside the image
        assert np.isfinite(p.pixels).all()

    def test_offset_window_shifts_content(self):
        arr = smooth_image(5)
        img = GrayImage(pixels=arr, roi_mask=None)
        left = extract_patch(img, Minutia(200.0, 200.0, 0.0), "l96")
        right = extract_patch(img, Minutia(200.0, 200.0, 0.0), "r96")
        assert not np.allclose(left.pixels, right.pixels)


class TestLoadGrayImage:
    def test_png_and_mask_round_trip(self, tmp_path):
        from PIL import Image
        arr = smooth_image(6, size=64)
        mask = np.zeros_like(arr)
        mask[8:56, 8:56] = 255
        Image.fromarray(arr).save(tmp_path / "img.png")
        Image.fromarray(mask).save(tmp_path / "mask.png")
        img = load_gray_image(tmp_path / "img.png", tmp_path / "mask.png")
        assert np.array_equal(img.pixels, arr)
        assert img.roi_mask.sum() == 48 * 48

    def test_pgm_supported(self, tmp_path):
        from PIL import Image
        arr = smooth_image(7, size=32)
        Image.fromarray(arr).save(tmp_path / "img.pgm")
        img = load_gray_image(tmp_path / "img.pgm")
        assert np.array_equal(img.pixels, arr)
        assert img.roi_mask.all()

    def test_mismatched_mask_rejected(self):
        with pytest.raises(ValueError):
            GrayImage(pixels=np.zeros((8, 8), dtype=np.uint8),
                      roi_mask=np.ones((4, 4), dtype=bool))
