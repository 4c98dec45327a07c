import math

import numpy as np
import pytest

from leafattack import (
    BinaryMask,
    EdgeParams,
    NoContourError,
    RasterImage,
    canny,
    close,
    connected_components,
    dilate,
    erode,
    gaussian_blur,
    largest_contour_fill,
    sobel,
)
from leafattack.edgeops import gaussian_kernel

from conftest import disk_bits, flood_fill_components, make_mask, random_gray


def hand_gaussian_1d(sigma):
    """Independent kernel oracle computed from the closed form."""
    radius = math.ceil(3 * sigma)
    weights = [math.exp(-(i * i) / (2 * sigma * sigma)) for i in range(-radius, radius + 1)]
    total = sum(weights)
    return [w / total for w in weights]


class TestEdgeParams:
    def test_defaults(self):
        p = EdgeParams()
        assert (p.sigma, p.low, p.high) == (1.4, 50.0, 150.0)
        assert (p.dilate_radius, p.dilate_iterations, p.close_radius) == (1, 2, 2)

    def test_validation(self):
        with pytest.raises(ValueError):
            EdgeParams(sigma=0.0)
        with pytest.raises(ValueError):
            EdgeParams(low=150.0, high=150.0)
        with pytest.raises(ValueError):
            EdgeParams(low=-1.0)
        with pytest.raises(ValueError):
            EdgeParams(dilate_radius=0)

    def test_as_dict_round_trip(self):
        p = EdgeParams(sigma=2.0, close_radius=3)
        assert EdgeParams(**p.as_dict()) == p


class TestGaussianBlur:
    def test_kernel_matches_hand_formula(self):
        for sigma in (0.5, 1.0, 1.4, 2.3):
            got = gaussian_kernel(sigma)
            want = hand_gaussian_1d(sigma)
            assert got.shape == (len(want),)
            assert np.allclose(got, want, atol=1e-12)

    def test_constant_preserved(self):
        for value in (0, 77, 255):
            img = RasterImage(np.full((9, 9), value, dtype=np.uint8))
            for sigma in (0.5, 1.4):
                assert (gaussian_blur(img, sigma).data == value).all()

    def test_impulse_center_value(self):
        # separable blur of a single impulse: center = 255 * w0^2, rounded
        img = np.zeros((31, 31), dtype=np.uint8)
        img[15, 15] = 255
        w0 = hand_gaussian_1d(1.0)[3]  # radius 3, middle weight
        want = math.floor(255 * w0 * w0 + 0.5)
        out = gaussian_blur(RasterImage(img), 1.0)
        assert out.data[15, 15] == want == 41

    def test_interior_impulse_mass_preserved(self):
        # 8-bit rounding loses mass in the wide faint tail at larger sigmas,
        # so the half-percent bound is checked at sigma = 0.5
        img = np.zeros((21, 21), dtype=np.uint8)
        img[10, 10] = 255
        total = int(gaussian_blur(RasterImage(img), 0.5).data.sum())
        assert abs(total - 255) <= 0.005 * 255

    def test_commutes_with_transpose(self, rng):
        img = random_gray(rng, 12, 17)
        a = gaussian_blur(RasterImage(img.data.T.copy()), 1.4).data
        b = gaussian_blur(img, 1.4).data.T
        assert (a == b).all()

    def test_rejects_bad_inputs(self, rng):
        with pytest.raises(ValueError):
            gaussian_blur(RasterImage(np.zeros((4, 4, 3), dtype=np.uint8)), 1.0)
        with pytest.raises(ValueError):
            gaussian_blur(RasterImage(np.zeros((4, 4), dtype=np.uint8)), 0.0)


class TestSobel:
    def test_constant_is_flat(self):
        field = sobel(RasterImage(np.full((8, 8), 9, dtype=np.uint8)))
        assert (field.gx == 0).all() and (field.gy == 0).all()

    def test_horizontal_ramp(self):
        img = np.tile(np.arange(10, dtype=np.uint8), (6, 1))
        field = sobel(RasterImage(img))
        assert (field.gx[:, 1:-1] == 8).all()
        assert (field.gy == 0).all()

    def test_transpose_swaps_axes(self, rng):
        img = random_gray(rng, 9, 13)
        f = sobel(img)
        ft = sobel(RasterImage(img.data.T.copy()))
        assert (ft.gx == f.gy.T).all()
        assert (ft.gy == f.gx.T).all()

    def test_magnitude_definition(self, rng):
        f = sobel(random_gray(rng, 8, 8))
        assert np.allclose(f.magnitude, np.hypot(f.gx, f.gy), atol=1e-6)

    def test_rejects_tiny_images(self):
        with pytest.raises(ValueError):
            sobel(RasterImage(np.zeros((2, 5), dtype=np.uint8)))


class TestCanny:
    def test_constant_image_empty(self):
        edges = canny(RasterImage(np.full((32, 32), 128, dtype=np.uint8)))
        assert edges.area == 0

    def test_square_yields_single_ring(self):
        img = np.zeros((64, 64), dtype=np.uint8)
        img[22:42, 22:42] = 255
        edges = canny(RasterImage(img), 50.0, 150.0, 1.4)
        assert edges.area > 0
        labels = connected_components(edges, connectivity=8)
        assert labels.count == 1
        # ring hugs the square boundary: nothing deep inside, nothing far out
        assert not edges.bits[26:38, 26:38].any()
        ys, xs = np.nonzero(edges.bits)
        assert xs.min() >= 19 and xs.max() <= 44 and ys.min() >= 19 and ys.max() <= 44
        # the ring encloses the interior: flooding from the center cannot
        # reach the border without crossing an edge pixel
        blocked = edges.bits.copy()
        labels_in, _ = flood_fill_components(~blocked, connectivity=4)
        assert labels_in[32, 32] != labels_in[0, 0]

    def test_edges_only_where_magnitude_reaches_low(self, rng):
        img = gaussian_blur(random_gray(rng, 40, 40), 1.0)
        low = 60.0
        edges = canny(img, low, 120.0, 1.4)
        field = sobel(gaussian_blur(img, 1.4))
        assert edges.area > 0
        assert (field.magnitude[edges.bits] >= low).all()

    def test_monotone_in_high_threshold(self, rng):
        img = gaussian_blur(random_gray(rng, 48, 48), 1.0)
        counts = [canny(img, 50.0, high, 1.4).area for high in (60.0, 100.0, 150.0, 220.0)]
        assert all(a >= b for a, b in zip(counts, counts[1:]))

    def test_threshold_validation(self):
        img = RasterImage(np.zeros((8, 8), dtype=np.uint8))
        with pytest.raises(ValueError):
            canny(img, 100.0, 100.0)
        with pytest.raises(ValueError):
            canny(img, -5.0, 100.0)


class TestMorphology:
    def test_dilate_empty_stays_empty(self):
        out = dilate(make_mask(np.zeros((6, 6), dtype=bool)), 1, 1)
        assert out.area == 0

    def test_dilate_single_pixel_to_block(self):
        bits = np.zeros((7, 7), dtype=bool)
        bits[3, 3] = True
        out = dilate(make_mask(bits), 1, 1)
        want = np.zeros((7, 7), dtype=bool)
        want[2:5, 2:5] = True
        assert (out.bits == want).all()

    def test_dilate_extensive_and_iterative(self, rng):
        bits = rng.random((12, 12)) < 0.3
        m = make_mask(bits)
        once = dilate(m, 1, 1)
        twice = dilate(m, 1, 2)
        assert (once.bits | bits == once.bits).all()
        assert (dilate(once, 1, 1).bits == twice.bits).all()

    def test_dilate_validation(self):
        m = make_mask(np.ones((4, 4), dtype=bool))
        with pytest.raises(ValueError):
            dilate(m, 0, 1)
        with pytest.raises(ValueError):
            dilate(m, 1, 0)

    def test_erode_dilate_duality(self, rng):
        for _ in range(25):
            bits = rng.random((15, 15)) < 0.45
            a = erode(make_mask(bits), 1, 1).bits
            b = ~dilate(make_mask(~bits), 1, 1).bits
            assert (a == b).all()

    def test_close_keeps_solid_rectangle(self):
        bits = np.zeros((12, 12), dtype=bool)
        bits[3:9, 2:10] = True
        out = close(make_mask(bits), 1)
        assert (out.bits == bits).all()

    def test_close_bridges_one_pixel_gap(self):
        ring = np.zeros((24, 24), dtype=bool)
        ring[4, 4:20] = ring[19, 4:20] = True
        ring[4:20, 4] = ring[4:20, 19] = True
        ring[4, 11] = False
        out = close(make_mask(ring), 1)
        assert out.bits[4, 11]
        assert (out.bits | ring == out.bits).all()  # closing is extensive

    def test_close_idempotent(self, rng):
        bits = rng.random((16, 16)) < 0.4
        once = close(make_mask(bits), 2)
        assert (close(once, 2).bits == once.bits).all()


class TestConnectedComponents:
    def test_empty(self):
        labels = connected_components(make_mask(np.zeros((5, 5), dtype=bool)))
        assert labels.count == 0
        assert (labels.labels == 0).all()

    def test_diagonal_pair_connectivity(self):
        bits = np.zeros((4, 4), dtype=bool)
        bits[1, 1] = bits[2, 2] = True
        assert connected_components(make_mask(bits), connectivity=8).count == 1
        assert connected_components(make_mask(bits), connectivity=4).count == 2

    def test_sizes_sum_to_popcount(self, rng):
        bits = rng.random((20, 20)) < 0.5
        labels = connected_components(make_mask(bits))
        assert sum(labels.sizes) == int(bits.sum())
        assert len(labels.sizes) == labels.count

    def test_ids_dense_in_raster_order(self):
        bits = np.zeros((5, 9), dtype=bool)
        bits[0, 1] = bits[2, 4] = bits[4, 7] = True
        labels = connected_components(make_mask(bits))
        assert labels.count == 3
        assert labels.labels[0, 1] == 1
        assert labels.labels[2, 4] == 2
        assert labels.labels[4, 7] == 3

    @pytest.mark.parametrize("connectivity", [4, 8])
    def test_matches_flood_fill_oracle(self, rng, connectivity):
        for _ in range(20):
            bits = rng.random((32, 32)) < rng.uniform(0.2, 0.8)
            labels = connected_components(make_mask(bits), connectivity=connectivity)
            oracle, n = flood_fill_components(bits, connectivity=connectivity)
            assert labels.count == n
            # compare partitions, not label values
            assert (labels.labels == oracle).all()  # raster discovery order matches too


class TestLargestContourFill:
    def test_disk_outline_fills_to_disk(self):
        outer = disk_bits(64, 64, 32, 32, 20)
        inner = disk_bits(64, 64, 32, 32, 18)
        ring = outer & ~inner
        filled = largest_contour_fill(make_mask(ring))
        inter = np.count_nonzero(filled.bits & outer)
        union = np.count_nonzero(filled.bits | outer)
        assert inter / union >= 0.95

    def test_two_rings_keeps_larger_interior(self):
        big = disk_bits(80, 80, 25, 25, 16) & ~disk_bits(80, 80, 25, 25, 14)
        small = disk_bits(80, 80, 60, 60, 8) & ~disk_bits(80, 80, 60, 60, 6)
        filled = largest_contour_fill(make_mask(big | small))
        assert filled.bits[25, 25]
        assert not filled.bits[60, 60]
        assert abs(filled.area - np.count_nonzero(disk_bits(80, 80, 25, 25, 16))) < 40

    def test_solid_blob_is_fixed_point(self):
        blob = disk_bits(32, 32, 16, 16, 9)
        filled = largest_contour_fill(make_mask(blob))
        assert (filled.bits == blob).all()

    def test_contains_largest_component(self, rng):
        bits = rng.random((24, 24)) < 0.35
        if not bits.any():
            bits[5, 5] = True
        labels = connected_components(make_mask(bits), connectivity=8)
        biggest = int(np.argmax(labels.sizes)) + 1
        filled = largest_contour_fill(make_mask(bits))
        assert (filled.bits[labels.labels == biggest]).all()

    def test_empty_input_raises(self):
        with pytest.raises(NoContourError):
            largest_contour_fill(make_mask(np.zeros((8, 8), dtype=bool)))
