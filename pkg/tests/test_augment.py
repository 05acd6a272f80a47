# -*- coding: utf-8 -*-

import itertools
import unittest

import numpy as np

from .context import BevSync
from BevSync.Util import ShapeError
from BevSync.Calc.Augment import (BevAug, ImageAug, apply_bev_aug, apply_image_aug, augment_bev_features,
                                  augment_ground_truth, augment_instances, augment_raster)
from BevSync.Calc.Geometry import BevGrid, CameraRig, Intrinsics
from BevSync.Calc.Instances import InstanceVideo
from BevSync.Calc.Metrics import seg_iou, vpq
from BevSync.Calc.SynthScene import Box, Scenario, ego_trajectory, render_gt


def right_angle_augs():
    for k, fx, fy in itertools.product(range(4), (False, True), (False, True)):
        yield BevAug(k, fx, fy)


class ImageAugTests(unittest.TestCase):

    def setUp(self):
        self.K = Intrinsics(20.0, 20.0, 7.5, 5.5, 16, 12)

    def test_identity_keeps_intrinsics(self):
        F = np.random.default_rng(0).normal(size=(12, 16, 3))
        out, K = apply_image_aug(F, self.K, ImageAug.identity())
        np.testing.assert_array_equal(out, F)
        self.assertIs(K, self.K)

    def test_mirror(self):
        F = np.tile(np.arange(16.0)[None, :, None], (12, 1, 1))
        out, K = apply_image_aug(F, self.K, ImageAug(hflip=True))
        np.testing.assert_array_equal(out[..., 0], 15.0 - F[..., 0])
        self.assertEqual(K.cx, 15.0 - self.K.cx)
        self.assertEqual(K.cy, self.K.cy)

    def test_projection_follows_pixels(self):
        rng = np.random.default_rng(1)
        for _ in range(100):
            aug = ImageAug.sample(rng)
            _, K = apply_image_aug(np.zeros((12, 16, 1)), self.K, aug)
            p = np.array([rng.uniform(-2.0, 2.0), rng.uniform(-2.0, 2.0), rng.uniform(1.0, 10.0)])
            u, v, w = self.K.matrix.dot(p)
            expected = aug.apply_points(u / w, v / w, 16, 12)
            u2, v2, w2 = K.matrix.dot(p)
            self.assertAlmostEqual(u2 / w2, float(expected[0]), delta=1e-9)
            self.assertAlmostEqual(v2 / w2, float(expected[1]), delta=1e-9)

    def test_linear_map_is_resampled_exactly(self):
        vv, uu = np.meshgrid(np.arange(12.0), np.arange(16.0), indexing='ij')
        F = (uu + 2.0 * vv)[..., None]
        aug = ImageAug(1.1, 0.2, True)
        out, _ = apply_image_aug(F, self.K, aug)
        Ainv = np.linalg.inv(aug.matrix(16, 12))
        src_u = Ainv[0, 0] * uu + Ainv[0, 1] * vv + Ainv[0, 2]
        src_v = Ainv[1, 0] * uu + Ainv[1, 1] * vv + Ainv[1, 2]
        inside = (src_u >= 0) & (src_u <= 15) & (src_v >= 0) & (src_v <= 11)
        self.assertTrue(np.any(inside))
        np.testing.assert_allclose(out[..., 0][inside], (src_u + 2.0 * src_v)[inside], atol=1e-9)
        np.testing.assert_array_equal(out[..., 0][~inside], 0.0)

    def test_checks(self):
        with self.assertRaises(ShapeError):
            apply_image_aug(np.zeros((8, 8, 1)), self.K, ImageAug(hflip=True))
        with self.assertRaises(ValueError):
            ImageAug(scale=0.0)


class BevAugTests(unittest.TestCase):

    def setUp(self):
        self.rng = np.random.default_rng(3)

    def test_quarter_turn_is_rot90(self):
        arr = self.rng.normal(size=(2, 6, 6))
        np.testing.assert_array_equal(augment_raster(arr, BevAug(1)), np.rot90(arr, 1, axes=(1, 2)))
        twice = augment_raster(augment_raster(arr, BevAug(1)), BevAug(1))
        np.testing.assert_array_equal(twice, augment_raster(arr, BevAug(2)))
        self.assertEqual(BevAug(5).k, 1)

    def test_features_move_with_cells(self):
        B = self.rng.normal(size=(2, 6, 6, 3))
        out = augment_bev_features(B, BevAug(3, flip_x=True))
        np.testing.assert_array_equal(out, np.rot90(B[:, ::-1], 3, axes=(1, 2)))

    def test_cells_and_vectors(self):
        for aug in right_angle_augs():
            for r, c in ((0, 0), (1, 4), (5, 2)):
                m = np.zeros((6, 6))
                m[r, c] = 1.0
                moved = np.argwhere(augment_raster(m, aug) == 1.0)[0]
                np.testing.assert_allclose(moved, aug.apply_cells([r, c], (6, 6)), atol=1e-12)
        flow = np.zeros((1, 2, 4, 4))
        flow[:, 0] = 1.0
        out = augment_raster(flow, BevAug(1), vector_axis=1)
        np.testing.assert_allclose(out[:, 0], 0.0, atol=1e-12)
        np.testing.assert_allclose(out[:, 1], 1.0)

    def test_continuous_quarter_turn(self):
        arr = self.rng.normal(size=(8, 8))
        out = augment_raster(arr, BevAug(yaw=0.5 * np.pi))
        np.testing.assert_allclose(out[1:-1, 1:-1], np.rot90(arr, 1)[1:-1, 1:-1], atol=1e-9)
        self.assertFalse(BevAug(scale=1.2).is_right_angle)

    def test_odd_turn_needs_square_grid(self):
        with self.assertRaises(ShapeError):
            augment_raster(np.zeros((4, 6)), BevAug(1))
        self.assertEqual(augment_raster(np.zeros((4, 6)), BevAug(2, flip_y=True)).shape, (4, 6))

    def test_sample_defaults_to_right_angles(self):
        for _ in range(20):
            self.assertTrue(BevAug.sample(self.rng).is_right_angle)
        self.assertFalse(BevAug.sample(self.rng, max_yaw=0.3).is_right_angle)


class LabelAugTests(unittest.TestCase):

    def setUp(self):
        boxes = [Box(1, (3.0, 2.0), (4.0, 2.0), 0.3, (2.0, 0.0)), Box(2, (-4.0, -3.0), (4.0, 2.0))]
        scn = Scenario(ego_trajectory(range(-1, 1), 0.5, 2.0, 0.0), boxes, CameraRig.desk(1, 16), 0.5,
                       T=1, T_future=2)
        self.gt = render_gt(scn, BevGrid(32, 32, 0.5))

    def test_offsets_point_at_moved_centres(self):
        self.assertTrue(np.any(self.gt.instance > 0))
        for aug in (BevAug(1, flip_x=True), BevAug(2), BevAug(3, flip_y=True)):
            out = augment_ground_truth(self.gt, aug)
            for f in range(len(out.frames)):
                self.assertEqual(sorted(out.centers[f]), sorted(self.gt.centers[f]))
                for i, (cx, cy) in out.centers[f].items():
                    rows, cols = np.nonzero(out.instance[f] == i)
                    self.assertGreater(len(rows), 0)
                    np.testing.assert_allclose(rows + out.offset[f, 0, rows, cols], cx, atol=1e-9)
                    np.testing.assert_allclose(cols + out.offset[f, 1, rows, cols], cy, atol=1e-9)
            self.assertEqual(out.instance.dtype, np.uint32)
            self.assertEqual(int(np.count_nonzero(out.instance)), int(np.count_nonzero(self.gt.instance)))

    def test_metrics_are_invariant(self):
        G = self.gt.instance
        P = G.copy()
        P[1][P[1] == 1] = 7
        P[2] = 0
        before = vpq(P, G)
        for aug in right_angle_augs():
            _, pv = apply_bev_aug(None, InstanceVideo(P), aug)
            _, gv = apply_bev_aug(None, InstanceVideo(G), aug)
            self.assertAlmostEqual(vpq(pv, gv)['VPQ'], before['VPQ'], places=12)
            self.assertEqual(seg_iou(pv.maps > 0, gv.maps > 0), seg_iou(P > 0, G > 0))

    def test_instances_and_type_check(self):
        video = InstanceVideo(self.gt.instance)
        out = augment_instances(video, BevAug(2))
        np.testing.assert_array_equal(out.maps, self.gt.instance[:, ::-1, ::-1])
        with self.assertRaises(TypeError):
            apply_bev_aug(None, self.gt.instance, BevAug(1))


if __name__ == '__main__':
    unittest.main()
