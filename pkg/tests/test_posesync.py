# -*- coding: utf-8 -*-

import os
import shutil
import tempfile
import unittest
import warnings

import numpy as np

from .context import BevSync
from BevSync.Util import ShapeError
from BevSync.Util.Tensor import bilinear_sample
from BevSync.Util.Weights import count_specs, init_weights
from BevSync.Calc.Geometry import BevGrid, CameraRig, ProjectionMatrix, project
from BevSync.Calc.PoseSync import (DeformAttnParams, TemporalBevMap, build_temporal_map, cross_view_attention,
                                   deform_attn, deform_attn_grad, encode_frame, frame_projections,
                                   posesync_param_count, posesync_specs, reference_points)
from BevSync.Calc.SynthScene import Scenario, ego_trajectory, render_features

H = W = 8


def random_params(rng, C, M, K):
    shapes = DeformAttnParams.shapes(C, M, K)
    weights = dict((n, rng.normal(scale=0.2, size=s)) for n, s in shapes.items())
    return DeformAttnParams(M, K, **weights)


def replace(params, name, value):
    weights = dict(params.items())
    weights[name] = value
    return DeformAttnParams(params.M, params.K, **weights)


def sample_locations(q, p, params):
    offsets = (params.W_offset.dot(q) + params.b_offset).reshape(params.M, params.K, 2)
    return p * np.array([H - 1, W - 1]) + offsets


class DeformAttnTests(unittest.TestCase):

    def test_collapsed_is_bilinear_sample(self):
        rng = np.random.default_rng(0)
        F = rng.normal(size=(H, W, 6))
        params = DeformAttnParams.collapsed(6)
        for _ in range(20):
            p = rng.uniform(0.0, 1.0, size=2)
            expected, _ = bilinear_sample(F, p * (H - 1))
            np.testing.assert_allclose(deform_attn(rng.normal(size=6), p, F, params), expected, atol=1e-12)

    def test_shape_checks(self):
        with self.assertRaises(ShapeError):
            DeformAttnParams.collapsed(6, M=4)
        weights = dict(DeformAttnParams.collapsed(4).items())
        weights['W_out'] = np.eye(3)
        with self.assertRaises(ShapeError):
            DeformAttnParams(1, 1, **weights)
        del weights['W_out']
        with self.assertRaises(ValueError):
            DeformAttnParams(1, 1, **weights)

    def test_gradients_match_finite_differences(self):
        h = 1e-6
        checked = 0
        configs = [(C, M, K) for C in (2, 8) for M in (1, 4) for K in (1, 4) if C % M == 0]
        for seed in range(100):
            rng = np.random.default_rng(seed)
            C, M, K = configs[seed % len(configs)]
            params = random_params(rng, C, M, K)
            q = rng.normal(size=C)
            p = rng.uniform(0.3, 0.7, size=2)
            F = rng.normal(size=(H, W, C))
            g_out = rng.normal(size=C)
            loc = sample_locations(q, p, params)
            frac = loc - np.floor(loc)
            if (np.any(loc < 0.01) or np.any(loc > H - 1.01)
                    or np.any(np.minimum(frac, 1.0 - frac) < 1e-4)):
                continue
            grads = deform_attn_grad(q, p, F, params, g_out)
            self.assertFalse(grads['kink'])

            def f(q_=q, p_=p, F_=F, params_=params):
                return float(np.dot(g_out, deform_attn(q_, p_, F_, params_)))

            def check(analytic, plus, minus, direction):
                numeric = (plus - minus) / (2.0 * h)
                self.assertAlmostEqual(float(np.sum(analytic * direction)), numeric, delta=1e-6 * (1 + abs(numeric)))

            D = rng.normal(size=C)
            check(grads['q'], f(q_=q + h * D), f(q_=q - h * D), D)
            D = rng.normal(size=2)
            check(grads['p'], f(p_=p + h * D), f(p_=p - h * D), D)
            D = rng.normal(size=F.shape)
            check(grads['F'], f(F_=F + h * D), f(F_=F - h * D), D)
            for name, value in params.items():
                D = rng.normal(size=value.shape)
                check(grads[name], f(params_=replace(params, name, value + h * D)),
                      f(params_=replace(params, name, value - h * D)), D)
            checked += 1
        self.assertGreaterEqual(checked, 90)


class CrossViewTests(unittest.TestCase):

    def setUp(self):
        self.grid = BevGrid(8, 8, 1.0, [0.0])
        self.rig = CameraRig.desk(2, 16, 90.0, 1.5, 0.35)
        self.C = 10
        traj = ego_trajectory(range(-1, 1), 0.5, 2.0, 0.1)
        self.scn = Scenario(traj, [], self.rig, 0.5, T=1, T_future=0)
        self.images = render_features(self.scn, 0)
        self.projections = frame_projections(self.scn, self.images)
        self.params = DeformAttnParams.collapsed(self.C)

    def test_collapsed_single_camera(self):
        F = self.images[0].features.astype(np.float64)
        T = self.projections[0]
        B = cross_view_attention(np.zeros(self.grid.shape + (self.C,)), [F], [T], self.grid, self.params)
        u, v, _, valid = project(T, self.grid.anchor_points()[:, :, 0])
        self.assertTrue(np.any(valid) and not np.all(valid))
        expected, _ = bilinear_sample(F, np.stack([v[valid], u[valid]], axis=-1))
        np.testing.assert_allclose(B[valid], expected, atol=1e-9)
        np.testing.assert_array_equal(B[~valid], 0.0)

    def test_aggregations(self):
        Q = np.zeros(self.grid.shape + (self.C,))
        features = [img.features.astype(np.float64) for img in self.images]
        B_mean, per_camera = cross_view_attention(Q, features, self.projections, self.grid, self.params,
                                                  return_per_camera=True)
        B_valid = cross_view_attention(Q, features, self.projections, self.grid, self.params, 'valid-mean')
        np.testing.assert_allclose(2.0 * B_mean, per_camera[0] + per_camera[1], atol=1e-12)
        seen = sum(np.any(reference_points(self.grid, T)[1], axis=-1).astype(int) for T in self.projections)
        np.testing.assert_allclose(B_valid[seen == 1], 2.0 * B_mean[seen == 1], atol=1e-12)
        np.testing.assert_allclose(B_valid[seen == 2], B_mean[seen == 2], atol=1e-12)

    def test_argument_checks(self):
        Q = np.zeros(self.grid.shape + (self.C,))
        F = self.images[0].features
        with self.assertRaises(ValueError):
            cross_view_attention(Q, [F], [self.projections[0]], self.grid, self.params, 'max')
        with self.assertRaises(ShapeError):
            cross_view_attention(Q, [F], self.projections, self.grid, self.params)
        with self.assertRaises(ShapeError):
            cross_view_attention(Q[:4], [F], [self.projections[0]], self.grid, self.params)

    def test_blind_camera_warns(self):
        Q = np.zeros(self.grid.shape + (self.C,))
        F = self.images[0].features
        T = self.projections[0]
        M = T.matrix
        M[2] = [0.0, 0.0, 0.0, -1.0]
        blind = ProjectionMatrix(M, T.width, T.height)
        with warnings.catch_warnings(record=True) as caught:
            warnings.simplefilter('always')
            B = cross_view_attention(Q, [F], [blind], self.grid, self.params)
        self.assertTrue(any(issubclass(w.category, UserWarning) for w in caught))
        np.testing.assert_array_equal(B, 0.0)

    def test_synchronised_projection(self):
        images = render_features(self.scn, -1)
        sync = frame_projections(self.scn, images, 0)[0]
        own = frame_projections(self.scn, images, -1)[0]
        p_now = np.array([[4.0, 1.0, 0.0], [6.0, -2.0, 0.5]])
        p_past = self.scn.ego_pose(-1).inverse().compose(self.scn.ego_pose(0)).apply(p_now)
        np.testing.assert_allclose(project(sync, p_now)[:3], project(own, p_past)[:3], atol=1e-9)


class EncoderTests(unittest.TestCase):

    def test_param_count(self):
        for C, M, K, L, X in ((8, 2, 2, 1, 4), (16, 4, 4, 3, 8), (12, 3, 1, 2, 6)):
            self.assertEqual(count_specs(posesync_specs(C, M, K, L, X, X)), posesync_param_count(C, M, K, L, X, X))

    def test_encode_frame(self):
        grid = BevGrid(4, 4, 1.0, [0.0, 1.0])
        rig = CameraRig.desk(2, 16)
        scn = Scenario(ego_trajectory([0], 0.5, 0.0, 0.0), [], rig, 0.5, T=0, T_future=0)
        images = render_features(scn, 0)
        weights = init_weights(posesync_specs(10, 2, 2, 1, 4, 4), 3)
        B = encode_frame([img.features for img in images], frame_projections(scn, images), grid, weights, 2, 2, 1)
        self.assertEqual(B.shape, (4, 4, 10))
        self.assertTrue(np.all(np.isfinite(B)))
        with self.assertRaises(ValueError):
            encode_frame([], [], grid, weights, layers=0)
        with self.assertRaises(ValueError):
            encode_frame([], [], grid, weights, layers=1, norm='batch')


class TemporalMapTests(unittest.TestCase):

    def test_build_and_order(self):
        frames = [np.full((2, 2, 3), float(k)) for k in range(3)]
        tm = build_temporal_map(frames, [0, -1, -2])
        self.assertEqual((tm.T, tm.tags, tm.shape), (2, [0, -1, -2], (3, 2, 2, 3)))
        with self.assertRaises(ValueError):
            build_temporal_map(frames, [0, -2, -1])
        with self.assertRaises(ValueError):
            build_temporal_map(frames, T=3)
        with self.assertRaises(ShapeError):
            build_temporal_map([np.zeros((2, 2, 3)), np.zeros((2, 3, 3))])
        with self.assertRaises(ShapeError):
            TemporalBevMap(np.zeros((2, 2, 3)))

    def test_save_load(self):
        tm = TemporalBevMap(np.random.default_rng(1).normal(size=(2, 3, 3, 4)).astype(np.float32))
        tmp = tempfile.mkdtemp()
        try:
            path = os.path.join(tmp, 'bev.btf')
            tm.save(path)
            back = TemporalBevMap.load(path)
        finally:
            shutil.rmtree(tmp)
        np.testing.assert_array_equal(back.B, tm.B)
        self.assertEqual(back.tags, [0, -1])


if __name__ == '__main__':
    unittest.main()
