# -*- coding: utf-8 -*-

import unittest
import warnings

import numpy as np

from .context import BevSync
from BevSync.Util import ShapeError
from BevSync.Util.Config import RunConfig
from BevSync.Util.Weights import count_specs, init_weights
from BevSync.Calc.Heads import count_params, enumerate_params, head_specs, heads_param_count, model_specs
from BevSync.Calc.Stpt import (attention_matrix, from_windows, make_future_queries, map_feature_prior, shift_mask,
                               sinusoidal_encoding, stage_shifts, stpt_forward, stpt_param_count, stpt_specs,
                               to_windows, window_shift)
from BevSync.Plot.Common import token_cells

C = 8
HEADS = 2


def make_weights(depth, T_future=2, X=32, window=(4, 4), shift=True, separate=True, seed=0):
    specs = stpt_specs(C, depth, window, T_future, X, X, shift=shift, separate_queries=separate)
    specs.update(head_specs(C))
    return init_weights(specs, seed)


class WindowTests(unittest.TestCase):

    def test_window_round_trip(self):
        x = np.random.default_rng(0).normal(size=(3, 8, 12, 2))
        tokens = to_windows(x, (4, 4))
        self.assertEqual(tokens.shape, (6, 48, 2))
        np.testing.assert_array_equal(from_windows(tokens, 3, 8, 12, (4, 4)), x)

    def test_token_order_matches_cells(self):
        h, w, window, frames = 8, 12, (4, 4), 2
        for shift in ((0, 0), (2, 2)):
            f, r, c = np.meshgrid(np.arange(frames), np.arange(h), np.arange(w), indexing='ij')
            x = np.stack([f, r, c], axis=-1)
            tokens = to_windows(np.roll(x, (-shift[0], -shift[1]), axis=(1, 2)), window)
            for wid in range(tokens.shape[0]):
                np.testing.assert_array_equal(tokens[wid], token_cells(h, w, window, wid, frames, shift))

    def test_shifts(self):
        self.assertEqual(window_shift(32, 32, (4, 4)), (2, 2))
        self.assertEqual(window_shift(4, 8, (4, 4)), (0, 2))
        self.assertEqual(window_shift(32, 32, (4, 4), False), (0, 0))
        self.assertEqual(stage_shifts(32, 32, (4, 4), True), [(0, 0), (2, 2)])
        self.assertEqual(stage_shifts(32, 32, (4, 4), False), [(0, 0)])

    def test_shift_mask(self):
        mask = shift_mask(8, 8, (4, 4), (2, 2), 2, 3)
        self.assertEqual(mask.shape, (4, 32, 48))
        np.testing.assert_array_equal(mask[0], 0.0)
        self.assertTrue(np.any(np.isinf(mask[3])))
        # the two frames of one cell always share a region
        for n in range(16):
            self.assertEqual(mask[3, n, n], 0.0)
            self.assertEqual(mask[3, n, n + 16], 0.0)


class PyramidTests(unittest.TestCase):

    def setUp(self):
        self.B = np.random.default_rng(1).normal(size=(2, 32, 32, C))

    def test_shapes_for_every_depth(self):
        for depth in (1, 2, 3, 4):
            weights = make_weights(depth)
            D0, pyramid, cache = stpt_forward(self.B, weights, 2, depth, HEADS, (4, 4))
            self.assertEqual(D0.shape, (3, 32, 32, C))
            self.assertEqual([p.shape for p in pyramid], [(2, 32 >> s, 32 >> s, C) for s in range(depth)])
            self.assertIsNone(cache)
            self.assertTrue(np.all(np.isfinite(D0)))

    def test_attention_rows_and_mask(self):
        weights = make_weights(2)
        D0, _, cache = stpt_forward(self.B, weights, 2, 2, HEADS, (4, 4), cache_attention=True)
        self.assertEqual(sorted(cache), ['dec0.block0', 'dec0.block1', 'dec1.block0', 'dec1.block1',
                                         'enc0.block0', 'enc0.block1', 'enc1.block0', 'enc1.block1'])
        for key, A in cache.items():
            np.testing.assert_allclose(np.sum(A, axis=-1), 1.0, atol=1e-10)
        self.assertEqual(cache['enc0.block0'].shape, (64, HEADS, 32, 32))
        self.assertEqual(cache['dec0.block0'].shape, (64, HEADS, 48, 32))
        mask = shift_mask(32, 32, (4, 4), (2, 2), 2, 2)
        blocked = np.broadcast_to(np.isinf(mask)[:, None], cache['enc0.block1'].shape)
        self.assertTrue(np.any(blocked))
        np.testing.assert_array_equal(cache['enc0.block1'][blocked], 0.0)

    def test_attention_matrix(self):
        weights = make_weights(1)
        _, _, cache = stpt_forward(self.B, weights, 2, 1, HEADS, (4, 4), cache_attention=True)
        A = attention_matrix(cache, 5, 'enc0.block1')
        self.assertEqual(A.shape, (32, 32))
        np.testing.assert_allclose(A.sum(axis=1), 1.0, atol=1e-10)
        with self.assertRaises(ValueError):
            attention_matrix(None)
        with self.assertRaises(ValueError):
            attention_matrix(cache, 0, 'enc3.block0')
        with self.assertRaises(IndexError):
            attention_matrix(cache, 64)

    def test_deterministic(self):
        weights = make_weights(2)
        a = stpt_forward(self.B, weights, 2, 2, HEADS, (4, 4))[0]
        b = stpt_forward(self.B, weights, 2, 2, HEADS, (4, 4))[0]
        np.testing.assert_array_equal(a, b)

    def test_shared_queries_without_prior(self):
        weights = make_weights(2, separate=False)
        D0, _, _ = stpt_forward(self.B, weights, 2, 2, HEADS, (4, 4), separate_queries=False, spatial_prior=False)
        self.assertEqual(D0.shape, (3, 32, 32, C))

    def test_invalid_pyramid(self):
        weights = make_weights(1)
        with self.assertRaises(ShapeError):
            stpt_forward(self.B, weights, 2, 5, HEADS, (4, 4))
        with self.assertRaises(ShapeError):
            stpt_forward(self.B[:, :20, :20], weights, 2, 1, HEADS, (8, 8))

    def test_cached_pass_does_not_warn(self):
        weights = make_weights(1)
        with warnings.catch_warnings(record=True) as caught:
            warnings.simplefilter('always')
            stpt_forward(self.B, weights, 2, 1, HEADS, (4, 4), cache_attention=True)
        self.assertEqual([w for w in caught if issubclass(w.category, UserWarning)], [])


class QueryTests(unittest.TestCase):

    def test_sinusoidal(self):
        np.testing.assert_allclose(sinusoidal_encoding(0, 4), [0.0, 1.0, 0.0, 1.0])
        self.assertEqual(sinusoidal_encoding(3, 5).shape, (5,))

    def test_future_queries(self):
        weights = make_weights(2)
        Q = make_future_queries(weights, 2)
        self.assertEqual(Q.shape, (3, 16, 16, C))
        prior = np.ones((16, 16, C))
        np.testing.assert_allclose(make_future_queries(weights, 2, prior), Q + 1.0)
        with self.assertRaises(ShapeError):
            make_future_queries(weights, 3)
        with self.assertRaises(ShapeError):
            make_future_queries(weights, 2, np.ones((8, 8, C)))

    def test_map_prior_is_pooled(self):
        weights = make_weights(3)
        prior = map_feature_prior(np.random.default_rng(2).normal(size=(32, 32, C)), weights, 3)
        self.assertEqual(prior.shape, (8, 8, C))


class ParamCountTests(unittest.TestCase):

    def test_stpt_closed_form(self):
        for depth, window, shift, separate in ((1, (4, 4), True, True), (4, (2, 2), True, False),
                                               (3, (4, 2), False, True)):
            specs = stpt_specs(C, depth, window, 4, 32, 32, shift=shift, separate_queries=separate)
            self.assertEqual(count_specs(specs), stpt_param_count(C, depth, window, 4, 32, 32, shift=shift,
                                                                  separate_queries=separate))

    def test_heads_closed_form(self):
        for classes in (2, 3):
            self.assertEqual(count_specs(head_specs(16, classes)), heads_param_count(16, classes))

    def test_model_counts_agree(self):
        for kw in ({}, dict(stpt_depth=2, shift=False), dict(channels=32, separate_queries=False)):
            cfg = RunConfig(**kw).validate()
            parts = count_params(cfg, breakdown=True)
            self.assertEqual(parts['total'], parts['posesync'] + parts['stpt'] + parts['heads'])
            self.assertEqual(count_params(cfg), enumerate_params(cfg))
            self.assertEqual(init_weights(model_specs(cfg), 0).count(), count_params(cfg))


if __name__ == '__main__':
    unittest.main()
