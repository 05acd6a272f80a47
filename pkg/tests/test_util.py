# -*- coding: utf-8 -*-

import os
import shutil
import tempfile
import unittest

import numpy as np

from .context import BevSync
from BevSync.Util import ConfigError, FormatError, StageError
from BevSync.Util.Config import RunConfig
from BevSync.Util.Formats import dumps_pnm, loads_pnm, read_jsonl, to_gray, dumps_json, write_jsonl
from BevSync.Util.Weights import WeightContainer, WeightSpec, count_specs, init_weights
from BevSync.Calc.SynthScene import FEATURE_WIDTH


class WeightTests(unittest.TestCase):
    """Weight container, initialiser and manifest."""

    def setUp(self):
        self.tmp = tempfile.mkdtemp()
        self.specs = {'a.W': WeightSpec((4, 3), 'uniform', 3), 'a.b': WeightSpec((4,), 'zeros'),
                      'n.gamma': WeightSpec((3,), 'ones')}

    def tearDown(self):
        shutil.rmtree(self.tmp)

    def test_init_is_seeded_and_bounded(self):
        w1 = init_weights(self.specs, 5)
        w2 = init_weights(dict(reversed(list(self.specs.items()))), 5)
        np.testing.assert_array_equal(w1['a.W'], w2['a.W'])
        self.assertTrue(np.all(np.abs(w1['a.W']) <= 1.0 / np.sqrt(3)))
        np.testing.assert_array_equal(w1['a.b'], 0.0)
        np.testing.assert_array_equal(w1['n.gamma'], 1.0)
        self.assertFalse(np.array_equal(init_weights(self.specs, 6)['a.W'], w1['a.W']))

    def test_tuple_keys_and_scopes(self):
        w = WeightContainer()
        w['heads.seg', 'b2'] = np.zeros(3)
        self.assertIn('heads.seg.b2', w)
        self.assertEqual(w.scope('heads').scope('seg')['b2'].shape, (3,))
        with self.assertRaises(KeyError):
            w['missing']

    def test_manifest_round_trip(self):
        w = init_weights(self.specs, 1)
        w.save(self.tmp)
        self.assertEqual(WeightContainer.manifest_count(self.tmp), count_specs(self.specs))
        back = WeightContainer.load(self.tmp)
        self.assertEqual(list(back), list(w))
        for key, value in w.items():
            np.testing.assert_array_equal(back[key], value)
        with open(os.path.join(self.tmp, 'manifest.json')) as f:
            first = f.read()
        other = os.path.join(self.tmp, 'again')
        back.save(other)
        with open(os.path.join(other, 'manifest.json')) as f:
            self.assertEqual(f.read(), first)

    def test_missing_manifest(self):
        with self.assertRaises(FormatError):
            WeightContainer.load(os.path.join(self.tmp, 'nowhere'))


class FormatTests(unittest.TestCase):
    """PNM and JSON codecs."""

    def test_pgm_round_trip(self):
        img = np.arange(12, dtype=np.uint8).reshape(3, 4)
        blob = dumps_pnm(img)
        self.assertTrue(blob.startswith(b'P5\n4 3\n255\n'))
        np.testing.assert_array_equal(loads_pnm(blob), img)
        self.assertEqual(dumps_pnm(loads_pnm(blob)), blob)

    def test_ppm_round_trip(self):
        img = np.random.default_rng(0).integers(0, 256, size=(2, 5, 3)).astype(np.uint8)
        np.testing.assert_array_equal(loads_pnm(dumps_pnm(img)), img)

    def test_pnm_comments_and_errors(self):
        img = loads_pnm(b'P5\n# comment\n2 1\n255\n\x01\x02')
        np.testing.assert_array_equal(img, [[1, 2]])
        with self.assertRaises(FormatError):
            loads_pnm(b'P5\n2 1\n255\n\x01')
        with self.assertRaises(TypeError):
            dumps_pnm(np.zeros((2, 2)))

    def test_to_gray(self):
        np.testing.assert_array_equal(to_gray([[0.0, 0.5], [1.0, 0.25]]), [[0, 128], [255, 64]])
        np.testing.assert_array_equal(to_gray(np.full((2, 2), 0.3)), 128)

    def test_json(self):
        self.assertEqual(dumps_json({'b': 1, 'a': [1, 2]}), '{\n  "a": [\n    1,\n    2\n  ],\n  "b": 1\n}\n')
        tmp = tempfile.mkdtemp()
        try:
            path = os.path.join(tmp, 't.jsonl')
            write_jsonl(path, [{'frame': 0, 'id': 1}, {'frame': 1, 'id': 1}])
            self.assertEqual(read_jsonl(path), [{'frame': 0, 'id': 1}, {'frame': 1, 'id': 1}])
        finally:
            shutil.rmtree(tmp)


class ConfigTests(unittest.TestCase):
    """RunConfig parsing and validation."""

    def test_defaults_validate(self):
        cfg = RunConfig().validate()
        self.assertEqual((cfg.X, cfg.Y, cfg.C, cfg.T, cfg.T_future, cfg.stpt_depth), (32, 32, 16, 2, 4, 4))

    def test_round_trip(self):
        cfg = RunConfig(seed=11, window=(2, 2), aug='both', z_anchors=(0.0, 1.0))
        text = cfg.dumps()
        back = RunConfig.loads(text)
        self.assertEqual(back, cfg)
        self.assertEqual(back.dumps(), text)

    def test_sections_and_overrides(self):
        cfg = RunConfig.loads("[grid]\nX = 64\nY = 64\n[stpt]\ndepth = 2\nwindow = 8\n")
        self.assertEqual((cfg.X, cfg.stpt_depth, cfg.window), (64, 2, (8, 8)))
        cfg.update(seed=3, stpt_depth=None)
        self.assertEqual((cfg.seed, cfg.stpt_depth), (3, 2))

    def test_rejects_unknown(self):
        with self.assertRaises(ConfigError):
            RunConfig.loads("[nowhere]\na = 1\n")
        with self.assertRaises(ConfigError):
            RunConfig.loads("[grid]\ncolour = red\n")
        with self.assertRaises(ConfigError):
            RunConfig(X='many')

    def test_constraints_are_named(self):
        cases = [dict(X=36), dict(channels=18), dict(channels=8), dict(stpt_depth=5), dict(classes=4),
                 dict(aug='all'), dict(stpt_heads=3)]
        for kw in cases:
            with self.assertRaises(ConfigError) as ctx:
                RunConfig(**kw).validate()
            self.assertIn("Constraint violated", str(ctx.exception))

    def test_divisibility_message(self):
        with self.assertRaises(ConfigError) as ctx:
            RunConfig(X=40).validate()
        self.assertIn("X divisible by 2^(depth-1) * window height", str(ctx.exception))

    def test_channels_cover_the_feature_encoding(self):
        with self.assertRaises(ConfigError) as ctx:
            RunConfig(channels=FEATURE_WIDTH - 2).validate()
        self.assertIn("run channels >= {0:d}".format(FEATURE_WIDTH), str(ctx.exception))
        RunConfig(channels=FEATURE_WIDTH + 2, posesync_heads=2, stpt_heads=2).validate()

    def test_stage_error_carries_stage(self):
        e = StageError('encode', "missing input")
        self.assertEqual(e.stage, 'encode')
        self.assertIn('encode', str(e))


if __name__ == '__main__':
    unittest.main()
