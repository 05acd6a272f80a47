# -*- coding: utf-8 -*-

import os
import shutil
import tempfile
import unittest

import matplotlib
matplotlib.use('Agg')

import numpy as np

from .context import BevSync
from BevSync.Calc.Geometry import BevGrid, CameraRig
from BevSync.Calc.Instances import InstanceVideo
from BevSync.Calc.SynthScene import Box, Scenario, ego_trajectory, render_gt
from BevSync.Calc.Stpt import attention_matrix, window_attention
from BevSync.Plot import AttentionPlot, InstancePlot, attention_overlay, token_cells, top_k_per_frame
from BevSync.Plot.Common import QUERY_COLOR, TOP_COLOR


class OverlayTests(unittest.TestCase):

    def test_token_cells(self):
        cells = token_cells(4, 4, (2, 2), 3, 2, (1, 1))
        self.assertEqual(cells.shape, (8, 3))
        self.assertEqual(tuple(cells[0]), (0, 3, 3))
        self.assertEqual(tuple(cells[3]), (0, 0, 0))
        with self.assertRaises(IndexError):
            token_cells(4, 4, (2, 2), 4, 1)

    def test_marks_query_and_top_keys(self):
        cells = token_cells(4, 4, (2, 2), 0, 2)
        A = np.full((8, 8), 1.0 / 8.0)
        self.assertEqual(dict((f, list(v)) for f, v in top_k_per_frame(A[0], cells, 2).items()), {1: [4, 5]})
        img, marked = attention_overlay(np.zeros((4, 4)), A, cells, cells, 0, k=2, scale=3)
        self.assertEqual(img.shape, (12, 12, 3))
        self.assertEqual(img.dtype, np.uint8)
        self.assertEqual(marked, [(1, 0, 0), (1, 0, 1)])
        self.assertEqual(tuple(img[0, 0]), QUERY_COLOR)
        self.assertEqual(tuple(img[0, 3]), TOP_COLOR)

    def test_top_keys_follow_a_moving_box(self):
        box = Box(1, (0.3, 0.2), (4.0, 2.0), 0.0, (2.0, 0.0))
        scn = Scenario(ego_trajectory(range(-1, 1), 0.5, 0.0, 0.0), [box], CameraRig.desk(1, 16), 0.5,
                       T=1, T_future=0)
        occupancy = render_gt(scn, BevGrid(8, 8, 1.0), frames=[0, -1]).seg[:, 1]
        self.assertFalse(np.array_equal(occupancy[0], occupancy[1]))
        # values carry the rendered occupancy; queries and keys only see it
        C = 4
        x = np.zeros((2, 8, 8, C))
        x[..., 0] = occupancy
        proj = np.diag([4.0, 0.0, 0.0, 0.0])
        scope = {'pos': np.zeros((64, C)), 'Wq': proj, 'bq': np.zeros(C), 'Wk': proj, 'bk': np.zeros(C),
                 'Wv': np.eye(C), 'bv': np.zeros(C), 'Wo': np.eye(C), 'bo': np.zeros(C)}
        cache = {}
        window_attention(x, x, scope, 1, (8, 8), cache=cache, key='enc0.block0')
        A = attention_matrix(cache, 0, 'enc0.block0')
        np.testing.assert_allclose(A.sum(axis=1), 1.0, atol=1e-6)
        cells = token_cells(8, 8, (8, 8), 0, 2)
        r, c = np.argwhere(occupancy[0] > 0.5)[0]
        _, marked = attention_overlay(occupancy[0], A, cells, cells, 8 * r + c, k=4, scale=2)
        self.assertEqual(len(marked), 4)
        for f, row, col in marked:
            self.assertEqual(f, 1)
            self.assertGreater(occupancy[f, row, col], 0.5)


class FigureTests(unittest.TestCase):

    def setUp(self):
        self.tmp = tempfile.mkdtemp()

    def tearDown(self):
        shutil.rmtree(self.tmp)

    def test_attention_plot(self):
        plot = AttentionPlot(np.eye(8), frames=2).draw()
        plot.title(u"enc0.block0")
        path = os.path.join(self.tmp, 'attn.png')
        plot.savefig(path)
        self.assertTrue(os.path.getsize(path) > 0)
        self.assertEqual(plot.axes.get_xlabel(), u"key token")
        with self.assertRaises(ValueError):
            AttentionPlot(np.zeros((2, 3)))

    def test_instance_plot(self):
        maps = np.zeros((3, 6, 6), dtype=np.uint32)
        maps[:, 1:3, 1:3] = 2
        maps[1:, 4, 4] = 5
        plot = InstancePlot(InstanceVideo(maps)).draw()
        self.assertEqual(sorted(plot.colors()), [2, 5])
        self.assertEqual(len(plot.axes.images), 3)
        plot.savefig(os.path.join(self.tmp, 'instances.png'))


if __name__ == '__main__':
    unittest.main()
