# -*- coding: utf-8 -*-

import math
import unittest

import numpy as np

from .context import BevSync
from BevSync.Util import ShapeError
from BevSync.Calc.Geometry import BevGrid, CameraRig
from BevSync.Calc.Heads import PredictionBundle
from BevSync.Calc.Instances import InstanceVideo
from BevSync.Calc.Metrics import (PanopticCounts, best_bijection, evaluate, frame_overlaps, panoptic_counts, seg_iou,
                                  vpq)
from BevSync.Calc.SynthScene import generate_scenario, render_gt


def brute_force_vpq(P, G):
    """Mask-by-mask VPQ with pred tracks bound to the gt of their first match."""
    bound = {}
    pq, sq, rq = [], [], []
    for t in range(P.shape[0]):
        pids = sorted(set(P[t].ravel().tolist()) - {0})
        gids = sorted(set(G[t].ravel().tolist()) - {0})
        ious, hit_p, hit_g = [], set(), set()
        for p in pids:
            for g in gids:
                inter = np.sum((P[t] == p) & (G[t] == g))
                union = np.sum((P[t] == p) | (G[t] == g))
                iou = inter / union
                if iou > 0.5 and bound.get(p, g) == g:
                    bound[p] = g
                    ious.append(iou)
                    hit_p.add(p)
                    hit_g.add(g)
        fp = len(set(pids) - hit_p)
        fn = len(set(gids) - hit_g)
        tp = len(ious)
        if tp + fp + fn == 0:
            continue
        denom = tp + 0.5 * fp + 0.5 * fn
        pq.append(math.fsum(ious) / denom)
        sq.append(math.fsum(ious) / tp if tp else 0.0)
        rq.append(tp / denom)
    if not pq:
        return 1.0, 1.0, 1.0
    return math.fsum(pq) / len(pq), math.fsum(sq) / len(sq), math.fsum(rq) / len(rq)


def random_pair(rng):
    """A gt video of 2x2-block instances and a perturbed prediction of it."""
    G = np.kron(rng.integers(0, 4, size=(3, 3, 3)), np.ones((1, 2, 2), dtype=np.int64))
    P = G.copy()
    for t in range(3):
        if rng.uniform() < 0.3:
            perm = np.concatenate([[0], rng.permutation(3) + 1])
            P[t] = perm[P[t]]
    noise = rng.uniform(size=P.shape) < 0.1
    P[noise] = rng.integers(0, 5, size=int(np.count_nonzero(noise)))
    return P.astype(np.uint32), G.astype(np.uint32)


class IouTests(unittest.TestCase):

    def test_accumulated_iou(self):
        pred = np.array([[[1, 1, 0, 0]], [[0, 0, 0, 0]]])
        gt = np.array([[[1, 0, 0, 0]], [[0, 0, 0, 1]]])
        self.assertAlmostEqual(seg_iou(pred, gt), 1.0 / 3.0)
        self.assertEqual(seg_iou(np.zeros((2, 2)), np.zeros((2, 2))), 1.0)
        with self.assertRaises(ShapeError):
            seg_iou(np.zeros((2, 2)), np.zeros((2, 3)))


class VpqTests(unittest.TestCase):

    def test_matches_brute_force(self):
        rng = np.random.default_rng(11)
        for _ in range(200):
            P, G = random_pair(rng)
            scores = vpq(P, G)
            expected = brute_force_vpq(P, G)
            self.assertAlmostEqual(scores['VPQ'], expected[0], places=12)
            self.assertAlmostEqual(scores['VSQ'], expected[1], places=12)
            self.assertAlmostEqual(scores['VRQ'], expected[2], places=12)
            for rec in scores['per_frame']:
                self.assertAlmostEqual(rec['VPQ'], rec['VSQ'] * rec['VRQ'], places=12)

    def test_perfect_and_empty(self):
        G = np.zeros((3, 4, 4), dtype=np.uint32)
        G[:, 1:3, 1:3] = 7
        self.assertEqual(vpq(G, G)['VPQ'], 1.0)
        self.assertEqual(vpq(np.where(G > 0, 3, 0), G)['VPQ'], 1.0)
        empty = np.zeros((2, 4, 4), dtype=np.uint32)
        scores = vpq(empty, empty)
        self.assertEqual((scores['VPQ'], scores['VRQ'], scores['VSQ']), (1.0, 1.0, 1.0))

    def test_identity_switch_is_penalised(self):
        G = np.zeros((2, 4, 8), dtype=np.uint32)
        G[:, :, 0:3] = 1
        G[:, :, 5:8] = 2
        P = np.zeros_like(G)
        P[0] = G[0]
        P[1][G[1] == 1] = 2
        P[1][G[1] == 2] = 1
        frames = panoptic_counts(P, G)
        self.assertEqual((frames[0].tp, frames[0].fp, frames[0].fn), (2, 0, 0))
        self.assertEqual((frames[1].tp, frames[1].fp, frames[1].fn), (0, 2, 2))
        self.assertAlmostEqual(vpq(P, G)['VPQ'], 0.5)

    def test_new_pred_track_may_take_over(self):
        G = np.zeros((2, 4, 4), dtype=np.uint32)
        G[:, 0:2, 0:2] = 1
        P = G.copy()
        P[1][P[1] == 1] = 5
        self.assertEqual(vpq(P, G)['VPQ'], 1.0)

    def test_horizon(self):
        G = np.zeros((3, 4, 4), dtype=np.uint32)
        G[:, 0:2, 0:2] = 1
        P = G.copy()
        P[2] = 0
        self.assertEqual(vpq(P, G, horizon=1)['VPQ'], 1.0)
        self.assertAlmostEqual(vpq(P, G)['VPQ'], 2.0 / 3.0)
        self.assertEqual(len(vpq(P, G, horizon=0)['per_frame']), 1)
        with self.assertRaises(ValueError):
            vpq(P, G, horizon=3)
        with self.assertRaises(ShapeError):
            vpq(P[:2], G)

    def test_overlaps_need_more_than_half(self):
        G = np.zeros((1, 2, 4), dtype=np.uint32)
        G[0, :, 0:2] = 1
        P = np.zeros_like(G)
        P[0, :, 1:3] = 1
        pairs, pred_ids, gt_ids = frame_overlaps(P[0], G[0])
        self.assertEqual((pairs, pred_ids, gt_ids), ({}, [1], [1]))
        P[0, :, 0:3] = 1
        pairs, _, _ = frame_overlaps(P[0], G[0])
        self.assertAlmostEqual(pairs[(1, 1)], 2.0 / 3.0)

    def test_counts_accumulate(self):
        a = PanopticCounts()
        a.ious = [0.5]
        a.fp = 1
        b = PanopticCounts()
        b.ious = [1.0]
        b.fn = 2
        a += b
        self.assertEqual(a.as_dict(), {'TP': 2, 'FP': 1, 'FN': 2, 'VPQ': 1.5 / 3.5, 'VSQ': 0.75, 'VRQ': 2 / 3.5})
        self.assertTrue(PanopticCounts().empty)


class BijectionTests(unittest.TestCase):

    def test_recovers_permutation(self):
        G = np.zeros((2, 6, 6), dtype=np.uint32)
        G[:, 0:2, 0:2] = 1
        G[:, 3:5, 3:5] = 2
        G[1, 0:2, 4:6] = 3
        P = InstanceVideo(G).relabeled({1: 30, 2: 10, 3: 20})
        self.assertEqual(best_bijection(P, G), {30: 1, 10: 2, 20: 3})
        self.assertEqual(best_bijection(np.zeros_like(G), G), {})


class EvaluateTests(unittest.TestCase):

    def test_labels_score_perfectly(self):
        grid = BevGrid(32, 32, 0.5)
        scn = generate_scenario(4, CameraRig.desk(1, 16), T=1, T_future=2, extent=16.0)
        gt = render_gt(scn, grid)
        video = InstanceVideo(gt.instance)
        report = evaluate(PredictionBundle.from_ground_truth(gt), gt, video, video, grid, 8.0, 16.0)
        for key in ('IoU_short', 'IoU_long', 'VPQ', 'VRQ', 'VSQ', 'IoU_vehicle', 'IoU_pedestrian'):
            self.assertEqual(report[key], 1.0)

    def test_empty_prediction(self):
        grid = BevGrid(32, 32, 0.5)
        scn = generate_scenario(4, CameraRig.desk(1, 16), T=1, T_future=2, extent=16.0)
        gt = render_gt(scn, grid)
        blank = PredictionBundle.from_ground_truth(gt)
        blank.seg[:] = 0.0
        blank.seg[:, 0] = 10.0
        video = InstanceVideo(gt.instance)
        report = evaluate(blank, gt, InstanceVideo(np.zeros_like(gt.instance)), video, grid)
        self.assertEqual(report['IoU_long'], 0.0)
        self.assertEqual(report['VPQ'], 0.0)


if __name__ == '__main__':
    unittest.main()
