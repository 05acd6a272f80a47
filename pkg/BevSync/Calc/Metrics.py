# -*- coding: utf-8 -*-
"""Segmentation IoU and the video panoptic quality family."""
from __future__ import print_function, division

import logging
import math

import numpy as np
from scipy.optimize import linear_sum_assignment

from ..Util import ShapeError
from .Instances import InstanceVideo

logger = logging.getLogger(__name__)

MATCH_IOU = 0.5
SHORT_RANGE = 30.0
LONG_RANGE = 100.0


def seg_iou(pred, gt):
    """Dataset-accumulated IoU ``sum |p & g| / sum |p | g|`` of binary videos.

    An empty union scores 1.0.
    """
    pred = np.asarray(pred, dtype=bool)
    gt = np.asarray(gt, dtype=bool)
    if pred.shape != gt.shape:
        raise ShapeError("IoU operands differ in shape: {0:s} and {1:s}.".format(str(pred.shape), str(gt.shape)))
    union = int(np.count_nonzero(pred | gt))
    if union == 0:
        return 1.0
    return int(np.count_nonzero(pred & gt)) / union


class PanopticCounts(object):
    """Matched IoUs, TP, FP and FN of one frame (or a sum of frames)."""

    def __init__(self):
        self.pairs = []
        self.ious = []
        self.fp = 0
        self.fn = 0

    @property
    def tp(self): return len(self.ious)

    @property
    def iou(self): return math.fsum(self.ious)

    @property
    def empty(self): return self.tp + self.fp + self.fn == 0

    def __iadd__(self, other):
        self.pairs += other.pairs
        self.ious += other.ious
        self.fp += other.fp
        self.fn += other.fn
        return self

    def pq(self):
        denom = self.tp + 0.5 * self.fp + 0.5 * self.fn
        return self.iou / denom if denom > 0 else 0.0

    def sq(self):
        return self.iou / self.tp if self.tp else 0.0

    def rq(self):
        denom = self.tp + 0.5 * self.fp + 0.5 * self.fn
        return self.tp / denom if denom > 0 else 0.0

    def as_dict(self):
        return {'TP': self.tp, 'FP': self.fp, 'FN': self.fn, 'VPQ': self.pq(), 'VSQ': self.sq(), 'VRQ': self.rq()}


def _maps(video):
    if isinstance(video, InstanceVideo):
        return video.maps
    return np.asarray(video)


def frame_overlaps(pred, gt):
    """All (pred id, gt id) pairs of one frame with IoU > 0.5, and the id sets."""
    pred_ids = [int(i) for i in np.unique(pred) if i != 0]
    gt_ids = [int(i) for i in np.unique(gt) if i != 0]
    areas_p = dict((i, int(np.count_nonzero(pred == i))) for i in pred_ids)
    areas_g = dict((i, int(np.count_nonzero(gt == i))) for i in gt_ids)
    both = (pred != 0) & (gt != 0)
    pairs = {}
    if np.any(both):
        keys, counts = np.unique(np.stack([pred[both], gt[both]], axis=-1), axis=0, return_counts=True)
        for (p, g), inter in zip(keys.tolist(), counts.tolist()):
            iou = inter / (areas_p[p] + areas_g[g] - inter)
            if iou > MATCH_IOU:
                pairs[(p, g)] = iou
    return pairs, pred_ids, gt_ids


def panoptic_counts(pred, gt, horizon=None):
    """Per-frame PanopticCounts under track binding.

    A pred track binds to the gt track of its first true positive; in
    later frames it can only be a true positive with that gt track.
    """
    P = _maps(pred)
    G = _maps(gt)
    if P.shape != G.shape:
        raise ShapeError("Instance videos differ in shape: {0:s} and {1:s}.".format(str(P.shape), str(G.shape)))
    if horizon is None:
        horizon = P.shape[0] - 1
    if not 0 <= horizon < P.shape[0]:
        raise ValueError("Horizon {0:d} does not fit videos of {1:d} frames.".format(horizon, P.shape[0]))
    binding = {}
    out = []
    for t in range(horizon + 1):
        pairs, pred_ids, gt_ids = frame_overlaps(P[t], G[t])
        counts = PanopticCounts()
        matched_p = set()
        matched_g = set()
        for (p, g) in sorted(pairs):
            if binding.get(p, g) != g:
                continue
            binding[p] = g
            counts.pairs.append((p, g))
            counts.ious.append(pairs[(p, g)])
            matched_p.add(p)
            matched_g.add(g)
        counts.fp = len([p for p in pred_ids if p not in matched_p])
        counts.fn = len([g for g in gt_ids if g not in matched_g])
        out.append(counts)
    return out


def vpq(pred, gt, horizon=None):
    """Video panoptic quality with its recognition and segmentation factors.

    Per frame ``VPQ_t = sum IoU / (TP + FP/2 + FN/2)``, ``VSQ_t = sum IoU / TP``
    and ``VRQ_t = TP / (TP + FP/2 + FN/2)``. Reported values are means over
    the frames 0..horizon that hold at least one instance; when no frame
    does, every score is 1.0.

    Returns
    -------
    dict with ``VPQ``, ``VRQ``, ``VSQ`` and ``per_frame``
    """
    frames = panoptic_counts(pred, gt, horizon)
    per_frame = []
    for t, c in enumerate(frames):
        rec = c.as_dict()
        rec['frame'] = t
        per_frame.append(rec)
    scored = [c for c in frames if not c.empty]
    if not scored:
        result = {'VPQ': 1.0, 'VRQ': 1.0, 'VSQ': 1.0}
    else:
        n = len(scored)
        result = {'VPQ': math.fsum(c.pq() for c in scored) / n,
                  'VRQ': math.fsum(c.rq() for c in scored) / n,
                  'VSQ': math.fsum(c.sq() for c in scored) / n}
    result['per_frame'] = per_frame
    return result


def best_bijection(pred, gt):
    """Pred-to-gt id mapping maximising the total overlap over all frames."""
    P = _maps(pred)
    G = _maps(gt)
    pred_ids = [int(i) for i in np.unique(P) if i != 0]
    gt_ids = [int(i) for i in np.unique(G) if i != 0]
    if not pred_ids or not gt_ids:
        return {}
    overlap = np.zeros((len(pred_ids), len(gt_ids)))
    for a, p in enumerate(pred_ids):
        mask = P == p
        for b, g in enumerate(gt_ids):
            overlap[a, b] = np.count_nonzero(mask & (G == g))
    rows, cols = linear_sum_assignment(overlap, maximize=True)
    return dict((pred_ids[a], gt_ids[b]) for a, b in zip(rows, cols) if overlap[a, b] > 0)


def evaluate(bundle, gt, pred_video, gt_video, grid, short_range=SHORT_RANGE, long_range=LONG_RANGE):
    """Evaluation report of one run.

    IoU of the vehicle class over all output frames at a short and a long
    centred crop, VPQ family over the long crop, and per-class IoU of the
    current frame.
    """
    pred_mask = bundle.vehicle_mask()
    gt_mask = gt.seg[:, 1] > 0.5
    short = grid.crop(short_range)
    long_ = grid.crop(long_range)
    report = {
        'IoU_short': seg_iou(pred_mask[(slice(None),) + short], gt_mask[(slice(None),) + short]),
        'IoU_long': seg_iou(pred_mask[(slice(None),) + long_], gt_mask[(slice(None),) + long_]),
    }
    scores = vpq(pred_video.crop(long_), gt_video.crop(long_))
    report.update(VPQ=scores['VPQ'], VRQ=scores['VRQ'], VSQ=scores['VSQ'])
    labels = np.argmax(bundle.seg[0], axis=0)
    gt_labels = np.argmax(gt.seg[0], axis=0)
    for k, name in ((1, 'IoU_vehicle'), (2, 'IoU_pedestrian')):
        if k < bundle.seg.shape[1]:
            report[name] = seg_iou(labels == k, gt_labels == k)
    logger.info("IoU short %.4f long %.4f, VPQ %.4f", report['IoU_short'], report['IoU_long'], report['VPQ'])
    return report
