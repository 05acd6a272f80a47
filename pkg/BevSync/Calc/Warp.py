# -*- coding: utf-8 -*-
"""Rigid warping of past BEV maps by the ego-motion delta, and diagnostics
that compare it with pose-synchronised encoding."""
from __future__ import print_function, division

import logging

import numpy as np

from ..Util.Tensor import bilinear_sample
from .Geometry import BevGrid, make_projection, rot_2d
from .PoseSync import DeformAttnParams, cross_view_attention
from .SynthScene import CH_BOX, FEATURE_WIDTH, encode_world, render_features

logger = logging.getLogger(__name__)

MODES = ('bilinear', 'nearest')
SNAP = 1e-9


def _snap(coords):
    """Round coordinates within SNAP of an integer cell onto it."""
    nearest = np.rint(coords)
    return np.where(np.abs(coords - nearest) < SNAP, nearest, coords)


class EgoDelta(object):
    """Planar motion taking past-ego coordinates to current-ego coordinates,
    ``p_cur = R(theta) p_past + (dx, dy)``."""

    def __init__(self, theta=0.0, dx=0.0, dy=0.0):
        values = (float(theta), float(dx), float(dy))
        if not all(np.isfinite(values)):
            raise ValueError("EgoDelta needs finite values, got {0:s}.".format(str(values)))
        self._theta, self._dx, self._dy = values

    @property
    def theta(self): return self._theta

    @property
    def translation(self): return np.array([self._dx, self._dy])

    @classmethod
    def from_poses(cls, ego_past, ego_now):
        return cls.from_pose(ego_now.inverse().compose(ego_past))

    @classmethod
    def from_pose(cls, pose):
        x, y, yaw = pose.planar()
        return cls(yaw, x, y)

    def compose(self, other):
        """``self ∘ other``: apply ``other`` first."""
        t = rot_2d(self._theta).dot(other.translation) + self.translation
        return EgoDelta(self._theta + other.theta, t[0], t[1])

    def inverse(self):
        t = -rot_2d(-self._theta).dot(self.translation)
        return EgoDelta(-self._theta, t[0], t[1])

    def apply(self, points):
        pts = np.asarray(points, dtype=np.float64)
        return pts.dot(rot_2d(self._theta).T) + self.translation

    def __repr__(self):
        return "EgoDelta(theta={0:g}, dx={1:g}, dy={2:g})".format(self._theta, self._dx, self._dy)


def warp_bev(B_past, grid, delta, mode='bilinear'):
    """Resample a past (X, Y, C) map into the current ego frame.

    Returns
    -------
    B_warped : (X, Y, C), zero where the source position is off the grid
    mask : (X, Y) bool, True where the source lies inside the past grid
    """
    if mode not in MODES:
        raise ValueError("Invalid warp mode \"{0:s}\", expected one of {1:s}.".format(mode, str(MODES)))
    B_past = np.asarray(B_past)
    current = grid.cell_centers()
    past = delta.inverse().apply(current)
    rows, cols = grid.metric_to_cell(past[..., 0], past[..., 1])
    rows = _snap(rows)
    cols = _snap(cols)
    if mode == 'nearest':
        rows = np.floor(rows + 0.5)
        cols = np.floor(cols + 0.5)
    out, valid = bilinear_sample(B_past, np.stack([rows, cols], axis=-1))
    return out.astype(B_past.dtype, copy=False), valid


def composition_gap(B, grid, delta1, delta2, mode='bilinear'):
    """Difference between two successive warps and one warp by the composed delta.

    Compared on the cells both routes keep. Returns a dict with the
    ``max`` and ``mean`` absolute difference and the ``valid_fraction``.
    """
    step, m1 = warp_bev(B, grid, delta1, mode)
    twice, m2 = warp_bev(step, grid, delta2, mode)
    once, m3 = warp_bev(B, grid, delta2.compose(delta1), mode)
    both = m2 & m3
    if not np.any(both):
        return {'max': 0.0, 'mean': 0.0, 'valid_fraction': 0.0}
    diff = np.abs(twice[both] - once[both])
    return {'max': float(np.max(diff)), 'mean': float(np.mean(diff)), 'valid_fraction': float(np.mean(both))}


def decode_position(phi):
    """Metric coordinate encoded in a ``[sin, cos]`` pair at 1/8 and 1/32 cycles per metre."""
    coarse = np.arctan2(phi[..., 2], phi[..., 3]) / (2.0 * np.pi) * 32.0
    fine = np.arctan2(phi[..., 0], phi[..., 1]) / (2.0 * np.pi) * 8.0
    return fine + 8.0 * np.round((coarse - fine) / 8.0)


def cosine(a, b):
    na = np.linalg.norm(a, axis=-1)
    nb = np.linalg.norm(b, axis=-1)
    denom = na * nb
    return np.where(denom > 0, np.sum(a * b, axis=-1) / np.where(denom > 0, denom, 1.0), 0.0)


def ground_encoder(scn, images, grid, reference_frame):
    ground = BevGrid(grid.X, grid.Y, grid.resolution, [0.0])
    ego_ref = scn.ego_pose(reference_frame)
    projections = [make_projection(img.camera.intrinsics, img.camera.cam_from_ego, scn.ego_pose(img.frame), ego_ref)
                   for img in images]
    C = images[0].features.shape[-1]
    params = DeformAttnParams.collapsed(C)
    Q = np.zeros(grid.shape + (C,))
    feats = [img.features.astype(np.float64) for img in images]
    return cross_view_attention(Q, feats, projections, ground, params)


def distortion_report(scn, grid, channels=FEATURE_WIDTH, workers=None):
    """Compare warping against pose synchronisation on a static scene.

    Each historical frame is encoded twice with sampling-only attention on
    the ground anchor: directly into the current ego frame, and into its own
    ego frame followed by :func:`warp_bev`. Both are scored against the
    positional encoding of the world position of every current cell.

    Returns
    -------
    list of dict
        One record per (frame, method) with ``displacement`` (cells, relative
        to the synchronised map), ``oob_fraction`` and ``cosine``.
    """
    if not scn.is_static:
        raise ValueError("The distortion report needs a static scene, but some boxes move.")
    ego_now = scn.ego_pose(0)
    centers = grid.cell_centers()
    world = ego_now.apply(np.concatenate([centers, np.zeros(grid.shape + (1,))], axis=-1))
    reference = encode_world(world)
    rows = []
    for t in range(1, scn.T + 1):
        images = render_features(scn, -t, channels, np.float64, workers)
        B_sync = ground_encoder(scn, images, grid, 0)
        B_own = ground_encoder(scn, images, grid, -t)
        delta = EgoDelta.from_poses(scn.ego_pose(-t), ego_now)
        B_warp, mask = warp_bev(B_own, grid, delta)
        visible = np.any(B_sync[..., :8] != 0.0, axis=-1) & (np.abs(B_sync[..., CH_BOX]) < 1e-6)
        if not np.any(visible):
            logger.warning("Frame %d: no ground cell is visible.", -t)
            continue
        pos_sync = np.stack([decode_position(B_sync[..., 0:4]), decode_position(B_sync[..., 4:8])], axis=-1)
        pos_warp = np.stack([decode_position(B_warp[..., 0:4]), decode_position(B_warp[..., 4:8])], axis=-1)
        both = visible & mask & np.any(B_warp[..., :8] != 0.0, axis=-1)
        disp = np.linalg.norm(pos_warp - pos_sync, axis=-1)[both] / grid.resolution
        rows.append({'frame': -t, 'method': 'sync', 'displacement': 0.0, 'oob_fraction': 0.0,
                     'cosine': float(np.mean(cosine(B_sync[..., :8], reference)[visible]))})
        rows.append({'frame': -t, 'method': 'warp', 'displacement': float(np.mean(disp)) if disp.size else 0.0,
                     'oob_fraction': float(1.0 - np.mean(mask)),
                     'cosine': float(np.mean(cosine(B_warp[..., :8], reference)[visible]))})
        logger.debug("Frame %d: sync cos %.4f, warp cos %.4f", -t, rows[-2]['cosine'], rows[-1]['cosine'])
    return rows
