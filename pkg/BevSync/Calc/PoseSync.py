# -*- coding: utf-8 -*-
"""Pose-synchronised BEV encoder.

Every frame, current or historical, is encoded straight into the current
ego BEV frame: the BEV cell anchors are projected with the camera pose
at capture time, and a deformable attention samples the camera features
around the projected reference points.

Reference points are passed normalised as ``(row / (H - 1), col / (W - 1))``;
sampling offsets are in pixels, ordered (row, col).
"""
from __future__ import print_function, division

import logging
import os
import warnings

import numpy as np

from ..Util import ShapeError, FormatError
from ..Util.Tensor import (F32, F64, bilinear_corners, bilinear_sample, gelu, layernorm, linear,
                           parallel_rows, read_btf, softmax, write_btf)
from ..Util.Weights import WeightSpec
from .Geometry import make_projection, project

logger = logging.getLogger(__name__)

NORMS = ('layer', 'identity')
AGGREGATIONS = ('mean', 'valid-mean')


class DeformAttnParams(object):
    """Weights of one deformable attention block.

    Shapes, for ``C`` channels, ``M`` heads and ``K`` points per head:

    ========== =============
    W_offset   (M*K*2, C)
    b_offset   (M*K*2,)
    W_weight   (M*K, C)
    b_weight   (M*K,)
    W_value    (C, C)
    b_value    (C,)
    W_out      (C, C)
    b_out      (C,)
    ========== =============
    """

    NAMES = ('W_offset', 'b_offset', 'W_weight', 'b_weight', 'W_value', 'b_value', 'W_out', 'b_out')

    def __init__(self, M, K, **weights):
        self._M = int(M)
        self._K = int(K)
        missing = [n for n in self.NAMES if n not in weights]
        if missing:
            raise ValueError("Missing deformable attention weights {0:s}.".format(str(missing)))
        for name in self.NAMES:
            setattr(self, name, np.asarray(weights[name]))
        C = self.W_value.shape[0]
        if C % self._M != 0:
            raise ShapeError("Channels {0:d} are not divisible by {1:d} heads.".format(C, self._M))
        expected = self.shapes(C, self._M, self._K)
        for name in self.NAMES:
            if getattr(self, name).shape != expected[name]:
                raise ShapeError("{0:s} has shape {1:s}, expected {2:s}.".format(
                    name, str(getattr(self, name).shape), str(expected[name])))

    @property
    def M(self): return self._M

    @property
    def K(self): return self._K

    @property
    def C(self): return self.W_value.shape[0]

    @staticmethod
    def shapes(C, M, K):
        return {'W_offset': (M * K * 2, C), 'b_offset': (M * K * 2,),
                'W_weight': (M * K, C), 'b_weight': (M * K,),
                'W_value': (C, C), 'b_value': (C,), 'W_out': (C, C), 'b_out': (C,)}

    @classmethod
    def specs(cls, prefix, C, M, K):
        shapes = cls.shapes(C, M, K)
        kinds = {'W_offset': 'zeros', 'W_weight': 'uniform', 'W_value': 'uniform', 'W_out': 'uniform'}
        return dict((prefix + '.' + n, WeightSpec(shapes[n], kinds.get(n, 'zeros'), C)) for n in cls.NAMES)

    @classmethod
    def from_scope(cls, scope, M, K):
        return cls(M, K, **dict((n, scope[n]) for n in cls.NAMES))

    @classmethod
    def collapsed(cls, C, M=1, K=1, dtype=F64):
        """Zero offsets, uniform weights, identity value and output projections.

        With these weights the block returns the bilinear sample of the
        feature map at the reference point.
        """
        shapes = cls.shapes(C, M, K)
        weights = dict((n, np.zeros(shapes[n], dtype=dtype)) for n in cls.NAMES)
        weights['W_value'] = np.eye(C, dtype=dtype)
        weights['W_out'] = np.eye(C, dtype=dtype)
        return cls(M, K, **weights)

    def items(self):
        for name in self.NAMES:
            yield name, getattr(self, name)

    def astype(self, dtype):
        return DeformAttnParams(self._M, self._K, **dict((n, w.astype(dtype)) for n, w in self.items()))


def value_map(F, params):
    """Per-pixel value projection ``W_value f + b_value`` of a (H, W, C) map."""
    return linear(F, params.W_value, params.b_value)


def _pixel_scale(shape):
    return np.array([shape[0] - 1, shape[1] - 1], dtype=np.float64)


def _sample_locations(Q, P, V, params):
    N = Q.shape[0]
    M, K = params.M, params.K
    offsets = linear(Q, params.W_offset, params.b_offset).reshape(N, M, K, 2)
    logits = linear(Q, params.W_weight, params.b_weight).reshape(N, M, K)
    A = softmax(logits, axis=-1)
    loc = P[:, None, None, :] * _pixel_scale(V.shape) + offsets
    return offsets, A, loc


def deform_attn_batch(Q, P, F, params, V=None):
    """Deformable attention of N queries against one feature map.

    Parameters
    ----------
    Q : (N, C) queries
    P : (N, 2) normalised reference points (row, col)
    F : (H, W, C) feature map
    params : DeformAttnParams
    V : (H, W, C), optional
        Precomputed :func:`value_map` of ``F``.

    Returns
    -------
    (N, C) outputs
    """
    Q = np.asarray(Q)
    P = np.asarray(P, dtype=np.float64)
    if V is None:
        V = value_map(F, params)
    N, C = Q.shape
    M, K = params.M, params.K
    d = C // M
    _, A, loc = _sample_locations(Q, P, V, params)
    heads = np.empty((N, M, d), dtype=np.result_type(Q, V))
    for m in range(M):
        s, _ = bilinear_sample(V[..., m * d:(m + 1) * d], loc[:, m])
        heads[:, m] = np.einsum('nk,nkd->nd', A[:, m], s)
    return linear(heads.reshape(N, C), params.W_out, params.b_out)


def deform_attn(q, p, F, params):
    """Deformable attention of a single C-vector query at reference point ``p``."""
    return deform_attn_batch(np.asarray(q)[None], np.asarray(p, dtype=np.float64)[None], F, params)[0]


def deform_attn_grad(q, p, F, params, grad_output=None):
    """Analytic gradients of :func:`deform_attn`.

    Parameters
    ----------
    q, p, F, params :
        As for :func:`deform_attn`; use float64 inputs.
    grad_output : (C,) array, optional
        Cotangent of the output, defaults to ones (gradient of the sum).

    Returns
    -------
    dict
        Gradients keyed ``q``, ``p``, ``F``, ``offsets`` and every weight
        name, plus ``kink``: True when a sample lies exactly on a pixel grid
        line, where bilinear sampling is not differentiable.
    """
    q = np.asarray(q, dtype=F64)
    p = np.asarray(p, dtype=F64)
    F = np.asarray(F, dtype=F64)
    C = q.shape[0]
    M, K = params.M, params.K
    d = C // M
    H, W = F.shape[:2]
    g_out = np.ones(C) if grad_output is None else np.asarray(grad_output, dtype=F64)

    V = value_map(F, params)
    offsets, A, loc = _sample_locations(q[None], p[None], V, params)
    offsets, A, loc = offsets[0], A[0], loc[0]
    r0, r1, c0, c1, fr, fc, valid = bilinear_corners(loc[..., 0], loc[..., 1], H, W)
    kink = bool(np.any(valid & ((fr == 0.0) | (fc == 0.0))))

    # Per-head samples s[m, k, :] and their spatial derivatives.
    s = np.zeros((M, K, d))
    ds_dr = np.zeros((M, K, d))
    ds_dc = np.zeros((M, K, d))
    for m in range(M):
        Vm = V[..., m * d:(m + 1) * d]
        v00, v01 = Vm[r0[m], c0[m]], Vm[r0[m], c1[m]]
        v10, v11 = Vm[r1[m], c0[m]], Vm[r1[m], c1[m]]
        a, b = fr[m][:, None], fc[m][:, None]
        mask = valid[m][:, None]
        s[m] = np.where(mask, (1 - a) * (1 - b) * v00 + (1 - a) * b * v01 + a * (1 - b) * v10 + a * b * v11, 0.0)
        ds_dr[m] = np.where(mask, -(1 - b) * v00 - b * v01 + (1 - b) * v10 + b * v11, 0.0)
        ds_dc[m] = np.where(mask, -(1 - a) * v00 + (1 - a) * v01 - a * v10 + a * v11, 0.0)

    h = np.einsum('mk,mkd->md', A, s)
    grads = {'W_out': np.outer(g_out, h.reshape(C)), 'b_out': g_out.copy()}
    g_h = params.W_out.T.dot(g_out).reshape(M, d)

    g_A = np.einsum('md,mkd->mk', g_h, s)
    g_logits = A * (g_A - np.sum(A * g_A, axis=-1, keepdims=True))
    grads['W_weight'] = np.outer(g_logits.reshape(-1), q)
    grads['b_weight'] = g_logits.reshape(-1)

    g_s = A[..., None] * g_h[:, None, :]
    g_loc = np.stack([np.sum(g_s * ds_dr, axis=-1), np.sum(g_s * ds_dc, axis=-1)], axis=-1)
    grads['offsets'] = g_loc
    grads['W_offset'] = np.outer(g_loc.reshape(-1), q)
    grads['b_offset'] = g_loc.reshape(-1)
    grads['p'] = np.sum(g_loc, axis=(0, 1)) * _pixel_scale(F.shape)

    g_V = np.zeros_like(V)
    for m in range(M):
        sl = slice(m * d, (m + 1) * d)
        a, b = fr[m], fc[m]
        for rr, cc, w in ((r0[m], c0[m], (1 - a) * (1 - b)), (r0[m], c1[m], (1 - a) * b),
                          (r1[m], c0[m], a * (1 - b)), (r1[m], c1[m], a * b)):
            contrib = np.where(valid[m][:, None], w[:, None] * g_s[m], 0.0)
            np.add.at(g_V[..., sl], (rr, cc), contrib)
    flat_gV = g_V.reshape(-1, C)
    grads['W_value'] = flat_gV.T.dot(F.reshape(-1, C))
    grads['b_value'] = flat_gV.sum(axis=0)
    grads['F'] = g_V.dot(params.W_value)
    grads['q'] = params.W_weight.T.dot(g_logits.reshape(-1)) + params.W_offset.T.dot(g_loc.reshape(-1))
    grads['kink'] = kink
    return grads


def reference_points(grid, projection):
    """Project every BEV anchor; returns normalised points and validity, (X, Y, Z, ...)."""
    u, v, _, valid = project(projection, grid.anchor_points())
    scale = np.array([max(projection.height - 1, 1), max(projection.width - 1, 1)], dtype=np.float64)
    P = np.stack([np.where(valid, v, 0.0), np.where(valid, u, 0.0)], axis=-1) / scale
    return P, valid


def cross_view_attention(Q, features, projections, grid, params, aggregation='mean', workers=None,
                         return_per_camera=False):
    """Sample every camera around the projected anchors of each BEV cell.

    For camera i the contribution of cell (x, y) is the sum of the
    deformable attention over the height anchors that project validly
    into that camera; cells with no valid anchor get zero. The cameras are
    then averaged over all N cameras (``'mean'``) or over the cameras with
    at least one valid anchor for the cell (``'valid-mean'``).

    Parameters
    ----------
    Q : (X, Y, C) query map (positional embedding already added)
    features : list of (H, W, C) arrays, one per camera
    projections : list of ProjectionMatrix, one per camera
    grid : BevGrid
    params : DeformAttnParams

    Returns
    -------
    B : (X, Y, C), or (B, [B_i]) with ``return_per_camera``
    """
    if aggregation not in AGGREGATIONS:
        raise ValueError("Invalid aggregation \"{0:s}\", expected one of {1:s}.".format(aggregation, str(AGGREGATIONS)))
    if len(features) != len(projections) or len(features) == 0:
        raise ShapeError("Need one projection per camera, got {0:d} feature maps and {1:d} projections.".format(
            len(features), len(projections)))
    Q = np.asarray(Q)
    X, Y, C = Q.shape
    if (X, Y) != grid.shape:
        raise ShapeError("Query map {0:s} does not match the grid {1:s}.".format(str(Q.shape[:2]), str(grid.shape)))
    per_camera = []
    seen = np.zeros((X, Y), dtype=np.int64)
    for F, T in zip(features, projections):
        V = value_map(F, params)
        P, valid = reference_points(grid, T)
        if not np.any(valid):
            warnings.warn("A camera sees none of the BEV anchors.", UserWarning)

        def row(x):
            out = np.zeros((Y, C), dtype=np.result_type(Q, V))
            ys, zs = np.nonzero(valid[x])
            if ys.size:
                vals = deform_attn_batch(Q[x, ys], P[x, ys, zs], F, params, V=V)
                np.add.at(out, ys, vals)
            return out

        Bi = np.stack(parallel_rows(row, X, workers), axis=0)
        per_camera.append(Bi)
        seen += np.any(valid, axis=-1)
    total = np.sum(per_camera, axis=0)
    if aggregation == 'mean':
        B = total / len(per_camera)
    else:
        B = total / np.maximum(seen, 1)[..., None]
    B = B.astype(Q.dtype, copy=False)
    if return_per_camera:
        return B, per_camera
    return B


def posesync_specs(C, M, K, layers, X, Y, ffn_ratio=2, prefix='posesync'):
    """Weight specs of the encoder: queries, positional embedding and ``layers`` blocks."""
    specs = {prefix + '.queries': WeightSpec((X, Y, C), 'uniform', C),
             prefix + '.pos': WeightSpec((X, Y, C), 'uniform', C)}
    hidden = ffn_ratio * C
    for l in range(layers):
        base = '{0:s}.layer{1:d}'.format(prefix, l)
        specs.update(DeformAttnParams.specs(base + '.attn', C, M, K))
        specs.update(ffn_specs(base + '.ffn', C, hidden))
        for norm in ('norm1', 'norm2'):
            specs[base + '.' + norm + '.gamma'] = WeightSpec((C,), 'ones')
            specs[base + '.' + norm + '.beta'] = WeightSpec((C,), 'zeros')
    return specs


def posesync_param_count(C, M, K, layers, X, Y, ffn_ratio=2):
    """Closed form: ``2XYC + L (3MKC + 3MK + 2C^2 + 2C + 2hC + h + C + 4C)``, h = ffn_ratio C."""
    h = ffn_ratio * C
    attn = 2 * M * K * C + 2 * M * K + M * K * C + M * K + 2 * (C * C + C)
    ffn = C * h + h + h * C + C
    return 2 * X * Y * C + layers * (attn + ffn + 4 * C)


def ffn_specs(prefix, C, hidden):
    return {prefix + '.W1': WeightSpec((hidden, C), 'uniform', C),
            prefix + '.b1': WeightSpec((hidden,), 'zeros'),
            prefix + '.W2': WeightSpec((C, hidden), 'uniform', hidden),
            prefix + '.b2': WeightSpec((C,), 'zeros')}


def ffn(x, scope):
    return linear(gelu(linear(x, scope['W1'], scope['b1'])), scope['W2'], scope['b2'])


def add_norm(x, y, scope, norm):
    if norm == 'identity':
        return x + y
    return layernorm(x + y, scope['gamma'], scope['beta'])


def encode_frame(features, projections, grid, weights, M=4, K=4, layers=3, norm='layer', aggregation='mean',
                 queries=None, workers=None, prefix='posesync'):
    """Encode one frame's camera features into a (X, Y, C) BEV map.

    Each layer runs cross-view attention with the positional embedding
    added to its input, then add&norm, a two-layer GELU feed-forward
    network and another add&norm.

    Parameters
    ----------
    features : list of (H, W, C) arrays
    projections : list of ProjectionMatrix
    grid : BevGrid
    weights : WeightContainer
    queries : (X, Y, C), optional
        Overrides the learnt BEV queries.
    """
    if layers < 1:
        raise ValueError("The encoder needs at least one layer, got {0:d}.".format(layers))
    if norm not in NORMS:
        raise ValueError("Invalid norm \"{0:s}\", expected one of {1:s}.".format(norm, str(NORMS)))
    scope = weights.scope(prefix)
    x = np.asarray(scope['queries'] if queries is None else queries)
    pos = scope['pos']
    for l in range(layers):
        layer = scope.scope('layer{0:d}'.format(l))
        params = DeformAttnParams.from_scope(layer.scope('attn'), M, K)
        attn = cross_view_attention(x + pos, features, projections, grid, params, aggregation, workers)
        x = add_norm(x, attn, layer.scope('norm1'), norm)
        x = add_norm(x, ffn(x, layer.scope('ffn')), layer.scope('norm2'), norm)
    return x.astype(weights.dtype, copy=False)


def frame_projections(scn, images, reference_frame=0):
    """Projections of the cameras of ``images`` into the ego frame at ``reference_frame``.

    With ``reference_frame = 0`` every historical frame projects from the
    current ego frame (pose synchronisation); with the frame's own index it
    projects from the ego frame at capture time.
    """
    ego_now = scn.ego_pose(reference_frame)
    out = []
    for img in images:
        cam = img.camera
        out.append(make_projection(cam.intrinsics, cam.cam_from_ego, scn.ego_pose(img.frame), ego_now))
    return out


class TemporalBevMap(object):
    """Stack ``[B^(0), B^(-1), ..., B^(-T)]`` of (X, Y, C) BEV maps."""

    def __init__(self, B, tags=None):
        B = np.asarray(B)
        if B.ndim != 4:
            raise ShapeError("A temporal map is (T+1, X, Y, C), got {0:s}.".format(str(B.shape)))
        self._B = B
        self._tags = list(range(0, -B.shape[0], -1)) if tags is None else [int(t) for t in tags]

    @property
    def B(self): return self._B

    @property
    def tags(self): return list(self._tags)

    @property
    def T(self): return self._B.shape[0] - 1

    @property
    def shape(self): return self._B.shape

    def save(self, path):
        write_btf(path, self._B)

    @classmethod
    def load(cls, path):
        B = read_btf(path)
        if B.ndim != 4:
            raise FormatError("{0:s} does not hold a (T+1, X, Y, C) map.".format(str(path)))
        return cls(B)


def build_temporal_map(frames, tags=None, T=None):
    """Stack encoded frames in the order current, previous, ..., oldest.

    ``tags`` are the frame indices the maps were encoded from; they must
    read ``0, -1, ..., -T``.
    """
    frames = [np.asarray(f) for f in frames]
    if T is not None and len(frames) != T + 1:
        raise ValueError("Expected {0:d} encoded frames, got {1:d}.".format(T + 1, len(frames)))
    if len(frames) == 0:
        raise ValueError("Cannot build a temporal map from zero frames.")
    if tags is not None:
        expected = list(range(0, -len(frames), -1))
        if [int(t) for t in tags] != expected:
            raise ValueError("Frames are out of order: tags {0:s}, expected {1:s}.".format(str(list(tags)), str(expected)))
    shapes = set(f.shape for f in frames)
    if len(shapes) != 1:
        raise ShapeError("Encoded frames differ in shape: {0:s}.".format(str(sorted(shapes))))
    return TemporalBevMap(np.stack(frames, axis=0), tags)


def encode_sequence(scn, feature_sets, grid, weights, M=4, K=4, layers=3, aggregation='mean', workers=None,
                    synchronise=True):
    """Encode frames 0, -1, ..., -T.

    ``feature_sets[t]`` holds the camera images of frame ``-t``. With
    ``synchronise`` every frame is encoded into the current ego frame,
    otherwise into its own ego frame (to be aligned by warping).
    """
    maps = []
    tags = []
    for images in feature_sets:
        frame = images[0].frame
        projections = frame_projections(scn, images, 0 if synchronise else frame)
        maps.append(encode_frame([img.features for img in images], projections, grid, weights, M, K, layers,
                                 aggregation=aggregation, workers=workers))
        tags.append(frame)
        logger.debug("Encoded frame %d", frame)
    return build_temporal_map(maps, tags)


def save_feature_sets(directory, feature_sets):
    if not os.path.isdir(directory):
        os.makedirs(directory)
    for images in feature_sets:
        for img in images:
            write_btf(os.path.join(directory, 'frame{0:d}_{1:s}.btf'.format(img.frame, img.camera.name)),
                      img.features, dtype=F32)
