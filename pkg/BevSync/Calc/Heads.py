# -*- coding: utf-8 -*-
"""Task heads turning predicted BEV states into segmentation, instance
centre, offset, flow and HD-map outputs."""
from __future__ import print_function, division

import logging

import numpy as np
from einops import rearrange

from ..Util import ShapeError, FormatError
from ..Util.Tensor import conv2d, gelu, layernorm, parallel_rows, sigmoid, softmax
from ..Util.Weights import WeightContainer, WeightSpec, count_specs

logger = logging.getLogger(__name__)

HDMAP_CLASSES = 2


def head_channels(classes=3):
    """Output channels of every head, in evaluation order."""
    return dict(seg=classes, center=1, offset=2, flow=2, hdmap=HDMAP_CLASSES)


def head_specs(C, classes=3, prefix='heads'):
    specs = {}
    for name, out in head_channels(classes).items():
        base = prefix + '.' + name
        specs[base + '.W1'] = WeightSpec((C, C, 3, 3), 'uniform', 9 * C)
        specs[base + '.b1'] = WeightSpec((C,), 'zeros')
        specs[base + '.norm.gamma'] = WeightSpec((C,), 'ones')
        specs[base + '.norm.beta'] = WeightSpec((C,), 'zeros')
        specs[base + '.W2'] = WeightSpec((out, C, 1, 1), 'uniform', C)
        specs[base + '.b2'] = WeightSpec((out,), 'zeros')
    return specs


def heads_param_count(C, classes=3):
    """Closed form: every head has ``9C^2 + C + 2C + oC + o`` scalars for ``o`` outputs."""
    return sum(9 * C * C + C + 2 * C + out * C + out for out in head_channels(classes).values())


def head_trunk(x, scope):
    """conv3x3 -> channel norm -> GELU on a (C, X, Y) map."""
    y = conv2d(x, scope['W1'], scope['b1'], stride=1, pad=1)
    y = layernorm(y, scope['norm.gamma'][:, None, None], scope['norm.beta'][:, None, None], axis=0)
    return gelu(y)


def run_head(x, scope):
    return conv2d(head_trunk(x, scope), scope['W2'], scope['b2'])


class PredictionBundle(object):
    """Head outputs over the predicted frames 0..T'.

    ``seg`` (F, n_cls, X, Y) logits, ``center`` (F, 1, X, Y) in (0, 1),
    ``offset`` and ``flow`` (F, 2, X, Y) in cells, ``hdmap`` (2, X, Y)
    logits of the current frame.
    """

    NAMES = ('seg', 'center', 'offset', 'flow', 'hdmap')

    def __init__(self, seg, center, offset, flow, hdmap):
        self.seg = np.asarray(seg)
        self.center = np.asarray(center)
        self.offset = np.asarray(offset)
        self.flow = np.asarray(flow)
        self.hdmap = np.asarray(hdmap)
        F = self.seg.shape[0]
        for name in ('center', 'offset', 'flow'):
            if getattr(self, name).shape[0] != F:
                raise ShapeError("Head \"{0:s}\" has {1:d} frames, seg has {2:d}.".format(
                    name, getattr(self, name).shape[0], F))

    @property
    def frames(self): return self.seg.shape[0]

    @property
    def shape(self): return self.seg.shape[2:]

    def seg_probs(self):
        return softmax(self.seg, axis=1)

    def vehicle_mask(self):
        """Cells whose vehicle probability exceeds 0.5, (F, X, Y)."""
        return self.seg_probs()[:, 1] > 0.5

    def save(self, directory):
        container = WeightContainer(self.seg.dtype)
        for name in self.NAMES:
            container[name] = getattr(self, name)
        container.save(directory)

    @classmethod
    def load(cls, directory):
        container = WeightContainer.load(directory)
        missing = [n for n in cls.NAMES if n not in container]
        if missing:
            raise FormatError("Prediction directory {0:s} misses {1:s}.".format(str(directory), str(missing)))
        return cls(*[container[n] for n in cls.NAMES])

    @classmethod
    def from_ground_truth(cls, gt, scale=10.0):
        """Turn label rasters into confident predictions (one-hot seg to logits)."""
        hd = gt.hdmap
        return cls(scale * (2.0 * gt.seg - 1.0), gt.center[:, None], gt.offset, gt.flow, scale * (2.0 * hd - 1.0))


def run_heads(D0, weights, classes=3, workers=None, prefix='heads'):
    """Apply every head to each (X, Y, C) frame of ``D0``; hdmap to frame 0 only."""
    D0 = np.asarray(D0)
    if D0.ndim != 4:
        raise ShapeError("Heads expect (F, X, Y, C) states, got {0:s}.".format(str(D0.shape)))
    scope = weights.scope(prefix)
    names = ('seg', 'center', 'offset', 'flow')

    def frame(i):
        x = rearrange(D0[i], 'x y c -> c x y')
        return [run_head(x, scope.scope(n)) for n in names]

    outs = parallel_rows(frame, D0.shape[0], workers)
    seg, center, offset, flow = [np.stack([o[j] for o in outs], axis=0) for j in range(len(names))]
    hdmap = run_head(rearrange(D0[0], 'x y c -> c x y'), scope.scope('hdmap'))
    return PredictionBundle(seg, sigmoid(center), offset, flow, hdmap)


def model_specs(cfg):
    """Weight specs of the whole model for a RunConfig."""
    from .PoseSync import posesync_specs
    from .Stpt import stpt_specs
    specs = posesync_specs(cfg.channels, cfg.posesync_heads, cfg.posesync_points, cfg.posesync_layers,
                           cfg.X, cfg.Y, cfg.posesync_ffn_ratio)
    specs.update(stpt_specs(cfg.channels, cfg.stpt_depth, cfg.window, cfg.future_frames, cfg.X, cfg.Y,
                            cfg.stpt_ffn_ratio, cfg.shift, cfg.separate_queries))
    specs.update(head_specs(cfg.channels, cfg.classes))
    return specs


def count_params(cfg, breakdown=False):
    """Learnable scalar count of the model from the per-module closed forms.

    With ``breakdown`` a dict with ``posesync``, ``stpt``, ``heads`` and
    ``total`` is returned.
    """
    from .PoseSync import posesync_param_count
    from .Stpt import stpt_param_count
    parts = {
        'posesync': posesync_param_count(cfg.channels, cfg.posesync_heads, cfg.posesync_points,
                                         cfg.posesync_layers, cfg.X, cfg.Y, cfg.posesync_ffn_ratio),
        'stpt': stpt_param_count(cfg.channels, cfg.stpt_depth, cfg.window, cfg.future_frames, cfg.X, cfg.Y,
                                 cfg.stpt_ffn_ratio, cfg.shift, cfg.separate_queries),
        'heads': heads_param_count(cfg.channels, cfg.classes),
    }
    parts['total'] = sum(parts.values())
    if breakdown:
        return parts
    return parts['total']


def enumerate_params(cfg):
    return count_specs(model_specs(cfg))
