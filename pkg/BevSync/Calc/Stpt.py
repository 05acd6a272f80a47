# -*- coding: utf-8 -*-
"""Spatial-temporal pyramid transformer.

The encoder runs windowed transformer blocks over the temporal BEV map
at S scales, halving the plane with a stride-2 convolution between
scales. Windows are space-time windows: all frames' tokens at one
spatial window attend to each other. The decoder starts from learnable
future queries at the coarsest scale, cross-attends to the encoder
features of the same scale, and is upsampled with a stride-2
deconvolution before each finer scale.

Weight names: ``stpt.enc<s>.block<j>``, ``stpt.enc<s>.down`` for
``s >= 1``, ``stpt.dec<s>.block<j>``, ``stpt.dec<s>.up`` for ``s < S-1``,
``stpt.future``.
"""
from __future__ import print_function, division

import logging
import warnings

import numpy as np
from einops import rearrange, reduce

from ..Util import ShapeError, _as_pair
from ..Util.Tensor import conv2d, deconv2d, layernorm, linear, softmax
from ..Util.Weights import WeightSpec
from .Heads import head_trunk
from .PoseSync import add_norm, ffn, ffn_specs

logger = logging.getLogger(__name__)


def _check_plane(h, w, window):
    wh, ww = window
    if h % wh != 0 or w % ww != 0:
        raise ShapeError("Plane {0:d}x{1:d} is not divisible by the window {2:d}x{3:d}.".format(h, w, wh, ww))


def window_shift(h, w, window, shift=True):
    """Half-window shift per axis, zero where the window spans the plane."""
    wh, ww = window
    if not shift:
        return (0, 0)
    return (wh // 2 if wh < h else 0, ww // 2 if ww < w else 0)


def shift_mask(h, w, window, shift, frames_q, frames_k):
    """Additive attention mask of shifted windows, (nW, Fq*wh*ww, Fk*wh*ww).

    Tokens that the cyclic shift brought together from different regions
    of the plane get -inf.
    """
    wh, ww = window
    sh, sw = shift
    labels = np.zeros((h, w), dtype=np.int64)
    row_slices = (slice(0, -wh), slice(-wh, -sh), slice(-sh, None)) if sh else (slice(None),)
    col_slices = (slice(0, -ww), slice(-ww, -sw), slice(-sw, None)) if sw else (slice(None),)
    count = 0
    for rs in row_slices:
        for cs in col_slices:
            labels[rs, cs] = count
            count += 1
    win = rearrange(labels, '(nh wh) (nw ww) -> (nh nw) (wh ww)', wh=wh, ww=ww)
    lq = np.tile(win, (1, frames_q))
    lk = np.tile(win, (1, frames_k))
    return np.where(lq[:, :, None] == lk[:, None, :], 0.0, -np.inf)


def to_windows(x, window):
    wh, ww = window
    return rearrange(x, 'f (nh wh) (nw ww) c -> (nh nw) (f wh ww) c', wh=wh, ww=ww)


def from_windows(tokens, frames, h, w, window):
    wh, ww = window
    return rearrange(tokens, '(nh nw) (f wh ww) c -> f (nh wh) (nw ww) c',
                     f=frames, nh=h // wh, nw=w // ww, wh=wh, ww=ww)


def window_attention(xq, xkv, scope, heads, window, shift=(0, 0), cache=None, key=None):
    """Multi-head attention inside space-time windows.

    Parameters
    ----------
    xq : (Fq, h, w, C) query states
    xkv : (Fk, h, w, C) key/value states (``xq`` itself for self-attention)
    scope : WeightScope with ``pos`` (wh*ww, C), ``Wq bq Wk bk Wv bv Wo bo``
    heads : int
    window : (wh, ww)
    shift : (sh, sw) cyclic shift of the plane before partitioning
    cache : dict, optional
        Receives the (nW, heads, Nq, Nk) attention weights under ``key``.

    Returns
    -------
    (Fq, h, w, C)
    """
    xq = np.asarray(xq)
    xkv = np.asarray(xkv)
    Fq, h, w, C = xq.shape
    Fk = xkv.shape[0]
    if xkv.shape[1:] != xq.shape[1:]:
        raise ShapeError("Key/value plane {0:s} differs from query plane {1:s}.".format(str(xkv.shape), str(xq.shape)))
    if C % heads != 0:
        raise ShapeError("Channels {0:d} are not divisible by {1:d} heads.".format(C, heads))
    _check_plane(h, w, window)
    sh, sw = shift
    if sh or sw:
        xq = np.roll(xq, (-sh, -sw), axis=(1, 2))
        xkv = np.roll(xkv, (-sh, -sw), axis=(1, 2))
    pos = scope['pos']
    tq = to_windows(xq, window)
    tk = to_windows(xkv, window)
    nW, Nq, _ = tq.shape
    Nk = tk.shape[1]
    d = C // heads
    Q = linear(tq + np.tile(pos, (Fq, 1)), scope['Wq'], scope['bq']).reshape(nW, Nq, heads, d)
    K = linear(tk + np.tile(pos, (Fk, 1)), scope['Wk'], scope['bk']).reshape(nW, Nk, heads, d)
    V = linear(tk, scope['Wv'], scope['bv']).reshape(nW, Nk, heads, d)
    scores = np.einsum('wqhd,wkhd->whqk', Q, K) / np.sqrt(d)
    if sh or sw:
        scores = scores + shift_mask(h, w, window, (sh, sw), Fq, Fk)[:, None]
    A = softmax(scores, axis=-1)
    out = np.einsum('whqk,wkhd->wqhd', A, V).reshape(nW, Nq, C)
    out = linear(out, scope['Wo'], scope['bo'])
    out = from_windows(out, Fq, h, w, window)
    if sh or sw:
        out = np.roll(out, (sh, sw), axis=(1, 2))
    if cache is not None:
        cache[key] = A
    return out.astype(np.result_type(xq, scope['Wq']), copy=False)


def swin_block(x, scope, heads, window, shift=(0, 0), kv=None, norm='layer', cache=None, key=None):
    """Window attention (self, or cross into ``kv``), add&norm, FFN, add&norm."""
    attn = window_attention(x, x if kv is None else kv, scope.scope('attn'), heads, window, shift, cache, key)
    x = add_norm(x, attn, scope.scope('norm1'), norm)
    return add_norm(x, ffn(x, scope.scope('ffn')), scope.scope('norm2'), norm)


def block_specs(prefix, C, window, ffn_ratio=2):
    wh, ww = window
    specs = {prefix + '.attn.pos': WeightSpec((wh * ww, C), 'uniform', C)}
    for p in ('q', 'k', 'v', 'o'):
        specs[prefix + '.attn.W' + p] = WeightSpec((C, C), 'uniform', C)
        specs[prefix + '.attn.b' + p] = WeightSpec((C,), 'zeros')
    for n in ('norm1', 'norm2'):
        specs[prefix + '.' + n + '.gamma'] = WeightSpec((C,), 'ones')
        specs[prefix + '.' + n + '.beta'] = WeightSpec((C,), 'zeros')
    specs.update(ffn_specs(prefix + '.ffn', C, ffn_ratio * C))
    return specs


def blocks_per_stage(shift):
    return 2 if shift else 1


def stage_shifts(h, w, window, shift):
    """Shift of each block of a stage: a plain block, then a shifted one."""
    return [(0, 0)] + ([window_shift(h, w, window, True)] if shift else [])


def run_stage(x, scope, heads, window, shift=True, kv=None, norm='layer', cache=None, prefix=''):
    _, h, w, _ = x.shape
    for j, sft in enumerate(stage_shifts(h, w, window, shift)):
        key = '{0:s}.block{1:d}'.format(prefix, j)
        x = swin_block(x, scope.scope('block{0:d}'.format(j)), heads, window, sft, kv, norm, cache, key)
    return x


def per_frame(func, x):
    """Apply a (C, h, w) map function to every frame of a (F, h, w, C) stack."""
    out = [func(rearrange(f, 'h w c -> c h w')) for f in x]
    return rearrange(np.stack(out, axis=0), 'f c h w -> f h w c')


def check_pyramid(X, Y, depth, window):
    if not 1 <= depth <= 4:
        raise ShapeError("Pyramid depth must lie in 1..4, got {0:d}.".format(depth))
    factor = 2 ** (depth - 1)
    if X % (factor * window[0]) != 0 or Y % (factor * window[1]) != 0:
        raise ShapeError("Grid {0:d}x{1:d} is not divisible by 2^(depth-1) x window = {2:d}x{3:d}.".format(
            X, Y, factor * window[0], factor * window[1]))


def encode_pyramid(B, weights, depth=4, heads=4, window=(4, 4), shift=True, norm='layer', cache=None,
                   prefix='stpt'):
    """Multi-scale encoder features ``[B_0, ..., B_{S-1}]``, B_s of shape (T+1, X/2^s, Y/2^s, C)."""
    B = np.asarray(B)
    window = _as_pair(window, "window")
    check_pyramid(B.shape[1], B.shape[2], depth, window)
    scope = weights.scope(prefix)
    out = []
    x = B
    for s in range(depth):
        stage = scope.scope('enc{0:d}'.format(s))
        if s > 0:
            down = stage.scope('down')
            x = per_frame(lambda f: conv2d(f, down['W'], down['b'], stride=2, pad=1), x)
        x = run_stage(x, stage, heads, window, shift, None, norm, cache, 'enc{0:d}'.format(s))
        out.append(x)
        logger.debug("Encoder scale %d: %s", s, str(x.shape))
    return out


def sinusoidal_encoding(index, C):
    """Fixed sin/cos encoding of a frame index, length C."""
    i = np.arange(C // 2 + C % 2)
    angle = index / np.power(10000.0, 2.0 * i / C)
    enc = np.zeros(C)
    enc[0::2] = np.sin(angle)[:len(enc[0::2])]
    enc[1::2] = np.cos(angle)[:len(enc[1::2])]
    return enc


def make_future_queries(weights, T_future, map_prior=None, separate=True, prefix='stpt'):
    """Queries ``Q^(t) = E_t + prior`` for t = 0..T', shape (T'+1, h, w, C).

    With ``separate`` every frame has its own embedding ``E_t``; otherwise a
    single shared embedding plus a sinusoidal encoding of ``t`` is used.
    """
    scope = weights.scope(prefix)
    if separate:
        E = np.asarray(scope['future.emb'])
        if E.shape[0] != T_future + 1:
            raise ShapeError("Have {0:d} future embeddings for {1:d} frames.".format(E.shape[0], T_future + 1))
    else:
        shared = np.asarray(scope['future.shared'])
        C = shared.shape[-1]
        E = np.stack([shared + sinusoidal_encoding(t, C) for t in range(T_future + 1)], axis=0)
    if map_prior is not None:
        map_prior = np.asarray(map_prior)
        if map_prior.shape != E.shape[1:]:
            raise ShapeError("Map prior {0:s} does not match the query plane {1:s}.".format(
                str(map_prior.shape), str(E.shape[1:])))
        E = E + map_prior[None]
    return E.astype(weights.dtype, copy=False)


def map_feature_prior(B_current, weights, depth=4, heads_prefix='heads.hdmap'):
    """HD-map head trunk on the current BEV map, average-pooled to the coarsest scale.

    Returns a (X/2^(S-1), Y/2^(S-1), C) map.
    """
    x = rearrange(np.asarray(B_current), 'x y c -> c x y')
    prior = head_trunk(x, weights.scope(heads_prefix))
    for _ in range(depth - 1):
        prior = reduce(prior, 'c (h h2) (w w2) -> c h w', 'mean', h2=2, w2=2)
    return rearrange(prior, 'c x y -> x y c')


def decode_pyramid(pyramid, queries, weights, heads=4, window=(4, 4), shift=True, norm='layer', cache=None,
                   prefix='stpt'):
    """Future BEV states D_0, (T'+1, X, Y, C).

    The coarsest decoder stage cross-attends from the future queries into
    the coarsest encoder features; each finer stage upsamples the previous
    output and cross-attends into the encoder features of its scale.
    """
    window = _as_pair(window, "window")
    depth = len(pyramid)
    scope = weights.scope(prefix)
    x = np.asarray(queries)
    if x.shape[1:3] != pyramid[-1].shape[1:3]:
        raise ShapeError("Queries {0:s} do not match the coarsest scale {1:s}.".format(
            str(x.shape), str(pyramid[-1].shape)))
    for s in range(depth - 1, -1, -1):
        stage = scope.scope('dec{0:d}'.format(s))
        if s < depth - 1:
            up = stage.scope('up')
            x = per_frame(lambda f: deconv2d(f, up['W'], up['b'], stride=2), x)
        x = run_stage(x, stage, heads, window, shift, pyramid[s], norm, cache, 'dec{0:d}'.format(s))
    return x


def stpt_forward(B, weights, T_future, depth=4, heads=4, window=(4, 4), shift=True, separate_queries=True,
                 spatial_prior=True, cache_attention=False, prefix='stpt'):
    """Encoder, future queries and decoder in one pass.

    Returns
    -------
    D0 : (T'+1, X, Y, C)
    pyramid : list of encoder features
    cache : dict of attention weights, or None
    """
    cache = {} if cache_attention else None
    pyramid = encode_pyramid(B, weights, depth, heads, window, shift, cache=cache, prefix=prefix)
    prior = map_feature_prior(B[0], weights, depth) if spatial_prior else None
    queries = make_future_queries(weights, T_future, prior, separate_queries, prefix)
    D0 = decode_pyramid(pyramid, queries, weights, heads, window, shift, cache=cache, prefix=prefix)
    if cache_attention and not cache:
        warnings.warn("Attention caching was requested but no attention was computed.", UserWarning)
    return D0, pyramid, cache


def attention_matrix(cache, window_id=0, layer='enc0.block0'):
    """Head-averaged post-softmax attention of one window, (tokens, tokens)."""
    if cache is None:
        raise ValueError("Attention caching was disabled for this pass.")
    try:
        A = cache[layer]
    except KeyError:
        raise ValueError("No cached attention for layer \"{0:s}\".".format(layer))
    if not 0 <= window_id < A.shape[0]:
        raise IndexError("Window {0:d} out of range, the layer has {1:d} windows.".format(window_id, A.shape[0]))
    return np.mean(A[window_id], axis=0)


def stpt_specs(C, depth, window, T_future, X, Y, ffn_ratio=2, shift=True, separate_queries=True, prefix='stpt'):
    window = _as_pair(window, "window")
    specs = {}
    nb = blocks_per_stage(shift)
    for s in range(depth):
        for kind in ('enc', 'dec'):
            for j in range(nb):
                specs.update(block_specs('{0:s}.{1:s}{2:d}.block{3:d}'.format(prefix, kind, s, j), C, window, ffn_ratio))
        if s > 0:
            specs['{0:s}.enc{1:d}.down.W'.format(prefix, s)] = WeightSpec((C, C, 3, 3), 'uniform', 9 * C)
            specs['{0:s}.enc{1:d}.down.b'.format(prefix, s)] = WeightSpec((C,), 'zeros')
        if s < depth - 1:
            specs['{0:s}.dec{1:d}.up.W'.format(prefix, s)] = WeightSpec((C, C, 2, 2), 'uniform', 4 * C)
            specs['{0:s}.dec{1:d}.up.b'.format(prefix, s)] = WeightSpec((C,), 'zeros')
    h, w = X // 2 ** (depth - 1), Y // 2 ** (depth - 1)
    if separate_queries:
        specs[prefix + '.future.emb'] = WeightSpec((T_future + 1, h, w, C), 'uniform', C)
    else:
        specs[prefix + '.future.shared'] = WeightSpec((h, w, C), 'uniform', C)
    return specs


def stpt_param_count(C, depth, window, T_future, X, Y, ffn_ratio=2, shift=True, separate_queries=True):
    """Closed form.

    A block holds ``wC + 4(C^2 + C) + 4C + 2hC + h + C`` scalars (w window
    tokens, h = ffn_ratio C); every stage pair (encoder and decoder) has
    ``blocks_per_stage`` blocks; ``S - 1`` downsampling convolutions hold
    ``9C^2 + C`` each and ``S - 1`` deconvolutions ``4C^2 + C`` each. The
    future embeddings add ``(T'+1 or 1) * X Y C / 4^(S-1)``.
    """
    wh, ww = _as_pair(window, "window")
    hidden = ffn_ratio * C
    block = wh * ww * C + 4 * (C * C + C) + 4 * C + 2 * hidden * C + hidden + C
    total = 2 * depth * blocks_per_stage(shift) * block
    total += (depth - 1) * (9 * C * C + C) + (depth - 1) * (4 * C * C + C)
    plane = (X // 2 ** (depth - 1)) * (Y // 2 ** (depth - 1)) * C
    total += plane * ((T_future + 1) if separate_queries else 1)
    return total
