# -*- coding: utf-8 -*-
"""Dense numeric primitives shared by every stage of the pipeline.

Tensors are plain C-ordered :class:`numpy.ndarray` objects of dtype
``float32`` or ``float64``. The functions in here never modify their
inputs, so arrays can be shared read-only between workers.
"""
from __future__ import print_function, division

import io
import struct
from concurrent.futures import ThreadPoolExecutor

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view
from scipy.special import erf

from . import ShapeError, FormatError, _as_pair

F32 = np.dtype('float32')
F64 = np.dtype('float64')

BTF_MAGIC = b'BTF1'
BTF_TAGS = {0: np.dtype('<f4'), 1: np.dtype('<f8')}
BTF_TAGS_INV = {F32: 0, F64: 1}


def as_tensor(data, dtype=None, readonly=False):
    """Validate and convert array-like input into a C-ordered real tensor.

    Parameters
    ----------
    data : array_like
    dtype : numpy dtype, optional
        float32 or float64; defaults to float64 unless ``data`` is float32.
    readonly : bool
        Clear the writeable flag of the returned array.

    Returns
    -------
    numpy.ndarray
    """
    arr = np.asarray(data)
    if dtype is None:
        dtype = F32 if arr.dtype == F32 else F64
    dtype = np.dtype(dtype)
    if dtype not in BTF_TAGS_INV:
        raise TypeError("Invalid dtype, expected float32 or float64, not {0:s}.".format(str(dtype)))
    arr = np.ascontiguousarray(arr, dtype=dtype)
    if arr.ndim == 0 or arr.size == 0:
        raise ShapeError("A tensor needs at least one axis and no zero extents, got shape {0:s}.".format(str(arr.shape)))
    if readonly:
        arr = arr.copy()
        arr.flags.writeable = False
    return arr


def matmul(a, b):
    """Standard matrix product of a (m, k) and a (k, n) tensor."""
    a = np.asarray(a)
    b = np.asarray(b)
    if a.ndim != 2 or b.ndim != 2 or a.shape[1] != b.shape[0]:
        raise ShapeError("Cannot multiply shapes {0:s} and {1:s}.".format(str(a.shape), str(b.shape)))
    return np.matmul(a, b)


def conv_output_size(size, kernel, stride=1, pad=0):
    return (size + 2 * pad - kernel) // stride + 1


def deconv_output_size(size, kernel, stride=2, pad=0, output_padding=0):
    return (size - 1) * stride - 2 * pad + kernel + output_padding


def conv2d(x, w, b=None, stride=1, pad=0):
    """Cross-correlation of a (C_in, H, W) map with (C_out, C_in, kh, kw) kernels.

    The output extent is ``floor((H + 2 pad - k) / stride) + 1`` per axis.
    """
    x = np.asarray(x)
    w = np.asarray(w)
    if x.ndim != 3 or w.ndim != 4:
        raise ShapeError("conv2d expects x as (C, H, W) and w as (O, C, kh, kw), got {0:s} and {1:s}.".format(str(x.shape), str(w.shape)))
    if w.shape[1] != x.shape[0]:
        raise ShapeError("conv2d channel mismatch: input has {0:d}, kernel expects {1:d}.".format(x.shape[0], w.shape[1]))
    sh, sw = _as_pair(stride, "stride")
    ph, pw = _as_pair(pad, "pad")
    kh, kw = w.shape[2:]
    if kh > x.shape[1] + 2 * ph or kw > x.shape[2] + 2 * pw:
        raise ShapeError("Kernel {0:s} is larger than the padded input {1:s}.".format(
            str((kh, kw)), str((x.shape[1] + 2 * ph, x.shape[2] + 2 * pw))))
    xp = np.pad(x, ((0, 0), (ph, ph), (pw, pw)))
    windows = sliding_window_view(xp, (kh, kw), axis=(1, 2))[:, ::sh, ::sw]
    out = np.tensordot(w, windows, axes=([1, 2, 3], [0, 3, 4]))
    if b is not None:
        out = out + np.asarray(b)[:, None, None]
    return np.ascontiguousarray(out, dtype=np.result_type(x, w))


def deconv2d(x, w, b=None, stride=2, pad=0, output_padding=0):
    """Transposed convolution of a (C_in, H, W) map with (C_in, C_out, kh, kw) kernels.

    The output extent is ``(H - 1) stride - 2 pad + k + output_padding``.
    """
    x = np.asarray(x)
    w = np.asarray(w)
    if x.ndim != 3 or w.ndim != 4:
        raise ShapeError("deconv2d expects x as (C, H, W) and w as (C, O, kh, kw), got {0:s} and {1:s}.".format(str(x.shape), str(w.shape)))
    if w.shape[0] != x.shape[0]:
        raise ShapeError("deconv2d channel mismatch: input has {0:d}, kernel expects {1:d}.".format(x.shape[0], w.shape[0]))
    sh, sw = _as_pair(stride, "stride")
    ph, pw = _as_pair(pad, "pad")
    oph, opw = _as_pair(output_padding, "output_padding")
    if oph > ph or opw > pw:
        raise ShapeError("output_padding {0:s} cannot exceed pad {1:s}.".format(str((oph, opw)), str((ph, pw))))
    _, H, W = x.shape
    kh, kw = w.shape[2:]
    out_h = deconv_output_size(H, kh, sh, ph, oph)
    out_w = deconv_output_size(W, kw, sw, pw, opw)
    if out_h < 1 or out_w < 1:
        raise ShapeError("deconv2d produces an empty output for input {0:s}.".format(str(x.shape)))
    dtype = np.result_type(x, w)
    full = np.zeros((w.shape[1], (H - 1) * sh + kh, (W - 1) * sw + kw), dtype=dtype)
    for ki in range(kh):
        for kj in range(kw):
            contrib = np.tensordot(w[:, :, ki, kj], x, axes=([0], [0]))
            full[:, ki:ki + (H - 1) * sh + 1:sh, kj:kj + (W - 1) * sw + 1:sw] += contrib
    out = full[:, ph:ph + out_h, pw:pw + out_w]
    if b is not None:
        out = out + np.asarray(b)[:, None, None]
    return np.ascontiguousarray(out, dtype=dtype)


def softmax(x, axis=-1):
    x = np.asarray(x)
    if x.shape[axis] == 0:
        raise ShapeError("softmax over a zero-length axis.")
    shifted = x - np.max(x, axis=axis, keepdims=True)
    e = np.exp(shifted)
    return e / np.sum(e, axis=axis, keepdims=True)


def layernorm(x, gamma=None, beta=None, eps=1e-5, axis=-1):
    """Normalise to zero mean and unit variance along ``axis``, then apply
    the optional affine ``gamma * x + beta``."""
    x = np.asarray(x)
    if x.shape[axis] == 0:
        raise ShapeError("layernorm over a zero-length axis.")
    mean = np.mean(x, axis=axis, keepdims=True)
    var = np.var(x, axis=axis, keepdims=True)
    out = (x - mean) / np.sqrt(var + eps)
    if gamma is not None:
        out = out * gamma
    if beta is not None:
        out = out + beta
    return out


def linear(x, W, b=None):
    """``x @ W.T + b`` with W stored as (out_features, in_features)."""
    x = np.asarray(x)
    W = np.asarray(W)
    if x.shape[-1] != W.shape[1]:
        raise ShapeError("linear: input has {0:d} features, weight expects {1:d}.".format(x.shape[-1], W.shape[1]))
    out = np.matmul(x, W.T)
    if b is not None:
        out = out + b
    return out


def gelu(x):
    x = np.asarray(x)
    return 0.5 * x * (1.0 + erf(x / np.sqrt(2.0)))


def sigmoid(x):
    x = np.asarray(x)
    return 0.5 * (1.0 + np.tanh(0.5 * x))


def bilinear_corners(rows, cols, height, width):
    """Neighbour indices and fractional parts for bilinear sampling.

    Returns ``(r0, r1, c0, c1, fr, fc, valid)``; entries of invalid points
    are clamped to the grid and must be masked by the caller.
    """
    rows = np.asarray(rows, dtype=F64)
    cols = np.asarray(cols, dtype=F64)
    valid = np.isfinite(rows) & np.isfinite(cols)
    valid &= (rows >= 0.0) & (rows <= height - 1) & (cols >= 0.0) & (cols <= width - 1)
    safe_r = np.where(valid, rows, 0.0)
    safe_c = np.where(valid, cols, 0.0)
    r0 = np.floor(safe_r).astype(np.intp)
    c0 = np.floor(safe_c).astype(np.intp)
    fr = safe_r - r0
    fc = safe_c - c0
    r1 = np.minimum(r0 + 1, height - 1)
    c1 = np.minimum(c0 + 1, width - 1)
    return r0, r1, c0, c1, fr, fc, valid


def bilinear_sample(F, p):
    """Sample a (H, W, C) or (H, W) map at continuous (row, col) positions.

    Parameters
    ----------
    F : numpy.ndarray
        The feature map.
    p : array_like
        Positions with a trailing axis of length 2 holding (row, col).

    Returns
    -------
    values : numpy.ndarray
        Shape ``p.shape[:-1] + F.shape[2:]``; zero where out of range.
    valid : numpy.ndarray of bool
        False where the position lies outside ``[0, H-1] x [0, W-1]``.
    """
    F = np.asarray(F)
    p = np.asarray(p, dtype=F64)
    if p.shape[-1] != 2:
        raise ShapeError("Sample positions need a trailing axis of 2, got {0:s}.".format(str(p.shape)))
    H, W = F.shape[:2]
    r0, r1, c0, c1, fr, fc, valid = bilinear_corners(p[..., 0], p[..., 1], H, W)
    extra = (Ellipsis,) + (None,) * (F.ndim - 2)
    w00 = ((1.0 - fr) * (1.0 - fc))[extra]
    w01 = ((1.0 - fr) * fc)[extra]
    w10 = (fr * (1.0 - fc))[extra]
    w11 = (fr * fc)[extra]
    out = w00 * F[r0, c0] + w01 * F[r0, c1] + w10 * F[r1, c0] + w11 * F[r1, c1]
    out = np.where(valid[extra], out, 0.0).astype(np.result_type(F, F32), copy=False)
    return out, valid


def parallel_rows(func, n_rows, workers=None):
    """Map ``func`` over row indices, optionally on a thread pool.

    Results come back in row order, so the outcome does not depend on the
    number of workers.
    """
    if workers is None or workers <= 1:
        return [func(i) for i in range(n_rows)]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(func, range(n_rows)))


def dumps_btf(array):
    """Serialise a float32/float64 tensor into BTF v1 bytes."""
    arr = np.asarray(array)
    if arr.dtype not in BTF_TAGS_INV:
        raise TypeError("BTF stores float32 or float64 only, not {0:s}.".format(str(arr.dtype)))
    if arr.ndim == 0:
        raise ShapeError("BTF needs a tensor of rank >= 1.")
    tag = BTF_TAGS_INV[arr.dtype]
    buf = io.BytesIO()
    buf.write(BTF_MAGIC)
    buf.write(struct.pack('<I', arr.ndim))
    buf.write(struct.pack('<{0:d}I'.format(arr.ndim), *arr.shape))
    buf.write(struct.pack('<B', tag))
    buf.write(np.ascontiguousarray(arr, dtype=BTF_TAGS[tag]).tobytes(order='C'))
    return buf.getvalue()


def loads_btf(blob):
    """Parse BTF v1 bytes into a new numpy array."""
    blob = bytes(blob)
    if blob[:4] != BTF_MAGIC:
        raise FormatError("Not a BTF v1 blob, magic is {0:s}.".format(repr(blob[:4])))
    offset = 4
    (rank,) = struct.unpack_from('<I', blob, offset)
    offset += 4
    dims = struct.unpack_from('<{0:d}I'.format(rank), blob, offset)
    offset += 4 * rank
    (tag,) = struct.unpack_from('<B', blob, offset)
    offset += 1
    if tag not in BTF_TAGS:
        raise FormatError("Unknown BTF dtype tag {0:d}.".format(tag))
    dtype = BTF_TAGS[tag]
    count = int(np.prod(dims))
    if rank == 0 or any(d < 1 for d in dims):
        raise FormatError("Invalid BTF extents {0:s}.".format(str(dims)))
    if len(blob) - offset != count * dtype.itemsize:
        raise FormatError("BTF payload has {0:d} bytes, expected {1:d}.".format(len(blob) - offset, count * dtype.itemsize))
    data = np.frombuffer(blob, dtype=dtype, count=count, offset=offset)
    return data.astype(dtype.newbyteorder('='), copy=True).reshape(dims)


def write_btf(path, array, dtype=None):
    if dtype is not None:
        array = np.asarray(array).astype(dtype)
    with open(path, 'wb') as f:
        f.write(dumps_btf(array))


def read_btf(path):
    with open(path, 'rb') as f:
        return loads_btf(f.read())
