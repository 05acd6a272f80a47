# -*- coding: utf-8 -*-
"""Plain-text and image artifact codecs (JSON, JSON lines, PGM, PPM)."""
from __future__ import print_function, division

import json

import numpy as np

from . import FormatError


def to_gray(matrix):
    """Min-max normalise a real matrix into 0..255; a constant matrix maps to 128."""
    m = np.asarray(matrix, dtype=np.float64)
    lo = np.min(m)
    hi = np.max(m)
    if not hi > lo:
        return np.full(m.shape, 128, dtype=np.uint8)
    return np.rint((m - lo) / (hi - lo) * 255.0).astype(np.uint8)


def dumps_pnm(image):
    """Encode a (H, W) uint8 array as P5 or a (H, W, 3) uint8 array as P6."""
    img = np.asarray(image)
    if img.dtype != np.uint8:
        raise TypeError("PNM images must be uint8, not {0:s}.".format(str(img.dtype)))
    if img.ndim == 2:
        magic = b'P5'
    elif img.ndim == 3 and img.shape[2] == 3:
        magic = b'P6'
    else:
        raise ValueError("Invalid image shape {0:s}, expected (H, W) or (H, W, 3).".format(str(img.shape)))
    header = magic + b'\n' + '{0:d} {1:d}\n255\n'.format(img.shape[1], img.shape[0]).encode('ascii')
    return header + np.ascontiguousarray(img).tobytes()


def loads_pnm(blob):
    blob = bytes(blob)
    tokens = []
    pos = 0
    while len(tokens) < 4:
        while pos < len(blob) and blob[pos:pos + 1].isspace():
            pos += 1
        if blob[pos:pos + 1] == b'#':
            while pos < len(blob) and blob[pos:pos + 1] != b'\n':
                pos += 1
            continue
        start = pos
        while pos < len(blob) and not blob[pos:pos + 1].isspace():
            pos += 1
        if start == pos:
            raise FormatError("Truncated PNM header.")
        tokens.append(blob[start:pos])
    pos += 1
    magic, width, height, maxval = tokens[0], int(tokens[1]), int(tokens[2]), int(tokens[3])
    if maxval != 255:
        raise FormatError("Only maxval 255 is supported, got {0:d}.".format(maxval))
    if magic == b'P5':
        shape = (height, width)
    elif magic == b'P6':
        shape = (height, width, 3)
    else:
        raise FormatError("Unknown PNM magic {0:s}.".format(repr(magic)))
    data = np.frombuffer(blob, dtype=np.uint8, offset=pos)
    if data.size != int(np.prod(shape)):
        raise FormatError("PNM payload has {0:d} bytes, expected {1:d}.".format(data.size, int(np.prod(shape))))
    return data.reshape(shape).copy()


def write_pnm(path, image):
    with open(path, 'wb') as f:
        f.write(dumps_pnm(image))


def read_pnm(path):
    with open(path, 'rb') as f:
        return loads_pnm(f.read())


def dumps_json(obj):
    return json.dumps(obj, indent=2, sort_keys=True) + '\n'


def write_json(path, obj):
    with open(path, 'w') as f:
        f.write(dumps_json(obj))


def read_json(path):
    with open(path) as f:
        return json.load(f)


def write_jsonl(path, records):
    with open(path, 'w') as f:
        for rec in records:
            f.write(json.dumps(rec, sort_keys=True) + '\n')


def read_jsonl(path):
    with open(path) as f:
        return [json.loads(line) for line in f if line.strip()]
