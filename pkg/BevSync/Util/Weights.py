# -*- coding: utf-8 -*-
from __future__ import print_function, division

import json
import os
import zlib
from collections import OrderedDict

import numpy as np

from . import FormatError, is_string
from .Tensor import F64, read_btf, write_btf

MANIFEST = 'manifest.json'


class WeightSpec(object):
    """Shape and initialisation rule of one learnable tensor."""

    KINDS = ('uniform', 'zeros', 'ones', 'identity')

    def __init__(self, shape, kind='uniform', fan_in=None):
        if kind not in self.KINDS:
            raise ValueError("Invalid init kind \"{0:s}\", expected one of {1:s}.".format(kind, str(self.KINDS)))
        self._shape = tuple(int(s) for s in shape)
        self._kind = kind
        self._fan_in = fan_in

    @property
    def shape(self): return self._shape

    @property
    def kind(self): return self._kind

    @property
    def fan_in(self): return self._fan_in

    @property
    def size(self): return int(np.prod(self._shape))


class WeightContainer(object):
    """A named collection of weight tensors.

    Names are dotted paths such as ``posesync.layer0.attn.W_offset``.
    Like the state containers this design comes from, items can be
    reached with a plain key or with a (prefix, name) tuple:

    >>> w = WeightContainer()
    >>> w['heads.seg', 'b2'] = np.zeros(3)
    >>> w['heads.seg.b2'].shape
    (3,)
    """

    def __init__(self, dtype=F64):
        self._weights = {}
        self._dtype = np.dtype(dtype)

    @property
    def dtype(self): return self._dtype

    def _key(self, index):
        if is_string(index):
            return index
        if len(index) == 0:
            raise IndexError("Received empty index.")
        return '.'.join(str(i) for i in index if i != '')

    def __len__(self):
        return len(self._weights)

    def __iter__(self):
        for key in sorted(self._weights):
            yield key

    def __contains__(self, index):
        return self._key(index) in self._weights

    def __getitem__(self, index):
        key = self._key(index)
        try:
            return self._weights[key]
        except KeyError:
            raise KeyError("Missing weight \"{0:s}\".".format(key))

    def __setitem__(self, index, value):
        arr = np.ascontiguousarray(value, dtype=self._dtype)
        self._weights[self._key(index)] = arr

    def scope(self, prefix):
        return WeightScope(self, prefix)

    def items(self):
        for key in self:
            yield key, self._weights[key]

    def count(self):
        """Number of learnable scalars held by the container."""
        return int(sum(w.size for w in self._weights.values()))

    def astype(self, dtype):
        out = WeightContainer(dtype)
        for key, value in self.items():
            out[key] = value
        return out

    def copy(self):
        return self.astype(self._dtype)

    def __str__(self):
        out = "Stored Weights:\n"
        for key, value in self.items():
            out += u"{0:<48s} {1:>20s}\n".format(key, str(value.shape))
        out += u"{0:<48s} {1:>20d}\n".format("total", self.count())
        return out

    def save(self, directory):
        """Write one BTF file per tensor plus a manifest mapping names to files."""
        if not os.path.isdir(directory):
            os.makedirs(directory)
        manifest = OrderedDict()
        for key, value in self.items():
            fname = key + '.btf'
            write_btf(os.path.join(directory, fname), value)
            manifest[key] = fname
        with open(os.path.join(directory, MANIFEST), 'w') as f:
            json.dump(manifest, f, indent=2, sort_keys=True)
            f.write('\n')

    @classmethod
    def load(cls, directory, dtype=None):
        path = os.path.join(directory, MANIFEST)
        if not os.path.isfile(path):
            raise FormatError("No weights manifest at {0:s}.".format(path))
        with open(path) as f:
            manifest = json.load(f)
        out = None
        for key in sorted(manifest):
            value = read_btf(os.path.join(directory, manifest[key]))
            if out is None:
                out = cls(dtype if dtype is not None else value.dtype)
            out[key] = value
        return out if out is not None else cls(dtype if dtype is not None else F64)

    @staticmethod
    def manifest_count(directory):
        """Count scalars from the payload sizes of the files listed in a manifest."""
        with open(os.path.join(directory, MANIFEST)) as f:
            manifest = json.load(f)
        total = 0
        for key in manifest:
            total += read_btf(os.path.join(directory, manifest[key])).size
        return int(total)


class WeightScope(object):
    """Prefix view into a :class:`WeightContainer`."""

    def __init__(self, container, prefix):
        self._container = container
        self._prefix = prefix

    @property
    def prefix(self): return self._prefix

    def __getitem__(self, name):
        return self._container[self._prefix, name]

    def __setitem__(self, name, value):
        self._container[self._prefix, name] = value

    def __contains__(self, name):
        return (self._prefix, name) in self._container

    def scope(self, prefix):
        return WeightScope(self._container, self._prefix + '.' + prefix)


def _sub_rng(seed, name):
    return np.random.default_rng([int(seed) & 0xFFFFFFFF, (int(seed) >> 32) & 0xFFFFFFFF, zlib.crc32(name.encode('utf-8'))])


def init_weights(specs, seed, dtype=F64, container=None):
    """Draw every tensor described by ``specs`` (name -> WeightSpec).

    Uniform tensors come from ``U(-1/sqrt(fan_in), 1/sqrt(fan_in))`` with a
    generator derived from the run seed and the tensor name, so the result
    does not depend on the order in which specs are listed.
    """
    if container is None:
        container = WeightContainer(dtype)
    for name in sorted(specs):
        spec = specs[name]
        if spec.kind == 'zeros':
            value = np.zeros(spec.shape)
        elif spec.kind == 'ones':
            value = np.ones(spec.shape)
        elif spec.kind == 'identity':
            value = np.eye(spec.shape[0], spec.shape[1])
        else:
            fan_in = spec.fan_in if spec.fan_in else spec.shape[-1]
            bound = 1.0 / np.sqrt(fan_in)
            value = _sub_rng(seed, name).uniform(-bound, bound, size=spec.shape)
        container[name] = value
    return container


def count_specs(specs):
    return int(sum(spec.size for spec in specs.values()))
