# -*- coding: utf-8 -*-
"""Run configuration: an INI file with ``[sections]`` of ``key = value`` pairs.

>>> cfg = RunConfig()
>>> cfg.stpt_depth = 3
>>> cfg = cfg.validate()
>>> cfg.X
32
"""
from __future__ import print_function, division

import configparser
import io
import logging
from collections import OrderedDict

from . import ConfigError, is_string
from ..Calc.SynthScene import FEATURE_WIDTH

logger = logging.getLogger(__name__)


def _to_bool(value):
    if isinstance(value, bool):
        return value
    text = str(value).strip().lower()
    if text in ('1', 'yes', 'true', 'on'):
        return True
    if text in ('0', 'no', 'false', 'off'):
        return False
    raise ValueError("Invalid boolean \"{0:s}\".".format(str(value)))


def _to_floats(value):
    if is_string(value):
        value = [v for v in value.replace(',', ' ').split() if v]
    return tuple(float(v) for v in value)


def _to_pair(value):
    if isinstance(value, int):
        return (value, value)
    if is_string(value):
        value = [v for v in value.replace(',', ' ').split() if v]
    out = tuple(int(v) for v in value)
    if len(out) == 1:
        out = (out[0], out[0])
    if len(out) != 2:
        raise ValueError("Invalid pair \"{0:s}\".".format(str(value)))
    return out


def _to_str(value):
    return str(value).strip()


def _format(value):
    if isinstance(value, bool):
        return 'true' if value else 'false'
    if isinstance(value, tuple):
        return ', '.join(repr(v) if isinstance(v, float) else str(v) for v in value)
    if isinstance(value, float):
        return repr(value)
    return str(value)


# (section, key, attribute, converter, default)
DEFAULTS = (
    ('grid', 'X', 'X', int, 32),
    ('grid', 'Y', 'Y', int, 32),
    ('grid', 'resolution', 'resolution', float, 0.5),
    ('grid', 'z_anchors', 'z_anchors', _to_floats, (-1.0, 0.0, 1.0, 2.0)),
    ('scene', 'rig', 'rig', _to_str, ''),
    ('scene', 'scenario', 'scenario', _to_str, ''),
    ('scene', 'cameras', 'cameras', int, 2),
    ('scene', 'image_size', 'image_size', int, 64),
    ('scene', 'fov', 'fov', float, 90.0),
    ('scene', 'camera_height', 'camera_height', float, 1.5),
    ('scene', 'camera_pitch', 'camera_pitch', float, 0.35),
    ('scene', 'frame_period', 'frame_period', float, 0.5),
    ('scene', 'vehicles', 'vehicles', int, 3),
    ('scene', 'pedestrians', 'pedestrians', int, 1),
    ('scene', 'ego_speed', 'ego_speed', float, 2.0),
    ('scene', 'ego_yaw_rate', 'ego_yaw_rate', float, 0.1),
    ('scene', 'center_sigma', 'center_sigma', float, 3.0),
    ('run', 'channels', 'channels', int, 16),
    ('run', 'past_frames', 'past_frames', int, 2),
    ('run', 'future_frames', 'future_frames', int, 4),
    ('run', 'seed', 'seed', int, 0),
    ('run', 'temporal_alignment', 'temporal_alignment', _to_str, 'sync'),
    ('run', 'dtype', 'dtype', _to_str, 'float32'),
    ('run', 'workers', 'workers', int, 1),
    ('run', 'out', 'out', _to_str, 'run'),
    ('posesync', 'heads', 'posesync_heads', int, 4),
    ('posesync', 'points', 'posesync_points', int, 4),
    ('posesync', 'layers', 'posesync_layers', int, 3),
    ('posesync', 'aggregation', 'aggregation', _to_str, 'mean'),
    ('posesync', 'ffn_ratio', 'posesync_ffn_ratio', int, 2),
    ('stpt', 'depth', 'stpt_depth', int, 4),
    ('stpt', 'window', 'window', _to_pair, (4, 4)),
    ('stpt', 'heads', 'stpt_heads', int, 4),
    ('stpt', 'shift', 'shift', _to_bool, True),
    ('stpt', 'separate_queries', 'separate_queries', _to_bool, True),
    ('stpt', 'spatial_prior', 'spatial_prior', _to_bool, True),
    ('stpt', 'ffn_ratio', 'stpt_ffn_ratio', int, 2),
    ('stpt', 'cache_attention', 'cache_attention', _to_bool, True),
    ('heads', 'classes', 'classes', int, 3),
    ('instances', 'threshold', 'center_threshold', float, 0.1),
    ('instances', 'max_k', 'max_k', int, 100),
    ('instances', 'radius', 'match_radius', float, 3.0),
    ('aug', 'mode', 'aug', _to_str, 'none'),
    ('aug', 'image_scale', 'image_scale', _to_floats, (0.9, 1.1)),
    ('aug', 'image_rotation', 'image_rotation', float, 0.1),
    ('aug', 'image_flip', 'image_flip', _to_bool, True),
    ('aug', 'bev_flip', 'bev_flip', _to_bool, True),
    ('aug', 'bev_yaw', 'bev_yaw', float, 0.0),
    ('aug', 'bev_scale', 'bev_scale', _to_floats, (1.0, 1.0)),
)

SECTIONS = ('grid', 'scene', 'run', 'posesync', 'stpt', 'heads', 'instances', 'aug')

AUG_MODES = ('none', 'img', 'bev', 'both')
ALIGNMENTS = ('sync', 'warp')
AGGREGATIONS = ('mean', 'valid-mean')
DTYPES = ('float32', 'float64')


def _option(attr):
    def fget(self):
        return self._values[attr]

    def fset(self, value):
        self._set(attr, value)
    return property(fget, fset)


class RunConfig(object):
    """All settings of one pipeline run.

    Values are converted on assignment; cross-module constraints are
    checked by :meth:`validate`, which the pipeline calls before any
    compute stage.
    """

    _META = OrderedDict((attr, (section, key, conv, default)) for section, key, attr, conv, default in DEFAULTS)
    _BY_KEY = dict(((section, key), attr) for section, key, attr, conv, default in DEFAULTS)

    def __init__(self, **kwargs):
        self._values = OrderedDict()
        for attr, (_, _, _, default) in self._META.items():
            self._values[attr] = default
        for attr, value in kwargs.items():
            if attr not in self._META:
                raise ConfigError("Unknown configuration option \"{0:s}\".".format(attr))
            self._set(attr, value)

    def _set(self, attr, value):
        section, key, conv, _ = self._META[attr]
        try:
            self._values[attr] = conv(value)
        except (TypeError, ValueError):
            raise ConfigError("Invalid value \"{0:s}\" for [{1:s}] {2:s}.".format(str(value), section, key))

    @property
    def T(self): return self.past_frames

    @property
    def T_future(self): return self.future_frames

    @property
    def C(self): return self.channels

    def copy(self):
        return RunConfig(**self._values)

    def update(self, **kwargs):
        """Apply overrides, skipping ``None`` values (unset CLI flags)."""
        for attr, value in kwargs.items():
            if value is None:
                continue
            if attr not in self._META:
                raise ConfigError("Unknown configuration option \"{0:s}\".".format(attr))
            self._set(attr, value)
        return self

    def validate(self):
        """Raise :class:`ConfigError` naming the first violated constraint."""
        def require(cond, text):
            if not cond:
                logger.error("Configuration rejected: %s", text)
                raise ConfigError("Constraint violated: {0:s}".format(text))

        require(self.X >= 2 and self.Y >= 2, "grid X >= 2 and Y >= 2")
        require(self.resolution > 0, "grid resolution > 0")
        z = self.z_anchors
        require(len(z) >= 1 and all(b > a for a, b in zip(z, z[1:])), "z_anchors non-empty and strictly increasing")
        require(self.cameras >= 1, "scene cameras >= 1")
        require(self.image_size >= 8, "scene image_size >= 8")
        require(0.0 < self.fov < 180.0, "0 < scene fov < 180")
        require(self.frame_period > 0, "scene frame_period > 0")
        require(self.vehicles >= 0 and self.pedestrians >= 0, "scene box counts >= 0")
        require(self.center_sigma > 0, "scene center_sigma > 0")
        require(self.channels >= FEATURE_WIDTH, "run channels >= {0:d} (feature encoding width)".format(FEATURE_WIDTH))
        require(self.past_frames >= 0, "run past_frames >= 0")
        require(self.future_frames >= 0, "run future_frames >= 0")
        require(0 <= self.seed < 2 ** 64, "run seed is an unsigned 64-bit integer")
        require(self.temporal_alignment in ALIGNMENTS, "run temporal_alignment in {0:s}".format(str(ALIGNMENTS)))
        require(self.dtype in DTYPES, "run dtype in {0:s}".format(str(DTYPES)))
        require(self.workers >= 1, "run workers >= 1")
        require(self.posesync_heads >= 1 and self.channels % self.posesync_heads == 0,
                "channels divisible by posesync heads")
        require(self.posesync_points >= 1, "posesync points >= 1")
        require(self.posesync_layers >= 1, "posesync layers >= 1")
        require(self.aggregation in AGGREGATIONS, "posesync aggregation in {0:s}".format(str(AGGREGATIONS)))
        require(self.posesync_ffn_ratio >= 1, "posesync ffn_ratio >= 1")
        require(1 <= self.stpt_depth <= 4, "stpt depth in 1..4")
        wh, ww = self.window
        require(wh >= 1 and ww >= 1, "stpt window extents >= 1")
        factor = 2 ** (self.stpt_depth - 1)
        require(self.X % (factor * wh) == 0, "X divisible by 2^(depth-1) * window height")
        require(self.Y % (factor * ww) == 0, "Y divisible by 2^(depth-1) * window width")
        require(self.stpt_heads >= 1 and self.channels % self.stpt_heads == 0, "channels divisible by stpt heads")
        require(self.stpt_ffn_ratio >= 1, "stpt ffn_ratio >= 1")
        require(self.classes in (2, 3), "heads classes in (2, 3)")
        require(0.0 <= self.center_threshold < 1.0, "0 <= instances threshold < 1")
        require(self.max_k >= 1, "instances max_k >= 1")
        require(self.match_radius > 0, "instances radius > 0")
        require(self.aug in AUG_MODES, "aug mode in {0:s}".format(str(AUG_MODES)))
        lo, hi = (self.image_scale + (0.0, 0.0))[:2]
        require(len(self.image_scale) == 2 and 0 < lo <= hi, "aug image_scale is a range 0 < lo <= hi")
        require(self.image_rotation >= 0, "aug image_rotation >= 0")
        require(self.bev_yaw >= 0, "aug bev_yaw >= 0")
        lo, hi = (self.bev_scale + (0.0, 0.0))[:2]
        require(len(self.bev_scale) == 2 and 0 < lo <= hi, "aug bev_scale is a range 0 < lo <= hi")
        return self

    def grid(self):
        from ..Calc.Geometry import BevGrid
        return BevGrid(self.X, self.Y, self.resolution, self.z_anchors)

    def to_parser(self):
        parser = configparser.ConfigParser()
        parser.optionxform = str
        for section in SECTIONS:
            parser[section] = {}
        for attr, (section, key, _, _) in self._META.items():
            parser[section][key] = _format(self._values[attr])
        return parser

    def dumps(self):
        buf = io.StringIO()
        self.to_parser().write(buf)
        return buf.getvalue()

    def write(self, path):
        with open(path, 'w') as f:
            f.write(self.dumps())

    @classmethod
    def from_parser(cls, parser):
        cfg = cls()
        for section in parser.sections():
            if section not in SECTIONS:
                raise ConfigError("Unknown configuration section [{0:s}].".format(section))
            for key, value in parser[section].items():
                attr = cls._BY_KEY.get((section, key))
                if attr is None:
                    raise ConfigError("Unknown option \"{0:s}\" in section [{1:s}].".format(key, section))
                cfg._set(attr, value)
        return cfg

    @classmethod
    def loads(cls, text):
        parser = configparser.ConfigParser()
        parser.optionxform = str
        try:
            parser.read_string(text)
        except configparser.Error as e:
            raise ConfigError("Cannot parse configuration: {0:s}".format(str(e)))
        return cls.from_parser(parser)

    @classmethod
    def read(cls, path):
        try:
            with open(path) as f:
                text = f.read()
        except (IOError, OSError) as e:
            raise ConfigError("Cannot read configuration {0:s}: {1:s}".format(str(path), str(e)))
        return cls.loads(text)

    def __eq__(self, other):
        return isinstance(other, RunConfig) and self._values == other._values

    def __repr__(self):
        return "RunConfig({0:s})".format(", ".join("{0:s}={1:s}".format(k, repr(v)) for k, v in self._values.items()))


for _section, _key, _attr, _conv, _default in DEFAULTS:
    setattr(RunConfig, _attr, _option(_attr))
del _section, _key, _attr, _conv, _default
