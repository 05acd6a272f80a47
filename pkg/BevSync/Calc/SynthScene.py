# -*- coding: utf-8 -*-
"""Synthetic driving scenes with analytically known ground truth.

A scenario is a flat world (ground plane z = 0) populated with box
prisms that move with constant speed and yaw rate, observed by a camera
rig mounted on an ego vehicle. The renderer casts one ray per pixel and
writes a positional encoding of the world hit point, so every feature can
be traced back to the 3D point it came from.

Frame indices are relative to the current frame 0: past frames are
negative, future frames positive. The world frame coincides with the ego
frame at frame 0.
"""
from __future__ import print_function, division

import configparser
import logging
import os

import numpy as np

from ..Util import ConfigError, FormatError
from ..Util.Tensor import F32, parallel_rows, read_btf, write_btf
from . import box_corners, ray_tracing
from .Geometry import Pose, parse_rig, rig_to_parser, rot_2d

logger = logging.getLogger(__name__)

BOX_HEIGHT = 1.5
FREQUENCIES = (1.0 / 8.0, 1.0 / 32.0)
CATEGORIES = {'vehicle': 1, 'pedestrian': 2}
HIT_EPS = 1e-9

# Feature channel layout
CH_PHI_X = slice(0, 4)
CH_PHI_Y = slice(4, 8)
CH_BOX = 8
CH_DEPTH = 9
FEATURE_WIDTH = 10


def encode_position(values):
    """Fixed two-frequency sin/cos encoding of metric coordinates.

    Returns an array with a trailing axis of 4:
    ``[sin(2 pi f1 a), cos(2 pi f1 a), sin(2 pi f2 a), cos(2 pi f2 a)]``.
    """
    a = np.asarray(values, dtype=np.float64)[..., None]
    f = np.array(FREQUENCIES)
    ang = 2.0 * np.pi * a * f
    return np.stack([np.sin(ang[..., 0]), np.cos(ang[..., 0]), np.sin(ang[..., 1]), np.cos(ang[..., 1])], axis=-1)


def encode_world(points):
    """``[phi(x), phi(y)]`` of (..., >=2) metric points, trailing axis 8."""
    points = np.asarray(points, dtype=np.float64)
    return np.concatenate([encode_position(points[..., 0]), encode_position(points[..., 1])], axis=-1)


class Box(object):
    """A box prism moving with constant speed and yaw rate.

    ``center``, ``yaw``, ``velocity`` are world quantities at frame 0. With a
    non-zero yaw rate the velocity vector turns along with the box.
    """

    def __init__(self, box_id, center, size, yaw=0.0, velocity=(0.0, 0.0), yaw_rate=0.0,
                 height=BOX_HEIGHT, category='vehicle'):
        box_id = int(box_id)
        if box_id < 1:
            raise ValueError("Box ids must be positive, got {0:d}.".format(box_id))
        if category not in CATEGORIES:
            raise ValueError("Invalid category \"{0:s}\", expected one of {1:s}.".format(category, str(sorted(CATEGORIES))))
        size = tuple(float(s) for s in size)
        if len(size) != 2 or min(size) <= 0 or height <= 0:
            raise ValueError("Box sizes must be positive, got {0:s} x {1:f}.".format(str(size), height))
        self._id = box_id
        self._center = np.array(center, dtype=np.float64).reshape(2)
        self._size = size
        self._yaw = float(yaw)
        self._velocity = np.array(velocity, dtype=np.float64).reshape(2)
        self._yaw_rate = float(yaw_rate)
        self._height = float(height)
        self._category = category

    @property
    def id(self): return self._id

    @property
    def center(self): return self._center.copy()

    @property
    def size(self): return self._size

    @property
    def yaw(self): return self._yaw

    @property
    def velocity(self): return self._velocity.copy()

    @property
    def yaw_rate(self): return self._yaw_rate

    @property
    def height(self): return self._height

    @property
    def category(self): return self._category

    @property
    def label(self): return CATEGORIES[self._category]

    @property
    def is_static(self):
        return not np.any(self._velocity) and self._yaw_rate == 0.0

    def state(self, time):
        """World centre and yaw at ``time`` seconds after frame 0."""
        speed = np.hypot(*self._velocity)
        w = self._yaw_rate
        if speed == 0.0:
            return self._center.copy(), self._yaw + w * time
        if abs(w) < 1e-12:
            return self._center + self._velocity * time, self._yaw
        h0 = np.arctan2(self._velocity[1], self._velocity[0])
        h1 = h0 + w * time
        delta = speed / w * np.array([np.sin(h1) - np.sin(h0), np.cos(h0) - np.cos(h1)])
        return self._center + delta, self._yaw + w * time

    def to_dict(self):
        return {'category': self._category, 'x': self._center[0], 'y': self._center[1],
                'length': self._size[0], 'width': self._size[1], 'yaw': self._yaw,
                'vx': self._velocity[0], 'vy': self._velocity[1], 'yaw_rate': self._yaw_rate,
                'height': self._height}

    def __repr__(self):
        return "Box(id={0:d}, {1:s}, center={2:s}, yaw={3:g})".format(self._id, self._category, str(self._center), self._yaw)


class Road(object):
    """Straight road strip in the world frame, split into equal lanes."""

    LINE_WIDTH = 0.5

    def __init__(self, origin, heading, width=7.0, lanes=2):
        if width <= 0 or int(lanes) < 1:
            raise ValueError("Invalid road: width {0:f}, lanes {1:s}.".format(width, str(lanes)))
        self._origin = np.array(origin, dtype=np.float64).reshape(2)
        self._heading = float(heading)
        self._width = float(width)
        self._lanes = int(lanes)

    @property
    def origin(self): return self._origin.copy()

    @property
    def heading(self): return self._heading

    @property
    def width(self): return self._width

    @property
    def lanes(self): return self._lanes

    def lateral(self, points):
        d = np.asarray(points, dtype=np.float64)[..., :2] - self._origin
        return -np.sin(self._heading) * d[..., 0] + np.cos(self._heading) * d[..., 1]

    def drivable(self, points):
        return np.abs(self.lateral(points)) <= 0.5 * self._width

    def lane_lines(self, points, line_width=None):
        w = self.LINE_WIDTH if line_width is None else line_width
        lat = self.lateral(points)
        offsets = -0.5 * self._width + self._width * np.arange(self._lanes + 1) / self._lanes
        dist = np.min(np.abs(lat[..., None] - offsets), axis=-1)
        return dist <= 0.5 * w

    def to_dict(self):
        return {'x': self._origin[0], 'y': self._origin[1], 'heading': self._heading,
                'width': self._width, 'lanes': self._lanes}


class Scenario(object):
    """Ego trajectory, boxes, roads and the camera rig of one sequence.

    Parameters
    ----------
    ego_traj : dict
        frame index -> (x, y, yaw) world pose; must cover frames -T..0.
    boxes : list of Box
    rig : CameraRig
    frame_period : float
        Seconds between consecutive frames.
    T, T_future : int
        Number of past and future frames.
    roads : list of Road, optional
    """

    def __init__(self, ego_traj, boxes, rig, frame_period=0.5, T=2, T_future=4, roads=None):
        if not frame_period > 0:
            raise ValueError("frame_period must be positive, got {0:s}.".format(str(frame_period)))
        if int(T) < 0 or int(T_future) < 0:
            raise ValueError("Frame counts must be >= 0, got T={0:s}, T'={1:s}.".format(str(T), str(T_future)))
        ids = [b.id for b in boxes]
        if len(set(ids)) != len(ids):
            raise ValueError("Box ids must be unique, got {0:s}.".format(str(ids)))
        missing = [k for k in range(-int(T), 1) if k not in ego_traj]
        if missing:
            raise ValueError("Ego trajectory misses frames {0:s}.".format(str(missing)))
        self._traj = dict((int(k), tuple(float(v) for v in p)) for k, p in ego_traj.items())
        self._boxes = list(boxes)
        self._rig = rig
        self._frame_period = float(frame_period)
        self._T = int(T)
        self._T_future = int(T_future)
        self._roads = list(roads) if roads is not None else []

    @property
    def ego_traj(self): return dict(self._traj)

    @property
    def boxes(self): return list(self._boxes)

    @property
    def rig(self): return self._rig

    @property
    def roads(self): return list(self._roads)

    @property
    def frame_period(self): return self._frame_period

    @property
    def T(self): return self._T

    @property
    def T_future(self): return self._T_future

    @property
    def is_static(self):
        return all(b.is_static for b in self._boxes)

    def time(self, frame):
        return frame * self._frame_period

    def ego_pose(self, frame):
        """World pose of the ego vehicle at ``frame``."""
        try:
            return Pose.from_planar(*self._traj[frame])
        except KeyError:
            raise IndexError("No ego pose for frame {0:d}.".format(frame))

    def with_rig(self, rig):
        return Scenario(self._traj, self._boxes, rig, self._frame_period, self._T, self._T_future, self._roads)

    def transformed(self, pose):
        """The same scenario expressed in a world frame moved by ``pose``.

        Every world quantity (ego poses, boxes, roads) is mapped through the
        planar ``pose``; ego-relative observations stay unchanged.
        """
        x, y, yaw = pose.planar()
        R = rot_2d(yaw)
        traj = {}
        for k, (px, py, pyaw) in self._traj.items():
            c = R.dot([px, py]) + [x, y]
            traj[k] = (c[0], c[1], pyaw + yaw)
        boxes = [Box(b.id, R.dot(b.center) + [x, y], b.size, b.yaw + yaw, R.dot(b.velocity), b.yaw_rate,
                     b.height, b.category) for b in self._boxes]
        roads = [Road(R.dot(r.origin) + [x, y], r.heading + yaw, r.width, r.lanes) for r in self._roads]
        return Scenario(traj, boxes, self._rig, self._frame_period, self._T, self._T_future, roads)


class FeatureImage(object):
    """Rendered feature map of one camera at one frame.

    ``features`` is (H, W, C); ``hits`` is (H, W, 3) world hit points with NaN
    where the ray hits nothing.
    """

    def __init__(self, camera, frame, features, hits):
        self._camera = camera
        self._frame = int(frame)
        self._features = features
        self._hits = hits

    @property
    def camera(self): return self._camera

    @property
    def intrinsics(self): return self._camera.intrinsics

    @property
    def frame(self): return self._frame

    @property
    def features(self): return self._features

    @property
    def hits(self): return self._hits

    @property
    def shape(self): return self._features.shape

    def replace(self, features=None, camera=None, hits=None):
        return FeatureImage(self._camera if camera is None else camera, self._frame,
                            self._features if features is None else features,
                            self._hits if hits is None else hits)


def camera_rays(scn, camera, frame, u, v):
    """World origin and directions (unit optical depth) of pixel rays."""
    world_from_cam = scn.ego_pose(frame).compose(camera.ego_from_cam)
    Kinv = np.linalg.inv(camera.intrinsics.matrix)
    pix = np.stack(np.broadcast_arrays(np.asarray(u, dtype=np.float64), np.asarray(v, dtype=np.float64),
                                       np.ones(np.shape(u))), axis=-1)
    d_cam = pix.dot(Kinv.T)
    d_world = d_cam.dot(world_from_cam.rotation.T)
    return world_from_cam.translation, d_world


def _box_hits(box, time, origin, dirs):
    """Ray parameter of the first hit with a box prism, inf on a miss."""
    center, yaw = box.state(time)
    c, s = np.cos(yaw), np.sin(yaw)
    Rt = np.array([[c, s, 0.0], [-s, c, 0.0], [0.0, 0.0, 1.0]])
    o = Rt.dot(origin - np.array([center[0], center[1], 0.0]))
    d = dirs.dot(Rt.T)
    lo = np.array([-0.5 * box.size[0], -0.5 * box.size[1], 0.0])
    hi = np.array([0.5 * box.size[0], 0.5 * box.size[1], box.height])
    t_near = np.full(d.shape[:-1], -np.inf)
    t_far = np.full(d.shape[:-1], np.inf)
    for axis in range(3):
        da = d[..., axis]
        parallel = np.abs(da) < 1e-15
        outside = (o[axis] < lo[axis]) | (o[axis] > hi[axis])
        with np.errstate(divide='ignore', invalid='ignore'):
            t1 = (lo[axis] - o[axis]) / da
            t2 = (hi[axis] - o[axis]) / da
        tmin = np.where(parallel, -np.inf, np.minimum(t1, t2))
        tmax = np.where(parallel, np.where(outside, -np.inf, np.inf), np.maximum(t1, t2))
        t_near = np.maximum(t_near, tmin)
        t_far = np.minimum(t_far, tmax)
    hit = (t_near <= t_far) & (t_near > HIT_EPS)
    return np.where(hit, t_near, np.inf)


def cast_rays(scn, camera, frame, u, v):
    """Intersect pixel rays with the scene.

    Returns
    -------
    depth : array, inf where the ray hits nothing
    points : world hit points, NaN on a miss
    box_id : id of the hit box, 0 for ground or sky
    """
    origin, dirs = camera_rays(scn, camera, frame, u, v)
    time = scn.time(frame)
    with np.errstate(divide='ignore', invalid='ignore'):
        t_ground = np.where(dirs[..., 2] < 0.0, -origin[2] / dirs[..., 2], np.inf)
    depth = np.where(t_ground > HIT_EPS, t_ground, np.inf)
    box_id = np.zeros(depth.shape, dtype=np.int64)
    for box in scn.boxes:
        t_box = _box_hits(box, time, origin, dirs)
        closer = t_box < depth
        depth = np.where(closer, t_box, depth)
        box_id = np.where(closer, box.id, box_id)
    finite = np.isfinite(depth)
    points = origin + np.where(finite, depth, np.nan)[..., None] * dirs
    return depth, points, box_id


def render_camera(scn, camera, frame, channels=FEATURE_WIDTH, dtype=F32):
    """Render the (H, W, channels) feature image of one camera."""
    if channels < FEATURE_WIDTH:
        raise ValueError("The feature encoding needs {0:d} channels, got {1:d}.".format(FEATURE_WIDTH, channels))
    K = camera.intrinsics
    v, u = np.meshgrid(np.arange(K.height, dtype=np.float64), np.arange(K.width, dtype=np.float64), indexing='ij')
    depth, points, box_id = cast_rays(scn, camera, frame, u, v)
    hit = np.isfinite(depth)
    feats = np.zeros((K.height, K.width, channels), dtype=np.float64)
    safe = np.where(hit[..., None], points, 0.0)
    feats[..., :8] = encode_world(safe)
    feats[..., CH_BOX] = box_id > 0
    feats[..., CH_DEPTH] = np.where(hit, depth, 0.0)
    feats[~hit] = 0.0
    return FeatureImage(camera, frame, feats.astype(dtype), points)


def render_features(scn, frame, channels=FEATURE_WIDTH, dtype=F32, workers=None):
    """Render every camera of the rig at ``frame``; cameras run concurrently."""
    cams = scn.rig.cameras
    images = parallel_rows(lambda i: render_camera(scn, cams[i], frame, channels, dtype), len(cams), workers)
    logger.debug("Rendered %d cameras at frame %d", len(images), frame)
    return images


class GroundTruth(object):
    """BEV label rasters of a set of frames, all in the current-ego frame.

    Attributes hold stacked arrays over ``frames``:

    * ``seg``      (F, n_cls, X, Y) one-hot semantic classes
    * ``instance`` (F, X, Y) uint32 vehicle ids, 0 = background
    * ``center``   (F, X, Y) Gaussian splats at vehicle centres
    * ``offset``   (F, 2, X, Y) cells from each vehicle cell to its centre
    * ``flow``     (F, 2, X, Y) cell displacement to the next frame
    * ``hdmap``    (2, X, Y) drivable area and lane lines
    """

    NAMES = ('seg', 'instance', 'center', 'offset', 'flow', 'hdmap')

    def __init__(self, frames, seg, instance, center, offset, flow, hdmap, centers=None):
        self.frames = [int(f) for f in frames]
        self.seg = seg
        self.instance = instance
        self.center = center
        self.offset = offset
        self.flow = flow
        self.hdmap = hdmap
        self.centers = centers if centers is not None else [dict() for _ in self.frames]

    def index(self, frame):
        try:
            return self.frames.index(frame)
        except ValueError:
            raise IndexError("Frame {0:d} was not rendered.".format(frame))

    def save(self, directory):
        if not os.path.isdir(directory):
            os.makedirs(directory)
        for name in self.NAMES:
            write_btf(os.path.join(directory, name + '.btf'), getattr(self, name), dtype=F32)
        write_btf(os.path.join(directory, 'frames.btf'), np.array(self.frames), dtype=F32)

    @classmethod
    def load(cls, directory):
        try:
            arrays = dict((name, read_btf(os.path.join(directory, name + '.btf'))) for name in cls.NAMES)
            frames = read_btf(os.path.join(directory, 'frames.btf'))
        except (IOError, OSError) as e:
            raise FormatError("Incomplete ground truth directory {0:s}: {1:s}".format(str(directory), str(e)))
        arrays['instance'] = np.rint(arrays['instance']).astype(np.uint32)
        return cls([int(f) for f in frames], **arrays)


def box_in_ego(box, scn, frame, ego_now):
    """Centre and yaw of a box at ``frame`` expressed in the ``ego_now`` frame."""
    center, yaw = box.state(scn.time(frame))
    p = ego_now.inverse().apply([center[0], center[1], 0.0])
    return p[:2], yaw - ego_now.yaw


def render_gt(scn, grid, frames=None, center_sigma=3.0, classes=3):
    """Rasterise the ground truth of ``frames`` (default 0..T') in the frame-0 ego frame.

    Both classes enter the semantic channels; only vehicles receive
    instance ids, centre splats, offsets and flow. Vehicles are painted
    after pedestrians, later boxes after earlier ones.
    """
    if frames is None:
        frames = list(range(0, scn.T_future + 1))
    ego_now = scn.ego_pose(0)
    X, Y, r = grid.X, grid.Y, grid.resolution
    metric = grid.cell_centers()
    rows, cols = np.meshgrid(np.arange(X, dtype=np.float64), np.arange(Y, dtype=np.float64), indexing='ij')
    F = len(frames)
    seg = np.zeros((F, classes, X, Y), dtype=np.float64)
    instance = np.zeros((F, X, Y), dtype=np.uint32)
    center = np.zeros((F, X, Y), dtype=np.float64)
    offset = np.zeros((F, 2, X, Y), dtype=np.float64)
    flow = np.zeros((F, 2, X, Y), dtype=np.float64)
    centers = []
    order = sorted(scn.boxes, key=lambda b: (b.label == CATEGORIES['vehicle'], 0))
    for i, frame in enumerate(frames):
        labels = np.zeros((X, Y), dtype=np.int64)
        frame_centers = {}
        for box in order:
            c, yaw = box_in_ego(box, scn, frame, ego_now)
            inside = ray_tracing(metric[..., 0], metric[..., 1], box_corners(c, box.size, yaw))
            label = box.label if box.label < classes else 0
            labels[inside] = label
            if box.category != 'vehicle':
                continue
            instance[i][inside] = box.id
            cx, cy = grid.metric_to_cell(c[0], c[1])
            frame_centers[box.id] = (float(cx), float(cy))
            center[i] = np.maximum(center[i], np.exp(-((rows - cx) ** 2 + (cols - cy) ** 2) / (2.0 * center_sigma ** 2)))
            offset[i, 0][inside] = (cx - rows)[inside]
            offset[i, 1][inside] = (cy - cols)[inside]
            if box.is_static:
                flow[i][:, inside] = 0.0
                continue
            c_next, yaw_next = box_in_ego(box, scn, frame + 1, ego_now)
            local = (metric[inside] - c).dot(rot_2d(yaw))
            moved = local.dot(rot_2d(yaw_next).T) + c_next
            flow[i, 0][inside] = (moved[:, 0] - metric[inside][:, 0]) / r
            flow[i, 1][inside] = (moved[:, 1] - metric[inside][:, 1]) / r
        # vehicle rasters only where the vehicle label survived
        instance[i][labels != CATEGORIES['vehicle']] = 0
        offset[i][:, ~(instance[i] > 0)] = 0.0
        flow[i][:, ~(instance[i] > 0)] = 0.0
        for k in range(classes):
            seg[i, k] = labels == k
        present = set(np.unique(instance[i]).tolist()) - {0}
        centers.append(dict((k, v) for k, v in frame_centers.items() if k in present))
    hdmap = render_hdmap(scn, grid, ego_now)
    return GroundTruth(frames, seg, instance, center, offset, flow, hdmap, centers)


def render_hdmap(scn, grid, ego_now=None):
    if ego_now is None:
        ego_now = scn.ego_pose(0)
    metric = grid.cell_centers()
    pts = np.concatenate([metric, np.zeros(metric.shape[:2] + (1,))], axis=-1)
    world = ego_now.apply(pts)
    hdmap = np.zeros((2,) + grid.shape, dtype=np.float64)
    for road in scn.roads:
        hdmap[0] = np.maximum(hdmap[0], road.drivable(world))
        hdmap[1] = np.maximum(hdmap[1], road.lane_lines(world, max(Road.LINE_WIDTH, grid.resolution)))
    return hdmap


def _planar_state(x, y, yaw, speed, yaw_rate, time):
    if abs(yaw_rate) < 1e-12:
        return x + speed * time * np.cos(yaw), y + speed * time * np.sin(yaw), yaw
    h1 = yaw + yaw_rate * time
    return (x + speed / yaw_rate * (np.sin(h1) - np.sin(yaw)),
            y + speed / yaw_rate * (np.cos(yaw) - np.cos(h1)), h1)


def ego_trajectory(frames, frame_period, speed, yaw_rate):
    """Constant speed and yaw-rate ego motion through the world origin at frame 0."""
    return dict((k, _planar_state(0.0, 0.0, 0.0, speed, yaw_rate, k * frame_period)) for k in frames)


def generate_scenario(seed, rig, T=2, T_future=4, frame_period=0.5, vehicles=3, pedestrians=1,
                      ego_speed=2.0, ego_yaw_rate=0.1, extent=16.0, max_tries=1000):
    """Seeded random scenario.

    Vehicle centres stay at least 2 m inside the ``extent`` square and 6 m
    apart from each other over all frames -T..T'. With two or more
    vehicles the first one drives straight and the second one turns.
    """
    rng = np.random.default_rng(int(seed))
    frames = list(range(-T, T_future + 1))
    traj = ego_trajectory(frames, frame_period, ego_speed, ego_yaw_rate)
    limit = 0.5 * extent - 2.0
    boxes = []

    def track(box):
        return np.array([box.state(k * frame_period)[0] for k in frames])

    tracks = []
    for i in range(vehicles):
        for _ in range(max_tries):
            center = rng.uniform(-limit, limit, size=2)
            yaw = rng.uniform(-np.pi, np.pi)
            speed = 0.0 if (i >= 2 and rng.uniform() < 0.3) else rng.uniform(0.5, 2.0)
            if i == 0:
                yaw_rate = 0.0
            elif i == 1:
                yaw_rate = rng.choice([-1.0, 1.0]) * rng.uniform(0.2, 0.5)
            else:
                yaw_rate = rng.uniform(-0.3, 0.3) if speed > 0 else 0.0
            box = Box(i + 1, center, (rng.uniform(3.5, 4.5), rng.uniform(1.6, 2.0)), yaw,
                      speed * np.array([np.cos(yaw), np.sin(yaw)]), yaw_rate)
            path = track(box)
            if np.any(np.abs(path) > limit):
                continue
            if any(np.min(np.hypot(*(path - other).T)) < 6.0 for other in tracks):
                continue
            boxes.append(box)
            tracks.append(path)
            break
        else:
            raise ConfigError("Cannot place {0:d} vehicles in a {1:g} m square.".format(vehicles, extent))
    for j in range(pedestrians):
        for _ in range(max_tries):
            center = rng.uniform(-0.5 * extent, 0.5 * extent, size=2)
            heading = rng.uniform(-np.pi, np.pi)
            box = Box(vehicles + j + 1, center, (0.6, 0.6), heading,
                      rng.uniform(0.0, 1.0) * np.array([np.cos(heading), np.sin(heading)]), 0.0,
                      category='pedestrian')
            path = track(box)
            if any(np.min(np.hypot(*(path - other).T)) < 3.5 for other in tracks):
                continue
            boxes.append(box)
            break
        else:
            raise ConfigError("Cannot place {0:d} pedestrians in a {1:g} m square.".format(pedestrians, extent))
    roads = [Road((0.0, 0.0), 0.0, width=7.0, lanes=2)]
    if rng.uniform() < 0.5:
        roads.append(Road((rng.uniform(-0.25, 0.25) * extent, 0.0), 0.5 * np.pi, width=6.0, lanes=2))
    return Scenario(traj, boxes, rig, frame_period, T, T_future, roads)


def scenario_to_parser(scn):
    parser = rig_to_parser(scn.rig, scn.ego_traj)
    parser['scenario'] = {'frame_period': repr(scn.frame_period), 'past_frames': str(scn.T),
                          'future_frames': str(scn.T_future)}
    for box in scn.boxes:
        parser['box {0:d}'.format(box.id)] = dict((k, v if isinstance(v, str) else repr(float(v)))
                                                  for k, v in box.to_dict().items())
    for i, road in enumerate(scn.roads):
        parser['road {0:d}'.format(i)] = dict((k, repr(float(v)) if k != 'lanes' else str(v))
                                              for k, v in road.to_dict().items())
    return parser


def write_scenario(path, scn):
    with open(path, 'w') as f:
        scenario_to_parser(scn).write(f)


def read_scenario(path):
    """Read a scenario file written by :func:`write_scenario`."""
    parser = configparser.ConfigParser()
    if not parser.read(path):
        raise ConfigError("Cannot read scenario file {0:s}.".format(str(path)))
    rig, traj = parse_rig(parser)
    if traj is None or 'scenario' not in parser:
        raise ConfigError("Scenario file {0:s} needs [scenario] and [trajectory] sections.".format(str(path)))
    s = parser['scenario']
    boxes = []
    roads = []
    try:
        for section in parser.sections():
            b = parser[section]
            if section.startswith('box '):
                boxes.append(Box(int(section[4:]), (b.getfloat('x'), b.getfloat('y')),
                                 (b.getfloat('length'), b.getfloat('width')), b.getfloat('yaw', 0.0),
                                 (b.getfloat('vx', 0.0), b.getfloat('vy', 0.0)), b.getfloat('yaw_rate', 0.0),
                                 b.getfloat('height', BOX_HEIGHT), b.get('category', 'vehicle')))
            elif section.startswith('road '):
                roads.append(Road((b.getfloat('x'), b.getfloat('y')), b.getfloat('heading'),
                                  b.getfloat('width'), b.getint('lanes')))
        return Scenario(traj, boxes, rig, s.getfloat('frame_period'), s.getint('past_frames'),
                        s.getint('future_frames'), roads)
    except (TypeError, ValueError) as e:
        raise ConfigError("Invalid scenario file {0:s}: {1:s}".format(str(path), str(e)))
