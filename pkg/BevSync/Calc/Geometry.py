# -*- coding: utf-8 -*-
"""Camera models, ego poses, the BEV grid and the BEV-to-image projection.

Conventions
-----------
* Ego frame: x forward, y left, z up (metres).
* Camera optical frame: +z forward, +x right, +y down.
* BEV cell (x, y) has its centre at ``((x - X/2 + 0.5) r, (y - Y/2 + 0.5) r)``
  with the ego vehicle at the grid centre; BEV row index = x, column = y.
"""
from __future__ import print_function, division

import configparser

import numpy as np

from ..Util import ConfigError

EPS_DEPTH = 1e-6

# Columns are the optical axes (right, down, forward) expressed in the ego frame.
OPTICAL_TO_EGO = np.array([[0.0, 0.0, 1.0],
                           [-1.0, 0.0, 0.0],
                           [0.0, -1.0, 0.0]])


def rot_x(a):
    c, s = np.cos(a), np.sin(a)
    return np.array([[1.0, 0.0, 0.0], [0.0, c, -s], [0.0, s, c]])


def rot_y(a):
    c, s = np.cos(a), np.sin(a)
    return np.array([[c, 0.0, s], [0.0, 1.0, 0.0], [-s, 0.0, c]])


def rot_z(a):
    c, s = np.cos(a), np.sin(a)
    return np.array([[c, -s, 0.0], [s, c, 0.0], [0.0, 0.0, 1.0]])


def rot_2d(a):
    c, s = np.cos(a), np.sin(a)
    return np.array([[c, -s], [s, c]])


class Intrinsics(object):
    """Pinhole intrinsics of one camera, stored as a 3x3 matrix.

    The regular constructor takes focal lengths and principal point;
    :meth:`from_matrix` accepts any matrix with last row ``[0, 0, 1]``,
    which image-plane augmentations (rotation, mirroring) produce.
    """

    def __init__(self, fx, fy, cx, cy, width, height):
        width, height = int(width), int(height)
        if width < 1 or height < 1:
            raise ValueError("Invalid image size {0:d}x{1:d}.".format(width, height))
        if not (fx > 0 and fy > 0):
            raise ValueError("Focal lengths must be positive, got fx={0:f}, fy={1:f}.".format(fx, fy))
        if not (0 <= cx < width and 0 <= cy < height):
            raise ValueError("Principal point ({0:f}, {1:f}) lies outside the {2:d}x{3:d} image.".format(cx, cy, width, height))
        self._matrix = np.array([[fx, 0.0, cx], [0.0, fy, cy], [0.0, 0.0, 1.0]], dtype=np.float64)
        self._width = width
        self._height = height

    @classmethod
    def from_matrix(cls, K, width, height):
        K = np.asarray(K, dtype=np.float64)
        if K.shape != (3, 3) or not np.allclose(K[2], [0.0, 0.0, 1.0], atol=1e-12):
            raise ValueError("Invalid intrinsic matrix, expected 3x3 with last row [0, 0, 1].")
        if abs(np.linalg.det(K)) < 1e-12:
            raise ValueError("Intrinsic matrix is singular.")
        obj = cls.__new__(cls)
        obj._matrix = K.copy()
        obj._width = int(width)
        obj._height = int(height)
        return obj

    @property
    def matrix(self): return self._matrix.copy()

    @property
    def fx(self): return float(self._matrix[0, 0])

    @property
    def fy(self): return float(self._matrix[1, 1])

    @property
    def cx(self): return float(self._matrix[0, 2])

    @property
    def cy(self): return float(self._matrix[1, 2])

    @property
    def width(self): return self._width

    @property
    def height(self): return self._height

    def __eq__(self, other):
        return (isinstance(other, Intrinsics) and self._width == other._width
                and self._height == other._height and np.array_equal(self._matrix, other._matrix))

    def __repr__(self):
        return "Intrinsics(fx={0:g}, fy={1:g}, cx={2:g}, cy={3:g}, width={4:d}, height={5:d})".format(
            self.fx, self.fy, self.cx, self.cy, self._width, self._height)


class Pose(object):
    """Rigid SE(3) transform ``p_parent = R p_local + t``."""

    TOLERANCE = 1e-9

    def __init__(self, rotation=None, translation=None, check=True):
        R = np.eye(3) if rotation is None else np.array(rotation, dtype=np.float64)
        t = np.zeros(3) if translation is None else np.array(translation, dtype=np.float64).reshape(3)
        if R.shape != (3, 3):
            raise ValueError("Invalid rotation shape {0:s}, expected (3, 3).".format(str(R.shape)))
        if check:
            if not np.allclose(R.T.dot(R), np.eye(3), atol=self.TOLERANCE, rtol=0.0):
                raise ValueError("Rotation is not orthonormal.")
            if abs(np.linalg.det(R) - 1.0) > self.TOLERANCE:
                raise ValueError("Rotation has det {0:f}, expected +1.".format(np.linalg.det(R)))
        if not np.all(np.isfinite(t)):
            raise ValueError("Translation must be finite.")
        self._R = R
        self._t = t

    @classmethod
    def identity(cls):
        return cls()

    @classmethod
    def from_planar(cls, x, y, yaw):
        """Planar (SE(2)) pose embedded at z = 0."""
        return cls(rot_z(yaw), [x, y, 0.0])

    @classmethod
    def from_euler(cls, yaw, pitch, roll, translation):
        return cls(rot_z(yaw).dot(rot_y(pitch)).dot(rot_x(roll)), translation)

    @classmethod
    def from_matrix(cls, M):
        M = np.asarray(M, dtype=np.float64)
        return cls(M[:3, :3], M[:3, 3])

    @property
    def rotation(self): return self._R.copy()

    @property
    def translation(self): return self._t.copy()

    @property
    def matrix(self):
        M = np.eye(4)
        M[:3, :3] = self._R
        M[:3, 3] = self._t
        return M

    @property
    def yaw(self): return float(np.arctan2(self._R[1, 0], self._R[0, 0]))

    def planar(self):
        return float(self._t[0]), float(self._t[1]), self.yaw

    def inverse(self):
        Rt = self._R.T
        return Pose(Rt, -Rt.dot(self._t), check=False)

    def compose(self, other):
        """Return ``self ∘ other``, i.e. apply ``other`` first."""
        return Pose(self._R.dot(other._R), self._R.dot(other._t) + self._t, check=False)

    def __matmul__(self, other):
        return self.compose(other)

    def apply(self, points):
        pts = np.asarray(points, dtype=np.float64)
        return pts.dot(self._R.T) + self._t

    def __repr__(self):
        x, y, yaw = self.planar()
        return "Pose(x={0:g}, y={1:g}, z={2:g}, yaw={3:g})".format(x, y, self._t[2], yaw)


class Camera(object):
    """One rig camera: intrinsics plus its mounting pose on the ego vehicle."""

    def __init__(self, name, intrinsics, yaw=0.0, pitch=0.0, roll=0.0, translation=(0.0, 0.0, 0.0)):
        self._name = str(name)
        self._intrinsics = intrinsics
        self._mount = (float(yaw), float(pitch), float(roll))
        self._translation = tuple(float(v) for v in translation)
        R = rot_z(yaw).dot(rot_y(pitch)).dot(rot_x(roll)).dot(OPTICAL_TO_EGO)
        self._ego_from_cam = Pose(R, self._translation)

    @property
    def name(self): return self._name

    @property
    def intrinsics(self): return self._intrinsics

    @property
    def mount(self): return self._mount

    @property
    def mount_translation(self): return self._translation

    @property
    def ego_from_cam(self): return self._ego_from_cam

    @property
    def cam_from_ego(self): return self._ego_from_cam.inverse()

    def with_intrinsics(self, intrinsics):
        cam = Camera(self._name, intrinsics, *self._mount, translation=self._translation)
        return cam


class CameraRig(object):
    """Ordered collection of cameras."""

    def __init__(self, cameras=None):
        self._cameras = list(cameras) if cameras is not None else []
        names = [c.name for c in self._cameras]
        if len(set(names)) != len(names):
            raise ValueError("Camera names must be unique, got {0:s}.".format(str(names)))

    @property
    def cameras(self): return list(self._cameras)

    def __len__(self):
        return len(self._cameras)

    def __iter__(self):
        return iter(self._cameras)

    def __getitem__(self, index):
        return self._cameras[index]

    def append(self, camera):
        if camera.name in [c.name for c in self._cameras]:
            raise ValueError("Duplicate camera name \"{0:s}\".".format(camera.name))
        self._cameras.append(camera)
        return self

    @classmethod
    def desk(cls, num_cameras=2, size=64, fov_deg=90.0, height=1.5, pitch=0.35):
        """Evenly spaced cameras around the vehicle, all slightly tilted down."""
        f = 0.5 * (size - 1) / np.tan(0.5 * np.radians(fov_deg))
        c = 0.5 * (size - 1)
        rig = cls()
        for i in range(num_cameras):
            yaw = 2.0 * np.pi * i / num_cameras
            rig.append(Camera('cam{0:d}'.format(i), Intrinsics(f, f, c, c, size, size),
                              yaw=yaw, pitch=pitch, translation=(0.0, 0.0, height)))
        return rig


class BevGrid(object):
    """Current-ego BEV grid of X x Y cells of ``resolution`` metres."""

    DEFAULT_Z = (-1.0, 0.0, 1.0, 2.0)

    def __init__(self, X=200, Y=200, resolution=0.5, z_anchors=None):
        self.X = X
        self.Y = Y
        self.resolution = resolution
        self.z_anchors = self.DEFAULT_Z if z_anchors is None else z_anchors

    @property
    def X(self): return self._X

    @X.setter
    def X(self, value):
        if int(value) < 2:
            raise ValueError("Grid extent X must be >= 2, got {0:s}.".format(str(value)))
        self._X = int(value)

    @property
    def Y(self): return self._Y

    @Y.setter
    def Y(self, value):
        if int(value) < 2:
            raise ValueError("Grid extent Y must be >= 2, got {0:s}.".format(str(value)))
        self._Y = int(value)

    @property
    def resolution(self): return self._resolution

    @resolution.setter
    def resolution(self, value):
        if not value > 0:
            raise ValueError("Resolution must be positive, got {0:s}.".format(str(value)))
        self._resolution = float(value)

    @property
    def z_anchors(self): return self._z_anchors.copy()

    @z_anchors.setter
    def z_anchors(self, value):
        z = np.array(value, dtype=np.float64).reshape(-1)
        if z.size < 1 or np.any(np.diff(z) <= 0):
            raise ValueError("z anchors must be a non-empty, strictly increasing list, got {0:s}.".format(str(value)))
        self._z_anchors = z

    @property
    def Z(self): return int(self._z_anchors.size)

    @property
    def shape(self): return (self._X, self._Y)

    def cell_to_metric(self, x, y, z_idx=None):
        """Metric centre of cell (x, y) at height anchor ``z_idx`` (or z = 0)."""
        x = np.asarray(x)
        y = np.asarray(y)
        if np.any((x < 0) | (x >= self._X) | (y < 0) | (y >= self._Y)):
            raise IndexError("Cell index out of range for a {0:d}x{1:d} grid.".format(self._X, self._Y))
        if z_idx is None:
            z = np.zeros(np.broadcast(x, y).shape)
        else:
            z_idx = np.asarray(z_idx)
            if np.any((z_idx < 0) | (z_idx >= self.Z)):
                raise IndexError("Height index out of range, the grid has {0:d} anchors.".format(self.Z))
            z = self._z_anchors[z_idx]
        px = (x - self._X / 2.0 + 0.5) * self._resolution
        py = (y - self._Y / 2.0 + 0.5) * self._resolution
        return np.stack(np.broadcast_arrays(px, py, z), axis=-1).astype(np.float64)

    def metric_to_cell(self, px, py):
        """Continuous cell coordinates of metric positions (inverse of cell_to_metric)."""
        cx = np.asarray(px, dtype=np.float64) / self._resolution + self._X / 2.0 - 0.5
        cy = np.asarray(py, dtype=np.float64) / self._resolution + self._Y / 2.0 - 0.5
        return cx, cy

    def cell_centers(self):
        """(X, Y, 2) array of metric cell centres at z = 0."""
        xs, ys = np.meshgrid(np.arange(self._X), np.arange(self._Y), indexing='ij')
        return self.cell_to_metric(xs, ys)[..., :2]

    def anchor_points(self):
        """(X, Y, Z, 3) array of every cell centre at every height anchor."""
        xs, ys, zs = np.meshgrid(np.arange(self._X), np.arange(self._Y), np.arange(self.Z), indexing='ij')
        return self.cell_to_metric(xs, ys, zs)

    def crop(self, extent):
        """Slices selecting the centred square of side ``extent`` metres."""
        nx = min(self._X, int(round(extent / self._resolution)))
        ny = min(self._Y, int(round(extent / self._resolution)))
        x0 = (self._X - nx) // 2
        y0 = (self._Y - ny) // 2
        return slice(x0, x0 + nx), slice(y0, y0 + ny)

    def downsampled(self, factor):
        return BevGrid(self._X // factor, self._Y // factor, self._resolution * factor, self._z_anchors)

    def __repr__(self):
        return "BevGrid(X={0:d}, Y={1:d}, resolution={2:g}, z_anchors={3:s})".format(
            self._X, self._Y, self._resolution, str(list(self._z_anchors)))


class ProjectionMatrix(object):
    """3x4 matrix taking homogeneous current-ego points to depth-scaled pixels."""

    def __init__(self, matrix, width, height):
        T = np.array(matrix, dtype=np.float64)
        if T.shape != (3, 4):
            raise ValueError("Invalid projection shape {0:s}, expected (3, 4).".format(str(T.shape)))
        self._T = T
        self._width = int(width)
        self._height = int(height)

    @property
    def matrix(self): return self._T.copy()

    @property
    def width(self): return self._width

    @property
    def height(self): return self._height


def make_projection(K, cam_from_ego, ego_at_t, ego_at_now):
    """Projection of current-ego points into a camera at capture time t.

    The chain is current ego -> world (``ego_at_now``) -> ego at t
    (inverse of ``ego_at_t``) -> camera (``cam_from_ego``) -> pixels (K).
    """
    chain = cam_from_ego.compose(ego_at_t.inverse()).compose(ego_at_now)
    return ProjectionMatrix(K.matrix.dot(chain.matrix[:3, :]), K.width, K.height)


def project(T, points):
    """Project metric points through ``T``.

    Returns
    -------
    u, v : pixel column and row
    depth : metres along the optical axis
    valid : depth > EPS_DEPTH and (u, v) inside ``[0, W-1] x [0, H-1]``
    """
    pts = np.asarray(points, dtype=np.float64)
    M = T.matrix
    hom = pts.dot(M[:, :3].T) + M[:, 3]
    depth = hom[..., 2]
    front = depth > EPS_DEPTH
    safe = np.where(front, depth, 1.0)
    u = np.where(front, hom[..., 0] / safe, np.nan)
    v = np.where(front, hom[..., 1] / safe, np.nan)
    with np.errstate(invalid='ignore'):
        valid = front & (u >= 0.0) & (u <= T.width - 1) & (v >= 0.0) & (v <= T.height - 1)
    return u, v, depth, valid


def ego_delta(ego_past, ego_now):
    """Pose taking past-ego coordinates to current-ego coordinates."""
    return ego_now.inverse().compose(ego_past)


def read_rig(path):
    """Read a rig description file.

    Each ``[camera NAME]`` section holds ``fx fy cx cy width height`` and the
    mount ``yaw pitch roll x y z``; an optional ``[trajectory]`` section maps
    ``frame<k>`` to ``x, y, yaw``.

    Returns
    -------
    (CameraRig, dict or None)
    """
    parser = configparser.ConfigParser()
    if not parser.read(path):
        raise ConfigError("Cannot read rig file {0:s}.".format(str(path)))
    return parse_rig(parser)


def parse_rig(parser):
    rig = CameraRig()
    trajectory = None
    for section in parser.sections():
        if section.startswith('camera'):
            s = parser[section]
            name = section[len('camera'):].strip() or 'cam{0:d}'.format(len(rig))
            try:
                K = Intrinsics(s.getfloat('fx'), s.getfloat('fy'), s.getfloat('cx'), s.getfloat('cy'),
                               s.getint('width'), s.getint('height'))
                rig.append(Camera(name, K, s.getfloat('yaw', 0.0), s.getfloat('pitch', 0.0), s.getfloat('roll', 0.0),
                                  (s.getfloat('x', 0.0), s.getfloat('y', 0.0), s.getfloat('z', 0.0))))
            except (TypeError, ValueError) as e:
                raise ConfigError("Invalid camera section [{0:s}]: {1:s}".format(section, str(e)))
        elif section == 'trajectory':
            trajectory = {}
            for key, value in parser[section].items():
                if not key.startswith('frame'):
                    raise ConfigError("Invalid trajectory key \"{0:s}\", expected frame<k>.".format(key))
                parts = [float(v) for v in value.split(',')]
                if len(parts) != 3:
                    raise ConfigError("Trajectory entry {0:s} needs x, y, yaw.".format(key))
                trajectory[int(key[len('frame'):])] = tuple(parts)
    if len(rig) == 0:
        raise ConfigError("The rig description holds no camera section.")
    return rig, trajectory


def rig_to_parser(rig, trajectory=None, parser=None):
    if parser is None:
        parser = configparser.ConfigParser()
    for cam in rig:
        K = cam.intrinsics
        yaw, pitch, roll = cam.mount
        x, y, z = cam.mount_translation
        parser['camera ' + cam.name] = {
            'fx': repr(K.fx), 'fy': repr(K.fy), 'cx': repr(K.cx), 'cy': repr(K.cy),
            'width': str(K.width), 'height': str(K.height),
            'yaw': repr(yaw), 'pitch': repr(pitch), 'roll': repr(roll),
            'x': repr(x), 'y': repr(y), 'z': repr(z)}
    if trajectory is not None:
        parser['trajectory'] = dict(('frame{0:d}'.format(k), ', '.join(repr(float(v)) for v in trajectory[k]))
                                    for k in sorted(trajectory))
    return parser


def write_rig(path, rig, trajectory=None):
    with open(path, 'w') as f:
        rig_to_parser(rig, trajectory).write(f)
