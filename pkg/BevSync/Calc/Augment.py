# -*- coding: utf-8 -*-
"""Image-view and BEV augmentations.

Image augmentations act on camera feature maps and update the intrinsics
so that the projection chain stays consistent. BEV augmentations act on
BEV features and every label raster alike; offset and flow channels are
transformed as vectors.
"""
from __future__ import print_function, division

import logging

import numpy as np

from ..Util import ShapeError
from ..Util.Tensor import bilinear_sample
from .Geometry import Intrinsics, rot_2d
from .Heads import PredictionBundle
from .Instances import InstanceVideo
from .SynthScene import GroundTruth

logger = logging.getLogger(__name__)


class ImageAug(object):
    """Scaling, in-plane rotation and horizontal mirroring of one image.

    The transform is the affine map ``A`` taking original pixels ``(u, v)``
    to augmented pixels, built about the image centre: scale and rotate
    first, then mirror.
    """

    def __init__(self, scale=1.0, rotation=0.0, hflip=False):
        if not scale > 0:
            raise ValueError("Invalid image scale {0:f}, expected a positive value.".format(scale))
        self._scale = float(scale)
        self._rotation = float(rotation)
        self._hflip = bool(hflip)

    @classmethod
    def identity(cls):
        return cls()

    @classmethod
    def sample(cls, rng, scale_range=(0.9, 1.1), max_rotation=0.1, flip=True):
        scale = rng.uniform(scale_range[0], scale_range[1])
        rotation = rng.uniform(-max_rotation, max_rotation) if max_rotation > 0 else 0.0
        hflip = bool(flip and rng.random() < 0.5)
        return cls(scale, rotation, hflip)

    @property
    def scale(self): return self._scale

    @property
    def rotation(self): return self._rotation

    @property
    def hflip(self): return self._hflip

    @property
    def is_identity(self):
        return self._scale == 1.0 and self._rotation == 0.0 and not self._hflip

    def matrix(self, width, height):
        """3x3 affine pixel transform of a ``width`` x ``height`` image."""
        cu, cv = 0.5 * (width - 1), 0.5 * (height - 1)
        to_center = np.array([[1.0, 0.0, -cu], [0.0, 1.0, -cv], [0.0, 0.0, 1.0]])
        back = np.array([[1.0, 0.0, cu], [0.0, 1.0, cv], [0.0, 0.0, 1.0]])
        S = np.eye(3)
        S[:2, :2] = self._scale * rot_2d(self._rotation)
        flip = np.diag([-1.0 if self._hflip else 1.0, 1.0, 1.0])
        return back.dot(flip).dot(S).dot(to_center)

    def apply_points(self, u, v, width, height):
        A = self.matrix(width, height)
        u = np.asarray(u, dtype=np.float64)
        v = np.asarray(v, dtype=np.float64)
        return A[0, 0] * u + A[0, 1] * v + A[0, 2], A[1, 0] * u + A[1, 1] * v + A[1, 2]

    def __repr__(self):
        return "ImageAug(scale={0:g}, rotation={1:g}, hflip={2:s})".format(
            self._scale, self._rotation, str(self._hflip))


def apply_image_aug(features, K, aug):
    """Resample an (H, W, C) feature map and update its intrinsics.

    Returns
    -------
    features : numpy.ndarray
        Augmented map, zero where the source pixel lies outside the input.
    K : Intrinsics
        ``A K``, so that every 3D point projects under the new intrinsics
        onto the augmented position of its original projection.
    """
    features = np.asarray(features)
    if aug.is_identity:
        return features.copy(), K
    H, W = features.shape[:2]
    if (W, H) != (K.width, K.height):
        raise ShapeError("Feature map is {0:d}x{1:d} but the intrinsics describe {2:d}x{3:d}.".format(
            W, H, K.width, K.height))
    A = aug.matrix(W, H)
    Ainv = np.linalg.inv(A)
    vv, uu = np.meshgrid(np.arange(H, dtype=np.float64), np.arange(W, dtype=np.float64), indexing='ij')
    src_u = Ainv[0, 0] * uu + Ainv[0, 1] * vv + Ainv[0, 2]
    src_v = Ainv[1, 0] * uu + Ainv[1, 1] * vv + Ainv[1, 2]
    src_u = np.where(np.abs(src_u - np.rint(src_u)) < 1e-9, np.rint(src_u), src_u)
    src_v = np.where(np.abs(src_v - np.rint(src_v)) < 1e-9, np.rint(src_v), src_v)
    out, _ = bilinear_sample(features, np.stack([src_v, src_u], axis=-1))
    return out.astype(features.dtype, copy=False), Intrinsics.from_matrix(A.dot(K.matrix), W, H)


def augment_feature_image(image, aug):
    """:func:`apply_image_aug` on a FeatureImage; camera and hit points follow."""
    features, K = apply_image_aug(image.features, image.intrinsics, aug)
    hits = image.hits
    if hits is not None and not aug.is_identity:
        hits, _ = apply_image_aug(np.nan_to_num(hits), image.intrinsics, aug)
        missing, _ = apply_image_aug(np.isnan(image.hits[..., :1]).astype(np.float64), image.intrinsics, aug)
        hits = np.where(missing > 0.0, np.nan, hits)
    return image.replace(features=features, camera=image.camera.with_intrinsics(K), hits=hits)


class BevAug(object):
    """Rigid transform of the BEV plane about the grid centre.

    Applied in the order: mirror (``flip_x`` negates x, ``flip_y`` negates
    y), counter-clockwise rotation by ``k`` right angles, then the
    continuous rotation ``yaw`` and scaling ``scale``. Without the
    continuous part the transform is an exact permutation of cells.
    """

    def __init__(self, k=0, flip_x=False, flip_y=False, yaw=0.0, scale=1.0):
        if not scale > 0:
            raise ValueError("Invalid BEV scale {0:f}, expected a positive value.".format(scale))
        self._k = int(k) % 4
        self._flip_x = bool(flip_x)
        self._flip_y = bool(flip_y)
        self._yaw = float(yaw)
        self._scale = float(scale)

    @classmethod
    def sample(cls, rng, flip=True, max_yaw=0.0, scale_range=(1.0, 1.0)):
        k = int(rng.integers(4))
        flip_x = bool(flip and rng.random() < 0.5)
        flip_y = bool(flip and rng.random() < 0.5)
        yaw = rng.uniform(-max_yaw, max_yaw) if max_yaw > 0 else 0.0
        scale = rng.uniform(scale_range[0], scale_range[1]) if scale_range[1] > scale_range[0] else scale_range[0]
        return cls(k, flip_x, flip_y, yaw, scale)

    @property
    def k(self): return self._k

    @property
    def flip_x(self): return self._flip_x

    @property
    def flip_y(self): return self._flip_y

    @property
    def yaw(self): return self._yaw

    @property
    def scale(self): return self._scale

    @property
    def is_right_angle(self):
        return self._yaw == 0.0 and self._scale == 1.0

    def linear(self):
        """2x2 matrix acting on centred cell coordinates and on cell vectors."""
        M = np.diag([-1.0 if self._flip_x else 1.0, -1.0 if self._flip_y else 1.0])
        quarter = np.array([[0.0, -1.0], [1.0, 0.0]])
        M = np.linalg.matrix_power(quarter, self._k).dot(M)
        return self._scale * rot_2d(self._yaw).dot(M)

    def apply_cells(self, points, shape):
        """Map (..., 2) continuous cell coordinates of an (X, Y) grid."""
        c = 0.5 * (np.asarray(shape, dtype=np.float64) - 1.0)
        pts = np.asarray(points, dtype=np.float64)
        return (pts - c).dot(self.linear().T) + c

    def apply_vectors(self, vectors):
        return np.asarray(vectors, dtype=np.float64).dot(self.linear().T)

    def __repr__(self):
        return "BevAug(k={0:d}, flip_x={1:s}, flip_y={2:s}, yaw={3:g}, scale={4:g})".format(
            self._k, str(self._flip_x), str(self._flip_y), self._yaw, self._scale)


def _spatial(arr, aug, x_axis, nearest=False):
    """Move the (x, y) plane at ``x_axis``, ``x_axis + 1`` of ``arr``."""
    arr = np.asarray(arr)
    x_axis = x_axis % arr.ndim
    y_axis = x_axis + 1
    X, Y = arr.shape[x_axis], arr.shape[y_axis]
    if aug.is_right_angle:
        if aug.k % 2 == 1 and X != Y:
            raise ShapeError("A quarter turn needs a square grid, got {0:d}x{1:d}.".format(X, Y))
        out = arr
        if aug.flip_x:
            out = np.flip(out, axis=x_axis)
        if aug.flip_y:
            out = np.flip(out, axis=y_axis)
        return np.ascontiguousarray(np.rot90(out, aug.k, axes=(x_axis, y_axis)))
    plane = np.moveaxis(arr, (x_axis, y_axis), (0, 1))
    xs, ys = np.meshgrid(np.arange(X, dtype=np.float64), np.arange(Y, dtype=np.float64), indexing='ij')
    c = np.array([0.5 * (X - 1), 0.5 * (Y - 1)])
    src = (np.stack([xs, ys], axis=-1) - c).dot(np.linalg.inv(aug.linear()).T) + c
    if nearest:
        src = np.floor(src + 0.5)
    out, _ = bilinear_sample(plane, src)
    return np.moveaxis(out.astype(arr.dtype, copy=False), (0, 1), (x_axis, y_axis))


def _vector_field(arr, aug, axis):
    """Transform an array holding (x, y) vector components along ``axis``."""
    arr = np.asarray(arr)
    moved = np.moveaxis(arr, axis, -1)
    out = np.moveaxis(aug.apply_vectors(moved), -1, axis)
    return out.astype(arr.dtype, copy=False)


def augment_raster(arr, aug, vector_axis=None, nearest=False):
    """Transform a raster whose last two axes are (X, Y).

    When ``vector_axis`` is given the components along it are (x, y)
    vectors in cells and are transformed along with the cells.
    """
    out = _spatial(arr, aug, -2, nearest)
    if vector_axis is not None:
        out = _vector_field(out, aug, vector_axis)
    return out


def augment_bev_features(B, aug):
    """Transform a (..., X, Y, C) BEV feature stack."""
    return _spatial(B, aug, -3)


def augment_ground_truth(gt, aug):
    shape = gt.instance.shape[-2:]
    centers = []
    for frame_centers in gt.centers:
        moved = {}
        for i, (cx, cy) in frame_centers.items():
            p = aug.apply_cells([cx, cy], shape)
            moved[i] = (float(p[0]), float(p[1]))
        centers.append(moved)
    return GroundTruth(gt.frames,
                       augment_raster(gt.seg, aug, nearest=True),
                       augment_raster(gt.instance, aug, nearest=True).astype(np.uint32),
                       augment_raster(gt.center, aug),
                       augment_raster(gt.offset, aug, vector_axis=1),
                       augment_raster(gt.flow, aug, vector_axis=1),
                       augment_raster(gt.hdmap, aug, nearest=True),
                       centers)


def augment_predictions(bundle, aug):
    return PredictionBundle(augment_raster(bundle.seg, aug),
                            augment_raster(bundle.center, aug),
                            augment_raster(bundle.offset, aug, vector_axis=1),
                            augment_raster(bundle.flow, aug, vector_axis=1),
                            augment_raster(bundle.hdmap, aug))


def augment_instances(video, aug):
    return InstanceVideo(augment_raster(video.maps, aug, nearest=True))


def apply_bev_aug(features, labels, aug):
    """Apply one BEV transform to features and their labels.

    Parameters
    ----------
    features : numpy.ndarray or None
        (..., X, Y, C) BEV features.
    labels : GroundTruth, PredictionBundle, InstanceVideo or None

    Returns
    -------
    (features, labels) transformed alike
    """
    out_features = None if features is None else augment_bev_features(features, aug)
    if labels is None:
        out_labels = None
    elif isinstance(labels, GroundTruth):
        out_labels = augment_ground_truth(labels, aug)
    elif isinstance(labels, PredictionBundle):
        out_labels = augment_predictions(labels, aug)
    elif isinstance(labels, InstanceVideo):
        out_labels = augment_instances(labels, aug)
    else:
        raise TypeError("Invalid labels, expected GroundTruth, PredictionBundle or InstanceVideo, not {0:s}.".format(
            type(labels).__name__))
    logger.debug("Applied %r", aug)
    return out_features, out_labels
