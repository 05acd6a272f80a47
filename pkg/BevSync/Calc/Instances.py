# -*- coding: utf-8 -*-
"""Decoding of head outputs into instance videos with temporally stable ids."""
from __future__ import print_function, division

import logging
import os

import numpy as np
from scipy.ndimage import maximum_filter

from ..Util import FormatError, ShapeError
from ..Util.Formats import read_jsonl, write_jsonl
from ..Util.Tensor import F32, parallel_rows, read_btf, write_btf

logger = logging.getLogger(__name__)

MAPS = 'instances.btf'
TRACKS = 'tracks.jsonl'


def find_centers(heatmap, threshold=0.1, max_k=100):
    """Local maxima of a centre heatmap.

    A cell is a centre when it equals the maximum of its 3x3 neighbourhood
    and its score is at least ``threshold``. Of a plateau of equal adjacent
    maxima only the first in (row, col) order is kept.

    Returns
    -------
    list of (row, col, score), highest score first, at most ``max_k`` long
    """
    hm = np.asarray(heatmap, dtype=np.float64)
    if hm.ndim != 2:
        raise ShapeError("A heatmap is (X, Y), got {0:s}.".format(str(hm.shape)))
    peaks = (hm == maximum_filter(hm, size=3, mode='constant', cval=-np.inf)) & (hm >= threshold)
    rows, cols = np.nonzero(peaks)
    scores = hm[rows, cols]
    order = np.lexsort((cols, rows, -scores))
    out = []
    for i in order:
        r, c = int(rows[i]), int(cols[i])
        if any(abs(r - rr) <= 1 and abs(c - cc) <= 1 for rr, cc, _ in out):
            continue
        out.append((r, c, float(scores[i])))
        if len(out) >= max_k:
            break
    return out


def assign_pixels(seg, offset, centers):
    """Id map of one frame.

    Every cell with ``seg > 0.5`` votes for ``cell + offset`` and joins the
    nearest centre; ids are the 1-based positions in ``centers``.
    """
    seg = np.asarray(seg)
    offset = np.asarray(offset, dtype=np.float64)
    X, Y = seg.shape
    ids = np.zeros((X, Y), dtype=np.uint32)
    fg = seg > 0.5
    if not centers or not np.any(fg):
        return ids
    rows, cols = np.nonzero(fg)
    votes = np.stack([rows + offset[0, rows, cols], cols + offset[1, rows, cols]], axis=-1)
    pos = np.array([(r, c) for r, c, _ in centers], dtype=np.float64)
    dist = np.sum((votes[:, None, :] - pos[None, :, :]) ** 2, axis=-1)
    ids[rows, cols] = np.argmin(dist, axis=1) + 1
    return ids


def centroids(id_map):
    """id -> (row, col, area) over the non-zero ids of a map."""
    out = {}
    for i in np.unique(id_map):
        if i == 0:
            continue
        rows, cols = np.nonzero(id_map == i)
        out[int(i)] = (float(np.mean(rows)), float(np.mean(cols)), int(rows.size))
    return out


class InstanceVideo(object):
    """Per-frame (X, Y) id maps; 0 is background.

    The track table maps every id to its per-frame centroid and is derived
    from the maps, so an id appears in the table exactly for the frames in
    which it appears in a map.
    """

    def __init__(self, maps):
        maps = np.asarray(maps)
        if maps.ndim != 3:
            raise ShapeError("An instance video is (F, X, Y), got {0:s}.".format(str(maps.shape)))
        self._maps = maps.astype(np.uint32)
        self._tracks = None

    @property
    def maps(self): return self._maps

    @property
    def frames(self): return self._maps.shape[0]

    @property
    def shape(self): return self._maps.shape[1:]

    @property
    def tracks(self):
        """id -> {frame: (row, col)}."""
        if self._tracks is None:
            tracks = {}
            for t, m in enumerate(self._maps):
                for i, (r, c, _) in centroids(m).items():
                    tracks.setdefault(i, {})[t] = (r, c)
            self._tracks = tracks
        return self._tracks

    def ids(self):
        return sorted(self.tracks)

    def records(self):
        out = []
        for t, m in enumerate(self._maps):
            for i, (r, c, area) in sorted(centroids(m).items()):
                out.append({'frame': t, 'id': i, 'row': r, 'col': c, 'area': area})
        return out

    def relabeled(self, mapping):
        """Apply an id mapping (dict); ids missing from it keep their value."""
        lut = dict((int(k), int(v)) for k, v in mapping.items())
        out = self._maps.copy()
        for old, new in lut.items():
            out[self._maps == old] = new
        return InstanceVideo(out)

    def crop(self, slices):
        return InstanceVideo(self._maps[(slice(None),) + tuple(slices)])

    def save(self, directory):
        if not os.path.isdir(directory):
            os.makedirs(directory)
        write_btf(os.path.join(directory, MAPS), self._maps, dtype=F32)
        write_jsonl(os.path.join(directory, TRACKS), self.records())

    @classmethod
    def load(cls, directory):
        path = os.path.join(directory, MAPS)
        if not os.path.isfile(path):
            raise FormatError("No instance maps at {0:s}.".format(path))
        video = cls(np.rint(read_btf(path)).astype(np.uint32))
        tracks = os.path.join(directory, TRACKS)
        if os.path.isfile(tracks):
            listed = set((r['frame'], r['id']) for r in read_jsonl(tracks))
            present = set((t, i) for i, frames in video.tracks.items() for t in frames)
            if listed != present:
                raise FormatError("Track table of {0:s} disagrees with the id maps.".format(str(directory)))
        return video

    def __eq__(self, other):
        return isinstance(other, InstanceVideo) and np.array_equal(self._maps, other._maps)


def associate_tracks(frames, flow, radius=3.0):
    """Link per-frame instances into tracks.

    Parameters
    ----------
    frames : list of (centers, id_map)
        ``centers`` as returned by :func:`find_centers`, ``id_map`` with
        1-based local ids as returned by :func:`assign_pixels`.
    flow : (F, 2, X, Y) cell displacement to the next frame
    radius : float
        Matching radius in cells.

    Each instance centroid is moved by the mean flow over its cells; the
    centres of the next frame, in score order, take the nearest free
    propagated centroid within ``radius`` and inherit its id. Unmatched
    centres start new ids.

    Returns
    -------
    InstanceVideo
    """
    if len(frames) == 0:
        raise ValueError("Track association needs at least one frame.")
    flow = np.asarray(flow, dtype=np.float64)
    next_id = 1
    maps = []
    previous = []  # (global id, propagated position)
    for t, (centers, id_map) in enumerate(frames):
        id_map = np.asarray(id_map)
        lut = {}
        free = list(range(len(previous)))
        for k, (r, c, _) in enumerate(centers):
            best = None
            best_d = radius
            for j in free:
                d = np.hypot(previous[j][1][0] - r, previous[j][1][1] - c)
                if d <= best_d:
                    best, best_d = j, d
            if best is None:
                lut[k + 1] = next_id
                next_id += 1
            else:
                lut[k + 1] = previous[best][0]
                free.remove(best)
        global_map = np.zeros(id_map.shape, dtype=np.uint32)
        for local, gid in lut.items():
            global_map[id_map == local] = gid
        maps.append(global_map)
        previous = []
        for k, (r, c, _) in enumerate(centers):
            cells = id_map == k + 1
            if np.any(cells):
                pos = np.array([np.mean(np.nonzero(cells)[0]), np.mean(np.nonzero(cells)[1])])
                motion = flow[t][:, cells].mean(axis=1)
            else:
                pos = np.array([r, c], dtype=np.float64)
                motion = np.zeros(2)
            previous.append((lut[k + 1], pos + motion))
    return InstanceVideo(np.stack(maps, axis=0))


def decode_frame(seg, center, offset, threshold=0.1, max_k=100):
    centers = find_centers(center, threshold, max_k)
    return centers, assign_pixels(seg, offset, centers)


def decode_instances(bundle, threshold=0.1, max_k=100, radius=3.0, workers=None):
    """Full decode of a PredictionBundle into an InstanceVideo (vehicle class)."""
    mask = bundle.vehicle_mask()
    frames = parallel_rows(lambda t: decode_frame(mask[t], bundle.center[t, 0], bundle.offset[t], threshold, max_k),
                           bundle.frames, workers)
    video = associate_tracks(frames, bundle.flow, radius)
    logger.debug("Decoded %d tracks over %d frames", len(video.ids()), video.frames)
    return video
