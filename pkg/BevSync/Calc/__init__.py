# -*- coding: utf-8 -*-
from __future__ import print_function, division

import numpy as np


def ray_tracing(x, y, poly):
    """Classical ray tracing test whether points lie inside a polygon.

    Works on arrays of points at once; ``poly`` is a (n, 2) sequence of
    vertices. Points exactly on an edge may fall on either side.
    """
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    poly = np.asarray(poly, dtype=np.float64)
    n = len(poly)
    inside = np.zeros(np.broadcast(x, y).shape, dtype=bool)
    p1x, p1y = poly[0]
    for i in range(1, n + 1):
        p2x, p2y = poly[i % n]
        if p1y != p2y:
            crosses = (y >= min(p1y, p2y)) & (y < max(p1y, p2y))
            xints = (y - p1y) * (p2x - p1x) / (p2y - p1y) + p1x
            inside ^= crosses & (x < xints)
        p1x, p1y = p2x, p2y
    return inside


def box_corners(center, size, yaw):
    """Corners of a rotated rectangle, counter-clockwise."""
    cx, cy = center
    hl, hw = 0.5 * size[0], 0.5 * size[1]
    c, s = np.cos(yaw), np.sin(yaw)
    local = np.array([[hl, hw], [-hl, hw], [-hl, -hw], [hl, -hw]])
    return local.dot(np.array([[c, s], [-s, c]])) + np.array([cx, cy])
