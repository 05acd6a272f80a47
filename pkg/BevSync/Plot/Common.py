# -*- coding: utf-8 -*-
from __future__ import print_function, division

import matplotlib
import matplotlib.figure
import matplotlib.pyplot as plt

import numpy as np

from ..Util.Formats import to_gray

# Overlay colours (RGB)
QUERY_COLOR = (40, 110, 255)
TOP_COLOR = (255, 40, 40)
WINDOW_COLOR = (40, 200, 70)


def token_cells(h, w, window, window_id, frames, shift=(0, 0)):
    """Plane cell and frame of every token of a space-time window.

    Tokens are ordered (frame, row, col) inside the window; the shift is
    the cyclic shift applied before partitioning.

    Returns
    -------
    (N, 3) int array of (frame, row, col)
    """
    wh, ww = window
    nw = w // ww
    if not 0 <= window_id < (h // wh) * nw:
        raise IndexError("Window {0:d} out of range for a {1:d}x{2:d} plane.".format(window_id, h, w))
    r0 = (window_id // nw) * wh
    c0 = (window_id % nw) * ww
    f, a, b = np.meshgrid(np.arange(frames), np.arange(wh), np.arange(ww), indexing='ij')
    rows = (r0 + a + shift[0]) % h
    cols = (c0 + b + shift[1]) % w
    return np.stack([f.ravel(), rows.ravel(), cols.ravel()], axis=-1)


def top_k_per_frame(row, cells, k=4):
    """Indices of the ``k`` largest attention weights of ``row`` for every frame but the first."""
    out = {}
    for f in np.unique(cells[:, 0]):
        if f == 0:
            continue
        idx = np.nonzero(cells[:, 0] == f)[0]
        order = idx[np.argsort(-row[idx], kind='stable')]
        out[int(f)] = order[:k]
    return out


def attention_overlay(background, A, query_cells, key_cells, query, k=4, scale=8):
    """RGB image of the BEV plane marking a query cell and its top attended cells.

    Parameters
    ----------
    background : (h, w) array shown in gray
    A : (Nq, Nk) attention matrix of one window
    query_cells, key_cells : outputs of :func:`token_cells` for queries and keys
    query : token index of the query
    k : cells marked per historical frame
    scale : pixels per cell

    Returns
    -------
    image : (h*scale, w*scale, 3) uint8
    marked : list of (frame, row, col) of the marked cells
    """
    gray = to_gray(background)
    img = np.repeat(gray[..., None], 3, axis=-1)
    inside = np.zeros(gray.shape, dtype=bool)
    inside[key_cells[:, 1], key_cells[:, 2]] = True
    img[inside] = (0.5 * img[inside] + 0.5 * np.array(WINDOW_COLOR)).astype(np.uint8)
    marked = []
    row = np.asarray(A)[query]
    for f, idx in sorted(top_k_per_frame(row, key_cells, k).items()):
        for i in idx:
            img[key_cells[i, 1], key_cells[i, 2]] = TOP_COLOR
            marked.append(tuple(int(v) for v in key_cells[i]))
    img[query_cells[query, 1], query_cells[query, 2]] = QUERY_COLOR
    img = np.repeat(np.repeat(img, scale, axis=0), scale, axis=1)
    return img, marked


class BasePlot(object):
    """Shared figure handling of the BEV plots."""

    CMAP = 'viridis'

    def __init__(self, **kwargs):
        self.figure = kwargs.get('figure', matplotlib.figure.Figure(tight_layout=True))
        if 'axis' in kwargs and 'axes' not in kwargs:
            kwargs['axes'] = kwargs['axis']
        self.axes = kwargs.get('axes', self.figure.add_subplot(111))
        self.props = kwargs.get('props', None)

    @property
    def figure(self): return self._figure

    @figure.setter
    def figure(self, value): self._figure = value

    @property
    def axes(self): return self._axes

    @axes.setter
    def axes(self, value): self._axes = value

    @property
    def props(self): return self._props

    @props.setter
    def props(self, value):
        self._props = dict(cmap=self.CMAP, interpolation='nearest')
        if value is not None:
            self._props.update(value)

    def title(self, title):
        self.axes.set_title(title)

    def xlabel(self, xlabel):
        self.axes.set_xlabel(xlabel)

    def ylabel(self, ylabel):
        self.axes.set_ylabel(ylabel)

    def show(self):
        plt.show()

    def savefig(self, *args, **kwargs):
        self.figure.savefig(*args, **kwargs)
