# -*- coding: utf-8 -*-
from __future__ import print_function, division

import numpy as np
import matplotlib

from .Common import BasePlot


class AttentionPlot(BasePlot):
    """Tokens x tokens attention matrix of one space-time window.

    Frame boundaries of the window tokens are drawn as thin lines.
    """

    def __init__(self, A, frames=1, **kwargs):
        BasePlot.__init__(self, **kwargs)
        self._A = np.asarray(A, dtype=np.float64)
        if self._A.ndim != 2 or self._A.shape[0] != self._A.shape[1]:
            raise ValueError("Invalid attention matrix shape {0:s}, expected (N, N).".format(str(self._A.shape)))
        self._frames = int(frames)

    @property
    def matrix(self): return self._A

    def draw(self):
        image = self.axes.imshow(self._A, **self.props)
        N = self._A.shape[0]
        per_frame = N // max(self._frames, 1)
        for f in range(1, self._frames):
            self.axes.axhline(f * per_frame - 0.5, color='white', lw=0.5)
            self.axes.axvline(f * per_frame - 0.5, color='white', lw=0.5)
        self.figure.colorbar(image, ax=self.axes)
        if not self.axes.get_xlabel():
            self.xlabel(u"key token")
        if not self.axes.get_ylabel():
            self.ylabel(u"query token")
        return self


class InstancePlot(BasePlot):
    """Instance video on the BEV plane.

    Frame 0 is drawn with full opacity, later frames progressively
    lighter; every id keeps its colour over time. Image rows are the
    x (forward) cells, columns the y cells.
    """

    CMAP = 'tab20'

    def __init__(self, video, **kwargs):
        BasePlot.__init__(self, **kwargs)
        self._video = video

    @property
    def video(self): return self._video

    def colors(self):
        """id -> RGB, cycling through the colour map."""
        base = matplotlib.colormaps[self.props['cmap']]
        return dict((i, base(k % base.N)[:3]) for k, i in enumerate(self._video.ids()))

    def draw(self):
        maps = self._video.maps
        lut = self.colors()
        F = maps.shape[0]
        for t in range(F - 1, -1, -1):
            rgba = np.zeros(maps.shape[1:] + (4,))
            alpha = 1.0 if t == 0 else 0.15 + 0.5 * (F - t) / F
            for i, color in lut.items():
                rgba[maps[t] == i] = color + (alpha,)
            self.axes.imshow(rgba, interpolation='nearest')
        if not self.axes.get_xlabel():
            self.xlabel(u"y cell")
        if not self.axes.get_ylabel():
            self.ylabel(u"x cell")
        return self
