# -*- coding: utf-8 -*-
from __future__ import print_function, division, absolute_import

from .Plots import AttentionPlot, InstancePlot
from .Common import attention_overlay, token_cells, top_k_per_frame
