# -*- coding: utf-8 -*-
"""Public API of BevSync."""
from __future__ import print_function, division

from .__version__ import __version__
from .Util import BevSyncError, ConfigError, FormatError, ShapeError, StageError
from .Util.Config import RunConfig
from .Util.Weights import WeightContainer, init_weights
from .Calc.Geometry import BevGrid, Camera, CameraRig, Intrinsics, Pose, make_projection, project
from .Calc.SynthScene import GroundTruth, Scenario, generate_scenario, render_features, render_gt
from .Calc.PoseSync import TemporalBevMap, cross_view_attention, deform_attn, encode_sequence
from .Calc.Warp import EgoDelta, distortion_report, warp_bev
from .Calc.Stpt import attention_matrix, stpt_forward
from .Calc.Heads import PredictionBundle, count_params, run_heads
from .Calc.Instances import InstanceVideo, decode_instances
from .Calc.Metrics import seg_iou, vpq
from .Calc.Augment import BevAug, ImageAug, apply_bev_aug, apply_image_aug
from .Calc.Pipeline import bench, compare_sync, run_pipeline

__all__ = [
    '__version__', 'BevSyncError', 'ConfigError', 'FormatError', 'ShapeError', 'StageError',
    'RunConfig', 'WeightContainer', 'init_weights',
    'BevGrid', 'Camera', 'CameraRig', 'Intrinsics', 'Pose', 'make_projection', 'project',
    'GroundTruth', 'Scenario', 'generate_scenario', 'render_features', 'render_gt',
    'TemporalBevMap', 'cross_view_attention', 'deform_attn', 'encode_sequence',
    'EgoDelta', 'distortion_report', 'warp_bev',
    'attention_matrix', 'stpt_forward',
    'PredictionBundle', 'count_params', 'run_heads',
    'InstanceVideo', 'decode_instances',
    'seg_iou', 'vpq',
    'BevAug', 'ImageAug', 'apply_bev_aug', 'apply_image_aug',
    'bench', 'compare_sync', 'run_pipeline',
]
