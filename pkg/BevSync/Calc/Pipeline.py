# -*- coding: utf-8 -*-
"""Stage orchestration of a run: synth, encode, predict, heads, decode, eval.

Every stage reads the artifacts of the previous ones from the run
directory and writes its own, so a run can be resumed at any stage::

    <out>/config.ini          normalised configuration
    <out>/scenario.ini        scene and camera rig
    <out>/weights/            model weights and manifest
    <out>/features/           camera feature maps and intrinsics
    <out>/gt/                 label rasters
    <out>/bev.btf             temporal BEV map
    <out>/labels/             label rasters aligned with bev.btf
    <out>/D0.btf              decoder output
    <out>/attention/          cached window attention
    <out>/predictions/        head outputs
    <out>/instances/          predicted instance video and tracks
    <out>/gt_instances/       label instance video and tracks
    <out>/report.json         evaluation report
"""
from __future__ import print_function, division

import contextlib
import csv
import logging
import os
import time

import numpy as np

from ..Util import BevSyncError, ConfigError, StageError
from ..Util.Config import RunConfig
from ..Util.Formats import read_json, write_json
from ..Util.Tensor import read_btf, write_btf
from ..Util.Weights import WeightContainer, init_weights
from .Augment import BevAug, ImageAug, apply_bev_aug, augment_feature_image
from .Geometry import CameraRig, Intrinsics, read_rig
from .Heads import PredictionBundle, count_params, enumerate_params, model_specs, run_heads
from .Instances import InstanceVideo, decode_instances
from .Metrics import evaluate
from .PoseSync import TemporalBevMap, encode_sequence, save_feature_sets
from .Stpt import stpt_forward
from .SynthScene import (Box, FeatureImage, GroundTruth, Scenario, generate_scenario, read_scenario,
                         render_features, render_gt, write_scenario)
from .Warp import EgoDelta, composition_gap, distortion_report, ground_encoder, warp_bev

logger = logging.getLogger(__name__)

STAGES = ('synth', 'encode', 'predict', 'heads', 'decode', 'eval')

# Published size and latency of the full-scale model; context only.
REFERENCE = {'param_count': 9.42e6, 'latency_ms': 165.0,
             'note': 'full-scale model on server hardware, not reproducible at desk scale'}

# Seed streams of the augmentations, kept apart from scene and weight seeds.
_IMAGE_AUG_STREAM = 1
_BEV_AUG_STREAM = 2


@contextlib.contextmanager
def stage(name, timings=None):
    """Time a stage and turn its failures into :class:`StageError`."""
    start = time.perf_counter()
    try:
        yield
    except (StageError, ConfigError):
        raise
    except (BevSyncError, ValueError, IndexError, KeyError, IOError, OSError) as e:
        logger.error("Stage %s failed: %s", name, e)
        raise StageError(name, str(e))
    elapsed = 1000.0 * (time.perf_counter() - start)
    if timings is not None:
        timings[name] = elapsed
    logger.info("Stage %-8s done in %9.1f ms", name, elapsed)


def _path(out, *parts):
    return os.path.join(out, *parts)


def _require(stage_name, path):
    if not os.path.exists(path):
        raise StageError(stage_name, "missing input artifact {0:s}, run the earlier stages first".format(path))
    return path


def _dtype(cfg):
    return np.dtype(cfg.dtype)


def _rng(cfg, stream):
    return np.random.default_rng([int(cfg.seed) & 0xFFFFFFFF, (int(cfg.seed) >> 32) & 0xFFFFFFFF, stream])


def make_rig(cfg):
    if cfg.rig:
        rig, _ = read_rig(cfg.rig)
        return rig
    return CameraRig.desk(cfg.cameras, cfg.image_size, cfg.fov, cfg.camera_height, cfg.camera_pitch)


def make_scenario(cfg):
    """Scenario of the configuration: a scenario file or a seeded random scene."""
    if cfg.scenario:
        scn = read_scenario(cfg.scenario)
        if (scn.T, scn.T_future) != (cfg.T, cfg.T_future):
            raise ConfigError("Scenario {0:s} covers T={1:d}, T'={2:d}, the configuration asks for {3:d}, {4:d}.".format(
                cfg.scenario, scn.T, scn.T_future, cfg.T, cfg.T_future))
        return scn.with_rig(make_rig(cfg)) if cfg.rig else scn
    return generate_scenario(cfg.seed, make_rig(cfg), cfg.T, cfg.T_future, cfg.frame_period, cfg.vehicles,
                             cfg.pedestrians, cfg.ego_speed, cfg.ego_yaw_rate, extent=cfg.X * cfg.resolution)


def make_weights(cfg):
    return init_weights(model_specs(cfg), cfg.seed, dtype=_dtype(cfg))


def load_weights(cfg, out):
    """Weights of a run directory, or freshly initialised ones when it has none."""
    path = _path(out, 'weights')
    if os.path.isdir(path):
        return WeightContainer.load(path, _dtype(cfg))
    return make_weights(cfg)


def render_inputs(cfg, scn):
    """Camera features of frames 0, -1, ..., -T, with image augmentation when enabled.

    One augmentation is drawn per camera and shared by its frames, so the
    augmented rig stays a rig. Returns the (possibly re-rigged) scenario and
    the feature sets.
    """
    feature_sets = [render_features(scn, -t, cfg.C, _dtype(cfg), cfg.workers) for t in range(cfg.T + 1)]
    if cfg.aug not in ('img', 'both'):
        return scn, feature_sets
    rng = _rng(cfg, _IMAGE_AUG_STREAM)
    augs = [ImageAug.sample(rng, cfg.image_scale, cfg.image_rotation, cfg.image_flip) for _ in scn.rig]
    feature_sets = [[augment_feature_image(img, a) for img, a in zip(images, augs)] for images in feature_sets]
    rig = CameraRig([img.camera for img in feature_sets[0]])
    logger.debug("Image augmentations: %s", augs)
    return scn.with_rig(rig), feature_sets


def save_inputs(out, feature_sets):
    directory = _path(out, 'features')
    save_feature_sets(directory, feature_sets)
    for img in feature_sets[0]:
        write_btf(os.path.join(directory, 'K_{0:s}.btf'.format(img.camera.name)), img.intrinsics.matrix)


def load_inputs(out, scn):
    directory = _require('encode', _path(out, 'features'))
    rig = []
    for cam in scn.rig:
        path = os.path.join(directory, 'K_{0:s}.btf'.format(cam.name))
        if os.path.isfile(path):
            cam = cam.with_intrinsics(Intrinsics.from_matrix(read_btf(path), cam.intrinsics.width,
                                                             cam.intrinsics.height))
        rig.append(cam)
    feature_sets = []
    for t in range(scn.T + 1):
        images = []
        for cam in rig:
            path = _require('encode', os.path.join(directory, 'frame{0:d}_{1:s}.btf'.format(-t, cam.name)))
            images.append(FeatureImage(cam, -t, read_btf(path), None))
        feature_sets.append(images)
    return scn.with_rig(CameraRig(rig)), feature_sets


def run_synth(cfg, out, timings=None):
    with stage('synth', timings):
        scn = make_scenario(cfg)
        gt = render_gt(scn, cfg.grid(), center_sigma=cfg.center_sigma, classes=cfg.classes)
        # the scenario file keeps the mounted rig; augmented intrinsics go with the features
        write_scenario(_path(out, 'scenario.ini'), scn)
        scn, feature_sets = render_inputs(cfg, scn)
        save_inputs(out, feature_sets)
        gt.save(_path(out, 'gt'))
        if not os.path.isdir(_path(out, 'weights')):
            make_weights(cfg).save(_path(out, 'weights'))
    return scn, feature_sets, gt


def align_temporal_map(cfg, scn, feature_sets, weights):
    """Temporal BEV map under the configured alignment (``sync`` or ``warp``)."""
    grid = cfg.grid()
    sync = cfg.temporal_alignment == 'sync'
    tbm = encode_sequence(scn, feature_sets, grid, weights, cfg.posesync_heads, cfg.posesync_points,
                          cfg.posesync_layers, cfg.aggregation, cfg.workers, synchronise=sync)
    if sync:
        return tbm
    ego_now = scn.ego_pose(0)
    B = tbm.B.copy()
    for t in range(1, tbm.T + 1):
        B[t], _ = warp_bev(B[t], grid, EgoDelta.from_poses(scn.ego_pose(-t), ego_now))
    return TemporalBevMap(B, tbm.tags)


def run_encode(cfg, out, timings=None):
    with stage('encode', timings):
        scn = read_scenario(_require('encode', _path(out, 'scenario.ini')))
        scn, feature_sets = load_inputs(out, scn)
        gt = GroundTruth.load(_require('encode', _path(out, 'gt')))
        weights = load_weights(cfg, out)
        tbm = align_temporal_map(cfg, scn, feature_sets, weights)
        if cfg.aug in ('bev', 'both'):
            aug = BevAug.sample(_rng(cfg, _BEV_AUG_STREAM), cfg.bev_flip, cfg.bev_yaw, cfg.bev_scale)
            B, gt = apply_bev_aug(tbm.B, gt, aug)
            tbm = TemporalBevMap(B, tbm.tags)
        tbm.save(_path(out, 'bev.btf'))
        gt.save(_path(out, 'labels'))
    return tbm, gt


def run_predict(cfg, out, timings=None):
    with stage('predict', timings):
        tbm = TemporalBevMap.load(_require('predict', _path(out, 'bev.btf')))
        weights = load_weights(cfg, out)
        D0, _, cache = stpt_forward(tbm.B, weights, cfg.T_future, cfg.stpt_depth, cfg.stpt_heads, cfg.window,
                                    cfg.shift, cfg.separate_queries, cfg.spatial_prior, cfg.cache_attention)
        write_btf(_path(out, 'D0.btf'), D0)
        if cache:
            attention = WeightContainer(_dtype(cfg))
            for key in sorted(cache):
                attention[key] = cache[key]
            attention.save(_path(out, 'attention'))
    return D0, cache


def run_heads_stage(cfg, out, timings=None):
    with stage('heads', timings):
        D0 = read_btf(_require('heads', _path(out, 'D0.btf')))
        bundle = run_heads(D0, load_weights(cfg, out), cfg.classes, cfg.workers)
        bundle.save(_path(out, 'predictions'))
    return bundle


def run_decode(cfg, out, timings=None):
    with stage('decode', timings):
        bundle = PredictionBundle.load(_require('decode', _path(out, 'predictions')))
        gt = GroundTruth.load(_require('decode', _path(out, 'labels')))
        video = decode_instances(bundle, cfg.center_threshold, cfg.max_k, cfg.match_radius, cfg.workers)
        video.save(_path(out, 'instances'))
        InstanceVideo(gt.instance).save(_path(out, 'gt_instances'))
    return video


def run_eval(cfg, out, timings=None):
    with stage('eval', timings):
        bundle = PredictionBundle.load(_require('eval', _path(out, 'predictions')))
        gt = GroundTruth.load(_require('eval', _path(out, 'labels')))
        if gt.seg.shape[0] != bundle.frames:
            raise StageError('eval', "labels hold {0:d} frames, predictions {1:d}".format(gt.seg.shape[0],
                                                                                         bundle.frames))
        pred_video = InstanceVideo.load(_require('eval', _path(out, 'instances')))
        gt_video = InstanceVideo.load(_require('eval', _path(out, 'gt_instances')))
        report = evaluate(bundle, gt, pred_video, gt_video, cfg.grid())
        report['alignment'] = cfg.temporal_alignment
        report['aug'] = cfg.aug
        write_json(_path(out, 'report.json'), report)
    return report


RUNNERS = {'synth': run_synth, 'encode': run_encode, 'predict': run_predict, 'heads': run_heads_stage,
           'decode': run_decode, 'eval': run_eval}


def run_pipeline(cfg, out=None, stages=STAGES):
    """Run ``stages`` in order on the run directory ``out`` (default ``cfg.out``).

    The synth stage records ``cfg`` as ``config.ini``; later stages leave it
    untouched.

    Returns the evaluation report when ``eval`` ran, else None.
    """
    cfg.validate()
    out = cfg.out if out is None else out
    if not os.path.isdir(out):
        os.makedirs(out)
    if 'synth' in stages:
        cfg.write(_path(out, 'config.ini'))
    result = None
    for name in STAGES:
        if name in stages:
            result = RUNNERS[name](cfg, out)
    return result if 'eval' in stages else None


def load_report(out):
    return read_json(_require('eval', _path(out, 'report.json')))


def bench(cfg, repeats=3, warmup=1):
    """Parameter count and median stage timings of an in-memory forward pass.

    Returns
    -------
    dict with ``param_count``, ``params`` (per-module breakdown),
    ``manifest_count``, ``stage_ms``, ``end_to_end_ms``, ``fps`` and the
    ``reference`` values of the full-scale model.
    """
    if warmup < 1:
        raise ValueError("bench needs at least one warmup pass, got {0:d}.".format(warmup))
    if repeats < 1:
        raise ValueError("bench needs at least one repeat, got {0:d}.".format(repeats))
    cfg.validate()
    scn = make_scenario(cfg)
    _, feature_sets = render_inputs(cfg, scn)
    weights = make_weights(cfg)
    samples = []
    for i in range(warmup + repeats):
        timings = {}
        t0 = time.perf_counter()
        with stage('encode', timings):
            tbm = align_temporal_map(cfg, scn, feature_sets, weights)
        with stage('predict', timings):
            D0, _, _ = stpt_forward(tbm.B, weights, cfg.T_future, cfg.stpt_depth, cfg.stpt_heads, cfg.window,
                                    cfg.shift, cfg.separate_queries, cfg.spatial_prior, False)
        with stage('heads', timings):
            bundle = run_heads(D0, weights, cfg.classes, cfg.workers)
        with stage('decode', timings):
            decode_instances(bundle, cfg.center_threshold, cfg.max_k, cfg.match_radius, cfg.workers)
        timings['total'] = 1000.0 * (time.perf_counter() - t0)
        if i >= warmup:
            samples.append(timings)
    stage_ms = dict((k, float(np.median([s[k] for s in samples]))) for k in samples[0] if k != 'total')
    total = float(np.median([s['total'] for s in samples]))
    params = count_params(cfg, breakdown=True)
    report = {'param_count': params['total'], 'params': params, 'manifest_count': weights.count(),
              'enumerated_count': enumerate_params(cfg), 'stage_ms': stage_ms, 'end_to_end_ms': total,
              'fps': 1000.0 / total if total > 0 else float('inf'), 'repeats': repeats, 'reference': dict(REFERENCE)}
    logger.info("%d parameters, %.1f ms end to end (%.2f FPS)", report['param_count'], total, report['fps'])
    return report


def static_scenario(scn):
    """Copy of ``scn`` with every box frozen at its frame-0 state."""
    boxes = [Box(b.id, b.center, b.size, b.yaw, (0.0, 0.0), 0.0, b.height, b.category) for b in scn.boxes]
    return Scenario(scn.ego_traj, boxes, scn.rig, scn.frame_period, scn.T, scn.T_future, scn.roads)


COMPARE_FIELDS = ('frame', 'method', 'displacement', 'oob_fraction', 'cosine')


def compare_sync(cfg, out=None):
    """Warp against pose synchronisation on the static version of the run's scene.

    Writes ``compare_sync.csv`` to ``out`` and returns its rows. The rows of
    method ``warp2`` hold the gap between two successive one-frame warps and
    one warp over two frames.
    """
    cfg.validate()
    out = cfg.out if out is None else out
    with stage('compare'):
        scn = static_scenario(make_scenario(cfg))
        grid = cfg.grid()
        rows = distortion_report(scn, grid, cfg.C, cfg.workers)
        if scn.T >= 2:
            images = render_features(scn, -2, cfg.C, np.float64, cfg.workers)
            B = ground_encoder(scn, images, grid, -2)
            d1 = EgoDelta.from_poses(scn.ego_pose(-2), scn.ego_pose(-1))
            d2 = EgoDelta.from_poses(scn.ego_pose(-1), scn.ego_pose(0))
            gap = composition_gap(B, grid, d1, d2)
            rows.append({'frame': -2, 'method': 'warp2', 'displacement': gap['mean'],
                         'oob_fraction': 1.0 - gap['valid_fraction'], 'cosine': float('nan')})
        if not os.path.isdir(out):
            os.makedirs(out)
        with open(_path(out, 'compare_sync.csv'), 'w', newline='') as f:
            writer = csv.DictWriter(f, fieldnames=COMPARE_FIELDS, lineterminator='\n')
            writer.writeheader()
            for row in rows:
                writer.writerow(dict((k, row[k] if k in ('frame', 'method') else '{0:.6f}'.format(row[k]))
                                     for k in COMPARE_FIELDS))
    return rows


def load_config(path=None, **overrides):
    """RunConfig from an INI file (or the defaults) with command-line overrides."""
    cfg = RunConfig.read(path) if path else RunConfig()
    return cfg.update(**overrides)
