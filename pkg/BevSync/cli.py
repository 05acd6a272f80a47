# -*- coding: utf-8 -*-
"""Command line entry point ``bevsync``.

Exit codes: 0 on success, 2 on a configuration error, 3 on a stage failure.
"""
from __future__ import print_function, division

import argparse
import logging
import os
import re
import sys

import numpy as np
from einops import reduce

from .__version__ import __version__
from .Util import ConfigError, FormatError, StageError
from .Util.Config import RunConfig
from .Util.Formats import dumps_json, to_gray, write_json, write_pnm
from .Util.Tensor import read_btf
from .Util.Weights import WeightContainer
from .Calc.Pipeline import bench, compare_sync, load_config, run_pipeline
from .Calc.Stpt import attention_matrix, stage_shifts
from .Plot.Common import attention_overlay, token_cells

logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_STAGE = 3

COMMAND_STAGES = {
    'synth': ('synth',),
    'encode': ('encode',),
    'predict': ('predict', 'heads', 'decode'),
    'eval': ('eval',),
    'run': ('synth', 'encode', 'predict', 'heads', 'decode', 'eval'),
}

LAYER_PATTERN = re.compile(r'^(enc|dec)(\d+)\.block(\d+)$')


def _load_attention(run_dir):
    path = os.path.join(run_dir, 'attention')
    if not os.path.isdir(path):
        raise StageError('viz-attn', "no attention cache in {0:s}, run predict with cache_attention on".format(run_dir))
    container = WeightContainer.load(path)
    return dict(container.items())


def viz_attn(run_dir, layer='enc0.block0', window=0, query=None, top_k=4, png=None, scale=8):
    """Write the attention matrix of one window as PGM and a BEV overlay as PPM.

    Parameters
    ----------
    run_dir : str
        Run directory holding ``config.ini``, ``bev.btf`` and ``attention/``.
    layer : str
        ``enc<s>.block<j>`` or ``dec<s>.block<j>``.
    window : int
        Window index within the layer.
    query : int, optional
        Query token of the overlay; defaults to the centre token of the
        first frame.
    png : str, optional
        Also render the matrix with matplotlib to this path.

    Returns
    -------
    dict with the written paths, the ``matrix`` and the ``marked`` cells
    """
    cfg = load_config(os.path.join(run_dir, 'config.ini'))
    match = LAYER_PATTERN.match(layer)
    if match is None:
        raise ValueError("Invalid layer \"{0:s}\", expected enc<s>.block<j> or dec<s>.block<j>.".format(layer))
    kind, s, j = match.group(1), int(match.group(2)), int(match.group(3))
    cache = _load_attention(run_dir)
    A = attention_matrix(cache, window, layer)
    B = read_btf(os.path.join(run_dir, 'bev.btf'))
    factor = 2 ** s
    h, w = cfg.X // factor, cfg.Y // factor
    wh, ww = cfg.window
    shifts = stage_shifts(h, w, (wh, ww), cfg.shift)
    if j >= len(shifts):
        raise ValueError("Layer \"{0:s}\" has no block {1:d}.".format(layer, j))
    frames_q = A.shape[0] // (wh * ww)
    frames_k = A.shape[1] // (wh * ww)
    query_cells = token_cells(h, w, (wh, ww), window, frames_q, shifts[j])
    key_cells = token_cells(h, w, (wh, ww), window, frames_k, shifts[j])
    if query is None:
        query = (wh // 2) * ww + ww // 2
    background = reduce(np.linalg.norm(B[0], axis=-1), '(h a) (w b) -> h w', 'mean', a=factor, b=factor)
    overlay, marked = attention_overlay(background, A, query_cells, key_cells, query, top_k, scale)

    stem = os.path.join(run_dir, 'attn_{0:s}_w{1:d}'.format(layer.replace('.', '_'), window))
    paths = {'pgm': stem + '.pgm', 'ppm': stem + '_overlay.ppm'}
    write_pnm(paths['pgm'], to_gray(A))
    write_pnm(paths['ppm'], overlay)
    if png:
        from .Plot.Plots import AttentionPlot
        plot = AttentionPlot(A, frames=frames_q if kind == 'enc' else 1).draw()
        plot.title(u"{0:s}, window {1:d}".format(layer, window))
        plot.savefig(png)
        paths['png'] = png
    logger.info("Wrote %s", ", ".join(sorted(paths.values())))
    return dict(paths, matrix=A, marked=marked)


def build_parser():
    parser = argparse.ArgumentParser(prog='bevsync', description="Pose-synchronised BEV perception and prediction "
                                                                 "on synthetic desk-scale scenes.")
    parser.add_argument('--version', action='version', version='%(prog)s ' + __version__)

    common = argparse.ArgumentParser(add_help=False)
    common.add_argument('--config', help="INI configuration file")
    common.add_argument('--seed', type=int, help="run seed")
    common.add_argument('--pyramid-depth', type=int, dest='stpt_depth', help="number of pyramid scales (1-4)")
    common.add_argument('--aug', choices=('none', 'img', 'bev', 'both'), help="augmentation mode")
    common.add_argument('--out', help="run directory")
    common.add_argument('--workers', type=int, help="worker threads inside a stage")
    verbosity = common.add_mutually_exclusive_group()
    verbosity.add_argument('-v', '--verbose', action='store_true', help="debug logging")
    verbosity.add_argument('-q', '--quiet', action='store_true', help="warnings only")

    sub = parser.add_subparsers(dest='command')
    sub.required = True
    sub.add_parser('synth', parents=[common], help="generate scene, camera features, labels and weights")
    sub.add_parser('encode', parents=[common], help="encode the temporal BEV map")
    sub.add_parser('predict', parents=[common], help="predict future states, head outputs and instances")
    sub.add_parser('eval', parents=[common], help="score predictions against labels")
    sub.add_parser('run', parents=[common], help="all stages from synth to eval")
    p = sub.add_parser('bench', parents=[common], help="parameter count and timings")
    p.add_argument('--repeats', type=int, default=3)
    p.add_argument('--warmup', type=int, default=1)
    sub.add_parser('compare-sync', parents=[common], help="warp against pose synchronisation on a static scene")
    p = sub.add_parser('viz-attn', parents=[common], help="render a cached attention matrix")
    p.add_argument('--layer', default='enc0.block0')
    p.add_argument('--window', type=int, default=0)
    p.add_argument('--query', type=int)
    p.add_argument('--top-k', type=int, default=4)
    p.add_argument('--png', help="also write a matplotlib rendering")
    return parser


def configure_logging(args):
    level = logging.DEBUG if args.verbose else (logging.WARNING if args.quiet else logging.INFO)
    logging.basicConfig(level=level, format="%(asctime)s %(levelname)-7s %(name)s: %(message)s", force=True)


def config_path(args):
    """The INI to start from: ``--config``, else the run directory's own ``config.ini`` if present."""
    if args.config:
        return args.config
    recorded = os.path.join(args.out or RunConfig().out, 'config.ini')
    if os.path.isfile(recorded):
        logger.info("Resuming with %s", recorded)
        return recorded
    return None


def main(argv=None):
    args = build_parser().parse_args(argv)
    configure_logging(args)
    try:
        cfg = load_config(config_path(args), seed=args.seed, stpt_depth=args.stpt_depth, aug=args.aug, out=args.out,
                          workers=args.workers)
        cfg.validate()
        if args.command in COMMAND_STAGES:
            report = run_pipeline(cfg, stages=COMMAND_STAGES[args.command])
            if report is not None:
                sys.stdout.write(dumps_json(report))
        elif args.command == 'bench':
            report = bench(cfg, args.repeats, args.warmup)
            if not os.path.isdir(cfg.out):
                os.makedirs(cfg.out)
            write_json(os.path.join(cfg.out, 'bench.json'), report)
            sys.stdout.write(dumps_json(report))
        elif args.command == 'compare-sync':
            compare_sync(cfg)
        elif args.command == 'viz-attn':
            viz_attn(cfg.out, args.layer, args.window, args.query, args.top_k, args.png)
    except ConfigError as e:
        logger.error("%s", e)
        return EXIT_CONFIG
    except (StageError, FormatError, ValueError, IndexError, IOError, OSError) as e:
        logger.error("%s", e)
        return EXIT_STAGE
    return EXIT_OK


if __name__ == '__main__':
    sys.exit(main())
