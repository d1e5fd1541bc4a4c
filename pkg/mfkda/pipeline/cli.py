#!/usr/bin/env python
"""Command line entry point: `mfkda <stage|run|synth> ...`"""

import argparse
import logging
import sys

from mfkda.errors import (ConvergenceError, DivergenceError, InputError,
                          MfkdaError, ParameterError, StageError,
                          ValidationError)
from mfkda.pipeline.config import load_config
from mfkda.pipeline.manifest import load_manifest
from mfkda.pipeline.runner import STAGES, PipelineRun
from mfkda.pipeline.synthetic import (affine_shift, generate_synthetic,
                                      synthetic_params, write_synthetic)
from mfkda.util import configure_logger

log = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_FAILURE = 1
EXIT_VALIDATION = 2
EXIT_CONVERGENCE = 3

DEFAULT_OUT = 'mfkda-run'


def exit_code(err):
    while isinstance(err, StageError):
        err = err.cause
    if isinstance(err, (ValidationError, ParameterError, InputError)):
        return EXIT_VALIDATION
    if isinstance(err, (ConvergenceError, DivergenceError)):
        return EXIT_CONVERGENCE
    return EXIT_FAILURE


def _add_common(parser):
    parser.add_argument('--config', dest='config', default=None,
                        help='Pipeline YAML config (defaults if omitted)')
    parser.add_argument('--out', dest='out', default=DEFAULT_OUT,
                        help='Run directory for checkpoints and the report')
    parser.add_argument('--seed', dest='seed', type=int, default=None,
                        help='Override the config seed')
    parser.add_argument('--verbose', '-v', dest='verbose',
                        action='store_true', help='Log at DEBUG level')


def build_parser():
    parser = argparse.ArgumentParser(
        prog='mfkda', description='Multiple feature-kernel learning with '
                                  'domain adaptation')
    commands = parser.add_subparsers(dest='command')
    commands.required = True
    for stage in STAGES:
        sub = commands.add_parser(stage, help='Run the `{}` stage only'
                                  .format(stage))
        _add_common(sub)
        sub.add_argument('--manifest', dest='manifest', required=True,
                         help='Dataset manifest CSV')
    run = commands.add_parser('run', help='Run every stage')
    _add_common(run)
    run.add_argument('--manifest', dest='manifest', required=True,
                     help='Dataset manifest CSV')
    run.add_argument('--stage-from', dest='stage_from', choices=STAGES,
                     default=None, help='Resume from this stage')

    synth = commands.add_parser('synth', help='Write a synthetic dataset')
    synth.add_argument('--out', dest='out', required=True,
                       help='Output directory')
    synth.add_argument('--seed', dest='seed', type=int, default=0)
    synth.add_argument('--classes', dest='n_classes', type=int, default=10)
    synth.add_argument('--gallery-per-class', dest='gallery_per_class',
                       type=int, default=20)
    synth.add_argument('--probe-per-class', dest='probe_per_class',
                       type=int, default=10)
    synth.add_argument('--dim', dest='dim', type=int, default=8)
    synth.add_argument('--views', dest='n_views', type=int, default=3)
    synth.add_argument('--shift-scale', dest='shift_scale', type=float,
                       default=0.0, help='Strength of the random linear part')
    synth.add_argument('--translation', dest='translation', type=float,
                       default=0.0, help='Length of the shift vector')
    synth.add_argument('--noise', dest='noise', type=float, default=0.0)
    synth.add_argument('--images', dest='images', action='store_true',
                       help='Also render blob images')
    synth.add_argument('--contrast-gamma', dest='contrast_gamma', type=float,
                       default=1.0)
    synth.add_argument('--profile', dest='profile', default=None)
    synth.add_argument('--verbose', '-v', dest='verbose',
                       action='store_true')
    return parser


def _synth(args):
    A, t = affine_shift(args.dim, args.shift_scale, args.translation,
                        args.seed + 1)
    params = synthetic_params(
        n_classes=args.n_classes, gallery_per_class=args.gallery_per_class,
        probe_per_class=args.probe_per_class, dim=args.dim,
        n_views=args.n_views, A=A, t=t, noise=args.noise,
        images=args.images, contrast_gamma=args.contrast_gamma)
    dataset = generate_synthetic(params, args.seed)
    config_path, manifest_path = write_synthetic(dataset, args.out,
                                                 profile=args.profile)
    print('config: {}\nmanifest: {}'.format(config_path, manifest_path))


def _pipeline(args):
    config = load_config(args.config, args.seed)
    manifest = load_manifest(args.manifest)
    if args.command != 'run' and config['backend']['name'] == 'ram':
        raise ValidationError('single-stage commands need the hdf5 backend '
                              'to find earlier checkpoints')
    runner = PipelineRun(config, manifest, out=args.out)
    if args.command == 'run':
        report = runner.run(args.stage_from)
    else:
        report = runner.run(args.command, args.command)
    if report is not None:
        print('rank1={:.4f} auc={:.4f} eer={:.4f} probes={}'.format(
            report.rank1, report.auc, report.eer, report.n_probes))


def main(argv=None):
    args = build_parser().parse_args(argv)
    configure_logger(logging.getLogger('mfkda'),
                     logging.DEBUG if args.verbose else logging.INFO)
    try:
        if args.command == 'synth':
            _synth(args)
        else:
            _pipeline(args)
    except MfkdaError as err:
        log.error('%s', err)
        return exit_code(err)
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
