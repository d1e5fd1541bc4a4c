#!/usr/bin/env python
"""Stage execution with one checkpoint per stage"""

from functools import partial
import logging
import os

import numpy as np

from mfkda import da, embed, evalharness, smlmfkc
from mfkda.backends import get_backend
from mfkda.engines import engine_map, use_engine
from mfkda.errors import InputError, StageError, ValidationError
from mfkda.features import (NATIVE_TAGS, FeatureSet, extract_image_features,
                            fit_projector, load_precomputed)
from mfkda.kernels import KernelSpec, kernel_block
from mfkda.pipeline.manifest import select_targets
from mfkda.preprocess import degrade_gallery, enhance_probe, read_image
from mfkda.util import Timer

log = logging.getLogger(__name__)

STAGES = ('preprocess', 'extract', 'train-mfkc', 'embed', 'adapt',
          'evaluate')

STORE_NAME = 'checkpoints'


def open_store(config, out=None):
    backend = get_backend(config['backend']['name'])
    if backend.name == 'hdf5':
        store = backend.Store(STORE_NAME, directory=out or '.')
    else:
        store = backend.Store(STORE_NAME)
    store.connect()
    return store


def _embed_pair(job, dim, eig_tol, normalize):
    gallery, probe, spec = job
    g_train = kernel_block(gallery, None, spec, normalize)
    kmap = embed.fit_empirical_map(g_train, dim, eig_tol)
    cross = kernel_block(probe, gallery, spec, normalize)
    return kmap, kmap.train_coordinates, embed.embed_points(kmap, cross)


def _adapt_pair(problem, **kwargs):
    return da.train_transform(problem, **kwargs)


class PipelineRun(object):
    """
    One pipeline execution over a config and a manifest. Stages read their
    inputs from the checkpoint store, so any suffix of the stage list can be
    rerun on its own.
    """

    def __init__(self, config, manifest, out=None, store=None):
        if config['profile'] is None and manifest.profile_name:
            log.info('Using dataset profile `%s` from the manifest',
                     manifest.profile_name)
            config = config.with_profile(manifest.profile_name)
        self.config = config
        self.manifest = manifest
        self.out = out
        if out and not os.path.isdir(out):
            os.makedirs(out)
        use_engine(config['engine']['name'], **config['engine']['params'])
        self.store = store if store is not None else open_store(config, out)
        native = [t for t in config.features
                  if t in NATIVE_TAGS and not config.is_precomputed(t)]
        if native and not manifest.uses_images:
            raise ValidationError('features {} need image entries in the '
                                  'manifest'.format(native))
        self.report = None

    def run(self, stage_from=None, stage_to=None):
        first = STAGES.index(stage_from) if stage_from else 0
        last = STAGES.index(stage_to) if stage_to else len(STAGES) - 1
        if first > last:
            raise ValidationError('stage `{}` comes after `{}`'
                                  .format(stage_from, stage_to))
        for stage in STAGES[first:last + 1]:
            method = getattr(self, '_' + stage.replace('-', '_'))
            try:
                with Timer('Stage {}'.format(stage)):
                    method()
            except Exception as err:
                log.error('Stage `%s` failed: %s', stage, err)
                raise StageError(stage, err)
        return self.report

    def _checkpoint(self, name):
        return self.store.get(name)

    # Stages

    def _preprocess(self):
        manifest = self.manifest
        if not manifest.uses_images:
            self.store.put('preprocess', {}, {'skipped': True})
            return
        params = self.config.preprocess_params()
        arrays = {}
        for split, op in (('gallery', degrade_gallery),
                          ('probe', enhance_probe)):
            images = [op(read_image(p), params)
                      for p in manifest.image_paths(split)]
            shapes = set(img.shape for img in images)
            if len(shapes) > 1:
                raise InputError('{} images differ in size {}, set '
                                 'preprocess.target_size'
                                 .format(split, sorted(shapes)))
            arrays[split] = np.stack([img.pixels for img in images])
        self.store.put('preprocess', arrays, {'skipped': False})

    def _extract(self):
        config, manifest = self.config, self.manifest
        labels = dict((split, manifest.labels(split))
                      for split in ('gallery', 'probe'))
        images = None
        arrays = {'gallery_labels': labels['gallery'],
                  'probe_labels': labels['probe']}
        for tag in config.features:
            if config.is_precomputed(tag):
                sets = {}
                for split in ('gallery', 'probe'):
                    table = load_precomputed(
                        config.precomputed_path(tag, split), tag)
                    rows = manifest.rows(split)
                    if rows.size and rows.max() >= table.n_samples:
                        raise InputError('`{}` {} file has {} rows, the '
                                         'manifest needs row {}'.format(
                                             tag, split, table.n_samples,
                                             rows.max()))
                    sets[split] = table.vectors[rows]
            else:
                if images is None:
                    images = self._checkpoint('preprocess').arrays
                params = config.feature_params(tag)
                raw = dict((split, extract_image_features(images[split], tag,
                                                          params))
                           for split in ('gallery', 'probe'))
                train = FeatureSet(raw['gallery'], labels['gallery'], tag)
                projector = fit_projector(train, tag, params)
                if projector is not None:
                    raw = dict((k, projector.project(v))
                               for k, v in raw.items())
                sets = raw
            for split in ('gallery', 'probe'):
                arrays['{}/{}'.format(split, tag)] = sets[split]
            log.info('Feature `%s`: %d dims', tag, sets['gallery'].shape[1])
        self.store.put('extract', arrays, {'features': config.features})

    def _feature_sets(self, split):
        ckpt = self._checkpoint('extract')
        labels = ckpt.arrays['{}_labels'.format(split)]
        return [FeatureSet(ckpt.arrays['{}/{}'.format(split, tag)], labels,
                           tag) for tag in ckpt.attrs['features']]

    def _train_mfkc(self):
        config = self.config
        sets = self._feature_sets('gallery')
        specs = config.kernel_specs()
        normalize = config['normalize_grams']
        kw = dict(tol=config['mfkc']['tol'],
                  max_iter=config['mfkc']['max_sweeps'],
                  svm_tol=config['svm']['tol'],
                  svm_max_iter=config['svm']['max_iter'])
        if config.mode == 'base_mkl':
            grid = smlmfkc.build_grid(sets[:1], specs, normalize)
            model = smlmfkc.select_kernel_for_feature(grid, 0,
                                                      config['svm']['C'], **kw)
        else:
            grid = smlmfkc.build_grid(sets, specs, normalize)
            model = smlmfkc.select_pairs(grid, config['svm']['C'], **kw)
        arrays, attrs = smlmfkc.to_record(model)
        attrs['pair_tags'] = [grid.feature_tags[m]
                              for m, _ in model.selected_pairs]
        attrs['pair_specs'] = [list(grid.cell_specs[m][q])
                               for m, q in model.selected_pairs]
        self.store.put('train-mfkc', arrays, attrs)

    def _pairs(self):
        attrs = self._checkpoint('train-mfkc').attrs
        return list(zip(attrs['pair_tags'],
                        [KernelSpec(*s) for s in attrs['pair_specs']]))

    def _embed(self):
        config = self.config
        gallery = dict((fs.feature_tag, fs)
                       for fs in self._feature_sets('gallery'))
        probe = dict((fs.feature_tag, fs)
                     for fs in self._feature_sets('probe'))
        jobs = [(gallery[tag], probe[tag], spec)
                for tag, spec in self._pairs()]
        results = engine_map(partial(_embed_pair,
                                     dim=config['embed']['dim'],
                                     eig_tol=config['embed']['eig_tol'],
                                     normalize=config['normalize_grams']),
                             jobs)
        arrays = {}
        for i, (kmap, z_gallery, z_probe) in enumerate(results):
            arrays['pair{}/gallery'.format(i)] = z_gallery
            arrays['pair{}/probe'.format(i)] = z_probe
            arrays['pair{}/eigvals'.format(i)] = kmap.eigvals
            log.info('Pair %d embedded in %d dims', i, kmap.dim)
        self.store.put('embed', arrays, {'n_pairs': len(results)})

    def _adapt(self):
        config = self.config
        ckpt = self._checkpoint('embed')
        n_pairs = ckpt.attrs['n_pairs']
        labels = self._checkpoint('extract').arrays
        g_labels, p_labels = labels['gallery_labels'], labels['probe_labels']
        arrays = {}
        if config.mode != 'full':
            for i in range(n_pairs):
                key = 'pair{}/gallery'.format(i)
                arrays[key] = ckpt.arrays[key]
            arrays['targets'] = np.zeros(0, dtype=np.int64)
            self.store.put('adapt', arrays, {'skipped': True})
            return
        params = config['da']
        targets = np.asarray(select_targets(
            self.manifest, params['target_samples_per_class'],
            params['target_subjects'], config.seed), dtype=np.int64)
        problems = [da.DaProblem(ckpt.arrays['pair{}/gallery'.format(i)],
                                 g_labels,
                                 ckpt.arrays['pair{}/probe'.format(i)][targets],
                                 p_labels[targets], params['C_S'],
                                 params['C_T'])
                    for i in range(n_pairs)]
        transforms = engine_map(partial(_adapt_pair, sweeps=params['sweeps'],
                                        tol=params['tol'],
                                        inner_iter=params['inner_iter'],
                                        inner_tol=params['inner_tol'],
                                        svm_tol=config['svm']['tol']),
                                problems)
        for i, (problem, transform) in enumerate(zip(problems, transforms)):
            sub_arrays, _ = da.to_record(transform)
            for key, value in sub_arrays.items():
                arrays['pair{}/{}'.format(i, key)] = value
            arrays['pair{}/gallery'.format(i)] = transform.transform(
                problem.source_x)
            log.info('Pair %d adapted: J %.6g -> %.6g', i,
                     transform.objective_trace[0],
                     transform.objective_trace[-1])
        arrays['targets'] = targets
        self.store.put('adapt', arrays, {'skipped': False})

    def _evaluate(self):
        config = self.config
        embedded = self._checkpoint('embed')
        adapted = self._checkpoint('adapt')
        labels = self._checkpoint('extract').arrays
        n_pairs = embedded.attrs['n_pairs']
        targets = adapted.arrays['targets']
        p_labels = labels['probe_labels']
        keep = np.arange(p_labels.shape[0])
        holdout = config['da']['holdout_targets']
        if holdout and targets.size:
            keep = np.setdiff1d(keep, targets)
        overlap = bool(targets.size) and not holdout
        if overlap:
            log.warning('DA target set overlaps the evaluation probes')
        gallery = [adapted.arrays['pair{}/gallery'.format(i)]
                   for i in range(n_pairs)]
        probes = [embedded.arrays['pair{}/probe'.format(i)][keep]
                  for i in range(n_pairs)]
        sm = evalharness.knn_score(gallery, labels['gallery_labels'], probes,
                                   p_labels[keep],
                                   fusion=config['knn']['fusion'],
                                   k=config['knn']['k'])
        report = evalharness.evaluate(sm, da_target_overlap=overlap)
        if self.out:
            evalharness.export_report(report, os.path.join(self.out,
                                                           'report'))
        self.store.put('evaluate',
                       {'scores': sm.scores, 'cmc': report.cmc,
                        'roc': report.roc_points,
                        'summary': np.asarray(report.summary(), float)},
                       {'mode': config.mode, 'config': config.dumps()})
        self.report = report


def run_pipeline(config, manifest, out=None, stage_from=None, store=None):
    """Run every stage from `stage_from` on; returns the EvalReport"""
    runner = PipelineRun(config, manifest, out, store)
    return runner.run(stage_from)
