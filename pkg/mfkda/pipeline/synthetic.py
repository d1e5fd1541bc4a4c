#!/usr/bin/env python
"""Seeded gallery/probe generator with a controllable domain shift"""

from collections import namedtuple
import logging
import os

import numpy as np
import yaml

from mfkda.errors import ParameterError
from mfkda.features import PRECOMPUTED_TAGS, FeatureSet, export_precomputed
from mfkda.pipeline.manifest import write_manifest
from mfkda.preprocess import ImageMatrix, write_image
from mfkda.util import as_rng

log = logging.getLogger(__name__)

SyntheticParams = namedtuple('SyntheticParams', [
    'n_classes', 'gallery_per_class', 'probe_per_class', 'dim', 'n_views',
    'class_sep', 'cluster_std', 'view_noise', 'A', 't', 'noise',
    'contrast_gamma', 'images', 'image_size'])

SyntheticDataset = namedtuple('SyntheticDataset', [
    'gallery', 'probe', 'gallery_images', 'probe_images'])


def synthetic_params(**kwargs):
    params = dict(n_classes=10, gallery_per_class=20, probe_per_class=10,
                  dim=8, n_views=3, class_sep=3.0, cluster_std=1.0,
                  view_noise=0.5, A=None, t=None, noise=0.0,
                  contrast_gamma=1.0, images=False, image_size=16)
    unknown = set(kwargs) - set(params)
    if unknown:
        raise ParameterError('Unknown synthetic parameters: {}'
                             .format(sorted(unknown)))
    params.update(kwargs)
    return SyntheticParams(**params)


def affine_shift(dim, scale=0.0, translation=0.0, seed=0):
    """A = I + scale * G / sqrt(dim), t = translation * unit vector"""
    rng = as_rng(seed)
    A = np.eye(dim) + scale * rng.randn(dim, dim) / np.sqrt(dim)
    direction = rng.randn(dim)
    t = translation * direction / np.linalg.norm(direction)
    return A, t


def _check(params):
    if params.n_classes < 2:
        raise ParameterError('Need K >= 2 classes')
    if params.gallery_per_class < 1 or params.probe_per_class < 1:
        raise ParameterError('Per-class counts must be >= 1')
    if params.dim < 1:
        raise ParameterError('Latent dim must be >= 1')
    if not 1 <= params.n_views <= len(PRECOMPUTED_TAGS):
        raise ParameterError('n_views must be between 1 and {}'
                             .format(len(PRECOMPUTED_TAGS)))
    if params.cluster_std < 0 or params.noise < 0 or params.view_noise < 0:
        raise ParameterError('Noise levels must be non-negative')
    if not params.contrast_gamma > 0:
        raise ParameterError('contrast_gamma must be positive')


def _blob_bank(dim, size, rng):
    grid = np.arange(size, dtype=np.float64)
    yy, xx = np.meshgrid(grid, grid, indexing='ij')
    centers = rng.uniform(2, size - 2, (dim, 2))
    width = size / 6.0
    return np.array([np.exp(-((yy - cy) ** 2 + (xx - cx) ** 2) /
                            (2 * width ** 2)) for cy, cx in centers])


def _render(latent, bank, gamma):
    weights = 1.0 / (1.0 + np.exp(-latent))
    images = []
    for w in weights:
        pixels = 40.0 + 180.0 * np.tensordot(w, bank, axes=1) / len(w)
        pixels = np.clip(pixels, 0.0, 255.0)
        if gamma != 1:
            # inverse of the probe contrast stretch
            pixels = 255.0 * np.power(pixels / 255.0, gamma)
        images.append(ImageMatrix(pixels))
    return images


def generate_synthetic(params, seed=0):
    _check(params)
    rng = as_rng(seed)
    K, dim = params.n_classes, params.dim
    centers = rng.randn(K, dim) * params.class_sep
    A = np.eye(dim) if params.A is None else np.asarray(params.A, float)
    t = np.zeros(dim) if params.t is None else \
        np.broadcast_to(np.asarray(params.t, float), (dim,))
    if A.shape != (dim, dim):
        raise ParameterError('Shift matrix must be {0} x {0}'.format(dim))

    def _draw(per_class):
        labels = np.repeat(np.arange(K), per_class)
        latent = centers[labels] + params.cluster_std * \
            rng.randn(labels.shape[0], dim)
        return latent, labels

    g_latent, g_labels = _draw(params.gallery_per_class)
    p_latent, p_labels = _draw(params.probe_per_class)
    p_latent = p_latent.dot(A.T) + t + params.noise * rng.randn(*p_latent.shape)
    gallery, probe = [], []
    for m in range(params.n_views):
        tag = PRECOMPUTED_TAGS[m]
        view = rng.randn(dim, dim) / np.sqrt(dim)
        # earlier views are noisier
        noise = params.view_noise * (params.n_views - m)
        g = g_latent.dot(view) + noise * rng.randn(*g_latent.shape)
        p = p_latent.dot(view) + noise * rng.randn(*p_latent.shape)
        gallery.append(FeatureSet(g, g_labels, tag))
        probe.append(FeatureSet(p, p_labels, tag))
    g_images = p_images = None
    if params.images:
        bank = _blob_bank(dim, params.image_size, rng)
        g_images = _render(g_latent, bank, 1.0)
        p_images = _render(p_latent, bank, params.contrast_gamma)
    log.debug('Synthetic data: K=%d, %d gallery and %d probe samples, %d '
              'views', K, g_labels.shape[0], p_labels.shape[0],
              params.n_views)
    return SyntheticDataset(gallery, probe, g_images, p_images)


def write_synthetic(dataset, directory, profile=None, config=None):
    """
    Write feature CSVs (and images), a manifest and a matching config.
    Returns (config path, manifest path).
    """
    if not os.path.isdir(directory):
        os.makedirs(directory)
    g_labels = dataset.gallery[0].labels
    p_labels = dataset.probe[0].labels
    refs = None
    if dataset.gallery_images is not None:
        os.makedirs(os.path.join(directory, 'images'), exist_ok=True)
        refs = {'gallery': [], 'probe': []}
        for split, images in (('gallery', dataset.gallery_images),
                              ('probe', dataset.probe_images)):
            for i, img in enumerate(images):
                ref = os.path.join('images', '{}_{:05d}.png'.format(split, i))
                write_image(img, os.path.join(directory, ref))
                refs[split].append(ref)
    precomputed = {}
    for g, p in zip(dataset.gallery, dataset.probe):
        paths = {}
        for split, fs in (('gallery', g), ('probe', p)):
            paths[split] = '{}_{}.csv'.format(fs.feature_tag, split)
            export_precomputed(fs, os.path.join(directory, paths[split]))
        precomputed[g.feature_tag] = paths
    manifest_path = os.path.join(directory, 'manifest.csv')
    write_manifest(manifest_path, ['s{:03d}'.format(y) for y in g_labels],
                   ['s{:03d}'.format(y) for y in p_labels], refs=refs,
                   profile=profile, name='synthetic')
    data = dict(config or {})
    if refs is None:
        data.setdefault('features', sorted(precomputed,
                                           key=PRECOMPUTED_TAGS.index))
        data.setdefault('precomputed', precomputed)
    if profile:
        data.setdefault('profile', profile)
    config_path = os.path.join(directory, 'config.yaml')
    with open(config_path, 'w') as handle:
        yaml.safe_dump(data, handle, default_flow_style=False)
    log.info('Synthetic dataset written to `%s`', directory)
    return config_path, manifest_path
