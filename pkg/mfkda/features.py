#!/usr/bin/env python
"""Holistic face descriptors and ingestion of externally computed ones"""

import logging
import math
import re

import numpy as np
from scipy import linalg
from scipy.signal import fftconvolve
from skimage.feature import local_binary_pattern

from mfkda.errors import DegenerateDataError, InputError, ParameterError
from mfkda.preprocess import as_image

log = logging.getLogger(__name__)

FEATURE_TAGS = ('eigenfaces', 'fisherfaces', 'weberfaces', 'lbp', 'gabor',
                'bow', 'fv_sift', 'vlad_sift')
# computed here from images; the rest are produced by external tools
NATIVE_TAGS = FEATURE_TAGS[:5]
PRECOMPUTED_TAGS = FEATURE_TAGS[5:]

DEFAULT_PARAMS = {
    'eigenfaces': dict(dim=20),
    'fisherfaces': dict(dim=None),
    'weberfaces': dict(alpha=4.0, eps=0.01),
    'lbp': dict(grid=(4, 4)),
    'gabor': dict(scales=5, orientations=8, downsample=4),
}

_HEADER = re.compile(r'^#\s*feature_tag=(\S+)\s+dim=(\d+)\s*$')


def check_tag(tag):
    if tag not in FEATURE_TAGS:
        raise InputError('Unknown feature tag `{}`, choose from {}'
                         .format(tag, FEATURE_TAGS))
    return tag


class FeatureSet(object):
    """
    N x d matrix of row feature vectors with integer class labels.
    """

    def __init__(self, vectors, labels, feature_tag):
        vectors = np.array(vectors, dtype=np.float64)
        if vectors.ndim == 1:
            vectors = vectors[:, None]
        labels = np.asarray(labels)
        if vectors.ndim != 2 or vectors.shape[0] < 1 or vectors.shape[1] < 1:
            raise InputError('Feature matrix must be N x d with N, d >= 1, '
                             'got shape {}'.format(vectors.shape))
        if labels.shape != (vectors.shape[0],):
            raise InputError('Expected {} labels, got {}'
                             .format(vectors.shape[0], labels.shape))
        if not np.all(np.isfinite(vectors)):
            row, col = np.argwhere(~np.isfinite(vectors))[0]
            raise InputError('Non-finite feature at row {} column {}'
                             .format(row, col))
        if labels.size and (np.any(labels < 0) or
                            np.any(labels != np.round(labels))):
            raise InputError('Labels must be integers >= 0')
        self._vectors = vectors
        self._labels = labels.astype(np.int64)
        self._feature_tag = check_tag(feature_tag)

    @property
    def vectors(self):
        return self._vectors

    @property
    def labels(self):
        return self._labels

    @property
    def feature_tag(self):
        return self._feature_tag

    @property
    def n_samples(self):
        return self._vectors.shape[0]

    @property
    def dim(self):
        return self._vectors.shape[1]

    def __len__(self):
        return self.n_samples

    def take(self, indices):
        indices = np.asarray(indices, dtype=int)
        return FeatureSet(self._vectors[indices], self._labels[indices],
                          self._feature_tag)

    def with_vectors(self, vectors, feature_tag=None):
        return FeatureSet(vectors, self._labels,
                          feature_tag or self._feature_tag)

    def __repr__(self):
        return 'FeatureSet({}, {}x{})'.format(self.feature_tag,
                                              self.n_samples, self.dim)


def fix_signs(basis):
    """Flip columns so the largest-magnitude entry of each is positive"""
    basis = np.array(basis, dtype=np.float64)
    for j in range(basis.shape[1]):
        idx = int(np.argmax(np.abs(basis[:, j])))
        if basis[idx, j] < 0:
            basis[:, j] = -basis[:, j]
    return basis


class SubspaceProjector(object):

    def __init__(self, mean, basis, kind):
        mean = np.asarray(mean, dtype=np.float64)
        basis = np.asarray(basis, dtype=np.float64)
        if basis.ndim != 2 or basis.shape[0] != mean.shape[0]:
            raise ParameterError('Basis shape {} does not match mean {}'
                                 .format(basis.shape, mean.shape))
        gram = basis.T.dot(basis)
        if not np.allclose(gram, np.eye(basis.shape[1]), atol=1e-8, rtol=0):
            raise ParameterError('Projector basis is not orthonormal')
        if kind not in ('pca', 'lda'):
            raise ParameterError('Unknown projector kind `{}`'.format(kind))
        self.mean = mean
        self.basis = basis
        self.kind = kind

    @property
    def dim(self):
        return self.basis.shape[1]

    def project(self, vectors):
        return (np.asarray(vectors, dtype=np.float64) - self.mean) \
            .dot(self.basis)

    def reconstruct(self, coords):
        return np.asarray(coords).dot(self.basis.T) + self.mean


def _centered(train):
    mean = train.vectors.mean(axis=0)
    centered = train.vectors - mean
    if not np.any(np.abs(centered) > 0):
        raise DegenerateDataError('Training data has zero variance')
    return mean, centered


def fit_eigenfaces(train, dim):
    max_dim = min(train.n_samples - 1, train.dim)
    if int(dim) != dim or dim < 1 or dim > max_dim:
        raise ParameterError('Eigenfaces dim must be in [1, {}], got {}'
                             .format(max_dim, dim))
    mean, centered = _centered(train)
    # right singular vectors = covariance eigenvectors, descending order
    _, _, vt = linalg.svd(centered, full_matrices=False)
    basis = fix_signs(vt[:int(dim)].T)
    log.debug('Eigenfaces: %d -> %d dims', train.dim, dim)
    return SubspaceProjector(mean, basis, 'pca')


def fit_fisherfaces(train, dim=None):
    classes = np.unique(train.labels)
    n_classes = len(classes)
    if n_classes < 2:
        raise ParameterError('Fisherfaces need at least 2 classes')
    if dim is None:
        dim = n_classes - 1
    if int(dim) != dim or dim < 1 or dim > n_classes - 1:
        raise ParameterError('Fisherfaces dim must be in [1, {}], got {}'
                             .format(n_classes - 1, dim))
    mean, centered = _centered(train)
    rank = np.linalg.matrix_rank(centered)
    n_pca = min(train.n_samples - n_classes, train.dim)
    if n_pca < 1:
        n_pca = min(train.n_samples - 1, train.dim)
    n_pca = min(n_pca, rank)
    if dim > n_pca:
        raise ParameterError('Fisherfaces dim {} exceeds the data rank {}'
                             .format(dim, n_pca))
    pca = fit_eigenfaces(train, n_pca)
    coords = pca.project(train.vectors)

    within = np.zeros((n_pca, n_pca))
    between = np.zeros((n_pca, n_pca))
    for label in classes:
        members = coords[train.labels == label]
        class_mean = members.mean(axis=0)
        spread = members - class_mean
        within += spread.T.dot(spread)
        between += len(members) * np.outer(class_mean, class_mean)

    ridge = 1e-6 * np.trace(within) / n_pca
    if ridge <= 0:
        ridge = 1e-6 * max(np.trace(between) / n_pca, 1.0)
    evals, evecs = linalg.eigh(between, within + ridge * np.eye(n_pca))
    order = np.argsort(evals)[::-1][:int(dim)]
    composed = pca.basis.dot(evecs[:, order])
    # orthonormalize the span, the first axis keeps its direction
    basis, _ = np.linalg.qr(composed)
    basis = fix_signs(basis)
    log.debug('Fisherfaces: %d -> %d (pca) -> %d dims, %d classes',
              train.dim, n_pca, dim, n_classes)
    return SubspaceProjector(mean, basis, 'lda')


LBP_BINS = 59


def lbp_codes(img):
    """
    Non-rotation-invariant uniform LBP(8,1) bins of the interior pixels.
    Uniform patterns take bins 0-57 (57 is all ones), the rest share bin 58.
    """
    pixels = as_image(img).pixels
    if pixels.shape[0] < 3 or pixels.shape[1] < 3:
        raise ParameterError('LBP needs an image of at least 3x3')
    codes = local_binary_pattern(np.array(pixels), 8, 1, method='nri_uniform')
    return codes[1:-1, 1:-1].astype(np.int64)


def lbp_histogram(img, grid=(1, 1)):
    img = as_image(img)
    rows, cols = int(grid[0]), int(grid[1])
    if rows < 1 or cols < 1 or img.height // rows < 3 \
            or img.width // cols < 3:
        raise ParameterError('Grid {} leaves LBP cells smaller than 3x3 on a '
                             '{}x{} image'.format(grid, img.height, img.width))
    bins = lbp_codes(img)
    hists = []
    for band in np.array_split(bins, rows, axis=0):
        for cell in np.array_split(band, cols, axis=1):
            hist = np.bincount(cell.ravel(), minlength=LBP_BINS)
            hists.append(hist / float(cell.size))
    return np.concatenate(hists)


def gabor_bank(scales=5, orientations=8, k_max=math.pi / 2,
               spacing=math.sqrt(2), sigma=2 * math.pi):
    if scales < 1 or orientations < 1:
        raise ParameterError('Gabor bank needs scales >= 1 and '
                             'orientations >= 1')
    bank = []
    for v in range(int(scales)):
        k = k_max / spacing ** v
        radius = int(math.ceil(3 * sigma / k))
        y, x = np.mgrid[-radius:radius + 1, -radius:radius + 1]
        envelope = (k ** 2 / sigma ** 2) * \
            np.exp(-k ** 2 * (x ** 2 + y ** 2) / (2 * sigma ** 2))
        for u in range(int(orientations)):
            phi = u * math.pi / orientations
            wave = k * (math.cos(phi) * x + math.sin(phi) * y)
            kernel = envelope * (np.exp(1j * wave) - math.exp(-sigma ** 2 / 2))
            # exact zero DC on the discrete grid
            kernel -= kernel.mean()
            bank.append(kernel)
    return bank


def gabor_responses(img, bank):
    pixels = as_image(img).pixels
    responses = []
    for kernel in bank:
        radius = kernel.shape[0] // 2
        padded = np.pad(pixels, radius, mode='symmetric')
        responses.append(np.abs(fftconvolve(padded, kernel, mode='valid')))
    return responses


def gabor_features(img, scales=5, orientations=8, downsample=4):
    img = as_image(img)
    if int(downsample) < 1 or downsample > min(img.height, img.width):
        raise ParameterError('Downsample factor {} does not fit a {}x{} image'
                             .format(downsample, img.height, img.width))
    step = int(downsample)
    bank = gabor_bank(scales, orientations)
    parts = [resp[::step, ::step].ravel()
             for resp in gabor_responses(img, bank)]
    vector = np.concatenate(parts)
    norm = np.linalg.norm(vector)
    if norm > 1e-8:
        vector = vector / norm
    return vector


_NEIGHBOURS = ((-1, -1), (-1, 0), (-1, 1), (0, 1),
               (1, 1), (1, 0), (1, -1), (0, -1))


def weberface(img, alpha=4.0, eps=0.01):
    pixels = as_image(img).pixels
    if pixels.min() < 0:
        raise InputError('Weberfaces need non-negative pixels')
    padded = np.pad(pixels, 1, mode='edge')
    height, width = pixels.shape
    excitation = np.zeros_like(pixels)
    for dy, dx in _NEIGHBOURS:
        neighbour = padded[1 + dy:1 + dy + height, 1 + dx:1 + dx + width]
        excitation += (pixels - neighbour) / (pixels + eps)
    return np.arctan(alpha * excitation).ravel()


def extract_image_features(images, tag, params=None):
    """Stack per-image descriptors for the image-local feature types"""
    params = dict(DEFAULT_PARAMS.get(tag, {}), **(params or {}))
    if tag == 'lbp':
        rows = [lbp_histogram(img, tuple(params['grid'])) for img in images]
    elif tag == 'gabor':
        rows = [gabor_features(img, params['scales'], params['orientations'],
                               params['downsample']) for img in images]
    elif tag == 'weberfaces':
        rows = [weberface(img, params['alpha'], params['eps'])
                for img in images]
    elif tag in ('eigenfaces', 'fisherfaces'):
        rows = [as_image(img).pixels.ravel() for img in images]
    else:
        raise InputError('Feature `{}` is ingestion-only'.format(tag))
    return np.vstack(rows)


def fit_projector(train, tag, params=None):
    params = dict(DEFAULT_PARAMS.get(tag, {}), **(params or {}))
    if tag == 'eigenfaces':
        dim = min(params['dim'], train.n_samples - 1, train.dim)
        return fit_eigenfaces(train, dim)
    if tag == 'fisherfaces':
        return fit_fisherfaces(train, params['dim'])
    return None


def load_precomputed(path, feature_tag, expected_rows=None):
    check_tag(feature_tag)
    with open(path) as handle:
        header = handle.readline().strip()
    match = _HEADER.match(header)
    if match is None:
        raise InputError('`{}`: missing `# feature_tag=<tag> dim=<d>` header'
                         .format(path))
    tag, dim = match.group(1), int(match.group(2))
    check_tag(tag)
    if tag != feature_tag:
        raise InputError('`{}` holds `{}` features, expected `{}`'
                         .format(path, tag, feature_tag))
    try:
        data = np.loadtxt(path, delimiter=',', comments='#', ndmin=2)
    except ValueError as err:
        raise InputError('`{}` does not parse: {}'.format(path, err))
    if data.shape[1] != dim + 1:
        raise InputError('`{}`: expected {} feature columns plus a label, '
                         'got {} columns'.format(path, dim, data.shape[1]))
    if not np.all(np.isfinite(data)):
        row, col = np.argwhere(~np.isfinite(data))[0]
        raise InputError('`{}`: non-finite value at row {} column {}'
                         .format(path, row + 1, col + 1))
    if expected_rows is not None and data.shape[0] != expected_rows:
        raise InputError('`{}`: {} rows, the manifest lists {} samples'
                         .format(path, data.shape[0], expected_rows))
    log.debug('Loaded %d x %d `%s` features from `%s`',
              data.shape[0], dim, tag, path)
    return FeatureSet(data[:, :-1], data[:, -1], tag)


def export_precomputed(features, path):
    table = np.column_stack([features.vectors, features.labels])
    fmt = ['%.17g'] * features.dim + ['%d']
    np.savetxt(path, table, fmt=fmt, delimiter=',', comments='# ',
               header='feature_tag={} dim={}'.format(features.feature_tag,
                                                     features.dim))
