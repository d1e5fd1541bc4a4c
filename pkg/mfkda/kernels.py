#!/usr/bin/env python
"""Kernel functions and Gram matrix machinery"""

from collections import namedtuple
import logging

import numpy as np
from scipy import linalg
from scipy.spatial.distance import cdist, pdist

from mfkda.errors import InputError, NormalizationError, ParameterError

log = logging.getLogger(__name__)

KERNELS = ('linear', 'polynomial', 'gaussian', 'rbf', 'chi_square',
           'rbf_chi_square')
_CHI_KERNELS = ('chi_square', 'rbf_chi_square')
_SIGMA_KERNELS = ('gaussian', 'rbf', 'rbf_chi_square')

KernelSpec = namedtuple('KernelSpec', ['kind', 'c', 'alpha', 'degree',
                                       'sigma', 'squared_norm'])


def make_spec(kind, c=0.0, alpha=1.0, degree=2, sigma=None,
              squared_norm=False):
    """
    Build a checked KernelSpec. `sigma=None` is left for `resolve_sigma`.
    `squared_norm` switches the rbf kernels to the usual squared distance.
    """
    if kind not in KERNELS:
        raise ParameterError('Unknown kernel `{}`, choose from {}'
                             .format(kind, KERNELS))
    if int(degree) != degree or degree < 1:
        raise ParameterError('Polynomial degree must be an integer >= 1, '
                             'got {}'.format(degree))
    if sigma is not None and not sigma > 0:
        raise ParameterError('Kernel sigma must be positive, got {}'
                             .format(sigma))
    return KernelSpec(kind, float(c), float(alpha), int(degree),
                      None if sigma is None else float(sigma),
                      bool(squared_norm))


def spec_name(spec):
    if spec.kind in _SIGMA_KERNELS:
        return '{}(sigma={:.6g})'.format(spec.kind, spec.sigma or 0)
    if spec.kind == 'polynomial':
        return 'polynomial(alpha={:g},c={:g},d={})'.format(spec.alpha, spec.c,
                                                         spec.degree)
    if spec.kind == 'linear':
        return 'linear(c={:g})'.format(spec.c)
    return spec.kind


def median_sigma(vectors):
    """Median pairwise distance, 1.0 when every point coincides"""
    vectors = np.asarray(vectors, dtype=np.float64)
    if vectors.shape[0] < 2:
        return 1.0
    dists = pdist(vectors)
    positive = dists[dists > 0]
    if positive.size == 0:
        return 1.0
    return float(np.median(dists))


def resolve_sigma(spec, train_vectors):
    if spec.kind in _SIGMA_KERNELS and spec.sigma is None:
        sigma = median_sigma(train_vectors)
        log.debug('Median heuristic sigma for %s: %.6g', spec.kind, sigma)
        return spec._replace(sigma=sigma)
    return spec


def _check_sigma(spec):
    if spec.kind in _SIGMA_KERNELS and not (spec.sigma and spec.sigma > 0):
        raise ParameterError('Kernel `{}` needs a positive sigma'
                             .format(spec.kind))


def _rbf_term(dist, spec):
    if spec.squared_norm:
        dist = dist ** 2
    return np.exp(-dist / (2.0 * spec.sigma ** 2))


def _chi_term(x, y):
    """Sum of (x_i - y_i)^2 / (0.5 (x_i + y_i)), 0/0 terms count as 0"""
    total = x + y
    num = (x - y) ** 2
    safe = np.where(total > 0, total, 1.0)
    return np.sum(np.where(total > 0, num / (0.5 * safe), 0.0), axis=-1)


def kernel_eval(x, y, spec):
    x = np.asarray(x, dtype=np.float64).ravel()
    y = np.asarray(y, dtype=np.float64).ravel()
    if x.shape != y.shape:
        raise InputError('Kernel inputs differ in dimension: {} vs {}'
                         .format(x.shape[0], y.shape[0]))
    _check_sigma(spec)
    kind = spec.kind
    if kind in _CHI_KERNELS and (np.any(x < 0) or np.any(y < 0)):
        raise InputError('Chi-square kernels need non-negative inputs')
    if kind == 'linear':
        return float(np.dot(x, y) + spec.c)
    if kind == 'polynomial':
        return float((spec.alpha * np.dot(x, y) + spec.c) ** spec.degree)
    if kind == 'gaussian':
        return float(np.exp(-np.sum((x - y) ** 2) / (2.0 * spec.sigma ** 2)))
    dist = np.sqrt(np.sum((x - y) ** 2))
    if kind == 'rbf':
        return float(_rbf_term(dist, spec))
    chi = 1.0 - _chi_term(x, y)
    if kind == 'chi_square':
        return float(chi)
    return float(chi + _rbf_term(dist, spec))


class GramMatrix(object):
    """
    N x M matrix of kernel evaluations, tagged with its spec.
    """

    def __init__(self, values, spec, normalized=False, symmetric=False):
        values = np.array(values, dtype=np.float64)
        if values.ndim != 2:
            raise InputError('Gram matrix must be 2-D')
        if not np.all(np.isfinite(values)):
            raise InputError('Gram matrix has non-finite entries')
        if symmetric:
            if values.shape[0] != values.shape[1]:
                raise InputError('Symmetric Gram matrix must be square')
            values = 0.5 * (values + values.T)
        values.setflags(write=False)
        self._values = values
        self._spec = spec
        self._normalized = bool(normalized)
        self._symmetric = bool(symmetric)

    @property
    def values(self):
        return self._values

    @property
    def spec(self):
        return self._spec

    @property
    def normalized(self):
        return self._normalized

    @property
    def symmetric(self):
        return self._symmetric

    @property
    def shape(self):
        return self._values.shape

    @property
    def is_square(self):
        return self._values.shape[0] == self._values.shape[1]

    def __array__(self, dtype=None):
        if dtype is None:
            return self._values
        return self._values.astype(dtype)


def _matrix(features):
    if hasattr(features, 'vectors'):
        return features.vectors
    return np.atleast_2d(np.asarray(features, dtype=np.float64))


def _gram_values(a, b, spec):
    kind = spec.kind
    if kind == 'linear':
        return a.dot(b.T) + spec.c
    if kind == 'polynomial':
        return (spec.alpha * a.dot(b.T) + spec.c) ** spec.degree
    if kind == 'gaussian':
        return np.exp(-cdist(a, b, 'sqeuclidean') / (2.0 * spec.sigma ** 2))
    if kind == 'rbf':
        return _rbf_term(cdist(a, b, 'euclidean'), spec)
    # one row at a time keeps memory at M x d
    chi = np.vstack([1.0 - _chi_term(row[None, :], b) for row in a])
    if kind == 'chi_square':
        return chi
    return chi + _rbf_term(cdist(a, b, 'euclidean'), spec)


def gram(a, b, spec):
    """values[i, j] = kernel_eval(a_i, b_j); pass b=None for a self-gram"""
    same = b is None or b is a
    a = _matrix(a)
    b = a if same else _matrix(b)
    if a.shape[1] != b.shape[1]:
        raise InputError('Feature dimensions differ: {} vs {}'
                         .format(a.shape[1], b.shape[1]))
    _check_sigma(spec)
    if spec.kind in _CHI_KERNELS and (np.any(a < 0) or np.any(b < 0)):
        raise InputError('Chi-square kernels need non-negative features')
    return GramMatrix(_gram_values(a, b, spec), spec, symmetric=same)


def self_similarity(features, spec):
    """Diagonal k(x_i, x_i), computed without the full Gram"""
    a = _matrix(features)
    _check_sigma(spec)
    sq = np.sum(a * a, axis=1)
    kind = spec.kind
    if kind == 'linear':
        return sq + spec.c
    if kind == 'polynomial':
        return (spec.alpha * sq + spec.c) ** spec.degree
    if kind == 'rbf_chi_square':
        return np.full(a.shape[0], 2.0)
    return np.ones(a.shape[0])


def normalize_gram(g, self_a, self_b):
    self_a = np.asarray(self_a, dtype=np.float64)
    self_b = np.asarray(self_b, dtype=np.float64)
    values = np.asarray(g)
    if self_a.shape != (values.shape[0],) or \
            self_b.shape != (values.shape[1],):
        raise InputError('Self-similarities do not match Gram shape {}'
                         .format(values.shape))
    if np.any(self_a <= 0) or np.any(self_b <= 0):
        raise NormalizationError('Kernel normalization needs positive '
                                 'self-similarities')
    out = values / np.sqrt(np.outer(self_a, self_b))
    symmetric = getattr(g, 'symmetric', False)
    if symmetric:
        np.fill_diagonal(out, 1.0)
    return GramMatrix(out, getattr(g, 'spec', None), normalized=True,
                      symmetric=symmetric)


def check_psd(g, tol=1e-8):
    values = np.asarray(g)
    if values.ndim != 2 or values.shape[0] != values.shape[1]:
        raise InputError('PSD check needs a square matrix')
    if np.max(np.abs(values - values.T)) > tol:
        raise InputError('Gram matrix is not symmetric within {}'.format(tol))
    min_eig = float(linalg.eigvalsh(0.5 * (values + values.T))[0])
    return min_eig >= -tol, min_eig


def clip_psd(g, tol=1e-8):
    """Project onto the PSD cone when the smallest eigenvalue is below -tol"""
    is_psd, min_eig = check_psd(g, tol)
    if is_psd:
        return g
    log.warning('Gram matrix (%s) is not PSD (min eigenvalue %.3g), '
                'clipping negative eigenvalues',
                getattr(getattr(g, 'spec', None), 'kind', '?'), min_eig)
    values = np.asarray(g)
    evals, evecs = linalg.eigh(0.5 * (values + values.T))
    clipped = (evecs * np.maximum(evals, 0.0)).dot(evecs.T)
    return GramMatrix(clipped, getattr(g, 'spec', None),
                      normalized=getattr(g, 'normalized', False),
                      symmetric=True)


def export_gram(g, path):
    values = np.asarray(g)
    spec = getattr(g, 'spec', None)
    header = 'kernel={} normalized={} shape={}x{}'.format(
        spec_name(spec) if spec else 'unknown',
        getattr(g, 'normalized', False), values.shape[0], values.shape[1])
    np.savetxt(path, values, fmt='%.17g', delimiter=',', header=header)


def kernel_block(a, b, spec, normalize=True):
    """
    Gram between two sets under `spec`, optionally cosine-normalized.
    Pass b=None for a training self-gram; those are also clipped to PSD.
    """
    g = gram(a, b, spec)
    if normalize:
        self_a = self_similarity(a, spec)
        self_b = self_a if b is None else self_similarity(b, spec)
        g = normalize_gram(g, self_a, self_b)
    if b is None:
        g = clip_psd(g)
    return g
