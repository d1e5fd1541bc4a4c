#!/usr/bin/env python
"""Explicit RKHS coordinates through the empirical kernel map"""

import logging

import numpy as np
from scipy import linalg

from mfkda.errors import DegenerateDataError, InputError, ParameterError
from mfkda.features import fix_signs

log = logging.getLogger(__name__)

AUTO_RELATIVE_TOL = 1e-8


class EmpiricalKernelMap(object):
    """
    Top eigenpairs of a training Gram G = U L U'. Training points sit at
    Z = U L^1/2 and a new point with kernel row k_x at L^-1/2 U' k_x.
    """

    def __init__(self, eigvals, eigvecs, eig_tol):
        eigvals = np.array(eigvals, dtype=np.float64)
        eigvecs = np.array(eigvecs, dtype=np.float64)
        if eigvecs.ndim != 2 or eigvecs.shape[1] != eigvals.shape[0]:
            raise InputError('Eigenvectors do not match eigenvalues')
        if np.any(np.diff(eigvals) > 0) or np.any(eigvals <= eig_tol):
            raise InputError('Eigenvalues must be descending and above the '
                             'tolerance')
        eigvals.setflags(write=False)
        eigvecs.setflags(write=False)
        self._eigvals = eigvals
        self._eigvecs = eigvecs
        self._eig_tol = float(eig_tol)

    @property
    def eigvals(self):
        return self._eigvals

    @property
    def eigvecs(self):
        return self._eigvecs

    @property
    def eig_tol(self):
        return self._eig_tol

    @property
    def dim(self):
        return self._eigvals.shape[0]

    @property
    def n_anchors(self):
        return self._eigvecs.shape[0]

    @property
    def train_coordinates(self):
        return self._eigvecs * np.sqrt(self._eigvals)

    def __repr__(self):
        return 'EmpiricalKernelMap(n={}, dim={})'.format(self.n_anchors,
                                                         self.dim)


def fit_empirical_map(g_train, dim='auto', eig_tol=1e-10):
    values = np.asarray(g_train, dtype=np.float64)
    if values.ndim != 2 or values.shape[0] != values.shape[1]:
        raise InputError('Embedding needs a square training Gram')
    if np.max(np.abs(values - values.T)) > 1e-8:
        raise InputError('Training Gram is not symmetric')
    evals, evecs = linalg.eigh(0.5 * (values + values.T))
    order = np.argsort(-evals, kind='mergesort')
    evals, evecs = evals[order], evecs[:, order]
    if evals[0] <= eig_tol:
        raise DegenerateDataError('No eigenvalue of the Gram exceeds {}'
                                  .format(eig_tol))
    keep = evals > eig_tol
    if dim == 'auto' or dim is None:
        keep &= evals > AUTO_RELATIVE_TOL * evals[0]
        dim = int(keep.sum())
    else:
        if int(dim) != dim or dim < 1:
            raise ParameterError('Embedding dim must be a positive integer '
                                 'or "auto", got {}'.format(dim))
        dim = min(int(dim), int(keep.sum()))
    log.debug('Empirical kernel map keeps %d of %d eigenpairs', dim,
              evals.shape[0])
    return EmpiricalKernelMap(evals[:dim], fix_signs(evecs[:, :dim]), eig_tol)


def embed_points(kmap, g_cross):
    rows = np.atleast_2d(np.asarray(g_cross, dtype=np.float64))
    if rows.shape[1] != kmap.n_anchors:
        raise InputError('Cross Gram has {} columns, map has {} anchors'
                         .format(rows.shape[1], kmap.n_anchors))
    return rows.dot(kmap.eigvecs) / np.sqrt(kmap.eigvals)


def to_record(kmap):
    return ({'eigvals': kmap.eigvals, 'eigvecs': kmap.eigvecs},
            {'eig_tol': kmap.eig_tol})


def from_record(arrays, attrs):
    return EmpiricalKernelMap(arrays['eigvals'], arrays['eigvecs'],
                              attrs['eig_tol'])
