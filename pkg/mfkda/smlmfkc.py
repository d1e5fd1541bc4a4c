#!/usr/bin/env python
"""Soft-margin learning of multiple feature-kernel combinations"""

from functools import partial
import logging

import numpy as np

from mfkda import svm
from mfkda.engines import engine_map
from mfkda.errors import DivergenceError, InputError, ParameterError
from mfkda.kernels import KernelSpec, kernel_block, resolve_sigma
from mfkda.util import stable_argmax

log = logging.getLogger(__name__)

SIMPLEX_TOL = 1e-6


class FeatureKernelGrid(object):
    """
    F x P table of square Gram matrices: feature m under kernel q, all over
    the same N training samples.

    `cell_specs[m][q]` is the kernel spec actually used for the cell (the
    median-heuristic sigma is resolved per feature).
    """

    def __init__(self, grams, feature_tags, kernel_specs, labels,
                 cell_specs=None):
        values = [[np.asarray(g, dtype=np.float64) for g in row]
                  for row in grams]
        if len(values) < 1 or len(values[0]) < 1:
            raise InputError('Grid needs at least one feature and one kernel')
        n_kernels = len(values[0])
        labels = np.asarray(labels).ravel()
        n = labels.shape[0]
        for row in values:
            if len(row) != n_kernels:
                raise InputError('Every feature needs one Gram per kernel')
            for g in row:
                if g.shape != (n, n):
                    raise InputError('Grid Gram of shape {} does not match '
                                     '{} labels'.format(g.shape, n))
        if len(feature_tags) != len(values) or \
                len(kernel_specs) != n_kernels:
            raise InputError('Grid tags and specs do not match its shape')
        self._grams = values
        self._feature_tags = list(feature_tags)
        self._kernel_specs = list(kernel_specs)
        self._labels = labels
        self._cell_specs = cell_specs

    @property
    def grams(self):
        return self._grams

    @property
    def feature_tags(self):
        return self._feature_tags

    @property
    def kernel_specs(self):
        return self._kernel_specs

    @property
    def cell_specs(self):
        return self._cell_specs

    @property
    def labels(self):
        return self._labels

    @property
    def n_features(self):
        return len(self._grams)

    @property
    def n_kernels(self):
        return len(self._grams[0])

    @property
    def n_samples(self):
        return self._labels.shape[0]

    def column(self, q):
        """The F Grams of kernel q"""
        return [row[q] for row in self._grams]

    def transposed(self):
        """Kernels become features; used to weigh kernels for one feature"""
        grams = [self.column(q) for q in range(self.n_kernels)]
        cells = None
        if self._cell_specs is not None:
            cells = [[row[q] for row in self._cell_specs]
                     for q in range(self.n_kernels)]
        return FeatureKernelGrid(grams, self._kernel_specs,
                                 self._feature_tags, self._labels, cells)


def _grid_cell(cell, normalize):
    features, spec = cell
    spec = resolve_sigma(spec, features.vectors)
    return spec, np.asarray(kernel_block(features, None, spec, normalize))


def build_grid(feature_sets, kernel_specs, normalize=True):
    """Compute every (feature, kernel) training Gram with the current engine"""
    if not feature_sets or not kernel_specs:
        raise ParameterError('Need at least one feature set and one kernel')
    labels = feature_sets[0].labels
    for fs in feature_sets[1:]:
        if not np.array_equal(fs.labels, labels):
            raise InputError('Feature sets must describe the same samples')
    cells = [(fs, spec) for fs in feature_sets for spec in kernel_specs]
    results = engine_map(partial(_grid_cell, normalize=normalize), cells)
    n_kernels = len(kernel_specs)
    grams, specs = [], []
    for m in range(len(feature_sets)):
        row = results[m * n_kernels:(m + 1) * n_kernels]
        specs.append([spec for spec, _ in row])
        grams.append([g for _, g in row])
    return FeatureKernelGrid(grams, [fs.feature_tag for fs in feature_sets],
                             kernel_specs, labels, specs)


def check_simplex(beta, tol=SIMPLEX_TOL):
    beta = np.asarray(beta, dtype=np.float64)
    if np.any(beta < -tol) or abs(beta.sum() - 1.0) > tol:
        raise ParameterError('beta is not on the simplex: {}'.format(beta))
    return beta


def combined_gram(grams, beta):
    return sum(b * g for b, g in zip(beta, grams))


def _ovr_labels(labels, class_ids):
    return np.vstack([np.where(labels == k, 1.0, -1.0) for k in class_ids])


def eq1_objective(grid, q, beta_q, alpha_stack, b_stack, C):
    """
    1/2 sum_k sum_m beta_m a_k' Y_k G_mq Y_k a_k plus C times the hinge losses
    of every one-vs-rest machine on every training sample.
    """
    beta_q = check_simplex(beta_q)
    grams = grid.column(q)
    if beta_q.shape[0] != len(grams):
        raise InputError('beta has {} entries for {} features'
                         .format(beta_q.shape[0], len(grams)))
    class_ids = np.unique(grid.labels)
    ys = _ovr_labels(grid.labels, class_ids)
    alpha_stack = np.atleast_2d(np.asarray(alpha_stack, dtype=np.float64))
    b_stack = np.atleast_1d(np.asarray(b_stack, dtype=np.float64))
    if alpha_stack.shape != ys.shape or b_stack.shape[0] != ys.shape[0]:
        raise InputError('alpha stack must be K x N for K={}, N={}'
                         .format(ys.shape[0], ys.shape[1]))
    kb = combined_gram(grams, beta_q)
    total = 0.0
    for alpha, b, y in zip(alpha_stack, b_stack, ys):
        coef = alpha * y
        f = kb.dot(coef) + b
        total += 0.5 * coef.dot(kb).dot(coef)
        total += C * np.maximum(0.0, 1.0 - y * f).sum()
    return float(total)


def _model_objective(grid, q, beta, model, C):
    return eq1_objective(grid, q, beta,
                         np.vstack([m.alpha for m in model.machines]),
                         model.biases, C)


def _margin_norms(grams, beta, model):
    """||w_m|| = beta_m sqrt(sum_k a_k' Y_k G_m Y_k a_k)"""
    coef = model.dual_coef
    quad = np.array([sum(c.dot(g).dot(c) for c in coef) for g in grams])
    return beta * np.sqrt(np.maximum(quad, 0.0))


def learn_beta_for_kernel(grid, q, C, tol=1e-6, max_iter=50, svm_tol=1e-8,
                          svm_max_iter=None):
    """
    Alternate a one-vs-rest SVM on sum_m beta_m G_mq with the normalized
    margin-norm update of beta. Returns (beta, svm model, objective trace).

    A sweep whose objective would rise above the previous one is rejected
    and the previous iterate kept, so the trace never increases.
    """
    if not C > 0:
        raise ParameterError('C must be positive, got {}'.format(C))
    if len(np.unique(grid.labels)) < 2:
        raise InputError('All training labels are identical')
    grams = grid.column(q)
    n_feat = len(grams)
    beta = np.full(n_feat, 1.0 / n_feat)
    model = svm.train_one_vs_rest(combined_gram(grams, beta), grid.labels, C,
                                  svm_tol, svm_max_iter)
    trace = [_model_objective(grid, q, beta, model, C)]
    if not np.isfinite(trace[0]):
        raise DivergenceError('Objective is not finite for kernel {}'
                              .format(q))
    for sweep in range(max_iter):
        norms = _margin_norms(grams, beta, model)
        total = norms.sum()
        if n_feat == 1 or total <= 0:
            break
        new_beta = norms / total
        change = np.abs(new_beta - beta).sum()
        new_model = svm.train_one_vs_rest(combined_gram(grams, new_beta),
                                          grid.labels, C, svm_tol,
                                          svm_max_iter)
        objective = _model_objective(grid, q, new_beta, new_model, C)
        if not np.isfinite(objective):
            raise DivergenceError('Objective is not finite for kernel {} at '
                                  'sweep {}'.format(q, sweep))
        if objective > trace[-1]:
            log.debug('Kernel %d sweep %d: objective rose %.3g, stopping',
                      q, sweep, objective - trace[-1])
            break
        beta, model = new_beta, new_model
        trace.append(objective)
        log.debug('Kernel %d sweep %d: beta=%s J=%.8g', q, sweep,
                  np.array2string(beta, precision=4), objective)
        if change < tol:
            break
    return beta, model, np.asarray(trace)


class MfkcModel(object):
    """
    Per-kernel simplex weights, the SVM learned with each, and the selected
    (feature index, kernel index) pair of every kernel.
    """

    def __init__(self, beta, per_kernel_svm, selected_pairs, objective_traces,
                 feature_tags=None, kernel_specs=None):
        beta = np.atleast_2d(np.asarray(beta, dtype=np.float64))
        for row in beta:
            check_simplex(row, 1e-9)
        self._beta = beta
        self._svms = tuple(per_kernel_svm)
        self._pairs = [tuple(int(i) for i in pair) for pair in selected_pairs]
        self._traces = [np.asarray(t, dtype=np.float64)
                        for t in objective_traces]
        self._feature_tags = feature_tags
        self._kernel_specs = kernel_specs

    @property
    def beta(self):
        return self._beta

    @property
    def per_kernel_svm(self):
        return self._svms

    @property
    def selected_pairs(self):
        return self._pairs

    @property
    def objective_traces(self):
        return self._traces

    @property
    def feature_tags(self):
        return self._feature_tags

    @property
    def kernel_specs(self):
        return self._kernel_specs

    @property
    def n_pairs(self):
        return len(self._pairs)

    def __repr__(self):
        return 'MfkcModel(pairs={})'.format(self._pairs)


def _learn_kernel(q, grid, C, tol, max_iter, svm_tol, svm_max_iter):
    return learn_beta_for_kernel(grid, q, C, tol, max_iter, svm_tol,
                                 svm_max_iter)


def select_pairs(grid, C, tol=1e-6, max_iter=50, svm_tol=1e-8,
                 svm_max_iter=None):
    """Learn beta for every kernel and pick its supremum feature"""
    results = engine_map(partial(_learn_kernel, grid=grid, C=C, tol=tol,
                                 max_iter=max_iter, svm_tol=svm_tol,
                                 svm_max_iter=svm_max_iter),
                         range(grid.n_kernels))
    beta = np.vstack([r[0] for r in results])
    pairs = [(stable_argmax(row), q) for q, row in enumerate(beta)]
    for m, q in pairs:
        log.info('Kernel %d (%s) selects feature %d (%s), beta=%s', q,
                 grid.kernel_specs[q].kind, m, grid.feature_tags[m],
                 np.array2string(beta[q], precision=4))
    return MfkcModel(beta, [r[1] for r in results], pairs,
                     [r[2] for r in results], grid.feature_tags,
                     grid.kernel_specs)


def select_kernel_for_feature(grid, m, C, tol=1e-6, max_iter=50,
                              svm_tol=1e-8, svm_max_iter=None):
    """
    Single-feature baseline: simplex weights over the kernels of feature m.
    Returns an MfkcModel holding the one pair (m, best kernel).
    """
    if not 0 <= m < grid.n_features:
        raise ParameterError('Feature index {} out of range'.format(m))
    beta, model, trace = learn_beta_for_kernel(grid.transposed(), m, C, tol,
                                               max_iter, svm_tol, svm_max_iter)
    q = stable_argmax(beta)
    log.info('Feature %d (%s) keeps kernel %d (%s), beta=%s', m,
             grid.feature_tags[m], q, grid.kernel_specs[q].kind,
             np.array2string(beta, precision=4))
    return MfkcModel(beta, [model], [(m, q)], [trace], grid.feature_tags,
                     grid.kernel_specs)


def to_record(model):
    arrays = {'beta': model.beta,
              'pairs': np.asarray(model.selected_pairs, dtype=np.int64)}
    attrs = {'feature_tags': model.feature_tags,
             'kernel_specs': [list(s) for s in model.kernel_specs or []]}
    for q, (machine, trace) in enumerate(zip(model.per_kernel_svm,
                                             model.objective_traces)):
        sub_arrays, sub_attrs = svm.to_record(machine)
        for key, value in sub_arrays.items():
            arrays['svm{}/{}'.format(q, key)] = value
        arrays['trace{}'.format(q)] = trace
        attrs['svm{}'.format(q)] = sub_attrs
    return arrays, attrs


def from_record(arrays, attrs):
    n = len(arrays['pairs'])
    machines, traces = [], []
    for q in range(n):
        prefix = 'svm{}/'.format(q)
        sub = dict((k[len(prefix):], v) for k, v in arrays.items()
                   if k.startswith(prefix))
        machines.append(svm.from_record(sub, attrs['svm{}'.format(q)]))
        traces.append(arrays['trace{}'.format(q)])
    specs = [KernelSpec(*s) for s in attrs.get('kernel_specs') or []]
    return MfkcModel(arrays['beta'], machines, arrays['pairs'], traces,
                     attrs.get('feature_tags'), specs)
