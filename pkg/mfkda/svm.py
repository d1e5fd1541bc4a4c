#!/usr/bin/env python
"""Soft-margin SVM dual solver (SMO) on precomputed Gram matrices"""

import logging

import numpy as np

from mfkda.errors import ConvergenceError, InputError, ParameterError
from mfkda.util import stable_argmax

log = logging.getLogger(__name__)

SUPPORT_EPS = 1e-10
TAU = 1e-12


class BinarySvmModel(object):
    """
    Dual solution of a single binary soft-margin SVM.

    `C` may be a scalar or a per-sample vector of box bounds; samples with a
    zero bound never enter the solution.
    """

    def __init__(self, alpha, bias, labels, C, kernel=None, iterations=0):
        alpha = np.array(alpha, dtype=np.float64)
        labels = np.array(labels, dtype=np.float64)
        upper = np.broadcast_to(np.asarray(C, dtype=np.float64),
                                alpha.shape).copy()
        for arr in (alpha, labels, upper):
            arr.setflags(write=False)
        self._alpha = alpha
        self._bias = float(bias)
        self._labels = labels
        self._upper = upper
        self._C = C if np.ndim(C) == 0 else upper
        self._kernel = kernel
        self._iterations = int(iterations)

    @property
    def alpha(self):
        return self._alpha

    @property
    def bias(self):
        return self._bias

    @property
    def labels(self):
        return self._labels

    @property
    def C(self):
        return self._C

    @property
    def upper_bounds(self):
        return self._upper

    @property
    def kernel(self):
        return self._kernel

    @property
    def iterations(self):
        return self._iterations

    @property
    def n_samples(self):
        return self._alpha.shape[0]

    @property
    def support_indices(self):
        return np.flatnonzero(self._alpha > SUPPORT_EPS)

    @property
    def dual_coef(self):
        """alpha_i * y_i"""
        return self._alpha * self._labels

    def __repr__(self):
        return 'BinarySvmModel(n={}, n_support={}, b={:.6g})'.format(
            self.n_samples, len(self.support_indices), self._bias)


class MulticlassSvmModel(object):

    def __init__(self, machines, class_ids):
        class_ids = np.asarray(class_ids)
        if len(machines) != len(class_ids):
            raise InputError('Need one machine per class')
        if len(np.unique(class_ids)) != len(class_ids):
            raise InputError('Class ids must be distinct')
        self._machines = tuple(machines)
        self._class_ids = class_ids

    @property
    def machines(self):
        return self._machines

    @property
    def class_ids(self):
        return self._class_ids

    @property
    def n_classes(self):
        return len(self._machines)

    @property
    def dual_coef(self):
        """K x N matrix of alpha_i * y_i"""
        return np.vstack([m.dual_coef for m in self._machines])

    @property
    def biases(self):
        return np.array([m.bias for m in self._machines])

    def __getitem__(self, index):
        return self._machines[index]

    def __len__(self):
        return len(self._machines)


def _check_binary_problem(values, y, C):
    if values.ndim != 2 or values.shape[0] != values.shape[1]:
        raise InputError('SVM training needs a square Gram matrix, got {}'
                         .format(values.shape))
    n = values.shape[0]
    y = np.asarray(y, dtype=np.float64).ravel()
    if y.shape[0] != n:
        raise InputError('Got {} labels for a Gram of size {}'
                         .format(y.shape[0], n))
    if not np.all(np.isin(y, (-1.0, 1.0))):
        raise InputError('Binary labels must be -1 or +1')
    upper = np.broadcast_to(np.asarray(C, dtype=np.float64), (n,)).copy()
    if np.any(upper < 0) or not np.any(upper > 0) or \
            not np.all(np.isfinite(upper)):
        raise ParameterError('C must be positive')
    if np.ndim(C) == 0 and not C > 0:
        raise ParameterError('C must be positive, got {}'.format(C))
    active = upper > 0
    if len(np.unique(y[active])) < 2:
        raise InputError('Both classes must be present to train a binary SVM')
    return y, upper


def _violating_sets(alpha, y, upper):
    below = alpha < upper
    above = alpha > 0
    up = (below & (y > 0)) | (above & (y < 0))
    low = (below & (y < 0)) | (above & (y > 0))
    return up, low


def _gap(grad, alpha, y, upper):
    up, low = _violating_sets(alpha, y, upper)
    if not up.any() or not low.any():
        return 0.0
    score = -y * grad
    return float(score[up].max() - score[low].min())


def _select_pair(values, diag, grad, alpha, y, upper, tol):
    """Second order working set selection, returns (i, j, gap)"""
    up, low = _violating_sets(alpha, y, upper)
    if not up.any() or not low.any():
        return -1, -1, 0.0
    score = -y * grad
    up_idx = np.flatnonzero(up)
    i = int(up_idx[np.argmax(score[up_idx])])
    g_max = score[i]
    low_idx = np.flatnonzero(low)
    g_min = score[low_idx].min()
    gap = float(g_max - g_min)
    if gap < tol:
        return -1, -1, gap
    cand = low_idx[score[low_idx] < g_max]
    b = g_max - score[cand]
    a = diag[i] + diag[cand] - 2.0 * values[i, cand]
    a = np.where(a > 0, a, TAU)
    j = int(cand[np.argmin(-(b * b) / a)])
    return i, j, gap


def _update_pair(values, y, upper, alpha, grad, i, j):
    old_i, old_j = alpha[i], alpha[j]
    c_i, c_j = upper[i], upper[j]
    k_ij = values[i, j]
    if y[i] != y[j]:
        quad = values[i, i] + values[j, j] + 2.0 * k_ij * y[i] * y[j]
        quad = quad if quad > 0 else TAU
        delta = (-grad[i] - grad[j]) / quad
        diff = old_i - old_j
        a_i = old_i + delta
        a_j = old_j + delta
        if diff > 0:
            if a_j < 0:
                a_j, a_i = 0.0, diff
        else:
            if a_i < 0:
                a_i, a_j = 0.0, -diff
        if diff > c_i - c_j:
            if a_i > c_i:
                a_i, a_j = c_i, c_i - diff
        else:
            if a_j > c_j:
                a_j, a_i = c_j, c_j + diff
    else:
        quad = values[i, i] + values[j, j] - 2.0 * k_ij * y[i] * y[j]
        quad = quad if quad > 0 else TAU
        delta = (grad[i] - grad[j]) / quad
        total = old_i + old_j
        a_i = old_i - delta
        a_j = old_j + delta
        if total > c_i:
            if a_i > c_i:
                a_i, a_j = c_i, total - c_i
        else:
            if a_j < 0:
                a_j, a_i = 0.0, total
        if total > c_j:
            if a_j > c_j:
                a_j, a_i = c_j, total - c_j
        else:
            if a_i < 0:
                a_i, a_j = 0.0, total
    alpha[i], alpha[j] = a_i, a_j
    d_i, d_j = a_i - old_i, a_j - old_j
    # grad = Q alpha - 1 with Q_st = y_s y_t K_st
    grad += y * (values[:, i] * (y[i] * d_i) + values[:, j] * (y[j] * d_j))


def _bias(grad, alpha, y, upper):
    active = upper > 0
    y_grad = y * grad
    free = active & (alpha > 0) & (alpha < upper)
    if free.any():
        return float(np.mean(-y_grad[free]))
    at_upper = active & (alpha >= upper)
    at_lower = active & (alpha <= 0)
    ub_mask = (at_upper & (y < 0)) | (at_lower & (y > 0))
    lb_mask = (at_upper & (y > 0)) | (at_lower & (y < 0))
    ub = y_grad[ub_mask].min() if ub_mask.any() else np.inf
    lb = y_grad[lb_mask].max() if lb_mask.any() else -np.inf
    if np.isinf(ub) and np.isinf(lb):
        return 0.0
    if np.isinf(ub):
        rho = lb
    elif np.isinf(lb):
        rho = ub
    else:
        rho = 0.5 * (ub + lb)
    return float(-rho)


def train_binary(g, y, C, tol=1e-6, max_iter=None, kernel=None):
    """
    Solve  max sum(alpha) - 1/2 sum_ij alpha_i alpha_j y_i y_j K_ij
    subject to sum(alpha * y) = 0 and 0 <= alpha_i <= C_i.

    Raises ConvergenceError after `max_iter` SMO steps (default 1e5 * N); the
    error's `model` is the last iterate.
    """
    values = np.asarray(g, dtype=np.float64)
    y, upper = _check_binary_problem(values, y, C)
    if kernel is None:
        kernel = getattr(g, 'spec', None)
    n = y.shape[0]
    if max_iter is None:
        max_iter = 100000 * n
    diag = np.diag(values).copy()
    alpha = np.zeros(n)
    grad = -np.ones(n)
    iterations = 0
    gap = np.inf
    while True:
        i, j, gap = _select_pair(values, diag, grad, alpha, y, upper, tol)
        if i < 0:
            break
        if iterations >= max_iter:
            model = BinarySvmModel(alpha, _bias(grad, alpha, y, upper), y, C,
                                   kernel, iterations)
            raise ConvergenceError('SMO did not converge in {} iterations '
                                   '(KKT gap {:.3g} > {:.3g})'
                                   .format(max_iter, gap, tol), model=model)
        _update_pair(values, y, upper, alpha, grad, i, j)
        iterations += 1
    alpha = np.clip(alpha, 0.0, upper)
    log.debug('SMO converged after %d iterations (gap %.3g, n=%d)',
              iterations, gap, n)
    return BinarySvmModel(alpha, _bias(grad, alpha, y, upper), y, C, kernel,
                          iterations)


def decision_values(model, g_test):
    values = np.atleast_2d(np.asarray(g_test, dtype=np.float64))
    if values.shape[1] != model.n_samples:
        raise InputError('Test Gram has {} columns, model was trained on {}'
                         .format(values.shape[1], model.n_samples))
    return values.dot(model.dual_coef) + model.bias


def dual_objective(model, g):
    values = np.asarray(g, dtype=np.float64)
    coef = model.dual_coef
    return float(model.alpha.sum() - 0.5 * coef.dot(values).dot(coef))


def kkt_violation(model, g, y=None):
    """Maximal violating-pair gap; zero at an exact optimum"""
    values = np.asarray(g, dtype=np.float64)
    y = model.labels if y is None else np.asarray(y, dtype=np.float64)
    if values.shape != (model.n_samples, model.n_samples):
        raise InputError('Gram shape {} does not match the model'
                         .format(values.shape))
    grad = y * values.dot(model.dual_coef) - 1.0
    upper = model.upper_bounds
    alpha = model.alpha
    if np.any(alpha < -SUPPORT_EPS) or np.any(alpha > upper + SUPPORT_EPS):
        return np.inf
    return max(_gap(grad, alpha, y, upper), abs(float(alpha.dot(y))))


def train_one_vs_rest(g, labels, C, tol=1e-6, max_iter=None, class_ids=None):
    labels = np.asarray(labels).ravel()
    if class_ids is None:
        class_ids = np.unique(labels)
    class_ids = np.asarray(class_ids)
    if len(class_ids) < 2:
        raise ParameterError('One-vs-rest needs K >= 2 classes, got {}'
                             .format(len(class_ids)))
    machines = []
    for k in class_ids:
        mask = labels == k
        if not mask.any():
            raise InputError('Class {} has no training samples'.format(k))
        y = np.where(mask, 1.0, -1.0)
        try:
            machines.append(train_binary(g, y, C, tol, max_iter))
        except ConvergenceError as e:
            log.warning('Machine for class %s did not converge', k)
            raise ConvergenceError(str(e), model=e.model)
    return MulticlassSvmModel(machines, class_ids)


def multiclass_decision_values(model, g_test):
    """N_test x K matrix of per-machine decision values"""
    return np.column_stack([decision_values(m, g_test)
                            for m in model.machines])


def predict(model, g_test):
    scores = multiclass_decision_values(model, g_test)
    picks = [stable_argmax(row) for row in scores]
    return model.class_ids[picks]


def to_record(model):
    """Flatten a (multiclass) model into checkpoint arrays and attrs"""
    if isinstance(model, BinarySvmModel):
        model = MulticlassSvmModel([model], [1])
        kind = 'binary'
    else:
        kind = 'one_vs_rest'
    first = model.machines[0]
    arrays = {
        'alpha': np.vstack([m.alpha for m in model.machines]),
        'labels': np.vstack([m.labels for m in model.machines]),
        'upper': first.upper_bounds,
        'bias': model.biases,
        'class_ids': np.asarray(model.class_ids),
        'support': first.support_indices,
    }
    attrs = {
        'kind': kind,
        'C': float(first.C) if np.ndim(first.C) == 0 else None,
        'kernel': list(first.kernel) if first.kernel is not None else None,
    }
    return arrays, attrs


def from_record(arrays, attrs):
    C = attrs.get('C')
    if C is None:
        C = np.asarray(arrays['upper'])
    machines = [BinarySvmModel(alpha, bias, labels, C)
                for alpha, bias, labels in zip(arrays['alpha'],
                                               arrays['bias'],
                                               arrays['labels'])]
    if attrs.get('kind') == 'binary':
        return machines[0]
    return MulticlassSvmModel(machines, arrays['class_ids'])
