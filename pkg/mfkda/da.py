#!/usr/bin/env python
"""Max-margin domain transform learned by coordinate descent"""

import logging

import numpy as np

from mfkda import svm
from mfkda.errors import DivergenceError, InputError, ParameterError

log = logging.getLogger(__name__)

INNER_ITER = 500
INNER_TOL = 1e-6


def delta(y, k):
    return 1 if y == k else -1


def augment(x):
    x = np.atleast_2d(np.asarray(x, dtype=np.float64))
    return np.hstack([x, np.ones((x.shape[0], 1))])


class DaProblem(object):
    """
    Labeled source points, a few labeled target points and the two hinge
    weights. Classes are the sorted source label set.
    """

    def __init__(self, source_x, source_y, target_x, target_y, C_S=1.0,
                 C_T=10.0):
        source_x = np.atleast_2d(np.asarray(source_x, dtype=np.float64))
        source_y = np.asarray(source_y).ravel()
        dim = source_x.shape[1]
        target_x = np.asarray(target_x, dtype=np.float64).reshape(-1, dim)
        target_y = np.asarray(target_y).ravel()
        if source_y.shape[0] != source_x.shape[0] or \
                target_y.shape[0] != target_x.shape[0]:
            raise InputError('DA labels do not match the point counts')
        if not (np.all(np.isfinite(source_x)) and
                np.all(np.isfinite(target_x))):
            raise InputError('DA points must be finite')
        if C_S < 0 or C_T < 0 or not (C_S > 0 or C_T > 0):
            raise ParameterError('C_S and C_T must be non-negative and not '
                                 'both zero, got {} and {}'.format(C_S, C_T))
        class_ids = np.unique(source_y)
        if len(class_ids) < 2:
            raise ParameterError('DA needs K >= 2 source classes')
        unknown = np.setdiff1d(target_y, class_ids)
        if unknown.size:
            raise InputError('Target labels {} are absent from the source'
                             .format(unknown.tolist()))
        if target_x.shape[0] == 0:
            log.warning('DA target set is empty, adapting on source only')
        self._source_x = source_x
        self._source_y = source_y
        self._target_x = target_x
        self._target_y = target_y
        self._C_S = float(C_S)
        self._C_T = float(C_T)
        self._class_ids = class_ids

    @property
    def source_x(self):
        return self._source_x

    @property
    def source_y(self):
        return self._source_y

    @property
    def target_x(self):
        return self._target_x

    @property
    def target_y(self):
        return self._target_y

    @property
    def C_S(self):
        return self._C_S

    @property
    def C_T(self):
        return self._C_T

    @property
    def class_ids(self):
        return self._class_ids

    @property
    def n_classes(self):
        return len(self._class_ids)

    @property
    def dim(self):
        return self._source_x.shape[1]

    @property
    def n_source(self):
        return self._source_x.shape[0]

    @property
    def n_target(self):
        return self._target_x.shape[0]

    def signs(self, labels):
        """K x n matrix of delta(y_i, k)"""
        return np.vstack([np.where(labels == k, 1.0, -1.0)
                          for k in self._class_ids])

    def with_weights(self, C_S=None, C_T=None):
        return DaProblem(self._source_x, self._source_y, self._target_x,
                         self._target_y,
                         self._C_S if C_S is None else C_S,
                         self._C_T if C_T is None else C_T)


class DaTransform(object):

    def __init__(self, W, theta, bias, class_ids, objective_trace):
        W = np.array(W, dtype=np.float64)
        theta = np.atleast_2d(np.array(theta, dtype=np.float64))
        bias = np.array(bias, dtype=np.float64).ravel()
        if W.shape != (theta.shape[1] + 1,) * 2:
            raise InputError('W must be (d+1) x (d+1) for d={}'
                             .format(theta.shape[1]))
        for arr in (W, theta, bias):
            if not np.all(np.isfinite(arr)):
                raise DivergenceError('DA transform has non-finite entries')
            arr.setflags(write=False)
        self._W = W
        self._theta = theta
        self._bias = bias
        self._class_ids = np.asarray(class_ids)
        self._trace = np.asarray(objective_trace, dtype=np.float64)

    @property
    def W(self):
        return self._W

    @property
    def theta(self):
        return self._theta

    @property
    def bias(self):
        return self._bias

    @property
    def hyperplanes(self):
        return list(zip(self._theta, self._bias))

    @property
    def class_ids(self):
        return self._class_ids

    @property
    def objective_trace(self):
        return self._trace

    def transform(self, x):
        return transform_source(self._W, x)

    def decision_values(self, x):
        """n x K linear scores of already-transformed (or target) points"""
        x = np.atleast_2d(np.asarray(x, dtype=np.float64))
        return x.dot(self._theta.T) + self._bias

    def predict(self, x):
        scores = self.decision_values(x)
        return self._class_ids[np.argmax(scores, axis=1)]


def transform_source(W, x):
    W = np.asarray(W, dtype=np.float64)
    x = np.asarray(x, dtype=np.float64)
    single = x.ndim == 1
    x = np.atleast_2d(x)
    if W.shape != (x.shape[1] + 1,) * 2:
        raise InputError('W of shape {} cannot act on {}-D points'
                         .format(W.shape, x.shape[1]))
    out = augment(x).dot(W.T)[:, :-1]
    return out[0] if single else out


def _hinge(margins):
    return np.maximum(0.0, 1.0 - margins)


def da_objective(problem, W, theta, bias):
    W = np.asarray(W, dtype=np.float64)
    theta = np.atleast_2d(np.asarray(theta, dtype=np.float64))
    bias = np.asarray(bias, dtype=np.float64).ravel()
    d = problem.dim
    if W.shape != (d + 1, d + 1) or theta.shape != (problem.n_classes, d) \
            or bias.shape != (problem.n_classes,):
        raise InputError('DA parameters do not match the problem dimensions')
    planes = np.hstack([theta, bias[:, None]])
    source = augment(problem.source_x).dot(W.T).dot(planes.T).T
    target = augment(problem.target_x).dot(planes.T).T
    value = 0.5 * np.sum(W * W) + 0.5 * np.sum(theta * theta)
    value += problem.C_S * _hinge(problem.signs(problem.source_y) *
                                  source).sum()
    value += problem.C_T * _hinge(problem.signs(problem.target_y) *
                                  target).sum()
    return float(value)


def subgradient_W(problem, W, theta, bias):
    """A subgradient of the objective with respect to every entry of W"""
    W = np.asarray(W, dtype=np.float64)
    theta = np.atleast_2d(np.asarray(theta, dtype=np.float64))
    bias = np.asarray(bias, dtype=np.float64).ravel()
    planes = np.hstack([theta, bias[:, None]])
    x_aug = augment(problem.source_x)
    signs = problem.signs(problem.source_y)
    margins = signs * x_aug.dot(W.T).dot(planes.T).T
    # K x n_S weights of the active hinge terms
    active = np.where(margins < 1.0, signs, 0.0)
    return W - problem.C_S * planes.T.dot(active).dot(x_aug)


def _solve_plane(gram, signs, upper, z, tol):
    live = upper > 0
    present = np.unique(signs[live])
    d = z.shape[1]
    if present.size < 2:
        # one-sided problem: theta = 0 with the bias on the margin
        return np.zeros(d), float(present[0]) if present.size else 0.0
    model = svm.train_binary(gram, signs, upper, tol)
    return z.T.dot(model.dual_coef), model.bias


def fit_hyperplanes(problem, W, tol=1e-8):
    """Hinge step with W fixed: one weighted linear SVM per class"""
    z = problem.source_x
    if W is not None:
        z = transform_source(W, problem.source_x)
    z = np.vstack([z, problem.target_x])
    labels = np.concatenate([problem.source_y, problem.target_y])
    upper = np.concatenate([np.full(problem.n_source, problem.C_S),
                            np.full(problem.n_target, problem.C_T)])
    gram = z.dot(z.T)
    theta, bias = [], []
    for signs in problem.signs(labels):
        t, b = _solve_plane(gram, signs, upper, z, tol)
        theta.append(t)
        bias.append(b)
    return np.vstack(theta), np.asarray(bias)


def fit_transform_matrix(problem, W, theta, bias, inner_iter=INNER_ITER,
                         inner_tol=INNER_TOL):
    """
    Transform step with the hyperplanes fixed. Subgradient descent on the
    top d rows of W with step eta_0 / (1 + t), keeping the best iterate; the
    last row stays (0, ..., 0, 1).
    """
    W = np.array(W, dtype=np.float64)
    d = problem.dim
    if problem.C_S == 0 or problem.n_source == 0:
        W[:d] = 0.0
        return W
    eta0 = 1.0 / (problem.C_S * problem.n_source * problem.n_classes)
    best, best_value = W.copy(), da_objective(problem, W, theta, bias)
    for t in range(inner_iter):
        step = (eta0 / (1.0 + t)) * subgradient_W(problem, W, theta, bias)
        step[d] = 0.0
        W -= step
        value = da_objective(problem, W, theta, bias)
        if value < best_value:
            best, best_value = W.copy(), value
        if np.sqrt(np.sum(step * step)) < inner_tol:
            break
    return best


def train_transform(problem, sweeps=10, tol=1e-6, inner_iter=INNER_ITER,
                    inner_tol=INNER_TOL, svm_tol=1e-8):
    d = problem.dim
    W = np.eye(d + 1)
    theta, bias = fit_hyperplanes(problem, W, svm_tol)
    value = da_objective(problem, W, theta, bias)
    if not np.isfinite(value):
        raise DivergenceError('DA objective is not finite at initialization')
    trace = [value]
    log.debug('DA init: J=%.8g', value)
    for sweep in range(sweeps):
        W = fit_transform_matrix(problem, W, theta, bias, inner_iter,
                                 inner_tol)
        new_theta, new_bias = fit_hyperplanes(problem, W, svm_tol)
        old = da_objective(problem, W, theta, bias)
        new = da_objective(problem, W, new_theta, new_bias)
        if not (np.isfinite(old) and np.isfinite(new)):
            raise DivergenceError('DA objective is not finite at sweep {}'
                                  .format(sweep))
        if new <= old:
            theta, bias, value = new_theta, new_bias, new
        else:
            value = old
        improvement = trace[-1] - value
        trace.append(value)
        log.debug('DA sweep %d: J=%.8g', sweep, value)
        if improvement < tol:
            break
    return DaTransform(W, theta, bias, problem.class_ids, trace)


def to_record(transform):
    return ({'W': transform.W, 'theta': transform.theta,
             'bias': transform.bias,
             'class_ids': np.asarray(transform.class_ids),
             'trace': transform.objective_trace}, {})


def from_record(arrays, attrs=None):
    return DaTransform(arrays['W'], arrays['theta'], arrays['bias'],
                       arrays['class_ids'], arrays['trace'])
