#!/usr/bin/env python
"""Helper functions used in mfkda tests"""

import numpy as np
from scipy.optimize import minimize

from mfkda.util import configure_logger  # noqa


def brute_force_dual(gram, y, C):
    """
    Optimum of the SVM dual  max 1'a - 1/2 a'YKYa,  y'a = 0, 0 <= a <= C
    by SLSQP; `C` may be a per-sample vector.
    """
    gram = np.asarray(gram, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    n = y.shape[0]
    upper = np.broadcast_to(np.asarray(C, dtype=np.float64), (n,))
    Q = np.outer(y, y) * gram

    def negative(a):
        return 0.5 * a.dot(Q).dot(a) - a.sum()

    def negative_grad(a):
        return Q.dot(a) - 1.0

    result = minimize(negative, np.zeros(n), jac=negative_grad,
                      method='SLSQP',
                      bounds=[(0.0, u) for u in upper],
                      constraints=[{'type': 'eq', 'fun': lambda a: a.dot(y),
                                    'jac': lambda a: y}],
                      options={'ftol': 1e-14, 'maxiter': 2000})
    return -float(result.fun), result.x


def blobs(centers, per_class, std, seed):
    """Gaussian clusters around `centers`, labels 0..K-1"""
    rng = np.random.RandomState(seed)
    centers = np.asarray(centers, dtype=np.float64)
    labels = np.repeat(np.arange(centers.shape[0]), per_class)
    points = centers[labels] + std * rng.randn(labels.shape[0],
                                               centers.shape[1])
    return points, labels
