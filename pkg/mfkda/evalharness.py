#!/usr/bin/env python
"""Nearest-neighbour recognition and biometric evaluation (rank-1/CMC/ROC)"""

import logging
import os

import numpy as np
from scipy.spatial.distance import cdist

from mfkda.errors import InputError, ParameterError

log = logging.getLogger(__name__)

FUSIONS = ('sum_normalized', 'min', 'vote')

SUMMARY_COLUMNS = ('rank1', 'auc', 'eer', 'n_probes', 'n_classes',
                   'da_target_overlap')


class ScoreMatrix(object):
    """
    n_probe x n_classes distances, lower is better. Every probe label must
    be one of the class ids.
    """

    def __init__(self, scores, probe_labels, class_ids):
        scores = np.array(scores, dtype=np.float64)
        probe_labels = np.asarray(probe_labels).ravel()
        class_ids = np.asarray(class_ids).ravel()
        if scores.ndim != 2 or scores.shape != (probe_labels.shape[0],
                                                class_ids.shape[0]):
            raise InputError('Score matrix shape {} does not match {} probes '
                             'and {} classes'.format(scores.shape,
                                                     probe_labels.shape[0],
                                                     class_ids.shape[0]))
        if not np.all(np.isfinite(scores)):
            raise InputError('Score matrix has non-finite entries')
        if len(np.unique(class_ids)) != len(class_ids):
            raise InputError('Class ids must be distinct')
        missing = np.setdiff1d(probe_labels, class_ids)
        if missing.size:
            raise InputError('Probe labels {} have no gallery class'
                             .format(missing.tolist()))
        scores.setflags(write=False)
        self._scores = scores
        self._probe_labels = probe_labels
        self._class_ids = class_ids

    @property
    def scores(self):
        return self._scores

    @property
    def probe_labels(self):
        return self._probe_labels

    @property
    def class_ids(self):
        return self._class_ids

    @property
    def n_probes(self):
        return self._scores.shape[0]

    @property
    def n_classes(self):
        return self._scores.shape[1]

    def true_columns(self):
        lookup = dict((c, i) for i, c in enumerate(self._class_ids.tolist()))
        return np.array([lookup[y] for y in self._probe_labels.tolist()],
                        dtype=np.int64)

    def ranks(self):
        """0-based rank of the true class; ties go to the lower class index"""
        order = np.argsort(self._scores, axis=1, kind='mergesort')
        truth = self.true_columns()
        return np.array([int(np.flatnonzero(row == t)[0])
                         for row, t in zip(order, truth)], dtype=np.int64)


def class_distances(gallery, gallery_labels, probes, class_ids, k=1):
    """Per class, mean of the k smallest Euclidean distances (k=1: nearest)"""
    gallery = np.atleast_2d(np.asarray(gallery, dtype=np.float64))
    probes = np.atleast_2d(np.asarray(probes, dtype=np.float64))
    if gallery.shape[1] != probes.shape[1]:
        raise InputError('Gallery and probe embeddings differ in dimension: '
                         '{} vs {}'.format(gallery.shape[1], probes.shape[1]))
    if int(k) != k or k < 1:
        raise ParameterError('k must be a positive integer, got {}'.format(k))
    dists = cdist(probes, gallery)
    out = np.empty((probes.shape[0], len(class_ids)))
    for j, c in enumerate(class_ids):
        mask = gallery_labels == c
        if not mask.any():
            raise InputError('Gallery class {} is empty'.format(c))
        block = np.sort(dists[:, mask], axis=1)[:, :k]
        out[:, j] = block.mean(axis=1)
    return out


def minmax_normalize(dists):
    lo, hi = dists.min(), dists.max()
    if hi <= lo:
        return np.zeros_like(dists)
    return (dists - lo) / (hi - lo)


def fuse(per_pair, fusion='sum_normalized'):
    if fusion not in FUSIONS:
        raise ParameterError('Unknown fusion `{}`, choose from {}'
                             .format(fusion, FUSIONS))
    if len(per_pair) == 1:
        return per_pair[0]
    if fusion == 'vote':
        votes = np.zeros_like(per_pair[0])
        rows = np.arange(votes.shape[0])
        for dists in per_pair:
            votes[rows, np.argmin(dists, axis=1)] += 1
        return (len(per_pair) - votes) / float(len(per_pair))
    normed = [minmax_normalize(d) for d in per_pair]
    if fusion == 'min':
        return np.minimum.reduce(normed)
    return np.sum(normed, axis=0)


def knn_score(gallery, gallery_labels, probes, probe_labels,
              fusion='sum_normalized', k=1, class_ids=None):
    """
    `gallery` and `probes` hold one embedding matrix per selected pair; all
    pairs describe the same samples in the same order.
    """
    if len(gallery) < 1 or len(gallery) != len(probes):
        raise InputError('Need P >= 1 gallery and probe embeddings, got {} '
                         'and {}'.format(len(gallery), len(probes)))
    gallery_labels = np.asarray(gallery_labels).ravel()
    if class_ids is None:
        class_ids = np.unique(gallery_labels)
    per_pair = [class_distances(g, gallery_labels, p, class_ids, k)
                for g, p in zip(gallery, probes)]
    return ScoreMatrix(fuse(per_pair, fusion), probe_labels, class_ids)


def rank1(sm):
    return float(np.mean(sm.ranks() == 0))


def cmc(sm):
    ranks = sm.ranks()
    return np.array([np.mean(ranks <= r) for r in range(sm.n_classes)])


def roc(genuine, impostor):
    """
    Accept when score <= threshold, sweeping every distinct score.
    Returns ((far, tar) points from (0, 0), trapezoid AUC).
    """
    genuine = np.asarray(genuine, dtype=np.float64).ravel()
    impostor = np.asarray(impostor, dtype=np.float64).ravel()
    if genuine.size == 0 or impostor.size == 0:
        raise InputError('ROC needs non-empty genuine and impostor scores')
    thresholds = np.unique(np.concatenate([genuine, impostor]))
    gen = np.sort(genuine)
    imp = np.sort(impostor)
    tar = np.searchsorted(gen, thresholds, side='right') / float(gen.size)
    far = np.searchsorted(imp, thresholds, side='right') / float(imp.size)
    points = np.vstack([[0.0, 0.0], np.column_stack([far, tar])])
    auc = float(np.sum(np.diff(points[:, 0]) *
                       (points[1:, 1] + points[:-1, 1]) / 2.0))
    return points, min(max(auc, 0.0), 1.0)


def equal_error_rate(points):
    """FAR at the sweep point closest to FAR = 1 - TAR, averaged with FRR"""
    far, frr = points[:, 0], 1.0 - points[:, 1]
    i = int(np.argmin(np.abs(far - frr)))
    return float(0.5 * (far[i] + frr[i]))


def verification_scores(sm):
    """Genuine: distance to the true class. Impostor: to every other class."""
    truth = sm.true_columns()
    mask = np.zeros(sm.scores.shape, dtype=bool)
    mask[np.arange(sm.n_probes), truth] = True
    return sm.scores[mask], sm.scores[~mask]


class EvalReport(object):

    def __init__(self, rank1, cmc, roc_points, auc, eer=None, n_probes=0,
                 da_target_overlap=False):
        cmc = np.asarray(cmc, dtype=np.float64)
        roc_points = np.atleast_2d(np.asarray(roc_points, dtype=np.float64))
        if roc_points.size == 0 or roc_points.shape[1] != 2:
            raise InputError('A report needs ROC points')
        if np.any(np.diff(cmc) < 0) or abs(cmc[-1] - 1.0) > 1e-12:
            raise InputError('CMC must be non-decreasing and end at 1')
        if np.any(np.diff(roc_points[:, 0]) < 0) or \
                np.any(np.diff(roc_points[:, 1]) < 0):
            raise InputError('ROC points must be sorted with non-decreasing '
                             'TAR')
        if not 0 <= rank1 <= 1 or not 0 <= auc <= 1:
            raise InputError('rank-1 and AUC must lie in [0, 1]')
        self.rank1 = float(rank1)
        self.cmc = cmc
        self.roc_points = roc_points
        self.auc = float(auc)
        self.eer = equal_error_rate(roc_points) if eer is None else float(eer)
        self.n_probes = int(n_probes)
        self.da_target_overlap = bool(da_target_overlap)

    @property
    def n_classes(self):
        return self.cmc.shape[0]

    def summary(self):
        return [self.rank1, self.auc, self.eer, self.n_probes,
                self.n_classes, int(self.da_target_overlap)]

    def __repr__(self):
        return 'EvalReport(rank1={:.4f}, auc={:.4f}, eer={:.4f})'.format(
            self.rank1, self.auc, self.eer)


def evaluate(sm, da_target_overlap=False):
    points, auc = roc(*verification_scores(sm))
    report = EvalReport(rank1(sm), cmc(sm), points, auc,
                        n_probes=sm.n_probes,
                        da_target_overlap=da_target_overlap)
    log.info('Rank-1 %.4f, AUC %.4f, EER %.4f over %d probes', report.rank1,
             report.auc, report.eer, sm.n_probes)
    return report


def export_report(report, directory):
    """Write summary.csv, cmc.csv and roc.csv under `directory`"""
    if not os.path.isdir(directory):
        os.makedirs(directory)
    np.savetxt(os.path.join(directory, 'summary.csv'),
               np.atleast_2d(report.summary()), fmt='%.17g', delimiter=',',
               header=','.join(SUMMARY_COLUMNS), comments='')
    ranks = np.arange(1, report.n_classes + 1)
    np.savetxt(os.path.join(directory, 'cmc.csv'),
               np.column_stack([ranks, report.cmc]), fmt=('%d', '%.17g'),
               delimiter=',', header='rank,rate', comments='')
    np.savetxt(os.path.join(directory, 'roc.csv'), report.roc_points,
               fmt='%.17g', delimiter=',', header='far,tar', comments='')
    log.debug('Report written to `%s`', directory)


def load_report(directory):
    def _read(name):
        return np.loadtxt(os.path.join(directory, name), delimiter=',',
                          skiprows=1, ndmin=2)
    summary = _read('summary.csv')[0]
    return EvalReport(summary[0], _read('cmc.csv')[:, 1], _read('roc.csv'),
                      summary[1], eer=summary[2], n_probes=summary[3],
                      da_target_overlap=bool(summary[5]))
