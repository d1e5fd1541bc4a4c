#!/usr/bin/env python

import logging
import math
import os
import shutil
import tempfile
import unittest

import numpy as np

from mfkda.errors import InputError, ParameterError
from mfkda.evalharness import (EvalReport, ScoreMatrix, class_distances, cmc,
                               equal_error_rate, evaluate, export_report,
                               fuse, knn_score, load_report, rank1, roc,
                               verification_scores)
from mfkda.tests import configure_logger

log = logging.getLogger(__name__)

SEED = 31
N_RANDOM = 100

GALLERY = np.array([[0.0, 0.0], [1.0, 0.0], [0.0, 3.0], [4.0, 0.0],
                    [4.0, 4.0]])
GALLERY_LABELS = np.array([0, 0, 1, 2, 2])
PROBES = np.array([[0.0, 1.0], [4.0, 1.0]])
PROBE_LABELS = np.array([0, 2])
HAND_TABLE = [[1.0, 2.0, math.sqrt(17)],
              [math.sqrt(10), math.sqrt(20), 1.0]]


def random_score_matrix(rng):
    n_probes = rng.randint(1, 12)
    n_classes = rng.randint(2, 6)
    labels = rng.randint(0, n_classes, n_probes)
    return ScoreMatrix(rng.rand(n_probes, n_classes), labels,
                       np.arange(n_classes))


def brute_force_ranks(sm):
    ranks = []
    for row, label in zip(sm.scores, sm.probe_labels):
        t = int(np.flatnonzero(sm.class_ids == label)[0])
        # strictly better classes plus equal ones with a lower index
        ranks.append(sum(1 for j, s in enumerate(row)
                         if s < row[t] or (s == row[t] and j < t)))
    return np.array(ranks)


class KnnScoreTest(unittest.TestCase):

    def test_hand_table(self):
        sm = knn_score([GALLERY], GALLERY_LABELS, [PROBES], PROBE_LABELS)
        np.testing.assert_allclose(sm.scores, HAND_TABLE, atol=1e-12)
        np.testing.assert_array_equal(sm.class_ids, [0, 1, 2])
        self.assertEqual(rank1(sm), 1.0)

    def test_coinciding_probe(self):
        sm = knn_score([GALLERY], GALLERY_LABELS, [GALLERY[2:3]], [1])
        self.assertEqual(sm.scores[0, 1], 0.0)
        self.assertEqual(rank1(sm), 1.0)

    def test_identical_pairs(self):
        rng = np.random.RandomState(SEED)
        gallery = rng.randn(12, 3)
        labels = np.arange(12) % 4
        probes = rng.randn(7, 3)
        probe_labels = rng.randint(0, 4, 7)
        single = knn_score([gallery], labels, [probes], probe_labels)
        for fusion in ('sum_normalized', 'min'):
            double = knn_score([gallery, gallery], labels, [probes, probes],
                               probe_labels, fusion=fusion)
            np.testing.assert_array_equal(double.ranks(), single.ranks())
        # votes only keep the winner apart
        voted = knn_score([gallery, gallery], labels, [probes, probes],
                          probe_labels, fusion='vote')
        self.assertEqual(rank1(voted), rank1(single))

    def test_rescaled_pair(self):
        rng = np.random.RandomState(SEED)
        labels = np.arange(10) % 5
        probe_labels = rng.randint(0, 5, 6)
        for _ in range(10):
            gallery = [rng.randn(10, 4), rng.randn(10, 2)]
            probes = [rng.randn(6, 4), rng.randn(6, 2)]
            base = knn_score(gallery, labels, probes, probe_labels)
            scale = rng.uniform(0.1, 10.0)
            scaled = knn_score([gallery[0] * scale, gallery[1]], labels,
                               [probes[0] * scale, probes[1]], probe_labels)
            np.testing.assert_allclose(scaled.scores, base.scores,
                                       atol=1e-12)

    def test_k_nearest(self):
        dists = class_distances(GALLERY, GALLERY_LABELS, PROBES[:1],
                                [0, 1, 2], k=2)
        # class 1 has one point, the mean runs over what is there
        np.testing.assert_allclose(
            dists, [[0.5 * (1 + math.sqrt(2)), 2.0,
                     0.5 * (math.sqrt(17) + 5.0)]], atol=1e-12)

    def test_fusion_rules(self):
        a = np.array([[0.0, 1.0, 2.0]])
        b = np.array([[4.0, 0.0, 2.0]])
        np.testing.assert_allclose(fuse([a, b]), [[1.0, 0.5, 1.5]])
        np.testing.assert_allclose(fuse([a, b], 'min'), [[0.0, 0.0, 0.5]])
        np.testing.assert_allclose(fuse([a, b], 'vote'), [[0.5, 0.5, 1.0]])
        np.testing.assert_array_equal(fuse([b], 'vote'), b)
        with self.assertRaises(ParameterError):
            fuse([a, b], 'product')

    def test_errors(self):
        with self.assertRaises(InputError):
            knn_score([GALLERY], GALLERY_LABELS, [PROBES], PROBE_LABELS,
                      class_ids=[0, 1, 2, 3])
        with self.assertRaises(InputError):
            knn_score([GALLERY], GALLERY_LABELS, [np.ones((1, 3))], [0])
        with self.assertRaises(InputError):
            knn_score([], GALLERY_LABELS, [], PROBE_LABELS)
        with self.assertRaises(InputError):
            knn_score([GALLERY], GALLERY_LABELS, [PROBES], [0, 9])
        with self.assertRaises(ParameterError):
            knn_score([GALLERY], GALLERY_LABELS, [PROBES], PROBE_LABELS, k=0)


class RankTest(unittest.TestCase):

    def test_perfect(self):
        sm = ScoreMatrix(1.0 - np.eye(4), [0, 1, 2, 3], [0, 1, 2, 3])
        self.assertEqual(rank1(sm), 1.0)
        np.testing.assert_array_equal(cmc(sm), np.ones(4))

    def test_full_ties(self):
        sm = ScoreMatrix(np.ones((4, 4)), [0, 1, 2, 3], [0, 1, 2, 3])
        self.assertEqual(rank1(sm), 0.25)
        np.testing.assert_array_equal(sm.ranks(), [0, 1, 2, 3])

    def test_hand_instance(self):
        scores = [[0.2, 0.1, 0.9], [0.5, 0.5, 0.1], [0.3, 0.6, 0.5]]
        sm = ScoreMatrix(scores, [0, 1, 2], [0, 1, 2])
        np.testing.assert_array_equal(sm.ranks(), [1, 2, 1])
        np.testing.assert_allclose(cmc(sm), [0.0, 2.0 / 3, 1.0])

    def test_random_matrices(self):
        rng = np.random.RandomState(SEED)
        for _ in range(N_RANDOM):
            sm = random_score_matrix(rng)
            curve = cmc(sm)
            self.assertTrue(np.all(np.diff(curve) >= 0))
            self.assertEqual(curve[0], rank1(sm))
            self.assertEqual(curve[-1], 1.0)
            np.testing.assert_array_equal(sm.ranks(), brute_force_ranks(sm))

    def test_invalid(self):
        with self.assertRaises(InputError):
            ScoreMatrix(np.ones((2, 2)), [0, 1], [0, 0])
        with self.assertRaises(InputError):
            ScoreMatrix([[np.nan, 1.0]], [0], [0, 1])
        with self.assertRaises(InputError):
            ScoreMatrix(np.ones((2, 2)), [0, 1, 1], [0, 1])


class RocTest(unittest.TestCase):

    def test_perfect_separation(self):
        points, auc = roc(np.zeros(5), np.ones(7))
        self.assertEqual(auc, 1.0)
        self.assertEqual(equal_error_rate(points), 0.0)

    def test_identical_multiset(self):
        points, auc = roc([1, 2, 3, 4], [4, 3, 2, 1])
        self.assertEqual(auc, 0.5)
        np.testing.assert_array_equal(points[:, 0], points[:, 1])
        self.assertEqual(equal_error_rate(points), 0.5)

    def test_single_pair(self):
        points, auc = roc([0.3], [0.7])
        self.assertEqual(auc, 1.0)
        self.assertIn([0.0, 1.0], points.tolist())

    def test_random_sweeps(self):
        rng = np.random.RandomState(SEED)
        for _ in range(N_RANDOM):
            points, auc = roc(rng.rand(rng.randint(1, 10)),
                              rng.rand(rng.randint(1, 30)))
            self.assertTrue(np.all(np.diff(points[:, 0]) >= 0))
            self.assertTrue(np.all(np.diff(points[:, 1]) >= 0))
            self.assertTrue(0.0 <= auc <= 1.0)
            np.testing.assert_array_equal(points[0], [0.0, 0.0])
            np.testing.assert_array_equal(points[-1], [1.0, 1.0])

    def test_empty(self):
        with self.assertRaises(InputError):
            roc([], [1.0])
        with self.assertRaises(InputError):
            roc([1.0], [])

    def test_verification_scores(self):
        sm = knn_score([GALLERY], GALLERY_LABELS, [PROBES], PROBE_LABELS)
        genuine, impostor = verification_scores(sm)
        np.testing.assert_allclose(genuine, [1.0, 1.0])
        self.assertEqual(impostor.shape, (4,))


class ReportTest(unittest.TestCase):

    def setUp(self):
        self.tmp = tempfile.mkdtemp()
        rng = np.random.RandomState(SEED)
        self.sm = ScoreMatrix(rng.rand(9, 4), rng.randint(0, 4, 9),
                              np.arange(4))

    def tearDown(self):
        shutil.rmtree(self.tmp)

    def test_evaluate(self):
        report = evaluate(self.sm, da_target_overlap=True)
        self.assertEqual(report.rank1, rank1(self.sm))
        self.assertEqual(report.n_probes, 9)
        self.assertEqual(report.n_classes, 4)
        summary = report.summary()
        self.assertEqual(summary[:2], [report.rank1, report.auc])
        self.assertEqual(summary[-1], 1)

    def test_round_trip(self):
        report = evaluate(self.sm)
        path = os.path.join(self.tmp, 'report')
        export_report(report, path)
        loaded = load_report(path)
        self.assertLess(abs(loaded.rank1 - report.rank1), 1e-12)
        self.assertLess(abs(loaded.auc - report.auc), 1e-12)
        self.assertLess(abs(loaded.eer - report.eer), 1e-12)
        np.testing.assert_allclose(loaded.cmc, report.cmc, atol=1e-12)
        np.testing.assert_allclose(loaded.roc_points, report.roc_points,
                                   atol=1e-12)
        self.assertEqual(loaded.n_probes, report.n_probes)

    def test_stable_bytes(self):
        report = evaluate(self.sm)
        first = os.path.join(self.tmp, 'a')
        second = os.path.join(self.tmp, 'b')
        export_report(report, first)
        export_report(evaluate(self.sm), second)
        for name in ('summary.csv', 'cmc.csv', 'roc.csv'):
            with open(os.path.join(first, name), 'rb') as a, \
                    open(os.path.join(second, name), 'rb') as b:
                self.assertEqual(a.read(), b.read())
        with open(os.path.join(first, 'summary.csv')) as handle:
            self.assertEqual(handle.readline().strip(),
                             'rank1,auc,eer,n_probes,n_classes,'
                             'da_target_overlap')

    def test_invalid(self):
        with self.assertRaises(InputError):
            EvalReport(0.5, [0.5, 0.9], [[0.0, 0.0], [1.0, 1.0]], 0.5)
        with self.assertRaises(InputError):
            EvalReport(0.5, [0.5, 1.0], np.zeros((0, 2)), 0.5)
        with self.assertRaises(InputError):
            EvalReport(0.5, [0.7, 0.5, 1.0], [[0.0, 0.0], [1.0, 1.0]], 0.5)
        with self.assertRaises(InputError):
            EvalReport(1.5, [0.5, 1.0], [[0.0, 0.0], [1.0, 1.0]], 0.5)


def main():
    configure_logger(log)
    unittest.main(verbosity=2)


if __name__ == "__main__":
    main()
