#!/usr/bin/env python

import logging
import math
import os
import shutil
import tempfile
import unittest

import numpy as np
from scipy.signal import convolve2d

from mfkda.errors import DegenerateDataError, InputError, ParameterError
from mfkda.features import (LBP_BINS, FeatureSet, export_precomputed,
                            extract_image_features, fit_eigenfaces,
                            fit_fisherfaces, fit_projector, gabor_bank,
                            gabor_features, gabor_responses, lbp_histogram,
                            load_precomputed, weberface)
from mfkda.preprocess import ImageMatrix
from mfkda.tests import configure_logger

log = logging.getLogger(__name__)

SEED = 3
N_SAMPLES = 12
FACE_SIZE = (16, 16)


def random_faces(n, seed=SEED):
    rng = np.random.RandomState(seed)
    return [ImageMatrix(rng.uniform(0, 255, FACE_SIZE)) for _ in range(n)]


def angle(u, v):
    cos = abs(np.dot(u, v)) / (np.linalg.norm(u) * np.linalg.norm(v))
    return math.degrees(math.acos(min(cos, 1.0)))


class FeatureSetTest(unittest.TestCase):

    def test_shapes(self):
        fs = FeatureSet(np.ones((3, 2)), [0, 1, 1], 'lbp')
        self.assertEqual((fs.n_samples, fs.dim), (3, 2))
        self.assertEqual(fs.take([2, 0]).labels.tolist(), [1, 0])
        self.assertEqual(fs.with_vectors(np.zeros((3, 5))).dim, 5)

    def test_invalid(self):
        with self.assertRaises(InputError):
            FeatureSet(np.ones((3, 2)), [0, 1], 'lbp')
        with self.assertRaises(InputError):
            FeatureSet([[np.inf, 1.0]], [0], 'lbp')
        with self.assertRaises(InputError):
            FeatureSet(np.ones((2, 2)), [0, 1], 'sift')
        with self.assertRaises(InputError):
            FeatureSet(np.ones((2, 2)), [0, -1], 'lbp')


class EigenfacesTest(unittest.TestCase):

    def test_two_points(self):
        train = FeatureSet([[0.0, 0.0], [2.0, 2.0]], [0, 1], 'eigenfaces')
        proj = fit_eigenfaces(train, 1)
        np.testing.assert_allclose(proj.mean, [1.0, 1.0])
        np.testing.assert_allclose(proj.basis[:, 0],
                                   [1 / math.sqrt(2), 1 / math.sqrt(2)],
                                   atol=1e-12)

    def test_full_rank_isometry(self):
        rng = np.random.RandomState(SEED)
        vectors = rng.randn(8, 3)
        train = FeatureSet(vectors, np.zeros(8), 'eigenfaces')
        coords = fit_eigenfaces(train, 3).project(vectors)
        for i in range(8):
            for j in range(8):
                self.assertAlmostEqual(
                    np.linalg.norm(coords[i] - coords[j]),
                    np.linalg.norm(vectors[i] - vectors[j]), places=8)

    def test_duplicated_rows(self):
        rng = np.random.RandomState(SEED)
        vectors = rng.randn(6, 2)
        once = fit_eigenfaces(FeatureSet(vectors, np.zeros(6),
                                         'eigenfaces'), 2)
        twice = fit_eigenfaces(FeatureSet(np.vstack([vectors, vectors]),
                                          np.zeros(12), 'eigenfaces'), 2)
        np.testing.assert_allclose(once.basis, twice.basis, atol=1e-8)

    def test_reconstruction_improves(self):
        rng = np.random.RandomState(SEED)
        vectors = rng.randn(10, 6)
        train = FeatureSet(vectors, np.zeros(10), 'eigenfaces')
        errors = []
        for dim in range(1, 7):
            proj = fit_eigenfaces(train, dim)
            rebuilt = proj.reconstruct(proj.project(vectors))
            errors.append(np.sum((rebuilt - vectors) ** 2, axis=1))
        for low, high in zip(errors, errors[1:]):
            self.assertTrue(np.all(high <= low + 1e-10))

    def test_invalid(self):
        train = FeatureSet(np.random.RandomState(SEED).randn(4, 3),
                           np.zeros(4), 'eigenfaces')
        with self.assertRaises(ParameterError):
            fit_eigenfaces(train, 4)
        flat = FeatureSet(np.ones((4, 3)), np.zeros(4), 'eigenfaces')
        with self.assertRaises(DegenerateDataError):
            fit_eigenfaces(flat, 1)


class FisherfacesTest(unittest.TestCase):

    def _clusters(self, m0, m1, spread=0.5):
        offsets = spread * np.array([[1, 1], [1, -1], [-1, 1], [-1, -1]],
                                    dtype=np.float64)
        vectors = np.vstack([np.asarray(m0) + offsets,
                             np.asarray(m1) + offsets])
        return FeatureSet(vectors, [0] * 4 + [1] * 4, 'fisherfaces')

    def test_axis(self):
        train = self._clusters([0.0, 0.0], [5.0, 1.0])
        proj = fit_fisherfaces(train, 1)
        self.assertEqual(proj.kind, 'lda')
        self.assertLess(angle(proj.basis[:, 0], [5.0, 1.0]), 5.0)

    def test_generalized_eigen_direction(self):
        rng = np.random.RandomState(SEED)
        vectors = np.vstack([rng.randn(10, 2) * [1.0, 0.3],
                             rng.randn(10, 2) * [1.0, 0.3] + [2.0, 2.0]])
        labels = [0] * 10 + [1] * 10
        proj = fit_fisherfaces(FeatureSet(vectors, labels, 'fisherfaces'), 1)
        within = np.zeros((2, 2))
        means = []
        for c in (0, 1):
            members = vectors[np.asarray(labels) == c]
            means.append(members.mean(axis=0))
            spread = members - means[-1]
            within += spread.T.dot(spread)
        expected = np.linalg.solve(within, means[1] - means[0])
        self.assertLess(angle(proj.basis[:, 0], expected), 0.01)

    def test_one_dimensional(self):
        train = FeatureSet([[0.0], [0.5], [3.0], [3.5]], [0, 0, 1, 1],
                           'fisherfaces')
        np.testing.assert_allclose(fit_fisherfaces(train).basis, [[1.0]])

    def test_invalid(self):
        train = self._clusters([0.0, 0.0], [5.0, 1.0])
        with self.assertRaises(ParameterError):
            fit_fisherfaces(train, 2)
        single = FeatureSet(np.random.RandomState(SEED).randn(4, 2),
                            np.zeros(4), 'fisherfaces')
        with self.assertRaises(ParameterError):
            fit_fisherfaces(single)


class LbpTest(unittest.TestCase):

    def test_constant(self):
        hist = lbp_histogram(ImageMatrix(np.full((8, 8), 42.0)))
        self.assertEqual(hist.shape, (LBP_BINS,))
        # all-ones is the last uniform pattern
        self.assertEqual(hist[57], 1.0)
        self.assertEqual(hist.sum(), 1.0)

    def test_edge_patterns(self):
        # one interior pixel; interpolated diagonals next to a bright top
        # row land near 7.5, away from the bright row near 2.5
        top = np.array([[10.0, 10.0, 10.0], [0.0, 5.0, 0.0], [0.0, 0.0, 0.0]])
        up = lbp_histogram(ImageMatrix(top))
        down = lbp_histogram(ImageMatrix(top[::-1]))
        for hist in (up, down):
            self.assertEqual(hist.sum(), 1.0)
            self.assertIn(int(np.argmax(hist)), range(1, 57))
        self.assertNotEqual(np.argmax(up), np.argmax(down))
        opposite = np.array([[0.0, 10.0, 0.0], [0.0, 5.0, 0.0],
                             [0.0, 10.0, 0.0]])
        self.assertEqual(lbp_histogram(ImageMatrix(opposite))[58], 1.0)

    def test_cells_normalized(self):
        img = random_faces(1)[0]
        hist = lbp_histogram(img, (2, 2))
        self.assertEqual(hist.shape, (LBP_BINS * 4,))
        for cell in hist.reshape(4, LBP_BINS):
            self.assertAlmostEqual(cell.sum(), 1.0, places=9)

    def test_rotation(self):
        img = random_faces(1)[0]
        rotated = ImageMatrix(img.pixels[::-1, ::-1])
        a = lbp_histogram(img)
        b = lbp_histogram(rotated)
        np.testing.assert_allclose(np.sort(a), np.sort(b), atol=1e-12)
        self.assertAlmostEqual(a[58], b[58], places=12)

    def test_cells_too_small(self):
        with self.assertRaises(ParameterError):
            lbp_histogram(ImageMatrix(np.ones((8, 8))), (4, 4))


class GaborTest(unittest.TestCase):
    SCALES = 2
    ORIENTATIONS = 4

    def test_constant(self):
        vector = gabor_features(ImageMatrix(np.full((20, 20), 100.0)),
                                self.SCALES, self.ORIENTATIONS, 2)
        self.assertLess(np.max(np.abs(vector)), 1e-6)

    def test_unit_norm(self):
        vector = gabor_features(random_faces(1)[0], self.SCALES,
                                self.ORIENTATIONS, 4)
        self.assertAlmostEqual(np.linalg.norm(vector), 1.0, places=9)

    def test_grating_orientation(self):
        y = np.arange(32, dtype=np.float64)[:, None]
        grating = ImageMatrix(np.repeat(128 + 100 * np.sin(math.pi / 2 * y),
                                        32, axis=1))
        bank = gabor_bank(self.SCALES, self.ORIENTATIONS)
        responses = gabor_responses(grating, bank)
        energy = np.zeros(self.ORIENTATIONS)
        for i, resp in enumerate(responses):
            energy[i % self.ORIENTATIONS] += np.sum(resp ** 2)
        # phi = pi / 2 varies along the rows
        self.assertEqual(int(np.argmax(energy)), self.ORIENTATIONS // 2)

    def test_direct_convolution(self):
        img = random_faces(1)[0]
        bank = gabor_bank(1, 2)
        responses = gabor_responses(img, bank)
        for kernel, resp in zip(bank, responses):
            radius = kernel.shape[0] // 2
            padded = np.pad(img.pixels, radius, mode='symmetric')
            direct = np.abs(convolve2d(padded, kernel, mode='valid'))
            np.testing.assert_allclose(resp, direct, atol=1e-8)

    def test_downsample_too_large(self):
        with self.assertRaises(ParameterError):
            gabor_features(ImageMatrix(np.ones((6, 6))), 1, 1, 7)


class WeberfaceTest(unittest.TestCase):

    def test_constant(self):
        np.testing.assert_array_equal(
            weberface(ImageMatrix(np.full((5, 5), 90.0))), np.zeros(25))

    def test_range(self):
        values = weberface(random_faces(1)[0])
        self.assertTrue(np.all(np.abs(values) < math.pi / 2))

    def test_bright_pixel(self):
        pixels = np.zeros((5, 5))
        pixels[2, 2] = 200.0
        values = weberface(ImageMatrix(pixels))
        expected = math.atan(4.0 * 8 * 200.0 / 200.01)
        self.assertAlmostEqual(values[12], expected, places=12)


class ExtractionTest(unittest.TestCase):

    def test_permutation(self):
        faces = random_faces(5)
        order = [3, 0, 4, 1, 2]
        for tag in ('lbp', 'weberfaces', 'eigenfaces'):
            full = extract_image_features(faces, tag)
            permuted = extract_image_features([faces[i] for i in order], tag)
            np.testing.assert_array_equal(permuted, full[order])

    def test_projectors(self):
        faces = random_faces(N_SAMPLES)
        labels = np.arange(N_SAMPLES) % 3
        raw = extract_image_features(faces, 'eigenfaces')
        train = FeatureSet(raw, labels, 'eigenfaces')
        proj = fit_projector(train, 'eigenfaces', {'dim': 5})
        self.assertEqual(proj.project(raw).shape, (N_SAMPLES, 5))
        lda = fit_projector(train.with_vectors(raw, 'fisherfaces'),
                            'fisherfaces')
        self.assertEqual(lda.dim, 2)
        self.assertIsNone(fit_projector(train, 'lbp'))

    def test_ingestion_only(self):
        with self.assertRaises(InputError):
            extract_image_features(random_faces(1), 'bow')


class PrecomputedTest(unittest.TestCase):

    def setUp(self):
        self.tmp = tempfile.mkdtemp()

    def tearDown(self):
        shutil.rmtree(self.tmp)

    def _write(self, name, text):
        path = os.path.join(self.tmp, name)
        with open(path, 'w') as handle:
            handle.write(text)
        return path

    def test_load(self):
        path = self._write('bow.csv', '# feature_tag=bow dim=4\n'
                                      '1,2,3,4,0\n5,6,7,8,1\n0,0,1,1,1\n')
        fs = load_precomputed(path, 'bow', expected_rows=3)
        self.assertEqual(fs.vectors.shape, (3, 4))
        self.assertEqual(fs.labels.tolist(), [0, 1, 1])

    def test_nan(self):
        path = self._write('bow.csv', '# feature_tag=bow dim=3\n'
                                      '1,2,3,0\n4,5,nan,1\n')
        with self.assertRaisesRegex(InputError, 'row 2 column 3'):
            load_precomputed(path, 'bow')

    def test_mismatch(self):
        path = self._write('vlad.csv', '# feature_tag=vlad_sift dim=2\n'
                                       '1,2,0\n3,4,1\n')
        with self.assertRaises(InputError):
            load_precomputed(path, 'bow')
        with self.assertRaises(InputError):
            load_precomputed(path, 'vlad_sift', expected_rows=3)
        with self.assertRaises(InputError):
            load_precomputed(path, 'surf')

    def test_round_trip(self):
        rng = np.random.RandomState(SEED)
        fs = FeatureSet(rng.randn(7, 5), rng.randint(0, 3, 7), 'fv_sift')
        path = os.path.join(self.tmp, 'fv.csv')
        export_precomputed(fs, path)
        loaded = load_precomputed(path, 'fv_sift')
        np.testing.assert_allclose(loaded.vectors, fs.vectors, rtol=0,
                                   atol=1e-12)
        np.testing.assert_array_equal(loaded.labels, fs.labels)


def main():
    configure_logger(log)
    unittest.main(verbosity=2)


if __name__ == "__main__":
    main()
