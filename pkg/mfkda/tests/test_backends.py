#!/usr/bin/env python

import logging
import shutil
import sys
import tempfile
import unittest

import numpy as np

import mfkda as mf
from mfkda.backends.base import SCHEMA
from mfkda.errors import CheckpointNotFoundError, MfkdaError
from mfkda.tests import configure_logger

log = logging.getLogger(__name__)

ARRAYS = {
    'scores': np.arange(12, dtype=np.float64).reshape(3, 4),
    'pair0/gallery': np.ones((5, 2)),
    'pair0/class_ids': np.array([3, 1, 4], dtype=np.int64),
    'targets': np.zeros(0, dtype=np.int64),
}
ATTRS = {'features': ['lbp', 'gabor'], 'n_pairs': 1, 'skipped': False,
         'C': None}


class BackendTest(unittest.TestCase):
    """
    Checkpoint round trips on the selected backend
    """

    BACKEND = 'ram'
    STORE_NAME = 'test-mfkda'

    @classmethod
    def setUpClass(cls):
        log.info('BackendTest: %s', cls.BACKEND)
        mf.use(backend=cls.BACKEND)

    @classmethod
    def tearDownClass(cls):
        mf.use(backend='ram')

    def setUp(self):
        self.tmp = tempfile.mkdtemp()
        if self.BACKEND == 'hdf5':
            self.store = mf.Store(self.STORE_NAME, directory=self.tmp)
        else:
            self.store = mf.Store(self.STORE_NAME)
        self.store.connect()

    def tearDown(self):
        self.store.disconnect()
        shutil.rmtree(self.tmp)

    def test_config(self):
        self.assertIn(self.BACKEND, mf.backends.AVAILABLE)
        self.assertEqual(mf.status().backend.name, self.BACKEND)

    def test_round_trip(self):
        self.store.put('embed', ARRAYS, ATTRS)
        ckpt = self.store.get('embed')
        self.assertEqual(sorted(ckpt.arrays), sorted(ARRAYS))
        for key, value in ARRAYS.items():
            np.testing.assert_array_equal(ckpt.arrays[key], value)
            self.assertEqual(ckpt.arrays[key].dtype, value.dtype)
        for key, value in ATTRS.items():
            self.assertEqual(ckpt.attrs[key], value)
        self.assertEqual(ckpt.attrs['schema'], SCHEMA)

    def test_overwrite(self):
        self.store.put('adapt', {'x': np.ones(2)})
        self.store.put('adapt', {'y': np.zeros(3)}, {'skipped': True})
        ckpt = self.store['adapt']
        self.assertEqual(sorted(ckpt.arrays), ['y'])
        self.assertTrue(ckpt.attrs['skipped'])

    def test_copies(self):
        self.store.put('extract', {'x': np.ones(3)})
        ckpt = self.store.get('extract')
        ckpt.arrays['x'][0] = 5.0
        np.testing.assert_array_equal(self.store.get('extract').arrays['x'],
                                      np.ones(3))

    def test_listing(self):
        self.assertEqual(self.store.names(), [])
        self.store.put('preprocess', {})
        self.store.put('evaluate', {'s': np.ones(1)})
        self.assertTrue(self.store.has('evaluate'))
        self.assertIn('preprocess', self.store)
        self.assertEqual(self.store.names(), ['evaluate', 'preprocess'])
        self.store.delete('preprocess')
        self.assertNotIn('preprocess', self.store)
        with self.assertRaises(CheckpointNotFoundError):
            self.store.delete('preprocess')

    def test_missing(self):
        with self.assertRaises(CheckpointNotFoundError):
            self.store.get('train-mfkc')

    def test_bad_name(self):
        with self.assertRaises(MfkdaError):
            self.store.put('pair/0', {})
        with self.assertRaises(MfkdaError):
            self.store.put('', {})

    def test_context(self):
        self.store.disconnect()
        self.assertFalse(self.store.connected)
        with self.store as store:
            self.assertTrue(store.connected)
        self.assertFalse(self.store.connected)


def main():
    configure_logger(log)
    import argparse
    parser = argparse.ArgumentParser(description='TestBackends')
    parser.add_argument('--backend', dest='backend', default='ram',
                        help='Select backend (ram | hdf5)')
    parser.add_argument('--store', dest='store', default='test-mfkda',
                        help='Store name')

    args, unknown_args = parser.parse_known_args()
    sys.argv = [sys.argv[0]] + unknown_args

    BackendTest.BACKEND = args.backend
    BackendTest.STORE_NAME = args.store
    unittest.main(verbosity=2)


if __name__ == "__main__":
    main()
