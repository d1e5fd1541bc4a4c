#!/usr/bin/env python

import logging
import os
import shutil
import tempfile
import unittest

import numpy as np

from mfkda.errors import ValidationError
from mfkda.pipeline.manifest import (load_manifest, parse_manifest,
                                     select_targets, write_manifest)
from mfkda.tests import configure_logger

log = logging.getLogger(__name__)

SEED = 37

ROWS = """\
# profile=scface
# name=toy
split,ref,subject,da_target
gallery,row:0,10,0
gallery,row:1,2,0
gallery,row:2,2
gallery,row:3,alice,0
probe,row:0,2,1
probe,row:1,10,0
probe,row:2,alice,1
"""


def balanced_manifest(n_subjects=4, per_subject=5):
    lines = []
    for s in range(n_subjects):
        lines.append('gallery,row:{},{}'.format(s, s))
    for s in range(n_subjects):
        for j in range(per_subject):
            lines.append('probe,row:{},{}'.format(s * per_subject + j, s))
    return parse_manifest('\n'.join(lines))


class ParseTest(unittest.TestCase):

    def test_rows(self):
        manifest = parse_manifest(ROWS)
        self.assertEqual(manifest.profile_name, 'scface')
        self.assertEqual(manifest.name, 'toy')
        self.assertFalse(manifest.uses_images)
        # numeric subjects sort by value, names after them
        self.assertEqual(manifest.subject_ids, ['2', '10', 'alice'])
        np.testing.assert_array_equal(manifest.labels('gallery'),
                                      [1, 0, 0, 2])
        np.testing.assert_array_equal(manifest.labels('probe'), [0, 1, 2])
        np.testing.assert_array_equal(manifest.rows('gallery'),
                                      [0, 1, 2, 3])
        self.assertEqual(manifest.pinned_targets, [0, 2])
        self.assertEqual([e.line for e in manifest.da_target_entries],
                         [8, 10])

    def test_images(self):
        tmp = tempfile.mkdtemp()
        try:
            for name in ('a.png', 'b.png'):
                open(os.path.join(tmp, name), 'w').close()
            text = 'gallery,a.png,s1\nprobe,b.png,s1\n'
            manifest = parse_manifest(text, tmp)
            self.assertTrue(manifest.uses_images)
            self.assertEqual(manifest.image_paths('probe'),
                             [os.path.join(os.path.abspath(tmp), 'b.png')])
            with self.assertRaises(ValidationError) as ctx:
                parse_manifest(text + 'probe,c.png,s1\n', tmp)
            self.assertEqual(ctx.exception.line, 3)
            parse_manifest(text + 'probe,c.png,s1\n', tmp, check_files=False)
        finally:
            shutil.rmtree(tmp)

    def test_errors_carry_lines(self):
        cases = [
            ('gallery,row:0,s1\ntrain,row:1,s1\n', 2),
            ('gallery,row:0,s1\nprobe,row:0\n', 2),
            ('gallery,row:0,s1\nprobe,row:0,s1,yes\n', 2),
            ('gallery,row:0,s1,1\n', 1),
            ('gallery,row:0,s1\nprobe,,s1\n', 2),
            ('gallery,row:0,s1\nprobe,row:0,s9\n', 2),
            ('# dataset=x\ngallery,row:0,s1\n', 1),
        ]
        for text, line in cases:
            with self.assertRaises(ValidationError) as ctx:
                parse_manifest(text)
            self.assertEqual(ctx.exception.line, line)

    def test_structural_errors(self):
        with self.assertRaises(ValidationError):
            parse_manifest('probe,row:0,s1\n')
        with self.assertRaises(ValidationError):
            parse_manifest('gallery,row:0,s1\nprobe,img.png,s1\n',
                           check_files=False)
        with self.assertRaises(ValidationError):
            load_manifest('/nonexistent/manifest.csv')


class TargetTest(unittest.TestCase):

    def test_pinned_win(self):
        manifest = parse_manifest(ROWS)
        self.assertEqual(select_targets(manifest, 3, 1, SEED), [0, 2])

    def test_drawn(self):
        manifest = balanced_manifest()
        targets = select_targets(manifest, 2, None, SEED)
        self.assertEqual(len(targets), 8)
        self.assertEqual(targets, sorted(targets))
        labels = manifest.labels('probe')[targets]
        np.testing.assert_array_equal(np.bincount(labels), [2, 2, 2, 2])
        self.assertEqual(select_targets(manifest, 2, None, SEED), targets)

    def test_subject_subset(self):
        manifest = balanced_manifest()
        targets = select_targets(manifest, 3, 2, SEED)
        self.assertEqual(len(targets), 6)
        self.assertEqual(len(set(manifest.labels('probe')[targets])), 2)

    def test_more_than_available(self):
        manifest = balanced_manifest(per_subject=2)
        self.assertEqual(select_targets(manifest, 5, None, SEED),
                         list(range(8)))

    def test_disabled(self):
        self.assertEqual(select_targets(balanced_manifest(), None), [])


class WriteTest(unittest.TestCase):

    def test_round_trip(self):
        tmp = tempfile.mkdtemp()
        try:
            path = os.path.join(tmp, 'manifest.csv')
            write_manifest(path, ['a', 'a', 'b'], ['b', 'a'], targets=[1],
                           profile='fr_surv', name='synthetic')
            manifest = load_manifest(path)
            self.assertEqual(manifest.profile_name, 'fr_surv')
            np.testing.assert_array_equal(manifest.labels('gallery'),
                                          [0, 0, 1])
            np.testing.assert_array_equal(manifest.rows('probe'), [0, 1])
            self.assertEqual(manifest.pinned_targets, [1])
        finally:
            shutil.rmtree(tmp)


def main():
    configure_logger(log)
    unittest.main(verbosity=2)


if __name__ == "__main__":
    main()
