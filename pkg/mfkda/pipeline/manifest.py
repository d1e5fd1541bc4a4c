#!/usr/bin/env python
"""Dataset manifests: gallery/probe entries and the DA target set"""

from collections import namedtuple
import csv
import logging
import os
import re

import numpy as np

from mfkda.errors import ValidationError
from mfkda.util import as_rng

log = logging.getLogger(__name__)

SPLITS = ('gallery', 'probe')
HEADER_KEYS = ('profile', 'name')

_ROW_REF = re.compile(r'^row:(\d+)$')
_HEADER_LINE = re.compile(r'^#\s*(\w+)\s*=\s*(.*?)\s*$')

ManifestEntry = namedtuple('ManifestEntry', ['split', 'ref', 'subject', 'row',
                                             'da_target', 'line'])


def _subject_key(subject):
    return (0, int(subject), '') if subject.isdigit() else (1, 0, subject)


class DatasetManifest(object):
    """
    Ordered gallery and probe entries. A ref is an image path (relative to
    the manifest) or `row:<n>`, a row of the precomputed feature files.
    Subjects are mapped to labels 0..K-1 in sorted order.
    """

    def __init__(self, entries, profile_name=None, name=None, base_dir='.'):
        self._entries = list(entries)
        self._profile_name = profile_name
        self._name = name
        self._base_dir = os.path.abspath(base_dir)
        gallery = self.gallery_entries
        if not gallery:
            raise ValidationError('manifest has no gallery entries')
        subjects = sorted(set(e.subject for e in gallery), key=_subject_key)
        self._labels = dict((s, i) for i, s in enumerate(subjects))
        self._subject_ids = subjects
        for entry in self.probe_entries:
            if entry.subject not in self._labels:
                raise ValidationError('probe subject `{}` is not in the '
                                      'gallery'.format(entry.subject),
                                      line=entry.line)
        kinds = set(e.row is None for e in self._entries)
        if len(kinds) > 1:
            raise ValidationError('manifest mixes image paths and row refs')

    @property
    def entries(self):
        return self._entries

    @property
    def gallery_entries(self):
        return [e for e in self._entries if e.split == 'gallery']

    @property
    def probe_entries(self):
        return [e for e in self._entries if e.split == 'probe']

    @property
    def da_target_entries(self):
        return [e for e in self.probe_entries if e.da_target]

    @property
    def pinned_targets(self):
        return [i for i, e in enumerate(self.probe_entries) if e.da_target]

    @property
    def profile_name(self):
        return self._profile_name

    @property
    def name(self):
        return self._name

    @property
    def base_dir(self):
        return self._base_dir

    @property
    def subject_ids(self):
        return list(self._subject_ids)

    @property
    def uses_images(self):
        return self._entries[0].row is None

    def labels(self, split):
        entries = self.gallery_entries if split == 'gallery' \
            else self.probe_entries
        return np.array([self._labels[e.subject] for e in entries],
                        dtype=np.int64)

    def rows(self, split):
        """Row of every entry in the precomputed files of `split`"""
        entries = self.gallery_entries if split == 'gallery' \
            else self.probe_entries
        return np.array([i if e.row is None else e.row
                         for i, e in enumerate(entries)], dtype=np.int64)

    def image_paths(self, split):
        entries = self.gallery_entries if split == 'gallery' \
            else self.probe_entries
        return [os.path.join(self._base_dir, e.ref) for e in entries]

    def __repr__(self):
        return 'DatasetManifest({} gallery, {} probe, {} subjects)'.format(
            len(self.gallery_entries), len(self.probe_entries),
            len(self._subject_ids))


def _parse_row(fields, line, base_dir, check_files):
    fields = [f.strip() for f in fields]
    if len(fields) not in (3, 4):
        raise ValidationError('expected `split,ref,subject[,da_target]`, got '
                              '{} fields'.format(len(fields)), line=line)
    split, ref, subject = fields[:3]
    flag = fields[3] if len(fields) == 4 else ''
    if split not in SPLITS:
        raise ValidationError('split must be one of {}, got `{}`'
                              .format(SPLITS, split), line=line)
    if not ref or not subject:
        raise ValidationError('empty ref or subject', line=line)
    if flag not in ('', '0', '1'):
        raise ValidationError('da_target must be 0 or 1, got `{}`'
                              .format(flag), line=line)
    da_target = flag == '1'
    if da_target and split != 'probe':
        raise ValidationError('only probe entries can be DA targets',
                              line=line)
    match = _ROW_REF.match(ref)
    row = int(match.group(1)) if match else None
    if row is None and check_files and \
            not os.path.isfile(os.path.join(base_dir, ref)):
        raise ValidationError('image `{}` not found'.format(ref), line=line)
    return ManifestEntry(split, ref, subject, row, da_target, line)


def parse_manifest(text, base_dir='.', check_files=True):
    meta = {}
    entries = []
    rows = csv.reader(text.splitlines())
    for number, fields in enumerate(rows, 1):
        if not fields or not ''.join(fields).strip():
            continue
        first = fields[0].strip()
        if first.startswith('#'):
            match = _HEADER_LINE.match(','.join(fields).strip())
            if match is None:
                continue
            key, value = match.groups()
            if key not in HEADER_KEYS:
                raise ValidationError('unknown manifest key `{}`'.format(key),
                                      line=number)
            meta[key] = value
            continue
        if first == 'split' and not entries:
            continue
        entries.append(_parse_row(fields, number, base_dir, check_files))
    return DatasetManifest(entries, meta.get('profile'), meta.get('name'),
                           base_dir)


def load_manifest(path, check_files=True):
    if not os.path.isfile(path):
        raise ValidationError('Manifest `{}` not found'.format(path))
    with open(path) as handle:
        text = handle.read()
    manifest = parse_manifest(text, os.path.dirname(os.path.abspath(path)),
                              check_files)
    log.info('Loaded %s from `%s`', manifest, path)
    return manifest


def write_manifest(path, gallery_subjects, probe_subjects, refs=None,
                   targets=(), profile=None, name=None):
    """Write a row-ref manifest (or image manifest when `refs` is given)"""
    with open(path, 'w') as handle:
        if profile:
            handle.write('# profile={}\n'.format(profile))
        if name:
            handle.write('# name={}\n'.format(name))
        handle.write('split,ref,subject,da_target\n')
        targets = set(targets)
        for split, subjects in (('gallery', gallery_subjects),
                                ('probe', probe_subjects)):
            for i, subject in enumerate(subjects):
                ref = refs[split][i] if refs else 'row:{}'.format(i)
                flag = int(split == 'probe' and i in targets)
                handle.write('{},{},{},{}\n'.format(split, ref, subject, flag))


def select_targets(manifest, samples_per_class, n_subjects=None, seed=0):
    """
    Probe indices used as the labeled DA target set: the manifest's own
    `da_target` flags when present, otherwise `samples_per_class` probes of
    `n_subjects` subjects drawn with `seed`.
    """
    pinned = manifest.pinned_targets
    if pinned:
        log.info('Using %d DA targets pinned by the manifest', len(pinned))
        return pinned
    if samples_per_class is None:
        return []
    rng = as_rng(seed)
    probes = manifest.probe_entries
    subjects = sorted(set(e.subject for e in probes), key=_subject_key)
    if n_subjects is not None and n_subjects < len(subjects):
        picked = rng.choice(len(subjects), n_subjects, replace=False)
        subjects = [subjects[i] for i in sorted(picked)]
    chosen = []
    for subject in subjects:
        idx = [i for i, e in enumerate(probes) if e.subject == subject]
        take = min(samples_per_class, len(idx))
        picked = rng.choice(len(idx), take, replace=False)
        chosen.extend(idx[i] for i in sorted(picked))
    log.info('Drew %d DA targets from %d subjects', len(chosen),
             len(subjects))
    return sorted(chosen)
