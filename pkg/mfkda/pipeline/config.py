#!/usr/bin/env python
"""Pipeline configuration: built-in defaults, dataset profile, user YAML"""

import copy
import logging
import math
import os

import yaml

from mfkda import backends, engines
from mfkda.errors import ValidationError
from mfkda.evalharness import FUSIONS
from mfkda.features import DEFAULT_PARAMS, FEATURE_TAGS, PRECOMPUTED_TAGS
from mfkda.kernels import KERNELS, make_spec
from mfkda.preprocess import PreprocessParams

log = logging.getLogger(__name__)

PROFILE_DIR = os.path.join(os.path.dirname(os.path.dirname(
    os.path.abspath(__file__))), 'profiles')

MODES = ('full', 'naive', 'base_mkl')

DEFAULTS = {
    'profile': None,
    'mode': 'full',
    'seed': 0,
    'preprocess': {'sigma': 1.0, 'gamma': 1.0, 'target_size': None},
    'features': ['eigenfaces', 'lbp', 'weberfaces'],
    'feature_params': {},
    'kernels': [{'kind': 'linear'}, {'kind': 'gaussian'}, {'kind': 'rbf'}],
    'rbf_squared_norm': False,
    'normalize_grams': True,
    'svm': {'C': 1.0, 'tol': 1e-6, 'max_iter': None},
    'mfkc': {'tol': 1e-6, 'max_sweeps': 50},
    'embed': {'dim': 'auto', 'eig_tol': 1e-10},
    'da': {'C_S': 1.0, 'C_T': 10.0, 'sweeps': 10, 'tol': 1e-6,
           'inner_iter': 500, 'inner_tol': 1e-6,
           'target_samples_per_class': 3, 'target_subjects': None,
           'holdout_targets': False},
    'knn': {'k': 1, 'fusion': 'sum_normalized'},
    'engine': {'name': 'cpu', 'params': {}},
    'backend': {'name': 'hdf5'},
    'precomputed': {},
}

# sections whose keys are free-form at the first level
_OPEN_SECTIONS = ('feature_params', 'precomputed')
_KERNEL_KEYS = ('kind', 'c', 'alpha', 'degree', 'sigma')


def _key_lines(text):
    """Map key paths of a YAML document to 1-based line numbers"""
    lines = {}
    try:
        node = yaml.compose(text)
    except yaml.YAMLError:
        return lines

    def _walk(node, path):
        if isinstance(node, yaml.MappingNode):
            for key, value in node.value:
                sub = path + (key.value,)
                lines[sub] = key.start_mark.line + 1
                _walk(value, sub)
        elif isinstance(node, yaml.SequenceNode):
            for i, value in enumerate(node.value):
                sub = path + (i,)
                lines[sub] = value.start_mark.line + 1
                _walk(value, sub)

    if node is not None:
        _walk(node, ())
    return lines


def parse_yaml(text, source='<string>'):
    try:
        data = yaml.safe_load(text)
    except yaml.YAMLError as err:
        mark = getattr(err, 'problem_mark', None)
        raise ValidationError('{}: {}'.format(source, err),
                              line=mark.line + 1 if mark else None)
    if data is None:
        data = {}
    if not isinstance(data, dict):
        raise ValidationError('{}: top level must be a mapping'
                              .format(source))
    return data, _key_lines(text)


def merge(base, update):
    """Recursive dict merge; lists and scalars are replaced"""
    out = copy.deepcopy(base)
    for key, value in update.items():
        if isinstance(value, dict) and isinstance(out.get(key), dict):
            out[key] = merge(out[key], value)
        else:
            out[key] = copy.deepcopy(value)
    return out


def _check_keys(data, reference, lines, path=()):
    for key, value in data.items():
        sub = path + (key,)
        if key not in reference:
            raise ValidationError('unknown key `{}`'.format('.'.join(
                str(p) for p in sub)), line=lines.get(sub))
        if key in _OPEN_SECTIONS or key == 'params':
            continue
        if isinstance(reference[key], dict):
            if not isinstance(value, dict):
                raise ValidationError('`{}` must be a mapping'.format(key),
                                      line=lines.get(sub))
            _check_keys(value, reference[key], lines, sub)


def _is_number(value):
    return isinstance(value, (int, float)) and \
        not isinstance(value, bool) and math.isfinite(value)


def profile_path(name):
    return os.path.join(PROFILE_DIR, '{}.yaml'.format(name))


def available_profiles():
    return sorted(os.path.splitext(f)[0] for f in os.listdir(PROFILE_DIR)
                  if f.endswith('.yaml'))


def load_profile(name):
    path = profile_path(name)
    if not os.path.isfile(path):
        raise ValidationError('Unknown dataset profile `{}`, choose from {}'
                              .format(name, available_profiles()))
    with open(path) as handle:
        data, lines = parse_yaml(handle.read(), path)
    _check_keys(data, DEFAULTS, lines)
    return data


class PipelineConfig(object):
    """
    Validated pipeline settings. Relative paths under `precomputed` are
    resolved against `base_dir` (the directory of the config file).
    """

    def __init__(self, data=None, base_dir='.', lines=None):
        data = data or {}
        lines = lines or {}
        _check_keys(data, DEFAULTS, lines)
        merged = copy.deepcopy(DEFAULTS)
        profile = data.get('profile')
        if profile is not None:
            merged = merge(merged, load_profile(profile))
        merged = merge(merged, data)
        self._user = copy.deepcopy(data)
        self._data = merged
        self._lines = lines
        self._base_dir = os.path.abspath(base_dir)
        self._validate()

    @classmethod
    def from_file(cls, path):
        if not os.path.isfile(path):
            raise ValidationError('Config file `{}` not found'.format(path))
        with open(path) as handle:
            data, lines = parse_yaml(handle.read(), path)
        return cls(data, os.path.dirname(os.path.abspath(path)), lines)

    def _fail(self, message, *path):
        raise ValidationError(message, line=self._lines.get(tuple(path)))

    def _value(self, path):
        value = self._data
        for key in path:
            value = value[key]
        return value

    def _number(self, *path, **kw):
        """Check a positive real key; `zero=True` also accepts 0"""
        value = self._value(path)
        if value is None and kw.get('optional'):
            return
        name = '.'.join(path)
        if not _is_number(value):
            self._fail('{} must be a number, got {!r}'.format(name, value),
                       *path)
        zero = kw.get('zero', False)
        if value < 0 or (value == 0 and not zero):
            self._fail('{} must be {}'.format(
                name, 'non-negative' if zero else 'positive'), *path)

    def _integer(self, *path, **kw):
        value = self._value(path)
        if value is None and kw.get('optional'):
            return
        minimum = kw.get('minimum', 1)
        if not isinstance(value, int) or isinstance(value, bool) or \
                value < minimum:
            self._fail('{} must be an integer >= {}, got {!r}'.format(
                '.'.join(path), minimum, value), *path)

    def _flag(self, *path):
        if not isinstance(self._value(path), bool):
            self._fail('{} must be true or false'.format('.'.join(path)),
                       *path)

    def _validate(self):
        d = self._data
        if d['mode'] not in MODES:
            self._fail('mode must be one of {}'.format(MODES), 'mode')
        self._integer('seed', minimum=0)
        self._number('preprocess', 'sigma')
        self._number('preprocess', 'gamma')
        size = d['preprocess']['target_size']
        if size is not None and (
                not isinstance(size, (list, tuple)) or len(size) != 2 or
                not all(isinstance(s, int) and not isinstance(s, bool) and
                        s >= 1 for s in size)):
            self._fail('preprocess.target_size must be two positive '
                       'integers', 'preprocess', 'target_size')
        self._validate_features()
        self._validate_kernels()
        self._flag('rbf_squared_norm')
        self._flag('normalize_grams')
        self._number('svm', 'C')
        self._number('svm', 'tol')
        self._integer('svm', 'max_iter', optional=True)
        self._number('mfkc', 'tol')
        self._integer('mfkc', 'max_sweeps')
        dim = d['embed']['dim']
        if dim not in ('auto', None):
            self._integer('embed', 'dim')
        self._number('embed', 'eig_tol')
        self._number('da', 'C_S', zero=True)
        self._number('da', 'C_T', zero=True)
        if not (d['da']['C_S'] > 0 or d['da']['C_T'] > 0):
            self._fail('da.C_S and da.C_T must not both be zero', 'da')
        self._integer('da', 'sweeps', minimum=0)
        self._number('da', 'tol')
        self._integer('da', 'inner_iter')
        self._number('da', 'inner_tol')
        self._integer('da', 'target_samples_per_class', optional=True)
        self._integer('da', 'target_subjects', optional=True)
        self._flag('da', 'holdout_targets')
        if d['knn']['fusion'] not in FUSIONS:
            self._fail('knn.fusion must be one of {}'.format(FUSIONS),
                       'knn', 'fusion')
        self._integer('knn', 'k')
        if d['engine']['name'] not in engines.AVAILABLE:
            self._fail('engine.name must be one of {}'
                       .format(engines.AVAILABLE), 'engine', 'name')
        if not isinstance(d['engine']['params'], dict):
            self._fail('engine.params must be a mapping', 'engine', 'params')
        if d['backend']['name'] not in backends.AVAILABLE:
            self._fail('backend.name must be one of {}'
                       .format(backends.AVAILABLE), 'backend', 'name')

    def _validate_features(self):
        d = self._data
        tags = d['features']
        if not isinstance(tags, list) or not tags:
            self._fail('at least one feature must be enabled', 'features')
        if len(set(tags)) != len(tags):
            self._fail('features are listed more than once', 'features')
        for i, tag in enumerate(tags):
            if tag not in FEATURE_TAGS:
                self._fail('unknown feature `{}`, choose from {}'
                           .format(tag, FEATURE_TAGS), 'features', i)
            if tag in PRECOMPUTED_TAGS and tag not in d['precomputed']:
                self._fail('feature `{}` needs a `precomputed` entry'
                           .format(tag), 'features', i)
        for tag, params in d['feature_params'].items():
            known = DEFAULT_PARAMS.get(tag)
            if known is None:
                self._fail('feature `{}` takes no parameters'.format(tag),
                           'feature_params', tag)
            for key in params:
                if key not in known:
                    self._fail('unknown parameter `{}` for `{}`'
                               .format(key, tag), 'feature_params', tag, key)
        for tag, paths in d['precomputed'].items():
            if tag not in FEATURE_TAGS:
                self._fail('unknown feature `{}`'.format(tag), 'precomputed',
                           tag)
            if not isinstance(paths, dict) or \
                    sorted(paths) != ['gallery', 'probe']:
                self._fail('precomputed.{} needs exactly `gallery` and '
                           '`probe` paths'.format(tag), 'precomputed', tag)

    def _validate_kernels(self):
        kernels = self._data['kernels']
        if not isinstance(kernels, list) or not kernels:
            self._fail('at least one kernel must be enabled', 'kernels')
        for i, entry in enumerate(kernels):
            if not isinstance(entry, dict) or entry.get('kind') not in KERNELS:
                self._fail('kernel kind must be one of {}'.format(KERNELS),
                           'kernels', i)
            for key in entry:
                if key not in _KERNEL_KEYS:
                    self._fail('unknown kernel key `{}`'.format(key),
                               'kernels', i, key)
                value = entry[key]
                if key != 'kind' and not _is_number(value) and \
                        not (key == 'sigma' and value is None):
                    self._fail('kernel key `{}` must be a number, got {!r}'
                               .format(key, value), 'kernels', i, key)
        try:
            self.kernel_specs()
        except ValueError as err:
            self._fail(str(err), 'kernels')

    def __getitem__(self, key):
        return self._data[key]

    @property
    def data(self):
        return copy.deepcopy(self._data)

    @property
    def base_dir(self):
        return self._base_dir

    @property
    def mode(self):
        return self._data['mode']

    @property
    def seed(self):
        return self._data['seed']

    @property
    def features(self):
        return list(self._data['features'])

    def preprocess_params(self):
        pre = self._data['preprocess']
        size = pre['target_size']
        return PreprocessParams(float(pre['sigma']), float(pre['gamma']),
                                tuple(size) if size else None)

    def feature_params(self, tag):
        return dict(DEFAULT_PARAMS.get(tag, {}),
                    **self._data['feature_params'].get(tag, {}))

    def kernel_specs(self):
        squared = bool(self._data['rbf_squared_norm'])
        return [make_spec(squared_norm=squared, **entry)
                for entry in self._data['kernels']]

    def is_precomputed(self, tag):
        return tag in self._data['precomputed']

    def precomputed_path(self, tag, split):
        path = self._data['precomputed'][tag][split]
        return os.path.join(self._base_dir, os.path.expanduser(path))

    def replace(self, **updates):
        """Copy with top-level or dotted (`svm.C`) keys replaced"""
        data = copy.deepcopy(self._user)
        for key, value in updates.items():
            target = data
            parts = key.split('.')
            for part in parts[:-1]:
                target = target.setdefault(part, {})
            target[parts[-1]] = value
        return PipelineConfig(data, self._base_dir, self._lines)

    def with_profile(self, name):
        """Rebuild with profile `name` under the user settings"""
        data = copy.deepcopy(self._user)
        data['profile'] = name
        return PipelineConfig(data, self._base_dir, self._lines)

    def dumps(self):
        return yaml.safe_dump(self._data, default_flow_style=False,
                              sort_keys=True)


def load_config(path=None, seed=None):
    config = PipelineConfig.from_file(path) if path else PipelineConfig()
    if seed is not None:
        config = config.replace(seed=int(seed))
    return config
