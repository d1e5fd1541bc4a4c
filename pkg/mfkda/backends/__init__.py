#!/usr/bin/env python
"""Helper functions to store and get the selected checkpoint backend"""

from collections import namedtuple
import logging

from mfkda.errors import ParameterError
from mfkda.util import named_module

log = logging.getLogger(__name__)

_current = None
AVAILABLE = ['ram', 'hdf5']

# Currently there is no need for more fancy attributes
Backend = namedtuple('Backend', ['name', 'Store'])


def use_backend(backend):
    backend = backend.lower()
    global _current
    if backend in AVAILABLE:
        module_ = named_module('mfkda.backends.{}'.format(backend))
        if hasattr(module_, '_backend'):
            log.debug('Switching backend to `%s`', module_._backend.name)
            _current = module_._backend
        else:
            raise ParameterError(
                'Module `{}` is not a proper backend.'.format(backend))
    else:
        raise ParameterError('Backend `{}` not available! Choose from: {}'
                             .format(backend, AVAILABLE))


def get_backend(name=None):
    if name is not None:
        use_backend(name)
    if _current is None:
        use_backend(AVAILABLE[0])
    return _current
