#!/usr/bin/env python
"""MFKDA: multiple feature-kernel learning with domain adaptation"""

from collections import namedtuple
import logging

from mfkda.backends import get_backend, use_backend
from mfkda.engines import get_engine, use_engine

__version__ = '0.1'

log = logging.getLogger(__name__)

# checkpoint store class of the selected backend
_current = Store = None


def use(engine=None, backend=None, engine_kw=None):
    """Select the map engine and the checkpoint backend"""
    if backend is not None:
        use_backend(backend)
    if engine is not None:
        use_engine(engine, **(engine_kw or {}))

    global _current, Store
    _current = get_backend()
    Store = _current.Store


Status = namedtuple('Status', ['engine', 'backend', 'version'])


def status(show=False):
    engine = get_engine()
    backend = get_backend()
    if show:
        log.info('MFKDA %s', __version__)
        log.info('Engine: %s %s', engine.name, engine.params or '')
        log.info('Checkpoint backend: %s', backend.name)

    return Status(engine, backend, __version__)


use('cpu', 'ram')
