#!/usr/bin/env python
"""cpu runs every independent task sequentially in the current process"""
import logging

from mfkda.engines import Engine

log = logging.getLogger(__name__)


def cpu_map(func, items):
    log.debug('cpu engine: running %d tasks', len(items))
    return [func(item) for item in items]


# Export Engine
_engine = Engine('cpu', cpu_map, {})
