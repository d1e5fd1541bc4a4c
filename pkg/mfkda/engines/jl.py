#!/usr/bin/env python
"""Engine jl uses module joblib to run independent per-kernel and per-pair
tasks in parallel"""

import logging

from joblib import Parallel, delayed

from mfkda.engines import Engine

log = logging.getLogger(__name__)


def joblib_map(func, items):
    njobs = int(_engine.params['njobs'])
    jlbackend = _engine.params['backend']
    if njobs == 1 or len(items) < 2:
        return [func(item) for item in items]
    log.debug('joblib engine: %d tasks on %d jobs (%s)',
              len(items), njobs, jlbackend)
    # Parallel returns results in submission order
    return Parallel(n_jobs=njobs, backend=jlbackend)(
        delayed(func)(item) for item in items
    )


# Export Engine
_engine = Engine('jl', joblib_map, dict(njobs=1, backend='loky'))
