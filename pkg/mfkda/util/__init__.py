#!/usr/bin/env python
"""hard to classify useful functions"""

import logging
import sys
import time

import numpy as np

log = logging.getLogger(__name__)


def as_rng(seed):
    if isinstance(seed, np.random.RandomState):
        return seed
    return np.random.RandomState(seed)


def stable_argmax(values):
    # lowest index wins ties
    values = np.asarray(values)
    return int(np.flatnonzero(values == values.max())[0])


class Timer(object):
    def __init__(self, name='Timer'):
        self.name = name
        self.tstart = -1
        self.tend = -1
        self.time = 0

    def __enter__(self):
        self.tstart = time.time()
        return self

    def __exit__(self, *args):
        self.tend = time.time()
        self.time = self.tend - self.tstart
        log.info('[*] %s -- Elapsed: %.4f seconds', self.name, self.time)


def configure_logger(log, level=logging.DEBUG):
    stream_handler = logging.StreamHandler(sys.stdout)
    stream_handler.setFormatter(
        logging.Formatter(
            "%(asctime)s - %(name)s - %(levelname)s - %(message)s"))
    log.addHandler(stream_handler)
    log.setLevel(level)


def named_module(name):
    # convenient function to unify all named imports
    from importlib import import_module
    return import_module(name)
