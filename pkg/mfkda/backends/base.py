#!/usr/bin/env python
"""Base classes for every checkpoint backend"""

from collections import namedtuple
import logging

import numpy as np

from mfkda.errors import MfkdaError

log = logging.getLogger(__name__)

SCHEMA = 'mfkda-checkpoint/1'

Checkpoint = namedtuple('Checkpoint', ['arrays', 'attrs'])


class BackendStore(object):
    """
    A named collection of checkpoints. Every checkpoint is a flat mapping of
    numpy arrays (keys may contain `/`) plus a mapping of plain attributes.
    """

    def __init__(self, name, open_mode="a", *args, **kwargs):
        self._name = name
        self._connected = False
        self._mode = open_mode
        log.debug('Extra store options: args=%s kwargs=%s', args, kwargs)

    @property
    def name(self):
        return self._name

    @property
    def connected(self):
        return self._connected

    @property
    def mode(self):
        return self._mode

    def connect(self):
        log.debug("Connecting to %s", self.name)
        self._connected = True

    def disconnect(self):
        log.debug("Disconnecting from %s", self.name)
        self._connected = False

    def __enter__(self):
        if not self.connected:
            self.connect()
        return self

    def __exit__(self, exc_type, exc_val, exc_tb):
        if self.connected:
            self.disconnect()

    def __getitem__(self, name):
        return self.get(name)

    def __contains__(self, name):
        return self.has(name)

    def put(self, name, arrays, attrs=None):
        raise NotImplementedError('`put` not implemented for this backend')

    def get(self, name):
        raise NotImplementedError('`get` not implemented for this backend')

    def has(self, name):
        raise NotImplementedError('`has` not implemented for this backend')

    def delete(self, name):
        raise NotImplementedError('`delete` not implemented for this backend')

    def names(self):
        raise NotImplementedError('`names` not implemented for this backend')

    # Utility methods used by all backends

    @staticmethod
    def _check_payload(name, arrays, attrs):
        if not name or '/' in name:
            raise MfkdaError('Invalid checkpoint name `{}`'.format(name))
        clean = {}
        for key, value in arrays.items():
            clean[key] = np.array(value, copy=True)
        attrs = dict(attrs or {})
        attrs['schema'] = SCHEMA
        return clean, attrs
