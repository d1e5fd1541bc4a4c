#!/usr/bin/env python
"""backend RAM keeps every checkpoint in memory"""

import copy
import logging

from mfkda.backends import Backend
from mfkda.backends.base import BackendStore, Checkpoint
from mfkda.errors import CheckpointNotFoundError

log = logging.getLogger(__name__)


class MemStore(BackendStore):
    """
    A Memory Store represents a dictionary.
    """

    def __init__(self, *args, **kwargs):
        super(MemStore, self).__init__(*args, **kwargs)
        self.checkpoints = {}

    def put(self, name, arrays, attrs=None):
        arrays, attrs = self._check_payload(name, arrays, attrs)
        log.debug('Storing checkpoint `%s` (%d arrays)', name, len(arrays))
        self.checkpoints[name] = Checkpoint(arrays, attrs)

    def get(self, name):
        if not self.has(name):
            raise CheckpointNotFoundError(
                'Checkpoint `%s` does not exist' % name)
        stored = self.checkpoints[name]
        arrays = dict((k, v.copy()) for k, v in stored.arrays.items())
        return Checkpoint(arrays, copy.deepcopy(stored.attrs))

    def has(self, name):
        return name in self.checkpoints

    def delete(self, name):
        if not self.has(name):
            raise CheckpointNotFoundError(
                'Checkpoint `%s` does not exist' % name)
        log.debug('Removing checkpoint `%s`', name)
        del self.checkpoints[name]

    def names(self):
        return sorted(self.checkpoints)


_backend = Backend('ram', MemStore)
