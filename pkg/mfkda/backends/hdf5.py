#!/usr/bin/env python
"""Backend hdf5 writes one hdf file per checkpoint"""

import json
import logging
import os

import h5py as h5
import numpy as np

from mfkda.backends import Backend
from mfkda.backends.base import BackendStore, Checkpoint
from mfkda.errors import CheckpointNotFoundError, MfkdaError

_CHECKPOINT_EXT = '.h5'
_ATTRS_KEY = 'attrs_json'
log = logging.getLogger(__name__)


def _validate_path(path):
    if os.path.splitext(path)[1]:
        raise MfkdaError('`{}` is not a valid path'.format(path))


class H5Store(BackendStore):
    """
    A HDF5 Store is a directory of checkpoint files on the local filesystem.
    """

    def __init__(self, name, directory='.', *args, **kwargs):
        super(H5Store, self).__init__(name, *args, **kwargs)
        self.directory = os.path.realpath(directory)
        _validate_path(self.path)

    @property
    def path(self):
        return os.path.join(self.directory, self.name)

    def relpath(self, name=''):
        return os.path.join(self.path, name)

    def connect(self):
        super(H5Store, self).connect()
        if not os.path.isdir(self.path):
            os.makedirs(self.path)
        log.debug('Starting HDF5 store at `%s`', self.path)

    def disconnect(self):
        super(H5Store, self).disconnect()
        log.debug('Stopping HDF5 store at `%s`', self.path)

    def _checkpoint_path(self, name):
        return self.relpath(name + _CHECKPOINT_EXT)

    def put(self, name, arrays, attrs=None):
        arrays, attrs = self._check_payload(name, arrays, attrs)
        if not os.path.isdir(self.path):
            os.makedirs(self.path)
        path = self._checkpoint_path(name)
        log.debug('Writing checkpoint at `%s`', path)
        with h5.File(path, 'w') as file_handle:
            for key in sorted(arrays):
                file_handle.create_dataset(key, data=arrays[key])
            file_handle.attrs['schema'] = attrs['schema']
            file_handle.attrs[_ATTRS_KEY] = json.dumps(attrs, sort_keys=True)

    def get(self, name):
        if not self.has(name):
            raise CheckpointNotFoundError(
                'Checkpoint at `%s` does not exist'
                % self._checkpoint_path(name))
        arrays = {}

        def _collect(key, node):
            if isinstance(node, h5.Dataset):
                arrays[key] = np.array(node[()])

        with h5.File(self._checkpoint_path(name), 'r') as file_handle:
            file_handle.visititems(_collect)
            attrs = json.loads(file_handle.attrs[_ATTRS_KEY])
        return Checkpoint(arrays, attrs)

    def has(self, name):
        return os.path.isfile(self._checkpoint_path(name))

    def delete(self, name):
        path = self._checkpoint_path(name)
        if not self.has(name):
            raise CheckpointNotFoundError(
                'Checkpoint at `{}` does not exist'.format(path))
        log.debug('Removing checkpoint at `%s`', path)
        os.remove(path)

    def names(self):
        if not os.path.isdir(self.path):
            return []
        return sorted(os.path.splitext(f)[0] for f in os.listdir(self.path)
                      if f.endswith(_CHECKPOINT_EXT))


_backend = Backend('hdf5', H5Store)
