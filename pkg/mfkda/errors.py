#!/usr/bin/env python
"""Exceptions raised across mfkda"""


class MfkdaError(Exception):
    pass


class ParameterError(MfkdaError, ValueError):
    pass


class InputError(MfkdaError, ValueError):
    pass


class DegenerateDataError(MfkdaError):
    pass


class NormalizationError(MfkdaError):
    pass


class ConvergenceError(MfkdaError):

    def __init__(self, message, model=None):
        super(ConvergenceError, self).__init__(message)
        self.model = model


class DivergenceError(MfkdaError):
    pass


class ValidationError(MfkdaError):

    def __init__(self, message, line=None):
        if line is not None:
            message = 'line {}: {}'.format(line, message)
        super(ValidationError, self).__init__(message)
        self.line = line


class StageError(MfkdaError):

    def __init__(self, stage, cause):
        super(StageError, self).__init__(
            'Stage `{}` failed: {}'.format(stage, cause))
        self.stage = stage
        self.cause = cause


class CheckpointNotFoundError(MfkdaError):
    pass
