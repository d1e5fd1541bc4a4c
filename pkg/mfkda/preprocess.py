#!/usr/bin/env python
"""Gallery degradation and probe enhancement of grayscale face images"""

from collections import namedtuple
import logging
import math

import numpy as np
from PIL import Image
from scipy import ndimage

from mfkda.errors import InputError, ParameterError

log = logging.getLogger(__name__)

# ITU-R BT.601 luma weights
_LUMA = np.array([0.299, 0.587, 0.114])


class ImageMatrix(object):
    """
    Single-channel image held in floating point, nominal range [0, 255].
    Pixels are only quantized when written to disk.
    """

    def __init__(self, pixels):
        pixels = np.array(pixels, dtype=np.float64)
        if pixels.ndim != 2 or pixels.size == 0:
            raise InputError('Image must be a non-empty 2-D array, got shape '
                             '{}'.format(pixels.shape))
        if not np.all(np.isfinite(pixels)):
            raise InputError('Image has non-finite pixels')
        pixels.setflags(write=False)
        self._pixels = pixels

    @property
    def pixels(self):
        return self._pixels

    @property
    def height(self):
        return self._pixels.shape[0]

    @property
    def width(self):
        return self._pixels.shape[1]

    @property
    def shape(self):
        return self._pixels.shape

    def __array__(self, dtype=None):
        if dtype is None:
            return self._pixels
        return self._pixels.astype(dtype)

    def __repr__(self):
        return 'ImageMatrix({}x{})'.format(self.height, self.width)


PreprocessParams = namedtuple('PreprocessParams',
                              ['sigma', 'gamma', 'target_size'])


def check_params(params):
    if not params.sigma > 0:
        raise ParameterError('sigma must be positive, got {}'
                             .format(params.sigma))
    if not params.gamma > 0:
        raise ParameterError('gamma must be positive, got {}'
                             .format(params.gamma))
    if params.target_size is not None:
        _check_target(params.target_size)
    return params


def as_image(img):
    if isinstance(img, ImageMatrix):
        return img
    return ImageMatrix(img)


def gaussian_kernel(sigma):
    """L1-normalized 2-D Gaussian truncated at radius ceil(3 sigma)"""
    if not sigma > 0:
        raise ParameterError('sigma must be positive, got {}'.format(sigma))
    radius = int(math.ceil(3 * sigma))
    x = np.arange(-radius, radius + 1, dtype=np.float64)
    xx, yy = np.meshgrid(x, x, indexing='ij')
    kernel = np.exp(-(xx ** 2 + yy ** 2) / (2.0 * sigma ** 2))
    return kernel / kernel.sum()


def gaussian_degrade(img, sigma):
    if not sigma > 0:
        raise ParameterError('sigma must be positive, got {}'.format(sigma))
    img = as_image(img)
    out = ndimage.correlate(img.pixels, gaussian_kernel(sigma),
                            mode='nearest')
    return ImageMatrix(out)


def gamma_stretch(img, gamma):
    if not gamma > 0:
        raise ParameterError('gamma must be positive, got {}'.format(gamma))
    img = as_image(img)
    pixels = img.pixels
    if pixels.min() < 0 or pixels.max() > 255:
        raise InputError('Pixels must lie in [0, 255] for gamma stretching, '
                         'got [{}, {}]'.format(pixels.min(), pixels.max()))
    if gamma == 1:
        return ImageMatrix(pixels.copy())
    out = 255.0 * np.power(pixels / 255.0, 1.0 / gamma)
    return ImageMatrix(np.clip(out, 0.0, 255.0))


def _check_target(target):
    if len(target) != 2 or int(target[0]) < 1 or int(target[1]) < 1:
        raise ParameterError('Target size must be two positive integers, '
                             'got {}'.format(target))
    return int(target[0]), int(target[1])


def cubic_weight(t, a=-0.5):
    """Keys cubic convolution kernel"""
    t = np.abs(t)
    return np.where(
        t <= 1, (a + 2) * t ** 3 - (a + 3) * t ** 2 + 1,
        np.where(t < 2, a * t ** 3 - 5 * a * t ** 2 + 8 * a * t - 4 * a, 0.0))


def _resize_matrix(n_in, n_out):
    # output pixel i samples the input at half-pixel aligned coordinate src
    weights = np.zeros((n_out, n_in))
    scale = float(n_in) / n_out
    for i in range(n_out):
        src = (i + 0.5) * scale - 0.5
        base = int(math.floor(src))
        for tap in range(base - 1, base + 3):
            w = cubic_weight(src - tap)
            if w == 0:
                continue
            weights[i, min(max(tap, 0), n_in - 1)] += w
    return weights


def resize_bicubic(img, target):
    height, width = _check_target(target)
    img = as_image(img)
    if (height, width) == img.shape:
        return ImageMatrix(img.pixels.copy())
    rows = _resize_matrix(img.height, height)
    cols = _resize_matrix(img.width, width)
    return ImageMatrix(rows.dot(img.pixels).dot(cols.T))


def degrade_gallery(img, params):
    img = as_image(img)
    if params.target_size is not None:
        img = resize_bicubic(img, params.target_size)
    return gaussian_degrade(img, params.sigma)


def enhance_probe(img, params):
    img = as_image(img)
    if params.target_size is not None:
        img = resize_bicubic(img, params.target_size)
    # bicubic overshoot can leave the valid range
    img = ImageMatrix(np.clip(img.pixels, 0.0, 255.0))
    return gamma_stretch(img, params.gamma)


def read_image(path):
    with Image.open(path) as handle:
        if handle.mode in ('L', 'I', 'F', 'I;16'):
            data = np.asarray(handle, dtype=np.float64)
        else:
            rgb = np.asarray(handle.convert('RGB'), dtype=np.float64)
            data = rgb.dot(_LUMA)
    log.debug('Read image `%s` %s', path, data.shape)
    return ImageMatrix(data)


def write_image(img, path):
    img = as_image(img)
    data = np.clip(np.round(img.pixels), 0, 255).astype(np.uint8)
    Image.fromarray(data).save(path)
    log.debug('Wrote image `%s` %s', path, data.shape)
