# -*- coding: utf-8 -*-
"""
Input-transformation defenses: bit depth reduction and a JPEG-style
quantization round-trip.

The JPEG defense keeps only what makes JPEG lossy: per 8x8 block the pixels
are level-shifted, transformed by an orthonormal 2-D DCT-II, quantized by the
quality-scaled luminance table and transformed back. No bitstream is
produced. The table is defined on the 8-bit intensity scale, so blocks are
processed in units of ``1/255``.

Attributes:
    DEFENSE_KINDS (tuple): Names accepted by ``Defense``.
"""
import numpy as np
from scipy.fft import dctn, idctn

from .constants import JPEG_BLOCK, JPEG_LUMINANCE_TABLE, PIXEL_LEVELS
from .exceptions import ParameterException
from .image import Image


DEFENSE_KINDS = ('bitdepth', 'jpeg')


def bit_depth_reduce(image, bits):
    """Quantize every pixel onto a ``2**bits`` level grid.

    Args:
        image (Image): Valid image.
        bits (int): Bit depth in ``[1, 8]``.

    Returns:
        Image: Pixels mapped to ``round(v * (2**bits - 1)) / (2**bits - 1)``,
        halves rounded up.

    Raises:
        ParameterException: ``bits`` outside ``[1, 8]``.
    """
    if not 1 <= bits <= 8:
        raise ParameterException(
            "Bit depth must lie in [1, 8], got %r" % (bits,))
    levels = float(2 ** int(bits) - 1)
    return Image(np.floor(image.pixels * levels + 0.5) / levels)


def quality_table(quality):
    """Scale the luminance table to a JPEG quality factor.

    Args:
        quality (int): Quality in ``[1, 100]``.

    Returns:
        numpy.ndarray: ``8x8`` quantization steps, each at least 1.

    Raises:
        ParameterException: ``quality`` outside ``[1, 100]``.
    """
    if not 1 <= quality <= 100:
        raise ParameterException(
            "JPEG quality must lie in [1, 100], got %r" % (quality,))
    if quality < 50:
        scale = 50.0 / quality
    else:
        scale = 2.0 - quality / 50.0
    table = np.asarray(JPEG_LUMINANCE_TABLE, dtype=np.float64) * scale
    return np.maximum(table, 1.0)


def _to_blocks(pixels):
    rows, cols = pixels.shape
    return pixels.reshape(rows // JPEG_BLOCK, JPEG_BLOCK,
                          cols // JPEG_BLOCK, JPEG_BLOCK).swapaxes(1, 2)


def _from_blocks(blocks):
    block_rows, block_cols = blocks.shape[:2]
    return blocks.swapaxes(1, 2).reshape(block_rows * JPEG_BLOCK,
                                         block_cols * JPEG_BLOCK)


def block_dct(pixels):
    """Orthonormal DCT-II of every 8x8 block of a padded pixel grid.

    Returns:
        numpy.ndarray: ``(block_rows, block_cols, 8, 8)`` coefficients.
    """
    return dctn(_to_blocks(pixels), type=2, norm='ortho', axes=(-2, -1))


def block_idct(coefficients):
    """Inverse of ``block_dct``."""
    return _from_blocks(
        idctn(coefficients, type=2, norm='ortho', axes=(-2, -1)))


def pad_to_blocks(pixels):
    """Pad a grid to multiples of 8 by replicating its edges."""
    rows, cols = pixels.shape
    pad_rows = (-rows) % JPEG_BLOCK
    pad_cols = (-cols) % JPEG_BLOCK
    return np.pad(pixels, ((0, pad_rows), (0, pad_cols)), mode='edge')


def jpeg_like_compress(image, quality):
    """Apply the JPEG quantization round-trip.

    Args:
        image (Image): Valid image of any size.
        quality (int): JPEG quality in ``[1, 100]``.

    Returns:
        Image: Reconstructed image, cropped back to the input size and
        clamped to ``[0, 1]``.

    Raises:
        ParameterException: ``quality`` outside ``[1, 100]``.
    """
    table = quality_table(quality)
    rows, cols = image.shape
    shifted = (pad_to_blocks(image.pixels) - 0.5) * PIXEL_LEVELS
    coefficients = block_dct(shifted)
    coefficients = np.rint(coefficients / table) * table
    restored = block_idct(coefficients) / PIXEL_LEVELS + 0.5
    return Image(np.clip(restored[:rows, :cols], 0.0, 1.0))


class Defense(object):

    """
    A named input transformation with its parameter.

    Attributes:
        kind (string): ``'bitdepth'`` or ``'jpeg'``.
        value (int): Bit depth or JPEG quality.
    """

    def __init__(self, kind, value):
        """Initialize instance of ``Defense``.

        Raises:
            ParameterException: Unknown kind or out-of-range value.
        """
        if kind not in DEFENSE_KINDS:
            raise ParameterException(
                "'%s' is not a defense; expected one of %s" % (
                    kind, ', '.join(DEFENSE_KINDS)))
        value = int(value)
        if kind == 'bitdepth' and not 1 <= value <= 8:
            raise ParameterException(
                "Bit depth must lie in [1, 8], got %d" % value)
        if kind == 'jpeg' and not 1 <= value <= 100:
            raise ParameterException(
                "JPEG quality must lie in [1, 100], got %d" % value)
        self.kind = kind
        self.value = value

    def apply(self, image):
        """Transform an image with this defense."""
        if self.kind == 'bitdepth':
            return bit_depth_reduce(image, self.value)
        return jpeg_like_compress(image, self.value)

    def __call__(self, image):
        return self.apply(image)

    def __str__(self):
        return "%s(%d)" % (self.kind, self.value)

    def __repr__(self):
        return "Defense(%r, %d)" % (self.kind, self.value)
