# -*- coding: utf-8 -*-
"""
Fixed numbers shared across the package: file-format magics, the JPEG
luminance table, SSIM defaults and the limits of the dense computations.

Attributes:
    IDX_UBYTE_IMAGES_MAGIC: Magic number of an IDX file of unsigned-byte
        images (``0x00000803``, 2051).
    IDX_UBYTE_LABELS_MAGIC: Magic number of an IDX file of unsigned-byte
        labels (``0x00000801``, 2049).
    IDX_DOUBLE_IMAGES_MAGIC: Magic number of an IDX file of big-endian
        64-bit float images (``0x00000E03``). Used for robust datasets whose
        adversarial pixels are not on the 8-bit grid.
    PIXEL_LEVELS: Number of intensity levels of an 8-bit image minus one.
    JPEG_BLOCK: Side of a JPEG transform block.
    JPEG_LUMINANCE_TABLE: The standard JPEG luminance quantization table,
        row-major.
    SSIM_K1: Default SSIM luminance stabilizer coefficient.
    SSIM_K2: Default SSIM contrast stabilizer coefficient.
    SSIM_WINDOW_SIZE: Default side of the Gaussian SSIM window.
    SSIM_WINDOW_SIGMA: Default standard deviation of the Gaussian window.
    HESSIAN_MAX_PIXELS: Largest pixel count for which a dense cost Hessian
        is built.
    HESSIAN_STEP: Central-difference step used to differentiate the
        analytic cost gradient.
    HESSIAN_RIDGE: Default ridge scale; the ridge added to the Hessian is
        ``HESSIAN_RIDGE * trace(H) / n``.
    ASCENT_MAX_HALVINGS: Halvings of a rejected perceptual ascent step before
        the ascent is declared stalled.
    DIVERGENCE_LOSS: Single-example loss above which weighted DRO training
        is aborted as diverged.
    CHECKPOINT_MAGIC: Leading bytes of a model checkpoint file.
    CHECKPOINT_VERSION: Layout version written after the magic.
    MLP_HIDDEN: Width of the hidden layer of the ``mlp`` architecture.
    CONV_KERNEL: Side of the convolution kernel of the ``convnet``
        architecture.
    CONV_CHANNELS: Number of convolution channels of the ``convnet``.
    POOL: Side of the max-pool window of the ``convnet``.
    FLOAT_FORMAT: Format used for every float written to a CSV file
        (9 significant digits).
    WORKERS_ENV: Environment variable overriding the default worker count.
    LOG_INCOME_RANGE: Range of the synthetic log-income grid.
    GROUP_SIZE_EXPONENT: Exponent of the power law drawing synthetic group
        sizes.
"""

IDX_UBYTE_IMAGES_MAGIC = 0x00000803
IDX_UBYTE_LABELS_MAGIC = 0x00000801
IDX_DOUBLE_IMAGES_MAGIC = 0x00000E03

PIXEL_LEVELS = 255

JPEG_BLOCK = 8
JPEG_LUMINANCE_TABLE = (
    (16, 11, 10, 16, 24, 40, 51, 61),
    (12, 12, 14, 19, 26, 58, 60, 55),
    (14, 13, 16, 24, 40, 57, 69, 56),
    (14, 17, 22, 29, 51, 87, 80, 62),
    (18, 22, 37, 56, 68, 109, 103, 77),
    (24, 35, 55, 64, 81, 104, 113, 92),
    (49, 64, 78, 87, 103, 121, 120, 101),
    (72, 92, 95, 98, 112, 100, 103, 99),
)

SSIM_K1 = 0.01
SSIM_K2 = 0.03
SSIM_WINDOW_SIZE = 11
SSIM_WINDOW_SIGMA = 1.5

HESSIAN_MAX_PIXELS = 4096
HESSIAN_STEP = 1e-4
HESSIAN_RIDGE = 1e-6

ASCENT_MAX_HALVINGS = 40
DIVERGENCE_LOSS = 100.0

CHECKPOINT_MAGIC = b'PDROCKPT'
CHECKPOINT_VERSION = 1

MLP_HIDDEN = 128
CONV_KERNEL = 5
CONV_CHANNELS = 8
POOL = 2

FLOAT_FORMAT = '{0:.9g}'

WORKERS_ENV = 'PERCEPTUAL_DRO_WORKERS'

LOG_INCOME_RANGE = (6.0, 11.5)
GROUP_SIZE_EXPONENT = 1.0
