# -*- coding: utf-8 -*-
"""
Perceptual ground costs ``c0(x, x')``.

A cost compares an original image ``x`` with a candidate ``x'`` and is
differentiated in its second argument, the one an attack moves. Two costs
ship with the package:

  - ``SsimCost``: ``1 - SSIM(x, x')`` in either of two modes. ``global``
    computes the SSIM statistics over the whole image and has a tractable
    dense Hessian; ``windowed`` averages SSIM over every valid position of
    a Gaussian window, the usual image-quality definition.
  - ``L2Cost``: squared Euclidean pixel distance.

Any object implementing ``CostFunction.value_array`` and
``CostFunction.gradient_array`` can be handed to the attacks in place of
these.

Attributes:
    COST_NAMES (tuple): Command-line names understood by ``make_cost``.
"""
from dataclasses import asdict, dataclass

import numpy as np
from scipy.signal import convolve2d, correlate2d

from .constants import (HESSIAN_MAX_PIXELS, HESSIAN_STEP, SSIM_K1, SSIM_K2,
                        SSIM_WINDOW_SIGMA, SSIM_WINDOW_SIZE)
from .exceptions import (CapabilityException, DimensionException,
                         ParameterException, SizeException)
from .image import Image


COST_NAMES = ('ssim-global', 'ssim-windowed', 'l2')

SSIM_MODES = ('global', 'windowed')


@dataclass(frozen=True)
class SsimConfig(object):

    """
    SSIM constants and aggregation mode.

    Attributes:
        k1 (float): Luminance stabilizer coefficient.
        k2 (float): Contrast stabilizer coefficient.
        dynamic_range (float): Intensity range ``L`` (1 for ``[0, 1]``).
        mode (string): ``'global'`` or ``'windowed'``.
        window_size (int): Odd side of the Gaussian window.
        window_sigma (float): Standard deviation of the Gaussian window.
    """

    k1: float = SSIM_K1
    k2: float = SSIM_K2
    dynamic_range: float = 1.0
    mode: str = 'windowed'
    window_size: int = SSIM_WINDOW_SIZE
    window_sigma: float = SSIM_WINDOW_SIGMA

    def __post_init__(self):
        if self.k1 <= 0 or self.k2 <= 0 or self.dynamic_range <= 0:
            raise ParameterException(
                "SSIM needs k1, k2 and dynamic_range > 0, got %r, %r, %r" % (
                    self.k1, self.k2, self.dynamic_range))
        if self.mode not in SSIM_MODES:
            raise ParameterException(
                "'%s' is not an SSIM mode; expected one of %s" % (
                    self.mode, ', '.join(SSIM_MODES)))
        if self.window_size < 1 or self.window_size % 2 == 0:
            raise ParameterException(
                "SSIM window size must be a positive odd integer, got %r" % (
                    self.window_size,))
        if self.window_sigma <= 0:
            raise ParameterException(
                "SSIM window sigma must be positive, got %r" % (
                    self.window_sigma,))

    @property
    def c1(self):
        return (self.k1 * self.dynamic_range) ** 2

    @property
    def c2(self):
        return (self.k2 * self.dynamic_range) ** 2

    def as_dict(self):
        return asdict(self)


def gaussian_window(size, sigma):
    """Normalized 2-D Gaussian window of side ``size``."""
    offsets = np.arange(size, dtype=np.float64) - (size - 1) / 2.0
    profile = np.exp(-offsets ** 2 / (2.0 * sigma ** 2))
    window = np.outer(profile, profile)
    return window / window.sum()


def _check_shapes(x, y):
    if x.shape != y.shape:
        raise DimensionException(
            "Cannot compare a %dx%d image with a %dx%d image" % (
                tuple(x.shape) + tuple(y.shape)))


def _window_for(shape, cfg):
    if shape[0] < cfg.window_size or shape[1] < cfg.window_size:
        raise DimensionException(
            "A %dx%d image is smaller than the %d-pixel SSIM window" % (
                shape[0], shape[1], cfg.window_size))
    return gaussian_window(cfg.window_size, cfg.window_sigma)


def _windowed_terms(x, y, cfg):
    window = _window_for(x.shape, cfg)
    mu_x = correlate2d(x, window, mode='valid')
    mu_y = correlate2d(y, window, mode='valid')
    var_x = correlate2d(x * x, window, mode='valid') - mu_x ** 2
    var_y = correlate2d(y * y, window, mode='valid') - mu_y ** 2
    cov = correlate2d(x * y, window, mode='valid') - mu_x * mu_y
    return window, mu_x, mu_y, var_x, var_y, cov


def _ssim_map(mu_x, mu_y, var_x, var_y, cov, cfg):
    num_l = 2.0 * mu_x * mu_y + cfg.c1
    num_c = 2.0 * cov + cfg.c2
    den_l = mu_x ** 2 + mu_y ** 2 + cfg.c1
    den_c = var_x + var_y + cfg.c2
    return num_l * num_c / (den_l * den_c), num_l, num_c, den_l, den_c


def _global_terms(x, y):
    mu_x = x.mean()
    mu_y = y.mean()
    dx = x - mu_x
    dy = y - mu_y
    return mu_x, mu_y, np.mean(dx * dx), np.mean(dy * dy), np.mean(dx * dy)


def ssim_array(x, y, cfg):
    """SSIM of two equally shaped 2-D arrays."""
    _check_shapes(x, y)
    if cfg.mode == 'global':
        index = _ssim_map(*(_global_terms(x, y) + (cfg,)))[0]
        return float(index)
    terms = _windowed_terms(x, y, cfg)[1:]
    return float(np.mean(_ssim_map(*(terms + (cfg,)))[0]))


def ssim_gradient_array(x, y, cfg):
    """Gradient of SSIM in its second argument, as a 2-D array."""
    _check_shapes(x, y)
    if cfg.mode == 'global':
        mu_x, mu_y, _, _, _ = terms = _global_terms(x, y)
        index, num_l, num_c, den_l, den_c = _ssim_map(*(terms + (cfg,)))
        count = x.size
        return index * (2.0 * mu_x / num_l - 2.0 * mu_y / den_l
                        + 2.0 * (x - mu_x) / num_c
                        - 2.0 * (y - mu_y) / den_c) / count
    window, mu_x, mu_y, var_x, var_y, cov = _windowed_terms(x, y, cfg)
    index, num_l, num_c, den_l, den_c = _ssim_map(
        mu_x, mu_y, var_x, var_y, cov, cfg)
    # d index_p / d y_k = w[k - p] * (alpha_p + beta_p * x_k + gamma_p * y_k)
    beta = 2.0 * index / num_c
    gamma = -2.0 * index / den_c
    alpha = index * (2.0 * mu_x / num_l - 2.0 * mu_y / den_l) \
        - beta * mu_x - gamma * mu_y
    gradient = convolve2d(alpha, window, mode='full') \
        + x * convolve2d(beta, window, mode='full') \
        + y * convolve2d(gamma, window, mode='full')
    return gradient / index.size


def ssim(x, y, cfg=None):
    """Structural similarity of two images.

    Args:
        x (Image): First image.
        y (Image): Second image.
        cfg (SsimConfig, optional): Constants and mode. Defaults to the
            windowed standard configuration.

    Returns:
        float: SSIM in ``[-1, 1]``; 1 for identical images.

    Raises:
        DimensionException: Shapes differ, or an image is smaller than the
            window in windowed mode.
    """
    return ssim_array(x.pixels, y.pixels, cfg or SsimConfig())


class CostFunction(object):

    """
    Ground cost contract.

    Subclasses implement ``value_array`` and ``gradient_array`` on 2-D pixel
    arrays; the ``Image`` level methods check shapes and delegate.

    Attributes:
        kind (string): Cost kind tag.
        supports_hessian (bool): Whether ``cost_hessian_at_base`` accepts
            this cost without the debug override.
    """

    kind = None
    supports_hessian = False

    def value_array(self, x, y):
        raise NotImplementedError

    def gradient_array(self, x, y):
        raise NotImplementedError

    def value(self, x, y):
        """Cost of moving ``x`` to ``y``."""
        _check_shapes(x, y)
        return self.value_array(x.pixels, y.pixels)

    def gradient(self, x, y):
        """Row-major gradient of the cost in ``y``."""
        _check_shapes(x, y)
        return self.gradient_array(x.pixels, y.pixels).reshape(-1)

    def describe(self):
        """Plain mapping recorded next to the outputs using this cost."""
        return {'kind': self.kind}


class SsimCost(CostFunction):

    """
    ``1 - SSIM`` ground cost.

    Attributes:
        config (SsimConfig): SSIM constants and mode.
    """

    kind = 'one_minus_ssim'

    def __init__(self, config=None):
        self.config = config or SsimConfig()

    @property
    def supports_hessian(self):
        return self.config.mode == 'global'

    def value_array(self, x, y):
        return 1.0 - ssim_array(x, y, self.config)

    def gradient_array(self, x, y):
        return -ssim_gradient_array(x, y, self.config)

    def describe(self):
        record = {'kind': self.kind}
        record.update(self.config.as_dict())
        return record

    def __repr__(self):
        return "SsimCost(mode=%r)" % self.config.mode


class L2Cost(CostFunction):

    """Squared Euclidean pixel distance."""

    kind = 'l2'

    def value_array(self, x, y):
        diff = y - x
        return float(np.sum(diff * diff))

    def gradient_array(self, x, y):
        return 2.0 * (y - x)

    def __repr__(self):
        return "L2Cost()"


def make_cost(name):
    """Build a cost from its command-line name.

    Args:
        name (string): One of ``COST_NAMES``.

    Raises:
        ParameterException: Unknown name.
    """
    if name == 'ssim-global':
        return SsimCost(SsimConfig(mode='global'))
    if name == 'ssim-windowed':
        return SsimCost(SsimConfig(mode='windowed'))
    if name == 'l2':
        return L2Cost()
    raise ParameterException(
        "'%s' is not a cost; expected one of %s" % (
            name, ', '.join(COST_NAMES)))


def cost_value(cost, x, y):
    """Evaluate ``c0(x, y)``.

    Raises:
        DimensionException: Shapes differ.
    """
    return cost.value(x, y)


def cost_gradient(cost, x, y):
    """Evaluate the gradient of ``c0(x, y)`` in ``y``.

    Returns:
        numpy.ndarray: Row-major vector of length ``x.size``.

    Raises:
        DimensionException: Shapes differ.
    """
    return cost.gradient(x, y)


class CostHessian(object):

    """
    Dense Hessian of ``y -> c0(x0, y)`` at ``y = x0``.

    Attributes:
        matrix (numpy.ndarray): Read-only symmetric ``n x n`` matrix.
        base_point (Image): The image ``x0``.
    """

    def __init__(self, matrix, base_point):
        matrix = np.array(matrix, dtype=np.float64)
        matrix.setflags(write=False)
        self.matrix = matrix
        self.base_point = base_point

    @property
    def size(self):
        return self.matrix.shape[0]

    def matvec(self, vector):
        """Hessian-vector product."""
        return self.matrix.dot(np.asarray(vector, dtype=np.float64))

    def to_csv(self, path):
        """Dump the matrix as comma separated rows."""
        np.savetxt(path, self.matrix, fmt='%.9g', delimiter=',')


def cost_hessian_at_base(cost, base, allow_debug=False):
    """Hessian of the cost in its second argument at the base point.

    Columns are central differences of the analytic gradient with step
    ``HESSIAN_STEP``; the result is symmetrized as ``(H + H^T) / 2``.

    Args:
        cost (CostFunction): Cost to differentiate; ``1 - SSIM`` in global
            mode unless ``allow_debug`` is set.
        base (Image): Base point ``x0``.
        allow_debug (bool, optional): Accept any cost with an analytic
            gradient (the ``l2`` cost yields ``2 I``). Defaults to
            ``False``.

    Returns:
        CostHessian: The symmetrized Hessian.

    Raises:
        CapabilityException: Cost kind or SSIM mode without Hessian support.
        SizeException: More than ``HESSIAN_MAX_PIXELS`` pixels.
    """
    if not (cost.supports_hessian or allow_debug):
        raise CapabilityException(
            "No Hessian for cost %r; only 1 - SSIM in global mode" % (cost,))
    count = base.size
    if count > HESSIAN_MAX_PIXELS:
        raise SizeException(
            "A dense Hessian of %d pixels exceeds the budget of %d" % (
                count, HESSIAN_MAX_PIXELS))
    origin = base.pixels
    point = origin.reshape(-1).copy()
    matrix = np.empty((count, count))
    for column in range(count):
        saved = point[column]
        point[column] = saved + HESSIAN_STEP
        upper = cost.gradient_array(origin, point.reshape(origin.shape))
        point[column] = saved - HESSIAN_STEP
        lower = cost.gradient_array(origin, point.reshape(origin.shape))
        point[column] = saved
        matrix[:, column] = (upper - lower).reshape(-1) / (2.0 * HESSIAN_STEP)
    return CostHessian(0.5 * (matrix + matrix.T), base)
