# -*- coding: utf-8 -*-
"""
Grayscale images and the datasets built from them.

An ``Image`` is a height by width grid of intensities in ``[0, 1]``. Pixels
may leave that range for the length of a single attack update; the update is
always followed by ``validate_image``, which projects them back.

The ``image`` module also includes the pixel distances reported next to
every attack.
"""
import math

import numpy as np

from .exceptions import (ConsistencyException, DimensionException,
                         NumericException, ParameterException)
from .streams import stream


class Image(object):

    """
    Immutable grayscale image.

    Attributes:
        pixels (numpy.ndarray): Read-only ``(height, width)`` float64 array.
    """

    def __init__(self, pixels):
        """Initialize instance of ``Image``.

        Args:
            pixels (array_like): Two dimensional grid of intensities. The
                values are copied.

        Raises:
            DimensionException: Not a non-empty two dimensional grid.
        """
        array = np.array(pixels, dtype=np.float64)
        if array.ndim != 2 or array.size == 0:
            raise DimensionException(
                "An image needs a non-empty 2-D pixel grid, got shape %s" % (
                    array.shape,))
        array.setflags(write=False)
        self.pixels = array

    @classmethod
    def from_flat(cls, height, width, values):
        """Build an ``Image`` from a row-major pixel vector.

        Raises:
            DimensionException: ``len(values) != height * width``.
        """
        values = np.asarray(values, dtype=np.float64)
        if values.size != height * width:
            raise DimensionException(
                "%d pixels do not fill a %dx%d image" % (
                    values.size, height, width))
        return cls(values.reshape(height, width))

    @property
    def height(self):
        return self.pixels.shape[0]

    @property
    def width(self):
        return self.pixels.shape[1]

    @property
    def shape(self):
        return self.pixels.shape

    @property
    def size(self):
        return self.pixels.size

    @property
    def flat(self):
        """Row-major pixel vector (read-only view)."""
        return self.pixels.reshape(-1)

    def is_valid(self):
        """Return whether every pixel lies in ``[0, 1]``."""
        return bool(np.all((self.pixels >= 0.0) & (self.pixels <= 1.0)))

    def __eq__(self, other):
        if not isinstance(other, Image):
            return NotImplemented
        return self.shape == other.shape and \
            bool(np.array_equal(self.pixels, other.pixels))

    def __ne__(self, other):
        result = self.__eq__(other)
        if result is NotImplemented:
            return result
        return not result

    __hash__ = None

    def __repr__(self):
        return "Image(%dx%d)" % self.shape


class LabeledExample(object):

    """
    One ``(image, label)`` sample.

    Attributes:
        image (Image): The sample's image.
        label (int): Class index.
    """
    #pylint: disable=too-few-public-methods

    def __init__(self, image, label):
        self.image = image
        self.label = int(label)

    def __repr__(self):
        return "LabeledExample(%r, %d)" % (self.image, self.label)


class Dataset(object):

    """
    Ordered collection of labeled images of a common size.

    Images are stored stacked so that training and evaluation can work on
    whole batches; indexing yields ``LabeledExample`` objects.

    Attributes:
        images (numpy.ndarray): ``(count, height, width)`` float64 array.
        labels (numpy.ndarray): ``(count,)`` int64 array.
        class_count (int): Number of classes ``C``.
        group_ids (numpy.ndarray): ``(count,)`` int64 group membership, or
            ``None`` when the dataset carries no groups.
    """

    def __init__(self, images, labels, class_count=10, group_ids=None):
        """Initialize instance of ``Dataset``.

        Args:
            images (array_like): ``(count, height, width)`` pixel stack.
            labels (array_like): One class index per image.
            class_count (int, optional): Number of classes. Defaults to 10.
            group_ids (array_like, optional): One group id per image.

        Raises:
            DimensionException: Images are not a 3-D stack.
            ConsistencyException: Counts disagree or a label is out of range.
        """
        images = np.array(images, dtype=np.float64)
        labels = np.array(labels, dtype=np.int64).reshape(-1)
        if images.ndim != 3:
            raise DimensionException(
                "Dataset images must be stacked as (count, height, width),"
                " got shape %s" % (images.shape,))
        if images.shape[0] != labels.shape[0]:
            raise ConsistencyException(
                "%d images but %d labels" % (images.shape[0], labels.shape[0]))
        if class_count < 1:
            raise ParameterException(
                "class_count must be positive, got %d" % class_count)
        if labels.size and (labels.min() < 0 or labels.max() >= class_count):
            raise ConsistencyException(
                "Labels must lie in [0, %d), got range [%d, %d]" % (
                    class_count, labels.min(), labels.max()))
        if group_ids is not None:
            group_ids = np.array(group_ids, dtype=np.int64).reshape(-1)
            if group_ids.shape[0] != labels.shape[0]:
                raise ConsistencyException(
                    "%d group ids for %d examples" % (
                        group_ids.shape[0], labels.shape[0]))
            group_ids.setflags(write=False)
        images.setflags(write=False)
        labels.setflags(write=False)
        self.images = images
        self.labels = labels
        self.class_count = int(class_count)
        self.group_ids = group_ids

    @classmethod
    def from_examples(cls, examples, class_count=10, group_ids=None):
        """Build a ``Dataset`` from a sequence of ``LabeledExample``."""
        examples = list(examples)
        if not examples:
            raise ParameterException("Cannot build a dataset from no examples")
        images = np.stack([example.image.pixels for example in examples])
        labels = [example.label for example in examples]
        return cls(images, labels, class_count, group_ids)

    @property
    def image_shape(self):
        return self.images.shape[1:]

    @property
    def examples(self):
        """list: The dataset as ``LabeledExample`` objects."""
        return [self[index] for index in range(len(self))]

    def subset(self, indices):
        """Return a new ``Dataset`` holding the given examples, in order."""
        indices = np.asarray(indices, dtype=np.int64)
        groups = None if self.group_ids is None else self.group_ids[indices]
        return Dataset(self.images[indices], self.labels[indices],
                       self.class_count, groups)

    def with_groups(self, group_ids):
        """Return a copy of this ``Dataset`` carrying ``group_ids``."""
        return Dataset(self.images, self.labels, self.class_count, group_ids)

    def __len__(self):
        return self.labels.shape[0]

    def __getitem__(self, index):
        return LabeledExample(Image(self.images[index]), self.labels[index])

    def __iter__(self):
        for index in range(len(self)):
            yield self[index]


def validate_image(image):
    """Project an image onto the valid pixel range ``[0, 1]``.

    Args:
        image (Image): Possibly out-of-range image.

    Returns:
        Image: Copy with every pixel clamped to ``[0, 1]``.

    Raises:
        NumericException: A pixel is NaN or infinite.
    """
    pixels = image.pixels
    if not np.all(np.isfinite(pixels)):
        raise NumericException(
            "Image holds %d non-finite pixel values" % (
                np.count_nonzero(~np.isfinite(pixels))))
    return Image(np.clip(pixels, 0.0, 1.0))


def _norm_order(order):
    if order in (1, 2):
        return order
    if order in ('inf', 'Inf', 'INF') or (
            isinstance(order, float) and math.isinf(order) and order > 0):
        return np.inf
    raise ParameterException(
        "Distance order must be one of 1, 2, inf; got %r" % (order,))


def lp_distance(x, y, order):
    """Norm of the pixel difference of two images.

    Args:
        x (Image): First image.
        y (Image): Second image.
        order: ``1``, ``2`` or ``inf`` (``math.inf`` or the string
            ``'inf'``). ``2`` is the Euclidean norm, not its square.

    Returns:
        float: ``||x - y||_order``.

    Raises:
        DimensionException: Shapes differ.
        ParameterException: Unsupported order.
    """
    order = _norm_order(order)
    if x.shape != y.shape:
        raise DimensionException(
            "Cannot compare a %dx%d image with a %dx%d image" % (
                x.shape + y.shape))
    return float(np.linalg.norm(x.flat - y.flat, ord=order))


def make_prototype_dataset(count, seed, size=16, class_count=10, noise=0.15,
                           prototype_seed=0):
    """Generate a small digit-like dataset.

    Every class owns a smooth prototype made of three Gaussian strokes; an
    example is its class prototype plus independent Gaussian pixel noise,
    clamped to ``[0, 1]``. Datasets drawn with the same ``prototype_seed``
    share prototypes, so a training and a test split come from two
    ``seed`` values.

    Args:
        count (int): Number of examples; classes are balanced.
        seed (int): Seed of the example noise and order.
        size (int, optional): Image side. Defaults to 16.
        class_count (int, optional): Number of classes. Defaults to 10.
        noise (float, optional): Pixel noise standard deviation.
        prototype_seed (int, optional): Seed of the class prototypes.

    Returns:
        Dataset: ``count`` examples of ``size x size`` images.
    """
    if count < 1 or size < 2:
        raise ParameterException(
            "Need a positive count and size >= 2, got %d and %d" % (
                count, size))
    proto_rng = stream(prototype_seed, 0)
    grid = np.arange(size, dtype=np.float64)
    rows, cols = np.meshgrid(grid, grid, indexing='ij')
    prototypes = np.zeros((class_count, size, size))
    for label in range(class_count):
        for _ in range(3):
            center = proto_rng.uniform(0.2 * size, 0.8 * size, size=2)
            spread = proto_rng.uniform(0.08 * size, 0.2 * size, size=2)
            prototypes[label] += np.exp(
                -0.5 * ((rows - center[0]) / spread[0]) ** 2
                - 0.5 * ((cols - center[1]) / spread[1]) ** 2)
        prototypes[label] /= prototypes[label].max()
    rng = stream(seed, 1)
    labels = rng.permutation(np.arange(count) % class_count)
    images = prototypes[labels] + noise * rng.standard_normal(
        (count, size, size))
    return Dataset(np.clip(images, 0.0, 1.0), labels, class_count)
