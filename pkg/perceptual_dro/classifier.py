# -*- coding: utf-8 -*-
"""
Small differentiable classifiers ``theta``.

Two architectures are available:

  - ``mlp``: flattened input, one tanh hidden layer of ``MLP_HIDDEN`` units,
    dense output.
  - ``convnet``: one valid 5x5 convolution with ``CONV_CHANNELS`` channels,
    tanh, 2x2 max-pool (the first maximal entry of a window receives the
    subgradient), dense output.

Parameters live in a single flat vector; ``parameter_layout`` describes how
the vector splits into named weight arrays. Gradients are accumulated in
reverse mode by hand, for the input pixels (attacks) and for the parameters
(training).

Attributes:
    ARCHITECTURES (tuple): Supported architecture tags.
"""
import io
import logging
import math
import struct
from dataclasses import asdict, dataclass

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from .constants import (CHECKPOINT_MAGIC, CHECKPOINT_VERSION, CONV_CHANNELS,
                        CONV_KERNEL, MLP_HIDDEN, POOL)
from .exceptions import (DimensionException, FormatException,
                         NumericException, ParameterException)
from .streams import stream

logger = logging.getLogger(__name__)

ARCHITECTURES = ('mlp', 'convnet')

# Examples per forward pass when evaluating whole datasets.
EVAL_CHUNK = 256


def parameter_layout(architecture, input_shape, class_count):
    """Describe the flat parameter vector of an architecture.

    Args:
        architecture (string): ``'mlp'`` or ``'convnet'``.
        input_shape (tuple): ``(height, width)`` of the input images.
        class_count (int): Number of classes ``C``.

    Returns:
        list of tuple: ``(name, shape, fan_in)`` per weight array, in
        storage order.

    Raises:
        ParameterException: Unknown architecture or input too small.
    """
    height, width = input_shape
    if architecture == 'mlp':
        pixels = height * width
        return [
            ('hidden_weight', (MLP_HIDDEN, pixels), pixels),
            ('hidden_bias', (MLP_HIDDEN,), pixels),
            ('output_weight', (class_count, MLP_HIDDEN), MLP_HIDDEN),
            ('output_bias', (class_count,), MLP_HIDDEN),
        ]
    if architecture == 'convnet':
        conv_rows = height - CONV_KERNEL + 1
        conv_cols = width - CONV_KERNEL + 1
        if conv_rows < POOL or conv_cols < POOL:
            raise ParameterException(
                "A %dx%d input is too small for the convnet" % input_shape)
        features = CONV_CHANNELS * (conv_rows // POOL) * (conv_cols // POOL)
        kernel_fan_in = CONV_KERNEL * CONV_KERNEL
        return [
            ('conv_weight', (CONV_CHANNELS, CONV_KERNEL, CONV_KERNEL),
             kernel_fan_in),
            ('conv_bias', (CONV_CHANNELS,), kernel_fan_in),
            ('output_weight', (class_count, features), features),
            ('output_bias', (class_count,), features),
        ]
    raise ParameterException(
        "'%s' is not an architecture; expected one of %s" % (
            architecture, ', '.join(ARCHITECTURES)))


class Model(object):

    """
    Immutable classifier: an architecture plus its flat parameter vector.

    Attributes:
        architecture (string): Architecture tag.
        input_shape (tuple): ``(height, width)`` accepted by the model.
        class_count (int): Number of classes ``C``.
        params (numpy.ndarray): Read-only flat parameter vector.
        layout (list): Output of ``parameter_layout``.
    """

    def __init__(self, architecture, input_shape, class_count, params):
        """Initialize instance of ``Model``.

        Raises:
            ParameterException: Unknown architecture.
            DimensionException: Parameter count disagrees with the layout.
            NumericException: A parameter is not finite.
        """
        self.architecture = architecture
        self.input_shape = (int(input_shape[0]), int(input_shape[1]))
        self.class_count = int(class_count)
        self.layout = parameter_layout(architecture, self.input_shape,
                                       self.class_count)
        params = np.array(params, dtype=np.float64).reshape(-1)
        expected = sum(int(np.prod(shape)) for _, shape, _ in self.layout)
        if params.size != expected:
            raise DimensionException(
                "%s on %dx%d inputs needs %d parameters, got %d" % (
                    architecture, self.input_shape[0], self.input_shape[1],
                    expected, params.size))
        if not np.all(np.isfinite(params)):
            raise NumericException("Model parameters must be finite")
        params.setflags(write=False)
        self.params = params

    @classmethod
    def zeros(cls, architecture, input_shape, class_count=10):
        """Model with every weight and bias at zero."""
        layout = parameter_layout(architecture, input_shape, class_count)
        count = sum(int(np.prod(shape)) for _, shape, _ in layout)
        return cls(architecture, input_shape, class_count, np.zeros(count))

    @classmethod
    def initialize(cls, architecture, input_shape, class_count, rng):
        """Model with weights drawn uniformly from ``+-1/sqrt(fan_in)``.

        Args:
            rng (numpy.random.Generator): Source of the draws.
        """
        layout = parameter_layout(architecture, input_shape, class_count)
        chunks = []
        for _, shape, fan_in in layout:
            bound = 1.0 / math.sqrt(fan_in)
            chunks.append(rng.uniform(-bound, bound, size=int(np.prod(shape))))
        return cls(architecture, input_shape, class_count,
                   np.concatenate(chunks))

    def unpack(self, vector=None):
        """Split a flat vector into named arrays following ``layout``.

        Returns:
            dict: Name to (read-only when ``vector`` is ``None``) view.
        """
        vector = self.params if vector is None else vector
        arrays = {}
        offset = 0
        for name, shape, _ in self.layout:
            size = int(np.prod(shape))
            arrays[name] = vector[offset:offset + size].reshape(shape)
            offset += size
        return arrays

    def with_params(self, params):
        """Same architecture, new parameters."""
        return Model(self.architecture, self.input_shape, self.class_count,
                     params)

    def __eq__(self, other):
        if not isinstance(other, Model):
            return NotImplemented
        return (self.architecture, self.input_shape, self.class_count) == \
            (other.architecture, other.input_shape, other.class_count) and \
            bool(np.array_equal(self.params, other.params))

    def __ne__(self, other):
        result = self.__eq__(other)
        if result is NotImplemented:
            return result
        return not result

    __hash__ = None

    def __repr__(self):
        return "Model(%r, %dx%d, C=%d)" % (
            (self.architecture,) + self.input_shape + (self.class_count,))


@dataclass(frozen=True)
class TrainConfig(object):

    """
    Minibatch SGD settings.

    Attributes:
        learning_rate (float): Step size ``alpha``.
        epochs (int): Passes over the data (0 returns the initialization).
        batch_size (int): Examples per update.
        seed (int): Seed of the initialization and the shuffles.
    """

    learning_rate: float = 0.1
    epochs: int = 3
    batch_size: int = 32
    seed: int = 0

    def __post_init__(self):
        if not self.learning_rate > 0:
            raise ParameterException(
                "Learning rate must be positive, got %r" % (
                    self.learning_rate,))
        if self.epochs < 0:
            raise ParameterException(
                "Epoch count must be non-negative, got %r" % (self.epochs,))
        if self.batch_size < 1:
            raise ParameterException(
                "Batch size must be positive, got %r" % (self.batch_size,))
        if self.seed < 0:
            raise ParameterException(
                "Seed must be non-negative, got %r" % (self.seed,))

    def as_dict(self):
        return asdict(self)


def _as_batch(model, images):
    images = np.asarray(images, dtype=np.float64)
    if images.ndim == 2:
        images = images[np.newaxis]
    if images.shape[1:] != model.input_shape:
        raise DimensionException(
            "%r expects %dx%d images, got %dx%d" % (
                (model,) + model.input_shape + tuple(images.shape[1:])))
    return images


def _forward(model, images):
    weights = model.unpack()
    batch = images.shape[0]
    if model.architecture == 'mlp':
        inputs = images.reshape(batch, -1)
        hidden = np.tanh(inputs.dot(weights['hidden_weight'].T)
                         + weights['hidden_bias'])
        logits = hidden.dot(weights['output_weight'].T) + weights['output_bias']
        return logits, (inputs, hidden)
    windows = sliding_window_view(images, (CONV_KERNEL, CONV_KERNEL),
                                  axis=(1, 2))
    conv = np.tanh(np.einsum('bijkl,ckl->bcij', windows,
                             weights['conv_weight'])
                   + weights['conv_bias'][np.newaxis, :, np.newaxis,
                                          np.newaxis])
    pool_rows = conv.shape[2] // POOL
    pool_cols = conv.shape[3] // POOL
    blocks = conv[:, :, :pool_rows * POOL, :pool_cols * POOL].reshape(
        batch, CONV_CHANNELS, pool_rows, POOL, pool_cols, POOL).transpose(
            0, 1, 2, 4, 3, 5).reshape(
                batch, CONV_CHANNELS, pool_rows, pool_cols, POOL * POOL)
    # argmax keeps the first maximal entry of every pooling window.
    winners = blocks.argmax(axis=-1)
    pooled = np.take_along_axis(blocks, winners[..., np.newaxis],
                                axis=-1)[..., 0]
    features = pooled.reshape(batch, -1)
    logits = features.dot(weights['output_weight'].T) + weights['output_bias']
    return logits, (windows, conv, winners, features)


def _backward(model, images, cache, dlogits, want_input):
    weights = model.unpack()
    grads = {}
    batch = images.shape[0]
    if model.architecture == 'mlp':
        inputs, hidden = cache
        grads['output_weight'] = dlogits.T.dot(hidden)
        grads['output_bias'] = dlogits.sum(axis=0)
        dhidden = dlogits.dot(weights['output_weight']) * (1.0 - hidden ** 2)
        grads['hidden_weight'] = dhidden.T.dot(inputs)
        grads['hidden_bias'] = dhidden.sum(axis=0)
        dimages = None
        if want_input:
            dimages = dhidden.dot(weights['hidden_weight']).reshape(
                images.shape)
    else:
        windows, conv, winners, features = cache
        grads['output_weight'] = dlogits.T.dot(features)
        grads['output_bias'] = dlogits.sum(axis=0)
        dpooled = dlogits.dot(weights['output_weight']).reshape(winners.shape)
        dblocks = np.zeros(winners.shape + (POOL * POOL,))
        np.put_along_axis(dblocks, winners[..., np.newaxis],
                          dpooled[..., np.newaxis], axis=-1)
        pool_rows, pool_cols = winners.shape[2:]
        dconv = np.zeros_like(conv)
        dconv[:, :, :pool_rows * POOL, :pool_cols * POOL] = dblocks.reshape(
            batch, CONV_CHANNELS, pool_rows, pool_cols, POOL, POOL).transpose(
                0, 1, 2, 4, 3, 5).reshape(
                    batch, CONV_CHANNELS, pool_rows * POOL, pool_cols * POOL)
        dconv *= 1.0 - conv ** 2
        grads['conv_weight'] = np.einsum('bcij,bijkl->ckl', dconv, windows)
        grads['conv_bias'] = dconv.sum(axis=(0, 2, 3))
        dimages = None
        if want_input:
            dimages = np.zeros(images.shape)
            rows, cols = conv.shape[2:]
            kernel = weights['conv_weight']
            for row in range(CONV_KERNEL):
                for col in range(CONV_KERNEL):
                    dimages[:, row:row + rows, col:col + cols] += np.einsum(
                        'bcij,c->bij', dconv, kernel[:, row, col])
    flat = np.concatenate([grads[name].reshape(-1)
                           for name, _, _ in model.layout])
    return flat, dimages


def _log_softmax(logits):
    shifted = logits - logits.max(axis=-1, keepdims=True)
    return shifted - np.log(np.exp(shifted).sum(axis=-1, keepdims=True))


def _check_labels(model, labels):
    labels = np.asarray(labels, dtype=np.int64).reshape(-1)
    if labels.size and (labels.min() < 0 or labels.max() >= model.class_count):
        raise ParameterException(
            "Labels must lie in [0, %d), got %s" % (
                model.class_count, labels[(labels < 0) |
                                          (labels >= model.class_count)][:5]))
    return labels


def loss_and_gradients(model, images, labels, want_input=False):
    """Summed cross-entropy of a batch and its gradients.

    Args:
        model (Model): Classifier.
        images (array_like): ``(batch, height, width)`` or one 2-D image.
        labels (array_like): One label per image.
        want_input (bool, optional): Also return pixel gradients.

    Returns:
        tuple: ``(loss_sum, param_gradient_sum, pixel_gradients)`` where
        ``pixel_gradients`` is ``None`` unless requested.
    """
    images = _as_batch(model, images)
    labels = _check_labels(model, labels)
    logits, cache = _forward(model, images)
    log_probs = _log_softmax(logits)
    rows = np.arange(labels.size)
    loss = -float(log_probs[rows, labels].sum())
    dlogits = np.exp(log_probs)
    dlogits[rows, labels] -= 1.0
    param_grad, pixel_grad = _backward(model, images, cache, dlogits,
                                       want_input)
    return loss, param_grad, pixel_grad


def logits_batch(model, images):
    """Logits of every image of a batch, evaluated in chunks."""
    images = _as_batch(model, images)
    return np.concatenate([
        _forward(model, images[start:start + EVAL_CHUNK])[0]
        for start in range(0, images.shape[0], EVAL_CHUNK)])


def predict(model, images):
    """Predicted labels; ties go to the smallest class index."""
    return logits_batch(model, images).argmax(axis=-1)


def forward_logits(model, image):
    """Pre-softmax scores of one image.

    Args:
        model (Model): Classifier.
        image (Image): Input of the model's shape.

    Returns:
        numpy.ndarray: ``C`` logits.

    Raises:
        DimensionException: Image shape does not match the model.
    """
    return _forward(model, _as_batch(model, image.pixels))[0][0]


def cross_entropy_loss(model, image, label):
    """``-log softmax(logits)[label]`` with log-sum-exp stabilization.

    Raises:
        ParameterException: Label outside ``[0, C)``.
    """
    labels = _check_labels(model, [label])
    logits = forward_logits(model, image)
    return -float(_log_softmax(logits)[labels[0]])


def input_gradient(model, image, label):
    """Gradient of the cross-entropy loss in the pixels (row-major)."""
    return loss_and_gradients(model, image.pixels, [label],
                              want_input=True)[2].reshape(-1)


def param_gradient(model, image, label):
    """Gradient of the cross-entropy loss in the flat parameter vector."""
    return loss_and_gradients(model, image.pixels, [label])[1]


def mean_loss(model, dataset):
    """Average cross-entropy over a dataset."""
    if not len(dataset):
        raise ParameterException("Mean loss of an empty dataset")
    log_probs = _log_softmax(logits_batch(model, dataset.images))
    return -float(log_probs[np.arange(len(dataset)), dataset.labels].mean())


def accuracy(model, dataset):
    """Fraction of examples whose arg-max logit equals the label.

    Raises:
        ParameterException: Empty dataset.
    """
    if not len(dataset):
        raise ParameterException("Accuracy of an empty dataset")
    return float(np.mean(predict(model, dataset.images) == dataset.labels))


def sgd_step(model, images, labels, scale):
    """One update ``theta <- theta - scale * sum of gradients``.

    Returns:
        tuple: ``(new_model, loss_sum)``.

    Raises:
        NumericException: Loss is not finite.
    """
    loss, grad, _ = loss_and_gradients(model, images, labels)
    if not math.isfinite(loss):
        raise NumericException("Loss became %r" % (loss,))
    params = model.params - scale * grad
    if not np.all(np.isfinite(params)):
        raise NumericException("Parameters became non-finite")
    return model.with_params(params), loss


def sgd_train(model, dataset, cfg, reinitialize=True, history=None):
    """Minibatch SGD on the mean cross-entropy.

    Args:
        model (Model): Template (``reinitialize``) or starting point.
        dataset (Dataset): Training data.
        cfg (TrainConfig): Step size, epochs, batch size and seed.
        reinitialize (bool, optional): Draw fresh weights from
            ``stream(cfg.seed, 0)`` instead of starting from ``model``.
            Defaults to ``True``.
        history (list, optional): Receives the dataset mean loss after each
            epoch.

    Returns:
        Model: The trained model; a pure function of the arguments.

    Raises:
        ParameterException: Empty dataset.
        NumericException: Training diverged; the message names the epoch
            and batch.
    """
    if not len(dataset):
        raise ParameterException("Cannot train on an empty dataset")
    if reinitialize:
        model = Model.initialize(model.architecture, model.input_shape,
                                 model.class_count, stream(cfg.seed, 0))
    shuffle_rng = stream(cfg.seed, 1)
    for epoch in range(1, cfg.epochs + 1):
        order = shuffle_rng.permutation(len(dataset))
        total = 0.0
        for batch, start in enumerate(range(0, len(order), cfg.batch_size)):
            chosen = order[start:start + cfg.batch_size]
            try:
                model, loss = sgd_step(
                    model, dataset.images[chosen], dataset.labels[chosen],
                    cfg.learning_rate / chosen.size)
            except NumericException as error:
                raise NumericException(
                    "SGD diverged at epoch %d, batch %d: %s" % (
                        epoch, batch, error))
            total += loss
        logger.info("epoch %d/%d mean training loss %.6f",
                    epoch, cfg.epochs, total / len(order))
        if history is not None:
            history.append(mean_loss(model, dataset))
    return model


def save_checkpoint(model, path):
    """Write a model as a versioned little-endian binary checkpoint.

    Layout: magic, version (u32), architecture tag length (u16) and bytes,
    class count, height, width (3 x u32), parameter count (u64), float64
    parameters.
    """
    tag = model.architecture.encode('ascii')
    with io.open(path, 'wb') as handle:
        handle.write(CHECKPOINT_MAGIC)
        handle.write(struct.pack('<IH', CHECKPOINT_VERSION, len(tag)))
        handle.write(tag)
        handle.write(struct.pack('<3IQ', model.class_count,
                                 model.input_shape[0], model.input_shape[1],
                                 model.params.size))
        handle.write(model.params.astype('<f8').tobytes())


def load_checkpoint(path):
    """Read a checkpoint written by ``save_checkpoint``.

    Raises:
        FormatException: Wrong magic, unknown version or truncated file.
    """
    with io.open(path, 'rb') as handle:
        data = handle.read()
    prefix = len(CHECKPOINT_MAGIC)
    if data[:prefix] != CHECKPOINT_MAGIC:
        raise FormatException("'%s' is not a model checkpoint" % path)
    try:
        version, tag_length = struct.unpack_from('<IH', data, prefix)
        if version != CHECKPOINT_VERSION:
            raise FormatException(
                "'%s' has checkpoint version %d, expected %d" % (
                    path, version, CHECKPOINT_VERSION))
        offset = prefix + 6
        architecture = data[offset:offset + tag_length].decode('ascii')
        offset += tag_length
        class_count, height, width, count = struct.unpack_from(
            '<3IQ', data, offset)
        offset += struct.calcsize('<3IQ')
    except (struct.error, UnicodeDecodeError):
        raise FormatException("'%s' has a truncated header" % path)
    payload = data[offset:]
    if len(payload) != 8 * count:
        raise FormatException(
            "'%s' holds %d parameter bytes, header promises %d" % (
                path, len(payload), 8 * count))
    params = np.frombuffer(payload, dtype='<f8').astype(np.float64)
    return Model(architecture, (height, width), class_count, params)


def evaluate_point(model, pixels, label):
    """Logits, loss and pixel gradient of one image in a single pass.

    Args:
        model (Model): Classifier.
        pixels (numpy.ndarray): 2-D pixel grid.
        label (int): True class.

    Returns:
        tuple: ``(logits, loss, pixel_gradient)``; the gradient has the
        shape of ``pixels``.
    """
    images = _as_batch(model, pixels)
    labels = _check_labels(model, [label])
    logits, cache = _forward(model, images)
    log_probs = _log_softmax(logits)
    dlogits = np.exp(log_probs)
    dlogits[0, labels[0]] -= 1.0
    _, pixel_grad = _backward(model, images, cache, dlogits, True)
    return logits[0], -float(log_probs[0, labels[0]]), pixel_grad[0]
