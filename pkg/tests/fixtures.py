# -*- coding: utf-8 -*-
"""
Shared fixtures: prototype-digit datasets, trained models and byte-level
IDX files. Builders are cached so the expensive ones (training) run once per
test session.
"""
import functools
import struct

import numpy as np

from perceptual_dro.classifier import Model, TrainConfig, sgd_train
from perceptual_dro.image import make_prototype_dataset

SIZE = 12


@functools.lru_cache(maxsize=None)
def train_split(count=300, size=SIZE):
    return make_prototype_dataset(count, seed=1, size=size)


@functools.lru_cache(maxsize=None)
def holdout_split(count=100, size=SIZE):
    return make_prototype_dataset(count, seed=2, size=size)


@functools.lru_cache(maxsize=None)
def trained_model(architecture='mlp', epochs=6, size=SIZE):
    dataset = train_split(size=size)
    template = Model.zeros(architecture, dataset.image_shape)
    return sgd_train(template, dataset,
                     TrainConfig(learning_rate=0.1, epochs=epochs,
                                 batch_size=16, seed=3))


def random_model(architecture='mlp', shape=(SIZE, SIZE), seed=0):
    return Model.initialize(architecture, shape, 10,
                            np.random.default_rng(seed))


def correctly_classified(model, dataset, limit=None):
    """Indices of examples the model gets right."""
    from perceptual_dro.classifier import predict
    hits = np.flatnonzero(predict(model, dataset.images) == dataset.labels)
    return hits[:limit] if limit else hits


def idx_images_bytes(pixels):
    """Raw unsigned-byte IDX image file for a ``(count, rows, cols)`` array."""
    pixels = np.asarray(pixels, dtype=np.uint8)
    return struct.pack('>4I', 0x00000803, *pixels.shape) + pixels.tobytes()


def idx_labels_bytes(labels):
    labels = np.asarray(labels, dtype=np.uint8)
    return struct.pack('>2I', 0x00000801, labels.size) + labels.tobytes()


def central_difference(function, point, step=1e-6):
    """Numerical gradient of a scalar function of a flat vector."""
    point = np.array(point, dtype=np.float64)
    gradient = np.empty_like(point)
    for index in range(point.size):
        saved = point[index]
        point[index] = saved + step
        upper = function(point)
        point[index] = saved - step
        lower = function(point)
        point[index] = saved
        gradient[index] = (upper - lower) / (2.0 * step)
    return gradient
