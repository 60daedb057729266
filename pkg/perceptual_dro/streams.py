# -*- coding: utf-8 -*-
"""
Seeded random streams.

Every random draw in the package comes from a ``numpy.random.Generator``
built on a ``SeedSequence`` keyed by a global seed and a tuple of task
indices (image index, run index, retry count). Two tasks never share a
stream, so results do not depend on how tasks are spread over workers.
"""
import numpy as np

from .exceptions import ParameterException


def stream(seed, *keys):
    """Build the generator of one task.

    Args:
        seed (int): Global 64-bit seed.
        *keys (int): Task indices distinguishing this stream from its
            siblings; e.g. ``stream(seed, run_index)``.

    Returns:
        numpy.random.Generator: A PCG64 generator private to the task.

    Raises:
        ParameterException: Seed or key is negative.
    """
    entropy = [int(seed)] + [int(key) for key in keys]
    if any(value < 0 for value in entropy):
        raise ParameterException(
            "Seeds and stream keys must be non-negative, got %s" % (entropy,))
    return np.random.default_rng(np.random.SeedSequence(entropy))


def derive_seed(seed, *keys):
    """Integer seed of a sub-task, e.g. one run of a model population.

    Returns:
        int: A 63-bit seed determined by ``seed`` and ``keys``.
    """
    state = stream(seed, *keys).integers(0, 2 ** 63 - 1)
    return int(state)
