# -*- coding: utf-8 -*-
"""
Worker pool for independent tasks (per-image attacks, per-run trainings,
per-model audits).

Results always come back in submission order, so a single writer can emit
them deterministically whatever the worker count.
"""
import os
from concurrent.futures import ThreadPoolExecutor

from .constants import WORKERS_ENV
from .exceptions import ParameterException


def default_workers():
    """Worker count from ``PERCEPTUAL_DRO_WORKERS`` or the CPU count.

    Raises:
        ParameterException: The environment variable is not a positive
            integer.
    """
    value = os.environ.get(WORKERS_ENV)
    if value:
        try:
            workers = int(value)
        except ValueError:
            workers = 0
        if workers < 1:
            raise ParameterException(
                "%s must be a positive integer, got %r" % (WORKERS_ENV, value))
        return workers
    return os.cpu_count() or 1


def ordered_map(function, items, workers=None):
    """Apply ``function`` to every item, preserving order.

    Args:
        function (callable): Task body; must not mutate shared state.
        items (iterable): Task inputs.
        workers (int, optional): Pool size; ``None`` uses
            ``default_workers()``. One worker runs inline.

    Returns:
        list: ``[function(item) for item in items]``.
    """
    items = list(items)
    workers = default_workers() if workers is None else int(workers)
    if workers < 1:
        raise ParameterException(
            "Worker count must be positive, got %d" % workers)
    if workers == 1 or len(items) < 2:
        return [function(item) for item in items]
    with ThreadPoolExecutor(max_workers=min(workers, len(items))) as pool:
        return list(pool.map(function, items))
