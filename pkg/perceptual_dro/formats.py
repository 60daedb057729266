# -*- coding: utf-8 -*-
"""
File formats: IDX containers for datasets, binary PGM for single images,
CSV for every table and a JSON sidecar recording the configuration that
produced an output.

IDX headers are big-endian: a 32-bit magic whose low bytes give the payload
type and the number of dimensions, followed by one 32-bit size per
dimension.
"""
import csv
import io
import json
import logging
import struct

import numpy as np

from .constants import (FLOAT_FORMAT, IDX_DOUBLE_IMAGES_MAGIC,
                        IDX_UBYTE_IMAGES_MAGIC, IDX_UBYTE_LABELS_MAGIC,
                        PIXEL_LEVELS)
from .exceptions import ConsistencyException, FormatException
from .image import Dataset, Image

logger = logging.getLogger(__name__)


def _read_header(handle, path, count):
    raw = handle.read(4 * count)
    if len(raw) != 4 * count:
        raise FormatException("'%s' ends inside its IDX header" % path)
    return struct.unpack('>%dI' % count, raw)


def read_idx_images(path):
    """Read an IDX image file.

    Unsigned-byte payloads are scaled by ``1/255``; float64 payloads are
    returned as stored.

    Returns:
        numpy.ndarray: ``(count, rows, cols)`` float64 array.

    Raises:
        FormatException: Unknown magic or truncated payload.
    """
    with io.open(path, 'rb') as handle:
        magic, = _read_header(handle, path, 1)
        if magic not in (IDX_UBYTE_IMAGES_MAGIC, IDX_DOUBLE_IMAGES_MAGIC):
            raise FormatException(
                "'%s' has magic %d, not an IDX image file (%d or %d)" % (
                    path, magic, IDX_UBYTE_IMAGES_MAGIC,
                    IDX_DOUBLE_IMAGES_MAGIC))
        count, rows, cols = _read_header(handle, path, 3)
        payload = handle.read()
    if magic == IDX_UBYTE_IMAGES_MAGIC:
        dtype, scale = np.dtype('u1'), 1.0 / PIXEL_LEVELS
    else:
        dtype, scale = np.dtype('>f8'), None
    expected = count * rows * cols * dtype.itemsize
    if len(payload) != expected:
        raise FormatException(
            "'%s' holds %d payload bytes, header promises %d" % (
                path, len(payload), expected))
    pixels = np.frombuffer(payload, dtype=dtype).astype(np.float64)
    if scale is not None:
        pixels = pixels * scale
    return pixels.reshape(count, rows, cols)


def read_idx_labels(path):
    """Read an IDX label file.

    Returns:
        numpy.ndarray: ``(count,)`` int64 array.

    Raises:
        FormatException: Unknown magic or truncated payload.
    """
    with io.open(path, 'rb') as handle:
        magic, = _read_header(handle, path, 1)
        if magic != IDX_UBYTE_LABELS_MAGIC:
            raise FormatException(
                "'%s' has magic %d, not an IDX label file (%d)" % (
                    path, magic, IDX_UBYTE_LABELS_MAGIC))
        count, = _read_header(handle, path, 1)
        payload = handle.read()
    if len(payload) != count:
        raise FormatException(
            "'%s' holds %d labels, header promises %d" % (
                path, len(payload), count))
    return np.frombuffer(payload, dtype='u1').astype(np.int64)


def load_idx(images_path, labels_path, class_count=10):
    """Load a labeled dataset from an IDX image/label file pair.

    Args:
        images_path (string): IDX image file (magic 2051, or the float64
            variant written by ``write_idx(..., exact=True)``).
        labels_path (string): IDX label file (magic 2049).
        class_count (int, optional): Number of classes. Defaults to 10.

    Returns:
        Dataset: Examples in file order.

    Raises:
        FormatException: Bad magic number or truncated file.
        ConsistencyException: The files hold different counts.

    Example:

        >>> train = load_idx('train-images-idx3-ubyte',
        ...                  'train-labels-idx1-ubyte')

    """
    images = read_idx_images(images_path)
    labels = read_idx_labels(labels_path)
    if images.shape[0] != labels.shape[0]:
        raise ConsistencyException(
            "'%s' holds %d images but '%s' holds %d labels" % (
                images_path, images.shape[0], labels_path, labels.shape[0]))
    logger.debug("Loaded %d examples of %dx%d from %s",
                 images.shape[0], images.shape[1], images.shape[2],
                 images_path)
    return Dataset(images, labels, class_count)


def quantize_pixels(pixels):
    """Map ``[0, 1]`` intensities onto the 8-bit grid."""
    return np.rint(np.clip(pixels, 0.0, 1.0) * PIXEL_LEVELS).astype(np.uint8)


def write_idx(dataset, images_path, labels_path, exact=False):
    """Write a dataset as an IDX image/label file pair.

    Args:
        dataset (Dataset): Dataset to write.
        images_path (string): Destination of the images.
        labels_path (string): Destination of the labels.
        exact (bool, optional): Write float64 pixels instead of quantizing
            to 8 bits. Defaults to ``False``.
    """
    count, rows, cols = dataset.images.shape
    if exact:
        header = struct.pack('>4I', IDX_DOUBLE_IMAGES_MAGIC, count, rows, cols)
        payload = dataset.images.astype('>f8').tobytes()
    else:
        header = struct.pack('>4I', IDX_UBYTE_IMAGES_MAGIC, count, rows, cols)
        payload = quantize_pixels(dataset.images).tobytes()
    with io.open(images_path, 'wb') as handle:
        handle.write(header)
        handle.write(payload)
    with io.open(labels_path, 'wb') as handle:
        handle.write(struct.pack('>2I', IDX_UBYTE_LABELS_MAGIC, count))
        handle.write(dataset.labels.astype(np.uint8).tobytes())


def write_pgm(image, path):
    """Export an image as an 8-bit binary PGM (P5) file."""
    header = 'P5\n%d %d\n%d\n' % (image.width, image.height, PIXEL_LEVELS)
    with io.open(path, 'wb') as handle:
        handle.write(header.encode('ascii'))
        handle.write(quantize_pixels(image.pixels).tobytes())


def read_pgm(path):
    """Read an 8-bit binary PGM (P5) file.

    Raises:
        FormatException: Not an 8-bit P5 file.
    """
    with io.open(path, 'rb') as handle:
        data = handle.read()
    tokens = []
    position = 0
    while len(tokens) < 4:
        while position < len(data) and data[position:position + 1].isspace():
            position += 1
        if data[position:position + 1] == b'#':
            while position < len(data) and data[position:position + 1] != b'\n':
                position += 1
            continue
        start = position
        while position < len(data) and not data[position:position + 1].isspace():
            position += 1
        if start == position:
            raise FormatException("'%s' ends inside its PGM header" % path)
        tokens.append(data[start:position])
    if tokens[0] != b'P5' or int(tokens[3]) != PIXEL_LEVELS:
        raise FormatException("'%s' is not an 8-bit P5 PGM file" % path)
    width, height = int(tokens[1]), int(tokens[2])
    payload = data[position + 1:position + 1 + width * height]
    if len(payload) != width * height:
        raise FormatException("'%s' has a truncated PGM payload" % path)
    pixels = np.frombuffer(payload, dtype='u1').astype(np.float64)
    return Image(pixels.reshape(height, width) / PIXEL_LEVELS)


def format_value(value):
    """Render one CSV cell; floats use ``FLOAT_FORMAT``."""
    if isinstance(value, (bool, np.bool_)):
        return 'true' if value else 'false'
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    if isinstance(value, (float, np.floating)):
        return FLOAT_FORMAT.format(float(value))
    return str(value)


def write_csv(path, header, rows):
    """Write a table with a fixed header and fixed float precision.

    Args:
        path (string): Destination file.
        header (sequence of string): Column names.
        rows (iterable of sequence): Row values, in header order.
    """
    with io.open(path, 'w', newline='', encoding='utf-8') as handle:
        writer = csv.writer(handle, lineterminator='\n')
        writer.writerow(header)
        for row in rows:
            writer.writerow([format_value(value) for value in row])


def read_csv(path, required=()):
    """Read a table written by ``write_csv``.

    Args:
        path (string): Source file.
        required (sequence of string, optional): Columns that must exist.

    Returns:
        list of dict: One mapping per row, values as strings.

    Raises:
        FormatException: A required column is missing.
    """
    with io.open(path, 'r', newline='', encoding='utf-8') as handle:
        reader = csv.DictReader(handle)
        missing = [name for name in required
                   if name not in (reader.fieldnames or ())]
        if missing:
            raise FormatException(
                "'%s' lacks column(s) %s" % (path, ', '.join(missing)))
        return list(reader)


def config_record_path(path):
    return str(path) + '.config.json'


def write_config_record(path, config):
    """Write the resolved configuration behind an output file.

    The record is stored next to ``path`` as ``<path>.config.json`` with
    sorted keys so reruns produce identical bytes.
    """
    from . import __version__
    record = dict(config)
    record['version'] = __version__
    with io.open(config_record_path(path), 'w', encoding='utf-8') as handle:
        json.dump(record, handle, sort_keys=True, indent=2, default=str)
        handle.write('\n')
