# -*- coding: utf-8 -*-
"""
Tests against the IDX, PGM, CSV and config-record readers and writers.
"""
import io
import json
import os
import shutil
import tempfile
import unittest

import numpy as np

from perceptual_dro import __version__
from perceptual_dro.exceptions import ConsistencyException, FormatException
from perceptual_dro.formats import (config_record_path, format_value,
                                    load_idx, read_csv, read_pgm,
                                    write_config_record, write_csv,
                                    write_idx, write_pgm)
from perceptual_dro.image import Dataset, Image

from tests.fixtures import idx_images_bytes, idx_labels_bytes


class TestFormats(unittest.TestCase):

    def setUp(self):
        self.directory = tempfile.mkdtemp()

    def tearDown(self):
        shutil.rmtree(self.directory)

    def path(self, name):
        return os.path.join(self.directory, name)

    def write_bytes(self, name, data):
        with io.open(self.path(name), 'wb') as handle:
            handle.write(data)
        return self.path(name)

    def test_load_idx(self):
        pixels = np.array([[[0, 255], [51, 102]], [[255, 0], [0, 255]]])
        images = self.write_bytes('images', idx_images_bytes(pixels))
        labels = self.write_bytes('labels', idx_labels_bytes([3, 9]))
        dataset = load_idx(images, labels)
        self.assertEqual(2, len(dataset))
        self.assertEqual([3, 9], dataset.labels.tolist())
        np.testing.assert_allclose([[0.0, 1.0], [0.2, 0.4]],
                                   dataset.images[0])

    def test_load_idx_errors(self):
        pixels = np.zeros((2, 2, 2))
        images = self.write_bytes('images', idx_images_bytes(pixels))
        labels = self.write_bytes('labels', idx_labels_bytes([1, 2, 3]))
        self.assertRaisesRegex(ConsistencyException,
                "holds 2 images but .* holds 3 labels",
                load_idx, images, labels)
        # images and labels swapped
        self.assertRaisesRegex(FormatException,
                "has magic 2049, not an IDX image file",
                load_idx, labels, images)
        truncated = self.write_bytes(
            'truncated', idx_images_bytes(pixels)[:-1])
        self.assertRaisesRegex(FormatException,
                "holds 7 payload bytes, header promises 8",
                load_idx, truncated, labels)
        short = self.write_bytes('short', b'\x00\x00\x08')
        self.assertRaisesRegex(FormatException,
                "ends inside its IDX header",
                load_idx, short, labels)

    def test_write_idx_quantizes(self):
        dataset = Dataset([[[0.0, 0.5], [1.0, 0.1234]]], [4])
        images, labels = self.path('i'), self.path('l')
        write_idx(dataset, images, labels)
        restored = load_idx(images, labels)
        self.assertEqual([4], restored.labels.tolist())
        np.testing.assert_allclose(
            [[0.0, 128 / 255.0], [1.0, 31 / 255.0]], restored.images[0])

    def test_write_idx_exact(self):
        rng = np.random.default_rng(0)
        dataset = Dataset(rng.random((3, 4, 5)), [0, 1, 2])
        images, labels = self.path('i'), self.path('l')
        write_idx(dataset, images, labels, exact=True)
        restored = load_idx(images, labels)
        np.testing.assert_array_equal(dataset.images, restored.images)
        with io.open(images, 'rb') as handle:
            self.assertEqual(b'\x00\x00\x0e\x03', handle.read(4))

    def test_pgm(self):
        image = Image([[0.0, 1.0, 0.5], [0.2, 0.4, 0.6]])
        path = self.path('image.pgm')
        write_pgm(image, path)
        with io.open(path, 'rb') as handle:
            self.assertTrue(handle.read().startswith(b'P5\n3 2\n255\n'))
        restored = read_pgm(path)
        self.assertEqual((2, 3), restored.shape)
        np.testing.assert_allclose(image.pixels, restored.pixels,
                                   atol=0.5 / 255)
        commented = self.write_bytes(
            'commented.pgm', b'P5\n# made by hand\n2 1\n255\n\x00\xff')
        np.testing.assert_array_equal([[0.0, 1.0]],
                                      read_pgm(commented).pixels)
        ascii_pgm = self.write_bytes('ascii.pgm', b'P2\n1 1\n255\n0\n')
        self.assertRaisesRegex(FormatException,
                "is not an 8-bit P5 PGM file",
                read_pgm, ascii_pgm)

    def test_format_value(self):
        cases = [
            (True, 'true'),
            (False, 'false'),
            (7, '7'),
            (np.int64(3), '3'),
            (0.1, '0.1'),
            (1.0 / 3.0, '0.333333333'),
            (np.float64(2.5e-12), '2.5e-12'),
            ('adversarial@1,2', 'adversarial@1,2'),
        ]
        for value, expected in cases:
            self.assertEqual(expected, format_value(value))

    def test_csv(self):
        path = self.path('table.csv')
        write_csv(path, ('a', 'b'), [(1, 0.5), (2, True)])
        with io.open(path, encoding='utf-8') as handle:
            self.assertEqual('a,b\n1,0.5\n2,true\n', handle.read())
        rows = read_csv(path, ('a',))
        self.assertEqual([{'a': '1', 'b': '0.5'}, {'a': '2', 'b': 'true'}],
                         rows)
        self.assertRaisesRegex(FormatException,
                "lacks column\\(s\\) c",
                read_csv, path, ('a', 'c'))

    def test_config_record(self):
        path = self.path('out.csv')
        write_config_record(path, {'seed': 7, 'method': 'pgd'})
        self.assertEqual(path + '.config.json', config_record_path(path))
        with io.open(config_record_path(path), encoding='utf-8') as handle:
            text = handle.read()
        record = json.loads(text)
        self.assertEqual({'seed': 7, 'method': 'pgd',
                          'version': __version__}, record)
        # sorted keys make reruns byte-identical
        self.assertLess(text.index('"method"'), text.index('"seed"'))
