# -*- coding: utf-8 -*-
"""
Tests against the bit depth and JPEG-like defenses.
"""
import unittest

import numpy as np

from perceptual_dro.defense import (Defense, bit_depth_reduce, block_dct,
                                    block_idct, jpeg_like_compress,
                                    pad_to_blocks, quality_table)
from perceptual_dro.exceptions import ParameterException
from perceptual_dro.image import Image

from tests.fixtures import holdout_split


class TestBitDepth(unittest.TestCase):

    def test_bit_depth_reduce_two_levels(self):
        image = bit_depth_reduce(Image([[0.6, 0.4], [0.0, 1.0]]), 1)
        np.testing.assert_array_equal([[1.0, 0.0], [0.0, 1.0]], image.pixels)

    def test_bit_depth_reduce_fixed_points(self):
        pixels = np.arange(256.0).reshape(16, 16) / 255.0
        image = bit_depth_reduce(Image(pixels), 8)
        np.testing.assert_allclose(pixels, image.pixels, atol=1e-15)

    def test_bit_depth_reduce_grid(self):
        rng = np.random.default_rng(2)
        image = bit_depth_reduce(Image(rng.random((9, 7))), 4)
        levels = image.pixels * 15.0
        np.testing.assert_allclose(levels, np.rint(levels), atol=1e-12)
        self.assertTrue(image.is_valid())

    def test_bit_depth_reduce_errors(self):
        for bits in (0, 9):
            self.assertRaisesRegex(ParameterException,
                    r"Bit depth must lie in \[1, 8\], got %d" % bits,
                    bit_depth_reduce, Image([[0.5]]), bits)


class TestJpeg(unittest.TestCase):

    def setUp(self):
        self.image = Image(np.random.default_rng(4).random((16, 16)))

    def test_quality_table(self):
        self.assertTrue(np.all(quality_table(100) == 1.0))
        self.assertEqual(16.0, quality_table(50)[0, 0])
        self.assertEqual(80.0, quality_table(10)[0, 0])
        for quality in (0, 101):
            self.assertRaisesRegex(ParameterException,
                    r"JPEG quality must lie in \[1, 100\]",
                    quality_table, quality)

    def test_dct_round_trip(self):
        pixels = pad_to_blocks(self.image.pixels)
        restored = block_idct(block_dct(pixels))
        np.testing.assert_allclose(pixels, restored, atol=1e-9)

    def test_pad_to_blocks(self):
        padded = pad_to_blocks(np.arange(10.0).reshape(2, 5))
        self.assertEqual((8, 8), padded.shape)
        self.assertEqual(4.0, padded[0, 7])
        self.assertEqual(9.0, padded[7, 7])

    def test_quality_100_is_nearly_lossless(self):
        change = np.abs(jpeg_like_compress(self.image, 100).pixels
                        - self.image.pixels)
        self.assertLessEqual(change.max(), 0.02)

    def test_lower_quality_changes_more(self):
        image = holdout_split()[0].image
        changes = []
        for quality in (90, 10):
            compressed = jpeg_like_compress(image, quality)
            changes.append(np.abs(compressed.pixels - image.pixels).mean())
        self.assertGreater(changes[1], changes[0])

    def test_jpeg_like_compress_shape_and_range(self):
        odd = Image(np.random.default_rng(1).random((11, 13)))
        compressed = jpeg_like_compress(odd, 30)
        self.assertEqual((11, 13), compressed.shape)
        self.assertTrue(compressed.is_valid())
        self.assertEqual(compressed, jpeg_like_compress(odd, 30))


class TestDefense(unittest.TestCase):

    def test_defense_init(self):
        defense = Defense('jpeg', 30)
        self.assertEqual('jpeg(30)', str(defense))
        image = Image(np.full((8, 8), 0.5))
        self.assertEqual(jpeg_like_compress(image, 30), defense(image))
        self.assertEqual(bit_depth_reduce(image, 2),
                         Defense('bitdepth', 2).apply(image))
        self.assertRaisesRegex(ParameterException,
                "'blur' is not a defense; expected one of bitdepth, jpeg",
                Defense, 'blur', 3)
        self.assertRaisesRegex(ParameterException,
                r"Bit depth must lie in \[1, 8\], got 12",
                Defense, 'bitdepth', 12)
