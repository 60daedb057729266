# -*- coding: utf-8 -*-
"""
Full-scale checks on the MNIST IDX files.

Skipped unless ``PERCEPTUAL_DRO_MNIST`` names a directory holding
``train-images-idx3-ubyte``, ``train-labels-idx1-ubyte``,
``t10k-images-idx3-ubyte`` and ``t10k-labels-idx1-ubyte``. Expect tens of
minutes.
"""
import os
import unittest

import numpy as np

from perceptual_dro.attack import (AttackConfig, defense_success_rate,
                                   success_rate)
from perceptual_dro.classifier import Model, TrainConfig, accuracy, sgd_train
from perceptual_dro.defense import Defense
from perceptual_dro.dro import DroConfig, dro_train, generate_robust_dataset
from perceptual_dro.fairness import (gls_fit, group_accuracy,
                                     make_grouped_dataset)
from perceptual_dro.formats import load_idx

MNIST = os.environ.get('PERCEPTUAL_DRO_MNIST')


def mnist(split):
    return load_idx(os.path.join(MNIST, '%s-images-idx3-ubyte' % split),
                    os.path.join(MNIST, '%s-labels-idx1-ubyte' % split))


@unittest.skipUnless(MNIST, "PERCEPTUAL_DRO_MNIST is not set")
class TestMnist(unittest.TestCase):

    @classmethod
    def setUpClass(cls):
        cls.train = mnist('train')
        cls.test = mnist('t10k')
        subset = cls.train.subset(np.arange(10000))
        cfg = TrainConfig(learning_rate=0.1, epochs=3, seed=0)
        cls.mlp = sgd_train(Model.zeros('mlp', (28, 28)), subset, cfg)
        cls.convnet = sgd_train(Model.zeros('convnet', (28, 28)), subset, cfg)
        cls.fixture = cls.test.subset(np.arange(200))

    def test_file_dimensions(self):
        self.assertEqual(60000, len(self.train))
        self.assertEqual((28, 28), self.train.image_shape)
        self.assertEqual(10000, len(self.test))

    def test_mlp_accuracy(self):
        self.assertGreaterEqual(accuracy(self.mlp, self.test), 0.88)

    def test_perceptual_attack_success(self):
        cfg = AttackConfig(method='perceptual', epsilon=0.1, penalty=1.0,
                           confidence=0.0, max_iterations=100)
        report = success_rate(self.convnet, self.fixture, cfg)
        self.assertGreaterEqual(report.rate, 0.99)

    def test_pgd_success(self):
        cfg = AttackConfig(method='pgd_iterative', epsilon=0.1,
                           max_iterations=100)
        self.assertGreaterEqual(
            success_rate(self.convnet, self.fixture, cfg).rate, 0.99)

    def test_confidence_survives_defenses(self):
        defenses = [Defense('jpeg', quality) for quality in (90, 50, 10)] + \
            [Defense('bitdepth', bits) for bits in (6, 4, 2)]
        rates = {}
        for confidence in (0.0, 1.0, 5.0):
            cfg = AttackConfig(confidence=confidence)
            report = success_rate(self.convnet, self.fixture, cfg)
            rates[confidence] = [
                defense_success_rate(self.convnet, self.fixture, cfg,
                                     defense, report=report)
                for defense in defenses]
        for low, mid, high in zip(rates[0.0], rates[1.0], rates[5.0]):
            self.assertGreaterEqual(high, mid)
            self.assertGreaterEqual(mid, low)

    def test_dro_gain(self):
        data = self.train.subset(np.arange(2000))
        cfg = DroConfig(outer_steps=2, epochs=3,
                        attack=AttackConfig(max_iterations=20))
        robust, _ = generate_robust_dataset(self.convnet, data, cfg, seed=0)
        robust_model = dro_train(self.convnet, robust, cfg, seed=0)
        attack = AttackConfig(confidence=0.0)
        before = success_rate(self.convnet, self.fixture, attack).rate
        after = success_rate(robust_model, self.fixture, attack).rate
        self.assertGreaterEqual(before - after, 0.10)
        self.assertLessEqual(accuracy(self.convnet, self.test)
                             - accuracy(robust_model, self.test), 0.10)

    def test_planted_bias_is_detected(self):
        grouped, meta = make_grouped_dataset(self.test, 20, 1.0, 0.6,
                                             seed=0)
        result = gls_fit(group_accuracy(self.mlp, grouped, meta))
        self.assertGreater(result.beta, 0.0)
        self.assertLess(result.p_value, 0.05)
