# -*- coding: utf-8 -*-
"""
Tests against the gamma, incomplete beta, F and t tail functions.
"""
import math
import unittest

from scipy import special as scipy_special
from scipy import stats

from perceptual_dro.exceptions import ParameterException
from perceptual_dro.special import (f_survival, log_beta, log_gamma,
                                    regularized_incomplete_beta, t_survival)


class TestGamma(unittest.TestCase):

    def test_log_gamma(self):
        for x in (0.1, 0.5, 1.0, 1.5, 2.0, 7.3, 19.5, 120.0, 1000.5):
            self.assertAlmostEqual(math.lgamma(x), log_gamma(x), delta=1e-10)

    def test_log_gamma_integers(self):
        for n in range(1, 12):
            self.assertAlmostEqual(math.log(math.factorial(n - 1)),
                                   log_gamma(n), delta=1e-10)

    def test_log_beta(self):
        self.assertAlmostEqual(math.log(1.0 / 12.0), log_beta(2, 3),
                               delta=1e-10)
        self.assertAlmostEqual(math.log(math.pi), log_beta(0.5, 0.5),
                               delta=1e-10)

    def test_log_gamma_domain(self):
        for x in (0.0, -1.5):
            self.assertRaisesRegex(ParameterException,
                    "log_gamma needs x > 0", log_gamma, x)


class TestIncompleteBeta(unittest.TestCase):

    def test_against_scipy(self):
        for a, b in ((0.5, 0.5), (1.0, 1.0), (2.5, 0.5), (19.5, 0.5),
                     (0.5, 30.0), (50.0, 40.0)):
            for x in (0.001, 0.1, 0.37, 0.5, 0.8, 0.999):
                self.assertAlmostEqual(scipy_special.betainc(a, b, x),
                                       regularized_incomplete_beta(x, a, b),
                                       delta=1e-10)

    def test_closed_forms(self):
        self.assertAlmostEqual(0.3, regularized_incomplete_beta(0.3, 1, 1),
                               delta=1e-12)
        self.assertAlmostEqual(0.09, regularized_incomplete_beta(0.3, 2, 1),
                               delta=1e-12)
        self.assertEqual(0.0, regularized_incomplete_beta(0.0, 3, 4))
        self.assertEqual(1.0, regularized_incomplete_beta(1.0, 3, 4))

    def test_symmetry(self):
        for x in (0.2, 0.6):
            self.assertAlmostEqual(
                1.0 - regularized_incomplete_beta(1 - x, 4.5, 2.0),
                regularized_incomplete_beta(x, 2.0, 4.5), delta=1e-12)

    def test_errors(self):
        self.assertRaisesRegex(ParameterException,
                "Incomplete beta needs a, b > 0",
                regularized_incomplete_beta, 0.5, 0, 1)
        self.assertRaisesRegex(ParameterException,
                r"Incomplete beta needs x in \[0, 1\]",
                regularized_incomplete_beta, 1.5, 1, 1)


class TestTails(unittest.TestCase):

    def test_f_reference_value(self):
        self.assertAlmostEqual(0.02554, f_survival(5.392, 1, 39),
                               delta=0.0005)

    def test_f_against_scipy(self):
        for statistic, nu1, nu2 in ((0.0, 1, 5), (0.4, 1, 39), (3.2, 2, 7),
                                    (12.0, 1, 3), (150.0, 1, 48),
                                    (1.0, 10, 10)):
            self.assertAlmostEqual(stats.f.sf(statistic, nu1, nu2),
                                   f_survival(statistic, nu1, nu2),
                                   delta=1e-10)

    def test_f_is_squared_t(self):
        for t, df in ((0.3, 4), (1.7, 12), (2.9, 39), (6.0, 2.5)):
            self.assertAlmostEqual(2.0 * t_survival(t, df),
                                   f_survival(t * t, 1, df), delta=1e-9)

    def test_f_limits(self):
        self.assertEqual(1.0, f_survival(0.0, 1, 10))
        self.assertEqual(0.0, f_survival(float('inf'), 1, 10))

    def test_f_errors(self):
        self.assertRaisesRegex(ParameterException,
                "F degrees of freedom must be >= 1",
                f_survival, 1.0, 1, 0)
        self.assertRaisesRegex(ParameterException,
                "F statistic must be non-negative",
                f_survival, -1.0, 1, 4)

    def test_t_cauchy(self):
        self.assertAlmostEqual(0.25, t_survival(1.0, 1), delta=1e-10)
        self.assertAlmostEqual(0.75, t_survival(-1.0, 1), delta=1e-10)

    def test_t_against_scipy(self):
        for t, df in ((0.0, 3), (0.5, 3), (-2.2, 7.5), (4.0, 30),
                      (-0.1, 98.4), (25.0, 2)):
            self.assertAlmostEqual(stats.t.sf(t, df), t_survival(t, df),
                                   delta=1e-10)

    def test_t_symmetry(self):
        for t, df in ((0.7, 2), (3.3, 17.2)):
            self.assertAlmostEqual(1.0, t_survival(t, df)
                                   + t_survival(-t, df), delta=1e-12)

    def test_t_limits_and_errors(self):
        self.assertEqual(0.5, t_survival(0.0, 4))
        self.assertEqual(0.0, t_survival(float('inf'), 4))
        self.assertEqual(1.0, t_survival(float('-inf'), 4))
        self.assertRaisesRegex(ParameterException,
                "t degrees of freedom must be positive",
                t_survival, 1.0, 0)
