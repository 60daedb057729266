# -*- coding: utf-8 -*-
"""
Tests against the group-fairness audit: group accuracies, the GLS slope
F-test, the Welch t-test and the synthetic grouped datasets.
"""
import os
import shutil
import tempfile
import unittest

import numpy as np
from scipy import stats

from perceptual_dro.classifier import Model, predict
from perceptual_dro.exceptions import (ConsistencyException,
                                       ParameterException, RankException,
                                       UndefinedStatisticException)
from perceptual_dro.fairness import (CovarianceSpec, GroupRecord,
                                     audit_population, beta_summary,
                                     gls_fit, group_accuracy,
                                     group_noise_levels, make_grouped_dataset,
                                     read_group_meta, read_group_records,
                                     read_grouped_dataset, two_sample_t_test,
                                     write_group_meta, write_group_records,
                                     write_grouped_dataset)

from tests.fixtures import SIZE, holdout_split, random_model, trained_model


def records_for(incomes, accuracies, counts):
    return [GroupRecord(index, g, n, int(round(p * n)))
            for index, (g, p, n) in enumerate(zip(incomes, accuracies,
                                                  counts))]


class TestGroupRecord(unittest.TestCase):

    def test_accuracy(self):
        record = GroupRecord(3, 8.5, 40, 30)
        self.assertEqual(0.75, record.p)
        self.assertEqual(GroupRecord(3, 8.5, 40, 30), record)
        self.assertNotEqual(GroupRecord(3, 8.5, 40, 31), record)

    def test_errors(self):
        for n, correct in ((0, 0), (5, 6), (5, -1)):
            self.assertRaisesRegex(ConsistencyException,
                    "Group 1 needs 0 <= correct <= n",
                    GroupRecord, 1, 7.0, n, correct)

    def test_covariance(self):
        np.testing.assert_allclose(
            [0.5, 0.25], CovarianceSpec.from_counts([4, 16]).diag)
        np.testing.assert_allclose(
            [4.0, 16.0],
            CovarianceSpec.from_counts([4, 16], 'inverse').weights)
        self.assertRaisesRegex(ParameterException,
                "'cubic' is not a weighting",
                CovarianceSpec.from_counts, [4], 'cubic')


class TestGlsFit(unittest.TestCase):

    def test_equal_counts_match_ordinary_least_squares(self):
        rng = np.random.default_rng(0)
        incomes = np.linspace(6.0, 11.5, 41)
        counts = [1000] * 41
        accuracies = 0.5 + 0.01 * incomes + 0.05 * rng.standard_normal(41)
        records = records_for(incomes, accuracies, counts)
        exact = np.array([record.p for record in records])
        reference = stats.linregress(incomes, exact)
        for weighting in ('sqrt', 'inverse'):
            result = gls_fit(records, weighting)
            self.assertAlmostEqual(reference.slope, result.beta, delta=1e-10)
            self.assertAlmostEqual(reference.intercept, result.intercept,
                                   delta=1e-10)
            self.assertAlmostEqual(
                (reference.slope / reference.stderr) ** 2, result.F0,
                delta=1e-8 * result.F0)
            self.assertAlmostEqual(reference.pvalue, result.p_value,
                                   delta=1e-8)
            self.assertEqual(1, result.nu1)
            self.assertEqual(39, result.nu2)
            self.assertFalse(result.perfect_fit)

    def test_weighted_fit_matches_scaled_least_squares(self):
        rng = np.random.default_rng(1)
        incomes = rng.uniform(6.0, 11.5, 12)
        counts = rng.integers(20, 400, 12)
        accuracies = rng.uniform(0.4, 0.9, 12)
        records = records_for(incomes, accuracies, counts)
        exact = np.array([record.p for record in records])
        for weighting, weights in (('sqrt', np.sqrt(counts)),
                                   ('inverse', counts.astype(float))):
            root = np.sqrt(weights)
            design = np.column_stack([np.ones(12), incomes]) * root[:, None]
            expected = np.linalg.lstsq(design, exact * root, rcond=None)[0]
            result = gls_fit(records, weighting)
            self.assertAlmostEqual(expected[0], result.intercept, delta=1e-10)
            self.assertAlmostEqual(expected[1], result.beta, delta=1e-10)

    def test_f_statistic_oracle(self):
        incomes = [6.0, 7.0, 8.0, 9.0, 10.0]
        records = records_for(incomes, [0.5, 0.7, 0.6, 0.8, 0.9],
                              [100, 100, 100, 100, 100])
        result = gls_fit(records)
        exact = np.array([record.p for record in records])
        slope, intercept = np.polyfit(incomes, exact, 1)
        rss_full = np.sum((exact - intercept - slope * np.array(incomes)) ** 2)
        rss_restricted = np.sum((exact - exact.mean()) ** 2)
        statistic = (rss_restricted - rss_full) / (rss_full / 3)
        self.assertAlmostEqual(statistic, result.F0, delta=1e-9)
        self.assertAlmostEqual(stats.f.sf(statistic, 1, 3), result.p_value,
                               delta=1e-9)

    def test_affine_income_change(self):
        rng = np.random.default_rng(2)
        incomes = rng.uniform(6.0, 11.5, 15)
        counts = rng.integers(50, 500, 15)
        accuracies = rng.uniform(0.5, 0.95, 15)
        base = gls_fit(records_for(incomes, accuracies, counts))
        moved = gls_fit(records_for(2.5 * incomes - 4.0, accuracies, counts))
        self.assertAlmostEqual(base.beta / 2.5, moved.beta, delta=1e-10)
        self.assertAlmostEqual(base.F0, moved.F0, delta=1e-8 * base.F0)
        self.assertAlmostEqual(base.p_value, moved.p_value, delta=1e-9)

    def test_two_groups_fit_perfectly(self):
        records = records_for([7.0, 9.0], [0.6, 0.8], [10, 10])
        result = gls_fit(records, min_groups=2)
        self.assertTrue(result.perfect_fit)
        self.assertEqual(0, result.nu2)
        self.assertEqual(float('inf'), result.F0)
        self.assertEqual(0.0, result.p_value)
        self.assertAlmostEqual(0.1, result.beta, delta=1e-12)

    def test_collinear_accuracies_fit_perfectly(self):
        records = records_for([0.0, 1.0, 2.0, 3.0, 4.0],
                              [0.1, 0.2, 0.3, 0.4, 0.5], [100] * 5)
        result = gls_fit(records)
        self.assertTrue(result.perfect_fit)
        self.assertEqual(0.0, result.p_value)

    def test_constant_accuracy(self):
        records = records_for([6.0, 7.0, 8.0, 9.0], [0.5] * 4,
                              [10, 20, 30, 40])
        result = gls_fit(records)
        self.assertEqual(0.0, result.beta)
        self.assertEqual(0.0, result.F0)
        self.assertEqual(1.0, result.p_value)
        self.assertTrue(result.perfect_fit)

    def test_errors(self):
        self.assertRaisesRegex(ParameterException,
                "GLS needs at least 3 groups, got 2",
                gls_fit, records_for([6.0, 7.0], [0.5, 0.6], [10, 10]))
        self.assertRaisesRegex(RankException,
                "All 4 groups share g=8",
                gls_fit, records_for([8.0] * 4, [0.5, 0.6, 0.7, 0.8],
                                     [10] * 4))

    def test_null_p_values_are_uniform(self):
        rng = np.random.default_rng(3)
        counts = rng.integers(100000, 1000000, 20)
        incomes = np.linspace(6.0, 11.5, 20)
        scale = 0.02 * (counts / 100000.0) ** -0.25
        p_values = []
        for _ in range(400):
            accuracies = 0.6 + scale * rng.standard_normal(20)
            p_values.append(gls_fit(records_for(incomes, accuracies,
                                                counts)).p_value)
        self.assertGreater(stats.kstest(p_values, 'uniform').pvalue, 0.001)


class TestWelch(unittest.TestCase):

    def setUp(self):
        rng = np.random.default_rng(4)
        self.first = rng.normal(0.0, 1.0, 12)
        self.second = rng.normal(0.6, 2.0, 9)

    def test_formula(self):
        result = two_sample_t_test(self.first, self.second)
        var_a = self.first.var(ddof=1) / 12
        var_b = self.second.var(ddof=1) / 9
        statistic = (self.second.mean() - self.first.mean()) / \
            np.sqrt(var_a + var_b)
        df = (var_a + var_b) ** 2 / (var_a ** 2 / 11 + var_b ** 2 / 8)
        self.assertAlmostEqual(statistic, result.t, delta=1e-12)
        self.assertAlmostEqual(df, result.df, delta=1e-10)
        self.assertAlmostEqual(stats.t.sf(statistic, df), result.p_value,
                               delta=1e-10)

    def test_matches_scipy(self):
        reference = stats.ttest_ind(self.first, self.second, equal_var=False,
                                    alternative='less')
        result = two_sample_t_test(self.first, self.second, 'less')
        self.assertAlmostEqual(-reference.statistic, result.t, delta=1e-12)
        self.assertAlmostEqual(reference.pvalue, result.p_value, delta=1e-10)

    def test_antisymmetry(self):
        forward = two_sample_t_test(self.first, self.second)
        backward = two_sample_t_test(self.second, self.first)
        self.assertAlmostEqual(-forward.t, backward.t, delta=1e-12)
        self.assertAlmostEqual(1.0, forward.p_value + backward.p_value,
                               delta=1e-12)
        greater = two_sample_t_test(self.second, self.first, 'greater')
        self.assertAlmostEqual(forward.t, greater.t, delta=1e-12)
        self.assertAlmostEqual(forward.p_value, greater.p_value, delta=1e-12)

    def test_identical_samples(self):
        result = two_sample_t_test(self.first, self.first)
        self.assertEqual(0.0, result.t)
        self.assertEqual(0.5, result.p_value)

    def test_constant_samples(self):
        self.assertRaisesRegex(UndefinedStatisticException,
                "Both samples are constant with equal means",
                two_sample_t_test, [0.5, 0.5], [0.5, 0.5, 0.5])
        result = two_sample_t_test([0.0, 0.0], [1.0, 1.0])
        self.assertEqual(float('inf'), result.t)
        self.assertEqual(0.0, result.p_value)
        self.assertTrue(np.isnan(result.df))
        self.assertEqual(1.0, two_sample_t_test([0.0, 0.0], [1.0, 1.0],
                                                'greater').p_value)

    def test_errors(self):
        self.assertRaisesRegex(ParameterException,
                "The t-test needs 2 or more values per sample, got 1 and 3",
                two_sample_t_test, [0.1], [0.1, 0.2, 0.3])
        self.assertRaisesRegex(ParameterException,
                "'two-sided' is not an alternative",
                two_sample_t_test, [0.1, 0.2], [0.1, 0.2], 'two-sided')


class TestGroupedData(unittest.TestCase):

    def setUp(self):
        self.directory = tempfile.mkdtemp()

    def tearDown(self):
        shutil.rmtree(self.directory)

    def test_group_sizes(self):
        base = holdout_split()
        dataset, meta = make_grouped_dataset(base, 7, 1.0, 0.3, seed=1)
        self.assertEqual(len(base), len(dataset))
        self.assertEqual(list(range(7)), sorted(meta))
        self.assertEqual(6.0, meta[0])
        self.assertEqual(11.5, meta[6])
        counts = np.bincount(dataset.group_ids, minlength=7)
        self.assertTrue(np.all(counts >= 1))
        self.assertEqual(len(base), counts.sum())
        np.testing.assert_array_equal(base.labels, dataset.labels)

    def test_grouping_is_deterministic(self):
        base = holdout_split()
        first, _ = make_grouped_dataset(base, 5, 1.0, 0.3, seed=2)
        second, _ = make_grouped_dataset(base, 5, 1.0, 0.3, seed=2)
        np.testing.assert_array_equal(first.images, second.images)
        np.testing.assert_array_equal(first.group_ids, second.group_ids)

    def test_zero_noise_keeps_images(self):
        base = holdout_split()
        dataset, _ = make_grouped_dataset(base, 4, 1.0, 0.0, seed=3)
        np.testing.assert_array_equal(base.images, dataset.images)

    def test_richest_group_is_clean(self):
        base = holdout_split()
        dataset, _ = make_grouped_dataset(base, 3, 1.0, 0.5, seed=4)
        richest = dataset.group_ids == 2
        np.testing.assert_array_equal(base.images[richest],
                                      dataset.images[richest])
        np.testing.assert_allclose(
            [0.5, 0.25, 0.0], group_noise_levels([6.0, 8.75, 11.5], 0.5))
        np.testing.assert_allclose(
            [0.5, 0.375, 0.25],
            group_noise_levels([6.0, 8.75, 11.5], 0.5, slope=0.5))

    def test_slope_precedes_noise_scale(self):
        base = holdout_split()
        flat, _ = make_grouped_dataset(base, 3, 0.0, 0.5, seed=4)
        sloped, _ = make_grouped_dataset(base, 3, 1.0, 0.5, seed=4)
        np.testing.assert_array_equal(flat.group_ids, sloped.group_ids)
        richest = flat.group_ids == 2
        self.assertFalse(np.array_equal(base.images[richest],
                                        flat.images[richest]))
        poorest = flat.group_ids == 0
        np.testing.assert_array_equal(sloped.images[poorest],
                                      flat.images[poorest])

    def test_grouping_errors(self):
        base = holdout_split()
        cases = [
            ((base, 2, 1.0, 0.1, 0), "needs at least 3 groups, got 2"),
            ((base, len(base) + 1, 1.0, 0.1, 0), "groups cannot be filled"),
            ((base, 3, 1.0, -0.1, 0), "Noise scale must be non-negative"),
        ]
        for args, message in cases:
            self.assertRaisesRegex(ParameterException, message,
                                   make_grouped_dataset, *args)

    def test_group_accuracy_loop_oracle(self):
        model = trained_model()
        dataset, meta = make_grouped_dataset(holdout_split(), 5, 1.0, 0.3,
                                             seed=5)
        records = group_accuracy(model, dataset, meta)
        predictions = predict(model, dataset.images)
        for record in records:
            members = [index for index in range(len(dataset))
                       if dataset.group_ids[index] == record.group_id]
            self.assertEqual(len(members), record.n)
            self.assertEqual(sum(1 for index in members
                                 if predictions[index] ==
                                 dataset.labels[index]), record.correct)
            self.assertEqual(meta[record.group_id], record.g)

    def test_group_accuracy_skips_empty_groups(self):
        dataset, meta = make_grouped_dataset(holdout_split(), 4, 1.0, 0.1,
                                             seed=6)
        meta[99] = 12.0
        with self.assertLogs('perceptual_dro.fairness', 'WARNING'):
            records = group_accuracy(trained_model(), dataset, meta)
        self.assertEqual([0, 1, 2, 3],
                         [record.group_id for record in records])

    def test_group_accuracy_errors(self):
        base = holdout_split()
        self.assertRaisesRegex(ConsistencyException,
                "Dataset carries no group ids",
                group_accuracy, trained_model(), base, {0: 6.0})
        dataset, _ = make_grouped_dataset(base, 3, 1.0, 0.1, seed=7)
        self.assertRaisesRegex(ConsistencyException,
                r"Group id\(s\) 2 have no metadata",
                group_accuracy, trained_model(), dataset, {0: 6.0, 1: 7.0})

    def test_audit_population(self):
        dataset, meta = make_grouped_dataset(holdout_split(), 6, 1.0, 0.4,
                                             seed=8)
        models = [trained_model(), random_model(seed=1)]
        results = audit_population(models, dataset, meta, workers=1)
        self.assertEqual(2, len(results))
        for model, result in zip(models, results):
            expected = gls_fit(group_accuracy(model, dataset, meta))
            self.assertEqual(expected.beta, result.beta)
            self.assertEqual(4, result.nu2)
        self.assertRaisesRegex(ParameterException,
                "An audit needs at least 2 models, got 1",
                audit_population, models[:1], dataset, meta)
        zero = Model.zeros('mlp', (SIZE, SIZE))
        self.assertEqual(1, len(audit_population([zero], dataset, meta,
                                                 min_models=1)))

    def test_beta_summary(self):
        records = [records_for([6.0, 8.0, 10.0], [0.5, 0.9, p], [50] * 3)
                   for p in (0.5, 0.6, 0.7, 0.8, 0.9)]
        results = [gls_fit(group) for group in records]
        summary = beta_summary(results)
        betas = sorted(result.beta for result in results)
        self.assertEqual(betas[0], summary.minimum)
        self.assertEqual(betas[-1], summary.maximum)
        self.assertAlmostEqual(betas[2], summary.median, delta=1e-12)
        self.assertAlmostEqual(np.mean(betas), summary.mean, delta=1e-12)
        self.assertRaisesRegex(ParameterException, "No slopes to summarize",
                               beta_summary, [])

    def test_files(self):
        records = records_for([6.0, 7.25, 8.5], [0.5, 0.75, 0.9],
                              [10, 20, 30])
        path = os.path.join(self.directory, 'groups.csv')
        write_group_records(records, path)
        self.assertEqual(records, read_group_records(path))
        meta = {0: 6.0, 1: 7.25, 2: 8.5}
        meta_path = os.path.join(self.directory, 'meta.csv')
        write_group_meta(meta, meta_path)
        self.assertEqual(meta, read_group_meta(meta_path))
        dataset, meta = make_grouped_dataset(holdout_split(), 3, 1.0, 0.2,
                                             seed=9)
        prefix = os.path.join(self.directory, 'grouped')
        write_grouped_dataset(dataset, meta, prefix)
        restored, restored_meta = read_grouped_dataset(prefix)
        np.testing.assert_array_equal(dataset.images, restored.images)
        np.testing.assert_array_equal(dataset.group_ids, restored.group_ids)
        self.assertEqual(meta, restored_meta)
