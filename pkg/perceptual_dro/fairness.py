# -*- coding: utf-8 -*-
"""
Group-fairness audit of classifiers.

A model is fair with respect to a group attribute when its accuracy does
not depend on it. The audit regresses per-group accuracy ``p_i`` on the
group's log income ``g_i`` by generalized least squares with a diagonal
covariance, tests the slope with an F-test, and compares slope populations
of two training methods with Welch's t-test.

The covariance entry of group ``i`` is ``1 / sqrt(n_i)`` by default
(``weighting='sqrt'``) or ``1 / n_i`` (``weighting='inverse'``).

Attributes:
    WEIGHTINGS (tuple): Accepted covariance weightings.
    GROUP_RECORD_HEADER (tuple): Columns of a grouped-accuracy CSV.
    GROUP_META_HEADER (tuple): Columns of a group metadata CSV.
    MEMBERSHIP_HEADER (tuple): Columns of a group membership CSV.
    AUDIT_HEADER (tuple): Columns of an audit CSV.
    BETA_SUMMARY_HEADER (tuple): Columns of a slope summary CSV.
"""
import logging
from collections import namedtuple

import numpy as np

from .classifier import predict
from .constants import GROUP_SIZE_EXPONENT, LOG_INCOME_RANGE
from .exceptions import (ConsistencyException, FormatException,
                         ParameterException, RankException,
                         UndefinedStatisticException)
from .formats import load_idx, read_csv, write_csv, write_idx
from .image import Dataset
from .parallel import ordered_map
from .special import f_survival, t_survival
from .streams import stream

logger = logging.getLogger(__name__)

WEIGHTINGS = ('sqrt', 'inverse')

GROUP_RECORD_HEADER = ('group_id', 'g', 'n', 'correct')
GROUP_META_HEADER = ('group_id', 'g')
MEMBERSHIP_HEADER = ('entry_index', 'group_id')
AUDIT_HEADER = ('model_id', 'beta', 'intercept', 'F0', 'nu1', 'nu2',
                'p_value')
BETA_SUMMARY_HEADER = ('min', 'q1', 'median', 'q3', 'max', 'mean')

# RSS_full below this fraction of RSS_restricted counts as an exact fit.
PERFECT_FIT_TOLERANCE = 1e-20


class GroupRecord(object):

    """
    Classification counts of one group.

    Attributes:
        group_id (int): Group identifier.
        g (float): Log per-capita income of the group.
        n (int): Number of images.
        correct (int): Correctly classified images.
    """
    #pylint: disable=too-few-public-methods,invalid-name

    def __init__(self, group_id, g, n, correct):
        if n < 1 or not 0 <= correct <= n:
            raise ConsistencyException(
                "Group %d needs 0 <= correct <= n and n >= 1, got"
                " correct=%d, n=%d" % (group_id, correct, n))
        self.group_id = int(group_id)
        self.g = float(g)
        self.n = int(n)
        self.correct = int(correct)

    @property
    def p(self):
        """float: Group accuracy ``correct / n``."""
        return self.correct / float(self.n)

    def __eq__(self, other):
        return isinstance(other, GroupRecord) and (
            self.group_id, self.g, self.n, self.correct) == (
                other.group_id, other.g, other.n, other.correct)

    def __repr__(self):
        return "GroupRecord(%d, g=%g, %d/%d)" % (
            self.group_id, self.g, self.correct, self.n)


class CovarianceSpec(object):

    """
    Diagonal error covariance of the group regression.

    Attributes:
        diag (numpy.ndarray): Positive diagonal ``Sigma_ii``.
    """

    def __init__(self, diag):
        diag = np.asarray(diag, dtype=np.float64)
        if diag.ndim != 1 or not np.all(diag > 0):
            raise ParameterException(
                "Covariance diagonal must be a vector of positive entries")
        self.diag = diag

    @classmethod
    def from_counts(cls, counts, weighting='sqrt'):
        """``1 / sqrt(n_i)`` (``'sqrt'``) or ``1 / n_i`` (``'inverse'``)."""
        counts = np.asarray(counts, dtype=np.float64)
        if weighting == 'sqrt':
            return cls(1.0 / np.sqrt(counts))
        if weighting == 'inverse':
            return cls(1.0 / counts)
        raise ParameterException(
            "'%s' is not a weighting; expected one of %s" % (
                weighting, ', '.join(WEIGHTINGS)))

    @property
    def weights(self):
        """numpy.ndarray: Diagonal of ``Sigma^-1``."""
        return 1.0 / self.diag


class GlsResult(object):

    """
    Slope regression of group accuracy on log income.

    Attributes:
        beta (float): Slope.
        intercept (float): Intercept.
        F0 (float): Slope F statistic.
        nu1 (int): Numerator degrees of freedom, always 1.
        nu2 (int): Denominator degrees of freedom, groups minus 2.
        p_value (float): ``P(F > F0)``.
        perfect_fit (bool): The weighted residual sum of squares vanished;
            ``F0`` is then infinite and ``p_value`` 0, unless the
            accuracies are constant, in which case ``F0`` is 0 and
            ``p_value`` 1.
    """
    #pylint: disable=too-few-public-methods,too-many-arguments,invalid-name

    def __init__(self, beta, intercept, F0, nu1, nu2, p_value,
                 perfect_fit=False):
        self.beta = beta
        self.intercept = intercept
        self.F0 = F0
        self.nu1 = nu1
        self.nu2 = nu2
        self.p_value = p_value
        self.perfect_fit = perfect_fit

    def row(self, model_id):
        """Audit CSV row of this fit."""
        return (model_id, self.beta, self.intercept, self.F0, self.nu1,
                self.nu2, self.p_value)

    def __repr__(self):
        return "GlsResult(beta=%.6g, F0=%.6g, p=%.6g)" % (
            self.beta, self.F0, self.p_value)


TTestResult = namedtuple('TTestResult', 't df p_value')
TTestResult.__doc__ = """\
Welch two-sample t-test. ``p_value`` is the one-sided tail
``t_survival(t, df)``.
"""

BetaSummary = namedtuple('BetaSummary', 'minimum q1 median q3 maximum mean')


def group_accuracy(model, dataset, group_meta):
    """Per-group classification counts.

    Args:
        model (Model): Classifier.
        dataset (Dataset): Examples carrying ``group_ids``.
        group_meta (dict): ``group_id -> g``.

    Returns:
        list of GroupRecord: One record per non-empty group, by group id.

    Raises:
        ConsistencyException: The dataset carries no group ids, or an
            example belongs to a group missing from ``group_meta``.
    """
    if dataset.group_ids is None:
        raise ConsistencyException("Dataset carries no group ids")
    unknown = set(np.unique(dataset.group_ids).tolist()) - set(group_meta)
    if unknown:
        raise ConsistencyException(
            "Group id(s) %s have no metadata" % (
                ', '.join(str(group) for group in sorted(unknown))))
    hits = predict(model, dataset.images) == dataset.labels
    records = []
    omitted = 0
    for group_id in sorted(group_meta):
        members = dataset.group_ids == group_id
        count = int(np.count_nonzero(members))
        if not count:
            omitted += 1
            continue
        records.append(GroupRecord(group_id, group_meta[group_id], count,
                                   int(np.count_nonzero(hits[members]))))
    if omitted:
        logger.warning("Omitted %d empty group(s)", omitted)
    return records


def gls_fit(records, weighting='sqrt', min_groups=3):
    """Regress group accuracy on log income and F-test the slope.

    Fits ``p = intercept + beta * g`` as
    ``(X^T Sigma^-1 X)^-1 X^T Sigma^-1 p`` and compares it with the
    intercept-only model through
    ``F0 = (RSS_restricted - RSS_full) / (RSS_full / (m - 2))``, both
    residual sums weighted by ``Sigma^-1``.

    Args:
        records (list of GroupRecord): One record per group.
        weighting (string, optional): ``'sqrt'`` or ``'inverse'``.
        min_groups (int, optional): Fewest groups accepted. Defaults to 3.

    Returns:
        GlsResult: Slope, intercept and test.

    Raises:
        ParameterException: Fewer than ``min_groups`` groups.
        RankException: Every group has the same ``g``.
    """
    count = len(records)
    if count < max(2, min_groups):
        raise ParameterException(
            "GLS needs at least %d groups, got %d" % (
                max(2, min_groups), count))
    incomes = np.array([record.g for record in records])
    accuracies = np.array([record.p for record in records])
    weights = CovarianceSpec.from_counts(
        [record.n for record in records], weighting).weights
    if incomes.max() == incomes.min():
        raise RankException(
            "All %d groups share g=%g; the slope is not identifiable" % (
                count, incomes[0]))
    design = np.column_stack([np.ones(count), incomes])
    weighted = design.T * weights
    intercept, beta = np.linalg.solve(weighted.dot(design),
                                      weighted.dot(accuracies))
    rss_full = float(np.sum(
        weights * (accuracies - design.dot((intercept, beta))) ** 2))
    centre = np.sum(weights * accuracies) / np.sum(weights)
    rss_restricted = float(np.sum(weights * (accuracies - centre) ** 2))
    nu2 = count - 2
    if accuracies.max() == accuracies.min():
        return GlsResult(0.0, float(centre), 0.0, 1, nu2, 1.0, True)
    if nu2 == 0 or rss_full <= PERFECT_FIT_TOLERANCE * rss_restricted:
        return GlsResult(float(beta), float(intercept), float('inf'), 1, nu2,
                         0.0, True)
    statistic = max(0.0, rss_restricted - rss_full) / (rss_full / nu2)
    return GlsResult(float(beta), float(intercept), statistic, 1, nu2,
                     f_survival(statistic, 1, nu2))


def two_sample_t_test(betas_a, betas_b, alternative='less'):
    """One-sided Welch test comparing the means of two samples.

    With ``alternative='less'`` the alternative hypothesis is
    ``mean(a) < mean(b)`` and ``t = (mean_b - mean_a) / se``; with
    ``'greater'`` it is ``mean(a) > mean(b)`` and the sign flips.

    Args:
        betas_a (sequence of float): First sample, at least 2 values.
        betas_b (sequence of float): Second sample, at least 2 values.
        alternative (string, optional): ``'less'`` or ``'greater'``.

    Returns:
        TTestResult: Statistic, Welch-Satterthwaite degrees of freedom and
        one-sided p-value.

    Raises:
        ParameterException: A sample has fewer than 2 values or the
            alternative is unknown.
        UndefinedStatisticException: Both samples are constant and equal.
    """
    first = np.asarray(betas_a, dtype=np.float64)
    second = np.asarray(betas_b, dtype=np.float64)
    if first.size < 2 or second.size < 2:
        raise ParameterException(
            "The t-test needs 2 or more values per sample, got %d and %d" % (
                first.size, second.size))
    if alternative not in ('less', 'greater'):
        raise ParameterException(
            "'%s' is not an alternative; expected less or greater" % (
                alternative,))
    shift = second.mean() - first.mean()
    if alternative == 'greater':
        shift = -shift
    var_a = first.var(ddof=1) / first.size
    var_b = second.var(ddof=1) / second.size
    spread = var_a + var_b
    if spread == 0:
        if shift == 0:
            raise UndefinedStatisticException(
                "Both samples are constant with equal means")
        statistic = float('inf') if shift > 0 else float('-inf')
        return TTestResult(statistic, float('nan'),
                           0.0 if shift > 0 else 1.0)
    df = spread ** 2 / (var_a ** 2 / (first.size - 1)
                        + var_b ** 2 / (second.size - 1))
    statistic = shift / np.sqrt(spread)
    return TTestResult(float(statistic), float(df),
                       t_survival(float(statistic), float(df)))


def _allocate_sizes(rng, total, group_count):
    """Power-law group sizes, each at least 1, summing to ``total``."""
    raw = rng.pareto(GROUP_SIZE_EXPONENT, group_count) + 1.0
    shares = (total - group_count) * raw / raw.sum()
    sizes = np.floor(shares).astype(np.int64)
    remainder = total - group_count - sizes.sum()
    # largest remainders, ties to the lower group index
    order = np.argsort(-(shares - sizes), kind='stable')
    sizes[order[:remainder]] += 1
    return sizes + 1


def group_noise_levels(incomes, noise_scale, slope=1.0):
    """Noise standard deviation per group,
    ``noise_scale * max(0, 1 - slope * (g - g_min) / (g_max - g_min))``.
    """
    incomes = np.asarray(incomes, dtype=np.float64)
    span = incomes.max() - incomes.min()
    relative = (incomes - incomes.min()) / span
    return noise_scale * np.maximum(0.0, 1.0 - slope * relative)


def make_grouped_dataset(base, group_count, slope, noise_scale, seed):
    """Split a dataset into income groups and plant an accuracy gradient.

    Groups get log incomes on an even grid over ``LOG_INCOME_RANGE`` and
    power-law sizes. Every image of group ``i`` receives Gaussian pixel
    noise of standard deviation ``group_noise_levels(...)[i]``, clamped to
    ``[0, 1]``, so poorer groups are harder to classify.

    Args:
        base (Dataset): Source examples.
        group_count (int): Number of groups ``G``, at least 3.
        slope (float): Strength of the income dependence; 1 leaves the
            richest group clean.
        noise_scale (float): Noise of the poorest group.
        seed (int): Seed of the partition and the noise.

    Returns:
        tuple: ``(Dataset, dict)``: the corrupted examples, in base order,
        carrying group ids, and the ``group_id -> g`` metadata.

    Raises:
        ParameterException: ``G < 3``, ``G`` exceeds the example count or
            negative noise.
    """
    if group_count < 3:
        raise ParameterException(
            "A grouped dataset needs at least 3 groups, got %d" % group_count)
    if group_count > len(base):
        raise ParameterException(
            "%d groups cannot be filled from %d examples" % (
                group_count, len(base)))
    if noise_scale < 0:
        raise ParameterException(
            "Noise scale must be non-negative, got %r" % (noise_scale,))
    incomes = np.linspace(LOG_INCOME_RANGE[0], LOG_INCOME_RANGE[1],
                          group_count)
    rng = stream(seed, 0)
    sizes = _allocate_sizes(rng, len(base), group_count)
    order = rng.permutation(len(base))
    group_ids = np.empty(len(base), dtype=np.int64)
    group_ids[order] = np.repeat(np.arange(group_count), sizes)
    levels = group_noise_levels(incomes, noise_scale, slope)[group_ids]
    noise = stream(seed, 1).standard_normal(base.images.shape)
    images = np.clip(base.images + levels[:, None, None] * noise, 0.0, 1.0)
    meta = dict(zip(range(group_count), incomes.tolist()))
    logger.info("Built %d groups of sizes %d..%d", group_count, sizes.min(),
                sizes.max())
    return Dataset(images, base.labels, base.class_count, group_ids), meta


def audit_population(models, dataset, group_meta, weighting='sqrt',
                     workers=None, min_models=2):
    """GLS slope fit of every model of a population.

    Raises:
        ParameterException: Fewer than ``min_models`` models.
    """
    if len(models) < min_models:
        raise ParameterException(
            "An audit needs at least %d models, got %d" % (
                min_models, len(models)))
    return ordered_map(
        lambda model: gls_fit(group_accuracy(model, dataset, group_meta),
                              weighting),
        models, workers)


def beta_summary(results):
    """Box statistics of the fitted slopes."""
    betas = np.array([result.beta for result in results], dtype=np.float64)
    if not betas.size:
        raise ParameterException("No slopes to summarize")
    q1, median, q3 = np.percentile(betas, [25, 50, 75])
    return BetaSummary(float(betas.min()), float(q1), float(median),
                       float(q3), float(betas.max()), float(betas.mean()))


def write_group_records(records, path):
    write_csv(path, GROUP_RECORD_HEADER,
              ((record.group_id, record.g, record.n, record.correct)
               for record in records))


def read_group_records(path):
    """Read a grouped-accuracy CSV.

    Raises:
        FormatException: Missing column or a non-numeric cell.
        ConsistencyException: Counts out of range.
    """
    rows = read_csv(path, GROUP_RECORD_HEADER)
    try:
        return [GroupRecord(int(row['group_id']), float(row['g']),
                            int(row['n']), int(row['correct']))
                for row in rows]
    except ValueError as error:
        raise FormatException("'%s' holds a malformed record: %s" % (
            path, error))


def write_group_meta(group_meta, path):
    write_csv(path, GROUP_META_HEADER, sorted(group_meta.items()))


def read_group_meta(path):
    """Read a ``group_id,g`` CSV into a dict."""
    rows = read_csv(path, GROUP_META_HEADER)
    try:
        return {int(row['group_id']): float(row['g']) for row in rows}
    except ValueError as error:
        raise FormatException("'%s' holds a malformed group: %s" % (
            path, error))


def grouped_dataset_paths(prefix):
    return (prefix + '-images.idx', prefix + '-labels.idx',
            prefix + '-membership.csv', prefix + '-groups.csv')


def write_grouped_dataset(dataset, group_meta, prefix):
    """Write a grouped dataset as IDX files plus membership and group CSVs.

    Returns:
        tuple: The four paths written.
    """
    images_path, labels_path, membership_path, groups_path = \
        grouped_dataset_paths(prefix)
    write_idx(dataset, images_path, labels_path, exact=True)
    write_csv(membership_path, MEMBERSHIP_HEADER,
              enumerate(dataset.group_ids.tolist()))
    write_group_meta(group_meta, groups_path)
    return images_path, labels_path, membership_path, groups_path


def read_grouped_dataset(prefix, class_count=10):
    """Read a grouped dataset written by ``write_grouped_dataset``.

    Returns:
        tuple: ``(Dataset, group_meta)``.
    """
    images_path, labels_path, membership_path, groups_path = \
        grouped_dataset_paths(prefix)
    dataset = load_idx(images_path, labels_path, class_count)
    rows = read_csv(membership_path, MEMBERSHIP_HEADER)
    if len(rows) != len(dataset):
        raise FormatException(
            "'%s' lists %d memberships for %d images" % (
                membership_path, len(rows), len(dataset)))
    group_ids = [int(row['group_id']) for row in rows]
    return dataset.with_groups(group_ids), read_group_meta(groups_path)
