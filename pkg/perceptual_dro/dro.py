# -*- coding: utf-8 -*-
"""
Distributionally robust training.

``generate_robust_dataset`` grows a dataset with adversarial examples while
updating the model on weighted draws; ``dro_train`` retrains on the grown
dataset with draws proportional to the entry weights;
``sample_model_population`` repeats the retraining under independent seeds.

Appended entries carry the weight ``(k - 1) * N + i`` for outer step ``k``
and draw ``i``; original entries carry 1. How a weight scales the gradient
step is set by ``DroConfig.weight_mode``:

  - ``literal``: ``learning_rate * P``.
  - ``normalized``: ``learning_rate * P / mean(P)`` over the current
    dataset.

Attributes:
    WEIGHT_MODES (tuple): Accepted weight modes.
    ROBUST_SIDECAR_HEADER (tuple): Columns of the robust-dataset CSV.
"""
import logging
import os
from dataclasses import dataclass, field, replace

import numpy as np

from .attack import AttackConfig, run_attack
from .classifier import accuracy, load_checkpoint, save_checkpoint, sgd_step
from .constants import DIVERGENCE_LOSS
from .exceptions import (ConsistencyException, FormatException,
                         NumericException, ParameterException)
from .formats import load_idx, read_csv, write_csv, write_idx
from .image import Dataset, Image, LabeledExample
from .parallel import ordered_map
from .streams import derive_seed, stream

logger = logging.getLogger(__name__)

WEIGHT_MODES = ('normalized', 'literal')

ROBUST_SIDECAR_HEADER = ('entry_index', 'weight', 'provenance')

ORIGINAL = 'original'


class WeightedExample(object):

    """
    Labeled image with a sampling weight.

    Attributes:
        image (Image): Pixels.
        label (int): Class index.
        weight (float): Sampling and gradient weight ``P``.
    """
    #pylint: disable=too-few-public-methods

    def __init__(self, image, label, weight):
        if not weight > 0:
            raise ParameterException(
                "Example weights must be positive, got %r" % (weight,))
        self.image = image
        self.label = int(label)
        self.weight = float(weight)

    def __repr__(self):
        return "WeightedExample(label=%d, weight=%g)" % (
            self.label, self.weight)


class DroDiagnostics(object):

    """
    Attack outcomes counted while a robust dataset grows.

    Attributes:
        unflipped (int): Attacks that used their budget without flipping
            the label; the final iterate was appended.
        failed (int): Attacks that raised; the drawn example was appended
            unchanged.
    """
    #pylint: disable=too-few-public-methods

    def __init__(self, unflipped=0, failed=0):
        self.unflipped = unflipped
        self.failed = failed

    def as_dict(self):
        return {'unflipped': self.unflipped, 'failed': self.failed}


class RobustDataset(object):

    """
    Original examples followed by weighted adversarial ones.

    Attributes:
        images (numpy.ndarray): ``(M, height, width)`` pixel stack.
        labels (numpy.ndarray): ``(M,)`` class indices.
        weights (numpy.ndarray): ``(M,)`` positive weights.
        provenance (list of string): ``'original'`` or
            ``'adversarial@k,i'`` per entry.
        origin_size (int): Number ``N`` of original examples.
        outer_steps_used (int): Outer steps ``T1`` that produced the
            appended entries.
        class_count (int): Number of classes.
        diagnostics (DroDiagnostics): Attack outcome counts.
    """
    #pylint: disable=too-many-arguments

    def __init__(self, images, labels, weights, provenance, origin_size,
                 outer_steps_used, class_count=10, diagnostics=None):
        images = np.array(images, dtype=np.float64)
        labels = np.array(labels, dtype=np.int64)
        weights = np.array(weights, dtype=np.float64)
        count = labels.shape[0]
        if images.shape[0] != count or weights.shape[0] != count or \
                len(provenance) != count:
            raise ConsistencyException(
                "Robust dataset parts disagree: %d images, %d labels,"
                " %d weights, %d provenance entries" % (
                    images.shape[0], count, weights.shape[0],
                    len(provenance)))
        if count != origin_size * (1 + outer_steps_used):
            raise ConsistencyException(
                "%d entries do not match N=%d and T1=%d" % (
                    count, origin_size, outer_steps_used))
        if np.any(weights <= 0):
            raise ConsistencyException("Robust dataset holds a weight <= 0")
        for array in (images, labels, weights):
            array.setflags(write=False)
        self.images = images
        self.labels = labels
        self.weights = weights
        self.provenance = list(provenance)
        self.origin_size = int(origin_size)
        self.outer_steps_used = int(outer_steps_used)
        self.class_count = int(class_count)
        self.diagnostics = diagnostics or DroDiagnostics()

    @classmethod
    def from_dataset(cls, dataset):
        """Robust dataset holding only the originals, all with weight 1."""
        return cls(dataset.images, dataset.labels, np.ones(len(dataset)),
                   [ORIGINAL] * len(dataset), len(dataset), 0,
                   dataset.class_count)

    @property
    def entries(self):
        """list: The entries as ``WeightedExample`` objects."""
        return [WeightedExample(Image(image), label, weight)
                for image, label, weight in zip(self.images, self.labels,
                                                self.weights)]

    @property
    def dataset(self):
        """Dataset: The entries without their weights."""
        return Dataset(self.images, self.labels, self.class_count)

    def __len__(self):
        return self.labels.shape[0]


@dataclass(frozen=True)
class DroConfig(object):

    """
    Parameters of robust-dataset generation and weighted retraining.

    Attributes:
        outer_steps (int): ``T1``; 0 leaves the dataset unchanged.
        epochs (int): ``T2``; 0 leaves the model unchanged.
        learning_rate (float): ``alpha``.
        attack (AttackConfig): Inner attack.
        weight_mode (string): ``'normalized'`` or ``'literal'``.
        run_count (int): ``R``, size of a model population.
        radius (float): Ambiguity radius ``delta``; recorded only.
    """

    outer_steps: int = 2
    epochs: int = 3
    learning_rate: float = 0.1
    attack: AttackConfig = field(default_factory=AttackConfig)
    weight_mode: str = 'normalized'
    run_count: int = 50
    radius: float = 0.0

    def __post_init__(self):
        if self.outer_steps < 0 or self.epochs < 0:
            raise ParameterException(
                "T1 and T2 must be non-negative, got %r and %r" % (
                    self.outer_steps, self.epochs))
        if self.run_count < 1:
            raise ParameterException(
                "Run count must be at least 1, got %r" % (self.run_count,))
        if not self.learning_rate > 0:
            raise ParameterException(
                "Learning rate must be positive, got %r" % (
                    self.learning_rate,))
        if self.weight_mode not in WEIGHT_MODES:
            raise ParameterException(
                "'%s' is not a weight mode; expected one of %s" % (
                    self.weight_mode, ', '.join(WEIGHT_MODES)))
        if self.radius < 0:
            raise ParameterException(
                "Radius must be non-negative, got %r" % (self.radius,))

    def replace(self, **changes):
        return replace(self, **changes)

    def as_dict(self):
        return {
            't1': self.outer_steps,
            't2': self.epochs,
            'alpha': self.learning_rate,
            'attack': self.attack.as_dict(),
            'weight_mode': self.weight_mode,
            'runs': self.run_count,
            'radius': self.radius,
        }


def proportional_draws(rng, weights, size):
    """Indices drawn with replacement, with probability proportional to
    ``weights``.

    Equal weights reduce to ``rng.integers(0, len(weights), size)``, the
    draws of plain uniform SGD on the same stream.

    Args:
        rng (numpy.random.Generator): Source of randomness.
        weights (array_like): Positive weights.
        size (int): Number of draws.

    Returns:
        numpy.ndarray: ``size`` int64 indices.
    """
    weights = np.asarray(weights, dtype=np.float64)
    if not weights.size or np.any(weights <= 0):
        raise ParameterException("Draws need a non-empty positive weight list")
    if np.all(weights == weights[0]):
        return rng.integers(0, weights.size, size)
    cumulative = np.cumsum(weights)
    points = rng.random(size) * cumulative[-1]
    indices = np.searchsorted(cumulative, points, side='right')
    return np.minimum(indices, weights.size - 1)


def gradient_scales(weights, cfg):
    """Per-entry step scale ``alpha * w(P)`` under ``cfg.weight_mode``."""
    weights = np.asarray(weights, dtype=np.float64)
    if cfg.weight_mode == 'normalized':
        weights = weights / weights.mean()
    return cfg.learning_rate * weights


def _weighted_step(model, image, label, scale, where):
    try:
        model, loss = sgd_step(model, image[np.newaxis], [label], scale)
    except NumericException as error:
        raise NumericException("Training diverged at %s: %s" % (where, error))
    if loss > DIVERGENCE_LOSS:
        raise NumericException("Training diverged at %s: loss %g exceeds %g"
                               % (where, loss, DIVERGENCE_LOSS))
    return model


def _attack_drawn(model, image, label, cfg, diagnostics):
    # the drawn entry may itself be adversarial
    example = LabeledExample(Image(image), label)
    try:
        result = run_attack(model, example, cfg.attack)
    except NumericException as error:
        logger.warning("Attack failed on a drawn example, appending it"
                       " unchanged: %s", error)
        diagnostics.failed += 1
        return example.image.pixels
    if not result.success:
        diagnostics.unflipped += 1
    return result.adversarial.pixels


def generate_robust_dataset(model, dataset, cfg, seed):
    """Grow a dataset with adversarial examples under a moving model.

    For every outer step ``k`` the function draws ``N`` entries with
    replacement, proportionally to the weights of the dataset as grown so
    far. For the ``i``-th draw it takes one weighted gradient step, attacks
    the drawn entry against the updated model and appends the attacked
    image with weight ``(k - 1) * N + i``.

    Args:
        model (Model): Starting model ``theta_0``.
        dataset (Dataset): The ``N`` original examples.
        cfg (DroConfig): Uses ``outer_steps``, ``learning_rate``,
            ``weight_mode`` and ``attack``.
        seed (int): Seed of the draws.

    Returns:
        tuple: ``(RobustDataset, Model)``, the grown dataset and the final
        model.

    Raises:
        ParameterException: Empty dataset.
        NumericException: A gradient step diverged; the message names the
            outer step and draw.
    """
    if not len(dataset):
        raise ParameterException("Cannot grow an empty dataset")
    origin = len(dataset)
    images = list(dataset.images)
    labels = list(dataset.labels)
    weights = [1.0] * origin
    provenance = [ORIGINAL] * origin
    diagnostics = DroDiagnostics()
    rng = stream(seed, 0)
    for outer in range(1, cfg.outer_steps + 1):
        draws = proportional_draws(rng, weights, origin)
        for inner, index in enumerate(draws, 1):
            scale = cfg.learning_rate * weights[index]
            if cfg.weight_mode == 'normalized':
                scale /= np.mean(weights)
            model = _weighted_step(
                model, images[index], labels[index], scale,
                "outer step %d, draw %d" % (outer, inner))
            images.append(_attack_drawn(model, images[index], labels[index],
                                        cfg, diagnostics))
            labels.append(labels[index])
            weights.append(float((outer - 1) * origin + inner))
            provenance.append('adversarial@%d,%d' % (outer, inner))
        logger.info("outer step %d/%d: %d entries, %d unflipped, %d failed",
                    outer, cfg.outer_steps, len(labels),
                    diagnostics.unflipped, diagnostics.failed)
    robust = RobustDataset(np.stack(images), labels, weights, provenance,
                           origin, cfg.outer_steps, dataset.class_count,
                           diagnostics)
    return robust, model


def dro_train(model, robust, cfg, seed):
    """Weighted retraining on a robust dataset.

    Every epoch performs ``M`` draws proportional to the weights, each
    followed by ``theta <- theta - alpha * w(P) * grad loss``.

    Args:
        model (Model): Starting model.
        robust (RobustDataset): Training data.
        cfg (DroConfig): Uses ``epochs``, ``learning_rate`` and
            ``weight_mode``.
        seed (int): Seed of the draws.

    Returns:
        Model: The retrained model.

    Raises:
        ParameterException: Empty robust dataset.
        NumericException: Loss became non-finite or exceeded
            ``DIVERGENCE_LOSS``; the message names the epoch and step.
    """
    if not len(robust):
        raise ParameterException("Cannot train on an empty robust dataset")
    rng = stream(seed, 0)
    scales = gradient_scales(robust.weights, cfg)
    for epoch in range(1, cfg.epochs + 1):
        draws = proportional_draws(rng, robust.weights, len(robust))
        for step, index in enumerate(draws, 1):
            model = _weighted_step(
                model, robust.images[index], robust.labels[index],
                scales[index], "epoch %d, step %d" % (epoch, step))
        logger.debug("DRO epoch %d/%d done", epoch, cfg.epochs)
    return model


def run_seeds(base_seed, run_count):
    """Seeds of the runs of a population."""
    return [derive_seed(base_seed, run) for run in range(run_count)]


def sample_model_population(model, robust, cfg, base_seed, workers=None,
                            seeds=None):
    """Retrain ``cfg.run_count`` models under independent seeds.

    A run that fails numerically is retried once with a fresh seed derived
    from ``(base_seed, run, 1)``.

    Args:
        model (Model): Common starting model.
        robust (RobustDataset): Training data.
        cfg (DroConfig): Retraining parameters and run count.
        base_seed (int): Seed the run seeds derive from.
        workers (int, optional): Worker count.
        seeds (list of int, optional): Explicit run seeds, overriding the
            derived ones.

    Returns:
        list of Model: One model per run, in run order.

    Raises:
        ParameterException: Fewer than two runs.
        NumericException: A run failed twice.
    """
    if seeds is None:
        seeds = run_seeds(base_seed, cfg.run_count)
    if len(seeds) < 2:
        raise ParameterException(
            "A population needs at least 2 runs, got %d" % len(seeds))

    def run(indexed_seed):
        index, seed = indexed_seed
        try:
            return dro_train(model, robust, cfg, seed)
        except NumericException as error:
            logger.warning("Run %d failed (%s); retrying with a fresh seed",
                           index, error)
        try:
            return dro_train(model, robust, cfg,
                             derive_seed(base_seed, index, 1))
        except NumericException as error:
            raise NumericException(
                "Run %d failed after one retry: %s" % (index, error))

    models = ordered_map(run, enumerate(seeds), workers)
    logger.info("Sampled %d models", len(models))
    return models


class PopulationAccuracy(object):

    """
    Clean accuracy summary of a model population.

    Attributes:
        mean (float): Mean accuracy.
        minimum (float): Lowest accuracy.
        maximum (float): Highest accuracy.
        values (list of float): Accuracy per model.
    """
    #pylint: disable=too-few-public-methods

    def __init__(self, values):
        self.values = [float(value) for value in values]
        self.mean = float(np.mean(self.values))
        self.minimum = min(self.values)
        self.maximum = max(self.values)

    @property
    def spread(self):
        return self.maximum - self.minimum


def population_accuracy(models, dataset, workers=None):
    """Accuracy of every model on a dataset, summarized."""
    if not models:
        raise ParameterException("Accuracy of an empty population")
    return PopulationAccuracy(
        ordered_map(lambda model: accuracy(model, dataset), models, workers))


def population_paths(directory, count):
    """Checkpoint paths ``model_00.ckpt``, ``model_01.ckpt``, ... ."""
    width = max(2, len(str(count - 1)))
    return [os.path.join(directory, 'model_%0*d.ckpt' % (width, index))
            for index in range(count)]


def write_population(models, directory):
    """Save a population as indexed checkpoints; returns the paths."""
    if not os.path.isdir(directory):
        os.makedirs(directory)
    paths = population_paths(directory, len(models))
    for model, path in zip(models, paths):
        save_checkpoint(model, path)
    return paths


def read_population(directory):
    """Load every ``model_*.ckpt`` of a directory, in file-name order."""
    names = sorted(name for name in os.listdir(directory)
                   if name.startswith('model_') and name.endswith('.ckpt'))
    return [load_checkpoint(os.path.join(directory, name)) for name in names]


def robust_dataset_paths(prefix):
    """Image, label and weight file names of a robust dataset."""
    return (prefix + '-images.idx', prefix + '-labels.idx',
            prefix + '-weights.csv')


def write_robust_dataset(robust, prefix):
    """Write a robust dataset as float64 IDX files plus a weight CSV.

    Returns:
        tuple: The three paths written.
    """
    images_path, labels_path, weights_path = robust_dataset_paths(prefix)
    write_idx(robust.dataset, images_path, labels_path, exact=True)
    write_csv(weights_path, ROBUST_SIDECAR_HEADER,
              zip(range(len(robust)), robust.weights, robust.provenance))
    return images_path, labels_path, weights_path


def read_robust_dataset(prefix, class_count=10):
    """Read a robust dataset written by ``write_robust_dataset``.

    Raises:
        FormatException: The weight table does not match the images.
    """
    images_path, labels_path, weights_path = robust_dataset_paths(prefix)
    dataset = load_idx(images_path, labels_path, class_count)
    rows = read_csv(weights_path, ROBUST_SIDECAR_HEADER)
    if len(rows) != len(dataset):
        raise FormatException(
            "'%s' lists %d entries for %d images" % (
                weights_path, len(rows), len(dataset)))
    provenance = [row['provenance'] for row in rows]
    origin = provenance.count(ORIGINAL)
    if not origin or len(rows) % origin:
        raise FormatException(
            "'%s' holds %d originals among %d entries" % (
                weights_path, origin, len(rows)))
    return RobustDataset(dataset.images, dataset.labels,
                         [float(row['weight']) for row in rows], provenance,
                         origin, len(rows) // origin - 1, class_count)
