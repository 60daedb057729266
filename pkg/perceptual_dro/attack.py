# -*- coding: utf-8 -*-
"""
Attacks on a classifier and the statistics built on them.

Four procedures share one result type:

  - ``ssim_one_step_attack``: a single step along ``H^-1 grad loss``, where
    ``H`` is the Hessian of the ``1 - SSIM`` cost at the original image,
    normalized to length ``epsilon``.
  - ``pgd_one_step_attack``: a single normalized loss-gradient step.
  - ``pgd_iterative_attack``: repeated normalized loss-gradient steps with
    an early stop once the logit margin exceeds the confidence.
  - ``perceptual_attack``: ascent on ``loss - lambda * c0`` with the same
    early stop. Its maximizer defines the robust surrogate loss.

Every iterate is clamped to ``[0, 1]``. Adversarial images are quantized to
the 8-bit grid only when exported.

Attributes:
    ATTACK_METHODS (tuple): Method names accepted by ``AttackConfig``.
    ATTACK_REPORT_HEADER (tuple): Columns of the attack report CSV.
"""
import logging
import math
from collections import namedtuple
from dataclasses import dataclass, field, replace

import numpy as np
from scipy.linalg import LinAlgError, cho_factor, cho_solve

from .constants import ASCENT_MAX_HALVINGS, HESSIAN_RIDGE
from .cost import SsimConfig, SsimCost, cost_hessian_at_base, ssim_array
from .classifier import (cross_entropy_loss, evaluate_point, forward_logits,
                         input_gradient, predict)
from .exceptions import (CapabilityException, DegenerateGradientException,
                         NumericException, ParameterException,
                         UndefinedRateException)
from .image import Image, lp_distance, validate_image
from .parallel import ordered_map

logger = logging.getLogger(__name__)

ATTACK_METHODS = ('ssim_one_step', 'pgd_one_step', 'pgd_iterative',
                  'perceptual')

ATTACK_REPORT_HEADER = ('image_id', 'method', 'a', 'epsilon', 'lambda',
                        'success', 'iterations', 'l1', 'l2', 'linf',
                        'one_minus_ssim')

Distances = namedtuple('Distances', 'l1 l2 linf one_minus_ssim')

NAN_DISTANCES = Distances(math.nan, math.nan, math.nan, math.nan)


@dataclass(frozen=True)
class AttackConfig(object):

    """
    Attack method and its parameters.

    Attributes:
        method (string): One of ``ATTACK_METHODS``.
        epsilon (float): Step size.
        penalty (float): Cost weight ``lambda``.
        confidence (float): Early-stop logit margin ``a``.
        max_iterations (int): Iteration budget ``N``.
        cost (CostFunction): Ground cost ``c0``.
        hessian_ridge (float): Ridge scale of the one-step SSIM attack.
    """

    method: str = 'perceptual'
    epsilon: float = 0.1
    penalty: float = 1.0
    confidence: float = 0.0
    max_iterations: int = 100
    cost: object = field(default_factory=SsimCost)
    hessian_ridge: float = HESSIAN_RIDGE

    def __post_init__(self):
        if self.method not in ATTACK_METHODS:
            raise ParameterException(
                "'%s' is not an attack method; expected one of %s" % (
                    self.method, ', '.join(ATTACK_METHODS)))
        if not self.epsilon > 0:
            raise ParameterException(
                "Step size epsilon must be positive, got %r" % (self.epsilon,))
        if self.penalty < 0 or self.confidence < 0 or self.hessian_ridge < 0:
            raise ParameterException(
                "lambda, confidence and ridge must be non-negative,"
                " got %r, %r, %r" % (self.penalty, self.confidence,
                                     self.hessian_ridge))
        if self.max_iterations < 0:
            raise ParameterException(
                "Iteration budget must be non-negative, got %r" % (
                    self.max_iterations,))

    def replace(self, **changes):
        """Copy with some fields changed."""
        return replace(self, **changes)

    def as_dict(self):
        return {
            'method': self.method,
            'epsilon': self.epsilon,
            'lambda': self.penalty,
            'confidence': self.confidence,
            'max_iterations': self.max_iterations,
            'cost': self.cost.describe(),
            'hessian_ridge': self.hessian_ridge,
        }


class AttackResult(object):

    """
    Outcome of attacking one example.

    Attributes:
        adversarial (Image): Attacked image, pixels in ``[0, 1]``.
        success (bool): The prediction on ``adversarial`` differs from the
            label.
        iterations_used (int): Updates applied before termination.
        margin (float): ``max_{i != y} logits_i - logits_y`` at termination.
        distances (Distances): L1, L2, Linf and ``1 - SSIM`` to the
            original.
        degenerate (bool): The loss gradient vanished, or the perceptual
            ascent found no step that keeps its objective from falling.
    """
    #pylint: disable=too-few-public-methods,too-many-arguments

    def __init__(self, adversarial, success, iterations_used, margin,
                 distances, degenerate=False):
        self.adversarial = adversarial
        self.success = success
        self.iterations_used = iterations_used
        self.margin = margin
        self.distances = distances
        self.degenerate = degenerate

    def __repr__(self):
        return "AttackResult(success=%r, iterations=%d, margin=%.4g)" % (
            self.success, self.iterations_used, self.margin)


class RobustLossValue(object):

    """
    Value of the robust surrogate loss at one example.

    Attributes:
        value (float): ``loss(attack_point) - lambda * c0(x0, attack_point)``.
        attack_point (Image): Best point found by the inner ascent.
        loss (float): Loss at ``attack_point``.
        cost (float): ``c0(x0, attack_point)``.
    """
    #pylint: disable=too-few-public-methods

    def __init__(self, value, attack_point, loss, cost):
        self.value = value
        self.attack_point = attack_point
        self.loss = loss
        self.cost = cost


SuccessReport = namedtuple(
    'SuccessReport', 'rate attacked eligible mean_distances results')
SuccessReport.__doc__ = """\
Attack success over a dataset.

``rate`` is ``attacked / eligible``; ``eligible`` counts correctly
classified examples and ``attacked`` those whose label flipped.
``mean_distances`` averages over the flipped examples; ``results`` pairs
every eligible dataset index with its ``AttackResult``.
"""


def logit_margin(logits, label):
    """``max_{i != label} logits_i - logits_label``."""
    others = np.delete(np.asarray(logits, dtype=np.float64), label)
    return float(others.max() - logits[label])


def report_ssim_config(shape):
    """SSIM configuration used for the ``one_minus_ssim`` distance column.

    Windowed SSIM when the image holds the standard window, global SSIM
    otherwise.
    """
    cfg = SsimConfig()
    if shape[0] < cfg.window_size or shape[1] < cfg.window_size:
        return SsimConfig(mode='global')
    return cfg


def measure_distances(original, adversarial):
    """Distances reported for an attack."""
    return Distances(
        lp_distance(original, adversarial, 1),
        lp_distance(original, adversarial, 2),
        lp_distance(original, adversarial, 'inf'),
        1.0 - ssim_array(original.pixels, adversarial.pixels,
                         report_ssim_config(original.shape)))


def _result(model, example, adversarial, iterations, degenerate=False):
    logits = forward_logits(model, adversarial)
    return AttackResult(
        adversarial=adversarial,
        success=bool(int(np.argmax(logits)) != example.label),
        iterations_used=iterations,
        margin=logit_margin(logits, example.label),
        distances=measure_distances(example.image, adversarial),
        degenerate=degenerate)


def _unit(vector, what):
    norm = float(np.linalg.norm(vector))
    if norm == 0.0:
        raise DegenerateGradientException("%s is zero" % what)
    if not math.isfinite(norm):
        raise NumericException("%s is not finite" % what)
    return vector / norm


def check_method_cost(cfg, allow_debug=False):
    """Reject a method/cost pairing the method cannot run.

    Raises:
        CapabilityException: ``ssim_one_step`` with a cost lacking Hessian
            support.
    """
    if cfg.method == 'ssim_one_step' and not (
            cfg.cost.supports_hessian or allow_debug):
        raise CapabilityException(
            "Method %s needs the Hessian of its cost; cost %r has none" % (
                cfg.method, cfg.cost))


def ssim_one_step_attack(model, example, cfg, allow_debug=False):
    """One step along the cost-Hessian-preconditioned loss gradient.

    Solves ``(H + mu I) delta = grad loss`` with
    ``mu = hessian_ridge * trace(H) / n`` by Cholesky factorization and sets
    ``x_adv = clamp(x0 + epsilon * delta / ||delta||)``.

    Args:
        model (Model): Attacked classifier.
        example (LabeledExample): Original image and label.
        cfg (AttackConfig): Uses ``epsilon``, ``cost``, ``hessian_ridge``.
        allow_debug (bool, optional): Accept costs without Hessian support
            (the ``l2`` cost reduces the attack to ``pgd_one_step``).

    Returns:
        AttackResult: One-step result.

    Raises:
        CapabilityException: Cost without Hessian support.
        DegenerateGradientException: Loss gradient is zero.
        NumericException: Factorization failed after regularization.
    """
    check_method_cost(cfg.replace(method='ssim_one_step'), allow_debug)
    original = example.image
    gradient = _unit(input_gradient(model, original, example.label),
                     "Loss gradient")
    hessian = cost_hessian_at_base(cfg.cost, original,
                                   allow_debug=allow_debug).matrix
    ridge = cfg.hessian_ridge * np.trace(hessian) / hessian.shape[0]
    system = hessian + ridge * np.eye(hessian.shape[0])
    try:
        factor = cho_factor(system)
    except LinAlgError as error:
        raise NumericException(
            "Cost Hessian is not positive definite after a ridge of %g: %s" % (
                ridge, error))
    direction = _unit(cho_solve(factor, gradient), "Preconditioned direction")
    adversarial = validate_image(Image(
        original.pixels + cfg.epsilon * direction.reshape(original.shape)))
    return _result(model, example, adversarial, 1)


def pgd_one_step_attack(model, example, cfg):
    """``x0 + epsilon * grad / ||grad||``, clamped.

    Raises:
        DegenerateGradientException: Loss gradient is zero.
    """
    original = example.image
    direction = _unit(input_gradient(model, original, example.label),
                      "Loss gradient")
    adversarial = validate_image(Image(
        original.pixels + cfg.epsilon * direction.reshape(original.shape)))
    return _result(model, example, adversarial, 1)


def pgd_iterative_attack(model, example, cfg):
    """Repeated normalized gradient steps with confidence early stop.

    Stops before an update once the margin exceeds ``cfg.confidence``. A
    vanishing gradient ends the run at the current iterate with
    ``degenerate`` set.
    """
    pixels = example.image.pixels
    for iteration in range(cfg.max_iterations):
        logits, _, gradient = evaluate_point(model, pixels, example.label)
        if logit_margin(logits, example.label) > cfg.confidence:
            return _result(model, example, Image(pixels), iteration)
        norm = float(np.linalg.norm(gradient))
        if norm == 0.0:
            logger.debug("PGD gradient vanished at iteration %d", iteration)
            return _result(model, example, Image(pixels), iteration, True)
        pixels = validate_image(
            Image(pixels + cfg.epsilon * gradient / norm)).pixels
    return _result(model, example, Image(pixels), cfg.max_iterations)


def _objective(cfg, original, pixels, loss):
    if not cfg.penalty:
        return loss
    return loss - cfg.penalty * cfg.cost.value_array(original, pixels)


def _ascent(model, example, cfg):
    """Iterates of the penalized ascent under monotone step acceptance.

    Yields ``(updates_done, pixels, logits, loss, stalled)`` before every
    update and once after the last one. A trial step that lowers
    ``loss - lambda * c0`` is rejected and retried at half the length. When
    ``ASCENT_MAX_HALVINGS`` halvings find no acceptable step the current
    iterate is yielded again with ``stalled`` set and the ascent ends.
    """
    original = example.image.pixels
    pixels = original
    logits, loss, gradient = evaluate_point(model, pixels, example.label)
    value = _objective(cfg, original, pixels, loss)
    for iteration in range(1, cfg.max_iterations + 1):
        yield iteration - 1, pixels, logits, loss, False
        delta = gradient
        if cfg.penalty:
            delta = delta - cfg.penalty * cfg.cost.gradient_array(original,
                                                                  pixels)
        if not np.all(np.isfinite(delta)):
            raise NumericException(
                "Ascent direction is not finite at iteration %d" % iteration)
        step = cfg.epsilon
        for _ in range(ASCENT_MAX_HALVINGS + 1):
            trial = validate_image(Image(pixels + step * delta)).pixels
            point = evaluate_point(model, trial, example.label)
            trial_value = _objective(cfg, original, trial, point[1])
            if trial_value >= value:
                break
            step /= 2.0
        else:
            logger.debug("Ascent stalled at iteration %d", iteration)
            yield iteration - 1, pixels, logits, loss, True
            return
        pixels, value = trial, trial_value
        logits, loss, gradient = point
    yield cfg.max_iterations, pixels, logits, loss, False


def _stops(cfg, updates, logits, label, stalled):
    return stalled or updates == cfg.max_iterations or \
        logit_margin(logits, label) > cfg.confidence


def perceptual_attack(model, example, cfg):
    """Ascend ``loss - lambda * c0(x0, .)`` until the margin exceeds ``a``.

    Each iteration evaluates the logits and returns as soon as
    ``max_{i != y} logits_i - logits_y > a``; otherwise it steps by
    ``epsilon * (grad loss - lambda * grad c0)`` and clamps. A step that
    lowers the penalized objective is halved until it does not; a run whose
    halvings are exhausted ends at the current iterate with ``degenerate``
    set. ``max_iterations=0`` returns ``x0`` itself.

    Args:
        model (Model): Attacked classifier.
        example (LabeledExample): Original image and label.
        cfg (AttackConfig): Uses ``epsilon``, ``penalty``, ``confidence``,
            ``max_iterations`` and ``cost``.

    Returns:
        AttackResult: Final iterate, whether or not the label flipped.

    Raises:
        NumericException: Non-finite ascent direction; the message names
            the iteration.
    """
    for updates, pixels, logits, _, stalled in _ascent(model, example, cfg):
        if _stops(cfg, updates, logits, example.label, stalled):
            return _result(model, example, Image(pixels), updates, stalled)


def penalized_objective(model, example, image, cfg):
    """``loss(theta; image, y0) - lambda * c0(x0, image)``."""
    return cross_entropy_loss(model, image, example.label) - \
        cfg.penalty * cfg.cost.value(example.image, image)


def robust_surrogate(model, example, cfg):
    """Lower bound on ``sup_x loss(theta; x, y0) - lambda * c0(x0, x)``.

    Runs the ascent of ``perceptual_attack`` and keeps the best penalized
    objective met along the way, the starting point included.

    Returns:
        RobustLossValue: Best value and the point achieving it.
    """
    best = None
    for updates, pixels, logits, loss, stalled in _ascent(model, example,
                                                          cfg):
        cost = cfg.cost.value_array(example.image.pixels, pixels)
        value = loss - cfg.penalty * cost
        if best is None or value > best[0]:
            best = (value, pixels, loss, cost)
        if _stops(cfg, updates, logits, example.label, stalled):
            break
    value, pixels, loss, cost = best
    return RobustLossValue(value, Image(pixels), loss, cost)


ATTACKS = {
    'ssim_one_step': ssim_one_step_attack,
    'pgd_one_step': pgd_one_step_attack,
    'pgd_iterative': pgd_iterative_attack,
    'perceptual': perceptual_attack,
}


def run_attack(model, example, cfg):
    """Dispatch to the attack named by ``cfg.method``."""
    return ATTACKS[cfg.method](model, example, cfg)


def _attack_or_unchanged(model, example, cfg):
    try:
        return run_attack(model, example, cfg)
    except DegenerateGradientException:
        logger.debug("Zero loss gradient; example left unchanged")
        return _result(model, example, example.image, 0, True)


def _mean_distances(results):
    flipped = [result.distances for result in results if result.success]
    if not flipped:
        return NAN_DISTANCES
    return Distances(*np.mean(np.asarray(flipped, dtype=np.float64), axis=0))


def success_rate(model, dataset, cfg, workers=None):
    """Fraction of correctly classified examples whose label the attack flips.

    Examples whose loss gradient vanishes count as not flipped.

    Args:
        model (Model): Attacked classifier.
        dataset (Dataset): Examples to attack.
        cfg (AttackConfig): Attack to run.
        workers (int, optional): Worker count for the per-image attacks.

    Returns:
        SuccessReport: Rate, counts, mean distances over flipped examples
        and the per-example results.

    Raises:
        CapabilityException: Method cannot run with the configured cost.
        UndefinedRateException: No example is correctly classified.
    """
    check_method_cost(cfg)
    correct = np.flatnonzero(predict(model, dataset.images) == dataset.labels)
    if not correct.size:
        raise UndefinedRateException(
            "No correctly classified example among %d; success rate is"
            " undefined" % len(dataset))
    results = ordered_map(
        lambda index: _attack_or_unchanged(model, dataset[index], cfg),
        correct, workers)
    attacked = sum(1 for result in results if result.success)
    logger.info("%s attack flipped %d of %d eligible examples",
                cfg.method, attacked, correct.size)
    return SuccessReport(
        rate=attacked / float(correct.size),
        attacked=attacked,
        eligible=int(correct.size),
        mean_distances=_mean_distances(results),
        results=list(zip(correct.tolist(), results)))


def defense_success_rate(model, dataset, cfg, defense, workers=None,
                         report=None):
    """Success rate once the defense transforms each adversarial image.

    An eligible example counts as attacked when the model misclassifies the
    defended adversarial image.

    Args:
        defense (Defense): Input transformation applied before
            classification.
        report (SuccessReport, optional): Attacks already computed by
            ``success_rate`` with the same model, dataset and config.

    Returns:
        float: Defended success rate.
    """
    if report is None:
        report = success_rate(model, dataset, cfg, workers)
    defended = np.stack([defense.apply(result.adversarial).pixels
                         for _, result in report.results])
    labels = dataset.labels[[index for index, _ in report.results]]
    flipped = int(np.count_nonzero(predict(model, defended) != labels))
    return flipped / float(report.eligible)


def defense_sweep(model, dataset, cfg, defenses, workers=None):
    """Defended success rates for several defenses over one set of attacks.

    Returns:
        list of tuple: ``(defense, rate)`` in input order.
    """
    report = success_rate(model, dataset, cfg, workers)
    return [(defense, defense_success_rate(model, dataset, cfg, defense,
                                           report=report))
            for defense in defenses]


def ablation_sweep(model, dataset, cfg, penalties, epsilons, workers=None):
    """Success rate and perceptual distance over a grid of lambda and epsilon.

    Returns:
        list of tuple: ``(lambda, epsilon, rate, mean one_minus_ssim)`` with
        lambda varying slowest.
    """
    rows = []
    for penalty in penalties:
        for epsilon in epsilons:
            report = success_rate(
                model, dataset, cfg.replace(penalty=penalty, epsilon=epsilon),
                workers)
            rows.append((penalty, epsilon, report.rate,
                         report.mean_distances.one_minus_ssim))
    return rows


def attack_report_rows(report, cfg):
    """Rows of the attack report CSV, one per eligible example."""
    for index, result in report.results:
        yield (index, cfg.method, cfg.confidence, cfg.epsilon, cfg.penalty,
               result.success, result.iterations_used) + tuple(
                   result.distances)
