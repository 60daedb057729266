# -*- coding: utf-8 -*-
"""
Human-imperceptible adversarial attacks under a ``1 - SSIM`` ground cost,
distributionally robust training on the attacked data and a group-fairness
audit of the resulting models.

.. note::

    Images are grayscale with intensities in ``[0, 1]``. Every random draw
    comes from a stream keyed by an explicit seed, so each command and each
    public function is reproducible from its arguments.
"""
__version__ = "0.1"

from .exceptions import PerceptualDroException
from .image import Image, LabeledExample, Dataset, validate_image, lp_distance
from .cost import SsimConfig, SsimCost, L2Cost, ssim, cost_hessian_at_base
from .classifier import Model, TrainConfig, sgd_train, accuracy
from .attack import (AttackConfig, AttackResult, RobustLossValue,
                     ssim_one_step_attack, pgd_one_step_attack,
                     pgd_iterative_attack, perceptual_attack,
                     robust_surrogate, success_rate, defense_success_rate)
from .dro import (WeightedExample, RobustDataset, DroConfig,
                  generate_robust_dataset, dro_train, sample_model_population)
from .fairness import (GroupRecord, GlsResult, TTestResult, CovarianceSpec,
                       group_accuracy, gls_fit, two_sample_t_test,
                       make_grouped_dataset, audit_population)
from .special import f_survival, t_survival
