# -*- coding: utf-8 -*-
"""
Every failure raised by this package derives from
``PerceptualDroException`` so callers (the command-line surface in
particular) can tell a numerical or data problem apart from a programming
error.

The narrower classes let the caller distinguish a malformed input file from
an out-of-range parameter, a shape mismatch, or a computation that broke
down numerically.
"""


class PerceptualDroException(Exception):
    """Base Exception class for perceptual DRO errors."""
    pass

class FormatException(PerceptualDroException):
    """Exception class for malformed IDX, PGM, CSV or checkpoint files."""
    pass

class ConsistencyException(PerceptualDroException):
    """Exception class for inputs that disagree with each other."""
    pass

class ParameterException(PerceptualDroException):
    """Exception class for out-of-range arguments and config values."""
    pass

class DimensionException(PerceptualDroException):
    """Exception class for image or vector shape mismatches."""
    pass

class NumericException(PerceptualDroException):
    """Exception class for non-finite values and failed factorizations."""
    pass

class CapabilityException(PerceptualDroException):
    """Exception class for unsupported cost, mode or method combinations."""
    pass

class SizeException(PerceptualDroException):
    """Exception class for dense computations over their size budget."""
    pass

class DegenerateGradientException(NumericException):
    """Exception class for a vanishing loss gradient in a one-step attack."""
    pass

class UndefinedRateException(PerceptualDroException):
    """Exception class for a success rate over zero eligible examples."""
    pass

class RankException(PerceptualDroException):
    """Exception class for a rank-deficient regression design."""
    pass

class UndefinedStatisticException(PerceptualDroException):
    """Exception class for a test statistic of the form 0/0."""
    pass
