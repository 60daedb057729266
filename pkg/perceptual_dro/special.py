# -*- coding: utf-8 -*-
"""
Special functions behind the hypothesis tests.

The regularized incomplete beta function is evaluated by its continued
fraction with the modified Lentz method, switching to the symmetric form
``I_x(a, b) = 1 - I_{1-x}(b, a)`` when ``x`` lies beyond the mean of the
beta distribution so the fraction converges quickly. The F and Student-t
upper tails are both expressed through it.
"""
import math

from .exceptions import NumericException, ParameterException

LANCZOS_G = 7
LANCZOS_COEFFICIENTS = (
    0.99999999999980993,
    676.5203681218851,
    -1259.1392167224028,
    771.32342877765313,
    -176.61502916214059,
    12.507343278686905,
    -0.13857109526572012,
    9.9843695780195716e-6,
    1.5056327351493116e-7,
)

# Lentz iteration limits.
MAX_ITERATIONS = 500
EPSILON = 1e-15
TINY = 1e-300


def log_gamma(x):
    """Natural logarithm of the gamma function for ``x > 0``.

    Raises:
        ParameterException: ``x <= 0``.
    """
    if not x > 0:
        raise ParameterException("log_gamma needs x > 0, got %r" % (x,))
    if x < 0.5:
        # reflection
        return math.log(math.pi / math.sin(math.pi * x)) - log_gamma(1.0 - x)
    x -= 1.0
    series = LANCZOS_COEFFICIENTS[0]
    for index, coefficient in enumerate(LANCZOS_COEFFICIENTS[1:], 1):
        series += coefficient / (x + index)
    shifted = x + LANCZOS_G + 0.5
    return 0.5 * math.log(2.0 * math.pi) + (x + 0.5) * math.log(shifted) \
        - shifted + math.log(series)


def log_beta(a, b):
    """``log B(a, b)``."""
    return log_gamma(a) + log_gamma(b) - log_gamma(a + b)


def _beta_fraction(a, b, x):
    """Continued fraction of the incomplete beta function (Lentz)."""
    total = a + b
    above = a + 1.0
    below = a - 1.0
    c = 1.0
    d = 1.0 - total * x / above
    d = 1.0 / (d if abs(d) > TINY else TINY)
    result = d
    for step in range(1, MAX_ITERATIONS + 1):
        twice = 2 * step
        for numerator in (
                step * (b - step) * x / ((below + twice) * (a + twice)),
                -(a + step) * (total + step) * x / (
                    (a + twice) * (above + twice))):
            d = 1.0 + numerator * d
            d = 1.0 / (d if abs(d) > TINY else TINY)
            c = 1.0 + numerator / c
            c = c if abs(c) > TINY else TINY
            delta = c * d
            result *= delta
        if abs(delta - 1.0) < EPSILON:
            return result
    raise NumericException(
        "Incomplete beta continued fraction did not converge for a=%g, b=%g,"
        " x=%g" % (a, b, x))


def regularized_incomplete_beta(x, a, b):
    """``I_x(a, b)``, the beta distribution function.

    Args:
        x (float): Point in ``[0, 1]``.
        a (float): First shape parameter, positive.
        b (float): Second shape parameter, positive.

    Returns:
        float: Value in ``[0, 1]``.

    Raises:
        ParameterException: Shape parameters not positive or ``x`` outside
            ``[0, 1]``.
        NumericException: The continued fraction did not converge.
    """
    if not (a > 0 and b > 0):
        raise ParameterException(
            "Incomplete beta needs a, b > 0, got %r, %r" % (a, b))
    if not 0.0 <= x <= 1.0:
        raise ParameterException(
            "Incomplete beta needs x in [0, 1], got %r" % (x,))
    if x == 0.0 or x == 1.0:
        return float(x)
    log_front = a * math.log(x) + b * math.log1p(-x) - log_beta(a, b)
    if x < (a + 1.0) / (a + b + 2.0):
        value = math.exp(log_front) * _beta_fraction(a, b, x) / a
    else:
        value = 1.0 - math.exp(log_front) * _beta_fraction(b, a, 1.0 - x) / b
    return min(1.0, max(0.0, value))


def f_survival(statistic, nu1, nu2):
    """Upper tail ``P(F > statistic)`` of the F distribution.

    Args:
        statistic (float): Non-negative F statistic.
        nu1 (int): Numerator degrees of freedom.
        nu2 (int): Denominator degrees of freedom.

    Raises:
        ParameterException: Degrees of freedom below 1 or negative
            statistic.

    Example:

        >>> round(f_survival(5.392, 1, 39), 4)
        0.0255

    """
    if nu1 < 1 or nu2 < 1:
        raise ParameterException(
            "F degrees of freedom must be >= 1, got %r and %r" % (nu1, nu2))
    if statistic < 0:
        raise ParameterException(
            "F statistic must be non-negative, got %r" % (statistic,))
    if math.isinf(statistic):
        return 0.0
    return regularized_incomplete_beta(
        nu2 / (nu2 + nu1 * statistic), nu2 / 2.0, nu1 / 2.0)


def t_survival(statistic, df):
    """One-sided upper tail ``P(T > statistic)`` of Student's t.

    Raises:
        ParameterException: ``df <= 0``.
    """
    if not df > 0:
        raise ParameterException(
            "t degrees of freedom must be positive, got %r" % (df,))
    if statistic == 0:
        return 0.5
    if math.isinf(statistic):
        return 0.0 if statistic > 0 else 1.0
    tail = 0.5 * regularized_incomplete_beta(
        df / (df + statistic * statistic), df / 2.0, 0.5)
    return tail if statistic > 0 else 1.0 - tail
