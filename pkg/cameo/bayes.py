"""
Beta-Binomial criterion for the positive-delay proportion of a pair.

The posterior of the proportion pi of positive delays is
Beta(alpha + x, beta + n - x); a pair passes when
P(pi > pi_threshold) >= confidence. The Beta CDF is evaluated with the
regularized incomplete beta function (continued fraction, modified Lentz).
"""
import math

from .schema import CriterionConfig, PosteriorParams, PriorConfig

EPS = 1e-15
TINY = 1e-300
MAX_ITERATIONS = 10000


def posterior(x: int, n: int, prior: PriorConfig = PriorConfig()) -> PosteriorParams:
    if n < 0 or x < 0 or x > n:
        raise ValueError(f"need 0 <= x <= n, got x={x}, n={n}")
    return PosteriorParams(a=prior.alpha + x, b=prior.beta + n - x)


def _continued_fraction(z: float, a: float, b: float) -> float:
    qab = a + b
    qap = a + 1.0
    qam = a - 1.0
    c = 1.0
    d = 1.0 - qab * z / qap
    if abs(d) < TINY:
        d = TINY
    d = 1.0 / d
    h = d
    for m in range(1, MAX_ITERATIONS + 1):
        m2 = 2 * m
        aa = m * (b - m) * z / ((qam + m2) * (a + m2))
        d = 1.0 + aa * d
        if abs(d) < TINY:
            d = TINY
        c = 1.0 + aa / c
        if abs(c) < TINY:
            c = TINY
        d = 1.0 / d
        h *= d * c
        aa = -(a + m) * (qab + m) * z / ((a + m2) * (qap + m2))
        d = 1.0 + aa * d
        if abs(d) < TINY:
            d = TINY
        c = 1.0 + aa / c
        if abs(c) < TINY:
            c = TINY
        d = 1.0 / d
        step = d * c
        h *= step
        if abs(step - 1.0) < EPS:
            return h
    raise ArithmeticError(f"incomplete beta did not converge for z={z}, a={a}, b={b}")


def reg_inc_beta(z: float, a: float, b: float) -> float:
    """I_z(a, b), the Beta(a, b) CDF at z."""
    if not (a > 0 and b > 0):
        raise ValueError(f"shape parameters must be positive, got a={a}, b={b}")
    if not 0.0 <= z <= 1.0:
        raise ValueError(f"z must lie in [0, 1], got {z}")
    if z == 0.0:
        return 0.0
    if z == 1.0:
        return 1.0
    if z > (a + 1.0) / (a + b + 2.0):
        return 1.0 - _lower_tail(1.0 - z, b, a)
    return _lower_tail(z, a, b)


def _lower_tail(z: float, a: float, b: float) -> float:
    log_front = (a * math.log(z) + b * math.log1p(-z)
                 + math.lgamma(a + b) - math.lgamma(a) - math.lgamma(b))
    return math.exp(log_front) * _continued_fraction(z, a, b) / a


def _upper_tail(z: float, a: float, b: float) -> float:
    # 1 - I_z(a, b) without cancellation when the tail is tiny
    if z > (a + 1.0) / (a + b + 2.0):
        return _lower_tail(1.0 - z, b, a)
    return 1.0 - _lower_tail(z, a, b)


def prob_pi_exceeds(threshold: float, post: PosteriorParams) -> float:
    if not 0.0 < threshold < 1.0:
        raise ValueError(f"threshold must lie in (0, 1), got {threshold}")
    return _upper_tail(threshold, post.a, post.b)


def passes_filter1(x: int, n: int, prior: PriorConfig = PriorConfig(),
                   crit: CriterionConfig = CriterionConfig()) -> bool:
    """At least `confidence` posterior probability that pi exceeds `pi_threshold` (boundary passes)."""
    return prob_pi_exceeds(crit.pi_threshold, posterior(x, n, prior)) >= crit.confidence
