"""Student t tail probabilities via the regularized incomplete beta function."""
from __future__ import annotations

import math
from typing import NamedTuple, Sequence

_EPS = 1e-16
_TINY = 1e-300


def _betacf(a: float, b: float, x: float, max_iter: int = 10000) -> float:
    """Continued fraction for I_x(a, b), modified Lentz evaluation."""
    qab, qap, qam = a + b, a + 1.0, a - 1.0
    c, d = 1.0, 1.0 - qab * x / qap
    if abs(d) < _TINY:
        d = _TINY
    d = 1.0 / d
    h = d
    for m in range(1, max_iter + 1):
        m2 = 2 * m
        aa = m * (b - m) * x / ((qam + m2) * (a + m2))
        d = 1.0 + aa * d
        d = _TINY if abs(d) < _TINY else d
        c = 1.0 + aa / c
        c = _TINY if abs(c) < _TINY else c
        d = 1.0 / d
        h *= d * c
        aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2))
        d = 1.0 + aa * d
        d = _TINY if abs(d) < _TINY else d
        c = 1.0 + aa / c
        c = _TINY if abs(c) < _TINY else c
        d = 1.0 / d
        delta = d * c
        h *= delta
        if abs(delta - 1.0) < _EPS:
            return h
    raise ArithmeticError(f"incomplete beta continued fraction did not converge (a={a}, b={b}, x={x})")


def betainc(a: float, b: float, x: float) -> float:
    """Regularized incomplete beta I_x(a, b) for a, b > 0 and 0 <= x <= 1."""
    if a <= 0 or b <= 0:
        raise ValueError("betainc needs a, b > 0")
    if not 0.0 <= x <= 1.0:
        raise ValueError(f"x must lie in [0, 1], got {x}")
    if x == 0.0 or x == 1.0:
        return x
    ln_front = (math.lgamma(a + b) - math.lgamma(a) - math.lgamma(b)
                + a * math.log(x) + b * math.log1p(-x))
    if x < (a + 1.0) / (a + b + 2.0):
        return math.exp(ln_front) * _betacf(a, b, x) / a
    return 1.0 - math.exp(ln_front) * _betacf(b, a, 1.0 - x) / b


def t_sf(t: float, df: float) -> float:
    """P(T > t) for Student's t with ``df`` degrees of freedom."""
    if df <= 0:
        raise ValueError("df must be positive")
    if math.isinf(t):
        return 0.0 if t > 0 else 1.0
    t2 = t * t
    if t2 < df:
        # near zero df/(df+t^2) rounds to 1; use the complementary form
        tail = 0.5 - 0.5 * betainc(0.5, df / 2.0, t2 / (df + t2))
    else:
        tail = 0.5 * betainc(df / 2.0, 0.5, df / (df + t2))
    return tail if t >= 0 else 1.0 - tail


class TTestResult(NamedTuple):
    t: float
    p: float
    df: int
    mean: float
    std: float


def mean_std(samples: Sequence[float]) -> tuple[float, float]:
    """Mean and sample (n-1) standard deviation, two-pass."""
    n = len(samples)
    mean = math.fsum(samples) / n
    var = math.fsum((s - mean) ** 2 for s in samples) / (n - 1) if n > 1 else 0.0
    return mean, math.sqrt(var)


def one_sample_t_test(samples: Sequence[float], reference: float, two_sided: bool = False) -> TTestResult:
    """Test whether the samples' mean exceeds ``reference`` (one-sided by default).

    Zero spread: t is +-inf (0 if the mean equals the reference) and p is 0
    when the mean is above the reference, 1 otherwise.
    """
    samples = [float(s) for s in samples]
    n = len(samples)
    if n < 2:
        raise ValueError("t-test needs at least two samples")
    mean, std = mean_std(samples)
    df = n - 1
    if std == 0.0:
        if mean > reference:
            return TTestResult(math.inf, 0.0, df, mean, std)
        t = 0.0 if mean == reference else -math.inf
        return TTestResult(t, 1.0, df, mean, std)
    t = (mean - reference) / (std / math.sqrt(n))
    if two_sided:
        p = betainc(df / 2.0, 0.5, df / (df + t * t))
    else:
        p = t_sf(t, df)
    return TTestResult(t, p, df, mean, std)


def t_from_summary(mean: float, std: float, n: int, reference: float) -> float:
    return (mean - reference) / (std / math.sqrt(n))
