"""The nif/nwhile decision engine.

A smooth guard `x # a` with uncertainty sigma2 is evaluated in two steps:
first the signed margin of the comparison (`diff`) fixes the probability
p = cdf_{0,sigma2}(diff) of taking the first branch, realized as the
zero-centered interval holding mass p; then one draw from N(0, sigma2) is
tested for membership in that interval.  Because the interval holds exactly
mass p under the same distribution the draw comes from, the decision is
Bernoulli(p), and sigma2 == 0 degenerates to the classical comparison.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum

from .gauss import GaussianParams, Interval, central_interval, cdf, sample
from .rng import RngStream


class CmpOp(Enum):
    GT = ">"
    GE = ">="
    LT = "<"
    LE = "<="


def _ulp_below(a: float) -> float:
    """Smallest eps with a - eps < a at the magnitude of a (one ulp down)."""
    return a - math.nextafter(a, -math.inf)


def diff(x: float, a: float, op: CmpOp) -> float:
    """Signed margin of the comparison `x op a`.

    Strict operators are offset by one ulp below `a`, so `diff >= 0` is
    exactly the truth value of the comparison in floating point.
    """
    if op is CmpOp.GT:
        return x - a - _ulp_below(a)
    if op is CmpOp.GE:
        return x - a
    if op is CmpOp.LT:
        return a - x - _ulp_below(a)
    if op is CmpOp.LE:
        return a - x
    raise TypeError(f"not a comparison operator: {op!r}")


def branch_prob(d: float, sigma2: float) -> float:
    """Probability of taking the first branch given margin d.

    Strictly increasing in d for sigma2 > 0; the step function 1{d >= 0}
    for sigma2 == 0.
    """
    if sigma2 < 0.0:
        raise ValueError(f"sigma2 must be >= 0, got {sigma2!r}")
    if sigma2 == 0.0:
        return 1.0 if d >= 0.0 else 0.0
    return cdf(d, GaussianParams(0.0, sigma2))


@dataclass(frozen=True)
class GuardResult:
    """Outcome of one guard evaluation.

    Only `taken` drives control flow; prob, interval and the drawn sample
    are exposed for logging and statistical verification.  By construction
    taken == interval.contains(drawn_sample).
    """

    taken: bool
    prob: float
    interval: Interval
    drawn_sample: float


def check(x: float, a: float, sigma2: float, op: CmpOp, rng: RngStream) -> GuardResult:
    """Evaluate the guard `x op a` under uncertainty sigma2.

    Draws exactly one sample per evaluation.  sigma2 == 0 short-circuits to
    the deterministic comparison: the interval is unbounded when the margin
    is nonnegative (probability 1) and empty otherwise (probability 0), and
    the degenerate draw is 0.
    """
    d = diff(x, a, op)
    if sigma2 < 0.0:
        raise ValueError(f"sigma2 must be >= 0, got {sigma2!r}")
    if sigma2 == 0.0:
        taken = d >= 0.0
        interval = Interval.unbounded() if taken else Interval.empty()
        return GuardResult(taken, 1.0 if taken else 0.0, interval, 0.0)
    p = branch_prob(d, sigma2)
    interval = central_interval(p, sigma2)
    s = sample(GaussianParams(0.0, sigma2), rng)
    return GuardResult(interval.contains(s), p, interval, s)
