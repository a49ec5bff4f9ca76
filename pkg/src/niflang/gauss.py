"""Scalar Gaussian kernel: density, distribution function, quantiles,
central-mass intervals and seeded sampling.

All operations take an explicit (mean, variance) pair; variance == 0 is the
legal degenerate case (a point mass) and is handled wherever the result is
well defined.  The error function is evaluated in-house to ~1e-14 absolute
accuracy with a Maclaurin series for small arguments and a continued
fraction for the tails, so the golden decision probabilities used by the
verification report do not depend on platform libm behaviour.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache

from .rng import RngStream

# Series/fraction normalizers.  Tests perturb _TWO_OVER_SQRT_PI to prove the
# verification report actually exercises this implementation.
_TWO_OVER_SQRT_PI = 1.1283791670955126  # 2/sqrt(pi)
_ONE_OVER_SQRT_PI = 0.5641895835477563  # 1/sqrt(pi)
_SQRT_HALF = 0.7071067811865476  # 1/sqrt(2)
_SQRT_TAU = 2.5066282746310002  # sqrt(2*pi)

_SERIES_CUTOFF = 3.0  # series below, continued fraction above


class DegenerateVarianceError(ValueError):
    """An operation that requires variance > 0 was given a point mass."""


@dataclass(frozen=True)
class GaussianParams:
    """Mean/variance pair; variance == 0 denotes the degenerate point mass."""

    mean: float
    variance: float

    def __post_init__(self):
        if not self.variance >= 0.0:
            raise ValueError(f"variance must be >= 0, got {self.variance!r}")

    @property
    def sigma(self) -> float:
        return math.sqrt(self.variance)


@dataclass(frozen=True)
class Interval:
    """Symmetric decision interval.

    Empty and unbounded intervals are tagged variants rather than IEEE
    infinities, so serialized logs stay free of `inf` literals.
    """

    kind: str  # "empty" | "bounded" | "unbounded"
    lo: float = math.nan
    hi: float = math.nan

    @classmethod
    def empty(cls) -> "Interval":
        return cls("empty")

    @classmethod
    def unbounded(cls) -> "Interval":
        return cls("unbounded")

    @classmethod
    def bounded(cls, lo: float, hi: float) -> "Interval":
        return cls("bounded", float(lo), float(hi))

    @property
    def is_empty(self) -> bool:
        return self.kind == "empty"

    @property
    def is_unbounded(self) -> bool:
        return self.kind == "unbounded"

    def contains(self, x: float) -> bool:
        if self.kind == "empty":
            return False
        if self.kind == "unbounded":
            return True
        return self.lo <= x <= self.hi

    def endpoint_text(self) -> tuple[str, str]:
        """(q1, q2) rendered for log output; tags for the unbounded/empty cases."""
        if self.kind == "bounded":
            return (f"{self.lo:.9g}", f"{self.hi:.9g}")
        return (self.kind, self.kind)


def _erf_series(x: float) -> float:
    # erf(x) = 2/sqrt(pi) * sum_n (-1)^n x^(2n+1) / (n! (2n+1)); fine up to
    # |x| ~ 3 where cancellation costs at most a few hundred ulp.
    x2 = x * x
    term = x  # running (-1)^n x^(2n+1) / n!
    total = x
    for n in range(1, 160):
        term *= -x2 / n
        delta = term / (2 * n + 1)
        total += delta
        if abs(delta) <= 1e-17 * abs(total):
            break
    return _TWO_OVER_SQRT_PI * total

def _erfc_fraction(x: float) -> float:
    # erfc(x) = exp(-x^2)/sqrt(pi) * 1/(x + (1/2)/(x + 1/(x + (3/2)/(x + ...))))
    # evaluated with the modified Lentz scheme; rapid for x above the cutoff.
    tiny = 1e-300
    f = tiny
    c = f
    d = 0.0
    a = 1.0
    for k in range(1, 240):
        d = x + a * d
        if d == 0.0:
            d = tiny
        c = x + a / c
        if c == 0.0:
            c = tiny
        d = 1.0 / d
        delta = c * d
        f *= delta
        if abs(delta - 1.0) < 1e-17:
            break
        a = 0.5 * k
    return math.exp(-x * x) * _ONE_OVER_SQRT_PI * f


def erf(x: float) -> float:
    """Error function (odd; erf(inf) = 1)."""
    if x < 0.0:
        return -erf(-x)
    if x <= _SERIES_CUTOFF:
        return _erf_series(x)
    return 1.0 - _erfc_fraction(x)


def erfc(x: float) -> float:
    """Complementary error function, accurate in the far tail."""
    if x < 0.0:
        return 2.0 - erfc(-x)
    if x <= _SERIES_CUTOFF:
        return 1.0 - _erf_series(x)
    return _erfc_fraction(x)


def _std_cdf(z: float) -> float:
    """Standard normal distribution function, tail-accurate via erfc."""
    u = z * _SQRT_HALF
    if u < 0.0:
        return 0.5 * erfc(-u)
    return 1.0 - 0.5 * erfc(u)


def pdf(x: float, p: GaussianParams) -> float:
    """Gaussian density; rejects the degenerate case (no density exists)."""
    if p.variance == 0.0:
        raise DegenerateVarianceError("pdf is undefined for variance = 0")
    sigma = p.sigma
    z = (x - p.mean) / sigma
    return math.exp(-0.5 * z * z) / (sigma * _SQRT_TAU)


def cdf(x: float, p: GaussianParams) -> float:
    """Distribution function.

    For variance == 0 this is the step function with the `>=` tie
    convention: cdf(mean) == 1.
    """
    if p.variance == 0.0:
        return 1.0 if x >= p.mean else 0.0
    return _std_cdf((x - p.mean) / p.sigma)


@lru_cache(maxsize=65536)
def _std_inv_cdf(q: float) -> float:
    # Bisection on _std_cdf down to a 1e-12 bracket.  The bracket is found
    # by doubling; both loops are bounded because the double-precision cdf
    # saturates at 0/1 well inside |z| < 48.
    lo, hi = -6.0, 6.0
    while _std_cdf(lo) > q and lo > -400.0:
        lo *= 2.0
    while _std_cdf(hi) < q and hi < 400.0:
        hi *= 2.0
    for _ in range(220):
        mid = 0.5 * (lo + hi)
        if not lo < mid < hi:
            break
        if _std_cdf(mid) < q:
            lo = mid
        else:
            hi = mid
        if hi - lo <= 1e-12:
            break
    return 0.5 * (lo + hi)


def inv_cdf(q: float, p: GaussianParams) -> float:
    """Quantile function; bisection, so cdf(inv_cdf(q)) == q to ~4e-13."""
    if not 0.0 < q < 1.0:
        raise ValueError(f"quantile must lie strictly in (0, 1), got {q!r}")
    if p.variance == 0.0:
        raise DegenerateVarianceError("inv_cdf is undefined for variance = 0")
    return p.mean + p.sigma * _std_inv_cdf(q)


def central_interval(mass: float, sigma2: float) -> Interval:
    """Zero-centered interval [q1, q2] with q1 = -q2 holding `mass` of
    N(0, sigma2).

    mass == 0 gives the empty interval, mass == 1 the unbounded one.  For
    sigma2 == 0 the whole distribution sits at zero, so any intermediate
    mass collapses to the point interval [0, 0].
    """
    if not 0.0 <= mass <= 1.0:
        raise ValueError(f"mass must lie in [0, 1], got {mass!r}")
    if sigma2 < 0.0:
        raise ValueError(f"sigma2 must be >= 0, got {sigma2!r}")
    if mass == 0.0:
        return Interval.empty()
    if mass >= 1.0:
        return Interval.unbounded()
    if sigma2 == 0.0:
        return Interval.bounded(0.0, 0.0)
    half = abs(math.sqrt(sigma2) * _std_inv_cdf(0.5 * (1.0 + mass)))
    return Interval.bounded(-half, half)


def sample(p: GaussianParams, rng: RngStream) -> float:
    """One draw; the degenerate case returns the mean without consuming rng."""
    if p.variance == 0.0:
        return p.mean
    return p.mean + p.sigma * rng.standard_normal()
