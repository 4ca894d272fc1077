"""Worst-case utility of the protocol.

A sequence held by ``W`` of ``n`` users, sharing no prefix with any other
sequence, survives one round when at least ``theta`` of the ``m`` sampled
users hold it. That is the upper tail of a hypergeometric distribution, and
the sequence is fully learned when it survives every level.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

from .errors import ParameterError, UnsatisfiableError, ValidationError
from .privacy import choose_parameters

_LN_2PI = math.log(2.0 * math.pi)
_HALF_LN_2PI = 0.5 * _LN_2PI
_TAIL_RTOL = 1e-17


def _stirlerr(n: int) -> float:
    """``ln(n!) - [(n + 1/2) ln n - n + ln sqrt(2 pi)]`` for integer ``n >= 1``."""
    if n <= 15:
        return math.lgamma(n + 1.0) - (n + 0.5) * math.log(n) + n - _HALF_LN_2PI
    nn = float(n) * n
    return (1 / 12 - (1 / 360 - (1 / 1260 - (1 / 1680 - (1 / 1188) / nn) / nn) / nn) / nn) / n


def _bd0(x: float, np_: float) -> float:
    """Deviance term ``x ln(x/np) + np - x`` without cancellation."""
    if abs(x - np_) < 0.1 * (x + np_):
        v = (x - np_) / (x + np_)
        s = (x - np_) * v
        ej = 2.0 * x * v
        v2 = v * v
        j = 1
        while True:
            ej *= v2
            s1 = s + ej / (2 * j + 1)
            if s1 == s:
                return s
            s = s1
            j += 1
    return x * math.log(x / np_) + np_ - x


def _log_binom_pmf(x: int, size: int, p: float, q: float) -> float:
    """log P(Binomial(size, p) = x), saddle-point form."""
    if x < 0 or x > size:
        return -math.inf
    if x == 0:
        if size == 0:
            return 0.0
        return -_bd0(size, size * q) - size * p if p < 0.1 else size * math.log(q)
    if x == size:
        return -_bd0(size, size * p) - size * q if q < 0.1 else size * math.log(p)
    lc = _stirlerr(size) - _stirlerr(x) - _stirlerr(size - x) - _bd0(x, size * p) - _bd0(size - x, size * q)
    lf = _LN_2PI + math.log(x) + math.log1p(-x / size)
    return lc - 0.5 * lf


def log_hypergeom_pmf(i: int, n: int, W: int, m: int) -> float:
    """log P(X = i) for X ~ Hypergeometric(population n, W holders, m draws)."""
    if i < max(0, m - (n - W)) or i > min(W, m):
        return -math.inf
    if m == 0 or m == n:
        return 0.0
    p = m / n
    q = (n - m) / n
    return (
        _log_binom_pmf(i, W, p, q)
        + _log_binom_pmf(m - i, n - W, p, q)
        - _log_binom_pmf(m, n, p, q)
    )


def _check_query(n, m, theta, W):
    if n < 1:
        raise ParameterError(f"n >= 1 violated: n={n}")
    if not 1 <= m <= n:
        raise ParameterError(f"1 <= m <= n violated: m={m}, n={n}")
    if theta < 1:
        raise ParameterError(f"theta >= 1 violated: theta={theta}")
    if not 0 <= W <= n:
        raise ParameterError(f"0 <= W <= n violated: W={W}, n={n}")


def round_probability(n: int, m: int, theta: int, W: int) -> float:
    """P(X >= theta) for X ~ Hypergeometric(n, W, m).

    Sums whichever tail is on the far side of the mode, starting from its
    largest term and walking outward with the term ratio; the shorter side
    is subtracted from one when needed.
    """
    _check_query(n, m, theta, W)
    lo = max(0, m - (n - W))
    hi = min(W, m)
    if theta <= lo:
        return 1.0
    if theta > hi:
        return 0.0
    mode = ((m + 1) * (W + 1)) // (n + 2)
    b = n - W
    if theta > mode:
        # Upper tail: terms fall from theta upward.
        log_anchor = log_hypergeom_pmf(theta, n, W, m)
        s, t, i = 1.0, 1.0, theta
        while i < hi:
            t *= (W - i) * (m - i) / ((i + 1) * (b - m + i + 1))
            s += t
            if t < _TAIL_RTOL * s:
                break
            i += 1
        p = math.exp(log_anchor) * s
    else:
        # Lower tail below theta: terms fall from theta-1 downward.
        log_anchor = log_hypergeom_pmf(theta - 1, n, W, m)
        s, t, i = 1.0, 1.0, theta - 1
        while i > lo:
            t *= i * (b - m + i) / ((W - i + 1) * (m - i + 1))
            s += t
            if t < _TAIL_RTOL * s:
                break
            i -= 1
        p = 1.0 - math.exp(log_anchor) * s
    return min(1.0, max(0.0, p))


def discovery_rate(n: int, m: int, theta: int, W: int, L: int) -> float:
    """Worst-case probability of learning a sequence of length ``L`` held by ``W`` users."""
    if L < 1:
        raise ParameterError(f"L >= 1 violated: L={L}")
    return round_probability(n, m, theta, W) ** L


@dataclass(frozen=True)
class DiscoveryQuery:
    n: int
    m: int
    theta: int
    W: int
    L: int

    def __post_init__(self):
        _check_query(self.n, self.m, self.theta, self.W)
        if self.L < 1:
            raise ParameterError(f"L >= 1 violated: L={self.L}")

    def round_probability(self) -> float:
        return round_probability(self.n, self.m, self.theta, self.W)

    def rate(self) -> float:
        return discovery_rate(self.n, self.m, self.theta, self.W, self.L)


def count_from_frequency(frequency: float, n: int) -> int:
    """``W = ceil(f * n)``, ignoring float noise below 1e-9."""
    return min(n, math.ceil(round(frequency * n, 9)))


def rate_at(n: int, frequency: float, epsilon: float, L: int, delta_mode) -> float:
    """Worst-case discovery rate at population ``n`` with parameters chosen for (epsilon, delta_mode).

    Returns 0 when no valid parameters exist at this ``n``.
    """
    try:
        params = choose_parameters(n, L, epsilon, delta_mode)
    except ValidationError:
        return 0.0
    return discovery_rate(n, params.m, params.theta, count_from_frequency(frequency, n), L)


def min_population(
    frequency: float,
    target_rate: float,
    epsilon: float,
    L: int,
    delta_mode="invn2",
    n_min: int = 10**4,
    n_cap: int = 10**9,
) -> int:
    """Smallest population at which a sequence of the given frequency reaches ``target_rate``.

    Exponential bracketing from ``n_min`` then bisection. Integer jumps in
    theta make the predicate non-monotone in places, so a bisection result
    is accepted only if the predicate also holds at the next three ``n``;
    otherwise the search resumes above the failing point.
    """
    if not 0 < frequency < 1:
        raise ParameterError(f"0 < frequency < 1 violated: frequency={frequency}")
    if not 0 < target_rate < 1:
        raise ParameterError(f"0 < target_rate < 1 violated: target_rate={target_rate}")

    def ok(n):
        return rate_at(n, frequency, epsilon, L, delta_mode) >= target_rate

    def stable(n):
        return all(ok(n + k) for k in (1, 2, 3))

    if ok(n_min) and stable(n_min):
        return n_min
    lo, hi = n_min, n_min
    while True:
        hi = min(hi * 2, n_cap)
        if ok(hi):
            break
        lo = hi
        if hi == n_cap:
            raise UnsatisfiableError(
                f"no n <= {n_cap} reaches rate {target_rate} at frequency {frequency}, epsilon {epsilon}"
            )
    while True:
        # Invariant: ok(lo) is False, ok(hi) is True.
        while hi - lo > 1:
            mid = (lo + hi) // 2
            if ok(mid):
                hi = mid
            else:
                lo = mid
        failing = next((hi + k for k in (1, 2, 3) if not ok(hi + k)), None)
        if failing is None:
            return hi
        lo = failing
        hi = max(hi, failing)
        while not ok(hi):
            lo = hi
            hi = min(hi * 2, n_cap)
            if lo == n_cap:
                raise UnsatisfiableError(
                    f"no stable n <= {n_cap} reaches rate {target_rate} at frequency {frequency}"
                )
